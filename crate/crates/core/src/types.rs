//! Shared domain vocabulary: manuals, steps, techniques, guidelines,
//! candidates, plans and the error taxonomy.
//!
//! Every type here has a canonical snake_case JSON encoding which doubles as
//! the service wire format and the on-disk store format.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, SubsecRound, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::spatial::SpatialContext;

/// Tag prefix marking a protected task term in a manual's tag set.
pub const GLOSSARY_TAG_PREFIX: &str = "term:";

/// Default number of sampled candidates per step.
pub const DEFAULT_CANDIDATE_COUNT: usize = 5;

/// Current UTC time truncated to whole seconds.
pub fn now_utc() -> DateTime<Utc> {
    Utc::now().trunc_subsecs(0)
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("unknown {kind} `{name}`")]
pub struct UnknownVariant {
    pub kind: &'static str,
    pub name: String,
}

/// The four simplification techniques (A1-A4).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimplificationTechnique {
    ContentReduction,
    SyntacticSimplification,
    LexicalSimplification,
    ElaborativeSimplification,
}

impl SimplificationTechnique {
    pub const ALL: [SimplificationTechnique; 4] = [
        SimplificationTechnique::ContentReduction,
        SimplificationTechnique::SyntacticSimplification,
        SimplificationTechnique::LexicalSimplification,
        SimplificationTechnique::ElaborativeSimplification,
    ];

    /// Human-readable name used in prompts and plans.
    pub fn name(self) -> &'static str {
        match self {
            Self::ContentReduction => "content reduction",
            Self::SyntacticSimplification => "syntactic simplification",
            Self::LexicalSimplification => "lexical simplification",
            Self::ElaborativeSimplification => "elaborative simplification",
        }
    }

    pub fn code(self) -> &'static str {
        match self {
            Self::ContentReduction => "A1",
            Self::SyntacticSimplification => "A2",
            Self::LexicalSimplification => "A3",
            Self::ElaborativeSimplification => "A4",
        }
    }
}

impl fmt::Display for SimplificationTechnique {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SimplificationTechnique {
    type Err = UnknownVariant;

    /// Accepts the display name, the snake_case name or the A1-A4 code,
    /// case-insensitively.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.trim().to_lowercase().replace(['_', '-'], " ");
        let norm = norm.split_whitespace().collect::<Vec<_>>().join(" ");
        Self::ALL
            .into_iter()
            .find(|t| t.name() == norm || t.code().eq_ignore_ascii_case(&norm))
            .ok_or_else(|| UnknownVariant {
                kind: "technique",
                name: s.trim().to_string(),
            })
    }
}

/// Design guidelines DG1-DG3.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DesignGuideline {
    MeaningPreservation,
    #[serde(rename = "ar_constraints")]
    ARConstraints,
    LengthOverGrammar,
}

impl DesignGuideline {
    pub const ALL: [DesignGuideline; 3] = [
        DesignGuideline::MeaningPreservation,
        DesignGuideline::ARConstraints,
        DesignGuideline::LengthOverGrammar,
    ];

    pub fn code(self) -> &'static str {
        match self {
            Self::MeaningPreservation => "DG1",
            Self::ARConstraints => "DG2",
            Self::LengthOverGrammar => "DG3",
        }
    }

    pub fn statement(self) -> &'static str {
        match self {
            Self::MeaningPreservation => {
                "Preserve the meaning of the original instruction; never drop or alter task-critical content."
            }
            Self::ARConstraints => {
                "Respect the head-mounted display: keep the text within the field of view and avoid \
                 increasing cognitive load; do not increase the number of displayed lines."
            }
            Self::LengthOverGrammar => {
                "Prefer shorter text over full grammatical sentences."
            }
        }
    }
}

/// Error classes scored by the error classifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorClass {
    MeaningAltered,
    SyntacticallyComplex,
    TooLong,
}

impl ErrorClass {
    pub fn name(self) -> &'static str {
        match self {
            Self::MeaningAltered => "meaning_altered",
            Self::SyntacticallyComplex => "syntactically_complex",
            Self::TooLong => "too_long",
        }
    }
}

impl FromStr for ErrorClass {
    type Err = UnknownVariant;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_lowercase().as_str() {
            "meaning_altered" => Ok(Self::MeaningAltered),
            "syntactically_complex" => Ok(Self::SyntacticallyComplex),
            "too_long" => Ok(Self::TooLong),
            other => Err(UnknownVariant {
                kind: "error class",
                name: other.to_string(),
            }),
        }
    }
}

/// Ordered registry assigning each error class a stable feature index.
///
/// The calibration model dimension is `1 + len()` and the registry hash is
/// persisted with the model so a model is never applied under a different
/// ordering.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<ErrorClass>", into = "Vec<ErrorClass>")]
pub struct ErrorRegistry {
    classes: Vec<ErrorClass>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RegistryError {
    #[error("error registry is empty")]
    Empty,
    #[error("error class {0:?} registered twice")]
    Duplicate(ErrorClass),
}

impl ErrorRegistry {
    pub fn new(classes: Vec<ErrorClass>) -> Result<Self, RegistryError> {
        if classes.is_empty() {
            return Err(RegistryError::Empty);
        }
        for (i, c) in classes.iter().enumerate() {
            if classes[..i].contains(c) {
                return Err(RegistryError::Duplicate(*c));
            }
        }
        Ok(Self { classes })
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn classes(&self) -> &[ErrorClass] {
        &self.classes
    }

    pub fn index_of(&self, class: ErrorClass) -> Option<usize> {
        self.classes.iter().position(|c| *c == class)
    }

    /// Stable hex digest of the ordered class names.
    pub fn hash(&self) -> String {
        let mut hasher = Sha256::new();
        for c in &self.classes {
            hasher.update(c.name().as_bytes());
            hasher.update(b"\n");
        }
        hex::encode(hasher.finalize())
    }
}

impl Default for ErrorRegistry {
    fn default() -> Self {
        Self {
            classes: vec![
                ErrorClass::MeaningAltered,
                ErrorClass::SyntacticallyComplex,
                ErrorClass::TooLong,
            ],
        }
    }
}

impl TryFrom<Vec<ErrorClass>> for ErrorRegistry {
    type Error = RegistryError;
    fn try_from(v: Vec<ErrorClass>) -> Result<Self, Self::Error> {
        Self::new(v)
    }
}

impl From<ErrorRegistry> for Vec<ErrorClass> {
    fn from(r: ErrorRegistry) -> Self {
        r.classes
    }
}

/// Per-class error probabilities for one (original, candidate) pair,
/// indexed by the active [`ErrorRegistry`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorProbabilities {
    pub probs: Vec<f64>,
    pub classifier_id: String,
}

impl ErrorProbabilities {
    pub fn get(&self, registry: &ErrorRegistry, class: ErrorClass) -> Option<f64> {
        registry
            .index_of(class)
            .and_then(|i| self.probs.get(i).copied())
    }

    pub fn is_valid_for(&self, registry: &ErrorRegistry) -> bool {
        self.probs.len() == registry.len() && self.probs.iter().all(|p| (0.0..=1.0).contains(p))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepStatus {
    Draft,
    Simplified,
    Reviewed,
    Published,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManualStep {
    pub step_id: u32,
    pub original_text: String,
    #[serde(default)]
    pub simplified_text: Option<String>,
    #[serde(default = "draft")]
    pub status: StepStatus,
    #[serde(default)]
    pub spatial_snapshot: Option<SpatialContext>,
}

fn draft() -> StepStatus {
    StepStatus::Draft
}

impl ManualStep {
    pub fn draft(step_id: u32, original_text: impl Into<String>) -> Self {
        Self {
            step_id,
            original_text: original_text.into(),
            simplified_text: None,
            status: StepStatus::Draft,
            spatial_snapshot: None,
        }
    }

    /// Text the AR client should show: the simplified text when present.
    pub fn display_text(&self) -> &str {
        self.simplified_text
            .as_deref()
            .unwrap_or(&self.original_text)
    }

    /// Display text elaborated with the frozen snapshot, or with `live` when
    /// the step has not been frozen yet.
    pub fn rendered_text(&self, live: Option<&SpatialContext>) -> String {
        match self.spatial_snapshot.as_ref().or(live) {
            Some(ctx) => crate::spatial::elaborate(self.display_text(), ctx),
            None => self.display_text().to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManualDocument {
    #[serde(default)]
    pub manual_id: String,
    pub title: String,
    pub steps: Vec<ManualStep>,
    #[serde(default)]
    pub tags: BTreeSet<String>,
    #[serde(default = "first_version")]
    pub version: u32,
    #[serde(default = "now_utc")]
    pub created_at: DateTime<Utc>,
    #[serde(default = "now_utc")]
    pub updated_at: DateTime<Utc>,
}

fn first_version() -> u32 {
    1
}

/// One broken invariant of a [`ManualDocument`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub field: String,
    pub rule: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.rule)
    }
}

impl Violation {
    fn new(field: impl Into<String>, rule: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            rule: rule.into(),
        }
    }
}

/// Checks every [`ManualDocument`] invariant. An empty result means the
/// document is well-formed.
pub fn validate_manual(doc: &ManualDocument) -> Vec<Violation> {
    let mut out = Vec::new();
    if doc.title.trim().is_empty() {
        out.push(Violation::new("title", "title must be nonempty"));
    }
    if doc.version < 1 {
        out.push(Violation::new("version", "version must be >= 1"));
    }
    if doc.steps.is_empty() {
        out.push(Violation::new("steps", "steps must be nonempty"));
    }
    let ids: Vec<u32> = doc.steps.iter().map(|s| s.step_id).collect();
    let mut seen = BTreeSet::new();
    for id in &ids {
        if !seen.insert(*id) {
            out.push(Violation::new(
                "steps.step_id",
                format!("duplicate step_id {id}"),
            ));
        }
    }
    if !ids.iter().enumerate().all(|(i, id)| *id as usize == i + 1) {
        out.push(Violation::new(
            "steps.step_id",
            format!("step_ids must be contiguous 1..{}, got {ids:?}", ids.len()),
        ));
    }
    for step in &doc.steps {
        let field = format!("steps[{}]", step.step_id);
        if step.original_text.trim().is_empty() {
            out.push(Violation::new(
                format!("{field}.original_text"),
                "original_text must be nonempty",
            ));
        }
        if matches!(step.status, StepStatus::Reviewed | StepStatus::Published)
            && step.simplified_text.is_none()
        {
            out.push(Violation::new(
                format!("{field}.simplified_text"),
                "reviewed or published step requires simplified_text",
            ));
        }
    }
    out
}

impl ManualDocument {
    /// Builds a version-1 draft manual from plain step texts.
    pub fn new<I, S>(title: impl Into<String>, steps: I) -> Result<Self, Vec<Violation>>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let now = now_utc();
        let steps = steps
            .into_iter()
            .enumerate()
            .map(|(i, t)| ManualStep::draft(i as u32 + 1, t))
            .collect();
        Self::from_parts(
            String::new(),
            title.into(),
            steps,
            BTreeSet::new(),
            1,
            now,
            now,
        )
    }

    /// Constructor used for fully specified documents; fails exactly when
    /// [`validate_manual`] reports violations.
    pub fn from_parts(
        manual_id: String,
        title: String,
        steps: Vec<ManualStep>,
        tags: BTreeSet<String>,
        version: u32,
        created_at: DateTime<Utc>,
        updated_at: DateTime<Utc>,
    ) -> Result<Self, Vec<Violation>> {
        let doc = Self {
            manual_id,
            title,
            steps,
            tags,
            version,
            created_at,
            updated_at,
        };
        let violations = validate_manual(&doc);
        if violations.is_empty() {
            Ok(doc)
        } else {
            Err(violations)
        }
    }

    pub fn with_tags<I, S>(mut self, tags: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.tags.extend(tags.into_iter().map(Into::into));
        self
    }

    /// Parses a plain-text manual: one step per nonempty line.
    pub fn from_plain_text(title: impl Into<String>, text: &str) -> Result<Self, Vec<Violation>> {
        Self::new(
            title,
            text.lines()
                .map(str::trim)
                .filter(|l| !l.is_empty())
                .map(String::from),
        )
    }

    pub fn step(&self, step_id: u32) -> Option<&ManualStep> {
        self.steps.iter().find(|s| s.step_id == step_id)
    }

    pub fn step_mut(&mut self, step_id: u32) -> Option<&mut ManualStep> {
        self.steps.iter_mut().find(|s| s.step_id == step_id)
    }

    /// Protected task terms, stored as `term:<word>` tags.
    pub fn glossary(&self) -> BTreeSet<String> {
        self.tags
            .iter()
            .filter_map(|t| t.strip_prefix(GLOSSARY_TAG_PREFIX))
            .map(|t| t.trim().to_lowercase())
            .filter(|t| !t.is_empty())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanAction {
    pub technique: SimplificationTechnique,
    pub description: String,
}

impl PlanAction {
    pub fn new(technique: SimplificationTechnique, description: impl Into<String>) -> Self {
        Self {
            technique,
            description: description.into(),
        }
    }
}

/// The model's technique plan: free-text reasoning plus ordered actions.
/// An empty action list means the input already conforms.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SimplificationPlan {
    pub thoughts: String,
    pub actions: Vec<PlanAction>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSimplification {
    pub text: String,
    pub raw_probability: f64,
    #[serde(default)]
    pub error_probs: Option<ErrorProbabilities>,
    #[serde(default)]
    pub calibrated_probability: Option<f64>,
    pub candidate_index: usize,
}

impl CandidateSimplification {
    pub fn new(candidate_index: usize, text: impl Into<String>, raw_probability: f64) -> Self {
        Self {
            text: text.into(),
            raw_probability,
            error_probs: None,
            calibrated_probability: None,
            candidate_index,
        }
    }

    pub fn is_valid(&self) -> bool {
        self.raw_probability > 0.0
            && self.raw_probability <= 1.0
            && self
                .calibrated_probability
                .is_none_or(|q| (0.0..=1.0).contains(&q))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSet {
    pub original_text: String,
    pub candidates: Vec<CandidateSimplification>,
    pub n: usize,
}

impl CandidateSet {
    pub fn new(original_text: impl Into<String>, candidates: Vec<CandidateSimplification>) -> Self {
        let n = candidates.len();
        Self {
            original_text: original_text.into(),
            candidates,
            n,
        }
    }

    /// `len(candidates) == n`, indices unique and every candidate in range.
    pub fn is_valid(&self) -> bool {
        let mut seen = BTreeSet::new();
        self.candidates.len() == self.n
            && self
                .candidates
                .iter()
                .all(|c| c.is_valid() && seen.insert(c.candidate_index))
    }
}
