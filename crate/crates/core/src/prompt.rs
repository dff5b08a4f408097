//! Few-shot prompt construction for the two-call plan/execute protocol, and
//! parsing of the model's plan output.
//!
//! Prompts are labeled plain-text blocks separated by blank lines:
//!
//! ```text
//! <preamble>
//!
//! ### EXAMPLE
//! INPUT: ...
//! SPATIAL: ...            (only when the exemplar has spatial context)
//! THOUGHTS: ...
//! PLAN:
//! 1. syntactic simplification: split at the first "and"
//! OUTPUT: ...
//!
//! ### QUERY
//! INPUT: ...
//! SPATIAL: ...
//! THOUGHTS:
//! ```

use std::sync::LazyLock;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::spatial::SpatialContext;
use crate::types::{DesignGuideline, PlanAction, SimplificationPlan, SimplificationTechnique};

pub const EXAMPLE_HEADER: &str = "### EXAMPLE";
pub const QUERY_HEADER: &str = "### QUERY";
const NO_CHANGES: &str = "no changes needed";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PromptError {
    #[error("prompt template has no exemplars")]
    NoExemplars,
    #[error("input text is empty")]
    EmptyInput,
    #[error("malformed plan: {0}")]
    MalformedPlan(String),
    #[error("unknown technique `{0}`")]
    UnknownTechnique(String),
    #[error("malformed template file: {0}")]
    MalformedTemplate(String),
}

/// A worked few-shot example with its intermediate reasoning.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Exemplar {
    pub input_text: String,
    #[serde(default)]
    pub spatial_context_summary: Option<String>,
    pub thoughts: String,
    pub plan: SimplificationPlan,
    pub output_text: String,
}

impl Exemplar {
    pub fn is_valid(&self) -> bool {
        !self.output_text.trim().is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptTemplate {
    pub system_preamble: String,
    pub exemplars: Vec<Exemplar>,
    pub exemplar_order_seed: u64,
}

/// Collapses all whitespace runs to single spaces so a field never breaks the
/// block structure.
fn one_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Preamble listing the guidelines and techniques the model must follow.
pub fn default_preamble() -> String {
    let mut s = String::from(
        "You simplify step-by-step task instructions shown as text on an augmented reality \
         head-mounted display. First think about how the input fits the display, then write a \
         numbered plan of simplification techniques, then apply the plan in order.\n\nGuidelines:\n",
    );
    for g in DesignGuideline::ALL {
        s.push_str(&format!("- {}: {}\n", g.code(), g.statement()));
    }
    s.push_str("\nTechniques (use these names in the plan):\n");
    let rules = [
        "remove non-essential words and clauses; keep every task-critical object and quantity.",
        "split or rephrase complex sentences; never increase the number of displayed lines.",
        "replace complex words with simpler ones; never alter task-related terms.",
        "add only spatial relations of detected objects (e.g. \"on your right\") or size \
         comparisons with detected objects.",
    ];
    for (t, rule) in SimplificationTechnique::ALL.iter().zip(rules) {
        s.push_str(&format!("- {} ({}): {}\n", t.name(), t.code(), rule));
    }
    s.push_str(
        "\nIf the input already conforms, write \"PLAN:\" followed by \"no changes needed\".",
    );
    s
}

impl PromptTemplate {
    pub fn new(exemplars: Vec<Exemplar>, exemplar_order_seed: u64) -> Self {
        Self {
            system_preamble: default_preamble(),
            exemplars,
            exemplar_order_seed,
        }
    }

    /// Exemplars in the order the seed dictates.
    pub fn ordered_exemplars(&self) -> Vec<&Exemplar> {
        let mut refs: Vec<&Exemplar> = self.exemplars.iter().collect();
        let mut rng = ChaCha8Rng::seed_from_u64(self.exemplar_order_seed);
        refs.shuffle(&mut rng);
        refs
    }

    /// Serializes to the plain-text template file format.
    pub fn to_file_string(&self) -> String {
        let mut out = String::new();
        out.push_str("=== PREAMBLE ===\n");
        out.push_str(self.system_preamble.trim_end());
        out.push_str("\n=== SEED ===\n");
        out.push_str(&self.exemplar_order_seed.to_string());
        out.push('\n');
        for ex in &self.exemplars {
            out.push_str("=== EXEMPLAR ===\n");
            out.push_str(&render_exemplar_fields(ex));
            out.push('\n');
        }
        out
    }

    pub fn from_file_str(s: &str) -> Result<Self, PromptError> {
        let bad = |m: &str| PromptError::MalformedTemplate(m.to_string());
        let mut preamble = None;
        let mut seed = None;
        let mut exemplars = Vec::new();
        let mut section: Option<&str> = None;
        let mut buf: Vec<&str> = Vec::new();
        let mut flush = |section: Option<&str>, buf: &mut Vec<&str>| -> Result<(), PromptError> {
            let body = buf.join("\n");
            buf.clear();
            match section {
                None if body.trim().is_empty() => {}
                None => return Err(bad("content before first block marker")),
                Some("PREAMBLE") => preamble = Some(body.trim().to_string()),
                Some("SEED") => {
                    seed = Some(
                        body.trim()
                            .parse::<u64>()
                            .map_err(|_| bad("seed is not an integer"))?,
                    )
                }
                Some("EXEMPLAR") => exemplars.push(parse_exemplar(&body)?),
                Some(other) => return Err(bad(&format!("unknown block `{other}`"))),
            }
            Ok(())
        };
        for line in s.lines() {
            if let Some(name) = line
                .strip_prefix("=== ")
                .and_then(|l| l.strip_suffix(" ==="))
            {
                flush(section, &mut buf)?;
                section = Some(match name {
                    "PREAMBLE" => "PREAMBLE",
                    "SEED" => "SEED",
                    "EXEMPLAR" => "EXEMPLAR",
                    _ => return Err(bad(&format!("unknown block `{name}`"))),
                });
            } else {
                buf.push(line);
            }
        }
        flush(section, &mut buf)?;
        Ok(Self {
            system_preamble: preamble.ok_or_else(|| bad("missing PREAMBLE block"))?,
            exemplars,
            exemplar_order_seed: seed.unwrap_or(0),
        })
    }
}

/// Renders a plan as `THOUGHTS:` / `PLAN:` lines. `parse_plan` inverts this.
pub fn render_plan(plan: &SimplificationPlan) -> String {
    let mut s = format!("THOUGHTS: {}\nPLAN:\n", one_line(&plan.thoughts));
    if plan.actions.is_empty() {
        s.push_str(NO_CHANGES);
    } else {
        let lines: Vec<String> = plan
            .actions
            .iter()
            .enumerate()
            .map(|(i, a)| {
                format!(
                    "{}. {}: {}",
                    i + 1,
                    a.technique.name(),
                    one_line(&a.description)
                )
            })
            .collect();
        s.push_str(&lines.join("\n"));
    }
    s
}

fn render_exemplar_fields(ex: &Exemplar) -> String {
    let mut s = format!("INPUT: {}\n", one_line(&ex.input_text));
    if let Some(sp) = &ex.spatial_context_summary {
        s.push_str(&format!("SPATIAL: {}\n", one_line(sp)));
    }
    let plan = SimplificationPlan {
        thoughts: ex.thoughts.clone(),
        actions: ex.plan.actions.clone(),
    };
    s.push_str(&render_plan(&plan));
    s.push_str(&format!("\nOUTPUT: {}", one_line(&ex.output_text)));
    s
}

fn parse_exemplar(body: &str) -> Result<Exemplar, PromptError> {
    let field = |label: &str| {
        body.lines()
            .find_map(|l| l.strip_prefix(label))
            .map(|v| v.trim().to_string())
    };
    let input_text = field("INPUT:")
        .ok_or_else(|| PromptError::MalformedTemplate("exemplar without INPUT".into()))?;
    let output_text = field("OUTPUT:")
        .ok_or_else(|| PromptError::MalformedTemplate("exemplar without OUTPUT".into()))?;
    let plan = parse_plan(body)?;
    Ok(Exemplar {
        input_text,
        spatial_context_summary: field("SPATIAL:"),
        thoughts: plan.thoughts.clone(),
        plan,
        output_text,
    })
}

fn spatial_line(spatial: Option<&SpatialContext>) -> String {
    let summary = spatial.map(SpatialContext::summary).unwrap_or_default();
    if summary.is_empty() {
        "SPATIAL: none".to_string()
    } else {
        format!("SPATIAL: {}", one_line(&summary))
    }
}

fn prompt_prefix(template: &PromptTemplate) -> Result<String, PromptError> {
    if template.exemplars.is_empty() {
        return Err(PromptError::NoExemplars);
    }
    let mut blocks = vec![template.system_preamble.trim().to_string()];
    for ex in template.ordered_exemplars() {
        blocks.push(format!("{EXAMPLE_HEADER}\n{}", render_exemplar_fields(ex)));
    }
    Ok(blocks.join("\n\n"))
}

/// Prompt for the planning call. Ends with an open `THOUGHTS:` label.
pub fn build_plan_prompt(
    original: &str,
    spatial: Option<&SpatialContext>,
    template: &PromptTemplate,
) -> Result<String, PromptError> {
    if original.trim().is_empty() {
        return Err(PromptError::EmptyInput);
    }
    let prefix = prompt_prefix(template)?;
    Ok(format!(
        "{prefix}\n\n{QUERY_HEADER}\nINPUT: {}\n{}\nTHOUGHTS:",
        one_line(original),
        spatial_line(spatial)
    ))
}

/// Prompt for the execution call: the query carries the stage-one plan and
/// ends with an open `OUTPUT:` label.
pub fn build_execution_prompt(
    original: &str,
    plan: &SimplificationPlan,
    spatial: Option<&SpatialContext>,
    template: &PromptTemplate,
) -> Result<String, PromptError> {
    if original.trim().is_empty() {
        return Err(PromptError::EmptyInput);
    }
    let prefix = prompt_prefix(template)?;
    Ok(format!(
        "{prefix}\n\n{QUERY_HEADER}\nINPUT: {}\n{}\n{}\nOUTPUT:",
        one_line(original),
        spatial_line(spatial),
        render_plan(plan)
    ))
}

static ITEM_MARKER: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?:^|\s)(\d+)[.)](?:\s|$)").expect("marker pattern"));
static NO_CHANGE_RE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i)^(none|n/?a|no (changes?|simplifications?|actions?)( (are )?(needed|required|necessary))?)\.?$")
        .expect("no-change pattern")
});

fn find_label(text: &str, label: &str) -> Option<usize> {
    let mut from = 0;
    while let Some(i) = text[from..].find(label) {
        let at = from + i;
        if at == 0 || text[..at].ends_with('\n') || text[..at].ends_with(' ') {
            return Some(at);
        }
        from = at + label.len();
    }
    None
}

fn parse_action(item: &str) -> Result<PlanAction, PromptError> {
    let item = item.trim().trim_end_matches(';').trim();
    let (name, description) = match item.split_once(':') {
        Some((n, d)) => (n, d.trim()),
        None => (item, ""),
    };
    let name = name.trim().trim_matches('*').trim();
    let name = match name.rfind('(') {
        Some(i) if name.ends_with(')') => name[..i].trim(),
        _ => name,
    };
    let technique: SimplificationTechnique = name
        .parse()
        .map_err(|_| PromptError::UnknownTechnique(name.to_string()))?;
    Ok(PlanAction::new(technique, description))
}

/// Extracts thoughts and ordered actions from raw model output.
///
/// Actions are numbered `1.`, `2.`, ... either one per line or inline; each
/// reads `<technique name>: <description>`. A plan section saying "no
/// changes needed" yields an empty action list. Unknown technique names are
/// an error rather than being dropped.
pub fn parse_plan(raw: &str) -> Result<SimplificationPlan, PromptError> {
    let plan_at = find_label(raw, "PLAN:")
        .ok_or_else(|| PromptError::MalformedPlan("no PLAN: section".into()))?;
    let head = &raw[..plan_at];
    let thoughts = match find_label(head, "THOUGHTS:") {
        Some(t) => &head[t + "THOUGHTS:".len()..],
        None => head,
    };
    let thoughts = one_line(thoughts);

    let body = &raw[plan_at + "PLAN:".len()..];
    let end = [
        find_label(body, "OUTPUT:"),
        body.find(EXAMPLE_HEADER),
        body.find(QUERY_HEADER),
    ]
    .into_iter()
    .flatten()
    .min()
    .unwrap_or(body.len());
    let section = body[..end].trim();

    let mut markers: Vec<(usize, usize)> = Vec::new();
    let mut expected = 1usize;
    for c in ITEM_MARKER.captures_iter(section) {
        let n: usize = c[1].parse().unwrap_or(0);
        if n == expected {
            let whole = c.get(0).expect("match");
            markers.push((whole.start(), whole.end()));
            expected += 1;
        }
    }

    let items: Vec<&str> = if markers.is_empty() {
        let one = one_line(section);
        if one.is_empty() || NO_CHANGE_RE.is_match(&one) {
            return Ok(SimplificationPlan {
                thoughts,
                actions: Vec::new(),
            });
        }
        section
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .collect()
    } else {
        markers
            .iter()
            .enumerate()
            .map(|(i, (_, content_start))| {
                let stop = markers.get(i + 1).map_or(section.len(), |m| m.0);
                &section[*content_start..stop]
            })
            .collect()
    };

    let actions = items
        .into_iter()
        .map(|i| parse_action(&one_line(i)))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(SimplificationPlan { thoughts, actions })
}

/// Splits a prompt into its blank-line separated blocks.
pub fn prompt_blocks(prompt: &str) -> Vec<&str> {
    prompt.split("\n\n").collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus;
    use proptest::prelude::*;

    use SimplificationTechnique::*;

    #[test]
    fn dumbbell_prompt_ends_with_query() {
        let t = PromptTemplate::new(corpus::seed_exemplars()[..2].to_vec(), 3);
        let p = build_plan_prompt(corpus::DUMBBELL_INPUT, None, &t).unwrap();
        let last = prompt_blocks(&p).pop().unwrap();
        assert!(last.starts_with(QUERY_HEADER));
        assert!(last.contains(corpus::DUMBBELL_INPUT));
        assert!(last.contains("Grab a pair of 10 to 12 lb"));
        assert!(p.ends_with("THOUGHTS:"));
    }

    #[test]
    fn prompt_is_deterministic() {
        let t = PromptTemplate::new(corpus::seed_exemplars(), 11);
        let a = build_plan_prompt("Lift the mug.", None, &t).unwrap();
        let b = build_plan_prompt("Lift the mug.", None, &t.clone()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn seeds_only_reorder_exemplars() {
        let ex = corpus::seed_exemplars();
        let a = PromptTemplate::new(ex.clone(), 1);
        let b = (2..100)
            .map(|s| PromptTemplate::new(ex.clone(), s))
            .find(|b| b.ordered_exemplars() != a.ordered_exemplars())
            .expect("some seed reorders");
        let pa = build_plan_prompt("Lift the mug.", None, &a).unwrap();
        let pb = build_plan_prompt("Lift the mug.", None, &b).unwrap();
        assert_ne!(pa, pb);
        let (ba, bb) = (prompt_blocks(&pa), prompt_blocks(&pb));
        assert_eq!(ba.len(), bb.len());
        assert_eq!(ba[0], bb[0]);
        assert_eq!(ba.last(), bb.last());
        let mut ea: Vec<_> = ba[1..ba.len() - 1].to_vec();
        let mut eb: Vec<_> = bb[1..bb.len() - 1].to_vec();
        assert_ne!(ea, eb);
        ea.sort();
        eb.sort();
        assert_eq!(ea, eb);
    }

    #[test]
    fn zero_exemplars_is_an_error() {
        let t = PromptTemplate::new(vec![], 0);
        assert_eq!(
            build_plan_prompt("x", None, &t),
            Err(PromptError::NoExemplars)
        );
    }

    #[test]
    fn spatial_summary_is_in_query() {
        use crate::spatial::DetectedObject;
        let t = PromptTemplate::new(corpus::seed_exemplars(), 0);
        let ctx = SpatialContext::frozen(vec![DetectedObject::new("coffee mug", 45.0, 0.6)]);
        let p = build_plan_prompt("Place the coffee mug.", Some(&ctx), &t).unwrap();
        assert!(p.contains("SPATIAL: coffee mug (on your right, 0.6 m)"));
    }

    #[test]
    fn parses_inline_dumbbell_plan() {
        let raw = "The sentence is too long.\nPLAN: 1. syntactic simplification: split at first 'and' 2. syntactic simplification: split at second 'and' 3. syntactic simplification: adjust passive voice";
        let plan = parse_plan(raw).unwrap();
        assert_eq!(plan.thoughts, "The sentence is too long.");
        assert_eq!(plan.actions.len(), 3);
        assert!(plan
            .actions
            .iter()
            .all(|a| a.technique == SyntacticSimplification));
        assert_eq!(plan.actions[0].description, "split at first 'and'");
        assert_eq!(plan.actions[2].description, "adjust passive voice");
    }

    #[test]
    fn no_changes_needed_is_empty_plan() {
        let plan = parse_plan("THOUGHTS: Already short.\nPLAN:\nno changes needed").unwrap();
        assert!(plan.actions.is_empty());
        assert_eq!(plan.thoughts, "Already short.");
    }

    #[test]
    fn unknown_technique_is_rejected() {
        for t in SimplificationTechnique::ALL {
            let raw = format!("PLAN:\n1. {}: do it", t.name());
            assert_eq!(parse_plan(&raw).unwrap().actions[0].technique, t);
        }
        let raw = "PLAN:\n1. content reduction: drop filler\n2. summarization: shorten";
        assert_eq!(
            parse_plan(raw),
            Err(PromptError::UnknownTechnique("summarization".into()))
        );
    }

    #[test]
    fn missing_plan_section_is_malformed() {
        assert!(matches!(
            parse_plan("just text"),
            Err(PromptError::MalformedPlan(_))
        ));
    }

    #[test]
    fn plan_section_stops_at_output() {
        let raw = "x\nPLAN:\n1. content reduction: drop filler\nOUTPUT: 1. not a step";
        assert_eq!(parse_plan(raw).unwrap().actions.len(), 1);
    }

    #[test]
    fn lenient_technique_spelling() {
        let raw = "PLAN:\n1. **Content Reduction (A1)**: drop filler\n2. A3: simpler words";
        let plan = parse_plan(raw).unwrap();
        assert_eq!(plan.actions[0].technique, ContentReduction);
        assert_eq!(plan.actions[1].technique, LexicalSimplification);
    }

    #[test]
    fn template_file_round_trip() {
        let t = PromptTemplate::new(corpus::seed_exemplars(), 42);
        let back = PromptTemplate::from_file_str(&t.to_file_string()).unwrap();
        assert_eq!(back, t);
        assert!(PromptTemplate::from_file_str("=== BOGUS ===\n").is_err());
    }

    #[test]
    fn execution_prompt_embeds_plan() {
        let t = PromptTemplate::new(corpus::seed_exemplars(), 0);
        let plan = corpus::dumbbell_plan();
        let p = build_execution_prompt(corpus::DUMBBELL_INPUT, &plan, None, &t).unwrap();
        assert!(p.contains(&render_plan(&plan)));
        assert!(p.ends_with("OUTPUT:"));
    }

    fn technique() -> impl Strategy<Value = SimplificationTechnique> {
        prop::sample::select(SimplificationTechnique::ALL.to_vec())
    }

    fn phrase() -> impl Strategy<Value = String> {
        prop::collection::vec("[a-zA-Z0-9',\\-]{1,8}", 0..8).prop_map(|w| w.join(" "))
    }

    proptest! {
        #[test]
        fn plan_round_trip(
            thoughts in phrase(),
            actions in prop::collection::vec((technique(), phrase()), 0..8),
        ) {
            let plan = SimplificationPlan {
                thoughts,
                actions: actions.into_iter().map(|(t, d)| PlanAction::new(t, d)).collect(),
            };
            prop_assert_eq!(parse_plan(&render_plan(&plan)).unwrap(), plan);
        }
    }
}
