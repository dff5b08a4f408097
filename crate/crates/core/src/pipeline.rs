//! End-to-end simplification of one step or a whole manual:
//! plan, candidates, error scores, calibration, validation, selection and
//! spatial elaboration.

use std::collections::BTreeSet;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::calibration::{calibrate, select_eligible, CalibrationError, CalibrationModel};
use crate::classifier::{ClassifierError, ErrorClassifier};
use crate::generation::{simplify_plan_then_execute, GenerationConfig, GenerationError};
use crate::llm::LlmBackend;
use crate::prompt::PromptTemplate;
use crate::spatial::{elaborate, SpatialContext};
use crate::types::{CandidateSet, ManualDocument, SimplificationPlan, StepStatus};
use crate::validators::{DisplayProfile, ValidationReport, Validator, DEFAULT_MEANING_THRESHOLD};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PipelineError {
    #[error(transparent)]
    Generation(#[from] GenerationError),
    #[error(transparent)]
    Classifier(#[from] ClassifierError),
    #[error(transparent)]
    Calibration(#[from] CalibrationError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub generation: GenerationConfig,
    pub profile: DisplayProfile,
    pub meaning_threshold: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            generation: GenerationConfig::default(),
            profile: DisplayProfile::default(),
            meaning_threshold: DEFAULT_MEANING_THRESHOLD,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepOutcome {
    pub step_id: u32,
    pub plan: SimplificationPlan,
    /// All candidates with error scores and calibrated probabilities.
    pub candidates: CandidateSet,
    /// One report per candidate, in candidate order.
    pub reports: Vec<ValidationReport>,
    /// Selected candidate; `None` when no candidate passed validation.
    pub chosen_index: Option<usize>,
    /// Selected text before spatial elaboration, or the original text when
    /// nothing passed.
    pub selected_text: String,
    /// Final display text after spatial elaboration.
    pub chosen_text: String,
    pub fell_back: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManualOutcome {
    pub manual_id: String,
    pub model_version: u64,
    pub steps: Vec<StepOutcome>,
}

impl ManualOutcome {
    pub fn any_fallback(&self) -> bool {
        self.steps.iter().any(|s| s.fell_back)
    }
}

#[derive(Clone)]
pub struct Pipeline {
    pub template: PromptTemplate,
    pub backend: Arc<dyn LlmBackend>,
    pub classifier: Arc<dyn ErrorClassifier>,
    pub config: PipelineConfig,
}

impl Pipeline {
    pub fn new(
        template: PromptTemplate,
        backend: Arc<dyn LlmBackend>,
        classifier: Arc<dyn ErrorClassifier>,
        config: PipelineConfig,
    ) -> Self {
        Self {
            template,
            backend,
            classifier,
            config,
        }
    }

    fn validator(&self, glossary: &BTreeSet<String>) -> Validator {
        let mut v = Validator::new(
            self.config.profile,
            glossary.clone(),
            self.classifier.clone(),
        );
        v.meaning_threshold = self.config.meaning_threshold;
        v
    }

    pub fn simplify_step(
        &self,
        step_id: u32,
        original: &str,
        spatial: Option<&SpatialContext>,
        glossary: &BTreeSet<String>,
        model: &CalibrationModel,
    ) -> Result<StepOutcome, PipelineError> {
        let (plan, mut set) = simplify_plan_then_execute(
            original,
            spatial,
            &self.template,
            self.backend.as_ref(),
            &self.config.generation,
        )?;
        for c in &mut set.candidates {
            c.error_probs = Some(self.classifier.classify(original, &c.text)?);
        }
        let set = calibrate(&set, model)?;

        let validator = self.validator(glossary);
        let reports = set
            .candidates
            .iter()
            .map(|c| {
                validator.validate(
                    &format!("{step_id}/{}", c.candidate_index),
                    original,
                    &c.text,
                )
            })
            .collect::<Result<Vec<_>, _>>()?;
        let eligible: Vec<bool> = reports.iter().map(ValidationReport::passed).collect();
        let chosen = select_eligible(&set, &eligible)?;

        let selected_text = chosen.map_or(original, |c| c.text.as_str()).to_string();
        let chosen_text = match spatial {
            Some(ctx) => elaborate(&selected_text, ctx),
            None => selected_text.clone(),
        };
        Ok(StepOutcome {
            step_id,
            plan,
            chosen_index: chosen.map(|c| c.candidate_index),
            fell_back: chosen.is_none(),
            candidates: set,
            reports,
            selected_text,
            chosen_text,
        })
    }

    /// Simplifies every step of `doc` in order, elaborating with the step's
    /// frozen snapshot when it has one, otherwise with `live`. The edited
    /// document stores the selection before elaboration (display text is
    /// derived from it and the snapshot) and still carries the base version
    /// it was derived from.
    pub fn simplify_manual(
        &self,
        doc: &ManualDocument,
        live: Option<&SpatialContext>,
        model: &CalibrationModel,
    ) -> Result<(ManualDocument, ManualOutcome), PipelineError> {
        let glossary = doc.glossary();
        let mut out = doc.clone();
        let mut steps = Vec::with_capacity(doc.steps.len());
        for step in &mut out.steps {
            let ctx = step.spatial_snapshot.as_ref().or(live);
            let outcome =
                self.simplify_step(step.step_id, &step.original_text, ctx, &glossary, model)?;
            step.simplified_text = Some(outcome.selected_text.clone());
            step.status = StepStatus::Simplified;
            steps.push(outcome);
        }
        Ok((
            out,
            ManualOutcome {
                manual_id: doc.manual_id.clone(),
                model_version: model.version,
                steps,
            },
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifier::RuleBasedClassifier;
    use crate::corpus;
    use crate::llm::{LlmSample, ScriptedBackend};
    use crate::spatial::DetectedObject;
    use crate::types::ErrorRegistry;

    fn pipeline(backend: ScriptedBackend) -> Pipeline {
        Pipeline::new(
            corpus::default_template(),
            Arc::new(backend),
            Arc::new(RuleBasedClassifier::default()),
            PipelineConfig::default(),
        )
    }

    fn model() -> CalibrationModel {
        CalibrationModel::initial(&ErrorRegistry::default())
    }

    #[test]
    fn falls_back_to_original_when_nothing_passes() {
        let b = ScriptedBackend::staged(
            vec![LlmSample::new(
                "PLAN:\n1. content reduction: drop all",
                None,
            )],
            vec![LlmSample::new("Pour.", None), LlmSample::new("", None)],
        );
        let mut p = pipeline(b);
        p.config.generation.n = 2;
        let original = "Place dripper on mug and pour water";
        let out = p
            .simplify_step(1, original, None, &BTreeSet::new(), &model())
            .unwrap();
        assert!(out.fell_back);
        assert_eq!(out.chosen_index, None);
        assert_eq!(out.chosen_text, original);
        assert_eq!(out.reports.len(), 2);
    }

    #[test]
    fn ineligible_high_q_candidate_is_skipped() {
        // Candidate 0 has the higher raw probability but drops the task term.
        let b = ScriptedBackend::staged(
            vec![LlmSample::new("PLAN:\nno changes needed", None)],
            vec![
                LlmSample::new("Place it on the coffee mug.", Some(vec![-0.01])),
                LlmSample::new("Place dripper on coffee mug.", Some(vec![-2.0])),
            ],
        );
        let mut p = pipeline(b);
        p.config.generation.n = 2;
        let glossary: BTreeSet<String> = ["dripper".to_string()].into();
        let out = p
            .simplify_step(1, corpus::COFFEE_PAIRS[0].0, None, &glossary, &model())
            .unwrap();
        assert_eq!(out.chosen_index, Some(1));
        assert!(!out.reports[0].passed());
    }

    #[test]
    fn spatial_elaboration_applies_after_selection() {
        let b = ScriptedBackend::staged(
            vec![LlmSample::new("PLAN:\nno changes needed", None)],
            vec![LlmSample::new("Place coffee mug with dripper.", None)],
        );
        let mut p = pipeline(b);
        p.config.generation.n = 1;
        let ctx = SpatialContext::frozen(vec![DetectedObject::new("coffee mug", 45.0, 0.5)]);
        let out = p
            .simplify_step(
                1,
                "Then place the coffee mug with the dripper",
                Some(&ctx),
                &BTreeSet::new(),
                &model(),
            )
            .unwrap();
        assert_eq!(out.selected_text, "Place coffee mug with dripper.");
        assert_eq!(
            out.chosen_text,
            "Place coffee mug on your right with dripper."
        );
    }

    #[test]
    fn coffee_manual_with_fixture() {
        let b = ScriptedBackend::from_json(corpus::COFFEE_MOCK_FIXTURE).unwrap();
        let p = pipeline(b);
        let doc = corpus::coffee_manual();
        let (edited, outcome) = p.simplify_manual(&doc, None, &model()).unwrap();
        assert_eq!(outcome.steps.len(), 9);
        assert!(outcome
            .steps
            .iter()
            .all(|s| s.candidates.n == 5 && s.candidates.candidates.len() == 5));
        assert!(edited
            .steps
            .iter()
            .all(|s| s.status == StepStatus::Simplified));
        assert_eq!(edited.version, doc.version);
    }
}
