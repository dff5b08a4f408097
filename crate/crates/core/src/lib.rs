//! Automated text simplification for augmented-reality task guidance.
//!
//! A language model first plans which simplification techniques to apply,
//! then samples several candidate rewrites. Candidates are scored for
//! guideline violations, recalibrated with a learned diagonal-affine softmax,
//! gated by validators and finally enriched with egocentric spatial
//! references from object detections.

pub mod calibration;
pub mod classifier;
pub mod corpus;
pub mod generation;
pub mod llm;
pub mod pipeline;
pub mod prompt;
pub mod spatial;
pub mod store;
pub mod text;
pub mod types;
pub mod validators;

pub use calibration::{
    calibrate, feature_vector, select, train, CalibrationError, CalibrationModel, GoldDataset,
    GoldSample, GoldSource, TrainConfig, TrainReport,
};
pub use classifier::{ErrorClassifier, RemoteClassifier, RuleBasedClassifier};
pub use generation::{generate_candidates, simplify_plan_then_execute, GenerationConfig};
pub use llm::{
    HttpBackend, LlmBackend, LlmError, LlmRequest, LlmResponse, LlmSample, ScriptedBackend,
};
pub use pipeline::{ManualOutcome, Pipeline, PipelineConfig, PipelineError, StepOutcome};
pub use prompt::{build_plan_prompt, parse_plan, render_plan, PromptTemplate};
pub use spatial::{DetectedObject, DetectionFeed, SpatialContext, SpatialRelation};
pub use store::{ManualStore, StoreError};
pub use types::*;
pub use validators::{DisplayProfile, ValidationReport, Validator};
