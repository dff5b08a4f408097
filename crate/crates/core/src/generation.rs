//! Two-call plan/execute protocol over an [`LlmBackend`].

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::llm::{LlmBackend, LlmError, LlmRequest, RequestPurpose};
use crate::prompt::{
    build_execution_prompt, build_plan_prompt, parse_plan, PromptError, PromptTemplate,
    EXAMPLE_HEADER, QUERY_HEADER,
};
use crate::spatial::SpatialContext;
use crate::types::{
    CandidateSet, CandidateSimplification, SimplificationPlan, DEFAULT_CANDIDATE_COUNT,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GenerationError {
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Backend(#[from] LlmError),
    #[error("candidate count must be at least 1")]
    ZeroCandidates,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenerationConfig {
    pub n: usize,
    pub plan_temperature: f64,
    pub candidate_temperature: f64,
    pub max_output_length: usize,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        Self {
            n: DEFAULT_CANDIDATE_COUNT,
            plan_temperature: 0.0,
            candidate_temperature: 0.7,
            max_output_length: 256,
        }
    }
}

/// `exp(mean token log-probability)`, or the uniform `1/n` when the backend
/// reports no log-probabilities.
pub fn raw_probability(token_logprobs: Option<&[f64]>, n: usize) -> f64 {
    match token_logprobs {
        Some(lp) if !lp.is_empty() && lp.iter().all(|x| x.is_finite()) => {
            let mean = lp.iter().sum::<f64>() / lp.len() as f64;
            mean.exp().clamp(f64::MIN_POSITIVE, 1.0)
        }
        _ => 1.0 / n.max(1) as f64,
    }
}

/// Trims a completion down to the simplified text: drops an echoed
/// `OUTPUT:` label and anything from a following block header on.
fn clean_output(text: &str) -> String {
    let mut t = text.trim();
    if let Some(rest) = t.strip_prefix("OUTPUT:") {
        t = rest.trim_start();
    }
    let cut = [
        t.find(EXAMPLE_HEADER),
        t.find(QUERY_HEADER),
        t.find("\nINPUT:"),
    ]
    .into_iter()
    .flatten()
    .min()
    .unwrap_or(t.len());
    t[..cut].trim().to_string()
}

/// Stage one: asks for thoughts and a technique plan.
pub fn generate_plan(
    original: &str,
    spatial: Option<&SpatialContext>,
    template: &PromptTemplate,
    backend: &dyn LlmBackend,
    config: &GenerationConfig,
) -> Result<SimplificationPlan, GenerationError> {
    let prompt = build_plan_prompt(original, spatial, template)?;
    let resp = backend.complete_exact(&LlmRequest {
        prompt,
        sample_count: 1,
        temperature: config.plan_temperature,
        max_output_length: config.max_output_length,
        purpose: RequestPurpose::Plan,
    })?;
    Ok(parse_plan(&resp.samples[0].text)?)
}

/// Stage two: applies `plan` and samples exactly `config.n` candidates.
pub fn generate_candidates(
    original: &str,
    plan: &SimplificationPlan,
    spatial: Option<&SpatialContext>,
    template: &PromptTemplate,
    backend: &dyn LlmBackend,
    config: &GenerationConfig,
) -> Result<CandidateSet, GenerationError> {
    let n = config.n;
    if n == 0 {
        return Err(GenerationError::ZeroCandidates);
    }
    let prompt = build_execution_prompt(original, plan, spatial, template)?;
    let resp = backend.complete_exact(&LlmRequest {
        prompt,
        sample_count: n,
        temperature: config.candidate_temperature,
        max_output_length: config.max_output_length,
        purpose: RequestPurpose::Execute,
    })?;
    let candidates = resp
        .samples
        .iter()
        .enumerate()
        .map(|(i, s)| {
            CandidateSimplification::new(
                i,
                clean_output(&s.text),
                raw_probability(s.token_logprobs.as_deref(), n),
            )
        })
        .collect();
    Ok(CandidateSet::new(original, candidates))
}

pub fn simplify_plan_then_execute(
    original: &str,
    spatial: Option<&SpatialContext>,
    template: &PromptTemplate,
    backend: &dyn LlmBackend,
    config: &GenerationConfig,
) -> Result<(SimplificationPlan, CandidateSet), GenerationError> {
    let plan = generate_plan(original, spatial, template, backend, config)?;
    let set = generate_candidates(original, &plan, spatial, template, backend, config)?;
    Ok((plan, set))
}
