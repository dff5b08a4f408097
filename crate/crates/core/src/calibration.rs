//! Error-aware calibration of candidate probabilities.
//!
//! Each candidate is described by the feature vector `f = [p, p^e_1 .. p^e_m]`
//! (raw model probability followed by the classifier's error scores). A
//! diagonal weight vector and scalar bias give one logit per candidate,
//!
//! ```text
//! z_i = sum_j w_j * f_ij + b
//! q   = softmax(z_1 .. z_n)
//! ```
//!
//! and the candidate with the largest `q` is selected. Weights are learned
//! from independent gold (original, simplified, verdict) triples by gradient
//! descent on the binary logistic loss of `sigmoid(z)`.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classifier::{ClassifierError, ErrorClassifier};
use crate::types::{CandidateSet, CandidateSimplification, ErrorClass, ErrorRegistry};

/// Probabilities are clamped to `[EPS, 1 - EPS]` inside the loss.
pub const PROB_EPS: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CalibrationError {
    #[error("candidate {0} has no error probabilities")]
    MissingErrorProbs(usize),
    #[error("feature length {got} does not match model dimension {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("candidate set is not calibrated")]
    UncalibratedSet,
    #[error("candidate set is empty")]
    EmptySet,
    #[error("model was trained for error registry {model}, active registry is {active}")]
    RegistryMismatch { model: String, active: String },
    #[error("model parameters are not finite")]
    NonFinite,
    #[error("gold dataset is empty")]
    EmptyDataset,
    #[error("invalid gold sample {index}: {reason}")]
    InvalidSample { index: usize, reason: String },
    #[error(transparent)]
    Classifier(#[from] ClassifierError),
    #[error("model JSON: {0}")]
    Json(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationModel {
    /// Weight for `p` followed by one weight per registered error class.
    pub w_diag: Vec<f64>,
    pub b: f64,
    pub error_registry_hash: String,
    pub trained_on: usize,
    pub version: u64,
}

impl CalibrationModel {
    /// Untrained prior: `p` helps, every error hurts.
    pub fn initial(registry: &ErrorRegistry) -> Self {
        let mut w = vec![-1.0; 1 + registry.len()];
        w[0] = 1.0;
        Self {
            w_diag: w,
            b: 0.0,
            error_registry_hash: registry.hash(),
            trained_on: 0,
            version: 0,
        }
    }

    pub fn dimension(&self) -> usize {
        self.w_diag.len()
    }

    pub fn check(&self, registry: &ErrorRegistry) -> Result<(), CalibrationError> {
        if self.error_registry_hash != registry.hash() {
            return Err(CalibrationError::RegistryMismatch {
                model: self.error_registry_hash.clone(),
                active: registry.hash(),
            });
        }
        if self.w_diag.len() != 1 + registry.len() {
            return Err(CalibrationError::DimensionMismatch {
                expected: 1 + registry.len(),
                got: self.w_diag.len(),
            });
        }
        if !self.w_diag.iter().all(|w| w.is_finite()) || !self.b.is_finite() {
            return Err(CalibrationError::NonFinite);
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    /// Parses a persisted model and rejects it unless it matches `registry`.
    pub fn from_json(s: &str, registry: &ErrorRegistry) -> Result<Self, CalibrationError> {
        let model: Self =
            serde_json::from_str(s).map_err(|e| CalibrationError::Json(e.to_string()))?;
        model.check(registry)?;
        Ok(model)
    }

    pub fn logit(&self, features: &[f64]) -> Result<f64, CalibrationError> {
        if features.len() != self.w_diag.len() {
            return Err(CalibrationError::DimensionMismatch {
                expected: self.w_diag.len(),
                got: features.len(),
            });
        }
        Ok(linear(&self.w_diag, self.b, features))
    }
}

fn linear(w: &[f64], b: f64, f: &[f64]) -> f64 {
    w.iter().zip(f).map(|(w, f)| w * f).sum::<f64>() + b
}

/// `[p, p^e_1, .., p^e_m]`.
pub fn feature_vector(candidate: &CandidateSimplification) -> Result<Vec<f64>, CalibrationError> {
    let e = candidate
        .error_probs
        .as_ref()
        .ok_or(CalibrationError::MissingErrorProbs(
            candidate.candidate_index,
        ))?;
    let mut f = Vec::with_capacity(1 + e.probs.len());
    f.push(candidate.raw_probability);
    f.extend_from_slice(&e.probs);
    Ok(f)
}

/// Softmax via log-sum-exp.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Fills `calibrated_probability` for every candidate.
pub fn calibrate(
    set: &CandidateSet,
    model: &CalibrationModel,
) -> Result<CandidateSet, CalibrationError> {
    if set.candidates.is_empty() {
        return Err(CalibrationError::EmptySet);
    }
    let logits = set
        .candidates
        .iter()
        .map(|c| model.logit(&feature_vector(c)?))
        .collect::<Result<Vec<_>, _>>()?;
    let q = softmax(&logits);
    let mut out = set.clone();
    for (c, q) in out.candidates.iter_mut().zip(q) {
        c.calibrated_probability = Some(q);
    }
    Ok(out)
}

/// Highest calibrated probability among candidates with `eligible[i]`
/// (by position), ties to the lowest `candidate_index`. `None` when nothing
/// is eligible.
pub fn select_eligible<'a>(
    set: &'a CandidateSet,
    eligible: &[bool],
) -> Result<Option<&'a CandidateSimplification>, CalibrationError> {
    let mut best: Option<(&CandidateSimplification, f64)> = None;
    for (i, c) in set.candidates.iter().enumerate() {
        let q = c
            .calibrated_probability
            .ok_or(CalibrationError::UncalibratedSet)?;
        if !eligible.get(i).copied().unwrap_or(false) {
            continue;
        }
        best = match best {
            Some((b, bq)) if bq > q || (bq == q && b.candidate_index < c.candidate_index) => {
                Some((b, bq))
            }
            _ => Some((c, q)),
        };
    }
    Ok(best.map(|(c, _)| c))
}

/// Candidate with maximal calibrated probability, ties to the lowest index.
pub fn select(set: &CandidateSet) -> Result<&CandidateSimplification, CalibrationError> {
    let all = vec![true; set.candidates.len()];
    select_eligible(set, &all)?.ok_or(CalibrationError::EmptySet)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GoldSource {
    ExpertReview,
    Seeded,
}

/// Labeled (original, simplified, verdict) triple. `verdict` is 1 when the
/// simplification is correct and 0 when it is erroneous, in which case
/// `error_label` names the error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoldSample {
    pub original_text: String,
    pub simplified_text: String,
    pub verdict: u8,
    #[serde(default)]
    pub error_label: Option<ErrorClass>,
    pub source: GoldSource,
    /// Raw model probability of the simplified text, when it came from a
    /// sampled candidate.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw_probability: Option<f64>,
}

impl GoldSample {
    pub fn correct(
        original: impl Into<String>,
        simplified: impl Into<String>,
        source: GoldSource,
    ) -> Self {
        Self {
            original_text: original.into(),
            simplified_text: simplified.into(),
            verdict: 1,
            error_label: None,
            source,
            raw_probability: None,
        }
    }

    pub fn erroneous(
        original: impl Into<String>,
        simplified: impl Into<String>,
        error: ErrorClass,
        source: GoldSource,
    ) -> Self {
        Self {
            original_text: original.into(),
            simplified_text: simplified.into(),
            verdict: 0,
            error_label: Some(error),
            source,
            raw_probability: None,
        }
    }

    pub fn with_raw_probability(mut self, p: f64) -> Self {
        self.raw_probability = Some(p);
        self
    }

    pub fn check(&self) -> Result<(), String> {
        match (self.verdict, self.error_label) {
            (1, None) | (0, Some(_)) => {}
            (1, Some(_)) => return Err("correct sample must not carry an error label".into()),
            (0, None) => return Err("erroneous sample requires an error label".into()),
            (v, _) => return Err(format!("verdict must be 0 or 1, got {v}")),
        }
        if let Some(p) = self.raw_probability {
            if !(p > 0.0 && p <= 1.0) {
                return Err(format!("raw_probability {p} outside (0,1]"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct GoldDataset {
    pub samples: Vec<GoldSample>,
}

impl GoldDataset {
    pub fn new(samples: Vec<GoldSample>) -> Self {
        Self { samples }
    }

    pub fn k(&self) -> usize {
        self.samples.len()
    }

    /// Both verdict classes present.
    pub fn is_balanced(&self) -> bool {
        self.samples.iter().any(|s| s.verdict == 1) && self.samples.iter().any(|s| s.verdict == 0)
    }
}

/// Maps a gold sample to its calibration feature vector.
pub trait Featurizer {
    fn features(&self, sample: &GoldSample) -> Result<Vec<f64>, CalibrationError>;
}

impl<F> Featurizer for F
where
    F: Fn(&GoldSample) -> Result<Vec<f64>, CalibrationError>,
{
    fn features(&self, sample: &GoldSample) -> Result<Vec<f64>, CalibrationError> {
        self(sample)
    }
}

/// `[p, classify(T, Y)]`, with `default_probability` standing in for samples
/// that carry no raw probability.
pub struct ClassifierFeaturizer<'a> {
    pub classifier: &'a dyn ErrorClassifier,
    pub default_probability: f64,
}

impl Featurizer for ClassifierFeaturizer<'_> {
    fn features(&self, sample: &GoldSample) -> Result<Vec<f64>, CalibrationError> {
        let e = self
            .classifier
            .classify(&sample.original_text, &sample.simplified_text)?;
        let mut f = vec![sample.raw_probability.unwrap_or(self.default_probability)];
        f.extend(e.probs);
        Ok(f)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    #[serde(default = "default_lr")]
    pub learning_rate: f64,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    /// Starting weights; `[1, -1, .., -1]` when absent.
    #[serde(default)]
    pub init_w: Option<Vec<f64>>,
    #[serde(default)]
    pub init_b: f64,
    pub seed: u64,
    /// Mini-batch size; full batch when absent. Batches are drawn from a
    /// permutation seeded by `seed`.
    #[serde(default)]
    pub batch_size: Option<usize>,
    /// Raw probability assumed for gold samples that have none (`1/n`).
    #[serde(default = "default_probability")]
    pub default_probability: f64,
}

fn default_lr() -> f64 {
    0.1
}
fn default_epochs() -> usize {
    500
}
fn default_probability() -> f64 {
    1.0 / crate::types::DEFAULT_CANDIDATE_COUNT as f64
}

impl TrainConfig {
    pub fn new(seed: u64) -> Self {
        Self {
            learning_rate: default_lr(),
            epochs: default_epochs(),
            init_w: None,
            init_b: 0.0,
            seed,
            batch_size: None,
            default_probability: default_probability(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub model: CalibrationModel,
    /// Mean training loss before the first update and after every epoch.
    pub loss_history: Vec<f64>,
    /// Only one verdict class was present; the model is usable but
    /// uninformative.
    pub degenerate: bool,
}

/// Logistic loss of one sample with the probability clamped away from 0
/// and 1.
pub fn sample_loss(w: &[f64], b: f64, features: &[f64], verdict: f64) -> f64 {
    let s = sigmoid(linear(w, b, features)).clamp(PROB_EPS, 1.0 - PROB_EPS);
    -verdict * s.ln() - (1.0 - verdict) * (1.0 - s).ln()
}

/// Analytic gradient of [`sample_loss`] in `(w, b)`: `(sigmoid(z) - y) * f`
/// and `sigmoid(z) - y`.
pub fn sample_gradient(w: &[f64], b: f64, features: &[f64], verdict: f64) -> (Vec<f64>, f64) {
    let r = sigmoid(linear(w, b, features)) - verdict;
    (features.iter().map(|f| r * f).collect(), r)
}

pub fn mean_loss(w: &[f64], b: f64, features: &[Vec<f64>], verdicts: &[f64]) -> f64 {
    features
        .iter()
        .zip(verdicts)
        .map(|(f, y)| sample_loss(w, b, f, *y))
        .sum::<f64>()
        / features.len() as f64
}

fn batch_gradient(
    w: &[f64],
    b: f64,
    features: &[Vec<f64>],
    verdicts: &[f64],
    idx: &[usize],
) -> (Vec<f64>, f64) {
    let mut gw = vec![0.0; w.len()];
    let mut gb = 0.0;
    for &i in idx {
        let (g, r) = sample_gradient(w, b, &features[i], verdicts[i]);
        gw.iter_mut().zip(g).for_each(|(a, g)| *a += g);
        gb += r;
    }
    let k = idx.len() as f64;
    (gw.into_iter().map(|g| g / k).collect(), gb / k)
}

/// Gradient descent on precomputed features. Returns `(w, b, loss_history)`.
pub fn fit(
    features: &[Vec<f64>],
    verdicts: &[f64],
    config: &TrainConfig,
) -> Result<(Vec<f64>, f64, Vec<f64>), CalibrationError> {
    if features.is_empty() {
        return Err(CalibrationError::EmptyDataset);
    }
    let dim = features[0].len();
    if let Some(bad) = features.iter().find(|f| f.len() != dim) {
        return Err(CalibrationError::DimensionMismatch {
            expected: dim,
            got: bad.len(),
        });
    }
    let mut w = match &config.init_w {
        Some(w) if w.len() == dim => w.clone(),
        Some(w) => {
            return Err(CalibrationError::DimensionMismatch {
                expected: dim,
                got: w.len(),
            })
        }
        None => {
            let mut w = vec![-1.0; dim];
            w[0] = 1.0;
            w
        }
    };
    let mut b = config.init_b;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..features.len()).collect();
    let batch = config
        .batch_size
        .unwrap_or(features.len())
        .clamp(1, features.len());

    let mut history = Vec::with_capacity(config.epochs + 1);
    history.push(mean_loss(&w, b, features, verdicts));
    for _ in 0..config.epochs {
        if batch < features.len() {
            order.shuffle(&mut rng);
        }
        for chunk in order.chunks(batch) {
            let (gw, gb) = batch_gradient(&w, b, features, verdicts, chunk);
            w.iter_mut()
                .zip(&gw)
                .for_each(|(w, g)| *w -= config.learning_rate * g);
            b -= config.learning_rate * gb;
        }
        history.push(mean_loss(&w, b, features, verdicts));
    }
    if !w.iter().all(|x| x.is_finite()) || !b.is_finite() {
        return Err(CalibrationError::NonFinite);
    }
    Ok((w, b, history))
}

/// Learns calibration weights from gold samples.
pub fn train(
    dataset: &GoldDataset,
    featurizer: &dyn Featurizer,
    registry: &ErrorRegistry,
    config: &TrainConfig,
) -> Result<TrainReport, CalibrationError> {
    if dataset.samples.is_empty() {
        return Err(CalibrationError::EmptyDataset);
    }
    let mut features = Vec::with_capacity(dataset.k());
    let mut verdicts = Vec::with_capacity(dataset.k());
    for (index, s) in dataset.samples.iter().enumerate() {
        s.check()
            .map_err(|reason| CalibrationError::InvalidSample { index, reason })?;
        let f = featurizer.features(s)?;
        if f.len() != 1 + registry.len() {
            return Err(CalibrationError::DimensionMismatch {
                expected: 1 + registry.len(),
                got: f.len(),
            });
        }
        features.push(f);
        verdicts.push(f64::from(s.verdict));
    }
    let degenerate = !dataset.is_balanced();
    if degenerate {
        tracing::warn!(k = dataset.k(), "gold dataset has a single verdict class");
    }
    let (w, b, loss_history) = fit(&features, &verdicts, config)?;
    Ok(TrainReport {
        model: CalibrationModel {
            w_diag: w,
            b,
            error_registry_hash: registry.hash(),
            trained_on: dataset.k(),
            version: 1,
        },
        loss_history,
        degenerate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifier::RuleBasedClassifier;
    use crate::types::ErrorProbabilities;
    use approx::assert_relative_eq;

    fn cand(i: usize, p: f64, e: [f64; 3]) -> CandidateSimplification {
        let mut c = CandidateSimplification::new(i, format!("c{i}"), p);
        c.error_probs = Some(ErrorProbabilities {
            probs: e.to_vec(),
            classifier_id: "t".into(),
        });
        c
    }

    fn model(w: [f64; 4], b: f64) -> CalibrationModel {
        CalibrationModel {
            w_diag: w.to_vec(),
            b,
            ..CalibrationModel::initial(&ErrorRegistry::default())
        }
    }

    fn with_q(q: &[f64]) -> CandidateSet {
        let mut set = CandidateSet::new(
            "o",
            q.iter()
                .enumerate()
                .map(|(i, _)| cand(i, 0.5, [0.0; 3]))
                .collect(),
        );
        for (c, q) in set.candidates.iter_mut().zip(q) {
            c.calibrated_probability = Some(*q);
        }
        set
    }

    #[test]
    fn feature_vector_concatenates() {
        assert_eq!(
            feature_vector(&cand(0, 0.5, [0.1, 0.2, 0.0])).unwrap(),
            vec![0.5, 0.1, 0.2, 0.0]
        );
        assert_eq!(
            feature_vector(&cand(0, 1.0, [0.0; 3])).unwrap(),
            vec![1.0, 0.0, 0.0, 0.0]
        );
        let bare = CandidateSimplification::new(3, "x", 0.5);
        assert_eq!(
            feature_vector(&bare),
            Err(CalibrationError::MissingErrorProbs(3))
        );
    }

    #[test]
    fn identity_weights_reduce_to_softmax_of_p() {
        let set = CandidateSet::new(
            "o",
            vec![
                cand(0, 0.2, [0.3; 3]),
                cand(1, 0.5, [0.3; 3]),
                cand(2, 0.3, [0.3; 3]),
            ],
        );
        let out = calibrate(&set, &model([1.0, 0.0, 0.0, 0.0], 0.0)).unwrap();
        let q: Vec<f64> = out
            .candidates
            .iter()
            .map(|c| c.calibrated_probability.unwrap())
            .collect();
        // exp(0.2), exp(0.5), exp(0.3) normalised.
        let e = [0.2f64.exp(), 0.5f64.exp(), 0.3f64.exp()];
        let s: f64 = e.iter().sum();
        for (q, e) in q.iter().zip(e) {
            assert_relative_eq!(*q, e / s, epsilon = 1e-15);
        }
        assert_relative_eq!(q[0], 0.2894, epsilon = 5e-5);
        assert_relative_eq!(q[1], 0.3907, epsilon = 5e-5);
        assert_relative_eq!(q[2], 0.3199, epsilon = 5e-5);
    }

    #[test]
    fn identical_features_are_uniform() {
        let set = CandidateSet::new("o", (0..4).map(|i| cand(i, 0.4, [0.1, 0.2, 0.3])).collect());
        let out = calibrate(&set, &CalibrationModel::initial(&ErrorRegistry::default())).unwrap();
        assert!(out
            .candidates
            .iter()
            .all(|c| (c.calibrated_probability.unwrap() - 0.25).abs() < 1e-15));
    }

    #[test]
    fn dimension_mismatch() {
        let mut c = cand(0, 0.5, [0.0; 3]);
        c.error_probs.as_mut().unwrap().probs.pop();
        let set = CandidateSet::new("o", vec![c]);
        assert!(matches!(
            calibrate(&set, &CalibrationModel::initial(&ErrorRegistry::default())),
            Err(CalibrationError::DimensionMismatch {
                expected: 4,
                got: 3
            })
        ));
    }

    #[test]
    fn selection_and_tie_break() {
        assert_eq!(
            select(&with_q(&[0.1, 0.7, 0.2])).unwrap().candidate_index,
            1
        );
        assert_eq!(select(&with_q(&[0.5, 0.5])).unwrap().candidate_index, 0);
        let set = CandidateSet::new("o", vec![cand(0, 0.5, [0.0; 3])]);
        assert_eq!(select(&set), Err(CalibrationError::UncalibratedSet));
    }

    #[test]
    fn eligibility_falls_back() {
        let set = with_q(&[0.1, 0.7, 0.2]);
        assert_eq!(
            select_eligible(&set, &[true, false, true])
                .unwrap()
                .unwrap()
                .candidate_index,
            2
        );
        assert!(select_eligible(&set, &[false; 3]).unwrap().is_none());
    }

    #[test]
    fn registry_mismatch_rejected_at_load() {
        let m = CalibrationModel::initial(&ErrorRegistry::default());
        let other =
            ErrorRegistry::new(vec![ErrorClass::TooLong, ErrorClass::MeaningAltered]).unwrap();
        assert!(matches!(
            CalibrationModel::from_json(&m.to_json(), &other),
            Err(CalibrationError::RegistryMismatch { .. })
        ));
        assert_eq!(
            CalibrationModel::from_json(&m.to_json(), &ErrorRegistry::default()).unwrap(),
            m
        );
    }

    #[test]
    fn single_positive_sample_is_degenerate_but_trained() {
        let ds = GoldDataset::new(vec![GoldSample::correct(
            "Place the dripper over the mug.",
            "Place dripper on mug.",
            GoldSource::Seeded,
        )
        .with_raw_probability(0.8)]);
        let clf = RuleBasedClassifier::default();
        let feat = ClassifierFeaturizer {
            classifier: &clf,
            default_probability: 0.2,
        };
        let report = train(&ds, &feat, &ErrorRegistry::default(), &TrainConfig::new(1)).unwrap();
        assert!(report.degenerate);
        assert_eq!(report.model.trained_on, 1);
        let f = feat.features(&ds.samples[0]).unwrap();
        assert!(report.model.logit(&f).unwrap() > 0.0);
    }

    #[test]
    fn empty_and_invalid_datasets() {
        let clf = RuleBasedClassifier::default();
        let feat = ClassifierFeaturizer {
            classifier: &clf,
            default_probability: 0.2,
        };
        let reg = ErrorRegistry::default();
        assert_eq!(
            train(&GoldDataset::default(), &feat, &reg, &TrainConfig::new(0)).unwrap_err(),
            CalibrationError::EmptyDataset
        );
        let mut bad = GoldSample::correct("a", "b", GoldSource::Seeded);
        bad.verdict = 0;
        assert!(matches!(
            train(
                &GoldDataset::new(vec![bad]),
                &feat,
                &reg,
                &TrainConfig::new(0)
            ),
            Err(CalibrationError::InvalidSample { index: 0, .. })
        ));
    }

    #[test]
    fn gold_sample_json_shape() {
        let s = GoldSample::erroneous(
            "a b",
            "a",
            ErrorClass::MeaningAltered,
            GoldSource::ExpertReview,
        );
        let v: serde_json::Value = serde_json::to_value(&s).unwrap();
        assert_eq!(v["verdict"], 0);
        assert_eq!(v["error_label"], "meaning_altered");
        assert_eq!(v["source"], "expert_review");
    }

    #[test]
    fn mini_batch_training_is_seeded() {
        let f: Vec<Vec<f64>> = (0..50).map(|i| vec![i as f64 / 50.0, 0.0]).collect();
        let y: Vec<f64> = (0..50).map(|i| if i >= 25 { 1.0 } else { 0.0 }).collect();
        let mut cfg = TrainConfig::new(9);
        cfg.batch_size = Some(8);
        cfg.epochs = 20;
        let a = fit(&f, &y, &cfg).unwrap();
        let b = fit(&f, &y, &cfg).unwrap();
        assert_eq!(a, b);
        cfg.seed = 10;
        assert_ne!(fit(&f, &y, &cfg).unwrap().0, a.0);
    }
}
