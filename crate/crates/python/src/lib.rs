//! Python bindings. Structured values cross the boundary as plain dicts and
//! lists with the same shape as the service's JSON.

use std::collections::BTreeSet;
use std::sync::Arc;

use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use serde::de::DeserializeOwned;
use serde::Serialize;

use arsimplify_core::calibration::{
    self, CalibrationModel, ClassifierFeaturizer, GoldDataset, GoldSample, TrainConfig,
};
use arsimplify_core::classifier::{ErrorClassifier, RuleBasedClassifier};
use arsimplify_core::corpus;
use arsimplify_core::llm::{LlmBackend, ScriptedBackend};
use arsimplify_core::pipeline::{Pipeline as CorePipeline, PipelineConfig};
use arsimplify_core::prompt;
use arsimplify_core::spatial::{self, DetectedObject, SpatialContext};
use arsimplify_core::store::{ManualStore as CoreStore, StoreError};
use arsimplify_core::types::{
    CandidateSet, CandidateSimplification, ErrorProbabilities, ErrorRegistry, ManualDocument,
    SimplificationPlan,
};
use arsimplify_core::validators::{DisplayProfile, Validator};

create_exception!(arsimplify, NotFoundError, PyException);
create_exception!(arsimplify, ConflictError, PyException);

fn to_py<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let s = serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (s,))
}

fn from_py<T: DeserializeOwned>(obj: &Bound<'_, PyAny>) -> PyResult<T> {
    let s: String = obj
        .py()
        .import("json")?
        .call_method1("dumps", (obj,))?
        .extract()?;
    serde_json::from_str(&s).map_err(|e| PyValueError::new_err(e.to_string()))
}

fn store_err(e: StoreError) -> PyErr {
    match e {
        StoreError::NotFound(_) | StoreError::VersionNotFound { .. } => {
            NotFoundError::new_err(e.to_string())
        }
        StoreError::ConcurrentUpdateConflict { .. } | StoreError::AlreadyExists(_) => {
            ConflictError::new_err(e.to_string())
        }
        StoreError::Invalid(_) | StoreError::InvalidId(_) | StoreError::InvalidGold(_) => {
            PyValueError::new_err(e.to_string())
        }
        StoreError::Io(_) | StoreError::Corrupt { .. } => PyRuntimeError::new_err(e.to_string()),
    }
}

fn runtime<E: std::fmt::Display>(e: E) -> PyErr {
    PyRuntimeError::new_err(e.to_string())
}

fn context(detections: Option<&Bound<'_, PyAny>>) -> PyResult<Option<SpatialContext>> {
    detections
        .map(|d| {
            let objects: Vec<DetectedObject> = from_py(d)?;
            for o in &objects {
                o.check()
                    .map_err(|e| PyValueError::new_err(e.to_string()))?;
            }
            Ok(SpatialContext::frozen(objects))
        })
        .transpose()
}

/// Egocentric relation phrase for an azimuth in degrees (positive = right).
#[pyfunction]
fn relation(azimuth_deg: f64) -> &'static str {
    spatial::relation_of(&DetectedObject::new("object", azimuth_deg, 1.0)).phrase()
}

/// Adds relation phrases and object-length references for `detections`
/// (a list of `{label, azimuth_deg, distance_m, characteristic_length_m?, confidence}`).
#[pyfunction]
fn elaborate(text: &str, detections: &Bound<'_, PyAny>) -> PyResult<String> {
    let ctx = context(Some(detections))?.expect("detections given");
    Ok(spatial::elaborate(text, &ctx))
}

/// Rule-based error probabilities `[meaning_altered, syntactically_complex, too_long]`.
#[pyfunction]
fn classify(original: &str, candidate: &str) -> PyResult<Vec<f64>> {
    Ok(RuleBasedClassifier::default()
        .classify(original, candidate)
        .map_err(runtime)?
        .probs)
}

#[pyfunction]
#[pyo3(signature = (original, candidate, glossary=None, chars_per_line=40))]
fn validate<'py>(
    py: Python<'py>,
    original: &str,
    candidate: &str,
    glossary: Option<Vec<String>>,
    chars_per_line: usize,
) -> PyResult<Bound<'py, PyAny>> {
    if chars_per_line == 0 {
        return Err(PyValueError::new_err("chars_per_line must be positive"));
    }
    let v = Validator::new(
        DisplayProfile::new(chars_per_line),
        glossary.unwrap_or_default().into_iter().collect(),
        Arc::new(RuleBasedClassifier::default()),
    );
    let report = v.validate("py", original, candidate).map_err(runtime)?;
    let out = to_py(py, &report)?;
    out.set_item("passed", report.passed())?;
    Ok(out)
}

/// Calibrated probabilities for candidates with raw probabilities `p` and
/// error vectors `errors`. Defaults to the untrained prior.
#[pyfunction]
#[pyo3(signature = (p, errors, w_diag=None, b=0.0))]
fn calibrate(
    p: Vec<f64>,
    errors: Vec<Vec<f64>>,
    w_diag: Option<Vec<f64>>,
    b: f64,
) -> PyResult<Vec<f64>> {
    if p.len() != errors.len() {
        return Err(PyValueError::new_err(
            "p and errors must have the same length",
        ));
    }
    let registry = ErrorRegistry::default();
    let mut model = CalibrationModel::initial(&registry);
    if let Some(w) = w_diag {
        model.w_diag = w;
    }
    model.b = b;
    let candidates = p
        .into_iter()
        .zip(errors)
        .enumerate()
        .map(|(i, (p, e))| {
            let mut c = CandidateSimplification::new(i, "", p);
            c.error_probs = Some(ErrorProbabilities {
                probs: e,
                classifier_id: "py".into(),
            });
            c
        })
        .collect();
    let set = calibration::calibrate(&CandidateSet::new("", candidates), &model)
        .map_err(|e| PyValueError::new_err(e.to_string()))?;
    Ok(set
        .candidates
        .iter()
        .map(|c| c.calibrated_probability.unwrap_or(0.0))
        .collect())
}

#[pyfunction]
fn render_plan(plan: &Bound<'_, PyAny>) -> PyResult<String> {
    let plan: SimplificationPlan = from_py(plan)?;
    Ok(prompt::render_plan(&plan))
}

#[pyfunction]
fn parse_plan<'py>(py: Python<'py>, text: &str) -> PyResult<Bound<'py, PyAny>> {
    let plan = prompt::parse_plan(text).map_err(|e| PyValueError::new_err(e.to_string()))?;
    to_py(py, &plan)
}

/// Fits a calibration model on gold samples (dicts) and returns it as a dict.
#[pyfunction]
#[pyo3(signature = (gold, seed, epochs=500, learning_rate=0.1))]
fn train<'py>(
    py: Python<'py>,
    gold: &Bound<'py, PyAny>,
    seed: u64,
    epochs: usize,
    learning_rate: f64,
) -> PyResult<Bound<'py, PyAny>> {
    let samples: Vec<GoldSample> = from_py(gold)?;
    let config = TrainConfig {
        epochs,
        learning_rate,
        ..TrainConfig::new(seed)
    };
    let clf = RuleBasedClassifier::default();
    let featurizer = ClassifierFeaturizer {
        classifier: &clf,
        default_probability: config.default_probability,
    };
    let report = py
        .detach(|| {
            calibration::train(
                &GoldDataset::new(samples),
                &featurizer,
                &ErrorRegistry::default(),
                &config,
            )
        })
        .map_err(|e| PyValueError::new_err(e.to_string()))?;
    to_py(py, &report)
}

/// The 16 original/simplified pairs of the bundled example manuals.
#[pyfunction]
fn corpus_pairs() -> Vec<(&'static str, &'static str)> {
    corpus::appendix_pairs()
}

#[pyfunction]
fn example_manual<'py>(py: Python<'py>, name: &str) -> PyResult<Bound<'py, PyAny>> {
    let doc = match name {
        "coffee" => corpus::coffee_manual(),
        "meeting" => corpus::meeting_manual(),
        other => {
            return Err(NotFoundError::new_err(format!(
                "no example manual `{other}`"
            )))
        }
    };
    to_py(py, &doc)
}

/// Plan-then-execute simplification over a scripted backend.
#[pyclass]
struct Pipeline {
    inner: CorePipeline,
    fixture: String,
}

impl Pipeline {
    fn fresh(&self) -> PyResult<CorePipeline> {
        let backend = ScriptedBackend::from_json(&self.fixture)
            .map_err(|e| PyValueError::new_err(e.to_string()))?;
        Ok(CorePipeline {
            backend: Arc::new(backend) as Arc<dyn LlmBackend>,
            ..self.inner.clone()
        })
    }
}

#[pymethods]
impl Pipeline {
    /// `fixture` is the JSON text of a scripted-backend fixture; the
    /// bundled coffee fixture when omitted.
    #[new]
    #[pyo3(signature = (fixture=None, n=5, chars_per_line=40))]
    fn new(fixture: Option<String>, n: usize, chars_per_line: usize) -> PyResult<Self> {
        if chars_per_line == 0 {
            return Err(PyValueError::new_err("chars_per_line must be positive"));
        }
        let fixture = fixture.unwrap_or_else(|| corpus::COFFEE_MOCK_FIXTURE.to_string());
        let backend = ScriptedBackend::from_json(&fixture)
            .map_err(|e| PyValueError::new_err(e.to_string()))?;
        let mut config = PipelineConfig::default();
        config.generation.n = n;
        config.profile = DisplayProfile::new(chars_per_line);
        Ok(Self {
            inner: CorePipeline::new(
                corpus::default_template(),
                Arc::new(backend),
                Arc::new(RuleBasedClassifier::default()),
                config,
            ),
            fixture,
        })
    }

    /// Simplifies one step. Every call replays the fixture from its start.
    #[pyo3(signature = (text, detections=None, glossary=None))]
    fn simplify<'py>(
        &self,
        py: Python<'py>,
        text: &str,
        detections: Option<&Bound<'py, PyAny>>,
        glossary: Option<Vec<String>>,
    ) -> PyResult<Bound<'py, PyAny>> {
        let ctx = context(detections)?;
        let glossary: BTreeSet<String> = glossary.unwrap_or_default().into_iter().collect();
        let pipeline = self.fresh()?;
        let model = CalibrationModel::initial(&ErrorRegistry::default());
        let out = py
            .detach(|| pipeline.simplify_step(1, text, ctx.as_ref(), &glossary, &model))
            .map_err(runtime)?;
        to_py(py, &out)
    }

    /// Simplifies every step of a manual dict. Returns `(manual, outcome)`.
    fn simplify_manual<'py>(
        &self,
        py: Python<'py>,
        manual: &Bound<'py, PyAny>,
    ) -> PyResult<(Bound<'py, PyAny>, Bound<'py, PyAny>)> {
        let doc: ManualDocument = from_py(manual)?;
        let pipeline = self.fresh()?;
        let model = CalibrationModel::initial(&ErrorRegistry::default());
        let (edited, outcome) = py
            .detach(|| pipeline.simplify_manual(&doc, None, &model))
            .map_err(runtime)?;
        Ok((to_py(py, &edited)?, to_py(py, &outcome)?))
    }
}

/// Versioned manual store rooted at a directory.
#[pyclass]
struct ManualStore {
    inner: CoreStore,
}

#[pymethods]
impl ManualStore {
    #[new]
    fn new(path: std::path::PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: CoreStore::open(path).map_err(store_err)?,
        })
    }

    fn create(&self, manual: &Bound<'_, PyAny>) -> PyResult<String> {
        let doc: ManualDocument = from_py(manual)?;
        self.inner.create_manual(&doc).map_err(store_err)
    }

    fn update(&self, manual_id: &str, manual: &Bound<'_, PyAny>) -> PyResult<u32> {
        let doc: ManualDocument = from_py(manual)?;
        self.inner.update_manual(manual_id, &doc).map_err(store_err)
    }

    #[pyo3(signature = (manual_id, version=None))]
    fn get<'py>(
        &self,
        py: Python<'py>,
        manual_id: &str,
        version: Option<u32>,
    ) -> PyResult<Bound<'py, PyAny>> {
        to_py(
            py,
            &self
                .inner
                .get_manual(manual_id, version)
                .map_err(store_err)?,
        )
    }

    fn versions<'py>(&self, py: Python<'py>, manual_id: &str) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.inner.list_versions(manual_id).map_err(store_err)?)
    }

    #[pyo3(signature = (query="", tags=None))]
    fn search<'py>(
        &self,
        py: Python<'py>,
        query: &str,
        tags: Option<Vec<String>>,
    ) -> PyResult<Bound<'py, PyAny>> {
        let tags: BTreeSet<String> = tags.unwrap_or_default().into_iter().collect();
        to_py(py, &self.inner.search(query, &tags).map_err(store_err)?)
    }

    fn append_gold(&self, sample: &Bound<'_, PyAny>) -> PyResult<()> {
        let s: GoldSample = from_py(sample)?;
        self.inner.append_gold(&s).map_err(store_err)
    }

    fn load_gold<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.inner.load_gold().map_err(store_err)?.samples)
    }
}

#[pymodule]
fn arsimplify(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(relation, m)?)?;
    m.add_function(wrap_pyfunction!(elaborate, m)?)?;
    m.add_function(wrap_pyfunction!(classify, m)?)?;
    m.add_function(wrap_pyfunction!(validate, m)?)?;
    m.add_function(wrap_pyfunction!(calibrate, m)?)?;
    m.add_function(wrap_pyfunction!(render_plan, m)?)?;
    m.add_function(wrap_pyfunction!(parse_plan, m)?)?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_function(wrap_pyfunction!(corpus_pairs, m)?)?;
    m.add_function(wrap_pyfunction!(example_manual, m)?)?;
    m.add_class::<Pipeline>()?;
    m.add_class::<ManualStore>()?;
    m.add("NotFoundError", m.py().get_type::<NotFoundError>())?;
    m.add("ConflictError", m.py().get_type::<ConflictError>())?;
    Ok(())
}
