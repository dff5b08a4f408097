use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;
use tracing_subscriber::EnvFilter;

use arsimplify_core::calibration::{train, CalibrationModel, ClassifierFeaturizer};
use arsimplify_core::corpus;
use arsimplify_core::pipeline::Pipeline;
use arsimplify_core::store::{read_gold_file, ManualStore, StoreError};
use arsimplify_core::types::{ErrorRegistry, ManualDocument};
use arsimplify_core::validators::{DisplayProfile, Validator};
use arsimplify_service::config::{BackendConfig, BackendSource, ServiceConfig};
use arsimplify_service::{router, AppState};

#[derive(Parser)]
#[command(
    name = "arsimplify",
    version,
    about = "Simplify task instructions for AR displays"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendKind {
    Mock,
    Http,
}

#[derive(Subcommand)]
enum Command {
    /// Run the HTTP service.
    Serve {
        #[arg(long)]
        config: PathBuf,
    },
    /// Simplify every step of a manual file (JSON document or one step per line).
    Simplify {
        #[arg(long)]
        manual: PathBuf,
        #[arg(long, value_enum, default_value = "mock")]
        backend: BackendKind,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Fixture replayed by the mock backend.
        #[arg(long)]
        fixture: Option<PathBuf>,
    },
    /// Fit a calibration model on a JSON-lines gold file.
    Train {
        #[arg(long)]
        gold: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Check the simplified steps of a manual against the display rules.
    Validate {
        #[arg(long)]
        manual: PathBuf,
        /// Display profile as inline JSON or a path to a JSON file.
        #[arg(long)]
        profile: Option<String>,
    },
    /// Load the bundled example manuals and gold samples into the store.
    Seed {
        #[arg(long, required = true)]
        examples: bool,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Store directory; overrides the config.
        #[arg(long)]
        store: Option<PathBuf>,
    },
}

enum Outcome {
    Clean,
    ValidationFailures,
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info")),
        )
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(Outcome::Clean) => ExitCode::SUCCESS,
        Ok(Outcome::ValidationFailures) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn load_config(path: Option<&Path>) -> anyhow::Result<ServiceConfig> {
    path.map_or_else(|| Ok(ServiceConfig::default()), ServiceConfig::load)
}

fn run(command: Command) -> anyhow::Result<Outcome> {
    match command {
        Command::Serve { config } => serve(ServiceConfig::load(&config)?),
        Command::Simplify {
            manual,
            backend,
            out,
            config,
            fixture,
        } => simplify(
            &manual,
            backend,
            &out,
            load_config(config.as_deref())?,
            fixture,
        ),
        Command::Train {
            gold,
            out,
            config,
            seed,
        } => train_cmd(&gold, &out, load_config(config.as_deref())?, seed),
        Command::Validate { manual, profile } => validate(&manual, profile.as_deref()),
        Command::Seed { config, store, .. } => {
            let mut config = load_config(config.as_deref())?;
            if let Some(dir) = store {
                config.store_dir = dir;
            }
            seed(&config)
        }
    }
}

fn serve(config: ServiceConfig) -> anyhow::Result<Outcome> {
    let state = Arc::new(AppState::from_config(&config)?);
    let app = router(state);
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async {
        let listener = tokio::net::TcpListener::bind(&config.listen)
            .await
            .with_context(|| format!("binding {}", config.listen))?;
        tracing::info!(addr = %listener.local_addr()?, store = %config.store_dir.display(), "listening");
        axum::serve(listener, app)
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await?;
        Ok(Outcome::Clean)
    })
}

fn read_manual(path: &Path) -> anyhow::Result<ManualDocument> {
    let raw = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    if path.extension().is_some_and(|e| e == "json") {
        return serde_json::from_str(&raw).with_context(|| format!("parsing {}", path.display()));
    }
    let title = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "manual".into());
    ManualDocument::from_plain_text(title, &raw).map_err(|v| {
        let msgs: Vec<String> = v.iter().map(ToString::to_string).collect();
        anyhow::anyhow!("invalid manual {}: {}", path.display(), msgs.join("; "))
    })
}

fn simplify(
    manual: &Path,
    backend: BackendKind,
    out: &Path,
    mut config: ServiceConfig,
    fixture: Option<PathBuf>,
) -> anyhow::Result<Outcome> {
    match backend {
        BackendKind::Mock => {
            if fixture.is_some() || !matches!(config.backend, BackendConfig::Mock { .. }) {
                config.backend = BackendConfig::Mock { fixture };
            }
        }
        BackendKind::Http => {
            if !matches!(config.backend, BackendConfig::Http(_)) {
                bail!("--backend http needs a config file with an http backend section");
            }
        }
    }
    let doc = read_manual(manual)?;
    let registry = ErrorRegistry::default();
    let model = CalibrationModel::initial(&registry);
    let backend: BackendSource = config.backend()?;
    let pipeline = Pipeline::new(
        config.template()?,
        backend.instance(),
        config.classifier(),
        config.pipeline_config(),
    );
    let (edited, outcome) = pipeline.simplify_manual(&doc, None, &model)?;
    for (step, doc_step) in outcome.steps.iter().zip(&doc.steps) {
        let mark = if step.fell_back {
            "no candidate passed"
        } else if step.selected_text == doc_step.original_text {
            "unchanged"
        } else {
            "simplified"
        };
        println!("step {}: {mark}: {}", step.step_id, step.chosen_text);
    }
    let body = json!({ "manual": edited, "outcome": outcome });
    fs::write(out, serde_json::to_string_pretty(&body)?)
        .with_context(|| format!("writing {}", out.display()))?;
    Ok(if outcome.any_fallback() {
        Outcome::ValidationFailures
    } else {
        Outcome::Clean
    })
}

fn train_cmd(
    gold: &Path,
    out: &Path,
    config: ServiceConfig,
    seed: Option<u64>,
) -> anyhow::Result<Outcome> {
    let registry = ErrorRegistry::default();
    let dataset = read_gold_file(gold)?;
    let mut training = config.training.clone();
    if let Some(seed) = seed {
        training.seed = seed;
    }
    let classifier = config.classifier();
    let featurizer = ClassifierFeaturizer {
        classifier: classifier.as_ref(),
        default_probability: training.default_probability,
    };
    let report = train(&dataset, &featurizer, &registry, &training)?;
    let mut model = report.model;
    if let Ok(prev) = fs::read_to_string(out) {
        if let Ok(prev) = CalibrationModel::from_json(&prev, &registry) {
            model.version = prev.version + 1;
        }
    }
    fs::write(out, model.to_json()).with_context(|| format!("writing {}", out.display()))?;
    println!(
        "trained on {} samples: loss {:.4} -> {:.4}, w = {:?}, b = {:.4}, version {}",
        model.trained_on,
        report.loss_history[0],
        report.loss_history[report.loss_history.len() - 1],
        model.w_diag,
        model.b,
        model.version
    );
    if report.degenerate {
        eprintln!("warning: gold set has a single verdict class");
    }
    Ok(Outcome::Clean)
}

fn read_profile(arg: Option<&str>) -> anyhow::Result<DisplayProfile> {
    let Some(arg) = arg else {
        return Ok(DisplayProfile::default());
    };
    let raw = if arg.trim_start().starts_with('{') {
        arg.to_string()
    } else {
        fs::read_to_string(arg).with_context(|| format!("reading profile {arg}"))?
    };
    serde_json::from_str(&raw).context("parsing display profile")
}

fn validate(manual: &Path, profile: Option<&str>) -> anyhow::Result<Outcome> {
    let doc = read_manual(manual)?;
    let profile = read_profile(profile)?;
    let validator = Validator::new(
        profile,
        doc.glossary(),
        Arc::new(arsimplify_core::classifier::RuleBasedClassifier::default()),
    );
    let mut failed = false;
    for step in &doc.steps {
        let Some(simplified) = &step.simplified_text else {
            println!("step {}: skipped (not simplified)", step.step_id);
            continue;
        };
        let report = validator.validate(
            &format!("{}/{}", doc.manual_id, step.step_id),
            &step.original_text,
            simplified,
        )?;
        if report.passed() {
            println!("step {}: pass", step.step_id);
        } else {
            failed = true;
            for f in report.failures() {
                println!("step {}: FAIL {}: {}", step.step_id, f.rule, f.detail);
            }
        }
    }
    Ok(if failed {
        Outcome::ValidationFailures
    } else {
        Outcome::Clean
    })
}

fn seed(config: &ServiceConfig) -> anyhow::Result<Outcome> {
    let store = ManualStore::open(&config.store_dir)?;
    for (id, doc) in [
        ("pour-over-coffee", corpus::coffee_manual()),
        ("meeting-room-setup", corpus::meeting_manual()),
    ] {
        let doc = ManualDocument {
            manual_id: id.into(),
            ..doc
        };
        match store.create_manual(&doc) {
            Ok(id) => println!("created {id}"),
            Err(StoreError::AlreadyExists(id)) => println!("kept existing {id}"),
            Err(e) => return Err(e.into()),
        }
    }
    if store.load_gold()?.samples.is_empty() {
        let samples = corpus::seed_gold();
        for s in &samples {
            store.append_gold(s)?;
        }
        println!("appended {} gold samples", samples.len());
    } else {
        println!("gold store already populated");
    }
    Ok(Outcome::Clean)
}
