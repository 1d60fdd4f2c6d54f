//! TOML run configuration and the runner shared by the command line and the
//! Python bindings.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::archive::TimingMode;
use crate::budget::{BudgetError, BudgetLedger, BudgetUnit, SharedLedger};
use crate::llm::{
    Backend, Gateway, HttpBackend, HttpConfig, LlmError, MockBackend, PriceTable, RecordingBackend, ReplayBackend,
};
use crate::problems::{resolve_problem, ProblemLoadError};
use crate::sandbox::{Sandbox, SandboxConfig, SandboxError};
use crate::search::{optimize_hermite, HermiteOptConfig, HermiteOptResult, IidConfig, ScsConfig, SearchContext, SearchError};
use crate::verifiers::VerifierRegistry;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config {path}: {reason}")]
    Read { path: PathBuf, reason: String },
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error(transparent)]
    Problem(#[from] ProblemLoadError),
    #[error(transparent)]
    Llm(#[from] LlmError),
    #[error(transparent)]
    Sandbox(#[from] SandboxError),
    #[error(transparent)]
    Budget(#[from] BudgetError),
    #[error(transparent)]
    Search(#[from] SearchError),
    #[error("cannot write {path}: {reason}")]
    Write { path: PathBuf, reason: String },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Engine {
    #[default]
    Iid,
    Scs,
    HermiteOpt,
}

impl std::str::FromStr for Engine {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "iid" => Ok(Engine::Iid),
            "scs" => Ok(Engine::Scs),
            "hermite-opt" => Ok(Engine::HermiteOpt),
            other => Err(format!("unknown engine `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BudgetConfig {
    pub unit: BudgetUnit,
    pub cap: f64,
}

impl Default for BudgetConfig {
    fn default() -> Self {
        Self {
            unit: BudgetUnit::Dollars,
            cap: 20.0,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    /// Offline generator of canned programs, seeded by the run seed.
    #[default]
    Mock,
    /// OpenAI-compatible HTTP endpoint; the key comes from the environment.
    Http,
    /// Responses served from a recorded transcript.
    Replay,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackendConfig {
    pub kind: BackendKind,
    pub max_in_flight: usize,
    /// Model name priced and sent with requests. HTTP runs take it from
    /// `http_config` instead.
    pub model: String,
    /// Price table TOML; the mock table is used when unset.
    pub prices: Option<PathBuf>,
    pub http_config: Option<PathBuf>,
    /// Transcript to replay from.
    pub transcript: Option<PathBuf>,
    /// Record every exchange to this transcript.
    pub record_transcript: Option<PathBuf>,
    /// Mock only: failing programs may hang until the time limit.
    pub mock_timeouts: bool,
}

impl Default for BackendConfig {
    fn default() -> Self {
        Self {
            kind: BackendKind::Mock,
            max_in_flight: 8,
            model: "mock".into(),
            prices: None,
            http_config: None,
            transcript: None,
            record_transcript: None,
            mock_timeouts: false,
        }
    }
}

/// Everything a run needs. `seed` has no default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    /// Built-in problem name or path to a problem TOML.
    pub problem: String,
    #[serde(default)]
    pub engine: Engine,
    #[serde(default)]
    pub budget: BudgetConfig,
    #[serde(default)]
    pub timing: TimingMode,
    #[serde(default)]
    pub backend: BackendConfig,
    #[serde(default)]
    pub sandbox: SandboxConfig,
    #[serde(default)]
    pub iid: IidConfig,
    #[serde(default)]
    pub scs: ScsConfig,
    #[serde(default)]
    pub hermite: HermiteOptConfig,
}

impl RunConfig {
    /// A configuration with defaults everywhere except the seed and problem.
    pub fn new(problem: impl Into<String>, seed: u64) -> Self {
        Self {
            seed,
            problem: problem.into(),
            engine: Engine::default(),
            budget: BudgetConfig::default(),
            timing: TimingMode::default(),
            backend: BackendConfig::default(),
            sandbox: SandboxConfig::default(),
            iid: IidConfig::default(),
            scs: ScsConfig::default(),
            hermite: HermiteOptConfig::default(),
        }
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    /// Reads a config file. Relative backend paths are taken relative to
    /// the file's directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let read_err = |reason: String| ConfigError::Read {
            path: path.to_owned(),
            reason,
        };
        let text = std::fs::read_to_string(path).map_err(|e| read_err(e.to_string()))?;
        let mut cfg: Self = toml::from_str(&text).map_err(|e| read_err(e.to_string()))?;
        let base = path.parent().unwrap_or(Path::new(""));
        let b = &mut cfg.backend;
        for p in [&mut b.prices, &mut b.http_config, &mut b.transcript, &mut b.record_transcript]
            .into_iter()
            .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

/// Result of [`execute`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOutcome {
    pub engine: Engine,
    /// Archive for search engines, JSON result for the optimizer.
    pub output: PathBuf,
    pub best_score: Option<f64>,
    pub best_id: Option<String>,
    pub spend: f64,
    pub unit: BudgetUnit,
    pub budget_exhausted: bool,
}

fn build_gateway(cfg: &BackendConfig, seed: u64) -> Result<Gateway, ConfigError> {
    let prices = |default: Option<PriceTable>| -> Result<PriceTable, ConfigError> {
        match (&cfg.prices, default) {
            (Some(p), _) => Ok(PriceTable::load(p)?),
            (None, Some(t)) => Ok(t),
            (None, None) => Err(ConfigError::Invalid("backend.prices is required for this backend".into())),
        }
    };
    let (backend, model, prices): (Box<dyn Backend>, String, PriceTable) = match cfg.kind {
        BackendKind::Mock => (
            wrap(MockBackend::new(seed).with_timeouts(cfg.mock_timeouts), cfg)?,
            cfg.model.clone(),
            prices(Some(PriceTable::mock()))?,
        ),
        BackendKind::Http => {
            let path = cfg
                .http_config
                .as_ref()
                .ok_or_else(|| ConfigError::Invalid("backend.http_config is required for http".into()))?;
            let http = HttpConfig::load(path)?;
            let model = http.model.clone();
            (wrap(HttpBackend::new(http)?, cfg)?, model, prices(None)?)
        }
        BackendKind::Replay => {
            let path = cfg
                .transcript
                .as_ref()
                .ok_or_else(|| ConfigError::Invalid("backend.transcript is required for replay".into()))?;
            let default = (cfg.model == "mock").then(PriceTable::mock);
            (wrap(ReplayBackend::load(path)?, cfg)?, cfg.model.clone(), prices(default)?)
        }
    };
    Ok(Gateway::new(backend, model, prices, cfg.max_in_flight)?)
}

fn wrap<B: Backend + 'static>(b: B, cfg: &BackendConfig) -> Result<Box<dyn Backend>, ConfigError> {
    Ok(match &cfg.record_transcript {
        Some(path) => Box::new(RecordingBackend::create(b, path)?),
        None => Box::new(b),
    })
}

fn write_file(path: &Path, text: &str) -> Result<(), ConfigError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| ConfigError::Write {
            path: dir.to_owned(),
            reason: e.to_string(),
        })?;
    }
    std::fs::write(path, text).map_err(|e| ConfigError::Write {
        path: path.to_owned(),
        reason: e.to_string(),
    })
}

/// Runs the configured engine, streaming its archive (or, for the
/// optimizer, writing its result) to `output`.
pub fn execute(cfg: &RunConfig, output: &Path) -> Result<RunOutcome, ConfigError> {
    if cfg.engine == Engine::HermiteOpt {
        let result = run_hermite(cfg);
        let text = serde_json::to_string_pretty(&result).expect("result serializes") + "\n";
        write_file(output, &text)?;
        let found = result.score.is_finite();
        return Ok(RunOutcome {
            engine: cfg.engine,
            output: output.to_owned(),
            best_score: found.then_some(result.score),
            best_id: None,
            spend: result.evaluations as f64,
            unit: BudgetUnit::Evaluations,
            budget_exhausted: false,
        });
    }

    let registry = Arc::new(VerifierRegistry::builtin());
    let problem = resolve_problem(&cfg.problem, &registry)?;
    let sandbox = Sandbox::new(cfg.sandbox.clone(), registry)?;
    let gateway = build_gateway(&cfg.backend, cfg.seed)?;
    let ledger = SharedLedger::new(BudgetLedger::new(cfg.budget.unit, cfg.budget.cap)?);
    if let Some(dir) = output.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| ConfigError::Write {
            path: dir.to_owned(),
            reason: e.to_string(),
        })?;
    }
    let ctx = SearchContext {
        gateway: &gateway,
        sandbox: &sandbox,
        timing: cfg.timing,
        archive_path: Some(output),
    };
    let run = match cfg.engine {
        Engine::Iid => ctx.run_iid(&problem, &cfg.iid, &ledger, cfg.seed)?,
        Engine::Scs => ctx.run_scs(&problem, &cfg.scs, &ledger, cfg.seed)?,
        Engine::HermiteOpt => unreachable!("handled above"),
    };
    let best = run.best();
    let spend = ledger.lock().total();
    Ok(RunOutcome {
        engine: cfg.engine,
        output: output.to_owned(),
        best_score: best.and_then(|r| r.score()),
        best_id: best.map(|r| r.id.clone()),
        spend,
        unit: cfg.budget.unit,
        budget_exhausted: run.budget_exhausted,
    })
}

/// The optimizer with the run seed in place of its own.
pub fn run_hermite(cfg: &RunConfig) -> HermiteOptResult {
    let mut h = cfg.hermite.clone();
    h.seed = cfg.seed;
    optimize_hermite(&h)
}
