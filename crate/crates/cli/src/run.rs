use std::path::PathBuf;

use clap::Args;
use evobase::archive::TimingMode;
use evobase::config::{execute, BudgetConfig, ConfigError, Engine, RunConfig};
use evobase::problems::builtin_problems;
use evobase::verifiers::{HermiteBasis, VerifierError, VerifierRegistry};

use crate::{domain, read_input, usage, CmdResult, Global};

#[derive(Args)]
pub struct RunArgs {
    /// Built-in problem name or problem TOML; overrides the config's problem.
    problem: Option<String>,
    #[arg(long, value_parser = |s: &str| s.parse::<Engine>())]
    engine: Option<Engine>,
    /// `logical` makes archives of deterministic runs byte-identical.
    #[arg(long, value_parser = parse_timing)]
    timing: Option<TimingMode>,
    /// Optimizer restarts (hermite-opt only).
    #[arg(long)]
    restarts: Option<u32>,
}

fn parse_timing(s: &str) -> Result<TimingMode, String> {
    match s {
        "recorded" => Ok(TimingMode::Recorded),
        "logical" => Ok(TimingMode::Logical),
        other => Err(format!("unknown timing mode `{other}`")),
    }
}

fn engine_name(e: Engine) -> &'static str {
    match e {
        Engine::Iid => "iid",
        Engine::Scs => "scs",
        Engine::HermiteOpt => "hermite-opt",
    }
}

pub fn cmd_run(g: &Global, a: RunArgs) -> CmdResult {
    let mut cfg = match &g.config {
        Some(path) => RunConfig::load(path).map_err(usage)?,
        None => {
            let problem = a.problem.clone().ok_or_else(|| usage("a problem is required without --config"))?;
            let seed = g.seed.ok_or_else(|| usage("--seed is required without --config"))?;
            RunConfig::new(problem, seed)
        }
    };
    if let Some(p) = a.problem {
        cfg.problem = p;
    }
    if let Some(s) = g.seed {
        cfg.seed = s;
    }
    if let Some(e) = a.engine {
        cfg.engine = e;
    }
    if let Some(t) = a.timing {
        cfg.timing = t;
    }
    if let Some(r) = a.restarts {
        cfg.hermite.restarts = r;
    }
    if g.budget.is_some() || g.budget_unit.is_some() {
        cfg.budget = BudgetConfig {
            unit: g.budget_unit.unwrap_or(cfg.budget.unit),
            cap: g.budget.unwrap_or(cfg.budget.cap),
        };
    }
    if cfg.engine == Engine::HermiteOpt && g.config.is_none() && cfg.problem == "uncertainty_k7" {
        cfg.hermite.basis = HermiteBasis::Probabilist;
        cfg.hermite.k = 7;
    }
    let out = g.out.clone().unwrap_or_else(|| {
        let ext = if cfg.engine == Engine::HermiteOpt { "json" } else { "jsonl" };
        let stem = cfg.problem.rsplit('/').next().unwrap_or("run").trim_end_matches(".toml");
        PathBuf::from(format!("runs/{stem}-{}-{}.{ext}", engine_name(cfg.engine), cfg.seed))
    });

    let outcome = execute(&cfg, &out).map_err(|e| match e {
        ConfigError::Read { .. } | ConfigError::Invalid(_) | ConfigError::Problem(_) => usage(e),
        other => domain(other),
    })?;
    println!("output: {}", outcome.output.display());
    println!("spend: {} {}", outcome.spend, outcome.unit);
    match outcome.best_score {
        Some(s) => {
            match &outcome.best_id {
                Some(id) => println!("best: {s} ({id})"),
                None => println!("best: {s}"),
            }
            Ok(())
        }
        None => Err(domain("no solution")),
    }
}

#[derive(Args)]
pub struct ScoreArgs {
    /// Built-in problem name or verifier id.
    problem: String,
    /// Solution JSON.
    solution: PathBuf,
}

pub fn cmd_score(a: ScoreArgs) -> CmdResult {
    let registry = VerifierRegistry::builtin();
    let verifier = builtin_problems()
        .into_iter()
        .find(|p| p.name == a.problem)
        .map(|p| p.verifier_id)
        .unwrap_or(a.problem);
    if !registry.has_verifier(&verifier) {
        return Err(usage(format!("unknown problem or verifier `{verifier}`")));
    }
    let text = read_input(&a.solution)?;
    let payload: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| domain(format!("schema mismatch: {e}")))?;
    match registry.score(&verifier, &payload) {
        Ok(s) => {
            println!("{s}");
            Ok(())
        }
        Err(e @ VerifierError::UnknownVerifier(_)) => Err(usage(e)),
        Err(e) => Err(domain(e)),
    }
}
