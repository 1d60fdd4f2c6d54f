use std::path::PathBuf;
use std::sync::Arc;

use clap::{Args, Subcommand};
use evobase::archive::RunArchive;
use evobase::cascade::{run_cascade, synthetic_benchmark, BenchmarkSettings, CascadeConfig, EvalRequest};
use evobase::sandbox::{Sandbox, SandboxConfig};
use evobase::verifiers::VerifierRegistry;

use crate::{domain, emit, read_input, usage, CmdResult, Global};

#[derive(Subcommand)]
pub enum CascadeCommand {
    /// Compare the cascade with single-level selection on noisy synthetic candidates.
    Synthetic(SyntheticArgs),
    /// Re-evaluate an archive's best programs through the cascade.
    Archive(ArchiveArgs),
}

#[derive(Args)]
pub struct Levels {
    /// Cascade settings TOML (levels, incumbent_pool_size).
    #[arg(long)]
    cascade_config: Option<PathBuf>,
}

impl Levels {
    fn load(&self, seed: u64) -> Result<CascadeConfig, crate::Failure> {
        let mut cfg = match &self.cascade_config {
            Some(p) => toml::from_str(&read_input(p)?).map_err(|e| usage(format!("{}: {e}", p.display())))?,
            None => CascadeConfig::default(),
        };
        cfg.seed = seed;
        cfg.validate().map_err(usage)?;
        Ok(cfg)
    }
}

#[derive(Args)]
pub struct SyntheticArgs {
    #[command(flatten)]
    levels: Levels,
    #[arg(long, default_value_t = 50)]
    candidates: usize,
    /// How many candidates have the higher mean.
    #[arg(long, default_value_t = 5)]
    top: usize,
    #[arg(long, default_value_t = 0.6)]
    high: f64,
    #[arg(long, default_value_t = 0.5)]
    low: f64,
    #[arg(long, default_value_t = 0.15)]
    noise: f64,
    #[arg(long, default_value_t = 200)]
    simulations: usize,
}

#[derive(Args)]
pub struct ArchiveArgs {
    #[command(flatten)]
    levels: Levels,
    archive: PathBuf,
    /// Number of best distinct successful records to re-evaluate.
    #[arg(long, default_value_t = 10)]
    candidates: usize,
    #[arg(long, default_value_t = 1)]
    workers: usize,
}

pub fn cmd_cascade(g: &Global, c: CascadeCommand) -> CmdResult {
    let seed = g.seed.unwrap_or(0);
    match c {
        CascadeCommand::Synthetic(a) => {
            let cfg = a.levels.load(seed)?;
            let s = BenchmarkSettings {
                candidates: a.candidates,
                top: a.top,
                high: a.high,
                low: a.low,
                noise: a.noise,
                simulations: a.simulations,
                seed,
            };
            let r = synthetic_benchmark(&cfg, &s).map_err(usage)?;
            let text = format!(
                "cascade top-tier rate {:.4}\nsingle-level top-tier rate {:.4}\nmean cascade evaluations {:.2}\n\
                 single-level evaluations {}\nuniform evaluations {}\n",
                r.cascade_rate(),
                r.single_level_rate(),
                r.mean_cascade_evaluations(),
                r.single_level_evaluations / r.simulations as u64,
                r.uniform_evaluations / r.simulations as u64,
            );
            match &g.out {
                Some(p) => {
                    let json = serde_json::to_string_pretty(&r).expect("result serializes") + "\n";
                    emit(Some(p), json.as_bytes())?;
                    print!("{text}");
                    Ok(())
                }
                None => emit(None, text.as_bytes()),
            }
        }
        CascadeCommand::Archive(a) => {
            let cfg = a.levels.load(seed)?;
            let archive = RunArchive::load(&a.archive).map_err(|e| usage(format!("{}: {e}", a.archive.display())))?;
            let direction = archive.direction();
            let mut records: Vec<_> = archive.records.iter().filter(|r| r.succeeded()).collect();
            records.sort_by(|x, y| {
                let (sx, sy) = (direction.orient(x.score().unwrap_or(0.0)), direction.orient(y.score().unwrap_or(0.0)));
                sy.total_cmp(&sx).then(x.seq.cmp(&y.seq))
            });
            records.dedup_by(|x, y| x.source_text == y.source_text);
            records.truncate(a.candidates);
            if records.is_empty() {
                return Err(domain("no successful records to re-evaluate"));
            }
            let sandbox = Sandbox::new(
                SandboxConfig {
                    worker_count: a.workers.max(1),
                    ..Default::default()
                },
                Arc::new(VerifierRegistry::builtin()),
            )
            .map_err(usage)?;
            let problem = &archive.header.problem;
            let evaluate = |req: &EvalRequest| -> Result<Vec<f64>, String> {
                let src = records[req.candidate].source_text.as_str();
                let sources = vec![src; req.count as usize];
                let outcomes = sandbox.evaluate_batch(&sources, problem).map_err(|e| e.to_string())?;
                outcomes
                    .into_iter()
                    .map(|o| o.score.filter(|_| o.succeeded()).ok_or_else(|| format!("{}: {}", o.status, o.stderr_excerpt)))
                    .collect()
            };
            let out = run_cascade(records.len(), evaluate, &cfg, direction).map_err(domain)?;
            for (c, level, reason) in &out.dropped {
                eprintln!("dropped {} at level {level}: {reason}", records[*c].id);
            }
            println!("rank,record,dominance,mean,repetitions");
            for (i, r) in out.ranking.iter().enumerate() {
                println!("{},{},{},{},{}", i + 1, records[r.candidate].id, r.dominance, r.mean, r.repetitions);
            }
            if let Some(p) = &g.out {
                let mut buf = Vec::new();
                out.write_log_csv(&mut buf).map_err(domain)?;
                emit(Some(p), &buf)?;
            }
            Ok(())
        }
    }
}
