use std::path::PathBuf;

use clap::{Args, Subcommand};
use evobase::archive::RunArchive;
use evobase::budget::BudgetUnit;
use evobase::model::Direction;
use evobase::stats::{
    effective_set_size, majority_accuracy_distribution, pass_at_k, probability_of_dominance,
    probability_of_improvement, scs_curve, trials_from_archive, AnswerPool, BudgetedTrialSet, CurvePoint,
    DominanceMode, Pairing, ScoreMatrix,
};

use crate::{domain, emit, read_input, usage, CmdResult, Global};

#[derive(Subcommand)]
pub enum StatsCommand {
    /// Probability that k of n samples, c of them hits, include a hit.
    PassAtK {
        #[arg(long)]
        n: u64,
        #[arg(long)]
        c: u64,
        /// One or more sample counts.
        #[arg(long, num_args = 1.., required = true)]
        k: Vec<u64>,
    },
    /// Budget curve of sequential search from trials or an archive.
    ScsCurve(ScsCurveArgs),
    /// Probability of improvement of one method over another.
    Poi {
        /// CSV with method,run_index,score rows.
        #[arg(long)]
        scores: PathBuf,
        #[arg(long)]
        a: String,
        #[arg(long)]
        b: String,
        #[arg(long, default_value = "maximize")]
        direction: Direction,
    },
    /// Probability of dominance of every method over the others.
    Pod {
        /// CSV with method,run_index,score rows.
        #[arg(long)]
        scores: PathBuf,
        #[arg(long, default_value = "maximize")]
        direction: Direction,
        /// Estimate with this many Monte Carlo draws instead of enumerating.
        #[arg(long)]
        mc_samples: Option<usize>,
    },
    /// Bootstrap distribution of majority-vote accuracy.
    Majority(MajorityArgs),
}

#[derive(Args)]
pub struct ScsCurveArgs {
    /// JSON trial set: {"trials": [{"costs": [...], "best_scores": [...]}], "target", "direction"}.
    #[arg(long, conflicts_with = "archive", required_unless_present = "archive")]
    trials: Option<PathBuf>,
    /// SCS archive; needs --target.
    #[arg(long)]
    archive: Option<PathBuf>,
    #[arg(long)]
    target: Option<f64>,
    /// Budgets to evaluate at, comma separated.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    budgets: Vec<f64>,
    /// Evenly spaced budgets up to --budget, used when --budgets is absent.
    #[arg(long, default_value_t = 20)]
    points: usize,
    #[arg(long, default_value_t = 1000)]
    resamples: usize,
    #[arg(long, default_value_t = 0.95)]
    level: f64,
}

#[derive(Args)]
pub struct MajorityArgs {
    /// JSON: {"answers": [[...per question...]], "keys": [...]}.
    #[arg(long)]
    pool: PathBuf,
    #[arg(long)]
    k: usize,
    #[arg(long, default_value_t = 1)]
    repetitions: usize,
    #[arg(long, default_value_t = 10000)]
    resamples: usize,
}

fn matrix(path: &PathBuf, direction: Direction) -> Result<ScoreMatrix, crate::Failure> {
    ScoreMatrix::from_csv(read_input(path)?.as_bytes(), direction).map_err(domain)
}

fn curve_csv(points: &[CurvePoint]) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["budget", "probability", "lo", "hi"]).expect("in memory");
    for p in points {
        w.write_record([p.budget, p.probability, p.lo, p.hi].map(|v| v.to_string())).expect("in memory");
    }
    w.into_inner().expect("in memory")
}

pub fn cmd_stats(g: &Global, c: StatsCommand) -> CmdResult {
    let seed = g.seed.unwrap_or(0);
    let out = g.out.as_deref();
    match c {
        StatsCommand::PassAtK { n, c, k } => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["k", "pass_at_k"]).expect("in memory");
            for k in k {
                let p = pass_at_k(n, c, k).map_err(usage)?;
                w.write_record([k.to_string(), p.to_string()]).expect("in memory");
            }
            emit(out, &w.into_inner().expect("in memory"))
        }
        StatsCommand::ScsCurve(a) => {
            let set: BudgetedTrialSet<f64> = match (&a.trials, &a.archive) {
                (Some(path), _) => serde_json::from_str(&read_input(path)?).map_err(|e| usage(format!("{}: {e}", path.display())))?,
                (None, Some(path)) => {
                    let target = a.target.ok_or_else(|| usage("--target is required with --archive"))?;
                    let archive = RunArchive::load(path).map_err(domain)?;
                    let unit = g.budget_unit.unwrap_or(BudgetUnit::Dollars);
                    trials_from_archive(&archive, unit, target).map_err(domain)?
                }
                (None, None) => unreachable!("clap requires one input"),
            };
            let set = match a.target {
                Some(t) => BudgetedTrialSet { target: t, ..set },
                None => set,
            };
            let budgets = if a.budgets.is_empty() {
                let max = g.budget.ok_or_else(|| usage("give --budgets, or --budget with --points"))?;
                if a.points == 0 {
                    return Err(usage("--points must be at least 1"));
                }
                (1..=a.points).map(|i| max * i as f64 / a.points as f64).collect()
            } else {
                a.budgets
            };
            let points = scs_curve(&set, &budgets, a.resamples, a.level, seed).map_err(domain)?;
            emit(out, &curve_csv(&points))
        }
        StatsCommand::Poi {
            scores,
            a,
            b,
            direction,
        } => {
            let m = matrix(&scores, direction)?;
            let get = |name: &str| {
                m.methods
                    .iter()
                    .position(|x| x == name)
                    .map(|i| &m.samples[i])
                    .ok_or_else(|| usage(format!("method `{name}` is not in {}", scores.display())))
            };
            let (sa, sb) = (get(&a)?, get(&b)?);
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["pairing", "probability"]).expect("in memory");
            for (name, pairing) in [("all_pairs", Pairing::AllPairs), ("index_paired", Pairing::IndexPaired)] {
                let v = match probability_of_improvement(sa, sb, direction, pairing) {
                    Ok(v) => v.to_string(),
                    Err(_) if pairing == Pairing::IndexPaired => "n/a".into(),
                    Err(e) => return Err(domain(e)),
                };
                w.write_record([name, &v]).expect("in memory");
            }
            emit(out, &w.into_inner().expect("in memory"))
        }
        StatsCommand::Pod {
            scores,
            direction,
            mc_samples,
        } => {
            let m = matrix(&scores, direction)?;
            let mode = match mc_samples {
                Some(samples) => DominanceMode::MonteCarlo { samples, seed },
                None => DominanceMode::Exact,
            };
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["method", "probability", "std_error"]).expect("in memory");
            for (i, name) in m.methods.iter().enumerate() {
                let e = probability_of_dominance(&m, i, mode).map_err(domain)?;
                w.write_record([name.clone(), e.value.to_string(), e.std_error.to_string()])
                    .expect("in memory");
            }
            emit(out, &w.into_inner().expect("in memory"))
        }
        StatsCommand::Majority(a) => {
            let text = read_input(&a.pool)?;
            let pool: AnswerPool =
                serde_json::from_str(&text).map_err(|e| usage(format!("{}: {e}", a.pool.display())))?;
            let d = majority_accuracy_distribution(&pool, a.k, a.repetitions, a.resamples, seed).map_err(domain)?;
            let size = effective_set_size(pool.answers.len() as u64, a.repetitions as u64).map_err(domain)?;
            eprintln!(
                "mean {:.6}  std {:.6}  2.5% {:.6}  97.5% {:.6}  effective set size {}{}",
                d.mean(),
                d.std(),
                d.quantile(0.025),
                d.quantile(0.975),
                size.size,
                if size.flagged { " (below 300)" } else { "" }
            );
            let mut buf = Vec::new();
            d.write_csv(&mut buf).map_err(domain)?;
            emit(out, &buf)
        }
    }
}
