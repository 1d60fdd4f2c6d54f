//! Baseline search procedures over LLM-generated programs, and a direct
//! coefficient optimizer for the uncertainty problem.
//!
//! Candidates move through a fixed pipeline in batches: budget gating in job
//! order, concurrent generation, concurrent evaluation, then records appended
//! in job order. Everything that decides what ends up in the archive happens
//! sequentially, so a run is reproducible for a given backend and seed.

mod hermite_opt;
mod iid;
mod scs;

use std::collections::BTreeMap;
use std::path::Path;

use chrono::{DateTime, Utc};
use log::{info, warn};
use thiserror::Error;

pub use hermite_opt::{optimize_hermite, HermiteOptConfig, HermiteOptResult};
pub use iid::IidConfig;
pub use scs::ScsConfig;

use crate::archive::{ArchiveError, ArchiveHeader, ArchiveWriter, RunArchive, TimingMode};
use crate::assets::load_text;
use crate::budget::{BudgetError, BudgetUnit, Reservation, SharedLedger};
use crate::llm::{CallPermit, Gateway, LlmError, PromptTemplate, SamplingParams, TemplateError};
use crate::model::{CandidateRecord, ProblemSpec};
use crate::sandbox::{Sandbox, SandboxError};

#[derive(Debug, Error)]
pub enum SearchError {
    #[error("invalid search configuration: {0}")]
    Config(String),
    #[error("prompt template {path}: {reason}")]
    Prompt { path: String, reason: String },
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error(transparent)]
    Llm(#[from] LlmError),
    #[error(transparent)]
    Sandbox(#[from] SandboxError),
    #[error(transparent)]
    Archive(#[from] ArchiveError),
    #[error(transparent)]
    Budget(#[from] BudgetError),
}

/// A finished (or budget-stopped) search.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchRun {
    pub archive: RunArchive,
    /// The budget refused further work before the configured totals were reached.
    pub budget_exhausted: bool,
}

impl SearchRun {
    pub fn best(&self) -> Option<&CandidateRecord> {
        self.archive.best_of(None).ok().flatten()
    }
}

/// What a search needs besides its configuration.
pub struct SearchContext<'a> {
    pub gateway: &'a Gateway,
    pub sandbox: &'a Sandbox,
    pub timing: TimingMode,
    /// Where to stream the archive while the run progresses.
    pub archive_path: Option<&'a Path>,
}

/// Formats seconds for prompts: integral values without a decimal point.
fn format_seconds(s: f64) -> String {
    if s.fract() == 0.0 && s.abs() < 1e15 {
        format!("{}", s as i64)
    } else {
        format!("{s}")
    }
}

fn template(path: &Path) -> Result<PromptTemplate, SearchError> {
    let text = load_text(path).map_err(|e| SearchError::Prompt {
        path: path.display().to_string(),
        reason: e.to_string(),
    })?;
    Ok(PromptTemplate::new(text))
}

/// The problem's prompt with the time limit filled in.
pub fn base_prompt(problem: &ProblemSpec, time_limit: f64) -> Result<String, SearchError> {
    let t = template(&problem.prompt_template_path)?;
    let seconds = format_seconds(time_limit);
    Ok(t.render(&BTreeMap::from([("max_execution_time", seconds.as_str())]))?)
}

/// One candidate to generate.
struct Job {
    trial: u32,
    generation: u32,
    parent_ids: Vec<String>,
    prompt: String,
}

/// Reservations held for one gated job.
struct Permits {
    llm: CallPermit,
    eval: Option<Reservation>,
}

struct RunState<'a> {
    ctx: &'a SearchContext<'a>,
    problem: &'a ProblemSpec,
    params: &'a SamplingParams,
    budget: &'a SharedLedger,
    time_limit: f64,
    archive: RunArchive,
    writer: Option<ArchiveWriter>,
    calls_issued: u64,
    exhausted: bool,
}

impl<'a> RunState<'a> {
    fn new(
        ctx: &'a SearchContext<'a>,
        problem: &'a ProblemSpec,
        params: &'a SamplingParams,
        budget: &'a SharedLedger,
        header: ArchiveHeader,
    ) -> Result<Self, SearchError> {
        params.validate()?;
        ctx.sandbox.registry().validate_problem(problem).map_err(|e| SearchError::Config(e.to_string()))?;
        let writer = match ctx.archive_path {
            Some(p) => Some(ArchiveWriter::create(p, &header)?),
            None => None,
        };
        Ok(Self {
            ctx,
            problem,
            params,
            budget,
            time_limit: ctx.sandbox.config().time_limit.unwrap_or(problem.time_limit),
            archive: RunArchive::new(header),
            writer,
            calls_issued: 0,
            exhausted: false,
        })
    }

    fn base_prompt(&self) -> Result<String, SearchError> {
        base_prompt(self.problem, self.time_limit)
    }

    /// Evaluation-side reservation for one candidate. Dollar budgets are
    /// gated by the gateway instead.
    fn eval_cost(&self) -> Option<f64> {
        match self.budget.unit() {
            BudgetUnit::Dollars => None,
            BudgetUnit::Evaluations => Some(1.0),
            // a candidate is killed at the limit; the extra second covers start-up and reaping
            BudgetUnit::WallClockSeconds => Some(self.time_limit + 1.0),
        }
    }

    fn gate(&mut self, job: &Job) -> Option<Permits> {
        let eval = match self.eval_cost() {
            Some(amount) => match self.budget.lock().reserve(amount) {
                Ok(r) => Some(r),
                Err(_) => return None,
            },
            None => None,
        };
        match self.ctx.gateway.reserve(&job.prompt, self.params, Some(self.budget)) {
            Ok(llm) => Some(Permits { llm, eval }),
            Err(_) => {
                if let Some(r) = eval {
                    self.budget.lock().release(r);
                }
                None
            }
        }
    }

    fn release_eval(&self, eval: Option<Reservation>) {
        if let Some(r) = eval {
            self.budget.lock().release(r);
        }
    }

    /// Generates, evaluates and records `jobs`. Returns the records added,
    /// in job order. Jobs the budget cannot cover are skipped and mark the
    /// run exhausted.
    fn run_batch(&mut self, jobs: Vec<Job>) -> Result<Vec<CandidateRecord>, SearchError> {
        let mut gated = Vec::with_capacity(jobs.len());
        for job in jobs {
            if self.exhausted {
                break;
            }
            match self.gate(&job) {
                Some(p) => {
                    let index = self.calls_issued;
                    self.calls_issued += 1;
                    gated.push((job, p, index));
                }
                None => self.exhausted = true,
            }
        }
        if gated.is_empty() {
            return Ok(Vec::new());
        }

        let gateway = self.ctx.gateway;
        let (params, budget) = (self.params, self.budget);
        let mut pending = Vec::with_capacity(gated.len());
        let results: Vec<_> = std::thread::scope(|s| {
            let handles: Vec<_> = gated
                .into_iter()
                .map(|(job, permits, index)| {
                    pending.push((job, permits.eval));
                    let prompt = pending.last().expect("just pushed").0.prompt.clone();
                    s.spawn(move || gateway.complete_reserved(&prompt, params, index, Some(budget), permits.llm))
                })
                .collect();
            handles.into_iter().map(|h| h.join().expect("generation thread panicked")).collect()
        });

        let mut generated = Vec::with_capacity(results.len());
        let mut failure = None;
        for ((job, eval), result) in pending.into_iter().zip(results) {
            match result {
                Ok(c) if failure.is_none() => generated.push((job, eval, c)),
                Err(LlmError::BudgetExhausted(e)) => {
                    warn!("dropping candidate whose cost did not fit the budget: {e}");
                    self.exhausted = true;
                    self.release_eval(eval);
                }
                Err(e) => {
                    self.release_eval(eval);
                    failure.get_or_insert(e);
                }
                Ok(_) => self.release_eval(eval),
            }
        }
        if let Some(e) = failure {
            for (_, eval, _) in generated {
                self.release_eval(eval);
            }
            return Err(e.into());
        }

        let sources: Vec<&str> = generated.iter().map(|(_, _, c)| c.program.as_str()).collect();
        let outcomes = match self.ctx.sandbox.evaluate_batch(&sources, self.problem) {
            Ok(o) => o,
            Err(e) => {
                for (_, eval, _) in generated {
                    self.release_eval(eval);
                }
                return Err(e.into());
            }
        };

        let mut added = Vec::with_capacity(outcomes.len());
        for ((job, eval, completion), mut outcome) in generated.into_iter().zip(outcomes) {
            let seq = self.archive.records.len() as u64;
            let id = format!("c{seq:06}");
            if let Some(r) = eval {
                let reserved = self.eval_cost().unwrap_or(0.0);
                let amount = match self.budget.unit() {
                    BudgetUnit::WallClockSeconds => {
                        if outcome.wall_time > reserved {
                            warn!("evaluation {id} ran {:.2} s, over its {reserved:.2} s reservation", outcome.wall_time);
                        }
                        outcome.wall_time.min(reserved)
                    }
                    _ => reserved,
                };
                self.budget.lock().commit(r, format!("eval-{id}"), amount)?;
            }
            let created_at = match self.ctx.timing {
                TimingMode::Recorded => Utc::now(),
                TimingMode::Logical => {
                    outcome.wall_time = 0.0;
                    DateTime::from_timestamp(seq as i64, 0).expect("in range")
                }
            };
            let record = CandidateRecord {
                id,
                seq,
                trial_index: job.trial,
                generation_index: job.generation,
                parent_ids: job.parent_ids,
                source_text: completion.program,
                prompt_digest: completion.prompt_digest,
                usage: completion.usage,
                dollar_cost: completion.dollar_cost,
                created_at,
                outcome: Some(outcome),
            };
            if let Some(w) = &self.writer {
                w.append(&record)?;
            }
            self.archive.records.push(record.clone());
            added.push(record);
        }
        Ok(added)
    }

    fn finish(self) -> SearchRun {
        let best = self.archive.best_of(None).ok().flatten().and_then(|r| r.score());
        info!(
            "search finished: {} candidates, best {:?}, budget {}",
            self.archive.records.len(),
            best,
            if self.exhausted { "exhausted" } else { "not exhausted" }
        );
        SearchRun {
            archive: self.archive,
            budget_exhausted: self.exhausted,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seconds_format() {
        assert_eq!(format_seconds(300.0), "300");
        assert_eq!(format_seconds(0.5), "0.5");
    }

    #[test]
    fn circle_prompt_mentions_time_limit() {
        let p = crate::problems::builtin_problems()
            .into_iter()
            .find(|p| p.name == "circle_packing_26")
            .unwrap();
        let text = base_prompt(&p, 300.0).unwrap();
        assert!(text.contains("300 seconds"));
        assert!(!text.contains("${"));
    }
}
