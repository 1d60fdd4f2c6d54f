use std::collections::BTreeMap;
use std::path::PathBuf;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{template, Job, RunState, SearchContext, SearchError, SearchRun};
use crate::archive::ArchiveHeader;
use crate::assets::BUILTIN_PREFIX;
use crate::budget::SharedLedger;
use crate::llm::{PromptTemplate, SamplingParams};
use crate::model::{CandidateRecord, ProblemSpec};

/// Sequential conditioned sampling: generations of programs, each prompted
/// with a random subset of the previous generation's successful programs,
/// restarted from scratch every trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScsConfig {
    pub programs_per_generation: u32,
    pub generations_per_trial: u32,
    pub trials: u32,
    pub conditioning_count: u32,
    pub params: SamplingParams,
    /// Wraps the base prompt and the rendered parent programs.
    pub conditioning_template: PathBuf,
    /// Renders one parent program with its score.
    pub program_template: PathBuf,
}

impl Default for ScsConfig {
    fn default() -> Self {
        Self {
            programs_per_generation: 20,
            generations_per_trial: 10,
            trials: 6,
            conditioning_count: 3,
            params: SamplingParams::default(),
            conditioning_template: PathBuf::from(format!("{BUILTIN_PREFIX}prompts/scs_conditioning.md")),
            program_template: PathBuf::from(format!("{BUILTIN_PREFIX}prompts/scs_program.md")),
        }
    }
}

impl ScsConfig {
    pub fn validate(&self) -> Result<(), SearchError> {
        for (name, v) in [
            ("programs_per_generation", self.programs_per_generation),
            ("generations_per_trial", self.generations_per_trial),
            ("trials", self.trials),
            ("conditioning_count", self.conditioning_count),
        ] {
            if v == 0 {
                return Err(SearchError::Config(format!("{name} must be at least 1")));
            }
        }
        if self.conditioning_count > self.programs_per_generation {
            return Err(SearchError::Config(
                "conditioning_count cannot exceed programs_per_generation".into(),
            ));
        }
        Ok(())
    }
}

struct Prompts {
    base: String,
    conditioning: PromptTemplate,
    program: PromptTemplate,
}

impl Prompts {
    fn conditioned(&self, parents: &[&CandidateRecord]) -> Result<String, SearchError> {
        let mut programs = String::new();
        for (i, p) in parents.iter().enumerate() {
            let index = (i + 1).to_string();
            let score = p.score().expect("parents are successful").to_string();
            let source = p.source_text.trim_end();
            programs.push_str(&self.program.render(&BTreeMap::from([
                ("index", index.as_str()),
                ("score", score.as_str()),
                ("source", source),
            ]))?);
            programs.push('\n');
        }
        Ok(self.conditioning.render(&BTreeMap::from([
            ("base_prompt", self.base.as_str()),
            ("programs", programs.trim_end()),
        ]))?)
    }
}

impl SearchContext<'_> {
    /// Runs `trials` independent restarts of `generations_per_trial`
    /// generations. Parents are drawn uniformly without replacement, per
    /// candidate, from the previous generation's successes; there is no
    /// fitness-based selection. A generation with fewer successes than
    /// `conditioning_count` is followed by one prompted from scratch.
    pub fn run_scs(
        &self,
        problem: &ProblemSpec,
        cfg: &ScsConfig,
        budget: &SharedLedger,
        seed: u64,
    ) -> Result<SearchRun, SearchError> {
        cfg.validate()?;
        let header = ArchiveHeader::new(
            problem.clone(),
            "scs",
            serde_json::to_value(cfg).expect("config serializes"),
            seed,
            self.gateway.prices().digest(),
            self.timing,
        );
        let mut state = RunState::new(self, problem, &cfg.params, budget, header)?;
        let prompts = Prompts {
            base: state.base_prompt()?,
            conditioning: template(&cfg.conditioning_template)?,
            program: template(&cfg.program_template)?,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let k = cfg.conditioning_count as usize;

        'trials: for trial in 0..cfg.trials {
            let mut previous: Vec<CandidateRecord> = Vec::new();
            for generation in 0..cfg.generations_per_trial {
                if state.exhausted {
                    break 'trials;
                }
                let pool: Vec<&CandidateRecord> = previous.iter().filter(|r| r.succeeded()).collect();
                let mut jobs = Vec::with_capacity(cfg.programs_per_generation as usize);
                for _ in 0..cfg.programs_per_generation {
                    let job = if pool.len() >= k {
                        let mut picked = sample(&mut rng, pool.len(), k).into_vec();
                        picked.sort_unstable();
                        let parents: Vec<&CandidateRecord> = picked.iter().map(|&i| pool[i]).collect();
                        Job {
                            trial,
                            generation,
                            parent_ids: parents.iter().map(|p| p.id.clone()).collect(),
                            prompt: prompts.conditioned(&parents)?,
                        }
                    } else {
                        Job {
                            trial,
                            generation,
                            parent_ids: Vec::new(),
                            prompt: prompts.base.clone(),
                        }
                    };
                    jobs.push(job);
                }
                previous = state.run_batch(jobs)?;
            }
        }
        Ok(state.finish())
    }
}
