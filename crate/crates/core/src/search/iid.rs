use serde::{Deserialize, Serialize};

use super::{Job, RunState, SearchContext, SearchError, SearchRun};
use crate::archive::ArchiveHeader;
use crate::budget::SharedLedger;
use crate::llm::SamplingParams;
use crate::model::ProblemSpec;

/// Independent sampling from the base prompt.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IidConfig {
    pub total_samples: u32,
    /// Candidates generated and evaluated together. Affects concurrency and,
    /// under a dollar budget, exactly where the run stops.
    pub batch_size: u32,
    pub params: SamplingParams,
}

impl Default for IidConfig {
    fn default() -> Self {
        Self {
            total_samples: 2000,
            batch_size: 16,
            params: SamplingParams::default(),
        }
    }
}

impl IidConfig {
    pub fn validate(&self) -> Result<(), SearchError> {
        if self.total_samples == 0 {
            return Err(SearchError::Config("total_samples must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(SearchError::Config("batch_size must be at least 1".into()));
        }
        Ok(())
    }
}

impl SearchContext<'_> {
    /// Samples up to `total_samples` programs from the problem's prompt and
    /// evaluates each, stopping early when the budget runs out.
    pub fn run_iid(
        &self,
        problem: &ProblemSpec,
        cfg: &IidConfig,
        budget: &SharedLedger,
        seed: u64,
    ) -> Result<SearchRun, SearchError> {
        cfg.validate()?;
        let header = ArchiveHeader::new(
            problem.clone(),
            "iid",
            serde_json::to_value(cfg).expect("config serializes"),
            seed,
            self.gateway.prices().digest(),
            self.timing,
        );
        let mut state = RunState::new(self, problem, &cfg.params, budget, header)?;
        let prompt = state.base_prompt()?;
        let mut issued = 0;
        while issued < cfg.total_samples && !state.exhausted {
            let n = cfg.batch_size.min(cfg.total_samples - issued);
            let jobs = (0..n)
                .map(|_| Job {
                    trial: 0,
                    generation: 0,
                    parent_ids: Vec::new(),
                    prompt: prompt.clone(),
                })
                .collect();
            state.run_batch(jobs)?;
            issued += n;
        }
        Ok(state.finish())
    }
}
