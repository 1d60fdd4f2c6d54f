//! Chat-completion access: sampling controls, cost accounting, templating,
//! and the mock and record/replay backends used for offline runs.

mod extract;
mod http;
mod mock;
mod price;
mod replay;
mod template;

pub use extract::extract_code;
pub use http::{HttpBackend, HttpConfig};
pub use mock::{MockBackend, MockStats, MockTier};
pub use price::{ModelPrice, PriceTable};
pub use replay::{RecordingBackend, ReplayBackend, TranscriptEntry};
pub use template::{PromptTemplate, TemplateError};

use std::sync::{Condvar, Mutex};
use std::time::Duration;

use log::warn;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::budget::{BudgetError, BudgetUnit, Reservation, SharedLedger};
use crate::model::TokenUsage;

pub const DEFAULT_MAX_OUTPUT_TOKENS: u64 = 16384;

/// Prompt tokens allowed for role markers and other chat framing when
/// bounding the cost of a call.
const FRAMING_TOKENS: u64 = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplingParams {
    pub temperature: f64,
    pub top_p: f64,
    pub thinking_budget_tokens: u64,
    pub max_output_tokens: u64,
}

impl Default for SamplingParams {
    fn default() -> Self {
        Self {
            temperature: 0.8,
            top_p: 0.95,
            thinking_budget_tokens: 1024,
            max_output_tokens: DEFAULT_MAX_OUTPUT_TOKENS,
        }
    }
}

impl SamplingParams {
    pub fn validate(&self) -> Result<(), LlmError> {
        if !(self.temperature >= 0.0 && self.temperature.is_finite()) {
            return Err(LlmError::Config(format!("temperature must be >= 0, got {}", self.temperature)));
        }
        if !(self.top_p > 0.0 && self.top_p <= 1.0) {
            return Err(LlmError::Config(format!("top_p must be in (0, 1], got {}", self.top_p)));
        }
        if self.max_output_tokens == 0 {
            return Err(LlmError::Config("max_output_tokens must be positive".into()));
        }
        Ok(())
    }
}

/// Hex SHA-256 of a rendered prompt.
pub fn prompt_digest(prompt: &str) -> String {
    hex::encode(Sha256::digest(prompt.as_bytes()))
}

/// What a backend is asked for. `call_index` is assigned by the caller so
/// that requests issued in parallel still have a deterministic identity.
#[derive(Debug, Clone)]
pub struct CompletionRequest<'a> {
    pub model: &'a str,
    pub prompt: &'a str,
    pub digest: &'a str,
    pub params: &'a SamplingParams,
    pub call_index: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendResponse {
    pub text: String,
    pub usage: TokenUsage,
}

#[derive(Debug, Error)]
pub enum BackendError {
    /// Worth retrying: connection problems, rate limits, server errors.
    #[error("transient provider failure: {0}")]
    Transient(String),
    #[error("provider error: {0}")]
    Permanent(String),
    #[error("no transcript entry for prompt {digest} call {call_index}")]
    TranscriptMiss { digest: String, call_index: u64 },
}

pub trait Backend: Send + Sync {
    fn complete(&self, request: &CompletionRequest<'_>) -> Result<BackendResponse, BackendError>;
}

#[derive(Debug, Error)]
pub enum LlmError {
    #[error("budget exhausted: {0}")]
    BudgetExhausted(BudgetError),
    #[error("provider failed after {attempts} attempts: {last}")]
    Provider { attempts: u32, last: String },
    #[error(transparent)]
    Backend(BackendError),
    #[error("invalid gateway configuration: {0}")]
    Config(String),
}

/// Result of one gateway call, after cost has been committed.
#[derive(Debug, Clone, PartialEq)]
pub struct Completion {
    pub program: String,
    pub response: String,
    pub prompt_digest: String,
    pub usage: TokenUsage,
    pub dollar_cost: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetryPolicy {
    pub attempts: u32,
    pub base_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            attempts: 3,
            base_delay: Duration::from_millis(500),
        }
    }
}

struct Limiter {
    max: usize,
    in_flight: Mutex<usize>,
    freed: Condvar,
}

impl Limiter {
    fn acquire(&self) -> LimiterGuard<'_> {
        let mut n = self.in_flight.lock().expect("limiter");
        while *n >= self.max {
            n = self.freed.wait(n).expect("limiter");
        }
        *n += 1;
        LimiterGuard(self)
    }
}

struct LimiterGuard<'a>(&'a Limiter);

impl Drop for LimiterGuard<'_> {
    fn drop(&mut self) {
        *self.0.in_flight.lock().expect("limiter") -= 1;
        self.0.freed.notify_one();
    }
}

/// Dollar reservation held for one pending call.
#[derive(Debug)]
#[must_use]
pub struct CallPermit {
    reservation: Option<Reservation>,
}

/// Thread-safe client: bounded in-flight requests, retries, extraction and
/// dollar accounting.
pub struct Gateway {
    backend: Box<dyn Backend>,
    model: String,
    prices: PriceTable,
    retry: RetryPolicy,
    limiter: Limiter,
}

impl Gateway {
    pub fn new(
        backend: Box<dyn Backend>,
        model: impl Into<String>,
        prices: PriceTable,
        max_in_flight: usize,
    ) -> Result<Self, LlmError> {
        let model = model.into();
        if prices.get(&model).is_none() {
            return Err(LlmError::Config(format!("price table has no entry for model `{model}`")));
        }
        if max_in_flight == 0 {
            return Err(LlmError::Config("max_in_flight must be at least 1".into()));
        }
        Ok(Self {
            backend,
            model,
            prices,
            retry: RetryPolicy::default(),
            limiter: Limiter {
                max: max_in_flight,
                in_flight: Mutex::new(0),
                freed: Condvar::new(),
            },
        })
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn model(&self) -> &str {
        &self.model
    }

    pub fn prices(&self) -> &PriceTable {
        &self.prices
    }

    /// Largest dollar cost a call with this prompt can incur: every prompt
    /// byte counted as a token, plus a margin for chat framing, plus the full
    /// output and thinking allowances.
    pub fn worst_case_cost(&self, prompt: &str, params: &SamplingParams) -> f64 {
        let bound = TokenUsage {
            tokens_in: prompt.len() as u64 + FRAMING_TOKENS,
            tokens_out: params.max_output_tokens,
            thinking_tokens: params.thinking_budget_tokens,
        };
        self.prices.cost(&self.model, &bound).expect("model checked at construction")
    }

    /// Reserves the worst-case cost of one call on a dollar-denominated
    /// ledger. Ledgers in other units are not touched.
    pub fn reserve(
        &self,
        prompt: &str,
        params: &SamplingParams,
        ledger: Option<&SharedLedger>,
    ) -> Result<CallPermit, LlmError> {
        params.validate()?;
        let reservation = match ledger.filter(|l| l.unit() == BudgetUnit::Dollars) {
            Some(l) => Some(
                l.lock()
                    .reserve(self.worst_case_cost(prompt, params))
                    .map_err(LlmError::BudgetExhausted)?,
            ),
            None => None,
        };
        Ok(CallPermit { reservation })
    }

    /// Returns an unused permit's reservation to the ledger.
    pub fn release(&self, ledger: Option<&SharedLedger>, permit: CallPermit) {
        if let (Some(l), Some(r)) = (ledger, permit.reservation) {
            l.lock().release(r);
        }
    }

    /// Sends one prompt. With a dollar-denominated ledger the worst-case cost
    /// is reserved first (no request is sent if it does not fit) and the
    /// actual cost is committed before the result is returned.
    pub fn complete(
        &self,
        prompt: &str,
        params: &SamplingParams,
        call_index: u64,
        ledger: Option<&SharedLedger>,
    ) -> Result<Completion, LlmError> {
        let permit = self.reserve(prompt, params, ledger)?;
        self.complete_reserved(prompt, params, call_index, ledger, permit)
    }

    /// As [`complete`](Self::complete) with a permit obtained earlier from
    /// [`reserve`](Self::reserve) on the same ledger.
    pub fn complete_reserved(
        &self,
        prompt: &str,
        params: &SamplingParams,
        call_index: u64,
        ledger: Option<&SharedLedger>,
        permit: CallPermit,
    ) -> Result<Completion, LlmError> {
        params.validate()?;
        let dollar_ledger = ledger.filter(|l| l.unit() == BudgetUnit::Dollars);
        let reservation = permit.reservation;
        let digest = prompt_digest(prompt);
        let request = CompletionRequest {
            model: &self.model,
            prompt,
            digest: &digest,
            params,
            call_index,
        };
        let response = match self.send_with_retry(&request) {
            Ok(r) => r,
            Err(e) => {
                if let (Some(l), Some(r)) = (dollar_ledger, reservation) {
                    l.lock().release(r);
                }
                return Err(e);
            }
        };
        let dollar_cost = self
            .prices
            .cost(&self.model, &response.usage)
            .expect("model checked at construction");
        if let (Some(l), Some(r)) = (dollar_ledger, reservation) {
            l.lock()
                .commit(r, format!("llm-call-{call_index}"), dollar_cost)
                .map_err(LlmError::BudgetExhausted)?;
        }
        Ok(Completion {
            program: extract_code(&response.text),
            response: response.text,
            prompt_digest: digest,
            usage: response.usage,
            dollar_cost,
        })
    }

    fn send_with_retry(&self, request: &CompletionRequest<'_>) -> Result<BackendResponse, LlmError> {
        let _slot = self.limiter.acquire();
        let mut last = String::new();
        for attempt in 0..self.retry.attempts {
            if attempt > 0 {
                std::thread::sleep(self.retry.base_delay * 2u32.pow(attempt - 1));
            }
            match self.backend.complete(request) {
                Ok(r) => return Ok(r),
                Err(BackendError::Transient(m)) => {
                    warn!("attempt {} of {} failed: {m}", attempt + 1, self.retry.attempts);
                    last = m;
                }
                Err(e) => return Err(LlmError::Backend(e)),
            }
        }
        Err(LlmError::Provider {
            attempts: self.retry.attempts,
            last,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::budget::BudgetLedger;
    use std::sync::atomic::{AtomicU32, Ordering};
    use std::sync::Arc;

    struct Flaky {
        failures: u32,
        calls: AtomicU32,
    }

    impl Backend for Flaky {
        fn complete(&self, _: &CompletionRequest<'_>) -> Result<BackendResponse, BackendError> {
            let n = self.calls.fetch_add(1, Ordering::SeqCst);
            if n < self.failures {
                return Err(BackendError::Transient(format!("failure {n}")));
            }
            Ok(BackendResponse {
                text: "```python\nx = 1\n```".into(),
                usage: TokenUsage {
                    tokens_in: 10,
                    tokens_out: 20,
                    thinking_tokens: 5,
                },
            })
        }
    }

    fn prices() -> PriceTable {
        PriceTable::single("m", ModelPrice::per_million(1.0, 10.0, 10.0))
    }

    fn gateway(failures: u32) -> Gateway {
        let b = Flaky {
            failures,
            calls: AtomicU32::new(0),
        };
        Gateway::new(Box::new(b), "m", prices(), 2).unwrap().with_retry(RetryPolicy {
            attempts: 3,
            base_delay: Duration::ZERO,
        })
    }

    #[test]
    fn retries_then_succeeds_or_gives_up() {
        let p = SamplingParams::default();
        let c = gateway(2).complete("hi", &p, 0, None).unwrap();
        assert_eq!(c.program, "x = 1\n");
        assert!((c.dollar_cost - (10.0 + 200.0 + 50.0) * 1e-6).abs() < 1e-18);
        assert!(matches!(gateway(3).complete("hi", &p, 0, None), Err(LlmError::Provider { attempts: 3, .. })));
    }

    #[test]
    fn ledger_gating() {
        let p = SamplingParams::default();
        let g = gateway(0);
        let worst = g.worst_case_cost("hi", &p);
        let ledger = SharedLedger::new(BudgetLedger::new(BudgetUnit::Dollars, worst * 1.5).unwrap());
        let c = g.complete("hi", &p, 0, Some(&ledger)).unwrap();
        assert_eq!(ledger.snapshot().total(), c.dollar_cost);
        // remaining < worst case: refused before sending, nothing recorded
        let before = ledger.snapshot().entries.len();
        let g2 = gateway(0);
        let tight = SharedLedger::new(BudgetLedger::new(BudgetUnit::Dollars, worst * 0.5).unwrap());
        assert!(matches!(g2.complete("hi", &p, 0, Some(&tight)), Err(LlmError::BudgetExhausted(_))));
        assert!(tight.snapshot().entries.is_empty());
        assert_eq!(ledger.snapshot().entries.len(), before);
        // non-dollar ledgers are left alone
        let evals = SharedLedger::new(BudgetLedger::new(BudgetUnit::Evaluations, 1.0).unwrap());
        g.complete("hi", &p, 1, Some(&evals)).unwrap();
        assert!(evals.snapshot().entries.is_empty());
    }

    #[test]
    fn failed_call_releases_reservation() {
        let p = SamplingParams::default();
        let g = gateway(5);
        let ledger = SharedLedger::new(BudgetLedger::new(BudgetUnit::Dollars, 1.0).unwrap());
        assert!(g.complete("hi", &p, 0, Some(&ledger)).is_err());
        assert_eq!(ledger.snapshot().remaining(), 1.0);
    }

    #[test]
    fn unknown_model_and_bad_params() {
        let b = Box::new(Flaky {
            failures: 0,
            calls: AtomicU32::new(0),
        });
        assert!(Gateway::new(b, "other", prices(), 1).is_err());
        let bad = SamplingParams {
            top_p: 0.0,
            ..Default::default()
        };
        assert!(gateway(0).complete("x", &bad, 0, None).is_err());
    }

    #[test]
    fn concurrency_cap() {
        let mock = MockBackend::new(1).with_latency(Duration::from_millis(20));
        let stats = mock.stats();
        let g = Arc::new(Gateway::new(Box::new(mock), "mock", PriceTable::mock(), 3).unwrap());
        std::thread::scope(|s| {
            for i in 0..12 {
                let g = g.clone();
                s.spawn(move || g.complete("prompt", &SamplingParams::default(), i, None).unwrap());
            }
        });
        assert_eq!(stats.calls(), 12);
        assert!(stats.peak_in_flight() <= 3 && stats.peak_in_flight() >= 2);
    }
}
