//! Offline backend producing canned candidate programs.
//!
//! The problem is recognised from the entry point the prompt asks for. Each
//! response is drawn from a failing, weak or strong tier; the draw and every
//! numeric parameter come from a ChaCha stream seeded by
//! `(seed, prompt digest, call index)`, so the backend is a pure function of
//! those three values. Prompts that carry earlier programs shift the draw
//! towards the strong tier.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use super::{Backend, BackendError, BackendResponse, CompletionRequest};
use crate::model::TokenUsage;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MockTier {
    Failing,
    Weak,
    Strong,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Circles,
    Ratio,
    Heilbronn,
    Kissing,
    Hermite { probabilist: bool },
    Unknown,
}

fn classify(prompt: &str) -> Kind {
    if prompt.contains("def pack_circles") {
        Kind::Circles
    } else if prompt.contains("def kissing_vectors") {
        Kind::Kissing
    } else if prompt.contains("def hermite_coefficients") {
        Kind::Hermite {
            probabilist: prompt.contains("probabilist"),
        }
    } else if prompt.contains("def find_points") {
        if prompt.contains("triangle") {
            Kind::Heilbronn
        } else {
            Kind::Ratio
        }
    } else {
        Kind::Unknown
    }
}

/// Counters for observing how the backend was driven.
#[derive(Debug, Default)]
pub struct MockStats {
    calls: AtomicUsize,
    in_flight: AtomicUsize,
    peak: AtomicUsize,
}

impl MockStats {
    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    pub fn peak_in_flight(&self) -> usize {
        self.peak.load(Ordering::SeqCst)
    }
}

pub struct MockBackend {
    seed: u64,
    latency: Duration,
    timeouts: bool,
    stats: Arc<MockStats>,
}

/// Near-optimal physicist coefficients for four terms, leading term 1.
const HERMITE_K3: [f64; 4] = [-5.42895793e6, 1.91024216e5, 1.47106390e3, 1.0];

impl MockBackend {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            latency: Duration::ZERO,
            timeouts: false,
            stats: Arc::default(),
        }
    }

    /// Sleep this long inside every call.
    pub fn with_latency(mut self, latency: Duration) -> Self {
        self.latency = latency;
        self
    }

    /// Let the failing tier include programs that never return.
    pub fn with_timeouts(mut self, on: bool) -> Self {
        self.timeouts = on;
        self
    }

    pub fn stats(&self) -> Arc<MockStats> {
        self.stats.clone()
    }

    fn rng(&self, digest: &str, call_index: u64) -> ChaCha8Rng {
        let mut h = Sha256::new();
        h.update(self.seed.to_le_bytes());
        h.update(digest.as_bytes());
        h.update(call_index.to_le_bytes());
        let bytes: [u8; 32] = h.finalize().into();
        ChaCha8Rng::from_seed(bytes)
    }

    /// The response text and usage for a request; no side effects.
    pub fn respond(&self, request: &CompletionRequest<'_>) -> BackendResponse {
        self.respond_with_tier(request).1
    }

    /// As [`respond`](Self::respond), also reporting which tier was drawn.
    pub fn respond_with_tier(&self, request: &CompletionRequest<'_>) -> (MockTier, BackendResponse) {
        let mut rng = self.rng(request.digest, request.call_index);
        let kind = classify(request.prompt);
        let conditioned = request.prompt.contains("Here are previous programs");
        let (p_fail, p_weak) = if conditioned { (0.15, 0.35) } else { (0.25, 0.5) };
        let u: f64 = rng.random();
        let tier = if kind == Kind::Unknown || u < p_fail {
            MockTier::Failing
        } else if u < p_fail + p_weak {
            MockTier::Weak
        } else {
            MockTier::Strong
        };
        let code = program(kind, tier, &mut rng, self.timeouts);
        let mut text = String::new();
        if rng.random_bool(0.3) {
            text.push_str("A first idea, which I will refine:\n\n```python\n# sketch\npass\n```\n\n");
        }
        text.push_str("Here is the implementation.\n\n```python\n");
        text.push_str(&code);
        text.push_str("```\n\nThe function returns the required values.\n");

        let params = request.params;
        let tokens_in = (request.prompt.len() as u64).div_ceil(4);
        let tokens_out = ((text.len() as u64).div_ceil(4) + rng.random_range(0..200)).min(params.max_output_tokens);
        let thinking_tokens = match params.thinking_budget_tokens {
            0 => 0,
            b => rng.random_range(b / 2..=b),
        };
        let response = BackendResponse {
            text,
            usage: TokenUsage {
                tokens_in,
                tokens_out,
                thinking_tokens,
            },
        };
        (tier, response)
    }
}

impl Backend for MockBackend {
    fn complete(&self, request: &CompletionRequest<'_>) -> Result<BackendResponse, BackendError> {
        self.stats.calls.fetch_add(1, Ordering::SeqCst);
        let now = self.stats.in_flight.fetch_add(1, Ordering::SeqCst) + 1;
        self.stats.peak.fetch_max(now, Ordering::SeqCst);
        if !self.latency.is_zero() {
            std::thread::sleep(self.latency);
        }
        let r = self.respond(request);
        self.stats.in_flight.fetch_sub(1, Ordering::SeqCst);
        Ok(r)
    }
}

fn entry_point(kind: Kind) -> &'static str {
    match kind {
        Kind::Circles => "pack_circles",
        Kind::Ratio | Kind::Heilbronn => "find_points",
        Kind::Kissing => "kissing_vectors",
        Kind::Hermite { .. } => "hermite_coefficients",
        Kind::Unknown => "solve",
    }
}

fn program(kind: Kind, tier: MockTier, rng: &mut ChaCha8Rng, timeouts: bool) -> String {
    let f = entry_point(kind);
    let seed: u32 = rng.random();
    match tier {
        MockTier::Failing => {
            let variants = if timeouts { 5 } else { 4 };
            match rng.random_range(0..variants) {
                0 => format!("def {f}(:\n    return None\n"),
                1 => format!("def {f}():\n    raise RuntimeError('numerical optimisation diverged')\n"),
                2 => format!("def {f}():\n    return None\n"),
                3 => invalid(kind),
                _ => format!("def {f}():\n    while True:\n        pass\n"),
            }
        }
        MockTier::Weak => weak(kind, rng, seed),
        MockTier::Strong => strong(kind, rng, seed),
    }
}

fn invalid(kind: Kind) -> String {
    match kind {
        Kind::Circles => "def pack_circles():\n    import numpy as np\n    centers = np.full((26, 2), 0.5)\n    radii = np.full(26, 0.2)\n    return centers, radii, float(radii.sum())\n".into(),
        Kind::Ratio => "def find_points():\n    import numpy as np\n    return np.zeros((16, 2))\n".into(),
        Kind::Heilbronn => "def find_points():\n    import numpy as np\n    return np.ones((11, 2))\n".into(),
        Kind::Kissing => "def kissing_vectors():\n    v = [1] + [0] * 10\n    return [v, list(v)]\n".into(),
        Kind::Hermite { probabilist } => {
            let a1 = if probabilist { -16.0 / 12.0 } else { -1.0 / 12.0 };
            format!("def hermite_coefficients():\n    return [1.0, {a1:?}]\n")
        }
        Kind::Unknown => "def solve():\n    return None\n".into(),
    }
}

fn weak(kind: Kind, rng: &mut ChaCha8Rng, seed: u32) -> String {
    match kind {
        Kind::Circles => {
            let s: f64 = rng.random_range(0.80..0.95);
            format!(
                "def pack_circles():
    import numpy as np
    s = {s:.6}
    centers = [[(2 * i + 1) / 12, (2 * j + 1) / 10] for i in range(6) for j in range(5)]
    centers = np.array(centers[:26])
    radii = np.full(26, s / 12)
    return centers, radii, float(radii.sum())
"
            )
        }
        Kind::Ratio => {
            let a: f64 = rng.random_range(0.0..0.05);
            format!(
                "def find_points():
    import numpy as np
    rng = np.random.default_rng({seed})
    grid = np.array([[i, j] for i in range(4) for j in range(4)], dtype=float)
    return grid + rng.uniform(-{a:.6}, {a:.6}, size=grid.shape)
"
            )
        }
        Kind::Heilbronn => format!(
            "def find_points():
    import numpy as np
    rng = np.random.default_rng({seed})
    u = rng.uniform(size=(11, 2))
    flip = u.sum(axis=1) > 1
    u[flip] = 1 - u[flip]
    return np.column_stack([u[:, 0], 2 * u[:, 1]])
"
        ),
        Kind::Kissing => "def kissing_vectors():
    out = []
    for i in range(11):
        for s in (1, -1):
            v = [0] * 11
            v[i] = s
            out.append(v)
    return out
"
        .into(),
        Kind::Hermite { probabilist } => {
            let scale: f64 = rng.random_range(0.5..2.0);
            let a1 = if probabilist { 16.0 / 12.0 } else { 1.0 / 12.0 };
            format!("def hermite_coefficients():\n    return [{:?}, {:?}]\n", -scale, a1 * scale)
        }
        Kind::Unknown => invalid(kind),
    }
}

fn strong(kind: Kind, rng: &mut ChaCha8Rng, seed: u32) -> String {
    match kind {
        Kind::Circles => {
            let s: f64 = rng.random_range(0.97..0.999);
            format!(
                "def pack_circles():
    import numpy as np
    s = {s:.6}
    centers = [[0.1 + 0.2 * i, 0.1 + 0.2 * j] for i in range(5) for j in range(5)]
    radii = [0.1 * s] * 25
    centers.append([0.2, 0.2])
    radii.append(0.1 * (np.sqrt(2) - 1) * s)
    radii = np.array(radii)
    return np.array(centers), radii, float(radii.sum())
"
            )
        }
        Kind::Ratio => {
            let a: f64 = rng.random_range(0.0..0.01);
            format!(
                "def find_points():
    import numpy as np
    rng = np.random.default_rng({seed})
    lattice = np.array([[i + 0.5 * j, j * np.sqrt(3) / 2] for i in range(-4, 5) for j in range(-4, 5)])
    centre = np.array([0.25, np.sqrt(3) / 6])
    order = np.argsort(np.linalg.norm(lattice - centre, axis=1), kind='stable')
    pts = lattice[order[:16]]
    return pts + rng.uniform(-{a:.6}, {a:.6}, size=pts.shape)
"
            )
        }
        Kind::Heilbronn => {
            let tries = rng.random_range(200..1000);
            format!(
                "def find_points():
    import itertools
    import numpy as np
    rng = np.random.default_rng({seed})
    triples = np.array(list(itertools.combinations(range(11), 3)))
    best, best_area = None, -1.0
    for _ in range({tries}):
        u = rng.uniform(size=(11, 2))
        flip = u.sum(axis=1) > 1
        u[flip] = 1 - u[flip]
        p = np.column_stack([u[:, 0], 2 * u[:, 1]])
        a, b, c = p[triples[:, 0]], p[triples[:, 1]], p[triples[:, 2]]
        area = 0.5 * np.abs((b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1]) - (c[:, 0] - a[:, 0]) * (b[:, 1] - a[:, 1])).min()
        if area > best_area:
            best, best_area = p, area
    return best
"
            )
        }
        Kind::Kissing => {
            let keep = rng.random_range(150..=220);
            format!(
                "def kissing_vectors():
    import itertools
    import random
    roots = []
    for i, j in itertools.combinations(range(11), 2):
        for a, b in ((1, 1), (1, -1), (-1, 1), (-1, -1)):
            v = [0] * 11
            v[i], v[j] = a, b
            roots.append(v)
    random.Random({seed}).shuffle(roots)
    return roots[:{keep}]
"
            )
        }
        Kind::Hermite { probabilist } => {
            // shrinking the leading term keeps the double roots from splitting
            let shrink: f64 = rng.random_range(2e-3..5e-3);
            let coef: Vec<f64> = HERMITE_K3
                .iter()
                .enumerate()
                .map(|(n, a)| if probabilist { a * 16f64.powi(n as i32) } else { *a })
                .collect();
            let rec = if probabilist { "0.5" } else { "2.0" };
            format!(
                "def hermite_coefficients():
    import random
    rng = random.Random({seed})
    alpha = {coef:?}
    alpha = [alpha[0]] + [a * (1 + 1e-6 * rng.gauss(0, 1)) for a in alpha[1:3]] + [alpha[3] * (1 - {shrink:.6})]
    # values of B_0, B_4, B_8, B_12 at zero from the three-term recurrence
    vals = [1.0, 0.0]
    for n in range(1, 12):
        vals.append(-{rec} * n * vals[n - 1])
    at_zero = [vals[4 * n] for n in range(4)]
    alpha[0] = -sum(a * v for a, v in zip(alpha[1:], at_zero[1:])) / at_zero[0]
    return alpha
"
            )
        }
        Kind::Unknown => invalid(kind),
    }
}
