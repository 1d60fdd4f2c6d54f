//! Every tier of canned mock programs, run through the real sandbox.

use std::sync::Arc;

use evobase::llm::{extract_code, prompt_digest, CompletionRequest, MockBackend, MockTier, SamplingParams};
use evobase::model::{better, EvaluationStatus};
use evobase::problems::builtin_problems;
use evobase::sandbox::{Sandbox, SandboxConfig};
use evobase::search::base_prompt;
use evobase::verifiers::VerifierRegistry;

#[test]
fn tiers_evaluate_as_labelled() {
    let sandbox = Sandbox::new(
        SandboxConfig {
            time_limit: Some(3.0),
            worker_count: 2,
            ..Default::default()
        },
        Arc::new(VerifierRegistry::builtin()),
    )
    .unwrap();
    let mock = MockBackend::new(11).with_timeouts(true);
    let params = SamplingParams::default();

    for problem in builtin_problems() {
        let prompt = base_prompt(&problem, 3.0).unwrap();
        let digest = prompt_digest(&prompt);
        let mut picked: Vec<(MockTier, String)> = Vec::new();
        let want = |tier: MockTier| match tier {
            MockTier::Failing => 5,
            _ => 3,
        };
        for i in 0..200 {
            let (tier, response) = mock.respond_with_tier(&CompletionRequest {
                model: "mock",
                prompt: &prompt,
                digest: &digest,
                params: &params,
                call_index: i,
            });
            if picked.iter().filter(|(t, _)| *t == tier).count() < want(tier) {
                picked.push((tier, extract_code(&response.text)));
            }
            if picked.len() == 11 {
                break;
            }
        }
        assert_eq!(picked.len(), 11, "{}: not every tier was drawn", problem.name);

        let sources: Vec<&str> = picked.iter().map(|(_, s)| s.as_str()).collect();
        let outcomes = sandbox.evaluate_batch(&sources, &problem).unwrap();
        let mut weak = Vec::new();
        let mut strong = Vec::new();
        for ((tier, source), outcome) in picked.iter().zip(&outcomes) {
            match tier {
                MockTier::Failing => assert_ne!(
                    outcome.status,
                    EvaluationStatus::Success,
                    "{}: failing program succeeded:\n{source}",
                    problem.name
                ),
                _ => {
                    assert_eq!(
                        outcome.status,
                        EvaluationStatus::Success,
                        "{}: {source}\n{}",
                        problem.name,
                        outcome.stderr_excerpt
                    );
                    let s = outcome.score.unwrap();
                    if *tier == MockTier::Weak {
                        weak.push(s);
                    } else {
                        strong.push(s);
                    }
                }
            }
        }
        for s in &strong {
            for w in &weak {
                assert!(
                    better(*s, *w, problem.direction).unwrap(),
                    "{}: strong {s} not better than weak {w}",
                    problem.name
                );
            }
        }
    }
}
