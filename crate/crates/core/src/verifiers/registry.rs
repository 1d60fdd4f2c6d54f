use std::collections::BTreeMap;
use std::sync::Arc;

use serde::de::DeserializeOwned;
use serde_json::Value;

use super::{
    score_circles, score_heilbronn, score_kissing, score_max_min_ratio, score_uncertainty, CirclePacking,
    HermiteCandidate, KissingConfiguration, PointSet2D, VerifierError, KISSING_DIMENSION,
};
use crate::model::{ProblemError, ProblemSpec};

/// Scores a solution payload. Errors mean the candidate is invalid.
pub type ScoreFn = Arc<dyn Fn(&Value) -> Result<f64, VerifierError> + Send + Sync>;

/// How a candidate program hands its result back: the function it must define
/// and the Python snippet appended to its source that serializes the return
/// value as JSON.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SolutionSchema {
    pub id: String,
    pub entry_point: String,
    pub footer: String,
}

impl SolutionSchema {
    pub fn new(id: impl Into<String>, entry_point: impl Into<String>, footer: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            entry_point: entry_point.into(),
            footer: footer.into(),
        }
    }
}

struct Verifier {
    schemas: Vec<String>,
    score: ScoreFn,
}

#[derive(Default)]
pub struct VerifierRegistry {
    verifiers: BTreeMap<String, Verifier>,
    schemas: BTreeMap<String, SolutionSchema>,
}

impl std::fmt::Debug for VerifierRegistry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("VerifierRegistry")
            .field("verifiers", &self.verifiers.keys().collect::<Vec<_>>())
            .field("schemas", &self.schemas.keys().collect::<Vec<_>>())
            .finish()
    }
}

fn parse<T: DeserializeOwned>(payload: &Value) -> Result<T, VerifierError> {
    T::deserialize(payload).map_err(|e| VerifierError::Schema(e.to_string()))
}

fn max_coefficients(c: &HermiteCandidate, max: usize) -> Result<(), VerifierError> {
    if c.coefficients.len() > max {
        return Err(VerifierError::invalid(format!(
            "at most {max} coefficients allowed, found {}",
            c.coefficients.len()
        )));
    }
    Ok(())
}

impl VerifierRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers a solution schema. Re-registering an identical definition is
    /// a no-op.
    pub fn register_schema(&mut self, schema: SolutionSchema) -> Result<(), VerifierError> {
        match self.schemas.get(&schema.id) {
            Some(existing) if *existing == schema => Ok(()),
            Some(_) => Err(VerifierError::DuplicateSchema(schema.id)),
            None => {
                self.schemas.insert(schema.id.clone(), schema);
                Ok(())
            }
        }
    }

    /// Registers a verifier accepting payloads of the given schemas, each of
    /// which must already be registered.
    pub fn register_verifier(
        &mut self,
        id: impl Into<String>,
        schemas: &[&str],
        score: ScoreFn,
    ) -> Result<(), VerifierError> {
        let id = id.into();
        if self.verifiers.contains_key(&id) {
            return Err(VerifierError::DuplicateVerifier(id));
        }
        if let Some(missing) = schemas.iter().find(|s| !self.schemas.contains_key(**s)) {
            return Err(VerifierError::Schema(format!("unregistered schema `{missing}`")));
        }
        let schemas = schemas.iter().map(|s| s.to_string()).collect();
        self.verifiers.insert(id, Verifier { schemas, score });
        Ok(())
    }

    pub fn score(&self, verifier_id: &str, payload: &Value) -> Result<f64, VerifierError> {
        let v = self
            .verifiers
            .get(verifier_id)
            .ok_or_else(|| VerifierError::UnknownVerifier(verifier_id.to_string()))?;
        (v.score)(payload)
    }

    pub fn schema(&self, id: &str) -> Option<&SolutionSchema> {
        self.schemas.get(id)
    }

    pub fn has_verifier(&self, id: &str) -> bool {
        self.verifiers.contains_key(id)
    }

    pub fn verifier_ids(&self) -> impl Iterator<Item = &str> {
        self.verifiers.keys().map(String::as_str)
    }

    /// Registry-dependent checks on a problem: both ids resolve and the
    /// verifier accepts the problem's schema.
    pub fn validate_problem(&self, problem: &ProblemSpec) -> Result<(), ProblemError> {
        problem.validate()?;
        let unknown_verifier = || ProblemError::UnknownVerifier {
            problem: problem.name.clone(),
            id: problem.verifier_id.clone(),
        };
        let unknown_schema = || ProblemError::UnknownSchema {
            problem: problem.name.clone(),
            id: problem.solution_schema_id.clone(),
        };
        let v = self.verifiers.get(&problem.verifier_id).ok_or_else(unknown_verifier)?;
        if !self.schemas.contains_key(&problem.solution_schema_id)
            || !v.schemas.contains(&problem.solution_schema_id)
        {
            return Err(unknown_schema());
        }
        Ok(())
    }

    /// All built-in schemas and verifiers.
    pub fn builtin() -> Self {
        let mut r = Self::new();
        let schemas = [
            ("circle_packing", "pack_circles", include_str!("../../templates/footers/circle_packing.py")),
            ("points", "find_points", include_str!("../../templates/footers/points.py")),
            ("kissing", "kissing_vectors", include_str!("../../templates/footers/kissing.py")),
            (
                "uncertainty_physicist",
                "hermite_coefficients",
                include_str!("../../templates/footers/uncertainty_physicist.py"),
            ),
            (
                "uncertainty_probabilist",
                "hermite_coefficients",
                include_str!("../../templates/footers/uncertainty_probabilist.py"),
            ),
        ];
        for (id, entry, footer) in schemas {
            r.register_schema(SolutionSchema::new(id, entry, footer)).expect("builtin schema");
        }

        let circles = |n: Option<usize>| -> ScoreFn {
            Arc::new(move |p| score_circles(&parse::<CirclePacking>(p)?, n))
        };
        let ratio = |n: Option<usize>| -> ScoreFn {
            Arc::new(move |p| score_max_min_ratio(&parse::<PointSet2D>(p)?, n))
        };
        let heilbronn = |n: Option<usize>| -> ScoreFn {
            Arc::new(move |p| score_heilbronn(&parse::<PointSet2D>(p)?, n))
        };
        let uncertainty = |max: usize| -> ScoreFn {
            Arc::new(move |p| {
                let c = parse::<HermiteCandidate>(p)?;
                max_coefficients(&c, max)?;
                Ok(score_uncertainty(&c)?)
            })
        };
        let kissing: ScoreFn = Arc::new(|p| {
            score_kissing(&parse::<KissingConfiguration>(p)?, KISSING_DIMENSION).map(|n| n as f64)
        });
        let hermite = ["uncertainty_physicist", "uncertainty_probabilist"];
        let verifiers: Vec<(&str, &[&str], ScoreFn)> = vec![
            ("circle_packing", &["circle_packing"], circles(None)),
            ("circle_packing_26", &["circle_packing"], circles(Some(26))),
            ("max_min_ratio", &["points"], ratio(None)),
            ("max_min_ratio_16", &["points"], ratio(Some(16))),
            ("heilbronn_triangle", &["points"], heilbronn(None)),
            ("heilbronn_triangle_11", &["points"], heilbronn(Some(11))),
            ("kissing_11", &["kissing"], kissing),
            ("uncertainty_k3", &hermite, uncertainty(4)),
            ("uncertainty_k7", &hermite, uncertainty(8)),
        ];
        for (id, schemas, f) in verifiers {
            r.register_verifier(id, schemas, f).expect("builtin verifier");
        }
        r
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn dispatch_and_errors() {
        let r = VerifierRegistry::builtin();
        let s = r.score("circle_packing", &json!({"circles": [[0.5, 0.5, 0.5]]})).unwrap();
        assert_eq!(s, 0.5);
        assert!(matches!(
            r.score("circle_packing_26", &json!({"circles": [[0.5, 0.5, 0.5]]})),
            Err(VerifierError::Invalid(_))
        ));
        assert!(matches!(
            r.score("circle_packing", &json!({"circle": []})),
            Err(VerifierError::Schema(_))
        ));
        assert!(matches!(r.score("nope", &json!({})), Err(VerifierError::UnknownVerifier(_))));
        let k = r
            .score("uncertainty_k3", &json!({"coefficients": [-1.0, 1.0 / 12.0], "basis": "physicist"}))
            .unwrap();
        assert!((k - 3.0 / std::f64::consts::TAU).abs() < 1e-9);
        assert!(r
            .score("uncertainty_k3", &json!({"coefficients": [1.0, 0.0, 0.0, 0.0, 1.0], "basis": "physicist"}))
            .is_err());
    }

    #[test]
    fn duplicates_rejected() {
        let mut r = VerifierRegistry::builtin();
        let f: ScoreFn = Arc::new(|_| Ok(0.0));
        assert_eq!(
            r.register_verifier("kissing_11", &["kissing"], f.clone()),
            Err(VerifierError::DuplicateVerifier("kissing_11".into()))
        );
        assert!(r.register_verifier("x", &["missing"], f).is_err());
        let same = r.schema("points").unwrap().clone();
        assert!(r.register_schema(same).is_ok());
        assert_eq!(
            r.register_schema(SolutionSchema::new("points", "other", "")),
            Err(VerifierError::DuplicateSchema("points".into()))
        );
    }

    #[test]
    fn footers_call_their_entry_point() {
        let r = VerifierRegistry::builtin();
        for id in ["circle_packing", "points", "kissing", "uncertainty_physicist", "uncertainty_probabilist"] {
            let s = r.schema(id).unwrap();
            assert!(s.footer.contains(&format!("{}()", s.entry_point)), "{id}");
            assert!(s.footer.contains("EVO_SOLUTION_PATH"));
        }
    }
}
