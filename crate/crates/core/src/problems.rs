//! The built-in problem catalogue and loading of problem files.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::assets::BUILTIN_PREFIX;
use crate::model::{Direction, ProblemError, ProblemSpec, DEFAULT_TIME_LIMIT};
use crate::verifiers::VerifierRegistry;

#[derive(Debug, Error)]
pub enum ProblemLoadError {
    #[error("unknown problem `{0}`")]
    Unknown(String),
    #[error("cannot read problem file {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("malformed problem file {path}: {source}")]
    Parse {
        path: PathBuf,
        source: toml::de::Error,
    },
    #[error(transparent)]
    Invalid(#[from] ProblemError),
}

fn builtin_path(name: &str) -> PathBuf {
    PathBuf::from(format!("{BUILTIN_PREFIX}{name}"))
}

fn spec(
    name: &str,
    direction: Direction,
    verifier: &str,
    schema: &str,
    prompt: &str,
    prelude: &str,
    bounds: &[(&str, f64)],
) -> ProblemSpec {
    ProblemSpec {
        name: name.into(),
        direction,
        verifier_id: verifier.into(),
        solution_schema_id: schema.into(),
        time_limit: DEFAULT_TIME_LIMIT,
        prompt_template_path: builtin_path(&format!("prompts/{prompt}.md")),
        prelude_path: Some(builtin_path(&format!("preludes/{prelude}.py"))),
        reference_bounds: bounds.iter().map(|&(k, v)| (k.to_string(), v)).collect::<BTreeMap<_, _>>(),
    }
}

/// Problems shipped with the harness. Reference bounds are for reporting
/// only and are stated in the units the verifiers score in; the max-min
/// ratio is unsquared.
pub fn builtin_problems() -> Vec<ProblemSpec> {
    use Direction::*;
    let circle_bounds = [
        ("alphaevolve", 2.63586),
        ("shinkaevolve", 2.63598),
        ("iid_rs", 2.632),
        ("scs", 2.63590),
    ];
    vec![
        spec(
            "circle_packing_26",
            Maximize,
            "circle_packing_26",
            "circle_packing",
            "circle_packing_minimal",
            "circle_packing_minimal",
            &circle_bounds,
        ),
        spec(
            "circle_packing_26_helpers",
            Maximize,
            "circle_packing_26",
            "circle_packing",
            "circle_packing_helpers",
            "circle_packing_helpers",
            &circle_bounds,
        ),
        spec(
            "max_min_ratio_16",
            Minimize,
            "max_min_ratio_16",
            "points",
            "max_min_ratio_16",
            "numpy",
            &[
                ("alphaevolve", 12.88926f64.sqrt()),
                ("shinkaevolve", 12.88923f64.sqrt()),
                ("iid_rs", 12.88923f64.sqrt()),
                ("scs", 12.88923f64.sqrt()),
            ],
        ),
        spec(
            "heilbronn_triangle_11",
            Maximize,
            "heilbronn_triangle_11",
            "points",
            "heilbronn_triangle_11",
            "numpy",
            &[("alphaevolve", 0.0365), ("shinkaevolve", 0.0356), ("iid_rs", 0.0334), ("scs", 0.0365)],
        ),
        spec(
            "kissing_11",
            Maximize,
            "kissing_11",
            "kissing",
            "kissing_11",
            "numpy",
            &[("alphaevolve", 593.0), ("shinkaevolve", 402.0), ("iid_rs", 438.0), ("scs", 438.0)],
        ),
        spec(
            "uncertainty_k3",
            Minimize,
            "uncertainty_k3",
            "uncertainty_physicist",
            "uncertainty_k3",
            "numpy",
            &[("alphaevolve", 0.3521), ("shinkaevolve", 0.3521), ("iid_rs", 0.3521), ("scs", 0.3521)],
        ),
        spec(
            "uncertainty_k7",
            Minimize,
            "uncertainty_k7",
            "uncertainty_probabilist",
            "uncertainty_k7",
            "numpy",
            &[("shinkaevolve", 0.3482), ("iid_rs", 0.3482), ("scs", 0.3482)],
        ),
    ]
}

/// A built-in problem by name, or a TOML problem file when `name_or_path`
/// names an existing file.
pub fn resolve_problem(name_or_path: &str, registry: &VerifierRegistry) -> Result<ProblemSpec, ProblemLoadError> {
    let path = Path::new(name_or_path);
    let problem = if path.is_file() {
        load_problem_file(path)?
    } else {
        builtin_problems()
            .into_iter()
            .find(|p| p.name == name_or_path)
            .ok_or_else(|| ProblemLoadError::Unknown(name_or_path.to_string()))?
    };
    registry.validate_problem(&problem)?;
    Ok(problem)
}

pub fn load_problem_file(path: &Path) -> Result<ProblemSpec, ProblemLoadError> {
    let text = std::fs::read_to_string(path).map_err(|source| ProblemLoadError::Io {
        path: path.to_owned(),
        source,
    })?;
    let spec: ProblemSpec = toml::from_str(&text).map_err(|source| ProblemLoadError::Parse {
        path: path.to_owned(),
        source,
    })?;
    spec.validate()?;
    Ok(spec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assets::load_text;

    #[test]
    fn builtins_are_registered_and_loadable() {
        let reg = VerifierRegistry::builtin();
        for p in builtin_problems() {
            reg.validate_problem(&p).unwrap();
            load_text(&p.prompt_template_path).unwrap();
            load_text(p.prelude_path.as_ref().unwrap()).unwrap();
        }
    }

    #[test]
    fn problem_file_round_trip() {
        let reg = VerifierRegistry::builtin();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.toml");
        std::fs::write(
            &path,
            r#"
name = "small_packing"
direction = "maximize"
verifier_id = "circle_packing"
solution_schema_id = "circle_packing"
prompt_template_path = "builtin:prompts/circle_packing_minimal.md"
time_limit = 10
"#,
        )
        .unwrap();
        let p = resolve_problem(path.to_str().unwrap(), &reg).unwrap();
        assert_eq!(p.time_limit, 10.0);
        assert!(p.prelude_path.is_none());

        std::fs::write(&path, "name = \"x\"\ndirection = \"maximize\"\nverifier_id = \"nope\"\nsolution_schema_id = \"points\"\nprompt_template_path = \"a\"\n").unwrap();
        assert!(matches!(
            resolve_problem(path.to_str().unwrap(), &reg),
            Err(ProblemLoadError::Invalid(ProblemError::UnknownVerifier { .. }))
        ));
        std::fs::write(&path, "name = \"x\"\ndirection = \"maximize\"\nverifier_id = \"kissing_11\"\nsolution_schema_id = \"kissing\"\nprompt_template_path = \"a\"\ntime_limit = 0\n").unwrap();
        assert!(matches!(
            resolve_problem(path.to_str().unwrap(), &reg),
            Err(ProblemLoadError::Invalid(ProblemError::TimeLimit(_)))
        ));
        assert!(matches!(resolve_problem("no_such_problem", &reg), Err(ProblemLoadError::Unknown(_))));
    }
}
