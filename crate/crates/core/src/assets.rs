//! Prompt templates, preludes and footers compiled into the binary.
//!
//! Paths starting with `builtin:` resolve to these; anything else is read
//! from disk.

use std::io;
use std::path::Path;

pub const BUILTIN_PREFIX: &str = "builtin:";

macro_rules! embedded {
    ($($path:literal),* $(,)?) => {
        &[$(($path, include_str!(concat!("../templates/", $path)))),*]
    };
}

static FILES: &[(&str, &str)] = embedded![
    "prompts/circle_packing_minimal.md",
    "prompts/circle_packing_helpers.md",
    "prompts/max_min_ratio_16.md",
    "prompts/heilbronn_triangle_11.md",
    "prompts/kissing_11.md",
    "prompts/uncertainty_k3.md",
    "prompts/uncertainty_k7.md",
    "prompts/scs_conditioning.md",
    "prompts/scs_program.md",
    "preludes/circle_packing_minimal.py",
    "preludes/circle_packing_helpers.py",
    "preludes/numpy.py",
];

/// Contents of an embedded file, by its path under `templates/`.
pub fn builtin(name: &str) -> Option<&'static str> {
    FILES.iter().find(|(n, _)| *n == name).map(|(_, text)| *text)
}

pub fn builtin_names() -> impl Iterator<Item = &'static str> {
    FILES.iter().map(|(n, _)| *n)
}

/// Reads `builtin:<name>` from the embedded set, or a file from disk.
pub fn load_text(path: &Path) -> io::Result<String> {
    let s = path.to_string_lossy();
    match s.strip_prefix(BUILTIN_PREFIX) {
        Some(name) => builtin(name).map(str::to_owned).ok_or_else(|| {
            io::Error::new(io::ErrorKind::NotFound, format!("no built-in template `{name}`"))
        }),
        None => std::fs::read_to_string(path),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_and_disk_paths() {
        let text = load_text(Path::new("builtin:prompts/circle_packing_minimal.md")).unwrap();
        assert!(text.contains("up to ${max_execution_time} seconds"));
        assert!(load_text(Path::new("builtin:prompts/missing.md")).is_err());

        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.md");
        std::fs::write(&p, "hello").unwrap();
        assert_eq!(load_text(&p).unwrap(), "hello");
    }

    #[test]
    fn helper_prelude_defines_promised_functions() {
        let p = builtin("preludes/circle_packing_helpers.py").unwrap();
        assert!(p.contains("def verify_circles") && p.contains("def compute_max_radii"));
        assert!(p.contains("from scipy.optimize import linprog"));
        let m = builtin("preludes/circle_packing_minimal.py").unwrap();
        assert!(m.contains("def verify_circles") && !m.contains("compute_max_radii"));
    }
}
