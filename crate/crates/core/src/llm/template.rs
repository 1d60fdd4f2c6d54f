use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TemplateError {
    #[error("template variable `{0}` is not bound")]
    Unbound(String),
}

/// Text with `${name}` placeholders. Everything else, including a `$` not
/// followed by `{`, is copied through unchanged.
#[derive(Debug, Clone, PartialEq)]
pub struct PromptTemplate {
    text: String,
    required: Vec<String>,
}

enum Piece<'a> {
    Text(&'a str),
    Var(&'a str),
}

fn pieces(text: &str) -> Vec<Piece<'_>> {
    let mut out = Vec::new();
    let mut rest = text;
    while let Some(start) = rest.find("${") {
        let Some(len) = rest[start + 2..].find('}') else {
            break;
        };
        let name = &rest[start + 2..start + 2 + len];
        if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
            out.push(Piece::Text(&rest[..start + 2]));
            rest = &rest[start + 2..];
            continue;
        }
        out.push(Piece::Text(&rest[..start]));
        out.push(Piece::Var(name));
        rest = &rest[start + 3 + len..];
    }
    out.push(Piece::Text(rest));
    out
}

impl PromptTemplate {
    pub fn new(text: impl Into<String>) -> Self {
        let text = text.into();
        let mut seen = BTreeSet::new();
        let required = pieces(&text)
            .into_iter()
            .filter_map(|p| match p {
                Piece::Var(v) if seen.insert(v) => Some(v.to_string()),
                _ => None,
            })
            .collect();
        Self { text, required }
    }

    /// Variables in order of first appearance.
    pub fn required(&self) -> &[String] {
        &self.required
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn render<V: AsRef<str>>(&self, bindings: &BTreeMap<&str, V>) -> Result<String, TemplateError> {
        let mut out = String::with_capacity(self.text.len());
        for p in pieces(&self.text) {
            match p {
                Piece::Text(t) => out.push_str(t),
                Piece::Var(v) => out.push_str(
                    bindings
                        .get(v)
                        .ok_or_else(|| TemplateError::Unbound(v.to_string()))?
                        .as_ref(),
                ),
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assets::builtin;

    #[test]
    fn circle_prompt_time_limit() {
        let t = PromptTemplate::new(builtin("prompts/circle_packing_minimal.md").unwrap());
        assert_eq!(t.required(), ["max_execution_time"]);
        let text = t.render(&BTreeMap::from([("max_execution_time", "300")])).unwrap();
        assert!(text.contains("up to 300 seconds"));
        assert!(!text.contains("${"));
        // nothing else changes
        assert_eq!(text.len(), t.text().len() - "${max_execution_time}".len() + 3);
    }

    #[test]
    fn identity_without_placeholders() {
        let raw = "cost is $5, {braces} and $ {spaced}";
        let t = PromptTemplate::new(raw);
        assert!(t.required().is_empty());
        assert_eq!(t.render::<&str>(&BTreeMap::new()).unwrap(), raw);
    }

    #[test]
    fn unbound_variable_is_named() {
        let t = PromptTemplate::new("a ${x} b ${y}");
        let err = t.render(&BTreeMap::from([("x", "1")])).unwrap_err();
        assert_eq!(err, TemplateError::Unbound("y".into()));
        assert!(err.to_string().contains("`y`"));
    }

    #[test]
    fn repeated_and_malformed() {
        let t = PromptTemplate::new("${a}${a} ${not valid} ${");
        assert_eq!(t.required(), ["a"]);
        assert_eq!(t.render(&BTreeMap::from([("a", "z")])).unwrap(), "zz ${not valid} ${");
    }
}
