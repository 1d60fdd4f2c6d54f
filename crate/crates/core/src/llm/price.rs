use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::LlmError;
use crate::model::TokenUsage;

/// Dollars per token.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelPrice {
    pub input: f64,
    pub output: f64,
    pub thinking: f64,
}

impl ModelPrice {
    /// From the usual dollars-per-million-tokens quotes.
    pub fn per_million(input: f64, output: f64, thinking: f64) -> Self {
        Self {
            input: input * 1e-6,
            output: output * 1e-6,
            thinking: thinking * 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PriceTable {
    pub models: BTreeMap<String, ModelPrice>,
}

impl PriceTable {
    pub fn single(model: impl Into<String>, price: ModelPrice) -> Self {
        Self {
            models: BTreeMap::from([(model.into(), price)]),
        }
    }

    /// Prices for the offline `mock` model, shaped like a large hosted model.
    pub fn mock() -> Self {
        Self::single("mock", ModelPrice::per_million(1.25, 10.0, 10.0))
    }

    /// TOML: one `[models.<name>]` table with `input`, `output` and
    /// `thinking` prices in dollars per token.
    pub fn load(path: &Path) -> Result<Self, LlmError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| LlmError::Config(format!("price table {}: {e}", path.display())))?;
        let table: PriceTable =
            toml::from_str(&text).map_err(|e| LlmError::Config(format!("price table {}: {e}", path.display())))?;
        table.validate()?;
        Ok(table)
    }

    pub fn validate(&self) -> Result<(), LlmError> {
        for (m, p) in &self.models {
            for v in [p.input, p.output, p.thinking] {
                if !(v >= 0.0 && v.is_finite()) {
                    return Err(LlmError::Config(format!("model `{m}` has invalid price {v}")));
                }
            }
        }
        Ok(())
    }

    pub fn get(&self, model: &str) -> Option<&ModelPrice> {
        self.models.get(model)
    }

    pub fn cost(&self, model: &str, usage: &TokenUsage) -> Option<f64> {
        let p = self.get(model)?;
        Some(
            usage.tokens_in as f64 * p.input
                + usage.tokens_out as f64 * p.output
                + usage.thinking_tokens as f64 * p.thinking,
        )
    }

    /// Hex SHA-256 of the canonical JSON form, recorded in archive headers.
    pub fn digest(&self) -> String {
        let json = serde_json::to_string(self).expect("price table serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }
}
