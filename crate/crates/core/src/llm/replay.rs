use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{Backend, BackendError, BackendResponse, CompletionRequest, LlmError, SamplingParams};
use crate::model::TokenUsage;

/// One line of a transcript file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub digest: String,
    pub call_index: u64,
    pub model: String,
    pub params: SamplingParams,
    pub response: String,
    pub usage: TokenUsage,
}

/// Forwards to another backend and appends every exchange to a transcript.
pub struct RecordingBackend<B> {
    inner: B,
    out: Mutex<File>,
}

impl<B: Backend> RecordingBackend<B> {
    pub fn create(inner: B, path: &Path) -> Result<Self, LlmError> {
        let out = File::create(path).map_err(|e| LlmError::Config(format!("transcript {}: {e}", path.display())))?;
        Ok(Self {
            inner,
            out: Mutex::new(out),
        })
    }
}

impl<B: Backend> Backend for RecordingBackend<B> {
    fn complete(&self, request: &CompletionRequest<'_>) -> Result<BackendResponse, BackendError> {
        let r = self.inner.complete(request)?;
        let entry = TranscriptEntry {
            digest: request.digest.to_string(),
            call_index: request.call_index,
            model: request.model.to_string(),
            params: request.params.clone(),
            response: r.text.clone(),
            usage: r.usage,
        };
        let mut line = serde_json::to_string(&entry).expect("entry serializes");
        line.push('\n');
        let mut f = self.out.lock().expect("transcript");
        f.write_all(line.as_bytes())
            .and_then(|_| f.flush())
            .map_err(|e| BackendError::Permanent(format!("cannot write transcript: {e}")))?;
        Ok(r)
    }
}

/// Serves recorded responses keyed by prompt digest and call index.
pub struct ReplayBackend {
    entries: HashMap<(String, u64), TranscriptEntry>,
}

impl ReplayBackend {
    pub fn load(path: &Path) -> Result<Self, LlmError> {
        let err = |m: String| LlmError::Config(format!("transcript {}: {m}", path.display()));
        let f = File::open(path).map_err(|e| err(e.to_string()))?;
        let mut entries = HashMap::new();
        for (i, line) in BufReader::new(f).lines().enumerate() {
            let line = line.map_err(|e| err(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let e: TranscriptEntry =
                serde_json::from_str(&line).map_err(|e| err(format!("line {}: {e}", i + 1)))?;
            let key = (e.digest.clone(), e.call_index);
            if entries.insert(key, e).is_some() {
                return Err(err(format!("line {}: duplicate entry", i + 1)));
            }
        }
        Ok(Self { entries })
    }

    pub fn entries(&self) -> impl Iterator<Item = &TranscriptEntry> {
        self.entries.values()
    }
}

impl Backend for ReplayBackend {
    fn complete(&self, request: &CompletionRequest<'_>) -> Result<BackendResponse, BackendError> {
        let e = self
            .entries
            .get(&(request.digest.to_string(), request.call_index))
            .ok_or_else(|| BackendError::TranscriptMiss {
                digest: request.digest.to_string(),
                call_index: request.call_index,
            })?;
        Ok(BackendResponse {
            text: e.response.clone(),
            usage: e.usage,
        })
    }
}
