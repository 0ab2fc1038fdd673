use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{BackendError, CallTag, ChatRequest};

/// Something that answers chat requests. Implementations must be callable
/// from several instance evaluations at once.
pub trait Backend: Send + Sync {
    /// Model name recorded in traces and used for output paths.
    fn model(&self) -> &str;

    fn complete(&self, tag: &CallTag, request: &ChatRequest) -> Result<String, BackendError>;
}

impl<B: Backend + ?Sized> Backend for &B {
    fn model(&self) -> &str {
        (**self).model()
    }

    fn complete(&self, tag: &CallTag, request: &ChatRequest) -> Result<String, BackendError> {
        (**self).complete(tag, request)
    }
}

impl<B: Backend + ?Sized> Backend for Box<B> {
    fn model(&self) -> &str {
        (**self).model()
    }

    fn complete(&self, tag: &CallTag, request: &ChatRequest) -> Result<String, BackendError> {
        (**self).complete(tag, request)
    }
}

/// One canned reply. `response` may be a JSON value (sent back serialized)
/// or a string (sent back verbatim, which is how malformed replies are
/// scripted).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayEntry {
    pub instance_id: String,
    pub step: String,
    #[serde(default, skip_serializing_if = "is_zero")]
    pub attempt: u32,
    pub response: Value,
}

fn is_zero(n: &u32) -> bool {
    *n == 0
}

impl ReplayEntry {
    fn raw(&self) -> String {
        match &self.response {
            Value::String(s) => s.clone(),
            other => other.to_string(),
        }
    }
}

/// Replays responses keyed by `(instance_id, step)`. A request for attempt
/// `n` gets the entry with the highest attempt not above `n`.
#[derive(Debug, Clone, Default)]
pub struct ScriptedBackend {
    model: String,
    script: BTreeMap<(String, String), BTreeMap<u32, String>>,
}

impl ScriptedBackend {
    pub fn new(model: impl Into<String>, entries: impl IntoIterator<Item = ReplayEntry>) -> Self {
        let mut script: BTreeMap<(String, String), BTreeMap<u32, String>> = BTreeMap::new();
        for e in entries {
            script
                .entry((e.instance_id.clone(), e.step.clone()))
                .or_default()
                .insert(e.attempt, e.raw());
        }
        ScriptedBackend {
            model: model.into(),
            script,
        }
    }

    pub fn from_json(model: impl Into<String>, text: &str) -> Result<Self, BackendError> {
        let entries: Vec<ReplayEntry> = serde_json::from_str(text).map_err(|e| BackendError::Replay(e.to_string()))?;
        Ok(Self::new(model, entries))
    }

    pub fn from_file(model: impl Into<String>, path: &Path) -> Result<Self, BackendError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| BackendError::Replay(format!("{}: {e}", path.display())))?;
        Self::from_json(model, &text)
    }

    /// Replaces or adds one reply.
    pub fn set(&mut self, instance_id: &str, step: &str, attempt: u32, response: impl Into<String>) {
        self.script
            .entry((instance_id.to_string(), step.to_string()))
            .or_default()
            .insert(attempt, response.into());
    }

    pub fn len(&self) -> usize {
        self.script.values().map(BTreeMap::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.script.is_empty()
    }
}

impl Backend for ScriptedBackend {
    fn model(&self) -> &str {
        &self.model
    }

    fn complete(&self, tag: &CallTag, _request: &ChatRequest) -> Result<String, BackendError> {
        self.script
            .get(&(tag.instance_id.clone(), tag.step.clone()))
            .and_then(|by_attempt| by_attempt.range(..=tag.attempt).next_back())
            .map(|(_, raw)| raw.clone())
            .ok_or_else(|| BackendError::NoScript {
                instance_id: tag.instance_id.clone(),
                step: tag.step.clone(),
            })
    }
}

/// Passes requests through to another backend and keeps every reply so it
/// can be written out as a replay file.
pub struct RecordingBackend<B> {
    inner: B,
    recorded: Mutex<Vec<ReplayEntry>>,
}

impl<B: Backend> RecordingBackend<B> {
    pub fn new(inner: B) -> Self {
        RecordingBackend {
            inner,
            recorded: Mutex::new(Vec::new()),
        }
    }

    /// Recorded entries sorted by instance, step and attempt.
    pub fn entries(&self) -> Vec<ReplayEntry> {
        let mut entries = self.recorded.lock().expect("recording lock").clone();
        entries.sort_by(|a, b| (&a.instance_id, &a.step, a.attempt).cmp(&(&b.instance_id, &b.step, b.attempt)));
        entries
    }

    pub fn save(&self, path: &Path) -> std::io::Result<()> {
        let mut text = serde_json::to_string_pretty(&self.entries()).expect("replay entries serialize");
        text.push('\n');
        std::fs::write(path, text)
    }
}

impl<B: Backend> Backend for RecordingBackend<B> {
    fn model(&self) -> &str {
        self.inner.model()
    }

    fn complete(&self, tag: &CallTag, request: &ChatRequest) -> Result<String, BackendError> {
        let raw = self.inner.complete(tag, request)?;
        let response = serde_json::from_str::<Value>(&raw)
            .ok()
            .filter(Value::is_object)
            .unwrap_or_else(|| Value::String(raw.clone()));
        self.recorded.lock().expect("recording lock").push(ReplayEntry {
            instance_id: tag.instance_id.clone(),
            step: tag.step.clone(),
            attempt: tag.attempt,
            response,
        });
        Ok(raw)
    }
}
