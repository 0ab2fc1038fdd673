//! Loaders for the bundled mini-corpus and its replay scripts.

use std::sync::Mutex;

use ruleweave::evaluation::{builtin_dataset, Dataset};
use ruleweave::extraction::{Backend, BackendError, CallTag, ChatRequest, ScriptedBackend};
use ruleweave::tasklib::builtin_task;
use ruleweave::TaskDefinition;

use super::fixture;

pub const TASKS: [&str; 3] = ["hearsay", "method_application", "clinical_eligibility"];

pub fn task(id: &str) -> TaskDefinition {
    builtin_task(id).unwrap()
}

pub fn dataset(id: &str) -> Dataset {
    builtin_dataset(id).unwrap()
}

pub fn replay(id: &str) -> ScriptedBackend {
    ScriptedBackend::from_file("scripted", &fixture(&format!("{id}.replay.json"))).unwrap()
}

/// Wraps a backend and keeps every request it sees.
pub struct Capture<B> {
    pub inner: B,
    pub seen: Mutex<Vec<(CallTag, ChatRequest)>>,
}

impl<B: Backend> Capture<B> {
    pub fn new(inner: B) -> Self {
        Capture {
            inner,
            seen: Mutex::new(Vec::new()),
        }
    }

    pub fn requests(&self, step: &str) -> Vec<ChatRequest> {
        self.seen
            .lock()
            .unwrap()
            .iter()
            .filter(|(t, _)| t.step == step)
            .map(|(_, r)| r.clone())
            .collect()
    }
}

impl<B: Backend> Backend for Capture<B> {
    fn model(&self) -> &str {
        self.inner.model()
    }

    fn complete(&self, tag: &CallTag, request: &ChatRequest) -> Result<String, BackendError> {
        self.seen.lock().unwrap().push((tag.clone(), request.clone()));
        self.inner.complete(tag, request)
    }
}
