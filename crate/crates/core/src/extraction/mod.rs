//! The two LLM steps of structured decomposition, entity identification and
//! assertion extraction, plus the single-call prompts used by the
//! baselines and the direct-classification ablation.
//!
//! Each step is one request. A reply that fails validation gets exactly one
//! repair request; a second failure is reported as
//! [`ExtractionError::Malformed`].

mod backend;
mod http;
mod prompts;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::ontology::Iri;
use crate::tasklib::{Arity, TaskDefinition};

pub use backend::{Backend, RecordingBackend, ReplayEntry, ScriptedBackend};
pub use http::{HttpBackend, HttpConfig, API_KEY_ENV};
pub use prompts::{
    answer_schema, assertion_schema, build_assertion_prompt, build_baseline_prompt, build_direct_prompt,
    build_entity_prompt, entity_schema, repair_request, AssertionPrompt, PromptStyle,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model: String,
    pub system: String,
    pub user: String,
    pub response_schema: Value,
    pub temperature: f64,
}

impl ChatRequest {
    /// Hex SHA-256 of the request's JSON form.
    pub fn digest(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("requests serialize");
        Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Identifies one backend call. `attempt` is 0 for the first request of a
/// step and 1 for its repair.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CallTag {
    pub instance_id: String,
    pub step: String,
    pub attempt: u32,
}

#[derive(Debug, Error)]
pub enum BackendError {
    #[error("HTTP {status}: {body}")]
    Http { status: u16, body: String },
    #[error("transport: {0}")]
    Transport(String),
    #[error("unexpected response: {0}")]
    Protocol(String),
    #[error("environment variable {0} is not set")]
    MissingApiKey(&'static str),
    #[error("no scripted response for instance `{instance_id}` step `{step}`")]
    NoScript { instance_id: String, step: String },
    #[error("replay file: {0}")]
    Replay(String),
}

#[derive(Debug, Error)]
pub enum ExtractionError {
    #[error("input text is blank")]
    BlankInput,
    #[error("{step}: backend failed: {source}")]
    Backend {
        step: String,
        #[source]
        source: BackendError,
    },
    #[error("{step}: malformed response after repair: {message}")]
    Malformed { step: String, message: String },
}

/// One request/response pair, kept in traces.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Exchange {
    pub step: String,
    pub attempt: u32,
    pub request_digest: String,
    pub response: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntityRecord {
    pub entity: String,
    pub found: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub span: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub individual: Option<Iri>,
    pub explanation: String,
}

/// One record per entity spec, in spec order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntityExtraction {
    pub records: Vec<EntityRecord>,
}

impl EntityExtraction {
    pub fn record(&self, entity: &str) -> Option<&EntityRecord> {
        self.records.iter().find(|r| r.entity == entity)
    }

    pub fn found(&self, entity: &str) -> bool {
        self.record(entity).is_some_and(|r| r.found)
    }

    pub fn individual(&self, entity: &str) -> Option<&Iri> {
        self.record(entity).and_then(|r| r.individual.as_ref())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssertionRecord {
    pub assertion: String,
    pub holds: bool,
    pub subject: Iri,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub object: Option<Iri>,
    pub justification: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssertionExtraction {
    pub records: Vec<AssertionRecord>,
    /// Specs not asked because an entity they mention was not found.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub skipped: Vec<String>,
}

impl AssertionExtraction {
    pub fn record(&self, assertion: &str) -> Option<&AssertionRecord> {
        self.records.iter().find(|r| r.assertion == assertion)
    }
}

/// A parsed final answer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Answer {
    pub positive: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reasoning: Option<String>,
}

/// Extracts the JSON object from a reply, tolerating Markdown code fences
/// and text around the object.
pub fn reply_json(raw: &str) -> Result<Map<String, Value>, String> {
    let start = raw.find('{').ok_or("reply contains no JSON object")?;
    let end = raw.rfind('}').ok_or("reply contains no JSON object")?;
    if end < start {
        return Err("reply contains no JSON object".into());
    }
    match serde_json::from_str::<Value>(&raw[start..=end]) {
        Ok(Value::Object(map)) => Ok(map),
        Ok(_) => Err("reply is not a JSON object".into()),
        Err(e) => Err(format!("invalid JSON: {e}")),
    }
}

fn field<'a>(obj: &'a Map<String, Value>, key: &str, at: &str) -> Result<&'a Value, String> {
    obj.get(key).ok_or_else(|| format!("{at}: missing `{key}`"))
}

fn string_field(obj: &Map<String, Value>, key: &str, at: &str) -> Result<String, String> {
    field(obj, key, at)?
        .as_str()
        .map(str::to_string)
        .ok_or_else(|| format!("{at}.{key}: expected a string"))
}

fn bool_field(obj: &Map<String, Value>, key: &str, at: &str) -> Result<bool, String> {
    field(obj, key, at)?
        .as_bool()
        .ok_or_else(|| format!("{at}.{key}: expected true or false"))
}

fn records<'a>(reply: &'a Map<String, Value>, key: &str) -> Result<Vec<&'a Map<String, Value>>, String> {
    field(reply, key, "reply")?
        .as_array()
        .ok_or_else(|| format!("reply.{key}: expected an array"))?
        .iter()
        .enumerate()
        .map(|(n, v)| v.as_object().ok_or_else(|| format!("{key}[{n}]: expected an object")))
        .collect()
}

/// Validates an entity-step reply and mints an individual for every found
/// entity.
pub fn parse_entity_response(raw: &str, task: &TaskDefinition, instance_id: &str) -> Result<EntityExtraction, String> {
    let reply = reply_json(raw)?;
    let mut by_name: Vec<Option<EntityRecord>> = vec![None; task.entity_specs.len()];
    for (n, obj) in records(&reply, "entities")?.into_iter().enumerate() {
        let at = format!("entities[{n}]");
        let entity = string_field(obj, "entity", &at)?;
        let slot = task
            .entity_specs
            .iter()
            .position(|e| e.name == entity)
            .ok_or_else(|| format!("{at}: unknown entity type `{entity}`"))?;
        if by_name[slot].is_some() {
            return Err(format!(
                "{at}: duplicate record for `{entity}`; individuals must be unique"
            ));
        }
        let found = bool_field(obj, "found", &at)?;
        let span = match obj.get("span") {
            None | Some(Value::Null) => None,
            Some(Value::String(s)) if s.trim().is_empty() => None,
            Some(Value::String(s)) => Some(s.trim().to_string()),
            Some(_) => return Err(format!("{at}.span: expected a string or null")),
        };
        let explanation = string_field(obj, "explanation", &at)?.trim().to_string();
        let individual = if found {
            if span.is_none() {
                return Err(format!("{at}: found entity needs a span"));
            }
            if explanation.is_empty() {
                return Err(format!("{at}: found entity needs an explanation"));
            }
            Some(
                task.entity_individual(instance_id, &entity)
                    .map_err(|e| e.to_string())?,
            )
        } else {
            None
        };
        by_name[slot] = Some(EntityRecord {
            entity,
            found,
            span: if found { span } else { None },
            individual,
            explanation,
        });
    }
    let mut out = Vec::new();
    for (spec, record) in task.entity_specs.iter().zip(by_name) {
        out.push(record.ok_or_else(|| format!("no record for entity type `{}`", spec.name))?);
    }
    let mut seen = std::collections::BTreeSet::new();
    for iri in out.iter().filter_map(|r| r.individual.as_ref()) {
        if !seen.insert(iri) {
            return Err(format!("individual {iri} minted twice; individuals must be unique"));
        }
    }
    Ok(EntityExtraction { records: out })
}

/// Validates an assertion-step reply against the specs that were asked.
pub fn parse_assertion_response(
    raw: &str,
    task: &TaskDefinition,
    entities: &EntityExtraction,
    included: &[String],
    skipped: &[String],
) -> Result<AssertionExtraction, String> {
    let reply = reply_json(raw)?;
    let mut slots: Vec<Option<AssertionRecord>> = vec![None; included.len()];
    for (n, obj) in records(&reply, "assertions")?.into_iter().enumerate() {
        let at = format!("assertions[{n}]");
        let name = string_field(obj, "assertion", &at)?;
        let slot = included
            .iter()
            .position(|i| *i == name)
            .ok_or_else(|| format!("{at}: `{name}` was not asked for"))?;
        if slots[slot].is_some() {
            return Err(format!("{at}: duplicate record for `{name}`"));
        }
        let holds = bool_field(obj, "holds", &at)?;
        let justification = string_field(obj, "justification", &at)?.trim().to_string();
        if justification.is_empty() {
            return Err(format!("{at}.justification: must not be empty"));
        }
        let spec = task
            .assertion(&name)
            .ok_or_else(|| format!("{at}: unknown assertion `{name}`"))?;
        let individual = |entity: &str| {
            entities
                .individual(entity)
                .cloned()
                .ok_or_else(|| format!("{at}: entity `{entity}` has no individual"))
        };
        let subject = individual(&spec.subject_entity)?;
        let object = match (spec.arity, &spec.object_entity) {
            (Arity::Binary, Some(o)) => Some(individual(o)?),
            _ => None,
        };
        slots[slot] = Some(AssertionRecord {
            assertion: name,
            holds,
            subject,
            object,
            justification,
        });
    }
    let mut out = Vec::new();
    for (name, record) in included.iter().zip(slots) {
        out.push(record.ok_or_else(|| format!("no record for assertion `{name}`"))?);
    }
    Ok(AssertionExtraction {
        records: out,
        skipped: skipped.to_vec(),
    })
}

/// Validates a final-answer reply.
pub fn parse_answer(raw: &str, task: &TaskDefinition, with_reasoning: bool) -> Result<Answer, String> {
    let reply = reply_json(raw)?;
    let label = string_field(&reply, "answer", "reply")?;
    let positive = task.labels.polarity(&label).ok_or_else(|| {
        format!(
            "reply.answer: `{label}` is neither `{}` nor `{}`",
            task.labels.positive, task.labels.negative
        )
    })?;
    let reasoning = if with_reasoning {
        let r = string_field(&reply, "reasoning", "reply")?;
        if r.trim().is_empty() {
            return Err("reply.reasoning: must not be empty".into());
        }
        Some(r)
    } else {
        None
    };
    Ok(Answer { positive, reasoning })
}

/// Sends a request, validates the reply with `parse`, and on failure sends
/// one repair request. Every exchange is appended to `log`.
pub fn call_structured<T>(
    backend: &dyn Backend,
    instance_id: &str,
    step: &str,
    mut request: ChatRequest,
    log: &mut Vec<Exchange>,
    parse: impl Fn(&str) -> Result<T, String>,
) -> Result<T, ExtractionError> {
    if request.model.is_empty() {
        request.model = backend.model().to_string();
    }
    let mut current = request.clone();
    let mut attempt = 0;
    loop {
        let tag = CallTag {
            instance_id: instance_id.to_string(),
            step: step.to_string(),
            attempt,
        };
        let raw = backend
            .complete(&tag, &current)
            .map_err(|source| ExtractionError::Backend {
                step: step.to_string(),
                source,
            })?;
        log.push(Exchange {
            step: step.to_string(),
            attempt,
            request_digest: current.digest(),
            response: raw.clone(),
        });
        match parse(&raw) {
            Ok(value) => return Ok(value),
            Err(message) if attempt == 0 => {
                log::debug!("{instance_id}/{step}: repairing: {message}");
                current = repair_request(&request, &raw, &message);
                attempt = 1;
            }
            Err(message) => {
                return Err(ExtractionError::Malformed {
                    step: step.to_string(),
                    message,
                })
            }
        }
    }
}
