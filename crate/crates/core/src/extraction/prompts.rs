use std::fmt::Write as _;

use serde_json::{json, Value};

use super::{AssertionExtraction, ChatRequest, EntityExtraction, ExtractionError};
use crate::tasklib::{Arity, AssertionSpec, TaskDefinition};

/// Prompting style of a single-call baseline.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PromptStyle {
    FewShot,
    ChainOfThought,
}

fn request(system: String, user: String, response_schema: Value) -> ChatRequest {
    ChatRequest {
        model: String::new(),
        system,
        user,
        response_schema,
        temperature: 0.0,
    }
}

fn check_input(text: &str) -> Result<(), ExtractionError> {
    if text.trim().is_empty() {
        Err(ExtractionError::BlankInput)
    } else {
        Ok(())
    }
}

fn schema_block(out: &mut String, schema: &Value) {
    out.push_str("\nRespond with one JSON object and nothing else. It must match this JSON Schema:\n");
    out.push_str(&serde_json::to_string_pretty(schema).expect("schema serializes"));
    out.push('\n');
}

fn quoted(text: &str) -> String {
    text.replace('\n', " ")
}

pub fn entity_schema(task: &TaskDefinition) -> Value {
    let names: Vec<&str> = task.entity_specs.iter().map(|e| e.name.as_str()).collect();
    json!({
        "type": "object",
        "required": ["entities"],
        "properties": {
            "entities": {
                "type": "array",
                "minItems": names.len(),
                "maxItems": names.len(),
                "items": {
                    "type": "object",
                    "required": ["entity", "found", "span", "explanation"],
                    "properties": {
                        "entity": { "type": "string", "enum": names },
                        "found": { "type": "boolean" },
                        "span": { "type": ["string", "null"] },
                        "explanation": { "type": "string" }
                    }
                }
            }
        }
    })
}

/// Step one: find one text span per entity type.
pub fn build_entity_prompt(task: &TaskDefinition, input_text: &str) -> Result<ChatRequest, ExtractionError> {
    check_input(input_text)?;
    let schema = entity_schema(task);
    let mut system = String::new();
    writeln!(system, "{}", task.domain_context.trim()).unwrap();
    system.push_str(
        "\nStep 1: entity identification.\n\
         For each entity type below, decide whether the input text contains it. \
         If it does, copy the shortest text span that realises it and explain briefly why it qualifies. \
         If it does not, set found to false and span to null.\n\nEntity types:\n",
    );
    for e in &task.entity_specs {
        writeln!(system, "- {}: {}", e.name, e.description.trim()).unwrap();
    }
    schema_block(&mut system, &schema);
    system.push_str("Give exactly one record per entity type, in the order listed.\n");
    Ok(request(system, format!("Input text:\n{}", input_text.trim()), schema))
}

/// The assertion prompt for one instance, or the names of required
/// entities that were not found.
#[derive(Debug, Clone, PartialEq)]
pub enum AssertionPrompt {
    Ready {
        request: ChatRequest,
        /// Specs the reply must answer, in prompt order.
        included: Vec<String>,
        /// Specs left out because an entity they mention was not found.
        skipped: Vec<String>,
    },
    NotExtractable {
        missing: Vec<String>,
    },
}

pub fn assertion_schema(names: &[&str]) -> Value {
    json!({
        "type": "object",
        "required": ["assertions"],
        "properties": {
            "assertions": {
                "type": "array",
                "minItems": names.len(),
                "maxItems": names.len(),
                "items": {
                    "type": "object",
                    "required": ["assertion", "holds", "justification"],
                    "properties": {
                        "assertion": { "type": "string", "enum": names },
                        "holds": { "type": "boolean" },
                        "justification": { "type": "string", "minLength": 1 }
                    }
                }
            }
        }
    })
}

fn signature(spec: &AssertionSpec) -> String {
    match (&spec.arity, &spec.object_entity) {
        (Arity::Binary, Some(object)) => format!("{}({}, {})", spec.name, spec.subject_entity, object),
        _ => format!("{}({})", spec.name, spec.subject_entity),
    }
}

fn entity_lines(out: &mut String, entities: &EntityExtraction) {
    for r in entities.records.iter().filter(|r| r.found) {
        writeln!(
            out,
            "- {} [{}]: \"{}\"",
            r.entity,
            r.individual.as_ref().map(ToString::to_string).unwrap_or_default(),
            quoted(r.span.as_deref().unwrap_or_default())
        )
        .unwrap();
    }
}

/// Step two: one boolean determination per in-scope assertion spec.
pub fn build_assertion_prompt(
    task: &TaskDefinition,
    input_text: &str,
    entities: &EntityExtraction,
    complementary: bool,
) -> Result<AssertionPrompt, ExtractionError> {
    check_input(input_text)?;
    let missing: Vec<String> = task
        .entity_specs
        .iter()
        .filter(|e| e.required && !entities.found(&e.name))
        .map(|e| e.name.clone())
        .collect();
    if !missing.is_empty() {
        return Ok(AssertionPrompt::NotExtractable { missing });
    }
    let mut included = Vec::new();
    let mut skipped = Vec::new();
    for spec in task.effective_assertion_specs(complementary) {
        let available =
            entities.found(&spec.subject_entity) && spec.object_entity.as_deref().is_none_or(|o| entities.found(o));
        if available {
            included.push(spec);
        } else {
            skipped.push(spec.name.clone());
        }
    }
    let names: Vec<&str> = included.iter().map(|s| s.name.as_str()).collect();
    let schema = assertion_schema(&names);
    let mut system = String::new();
    writeln!(system, "{}", task.domain_context.trim()).unwrap();
    system.push_str(
        "\nStep 2: assertion extraction.\n\
         The entities below were identified in the input text. \
         Evaluate every assertion against the text and decide whether it holds. \
         Justify each decision in one or two sentences that cite the text.\n\nEntities:\n",
    );
    entity_lines(&mut system, entities);
    system.push_str("\nAssertions:\n");
    for spec in &included {
        writeln!(system, "- {}: {}", signature(spec), spec.description.trim()).unwrap();
    }
    schema_block(&mut system, &schema);
    system.push_str("Give exactly one record per assertion, in the order listed.\n");
    Ok(AssertionPrompt::Ready {
        request: request(system, format!("Input text:\n{}", input_text.trim()), schema),
        included: names.into_iter().map(str::to_string).collect(),
        skipped,
    })
}

pub fn answer_schema(task: &TaskDefinition, with_reasoning: bool) -> Value {
    let labels = [task.labels.positive.as_str(), task.labels.negative.as_str()];
    if with_reasoning {
        json!({
            "type": "object",
            "required": ["reasoning", "answer"],
            "properties": {
                "reasoning": { "type": "string", "minLength": 1 },
                "answer": { "type": "string", "enum": labels }
            }
        })
    } else {
        json!({
            "type": "object",
            "required": ["answer"],
            "properties": {
                "answer": { "type": "string", "enum": labels }
            }
        })
    }
}

fn question(task: &TaskDefinition) -> String {
    format!(
        "Question: is the {} in the input text an instance of {}? Answer \"{}\" or \"{}\".\n",
        task.target_entity,
        task.target_class.local(),
        task.labels.positive,
        task.labels.negative
    )
}

/// Step three of the ablation: the model classifies from the extracted
/// predicates instead of the reasoner.
pub fn build_direct_prompt(
    task: &TaskDefinition,
    input_text: &str,
    entities: &EntityExtraction,
    assertions: &AssertionExtraction,
) -> Result<ChatRequest, ExtractionError> {
    check_input(input_text)?;
    let schema = answer_schema(task, false);
    let mut system = String::new();
    writeln!(system, "{}", task.domain_context.trim()).unwrap();
    system.push_str(
        "\nStep 3: final classification.\n\
         Decide the final label using the extracted entities and predicate determinations below.\n\nEntities:\n",
    );
    entity_lines(&mut system, entities);
    system.push_str("\nPredicate determinations:\n");
    for r in &assertions.records {
        let args = match &r.object {
            Some(o) => format!("{}, {}", r.subject, o),
            None => r.subject.to_string(),
        };
        writeln!(
            system,
            "- {}({}) = {}: {}",
            r.assertion,
            args,
            r.holds,
            quoted(&r.justification)
        )
        .unwrap();
    }
    for name in &assertions.skipped {
        writeln!(system, "- {name}: not evaluated (entity not found)").unwrap();
    }
    system.push('\n');
    system.push_str(&question(task));
    schema_block(&mut system, &schema);
    Ok(request(system, format!("Input text:\n{}", input_text.trim()), schema))
}

/// Single-call baseline with labelled exemplars.
pub fn build_baseline_prompt(
    task: &TaskDefinition,
    input_text: &str,
    style: PromptStyle,
    exemplars: &[(String, String)],
) -> Result<ChatRequest, ExtractionError> {
    check_input(input_text)?;
    let schema = answer_schema(task, style == PromptStyle::ChainOfThought);
    let mut system = String::new();
    writeln!(system, "{}", task.domain_context.trim()).unwrap();
    system.push('\n');
    system.push_str(&question(task));
    if style == PromptStyle::ChainOfThought {
        system.push_str("Reason step by step in the reasoning field before giving the final answer.\n");
    }
    schema_block(&mut system, &schema);
    let mut user = String::new();
    for (n, (text, label)) in exemplars.iter().enumerate() {
        writeln!(user, "Example {}:\nInput: {}\nAnswer: {}\n", n + 1, text.trim(), label).unwrap();
    }
    write!(user, "Now classify this input.\nInput: {}", input_text.trim()).unwrap();
    Ok(request(system, user, schema))
}

/// Follow-up sent after a reply that failed validation.
pub fn repair_request(original: &ChatRequest, bad_reply: &str, problem: &str) -> ChatRequest {
    let mut user = original.user.clone();
    write!(
        user,
        "\n\nYour previous reply could not be used: {problem}\nPrevious reply:\n{bad_reply}\n\n\
         Reply again with a single JSON object that matches the schema exactly."
    )
    .unwrap();
    ChatRequest {
        user,
        ..original.clone()
    }
}
