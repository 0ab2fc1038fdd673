//! Runs one instance under one of the six experimental conditions and
//! records everything that happened in an [`InstanceTrace`].
//!
//! Every instance gets a fresh ABox. Outcome policy:
//! an inconsistent ABox predicts the negative label (`Inconsistent`), a
//! missing required entity predicts the negative label (`NotExtractable`),
//! and backend or parse failures produce no prediction (`Error`).

mod trace;

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::extraction::{
    build_assertion_prompt, build_baseline_prompt, build_direct_prompt, build_entity_prompt, call_structured,
    parse_answer, parse_assertion_response, parse_entity_response, Answer, AssertionExtraction, AssertionPrompt,
    Backend, EntityExtraction, Exchange, ExtractionError, PromptStyle,
};
use crate::ontology::{ABox, Iri, OntologyError, Origin};
use crate::reasoner::{forward_chain, Firing, Violation};
use crate::tasklib::{Arity, TaskDefinition};

pub use trace::{read_traces, write_traces, TraceError, TraceHeader};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Condition {
    FS,
    CoT,
    SD,
    #[serde(rename = "SD_Comp")]
    SdComp,
    #[serde(rename = "SD_Direct")]
    SdDirect,
    #[serde(rename = "SD_Direct_Comp")]
    SdDirectComp,
}

impl Condition {
    pub const ALL: [Condition; 6] = [
        Condition::FS,
        Condition::CoT,
        Condition::SD,
        Condition::SdComp,
        Condition::SdDirect,
        Condition::SdDirectComp,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Condition::FS => "FS",
            Condition::CoT => "CoT",
            Condition::SD => "SD",
            Condition::SdComp => "SD_Comp",
            Condition::SdDirect => "SD_Direct",
            Condition::SdDirectComp => "SD_Direct_Comp",
        }
    }

    /// Uses the reasoner to decide.
    pub fn symbolic(self) -> bool {
        matches!(self, Condition::SD | Condition::SdComp)
    }

    /// Runs the two extraction steps.
    pub fn extracts(self) -> bool {
        !matches!(self, Condition::FS | Condition::CoT)
    }

    pub fn complementary(self) -> bool {
        matches!(self, Condition::SdComp | Condition::SdDirectComp)
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Condition {
    type Err = String;

    /// Accepts the canonical names plus the `SD-C` / `SD-Direct` spellings.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key: String = s
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .collect::<String>()
            .to_ascii_lowercase();
        match key.as_str() {
            "fs" | "fewshot" => Ok(Condition::FS),
            "cot" => Ok(Condition::CoT),
            "sd" => Ok(Condition::SD),
            "sdc" | "sdcomp" => Ok(Condition::SdComp),
            "sddirect" | "sdd" => Ok(Condition::SdDirect),
            "sddirectc" | "sddirectcomp" | "sddc" => Ok(Condition::SdDirectComp),
            _ => Err(format!(
                "unknown condition `{s}` (expected FS, CoT, SD, SD_Comp, SD_Direct or SD_Direct_Comp)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Outcome {
    Ok,
    Inconsistent,
    NotExtractable,
    Error,
}

/// One input to classify.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Instance {
    pub id: String,
    pub text: String,
    /// Gold label, copied into the trace for later scoring.
    pub gold: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceTrace {
    pub instance_id: String,
    pub condition: Condition,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entity_extraction: Option<EntityExtraction>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub assertion_extraction: Option<AssertionExtraction>,
    /// Asserted and inferred facts with their origins. SD and SD_Comp only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub abox_snapshot: Option<ABox>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fired: Option<Vec<Firing>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub violations: Vec<Violation>,
    /// Required entities that were not found.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub missing_entities: Vec<String>,
    /// Final model answer for the single-call and direct conditions.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub answer: Option<Answer>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prediction: Option<String>,
    pub outcome: Outcome,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub raw_exchanges: Vec<Exchange>,
}

impl InstanceTrace {
    fn new(instance: &Instance, condition: Condition) -> Self {
        InstanceTrace {
            instance_id: instance.id.clone(),
            condition,
            gold: instance.gold.clone(),
            entity_extraction: None,
            assertion_extraction: None,
            abox_snapshot: None,
            fired: None,
            violations: Vec::new(),
            missing_entities: Vec::new(),
            answer: None,
            prediction: None,
            outcome: Outcome::Ok,
            error: None,
            raw_exchanges: Vec::new(),
        }
    }

    fn fail(mut self, err: ExtractionError) -> Self {
        self.outcome = Outcome::Error;
        self.prediction = None;
        self.error = Some(err.to_string());
        self
    }
}

/// Builds the ABox for one instance: entity classes, case links, and every
/// assertion that holds.
pub fn populate(
    task: &TaskDefinition,
    instance_id: &str,
    entities: &EntityExtraction,
    assertions: &AssertionExtraction,
) -> Result<ABox, OntologyError> {
    let mut abox = ABox::new();
    let case = task.case_individual(instance_id)?;
    abox.register_individual(case.clone());
    for record in entities.records.iter().filter(|r| r.found) {
        let spec = task
            .entity(&record.entity)
            .expect("records follow the task's entity specs");
        let individual = record.individual.clone().expect("found entities have individuals");
        abox.assert_class(
            &task.tbox,
            individual.clone(),
            spec.ontology_class.clone(),
            &record.explanation,
        )?;
        abox.assert_property(
            &task.tbox,
            individual,
            task.case_link.clone(),
            case.clone(),
            &format!("extracted from case {instance_id}"),
        )?;
    }
    for record in assertions.records.iter().filter(|r| r.holds) {
        let spec = task
            .assertion(&record.assertion)
            .expect("records follow the task's assertion specs");
        match (spec.arity, &record.object) {
            (Arity::Binary, Some(object)) => abox.assert_property(
                &task.tbox,
                record.subject.clone(),
                spec.maps_to.clone(),
                object.clone(),
                &record.justification,
            )?,
            _ => abox.assert_class(
                &task.tbox,
                record.subject.clone(),
                spec.maps_to.clone(),
                &record.justification,
            )?,
        };
    }
    Ok(abox)
}

/// The decision the reasoner makes for a populated ABox.
#[derive(Debug, Clone, PartialEq)]
pub struct Verdict {
    pub positive: bool,
    pub outcome: Outcome,
    pub snapshot: ABox,
    pub fired: Vec<Firing>,
    pub violations: Vec<Violation>,
}

pub fn verify(task: &TaskDefinition, instance_id: &str, abox: &ABox) -> Result<Verdict, OntologyError> {
    let result = forward_chain(&task.tbox, abox);
    let target = task.entity_individual(instance_id, &task.target_entity)?;
    let member = result.classify(&target, &task.target_class).member;
    let (positive, outcome) = if result.consistent {
        (member, Outcome::Ok)
    } else {
        (false, Outcome::Inconsistent)
    };
    Ok(Verdict {
        positive,
        outcome,
        snapshot: result.abox,
        fired: result.fired,
        violations: result.violations,
    })
}

/// Re-runs only the reasoner over the asserted part of a stored snapshot.
pub fn replay_reasoner(task: &TaskDefinition, trace: &InstanceTrace) -> Option<Result<Verdict, OntologyError>> {
    let snapshot = trace.abox_snapshot.as_ref()?;
    let mut asserted = ABox::new();
    for individual in snapshot.individuals() {
        asserted.register_individual(individual.clone());
    }
    let mut restore = || -> Result<(), OntologyError> {
        for (i, c, origin) in snapshot.class_assertions() {
            if let Origin::Asserted(j) = origin {
                asserted.assert_class(&task.tbox, i.clone(), c.clone(), j)?;
            }
        }
        for (s, p, o, origin) in snapshot.property_assertions() {
            if let Origin::Asserted(j) = origin {
                asserted.assert_property(&task.tbox, s.clone(), p.clone(), o.clone(), j)?;
            }
        }
        Ok(())
    };
    Some(restore().and_then(|()| verify(task, &trace.instance_id, &asserted)))
}

/// Per-run settings shared by all instances.
pub struct Pipeline<'a> {
    pub task: &'a TaskDefinition,
    pub backend: &'a dyn Backend,
    /// Labelled training examples for the FS and CoT prompts.
    pub exemplars: Vec<(String, String)>,
    pub temperature: f64,
}

fn step_name(base: &str, complementary: bool) -> String {
    if complementary {
        format!("{base}_comp")
    } else {
        base.to_string()
    }
}

struct Extracted {
    entities: EntityExtraction,
    assertions: AssertionExtraction,
}

impl<'a> Pipeline<'a> {
    pub fn new(task: &'a TaskDefinition, backend: &'a dyn Backend) -> Self {
        Pipeline {
            task,
            backend,
            exemplars: Vec::new(),
            temperature: 0.0,
        }
    }

    pub fn with_exemplars(mut self, exemplars: Vec<(String, String)>) -> Self {
        self.exemplars = exemplars;
        self
    }

    pub fn run(&self, condition: Condition, instance: &Instance) -> InstanceTrace {
        match condition {
            Condition::FS => self.run_baseline(instance, PromptStyle::FewShot),
            Condition::CoT => self.run_baseline(instance, PromptStyle::ChainOfThought),
            Condition::SD | Condition::SdComp => self.run_sd(instance, condition.complementary()),
            Condition::SdDirect | Condition::SdDirectComp => self.run_sd_direct(instance, condition.complementary()),
        }
    }

    /// Runs every instance, in parallel, and returns traces sorted by id.
    pub fn run_all(&self, condition: Condition, instances: &[Instance]) -> Vec<InstanceTrace> {
        let mut traces: Vec<InstanceTrace> = instances.par_iter().map(|i| self.run(condition, i)).collect();
        traces.sort_by(|a, b| a.instance_id.cmp(&b.instance_id));
        traces
    }

    fn temper(&self, mut request: crate::extraction::ChatRequest) -> crate::extraction::ChatRequest {
        request.temperature = self.temperature;
        request
    }

    /// Runs both extraction steps. `Ok(None)` means a required entity was
    /// missing; the trace is already marked.
    fn extract(
        &self,
        instance: &Instance,
        complementary: bool,
        trace: &mut InstanceTrace,
    ) -> Result<Option<Extracted>, ExtractionError> {
        let task = self.task;
        let request = self.temper(build_entity_prompt(task, &instance.text)?);
        let entities = call_structured(
            self.backend,
            &instance.id,
            "entities",
            request,
            &mut trace.raw_exchanges,
            |raw| parse_entity_response(raw, task, &instance.id),
        )?;
        trace.entity_extraction = Some(entities.clone());
        let (request, included, skipped) = match build_assertion_prompt(task, &instance.text, &entities, complementary)?
        {
            AssertionPrompt::NotExtractable { missing } => {
                trace.missing_entities = missing;
                trace.outcome = Outcome::NotExtractable;
                trace.prediction = Some(task.labels.negative.clone());
                return Ok(None);
            }
            AssertionPrompt::Ready {
                request,
                included,
                skipped,
            } => (request, included, skipped),
        };
        let assertions = call_structured(
            self.backend,
            &instance.id,
            &step_name("assertions", complementary),
            self.temper(request),
            &mut trace.raw_exchanges,
            |raw| parse_assertion_response(raw, task, &entities, &included, &skipped),
        )?;
        trace.assertion_extraction = Some(assertions.clone());
        Ok(Some(Extracted { entities, assertions }))
    }

    pub fn run_sd(&self, instance: &Instance, complementary: bool) -> InstanceTrace {
        let condition = if complementary {
            Condition::SdComp
        } else {
            Condition::SD
        };
        let mut trace = InstanceTrace::new(instance, condition);
        let extracted = match self.extract(instance, complementary, &mut trace) {
            Ok(Some(x)) => x,
            Ok(None) => return trace,
            Err(e) => return trace.fail(e),
        };
        let verdict = populate(self.task, &instance.id, &extracted.entities, &extracted.assertions)
            .and_then(|abox| verify(self.task, &instance.id, &abox));
        match verdict {
            Ok(v) => {
                trace.prediction = Some(self.task.labels.label(v.positive).to_string());
                trace.outcome = v.outcome;
                trace.abox_snapshot = Some(v.snapshot);
                trace.fired = Some(v.fired);
                trace.violations = v.violations;
            }
            Err(e) => {
                trace.outcome = Outcome::Error;
                trace.error = Some(format!("populating ABox: {e}"));
            }
        }
        trace
    }

    pub fn run_sd_direct(&self, instance: &Instance, complementary: bool) -> InstanceTrace {
        let condition = if complementary {
            Condition::SdDirectComp
        } else {
            Condition::SdDirect
        };
        let mut trace = InstanceTrace::new(instance, condition);
        let extracted = match self.extract(instance, complementary, &mut trace) {
            Ok(Some(x)) => x,
            Ok(None) => return trace,
            Err(e) => return trace.fail(e),
        };
        let task = self.task;
        let answer =
            build_direct_prompt(task, &instance.text, &extracted.entities, &extracted.assertions).and_then(|request| {
                call_structured(
                    self.backend,
                    &instance.id,
                    &step_name("direct", complementary),
                    self.temper(request),
                    &mut trace.raw_exchanges,
                    |raw| parse_answer(raw, task, false),
                )
            });
        match answer {
            Ok(answer) => {
                trace.prediction = Some(task.labels.label(answer.positive).to_string());
                trace.answer = Some(answer);
                trace
            }
            Err(e) => trace.fail(e),
        }
    }

    pub fn run_baseline(&self, instance: &Instance, style: PromptStyle) -> InstanceTrace {
        let (condition, step, reasoning) = match style {
            PromptStyle::FewShot => (Condition::FS, "fs", false),
            PromptStyle::ChainOfThought => (Condition::CoT, "cot", true),
        };
        let mut trace = InstanceTrace::new(instance, condition);
        let task = self.task;
        let answer = build_baseline_prompt(task, &instance.text, style, &self.exemplars).and_then(|request| {
            call_structured(
                self.backend,
                &instance.id,
                step,
                self.temper(request),
                &mut trace.raw_exchanges,
                |raw| parse_answer(raw, task, reasoning),
            )
        });
        match answer {
            Ok(answer) => {
                trace.prediction = Some(task.labels.label(answer.positive).to_string());
                trace.answer = Some(answer);
                trace
            }
            Err(e) => trace.fail(e),
        }
    }
}

/// Union of the SD snapshots in a set of traces, for querying.
pub fn merged_snapshot(traces: &[InstanceTrace]) -> ABox {
    let mut out = ABox::new();
    for snapshot in traces.iter().filter_map(|t| t.abox_snapshot.as_ref()) {
        out.extend(snapshot);
    }
    out
}

/// Target individual of an instance, for inspection.
pub fn target_individual(task: &TaskDefinition, instance_id: &str) -> Result<Iri, OntologyError> {
    task.entity_individual(instance_id, &task.target_entity)
}
