//! Task definitions: a TBox with rules, plus the entity and assertion
//! specifications used to prompt for extraction.
//!
//! Documents are JSON. Rules use the compact text syntax accepted by
//! [`SwrlRule::parse`]. Three tasks are bundled: `hearsay`,
//! `method_application` and `clinical_eligibility`.

mod document;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ontology::{Atom, Iri, OntologyError, PrefixTable, SwrlRule, TBox};

pub use document::{AssertionDoc, EntityDoc, LabelDoc, PropertyDoc, RuleDoc, TargetDoc, TaskDocument};

/// Prefix used for individuals minted during extraction.
pub const INSTANCE_PREFIX: &str = "inst";
pub const DEFAULT_INSTANCE_BASE: &str = "http://example.org/instances#";
pub const DEFAULT_SD_BASE: &str = "http://example.org/sd#";
/// Property linking every extracted individual to its case, unless the
/// document names another one.
pub const DEFAULT_CASE_LINK: &str = "sd:belongsToCase";

pub const BUILTIN_TASKS: [&str; 3] = ["hearsay", "method_application", "clinical_eligibility"];

#[derive(Debug, Error)]
pub enum TaskError {
    #[error("task document: {path}: {message}")]
    Schema { path: String, message: String },
    #[error("{context}: {source}")]
    Ontology {
        context: String,
        #[source]
        source: Box<OntologyError>,
    },
    #[error("duplicate {kind} name `{name}`")]
    Duplicate { kind: &'static str, name: String },
    #[error("{what} refers to unknown {kind} `{name}`")]
    Dangling {
        what: String,
        kind: &'static str,
        name: String,
    },
    #[error("prefix `{0}` is used but not listed under `prefixes`")]
    UnknownPrefix(String),
    #[error("complement pair: {0}")]
    ComplementAsymmetry(String),
    #[error("rule `{rule}`: atom {atom} cannot be populated by any entity, assertion or rule")]
    Unpopulatable { rule: String, atom: String },
    #[error("{0}")]
    Invalid(String),
    #[error("unknown task `{0}` (bundled: hearsay, method_application, clinical_eligibility)")]
    UnknownTask(String),
}

fn onto(context: impl Into<String>) -> impl FnOnce(OntologyError) -> TaskError {
    let context = context.into();
    move |source| TaskError::Ontology {
        context,
        source: Box::new(source),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arity {
    Unary,
    Binary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ComplementRole {
    Positive,
    Negative,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EntitySpec {
    pub name: String,
    pub ontology_class: Iri,
    pub description: String,
    pub required: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AssertionSpec {
    pub name: String,
    pub arity: Arity,
    pub maps_to: Iri,
    pub subject_entity: String,
    pub object_entity: Option<String>,
    pub description: String,
    pub complement_of: Option<String>,
    pub complement_role: Option<ComplementRole>,
    /// The description was written for this implementation rather than
    /// taken from published task material.
    pub authored_description: bool,
}

impl AssertionSpec {
    pub fn is_negative_complement(&self) -> bool {
        self.complement_role == Some(ComplementRole::Negative)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LabelMap {
    pub positive: String,
    pub negative: String,
}

impl LabelMap {
    pub fn label(&self, positive: bool) -> &str {
        if positive {
            &self.positive
        } else {
            &self.negative
        }
    }

    /// Maps a label string back to a polarity. Case-insensitive.
    pub fn polarity(&self, label: &str) -> Option<bool> {
        let label = label.trim();
        if label.eq_ignore_ascii_case(&self.positive) {
            Some(true)
        } else if label.eq_ignore_ascii_case(&self.negative) {
            Some(false)
        } else {
            None
        }
    }
}

/// A validated task. Immutable once loaded.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaskDefinition {
    pub id: String,
    pub domain_context: String,
    pub prefixes: PrefixTable,
    pub tbox: TBox,
    pub case_link: Iri,
    pub entity_specs: Vec<EntitySpec>,
    pub assertion_specs: Vec<AssertionSpec>,
    pub target_class: Iri,
    pub target_entity: String,
    pub labels: LabelMap,
}

impl TaskDefinition {
    pub fn entity(&self, name: &str) -> Option<&EntitySpec> {
        self.entity_specs.iter().find(|e| e.name == name)
    }

    pub fn assertion(&self, name: &str) -> Option<&AssertionSpec> {
        self.assertion_specs.iter().find(|a| a.name == name)
    }

    /// Assertion specs for one run. Without complementary predicates the
    /// negative member of every pair is dropped.
    pub fn effective_assertion_specs(&self, complementary: bool) -> Vec<&AssertionSpec> {
        self.assertion_specs
            .iter()
            .filter(|a| complementary || !a.is_negative_complement())
            .collect()
    }

    /// Rules whose consequent is the target class.
    pub fn target_rules(&self) -> impl Iterator<Item = &SwrlRule> {
        self.tbox
            .rules()
            .iter()
            .filter(|r| matches!(&r.consequent, Atom::Class { class, .. } if *class == self.target_class))
    }

    /// Individual for an extracted entity of one instance.
    pub fn entity_individual(&self, instance_id: &str, entity: &str) -> Result<Iri, OntologyError> {
        Iri::mint(INSTANCE_PREFIX, &format!("{instance_id}_{entity}"))
    }

    pub fn case_individual(&self, instance_id: &str) -> Result<Iri, OntologyError> {
        Iri::mint(INSTANCE_PREFIX, &format!("case_{instance_id}"))
    }

    pub fn to_document(&self) -> TaskDocument {
        let s = |i: &Iri| i.to_string();
        TaskDocument {
            id: self.id.clone(),
            context: self.domain_context.clone(),
            prefixes: self
                .prefixes
                .iter()
                .map(|(p, b)| (p.to_string(), b.to_string()))
                .collect(),
            classes: self.tbox.classes().iter().map(s).collect(),
            properties: self
                .tbox
                .properties()
                .iter()
                .filter(|(iri, decl)| **iri != self.case_link || decl.domain.is_some() || decl.range.is_some())
                .map(|(iri, decl)| PropertyDoc {
                    iri: iri.to_string(),
                    domain: decl.domain.as_ref().map(s),
                    range: decl.range.as_ref().map(s),
                })
                .collect(),
            subclass: self.tbox.subclass_axioms().iter().map(|(a, b)| [s(a), s(b)]).collect(),
            disjoint: self.tbox.disjoint_axioms().iter().map(|(a, b)| [s(a), s(b)]).collect(),
            rules: self
                .tbox
                .rules()
                .iter()
                .map(|r| RuleDoc {
                    name: r.name.clone(),
                    rule: r.body_text(),
                })
                .collect(),
            case_link: Some(self.case_link.to_string()),
            entities: self
                .entity_specs
                .iter()
                .map(|e| EntityDoc {
                    name: e.name.clone(),
                    class: e.ontology_class.to_string(),
                    description: e.description.clone(),
                    required: e.required,
                })
                .collect(),
            assertions: self
                .assertion_specs
                .iter()
                .map(|a| AssertionDoc {
                    name: a.name.clone(),
                    arity: a.arity,
                    maps_to: a.maps_to.to_string(),
                    subject: a.subject_entity.clone(),
                    object: a.object_entity.clone(),
                    description: a.description.clone(),
                    complement_of: a.complement_of.clone(),
                    complement_role: a.complement_role,
                    authored_description: a.authored_description,
                })
                .collect(),
            target: TargetDoc {
                class: self.target_class.to_string(),
                entity: self.target_entity.clone(),
                labels: LabelDoc {
                    positive: self.labels.positive.clone(),
                    negative: self.labels.negative.clone(),
                },
            },
        }
    }

    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(&self.to_document()).expect("task documents serialize");
        text.push('\n');
        text
    }
}

/// Parses and validates a JSON task document.
pub fn load_task(text: &str) -> Result<TaskDefinition, TaskError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let doc: TaskDocument = serde_path_to_error::deserialize(de).map_err(|e| TaskError::Schema {
        path: e.path().to_string(),
        message: e.inner().to_string(),
    })?;
    from_document(doc)
}

pub fn builtin_task(id: &str) -> Result<TaskDefinition, TaskError> {
    load_task(builtin_document(id)?)
}

/// Raw JSON of a bundled task.
pub fn builtin_document(id: &str) -> Result<&'static str, TaskError> {
    match id {
        "hearsay" => Ok(include_str!("../../resources/tasks/hearsay.json")),
        "method_application" => Ok(include_str!("../../resources/tasks/method_application.json")),
        "clinical_eligibility" => Ok(include_str!("../../resources/tasks/clinical_eligibility.json")),
        other => Err(TaskError::UnknownTask(other.to_string())),
    }
}

fn iri(text: &str, at: &str) -> Result<Iri, TaskError> {
    Iri::parse(text).map_err(onto(at))
}

pub fn from_document(doc: TaskDocument) -> Result<TaskDefinition, TaskError> {
    let valid_id = !doc.id.is_empty()
        && doc
            .id
            .chars()
            .all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_');
    if !valid_id {
        return Err(TaskError::Schema {
            path: "id".into(),
            message: format!("`{}` must be non-empty lowercase letters, digits or '_'", doc.id),
        });
    }
    if doc.context.trim().is_empty() {
        return Err(TaskError::Schema {
            path: "context".into(),
            message: "must not be empty".into(),
        });
    }

    let mut prefixes = PrefixTable::new();
    for (p, base) in &doc.prefixes {
        prefixes.insert(p.clone(), base.clone());
    }
    if prefixes.base(INSTANCE_PREFIX).is_none() {
        prefixes.insert(INSTANCE_PREFIX, DEFAULT_INSTANCE_BASE);
    }
    if prefixes.base("sd").is_none() {
        prefixes.insert("sd", DEFAULT_SD_BASE);
    }

    let mut tbox = TBox::new();
    for (n, c) in doc.classes.iter().enumerate() {
        tbox.declare_class(iri(c, &format!("classes[{n}]"))?)
            .map_err(onto(format!("classes[{n}]")))?;
    }
    for (n, p) in doc.properties.iter().enumerate() {
        let at = format!("properties[{n}]");
        let domain = p.domain.as_deref().map(|d| iri(d, &at)).transpose()?;
        let range = p.range.as_deref().map(|r| iri(r, &at)).transpose()?;
        tbox.declare_property(iri(&p.iri, &at)?, domain, range)
            .map_err(onto(at))?;
    }
    for (n, [sub, sup]) in doc.subclass.iter().enumerate() {
        let at = format!("subclass[{n}]");
        tbox.add_subclass(iri(sub, &at)?, iri(sup, &at)?).map_err(onto(at))?;
    }
    for (n, [a, b]) in doc.disjoint.iter().enumerate() {
        let at = format!("disjoint[{n}]");
        tbox.add_disjoint(iri(a, &at)?, iri(b, &at)?).map_err(onto(at))?;
    }
    for (n, r) in doc.rules.iter().enumerate() {
        let at = format!("rules[{n}]");
        let rule = SwrlRule::parse(r.name.clone(), &r.rule).map_err(onto(at.clone()))?;
        tbox.add_rule(rule).map_err(onto(at))?;
    }
    let case_link = iri(doc.case_link.as_deref().unwrap_or(DEFAULT_CASE_LINK), "case_link")?;
    tbox.declare_property(case_link.clone(), None, None)
        .map_err(onto("case_link"))?;
    tbox.validate().map_err(onto("tbox"))?;

    let mut used = BTreeSet::new();
    for c in tbox.classes() {
        used.insert(c.prefix().to_string());
    }
    for p in tbox.properties().keys() {
        used.insert(p.prefix().to_string());
    }
    for c in tbox.rule_constants() {
        used.insert(c.prefix().to_string());
    }
    if let Some(missing) = used.into_iter().find(|p| prefixes.base(p).is_none()) {
        return Err(TaskError::UnknownPrefix(missing));
    }

    let mut entity_specs: Vec<EntitySpec> = Vec::new();
    for (n, e) in doc.entities.iter().enumerate() {
        let at = format!("entities[{n}]");
        check_name(&e.name, &at)?;
        if entity_specs.iter().any(|x| x.name == e.name) {
            return Err(TaskError::Duplicate {
                kind: "entity",
                name: e.name.clone(),
            });
        }
        let class = iri(&e.class, &at)?;
        if !tbox.has_class(&class) {
            return Err(TaskError::Dangling {
                what: at,
                kind: "class",
                name: class.to_string(),
            });
        }
        non_empty(&e.description, &format!("{at}.description"))?;
        entity_specs.push(EntitySpec {
            name: e.name.clone(),
            ontology_class: class,
            description: e.description.clone(),
            required: e.required,
        });
    }
    if entity_specs.is_empty() {
        return Err(TaskError::Schema {
            path: "entities".into(),
            message: "at least one entity is required".into(),
        });
    }

    let mut assertion_specs: Vec<AssertionSpec> = Vec::new();
    for (n, a) in doc.assertions.iter().enumerate() {
        let at = format!("assertions[{n}]");
        assertion_specs.push(assertion_spec(a, &at, &tbox, &entity_specs, &assertion_specs)?);
    }
    check_complements(&assertion_specs)?;

    let target_class = iri(&doc.target.class, "target.class")?;
    if !tbox.has_class(&target_class) {
        return Err(TaskError::Dangling {
            what: "target.class".into(),
            kind: "class",
            name: target_class.to_string(),
        });
    }
    let entity = entity_specs
        .iter()
        .find(|e| e.name == doc.target.entity)
        .ok_or_else(|| TaskError::Dangling {
            what: "target.entity".into(),
            kind: "entity",
            name: doc.target.entity.clone(),
        })?;
    if !tbox.superclasses(&target_class).contains(&entity.ontology_class) {
        return Err(TaskError::Invalid(format!(
            "target class {target_class} is not a subclass of the target entity's class {}",
            entity.ontology_class
        )));
    }
    let labels = LabelMap {
        positive: doc.target.labels.positive.trim().to_string(),
        negative: doc.target.labels.negative.trim().to_string(),
    };
    if labels.positive.is_empty()
        || labels.negative.is_empty()
        || labels.positive.eq_ignore_ascii_case(&labels.negative)
    {
        return Err(TaskError::Schema {
            path: "target.labels".into(),
            message: "labels must be non-empty and distinct".into(),
        });
    }

    let task = TaskDefinition {
        id: doc.id,
        domain_context: doc.context,
        prefixes,
        tbox,
        case_link,
        entity_specs,
        assertion_specs,
        target_class,
        target_entity: doc.target.entity,
        labels,
    };
    if task.target_rules().next().is_none() {
        return Err(TaskError::Invalid(format!(
            "no rule has the target class {} as its consequent",
            task.target_class
        )));
    }
    check_populatable(&task)?;
    Ok(task)
}

fn check_name(name: &str, at: &str) -> Result<(), TaskError> {
    let ok = name.starts_with(|c: char| c.is_ascii_alphabetic())
        && name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_');
    if ok {
        Ok(())
    } else {
        Err(TaskError::Schema {
            path: format!("{at}.name"),
            message: format!("`{name}` must be an identifier"),
        })
    }
}

fn non_empty(text: &str, at: &str) -> Result<(), TaskError> {
    if text.trim().is_empty() {
        Err(TaskError::Schema {
            path: at.to_string(),
            message: "must not be empty".into(),
        })
    } else {
        Ok(())
    }
}

fn assertion_spec(
    a: &AssertionDoc,
    at: &str,
    tbox: &TBox,
    entities: &[EntitySpec],
    earlier: &[AssertionSpec],
) -> Result<AssertionSpec, TaskError> {
    check_name(&a.name, at)?;
    if earlier.iter().any(|x| x.name == a.name) || entities.iter().any(|e| e.name == a.name) {
        return Err(TaskError::Duplicate {
            kind: "assertion",
            name: a.name.clone(),
        });
    }
    non_empty(&a.description, &format!("{at}.description"))?;
    let maps_to = iri(&a.maps_to, at)?;
    let entity = |name: &str| {
        entities
            .iter()
            .find(|e| e.name == name)
            .ok_or_else(|| TaskError::Dangling {
                what: at.to_string(),
                kind: "entity",
                name: name.to_string(),
            })
    };
    let subject = entity(&a.subject)?;
    match a.arity {
        Arity::Unary => {
            if !tbox.has_class(&maps_to) {
                return Err(TaskError::Dangling {
                    what: format!("{at}.maps_to"),
                    kind: "class",
                    name: maps_to.to_string(),
                });
            }
            if a.object.is_some() {
                return Err(TaskError::Schema {
                    path: format!("{at}.object"),
                    message: "unary assertions take no object".into(),
                });
            }
        }
        Arity::Binary => {
            let Some(decl) = tbox.property(&maps_to) else {
                return Err(TaskError::Dangling {
                    what: format!("{at}.maps_to"),
                    kind: "property",
                    name: maps_to.to_string(),
                });
            };
            let Some(object_name) = &a.object else {
                return Err(TaskError::Schema {
                    path: format!("{at}.object"),
                    message: "binary assertions must name an object entity".into(),
                });
            };
            let object = entity(object_name)?;
            for (role, entity, required) in [("domain", subject, &decl.domain), ("range", object, &decl.range)] {
                if let Some(required) = required {
                    if !tbox.superclasses(&entity.ontology_class).contains(required) {
                        return Err(TaskError::Invalid(format!(
                            "{at}: entity `{}` ({}) does not fit the {role} {required} of {maps_to}",
                            entity.name, entity.ontology_class
                        )));
                    }
                }
            }
        }
    }
    if a.complement_role.is_some() != a.complement_of.is_some() {
        return Err(TaskError::ComplementAsymmetry(format!(
            "{}: complement_of and complement_role must be given together",
            a.name
        )));
    }
    Ok(AssertionSpec {
        name: a.name.clone(),
        arity: a.arity,
        maps_to,
        subject_entity: a.subject.clone(),
        object_entity: a.object.clone(),
        description: a.description.clone(),
        complement_of: a.complement_of.clone(),
        complement_role: a.complement_role,
        authored_description: a.authored_description,
    })
}

fn check_complements(specs: &[AssertionSpec]) -> Result<(), TaskError> {
    for a in specs {
        let Some(other) = &a.complement_of else { continue };
        let b = specs
            .iter()
            .find(|b| &b.name == other)
            .ok_or_else(|| TaskError::Dangling {
                what: format!("assertion `{}`", a.name),
                kind: "assertion",
                name: other.clone(),
            })?;
        if b.complement_of.as_deref() != Some(a.name.as_str()) {
            return Err(TaskError::ComplementAsymmetry(format!(
                "{} names {} but not the other way round",
                a.name, b.name
            )));
        }
        if a.arity != b.arity {
            return Err(TaskError::ComplementAsymmetry(format!(
                "{} and {} differ in arity",
                a.name, b.name
            )));
        }
        if a.complement_role == b.complement_role {
            return Err(TaskError::ComplementAsymmetry(format!(
                "{} and {} must be one positive and one negative",
                a.name, b.name
            )));
        }
    }
    Ok(())
}

/// Every antecedent atom must be fillable from some entity, assertion or
/// rule consequent.
fn check_populatable(task: &TaskDefinition) -> Result<(), TaskError> {
    let tbox = &task.tbox;
    let mut class_sources: BTreeSet<Iri> = BTreeSet::new();
    let mut property_sources: BTreeSet<&Iri> = BTreeSet::new();
    for e in &task.entity_specs {
        class_sources.extend(tbox.superclasses(&e.ontology_class));
    }
    for a in &task.assertion_specs {
        match a.arity {
            Arity::Unary => class_sources.extend(tbox.superclasses(&a.maps_to)),
            Arity::Binary => {
                property_sources.insert(&a.maps_to);
            }
        }
    }
    for r in tbox.rules() {
        match &r.consequent {
            Atom::Class { class, .. } => class_sources.extend(tbox.superclasses(class)),
            Atom::Property { property, .. } => {
                property_sources.insert(property);
            }
        }
    }
    for r in tbox.rules() {
        for atom in &r.antecedent {
            let ok = match atom {
                Atom::Class { class, .. } => class_sources.contains(class),
                Atom::Property { property, .. } => property_sources.contains(property),
            };
            if !ok {
                return Err(TaskError::Unpopulatable {
                    rule: r.name.clone(),
                    atom: atom.to_string(),
                });
            }
        }
    }
    Ok(())
}

/// Predicates (classes and properties) that the non-complementary
/// assertion specs and the required entities can populate, keyed by IRI.
pub fn populated_predicates(task: &TaskDefinition) -> BTreeMap<Iri, String> {
    let mut out = BTreeMap::new();
    for e in task.entity_specs.iter().filter(|e| e.required) {
        out.insert(e.ontology_class.clone(), e.name.clone());
    }
    for a in task.effective_assertion_specs(false) {
        out.insert(a.maps_to.clone(), a.name.clone());
    }
    out
}
