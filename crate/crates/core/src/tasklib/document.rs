use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{Arity, ComplementRole};

/// On-disk shape of a task document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskDocument {
    pub id: String,
    pub context: String,
    pub prefixes: BTreeMap<String, String>,
    pub classes: Vec<String>,
    #[serde(default)]
    pub properties: Vec<PropertyDoc>,
    #[serde(default)]
    pub subclass: Vec<[String; 2]>,
    #[serde(default)]
    pub disjoint: Vec<[String; 2]>,
    pub rules: Vec<RuleDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub case_link: Option<String>,
    pub entities: Vec<EntityDoc>,
    pub assertions: Vec<AssertionDoc>,
    pub target: TargetDoc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PropertyDoc {
    pub iri: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub range: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RuleDoc {
    pub name: String,
    pub rule: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EntityDoc {
    pub name: String,
    pub class: String,
    pub description: String,
    #[serde(default)]
    pub required: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AssertionDoc {
    pub name: String,
    pub arity: Arity,
    pub maps_to: String,
    pub subject: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub object: Option<String>,
    pub description: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub complement_of: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub complement_role: Option<ComplementRole>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub authored_description: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetDoc {
    pub class: String,
    pub entity: String,
    #[serde(default)]
    pub labels: LabelDoc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabelDoc {
    pub positive: String,
    pub negative: String,
}

impl Default for LabelDoc {
    fn default() -> Self {
        LabelDoc {
            positive: "Yes".into(),
            negative: "No".into(),
        }
    }
}
