use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::OntologyError;

/// A short-form IRI, `prefix:Local`.
///
/// Ordering is by prefix, then local name. All "lexicographic" orderings in
/// the crate (fired logs, query rows) use this order.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Iri {
    prefix: String,
    local: String,
}

fn is_ident(s: &str, extra: &[char]) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_' || extra.contains(&c))
}

impl Iri {
    pub fn new(prefix: &str, local: &str) -> Result<Self, OntologyError> {
        if !is_ident(prefix, &['-']) || !is_ident(local, &[]) {
            return Err(OntologyError::MalformedIri(format!("{prefix}:{local}")));
        }
        Ok(Iri {
            prefix: prefix.to_string(),
            local: local.to_string(),
        })
    }

    /// Parses `prefix:Local`.
    pub fn parse(text: &str) -> Result<Self, OntologyError> {
        let (prefix, local) = text
            .split_once(':')
            .ok_or_else(|| OntologyError::MalformedIri(text.to_string()))?;
        Iri::new(prefix, local)
    }

    /// Sorts before every well-formed IRI. Only used as a range bound.
    pub(crate) fn lowest() -> Self {
        Iri {
            prefix: String::new(),
            local: String::new(),
        }
    }

    pub fn prefix(&self) -> &str {
        &self.prefix
    }

    pub fn local(&self) -> &str {
        &self.local
    }

    /// Builds an individual IRI from arbitrary text, replacing characters
    /// that are not allowed in a local name with `_`.
    pub fn mint(prefix: &str, raw_local: &str) -> Result<Self, OntologyError> {
        let mut local: String = raw_local
            .chars()
            .map(|c| if c.is_ascii_alphanumeric() || c == '_' { c } else { '_' })
            .collect();
        if !local.starts_with(|c: char| c.is_ascii_alphabetic() || c == '_') {
            local.insert(0, '_');
        }
        Iri::new(prefix, &local)
    }
}

impl fmt::Display for Iri {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.prefix, self.local)
    }
}

impl FromStr for Iri {
    type Err = OntologyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Iri::parse(s)
    }
}

impl TryFrom<String> for Iri {
    type Error = OntologyError;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        Iri::parse(&value)
    }
}

impl From<Iri> for String {
    fn from(iri: Iri) -> Self {
        iri.to_string()
    }
}

/// Maps short prefixes to base URLs. Only consulted when IRIs cross a
/// boundary that needs full URLs (query text, export).
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PrefixTable(BTreeMap<String, String>);

impl PrefixTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, prefix: impl Into<String>, base: impl Into<String>) {
        self.0.insert(prefix.into(), base.into());
    }

    pub fn base(&self, prefix: &str) -> Option<&str> {
        self.0.get(prefix).map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.0.iter().map(|(p, b)| (p.as_str(), b.as_str()))
    }

    pub fn expand(&self, iri: &Iri) -> Option<String> {
        self.base(iri.prefix()).map(|base| format!("{base}{}", iri.local()))
    }

    /// Finds the short form of a full IRI. The longest matching base wins.
    pub fn compact(&self, full: &str) -> Option<Iri> {
        self.0
            .iter()
            .filter(|(_, base)| !base.is_empty() && full.starts_with(base.as_str()))
            .max_by_key(|(_, base)| base.len())
            .and_then(|(prefix, base)| Iri::new(prefix, &full[base.len()..]).ok())
    }

    /// Short prefix whose base URL equals `base` exactly.
    pub fn prefix_for_base(&self, base: &str) -> Option<&str> {
        self.0.iter().find(|(_, b)| b.as_str() == base).map(|(p, _)| p.as_str())
    }
}
