use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{Iri, OntologyError};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Term {
    /// Variable name without the leading `?`.
    Variable(String),
    Individual(Iri),
}

impl Term {
    pub fn var(name: &str) -> Self {
        Term::Variable(name.trim_start_matches('?').to_string())
    }

    pub fn as_variable(&self) -> Option<&str> {
        match self {
            Term::Variable(v) => Some(v),
            Term::Individual(_) => None,
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Variable(v) => write!(f, "?{v}"),
            Term::Individual(iri) => write!(f, "{iri}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Atom {
    Class { class: Iri, term: Term },
    Property { property: Iri, subject: Term, object: Term },
}

impl Atom {
    pub fn class(class: Iri, term: Term) -> Self {
        Atom::Class { class, term }
    }

    pub fn property(property: Iri, subject: Term, object: Term) -> Self {
        Atom::Property {
            property,
            subject,
            object,
        }
    }

    pub fn terms(&self) -> Vec<&Term> {
        match self {
            Atom::Class { term, .. } => vec![term],
            Atom::Property { subject, object, .. } => vec![subject, object],
        }
    }

    pub fn predicate(&self) -> &Iri {
        match self {
            Atom::Class { class, .. } => class,
            Atom::Property { property, .. } => property,
        }
    }

    pub fn variables(&self) -> impl Iterator<Item = &str> {
        self.terms().into_iter().filter_map(Term::as_variable)
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Atom::Class { class, term } => write!(f, "{class}({term})"),
            Atom::Property {
                property,
                subject,
                object,
            } => {
                write!(f, "{property}({subject}, {object})")
            }
        }
    }
}

/// A Horn rule: conjunctive antecedent, single-atom consequent.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SwrlRule {
    pub name: String,
    pub antecedent: Vec<Atom>,
    pub consequent: Atom,
}

impl SwrlRule {
    /// Builds a rule and checks its shape: non-empty antecedent, well-formed
    /// variable names and safety (every consequent variable is bound by the
    /// antecedent).
    pub fn new(name: impl Into<String>, antecedent: Vec<Atom>, consequent: Atom) -> Result<Self, OntologyError> {
        let rule = SwrlRule {
            name: name.into(),
            antecedent,
            consequent,
        };
        rule.check_shape()?;
        Ok(rule)
    }

    /// Parses `A(?x) ^ p(?x, ?y) -> B(?x)`. `∧` and `→` are accepted too.
    pub fn parse(name: impl Into<String>, text: &str) -> Result<Self, OntologyError> {
        let (antecedent, consequent) = RuleParser::new(text).parse()?;
        SwrlRule::new(name, antecedent, consequent)
    }

    pub(crate) fn check_shape(&self) -> Result<(), OntologyError> {
        if self.name.trim().is_empty() {
            return Err(OntologyError::InvalidRule {
                rule: self.name.clone(),
                reason: "rule name is empty".into(),
            });
        }
        if self.antecedent.is_empty() {
            return Err(OntologyError::InvalidRule {
                rule: self.name.clone(),
                reason: "antecedent is empty".into(),
            });
        }
        for atom in self.antecedent.iter().chain(std::iter::once(&self.consequent)) {
            for var in atom.variables() {
                if !is_variable_name(var) {
                    return Err(OntologyError::InvalidRule {
                        rule: self.name.clone(),
                        reason: format!("malformed variable ?{var}"),
                    });
                }
            }
        }
        let bound = self.antecedent_variables();
        if let Some(var) = self.consequent.variables().find(|v| !bound.contains(v)) {
            return Err(OntologyError::UnsafeRule {
                rule: self.name.clone(),
                variable: var.to_string(),
            });
        }
        Ok(())
    }

    pub fn antecedent_variables(&self) -> BTreeSet<&str> {
        self.antecedent.iter().flat_map(Atom::variables).collect()
    }

    /// Variables in order of first appearance, antecedent left to right.
    pub fn variable_order(&self) -> Vec<String> {
        let mut seen = Vec::<String>::new();
        for var in self.antecedent.iter().flat_map(Atom::variables) {
            if !seen.iter().any(|s| s == var) {
                seen.push(var.to_string());
            }
        }
        seen
    }

    /// Renders the rule body in the same syntax [`SwrlRule::parse`] reads.
    pub fn body_text(&self) -> String {
        let lhs: Vec<String> = self.antecedent.iter().map(Atom::to_string).collect();
        format!("{} -> {}", lhs.join(" ^ "), self.consequent)
    }
}

impl fmt::Display for SwrlRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.name, self.body_text())
    }
}

fn is_variable_name(name: &str) -> bool {
    let mut chars = name.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_lowercase()) && chars.all(|c| c.is_ascii_alphanumeric())
}

struct RuleParser<'a> {
    text: &'a str,
    pos: usize,
}

impl<'a> RuleParser<'a> {
    fn new(text: &'a str) -> Self {
        RuleParser { text, pos: 0 }
    }

    fn error(&self, message: impl Into<String>) -> OntologyError {
        OntologyError::RuleSyntax {
            text: self.text.to_string(),
            column: self.text[..self.pos].chars().count() + 1,
            message: message.into(),
        }
    }

    fn rest(&self) -> &'a str {
        &self.text[self.pos..]
    }

    fn skip_ws(&mut self) {
        let trimmed = self.rest().trim_start();
        self.pos = self.text.len() - trimmed.len();
    }

    fn eat(&mut self, token: &str) -> bool {
        self.skip_ws();
        if self.rest().starts_with(token) {
            self.pos += token.len();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, token: &str) -> Result<(), OntologyError> {
        if self.eat(token) {
            Ok(())
        } else {
            Err(self.error(format!("expected `{token}`")))
        }
    }

    fn word(&mut self) -> Result<&'a str, OntologyError> {
        self.skip_ws();
        let len = self
            .rest()
            .find(|c: char| !(c.is_ascii_alphanumeric() || matches!(c, '_' | ':' | '-' | '?')))
            .unwrap_or(self.rest().len());
        if len == 0 {
            return Err(self.error("expected a name"));
        }
        let word = &self.rest()[..len];
        self.pos += len;
        Ok(word)
    }

    fn iri(&mut self) -> Result<Iri, OntologyError> {
        let start = self.pos;
        let word = self.word()?;
        Iri::parse(word).map_err(|_| {
            self.pos = start;
            self.skip_ws();
            self.error(format!("`{word}` is not a prefixed name"))
        })
    }

    fn term(&mut self) -> Result<Term, OntologyError> {
        self.skip_ws();
        if self.rest().starts_with('?') {
            let start = self.pos;
            let word = self.word()?;
            let name = &word[1..];
            if !is_variable_name(name) {
                self.pos = start;
                return Err(self.error(format!("malformed variable `{word}`")));
            }
            Ok(Term::Variable(name.to_string()))
        } else {
            Ok(Term::Individual(self.iri()?))
        }
    }

    fn atom(&mut self) -> Result<Atom, OntologyError> {
        let predicate = self.iri()?;
        self.expect("(")?;
        let first = self.term()?;
        let atom = if self.eat(",") {
            let second = self.term()?;
            Atom::property(predicate, first, second)
        } else {
            Atom::class(predicate, first)
        };
        self.expect(")")?;
        Ok(atom)
    }

    fn conjunction(&mut self) -> Result<Vec<Atom>, OntologyError> {
        let mut atoms = vec![self.atom()?];
        while self.eat("^") || self.eat("∧") {
            atoms.push(self.atom()?);
        }
        Ok(atoms)
    }

    fn parse(mut self) -> Result<(Vec<Atom>, Atom), OntologyError> {
        let antecedent = self.conjunction()?;
        if !(self.eat("->") || self.eat("→")) {
            return Err(self.error("expected `->`"));
        }
        let mut consequent = self.conjunction()?;
        self.skip_ws();
        if !self.rest().is_empty() {
            return Err(self.error("unexpected trailing input"));
        }
        if consequent.len() != 1 {
            return Err(self.error("consequent must be a single atom"));
        }
        Ok((antecedent, consequent.remove(0)))
    }
}
