//! TBox/ABox model: classes, object properties, axioms, rules, individuals
//! and their assertions.
//!
//! Domain and range declarations are checked eagerly when a property
//! assertion is made, rather than used to infer types as OWL would.

mod abox;
mod iri;
mod rule;
mod tbox;

use thiserror::Error;

pub use abox::{normalize_justification, ABox, ClassAssertion, Origin, PropertyAssertion, MAX_JUSTIFICATION_BYTES};
pub use iri::{Iri, PrefixTable};
pub use rule::{Atom, SwrlRule, Term};
pub use tbox::{PropertyDecl, TBox};

/// The offending assertion behind a domain or range error.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SignatureViolation {
    pub property: Iri,
    pub individual: Iri,
    pub expected: Iri,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OntologyError {
    #[error("malformed IRI `{0}` (expected prefix:Local)")]
    MalformedIri(String),
    #[error("undeclared {kind} {iri}")]
    Undeclared { kind: &'static str, iri: Iri },
    #[error("{0} is declared as both a class and a property, or with conflicting signatures")]
    ConflictingDeclaration(Iri),
    #[error("subclass axiom {sub} ⊑ {sup} introduces a cycle")]
    SubclassCycle { sub: Iri, sup: Iri },
    #[error("class {0} cannot be disjoint with itself")]
    SelfDisjoint(Iri),
    #[error("class {class} is disjoint with its own superclass {ancestor}")]
    DisjointWithAncestor { class: Iri, ancestor: Iri },
    #[error("rule `{rule}` is unsafe: consequent variable ?{variable} is not bound in the antecedent")]
    UnsafeRule { rule: String, variable: String },
    #[error("rule `{rule}`: {reason}")]
    InvalidRule { rule: String, reason: String },
    #[error("rule syntax error at column {column}: {message} in `{text}`")]
    RuleSyntax {
        text: String,
        column: usize,
        message: String,
    },
    #[error("{} is not known to be a {} (domain of {})", .0.individual, .0.expected, .0.property)]
    DomainViolation(Box<SignatureViolation>),
    #[error("{} is not known to be a {} (range of {})", .0.individual, .0.expected, .0.property)]
    RangeViolation(Box<SignatureViolation>),
    #[error("asserted facts need a non-empty justification")]
    EmptyJustification,
    #[error("triple line {line}: {reason}")]
    TripleSyntax { line: usize, reason: String },
}
