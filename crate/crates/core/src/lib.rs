//! Structured decomposition for rule-based reasoning over natural-language
//! input.
//!
//! A task is an ontology: a TBox of classes, object properties, axioms and
//! SWRL-style Horn rules, annotated with natural-language entity and
//! assertion specifications. A language model populates a fresh ABox from
//! the input text (entity identification, then assertion extraction), and a
//! deterministic forward-chaining reasoner decides whether the target
//! individual belongs to the target class.
//!
//! Modules, bottom up:
//!
//! - [`ontology`]: IRIs, TBox, ABox, rule syntax.
//! - [`reasoner`]: subclass closure, semi-naive forward chaining, consistency.
//! - [`query`]: basic-graph-pattern SELECT queries over a populated ABox.
//! - [`tasklib`]: task documents and the bundled tasks.
//! - [`extraction`]: prompts, structured-response parsing, LLM backends.
//! - [`pipeline`]: the six experimental conditions and instance traces.
//! - [`evaluation`]: datasets, metrics, paired statistics, reports.

pub mod evaluation;
pub mod extraction;
pub mod ontology;
pub mod pipeline;
pub mod query;
pub mod reasoner;
pub mod tasklib;

pub use ontology::{ABox, Atom, Iri, Origin, PrefixTable, SwrlRule, TBox, Term};
pub use reasoner::{InferenceResult, Reasoner};
pub use tasklib::TaskDefinition;
