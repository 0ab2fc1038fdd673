//! Basic graph pattern queries (`PREFIX`, `SELECT`, `WHERE { ... }`) over a
//! populated ABox. No OPTIONAL, FILTER, literals or blank nodes.

mod parser;

use std::collections::{BTreeMap, BTreeSet};

use log::warn;
use serde::Serialize;
use thiserror::Error;

use crate::ontology::{ABox, Iri, PrefixTable, TBox};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum QueryError {
    #[error("query syntax error at {line}:{column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("unknown prefix '{prefix}:' at {line}:{column}")]
    UnknownPrefix { prefix: String, line: usize, column: usize },
    #[error("selected variable ?{0} does not occur in any pattern")]
    UnboundSelect(String),
    #[error("IRI <{0}> has no prefix in the task's prefix table")]
    UnresolvedIri(String),
    #[error("class membership object must be a class IRI or variable, got <{0}>")]
    BadClassObject(String),
}

/// A position in a triple pattern. IRIs are kept in full form until the
/// query is executed against a task's prefix table.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum QueryTerm {
    Variable(String),
    Iri(String),
    /// `a`, class membership. Predicate position only.
    A,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TriplePattern {
    pub subject: QueryTerm,
    pub predicate: QueryTerm,
    pub object: QueryTerm,
}

impl TriplePattern {
    pub fn variables(&self) -> impl Iterator<Item = &str> {
        [&self.subject, &self.predicate, &self.object]
            .into_iter()
            .filter_map(|t| match t {
                QueryTerm::Variable(v) => Some(v.as_str()),
                _ => None,
            })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Query {
    pub prefixes: BTreeMap<String, String>,
    pub select_vars: Vec<String>,
    pub patterns: Vec<TriplePattern>,
}

impl Query {
    pub fn new(
        prefixes: BTreeMap<String, String>,
        select_vars: Vec<String>,
        patterns: Vec<TriplePattern>,
    ) -> Result<Self, QueryError> {
        if patterns.is_empty() {
            return Err(QueryError::Syntax {
                line: 1,
                column: 1,
                message: "empty pattern list".into(),
            });
        }
        for v in &select_vars {
            if !patterns.iter().any(|p| p.variables().any(|x| x == v)) {
                return Err(QueryError::UnboundSelect(v.clone()));
            }
        }
        Ok(Query {
            prefixes,
            select_vars,
            patterns,
        })
    }
}

pub fn parse_query(text: &str) -> Result<Query, QueryError> {
    parser::parse(text)
}

/// One result row, aligned with `select_vars`.
pub type BindingRow = Vec<Iri>;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct QueryOutput {
    pub columns: Vec<String>,
    pub rows: Vec<BindingRow>,
    /// Vocabulary referenced by the query but absent from the TBox.
    pub warnings: Vec<String>,
}

impl QueryOutput {
    /// Tab-separated rows with a header of variable names.
    pub fn to_tsv(&self) -> String {
        let mut out = self.columns.join("\t");
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(Iri::to_string).collect();
            out.push_str(&cells.join("\t"));
            out.push('\n');
        }
        out
    }

    /// Like [`QueryOutput::to_tsv`] with a `<var>_justification` column after
    /// each variable, holding the extraction justification of the bound
    /// individual's first asserted class, or empty.
    pub fn to_annotated_tsv(&self, abox: &ABox) -> String {
        let mut header = Vec::new();
        for c in &self.columns {
            header.push(c.clone());
            header.push(format!("{c}_justification"));
        }
        let mut out = header.join("\t");
        out.push('\n');
        for row in &self.rows {
            let mut cells = Vec::new();
            for iri in row {
                cells.push(iri.to_string());
                let justification = abox
                    .class_assertions()
                    .filter(|(i, _, _)| *i == iri)
                    .find_map(|(_, _, origin)| origin.justification())
                    .unwrap_or("");
                cells.push(justification.replace(['\t', '\n'], " "));
            }
            out.push_str(&cells.join("\t"));
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone)]
enum Slot {
    Var(usize),
    Const(Iri),
}

#[derive(Debug, Clone)]
enum Compiled {
    Member(Slot, Slot),
    Link(Slot, Slot, Slot),
}

/// The facts a query runs over: stated plus inferred property links, and
/// class memberships expanded through the subclass hierarchy.
struct Graph {
    members: BTreeSet<(Iri, Iri)>,
    links: BTreeSet<(Iri, Iri, Iri)>,
}

impl Graph {
    fn new(tbox: &TBox, abox: &ABox) -> Self {
        let mut members = BTreeSet::new();
        for (individual, class, _) in abox.class_assertions() {
            for sup in tbox.superclasses(class) {
                members.insert((individual.clone(), sup));
            }
        }
        let links = abox
            .property_assertions()
            .map(|(s, p, o, _)| (s.clone(), p.clone(), o.clone()))
            .collect();
        Graph { members, links }
    }
}

fn resolve(term: &QueryTerm, prefixes: &PrefixTable, vars: &mut Vec<String>) -> Result<Slot, QueryError> {
    match term {
        QueryTerm::Variable(v) => {
            let index = vars.iter().position(|x| x == v).unwrap_or_else(|| {
                vars.push(v.clone());
                vars.len() - 1
            });
            Ok(Slot::Var(index))
        }
        QueryTerm::Iri(full) => prefixes
            .compact(full)
            .map(Slot::Const)
            .ok_or_else(|| QueryError::UnresolvedIri(full.clone())),
        QueryTerm::A => unreachable!("'a' only appears in predicate position"),
    }
}

/// Runs a query. Class and property IRIs missing from the TBox produce a
/// warning and an empty result rather than an error.
pub fn execute(query: &Query, prefixes: &PrefixTable, tbox: &TBox, abox: &ABox) -> Result<QueryOutput, QueryError> {
    let mut vars: Vec<String> = Vec::new();
    let mut compiled = Vec::new();
    let mut warnings = Vec::new();
    for pattern in &query.patterns {
        let subject = resolve(&pattern.subject, prefixes, &mut vars)?;
        match &pattern.predicate {
            QueryTerm::A => {
                let object = resolve(&pattern.object, prefixes, &mut vars)?;
                if let Slot::Const(class) = &object {
                    if !tbox.has_class(class) {
                        if tbox.has_property(class) {
                            return Err(QueryError::BadClassObject(
                                prefixes.expand(class).unwrap_or_else(|| class.to_string()),
                            ));
                        }
                        warnings.push(format!("class {class} is not declared in the TBox"));
                    }
                }
                compiled.push(Compiled::Member(subject, object));
            }
            predicate => {
                let predicate = resolve(predicate, prefixes, &mut vars)?;
                if let Slot::Const(property) = &predicate {
                    if !tbox.has_property(property) {
                        warnings.push(format!("property {property} is not declared in the TBox"));
                    }
                }
                let object = resolve(&pattern.object, prefixes, &mut vars)?;
                compiled.push(Compiled::Link(subject, predicate, object));
            }
        }
    }
    let columns = query.select_vars.clone();
    if !warnings.is_empty() {
        for w in &warnings {
            warn!("{w}");
        }
        return Ok(QueryOutput {
            columns,
            rows: Vec::new(),
            warnings,
        });
    }
    let projection: Vec<usize> = columns
        .iter()
        .map(|c| vars.iter().position(|v| v == c).expect("select vars checked at parse"))
        .collect();
    let graph = Graph::new(tbox, abox);
    let mut rows = BTreeSet::new();
    let mut binding = vec![None; vars.len()];
    join(&graph, &compiled, &mut binding, &projection, &mut rows);
    Ok(QueryOutput {
        columns,
        rows: rows.into_iter().collect(),
        warnings,
    })
}

fn bind(slot: &Slot, value: &Iri, binding: &mut [Option<Iri>], undo: &mut Vec<usize>) -> bool {
    match slot {
        Slot::Const(c) => c == value,
        Slot::Var(v) => match &binding[*v] {
            Some(existing) => existing == value,
            None => {
                binding[*v] = Some(value.clone());
                undo.push(*v);
                true
            }
        },
    }
}

fn join(
    graph: &Graph,
    patterns: &[Compiled],
    binding: &mut Vec<Option<Iri>>,
    projection: &[usize],
    rows: &mut BTreeSet<BindingRow>,
) {
    let Some((pattern, rest)) = patterns.split_first() else {
        rows.insert(
            projection
                .iter()
                .map(|&i| binding[i].clone().expect("projected variable bound"))
                .collect(),
        );
        return;
    };
    let mut undo = Vec::new();
    match pattern {
        Compiled::Member(s, c) => {
            for (individual, class) in &graph.members {
                if bind(s, individual, binding, &mut undo) && bind(c, class, binding, &mut undo) {
                    join(graph, rest, binding, projection, rows);
                }
                for v in undo.drain(..) {
                    binding[v] = None;
                }
            }
        }
        Compiled::Link(s, p, o) => {
            for (subject, property, object) in &graph.links {
                if bind(s, subject, binding, &mut undo)
                    && bind(p, property, binding, &mut undo)
                    && bind(o, object, binding, &mut undo)
                {
                    join(graph, rest, binding, projection, rows);
                }
                for v in undo.drain(..) {
                    binding[v] = None;
                }
            }
        }
    }
}
