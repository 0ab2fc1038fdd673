//! Forward chaining over the SWRL subset: class and object-property atoms,
//! no built-ins, no negation.
//!
//! Evaluation is semi-naive. Each round only considers rule instantiations
//! that use at least one fact derived in the previous round, so every
//! instantiation is enumerated exactly once. Rules are visited in
//! declaration order and bindings in IRI order, which makes the `fired` log
//! reproducible. The fixpoint itself does not depend on that order.
//!
//! Absent facts never match (open world). Inconsistency is reported, not
//! raised, and does not stop rule application.

mod engine;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::ontology::{ABox, Iri, TBox};

pub use engine::Reasoner;

/// Reflexive-transitive superclasses of every declared class.
pub fn subclass_closure(tbox: &TBox) -> BTreeMap<Iri, BTreeSet<Iri>> {
    tbox.classes()
        .iter()
        .map(|c| (c.clone(), tbox.superclasses(c)))
        .collect()
}

/// One rule application that produced a new fact.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Firing {
    pub rule: String,
    pub bindings: BTreeMap<String, Iri>,
}

/// An individual that belongs to two classes declared disjoint.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub individual: Iri,
    pub class_a: Iri,
    pub class_b: Iri,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InferenceResult {
    /// Input assertions plus everything inferred, with origins.
    pub abox: ABox,
    pub consistent: bool,
    pub violations: Vec<Violation>,
    pub fired: Vec<Firing>,
    /// Expanded class memberships per individual.
    #[serde(skip)]
    types: BTreeMap<Iri, BTreeSet<Iri>>,
}

/// Result of asking whether an individual belongs to a class.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Classification {
    pub member: bool,
    /// The individual does not occur in the ABox at all.
    pub unknown_individual: bool,
}

impl InferenceResult {
    /// Every class the individual belongs to, through inference and the
    /// subclass hierarchy.
    pub fn types_of(&self, individual: &Iri) -> Option<&BTreeSet<Iri>> {
        self.types.get(individual)
    }

    pub fn classify(&self, individual: &Iri, target_class: &Iri) -> Classification {
        let unknown_individual = !self.abox.contains_individual(individual);
        let member = self.types.get(individual).is_some_and(|t| t.contains(target_class));
        Classification {
            member,
            unknown_individual,
        }
    }

    /// Inferred facts only, rendered as `(subject, predicate, object)` with
    /// class membership using the predicate `a`. Useful for set comparisons.
    pub fn inferred_facts(&self) -> BTreeSet<(Iri, String, Iri)> {
        let classes = self
            .abox
            .class_assertions()
            .filter(|(_, _, o)| o.is_inferred())
            .map(|(i, c, _)| (i.clone(), "a".to_string(), c.clone()));
        let props = self
            .abox
            .property_assertions()
            .filter(|(_, _, _, o)| o.is_inferred())
            .map(|(s, p, o, _)| (s.clone(), p.to_string(), o.clone()));
        classes.chain(props).collect()
    }
}

/// Runs the rules of `tbox` over `abox` to a fixpoint.
pub fn forward_chain(tbox: &TBox, abox: &ABox) -> InferenceResult {
    Reasoner::new(tbox).forward_chain(abox)
}

/// Disjointness violations in `abox` without applying rules.
pub fn check_consistency(tbox: &TBox, abox: &ABox) -> Vec<Violation> {
    let types: BTreeMap<Iri, BTreeSet<Iri>> = abox
        .individuals()
        .iter()
        .map(|i| (i.clone(), abox.types_of(tbox, i)))
        .collect();
    violations(tbox, &types)
}

/// Convenience wrapper for [`InferenceResult::classify`].
pub fn classify(result: &InferenceResult, individual: &Iri, target_class: &Iri) -> Classification {
    result.classify(individual, target_class)
}

/// One violation per offending individual, naming the first violated
/// disjointness axiom in declaration order.
pub(crate) fn violations(tbox: &TBox, types: &BTreeMap<Iri, BTreeSet<Iri>>) -> Vec<Violation> {
    types
        .iter()
        .filter_map(|(individual, classes)| {
            tbox.disjoint_axioms()
                .iter()
                .find(|(a, b)| classes.contains(a) && classes.contains(b))
                .map(|(a, b)| Violation {
                    individual: individual.clone(),
                    class_a: a.clone(),
                    class_b: b.clone(),
                })
        })
        .collect()
}
