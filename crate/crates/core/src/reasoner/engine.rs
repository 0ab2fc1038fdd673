use std::collections::{BTreeMap, BTreeSet};

use log::trace;

use super::{violations, Firing, InferenceResult};
use crate::ontology::{ABox, Atom, Iri, Origin, TBox, Term};

#[derive(Debug, Clone)]
enum Slot {
    Var(usize),
    Const(Iri),
}

#[derive(Debug, Clone)]
enum Pattern {
    Class(Iri, Slot),
    Property(Iri, Slot, Slot),
}

#[derive(Debug, Clone)]
struct CompiledRule {
    name: String,
    variables: Vec<String>,
    antecedent: Vec<Pattern>,
    consequent: Pattern,
}

impl CompiledRule {
    fn compile(rule: &crate::ontology::SwrlRule) -> Self {
        let variables = rule.variable_order();
        let slot = |term: &Term| match term {
            Term::Variable(v) => Slot::Var(variables.iter().position(|x| x == v).expect("safe rule")),
            Term::Individual(iri) => Slot::Const(iri.clone()),
        };
        let pattern = |atom: &Atom| match atom {
            Atom::Class { class, term } => Pattern::Class(class.clone(), slot(term)),
            Atom::Property {
                property,
                subject,
                object,
            } => Pattern::Property(property.clone(), slot(subject), slot(object)),
        };
        CompiledRule {
            name: rule.name.clone(),
            antecedent: rule.antecedent.iter().map(pattern).collect(),
            consequent: pattern(&rule.consequent),
            variables: variables.clone(),
        }
    }
}

/// Class memberships (already closed under subclassing) and property links.
#[derive(Debug, Default, Clone)]
struct FactStore {
    members: BTreeMap<Iri, BTreeSet<Iri>>,
    links: BTreeMap<Iri, BTreeSet<(Iri, Iri)>>,
}

impl FactStore {
    fn is_empty(&self) -> bool {
        self.members.values().all(BTreeSet::is_empty) && self.links.values().all(BTreeSet::is_empty)
    }

    fn has_member(&self, class: &Iri, individual: &Iri) -> bool {
        self.members.get(class).is_some_and(|m| m.contains(individual))
    }

    fn has_link(&self, property: &Iri, subject: &Iri, object: &Iri) -> bool {
        self.links
            .get(property)
            .is_some_and(|l| l.contains(&(subject.clone(), object.clone())))
    }

    fn add_member(&mut self, class: Iri, individual: Iri) {
        self.members.entry(class).or_default().insert(individual);
    }

    fn add_link(&mut self, property: Iri, subject: Iri, object: Iri) {
        self.links.entry(property).or_default().insert((subject, object));
    }

    fn extend(&mut self, other: &FactStore) {
        for (class, members) in &other.members {
            self.members
                .entry(class.clone())
                .or_default()
                .extend(members.iter().cloned());
        }
        for (property, links) in &other.links {
            self.links
                .entry(property.clone())
                .or_default()
                .extend(links.iter().cloned());
        }
    }
}

/// Which slice of the facts an atom is matched against in one semi-naive
/// pass: the previous round's new facts, everything before them, or all.
#[derive(Debug, Clone, Copy)]
enum View {
    Delta,
    Old,
    Full,
}

struct Round<'a> {
    full: &'a FactStore,
    delta: &'a FactStore,
}

impl Round<'_> {
    fn member_in(&self, view: View, class: &Iri, individual: &Iri) -> bool {
        match view {
            View::Delta => self.delta.has_member(class, individual),
            View::Old => self.full.has_member(class, individual) && !self.delta.has_member(class, individual),
            View::Full => self.full.has_member(class, individual),
        }
    }

    fn link_in(&self, view: View, property: &Iri, subject: &Iri, object: &Iri) -> bool {
        match view {
            View::Delta => self.delta.has_link(property, subject, object),
            View::Old => {
                self.full.has_link(property, subject, object) && !self.delta.has_link(property, subject, object)
            }
            View::Full => self.full.has_link(property, subject, object),
        }
    }

    fn source(&self, view: View) -> &FactStore {
        match view {
            View::Delta => self.delta,
            View::Old | View::Full => self.full,
        }
    }

    fn join(
        &self,
        patterns: &[Pattern],
        delta_at: usize,
        index: usize,
        binding: &mut Vec<Option<Iri>>,
        out: &mut BTreeSet<Vec<Iri>>,
    ) {
        let Some(pattern) = patterns.get(index) else {
            out.insert(
                binding
                    .iter()
                    .map(|b| b.clone().expect("all variables bound"))
                    .collect(),
            );
            return;
        };
        let view = match index.cmp(&delta_at) {
            std::cmp::Ordering::Less => View::Old,
            std::cmp::Ordering::Equal => View::Delta,
            std::cmp::Ordering::Greater => View::Full,
        };
        match pattern {
            Pattern::Class(class, slot) => match resolve(slot, binding) {
                Some(individual) => {
                    if self.member_in(view, class, &individual) {
                        self.join(patterns, delta_at, index + 1, binding, out);
                    }
                }
                None => {
                    let Slot::Var(v) = slot else { unreachable!() };
                    let Some(members) = self.source(view).members.get(class) else {
                        return;
                    };
                    for individual in members {
                        if self.member_in(view, class, individual) {
                            binding[*v] = Some(individual.clone());
                            self.join(patterns, delta_at, index + 1, binding, out);
                        }
                    }
                    binding[*v] = None;
                }
            },
            Pattern::Property(property, s_slot, o_slot) => {
                let subject = resolve(s_slot, binding);
                let object = resolve(o_slot, binding);
                if let (Some(s), Some(o)) = (&subject, &object) {
                    if self.link_in(view, property, s, o) {
                        self.join(patterns, delta_at, index + 1, binding, out);
                    }
                    return;
                }
                let Some(links) = self.source(view).links.get(property) else {
                    return;
                };
                let candidates: Box<dyn Iterator<Item = &(Iri, Iri)>> = match &subject {
                    Some(s) => Box::new(
                        links
                            .range((s.clone(), Iri::lowest())..)
                            .take_while(move |(ls, _)| ls == s),
                    ),
                    None => Box::new(links.iter()),
                };
                for (s, o) in candidates {
                    if object.as_ref().is_some_and(|bound| bound != o) {
                        continue;
                    }
                    if !self.link_in(view, property, s, o) {
                        continue;
                    }
                    let saved = binding.clone();
                    if !bind(s_slot, s, binding) || !bind(o_slot, o, binding) {
                        *binding = saved;
                        continue;
                    }
                    self.join(patterns, delta_at, index + 1, binding, out);
                    *binding = saved;
                }
            }
        }
    }
}

fn resolve(slot: &Slot, binding: &[Option<Iri>]) -> Option<Iri> {
    match slot {
        Slot::Const(iri) => Some(iri.clone()),
        Slot::Var(v) => binding[*v].clone(),
    }
}

/// Binds a variable slot, or checks that an already bound slot agrees.
fn bind(slot: &Slot, value: &Iri, binding: &mut [Option<Iri>]) -> bool {
    match slot {
        Slot::Const(iri) => iri == value,
        Slot::Var(v) => match &binding[*v] {
            Some(existing) => existing == value,
            None => {
                binding[*v] = Some(value.clone());
                true
            }
        },
    }
}

/// Rule engine bound to one TBox. Cheap to share across threads; each
/// [`Reasoner::forward_chain`] call works on its own copy of the ABox.
#[derive(Debug, Clone)]
pub struct Reasoner<'t> {
    tbox: &'t TBox,
    closure: BTreeMap<Iri, BTreeSet<Iri>>,
    rules: Vec<CompiledRule>,
}

impl<'t> Reasoner<'t> {
    pub fn new(tbox: &'t TBox) -> Self {
        Reasoner {
            tbox,
            closure: super::subclass_closure(tbox),
            rules: tbox.rules().iter().map(CompiledRule::compile).collect(),
        }
    }

    fn supers(&self, class: &Iri) -> BTreeSet<Iri> {
        self.closure
            .get(class)
            .cloned()
            .unwrap_or_else(|| [class.clone()].into())
    }

    pub fn forward_chain(&self, abox: &ABox) -> InferenceResult {
        let mut out = abox.clone();
        for constant in self.tbox.rule_constants() {
            out.register_individual(constant.clone());
        }
        let mut fired = Vec::new();

        let mut delta = FactStore::default();
        for (individual, class, _) in abox.class_assertions() {
            for sup in self.supers(class) {
                delta.add_member(sup, individual.clone());
            }
        }
        for (s, p, o, _) in abox.property_assertions() {
            delta.add_link(p.clone(), s.clone(), o.clone());
        }

        let mut full = FactStore::default();
        let mut round = 0usize;
        while !delta.is_empty() {
            full.extend(&delta);
            let mut next = FactStore::default();
            let view = Round {
                full: &full,
                delta: &delta,
            };
            for rule in &self.rules {
                let mut bindings = BTreeSet::new();
                for delta_at in 0..rule.antecedent.len() {
                    let mut binding = vec![None; rule.variables.len()];
                    view.join(&rule.antecedent, delta_at, 0, &mut binding, &mut bindings);
                }
                for values in bindings {
                    let bound: Vec<Option<Iri>> = values.iter().cloned().map(Some).collect();
                    let new_fact = match &rule.consequent {
                        Pattern::Class(class, slot) => {
                            let individual = resolve(slot, &bound).expect("safe rule");
                            for sup in self.supers(class) {
                                if !full.has_member(&sup, &individual) {
                                    next.add_member(sup, individual.clone());
                                }
                            }
                            out.insert_class(individual, class.clone(), Origin::Inferred(rule.name.clone()))
                        }
                        Pattern::Property(property, s_slot, o_slot) => {
                            let s = resolve(s_slot, &bound).expect("safe rule");
                            let o = resolve(o_slot, &bound).expect("safe rule");
                            if !full.has_link(property, &s, &o) {
                                next.add_link(property.clone(), s.clone(), o.clone());
                            }
                            out.insert_property(s, property.clone(), o, Origin::Inferred(rule.name.clone()))
                        }
                    };
                    if new_fact {
                        fired.push(Firing {
                            rule: rule.name.clone(),
                            bindings: rule.variables.iter().cloned().zip(values).collect(),
                        });
                    }
                }
            }
            trace!("round {round}: {} firings so far", fired.len());
            round += 1;
            delta = next;
        }

        let mut types: BTreeMap<Iri, BTreeSet<Iri>> =
            out.individuals().iter().map(|i| (i.clone(), BTreeSet::new())).collect();
        for (class, members) in &full.members {
            for individual in members {
                types.entry(individual.clone()).or_default().insert(class.clone());
            }
        }
        let violations = violations(self.tbox, &types);
        InferenceResult {
            abox: out,
            consistent: violations.is_empty(),
            violations,
            fired,
            types,
        }
    }
}
