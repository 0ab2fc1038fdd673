//! Random small ontologies: at most 6 classes, 4 properties, 5 rules of up
//! to 4 antecedent atoms, and 8 individuals.

use proptest::prelude::*;
use ruleweave::ontology::{ABox, Atom, Iri, SwrlRule, TBox, Term};

const VARS: [&str; 4] = ["x", "y", "z", "w"];

#[derive(Debug, Clone)]
pub struct WorldSpec {
    classes: usize,
    properties: usize,
    individuals: usize,
    subclass: Vec<(usize, usize)>,
    rules: Vec<(Vec<AtomSpec>, AtomSpec)>,
    class_facts: Vec<(usize, usize)>,
    property_facts: Vec<(usize, usize, usize)>,
}

#[derive(Debug, Clone)]
enum TermSpec {
    Var(usize),
    Ind(usize),
}

#[derive(Debug, Clone)]
enum AtomSpec {
    Class(usize, TermSpec),
    Property(usize, TermSpec, TermSpec),
}

fn class(i: usize) -> Iri {
    Iri::parse(&format!("t:C{i}")).unwrap()
}

fn property(i: usize) -> Iri {
    Iri::parse(&format!("t:p{i}")).unwrap()
}

fn individual(i: usize) -> Iri {
    Iri::parse(&format!("i:n{i}")).unwrap()
}

fn term_strategy(individuals: usize) -> impl Strategy<Value = TermSpec> {
    prop_oneof![
        6 => (0..VARS.len()).prop_map(TermSpec::Var),
        1 => (0..individuals).prop_map(TermSpec::Ind),
    ]
}

fn atom_strategy(classes: usize, properties: usize, individuals: usize) -> BoxedStrategy<AtomSpec> {
    let class_atom = (0..classes, term_strategy(individuals)).prop_map(|(c, t)| AtomSpec::Class(c, t));
    if properties == 0 {
        class_atom.boxed()
    } else {
        let prop_atom = (0..properties, term_strategy(individuals), term_strategy(individuals))
            .prop_map(|(p, s, o)| AtomSpec::Property(p, s, o));
        prop_oneof![class_atom, prop_atom].boxed()
    }
}

pub fn world_strategy() -> impl Strategy<Value = WorldSpec> {
    (1usize..=6, 0usize..=4, 1usize..=8)
        .prop_flat_map(|(classes, properties, individuals)| {
            let subclass = proptest::collection::vec((0..classes, 0..classes), 0..=4);
            let rule = (
                proptest::collection::vec(atom_strategy(classes, properties, individuals), 1..=4),
                atom_strategy(classes, properties, individuals),
            );
            let rules = proptest::collection::vec(rule, 0..=5);
            let class_facts = proptest::collection::vec((0..individuals, 0..classes), 0..=10);
            let property_facts = if properties == 0 {
                Just(Vec::new()).boxed()
            } else {
                proptest::collection::vec((0..individuals, 0..properties, 0..individuals), 0..=12).boxed()
            };
            (
                Just((classes, properties, individuals)),
                subclass,
                rules,
                class_facts,
                property_facts,
            )
        })
        .prop_map(
            |((classes, properties, individuals), subclass, rules, class_facts, property_facts)| WorldSpec {
                classes,
                properties,
                individuals,
                subclass,
                rules,
                class_facts,
                property_facts,
            },
        )
}

impl WorldSpec {
    /// Builds the TBox and ABox. Unsafe consequent variables are replaced by
    /// the first antecedent variable (or a constant), and subclass edges only
    /// point from higher to lower class indices, so the result is always
    /// valid.
    pub fn build(&self) -> (TBox, ABox) {
        let mut tbox = TBox::new();
        for c in 0..self.classes {
            tbox.declare_class(class(c)).unwrap();
        }
        for p in 0..self.properties {
            tbox.declare_property(property(p), None, None).unwrap();
        }
        for &(a, b) in &self.subclass {
            if a > b {
                tbox.add_subclass(class(a), class(b)).unwrap();
            }
        }
        for (n, (antecedent, consequent)) in self.rules.iter().enumerate() {
            let antecedent: Vec<Atom> = antecedent.iter().map(to_atom).collect();
            let bound: Vec<String> = antecedent
                .iter()
                .flat_map(|a| a.variables().map(str::to_string).collect::<Vec<_>>())
                .collect();
            let fix = |t: &TermSpec| -> Term {
                match t {
                    TermSpec::Var(v) if bound.iter().any(|b| b == VARS[*v]) => Term::var(VARS[*v]),
                    TermSpec::Var(_) => match bound.first() {
                        Some(b) => Term::var(b),
                        None => Term::Individual(individual(0)),
                    },
                    TermSpec::Ind(i) => Term::Individual(individual(*i)),
                }
            };
            let consequent = match consequent {
                AtomSpec::Class(c, t) => Atom::class(class(*c), fix(t)),
                AtomSpec::Property(p, s, o) => Atom::property(property(*p), fix(s), fix(o)),
            };
            let rule = SwrlRule::new(format!("r{n}"), antecedent, consequent).unwrap();
            tbox.add_rule(rule).unwrap();
        }
        let mut abox = ABox::new();
        for i in 0..self.individuals {
            abox.register_individual(individual(i));
        }
        for &(i, c) in &self.class_facts {
            abox.assert_class(&tbox, individual(i), class(c), "generated").unwrap();
        }
        for &(s, p, o) in &self.property_facts {
            abox.assert_property(&tbox, individual(s), property(p), individual(o), "generated")
                .unwrap();
        }
        (tbox, abox)
    }

    pub fn class_fact_candidates(&self) -> Vec<(Iri, Iri)> {
        let mut out = Vec::new();
        for i in 0..self.individuals {
            for c in 0..self.classes {
                out.push((individual(i), class(c)));
            }
        }
        out
    }
}

fn to_term(t: &TermSpec) -> Term {
    match t {
        TermSpec::Var(v) => Term::var(VARS[*v]),
        TermSpec::Ind(i) => Term::Individual(individual(*i)),
    }
}

fn to_atom(a: &AtomSpec) -> Atom {
    match a {
        AtomSpec::Class(c, t) => Atom::class(class(*c), to_term(t)),
        AtomSpec::Property(p, s, o) => Atom::property(property(*p), to_term(s), to_term(o)),
    }
}
