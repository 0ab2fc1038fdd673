//! Naive iterate-until-nothing-changes fixpoint. Shares only the data types
//! with the engine under test.

use std::collections::BTreeSet;

use ruleweave::ontology::{ABox, Atom, Iri, SwrlRule, TBox, Term};

type Fact = (Iri, String, Iri);

fn expand(tbox: &TBox, stated: &BTreeSet<(Iri, Iri)>) -> BTreeSet<(Iri, Iri)> {
    let mut members = stated.clone();
    loop {
        let mut grew = false;
        for (sub, sup) in tbox.subclass_axioms() {
            let add: Vec<(Iri, Iri)> = members
                .iter()
                .filter(|(_, c)| c == sub)
                .map(|(i, _)| (i.clone(), sup.clone()))
                .collect();
            for m in add {
                grew |= members.insert(m);
            }
        }
        if !grew {
            return members;
        }
    }
}

fn matches(
    atoms: &[Atom],
    members: &BTreeSet<(Iri, Iri)>,
    links: &BTreeSet<(Iri, Iri, Iri)>,
    env: &mut Vec<(String, Iri)>,
    out: &mut Vec<Vec<(String, Iri)>>,
) {
    let Some((atom, rest)) = atoms.split_first() else {
        out.push(env.clone());
        return;
    };
    let lookup = |env: &Vec<(String, Iri)>, t: &Term| -> Option<Iri> {
        match t {
            Term::Individual(i) => Some(i.clone()),
            Term::Variable(v) => env.iter().find(|(n, _)| n == v).map(|(_, i)| i.clone()),
        }
    };
    let try_bind = |env: &mut Vec<(String, Iri)>, t: &Term, value: &Iri| -> bool {
        match lookup(env, t) {
            Some(existing) => existing == *value,
            None => {
                if let Term::Variable(v) = t {
                    env.push((v.clone(), value.clone()));
                }
                true
            }
        }
    };
    match atom {
        Atom::Class { class, term } => {
            for (i, c) in members {
                if c != class {
                    continue;
                }
                let mark = env.len();
                if try_bind(env, term, i) {
                    matches(rest, members, links, env, out);
                }
                env.truncate(mark);
            }
        }
        Atom::Property {
            property,
            subject,
            object,
        } => {
            for (s, p, o) in links {
                if p != property {
                    continue;
                }
                let mark = env.len();
                if try_bind(env, subject, s) && try_bind(env, object, o) {
                    matches(rest, members, links, env, out);
                }
                env.truncate(mark);
            }
        }
    }
}

fn instantiate(rule: &SwrlRule, env: &[(String, Iri)]) -> Fact {
    let value = |t: &Term| match t {
        Term::Individual(i) => i.clone(),
        Term::Variable(v) => env.iter().find(|(n, _)| n == v).unwrap().1.clone(),
    };
    match &rule.consequent {
        Atom::Class { class, term } => (value(term), "a".to_string(), class.clone()),
        Atom::Property {
            property,
            subject,
            object,
        } => (value(subject), property.to_string(), value(object)),
    }
}

/// Facts derived by at least one rule instantiation at the fixpoint,
/// excluding facts that were asserted in the input.
pub fn inferred_facts(tbox: &TBox, abox: &ABox) -> BTreeSet<Fact> {
    let asserted_classes: BTreeSet<(Iri, Iri)> = abox
        .class_assertions()
        .map(|(i, c, _)| (i.clone(), c.clone()))
        .collect();
    let asserted_links: BTreeSet<(Iri, Iri, Iri)> = abox
        .property_assertions()
        .map(|(s, p, o, _)| (s.clone(), p.clone(), o.clone()))
        .collect();
    let mut classes = asserted_classes.clone();
    let mut links = asserted_links.clone();
    let mut derived = BTreeSet::new();
    loop {
        let members = expand(tbox, &classes);
        let mut new = Vec::new();
        for rule in tbox.rules() {
            let mut envs = Vec::new();
            matches(&rule.antecedent, &members, &links, &mut Vec::new(), &mut envs);
            for env in envs {
                new.push(instantiate(rule, &env));
            }
        }
        let mut changed = false;
        for fact in new {
            if derived.insert(fact.clone()) {
                changed = true;
                let (s, p, o) = fact;
                if p == "a" {
                    classes.insert((s, o));
                } else {
                    links.insert((s, Iri::parse(&p).unwrap(), o));
                }
            }
        }
        if !changed {
            break;
        }
    }
    derived
        .into_iter()
        .filter(|(s, p, o)| {
            if p == "a" {
                !asserted_classes.contains(&(s.clone(), o.clone()))
            } else {
                !asserted_links.contains(&(s.clone(), Iri::parse(p).unwrap(), o.clone()))
            }
        })
        .collect()
}
