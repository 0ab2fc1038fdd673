use std::collections::BTreeSet;

use proptest::prelude::*;
use ruleweave::ontology::{ABox, Iri, PrefixTable, TBox};
use ruleweave::query::{execute, parse_query, QueryTerm};

const BASE: &str = "http://example.org/t#";
const INST: &str = "http://example.org/i#";

fn prefixes() -> PrefixTable {
    let mut p = PrefixTable::new();
    p.insert("t", BASE);
    p.insert("i", INST);
    p
}

fn tbox() -> TBox {
    let mut t = TBox::new();
    for c in 0..3 {
        t.declare_class(Iri::parse(&format!("t:C{c}")).unwrap()).unwrap();
    }
    t.add_subclass(Iri::parse("t:C2").unwrap(), Iri::parse("t:C0").unwrap())
        .unwrap();
    for p in 0..2 {
        t.declare_property(Iri::parse(&format!("t:p{p}")).unwrap(), None, None)
            .unwrap();
    }
    t
}

fn ind(i: usize) -> String {
    format!("i:n{i}")
}

#[derive(Debug, Clone)]
enum Pos {
    Var(usize),
    Ind(usize),
}

#[derive(Debug, Clone)]
enum Pat {
    Class(Pos, usize),
    Link(Pos, usize, Pos),
}

fn pos() -> impl Strategy<Value = Pos> {
    prop_oneof![4 => (0usize..3).prop_map(Pos::Var), 1 => (0usize..8).prop_map(Pos::Ind)]
}

fn pat() -> impl Strategy<Value = Pat> {
    prop_oneof![
        (pos(), 0usize..3).prop_map(|(s, c)| Pat::Class(s, c)),
        (pos(), 0usize..2, pos()).prop_map(|(s, p, o)| Pat::Link(s, p, o)),
    ]
}

fn render(p: &Pos) -> String {
    match p {
        Pos::Var(v) => format!("?v{v}"),
        Pos::Ind(i) => format!("i:n{i}"),
    }
}

/// Tries every assignment of the individuals to the query variables.
fn brute_force(abox: &ABox, tbox: &TBox, pats: &[Pat], vars: &[usize], n: usize) -> BTreeSet<Vec<String>> {
    let holds = |assign: &[usize], p: &Pat| -> bool {
        let value = |p: &Pos| match p {
            Pos::Var(v) => ind(assign[vars.iter().position(|x| x == v).unwrap()]),
            Pos::Ind(i) => ind(*i),
        };
        match p {
            Pat::Class(s, c) => {
                let s = Iri::parse(&value(s)).unwrap();
                abox.types_of(tbox, &s)
                    .contains(&Iri::parse(&format!("t:C{c}")).unwrap())
            }
            Pat::Link(s, p, o) => abox.has_property_assertion(
                &Iri::parse(&value(s)).unwrap(),
                &Iri::parse(&format!("t:p{p}")).unwrap(),
                &Iri::parse(&value(o)).unwrap(),
            ),
        }
    };
    let mut rows = BTreeSet::new();
    let total = n.pow(vars.len() as u32);
    for code in 0..total {
        let mut assign = Vec::new();
        let mut rest = code;
        for _ in vars {
            assign.push(rest % n);
            rest /= n;
        }
        if pats.iter().all(|p| holds(&assign, p)) {
            rows.insert(assign.iter().map(|&i| ind(i)).collect());
        }
    }
    rows
}

fn build(n: usize, classes: &[(usize, usize)], links: &[(usize, usize, usize)]) -> ABox {
    let tbox = tbox();
    let mut abox = ABox::new();
    for i in 0..n {
        abox.register_individual(Iri::parse(&ind(i)).unwrap());
    }
    for &(i, c) in classes {
        abox.assert_class(
            &tbox,
            Iri::parse(&ind(i % n)).unwrap(),
            Iri::parse(&format!("t:C{c}")).unwrap(),
            "g",
        )
        .unwrap();
    }
    for &(s, p, o) in links {
        abox.assert_property(
            &tbox,
            Iri::parse(&ind(s % n)).unwrap(),
            Iri::parse(&format!("t:p{p}")).unwrap(),
            Iri::parse(&ind(o % n)).unwrap(),
            "g",
        )
        .unwrap();
    }
    abox
}

fn query_text(pats: &[Pat]) -> (String, Vec<usize>) {
    let mut vars = Vec::new();
    let mut body = Vec::new();
    for p in pats {
        let text = match p {
            Pat::Class(s, c) => format!("{} a t:C{c}", render(s)),
            Pat::Link(s, prop, o) => format!("{} t:p{prop} {}", render(s), render(o)),
        };
        for pos in match p {
            Pat::Class(s, _) => vec![s],
            Pat::Link(s, _, o) => vec![s, o],
        } {
            if let Pos::Var(v) = pos {
                if !vars.contains(v) {
                    vars.push(*v);
                }
            }
        }
        body.push(text);
    }
    (
        format!(
            "PREFIX t: <{BASE}>\nPREFIX i: <{INST}>\nSELECT * WHERE {{ {} }}",
            body.join(" . ")
        ),
        vars,
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn execute_matches_brute_force(
        n in 1usize..=8,
        classes in proptest::collection::vec((0usize..8, 0usize..3), 0..10),
        links in proptest::collection::vec((0usize..8, 0usize..2, 0usize..8), 0..14),
        pats in proptest::collection::vec(pat(), 1..=3),
    ) {
        let pats: Vec<Pat> = pats
            .into_iter()
            .map(|p| match p {
                Pat::Class(Pos::Ind(i), c) => Pat::Class(Pos::Ind(i % n), c),
                Pat::Link(s, prop, o) => Pat::Link(
                    match s { Pos::Ind(i) => Pos::Ind(i % n), v => v },
                    prop,
                    match o { Pos::Ind(i) => Pos::Ind(i % n), v => v },
                ),
                other => other,
            })
            .collect();
        let (text, vars) = query_text(&pats);
        prop_assume!(!vars.is_empty());
        let abox = build(n, &classes, &links);
        let tbox = tbox();
        let query = parse_query(&text).unwrap();
        let out = execute(&query, &prefixes(), &tbox, &abox).unwrap();
        let got: BTreeSet<Vec<String>> = out.rows.iter().map(|r| r.iter().map(Iri::to_string).collect()).collect();
        prop_assert_eq!(got.len(), out.rows.len(), "rows must be distinct");
        prop_assert!(out.rows.windows(2).all(|w| w[0] < w[1]), "rows must be sorted");
        prop_assert_eq!(got, brute_force(&abox, &tbox, &pats, &vars, n));
    }

    #[test]
    fn adding_a_fact_keeps_every_row(
        classes in proptest::collection::vec((0usize..6, 0usize..3), 0..8),
        links in proptest::collection::vec((0usize..6, 0usize..2, 0usize..6), 0..10),
        extra in (0usize..6, 0usize..2, 0usize..6),
        pats in proptest::collection::vec(pat(), 1..=3),
    ) {
        let (text, vars) = query_text(&pats);
        prop_assume!(!vars.is_empty());
        let tbox = tbox();
        let query = parse_query(&text).unwrap();
        let before = execute(&query, &prefixes(), &tbox, &build(6, &classes, &links)).unwrap();
        let mut grown = links.clone();
        grown.push(extra);
        let after = execute(&query, &prefixes(), &tbox, &build(6, &classes, &grown)).unwrap();
        for row in &before.rows {
            prop_assert!(after.rows.contains(row));
        }
    }
}

#[test]
fn select_star_orders_by_first_appearance() {
    let q = parse_query(&format!(
        "PREFIX t: <{BASE}> SELECT * WHERE {{ ?b t:p0 ?a . ?a a t:C0 }}"
    ))
    .unwrap();
    assert_eq!(q.select_vars, ["b", "a"]);
    assert!(matches!(q.patterns[1].predicate, QueryTerm::A));
}
