//! Acceptance checks. Prints one PASS/FAIL line per criterion.
//!
//! The process exits non-zero when a criterion fails that is not listed in
//! `KNOWN_FAILURES`, or when a listed one unexpectedly passes.

mod support;

use std::collections::BTreeSet;
use std::panic::{self, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use proptest::strategy::{Strategy, ValueTree};
use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};
use ruleweave::evaluation::{aggregate, paired_t_test, read_f1_grid, ConfusionCounts, Level};
use ruleweave::extraction::{HttpBackend, HttpConfig, API_KEY_ENV};
use ruleweave::ontology::{Atom, Term};
use ruleweave::pipeline::{write_traces, Condition, Outcome, Pipeline, TraceHeader};
use ruleweave::query::{execute, parse_query};
use ruleweave::reasoner::forward_chain;
use ruleweave::{ABox, Iri, TaskDefinition};
use support::corpus::{dataset, replay, task, TASKS};
use support::{fixture, naive, worlds};

/// Criteria that cannot hold as written, with the reason.
const KNOWN_FAILURES: &[(u32, &str)] = &[
    (
        1,
        "OutOfCourtStatement is a subclass of Statement, so the hearsay subset lacking only \
         Statement(s) still entails it and the rule fires on 2 of 32 subsets",
    ),
    (
        3,
        "the 11 printed clinical-eligibility SD cells average 74.464, outside 74.4 +/- 0.05",
    ),
];

type Verdict = Result<Vec<String>, Vec<String>>;

fn check(ok: bool, pass: String, fail: String, notes: &mut Vec<String>) -> bool {
    notes.push(if ok { pass } else { fail });
    ok
}

fn finish(ok: bool, notes: Vec<String>) -> Verdict {
    if ok {
        Ok(notes)
    } else {
        Err(notes)
    }
}

const VERBATIM_QUERY: &str = "PREFIX : <http://example.org/hearsay#>
SELECT ?case ?statement ?assertion
WHERE {
  ?statement :belongsToCase ?case ;
             a :OutOfCourtStatement ;
             :hasAssertion ?assertion .
}
";

fn ground(term: &Term) -> Iri {
    match term {
        Term::Variable(v) => Iri::parse(&format!("inst:acc_{v}")).unwrap(),
        Term::Individual(i) => i.clone(),
    }
}

fn fact_line(atom: &Atom) -> String {
    match atom {
        Atom::Class { class, term } => format!("{}\ta\t{class}\tasserted:\"enumerated\"", ground(term)),
        Atom::Property {
            property,
            subject,
            object,
        } => format!(
            "{}\t{property}\t{}\tasserted:\"enumerated\"",
            ground(subject),
            ground(object)
        ),
    }
}

/// Subset masks for which the target class is inferred, and the masks whose
/// facts entail every antecedent atom once subclassing is applied.
fn enumerate_rule(task: &TaskDefinition) -> (usize, BTreeSet<u32>, BTreeSet<u32>, bool) {
    let rule = task.target_rules().next().expect("target rule");
    let atoms = &rule.antecedent;
    let target = match &rule.consequent {
        Atom::Class { term, .. } => ground(term),
        Atom::Property { .. } => unreachable!("target rules conclude a class"),
    };
    let mut fired = BTreeSet::new();
    let mut supported = BTreeSet::new();
    let mut oracle_agrees = true;
    for mask in 0u32..(1 << atoms.len()) {
        let lines: Vec<String> = (0..atoms.len())
            .filter(|i| mask & (1 << i) != 0)
            .map(|i| fact_line(&atoms[i]))
            .collect();
        let abox = ABox::from_triples(&lines.join("\n")).unwrap();
        let result = forward_chain(&task.tbox, &abox);
        if result.classify(&target, &task.target_class).member {
            fired.insert(mask);
        }
        oracle_agrees &= result.inferred_facts() == naive::inferred_facts(&task.tbox, &abox);
        let all_entailed = atoms.iter().all(|a| match a {
            Atom::Class { class, term } => abox.types_of(&task.tbox, &ground(term)).contains(class),
            Atom::Property {
                property,
                subject,
                object,
            } => abox.has_property_assertion(&ground(subject), property, &ground(object)),
        });
        if all_entailed {
            supported.insert(mask);
        }
    }
    (atoms.len(), fired, supported, oracle_agrees)
}

fn criterion_1() -> Verdict {
    let start = Instant::now();
    let mut notes = Vec::new();
    let mut ok = true;
    let mut tables = Vec::new();
    for id in TASKS {
        tables.push((id, enumerate_rule(&task(id))));
    }
    let elapsed = start.elapsed();
    for (id, (k, fired, supported, oracle_agrees)) in tables {
        let full = (1u32 << k) - 1;
        let exact = fired.len() == 1 && fired.contains(&full);
        ok &= check(
            exact,
            format!("{id}: inferred for exactly the full subset (1 of {})", 1 << k),
            format!(
                "{id}: inferred for {} of {} subsets (full subset: {}), expected exactly the full subset",
                fired.len(),
                1 << k,
                fired.contains(&full)
            ),
            &mut notes,
        );
        let listed: Vec<String> = fired.iter().map(|m| format!("{m:0k$b}")).collect();
        notes.push(format!("{id}: firing masks {}", listed.join(" ")));
        ok &= check(
            fired == supported,
            format!("{id}: fires exactly when every antecedent atom is supported"),
            format!("{id}: firing set differs from the supported set"),
            &mut notes,
        );
        ok &= check(
            oracle_agrees,
            format!("{id}: engine equals naive fixpoint on every subset"),
            format!("{id}: engine disagrees with the naive fixpoint"),
            &mut notes,
        );
    }
    ok &= check(
        elapsed < Duration::from_secs(1),
        format!("runtime {elapsed:?} < 1 s"),
        format!("runtime {elapsed:?} exceeds 1 s"),
        &mut notes,
    );
    finish(ok, notes)
}

fn criterion_2() -> Verdict {
    let start = Instant::now();
    let seed = [7u8; 32];
    let mut runner = TestRunner::new_with_rng(Config::default(), TestRng::from_seed(RngAlgorithm::ChaCha, &seed));
    let strategy = worlds::world_strategy();
    let mut equal = 0;
    let mut nontrivial = 0;
    for _ in 0..500 {
        let spec = strategy.new_tree(&mut runner).unwrap().current();
        let (tbox, abox) = spec.build();
        let engine = forward_chain(&tbox, &abox).inferred_facts();
        if !engine.is_empty() {
            nontrivial += 1;
        }
        if engine == naive::inferred_facts(&tbox, &abox) {
            equal += 1;
        }
    }
    let elapsed = start.elapsed();
    let mut notes = vec![format!("{nontrivial} of 500 worlds derive at least one fact")];
    let mut ok = check(
        equal == 500,
        "500/500 set-equal to the naive fixpoint".into(),
        format!("{equal}/500 set-equal to the naive fixpoint"),
        &mut notes,
    );
    ok &= check(
        elapsed < Duration::from_secs(30),
        format!("runtime {elapsed:?} < 30 s"),
        format!("runtime {elapsed:?} exceeds 30 s"),
        &mut notes,
    );
    finish(ok, notes)
}

fn grid_report() -> ruleweave::evaluation::RunReport {
    let text = std::fs::read_to_string(fixture("paper_f1_grid.csv")).unwrap();
    aggregate(&read_f1_grid(&text).unwrap())
}

fn criterion_3() -> Verdict {
    let report = grid_report();
    let mut notes = Vec::new();
    let mut ok = true;
    let per_task = [
        (Condition::FS, "hearsay", 73.2),
        (Condition::FS, "method_application", 81.7),
        (Condition::FS, "clinical_eligibility", 70.8),
        (Condition::SD, "hearsay", 75.9),
        (Condition::SD, "method_application", 88.9),
        (Condition::SD, "clinical_eligibility", 74.4),
    ];
    for (cond, t, printed) in per_task {
        let got = report.aggregate(&Level::Task(t.into()), cond).unwrap().f1 * 100.0;
        let within = (got - printed).abs() <= 0.05 + 1e-9;
        ok &= check(
            within,
            format!("{cond} {t}: {got:.3} vs {printed} (+/-0.05)"),
            format!("{cond} {t}: {got:.3} vs {printed} (+/-0.05) OUT OF TOLERANCE"),
            &mut notes,
        );
    }
    let overall = [
        (Condition::FS, 75.2),
        (Condition::CoT, 74.1),
        (Condition::SD, 79.8),
        (Condition::SdComp, 74.8),
    ];
    for (cond, printed) in overall {
        let got = report.aggregate(&Level::Overall, cond).unwrap().f1 * 100.0;
        let within = (got - printed).abs() <= 0.1 + 1e-9;
        ok &= check(
            within,
            format!("{cond} overall: {got:.3} vs {printed} (+/-0.1)"),
            format!("{cond} overall: {got:.3} vs {printed} (+/-0.1) OUT OF TOLERANCE"),
            &mut notes,
        );
    }
    finish(ok, notes)
}

fn criterion_4() -> Verdict {
    let report = grid_report();
    let sd: Vec<f64> = report.column(Condition::SD).into_values().collect();
    let fs: Vec<f64> = report.column(Condition::FS).into_values().collect();
    let sdc: Vec<f64> = report.column(Condition::SdComp).into_values().collect();
    let mut notes = Vec::new();
    let a = paired_t_test(&sd, &fs).unwrap();
    let mut ok = check(
        (2.73..=3.03).contains(&a.t) && a.p < 0.02 && (0.45..=0.55).contains(&a.dz) && a.n == 33,
        format!("SD vs FS: t({})={:.4}, p={:.5}, dz={:.4}", a.df(), a.t, a.p, a.dz),
        format!(
            "SD vs FS out of range: t({})={:.4}, p={:.5}, dz={:.4}",
            a.df(),
            a.t,
            a.p,
            a.dz
        ),
        &mut notes,
    );
    let b = paired_t_test(&sd, &sdc).unwrap();
    ok &= check(
        (3.5..=3.9).contains(&b.t) && (0.58..=0.70).contains(&b.dz) && b.n == 33,
        format!("SD vs SD_Comp: t({})={:.4}, p={:.6}, dz={:.4}", b.df(), b.t, b.p, b.dz),
        format!("SD vs SD_Comp out of range: t({})={:.4}, dz={:.4}", b.df(), b.t, b.dz),
        &mut notes,
    );
    finish(ok, notes)
}

fn criterion_5() -> Verdict {
    let t = task("hearsay");
    let iri = |s: &str| Iri::parse(s).unwrap();
    let mut abox = ABox::new();
    let statements = [
        ("s1", "h:OutOfCourtStatement", "a1", "c1"),
        ("s2", "h:OutOfCourtStatement", "a2", "c2"),
        ("s3", "h:InCourtStatement", "a3", "c3"),
    ];
    for (s, class, a, c) in statements {
        let s = iri(&format!("inst:{s}"));
        abox.assert_class(&t.tbox, s.clone(), iri(class), "typed by hand")
            .unwrap();
        abox.assert_class(&t.tbox, iri(&format!("inst:{a}")), iri("h:Assertion"), "claim")
            .unwrap();
        abox.assert_property(
            &t.tbox,
            s.clone(),
            iri("h:hasAssertion"),
            iri(&format!("inst:{a}")),
            "says",
        )
        .unwrap();
        abox.assert_property(&t.tbox, s, t.case_link.clone(), iri(&format!("inst:{c}")), "case")
            .unwrap();
    }
    let closed = forward_chain(&t.tbox, &abox).abox;
    let out = execute(&parse_query(VERBATIM_QUERY).unwrap(), &t.prefixes, &t.tbox, &closed).unwrap();

    // Brute-force join over every (case, statement, assertion) triple.
    let inds: Vec<&Iri> = closed.individuals().iter().collect();
    let out_of_court = iri("h:OutOfCourtStatement");
    let mut oracle = BTreeSet::new();
    for c in &inds {
        for s in &inds {
            for a in &inds {
                if closed.has_property_assertion(s, &t.case_link, c)
                    && closed.types_of(&t.tbox, s).contains(&out_of_court)
                    && closed.has_property_assertion(s, &iri("h:hasAssertion"), a)
                {
                    oracle.insert(vec![(*c).clone(), (*s).clone(), (*a).clone()]);
                }
            }
        }
    }
    let got: BTreeSet<Vec<Iri>> = out.rows.iter().cloned().collect();
    let mut notes = Vec::new();
    let mut ok = check(
        out.rows.len() == 2,
        "2 rows returned".into(),
        format!("{} rows returned, expected 2", out.rows.len()),
        &mut notes,
    );
    ok &= check(
        got == oracle && out.rows.len() == got.len(),
        "rows equal the brute-force join".into(),
        format!("rows {got:?} differ from oracle {oracle:?}"),
        &mut notes,
    );
    ok &= check(
        out.warnings.is_empty(),
        "no vocabulary warnings".into(),
        format!("warnings: {:?}", out.warnings),
        &mut notes,
    );
    finish(ok, notes)
}

fn criterion_6() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let mut notes = Vec::new();
    let mut ok = true;
    for (id, expected) in TASKS.into_iter().zip([15, 15, 14]) {
        let t = task(id);
        let data = dataset(id);
        let exemplars = data.exemplars(&t, None, 0);
        ok &= check(
            data.records.len() == expected,
            format!("{id}: {expected} records"),
            format!("{id}: {} records, expected {expected}", data.records.len()),
            &mut notes,
        );
        let mut identical = true;
        for condition in Condition::ALL {
            let mut bodies = Vec::new();
            for run in 0..2 {
                let backend = replay(id);
                let traces = Pipeline::new(&t, &backend)
                    .with_exemplars(exemplars.clone())
                    .run_all(condition, &data.test_instances());
                let path = dir.path().join(format!("{id}/{condition}/{run}.jsonl"));
                write_traces(&path, &TraceHeader::now(id, condition, "scripted"), &traces).unwrap();
                let text = std::fs::read_to_string(&path).unwrap();
                bodies.push(text.split_once('\n').map(|(_, b)| b.to_string()).unwrap_or_default());
                if condition == Condition::SD && run == 0 {
                    let counts = ConfusionCounts::from_traces(&t, &traces);
                    let f1 = ruleweave::evaluation::metrics(&counts).map(|m| m.f1).unwrap_or(0.0);
                    ok &= check(
                        f1 == 1.0 && counts.excluded_errors == 0,
                        format!("{id}: SD F1 = 1.0 over {} test instances", counts.scored()),
                        format!("{id}: SD F1 = {f1} ({counts:?})"),
                        &mut notes,
                    );
                }
            }
            identical &= bodies[0] == bodies[1] && !bodies[0].is_empty();
        }
        ok &= check(
            identical,
            format!("{id}: traces byte-identical across two runs for all six conditions"),
            format!("{id}: traces differ between runs"),
            &mut notes,
        );
    }
    finish(ok, notes)
}

fn criterion_7() -> Verdict {
    let t = task("hearsay");
    let data = dataset("hearsay");
    let instances = data.test_instances();
    let designated = ["hs-02", "hs-06", "hs-09"];
    let fixed = replay("hearsay");
    let sd = Pipeline::new(&t, &fixed).run_all(Condition::SD, &instances);
    let mut flipped = replay("hearsay");
    for id in designated {
        let rule_says = sd
            .iter()
            .find(|tr| tr.instance_id == id)
            .unwrap()
            .prediction
            .clone()
            .unwrap();
        let positive = t.labels.polarity(&rule_says).unwrap();
        let answer = serde_json::json!({ "answer": t.labels.label(!positive) });
        flipped.set(id, "direct", 0, answer.to_string());
    }
    let direct = Pipeline::new(&t, &flipped).run_all(Condition::SdDirect, &instances);
    let differ: Vec<&str> = sd
        .iter()
        .zip(&direct)
        .filter(|(a, b)| a.prediction != b.prediction)
        .map(|(a, _)| a.instance_id.as_str())
        .collect();
    let same_extraction = sd
        .iter()
        .zip(&direct)
        .all(|(a, b)| a.entity_extraction == b.entity_extraction && a.assertion_extraction == b.assertion_extraction);
    let mut notes = Vec::new();
    let mut ok = check(
        differ == designated,
        format!("predictions differ on exactly {}", designated.join(", ")),
        format!("predictions differ on {differ:?}, expected {designated:?}"),
        &mut notes,
    );
    ok &= check(
        same_extraction,
        "entity and assertion extractions identical across SD and SD_Direct".into(),
        "extractions differ between SD and SD_Direct".into(),
        &mut notes,
    );
    finish(ok, notes)
}

fn criterion_8() -> Option<Verdict> {
    let key = std::env::var(API_KEY_ENV).ok().filter(|k| !k.is_empty())?;
    let endpoint = std::env::var("RULEWEAVE_ENDPOINT").ok().filter(|e| !e.is_empty())?;
    let model = std::env::var("RULEWEAVE_MODEL").unwrap_or_else(|_| "gpt-4o-mini".into());
    let backend = HttpBackend::with_key(HttpConfig::new(endpoint, model), Some(key));
    let t = task("hearsay");
    let data = dataset("hearsay");
    let instance = data.test_instances().remove(0);
    let trace = Pipeline::new(&t, &backend).run(Condition::SD, &instance);
    let notes = vec![format!(
        "{} under SD: outcome {:?}, prediction {:?}, {} exchanges{}",
        instance.id,
        trace.outcome,
        trace.prediction,
        trace.raw_exchanges.len(),
        trace
            .error
            .as_deref()
            .map(|e| format!(", error: {e}"))
            .unwrap_or_default()
    )];
    Some(finish(trace.outcome != Outcome::Error, notes))
}

fn run(n: u32, f: impl FnOnce() -> Verdict) -> Verdict {
    match panic::catch_unwind(AssertUnwindSafe(f)) {
        Ok(r) => r,
        Err(e) => {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            Err(vec![format!("criterion {n} panicked: {msg}")])
        }
    }
}

type Criterion = (u32, &'static str, Box<dyn FnOnce() -> Verdict>);

fn main() -> ExitCode {
    let criteria: Vec<Criterion> = vec![
        (1, "rule-firing exhaustiveness", Box::new(criterion_1)),
        (2, "fixpoint oracle equivalence", Box::new(criterion_2)),
        (3, "grid aggregate reproduction", Box::new(criterion_3)),
        (4, "paired statistics reproduction", Box::new(criterion_4)),
        (5, "query correctness", Box::new(criterion_5)),
        (6, "end-to-end determinism", Box::new(criterion_6)),
        (7, "ablation divergence", Box::new(criterion_7)),
    ];
    let mut unexpected = Vec::new();
    for (n, title, f) in criteria {
        let known = KNOWN_FAILURES.iter().find(|(k, _)| *k == n).map(|(_, why)| *why);
        let result = run(n, f);
        let (status, notes) = match &result {
            Ok(notes) => ("PASS", notes),
            Err(notes) => ("FAIL", notes),
        };
        println!("{status} criterion {n}: {title}");
        for note in notes {
            println!("    {note}");
        }
        match (result.is_ok(), known) {
            (false, Some(why)) => println!("    known failure: {why}"),
            (false, None) => unexpected.push(format!("criterion {n} failed")),
            (true, Some(_)) => unexpected.push(format!("criterion {n} passed but is listed as a known failure")),
            (true, None) => {}
        }
    }
    match criterion_8() {
        None => println!("SKIP criterion 8: live endpoint smoke run ({API_KEY_ENV} and RULEWEAVE_ENDPOINT not set)"),
        Some(result) => {
            let (status, notes) = match &result {
                Ok(n) => ("PASS", n),
                Err(n) => ("FAIL", n),
            };
            println!("{status} criterion 8: live endpoint smoke run");
            for note in notes {
                println!("    {note}");
            }
            if result.is_err() {
                unexpected.push("criterion 8 failed".into());
            }
        }
    }
    if unexpected.is_empty() {
        ExitCode::SUCCESS
    } else {
        for u in &unexpected {
            eprintln!("{u}");
        }
        ExitCode::FAILURE
    }
}
