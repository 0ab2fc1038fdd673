use std::collections::BTreeSet;
use std::fmt::Write as _;

use super::{Cell, EvalError, Level, RunReport};
use crate::pipeline::Condition;

/// Reads a `model,task,<condition>...` grid of F1 percentages.
pub fn read_f1_grid(text: &str) -> Result<Vec<Cell>, EvalError> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let headers = reader.headers().map_err(|e| EvalError::Grid(e.to_string()))?.clone();
    if headers.len() < 3 || &headers[0] != "model" || &headers[1] != "task" {
        return Err(EvalError::Grid("header must start with model,task".into()));
    }
    let conditions = headers
        .iter()
        .skip(2)
        .map(|h| h.parse::<Condition>().map_err(EvalError::Grid))
        .collect::<Result<Vec<_>, _>>()?;
    let mut cells = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| EvalError::Grid(e.to_string()))?;
        let line = row.position().map_or(0, |p| p.line());
        for (value, condition) in row.iter().skip(2).zip(&conditions) {
            let pct: f64 = value
                .trim()
                .parse()
                .map_err(|_| EvalError::Grid(format!("line {line}: `{value}` is not a number")))?;
            if !(0.0..=100.0).contains(&pct) {
                return Err(EvalError::Grid(format!("line {line}: {pct} is outside 0..100")));
            }
            cells.push(Cell::from_f1(&row[0], &row[1], *condition, pct / 100.0));
        }
    }
    Ok(cells)
}

fn opt(v: Option<f64>) -> String {
    v.map(|v| format!("{v:.6}")).unwrap_or_default()
}

/// One CSV row per cell.
pub fn cells_to_csv(cells: &[Cell]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "model",
        "task",
        "condition",
        "tp",
        "fp",
        "tn",
        "fn",
        "excluded_errors",
        "accuracy",
        "precision",
        "recall",
        "f1",
    ])
    .expect("in-memory write");
    for c in cells {
        let counts = c.counts.map(|k| {
            [k.tp, k.fp, k.tn, k.fn_, k.excluded_errors]
                .iter()
                .map(u64::to_string)
                .collect::<Vec<_>>()
        });
        let counts = counts.unwrap_or_else(|| vec![String::new(); 5]);
        let mut row = vec![c.model.clone(), c.task.clone(), c.condition.to_string()];
        row.extend(counts);
        row.push(opt(c.metrics.map(|m| m.accuracy)));
        row.push(opt(c.metrics.map(|m| m.precision)));
        row.push(opt(c.metrics.map(|m| m.recall)));
        row.push(format!("{:.6}", c.f1));
        w.write_record(&row).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv is utf-8")
}

fn pct(v: f64) -> String {
    format!("{:.1}", v * 100.0)
}

fn table_row(out: &mut String, cols: &[String]) {
    writeln!(out, "| {} |", cols.join(" | ")).unwrap();
}

fn table_header(out: &mut String, cols: &[String]) {
    table_row(out, cols);
    let rule: Vec<String> = cols.iter().map(|_| "---".to_string()).collect();
    table_row(out, &rule);
}

/// Markdown with the F1 grid, per-task averages, overall and per-model
/// means, and any comparisons. Values are percentages.
pub fn markdown_report(report: &RunReport) -> String {
    let conditions: Vec<Condition> = report
        .cells
        .iter()
        .map(|c| c.condition)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let tasks: BTreeSet<&str> = report.cells.iter().map(|c| c.task.as_str()).collect();
    let models: BTreeSet<&str> = report.cells.iter().map(|c| c.model.as_str()).collect();
    let mut out = String::new();

    out.push_str("## F1 by model and task\n\n");
    let mut head = vec!["Model".to_string(), "Task".to_string()];
    head.extend(conditions.iter().map(ToString::to_string));
    table_header(&mut out, &head);
    for task in &tasks {
        for model in &models {
            let mut row = vec![model.to_string(), task.to_string()];
            let mut any = false;
            for &cond in &conditions {
                let cell = report
                    .cells
                    .iter()
                    .find(|c| c.model == *model && c.task == *task && c.condition == cond);
                any |= cell.is_some();
                row.push(cell.map(|c| pct(c.f1)).unwrap_or_else(|| "-".into()));
            }
            if any {
                table_row(&mut out, &row);
            }
        }
        let mut row = vec!["**Average**".to_string(), task.to_string()];
        for &cond in &conditions {
            let a = report.aggregate(&Level::Task(task.to_string()), cond);
            row.push(a.map(|a| format!("**{}**", pct(a.f1))).unwrap_or_else(|| "-".into()));
        }
        table_row(&mut out, &row);
    }

    out.push_str("\n## Overall\n\n");
    table_header(
        &mut out,
        &["Condition".into(), "F1".into(), "Accuracy".into(), "Cells".into()],
    );
    for &cond in &conditions {
        if let Some(a) = report.aggregate(&Level::Overall, cond) {
            table_row(
                &mut out,
                &[
                    cond.to_string(),
                    pct(a.f1),
                    a.accuracy.map(pct).unwrap_or_else(|| "-".into()),
                    a.cells.to_string(),
                ],
            );
        }
    }

    out.push_str("\n## By model\n\n");
    let mut head = vec!["Model".to_string()];
    head.extend(conditions.iter().map(ToString::to_string));
    table_header(&mut out, &head);
    for model in &models {
        let mut row = vec![model.to_string()];
        for &cond in &conditions {
            let a = report.aggregate(&Level::Model(model.to_string()), cond);
            row.push(a.map(|a| pct(a.f1)).unwrap_or_else(|| "-".into()));
        }
        table_row(&mut out, &row);
    }

    if !report.comparisons.is_empty() {
        out.push_str("\n## Comparisons\n\n");
        table_header(
            &mut out,
            &[
                "A".into(),
                "B".into(),
                "n".into(),
                "Δ F1 (pp)".into(),
                "t".into(),
                "df".into(),
                "p".into(),
                "d_z".into(),
            ],
        );
        for c in &report.comparisons {
            let mut row = vec![
                c.a.to_string(),
                c.b.to_string(),
                c.n.to_string(),
                format!("{:+.1}", c.delta_f1 * 100.0),
            ];
            match (&c.test, &c.note) {
                (Some(t), _) => row.extend([
                    format!("{:.2}", t.t),
                    t.df().to_string(),
                    format!("{:.4}", t.p),
                    format!("{:.2}", t.dz),
                ]),
                (None, Some(note)) => row.extend([format!("n/a ({note})"), "-".into(), "-".into(), "-".into()]),
                (None, None) => row.extend(["-".to_string(), "-".into(), "-".into(), "-".into()]),
            }
            table_row(&mut out, &row);
        }
    }
    out
}
