//! Datasets, scoring, paired statistics and report aggregation.

mod report;
mod stats;

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs;
use std::path::Path;

use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::extraction::Backend;
use crate::pipeline::{Condition, Instance, InstanceTrace, Outcome, Pipeline};
use crate::tasklib::TaskDefinition;

pub use report::{cells_to_csv, markdown_report, read_f1_grid};
pub use stats::{cohens_dz, ln_gamma, paired_t_test, regularized_beta, student_t_cdf, two_sided_p, PairedTest};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Record { line: usize, message: String },
    #[error("line {line}: duplicate instance id `{id}`")]
    DuplicateId { line: usize, id: String },
    #[error("line {line}: unknown label `{label}` (expected Yes or No)")]
    UnknownLabel { line: usize, label: String },
    #[error("dataset has no test instances")]
    EmptyTestSplit,
    #[error("no scored instances")]
    NoScoredInstances,
    #[error("paired samples differ in length ({left} vs {right})")]
    LengthMismatch { left: usize, right: usize },
    #[error("a paired test needs at least 2 pairs, got {0}")]
    TooFewPairs(usize),
    #[error("differences have zero variance")]
    ZeroVariance,
    #[error("cells of {a} and {b} do not match: {detail}")]
    MismatchedCells { a: Condition, b: Condition, detail: String },
    #[error("{0}")]
    Grid(String),
}

pub const POSITIVE_LABEL: &str = "Yes";
pub const NEGATIVE_LABEL: &str = "No";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Record {
    pub id: String,
    pub text: String,
    /// `Yes` or `No`.
    pub label: String,
    pub split: Split,
}

impl Record {
    pub fn positive(&self) -> bool {
        self.label == POSITIVE_LABEL
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRecord {
    id: String,
    text: String,
    label: String,
    split: Split,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    pub task_id: String,
    pub records: Vec<Record>,
}

fn normalize_label(label: &str) -> Option<&'static str> {
    let label = label.trim();
    if label.eq_ignore_ascii_case(POSITIVE_LABEL) {
        Some(POSITIVE_LABEL)
    } else if label.eq_ignore_ascii_case(NEGATIVE_LABEL) {
        Some(NEGATIVE_LABEL)
    } else {
        None
    }
}

impl Dataset {
    /// Parses JSON-lines text with keys `id`, `text`, `label`, `split`.
    pub fn parse(task_id: impl Into<String>, text: &str) -> Result<Self, EvalError> {
        let mut seen = HashSet::new();
        let mut records = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line_no = n + 1;
            if line.trim().is_empty() {
                continue;
            }
            let raw: RawRecord = serde_json::from_str(line).map_err(|e| EvalError::Record {
                line: line_no,
                message: e.to_string(),
            })?;
            let label = normalize_label(&raw.label).ok_or_else(|| EvalError::UnknownLabel {
                line: line_no,
                label: raw.label.clone(),
            })?;
            if raw.id.trim().is_empty() || raw.text.trim().is_empty() {
                return Err(EvalError::Record {
                    line: line_no,
                    message: "id and text must be non-empty".into(),
                });
            }
            if !seen.insert(raw.id.clone()) {
                return Err(EvalError::DuplicateId {
                    line: line_no,
                    id: raw.id,
                });
            }
            records.push(Record {
                id: raw.id,
                text: raw.text,
                label: label.to_string(),
                split: raw.split,
            });
        }
        if !records.iter().any(|r| r.split == Split::Test) {
            return Err(EvalError::EmptyTestSplit);
        }
        Ok(Dataset {
            task_id: task_id.into(),
            records,
        })
    }

    pub fn test(&self) -> impl Iterator<Item = &Record> {
        self.records.iter().filter(|r| r.split == Split::Test)
    }

    pub fn train(&self) -> impl Iterator<Item = &Record> {
        self.records.iter().filter(|r| r.split == Split::Train)
    }

    pub fn test_instances(&self) -> Vec<Instance> {
        self.test()
            .map(|r| Instance {
                id: r.id.clone(),
                text: r.text.clone(),
                gold: Some(r.label.clone()),
            })
            .collect()
    }

    /// Labelled train examples in file order. With a limit smaller than the
    /// train split, a seeded sample is taken (still in file order).
    pub fn exemplars(&self, task: &TaskDefinition, limit: Option<usize>, seed: u64) -> Vec<(String, String)> {
        let train: Vec<&Record> = self.train().collect();
        let chosen: Vec<&Record> = match limit {
            Some(k) if k < train.len() => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let picked: HashSet<&str> = train.choose_multiple(&mut rng, k).map(|r| r.id.as_str()).collect();
                train.into_iter().filter(|r| picked.contains(r.id.as_str())).collect()
            }
            _ => train,
        };
        chosen
            .into_iter()
            .map(|r| (r.text.clone(), task.labels.label(r.positive()).to_string()))
            .collect()
    }
}

const BUILTIN_CORPORA: [(&str, &str); 3] = [
    ("hearsay", include_str!("../../resources/corpus/hearsay.jsonl")),
    (
        "method_application",
        include_str!("../../resources/corpus/method_application.jsonl"),
    ),
    (
        "clinical_eligibility",
        include_str!("../../resources/corpus/clinical_eligibility.jsonl"),
    ),
];

/// The small synthetic corpus bundled for a built-in task.
pub fn builtin_dataset(task_id: &str) -> Option<Dataset> {
    BUILTIN_CORPORA
        .iter()
        .find(|(id, _)| *id == task_id)
        .map(|(id, text)| Dataset::parse(*id, text).expect("bundled corpora are valid"))
}

/// Reads a dataset file. The task id is the file name up to its first dot.
pub fn load_dataset(path: &Path) -> Result<Dataset, EvalError> {
    let text = fs::read_to_string(path).map_err(|source| EvalError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let stem = path
        .file_name()
        .and_then(|n| n.to_str())
        .and_then(|n| n.split('.').next())
        .unwrap_or_default();
    Dataset::parse(stem, &text)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    /// Instances with no prediction. Not part of the four cells.
    pub excluded_errors: u64,
}

impl ConfusionCounts {
    pub fn new(tp: u64, fp: u64, tn: u64, fn_: u64) -> Self {
        ConfusionCounts {
            tp,
            fp,
            tn,
            fn_,
            excluded_errors: 0,
        }
    }

    pub fn scored(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn add(&mut self, predicted: bool, gold: bool) {
        match (predicted, gold) {
            (true, true) => self.tp += 1,
            (true, false) => self.fp += 1,
            (false, false) => self.tn += 1,
            (false, true) => self.fn_ += 1,
        }
    }

    /// Folds traces in instance-id order. Traces with outcome `Error`, or
    /// without a usable gold label or prediction, count as excluded.
    pub fn from_traces(task: &TaskDefinition, traces: &[InstanceTrace]) -> Self {
        let mut sorted: Vec<&InstanceTrace> = traces.iter().collect();
        sorted.sort_by(|a, b| a.instance_id.cmp(&b.instance_id));
        let mut counts = ConfusionCounts::default();
        for trace in sorted {
            let gold = trace.gold.as_deref().and_then(normalize_label);
            let predicted = trace.prediction.as_deref().and_then(|p| task.labels.polarity(p));
            match (trace.outcome, gold, predicted) {
                (Outcome::Error, _, _) | (_, None, _) | (_, _, None) => counts.excluded_errors += 1,
                (_, Some(gold), Some(predicted)) => counts.add(predicted, gold == POSITIVE_LABEL),
            }
        }
        counts
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Accuracy, precision, recall and F1. Ratios with a zero denominator are 0.
pub fn metrics(counts: &ConfusionCounts) -> Result<Metrics, EvalError> {
    let all = counts.scored();
    if all == 0 {
        return Err(EvalError::NoScoredInstances);
    }
    let precision = ratio(counts.tp, counts.tp + counts.fp);
    let recall = ratio(counts.tp, counts.tp + counts.fn_);
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    Ok(Metrics {
        accuracy: ratio(counts.tp + counts.tn, all),
        precision,
        recall,
        f1,
    })
}

/// Scores of one (model, task, condition) run. Cells read from a published
/// grid carry only F1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub model: String,
    pub task: String,
    pub condition: Condition,
    pub f1: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub counts: Option<ConfusionCounts>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metrics: Option<Metrics>,
}

impl Cell {
    pub fn from_counts(
        model: impl Into<String>,
        task: impl Into<String>,
        condition: Condition,
        counts: ConfusionCounts,
    ) -> Result<Self, EvalError> {
        let m = metrics(&counts)?;
        Ok(Cell {
            model: model.into(),
            task: task.into(),
            condition,
            f1: m.f1,
            counts: Some(counts),
            metrics: Some(m),
        })
    }

    pub fn from_f1(model: impl Into<String>, task: impl Into<String>, condition: Condition, f1: f64) -> Self {
        Cell {
            model: model.into(),
            task: task.into(),
            condition,
            f1,
            counts: None,
            metrics: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Level {
    Overall,
    Task(String),
    Model(String),
}

/// Unweighted mean over a group of cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub level: Level,
    pub condition: Condition,
    pub cells: usize,
    pub f1: f64,
    /// Present when every cell in the group has full metrics.
    pub accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub a: Condition,
    pub b: Condition,
    /// Mean F1 of `a` minus mean F1 of `b` over the paired cells.
    pub delta_f1: f64,
    pub n: usize,
    /// Absent when not requested or when it cannot be computed.
    pub test: Option<PairedTest>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub cells: Vec<Cell>,
    pub aggregates: Vec<Aggregate>,
    pub comparisons: Vec<Comparison>,
}

fn mean(values: impl IntoIterator<Item = f64>) -> f64 {
    let (sum, n) = values.into_iter().fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    sum / n as f64
}

/// Cells sorted by (model, task, condition) plus unweighted means at the
/// overall, per-task and per-model levels.
pub fn aggregate(cells: &[Cell]) -> RunReport {
    let mut cells = cells.to_vec();
    cells.sort_by(|a, b| (&a.model, &a.task, a.condition).cmp(&(&b.model, &b.task, b.condition)));
    let mut groups: BTreeMap<(Level, Condition), Vec<&Cell>> = BTreeMap::new();
    for cell in &cells {
        for level in [
            Level::Overall,
            Level::Task(cell.task.clone()),
            Level::Model(cell.model.clone()),
        ] {
            groups.entry((level, cell.condition)).or_default().push(cell);
        }
    }
    let aggregates = groups
        .into_iter()
        .map(|((level, condition), group)| {
            let accuracy = group
                .iter()
                .map(|c| c.metrics.map(|m| m.accuracy))
                .collect::<Option<Vec<f64>>>()
                .map(mean);
            Aggregate {
                level,
                condition,
                cells: group.len(),
                f1: mean(group.iter().map(|c| c.f1)),
                accuracy,
            }
        })
        .collect();
    RunReport {
        cells,
        aggregates,
        comparisons: Vec::new(),
    }
}

impl RunReport {
    pub fn aggregate(&self, level: &Level, condition: Condition) -> Option<&Aggregate> {
        self.aggregates
            .iter()
            .find(|a| &a.level == level && a.condition == condition)
    }

    /// F1 values of one condition keyed by (model, task).
    pub fn column(&self, condition: Condition) -> BTreeMap<(String, String), f64> {
        self.cells
            .iter()
            .filter(|c| c.condition == condition)
            .map(|c| ((c.model.clone(), c.task.clone()), c.f1))
            .collect()
    }

    /// Pairs the cells of `a` and `b` by (model, task). Both conditions must
    /// cover the same cells.
    pub fn compare(&self, a: Condition, b: Condition, paired: bool) -> Result<Comparison, EvalError> {
        let left = self.column(a);
        let right = self.column(b);
        let lk: BTreeSet<_> = left.keys().collect();
        let rk: BTreeSet<_> = right.keys().collect();
        if lk != rk || lk.is_empty() {
            let only: Vec<String> = lk.symmetric_difference(&rk).map(|(m, t)| format!("{m}/{t}")).collect();
            let detail = if lk.is_empty() && rk.is_empty() {
                "no cells".to_string()
            } else if only.is_empty() {
                format!("{} has no cells", if lk.is_empty() { a } else { b })
            } else {
                format!("unpaired cells {}", only.join(", "))
            };
            return Err(EvalError::MismatchedCells { a, b, detail });
        }
        let xs: Vec<f64> = left.values().copied().collect();
        let ys: Vec<f64> = right.values().copied().collect();
        let delta_f1 = mean(xs.iter().copied()) - mean(ys.iter().copied());
        let (test, note) = if paired {
            match paired_t_test(&xs, &ys) {
                Ok(t) => (Some(t), None),
                Err(e) => (None, Some(e.to_string())),
            }
        } else {
            (None, None)
        };
        Ok(Comparison {
            a,
            b,
            delta_f1,
            n: xs.len(),
            test,
            note,
        })
    }

    pub fn add_comparison(&mut self, a: Condition, b: Condition, paired: bool) -> Result<&Comparison, EvalError> {
        let c = self.compare(a, b, paired)?;
        self.comparisons.push(c);
        Ok(self.comparisons.last().expect("just pushed"))
    }
}

/// Traces and the scored cell of one condition run.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionRun {
    pub cell: Cell,
    pub traces: Vec<InstanceTrace>,
}

/// Runs the test split under one condition. FS and CoT prompts use the
/// given exemplars.
pub fn run_condition(
    task: &TaskDefinition,
    dataset: &Dataset,
    condition: Condition,
    backend: &dyn Backend,
    exemplars: Vec<(String, String)>,
) -> Result<ConditionRun, EvalError> {
    run_pipeline(
        &Pipeline::new(task, backend).with_exemplars(exemplars),
        dataset,
        condition,
    )
}

/// Like [`run_condition`], with a pre-configured pipeline.
pub fn run_pipeline(pipeline: &Pipeline, dataset: &Dataset, condition: Condition) -> Result<ConditionRun, EvalError> {
    let traces = pipeline.run_all(condition, &dataset.test_instances());
    let counts = ConfusionCounts::from_traces(pipeline.task, &traces);
    let cell = Cell::from_counts(pipeline.backend.model(), pipeline.task.id.clone(), condition, counts)?;
    Ok(ConditionRun { cell, traces })
}
