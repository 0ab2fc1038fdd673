mod config;

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use ruleweave::evaluation::{
    aggregate, builtin_dataset, cells_to_csv, load_dataset, markdown_report, read_f1_grid, run_pipeline, Cell,
    ConditionRun, ConfusionCounts, Dataset, EvalError,
};
use ruleweave::extraction::{Backend, HttpBackend, ScriptedBackend};
use ruleweave::pipeline::{merged_snapshot, read_traces, write_traces, Condition, Pipeline, TraceHeader};
use ruleweave::query::{execute, parse_query};
use ruleweave::tasklib::{builtin_document, builtin_task, load_task, BUILTIN_TASKS};
use ruleweave::{ABox, TaskDefinition};

use config::{BackendChoice, BackendKind, FileConfig, RunConfig, RunFlags};

/// Exit status classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Code {
    Validation = 2,
    Backend = 3,
    Data = 4,
}

struct Failure {
    code: Code,
    error: anyhow::Error,
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#}", self.error)
    }
}

trait Classify<T> {
    fn or_exit(self, code: Code) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> Classify<T> for Result<T, E> {
    fn or_exit(self, code: Code) -> Result<T, Failure> {
        self.map_err(|e| Failure { code, error: e.into() })
    }
}

type CmdResult = Result<(), Failure>;

#[derive(Parser)]
#[command(
    name = "ruleweave",
    version,
    about = "Structured decomposition with ontology-checked rule verification"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check task documents (paths or built-in ids).
    Validate {
        #[arg(required = true)]
        tasks: Vec<String>,
    },
    /// Run a task's test split under one or more conditions.
    Run(RunArgs),
    /// Aggregate trace files into CSV and Markdown reports.
    Report(ReportArgs),
    /// Run a SPARQL basic graph pattern query over trace snapshots.
    Query(QueryArgs),
    /// Print the ABox snapshots of a trace file as tab-separated triples.
    Triples {
        #[arg(long)]
        trace: PathBuf,
        /// Only this instance.
        #[arg(long)]
        instance: Option<String>,
    },
    /// Built-in task documents.
    Task {
        #[command(subcommand)]
        command: TaskCommand,
    },
}

#[derive(Subcommand)]
enum TaskCommand {
    /// List built-in task ids.
    List,
    /// Print a task document as JSON.
    Export {
        #[arg(long)]
        id: String,
    },
}

#[derive(Args)]
struct RunArgs {
    /// TOML file with run settings; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Built-in task id or path to a task document.
    #[arg(long)]
    task: Option<String>,
    /// Condition names, repeatable or comma-separated.
    #[arg(long = "condition")]
    conditions: Vec<String>,
    #[arg(long, value_enum)]
    backend: Option<BackendKind>,
    /// Replay file for the scripted backend.
    #[arg(long)]
    replay: Option<PathBuf>,
    #[arg(long)]
    model: Option<String>,
    /// Chat completions URL for the http backend.
    #[arg(long)]
    endpoint: Option<String>,
    /// Dataset JSONL; defaults to the bundled corpus for built-in tasks.
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed for exemplar sampling.
    #[arg(long)]
    seed: Option<u64>,
    /// Use at most this many train exemplars in FS and CoT prompts.
    #[arg(long)]
    max_exemplars: Option<usize>,
    /// Force complementary mode on (true) or off (false) for SD conditions.
    #[arg(long)]
    complementary: Option<bool>,
}

#[derive(Args)]
struct ReportArgs {
    /// Trace files, or directories searched for traces.jsonl.
    paths: Vec<PathBuf>,
    /// Task documents for traces of non-built-in tasks.
    #[arg(long = "task")]
    tasks: Vec<String>,
    /// F1 grid CSV (model,task,<conditions>...) in percent.
    #[arg(long)]
    grid: Option<PathBuf>,
    /// Compare two conditions, e.g. `--compare SD FS`.
    #[arg(long, num_args = 2, value_names = ["A", "B"])]
    compare: Vec<String>,
    /// Add a paired t-test to the comparison.
    #[arg(long)]
    paired: bool,
    /// Write report.md and report.csv here as well.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct QueryArgs {
    #[arg(long)]
    task: String,
    #[arg(long)]
    trace: PathBuf,
    #[arg(long, conflicts_with = "query")]
    query_file: Option<PathBuf>,
    /// Query text.
    #[arg(long)]
    query: Option<String>,
    /// Add a justification column for each IRI-valued column.
    #[arg(long)]
    annotate: bool,
}

fn resolve_task(spec: &str) -> Result<TaskDefinition, Failure> {
    let path = Path::new(spec);
    if path.is_file() {
        let text = fs::read_to_string(path)
            .with_context(|| format!("task: reading {spec}"))
            .or_exit(Code::Data)?;
        return load_task(&text)
            .with_context(|| format!("task: {spec}"))
            .or_exit(Code::Validation);
    }
    if BUILTIN_TASKS.contains(&spec) {
        return builtin_task(spec).context("task").or_exit(Code::Validation);
    }
    Err(anyhow!(
        "task: `{spec}` is neither a file nor a built-in task ({})",
        BUILTIN_TASKS.join(", ")
    ))
    .or_exit(Code::Validation)
}

fn cmd_validate(tasks: &[String]) -> CmdResult {
    let mut failed = 0;
    for spec in tasks {
        match resolve_task(spec) {
            Ok(t) => println!(
                "{spec}: ok ({}: {} classes, {} properties, {} rules, {} entities, {} assertions)",
                t.id,
                t.tbox.classes().len(),
                t.tbox.properties().len(),
                t.tbox.rules().len(),
                t.entity_specs.len(),
                t.assertion_specs.len()
            ),
            Err(f) => {
                eprintln!("{spec}: {f}");
                failed += 1;
            }
        }
    }
    if failed > 0 {
        return Err(anyhow!("{failed} of {} task documents failed validation", tasks.len())).or_exit(Code::Validation);
    }
    Ok(())
}

/// Model names may contain `/` or `:`; keep the output path flat.
fn path_component(name: &str) -> String {
    name.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || "-_.".contains(c) {
                c
            } else {
                '_'
            }
        })
        .collect()
}

fn cmd_run(args: RunArgs) -> CmdResult {
    let file = match &args.config {
        Some(p) => FileConfig::load(p).context("config").or_exit(Code::Validation)?,
        None => FileConfig::default(),
    };
    let flags = RunFlags {
        task: args.task,
        conditions: args.conditions,
        backend: args.backend,
        replay: args.replay,
        model: args.model,
        endpoint: args.endpoint,
        dataset: args.dataset,
        out: args.out,
        seed: args.seed,
        max_exemplars: args.max_exemplars,
        complementary: args.complementary,
    };
    let config = RunConfig::resolve(file, flags)
        .context("config")
        .or_exit(Code::Validation)?;
    let task = resolve_task(&config.task)?;
    let dataset = match &config.dataset {
        Some(p) => load_dataset(p)
            .with_context(|| format!("dataset: {}", p.display()))
            .or_exit(Code::Data)?,
        None => builtin_dataset(&task.id)
            .ok_or_else(|| {
                anyhow!(
                    "dataset: no --dataset given and task `{}` has no bundled corpus",
                    task.id
                )
            })
            .or_exit(Code::Data)?,
    };
    let backend: Box<dyn Backend> = match &config.backend {
        BackendChoice::Scripted { replay, model } => Box::new(
            ScriptedBackend::from_file(model.clone(), replay)
                .context("backend")
                .or_exit(Code::Data)?,
        ),
        BackendChoice::Http(http) => Box::new(
            HttpBackend::from_env(http.clone())
                .context("backend")
                .or_exit(Code::Backend)?,
        ),
    };
    let mut pipeline = Pipeline::new(&task, backend.as_ref()).with_exemplars(dataset.exemplars(
        &task,
        config.max_exemplars,
        config.seed,
    ));
    pipeline.temperature = config.temperature;
    for &condition in &config.conditions {
        let run = run_one(&pipeline, &dataset, condition)?;
        let dir = config
            .out
            .join(path_component(&task.id))
            .join(condition.name())
            .join(path_component(backend.model()));
        let header = TraceHeader::now(&task.id, condition, backend.model());
        let traces_path = dir.join("traces.jsonl");
        write_traces(&traces_path, &header, &run.traces)
            .context("trace")
            .or_exit(Code::Data)?;
        fs::write(dir.join("report.csv"), cells_to_csv(std::slice::from_ref(&run.cell)))
            .with_context(|| format!("report: writing {}", dir.display()))
            .or_exit(Code::Data)?;
        let counts = run.cell.counts.unwrap_or_default();
        let m = run.cell.metrics.expect("run cells carry metrics");
        println!(
            "{} {} {}: n={} acc={:.3} p={:.3} r={:.3} f1={:.3} errors={} -> {}",
            task.id,
            condition,
            backend.model(),
            counts.scored(),
            m.accuracy,
            m.precision,
            m.recall,
            m.f1,
            counts.excluded_errors,
            traces_path.display()
        );
    }
    Ok(())
}

fn run_one(pipeline: &Pipeline, dataset: &Dataset, condition: Condition) -> Result<ConditionRun, Failure> {
    match run_pipeline(pipeline, dataset, condition) {
        Ok(run) => Ok(run),
        Err(EvalError::NoScoredInstances) => Err(anyhow!(
            "backend: no instance of {} under {condition} produced a prediction",
            pipeline.task.id
        ))
        .or_exit(Code::Backend),
        Err(e) => Err(e).context("evaluation").or_exit(Code::Data),
    }
}

fn trace_files(paths: &[PathBuf]) -> Result<Vec<PathBuf>, Failure> {
    let mut files = Vec::new();
    for p in paths {
        if p.is_dir() {
            for entry in walkdir::WalkDir::new(p).sort_by_file_name() {
                let entry = entry.context("report").or_exit(Code::Data)?;
                if entry.file_type().is_file() && entry.file_name() == "traces.jsonl" {
                    files.push(entry.into_path());
                }
            }
        } else if p.is_file() {
            files.push(p.clone());
        } else {
            return Err(anyhow!("report: {} does not exist", p.display())).or_exit(Code::Data);
        }
    }
    Ok(files)
}

fn cmd_report(args: ReportArgs) -> CmdResult {
    if args.paths.is_empty() && args.grid.is_none() {
        return Err(anyhow!("report: give trace paths or --grid")).or_exit(Code::Validation);
    }
    let mut tasks: BTreeMap<String, TaskDefinition> = BTreeMap::new();
    for spec in &args.tasks {
        let t = resolve_task(spec)?;
        tasks.insert(t.id.clone(), t);
    }
    let mut cells = Vec::new();
    for path in trace_files(&args.paths)? {
        let (header, traces) = read_traces(&path).context("trace").or_exit(Code::Data)?;
        if !tasks.contains_key(&header.task) {
            let t = resolve_task(&header.task)?;
            tasks.insert(header.task.clone(), t);
        }
        let task = &tasks[&header.task];
        let counts = ConfusionCounts::from_traces(task, &traces);
        let cell = Cell::from_counts(&header.model, &header.task, header.condition, counts)
            .with_context(|| format!("report: {}", path.display()))
            .or_exit(Code::Data)?;
        cells.push(cell);
    }
    if let Some(grid) = &args.grid {
        let text = fs::read_to_string(grid)
            .with_context(|| format!("report: reading {}", grid.display()))
            .or_exit(Code::Data)?;
        cells.extend(read_f1_grid(&text).context("report").or_exit(Code::Data)?);
    }
    let mut report = aggregate(&cells);
    if let [a, b] = args.compare.as_slice() {
        let a: Condition = a.parse().map_err(anyhow::Error::msg).or_exit(Code::Validation)?;
        let b: Condition = b.parse().map_err(anyhow::Error::msg).or_exit(Code::Validation)?;
        report
            .add_comparison(a, b, args.paired)
            .context("report")
            .or_exit(Code::Data)?;
    } else if args.paired {
        return Err(anyhow!("report: --paired needs --compare A B")).or_exit(Code::Validation);
    }
    let md = markdown_report(&report);
    print!("{md}");
    if let Some(out) = &args.out {
        fs::create_dir_all(out)
            .and_then(|()| fs::write(out.join("report.md"), &md))
            .and_then(|()| fs::write(out.join("report.csv"), cells_to_csv(&report.cells)))
            .with_context(|| format!("report: writing {}", out.display()))
            .or_exit(Code::Data)?;
    }
    Ok(())
}

fn snapshot(path: &Path, instance: Option<&str>) -> Result<ABox, Failure> {
    let (_, traces) = read_traces(path).context("trace").or_exit(Code::Data)?;
    let selected: Vec<_> = traces
        .into_iter()
        .filter(|t| instance.is_none_or(|id| t.instance_id == id))
        .collect();
    if let Some(id) = instance.filter(|_| selected.is_empty()) {
        return Err(anyhow!("trace: no instance `{id}` in {}", path.display())).or_exit(Code::Data);
    }
    Ok(merged_snapshot(&selected))
}

fn cmd_query(args: QueryArgs) -> CmdResult {
    let task = resolve_task(&args.task)?;
    let text = match (&args.query_file, &args.query) {
        (Some(p), _) => fs::read_to_string(p)
            .with_context(|| format!("query: reading {}", p.display()))
            .or_exit(Code::Data)?,
        (None, Some(q)) => q.clone(),
        (None, None) => return Err(anyhow!("query: give --query-file or --query")).or_exit(Code::Validation),
    };
    let query = parse_query(&text).context("query").or_exit(Code::Validation)?;
    let abox = snapshot(&args.trace, None)?;
    let out = execute(&query, &task.prefixes, &task.tbox, &abox)
        .context("query")
        .or_exit(Code::Validation)?;
    for w in &out.warnings {
        eprintln!("warning: {w}");
    }
    if args.annotate {
        print!("{}", out.to_annotated_tsv(&abox));
    } else {
        print!("{}", out.to_tsv());
    }
    Ok(())
}

fn cmd_task(command: TaskCommand) -> CmdResult {
    match command {
        TaskCommand::List => {
            for id in BUILTIN_TASKS {
                println!("{id}");
            }
        }
        TaskCommand::Export { id } => {
            builtin_document(&id).context("task").or_exit(Code::Validation)?;
            let task = builtin_task(&id).context("task").or_exit(Code::Validation)?;
            print!("{}", task.to_json());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Validate { tasks } => cmd_validate(&tasks),
        Command::Run(args) => cmd_run(args),
        Command::Report(args) => cmd_report(args),
        Command::Query(args) => cmd_query(args),
        Command::Triples { trace, instance } => {
            snapshot(&trace, instance.as_deref()).map(|abox| print!("{}", abox.to_triples()))
        }
        Command::Task { command } => cmd_task(command),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code as u8)
        }
    }
}
