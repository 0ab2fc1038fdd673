//! Run configuration: an optional TOML file overlaid by command-line flags.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::ValueEnum;
use ruleweave::extraction::HttpConfig;
use ruleweave::pipeline::Condition;
use serde::Deserialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Scripted,
    Http,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackendSection {
    pub kind: Option<BackendKind>,
    pub replay: Option<PathBuf>,
    pub model: Option<String>,
    pub endpoint: Option<String>,
    pub max_concurrency: Option<usize>,
    pub rpm: Option<u32>,
    pub timeout_secs: Option<u64>,
    pub max_retries: Option<u32>,
    pub backoff_ms: Option<u64>,
    pub temperature: Option<f64>,
}

/// Contents of a `--config` file. Every field can also be given as a flag.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub task: Option<String>,
    pub dataset: Option<PathBuf>,
    #[serde(default)]
    pub conditions: Vec<String>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub max_exemplars: Option<usize>,
    /// Forces SD/SD_Direct into (true) or out of (false) complementary mode.
    pub complementary: Option<bool>,
    #[serde(default)]
    pub backend: BackendSection,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut config: FileConfig = toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        // Relative paths are taken from the config file's directory.
        let base = path.parent().unwrap_or(Path::new(""));
        let rebase = |p: &mut Option<PathBuf>| {
            if let Some(p) = p.as_mut().filter(|p| p.is_relative()) {
                *p = base.join(&*p);
            }
        };
        rebase(&mut config.dataset);
        rebase(&mut config.out);
        rebase(&mut config.backend.replay);
        if let Some(task) = config.task.as_mut() {
            let candidate = base.join(&*task);
            if Path::new(task).is_relative() && candidate.is_file() {
                *task = candidate.display().to_string();
            }
        }
        Ok(config)
    }
}

pub enum BackendChoice {
    Scripted { replay: PathBuf, model: String },
    Http(HttpConfig),
}

/// Fully resolved settings for one `run` invocation.
pub struct RunConfig {
    pub task: String,
    pub dataset: Option<PathBuf>,
    pub conditions: Vec<Condition>,
    pub out: PathBuf,
    pub seed: u64,
    pub max_exemplars: Option<usize>,
    pub backend: BackendChoice,
    pub temperature: f64,
}

/// Flag values for `run`; `None` falls back to the config file.
#[derive(Debug, Default)]
pub struct RunFlags {
    pub task: Option<String>,
    pub conditions: Vec<String>,
    pub backend: Option<BackendKind>,
    pub replay: Option<PathBuf>,
    pub model: Option<String>,
    pub endpoint: Option<String>,
    pub dataset: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub max_exemplars: Option<usize>,
    pub complementary: Option<bool>,
}

pub fn parse_conditions(names: &[String]) -> Result<Vec<Condition>> {
    let mut out = Vec::new();
    for name in names
        .iter()
        .flat_map(|n| n.split(','))
        .map(str::trim)
        .filter(|n| !n.is_empty())
    {
        let c: Condition = name.parse().map_err(anyhow::Error::msg)?;
        if !out.contains(&c) {
            out.push(c);
        }
    }
    Ok(out)
}

fn with_complementary(c: Condition, complementary: Option<bool>) -> Condition {
    match (complementary, c) {
        (Some(true), Condition::SD) => Condition::SdComp,
        (Some(true), Condition::SdDirect) => Condition::SdDirectComp,
        (Some(false), Condition::SdComp) => Condition::SD,
        (Some(false), Condition::SdDirectComp) => Condition::SdDirect,
        _ => c,
    }
}

fn existing(path: PathBuf, what: &str) -> Result<PathBuf> {
    if !path.exists() {
        bail!("{what} {} does not exist", path.display());
    }
    Ok(path)
}

impl RunConfig {
    pub fn resolve(file: FileConfig, flags: RunFlags) -> Result<Self> {
        let task = flags
            .task
            .or(file.task)
            .context("no task given (use --task or `task` in the config file)")?;
        let names = if flags.conditions.is_empty() {
            file.conditions
        } else {
            flags.conditions
        };
        let complementary = flags.complementary.or(file.complementary);
        let mut conditions = Vec::new();
        for c in parse_conditions(&names)? {
            let c = with_complementary(c, complementary);
            if !conditions.contains(&c) {
                conditions.push(c);
            }
        }
        if conditions.is_empty() {
            bail!("no conditions given (use --condition or `conditions` in the config file)");
        }
        let dataset = flags
            .dataset
            .or(file.dataset)
            .map(|p| existing(p, "dataset"))
            .transpose()?;
        let b = file.backend;
        let kind = flags.backend.or(b.kind).unwrap_or(BackendKind::Scripted);
        let model = flags.model.or(b.model);
        let backend = match kind {
            BackendKind::Scripted => {
                let replay = flags
                    .replay
                    .or(b.replay)
                    .context("the scripted backend needs --replay")?;
                BackendChoice::Scripted {
                    replay: existing(replay, "replay file")?,
                    model: model.unwrap_or_else(|| "scripted".into()),
                }
            }
            BackendKind::Http => {
                let endpoint = flags
                    .endpoint
                    .or(b.endpoint)
                    .context("the http backend needs --endpoint")?;
                let model = model.context("the http backend needs --model")?;
                let mut http = HttpConfig::new(endpoint, model);
                if let Some(v) = b.max_concurrency {
                    http.max_concurrency = v;
                }
                if let Some(v) = b.rpm {
                    http.rpm = v;
                }
                if let Some(v) = b.timeout_secs {
                    http.timeout_secs = v;
                }
                if let Some(v) = b.max_retries {
                    http.max_retries = v;
                }
                if let Some(v) = b.backoff_ms {
                    http.backoff_ms = v;
                }
                BackendChoice::Http(http)
            }
        };
        Ok(RunConfig {
            task,
            dataset,
            conditions,
            out: flags.out.or(file.out).unwrap_or_else(|| PathBuf::from("out")),
            seed: flags.seed.or(file.seed).unwrap_or(0),
            max_exemplars: flags.max_exemplars.or(file.max_exemplars),
            backend,
            temperature: b.temperature.unwrap_or(0.0),
        })
    }
}
