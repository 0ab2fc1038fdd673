use std::fs;
use std::io::{self, BufRead, BufReader, Write};
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Condition, InstanceTrace};

/// First line of a trace file. The only line that varies between runs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceHeader {
    pub task: String,
    pub condition: Condition,
    pub model: String,
    pub created_unix: u64,
    pub version: String,
}

impl TraceHeader {
    pub fn now(task: &str, condition: Condition, model: &str) -> Self {
        TraceHeader {
            task: task.to_string(),
            condition,
            model: model.to_string(),
            created_unix: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
            version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }
}

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Format { path: String, line: usize, message: String },
}

/// Writes a header line followed by one JSON line per trace.
pub fn write_traces(path: &Path, header: &TraceHeader, traces: &[InstanceTrace]) -> Result<(), TraceError> {
    let io_err = |source| TraceError::Io {
        path: path.display().to_string(),
        source,
    };
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(io_err)?;
    }
    let mut out = io::BufWriter::new(fs::File::create(path).map_err(io_err)?);
    let mut line = serde_json::to_string(header).expect("header serializes");
    line.push('\n');
    out.write_all(line.as_bytes()).map_err(io_err)?;
    for trace in traces {
        let mut line = serde_json::to_string(trace).expect("traces serialize");
        line.push('\n');
        out.write_all(line.as_bytes()).map_err(io_err)?;
    }
    out.flush().map_err(io_err)
}

pub fn read_traces(path: &Path) -> Result<(TraceHeader, Vec<InstanceTrace>), TraceError> {
    let name = path.display().to_string();
    let file = fs::File::open(path).map_err(|source| TraceError::Io {
        path: name.clone(),
        source,
    })?;
    let mut lines = BufReader::new(file).lines();
    let format = |line: usize, message: String| TraceError::Format {
        path: name.clone(),
        line,
        message,
    };
    let first = lines
        .next()
        .ok_or_else(|| format(1, "empty trace file".into()))?
        .map_err(|source| TraceError::Io {
            path: name.clone(),
            source,
        })?;
    let header: TraceHeader = serde_json::from_str(&first).map_err(|e| format(1, format!("header: {e}")))?;
    let mut traces = Vec::new();
    for (n, line) in lines.enumerate() {
        let line = line.map_err(|source| TraceError::Io {
            path: name.clone(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        traces.push(serde_json::from_str(&line).map_err(|e| format(n + 2, e.to_string()))?);
    }
    Ok((header, traces))
}
