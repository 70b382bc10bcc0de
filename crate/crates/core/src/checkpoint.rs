//! Policy checkpoints: a JSON header next to a little-endian `f64` sidecar
//! holding the flat parameter vector.

use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::{AgentPolicy, AgentRole, Normalizer, ObservationLayout};
use crate::rl::approximator::ArchDescriptor;
use crate::rl::{LearnerKind, PolicyParams};

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("checkpoint i/o on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("checkpoint header {path}: {message}")]
    Header { path: String, message: String },
    #[error("checkpoint {path}: expected {expected} parameters, found {found}")]
    ParamCount {
        path: String,
        expected: usize,
        found: usize,
    },
    #[error("missing checkpoint {0}")]
    Missing(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dims {
    pub input: usize,
    pub output: usize,
    pub params: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub architecture: ArchDescriptor,
    pub dims: Dims,
    pub learner: LearnerKind,
    pub role: AgentRole,
    pub layout: ObservationLayout,
    pub seed: u64,
    pub training_window: Option<(NaiveDate, NaiveDate)>,
    pub log_std: f64,
    pub normalizer: Normalizer,
    pub params_file: String,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CheckpointError + '_ {
    move |source| CheckpointError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Writes `<dir>/<name>.json` and `<dir>/<name>.bin`; returns the header path.
pub fn save_checkpoint(dir: &Path, name: &str, policy: &AgentPolicy) -> Result<PathBuf, CheckpointError> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let p = &policy.params;
    let params_file = format!("{name}.bin");
    let header = CheckpointHeader {
        architecture: p.arch.clone(),
        dims: Dims {
            input: p.arch.input_dim(),
            output: p.arch.output_dim(),
            params: p.weights.len(),
        },
        learner: p.kind,
        role: policy.role,
        layout: policy.layout,
        seed: p.seed,
        training_window: p.training_window,
        log_std: p.log_std,
        normalizer: policy.normalizer.clone(),
        params_file: params_file.clone(),
    };
    let bin_path = dir.join(&params_file);
    let bytes: Vec<u8> = p.weights.iter().flat_map(|w| w.to_le_bytes()).collect();
    std::fs::write(&bin_path, bytes).map_err(io_err(&bin_path))?;
    let json_path = dir.join(format!("{name}.json"));
    let mut text = serde_json::to_string_pretty(&header).expect("header serializes");
    text.push('\n');
    std::fs::write(&json_path, text).map_err(io_err(&json_path))?;
    Ok(json_path)
}

pub fn load_checkpoint(header_path: &Path) -> Result<AgentPolicy, CheckpointError> {
    if !header_path.exists() {
        return Err(CheckpointError::Missing(header_path.display().to_string()));
    }
    let text = std::fs::read_to_string(header_path).map_err(io_err(header_path))?;
    let header: CheckpointHeader = serde_json::from_str(&text).map_err(|e| CheckpointError::Header {
        path: header_path.display().to_string(),
        message: e.to_string(),
    })?;
    let expected = header.architecture.param_count();
    if header.dims.params != expected
        || header.dims.input != header.architecture.input_dim()
        || header.normalizer.mean.len() != header.layout.market_dim()
        || header.normalizer.std.len() != header.layout.market_dim()
        || header.architecture.input_dim() != header.layout.dim()
    {
        return Err(CheckpointError::Header {
            path: header_path.display().to_string(),
            message: "dimensions disagree with the architecture or layout".into(),
        });
    }
    let bin_path = header_path.parent().unwrap_or(Path::new(".")).join(&header.params_file);
    let bytes = std::fs::read(&bin_path).map_err(io_err(&bin_path))?;
    if bytes.len() != expected * 8 {
        return Err(CheckpointError::ParamCount {
            path: bin_path.display().to_string(),
            expected,
            found: bytes.len() / 8,
        });
    }
    let weights = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    Ok(AgentPolicy {
        role: header.role,
        layout: header.layout,
        normalizer: header.normalizer,
        params: PolicyParams {
            arch: header.architecture,
            weights,
            log_std: header.log_std,
            kind: header.learner,
            seed: header.seed,
            training_window: header.training_window,
        },
    })
}

/// File stem of the trading checkpoint.
pub const TRADING_CHECKPOINT: &str = "trading";

/// File stem of the hedging checkpoint for `kind`.
pub fn hedging_checkpoint(kind: LearnerKind) -> String {
    format!("hedging_{}", kind.as_str())
}
