//! YAML-configured training runs: config schema, trainer loop, evaluation,
//! metric records and checkpoints.

mod checkpoint;
mod config;
mod trainer;

pub use checkpoint::{Checkpoint, CheckpointError, CKPT_MAGIC, CKPT_VERSION};
pub use config::{
    load_config, DataSection, EvalSection, ModelSection, OptimizerName, OptimizerSection, RunConfig,
    SamplerSection, SchedulerSection, Task, TrainSection,
};
pub use trainer::{evaluate, load_split, train_run, Trainer};

use std::io::Write;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::DataError;
use crate::losses::LossError;
use crate::metrics::MetricError;
use crate::model::ModelError;
use crate::optim::OptimError;
use crate::tensor::TensorError;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("invalid config at `{key}`: {msg}")]
    Validation { key: String, msg: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Loss(#[from] LossError),
    #[error(transparent)]
    Optim(#[from] OptimError),
    #[error("metric error at `{key}`: {source}")]
    Metric {
        key: String,
        #[source]
        source: MetricError,
    },
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error("split `{0}` is empty")]
    EmptySplit(String),
    #[error("unknown split `{0}` (expected train or test)")]
    UnknownSplit(String),
    #[error("checkpoint does not match config: {0}")]
    Mismatch(String),
    #[error("loss diverged at epoch {epoch}, batch {batch}; state restored to the end of epoch {last_good_epoch}")]
    NumericalDivergence {
        epoch: usize,
        batch: usize,
        last_good_epoch: usize,
    },
}

impl From<TensorError> for TrainError {
    fn from(e: TensorError) -> Self {
        TrainError::Model(ModelError::Tensor(e))
    }
}

impl TrainError {
    /// Config and usage problems, as opposed to runtime failures.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            TrainError::Parse(_)
                | TrainError::Validation { .. }
                | TrainError::UnknownSplit(_)
                | TrainError::Mismatch(_)
                | TrainError::Metric { .. }
        )
    }

    pub(crate) fn is_non_finite(&self) -> bool {
        let t = match self {
            TrainError::Model(ModelError::Tensor(t)) | TrainError::Loss(LossError::Tensor(t)) => t,
            _ => return false,
        };
        matches!(t, TensorError::NonFinite { .. })
    }
}

/// One metric value; serialized as a single JSON line.
///
/// `wall_time` is seconds since the run started and is absent for
/// standalone evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRecord {
    pub epoch: usize,
    pub split: String,
    pub name: String,
    pub value: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_time: Option<f64>,
}

impl MetricRecord {
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("record serializes")
    }

    /// Same record with `wall_time` dropped, for reproducibility comparisons.
    pub fn without_time(&self) -> Self {
        Self {
            wall_time: None,
            ..self.clone()
        }
    }
}

/// Appends records as JSON lines.
pub fn write_jsonl(out: &mut impl Write, records: &[MetricRecord]) -> std::io::Result<()> {
    for r in records {
        writeln!(out, "{}", r.to_json_line())?;
    }
    Ok(())
}
