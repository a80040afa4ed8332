//! Optimizers (SGD with momentum, Adam, SAM) and the warmup + cosine schedule.

mod sam;
mod schedule;
mod sgd_adam;

pub use sam::{global_norm, sam_step};
pub use schedule::{lr_at, lr_at_time, ScheduleSpec};
pub use sgd_adam::{adam_step, sgd_step, AdamConfig, BaseOptimizer, SgdConfig};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{ParamGroup, ParamMap};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OptimError {
    #[error("no gradient for parameter `{0}`")]
    MissingGrad(String),
    #[error("gradient for `{name}` has shape {grad:?}, parameter has {param:?}")]
    GradShape {
        name: String,
        grad: Vec<usize>,
        param: Vec<usize>,
    },
    #[error("epoch {epoch} outside schedule range [0, {total}]")]
    EpochOutOfRange { epoch: usize, total: usize },
    #[error("invalid optimizer setting: {0}")]
    Invalid(String),
}

/// Learning-rate multipliers per parameter group.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LrScale {
    #[serde(default = "one")]
    pub encoder: f64,
    #[serde(default = "one")]
    pub head: f64,
}

fn one() -> f64 {
    1.0
}

impl Default for LrScale {
    fn default() -> Self {
        Self {
            encoder: 1.0,
            head: 1.0,
        }
    }
}

impl LrScale {
    pub fn for_param(&self, name: &str) -> f64 {
        match ParamGroup::of(name) {
            ParamGroup::Encoder => self.encoder,
            ParamGroup::Head => self.head,
        }
    }
}

/// Per-parameter optimizer slots, keyed like the parameters they track.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct OptimState<T = f64> {
    pub step: u64,
    /// SGD velocity.
    pub momentum: ParamMap<T>,
    /// Adam first moment.
    pub first_moment: ParamMap<T>,
    /// Adam second moment.
    pub second_moment: ParamMap<T>,
}

impl<T: Real> OptimState<T> {
    pub fn new() -> Self {
        Self {
            step: 0,
            momentum: ParamMap::new(),
            first_moment: ParamMap::new(),
            second_moment: ParamMap::new(),
        }
    }

    /// All slot tensors under prefixed names (`momentum/...`, `m1/...`, `m2/...`).
    pub fn named_slots(&self) -> Vec<(String, &crate::Tensor<T>)> {
        let mut out = Vec::new();
        for (prefix, map) in [
            ("momentum", &self.momentum),
            ("m1", &self.first_moment),
            ("m2", &self.second_moment),
        ] {
            out.extend(map.iter().map(|(k, v)| (format!("{prefix}/{k}"), v)));
        }
        out
    }

    /// Inverse of [`named_slots`](Self::named_slots); returns false for an unknown prefix.
    pub fn insert_slot(&mut self, name: &str, value: crate::Tensor<T>) -> bool {
        let Some((prefix, key)) = name.split_once('/') else {
            return false;
        };
        let map = match prefix {
            "momentum" => &mut self.momentum,
            "m1" => &mut self.first_moment,
            "m2" => &mut self.second_moment,
            _ => return false,
        };
        map.insert(key.to_string(), value);
        true
    }
}
