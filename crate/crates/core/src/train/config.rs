use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::TrainError;
use crate::data::{AugmentPlan, SyntheticSpec};
use crate::losses::{LossName, LossSpec};
use crate::metrics::Metric;
use crate::model::{EncoderConfig, EncoderKind, HeadConfig, HeadKind};
use crate::optim::{AdamConfig, BaseOptimizer, LrScale, ScheduleSpec, SgdConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Classification,
    Face,
    Retrieval,
}

impl Task {
    pub fn as_str(self) -> &'static str {
        match self {
            Task::Classification => "classification",
            Task::Face => "face",
            Task::Retrieval => "retrieval",
        }
    }

    pub fn allowed_losses(self) -> &'static [LossName] {
        match self {
            Task::Classification => &[LossName::Ce, LossName::Focal],
            Task::Face => &[LossName::Arcface, LossName::Circle, LossName::Magface],
            Task::Retrieval => &[LossName::Triplet, LossName::Arcface],
        }
    }

    /// Whether labels are identities (metric learning) rather than classes.
    pub fn uses_identities(self) -> bool {
        self != Task::Classification
    }

    pub fn default_metrics(self) -> &'static [&'static str] {
        match self {
            Task::Classification => &["top1", "topk"],
            Task::Face => &["roc_auc", "recall"],
            Task::Retrieval => &["recall"],
        }
    }
}

/// Complete run description, as read from YAML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub task: Task,
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub loss: LossSpec,
    #[serde(default)]
    pub optimizer: OptimizerSection,
    #[serde(default)]
    pub scheduler: SchedulerSection,
    #[serde(default)]
    pub augment: AugmentPlan,
    pub data: DataSection,
    pub train: TrainSection,
    #[serde(default)]
    pub eval: EvalSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    #[serde(default = "default_kind")]
    pub kind: EncoderKind,
    #[serde(default = "default_hidden")]
    pub hidden: Vec<usize>,
    #[serde(default = "default_embed")]
    pub embed_dim: usize,
}

fn default_kind() -> EncoderKind {
    EncoderKind::Mlp
}
fn default_hidden() -> Vec<usize> {
    vec![64]
}
fn default_embed() -> usize {
    16
}

impl Default for ModelSection {
    fn default() -> Self {
        Self {
            kind: default_kind(),
            hidden: default_hidden(),
            embed_dim: default_embed(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerName {
    Sgd,
    Adam,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerSection {
    #[serde(default = "default_opt")]
    pub name: OptimizerName,
    #[serde(default = "default_lr")]
    pub lr: f64,
    #[serde(default = "default_momentum")]
    pub momentum: f64,
    #[serde(default)]
    pub weight_decay: f64,
    #[serde(default = "default_beta1")]
    pub beta1: f64,
    #[serde(default = "default_beta2")]
    pub beta2: f64,
    #[serde(default = "default_adam_eps")]
    pub eps: f64,
    /// SAM neighborhood radius; 0 disables SAM.
    #[serde(default)]
    pub sam_rho: f64,
    #[serde(default)]
    pub lr_scale: LrScale,
}

fn default_opt() -> OptimizerName {
    OptimizerName::Sgd
}
fn default_lr() -> f64 {
    0.1
}
fn default_momentum() -> f64 {
    0.9
}
fn default_beta1() -> f64 {
    0.9
}
fn default_beta2() -> f64 {
    0.999
}
fn default_adam_eps() -> f64 {
    1e-8
}

impl Default for OptimizerSection {
    fn default() -> Self {
        Self {
            name: default_opt(),
            lr: default_lr(),
            momentum: default_momentum(),
            weight_decay: 0.0,
            beta1: default_beta1(),
            beta2: default_beta2(),
            eps: default_adam_eps(),
            sam_rho: 0.0,
            lr_scale: LrScale::default(),
        }
    }
}

impl OptimizerSection {
    pub fn base(&self) -> BaseOptimizer {
        match self.name {
            OptimizerName::Sgd => BaseOptimizer::Sgd(SgdConfig {
                momentum: self.momentum,
                weight_decay: self.weight_decay,
            }),
            OptimizerName::Adam => BaseOptimizer::Adam(AdamConfig {
                beta1: self.beta1,
                beta2: self.beta2,
                eps: self.eps,
                weight_decay: self.weight_decay,
            }),
        }
    }
}

/// Warmup + cosine schedule; the peak is `optimizer.lr`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchedulerSection {
    #[serde(default)]
    pub warmup_epochs: usize,
    /// Length of the schedule; defaults to `train.epochs`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub total_epochs: Option<usize>,
    #[serde(default)]
    pub lr_start: f64,
    #[serde(default)]
    pub eta_min: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerSection {
    #[serde(default = "four")]
    pub p: usize,
    #[serde(default = "four")]
    pub q: usize,
}

fn four() -> usize {
    4
}

impl Default for SamplerSection {
    fn default() -> Self {
        Self { p: 4, q: 4 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synthetic: Option<SyntheticSpec>,
    /// Dataset directory (`train.dord`/`test.dord` or `train/`/`test/` image folders).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    /// P×Q identity sampler used by the face and retrieval tasks.
    #[serde(default)]
    pub sampler: SamplerSection,
}

fn default_batch() -> usize {
    32
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    pub epochs: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "one")]
    pub eval_every: usize,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalSection {
    /// Subset of `top1`, `topk`, `recall`, `roc_auc`; defaults per task.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metrics: Option<Vec<String>>,
    /// Cutoffs for top-k and Recall@K; defaults to `[1, 5]` limited to what
    /// the data allows.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<Vec<usize>>,
    #[serde(default = "default_metric")]
    pub distance: Metric,
}

const DEFAULT_KS: [usize; 2] = [1, 5];
fn default_metric() -> Metric {
    Metric::Cosine
}

impl Default for EvalSection {
    fn default() -> Self {
        Self {
            metrics: None,
            k: None,
            distance: default_metric(),
        }
    }
}

impl RunConfig {
    pub fn from_yaml(text: &str) -> Result<Self, TrainError> {
        let cfg: RunConfig = serde_yaml::from_str(text).map_err(|e| TrainError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_yaml(&self) -> String {
        serde_yaml::to_string(self).expect("config serializes")
    }

    pub fn metrics(&self) -> Vec<String> {
        match &self.eval.metrics {
            Some(m) => m.clone(),
            None => self.task.default_metrics().iter().map(|s| s.to_string()).collect(),
        }
    }

    /// Evaluation cutoffs; defaults are dropped when they exceed `limit`.
    pub fn eval_ks(&self, limit: usize) -> Vec<usize> {
        match &self.eval.k {
            Some(k) => k.clone(),
            None => DEFAULT_KS.iter().copied().filter(|&k| k <= limit.max(1)).collect(),
        }
    }

    pub fn schedule(&self) -> ScheduleSpec {
        ScheduleSpec {
            warmup_epochs: self.scheduler.warmup_epochs,
            total_epochs: self.scheduler.total_epochs.unwrap_or(self.train.epochs),
            lr_peak: self.optimizer.lr,
            lr_start: self.scheduler.lr_start,
            eta_min: self.scheduler.eta_min,
        }
    }

    /// Head implied by the loss.
    pub fn head_kind(&self) -> HeadKind {
        match self.loss.name {
            LossName::Ce | LossName::Focal => HeadKind::Linear,
            LossName::Arcface | LossName::Magface => HeadKind::Cosine,
            LossName::Triplet | LossName::Circle => HeadKind::None,
        }
    }

    pub fn encoder(&self, input_shape: [usize; 3]) -> EncoderConfig {
        EncoderConfig {
            kind: self.model.kind,
            input_shape,
            hidden: self.model.hidden.clone(),
            embed_dim: self.model.embed_dim,
        }
    }

    pub fn head(&self, classes: usize) -> HeadConfig {
        match self.head_kind() {
            HeadKind::None => HeadConfig::none(),
            kind => HeadConfig { kind, classes },
        }
    }

    /// Whether training batches come from the P×Q identity sampler.
    pub fn uses_pk_sampler(&self) -> bool {
        self.task.uses_identities()
    }

    /// Checks every cross-field rule; errors name the offending key path.
    pub fn validate(&self) -> Result<(), TrainError> {
        let fail = |key: &str, msg: String| Err(TrainError::Validation { key: key.to_string(), msg });
        if !self.task.allowed_losses().contains(&self.loss.name) {
            let allowed: Vec<&str> = self.task.allowed_losses().iter().map(|l| l.as_str()).collect();
            return fail(
                "loss.name",
                format!(
                    "`{}` is not valid for task `{}` (allowed: {})",
                    self.loss.name.as_str(),
                    self.task.as_str(),
                    allowed.join(", ")
                ),
            );
        }
        self.loss.validate().map_err(|(k, msg)| TrainError::Validation {
            key: format!("loss.{k}"),
            msg,
        })?;
        if self.model.hidden.is_empty() || self.model.hidden.contains(&0) {
            return fail("model.hidden", format!("{:?} must be non-empty and positive", self.model.hidden));
        }
        if self.model.embed_dim < 2 {
            return fail("model.embed_dim", format!("{} must be >= 2", self.model.embed_dim));
        }
        let o = &self.optimizer;
        if !(o.lr >= 0.0 && o.lr.is_finite()) {
            return fail("optimizer.lr", format!("{} must be >= 0", o.lr));
        }
        if !(0.0..1.0).contains(&o.momentum) {
            return fail("optimizer.momentum", format!("{} must be in [0, 1)", o.momentum));
        }
        if !(o.weight_decay >= 0.0) {
            return fail("optimizer.weight_decay", format!("{} must be >= 0", o.weight_decay));
        }
        if !(0.0..1.0).contains(&o.beta1) {
            return fail("optimizer.beta1", format!("{} must be in [0, 1)", o.beta1));
        }
        if !(0.0..1.0).contains(&o.beta2) {
            return fail("optimizer.beta2", format!("{} must be in [0, 1)", o.beta2));
        }
        if !(o.eps > 0.0) {
            return fail("optimizer.eps", format!("{} must be > 0", o.eps));
        }
        if !(o.sam_rho >= 0.0 && o.sam_rho.is_finite()) {
            return fail("optimizer.sam_rho", format!("{} must be >= 0", o.sam_rho));
        }
        for (k, v) in [("encoder", o.lr_scale.encoder), ("head", o.lr_scale.head)] {
            if !(v >= 0.0 && v.is_finite()) {
                return fail(&format!("optimizer.lr_scale.{k}"), format!("{v} must be >= 0"));
            }
        }
        if self.train.epochs > 0 || self.scheduler.total_epochs.is_some() {
            let s = self.schedule();
            if s.total_epochs <= s.warmup_epochs {
                return fail(
                    "scheduler.total_epochs",
                    format!("{} must exceed warmup_epochs {}", s.total_epochs, s.warmup_epochs),
                );
            }
            if s.total_epochs < self.train.epochs {
                return fail(
                    "scheduler.total_epochs",
                    format!("{} is shorter than train.epochs {}", s.total_epochs, self.train.epochs),
                );
            }
            if !(s.lr_start >= 0.0 && s.lr_start <= s.lr_peak) {
                return fail("scheduler.lr_start", format!("{} must be in [0, optimizer.lr]", s.lr_start));
            }
            if !(s.eta_min >= 0.0 && s.eta_min <= s.lr_peak) {
                return fail("scheduler.eta_min", format!("{} must be in [0, optimizer.lr]", s.eta_min));
            }
        }
        match (&self.data.synthetic, &self.data.path) {
            (Some(_), Some(_)) | (None, None) => {
                return fail("data", "exactly one of `synthetic` or `path` is required".into());
            }
            (Some(spec), None) => {
                spec.validate().map_err(|(k, msg)| TrainError::Validation {
                    key: format!("data.synthetic.{k}"),
                    msg,
                })?;
                if self.model.kind == EncoderKind::Cnn {
                    let probe = self.encoder(spec.image);
                    if let Err(e) = probe.validate() {
                        return fail("model.hidden", e.to_string());
                    }
                }
                self.augment.validate(spec.image).map_err(|(k, msg)| TrainError::Validation {
                    key: format!("augment.{k}"),
                    msg,
                })?;
                if let (Task::Classification, Some(ks)) = (self.task, &self.eval.k) {
                    if let Some(&k) = ks.iter().find(|&&k| k > spec.classes) {
                        if self.metrics().iter().any(|m| m == "topk") {
                            return fail("eval.k", format!("{k} exceeds {} classes", spec.classes));
                        }
                    }
                }
            }
            (None, Some(_)) => {}
        }
        if self.data.batch_size < 2 {
            return fail("data.batch_size", format!("{} must be >= 2", self.data.batch_size));
        }
        if self.uses_pk_sampler() {
            if self.data.sampler.p < 2 {
                return fail("data.sampler.p", format!("{} must be >= 2", self.data.sampler.p));
            }
            if self.data.sampler.q < 2 {
                return fail(
                    "data.sampler.q",
                    format!("{} must be >= 2 so every identity has a positive", self.data.sampler.q),
                );
            }
        }
        if self.train.eval_every == 0 {
            return fail("train.eval_every", "must be >= 1".into());
        }
        if let Some(ks) = &self.eval.k {
            if ks.is_empty() || ks.contains(&0) {
                return fail("eval.k", format!("{ks:?} must be non-empty and positive"));
            }
        }
        let valid: &[&str] = match self.task {
            Task::Classification => &["top1", "topk"],
            Task::Face => &["roc_auc", "recall"],
            Task::Retrieval => &["recall"],
        };
        for m in self.metrics() {
            if !valid.contains(&m.as_str()) {
                return fail(
                    "eval.metrics",
                    format!("`{m}` is not available for task `{}`", self.task.as_str()),
                );
            }
        }
        Ok(())
    }
}

/// Reads, parses and validates a YAML run config. A relative `data.path` is
/// resolved against the config file's directory.
pub fn load_config(path: &Path) -> Result<RunConfig, TrainError> {
    let text = fs::read_to_string(path).map_err(|e| TrainError::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    let mut cfg = RunConfig::from_yaml(&text)?;
    if let Some(p) = &cfg.data.path {
        if p.is_relative() {
            if let Some(dir) = path.parent() {
                cfg.data.path = Some(dir.join(p));
            }
        }
    }
    Ok(cfg)
}
