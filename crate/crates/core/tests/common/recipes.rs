//! Reference training recipes.

use reprforge::data::{Split, SyntheticSpec};
use reprforge::train::{load_split, RunConfig};

pub const CLASSIFICATION: &str = "\
task: classification
model: {kind: mlp, hidden: [64], embed_dim: 16}
loss: {name: ce}
optimizer: {name: sgd, lr: 0.05, momentum: 0.9}
scheduler: {warmup_epochs: 5, lr_start: 0.005}
data:
  synthetic: {classes: 3, per_class: 50, image: [1, 16, 16], seed: 1, noise_sigma: 0.1, jitter: 2.0}
  batch_size: 16
train: {epochs: 50, seed: 7, eval_every: 10}
";

pub const RETRIEVAL: &str = "\
task: retrieval
model: {kind: cnn, hidden: [8, 16], embed_dim: 32}
loss: {name: triplet, params: {margin: 0.3}}
optimizer: {name: adam, lr: 0.003}
scheduler: {warmup_epochs: 5, lr_start: 0.0003}
data:
  synthetic: {classes: 10, per_class: 8, image: [1, 16, 16], seed: 2, noise_sigma: 0.1, jitter: 1.5}
train: {epochs: 100, seed: 7, eval_every: 20}
";

pub const FACE: &str = "\
task: face
model: {kind: mlp, hidden: [64], embed_dim: 16}
loss: {name: arcface, params: {s: 16, m: 0.3}}
optimizer: {name: sgd, lr: 0.05}
scheduler: {warmup_epochs: 5, lr_start: 0.005}
data:
  synthetic: {classes: 10, per_class: 8, image: [1, 16, 16], seed: 3, noise_sigma: 0.1, jitter: 1.5}
train: {epochs: 100, seed: 7, eval_every: 20}
";

/// The face data trained as plain classification with cross-entropy.
pub const FACE_AS_CE: &str = "\
task: classification
model: {kind: mlp, hidden: [64], embed_dim: 16}
loss: {name: ce}
optimizer: {name: sgd, lr: 0.05}
scheduler: {warmup_epochs: 5, lr_start: 0.005}
data:
  synthetic: {classes: 10, per_class: 8, image: [1, 16, 16], seed: 3, noise_sigma: 0.1, jitter: 1.5}
  batch_size: 16
train: {epochs: 100, seed: 7, eval_every: 20}
";

/// Classification on quadrant-confined colour blobs with a one-layer CNN
/// encoder, trained under crop and flip augmentation.
pub const GRADCAM: &str = "\
task: classification
model: {kind: cnn, hidden: [8], embed_dim: 16}
loss: {name: ce}
augment: {ops: [{op: random_crop, pad: 6}, {op: hflip, p: 0.5}]}
optimizer: {name: sgd, lr: 0.05, momentum: 0.9}
scheduler: {warmup_epochs: 5, lr_start: 0.005}
data:
  synthetic: {classes: 3, per_class: 50, image: [3, 16, 16], seed: 1, noise_sigma: 0.02, jitter: 1.0, blob_sigma: 1.5, layout: quadrant}
  batch_size: 16
train: {epochs: 50, seed: 7, eval_every: 10}
";

pub fn config(yaml: &str) -> RunConfig {
    RunConfig::from_yaml(yaml).expect("recipe parses")
}

pub fn with_epochs(yaml: &str, epochs: usize) -> RunConfig {
    let mut cfg = config(yaml);
    cfg.train.epochs = epochs;
    cfg
}

pub fn synthetic(cfg: &RunConfig) -> SyntheticSpec {
    cfg.data.synthetic.clone().expect("synthetic recipe")
}

pub fn test_split(cfg: &RunConfig) -> reprforge::data::Dataset {
    load_split(cfg, Split::Test).expect("test split")
}
