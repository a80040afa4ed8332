use std::time::Instant;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Beta, Distribution};
use rayon::prelude::*;

use super::{Checkpoint, MetricRecord, RunConfig, Task, TrainError};
use crate::autodiff::{Tape, Var};
use crate::data::{
    augment_sample, generate, intensity, load_dir, mixup_images, pk_batches, shuffled_batches, Dataset, Split,
};
use crate::losses::{
    arcface_per_sample, circle, cross_entropy_per_sample, focal_per_sample, magface_per_sample, mixup_targets,
    ohem_filter, smoothed_targets, soft_cross_entropy_per_sample, triplet_batch_hard_per_anchor, LossError,
    LossName,
};
use crate::metrics::{
    pair_scores, recall_at_ks, roc_auc, topk_accuracy, verification_pairs, EmbeddingSet, MetricError, Role,
};
use crate::model::{head_logits, EncoderConfig, HeadConfig, Model, ModelParams, ParamMap, NORM_EPS};
use crate::optim::{lr_at, sam_step, OptimState};
use crate::rng::{salt, stream};
use crate::scalar::Real;
use crate::tensor::Tensor;

const EVAL_CHUNK: usize = 64;

pub fn load_split(cfg: &RunConfig, split: Split) -> Result<Dataset, TrainError> {
    let data = match (&cfg.data.synthetic, &cfg.data.path) {
        (Some(spec), _) => generate(spec, split)?,
        (None, Some(path)) => load_dir(path, split)?,
        (None, None) => {
            return Err(TrainError::Validation {
                key: "data".into(),
                msg: "no data source".into(),
            })
        }
    };
    if data.is_empty() {
        return Err(TrainError::EmptySplit(split.as_str().into()));
    }
    Ok(data)
}

fn labels_for(task: Task, data: &Dataset) -> Vec<usize> {
    if task.uses_identities() {
        data.identities()
    } else {
        data.labels()
    }
}

fn label_count(task: Task, data: &Dataset) -> usize {
    labels_for(task, data).into_iter().max().map_or(0, |m| m + 1)
}

fn images<T: Real>(data: &Dataset) -> Result<Vec<Tensor<T>>, TrainError> {
    (0..data.len())
        .map(|i| data.image_tensor(i).map_err(TrainError::from))
        .collect()
}

struct Batch<T> {
    x: Tensor<T>,
    labels: Vec<usize>,
    /// Partner labels and λ when the batch was mixed.
    mix: Option<(Vec<usize>, f64)>,
}

/// Loss and gradients of one batch; borrows only configuration, so the
/// parameters can be perturbed freely (SAM).
struct Objective<'a> {
    cfg: &'a RunConfig,
    encoder: &'a EncoderConfig,
    head: &'a HeadConfig,
}

impl Objective<'_> {
    fn eval<T: Real>(&self, params: &ModelParams<T>, batch: &Batch<T>) -> Result<(T, ParamMap<T>), TrainError> {
        let mut tape = Tape::new();
        let vars = params.bind(&mut tape, true);
        let x = tape.constant(batch.x.clone());
        let trace = self.encoder.forward(&mut tape, &vars, x)?;
        let z = trace.embedding;
        let spec = &self.cfg.loss;
        let labels = &batch.labels;
        let per_sample = match spec.name {
            LossName::Ce => {
                let logits = head_logits(self.head, &mut tape, &vars, z)?;
                let eps = spec.param("eps_smooth");
                match &batch.mix {
                    None => cross_entropy_per_sample(&mut tape, logits, labels, eps)?,
                    Some((partner, lambda)) => {
                        let c = self.head.classes;
                        let t1: Tensor<T> = smoothed_targets(labels, c, eps)?;
                        let t2: Tensor<T> = smoothed_targets(partner, c, eps)?;
                        let mixed = mixup_targets(t1.data(), t2.data(), *lambda)?;
                        let targets = Tensor::new(vec![labels.len(), c], mixed)?;
                        soft_cross_entropy_per_sample(&mut tape, logits, &targets)?
                    }
                }
            }
            LossName::Focal => {
                let logits = head_logits(self.head, &mut tape, &vars, z)?;
                let gamma = spec.param("gamma");
                let own = focal_per_sample(&mut tape, logits, labels, gamma)?;
                match &batch.mix {
                    None => own,
                    Some((partner, lambda)) => {
                        let other = focal_per_sample(&mut tape, logits, partner, gamma)?;
                        let a = tape.mul_scalar(own, T::lit(*lambda))?;
                        let b = tape.mul_scalar(other, T::lit(1.0 - lambda))?;
                        tape.add(a, b)?
                    }
                }
            }
            LossName::Triplet => {
                let zn = tape.l2_normalize(z, T::lit(NORM_EPS))?;
                triplet_batch_hard_per_anchor(&mut tape, zn, labels, spec.param("margin"))?
            }
            LossName::Arcface => {
                let cos = head_logits(self.head, &mut tape, &vars, z)?;
                arcface_per_sample(&mut tape, cos, labels, spec.param("s"), spec.param("m"))?
            }
            LossName::Magface => {
                let cos = head_logits(self.head, &mut tape, &vars, z)?;
                let sq = tape.mul(z, z)?;
                let sq = tape.sum_rows(sq)?;
                let norms = tape.pow_scalar(sq, T::lit(0.5))?;
                magface_per_sample(
                    &mut tape,
                    cos,
                    labels,
                    norms,
                    spec.param("s"),
                    &spec.magface_bounds(),
                    spec.param("lambda_g"),
                )?
            }
            LossName::Circle => circle_pairs(&mut tape, z, labels, spec.param("m"), spec.param("gamma"))?,
        };
        let loss = match spec.ohem_ratio {
            Some(r) => ohem_filter(&mut tape, per_sample, r)?,
            None => tape.mean(per_sample)?,
        };
        tape.backward(loss)?;
        let value = tape.value(loss).data()[0];
        let mut grads = vars.grads(&tape);
        for (name, p) in params.iter() {
            grads.entry(name).or_insert_with(|| Tensor::zeros(p.shape()));
        }
        Ok((value, grads))
    }
}

/// Circle loss over all in-batch pairs of L2-normalized embeddings.
fn circle_pairs<T: Real>(tape: &mut Tape<T>, z: Var, labels: &[usize], m: f64, gamma: f64) -> Result<Var, TrainError> {
    let n = labels.len();
    let zn = tape.l2_normalize(z, T::lit(NORM_EPS))?;
    let znt = tape.transpose(zn)?;
    let sim = tape.matmul(zn, znt)?;
    let flat = tape.reshape(sim, &[n * n])?;
    let (mut pos, mut neg) = (Vec::new(), Vec::new());
    for i in 0..n {
        for j in i + 1..n {
            if labels[i] == labels[j] {
                pos.push(i * n + j);
            } else {
                neg.push(i * n + j);
            }
        }
    }
    let sp = if pos.is_empty() { None } else { Some(tape.gather(flat, &pos)?) };
    let sn = if neg.is_empty() { None } else { Some(tape.gather(flat, &neg)?) };
    circle(tape, sp, sn, m, gamma)?.ok_or_else(|| {
        LossError::DegenerateBatch {
            anchor: 0,
            missing: if pos.is_empty() { "positive" } else { "negative" },
        }
        .into()
    })
}

/// Embeddings of every image, computed in chunks.
fn embed_all<T: Real>(model: &Model<T>, imgs: &[Tensor<T>]) -> Result<Tensor<T>, TrainError> {
    collect_rows(imgs, |x| model.embed(x))
}

fn logits_all<T: Real>(model: &Model<T>, imgs: &[Tensor<T>]) -> Result<Tensor<T>, TrainError> {
    collect_rows(imgs, |x| model.logits(x))
}

fn collect_rows<T: Real>(
    imgs: &[Tensor<T>],
    f: impl Fn(&Tensor<T>) -> Result<Tensor<T>, crate::model::ModelError>,
) -> Result<Tensor<T>, TrainError> {
    let mut data = Vec::new();
    let mut width = 0;
    for chunk in imgs.chunks(EVAL_CHUNK) {
        let out = f(&Dataset::stack(chunk)?)?;
        width = out.row_len();
        data.extend_from_slice(out.data());
    }
    Ok(Tensor::new(vec![imgs.len(), width], data)?)
}

fn metric_err(key: &str) -> impl Fn(MetricError) -> TrainError + '_ {
    move |source| TrainError::Metric {
        key: key.to_string(),
        source,
    }
}

/// Task metrics of `model` on `data`.
fn compute_metrics<T: Real>(
    cfg: &RunConfig,
    model: &Model<T>,
    data: &Dataset,
    imgs: &[Tensor<T>],
    epoch: usize,
    split: &str,
    wall_time: Option<f64>,
) -> Result<Vec<MetricRecord>, TrainError> {
    if data.is_empty() {
        return Err(TrainError::EmptySplit(split.into()));
    }
    let labels = labels_for(cfg.task, data);
    let metrics = cfg.metrics();
    let mut values: Vec<(String, f64)> = Vec::new();
    if cfg.task == Task::Classification {
        let logits = logits_all(model, imgs)?;
        let want_top1 = metrics.iter().any(|m| m == "top1");
        if want_top1 {
            values.push(("top1".into(), topk_accuracy(&logits, &labels, 1).map_err(metric_err("eval.k"))?));
        }
        if metrics.iter().any(|m| m == "topk") {
            for k in cfg.eval_ks(logits.row_len()) {
                if k == 1 && want_top1 {
                    continue;
                }
                let v = topk_accuracy(&logits, &labels, k).map_err(metric_err("eval.k"))?;
                values.push((format!("top{k}"), v));
            }
        }
    } else {
        let emb = embed_all(model, imgs)?;
        let set = EmbeddingSet::new(&emb, labels.clone(), Role::SingleSet).map_err(metric_err("eval"))?;
        if metrics.iter().any(|m| m == "roc_auc") {
            let pairs = verification_pairs(&labels, cfg.train.seed);
            let scores = pair_scores(&set, &pairs);
            let same: Vec<bool> = pairs.iter().map(|p| p.2).collect();
            values.push(("roc_auc".into(), roc_auc(&scores, &same).map_err(metric_err("eval.metrics"))?));
        }
        if metrics.iter().any(|m| m == "recall") {
            let ks = cfg.eval_ks(set.len() - 1);
            let r = recall_at_ks(&set, &set, &ks, cfg.eval.distance).map_err(metric_err("eval.k"))?;
            values.extend(ks.iter().zip(r).map(|(k, v)| (format!("recall@{k}"), v)));
        }
    }
    Ok(values
        .into_iter()
        .map(|(name, value)| MetricRecord {
            epoch,
            split: split.into(),
            name,
            value,
            wall_time,
        })
        .collect())
}

/// Owns the model, optimizer state and data of one run.
pub struct Trainer<T: Real = f64> {
    cfg: RunConfig,
    model: Model<T>,
    optim: OptimState<T>,
    epoch: usize,
    train_images: Vec<Tensor<T>>,
    train_labels: Vec<usize>,
    test: Dataset,
    test_images: Vec<Tensor<T>>,
    records: Vec<MetricRecord>,
    started: Instant,
}

impl<T: Real> Trainer<T> {
    /// Fresh run: loads both splits and initializes the model from
    /// `(seed, INIT)`.
    pub fn new(cfg: RunConfig) -> Result<Self, TrainError> {
        cfg.validate()?;
        let train = load_split(&cfg, Split::Train)?;
        let test = load_split(&cfg, Split::Test)?;
        if test.image != train.image {
            return Err(TrainError::Validation {
                key: "data".into(),
                msg: format!("test images {:?} differ from train images {:?}", test.image, train.image),
            });
        }
        let encoder = cfg.encoder(train.image);
        encoder.validate().map_err(|e| TrainError::Validation {
            key: "model".into(),
            msg: e.to_string(),
        })?;
        let head = cfg.head(label_count(cfg.task, &train));
        let model = Model::init(encoder, head, &mut stream(cfg.train.seed, &[salt::INIT]))?;
        let train_labels = labels_for(cfg.task, &train);
        let known = label_count(cfg.task, &train);
        if let Some(&bad) = labels_for(cfg.task, &test).iter().find(|&&l| l >= known) {
            return Err(TrainError::Validation {
                key: "data".into(),
                msg: format!("test label {bad} unseen in training data"),
            });
        }
        Ok(Self {
            train_images: images(&train)?,
            test_images: images(&test)?,
            train_labels,
            test,
            cfg,
            model,
            optim: OptimState::new(),
            epoch: 0,
            records: Vec::new(),
            started: Instant::now(),
        })
    }

    /// Continues a run from a checkpoint under `cfg` (which may extend
    /// `train.epochs`). Architecture and seed must match.
    pub fn from_checkpoint(cfg: RunConfig, ckpt: Checkpoint<T>) -> Result<Self, TrainError> {
        let mut t = Self::new(cfg)?;
        if ckpt.model.encoder != t.model.encoder || ckpt.model.head != t.model.head {
            return Err(TrainError::Mismatch(format!(
                "checkpoint model {:?}/{:?} vs config {:?}/{:?}",
                ckpt.model.encoder, ckpt.model.head, t.model.encoder, t.model.head
            )));
        }
        if ckpt.seed != t.cfg.train.seed {
            return Err(TrainError::Mismatch(format!(
                "checkpoint seed {} vs config seed {}",
                ckpt.seed, t.cfg.train.seed
            )));
        }
        t.model = ckpt.model;
        t.optim = ckpt.optim;
        t.epoch = ckpt.epoch;
        Ok(t)
    }

    pub fn config(&self) -> &RunConfig {
        &self.cfg
    }

    pub fn model(&self) -> &Model<T> {
        &self.model
    }

    /// Completed epochs.
    pub fn epoch(&self) -> usize {
        self.epoch
    }

    pub fn records(&self) -> &[MetricRecord] {
        &self.records
    }

    pub fn checkpoint(&self) -> Checkpoint<T> {
        Checkpoint {
            config: self.cfg.clone(),
            model: self.model.clone(),
            optim: self.optim.clone(),
            epoch: self.epoch,
            seed: self.cfg.train.seed,
        }
    }

    /// Trains until `train.epochs` epochs are complete.
    pub fn run(&mut self) -> Result<(), TrainError> {
        self.run_until(self.cfg.train.epochs)
    }

    pub fn run_until(&mut self, epoch: usize) -> Result<(), TrainError> {
        while self.epoch < epoch.min(self.cfg.train.epochs) {
            self.train_epoch()?;
        }
        Ok(())
    }

    fn build_batch(&self, idx: &[usize], epoch: usize, batch_no: usize, level: f64) -> Result<Batch<T>, TrainError> {
        let seed = self.cfg.train.seed;
        let plan = &self.cfg.augment;
        let mut imgs: Vec<Tensor<T>> = idx
            .par_iter()
            .map(|&i| augment_sample(plan, &self.train_images[i], epoch, seed, i))
            .collect::<Result<_, _>>()?;
        let labels: Vec<usize> = idx.iter().map(|&i| self.train_labels[i]).collect();
        let mut mix = None;
        if let Some(m) = self.cfg.loss.mixup {
            let mut rng = stream(seed, &[salt::MIXUP, epoch as u64, batch_no as u64]);
            if rng.random::<f64>() < level {
                let beta = Beta::new(m.alpha, m.alpha).map_err(|e| TrainError::Validation {
                    key: "loss.mixup.alpha".into(),
                    msg: e.to_string(),
                })?;
                let lambda: f64 = beta.sample(&mut rng);
                let mut perm: Vec<usize> = (0..idx.len()).collect();
                perm.shuffle(&mut rng);
                imgs = perm
                    .iter()
                    .enumerate()
                    .map(|(i, &j)| mixup_images(&imgs[i], &imgs[j], lambda))
                    .collect::<Result<_, _>>()?;
                mix = Some((perm.iter().map(|&j| labels[j]).collect(), lambda));
            }
        }
        Ok(Batch {
            x: Dataset::stack(&imgs)?,
            labels,
            mix,
        })
    }

    /// Runs one epoch and returns its metric records. On a non-finite loss the
    /// state is rolled back to the start of the epoch.
    pub fn train_epoch(&mut self) -> Result<Vec<MetricRecord>, TrainError> {
        let e = self.epoch;
        let cfg = &self.cfg;
        let lr = lr_at(e, &cfg.schedule())?;
        let level = intensity(e, &cfg.augment);
        let seed = cfg.train.seed;
        let batches = if cfg.uses_pk_sampler() {
            pk_batches(&self.train_labels, cfg.data.sampler.p, cfg.data.sampler.q, seed, e)?
        } else {
            shuffled_batches(self.train_labels.len(), cfg.data.batch_size, seed, e)
        };
        let snapshot = (self.model.params.clone(), self.optim.clone());
        let mut total = 0.0;
        for (b, idx) in batches.iter().enumerate() {
            match self.step(idx, e, b, level, lr) {
                Ok(loss) if loss.is_finite() => total += loss,
                Ok(_) => return Err(self.diverged(snapshot, b)),
                Err(err) if err.is_non_finite() => return Err(self.diverged(snapshot, b)),
                Err(err) => {
                    (self.model.params, self.optim) = snapshot;
                    return Err(err);
                }
            }
        }
        self.epoch += 1;
        let wall = Some(self.started.elapsed().as_secs_f64());
        let mean_loss = total / batches.len().max(1) as f64;
        log::info!("epoch {} loss {mean_loss:.6} lr {lr:.6}", self.epoch);
        let mut out = vec![
            MetricRecord {
                epoch: self.epoch,
                split: "train".into(),
                name: "loss".into(),
                value: mean_loss,
                wall_time: wall,
            },
            MetricRecord {
                epoch: self.epoch,
                split: "train".into(),
                name: "lr".into(),
                value: lr,
                wall_time: wall,
            },
        ];
        if self.epoch.is_multiple_of(self.cfg.train.eval_every) || self.epoch == self.cfg.train.epochs {
            out.extend(compute_metrics(
                &self.cfg,
                &self.model,
                &self.test,
                &self.test_images,
                self.epoch,
                "test",
                wall,
            )?);
        }
        self.records.extend(out.iter().cloned());
        Ok(out)
    }

    fn diverged(&mut self, snapshot: (ModelParams<T>, OptimState<T>), batch: usize) -> TrainError {
        (self.model.params, self.optim) = snapshot;
        log::error!("non-finite loss at epoch {}, batch {batch}", self.epoch + 1);
        TrainError::NumericalDivergence {
            epoch: self.epoch + 1,
            batch,
            last_good_epoch: self.epoch,
        }
    }

    fn step(&mut self, idx: &[usize], epoch: usize, batch_no: usize, level: f64, lr: f64) -> Result<f64, TrainError> {
        let batch = self.build_batch(idx, epoch, batch_no, level)?;
        let objective = Objective {
            cfg: &self.cfg,
            encoder: &self.model.encoder,
            head: &self.model.head,
        };
        let opt = &self.cfg.optimizer;
        let base = opt.base();
        let loss = if opt.sam_rho > 0.0 {
            sam_step(
                &mut self.model.params,
                |p: &ModelParams<T>| objective.eval(p, &batch),
                &base,
                opt.sam_rho,
                &mut self.optim,
                lr,
                &opt.lr_scale,
            )?
        } else {
            let (loss, grads) = objective.eval(&self.model.params, &batch)?;
            base.step(&mut self.model.params, &grads, &mut self.optim, lr, &opt.lr_scale)?;
            loss
        };
        if !self.model.params.iter().all(|(_, p)| p.all_finite()) {
            return Ok(f64::NAN);
        }
        Ok(loss.as_f64())
    }

    /// Metrics on a split at the current epoch.
    pub fn evaluate(&self, split: Split) -> Result<Vec<MetricRecord>, TrainError> {
        let wall = Some(self.started.elapsed().as_secs_f64());
        match split {
            Split::Test => compute_metrics(&self.cfg, &self.model, &self.test, &self.test_images, self.epoch, "test", wall),
            Split::Train => {
                let train = load_split(&self.cfg, Split::Train)?;
                compute_metrics(&self.cfg, &self.model, &train, &self.train_images, self.epoch, "train", wall)
            }
        }
    }
}

/// Full run: returns the final checkpoint and every metric record.
pub fn train_run(cfg: RunConfig) -> Result<(Checkpoint, Vec<MetricRecord>), TrainError> {
    let mut t: Trainer<f64> = Trainer::new(cfg)?;
    t.run()?;
    Ok((t.checkpoint(), t.records.clone()))
}

/// Metrics of a checkpoint on `split` ("train" or "test"), without timing.
pub fn evaluate<T: Real>(cfg: &RunConfig, ckpt: &Checkpoint<T>, split: &str) -> Result<Vec<MetricRecord>, TrainError> {
    let s = Split::parse(split).ok_or_else(|| TrainError::UnknownSplit(split.into()))?;
    let data = load_split(cfg, s)?;
    if data.image != ckpt.model.encoder.input_shape {
        return Err(TrainError::Mismatch(format!(
            "split images {:?} vs model input {:?}",
            data.image, ckpt.model.encoder.input_shape
        )));
    }
    let imgs = images(&data)?;
    compute_metrics(cfg, &ckpt.model, &data, &imgs, ckpt.epoch, split, None)
}
