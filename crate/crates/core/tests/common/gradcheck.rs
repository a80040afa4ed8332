//! Central finite-difference checks of tape gradients.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use reprforge::losses::{
    arcface, batch_hard_mining, circle, cross_entropy, cross_entropy_per_sample, focal, magface, mixup_targets,
    ohem_filter, ohem_select, soft_cross_entropy_per_sample, triplet_batch_hard, MagFaceBounds, PairwiseDistances,
};
use reprforge::model::{cosine_logits, EncoderConfig, EncoderKind, HeadConfig, Model, ModelParams};
use reprforge::rng::stream;
use reprforge::{Tape, Tensor, Var};

use super::{away_from_zero, uniform};

pub const H: f64 = 1e-5;
pub const TOL: f64 = 1e-6;
pub const INSTANCES: usize = 100;

/// Largest elementwise `|a − n| / max(1, |a|)` over all inputs.
pub fn rel_error(analytic: &[Tensor], numeric: &[Tensor]) -> f64 {
    analytic
        .iter()
        .zip(numeric)
        .flat_map(|(a, n)| a.data().iter().zip(n.data()))
        .map(|(&x, &y)| (x - y).abs() / x.abs().max(1.0))
        .fold(0.0, f64::max)
}

/// Central differences of `eval` with step [`H`] in every input element.
pub fn numeric_grad(inputs: &[Tensor], eval: impl Fn(&[Tensor]) -> f64) -> Vec<Tensor> {
    let mut xs = inputs.to_vec();
    let mut out = Vec::with_capacity(inputs.len());
    for i in 0..inputs.len() {
        let mut g = Vec::with_capacity(inputs[i].len());
        for j in 0..inputs[i].len() {
            let orig = inputs[i].data()[j];
            xs[i] = with_element(&inputs[i], j, orig + H);
            let up = eval(&xs);
            xs[i] = with_element(&inputs[i], j, orig - H);
            let down = eval(&xs);
            g.push((up - down) / (2.0 * H));
        }
        xs[i] = inputs[i].clone();
        out.push(Tensor::new(inputs[i].shape().to_vec(), g).unwrap());
    }
    out
}

fn with_element(t: &Tensor, j: usize, v: f64) -> Tensor {
    let mut data = t.data().to_vec();
    data[j] = v;
    Tensor::new(t.shape().to_vec(), data).unwrap()
}

/// Checks `f` against finite differences after projecting its output onto
/// random weights, so every output element contributes.
pub fn check_tape<F>(rng: &mut ChaCha8Rng, inputs: Vec<Tensor>, f: F) -> f64
where
    F: Fn(&mut Tape, &[Var]) -> Var,
{
    let mut tape: Tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.leaf(t.clone())).collect();
    let out = f(&mut tape, &vars);
    let weights = uniform(rng, tape.shape(out), -1.0, 1.0);
    let w = tape.constant(weights.clone());
    let prod = tape.mul(out, w).unwrap();
    let total = tape.sum(prod).unwrap();
    tape.backward(total).unwrap();
    let analytic: Vec<Tensor> = vars
        .iter()
        .zip(&inputs)
        .map(|(&v, t)| tape.grad(v).cloned().unwrap_or_else(|| Tensor::zeros(t.shape())))
        .collect();
    let numeric = numeric_grad(&inputs, |xs| {
        let mut tape: Tape = Tape::new();
        let vars: Vec<Var> = xs.iter().map(|t| tape.constant(t.clone())).collect();
        let out = f(&mut tape, &vars);
        tape.value(out).data().iter().zip(weights.data()).map(|(a, b)| a * b).sum()
    });
    rel_error(&analytic, &numeric)
}

type Case = fn(&mut ChaCha8Rng) -> f64;

fn dims(rng: &mut ChaCha8Rng) -> [usize; 2] {
    [rng.random_range(1..=4), rng.random_range(1..=5)]
}

fn labels(rng: &mut ChaCha8Rng, n: usize, c: usize) -> Vec<usize> {
    (0..n).map(|_| rng.random_range(0..c)).collect()
}

fn unary(rng: &mut ChaCha8Rng, x: Tensor, op: fn(&mut Tape, Var) -> Var) -> f64 {
    check_tape(rng, vec![x], move |t, v| op(t, v[0]))
}

fn binary(rng: &mut ChaCha8Rng, op: fn(&mut Tape, Var, Var) -> Var) -> f64 {
    let s = dims(rng);
    let a = uniform(rng, &s, -2.0, 2.0);
    let b = uniform(rng, &s, -2.0, 2.0);
    check_tape(rng, vec![a, b], move |t, v| op(t, v[0], v[1]))
}

fn op_matmul(rng: &mut ChaCha8Rng) -> f64 {
    let (n, k, m) = (rng.random_range(1..=4), rng.random_range(1..=4), rng.random_range(1..=4));
    let a = uniform(rng, &[n, k], -1.0, 1.0);
    let b = uniform(rng, &[k, m], -1.0, 1.0);
    check_tape(rng, vec![a, b], |t, v| t.matmul(v[0], v[1]).unwrap())
}

fn op_conv2d(rng: &mut ChaCha8Rng) -> f64 {
    let (n, c, f) = (rng.random_range(1..=2), rng.random_range(1..=2), rng.random_range(1..=3));
    let (h, w) = (rng.random_range(3..=6), rng.random_range(3..=6));
    let kh = rng.random_range(1..=3);
    let stride = rng.random_range(1..=2);
    let pad = rng.random_range(0..=1);
    let x = uniform(rng, &[n, c, h, w], -1.0, 1.0);
    let k = uniform(rng, &[f, c, kh, kh], -1.0, 1.0);
    check_tape(rng, vec![x, k], move |t, v| t.conv2d(v[0], v[1], stride, pad).unwrap())
}

fn op_max_pool2(rng: &mut ChaCha8Rng) -> f64 {
    // distinct values on a 0.01 grid keep every window's argmax stable
    let shape = [rng.random_range(1..=2), rng.random_range(1..=2), rng.random_range(2..=5), rng.random_range(2..=5)];
    let n: usize = shape.iter().product();
    let mut vals: Vec<f64> = (0..n).map(|i| i as f64 * 0.01).collect();
    vals.shuffle(rng);
    let x = Tensor::new(shape.to_vec(), vals).unwrap();
    unary(rng, x, |t, v| t.max_pool2(v).unwrap())
}

fn op_add(rng: &mut ChaCha8Rng) -> f64 {
    binary(rng, |t, a, b| t.add(a, b).unwrap())
}

fn op_sub(rng: &mut ChaCha8Rng) -> f64 {
    binary(rng, |t, a, b| t.sub(a, b).unwrap())
}

fn op_mul(rng: &mut ChaCha8Rng) -> f64 {
    binary(rng, |t, a, b| t.mul(a, b).unwrap())
}

fn op_add_scalar(rng: &mut ChaCha8Rng) -> f64 {
    let s = dims(rng);
    let x = uniform(rng, &s, -2.0, 2.0);
    unary(rng, x, |t, v| t.add_scalar(v, 0.7).unwrap())
}

fn op_mul_scalar(rng: &mut ChaCha8Rng) -> f64 {
    let s = dims(rng);
    let x = uniform(rng, &s, -2.0, 2.0);
    unary(rng, x, |t, v| t.mul_scalar(v, -1.3).unwrap())
}

fn op_neg(rng: &mut ChaCha8Rng) -> f64 {
    let s = dims(rng);
    let x = uniform(rng, &s, -2.0, 2.0);
    unary(rng, x, |t, v| t.neg(v).unwrap())
}

fn op_pow_scalar(rng: &mut ChaCha8Rng) -> f64 {
    let s = dims(rng);
    let x = uniform(rng, &s, 0.2, 2.0);
    let p = rng.random_range(-2.0..3.0);
    check_tape(rng, vec![x], move |t, v| t.pow_scalar(v[0], p).unwrap())
}

fn op_relu(rng: &mut ChaCha8Rng) -> f64 {
    let s = dims(rng);
    let x = away_from_zero(rng, &s, 0.05, 2.0);
    unary(rng, x, |t, v| t.relu(v).unwrap())
}

fn op_softmax(rng: &mut ChaCha8Rng) -> f64 {
    let s = dims(rng);
    let x = uniform(rng, &s, -3.0, 3.0);
    unary(rng, x, |t, v| t.softmax(v).unwrap())
}

fn op_log_softmax(rng: &mut ChaCha8Rng) -> f64 {
    let s = dims(rng);
    let x = uniform(rng, &s, -3.0, 3.0);
    unary(rng, x, |t, v| t.log_softmax(v).unwrap())
}

fn op_l2_normalize(rng: &mut ChaCha8Rng) -> f64 {
    let s = dims(rng);
    let x = away_from_zero(rng, &s, 0.1, 2.0);
    unary(rng, x, |t, v| t.l2_normalize(v, 1e-12).unwrap())
}

fn op_sum(rng: &mut ChaCha8Rng) -> f64 {
    let s = dims(rng);
    let x = uniform(rng, &s, -2.0, 2.0);
    unary(rng, x, |t, v| t.sum(v).unwrap())
}

fn op_mean(rng: &mut ChaCha8Rng) -> f64 {
    let s = dims(rng);
    let x = uniform(rng, &s, -2.0, 2.0);
    unary(rng, x, |t, v| t.mean(v).unwrap())
}

fn op_sum_rows(rng: &mut ChaCha8Rng) -> f64 {
    let s = dims(rng);
    let x = uniform(rng, &s, -2.0, 2.0);
    unary(rng, x, |t, v| t.sum_rows(v).unwrap())
}

fn op_arccos(rng: &mut ChaCha8Rng) -> f64 {
    let s = dims(rng);
    let x = uniform(rng, &s, -0.95, 0.95);
    unary(rng, x, |t, v| t.arccos(v).unwrap())
}

fn op_cos(rng: &mut ChaCha8Rng) -> f64 {
    let s = dims(rng);
    let x = uniform(rng, &s, -4.0, 4.0);
    unary(rng, x, |t, v| t.cos(v).unwrap())
}

fn op_exp(rng: &mut ChaCha8Rng) -> f64 {
    let s = dims(rng);
    let x = uniform(rng, &s, -2.0, 2.0);
    unary(rng, x, |t, v| t.exp(v).unwrap())
}

fn op_log(rng: &mut ChaCha8Rng) -> f64 {
    let s = dims(rng);
    let x = uniform(rng, &s, 0.1, 3.0);
    unary(rng, x, |t, v| t.log(v).unwrap())
}

fn op_gather(rng: &mut ChaCha8Rng) -> f64 {
    let s = dims(rng);
    let x = uniform(rng, &s, -2.0, 2.0);
    let idx: Vec<usize> = (0..rng.random_range(1..=8)).map(|_| rng.random_range(0..s[0] * s[1])).collect();
    check_tape(rng, vec![x], move |t, v| t.gather(v[0], &idx).unwrap())
}

fn op_gather_rows(rng: &mut ChaCha8Rng) -> f64 {
    let [n, c] = dims(rng);
    let x = uniform(rng, &[n, c], -2.0, 2.0);
    let cols = labels(rng, n, c);
    check_tape(rng, vec![x], move |t, v| t.gather_rows(v[0], &cols).unwrap())
}

fn op_take_rows(rng: &mut ChaCha8Rng) -> f64 {
    let [n, c] = dims(rng);
    let x = uniform(rng, &[n, c], -2.0, 2.0);
    let rows: Vec<usize> = (0..rng.random_range(1..=6)).map(|_| rng.random_range(0..n)).collect();
    check_tape(rng, vec![x], move |t, v| t.take_rows(v[0], &rows).unwrap())
}

fn op_transpose(rng: &mut ChaCha8Rng) -> f64 {
    let s = dims(rng);
    let x = uniform(rng, &s, -2.0, 2.0);
    unary(rng, x, |t, v| t.transpose(v).unwrap())
}

fn op_reshape(rng: &mut ChaCha8Rng) -> f64 {
    let [n, c] = dims(rng);
    let x = uniform(rng, &[n, c], -2.0, 2.0);
    check_tape(rng, vec![x], move |t, v| t.reshape(v[0], &[c, n]).unwrap())
}

fn op_concat(rng: &mut ChaCha8Rng) -> f64 {
    let s = dims(rng);
    let a = uniform(rng, &s, -2.0, 2.0);
    let s = dims(rng);
    let b = uniform(rng, &s, -2.0, 2.0);
    check_tape(rng, vec![a, b], |t, v| t.concat(&[v[0], v[1], v[0]]).unwrap())
}

fn op_add_row_bias(rng: &mut ChaCha8Rng) -> f64 {
    let [n, c] = dims(rng);
    let x = uniform(rng, &[n, c], -2.0, 2.0);
    let b = uniform(rng, &[c], -2.0, 2.0);
    check_tape(rng, vec![x, b], |t, v| t.add_row_bias(v[0], v[1]).unwrap())
}

fn classes_batch(rng: &mut ChaCha8Rng) -> (usize, usize, Vec<usize>) {
    let n = rng.random_range(1..=6);
    let c = rng.random_range(2..=5);
    let y = labels(rng, n, c);
    (n, c, y)
}

fn loss_ce(rng: &mut ChaCha8Rng) -> f64 {
    let (n, c, y) = classes_batch(rng);
    let eps = if rng.random_bool(0.5) { 0.0 } else { rng.random_range(0.0..0.3) };
    let x = uniform(rng, &[n, c], -3.0, 3.0);
    check_tape(rng, vec![x], move |t, v| cross_entropy(t, v[0], &y, eps).unwrap())
}

fn loss_mixup_soft_ce(rng: &mut ChaCha8Rng) -> f64 {
    let (n, c, y1) = classes_batch(rng);
    let y2 = labels(rng, n, c);
    let lambda = rng.random_range(0.0..1.0);
    let onehot = |y: usize| -> Vec<f64> { (0..c).map(|j| if j == y { 1.0 } else { 0.0 }).collect() };
    let rows: Vec<f64> = y1
        .iter()
        .zip(&y2)
        .flat_map(|(&a, &b)| mixup_targets(&onehot(a), &onehot(b), lambda).unwrap())
        .collect();
    let targets = Tensor::new(vec![n, c], rows).unwrap();
    let x = uniform(rng, &[n, c], -3.0, 3.0);
    check_tape(rng, vec![x], move |t, v| soft_cross_entropy_per_sample(t, v[0], &targets).unwrap())
}

fn loss_focal(rng: &mut ChaCha8Rng) -> f64 {
    let (n, c, y) = classes_batch(rng);
    let gamma = rng.random_range(0.0..3.0);
    let x = uniform(rng, &[n, c], -3.0, 3.0);
    check_tape(rng, vec![x], move |t, v| focal(t, v[0], &y, gamma).unwrap())
}

/// Embeddings whose batch-hard selections and hinge signs all survive a
/// perturbation of size [`H`].
fn stable_triplet_batch(rng: &mut ChaCha8Rng, alpha: f64) -> (Tensor, Vec<usize>) {
    loop {
        let p = rng.random_range(2..=4);
        let q = rng.random_range(2..=3);
        let d = rng.random_range(1..=4);
        let ids: Vec<usize> = (0..p * q).map(|i| i / q).collect();
        let z = uniform(rng, &[p * q, d], -1.0, 1.0);
        let dist = PairwiseDistances::from_embeddings(&z).unwrap();
        let mined = batch_hard_mining(&dist, &ids).unwrap();
        let n = ids.len();
        let stable = mined.iter().all(|&(a, pos, neg)| {
            let hinge = dist.get(a, pos) - dist.get(a, neg) + alpha;
            let pos_gap = (0..n)
                .filter(|&j| j != a && j != pos && ids[j] == ids[a])
                .map(|j| dist.get(a, pos) - dist.get(a, j))
                .fold(f64::INFINITY, f64::min);
            let neg_gap = (0..n)
                .filter(|&j| j != neg && ids[j] != ids[a])
                .map(|j| dist.get(a, j) - dist.get(a, neg))
                .fold(f64::INFINITY, f64::min);
            hinge.abs() > 1e-3 && pos_gap > 1e-3 && neg_gap > 1e-3
        });
        if stable {
            return (z, ids);
        }
    }
}

fn loss_triplet(rng: &mut ChaCha8Rng) -> f64 {
    let alpha = 0.3;
    let (z, ids) = stable_triplet_batch(rng, alpha);
    check_tape(rng, vec![z], move |t, v| triplet_batch_hard(t, v[0], &ids, alpha).unwrap())
}

fn cosines(rng: &mut ChaCha8Rng, n: usize, c: usize) -> Tensor {
    uniform(rng, &[n, c], -0.9, 0.9)
}

fn loss_arcface(rng: &mut ChaCha8Rng) -> f64 {
    let (n, c, y) = classes_batch(rng);
    let s = rng.random_range(1.0..64.0);
    let m = rng.random_range(0.0..0.45);
    let x = cosines(rng, n, c);
    check_tape(rng, vec![x], move |t, v| arcface(t, v[0], &y, s, m).unwrap())
}

fn loss_arcface_wrapped(rng: &mut ChaCha8Rng) -> f64 {
    // target angles within 0.5 of π so θ + m wraps past π
    let (n, c, y) = classes_batch(rng);
    let mut x = cosines(rng, n, c);
    let mut data = x.data().to_vec();
    for (i, &yi) in y.iter().enumerate() {
        data[i * c + yi] = rng.random_range(-0.995..-0.95);
    }
    x = Tensor::new(vec![n, c], data).unwrap();
    let s = rng.random_range(1.0..16.0);
    check_tape(rng, vec![x], move |t, v| arcface(t, v[0], &y, s, 0.5).unwrap())
}

fn loss_circle(rng: &mut ChaCha8Rng) -> f64 {
    let m = rng.random_range(0.1..0.4);
    let gamma = rng.random_range(1.0..32.0);
    let len = rng.random_range(1..=5);
    let sp = uniform(rng, &[len], -0.9, 0.9);
    // keep s_n off the α_n kink at −m
    let len = rng.random_range(1..=5);
    let sn = away_from_zero(rng, &[len], 0.02, 0.55).map(|v| v - m);
    check_tape(rng, vec![sp, sn], move |t, v| circle(t, Some(v[0]), Some(v[1]), m, gamma).unwrap().unwrap())
}

fn loss_magface(rng: &mut ChaCha8Rng) -> f64 {
    let (n, c, y) = classes_batch(rng);
    let bounds = MagFaceBounds {
        l_a: 10.0,
        u_a: 110.0,
        l_m: rng.random_range(0.0..0.3),
        u_m: rng.random_range(0.3..0.6),
    };
    // norms inside and outside [l_a, u_a], away from the clamp kinks
    let norms: Vec<f64> = (0..n)
        .map(|_| match rng.random_range(0..3) {
            0 => rng.random_range(2.0..9.0),
            1 => rng.random_range(11.0..109.0),
            _ => rng.random_range(111.0..150.0),
        })
        .collect();
    let norms = Tensor::new(vec![n], norms).unwrap();
    let s = rng.random_range(1.0..64.0);
    let lambda_g = rng.random_range(0.0..30.0);
    let x = cosines(rng, n, c);
    check_tape(rng, vec![x, norms], move |t, v| magface(t, v[0], &y, v[1], s, &bounds, lambda_g).unwrap())
}

fn loss_ohem(rng: &mut ChaCha8Rng) -> f64 {
    loop {
        let (n, c, y) = classes_batch(rng);
        let x = uniform(rng, &[n, c], -3.0, 3.0);
        let ratio = rng.random_range(0.1..1.0);
        let mut tape: Tape = Tape::new();
        let xv = tape.constant(x.clone());
        let per = cross_entropy_per_sample(&mut tape, xv, &y, 0.0).unwrap();
        let losses = tape.value(per).data().to_vec();
        let keep = ohem_select(&losses, ratio).unwrap();
        let cut = losses[*keep.last().unwrap()];
        let separated = losses
            .iter()
            .enumerate()
            .filter(|(i, _)| !keep.contains(i))
            .all(|(_, &l)| cut - l > 1e-3);
        if separated {
            return check_tape(rng, vec![x], move |t, v| {
                let per = cross_entropy_per_sample(t, v[0], &y, 0.0).unwrap();
                ohem_filter(t, per, ratio).unwrap()
            });
        }
    }
}

fn head_cosine(rng: &mut ChaCha8Rng) -> f64 {
    let (n, d, c) = (rng.random_range(1..=4), rng.random_range(1..=4), rng.random_range(2..=4));
    let z = away_from_zero(rng, &[n, d], 0.1, 1.0);
    let w = away_from_zero(rng, &[c, d], 0.1, 1.0);
    check_tape(rng, vec![w, z], |t, v| cosine_logits(t, v[0], v[1]).unwrap())
}

/// Whole-model gradient with respect to every parameter.
fn check_model(model: Model, x: Tensor, y: Vec<usize>) -> f64 {
    let names: Vec<String> = model.params.iter().map(|(k, _)| k).collect();
    let loss = |params: &ModelParams, tape: &mut Tape, trainable: bool| {
        let vars = params.bind(tape, trainable);
        let xv = tape.constant(x.clone());
        let (trace, logits) = Model {
            params: params.clone(),
            ..model.clone()
        }
        .forward(tape, &vars, xv)
        .unwrap();
        let logits = logits.unwrap_or(trace.embedding);
        let out = cross_entropy(tape, logits, &y, 0.0).unwrap();
        (vars, out)
    };
    let mut tape: Tape = Tape::new();
    let (vars, out) = loss(&model.params, &mut tape, true);
    tape.backward(out).unwrap();
    let grads = vars.grads(&tape);
    let inputs: Vec<Tensor> = names.iter().map(|k| model.params.get(k).unwrap().clone()).collect();
    let analytic: Vec<Tensor> = names
        .iter()
        .zip(&inputs)
        .map(|(k, t)| grads.get(k).cloned().unwrap_or_else(|| Tensor::zeros(t.shape())))
        .collect();
    let numeric = numeric_grad(&inputs, |xs| {
        let mut params = ModelParams::default();
        for (k, t) in names.iter().zip(xs) {
            params.insert(k, t.clone());
        }
        let mut tape: Tape = Tape::new();
        let (_, out) = loss(&params, &mut tape, false);
        tape.value(out).item().unwrap()
    });
    rel_error(&analytic, &numeric)
}

fn model_mlp_linear(rng: &mut ChaCha8Rng) -> f64 {
    let enc = EncoderConfig {
        kind: EncoderKind::Mlp,
        input_shape: [1, 3, 3],
        hidden: vec![rng.random_range(2..=5)],
        embed_dim: rng.random_range(2..=4),
    };
    let seed = rng.random();
    let model = Model::init(enc, HeadConfig::linear(3), &mut stream(seed, &[0])).unwrap();
    let n = rng.random_range(1..=4);
    let x = uniform(rng, &[n, 1, 3, 3], 0.0, 1.0);
    let y = labels(rng, n, 3);
    check_model(model, x, y)
}

fn model_cnn_cosine(rng: &mut ChaCha8Rng) -> f64 {
    let enc = EncoderConfig {
        kind: EncoderKind::Cnn,
        input_shape: [1, 4, 4],
        hidden: vec![2, 2],
        embed_dim: 3,
    };
    let seed = rng.random();
    let model = Model::init(enc, HeadConfig::cosine(3), &mut stream(seed, &[0])).unwrap();
    let n = rng.random_range(1..=3);
    let x = uniform(rng, &[n, 1, 4, 4], 0.0, 1.0);
    let y = labels(rng, n, 3);
    check_model(model, x, y)
}

pub fn cases() -> Vec<(&'static str, Case)> {
    vec![
        ("matmul", op_matmul),
        ("conv2d", op_conv2d),
        ("max_pool2", op_max_pool2),
        ("add", op_add),
        ("sub", op_sub),
        ("mul", op_mul),
        ("add_scalar", op_add_scalar),
        ("mul_scalar", op_mul_scalar),
        ("neg", op_neg),
        ("pow_scalar", op_pow_scalar),
        ("relu", op_relu),
        ("softmax", op_softmax),
        ("log_softmax", op_log_softmax),
        ("l2_normalize", op_l2_normalize),
        ("sum", op_sum),
        ("mean", op_mean),
        ("sum_rows", op_sum_rows),
        ("arccos", op_arccos),
        ("cos", op_cos),
        ("exp", op_exp),
        ("log", op_log),
        ("gather", op_gather),
        ("gather_rows", op_gather_rows),
        ("take_rows", op_take_rows),
        ("transpose", op_transpose),
        ("reshape", op_reshape),
        ("concat", op_concat),
        ("add_row_bias", op_add_row_bias),
        ("cosine_logits", head_cosine),
        ("cross_entropy", loss_ce),
        ("mixup_soft_ce", loss_mixup_soft_ce),
        ("focal", loss_focal),
        ("triplet_batch_hard", loss_triplet),
        ("arcface", loss_arcface),
        ("arcface_wrapped_angle", loss_arcface_wrapped),
        ("circle", loss_circle),
        ("magface", loss_magface),
        ("ohem", loss_ohem),
        ("model_mlp_linear", model_mlp_linear),
        ("model_cnn_cosine", model_cnn_cosine),
    ]
}

/// Worst relative error of each case over `instances` seeded instances.
pub fn run_suite(instances: usize) -> Vec<(&'static str, f64)> {
    cases()
        .into_iter()
        .enumerate()
        .map(|(ci, (name, case))| {
            let worst = (0..instances)
                .map(|i| case(&mut stream(2024, &[ci as u64, i as u64])))
                .fold(0.0, f64::max);
            (name, worst)
        })
        .collect()
}
