//! Task metrics: top-k accuracy, exact kNN and Recall@K, ROC AUC and
//! verification pair construction.

use rand::seq::index;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::{salt, stream};
use crate::scalar::Real;
use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricError {
    #[error("k = {k} outside [1, {max}]")]
    KOutOfRange { k: usize, max: usize },
    #[error("gallery is empty")]
    EmptyGallery,
    #[error("roc_auc needs at least one positive and one negative pair")]
    SingleClass,
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
}

pub type Result<T> = std::result::Result<T, MetricError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Euclidean,
    Cosine,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Query,
    Gallery,
    /// Queries and gallery are the same set; self-matches are excluded.
    SingleSet,
}

/// Labelled embeddings, stored as f64 rows.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSet {
    rows: Vec<Vec<f64>>,
    labels: Vec<usize>,
    role: Role,
}

impl EmbeddingSet {
    pub fn new<T: Real>(embeddings: &Tensor<T>, labels: Vec<usize>, role: Role) -> Result<Self> {
        let [n, d] = *embeddings.shape() else {
            return Err(MetricError::ShapeMismatch(format!(
                "embeddings must be [N, d], got {:?}",
                embeddings.shape()
            )));
        };
        if labels.len() != n {
            return Err(MetricError::ShapeMismatch(format!("{} labels for {n} embeddings", labels.len())));
        }
        let rows = embeddings
            .data()
            .chunks(d)
            .map(|r| r.iter().map(|v| v.as_f64()).collect())
            .collect();
        Ok(Self { rows, labels, role })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn role(&self) -> Role {
        self.role
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i]
    }

    fn prepared(&self, metric: Metric) -> Vec<Vec<f64>> {
        match metric {
            Metric::Euclidean => self.rows.clone(),
            Metric::Cosine => self.rows.iter().map(|r| normalized(r)).collect(),
        }
    }
}

fn normalized(r: &[f64]) -> Vec<f64> {
    let n = r.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
    r.iter().map(|v| v / n).collect()
}

/// Distance used for ranking: squared euclidean, or `1 − cos` on
/// L2-normalized rows.
fn distance(a: &[f64], b: &[f64], metric: Metric) -> f64 {
    match metric {
        Metric::Euclidean => a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum(),
        Metric::Cosine => 1.0 - a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>(),
    }
}

/// Fraction of rows whose label ranks within the top `k` logits; a tied
/// logit at a lower class index ranks first.
pub fn topk_accuracy<T: Real>(logits: &Tensor<T>, labels: &[usize], k: usize) -> Result<f64> {
    let [n, c] = *logits.shape() else {
        return Err(MetricError::ShapeMismatch(format!("logits must be [N, C], got {:?}", logits.shape())));
    };
    if k == 0 || k > c {
        return Err(MetricError::KOutOfRange { k, max: c });
    }
    if labels.len() != n {
        return Err(MetricError::ShapeMismatch(format!("{} labels for {n} rows", labels.len())));
    }
    let hits = logits
        .data()
        .chunks(c)
        .zip(labels)
        .filter(|(row, &y)| {
            let ly = row[y];
            let rank = row
                .iter()
                .enumerate()
                .filter(|&(j, &l)| l > ly || (l == ly && j < y))
                .count();
            rank < k
        })
        .count();
    Ok(hits as f64 / n as f64)
}

fn self_excluded(queries: &EmbeddingSet, gallery: &EmbeddingSet) -> Result<bool> {
    let single = queries.role == Role::SingleSet && gallery.role == Role::SingleSet;
    if single && queries.len() != gallery.len() {
        return Err(MetricError::ShapeMismatch(format!(
            "single-set roles with {} queries and {} gallery items",
            queries.len(),
            gallery.len()
        )));
    }
    Ok(single)
}

/// Exact nearest neighbors of every query, ascending distance, ties to the
/// lower gallery index.
pub fn knn(queries: &EmbeddingSet, gallery: &EmbeddingSet, k: usize, metric: Metric) -> Result<Vec<Vec<usize>>> {
    if gallery.is_empty() {
        return Err(MetricError::EmptyGallery);
    }
    let exclude = self_excluded(queries, gallery)?;
    let available = gallery.len() - usize::from(exclude);
    if k == 0 || k > available {
        return Err(MetricError::KOutOfRange { k, max: available });
    }
    let (q, g) = (queries.prepared(metric), gallery.prepared(metric));
    Ok(q.par_iter()
        .enumerate()
        .map(|(qi, qr)| {
            let mut d: Vec<(f64, usize)> = g
                .iter()
                .enumerate()
                .filter(|&(j, _)| !(exclude && j == qi))
                .map(|(j, gr)| (distance(qr, gr, metric), j))
                .collect();
            d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            d.truncate(k);
            d.into_iter().map(|(_, j)| j).collect()
        })
        .collect())
}

/// Recall@K for each `k` in `ks`, sharing one neighbor search.
pub fn recall_at_ks(queries: &EmbeddingSet, gallery: &EmbeddingSet, ks: &[usize], metric: Metric) -> Result<Vec<f64>> {
    let kmax = ks.iter().copied().max().unwrap_or(0);
    let nn = knn(queries, gallery, kmax, metric)?;
    if let Some(&k) = ks.iter().find(|&&k| k == 0) {
        return Err(MetricError::KOutOfRange { k, max: kmax });
    }
    Ok(ks
        .iter()
        .map(|&k| {
            let hits = nn
                .iter()
                .enumerate()
                .filter(|(qi, list)| list[..k].iter().any(|&j| gallery.labels[j] == queries.labels[*qi]))
                .count();
            hits as f64 / queries.len().max(1) as f64
        })
        .collect())
}

/// Fraction of queries with a same-label gallery item among the `k` nearest.
pub fn recall_at_k(queries: &EmbeddingSet, gallery: &EmbeddingSet, k: usize, metric: Metric) -> Result<f64> {
    Ok(recall_at_ks(queries, gallery, &[k], metric)?[0])
}

/// Mann–Whitney AUC with midranks, so tied scores count one half.
pub fn roc_auc(scores: &[f64], is_same: &[bool]) -> Result<f64> {
    if scores.len() != is_same.len() {
        return Err(MetricError::ShapeMismatch(format!(
            "{} scores for {} labels",
            scores.len(),
            is_same.len()
        )));
    }
    let n_pos = is_same.iter().filter(|&&s| s).count();
    let n_neg = is_same.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(MetricError::SingleClass);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let midrank = (i + j) as f64 / 2.0 + 1.0;
        rank_sum += midrank * order[i..=j].iter().filter(|&&o| is_same[o]).count() as f64;
        i = j + 1;
    }
    let u = rank_sum - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(u / (n_pos as f64 * n_neg as f64))
}

/// All same-label pairs `(i, j, true)` with `i < j`, followed by an equal
/// number (or all, if fewer exist) of distinct different-label pairs drawn
/// from the `(seed, PAIRS)` stream, in index order.
pub fn verification_pairs(labels: &[usize], seed: u64) -> Vec<(usize, usize, bool)> {
    let n = labels.len();
    let mut pos = Vec::new();
    let mut neg = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if labels[i] == labels[j] {
                pos.push((i, j, true));
            } else {
                neg.push((i, j, false));
            }
        }
    }
    let take = pos.len().min(neg.len());
    let mut picked = index::sample(&mut stream(seed, &[salt::PAIRS]), neg.len(), take).into_vec();
    picked.sort_unstable();
    pos.extend(picked.into_iter().map(|i| neg[i]));
    pos
}

/// Cosine similarity for each pair.
pub fn pair_scores(set: &EmbeddingSet, pairs: &[(usize, usize, bool)]) -> Vec<f64> {
    let rows = set.prepared(Metric::Cosine);
    pairs
        .iter()
        .map(|&(i, j, _)| rows[i].iter().zip(&rows[j]).map(|(a, b)| a * b).sum())
        .collect()
}
