//! Brute-force reference implementations.

/// Mean over anchors of `max(0, max_p D(a,p) − min_n D(a,n) + α)`, found by
/// enumerating every (anchor, positive, negative) triple.
pub fn triplet_exhaustive(z: &[Vec<f64>], ids: &[usize], alpha: f64) -> f64 {
    let d = |i: usize, j: usize| -> f64 { z[i].iter().zip(&z[j]).map(|(a, b)| (a - b) * (a - b)).sum() };
    let n = z.len();
    let mut total = 0.0;
    for a in 0..n {
        let mut worst = f64::NEG_INFINITY;
        for p in (0..n).filter(|&p| p != a && ids[p] == ids[a]) {
            for q in (0..n).filter(|&q| ids[q] != ids[a]) {
                worst = worst.max(d(a, p) - d(a, q) + alpha);
            }
        }
        total += worst.max(0.0);
    }
    total / n as f64
}

fn dist(a: &[f64], b: &[f64], cosine: bool) -> f64 {
    if cosine {
        let na = a.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
        let nb = b.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
        1.0 - a.iter().zip(b).map(|(x, y)| (x / na) * (y / nb)).sum::<f64>()
    } else {
        a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
    }
}

/// Full sort of every gallery item by distance (ties to the lower index).
pub fn knn_full_sort(q: &[Vec<f64>], g: &[Vec<f64>], k: usize, cosine: bool, exclude_self: bool) -> Vec<Vec<usize>> {
    q.iter()
        .enumerate()
        .map(|(qi, qr)| {
            let mut all: Vec<(f64, usize)> = g
                .iter()
                .enumerate()
                .filter(|&(j, _)| !(exclude_self && j == qi))
                .map(|(j, gr)| (dist(qr, gr, cosine), j))
                .collect();
            all.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
            all.into_iter().take(k).map(|(_, j)| j).collect()
        })
        .collect()
}

pub fn recall_full_sort(
    q: &[Vec<f64>],
    ql: &[usize],
    g: &[Vec<f64>],
    gl: &[usize],
    k: usize,
    cosine: bool,
    exclude_self: bool,
) -> f64 {
    let nn = knn_full_sort(q, g, k, cosine, exclude_self);
    let hits = nn
        .iter()
        .enumerate()
        .filter(|(i, list)| list.iter().any(|&j| gl[j] == ql[*i]))
        .count();
    hits as f64 / q.len() as f64
}

/// `P(score_pos > score_neg) + ½·P(tie)` over every (positive, negative) pair.
pub fn auc_pairs(scores: &[f64], is_same: &[bool]) -> f64 {
    let mut wins = 0.0;
    let mut total = 0.0;
    for (&si, _) in scores.iter().zip(is_same).filter(|(_, &s)| s) {
        for (&sj, _) in scores.iter().zip(is_same).filter(|(_, &s)| !s) {
            total += 1.0;
            if si > sj {
                wins += 1.0;
            } else if si == sj {
                wins += 0.5;
            }
        }
    }
    wins / total
}
