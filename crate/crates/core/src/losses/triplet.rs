use super::{LossError, Result};
use crate::autodiff::{Tape, Var};
use crate::scalar::Real;
use crate::tensor::{Tensor, TensorError};

/// Squared Euclidean distances between all embedding pairs.
///
/// Symmetric with an exactly zero diagonal; entries are computed from
/// coordinate differences so they are never negative.
#[derive(Debug, Clone, PartialEq)]
pub struct PairwiseDistances<T = f64> {
    n: usize,
    d: Vec<T>,
}

impl<T: Real> PairwiseDistances<T> {
    pub fn from_embeddings(z: &Tensor<T>) -> Result<Self> {
        let [n, dim] = *z.shape() else {
            return Err(TensorError::ShapeMismatch {
                op: "pairwise_distances",
                detail: format!("expected [N, d], got {:?}", z.shape()),
            }
            .into());
        };
        let rows: Vec<&[T]> = z.data().chunks(dim).collect();
        let mut d = vec![T::zero(); n * n];
        for i in 0..n {
            for j in i + 1..n {
                let v: T = rows[i]
                    .iter()
                    .zip(rows[j])
                    .map(|(&a, &b)| (a - b) * (a - b))
                    .sum();
                d[i * n + j] = v;
                d[j * n + i] = v;
            }
        }
        Ok(Self { n, d })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.d[i * self.n + j]
    }
}

/// Hardest positive (farthest same-id) and hardest negative (nearest
/// different-id) per anchor; ties go to the lower index.
pub fn batch_hard_mining<T: Real>(
    dist: &PairwiseDistances<T>,
    ids: &[usize],
) -> Result<Vec<(usize, usize, usize)>> {
    let n = dist.len();
    if ids.len() != n {
        return Err(TensorError::ShapeMismatch {
            op: "triplet",
            detail: format!("{} ids for {n} embeddings", ids.len()),
        }
        .into());
    }
    (0..n)
        .map(|a| {
            let mut pos: Option<usize> = None;
            let mut neg: Option<usize> = None;
            for j in 0..n {
                if j == a {
                    continue;
                }
                let dj = dist.get(a, j);
                if ids[j] == ids[a] {
                    if pos.is_none_or(|p| dj > dist.get(a, p)) {
                        pos = Some(j);
                    }
                } else if neg.is_none_or(|q| dj < dist.get(a, q)) {
                    neg = Some(j);
                }
            }
            let p = pos.ok_or(LossError::DegenerateBatch {
                anchor: a,
                missing: "positive",
            })?;
            let q = neg.ok_or(LossError::DegenerateBatch {
                anchor: a,
                missing: "negative",
            })?;
            Ok((a, p, q))
        })
        .collect()
}

/// Per-anchor hinge `max(0, D(a,p) - D(a,n) + α)` with batch-hard mining.
pub fn triplet_batch_hard_per_anchor<T: Real>(
    tape: &mut Tape<T>,
    z: Var,
    ids: &[usize],
    alpha: f64,
) -> Result<Var> {
    if !(alpha >= 0.0) {
        return Err(LossError::InvalidParam(format!("margin {alpha} must be >= 0")));
    }
    let dist = PairwiseDistances::from_embeddings(tape.value(z))?;
    let triplets = batch_hard_mining(&dist, ids)?;
    let anchors: Vec<usize> = triplets.iter().map(|t| t.0).collect();
    let positives: Vec<usize> = triplets.iter().map(|t| t.1).collect();
    let negatives: Vec<usize> = triplets.iter().map(|t| t.2).collect();
    let za = tape.take_rows(z, &anchors)?;
    let zp = tape.take_rows(z, &positives)?;
    let zn = tape.take_rows(z, &negatives)?;
    let d_ap = sq_dist_rows(tape, za, zp)?;
    let d_an = sq_dist_rows(tape, za, zn)?;
    let gap = tape.sub(d_ap, d_an)?;
    let shifted = tape.add_scalar(gap, T::lit(alpha))?;
    Ok(tape.relu(shifted)?)
}

pub fn triplet_batch_hard<T: Real>(tape: &mut Tape<T>, z: Var, ids: &[usize], alpha: f64) -> Result<Var> {
    let per = triplet_batch_hard_per_anchor(tape, z, ids, alpha)?;
    Ok(tape.mean(per)?)
}

fn sq_dist_rows<T: Real>(tape: &mut Tape<T>, a: Var, b: Var) -> Result<Var> {
    let diff = tape.sub(a, b)?;
    let sq = tape.mul(diff, diff)?;
    Ok(tape.sum_rows(sq)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(z: &[f64], dim: usize, ids: &[usize], alpha: f64) -> Result<f64> {
        let mut tape: Tape = Tape::new();
        let n = z.len() / dim;
        let zv = tape.leaf(Tensor::from_f64(vec![n, dim], z).unwrap());
        let out = triplet_batch_hard(&mut tape, zv, ids, alpha)?;
        Ok(tape.value(out).item().unwrap())
    }

    #[test]
    fn satisfied_margin_is_zero() {
        let z = [0., 0., 0., 0., 3., 0., 3., 0.];
        assert_eq!(run(&z, 2, &[0, 0, 1, 1], 0.5).unwrap(), 0.0);
    }

    #[test]
    fn single_violating_anchor() {
        // 1-D: anchor 0 at 0, positive at sqrt(0.5), negative at sqrt(0.2).
        // Only anchor 0 is checked by hand: D(a,p)=0.5, D(a,n)=0.2 -> 0.6.
        let z = [0.0, 0.5f64.sqrt(), -(0.2f64.sqrt())];
        let mut tape: Tape = Tape::new();
        let zv = tape.leaf(Tensor::from_f64(vec![3, 1], &z).unwrap());
        let per = triplet_batch_hard_per_anchor(&mut tape, zv, &[0, 0, 1], 0.3);
        // the negative is a singleton identity, so the batch is degenerate
        assert!(matches!(per, Err(LossError::DegenerateBatch { anchor: 2, .. })));

        let z = [0.0, 0.5f64.sqrt(), -(0.2f64.sqrt()), -(0.2f64.sqrt()) - 0.01];
        let zv = tape.leaf(Tensor::from_f64(vec![4, 1], &z).unwrap());
        let per = triplet_batch_hard_per_anchor(&mut tape, zv, &[0, 0, 1, 1], 0.3).unwrap();
        assert!((tape.value(per).data()[0] - 0.6).abs() < 1e-12);
    }

    #[test]
    fn singleton_identity_is_degenerate() {
        let z = [0., 1., 2.];
        assert!(matches!(
            run(&z, 1, &[0, 0, 1], 0.1),
            Err(LossError::DegenerateBatch { .. })
        ));
        assert!(matches!(
            run(&z, 1, &[0, 0, 0], 0.1),
            Err(LossError::DegenerateBatch { missing: "negative", .. })
        ));
    }

    #[test]
    fn distances_symmetric_zero_diagonal() {
        let z = Tensor::<f64>::from_f64(vec![3, 2], &[1., 2., -1., 0.5, 3., 3.]).unwrap();
        let d = PairwiseDistances::from_embeddings(&z).unwrap();
        for i in 0..3 {
            assert_eq!(d.get(i, i), 0.0);
            for j in 0..3 {
                assert_eq!(d.get(i, j), d.get(j, i));
                assert!(d.get(i, j) >= 0.0);
            }
        }
        assert_eq!(d.get(0, 1), 4.0 + 2.25);
    }
}
