use std::collections::BTreeMap;

use rand::seq::SliceRandom;

use super::{DataError, Result};
use crate::rng::{salt, stream};

/// A seeded permutation of `0..n` cut into consecutive batches; the last
/// batch may be short.
pub fn shuffled_batches(n: usize, batch_size: usize, seed: u64, epoch: usize) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut stream(seed, &[salt::SHUFFLE, epoch as u64]));
    order.chunks(batch_size.max(1)).map(<[usize]>::to_vec).collect()
}

/// P×Q batches: each holds `p` distinct identities with `q` samples each.
///
/// Identities are visited in a reshuffled cycle and each identity's samples
/// in their own reshuffled cycle, so every sample is used before any repeats.
/// An epoch has `max(1, round(N / (p·q)))` batches. With fewer than `p`
/// identities, every batch holds all of them.
pub fn pk_batches(identities: &[usize], p: usize, q: usize, seed: u64, epoch: usize) -> Result<Vec<Vec<usize>>> {
    if p < 2 || q < 2 {
        return Err(DataError::Invalid(format!("P x Q sampler needs P, Q >= 2, got {p} x {q}")));
    }
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &id) in identities.iter().enumerate() {
        groups.entry(id).or_default().push(i);
    }
    if groups.len() < 2 {
        return Err(DataError::Invalid("P x Q sampler needs at least 2 identities".into()));
    }
    if let Some((id, _)) = groups.iter().find(|(_, v)| v.len() < 2) {
        return Err(DataError::Invalid(format!("identity {id} has a single sample")));
    }
    let p = p.min(groups.len());
    let mut rng = stream(seed, &[salt::SHUFFLE, epoch as u64]);
    let ids: Vec<usize> = groups.keys().copied().collect();
    let mut pools: Vec<(Vec<usize>, usize)> = groups
        .into_values()
        .map(|mut v| {
            v.shuffle(&mut rng);
            (v, 0)
        })
        .collect();
    let batches = ((identities.len() as f64 / (p * q) as f64).round() as usize).max(1);
    let mut queue: Vec<usize> = Vec::new();
    let mut out = Vec::with_capacity(batches);
    for _ in 0..batches {
        let mut chosen: Vec<usize> = Vec::with_capacity(p);
        while chosen.len() < p {
            if queue.is_empty() {
                queue = (0..ids.len()).collect();
                queue.shuffle(&mut rng);
                queue.reverse();
            }
            let slot = queue
                .iter()
                .rposition(|g| !chosen.contains(g))
                .expect("p never exceeds the identity count");
            chosen.push(queue.remove(slot));
        }
        let mut batch = Vec::with_capacity(p * q);
        for g in chosen {
            let (pool, next) = &mut pools[g];
            for _ in 0..q {
                if *next == pool.len() {
                    pool.shuffle(&mut rng);
                    *next = 0;
                }
                batch.push(pool[*next]);
                *next += 1;
            }
        }
        out.push(batch);
    }
    Ok(out)
}
