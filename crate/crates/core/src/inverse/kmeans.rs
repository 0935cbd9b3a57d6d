//! Seeded k-means with k-means++ initialization.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{Error, Result};

const MAX_LLOYD: usize = 100;

fn dist2<const D: usize>(a: &[f64; D], b: &[f64; D]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Zero-mean, unit-variance features; constant dimensions are only centered.
pub fn standardize<const D: usize>(x: &[[f64; D]]) -> Vec<[f64; D]> {
    let n = x.len().max(1) as f64;
    let mean: [f64; D] = std::array::from_fn(|d| x.iter().map(|p| p[d]).sum::<f64>() / n);
    let std: [f64; D] = std::array::from_fn(|d| {
        let v = x.iter().map(|p| (p[d] - mean[d]).powi(2)).sum::<f64>() / n;
        if v > 0.0 {
            v.sqrt()
        } else {
            1.0
        }
    });
    x.iter().map(|p| std::array::from_fn(|d| (p[d] - mean[d]) / std[d])).collect()
}

fn nearest<const D: usize>(p: &[f64; D], centers: &[[f64; D]]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, c) in centers.iter().enumerate() {
        let d = dist2(p, c);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

/// Cluster assignment of every point. Fewer than `k` clusters are used when
/// the points have fewer than `k` distinct positions.
pub fn kmeans<const D: usize>(x: &[[f64; D]], k: usize, seed: u64) -> Result<Vec<usize>> {
    let n = x.len();
    if k == 0 || k > n {
        return Err(Error::TooManyClusters { k, n });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centers = vec![x[rng.random_range(0..n)]];
    let mut d2: Vec<f64> = x.iter().map(|p| dist2(p, &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        if !(total > 0.0) {
            break;
        }
        let mut t = rng.random::<f64>() * total;
        let mut pick = n - 1;
        for (i, &d) in d2.iter().enumerate() {
            if t < d {
                pick = i;
                break;
            }
            t -= d;
        }
        centers.push(x[pick]);
        for (i, p) in x.iter().enumerate() {
            d2[i] = d2[i].min(dist2(p, &x[pick]));
        }
    }
    let k = centers.len();
    let mut assign = vec![usize::MAX; n];
    for _ in 0..MAX_LLOYD {
        let mut changed = false;
        for (i, p) in x.iter().enumerate() {
            let j = nearest(p, &centers).0;
            if assign[i] != j {
                assign[i] = j;
                changed = true;
            }
        }
        // Re-seed empty clusters from the point farthest from its center.
        for j in 0..k {
            if assign.contains(&j) {
                continue;
            }
            let far = (0..n)
                .max_by(|&a, &b| {
                    dist2(&x[a], &centers[assign[a]]).total_cmp(&dist2(&x[b], &centers[assign[b]])).then(b.cmp(&a))
                })
                .unwrap();
            if dist2(&x[far], &centers[assign[far]]) == 0.0 {
                continue;
            }
            assign[far] = j;
            centers[j] = x[far];
            changed = true;
        }
        for (j, c) in centers.iter_mut().enumerate() {
            let mut sum = [0.0; D];
            let mut cnt = 0usize;
            for (p, _) in x.iter().zip(&assign).filter(|(_, &a)| a == j) {
                for d in 0..D {
                    sum[d] += p[d];
                }
                cnt += 1;
            }
            if cnt > 0 {
                *c = sum.map(|s| s / cnt as f64);
            }
        }
        if !changed {
            break;
        }
    }
    // Compact labels so that empty clusters disappear.
    let mut map = vec![usize::MAX; k];
    let mut next = 0;
    for a in assign.iter_mut() {
        if map[*a] == usize::MAX {
            map[*a] = next;
            next += 1;
        }
        *a = map[*a];
    }
    Ok(assign)
}
