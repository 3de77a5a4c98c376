//! Seeded k-means with k-means++ initialization and restarts, used on the
//! row-normalized spectral embedding.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub struct KMeansOutcome {
    pub labels: Vec<usize>,
    pub inertia: f64,
}

/// Cluster `points` (rows) into `k` groups; the best of `restarts` runs by
/// inertia wins. Deterministic for a given RNG state.
pub fn kmeans(points: &[Vec<f64>], k: usize, restarts: usize, rng: &mut ChaCha8Rng) -> KMeansOutcome {
    assert!(k >= 1 && !points.is_empty());
    let k = k.min(points.len());
    let mut best: Option<KMeansOutcome> = None;
    for _ in 0..restarts.max(1) {
        let outcome = kmeans_once(points, k, rng);
        if best.as_ref().is_none_or(|b| outcome.inertia < b.inertia) {
            best = Some(outcome);
        }
    }
    best.unwrap()
}

fn kmeans_once(points: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> KMeansOutcome {
    let dim = points[0].len();
    let mut centers = plus_plus_init(points, k, rng);
    let mut labels = vec![0usize; points.len()];

    for _ in 0..100 {
        let mut changed = false;
        for (i, p) in points.iter().enumerate() {
            let nearest = nearest_center(p, &centers);
            if labels[i] != nearest {
                labels[i] = nearest;
                changed = true;
            }
        }

        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (p, &label) in points.iter().zip(&labels) {
            counts[label] += 1;
            for (s, &x) in sums[label].iter_mut().zip(p) {
                *s += x;
            }
        }
        for c in 0..k {
            if counts[c] == 0 {
                // Re-seed an empty cluster at the point farthest from its
                // assigned center; first-index tie-break keeps this
                // deterministic.
                let far = points
                    .iter()
                    .zip(&labels)
                    .map(|(p, &label)| dist_sq(p, &centers[label]))
                    .enumerate()
                    .max_by(|(_, a), (_, b)| a.partial_cmp(b).unwrap())
                    .map(|(i, _)| i)
                    .unwrap();
                centers[c] = points[far].clone();
                changed = true;
            } else {
                for (dst, &s) in centers[c].iter_mut().zip(&sums[c]) {
                    *dst = s / counts[c] as f64;
                }
            }
        }
        if !changed {
            break;
        }
    }

    let inertia = points
        .iter()
        .zip(&labels)
        .map(|(p, &label)| dist_sq(p, &centers[label]))
        .sum();
    KMeansOutcome { labels, inertia }
}

fn plus_plus_init(points: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let mut centers = Vec::with_capacity(k);
    centers.push(points[rng.random_range(0..points.len())].clone());
    let mut d2: Vec<f64> = points.iter().map(|p| dist_sq(p, &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total <= 0.0 {
            rng.random_range(0..points.len())
        } else {
            let mut target = rng.random_range(0.0..total);
            let mut chosen = points.len() - 1;
            for (i, &w) in d2.iter().enumerate() {
                if target < w {
                    chosen = i;
                    break;
                }
                target -= w;
            }
            chosen
        };
        centers.push(points[next].clone());
        for (i, p) in points.iter().enumerate() {
            d2[i] = d2[i].min(dist_sq(p, centers.last().unwrap()));
        }
    }
    centers
}

fn nearest_center(p: &[f64], centers: &[Vec<f64>]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (c, center) in centers.iter().enumerate() {
        let d = dist_sq(p, center);
        if d < best_d {
            best_d = d;
            best = c;
        }
    }
    best
}

#[inline]
fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}
