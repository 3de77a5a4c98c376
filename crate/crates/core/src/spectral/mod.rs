//! Self-tuning spectral clustering of per-(cell, bin) motion vectors into
//! spatially local dominant directions.
//!
//! The affinity between two member positions p_m, p_n is
//! exp(-|p_m - p_n|^2 / (sigma_m sigma_n)) with per-point local scales
//! sigma_i taken as the distance to the k-th nearest neighbor within the
//! same bin. Clustering runs on the row-normalized embedding of the k
//! smallest eigenvectors of the symmetric normalized Laplacian, with the
//! cluster count picked by the largest eigengap.

mod eigen;
mod kmeans;

pub use eigen::{symmetric_eigen, EigenDecomposition, SymMatrix};

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::frame::GrayFrame;
use crate::grid::CellHistogramField;
use crate::math::{circular_mean, mix_seed, wrap_angle, Vec2};

/// Floor applied to local scales so coincident points cannot zero a scale.
pub const SCALE_FLOOR: f64 = 1e-6;

/// A spatially local dominant direction: cluster centroid position,
/// circular-mean orientation, and weight in (0, 1] normalized by the
/// largest cluster in the field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DominantDirection {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
    pub w: f64,
}

impl DominantDirection {
    pub fn position(&self) -> Vec2 {
        Vec2::new(self.x, self.y)
    }
}

/// Symmetric affinity matrix with unit diagonal.
#[derive(Debug, Clone)]
pub struct AffinityMatrix {
    pub n: usize,
    entries: Vec<f64>,
}

impl AffinityMatrix {
    #[inline]
    pub fn get(&self, m: usize, n: usize) -> f64 {
        self.entries[m * self.n + n]
    }
}

/// Clustering configuration.
#[derive(Debug, Clone)]
pub struct ClusterParams {
    /// Which nearest neighbor sets the local scale.
    pub k_nn: usize,
    /// Upper bound on the cluster count per (cell, bin).
    pub k_max: usize,
    /// Clusters smaller than this are discarded as noise.
    pub min_cluster_size: usize,
    /// k-means restarts per clustering job.
    pub restarts: usize,
    pub seed: u64,
}

impl Default for ClusterParams {
    fn default() -> Self {
        ClusterParams {
            k_nn: 7,
            k_max: 5,
            min_cluster_size: 3,
            restarts: 20,
            seed: 1,
        }
    }
}

/// Local scale of every point: Euclidean distance to its k-th nearest other
/// point (the farthest available when fewer than k exist), floored at
/// [`SCALE_FLOOR`].
pub fn local_scales(points: &[Vec2], k: usize) -> Result<Vec<f64>> {
    if points.is_empty() {
        return Err(Error::invalid("local_scales requires at least one point"));
    }
    if k == 0 {
        return Err(Error::invalid("k must be >= 1"));
    }
    let mut scales = Vec::with_capacity(points.len());
    for (m, p) in points.iter().enumerate() {
        let mut dists: Vec<f64> = points
            .iter()
            .enumerate()
            .filter(|&(n, _)| n != m)
            .map(|(_, q)| p.distance(*q))
            .collect();
        if dists.is_empty() {
            scales.push(SCALE_FLOOR);
            continue;
        }
        dists.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let idx = k.min(dists.len()) - 1;
        scales.push(dists[idx].max(SCALE_FLOOR));
    }
    Ok(scales)
}

/// Affinity matrix A(m, n) = exp(-|p_m - p_n|^2 / (sigma_m sigma_n)), with
/// an exact unit diagonal.
pub fn affinity(points: &[Vec2], scales: &[f64]) -> Result<AffinityMatrix> {
    if points.len() != scales.len() {
        return Err(Error::invalid("points/scales length mismatch"));
    }
    if let Some(s) = scales.iter().find(|s| **s <= 0.0) {
        return Err(Error::invalid(format!("non-positive scale {s}")));
    }
    let n = points.len();
    let mut entries = vec![0.0; n * n];
    for m in 0..n {
        entries[m * n + m] = 1.0;
        for j in m + 1..n {
            let d2 = (points[m] - points[j]).length_squared();
            let a = (-d2 / (scales[m] * scales[j])).exp();
            entries[m * n + j] = a;
            entries[j * n + m] = a;
        }
    }
    Ok(AffinityMatrix { n, entries })
}

/// Symmetric normalized Laplacian L = I - D^{-1/2} A D^{-1/2}. Row sums are
/// at least 1 because the diagonal of A is 1, so the scaling is total.
pub fn normalized_laplacian(affinity: &AffinityMatrix) -> SymMatrix {
    let n = affinity.n;
    let inv_sqrt_deg: Vec<f64> = (0..n)
        .map(|m| {
            let deg: f64 = (0..n).map(|j| affinity.get(m, j)).sum();
            1.0 / deg.sqrt()
        })
        .collect();
    let mut lap = SymMatrix::zeros(n);
    for i in 0..n {
        for j in 0..n {
            let off = affinity.get(i, j) * inv_sqrt_deg[i] * inv_sqrt_deg[j];
            let v = if i == j { 1.0 - off } else { -off };
            lap.set(i, j, v);
        }
    }
    lap
}

/// Cluster member positions of one (cell, bin). Returns index lists that
/// partition `0..points.len()`; the cluster count is chosen in
/// `[1, k_max]` by the largest eigengap of the normalized Laplacian.
pub fn cluster(points: &[Vec2], params: &ClusterParams, seed: u64) -> Result<Vec<Vec<usize>>> {
    if points.is_empty() {
        return Err(Error::invalid("cluster requires at least one member"));
    }
    let n = points.len();
    if n == 1 {
        return Ok(vec![vec![0]]);
    }

    let scales = local_scales(points, params.k_nn)?;
    let aff = affinity(points, &scales)?;
    let lap = normalized_laplacian(&aff);
    let eig = symmetric_eigen(&lap);

    let k = eigengap_count(&eig.values, params.k_max.max(1));
    if k == 1 {
        return Ok(vec![(0..n).collect()]);
    }

    // Ng–Jordan–Weiss embedding: k smallest eigenvectors as columns, rows
    // scaled to unit length.
    let mut rows: Vec<Vec<f64>> = (0..n)
        .map(|r| (0..k).map(|c| eig.vectors[c][r]).collect())
        .collect();
    for row in &mut rows {
        let norm: f64 = row.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            for x in row.iter_mut() {
                *x /= norm;
            }
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let outcome = kmeans::kmeans(&rows, k, params.restarts, &mut rng);

    let mut clusters: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (i, &label) in outcome.labels.iter().enumerate() {
        clusters[label].push(i);
    }
    clusters.retain(|c| !c.is_empty());
    Ok(clusters)
}

/// Cluster count by largest eigengap over k in [1, k_max], with two guards:
/// near-zero eigenvalues are counted first (each graph component contributes
/// one), and a gap at k > 1 must beat the first gap by a clear margin.
/// Unstructured single-cluster data has a smoothly rising spectrum whose
/// later gaps are comparable to the first, and the margin keeps such data in
/// one piece.
fn eigengap_count(values: &[f64], k_max: usize) -> usize {
    let n = values.len();
    let upper = k_max.min(n.saturating_sub(1));
    if upper == 0 {
        return 1;
    }
    let zeros = values.iter().take(upper).filter(|v| v.abs() < 1e-8).count();
    if zeros >= 2 {
        return zeros;
    }
    let first_gap = values[1] - values[0];
    let mut best_k = 1;
    let mut best_gap = first_gap;
    for k in 2..=upper {
        let gap = values[k] - values[k - 1];
        if gap > best_gap.max(1.5 * first_gap) {
            best_gap = gap;
            best_k = k;
        }
    }
    best_k
}

/// One clustering job: bin indices (i, j, k) with member positions and
/// orientations.
type BinJob = (usize, usize, usize, Vec<Vec2>, Vec<f64>);

/// Cluster every surviving (cell, bin) of a pruned field and summarize each
/// cluster as a dominant direction. Weights are cluster sizes normalized by
/// the largest kept cluster, so the largest has w = 1.
pub fn dominant_directions(field: &CellHistogramField, params: &ClusterParams) -> Result<Vec<DominantDirection>> {
    let jobs: Vec<BinJob> = field
        .iter_bins()
        .map(|(i, j, k, members)| {
            (
                i,
                j,
                k,
                members.iter().map(|m| m.position()).collect(),
                members.iter().map(|m| m.theta).collect(),
            )
        })
        .collect();

    // Per-job seeds derive from the (i, j, k) indices, not execution order.
    let per_job: Vec<Result<Vec<(Vec2, f64, usize)>>> = jobs
        .par_iter()
        .map(|(i, j, k, positions, thetas)| {
            let salt = ((*i as u64) << 32) | ((*j as u64) << 16) | (*k as u64);
            let seed = mix_seed(params.seed, salt);
            let clusters = cluster(positions, params, seed)?;
            let mut out = Vec::new();
            for members in clusters {
                if members.len() < params.min_cluster_size {
                    continue;
                }
                let mut centroid = Vec2::ZERO;
                let angles: Vec<f64> = members.iter().map(|&m| thetas[m]).collect();
                for &m in &members {
                    centroid += positions[m];
                }
                centroid = centroid / members.len() as f64;
                out.push((centroid, circular_mean(&angles), members.len()));
            }
            Ok(out)
        })
        .collect();

    let mut summaries = Vec::new();
    for res in per_job {
        summaries.extend(res?);
    }
    let max_size = summaries.iter().map(|&(_, _, s)| s).max().unwrap_or(0);
    if max_size == 0 {
        return Ok(Vec::new());
    }
    Ok(summaries
        .into_iter()
        .map(|(c, theta, size)| DominantDirection {
            x: c.x,
            y: c.y,
            theta: wrap_angle(theta),
            w: size as f64 / max_size as f64,
        })
        .collect())
}

pub const DIRECTIONS_HEADER: &str = "x,y,theta,w";

pub fn save_directions(directions: &[DominantDirection], path: &Path) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let write = |w: &mut BufWriter<fs::File>| -> std::io::Result<()> {
        writeln!(w, "{DIRECTIONS_HEADER}")?;
        for d in directions {
            writeln!(w, "{:.16e},{:.16e},{:.16e},{:.16e}", d.x, d.y, d.theta, d.w)?;
        }
        Ok(())
    };
    write(&mut w).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn load_directions(path: &Path) -> Result<Vec<DominantDirection>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == DIRECTIONS_HEADER => {}
        _ => {
            return Err(Error::Parse {
                line: 1,
                message: format!("expected header `{DIRECTIONS_HEADER}`"),
            })
        }
    }
    let mut out = Vec::new();
    for (idx, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(Error::Parse {
                line: idx + 1,
                message: format!("expected 4 fields, found {}", fields.len()),
            });
        }
        let mut nums = [0.0f64; 4];
        for (slot, field) in nums.iter_mut().zip(&fields) {
            *slot = field.trim().parse().map_err(|_| Error::Parse {
                line: idx + 1,
                message: format!("non-numeric field `{field}`"),
            })?;
        }
        out.push(DominantDirection {
            x: nums[0],
            y: nums[1],
            theta: nums[2],
            w: nums[3],
        });
    }
    Ok(out)
}

/// Debug overlay: one arrow per dominant direction, thickness scaled by w.
pub fn render_directions(directions: &[DominantDirection], width: usize, height: usize) -> GrayFrame {
    let mut img = GrayFrame::new(width, height);
    let arm = (width.min(height) as f64 / 40.0).max(4.0);
    for d in directions {
        let dir = Vec2::from_angle(d.theta);
        let center = d.position();
        img.draw_arrow(center - dir * arm, center + dir * arm, 255, 0.8 + 2.2 * d.w);
    }
    img
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::MotionVector;
    use crate::grid::{bin_vectors, prune, GridSpec};
    use approx::assert_relative_eq;
    use std::f64::consts::{FRAC_PI_2, PI, TAU};

    #[test]
    fn local_scales_collinear() {
        let pts = vec![Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0), Vec2::new(2.0, 0.0)];
        let scales = local_scales(&pts, 1).unwrap();
        assert_eq!(scales, vec![1.0, 1.0, 1.0]);
    }

    #[test]
    fn local_scales_coincident_floor() {
        let pts = vec![Vec2::new(3.0, 4.0), Vec2::new(3.0, 4.0)];
        let scales = local_scales(&pts, 1).unwrap();
        assert_eq!(scales, vec![SCALE_FLOOR, SCALE_FLOOR]);
    }

    #[test]
    fn local_scales_circle_antipode() {
        // 8 points on a unit circle with k = 7: the 7th neighbor is the
        // antipode at distance exactly 2.
        let pts: Vec<Vec2> = (0..8)
            .map(|i| Vec2::from_angle(i as f64 * TAU / 8.0))
            .collect();
        let scales = local_scales(&pts, 7).unwrap();
        for s in scales {
            assert_relative_eq!(s, 2.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn affinity_values() {
        let pts = vec![Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0)];
        let aff = affinity(&pts, &[1.0, 1.0]).unwrap();
        assert_eq!(aff.get(0, 0), 1.0);
        assert_relative_eq!(aff.get(0, 1), (-1.0f64).exp(), epsilon = 1e-12);
        assert_eq!(aff.get(0, 1), aff.get(1, 0));

        let far = vec![Vec2::new(0.0, 0.0), Vec2::new(10.0, 0.0)];
        let aff = affinity(&far, &[1.0, 1.0]).unwrap();
        assert!(aff.get(0, 1) < 1e-40);

        let same = vec![Vec2::new(2.0, 2.0), Vec2::new(2.0, 2.0)];
        let aff = affinity(&same, &[1.0, 1.0]).unwrap();
        assert_eq!(aff.get(0, 1), 1.0);

        assert!(affinity(&pts, &[1.0, 0.0]).is_err());
    }

    #[test]
    fn laplacian_eigenvalues_in_range() {
        let pts: Vec<Vec2> = (0..15)
            .map(|i| Vec2::new((i % 4) as f64 * 1.3, (i / 4) as f64 * 0.9))
            .collect();
        let scales = local_scales(&pts, 3).unwrap();
        let aff = affinity(&pts, &scales).unwrap();
        let lap = normalized_laplacian(&aff);
        let eig = symmetric_eigen(&lap);
        for v in eig.values {
            assert!((-1e-8..=2.0 + 1e-8).contains(&v), "eigenvalue {v} out of [0, 2]");
        }
    }

    fn blob(center: Vec2, count: usize, spread: f64, salt: u64) -> Vec<Vec2> {
        // Deterministic low-discrepancy jitter; good enough as "Gaussian-ish".
        (0..count)
            .map(|i| {
                let a = mix_seed(salt, i as u64) as f64 / u64::MAX as f64;
                let b = mix_seed(salt.wrapping_add(1), i as u64) as f64 / u64::MAX as f64;
                center + Vec2::new((a - 0.5) * 2.0 * spread, (b - 0.5) * 2.0 * spread)
            })
            .collect()
    }

    #[test]
    fn two_blobs_two_clusters() {
        let mut pts = blob(Vec2::new(0.0, 0.0), 20, 2.0, 3);
        pts.extend(blob(Vec2::new(100.0, 0.0), 20, 2.0, 9));
        let clusters = cluster(&pts, &ClusterParams::default(), 42).unwrap();
        assert_eq!(clusters.len(), 2);
        for c in &clusters {
            assert_eq!(c.len(), 20);
            let same_side = c.iter().all(|&i| i < 20) || c.iter().all(|&i| i >= 20);
            assert!(same_side, "cluster mixes blobs: {c:?}");
        }
    }

    #[test]
    fn tight_blob_one_cluster() {
        let pts = blob(Vec2::new(5.0, 5.0), 25, 1.0, 17);
        let clusters = cluster(&pts, &ClusterParams::default(), 1).unwrap();
        assert_eq!(clusters.len(), 1);
        assert_eq!(clusters[0].len(), 25);
    }

    #[test]
    fn singleton_cluster() {
        let clusters = cluster(&[Vec2::new(1.0, 1.0)], &ClusterParams::default(), 1).unwrap();
        assert_eq!(clusters, vec![vec![0]]);
    }

    #[test]
    fn translation_invariance() {
        let mut pts = blob(Vec2::new(0.0, 0.0), 18, 2.0, 5);
        pts.extend(blob(Vec2::new(60.0, 30.0), 18, 2.0, 6));
        let base = cluster(&pts, &ClusterParams::default(), 9).unwrap();
        let shifted: Vec<Vec2> = pts.iter().map(|p| *p + Vec2::new(500.0, -120.0)).collect();
        let moved = cluster(&shifted, &ClusterParams::default(), 9).unwrap();
        assert_eq!(base, moved);
    }

    fn field_from(vectors: Vec<MotionVector>, grid: GridSpec) -> CellHistogramField {
        prune(&bin_vectors(&vectors, grid).unwrap(), 0)
    }

    #[test]
    fn dominant_direction_centroid_and_weight() {
        let grid = GridSpec::new(1, 1, 40.0, 40.0).unwrap();
        // One bin: 30 members near (4, 4), and in another bin 10 members
        // near (30, 30). Weights must be 1.0 and 10/30.
        let mut vectors = Vec::new();
        for i in 0..30 {
            let p = Vec2::new(4.0, 4.0) + Vec2::new((i % 6) as f64 * 0.3, (i / 6) as f64 * 0.3);
            vectors.push(MotionVector::new(p.x, p.y, 0.0, 1.5, 1));
        }
        for i in 0..10 {
            let p = Vec2::new(30.0, 30.0) + Vec2::new((i % 4) as f64 * 0.3, (i / 4) as f64 * 0.3);
            vectors.push(MotionVector::new(p.x, p.y, -1.5, 0.0, 1));
        }
        let field = field_from(vectors, grid);
        let mut dirs = dominant_directions(&field, &ClusterParams::default()).unwrap();
        dirs.sort_by(|a, b| b.w.partial_cmp(&a.w).unwrap());
        assert_eq!(dirs.len(), 2);
        assert_relative_eq!(dirs[0].w, 1.0);
        assert_relative_eq!(dirs[1].w, 1.0 / 3.0, epsilon = 1e-12);
        assert_relative_eq!(dirs[0].theta, FRAC_PI_2, epsilon = 1e-12);
        assert_relative_eq!(dirs[1].theta, PI, epsilon = 1e-12);
    }

    #[test]
    fn empty_field_no_directions() {
        let grid = GridSpec::new(2, 2, 20.0, 20.0).unwrap();
        let field = field_from(Vec::new(), grid);
        let dirs = dominant_directions(&field, &ClusterParams::default()).unwrap();
        assert!(dirs.is_empty());
    }

    #[test]
    fn circular_mean_on_wrap() {
        // Members straddling zero: the mean must approach 0, not π.
        let grid = GridSpec::new(1, 1, 10.0, 10.0).unwrap();
        let eps = 1e-3;
        let mut vectors = Vec::new();
        for i in 0..6 {
            let theta = if i % 2 == 0 { eps } else { TAU - eps };
            vectors.push(MotionVector::new(
                1.0 + i as f64,
                5.0,
                theta.cos(),
                theta.sin(),
                1,
            ));
        }
        let field = field_from(vectors, grid);
        let dirs = dominant_directions(&field, &ClusterParams::default()).unwrap();
        // Thetas eps and 2π-eps fall in bins 1 and 8 respectively; each bin
        // clusters separately, so both results must be near zero.
        assert!(!dirs.is_empty());
        for d in dirs {
            assert!(d.theta < 1e-2 || d.theta > TAU - 1e-2, "theta {} not near 0", d.theta);
        }
    }

    #[test]
    fn directions_roundtrip() {
        let path = std::env::temp_dir().join(format!("dirs_{}.csv", std::process::id()));
        let dirs = vec![
            DominantDirection {
                x: 1.5,
                y: 2.5,
                theta: 0.7,
                w: 1.0,
            },
            DominantDirection {
                x: 0.1 + 0.2,
                y: 9.0,
                theta: TAU - 1e-9,
                w: 0.25,
            },
        ];
        save_directions(&dirs, &path).unwrap();
        let loaded = load_directions(&path).unwrap();
        assert_eq!(dirs.len(), loaded.len());
        for (a, b) in dirs.iter().zip(&loaded) {
            assert_eq!(a, b);
        }
        fs::remove_file(&path).unwrap();
    }
}
