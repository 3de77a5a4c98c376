//! Sparse motion extraction: corner detection, pyramidal Lucas–Kanade
//! tracking over consecutive frame pairs, and the motion-vector file format.

mod corners;
mod io;
mod lk;
mod raster;

pub use corners::detect_features;
pub use io::{load_vectors, parse_vectors, save_vectors, VECTORS_HEADER};
pub use lk::track_flow;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::frame::FrameSequence;
use crate::math::wrap_angle;

/// One inter-frame displacement sample.
///
/// `(x, y)` is the origin position in image coordinates, `(u, v)` the
/// displacement in pixels per frame, and `t` the 1-based index of the frame
/// the sample originates from. The polar form `(theta, l)` is derived from
/// `(u, v)` at construction and kept consistent by never being set directly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotionVector {
    pub x: f64,
    pub y: f64,
    pub u: f64,
    pub v: f64,
    /// Displacement orientation in [0, 2π); 0 for a zero displacement.
    pub theta: f64,
    /// Displacement magnitude in pixels.
    pub l: f64,
    pub t: u32,
}

impl MotionVector {
    pub fn new(x: f64, y: f64, u: f64, v: f64, t: u32) -> Self {
        let (theta, l) = polar_of(u, v);
        MotionVector {
            x,
            y,
            u,
            v,
            theta,
            l,
            t,
        }
    }

    pub fn position(&self) -> crate::math::Vec2 {
        crate::math::Vec2::new(self.x, self.y)
    }
}

/// Polar form of a displacement: theta = atan2(v, u) wrapped to [0, 2π),
/// l = sqrt(u² + v²). The zero displacement maps to (0, 0) by convention.
pub fn polar_of(u: f64, v: f64) -> (f64, f64) {
    let l = u.hypot(v);
    if l == 0.0 {
        return (0.0, 0.0);
    }
    (wrap_angle(v.atan2(u)), l)
}

/// Tracker configuration.
#[derive(Debug, Clone)]
pub struct FlowParams {
    /// Feature budget per frame pair.
    pub max_corners: usize,
    /// Corner quality as a fraction of the strongest response, in (0, 1].
    pub quality: f64,
    /// Minimum pixel separation between detected corners.
    pub min_distance: f64,
    /// LK integration window side, odd and >= 3.
    pub window: usize,
    /// Number of pyramid reductions above full resolution.
    pub pyramid_levels: usize,
    /// Per-level Gauss–Newton iteration cap.
    pub max_iterations: usize,
    /// Convergence threshold on the incremental update, in pixels.
    pub epsilon: f64,
    /// Minimum per-pixel-normalized eigenvalue of the structure tensor.
    pub min_eigen: f64,
    /// Mean absolute intensity residual above which a track is dropped.
    pub max_residual: f64,
    /// Displacements shorter than this are discarded by
    /// [`extract_sequence`] as tracker noise.
    pub min_magnitude: f64,
    /// Frame-pair stride: 1 processes every consecutive pair.
    pub stride: usize,
}

impl Default for FlowParams {
    fn default() -> Self {
        FlowParams {
            max_corners: 2000,
            quality: 0.01,
            min_distance: 4.0,
            window: 15,
            pyramid_levels: 3,
            max_iterations: 30,
            epsilon: 0.01,
            min_eigen: 1e-4,
            max_residual: 12.0,
            min_magnitude: 0.5,
            stride: 1,
        }
    }
}

/// Run detection + tracking over every frame pair of a sequence. Pairs are
/// processed in parallel; the result is ordered by `t` and filtered by the
/// magnitude floor.
pub fn extract_sequence(seq: &FrameSequence, params: &FlowParams) -> Result<Vec<MotionVector>> {
    if seq.len() < 2 {
        return Err(Error::invalid("at least 2 frames required for flow"));
    }
    let stride = params.stride.max(1);
    let pair_starts: Vec<usize> = (0..seq.len() - stride).step_by(stride).collect();

    let per_pair: Vec<Result<Vec<MotionVector>>> = pair_starts
        .par_iter()
        .map(|&i| {
            let prev = &seq.frames[i];
            let next = &seq.frames[i + stride];
            let points = detect_features(prev, params.max_corners, params.quality, params.min_distance)?;
            track_flow(prev, next, &points, (i + 1) as u32, params)
        })
        .collect();

    let mut all = Vec::new();
    for res in per_pair {
        let vecs = res?;
        all.extend(vecs.into_iter().filter(|v| v.l >= params.min_magnitude));
    }
    Ok(all)
}
