//! Per-agent path diversification: square, triangle, and circle sampling
//! around the crude path. All three are deterministic functions of
//! (path, params.seed) and preserve the node count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::math::Vec2;

use super::{DiversifyMethod, DiversifyParams, GlobalPath};

/// Dispatch on `params.method`.
pub fn diversify(path: &GlobalPath, params: &DiversifyParams) -> GlobalPath {
    match params.method {
        DiversifyMethod::Square => diversify_square(path, params),
        DiversifyMethod::Triangle => diversify_triangle(path, params),
        DiversifyMethod::Circle => diversify_circle(path, params),
    }
}

/// Replace each node with a uniform sample from the axis-aligned square of
/// half-width `size` centered on it.
pub fn diversify_square(path: &GlobalPath, params: &DiversifyParams) -> GlobalPath {
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let nodes = path
        .nodes
        .iter()
        .map(|&p| {
            let dx = rng.random_range(-1.0..=1.0) * params.size;
            let dy = rng.random_range(-1.0..=1.0) * params.size;
            p + Vec2::new(dx, dy)
        })
        .collect();
    GlobalPath::new(nodes, path.support)
}

/// Replace each node with a uniform sample on a base segment of length
/// `size` centered on it. The base direction is the mean of the unit
/// perpendiculars of the node's incident segments.
pub fn diversify_triangle(path: &GlobalPath, params: &DiversifyParams) -> GlobalPath {
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let perps = node_perpendiculars(&path.nodes);
    let nodes = path
        .nodes
        .iter()
        .zip(&perps)
        .map(|(&p, &perp)| {
            let offset = rng.random_range(-0.5..=0.5) * params.size;
            p + perp * offset
        })
        .collect();
    GlobalPath::new(nodes, path.support)
}

/// Displace each node by a per-node radius along the local perpendicular,
/// on one side of the crude path drawn once per diversified path. Radii lie
/// in (0, size] with consecutive radii within `radius_coupling`; tying them
/// together keeps a small circle from sitting next to a large one, and the
/// single-side rule keeps the variant from criss-crossing the crude path.
pub fn diversify_circle(path: &GlobalPath, params: &DiversifyParams) -> GlobalPath {
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let perps = node_perpendiculars(&path.nodes);
    let side = if rng.random_range(0..2u8) == 0 { 1.0 } else { -1.0 };
    let size = params.size;
    let min_radius = (size * 1e-9).max(f64::MIN_POSITIVE);

    let mut radius = rng.random_range(0.0..=1.0) * size;
    if size > 0.0 {
        radius = radius.max(min_radius);
    }
    let mut nodes = Vec::with_capacity(path.nodes.len());
    for (i, (&p, &perp)) in path.nodes.iter().zip(&perps).enumerate() {
        if i > 0 {
            let lo = (radius - params.radius_coupling).max(min_radius).min(size);
            let hi = (radius + params.radius_coupling).min(size);
            radius = if hi > lo {
                rng.random_range(lo..=hi)
            } else {
                hi.max(0.0)
            };
        }
        nodes.push(p + perp * (side * radius));
    }
    GlobalPath::new(nodes, path.support)
}

/// Unit perpendicular at every node: the mean of the unit perpendiculars of
/// the two incident segments (endpoints use their single segment). A
/// degenerate mean (straight-back reversal) falls back to the first incident
/// segment's perpendicular.
pub fn node_perpendiculars(nodes: &[Vec2]) -> Vec<Vec2> {
    let n = nodes.len();
    let seg_perp = |a: Vec2, b: Vec2| (b - a).normalized().perp();
    (0..n)
        .map(|i| {
            let before = if i > 0 { Some(seg_perp(nodes[i - 1], nodes[i])) } else { None };
            let after = if i + 1 < n { Some(seg_perp(nodes[i], nodes[i + 1])) } else { None };
            let mean = match (before, after) {
                (Some(a), Some(b)) => (a + b) * 0.5,
                (Some(a), None) => a,
                (None, Some(b)) => b,
                (None, None) => Vec2::ZERO,
            };
            let unit = mean.normalized();
            if unit == Vec2::ZERO {
                before.or(after).unwrap_or(Vec2::ZERO)
            } else {
                unit
            }
        })
        .collect()
}
