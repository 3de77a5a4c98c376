//! Minimum-eigenvalue (Shi–Tomasi style) corner selection for the sparse
//! tracker.

use crate::error::{Error, Result};
use crate::frame::GrayFrame;
use crate::math::Vec2;

use super::raster::FloatImg;

/// Pick up to `max_corners` corner points, strongest response first, with a
/// `min_distance` pixel separation enforced greedily in response order.
///
/// The response at a pixel is the minimum eigenvalue of the 3x3-window
/// structure tensor of Scharr gradients; `quality` discards candidates below
/// that fraction of the strongest response in the frame.
pub fn detect_features(
    frame: &GrayFrame,
    max_corners: usize,
    quality: f64,
    min_distance: f64,
) -> Result<Vec<Vec2>> {
    if frame.width() == 0 || frame.height() == 0 {
        return Err(Error::invalid("empty frame"));
    }
    if max_corners == 0 {
        return Err(Error::invalid("max_corners must be >= 1"));
    }
    if !(quality > 0.0 && quality <= 1.0) {
        return Err(Error::invalid("quality must lie in (0, 1]"));
    }

    let img = FloatImg::from_frame(frame);
    let w = frame.width();
    let h = frame.height();

    let mut gx = vec![0.0; w * h];
    let mut gy = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let (dx, dy) = img.scharr_at(x as f64, y as f64);
            gx[y * w + x] = dx;
            gy[y * w + x] = dy;
        }
    }

    // Margin of 2: one pixel for the gradient stencil, one for the tensor
    // window, so border clamping never fabricates a response.
    let margin = 2usize;
    if w <= 2 * margin || h <= 2 * margin {
        return Ok(Vec::new());
    }

    let mut responses: Vec<(f64, usize, usize)> = Vec::new();
    let mut max_response = 0.0f64;
    for y in margin..h - margin {
        for x in margin..w - margin {
            let (mut a, mut b, mut c) = (0.0, 0.0, 0.0);
            for dy in -1i64..=1 {
                for dx in -1i64..=1 {
                    let idx = (y as i64 + dy) as usize * w + (x as i64 + dx) as usize;
                    a += gx[idx] * gx[idx];
                    b += gx[idx] * gy[idx];
                    c += gy[idx] * gy[idx];
                }
            }
            let response = min_eigenvalue(a, b, c);
            if response > 0.0 {
                responses.push((response, x, y));
                max_response = max_response.max(response);
            }
        }
    }
    if responses.is_empty() {
        return Ok(Vec::new());
    }

    let threshold = quality * max_response;
    responses.retain(|&(r, _, _)| r >= threshold);
    // Strongest first; coordinate tie-break keeps the order deterministic.
    responses.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.2.cmp(&b.2)).then(a.1.cmp(&b.1)));

    Ok(suppress(&responses, max_corners, min_distance, w, h))
}

/// Minimum eigenvalue of the symmetric 2x2 matrix [[a, b], [b, c]].
#[inline]
fn min_eigenvalue(a: f64, b: f64, c: f64) -> f64 {
    0.5 * ((a + c) - ((a - c) * (a - c) + 4.0 * b * b).sqrt())
}

/// Greedy non-maximum suppression over a bucket grid of cell size
/// `min_distance`, so each acceptance only checks neighboring buckets.
fn suppress(
    ranked: &[(f64, usize, usize)],
    max_corners: usize,
    min_distance: f64,
    width: usize,
    height: usize,
) -> Vec<Vec2> {
    let mut accepted: Vec<Vec2> = Vec::new();
    if min_distance <= 0.0 {
        for &(_, x, y) in ranked.iter().take(max_corners) {
            accepted.push(Vec2::new(x as f64, y as f64));
        }
        return accepted;
    }

    let cell = min_distance.max(1.0);
    let cells_x = (width as f64 / cell).ceil() as usize + 1;
    let cells_y = (height as f64 / cell).ceil() as usize + 1;
    let mut buckets: Vec<Vec<Vec2>> = vec![Vec::new(); cells_x * cells_y];
    let min_dist_sq = min_distance * min_distance;

    'candidates: for &(_, x, y) in ranked {
        let p = Vec2::new(x as f64, y as f64);
        let cx = (p.x / cell) as usize;
        let cy = (p.y / cell) as usize;
        for ny in cy.saturating_sub(1)..=(cy + 1).min(cells_y - 1) {
            for nx in cx.saturating_sub(1)..=(cx + 1).min(cells_x - 1) {
                for q in &buckets[ny * cells_x + nx] {
                    if (p - *q).length_squared() < min_dist_sq {
                        continue 'candidates;
                    }
                }
            }
        }
        buckets[cy * cells_x + cx].push(p);
        accepted.push(p);
        if accepted.len() == max_corners {
            break;
        }
    }
    accepted
}
