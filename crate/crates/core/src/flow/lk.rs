//! Pyramidal Lucas–Kanade tracking of sparse feature points.

use crate::error::{Error, Result};
use crate::frame::GrayFrame;
use crate::math::Vec2;

use super::raster::{build_pyramid, FloatImg};
use super::{FlowParams, MotionVector};

/// Track `points` from `prev` to `next`, returning one motion vector per
/// point that survives the eigenvalue, convergence, border, and residual
/// checks. `t` is the frame index of `prev` (1-based) stamped on the output.
pub fn track_flow(
    prev: &GrayFrame,
    next: &GrayFrame,
    points: &[Vec2],
    t: u32,
    params: &FlowParams,
) -> Result<Vec<MotionVector>> {
    if prev.width() != next.width() || prev.height() != next.height() {
        return Err(Error::invalid(format!(
            "frame size mismatch: {}x{} vs {}x{}",
            prev.width(),
            prev.height(),
            next.width(),
            next.height()
        )));
    }
    if params.window < 3 || params.window.is_multiple_of(2) {
        return Err(Error::invalid("window must be odd and >= 3"));
    }

    let prev_pyr = build_pyramid(prev, params.pyramid_levels);
    let next_pyr = build_pyramid(next, params.pyramid_levels);

    let mut out = Vec::with_capacity(points.len());
    for &p in points {
        if let Some(d) = track_point(&prev_pyr, &next_pyr, p, params) {
            let end = p + d;
            // Both endpoints must stay inside the frame.
            if end.x < 0.0
                || end.y < 0.0
                || end.x > (prev.width() - 1) as f64
                || end.y > (prev.height() - 1) as f64
            {
                continue;
            }
            out.push(MotionVector::new(p.x, p.y, d.x, d.y, t));
        }
    }
    Ok(out)
}

/// Coarse-to-fine iterative LK for one point. Returns the displacement, or
/// None if the point is untrackable.
fn track_point(
    prev_pyr: &[FloatImg],
    next_pyr: &[FloatImg],
    point: Vec2,
    params: &FlowParams,
) -> Option<Vec2> {
    let levels = prev_pyr.len().min(next_pyr.len());
    let r = (params.window / 2) as i64;
    let term_sq = params.epsilon * params.epsilon;

    let mut guess = Vec2::ZERO;
    let mut residual = f64::MAX;
    for level in (0..levels).rev() {
        let scale = (1u64 << level) as f64;
        let prev_img = &prev_pyr[level];
        let next_img = &next_pyr[level];
        let center = point / scale;

        // The integration window must fit at this level.
        let rf = r as f64;
        if center.x - rf - 1.0 < 0.0
            || center.y - rf - 1.0 < 0.0
            || center.x + rf + 1.0 > prev_img.width as f64 - 1.0
            || center.y + rf + 1.0 > prev_img.height as f64 - 1.0
        {
            if level == 0 {
                return None;
            }
            guess = guess * 2.0;
            continue;
        }

        // Template intensities and gradients from the previous frame.
        let n = params.window * params.window;
        let mut tmpl = Vec::with_capacity(n);
        let mut grad = Vec::with_capacity(n);
        let (mut gxx, mut gxy, mut gyy) = (0.0, 0.0, 0.0);
        for dy in -r..=r {
            for dx in -r..=r {
                let x = center.x + dx as f64;
                let y = center.y + dy as f64;
                tmpl.push(prev_img.sample(x, y));
                let (gx, gy) = prev_img.scharr_at(x, y);
                grad.push((gx, gy));
                gxx += gx * gx;
                gxy += gx * gy;
                gyy += gy * gy;
            }
        }
        let det = gxx * gyy - gxy * gxy;
        let min_eig = 0.5 * ((gxx + gyy) - ((gxx - gyy).powi(2) + 4.0 * gxy * gxy).sqrt());
        if min_eig / (n as f64) < params.min_eigen || det <= 0.0 {
            return None;
        }

        let mut nu = Vec2::ZERO;
        let mut converged = false;
        for _ in 0..params.max_iterations {
            let target = center + guess + nu;
            if target.x - rf < -1.0
                || target.y - rf < -1.0
                || target.x + rf > next_img.width as f64
                || target.y + rf > next_img.height as f64
            {
                return None;
            }
            let (mut bx, mut by) = (0.0, 0.0);
            let mut err_acc = 0.0;
            let mut k = 0;
            for dy in -r..=r {
                for dx in -r..=r {
                    let it = tmpl[k] - next_img.sample(target.x + dx as f64, target.y + dy as f64);
                    let (gx, gy) = grad[k];
                    bx += it * gx;
                    by += it * gy;
                    err_acc += it.abs();
                    k += 1;
                }
            }
            residual = err_acc / n as f64;
            // Solve G * eta = b for the 2x2 structure tensor G.
            let eta = Vec2::new((gyy * bx - gxy * by) / det, (gxx * by - gxy * bx) / det);
            nu += eta;
            if eta.length_squared() < term_sq {
                converged = true;
                break;
            }
        }
        if !converged && level == 0 && nu.length_squared() > 1.0 {
            // Allow slow tail convergence at the finest level only when the
            // final update was already subpixel.
            return None;
        }
        guess += nu;
        if level > 0 {
            guess = guess * 2.0;
        }
    }

    if residual > params.max_residual {
        return None;
    }
    Some(guess)
}
