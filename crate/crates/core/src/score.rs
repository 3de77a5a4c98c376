//! Crowd similarity scoring: sliding-window 8-bin histograms of motion,
//! window-wise Bhattacharyya distance, and the mean similarity score.
//!
//! The distance per window is d = sqrt(1 - BC) with BC the Bhattacharyya
//! coefficient sum(sqrt(H1(k) * H2(k))): 0 for a perfect match, 1 for
//! disjoint support. The raw coefficient is reported alongside.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::MotionVector;
use crate::frame::GrayFrame;
use crate::grid::{bin_center, bin_index, ORIENTATION_BINS};
use crate::math::Vec2;

/// Sliding-window field of L1-normalized orientation histograms. Windows
/// advance by `stride` from (0, 0); windows with no vectors are flagged
/// empty rather than holding a zero histogram.
#[derive(Debug, Clone, PartialEq)]
pub struct MotionHistogramField {
    pub window: usize,
    pub stride: usize,
    pub image_width: f64,
    pub image_height: f64,
    pub windows_x: usize,
    pub windows_y: usize,
    histograms: Vec<Option<[f64; ORIENTATION_BINS]>>,
}

impl MotionHistogramField {
    /// Histogram of the window at 0-based grid position, None when empty.
    pub fn histogram(&self, ix: usize, iy: usize) -> Option<&[f64; ORIENTATION_BINS]> {
        self.histograms[iy * self.windows_x + ix].as_ref()
    }

    /// Pixel origin of a window.
    pub fn origin(&self, ix: usize, iy: usize) -> (usize, usize) {
        (ix * self.stride, iy * self.stride)
    }

    pub fn window_count(&self) -> usize {
        self.windows_x * self.windows_y
    }

    pub fn non_empty_count(&self) -> usize {
        self.histograms.iter().filter(|h| h.is_some()).count()
    }

    fn same_geometry(&self, other: &Self) -> bool {
        self.window == other.window
            && self.stride == other.stride
            && self.windows_x == other.windows_x
            && self.windows_y == other.windows_y
            && self.image_width == other.image_width
            && self.image_height == other.image_height
    }
}

fn axis_window_count(extent: f64, window: usize, stride: usize) -> usize {
    if extent <= window as f64 {
        1
    } else {
        ((extent - window as f64) / stride as f64).ceil() as usize + 1
    }
}

/// Build the histogram field. Every vector contributes to every window
/// containing its position; windows tile from (0, 0) with the given stride,
/// partial edge windows included.
pub fn build_hom(
    vectors: &[MotionVector],
    width: f64,
    height: f64,
    window: usize,
    stride: usize,
) -> Result<MotionHistogramField> {
    if stride == 0 || window < stride {
        return Err(Error::invalid("need window >= stride >= 1"));
    }
    if width <= 0.0 || height <= 0.0 {
        return Err(Error::invalid("image dimensions must be positive"));
    }
    let windows_x = axis_window_count(width, window, stride);
    let windows_y = axis_window_count(height, window, stride);
    let mut counts = vec![[0u64; ORIENTATION_BINS]; windows_x * windows_y];

    let stride_f = stride as f64;
    let window_f = window as f64;
    for v in vectors {
        if v.x < 0.0 || v.y < 0.0 || v.x >= width || v.y >= height {
            return Err(Error::invalid(format!(
                "vector at ({}, {}) outside {width}x{height} image",
                v.x, v.y
            )));
        }
        let k = bin_index(v.theta)? - 1;
        let ix_hi = ((v.x / stride_f) as usize).min(windows_x - 1);
        let iy_hi = ((v.y / stride_f) as usize).min(windows_y - 1);
        let span = (window_f / stride_f).ceil() as usize;
        for iy in iy_hi.saturating_sub(span)..=iy_hi {
            for ix in ix_hi.saturating_sub(span)..=ix_hi {
                let ox = ix as f64 * stride_f;
                let oy = iy as f64 * stride_f;
                if v.x >= ox && v.x < ox + window_f && v.y >= oy && v.y < oy + window_f {
                    counts[iy * windows_x + ix][k] += 1;
                }
            }
        }
    }

    let histograms = counts
        .into_iter()
        .map(|c| {
            let total: u64 = c.iter().sum();
            if total == 0 {
                None
            } else {
                let mut h = [0.0; ORIENTATION_BINS];
                for (dst, &n) in h.iter_mut().zip(&c) {
                    *dst = n as f64 / total as f64;
                }
                Some(h)
            }
        })
        .collect();

    Ok(MotionHistogramField {
        window,
        stride,
        image_width: width,
        image_height: height,
        windows_x,
        windows_y,
        histograms,
    })
}

fn check_normalized(h: &[f64; ORIENTATION_BINS]) -> Result<()> {
    let sum: f64 = h.iter().sum();
    if (sum - 1.0).abs() > 1e-6 {
        return Err(Error::invalid(format!("histogram not L1-normalized (sum {sum})")));
    }
    if h.iter().any(|&x| x < 0.0) {
        return Err(Error::invalid("histogram has negative mass"));
    }
    Ok(())
}

/// Bhattacharyya coefficient sum(sqrt(H1(k) * H2(k))), clamped to [0, 1]:
/// 1 for identical histograms, 0 for disjoint support. Equal histograms
/// short-circuit to exactly 1 so self-comparison is exact rather than
/// accumulating sqrt rounding.
pub fn bhattacharyya_coefficient(
    h1: &[f64; ORIENTATION_BINS],
    h2: &[f64; ORIENTATION_BINS],
) -> Result<f64> {
    check_normalized(h1)?;
    check_normalized(h2)?;
    if h1 == h2 {
        return Ok(1.0);
    }
    let bc: f64 = h1.iter().zip(h2).map(|(&a, &b)| (a * b).sqrt()).sum();
    Ok(bc.clamp(0.0, 1.0))
}

/// Bhattacharyya distance sqrt(1 - BC): 0 meaning a perfect match, 1
/// meaning disjoint histograms. Symmetric.
pub fn bhattacharyya(h1: &[f64; ORIENTATION_BINS], h2: &[f64; ORIENTATION_BINS]) -> Result<f64> {
    Ok((1.0 - bhattacharyya_coefficient(h1, h2)?).max(0.0).sqrt())
}

/// What to do with a window that is empty in exactly one field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmptyWindowPolicy {
    /// Motion present on one side only is maximal dissimilarity: distance 1.
    #[default]
    Penalize,
    /// Exclude mismatched windows from the mean.
    Skip,
}

/// Similarity report: the mean window distance plus per-window detail.
#[derive(Debug, Clone)]
pub struct ScoreReport {
    /// Mean Bhattacharyya distance over compared windows; lower is more
    /// similar.
    pub score: f64,
    /// Number of windows entering the mean.
    pub compared_windows: usize,
    /// Mean Bhattacharyya coefficient over windows non-empty in both fields.
    pub mean_coefficient: f64,
    /// (origin_x, origin_y, distance) for every window entering the mean.
    pub per_window: Vec<(usize, usize, f64)>,
}

/// Mean window-wise Bhattacharyya distance between two fields of identical
/// geometry. Windows empty in both fields are excluded; windows empty in
/// exactly one contribute per the policy.
pub fn score_fields(
    f1: &MotionHistogramField,
    f2: &MotionHistogramField,
    policy: EmptyWindowPolicy,
) -> Result<ScoreReport> {
    if !f1.same_geometry(f2) {
        return Err(Error::invalid(format!(
            "field geometry mismatch: {}x{} win {}/{} vs {}x{} win {}/{}",
            f1.windows_x, f1.windows_y, f1.window, f1.stride, f2.windows_x, f2.windows_y, f2.window, f2.stride
        )));
    }
    let mut per_window = Vec::new();
    let mut coeff_sum = 0.0;
    let mut coeff_count = 0usize;
    for iy in 0..f1.windows_y {
        for ix in 0..f1.windows_x {
            let (ox, oy) = f1.origin(ix, iy);
            match (f1.histogram(ix, iy), f2.histogram(ix, iy)) {
                (Some(h1), Some(h2)) => {
                    per_window.push((ox, oy, bhattacharyya(h1, h2)?));
                    coeff_sum += bhattacharyya_coefficient(h1, h2)?;
                    coeff_count += 1;
                }
                (None, None) => {}
                _ => {
                    if policy == EmptyWindowPolicy::Penalize {
                        per_window.push((ox, oy, 1.0));
                    }
                }
            }
        }
    }
    let compared_windows = per_window.len();
    let score = if compared_windows == 0 {
        0.0
    } else {
        per_window.iter().map(|&(_, _, d)| d).sum::<f64>() / compared_windows as f64
    };
    Ok(ScoreReport {
        score,
        compared_windows,
        mean_coefficient: if coeff_count == 0 { 0.0 } else { coeff_sum / coeff_count as f64 },
        per_window,
    })
}

/// Rose-glyph visualization: one 8-spoke glyph per non-empty window, spoke
/// lengths proportional to bin mass (longest spoke = strongest bin).
pub fn render_hom(field: &MotionHistogramField) -> GrayFrame {
    let mut img = GrayFrame::new(field.image_width as usize, field.image_height as usize);
    let radius = (field.stride.min(field.window) as f64 / 2.0 - 1.0).max(2.0);
    for iy in 0..field.windows_y {
        for ix in 0..field.windows_x {
            let Some(h) = field.histogram(ix, iy) else {
                continue;
            };
            let (ox, oy) = field.origin(ix, iy);
            let center = Vec2::new(
                (ox as f64 + field.window as f64 / 2.0).min(field.image_width - 1.0),
                (oy as f64 + field.window as f64 / 2.0).min(field.image_height - 1.0),
            );
            let max_mass = h.iter().cloned().fold(0.0, f64::max);
            if max_mass <= 0.0 {
                continue;
            }
            for (b, &mass) in h.iter().enumerate() {
                if mass <= 0.0 {
                    continue;
                }
                let dir = Vec2::from_angle(bin_center(b + 1));
                let len = radius * mass / max_mass;
                img.draw_line(center, center + dir * len, 255, 1.0);
            }
        }
    }
    img
}

/// Write the CSV report: `window_x,window_y,distance` rows for every
/// compared window, then a `score=<s>,windows=<m>` summary line.
pub fn save_score_csv(report: &ScoreReport, path: &Path) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let write = |w: &mut BufWriter<fs::File>| -> std::io::Result<()> {
        writeln!(w, "window_x,window_y,distance")?;
        for &(ox, oy, d) in &report.per_window {
            writeln!(w, "{ox},{oy},{d:.16e}")?;
        }
        writeln!(w, "score={:.6},windows={}", report.score, report.compared_windows)?;
        Ok(())
    };
    write(&mut w).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

/// Plain-text summary of a comparison.
pub fn save_score_text(report: &ScoreReport, path: &Path) -> Result<()> {
    let body = format!(
        "similarity score (mean Bhattacharyya distance, lower is more similar): {:.6}\n\
         windows compared: {}\n\
         mean Bhattacharyya coefficient over jointly non-empty windows: {:.6}\n",
        report.score, report.compared_windows, report.mean_coefficient
    );
    fs::write(path, body).map_err(|e| Error::io(path, e))
}
