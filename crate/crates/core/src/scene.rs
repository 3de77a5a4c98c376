//! Image plane / ground plane mapping and rendering of simulated agents
//! back into a frame sequence matched to the exemplar's resolution and
//! framerate.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::{FrameSequence, GrayFrame};
use crate::math::{Mat3, Vec2};
use crate::pathgen::GlobalPath;
use crate::sim::Trajectories;

/// Invertible 3x3 projective map from image pixels to world ground-plane
/// meters, normalized so h[2][2] = 1. The inverse is precomputed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Homography {
    forward: Mat3,
    inverse: Mat3,
}

impl Homography {
    pub fn new(mut m: Mat3) -> Result<Self> {
        let det = m.det();
        if det.abs() <= 1e-12 {
            return Err(Error::invalid(format!("homography is singular (det {det})")));
        }
        let h22 = m.m[2][2];
        if h22.abs() <= 1e-12 {
            return Err(Error::invalid("homography has h[2][2] too close to 0"));
        }
        for row in &mut m.m {
            for v in row.iter_mut() {
                *v /= h22;
            }
        }
        let inverse = m.inverse().ok_or_else(|| Error::invalid("homography is singular"))?;
        Ok(Homography { forward: m, inverse })
    }

    pub fn identity() -> Self {
        Homography {
            forward: Mat3::identity(),
            inverse: Mat3::identity(),
        }
    }

    /// Uniform image-to-world scale: world = meters_per_pixel * pixel.
    pub fn scaled_identity(meters_per_pixel: f64) -> Result<Self> {
        if meters_per_pixel <= 0.0 {
            return Err(Error::invalid("meters_per_pixel must be positive"));
        }
        Homography::new(Mat3::from_rows([
            [meters_per_pixel, 0.0, 0.0],
            [0.0, meters_per_pixel, 0.0],
            [0.0, 0.0, 1.0],
        ]))
    }

    pub fn from_row_major(values: &[f64; 9]) -> Result<Self> {
        Homography::new(Mat3::from_rows([
            [values[0], values[1], values[2]],
            [values[3], values[4], values[5]],
            [values[6], values[7], values[8]],
        ]))
    }

    pub fn matrix(&self) -> &Mat3 {
        &self.forward
    }

    /// Map an image point to the ground plane.
    pub fn project(&self, p: Vec2) -> Result<Vec2> {
        apply(&self.forward, p)
    }

    /// Map a world point back into the image.
    pub fn unproject(&self, p: Vec2) -> Result<Vec2> {
        apply(&self.inverse, p)
    }
}

fn apply(m: &Mat3, p: Vec2) -> Result<Vec2> {
    let (x, y, w) = m.apply_homogeneous(p);
    if w.abs() < 1e-12 {
        return Err(Error::Projection(format!(
            "point ({}, {}) maps to the line at infinity",
            p.x, p.y
        )));
    }
    Ok(Vec2::new(x / w, y / w))
}

/// Project every node of every path into world space; an unprojectable node
/// fails with the path and node named.
pub fn project_paths(paths: &[GlobalPath], h: &Homography) -> Result<Vec<GlobalPath>> {
    paths
        .iter()
        .enumerate()
        .map(|(pi, p)| {
            let nodes = p
                .nodes
                .iter()
                .enumerate()
                .map(|(ni, &node)| {
                    h.project(node).map_err(|e| {
                        Error::Projection(format!("path {pi} node {ni}: {e}"))
                    })
                })
                .collect::<Result<Vec<Vec2>>>()?;
            Ok(GlobalPath::new(nodes, p.support))
        })
        .collect()
}

/// Output raster parameters. Grayscale intensities; `rgb` only widens the
/// encoded PNG, the rendering itself is single channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenderSpec {
    pub width: usize,
    pub height: usize,
    pub fps: f64,
    pub background: u8,
    pub agent_color: u8,
    /// Rim intensity; the bright rim guarantees trackable structure on the
    /// disk for the downstream flow extractor.
    pub rim_color: u8,
    pub agent_draw_radius: f64,
    pub rgb: bool,
}

impl Default for RenderSpec {
    fn default() -> Self {
        RenderSpec {
            width: 640,
            height: 480,
            fps: 25.0,
            background: 0,
            agent_color: 160,
            rim_color: 255,
            agent_draw_radius: 5.0,
            rgb: false,
        }
    }
}

/// Render trajectories as anti-aliased disks at inverse-projected image
/// positions. Simulation steps are resampled to the frame grid by linear
/// interpolation; frame count is ceil(duration * fps). Pure function of its
/// inputs.
pub fn render(trajectories: &Trajectories, h: &Homography, spec: &RenderSpec) -> Result<FrameSequence> {
    if spec.width == 0 || spec.height == 0 || spec.fps <= 0.0 {
        return Err(Error::invalid("render spec must have positive dimensions and fps"));
    }
    let duration = trajectories.duration();
    let frame_count = ((duration * spec.fps).ceil() as usize).max(1);

    // Per-agent sample runs, ordered by step.
    let mut agents: std::collections::BTreeMap<u64, Vec<(u64, Vec2)>> = std::collections::BTreeMap::new();
    for p in &trajectories.points {
        agents.entry(p.agent_id).or_default().push((p.step, p.pos));
    }

    let dt = trajectories.dt;
    let frames: Vec<Result<GrayFrame>> = (0..frame_count)
        .into_par_iter()
        .map(|fi| {
            let time = fi as f64 / spec.fps;
            let step_f = time / dt;
            let mut frame = GrayFrame::filled(spec.width, spec.height, spec.background);
            for samples in agents.values() {
                let Some(world) = sample_position(samples, step_f) else {
                    continue;
                };
                let image_pos = h.unproject(world)?;
                frame.draw_disk(
                    image_pos,
                    spec.agent_draw_radius,
                    spec.agent_color,
                    spec.rim_color,
                    1.5,
                );
            }
            Ok(frame)
        })
        .collect();

    FrameSequence::new(frames.into_iter().collect::<Result<Vec<_>>>()?, spec.fps)
}

/// Interpolated position at fractional step, or None when the agent is not
/// alive across the bracketing steps.
fn sample_position(samples: &[(u64, Vec2)], step_f: f64) -> Option<Vec2> {
    let first = samples.first()?.0 as f64;
    let last = samples.last()?.0 as f64;
    if step_f < first || step_f > last {
        return None;
    }
    let lo = step_f.floor() as u64;
    let hi = step_f.ceil() as u64;
    let lo_idx = samples.binary_search_by_key(&lo, |&(s, _)| s).ok()?;
    if hi == lo {
        return Some(samples[lo_idx].1);
    }
    let hi_idx = samples.binary_search_by_key(&hi, |&(s, _)| s).ok()?;
    let t = step_f - lo as f64;
    Some(samples[lo_idx].1.lerp(samples[hi_idx].1, t))
}
