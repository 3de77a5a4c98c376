//! Growing dominant directions into global paths, plus per-agent path
//! diversification and curve smoothing.

mod diversify;

pub use diversify::{diversify, diversify_circle, diversify_square, diversify_triangle, node_perpendiculars};

use std::collections::HashMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::GrayFrame;
use crate::grid::GridSpec;
use crate::math::{angle_diff, circular_mean, Vec2};
use crate::spectral::DominantDirection;

/// An ordered waypoint polyline in image space. `support` accumulates the
/// weight of the dominant directions consumed while growing the path.
#[derive(Debug, Clone, PartialEq)]
pub struct GlobalPath {
    pub nodes: Vec<Vec2>,
    pub support: f64,
}

impl GlobalPath {
    pub fn new(nodes: Vec<Vec2>, support: f64) -> Self {
        GlobalPath { nodes, support }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Total polyline length.
    pub fn arc_length(&self) -> f64 {
        self.nodes.windows(2).map(|w| w[0].distance(w[1])).sum()
    }

    /// Circular mean orientation of the segments.
    pub fn mean_orientation(&self) -> f64 {
        let angles: Vec<f64> = self
            .nodes
            .windows(2)
            .map(|w| (w[1] - w[0]).angle())
            .collect();
        circular_mean(&angles)
    }
}

/// Path diversification configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiversifyParams {
    pub method: DiversifyMethod,
    /// Square half-width, triangle base length, or circle max radius.
    pub size: f64,
    pub seed: u64,
    /// Maximum change between consecutive circle radii.
    pub radius_coupling: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DiversifyMethod {
    Square,
    Triangle,
    Circle,
}

/// Chain dominant directions into global paths.
///
/// Cells are swept left-to-right, top-to-bottom; each unused direction seeds
/// a chain that is extended downstream from its head and upstream from its
/// tail. A direction may join only from one of the 8 cells neighboring the
/// chain end, when its orientation is within `angle_tol` of the chain's
/// running circular-mean orientation (within `2 * angle_tol` for the
/// closest-orientation fallback when no similar candidate exists). Every
/// direction is consumed by at most one path; chains shorter than 2 nodes
/// are dropped.
pub fn grow_paths(
    directions: &[DominantDirection],
    grid: &GridSpec,
    angle_tol: f64,
) -> Result<Vec<GlobalPath>> {
    // Sweep order: by cell row, then cell column, then input order.
    let mut order: Vec<usize> = (0..directions.len()).collect();
    let cells: Vec<(usize, usize)> = directions
        .iter()
        .map(|d| grid.cell_of(d.x, d.y))
        .collect::<Result<_>>()?;
    order.sort_by_key(|&idx| (cells[idx].1, cells[idx].0, idx));

    let mut by_cell: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
    for &idx in &order {
        by_cell.entry(cells[idx]).or_default().push(idx);
    }

    let mut used = vec![false; directions.len()];
    let mut paths = Vec::new();

    for &seed in &order {
        if used[seed] {
            continue;
        }
        used[seed] = true;
        let mut chain = std::collections::VecDeque::from([seed]);
        let mut thetas = vec![directions[seed].theta];

        // Downstream, then upstream.
        for forward in [true, false] {
            loop {
                let end = if forward {
                    *chain.back().unwrap()
                } else {
                    *chain.front().unwrap()
                };
                let mean = circular_mean(&thetas);
                let Some(next) =
                    pick_candidate(directions, &cells, &by_cell, &used, end, mean, forward, angle_tol)
                else {
                    break;
                };
                used[next] = true;
                thetas.push(directions[next].theta);
                if forward {
                    chain.push_back(next);
                } else {
                    chain.push_front(next);
                }
            }
        }

        if chain.len() >= 2 {
            let nodes: Vec<Vec2> = chain.iter().map(|&i| directions[i].position()).collect();
            let support = chain.iter().map(|&i| directions[i].w).sum();
            paths.push(GlobalPath::new(nodes, support));
        }
    }
    Ok(paths)
}

/// Choose the next direction for a chain end, or None to stop growing.
///
/// Stage one keeps candidates within `angle_tol` of the chain mean and picks
/// the one whose displacement from the chain end best aligns with the mean
/// orientation (reversed when growing upstream). Stage two falls back to the
/// closest-orientation candidate within `2 * angle_tol`. Both stages require
/// positive alignment so chains always make progress along their flow.
#[allow(clippy::too_many_arguments)]
fn pick_candidate(
    directions: &[DominantDirection],
    cells: &[(usize, usize)],
    by_cell: &HashMap<(usize, usize), Vec<usize>>,
    used: &[bool],
    end: usize,
    mean_theta: f64,
    forward: bool,
    angle_tol: f64,
) -> Option<usize> {
    let (ci, cj) = cells[end];
    let end_pos = directions[end].position();
    let flow = Vec2::from_angle(mean_theta) * if forward { 1.0 } else { -1.0 };

    let mut best_aligned: Option<(f64, usize)> = None;
    let mut best_fallback: Option<(f64, usize)> = None;
    for dj in -1i64..=1 {
        for di in -1i64..=1 {
            if di == 0 && dj == 0 {
                continue;
            }
            let (ni, nj) = (ci as i64 + di, cj as i64 + dj);
            if ni < 1 || nj < 1 {
                continue;
            }
            let Some(bucket) = by_cell.get(&(ni as usize, nj as usize)) else {
                continue;
            };
            for &cand in bucket {
                if used[cand] {
                    continue;
                }
                let ang = angle_diff(directions[cand].theta, mean_theta);
                if ang > 2.0 * angle_tol {
                    continue;
                }
                let alignment = (directions[cand].position() - end_pos).normalized().dot(flow);
                if alignment <= 1e-9 {
                    continue;
                }
                if ang <= angle_tol {
                    if best_aligned.is_none_or(|(a, _)| alignment > a) {
                        best_aligned = Some((alignment, cand));
                    }
                } else if best_fallback.is_none_or(|(a, _)| ang < a) {
                    best_fallback = Some((ang, cand));
                }
            }
        }
    }
    best_aligned.or(best_fallback).map(|(_, idx)| idx)
}

/// Centripetal Catmull–Rom interpolation through the path nodes, emitting
/// `samples_per_segment` points per original segment. Original nodes are
/// retained exactly; `samples_per_segment = 1` reproduces the input.
pub fn smooth(path: &GlobalPath, samples_per_segment: usize) -> GlobalPath {
    let spp = samples_per_segment.max(1);
    // Merge coincident consecutive nodes; they would zero a knot interval.
    let mut nodes: Vec<Vec2> = Vec::with_capacity(path.nodes.len());
    for &p in &path.nodes {
        if nodes.last().is_none_or(|last: &Vec2| last.distance(p) > 1e-12) {
            nodes.push(p);
        }
    }
    if nodes.len() < 2 {
        return GlobalPath::new(path.nodes.clone(), path.support);
    }

    let n = nodes.len();
    let mut out = Vec::with_capacity((n - 1) * spp + 1);
    out.push(nodes[0]);
    for i in 0..n - 1 {
        // Control points with linear extrapolation at the ends.
        let p0 = if i == 0 { nodes[0] * 2.0 - nodes[1] } else { nodes[i - 1] };
        let p1 = nodes[i];
        let p2 = nodes[i + 1];
        let p3 = if i + 2 < n {
            nodes[i + 2]
        } else {
            nodes[n - 1] * 2.0 - nodes[n - 2]
        };
        for j in 1..=spp {
            if j == spp {
                out.push(p2);
            } else {
                out.push(catmull_rom(p0, p1, p2, p3, j as f64 / spp as f64));
            }
        }
    }
    GlobalPath::new(out, path.support)
}

/// Centripetal Catmull–Rom point at parameter u in [0, 1] between p1 and p2
/// (Barry–Goldman pyramid).
fn catmull_rom(p0: Vec2, p1: Vec2, p2: Vec2, p3: Vec2, u: f64) -> Vec2 {
    let knot = |a: Vec2, b: Vec2| a.distance(b).sqrt().max(1e-9);
    let t0 = 0.0;
    let t1 = t0 + knot(p0, p1);
    let t2 = t1 + knot(p1, p2);
    let t3 = t2 + knot(p2, p3);
    let t = t1 + u * (t2 - t1);

    let a1 = p0 * ((t1 - t) / (t1 - t0)) + p1 * ((t - t0) / (t1 - t0));
    let a2 = p1 * ((t2 - t) / (t2 - t1)) + p2 * ((t - t1) / (t2 - t1));
    let a3 = p2 * ((t3 - t) / (t3 - t2)) + p3 * ((t - t2) / (t3 - t2));
    let b1 = a1 * ((t2 - t) / (t2 - t0)) + a2 * ((t - t0) / (t2 - t0));
    let b2 = a2 * ((t3 - t) / (t3 - t1)) + a3 * ((t - t1) / (t3 - t1));
    b1 * ((t2 - t) / (t2 - t1)) + b2 * ((t - t1) / (t2 - t1))
}

/// Baseline for metric-sanity experiments: a start and goal drawn uniformly
/// on opposite image borders with three uniform interior waypoints, ordered
/// by progress along the start-goal axis.
pub fn random_border_path(width: f64, height: f64, rng: &mut ChaCha8Rng) -> GlobalPath {
    let (start, goal) = match rng.random_range(0..4u8) {
        0 => (
            Vec2::new(0.0, rng.random_range(0.0..height)),
            Vec2::new(width - 1.0, rng.random_range(0.0..height)),
        ),
        1 => (
            Vec2::new(width - 1.0, rng.random_range(0.0..height)),
            Vec2::new(0.0, rng.random_range(0.0..height)),
        ),
        2 => (
            Vec2::new(rng.random_range(0.0..width), 0.0),
            Vec2::new(rng.random_range(0.0..width), height - 1.0),
        ),
        _ => (
            Vec2::new(rng.random_range(0.0..width), height - 1.0),
            Vec2::new(rng.random_range(0.0..width), 0.0),
        ),
    };
    let mut interior: Vec<Vec2> = (0..3)
        .map(|_| {
            Vec2::new(
                rng.random_range(0.1 * width..0.9 * width),
                rng.random_range(0.1 * height..0.9 * height),
            )
        })
        .collect();
    let axis = (goal - start).normalized();
    interior.sort_by(|a, b| {
        (*a - start)
            .dot(axis)
            .partial_cmp(&(*b - start).dot(axis))
            .unwrap()
    });
    let mut nodes = vec![start];
    nodes.extend(interior);
    nodes.push(goal);
    GlobalPath::new(nodes, 0.0)
}

pub const PATHS_HEADER: &str = "path_id,node_index,x,y";
pub const AGENT_PATHS_HEADER: &str = "path_id,node_index,x,y,agent_id";

pub fn save_paths(paths: &[GlobalPath], path: &Path) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let write = |w: &mut BufWriter<fs::File>| -> std::io::Result<()> {
        writeln!(w, "{PATHS_HEADER}")?;
        for (pid, p) in paths.iter().enumerate() {
            for (ni, node) in p.nodes.iter().enumerate() {
                writeln!(w, "{pid},{ni},{:.16e},{:.16e}", node.x, node.y)?;
            }
        }
        Ok(())
    };
    write(&mut w).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn load_paths(path: &Path) -> Result<Vec<GlobalPath>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == PATHS_HEADER => {}
        _ => {
            return Err(Error::Parse {
                line: 1,
                message: format!("expected header `{PATHS_HEADER}`"),
            })
        }
    }
    let mut paths: Vec<GlobalPath> = Vec::new();
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
        let parse_err = |f: &str| Error::Parse {
            line: idx + 1,
            message: format!("bad field `{f}`"),
        };
        let pid: usize = fields[0].trim().parse().map_err(|_| parse_err(fields[0]))?;
        let ni: usize = fields[1].trim().parse().map_err(|_| parse_err(fields[1]))?;
        let x: f64 = fields[2].trim().parse().map_err(|_| parse_err(fields[2]))?;
        let y: f64 = fields[3].trim().parse().map_err(|_| parse_err(fields[3]))?;
        if pid == paths.len() && ni == 0 {
            paths.push(GlobalPath::new(Vec::new(), 0.0));
        }
        let current = paths.get_mut(pid).ok_or(Error::Parse {
            line: idx + 1,
            message: format!("path_id {pid} out of order"),
        })?;
        if current.nodes.len() != ni {
            return Err(Error::Parse {
                line: idx + 1,
                message: format!("node_index {ni} out of order"),
            });
        }
        current.nodes.push(Vec2::new(x, y));
    }
    Ok(paths)
}

/// Write per-agent diversified paths: the paths file schema with an added
/// `agent_id` column.
pub fn save_agent_paths(entries: &[(usize, usize, &GlobalPath)], path: &Path) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let write = |w: &mut BufWriter<fs::File>| -> std::io::Result<()> {
        writeln!(w, "{AGENT_PATHS_HEADER}")?;
        for &(pid, agent_id, p) in entries {
            for (ni, node) in p.nodes.iter().enumerate() {
                writeln!(w, "{pid},{ni},{:.16e},{:.16e},{agent_id}", node.x, node.y)?;
            }
        }
        Ok(())
    };
    write(&mut w).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

/// Debug overlay of paths as polylines with node ticks.
pub fn render_paths(paths: &[GlobalPath], width: usize, height: usize) -> GrayFrame {
    let mut img = GrayFrame::new(width, height);
    for (i, p) in paths.iter().enumerate() {
        let value = 255 - ((i * 37) % 120) as u8;
        for w in p.nodes.windows(2) {
            img.draw_line(w[0], w[1], value, 1.5);
        }
        for &n in &p.nodes {
            img.draw_disk(n, 2.0, value, value, 0.0);
        }
    }
    img
}
