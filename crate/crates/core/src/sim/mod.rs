//! Behavior-based multi-agent simulation: agents walk goal stacks built
//! from per-agent diversified paths while avoiding each other and static
//! obstacles through reciprocal velocity-obstacle constraints.

mod orca;

pub use orca::{
    closest_point_on_segment, neighbor_halfplane, obstacle_halfplane, solve_velocity, AgentBody,
    ConstraintSet, HalfPlane,
};

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{mix_seed, Vec2};
use crate::pathgen::{diversify, smooth, DiversifyParams, GlobalPath};
use crate::scene::{project_paths, Homography};

/// Waypoint stack; the top is the current navigation target and an empty
/// stack marks the agent as finished.
#[derive(Debug, Clone, PartialEq)]
pub struct GoalStack {
    /// Goals with the top at the end of the vector.
    goals: Vec<Vec2>,
    pub arrival_radius: f64,
}

impl GoalStack {
    /// Build from path nodes so the first node is on top and the path's
    /// final node is at the bottom.
    pub fn from_path(nodes: &[Vec2], arrival_radius: f64) -> Self {
        GoalStack {
            goals: nodes.iter().rev().copied().collect(),
            arrival_radius,
        }
    }

    pub fn top(&self) -> Option<Vec2> {
        self.goals.last().copied()
    }

    pub fn bottom(&self) -> Option<Vec2> {
        self.goals.first().copied()
    }

    pub fn depth(&self) -> usize {
        self.goals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.goals.is_empty()
    }

    /// Pop goals the agent has arrived at.
    pub fn update(&mut self, position: Vec2) {
        while let Some(top) = self.top() {
            if position.distance(top) <= self.arrival_radius {
                self.goals.pop();
            } else {
                break;
            }
        }
    }
}

/// Arrival-radius policy for popping goals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GoalMode {
    /// Arrival radius 0.5 x agent radius: the agent must nearly touch the
    /// goal before advancing.
    Tight,
    /// Arrival radius 4 x agent radius.
    Loose,
}

impl GoalMode {
    pub fn arrival_radius(self, agent_radius: f64) -> f64 {
        match self {
            GoalMode::Tight => 0.5 * agent_radius,
            GoalMode::Loose => 4.0 * agent_radius,
        }
    }
}

/// One simulated agent. Positions and velocities are world meters.
#[derive(Debug, Clone, PartialEq)]
pub struct Agent {
    pub id: u64,
    pub position: Vec2,
    pub velocity: Vec2,
    pub radius: f64,
    pub pref_speed: f64,
    pub max_speed: f64,
    pub goal_stack: GoalStack,
    pub path_id: usize,
    pub agent_seed: u64,
    /// Simulation time at which the agent becomes active.
    pub entry_time: f64,
}

impl Agent {
    fn body(&self) -> AgentBody {
        AgentBody {
            position: self.position,
            velocity: self.velocity,
            radius: self.radius,
        }
    }
}

/// Static polygonal obstacle, counterclockwise and simple.
#[derive(Debug, Clone, PartialEq)]
pub struct Obstacle {
    vertices: Vec<Vec2>,
}

impl Obstacle {
    pub fn new(vertices: Vec<Vec2>) -> Result<Self> {
        if vertices.len() < 3 {
            return Err(Error::invalid("obstacle needs at least 3 vertices"));
        }
        let area2: f64 = vertices
            .iter()
            .zip(vertices.iter().cycle().skip(1))
            .map(|(a, b)| a.cross(*b))
            .sum();
        if area2 <= 0.0 {
            return Err(Error::invalid("obstacle vertices must be counterclockwise"));
        }
        let n = vertices.len();
        for i in 0..n {
            for j in i + 1..n {
                // Skip adjacent edges (they share a vertex).
                if j == i || (j + 1) % n == i || (i + 1) % n == j {
                    continue;
                }
                if segments_cross(
                    vertices[i],
                    vertices[(i + 1) % n],
                    vertices[j],
                    vertices[(j + 1) % n],
                ) {
                    return Err(Error::invalid(format!(
                        "obstacle is self-intersecting (edges {i} and {j})"
                    )));
                }
            }
        }
        Ok(Obstacle { vertices })
    }

    pub fn vertices(&self) -> &[Vec2] {
        &self.vertices
    }

    pub fn edges(&self) -> impl Iterator<Item = (Vec2, Vec2)> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }
}

fn segments_cross(a: Vec2, b: Vec2, c: Vec2, d: Vec2) -> bool {
    let ab = b - a;
    let cd = d - c;
    let d1 = ab.cross(c - a);
    let d2 = ab.cross(d - a);
    let d3 = cd.cross(a - c);
    let d4 = cd.cross(b - c);
    (d1 * d2 < 0.0) && (d3 * d4 < 0.0)
}

/// Simulation parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimParams {
    pub dt: f64,
    pub time_horizon: f64,
    pub obstacle_time_horizon: f64,
    pub neighbor_dist: f64,
    pub max_neighbors: usize,
    pub population: usize,
    pub goal_mode: GoalMode,
    pub respawn: bool,
    pub seed: u64,
    pub radius: f64,
    pub pref_speed: f64,
    pub max_speed: f64,
    /// Entry times are staggered uniformly over this window (seconds) to
    /// avoid a start-line artifact.
    pub spawn_window: f64,
}

impl Default for SimParams {
    fn default() -> Self {
        SimParams {
            dt: 0.1,
            time_horizon: 2.0,
            obstacle_time_horizon: 1.0,
            neighbor_dist: 10.0,
            max_neighbors: 10,
            population: 15,
            goal_mode: GoalMode::Loose,
            respawn: true,
            seed: 1,
            radius: 0.3,
            pref_speed: 1.4,
            max_speed: 2.0,
            spawn_window: 0.0,
        }
    }
}

impl SimParams {
    pub fn validate(&self) -> Result<()> {
        if self.dt <= 0.0 {
            return Err(Error::invalid("dt must be positive"));
        }
        if self.time_horizon <= 0.0 || self.obstacle_time_horizon <= 0.0 {
            return Err(Error::invalid("time horizons must be positive"));
        }
        if self.population == 0 {
            return Err(Error::invalid("population must be >= 1"));
        }
        if self.radius <= 0.0 {
            return Err(Error::invalid("agent radius must be positive"));
        }
        if !(self.pref_speed > 0.0 && self.pref_speed <= self.max_speed) {
            return Err(Error::invalid("need 0 < pref_speed <= max_speed"));
        }
        Ok(())
    }
}

/// Source of per-agent world-space paths. Each request diversifies and
/// smooths one of the image-space source paths (round-robin) and projects
/// it onto the ground plane; the variation seed derives from the spawn
/// index so respawned agents get fresh variants deterministically.
#[derive(Debug, Clone)]
pub struct PathPool {
    paths: Vec<GlobalPath>,
    diversify: Option<DiversifyParams>,
    samples_per_segment: usize,
    homography: Homography,
    base_seed: u64,
}

impl PathPool {
    pub fn new(
        paths: Vec<GlobalPath>,
        diversify: Option<DiversifyParams>,
        samples_per_segment: usize,
        homography: Homography,
        base_seed: u64,
    ) -> Result<Self> {
        if paths.is_empty() {
            return Err(Error::invalid("path pool needs at least one source path"));
        }
        if let Some(p) = paths.iter().position(|p| p.len() < 2) {
            return Err(Error::invalid(format!("source path {p} has fewer than 2 nodes")));
        }
        Ok(PathPool {
            paths,
            diversify,
            samples_per_segment: samples_per_segment.max(1),
            homography,
            base_seed,
        })
    }

    pub fn source_count(&self) -> usize {
        self.paths.len()
    }

    /// The diversified and smoothed image-space variant for a spawn index,
    /// with the source path id.
    pub fn image_variant(&self, spawn_index: u64) -> (usize, u64, GlobalPath) {
        let path_id = (spawn_index as usize) % self.paths.len();
        let agent_seed = mix_seed(self.base_seed, spawn_index);
        let variant = match &self.diversify {
            Some(dp) => diversify(&self.paths[path_id], &DiversifyParams { seed: agent_seed, ..*dp }),
            None => self.paths[path_id].clone(),
        };
        (path_id, agent_seed, smooth(&variant, self.samples_per_segment))
    }

    /// World-space node list for the given spawn index, with the source
    /// path id and the per-agent seed used for its variation.
    pub fn world_path(&self, spawn_index: u64) -> Result<(usize, u64, Vec<Vec2>)> {
        let (path_id, agent_seed, smoothed) = self.image_variant(spawn_index);
        let world = project_paths(std::slice::from_ref(&smoothed), &self.homography)?;
        Ok((path_id, agent_seed, world.into_iter().next().unwrap().nodes))
    }
}

/// Full simulation state, advanced step by step.
#[derive(Debug, Clone)]
pub struct SimState {
    pub time: f64,
    pub step_index: u64,
    pub agents: Vec<Agent>,
    pub obstacles: Vec<Obstacle>,
    pub params: SimParams,
    pool: PathPool,
    spawn_counter: u64,
    next_agent_id: u64,
}

/// Preferred velocity: straight toward the top of the goal stack at
/// `pref_speed`, scaled down to land exactly on the goal when it is less
/// than one step away.
///
/// The goal stack must be non-empty; an agent with an empty stack must have
/// been despawned by the caller.
pub fn pref_velocity(agent: &Agent, dt: f64) -> Vec2 {
    let goal = agent
        .goal_stack
        .top()
        .expect("pref_velocity called with an empty goal stack");
    let offset = goal - agent.position;
    let dist = offset.length();
    if dist <= f64::EPSILON {
        return Vec2::ZERO;
    }
    let speed = agent.pref_speed.min(dist / dt);
    offset * (speed / dist)
}

/// Build the ORCA constraint set for one agent: obstacle-edge constraints
/// first (they stay hard under the infeasibility fallback), then one
/// constraint per neighbor, nearest first, capped at `max_neighbors`.
pub fn orca_halfplanes(
    agent: &Agent,
    neighbors: &[&Agent],
    obstacles: &[Obstacle],
    params: &SimParams,
) -> ConstraintSet {
    let body = agent.body();
    let mut lines = Vec::new();

    for obstacle in obstacles {
        for (a, b) in obstacle.edges() {
            let closest = closest_point_on_segment(a, b, body.position);
            if closest.distance(body.position) <= params.neighbor_dist {
                lines.push(obstacle_halfplane(
                    &body,
                    a,
                    b,
                    params.obstacle_time_horizon,
                    params.dt,
                ));
            }
        }
    }
    let obstacle_count = lines.len();

    let mut ranked: Vec<&Agent> = neighbors
        .iter()
        .copied()
        .filter(|n| n.id != agent.id)
        .filter(|n| n.position.distance(body.position) < params.neighbor_dist)
        .collect();
    ranked.sort_by(|a, b| {
        let da = a.position.distance(body.position);
        let db = b.position.distance(body.position);
        da.partial_cmp(&db).unwrap().then(a.id.cmp(&b.id))
    });
    ranked.truncate(params.max_neighbors);

    for neighbor in ranked {
        lines.push(neighbor_halfplane(
            &body,
            &neighbor.body(),
            params.time_horizon,
            params.dt,
        ));
    }

    ConstraintSet {
        lines,
        obstacle_count,
    }
}

/// Create the initial state: `population` agents, each on its own variant
/// of a source path, goal stacks with the first node on top, and entry
/// times staggered uniformly over `spawn_window`.
pub fn spawn_from_paths(pool: PathPool, obstacles: Vec<Obstacle>, params: SimParams) -> Result<SimState> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let arrival = params.goal_mode.arrival_radius(params.radius);

    let mut agents = Vec::with_capacity(params.population);
    for spawn_index in 0..params.population as u64 {
        let (path_id, agent_seed, nodes) = pool.world_path(spawn_index)?;
        let entry_time = if params.spawn_window > 0.0 {
            rng.random_range(0.0..params.spawn_window)
        } else {
            0.0
        };
        agents.push(Agent {
            id: spawn_index,
            position: nodes[0],
            velocity: Vec2::ZERO,
            radius: params.radius,
            pref_speed: params.pref_speed,
            max_speed: params.max_speed,
            goal_stack: GoalStack::from_path(&nodes, arrival),
            path_id,
            agent_seed,
            entry_time,
        });
    }

    let population = params.population as u64;
    Ok(SimState {
        time: 0.0,
        step_index: 0,
        agents,
        obstacles,
        params,
        pool,
        spawn_counter: population,
        next_agent_id: population,
    })
}

impl SimState {
    /// Agents that have entered the simulation.
    pub fn active_agents(&self) -> impl Iterator<Item = &Agent> {
        self.agents.iter().filter(move |a| a.entry_time <= self.time)
    }

    /// Advance one time step: solve every active agent's velocity against a
    /// snapshot of the current state, integrate positions, pop reached
    /// goals, despawn finished agents, and respawn replacements when
    /// configured.
    pub fn step(&mut self) -> Result<()> {
        let dt = self.params.dt;
        let active: Vec<usize> = (0..self.agents.len())
            .filter(|&i| self.agents[i].entry_time <= self.time)
            .collect();

        let snapshot: Vec<Agent> = active.iter().map(|&i| self.agents[i].clone()).collect();
        let snapshot_refs: Vec<&Agent> = snapshot.iter().collect();

        let velocities: Vec<Vec2> = snapshot
            .par_iter()
            .map(|agent| {
                let constraints = orca_halfplanes(agent, &snapshot_refs, &self.obstacles, &self.params);
                let pref = pref_velocity(agent, dt);
                solve_velocity(&constraints, pref, agent.max_speed)
            })
            .collect();

        for (&idx, &v) in active.iter().zip(&velocities) {
            let agent = &mut self.agents[idx];
            agent.velocity = v;
            agent.position += v * dt;
            agent.goal_stack.update(agent.position);
        }

        self.time += dt;
        self.step_index += 1;

        // Despawn finished agents; respawn replacements on fresh variants.
        let mut respawn_count = 0;
        self.agents.retain(|a| {
            if a.goal_stack.is_empty() {
                respawn_count += 1;
                false
            } else {
                true
            }
        });
        if self.params.respawn {
            let arrival = self.params.goal_mode.arrival_radius(self.params.radius);
            for _ in 0..respawn_count {
                let (path_id, agent_seed, nodes) = self.pool.world_path(self.spawn_counter)?;
                self.spawn_counter += 1;
                self.agents.push(Agent {
                    id: self.next_agent_id,
                    position: nodes[0],
                    velocity: Vec2::ZERO,
                    radius: self.params.radius,
                    pref_speed: self.params.pref_speed,
                    max_speed: self.params.max_speed,
                    goal_stack: GoalStack::from_path(&nodes, arrival),
                    path_id,
                    agent_seed,
                    entry_time: self.time,
                });
                self.next_agent_id += 1;
            }
        }
        Ok(())
    }
}

/// One recorded agent state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryPoint {
    pub step: u64,
    pub agent_id: u64,
    pub pos: Vec2,
    pub vel: Vec2,
}

/// Recorded simulation output: one row per active agent per step, ordered
/// by (step, agent id).
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectories {
    pub dt: f64,
    pub points: Vec<TrajectoryPoint>,
}

impl Trajectories {
    pub fn duration(&self) -> f64 {
        self.points.iter().map(|p| p.step).max().unwrap_or(0) as f64 * self.dt
    }
}

/// Run the simulation for `duration` seconds, recording every step
/// (including the initial state as step 0).
pub fn run_simulation(state: &mut SimState, duration: f64) -> Result<Trajectories> {
    let steps = (duration / state.params.dt).ceil() as u64;
    let mut points = Vec::new();
    let record = |state: &SimState, points: &mut Vec<TrajectoryPoint>| {
        let mut batch: Vec<TrajectoryPoint> = state
            .active_agents()
            .map(|a| TrajectoryPoint {
                step: state.step_index,
                agent_id: a.id,
                pos: a.position,
                vel: a.velocity,
            })
            .collect();
        batch.sort_by_key(|p| p.agent_id);
        points.extend(batch);
    };
    record(state, &mut points);
    for _ in 0..steps {
        state.step()?;
        record(state, &mut points);
    }
    Ok(Trajectories {
        dt: state.params.dt,
        points,
    })
}

pub const TRAJECTORY_HEADER: &str = "step,agent_id,x,y,vx,vy";

pub fn save_trajectories(traj: &Trajectories, path: &Path) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let write = |w: &mut BufWriter<fs::File>| -> std::io::Result<()> {
        writeln!(w, "{TRAJECTORY_HEADER}")?;
        for p in &traj.points {
            writeln!(
                w,
                "{},{},{:.16e},{:.16e},{:.16e},{:.16e}",
                p.step, p.agent_id, p.pos.x, p.pos.y, p.vel.x, p.vel.y
            )?;
        }
        Ok(())
    };
    write(&mut w).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn load_trajectories(path: &Path, dt: f64) -> Result<Trajectories> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == TRAJECTORY_HEADER => {}
        _ => {
            return Err(Error::Parse {
                line: 1,
                message: format!("expected header `{TRAJECTORY_HEADER}`"),
            })
        }
    }
    let mut points = Vec::new();
    for (idx, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 6 {
            return Err(Error::Parse {
                line: idx + 1,
                message: format!("expected 6 fields, found {}", fields.len()),
            });
        }
        let bad = |f: &str| Error::Parse {
            line: idx + 1,
            message: format!("bad field `{f}`"),
        };
        points.push(TrajectoryPoint {
            step: fields[0].trim().parse().map_err(|_| bad(fields[0]))?,
            agent_id: fields[1].trim().parse().map_err(|_| bad(fields[1]))?,
            pos: Vec2::new(
                fields[2].trim().parse().map_err(|_| bad(fields[2]))?,
                fields[3].trim().parse().map_err(|_| bad(fields[3]))?,
            ),
            vel: Vec2::new(
                fields[4].trim().parse().map_err(|_| bad(fields[4]))?,
                fields[5].trim().parse().map_err(|_| bad(fields[5]))?,
            ),
        });
    }
    Ok(Trajectories { dt, points })
}
