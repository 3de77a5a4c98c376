//! Pipeline configuration: one TOML file driving every stage, with
//! `key.path=value` overrides. Unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::FlowParams;
use crate::pathgen::{DiversifyMethod, DiversifyParams};
use crate::scene::Homography;
use crate::score::EmptyWindowPolicy;
use crate::sim::{GoalMode, Obstacle, SimParams};
use crate::spectral::ClusterParams;
use crate::Vec2;

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub input: InputConfig,
    #[serde(default)]
    pub flow: FlowConfig,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub prune: PruneConfig,
    #[serde(default)]
    pub clustering: ClusteringConfig,
    #[serde(default)]
    pub pathgen: PathgenConfig,
    #[serde(default)]
    pub diversify: DiversifyConfig,
    #[serde(default)]
    pub sim: SimConfig,
    #[serde(default)]
    pub scene: SceneConfig,
    #[serde(default)]
    pub render: RenderConfig,
    #[serde(default)]
    pub score: ScoreConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputConfig {
    /// Directory of exemplar frames (PNG or PGM, lexicographic order).
    pub frames: PathBuf,
    pub fps: f64,
}

impl Default for InputConfig {
    fn default() -> Self {
        InputConfig {
            frames: PathBuf::from("frames"),
            fps: 25.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FlowConfig {
    pub max_corners: usize,
    pub quality: f64,
    pub min_distance: f64,
    pub window: usize,
    pub pyramid_levels: usize,
    pub max_iterations: usize,
    pub epsilon: f64,
    pub min_eigen: f64,
    pub max_residual: f64,
    pub min_magnitude: f64,
    pub stride: usize,
}

impl Default for FlowConfig {
    fn default() -> Self {
        let p = FlowParams::default();
        FlowConfig {
            max_corners: p.max_corners,
            quality: p.quality,
            min_distance: p.min_distance,
            window: p.window,
            pyramid_levels: p.pyramid_levels,
            max_iterations: p.max_iterations,
            epsilon: p.epsilon,
            min_eigen: p.min_eigen,
            max_residual: p.max_residual,
            min_magnitude: p.min_magnitude,
            stride: p.stride,
        }
    }
}

impl FlowConfig {
    pub fn to_params(&self) -> FlowParams {
        FlowParams {
            max_corners: self.max_corners,
            quality: self.quality,
            min_distance: self.min_distance,
            window: self.window,
            pyramid_levels: self.pyramid_levels,
            max_iterations: self.max_iterations,
            epsilon: self.epsilon,
            min_eigen: self.min_eigen,
            max_residual: self.max_residual,
            min_magnitude: self.min_magnitude,
            stride: self.stride,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub cells_x: usize,
    pub cells_y: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            cells_x: 40,
            cells_y: 40,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PruneConfig {
    /// Minimum member count per (cell, bin); with `per_frame` set this is a
    /// rate multiplied by the number of processed frame pairs instead.
    pub min_support: f64,
    pub per_frame: bool,
}

impl Default for PruneConfig {
    fn default() -> Self {
        PruneConfig {
            min_support: 10.0,
            per_frame: false,
        }
    }
}

impl PruneConfig {
    pub fn effective_support(&self, frame_pairs: usize) -> usize {
        if self.per_frame {
            (self.min_support * frame_pairs as f64).ceil() as usize
        } else {
            self.min_support.ceil() as usize
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClusteringConfig {
    pub k_nn: usize,
    pub k_max: usize,
    pub min_cluster_size: usize,
    pub restarts: usize,
    pub seed: u64,
}

impl Default for ClusteringConfig {
    fn default() -> Self {
        let p = ClusterParams::default();
        ClusteringConfig {
            k_nn: p.k_nn,
            k_max: p.k_max,
            min_cluster_size: p.min_cluster_size,
            restarts: p.restarts,
            seed: p.seed,
        }
    }
}

impl ClusteringConfig {
    pub fn to_params(&self) -> ClusterParams {
        ClusterParams {
            k_nn: self.k_nn,
            k_max: self.k_max,
            min_cluster_size: self.min_cluster_size,
            restarts: self.restarts,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PathgenConfig {
    /// Orientation tolerance for joining a chain, radians.
    pub angle_tol: f64,
    /// Interpolated subgoals per path segment after smoothing.
    pub samples_per_segment: usize,
}

impl Default for PathgenConfig {
    fn default() -> Self {
        PathgenConfig {
            angle_tol: std::f64::consts::FRAC_PI_8,
            samples_per_segment: 4,
        }
    }
}

/// Diversification method, with `none` for the undiversified scenarios.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodConfig {
    None,
    Square,
    Triangle,
    #[default]
    Circle,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiversifyConfig {
    pub method: MethodConfig,
    /// Pixels: square half-width, triangle base, or circle max radius.
    pub size: f64,
    /// Pixels; defaults to size / 4 when unset.
    pub radius_coupling: Option<f64>,
}

impl Default for DiversifyConfig {
    fn default() -> Self {
        DiversifyConfig {
            method: MethodConfig::Circle,
            size: 10.0,
            radius_coupling: None,
        }
    }
}

impl DiversifyConfig {
    /// Per-agent seeds are filled in at spawn time; the seed here is a
    /// placeholder.
    pub fn to_params(&self) -> Option<DiversifyParams> {
        let method = match self.method {
            MethodConfig::None => return None,
            MethodConfig::Square => DiversifyMethod::Square,
            MethodConfig::Triangle => DiversifyMethod::Triangle,
            MethodConfig::Circle => DiversifyMethod::Circle,
        };
        Some(DiversifyParams {
            method,
            size: self.size,
            seed: 0,
            radius_coupling: self.radius_coupling.unwrap_or(self.size / 4.0),
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
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
    pub spawn_window: f64,
    /// Simulated seconds.
    pub duration: f64,
    /// Paths file to simulate along; defaults to `<output.dir>/paths.csv`
    /// (the analyze stage's output).
    pub paths: Option<PathBuf>,
    /// World-space obstacle polygons, counterclockwise vertex lists.
    pub obstacles: Vec<Vec<[f64; 2]>>,
}

impl Default for SimConfig {
    fn default() -> Self {
        let p = SimParams::default();
        SimConfig {
            dt: p.dt,
            time_horizon: p.time_horizon,
            obstacle_time_horizon: p.obstacle_time_horizon,
            neighbor_dist: p.neighbor_dist,
            max_neighbors: p.max_neighbors,
            population: p.population,
            goal_mode: p.goal_mode,
            respawn: p.respawn,
            seed: p.seed,
            radius: p.radius,
            pref_speed: p.pref_speed,
            max_speed: p.max_speed,
            spawn_window: 5.0,
            duration: 60.0,
            paths: None,
            obstacles: Vec::new(),
        }
    }
}

impl SimConfig {
    pub fn to_params(&self) -> SimParams {
        SimParams {
            dt: self.dt,
            time_horizon: self.time_horizon,
            obstacle_time_horizon: self.obstacle_time_horizon,
            neighbor_dist: self.neighbor_dist,
            max_neighbors: self.max_neighbors,
            population: self.population,
            goal_mode: self.goal_mode,
            respawn: self.respawn,
            seed: self.seed,
            radius: self.radius,
            pref_speed: self.pref_speed,
            max_speed: self.max_speed,
            spawn_window: self.spawn_window,
        }
    }

    pub fn obstacles(&self) -> Result<Vec<Obstacle>> {
        self.obstacles
            .iter()
            .map(|poly| Obstacle::new(poly.iter().map(|&[x, y]| Vec2::new(x, y)).collect()))
            .collect()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SceneConfig {
    /// Used when `homography` is absent: world = meters_per_pixel * pixel.
    pub meters_per_pixel: f64,
    /// Full image-to-world homography, 9 values row-major.
    pub homography: Option<[f64; 9]>,
}

impl Default for SceneConfig {
    fn default() -> Self {
        SceneConfig {
            meters_per_pixel: 0.05,
            homography: None,
        }
    }
}

impl SceneConfig {
    pub fn homography(&self) -> Result<Homography> {
        match &self.homography {
            Some(values) => Homography::from_row_major(values),
            None => Homography::scaled_identity(self.meters_per_pixel),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RenderConfig {
    /// Default to the exemplar's dimensions and framerate.
    pub width: Option<usize>,
    pub height: Option<usize>,
    pub fps: Option<f64>,
    pub background: u8,
    pub agent_color: u8,
    pub rim_color: u8,
    pub agent_draw_radius: f64,
    pub rgb: bool,
}

impl Default for RenderConfig {
    fn default() -> Self {
        RenderConfig {
            width: None,
            height: None,
            fps: None,
            background: 0,
            agent_color: 160,
            rim_color: 255,
            agent_draw_radius: 5.0,
            rgb: false,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScoreConfig {
    pub window: usize,
    pub stride: usize,
    pub empty_window_policy: EmptyWindowPolicy,
}

impl Default for ScoreConfig {
    fn default() -> Self {
        ScoreConfig {
            window: 60,
            stride: 30,
            empty_window_policy: EmptyWindowPolicy::Penalize,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: PathBuf::from("out"),
        }
    }
}

impl PipelineConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: PipelineConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    /// Parse, apply `key.path=value` overrides, then deserialize.
    pub fn load_with_overrides(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut value: toml::Value =
            toml::from_str(&text).map_err(|e| Error::Config(e.to_string()))?;
        for entry in overrides {
            apply_override(&mut value, entry)?;
        }
        let config: PipelineConfig = value
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.input.fps <= 0.0 {
            return Err(Error::Config("input.fps must be positive".into()));
        }
        if self.grid.cells_x == 0 || self.grid.cells_y == 0 {
            return Err(Error::Config("grid must be at least 1x1".into()));
        }
        if self.flow.window < 3 || self.flow.window.is_multiple_of(2) {
            return Err(Error::Config("flow.window must be odd and >= 3".into()));
        }
        if !(self.flow.quality > 0.0 && self.flow.quality <= 1.0) {
            return Err(Error::Config("flow.quality must lie in (0, 1]".into()));
        }
        if self.diversify.method != MethodConfig::None && self.diversify.size <= 0.0 {
            return Err(Error::Config("diversify.size must be positive".into()));
        }
        if self.score.stride == 0 || self.score.window < self.score.stride {
            return Err(Error::Config("need score.window >= score.stride >= 1".into()));
        }
        if self.sim.duration <= 0.0 {
            return Err(Error::Config("sim.duration must be positive".into()));
        }
        self.sim.to_params().validate().map_err(|e| Error::Config(e.to_string()))?;
        self.sim.obstacles()?;
        self.scene.homography()?;
        Ok(())
    }
}

/// Apply one `dotted.key=value` override to a TOML tree. The value text is
/// parsed as TOML, falling back to a string literal.
fn apply_override(root: &mut toml::Value, entry: &str) -> Result<()> {
    let (key_path, raw_value) = entry
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override `{entry}` is not key=value")))?;
    let parsed: toml::Value = toml::from_str(&format!("v = {raw_value}"))
        .map(|t: toml::Value| t["v"].clone())
        .unwrap_or_else(|_| toml::Value::String(raw_value.to_string()));

    let keys: Vec<&str> = key_path.trim().split('.').collect();
    if keys.is_empty() || keys.iter().any(|k| k.is_empty()) {
        return Err(Error::Config(format!("override key `{key_path}` is malformed")));
    }
    let mut node = root;
    for key in &keys[..keys.len() - 1] {
        node = node
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("override key `{key_path}` crosses a non-table")))?
            .entry(key.to_string())
            .or_insert(toml::Value::Table(Default::default()));
    }
    node.as_table_mut()
        .ok_or_else(|| Error::Config(format!("override key `{key_path}` crosses a non-table")))?
        .insert(keys[keys.len() - 1].to_string(), parsed);
    Ok(())
}
