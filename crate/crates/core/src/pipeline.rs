//! Stage orchestration: analyze, synthesize, render, score, and the full
//! pipeline with a hashed artifact manifest.

use std::fs;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::config::{MethodConfig, PipelineConfig};
use crate::error::{Error, Result};
use crate::flow::{extract_sequence, save_vectors, MotionVector};
use crate::frame::FrameSequence;
use crate::grid::{bin_vectors, prune, render_dominant_bins, GridSpec};
use crate::pathgen::{
    grow_paths, load_paths, random_border_path, render_paths, save_agent_paths, save_paths,
    GlobalPath,
};
use crate::scene::{render, RenderSpec};
use crate::score::{build_hom, render_hom, save_score_csv, save_score_text, score_fields, ScoreReport};
use crate::sim::{
    load_trajectories, run_simulation, save_trajectories, spawn_from_paths, PathPool, Trajectories,
};
use crate::spectral::{dominant_directions, render_directions, save_directions};

fn stage_err(stage: &'static str) -> impl Fn(Error) -> Error + Copy {
    move |e| match e {
        Error::Stage { .. } => e,
        other => Error::stage(stage, other.to_string()),
    }
}

/// Artifact paths produced by the analyze stage.
#[derive(Debug, Clone)]
pub struct AnalyzeOutputs {
    pub vectors: PathBuf,
    pub directions: PathBuf,
    pub paths: PathBuf,
}

/// Extract motion vectors, cluster dominant directions, and grow global
/// paths, writing the three CSVs plus debug overlays under the output dir.
pub fn run_analyze(config: &PipelineConfig) -> Result<AnalyzeOutputs> {
    run_analyze_on(config, &config.input.frames, &config.output.dir)
}

/// Analyze one frame directory into a given output directory. Split out so
/// the scoring stage and temporal chunking can reuse it.
pub fn run_analyze_on(
    config: &PipelineConfig,
    frames_dir: &Path,
    out_dir: &Path,
) -> Result<AnalyzeOutputs> {
    let err = stage_err("analyze");
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let debug_dir = out_dir.join("debug");
    fs::create_dir_all(&debug_dir).map_err(|e| Error::io(&debug_dir, e))?;

    let seq = FrameSequence::load_dir(frames_dir, config.input.fps).map_err(err)?;
    if seq.len() < 2 {
        return Err(Error::stage(
            "analyze",
            format!("need at least 2 frames in {}", frames_dir.display()),
        ));
    }
    let flow_params = config.flow.to_params();
    let vectors = extract_sequence(&seq, &flow_params).map_err(err)?;

    let vectors_path = out_dir.join("vectors.csv");
    save_vectors(&vectors, &vectors_path)?;

    let grid = GridSpec::new(
        config.grid.cells_x,
        config.grid.cells_y,
        seq.width() as f64,
        seq.height() as f64,
    )
    .map_err(err)?;
    let field = bin_vectors(&vectors, grid).map_err(err)?;
    let frame_pairs = (seq.len() - 1) / flow_params.stride.max(1);
    let pruned = prune(&field, config.prune.effective_support(frame_pairs));
    render_dominant_bins(&pruned).save_png(&debug_dir.join("cells.png"))?;

    let directions = dominant_directions(&pruned, &config.clustering.to_params()).map_err(err)?;
    let directions_path = out_dir.join("directions.csv");
    save_directions(&directions, &directions_path)?;
    render_directions(&directions, seq.width(), seq.height())
        .save_png(&debug_dir.join("directions.png"))?;

    let paths = grow_paths(&directions, &grid, config.pathgen.angle_tol).map_err(err)?;
    let paths_path = out_dir.join("paths.csv");
    save_paths(&paths, &paths_path)?;
    render_paths(&paths, seq.width(), seq.height()).save_png(&debug_dir.join("paths.png"))?;

    Ok(AnalyzeOutputs {
        vectors: vectors_path,
        directions: directions_path,
        paths: paths_path,
    })
}

/// Analyze in temporal chunks of `chunk_size` frames, writing per-chunk
/// outputs under `chunk_NNN/` and combining every chunk's global paths into
/// the top-level paths file.
pub fn run_analyze_chunked(config: &PipelineConfig, chunk_size: usize) -> Result<AnalyzeOutputs> {
    if chunk_size < 2 {
        return Err(Error::stage("analyze", "chunk size must be at least 2 frames"));
    }
    let out_dir = &config.output.dir;
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let seq = FrameSequence::load_dir(&config.input.frames, config.input.fps)
        .map_err(stage_err("analyze"))?;

    let mut combined = Vec::new();
    let mut chunk_index = 0usize;
    let mut start = 0usize;
    while start + 1 < seq.len() {
        let end = (start + chunk_size).min(seq.len());
        let chunk_dir = out_dir.join(format!("chunk_{chunk_index:03}"));
        fs::create_dir_all(&chunk_dir).map_err(|e| Error::io(&chunk_dir, e))?;
        let frames_dir = chunk_dir.join("frames");
        FrameSequence::new(seq.frames[start..end].to_vec(), seq.fps)?
            .save_dir(&frames_dir, false)?;
        let outputs = run_analyze_on(config, &frames_dir, &chunk_dir)?;
        combined.extend(load_paths(&outputs.paths)?);
        chunk_index += 1;
        start = end;
    }

    let paths_path = out_dir.join("paths.csv");
    save_paths(&combined, &paths_path)?;
    Ok(AnalyzeOutputs {
        vectors: out_dir.join("chunk_000").join("vectors.csv"),
        directions: out_dir.join("chunk_000").join("directions.csv"),
        paths: paths_path,
    })
}

/// Simulate the configured crowd over the paths file; writes the trajectory
/// CSV and the per-agent diversified path file.
pub fn run_synthesize(config: &PipelineConfig, paths_file: &Path) -> Result<PathBuf> {
    let err = stage_err("synthesize");
    let out_dir = &config.output.dir;
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;

    let paths = load_paths(paths_file).map_err(err)?;
    if paths.is_empty() {
        return Err(Error::stage(
            "synthesize",
            format!("no paths in {}", paths_file.display()),
        ));
    }
    let pool = PathPool::new(
        paths,
        config.diversify.to_params(),
        config.pathgen.samples_per_segment,
        config.scene.homography()?,
        config.sim.seed,
    )
    .map_err(err)?;

    // Record the initial population's diversified image-space variants.
    let variants: Vec<(usize, u64, GlobalPath)> = (0..config.sim.population as u64)
        .map(|i| {
            let (path_id, _, variant) = pool.image_variant(i);
            (path_id, i, variant)
        })
        .collect();
    let entries: Vec<(usize, usize, &GlobalPath)> = variants
        .iter()
        .map(|(pid, agent, p)| (*pid, *agent as usize, p))
        .collect();
    save_agent_paths(&entries, &out_dir.join("agent_paths.csv"))?;

    let mut state = spawn_from_paths(pool, config.sim.obstacles()?, config.sim.to_params()).map_err(err)?;
    let trajectories = run_simulation(&mut state, config.sim.duration).map_err(err)?;
    let traj_path = out_dir.join("trajectories.csv");
    save_trajectories(&trajectories, &traj_path)?;
    Ok(traj_path)
}

/// Resolve the render spec: dimensions and framerate default to the
/// exemplar's.
fn resolve_render_spec(config: &PipelineConfig) -> Result<RenderSpec> {
    let (width, height) = match (config.render.width, config.render.height) {
        (Some(w), Some(h)) => (w, h),
        _ => {
            let seq = FrameSequence::load_dir(&config.input.frames, config.input.fps)
                .map_err(stage_err("render"))?;
            (
                config.render.width.unwrap_or(seq.width()),
                config.render.height.unwrap_or(seq.height()),
            )
        }
    };
    Ok(RenderSpec {
        width,
        height,
        fps: config.render.fps.unwrap_or(config.input.fps),
        background: config.render.background,
        agent_color: config.render.agent_color,
        rim_color: config.render.rim_color,
        agent_draw_radius: config.render.agent_draw_radius,
        rgb: config.render.rgb,
    })
}

/// Render a trajectory file into a frame directory under the output dir.
pub fn run_render(config: &PipelineConfig, trajectories_file: &Path) -> Result<PathBuf> {
    let err = stage_err("render");
    let trajectories = load_trajectories(trajectories_file, config.sim.dt).map_err(err)?;
    render_trajectories(config, &trajectories)
}

fn render_trajectories(config: &PipelineConfig, trajectories: &Trajectories) -> Result<PathBuf> {
    let err = stage_err("render");
    let spec = resolve_render_spec(config)?;
    let seq = render(trajectories, &config.scene.homography()?, &spec).map_err(err)?;
    let frames_dir = config.output.dir.join("render");
    seq.save_dir(&frames_dir, spec.rgb)?;
    Ok(frames_dir)
}

/// Compare two frame directories: identical flow extraction on both, then
/// histogram-of-motion fields and the mean Bhattacharyya score. Writes the
/// CSV and text reports plus both HoM visualizations.
pub fn run_score(config: &PipelineConfig, frames_a: &Path, frames_b: &Path) -> Result<ScoreReport> {
    let err = stage_err("score");
    let out_dir = &config.output.dir;
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;

    let seq_a = FrameSequence::load_dir(frames_a, config.input.fps).map_err(err)?;
    let seq_b = FrameSequence::load_dir(frames_b, config.input.fps).map_err(err)?;
    if seq_a.width() != seq_b.width() || seq_a.height() != seq_b.height() {
        return Err(Error::stage(
            "score",
            format!(
                "resolution mismatch: {}x{} vs {}x{}",
                seq_a.width(),
                seq_a.height(),
                seq_b.width(),
                seq_b.height()
            ),
        ));
    }

    let flow_params = config.flow.to_params();
    let vectors_a = extract_sequence(&seq_a, &flow_params).map_err(err)?;
    let vectors_b = extract_sequence(&seq_b, &flow_params).map_err(err)?;

    let field_a = build_hom(
        &vectors_a,
        seq_a.width() as f64,
        seq_a.height() as f64,
        config.score.window,
        config.score.stride,
    )
    .map_err(err)?;
    let field_b = build_hom(
        &vectors_b,
        seq_b.width() as f64,
        seq_b.height() as f64,
        config.score.window,
        config.score.stride,
    )
    .map_err(err)?;

    render_hom(&field_a).save_png(&out_dir.join("hom_a.png"))?;
    render_hom(&field_b).save_png(&out_dir.join("hom_b.png"))?;

    let report = score_fields(&field_a, &field_b, config.score.empty_window_policy).map_err(err)?;
    save_score_csv(&report, &out_dir.join("score.csv"))?;
    save_score_text(&report, &out_dir.join("score.txt"))?;
    Ok(report)
}

/// Full run: analyze the exemplar, synthesize, render, and score the
/// rendering against the exemplar. Emits `manifest.txt` with a SHA-256 per
/// artifact (relative paths, sorted), so identical runs hash identically.
pub fn run_pipeline(config: &PipelineConfig) -> Result<(ScoreReport, PathBuf)> {
    let analyze = run_analyze(config)?;
    let paths = config.sim.paths.clone().unwrap_or(analyze.paths);
    let trajectories = run_synthesize(config, &paths)?;
    let rendered = run_render(config, &trajectories)?;
    let report = run_score(config, &config.input.frames, &rendered)?;

    let manifest_path = config.output.dir.join("manifest.txt");
    let manifest = hash_tree(&config.output.dir, &manifest_path)?;
    fs::write(&manifest_path, manifest).map_err(|e| Error::io(&manifest_path, e))?;
    Ok((report, manifest_path))
}

/// Hash every regular file under `root` (except the manifest itself) into
/// `"<sha256>  <relative path>"` lines, sorted by path.
pub fn hash_tree(root: &Path, exclude: &Path) -> Result<String> {
    let mut files = Vec::new();
    collect_files(root, &mut files)?;
    files.sort();
    let mut out = String::new();
    for file in files {
        if file == exclude {
            continue;
        }
        let data = fs::read(&file).map_err(|e| Error::io(&file, e))?;
        let digest = Sha256::digest(&data);
        let hex: String = digest.iter().map(|b| format!("{b:02x}")).collect();
        let rel = file.strip_prefix(root).unwrap_or(&file);
        let rel_text = rel
            .components()
            .map(|c| c.as_os_str().to_string_lossy())
            .collect::<Vec<_>>()
            .join("/");
        out.push_str(&format!("{hex}  {rel_text}\n"));
    }
    Ok(out)
}

fn collect_files(dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let path = entry.path();
        if path.is_dir() {
            collect_files(&path, out)?;
        } else {
            out.push(path);
        }
    }
    Ok(())
}

/// One cell of the experiment grid.
#[derive(Debug, Clone)]
pub struct GridCell {
    pub population: usize,
    pub goal_mode: String,
    pub scenario: String,
    pub score: f64,
}

/// Sweep population x goal tightness x {no diversification, diversification,
/// random paths}, synthesizing, rendering, and scoring each scenario against
/// the exemplar. The analyze stage runs once and is shared.
pub fn run_grid(config: &PipelineConfig, populations: &[usize]) -> Result<Vec<GridCell>> {
    let analyze = run_analyze(config)?;
    let exemplar = FrameSequence::load_dir(&config.input.frames, config.input.fps)
        .map_err(stage_err("grid"))?;
    let (width, height) = (exemplar.width() as f64, exemplar.height() as f64);
    drop(exemplar);

    let mut results = Vec::new();
    for &population in populations {
        for goal_mode in ["tight", "loose"] {
            for scenario in ["none", "diversified", "random"] {
                let mut cell_config = config.clone();
                cell_config.sim.population = population;
                cell_config.sim.goal_mode = if goal_mode == "tight" {
                    crate::sim::GoalMode::Tight
                } else {
                    crate::sim::GoalMode::Loose
                };
                cell_config.diversify.method = match scenario {
                    "diversified" => config.diversify.method,
                    _ => MethodConfig::None,
                };
                let label = format!("{population:03}_{goal_mode}_{scenario}");
                cell_config.output.dir = config.output.dir.join("grid").join(&label);
                fs::create_dir_all(&cell_config.output.dir)
                    .map_err(|e| Error::io(&cell_config.output.dir, e))?;

                let paths_file = if scenario == "random" {
                    // Per-agent random border paths, seeded per cell.
                    let mut rng = ChaCha8Rng::seed_from_u64(
                        crate::math::mix_seed(config.sim.seed, population as u64),
                    );
                    let random: Vec<GlobalPath> = (0..population)
                        .map(|_| random_border_path(width, height, &mut rng))
                        .collect();
                    let file = cell_config.output.dir.join("random_paths.csv");
                    save_paths(&random, &file)?;
                    file
                } else {
                    analyze.paths.clone()
                };

                let trajectories = run_synthesize(&cell_config, &paths_file)?;
                let rendered = run_render(&cell_config, &trajectories)?;
                let report = run_score(&cell_config, &config.input.frames, &rendered)?;
                results.push(GridCell {
                    population,
                    goal_mode: goal_mode.to_string(),
                    scenario: scenario.to_string(),
                    score: report.score,
                });
            }
        }
    }

    let summary_path = config.output.dir.join("grid").join("grid_results.csv");
    let mut body = String::from("population,goal_mode,scenario,score\n");
    for cell in &results {
        body.push_str(&format!(
            "{},{},{},{:.6}\n",
            cell.population, cell.goal_mode, cell.scenario, cell.score
        ));
    }
    fs::write(&summary_path, body).map_err(|e| Error::io(&summary_path, e))?;
    Ok(results)
}

/// Fixture generator used by tests and examples: `count` textured disks per
/// stream, top band moving east and bottom band moving west, `frames`
/// frames of `width` x `height`.
pub fn two_stream_fixture(
    width: usize,
    height: usize,
    frames: usize,
    count: usize,
    speed: f64,
) -> FrameSequence {
    let mut seq = Vec::with_capacity(frames);
    let spacing = width as f64 / count as f64;
    for f in 0..frames {
        let mut frame = crate::frame::GrayFrame::new(width, height);
        let t = f as f64;
        for i in 0..count {
            // East-bound band in the upper third.
            let x = (i as f64 * spacing + t * speed).rem_euclid(width as f64);
            let y = height as f64 * (0.28 + 0.08 * ((i * 61 % 17) as f64 / 17.0 - 0.5));
            frame.draw_disk(crate::math::Vec2::new(x, y), 4.0, 160, 255, 1.5);
            // West-bound band in the lower third.
            let x = (width as f64 - i as f64 * spacing - t * speed).rem_euclid(width as f64);
            let y = height as f64 * (0.72 + 0.08 * ((i * 37 % 13) as f64 / 13.0 - 0.5));
            frame.draw_disk(crate::math::Vec2::new(x, y), 4.0, 160, 255, 1.5);
        }
        seq.push(frame);
    }
    FrameSequence::new(seq, 25.0).expect("fixture frames are uniform")
}

/// Drop motion vectors within `margin` of the wrap-around seam columns so
/// fixture tests see clean single-direction flow. Test support only.
pub fn strip_seam_vectors(vectors: Vec<MotionVector>, width: f64, margin: f64) -> Vec<MotionVector> {
    vectors
        .into_iter()
        .filter(|v| v.x > margin && v.x < width - margin)
        .collect()
}
