//! End-to-end tests of the `crowdsynth` binary: every subcommand, the error
//! paths, and pipeline/stage composability.

use std::path::PathBuf;
use std::process::{Command, Output};

use crowdsynth_core::pipeline::two_stream_fixture;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_crowdsynth"))
}

fn setup(name: &str) -> (PathBuf, PathBuf) {
    let root = std::env::temp_dir().join(format!("cli_{name}_{}", std::process::id()));
    if root.exists() {
        std::fs::remove_dir_all(&root).unwrap();
    }
    std::fs::create_dir_all(&root).unwrap();
    two_stream_fixture(120, 120, 40, 5, 2.0)
        .save_dir(&root.join("frames"), false)
        .unwrap();
    let config = root.join("config.toml");
    std::fs::write(
        &config,
        format!(
            r#"
[input]
frames = "{frames}"
fps = 25.0

[grid]
cells_x = 12
cells_y = 12

[prune]
min_support = 6.0

[diversify]
size = 6.0

[sim]
duration = 6.0
population = 8
spawn_window = 2.0

[score]
window = 40
stride = 20

[output]
dir = "{out}"
"#,
            frames = root.join("frames").display(),
            out = root.join("out").display(),
        ),
    )
    .unwrap();
    (root, config)
}

fn run_ok(mut cmd: Command) -> Output {
    let output = cmd.output().expect("failed to launch binary");
    assert!(
        output.status.success(),
        "command failed.\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&output.stdout),
        String::from_utf8_lossy(&output.stderr)
    );
    output
}

#[test]
fn stage_subcommands_and_composability() {
    let (root, config) = setup("stages");
    let out = root.join("out");

    // analyze
    run_ok({
        let mut c = bin();
        c.args(["analyze", "--config"]).arg(&config);
        c
    });
    for file in ["vectors.csv", "directions.csv", "paths.csv"] {
        assert!(out.join(file).exists(), "missing {file}");
    }
    for overlay in ["cells.png", "directions.png", "paths.png"] {
        assert!(out.join("debug").join(overlay).exists(), "missing debug {overlay}");
    }

    // synthesize (defaults to <out>/paths.csv)
    run_ok({
        let mut c = bin();
        c.args(["synthesize", "--config"]).arg(&config);
        c
    });
    assert!(out.join("trajectories.csv").exists());
    assert!(out.join("agent_paths.csv").exists());

    // render
    run_ok({
        let mut c = bin();
        c.args(["render", "--config"]).arg(&config);
        c
    });
    let rendered: Vec<_> = std::fs::read_dir(out.join("render")).unwrap().collect();
    assert!(rendered.len() > 100, "expected ~150 frames, got {}", rendered.len());

    // score of the exemplar against the rendering
    let score_out = run_ok({
        let mut c = bin();
        c.args(["score", "--config"]).arg(&config);
        c.arg(root.join("frames")).arg(out.join("render"));
        c
    });
    let stdout = String::from_utf8_lossy(&score_out.stdout);
    assert!(stdout.contains("score="), "unexpected stdout: {stdout}");
    assert!(out.join("score.csv").exists());
    assert!(out.join("score.txt").exists());

    // Full pipeline into a second directory must reproduce the chained
    // stage artifacts byte for byte.
    let out2 = root.join("out2");
    run_ok({
        let mut c = bin();
        c.args(["pipeline", "--config"]).arg(&config);
        c.arg("--set").arg(format!("output.dir=\"{}\"", out2.display()));
        c
    });
    assert!(out2.join("manifest.txt").exists());
    for file in [
        "vectors.csv",
        "directions.csv",
        "paths.csv",
        "agent_paths.csv",
        "trajectories.csv",
        "score.csv",
    ] {
        let a = std::fs::read(out.join(file)).unwrap();
        let b = std::fs::read(out2.join(file)).unwrap();
        assert_eq!(a, b, "pipeline output differs from chained stages for {file}");
    }

    // The score of the exemplar against itself is an exact zero.
    let self_score = run_ok({
        let mut c = bin();
        c.args(["score", "--config"]).arg(&config);
        c.arg(root.join("frames")).arg(root.join("frames"));
        c
    });
    let stdout = String::from_utf8_lossy(&self_score.stdout);
    assert!(stdout.contains("score=0.000000"), "self-score not zero: {stdout}");

    std::fs::remove_dir_all(&root).ok();
}

#[test]
fn error_paths_exit_nonzero() {
    let (root, config) = setup("errors");

    // Empty frame directory.
    let empty = root.join("empty");
    std::fs::create_dir_all(&empty).unwrap();
    let bad_config = root.join("bad.toml");
    std::fs::write(
        &bad_config,
        format!(
            "[input]\nframes = \"{}\"\nfps = 25.0\n[output]\ndir = \"{}\"\n",
            empty.display(),
            root.join("out_bad").display()
        ),
    )
    .unwrap();
    let output = bin()
        .args(["analyze", "--config"])
        .arg(&bad_config)
        .output()
        .unwrap();
    assert!(!output.status.success());
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("analyze"), "stage not named: {stderr}");

    // Mismatched resolutions for score.
    let small = root.join("small");
    two_stream_fixture(60, 60, 10, 3, 2.0).save_dir(&small, false).unwrap();
    let output = bin()
        .args(["score", "--config"])
        .arg(&config)
        .arg(root.join("frames"))
        .arg(&small)
        .output()
        .unwrap();
    assert!(!output.status.success());
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("resolution"), "missing resolution message: {stderr}");

    // Unknown config key.
    let unknown = root.join("unknown.toml");
    std::fs::write(&unknown, "[input]\nframes = \"x\"\nfps = 25.0\nwhat = 1\n").unwrap();
    let output = bin().args(["analyze", "--config"]).arg(&unknown).output().unwrap();
    assert!(!output.status.success());

    // Missing paths file for synthesize.
    let output = bin()
        .args(["synthesize", "--config"])
        .arg(&config)
        .arg("--paths")
        .arg(root.join("nope.csv"))
        .output()
        .unwrap();
    assert!(!output.status.success());

    std::fs::remove_dir_all(&root).ok();
}

#[test]
fn overrides_and_jobs_flag() {
    let (root, config) = setup("overrides");
    run_ok({
        let mut c = bin();
        c.args(["--jobs", "1", "analyze", "--config"]).arg(&config);
        c.arg("--set").arg("grid.cells_x=10");
        c.arg("--set").arg("flow.max_corners=500");
        c
    });
    assert!(root.join("out").join("paths.csv").exists());

    // A bad override is rejected up front.
    let output = bin()
        .args(["analyze", "--config"])
        .arg(&config)
        .arg("--set")
        .arg("grid.cells_x")
        .output()
        .unwrap();
    assert!(!output.status.success());
    std::fs::remove_dir_all(&root).ok();
}

#[test]
fn chunked_analysis_combines_paths() {
    let (root, config) = setup("chunks");
    run_ok({
        let mut c = bin();
        c.args(["analyze", "--config"]).arg(&config);
        c.args(["--chunk-size", "20"]);
        c
    });
    let out = root.join("out");
    assert!(out.join("chunk_000").join("paths.csv").exists());
    assert!(out.join("chunk_001").join("paths.csv").exists());
    let combined = std::fs::read_to_string(out.join("paths.csv")).unwrap();
    assert!(combined.lines().count() > 1, "combined paths file is empty");
    std::fs::remove_dir_all(&root).ok();
}

#[test]
fn grid_sweep_writes_summary() {
    let (root, config) = setup("grid");
    // Keep the sweep small: one population, short duration.
    run_ok({
        let mut c = bin();
        c.args(["pipeline", "--config"]).arg(&config);
        c.args(["--grid", "4"]);
        c.arg("--set").arg("sim.duration=3.0");
        c
    });
    let summary = root.join("out").join("grid").join("grid_results.csv");
    let body = std::fs::read_to_string(&summary).unwrap();
    // Header plus 1 population x 2 goal modes x 3 scenarios.
    assert_eq!(body.lines().count(), 7, "unexpected summary:\n{body}");
    assert!(body.contains("random"));
    assert!(body.contains("tight"));
    std::fs::remove_dir_all(&root).ok();
}
