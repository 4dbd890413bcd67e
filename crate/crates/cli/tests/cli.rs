use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use shle::config::{render_config, PipelineConfig};
use shle::detection::BBox;
use shle::geometry::{CameraRig, Intrinsics};
use shle::io::{read_metrics, read_results, write_results, ResultRow, ResultsTable};
use shle::synthetic::{linear_trajectory, render_scene_spec, SceneSpec};

fn shle(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_shle"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn shle_with_threads(args: &[&str], threads: &str) -> Output {
    Command::new(env!("CARGO_BIN_EXE_shle"))
        .args(args)
        .env("SHLE_THREADS", threads)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn small_rig() -> CameraRig {
    CameraRig::with_default_extrinsics(
        Intrinsics {
            fx: 700.0,
            fy: 700.0,
            cx: 320.0,
            cy: 180.0,
            width: 640,
            height: 360,
        },
        0.12,
        1.45,
    )
    .unwrap()
}

fn small_spec() -> SceneSpec {
    SceneSpec::new(&small_rig(), linear_trajectory(30.0, 10.0, 10))
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Writes `spec` and runs `synth`, returning the manifest path.
fn synthesize(dir: &Path, spec: &SceneSpec, extra: &[&str]) -> PathBuf {
    let spec_path = dir.join("spec.json");
    std::fs::write(&spec_path, render_scene_spec(spec)).unwrap();
    let scene = dir.join("scene");
    let mut args = vec!["synth", "--spec", p(&spec_path), "--out", p(&scene)];
    args.extend_from_slice(extra);
    let out = shle(&args);
    assert!(out.status.success(), "synth failed: {}", stderr(&out));
    let manifest = scene.join("manifest.json");
    assert!(stdout(&out).contains("manifest="));
    assert!(manifest.exists());
    manifest
}

fn scene_height_from_stdout(o: &Output) -> f64 {
    stdout(o)
        .lines()
        .find_map(|l| l.strip_prefix("scene_height_m="))
        .expect("scene height printed")
        .trim()
        .parse()
        .unwrap()
}

fn tree_bytes(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let bytes = std::fs::read(&path).unwrap();
                out.push((path, bytes));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn help_exits_zero_for_every_subcommand() {
    assert!(shle(&["--help"]).status.success());
    for sub in ["estimate", "eval", "synth", "sweep", "plot"] {
        let out = shle(&[sub, "--help"]);
        assert!(out.status.success(), "{sub} --help");
        assert!(stdout(&out).contains("--"), "{sub} help lists flags");
    }
}

#[test]
fn unknown_subcommand_and_missing_flags_exit_one() {
    assert_eq!(shle(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(shle(&["estimate"]).status.code(), Some(1));
}

#[test]
fn estimate_recovers_noiseless_height_without_touching_inputs() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = synthesize(dir.path(), &small_spec(), &[]);
    let before = tree_bytes(&dir.path().join("scene"));
    let results = dir.path().join("results.csv");
    let out = shle(&["estimate", "--manifest", p(&manifest), "--out", p(&results)]);
    assert!(out.status.success(), "{}", stderr(&out));
    let h = scene_height_from_stdout(&out);
    assert!((h - 3.5).abs() <= 0.01, "scene height {h}");
    assert_eq!(tree_bytes(&dir.path().join("scene")), before);

    let table = read_results(&results).unwrap();
    assert_eq!(table.rows.len(), 10);
    assert_eq!(table.scene_height_m, h);
}

#[test]
fn default_config_file_matches_no_config() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = synthesize(dir.path(), &small_spec(), &[]);
    let config = dir.path().join("config.json");
    std::fs::write(&config, render_config(&PipelineConfig::default())).unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    assert!(
        shle(&["estimate", "--manifest", p(&manifest), "--out", p(&a)])
            .status
            .success()
    );
    let with = shle(&[
        "estimate",
        "--manifest",
        p(&manifest),
        "--config",
        p(&config),
        "--out",
        p(&b),
    ]);
    assert!(with.status.success(), "{}", stderr(&with));
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn estimate_rejects_missing_or_bad_inputs() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("r.csv");
    let missing = shle(&[
        "estimate",
        "--manifest",
        p(&dir.path().join("nope.json")),
        "--out",
        p(&out_path),
    ]);
    assert_eq!(missing.status.code(), Some(1));
    assert!(!out_path.exists());

    let bad_config = dir.path().join("bad.json");
    std::fs::write(&bad_config, "{\"sigma\": -1}").unwrap();
    let manifest = synthesize(dir.path(), &small_spec(), &[]);
    let out = shle(&[
        "estimate",
        "--manifest",
        p(&manifest),
        "--config",
        p(&bad_config),
        "--out",
        p(&out_path),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("sigma"));
}

#[test]
fn eval_reports_height_error_against_manifest_truth() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = synthesize(dir.path(), &small_spec(), &[]);
    let results = dir.path().join("results.csv");
    assert!(
        shle(&["estimate", "--manifest", p(&manifest), "--out", p(&results)])
            .status
            .success()
    );

    let mut table: ResultsTable = read_results(&results).unwrap();
    table.scene_height_m = 3.58;
    write_results(&results, &table).unwrap();
    let metrics = dir.path().join("metrics.json");
    let out = shle(&[
        "eval",
        "--results",
        p(&results),
        "--manifest",
        p(&manifest),
        "--out",
        p(&metrics),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let report = read_metrics(&metrics).unwrap();
    assert!((report.height.he - 0.08).abs() < 1e-12);
    assert!((report.height.her - 0.08 / 3.5 * 100.0).abs() < 1e-10);
    let boxes = report.bbox.expect("manifest carries ground-truth boxes");
    assert!(
        boxes.cpd < 1e-9,
        "tracked boxes equal the truth: {}",
        boxes.cpd
    );

    table.scene_height_m = 3.5;
    write_results(&results, &table).unwrap();
    let out = shle(&[
        "eval",
        "--results",
        p(&results),
        "--manifest",
        p(&manifest),
        "--out",
        p(&metrics),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let report = read_metrics(&metrics).unwrap();
    assert_eq!((report.height.he, report.height.her), (0.0, 0.0));
}

#[test]
fn eval_without_ground_truth_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = synthesize(dir.path(), &small_spec(), &[]);
    let results = dir.path().join("results.csv");
    assert!(
        shle(&["estimate", "--manifest", p(&manifest), "--out", p(&results)])
            .status
            .success()
    );

    let text = std::fs::read_to_string(&manifest).unwrap();
    let mut value: serde_json::Value = serde_json::from_str(&text).unwrap();
    value
        .as_object_mut()
        .unwrap()
        .remove("ground_truth_height_m");
    let stripped = dir.path().join("scene").join("no_gt.json");
    std::fs::write(&stripped, value.to_string()).unwrap();
    let metrics = dir.path().join("metrics.json");
    let out = shle(&[
        "eval",
        "--results",
        p(&results),
        "--manifest",
        p(&stripped),
        "--out",
        p(&metrics),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("ground_truth_height_m"));
    assert!(!metrics.exists());
}

#[test]
fn sweep_writes_one_row_per_value() {
    let dir = tempfile::tempdir().unwrap();
    let mut spec = small_spec();
    spec.noise = 0.25;
    spec.spurious_fraction = 0.01;
    spec.seed = 7;
    let manifest = synthesize(dir.path(), &spec, &[]);
    let table = dir.path().join("sweep.csv");
    let out = shle(&[
        "sweep",
        "--param",
        "sigma",
        "--values",
        "0.3,0.6,1.2",
        "--manifest",
        p(&manifest),
        "--out",
        p(&table),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = std::fs::read_to_string(&table).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("value,scene_height_m,he,her"));
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(',').map(|c| c.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 3);
    assert_eq!(
        rows.iter().map(|r| r[0]).collect::<Vec<_>>(),
        [0.3, 0.6, 1.2]
    );
    let best = (0..3)
        .min_by(|&a, &b| rows[a][2].abs().total_cmp(&rows[b][2].abs()))
        .unwrap();
    assert!(
        best.abs_diff(1) <= 1,
        "minimiser within one grid step of sigma=0.6"
    );
    for r in &rows {
        assert!((r[2] - (r[1] - 3.5)).abs() < 1e-12);
        assert!((r[3] - r[2].abs() / 3.5 * 100.0).abs() < 1e-9);
    }
}

#[test]
fn sweep_rejects_unknown_parameter() {
    let dir = tempfile::tempdir().unwrap();
    let out = shle(&[
        "sweep",
        "--param",
        "gamma",
        "--values",
        "1",
        "--manifest",
        p(&dir.path().join("m.json")),
        "--out",
        p(&dir.path().join("s.csv")),
    ]);
    assert_eq!(out.status.code(), Some(1));
    let err = stderr(&out);
    for name in [
        "M",
        "sigma",
        "kde_bandwidth",
        "n_lowest",
        "kalman_q",
        "kalman_r",
    ] {
        assert!(err.contains(name), "{name} missing from {err}");
    }
}

#[test]
fn plot_draws_raw_and_filtered_series() {
    let dir = tempfile::tempdir().unwrap();
    let table = ResultsTable {
        rows: (0..60)
            .map(|k| ResultRow {
                frame_index: k,
                h_df: 3.5 + 0.02 * ((k as f64) * 0.7).sin(),
                h_tf: 3.5 + 0.005 * ((k as f64) * 0.7).sin(),
                bbox: BBox::new(600.0, 200.0, 280.0, 41.0, 1.0),
                n_points: 1000,
            })
            .collect(),
        scene_height_m: 3.5,
    };
    let results = dir.path().join("results.csv");
    write_results(&results, &table).unwrap();
    let svg = dir.path().join("plot.svg");
    let out = shle(&["plot", "--results", p(&results), "--out", p(&svg)]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = std::fs::read_to_string(&svg).unwrap();
    assert!(text.starts_with("<svg") || text.starts_with("<?xml"));
    assert!(text.trim_end().ends_with("</svg>"));
    assert_eq!(text.matches("<polyline").count(), 2);
    for class in ["h_df", "h_tf"] {
        let line = text
            .lines()
            .find(|l| l.contains(&format!("class=\"{class}\"")))
            .unwrap();
        let points = line
            .split("points=\"")
            .nth(1)
            .unwrap()
            .split('"')
            .next()
            .unwrap();
        assert_eq!(points.split_whitespace().count(), 60);
    }
}

#[test]
fn synth_rejects_unknown_perturbation() {
    let dir = tempfile::tempdir().unwrap();
    let spec_path = dir.path().join("spec.json");
    std::fs::write(&spec_path, render_scene_spec(&small_spec())).unwrap();
    let out = shle(&[
        "synth",
        "--spec",
        p(&spec_path),
        "--out",
        p(&dir.path().join("s")),
        "--perturb",
        "blur=1",
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn synth_perturbation_and_seed_override_are_applied() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = synthesize(
        dir.path(),
        &small_spec(),
        &["--seed", "3", "--perturb", "decoys=2"],
    );
    let dets = std::fs::read_to_string(manifest.parent().unwrap().join("detections.json")).unwrap();
    let boxes = dets.matches("\"score\"").count();
    assert_eq!(boxes, 10 * 3, "one true box and two decoys per frame");
}

#[test]
fn results_are_identical_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let mut spec = small_spec();
    spec.noise = 0.25;
    spec.spurious_fraction = 0.01;
    spec.decoy_boxes = 3;
    spec.detection_dropout = 0.3;
    spec.seed = 11;
    let manifest = synthesize(dir.path(), &spec, &[]);
    let mut outputs = Vec::new();
    for threads in ["1", "4"] {
        let results = dir.path().join(format!("r{threads}.csv"));
        let out = shle_with_threads(
            &["estimate", "--manifest", p(&manifest), "--out", p(&results)],
            threads,
        );
        assert!(out.status.success(), "{}", stderr(&out));
        outputs.push(std::fs::read(&results).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn invalid_thread_count_is_a_config_error() {
    let out = shle_with_threads(&["plot", "--results", "x", "--out", "y"], "zero");
    assert_eq!(out.status.code(), Some(1));
}
