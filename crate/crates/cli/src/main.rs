use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use shle::config::{read_config, SWEEP_PARAMS};
use shle::io::manifest::{parse_manifest, Manifest};
use shle::io::{
    read_manifest, read_results, write_metrics, write_results, MetricsReport, ResultsTable,
};
use shle::metrics::{aggregate_boxes, box_metrics, height_metrics};
use shle::synthetic::{generate_scene, read_scene_spec, PerturbKind};
use shle::{run_scene, Error, PipelineConfig};

/// Stereo height-limit estimation.
#[derive(Debug, Parser)]
#[command(name = "shle", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Estimate the clearance height of one scene.
    Estimate(EstimateArgs),
    /// Score a results table against the manifest's ground truth.
    Eval(EvalArgs),
    /// Render a synthetic scene to a manifest-rooted directory.
    Synth(SynthArgs),
    /// Re-run estimation and evaluation over values of one hyperparameter.
    Sweep(SweepArgs),
    /// Plot raw and filtered per-frame heights as SVG.
    Plot(PlotArgs),
}

#[derive(Debug, Args)]
struct EstimateArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Pipeline configuration (JSON); defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long)]
    results: PathBuf,
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long)]
    spec: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Overrides the spec's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Perturbation as KIND=MAGNITUDE (kinds: dropout, decoys, noise); repeatable.
    #[arg(long, value_name = "KIND=MAGNITUDE")]
    perturb: Vec<String>,
}

#[derive(Debug, Args)]
struct SweepArgs {
    /// One of M, sigma, kde_bandwidth, n_lowest, kalman_q, kalman_r.
    #[arg(long)]
    param: String,
    /// Comma-separated values.
    #[arg(
        long,
        value_delimiter = ',',
        required = true,
        allow_negative_numbers = true
    )]
    values: Vec<f64>,
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output table: `value,scene_height_m,he,her`.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct PlotArgs {
    #[arg(long)]
    results: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

fn load_config(path: Option<&Path>) -> shle::Result<PipelineConfig> {
    match path {
        Some(p) => read_config(p),
        None => Ok(PipelineConfig::default()),
    }
}

fn read_manifest_text(path: &Path) -> shle::Result<Manifest> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    parse_manifest(&text)
}

fn ground_truth(manifest: &Manifest) -> shle::Result<f64> {
    manifest
        .ground_truth_height_m
        .ok_or_else(|| Error::Config("manifest has no ground_truth_height_m".into()))
}

fn write_text(path: &Path, text: &str) -> shle::Result<()> {
    std::fs::write(path, text).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn estimate(args: &EstimateArgs) -> shle::Result<()> {
    let config = load_config(args.config.as_deref())?;
    let scene = read_manifest(&args.manifest)?;
    let est = run_scene(&scene, &config)?;
    for (frame, reason) in &est.skipped {
        eprintln!("skipped frame {frame}: {reason}");
    }
    if est.tracker_fallback {
        eprintln!("tracker unavailable; gaps filled by interpolation");
    }
    write_results(&args.out, &est.to_results_table())?;
    println!("scene_height_m={}", est.scene_height());
    Ok(())
}

fn evaluate(results: &ResultsTable, manifest: &Manifest) -> shle::Result<MetricsReport> {
    let truth = ground_truth(manifest)?;
    let height = height_metrics(results.scene_height_m, truth)?;
    let gt_boxes: std::collections::BTreeMap<u64, _> = manifest
        .frames
        .iter()
        .filter_map(|f| f.gt_box.map(|b| (f.index, b)))
        .collect();
    let per_frame = results
        .rows
        .iter()
        .filter_map(|r| {
            gt_boxes
                .get(&r.frame_index)
                .map(|gt| box_metrics(&r.bbox, gt))
        })
        .collect::<shle::Result<Vec<_>>>()?;
    let bbox = if per_frame.is_empty() {
        None
    } else {
        Some(aggregate_boxes(&per_frame)?)
    };
    Ok(MetricsReport { height, bbox })
}

fn eval(args: &EvalArgs) -> shle::Result<()> {
    let manifest = read_manifest_text(&args.manifest)?;
    let results = read_results(&args.results)?;
    let report = evaluate(&results, &manifest)?;
    write_metrics(&args.out, &report)?;
    println!("he={} her={}", report.height.he, report.height.her);
    Ok(())
}

fn parse_perturbation(raw: &str) -> shle::Result<(PerturbKind, f64)> {
    let (kind, value) = raw
        .split_once('=')
        .ok_or_else(|| Error::Usage(format!("perturbation {raw:?} is not KIND=MAGNITUDE")))?;
    let magnitude = value
        .parse()
        .map_err(|_| Error::Usage(format!("perturbation magnitude {value:?} is not a number")))?;
    Ok((kind.parse()?, magnitude))
}

fn synth(args: &SynthArgs) -> shle::Result<()> {
    let mut spec = read_scene_spec(&args.spec)?;
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }
    let perturbations = args
        .perturb
        .iter()
        .map(|p| parse_perturbation(p))
        .collect::<shle::Result<Vec<_>>>()?;
    let mut scene = generate_scene(&spec)?;
    for (kind, magnitude) in perturbations {
        scene = scene.perturb(kind, magnitude)?;
    }
    let manifest = scene.write_to(&args.out)?;
    println!("manifest={}", manifest.display());
    Ok(())
}

fn sweep(args: &SweepArgs) -> shle::Result<()> {
    if !SWEEP_PARAMS.contains(&args.param.as_str()) {
        return Err(Error::Usage(format!(
            "unknown parameter {:?}; valid names: {}",
            args.param,
            SWEEP_PARAMS.join(", ")
        )));
    }
    let base = load_config(args.config.as_deref())?;
    let scene = read_manifest(&args.manifest)?;
    let truth = ground_truth(&scene.manifest)?;
    let configs = args
        .values
        .iter()
        .map(|&v| {
            let mut c = base.clone();
            c.set_param(&args.param, v).map(|()| c)
        })
        .collect::<shle::Result<Vec<_>>>()?;
    let mut table = String::from("value,scene_height_m,he,her\n");
    for (value, config) in args.values.iter().zip(&configs) {
        let est = run_scene(&scene, config)?;
        let m = height_metrics(est.scene_height(), truth)?;
        writeln!(table, "{value},{},{},{}", est.scene_height(), m.he, m.her).expect("string write");
        println!("{}={value} he={} her={}", args.param, m.he, m.her);
    }
    write_text(&args.out, &table)
}

fn svg_polyline(points: &[(f64, f64)], colour: &str, label: &str) -> String {
    let coords: Vec<String> = points
        .iter()
        .map(|(x, y)| format!("{x:.2},{y:.2}"))
        .collect();
    format!(
        "  <polyline class=\"{label}\" fill=\"none\" stroke=\"{colour}\" stroke-width=\"1.5\" points=\"{}\"/>\n",
        coords.join(" ")
    )
}

fn render_plot(table: &ResultsTable) -> shle::Result<String> {
    if table.rows.is_empty() {
        return Err(Error::Config("results table has no rows to plot".into()));
    }
    let (w, h, margin) = (800.0, 400.0, 50.0);
    let frames = table.rows.iter().map(|r| r.frame_index as f64);
    let heights = table.rows.iter().flat_map(|r| [r.h_df, r.h_tf]);
    let (f0, f1) = frames.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| {
        (a.min(x), b.max(x))
    });
    let (h0, h1) = heights.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| {
        (a.min(x), b.max(x))
    });
    let pad = ((h1 - h0) * 0.05).max(0.01);
    let (h0, h1) = (h0 - pad, h1 + pad);
    let sx =
        |f: f64| margin + if f1 > f0 { (f - f0) / (f1 - f0) } else { 0.5 } * (w - 2.0 * margin);
    let sy = |v: f64| h - margin - (v - h0) / (h1 - h0) * (h - 2.0 * margin);
    let raw: Vec<(f64, f64)> = table
        .rows
        .iter()
        .map(|r| (sx(r.frame_index as f64), sy(r.h_df)))
        .collect();
    let filtered: Vec<(f64, f64)> = table
        .rows
        .iter()
        .map(|r| (sx(r.frame_index as f64), sy(r.h_tf)))
        .collect();

    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n"
    );
    svg.push_str("  <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    let (x0, x1, y0, y1) = (margin, w - margin, margin, h - margin);
    writeln!(
        svg,
        "  <path d=\"M{x0} {y0} L{x0} {y1} L{x1} {y1}\" fill=\"none\" stroke=\"black\"/>"
    )
    .expect("string write");
    for (y, v) in [(y1, h0), (y0, h1)] {
        writeln!(
            svg,
            "  <text x=\"{}\" y=\"{y}\" font-size=\"11\" text-anchor=\"end\">{v:.3}</text>",
            x0 - 4.0
        )
        .expect("string write");
    }
    writeln!(
        svg,
        "  <text x=\"{}\" y=\"{}\" font-size=\"12\" text-anchor=\"middle\">frame</text>",
        w / 2.0,
        h - 12.0
    )
    .expect("string write");
    writeln!(
        svg,
        "  <text x=\"{x1}\" y=\"{}\" font-size=\"12\" text-anchor=\"end\">scene height {:.3} m</text>",
        y0 - 10.0,
        table.scene_height_m
    )
    .expect("string write");
    svg.push_str(&svg_polyline(&raw, "#999999", "h_df"));
    svg.push_str(&svg_polyline(&filtered, "#c0392b", "h_tf"));
    writeln!(
        svg,
        "  <text x=\"{}\" y=\"{}\" font-size=\"11\" fill=\"#999999\">raw h_df</text>",
        x0 + 8.0,
        y0 - 10.0
    )
    .expect("string write");
    writeln!(
        svg,
        "  <text x=\"{}\" y=\"{}\" font-size=\"11\" fill=\"#c0392b\">filtered h_tf</text>",
        x0 + 80.0,
        y0 - 10.0
    )
    .expect("string write");
    svg.push_str("</svg>\n");
    Ok(svg)
}

fn plot(args: &PlotArgs) -> shle::Result<()> {
    let table = read_results(&args.results)?;
    write_text(&args.out, &render_plot(&table)?)
}

fn configure_threads() -> shle::Result<()> {
    let Ok(raw) = std::env::var("SHLE_THREADS") else {
        return Ok(());
    };
    let n: usize = raw.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| {
        Error::Config(format!(
            "SHLE_THREADS must be a positive integer, got {raw:?}"
        ))
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::Config(format!("cannot size the thread pool: {e}")))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = configure_threads().and_then(|()| match &cli.command {
        Command::Estimate(a) => estimate(a),
        Command::Eval(a) => eval(a),
        Command::Synth(a) => synth(a),
        Command::Sweep(a) => sweep(a),
        Command::Plot(a) => plot(a),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 1 } else { 2 })
        }
    }
}
