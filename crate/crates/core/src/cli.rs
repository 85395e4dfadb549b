//! `pairtrack` command line: `simulate`, `track` and `evaluate`.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error. Diagnostics go to
//! standard error.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;

use crate::association::AssociationMethod;
use crate::detio::{self, TrackRow};
use crate::metrics::{self, EvalConfig};
use crate::simgen::{self, ScenarioSpec};
use crate::tracker::{run_sequence, TrackerConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;

#[derive(Debug)]
enum CliError {
    Usage(String),
    Data(String),
}

impl CliError {
    fn data(e: impl std::fmt::Display) -> Self {
        CliError::Data(e.to_string())
    }
}

#[derive(Parser, Debug)]
#[command(name = "pairtrack", version, about = "3D multi-object tracking from paired box detections")]
struct Cli {
    /// Worker threads for per-sequence processing (0 = one per core).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate ground truth and paired detections from a scenario file.
    Simulate(SimulateArgs),
    /// Track a pair file and write KITTI-format results per sequence.
    Track(TrackArgs),
    /// Score KITTI-format results against ground-truth labels.
    Evaluate(EvaluateArgs),
}

#[derive(Args, Debug)]
struct SimulateArgs {
    /// Scenario JSON: one scenario object or an array of them.
    #[arg(long)]
    spec: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Overrides `rng_seed` (each scenario in an array gets seed + index).
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Debug)]
struct TrackArgs {
    #[arg(long)]
    pairs: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Tracker config (JSON object or `key = value` lines); flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    iou_threshold: Option<f64>,
    #[arg(long)]
    window: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    min_hits: Option<u32>,
    #[arg(long)]
    max_misses: Option<u32>,
    #[arg(long)]
    score_threshold: Option<f64>,
    #[arg(long)]
    method: Option<AssociationMethod>,
    /// Pair boxes are in sensor coordinates; move them to world with each frame's pose.
    #[arg(long)]
    sensor_frame: bool,
    /// Do not report coasting tracks.
    #[arg(long)]
    no_coasting: bool,
    /// Also write `<seq>_traj.csv` (id, frame, x, y, yaw) per sequence.
    #[arg(long)]
    dump_trajectories: bool,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    /// Ground-truth label file or directory of `<seq>.txt`.
    #[arg(long)]
    gt: PathBuf,
    /// Results file or directory of `<seq>.txt`.
    #[arg(long)]
    results: PathBuf,
    #[arg(long = "iou-threshold", alias = "iou-min", default_value_t = 0.5)]
    iou_threshold: f64,
    #[arg(long, default_value_t = 40)]
    l_points: usize,
    /// Leave frames with index below this out of the evaluation.
    #[arg(long, default_value_t = 0)]
    warmup_frames: u64,
    /// Average MOTA_r without clamping at zero.
    #[arg(long)]
    no_clamp: bool,
    /// Write report.txt and report.json here.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Everything needed to repeat a run.
#[derive(Serialize)]
struct RunManifest {
    command: String,
    args: Vec<String>,
    config: serde_json::Value,
    inputs: Vec<String>,
    outputs: Vec<String>,
    rng_seed: Option<u64>,
    wall_time_seconds: f64,
    version: String,
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let arg_strings: Vec<String> = args.iter().map(|a| a.to_string_lossy().into_owned()).collect();

    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_USAGE;
        }
    };
    let result = pool.install(|| match &cli.command {
        Command::Simulate(a) => simulate(a, &arg_strings),
        Command::Track(a) => track(a, &arg_strings),
        Command::Evaluate(a) => evaluate(a, &arg_strings),
    });
    match result {
        Ok(()) => EXIT_OK,
        Err(CliError::Usage(m)) => {
            eprintln!("error: {m}");
            EXIT_USAGE
        }
        Err(CliError::Data(m)) => {
            eprintln!("error: {m}");
            EXIT_DATA
        }
    }
}

fn display(p: &Path) -> String {
    p.display().to_string()
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Data(format!("{}: {e}", dir.display())))
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn write_manifest(dir: &Path, manifest: &RunManifest) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(manifest).map_err(CliError::data)?;
    text.push('\n');
    write_file(&dir.join("manifest.json"), &text)
}

fn load_specs(path: &Path) -> Result<Vec<ScenarioSpec>, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    let specs = match value {
        serde_json::Value::Array(items) => items
            .into_iter()
            .map(serde_json::from_value::<ScenarioSpec>)
            .collect::<Result<Vec<_>, _>>(),
        other => serde_json::from_value::<ScenarioSpec>(other).map(|s| vec![s]),
    };
    specs.map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn simulate(a: &SimulateArgs, args: &[String]) -> Result<(), CliError> {
    let started = Instant::now();
    let mut specs = load_specs(&a.spec)?;
    if let Some(seed) = a.seed {
        for (k, s) in specs.iter_mut().enumerate() {
            s.rng_seed = seed.wrapping_add(k as u64);
        }
    }
    let mut seen = std::collections::HashSet::new();
    for s in &specs {
        if !seen.insert(s.sequence_id.clone()) {
            return Err(CliError::Data(format!("duplicate sequence_id {:?}", s.sequence_id)));
        }
    }

    let scenarios = specs
        .par_iter()
        .map(simgen::generate)
        .collect::<Result<Vec<_>, _>>()
        .map_err(CliError::data)?;

    let gt_dir = a.out.join("gt");
    let pose_dir = a.out.join("poses");
    create_dir(&gt_dir)?;
    create_dir(&pose_dir)?;
    let mut outputs = Vec::new();
    let mut world = Vec::new();
    let mut sensor = Vec::new();
    for (spec, sc) in specs.iter().zip(scenarios) {
        let gt_path = gt_dir.join(format!("{}.txt", spec.sequence_id));
        detio::write_kitti_labels(&gt_path, &sc.gt).map_err(CliError::data)?;
        let pose_path = pose_dir.join(format!("{}.txt", spec.sequence_id));
        detio::write_poses(&pose_path, &sc.poses()).map_err(CliError::data)?;
        outputs.push(display(&gt_path));
        outputs.push(display(&pose_path));
        world.extend(sc.frames);
        sensor.extend(sc.sensor_frames);
    }
    let pairs_path = a.out.join("pairs.jsonl");
    let sensor_path = a.out.join("pairs_sensor.jsonl");
    detio::write_pairs(&pairs_path, &world).map_err(CliError::data)?;
    detio::write_pairs(&sensor_path, &sensor).map_err(CliError::data)?;
    outputs.push(display(&pairs_path));
    outputs.push(display(&sensor_path));

    write_manifest(
        &a.out,
        &RunManifest {
            command: "simulate".into(),
            args: args.to_vec(),
            config: serde_json::to_value(&specs).map_err(CliError::data)?,
            inputs: vec![display(&a.spec)],
            outputs,
            rng_seed: specs.first().map(|s| s.rng_seed),
            wall_time_seconds: started.elapsed().as_secs_f64(),
            version: env!("CARGO_PKG_VERSION").into(),
        },
    )?;
    eprintln!("simulated {} sequence(s) into {}", specs.len(), a.out.display());
    Ok(())
}

fn tracker_config(a: &TrackArgs) -> Result<TrackerConfig, CliError> {
    let mut cfg = match &a.config {
        Some(path) => {
            let text =
                fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
            TrackerConfig::parse(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?
        }
        None => TrackerConfig::default(),
    };
    if let Some(v) = a.iou_threshold {
        cfg.iou_threshold = v;
    }
    if let Some(v) = a.window {
        cfg.window = v;
    }
    if let Some(v) = a.alpha {
        cfg.alpha = v;
    }
    if let Some(v) = a.min_hits {
        cfg.min_hits = v;
    }
    if let Some(v) = a.max_misses {
        cfg.max_misses = v;
    }
    if let Some(v) = a.score_threshold {
        cfg.score_threshold = v;
    }
    if let Some(v) = a.method {
        cfg.method = v;
    }
    if a.no_coasting {
        cfg.emit_coasting = false;
    }
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(cfg)
}

fn trajectory_csv(rows: &[TrackRow]) -> String {
    let mut out = String::from("id,frame,x,y,yaw\n");
    let mut sorted: Vec<&TrackRow> = rows.iter().collect();
    sorted.sort_by_key(|r| (r.track_id, r.frame_index));
    for r in sorted {
        let _ = writeln!(
            out,
            "{},{},{:.6},{:.6},{:.6}",
            r.track_id, r.frame_index, r.bbox.center.x, r.bbox.center.y, r.bbox.yaw
        );
    }
    out
}

fn track(a: &TrackArgs, args: &[String]) -> Result<(), CliError> {
    let started = Instant::now();
    let cfg = tracker_config(a)?;
    eprintln!("tracker config: {cfg} sensor_frame={}", a.sensor_frame);

    let records = detio::read_pairs(&a.pairs).map_err(|e| CliError::Data(format!("{}: {e}", a.pairs.display())))?;
    let groups = detio::group_by_sequence(records);
    let results = groups
        .par_iter()
        .map(|(seq, frames)| {
            run_sequence(frames, &cfg, a.sensor_frame).map_err(|e| CliError::Data(format!("sequence {seq:?}: {e}")))
        })
        .collect::<Result<Vec<_>, _>>()?;

    create_dir(&a.out)?;
    let mut outputs = Vec::new();
    for ((seq, _), rows) in groups.iter().zip(&results) {
        let path = a.out.join(format!("{seq}.txt"));
        detio::write_results(&path, rows).map_err(CliError::data)?;
        outputs.push(display(&path));
        if a.dump_trajectories {
            let csv = a.out.join(format!("{seq}_traj.csv"));
            write_file(&csv, &trajectory_csv(rows))?;
            outputs.push(display(&csv));
        }
    }

    let mut config = serde_json::to_value(cfg).map_err(CliError::data)?;
    config["sensor_frame"] = serde_json::Value::Bool(a.sensor_frame);
    write_manifest(
        &a.out,
        &RunManifest {
            command: "track".into(),
            args: args.to_vec(),
            config,
            inputs: std::iter::once(&a.pairs).chain(a.config.as_ref()).map(|p| display(p)).collect(),
            outputs,
            rng_seed: None,
            wall_time_seconds: started.elapsed().as_secs_f64(),
            version: env!("CARGO_PKG_VERSION").into(),
        },
    )?;
    eprintln!("tracked {} sequence(s) into {}", groups.len(), a.out.display());
    Ok(())
}

fn evaluate(a: &EvaluateArgs, args: &[String]) -> Result<(), CliError> {
    let started = Instant::now();
    let cfg = EvalConfig {
        iou_min: a.iou_threshold,
        recall_points: a.l_points,
        clamp_mota: !a.no_clamp,
        warmup_frames: a.warmup_frames,
    };
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;

    let gt_files = detio::sequence_files(&a.gt).map_err(CliError::data)?;
    let hyp_files = detio::sequence_files(&a.results).map_err(CliError::data)?;
    let gt = gt_files
        .par_iter()
        .map(|(seq, p)| detio::read_kitti_labels(p).map(|v| (seq.clone(), v)).map_err(|e| format!("{}: {e}", p.display())))
        .collect::<Result<BTreeMap<_, _>, _>>()
        .map_err(CliError::Data)?;
    let hyp = hyp_files
        .par_iter()
        .map(|(seq, p)| detio::read_results(p).map(|v| (seq.clone(), v)).map_err(|e| format!("{}: {e}", p.display())))
        .collect::<Result<BTreeMap<_, _>, _>>()
        .map_err(CliError::Data)?;
    let seqs = metrics::pair_sequences(gt, hyp).map_err(CliError::data)?;
    let report = metrics::evaluate(&seqs, &cfg).map_err(CliError::data)?;

    let table = report.to_table();
    let json = report.to_json();
    print!("{table}");
    print!("{json}");

    if let Some(out) = &a.out {
        create_dir(out)?;
        let table_path = out.join("report.txt");
        let json_path = out.join("report.json");
        write_file(&table_path, &table)?;
        write_file(&json_path, &json)?;
        write_manifest(
            out,
            &RunManifest {
                command: "evaluate".into(),
                args: args.to_vec(),
                config: serde_json::to_value(cfg).map_err(CliError::data)?,
                inputs: vec![display(&a.gt), display(&a.results)],
                outputs: vec![display(&table_path), display(&json_path)],
                rng_seed: None,
                wall_time_seconds: started.elapsed().as_secs_f64(),
                version: env!("CARGO_PKG_VERSION").into(),
            },
        )?;
    }
    Ok(())
}
