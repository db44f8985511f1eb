//! Subcommand dispatch. Exit codes: 0 success, 1 runtime failure, 2 usage error.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use spg_core::geometry::{build_knn_graph, Aabb, PointCloud};
use spg_core::losses::gradcheck_suite;
use spg_core::metrics::{Category, EvalAccumulator, EvalReport, EvalSample, Stratum};
use spg_core::oversegment::{oversegment, OversegmentParams};
use spg_core::pipeline::{bench, fmt_sig, run_pipeline, ExecMode, MaskBranch, PipelineConfig, SyntheticDelays};
use spg_core::scene::synthetic_room;

use crate::formats::{parse_ground_truth, parse_prediction, parse_scene, write_labels, write_prediction, Prediction};

pub const SEED_ENV: &str = "SPG_SEED";

#[derive(Debug, Parser)]
#[command(name = "spg", version, about = "Superpoint mask branch toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Split a scene into superpoints and print one label per point.
    Oversegment {
        scene: PathBuf,
        #[command(flatten)]
        params: SegmentArgs,
        /// Write labels here instead of stdout.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Run the two-lane pipeline on a scene and emit the referent prediction.
    Infer(InferArgs),
    /// Score a directory of `<id>.pred` files against a ground-truth file.
    Eval {
        pred_dir: PathBuf,
        gt_file: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "0.25,0.5")]
        thresholds: Vec<f64>,
        /// Print the report as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Time both execution modes on a seeded synthetic room.
    Bench(BenchArgs),
    /// Compare analytic loss gradients with central differences.
    Gradcheck {
        #[arg(long, default_value_t = 1e-5)]
        eps: f64,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        /// Largest acceptable relative error.
        #[arg(long, default_value_t = 1e-4)]
        tolerance: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Debug, Args)]
struct SegmentArgs {
    #[arg(long, default_value_t = 8)]
    knn: usize,
    #[arg(long, default_value_t = 0.05)]
    threshold: f64,
    #[arg(long, default_value_t = 20)]
    min_size: usize,
    /// Add color distance to the edge weights.
    #[arg(long)]
    color: bool,
    #[arg(long, default_value_t = 1.0)]
    color_weight: f64,
}

impl SegmentArgs {
    fn params(&self) -> OversegmentParams {
        OversegmentParams {
            k_nn: self.knn,
            merge_threshold: self.threshold,
            min_segment_size: self.min_size,
            use_color: self.color,
            color_weight: self.color_weight,
        }
    }
}

#[derive(Debug, Args)]
struct InferArgs {
    scene: PathBuf,
    #[arg(long, default_value_t = 1024)]
    tokens: usize,
    #[arg(long, default_value_t = 256)]
    queries: usize,
    #[arg(long, default_value_t = 32)]
    dim: usize,
    #[arg(long, default_value_t = 0.2)]
    radius: f64,
    #[arg(long, default_value_t = 2)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = ExecMode::Parallel)]
    mode: ExecMode,
    /// Predict masks by interpolating every point instead of via superpoints.
    #[arg(long)]
    dense_baseline: bool,
    #[arg(long, default_value_t = 0.5)]
    mask_threshold: f64,
    #[command(flatten)]
    segment: SegmentArgs,
    /// Write the prediction here; timing then goes to stdout alone.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Print timing as a JSON object.
    #[arg(long)]
    json: bool,
}

#[derive(Debug, Args)]
struct BenchArgs {
    /// Per-stage minimum wall times `lane_a,lane_b,tail` in ms, or `none`.
    #[arg(long, default_value = "180,172,36")]
    delays: String,
    #[arg(long, default_value_t = 20)]
    reps: usize,
    /// Benchmark only this mode (default: both).
    #[arg(long)]
    mode: Option<ExecMode>,
    /// Points in the synthetic room.
    #[arg(long, default_value_t = 4000)]
    points: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Use this scene instead of a synthetic room.
    #[arg(long)]
    scene: Option<PathBuf>,
    #[arg(long)]
    json: bool,
}

enum Failure {
    Usage(String),
    Runtime(String),
}

impl<E: std::fmt::Display> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Runtime(e.to_string())
    }
}

type Outcome = Result<(), Failure>;

/// Runs `spg` with the given argv (program name first) and returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let text = e.render().to_string();
            let _ = if code == 0 { write!(out, "{text}") } else { write!(err, "{text}") };
            return code;
        }
    };
    match dispatch(cli.command, out) {
        Ok(()) => 0,
        Err(Failure::Usage(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            2
        }
        Err(Failure::Runtime(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            1
        }
    }
}

/// `SPG_SEED`, when set, wins over `--seed`.
fn resolve_seed(flag: u64) -> Result<u64, Failure> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| Failure::Usage(format!("{SEED_ENV} must be an unsigned integer, got '{v}'"))),
        Err(_) => Ok(flag),
    }
}

fn read_scene(path: &Path) -> Result<PointCloud, Failure> {
    let bytes = std::fs::read(path).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))?;
    parse_scene(&bytes).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))
}

fn emit(text: &str, output: Option<&Path>, out: &mut dyn Write) -> Outcome {
    match output {
        Some(path) => std::fs::write(path, text).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display()))),
        None => Ok(out.write_all(text.as_bytes())?),
    }
}

fn dispatch(command: Command, out: &mut dyn Write) -> Outcome {
    match command {
        Command::Oversegment { scene, params, output } => {
            let cloud = read_scene(&scene)?;
            let params = params.params();
            params.validate().map_err(|e| Failure::Usage(e.to_string()))?;
            let graph = build_knn_graph(&cloud, params.k_nn)?;
            let partition = oversegment(&cloud, &params, &graph)?;
            emit(&write_labels(partition.labels()), output.as_deref(), out)?;
            if output.is_some() {
                writeln!(out, "points {} superpoints {}", partition.num_points(), partition.num_segments())?;
            }
            Ok(())
        }
        Command::Infer(args) => infer(args, out),
        Command::Eval {
            pred_dir,
            gt_file,
            thresholds,
            json,
        } => eval(&pred_dir, &gt_file, &thresholds, json, out),
        Command::Bench(args) => run_bench(args, out),
        Command::Gradcheck {
            eps,
            trials,
            tolerance,
            seed,
        } => {
            if trials == 0 {
                return Err(Failure::Usage("--trials must be at least 1".into()));
            }
            let report = gradcheck_suite(trials, eps, resolve_seed(seed)?).map_err(|e| Failure::Usage(e.to_string()))?;
            let mut failed = Vec::new();
            for (name, worst) in report.entries() {
                let ok = worst < tolerance;
                writeln!(out, "{} {name} max_rel_err {}", if ok { "PASS" } else { "FAIL" }, fmt_sig(worst))?;
                if !ok {
                    failed.push(name);
                }
            }
            if failed.is_empty() {
                Ok(())
            } else {
                Err(Failure::Runtime(format!("gradient check failed for {}", failed.join(", "))))
            }
        }
    }
}

fn infer(args: InferArgs, out: &mut dyn Write) -> Outcome {
    let cloud = read_scene(&args.scene)?;
    let config = PipelineConfig {
        num_tokens: args.tokens,
        dim: args.dim,
        num_queries: args.queries,
        radius: args.radius,
        samples: args.samples,
        oversegment: args.segment.params(),
        seed: resolve_seed(args.seed)?,
        delays: None,
        mode: args.mode,
        branch: if args.dense_baseline {
            MaskBranch::Dense
        } else {
            MaskBranch::Superpoint
        },
        mask_threshold: args.mask_threshold,
    };
    config.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    let result = run_pipeline(&cloud, &config)?;
    let prediction = Prediction {
        bbox: result.referent.bbox.to_array(),
        score: result.referent.score,
        mask: result.referent.mask.clone(),
    };
    emit(&write_prediction(&prediction), args.output.as_deref(), out)?;
    if args.json {
        writeln!(out, "{}", result.timing.to_json())?;
    } else {
        writeln!(out, "{}", result.timing)?;
    }
    Ok(())
}

fn parse_delays(text: &str) -> Result<Option<SyntheticDelays>, Failure> {
    if text == "none" {
        return Ok(None);
    }
    let parts: Vec<f64> = text
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| Failure::Usage(format!("--delays expects three comma-separated numbers, got '{text}'")))?;
    match parts[..] {
        [a, b, t] => Ok(Some(SyntheticDelays {
            lane_a_ms: a,
            lane_b_ms: b,
            tail_ms: t,
        })),
        _ => Err(Failure::Usage(format!("--delays expects three values, got {}", parts.len()))),
    }
}

fn run_bench(args: BenchArgs, out: &mut dyn Write) -> Outcome {
    let delays = parse_delays(&args.delays)?;
    if args.reps == 0 {
        return Err(Failure::Usage("--reps must be at least 1".into()));
    }
    let seed = resolve_seed(args.seed)?;
    let cloud = match &args.scene {
        Some(path) => read_scene(path)?,
        None => synthetic_room(args.points, 4, seed)?.cloud,
    };
    let modes = match args.mode {
        Some(m) => vec![m],
        None => vec![ExecMode::Parallel, ExecMode::Serial],
    };
    let base = PipelineConfig {
        num_tokens: 1024.min(cloud.len()),
        num_queries: 256.min(cloud.len()),
        seed,
        delays,
        ..Default::default()
    };
    base.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    let mut reports = Vec::new();
    for mode in modes {
        reports.push(bench(&cloud, &PipelineConfig { mode, ..base }, args.reps)?);
    }
    if args.json {
        writeln!(out, "{}", serde_json::to_string(&reports)?)?;
    } else {
        for (i, r) in reports.iter().enumerate() {
            if i > 0 {
                writeln!(out)?;
            }
            write!(out, "{r}")?;
        }
    }
    Ok(())
}

fn eval(pred_dir: &Path, gt_file: &Path, thresholds: &[f64], json: bool, out: &mut dyn Write) -> Outcome {
    let gt_text = std::fs::read_to_string(gt_file).map_err(|e| Failure::Runtime(format!("{}: {e}", gt_file.display())))?;
    let records = parse_ground_truth(&gt_text).map_err(|e| Failure::Runtime(format!("{}: {e}", gt_file.display())))?;
    if records.is_empty() {
        return Err(Failure::Runtime(format!("{}: no samples", gt_file.display())));
    }
    let mut acc = EvalAccumulator::new(thresholds).map_err(|e| Failure::Usage(e.to_string()))?;
    for r in &records {
        let path = pred_dir.join(format!("{}.pred", r.id));
        let text = std::fs::read_to_string(&path).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))?;
        let pred = parse_prediction(&text).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))?;
        if pred.mask.len() != r.mask.len() {
            return Err(Failure::Runtime(format!(
                "{}: mask covers {} points, ground truth has {}",
                path.display(),
                pred.mask.len(),
                r.mask.len()
            )));
        }
        let pred_box = Aabb::from_array(pred.bbox).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))?;
        let gt_box = Aabb::from_array(r.bbox).map_err(|e| Failure::Runtime(format!("{}: sample {}: {e}", gt_file.display(), r.id)))?;
        acc.push(&EvalSample {
            pred_mask: pred.mask,
            gt_mask: r.mask.clone(),
            pred_box,
            gt_box,
            category: r.category,
        })?;
    }
    let report = acc.finish()?;
    if json {
        writeln!(out, "{}", serde_json::to_string(&report)?)?;
    } else {
        write!(out, "{}", render_table(&report))?;
    }
    Ok(())
}

/// Accuracy per stratum and threshold, then overall mIoU, all in percent.
pub fn render_table(report: &EvalReport) -> String {
    let total = report.overall.count as f64;
    let width = 9 * report.thresholds.len();
    let mut head = format!("{:<8}", "");
    let mut sub = format!("{:<8}", "");
    let mut row = format!("{:<8}", "spg");
    let strata: Vec<(String, Option<&Stratum>)> = Category::ALL
        .iter()
        .map(|&c| {
            let s = report.stratum(c);
            let share = s.map_or(0.0, |s| 100.0 * s.count as f64 / total);
            let mut name = c.to_string();
            name[..1].make_ascii_uppercase();
            (format!("{name}({}%)", fmt_sig(round2(share))), s)
        })
        .chain([("Overall".to_string(), Some(&report.overall))])
        .collect();
    for (title, stratum) in &strata {
        let _ = write!(head, "| {title:<width$}");
        let _ = write!(sub, "| ");
        let _ = write!(row, "| ");
        for &t in &report.thresholds {
            let _ = write!(sub, "{:<9}", fmt_sig(t));
            let cell = stratum.and_then(|s| s.acc_at(t)).map_or("-".to_string(), percent);
            let _ = write!(row, "{cell:<9}");
        }
    }
    let _ = write!(head, "| ");
    let _ = write!(sub, "| mIoU");
    let _ = write!(row, "| {}", percent(report.overall.miou));
    let mut table = format!("{}\n{}\n{}\n", head.trim_end(), sub.trim_end(), row.trim_end());
    for (title, stratum) in &strata {
        if let Some(s) = stratum {
            let _ = writeln!(table, "{title}: samples {} mIoU {}", s.count, percent(s.miou));
        }
    }
    table
}

fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

fn percent(x: f64) -> String {
    format!("{:.2}", 100.0 * x)
}
