//! Two-lane executor for the superpoint mask branch.
//!
//! Lane A (CPU role) builds the k-NN graph and oversegments the scene. Lane B
//! (accelerator role) produces tokens and selects queries. Both lanes take
//! shared references to the immutable input and return owned results; the
//! join then runs superpoint query, mask prediction, upsampling and referent
//! selection.
//!
//! Optional synthetic delays pad each stage to a fixed minimum wall time so
//! the overlap structure can be measured independently of host speed.

use std::fmt;
use std::str::FromStr;
use std::thread;
use std::time::{Duration, Instant};

use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::geometry::{build_knn_graph, PointCloud};
use crate::grounding::{
    dense_branch_flops, dense_mask_baseline, predict_masks, produce_tokens, select_queries,
    select_referent, superpoint_branch_flops, superpoint_embeddings, upsample_mask, BranchShape,
    MaskPrediction, MlpParams, QuerySet, Referent,
};
use crate::oversegment::{oversegment, OversegmentParams, SuperpointPartition};

const MLP_STREAM: u64 = 0x0a11_ce55_u64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ExecMode {
    #[default]
    Parallel,
    Serial,
}

impl fmt::Display for ExecMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ExecMode::Parallel => "parallel",
            ExecMode::Serial => "serial",
        })
    }
}

impl FromStr for ExecMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "parallel" => Ok(ExecMode::Parallel),
            "serial" => Ok(ExecMode::Serial),
            other => Err(format!("unknown mode `{other}` (expected parallel or serial)")),
        }
    }
}

/// Which mask head runs at the join.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MaskBranch {
    #[default]
    Superpoint,
    /// Full-resolution interpolation baseline; lane A then only idles.
    Dense,
}

/// Minimum wall time per stage, in milliseconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticDelays {
    pub lane_a_ms: f64,
    pub lane_b_ms: f64,
    pub tail_ms: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub num_tokens: usize,
    pub dim: usize,
    pub num_queries: usize,
    pub radius: f64,
    pub samples: usize,
    pub oversegment: OversegmentParams,
    pub seed: u64,
    pub delays: Option<SyntheticDelays>,
    pub mode: ExecMode,
    pub branch: MaskBranch,
    pub mask_threshold: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            num_tokens: 1024,
            dim: 32,
            num_queries: 256,
            radius: 0.2,
            samples: 2,
            oversegment: OversegmentParams::default(),
            seed: 0,
            delays: None,
            mode: ExecMode::Parallel,
            branch: MaskBranch::Superpoint,
            mask_threshold: 0.5,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_tokens == 0 || self.dim == 0 || self.num_queries == 0 || self.samples == 0 {
            return Err(invalid("pipeline counts", "tokens, dim, queries and samples must be positive"));
        }
        if self.num_queries > self.num_tokens {
            return Err(Error::SampleTooLarge {
                requested: self.num_queries,
                available: self.num_tokens,
            });
        }
        crate::geometry::check_ball_params(self.radius, self.samples)?;
        if let Some(d) = self.delays {
            if [d.lane_a_ms, d.lane_b_ms, d.tail_ms]
                .iter()
                .any(|v| !(v.is_finite() && *v >= 0.0))
            {
                return Err(invalid("delays", "must be finite and nonnegative"));
            }
        }
        self.oversegment.validate()
    }
}

/// Wall-clock milliseconds per stage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TimingReport {
    pub lane_a_ms: f64,
    pub lane_b_ms: f64,
    pub tail_ms: f64,
    pub total_ms: f64,
    pub mode: ExecMode,
}

impl TimingReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("timing report serializes")
    }

    /// `(total − tail) / max(lane_a, lane_b)`; 1.0 means perfect overlap.
    pub fn overhead_ratio(&self) -> f64 {
        (self.total_ms - self.tail_ms) / self.lane_a_ms.max(self.lane_b_ms)
    }
}

impl fmt::Display for TimingReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "mode {}", self.mode)?;
        writeln!(f, "lane_a_ms {}", fmt_sig(self.lane_a_ms))?;
        writeln!(f, "lane_b_ms {}", fmt_sig(self.lane_b_ms))?;
        writeln!(f, "tail_ms {}", fmt_sig(self.tail_ms))?;
        write!(f, "total_ms {}", fmt_sig(self.total_ms))
    }
}

/// Formats with at most six significant digits, trailing zeros dropped.
pub fn fmt_sig(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let magnitude = x.abs().log10().floor() as i32;
    if !(-4..15).contains(&magnitude) {
        let s = format!("{x:.5e}");
        let (mantissa, exp) = s.split_once('e').expect("exponent form");
        let mantissa = mantissa.trim_end_matches('0').trim_end_matches('.');
        return format!("{mantissa}e{exp}");
    }
    let decimals = (5 - magnitude).max(0) as usize;
    let s = format!("{x:.decimals$}");
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOutput {
    pub referent: Referent,
    pub mask: MaskPrediction,
    pub queries: QuerySet,
    pub partition: Option<SuperpointPartition>,
    pub timing: TimingReport,
}

fn padded<T>(min_ms: Option<f64>, work: impl FnOnce() -> T) -> (T, f64) {
    let start = Instant::now();
    let out = work();
    if let Some(ms) = min_ms {
        let target = Duration::from_secs_f64(ms / 1000.0);
        let spent = start.elapsed();
        if spent < target {
            thread::sleep(target - spent);
        }
    }
    (out, start.elapsed().as_secs_f64() * 1000.0)
}

fn lane_a(cloud: &PointCloud, config: &PipelineConfig) -> Result<Option<SuperpointPartition>> {
    if config.branch == MaskBranch::Dense {
        return Ok(None);
    }
    let graph = build_knn_graph(cloud, config.oversegment.k_nn)?;
    oversegment(cloud, &config.oversegment, &graph).map(Some)
}

fn lane_b(cloud: &PointCloud, config: &PipelineConfig) -> Result<(crate::grounding::TokenSet, QuerySet)> {
    let tokens = produce_tokens(cloud, config.num_tokens, config.dim, config.seed)?;
    let queries = select_queries(&tokens, config.num_queries, config.seed)?;
    Ok((tokens, queries))
}

/// Runs both lanes (concurrently or back to back), then the join.
/// Numerical results do not depend on the mode.
pub fn run_pipeline(cloud: &PointCloud, config: &PipelineConfig) -> Result<PipelineOutput> {
    config.validate()?;
    let delays = config.delays;
    let start = Instant::now();
    let ((partition, a_ms), (lane_b_out, b_ms)) = match config.mode {
        ExecMode::Parallel => thread::scope(|scope| {
            let a = scope.spawn(|| padded(delays.map(|d| d.lane_a_ms), || lane_a(cloud, config)));
            let b = padded(delays.map(|d| d.lane_b_ms), || lane_b(cloud, config));
            let a = a.join().map_err(|_| Error::LanePanic("superpoint lane"))?;
            Ok::<_, Error>((a, b))
        })?,
        ExecMode::Serial => {
            let a = padded(delays.map(|d| d.lane_a_ms), || lane_a(cloud, config));
            let b = padded(delays.map(|d| d.lane_b_ms), || lane_b(cloud, config));
            (a, b)
        }
    };
    let partition = partition?;
    let (tokens, queries) = lane_b_out?;

    let params = MlpParams::seeded(config.dim, config.seed ^ MLP_STREAM);
    let (joined, tail_ms) = padded(delays.map(|d| d.tail_ms), || -> Result<_> {
        let mask = match &partition {
            Some(partition) => {
                let v_s = superpoint_embeddings(&tokens, partition, config.radius, config.samples)?;
                let m_s = predict_masks(v_s.view(), &queries, &params)?;
                upsample_mask(&m_s, partition)?
            }
            None => dense_mask_baseline(&tokens, cloud, &queries, &params)?,
        };
        let referent = select_referent(&mask, &queries, config.mask_threshold)?;
        Ok((mask, referent))
    });
    let (mask, referent) = joined?;
    let total_ms = start.elapsed().as_secs_f64() * 1000.0;
    Ok(PipelineOutput {
        referent,
        mask,
        queries,
        partition,
        timing: TimingReport {
            lane_a_ms: a_ms,
            lane_b_ms: b_ms,
            tail_ms,
            total_ms,
            mode: config.mode,
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Summary {
    pub median: f64,
    pub p95: f64,
}

impl Summary {
    /// Median (mean of the middle pair for even counts) and nearest-rank p95.
    pub fn of(values: &[f64]) -> Self {
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let n = v.len();
        if n == 0 {
            return Self {
                median: f64::NAN,
                p95: f64::NAN,
            };
        }
        let median = if n % 2 == 1 {
            v[n / 2]
        } else {
            0.5 * (v[n / 2 - 1] + v[n / 2])
        };
        let rank = ((0.95 * n as f64).ceil() as usize).clamp(1, n);
        Self {
            median,
            p95: v[rank - 1],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchReport {
    pub mode: ExecMode,
    pub repetitions: usize,
    pub lane_a_ms: Summary,
    pub lane_b_ms: Summary,
    pub tail_ms: Summary,
    pub total_ms: Summary,
    pub overhead_ratio: Summary,
    pub runs: Vec<TimingReport>,
}

impl fmt::Display for BenchReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "mode {} reps {}", self.mode, self.repetitions)?;
        writeln!(f, "{:<16} {:>10} {:>10}", "stage", "median", "p95")?;
        for (name, s) in [
            ("lane_a_ms", self.lane_a_ms),
            ("lane_b_ms", self.lane_b_ms),
            ("tail_ms", self.tail_ms),
            ("total_ms", self.total_ms),
            ("overhead_ratio", self.overhead_ratio),
        ] {
            writeln!(f, "{:<16} {:>10} {:>10}", name, fmt_sig(s.median), fmt_sig(s.p95))?;
        }
        Ok(())
    }
}

/// Repeats `run_pipeline` on the same input and summarizes the timings.
pub fn bench(cloud: &PointCloud, config: &PipelineConfig, repetitions: usize) -> Result<BenchReport> {
    if repetitions == 0 {
        return Err(invalid("repetitions", "must be at least 1"));
    }
    let runs = (0..repetitions)
        .map(|_| run_pipeline(cloud, config).map(|o| o.timing))
        .collect::<Result<Vec<_>>>()?;
    let pick = |f: fn(&TimingReport) -> f64| Summary::of(&runs.iter().map(f).collect::<Vec<_>>());
    Ok(BenchReport {
        mode: config.mode,
        repetitions,
        lane_a_ms: pick(|r| r.lane_a_ms),
        lane_b_ms: pick(|r| r.lane_b_ms),
        tail_ms: pick(|r| r.tail_ms),
        total_ms: pick(|r| r.total_ms),
        overhead_ratio: pick(TimingReport::overhead_ratio),
        runs,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FlopsReport {
    pub superpoint_branch: u64,
    pub dense_baseline: u64,
    pub ratio: f64,
}

/// Analytic operation counts of both mask branches at the configured sizes.
pub fn flops_report(config: &PipelineConfig, num_points: usize, num_superpoints: usize) -> FlopsReport {
    let shape = BranchShape {
        num_points: num_points as u64,
        num_tokens: config.num_tokens as u64,
        dim: config.dim as u64,
        num_queries: config.num_queries as u64,
        num_superpoints: num_superpoints as u64,
        samples: config.samples as u64,
    };
    let superpoint_branch = superpoint_branch_flops(&shape);
    let dense_baseline = dense_branch_flops(&shape);
    FlopsReport {
        superpoint_branch,
        dense_baseline,
        ratio: dense_baseline as f64 / superpoint_branch as f64,
    }
}
