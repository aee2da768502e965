//! The `dprp` command line.
//!
//! Exit codes: 0 on success, 1 if any video or check failed, 2 on an
//! invalid configuration.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use video_dprp::audit::bench::{complexity_bench, reference_video_ms, BenchAxis, BenchSize, REFERENCE_SECONDS_PER_VIDEO};
use video_dprp::audit::chi2::chi_square_tail_check;
use video_dprp::audit::dp::{dp_indistinguishability_check, DpAuditConfig, NeighborPair};
use video_dprp::audit::jl::{jl_dimension, jl_distortion_check};
use video_dprp::audit::sensitivity::{empirical_sensitivity, NeighborMode};
use video_dprp::audit::utility::{test_pattern, utility_sweep, Axis, AxisSweep, SweepMode};
use video_dprp::audit::{reports_to_csv, reports_to_json, AuditReport, Verdict};
use video_dprp::batch::run_dataset;
use video_dprp::calibration::PrivacyParams;
use video_dprp::error::DprpError;
use video_dprp::formats::load_video;
use video_dprp::mechanism::{MechanismOptions, NoiseMode};
use video_dprp::rng::trial_seed;
use video_dprp::video::{flatten, FrameShape, VideoTensor};

pub mod config;

use config::{ConfigError, ConfigFile, Resolver};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILED: i32 = 1;
pub const EXIT_INVALID: i32 = 2;

#[derive(Parser, Debug)]
#[command(name = "dprp", version, about = "Differentially private video transformation and audits")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Transform every video in a directory.
    Transform(TransformArgs),
    /// Reconstruction error over parameter grids.
    Sweep(SweepArgs),
    /// Run audit checks.
    Audit(AuditArgs),
    /// Wall-clock scaling benchmark.
    Bench(BenchArgs),
}

#[derive(Args, Debug, Default)]
struct Common {
    /// JSON config file; explicit flags override its keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed (falls back to the config file, then DPRP_SEED, then 0).
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Debug)]
struct TransformArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    b: Option<f64>,
    #[arg(long)]
    k: Option<usize>,
    /// Worker threads (defaults to the logical core count).
    #[arg(long)]
    parallelism: Option<usize>,
    /// Batch report path; a `.csv` twin is written next to it.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,
    /// Video to sweep; defaults to a 16-frame 64x48x3 test pattern.
    #[arg(long)]
    input: Option<PathBuf>,
    /// CSV output path; defaults to standard output.
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    epsilon: Vec<f64>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    b: Vec<f64>,
    #[arg(long)]
    k: Vec<usize>,
    /// Number of seeds per grid point.
    #[arg(long)]
    seeds: Option<usize>,
    /// Run the full mechanism per point instead of the shared fast path.
    #[arg(long)]
    exact: bool,
}

#[derive(Args, Debug)]
struct AuditArgs {
    #[command(flatten)]
    common: Common,
    /// jl, chi2, sensitivity, dp or all (repeatable).
    #[arg(long)]
    check: Vec<String>,
    /// JSON report path; a `.csv` twin is written next to it.
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    x: Option<f64>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    lambda: Option<f64>,
    /// Frame count for the jl and dp checks.
    #[arg(long)]
    frames: Option<usize>,
    /// Flattened frame dimension for the jl and sensitivity checks.
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    b: Option<f64>,
    /// Neighbor notion for the dp check: one-frame or one-pixel.
    #[arg(long)]
    mode: Option<String>,
    /// Force both noise scales to zero (dp negative control).
    #[arg(long)]
    zero_noise: bool,
}

#[derive(Args, Debug)]
struct BenchArgs {
    #[command(flatten)]
    common: Common,
    /// n, t, d or k (repeatable; defaults to n, t and k).
    #[arg(long)]
    axis: Vec<String>,
    /// Grid for a single --axis, e.g. --values 2,4,8.
    #[arg(long, value_delimiter = ',')]
    values: Vec<usize>,
    #[arg(long)]
    repeats: Option<usize>,
    /// CSV output path; defaults to standard output.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Also time one 16-frame 320x240x3 video at k = 3072.
    #[arg(long)]
    reference: bool,
}

enum Failure {
    Invalid(String),
    Runtime(String),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Self::Invalid(e.0)
    }
}

impl From<DprpError> for Failure {
    fn from(e: DprpError) -> Self {
        match e {
            DprpError::InvalidBudget(_) | DprpError::InvalidDimension(_) | DprpError::EmptyDataset => {
                Self::Invalid(e.to_string())
            }
            other => Self::Runtime(other.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Self::Runtime(e.to_string())
    }
}

type Outcome = Result<i32, Failure>;

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let outcome = match cli.command {
        Command::Transform(a) => transform(a),
        Command::Sweep(a) => sweep(a),
        Command::Audit(a) => audit(a),
        Command::Bench(a) => bench(a),
    };
    match outcome {
        Ok(code) => code,
        Err(Failure::Invalid(msg)) => {
            eprintln!("error: {msg}");
            eprintln!("run `dprp --help` for usage");
            EXIT_INVALID
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            EXIT_FAILED
        }
    }
}

fn default_parallelism() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

fn params(r: &mut Resolver, epsilon: Option<f64>, delta: Option<f64>, b: Option<f64>, k: Option<usize>, seed: u64) -> Result<PrivacyParams, Failure> {
    let epsilon = r.f64("epsilon", epsilon, None)?;
    let delta = r.f64("delta", delta, Some(1e-4))?;
    let b = r.f64("b", b, Some(0.8))?;
    let k = r.usize("k", k, Some(3072))?;
    Ok(PrivacyParams::new(epsilon, delta, b, k, seed)?)
}

fn write_or_print(path: Option<&Path>, text: &str) -> std::io::Result<()> {
    match path {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir)?;
            }
            fs::write(p, text)
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn transform(a: TransformArgs) -> Outcome {
    let file = ConfigFile::load(a.common.config.as_deref())?;
    let mut r = Resolver::new(&file);
    let input = r.path("input", a.input.as_deref())?.ok_or_else(|| Failure::Invalid("--input is required".into()))?;
    let output = r.path("output", a.output.as_deref())?.ok_or_else(|| Failure::Invalid("--output is required".into()))?;
    let seed = r.seed(a.common.seed)?;
    let params = params(&mut r, a.epsilon, a.delta, a.b, a.k, seed)?;
    let parallelism = r.usize("parallelism", a.parallelism, Some(default_parallelism()))?;
    let report_path = r.path("report", a.report.as_deref())?.unwrap_or_else(|| output.join("dprp-report.json"));
    if !input.is_dir() {
        return Err(Failure::Invalid(format!("input {} is not a directory", input.display())));
    }
    let report = run_dataset(&input, &output, &params, parallelism)?;

    let mut doc = serde_json::to_value(&report).map_err(|e| Failure::Runtime(e.to_string()))?;
    doc["config"] = r.config_json();
    doc["version"] = env!("CARGO_PKG_VERSION").into();
    let json = serde_json::to_string_pretty(&doc).map_err(|e| Failure::Runtime(e.to_string()))?;
    write_or_print(Some(&report_path), &json)?;
    let csv: String = r.header("transform").iter().map(|l| format!("# {l}\n")).collect::<String>() + &report.to_csv();
    write_or_print(Some(&report_path.with_extension("csv")), &csv)?;
    for v in &report.videos {
        eprintln!("{}: {} ({:.0} ms)", v.path, v.status, v.wall_ms);
    }
    Ok(if report.failures() == 0 { EXIT_OK } else { EXIT_FAILED })
}

fn sweep(a: SweepArgs) -> Outcome {
    let file = ConfigFile::load(a.common.config.as_deref())?;
    let mut r = Resolver::new(&file);
    let seed = r.seed(a.common.seed)?;
    let input = r.path("input", a.input.as_deref())?;
    let output = r.path("output", a.output.as_deref())?;
    let epsilons = r.f64_list("epsilon", &a.epsilon, None)?;
    let delta = r.f64("delta", a.delta, Some(1e-4))?;
    let bs = r.f64_list("b", &a.b, Some(vec![0.8]))?;
    let ks = r.usize_list("k", &a.k, Some(vec![3072]))?;
    let n_seeds = r.usize("seeds", a.seeds, Some(20))?;
    let exact = r.flag("exact", a.exact)?;
    if epsilons.is_empty() || bs.is_empty() || ks.is_empty() || n_seeds == 0 {
        return Err(Failure::Invalid("sweep grid is empty".into()));
    }
    let base = PrivacyParams::new(epsilons[0], delta, bs[0], ks[0], seed)?;
    let mut axes = Vec::new();
    if epsilons.len() > 1 {
        axes.push(AxisSweep::new(Axis::Epsilon, epsilons.clone(), base));
    }
    if ks.len() > 1 {
        axes.push(AxisSweep::new(Axis::K, ks.iter().map(|&k| k as f64).collect(), base));
    }
    if bs.len() > 1 {
        axes.push(AxisSweep::new(Axis::B, bs.clone(), base));
    }
    if axes.is_empty() {
        axes.push(AxisSweep::new(Axis::Epsilon, vec![epsilons[0]], base));
    }
    let video = match &input {
        Some(p) => load_video(p)?,
        None => test_pattern(16, FrameShape::new(64, 48, 3)?)?,
    };
    let seeds: Vec<u64> = (0..n_seeds as u64).map(|i| trial_seed(seed, i)).collect();
    let mode = if exact { SweepMode::Exact } else { SweepMode::Fast };
    let report = utility_sweep(&video, &axes, &seeds, mode)?;
    write_or_print(output.as_deref(), &report.to_csv(&r.header("sweep")))?;
    let failed = report.summaries.iter().any(|s| s.verdict == Some(Verdict::Fail));
    for s in &report.summaries {
        if let Some(v) = s.verdict {
            eprintln!("{} axis: {v}", s.axis.as_str());
        }
    }
    Ok(if failed { EXIT_FAILED } else { EXIT_OK })
}

const CHECKS: [&str; 4] = ["jl", "chi2", "sensitivity", "dp"];

fn audit(a: AuditArgs) -> Outcome {
    let file = ConfigFile::load(a.common.config.as_deref())?;
    let mut r = Resolver::new(&file);
    let seed = r.seed(a.common.seed)?;
    let selected = r.string_list("check", &a.check, &["all"])?;
    let mut checks = Vec::new();
    for c in &selected {
        match c.as_str() {
            "all" => checks.extend(CHECKS),
            c => match CHECKS.iter().find(|x| **x == c) {
                Some(x) => checks.push(*x),
                None => return Err(Failure::Invalid(format!("unknown check {c:?}; expected jl, chi2, sensitivity, dp or all"))),
            },
        }
    }
    let checks: Vec<&str> = CHECKS.into_iter().filter(|c| checks.contains(c)).collect();
    let output = r.path("output", a.output.as_deref())?;
    let k = match r.usize_list("k", &a.k.into_iter().collect::<Vec<_>>(), None)?.as_slice() {
        [] => None,
        [k] => Some(*k),
        _ => return Err(Failure::Invalid("k: expected a single value".into())),
    };
    let trials = r.usize("trials", a.trials, Some(100_000))? as u64;
    let mut reports: Vec<AuditReport> = Vec::new();

    for check in checks {
        match check {
            "jl" => {
                let t = r.usize("frames", a.frames, Some(64))?;
                let lambda = r.f64("lambda", a.lambda, Some(0.5))?;
                let d = r.usize("d", a.d, Some(1024))?;
                let k = k.unwrap_or_else(|| jl_dimension(t, lambda));
                let seeds: Vec<u64> = (0..20).map(|i| trial_seed(seed, i)).collect();
                reports.push(jl_distortion_check(t, d, k, lambda, &seeds)?);
            }
            "chi2" => {
                let x = r.f64("x", a.x, Some(10f64.ln()))?;
                reports.push(chi_square_tail_check(k.unwrap_or(10), x, trials, seed)?);
            }
            "sensitivity" => {
                let d = r.usize("d", a.d, Some(48))?;
                for mode in [NeighborMode::OnePixel, NeighborMode::OneFrame] {
                    reports.push(empirical_sensitivity(d, k.unwrap_or(12), mode, 255.0, trials.min(10_000), seed)?);
                }
            }
            "dp" => {
                let t = r.usize("frames", a.frames, Some(8))?;
                let params = PrivacyParams::new(
                    r.f64("epsilon", a.epsilon, Some(0.7))?,
                    r.f64("delta", a.delta, Some(1e-4))?,
                    r.f64("b", a.b, Some(0.8))?,
                    k.unwrap_or(12),
                    seed,
                )?;
                let mode = r.string_list("mode", &a.mode.iter().cloned().collect::<Vec<_>>(), &["one-frame"])?;
                let zero = r.flag("zero_noise", a.zero_noise)?;
                let shape = FrameShape::new(4, 4, 3)?;
                let pair = match mode.first().map(String::as_str) {
                    Some("one-frame") => NeighborPair::desk_default(t, shape)?,
                    Some("one-pixel") => {
                        let base = flatten(&VideoTensor::zeros(t, shape)?);
                        NeighborPair::one_pixel(base, 0, 0, 255.0)?
                    }
                    other => return Err(Failure::Invalid(format!("unknown mode {other:?}"))),
                };
                let options = MechanismOptions { noise: if zero { NoiseMode::Disabled } else { NoiseMode::Calibrated }, ..Default::default() };
                let config = DpAuditConfig { trials, seed, options, ..Default::default() };
                reports.push(dp_indistinguishability_check(&pair, &params, &config)?);
            }
            _ => unreachable!(),
        }
    }
    let json = reports_to_json(&reports, r.config_json())?;
    match &output {
        Some(p) => {
            write_or_print(Some(p), &json)?;
            write_or_print(Some(&p.with_extension("csv")), &reports_to_csv(&reports, &r.header("audit")))?;
        }
        None => print!("{}", reports_to_csv(&reports, &r.header("audit"))),
    }
    for rep in &reports {
        eprintln!("{}: {}", rep.check, rep.verdict);
    }
    Ok(if reports.iter().any(|r| r.verdict.is_fail()) { EXIT_FAILED } else { EXIT_OK })
}

fn bench(a: BenchArgs) -> Outcome {
    let file = ConfigFile::load(a.common.config.as_deref())?;
    let mut r = Resolver::new(&file);
    let seed = r.seed(a.common.seed)?;
    let axes = r.string_list("axis", &a.axis, &["n", "t", "k"])?;
    let values = r.usize_list("values", &a.values, None)?;
    let repeats = r.usize("repeats", a.repeats, Some(3))?;
    let output = r.path("output", a.output.as_deref())?;
    let reference = r.flag("reference", a.reference)?;
    if !values.is_empty() && axes.len() != 1 {
        return Err(Failure::Invalid("--values needs exactly one --axis".into()));
    }
    let mut csv = String::new();
    let mut failed = false;
    for (i, name) in axes.iter().enumerate() {
        let (axis, default_values, base) = match name.as_str() {
            "n" => (BenchAxis::N, vec![2, 4, 8], BenchSize { videos: 2, frames: 16, shape: FrameShape::new(64, 48, 3)?, k: 256 }),
            "t" => (BenchAxis::T, vec![1024, 2048, 4096], BenchSize { videos: 1, frames: 1024, shape: FrameShape::new(64, 32, 1)?, k: 32 }),
            "d" => (BenchAxis::D, vec![4096, 8192, 16384], BenchSize { videos: 1, frames: 256, shape: FrameShape::new(4096, 1, 1)?, k: 32 }),
            "k" => (BenchAxis::K, vec![256, 512, 1024], BenchSize { videos: 1, frames: 8, shape: FrameShape::new(64, 32, 1)?, k: 256 }),
            other => return Err(Failure::Invalid(format!("unknown axis {other:?}; expected n, t, d or k"))),
        };
        let grid = if values.is_empty() { default_values } else { values.clone() };
        if grid.len() < 3 || grid.contains(&0) {
            return Err(Failure::Invalid(format!("axis {name} needs at least three positive values")));
        }
        let result = complexity_bench(axis, &grid, base, repeats, seed)?;
        let slope = result.report.stat_value("slope").unwrap_or(f64::NAN);
        eprintln!("{name} axis: slope {slope:.3} {}", result.report.verdict);
        failed |= result.report.verdict.is_fail();
        let header = if i == 0 { r.header("bench") } else { Vec::new() };
        let body = result.to_csv(&header);
        csv.push_str(if i == 0 { &body } else { body.split_once('\n').map(|x| x.1).unwrap_or("") });
    }
    if reference {
        let ms = reference_video_ms(seed)?;
        eprintln!("reference video: {:.2} s (published reference {REFERENCE_SECONDS_PER_VIDEO} s, hardware dependent)", ms / 1e3);
        csv.push_str(&format!("# reference_video_s {:.3} published {REFERENCE_SECONDS_PER_VIDEO}\n", ms / 1e3));
    }
    write_or_print(output.as_deref(), &csv)?;
    Ok(if failed { EXIT_FAILED } else { EXIT_OK })
}
