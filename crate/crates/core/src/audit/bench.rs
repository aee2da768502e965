//! Wall-clock scaling of the mechanism.
//!
//! Each axis varies one of `n` (videos per dataset), `T`, `d` or `k` with
//! the others fixed, records the minimum over repeats, and fits the slope of
//! `log time` against `log value`. The `n` axis runs [`run_dataset`] on
//! temporary directories; the others time [`run_video_dprp`] directly.
//!
//! [`run_dataset`]: crate::batch::run_dataset
//! [`run_video_dprp`]: crate::mechanism::run_video_dprp

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::audit::{stats, AuditReport, Verdict};
use crate::batch;
use crate::calibration::PrivacyParams;
use crate::error::{DprpError, Result};
use crate::formats;
use crate::mechanism;
use crate::audit::utility::test_pattern;
use crate::video::FrameShape;

/// Per-video time reported by the original authors, in seconds, for a
/// 16-frame 320×240×3 video at `k = 3072`. Informational only.
pub const REFERENCE_SECONDS_PER_VIDEO: f64 = 20.32;

/// Allowed distance of the `n`, `T` and `d` slopes from 1.
pub const LINEAR_SLOPE_TOLERANCE: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BenchAxis {
    N,
    T,
    D,
    K,
}

impl BenchAxis {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::N => "n",
            Self::T => "t",
            Self::D => "d",
            Self::K => "k",
        }
    }
}

/// The fixed dimensions of a bench axis. On the `d` axis the value is the
/// frame width, with height 1 and one channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BenchSize {
    pub videos: usize,
    pub frames: usize,
    pub shape: FrameShape,
    pub k: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchPoint {
    pub axis: BenchAxis,
    pub n: usize,
    pub t: usize,
    pub d: usize,
    pub k: usize,
    /// Minimum over repeats.
    pub wall_ms: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchResult {
    pub points: Vec<BenchPoint>,
    pub report: AuditReport,
}

impl BenchResult {
    pub fn to_csv(&self, header: &[String]) -> String {
        let mut out: String = header.iter().map(|l| format!("# {l}\n")).collect();
        out.push_str("axis,n,t,d,k,wall_ms\n");
        for p in &self.points {
            out.push_str(&format!("{},{},{},{},{},{:.3}\n", p.axis.as_str(), p.n, p.t, p.d, p.k, p.wall_ms));
        }
        out
    }
}

fn size_at(axis: BenchAxis, base: BenchSize, value: usize) -> Result<BenchSize> {
    let mut s = base;
    match axis {
        BenchAxis::N => s.videos = value,
        BenchAxis::T => s.frames = value,
        BenchAxis::D => s.shape = FrameShape::new(value as u32, 1, 1)?,
        BenchAxis::K => s.k = value,
    }
    Ok(s)
}

fn time_once(axis: BenchAxis, size: BenchSize, params: &PrivacyParams) -> Result<f64> {
    let video = test_pattern(size.frames, size.shape)?;
    if axis == BenchAxis::N {
        let input = tempfile::tempdir()?;
        let output = tempfile::tempdir()?;
        for i in 0..size.videos {
            formats::store_video(&video, &input.path().join(format!("v{i:04}.vdt")))?;
        }
        let start = Instant::now();
        let report = batch::run_dataset(input.path(), output.path(), params, 1)?;
        let ms = start.elapsed().as_secs_f64() * 1e3;
        if report.failures() > 0 {
            return Err(DprpError::NumericalFailure(format!("{} bench videos failed", report.failures())));
        }
        Ok(ms)
    } else {
        let start = Instant::now();
        mechanism::run_video_dprp(&video, params)?;
        Ok(start.elapsed().as_secs_f64() * 1e3)
    }
}

/// Times `values` along `axis` around `base`. Needs at least three values.
pub fn complexity_bench(
    axis: BenchAxis,
    values: &[usize],
    base: BenchSize,
    repeats: usize,
    seed: u64,
) -> Result<BenchResult> {
    if values.len() < 3 || values.contains(&0) || repeats == 0 {
        return Err(DprpError::InvalidDimension(format!(
            "bench axis {} needs at least three positive values and one repeat",
            axis.as_str()
        )));
    }
    let mut points = Vec::with_capacity(values.len());
    for &v in values {
        let size = size_at(axis, base, v)?;
        let params = PrivacyParams::new(2.0, 1e-4, 0.8, size.k, seed)?;
        let mut best = f64::INFINITY;
        for _ in 0..repeats {
            best = best.min(time_once(axis, size, &params)?);
        }
        points.push(BenchPoint { axis, n: size.videos, t: size.frames, d: size.shape.dim(), k: size.k, wall_ms: best });
    }
    let xs: Vec<f64> = values.iter().map(|&v| v as f64).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.wall_ms).collect();
    let slope = stats::log_log_slope(&xs, &ys);
    let mut report = AuditReport::new(&format!("bench-{}", axis.as_str()), seed, repeats as u64)
        .param("axis", axis.as_str())
        .param("values", values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" "))
        .param("n", base.videos)
        .param("t", base.frames)
        .param("d", base.shape.dim())
        .param("k", base.k)
        .stat("slope", slope);
    let (threshold, pass) = match axis {
        BenchAxis::K => (1.0, slope > 1.0),
        _ => (LINEAR_SLOPE_TOLERANCE, (slope - 1.0).abs() <= LINEAR_SLOPE_TOLERANCE),
    };
    report.threshold = threshold;
    report.verdict = Verdict::from_pass(pass);
    if axis == BenchAxis::N {
        let per_video = points.last().map(|p| p.wall_ms / p.n as f64).unwrap_or(f64::NAN);
        report = report.stat("ms_per_video", per_video).stat("reference_s_per_video", REFERENCE_SECONDS_PER_VIDEO);
    }
    Ok(BenchResult { points, report })
}

/// Single-run wall time of the reference configuration, in milliseconds.
pub fn reference_video_ms(seed: u64) -> Result<f64> {
    let video = test_pattern(16, FrameShape::new(320, 240, 3)?)?;
    let params = PrivacyParams::new(2.0, 1e-4, 0.8, 3072, seed)?;
    let start = Instant::now();
    mechanism::run_video_dprp(&video, &params)?;
    Ok(start.elapsed().as_secs_f64() * 1e3)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_short_grids() {
        let base = BenchSize { videos: 1, frames: 2, shape: FrameShape::new(4, 4, 1).unwrap(), k: 2 };
        assert!(complexity_bench(BenchAxis::N, &[1, 2], base, 1, 0).is_err());
        assert!(complexity_bench(BenchAxis::N, &[], base, 1, 0).is_err());
    }

    #[test]
    fn small_bench_runs() {
        let base = BenchSize { videos: 1, frames: 2, shape: FrameShape::new(4, 4, 1).unwrap(), k: 2 };
        let r = complexity_bench(BenchAxis::N, &[1, 2, 3], base, 1, 0).unwrap();
        assert_eq!(r.points.len(), 3);
        assert!(r.report.stat_value("slope").unwrap().is_finite());
        assert_eq!(r.to_csv(&[]).lines().count(), 4);
    }
}
