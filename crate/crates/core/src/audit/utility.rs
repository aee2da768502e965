//! Reconstruction error over grids of privacy parameters.
//!
//! Each [`AxisSweep`] varies one of `ε`, `k` or `b` around its own base
//! point. Points are evaluated for every seed, so a seed fixes the
//! projection and the noise draws across the whole grid and differences
//! between grid points are not masked by sampling noise.
//!
//! The fast evaluation uses `X̃ = P̃·R⁺`, which equals the mechanism output
//! because `Vᵗ·(R·Vᵗ)⁺ = Vᵗ·V·R⁺ = R⁺` for orthogonal `Vᵗ`. It skips the
//! `k × k` SVD and reuses `P = X·R`, the factorization of the Gram matrix of
//! `R` and the unit noise draws across every grid point sharing a seed and
//! `k`. [`SweepMode::Exact`] runs the full mechanism per point instead.

use std::collections::BTreeSet;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::audit::{stats, Verdict};
use crate::batch::csv_field;
use crate::calibration::{self, PrivacyParams};
use crate::error::{DprpError, Result};
use crate::mechanism::{self, ProjectedVideo};
use crate::rng::{self, StageSeeds};
use crate::video::{self, FlatVideo, FrameShape, VideoTensor};

/// Minimum number of seeds for a monotonicity verdict.
pub const MIN_VERDICT_SEEDS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    Epsilon,
    K,
    B,
}

impl Axis {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Epsilon => "epsilon",
            Self::K => "k",
            Self::B => "b",
        }
    }
}

/// One axis of a sweep, with the parameters held fixed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxisSweep {
    pub axis: Axis,
    /// Values for the swept parameter; `k` values are rounded to integers.
    pub values: Vec<f64>,
    pub base: PrivacyParams,
}

impl AxisSweep {
    pub fn new(axis: Axis, values: Vec<f64>, base: PrivacyParams) -> Self {
        Self { axis, values, base }
    }

    fn point(&self, value: f64, seed: u64) -> PrivacyParams {
        let mut p = self.base.with_seed(seed);
        match self.axis {
            Axis::Epsilon => p.epsilon = value,
            Axis::K => p.k = value.round() as usize,
            Axis::B => p.b = value,
        }
        p
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepMode {
    #[default]
    Fast,
    Exact,
}

/// One (grid point, seed) evaluation. `wall_ms` excludes setup shared
/// with other grid points in fast mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSample {
    pub axis: Axis,
    pub epsilon: f64,
    pub delta: f64,
    pub b: f64,
    pub k: usize,
    pub seed: u64,
    pub mse: f64,
    pub psnr: f64,
    pub wall_ms: f64,
}

/// Seed-averaged MSE per value of one axis, in ascending value order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxisSummary {
    pub axis: Axis,
    pub base: PrivacyParams,
    pub values: Vec<f64>,
    pub mean_mse: Vec<f64>,
    /// Strictly decreasing MSE, or `None` with fewer than two values or
    /// fewer than [`MIN_VERDICT_SEEDS`] seeds.
    pub verdict: Option<Verdict>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub samples: Vec<SweepSample>,
    pub summaries: Vec<AxisSummary>,
}

impl SweepReport {
    /// CSV with columns `kind, axis, epsilon, delta, b, k, seed, mse, psnr,
    /// wall_ms, verdict`; `kind` is `sample`, `mean` or `verdict`.
    pub fn to_csv(&self, header: &[String]) -> String {
        let mut out: String = header.iter().map(|l| format!("# {l}\n")).collect();
        out.push_str("kind,axis,epsilon,delta,b,k,seed,mse,psnr,wall_ms,verdict\n");
        for s in &self.samples {
            out.push_str(&format!(
                "sample,{},{},{},{},{},{},{},{},{:.3},\n",
                s.axis.as_str(),
                s.epsilon,
                s.delta,
                s.b,
                s.k,
                s.seed,
                s.mse,
                s.psnr,
                s.wall_ms
            ));
        }
        for sum in &self.summaries {
            for (v, m) in sum.values.iter().zip(&sum.mean_mse) {
                let p = sum_point(sum, *v);
                out.push_str(&format!(
                    "mean,{},{},{},{},{},,{},{},,\n",
                    sum.axis.as_str(),
                    p.epsilon,
                    p.delta,
                    p.b,
                    p.k,
                    m,
                    psnr(*m)
                ));
            }
            if let Some(v) = sum.verdict {
                out.push_str(&format!("verdict,{},,,,,,,,,{}\n", csv_field(sum.axis.as_str()), v));
            }
        }
        out
    }
}

fn sum_point(sum: &AxisSummary, value: f64) -> PrivacyParams {
    AxisSweep::new(sum.axis, vec![], sum.base).point(value, sum.base.seed)
}

/// `10·log10(255²/MSE)`.
pub fn psnr(mse: f64) -> f64 {
    10.0 * (255.0f64 * 255.0 / mse).log10()
}

/// Mean squared difference between two tensors of the same shape.
pub fn mse(a: &VideoTensor, b: &VideoTensor) -> f64 {
    let n = a.data().len() as f64;
    a.data().iter().zip(b.data()).map(|(&x, &y)| (f64::from(x) - f64::from(y)).powi(2)).sum::<f64>() / n
}

/// A smooth, slowly moving color pattern with values in `[30, 225]`.
pub fn test_pattern(frames: usize, shape: FrameShape) -> Result<VideoTensor> {
    let (w, h) = (shape.width as f64, shape.height as f64);
    VideoTensor::from_fn(frames, shape, |t, x, y, c| {
        let phase = t as f64 * 0.15 + c as f64 * 2.1;
        let u = (x as f64 / w * std::f64::consts::TAU + phase).sin();
        let v = (y as f64 / h * std::f64::consts::PI * 1.5 - phase * 0.5).cos();
        (127.5 + 97.5 * (0.6 * u + 0.4 * v)).round() as u8
    })
}

fn quantized_mse(input: &VideoTensor, x_tilde: faer::Mat<f64>, shape: FrameShape) -> Result<f64> {
    let out = video::reshape(&video::clamp_pixels(&FlatVideo::new(x_tilde, shape)?))?;
    Ok(mse(input, &out))
}

/// Evaluates every axis for every seed.
pub fn utility_sweep(video: &VideoTensor, axes: &[AxisSweep], seeds: &[u64], mode: SweepMode) -> Result<SweepReport> {
    if axes.is_empty() || axes.iter().any(|a| a.values.is_empty()) || seeds.is_empty() {
        return Err(DprpError::InvalidDimension("sweep needs a non-empty grid and at least one seed".into()));
    }
    let points: Vec<(usize, f64)> =
        axes.iter().enumerate().flat_map(|(i, a)| a.values.iter().map(move |&v| (i, v))).collect();
    for &(i, v) in &points {
        axes[i].point(v, 0).validate()?;
    }
    let flat = video::flatten(video);
    let shape = video.shape();
    let mut samples = Vec::with_capacity(points.len() * seeds.len());
    for &seed in seeds {
        let mut by_k: Vec<(usize, usize)> =
            points.iter().enumerate().map(|(idx, &(i, v))| (axes[i].point(v, seed).k, idx)).collect();
        by_k.sort();
        let ks: BTreeSet<usize> = by_k.iter().map(|e| e.0).collect();
        for k in ks {
            let stage = StageSeeds::derive(seed);
            let cache = match mode {
                SweepMode::Fast => {
                    let projected = ProjectedVideo::new(flat.values().as_ref(), k, stage.projection)?;
                    let z = mechanism::standard_normals(
                        flat.rows(),
                        k,
                        rng::PROJECTION_NOISE_STREAM,
                        stage.projection_noise,
                    );
                    Some((projected, z))
                }
                SweepMode::Exact => None,
            };
            for &(_, idx) in by_k.iter().filter(|e| e.0 == k) {
                let (i, v) = points[idx];
                let params = axes[i].point(v, seed);
                let start = Instant::now();
                let err = match &cache {
                    Some((projected, z)) => {
                        let sigma1 = calibration::calibrate(&params)?.sigma1;
                        let p_noisy = mechanism::add_scaled(projected.projection.as_ref(), sigma1, z.as_ref());
                        quantized_mse(video, projected.back_project(p_noisy.as_ref())?, shape)?
                    }
                    None => mse(video, &mechanism::run_video_dprp(video, &params)?),
                };
                samples.push((
                    idx,
                    SweepSample {
                        axis: axes[i].axis,
                        epsilon: params.epsilon,
                        delta: params.delta,
                        b: params.b,
                        k: params.k,
                        seed,
                        mse: err,
                        psnr: psnr(err),
                        wall_ms: start.elapsed().as_secs_f64() * 1e3,
                    },
                ));
            }
        }
    }
    samples.sort_by_key(|(idx, s)| (*idx, seeds.iter().position(|&x| x == s.seed)));
    let samples: Vec<SweepSample> = samples.into_iter().map(|(_, s)| s).collect();

    let summaries = axes
        .iter()
        .enumerate()
        .map(|(i, a)| {
            let mut values: Vec<f64> = a.values.clone();
            values.sort_by(f64::total_cmp);
            values.dedup();
            let offset: usize = axes[..i].iter().map(|a| a.values.len() * seeds.len()).sum();
            let own = &samples[offset..offset + a.values.len() * seeds.len()];
            let mean_mse: Vec<f64> = values
                .iter()
                .map(|&v| {
                    let target = a.point(v, 0);
                    let errs: Vec<f64> = own
                        .iter()
                        .filter(|s| s.epsilon == target.epsilon && s.b == target.b && s.k == target.k)
                        .map(|s| s.mse)
                        .collect();
                    stats::mean(&errs)
                })
                .collect();
            let verdict = (values.len() >= 2 && seeds.len() >= MIN_VERDICT_SEEDS)
                .then(|| Verdict::from_pass(mean_mse.windows(2).all(|w| w[1] < w[0])));
            AxisSummary { axis: a.axis, base: a.base, values, mean_mse, verdict }
        })
        .collect();
    Ok(SweepReport { samples, summaries })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base(k: usize) -> PrivacyParams {
        PrivacyParams::new(8.0, 1e-4, 0.8, k, 0).unwrap()
    }

    #[test]
    fn fast_mode_matches_full_mechanism() {
        let shape = FrameShape::new(6, 4, 3).unwrap();
        let v = test_pattern(4, shape).unwrap();
        let axes = [
            AxisSweep::new(Axis::Epsilon, vec![2.0, 50.0], base(20)),
            AxisSweep::new(Axis::K, vec![10.0, 90.0], base(20)),
        ];
        let fast = utility_sweep(&v, &axes, &[1, 2], SweepMode::Fast).unwrap();
        let exact = utility_sweep(&v, &axes, &[1, 2], SweepMode::Exact).unwrap();
        assert_eq!(fast.samples.len(), 8);
        for (f, e) in fast.samples.iter().zip(&exact.samples) {
            assert_eq!((f.epsilon, f.k, f.seed), (e.epsilon, e.k, e.seed));
            assert!((f.mse - e.mse).abs() <= 1e-3 * e.mse.max(1.0), "{f:?} vs {e:?}");
        }
        assert!(fast.summaries.iter().all(|s| s.verdict.is_none()));
    }

    #[test]
    fn single_point_has_no_verdict() {
        let shape = FrameShape::new(4, 4, 1).unwrap();
        let v = test_pattern(2, shape).unwrap();
        let r = utility_sweep(&v, &[AxisSweep::new(Axis::Epsilon, vec![2.0], base(4))], &[7], SweepMode::Fast).unwrap();
        let csv = r.to_csv(&[]);
        assert_eq!(csv.lines().filter(|l| l.starts_with("sample,")).count(), 1);
        assert_eq!(csv.lines().filter(|l| l.starts_with("verdict,")).count(), 0);
    }

    #[test]
    fn larger_budget_share_reduces_error() {
        let shape = FrameShape::new(8, 6, 3).unwrap();
        let v = test_pattern(4, shape).unwrap();
        let seeds: Vec<u64> = (0..5).collect();
        let r = utility_sweep(&v, &[AxisSweep::new(Axis::B, vec![0.2, 0.5, 0.8], base(40))], &seeds, SweepMode::Fast)
            .unwrap();
        assert_eq!(r.summaries[0].verdict, Some(Verdict::Pass));
        assert!(r.to_csv(&["cfg".into()]).contains("\nverdict,b,,,,,,,,,PASS\n"));
    }

    #[test]
    fn test_pattern_range() {
        let v = test_pattern(16, FrameShape::new(64, 48, 3).unwrap()).unwrap();
        assert!(v.data().iter().all(|&p| (30..=225).contains(&p)));
    }
}
