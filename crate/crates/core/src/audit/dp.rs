//! Histogram test of the `(ε, δ)` indistinguishability condition.
//!
//! The mechanism is run `trials` times on each of two neighboring videos
//! with independent seeds, and each output is reduced to a scalar. Pooled
//! samples are binned into equal-width bins, which are merged left to right
//! until each holds at least [`DpAuditConfig::min_bin_count`] samples. For
//! every bin `O` and both orderings of the pair, the lower Clopper–Pearson
//! bound of `Pr[M(X) ∈ O]` minus `δ`, divided by the upper bound of
//! `Pr[M(X′) ∈ O]`, must not exceed `e^ε`. Passing is necessary but not
//! sufficient for differential privacy.
//!
//! Two statistics are tested: a fixed random linear functional of the
//! pre-clamp output, and the output value at the perturbed location.

use faer::Mat;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::audit::sensitivity::NeighborMode;
use crate::audit::{stats, AuditReport, Verdict};
use crate::calibration::PrivacyParams;
use crate::error::{DprpError, Result};
use crate::mechanism::{self, MechanismOptions, NoiseMode};
use crate::rng;
use crate::video::{FlatVideo, FrameShape};

/// Two videos differing at a declared location.
#[derive(Debug, Clone)]
pub struct NeighborPair {
    base: FlatVideo,
    variant: FlatVideo,
    mode: NeighborMode,
    row: usize,
    col: Option<usize>,
}

impl NeighborPair {
    /// Checks that `base` and `variant` differ only in row `row` (and, in
    /// one-pixel mode, only at column `col`).
    pub fn new(base: FlatVideo, variant: FlatVideo, mode: NeighborMode, row: usize, col: Option<usize>) -> Result<Self> {
        if base.rows() != variant.rows() || base.cols() != variant.cols() || base.shape_tag() != variant.shape_tag() {
            return Err(DprpError::ShapeMismatch("neighbors must have identical shapes".into()));
        }
        if row >= base.rows() || col.is_some_and(|c| c >= base.cols()) {
            return Err(DprpError::ShapeMismatch(format!("location ({row}, {col:?}) is out of range")));
        }
        if (mode == NeighborMode::OnePixel) != col.is_some() {
            return Err(DprpError::ShapeMismatch("a column is required exactly in one-pixel mode".into()));
        }
        for i in 0..base.rows() {
            for j in 0..base.cols() {
                let inside = i == row && col.is_none_or(|c| c == j);
                let diff = (base.get(i, j) - variant.get(i, j)).abs();
                if !inside && diff != 0.0 {
                    return Err(DprpError::ShapeMismatch(format!("videos also differ at ({i}, {j})")));
                }
                if inside && diff > 255.0 {
                    return Err(DprpError::ShapeMismatch(format!("difference {diff} at ({i}, {j}) exceeds 255")));
                }
            }
        }
        Ok(Self { base, variant, mode, row, col })
    }

    /// Frame `row` of `base` replaced by `value` in every pixel.
    pub fn one_frame(base: FlatVideo, row: usize, value: f64) -> Result<Self> {
        let mut v = base.values().clone();
        for j in 0..v.ncols() {
            v[(row, j)] = value;
        }
        let variant = FlatVideo::new(v, base.shape_tag())?;
        Self::new(base, variant, NeighborMode::OneFrame, row, None)
    }

    /// Pixel `(row, col)` of `base` replaced by `value`.
    pub fn one_pixel(base: FlatVideo, row: usize, col: usize, value: f64) -> Result<Self> {
        let mut v = base.values().clone();
        v[(row, col)] = value;
        let variant = FlatVideo::new(v, base.shape_tag())?;
        Self::new(base, variant, NeighborMode::OnePixel, row, Some(col))
    }

    /// The desk-scale default: `T × d` zeros against the same video with
    /// frame 0 set to 255.
    pub fn desk_default(t: usize, shape: FrameShape) -> Result<Self> {
        Self::one_frame(FlatVideo::new(Mat::zeros(t, shape.dim()), shape)?, 0, 255.0)
    }

    pub fn base(&self) -> &FlatVideo {
        &self.base
    }

    pub fn variant(&self) -> &FlatVideo {
        &self.variant
    }

    pub fn mode(&self) -> NeighborMode {
        self.mode
    }

    /// L₂ norm of the difference in the changed row.
    pub fn row_difference_norm(&self) -> f64 {
        (0..self.base.cols())
            .map(|j| (self.base.get(self.row, j) - self.variant.get(self.row, j)).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    /// Pixel read by the location statistic: the declared column, or the
    /// first column of largest difference in one-frame mode.
    fn probe(&self) -> (usize, usize) {
        let col = self.col.unwrap_or_else(|| {
            let diff = |j: usize| (self.base.get(self.row, j) - self.variant.get(self.row, j)).abs();
            (0..self.base.cols()).fold(0, |best, j| if diff(j) > diff(best) { j } else { best })
        });
        (self.row, col)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DpAuditConfig {
    pub trials: u64,
    pub bins: usize,
    pub min_bin_count: u64,
    pub confidence: f64,
    pub seed: u64,
    pub options: MechanismOptions,
}

impl Default for DpAuditConfig {
    fn default() -> Self {
        Self { trials: 100_000, bins: 64, min_bin_count: 20, confidence: 0.99, seed: 0, options: MechanismOptions::default() }
    }
}

pub const MIN_TRIALS: u64 = 10_000;

/// Largest confidence-corrected ratio over merged bins of two samples.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistogramRatio {
    pub max_ratio: f64,
    /// Ratio of point estimates `(p̂_a − δ)/p̂_b` in the bin attaining `max_ratio`.
    pub point_ratio: f64,
    /// Pooled sample count of that bin.
    pub worst_bin_count: u64,
    pub bins: usize,
}

/// Bins `a` and `b` jointly and returns the worst
/// `(lower(p_a) − δ) / upper(p_b)` over bins and both orderings.
pub fn histogram_ratio(a: &[f64], b: &[f64], delta: f64, config: &DpAuditConfig) -> Result<HistogramRatio> {
    let lo = a.iter().chain(b).copied().fold(f64::INFINITY, f64::min);
    let hi = a.iter().chain(b).copied().fold(f64::NEG_INFINITY, f64::max);
    let nbins = config.bins.max(1);
    let width = (hi - lo) / nbins as f64;
    let index = |v: f64| {
        if width > 0.0 {
            (((v - lo) / width) as usize).min(nbins - 1)
        } else {
            0
        }
    };
    let mut ca = vec![0u64; nbins];
    let mut cb = vec![0u64; nbins];
    a.iter().for_each(|&v| ca[index(v)] += 1);
    b.iter().for_each(|&v| cb[index(v)] += 1);

    let mut merged: Vec<(u64, u64)> = Vec::new();
    let mut acc = (0u64, 0u64);
    for i in 0..nbins {
        acc = (acc.0 + ca[i], acc.1 + cb[i]);
        if acc.0 + acc.1 >= config.min_bin_count {
            merged.push(acc);
            acc = (0, 0);
        }
    }
    if acc.0 + acc.1 > 0 {
        match merged.last_mut() {
            Some(last) => *last = (last.0 + acc.0, last.1 + acc.1),
            None => merged.push(acc),
        }
    }
    if merged.len() < 2 {
        return Err(DprpError::InsufficientTrials(format!(
            "only {} histogram bin(s) hold at least {} samples",
            merged.len(),
            config.min_bin_count
        )));
    }
    let (na, nb) = (a.len() as u64, b.len() as u64);
    let mut worst = HistogramRatio { max_ratio: 0.0, point_ratio: 0.0, worst_bin_count: 0, bins: merged.len() };
    for &(xa, xb) in &merged {
        let (la, ua) = stats::clopper_pearson(xa, na, config.confidence);
        let (lb, ub) = stats::clopper_pearson(xb, nb, config.confidence);
        let (pa, pb) = (xa as f64 / na as f64, xb as f64 / nb as f64);
        for (ratio, point) in [((la - delta) / ub, (pa - delta) / pb), ((lb - delta) / ua, (pb - delta) / pa)] {
            if ratio > worst.max_ratio {
                worst.max_ratio = ratio;
                worst.point_ratio = point;
                worst.worst_bin_count = xa + xb;
            }
        }
    }
    Ok(worst)
}

/// Runs the full mechanism `config.trials` times on each neighbor.
pub fn dp_indistinguishability_check(
    pair: &NeighborPair,
    params: &PrivacyParams,
    config: &DpAuditConfig,
) -> Result<AuditReport> {
    params.validate()?;
    if config.trials < MIN_TRIALS {
        return Err(DprpError::InsufficientTrials(format!("{} trials, at least {MIN_TRIALS} required", config.trials)));
    }
    let (t, d) = (pair.base.rows(), pair.base.cols());
    let mut frng = rng::stream("audit/dp-functional", config.seed);
    let functional: Vec<f64> = (0..t * d).map(|_| frng.sample(StandardNormal)).collect();
    let (pr, pc) = pair.probe();

    let sample = |x: &FlatVideo, salt: u64| -> Result<Vec<(f64, f64)>> {
        (0..config.trials)
            .into_par_iter()
            .map(|i| {
                let p = params.with_seed(rng::trial_seed(config.seed, 2 * i + salt));
                let out = mechanism::run_mechanism(x, &p, config.options)?.private_flat;
                let lin: f64 = (0..t).flat_map(|r| (0..d).map(move |c| (r, c))).map(|(r, c)| out.get(r, c) * functional[r * d + c]).sum();
                Ok((lin, out.get(pr, pc)))
            })
            .collect()
    };
    let xs = sample(&pair.base, 0)?;
    let ys = sample(&pair.variant, 1)?;
    let (xl, xp): (Vec<f64>, Vec<f64>) = xs.into_iter().unzip();
    let (yl, yp): (Vec<f64>, Vec<f64>) = ys.into_iter().unzip();
    let linear = histogram_ratio(&xl, &yl, params.delta, config)?;
    let pixel = histogram_ratio(&xp, &yp, params.delta, config)?;

    let bound = params.epsilon.exp();
    let mut report = AuditReport::new("dp", config.seed, config.trials)
        .param("t", t)
        .param("d", d)
        .param("k", params.k)
        .param("epsilon", params.epsilon)
        .param("delta", params.delta)
        .param("b", params.b)
        .param("mode", pair.mode.as_str())
        .param("noise", match config.options.noise {
            NoiseMode::Calibrated => "calibrated",
            NoiseMode::Disabled => "disabled",
        })
        .param("confidence", config.confidence)
        .stat("linear_max_ratio", linear.max_ratio)
        .stat("linear_point_ratio", linear.point_ratio)
        .stat("linear_worst_bin_count", linear.worst_bin_count as f64)
        .stat("linear_bins", linear.bins as f64)
        .stat("pixel_max_ratio", pixel.max_ratio)
        .stat("pixel_point_ratio", pixel.point_ratio)
        .stat("pixel_worst_bin_count", pixel.worst_bin_count as f64)
        .stat("pixel_bins", pixel.bins as f64)
        .stat("row_difference_norm", pair.row_difference_norm());
    report.threshold = bound;
    report.verdict = Verdict::from_pass(linear.max_ratio <= bound && pixel.max_ratio <= bound);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(trials: u64) -> DpAuditConfig {
        DpAuditConfig { trials, seed: 3, ..Default::default() }
    }

    #[test]
    fn identical_samples_have_ratio_near_one() {
        let mut r = rng::stream("dp-test", 1);
        let a: Vec<f64> = (0..20_000).map(|_| r.sample(StandardNormal)).collect();
        let h = histogram_ratio(&a, &a, 0.0, &config(20_000)).unwrap();
        assert!(h.max_ratio <= 1.0 && h.max_ratio > 0.5);
    }

    #[test]
    fn point_mass_is_detected() {
        let mut r = rng::stream("dp-test", 2);
        let a = vec![0.0; 20_000];
        let b: Vec<f64> = (0..20_000).map(|_| r.sample::<f64, _>(StandardNormal).abs() + 0.5).collect();
        assert!(histogram_ratio(&a, &b, 1e-4, &config(20_000)).unwrap().max_ratio > 100.0);
    }

    #[test]
    fn too_few_bins_or_trials_are_reported() {
        let a = vec![1.0; 20_000];
        assert!(matches!(histogram_ratio(&a, &a, 0.0, &config(20_000)), Err(DprpError::InsufficientTrials(_))));
        let shape = FrameShape::new(4, 4, 3).unwrap();
        let pair = NeighborPair::desk_default(8, shape).unwrap();
        let params = PrivacyParams::new(2.0, 1e-4, 0.8, 12, 0).unwrap();
        assert!(matches!(
            dp_indistinguishability_check(&pair, &params, &config(9_999)),
            Err(DprpError::InsufficientTrials(_))
        ));
    }

    #[test]
    fn neighbor_validation() {
        let shape = FrameShape::new(2, 2, 1).unwrap();
        let base = FlatVideo::new(Mat::zeros(3, 4), shape).unwrap();
        let pair = NeighborPair::one_pixel(base.clone(), 1, 2, 255.0).unwrap();
        assert_eq!(pair.row_difference_norm(), 255.0);
        assert_eq!(pair.probe(), (1, 2));
        let frame = NeighborPair::one_frame(base.clone(), 2, 10.0).unwrap();
        assert_eq!(frame.row_difference_norm(), 20.0);
        let mut v = base.values().clone();
        v[(0, 0)] = 1.0;
        v[(1, 0)] = 1.0;
        let variant = FlatVideo::new(v, shape).unwrap();
        assert!(NeighborPair::new(base, variant, NeighborMode::OneFrame, 0, None).is_err());
    }
}
