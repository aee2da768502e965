//! Empirical L₂ sensitivity of the projection `X ↦ X·R`.
//!
//! For neighbors differing in a single pixel by `m`, `‖(X−X′)R‖_F = m·‖R_j‖₂`
//! where `R_j` is the row of `R` at the changed column. For neighbors
//! differing in a whole frame by `m` in every pixel it is `m·‖1ᵗR‖₂`. The
//! distribution over fresh draws of `R` is compared with the calibrated
//! bound `θ = m/√k` and with the row-norm bound `m·E‖R_j‖₂`.

use rand::Rng;

use crate::audit::{stats, AuditReport, Verdict};
use crate::error::{DprpError, Result};
use crate::projection::ProjectionSampler;
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NeighborMode {
    OneFrame,
    OnePixel,
}

impl NeighborMode {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::OneFrame => "one-frame",
            Self::OnePixel => "one-pixel",
        }
    }
}

/// Runs `trials` fresh projections. The changed column is drawn once per
/// audit from `seed`; `magnitude` is the per-pixel difference.
pub fn empirical_sensitivity(
    d: usize,
    k: usize,
    mode: NeighborMode,
    magnitude: f64,
    trials: u64,
    seed: u64,
) -> Result<AuditReport> {
    if d < 1 || k < 1 || trials < 1 || !(0.0..=255.0).contains(&magnitude) {
        return Err(DprpError::InvalidDimension(format!(
            "need d, k, trials >= 1 and magnitude in [0, 255] (d = {d}, k = {k}, trials = {trials}, magnitude = {magnitude})"
        )));
    }
    let column = rng::stream("audit/sensitivity-location", seed).random_range(0..d);
    let mut sens = Vec::with_capacity(trials as usize);
    let mut row_norms = Vec::with_capacity(trials as usize);
    for i in 0..trials {
        let mut sampler = ProjectionSampler::new(d, k, rng::trial_seed(seed, i))?;
        let (s, row) = match mode {
            NeighborMode::OnePixel => {
                let rows = sampler.next_block(column + 1).expect("d >= 1");
                let norm = (0..k).map(|c| rows[(column, c)].powi(2)).sum::<f64>().sqrt();
                (magnitude * norm, norm)
            }
            NeighborMode::OneFrame => {
                let r = sampler.next_block(d).expect("d >= 1");
                let col_sums = (0..k).map(|c| (0..d).map(|j| r[(j, c)]).sum::<f64>());
                let norm = col_sums.map(|s| s * s).sum::<f64>().sqrt();
                let row = (0..k).map(|c| r[(column, c)].powi(2)).sum::<f64>().sqrt();
                (magnitude * norm, row)
            }
        };
        sens.push(s);
        row_norms.push(row);
    }
    let max = sens.iter().copied().fold(0.0, f64::max);
    let theta = magnitude / (k as f64).sqrt();
    let row_bound = magnitude * stats::mean(&row_norms);
    let diff_norm = match mode {
        NeighborMode::OnePixel => magnitude,
        NeighborMode::OneFrame => magnitude * (d as f64).sqrt(),
    };
    let mut report = AuditReport::new("sensitivity", seed, trials)
        .param("d", d)
        .param("k", k)
        .param("mode", mode.as_str())
        .param("magnitude", magnitude)
        .param("column", column)
        .stat("mean", stats::mean(&sens))
        .stat("p95", stats::quantile(&sens, 0.95))
        .stat("max", max)
        .stat("difference_norm", diff_norm)
        .stat("bound_theta", theta)
        .stat("bound_row_norm", row_bound)
        .stat("respects_theta", f64::from(u8::from(max <= theta)))
        .stat("respects_row_norm", f64::from(u8::from(max <= row_bound)));
    report.threshold = theta;
    report.verdict = Verdict::Info;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_neighbors_have_zero_sensitivity() {
        let r = empirical_sensitivity(20, 4, NeighborMode::OnePixel, 0.0, 50, 1).unwrap();
        assert_eq!(r.stat_value("max"), Some(0.0));
    }

    #[test]
    fn statistics_scale_linearly() {
        let full = empirical_sensitivity(30, 8, NeighborMode::OnePixel, 255.0, 200, 3).unwrap();
        for m in [1.0, 128.0] {
            let r = empirical_sensitivity(30, 8, NeighborMode::OnePixel, m, 200, 3).unwrap();
            for key in ["mean", "p95", "max", "bound_row_norm", "bound_theta"] {
                let ratio = r.stat_value(key).unwrap() / full.stat_value(key).unwrap();
                assert!((ratio - m / 255.0).abs() < 1e-12, "{key}");
            }
        }
    }

    #[test]
    fn one_pixel_mean_tracks_row_norm_bound() {
        let r = empirical_sensitivity(48, 64, NeighborMode::OnePixel, 255.0, 10_000, 9).unwrap();
        let mean = r.stat_value("mean").unwrap();
        let bound = r.stat_value("bound_row_norm").unwrap();
        assert!((mean / bound - 1.0).abs() < 0.05);
        // the θ bound sits a factor √k below the measured values
        assert_eq!(r.stat_value("respects_theta"), Some(0.0));
    }
}
