//! Monte Carlo check of the chi-square tail bound
//! `Pr[χ²_k ≥ k + 2√(kx) + 2x] ≤ exp(−x)`.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::audit::{AuditReport, Verdict};
use crate::error::{DprpError, Result};
use crate::rng;

pub const MIN_TRIALS: u64 = 10_000;

/// `k + 2√(kx) + 2x`.
pub fn tail_cutoff(k: usize, x: f64) -> f64 {
    let k = k as f64;
    k + 2.0 * (k * x).sqrt() + 2.0 * x
}

/// Draws `trials` sums of `k` squared standard normals and passes if the
/// frequency of the tail event is at most `exp(−x) + 3·SE`, where
/// `SE = √(p(1−p)/trials)` at `p = exp(−x)`.
pub fn chi_square_tail_check(k: usize, x: f64, trials: u64, seed: u64) -> Result<AuditReport> {
    if k < 1 || x.is_nan() || x <= 0.0 {
        return Err(DprpError::InvalidDimension(format!("need k >= 1 and x > 0, got k = {k}, x = {x}")));
    }
    if trials < MIN_TRIALS {
        return Err(DprpError::InsufficientTrials(format!("{trials} trials, at least {MIN_TRIALS} required")));
    }
    let cutoff = tail_cutoff(k, x);
    let hits = (0..trials)
        .into_par_iter()
        .filter(|&i| {
            let mut rng = rng::stream("audit/chi2", rng::trial_seed(seed, i));
            let s: f64 = (0..k)
                .map(|_| {
                    let z: f64 = rng.sample(StandardNormal);
                    z * z
                })
                .sum();
            s >= cutoff
        })
        .count() as u64;
    let freq = hits as f64 / trials as f64;
    let p = (-x).exp();
    let se = (p * (1.0 - p) / trials as f64).sqrt();
    let mut report = AuditReport::new("chi2", seed, trials)
        .param("k", k)
        .param("x", x)
        .stat("frequency", freq)
        .stat("bound", p)
        .stat("se", se)
        .stat("cutoff", cutoff);
    report.threshold = p + 3.0 * se;
    report.verdict = Verdict::from_pass(freq <= report.threshold);
    Ok(report)
}
