//! Pairwise-distance distortion of the Gaussian projection.

use faer::Mat;
use rand::Rng;

use crate::audit::{AuditReport, Verdict};
use crate::error::{DprpError, Result};
use crate::linalg;
use crate::projection::sample_projection;
use crate::rng;

/// Required fraction of preserved pairs per seed.
pub const JL_PASS_FRACTION: f64 = 0.95;

/// `ceil(20·ln T / λ²)`.
pub fn jl_dimension(t: usize, lambda: f64) -> usize {
    (20.0 * (t as f64).ln() / (lambda * lambda)).ceil() as usize
}

/// Fraction of pairs `(i, j)` of rows of `x` whose squared distance after
/// projection by `r` lies within `[(1−λ)·D, (1+λ)·D]` of the original `D`.
pub fn preserved_fraction(x: &Mat<f64>, r: &Mat<f64>, lambda: f64) -> Result<f64> {
    let p = linalg::matmul(x.as_ref(), r.as_ref())?;
    let t = x.nrows();
    let sq = |m: &Mat<f64>, i: usize, j: usize| -> f64 { (0..m.ncols()).map(|c| (m[(i, c)] - m[(j, c)]).powi(2)).sum() };
    let mut within = 0usize;
    let mut pairs = 0usize;
    for i in 0..t {
        for j in i + 1..t {
            let before = sq(x, i, j);
            let after = sq(&p, i, j);
            pairs += 1;
            if after >= (1.0 - lambda) * before && after <= (1.0 + lambda) * before {
                within += 1;
            }
        }
    }
    Ok(if pairs == 0 { 1.0 } else { within as f64 / pairs as f64 })
}

/// Projects `t` random frames of dimension `d` with a fresh `d × k` matrix
/// per seed and checks that every seed preserves at least
/// [`JL_PASS_FRACTION`] of the pairwise squared distances.
pub fn jl_distortion_check(t: usize, d: usize, k: usize, lambda: f64, seeds: &[u64]) -> Result<AuditReport> {
    jl_check_with(t, d, k, lambda, seeds, |rng, _, _| f64::from(rng.random_range(0u8..=255)))
}

/// [`jl_distortion_check`] with every frame identical.
pub fn jl_identical_frames_check(t: usize, d: usize, k: usize, lambda: f64, seeds: &[u64]) -> Result<AuditReport> {
    jl_check_with(t, d, k, lambda, seeds, |_, _, j| (j % 256) as f64)
}

fn jl_check_with(
    t: usize,
    d: usize,
    k: usize,
    lambda: f64,
    seeds: &[u64],
    mut frame: impl FnMut(&mut rand_chacha::ChaCha8Rng, usize, usize) -> f64,
) -> Result<AuditReport> {
    if t < 2 || !(lambda > 0.0 && lambda < 1.0) || seeds.is_empty() {
        return Err(DprpError::InvalidDimension(format!(
            "JL check needs T >= 2, lambda in (0, 1) and at least one seed (T = {t}, lambda = {lambda})"
        )));
    }
    let mut fractions = Vec::with_capacity(seeds.len());
    for &seed in seeds {
        let mut frames = rng::stream("audit/jl-frames", seed);
        let x = Mat::from_fn(t, d, |i, j| frame(&mut frames, i, j));
        let r = sample_projection(d, k, seed)?;
        fractions.push(preserved_fraction(&x, r.entries(), lambda)?);
    }
    let min = fractions.iter().copied().fold(f64::INFINITY, f64::min);
    let mut report = AuditReport::new("jl", seeds[0], seeds.len() as u64)
        .param("t", t)
        .param("d", d)
        .param("k", k)
        .param("lambda", lambda)
        .stat("min_fraction", min)
        .stat("mean_fraction", fractions.iter().sum::<f64>() / fractions.len() as f64)
        .stat("pairs", (t * (t - 1) / 2) as f64);
    report.threshold = JL_PASS_FRACTION;
    report.verdict = Verdict::from_pass(min >= JL_PASS_FRACTION);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dimension_formula() {
        assert_eq!(jl_dimension(64, 0.5), 333);
    }

    #[test]
    fn identical_frames_pass_vacuously() {
        let r = jl_identical_frames_check(8, 30, 2, 0.5, &[1, 2]).unwrap();
        assert_eq!(r.stat_value("min_fraction"), Some(1.0));
        assert_eq!(r.verdict, Verdict::Pass);
    }

    #[test]
    fn single_dimension_usually_fails() {
        let r = jl_distortion_check(16, 64, 1, 0.5, &[1, 2, 3]).unwrap();
        assert_eq!(r.verdict, Verdict::Fail);
    }

    #[test]
    fn reproducible() {
        let a = jl_distortion_check(10, 40, 20, 0.5, &[5, 6]).unwrap();
        let b = jl_distortion_check(10, 40, 20, 0.5, &[5, 6]).unwrap();
        assert_eq!(a, b);
    }
}
