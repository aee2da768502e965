//! Privacy calibration: budget split, sensitivity bound and the two noise
//! scales, plus sequential composition.
//!
//! All logarithms are natural logarithms.

use serde::{Deserialize, Serialize};

use crate::error::{DprpError, Result};

/// User-facing parameters of one mechanism invocation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrivacyParams {
    /// Total ε.
    pub epsilon: f64,
    /// Total δ, in `(0, 1/2)`.
    pub delta: f64,
    /// Share of the budget spent on the noisy projection, in `(0, 1)`.
    pub b: f64,
    /// Projection dimension.
    pub k: usize,
    /// Master seed of the invocation.
    pub seed: u64,
}

impl PrivacyParams {
    pub fn new(epsilon: f64, delta: f64, b: f64, k: usize, seed: u64) -> Result<Self> {
        let p = Self { epsilon, delta, b, k, seed };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        check_budget(self.epsilon, self.delta, self.b)?;
        if self.k < 1 {
            return Err(DprpError::InvalidDimension("projection dimension k must be at least 1".into()));
        }
        Ok(())
    }

    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }
}

/// How σ₂ is computed from θ, ε₂ and δ₂.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CovarianceNoiseRule {
    /// `θ · √( √(2·log(1.25)/δ₂) / ε₂ )`, the default rule.
    #[default]
    Nominal,
    /// The textbook Gaussian mechanism scale `θ · √(2·log(1.25/δ₂)) / ε₂`.
    /// Only meant for audit comparisons.
    StandardGaussian,
}

/// Every derived scalar of one configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseCalibration {
    pub eps1: f64,
    pub delta1: f64,
    pub eps2: f64,
    pub delta2: f64,
    /// L₂ sensitivity bound, `255/√k`.
    pub theta: f64,
    /// Standard deviation of the projection entries, `1/√k`.
    pub sigma_p: f64,
    /// Standard deviation of the projection noise.
    pub sigma1: f64,
    /// Standard deviation of the covariance noise.
    pub sigma2: f64,
}

fn check_budget(epsilon: f64, delta: f64, b: f64) -> Result<()> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(DprpError::InvalidBudget(format!("epsilon must be positive and finite, got {epsilon}")));
    }
    if !(delta > 0.0 && delta < 0.5) {
        return Err(DprpError::InvalidBudget(format!("delta must lie in (0, 1/2), got {delta}")));
    }
    if !(b > 0.0 && b < 1.0) {
        return Err(DprpError::InvalidBudget(format!("budget allocator b must lie in (0, 1), got {b}")));
    }
    Ok(())
}

fn check_part(eps: f64, delta: f64, name: &str) -> Result<()> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(DprpError::InvalidBudget(format!("{name}: epsilon must be positive, got {eps}")));
    }
    if !(delta > 0.0 && delta < 0.5) {
        return Err(DprpError::InvalidBudget(format!("{name}: delta must lie in (0, 1/2), got {delta}")));
    }
    Ok(())
}

/// Splits `(ε, δ)` into `(ε·b, δ·b, ε·(1−b), δ·(1−b))`.
pub fn split_budget(epsilon: f64, delta: f64, b: f64) -> Result<(f64, f64, f64, f64)> {
    check_budget(epsilon, delta, b)?;
    Ok((epsilon * b, delta * b, epsilon * (1.0 - b), delta * (1.0 - b)))
}

/// Sensitivity bound of the projection, `θ = 255/√k`.
pub fn sensitivity_theta(k: usize) -> Result<f64> {
    if k < 1 {
        return Err(DprpError::InvalidDimension("k must be at least 1".into()));
    }
    Ok(255.0 / (k as f64).sqrt())
}

/// Standard deviation of the noise added to the projection:
///
/// `θ·σ_p·√(k + 2√(k·log(2/δ₁)) + 2·log(2/δ₁)) · √(2·(log(1/(2δ₁)) + ε₁)) / ε₁`
/// with `σ_p = 1/√k`.
pub fn sigma1(theta: f64, k: usize, eps1: f64, delta1: f64) -> Result<f64> {
    check_part(eps1, delta1, "projection budget")?;
    if k < 1 {
        return Err(DprpError::InvalidDimension("k must be at least 1".into()));
    }
    if !(theta > 0.0 && theta.is_finite()) {
        return Err(DprpError::InvalidBudget(format!("theta must be positive, got {theta}")));
    }
    let kf = k as f64;
    let sigma_p = 1.0 / kf.sqrt();
    let l = (2.0 / delta1).ln();
    let chi_bound = (kf + 2.0 * (kf * l).sqrt() + 2.0 * l).sqrt();
    let gauss = (2.0 * ((1.0 / (2.0 * delta1)).ln() + eps1)).sqrt();
    Ok(theta * sigma_p * chi_bound * gauss / eps1)
}

/// Standard deviation of the noise added to the covariance matrix:
/// `θ · √( √(2·log(1.25)/δ₂) / ε₂ )`.
pub fn sigma2(theta: f64, eps2: f64, delta2: f64) -> Result<f64> {
    check_part(eps2, delta2, "covariance budget")?;
    if !(theta > 0.0 && theta.is_finite()) {
        return Err(DprpError::InvalidBudget(format!("theta must be positive, got {theta}")));
    }
    Ok(theta * ((2.0 * 1.25f64.ln() / delta2).sqrt() / eps2).sqrt())
}

/// `θ · √(2·log(1.25/δ₂)) / ε₂`.
pub fn sigma2_standard(theta: f64, eps2: f64, delta2: f64) -> Result<f64> {
    check_part(eps2, delta2, "covariance budget")?;
    if !(theta > 0.0 && theta.is_finite()) {
        return Err(DprpError::InvalidBudget(format!("theta must be positive, got {theta}")));
    }
    Ok(theta * (2.0 * (1.25 / delta2).ln()).sqrt() / eps2)
}

/// Sequential composition: `(ε₁+ε₂, δ₁+δ₂)`.
pub fn compose(eps1: f64, delta1: f64, eps2: f64, delta2: f64) -> Result<(f64, f64)> {
    check_part(eps1, delta1, "first mechanism")?;
    check_part(eps2, delta2, "second mechanism")?;
    Ok((eps1 + eps2, delta1 + delta2))
}

/// Computes every derived scalar for `params` using the default covariance rule.
pub fn calibrate(params: &PrivacyParams) -> Result<NoiseCalibration> {
    calibrate_with(params, CovarianceNoiseRule::Nominal)
}

pub fn calibrate_with(params: &PrivacyParams, rule: CovarianceNoiseRule) -> Result<NoiseCalibration> {
    params.validate()?;
    let (eps1, delta1, eps2, delta2) = split_budget(params.epsilon, params.delta, params.b)?;
    let theta = sensitivity_theta(params.k)?;
    let sigma_p = 1.0 / (params.k as f64).sqrt();
    let sigma1 = sigma1(theta, params.k, eps1, delta1)?;
    let sigma2 = match rule {
        CovarianceNoiseRule::Nominal => sigma2(theta, eps2, delta2)?,
        CovarianceNoiseRule::StandardGaussian => sigma2_standard(theta, eps2, delta2)?,
    };
    Ok(NoiseCalibration { eps1, delta1, eps2, delta2, theta, sigma_p, sigma1, sigma2 })
}
