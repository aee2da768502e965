//! The Video-DPRP mechanism.
//!
//! For a `T × d` video matrix `X` and `d × k` projection `R`:
//!
//! 1. `P = X·R` and `P̃ = P + M` with `M ~ N(0, σ₁²)` entrywise,
//! 2. `Q = PᵗP + N` with `N ~ N(0, σ₂²)` entrywise,
//! 3. `Vᵗ` from the SVD `Q = UΣVᵗ`,
//! 4. `X̃ = P̃ · Vᵗ · (R·Vᵗ)⁺`.
//!
//! The reconstruction is the association of this product that
//! recovers `X` exactly in the noiseless limit with `k = d` and orthogonal
//! `R` (see the `reconstruction_order` integration test). Because `Vᵗ` is
//! orthogonal, `(R·Vᵗ)⁺ = V·R⁺`, so [`run_mechanism`] evaluates step 4 as
//! `(P̃·Vᵗ·V)·R⁺` with `R⁺` applied through the Gram matrix of `R`. This
//! avoids ever forming the `d × k` product and lets `R` be streamed.
//! [`reconstruct`] evaluates the product literally and serves as reference.

use faer::{Mat, MatRef};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::calibration::{self, CovarianceNoiseRule, NoiseCalibration, PrivacyParams};
use crate::error::{DprpError, Result};
use crate::linalg::{self, GramInverse};
use crate::projection::{self, ProjectionMatrix, ProjectionSampler};
use crate::rng::{self, StageSeeds};
use crate::video::{self, FlatVideo, FrameShape, VideoTensor};

/// Whether calibrated noise is added.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseMode {
    #[default]
    Calibrated,
    /// Both noise scales forced to zero. Audit negative controls only.
    Disabled,
}

/// Knobs beyond [`PrivacyParams`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MechanismOptions {
    pub covariance_rule: CovarianceNoiseRule,
    pub noise: NoiseMode,
}

/// Everything produced by one invocation.
#[derive(Debug, Clone)]
pub struct MechanismOutput {
    /// `X̃` before clamping.
    pub private_flat: FlatVideo,
    /// `P̃`, `T × k`.
    pub noisy_projection: Mat<f64>,
    /// `Vᵗ`, `k × k`.
    pub right_singular: Mat<f64>,
    pub calibration: NoiseCalibration,
    pub seeds: StageSeeds,
}

/// `P = X·R`.
pub fn project(x: &FlatVideo, r: &ProjectionMatrix) -> Result<Mat<f64>> {
    linalg::matmul(x.values().as_ref(), r.entries().as_ref())
}

/// `A + σ·Z`, with `Z` standard normal drawn row-major from the
/// projection-noise family of streams keyed by `seed`. `σ = 0` returns `A`
/// unchanged.
pub fn add_gaussian_noise(a: MatRef<'_, f64>, sigma: f64, seed: u64) -> Mat<f64> {
    add_noise_from(a, sigma, rng::PROJECTION_NOISE_STREAM, seed)
}

/// Standard normal draws filled row-major from `stream` keyed by `seed`.
pub(crate) fn standard_normals(rows: usize, cols: usize, stream: &str, seed: u64) -> Mat<f64> {
    let mut rng = rng::stream(stream, seed);
    let mut z = Mat::zeros(rows, cols);
    for i in 0..rows {
        for j in 0..cols {
            z[(i, j)] = rng.sample(StandardNormal);
        }
    }
    z
}

/// `a + σ·z`, elementwise.
pub(crate) fn add_scaled(a: MatRef<'_, f64>, sigma: f64, z: MatRef<'_, f64>) -> Mat<f64> {
    if sigma == 0.0 {
        return a.to_owned();
    }
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)] + sigma * z[(i, j)])
}

fn add_noise_from(a: MatRef<'_, f64>, sigma: f64, stream: &str, seed: u64) -> Mat<f64> {
    if sigma == 0.0 {
        return a.to_owned();
    }
    let z = standard_normals(a.nrows(), a.ncols(), stream, seed);
    add_scaled(a, sigma, z.as_ref())
}

/// `X̃ = P̃ · Vᵗ · (R·Vᵗ)⁺`, evaluated literally with an explicit
/// pseudoinverse of the `d × k` product.
pub fn reconstruct(
    p_noisy: MatRef<'_, f64>,
    r: &ProjectionMatrix,
    vt: MatRef<'_, f64>,
    shape: FrameShape,
) -> Result<FlatVideo> {
    let k = r.cols();
    if p_noisy.ncols() != k || vt.nrows() != k || vt.ncols() != k {
        return Err(DprpError::ShapeMismatch(format!(
            "P̃ is {}x{}, R is {}x{}, Vᵗ is {}x{}",
            p_noisy.nrows(),
            p_noisy.ncols(),
            r.rows(),
            k,
            vt.nrows(),
            vt.ncols()
        )));
    }
    let rv = linalg::matmul(r.entries().as_ref(), vt)?;
    let pinv = linalg::pseudoinverse(rv.as_ref())?;
    let left = linalg::matmul(p_noisy, vt)?;
    FlatVideo::new(linalg::matmul(left.as_ref(), pinv.as_ref())?, shape)
}

/// `P = X·R` together with a factorization that applies `R⁺`.
///
/// For `k ≤ d`, `R⁺ = (RᵗR)⁻¹Rᵗ` and `R` is regenerated block by block from
/// its seed. For `k > d`, `R⁺ = Rᵗ(RRᵗ)⁻¹` and `R` is kept.
pub(crate) struct ProjectedVideo {
    pub(crate) projection: Mat<f64>,
    basis: Basis,
    gram: GramInverse,
}

enum Basis {
    Streamed { d: usize, k: usize, seed: u64 },
    /// `Rᵗ`.
    Dense(Mat<f64>),
}

impl ProjectedVideo {
    pub(crate) fn new(x: MatRef<'_, f64>, k: usize, seed: u64) -> Result<Self> {
        let (t, d) = (x.nrows(), x.ncols());
        if k <= d {
            let mut sampler = ProjectionSampler::new(d, k, seed)?;
            let mut p = Mat::zeros(t, k);
            let mut gram = Mat::zeros(k, k);
            let rows = projection::block_rows(k);
            while sampler.position() < d {
                let start = sampler.position();
                let block = sampler.next_block(rows).expect("rows remain");
                let xs = x.subcols(start, block.nrows());
                faer::linalg::matmul::matmul(
                    p.as_mut(),
                    faer::Accum::Add,
                    xs,
                    block.as_ref(),
                    1.0,
                    faer::Par::Seq,
                );
                linalg::gram_lower_accumulate(&mut gram, block.as_ref());
            }
            linalg::mirror_lower(&mut gram);
            let gram = GramInverse::new(gram.as_ref(), d.max(k))?;
            Ok(Self { projection: p, basis: Basis::Streamed { d, k, seed }, gram })
        } else {
            let rt = projection::sample_transposed(d, k, seed)?;
            let p = linalg::matmul(x, rt.transpose())?;
            let gram = GramInverse::new(linalg::covariance(rt.as_ref()).as_ref(), d.max(k))?;
            Ok(Self { projection: p, basis: Basis::Dense(rt), gram })
        }
    }

    /// `w · R⁺` for a `T × k` matrix `w`.
    pub(crate) fn back_project(&self, w: MatRef<'_, f64>) -> Result<Mat<f64>> {
        match &self.basis {
            Basis::Streamed { d, k, seed } => {
                if w.ncols() != *k {
                    return Err(DprpError::ShapeMismatch(format!("expected {k} columns, got {}", w.ncols())));
                }
                let wg = self.gram.apply_right(w);
                let mut out = Mat::zeros(w.nrows(), *d);
                let mut sampler = ProjectionSampler::new(*d, *k, *seed)?;
                let rows = projection::block_rows(*k);
                while sampler.position() < *d {
                    let start = sampler.position();
                    let bt = sampler.next_block_transposed(rows).expect("rows remain");
                    faer::linalg::matmul::matmul(
                        out.as_mut().subcols_mut(start, bt.ncols()),
                        faer::Accum::Replace,
                        wg.as_ref(),
                        bt.as_ref(),
                        1.0,
                        faer::Par::Seq,
                    );
                }
                Ok(out)
            }
            Basis::Dense(rt) => {
                let wr = linalg::matmul(w, rt.as_ref())?;
                Ok(self.gram.apply_right(wr.as_ref()))
            }
        }
    }
}

/// Runs the mechanism on a flattened video.
pub fn run_mechanism(x: &FlatVideo, params: &PrivacyParams, options: MechanismOptions) -> Result<MechanismOutput> {
    let calibration = calibration::calibrate_with(params, options.covariance_rule)?;
    let (sigma1, sigma2) = match options.noise {
        NoiseMode::Calibrated => (calibration.sigma1, calibration.sigma2),
        NoiseMode::Disabled => (0.0, 0.0),
    };
    let seeds = StageSeeds::derive(params.seed);
    let (d, k) = (x.cols(), params.k);
    if k >= d {
        log::warn!("projection dimension k = {k} does not compress d = {d}");
    }

    let projected = ProjectedVideo::new(x.values().as_ref(), k, seeds.projection)?;
    let p = &projected.projection;
    let p_noisy = add_noise_from(p.as_ref(), sigma1, rng::PROJECTION_NOISE_STREAM, seeds.projection_noise);
    let p_cov = linalg::covariance(p.as_ref());
    let q = add_noise_from(p_cov.as_ref(), sigma2, rng::COVARIANCE_NOISE_STREAM, seeds.covariance_noise);
    let vt = linalg::svd_right(q.as_ref())?.vt;

    // X̃ = P̃·Vᵗ·(R·Vᵗ)⁺ = (P̃·Vᵗ·V)·R⁺
    let pv = linalg::matmul(p_noisy.as_ref(), vt.as_ref())?;
    let w = linalg::matmul(pv.as_ref(), vt.transpose())?;
    let x_tilde = projected.back_project(w.as_ref())?;

    Ok(MechanismOutput {
        private_flat: FlatVideo::new(x_tilde, x.shape_tag())?,
        noisy_projection: p_noisy,
        right_singular: vt,
        calibration,
        seeds,
    })
}

/// Transforms one video: mechanism, clamping, re-quantization.
pub fn run_video_dprp(video: &VideoTensor, params: &PrivacyParams) -> Result<VideoTensor> {
    run_video_dprp_with(video, params, MechanismOptions::default()).map(|(v, _)| v)
}

/// [`run_video_dprp`] with explicit options, also returning the raw output.
pub fn run_video_dprp_with(
    video: &VideoTensor,
    params: &PrivacyParams,
    options: MechanismOptions,
) -> Result<(VideoTensor, MechanismOutput)> {
    let flat = video::flatten(video);
    let out = run_mechanism(&flat, params, options)?;
    let clamped = video::clamp_pixels(&out.private_flat);
    Ok((video::reshape(&clamped)?, out))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flat(t: usize, shape: FrameShape, seed: u64) -> FlatVideo {
        let mut rng = rng::stream("mechanism-test", seed);
        let values = Mat::from_fn(t, shape.dim(), |_, _| f64::from(rng.random_range(0u8..=255)));
        FlatVideo::new(values, shape).unwrap()
    }

    #[test]
    fn noise_is_deterministic_and_zero_sigma_is_identity() {
        let a = Mat::from_fn(3, 4, |i, j| (i * 4 + j) as f64 * 0.1);
        assert_eq!(add_gaussian_noise(a.as_ref(), 0.0, 5), a);
        let x = add_gaussian_noise(a.as_ref(), 2.0, 5);
        assert_eq!(x, add_gaussian_noise(a.as_ref(), 2.0, 5));
        assert_ne!(x, add_gaussian_noise(a.as_ref(), 2.0, 6));
    }

    #[test]
    fn noise_has_the_requested_scale() {
        let a = Mat::<f64>::zeros(1000, 1000);
        let out = add_gaussian_noise(a.as_ref(), 3.0, 11);
        let n = 1e6;
        let mut sum = 0.0;
        let mut sq = 0.0;
        for i in 0..1000 {
            for j in 0..1000 {
                sum += out[(i, j)];
                sq += out[(i, j)] * out[(i, j)];
            }
        }
        let mean = sum / n;
        let sd = ((sq - n * mean * mean) / (n - 1.0)).sqrt();
        assert!((sd / 3.0 - 1.0).abs() < 0.01);
    }

    #[test]
    fn project_is_linear_and_checks_shapes() {
        let shape = FrameShape::new(2, 2, 1).unwrap();
        let x = flat(2, shape, 1);
        let r = projection::sample_projection(4, 2, 7).unwrap();
        let p = project(&x, &r).unwrap();
        let x2 = FlatVideo::new(Mat::from_fn(2, 4, |i, j| 2.0 * x.get(i, j)), shape).unwrap();
        let p2 = project(&x2, &r).unwrap();
        assert!((&p2 - Mat::from_fn(2, 2, |i, j| 2.0 * p[(i, j)])).norm_max() < 1e-12);
        let zero = FlatVideo::new(Mat::zeros(2, 4), shape).unwrap();
        assert_eq!(project(&zero, &r).unwrap(), Mat::<f64>::zeros(2, 2));
        let r3 = projection::sample_projection(3, 2, 7).unwrap();
        assert!(matches!(project(&x, &r3), Err(DprpError::ShapeMismatch(_))));
    }

    #[test]
    fn streamed_and_literal_reconstruction_agree() {
        for (t, w, h, c, k) in [(2, 2, 2, 1, 2), (5, 4, 3, 3, 7), (3, 3, 2, 1, 9), (4, 5, 5, 1, 25)] {
            let shape = FrameShape::new(w, h, c).unwrap();
            let x = flat(t, shape, k as u64);
            let params = PrivacyParams::new(2.0, 1e-4, 0.8, k, 99).unwrap();
            let out = run_mechanism(&x, &params, MechanismOptions::default()).unwrap();
            let r = projection::sample_projection(shape.dim(), k, out.seeds.projection).unwrap();
            let literal =
                reconstruct(out.noisy_projection.as_ref(), &r, out.right_singular.as_ref(), shape).unwrap();
            let scale = literal.values().norm_max().max(1.0);
            let diff = (out.private_flat.values() - literal.values()).norm_max();
            assert!(diff <= 1e-9 * scale, "t={t} d={} k={k}: {diff}", shape.dim());
        }
    }

    #[test]
    fn noiseless_full_rank_recovers_input() {
        let shape = FrameShape::new(3, 3, 1).unwrap();
        let x = flat(4, shape, 3);
        let params = PrivacyParams::new(1.0, 1e-4, 0.5, 9, 5).unwrap();
        let opts = MechanismOptions { noise: NoiseMode::Disabled, ..Default::default() };
        let out = run_mechanism(&x, &params, opts).unwrap();
        assert!((out.private_flat.values() - x.values()).norm_max() < 1e-8);
    }

    #[test]
    fn output_shape_and_orthonormal_vt() {
        let shape = FrameShape::new(4, 4, 3).unwrap();
        let x = flat(3, shape, 8);
        let params = PrivacyParams::new(2.0, 1e-4, 0.8, 10, 1).unwrap();
        let out = run_mechanism(&x, &params, MechanismOptions::default()).unwrap();
        assert_eq!((out.private_flat.rows(), out.private_flat.cols()), (3, 48));
        let g = linalg::matmul(out.right_singular.as_ref(), out.right_singular.transpose()).unwrap();
        assert!((&g - Mat::<f64>::identity(10, 10)).norm_max() <= 1e-8);
    }

    #[test]
    fn zero_video_yields_valid_tensor() {
        let shape = FrameShape::new(4, 3, 3).unwrap();
        let v = VideoTensor::zeros(2, shape).unwrap();
        let params = PrivacyParams::new(2.0, 1e-4, 0.8, 6, 4).unwrap();
        let (out, raw) = run_video_dprp_with(&v, &params, MechanismOptions::default()).unwrap();
        assert_eq!((out.frames(), out.shape()), (2, shape));
        assert!(raw.private_flat.values().norm_max() > 0.0);
    }
}
