//! Dense linear algebra used by the mechanism, backed by `faer`.
//!
//! Every kernel runs sequentially so that accumulation order, and therefore
//! every output bit, depends only on the inputs.

use std::sync::Once;

use faer::linalg::matmul::triangular::{self, BlockStructure};
use faer::linalg::solvers::Solve;
use faer::{Accum, Mat, MatRef, Par, Side};

use crate::error::{DprpError, Result};

static SEQUENTIAL: Once = Once::new();

/// Forces faer's global parallelism to sequential execution.
pub(crate) fn sequential() {
    SEQUENTIAL.call_once(|| faer::set_global_parallelism(Par::Seq));
}

/// Largest element count for which debug builds verify SVD residuals and
/// Penrose identities after every decomposition.
const DEBUG_CHECK_LIMIT: usize = 1 << 18;

/// `a · b`.
pub fn matmul(a: MatRef<'_, f64>, b: MatRef<'_, f64>) -> Result<Mat<f64>> {
    if a.ncols() != b.nrows() {
        return Err(DprpError::ShapeMismatch(format!(
            "cannot multiply {}x{} by {}x{}",
            a.nrows(),
            a.ncols(),
            b.nrows(),
            b.ncols()
        )));
    }
    let mut out = Mat::zeros(a.nrows(), b.ncols());
    faer::linalg::matmul::matmul(out.as_mut(), Accum::Replace, a, b, 1.0, Par::Seq);
    Ok(out)
}

/// Adds the lower triangle of `aᵗ·a` into `acc`.
pub(crate) fn gram_lower_accumulate(acc: &mut Mat<f64>, a: MatRef<'_, f64>) {
    triangular::matmul(
        acc.as_mut(),
        BlockStructure::TriangularLower,
        Accum::Add,
        a.transpose(),
        BlockStructure::Rectangular,
        a,
        BlockStructure::Rectangular,
        1.0,
        Par::Seq,
    );
}

/// Copies the lower triangle onto the upper one.
pub(crate) fn mirror_lower(m: &mut Mat<f64>) {
    for j in 0..m.ncols() {
        for i in 0..j {
            m[(i, j)] = m[(j, i)];
        }
    }
}

/// Uncentered Gram matrix `Pᵗ·P`, exactly symmetric.
pub fn covariance(p: MatRef<'_, f64>) -> Mat<f64> {
    let k = p.ncols();
    let mut g = Mat::zeros(k, k);
    gram_lower_accumulate(&mut g, p);
    mirror_lower(&mut g);
    g
}

/// Full SVD `Q = U·diag(σ)·Vᵗ`.
#[derive(Debug, Clone)]
pub struct RightSvd {
    pub u: Mat<f64>,
    /// Non-increasing.
    pub singular_values: Vec<f64>,
    pub vt: Mat<f64>,
}

impl RightSvd {
    /// `U·diag(σ)·Vᵗ`.
    pub fn recompose(&self) -> Mat<f64> {
        let us = Mat::from_fn(self.u.nrows(), self.u.ncols(), |i, j| {
            self.u[(i, j)] * self.singular_values.get(j).copied().unwrap_or(0.0)
        });
        matmul(us.as_ref(), self.vt.as_ref()).expect("conforming factors")
    }
}

/// Full SVD of a square matrix with a fixed sign convention: every
/// right-singular vector (row of `Vᵗ`) has a positive largest-magnitude
/// entry, with ties broken by the lowest index.
pub fn svd_right(q: MatRef<'_, f64>) -> Result<RightSvd> {
    sequential();
    if q.nrows() != q.ncols() {
        return Err(DprpError::ShapeMismatch(format!(
            "expected a square matrix, got {}x{}",
            q.nrows(),
            q.ncols()
        )));
    }
    if !q.is_all_finite() {
        return Err(DprpError::NumericalFailure("matrix has non-finite entries".into()));
    }
    let svd = q
        .svd()
        .map_err(|e| DprpError::NumericalFailure(format!("SVD did not converge: {e:?}")))?;
    let n = q.nrows();
    let mut u = svd.U().to_owned();
    let v = svd.V();
    let singular_values: Vec<f64> = (0..n).map(|i| svd.S()[i]).collect();
    let mut vt = v.transpose().to_owned();
    for r in 0..n {
        let mut best = 0;
        for c in 1..n {
            if vt[(r, c)].abs() > vt[(r, best)].abs() {
                best = c;
            }
        }
        if vt[(r, best)] < 0.0 {
            for c in 0..n {
                vt[(r, c)] = -vt[(r, c)];
                u[(c, r)] = -u[(c, r)];
            }
        }
    }
    let out = RightSvd { u, singular_values, vt };
    if cfg!(debug_assertions) && n * n <= DEBUG_CHECK_LIMIT {
        let residual = (&out.recompose() - q).norm_l2();
        let scale = q.norm_l2();
        debug_assert!(residual <= 1e-10 * scale.max(f64::MIN_POSITIVE), "SVD residual {residual} vs {scale}");
    }
    Ok(out)
}

/// Moore–Penrose pseudoinverse through a thin SVD. Singular values at or
/// below `max(rows, cols) · ε_machine · σ_max` are treated as zero.
pub fn pseudoinverse(a: MatRef<'_, f64>) -> Result<Mat<f64>> {
    sequential();
    let (m, n) = (a.nrows(), a.ncols());
    if m == 0 || n == 0 {
        return Ok(Mat::zeros(n, m));
    }
    if !a.is_all_finite() {
        return Err(DprpError::NumericalFailure("matrix has non-finite entries".into()));
    }
    let svd = a
        .thin_svd()
        .map_err(|e| DprpError::NumericalFailure(format!("SVD did not converge: {e:?}")))?;
    let s = svd.S();
    let r = m.min(n);
    let sigma_max = if r > 0 { s[0] } else { 0.0 };
    let cutoff = m.max(n) as f64 * f64::EPSILON * sigma_max;
    // A⁺ = V · diag(1/σ) · Uᵗ over the retained singular values
    let v = svd.V();
    let u = svd.U();
    let scaled_v = Mat::from_fn(n, r, |i, j| if s[j] > cutoff { v[(i, j)] / s[j] } else { 0.0 });
    let pinv = matmul(scaled_v.as_ref(), u.transpose())?;
    if cfg!(debug_assertions) && m * n <= DEBUG_CHECK_LIMIT {
        let worst = penrose_residuals(a, pinv.as_ref()).into_iter().fold(0.0, f64::max);
        debug_assert!(worst <= 1e-8, "Penrose residual {worst}");
    }
    Ok(pinv)
}

/// Relative residuals of the four Penrose identities
/// `AXA = A`, `XAX = X`, `(AX)ᵗ = AX`, `(XA)ᵗ = XA`.
pub fn penrose_residuals(a: MatRef<'_, f64>, x: MatRef<'_, f64>) -> [f64; 4] {
    let ax = matmul(a, x).expect("conforming pseudoinverse");
    let xa = matmul(x, a).expect("conforming pseudoinverse");
    let axa = matmul(ax.as_ref(), a).unwrap();
    let xax = matmul(xa.as_ref(), x).unwrap();
    let rel = |num: f64, den: f64| if den > 0.0 { num / den } else { num };
    [
        rel((&axa - a).norm_l2(), a.norm_l2()),
        rel((&xax - x).norm_l2(), x.norm_l2()),
        rel((&ax - ax.transpose()).norm_l2(), ax.norm_l2()),
        rel((&xa - xa.transpose()).norm_l2(), xa.norm_l2()),
    ]
}

/// Pseudoinverse of a symmetric positive semidefinite Gram matrix.
///
/// Uses a Cholesky factorization when it succeeds with well separated
/// pivots, and falls back to an eigendecomposition that drops eigenvalues
/// at or below `scale · ε_machine · λ_max`.
#[derive(Debug)]
pub(crate) enum GramInverse {
    Cholesky(faer::linalg::solvers::Llt<f64>),
    Eigen(Mat<f64>),
}

impl GramInverse {
    pub(crate) fn new(gram: MatRef<'_, f64>, scale: usize) -> Result<Self> {
        sequential();
        if !gram.is_all_finite() {
            return Err(DprpError::NumericalFailure("Gram matrix has non-finite entries".into()));
        }
        let ratio = scale as f64 * f64::EPSILON;
        if let Ok(llt) = gram.llt(Side::Lower) {
            let l = llt.L();
            let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
            for i in 0..l.nrows() {
                let p = l[(i, i)] * l[(i, i)];
                lo = lo.min(p);
                hi = hi.max(p);
            }
            if hi > 0.0 && lo > ratio * hi {
                return Ok(Self::Cholesky(llt));
            }
        }
        let eig = gram
            .self_adjoint_eigen(Side::Lower)
            .map_err(|e| DprpError::NumericalFailure(format!("eigendecomposition failed: {e:?}")))?;
        let n = gram.nrows();
        let s = eig.S();
        let u = eig.U();
        let lambda_max = (0..n).map(|i| s[i]).fold(0.0f64, f64::max);
        let cutoff = ratio * lambda_max;
        let scaled = Mat::from_fn(n, n, |i, j| if s[j] > cutoff { u[(i, j)] / s[j] } else { 0.0 });
        let mut pinv = matmul(scaled.as_ref(), u.transpose())?;
        // keep the result exactly symmetric
        for j in 0..n {
            for i in 0..j {
                let v = 0.5 * (pinv[(i, j)] + pinv[(j, i)]);
                pinv[(i, j)] = v;
                pinv[(j, i)] = v;
            }
        }
        Ok(Self::Eigen(pinv))
    }

    /// `w · G⁺`.
    pub(crate) fn apply_right(&self, w: MatRef<'_, f64>) -> Mat<f64> {
        match self {
            Self::Cholesky(llt) => {
                let mut out = w.to_owned();
                llt.rsolve_in_place(out.as_mut());
                out
            }
            Self::Eigen(pinv) => matmul(w, pinv.as_ref()).expect("conforming Gram inverse"),
        }
    }

    #[cfg(test)]
    pub(crate) fn is_cholesky(&self) -> bool {
        matches!(self, Self::Cholesky(_))
    }
}
