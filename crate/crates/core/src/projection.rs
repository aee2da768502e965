//! Seeded Gaussian projection matrices.
//!
//! Entries of the `d × k` matrix are drawn row-major from the stream
//! [`PROJECTION_STREAM`](crate::rng::PROJECTION_STREAM), one standard normal
//! per entry, scaled by `σ_p = 1/√k`. [`ProjectionSampler`] yields the same
//! entries in row blocks so that large matrices never need to be resident.

use faer::Mat;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{DprpError, Result};
use crate::rng;

/// A `d × k` Gaussian projection matrix together with its seed.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionMatrix {
    entries: Mat<f64>,
    seed: u64,
}

impl ProjectionMatrix {
    pub fn rows(&self) -> usize {
        self.entries.nrows()
    }

    pub fn cols(&self) -> usize {
        self.entries.ncols()
    }

    pub fn entries(&self) -> &Mat<f64> {
        &self.entries
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }
}

fn check_dims(d: usize, k: usize) -> Result<()> {
    if d < 1 || k < 1 {
        return Err(DprpError::InvalidDimension(format!(
            "projection needs d >= 1 and k >= 1, got d = {d}, k = {k}"
        )));
    }
    Ok(())
}

/// Samples the `d × k` projection matrix of `seed`.
pub fn sample_projection(d: usize, k: usize, seed: u64) -> Result<ProjectionMatrix> {
    let entries = sample_transposed(d, k, seed)?.transpose().to_owned();
    Ok(ProjectionMatrix { entries, seed })
}

/// `Rᵗ` for the projection of `seed`, as a `k × d` matrix.
pub(crate) fn sample_transposed(d: usize, k: usize, seed: u64) -> Result<Mat<f64>> {
    let mut sampler = ProjectionSampler::new(d, k, seed)?;
    Ok(sampler.next_block_transposed(d).expect("d >= 1"))
}

/// Streams the rows of a projection matrix in blocks.
#[derive(Debug, Clone)]
pub struct ProjectionSampler {
    rng: ChaCha8Rng,
    next_row: usize,
    rows: usize,
    cols: usize,
    sigma_p: f64,
}

impl ProjectionSampler {
    pub fn new(d: usize, k: usize, seed: u64) -> Result<Self> {
        check_dims(d, k)?;
        Ok(Self {
            rng: rng::stream(rng::PROJECTION_STREAM, seed),
            next_row: 0,
            rows: d,
            cols: k,
            sigma_p: 1.0 / (k as f64).sqrt(),
        })
    }

    /// Index of the first row of the next block.
    pub fn position(&self) -> usize {
        self.next_row
    }

    /// The next `min(max_rows, remaining)` rows, or `None` once exhausted.
    pub fn next_block(&mut self, max_rows: usize) -> Option<Mat<f64>> {
        self.next_block_transposed(max_rows).map(|b| b.transpose().to_owned())
    }

    /// Like [`next_block`](Self::next_block) but returns the `k × rows`
    /// transpose, which is filled contiguously.
    pub fn next_block_transposed(&mut self, max_rows: usize) -> Option<Mat<f64>> {
        let n = max_rows.max(1).min(self.rows - self.next_row);
        if n == 0 {
            return None;
        }
        let mut block = Mat::zeros(self.cols, n);
        for i in 0..n {
            for z in block.col_mut(i).iter_mut() {
                let v: f64 = self.rng.sample(StandardNormal);
                *z = v * self.sigma_p;
            }
        }
        self.next_row += n;
        Some(block)
    }
}

/// Rows per block so that one block holds about eight million entries.
pub(crate) fn block_rows(k: usize) -> usize {
    ((1usize << 21) / k.max(1)).max(1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_blockwise_consistent() {
        let a = sample_projection(37, 5, 9).unwrap();
        let b = sample_projection(37, 5, 9).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, sample_projection(37, 5, 10).unwrap());
        let mut s = ProjectionSampler::new(37, 5, 9).unwrap();
        let mut row = 0;
        while let Some(block) = s.next_block(8) {
            for i in 0..block.nrows() {
                for j in 0..5 {
                    assert_eq!(block[(i, j)].to_bits(), a.entries()[(row + i, j)].to_bits());
                }
            }
            row += block.nrows();
        }
        assert_eq!(row, 37);
    }

    #[test]
    fn unit_column_for_k_one() {
        let r = sample_projection(20_000, 1, 3).unwrap();
        assert_eq!((r.rows(), r.cols()), (20_000, 1));
        let n = r.rows() as f64;
        let mean: f64 = (0..r.rows()).map(|i| r.entries()[(i, 0)]).sum::<f64>() / n;
        let var: f64 = (0..r.rows()).map(|i| (r.entries()[(i, 0)] - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!((var.sqrt() - 1.0).abs() < 0.03);
    }

    #[test]
    fn rejects_empty_dimensions() {
        assert!(matches!(sample_projection(0, 3, 1), Err(DprpError::InvalidDimension(_))));
        assert!(matches!(sample_projection(3, 0, 1), Err(DprpError::InvalidDimension(_))));
    }
}
