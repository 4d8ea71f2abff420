//! Per-row samplers for wedge sampling.
//!
//! A row's sampler draws column `a` with probability `A[r,a] / |A[r,*]|_1`
//! using Vose's alias method, so each draw costs one index and one uniform.

use std::io::Write;

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::matrix::SparseColumnMatrix;

#[derive(Debug, Clone, PartialEq)]
pub struct RowSampler {
    pub row: usize,
    pub l1_norm: f64,
    columns: Vec<usize>,
    prob: Vec<f64>,
    alias: Vec<usize>,
}

impl RowSampler {
    /// Builds the alias table over `(column, value)` pairs with positive values.
    /// An empty row gives an inert sampler with zero norm.
    pub fn new(row: usize, entries: &[(usize, f64)]) -> Result<Self> {
        let k = entries.len();
        if let Some(&(c, v)) = entries.iter().find(|&&(_, v)| !(v.is_finite() && v > 0.0)) {
            return Err(Error::Domain(format!("row {row}: column {c} has weight {v}")));
        }
        let l1_norm: f64 = entries.iter().map(|&(_, v)| v).sum();
        let columns: Vec<usize> = entries.iter().map(|&(c, _)| c).collect();
        let mut prob = vec![1.0; k];
        let mut alias: Vec<usize> = (0..k).collect();
        if k > 0 {
            let mut scaled: Vec<f64> = entries.iter().map(|&(_, v)| v * k as f64 / l1_norm).collect();
            let (mut small, mut large): (Vec<usize>, Vec<usize>) = (0..k).partition(|&i| scaled[i] < 1.0);
            while let (Some(&s), Some(&l)) = (small.last(), large.last()) {
                small.pop();
                large.pop();
                prob[s] = scaled[s];
                alias[s] = l;
                scaled[l] = (scaled[l] + scaled[s]) - 1.0;
                if scaled[l] < 1.0 {
                    small.push(l);
                } else {
                    large.push(l);
                }
            }
            // leftovers on either list are 1 up to rounding
            for i in small.into_iter().chain(large) {
                prob[i] = 1.0;
            }
            for p in &mut prob {
                *p = p.clamp(0.0, 1.0);
            }
        }
        Ok(Self { row, l1_norm, columns, prob, alias })
    }

    pub fn from_matrix_row(m: &SparseColumnMatrix, r: usize) -> Self {
        let (cols, vals) = m.row(r);
        let entries: Vec<(usize, f64)> = cols.iter().copied().zip(vals.iter().copied()).collect();
        Self::new(r, &entries).expect("matrix entries are positive")
    }

    pub fn is_inert(&self) -> bool {
        self.columns.is_empty()
    }

    pub fn support(&self) -> &[usize] {
        &self.columns
    }

    /// Exact probability the sampler assigns to each support slot.
    pub fn slot_probabilities(&self) -> Vec<f64> {
        let k = self.columns.len();
        let mut p = vec![0.0; k];
        for i in 0..k {
            p[i] += self.prob[i] / k as f64;
            p[self.alias[i]] += (1.0 - self.prob[i]) / k as f64;
        }
        p
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<usize> {
        if self.is_inert() {
            return Err(Error::InertSampler(self.row));
        }
        Ok(self.draw(rng))
    }

    /// Draw without the inert check; the sampler must have a non-empty support.
    #[inline]
    pub(crate) fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let i = rng.random_range(0..self.columns.len());
        let u: f64 = rng.random();
        if u < self.prob[i] {
            self.columns[i]
        } else {
            self.columns[self.alias[i]]
        }
    }
}

/// Builds one sampler per row, in row order.
pub fn build_row_samplers(m: &SparseColumnMatrix) -> Vec<RowSampler> {
    (0..m.n_rows()).into_par_iter().map(|r| RowSampler::from_matrix_row(m, r)).collect()
}

/// `w_r = |A[r,*]|_1 * |B[r,*]|_1`.
pub fn wedge_weight(r: usize, a: &SparseColumnMatrix, b: &SparseColumnMatrix) -> f64 {
    a.row_l1_norms()[r] * b.row_l1_norms()[r]
}

/// Diagnostic dump: `r<TAB>l1_norm_A<TAB>l1_norm_B<TAB>w_r`.
pub fn write_weights<W: Write>(mut w: W, a: &SparseColumnMatrix, b: &SparseColumnMatrix) -> Result<()> {
    for r in 0..a.n_rows() {
        let (la, lb) = (a.row_l1_norms()[r], b.row_l1_norms()[r]);
        writeln!(w, "{r}\t{la}\t{lb}\t{}", wedge_weight(r, a, b))?;
    }
    Ok(())
}
