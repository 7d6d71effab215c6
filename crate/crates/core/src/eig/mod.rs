//! Symmetric eigenvalues: full spectra by Householder + QL, top-k by Lanczos.
//!
//! Only eigenvalues are ever returned. Top-k solves accept any
//! [`SymOperator`], so the Gram form `(1/n)·B·Bᵀ` is applied matrix-free in
//! `O(p·n)` per product instead of being materialized.

mod lanczos;
mod tridiag;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{DataMatrix, SymMatrix};

/// Below this dimension top-k solves fall back to a full dense solve.
const DENSE_CUTOFF: usize = 48;

/// Eigenvalues sorted in descending order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    values: Vec<f64>,
    /// Dimension of the matrix the values came from.
    dim: usize,
}

impl Spectrum {
    pub fn new(mut values: Vec<f64>, dim: usize) -> Self {
        values.sort_by(|a, b| b.total_cmp(a));
        Self { values, dim }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn largest(&self) -> Option<f64> {
        self.values.first().copied()
    }

    pub fn is_full(&self) -> bool {
        self.values.len() == self.dim
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

/// A symmetric linear map given only through its action on vectors.
pub trait SymOperator: Sync {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64], y: &mut [f64]);
    /// Dense symmetric materialization, used for small problems.
    fn to_sym(&self) -> SymMatrix;
}

impl SymOperator for SymMatrix {
    fn dim(&self) -> usize {
        SymMatrix::dim(self)
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.mul_vec(x, y)
    }

    fn to_sym(&self) -> SymMatrix {
        self.clone()
    }
}

/// `scale · B · Bᵀ` for a `p × n` matrix `B`, applied as `B (Bᵀ x)`.
pub struct GramOperator<'a> {
    b: &'a DataMatrix,
    scale: f64,
}

impl<'a> GramOperator<'a> {
    pub fn new(b: &'a DataMatrix, scale: f64) -> Self {
        Self { b, scale }
    }

    /// `(1/n)·B·Bᵀ` with `n = cols(B)`.
    pub fn sample_covariance(b: &'a DataMatrix) -> Self {
        Self::new(b, 1.0 / b.cols() as f64)
    }
}

impl SymOperator for GramOperator<'_> {
    fn dim(&self) -> usize {
        self.b.rows()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let n = self.b.cols();
        let mut t = vec![0.0; n];
        for (row, &xi) in self.b.row_iter().zip(x) {
            if xi != 0.0 {
                t.iter_mut().zip(row).for_each(|(ti, bi)| *ti += xi * bi);
            }
        }
        for (yi, row) in y.iter_mut().zip(self.b.row_iter()) {
            *yi = self.scale * row.iter().zip(&t).map(|(a, b)| a * b).sum::<f64>();
        }
    }

    fn to_sym(&self) -> SymMatrix {
        SymMatrix::from_fn(self.b.rows(), |i, j| {
            self.scale
                * self
                    .b
                    .row(i)
                    .iter()
                    .zip(self.b.row(j))
                    .map(|(a, b)| a * b)
                    .sum::<f64>()
        })
    }
}

/// Full spectrum of a symmetric matrix.
pub fn eigs_sym(a: &SymMatrix) -> Result<Spectrum> {
    let n = a.dim();
    if n == 0 {
        return Ok(Spectrum::new(Vec::new(), 0));
    }
    let mut dense = a.to_dense();
    let mut t = tridiag::tridiagonalize(&mut dense, n, false);
    tridiag::ql_implicit(&mut t.diag, &t.sub, None)?;
    Ok(Spectrum::new(t.diag, n))
}

/// The `k` largest eigenvalues of a symmetric matrix.
pub fn top_eigs(a: &SymMatrix, k: usize) -> Result<Spectrum> {
    top_eigs_op(a, k)
}

/// The `k` largest eigenvalues of a symmetric operator.
///
/// Above the dense cutoff a single Krylov sequence is used, so an eigenvalue
/// repeated *exactly* inside the top `k` may be reported once; continuous
/// data never produce that case.
pub fn top_eigs_op(op: &dyn SymOperator, k: usize) -> Result<Spectrum> {
    let dim = op.dim();
    if k == 0 || k > dim {
        return Err(Error::InvalidInput(format!(
            "k must satisfy 1 <= k <= {dim}, got {k}"
        )));
    }
    let values = if dim <= DENSE_CUTOFF || 3 * k >= dim {
        let mut all = eigs_sym(&op.to_sym())?.into_values();
        all.truncate(k);
        all
    } else {
        let opts = lanczos::LanczosOptions::for_problem(dim, k);
        lanczos::top_eigenvalues(op, k, &opts)?
    };
    Ok(Spectrum::new(values, dim))
}

/// Top `k` eigenvalues of `(1/n)·B·Bᵀ` without forming it.
pub fn top_eigs_gram(b: &DataMatrix, k: usize) -> Result<Spectrum> {
    top_eigs_op(&GramOperator::sample_covariance(b), k)
}

/// Empirical spectral distribution: fraction of eigenvalues `<= x`.
pub fn esd_cdf(s: &Spectrum, x: f64) -> f64 {
    if s.is_empty() {
        return 0.0;
    }
    let count = s.values().iter().filter(|&&v| v <= x).count();
    count as f64 / s.len() as f64
}
