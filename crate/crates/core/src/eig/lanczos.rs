//! Thick-restart Lanczos with full reorthogonalization for the largest eigenvalues.

use super::tridiag::{dense_eigen, ql_implicit};
use super::SymOperator;
use crate::error::{Error, Result};

/// Ritz residual tolerance relative to the largest Ritz value magnitude.
const RESIDUAL_TOL: f64 = 1e-11;

pub(crate) struct LanczosOptions {
    pub max_basis: usize,
    pub max_matvecs: usize,
}

impl LanczosOptions {
    pub fn for_problem(dim: usize, k: usize) -> Self {
        let max_basis = (2 * k + 80).min(dim);
        Self {
            max_basis,
            max_matvecs: 60 * max_basis + 2000,
        }
    }
}

struct Splitmix(u64);

impl Splitmix {
    fn next_unit(&mut self) -> f64 {
        self.0 = self.0.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^= z >> 31;
        (z >> 11) as f64 / (1u64 << 53) as f64 - 0.5
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Removes the components of `w` along every basis vector, twice; returns the coefficients.
fn orthogonalize(basis: &[Vec<f64>], w: &mut [f64]) -> Vec<f64> {
    let mut coeffs = vec![0.0; basis.len()];
    for _ in 0..2 {
        for (c, v) in coeffs.iter_mut().zip(basis) {
            let h = dot(v, w);
            *c += h;
            w.iter_mut().zip(v).for_each(|(wi, vi)| *wi -= h * vi);
        }
    }
    coeffs
}

/// Fresh unit vector orthogonal to `basis`, or `None` if the basis spans everything.
fn random_orthogonal(basis: &[Vec<f64>], dim: usize, rng: &mut Splitmix) -> Option<Vec<f64>> {
    for _ in 0..5 {
        let mut v: Vec<f64> = (0..dim).map(|_| rng.next_unit()).collect();
        let before = norm(&v);
        orthogonalize(basis, &mut v);
        let after = norm(&v);
        if after > 1e-8 * before {
            v.iter_mut().for_each(|x| *x /= after);
            return Some(v);
        }
    }
    None
}

/// Top `k` eigenvalues (descending) of a symmetric operator.
pub(crate) fn top_eigenvalues(op: &dyn SymOperator, k: usize, opts: &LanczosOptions) -> Result<Vec<f64>> {
    let dim = op.dim();
    let mb = opts.max_basis.max(k + 1).min(dim);
    let mut rng = Splitmix(0x5eed_0000_0000_0000 ^ dim as u64);

    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(mb);
    // projected matrix VᵀAV, row-major mb × mb
    let mut proj = vec![0.0; mb * mb];
    // true while proj is tridiagonal (no restart yet)
    let mut tridiagonal = true;
    let mut next = random_orthogonal(&basis, dim, &mut rng).expect("dim >= 1");
    let mut beta;
    let mut w = vec![0.0; dim];
    let mut matvecs = 0;
    let mut anorm: f64 = 0.0;
    let mut last_checked = 0;

    loop {
        // expand
        let j = basis.len();
        op.apply(&next, &mut w);
        matvecs += 1;
        basis.push(std::mem::take(&mut next));
        let coeffs = orthogonalize(&basis, &mut w);
        for (i, &h) in coeffs.iter().enumerate() {
            proj[i * mb + j] = h;
            proj[j * mb + i] = h;
        }
        if tridiagonal {
            // entries below the first sub-diagonal are rounding noise
            for i in 0..j.saturating_sub(1) {
                proj[i * mb + j] = 0.0;
                proj[j * mb + i] = 0.0;
            }
        }
        anorm = anorm.max(coeffs.iter().fold(0.0_f64, |m, h| m.max(h.abs())));
        beta = norm(&w);
        let m = basis.len();
        let invariant = beta <= 1e-13 * anorm.max(f64::MIN_POSITIVE);

        let full = m == mb;
        let due = m >= k && (m - last_checked >= 5 || full || invariant || m == dim);
        if due {
            last_checked = m;
            let resid_beta = if invariant { 0.0 } else { beta };
            let (vals, last_row) = ritz_values(&proj, mb, m, tridiagonal)?;
            let scale = vals.iter().fold(0.0_f64, |a, v| a.max(v.abs())).max(anorm);
            let converged = (0..k).all(|i| resid_beta * last_row[i].abs() <= RESIDUAL_TOL * scale);
            // an invariant subspace smaller than the whole space may hide
            // repeated eigenvalues, so keep exploring until it holds k + 1 vectors
            if converged && (m > k || m == dim) {
                return Ok(vals[..k].to_vec());
            }
            if m == dim {
                return Ok(vals[..k].to_vec());
            }
        }
        if matvecs >= opts.max_matvecs {
            return Err(Error::Numerical {
                routine: "lanczos",
                detail: format!("top-{k} not converged after {matvecs} products (dim {dim}, basis {mb})"),
            });
        }

        if invariant {
            match random_orthogonal(&basis, dim, &mut rng) {
                Some(v) => next = v,
                None => {
                    let (vals, _) = ritz_values(&proj, mb, basis.len(), tridiagonal)?;
                    return Ok(vals[..k.min(vals.len())].to_vec());
                }
            }
        } else {
            next = w.iter().map(|x| x / beta).collect();
        }

        if basis.len() == mb && mb < dim {
            // thick restart: keep the leading Ritz vectors
            let keep = (k + (mb - k) / 2).min(mb - 1).max(k);
            let mut dense = vec![0.0; mb * mb];
            dense.copy_from_slice(&proj[..mb * mb]);
            let (vals, vecs) = dense_eigen(&dense, mb)?;
            let mut kept = Vec::with_capacity(keep);
            for c in 0..keep {
                let mut y = vec![0.0; dim];
                for (r, v) in basis.iter().enumerate() {
                    let s = vecs[r * mb + c];
                    y.iter_mut().zip(v).for_each(|(yi, vi)| *yi += s * vi);
                }
                kept.push(y);
            }
            basis = kept;
            proj.iter_mut().for_each(|x| *x = 0.0);
            for (c, &v) in vals.iter().take(keep).enumerate() {
                proj[c * mb + c] = v;
            }
            tridiagonal = false;
            last_checked = 0;
        }
    }
}

/// Descending Ritz values and the matching last components of the Ritz vectors
/// (in the projected basis).
fn ritz_values(proj: &[f64], mb: usize, m: usize, tridiagonal: bool) -> Result<(Vec<f64>, Vec<f64>)> {
    let (d, row) = if tridiagonal {
        let diag: Vec<f64> = (0..m).map(|i| proj[i * mb + i]).collect();
        let sub: Vec<f64> = (0..m.saturating_sub(1)).map(|i| proj[(i + 1) * mb + i]).collect();
        let mut d = diag;
        let mut row = vec![0.0; m];
        row[m - 1] = 1.0;
        ql_implicit(&mut d, &sub, Some(&mut row))?;
        (d, row)
    } else {
        let mut dense = vec![0.0; m * m];
        for i in 0..m {
            dense[i * m..(i + 1) * m].copy_from_slice(&proj[i * mb..i * mb + m]);
        }
        let (vals, vecs) = dense_eigen(&dense, m)?;
        let row = vecs[(m - 1) * m..m * m].to_vec();
        (vals, row)
    };
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| d[b].total_cmp(&d[a]));
    let vals = order.iter().map(|&i| d[i]).collect();
    let last = order.iter().map(|&i| row[i]).collect();
    Ok((vals, last))
}
