//! Householder reduction to tridiagonal form and implicit-shift QL.

use crate::error::{Error, Result};

const QL_MAX_SWEEPS: usize = 60;

/// Tridiagonal form `QᵀAQ` of a dense symmetric `n × n` row-major matrix.
pub(crate) struct Tridiagonal {
    pub diag: Vec<f64>,
    /// Sub-diagonal, `sub[i]` couples `i` and `i + 1`.
    pub sub: Vec<f64>,
    /// Row-major `Q` when requested.
    pub q: Option<Vec<f64>>,
}

/// Reduces `a` (destroyed) with Householder reflections applied from the left column.
pub(crate) fn tridiagonalize(a: &mut [f64], n: usize, accumulate: bool) -> Tridiagonal {
    debug_assert_eq!(a.len(), n * n);
    let mut diag = vec![0.0; n];
    let mut sub = vec![0.0; n.saturating_sub(1)];
    let mut reflectors: Vec<(usize, Vec<f64>)> = Vec::new();
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];

    for k in 0..n.saturating_sub(2) {
        let m = n - k - 1;
        let x = |i: usize| a[(k + 1 + i) * n + k];
        let scale: f64 = (0..m).map(|i| x(i).abs()).sum();
        if scale == 0.0 {
            sub[k] = 0.0;
            diag[k] = a[k * n + k];
            continue;
        }
        let mut norm2 = 0.0;
        for (i, vi) in v[..m].iter_mut().enumerate() {
            *vi = x(i) / scale;
            norm2 += *vi * *vi;
        }
        let norm = norm2.sqrt();
        let alpha = if v[0] > 0.0 { -norm } else { norm };
        v[0] -= alpha;
        let vnorm = v[..m].iter().map(|t| t * t).sum::<f64>().sqrt();
        if vnorm == 0.0 {
            sub[k] = a[(k + 1) * n + k];
            diag[k] = a[k * n + k];
            continue;
        }
        v[..m].iter_mut().for_each(|t| *t /= vnorm);

        // trailing block A22 <- H A22 H, H = I - 2vvᵀ
        let base = k + 1;
        for i in 0..m {
            let row = &a[(base + i) * n + base..(base + i) * n + n];
            p[i] = row.iter().zip(&v[..m]).map(|(r, t)| r * t).sum();
        }
        let kappa: f64 = (0..m).map(|i| v[i] * p[i]).sum();
        for i in 0..m {
            p[i] -= kappa * v[i];
        }
        for i in 0..m {
            let (vi, pi) = (v[i], p[i]);
            let row = &mut a[(base + i) * n + base..(base + i) * n + n];
            for j in 0..m {
                row[j] -= 2.0 * (vi * p[j] + pi * v[j]);
            }
        }
        diag[k] = a[k * n + k];
        sub[k] = alpha * scale;
        if accumulate {
            reflectors.push((k, v[..m].to_vec()));
        }
    }
    if n >= 2 {
        diag[n - 2] = a[(n - 2) * n + n - 2];
        diag[n - 1] = a[(n - 1) * n + n - 1];
        sub[n - 2] = a[(n - 1) * n + n - 2];
    } else if n == 1 {
        diag[0] = a[0];
    }

    let q = accumulate.then(|| {
        let mut q = vec![0.0; n * n];
        for i in 0..n {
            q[i * n + i] = 1.0;
        }
        // Q = H_0 H_1 ... ; apply in reverse to the identity
        for (k, v) in reflectors.iter().rev() {
            let base = k + 1;
            let m = v.len();
            for col in 0..n {
                let s: f64 = (0..m).map(|i| v[i] * q[(base + i) * n + col]).sum();
                if s != 0.0 {
                    for i in 0..m {
                        q[(base + i) * n + col] -= 2.0 * v[i] * s;
                    }
                }
            }
        }
        q
    });

    Tridiagonal { diag, sub, q }
}

/// Implicit-shift QL on a symmetric tridiagonal matrix.
///
/// On return `diag` holds the (unsorted) eigenvalues. `z` is a row-major
/// block with `n` columns and any number of rows; every plane rotation is
/// applied to its columns, so starting from `I` yields eigenvectors and
/// starting from a single row of `Q` yields that row of `Q·Z`.
pub(crate) fn ql_implicit(diag: &mut [f64], sub: &[f64], mut z: Option<&mut [f64]>) -> Result<()> {
    let n = diag.len();
    if n <= 1 {
        return Ok(());
    }
    let zrows = z.as_ref().map_or(0, |z| z.len() / n);
    let mut e = vec![0.0; n];
    e[..n - 1].copy_from_slice(sub);

    for l in 0..n {
        let mut sweeps = 0;
        loop {
            let mut m = l;
            while m < n - 1 {
                let dd = diag[m].abs() + diag[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            sweeps += 1;
            if sweeps > QL_MAX_SWEEPS {
                return Err(Error::Numerical {
                    routine: "ql_implicit",
                    detail: format!(
                        "no convergence for eigenvalue {l} after {QL_MAX_SWEEPS} sweeps (|e| = {:e})",
                        e[l].abs()
                    ),
                });
            }
            let mut g = (diag[l + 1] - diag[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = diag[m] - diag[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut underflow = false;
            let mut i = m;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    diag[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = diag[i + 1] - p;
                r = (diag[i] - g) * s + 2.0 * c * b;
                p = s * r;
                diag[i + 1] = g + p;
                g = c * r - b;
                if let Some(z) = z.as_deref_mut() {
                    for k in 0..zrows {
                        let row = &mut z[k * n..(k + 1) * n];
                        let f = row[i + 1];
                        row[i + 1] = s * row[i] + c * f;
                        row[i] = c * row[i] - s * f;
                    }
                }
            }
            if underflow {
                continue;
            }
            diag[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok(())
}

/// Eigenvalues and eigenvectors (columns of the returned row-major matrix)
/// of a small dense symmetric matrix, sorted by descending eigenvalue.
pub(crate) fn dense_eigen(a: &[f64], n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut work = a.to_vec();
    let mut t = tridiagonalize(&mut work, n, true);
    let mut z = t.q.take().unwrap_or_default();
    ql_implicit(&mut t.diag, &t.sub, Some(&mut z))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| t.diag[y].total_cmp(&t.diag[x]));
    let vals = order.iter().map(|&i| t.diag[i]).collect();
    let mut vecs = vec![0.0; n * n];
    for r in 0..n {
        for (c, &src) in order.iter().enumerate() {
            vecs[r * n + c] = z[r * n + src];
        }
    }
    Ok((vals, vecs))
}
