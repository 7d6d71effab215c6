//! Right-edge constants of the generalized Marchenko–Pastur law and the
//! Stieltjes transform of its companion distribution.
//!
//! The population spectrum `H_n` is the uniform measure on the diagonal
//! entries of `T`. Integrals against it are exact finite sums over the
//! distinct atoms.
//!
//! Convention: `ξ₊` is the root in `(0, 1/max t)` of
//! `Φ(ξ) = c_n ∫ (tξ/(1−tξ))² dH_n(t) = 1`, and
//!
//! ```text
//! E₊  = (1/ξ₊) (1 + c_n ∫ tξ₊/(1−tξ₊) dH_n)
//! γ₀³ = (1/ξ₊³)(1 + c_n ∫ (tξ₊/(1−tξ₊))³ dH_n)
//! ```
//!
//! This is the critical point of the inverse map
//! `z(m) = −1/m + c_n ∫ t/(1+tm) dH_n` at `m = −ξ₊`, and it reduces to
//! `E₊ = (1+√c)²`, `γ₀ = c^{-1/6}(1+√c)^{4/3}` when `T = I`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::eig::Spectrum;
use crate::error::{Error, Result};

/// Tag stored in every [`EdgeParams`] produced by the general solver.
pub const CONVENTION_NOTE: &str = "critical-point convention: c_n*mean((t*xi/(1-t*xi))^2) = 1; \
c_n (not 1/c_n) multiplies the integrals in E+ and gamma0^3; reduces to (1+sqrt c)^2 at T = I. \
Literal alternative: mean((t*xi/(1-t*xi))^2) = p/n with 1/c_n factors.";

const XI_BISECTION_STEPS: usize = 200;
const EDGE_MARGIN: f64 = 1e-8;
const FP_DAMPING: f64 = 0.5;
const FP_MAX_ITER: usize = 10_000;
const NEWTON_MAX_ITER: usize = 200;
const RESIDUAL_TOL: f64 = 1e-10;
/// Smallest imaginary part accepted by density queries.
pub const ETA_FLOOR: f64 = 1e-8;
pub const DEFAULT_ETA: f64 = 1e-6;

/// Spectral inputs of the edge law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationShape {
    tvals: Vec<f64>,
    c_n: f64,
    y_n: f64,
    /// Distinct atoms of `H_n` with their probabilities.
    #[serde(skip)]
    atoms: Vec<(f64, f64)>,
}

impl PopulationShape {
    pub fn new(tvals: Vec<f64>, c_n: f64, y_n: f64) -> Result<Self> {
        if tvals.is_empty() {
            return Err(Error::InvalidInput("tvals must not be empty".into()));
        }
        if let Some((i, t)) = tvals
            .iter()
            .enumerate()
            .find(|(_, t)| !(t.is_finite() && **t > 0.0))
        {
            return Err(Error::InvalidInput(format!(
                "tvals[{i}] = {t} is not a positive finite number"
            )));
        }
        if !(c_n.is_finite() && c_n > 0.0) {
            return Err(Error::InvalidInput(format!("c_n must be positive, got {c_n}")));
        }
        if !(0.0..=1.0).contains(&y_n) {
            return Err(Error::InvalidInput(format!("y_n must lie in [0, 1], got {y_n}")));
        }
        let atoms = atoms_of(&tvals);
        Ok(Self {
            tvals,
            c_n,
            y_n,
            atoms,
        })
    }

    /// `T = I` with ratio `c_n`.
    pub fn identity(c_n: f64) -> Result<Self> {
        Self::new(vec![1.0], c_n, 0.0)
    }

    pub fn tvals(&self) -> &[f64] {
        &self.tvals
    }

    pub fn c_n(&self) -> f64 {
        self.c_n
    }

    pub fn y_n(&self) -> f64 {
        self.y_n
    }

    pub fn max_t(&self) -> f64 {
        self.tvals.iter().fold(0.0, |m: f64, &t| m.max(t))
    }

    /// `∫ f(t) dH_n(t)`.
    fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.atoms.iter().map(|&(t, w)| w * f(t)).sum()
    }

    fn integrate_c(&self, f: impl Fn(f64) -> Complex64) -> Complex64 {
        self.atoms.iter().map(|&(t, w)| f(t) * w).sum()
    }
}

fn atoms_of(tvals: &[f64]) -> Vec<(f64, f64)> {
    let mut sorted = tvals.to_vec();
    sorted.sort_by(f64::total_cmp);
    let w = 1.0 / tvals.len() as f64;
    let mut atoms: Vec<(f64, f64)> = Vec::new();
    for t in sorted {
        match atoms.last_mut() {
            Some((v, mass)) if *v == t => *mass += w,
            _ => atoms.push((t, w)),
        }
    }
    atoms
}

/// Solved right-edge constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeParams {
    pub xi_plus: f64,
    pub e_plus: f64,
    pub gamma0: f64,
    pub convention_note: String,
    /// Set when `max(t)·ξ₊` is within `1e-8` of 1.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub warning: Option<String>,
}

/// `Φ(ξ) = c_n ∫ (tξ/(1−tξ))² dH_n`.
pub fn phi(shape: &PopulationShape, xi: f64) -> f64 {
    shape.c_n
        * shape.integrate(|t| {
            let r = t * xi / (1.0 - t * xi);
            r * r
        })
}

/// The root `ξ₊ ∈ (0, 1/max t)` of `Φ(ξ) = 1`, by bisection.
pub fn solve_xi(shape: &PopulationShape) -> f64 {
    let tmax = shape.max_t();
    let mut lo = 1e-15;
    let mut hi = (1.0 - 1e-12) / tmax;
    for _ in 0..XI_BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if phi(shape, mid) > 1.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// `E₊` and `γ₀` from the critical-point convention.
pub fn edge_params(shape: &PopulationShape) -> EdgeParams {
    let xi = solve_xi(shape);
    let c = shape.c_n;
    let first = shape.integrate(|t| t * xi / (1.0 - t * xi));
    let third = shape.integrate(|t| (t * xi / (1.0 - t * xi)).powi(3));
    let e_plus = (1.0 + c * first) / xi;
    let gamma0 = ((1.0 + c * third) / xi.powi(3)).cbrt();
    let margin = 1.0 - shape.max_t() * xi;
    let warning = (margin < EDGE_MARGIN).then(|| {
        format!("ill-conditioned edge: 1 - max(t)*xi_plus = {margin:e} is below {EDGE_MARGIN:e}")
    });
    EdgeParams {
        xi_plus: xi,
        e_plus,
        gamma0,
        convention_note: CONVENTION_NOTE.to_string(),
        warning,
    }
}

/// Closed-form constants for `T = I` (Spearman and spatial-sign matrices).
pub fn spearman_edge(c_n: f64) -> Result<EdgeParams> {
    if !(c_n.is_finite() && c_n > 0.0) {
        return Err(Error::InvalidInput(format!("c_n must be positive, got {c_n}")));
    }
    let root = c_n.sqrt();
    let e_plus = (1.0 + root).powi(2);
    Ok(EdgeParams {
        xi_plus: 1.0 / (1.0 + root),
        e_plus,
        gamma0: c_n.powf(-1.0 / 6.0) * e_plus.powf(2.0 / 3.0),
        convention_note: "closed form for T = I: E+ = (1+sqrt c)^2, gamma0 = c^(-1/6) E+^(2/3)".into(),
        warning: None,
    })
}

/// Finite-sample centering and scale for `n^{2/3}(λ − E₊)/γ₀`:
/// `E₊ = ((√(n−1)+√p)/√n)²`,
/// `γ₀ = (√(n−1)+√p)(1/√(n²(n−1)) + 1/√(n²p))^{1/3}`.
pub fn johnstone_edge(n: usize, p: usize) -> Result<EdgeParams> {
    if n < 2 || p < 1 {
        return Err(Error::InvalidInput(format!(
            "johnstone constants need n >= 2 and p >= 1, got n = {n}, p = {p}"
        )));
    }
    let (nf, pf) = (n as f64, p as f64);
    let s = (nf - 1.0).sqrt() + pf.sqrt();
    let e_plus = (s / nf.sqrt()).powi(2);
    let gamma0 = s * (1.0 / (nf * nf * (nf - 1.0)).sqrt() + 1.0 / (nf * nf * pf).sqrt()).cbrt();
    Ok(EdgeParams {
        xi_plus: 1.0 / (1.0 + (pf / nf).sqrt()),
        e_plus,
        gamma0,
        convention_note: "finite-n Johnstone centering/scaling; xi_plus is the asymptotic T = I value".into(),
        warning: None,
    })
}

/// `n^{2/3} (λ₁ − E₊) / γ₀`.
pub fn normalize_stat(lambda1: f64, ep: &EdgeParams, n: usize) -> f64 {
    (n as f64).powf(2.0 / 3.0) * (lambda1 - ep.e_plus) / ep.gamma0
}

/// Inverse of [`normalize_stat`]: the eigenvalue with normalized value `s`.
pub fn denormalize_stat(s: f64, ep: &EdgeParams, n: usize) -> f64 {
    ep.e_plus + ep.gamma0 * (n as f64).powf(-2.0 / 3.0) * s
}

/// Solution of the self-consistent equation at a point of the upper half-plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StieltjesPoint {
    pub z: Complex64,
    /// Companion transform `m̲` (the `n × n` side).
    pub m_under: Complex64,
    /// Transform of `F_{c_n,H_n}` (the `p × p` side).
    pub m: Complex64,
    pub residual: f64,
    pub iterations: usize,
}

/// `z − (−1/m̲ + c_n ∫ t/(1+t m̲) dH_n)`.
fn residual(shape: &PopulationShape, z: Complex64, mu: Complex64) -> Complex64 {
    let c = shape.c_n;
    z - (-mu.inv() + shape.integrate_c(|t| t / (1.0 + t * mu)) * c)
}

/// Solves `z = −1/m̲ + c_n ∫ t/(1+t m̲) dH_n` for `m̲` with `Im m̲ > 0`.
///
/// Damped fixed-point iteration from `m̲₀ = −1/z`; if it stalls near the
/// spectral edges the last iterate is polished by Newton steps that are
/// only accepted while they stay in the upper half-plane.
pub fn stieltjes_m(z: Complex64, shape: &PopulationShape) -> Result<StieltjesPoint> {
    if !(z.im > 0.0) || !z.re.is_finite() || !z.im.is_finite() {
        return Err(Error::Domain(format!("Stieltjes point needs Im z > 0, got {z}")));
    }
    let c = shape.c_n;
    let mut mu = -z.inv();
    let mut res = residual(shape, z, mu).norm();
    let mut iterations = 0;
    while res > RESIDUAL_TOL && iterations < FP_MAX_ITER {
        let denom = z - shape.integrate_c(|t| t / (1.0 + t * mu)) * c;
        let update = -denom.inv();
        mu = mu * (1.0 - FP_DAMPING) + update * FP_DAMPING;
        res = residual(shape, z, mu).norm();
        iterations += 1;
    }

    let mut newton = 0;
    while res > RESIDUAL_TOL && newton < NEWTON_MAX_ITER {
        // g(m) = -1/m + c ∫ t/(1+tm) - z, g'(m) = 1/m² - c ∫ t²/(1+tm)²
        let g = -residual(shape, z, mu);
        let dg = (mu * mu).inv() - shape.integrate_c(|t| (t * t) / ((1.0 + t * mu) * (1.0 + t * mu))) * c;
        if dg.norm() == 0.0 {
            break;
        }
        let mut step = g / dg;
        let mut accepted = false;
        for _ in 0..40 {
            let cand = mu - step;
            if cand.im > 0.0 {
                let r = residual(shape, z, cand).norm();
                if r < res {
                    mu = cand;
                    res = r;
                    accepted = true;
                    break;
                }
            }
            step *= 0.5;
        }
        newton += 1;
        if !accepted {
            break;
        }
    }
    iterations += newton;

    if res > RESIDUAL_TOL || !(mu.im > 0.0) {
        return Err(Error::Numerical {
            routine: "stieltjes_m",
            detail: format!(
                "no convergence at z = {z} after {iterations} iterations, residual {res:e}"
            ),
        });
    }
    let m = (mu + (1.0 - c) / z) / c;
    Ok(StieltjesPoint {
        z,
        m_under: mu,
        m,
        residual: res,
        iterations,
    })
}

/// Density of `F_{c_n,H_n}` at `x`, recovered as `Im m(x + iη)/π`.
pub fn density_at(x: f64, shape: &PopulationShape, eta: f64) -> Result<f64> {
    let eta = eta.max(ETA_FLOOR);
    let point = stieltjes_m(Complex64::new(x, eta), shape)?;
    Ok((point.m.im / std::f64::consts::PI).max(0.0))
}

/// `|ξ₊ + Re m̲(E₊ + i·10⁻⁶)|`.
pub fn xi_mstieltjes_consistency(shape: &PopulationShape) -> Result<f64> {
    let ep = edge_params(shape);
    let point = stieltjes_m(Complex64::new(ep.e_plus, 1e-6), shape)?;
    Ok((ep.xi_plus + point.m_under.re).abs())
}

/// Closed-form Marchenko–Pastur density for `T = I`, ratio `c <= 1`.
pub fn mp_density(x: f64, c: f64) -> f64 {
    let lo = (1.0 - c.sqrt()).powi(2);
    let hi = (1.0 + c.sqrt()).powi(2);
    if x <= lo || x >= hi {
        return 0.0;
    }
    ((hi - x) * (x - lo)).sqrt() / (2.0 * std::f64::consts::PI * c * x)
}

/// Tabulated CDF of `F_{c_n,H_n}` on `[0, upper]`, built by integrating
/// [`density_at`] on a grid uniform in `√x`, plus the atom `1 − 1/c` at zero
/// when `c_n > 1`.
#[derive(Debug, Clone, Serialize)]
pub struct LimitingCdf {
    xs: Vec<f64>,
    cdf: Vec<f64>,
    density: Vec<f64>,
}

impl LimitingCdf {
    pub fn new(shape: &PopulationShape, points: usize, eta: f64) -> Result<Self> {
        let points = points.max(16);
        let ep = edge_params(shape);
        let upper = ep.e_plus * 1.05;
        let root_hi = upper.sqrt();
        let atom = if shape.c_n > 1.0 { 1.0 - 1.0 / shape.c_n } else { 0.0 };
        let mut xs = Vec::with_capacity(points + 1);
        let mut density = Vec::with_capacity(points + 1);
        // integrand in u = √x is 2u·ρ(u²)
        let mut weighted = Vec::with_capacity(points + 1);
        for i in 0..=points {
            let u = root_hi * i as f64 / points as f64;
            let x = u * u;
            let rho = if i == 0 { 0.0 } else { density_at(x, shape, eta)? };
            xs.push(x);
            density.push(rho);
            weighted.push(2.0 * u * rho);
        }
        let du = root_hi / points as f64;
        let mut cdf = Vec::with_capacity(points + 1);
        let mut acc = atom;
        cdf.push(acc);
        for i in 1..=points {
            acc += 0.5 * du * (weighted[i - 1] + weighted[i]);
            cdf.push(acc.min(1.0));
        }
        Ok(Self { xs, cdf, density })
    }

    pub fn eval(&self, x: f64) -> f64 {
        if x < 0.0 {
            return 0.0;
        }
        let last = self.xs.len() - 1;
        if x >= self.xs[last] {
            return self.cdf[last];
        }
        let idx = self.xs.partition_point(|&v| v <= x).max(1);
        let (x0, x1) = (self.xs[idx - 1], self.xs[idx]);
        let (f0, f1) = (self.cdf[idx - 1], self.cdf[idx]);
        f0 + (f1 - f0) * (x - x0) / (x1 - x0)
    }

    /// Total mass captured by the table (1 up to quadrature and `η` error).
    pub fn total_mass(&self) -> f64 {
        *self.cdf.last().expect("non-empty grid")
    }

    pub fn grid(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        self.xs
            .iter()
            .zip(&self.density)
            .zip(&self.cdf)
            .map(|((&x, &d), &f)| (x, d, f))
    }

    /// Kolmogorov distance between the empirical spectral distribution and this CDF.
    pub fn ks_distance(&self, spectrum: &Spectrum) -> f64 {
        let mut vals = spectrum.values().to_vec();
        vals.sort_by(f64::total_cmp);
        let n = vals.len() as f64;
        vals.iter()
            .enumerate()
            .map(|(i, &v)| {
                let f = self.eval(v);
                (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
            })
            .fold(0.0, f64::max)
    }
}
