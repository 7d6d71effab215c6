//! Type-1 Tracy–Widom distribution from an embedded monotone table.
//!
//! The table (`assets/tw1.txt`) lists `s` and `F₁(s)` on `[-10, 6]` with
//! step 0.02, computed from the Hastings–McLeod solution of Painlevé II
//! (`assets/gen_tw1_table.py` regenerates it). Between nodes the CDF is a
//! monotone piecewise-cubic Hermite interpolant; beyond the ends it follows
//! `log F ≈ a − b|s|³` on the left and `log(1 − F) ≈ a − b·s^{3/2}` on the
//! right, with `a, b` fitted to the two outermost nodes on each side.

use std::sync::OnceLock;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const TW1_TABLE_TEXT: &str = include_str!("../assets/tw1.txt");

/// SHA-256 of `assets/tw1.txt`.
pub const TW1_TABLE_SHA256: &str = "6a00991d60a2564b4044b6884a72ea7979c801f0236a486205f199c9c33ed1ed";

/// Reference quantiles `(q, s)` every loaded table must reproduce within 0.01.
pub const TW1_ANCHORS: [(f64, f64); 3] = [(0.05, -3.1880), (0.50, -1.2680), (0.95, 0.9765)];
const ANCHOR_TOL: f64 = 0.01;
const MIN_COVERAGE: (f64, f64) = (-10.0, 6.0);
const MAX_SPACING: f64 = 0.05 + 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
struct Tail {
    a: f64,
    b: f64,
}

/// Monotone grid representation of the TW₁ CDF.
#[derive(Debug, Clone, PartialEq)]
pub struct TW1Table {
    s: Vec<f64>,
    f: Vec<f64>,
    slopes: Vec<f64>,
    left: Tail,
    right: Tail,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

impl TW1Table {
    /// Parses two whitespace-separated columns `s F`; `#` starts a comment.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut s = Vec::new();
        let mut f = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 2 {
                return Err(Error::Parse {
                    line: lineno + 1,
                    column: 1,
                    message: format!("expected 2 columns, found {}", fields.len()),
                });
            }
            let parse = |idx: usize| -> Result<f64> {
                fields[idx].parse::<f64>().map_err(|e| Error::Parse {
                    line: lineno + 1,
                    column: idx + 1,
                    message: e.to_string(),
                })
            };
            s.push(parse(0)?);
            f.push(parse(1)?);
        }
        Self::from_nodes(s, f)
    }

    pub fn from_nodes(s: Vec<f64>, f: Vec<f64>) -> Result<Self> {
        let bad = |msg: String| Err(Error::InvalidInput(format!("TW1 table: {msg}")));
        if s.len() < 4 || s.len() != f.len() {
            return bad(format!("need at least 4 matching nodes, got {} and {}", s.len(), f.len()));
        }
        if s.windows(2).any(|w| !(w[1] > w[0])) || f.windows(2).any(|w| !(w[1] > w[0])) {
            return bad("nodes must be strictly increasing in s and F".into());
        }
        if f[0] <= 0.0 || f[f.len() - 1] >= 1.0 {
            return bad("F must lie strictly inside (0, 1)".into());
        }
        if s[0] > MIN_COVERAGE.0 || s[s.len() - 1] < MIN_COVERAGE.1 {
            return bad(format!("must cover [{}, {}]", MIN_COVERAGE.0, MIN_COVERAGE.1));
        }
        if s.windows(2).any(|w| w[1] - w[0] > MAX_SPACING) {
            return bad("node spacing exceeds 0.05".into());
        }

        let slopes = pchip_slopes(&s, &f);
        let n = s.len();
        let left = {
            let (s0, s1) = (s[0].abs().powi(3), s[1].abs().powi(3));
            let b = (f[1].ln() - f[0].ln()) / (s0 - s1);
            Tail { a: f[0].ln() + b * s0, b }
        };
        let right = {
            let (s0, s1) = (s[n - 2].powf(1.5), s[n - 1].powf(1.5));
            let (g0, g1) = ((1.0 - f[n - 2]).ln(), (1.0 - f[n - 1]).ln());
            let b = (g0 - g1) / (s1 - s0);
            Tail { a: g1 + b * s1, b }
        };
        if !(left.b > 0.0 && right.b > 0.0) {
            return bad("tail fits are not decaying".into());
        }
        let table = Self {
            s,
            f,
            slopes,
            left,
            right,
        };
        for (q, want) in TW1_ANCHORS {
            let got = table.quantile(q)?;
            if (got - want).abs() > ANCHOR_TOL {
                return bad(format!("quantile({q}) = {got:.4}, expected {want} +/- {ANCHOR_TOL}"));
            }
        }
        Ok(table)
    }

    /// The embedded table, verified against its pinned checksum once.
    pub fn embedded() -> &'static TW1Table {
        static TABLE: OnceLock<TW1Table> = OnceLock::new();
        TABLE.get_or_init(|| {
            let sum = sha256_hex(TW1_TABLE_TEXT.as_bytes());
            assert_eq!(sum, TW1_TABLE_SHA256, "embedded TW1 table checksum mismatch");
            TW1Table::from_text(TW1_TABLE_TEXT).expect("embedded TW1 table is valid")
        })
    }

    pub fn len(&self) -> usize {
        self.s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s.is_empty()
    }

    pub fn range(&self) -> (f64, f64) {
        (self.s[0], self.s[self.s.len() - 1])
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let n = self.s.len();
        if x.is_nan() {
            return f64::NAN;
        }
        if x < self.s[0] {
            return (self.left.a - self.left.b * x.abs().powi(3)).exp().max(f64::MIN_POSITIVE);
        }
        if x > self.s[n - 1] {
            return 1.0 - self.right_tail(x);
        }
        let i = (self.s.partition_point(|&v| v <= x).max(1) - 1).min(n - 2);
        hermite(
            self.s[i],
            self.s[i + 1],
            self.f[i],
            self.f[i + 1],
            self.slopes[i],
            self.slopes[i + 1],
            x,
        )
    }

    fn right_tail(&self, x: f64) -> f64 {
        (self.right.a - self.right.b * x.powf(1.5)).exp()
    }

    pub fn pvalue(&self, x: f64) -> f64 {
        if x > self.s[self.s.len() - 1] {
            self.right_tail(x)
        } else {
            1.0 - self.cdf(x)
        }
    }

    /// Inverse CDF by bisection, accurate to `1e-10` in probability.
    pub fn quantile(&self, q: f64) -> Result<f64> {
        if !(q > 0.0 && q < 1.0) {
            return Err(Error::Domain(format!("quantile level must lie in (0, 1), got {q}")));
        }
        let (mut lo, mut hi) = self.range();
        while self.cdf(lo) > q {
            lo -= 1.0;
        }
        while self.cdf(hi) < q {
            hi += 1.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            let f = self.cdf(mid);
            if (f - q).abs() <= 1e-12 {
                return Ok(mid);
            }
            if f < q {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }
}

/// Fritsch–Carlson (PCHIP) derivative estimates.
fn pchip_slopes(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
    let delta: Vec<f64> = (0..n - 1).map(|i| (y[i + 1] - y[i]) / h[i]).collect();
    let mut d = vec![0.0; n];
    for i in 1..n - 1 {
        if delta[i - 1] * delta[i] > 0.0 {
            let w1 = 2.0 * h[i] + h[i - 1];
            let w2 = h[i] + 2.0 * h[i - 1];
            d[i] = (w1 + w2) / (w1 / delta[i - 1] + w2 / delta[i]);
        }
    }
    d[0] = end_slope(h[0], h[1], delta[0], delta[1]);
    d[n - 1] = end_slope(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
    d
}

fn end_slope(h0: f64, h1: f64, d0: f64, d1: f64) -> f64 {
    let mut d = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if d.signum() != d0.signum() {
        d = 0.0;
    } else if d0.signum() != d1.signum() && d.abs() > 3.0 * d0.abs() {
        d = 3.0 * d0;
    }
    d
}

fn hermite(x0: f64, x1: f64, y0: f64, y1: f64, d0: f64, d1: f64, x: f64) -> f64 {
    let h = x1 - x0;
    let t = (x - x0) / h;
    let t2 = t * t;
    let t3 = t2 * t;
    let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
    let h10 = t3 - 2.0 * t2 + t;
    let h01 = -2.0 * t3 + 3.0 * t2;
    let h11 = t3 - t2;
    h00 * y0 + h10 * h * d0 + h01 * y1 + h11 * h * d1
}

pub fn tw1_cdf(s: f64) -> f64 {
    TW1Table::embedded().cdf(s)
}

pub fn tw1_quantile(q: f64) -> Result<f64> {
    TW1Table::embedded().quantile(q)
}

pub fn tw1_pvalue(s: f64) -> f64 {
    TW1Table::embedded().pvalue(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn checksum_pinned() {
        assert_eq!(sha256_hex(TW1_TABLE_TEXT.as_bytes()), TW1_TABLE_SHA256);
        let t = TW1Table::embedded();
        assert!(t.range().0 <= -10.0 && t.range().1 >= 6.0);
    }

    #[test]
    fn anchor_cdf_values() {
        assert!((tw1_cdf(-3.1880) - 0.05).abs() <= 0.002);
        assert!((tw1_cdf(-1.2680) - 0.50).abs() <= 0.002);
        assert!((tw1_cdf(0.9765) - 0.95).abs() <= 0.002);
    }

    #[test]
    fn anchor_quantiles() {
        for (q, s) in TW1_ANCHORS {
            assert!((tw1_quantile(q).unwrap() - s).abs() <= 0.01);
        }
        assert!(tw1_quantile(0.0).is_err());
        assert!(tw1_quantile(1.0).is_err());
        assert!(tw1_quantile(1.5).is_err());
        assert!(tw1_quantile(f64::NAN).is_err());
    }

    #[test]
    fn pvalues() {
        assert!((tw1_pvalue(0.9765) - 0.05).abs() <= 0.002);
        assert!(tw1_pvalue(20.0) <= 1e-6);
        assert!(tw1_pvalue(20.0) > 0.0);
        let s = tw1_quantile(0.9).unwrap();
        assert!((tw1_pvalue(s) - 0.1).abs() <= 1e-6);
    }

    #[test]
    fn round_trip_grid() {
        for i in 1..1000 {
            let q = i as f64 / 1000.0;
            let s = tw1_quantile(q).unwrap();
            assert!((tw1_cdf(s) - q).abs() <= 1e-8, "q = {q}");
        }
    }

    #[test]
    fn monotone_everywhere() {
        let mut prev = 0.0;
        let mut prev_p = 1.0;
        let mut s = -14.0;
        while s < 10.0 {
            let f = tw1_cdf(s);
            let p = tw1_pvalue(s);
            assert!(f > prev, "cdf not increasing at {s}");
            assert!(p <= prev_p, "pvalue not decreasing at {s}");
            assert!(f > 0.0 && f < 1.0);
            prev = f;
            prev_p = p;
            s += 0.003;
        }
    }

    #[test]
    fn tails_continuous_at_junction() {
        let t = TW1Table::embedded();
        let (lo, hi) = t.range();
        assert!((t.cdf(lo - 1e-12) - t.cdf(lo)).abs() / t.cdf(lo) < 1e-6);
        assert!((t.pvalue(hi + 1e-12) - t.pvalue(hi)).abs() / t.pvalue(hi) < 1e-6);
    }

    #[test]
    fn rejects_bad_tables() {
        assert!(TW1Table::from_text("0 0.1\n1 0.2\n").is_err());
        assert!(matches!(
            TW1Table::from_text("# c\n0 0.1 3\n"),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(matches!(
            TW1Table::from_text("x 0.1\n"),
            Err(Error::Parse { column: 1, .. })
        ));
        // a well-formed logistic table fails the anchor check
        let nodes: Vec<f64> = (0..=800).map(|i| -10.0 + 0.02 * i as f64).collect();
        let logistic: Vec<f64> = nodes.iter().map(|s| 1.0 / (1.0 + (-s).exp())).collect();
        let err = TW1Table::from_nodes(nodes, logistic).unwrap_err();
        assert!(err.to_string().contains("quantile"), "{err}");
    }
}
