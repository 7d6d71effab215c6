//! Seedable, platform-independent randomness.
//!
//! Every random draw comes from a stream keyed by
//! `(master_seed, domain, replica, row)`. Streams are derived by value, never
//! by advancing a shared generator, so replicas can run in any order or in
//! parallel and still reproduce bit-for-bit.
//!
//! Derivation (all arithmetic wrapping mod 2⁶⁴):
//!
//! ```text
//! mix(x)    = x ^= x >> 30; x *= 0xbf58476d1ce4e5b9;
//!             x ^= x >> 27; x *= 0x94d049bb133111eb; x ^ (x >> 31)
//! domain    = mix(master + 0x9e3779b97f4a7c15 * (tag + 1))
//! stream    = mix(mix(domain + 0x9e3779b97f4a7c15 * (replica + 1))
//!                 ^ (0xd1b54a32d192ed03 * (row + 1)))
//! generator = xoshiro256++ seeded from `stream` through SplitMix64
//! ```
//!
//! Bounded integers use Lemire's multiply-shift rejection on `next_u64`;
//! uniforms use the top 53 bits; normals use Box–Muller and consume both
//! outputs of each pair.

use rand_core::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::DataMatrix;

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;
const ROW_MULT: u64 = 0xd1b5_4a32_d192_ed03;

/// Stream domains, so data generation and permutation never share a stream.
pub mod domain {
    pub const DATA: u64 = 1;
    pub const PERMUTATION: u64 = 2;
    pub const SUBSAMPLE: u64 = 3;
}

#[inline]
pub fn mix64(mut x: u64) -> u64 {
    x ^= x >> 30;
    x = x.wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x ^= x >> 27;
    x = x.wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Master seed plus domain tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SeedSpec {
    pub master_seed: u64,
    #[serde(default)]
    pub domain: u64,
}

impl SeedSpec {
    pub fn new(master_seed: u64) -> Self {
        Self {
            master_seed,
            domain: 0,
        }
    }

    pub fn with_domain(self, domain: u64) -> Self {
        Self { domain, ..self }
    }

    pub fn stream_seed(&self, replica: u64, row: u64) -> u64 {
        let dom = mix64(
            self.master_seed
                .wrapping_add(GOLDEN.wrapping_mul(self.domain.wrapping_add(1))),
        );
        let rep = mix64(dom.wrapping_add(GOLDEN.wrapping_mul(replica.wrapping_add(1))));
        mix64(rep ^ ROW_MULT.wrapping_mul(row.wrapping_add(1)))
    }

    pub fn stream(&self, replica: u64, row: u64) -> Stream {
        Stream::from_seed(self.stream_seed(replica, row))
    }
}

/// Parses a seed written in decimal or as `0x`-prefixed hexadecimal.
pub fn parse_seed(text: &str) -> Result<u64> {
    let t = text.trim();
    let parsed = match t.strip_prefix("0x").or_else(|| t.strip_prefix("0X")) {
        Some(hex) => u64::from_str_radix(&hex.replace('_', ""), 16),
        None => t.replace('_', "").parse::<u64>(),
    };
    parsed.map_err(|e| Error::InvalidInput(format!("invalid seed {text:?}: {e}")))
}

/// One random stream.
pub struct Stream {
    rng: Xoshiro256PlusPlus,
    spare_normal: Option<f64>,
}

impl Stream {
    pub fn from_seed(seed: u64) -> Self {
        Self {
            rng: Xoshiro256PlusPlus::seed_from_u64(seed),
            spare_normal: None,
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Uniform on `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform on `(0, 1]`.
    pub fn uniform_open0(&mut self) -> f64 {
        ((self.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in `0..bound` (Lemire).
    pub fn below(&mut self, bound: u64) -> u64 {
        assert!(bound > 0, "bound must be positive");
        let mut m = (self.next_u64() as u128) * (bound as u128);
        let mut low = m as u64;
        if low < bound {
            let threshold = bound.wrapping_neg() % bound;
            while low < threshold {
                m = (self.next_u64() as u128) * (bound as u128);
                low = m as u64;
            }
        }
        (m >> 64) as u64
    }

    /// Standard normal (Box–Muller).
    pub fn normal(&mut self) -> f64 {
        if let Some(z) = self.spare_normal.take() {
            return z;
        }
        let u1 = self.uniform_open0();
        let u2 = self.uniform();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = 2.0 * std::f64::consts::PI * u2;
        self.spare_normal = Some(r * theta.sin());
        r * theta.cos()
    }

    /// In-place uniform shuffle (Fisher–Yates, high index first).
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i as u64 + 1) as usize;
            items.swap(i, j);
        }
    }
}

/// Draws `n` of the `N` entries of `u` uniformly without replacement
/// (partial Fisher–Yates over the index array).
pub fn swor_row(u: &[f64], n: usize, stream: &mut Stream) -> Result<Vec<f64>> {
    let big_n = u.len();
    if n == 0 || n > big_n {
        return Err(Error::Domain(format!(
            "sample size must satisfy 1 <= n <= N = {big_n}, got {n}"
        )));
    }
    let mut idx: Vec<usize> = (0..big_n).collect();
    for i in 0..n {
        let j = i + stream.below((big_n - i) as u64) as usize;
        idx.swap(i, j);
    }
    Ok(idx[..n].iter().map(|&k| u[k]).collect())
}

/// Samples every row of the finite population `U` independently.
pub fn swor_matrix(u: &DataMatrix, n: usize, seed: SeedSpec, replica: u64) -> Result<DataMatrix> {
    if n == 0 || n > u.cols() {
        return Err(Error::Domain(format!(
            "sample size must satisfy 1 <= n <= N = {}, got {n}",
            u.cols()
        )));
    }
    let mut values = Vec::with_capacity(u.rows() * n);
    for (i, row) in u.row_iter().enumerate() {
        let mut stream = seed.stream(replica, i as u64);
        values.extend(swor_row(row, n, &mut stream)?);
    }
    Ok(DataMatrix::from_parts(u.rows(), n, values))
}

/// `(B_π)_{ij} = B_{i,π_i(j)}` with independent uniform permutations per row.
pub fn permute_rows(b: &DataMatrix, seed: SeedSpec, replica: u64) -> DataMatrix {
    b.map_rows(|i, src, dst| {
        let mut stream = seed.stream(replica, i as u64);
        dst.copy_from_slice(src);
        stream.shuffle(dst);
    })
}

/// `p × n` matrix of i.i.d. standard normals.
pub fn gaussian_matrix(p: usize, n: usize, seed: SeedSpec, replica: u64) -> Result<DataMatrix> {
    if p == 0 || n == 0 {
        return Err(Error::InvalidInput(format!(
            "gaussian matrix needs p, n >= 1, got {p}x{n}"
        )));
    }
    let mut values = Vec::with_capacity(p * n);
    for i in 0..p {
        let mut stream = seed.stream(replica, i as u64);
        values.extend((0..n).map(|_| stream.normal()));
    }
    Ok(DataMatrix::from_parts(p, n, values))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn xoshiro_reference_output() {
        // public reference: xoshiro256++ seeded by SplitMix64(0)
        assert_eq!(Stream::from_seed(0).next_u64(), 5_987_356_902_031_041_503);
    }

    #[test]
    fn seed_parsing() {
        assert_eq!(parse_seed("42").unwrap(), 42);
        assert_eq!(parse_seed("0xff").unwrap(), 255);
        assert_eq!(parse_seed("0XDEAD_BEEF").unwrap(), 0xdead_beef);
        assert!(parse_seed("-1").is_err());
        assert!(parse_seed("0xzz").is_err());
    }

    #[test]
    fn streams_are_value_derived() {
        let s = SeedSpec::new(7);
        assert_eq!(s.stream_seed(3, 4), s.stream_seed(3, 4));
        assert_ne!(s.stream_seed(3, 4), s.stream_seed(4, 3));
        assert_ne!(s.stream_seed(0, 0), s.with_domain(domain::DATA).stream_seed(0, 0));
    }

    #[test]
    fn below_is_in_range() {
        let mut st = Stream::from_seed(1);
        for bound in [1u64, 2, 3, 7, 1000, u64::MAX] {
            for _ in 0..100 {
                assert!(st.below(bound) < bound);
            }
        }
    }

    #[test]
    fn swor_edge_cases() {
        let u = [1.0, 2.0, 3.0, 4.0, 5.0];
        let mut st = Stream::from_seed(9);
        let mut all = swor_row(&u, 5, &mut st).unwrap();
        all.sort_by(f64::total_cmp);
        assert_eq!(all, u.to_vec());
        let one = swor_row(&u, 1, &mut st).unwrap();
        assert!(u.contains(&one[0]));
        assert!(matches!(swor_row(&u, 6, &mut st), Err(Error::Domain(_))));
        assert!(swor_row(&u, 0, &mut st).is_err());
    }

    #[test]
    fn swor_mean_is_unbiased() {
        let u = crate::matrix::spearman_grid_population(1000).unwrap();
        let seed = SeedSpec::new(11);
        let reps = 2000;
        let means: Vec<f64> = (0..reps)
            .map(|r| {
                let mut st = seed.stream(r, 0);
                swor_row(&u, 500, &mut st).unwrap().iter().sum::<f64>() / 500.0
            })
            .collect();
        // finite-population variance of the mean: (σ²/n)(N-n)/(N-1), σ² = 1
        let se_single = ((1.0_f64 / 500.0) * (500.0 / 999.0)).sqrt();
        let se = se_single / (reps as f64).sqrt();
        let grand = means.iter().sum::<f64>() / reps as f64;
        assert!(grand.abs() <= 3.0 * se, "{grand} vs {se}");
    }

    #[test]
    fn swor_ordered_pairs_uniform() {
        let u = [0.0, 1.0, 2.0, 3.0, 4.0];
        let draws = 100_000;
        let mut counts = [[0usize; 5]; 5];
        let mut st = Stream::from_seed(2024);
        for _ in 0..draws {
            let d = swor_row(&u, 2, &mut st).unwrap();
            counts[d[0] as usize][d[1] as usize] += 1;
        }
        let p = 1.0 / 20.0;
        let sigma = (draws as f64 * p * (1.0 - p)).sqrt();
        for (a, row) in counts.iter().enumerate() {
            for (b, &count) in row.iter().enumerate() {
                if a == b {
                    assert_eq!(count, 0);
                } else {
                    let dev = (count as f64 - draws as f64 * p).abs();
                    assert!(dev <= 4.0 * sigma, "({a},{b}) dev {dev}");
                }
            }
        }
    }

    #[test]
    fn swor_matrix_determinism() {
        let u = DataMatrix::from_rows(&[
            (0..10).map(f64::from).collect(),
            (0..10).map(|v| f64::from(v * v)).collect(),
        ])
        .unwrap();
        let seed = SeedSpec::new(5);
        let a = swor_matrix(&u, 6, seed, 0).unwrap();
        assert_eq!(a, swor_matrix(&u, 6, seed, 0).unwrap());
        assert_ne!(a, swor_matrix(&u, 6, seed, 1).unwrap());
        let full = swor_matrix(&u, 10, seed, 3).unwrap();
        for i in 0..2 {
            let mut got = full.row(i).to_vec();
            got.sort_by(f64::total_cmp);
            assert_eq!(got, u.row(i));
        }
        assert!(swor_matrix(&u, 11, seed, 0).is_err());
    }

    #[test]
    fn permute_rows_preserves_rows() {
        let b = DataMatrix::from_rows(&[vec![3.0, 1.0, 2.0, 9.0], vec![0.5, 0.25, 8.0, -1.0]]).unwrap();
        let pb = permute_rows(&b, SeedSpec::new(1), 0);
        for i in 0..2 {
            let mut x = pb.row(i).to_vec();
            let mut y = b.row(i).to_vec();
            x.sort_by(f64::total_cmp);
            y.sort_by(f64::total_cmp);
            assert_eq!(x, y);
        }
        let col = DataMatrix::from_rows(&[vec![1.0], vec![2.0]]).unwrap();
        assert_eq!(permute_rows(&col, SeedSpec::new(3), 5), col);
    }

    #[test]
    fn permutation_first_position_uniform() {
        let b = DataMatrix::from_rows(&[vec![0.0, 1.0, 2.0, 3.0]]).unwrap();
        let seed = SeedSpec::new(77);
        let reps = 12_000;
        let mut counts = [0usize; 4];
        for r in 0..reps {
            counts[permute_rows(&b, seed, r).get(0, 0) as usize] += 1;
        }
        let expected = reps as f64 / 4.0;
        let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
        // chi-square with 3 dof: P(X > 16.27) = 0.001
        assert!(chi2 < 16.27, "chi2 {chi2}, counts {counts:?}");
    }

    #[test]
    fn rows_permute_independently() {
        let b = DataMatrix::from_rows(&[vec![0.0, 1.0, 2.0, 3.0], vec![0.0, 1.0, 2.0, 3.0]]).unwrap();
        let seed = SeedSpec::new(31);
        let reps = 10_000;
        let (mut sx, mut sy, mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for r in 0..reps {
            let pb = permute_rows(&b, seed, r);
            let (x, y) = (pb.get(0, 0), pb.get(1, 0));
            sx += x;
            sy += y;
            sxy += x * y;
            sxx += x * x;
            syy += y * y;
        }
        let n = reps as f64;
        let cov = sxy / n - sx * sy / n / n;
        let corr = cov / ((sxx / n - (sx / n).powi(2)) * (syy / n - (sy / n).powi(2))).sqrt();
        assert!(corr.abs() <= 4.0 / n.sqrt(), "corr {corr}");
    }

    #[test]
    fn gaussian_moments() {
        let g = gaussian_matrix(100, 10_000, SeedSpec::new(123), 0).unwrap();
        let n = g.values().len() as f64;
        let mean = g.values().iter().sum::<f64>() / n;
        let var = g.values().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!(mean.abs() <= 4.0 / n.sqrt(), "mean {mean}");
        // var of sample variance for N(0,1) is 2/(n-1)
        assert!((var - 1.0).abs() <= 4.0 * (2.0 / (n - 1.0)).sqrt(), "var {var}");
        assert_eq!(g, gaussian_matrix(100, 10_000, SeedSpec::new(123), 0).unwrap());
        assert!(gaussian_matrix(0, 3, SeedSpec::new(1), 0).is_err());
    }
}
