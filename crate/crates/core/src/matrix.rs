//! Dense matrices and the covariance-type constructions built from them.
//!
//! Data matrices are `p × n` with rows as variables and columns as
//! observations. Every symmetric result is stored as a packed upper triangle
//! so `get(i, j) == get(j, i)` holds by construction.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense real `rows × cols` matrix, row-major, all entries finite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl DataMatrix {
    pub fn new(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidInput(format!(
                "matrix must have at least one row and column, got {rows}x{cols}"
            )));
        }
        if values.len() != rows * cols {
            return Err(Error::InvalidInput(format!(
                "expected {} values for a {rows}x{cols} matrix, got {}",
                rows * cols,
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "non-finite entry at row {}, column {}",
                pos / cols,
                pos % cols
            )));
        }
        Ok(Self { rows, cols, values })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().position(|r| r.len() != cols) {
            return Err(Error::InvalidInput(format!(
                "row {bad} has {} entries, expected {cols}",
                rows[bad].len()
            )));
        }
        Self::new(rows.len(), cols, rows.concat())
    }

    pub fn zeros(rows: usize, cols: usize) -> Result<Self> {
        Self::new(rows, cols, vec![0.0; rows * cols])
    }

    /// Internal constructor for values already known to be finite.
    pub(crate) fn from_parts(rows: usize, cols: usize, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), rows * cols);
        debug_assert!(values.iter().all(|v| v.is_finite()));
        Self { rows, cols, values }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_iter(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.cols)
    }

    pub fn transpose(&self) -> DataMatrix {
        let mut out = vec![0.0; self.values.len()];
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[j * self.rows + i] = self.values[i * self.cols + j];
            }
        }
        DataMatrix::from_parts(self.cols, self.rows, out)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Applies `f` to every row, producing a matrix with the same shape.
    pub(crate) fn map_rows(&self, mut f: impl FnMut(usize, &[f64], &mut [f64])) -> DataMatrix {
        let mut out = vec![0.0; self.values.len()];
        for (i, (src, dst)) in self
            .values
            .chunks_exact(self.cols)
            .zip(out.chunks_exact_mut(self.cols))
            .enumerate()
        {
            f(i, src, dst);
        }
        DataMatrix::from_parts(self.rows, self.cols, out)
    }
}

/// Real symmetric matrix stored as its packed upper triangle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymMatrix {
    dim: usize,
    upper: Vec<f64>,
}

impl SymMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            upper: vec![0.0; dim * (dim + 1) / 2],
        }
    }

    /// Builds from `f(i, j)` evaluated on the upper triangle `i <= j`.
    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut upper = Vec::with_capacity(dim * (dim + 1) / 2);
        for i in 0..dim {
            for j in i..dim {
                upper.push(f(i, j));
            }
        }
        Self { dim, upper }
    }

    /// Builds from a full row-major `dim × dim` array, reading the upper triangle.
    pub fn from_dense(dim: usize, dense: &[f64]) -> Result<Self> {
        if dense.len() != dim * dim {
            return Err(Error::InvalidInput(format!(
                "expected {} entries for a {dim}x{dim} matrix, got {}",
                dim * dim,
                dense.len()
            )));
        }
        if dense.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite matrix entry".into()));
        }
        Ok(Self::from_fn(dim, |i, j| dense[i * dim + j]))
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_fn(dim, |i, j| if i == j { 1.0 } else { 0.0 })
    }

    pub fn diag(values: &[f64]) -> Self {
        Self::from_fn(values.len(), |i, j| if i == j { values[i] } else { 0.0 })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    fn index(&self, i: usize, j: usize) -> usize {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        i * (2 * self.dim - i - 1) / 2 + j
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.upper[self.index(i, j)]
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim).map(|i| self.get(i, i)).collect()
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.upper.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Full row-major copy.
    pub fn to_dense(&self) -> Vec<f64> {
        let n = self.dim;
        let mut out = vec![0.0; n * n];
        for i in 0..n {
            for j in i..n {
                let v = self.get(i, j);
                out[i * n + j] = v;
                out[j * n + i] = v;
            }
        }
        out
    }

    pub fn scaled(&self, factor: f64) -> SymMatrix {
        SymMatrix {
            dim: self.dim,
            upper: self.upper.iter().map(|v| v * factor).collect(),
        }
    }

    /// `y = A x`.
    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        let n = self.dim;
        y.iter_mut().for_each(|v| *v = 0.0);
        let mut k = 0;
        for i in 0..n {
            let xi = x[i];
            y[i] += self.upper[k] * xi;
            k += 1;
            let mut acc = 0.0;
            for j in i + 1..n {
                let a = self.upper[k];
                acc += a * x[j];
                y[j] += a * xi;
                k += 1;
            }
            y[i] += acc;
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Sample covariance `(1/divisor) W Wᵀ` of a `p × n` data matrix.
pub fn scov(w: &DataMatrix, divisor: usize) -> Result<SymMatrix> {
    if divisor == 0 {
        return Err(Error::InvalidInput("divisor must be at least 1".into()));
    }
    let scale = 1.0 / divisor as f64;
    Ok(SymMatrix::from_fn(w.rows(), |i, j| {
        dot(w.row(i), w.row(j)) * scale
    }))
}

/// The `n × n` companion `Yᵀ Y`, which shares its nonzero eigenvalues with `Y Yᵀ`.
pub fn companion(y: &DataMatrix) -> Result<SymMatrix> {
    let yt = y.transpose();
    Ok(SymMatrix::from_fn(yt.rows(), |i, j| dot(yt.row(i), yt.row(j))))
}

fn require_cols(b: &DataMatrix, min: usize) -> Result<()> {
    if b.cols() < min {
        return Err(Error::DegenerateInput(format!(
            "need at least {min} columns, got {}",
            b.cols()
        )));
    }
    Ok(())
}

/// Subtracts each row's sample mean.
pub fn center_rows(b: &DataMatrix) -> Result<DataMatrix> {
    require_cols(b, 2)?;
    let n = b.cols() as f64;
    Ok(b.map_rows(|_, src, dst| {
        let mean = src.iter().sum::<f64>() / n;
        for (d, s) in dst.iter_mut().zip(src) {
            *d = s - mean;
        }
    }))
}

/// Centered row sums of squares (the diagonal of `D₂`).
pub(crate) fn centered_sum_squares(centered: &DataMatrix) -> Vec<f64> {
    centered.row_iter().map(|r| dot(r, r)).collect()
}

/// Rows whose centered sum of squares is zero up to rounding of the mean.
fn degenerate_rows(raw: &DataMatrix, ss: &[f64]) -> Vec<usize> {
    let n = raw.cols() as f64;
    raw.row_iter()
        .zip(ss)
        .enumerate()
        .filter(|(_, (row, &s))| {
            let scale = row.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
            let floor = 16.0 * n * (f64::EPSILON * scale).powi(2);
            !(s > floor)
        })
        .map(|(i, _)| i)
        .collect()
}

/// Centers every row and scales it to unit sum of squares: `D₂^{-1/2}(B − B̄)`.
pub fn standardize_rows(b: &DataMatrix) -> Result<DataMatrix> {
    let centered = center_rows(b)?;
    let ss = centered_sum_squares(&centered);
    let bad = degenerate_rows(b, &ss);
    if !bad.is_empty() {
        return Err(Error::DegenerateRows { rows: bad });
    }
    Ok(centered.map_rows(|i, src, dst| {
        let inv = 1.0 / ss[i].sqrt();
        for (d, s) in dst.iter_mut().zip(src) {
            *d = s * inv;
        }
    }))
}

/// `diag(S_P)` for `S_P = (Y − Ȳ)(Y − Ȳ)ᵀ`, i.e. the centered row sums of squares.
pub fn d2_diagonal(y: &DataMatrix) -> Result<Vec<f64>> {
    Ok(centered_sum_squares(&center_rows(y)?))
}

/// Spatial sign matrix `P_n = D₂^{-1/2} S_P D₂^{-1/2}`.
pub fn spatial_sign(y: &DataMatrix) -> Result<SymMatrix> {
    scov(&standardize_rows(y)?, 1)
}

/// Average ranks (1-based) of a slice; ties share the mean of their positions.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        // positions start+1 ..= end share their average
        let avg = (start + 1 + end) as f64 / 2.0;
        for &idx in &order[start..end] {
            ranks[idx] = avg;
        }
        start = end;
    }
    ranks
}

/// Replaces every row by its within-row average ranks.
pub fn rank_rows(y: &DataMatrix) -> DataMatrix {
    y.map_rows(|_, src, dst| dst.copy_from_slice(&average_ranks(src)))
}

/// Spearman rank correlation matrix between the rows of `y`.
///
/// Ties receive average ranks; the edge-law results only cover tie-free data.
pub fn spearman(y: &DataMatrix) -> Result<SymMatrix> {
    require_cols(y, 2)?;
    spatial_sign(&rank_rows(y))
}

/// The standardized rank grid `√12/√(N²−1) · (j − (N+1)/2)`, `j = 1..=N`.
pub fn spearman_grid_population(big_n: usize) -> Result<Vec<f64>> {
    if big_n < 2 {
        return Err(Error::DegenerateInput(format!(
            "grid population needs N >= 2, got {big_n}"
        )));
    }
    let nf = big_n as f64;
    let scale = 12.0_f64.sqrt() / (nf * nf - 1.0).sqrt();
    let mid = (nf + 1.0) / 2.0;
    Ok((1..=big_n).map(|j| scale * (j as f64 - mid)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lcg_matrix(rows: usize, cols: usize, seed: u64) -> DataMatrix {
        let mut s = seed;
        let vals = (0..rows * cols)
            .map(|_| {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                ((s >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
            })
            .collect();
        DataMatrix::new(rows, cols, vals).unwrap()
    }

    #[test]
    fn packed_index_covers_triangle() {
        let m = SymMatrix::from_fn(4, |i, j| (10 * i + j) as f64);
        for i in 0..4 {
            for j in 0..4 {
                let (a, b) = if i <= j { (i, j) } else { (j, i) };
                assert_eq!(m.get(i, j), (10 * a + b) as f64);
            }
        }
    }

    #[test]
    fn rejects_non_finite() {
        assert!(matches!(
            DataMatrix::new(1, 2, vec![1.0, f64::NAN]),
            Err(Error::InvalidInput(_))
        ));
        assert!(DataMatrix::new(0, 2, vec![]).is_err());
    }

    #[test]
    fn scov_small() {
        let w = DataMatrix::from_rows(&[vec![1.0, -1.0], vec![-1.0, 1.0]]).unwrap();
        let s = scov(&w, 2).unwrap();
        assert_eq!(s.to_dense(), vec![1.0, -1.0, -1.0, 1.0]);
        let z = scov(&DataMatrix::zeros(3, 5).unwrap(), 5).unwrap();
        assert_eq!(z.max_abs(), 0.0);
        assert!(scov(&w, 0).is_err());
    }

    #[test]
    fn scov_matches_triple_loop() {
        let w = lcg_matrix(3, 4, 7);
        let s = scov(&w, 4).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let mut acc = 0.0;
                for k in 0..4 {
                    acc += w.get(i, k) * w.get(j, k);
                }
                assert!((s.get(i, j) - acc / 4.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn companion_small() {
        let y = DataMatrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert_eq!(companion(&y).unwrap().to_dense(), vec![1.0, 0.0, 0.0, 1.0]);
        let y = DataMatrix::from_rows(&[vec![1.0, 2.0]]).unwrap();
        assert_eq!(companion(&y).unwrap().to_dense(), vec![1.0, 2.0, 2.0, 4.0]);
    }

    #[test]
    fn center_rows_cases() {
        let b = DataMatrix::from_rows(&[vec![1.0, 2.0, 3.0]]).unwrap();
        assert_eq!(center_rows(&b).unwrap().values(), &[-1.0, 0.0, 1.0]);
        let again = center_rows(&center_rows(&b).unwrap()).unwrap();
        assert_eq!(again.values(), &[-1.0, 0.0, 1.0]);

        let r = lcg_matrix(4, 7, 3);
        for row in center_rows(&r).unwrap().row_iter() {
            assert!(row.iter().sum::<f64>().abs() <= 1e-10);
        }
        let thin = DataMatrix::from_rows(&[vec![1.0]]).unwrap();
        assert!(matches!(center_rows(&thin), Err(Error::DegenerateInput(_))));
    }

    #[test]
    fn standardize_rows_cases() {
        let b = DataMatrix::from_rows(&[vec![1.0, 2.0, 3.0]]).unwrap();
        let s = standardize_rows(&b).unwrap();
        let r = 0.5_f64.sqrt();
        for (got, want) in s.values().iter().zip([-r, 0.0, r]) {
            assert!((got - want).abs() < 1e-15);
        }

        let c = DataMatrix::from_rows(&[vec![1.0, 2.0, 3.0], vec![5.0, 5.0, 5.0]]).unwrap();
        assert_eq!(
            standardize_rows(&c),
            Err(Error::DegenerateRows { rows: vec![1] })
        );

        let r = lcg_matrix(3, 50, 11);
        for row in standardize_rows(&r).unwrap().row_iter() {
            let ss: f64 = row.iter().map(|v| v * v).sum();
            assert!((ss - 1.0).abs() <= 1e-10);
        }
    }

    #[test]
    fn constant_row_with_awkward_mean_is_degenerate() {
        let c = DataMatrix::from_rows(&[vec![0.1; 7]]).unwrap();
        assert!(matches!(
            standardize_rows(&c),
            Err(Error::DegenerateRows { .. })
        ));
    }

    #[test]
    fn spatial_sign_cases() {
        let y = DataMatrix::from_rows(&[vec![3.0, -1.0, 4.0, 1.5]]).unwrap();
        let p = spatial_sign(&y).unwrap();
        assert!((p.get(0, 0) - 1.0).abs() < 1e-12);

        let row: Vec<f64> = vec![0.3, -1.2, 2.2, 0.7, 5.0];
        let row2: Vec<f64> = row.iter().map(|v| 2.0 * v + 3.0).collect();
        let p = spatial_sign(&DataMatrix::from_rows(&[row, row2]).unwrap()).unwrap();
        assert!((p.get(0, 1) - 1.0).abs() < 1e-10);
    }

    #[test]
    fn spatial_sign_matches_pearson_oracle() {
        let y = lcg_matrix(5, 20, 19);
        let p = spatial_sign(&y).unwrap();
        let n = 20.0;
        for i in 0..5 {
            for j in 0..5 {
                let (a, b) = (y.row(i), y.row(j));
                let ma = a.iter().sum::<f64>() / n;
                let mb = b.iter().sum::<f64>() / n;
                let mut sab = 0.0;
                let mut saa = 0.0;
                let mut sbb = 0.0;
                for k in 0..20 {
                    sab += (a[k] - ma) * (b[k] - mb);
                    saa += (a[k] - ma).powi(2);
                    sbb += (b[k] - mb).powi(2);
                }
                let r = sab / (saa * sbb).sqrt();
                assert!((p.get(i, j) - r).abs() < 1e-10, "{i},{j}");
                assert!(p.get(i, j).abs() <= 1.0 + 1e-12);
            }
        }
    }

    #[test]
    fn ranks_average_ties() {
        assert_eq!(average_ranks(&[10.0, 30.0, 20.0]), vec![1.0, 3.0, 2.0]);
        assert_eq!(average_ranks(&[2.0, 1.0, 2.0, 2.0]), vec![3.0, 1.0, 3.0, 3.0]);
    }

    #[test]
    fn spearman_cases() {
        let m = |a: Vec<f64>, b: Vec<f64>| {
            spearman(&DataMatrix::from_rows(&[a, b]).unwrap())
                .unwrap()
                .get(0, 1)
        };
        assert!((m(vec![1.0, 2.0, 3.0], vec![2.0, 4.0, 9.0]) - 1.0).abs() < 1e-12);
        assert!((m(vec![1.0, 2.0, 3.0], vec![3.0, 2.0, 1.0]) + 1.0).abs() < 1e-12);
        // 1 - 6 * (0 + 1 + 1) / (3 * 8)
        let oracle = 1.0 - 6.0 * 2.0 / (3.0 * 8.0);
        assert!((m(vec![1.0, 2.0, 3.0], vec![1.0, 3.0, 2.0]) - oracle).abs() < 1e-12);

        let thin = DataMatrix::from_rows(&[vec![1.0], vec![2.0]]).unwrap();
        assert!(matches!(spearman(&thin), Err(Error::DegenerateInput(_))));
    }

    #[test]
    fn grid_population() {
        assert_eq!(spearman_grid_population(2).unwrap(), vec![-1.0, 1.0]);
        let g = spearman_grid_population(3).unwrap();
        let r = 1.5_f64.sqrt();
        for (got, want) in g.iter().zip([-r, 0.0, r]) {
            assert!((got - want).abs() < 1e-14);
        }
        for n in [2usize, 5, 10, 1001, 4000] {
            let g = spearman_grid_population(n).unwrap();
            let mean = g.iter().sum::<f64>() / n as f64;
            let ms = g.iter().map(|v| v * v).sum::<f64>() / n as f64;
            assert!(mean.abs() < 1e-14);
            assert!((ms - 1.0).abs() < 1e-12);
        }
        assert!(spearman_grid_population(1).is_err());
    }

    #[test]
    fn mul_vec_matches_dense() {
        let m = SymMatrix::from_fn(5, |i, j| (i as f64 + 1.0) * 0.3 - j as f64 * 0.7);
        let x = [1.0, -2.0, 0.5, 3.0, -1.0];
        let mut y = [0.0; 5];
        m.mul_vec(&x, &mut y);
        let d = m.to_dense();
        for i in 0..5 {
            let want: f64 = (0..5).map(|j| d[i * 5 + j] * x[j]).sum();
            assert!((y[i] - want).abs() < 1e-12);
        }
    }
}
