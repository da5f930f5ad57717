//! Dense row-stochastic matrices, multi-agent state blocks and the three
//! contraction functionals used throughout the crate:
//!
//! * `diam(A)`: half the largest ℓ1 distance between two rows of `A`,
//! * `mixing(A)`: the smallest row overlap `Σ_ℓ min(a_iℓ, a_jℓ)`,
//! * `state_diameter(x)`: the largest pairwise ℓ∞ distance between agents.
//!
//! For row-stochastic `A` the first two satisfy `mixing(A) = 1 - diam(A)`.

use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance for identities that hold exactly in real arithmetic.
pub const EXACT_TOL: f64 = 1e-12;

/// Row-sum drift accepted (and renormalized away) after accumulated products.
pub const DRIFT_TOL: f64 = 1e-9;

/// An `n x n` nonnegative matrix whose rows sum to one.
///
/// Entries are stored row-major. Construction goes through
/// [`StochasticMatrix::new`], which validates and renormalizes rows.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct StochasticMatrix {
    n: usize,
    data: Vec<f64>,
}

impl StochasticMatrix {
    /// Validates a square array of rows. Rows whose sum is within
    /// [`DRIFT_TOL`] of one are rescaled so the sum is one up to rounding.
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::Empty);
        }
        let mut data = Vec::with_capacity(n * n);
        for (row, r) in rows.iter().enumerate() {
            if r.len() != n {
                return Err(Error::NonSquare {
                    rows: n,
                    row,
                    cols: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Self::from_flat(n, data)
    }

    /// Same as [`StochasticMatrix::new`] for a row-major flat buffer.
    pub fn from_flat(n: usize, mut data: Vec<f64>) -> Result<Self> {
        if n == 0 {
            return Err(Error::Empty);
        }
        if data.len() != n * n {
            return Err(Error::dims(format!("{} entries", n * n), data.len()));
        }
        for i in 0..n {
            let row = &mut data[i * n..(i + 1) * n];
            for (j, &v) in row.iter().enumerate() {
                if !v.is_finite() {
                    return Err(Error::NonFinite { row: i, col: j });
                }
                if v < 0.0 {
                    return Err(Error::NegativeEntry {
                        row: i,
                        col: j,
                        value: v,
                    });
                }
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > DRIFT_TOL {
                return Err(Error::RowSumOutOfTolerance { row: i, sum });
            }
            if sum != 1.0 {
                row.iter_mut().for_each(|v| *v /= sum);
            }
        }
        Ok(Self { n, data })
    }

    pub fn identity(n: usize) -> Self {
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            data[i * n + i] = 1.0;
        }
        Self { n, data }
    }

    /// The rank-one averaging matrix `(1/n) e e^T`.
    pub fn uniform(n: usize) -> Self {
        Self {
            n,
            data: vec![1.0 / n as f64; n * n],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.n)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.rows().map(<[f64]>::to_vec).collect()
    }

    pub fn column_sums(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.n];
        for row in self.rows() {
            for (s, v) in sums.iter_mut().zip(row) {
                *s += v;
            }
        }
        sums
    }

    /// Largest `|column sum - 1|`.
    pub fn column_deviation(&self) -> f64 {
        self.column_sums()
            .into_iter()
            .map(|s| (s - 1.0).abs())
            .fold(0.0, f64::max)
    }

    pub fn is_doubly_stochastic(&self, tol: f64) -> bool {
        self.column_deviation() <= tol
    }

    /// `(1/n) e^T A`, the column means.
    pub fn column_mean(&self) -> Vec<f64> {
        let n = self.n as f64;
        self.column_sums().into_iter().map(|s| s / n).collect()
    }

    /// Writes the matrix as CSV with header `row,col,value`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "row,col,value")?;
        for i in 0..self.n {
            for j in 0..self.n {
                writeln!(out, "{},{},{}", i, j, crate::io::fmt_real(self.get(i, j)))?;
            }
        }
        Ok(())
    }

    /// Builds from an unchecked buffer that is row-stochastic up to product
    /// drift. Internal constructions go through here.
    pub(crate) fn from_flat_unchecked(n: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), n * n);
        Self { n, data }
    }
}

impl TryFrom<Vec<Vec<f64>>> for StochasticMatrix {
    type Error = Error;
    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        Self::new(rows)
    }
}

impl From<StochasticMatrix> for Vec<Vec<f64>> {
    fn from(m: StochasticMatrix) -> Self {
        m.to_rows()
    }
}

impl fmt::Debug for StochasticMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.rows()).finish()
    }
}

/// Validates `entries` as a row-stochastic matrix.
pub fn make_stochastic(entries: Vec<Vec<f64>>) -> Result<StochasticMatrix> {
    StochasticMatrix::new(entries)
}

/// States of `n` agents in `R^m`, one agent per row.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct StateBlock {
    n: usize,
    m: usize,
    data: Vec<f64>,
}

impl StateBlock {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        let m = rows.first().map_or(0, Vec::len);
        if n == 0 || m == 0 {
            return Err(Error::Empty);
        }
        let mut data = Vec::with_capacity(n * m);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != m {
                return Err(Error::dims(
                    format!("{m} coordinates"),
                    format!("{} in row {i}", r.len()),
                ));
            }
            data.extend_from_slice(r);
        }
        Self::from_flat(n, m, data)
    }

    pub fn from_flat(n: usize, m: usize, data: Vec<f64>) -> Result<Self> {
        if n == 0 || m == 0 {
            return Err(Error::Empty);
        }
        if data.len() != n * m {
            return Err(Error::dims(n * m, data.len()));
        }
        if let Some(k) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                row: k / m,
                col: k % m,
            });
        }
        Ok(Self { n, m, data })
    }

    pub fn zeros(n: usize, m: usize) -> Self {
        Self {
            n,
            m,
            data: vec![0.0; n * m],
        }
    }

    /// Every agent holds the same point `value`.
    pub fn consensus(n: usize, value: &[f64]) -> Self {
        let m = value.len();
        let mut data = Vec::with_capacity(n * m);
        for _ in 0..n {
            data.extend_from_slice(value);
        }
        Self { n, m, data }
    }

    /// The default experimental spread `x_i = i - (n + 1) / 2` in every
    /// coordinate, using 1-based agent labels.
    pub fn spread(n: usize, m: usize) -> Self {
        let centre = (n as f64 + 1.0) / 2.0;
        let data = (0..n)
            .flat_map(|i| std::iter::repeat_n((i + 1) as f64 - centre, m))
            .collect();
        Self { n, m, data }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.m..(i + 1) * self.m]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.m..(i + 1) * self.m]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.m)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.rows().map(<[f64]>::to_vec).collect()
    }

    /// Column-wise mean `(1/n) Σ_i x_i`.
    pub fn mean(&self) -> Vec<f64> {
        let mut acc = vec![0.0; self.m];
        for row in self.rows() {
            for (a, v) in acc.iter_mut().zip(row) {
                *a += v;
            }
        }
        let n = self.n as f64;
        acc.iter_mut().for_each(|a| *a /= n);
        acc
    }

    /// Largest absolute entry, i.e. `max_i ||x_i||_∞`.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }

    pub fn add(&self, other: &StateBlock) -> Result<StateBlock> {
        self.check_same_shape(other)?;
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect();
        Ok(Self {
            n: self.n,
            m: self.m,
            data,
        })
    }

    pub fn scaled(&self, factor: f64) -> StateBlock {
        Self {
            n: self.n,
            m: self.m,
            data: self.data.iter().map(|v| v * factor).collect(),
        }
    }

    /// Largest entrywise absolute difference.
    pub fn max_abs_diff(&self, other: &StateBlock) -> Result<f64> {
        self.check_same_shape(other)?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .fold(0.0, |acc, (a, b)| acc.max((a - b).abs())))
    }

    fn check_same_shape(&self, other: &StateBlock) -> Result<()> {
        if self.n != other.n || self.m != other.m {
            return Err(Error::dims(
                format!("{}x{}", self.n, self.m),
                format!("{}x{}", other.n, other.m),
            ));
        }
        Ok(())
    }
}

impl TryFrom<Vec<Vec<f64>>> for StateBlock {
    type Error = Error;
    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        Self::new(rows)
    }
}

impl From<StateBlock> for Vec<Vec<f64>> {
    fn from(x: StateBlock) -> Self {
        x.to_rows()
    }
}

impl fmt::Debug for StateBlock {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.rows()).finish()
    }
}

pub fn diam(a: &StochasticMatrix) -> f64 {
    let n = a.n();
    let mut best = 0.0_f64;
    for i in 0..n {
        for j in (i + 1)..n {
            let l1: f64 = a
                .row(i)
                .iter()
                .zip(a.row(j))
                .map(|(x, y)| (x - y).abs())
                .sum();
            best = best.max(0.5 * l1);
        }
    }
    best.min(1.0)
}

pub fn mixing(a: &StochasticMatrix) -> f64 {
    let n = a.n();
    let mut worst = 1.0_f64;
    for i in 0..n {
        for j in (i + 1)..n {
            let overlap: f64 = a.row(i).iter().zip(a.row(j)).map(|(x, y)| x.min(*y)).sum();
            worst = worst.min(overlap);
        }
    }
    worst.max(0.0)
}

/// `max_{i,j} ||x_i - x_j||_∞`.
///
/// Computed per coordinate as `max - min`, which equals the pairwise scan.
pub fn state_diameter(x: &StateBlock) -> f64 {
    let mut best = 0.0_f64;
    for k in 0..x.m() {
        let (lo, hi) = x
            .rows()
            .map(|r| r[k])
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                (lo.min(v), hi.max(v))
            });
        best = best.max(hi - lo);
    }
    best
}

/// Row `i` of the result is `Σ_j a_ij x_j`.
pub fn apply(a: &StochasticMatrix, x: &StateBlock) -> Result<StateBlock> {
    if a.n() != x.n() {
        return Err(Error::dims(format!("{} agents", a.n()), x.n()));
    }
    let (n, m) = (x.n(), x.m());
    let mut data = vec![0.0; n * m];
    for i in 0..n {
        let out = &mut data[i * m..(i + 1) * m];
        for (j, &w) in a.row(i).iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            for (o, v) in out.iter_mut().zip(x.row(j)) {
                *o += w * v;
            }
        }
    }
    Ok(StateBlock { n, m, data })
}

/// The product `A B`, renormalized against accumulated drift.
pub fn compose(a: &StochasticMatrix, b: &StochasticMatrix) -> Result<StochasticMatrix> {
    let n = a.n();
    if b.n() != n {
        return Err(Error::dims(n, b.n()));
    }
    let mut data = vec![0.0; n * n];
    for i in 0..n {
        let out = &mut data[i * n..(i + 1) * n];
        for (k, &aik) in a.row(i).iter().enumerate() {
            if aik == 0.0 {
                continue;
            }
            for (o, bkj) in out.iter_mut().zip(b.row(k)) {
                *o += aik * bkj;
            }
        }
    }
    StochasticMatrix::from_flat(n, data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn m(rows: &[&[f64]]) -> StochasticMatrix {
        StochasticMatrix::new(rows.iter().map(|r| r.to_vec()).collect()).unwrap()
    }

    fn x(rows: &[&[f64]]) -> StateBlock {
        StateBlock::new(rows.iter().map(|r| r.to_vec()).collect()).unwrap()
    }

    #[test]
    fn make_stochastic_accepts_and_rejects() {
        assert!(make_stochastic(vec![vec![1.0, 0.0], vec![0.0, 1.0]]).is_ok());
        assert!(make_stochastic(vec![vec![0.5, 0.5], vec![1.0, 0.0]]).is_ok());
        assert!(matches!(
            make_stochastic(vec![vec![0.5, 0.6], vec![1.0, 0.0]]),
            Err(Error::RowSumOutOfTolerance { row: 0, .. })
        ));
        assert!(matches!(
            make_stochastic(vec![vec![1.5, -0.5], vec![1.0, 0.0]]),
            Err(Error::NegativeEntry { row: 0, col: 1, .. })
        ));
        assert!(matches!(
            make_stochastic(vec![vec![1.0, 0.0], vec![1.0]]),
            Err(Error::NonSquare { row: 1, .. })
        ));
        assert!(matches!(
            make_stochastic(vec![vec![f64::NAN, 1.0], vec![1.0, 0.0]]),
            Err(Error::NonFinite { .. })
        ));
    }

    #[test]
    fn small_drift_is_renormalized() {
        let a = make_stochastic(vec![vec![0.5 + 4e-10, 0.5], vec![0.0, 1.0]]).unwrap();
        assert_abs_diff_eq!(a.row(0).iter().sum::<f64>(), 1.0, epsilon = EXACT_TOL);
    }

    #[test]
    fn diam_and_mixing_examples() {
        let id = StochasticMatrix::identity(2);
        assert_eq!(diam(&id), 1.0);
        assert_eq!(mixing(&id), 0.0);

        let u = StochasticMatrix::uniform(3);
        assert_abs_diff_eq!(diam(&u), 0.0, epsilon = EXACT_TOL);
        assert_abs_diff_eq!(mixing(&u), 1.0, epsilon = EXACT_TOL);

        let a = m(&[&[1.0, 0.0], &[0.5, 0.5]]);
        assert_eq!(diam(&a), 0.5);
        assert_eq!(mixing(&a), 0.5);

        assert_eq!(diam(&StochasticMatrix::identity(1)), 0.0);
    }

    #[test]
    fn state_diameter_examples() {
        assert_eq!(state_diameter(&x(&[&[1.0, 2.0], &[1.0, 2.0]])), 0.0);
        assert_eq!(state_diameter(&x(&[&[0.0], &[3.0]])), 3.0);
        // brute force: |(3,1)-(1,-2)|∞ = 3, |(3,1)-(0,0)|∞ = 3, |(1,-2)-(0,0)|∞ = 2
        assert_eq!(
            state_diameter(&x(&[&[0.0, 0.0], &[1.0, -2.0], &[3.0, 1.0]])),
            3.0
        );
        assert_eq!(state_diameter(&x(&[&[7.0, -1.0]])), 0.0);
    }

    #[test]
    fn apply_examples() {
        let xs = x(&[&[1.0, 5.0], &[2.0, -1.0], &[6.0, 2.0]]);
        assert_eq!(apply(&StochasticMatrix::identity(3), &xs).unwrap(), xs);

        let avg = apply(&StochasticMatrix::uniform(3), &xs).unwrap();
        for row in avg.rows() {
            assert_abs_diff_eq!(row[0], 3.0, epsilon = 1e-12);
            assert_abs_diff_eq!(row[1], 2.0, epsilon = 1e-12);
        }

        let a = m(&[&[1.0, 0.0], &[0.5, 0.5]]);
        let out = apply(&a, &x(&[&[2.0], &[0.0]])).unwrap();
        assert_eq!(out, x(&[&[2.0], &[1.0]]));

        assert!(matches!(
            apply(&a, &xs),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn compose_examples() {
        let a = m(&[&[1.0, 0.0], &[0.5, 0.5]]);
        let id = StochasticMatrix::identity(2);
        assert_eq!(compose(&a, &id).unwrap(), a);
        assert_eq!(compose(&id, &a).unwrap(), a);
        assert_eq!(
            compose(&a, &a).unwrap(),
            m(&[&[1.0, 0.0], &[0.75, 0.25]])
        );
        assert!(compose(&a, &StochasticMatrix::identity(3)).is_err());
    }

    #[test]
    fn json_round_trip_and_validation() {
        let a = m(&[&[0.25, 0.75], &[1.0, 0.0]]);
        let s = serde_json::to_string(&a).unwrap();
        assert_eq!(s, "[[0.25,0.75],[1.0,0.0]]");
        let back: StochasticMatrix = serde_json::from_str(&s).unwrap();
        assert_eq!(back, a);
        assert!(serde_json::from_str::<StochasticMatrix>("[[0.5,0.6],[1,0]]").is_err());

        let xs: StateBlock = serde_json::from_str("[[1,2],[3,4]]").unwrap();
        assert_eq!((xs.n(), xs.m()), (2, 2));
    }

    #[test]
    fn csv_export_has_header_and_all_entries() {
        let mut buf = Vec::new();
        StochasticMatrix::identity(2).write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "row,col,value");
        assert_eq!(lines.len(), 5);
    }

    #[test]
    fn spread_is_centred() {
        let s = StateBlock::spread(5, 1);
        assert_eq!(s.to_rows(), vec![vec![-2.0], vec![-1.0], vec![0.0], vec![1.0], vec![2.0]]);
    }
}
