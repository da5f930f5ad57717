//! Reference values of `F* = min_z Σ_i f_i(z)` and of the optimal set.
//!
//! * sums of absolute deviations: the coordinate-wise median interval, exact;
//! * other coordinate-separable sums: grid scan per coordinate, then bisection
//!   on the sign of the summed subgradient;
//! * anything else (`m <= 2`): plain grid scan, error bound `L h`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optimize::objective::{total, total_lipschitz, Objective};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl SearchBox {
    pub fn cube(m: usize, half_width: f64) -> Self {
        Self {
            lo: vec![-half_width; m],
            hi: vec![half_width; m],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleMethod {
    AnalyticMedian,
    GridBisection,
    Grid,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimalSet {
    /// The box `lo <= z <= hi` (a point when `lo == hi`).
    Box { lo: Vec<f64>, hi: Vec<f64> },
    /// Grid points whose value is within the error bound of the minimum.
    Points(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleResult {
    pub f_star: f64,
    pub set: OptimalSet,
    /// Bound on `|f_star - F*|`.
    pub error_bound: f64,
    pub method: OracleMethod,
}

impl OracleResult {
    /// `ℓ∞` distance from `z` to the reported optimal set.
    pub fn dist_to_opt(&self, z: &[f64]) -> f64 {
        match &self.set {
            OptimalSet::Box { lo, hi } => z
                .iter()
                .zip(lo.iter().zip(hi))
                .map(|(v, (l, h))| (l - v).max(v - h).max(0.0))
                .fold(0.0, f64::max),
            OptimalSet::Points(points) => points
                .iter()
                .map(|p| p.iter().zip(z).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
                .fold(f64::INFINITY, f64::min),
        }
    }

    /// A representative optimizer: the box centre or the first point.
    pub fn representative(&self) -> Vec<f64> {
        match &self.set {
            OptimalSet::Box { lo, hi } => lo.iter().zip(hi).map(|(l, h)| 0.5 * (l + h)).collect(),
            OptimalSet::Points(p) => p[0].clone(),
        }
    }
}

fn check_inputs(objectives: &[Objective], search: &SearchBox, grid: usize) -> Result<usize> {
    let Some(first) = objectives.first() else {
        return Err(Error::InvalidArgument("no objectives".into()));
    };
    let m = first.dim();
    for f in objectives {
        f.validate()?;
        if f.dim() != m {
            return Err(Error::dims(m, f.dim()));
        }
    }
    if search.lo.len() != m || search.hi.len() != m {
        return Err(Error::dims(m, search.lo.len().min(search.hi.len())));
    }
    if search.lo.iter().zip(&search.hi).any(|(l, h)| l.partial_cmp(h) != Some(std::cmp::Ordering::Less)) {
        return Err(Error::InvalidArgument("search box needs lo < hi".into()));
    }
    if grid < 3 {
        return Err(Error::InvalidArgument("grid needs at least 3 points per axis".into()));
    }
    Ok(m)
}

pub fn optimal_oracle(objectives: &[Objective], search: &SearchBox, grid: usize) -> Result<OracleResult> {
    let m = check_inputs(objectives, search, grid)?;
    let centres: Option<Vec<&Vec<f64>>> = objectives
        .iter()
        .map(|f| match f {
            Objective::Abs { a } => Some(a),
            _ => None,
        })
        .collect();
    if let Some(centres) = centres {
        return median_oracle(objectives, &centres, search, m);
    }
    if objectives.iter().all(Objective::is_separable) {
        return separable_oracle(objectives, search, grid, m);
    }
    grid_oracle(objectives, search, grid, m)
}

fn median_oracle(
    objectives: &[Objective],
    centres: &[&Vec<f64>],
    search: &SearchBox,
    m: usize,
) -> Result<OracleResult> {
    let n = centres.len();
    let mut lo = Vec::with_capacity(m);
    let mut hi = Vec::with_capacity(m);
    for k in 0..m {
        let mut v: Vec<f64> = centres.iter().map(|a| a[k]).collect();
        v.sort_by(f64::total_cmp);
        let (l, h) = if n % 2 == 1 {
            (v[n / 2], v[n / 2])
        } else {
            (v[n / 2 - 1], v[n / 2])
        };
        if l <= search.lo[k] || h >= search.hi[k] {
            return Err(Error::OptimizerOnBoundary);
        }
        lo.push(l);
        hi.push(h);
    }
    Ok(OracleResult {
        f_star: total(objectives, &lo),
        set: OptimalSet::Box { lo, hi },
        error_bound: 0.0,
        method: OracleMethod::AnalyticMedian,
    })
}

fn axis(lo: f64, hi: f64, grid: usize) -> Vec<f64> {
    let h = (hi - lo) / (grid - 1) as f64;
    (0..grid).map(|i| if i + 1 == grid { hi } else { lo + h * i as f64 }).collect()
}

fn separable_oracle(
    objectives: &[Objective],
    search: &SearchBox,
    grid: usize,
    m: usize,
) -> Result<OracleResult> {
    // Separable objectives decouple: F(z) = Σ_k F_k(z_k), with F_k evaluated
    // by placing z_k in an otherwise fixed point.
    let base = search.lo.clone();
    let mut lo = Vec::with_capacity(m);
    let mut hi = Vec::with_capacity(m);
    for k in 0..m {
        let slope = |x: f64| -> f64 {
            let mut z = base.clone();
            z[k] = x;
            objectives.iter().map(|f| f.subgrad(&z)[k]).sum()
        };
        let value = |x: f64| -> f64 {
            let mut z = base.clone();
            z[k] = x;
            total(objectives, &z)
        };
        if slope(search.lo[k]) >= 0.0 || slope(search.hi[k]) <= 0.0 {
            return Err(Error::OptimizerOnBoundary);
        }
        let pts = axis(search.lo[k], search.hi[k], grid);
        let vals: Vec<f64> = pts.iter().map(|&x| value(x)).collect();
        let best = (0..grid).min_by(|&a, &b| vals[a].total_cmp(&vals[b])).expect("nonempty grid");
        if best == 0 || best == grid - 1 {
            return Err(Error::OptimizerOnBoundary);
        }
        // The optimal interval runs from the last point with negative summed
        // slope to the first point with positive summed slope.
        let i = (0..=best).rev().find(|&i| slope(pts[i]) < 0.0).unwrap_or(0);
        let j = (best..grid).find(|&j| slope(pts[j]) > 0.0).unwrap_or(grid - 1);
        let left = bisect(|x| slope(x) < 0.0, pts[i], pts[(i + 1).min(grid - 1)]);
        let right = bisect(|x| slope(x) <= 0.0, pts[j.saturating_sub(1)], pts[j]);
        lo.push(left.min(right));
        hi.push(right.max(left));
    }
    let scale = search
        .lo
        .iter()
        .chain(&search.hi)
        .fold(1.0f64, |acc, v| acc.max(v.abs()));
    Ok(OracleResult {
        f_star: total(objectives, &lo),
        error_bound: total_lipschitz(objectives) * 1e-12 * scale,
        set: OptimalSet::Box { lo, hi },
        method: OracleMethod::GridBisection,
    })
}

/// Largest `x` in `[a, b]` with `below(x)` true, assuming `below` is a
/// down-set; bisected to machine resolution.
fn bisect(below: impl Fn(f64) -> bool, mut a: f64, mut b: f64) -> f64 {
    if !below(a) {
        return a;
    }
    if below(b) {
        return b;
    }
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        if below(mid) {
            a = mid;
        } else {
            b = mid;
        }
    }
    b
}

fn grid_oracle(objectives: &[Objective], search: &SearchBox, grid: usize, m: usize) -> Result<OracleResult> {
    if m > 2 {
        return Err(Error::InvalidArgument(format!(
            "grid oracle supports m <= 2, got m = {m}"
        )));
    }
    let axes: Vec<Vec<f64>> = (0..m).map(|k| axis(search.lo[k], search.hi[k], grid)).collect();
    let mut points: Vec<(Vec<f64>, f64, bool)> = Vec::new();
    let mut idx = vec![0usize; m];
    loop {
        let z: Vec<f64> = idx.iter().enumerate().map(|(k, &i)| axes[k][i]).collect();
        let on_boundary = idx.iter().any(|&i| i == 0 || i == grid - 1);
        let v = total(objectives, &z);
        points.push((z, v, on_boundary));
        let mut k = 0;
        loop {
            if k == m {
                break;
            }
            idx[k] += 1;
            if idx[k] < grid {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
        if k == m {
            break;
        }
    }
    let f_min = points.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let h = (0..m)
        .map(|k| (search.hi[k] - search.lo[k]) / (grid - 1) as f64)
        .fold(0.0, f64::max);
    let error_bound = total_lipschitz(objectives) * h;
    if points.iter().any(|p| p.2 && p.1 <= f_min) {
        return Err(Error::OptimizerOnBoundary);
    }
    let set = points
        .into_iter()
        .filter(|p| p.1 <= f_min + error_bound)
        .map(|p| p.0)
        .collect();
    Ok(OracleResult {
        f_star: f_min,
        set: OptimalSet::Points(set),
        error_bound,
        method: OracleMethod::Grid,
    })
}
