//! Convex local objectives with bounded subgradients.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::stream_rng;

/// A convex `f: R^m -> R` with a deterministic subgradient selection and a
/// uniform bound `||g||_∞ <= L`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Objective {
    /// `Σ_k |z_k - a_k|`.
    Abs { a: Vec<f64> },
    /// Coordinate-wise Huber loss around `a` with threshold `delta`.
    Huber { a: Vec<f64>, delta: f64 },
    /// `max_k <slope_k, z> + offset_k`.
    MaxAffine { slopes: Vec<Vec<f64>>, offsets: Vec<f64> },
}

pub fn abs_deviation(a: Vec<f64>) -> Result<Objective> {
    let f = Objective::Abs { a };
    f.validate()?;
    Ok(f)
}

pub fn huber(a: Vec<f64>, delta: f64) -> Result<Objective> {
    let f = Objective::Huber { a, delta };
    f.validate()?;
    Ok(f)
}

pub fn max_affine(slopes: Vec<Vec<f64>>, offsets: Vec<f64>) -> Result<Objective> {
    let f = Objective::MaxAffine { slopes, offsets };
    f.validate()?;
    Ok(f)
}

fn finite(v: &[f64], what: &str) -> Result<()> {
    if v.is_empty() {
        return Err(Error::InvalidArgument(format!("{what} is empty")));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidArgument(format!("{what} has a non-finite entry")));
    }
    Ok(())
}

impl Objective {
    /// Checks the construction preconditions.
    pub fn validate(&self) -> Result<()> {
        match self {
            Objective::Abs { a } => finite(a, "center"),
            Objective::Huber { a, delta } => {
                finite(a, "center")?;
                if !(*delta > 0.0 && delta.is_finite()) {
                    return Err(Error::DeltaNonpositive(*delta));
                }
                Ok(())
            }
            Objective::MaxAffine { slopes, offsets } => {
                if slopes.is_empty() || slopes.len() != offsets.len() {
                    return Err(Error::EmptyPieces);
                }
                let m = slopes[0].len();
                for s in slopes {
                    finite(s, "slope")?;
                    if s.len() != m {
                        return Err(Error::dims(m, s.len()));
                    }
                }
                finite(offsets, "offsets")
            }
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Objective::Abs { a } | Objective::Huber { a, .. } => a.len(),
            Objective::MaxAffine { slopes, .. } => slopes[0].len(),
        }
    }

    pub fn eval(&self, z: &[f64]) -> f64 {
        match self {
            Objective::Abs { a } => z.iter().zip(a).map(|(z, a)| (z - a).abs()).sum(),
            Objective::Huber { a, delta } => z
                .iter()
                .zip(a)
                .map(|(z, a)| {
                    let r = (z - a).abs();
                    if r <= *delta {
                        0.5 * r * r
                    } else {
                        delta * (r - 0.5 * delta)
                    }
                })
                .sum(),
            Objective::MaxAffine { slopes, offsets } => {
                let (k, _) = self.active_piece(z, slopes, offsets);
                dot(&slopes[k], z) + offsets[k]
            }
        }
    }

    /// Deterministic subgradient: 0 at absolute-value kinks, the lowest
    /// maximizing index for max-affine.
    pub fn subgrad(&self, z: &[f64]) -> Vec<f64> {
        match self {
            Objective::Abs { a } => z
                .iter()
                .zip(a)
                .map(|(z, a)| {
                    let r = z - a;
                    if r > 0.0 {
                        1.0
                    } else if r < 0.0 {
                        -1.0
                    } else {
                        0.0
                    }
                })
                .collect(),
            Objective::Huber { a, delta } => z
                .iter()
                .zip(a)
                .map(|(z, a)| (z - a).clamp(-delta, *delta))
                .collect(),
            Objective::MaxAffine { slopes, offsets } => {
                slopes[self.active_piece(z, slopes, offsets).0].clone()
            }
        }
    }

    /// Uniform bound on `||subgrad(z)||_∞`.
    pub fn lipschitz(&self) -> f64 {
        match self {
            Objective::Abs { .. } => 1.0,
            Objective::Huber { delta, .. } => *delta,
            Objective::MaxAffine { slopes, .. } => slopes
                .iter()
                .map(|s| s.iter().fold(0.0f64, |acc, v| acc.max(v.abs())))
                .fold(0.0, f64::max),
        }
    }

    /// Whether `f(z) = Σ_k f_k(z_k)`.
    pub fn is_separable(&self) -> bool {
        !matches!(self, Objective::MaxAffine { .. })
    }

    fn active_piece(&self, z: &[f64], slopes: &[Vec<f64>], offsets: &[f64]) -> (usize, f64) {
        let mut best = (0, dot(&slopes[0], z) + offsets[0]);
        for (k, (s, b)) in slopes.iter().zip(offsets).enumerate().skip(1) {
            let v = dot(s, z) + b;
            if v > best.1 {
                best = (k, v);
            }
        }
        best
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `F(z) = Σ_i f_i(z)`.
pub fn total(objectives: &[Objective], z: &[f64]) -> f64 {
    objectives.iter().map(|f| f.eval(z)).sum()
}

/// `L = Σ_i L_i`.
pub fn total_lipschitz(objectives: &[Objective]) -> f64 {
    objectives.iter().map(Objective::lipschitz).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ObjectiveCheck {
    pub samples: usize,
    pub convexity_violations: usize,
    pub subgradient_violations: usize,
    pub bound_violations: usize,
}

impl ObjectiveCheck {
    pub fn passed(&self) -> bool {
        self.convexity_violations == 0 && self.subgradient_violations == 0 && self.bound_violations == 0
    }
}

/// Spot-checks convexity, the subgradient inequality and the bound `L` on
/// random points in `[-scale, scale]^m`, all with slack `1e-9`.
pub fn validate_objective(f: &Objective, samples: usize, scale: f64, seed: u64) -> ObjectiveCheck {
    let m = f.dim();
    let mut rng = stream_rng(seed, 0);
    let point = |rng: &mut crate::exec::ChainRng| -> Vec<f64> {
        (0..m).map(|_| rng.random_range(-scale..=scale)).collect()
    };
    let mut out = ObjectiveCheck {
        samples,
        convexity_violations: 0,
        subgradient_violations: 0,
        bound_violations: 0,
    };
    let tol = 1e-9;
    for _ in 0..samples {
        let x = point(&mut rng);
        let y = point(&mut rng);
        let theta: f64 = rng.random();
        let mix: Vec<f64> = x.iter().zip(&y).map(|(a, b)| theta * a + (1.0 - theta) * b).collect();
        if f.eval(&mix) > theta * f.eval(&x) + (1.0 - theta) * f.eval(&y) + tol {
            out.convexity_violations += 1;
        }
        let g = f.subgrad(&y);
        let diff: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a - b).collect();
        if f.eval(&x) - f.eval(&y) < dot(&g, &diff) - tol {
            out.subgradient_violations += 1;
        }
        if g.iter().any(|v| v.abs() > f.lipschitz() + tol) {
            out.bound_violations += 1;
        }
    }
    out
}
