//! Autonomous and controlled averaging along a sampled chain.
//!
//! ```text
//! x(t+1) = W(t+1) x(t)            (autonomous)
//! x(t+1) = W(t+1) x(t) + u(t)     (controlled)
//! ```
//!
//! A run starts at absolute time `t0` with `x(t0) = x0`. The chain's first
//! sample is used as `W(t0+1)`.

use serde::Serialize;

use crate::chains::ChainGenerator;
use crate::error::{Error, Result};
use crate::io::fmt_real;
use crate::stochastic::{
    apply, compose, state_diameter, StateBlock, StochasticMatrix, DRIFT_TOL, EXACT_TOL,
};

/// Maps `(t, x(t))` to the input `u(t)`.
pub trait InputPolicy {
    fn input(&mut self, t: usize, x: &StateBlock) -> StateBlock;

    fn name(&self) -> &str {
        "custom"
    }
}

impl<F> InputPolicy for F
where
    F: FnMut(usize, &StateBlock) -> StateBlock,
{
    fn input(&mut self, t: usize, x: &StateBlock) -> StateBlock {
        self(t, x)
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroInput;

impl InputPolicy for ZeroInput {
    fn input(&mut self, _t: usize, x: &StateBlock) -> StateBlock {
        StateBlock::zeros(x.n(), x.m())
    }

    fn name(&self) -> &str {
        "zero"
    }
}

/// The same input `u(t) = c` for every agent and time.
#[derive(Debug, Clone)]
pub struct ConstantInput(pub Vec<f64>);

impl InputPolicy for ConstantInput {
    fn input(&mut self, _t: usize, x: &StateBlock) -> StateBlock {
        StateBlock::consensus(x.n(), &self.0)
    }

    fn name(&self) -> &str {
        "constant"
    }
}

#[derive(Debug, Clone, Copy)]
pub struct RunOptions {
    pub t0: usize,
    /// Keep every realized `W(t)`; costs `n^2` reals per step.
    pub log_matrices: bool,
    /// Keep every input `u(t)` of a controlled run.
    pub log_inputs: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            t0: 1,
            log_matrices: false,
            log_inputs: true,
        }
    }
}

impl RunOptions {
    pub fn logged() -> Self {
        Self {
            log_matrices: true,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub t0: usize,
    /// `states[k] = x(t0 + k)`.
    pub states: Vec<StateBlock>,
    /// `diameters[k] = d(x(t0 + k))`.
    pub diameters: Vec<f64>,
    /// `matrices[k] = W(t0 + k + 1)`.
    pub matrices: Option<Vec<StochasticMatrix>>,
    /// `inputs[k] = u(t0 + k)`.
    pub inputs: Option<Vec<StateBlock>>,
    /// `false` for autonomous runs, whose inputs are identically zero.
    pub controlled: bool,
}

impl Trajectory {
    /// Number of steps taken.
    pub fn steps(&self) -> usize {
        self.states.len() - 1
    }

    /// Last time index `t0 + steps`.
    pub fn t_end(&self) -> usize {
        self.t0 + self.steps()
    }

    pub fn state(&self, t: usize) -> Result<&StateBlock> {
        t.checked_sub(self.t0)
            .and_then(|k| self.states.get(k))
            .ok_or_else(|| Error::IndexOutOfRange(format!("time {t} outside {}..={}", self.t0, self.t_end())))
    }

    pub fn matrix(&self, t: usize) -> Result<&StochasticMatrix> {
        let mats = self.matrices.as_ref().ok_or(Error::MissingLogs("matrices"))?;
        t.checked_sub(self.t0 + 1)
            .and_then(|k| mats.get(k))
            .ok_or_else(|| Error::IndexOutOfRange(format!("W({t}) not logged")))
    }

    /// `u(t)`; zero for autonomous runs.
    pub fn input(&self, t: usize) -> Result<StateBlock> {
        if !self.controlled {
            let x = &self.states[0];
            return Ok(StateBlock::zeros(x.n(), x.m()));
        }
        let inputs = self.inputs.as_ref().ok_or(Error::MissingLogs("inputs"))?;
        t.checked_sub(self.t0)
            .and_then(|k| inputs.get(k))
            .cloned()
            .ok_or_else(|| Error::IndexOutOfRange(format!("u({t}) not logged")))
    }

    /// `Φ(t, τ)` from the logged matrices.
    pub fn transition(&self, tau: usize, t: usize) -> Result<StochasticMatrix> {
        let mats = self.matrices.as_ref().ok_or(Error::MissingLogs("matrices"))?;
        transition_matrix(mats, self.t0 + 1, tau, t)
    }

    /// CSV with header `t,agent,coord,value`.
    pub fn states_csv(&self) -> String {
        let mut out = String::from("t,agent,coord,value\n");
        for (k, x) in self.states.iter().enumerate() {
            for (i, row) in x.rows().enumerate() {
                for (c, v) in row.iter().enumerate() {
                    out.push_str(&format!("{},{i},{c},{}\n", self.t0 + k, fmt_real(*v)));
                }
            }
        }
        out
    }

    /// CSV with header `t,d_x,alpha`; `alpha[k]` belongs to time `t0 + k`,
    /// and is left empty where not given.
    pub fn summary_csv(&self, alpha: Option<&[f64]>) -> String {
        let mut out = String::from("t,d_x,alpha\n");
        for (k, d) in self.diameters.iter().enumerate() {
            let a = alpha.and_then(|a| a.get(k)).map(|v| fmt_real(*v)).unwrap_or_default();
            out.push_str(&format!("{},{},{a}\n", self.t0 + k, fmt_real(*d)));
        }
        out
    }
}

/// Run-level metadata written alongside trajectory exports.
#[derive(Debug, Clone, Serialize)]
pub struct RunMetadata {
    pub seed: u64,
    pub chain: serde_json::Value,
    pub policy: String,
    pub t0: usize,
    pub steps: usize,
    pub n: usize,
    pub m: usize,
}

fn check_dims(gen: &dyn ChainGenerator, x0: &StateBlock) -> Result<()> {
    if gen.n() != x0.n() {
        return Err(Error::dims(format!("{} agents", gen.n()), format!("{} agents", x0.n())));
    }
    Ok(())
}

pub fn run_autonomous(
    gen: &mut dyn ChainGenerator,
    x0: &StateBlock,
    steps: usize,
    opts: RunOptions,
) -> Result<Trajectory> {
    check_dims(gen, x0)?;
    let mut traj = Trajectory {
        t0: opts.t0,
        states: Vec::with_capacity(steps + 1),
        diameters: Vec::with_capacity(steps + 1),
        matrices: opts.log_matrices.then(|| Vec::with_capacity(steps)),
        inputs: None,
        controlled: false,
    };
    let mut x = x0.clone();
    for _ in 0..steps {
        let w = gen.next_matrix();
        let next = apply(&w, &x)?;
        traj.diameters.push(state_diameter(&x));
        traj.states.push(std::mem::replace(&mut x, next));
        if let Some(m) = traj.matrices.as_mut() {
            m.push(w);
        }
    }
    traj.diameters.push(state_diameter(&x));
    traj.states.push(x);
    Ok(traj)
}

pub fn run_controlled(
    gen: &mut dyn ChainGenerator,
    x0: &StateBlock,
    policy: &mut dyn InputPolicy,
    steps: usize,
    opts: RunOptions,
) -> Result<Trajectory> {
    check_dims(gen, x0)?;
    let mut traj = Trajectory {
        t0: opts.t0,
        states: Vec::with_capacity(steps + 1),
        diameters: Vec::with_capacity(steps + 1),
        matrices: opts.log_matrices.then(|| Vec::with_capacity(steps)),
        inputs: opts.log_inputs.then(|| Vec::with_capacity(steps)),
        controlled: true,
    };
    let mut x = x0.clone();
    for k in 0..steps {
        let t = opts.t0 + k;
        let u = policy.input(t, &x);
        if u.n() != x.n() || u.m() != x.m() {
            return Err(Error::dims(
                format!("{}x{} input", x.n(), x.m()),
                format!("{}x{}", u.n(), u.m()),
            ));
        }
        let w = gen.next_matrix();
        let next = apply(&w, &x)?.add(&u)?;
        traj.diameters.push(state_diameter(&x));
        traj.states.push(std::mem::replace(&mut x, next));
        if let Some(m) = traj.matrices.as_mut() {
            m.push(w);
        }
        if let Some(i) = traj.inputs.as_mut() {
            i.push(u);
        }
    }
    traj.diameters.push(state_diameter(&x));
    traj.states.push(x);
    Ok(traj)
}

/// `Φ(t, τ) = W(t) ⋯ W(τ+1)` where `ws[k] = W(first + k)`; `Φ(τ, τ) = I`.
pub fn transition_matrix(
    ws: &[StochasticMatrix],
    first: usize,
    tau: usize,
    t: usize,
) -> Result<StochasticMatrix> {
    if tau > t {
        return Err(Error::IndexOutOfRange(format!("tau = {tau} > t = {t}")));
    }
    if t == tau {
        let n = ws.first().map_or(0, StochasticMatrix::n);
        if n == 0 {
            return Err(Error::IndexOutOfRange("empty matrix list".into()));
        }
        return Ok(StochasticMatrix::identity(n));
    }
    if tau + 1 < first || t - first >= ws.len() {
        return Err(Error::IndexOutOfRange(format!(
            "W({}..={t}) not covered by W({first}..={})",
            tau + 1,
            first + ws.len() - 1
        )));
    }
    let mut phi = ws[tau + 1 - first].clone();
    for s in tau + 2..=t {
        phi = compose(&ws[s - first], &phi)?;
    }
    Ok(phi)
}

/// `Φ(t, s+1)` for `s = t-1, t-2, ..., τ`, built by right multiplication.
pub(crate) fn backward_products(
    traj: &Trajectory,
    tau: usize,
    t: usize,
) -> Result<Vec<StochasticMatrix>> {
    let n = traj.states[0].n();
    let mut out = Vec::with_capacity(t - tau);
    let mut q = StochasticMatrix::identity(n);
    for s in (tau..t).rev() {
        let next = compose(&q, traj.matrix(s + 1)?)?;
        out.push(std::mem::replace(&mut q, next));
    }
    Ok(out)
}

/// Max-entry deviation between `x(t)` and
/// `Φ(t,τ) x(τ) + Σ_{s=τ}^{t-1} Φ(t,s+1) u(s)` rebuilt from the logs.
pub fn variation_of_constants_check(traj: &Trajectory, tau: usize, t: usize) -> Result<f64> {
    if traj.matrices.is_none() {
        return Err(Error::MissingLogs("matrices"));
    }
    if traj.controlled && traj.inputs.is_none() {
        return Err(Error::MissingLogs("inputs"));
    }
    if tau > t || tau < traj.t0 || t > traj.t_end() {
        return Err(Error::IndexOutOfRange(format!(
            "({tau}, {t}) outside {}..={}",
            traj.t0,
            traj.t_end()
        )));
    }
    let products = backward_products(traj, tau, t)?;
    let mut rhs = match products.last() {
        Some(_) => apply(&compose(&products[products.len() - 1], traj.matrix(tau + 1)?)?, traj.state(tau)?)?,
        None => traj.state(tau)?.clone(),
    };
    if traj.controlled {
        for (idx, s) in (tau..t).rev().enumerate() {
            rhs = rhs.add(&apply(&products[idx], &traj.input(s)?)?)?;
        }
    }
    rhs.max_abs_diff(traj.state(t)?)
}

/// Recomputes every logged diameter; used by consistency tests.
pub fn diameters_consistent(traj: &Trajectory) -> bool {
    traj.states.len() == traj.diameters.len()
        && traj
            .states
            .iter()
            .zip(&traj.diameters)
            .all(|(x, d)| (state_diameter(x) - d).abs() <= EXACT_TOL)
}

/// Row sums of every logged matrix product are within drift tolerance.
pub fn products_stay_stochastic(traj: &Trajectory, tau: usize, t: usize) -> Result<bool> {
    let phi = traj.transition(tau, t)?;
    let ok = phi.rows().all(|r| (r.iter().sum::<f64>() - 1.0).abs() <= DRIFT_TOL);
    Ok(ok)
}
