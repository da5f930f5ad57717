//! The averaging-based distributed subgradient method
//! `x(t+1) = W(t+1) x(t) - α(t) g(t)`, with `g_i(t)` a subgradient of `f_i`
//! at `x_i(t)`.

use serde::Serialize;

use crate::chains::ChainGenerator;
use crate::dynamics::{run_controlled, InputPolicy, RunOptions, Trajectory};
use crate::error::{Error, Result};
use crate::io::fmt_real;
use crate::optimize::objective::{total, Objective};
use crate::optimize::schedule::StepSchedule;
use crate::stochastic::StateBlock;

/// The feedback `u(t) = -α(t) g(t)`.
#[derive(Debug, Clone)]
pub struct SubgradientPolicy<'a> {
    pub objectives: &'a [Objective],
    pub schedule: StepSchedule,
}

impl SubgradientPolicy<'_> {
    /// The stacked subgradients `g(t)` at `x`.
    pub fn subgradients(&self, x: &StateBlock) -> StateBlock {
        let data = self
            .objectives
            .iter()
            .zip(x.rows())
            .flat_map(|(f, row)| f.subgrad(row))
            .collect();
        StateBlock::from_flat(x.n(), x.m(), data).expect("subgradients are finite")
    }
}

impl InputPolicy for SubgradientPolicy<'_> {
    fn input(&mut self, t: usize, x: &StateBlock) -> StateBlock {
        let alpha = self.schedule.alpha(t);
        let data = self
            .objectives
            .iter()
            .zip(x.rows())
            .flat_map(|(f, row)| f.subgrad(row).into_iter().map(move |g| -alpha * g))
            .collect();
        StateBlock::from_flat(x.n(), x.m(), data).expect("inputs are finite")
    }

    fn name(&self) -> &str {
        "subgradient"
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SolverOptions {
    pub log_matrices: bool,
    pub log_inputs: bool,
}

#[derive(Debug, Clone)]
pub struct OptRun {
    pub trajectory: Trajectory,
    /// `xbar[k] = x̄(t0 + k)`.
    pub xbar: Vec<Vec<f64>>,
    /// `f_values[k] = F(x̄(t0 + k))`.
    pub f_values: Vec<f64>,
    /// `alphas[k] = α(t0 + k)`, one per logged state.
    pub alphas: Vec<f64>,
    pub schedule: StepSchedule,
}

impl OptRun {
    pub fn f_gap(&self, f_star: f64) -> Vec<f64> {
        self.f_values.iter().map(|f| f - f_star).collect()
    }

    pub fn t0(&self) -> usize {
        self.trajectory.t0
    }

    /// Largest `|x_i(t) - z|` over agents and coordinates at the final time.
    pub fn final_max_error(&self, z: &[f64]) -> f64 {
        let x = self.trajectory.states.last().expect("nonempty trajectory");
        x.rows()
            .flat_map(|r| r.iter().zip(z).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max)
    }

    /// CSV `t,d_x,f_gap,alpha,dist_to_opt`, every `record_every` steps and at
    /// the final time.
    pub fn summary_csv(
        &self,
        f_star: f64,
        dist_to_opt: impl Fn(&StateBlock) -> f64,
        record_every: usize,
    ) -> String {
        let every = record_every.max(1);
        let last = self.trajectory.states.len() - 1;
        let mut out = String::from("t,d_x,f_gap,alpha,dist_to_opt\n");
        for k in (0..=last).filter(|k| k % every == 0 || *k == last) {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                self.t0() + k,
                fmt_real(self.trajectory.diameters[k]),
                fmt_real(self.f_values[k] - f_star),
                fmt_real(self.alphas[k]),
                fmt_real(dist_to_opt(&self.trajectory.states[k])),
            ));
        }
        out
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub final_d_x: f64,
    pub final_f_gap: f64,
    pub final_dist_to_opt: f64,
}

pub fn check_problem(objectives: &[Objective], x0: &StateBlock) -> Result<()> {
    if objectives.len() != x0.n() {
        return Err(Error::dims(
            format!("{} objectives", x0.n()),
            format!("{}", objectives.len()),
        ));
    }
    for f in objectives {
        f.validate()?;
        if f.dim() != x0.m() {
            return Err(Error::dims(format!("dimension {}", x0.m()), f.dim()));
        }
    }
    Ok(())
}

pub fn solve_distributed(
    gen: &mut dyn ChainGenerator,
    objectives: &[Objective],
    schedule: StepSchedule,
    x0: &StateBlock,
    steps: usize,
    opts: SolverOptions,
) -> Result<OptRun> {
    check_problem(objectives, x0)?;
    let mut policy = SubgradientPolicy {
        objectives,
        schedule,
    };
    let run_opts = RunOptions {
        t0: schedule.t0(),
        log_matrices: opts.log_matrices,
        log_inputs: opts.log_inputs,
    };
    let trajectory = run_controlled(gen, x0, &mut policy, steps, run_opts)?;
    let xbar: Vec<Vec<f64>> = trajectory.states.iter().map(StateBlock::mean).collect();
    let f_values = xbar.iter().map(|z| total(objectives, z)).collect();
    let alphas = (0..trajectory.states.len())
        .map(|k| schedule.alpha(schedule.t0() + k))
        .collect();
    Ok(OptRun {
        trajectory,
        xbar,
        f_values,
        alphas,
        schedule,
    })
}
