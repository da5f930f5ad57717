use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use serde_json::json;

use avgopt::chains::{verify_assumptions, AssumptionReport, BoxedChain, VerifyOptions};
use avgopt::diagnostics::{
    consensus_rate_series, estimate_diam_decay, joint_diam_decay, second_moment_series,
    DecayEstimate, JointEstimate, Window,
};
use avgopt::dynamics::{run_autonomous, RunOptions};
use avgopt::exec::derive_seed;
use avgopt::io::{fmt_real, write_atomic, write_json_atomic, Series};
use avgopt::optimize::{
    lyapunov_audit, optimal_oracle, solve_distributed, LyapunovOptions, OracleResult, SearchBox,
    SolverOptions,
};
use avgopt::stats::{mean_se, quantile_sorted};
use avgopt::{Error, Execution, StateBlock};

use crate::config::ExperimentConfig;

/// Exit status of a command: 1 for failed audits, 2 for configuration or
/// usage errors.
#[derive(Debug)]
pub enum Failure {
    Config(String),
    Audit(String),
}

impl Failure {
    pub fn code(&self) -> u8 {
        match self {
            Failure::Audit(_) => 1,
            Failure::Config(_) => 2,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Config(m) => write!(f, "configuration error: {m}"),
            Failure::Audit(m) => write!(f, "audit failed: {m}"),
        }
    }
}

type Outcome = Result<(), Failure>;

fn config_err(e: impl std::fmt::Display) -> Failure {
    Failure::Config(e.to_string())
}

pub struct Context {
    pub command: &'static str,
    pub config_path: PathBuf,
    pub out: PathBuf,
}

impl Context {
    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn write(&self, name: &str, body: &str) -> Outcome {
        write_atomic(&self.path(name), body.as_bytes()).map_err(config_err)
    }

    fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Outcome {
        write_json_atomic(&self.path(name), value).map_err(config_err)
    }

    /// Run metadata, including the wall-clock time, kept apart from the
    /// replayable outputs.
    fn write_meta(&self, cfg: &ExperimentConfig) -> Outcome {
        let secs = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
        self.write_json(
            "meta.json",
            &json!({
                "command": self.command,
                "config": self.config_path,
                "version": env!("CARGO_PKG_VERSION"),
                "unix_time": secs,
                "seeds": cfg.seeds,
                "chain_seed": cfg.chain.seed,
            }),
        )
    }
}

#[derive(Debug, Serialize)]
struct Quantiles {
    min: f64,
    q25: f64,
    median: f64,
    q75: f64,
    max: f64,
}

fn quantiles(values: &[f64]) -> Quantiles {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let q = |p| quantile_sorted(&v, p);
    Quantiles {
        min: q(0.0),
        q25: q(0.25),
        median: q(0.5),
        q75: q(0.75),
        max: q(1.0),
    }
}

fn chain_for_seed(cfg: &ExperimentConfig, seed: u64) -> Result<BoxedChain, Failure> {
    cfg.chain.build_seeded(derive_seed(&[cfg.chain.seed, seed]), 0).map_err(config_err)
}

/// Indices `0..=last` kept at the configured stride, always including the last.
fn recorded(last: usize, every: usize) -> impl Iterator<Item = usize> {
    (0..=last).filter(move |k| k % every == 0 || *k == last)
}

fn pooled(rows: &[Vec<f64>], times: &[usize]) -> Series {
    let (value, se) = (0..times.len())
        .map(|k| mean_se(&rows.iter().map(|r| r[k]).collect::<Vec<_>>()))
        .unzip();
    Series {
        t: times.to_vec(),
        value,
        se,
    }
}

fn run_verification(cfg: &ExperimentConfig) -> Result<AssumptionReport, Failure> {
    let b = cfg.chain.window().map_err(config_err)?;
    let mut opts = VerifyOptions::new(b, cfg.chain.gamma, cfg.verify.horizon, cfg.verify.trials);
    opts.conditioning = cfg.verify.conditioning;
    opts.resamples = cfg.verify.resamples;
    opts.seed = cfg.chain.seed;
    let chain = &cfg.chain;
    verify_assumptions(|k| chain.build(k), &opts).map_err(config_err)
}

fn assumptions_audit(ctx: &Context, cfg: &ExperimentConfig) -> Result<Option<bool>, Failure> {
    if !cfg.audits.assumptions {
        return Ok(None);
    }
    let report = run_verification(cfg)?;
    ctx.write_json("assumptions.json", &report)?;
    Ok(Some(report.passed()))
}

pub fn verify_chain(ctx: &Context, mut cfg: ExperimentConfig, trials: Option<usize>, offset: u64) -> Outcome {
    if let Some(t) = trials {
        cfg.verify.trials = t;
    }
    cfg.chain.seed = cfg.chain.seed.wrapping_add(offset);
    let report = run_verification(&cfg)?;
    ctx.write_json("assumptions.json", &report)?;
    ctx.write_meta(&cfg)?;
    if report.passed() {
        Ok(())
    } else {
        Err(Failure::Audit(format!(
            "assumption checks failed ({} of {} windows failed connectivity)",
            report.windows_failed, report.windows_checked
        )))
    }
}

pub fn consensus(ctx: &Context, mut cfg: ExperimentConfig, trials: Option<usize>, offset: u64) -> Outcome {
    cfg.apply_overrides(trials, offset);
    if cfg.objectives.is_some() {
        return Err(Failure::Config("consensus takes no objectives; use optimize".into()));
    }
    let x0 = cfg.initial_state(cfg.x0.as_ref().and_then(|r| r.first()).map_or(1, Vec::len))
        .map_err(Failure::Config)?;
    if let Some(beta) = cfg.audits.rate_beta {
        if cfg.horizon < 100 || !beta.is_finite() {
            return Err(Failure::Config("rate audit needs horizon >= 100 and a finite rate_beta".into()));
        }
    }
    let assumptions_ok = assumptions_audit(ctx, &cfg)?;

    let times: Vec<usize> = recorded(cfg.horizon, cfg.record_every).filter(|k| *k > 0).collect();
    let runs = Execution::default().map_slice(&cfg.seeds, |&seed| -> Result<Vec<f64>, Failure> {
        let mut chain = chain_for_seed(&cfg, seed)?;
        let opts = RunOptions {
            t0: 0,
            log_matrices: false,
            log_inputs: false,
        };
        let traj = run_autonomous(chain.as_mut(), &x0, cfg.horizon, opts).map_err(config_err)?;
        Ok(traj.diameters)
    });
    let runs = runs.into_iter().collect::<Result<Vec<_>, _>>()?;

    let mut rate = Vec::new();
    for (seed, d) in cfg.seeds.iter().zip(&runs) {
        let mut csv = String::from("t,d_x\n");
        for &t in &times {
            csv.push_str(&format!("{t},{}\n", fmt_real(d[t])));
        }
        ctx.write(&format!("consensus_seed{seed}.csv"), &csv)?;
        if let Some(beta) = cfg.audits.rate_beta {
            let stats = consensus_rate_series(&d[1..], 1, beta).map_err(config_err)?;
            rate.push(json!({"seed": seed, "ratio": stats.ratio, "passed": stats.passed}));
        }
    }
    let rows: Vec<Vec<f64>> = runs.iter().map(|d| times.iter().map(|&t| d[t]).collect()).collect();
    ctx.write("consensus_pooled.csv", &pooled(&rows, &times).to_csv())?;

    let finals: Vec<f64> = runs.iter().map(|d| d[cfg.horizon]).collect();
    let rate_ok = rate.iter().all(|r| r["passed"] == true);
    let pass = rate_ok && assumptions_ok != Some(false);
    ctx.write_json(
        "summary.json",
        &json!({
            "command": "consensus",
            "horizon": cfg.horizon,
            "seeds": cfg.seeds,
            "initial_d_x": avgopt::state_diameter(&x0),
            "final_d_x": quantiles(&finals),
            "assumptions_passed": assumptions_ok,
            "rate": cfg.audits.rate_beta.map(|b| json!({"beta": b, "per_seed": rate})),
            "pass": pass,
        }),
    )?;
    ctx.write_meta(&cfg)?;
    if pass {
        Ok(())
    } else {
        Err(Failure::Audit("consensus audits failed; see summary.json".into()))
    }
}

struct SeedResult {
    recorded_gap: Vec<f64>,
    final_gap: f64,
    final_dist: f64,
    final_d_x: f64,
    lyapunov: Option<(bool, f64)>,
    rate: Option<(f64, bool)>,
    moments: Option<(Vec<f64>, Vec<f64>)>,
}

fn worst_agent_distance(oracle: &OracleResult, x: &StateBlock) -> f64 {
    x.rows().map(|r| oracle.dist_to_opt(r)).fold(0.0, f64::max)
}

pub fn optimize(ctx: &Context, mut cfg: ExperimentConfig, trials: Option<usize>, offset: u64) -> Outcome {
    cfg.apply_overrides(trials, offset);
    let (objectives, schedule, x0) = cfg.problem().map_err(Failure::Config)?;
    let m = x0.m();
    let oracle = optimal_oracle(&objectives, &SearchBox::cube(m, cfg.search.half_width), cfg.search.grid)
        .map_err(config_err)?;
    if cfg.audits.second_moment && cfg.seeds.len() < avgopt::diagnostics::MIN_MOMENT_RUNS {
        return Err(Failure::Config(format!(
            "second_moment audit needs at least {} seeds",
            avgopt::diagnostics::MIN_MOMENT_RUNS
        )));
    }
    if cfg.audits.rate_beta.is_some() && cfg.horizon < 99 {
        return Err(Failure::Config("rate audit needs horizon >= 99".into()));
    }
    let assumptions_ok = assumptions_audit(ctx, &cfg)?;
    let v = oracle.representative();
    let t0 = schedule.t0();
    let times: Vec<usize> = recorded(cfg.horizon, cfg.record_every).map(|k| t0 + k).collect();

    let results = Execution::default().map_slice(&cfg.seeds, |&seed| -> Result<(String, SeedResult), Failure> {
        let mut chain = chain_for_seed(&cfg, seed)?;
        let run = solve_distributed(chain.as_mut(), &objectives, schedule, &x0, cfg.horizon, SolverOptions::default())
            .map_err(config_err)?;
        let csv = run.summary_csv(oracle.f_star, |x| worst_agent_distance(&oracle, x), cfg.record_every);
        let lyapunov = if cfg.audits.lyapunov {
            let r = lyapunov_audit(&run, &objectives, &v, None, LyapunovOptions::default()).map_err(config_err)?;
            Some((r.descent_ok(), r.descent_max_violation))
        } else {
            None
        };
        let rate = match cfg.audits.rate_beta {
            Some(b) => {
                let s = consensus_rate_series(&run.trajectory.diameters, t0, b).map_err(config_err)?;
                Some((s.ratio, s.passed))
            }
            None => None,
        };
        let last = run.trajectory.states.last().expect("nonempty trajectory");
        let result = SeedResult {
            recorded_gap: times.iter().map(|t| run.f_values[t - t0] - oracle.f_star).collect(),
            final_gap: run.f_values.last().unwrap() - oracle.f_star,
            final_dist: worst_agent_distance(&oracle, last),
            final_d_x: *run.trajectory.diameters.last().unwrap(),
            lyapunov,
            rate,
            moments: cfg
                .audits
                .second_moment
                .then(|| (run.trajectory.diameters.clone(), run.alphas.clone())),
        };
        Ok((csv, result))
    });
    let results = results.into_iter().collect::<Result<Vec<_>, _>>()?;

    for (seed, (csv, _)) in cfg.seeds.iter().zip(&results) {
        ctx.write(&format!("optimize_seed{seed}.csv"), csv)?;
    }
    let results: Vec<SeedResult> = results.into_iter().map(|(_, r)| r).collect();
    let gaps: Vec<Vec<f64>> = results.iter().map(|r| r.recorded_gap.clone()).collect();
    ctx.write("optimize_pooled.csv", &pooled(&gaps, &times).to_csv())?;

    let final_gap: Vec<f64> = results.iter().map(|r| r.final_gap).collect();
    let final_dist: Vec<f64> = results.iter().map(|r| r.final_dist).collect();
    let final_dx: Vec<f64> = results.iter().map(|r| r.final_d_x).collect();

    let mut pass = assumptions_ok != Some(false);
    let convergence = cfg.success.as_ref().map(|s| {
        let ok = results
            .iter()
            .filter(|r| r.final_dist <= s.tol_x && r.final_gap <= s.tol_f)
            .count();
        let passed = ok as f64 >= s.min_fraction * results.len() as f64;
        pass &= passed;
        json!({"tol_x": s.tol_x, "tol_f": s.tol_f, "min_fraction": s.min_fraction,
               "converged": ok, "runs": results.len(), "passed": passed})
    });
    let lyapunov = cfg.audits.lyapunov.then(|| {
        let ok = results.iter().all(|r| r.lyapunov.is_some_and(|l| l.0));
        let worst = results.iter().filter_map(|r| r.lyapunov.map(|l| l.1)).fold(f64::NEG_INFINITY, f64::max);
        pass &= ok;
        json!({"v": v, "max_violation": worst, "passed": ok})
    });
    let rate = cfg.audits.rate_beta.map(|b| {
        let ok = results.iter().all(|r| r.rate.is_some_and(|s| s.1));
        let worst = results.iter().filter_map(|r| r.rate.map(|s| s.0)).fold(0.0, f64::max);
        pass &= ok;
        json!({"beta": b, "worst_ratio": worst, "passed": ok})
    });
    let moment = if cfg.audits.second_moment {
        let views: Vec<(&[f64], &[f64])> = results
            .iter()
            .filter_map(|r| r.moments.as_ref().map(|(d, a)| (d.as_slice(), a.as_slice())))
            .collect();
        let m = second_moment_series(&views, t0).map_err(config_err)?;
        pass &= m.passed;
        Some(json!({"last_half_slope": m.last_half_slope, "slope_se": m.last_half_slope_se, "passed": m.passed}))
    } else {
        None
    };

    ctx.write_json(
        "summary.json",
        &json!({
            "command": "optimize",
            "horizon": cfg.horizon,
            "seeds": cfg.seeds,
            "oracle": {
                "f_star": oracle.f_star,
                "method": oracle.method,
                "error_bound": oracle.error_bound,
                "set": oracle.set,
            },
            "final_f_gap": quantiles(&final_gap),
            "final_dist_to_opt": quantiles(&final_dist),
            "final_d_x": quantiles(&final_dx),
            "assumptions_passed": assumptions_ok,
            "convergence": convergence,
            "lyapunov": lyapunov,
            "rate": rate,
            "second_moment": moment,
            "pass": pass,
        }),
    )?;
    ctx.write_meta(&cfg)?;
    if pass {
        Ok(())
    } else {
        Err(Failure::Audit("optimize audits failed; see summary.json".into()))
    }
}

#[derive(Serialize)]
struct RateReport<'a> {
    decay: &'a DecayEstimate,
    joint_constants: (f64, f64),
    joint: Vec<JointCheck>,
    pass: bool,
}

#[derive(Serialize)]
struct JointCheck {
    estimate: JointEstimate,
    bound: f64,
    within_bound: bool,
}

pub fn estimate_rate(ctx: &Context, mut cfg: ExperimentConfig, trials: Option<usize>, offset: u64) -> Outcome {
    if let Some(t) = trials {
        cfg.decay.trials = t;
    }
    cfg.chain.seed = cfg.chain.seed.wrapping_add(offset);
    let chain = &cfg.chain;
    let factory = |k: u64| chain.build(k);
    let est = match estimate_diam_decay(factory, cfg.decay.t_max, cfg.decay.trials, Execution::default()) {
        Ok(est) => est,
        Err(e @ Error::AllPathsDegenerate(_)) => return Err(Failure::Audit(e.to_string())),
        Err(e) => return Err(config_err(e)),
    };
    let (c, lambda) = est.joint_constants();
    let mut joint = Vec::new();
    for [[tau1, t1], [tau2, t2]] in &cfg.decay.joint {
        let j = joint_diam_decay(
            factory,
            Window { tau: *tau1, t: *t1 },
            Window { tau: *tau2, t: *t2 },
            cfg.decay.trials,
            Execution::default(),
        )
        .map_err(config_err)?;
        joint.push(JointCheck {
            bound: j.bound(c, lambda),
            within_bound: j.within_bound(c, lambda),
            estimate: j,
        });
    }
    let pass = est.fitted_lambda < 1.0 && joint.iter().all(|j| j.within_bound);
    ctx.write_json(
        "decay.json",
        &RateReport {
            decay: &est,
            joint_constants: (c, lambda),
            joint,
            pass,
        },
    )?;
    let series = Series {
        t: (1..=est.horizon).collect(),
        value: est.mean_diam.clone(),
        se: est.se.clone(),
    };
    ctx.write("decay.csv", &series.to_csv())?;
    ctx.write_meta(&cfg)?;
    if pass {
        Ok(())
    } else {
        Err(Failure::Audit(format!("no geometric decay: fitted lambda {}", est.fitted_lambda)))
    }
}

pub fn resolve_out(cli_out: Option<&Path>, cfg: &ExperimentConfig) -> Result<PathBuf, Failure> {
    cli_out
        .map(Path::to_path_buf)
        .or_else(|| cfg.output_dir.clone())
        .ok_or_else(|| Failure::Config("no output directory: pass --out or set \"output_dir\"".into()))
}
