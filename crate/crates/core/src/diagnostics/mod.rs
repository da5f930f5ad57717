//! Monte Carlo and deterministic audits of the contraction and rate
//! statements behind the convergence result. Every stochastic check uses a
//! `3 SE` band.

mod audits;
mod decay;
mod rates;

pub use audits::{conditional_column_check, consensus_bound_audit, window_diameters, ColumnCheck};
pub use decay::{
    estimate_diam_decay, joint_diam_decay, log_theta, mixing_floor_estimate, ChainFactory,
    DecayEstimate, FloorEstimate, JointEstimate, Window, MIN_TRIALS,
};
pub use rates::{
    consensus_rate_series, consensus_rate_stats, second_moment_ratio, second_moment_series,
    stopping_time_gaps, sum_bound_check, RateStats, SecondMoment, StoppingTimeStats, SumBound,
    MIN_MOMENT_RUNS, MOMENT_BATCHES, MIN_RATE_POINTS, SUM_BOUND_GROWTH_TOL,
};
