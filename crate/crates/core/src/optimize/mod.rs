//! Local objectives, step sizes, the distributed subgradient solver, and
//! reference optima for checking it.

mod lyapunov;
mod objective;
mod oracle;
mod schedule;
mod solver;

pub use lyapunov::{lyapunov_audit, summability_tails, LyapunovOptions, LyapunovReport, SummabilityTails};
pub use objective::{
    abs_deviation, huber, max_affine, total, total_lipschitz, validate_objective, Objective,
    ObjectiveCheck,
};
pub use oracle::{optimal_oracle, OptimalSet, OracleMethod, OracleResult, SearchBox};
pub use schedule::{make_schedule, StepSchedule};
pub use solver::{check_problem, solve_distributed, OptRun, RunSummary, SolverOptions, SubgradientPolicy};
