//! Experiment pipeline: simulate, train, evaluate and compare predictors.

mod experiment;
mod study;
mod sweep;

pub use experiment::{run_experiment, simulation_grid, Experiment, Method, MethodRow, PredictionReport, Sample};
pub use study::{
    compare_exact_vs_nn, run_convergence_study, CompareReport, CompareRow, ConvergenceConfig, ConvergenceReport,
    ConvergenceRow,
};
pub use sweep::{
    horizon_table_n_obs, run_cells, run_table_sweep, table_cells, table_horizons, table_n_obs, thread_pool,
    SweepReport, SweepRow, Template, HORIZON_TABLE_HURST, TABLE_HURST, TABLE_S,
};
