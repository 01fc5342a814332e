//! Ground-truth kernels, Gaussian simulation, error metrics and the
//! benchmark harnesses built on them.

pub mod bench;
pub mod jackson;
pub mod matern;
pub mod metrics;
pub mod sample;

pub use bench::{rows_to_csv, run_table1_benchmark, run_table2_benchmark, BenchRow, Table1Config, Table2Config};
pub use jackson::{bump_psd, jackson_rate_study, tail_decay_scan, JacksonReport, TailScan};
pub use matern::{bivariate_lambda_bound, BivariateMaternSpec, MaternSpec};
pub use metrics::{empirical_acf, empirical_cross_acf, iae, normalized_iae, IAE_STEP};
pub use sample::{rng_for, sample_gp, GpSampler};
