//! Experiment drivers behind the `ambiport` binary.
//!
//! Every command is a plain function returning rows, so tests and the
//! acceptance target call the same code as the command line.

pub mod error;
pub mod experiments;
pub mod output;
pub mod settings;

pub use error::CliError;
pub use experiments::{
    factorial, policy_curves, simulate_report, solve, solve_levels, table_aaa, table_raa,
    terminal_wealth_curves, Axis, Effects, Factorial, FactorialLevels, FactorialRun, Level,
    PolicyPoint, RaaRow, AaaRow, SimulationReport, SolveSummary, WealthPoint,
};
pub use output::{fmt_num, Format, Header, Rows};

/// Default RAA sweep for `table-raa`.
pub const DEFAULT_RAA: [f64; 10] = [0.01, 0.02, 0.04, 0.1, 0.3, 0.7, 1.2, 1.7, 2.0, 2.2];
/// Default AAA sweep for `table-aaa`.
pub const DEFAULT_AAA: [f64; 10] = [0.01, 0.1, 0.5, 1.0, 2.0, 3.0, 4.0, 8.0, 12.0, 15.0];
