//! Optimal delegated portfolio choice with an option-style payoff, Bayesian
//! learning about the drift and smooth ambiguity aversion.
//!
//! The pipeline is: solve the concavification point of the payoff
//! ([`envelope`]), price the optimal claim under a candidate prior with the
//! filter kernel ([`filter`], [`solver`]), and minimise the aggregator's
//! penalised value over priors ([`ambiguity`]). [`sim`] checks the result by
//! simulation.

// `!(x > 0.0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::too_many_arguments)]

pub mod ambiguity;
pub mod config;
pub mod envelope;
pub mod error;
pub mod filter;
pub mod model;
pub mod optimize;
pub mod quadrature;
pub mod roots;
pub mod sim;
pub mod solver;

pub use ambiguity::{
    combine, penalty_kl, penalty_log_factor, penalty_power, rn_derivative, worst_case_prior, OuterSettings,
    PenaltyEvaluation, SearchDiagnostics, WorstCaseResult, WorstCaseSearch,
};
pub use config::{Config, Problem};
pub use envelope::{brute_force_demand, inverse_marginal, solve_concavification_point, EnvelopeSolution};
pub use error::{Error, FieldError, Result, ValidationReport};
pub use filter::FilterKernel;
pub use model::{AmbiguitySpec, Contract, DiscretePrior, MarketParams, RiskPrefs};
pub use quadrature::{Integrator, QuadratureSpec};
pub use sim::{simulate, DriftMode, PathBundle, SimSettings};
pub use solver::{breakpoints, budget, solve_kappa, Fraction, SolvedPolicy, SolverSettings, SurfacePoint};
