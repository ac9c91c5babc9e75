//! TOML configuration and the validated problem it describes.

use serde::{Deserialize, Serialize};

use crate::ambiguity::OuterSettings;
use crate::envelope::{solve_concavification_point, EnvelopeSolution, DEFAULT_TOL};
use crate::error::{Error, Result, ValidationReport};
use crate::filter::FilterKernel;
use crate::model::{AmbiguitySpec, Contract, DiscretePrior, MarketParams, RiskPrefs};
use crate::solver::{solve_kappa, SolvedPolicy, SolverSettings};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MarketSection {
    pub r: f64,
    pub sigma: f64,
    pub horizon: f64,
    pub initial_wealth: f64,
}

impl Default for MarketSection {
    fn default() -> Self {
        Self {
            r: 0.02,
            sigma: 0.3,
            horizon: 10.0,
            initial_wealth: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PriorSection {
    pub atoms: Vec<f64>,
    pub probs: Vec<f64>,
}

impl Default for PriorSection {
    fn default() -> Self {
        Self {
            atoms: vec![0.03, 0.09],
            probs: vec![0.2, 0.8],
        }
    }
}

impl Default for Contract {
    fn default() -> Self {
        Self {
            delta: 0.2,
            strike: 1.0,
            base_fee: 0.02,
            linear: false,
        }
    }
}

impl Default for RiskPrefs {
    fn default() -> Self {
        Self { alpha: 0.5 }
    }
}

/// Complete problem description as read from a config file.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub market: MarketSection,
    pub contract: Contract,
    pub risk: RiskPrefs,
    pub ambiguity: AmbiguitySpec,
    pub prior: PriorSection,
    pub solver: SolverSettings,
    pub optimizer: OuterSettings,
}

impl Config {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    /// Validates every section and returns the problem or all diagnostics.
    pub fn validate(&self) -> Result<Problem, ValidationReport> {
        Problem::from_config(self)
    }
}

/// Validated problem: every invariant of the parameter types holds.
#[derive(Debug, Clone, PartialEq)]
pub struct Problem {
    pub market: MarketParams,
    pub initial_wealth: f64,
    pub contract: Contract,
    pub risk: RiskPrefs,
    pub ambiguity: AmbiguitySpec,
    pub prior: DiscretePrior,
    pub solver: SolverSettings,
    pub optimizer: OuterSettings,
}

impl Problem {
    pub fn from_config(c: &Config) -> Result<Self, ValidationReport> {
        let mut report = ValidationReport::default();
        let market = MarketParams {
            r: c.market.r,
            sigma: c.market.sigma,
            horizon: c.market.horizon,
        };
        let mut collect = |r: Result<(), ValidationReport>| {
            if let Err(e) = r {
                report.extend(e);
            }
        };
        collect(market.check());
        let contract = c.contract.normalized();
        collect(contract.check());
        collect(c.risk.check());
        collect(c.ambiguity.check());
        collect(c.solver.check());
        collect(c.optimizer.check());
        if !(c.market.initial_wealth.is_finite() && c.market.initial_wealth > 0.0) {
            report.push(
                "market.initial_wealth",
                format!("must be > 0, got {}", c.market.initial_wealth),
            );
        }
        if matches!(c.ambiguity, AmbiguitySpec::Power { .. } | AmbiguitySpec::Log)
            && !(c.risk.alpha > 0.0 && c.risk.alpha < 1.0)
        {
            report.push(
                "risk.alpha",
                format!(
                    "power-power requires positive utility: alpha must lie in (0, 1), got {}",
                    c.risk.alpha
                ),
            );
        }
        let prior = match DiscretePrior::validated(c.prior.atoms.clone(), c.prior.probs.clone(), "prior") {
            Ok(p) => Some(p),
            Err(e) => {
                report.extend(e);
                None
            }
        };
        report.into_result()?;
        Ok(Self {
            market,
            initial_wealth: c.market.initial_wealth,
            contract,
            risk: c.risk,
            ambiguity: c.ambiguity,
            prior: prior.expect("validated"),
            solver: c.solver,
            optimizer: c.optimizer,
        })
    }

    /// Config that reproduces this problem.
    pub fn to_config(&self) -> Config {
        Config {
            market: MarketSection {
                r: self.market.r,
                sigma: self.market.sigma,
                horizon: self.market.horizon,
                initial_wealth: self.initial_wealth,
            },
            contract: self.contract,
            risk: self.risk,
            ambiguity: self.ambiguity,
            prior: PriorSection {
                atoms: self.prior.atoms().to_vec(),
                probs: self.prior.probs().to_vec(),
            },
            solver: self.solver,
            optimizer: self.optimizer,
        }
    }

    pub fn envelope(&self) -> Result<EnvelopeSolution> {
        solve_concavification_point(self.contract, self.risk, DEFAULT_TOL)
    }

    pub fn kernel(&self, prior: &DiscretePrior) -> FilterKernel {
        FilterKernel::new(prior, self.market)
    }

    /// Solves the filtered problem under `prior` at the configured wealth.
    pub fn solve_under(&self, prior: &DiscretePrior) -> Result<SolvedPolicy> {
        self.solve_with(self.envelope()?, prior)
    }

    pub(crate) fn solve_with(&self, env: EnvelopeSolution, prior: &DiscretePrior) -> Result<SolvedPolicy> {
        solve_kappa(self.initial_wealth, env, self.kernel(prior), self.solver)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let p = Config::default().validate().unwrap();
        assert_eq!(p.prior.q(), 0.8);
        assert_eq!(p.contract.delta, 0.2);
    }

    #[test]
    fn round_trip_is_exact() {
        let mut c = Config::default();
        c.market.r = 0.1 + 0.2;
        c.prior.probs = vec![1.0 / 3.0, 2.0 / 3.0];
        c.ambiguity = AmbiguitySpec::Power { lambda: 0.99 };
        let back = Config::from_toml_str(&c.to_toml_string()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.market.r.to_bits(), c.market.r.to_bits());
    }

    #[test]
    fn partial_file_fills_defaults() {
        let c = Config::from_toml_str("[ambiguity]\nkind = \"exponential\"\ngamma = 2.0\n").unwrap();
        assert_eq!(c.ambiguity, AmbiguitySpec::Exponential { gamma: 2.0 });
        assert_eq!(c.market.sigma, 0.3);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(matches!(
            Config::from_toml_str("[market]\nsigmaa = 0.3\n"),
            Err(Error::Parse(_))
        ));
    }

    #[test]
    fn power_needs_positive_utility() {
        let mut c = Config::default();
        c.risk.alpha = -1.0;
        c.ambiguity = AmbiguitySpec::Power { lambda: 0.5 };
        let err = c.validate().unwrap_err();
        assert!(err.mentions("power-power requires positive utility"));
    }

    #[test]
    fn collects_all_diagnostics() {
        let mut c = Config::default();
        c.market.sigma = -1.0;
        c.prior.atoms = vec![0.05, 0.05];
        c.prior.probs = vec![0.5, 0.5];
        c.contract.delta = 2.0;
        let err = c.validate().unwrap_err();
        assert!(err.mentions("duplicate atoms"));
        assert!(err.mentions("market.sigma"));
        assert!(err.mentions("contract.delta"));
    }
}
