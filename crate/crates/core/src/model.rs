//! Market, contract, preference and belief parameters.
//!
//! Every solver in the crate consumes these types. They are plain values;
//! once a [`crate::config::Problem`] has been validated none of them change.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, ValidationReport};

/// Constant-coefficient market: risk-free rate, stock volatility and horizon.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarketParams {
    /// Risk-free rate per year.
    pub r: f64,
    /// Volatility per square-root year.
    pub sigma: f64,
    /// Investment horizon in years.
    pub horizon: f64,
}

impl MarketParams {
    pub fn new(r: f64, sigma: f64, horizon: f64) -> Result<Self> {
        let m = Self { r, sigma, horizon };
        m.check().map_err(Error::Invalid)?;
        Ok(m)
    }

    pub fn check(&self) -> Result<(), ValidationReport> {
        let mut report = ValidationReport::default();
        if !self.r.is_finite() || self.r < 0.0 {
            report.push("market.r", format!("must be finite and >= 0, got {}", self.r));
        }
        if !self.sigma.is_finite() || self.sigma <= 0.0 {
            report.push("market.sigma", format!("must be finite and > 0, got {}", self.sigma));
        }
        if !self.horizon.is_finite() || self.horizon <= 0.0 {
            report.push(
                "market.horizon",
                format!("must be finite and > 0, got {}", self.horizon),
            );
        }
        report.into_result()
    }

    /// Market price of risk `(z - r) / sigma` for drift level `z`.
    pub fn theta_of(&self, z: f64) -> f64 {
        (z - self.r) / self.sigma
    }

    /// `exp(-r T)`.
    pub fn discount(&self) -> f64 {
        (-self.r * self.horizon).exp()
    }
}

/// Option-style manager compensation `g(x) = delta (x - K)^+ + C`.
///
/// In linear mode the payoff is the identity and `(delta, K, C)` are forced
/// to `(1, 0, 0)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Contract {
    pub delta: f64,
    pub strike: f64,
    pub base_fee: f64,
    #[serde(default)]
    pub linear: bool,
}

impl Contract {
    pub fn option(delta: f64, strike: f64, base_fee: f64) -> Result<Self> {
        let c = Self {
            delta,
            strike,
            base_fee,
            linear: false,
        };
        c.check().map_err(Error::Invalid)?;
        Ok(c)
    }

    pub fn linear() -> Self {
        Self {
            delta: 1.0,
            strike: 0.0,
            base_fee: 0.0,
            linear: true,
        }
    }

    /// Forces the linear-mode parameters; option contracts are returned unchanged.
    pub fn normalized(self) -> Self {
        if self.linear {
            Self::linear()
        } else {
            self
        }
    }

    pub fn check(&self) -> Result<(), ValidationReport> {
        let mut report = ValidationReport::default();
        if self.linear {
            return report.into_result();
        }
        if !(self.delta.is_finite() && self.delta > 0.0 && self.delta <= 1.0) {
            report.push("contract.delta", format!("must lie in (0, 1], got {}", self.delta));
        }
        if !self.strike.is_finite() || self.strike < 0.0 {
            report.push("contract.strike", format!("must be >= 0, got {}", self.strike));
        }
        if !self.base_fee.is_finite() || self.base_fee <= 0.0 {
            report.push(
                "contract.base_fee",
                format!("must be > 0 in option mode, got {}", self.base_fee),
            );
        }
        report.into_result()
    }

    /// Manager payoff for terminal fund value `x`.
    pub fn payoff(&self, x: f64) -> f64 {
        if self.linear {
            x
        } else {
            self.delta * (x - self.strike).max(0.0) + self.base_fee
        }
    }
}

/// Power utility `u(x) = x^alpha / alpha`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskPrefs {
    pub alpha: f64,
}

impl RiskPrefs {
    pub fn new(alpha: f64) -> Result<Self> {
        let p = Self { alpha };
        p.check().map_err(Error::Invalid)?;
        Ok(p)
    }

    /// Builds the preferences from a relative risk aversion level `1 - alpha`.
    pub fn from_rra(rra: f64) -> Result<Self> {
        Self::new(1.0 - rra)
    }

    pub fn check(&self) -> Result<(), ValidationReport> {
        let mut report = ValidationReport::default();
        if !self.alpha.is_finite() || self.alpha >= 1.0 || self.alpha == 0.0 {
            report.push(
                "risk.alpha",
                format!("must satisfy alpha < 1 and alpha != 0, got {}", self.alpha),
            );
        }
        report.into_result()
    }

    pub fn rra(&self) -> f64 {
        1.0 - self.alpha
    }

    pub fn utility(&self, x: f64) -> f64 {
        x.powf(self.alpha) / self.alpha
    }

    pub fn marginal(&self, x: f64) -> f64 {
        x.powf(self.alpha - 1.0)
    }

    /// Exponent `1 / (alpha - 1)` of the inverse marginal utility.
    pub fn inverse_exponent(&self) -> f64 {
        1.0 / (self.alpha - 1.0)
    }

    /// Growth rate `1 / (1 - alpha)` of optimal wealth in the likelihood ratio.
    pub fn wealth_elasticity(&self) -> f64 {
        1.0 / (1.0 - self.alpha)
    }
}

/// Ambiguity attitude: the smooth-ambiguity aggregator and its parameter.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum AmbiguitySpec {
    #[default]
    Neutral,
    /// `phi(x) = x^lambda / lambda`; relative ambiguity aversion is `1 - lambda`.
    Power { lambda: f64 },
    /// `phi(x) = -exp(-gamma x)`; `gamma` is the absolute ambiguity aversion.
    Exponential { gamma: f64 },
    /// `phi(x) = log x`.
    Log,
}

impl AmbiguitySpec {
    pub fn power_from_raa(raa: f64) -> Self {
        AmbiguitySpec::Power { lambda: 1.0 - raa }
    }

    pub fn check(&self) -> Result<(), ValidationReport> {
        let mut report = ValidationReport::default();
        match *self {
            AmbiguitySpec::Power { lambda } => {
                if !lambda.is_finite() || lambda >= 1.0 || lambda == 0.0 {
                    report.push(
                        "ambiguity.lambda",
                        format!("must satisfy lambda < 1 and lambda != 0, got {lambda}"),
                    );
                }
            }
            AmbiguitySpec::Exponential { gamma } => {
                if !gamma.is_finite() || gamma <= 0.0 {
                    report.push("ambiguity.gamma", format!("must be > 0, got {gamma}"));
                }
            }
            AmbiguitySpec::Neutral | AmbiguitySpec::Log => {}
        }
        report.into_result()
    }

    pub fn label(&self) -> String {
        match *self {
            AmbiguitySpec::Neutral => "neutral".into(),
            AmbiguitySpec::Power { lambda } => format!("power(lambda={lambda})"),
            AmbiguitySpec::Exponential { gamma } => format!("exponential(AAA={gamma})"),
            AmbiguitySpec::Log => "log".into(),
        }
    }
}

const PRIOR_SUM_TOL: f64 = 1e-9;
const PRIOR_EXACT_TOL: f64 = 1e-12;

/// Finite-support belief over the unknown drift `Z`.
///
/// Atoms are strictly increasing drift levels; every probability is strictly
/// positive so that any two priors over the same atoms are equivalent.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscretePrior {
    atoms: Vec<f64>,
    probs: Vec<f64>,
}

impl DiscretePrior {
    pub fn new(atoms: Vec<f64>, probs: Vec<f64>) -> Result<Self> {
        Self::validated(atoms, probs, "prior").map_err(Error::Invalid)
    }

    /// Validates and builds a prior, reporting diagnostics under `field`.
    pub fn validated(
        atoms: Vec<f64>,
        mut probs: Vec<f64>,
        field: &str,
    ) -> Result<Self, ValidationReport> {
        let mut report = ValidationReport::default();
        if atoms.is_empty() {
            report.push(format!("{field}.atoms"), "at least one atom is required");
        }
        if atoms.len() != probs.len() {
            report.push(
                format!("{field}.probs"),
                format!(
                    "length {} does not match {} atoms",
                    probs.len(),
                    atoms.len()
                ),
            );
            return Err(report);
        }
        if atoms.iter().any(|z| !z.is_finite()) {
            report.push(format!("{field}.atoms"), "atoms must be finite");
        }
        for w in atoms.windows(2) {
            if w[0] == w[1] {
                report.push(format!("{field}.atoms"), format!("duplicate atoms at {}", w[0]));
            } else if w[0] > w[1] {
                report.push(
                    format!("{field}.atoms"),
                    format!("atoms must be strictly increasing ({} > {})", w[0], w[1]),
                );
            }
        }
        for (i, &p) in probs.iter().enumerate() {
            if !p.is_finite() || p <= 0.0 {
                report.push(
                    format!("{field}.probs[{i}]"),
                    format!("probability must be > 0 (equivalent priors), got {p}"),
                );
            }
        }
        if !report.is_empty() {
            return Err(report);
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > PRIOR_SUM_TOL {
            report.push(
                format!("{field}.probs"),
                format!("probabilities must sum to 1, got {total}"),
            );
            return Err(report);
        }
        if (total - 1.0).abs() > PRIOR_EXACT_TOL {
            probs.iter_mut().for_each(|p| *p /= total);
        }
        Ok(Self { atoms, probs })
    }

    /// Two-point prior with `q` the probability of the larger drift `z2`.
    pub fn two_point(z1: f64, z2: f64, q: f64) -> Result<Self> {
        Self::new(vec![z1, z2], vec![1.0 - q, q])
    }

    pub fn point_mass(z: f64) -> Self {
        Self {
            atoms: vec![z],
            probs: vec![1.0],
        }
    }

    /// Builds a prior over `atoms` from positive, already normalised weights
    /// produced internally (posterior updates, simplex parametrisations).
    pub(crate) fn from_weights(atoms: Vec<f64>, mut probs: Vec<f64>) -> Self {
        let total: f64 = probs.iter().sum();
        probs
            .iter_mut()
            .for_each(|p| *p = (*p / total).max(f64::MIN_POSITIVE));
        Self { atoms, probs }
    }

    /// Same atoms, new weights (validated).
    pub fn reweighted(&self, probs: Vec<f64>) -> Result<Self> {
        Self::new(self.atoms.clone(), probs)
    }

    pub fn atoms(&self) -> &[f64] {
        &self.atoms
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn is_point_mass(&self) -> bool {
        self.atoms.len() == 1
    }

    pub fn mean(&self) -> f64 {
        self.atoms.iter().zip(&self.probs).map(|(z, p)| z * p).sum()
    }

    /// Probability of the largest atom (the "good state" of a two-point prior).
    pub fn q(&self) -> f64 {
        *self.probs.last().expect("prior is non-empty")
    }

    pub fn z1(&self) -> f64 {
        self.atoms[0]
    }

    pub fn z2(&self) -> f64 {
        *self.atoms.last().expect("prior is non-empty")
    }

    pub fn same_support(&self, other: &DiscretePrior) -> bool {
        self.atoms == other.atoms
    }
}
