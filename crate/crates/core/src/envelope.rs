//! Pointwise maximizer of `u(g(x)) - y x` for the option payoff.
//!
//! The composite `u ∘ g` is not concave: it is flat at `u(C)` up to the
//! strike and concave beyond it. Its concave envelope touches the graph at
//! zero and on the interior branch `h`, and the maximizer jumps from `h(ŷ)`
//! to zero at the concavification point `ŷ`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{Contract, RiskPrefs};
use crate::roots;

/// Default `|ΔL|` tolerance for the concavification root.
pub const DEFAULT_TOL: f64 = 1e-10;

/// `I(x) = x^{1/(alpha-1)}`, the inverse of `u'(x) = x^{alpha-1}`.
pub fn inverse_marginal(x: f64, alpha: f64) -> Result<f64> {
    if !(x > 0.0) {
        return Err(Error::domain("x", format!("inverse marginal needs x > 0, got {x}")));
    }
    Ok(x.powf(1.0 / (alpha - 1.0)))
}

/// Solved concavification point together with the data needed to evaluate the
/// optimal demand.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnvelopeSolution {
    /// `+inf` in linear mode.
    pub y_hat: f64,
    pub contract: Contract,
    pub risk: RiskPrefs,
    pub tol: f64,
}

impl EnvelopeSolution {
    pub fn is_linear(&self) -> bool {
        self.contract.linear
    }

    /// Right end `delta C^{alpha-1}` of the interval on which `h` is defined.
    pub fn upper_limit(&self) -> f64 {
        if self.is_linear() {
            f64::INFINITY
        } else {
            upper_limit(&self.contract, &self.risk)
        }
    }

    fn inv(&self, x: f64) -> f64 {
        x.powf(self.risk.inverse_exponent())
    }

    /// `h(y) = (I(y/delta) - C)/delta + K`.
    pub fn interior_branch(&self, y: f64) -> Result<f64> {
        let ub = self.upper_limit();
        if !(y > 0.0 && y < ub) {
            return Err(Error::domain(
                "y",
                format!("interior branch is defined on (0, {ub}), got {y}"),
            ));
        }
        Ok(self.h(y))
    }

    fn h(&self, y: f64) -> f64 {
        let c = &self.contract;
        (self.inv(y / c.delta) - c.base_fee) / c.delta + c.strike
    }

    /// Optimal terminal demand at multiplier level `y`.
    ///
    /// Zero on `[ŷ, ∞)`; the tie at `ŷ` goes to zero.
    pub fn optimal_demand(&self, y: f64) -> f64 {
        if !(y > 0.0) {
            return f64::INFINITY;
        }
        if self.is_linear() {
            self.inv(y)
        } else if y < self.y_hat {
            self.h(y)
        } else {
            0.0
        }
    }

    /// `y · d/dy optimal_demand(y)` away from the jump. Expressed as an
    /// elasticity so that callers can avoid forming `y^{...-1}` at extreme `y`.
    pub fn demand_elasticity(&self, y: f64) -> f64 {
        let k = self.risk.inverse_exponent();
        if self.is_linear() {
            k * self.inv(y)
        } else if y > 0.0 && y < self.y_hat {
            k * self.inv(y / self.contract.delta) / self.contract.delta
        } else {
            0.0
        }
    }

    /// Classical derivative of the optimal demand; zero beyond `ŷ`.
    pub fn demand_derivative(&self, y: f64) -> f64 {
        self.demand_elasticity(y) / y
    }

    /// Size of the downward jump `h(ŷ⁻)` at the concavification point.
    pub fn jump_size(&self) -> f64 {
        if self.is_linear() {
            0.0
        } else {
            self.h(self.y_hat)
        }
    }

    /// `u(g(x))`, with `u(g(0)) = u(C)` in option mode.
    pub fn payoff_utility(&self, x: f64) -> f64 {
        self.risk.utility(self.contract.payoff(x))
    }

    /// `u(g(x)) - y x`.
    pub fn lagrangian(&self, y: f64, x: f64) -> f64 {
        self.payoff_utility(x) - y * x
    }

    /// `ΔL(y) = u(g(h(y))) - u(C) - y h(y)` on `(0, delta C^{alpha-1})`.
    pub fn delta_lagrangian(&self, y: f64) -> f64 {
        delta_lagrangian(&self.contract, &self.risk, y)
    }
}

fn upper_limit(c: &Contract, risk: &RiskPrefs) -> f64 {
    c.delta * c.base_fee.powf(risk.alpha - 1.0)
}

fn delta_lagrangian(c: &Contract, risk: &RiskPrefs, y: f64) -> f64 {
    let i = (y / c.delta).powf(risk.inverse_exponent());
    let h = (i - c.base_fee) / c.delta + c.strike;
    risk.utility(i) - risk.utility(c.base_fee) - y * h
}

/// Locates `ŷ`, the unique root of `ΔL` on `(ε, delta C^{alpha-1})` with
/// `ε = 1e-12 · delta C^{alpha-1}`. Linear contracts get `ŷ = +inf`.
pub fn solve_concavification_point(contract: Contract, risk: RiskPrefs, tol: f64) -> Result<EnvelopeSolution> {
    let contract = contract.normalized();
    if contract.linear {
        return Ok(EnvelopeSolution {
            y_hat: f64::INFINITY,
            contract,
            risk,
            tol,
        });
    }
    contract.check()?;
    risk.check()?;
    let ub = upper_limit(&contract, &risk);
    let lo = 1e-12 * ub;
    let y_hat = roots::bisect(
        |y| delta_lagrangian(&contract, &risk, y),
        lo,
        ub,
        0.0,
        tol,
        400,
        "concavification point",
    )?;
    Ok(EnvelopeSolution {
        y_hat,
        contract,
        risk,
        tol,
    })
}

/// Grid maximizer of `u(g(x)) - y x` over `grid_n` equally spaced points on
/// `[0, grid_max]`. Ties go to the smaller `x`.
pub fn brute_force_demand(env: &EnvelopeSolution, y: f64, grid_max: f64, grid_n: usize) -> f64 {
    let n = grid_n.max(2);
    let step = grid_max / (n - 1) as f64;
    let mut best_x = 0.0;
    let mut best = env.lagrangian(y, 0.0);
    for i in 1..n {
        let x = step * i as f64;
        let v = env.lagrangian(y, x);
        if v > best {
            best = v;
            best_x = x;
        }
    }
    best_x
}
