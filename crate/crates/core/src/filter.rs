//! Exact nonlinear filter for a finite-support drift prior.
//!
//! With `Y_t = B_t + ∫θ ds` observed, the likelihood of atom `i` at `(t, y)` is
//! `exp(θ_i y − θ_i² t / 2)`. Everything here is a finite mixture of those
//! terms, evaluated in the log domain.

use serde::Serialize;

use crate::model::{DiscretePrior, MarketParams};
use crate::quadrature::log_gaussian_density;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FilterKernel {
    thetas: Vec<f64>,
    weights: Vec<f64>,
    log_weights: Vec<f64>,
    atoms: Vec<f64>,
    market: MarketParams,
}

impl FilterKernel {
    pub fn new(prior: &DiscretePrior, market: MarketParams) -> Self {
        let thetas = prior.atoms().iter().map(|&z| market.theta_of(z)).collect();
        Self {
            thetas,
            weights: prior.probs().to_vec(),
            log_weights: prior.probs().iter().map(|p| p.ln()).collect(),
            atoms: prior.atoms().to_vec(),
            market,
        }
    }

    pub fn thetas(&self) -> &[f64] {
        &self.thetas
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Drift levels the market prices of risk were built from.
    pub fn atoms(&self) -> &[f64] {
        &self.atoms
    }

    pub fn market(&self) -> &MarketParams {
        &self.market
    }

    pub fn theta_min(&self) -> f64 {
        self.thetas.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn theta_max(&self) -> f64 {
        self.thetas.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    fn exponents(&self, t: f64, y: f64) -> impl Iterator<Item = f64> + '_ {
        self.thetas
            .iter()
            .zip(&self.log_weights)
            .map(move |(th, lw)| lw + th * y - 0.5 * th * th * t)
    }

    /// `log F(t, y)` by shifted log-sum-exp.
    pub fn log_f(&self, t: f64, y: f64) -> f64 {
        let m = self.exponents(t, y).fold(f64::NEG_INFINITY, f64::max);
        m + self.exponents(t, y).map(|a| (a - m).exp()).sum::<f64>().ln()
    }

    /// `F(t, y) = Σ p_i exp(θ_i y − θ_i² t / 2)`.
    pub fn f(&self, t: f64, y: f64) -> f64 {
        self.log_f(t, y).exp()
    }

    /// `∂F/∂y`.
    pub fn f_y(&self, t: f64, y: f64) -> f64 {
        self.f(t, y) * self.posterior_mean(t, y)
    }

    /// Posterior atom weights at `(t, y)`.
    pub fn posterior_weights(&self, t: f64, y: f64) -> Vec<f64> {
        let lf = self.log_f(t, y);
        self.exponents(t, y).map(|a| (a - lf).exp()).collect()
    }

    /// `θ̂ = F_y / F`, the posterior mean market price of risk.
    pub fn posterior_mean(&self, t: f64, y: f64) -> f64 {
        if self.thetas.len() == 1 {
            return self.thetas[0];
        }
        let lf = self.log_f(t, y);
        let v: f64 = self
            .exponents(t, y)
            .zip(&self.thetas)
            .map(|(a, th)| (a - lf).exp() * th)
            .sum();
        v.clamp(self.theta_min(), self.theta_max())
    }

    /// Posterior over the drift atoms.
    pub fn posterior(&self, t: f64, y: f64) -> DiscretePrior {
        DiscretePrior::from_weights(self.atoms.clone(), self.posterior_weights(t, y))
    }

    /// `ξ_T = e^{−rT} / F(T, y_T)`.
    pub fn state_price_density(&self, y_t: f64) -> f64 {
        self.log_state_price_density(y_t).exp()
    }

    pub fn log_state_price_density(&self, y_t: f64) -> f64 {
        -self.market.r * self.market.horizon - self.log_f(self.market.horizon, y_t)
    }

    /// `F(t, v) φ_t(v)`, the density of `Y_t` under the prior-weighted physical
    /// measure, written as the mixture `Σ p_i φ_t(v − θ_i t)`.
    pub fn mixture_density(&self, t: f64, v: f64) -> f64 {
        self.thetas
            .iter()
            .zip(&self.log_weights)
            .map(|(th, lw)| (lw + log_gaussian_density(v - th * t, t)).exp())
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn kernel(q: f64) -> FilterKernel {
        let m = MarketParams::new(0.02, 0.3, 10.0).unwrap();
        FilterKernel::new(&DiscretePrior::two_point(0.03, 0.09, q).unwrap(), m)
    }

    #[test]
    fn f_at_origin_is_one() {
        assert_relative_eq!(kernel(0.8).f(0.0, 0.0), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn two_term_sum() {
        let k = kernel(0.8);
        let (a, b): (f64, f64) = (1.0 / 30.0, 7.0 / 30.0);
        let direct = 0.2 * (a - 0.5 * a * a * 10.0).exp() + 0.8 * (b - 0.5 * b * b * 10.0).exp();
        assert_relative_eq!(k.f(10.0, 1.0), direct, max_relative = 1e-14);
    }

    #[test]
    fn point_mass_kernel() {
        let m = MarketParams::new(0.02, 0.3, 10.0).unwrap();
        let k = FilterKernel::new(&DiscretePrior::point_mass(0.078), m);
        let th = m.theta_of(0.078);
        assert_relative_eq!(k.f(3.0, 0.4), (th * 0.4 - 0.5 * th * th * 3.0).exp(), max_relative = 1e-14);
        assert_eq!(k.posterior_mean(3.0, 100.0), th);
        let y = 1.3;
        let expected = (-0.2 - 0.5 * th * th * 10.0 - th * (y - th * 10.0)).exp();
        assert_relative_eq!(k.state_price_density(y), expected, max_relative = 1e-13);
    }

    #[test]
    fn derivative_matches_central_difference() {
        let k = kernel(0.8);
        let h = 1e-5;
        for y in [-2.0, 0.0, 0.7, 3.0] {
            let fd = (k.f(10.0, y + h) - k.f(10.0, y - h)) / (2.0 * h);
            assert!((k.f_y(10.0, y) - fd).abs() < 1e-9);
        }
    }

    #[test]
    fn posterior_mean_limits() {
        let k = kernel(0.8);
        assert_relative_eq!(k.posterior_mean(0.0, 0.0), 0.193_333_333_333_333, epsilon = 1e-14);
        assert_relative_eq!(k.posterior_mean(10.0, 1e4), 7.0 / 30.0, epsilon = 1e-15);
        assert_relative_eq!(k.posterior_mean(10.0, -1e4), 1.0 / 30.0, epsilon = 1e-15);
        let post = k.posterior(10.0, 1e3);
        assert!(post.q() > 1.0 - 1e-12);
        let post0 = k.posterior(0.0, 0.0);
        assert_relative_eq!(post0.q(), 0.8, epsilon = 1e-15);
    }

    #[test]
    fn posterior_mean_consistency() {
        let k = kernel(0.3);
        let w = k.posterior_weights(4.0, 0.9);
        let m: f64 = w.iter().zip(k.thetas()).map(|(a, b)| a * b).sum();
        assert!((m - k.posterior_mean(4.0, 0.9)).abs() <= 1e-14);
    }

    #[test]
    fn large_arguments_do_not_overflow() {
        let k = kernel(0.5);
        assert!(k.log_f(10.0, 1e5).is_finite());
        assert!(k.state_price_density(-1e4).is_finite());
    }

    #[test]
    fn mixture_density_matches_product() {
        let k = kernel(0.8);
        for v in [-3.0, 0.0, 2.5] {
            let prod = k.f(10.0, v) * (-(v * v) / 20.0).exp() / (20.0 * std::f64::consts::PI).sqrt();
            assert_relative_eq!(k.mixture_density(10.0, v), prod, max_relative = 1e-13);
        }
    }
}
