//! Martingale-method solution of the filtered (ambiguity-neutral) problem.
//!
//! Under the reference measure the observation `Y` is a standard Brownian
//! motion and the state price at `T` is `e^{-rT}/F(T, Y_T)`. Optimal terminal
//! wealth is the envelope demand evaluated at `κ* ξ_T`, and its time-`t` price
//! is a Gaussian convolution in the observation variable.

use serde::{Deserialize, Serialize};

use crate::envelope::EnvelopeSolution;
use crate::error::{Error, Result, ValidationReport};
use crate::filter::FilterKernel;
use crate::quadrature::{gaussian_density, Integrator, QuadratureSpec};
use crate::roots;

/// Numerical settings for the multiplier search and the Gaussian integrals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverSettings {
    pub quadrature: QuadratureSpec,
    /// Relative budget tolerance `|χ(κ*) − w| / w`.
    pub budget_tol: f64,
    /// Initial multiplier bracket.
    pub kappa_lo: f64,
    pub kappa_hi: f64,
    pub max_doublings: usize,
    pub max_iterations: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            quadrature: QuadratureSpec::default(),
            budget_tol: 1e-10,
            kappa_lo: 1e-8,
            kappa_hi: 1.0,
            max_doublings: 200,
            max_iterations: 200,
        }
    }
}

impl SolverSettings {
    pub fn check(&self) -> Result<(), ValidationReport> {
        let mut report = match self.quadrature.check() {
            Ok(()) => ValidationReport::default(),
            Err(r) => r,
        };
        if !(self.budget_tol > 0.0 && self.budget_tol <= 1e-8) {
            report.push("solver.budget_tol", format!("must lie in (0, 1e-8], got {}", self.budget_tol));
        }
        if !(self.kappa_lo > 0.0 && self.kappa_hi > self.kappa_lo) {
            report.push("solver.kappa_lo", "need 0 < kappa_lo < kappa_hi");
        }
        report.into_result()
    }
}

/// Terminal claim `𝒳(κ e^{-rT} / F(T, v))` as a function of the observation.
#[derive(Debug, Clone)]
struct Claim<'a> {
    env: &'a EnvelopeSolution,
    kernel: &'a FilterKernel,
    /// `log κ − rT`.
    log_scale: f64,
    breakpoints: Vec<f64>,
}

impl<'a> Claim<'a> {
    fn new(kappa: f64, env: &'a EnvelopeSolution, kernel: &'a FilterKernel) -> Result<Self> {
        let breakpoints = breakpoints(kappa, env, kernel)?;
        let m = kernel.market();
        Ok(Self {
            env,
            kernel,
            log_scale: kappa.ln() - m.r * m.horizon,
            breakpoints,
        })
    }

    fn horizon(&self) -> f64 {
        self.kernel.market().horizon
    }

    fn arg(&self, v: f64) -> f64 {
        (self.log_scale - self.kernel.log_f(self.horizon(), v)).exp()
    }

    fn demand(&self, v: f64) -> f64 {
        self.env.optimal_demand(self.arg(v))
    }

    /// Integration window for a Gaussian of variance `s` centred at `y`,
    /// widened towards where the claim grows.
    fn window(&self, s: f64, y: f64, tail: f64) -> (f64, f64) {
        let p = self.env.risk.wealth_elasticity();
        let lo = y + (s * p * self.kernel.theta_min()).min(0.0) - tail * s.sqrt();
        let hi = y + (s * p * self.kernel.theta_max()).max(0.0) + tail * s.sqrt();
        (lo, hi)
    }

    fn surface(&self, q: &Integrator, s: f64, y: f64) -> Result<f64> {
        if s <= 0.0 {
            return Ok(self.demand(y));
        }
        let r = self.kernel.market().r;
        let (lo, hi) = self.window(s, y, q.spec().tail_sd);
        let v = q.integrate(
            |v| self.demand(v) * gaussian_density(v - y, s),
            lo,
            hi,
            &self.breakpoints,
            q.spec().panel_sd * s.sqrt(),
        )?;
        Ok((-r * s).exp() * v)
    }

    fn surface_and_gradient(&self, q: &Integrator, s: f64, y: f64) -> Result<SurfacePoint> {
        let r = self.kernel.market().r;
        let t_end = self.horizon();
        let (lo, hi) = self.window(s, y, q.spec().tail_sd);
        let [value, smooth] = q.integrate_n(
            |v| {
                let a = self.arg(v);
                let phi = gaussian_density(v - y, s);
                let x = self.env.optimal_demand(a);
                let e = self.env.demand_elasticity(a);
                let th = self.kernel.posterior_mean(t_end, v);
                [x * phi, -e * th * phi]
            },
            lo,
            hi,
            &self.breakpoints,
            q.spec().panel_sd * s.sqrt(),
        )?;
        let jump_size = self.env.jump_size();
        let jump: f64 = self
            .breakpoints
            .iter()
            .map(|&b| {
                let sign = if self.kernel.posterior_mean(t_end, b) > 0.0 { 1.0 } else { -1.0 };
                sign * jump_size * gaussian_density(b - y, s)
            })
            .sum();
        let disc = (-r * s).exp();
        Ok(SurfacePoint {
            value: disc * value,
            smooth: disc * smooth,
            jump: disc * jump,
        })
    }
}

/// Wealth surface value together with the two parts of its `y`-gradient.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SurfacePoint {
    pub value: f64,
    /// Integral of the classical derivative of the claim.
    pub smooth: f64,
    /// Contribution of the jumps of the claim at the breakpoints.
    pub jump: f64,
}

impl SurfacePoint {
    pub fn gradient(&self) -> f64 {
        self.smooth + self.jump
    }
}

/// Observation levels `v` at which `κ e^{-rT}/F(T, v) = ŷ`.
///
/// `log F(T, ·)` is convex, so there are at most two such levels, and at most
/// one when all market prices of risk share a sign.
pub fn breakpoints(kappa: f64, env: &EnvelopeSolution, kernel: &FilterKernel) -> Result<Vec<f64>> {
    if !(kappa > 0.0) {
        return Err(Error::domain("kappa", format!("must be > 0, got {kappa}")));
    }
    if env.is_linear() {
        return Ok(Vec::new());
    }
    let m = kernel.market();
    let t = m.horizon;
    let level = kappa.ln() - m.r * t - env.y_hat.ln();
    let g = |v: f64| kernel.log_f(t, v) - level;
    let (th_min, th_max) = (kernel.theta_min(), kernel.theta_max());

    if th_min == th_max && kernel.thetas().len() == 1 {
        let th = th_min;
        if th == 0.0 {
            return Ok(Vec::new());
        }
        return Ok(vec![(level + 0.5 * th * th * t) / th]);
    }
    if th_min == 0.0 && th_max == 0.0 {
        return Ok(Vec::new());
    }

    // Minimiser of the convex function log F(T, ·): where the posterior mean vanishes.
    let v_min = if th_min >= 0.0 {
        f64::NEG_INFINITY
    } else if th_max <= 0.0 {
        f64::INFINITY
    } else {
        let (lo, hi) = expand(|v| kernel.posterior_mean(t, v), 0.0, 1.0)?;
        roots::bisect(|v| kernel.posterior_mean(t, v), lo, hi, 0.0, 0.0, 300, "posterior-mean zero")?
    };

    let mut out = Vec::new();
    // Increasing branch.
    if th_max > 0.0 {
        let start = if v_min.is_finite() { v_min } else { 0.0 };
        if !v_min.is_finite() || g(start) < 0.0 {
            if let Some(root) = monotone_root(&g, start, 1.0, v_min.is_finite())? {
                out.push(root);
            }
        }
    }
    // Decreasing branch.
    if th_min < 0.0 {
        let start = if v_min.is_finite() { v_min } else { 0.0 };
        if !v_min.is_finite() || g(start) < 0.0 {
            if let Some(root) = monotone_root(&g, start, -1.0, v_min.is_finite())? {
                out.push(root);
            }
        }
    }
    out.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(out)
}

/// Root of a monotone function `g` on the half-line from `start` in direction
/// `dir`. When `anchored`, `g(start) < 0` is known and only the far end is
/// searched for; otherwise the search goes both ways.
fn monotone_root<G: Fn(f64) -> f64>(g: &G, start: f64, dir: f64, anchored: bool) -> Result<Option<f64>> {
    let h = |x: f64| g(start + dir * x);
    let (lo, hi) = if anchored {
        let mut step = 1.0;
        let mut found = None;
        for _ in 0..200 {
            if h(step) >= 0.0 {
                found = Some(step);
                break;
            }
            step *= 2.0;
        }
        match found {
            Some(hi) => (0.0, hi),
            None => return Ok(None),
        }
    } else {
        match expand(h, 0.0, 1.0) {
            Ok(b) => b,
            Err(_) => return Ok(None),
        }
    };
    let x = roots::bisect(h, lo, hi, 0.0, 0.0, 300, "breakpoint")?;
    Ok(Some(start + dir * x))
}

/// Grows `[a - step, a + step]` geometrically until the increasing function `f`
/// changes sign across it.
fn expand<F: Fn(f64) -> f64>(f: F, a: f64, step: f64) -> Result<(f64, f64)> {
    let mut lo = a - step;
    let mut hi = a + step;
    for _ in 0..200 {
        let (fl, fh) = (f(lo), f(hi));
        if fl <= 0.0 && fh >= 0.0 {
            return Ok((lo, hi));
        }
        if fl > 0.0 {
            lo -= 2.0 * (hi - lo);
        }
        if fh < 0.0 {
            hi += 2.0 * (hi - lo);
        }
    }
    Err(Error::NoSignChange { what: "bracket expansion", lo, hi })
}

/// Present cost `χ(κ) = e^{-rT} E[𝒳(κ e^{-rT}/F(T, Y_T))]`, `Y_T ~ N(0, T)`.
pub fn budget(kappa: f64, env: &EnvelopeSolution, kernel: &FilterKernel, quad: &Integrator) -> Result<f64> {
    let claim = Claim::new(kappa, env, kernel)?;
    claim.surface(quad, kernel.market().horizon, 0.0)
}

/// Finds `κ*` with `χ(κ*) = w` and returns the solved policy.
pub fn solve_kappa(
    w: f64,
    env: EnvelopeSolution,
    kernel: FilterKernel,
    settings: SolverSettings,
) -> Result<SolvedPolicy> {
    if !(w > 0.0 && w.is_finite()) {
        return Err(Error::domain("initial_wealth", format!("must be > 0, got {w}")));
    }
    let quad = Integrator::new(settings.quadrature);
    let log_w = w.ln();
    let excess = |log_kappa: f64| -> Result<f64> {
        let b = budget(log_kappa.exp(), &env, &kernel, &quad)?;
        Ok(if b > 0.0 { b.ln() - log_w } else { f64::NEG_INFINITY })
    };

    let mut lo = settings.kappa_lo.ln();
    let mut f_lo = excess(lo)?;
    let mut tries = 0;
    while f_lo < 0.0 {
        lo -= std::f64::consts::LN_10 * 2.0;
        f_lo = excess(lo)?;
        tries += 1;
        if tries > settings.max_doublings {
            return Err(Error::NoSignChange {
                what: "budget multiplier",
                lo: lo.exp(),
                hi: settings.kappa_hi,
            });
        }
    }
    let mut hi = settings.kappa_hi.ln();
    let mut f_hi = excess(hi)?;
    let mut doublings = 0;
    while f_hi > 0.0 {
        lo = hi;
        f_lo = f_hi;
        hi += std::f64::consts::LN_2;
        f_hi = excess(hi)?;
        doublings += 1;
        if doublings > settings.max_doublings {
            return Err(Error::NoSignChange {
                what: "budget multiplier",
                lo: lo.exp(),
                hi: hi.exp(),
            });
        }
    }
    // Once κ is large enough that the claim vanishes on the whole window the
    // log-excess is -inf; pull the upper end back to a finite value.
    while !f_hi.is_finite() {
        let mid = 0.5 * (lo + hi);
        let f_mid = excess(mid)?;
        if f_mid > 0.0 {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
            f_hi = f_mid;
        }
        if hi - lo < 1e-14 {
            break;
        }
    }
    let ftol = settings.budget_tol * 0.5;
    let log_kappa = roots::illinois(
        excess,
        lo,
        hi,
        f_lo,
        f_hi,
        1e-15,
        ftol,
        settings.max_iterations,
        "budget multiplier",
    )?;
    let kappa_star = log_kappa.exp();
    SolvedPolicy::with_kappa(kappa_star, w, env, kernel, settings)
}

/// Solution of the filtered problem for one prior and initial wealth.
#[derive(Debug, Clone)]
pub struct SolvedPolicy {
    pub kappa_star: f64,
    pub initial_wealth: f64,
    pub envelope: EnvelopeSolution,
    pub kernel: FilterKernel,
    pub settings: SolverSettings,
    breakpoints: Vec<f64>,
    integrator: Integrator,
}

/// Optimal risky investment at one `(t, y)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Fraction {
    /// `π / W`.
    pub ratio: f64,
    /// Current optimal wealth `𝒴(T − t, y)`.
    pub wealth: f64,
    /// Dollar amount `π` held in the stock.
    pub amount: f64,
}

impl SolvedPolicy {
    /// Builds a policy for a given multiplier without solving the budget.
    pub fn with_kappa(
        kappa: f64,
        w: f64,
        envelope: EnvelopeSolution,
        kernel: FilterKernel,
        settings: SolverSettings,
    ) -> Result<Self> {
        let breakpoints = breakpoints(kappa, &envelope, &kernel)?;
        Ok(Self {
            kappa_star: kappa,
            initial_wealth: w,
            envelope,
            kernel,
            settings,
            breakpoints,
            integrator: Integrator::new(settings.quadrature),
        })
    }

    fn claim(&self) -> Claim<'_> {
        let m = self.kernel.market();
        Claim {
            env: &self.envelope,
            kernel: &self.kernel,
            log_scale: self.kappa_star.ln() - m.r * m.horizon,
            breakpoints: self.breakpoints.clone(),
        }
    }

    pub fn horizon(&self) -> f64 {
        self.kernel.market().horizon
    }

    /// Observation levels where the terminal claim jumps.
    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    /// State-price level `ŷ / κ*` above which terminal wealth is zero.
    pub fn cutoff_xi(&self) -> f64 {
        self.envelope.y_hat / self.kappa_star
    }

    pub fn integrator(&self) -> &Integrator {
        &self.integrator
    }

    /// `χ(κ*)`.
    pub fn budget(&self) -> Result<f64> {
        self.claim().surface(&self.integrator, self.horizon(), 0.0)
    }

    /// `W*_T = 𝒳(κ* ξ)`.
    pub fn terminal_wealth(&self, xi: f64) -> f64 {
        self.envelope.optimal_demand(self.kappa_star * xi)
    }

    /// Terminal wealth as a function of the terminal observation.
    pub fn terminal_wealth_at(&self, y_t: f64) -> f64 {
        self.claim().demand(y_t)
    }

    /// `𝒴(s, y)`: optimal wealth with `s` years left at observation level `y`.
    pub fn wealth_surface(&self, s: f64, y: f64) -> Result<f64> {
        self.check_s(s)?;
        self.claim().surface(&self.integrator, s, y)
    }

    /// Wealth surface with the smooth and jump parts of its gradient.
    pub fn surface_point(&self, s: f64, y: f64) -> Result<SurfacePoint> {
        self.check_s(s)?;
        if s <= 0.0 {
            return Err(Error::domain("s", "gradient needs s > 0"));
        }
        self.claim().surface_and_gradient(&self.integrator, s, y)
    }

    /// `∂𝒴/∂y (s, y)`, including the jump contributions.
    pub fn grad_wealth_surface(&self, s: f64, y: f64) -> Result<f64> {
        Ok(self.surface_point(s, y)?.gradient())
    }

    /// `(𝒴, ∂𝒴/∂y, ∂²𝒴/∂y²)` at `(s, y)`. The second derivative is taken
    /// through the Gaussian kernel.
    pub fn surface_derivatives(&self, s: f64, y: f64) -> Result<[f64; 3]> {
        self.check_s(s)?;
        if s <= 0.0 {
            return Err(Error::domain("s", "derivatives need s > 0"));
        }
        let claim = self.claim();
        let q = &self.integrator;
        let t_end = self.horizon();
        let (lo, hi) = claim.window(s, y, q.spec().tail_sd);
        let [value, smooth, curv] = q.integrate_n(
            |v| {
                let a = claim.arg(v);
                let phi = gaussian_density(v - y, s);
                let x = self.envelope.optimal_demand(a);
                let e = self.envelope.demand_elasticity(a);
                let th = self.kernel.posterior_mean(t_end, v);
                let d = v - y;
                [x * phi, -e * th * phi, x * phi * (d * d / (s * s) - 1.0 / s)]
            },
            lo,
            hi,
            &claim.breakpoints,
            q.spec().panel_sd * s.sqrt(),
        )?;
        let jump_size = self.envelope.jump_size();
        let jump: f64 = claim
            .breakpoints
            .iter()
            .map(|&b| {
                let sign = if self.kernel.posterior_mean(t_end, b) > 0.0 { 1.0 } else { -1.0 };
                sign * jump_size * gaussian_density(b - y, s)
            })
            .sum();
        let disc = (-self.kernel.market().r * s).exp();
        Ok([disc * value, disc * (smooth + jump), disc * curv])
    }

    /// Gradient by differentiating the Gaussian kernel instead of the claim:
    /// `e^{-rs} ∫ 𝒳 φ_s(v − y) (v − y)/s dv`. Independent of the jump handling.
    pub fn grad_wealth_surface_kernel(&self, s: f64, y: f64) -> Result<f64> {
        self.check_s(s)?;
        if s <= 0.0 {
            return Err(Error::domain("s", "gradient needs s > 0"));
        }
        let claim = self.claim();
        let q = &self.integrator;
        let (lo, hi) = claim.window(s, y, q.spec().tail_sd);
        let v = q.integrate(
            |v| claim.demand(v) * gaussian_density(v - y, s) * (v - y) / s,
            lo,
            hi,
            &claim.breakpoints,
            q.spec().panel_sd * s.sqrt(),
        )?;
        Ok((-self.kernel.market().r * s).exp() * v)
    }

    /// `π*/W* = ∂𝒴/∂y / (σ 𝒴)` at time `t` and observation `y`.
    pub fn optimal_fraction(&self, t: f64, y: f64) -> Result<Fraction> {
        let s = self.horizon() - t;
        if !(s > 0.0) || t < 0.0 {
            return Err(Error::domain("t", format!("must lie in [0, T), got {t}")));
        }
        let p = self.surface_point(s, y)?;
        self.fraction_from(p)
    }

    pub(crate) fn fraction_from(&self, p: SurfacePoint) -> Result<Fraction> {
        if !(p.value >= 1e-12 * self.initial_wealth) {
            return Err(Error::ZeroWealth { wealth: p.value });
        }
        let ratio = p.gradient() / (self.kernel.market().sigma * p.value);
        Ok(Fraction {
            ratio,
            wealth: p.value,
            amount: ratio * p.value,
        })
    }

    /// Expected payoff utility under the prior:
    /// `V = ∫ F(T, v) u(g(𝒳(κ* e^{-rT}/F(T, v)))) φ_T(v) dv`.
    pub fn value_function(&self) -> Result<f64> {
        let claim = self.claim();
        let q = &self.integrator;
        let t = self.horizon();
        let env = &self.envelope;
        let p = env.risk.wealth_elasticity();
        let stretch = 1.0 + env.risk.alpha.abs() * p;
        let tail = q.spec().tail_sd * t.sqrt();
        let lo = (t * self.kernel.theta_min() * stretch).min(0.0).min(t * self.kernel.theta_min()) - tail;
        let hi = (t * self.kernel.theta_max() * stretch).max(0.0).max(t * self.kernel.theta_max()) + tail;
        q.integrate(
            |v| env.payoff_utility(claim.demand(v)) * self.kernel.mixture_density(t, v),
            lo,
            hi,
            &claim.breakpoints,
            q.spec().panel_sd * t.sqrt(),
        )
    }

    fn check_s(&self, s: f64) -> Result<()> {
        if !(s >= 0.0 && s <= self.horizon() * (1.0 + 1e-12)) {
            return Err(Error::domain("s", format!("must lie in [0, T], got {s}")));
        }
        Ok(())
    }
}
