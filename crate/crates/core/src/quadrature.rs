//! Adaptive composite Gauss-Legendre quadrature for piecewise-smooth integrands.
//!
//! The integrands in this crate are Gaussian-weighted and smooth except at a
//! handful of known jump locations. Splitting the domain at those locations and
//! refining each panel adaptively restores the spectral accuracy of the
//! Gauss-Legendre rule.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, ValidationReport};

/// Quadrature settings shared by every Gaussian integral in the solver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QuadratureSpec {
    /// Gauss-Legendre nodes per panel.
    pub nodes: usize,
    /// Half-width of the integration window in standard deviations.
    pub tail_sd: f64,
    /// Initial panel width in standard deviations.
    pub panel_sd: f64,
    /// Split panels at the jump locations of the integrand.
    pub split_at_breakpoints: bool,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_depth: usize,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            nodes: 32,
            tail_sd: 10.0,
            panel_sd: 2.0,
            split_at_breakpoints: true,
            rel_tol: 1e-12,
            abs_tol: 1e-15,
            max_depth: 40,
        }
    }
}

impl QuadratureSpec {
    pub fn check(&self) -> Result<(), ValidationReport> {
        let mut report = ValidationReport::default();
        if self.nodes < 32 {
            report.push("solver.quadrature.nodes", format!("must be >= 32, got {}", self.nodes));
        }
        if !(self.tail_sd >= 8.0) {
            report.push(
                "solver.quadrature.tail_sd",
                format!("must be >= 8 standard deviations, got {}", self.tail_sd),
            );
        }
        if !(self.panel_sd > 0.0) {
            report.push("solver.quadrature.panel_sd", "must be > 0");
        }
        if !(self.rel_tol > 0.0) || !(self.abs_tol > 0.0) {
            report.push("solver.quadrature", "tolerances must be > 0");
        }
        report.into_result()
    }
}

/// Nodes and weights of an `n`-point Gauss-Legendre rule on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1);
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        let nf = n as f64;
        for i in 0..m {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    fn apply<const N: usize, F: Fn(f64) -> [f64; N]>(&self, f: &F, a: f64, b: f64) -> [f64; N] {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let mut acc = [0.0; N];
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            let v = f(mid + half * x);
            for k in 0..N {
                acc[k] += w * v[k];
            }
        }
        acc.map(|s| s * half)
    }
}

/// Value and derivative of the Legendre polynomial `P_n` at `x`.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for j in 2..=n {
        let jf = j as f64;
        let p2 = ((2.0 * jf - 1.0) * x * p1 - (jf - 1.0) * p0) / jf;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Adaptive piecewise integrator built from a [`QuadratureSpec`].
#[derive(Debug, Clone)]
pub struct Integrator {
    rule: Arc<GaussLegendre>,
    spec: QuadratureSpec,
}

impl Integrator {
    pub fn new(spec: QuadratureSpec) -> Self {
        Self {
            rule: Arc::new(GaussLegendre::new(spec.nodes)),
            spec,
        }
    }

    pub fn spec(&self) -> &QuadratureSpec {
        &self.spec
    }

    pub fn integrate<F: Fn(f64) -> f64>(
        &self,
        f: F,
        lo: f64,
        hi: f64,
        breakpoints: &[f64],
        panel_width: f64,
    ) -> Result<f64> {
        let [v] = self.integrate_n(|x| [f(x)], lo, hi, breakpoints, panel_width)?;
        Ok(v)
    }

    /// Integrates a vector-valued integrand over `[lo, hi]`, splitting at every
    /// breakpoint inside the interval and at a regular panel grid.
    pub fn integrate_n<const N: usize, F: Fn(f64) -> [f64; N]>(
        &self,
        f: F,
        lo: f64,
        hi: f64,
        breakpoints: &[f64],
        panel_width: f64,
    ) -> Result<[f64; N]> {
        if !(hi > lo) {
            return Ok([0.0; N]);
        }
        let mut cuts = vec![lo, hi];
        if self.spec.split_at_breakpoints {
            cuts.extend(breakpoints.iter().copied().filter(|b| *b > lo && *b < hi));
        }
        cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        cuts.dedup();

        let mut panels = Vec::new();
        for w in cuts.windows(2) {
            let (a, b) = (w[0], w[1]);
            let n = if panel_width > 0.0 {
                ((b - a) / panel_width).ceil().max(1.0) as usize
            } else {
                1
            };
            let step = (b - a) / n as f64;
            for i in 0..n {
                let pa = a + step * i as f64;
                let pb = if i + 1 == n { b } else { pa + step };
                panels.push((pa, pb));
            }
        }

        let estimates: Vec<[f64; N]> = panels
            .iter()
            .map(|&(a, b)| self.rule.apply(&f, a, b))
            .collect();
        let mut scale = [0.0f64; N];
        for e in &estimates {
            for k in 0..N {
                scale[k] += e[k].abs();
            }
        }
        let total_len = hi - lo;
        let mut result = [0.0; N];
        let mut stack: Vec<(f64, f64, [f64; N], usize)> = panels
            .into_iter()
            .zip(estimates)
            .map(|((a, b), e)| (a, b, e, 0))
            .collect();
        while let Some((a, b, coarse, depth)) = stack.pop() {
            let m = 0.5 * (a + b);
            let left = self.rule.apply(&f, a, m);
            let right = self.rule.apply(&f, m, b);
            let frac = (b - a) / total_len;
            let mut ok = true;
            for k in 0..N {
                let fine = left[k] + right[k];
                let tol = (self.spec.abs_tol).max(self.spec.rel_tol * scale[k]) * frac.max(1e-3);
                if !fine.is_finite() || (fine - coarse[k]).abs() > tol {
                    ok = false;
                }
            }
            if ok {
                for k in 0..N {
                    result[k] += left[k] + right[k];
                }
            } else if depth >= self.spec.max_depth || (b - a) <= 4.0 * f64::EPSILON * m.abs().max(1.0) {
                if left.iter().chain(&right).all(|v| v.is_finite()) {
                    // Converged to rounding level; accept the fine estimate.
                    for k in 0..N {
                        result[k] += left[k] + right[k];
                    }
                } else {
                    return Err(Error::Quadrature { lo: a, hi: b });
                }
            } else {
                stack.push((a, m, left, depth + 1));
                stack.push((m, b, right, depth + 1));
            }
        }
        Ok(result)
    }
}

/// Density of `N(0, var)` at `x`.
pub fn gaussian_density(x: f64, var: f64) -> f64 {
    (-0.5 * x * x / var).exp() / (2.0 * std::f64::consts::PI * var).sqrt()
}

/// Log-density of `N(0, var)` at `x`.
pub fn log_gaussian_density(x: f64, var: f64) -> f64 {
    -0.5 * x * x / var - 0.5 * (2.0 * std::f64::consts::PI * var).ln()
}
