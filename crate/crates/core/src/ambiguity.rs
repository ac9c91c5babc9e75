//! Penalty functionals of the robust representation and the outer
//! minimisation over equivalent priors.
//!
//! The filtered value `V(w; Q)` depends on the candidate prior only, not on the
//! aggregator parameter, so one [`WorstCaseSearch`] memoises it across a whole
//! sweep of ambiguity levels.

use dashmap::DashMap;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::Problem;
use crate::envelope::EnvelopeSolution;
use crate::error::{Error, Result, ValidationReport};
use crate::model::{AmbiguitySpec, DiscretePrior};
use crate::optimize::{golden_section, nelder_mead};
use crate::solver::SolvedPolicy;

/// Largest log-magnitude accepted for a multiplicative penalty factor.
const MAX_LOG_FACTOR: f64 = 700.0;

/// Settings of the outer search over priors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OuterSettings {
    /// Interior clamp: every atom keeps at least this much mass.
    pub eps: f64,
    pub grid_step: f64,
    /// Golden-section stopping width.
    pub refine_width: f64,
    /// Memo key resolution in `q`.
    pub memo_resolution: f64,
    pub simplex_tol: f64,
    pub simplex_max_evals: usize,
}

impl Default for OuterSettings {
    fn default() -> Self {
        Self {
            eps: 1e-4,
            grid_step: 0.01,
            refine_width: 1e-5,
            memo_resolution: 1e-6,
            simplex_tol: 1e-10,
            simplex_max_evals: 2000,
        }
    }
}

impl OuterSettings {
    pub fn check(&self) -> Result<(), ValidationReport> {
        let mut r = ValidationReport::default();
        if !(self.eps > 0.0 && self.eps < 0.1) {
            r.push("optimizer.eps", format!("must lie in (0, 0.1), got {}", self.eps));
        }
        if !(self.grid_step > 0.0 && self.grid_step <= 0.25) {
            r.push("optimizer.grid_step", format!("must lie in (0, 0.25], got {}", self.grid_step));
        }
        if !(self.refine_width > 0.0) || !(self.memo_resolution > 0.0) {
            r.push("optimizer", "refine_width and memo_resolution must be > 0");
        }
        r.into_result()
    }
}

/// Per-atom likelihood ratios `q_i / p_i`.
pub fn rn_derivative(q: &DiscretePrior, p: &DiscretePrior) -> Result<Vec<f64>> {
    if !q.same_support(p) {
        return Err(Error::SupportMismatch(format!(
            "atoms {:?} vs {:?}",
            q.atoms(),
            p.atoms()
        )));
    }
    q.probs()
        .iter()
        .zip(p.probs())
        .map(|(&qi, &pi)| {
            if qi > 0.0 && pi > 0.0 {
                Ok(qi / pi)
            } else {
                Err(Error::SupportMismatch(format!("zero weight ({qi} vs {pi})")))
            }
        })
        .collect()
}

/// `log (E^P[(dQ/dP)^{λ/(λ−1)}])^{(1−λ)/λ}`.
pub fn log_penalty_power(q: &DiscretePrior, p: &DiscretePrior, lambda: f64) -> Result<f64> {
    if !(lambda < 1.0 && lambda != 0.0) {
        return Err(Error::domain("lambda", format!("must satisfy lambda < 1, lambda != 0, got {lambda}")));
    }
    let ratios = rn_derivative(q, p)?;
    let e = lambda / (lambda - 1.0);
    let terms: Vec<f64> = ratios
        .iter()
        .zip(p.probs())
        .map(|(r, pi)| pi.ln() + e * r.ln())
        .collect();
    let m = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let log_moment = m + terms.iter().map(|t| (t - m).exp()).sum::<f64>().ln();
    let out = (1.0 - lambda) / lambda * log_moment;
    if !out.is_finite() || out.abs() > MAX_LOG_FACTOR {
        return Err(Error::PenaltyOverflow(out));
    }
    Ok(out)
}

/// Multiplicative power-aggregator penalty; equals 1 at `Q = P`.
pub fn penalty_power(q: &DiscretePrior, p: &DiscretePrior, lambda: f64) -> Result<f64> {
    Ok(log_penalty_power(q, p, lambda)?.exp())
}

/// Additive exponential-aggregator penalty `(1/γ) KL(Q ‖ P)`.
pub fn penalty_kl(q: &DiscretePrior, p: &DiscretePrior, gamma: f64) -> Result<f64> {
    if !(gamma > 0.0) {
        return Err(Error::domain("gamma", format!("must be > 0, got {gamma}")));
    }
    let ratios = rn_derivative(q, p)?;
    let kl: f64 = ratios
        .iter()
        .zip(q.probs())
        .map(|(r, qi)| if *qi == 0.0 { 0.0 } else { qi * r.ln() })
        .sum();
    Ok(kl.max(0.0) / gamma)
}

/// Multiplicative log-aggregator penalty `exp(−E^P[log dQ/dP])`.
pub fn penalty_log_factor(q: &DiscretePrior, p: &DiscretePrior) -> Result<f64> {
    let ratios = rn_derivative(q, p)?;
    let e: f64 = ratios.iter().zip(p.probs()).map(|(r, pi)| pi * r.ln()).sum();
    Ok((-e).exp())
}

/// Objective of the outer problem at one candidate prior.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PenaltyEvaluation {
    pub objective: f64,
    /// Multiplicative factor (power, log), additive term (exponential) or 1 (neutral).
    pub penalty: f64,
    /// `V(w; Q)`.
    pub value: f64,
    pub weights: Vec<f64>,
}

/// Combines a value and a penalty according to the aggregator.
pub fn combine(spec: &AmbiguitySpec, q: &DiscretePrior, p: &DiscretePrior, value: f64) -> Result<PenaltyEvaluation> {
    let (objective, penalty) = match *spec {
        AmbiguitySpec::Neutral => (value, 1.0),
        AmbiguitySpec::Power { lambda } => {
            let f = penalty_power(q, p, lambda)?;
            (value.max(0.0) * f, f)
        }
        AmbiguitySpec::Exponential { gamma } => {
            let k = penalty_kl(q, p, gamma)?;
            (value + k, k)
        }
        AmbiguitySpec::Log => {
            let f = penalty_log_factor(q, p)?;
            (value.max(0.0) * f, f)
        }
    };
    Ok(PenaltyEvaluation {
        objective,
        penalty,
        value,
        weights: q.probs().to_vec(),
    })
}

/// Diagnostics of one outer minimisation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchDiagnostics {
    /// Objective evaluations requested (memo hits included).
    pub evaluations: usize,
    /// Coarse grid `(q, objective)`; failed points are omitted.
    pub grid: Vec<(f64, f64)>,
    pub grid_argmin: f64,
    /// Interval handed to the refinement.
    pub bracket: (f64, f64),
}

#[derive(Debug, Clone)]
pub struct WorstCaseResult {
    /// Probability of the largest atom under `Q*`.
    pub q_star: f64,
    pub prior: DiscretePrior,
    pub evaluation: PenaltyEvaluation,
    pub policy: SolvedPolicy,
    pub diagnostics: SearchDiagnostics,
}

/// Outer minimiser over priors equivalent to the reference prior of a problem.
pub struct WorstCaseSearch {
    problem: Problem,
    env: EnvelopeSolution,
    memo: DashMap<Vec<i64>, f64>,
}

impl WorstCaseSearch {
    pub fn new(problem: Problem) -> Result<Self> {
        let env = problem.envelope()?;
        Ok(Self {
            problem,
            env,
            memo: DashMap::new(),
        })
    }

    pub fn problem(&self) -> &Problem {
        &self.problem
    }

    pub fn memo_len(&self) -> usize {
        self.memo.len()
    }

    fn key(&self, weights: &[f64]) -> Vec<i64> {
        let res = self.problem.optimizer.memo_resolution;
        weights.iter().map(|w| (w / res).round() as i64).collect()
    }

    /// Two-point prior with `q` snapped to the memo grid.
    fn snapped_two_point(&self, q: f64) -> Result<DiscretePrior> {
        let res = self.problem.optimizer.memo_resolution;
        let q = ((q / res).round() * res).clamp(self.problem.optimizer.eps, 1.0 - self.problem.optimizer.eps);
        DiscretePrior::new(self.problem.prior.atoms().to_vec(), vec![1.0 - q, q])
    }

    /// `V(w; Q)` with memoisation.
    pub fn value(&self, q: &DiscretePrior) -> Result<f64> {
        let key = self.key(q.probs());
        if let Some(v) = self.memo.get(&key) {
            return Ok(*v);
        }
        let v = self.problem.solve_with(self.env, q)?.value_function()?;
        self.memo.insert(key, v);
        Ok(v)
    }

    pub fn objective(&self, q: &DiscretePrior, spec: &AmbiguitySpec) -> Result<PenaltyEvaluation> {
        let v = self.value(q)?;
        combine(spec, q, &self.problem.prior, v)
    }

    /// Objective for a two-point candidate `q`.
    pub fn objective_q(&self, q: f64, spec: &AmbiguitySpec) -> Result<PenaltyEvaluation> {
        self.objective(&self.snapped_two_point(q)?, spec)
    }

    /// Minimises the objective over equivalent priors.
    pub fn worst_case_prior(&self, spec: &AmbiguitySpec) -> Result<WorstCaseResult> {
        let p = &self.problem.prior;
        if matches!(spec, AmbiguitySpec::Neutral) || p.is_point_mass() {
            let evaluation = self.objective(p, spec)?;
            let policy = self.problem.solve_with(self.env, p)?;
            return Ok(WorstCaseResult {
                q_star: p.q(),
                prior: p.clone(),
                evaluation,
                policy,
                diagnostics: SearchDiagnostics {
                    evaluations: 1,
                    grid: Vec::new(),
                    grid_argmin: p.q(),
                    bracket: (p.q(), p.q()),
                },
            });
        }
        if p.len() == 2 {
            self.search_two_point(spec)
        } else {
            self.search_simplex(spec)
        }
    }

    fn search_two_point(&self, spec: &AmbiguitySpec) -> Result<WorstCaseResult> {
        let o = self.problem.optimizer;
        let mut grid = vec![o.eps];
        let n = (1.0 / o.grid_step).round() as usize;
        grid.extend((1..n).map(|k| k as f64 * o.grid_step));
        grid.push(1.0 - o.eps);
        grid.push(self.problem.prior.q());
        grid.sort_by(|a, b| a.partial_cmp(b).unwrap());
        grid.dedup_by(|a, b| (*a - *b).abs() < o.memo_resolution);

        let values: Vec<Option<f64>> = grid
            .par_iter()
            .map(|&q| self.objective_q(q, spec).ok().map(|e| e.objective))
            .collect();
        let mut evaluations = grid.len();
        let table: Vec<(f64, f64)> = grid
            .iter()
            .zip(&values)
            .filter_map(|(q, v)| v.filter(|x| x.is_finite()).map(|v| (*q, v)))
            .collect();
        let (k_best, _) = grid
            .iter()
            .zip(&values)
            .enumerate()
            .filter_map(|(i, (_, v))| v.filter(|x| x.is_finite()).map(|v| (i, v)))
            .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
            .ok_or(Error::AllEvaluationsFailed)?;
        let grid_argmin = grid[k_best];
        let lo = grid[k_best.saturating_sub(1)];
        let hi = grid[(k_best + 1).min(grid.len() - 1)];

        let (mut q_star, mut best, evals) = golden_section(
            |q| {
                self.objective_q(q, spec)
                    .map(|e| e.objective)
                    .unwrap_or(f64::INFINITY)
            },
            lo,
            hi,
            o.refine_width,
        );
        evaluations += evals;
        let grid_best = values[k_best].unwrap();
        if grid_best < best {
            q_star = grid_argmin;
            best = grid_best;
        }
        let _ = best;
        let prior = self.snapped_two_point(q_star)?;
        let evaluation = self.objective(&prior, spec)?;
        let policy = self.problem.solve_with(self.env, &prior)?;
        Ok(WorstCaseResult {
            q_star: prior.q(),
            prior,
            evaluation,
            policy,
            diagnostics: SearchDiagnostics {
                evaluations,
                grid: table,
                grid_argmin,
                bracket: (lo, hi),
            },
        })
    }

    /// Maps unconstrained coordinates to interior weights with every atom at
    /// least `eps`.
    fn simplex_point(&self, x: &[f64]) -> Vec<f64> {
        let eps = self.problem.optimizer.eps;
        let n = x.len() + 1;
        let mut logits = x.to_vec();
        logits.push(0.0);
        let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let e: Vec<f64> = logits.iter().map(|l| (l - m).exp()).collect();
        let s: f64 = e.iter().sum();
        e.iter().map(|v| eps + (1.0 - n as f64 * eps) * v / s).collect()
    }

    fn search_simplex(&self, spec: &AmbiguitySpec) -> Result<WorstCaseResult> {
        let o = self.problem.optimizer;
        let p = &self.problem.prior;
        let n = p.len();
        let eps = o.eps;
        let logits = |w: &[f64]| -> Vec<f64> {
            let last = ((w[n - 1] - eps).max(1e-300)).ln();
            w[..n - 1].iter().map(|wi| ((wi - eps).max(1e-300)).ln() - last).collect()
        };
        let mut starts = vec![p.probs().to_vec()];
        for i in 0..n {
            for tau in [0.5, 0.9] {
                let w: Vec<f64> = p
                    .probs()
                    .iter()
                    .enumerate()
                    .map(|(j, pj)| (1.0 - tau) * pj + if i == j { tau } else { 0.0 })
                    .collect();
                starts.push(w);
            }
        }
        let eval = |w: &[f64]| -> f64 {
            let res = o.memo_resolution;
            let mut w: Vec<f64> = w.iter().map(|v| (v / res).round() * res).collect();
            let s: f64 = w.iter().sum();
            w.iter_mut().for_each(|v| *v /= s);
            p.reweighted(w)
                .and_then(|q| self.objective(&q, spec))
                .map(|e| e.objective)
                .unwrap_or(f64::INFINITY)
        };
        let grid: Vec<(Vec<f64>, f64)> = starts
            .into_par_iter()
            .map(|w| {
                let w = self.simplex_point(&logits(&w));
                let v = eval(&w);
                (w, v)
            })
            .collect();
        let mut evaluations = grid.len();
        let (start, _) = grid
            .iter()
            .filter(|(_, v)| v.is_finite())
            .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
            .ok_or(Error::AllEvaluationsFailed)?;
        let res = nelder_mead(
            |x| eval(&self.simplex_point(x)),
            &logits(start),
            0.5,
            o.simplex_tol,
            o.simplex_max_evals,
        );
        evaluations += res.evaluations;
        let w = self.simplex_point(&res.x);
        let rounded: Vec<f64> = w.iter().map(|v| (v / o.memo_resolution).round() * o.memo_resolution).collect();
        let s: f64 = rounded.iter().sum();
        let prior = p.reweighted(rounded.iter().map(|v| v / s).collect())?;
        let evaluation = self.objective(&prior, spec)?;
        let policy = self.problem.solve_with(self.env, &prior)?;
        Ok(WorstCaseResult {
            q_star: prior.q(),
            prior,
            evaluation,
            policy,
            diagnostics: SearchDiagnostics {
                evaluations,
                grid: grid.iter().map(|(w, v)| (*w.last().unwrap(), *v)).collect(),
                grid_argmin: *start.last().unwrap(),
                bracket: (eps, 1.0 - eps),
            },
        })
    }
}

/// One-shot convenience wrapper around [`WorstCaseSearch`].
pub fn worst_case_prior(spec: &AmbiguitySpec, problem: &Problem) -> Result<WorstCaseResult> {
    WorstCaseSearch::new(problem.clone())?.worst_case_prior(spec)
}
