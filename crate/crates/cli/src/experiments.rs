//! Sweeps, tables and curve datasets.

use ambiport_core::sim::{
    budget_check, filter_consistency, supermartingale_check, terminal_gap, BudgetReport, Estimate, FilterReport,
    SupermartingaleReport,
};
use ambiport_core::{
    simulate, worst_case_prior, AmbiguitySpec, PathBundle, Problem, SimSettings, SolvedPolicy, WorstCaseSearch,
};
use rayon::prelude::*;
use serde::Serialize;

use crate::output::{fmt_num, Rows};
use crate::CliError;

type Result<T> = std::result::Result<T, CliError>;

/// Copy of `problem` with its aggregator replaced, revalidated.
pub fn with_ambiguity(problem: &Problem, spec: AmbiguitySpec) -> Result<Problem> {
    let mut c = problem.to_config();
    c.ambiguity = spec;
    Ok(c.validate()?)
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveSummary {
    pub ambiguity: String,
    pub q_star: f64,
    pub weights: Vec<f64>,
    pub kappa_star: f64,
    pub y_hat: f64,
    pub cutoff_xi: f64,
    pub value: f64,
    pub objective: f64,
    /// `π/W` at `t = 0`, `y = 0`.
    pub ratio: f64,
}

pub fn solve(problem: &Problem) -> Result<SolveSummary> {
    let r = worst_case_prior(&problem.ambiguity, problem)?;
    let f = r.policy.optimal_fraction(0.0, 0.0)?;
    Ok(SolveSummary {
        ambiguity: problem.ambiguity.label(),
        q_star: r.q_star,
        weights: r.prior.probs().to_vec(),
        kappa_star: r.policy.kappa_star,
        y_hat: r.policy.envelope.y_hat,
        cutoff_xi: r.policy.cutoff_xi(),
        value: r.evaluation.value,
        objective: r.evaluation.objective,
        ratio: f.ratio,
    })
}

impl Rows for SolveSummary {
    fn columns(&self) -> Vec<&'static str> {
        vec!["ambiguity", "q_star", "weights", "kappa_star", "y_hat", "cutoff_xi", "value", "objective", "ratio"]
    }

    fn records(&self) -> Vec<Vec<String>> {
        let w: Vec<String> = self.weights.iter().map(|x| fmt_num(*x)).collect();
        vec![vec![
            self.ambiguity.clone(),
            fmt_num(self.q_star),
            w.join(" "),
            fmt_num(self.kappa_star),
            fmt_num(self.y_hat),
            fmt_num(self.cutoff_xi),
            fmt_num(self.value),
            fmt_num(self.objective),
            fmt_num(self.ratio),
        ]]
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct RaaRow {
    pub raa: f64,
    pub lambda: f64,
    pub q_star: f64,
    pub objective: f64,
}

/// Worst-case `q*` under the power aggregator for each RAA level.
pub fn table_raa(problem: &Problem, levels: &[f64]) -> Result<Vec<RaaRow>> {
    let specs: Vec<AmbiguitySpec> = levels.iter().map(|&a| AmbiguitySpec::power_from_raa(a)).collect();
    for s in &specs {
        with_ambiguity(problem, *s)?;
    }
    let search = WorstCaseSearch::new(problem.clone())?;
    specs
        .par_iter()
        .zip(levels)
        .map(|(spec, &raa)| {
            let r = search.worst_case_prior(spec)?;
            Ok(RaaRow {
                raa,
                lambda: 1.0 - raa,
                q_star: r.q_star,
                objective: r.evaluation.objective,
            })
        })
        .collect()
}

impl Rows for Vec<RaaRow> {
    fn columns(&self) -> Vec<&'static str> {
        vec!["raa", "lambda", "q_star", "objective"]
    }

    fn records(&self) -> Vec<Vec<String>> {
        self.iter()
            .map(|r| vec![fmt_num(r.raa), fmt_num(r.lambda), fmt_num(r.q_star), fmt_num(r.objective)])
            .collect()
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct AaaRow {
    pub gamma: f64,
    pub q_star: f64,
    pub objective: f64,
}

/// Worst-case `q*` under the exponential aggregator for each AAA level.
pub fn table_aaa(problem: &Problem, levels: &[f64]) -> Result<Vec<AaaRow>> {
    let specs: Vec<AmbiguitySpec> = levels.iter().map(|&gamma| AmbiguitySpec::Exponential { gamma }).collect();
    for s in &specs {
        with_ambiguity(problem, *s)?;
    }
    let search = WorstCaseSearch::new(problem.clone())?;
    specs
        .par_iter()
        .zip(levels)
        .map(|(spec, &gamma)| {
            let r = search.worst_case_prior(spec)?;
            Ok(AaaRow {
                gamma,
                q_star: r.q_star,
                objective: r.evaluation.objective,
            })
        })
        .collect()
}

impl Rows for Vec<AaaRow> {
    fn columns(&self) -> Vec<&'static str> {
        vec!["gamma", "q_star", "objective"]
    }

    fn records(&self) -> Vec<Vec<String>> {
        self.iter()
            .map(|r| vec![fmt_num(r.gamma), fmt_num(r.q_star), fmt_num(r.objective)])
            .collect()
    }
}

/// Low and high levels of the three factors.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct FactorialLevels {
    /// Reference probability of the high-drift atom.
    pub prior_q: [f64; 2],
    pub rra: [f64; 2],
    pub raa: [f64; 2],
}

impl Default for FactorialLevels {
    fn default() -> Self {
        Self {
            prior_q: [0.5, 0.8],
            rra: [0.3, 0.5],
            raa: [0.01, 0.3],
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FactorialRun {
    /// Level codes, e.g. `HLL` for high A, low B, low C.
    pub label: String,
    pub x: [i8; 3],
    pub prior_q: f64,
    pub rra: f64,
    pub raa: f64,
    pub q_star: f64,
}

/// Differences of conditional means over the signed design columns.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Effects {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub ab: f64,
    pub ac: f64,
    pub bc: f64,
    pub abc: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Factorial {
    pub runs: Vec<FactorialRun>,
    pub effects: Effects,
}

/// Signs in standard order: A alternates fastest.
fn design() -> Vec<[i8; 3]> {
    (0..8)
        .map(|i| {
            let s = |bit: usize| if i >> bit & 1 == 1 { 1 } else { -1 };
            [s(0), s(1), s(2)]
        })
        .collect()
}

pub fn effects(runs: &[FactorialRun]) -> Effects {
    let contrast = |sign: &dyn Fn(&[i8; 3]) -> i8| {
        let (mut hi, mut lo) = (Vec::new(), Vec::new());
        for r in runs {
            if sign(&r.x) > 0 {
                hi.push(r.q_star);
            } else {
                lo.push(r.q_star);
            }
        }
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        mean(&hi) - mean(&lo)
    };
    Effects {
        a: contrast(&|x| x[0]),
        b: contrast(&|x| x[1]),
        c: contrast(&|x| x[2]),
        ab: contrast(&|x| x[0] * x[1]),
        ac: contrast(&|x| x[0] * x[2]),
        bc: contrast(&|x| x[1] * x[2]),
        abc: contrast(&|x| x[0] * x[1] * x[2]),
    }
}

/// Full 2^3 design over prior optimism, risk aversion and ambiguity aversion.
/// Requires a two-atom prior; the power aggregator is used throughout.
pub fn factorial(problem: &Problem, levels: &FactorialLevels) -> Result<Factorial> {
    if problem.prior.len() != 2 {
        return Err(CliError::Config("factorial requires a two-atom prior".into()));
    }
    let problems: Vec<(String, [i8; 3], f64, f64, f64, Problem)> = design()
        .into_iter()
        .map(|x| {
            let pick = |l: &[f64; 2], s: i8| if s > 0 { l[1] } else { l[0] };
            let (q, rra, raa) = (pick(&levels.prior_q, x[0]), pick(&levels.rra, x[1]), pick(&levels.raa, x[2]));
            let mut c = problem.to_config();
            c.prior.probs = vec![1.0 - q, q];
            c.risk.alpha = 1.0 - rra;
            c.ambiguity = AmbiguitySpec::power_from_raa(raa);
            let label: String = x.iter().map(|s| if *s > 0 { 'H' } else { 'L' }).collect();
            Ok((label, x, q, rra, raa, c.validate()?))
        })
        .collect::<Result<_>>()?;
    let runs: Vec<FactorialRun> = problems
        .par_iter()
        .map(|(label, x, q, rra, raa, p)| {
            let r = worst_case_prior(&p.ambiguity, p)?;
            Ok(FactorialRun {
                label: label.clone(),
                x: *x,
                prior_q: *q,
                rra: *rra,
                raa: *raa,
                q_star: r.q_star,
            })
        })
        .collect::<Result<_>>()?;
    let effects = effects(&runs);
    Ok(Factorial { runs, effects })
}

impl Rows for Factorial {
    fn columns(&self) -> Vec<&'static str> {
        vec!["kind", "label", "prior_q", "rra", "raa", "value"]
    }

    fn records(&self) -> Vec<Vec<String>> {
        let mut out: Vec<Vec<String>> = self
            .runs
            .iter()
            .map(|r| {
                vec![
                    "run".into(),
                    r.label.clone(),
                    fmt_num(r.prior_q),
                    fmt_num(r.rra),
                    fmt_num(r.raa),
                    fmt_num(r.q_star),
                ]
            })
            .collect();
        let e = &self.effects;
        for (kind, label, v) in [
            ("main_effect", "A", e.a),
            ("main_effect", "B", e.b),
            ("main_effect", "C", e.c),
            ("interaction", "AxB", e.ab),
            ("interaction", "AxC", e.ac),
            ("interaction", "BxC", e.bc),
            ("interaction", "AxBxC", e.abc),
        ] {
            out.push(vec![kind.into(), label.into(), String::new(), String::new(), String::new(), fmt_num(v)]);
        }
        out
    }
}

/// Preference axis swept by the curve commands.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    /// Relative risk aversion `1 − α`, under the configured aggregator.
    Rra,
    /// Relative ambiguity aversion `1 − λ` (power aggregator).
    Raa,
    /// Absolute ambiguity aversion `γ` (exponential aggregator).
    Aaa,
}

impl Axis {
    pub fn default_levels(self) -> Vec<f64> {
        match self {
            Axis::Rra => vec![0.3, 0.5, 0.7],
            Axis::Raa => vec![0.01, 0.04, 2.2],
            Axis::Aaa => vec![0.01, 3.0, 15.0],
        }
    }

    pub fn apply(self, problem: &Problem, level: f64) -> Result<Problem> {
        let mut c = problem.to_config();
        match self {
            Axis::Rra => c.risk.alpha = 1.0 - level,
            Axis::Raa => c.ambiguity = AmbiguitySpec::power_from_raa(level),
            Axis::Aaa => c.ambiguity = AmbiguitySpec::Exponential { gamma: level },
        }
        Ok(c.validate()?)
    }
}

/// Solved worst-case policy at one preference level.
#[derive(Debug, Clone)]
pub struct Level {
    pub level: f64,
    pub q_star: f64,
    pub policy: SolvedPolicy,
}

pub fn solve_levels(problem: &Problem, axis: Axis, levels: &[f64]) -> Result<Vec<Level>> {
    let problems: Vec<Problem> = levels.iter().map(|&l| axis.apply(problem, l)).collect::<Result<_>>()?;
    problems
        .par_iter()
        .zip(levels)
        .map(|(p, &level)| {
            let r = worst_case_prior(&p.ambiguity, p)?;
            Ok(Level {
                level,
                q_star: r.q_star,
                policy: r.policy,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct WealthPoint {
    pub level: f64,
    pub xi: f64,
    pub wealth: f64,
}

/// `W*_T` against `ξ_T` on `(0, xi_max]`; `xi_max` defaults to 1.5 times the
/// largest cutoff.
pub fn terminal_wealth_curves(levels: &[Level], xi_max: Option<f64>, points: usize) -> Vec<WealthPoint> {
    let top = xi_max.unwrap_or_else(|| 1.5 * levels.iter().map(|l| l.policy.cutoff_xi()).fold(0.0, f64::max));
    let top = if top.is_finite() && top > 0.0 { top } else { 1.0 };
    let mut out = Vec::with_capacity(levels.len() * points);
    for l in levels {
        for i in 1..=points {
            let xi = top * i as f64 / points as f64;
            out.push(WealthPoint {
                level: l.level,
                xi,
                wealth: l.policy.terminal_wealth(xi),
            });
        }
    }
    out
}

impl Rows for Vec<WealthPoint> {
    fn columns(&self) -> Vec<&'static str> {
        vec!["level", "xi", "wealth"]
    }

    fn records(&self) -> Vec<Vec<String>> {
        self.iter()
            .map(|p| vec![fmt_num(p.level), fmt_num(p.xi), fmt_num(p.wealth)])
            .collect()
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct PolicyPoint {
    pub level: f64,
    pub y: f64,
    pub wealth: f64,
    pub ratio: f64,
}

/// `π/W` against wealth at time `t`, tracing a grid of observations through
/// the wealth surface. Points with (numerically) zero wealth are skipped.
pub fn policy_curves(levels: &[Level], t: f64, points: usize) -> Result<Vec<PolicyPoint>> {
    let mut out = Vec::new();
    for l in levels {
        let k = &l.policy.kernel;
        let sd = t.sqrt();
        let lo = k.theta_min() * t - 4.0 * sd;
        let hi = k.theta_max() * t + 4.0 * sd;
        let n = if t > 0.0 { points.max(2) } else { 1 };
        let ys: Vec<f64> = (0..n)
            .map(|i| if n == 1 { 0.0 } else { lo + (hi - lo) * i as f64 / (n - 1) as f64 })
            .collect();
        let pts: Vec<Option<PolicyPoint>> = ys
            .par_iter()
            .map(|&y| match l.policy.optimal_fraction(t, y) {
                Ok(f) => Ok(Some(PolicyPoint {
                    level: l.level,
                    y,
                    wealth: f.wealth,
                    ratio: f.ratio,
                })),
                Err(ambiport_core::Error::ZeroWealth { .. }) => Ok(None),
                Err(e) => Err(CliError::from(e)),
            })
            .collect::<Result<_>>()?;
        out.extend(pts.into_iter().flatten());
    }
    Ok(out)
}

impl Rows for Vec<PolicyPoint> {
    fn columns(&self) -> Vec<&'static str> {
        vec!["level", "y", "wealth", "ratio"]
    }

    fn records(&self) -> Vec<Vec<String>> {
        self.iter()
            .map(|p| vec![fmt_num(p.level), fmt_num(p.y), fmt_num(p.wealth), fmt_num(p.ratio)])
            .collect()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SimulationReport {
    pub seed: u64,
    pub n_paths: usize,
    pub n_steps: usize,
    pub q_star: f64,
    pub kappa_star: f64,
    pub budget: BudgetReport,
    pub supermartingale: SupermartingaleReport,
    pub filter: FilterReport,
    pub terminal_gap: Option<Estimate>,
    pub pass: bool,
}

/// Simulates the worst-case policy and runs the path diagnostics.
pub fn simulate_report(problem: &Problem, settings: &SimSettings) -> Result<(SimulationReport, PathBundle)> {
    if settings.n_paths == 0 || settings.n_steps == 0 {
        return Err(CliError::Usage("path and step counts must be positive".into()));
    }
    let r = worst_case_prior(&problem.ambiguity, problem)?;
    let bundle = simulate(&r.policy, settings)?;
    let budget = budget_check(&bundle);
    let supermartingale = supermartingale_check(&bundle);
    let filter = filter_consistency(&bundle);
    let terminal_gap = settings.track_wealth.then(|| terminal_gap(&bundle));
    let pass = budget.pass && supermartingale.non_increasing && filter.slope_ok && filter.concentration_ok;
    Ok((
        SimulationReport {
            seed: settings.seed,
            n_paths: settings.n_paths,
            n_steps: settings.n_steps,
            q_star: r.q_star,
            kappa_star: r.policy.kappa_star,
            budget,
            supermartingale,
            filter,
            terminal_gap,
            pass,
        },
        bundle,
    ))
}

impl Rows for SimulationReport {
    fn columns(&self) -> Vec<&'static str> {
        vec!["check", "statistic", "value", "se", "pass"]
    }

    fn records(&self) -> Vec<Vec<String>> {
        let row = |c: &str, s: String, v: f64, se: Option<f64>, pass: Option<bool>| {
            vec![
                c.to_string(),
                s,
                fmt_num(v),
                se.map(fmt_num).unwrap_or_default(),
                pass.map(|p| p.to_string()).unwrap_or_default(),
            ]
        };
        let mut out = vec![
            row("budget", "mean_deflated_terminal".into(), self.budget.estimate.mean, Some(self.budget.estimate.se), Some(self.budget.pass)),
            row("budget", "z_score".into(), self.budget.z_score, None, None),
        ];
        for (t, e) in self.supermartingale.times.iter().zip(&self.supermartingale.surface) {
            out.push(row("supermartingale", format!("mean_deflated_t={}", fmt_num(*t)), e.mean, Some(e.se), None));
        }
        out.push(row(
            "supermartingale",
            "non_increasing".into(),
            f64::from(u8::from(self.supermartingale.non_increasing)),
            None,
            Some(self.supermartingale.non_increasing),
        ));
        out.push(row("filter", "slope".into(), self.filter.slope, Some(self.filter.slope_se), Some(self.filter.slope_ok)));
        out.push(row(
            "filter",
            "concentrated_share".into(),
            self.filter.concentrated_share,
            None,
            Some(self.filter.concentration_ok),
        ));
        out.push(row("filter", "half_gap_share".into(), self.filter.half_gap_share, None, None));
        if let Some(g) = self.terminal_gap {
            out.push(row("wealth", "mean_terminal_gap".into(), g.mean, Some(g.se), None));
        }
        out.push(row("overall", "pass".into(), f64::from(u8::from(self.pass)), None, Some(self.pass)));
        out
    }
}
