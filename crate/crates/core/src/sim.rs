//! Monte Carlo validation of a solved policy.
//!
//! The observation `Y_t = ∫θ dt + B_t` is simulated exactly on a uniform grid.
//! Wealth is carried two ways: (a) the self-financing SDE
//! `dW = rW dt + π σ dY` with the risky fraction frozen over each step, and
//! (b) the closed-form price `𝒴(T − t, Y_t)` of the optimal claim.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::solver::SolvedPolicy;

/// Source of the true drift on each path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum DriftMode {
    Fixed { z: f64 },
    /// Draw `Z` from the prior the policy was solved under.
    DrawFromPrior,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimSettings {
    pub n_paths: usize,
    pub n_steps: usize,
    pub seed: u64,
    pub mode: DriftMode,
    /// Carry the SDE wealth and the surface along every step. When off only
    /// the observation, the filter and checkpoint wealth are simulated.
    pub track_wealth: bool,
    /// Interpolate the wealth surface from per-step tables instead of
    /// integrating at every point.
    pub tabulate: bool,
    /// Table spacing in units of `sqrt(T − t)`.
    pub table_spacing: f64,
    /// Floor on the remaining time used for gradient evaluation.
    pub s_min: f64,
    /// Number of paths whose full trajectories are kept.
    pub record_paths: usize,
    /// Checkpoint times as fractions of the horizon.
    pub checkpoints: Vec<f64>,
}

impl Default for SimSettings {
    fn default() -> Self {
        Self {
            n_paths: 10_000,
            n_steps: 500,
            seed: 20_240_601,
            mode: DriftMode::DrawFromPrior,
            track_wealth: true,
            tabulate: true,
            table_spacing: 0.2,
            s_min: 1e-4,
            record_paths: 100,
            checkpoints: vec![0.0, 0.25, 0.5, 0.75, 1.0],
        }
    }
}

/// Full trajectory of one path, aligned with [`PathBundle::times`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathRecord {
    pub index: usize,
    pub z: f64,
    pub y: Vec<f64>,
    pub theta_hat: Vec<f64>,
    pub w_sde: Vec<f64>,
    pub w_surface: Vec<f64>,
    /// Dollar amount in the stock; zero at maturity.
    pub pi: Vec<f64>,
}

/// End-of-path quantities kept for every path.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathSummary {
    pub z: f64,
    pub atom: usize,
    pub y_t: f64,
    pub theta_hat_t: f64,
    /// Posterior mass on the drawn atom at maturity.
    pub mass_on_true: f64,
    pub w_sde_t: f64,
    pub w_surface_t: f64,
    /// `e^{-rt} W_t / F(t, Y_t)` with the surface wealth, per checkpoint.
    pub deflated: Vec<f64>,
    /// Same with the SDE wealth (empty when wealth is not tracked).
    pub deflated_sde: Vec<f64>,
    /// `ξ_T W_T` with the terminal claim.
    pub deflated_terminal: f64,
    /// Innovation regression sums `Σx y, Σx², Σx²y², Σx³y, Σx⁴` with
    /// `x = θ̂Δt`, `y = ΔY`.
    pub regression: [f64; 5],
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathBundle {
    pub seed: u64,
    pub n_steps: usize,
    pub mode: DriftMode,
    pub times: Vec<f64>,
    /// Grid indices of the checkpoints.
    pub checkpoint_steps: Vec<usize>,
    pub initial_wealth: f64,
    pub r: f64,
    pub atoms: Vec<f64>,
    pub thetas: Vec<f64>,
    pub paths: Vec<PathRecord>,
    pub summaries: Vec<PathSummary>,
}

/// Cubic Hermite table of the wealth surface at one remaining time.
#[derive(Debug, Clone)]
struct SurfaceTable {
    y0: f64,
    dy: f64,
    /// `(value, gradient, second derivative)` per node.
    nodes: Vec<[f64; 3]>,
}

impl SurfaceTable {
    fn build(policy: &SolvedPolicy, s: f64, lo: f64, hi: f64, dy: f64) -> Result<Self> {
        let n = (((hi - lo) / dy).ceil() as usize).max(1) + 1;
        let nodes = (0..n)
            .into_par_iter()
            .map(|i| policy.surface_derivatives(s, lo + dy * i as f64))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { y0: lo, dy, nodes })
    }

    /// Interpolated `(value, gradient)`, or `None` off the table.
    fn eval(&self, y: f64) -> Option<(f64, f64)> {
        let x = (y - self.y0) / self.dy;
        if !(x >= 0.0) || x >= (self.nodes.len() - 1) as f64 {
            return None;
        }
        let i = x.floor() as usize;
        let t = x - i as f64;
        let (a, b) = (self.nodes[i], self.nodes[i + 1]);
        let h = self.dy;
        let h00 = 2.0 * t * t * t - 3.0 * t * t + 1.0;
        let h10 = t * t * t - 2.0 * t * t + t;
        let h01 = -2.0 * t * t * t + 3.0 * t * t;
        let h11 = t * t * t - t * t;
        let value = h00 * a[0] + h10 * h * a[1] + h01 * b[0] + h11 * h * b[1];
        let grad = h00 * a[1] + h10 * h * a[2] + h01 * b[1] + h11 * h * b[2];
        Some((value, grad))
    }
}

/// Surface evaluator for one time step: a table when available, direct
/// integration otherwise.
struct StepSurface<'a> {
    policy: &'a SolvedPolicy,
    s: f64,
    table: Option<SurfaceTable>,
}

impl StepSurface<'_> {
    fn value_and_gradient(&self, y: f64) -> Result<(f64, f64)> {
        if let Some(v) = self.table.as_ref().and_then(|t| t.eval(y)) {
            return Ok(v);
        }
        let p = self.policy.surface_point(self.s, y)?;
        Ok((p.value, p.gradient()))
    }
}

/// Uniform draw in `(0, 1)` with 53 random bits.
fn uniform(rng: &mut ChaCha12Rng) -> f64 {
    ((rng.random::<u64>() >> 11) as f64 + 0.5) / (1u64 << 53) as f64
}

fn draw_atom(weights: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (i, w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return i;
        }
    }
    weights.len() - 1
}

/// Simulates `n_paths` paths under `policy`.
pub fn simulate(policy: &SolvedPolicy, settings: &SimSettings) -> Result<PathBundle> {
    if settings.n_paths == 0 {
        return Err(Error::domain("n_paths", "must be > 0"));
    }
    if settings.n_steps < 100 {
        return Err(Error::domain("n_steps", format!("must be >= 100, got {}", settings.n_steps)));
    }
    let kernel = &policy.kernel;
    let market = *kernel.market();
    let t_end = market.horizon;
    let n = settings.n_steps;
    let dt = t_end / n as f64;
    let times: Vec<f64> = (0..=n).map(|k| if k == n { t_end } else { k as f64 * dt }).collect();
    let thetas = kernel.thetas().to_vec();
    let atoms = kernel.atoms().to_vec();
    let fixed_theta = match settings.mode {
        DriftMode::Fixed { z } => {
            if !z.is_finite() {
                return Err(Error::domain("mode", "fixed drift must be finite"));
            }
            Some(market.theta_of(z))
        }
        DriftMode::DrawFromPrior => None,
    };
    let mut checkpoint_steps: Vec<usize> = settings
        .checkpoints
        .iter()
        .map(|f| ((f.clamp(0.0, 1.0) * n as f64).round()) as usize)
        .collect();
    checkpoint_steps.sort_unstable();
    checkpoint_steps.dedup();

    // Range of plausible observation levels at time t.
    let (th_lo, th_hi) = (
        fixed_theta.map_or(kernel.theta_min(), |t| t.min(kernel.theta_min())),
        fixed_theta.map_or(kernel.theta_max(), |t| t.max(kernel.theta_max())),
    );
    let y_range = |t: f64| (th_lo * t - 8.0 * t.sqrt(), th_hi * t + 8.0 * t.sqrt());

    let needs_surface = |k: usize| k < n && (settings.track_wealth || checkpoint_steps.contains(&k));
    let surfaces: Vec<Option<StepSurface>> = (0..=n)
        .map(|k| -> Result<Option<StepSurface>> {
            if !needs_surface(k) {
                return Ok(None);
            }
            let s = (t_end - times[k]).max(settings.s_min);
            let table = if settings.tabulate && k > 0 {
                let (lo, hi) = y_range(times[k]);
                Some(SurfaceTable::build(policy, s, lo, hi, settings.table_spacing * s.sqrt())?)
            } else {
                None
            };
            Ok(Some(StepSurface { policy, s, table }))
        })
        .collect::<Result<_>>()?;

    let origin = match surfaces[0].as_ref() {
        Some(sf) => sf.value_and_gradient(0.0)?,
        None => (policy.initial_wealth, 0.0),
    };
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    let w0 = policy.initial_wealth;
    let r = market.r;
    let sigma = market.sigma;
    let growth = (r * dt).exp();
    let sqrt_dt = dt.sqrt();

    let run_path = |index: usize| -> Result<(PathSummary, Option<PathRecord>)> {
        let mut rng = ChaCha12Rng::seed_from_u64(settings.seed);
        rng.set_stream(index as u64);
        let (atom, theta) = match fixed_theta {
            Some(th) => (
                thetas.iter().position(|x| *x == th).unwrap_or(usize::MAX),
                th,
            ),
            None => {
                let i = draw_atom(kernel.weights(), uniform(&mut rng));
                (i, thetas[i])
            }
        };
        let z = atoms.get(atom).copied().unwrap_or(match settings.mode {
            DriftMode::Fixed { z } => z,
            DriftMode::DrawFromPrior => f64::NAN,
        });
        let record = index < settings.record_paths;
        let cap = if record { n + 1 } else { 0 };
        let mut rec = PathRecord {
            index,
            z,
            y: Vec::with_capacity(cap),
            theta_hat: Vec::with_capacity(cap),
            w_sde: Vec::with_capacity(cap),
            w_surface: Vec::with_capacity(cap),
            pi: Vec::with_capacity(cap),
        };
        let mut y = 0.0;
        let mut w_sde = w0;
        let mut reg = [0.0; 5];
        let mut deflated = Vec::with_capacity(checkpoint_steps.len());
        let mut deflated_sde = Vec::new();
        for k in 0..=n {
            let t = times[k];
            let th_hat = kernel.posterior_mean(t, y);
            let at_checkpoint = checkpoint_steps.contains(&k);
            let surface = if k < n && (settings.track_wealth || at_checkpoint) {
                Some(if k == 0 { origin } else { surfaces[k].as_ref().expect("surface for step").value_and_gradient(y)? })
            } else {
                None
            };
            let w_surf = if k == n {
                policy.terminal_wealth_at(y)
            } else if k == 0 {
                w0
            } else {
                surface.map_or(f64::NAN, |(v, _)| v)
            };
            if at_checkpoint {
                let lf = kernel.log_f(t, y);
                deflated.push(w_surf * (-r * t - lf).exp());
                if settings.track_wealth {
                    deflated_sde.push(w_sde * (-r * t - lf).exp());
                }
            }
            if k == n {
                if record {
                    rec.y.push(y);
                    rec.theta_hat.push(th_hat);
                    rec.w_sde.push(w_sde);
                    rec.w_surface.push(w_surf);
                    rec.pi.push(0.0);
                }
                break;
            }
            let mut pi = 0.0;
            if let (true, Some((value, grad))) = (settings.track_wealth, surface) {
                // Risky share of wealth; undefined (held at zero) where the
                // optimal wealth has vanished.
                let ratio = if value > 1e-12 * w0 { grad / (sigma * value) } else { 0.0 };
                pi = if w_sde > 0.0 { ratio * w_sde } else { 0.0 };
            }
            if record {
                rec.y.push(y);
                rec.theta_hat.push(th_hat);
                rec.w_sde.push(w_sde);
                rec.w_surface.push(w_surf);
                rec.pi.push(pi);
            }
            let dy = theta * dt + sqrt_dt * normal.inverse_cdf(uniform(&mut rng));
            let x = th_hat * dt;
            reg[0] += x * dy;
            reg[1] += x * x;
            reg[2] += x * x * dy * dy;
            reg[3] += x * x * x * dy;
            reg[4] += x * x * x * x;
            if settings.track_wealth {
                w_sde = (growth * (w_sde + pi * sigma * dy)).max(0.0);
            }
            y += dy;
        }
        let post = kernel.posterior_weights(t_end, y);
        let mass_on_true = post.get(atom).copied().unwrap_or(f64::NAN);
        let w_t = policy.terminal_wealth_at(y);
        let summary = PathSummary {
            z,
            atom,
            y_t: y,
            theta_hat_t: kernel.posterior_mean(t_end, y),
            mass_on_true,
            w_sde_t: if settings.track_wealth { w_sde } else { f64::NAN },
            w_surface_t: w_t,
            deflated,
            deflated_sde,
            deflated_terminal: w_t * kernel.state_price_density(y),
            regression: reg,
        };
        Ok((summary, record.then_some(rec)))
    };

    let results: Vec<(PathSummary, Option<PathRecord>)> =
        (0..settings.n_paths).into_par_iter().map(run_path).collect::<Result<_>>()?;
    let mut summaries = Vec::with_capacity(results.len());
    let mut paths = Vec::new();
    for (s, rec) in results {
        summaries.push(s);
        if let Some(rec) = rec {
            paths.push(rec);
        }
    }
    Ok(PathBundle {
        seed: settings.seed,
        n_steps: n,
        mode: settings.mode,
        times,
        checkpoint_steps,
        initial_wealth: w0,
        r,
        atoms,
        thetas,
        paths,
        summaries,
    })
}

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub se: f64,
}

impl Estimate {
    pub fn from_samples<I: IntoIterator<Item = f64>>(xs: I) -> Self {
        let (mut n, mut mean, mut m2) = (0.0, 0.0, 0.0);
        for x in xs {
            n += 1.0;
            let d = x - mean;
            mean += d / n;
            m2 += d * (x - mean);
        }
        let var = if n > 1.0 { m2 / (n - 1.0) } else { 0.0 };
        Self {
            mean,
            se: (var / n).sqrt(),
        }
    }

    /// `|mean − target| / se`; zero when both the error and the SE vanish.
    pub fn z_score(&self, target: f64) -> f64 {
        let d = (self.mean - target).abs();
        if d == 0.0 {
            0.0
        } else {
            d / self.se
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BudgetReport {
    pub target: f64,
    pub estimate: Estimate,
    pub z_score: f64,
    pub pass: bool,
}

/// `E[ξ_T W_T] = w` under the prior the paths were drawn from.
pub fn budget_check(bundle: &PathBundle) -> BudgetReport {
    let estimate = Estimate::from_samples(bundle.summaries.iter().map(|s| s.deflated_terminal));
    let z_score = estimate.z_score(bundle.initial_wealth);
    BudgetReport {
        target: bundle.initial_wealth,
        estimate,
        z_score,
        pass: z_score <= 3.0,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SupermartingaleReport {
    pub times: Vec<f64>,
    pub surface: Vec<Estimate>,
    pub sde: Vec<Estimate>,
    /// Means never rise by more than three combined standard errors.
    pub non_increasing: bool,
    /// Every checkpoint mean lies within three standard errors of `w`.
    pub flat: bool,
}

/// Checkpoint means of `e^{-rt} W_t / F(t, Y_t)`.
pub fn supermartingale_check(bundle: &PathBundle) -> SupermartingaleReport {
    let m = bundle.checkpoint_steps.len();
    let surface: Vec<Estimate> = (0..m)
        .map(|j| Estimate::from_samples(bundle.summaries.iter().map(|s| s.deflated[j])))
        .collect();
    let sde: Vec<Estimate> = if bundle.summaries.first().is_some_and(|s| !s.deflated_sde.is_empty()) {
        (0..m)
            .map(|j| Estimate::from_samples(bundle.summaries.iter().map(|s| s.deflated_sde[j])))
            .collect()
    } else {
        Vec::new()
    };
    let non_increasing = surface
        .windows(2)
        .all(|w| w[1].mean <= w[0].mean + 3.0 * (w[0].se.powi(2) + w[1].se.powi(2)).sqrt());
    let flat = surface.iter().all(|e| e.z_score(bundle.initial_wealth) <= 3.0);
    SupermartingaleReport {
        times: bundle.checkpoint_steps.iter().map(|&k| bundle.times[k]).collect(),
        surface,
        sde,
        non_increasing,
        flat,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FilterReport {
    /// Pooled slope of `ΔY` on `θ̂ Δt`.
    pub slope: f64,
    /// Heteroskedasticity-robust standard error of the slope.
    pub slope_se: f64,
    pub slope_ok: bool,
    /// Share of paths with more than 90% posterior mass on the drawn atom.
    pub concentrated_share: f64,
    /// Share of paths whose final `θ̂` is within half the smallest atom gap
    /// of the drawn value.
    pub half_gap_share: f64,
    pub concentration_ok: bool,
}

/// Innovation regression and posterior concentration.
pub fn filter_consistency(bundle: &PathBundle) -> FilterReport {
    let mut sums = [0.0; 5];
    for s in &bundle.summaries {
        for (a, b) in sums.iter_mut().zip(&s.regression) {
            *a += b;
        }
    }
    let [sxy, sxx, sxxyy, sxxxy, sxxxx] = sums;
    let slope = sxy / sxx;
    let resid = sxxyy - 2.0 * slope * sxxxy + slope * slope * sxxxx;
    let slope_se = resid.max(0.0).sqrt() / sxx;
    let slope_ok = (slope - 1.0).abs() <= 3.0 * slope_se;

    let n = bundle.summaries.len() as f64;
    let concentrated_share = bundle.summaries.iter().filter(|s| s.mass_on_true > 0.9).count() as f64 / n;
    let gap = bundle
        .thetas
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::INFINITY, f64::min);
    let half_gap_share = bundle
        .summaries
        .iter()
        .filter(|s| {
            bundle
                .thetas
                .get(s.atom)
                .is_some_and(|th| (s.theta_hat_t - th).abs() < 0.5 * gap)
        })
        .count() as f64
        / n;
    FilterReport {
        slope,
        slope_se,
        slope_ok,
        concentrated_share,
        half_gap_share,
        concentration_ok: concentrated_share > 0.9,
    }
}

/// Mean absolute gap between the SDE wealth and the surface wealth at `T`.
pub fn terminal_gap(bundle: &PathBundle) -> Estimate {
    Estimate::from_samples(bundle.summaries.iter().map(|s| (s.w_sde_t - s.w_surface_t).abs()))
}

/// Writes the recorded trajectories as CSV rows `(path, t, Y, θ̂, W_sde, W_surface, π)`.
pub fn write_paths_csv<W: std::io::Write>(bundle: &PathBundle, out: W) -> Result<()> {
    let io = |e: csv::Error| Error::Parse(format!("csv: {e}"));
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["path", "t", "y", "theta_hat", "w_sde", "w_surface", "pi"])
        .map_err(io)?;
    for p in &bundle.paths {
        for k in 0..p.y.len() {
            w.write_record([
                p.index.to_string(),
                format!("{:.12e}", bundle.times[k]),
                format!("{:.12e}", p.y[k]),
                format!("{:.12e}", p.theta_hat[k]),
                format!("{:.12e}", p.w_sde[k]),
                format!("{:.12e}", p.w_surface[k]),
                format!("{:.12e}", p.pi[k]),
            ])
            .map_err(io)?;
        }
    }
    w.flush().map_err(|e| Error::Parse(format!("csv: {e}")))?;
    Ok(())
}
