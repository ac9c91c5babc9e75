//! Acceptance criteria, one PASS/FAIL line each. Exits non-zero if any fails.

use std::time::Instant;

use ambiport_cli::experiments::{self, Axis, FactorialLevels, Level};
use ambiport_cli::{DEFAULT_AAA, DEFAULT_RAA};
use ambiport_core::envelope::brute_force_demand;
use ambiport_core::sim::{budget_check, filter_consistency};
use ambiport_core::{simulate, Config, Problem, SimSettings, SolvedPolicy};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const RAA_TARGET: [f64; 10] = [0.733, 0.573, 0.413, 0.238, 0.168, 0.127, 0.102, 0.091, 0.087, 0.086];
const AAA_TARGET: [f64; 10] = [0.799, 0.791, 0.751, 0.694, 0.563, 0.423, 0.294, 0.108, 0.094, 0.090];
const FACTORIAL_TARGET: [f64; 8] = [0.392, 0.663, 0.413, 0.733, 0.079, 0.103, 0.104, 0.127];
const EFFECT_TARGET: [f64; 3] = [0.160, 0.035, -0.447];
const Q_TOL: f64 = 0.015;

type Check = Result<(bool, Vec<String>), String>;

fn base() -> Problem {
    Config::default().validate().unwrap()
}

fn point_mass(alpha: f64, linear: bool) -> Problem {
    let mut c = Config::default();
    c.risk.alpha = alpha;
    c.contract.linear = linear;
    c.prior.atoms = vec![0.078];
    c.prior.probs = vec![1.0];
    c.validate().unwrap()
}

fn compare(label: &str, xs: &[f64], got: &[f64], want: &[f64], tol: f64) -> (bool, Vec<String>) {
    let mut ok = true;
    let mut lines = Vec::new();
    for ((x, g), w) in xs.iter().zip(got).zip(want) {
        let hit = (g - w).abs() <= tol;
        ok &= hit;
        lines.push(format!(
            "{label}={x:<5} q*={g:.4} target={w:.3} diff={:+.4} {}",
            g - w,
            if hit { "ok" } else { "off" }
        ));
    }
    (ok, lines)
}

fn raa_table() -> Check {
    let start = Instant::now();
    let rows = experiments::table_raa(&base(), &DEFAULT_RAA).map_err(|e| e.to_string())?;
    let secs = start.elapsed().as_secs_f64();
    let got: Vec<f64> = rows.iter().map(|r| r.q_star).collect();
    let (ok, mut lines) = compare("RAA", &DEFAULT_RAA, &got, &RAA_TARGET, Q_TOL);
    lines.push(format!("runtime {secs:.1}s (limit 600s)"));
    Ok((ok && secs < 600.0, lines))
}

fn aaa_table() -> Check {
    let rows = experiments::table_aaa(&base(), &DEFAULT_AAA).map_err(|e| e.to_string())?;
    let got: Vec<f64> = rows.iter().map(|r| r.q_star).collect();
    let (ok, mut lines) = compare("AAA", &DEFAULT_AAA, &got, &AAA_TARGET, Q_TOL);
    let monotone = got.windows(2).all(|w| w[1] <= w[0]);
    lines.push(format!("values within tolerance: {ok}; non-increasing in gamma: {monotone}"));
    Ok((ok && monotone, lines))
}

fn factorial() -> Check {
    let f = experiments::factorial(&base(), &FactorialLevels::default()).map_err(|e| e.to_string())?;
    let mut ok = true;
    let mut lines = Vec::new();
    for (r, w) in f.runs.iter().zip(FACTORIAL_TARGET) {
        let hit = (r.q_star - w).abs() <= Q_TOL;
        ok &= hit;
        lines.push(format!(
            "{} q*={:.4} target={w:.3} diff={:+.4} {}",
            r.label,
            r.q_star,
            r.q_star - w,
            if hit { "ok" } else { "off" }
        ));
    }
    let e = f.effects;
    for (name, g, w) in [("A", e.a, EFFECT_TARGET[0]), ("B", e.b, EFFECT_TARGET[1]), ("C", e.c, EFFECT_TARGET[2])] {
        let hit = (g - w).abs() <= 0.02;
        ok &= hit;
        lines.push(format!("effect {name} = {g:+.4} target {w:+.3} {}", if hit { "ok" } else { "off" }));
    }
    lines.push(format!(
        "interactions (reported only): AxB {:+.4} AxC {:+.4} BxC {:+.4} AxBxC {:+.4}",
        e.ab, e.ac, e.bc, e.abc
    ));
    Ok((ok, lines))
}

fn merton() -> Check {
    let p = point_mass(0.5, true);
    let pol = p.solve_under(&p.prior).map_err(|e| e.to_string())?;
    let target = (0.078 - 0.02) / (0.3f64.powi(2) * (1.0 - 0.5));
    let mut worst = 0.0f64;
    let mut n = 0;
    for i in 0..20 {
        let t = 9.9 * i as f64 / 19.0;
        for j in 0..20 {
            // Spread observations over roughly +-3 sd so wealth varies widely.
            let y = 0.2 * t + 3.0 * t.sqrt().max(0.1) * (j as f64 / 9.5 - 1.0);
            let f = pol.optimal_fraction(t, y).map_err(|e| e.to_string())?;
            worst = worst.max((f.ratio - target).abs() / target);
            n += 1;
        }
    }
    Ok((
        worst <= 1e-5,
        vec![format!("target {target:.9}; largest relative deviation over {n} (t, y) points {worst:.2e}")],
    ))
}

fn budget_identity(policies: &[(String, &SolvedPolicy)], sim: &ambiport_core::PathBundle) -> Check {
    let mut ok = true;
    let mut lines = Vec::new();
    let mut worst = 0.0f64;
    for (name, pol) in policies {
        let chi = pol.budget().map_err(|e| e.to_string())?;
        let rel = (chi - pol.initial_wealth).abs() / pol.initial_wealth;
        worst = worst.max(rel);
        if rel > 1e-8 {
            ok = false;
            lines.push(format!("{name}: |chi - w|/w = {rel:.2e}"));
        }
    }
    lines.push(format!("{} solved policies, largest |chi - w|/w = {worst:.2e}", policies.len()));
    let b = budget_check(sim);
    lines.push(format!(
        "Monte Carlo E[xi_T W_T] = {:.5} (se {:.5}, {} paths), z = {:.2}",
        b.estimate.mean,
        b.estimate.se,
        sim.summaries.len(),
        b.z_score
    ));
    Ok((ok && b.pass, lines))
}

fn envelope_oracle() -> Check {
    let p = base();
    let env = p.envelope().map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let grid_n = 400_001;
    let mut worst = 0.0f64;
    let mut ok = true;
    for _ in 0..200 {
        let y = env.y_hat * 10f64.powf(rng.random_range(-1.5..0.5));
        let x = env.optimal_demand(y);
        let grid_max = (3.0 * x).max(50.0);
        let step = grid_max / (grid_n - 1) as f64;
        let b = brute_force_demand(&env, y, grid_max, grid_n);
        worst = worst.max((b - x).abs() / step);
        ok &= (b - x).abs() <= step;
    }
    let mut violations = 0;
    for _ in 0..1000 {
        let y = env.y_hat * 10f64.powf(rng.random_range(-1.5..0.5));
        let x: f64 = rng.random_range(0.0..100.0);
        let star = env.optimal_demand(y);
        if env.lagrangian(y, star) < env.lagrangian(y, x) - 1e-12 {
            violations += 1;
        }
    }
    Ok((
        ok && violations == 0,
        vec![
            format!("brute force: largest gap {worst:.3} grid steps over 200 multipliers"),
            format!("dominance violations: {violations} of 1000"),
        ],
    ))
}

fn gradient(pol: &SolvedPolicy) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let b = pol.breakpoints()[0];
    let mut pts: Vec<(f64, f64)> = (0..40)
        .map(|_| (rng.random_range(0.01..10.0), rng.random_range(-6.0..8.0)))
        .collect();
    for _ in 0..10 {
        let s: f64 = 10f64.powf(rng.random_range(-3.0..1.0));
        let h = 1e-4 * s.sqrt();
        pts.push((s, b + rng.random_range(-h..h)));
    }
    let mut ok = true;
    let mut worst = 0.0f64;
    let mut straddle = 0;
    for (s, y) in pts {
        let h = 1e-4 * s.sqrt();
        if (y - h..=y + h).contains(&b) {
            straddle += 1;
        }
        let up = pol.wealth_surface(s, y + h).map_err(|e| e.to_string())?;
        let dn = pol.wealth_surface(s, y - h).map_err(|e| e.to_string())?;
        let fd = (up - dn) / (2.0 * h);
        let g = pol.grad_wealth_surface(s, y).map_err(|e| e.to_string())?;
        let tol = 1e-4f64.max(1e-4 * g.abs());
        worst = worst.max((g - fd).abs() / tol);
        ok &= (g - fd).abs() <= tol;
    }
    Ok((
        ok,
        vec![format!("50 points ({straddle} stencils straddle the breakpoint); largest error / tolerance = {worst:.2e}")],
    ))
}

/// Number of falls to zero from positive wealth along a fine state-price grid.
fn drops(pol: &SolvedPolicy, xi_max: f64) -> usize {
    let w: Vec<f64> = (1..=4000).map(|i| pol.terminal_wealth(xi_max * i as f64 / 4000.0)).collect();
    let non_increasing = w.windows(2).all(|p| p[1] <= p[0]);
    let count = w.windows(2).filter(|p| p[0] > 0.0 && p[1] == 0.0).count();
    if non_increasing {
        count
    } else {
        usize::MAX
    }
}

/// Whether each successive curve lies strictly below the previous one where
/// both are positive.
fn ordered_below(levels: &[Level]) -> bool {
    levels.windows(2).all(|w| {
        let top = w[0].policy.cutoff_xi().min(w[1].policy.cutoff_xi());
        (1..400).all(|i| {
            let xi = top * i as f64 / 400.0;
            w[1].policy.terminal_wealth(xi) < w[0].policy.terminal_wealth(xi)
        })
    })
}

fn qualitative() -> Check {
    let mut lines = Vec::new();
    let rra = experiments::solve_levels(&point_mass(0.5, false), Axis::Rra, &[0.3, 0.5, 0.7]).map_err(|e| e.to_string())?;
    let raa = experiments::solve_levels(&base(), Axis::Raa, &[0.01, 0.04, 2.2]).map_err(|e| e.to_string())?;
    let aaa = experiments::solve_levels(&base(), Axis::Aaa, &[0.01, 3.0, 15.0]).map_err(|e| e.to_string())?;
    let mut ok = true;
    let mut part = |name: &str, pass: bool, detail: String| {
        ok &= pass;
        lines.push(format!("{} {name}: {detail}", if pass { "ok " } else { "off" }));
    };
    let all: Vec<&Level> = rra.iter().chain(&raa).chain(&aaa).collect();
    let jumps: Vec<usize> = all.iter().map(|l| drops(&l.policy, 2.0 * l.policy.cutoff_xi())).collect();
    part("one downward jump per curve", jumps.iter().all(|j| *j == 1), format!("{jumps:?}"));
    let cut = |ls: &[Level]| -> Vec<f64> { ls.iter().map(|l| l.policy.cutoff_xi()).collect() };
    let (cr, ca, cg) = (cut(&rra), cut(&raa), cut(&aaa));
    part(
        "cutoff rises with RRA (point mass)",
        cr.windows(2).all(|w| w[1] > w[0]),
        format!("RRA 0.3/0.5/0.7 -> {cr:.4?}"),
    );
    part(
        "cutoff falls with RAA",
        ca.windows(2).all(|w| w[1] < w[0]),
        format!("RAA 0.01/0.04/2.2 -> {ca:.4?}"),
    );
    part(
        "cutoff falls with AAA",
        cg.windows(2).all(|w| w[1] < w[0]),
        format!("AAA 0.01/3/15 -> {cg:.4?}"),
    );
    part("higher RAA curve lies below", ordered_below(&raa), "interior domain, 399 points".into());
    part("higher AAA curve lies below", ordered_below(&aaa), "interior domain, 399 points".into());
    Ok((ok, lines))
}

fn filter(sim: &ambiport_core::PathBundle) -> Check {
    let f = filter_consistency(sim);
    Ok((
        f.slope_ok && f.concentration_ok,
        vec![
            format!(
                "{} share of paths with > 90% posterior mass on the drawn atom: {:.4} (need > 0.9)",
                if f.concentration_ok { "ok " } else { "off" },
                f.concentrated_share
            ),
            format!(
                "{} innovation slope {:.5} (se {:.5})",
                if f.slope_ok { "ok " } else { "off" },
                f.slope,
                f.slope_se
            ),
            format!("share within half an atom gap: {:.4}", f.half_gap_share),
        ],
    ))
}

fn main() {
    let start = Instant::now();
    let mut results: Vec<(u32, &str, Check)> = Vec::new();

    let p = base();
    let neutral = p.solve_under(&p.prior).expect("reference policy");
    let sim = simulate(
        &neutral,
        &SimSettings {
            n_paths: 100_000,
            track_wealth: false,
            record_paths: 0,
            ..SimSettings::default()
        },
    )
    .expect("simulation");

    results.push((1, "RAA table", raa_table()));
    results.push((2, "AAA table", aaa_table()));
    results.push((3, "factorial design", factorial()));
    results.push((4, "Merton reduction", merton()));

    let mut solved: Vec<(String, SolvedPolicy)> = vec![("reference".into(), neutral.clone())];
    for (axis, levels) in [(Axis::Raa, vec![0.01, 0.3, 2.2]), (Axis::Aaa, vec![0.01, 1.0, 15.0])] {
        for l in experiments::solve_levels(&p, axis, &levels).expect("levels") {
            solved.push((format!("{axis:?} {}", l.level), l.policy));
        }
    }
    for rra in [0.3, 0.5, 0.7] {
        for linear in [false, true] {
            let q = point_mass(1.0 - rra, linear);
            solved.push((format!("point mass RRA {rra} linear {linear}"), q.solve_under(&q.prior).unwrap()));
        }
    }
    let refs: Vec<(String, &SolvedPolicy)> = solved.iter().map(|(n, p)| (n.clone(), p)).collect();
    results.push((5, "budget identity", budget_identity(&refs, &sim)));
    results.push((6, "envelope oracle", envelope_oracle()));
    results.push((7, "gradient check", gradient(&neutral)));
    results.push((8, "qualitative curve properties", qualitative()));
    results.push((9, "filter consistency", filter(&sim)));

    let mut failed = 0;
    for (id, name, r) in &results {
        match r {
            Ok((pass, lines)) => {
                println!("{} criterion {id}: {name}", if *pass { "PASS" } else { "FAIL" });
                for l in lines {
                    println!("      {l}");
                }
                if !pass {
                    failed += 1;
                }
            }
            Err(e) => {
                println!("FAIL criterion {id}: {name}");
                println!("      error: {e}");
                failed += 1;
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed ({:.1}s)",
        results.len() - failed,
        start.elapsed().as_secs_f64()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
