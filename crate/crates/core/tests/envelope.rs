mod common;

use ambiport_core::envelope::{brute_force_demand, solve_concavification_point, DEFAULT_TOL};
use ambiport_core::{Contract, RiskPrefs};
use rand::Rng;

fn env(alpha: f64) -> ambiport_core::EnvelopeSolution {
    solve_concavification_point(Contract::default(), RiskPrefs::new(alpha).unwrap(), DEFAULT_TOL).unwrap()
}

#[test]
fn root_agrees_with_dense_sign_scan() {
    for alpha in [0.3, 0.5, 0.7, -0.5] {
        let e = env(alpha);
        let ub = e.upper_limit();
        let n = 100_000;
        let mut crossing = None;
        let mut prev = e.delta_lagrangian(ub * 1e-9);
        for i in 1..=n {
            let y = ub * i as f64 / n as f64;
            let v = e.delta_lagrangian(y);
            if prev > 0.0 && v <= 0.0 {
                crossing = Some((ub * (i - 1) as f64 / n as f64, y));
            }
            prev = v;
        }
        let (lo, hi) = crossing.expect("one sign change");
        assert!(e.y_hat >= lo && e.y_hat <= hi, "alpha={alpha}");
    }
}

#[test]
fn delta_lagrangian_strictly_decreasing() {
    let e = env(0.5);
    let ub = e.upper_limit();
    let mut rng = common::rng(11);
    for _ in 0..1000 {
        let a: f64 = rng.random_range(1e-6..1.0) * ub;
        let b: f64 = rng.random_range(1e-6..1.0) * ub;
        if a == b {
            continue;
        }
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        assert!(e.delta_lagrangian(lo) > e.delta_lagrangian(hi));
    }
}

#[test]
fn demand_matches_grid_maximiser() {
    for alpha in [0.3, 0.5] {
        let e = env(alpha);
        let mut rng = common::rng(3);
        let grid_n = 400_001;
        for _ in 0..200 {
            let y: f64 = rng.random_range(0.05..2.0) * e.y_hat;
            let x = e.optimal_demand(y);
            let grid_max = (3.0 * x).max(50.0);
            let step = grid_max / (grid_n - 1) as f64;
            let b = brute_force_demand(&e, y, grid_max, grid_n);
            assert!((b - x).abs() <= step, "alpha={alpha} y={y} brute={b} exact={x}");
        }
    }
}

#[test]
fn envelope_dominates_every_choice() {
    let e = env(0.5);
    let mut rng = common::rng(5);
    for _ in 0..1000 {
        let y: f64 = rng.random_range(0.01..3.0) * e.y_hat;
        let x: f64 = rng.random_range(0.0..200.0);
        let best = e.optimal_demand(y);
        assert!(e.lagrangian(y, best) >= e.lagrangian(y, x) - 1e-12 * e.lagrangian(y, x).abs());
    }
}

#[test]
fn demand_is_all_or_nothing_and_non_increasing() {
    let e = env(0.5);
    let mut last = f64::INFINITY;
    for i in 1..2000 {
        let y = e.y_hat * 2.0 * i as f64 / 2000.0;
        let x = e.optimal_demand(y);
        if y < e.y_hat {
            assert!(x > 1.0);
        } else {
            assert_eq!(x, 0.0);
        }
        assert!(x <= last);
        last = x;
    }
}
