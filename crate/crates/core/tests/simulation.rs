mod common;

use ambiport_core::sim::{budget_check, filter_consistency, supermartingale_check, terminal_gap};
use ambiport_core::{simulate, DriftMode, SimSettings};

fn settings(n_paths: usize, n_steps: usize, track_wealth: bool) -> SimSettings {
    SimSettings {
        n_paths,
        n_steps,
        track_wealth,
        record_paths: 5,
        ..SimSettings::default()
    }
}

#[test]
fn deflated_wealth_is_a_supermartingale() {
    let pol = common::solve(&common::base());
    let b = simulate(&pol, &settings(20_000, 200, false)).unwrap();
    let rep = supermartingale_check(&b);
    assert!(rep.non_increasing, "{:?}", rep.surface);
    assert!(rep.flat, "{:?}", rep.surface);
    assert!(budget_check(&b).pass);
    assert!((rep.surface[0].mean - 10.0).abs() < 1e-8);
}

#[test]
fn innovations_have_unit_slope() {
    let pol = common::solve(&common::base());
    let b = simulate(&pol, &settings(5_000, 200, false)).unwrap();
    let f = filter_consistency(&b);
    assert!(f.slope_ok, "slope {} se {}", f.slope, f.slope_se);
    assert!(f.half_gap_share > 0.5);
}

#[test]
fn fixed_drift_posterior_moves_toward_truth() {
    let pol = common::solve(&common::base());
    let mut s = settings(2_000, 200, false);
    s.mode = DriftMode::Fixed { z: 0.09 };
    let b = simulate(&pol, &s).unwrap();
    assert!(b.summaries.iter().all(|x| x.z == 0.09 && x.atom == 1));
    let mean_mass: f64 = b.summaries.iter().map(|x| x.mass_on_true).sum::<f64>() / 2_000.0;
    assert!(mean_mass > 0.8, "{mean_mass}");
    s.mode = DriftMode::Fixed { z: 0.03 };
    let lo = simulate(&pol, &s).unwrap();
    let lo_mass: f64 = lo.summaries.iter().map(|x| x.mass_on_true).sum::<f64>() / 2_000.0;
    assert!(lo_mass > 0.2, "{lo_mass}");
}

#[test]
fn wealth_gap_shrinks_with_step_size() {
    let pol = common::solve(&common::base());
    let steps = [128usize, 256, 512];
    let gaps: Vec<f64> = steps
        .iter()
        .map(|&n| terminal_gap(&simulate(&pol, &settings(1_000, n, true)).unwrap()).mean)
        .collect();
    let xs: Vec<f64> = steps.iter().map(|n| (*n as f64).ln()).collect();
    let ys: Vec<f64> = gaps.iter().map(|g| g.ln()).collect();
    let (mx, my) = (xs.iter().sum::<f64>() / 3.0, ys.iter().sum::<f64>() / 3.0);
    let slope = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>()
        / xs.iter().map(|x| (x - mx).powi(2)).sum::<f64>();
    println!("terminal gaps {gaps:?}, fitted order {:.3}", -slope);
    assert!(gaps[0] > gaps[1] && gaps[1] > gaps[2]);
    assert!((0.2..=0.8).contains(&-slope), "{slope}");
}

#[test]
fn tracked_paths_start_on_the_surface() {
    let pol = common::solve(&common::base());
    let b = simulate(&pol, &settings(50, 100, true)).unwrap();
    for p in &b.paths {
        assert_eq!(p.y[0], 0.0);
        assert!((p.w_sde[0] - 10.0).abs() < 1e-8);
        assert!((p.w_surface[0] - 10.0).abs() < 1e-8);
        assert_eq!(*p.pi.last().unwrap(), 0.0);
        assert!(p.w_sde.iter().all(|w| *w >= 0.0));
    }
}
