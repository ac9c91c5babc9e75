use ambiport_core::{AmbiguitySpec, Config, Contract, DiscretePrior, EnvelopeSolution, FilterKernel, MarketParams, RiskPrefs};
use ambiport_core::envelope::solve_concavification_point;
use proptest::prelude::*;

fn market() -> MarketParams {
    MarketParams::new(0.02, 0.3, 10.0).unwrap()
}

fn prior() -> impl Strategy<Value = DiscretePrior> {
    (prop::collection::vec(-0.2f64..0.3, 1..6), prop::collection::vec(0.01f64..1.0, 6)).prop_filter_map(
        "distinct atoms",
        |(mut atoms, raw)| {
            atoms.sort_by(|a, b| a.partial_cmp(b).unwrap());
            atoms.dedup_by(|a, b| (*a - *b).abs() < 1e-6);
            let w = &raw[..atoms.len()];
            let t: f64 = w.iter().sum();
            DiscretePrior::new(atoms, w.iter().map(|x| x / t).collect()).ok()
        },
    )
}

fn envelope() -> impl Strategy<Value = EnvelopeSolution> {
    (0.05f64..0.95, 0.05f64..1.0, 0.2f64..3.0, 0.005f64..0.2).prop_map(|(alpha, delta, k, c)| {
        solve_concavification_point(
            Contract::option(delta, k, c).unwrap(),
            RiskPrefs::new(alpha).unwrap(),
            1e-10,
        )
        .unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn config_round_trips(r in 0.0f64..0.05, sigma in 0.05f64..0.6, w in 1.0f64..100.0,
                          alpha in 0.1f64..0.9, lambda in 0.01f64..0.99, q in 0.05f64..0.95) {
        let mut c = Config::default();
        c.market.r = r;
        c.market.sigma = sigma;
        c.market.initial_wealth = w;
        c.risk.alpha = alpha;
        c.ambiguity = AmbiguitySpec::Power { lambda };
        c.prior.probs = vec![1.0 - q, q];
        let back = Config::from_toml_str(&c.to_toml_string()).unwrap();
        prop_assert_eq!(back, c);
    }

    #[test]
    fn thetas_increase_with_atoms(p in prior()) {
        let k = FilterKernel::new(&p, market());
        prop_assert!(k.thetas().windows(2).all(|w| w[1] > w[0]));
        let s: f64 = p.probs().iter().sum();
        prop_assert!((s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn posterior_is_a_distribution(p in prior(), t in 0.0f64..20.0, y in -10.0f64..10.0) {
        let k = FilterKernel::new(&p, market());
        let w = k.posterior_weights(t, y);
        prop_assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let m = k.posterior_mean(t, y);
        prop_assert!(m >= k.theta_min() - 1e-12 && m <= k.theta_max() + 1e-12);
    }

    #[test]
    fn demand_non_increasing(env in envelope(), a in 1e-4f64..5.0, b in 1e-4f64..5.0) {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        prop_assert!(env.optimal_demand(lo) >= env.optimal_demand(hi));
    }

    #[test]
    fn demand_is_zero_or_above_strike(env in envelope(), y in 1e-4f64..5.0) {
        let x = env.optimal_demand(y);
        prop_assert!(x == 0.0 || x > env.contract.strike);
    }
}
