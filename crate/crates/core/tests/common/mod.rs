#![allow(dead_code)]

use ambiport_core::{Config, DiscretePrior, Problem, SolvedPolicy};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ContinuousCDF, Normal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn std_normal(rng: &mut ChaCha8Rng) -> f64 {
    use rand::Rng;
    let u: f64 = rng.random_range(1e-300..1.0);
    Normal::new(0.0, 1.0).unwrap().inverse_cdf(u)
}

/// Default two-point problem.
pub fn base() -> Problem {
    Config::default().validate().unwrap()
}

pub fn point_mass(alpha: f64, linear: bool) -> Problem {
    let mut c = Config::default();
    c.risk.alpha = alpha;
    c.contract.linear = linear;
    c.prior.atoms = vec![0.078];
    c.prior.probs = vec![1.0];
    c.validate().unwrap()
}

pub fn solve(p: &Problem) -> SolvedPolicy {
    p.solve_under(&p.prior).unwrap()
}

pub fn two_point(q: f64) -> DiscretePrior {
    DiscretePrior::two_point(0.03, 0.09, q).unwrap()
}

/// Mean and standard error.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    (m, (v / n).sqrt())
}
