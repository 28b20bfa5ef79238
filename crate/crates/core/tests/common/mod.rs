#![allow(dead_code)]

use medest_core::enumeration::{binomial, unrank_combination};
use medest_core::Population;
use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

pub fn p5() -> Population {
    Population::new("P5", vec![1., 2., 3., 4., 5.], vec![2., 4., 6., 8., 10.]).unwrap()
}

/// Random population with `size` units. Values are drawn continuously, so
/// y-values are distinct with probability one.
pub fn random_population(rng: &mut Xoshiro256PlusPlus, size: usize) -> Population {
    let y: Vec<f64> = (0..size).map(|_| rng.random_range(1.0..1000.0)).collect();
    let x: Vec<f64> = y
        .iter()
        .map(|v| 0.3 * v + rng.random_range(0.0..200.0))
        .collect();
    Population::new("random", y, x).unwrap()
}

pub fn rng(seed: u64) -> Xoshiro256PlusPlus {
    Xoshiro256PlusPlus::seed_from_u64(seed)
}

/// Every sample as `(ȳ, x̄, m)`, listed independently of the library's
/// enumeration path (sorting each sample explicitly).
pub fn all_samples(pop: &Population, n: usize) -> Vec<[f64; 3]> {
    let total = binomial(pop.len(), n).unwrap();
    (0..total)
        .map(|rank| {
            let idx = unrank_combination(rank, pop.len(), n).unwrap();
            let mut ys: Vec<f64> = idx.iter().map(|&i| pop.y()[i]).collect();
            let xbar = idx.iter().map(|&i| pop.x()[i]).sum::<f64>() / n as f64;
            let ybar = ys.iter().sum::<f64>() / n as f64;
            ys.sort_by(f64::total_cmp);
            let m = if n % 2 == 1 {
                ys[n / 2]
            } else {
                0.5 * (ys[n / 2 - 1] + ys[n / 2])
            };
            [ybar, xbar, m]
        })
        .collect()
}

pub fn rel_err(got: f64, want: f64) -> f64 {
    if want == 0.0 {
        got.abs()
    } else {
        ((got - want) / want).abs()
    }
}
