//! Synthetic populations shared by the benchmarks.

use medest_core::Population;

/// Deterministic population of `size` units with distinct, skewed y-values
/// and a correlated auxiliary variable.
pub fn synthetic_population(size: usize) -> Population {
    let y: Vec<f64> = (0..size)
        .map(|i| {
            let t = i as f64 + 1.0;
            t * t * 0.37 + ((i * 7919) % 101) as f64 * 0.013 + t * 1e-6
        })
        .collect();
    let x: Vec<f64> = y
        .iter()
        .enumerate()
        .map(|(i, v)| 0.25 * v + ((i * 104_729) % 61) as f64)
        .collect();
    Population::new(format!("synthetic-{size}"), y, x).expect("valid synthetic population")
}
