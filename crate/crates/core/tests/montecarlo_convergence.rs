mod common;

use common::{all_samples, p5, random_population, rng};
use medest_core::enumeration::{exact_estimator_mse, exact_sampling_distribution};
use medest_core::{mc_run, preset, McConfig, PresetId};

/// Standard error of the empirical mean of `values` over `reps` draws from
/// the exact sampling distribution.
fn se_of_mean(values: &[f64], reps: f64) -> f64 {
    let c = values.len() as f64;
    let mean = values.iter().sum::<f64>() / c;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / c;
    (var / reps).sqrt()
}

#[test]
fn empirical_moments_converge_to_enumeration() {
    const REPS: u64 = 200_000;
    let mut r = rng(8);
    for (size, n, seed) in [(9, 3, 1u64), (12, 5, 2), (10, 4, 3)] {
        let pop = random_population(&mut r, size);
        let ds = exact_sampling_distribution(&pop, n, 1).unwrap();
        let mc = mc_run(&pop, &[], ds.Mbar, &McConfig::new(n, REPS, seed)).unwrap();
        let samples = all_samples(&pop, n);
        let reps = REPS as f64;

        let ys: Vec<f64> = samples.iter().map(|s| s[0]).collect();
        let ms: Vec<f64> = samples.iter().map(|s| s[2]).collect();
        let sq_y: Vec<f64> = ys.iter().map(|v| (v - ds.mean_ybar).powi(2)).collect();
        let sq_m: Vec<f64> = ms.iter().map(|v| (v - ds.Mbar).powi(2)).collect();
        let cross: Vec<f64> = samples
            .iter()
            .map(|s| (s[0] - ds.mean_ybar) * (s[2] - ds.Mbar))
            .collect();

        let checks = [
            (
                "mean_ybar",
                mc.summary.mean_ybar,
                ds.mean_ybar,
                se_of_mean(&ys, reps),
            ),
            ("Mbar", mc.summary.Mbar, ds.Mbar, se_of_mean(&ms, reps)),
            ("Vybar", mc.summary.Vybar, ds.Vybar, se_of_mean(&sq_y, reps)),
            ("Vm", mc.summary.Vm, ds.Vm, se_of_mean(&sq_m, reps)),
            (
                "Cov_ym",
                mc.summary.Cov_ym,
                ds.Cov_ym,
                se_of_mean(&cross, reps),
            ),
        ];
        for (name, got, want, se) in checks {
            assert!(
                (got - want).abs() <= 3.0 * se,
                "N={size} n={n} {name}: {got} vs {want} (se {se})"
            );
        }
    }
}

#[test]
fn empirical_mse_converges_for_p5() {
    let pop = p5();
    let specs = [
        preset(PresetId::Q1, 0.0, 1.0).unwrap(),
        preset(PresetId::Q2, 0.0, 1.0).unwrap(),
        preset(PresetId::Q5, 0.0, 1.0).unwrap(),
    ];
    let cfg = McConfig::new(3, 200_000, 42);
    let mc = mc_run(&pop, &specs, 3.0, &cfg).unwrap();
    for spec in &specs {
        let exact = exact_estimator_mse(&pop, 3, spec, 3.0, 1).unwrap();
        let se = mc.standard_error_mse[&spec.name];
        assert!(se > 0.0);
        assert!(
            (mc.mse[&spec.name] - exact).abs() <= 3.0 * se,
            "{}",
            spec.name
        );
    }
}

#[test]
fn multi_worker_runs_are_reproducible_and_consistent() {
    let pop = p5();
    let q2 = [preset(PresetId::Q2, 0.0, 1.0).unwrap()];
    let cfg = McConfig {
        workers: 4,
        ..McConfig::new(3, 200_000, 7)
    };
    let a = mc_run(&pop, &q2, 3.0, &cfg).unwrap();
    assert_eq!(a, mc_run(&pop, &q2, 3.0, &cfg).unwrap());
    let single = mc_run(&pop, &q2, 3.0, &McConfig::new(3, 200_000, 7)).unwrap();
    assert_ne!(a.mse["q2"], single.mse["q2"]);
    assert!((a.mse["q2"] - 0.178_472_2).abs() <= 3.0 * a.standard_error_mse["q2"]);
}
