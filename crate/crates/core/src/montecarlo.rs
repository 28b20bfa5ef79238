//! Seeded Monte Carlo approximation of the SRSWOR sampling distribution and
//! of estimator MSE, for populations too large to enumerate.
//!
//! The generator is xoshiro256++ seeded through SplitMix64
//! (`Xoshiro256PlusPlus::seed_from_u64`). Worker `i` uses the base stream
//! advanced by `i` calls to `jump()` (2¹²⁸ steps each) and owns a contiguous
//! block of replicates; results are merged in worker order.

use std::collections::BTreeMap;
use std::thread;

use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;
use serde::{Deserialize, Serialize};

use crate::enumeration::{sample_median_in_place, DistributionSummary, MomentAccumulator};
use crate::error::{domain, Result};
use crate::estimators::EstimatorSpec;
use crate::population::Population;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct McConfig {
    pub replicates: u64,
    pub seed: u64,
    pub n: usize,
    /// Number of independent sub-streams; results depend on this value.
    pub workers: usize,
}

impl McConfig {
    pub fn new(n: usize, replicates: u64, seed: u64) -> Self {
        Self {
            replicates,
            seed,
            n,
            workers: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McResult {
    /// Empirical moments with divide-by-replicates divisors.
    pub summary: DistributionSummary,
    /// Mean of `(t − Ȳ)²` over the replicates where `t` was defined.
    pub mse: BTreeMap<String, f64>,
    pub standard_error_mse: BTreeMap<String, f64>,
    /// Replicates on which the estimator could not be evaluated.
    pub failures: BTreeMap<String, u64>,
}

/// Uniform n-subset of `{0, …, N−1}` by a partial Fisher–Yates shuffle,
/// returned in ascending order.
pub fn draw_srswor<R: Rng + ?Sized>(
    rng: &mut R,
    population: usize,
    n: usize,
) -> Result<Vec<usize>> {
    let mut sampler = SrsworSampler::new(population, n)?;
    Ok(sampler.draw(rng).to_vec())
}

/// Reusable scratch space for repeated SRSWOR draws.
struct SrsworSampler {
    perm: Vec<usize>,
    n: usize,
}

impl SrsworSampler {
    fn new(population: usize, n: usize) -> Result<Self> {
        if n == 0 || n > population {
            return Err(domain(format!(
                "sample size {n} must lie in 1..={population}"
            )));
        }
        Ok(Self {
            perm: (0..population).collect(),
            n,
        })
    }

    fn draw<R: Rng + ?Sized>(&mut self, rng: &mut R) -> &[usize] {
        let len = self.perm.len();
        for (i, p) in self.perm.iter_mut().enumerate() {
            *p = i;
        }
        for i in 0..self.n {
            let j = rng.random_range(i..len);
            self.perm.swap(i, j);
        }
        let sample = &mut self.perm[..self.n];
        sample.sort_unstable();
        sample
    }
}

/// Running mean and sum of squared deviations of a scalar stream.
#[derive(Debug, Clone, Copy, Default)]
struct ScalarStats {
    count: u64,
    mean: f64,
    m2: f64,
}

impl ScalarStats {
    fn push(&mut self, v: f64) {
        self.count += 1;
        let d = v - self.mean;
        self.mean += d / self.count as f64;
        self.m2 += d * (v - self.mean);
    }

    fn merge(&mut self, other: &Self) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *other;
            return;
        }
        let (na, nb) = (self.count as f64, other.count as f64);
        let n = na + nb;
        let d = other.mean - self.mean;
        self.m2 += other.m2 + d * d * na * nb / n;
        self.mean += d * nb / n;
        self.count += other.count;
    }

    fn standard_error(&self) -> f64 {
        if self.count < 2 {
            return 0.0;
        }
        let n = self.count as f64;
        (self.m2 / (n - 1.0) / n).sqrt()
    }
}

struct WorkerOutput {
    moments: MomentAccumulator,
    errors: Vec<ScalarStats>,
    failures: Vec<u64>,
}

fn worker_rng(seed: u64, worker: usize) -> Xoshiro256PlusPlus {
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
    for _ in 0..worker {
        rng.jump();
    }
    rng
}

fn run_worker(
    pop: &Population,
    specs: &[EstimatorSpec],
    mbar: f64,
    n: usize,
    replicates: u64,
    mut rng: Xoshiro256PlusPlus,
) -> Result<WorkerOutput> {
    let mut sampler = SrsworSampler::new(pop.len(), n)?;
    let mut scratch = vec![0.0; n];
    let ybar_pop = pop.y_mean();
    let inv_n = 1.0 / n as f64;
    let mut out = WorkerOutput {
        moments: MomentAccumulator::new(),
        errors: vec![ScalarStats::default(); specs.len()],
        failures: vec![0; specs.len()],
    };
    for _ in 0..replicates {
        let sample = sampler.draw(&mut rng);
        let (mut sy, mut sx) = (0.0, 0.0);
        for (slot, &u) in scratch.iter_mut().zip(sample) {
            *slot = pop.y()[u];
            sy += pop.y()[u];
            sx += pop.x()[u];
        }
        let (ybar, xbar) = (sy * inv_n, sx * inv_n);
        let median = sample_median_in_place(&mut scratch)?;
        out.moments.push([ybar, xbar, median]);
        for (i, spec) in specs.iter().enumerate() {
            match spec.evaluate(ybar, median, mbar) {
                Ok(t) => out.errors[i].push((t - ybar_pop).powi(2)),
                Err(_) => out.failures[i] += 1,
            }
        }
    }
    Ok(out)
}

/// Draws `cfg.replicates` SRSWOR samples and returns empirical moments of
/// `(ȳ, x̄, m)` plus the empirical MSE of each estimator.
///
/// `mbar` is the known mean of sample medians used inside the estimators;
/// the empirical mean of medians is reported separately in the summary.
pub fn mc_run(
    pop: &Population,
    specs: &[EstimatorSpec],
    mbar: f64,
    cfg: &McConfig,
) -> Result<McResult> {
    if cfg.replicates == 0 {
        return Err(domain("at least one replicate is required"));
    }
    if cfg.n == 0 || cfg.n > pop.len() {
        return Err(domain(format!(
            "sample size {} must lie in 1..={}",
            cfg.n,
            pop.len()
        )));
    }
    let workers = cfg.workers.max(1) as u64;
    let blocks: Vec<u64> = (0..workers)
        .map(|i| {
            let lo = cfg.replicates as u128 * i as u128 / workers as u128;
            let hi = cfg.replicates as u128 * (i + 1) as u128 / workers as u128;
            (hi - lo) as u64
        })
        .collect();

    let outputs: Vec<WorkerOutput> = if workers == 1 {
        vec![run_worker(
            pop,
            specs,
            mbar,
            cfg.n,
            cfg.replicates,
            worker_rng(cfg.seed, 0),
        )?]
    } else {
        thread::scope(|scope| {
            let handles: Vec<_> = blocks
                .iter()
                .enumerate()
                .map(|(i, &reps)| {
                    let rng = worker_rng(cfg.seed, i);
                    scope.spawn(move || run_worker(pop, specs, mbar, cfg.n, reps, rng))
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("Monte Carlo worker panicked"))
                .collect::<Result<Vec<_>>>()
        })?
    };

    let mut moments = MomentAccumulator::new();
    let mut errors = vec![ScalarStats::default(); specs.len()];
    let mut failures = vec![0u64; specs.len()];
    for out in &outputs {
        moments.merge(&out.moments);
        for i in 0..specs.len() {
            errors[i].merge(&out.errors[i]);
            failures[i] += out.failures[i];
        }
    }

    let mut result = McResult {
        summary: DistributionSummary::from_moments(cfg.n, &moments.finalize()),
        mse: BTreeMap::new(),
        standard_error_mse: BTreeMap::new(),
        failures: BTreeMap::new(),
    };
    for ((spec, stats), fails) in specs.iter().zip(&errors).zip(&failures) {
        let mse = if stats.count > 0 {
            stats.mean
        } else {
            f64::NAN
        };
        result.mse.insert(spec.name.clone(), mse);
        result
            .standard_error_mse
            .insert(spec.name.clone(), stats.standard_error());
        result.failures.insert(spec.name.clone(), *fails);
    }
    Ok(result)
}
