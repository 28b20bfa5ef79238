//! Exact SRSWOR sampling distribution of `(ȳ, x̄, m)` by visiting every
//! n-subset of the population.
//!
//! Units are re-ordered by ascending `y` before enumeration. Subsets are
//! visited as increasing index lists, so the selected y-values come out
//! already sorted and the sample median is read off directly. Sums of y and
//! x are kept as prefix sums along the cursor and only the suffix after the
//! changed position is recomputed on each step.
//!
//! The rank space `0..C(N, n)` is split into one contiguous range per
//! worker. Each worker accumulates into its own [`MomentAccumulator`]; the
//! partial results are merged in worker order, so a fixed worker count gives
//! bit-identical output.

mod combin;
mod moments;

use std::thread;

use serde::{Deserialize, Serialize};

pub use combin::{binomial, unrank_combination, CombinationCursor, MAX_COUNT};
pub use moments::{MomentAccumulator, Moments3};

use crate::error::{domain, Error, Result};
use crate::estimators::EstimatorSpec;
use crate::population::Population;
use combin::checked_binomial;
use moments::ShiftedBlock;

/// Samples folded into a shifted block before it is merged.
const BLOCK: u64 = 1 << 12;

/// Median of a list: the middle order statistic for odd length, the mean of
/// the two central order statistics for even length.
pub fn sample_median(values: &[f64]) -> Result<f64> {
    let mut scratch = values.to_vec();
    sample_median_in_place(&mut scratch)
}

/// Like [`sample_median`] but reorders `values` instead of copying.
pub fn sample_median_in_place(values: &mut [f64]) -> Result<f64> {
    let n = values.len();
    if n == 0 {
        return Err(domain("median of an empty list"));
    }
    let h = n / 2;
    let (below, mid, _) = values.select_nth_unstable_by(h, f64::total_cmp);
    let upper = *mid;
    if n % 2 == 1 {
        return Ok(upper);
    }
    let lower = below
        .iter()
        .copied()
        .max_by(f64::total_cmp)
        .expect("n >= 2");
    Ok(0.5 * (lower + upper))
}

/// Moments of the sampling distribution of `(ȳ, x̄, m)`.
///
/// Variances and covariances use the divide-by-count divisor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[allow(non_snake_case)]
pub struct DistributionSummary {
    pub n: usize,
    /// `C(N, n)` for exact runs, the replicate count for Monte Carlo runs.
    pub sample_count: u64,
    /// Mean of the sample means of y.
    pub mean_ybar: f64,
    /// Mean of the sample means of x.
    pub mean_xbar: f64,
    /// Mean of the sample medians of y.
    pub Mbar: f64,
    pub Vybar: f64,
    pub Vxbar: f64,
    pub Vm: f64,
    pub Cov_ym: f64,
    pub Cov_yx: f64,
    /// Correlation of `ȳ` and `m`; `None` when either variance is zero.
    pub rho_ym: Option<f64>,
}

impl DistributionSummary {
    pub(crate) fn from_moments(n: usize, m: &Moments3) -> Self {
        let vybar = m.cov[0][0];
        let vm = m.cov[2][2];
        let cov_ym = m.cov[0][2];
        let rho_ym =
            (vybar > 0.0 && vm > 0.0).then(|| (cov_ym / (vybar * vm).sqrt()).clamp(-1.0, 1.0));
        Self {
            n,
            sample_count: m.count,
            mean_ybar: m.mean[0],
            mean_xbar: m.mean[1],
            Mbar: m.mean[2],
            Vybar: vybar,
            Vxbar: m.cov[1][1],
            Vm: vm,
            Cov_ym: cov_ym,
            Cov_yx: m.cov[0][1],
            rho_ym,
        }
    }
}

/// Population re-ordered by ascending y.
struct SortedPopulation {
    y: Vec<f64>,
    x: Vec<f64>,
    /// Sorted position → original unit index.
    unit: Vec<usize>,
}

impl SortedPopulation {
    fn new(pop: &Population) -> Self {
        let mut unit: Vec<usize> = (0..pop.len()).collect();
        unit.sort_by(|&i, &j| pop.y()[i].total_cmp(&pop.y()[j]));
        Self {
            y: unit.iter().map(|&i| pop.y()[i]).collect(),
            x: unit.iter().map(|&i| pop.x()[i]).collect(),
            unit,
        }
    }

    fn len(&self) -> usize {
        self.y.len()
    }

    fn units_of(&self, positions: &[usize]) -> Vec<usize> {
        positions.iter().map(|&p| self.unit[p]).collect()
    }
}

/// One visited sample, in sorted positions.
struct SampleView<'a> {
    positions: &'a [usize],
    ybar: f64,
    xbar: f64,
    median: f64,
}

/// Visits the samples with ranks `start..start + count`.
#[inline(always)]
fn walk<F: FnMut(&SampleView<'_>)>(
    pop: &SortedPopulation,
    n: usize,
    start: u64,
    count: u64,
    mut visit: F,
) -> Result<()> {
    if count == 0 {
        return Ok(());
    }
    let mut cursor = CombinationCursor::at_rank(pop.len(), n, start)?;
    let (ys, xs) = (&pop.y[..], &pop.x[..]);
    // prefix_y[j] = Σ y over the first j selected positions.
    let mut prefix_y = vec![0.0; n];
    let mut prefix_x = vec![0.0; n];
    let refresh = |from: usize, idx: &[usize], py: &mut [f64], px: &mut [f64]| {
        for j in from.max(1)..n {
            py[j] = py[j - 1] + ys[idx[j - 1]];
            px[j] = px[j - 1] + xs[idx[j - 1]];
        }
    };
    refresh(1, cursor.indices(), &mut prefix_y, &mut prefix_x);

    let inv_n = 1.0 / n as f64;
    let h = n / 2;
    let odd = n % 2 == 1;
    let last = n - 1;
    let mut seen = 0u64;
    loop {
        let idx = cursor.indices();
        let tail = idx[last];
        let median = if odd {
            ys[idx[h]]
        } else {
            0.5 * (ys[idx[h - 1]] + ys[idx[h]])
        };
        visit(&SampleView {
            positions: idx,
            ybar: (prefix_y[last] + ys[tail]) * inv_n,
            xbar: (prefix_x[last] + xs[tail]) * inv_n,
            median,
        });
        seen += 1;
        if seen == count {
            return Ok(());
        }
        match cursor.advance() {
            Some(changed) if changed < last => {
                refresh(changed + 1, cursor.indices(), &mut prefix_y, &mut prefix_x)
            }
            Some(_) => {}
            None => return Err(domain("rank range runs past the last subset")),
        }
    }
}

/// Splits `0..total` into `workers` contiguous `(start, count)` ranges.
fn partition(total: u64, workers: usize) -> Vec<(u64, u64)> {
    let w = workers as u128;
    (0..w)
        .map(|i| {
            let lo = (total as u128 * i / w) as u64;
            let hi = (total as u128 * (i + 1) / w) as u64;
            (lo, hi - lo)
        })
        .filter(|&(_, count)| count > 0)
        .collect()
}

/// Runs `job` on each rank range, one scoped thread per range, and returns
/// the results in range order.
fn run_partitioned<T, F>(total: u64, workers: usize, job: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64, u64) -> Result<T> + Sync,
{
    let ranges = partition(total, workers.max(1));
    if ranges.len() <= 1 {
        return ranges.into_iter().map(|(s, c)| job(s, c)).collect();
    }
    let job = &job;
    thread::scope(|scope| {
        let handles: Vec<_> = ranges
            .iter()
            .map(|&(s, c)| scope.spawn(move || job(s, c)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("enumeration worker panicked"))
            .collect()
    })
}

fn check_sample_size(pop: &Population, n: usize) -> Result<u64> {
    if n < 1 || n > pop.len() {
        return Err(domain(format!(
            "sample size {n} must lie in 1..={}",
            pop.len()
        )));
    }
    checked_binomial(pop.len(), n)
}

/// Exact moments of `(ȳ, x̄, m)` over all `C(N, n)` samples.
///
/// Deterministic for a fixed `workers`; different worker counts agree up to
/// floating-point reassociation.
pub fn exact_sampling_distribution(
    pop: &Population,
    n: usize,
    workers: usize,
) -> Result<DistributionSummary> {
    let total = check_sample_size(pop, n)?;
    let sorted = SortedPopulation::new(pop);
    let shift = [pop.y_mean(), pop.x_mean(), sorted.y[(sorted.len() - 1) / 2]];

    let parts = run_partitioned(total, workers, |start, count| {
        let mut acc = MomentAccumulator::new();
        let mut block = ShiftedBlock::new(shift);
        walk(&sorted, n, start, count, |s| {
            block.push([s.ybar, s.xbar, s.median]);
            if block.count == BLOCK {
                acc.merge_shifted(&block);
                block.clear();
            }
        })?;
        acc.merge_shifted(&block);
        Ok(acc)
    })?;

    let mut total_acc = MomentAccumulator::new();
    for part in &parts {
        total_acc.merge(part);
    }
    Ok(DistributionSummary::from_moments(n, &total_acc.finalize()))
}

/// Exact finite-sample bias and MSE of one estimator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExactEstimatorMoments {
    /// `E[t] − Ȳ`.
    pub bias: f64,
    /// `E[(t − Ȳ)²]`.
    pub mse: f64,
}

/// Exact bias and MSE of `spec` over all samples, with the estimator's
/// known constant `mbar` (mean of sample medians for this `(pop, n)`).
pub fn exact_estimator_moments(
    pop: &Population,
    n: usize,
    spec: &EstimatorSpec,
    mbar: f64,
    workers: usize,
) -> Result<ExactEstimatorMoments> {
    let total = check_sample_size(pop, n)?;
    let sorted = SortedPopulation::new(pop);
    let ybar_pop = pop.y_mean();

    let parts = run_partitioned(total, workers, |start, count| {
        let mut sums = (0.0f64, 0.0f64);
        let mut block = (0.0f64, 0.0f64, 0u64);
        let mut failure = None;
        walk(&sorted, n, start, count, |s| {
            if failure.is_some() {
                return;
            }
            match spec.evaluate(s.ybar, s.median, mbar) {
                Ok(t) => {
                    let e = t - ybar_pop;
                    block.0 += e;
                    block.1 += e * e;
                    block.2 += 1;
                    if block.2 == BLOCK {
                        sums.0 += block.0;
                        sums.1 += block.1;
                        block = (0.0, 0.0, 0);
                    }
                }
                Err(e) => {
                    failure = Some(Error::Evaluation {
                        estimator: spec.name.clone(),
                        sample: sorted.units_of(s.positions),
                        reason: e.to_string(),
                    })
                }
            }
        })?;
        match failure {
            Some(e) => Err(e),
            None => Ok((sums.0 + block.0, sums.1 + block.1)),
        }
    })?;

    let (err_sum, sq_sum) = parts
        .iter()
        .fold((0.0, 0.0), |acc, p| (acc.0 + p.0, acc.1 + p.1));
    let count = total as f64;
    Ok(ExactEstimatorMoments {
        bias: err_sum / count,
        mse: sq_sum / count,
    })
}

/// Exact MSE of `spec`; see [`exact_estimator_moments`].
pub fn exact_estimator_mse(
    pop: &Population,
    n: usize,
    spec: &EstimatorSpec,
    mbar: f64,
    workers: usize,
) -> Result<f64> {
    exact_estimator_moments(pop, n, spec, mbar, workers).map(|m| m.mse)
}

/// Sampling law of the median for odd `n`, from order statistics.
#[derive(Debug, Clone, PartialEq)]
#[allow(non_snake_case)]
pub struct MedianDistribution {
    pub Mbar: f64,
    pub Vm: f64,
    pub Cov_ym: f64,
    /// `P(m = y₍ᵢ₎)` indexed by ascending-y position.
    pub probabilities: Vec<f64>,
}

/// Number of samples whose median is the unit at each ascending-y
/// position: `C(i, h)·C(N−1−i, h)` with `h = (n−1)/2` (0-based `i`).
pub fn median_counts(population: usize, n: usize) -> Result<Vec<u64>> {
    if n.is_multiple_of(2) || n > population {
        return Err(domain(format!(
            "median counts need odd n ≤ N (n = {n}, N = {population})"
        )));
    }
    checked_binomial(population, n)?;
    let h = (n - 1) / 2;
    (0..population)
        .map(|i| {
            let below = binomial(i, h).expect("bounded by C(N, n)");
            let above = binomial(population - 1 - i, h).expect("bounded by C(N, n)");
            Ok(below * above)
        })
        .collect()
}

fn ln_binomial(ln_fact: &[f64], population: usize, k: usize) -> f64 {
    ln_fact[population] - ln_fact[k] - ln_fact[population - k]
}

fn median_probabilities(population: usize, n: usize) -> Vec<f64> {
    if let Ok(counts) = median_counts(population, n) {
        let total = binomial(population, n).expect("checked by median_counts") as f64;
        return counts.iter().map(|&c| c as f64 / total).collect();
    }
    // C(N, n) too large for exact counts: work in log space.
    let mut ln_fact = vec![0.0; population + 1];
    for k in 1..=population {
        ln_fact[k] = ln_fact[k - 1] + (k as f64).ln();
    }
    let h = (n - 1) / 2;
    let ln_total = ln_binomial(&ln_fact, population, n);
    (0..population)
        .map(|i| {
            if i < h || population - 1 - i < h {
                return 0.0;
            }
            (ln_binomial(&ln_fact, i, h) + ln_binomial(&ln_fact, population - 1 - i, h) - ln_total)
                .exp()
        })
        .collect()
}

/// `(M̄, V(m), Cov(ȳ, m))` in O(N log N) for odd `n` and distinct y-values.
///
/// Given `m = y₍ᵢ₎`, the other `h` units below and `h` above are uniform
/// subsets of their sides, so `E[ȳ | m = y₍ᵢ₎]` follows from prefix sums.
pub fn median_distribution_fast(pop: &Population, n: usize) -> Result<MedianDistribution> {
    if n.is_multiple_of(2) {
        return Err(domain(format!("the fast median path needs odd n, got {n}")));
    }
    if n > pop.len() {
        return Err(domain(format!(
            "sample size {n} must lie in 1..={}",
            pop.len()
        )));
    }
    let sorted = SortedPopulation::new(pop);
    if sorted.y.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::TiesPresent);
    }
    let population = sorted.len();
    let ys = &sorted.y;
    let h = (n - 1) / 2;
    let probabilities = median_probabilities(population, n);

    let mbar: f64 = probabilities.iter().zip(ys).map(|(p, y)| p * y).sum();
    let vm: f64 = probabilities
        .iter()
        .zip(ys)
        .map(|(p, y)| p * (y - mbar) * (y - mbar))
        .sum();

    let ybar_pop = pop.y_mean();
    let mut prefix = vec![0.0; population + 1];
    for i in 0..population {
        prefix[i + 1] = prefix[i] + ys[i];
    }
    let mut cov = 0.0;
    for (i, (&p, &yi)) in probabilities.iter().zip(ys).enumerate() {
        if p == 0.0 {
            continue;
        }
        let below = i as f64;
        let above = (population - 1 - i) as f64;
        let mut cond_sum = yi;
        if h > 0 {
            cond_sum += h as f64 * prefix[i] / below;
            cond_sum += h as f64 * (prefix[population] - prefix[i + 1]) / above;
        }
        let cond_mean = cond_sum / n as f64;
        cov += p * (yi - mbar) * (cond_mean - ybar_pop);
    }

    Ok(MedianDistribution {
        Mbar: mbar,
        Vm: vm,
        Cov_ym: cov,
        probabilities,
    })
}
