//! Binomial counts and lexicographic n-subsets of `{0, …, N−1}`.

use crate::error::{domain, Error, Result};

/// Largest count the enumeration accepts (`2⁶³ − 1`).
pub const MAX_COUNT: u64 = i64::MAX as u64;

/// `C(N, n)`, or `None` when it exceeds [`MAX_COUNT`].
pub fn binomial(population: usize, n: usize) -> Option<u64> {
    if n > population {
        return Some(0);
    }
    let k = n.min(population - n) as u128;
    let big = population as u128;
    let mut acc: u128 = 1;
    for i in 1..=k {
        // acc·(N−k+i) is divisible by i; acc ≤ MAX_COUNT so the product fits.
        acc = acc * (big - k + i) / i;
        if acc > MAX_COUNT as u128 {
            return None;
        }
    }
    Some(acc as u64)
}

pub(crate) fn checked_binomial(population: usize, n: usize) -> Result<u64> {
    binomial(population, n).ok_or(Error::Capacity {
        population,
        sample: n,
    })
}

/// The `rank`-th n-subset of `{0, …, N−1}` in lexicographic order.
pub fn unrank_combination(rank: u64, population: usize, n: usize) -> Result<Vec<usize>> {
    let total = checked_binomial(population, n)?;
    if rank >= total {
        return Err(domain(format!(
            "rank {rank} out of range for C({population}, {n}) = {total}"
        )));
    }
    let mut out = Vec::with_capacity(n);
    let mut rank = rank;
    let mut next = 0usize;
    for slot in 0..n {
        let remaining = n - slot - 1;
        let mut c = next;
        loop {
            // Subsets whose `slot`-th element is `c`; bounded by `total`.
            let block = binomial(population - c - 1, remaining).expect("bounded by total");
            if rank < block {
                break;
            }
            rank -= block;
            c += 1;
        }
        out.push(c);
        next = c + 1;
    }
    Ok(out)
}

/// In-place cursor over n-subsets in lexicographic order.
#[derive(Debug, Clone)]
pub struct CombinationCursor {
    population: usize,
    indices: Vec<usize>,
}

impl CombinationCursor {
    /// Cursor positioned at the first subset `{0, …, n−1}`.
    pub fn new(population: usize, n: usize) -> Result<Self> {
        if n == 0 || n > population {
            return Err(domain(format!(
                "sample size {n} must lie in 1..={population}"
            )));
        }
        Ok(Self {
            population,
            indices: (0..n).collect(),
        })
    }

    /// Cursor positioned at the subset with the given lexicographic rank.
    pub fn at_rank(population: usize, n: usize, rank: u64) -> Result<Self> {
        let mut c = Self::new(population, n)?;
        c.indices = unrank_combination(rank, population, n)?;
        Ok(c)
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    /// Steps to the lexicographic successor. Returns the leftmost position
    /// that changed, or `None` (leaving the cursor untouched) at the last
    /// subset.
    #[inline]
    pub fn advance(&mut self) -> Option<usize> {
        let n = self.indices.len();
        let limit = self.population - n;
        let last = n - 1;
        if self.indices[last] < limit + last {
            self.indices[last] += 1;
            return Some(last);
        }
        let mut i = last;
        while i > 0 {
            i -= 1;
            if self.indices[i] < limit + i {
                self.indices[i] += 1;
                for j in i + 1..n {
                    self.indices[j] = self.indices[j - 1] + 1;
                }
                return Some(i);
            }
        }
        None
    }
}
