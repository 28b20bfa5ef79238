//! Mergeable first and second moments of a 3-vector stream.

/// Number of distinct entries of a symmetric 3x3 matrix.
const PAIRS: usize = 6;
/// Upper-triangle index pairs in storage order.
const PAIR_INDEX: [(usize, usize); PAIRS] = [(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)];

/// Running means and central co-moment sums for a stream of 3-vectors.
///
/// Updates and merges use the pairwise (Chan et al.) formulas, so chunks
/// accumulated independently combine without loss of precision.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MomentAccumulator {
    count: u64,
    mean: [f64; 3],
    comoment: [f64; PAIRS],
}

/// Population-divisor moments extracted from a [`MomentAccumulator`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments3 {
    pub count: u64,
    pub mean: [f64; 3],
    /// Divide-by-count covariance matrix.
    pub cov: [[f64; 3]; 3],
}

impl MomentAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn push(&mut self, v: [f64; 3]) {
        self.count += 1;
        let n = self.count as f64;
        let delta = [
            v[0] - self.mean[0],
            v[1] - self.mean[1],
            v[2] - self.mean[2],
        ];
        for (m, d) in self.mean.iter_mut().zip(&delta) {
            *m += d / n;
        }
        let after = [
            v[0] - self.mean[0],
            v[1] - self.mean[1],
            v[2] - self.mean[2],
        ];
        for (c, &(i, j)) in self.comoment.iter_mut().zip(&PAIR_INDEX) {
            *c += delta[i] * after[j];
        }
    }

    pub fn merge(&mut self, other: &Self) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *other;
            return;
        }
        let na = self.count as f64;
        let nb = other.count as f64;
        let n = na + nb;
        let delta = [
            other.mean[0] - self.mean[0],
            other.mean[1] - self.mean[1],
            other.mean[2] - self.mean[2],
        ];
        let scale = na * nb / n;
        for ((c, oc), &(i, j)) in self
            .comoment
            .iter_mut()
            .zip(&other.comoment)
            .zip(&PAIR_INDEX)
        {
            *c += oc + delta[i] * delta[j] * scale;
        }
        for (m, d) in self.mean.iter_mut().zip(&delta) {
            *m += d * nb / n;
        }
        self.count += other.count;
    }

    /// Folds a block of sums taken about a fixed shift into this accumulator.
    pub(crate) fn merge_shifted(&mut self, block: &ShiftedBlock) {
        if block.count == 0 {
            return;
        }
        let c = block.count as f64;
        let mut part = MomentAccumulator {
            count: block.count,
            mean: [0.0; 3],
            comoment: [0.0; PAIRS],
        };
        for k in 0..3 {
            part.mean[k] = block.shift[k] + block.sum[k] / c;
        }
        for (k, &(i, j)) in PAIR_INDEX.iter().enumerate() {
            part.comoment[k] = block.cross[k] - block.sum[i] * block.sum[j] / c;
        }
        self.merge(&part);
    }

    pub fn finalize(&self) -> Moments3 {
        let mut cov = [[0.0; 3]; 3];
        if self.count > 0 {
            let n = self.count as f64;
            for (c, &(i, j)) in self.comoment.iter().zip(&PAIR_INDEX) {
                cov[i][j] = c / n;
                cov[j][i] = c / n;
            }
        }
        Moments3 {
            count: self.count,
            mean: self.mean,
            cov,
        }
    }
}

/// Plain sums about a fixed shift; cheap per-sample updates for the hot loop.
#[derive(Debug, Clone, Copy)]
pub(crate) struct ShiftedBlock {
    pub count: u64,
    shift: [f64; 3],
    sum: [f64; 3],
    cross: [f64; PAIRS],
}

impl ShiftedBlock {
    pub fn new(shift: [f64; 3]) -> Self {
        Self {
            count: 0,
            shift,
            sum: [0.0; 3],
            cross: [0.0; PAIRS],
        }
    }

    #[inline(always)]
    pub fn push(&mut self, v: [f64; 3]) {
        let d = [
            v[0] - self.shift[0],
            v[1] - self.shift[1],
            v[2] - self.shift[2],
        ];
        self.count += 1;
        self.sum[0] += d[0];
        self.sum[1] += d[1];
        self.sum[2] += d[2];
        self.cross[0] += d[0] * d[0];
        self.cross[1] += d[0] * d[1];
        self.cross[2] += d[0] * d[2];
        self.cross[3] += d[1] * d[1];
        self.cross[4] += d[1] * d[2];
        self.cross[5] += d[2] * d[2];
    }

    pub fn clear(&mut self) {
        *self = Self::new(self.shift);
    }
}
