//! First-order bias and MSE of the estimator family, the MSE-optimal
//! composite weight, the unique-weight solve and relative efficiency.

use serde::{Deserialize, Serialize};

use crate::enumeration::DistributionSummary;
use crate::error::{domain, Error, Result};
use crate::estimators::EstimatorSpec;

/// Relative (coefficient-style) second moments and the two ratios used by
/// the MSE formulas.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelativeMoments {
    /// `V(m) / M̄²`
    pub cmm: f64,
    /// `Cov(ȳ, m) / (Ȳ·M̄)`
    pub cym: f64,
    /// `V(x̄) / X̄²`
    pub cxx: f64,
    /// `Cov(ȳ, x̄) / (X̄·Ȳ)`
    pub cyx: f64,
    /// `Ȳ / M̄`
    pub r: f64,
    /// `Ȳ / X̄`
    pub r_prime: f64,
}

#[allow(non_snake_case)]
pub fn relative_moments(ds: &DistributionSummary, Ybar: f64, Xbar: f64) -> Result<RelativeMoments> {
    if Ybar == 0.0 || Xbar == 0.0 || ds.Mbar == 0.0 {
        return Err(domain(format!(
            "relative moments need non-zero means (Ȳ = {Ybar}, X̄ = {Xbar}, M̄ = {})",
            ds.Mbar
        )));
    }
    Ok(RelativeMoments {
        cmm: ds.Vm / (ds.Mbar * ds.Mbar),
        cym: ds.Cov_ym / (Ybar * ds.Mbar),
        cxx: ds.Vxbar / (Xbar * Xbar),
        cyx: ds.Cov_yx / (Xbar * Ybar),
        r: Ybar / ds.Mbar,
        r_prime: Ybar / Xbar,
    })
}

/// `w = α·g·w₁ + (δ/2)·w₂`.
pub fn composite_w(spec: &EstimatorSpec) -> f64 {
    spec.alpha * spec.g * spec.w1 + 0.5 * spec.delta * spec.w2
}

/// Second-order coefficient of `e₁²` contributed by `t₂`: `δ/4 + δ²/8`.
fn t2_curvature(delta: f64) -> f64 {
    delta / 4.0 + delta * delta / 8.0
}

/// First-order bias of `t₁`: `Ȳ·g·α·ν·[α·ν·(g+1)/2·C_mm − C_ym]`.
#[allow(non_snake_case)]
pub fn bias_t1(Ybar: f64, g: f64, alpha: f64, nu: f64, rm: &RelativeMoments) -> f64 {
    Ybar * g * alpha * nu * (alpha * nu * (g + 1.0) / 2.0 * rm.cmm - rm.cym)
}

/// First-order bias of `t₂`: `Ȳ·[(δν²/4 + δ²ν²/8)·C_mm − (δν/2)·C_ym]`.
#[allow(non_snake_case)]
pub fn bias_t2(Ybar: f64, delta: f64, nu: f64, rm: &RelativeMoments) -> f64 {
    Ybar * (nu * nu * t2_curvature(delta) * rm.cmm - delta * nu / 2.0 * rm.cym)
}

/// First-order bias of the combined estimator.
#[allow(non_snake_case)]
pub fn bias_t(Ybar: f64, spec: &EstimatorSpec, nu: f64, rm: &RelativeMoments) -> f64 {
    let curvature = spec.w1 * spec.g * (spec.g + 1.0) / 2.0 * spec.alpha * spec.alpha
        + t2_curvature(spec.delta) * spec.w2;
    Ybar * (nu * nu * curvature * rm.cmm - nu * composite_w(spec) * rm.cym)
}

/// Bias of the classical ratio estimator `ȳ·X̄/x̄`: `Ȳ·(C_xx − C_yx)`.
#[allow(non_snake_case)]
pub fn bias_classical_ratio(Ybar: f64, rm: &RelativeMoments) -> f64 {
    Ybar * (rm.cxx - rm.cyx)
}

/// First-order MSE: `V(ȳ) + ν²R²w²V(m) − 2νRw·Cov(ȳ, m)`.
pub fn mse_t(vybar: f64, vm: f64, cov_ym: f64, r: f64, nu: f64, w: f64) -> f64 {
    let s = nu * r * w;
    vybar + s * s * vm - 2.0 * s * cov_ym
}

/// MSE of the classical ratio estimator: `V(ȳ) + R′²V(x̄) − 2R′·Cov(ȳ, x̄)`.
pub fn mse_classical_ratio(vybar: f64, vxbar: f64, cov_yx: f64, r_prime: f64) -> f64 {
    vybar + r_prime * r_prime * vxbar - 2.0 * r_prime * cov_yx
}

/// MSE-minimizing composite weight `k = Cov(ȳ, m) / (ν·R·V(m))`.
pub fn k_opt(cov_ym: f64, vm: f64, r: f64, nu: f64) -> Result<f64> {
    if vm <= 0.0 {
        return Err(domain("k is undefined when V(m) = 0"));
    }
    if nu * r == 0.0 {
        return Err(domain("k is undefined when ν·R = 0"));
    }
    Ok(cov_ym / (nu * r * vm))
}

/// Minimum first-order MSE `V(ȳ)·(1 − ρ²)`, with `ρ` the correlation of
/// `ȳ` and `m`.
pub fn min_mse(vybar: f64, rho_ym: f64) -> Result<f64> {
    // Correlations computed from moments can overshoot ±1 by rounding.
    if rho_ym.is_nan() || rho_ym.abs() > 1.0 + 1e-12 {
        return Err(domain(format!("correlation {rho_ym} is outside [-1, 1]")));
    }
    Ok(vybar * (1.0 - rho_ym * rho_ym).max(0.0))
}

/// Solution of the 3x3 system fixing `(w₀, w₁, w₂)` from the unit weight
/// sum, the optimal composite weight `k` and zero first-order bias.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightSolution {
    pub w0: f64,
    pub w1: f64,
    pub w2: f64,
    pub k: f64,
    pub delta_r: f64,
    pub delta_0: f64,
    pub delta_1: f64,
    pub delta_2: f64,
}

/// Residuals of the three defining equations of a [`WeightSolution`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightResiduals {
    /// `w₀ + w₁ + w₂ − 1`
    pub weight_sum: f64,
    /// `α·g·w₁ + (δ/2)·w₂ − k`
    pub composite: f64,
    /// `w₁·B(t₁) + w₂·B(t₂)`
    pub bias: f64,
}

impl WeightSolution {
    pub fn residuals(&self, alpha: f64, g: f64, delta: f64, b1: f64, b2: f64) -> WeightResiduals {
        WeightResiduals {
            weight_sum: self.w0 + self.w1 + self.w2 - 1.0,
            composite: alpha * g * self.w1 + delta / 2.0 * self.w2 - self.k,
            bias: self.w1 * b1 + self.w2 * b2,
        }
    }
}

/// Closed-form (Cramer) solve of
///
/// ```text
/// | 1   1    1   | |w0|   |1|
/// | 0   αg   δ/2 | |w1| = |k|
/// | 0   B1   B2  | |w2|   |0|
/// ```
///
/// where `B1`, `B2` are the first-order biases of `t₁`, `t₂` (the sample
/// mean is unbiased, so its bias column is zero).
pub fn solve_weights(
    alpha: f64,
    g: f64,
    delta: f64,
    k: f64,
    b1: f64,
    b2: f64,
) -> Result<WeightSolution> {
    let ag = alpha * g;
    let half_delta = delta / 2.0;
    let delta_r = ag * b2 - half_delta * b1;
    if delta_r == 0.0 || !delta_r.is_finite() {
        return Err(Error::Singular(delta_r));
    }
    let delta_0 = b2 * (ag - k) + b1 * (k - half_delta);
    let delta_1 = k * b2;
    let delta_2 = -k * b1;
    Ok(WeightSolution {
        w0: delta_0 / delta_r,
        w1: delta_1 / delta_r,
        w2: delta_2 / delta_r,
        k,
        delta_r,
        delta_0,
        delta_1,
        delta_2,
    })
}

/// Percentage relative efficiency `100·MSE(reference) / MSE(candidate)`.
pub fn pre_percent(mse_reference: f64, mse_candidate: f64) -> Result<f64> {
    if mse_candidate <= 0.0 {
        return Err(domain(format!(
            "relative efficiency needs a positive candidate MSE, got {mse_candidate}"
        )));
    }
    Ok(100.0 * mse_reference / mse_candidate)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::{preset, PresetId};
    use proptest::prelude::*;

    /// P5 (y = 1..5, x = 2y) at n = 3, from exhaustive enumeration by hand.
    fn p5_summary() -> DistributionSummary {
        DistributionSummary {
            n: 3,
            sample_count: 10,
            mean_ybar: 3.0,
            mean_xbar: 6.0,
            Mbar: 3.0,
            Vybar: 1.0 / 3.0,
            Vxbar: 4.0 / 3.0,
            Vm: 0.6,
            Cov_ym: 0.4,
            Cov_yx: 2.0 / 3.0,
            rho_ym: Some(0.8f64.sqrt()),
        }
    }

    fn pop1_n3() -> DistributionSummary {
        DistributionSummary {
            n: 3,
            sample_count: 5984,
            mean_ybar: 856.4118,
            mean_xbar: 208.8824,
            Mbar: 747.7223,
            Vybar: 163356.4086,
            Vxbar: 6884.4455,
            Vm: 101127.6164,
            Cov_ym: 90236.2939,
            Cov_yx: 15061.4011,
            rho_ym: None,
        }
    }

    fn rel_close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * b.abs().max(f64::MIN_POSITIVE)
    }

    /// Independent route: Gaussian elimination with partial pivoting on the
    /// full 3x3 matrix.
    fn gauss_solve(mut m: [[f64; 4]; 3]) -> [f64; 3] {
        for col in 0..3 {
            let pivot = (col..3)
                .max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))
                .unwrap();
            m.swap(col, pivot);
            for row in col + 1..3 {
                let f = m[row][col] / m[col][col];
                let pivot_row = m[col];
                for (cell, p) in m[row].iter_mut().zip(pivot_row).skip(col) {
                    *cell -= f * p;
                }
            }
        }
        let mut x = [0.0; 3];
        for row in (0..3).rev() {
            let s: f64 = (row + 1..3).map(|c| m[row][c] * x[c]).sum();
            x[row] = (m[row][3] - s) / m[row][row];
        }
        x
    }

    #[test]
    fn relative_moment_examples() {
        let rm = relative_moments(&p5_summary(), 3.0, 6.0).unwrap();
        assert!(rel_close(rm.cmm, 0.6 / 9.0, 1e-14));
        assert!(rel_close(rm.cym, 0.4 / 9.0, 1e-14));
        assert_eq!(rm.r, 1.0);
        let rm1 = relative_moments(&pop1_n3(), 856.4118, 208.8824).unwrap();
        assert!((rm1.r - 1.1453).abs() < 1e-4);
        let mut census = p5_summary();
        census.Vm = 0.0;
        census.Cov_ym = 0.0;
        let rm0 = relative_moments(&census, 3.0, 6.0).unwrap();
        assert_eq!((rm0.cmm, rm0.cym), (0.0, 0.0));
        assert!(relative_moments(&p5_summary(), 0.0, 6.0).is_err());
    }

    #[test]
    fn composite_weights() {
        let w = |id| composite_w(&preset(id, 0.9, 0.4).unwrap());
        assert_eq!(w(PresetId::Q2), 1.0);
        assert_eq!(w(PresetId::Q5), 0.5);
        assert_eq!(w(PresetId::Q10), 1.5);
    }

    #[test]
    fn bias_examples() {
        let rm = relative_moments(&p5_summary(), 3.0, 6.0).unwrap();
        assert!(rel_close(
            bias_t1(3.0, 1.0, 1.0, 1.0, &rm),
            1.0 / 15.0,
            1e-13
        ));
        assert_eq!(bias_t1(3.0, 0.0, 1.0, 1.0, &rm), 0.0);
        assert_eq!(bias_t1(3.0, 1.0, 0.0, 1.0, &rm), 0.0);
        assert!(rel_close(bias_t2(3.0, 1.0, 1.0, &rm), 1.0 / 120.0, 1e-13));
        assert_eq!(bias_t2(3.0, 0.0, 1.0, &rm), 0.0);
        let zero = RelativeMoments {
            cmm: 0.0,
            cym: 0.0,
            ..rm
        };
        assert_eq!(bias_t2(3.0, 1.0, 1.0, &zero), 0.0);
    }

    #[test]
    fn combined_bias_reduces_to_components() {
        let rm = relative_moments(&pop1_n3(), 856.4118, 208.8824).unwrap();
        let q1 = preset(PresetId::Q1, 0.8732, 0.4491).unwrap();
        assert_eq!(bias_t(856.4118, &q1, 1.0, &rm), 0.0);
        let mut spec = preset(PresetId::Q2, 0.8732, 0.4491).unwrap();
        spec.alpha = 0.7;
        spec.g = 1.8;
        let nu = 0.93;
        assert!(rel_close(
            bias_t(856.4118, &spec, nu, &rm),
            bias_t1(856.4118, 1.8, 0.7, nu, &rm),
            1e-13
        ));
        spec.w1 = 0.0;
        spec.w2 = 1.0;
        spec.delta = 1.6;
        assert!(rel_close(
            bias_t(856.4118, &spec, nu, &rm),
            bias_t2(856.4118, 1.6, nu, &rm),
            1e-13
        ));
    }

    #[test]
    fn classical_ratio() {
        let rm = relative_moments(&p5_summary(), 3.0, 6.0).unwrap();
        assert!(bias_classical_ratio(3.0, &rm).abs() < 1e-15);
        let rm1 = relative_moments(&pop1_n3(), 856.4118, 208.8824).unwrap();
        assert!((bias_classical_ratio(856.4118, &rm1) - 63.0241).abs() < 1e-3);
        assert!(mse_classical_ratio(1.0 / 3.0, 4.0 / 3.0, 2.0 / 3.0, 0.5).abs() < 1e-15);
        assert_eq!(mse_classical_ratio(2.0, 5.0, 0.0, 0.0), 2.0);
        let ds = pop1_n3();
        let v = mse_classical_ratio(ds.Vybar, ds.Vxbar, ds.Cov_yx, rm1.r_prime);
        assert!((v - 155_579.69).abs() < 0.01, "{v}");
    }

    #[test]
    fn mse_examples() {
        let ds = pop1_n3();
        let q2 = mse_t(ds.Vybar, ds.Vm, ds.Cov_ym, 1.1453, 1.0, 1.0);
        assert!(rel_close(q2, 89314.58, 5e-3), "{q2}");
        let q5 = mse_t(ds.Vybar, ds.Vm, ds.Cov_ym, 1.1453, 1.0, 0.5);
        assert!(rel_close(q5, 93169.40, 5e-3), "{q5}");
        assert_eq!(
            mse_t(ds.Vybar, ds.Vm, ds.Cov_ym, 1.1453, 1.0, 0.0),
            ds.Vybar
        );
    }

    #[test]
    fn k_examples() {
        assert!(rel_close(
            k_opt(0.4, 0.6, 1.0, 1.0).unwrap(),
            2.0 / 3.0,
            1e-15
        ));
        assert_eq!(k_opt(0.0, 0.6, 1.0, 1.0).unwrap(), 0.0);
        let k = k_opt(90236.2939, 101127.6164, 1.1453, 1.0).unwrap();
        assert!((k - 0.77910).abs() < 1e-4, "{k}");
        assert!(k_opt(0.4, 0.0, 1.0, 1.0).is_err());
        assert!(k_opt(0.4, 0.6, 0.0, 1.0).is_err());
    }

    #[test]
    fn min_mse_examples() {
        let ds = pop1_n3();
        let rho = ds.Cov_ym / (ds.Vybar * ds.Vm).sqrt();
        assert!((rho - 0.70207).abs() < 1e-5);
        assert!(rel_close(min_mse(ds.Vybar, rho).unwrap(), 82838.45, 5e-3));
        assert_eq!(min_mse(5.0, 0.0).unwrap(), 5.0);
        assert!(rel_close(
            min_mse(1.0 / 3.0, 0.8f64.sqrt()).unwrap(),
            1.0 / 15.0,
            1e-12
        ));
        assert!(min_mse(1.0, 1.2).is_err());
        assert!(min_mse(1.0, f64::NAN).is_err());
    }

    #[test]
    fn p5_weight_solution() {
        let s = solve_weights(1.0, 1.0, 1.0, 2.0 / 3.0, 1.0 / 15.0, 1.0 / 120.0).unwrap();
        assert!((s.delta_r + 0.025).abs() < 1e-15);
        assert!((s.w0 + 0.555_556).abs() < 1e-6);
        assert!((s.w1 + 0.222_222).abs() < 1e-6);
        assert!((s.w2 - 1.777_778).abs() < 1e-6);
        let r = s.residuals(1.0, 1.0, 1.0, 1.0 / 15.0, 1.0 / 120.0);
        assert!(r.weight_sum.abs() < 1e-12 && r.composite.abs() < 1e-12 && r.bias.abs() < 1e-12);
    }

    #[test]
    fn degenerate_weight_solutions() {
        // t₁ alone is already optimal and unbiased.
        let s = solve_weights(1.5, 2.0, 1.0, 3.0, 0.0, 0.2).unwrap();
        assert_eq!((s.w0, s.w1, s.w2), (0.0, 1.0, 0.0));
        let s = solve_weights(1.0, 1.0, 1.0, 0.0, 0.3, 0.2).unwrap();
        assert_eq!((s.w0, s.w1, s.w2), (1.0, 0.0, 0.0));
        assert!(matches!(
            solve_weights(1.0, 1.0, 2.0, 0.5, 0.3, 0.3),
            Err(Error::Singular(_))
        ));
    }

    #[test]
    fn pre_examples() {
        assert!((pre_percent(163356.41, 89314.58).unwrap() - 182.90).abs() < 5e-3);
        assert_eq!(pre_percent(7.0, 7.0).unwrap(), 100.0);
        assert!((pre_percent(91690.37, 101236.37).unwrap() - 90.57).abs() < 5e-3);
        assert!(pre_percent(1.0, 0.0).is_err());
    }

    proptest! {
        #[test]
        fn weight_solve_matches_elimination(
            alpha in 0.1f64..3.0, g in -2.0f64..3.0, delta in 0.1f64..3.0,
            k in -2.0f64..2.0, b1 in -1.0f64..1.0, b2 in -1.0f64..1.0,
        ) {
            let ag = alpha * g;
            prop_assume!((ag * b2 - delta / 2.0 * b1).abs() > 1e-3);
            let s = solve_weights(alpha, g, delta, k, b1, b2).unwrap();
            let x = gauss_solve([
                [1.0, 1.0, 1.0, 1.0],
                [0.0, ag, delta / 2.0, k],
                [0.0, b1, b2, 0.0],
            ]);
            for (got, want) in [s.w0, s.w1, s.w2].iter().zip(&x) {
                prop_assert!((got - want).abs() <= 1e-9 * want.abs().max(1.0));
            }
        }

        #[test]
        fn mse_rescaling_invariance(
            v in 0.1f64..10.0, vm in 0.1f64..10.0, corr in -0.99f64..0.99,
            r in 0.2f64..3.0, nu in 0.2f64..2.0, w in -2.0f64..2.0,
        ) {
            let cov = corr * (v * vm).sqrt();
            let base = mse_t(v, vm, cov, r, nu, w);
            for c in [0.5, 2.0] {
                let scaled = mse_t(v, vm, cov, r, c * nu, w / c);
                prop_assert!((scaled - base).abs() <= 1e-12 * base.abs().max(1.0));
            }
        }
    }
}
