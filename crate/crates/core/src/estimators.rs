//! The median-based family `t = w₀ȳ + w₁t₁ + w₂t₂` and its catalogued
//! members.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

/// One member of the family, identified by its mixing weights and the
/// transform constants of `t₁` and `t₂`.
///
/// `M̄* = a·M̄ + b` and `m* = a·m + b`. The weights are not required to sum
/// to one; see [`EstimatorSpec::has_unit_weight_sum`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorSpec {
    pub name: String,
    pub w0: f64,
    pub w1: f64,
    pub w2: f64,
    pub a: f64,
    pub b: f64,
    pub alpha: f64,
    pub g: f64,
    pub delta: f64,
}

impl EstimatorSpec {
    pub fn weight_sum(&self) -> f64 {
        self.w0 + self.w1 + self.w2
    }

    pub fn has_unit_weight_sum(&self) -> bool {
        (self.weight_sum() - 1.0).abs() <= 1e-12
    }

    /// Evaluates the estimator on a sample with mean `ybar_s` and median
    /// `m_s`, given the known mean of sample medians `mbar`.
    pub fn evaluate(&self, ybar_s: f64, m_s: f64, mbar: f64) -> Result<f64> {
        combined_estimate(self, ybar_s, m_s, mbar)
    }
}

/// The ten catalogued members q1…q10.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PresetId {
    Q1,
    Q2,
    Q3,
    Q4,
    Q5,
    Q6,
    Q7,
    Q8,
    Q9,
    Q10,
}

impl PresetId {
    pub const ALL: [PresetId; 10] = [
        PresetId::Q1,
        PresetId::Q2,
        PresetId::Q3,
        PresetId::Q4,
        PresetId::Q5,
        PresetId::Q6,
        PresetId::Q7,
        PresetId::Q8,
        PresetId::Q9,
        PresetId::Q10,
    ];

    pub fn label(self) -> &'static str {
        match self {
            PresetId::Q1 => "q1",
            PresetId::Q2 => "q2",
            PresetId::Q3 => "q3",
            PresetId::Q4 => "q4",
            PresetId::Q5 => "q5",
            PresetId::Q6 => "q6",
            PresetId::Q7 => "q7",
            PresetId::Q8 => "q8",
            PresetId::Q9 => "q9",
            PresetId::Q10 => "q10",
        }
    }
}

impl fmt::Display for PresetId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for PresetId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PresetId::ALL
            .into_iter()
            .find(|p| p.label().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| domain(format!("unknown estimator preset `{s}`")))
    }
}

/// Which constants a preset plugs into `(a, b)`.
#[derive(Clone, Copy)]
enum Transform {
    Identity,
    Beta1Rho,
    RhoBeta1,
}

/// Builds a catalogued member with `β₁` (skewness of x) and `ρ` (x–y
/// correlation) substituted into its transform constants. Unused cells get
/// the neutral values `a = 1, b = 0, α = g = δ = 1`.
pub fn preset(id: PresetId, beta1: f64, rho: f64) -> Result<EstimatorSpec> {
    if !beta1.is_finite() || !rho.is_finite() {
        return Err(domain(format!(
            "preset constants must be finite (beta1 = {beta1}, rho = {rho})"
        )));
    }
    use PresetId::*;
    let (w, transform) = match id {
        Q1 => ([1.0, 0.0, 0.0], Transform::Identity),
        Q2 => ([0.0, 1.0, 0.0], Transform::Identity),
        Q3 => ([0.0, 1.0, 0.0], Transform::Beta1Rho),
        Q4 => ([0.0, 1.0, 0.0], Transform::RhoBeta1),
        Q5 => ([0.0, 0.0, 1.0], Transform::Identity),
        Q6 => ([0.0, 0.0, 1.0], Transform::Beta1Rho),
        Q7 => ([0.0, 0.0, 1.0], Transform::RhoBeta1),
        Q8 => ([0.0, 1.0, 1.0], Transform::Beta1Rho),
        Q9 => ([0.0, 1.0, 1.0], Transform::RhoBeta1),
        Q10 => ([0.0, 1.0, 1.0], Transform::Identity),
    };
    let (a, b) = match transform {
        Transform::Identity => (1.0, 0.0),
        Transform::Beta1Rho => (beta1, rho),
        Transform::RhoBeta1 => (rho, beta1),
    };
    Ok(EstimatorSpec {
        name: id.label().to_string(),
        w0: w[0],
        w1: w[1],
        w2: w[2],
        a,
        b,
        alpha: 1.0,
        g: 1.0,
        delta: 1.0,
    })
}

/// `ν = a·M̄ / (a·M̄ + b)`.
pub fn nu(a: f64, b: f64, mbar: f64) -> Result<f64> {
    let denom = a * mbar + b;
    if denom == 0.0 {
        return Err(domain("a·M̄ + b is zero, ν is undefined"));
    }
    Ok(a * mbar / denom)
}

/// `t₁ = ȳ·[M̄* / (α·m* + (1 − α)·M̄*)]^g`.
pub fn t1_estimate(
    ybar_s: f64,
    m_s: f64,
    mbar: f64,
    a: f64,
    b: f64,
    alpha: f64,
    g: f64,
) -> Result<f64> {
    let mbar_star = a * mbar + b;
    let m_star = a * m_s + b;
    let base = alpha * m_star + (1.0 - alpha) * mbar_star;
    if base == 0.0 {
        return Err(domain("t1 denominator α·m* + (1−α)·M̄* is zero"));
    }
    let ratio = mbar_star / base;
    if ratio < 0.0 && g.fract() != 0.0 {
        return Err(domain(format!(
            "t1 ratio {ratio} is negative and exponent {g} is not an integer"
        )));
    }
    let value = ybar_s * ratio.powf(g);
    if !value.is_finite() {
        return Err(domain("t1 is not finite"));
    }
    Ok(value)
}

/// `t₂ = ȳ·exp[δ·(M̄* − m*) / (M̄* + m*)]`.
pub fn t2_estimate(ybar_s: f64, m_s: f64, mbar: f64, a: f64, b: f64, delta: f64) -> Result<f64> {
    let mbar_star = a * mbar + b;
    let m_star = a * m_s + b;
    let denom = mbar_star + m_star;
    if denom == 0.0 {
        return Err(domain("t2 denominator M̄* + m* is zero"));
    }
    let value = ybar_s * (delta * (mbar_star - m_star) / denom).exp();
    if !value.is_finite() {
        return Err(domain("t2 is not finite"));
    }
    Ok(value)
}

/// `w₀ȳ + w₁t₁ + w₂t₂`. Components with zero weight are not evaluated.
pub fn combined_estimate(spec: &EstimatorSpec, ybar_s: f64, m_s: f64, mbar: f64) -> Result<f64> {
    let mut t = spec.w0 * ybar_s;
    if spec.w1 != 0.0 {
        t += spec.w1 * t1_estimate(ybar_s, m_s, mbar, spec.a, spec.b, spec.alpha, spec.g)?;
    }
    if spec.w2 != 0.0 {
        t += spec.w2 * t2_estimate(ybar_s, m_s, mbar, spec.a, spec.b, spec.delta)?;
    }
    Ok(t)
}
