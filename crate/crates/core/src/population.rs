//! Finite populations of paired (y, x) values and their descriptive
//! parameters.

use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

/// A finite population of `N` units, each carrying a study value `y` and an
/// auxiliary value `x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Population {
    name: String,
    y: Vec<f64>,
    x: Vec<f64>,
}

impl Population {
    pub fn new(name: impl Into<String>, y: Vec<f64>, x: Vec<f64>) -> Result<Self> {
        if y.len() != x.len() {
            return Err(domain(format!(
                "y has {} entries but x has {}",
                y.len(),
                x.len()
            )));
        }
        if y.len() < 2 {
            return Err(domain(format!(
                "a population needs at least 2 units, got {}",
                y.len()
            )));
        }
        if let Some(i) = y.iter().chain(&x).position(|v| !v.is_finite()) {
            return Err(domain(format!("non-finite value at entry {i}")));
        }
        Ok(Self {
            name: name.into(),
            y,
            x,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    /// Population size `N`.
    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn y_mean(&self) -> f64 {
        mean(&self.y)
    }

    pub fn x_mean(&self) -> f64 {
        mean(&self.x)
    }
}

/// Reads a population from CSV text with header `y,x`.
///
/// Both `\n` and `\r\n` line endings are accepted. Errors carry the 1-based
/// line number of the offending row.
pub fn load_population<R: Read>(name: impl Into<String>, source: R) -> Result<Population> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(source);

    let headers = reader.headers().map_err(|e| csv_error(&e, 1))?;
    let header: Vec<&str> = headers.iter().collect();
    if header != ["y", "x"] {
        return Err(Error::Parse {
            line: 1,
            message: format!("expected header `y,x`, found `{}`", header.join(",")),
        });
    }

    let mut y = Vec::new();
    let mut x = Vec::new();
    let mut last_line = 1;
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(&e, last_line + 1))?;
        let line = record.position().map_or(last_line + 1, |p| p.line());
        last_line = line;
        if record.len() != 2 {
            return Err(Error::Parse {
                line,
                message: format!("expected 2 columns, found {}", record.len()),
            });
        }
        y.push(parse_real(&record[0], line, "y")?);
        x.push(parse_real(&record[1], line, "x")?);
    }
    if y.len() < 2 {
        return Err(Error::Parse {
            line: last_line,
            message: format!("a population needs at least 2 rows, found {}", y.len()),
        });
    }
    Population::new(name, y, x)
}

pub(crate) fn parse_real(cell: &str, line: u64, column: &str) -> Result<f64> {
    let v: f64 = cell.parse().map_err(|_| Error::Parse {
        line,
        message: format!("column `{column}`: `{cell}` is not a number"),
    })?;
    if !v.is_finite() {
        return Err(Error::Parse {
            line,
            message: format!("column `{column}`: `{cell}` is not finite"),
        });
    }
    Ok(v)
}

pub(crate) fn csv_error(err: &csv::Error, fallback_line: u64) -> Error {
    let line = err.position().map_or(fallback_line, |p| p.line());
    Error::Parse {
        line,
        message: err.to_string(),
    }
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// `(1/N) Σ (vᵢ − v̄)^r`, computed two-pass about the arithmetic mean.
pub fn central_moment(values: &[f64], r: u32) -> Result<f64> {
    if values.is_empty() {
        return Err(domain("central moment of an empty list"));
    }
    if r == 0 {
        return Err(domain("moment order must be positive"));
    }
    let m = mean(values);
    let s: f64 = values.iter().map(|v| (v - m).powi(r as i32)).sum();
    Ok(s / values.len() as f64)
}

/// Pearson's squared skewness `β₁ = μ₃² / μ₂³`.
pub fn skewness_beta1(values: &[f64]) -> Result<f64> {
    let mu2 = central_moment(values, 2)?;
    if mu2 <= 0.0 {
        return Err(domain("skewness of constant data is undefined"));
    }
    let mu3 = central_moment(values, 3)?;
    Ok(mu3 * mu3 / (mu2 * mu2 * mu2))
}

/// Descriptive parameters of a population.
///
/// `S2y`, `S2x` and `Sxy` use the `N − 1` divisor. `rho_xy` is `None` when
/// either variable is constant and `beta1_x` is `None` when `x` is constant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[allow(non_snake_case)]
pub struct PopulationParams {
    pub N: usize,
    pub Ybar: f64,
    pub Xbar: f64,
    pub S2y: f64,
    pub S2x: f64,
    pub Sxy: f64,
    pub rho_xy: Option<f64>,
    pub beta1_x: Option<f64>,
}

#[allow(non_snake_case)]
pub fn population_params(pop: &Population) -> PopulationParams {
    let N = pop.len();
    let Ybar = pop.y_mean();
    let Xbar = pop.x_mean();
    let (mut syy, mut sxx, mut sxy) = (0.0, 0.0, 0.0);
    for (&yi, &xi) in pop.y.iter().zip(&pop.x) {
        let dy = yi - Ybar;
        let dx = xi - Xbar;
        syy += dy * dy;
        sxx += dx * dx;
        sxy += dx * dy;
    }
    let d = (N - 1) as f64;
    let (S2y, S2x, Sxy) = (syy / d, sxx / d, sxy / d);
    let rho_xy = (S2y > 0.0 && S2x > 0.0).then(|| (Sxy / (S2y * S2x).sqrt()).clamp(-1.0, 1.0));
    PopulationParams {
        N,
        Ybar,
        Xbar,
        S2y,
        S2x,
        Sxy,
        rho_xy,
        beta1_x: skewness_beta1(&pop.x).ok(),
    }
}

/// Variance of the SRSWOR sample mean, `((1 − n/N)/n)·S²`.
pub fn srswor_variance_of_mean(s2: f64, n: usize, population: usize) -> Result<f64> {
    if n == 0 || n > population {
        return Err(domain(format!(
            "sample size {n} must lie in 1..={population}"
        )));
    }
    let f = n as f64 / population as f64;
    Ok((1.0 - f) / n as f64 * s2)
}
