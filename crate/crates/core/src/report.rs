//! Parameter sets and the report tables built from them: sampling-design
//! constants, estimator MSE, relative efficiency, exact-versus-first-order
//! comparison and the optimal weight solve.

use std::fmt::{self, Write as _};
use std::io::Read;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::enumeration::{
    binomial, exact_estimator_moments, exact_sampling_distribution, DistributionSummary,
};
use crate::error::{domain, Error, Result};
use crate::estimators::{nu, preset, EstimatorSpec, PresetId};
use crate::montecarlo::{mc_run, McConfig};
use crate::population::{csv_error, parse_real, population_params, Population};
use crate::theory::{
    bias_t, bias_t1, bias_t2, composite_w, k_opt, min_mse, mse_t, pre_percent, relative_moments,
    solve_weights, WeightResiduals, WeightSolution,
};

/// Column order of the parameter file.
pub const PARAMETER_COLUMNS: [&str; 14] = [
    "name", "N", "n", "Ybar", "Mbar", "Xbar", "beta1", "R", "Vybar", "Vxbar", "Vm", "Cov_ym",
    "Cov_yx", "rho_xy",
];

/// Relative tolerance for `R` against `Ybar / Mbar` before a warning.
const R_TOLERANCE: f64 = 1e-3;

/// Known constants for one (population, sample size) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[allow(non_snake_case)]
pub struct ParameterSet {
    pub name: String,
    pub N: usize,
    pub n: usize,
    pub Ybar: f64,
    pub Mbar: f64,
    pub Xbar: f64,
    pub beta1: f64,
    pub R: f64,
    pub Vybar: f64,
    pub Vxbar: f64,
    pub Vm: f64,
    pub Cov_ym: f64,
    pub Cov_yx: f64,
    pub rho_xy: f64,
}

impl ParameterSet {
    /// Builds a parameter set from a raw population and its sampling
    /// distribution summary.
    pub fn from_summary(pop: &Population, ds: &DistributionSummary) -> Result<Self> {
        let params = population_params(pop);
        let beta1 = params
            .beta1_x
            .ok_or_else(|| domain("x is constant, its skewness is undefined"))?;
        let rho_xy = params
            .rho_xy
            .ok_or_else(|| domain("x or y is constant, their correlation is undefined"))?;
        Ok(Self {
            name: format!("{}-n{}", pop.name(), ds.n),
            N: pop.len(),
            n: ds.n,
            Ybar: params.Ybar,
            Mbar: ds.Mbar,
            Xbar: params.Xbar,
            beta1,
            R: params.Ybar / ds.Mbar,
            Vybar: ds.Vybar,
            Vxbar: ds.Vxbar,
            Vm: ds.Vm,
            Cov_ym: ds.Cov_ym,
            Cov_yx: ds.Cov_yx,
            rho_xy,
        })
    }

    /// The sampling-distribution part of the set.
    pub fn summary(&self) -> DistributionSummary {
        let rho_ym = (self.Vybar > 0.0 && self.Vm > 0.0)
            .then(|| (self.Cov_ym / (self.Vybar * self.Vm).sqrt()).clamp(-1.0, 1.0));
        DistributionSummary {
            n: self.n,
            sample_count: binomial(self.N, self.n).unwrap_or(0),
            mean_ybar: self.Ybar,
            mean_xbar: self.Xbar,
            Mbar: self.Mbar,
            Vybar: self.Vybar,
            Vxbar: self.Vxbar,
            Vm: self.Vm,
            Cov_ym: self.Cov_ym,
            Cov_yx: self.Cov_yx,
            rho_ym,
        }
    }

    /// Correlation of `ȳ` and `m` implied by the set.
    pub fn rho_ym(&self) -> Option<f64> {
        self.summary().rho_ym
    }

    /// A warning when `R` disagrees with `Ybar / Mbar` beyond rounding.
    pub fn r_consistency_warning(&self) -> Option<String> {
        let implied = self.Ybar / self.Mbar;
        let rel = (self.R - implied).abs() / implied.abs();
        (rel > R_TOLERANCE).then(|| {
            format!(
                "{}: R = {} differs from Ybar/Mbar = {implied:.6} by {:.3}%",
                self.name,
                self.R,
                rel * 100.0
            )
        })
    }

    fn values(&self) -> [f64; 11] {
        [
            self.Ybar,
            self.Mbar,
            self.Xbar,
            self.beta1,
            self.R,
            self.Vybar,
            self.Vxbar,
            self.Vm,
            self.Cov_ym,
            self.Cov_yx,
            self.rho_xy,
        ]
    }
}

/// Parameter sets read from a file, plus non-fatal warnings.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParsedParameters {
    pub sets: Vec<ParameterSet>,
    pub warnings: Vec<String>,
}

/// Reads parameter sets from CSV with the [`PARAMETER_COLUMNS`] header.
pub fn parse_parameter_file<R: Read>(source: R) -> Result<ParsedParameters> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(source);
    let mut parsed = ParsedParameters::default();

    let headers = reader.headers().map_err(|e| csv_error(&e, 1))?.clone();
    if headers.is_empty() || (headers.len() == 1 && headers[0].is_empty()) {
        parsed.warnings.push("parameter file is empty".to_string());
        return Ok(parsed);
    }
    let mut position = [0usize; PARAMETER_COLUMNS.len()];
    for (slot, column) in position.iter_mut().zip(PARAMETER_COLUMNS) {
        *slot = headers
            .iter()
            .position(|h| h == column)
            .ok_or_else(|| Error::Parse {
                line: 1,
                message: format!("missing column `{column}`"),
            })?;
    }

    let mut last_line = 1;
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(&e, last_line + 1))?;
        let line = record.position().map_or(last_line + 1, |p| p.line());
        last_line = line;
        if record.len() != headers.len() {
            return Err(Error::Parse {
                line,
                message: format!("expected {} columns, found {}", headers.len(), record.len()),
            });
        }
        let cell = |i: usize| &record[position[i]];
        let count = |i: usize| -> Result<usize> {
            cell(i).parse().map_err(|_| Error::Parse {
                line,
                message: format!(
                    "column `{}`: `{}` is not a count",
                    PARAMETER_COLUMNS[i],
                    cell(i)
                ),
            })
        };
        let real = |i: usize| parse_real(cell(i), line, PARAMETER_COLUMNS[i]);
        let set = ParameterSet {
            name: cell(0).to_string(),
            N: count(1)?,
            n: count(2)?,
            Ybar: real(3)?,
            Mbar: real(4)?,
            Xbar: real(5)?,
            beta1: real(6)?,
            R: real(7)?,
            Vybar: real(8)?,
            Vxbar: real(9)?,
            Vm: real(10)?,
            Cov_ym: real(11)?,
            Cov_yx: real(12)?,
            rho_xy: real(13)?,
        };
        if let Some(w) = set.r_consistency_warning() {
            parsed.warnings.push(w);
        }
        parsed.sets.push(set);
    }
    if parsed.sets.is_empty() {
        parsed
            .warnings
            .push("parameter file has no rows".to_string());
    }
    Ok(parsed)
}

/// Serializes parameter sets in the format read by [`parse_parameter_file`],
/// using shortest round-trip float formatting.
pub fn write_parameter_file(sets: &[ParameterSet]) -> String {
    let mut out = PARAMETER_COLUMNS.join(",");
    out.push('\n');
    for s in sets {
        let _ = write!(out, "{},{},{}", s.name, s.N, s.n);
        for v in s.values() {
            let _ = write!(out, ",{v:?}");
        }
        out.push('\n');
    }
    out
}

/// One table cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Cell {
    Value(f64),
    Count(u64),
    /// Not computable; carries the reason.
    Unavailable(String),
}

impl Cell {
    pub fn value(&self) -> Option<f64> {
        match *self {
            Cell::Value(v) => Some(v),
            Cell::Count(c) => Some(c as f64),
            Cell::Unavailable(_) => None,
        }
    }

    fn from_result(r: Result<f64>) -> Self {
        match r {
            Ok(v) if v.is_finite() => Cell::Value(v),
            Ok(v) => Cell::Unavailable(format!("non-finite value {v}")),
            Err(e) => Cell::Unavailable(e.to_string()),
        }
    }

    fn render(&self, precision: usize) -> String {
        match self {
            Cell::Value(v) => {
                let text = format!("{v:.precision$}");
                // Avoid printing "-0.0000" for tiny negative values.
                match text.strip_prefix('-') {
                    Some(rest) if rest.chars().all(|c| c == '0' || c == '.') => rest.to_string(),
                    _ => text,
                }
            }
            Cell::Count(c) => c.to_string(),
            Cell::Unavailable(_) => "NA".to_string(),
        }
    }
}

/// A labelled grid of cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportTable {
    pub title: String,
    pub row_labels: Vec<String>,
    pub column_labels: Vec<String>,
    /// Row-major.
    pub cells: Vec<Vec<Cell>>,
    /// Decimal places per column.
    pub precision: Vec<usize>,
    pub notes: Vec<String>,
}

/// Default number of decimal places in rendered tables.
pub const DEFAULT_PRECISION: usize = 4;

impl ReportTable {
    pub fn new(title: impl Into<String>, column_labels: Vec<String>) -> Self {
        let precision = vec![DEFAULT_PRECISION; column_labels.len()];
        Self {
            title: title.into(),
            row_labels: Vec::new(),
            column_labels,
            cells: Vec::new(),
            precision,
            notes: Vec::new(),
        }
    }

    pub fn push_row(&mut self, label: impl Into<String>, cells: Vec<Cell>) {
        assert_eq!(cells.len(), self.column_labels.len(), "ragged report row");
        self.row_labels.push(label.into());
        self.cells.push(cells);
    }

    pub fn with_precision(mut self, precision: usize) -> Self {
        self.precision = vec![precision; self.column_labels.len()];
        self
    }

    pub fn row(&self, label: &str) -> Option<&[Cell]> {
        self.row_labels
            .iter()
            .position(|l| l == label)
            .map(|i| self.cells[i].as_slice())
    }

    pub fn get(&self, row: &str, column: &str) -> Option<&Cell> {
        let c = self.column_labels.iter().position(|l| l == column)?;
        self.row(row).map(|r| &r[c])
    }

    /// Aligned plain text.
    pub fn to_text(&self) -> String {
        let rendered: Vec<Vec<String>> = self
            .cells
            .iter()
            .map(|row| {
                row.iter()
                    .zip(&self.precision)
                    .map(|(c, &p)| c.render(p))
                    .collect()
            })
            .collect();
        let label_width = self
            .row_labels
            .iter()
            .map(|l| l.chars().count())
            .max()
            .unwrap_or(0);
        let widths: Vec<usize> = self
            .column_labels
            .iter()
            .enumerate()
            .map(|(j, h)| {
                rendered
                    .iter()
                    .map(|r| r[j].len())
                    .chain([h.chars().count()])
                    .max()
                    .unwrap_or(0)
            })
            .collect();

        let mut out = String::new();
        let _ = writeln!(out, "{}", self.title);
        let _ = write!(out, "{:label_width$}", "");
        for (h, w) in self.column_labels.iter().zip(&widths) {
            let _ = write!(out, "  {h:>w$}");
        }
        out.push('\n');
        for (label, row) in self.row_labels.iter().zip(&rendered) {
            let _ = write!(out, "{label:label_width$}");
            for (cell, w) in row.iter().zip(&widths) {
                let _ = write!(out, "  {cell:>w$}");
            }
            out.push('\n');
        }
        for note in &self.notes {
            let _ = writeln!(out, "note: {note}");
        }
        out
    }

    /// CSV with a leading `estimator`/label column; unavailable cells are
    /// written as `NA`.
    pub fn to_csv(&self, corner: &str) -> String {
        let mut writer = csv::Writer::from_writer(Vec::new());
        let mut header = vec![corner.to_string()];
        header.extend(self.column_labels.iter().cloned());
        writer.write_record(&header).expect("in-memory write");
        for (label, row) in self.row_labels.iter().zip(&self.cells) {
            let mut record = vec![label.clone()];
            record.extend(row.iter().zip(&self.precision).map(|(c, &p)| c.render(p)));
            writer.write_record(&record).expect("in-memory write");
        }
        String::from_utf8(writer.into_inner().expect("in-memory flush")).expect("utf-8 labels")
    }

    /// Reads back a table written by [`ReportTable::to_csv`].
    pub fn from_csv<R: Read>(title: impl Into<String>, source: R) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new().from_reader(source);
        let headers = reader.headers().map_err(|e| csv_error(&e, 1))?.clone();
        let columns: Vec<String> = headers.iter().skip(1).map(str::to_string).collect();
        let mut table = ReportTable::new(title, columns);
        for record in reader.records() {
            let record = record.map_err(|e| csv_error(&e, 0))?;
            let line = record.position().map_or(0, |p| p.line());
            let cells = record
                .iter()
                .skip(1)
                .map(|c| {
                    if c == "NA" {
                        Ok(Cell::Unavailable("NA".to_string()))
                    } else if let Ok(count) = c.parse::<u64>() {
                        Ok(Cell::Count(count))
                    } else {
                        parse_real(c, line, "cell").map(Cell::Value)
                    }
                })
                .collect::<Result<Vec<_>>>()?;
            if cells.len() != table.column_labels.len() {
                return Err(Error::Parse {
                    line,
                    message: "ragged table row".to_string(),
                });
            }
            table.push_row(&record[0], cells);
        }
        Ok(table)
    }
}

impl fmt::Display for ReportTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

/// How the sampling distribution is obtained for a raw population.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AnalysisMode {
    Exact {
        workers: usize,
    },
    MonteCarlo {
        replicates: u64,
        seed: u64,
        workers: usize,
    },
}

/// Sampling distribution of a raw population at sample size `n`.
pub fn sampling_distribution(
    pop: &Population,
    n: usize,
    mode: AnalysisMode,
) -> Result<DistributionSummary> {
    match mode {
        AnalysisMode::Exact { workers } => exact_sampling_distribution(pop, n, workers),
        AnalysisMode::MonteCarlo {
            replicates,
            seed,
            workers,
        } => {
            let cfg = McConfig {
                workers,
                ..McConfig::new(n, replicates, seed)
            };
            Ok(mc_run(pop, &[], 0.0, &cfg)?.summary)
        }
    }
}

const PARAMETER_ROWS: [&str; 15] = [
    "N", "n", "C(N,n)", "Ybar", "Mbar", "Xbar", "beta1", "R", "Vybar", "Vxbar", "Vm", "Cov_ym",
    "Cov_yx", "rho_xy", "rho_ym",
];

/// The design-constants table for a raw population, one column per `n`.
/// Also returns the parameter sets of the columns that could be computed.
pub fn table_parameters(
    pop: &Population,
    n_values: &[usize],
    mode: AnalysisMode,
) -> (ReportTable, Vec<ParameterSet>) {
    let columns = n_values.iter().map(|n| format!("n={n}")).collect();
    let mut table = ReportTable::new(
        format!("Parameter values and constants: {}", pop.name()),
        columns,
    );
    let mut grid: Vec<Vec<Cell>> = vec![Vec::new(); PARAMETER_ROWS.len()];
    let mut sets = Vec::new();
    for &n in n_values {
        let column = sampling_distribution(pop, n, mode)
            .and_then(|ds| ParameterSet::from_summary(pop, &ds).map(|ps| (ds, ps)));
        match column {
            Ok((ds, ps)) => {
                let count = match mode {
                    AnalysisMode::Exact { .. } => Cell::Count(ds.sample_count),
                    AnalysisMode::MonteCarlo { .. } => binomial(pop.len(), n)
                        .map_or(Cell::Unavailable("exceeds 64-bit".into()), Cell::Count),
                };
                let rho_ym = ds
                    .rho_ym
                    .map_or(Cell::Unavailable("zero variance".into()), Cell::Value);
                let cells = [
                    Cell::Count(ps.N as u64),
                    Cell::Count(n as u64),
                    count,
                    Cell::Value(ps.Ybar),
                    Cell::Value(ps.Mbar),
                    Cell::Value(ps.Xbar),
                    Cell::Value(ps.beta1),
                    Cell::Value(ps.R),
                    Cell::Value(ps.Vybar),
                    Cell::Value(ps.Vxbar),
                    Cell::Value(ps.Vm),
                    Cell::Value(ps.Cov_ym),
                    Cell::Value(ps.Cov_yx),
                    Cell::Value(ps.rho_xy),
                    rho_ym,
                ];
                for (row, cell) in grid.iter_mut().zip(cells) {
                    row.push(cell);
                }
                sets.push(ps);
            }
            Err(e) => {
                let reason = e.to_string();
                for row in grid.iter_mut() {
                    row.push(Cell::Unavailable(reason.clone()));
                }
                table.notes.push(format!("n={n}: {reason}"));
            }
        }
    }
    for (label, row) in PARAMETER_ROWS.iter().zip(grid) {
        table.push_row(*label, row);
    }
    (table, sets)
}

/// An estimator row requested in a report.
#[derive(Debug, Clone, PartialEq)]
pub enum EstimatorChoice {
    Preset(PresetId),
    /// The family member at the MSE-optimal composite weight.
    Optimal,
    Custom(EstimatorSpec),
}

impl EstimatorChoice {
    pub fn label(&self) -> String {
        match self {
            EstimatorChoice::Preset(id) => id.label().to_string(),
            EstimatorChoice::Optimal => "t(opt)".to_string(),
            EstimatorChoice::Custom(spec) => spec.name.clone(),
        }
    }

    /// `q1…q10` followed by `t(opt)`.
    pub fn all() -> Vec<EstimatorChoice> {
        PresetId::ALL
            .into_iter()
            .map(EstimatorChoice::Preset)
            .chain([EstimatorChoice::Optimal])
            .collect()
    }

    /// Parses `all` or a comma list of `q1…q10` and `topt`.
    pub fn parse_list(list: &str) -> Result<Vec<EstimatorChoice>> {
        if list.trim().eq_ignore_ascii_case("all") {
            return Ok(Self::all());
        }
        list.split(',').map(str::parse).collect()
    }

    /// The concrete spec for a given `(β₁, ρ)`; `None` for [`Self::Optimal`].
    pub fn spec(&self, beta1: f64, rho: f64) -> Option<Result<EstimatorSpec>> {
        match self {
            EstimatorChoice::Preset(id) => Some(preset(*id, beta1, rho)),
            EstimatorChoice::Optimal => None,
            EstimatorChoice::Custom(spec) => Some(Ok(spec.clone())),
        }
    }
}

impl FromStr for EstimatorChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("topt") || s.eq_ignore_ascii_case("t(opt)") {
            return Ok(EstimatorChoice::Optimal);
        }
        s.parse().map(EstimatorChoice::Preset)
    }
}

fn weight_sum_notes(choices: &[EstimatorChoice]) -> Vec<String> {
    choices
        .iter()
        .filter_map(|c| c.spec(1.0, 0.0).and_then(|s| s.ok()))
        .filter(|s| !s.has_unit_weight_sum())
        .map(|s| {
            format!(
                "{}: weights sum to {} (not 1); reported as catalogued",
                s.name,
                s.weight_sum()
            )
        })
        .collect()
}

/// First-order MSE of one estimator under a parameter set.
pub fn first_order_mse(ps: &ParameterSet, choice: &EstimatorChoice) -> Result<f64> {
    match choice.spec(ps.beta1, ps.rho_xy) {
        None => {
            let rho = ps
                .rho_ym()
                .ok_or_else(|| domain("Cov(ȳ, m) correlation undefined (zero variance)"))?;
            min_mse(ps.Vybar, rho)
        }
        Some(spec) => {
            let spec = spec?;
            let nu = nu(spec.a, spec.b, ps.Mbar)?;
            Ok(mse_t(
                ps.Vybar,
                ps.Vm,
                ps.Cov_ym,
                ps.R,
                nu,
                composite_w(&spec),
            ))
        }
    }
}

/// First-order MSE of each requested estimator, one column per set.
pub fn table_mse(sets: &[ParameterSet], include: &[EstimatorChoice]) -> ReportTable {
    let columns = sets.iter().map(|s| s.name.clone()).collect();
    let mut table = ReportTable::new("Variance / mean squared error", columns);
    for choice in include {
        let cells = sets
            .iter()
            .map(|ps| Cell::from_result(first_order_mse(ps, choice)))
            .collect();
        table.push_row(choice.label(), cells);
    }
    table.notes = weight_sum_notes(include);
    table
}

/// Cellwise `100·MSE(reference) / MSE(candidate)` against `reference_row`.
pub fn table_pre(mse_table: &ReportTable, reference_row: &str) -> Result<ReportTable> {
    let reference = mse_table
        .row(reference_row)
        .ok_or_else(|| domain(format!("reference row `{reference_row}` not in table")))?;
    let mut table = ReportTable::new(
        format!("Percentage relative efficiency with respect to {reference_row}"),
        mse_table.column_labels.clone(),
    );
    for (label, row) in mse_table.row_labels.iter().zip(&mse_table.cells) {
        let cells = row
            .iter()
            .zip(reference)
            .map(|(cand, refc)| match (refc.value(), cand.value()) {
                (Some(r), _) if r <= 0.0 => {
                    Cell::Unavailable("reference MSE is not positive".to_string())
                }
                (Some(r), Some(c)) => Cell::from_result(pre_percent(r, c)),
                _ => Cell::Unavailable("MSE unavailable".to_string()),
            })
            .collect();
        table.push_row(label.clone(), cells);
    }
    table.notes = mse_table.notes.clone();
    Ok(table)
}

/// Transform and shape constants for the weight solve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightInputs {
    pub a: f64,
    pub b: f64,
    pub alpha: f64,
    pub g: f64,
    pub delta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightReport {
    pub nu: f64,
    pub bias_t1: f64,
    pub bias_t2: f64,
    pub solution: WeightSolution,
    pub residuals: WeightResiduals,
    /// First-order bias of the solved member (zero up to rounding).
    pub bias_t: f64,
    /// First-order MSE of the solved member (the minimum).
    pub mse: f64,
}

/// Solves for the unique optimal, first-order unbiased weights.
pub fn solve_for_parameters(ps: &ParameterSet, inputs: &WeightInputs) -> Result<WeightReport> {
    let nu = nu(inputs.a, inputs.b, ps.Mbar)?;
    let mut rm = relative_moments(&ps.summary(), ps.Ybar, ps.Xbar)?;
    rm.r = ps.R;
    let k = k_opt(ps.Cov_ym, ps.Vm, ps.R, nu)?;
    let b1 = bias_t1(ps.Ybar, inputs.g, inputs.alpha, nu, &rm);
    let b2 = bias_t2(ps.Ybar, inputs.delta, nu, &rm);
    let solution = solve_weights(inputs.alpha, inputs.g, inputs.delta, k, b1, b2)?;
    let spec = EstimatorSpec {
        name: "t(w)".to_string(),
        w0: solution.w0,
        w1: solution.w1,
        w2: solution.w2,
        a: inputs.a,
        b: inputs.b,
        alpha: inputs.alpha,
        g: inputs.g,
        delta: inputs.delta,
    };
    Ok(WeightReport {
        nu,
        bias_t1: b1,
        bias_t2: b2,
        residuals: solution.residuals(inputs.alpha, inputs.g, inputs.delta, b1, b2),
        bias_t: bias_t(ps.Ybar, &spec, nu, &rm),
        mse: mse_t(ps.Vybar, ps.Vm, ps.Cov_ym, ps.R, nu, composite_w(&spec)),
        solution,
    })
}

/// Exact finite-sample MSE next to the first-order approximation, for a
/// raw population. The difference is the higher-order remainder.
pub fn table_exact_vs_first_order(
    pop: &Population,
    n: usize,
    include: &[EstimatorChoice],
    workers: usize,
) -> Result<ReportTable> {
    let ds = exact_sampling_distribution(pop, n, workers)?;
    let ps = ParameterSet::from_summary(pop, &ds)?;
    let mut table = ReportTable::new(
        format!("Exact vs first-order MSE: {} (n={n})", pop.name()),
        vec![
            "first_order_mse".to_string(),
            "exact_mse".to_string(),
            "exact_bias".to_string(),
            "higher_order_gap".to_string(),
        ],
    )
    .with_precision(6);
    for choice in include {
        let approx = first_order_mse(&ps, choice);
        let exact = match choice.spec(ps.beta1, ps.rho_xy) {
            None => Err(domain("t(opt) has no fixed weights to enumerate")),
            Some(spec) => spec.and_then(|s| exact_estimator_moments(pop, n, &s, ds.Mbar, workers)),
        };
        let gap = match (&approx, &exact) {
            (Ok(a), Ok(e)) => Cell::Value(e.mse - a),
            _ => Cell::Unavailable("needs both values".to_string()),
        };
        let (exact_mse, exact_bias) = match exact {
            Ok(e) => (Cell::Value(e.mse), Cell::Value(e.bias)),
            Err(e) => (
                Cell::Unavailable(e.to_string()),
                Cell::Unavailable(e.to_string()),
            ),
        };
        table.push_row(
            choice.label(),
            vec![Cell::from_result(approx), exact_mse, exact_bias, gap],
        );
    }
    table.notes = weight_sum_notes(include);
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEADER: &str = "name,N,n,Ybar,Mbar,Xbar,beta1,R,Vybar,Vxbar,Vm,Cov_ym,Cov_yx,rho_xy";

    fn p5() -> Population {
        Population::new("P5", vec![1., 2., 3., 4., 5.], vec![2., 4., 6., 8., 10.]).unwrap()
    }

    fn collapse_set() -> ParameterSet {
        ParameterSet {
            name: "flat".into(),
            N: 10,
            n: 3,
            Ybar: 10.0,
            Mbar: 8.0,
            Xbar: 4.0,
            beta1: 0.5,
            R: 1.25,
            Vybar: 3.0,
            Vxbar: 1.0,
            Vm: 2.0,
            Cov_ym: 0.0,
            Cov_yx: 0.5,
            rho_xy: 0.3,
        }
    }

    #[test]
    fn empty_file_warns() {
        let parsed = parse_parameter_file("".as_bytes()).unwrap();
        assert!(parsed.sets.is_empty());
        assert_eq!(parsed.warnings.len(), 1);
    }

    #[test]
    fn missing_column_is_an_error() {
        let err = parse_parameter_file("name,N,n\npop,3,2\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
    }

    #[test]
    fn non_numeric_cell_reports_line() {
        let text =
            format!("{HEADER}\na,20,3,1,1,1,1,1,1,1,1,1,1,0.5\nb,20,3,1,x,1,1,1,1,1,1,1,1,0.5\n");
        let err = parse_parameter_file(text.as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err:?}");
    }

    #[test]
    fn inconsistent_r_is_kept_with_warning() {
        let text = format!("{HEADER}\na,20,3,10,8,1,1,1.3,1,1,1,1,1,0.5\n");
        let parsed = parse_parameter_file(text.as_bytes()).unwrap();
        assert_eq!(parsed.sets.len(), 1);
        assert_eq!(parsed.warnings.len(), 1);
    }

    #[test]
    fn parameter_table_for_p5() {
        let (table, sets) = table_parameters(&p5(), &[3, 5, 6], AnalysisMode::Exact { workers: 1 });
        assert_eq!(table.get("C(N,n)", "n=3"), Some(&Cell::Count(10)));
        let vm = table.get("Vm", "n=3").unwrap().value().unwrap();
        assert!((vm - 0.6).abs() < 1e-12);
        assert_eq!(table.get("Mbar", "n=3").unwrap().value(), Some(3.0));
        for row in ["Vybar", "Vxbar", "Vm", "Cov_ym", "Cov_yx"] {
            assert!(table.get(row, "n=5").unwrap().value().unwrap().abs() < 1e-15);
        }
        assert!(matches!(table.get("Vm", "n=6"), Some(Cell::Unavailable(_))));
        assert_eq!(sets.len(), 2);
    }

    #[test]
    fn mse_collapses_without_median_covariance() {
        let ps = collapse_set();
        let table = table_mse(std::slice::from_ref(&ps), &EstimatorChoice::all());
        assert_eq!(table.get("t(opt)", "flat").unwrap().value(), Some(ps.Vybar));
        let q2 = table.get("q2", "flat").unwrap().value().unwrap();
        assert!((q2 - (ps.Vybar + ps.R * ps.R * ps.Vm)).abs() < 1e-12);
        assert_eq!(table.notes.len(), 3);
    }

    #[test]
    fn singular_nu_becomes_error_cell() {
        let mut ps = collapse_set();
        ps.beta1 = 1.0;
        ps.rho_xy = -8.0;
        let table = table_mse(&[ps], &[EstimatorChoice::Preset(PresetId::Q3)]);
        assert!(matches!(
            table.get("q3", "flat"),
            Some(Cell::Unavailable(_))
        ));
    }

    #[test]
    fn pre_of_reference_is_100() {
        let table = table_mse(&[collapse_set()], &EstimatorChoice::all());
        let pre = table_pre(&table, "q1").unwrap();
        assert_eq!(pre.get("q1", "flat").unwrap().value(), Some(100.0));
        let rows_vs_self = table_pre(&table, "q5").unwrap();
        assert_eq!(rows_vs_self.get("q5", "flat").unwrap().value(), Some(100.0));
        assert!(table_pre(&table, "q42").is_err());
    }

    #[test]
    fn estimator_lists() {
        assert_eq!(EstimatorChoice::parse_list("all").unwrap().len(), 11);
        let list = EstimatorChoice::parse_list("q2, q10,topt").unwrap();
        assert_eq!(
            list,
            [
                EstimatorChoice::Preset(PresetId::Q2),
                EstimatorChoice::Preset(PresetId::Q10),
                EstimatorChoice::Optimal
            ]
        );
        assert!(EstimatorChoice::parse_list("q2,z").is_err());
    }

    #[test]
    fn csv_reparses_at_emitted_precision() {
        let table = table_mse(&[collapse_set()], &EstimatorChoice::all());
        let text = table.to_csv("estimator");
        let back = ReportTable::from_csv("again", text.as_bytes()).unwrap();
        assert_eq!(back.row_labels, table.row_labels);
        for (a, b) in table
            .cells
            .iter()
            .flatten()
            .zip(back.cells.iter().flatten())
        {
            let emitted: f64 = format!("{:.4}", a.value().unwrap()).parse().unwrap();
            assert_eq!(b.value().unwrap(), emitted);
        }
    }

    #[test]
    fn text_table_is_aligned() {
        let table = table_mse(&[collapse_set()], &[EstimatorChoice::Preset(PresetId::Q1)]);
        let text = table.to_text();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[1].len(), lines[2].len());
        assert!(lines[2].ends_with("3.0000"));
    }

    #[test]
    fn p5_exact_vs_first_order() {
        let include = [
            EstimatorChoice::Preset(PresetId::Q2),
            EstimatorChoice::Optimal,
        ];
        let table = table_exact_vs_first_order(&p5(), 3, &include, 1).unwrap();
        let exact = table.get("q2", "exact_mse").unwrap().value().unwrap();
        let approx = table.get("q2", "first_order_mse").unwrap().value().unwrap();
        assert!((exact - 0.178_472_2).abs() < 1e-6);
        assert!((approx - 2.0 / 15.0).abs() < 1e-12);
        assert!(matches!(
            table.get("t(opt)", "exact_mse"),
            Some(Cell::Unavailable(_))
        ));
    }

    #[test]
    fn weight_solve_for_p5() {
        let ds = exact_sampling_distribution(&p5(), 3, 1).unwrap();
        let ps = ParameterSet::from_summary(&p5(), &ds);
        // x is linear in y, so β₁ = 0 and ρ = 1; both are well-defined.
        let ps = ps.unwrap();
        let inputs = WeightInputs {
            a: 1.0,
            b: 0.0,
            alpha: 1.0,
            g: 1.0,
            delta: 1.0,
        };
        let report = solve_for_parameters(&ps, &inputs).unwrap();
        let s = report.solution;
        assert!((s.w0 + 0.555_556).abs() < 1e-6);
        assert!((s.w1 + 0.222_222).abs() < 1e-6);
        assert!((s.w2 - 1.777_778).abs() < 1e-6);
        assert!(report.bias_t.abs() < 1e-12);
        assert!((report.mse - 1.0 / 15.0).abs() < 1e-12);
    }
}
