//! Command-line front end: `medest analyze | mse | pre | weights | simulate`.
//!
//! Exit codes: 0 on success, 1 on usage errors, 2 on data or domain errors.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use medest_core::enumeration::{binomial, exact_estimator_mse, exact_sampling_distribution};
use medest_core::report::{
    first_order_mse, parse_parameter_file, solve_for_parameters, table_exact_vs_first_order,
    table_mse, table_parameters, table_pre, AnalysisMode, Cell, EstimatorChoice, WeightInputs,
    WeightReport,
};
use medest_core::{
    load_population, mc_run, median_distribution_fast, EstimatorSpec, McConfig, ParameterSet,
    Population, ReportTable,
};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(
    name = "medest",
    version,
    about = "Median-based estimators of a finite population mean under SRSWOR"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Sampling-design constants of a raw population.
    Analyze(AnalyzeArgs),
    /// First-order MSE of the catalogued estimators and the optimum.
    Mse(TableArgs),
    /// Percentage relative efficiency against a reference estimator.
    Pre(PreArgs),
    /// Unique optimal, first-order unbiased mixing weights.
    Weights(WeightArgs),
    /// Monte Carlo sampling distribution and estimator MSE.
    Simulate(SimulateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Csv,
    #[value(name = "json-like")]
    JsonLike,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    Exact,
    Mc,
}

#[derive(Debug, Args)]
struct OutputArgs {
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
    /// Decimal places in text and CSV output.
    #[arg(long, default_value_t = 4)]
    precision: usize,
}

#[derive(Debug, Args)]
struct SourceArgs {
    /// Raw population CSV with header `y,x`.
    #[arg(long, conflicts_with = "params")]
    population: Option<PathBuf>,
    /// Parameter-set CSV.
    #[arg(long)]
    params: Option<PathBuf>,
    /// Restrict to these parameter sets (comma separated names).
    #[arg(long, value_delimiter = ',')]
    set: Vec<String>,
    /// Sample sizes for a raw population.
    #[arg(long, value_delimiter = ',')]
    n: Vec<usize>,
    #[arg(long, value_enum, default_value_t = Mode::Exact)]
    mode: Mode,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Monte Carlo replicates.
    #[arg(long, default_value_t = 200_000)]
    reps: u64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

#[derive(Debug, Args)]
struct AnalyzeArgs {
    #[arg(long)]
    population: PathBuf,
    #[arg(long, value_delimiter = ',', required = true)]
    n: Vec<usize>,
    #[arg(long, value_enum, default_value_t = Mode::Exact)]
    mode: Mode,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    #[arg(long, default_value_t = 200_000)]
    reps: u64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Also compare exact and first-order MSE for these estimators
    /// (exact mode only).
    #[arg(long)]
    estimators: Option<String>,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Debug, Args)]
struct TableArgs {
    #[command(flatten)]
    source: SourceArgs,
    /// `all` or a comma list of q1..q10 and topt.
    #[arg(long, default_value = "all")]
    estimators: String,
    /// Extra estimator defined in a TOML file (name, w0, w1, w2, a, b,
    /// alpha, g, delta).
    #[arg(long)]
    spec: Vec<PathBuf>,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Debug, Args)]
struct PreArgs {
    #[command(flatten)]
    table: TableArgs,
    /// Row used as the reference MSE.
    #[arg(long, default_value = "q1")]
    reference: String,
}

#[derive(Debug, Args)]
struct WeightArgs {
    #[command(flatten)]
    source: SourceArgs,
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    #[arg(long, default_value_t = 1.0)]
    g: f64,
    #[arg(long, default_value_t = 1.0)]
    delta: f64,
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    a: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    b: f64,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(long)]
    population: PathBuf,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 200_000)]
    reps: u64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    #[arg(long, default_value = "all")]
    estimators: String,
    #[arg(long)]
    spec: Vec<PathBuf>,
    /// Largest C(N, n) for which exact reference values are enumerated.
    #[arg(long, default_value_t = 10_000_000)]
    exact_limit: u64,
    #[command(flatten)]
    output: OutputArgs,
}

/// Failure classes mapped to exit codes.
#[derive(Debug)]
enum Failure {
    Usage(String),
    Data(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Data(e)
    }
}

impl From<medest_core::Error> for Failure {
    fn from(e: medest_core::Error) -> Self {
        Failure::Data(e.into())
    }
}

type CliResult<T> = Result<T, Failure>;

/// Parses `args` (including the program name), runs the subcommand and
/// returns the process exit code.
pub fn run_cli<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let rendered = e.render().to_string();
            if code == 0 {
                let _ = write!(out, "{rendered}");
            } else {
                let _ = write!(err, "{rendered}");
            }
            return code;
        }
    };
    let mut warnings = Vec::new();
    let result = dispatch(cli.command, &mut warnings);
    for w in &warnings {
        let _ = writeln!(err, "warning: {w}");
    }
    match result {
        Ok(text) => match out.write_all(text.as_bytes()) {
            Ok(()) => 0,
            Err(e) => {
                let _ = writeln!(err, "error: {e}");
                2
            }
        },
        Err(Failure::Usage(msg)) => {
            let _ = writeln!(err, "usage error: {msg}");
            1
        }
        Err(Failure::Data(e)) => {
            let _ = writeln!(err, "error: {e:#}");
            2
        }
    }
}

fn dispatch(command: Command, warnings: &mut Vec<String>) -> CliResult<String> {
    match command {
        Command::Analyze(args) => analyze(args),
        Command::Mse(args) => {
            let (sets, choices) = table_inputs(&args, warnings)?;
            let table = table_mse(&sets, &choices);
            Ok(render(&[table], &args.output))
        }
        Command::Pre(args) => {
            let (sets, choices) = table_inputs(&args.table, warnings)?;
            let mse = table_mse(&sets, &choices);
            if mse.row(&args.reference).is_none() {
                return Err(Failure::Usage(format!(
                    "reference `{}` is not among the selected estimators",
                    args.reference
                )));
            }
            let pre = table_pre(&mse, &args.reference)?.with_precision(2);
            Ok(render(&[pre], &args.table.output))
        }
        Command::Weights(args) => weights(args, warnings),
        Command::Simulate(args) => simulate(args),
    }
}

fn open(path: &Path) -> anyhow::Result<BufReader<File>> {
    let file = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    Ok(BufReader::new(file))
}

fn read_population(path: &Path) -> anyhow::Result<Population> {
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "population".to_string());
    load_population(name, open(path)?).with_context(|| format!("reading {}", path.display()))
}

fn analysis_mode(mode: Mode, workers: usize, reps: u64, seed: u64) -> AnalysisMode {
    match mode {
        Mode::Exact => AnalysisMode::Exact { workers },
        Mode::Mc => AnalysisMode::MonteCarlo {
            replicates: reps,
            seed,
            workers,
        },
    }
}

/// Parameter sets from either `--params` or `--population` + `--n`.
fn load_sets(source: &SourceArgs, warnings: &mut Vec<String>) -> CliResult<Vec<ParameterSet>> {
    let mut sets = match (&source.params, &source.population) {
        (Some(path), None) => {
            let parsed = parse_parameter_file(open(path)?)
                .with_context(|| format!("reading {}", path.display()))?;
            warnings.extend(parsed.warnings);
            parsed.sets
        }
        (None, Some(path)) => {
            if source.n.is_empty() {
                return Err(Failure::Usage("--population needs --n".to_string()));
            }
            let pop = read_population(path)?;
            let mode = analysis_mode(source.mode, source.workers, source.reps, source.seed);
            let (table, sets) = table_parameters(&pop, &source.n, mode);
            warnings.extend(table.notes);
            sets
        }
        _ => {
            return Err(Failure::Usage(
                "exactly one of --params or --population is required".to_string(),
            ))
        }
    };
    if !source.set.is_empty() {
        if let Some(missing) = source
            .set
            .iter()
            .find(|s| !sets.iter().any(|p| &p.name == *s))
        {
            return Err(Failure::Data(anyhow!("no parameter set named `{missing}`")));
        }
        sets.retain(|p| source.set.contains(&p.name));
    }
    Ok(sets)
}

fn read_specs(paths: &[PathBuf]) -> anyhow::Result<Vec<EstimatorSpec>> {
    paths
        .iter()
        .map(|p| {
            let text = std::fs::read_to_string(p)
                .with_context(|| format!("cannot read {}", p.display()))?;
            toml::from_str(&text).with_context(|| format!("parsing estimator spec {}", p.display()))
        })
        .collect()
}

fn choices(list: &str, specs: &[PathBuf]) -> CliResult<Vec<EstimatorChoice>> {
    let mut choices =
        EstimatorChoice::parse_list(list).map_err(|e| Failure::Usage(e.to_string()))?;
    choices.extend(read_specs(specs)?.into_iter().map(EstimatorChoice::Custom));
    Ok(choices)
}

fn table_inputs(
    args: &TableArgs,
    warnings: &mut Vec<String>,
) -> CliResult<(Vec<ParameterSet>, Vec<EstimatorChoice>)> {
    let choices = choices(&args.estimators, &args.spec)?;
    let sets = load_sets(&args.source, warnings)?;
    Ok((sets, choices))
}

fn analyze(args: AnalyzeArgs) -> CliResult<String> {
    let pop = read_population(&args.population)?;
    let mode = analysis_mode(args.mode, args.workers, args.reps, args.seed);
    let (table, _) = table_parameters(&pop, &args.n, mode);
    let mut tables = vec![table];
    if let Some(list) = &args.estimators {
        if args.mode != Mode::Exact {
            return Err(Failure::Usage(
                "--estimators comparison needs --mode exact".to_string(),
            ));
        }
        let choices =
            EstimatorChoice::parse_list(list).map_err(|e| Failure::Usage(e.to_string()))?;
        for &n in &args.n {
            tables.push(table_exact_vs_first_order(&pop, n, &choices, args.workers)?);
        }
    }
    Ok(render(&tables, &args.output))
}

fn weights(args: WeightArgs, warnings: &mut Vec<String>) -> CliResult<String> {
    let sets = load_sets(&args.source, warnings)?;
    if sets.is_empty() {
        return Err(Failure::Data(anyhow!("no parameter sets to solve")));
    }
    let inputs = WeightInputs {
        a: args.a,
        b: args.b,
        alpha: args.alpha,
        g: args.g,
        delta: args.delta,
    };
    let reports = sets
        .iter()
        .map(|ps| solve_for_parameters(ps, &inputs).with_context(|| format!("solving {}", ps.name)))
        .collect::<anyhow::Result<Vec<_>>>()?;

    if args.output.format == Format::JsonLike {
        #[derive(Serialize)]
        struct Entry<'a> {
            set: &'a str,
            inputs: WeightInputs,
            #[serde(flatten)]
            report: &'a WeightReport,
        }
        let entries: Vec<Entry> = sets
            .iter()
            .zip(&reports)
            .map(|(ps, report)| Entry {
                set: &ps.name,
                inputs,
                report,
            })
            .collect();
        return Ok(json(&serde_json::json!({ "weights": entries })));
    }

    let mut table = ReportTable::new(
        format!(
            "Optimal weights (a={}, b={}, alpha={}, g={}, delta={})",
            args.a, args.b, args.alpha, args.g, args.delta
        ),
        sets.iter().map(|s| s.name.clone()).collect(),
    );
    type Row = (&'static str, fn(&WeightReport) -> f64);
    let rows: [Row; 15] = [
        ("w0", |r| r.solution.w0),
        ("w1", |r| r.solution.w1),
        ("w2", |r| r.solution.w2),
        ("k", |r| r.solution.k),
        ("nu", |r| r.nu),
        ("B(t1)", |r| r.bias_t1),
        ("B(t2)", |r| r.bias_t2),
        ("Delta_r", |r| r.solution.delta_r),
        ("Delta_0", |r| r.solution.delta_0),
        ("Delta_1", |r| r.solution.delta_1),
        ("Delta_2", |r| r.solution.delta_2),
        ("residual_weight_sum", |r| r.residuals.weight_sum),
        ("residual_composite", |r| r.residuals.composite),
        ("residual_bias", |r| r.residuals.bias),
        ("mse", |r| r.mse),
    ];
    for (label, get) in rows {
        table.push_row(label, reports.iter().map(|r| Cell::Value(get(r))).collect());
    }
    let precision = args.output.precision.max(10);
    Ok(render(
        &[table],
        &OutputArgs {
            format: args.output.format,
            precision,
        },
    ))
}

fn simulate(args: SimulateArgs) -> CliResult<String> {
    let pop = read_population(&args.population)?;
    let n = args.n;
    if n == 0 || n > pop.len() {
        return Err(Failure::Data(anyhow!(
            "sample size {n} must lie in 1..={}",
            pop.len()
        )));
    }
    let enumerable = binomial(pop.len(), n).is_some_and(|c| c <= args.exact_limit);
    let exact = if enumerable {
        Some(exact_sampling_distribution(&pop, n, args.workers)?)
    } else {
        None
    };
    // The estimators need the true mean of sample medians.
    let mbar = match (&exact, median_distribution_fast(&pop, n)) {
        (Some(ds), _) => ds.Mbar,
        (None, Ok(md)) => md.Mbar,
        (None, Err(e)) => {
            return Err(Failure::Data(anyhow!(
                "cannot obtain the mean of sample medians ({e}); raise --exact-limit"
            )))
        }
    };

    let choices = choices(&args.estimators, &args.spec)?;
    let params = medest_core::population_params(&pop);
    let beta1 = params.beta1_x.unwrap_or(f64::NAN);
    let rho = params.rho_xy.unwrap_or(f64::NAN);
    let mut specs = Vec::new();
    let mut notes = Vec::new();
    for choice in &choices {
        match choice.spec(beta1, rho) {
            Some(Ok(spec)) => specs.push(spec),
            Some(Err(e)) => notes.push(format!("{}: {e}", choice.label())),
            None => notes.push("t(opt) has no fixed weights to simulate; skipped".to_string()),
        }
    }

    let cfg = McConfig {
        workers: args.workers,
        ..McConfig::new(n, args.reps, args.seed)
    };
    let mc = mc_run(&pop, &specs, mbar, &cfg)?;

    let mut summary = ReportTable::new(
        format!(
            "Sampling distribution: {} (n={n}, reps={}, seed={})",
            pop.name(),
            args.reps,
            args.seed
        ),
        vec!["monte_carlo".to_string(), "exact".to_string()],
    )
    .with_precision(args.output.precision);
    type Field = fn(&medest_core::DistributionSummary) -> f64;
    let fields: [(&str, Field); 7] = [
        ("mean_ybar", |d| d.mean_ybar),
        ("Mbar", |d| d.Mbar),
        ("Vybar", |d| d.Vybar),
        ("Vxbar", |d| d.Vxbar),
        ("Vm", |d| d.Vm),
        ("Cov_ym", |d| d.Cov_ym),
        ("Cov_yx", |d| d.Cov_yx),
    ];
    for (label, get) in fields {
        let exact_cell = exact
            .as_ref()
            .map_or(Cell::Unavailable("not enumerated".into()), |d| {
                Cell::Value(get(d))
            });
        summary.push_row(label, vec![Cell::Value(get(&mc.summary)), exact_cell]);
    }

    let mut per_estimator = ReportTable::new(
        "Estimator MSE",
        [
            "mc_mse",
            "std_error",
            "exact_mse",
            "z_vs_exact",
            "first_order_mse",
            "failures",
        ]
        .map(String::from)
        .to_vec(),
    )
    .with_precision(args.output.precision.max(6));
    let ps = exact
        .as_ref()
        .and_then(|ds| ParameterSet::from_summary(&pop, ds).ok());
    for (spec, choice) in specs.iter().zip(
        choices
            .iter()
            .filter(|c| c.spec(beta1, rho).is_some_and(|s| s.is_ok())),
    ) {
        let mse = mc.mse[&spec.name];
        let se = mc.standard_error_mse[&spec.name];
        let exact_mse = if enumerable {
            exact_estimator_mse(&pop, n, spec, mbar, args.workers).map_err(|e| e.to_string())
        } else {
            Err("not enumerated".to_string())
        };
        let z = match &exact_mse {
            Ok(e) if se > 0.0 => Cell::Value((mse - e) / se),
            _ => Cell::Unavailable("needs exact value and positive SE".into()),
        };
        let first = ps
            .as_ref()
            .map_or(Cell::Unavailable("not enumerated".into()), |ps| {
                first_order_mse(ps, choice)
                    .map_or_else(|e| Cell::Unavailable(e.to_string()), Cell::Value)
            });
        per_estimator.push_row(
            spec.name.clone(),
            vec![
                if mse.is_finite() {
                    Cell::Value(mse)
                } else {
                    Cell::Unavailable("no defined replicate".into())
                },
                Cell::Value(se),
                exact_mse.map_or_else(Cell::Unavailable, Cell::Value),
                z,
                first,
                Cell::Count(mc.failures[&spec.name]),
            ],
        );
    }
    per_estimator.notes = notes;
    Ok(render(&[summary, per_estimator], &args.output))
}

fn json<T: Serialize>(value: &T) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("report values serialize");
    text.push('\n');
    text
}

fn render(tables: &[ReportTable], output: &OutputArgs) -> String {
    match output.format {
        Format::Text => tables
            .iter()
            .map(|t| t.clone().with_precision(output.precision).to_text())
            .collect::<Vec<_>>()
            .join("\n"),
        Format::Csv => tables
            .iter()
            .map(|t| t.clone().with_precision(output.precision).to_csv("row"))
            .collect::<Vec<_>>()
            .join("\n"),
        Format::JsonLike => json(&serde_json::json!({ "tables": tables })),
    }
}
