//! The `snmc` command-line front end.
//!
//! ```text
//! snmc allocate --rho 2 --T 1000
//! snmc rho --model linear --sigma 1 --r0 10000 --pairs-out pilot.csv
//! snmc estimate --config run.toml
//! snmc bench --config bench.toml --records rec.csv --summary sum.csv --svg box.svg
//! snmc plot --records rec.csv --model linear --sigma 1 --out box.svg
//! ```
//!
//! Exit codes: 0 success, 2 usage or configuration, 3 budget, 4 external
//! model, 1 anything else. `SNMC_WORKERS` overrides the configured worker
//! count; `--workers` overrides both.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::allocation::{estimate_rho, m_opt, m_opt_real, plan, BudgetLedger, RhoMode, Strategy};
use crate::bench::ReplicationRecord;
use crate::bench::{
    read_records, run_experiment, summarize, write_records, write_summary, ExperimentConfig,
};
use crate::benchmarks::Builtin;
use crate::error::Error;
use crate::estimators::IndexChoice;
use crate::external::{ExternalModel, DEFAULT_TIMEOUT};
use crate::model::{Group, GroupSpec, InputDistribution, InputSpec, Phi, Qoi, StochasticModel};
use crate::pipeline::{run_estimation, run_pilot, EstimationConfig};
use crate::svg::boxplot_svg;

pub const WORKERS_ENV: &str = "SNMC_WORKERS";

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Run(#[from] Error),
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Run(Error::Io(e))
    }
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Run(e) if e.is_budget() => 3,
            CliError::Run(e) if e.is_protocol() => 4,
            CliError::Run(e) => match e.root() {
                Error::Invalid(_) | Error::DimensionMismatch { .. } | Error::MissingTruth(_) => 2,
                _ => 1,
            },
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

#[derive(Debug, Parser)]
#[command(
    name = "snmc",
    version,
    about = "Sobol' indices of stochastic simulators by nested Monte Carlo"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Optimal repetition count for a noise level and budget.
    Allocate(AllocateArgs),
    /// Runs a pilot and estimates the intrinsic noise.
    Rho(RhoArgs),
    /// Estimates first-order (and total) indices of one model.
    Estimate(EstimateArgs),
    /// Replicated comparison of allocation strategies on a built-in model.
    Bench(BenchArgs),
    /// Boxplot SVG from a records CSV.
    Plot(PlotArgs),
}

#[derive(Debug, Args)]
#[command(group = clap::ArgGroup::new("noise").required(true).args(["rho", "rho_from"]))]
struct AllocateArgs {
    #[arg(long)]
    rho: Option<f64>,
    /// Pilot CSV with columns `phi1,phi2`.
    #[arg(long, value_name = "CSV")]
    rho_from: Option<PathBuf>,
    #[arg(long = "T", value_name = "T")]
    budget: u64,
    #[arg(long, default_value = "paper-literal")]
    rho_mode: RhoMode,
}

#[derive(Debug, Clone, Default, Args)]
struct ModelArgs {
    /// linear, ishigami or external.
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    a: Option<f64>,
    #[arg(long)]
    b: Option<f64>,
    /// External model command line, split on whitespace.
    #[arg(long = "command", value_name = "CMD")]
    external: Option<String>,
    /// Input law of one coordinate, e.g. `normal` or `uniform(-1,1)`; repeat per coordinate.
    #[arg(long = "input", value_name = "LAW")]
    inputs: Vec<String>,
    /// Seconds to wait for each external reply.
    #[arg(long)]
    timeout: Option<f64>,
}

#[derive(Debug, Args)]
struct RhoArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, default_value_t = 10)]
    r0: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "paper-literal")]
    rho_mode: RhoMode,
    /// Writes the pilot pairs as CSV.
    #[arg(long, value_name = "CSV")]
    pairs_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EstimateArgs {
    #[arg(long, value_name = "TOML")]
    config: Option<PathBuf>,
    #[command(flatten)]
    model: ModelArgs,
    /// Group of 1-based coordinates such as `1+3`; repeatable.
    #[arg(long = "group", value_name = "GROUP")]
    groups: Vec<Group>,
    /// Also estimates each complement to report total indices.
    #[arg(long)]
    totals: bool,
    #[arg(long = "T", value_name = "T")]
    budget: Option<u64>,
    #[arg(long)]
    r0: Option<u64>,
    #[arg(long)]
    h: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    replication: Option<u64>,
    #[arg(long)]
    strategy: Option<Strategy>,
    #[arg(long)]
    rho_mode: Option<RhoMode>,
    /// JSON report path; stdout when neither report nor CSV is given.
    #[arg(long, value_name = "PATH")]
    report: Option<PathBuf>,
    #[arg(long, value_name = "PATH")]
    csv: Option<PathBuf>,
    /// Saves the evaluation table.
    #[arg(long, value_name = "PATH")]
    save_table: Option<PathBuf>,
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Debug, Args)]
struct BenchArgs {
    #[arg(long, value_name = "TOML")]
    config: Option<PathBuf>,
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long = "group", value_name = "GROUP")]
    groups: Vec<Group>,
    /// Budget grid, e.g. `1000,10000,100000`.
    #[arg(long = "T", value_name = "T", value_delimiter = ',')]
    budgets: Vec<u64>,
    #[arg(long = "strategy", value_name = "STRATEGY")]
    strategies: Vec<Strategy>,
    #[arg(long)]
    replications: Option<usize>,
    #[arg(long)]
    r0: Option<u64>,
    #[arg(long)]
    h: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    rho_mode: Option<RhoMode>,
    #[arg(long, value_name = "PATH")]
    records: Option<PathBuf>,
    #[arg(long, value_name = "PATH")]
    summary: Option<PathBuf>,
    #[arg(long, value_name = "PATH")]
    svg: Option<PathBuf>,
    /// Summarize raw instead of regularized estimates.
    #[arg(long)]
    raw: bool,
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Debug, Args)]
struct PlotArgs {
    #[arg(long, value_name = "CSV")]
    records: PathBuf,
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    #[arg(long)]
    raw: bool,
}

/// Model section of a configuration file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ModelSpec {
    Linear {
        sigma: f64,
    },
    Ishigami {
        a: f64,
        b: f64,
    },
    External {
        command: Vec<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        inputs: Option<Vec<String>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        timeout: Option<f64>,
    },
}

impl ModelSpec {
    pub fn builtin(&self) -> Option<Builtin> {
        match *self {
            ModelSpec::Linear { sigma } => Some(Builtin::Linear { sigma }),
            ModelSpec::Ishigami { a, b } => Some(Builtin::Ishigami { a, b }),
            ModelSpec::External { .. } => None,
        }
    }

    pub fn build(&self) -> crate::Result<Box<dyn StochasticModel>> {
        match self {
            ModelSpec::External {
                command,
                inputs,
                timeout,
            } => {
                let inputs = match inputs {
                    Some(laws) => Some(InputSpec::new(
                        laws.iter()
                            .map(|l| l.parse())
                            .collect::<crate::Result<Vec<InputDistribution>>>()?,
                    )?),
                    None => None,
                };
                let timeout = match timeout {
                    Some(s) if *s > 0.0 && s.is_finite() => Duration::from_secs_f64(*s),
                    Some(s) => {
                        return Err(Error::Invalid(format!("timeout must be positive, got {s}")))
                    }
                    None => DEFAULT_TIMEOUT,
                };
                Ok(Box::new(ExternalModel::connect(
                    command.clone(),
                    inputs,
                    timeout,
                )?))
            }
            builtin => builtin.builtin().expect("built-in model").build(),
        }
    }
}

impl ModelArgs {
    fn is_empty(&self) -> bool {
        self.model.is_none()
            && self.sigma.is_none()
            && self.a.is_none()
            && self.b.is_none()
            && self.external.is_none()
            && self.inputs.is_empty()
            && self.timeout.is_none()
    }

    /// Model from flags; parameters override those of `base` when the kind
    /// is unchanged.
    fn resolve(&self, base: Option<ModelSpec>) -> CliResult<ModelSpec> {
        if self.is_empty() {
            return base.ok_or_else(|| usage("no model given (use --model or a config file)"));
        }
        let kind = match (&self.model, &base, &self.external) {
            (Some(k), _, _) => k.to_ascii_lowercase(),
            (None, _, Some(_)) => "external".to_string(),
            (None, Some(ModelSpec::Linear { .. }), _) => "linear".to_string(),
            (None, Some(ModelSpec::Ishigami { .. }), _) => "ishigami".to_string(),
            (None, Some(ModelSpec::External { .. }), _) => "external".to_string(),
            (None, None, None) => return Err(usage("--model is required")),
        };
        match kind.as_str() {
            "linear" => {
                let default = match base {
                    Some(ModelSpec::Linear { sigma }) => sigma,
                    _ => 1.0,
                };
                Ok(ModelSpec::Linear {
                    sigma: self.sigma.unwrap_or(default),
                })
            }
            "ishigami" => {
                let (da, db) = match base {
                    Some(ModelSpec::Ishigami { a, b }) => (a, b),
                    _ => (7.0, 0.05),
                };
                Ok(ModelSpec::Ishigami {
                    a: self.a.unwrap_or(da),
                    b: self.b.unwrap_or(db),
                })
            }
            "external" => {
                let (bc, bi, bt) = match base {
                    Some(ModelSpec::External {
                        command,
                        inputs,
                        timeout,
                    }) => (Some(command), inputs, timeout),
                    _ => (None, None, None),
                };
                let command = match &self.external {
                    Some(cmd) => cmd.split_whitespace().map(str::to_string).collect(),
                    None => bc.ok_or_else(|| usage("external model needs --command"))?,
                };
                let inputs = if self.inputs.is_empty() {
                    bi
                } else {
                    Some(self.inputs.clone())
                };
                Ok(ModelSpec::External {
                    command,
                    inputs,
                    timeout: self.timeout.or(bt),
                })
            }
            other => Err(usage(format!(
                "unknown model {other:?} (expected linear, ishigami or external)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputPaths {
    pub report: Option<PathBuf>,
    pub csv: Option<PathBuf>,
    pub table: Option<PathBuf>,
    pub records: Option<PathBuf>,
    pub summary: Option<PathBuf>,
    pub svg: Option<PathBuf>,
}

/// Configuration file of `snmc estimate`.
///
/// ```toml
/// budget = 10000
/// r0 = 10
/// h = 0.01
/// seed = 1
/// strategy = "opt"          # "fixed(5)", "sqrt" or "opt"
/// rho_mode = "paper-literal" # or "corrected"
/// groups = [[1], [2]]
/// totals = false
/// workers = 4
///
/// [model]
/// kind = "linear"            # "ishigami" takes a and b
/// sigma = 1.0                # "external" takes command, inputs, timeout
///
/// [output]
/// report = "report.json"
/// csv = "estimates.csv"
/// table = "run.snmct"
/// ```
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunFile {
    pub model: Option<ModelSpec>,
    pub budget: Option<u64>,
    pub r0: Option<u64>,
    pub h: Option<f64>,
    pub seed: Option<u64>,
    pub replication: Option<u64>,
    pub strategy: Option<Strategy>,
    pub rho_mode: Option<RhoMode>,
    #[serde(default)]
    pub groups: Vec<Group>,
    #[serde(default)]
    pub totals: bool,
    pub workers: Option<usize>,
    #[serde(default)]
    pub output: OutputPaths,
}

/// Configuration file of `snmc bench`. Same layout as [`RunFile`] with
/// `budgets`, `strategies` and `replications` in place of the single-run
/// fields, and `records`, `summary`, `svg` under `[output]`.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchFile {
    pub model: Option<ModelSpec>,
    #[serde(default)]
    pub budgets: Vec<u64>,
    #[serde(default)]
    pub strategies: Vec<Strategy>,
    pub replications: Option<usize>,
    pub r0: Option<u64>,
    pub h: Option<f64>,
    pub seed: Option<u64>,
    pub rho_mode: Option<RhoMode>,
    #[serde(default)]
    pub groups: Vec<Group>,
    #[serde(default)]
    pub raw: bool,
    pub workers: Option<usize>,
    #[serde(default)]
    pub output: OutputPaths,
}

fn load_toml<T: for<'de> Deserialize<'de> + Default>(path: Option<&Path>) -> CliResult<T> {
    let Some(path) = path else {
        return Ok(T::default());
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn workers(flag: Option<usize>, config: Option<usize>) -> CliResult<Option<usize>> {
    if flag.is_some() {
        return Ok(flag);
    }
    match std::env::var(WORKERS_ENV) {
        Ok(v) => v.trim().parse::<usize>().map(Some).map_err(|_| {
            usage(format!(
                "{WORKERS_ENV} must be a positive integer, got {v:?}"
            ))
        }),
        Err(_) => Ok(config),
    }
}

fn provenance(config: &impl Serialize) -> String {
    let json = serde_json::to_string(config).expect("configs serialize");
    format!("snmc {} config={json}", env!("CARGO_PKG_VERSION"))
}

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).map_err(|e| {
        Error::Io(io::Error::new(e.kind(), format!("{}: {e}", path.display())))
    })?))
}

/// Runs the command line `args` (program name first) and returns the exit code.
pub fn run<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let outcome = match cli.command {
        Command::Allocate(a) => allocate(a),
        Command::Rho(a) => rho(a),
        Command::Estimate(a) => estimate(a),
        Command::Bench(a) => bench(a),
        Command::Plot(a) => plot(a),
    };
    match outcome {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("snmc: error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            e.exit_code()
        }
    }
}

pub fn main() -> i32 {
    run(std::env::args_os())
}

fn read_pairs(path: &Path) -> CliResult<Vec<(f64, f64)>> {
    let file =
        File::open(path).map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(file);
    let mut pairs = Vec::new();
    for (line, row) in reader.records().enumerate() {
        let row = row.map_err(Error::from)?;
        let field = |i: usize| -> CliResult<f64> {
            row.get(i)
                .and_then(|s| s.trim().parse().ok())
                .ok_or_else(|| {
                    usage(format!(
                        "{} row {}: expected two numbers",
                        path.display(),
                        line + 1
                    ))
                })
        };
        pairs.push((field(0)?, field(1)?));
    }
    Ok(pairs)
}

fn allocate(a: AllocateArgs) -> CliResult<()> {
    let rho = match (a.rho, &a.rho_from) {
        (Some(r), _) => r,
        (None, Some(path)) => estimate_rho(&read_pairs(path)?, a.rho_mode)?.value,
        (None, None) => return Err(usage("--rho or --rho-from is required")),
    };
    let p = plan(a.budget, Strategy::Opt, Some(rho))?;
    println!("m={} n={} m_real={}", p.m, p.n, m_opt_real(rho, a.budget));
    debug_assert_eq!(p.m, m_opt(rho, a.budget));
    Ok(())
}

fn rho(a: RhoArgs) -> CliResult<()> {
    let spec = a.model.resolve(None)?;
    let model = spec.build()?;
    let qoi = Qoi::Identity;
    let phi = Phi::new(model.as_ref(), &qoi);
    let pilot = run_pilot(&phi, a.r0, a.seed, 0, &BudgetLedger::new(2 * a.r0))?;
    let estimate = estimate_rho(&pilot.pairs, a.rho_mode)?;
    if let Some(path) = &a.pairs_out {
        let mut out = create(path)?;
        writeln!(out, "# {}", provenance(&(&spec, a.r0, a.seed, a.rho_mode)))?;
        writeln!(out, "phi1,phi2")?;
        for (x, y) in &pilot.pairs {
            writeln!(out, "{x},{y}")?;
        }
        out.flush()?;
    }
    let mode = match a.rho_mode {
        RhoMode::PaperLiteral => "paper-literal",
        RhoMode::Corrected => "corrected",
    };
    println!("rho={} r0={} mode={mode}", estimate.value, a.r0);
    Ok(())
}

#[derive(Serialize)]
struct EffectiveRun<'a> {
    model: &'a ModelSpec,
    groups: &'a [Group],
    #[serde(flatten)]
    config: &'a EstimationConfig,
}

fn estimate(a: EstimateArgs) -> CliResult<()> {
    let file: RunFile = load_toml(a.config.as_deref())?;
    let spec = a.model.resolve(file.model.clone())?;
    let defaults = EstimationConfig::default();
    let config = EstimationConfig {
        budget: a.budget.or(file.budget).unwrap_or(defaults.budget),
        r0: a.r0.or(file.r0).unwrap_or(defaults.r0),
        h: a.h.or(file.h).unwrap_or(defaults.h),
        seed: a.seed.or(file.seed).unwrap_or(defaults.seed),
        replication: a
            .replication
            .or(file.replication)
            .unwrap_or(defaults.replication),
        strategy: a.strategy.or(file.strategy).unwrap_or(defaults.strategy),
        rho_mode: a.rho_mode.or(file.rho_mode).unwrap_or(defaults.rho_mode),
        workers: workers(a.workers, file.workers)?,
    };
    let model = spec.build()?;
    let p = model.dimension();
    let groups = if !a.groups.is_empty() {
        a.groups.clone()
    } else {
        file.groups.clone()
    };
    let mut groups = if groups.is_empty() {
        GroupSpec::singletons(p)?
    } else {
        GroupSpec::new(p, groups)?
    };
    if a.totals || file.totals {
        groups = groups.with_complements(p);
    }

    let run = run_estimation(model.as_ref(), &Qoi::Identity, &groups, &config)?;
    let line = provenance(&EffectiveRun {
        model: &spec,
        groups: groups.groups(),
        config: &config,
    });

    let report_path = a.report.or(file.output.report);
    let csv_path = a.csv.or(file.output.csv);
    let table_path = a.save_table.or(file.output.table);

    let mut json = serde_json::to_value(&run.report).expect("report serializes");
    json.as_object_mut()
        .expect("report is an object")
        .insert("provenance".into(), line.clone().into());
    let json = serde_json::to_string_pretty(&json).expect("json");

    let records: Vec<ReplicationRecord> = run
        .report
        .first_order
        .iter()
        .map(|e| ReplicationRecord {
            budget: config.budget,
            n: run.report.n,
            m: run.report.m,
            strategy: config.strategy,
            group: e.group.clone(),
            replication: config.replication as usize,
            estimate_raw: e.raw,
            estimate_reg: e.regularized,
            h: config.h,
            seed: config.seed,
        })
        .collect();

    match &report_path {
        Some(path) => {
            let mut out = create(path)?;
            writeln!(out, "{json}")?;
            out.flush()?;
        }
        None if csv_path.is_none() => println!("{json}"),
        None => {}
    }
    if let Some(path) = &csv_path {
        write_records(create(path)?, &records, Some(&line))?;
    }
    if let Some(path) = &table_path {
        run.table.save(path)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct EffectiveBench<'a> {
    #[serde(flatten)]
    config: &'a ExperimentConfig,
    estimate: &'static str,
}

fn choice_label(raw: bool) -> (&'static str, IndexChoice) {
    if raw {
        ("raw", IndexChoice::Raw)
    } else {
        ("regularized", IndexChoice::Regularized)
    }
}

fn pick<T>(flag: Vec<T>, file: Vec<T>) -> Option<Vec<T>> {
    [flag, file].into_iter().find(|v| !v.is_empty())
}

fn bench(a: BenchArgs) -> CliResult<()> {
    let file: BenchFile = load_toml(a.config.as_deref())?;
    let spec = a.model.resolve(file.model.clone())?;
    let builtin = spec
        .builtin()
        .ok_or_else(|| usage("bench needs a built-in model with analytic indices"))?;
    let mut config = ExperimentConfig::new(builtin);
    if let Some(b) = pick(a.budgets.clone(), file.budgets.clone()) {
        config.budgets = b;
    }
    if let Some(s) = pick(a.strategies.clone(), file.strategies.clone()) {
        config.strategies = s;
    }
    if let Some(g) = pick(a.groups.clone(), file.groups.clone()) {
        config.groups = g;
    }
    config.replications = a
        .replications
        .or(file.replications)
        .unwrap_or(config.replications);
    config.r0 = a.r0.or(file.r0).unwrap_or(config.r0);
    config.h = a.h.or(file.h).unwrap_or(config.h);
    config.seed = a.seed.or(file.seed).unwrap_or(config.seed);
    config.rho_mode = a.rho_mode.or(file.rho_mode).unwrap_or(config.rho_mode);
    config.workers = workers(a.workers, file.workers)?;
    config.validate()?;
    let truths = config.truths()?;

    let (label, choice) = choice_label(a.raw || file.raw);
    let line = provenance(&EffectiveBench {
        config: &config,
        estimate: label,
    });
    let records = run_experiment(&config)?;
    let summaries = summarize(&records, &truths, choice)?;

    let records_path = a.records.or(file.output.records);
    let summary_path = a.summary.or(file.output.summary);
    let svg_path = a.svg.or(file.output.svg);
    match &records_path {
        Some(path) => write_records(create(path)?, &records, Some(&line))?,
        None => write_records(io::stdout().lock(), &records, Some(&line))?,
    }
    if let Some(path) = &summary_path {
        write_summary(create(path)?, &summaries, Some(&line))?;
    }
    if let Some(path) = &svg_path {
        let mut out = create(path)?;
        out.write_all(
            boxplot_svg(
                &summaries,
                &format!("{} ({label})", config.model.build()?.name()),
            )
            .as_bytes(),
        )?;
        out.flush()?;
    }
    Ok(())
}

fn plot(a: PlotArgs) -> CliResult<()> {
    let spec = a.model.resolve(None)?;
    let builtin = spec
        .builtin()
        .ok_or_else(|| usage("plot needs a built-in model for the true indices"))?;
    let file = File::open(&a.records)
        .map_err(|e| usage(format!("cannot read {}: {e}", a.records.display())))?;
    let records = read_records(file)?;
    let mut groups: Vec<Group> = Vec::new();
    for r in &records {
        if !groups.contains(&r.group) {
            groups.push(r.group.clone());
        }
    }
    let truths = groups
        .into_iter()
        .map(|g| {
            builtin
                .analytic_first_order(&g)
                .map(|s| (g.clone(), s))
                .ok_or_else(|| Error::MissingTruth(g.label()))
        })
        .collect::<crate::Result<Vec<_>>>()?;
    let (label, choice) = choice_label(a.raw);
    let summaries = summarize(&records, &truths, choice)?;
    let svg = boxplot_svg(
        &summaries,
        &format!("{} ({label})", builtin.build()?.name()),
    );
    match &a.out {
        Some(path) => {
            let mut out = create(path)?;
            out.write_all(svg.as_bytes())?;
            out.flush()?;
        }
        None => print!("{svg}"),
    }
    Ok(())
}
