//! Replicated strategy comparisons against analytic indices.

use std::collections::HashMap;
use std::hash::Hasher;
use std::io::Write;

use fnv::FnvHasher;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::allocation::{RhoMode, Strategy};
use crate::benchmarks::Builtin;
use crate::error::{Error, Result};
use crate::estimators::IndexChoice;
use crate::model::{Group, GroupSpec, Qoi};
use crate::pipeline::{run_estimation, EstimationConfig};

pub const RECORDS_HEADER: [&str; 10] = [
    "T",
    "n",
    "m",
    "strategy",
    "group",
    "replication",
    "estimate_raw",
    "estimate_reg",
    "h",
    "seed",
];
pub const SUMMARY_HEADER: [&str; 9] = [
    "T", "strategy", "group", "bias", "variance", "mse", "q1", "median", "q3",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: Builtin,
    /// Per-branch budgets `T`, strictly increasing.
    pub budgets: Vec<u64>,
    pub strategies: Vec<Strategy>,
    pub replications: usize,
    pub r0: u64,
    pub h: f64,
    pub seed: u64,
    pub groups: Vec<Group>,
    #[serde(default)]
    pub rho_mode: RhoMode,
    #[serde(skip)]
    pub workers: Option<usize>,
}

impl ExperimentConfig {
    /// Desk-scale defaults: `T ∈ {10³, 10⁴, 10⁵}`, 30 replications, all
    /// three strategies, one singleton group per input.
    pub fn new(model: Builtin) -> Self {
        ExperimentConfig {
            model,
            budgets: vec![1_000, 10_000, 100_000],
            strategies: vec![Strategy::Fixed(5), Strategy::Sqrt, Strategy::Opt],
            replications: 30,
            r0: 10,
            h: 1e-2,
            seed: 0,
            groups: (1..=model.dimension())
                .map(|c| Group::new(&[c]).expect("singleton"))
                .collect(),
            rho_mode: RhoMode::PaperLiteral,
            workers: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.replications < 2 {
            return Err(Error::invalid("at least two replications are needed"));
        }
        if self.budgets.is_empty() || self.budgets.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid(
                "the budget grid must be non-empty and strictly increasing",
            ));
        }
        if let Some(t) = self.budgets.iter().find(|&&t| t < 2 * self.r0) {
            return Err(Error::invalid(format!(
                "budget {t} is smaller than the pilot 2 r0 = {}",
                2 * self.r0
            )));
        }
        if self.strategies.is_empty() {
            return Err(Error::invalid("no strategy selected"));
        }
        GroupSpec::new(self.model.dimension(), self.groups.clone())?;
        self.truths().map(|_| ())
    }

    /// Analytic first-order index of every configured group.
    pub fn truths(&self) -> Result<Vec<(Group, f64)>> {
        self.groups
            .iter()
            .map(|g| {
                self.model
                    .analytic_first_order(g)
                    .map(|s| (g.clone(), s))
                    .ok_or_else(|| Error::MissingTruth(g.label()))
            })
            .collect()
    }

    /// Seed of one replication, a hash of the master seed and the cell.
    pub fn replication_seed(&self, budget: u64, strategy: Strategy, replication: usize) -> u64 {
        let mut h = FnvHasher::default();
        h.write_u64(self.seed);
        h.write_u64(budget);
        h.write(strategy.to_string().as_bytes());
        h.write_u64(replication as u64);
        h.finish()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationRecord {
    pub budget: u64,
    pub n: u64,
    pub m: u64,
    pub strategy: Strategy,
    pub group: Group,
    pub replication: usize,
    pub estimate_raw: Option<f64>,
    pub estimate_reg: f64,
    pub h: f64,
    pub seed: u64,
}

impl ReplicationRecord {
    pub fn estimate(&self, choice: IndexChoice) -> Option<f64> {
        match choice {
            IndexChoice::Raw => self.estimate_raw,
            IndexChoice::Regularized => Some(self.estimate_reg),
        }
    }
}

/// Runs every `(T, strategy, replication)` cell; records come back ordered
/// by budget, strategy, replication, then group.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<ReplicationRecord>> {
    config.validate()?;
    match config.workers {
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w.max(1))
            .build()
            .map_err(|e| Error::invalid(format!("thread pool: {e}")))?
            .install(|| experiment(config)),
        None => experiment(config),
    }
}

fn experiment(config: &ExperimentConfig) -> Result<Vec<ReplicationRecord>> {
    let model = config.model.build()?;
    let groups = GroupSpec::new(model.dimension(), config.groups.clone())?;
    let jobs: Vec<(u64, Strategy, usize)> = config
        .budgets
        .iter()
        .flat_map(|&t| {
            config
                .strategies
                .iter()
                .flat_map(move |&s| (0..config.replications).map(move |r| (t, s, r)))
        })
        .collect();
    let runs: Vec<Result<Vec<ReplicationRecord>>> = jobs
        .par_iter()
        .map(|&(budget, strategy, replication)| {
            let seed = config.replication_seed(budget, strategy, replication);
            let cfg = EstimationConfig {
                budget,
                r0: config.r0,
                h: config.h,
                seed,
                replication: replication as u64,
                strategy,
                rho_mode: config.rho_mode,
                workers: None,
            };
            let run =
                run_estimation(model.as_ref(), &Qoi::Identity, &groups, &cfg).map_err(|e| {
                    Error::Replication {
                        budget,
                        strategy: strategy.to_string(),
                        replication,
                        source: Box::new(e),
                    }
                })?;
            let report = run.report;
            Ok(report
                .first_order
                .into_iter()
                .map(|e| ReplicationRecord {
                    budget,
                    n: report.n,
                    m: report.m,
                    strategy,
                    group: e.group,
                    replication,
                    estimate_raw: e.raw,
                    estimate_reg: e.regularized,
                    h: e.h,
                    seed,
                })
                .collect())
        })
        .collect();
    let mut records = Vec::with_capacity(jobs.len() * groups.len());
    for run in runs {
        records.extend(run?);
    }
    Ok(records)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategySummary {
    pub budget: u64,
    pub strategy: Strategy,
    pub group: Group,
    pub count: usize,
    pub truth: f64,
    pub mean: f64,
    pub bias: f64,
    /// Sample variance with divisor `N - 1`.
    pub variance: f64,
    pub mse: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub min: f64,
    pub max: f64,
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Bias, variance, MSE and quartiles per `(T, strategy, group)`, in order of
/// first appearance.
pub fn summarize(
    records: &[ReplicationRecord],
    truths: &[(Group, f64)],
    choice: IndexChoice,
) -> Result<Vec<StrategySummary>> {
    let mut index: HashMap<(u64, Strategy, Group), usize> = HashMap::new();
    let mut cells: Vec<((u64, Strategy, Group), Vec<f64>)> = Vec::new();
    for r in records {
        let value = r.estimate(choice).ok_or_else(|| {
            Error::invalid(format!(
                "undefined raw estimate (T={}, {}, group {}, replication {})",
                r.budget, r.strategy, r.group, r.replication
            ))
        })?;
        let key = (r.budget, r.strategy, r.group.clone());
        let slot = *index.entry(key.clone()).or_insert_with(|| {
            cells.push((key, Vec::new()));
            cells.len() - 1
        });
        cells[slot].1.push(value);
    }
    cells
        .into_iter()
        .map(|((budget, strategy, group), mut values)| {
            let truth = truths
                .iter()
                .find(|(g, _)| *g == group)
                .map(|(_, s)| *s)
                .ok_or_else(|| Error::MissingTruth(group.label()))?;
            let count = values.len();
            let nf = count as f64;
            let mean = values.iter().sum::<f64>() / nf;
            let variance = if count > 1 {
                values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (nf - 1.0)
            } else {
                0.0
            };
            let mse = values.iter().map(|v| (v - truth).powi(2)).sum::<f64>() / nf;
            values.sort_by(f64::total_cmp);
            Ok(StrategySummary {
                budget,
                strategy,
                group,
                count,
                truth,
                mean,
                bias: mean - truth,
                variance,
                mse,
                q1: quantile(&values, 0.25),
                median: quantile(&values, 0.5),
                q3: quantile(&values, 0.75),
                min: values[0],
                max: values[count - 1],
            })
        })
        .collect()
}

/// `(T, MSE)` points of one strategy and group, in budget order.
pub fn mse_series(
    summaries: &[StrategySummary],
    strategy: Strategy,
    group: &Group,
) -> Vec<(u64, f64)> {
    let mut points: Vec<(u64, f64)> = summaries
        .iter()
        .filter(|s| s.strategy == strategy && &s.group == group)
        .map(|s| (s.budget, s.mse))
        .collect();
    points.sort_by_key(|p| p.0);
    points
}

/// Least-squares slope of `ln MSE` against `ln T`.
pub fn rate_fit(points: &[(u64, f64)]) -> Result<f64> {
    if points.len() < 3 {
        return Err(Error::invalid(format!(
            "rate fit needs at least 3 points, got {}",
            points.len()
        )));
    }
    if let Some(p) = points
        .iter()
        .find(|p| p.1.is_nan() || p.1 <= 0.0 || p.0 == 0)
    {
        return Err(Error::invalid(format!(
            "rate fit needs positive T and MSE, got {p:?}"
        )));
    }
    let xs: Vec<f64> = points.iter().map(|p| (p.0 as f64).ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::invalid(
            "rate fit needs at least two distinct budgets",
        ));
    }
    Ok(sxy / sxx)
}

fn provenance_line(out: &mut dyn Write, provenance: Option<&str>) -> Result<()> {
    if let Some(line) = provenance {
        writeln!(out, "# {line}")?;
    }
    Ok(())
}

/// Records CSV; an optional provenance comment line precedes the header.
pub fn write_records<W: Write>(
    mut out: W,
    records: &[ReplicationRecord],
    provenance: Option<&str>,
) -> Result<()> {
    provenance_line(&mut out, provenance)?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RECORDS_HEADER)?;
    for r in records {
        w.write_record([
            r.budget.to_string(),
            r.n.to_string(),
            r.m.to_string(),
            r.strategy.to_string(),
            r.group.label(),
            r.replication.to_string(),
            r.estimate_raw
                .map_or_else(|| "undefined".to_string(), |v| v.to_string()),
            r.estimate_reg.to_string(),
            r.h.to_string(),
            r.seed.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_summary<W: Write>(
    mut out: W,
    summaries: &[StrategySummary],
    provenance: Option<&str>,
) -> Result<()> {
    provenance_line(&mut out, provenance)?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SUMMARY_HEADER)?;
    for s in summaries {
        w.write_record([
            s.budget.to_string(),
            s.strategy.to_string(),
            s.group.label(),
            s.bias.to_string(),
            s.variance.to_string(),
            s.mse.to_string(),
            s.q1.to_string(),
            s.median.to_string(),
            s.q3.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Parses a records CSV written by [`write_records`]; comment lines are skipped.
pub fn read_records<R: std::io::Read>(input: R) -> Result<Vec<ReplicationRecord>> {
    fn num<T: std::str::FromStr>(row: &csv::StringRecord, i: usize) -> Option<T> {
        row.get(i)?.trim().parse().ok()
    }
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(input);
    let header = reader.headers()?.clone();
    if header.iter().ne(RECORDS_HEADER) {
        return Err(Error::invalid(format!(
            "unexpected records header {:?}",
            header.iter().collect::<Vec<_>>()
        )));
    }
    let mut records = Vec::new();
    for (line, row) in reader.records().enumerate() {
        let row = row?;
        let bad = |field: &str| Error::invalid(format!("records row {}: bad {field}", line + 1));
        let raw = match row.get(6).map(str::trim) {
            Some("undefined") => None,
            _ => Some(num(&row, 6).ok_or_else(|| bad("estimate_raw"))?),
        };
        records.push(ReplicationRecord {
            budget: num(&row, 0).ok_or_else(|| bad("T"))?,
            n: num(&row, 1).ok_or_else(|| bad("n"))?,
            m: num(&row, 2).ok_or_else(|| bad("m"))?,
            strategy: num(&row, 3).ok_or_else(|| bad("strategy"))?,
            group: num(&row, 4).ok_or_else(|| bad("group"))?,
            replication: num(&row, 5).ok_or_else(|| bad("replication"))?,
            estimate_raw: raw,
            estimate_reg: num(&row, 7).ok_or_else(|| bad("estimate_reg"))?,
            h: num(&row, 8).ok_or_else(|| bad("h"))?,
            seed: num(&row, 9).ok_or_else(|| bad("seed"))?,
        });
    }
    Ok(records)
}
