//! End-to-end estimation: pilot, noise estimate, allocation, completion of
//! the base branch, one pick-frozen branch per group, and index estimates.

use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::allocation::{
    completion_plan, estimate_rho, plan, AllocationPlan, BudgetLedger, RhoEstimate, RhoMode,
    Strategy,
};
use crate::error::{Error, Result};
use crate::estimators::{check_shift, theta_hat, RepetitionBlock, SobolEstimate};
use crate::model::{Group, GroupSpec, Phi, Qoi, StochasticModel};
use crate::rng::{NoiseStream, Role, StreamKey};
use crate::table::{Branch, EvaluationTable};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimationConfig {
    /// Per-branch budget `T`; the run may spend up to `T (l + 1)`.
    pub budget: u64,
    pub r0: u64,
    pub h: f64,
    pub seed: u64,
    #[serde(default)]
    pub replication: u64,
    pub strategy: Strategy,
    #[serde(default)]
    pub rho_mode: RhoMode,
    /// Worker threads; `None` uses the ambient rayon pool. Results do not
    /// depend on this.
    #[serde(skip)]
    pub workers: Option<usize>,
}

impl Default for EstimationConfig {
    fn default() -> Self {
        EstimationConfig {
            budget: 10_000,
            r0: 10,
            h: 1e-2,
            seed: 0,
            replication: 0,
            strategy: Strategy::Opt,
            rho_mode: RhoMode::PaperLiteral,
            workers: None,
        }
    }
}

/// Input point of exploration `i` in one of the two designs.
pub fn design_point(
    model: &dyn StochasticModel,
    seed: u64,
    replication: u64,
    tilde: bool,
    i: u64,
) -> Vec<f64> {
    let role = if tilde {
        Role::InputXTilde
    } else {
        Role::InputX
    };
    model.inputs().sample(&mut NoiseStream::new(StreamKey::new(
        seed,
        role,
        replication,
        i,
        0,
    )))
}

/// `(X̃_{∼u}, X_u)`: the redrawn point with the coordinates of `u` frozen.
pub fn frozen_point(x: &[f64], x_tilde: &[f64], group: &Group) -> Vec<f64> {
    let mut point = x_tilde.to_vec();
    for &c in group.coords() {
        point[c - 1] = x[c - 1];
    }
    point
}

fn noise(seed: u64, role: Role, replication: u64, i: usize, k: usize) -> NoiseStream {
    NoiseStream::new(StreamKey::new(seed, role, replication, i as u64, k as u64))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Pilot {
    /// `(φ(X⁽ⁱ⁾, Z⁽ⁱ'¹⁾), φ(X⁽ⁱ⁾, Z⁽ⁱ'²⁾))` for `i < r0`.
    pub pairs: Vec<(f64, f64)>,
    pub inputs: Vec<Vec<f64>>,
}

/// Evaluates the `r0 × 2` pilot, which doubles as the first two repetitions
/// of the first `r0` base rows. Charges `2 r0`.
pub fn run_pilot(
    phi: &Phi<'_>,
    r0: u64,
    seed: u64,
    replication: u64,
    ledger: &BudgetLedger,
) -> Result<Pilot> {
    if r0 == 0 {
        return Err(Error::invalid("r0 must be at least 1"));
    }
    ledger.charge(2 * r0)?;
    let model = phi.model();
    type Row = (Vec<f64>, (f64, f64));
    let rows: Vec<Result<Row>> = (0..r0 as usize)
        .into_par_iter()
        .map(|i| {
            let x = design_point(model, seed, replication, false, i as u64);
            let a = phi.evaluate(&x, &mut noise(seed, Role::Base, replication, i, 0))?;
            let b = phi.evaluate(&x, &mut noise(seed, Role::Base, replication, i, 1))?;
            Ok((x, (a, b)))
        })
        .collect();
    let (inputs, pairs) = rows
        .into_iter()
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .unzip();
    Ok(Pilot { pairs, inputs })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TotalIndex {
    pub group: Group,
    pub raw: Option<f64>,
    pub regularized: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerSummary {
    pub capacity: u64,
    pub spent: u64,
    pub pilot: u64,
    pub completion: u64,
    pub frozen: u64,
    pub evaluations: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimationReport {
    pub model: String,
    pub qoi: String,
    pub config: EstimationConfig,
    pub rho: RhoEstimate,
    pub plan: AllocationPlan,
    /// Explorations and repetitions actually used after completion.
    pub n: u64,
    pub m: u64,
    pub first_order: Vec<SobolEstimate>,
    /// `1 - S_{∼u}` for each group whose complement was also estimated.
    pub totals: Vec<TotalIndex>,
    pub ledger: LedgerSummary,
    /// Input draws of the budget `T` left unused because `n' < T`.
    pub unused_designs: u64,
    #[serde(skip)]
    pub elapsed: Duration,
}

impl EstimationReport {
    pub fn estimate(&self, group: &Group) -> Option<&SobolEstimate> {
        self.first_order.iter().find(|e| &e.group == group)
    }
}

#[derive(Debug, Clone)]
pub struct Estimation {
    pub report: EstimationReport,
    pub table: EvaluationTable,
}

/// Runs the full estimation of the first-order indices of `groups`.
pub fn run_estimation(
    model: &dyn StochasticModel,
    qoi: &Qoi,
    groups: &GroupSpec,
    config: &EstimationConfig,
) -> Result<Estimation> {
    match config.workers {
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w.max(1))
            .build()
            .map_err(|e| Error::invalid(format!("thread pool: {e}")))?
            .install(|| estimate(model, qoi, groups, config)),
        None => estimate(model, qoi, groups, config),
    }
}

fn estimate(
    model: &dyn StochasticModel,
    qoi: &Qoi,
    groups: &GroupSpec,
    config: &EstimationConfig,
) -> Result<Estimation> {
    let started = Instant::now();
    let p = model.dimension();
    check_shift(config.h)?;
    if config.r0 == 0 {
        return Err(Error::invalid("r0 must be at least 1"));
    }
    if let Some(g) = groups
        .groups()
        .iter()
        .find(|g| g.coords().iter().any(|&c| c > p))
    {
        return Err(Error::invalid(format!(
            "group {g} does not fit a {p}-dimensional model"
        )));
    }
    let budget = config.budget;
    if budget < 2 * config.r0 {
        return Err(Error::PilotExceedsBudget {
            needed: 2 * config.r0,
            budget,
        });
    }
    let l = groups.len() as u64;
    let (seed, rep) = (config.seed, config.replication);
    let ledger = BudgetLedger::for_run(budget, l);
    let phi = Phi::new(model, qoi);

    let pilot = run_pilot(&phi, config.r0, seed, rep, &ledger)?;
    let rho = estimate_rho(&pilot.pairs, config.rho_mode)?;
    let plan = plan(budget, config.strategy, Some(rho.value))?;
    let completion = completion_plan(plan.n, plan.m, config.r0, l)?;
    let (n, m) = (completion.n as usize, completion.m as usize);
    let r0 = config.r0 as usize;

    let mut table = EvaluationTable::new(p, n.max(r0), m.max(2), l as usize, seed);
    {
        let rows = table.explorations();
        let (x, x_tilde) = table.designs_mut();
        for i in 0..rows {
            let xi = match pilot.inputs.get(i) {
                Some(v) => v.clone(),
                None => design_point(model, seed, rep, false, i as u64),
            };
            x[i * p..(i + 1) * p].copy_from_slice(&xi);
            x_tilde[i * p..(i + 1) * p]
                .copy_from_slice(&design_point(model, seed, rep, true, i as u64));
        }
    }
    for (i, &(a, b)) in pilot.pairs.iter().enumerate() {
        table.set(Branch::Base, i, 0, a)?;
        table.set(Branch::Base, i, 1, b)?;
    }

    let completion_count = completion.count();
    ledger.charge(completion_count)?;
    for block in &completion.blocks {
        let rows = block.rows.start as usize..block.rows.end as usize;
        let reps = block.reps.start as usize..block.reps.end as usize;
        table.fill(Branch::Base, rows, reps, |x, _, i, k| {
            phi.evaluate(x, &mut noise(seed, Role::Base, rep, i, k))
        })?;
    }

    let mut frozen_count = 0;
    for (j, group) in groups.groups().iter().enumerate() {
        let cells = (n * m) as u64;
        ledger.charge(cells)?;
        frozen_count += cells;
        table.fill(Branch::Freeze(j), 0..n, 0..m, |x, xt, i, k| {
            let point = frozen_point(x, xt, group);
            phi.evaluate(&point, &mut noise(seed, Role::Freeze(j as u32), rep, i, k))
        })?;
    }

    let base = table.block(Branch::Base, n, m)?;
    let first_order = groups
        .groups()
        .iter()
        .enumerate()
        .map(|(j, group)| {
            let frozen = table.block(Branch::Freeze(j), n, m)?;
            let theta = theta_hat(&base, &frozen)?;
            SobolEstimate::from_theta(group.clone(), theta, config.h, n as u64, m as u64)
        })
        .collect::<Result<Vec<_>>>()?;
    let totals = groups
        .groups()
        .iter()
        .filter_map(|g| {
            let complement = g.complement(p)?;
            let est = first_order.iter().find(|e| e.group == complement)?;
            Some(TotalIndex {
                group: g.clone(),
                raw: est.raw.map(|s| 1.0 - s),
                regularized: 1.0 - est.regularized,
            })
        })
        .collect();

    let ledger = LedgerSummary {
        capacity: ledger.capacity(),
        spent: ledger.spent(),
        pilot: 2 * config.r0,
        completion: completion_count,
        frozen: frozen_count,
        evaluations: phi.calls(),
    };
    debug_assert_eq!(ledger.spent, ledger.evaluations);
    let report = EstimationReport {
        model: model.name(),
        qoi: qoi.name().to_string(),
        config: config.clone(),
        rho,
        plan,
        n: n as u64,
        m: m as u64,
        first_order,
        totals,
        ledger,
        unused_designs: budget - n as u64,
        elapsed: started.elapsed(),
    };
    Ok(Estimation { report, table })
}

/// Recomputes one stored cell from its stream key and the table's designs.
#[allow(clippy::too_many_arguments)]
pub fn recompute_cell(
    model: &dyn StochasticModel,
    qoi: &Qoi,
    table: &EvaluationTable,
    groups: &GroupSpec,
    replication: u64,
    branch: Branch,
    i: usize,
    k: usize,
) -> Result<f64> {
    let phi = Phi::new(model, qoi);
    let seed = table.seed();
    match branch {
        Branch::Base => phi.evaluate(table.x(i), &mut noise(seed, Role::Base, replication, i, k)),
        Branch::Freeze(j) => {
            let group = groups
                .groups()
                .get(j)
                .ok_or_else(|| Error::invalid(format!("no group {j}")))?;
            let point = frozen_point(table.x(i), table.x_tilde(i), group);
            phi.evaluate(
                &point,
                &mut noise(seed, Role::Freeze(j as u32), replication, i, k),
            )
        }
    }
}

/// Base and pick-frozen blocks for a fixed `(n, m)` with no pilot or budget
/// logic, using the same stream keys as [`run_estimation`] with group index 0.
pub fn pick_freeze_blocks(
    model: &dyn StochasticModel,
    qoi: &Qoi,
    group: &Group,
    n: usize,
    m: usize,
    seed: u64,
    replication: u64,
) -> Result<(RepetitionBlock, RepetitionBlock)> {
    let phi = Phi::new(model, qoi);
    let rows: Vec<Result<(Vec<f64>, Vec<f64>)>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let x = design_point(model, seed, replication, false, i as u64);
            let xt = design_point(model, seed, replication, true, i as u64);
            let point = frozen_point(&x, &xt, group);
            let base = (0..m)
                .map(|k| phi.evaluate(&x, &mut noise(seed, Role::Base, replication, i, k)))
                .collect::<Result<Vec<_>>>()?;
            let frozen = (0..m)
                .map(|k| phi.evaluate(&point, &mut noise(seed, Role::Freeze(0), replication, i, k)))
                .collect::<Result<Vec<_>>>()?;
            Ok((base, frozen))
        })
        .collect();
    let (base, frozen): (Vec<_>, Vec<_>) = rows
        .into_iter()
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .unzip();
    Ok((
        RepetitionBlock::new(n, m, base.concat())?,
        RepetitionBlock::new(n, m, frozen.concat())?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::benchmarks::LinearModel;
    use crate::model::{InputSpec, Qoi};

    /// `φ(x, Z) = x_1`.
    struct FirstCoordinate(InputSpec);

    impl StochasticModel for FirstCoordinate {
        fn name(&self) -> String {
            "x1".into()
        }
        fn inputs(&self) -> &InputSpec {
            &self.0
        }
        fn evaluate(&self, x: &[f64], _: &mut NoiseStream) -> Result<f64> {
            Ok(x[0])
        }
    }

    fn first_coordinate() -> FirstCoordinate {
        FirstCoordinate(InputSpec::standard_normal(2).unwrap())
    }

    fn groups(p: usize, gs: &[&[usize]]) -> GroupSpec {
        GroupSpec::new(p, gs.iter().map(|g| Group::new(g).unwrap()).collect()).unwrap()
    }

    #[test]
    fn pilot_charges_two_r0() {
        let model = LinearModel::new(1.0).unwrap();
        let qoi = Qoi::Identity;
        let phi = Phi::new(&model, &qoi);
        let ledger = BudgetLedger::new(1000);
        let pilot = run_pilot(&phi, 10, 3, 0, &ledger).unwrap();
        assert_eq!(ledger.spent(), 20);
        assert_eq!(phi.calls(), 20);
        assert_eq!(pilot.pairs.len(), 10);
        let again = run_pilot(&phi, 10, 3, 0, &BudgetLedger::new(1000)).unwrap();
        assert_eq!(pilot, again);
        assert!(run_pilot(&phi, 10, 3, 0, &BudgetLedger::new(19))
            .unwrap_err()
            .is_budget());
    }

    #[test]
    fn deterministic_pilot_has_zero_rho() {
        let model = LinearModel::new(0.0).unwrap();
        let qoi = Qoi::Identity;
        let phi = Phi::new(&model, &qoi);
        let pilot = run_pilot(&phi, 10, 1, 0, &BudgetLedger::new(100)).unwrap();
        assert!(pilot.pairs.iter().all(|(a, b)| a == b));
        assert_eq!(
            estimate_rho(&pilot.pairs, RhoMode::PaperLiteral)
                .unwrap()
                .value,
            0.0
        );
    }

    #[test]
    fn frozen_point_copies_group_coordinates() {
        let g = Group::new(&[1, 3]).unwrap();
        assert_eq!(
            frozen_point(&[1.0, 2.0, 3.0], &[-1.0, -2.0, -3.0], &g),
            vec![1.0, -2.0, 3.0]
        );
    }

    #[test]
    fn deterministic_full_dependence_is_exact() {
        let model = first_coordinate();
        for budget in [40, 100, 1000] {
            let cfg = EstimationConfig {
                budget,
                seed: 5,
                ..Default::default()
            };
            let est = run_estimation(&model, &Qoi::Identity, &groups(2, &[&[1]]), &cfg).unwrap();
            assert_eq!(est.report.m, 1);
            assert_eq!(est.report.first_order[0].raw, Some(1.0), "T={budget}");
            assert!(est.report.ledger.spent <= budget * 2);
        }
    }

    #[test]
    fn deterministic_independent_group_is_near_zero() {
        let model = first_coordinate();
        let cfg = EstimationConfig {
            budget: 10_000,
            seed: 8,
            ..Default::default()
        };
        let est = run_estimation(&model, &Qoi::Identity, &groups(2, &[&[2]]), &cfg).unwrap();
        assert!(est.report.first_order[0].raw.unwrap().abs() < 0.05);
    }

    #[test]
    fn deterministic_linear_full_group_is_one() {
        let model = LinearModel::new(0.0).unwrap();
        let cfg = EstimationConfig {
            budget: 1000,
            seed: 2,
            ..Default::default()
        };
        let est = run_estimation(&model, &Qoi::Identity, &groups(2, &[&[1, 2]]), &cfg).unwrap();
        assert_eq!(est.report.first_order[0].raw, Some(1.0));
    }

    #[test]
    fn ledger_trace_for_fixed_plan() {
        let model = LinearModel::new(1.0).unwrap();
        let cfg = EstimationConfig {
            budget: 1000,
            strategy: Strategy::Fixed(20),
            seed: 4,
            ..Default::default()
        };
        let est = run_estimation(&model, &Qoi::Identity, &groups(2, &[&[1], &[2]]), &cfg).unwrap();
        let l = est.report.ledger;
        assert_eq!(
            (l.pilot, l.completion, l.frozen, l.spent, l.capacity),
            (20, 980, 2000, 3000, 3000)
        );
        assert_eq!(l.evaluations, 3000);
        assert_eq!(est.table.filled_count(), 3000);
        assert_eq!((est.report.n, est.report.m), (50, 20));
    }

    #[test]
    fn stored_cells_match_recomputation() {
        let model = LinearModel::new(1.0).unwrap();
        let gs = groups(2, &[&[1], &[2]]);
        let cfg = EstimationConfig {
            budget: 200,
            strategy: Strategy::Fixed(4),
            seed: 13,
            replication: 3,
            ..Default::default()
        };
        let est = run_estimation(&model, &Qoi::Identity, &gs, &cfg).unwrap();
        let t = &est.table;
        for branch in [Branch::Base, Branch::Freeze(0), Branch::Freeze(1)] {
            for i in 0..t.explorations() {
                for k in 0..t.repetitions() {
                    if let Some(v) = t.get(branch, i, k) {
                        let r = recompute_cell(&model, &Qoi::Identity, t, &gs, 3, branch, i, k)
                            .unwrap();
                        assert_eq!(v.to_bits(), r.to_bits());
                    }
                }
            }
        }
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let model = LinearModel::new(1.0).unwrap();
        let gs = groups(2, &[&[1], &[2]]);
        let run = |w| {
            let cfg = EstimationConfig {
                budget: 5000,
                seed: 77,
                workers: Some(w),
                ..Default::default()
            };
            run_estimation(&model, &Qoi::Identity, &gs, &cfg).unwrap()
        };
        let reference = run(1);
        for w in [2, 8] {
            let other = run(w);
            assert_eq!(other.table, reference.table);
            assert_eq!(
                serde_json::to_string(&other.report).unwrap(),
                serde_json::to_string(&reference.report).unwrap()
            );
        }
    }

    #[test]
    fn permuted_group_gives_identical_estimates() {
        let model = crate::benchmarks::IshigamiModel::new(7.0, 0.1).unwrap();
        let cfg = EstimationConfig {
            budget: 2000,
            seed: 21,
            ..Default::default()
        };
        let a = run_estimation(&model, &Qoi::Identity, &groups(3, &[&[1, 3]]), &cfg).unwrap();
        let b = run_estimation(&model, &Qoi::Identity, &groups(3, &[&[3, 1]]), &cfg).unwrap();
        assert_eq!(a.report.first_order, b.report.first_order);
    }

    #[test]
    fn small_budget_is_a_budget_error() {
        let model = LinearModel::new(1.0).unwrap();
        let cfg = EstimationConfig {
            budget: 10,
            ..Default::default()
        };
        let err = run_estimation(&model, &Qoi::Identity, &groups(2, &[&[1]]), &cfg).unwrap_err();
        assert!(matches!(
            err,
            Error::PilotExceedsBudget {
                needed: 20,
                budget: 10
            }
        ));
    }

    #[test]
    fn totals_need_complements() {
        let model = LinearModel::new(0.0).unwrap();
        let gs = groups(2, &[&[1]]).with_complements(2);
        let cfg = EstimationConfig {
            budget: 20_000,
            seed: 6,
            strategy: Strategy::Fixed(1),
            ..Default::default()
        };
        let est = run_estimation(&model, &Qoi::Identity, &gs, &cfg).unwrap();
        let total = &est.report.totals;
        assert_eq!(total.len(), 2);
        // additive model: T_1 = S_1 = 0.2
        let t1 = total
            .iter()
            .find(|t| t.group == Group::new(&[1]).unwrap())
            .unwrap();
        assert!((t1.raw.unwrap() - 0.2).abs() < 0.03, "{t1:?}");
        let none = run_estimation(&model, &Qoi::Identity, &groups(2, &[&[1]]), &cfg).unwrap();
        assert!(none.report.totals.is_empty());
    }

    #[test]
    fn custom_qoi_is_used() {
        let model = LinearModel::new(1.0).unwrap();
        let qoi = Qoi::custom("square", |m, x, z| Ok(m.evaluate(x, z)?.powi(2)));
        let cfg = EstimationConfig {
            budget: 500,
            seed: 1,
            ..Default::default()
        };
        let a = run_estimation(&model, &qoi, &groups(2, &[&[1]]), &cfg).unwrap();
        let b = run_estimation(&model, &Qoi::Identity, &groups(2, &[&[1]]), &cfg).unwrap();
        assert_eq!(a.report.qoi, "square");
        let (ta, tb) = (&a.table, &b.table);
        let v = tb.get(Branch::Base, 0, 0).unwrap();
        assert_eq!(ta.get(Branch::Base, 0, 0).unwrap(), v * v);
    }
}
