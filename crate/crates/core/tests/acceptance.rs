//! Acceptance suite: one PASS/FAIL line per criterion and a non-zero exit if
//! any criterion fails. Statistical checks use fixed seeds and 3-SE bands.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use snmc::allocation::{completion_plan, m_opt, plan, BudgetLedger, RhoMode, Strategy};
use snmc::bench::{
    mse_series, rate_fit, run_experiment, summarize, write_records, ExperimentConfig,
    ReplicationRecord,
};
use snmc::pipeline::{pick_freeze_blocks, run_pilot};
use snmc::table::Branch;
use snmc::{
    estimate_rho, g, grad_g, hessian_g, run_estimation, theta_hat, Builtin, Error,
    EstimationConfig, Group, GroupSpec, IndexChoice, LinearModel, Phi, Qoi, StrategySummary,
    ThetaTriple,
};

const SEED: u64 = 2024;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn group(c: usize) -> Group {
    Group::new(&[c]).unwrap()
}

fn mean_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn estimates(
    records: &[ReplicationRecord],
    strategy: Strategy,
    g: &Group,
    choice: IndexChoice,
) -> Vec<f64> {
    records
        .iter()
        .filter(|r| r.budget == 100_000 && r.strategy == strategy && &r.group == g)
        .map(|r| r.estimate(choice).expect("defined estimate"))
        .collect()
}

fn csv_bytes(records: &[ReplicationRecord]) -> Vec<u8> {
    let mut buf = Vec::new();
    write_records(&mut buf, records, None).unwrap();
    buf
}

fn linear_grid_config(sigma: f64) -> ExperimentConfig {
    ExperimentConfig {
        seed: SEED,
        replications: 30,
        ..ExperimentConfig::new(Builtin::Linear { sigma })
    }
}

fn opt_run_config(workers: usize) -> ExperimentConfig {
    ExperimentConfig {
        budgets: vec![100_000],
        strategies: vec![Strategy::Opt],
        workers: Some(workers),
        ..linear_grid_config(1.0)
    }
}

/// Experiment runs read by several criteria.
struct Shared {
    grid: Vec<StrategySummary>,
    opt_one_worker: Vec<ReplicationRecord>,
    opt_eight_workers: Vec<ReplicationRecord>,
}

fn shared() -> snmc::Result<Shared> {
    let config = linear_grid_config(1.0);
    let grid = summarize(
        &run_experiment(&config)?,
        &config.truths()?,
        IndexChoice::Regularized,
    )?;
    Ok(Shared {
        grid,
        opt_one_worker: run_experiment(&opt_run_config(1))?,
        opt_eight_workers: run_experiment(&opt_run_config(8))?,
    })
}

fn exact_fixture() -> snmc::Result<Outcome> {
    let model = LinearModel::new(1.0)?;
    let groups = GroupSpec::singletons(2)?;
    let h = 1e-2;
    let config = EstimationConfig {
        budget: 12,
        r0: 2,
        h,
        seed: 31,
        strategy: Strategy::Fixed(3),
        ..Default::default()
    };
    let run = run_estimation(&model, &Qoi::Identity, &groups, &config)?;
    let t = &run.table;
    if (run.report.n, run.report.m, t.dimension()) != (4, 3, 2) {
        return Ok(outcome(
            false,
            format!(
                "table is {}x{} with p={}",
                run.report.n,
                run.report.m,
                t.dimension()
            ),
        ));
    }
    let (n, m) = (4, 3);
    let mut worst: f64 = 0.0;
    for (j, est) in run.report.first_order.iter().enumerate() {
        // one pass over the cells; a row's sums are folded in at its last repetition
        let (mut t1, mut t2, mut t3) = (0.0, 0.0, 0.0);
        let (mut row_b, mut row_f) = (0.0, 0.0);
        for cell in 0..n * m {
            let (i, k) = (cell / m, cell % m);
            row_b += t.get(Branch::Base, i, k).unwrap();
            row_f += t.get(Branch::Freeze(j), i, k).unwrap();
            if k == m - 1 {
                let (b, f) = (row_b / m as f64, row_f / m as f64);
                t1 += b * b;
                t2 += b;
                t3 += b * f;
                row_b = 0.0;
                row_f = 0.0;
            }
        }
        let (t1, t2, t3) = (t1 / n as f64, t2 / n as f64, t3 / n as f64);
        let raw = (t3 - t2 * t2) / (t1 - t2 * t2);
        let reg = (t3 - t2 * t2) / (t1 + h - t2 * t2);
        for (a, b) in [
            (t1, est.theta.theta1),
            (t2, est.theta.theta2),
            (t3, est.theta.theta3),
            (raw, est.raw.unwrap_or(f64::NAN)),
            (reg, est.regularized),
        ] {
            worst = worst.max((a - b).abs());
        }
    }
    Ok(outcome(
        worst <= 1e-12,
        format!("max |naive - pipeline| = {worst:.2e}"),
    ))
}

fn linear_truth(s: &Shared) -> Outcome {
    let mut pass = true;
    let mut detail = Vec::new();
    for (c, truth) in [(1, 0.2), (2, 0.8)] {
        let (mean, _) = mean_se(&estimates(
            &s.opt_one_worker,
            Strategy::Opt,
            &group(c),
            IndexChoice::Regularized,
        ));
        pass &= (mean - truth).abs() <= 0.02;
        detail.push(format!("mean S{c} = {mean:.5} (target {truth} ± 0.02)"));
    }
    outcome(pass, detail.join(", "))
}

fn bias_plateau() -> snmc::Result<Outcome> {
    let config = ExperimentConfig {
        budgets: vec![100_000],
        strategies: vec![Strategy::Fixed(5)],
        replications: 200,
        ..linear_grid_config(1.0)
    };
    let records = run_experiment(&config)?;
    let mut pass = true;
    let mut detail = Vec::new();
    for (c, plateau) in [(1, 0.192308), (2, 0.769231)] {
        let values = estimates(&records, Strategy::Fixed(5), &group(c), IndexChoice::Raw);
        let (mean, se) = mean_se(&values);
        pass &= (mean - plateau).abs() <= 3.0 * se;
        detail.push(format!(
            "mean S{c} = {mean:.5} ± {se:.1e} (plateau {plateau})"
        ));
    }
    pass &= records.iter().all(|r| (r.n, r.m) == (20_000, 5));
    Ok(outcome(pass, detail.join(", ")))
}

fn inner_bias() -> snmc::Result<Outcome> {
    let model = LinearModel::new(1.0)?;
    let mut pass = true;
    let mut detail = Vec::new();
    for m in [1usize, 2, 5, 10] {
        let mut t1 = Vec::new();
        let mut t2 = Vec::new();
        for rep in 0..100 {
            let (base, frozen) =
                pick_freeze_blocks(&model, &Qoi::Identity, &group(1), 10_000, m, SEED, rep)?;
            let theta = theta_hat(&base, &frozen)?;
            t1.push(theta.theta1);
            t2.push(theta.theta2);
        }
        let (m1, se1) = mean_se(&t1);
        let (m2, se2) = mean_se(&t2);
        let target = 6.0 + 1.0 / m as f64;
        pass &= (m1 - target).abs() <= 3.0 * se1 && (m2 - 1.0).abs() <= 3.0 * se2;
        detail.push(format!(
            "m={m}: θ1 {m1:.4}±{se1:.0e} vs {target:.4}, θ2 {m2:.4}±{se2:.0e}"
        ));
    }
    Ok(outcome(pass, detail.join("; ")))
}

fn rho_calibration() -> snmc::Result<Outcome> {
    let mut pass = true;
    let mut detail = Vec::new();
    for (sigma, target) in [(1.0, 2.0), (5.0, 50.0)] {
        let model = LinearModel::new(sigma)?;
        let qoi = Qoi::Identity;
        let phi = Phi::new(&model, &qoi);
        let r0 = 10_000;
        let pilot = run_pilot(&phi, r0, SEED, 0, &BudgetLedger::new(2 * r0))?;
        let rho = estimate_rho(&pilot.pairs, RhoMode::PaperLiteral)?.value;
        let squares: Vec<f64> = pilot.pairs.iter().map(|(a, b)| (a - b).powi(2)).collect();
        let (mean, se) = mean_se(&squares);
        pass &= (rho - mean).abs() <= 1e-12 * mean && (rho - target).abs() <= 3.0 * se;
        detail.push(format!(
            "σ={sigma}: ρ̂ = {rho:.4} ± {se:.3} (target {target})"
        ));
    }
    Ok(outcome(pass, detail.join(", ")))
}

fn allocation_arithmetic() -> snmc::Result<Outcome> {
    let m = m_opt(2.0, 1000);
    let p = plan(1000, Strategy::Opt, Some(2.0))?;
    let completion = completion_plan(p.n, p.m, 10, 2)?;
    let model = LinearModel::new(1.0)?;
    let groups = GroupSpec::singletons(2)?;
    let config = EstimationConfig {
        budget: 1000,
        r0: 10,
        strategy: Strategy::Fixed(20),
        seed: SEED,
        ..Default::default()
    };
    let ledger = run_estimation(&model, &Qoi::Identity, &groups, &config)?
        .report
        .ledger;
    let pass = m == 20
        && (p.n, p.m) == (50, 20)
        && completion.count() == 980
        && ledger.completion == 980
        && ledger.spent == 3000
        && ledger.capacity == 3000;
    Ok(outcome(
        pass,
        format!(
            "m_opt = {m}, plan = (n={}, m={}), completion = {}, ledger {}+{}+{} = {} of {}",
            p.n,
            p.m,
            completion.count(),
            ledger.pilot,
            ledger.completion,
            ledger.frozen,
            ledger.spent,
            ledger.capacity
        ),
    ))
}

fn mse_of(grid: &[StrategySummary], budget: u64, strategy: Strategy, g: &Group) -> f64 {
    grid.iter()
        .find(|s| s.budget == budget && s.strategy == strategy && &s.group == g)
        .expect("summary")
        .mse
}

fn strategy_ordering(s: &Shared) -> Outcome {
    let mut pass = true;
    let mut detail = Vec::new();
    for c in [1, 2] {
        let g = group(c);
        let opt = mse_of(&s.grid, 100_000, Strategy::Opt, &g);
        let sqrt = mse_of(&s.grid, 100_000, Strategy::Sqrt, &g);
        let fixed = mse_of(&s.grid, 100_000, Strategy::Fixed(5), &g);
        let series = mse_series(&s.grid, Strategy::Opt, &g);
        let decreasing = series.windows(2).all(|w| w[1].1 < w[0].1);
        pass &= opt <= sqrt && opt <= fixed && decreasing;
        detail.push(format!(
            "S{c} at T=1e5: opt {opt:.2e}, sqrt {sqrt:.2e}, fixed(5) {fixed:.2e}, opt decreasing {decreasing}"
        ));
    }
    outcome(pass, detail.join("; "))
}

fn rate_sanity(s: &Shared) -> snmc::Result<Outcome> {
    let config = ExperimentConfig {
        strategies: vec![Strategy::Fixed(5)],
        ..linear_grid_config(5.0)
    };
    let noisy = summarize(
        &run_experiment(&config)?,
        &config.truths()?,
        IndexChoice::Regularized,
    )?;
    let mut pass = true;
    let mut detail = Vec::new();
    for c in [1, 2] {
        let g = group(c);
        let opt = rate_fit(&mse_series(&s.grid, Strategy::Opt, &g))?;
        let fixed = rate_fit(&mse_series(&noisy, Strategy::Fixed(5), &g))?;
        pass &= opt <= -0.5 && fixed >= -0.2;
        detail.push(format!(
            "S{c}: opt slope {opt:.3}, fixed(5) σ=5 slope {fixed:.3}"
        ));
    }
    Ok(outcome(pass, detail.join(", ")))
}

fn ishigami_truths() -> snmc::Result<Outcome> {
    let builtin = Builtin::Ishigami { a: 7.0, b: 0.05 };
    let config = ExperimentConfig {
        budgets: vec![100_000],
        strategies: vec![Strategy::Opt],
        seed: SEED,
        replications: 30,
        ..ExperimentConfig::new(builtin)
    };
    let records = run_experiment(&config)?;
    let mut pass = true;
    let mut detail = Vec::new();
    for (c, truth) in [(1, 0.21852), (2, 0.68689), (3, 0.0)] {
        let analytic = builtin.analytic_first_order(&group(c)).unwrap();
        let (mean, _) = mean_se(&estimates(
            &records,
            Strategy::Opt,
            &group(c),
            IndexChoice::Regularized,
        ));
        pass &= (mean - truth).abs() <= 0.03 && (analytic - truth).abs() <= 5e-6;
        detail.push(format!("S{c} = {mean:.4} (truth {truth})"));
    }
    Ok(outcome(pass, detail.join(", ")))
}

fn differentiation() -> snmc::Result<Outcome> {
    let mut rng = rand::rngs::StdRng::seed_from_u64(SEED);
    let mut worst: f64 = 0.0;
    let mut h33_zero = true;
    let close = |fd: f64, exact: f64| (fd - exact).abs() / exact.abs().max(1.0);
    for _ in 0..100 {
        let theta2: f64 = rng.random_range(-2.0..2.0);
        let d: f64 = rng.random_range(0.2..5.0);
        let theta = ThetaTriple {
            theta1: theta2 * theta2 + d,
            theta2,
            theta3: theta2 * theta2 + rng.random_range(-d..d),
        };
        let grad = grad_g(&theta)?;
        let hess = hessian_g(&theta)?;
        h33_zero &= hess[2][2] == 0.0;
        for a in 0..3 {
            let eps = 1e-5;
            let shifted = |delta: f64| {
                let mut v = [theta.theta1, theta.theta2, theta.theta3];
                v[a] += delta;
                ThetaTriple {
                    theta1: v[0],
                    theta2: v[1],
                    theta3: v[2],
                }
            };
            let (up, down) = (shifted(eps), shifted(-eps));
            worst = worst.max(close((g(&up)? - g(&down)?) / (2.0 * eps), grad[a]));
            let (gu, gd) = (grad_g(&up)?, grad_g(&down)?);
            for b in 0..3 {
                worst = worst.max(close((gu[b] - gd[b]) / (2.0 * eps), hess[a][b]));
            }
        }
    }
    Ok(outcome(
        worst <= 1e-5 && h33_zero,
        format!("max relative FD error {worst:.2e}, H33 = 0 at every point: {h33_zero}"),
    ))
}

fn determinism(s: &Shared) -> Outcome {
    let one = csv_bytes(&s.opt_one_worker);
    let eight = csv_bytes(&s.opt_eight_workers);
    outcome(
        one == eight,
        format!(
            "{} bytes with 1 worker, identical with 8: {}",
            one.len(),
            one == eight
        ),
    )
}

fn budget_safety() -> snmc::Result<Outcome> {
    // every branch of the completion plan on small budgets
    let model = LinearModel::new(1.0)?;
    let mut runs = 0;
    let mut exceeded = 0;
    for groups in [
        GroupSpec::singletons(2)?,
        GroupSpec::new(2, vec![group(2)])?,
    ] {
        for budget in [20, 25, 40, 60, 100, 333, 1000] {
            for strategy in [
                Strategy::Fixed(1),
                Strategy::Fixed(2),
                Strategy::Fixed(7),
                Strategy::Sqrt,
                Strategy::Opt,
            ] {
                let config = EstimationConfig {
                    budget,
                    r0: 10,
                    strategy,
                    seed: SEED,
                    ..Default::default()
                };
                match run_estimation(&model, &Qoi::Identity, &groups, &config) {
                    Ok(run) => {
                        runs += 1;
                        if run.report.ledger.spent > run.report.ledger.capacity {
                            exceeded += 1;
                        }
                    }
                    Err(Error::BudgetExceeded { .. }) => exceeded += 1,
                    Err(Error::BudgetAlreadyConsumed { .. } | Error::PilotExceedsBudget { .. }) => {
                    }
                    Err(e) => return Err(e),
                }
            }
        }
    }
    // over-planning: a second completion on top of a full run
    let ledger = BudgetLedger::for_run(1000, 2);
    ledger.charge(20)?;
    ledger.charge(completion_plan(50, 20, 10, 2)?.count())?;
    ledger.charge(2000)?;
    let injected = matches!(ledger.charge(1), Err(Error::BudgetExceeded { .. }));
    Ok(outcome(
        exceeded == 0 && injected && runs > 0,
        format!("{runs} runs within budget, {exceeded} exceeded; injected over-plan rejected: {injected}"),
    ))
}

fn needs(
    shared: &snmc::Result<Shared>,
    f: impl FnOnce(&Shared) -> snmc::Result<Outcome>,
) -> snmc::Result<Outcome> {
    match shared {
        Ok(s) => f(s),
        Err(e) => Err(Error::Invalid(format!("shared experiment failed: {e}"))),
    }
}

fn main() {
    let mut failed = 0;
    let mut report = |n: usize, name: &str, run: &mut dyn FnMut() -> snmc::Result<Outcome>| {
        let start = Instant::now();
        let (pass, detail) = match run() {
            Ok(o) => (o.pass, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        if !pass {
            failed += 1;
        }
        println!(
            "criterion {n:>2} {}: {name} [{:.1}s] {detail}",
            if pass { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64()
        );
    };

    report(1, "exact fixture oracle", &mut exact_fixture);
    let start = Instant::now();
    let shared = shared();
    println!(
        "shared experiment runs took {:.1}s",
        start.elapsed().as_secs_f64()
    );
    report(2, "linear model truth", &mut || {
        needs(&shared, |s| Ok(linear_truth(s)))
    });
    report(3, "fixed-m bias plateau", &mut bias_plateau);
    report(4, "inner-bias law", &mut inner_bias);
    report(5, "rho calibration", &mut rho_calibration);
    report(6, "allocation arithmetic", &mut allocation_arithmetic);
    report(7, "strategy ordering", &mut || {
        needs(&shared, |s| Ok(strategy_ordering(s)))
    });
    report(8, "rate sanity", &mut || needs(&shared, rate_sanity));
    report(9, "Ishigami truths", &mut ishigami_truths);
    report(10, "differentiation diagnostics", &mut differentiation);
    report(11, "worker determinism", &mut || {
        needs(&shared, |s| Ok(determinism(s)))
    });
    report(12, "budget safety", &mut budget_safety);

    if failed > 0 {
        println!("acceptance: {failed} of 12 criteria FAILED");
        std::process::exit(1);
    }
    println!("acceptance: all 12 criteria PASS");
}
