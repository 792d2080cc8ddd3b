//! First-order and total indices of the noisy linear benchmark
//! `Y = 1 + X1 + 2 X2 + σ Z` with a budget of 10⁴ runs per branch.
//!
//! cargo run --release --example quickstart

use snmc::{run_estimation, EstimationConfig, GroupSpec, LinearModel, Qoi};

fn main() -> snmc::Result<()> {
    let model = LinearModel::new(1.0)?;
    let groups = GroupSpec::singletons(2)?.with_complements(2);
    let config = EstimationConfig {
        budget: 10_000,
        seed: 1,
        ..Default::default()
    };

    let run = run_estimation(&model, &Qoi::Identity, &groups, &config)?;
    let report = &run.report;

    println!(
        "rho estimate  {:.4} (from {} pilot pairs)",
        report.rho.value, report.rho.r0
    );
    println!("allocation    n = {}, m = {}", report.n, report.m);
    println!(
        "evaluations   {} of {} (pilot {}, completion {}, frozen {})",
        report.ledger.spent,
        report.ledger.capacity,
        report.ledger.pilot,
        report.ledger.completion,
        report.ledger.frozen
    );
    for e in &report.first_order {
        let raw = e.raw.map_or("undefined".to_string(), |v| format!("{v:.4}"));
        println!(
            "S{{{}}}  raw {raw}  regularized {:.4}",
            e.group, e.regularized
        );
    }
    for t in &report.totals {
        println!("T{{{}}}  regularized {:.4}", t.group, t.regularized);
    }
    Ok(())
}
