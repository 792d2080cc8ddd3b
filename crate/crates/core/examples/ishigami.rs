//! Stochastic Ishigami function: estimates against the closed-form indices,
//! including total indices from complement groups.
//!
//! cargo run --release --example ishigami -- [T]

use snmc::{run_estimation, Builtin, EstimationConfig, GroupSpec, Qoi};

fn main() -> snmc::Result<()> {
    let budget: u64 = std::env::args()
        .nth(1)
        .map_or(100_000, |s| s.parse().expect("budget"));
    let builtin = Builtin::Ishigami { a: 7.0, b: 0.05 };
    let model = builtin.build()?;
    let groups = GroupSpec::singletons(3)?.with_complements(3);
    let config = EstimationConfig {
        budget,
        seed: 3,
        ..Default::default()
    };

    let report = run_estimation(model.as_ref(), &Qoi::Identity, &groups, &config)?.report;
    println!(
        "{}: T = {budget}, n = {}, m = {}, rho = {:.3}",
        report.model, report.n, report.m, report.rho.value
    );
    println!("{:>6} {:>10} {:>10}", "group", "estimate", "truth");
    for e in &report.first_order {
        let truth = builtin
            .analytic_first_order(&e.group)
            .map_or("-".to_string(), |s| format!("{s:.4}"));
        println!("{:>6} {:>10.4} {truth:>10}", e.group.label(), e.regularized);
    }
    for t in &report.totals {
        println!("total index of {}: {:.4}", t.group, t.regularized);
    }
    Ok(())
}
