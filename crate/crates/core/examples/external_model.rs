//! Driving a model that runs in another process.
//!
//! The model answers `HELLO 1` with `OK <p>` and each
//! `EVAL x1 ... xp <seed>` with one number. Any program that reads stdin and
//! writes stdout can take part; the default here is the Python fixture of
//! the test suite.
//!
//! cargo run --release --example external_model -- [command ...]

use std::time::Duration;

use snmc::{run_estimation, EstimationConfig, ExternalModel, GroupSpec, Qoi, StochasticModel};

fn main() -> snmc::Result<()> {
    let mut command: Vec<String> = std::env::args().skip(1).collect();
    if command.is_empty() {
        let script = concat!(
            env!("CARGO_MANIFEST_DIR"),
            "/tests/fixtures/linear_model.py"
        );
        command = vec!["python3".into(), script.into(), "1".into()];
    }
    let model = ExternalModel::connect(command, None, Duration::from_secs(10))?;
    println!("{} with p = {}", model.name(), model.dimension());

    let groups = GroupSpec::singletons(model.dimension())?;
    let config = EstimationConfig {
        budget: 5_000,
        seed: 2,
        workers: Some(2),
        ..Default::default()
    };
    let report = run_estimation(&model, &Qoi::Identity, &groups, &config)?.report;
    for e in &report.first_order {
        println!("S{{{}}} = {:.4}", e.group, e.regularized);
    }
    println!(
        "{} model runs in {:.2?}",
        report.ledger.evaluations, report.elapsed
    );
    Ok(())
}
