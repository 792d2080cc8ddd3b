//! Replicated comparison of the three repetition strategies on the linear
//! benchmark, with MSE convergence slopes.
//!
//! cargo run --release --example strategy_comparison -- [sigma] [replications]

use snmc::bench::{mse_series, rate_fit, run_experiment, summarize, ExperimentConfig};
use snmc::{Builtin, IndexChoice};

fn main() -> snmc::Result<()> {
    let mut args = std::env::args().skip(1);
    let sigma: f64 = args.next().map_or(1.0, |s| s.parse().expect("sigma"));
    let replications: usize = args.next().map_or(30, |s| s.parse().expect("replications"));

    let config = ExperimentConfig {
        replications,
        seed: 2024,
        ..ExperimentConfig::new(Builtin::Linear { sigma })
    };
    let records = run_experiment(&config)?;
    let summaries = summarize(&records, &config.truths()?, IndexChoice::Regularized)?;

    println!(
        "{:>7} {:>9} {:>5} {:>10} {:>10} {:>10}",
        "T", "strategy", "group", "bias", "variance", "mse"
    );
    for s in &summaries {
        println!(
            "{:>7} {:>9} {:>5} {:>10.2e} {:>10.2e} {:>10.2e}",
            s.budget,
            s.strategy.to_string(),
            s.group.label(),
            s.bias,
            s.variance,
            s.mse
        );
    }
    for strategy in &config.strategies {
        for group in &config.groups {
            let slope = rate_fit(&mse_series(&summaries, *strategy, group))?;
            println!("slope of log MSE vs log T, {strategy}, group {group}: {slope:.3}");
        }
    }
    Ok(())
}
