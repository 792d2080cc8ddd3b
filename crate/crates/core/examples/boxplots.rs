//! A small replicated experiment written out the way `snmc bench` does:
//! records CSV, summary CSV and an SVG of boxplots.
//!
//! cargo run --release --example boxplots -- [output dir]

use std::fs::File;
use std::path::PathBuf;

use snmc::bench::{write_records, write_summary};
use snmc::svg::boxplot_svg;
use snmc::{run_experiment, summarize, Builtin, ExperimentConfig, IndexChoice};

fn main() -> snmc::Result<()> {
    let dir = std::env::args()
        .nth(1)
        .map_or_else(std::env::temp_dir, PathBuf::from);
    let config = ExperimentConfig {
        budgets: vec![1_000, 4_000, 16_000],
        replications: 20,
        seed: 9,
        ..ExperimentConfig::new(Builtin::Ishigami { a: 7.0, b: 0.05 })
    };
    let records = run_experiment(&config)?;
    let summaries = summarize(&records, &config.truths()?, IndexChoice::Regularized)?;

    write_records(
        File::create(dir.join("records.csv"))?,
        &records,
        Some("boxplots example"),
    )?;
    write_summary(
        File::create(dir.join("summary.csv"))?,
        &summaries,
        Some("boxplots example"),
    )?;
    std::fs::write(
        dir.join("boxplots.svg"),
        boxplot_svg(&summaries, "Ishigami, a = 7, b = 0.05"),
    )?;
    println!(
        "wrote records.csv, summary.csv and boxplots.svg to {}",
        dir.display()
    );
    Ok(())
}
