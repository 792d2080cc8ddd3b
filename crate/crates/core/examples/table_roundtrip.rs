//! Saving the evaluation table of a run, reloading it, and recomputing any
//! cell from its stream key alone.
//!
//! cargo run --example table_roundtrip

use snmc::pipeline::recompute_cell;
use snmc::{
    run_estimation, Branch, EstimationConfig, EvaluationTable, GroupSpec, LinearModel, Qoi,
};

fn main() -> snmc::Result<()> {
    let model = LinearModel::new(0.5)?;
    let groups = GroupSpec::singletons(2)?;
    let config = EstimationConfig {
        budget: 2_000,
        seed: 11,
        ..Default::default()
    };
    let run = run_estimation(&model, &Qoi::Identity, &groups, &config)?;

    let path = std::env::temp_dir().join("snmc-example.snmct");
    run.table.save(&path)?;
    let table = EvaluationTable::load_expecting(&path, 2)?;
    println!(
        "{}: {} x {} table, {} filled cells, {} bytes",
        path.display(),
        table.explorations(),
        table.repetitions(),
        table.filled_count(),
        std::fs::metadata(&path)?.len()
    );

    for (branch, i, k) in [
        (Branch::Base, 0, 0),
        (Branch::Base, 7, 3),
        (Branch::Freeze(1), 5, 2),
    ] {
        let stored = table.get(branch, i, k).expect("filled cell");
        let again = recompute_cell(&model, &Qoi::Identity, &table, &groups, 0, branch, i, k)?;
        println!("{branch:?} ({i}, {k}): stored {stored:.12}, recomputed {again:.12}");
    }
    std::fs::remove_file(path)?;
    Ok(())
}
