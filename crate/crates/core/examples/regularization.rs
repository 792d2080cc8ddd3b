//! Raw against regularized index ratios, and the curvature diagnostics
//! that motivate the shift of the denominator.
//!
//! cargo run --example regularization

use snmc::{asymptotic_plateau, g, g_shift, hessian_g, ThetaTriple};

fn main() -> snmc::Result<()> {
    // a nearly constant quantity of interest drives the denominator to zero
    println!(
        "{:>10} {:>12} {:>12} {:>12}",
        "denom", "raw", "h = 1e-2", "|H|max"
    );
    for denom in [1.0, 1e-1, 1e-2, 1e-3, 1e-4] {
        let theta = ThetaTriple::new(1.0 + denom, 1.0, 1.0 + 0.5 * denom);
        let h = hessian_g(&theta)?;
        let curvature = h.iter().flatten().fold(0.0f64, |acc, v| acc.max(v.abs()));
        println!(
            "{denom:>10.0e} {:>12.4} {:>12.4} {curvature:>12.3e}",
            g(&theta)?,
            g_shift(&theta, 1e-2)?
        );
    }

    // bias left by a fixed repetition count on the linear benchmark
    println!("\nplateau of S2 = 0.8 with E Var = 1, Var E = 5:");
    for m in [1, 2, 5, 10, 100] {
        println!("  m = {m:>3}: {:.6}", asymptotic_plateau(0.8, 1.0, 5.0, m));
    }
    Ok(())
}
