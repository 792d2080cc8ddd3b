//! How the repetition count follows the noise level, and the surrogate
//! objective it minimizes.
//!
//! cargo run --example allocation

use snmc::allocation::{bvt, kappa_opt, m_opt, m_opt_real, plan, Strategy};

fn main() -> snmc::Result<()> {
    let budget = 100_000;
    println!("{:>6} {:>9} {:>6} {:>7}", "rho", "m_real", "m", "n");
    for rho in [0.0, 0.1, 0.5, 1.0, 2.0, 10.0, 50.0] {
        let p = plan(budget, Strategy::Opt, Some(rho))?;
        println!(
            "{rho:>6} {:>9.2} {:>6} {:>7}",
            m_opt_real(rho, budget),
            p.m,
            p.n
        );
    }

    // 1/n + (ρ/m)² along m = κ T^{1/3}; the minimum sits at κ_opt
    let rho = 2.0;
    let best = kappa_opt(rho);
    println!(
        "\nrho = {rho}, T = {budget}: kappa_opt = {best:.4}, m_opt = {}",
        m_opt(rho, budget)
    );
    for factor in [0.25, 0.5, 1.0, 2.0, 4.0] {
        let kappa = best * factor;
        println!(
            "kappa = {kappa:>7.4}  bvt = {:.4e}",
            bvt(kappa, rho, budget)
        );
    }

    for strategy in [Strategy::Fixed(5), Strategy::Sqrt] {
        let p = plan(budget, strategy, None)?;
        println!("{strategy}: n = {}, m = {}", p.n, p.m);
    }
    Ok(())
}
