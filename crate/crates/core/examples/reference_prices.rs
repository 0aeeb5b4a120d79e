//! Prints the reference-scenario price from both engines with timings.

use std::time::Instant;

use liqhedge_core::{solve_payoff, solve_tree_payoff, GridSpec, PayoffSpec, SchemeConfig, TreeConfig};

fn main() -> liqhedge_core::Result<()> {
    let spec = PayoffSpec::reference();
    let n = spec.contract.nominal;
    let q0 = spec.contract.q0;

    let start = Instant::now();
    let mut cfg = TreeConfig::default_for(&spec.contract, &spec.market)?;
    cfg.store_history = false;
    let tree = solve_tree_payoff(&spec, &cfg)?;
    println!(
        "tree  {:.4}  ({:.1}s)",
        tree.price_with_initial_exchange(q0)? / n,
        start.elapsed().as_secs_f64()
    );

    let start = Instant::now();
    let grid = GridSpec::default_for(&spec.contract, &spec.market);
    let surface = solve_payoff(&spec, &grid, &SchemeConfig::price_only())?;
    println!(
        "pde   {:.4}  ({:.1}s, max substeps {})",
        surface.price(q0, spec.market.s0)? / n,
        start.elapsed().as_secs_f64(),
        surface.diagnostics().max_substeps
    );
    Ok(())
}
