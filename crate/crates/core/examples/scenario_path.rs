//! Regenerates `fixtures/reference_path.csv`:
//! `cargo run -p liqhedge-core --example scenario_path > crates/core/fixtures/reference_path.csv`

use liqhedge_core::sim::scenario_path;
use liqhedge_core::{MarketParams, OptionContract};

fn main() -> liqhedge_core::Result<()> {
    let c = OptionContract::reference();
    let path = scenario_path(&MarketParams::reference(), c.strike, c.maturity);
    path.write_csv(std::io::stdout().lock())
}
