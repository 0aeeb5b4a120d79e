#![allow(dead_code)]

use liqhedge_core::{
    solve_tree, solve_tree_payoff, ExecutionCost, HedgingModel, MarketParams, PayoffSpec, Settlement, TreeConfig, TreeValue,
};

pub const SQRT2: f64 = std::f64::consts::SQRT_2;

pub fn reference() -> PayoffSpec {
    PayoffSpec::reference()
}

/// Reference scenario with `rho_max` and the liquidation rate moved together.
pub fn with_rho_max(mut spec: PayoffSpec, rho_max: f64) -> PayoffSpec {
    spec.market.rho_max = rho_max;
    spec.contract.penalty_rate = rho_max;
    spec
}

pub fn with_settlement(mut spec: PayoffSpec, settlement: Settlement) -> PayoffSpec {
    spec.contract.settlement = settlement;
    spec
}

pub fn tree_config(spec: &PayoffSpec, history: bool) -> TreeConfig {
    let mut cfg = TreeConfig::default_for(&spec.contract, &spec.market).unwrap();
    cfg.store_history = history;
    cfg
}

pub fn tree(spec: &PayoffSpec, history: bool) -> TreeValue {
    solve_tree_payoff(spec, &tree_config(spec, history)).unwrap()
}

pub fn tree_price(spec: &PayoffSpec) -> f64 {
    tree(spec, false).price_with_initial_exchange(spec.contract.q0).unwrap() / spec.contract.nominal
}

/// Model with no trading allowed, no drift and no rates.
pub fn frozen_model(gamma: f64, maturity: f64) -> HedgingModel {
    let mut market = MarketParams::reference();
    market.rho_max = 0.0;
    HedgingModel {
        market,
        cost: liqhedge_core::ExecutionCost::reference(),
        gamma,
        maturity,
    }
}

/// Small tree run on a caller-supplied terminal condition.
pub fn small_tree<T: liqhedge_core::TerminalCondition>(model: &HedgingModel, terminal: &T, cfg: &TreeConfig) -> TreeValue {
    solve_tree(model, terminal, cfg).unwrap()
}

/// Total variation of a sequence.
pub fn total_variation(x: &[f64]) -> f64 {
    x.windows(2).map(|w| (w[1] - w[0]).abs()).sum()
}

/// Minimum over interior nodes of the second difference of a row.
pub fn min_second_difference(row: &[f64]) -> f64 {
    row.windows(3)
        .map(|w| w[0] - 2.0 * w[1] + w[2])
        .fold(f64::INFINITY, f64::min)
}

pub fn load_fixture_path() -> liqhedge_core::sim::PricePath {
    let file = std::fs::File::open(concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/reference_path.csv")).unwrap();
    liqhedge_core::sim::PricePath::read_csv(std::io::BufReader::new(file)).unwrap()
}

/// `max_{|rho| <= rho_max} p rho - L(rho)` by a grid scan refined around the best cell.
pub fn brute_force_hamiltonian(l: &ExecutionCost, p: f64, rho_max: f64) -> f64 {
    let f = |rho: f64| p * rho - l.exec_cost(rho);
    let (mut lo, mut hi) = (-rho_max, rho_max);
    let (mut best, mut arg) = (f(0.0), 0.0);
    for _ in 0..8 {
        let n = 2000;
        let h = (hi - lo) / n as f64;
        for i in 0..=n {
            let x = lo + i as f64 * h;
            let v = f(x);
            if v > best {
                best = v;
                arg = x;
            }
        }
        lo = (arg - 2.0 * h).max(-rho_max);
        hi = (arg + 2.0 * h).min(rho_max);
    }
    best
}
