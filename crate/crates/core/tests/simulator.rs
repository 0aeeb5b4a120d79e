mod common;

use common::*;
use liqhedge_core::sim::{
    path_rng, run_delta_hedge, run_delta_hedge_sweep, run_policy_hedge, simulate_price_paths, twap_fill,
    wealth_refinement_study, FnPolicy, DEFAULT_REBALANCES,
};
use liqhedge_core::{ExecutionCost, PathConfig, PayoffSpec};

fn mean_var(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let v = x.iter().map(|y| (y - m) * (y - m)).sum::<f64>() / (n - 1.0);
    (m, v)
}

#[test]
fn terminal_price_has_the_arithmetic_brownian_law() {
    let mut market = reference().market;
    market.mu = 0.02;
    let cfg = PathConfig {
        n_paths: 100_000,
        n_obs: 64,
        seed: 11,
        ..PathConfig::default()
    };
    let paths = simulate_price_paths(&market, 63.0, &cfg).unwrap();
    let st: Vec<f64> = paths.iter().map(|p| *p.s.last().unwrap()).collect();
    let (m, v) = mean_var(&st);
    let n = st.len() as f64;
    let (want_m, want_v) = (45.0 + 0.02 * 63.0, 0.36 * 63.0);
    assert!((m - want_m).abs() < 3.0 * (want_v / n).sqrt(), "mean {m}");
    assert!((v - want_v).abs() < 3.0 * want_v * (2.0 / (n - 1.0)).sqrt(), "var {v}");
}

#[test]
fn twap_draws_match_the_bridge_average_law() {
    let (a, b, sigma, dt) = (45.0, 45.6, 0.6, 0.25);
    let mut rng = path_rng(5, 0);
    let draws: Vec<f64> = (0..1_000_000).map(|_| twap_fill(a, b, sigma, dt, &mut rng)).collect();
    let (m, v) = mean_var(&draws);
    let n = draws.len() as f64;
    let want_v = sigma * sigma * dt / 12.0;
    assert!((m - 0.5 * (a + b)).abs() < 4.0 * (want_v / n).sqrt(), "mean {m}");
    assert!((v - want_v).abs() < 4.0 * want_v * (2.0 / (n - 1.0)).sqrt(), "var {v}");
}

#[test]
fn statistics_do_not_depend_on_seed_reuse_or_thread_count() {
    let spec = reference();
    let cfg = PathConfig {
        n_paths: 300,
        ..PathConfig::default()
    };
    let ms = [10, 40];
    let a = run_delta_hedge_sweep(&spec, &cfg, &ms).unwrap();
    let b = run_delta_hedge_sweep(&spec, &cfg, &ms).unwrap();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let c = pool.install(|| run_delta_hedge_sweep(&spec, &cfg, &ms).unwrap());
    assert_eq!(a, b);
    assert_eq!(a, c);
    let other = PathConfig { seed: 43, ..cfg.clone() };
    assert_ne!(a, run_delta_hedge_sweep(&spec, &other, &ms).unwrap());

    let tv = tree(&spec, true);
    let p1 = run_policy_hedge(&spec, &tv, &cfg).unwrap();
    let p2 = pool.install(|| run_policy_hedge(&spec, &tv, &cfg).unwrap());
    assert_eq!(p1, p2);
    for s in a.iter().chain([&p1]) {
        assert!(s.mean_cost.is_finite() && s.var_cost.is_finite() && s.var_cost >= 0.0);
        assert_eq!(s.n + s.excluded, 300);
    }
}

#[test]
fn frictionless_hedging_error_shrinks_with_rebalancing() {
    let mut spec = reference();
    spec.cost = ExecutionCost::new(0.0, 0.75, 0.0).unwrap();
    let cfg = PathConfig {
        n_paths: 4000,
        ..PathConfig::default()
    };
    let stats = run_delta_hedge_sweep(&spec, &cfg, &DEFAULT_REBALANCES).unwrap();
    let var: Vec<f64> = stats.iter().map(|s| s.var_cost).collect();
    assert!(var.windows(2).all(|w| w[1] < w[0]), "{var:?}");
    assert!(stats.iter().all(|s| s.exec_cost_mean == 0.0));
}

#[test]
fn single_rebalance_count_matches_its_own_sweep() {
    let spec = reference();
    let cfg = PathConfig {
        n_paths: 50,
        rebalances: 40,
        ..PathConfig::default()
    };
    assert_eq!(run_delta_hedge(&spec, &cfg).unwrap(), run_delta_hedge_sweep(&spec, &cfg, &[40]).unwrap()[0]);
}

#[test]
fn benchmark_rejects_rates_impact_and_degenerate_counts() {
    let cfg = PathConfig::default();
    let mut spec = reference();
    spec.market.r = 1e-4;
    assert!(run_delta_hedge_sweep(&spec, &cfg, &[10]).is_err());
    let mut spec = reference();
    spec.market.k = 1e-7;
    assert!(run_delta_hedge_sweep(&spec, &cfg, &[10]).is_err());
    assert!(run_delta_hedge_sweep(&reference(), &cfg, &[1]).is_err());
    assert!(run_delta_hedge_sweep(&reference(), &cfg, &[]).is_err());
    let bad = PathConfig { n_paths: 0, ..cfg };
    assert!(run_delta_hedge(&reference(), &bad).is_err());
}

fn smooth_policy() -> FnPolicy<impl Fn(f64, f64, f64) -> liqhedge_core::Result<f64> + Sync> {
    FnPolicy(|t: f64, _q: f64, s: f64| Ok(2e5 * (t / 10.0).cos() + 1e5 * (s - 45.0)))
}

#[test]
fn wealth_residual_vanishes_linearly_in_the_time_step() {
    let spec = reference();
    let study = wealth_refinement_study(&spec, &smooth_policy(), 63, 4, 64, 9).unwrap();
    assert!(study.rms_residual.windows(2).all(|w| w[1] < w[0]), "{study:?}");
    assert!(study.slope >= 0.9 && study.slope < 1.2, "{study:?}");

    let mut drift = reference();
    drift.market.mu = 0.1 / 252.0;
    drift.market.r = 0.05 / 252.0;
    let spec = PayoffSpec::new(drift.contract, drift.market, drift.cost).unwrap();
    let study = wealth_refinement_study(&spec, &smooth_policy(), 63, 4, 64, 9).unwrap();
    assert!(study.slope >= 0.9, "{study:?}");
}
