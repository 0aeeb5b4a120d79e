mod common;

use common::*;
use liqhedge_core::{solve_tree, Error, TreeConfig};

fn oracle_config(q_hi: f64) -> TreeConfig {
    TreeConfig {
        dt: 0.25,
        alpha: SQRT2,
        dq: 1.0,
        q_lo: 0.0,
        q_hi,
        store_history: true,
    }
}

#[test]
fn frozen_book_matches_discrete_log_laplace() {
    let gamma = 0.05;
    let model = frozen_model(gamma, 5.0);
    let cfg = oracle_config(12.0);
    let tv = solve_tree(&model, &|_: f64, _: f64| 0.0, &cfg).unwrap();
    let j_max = tv.steps();
    assert_eq!(j_max, 20);
    let w = 1.0 / (2.0 * SQRT2 * SQRT2);
    let h = 0.6 * 0.25_f64.sqrt() * SQRT2;
    for j in 0..=j_max {
        for p in -(j as i64)..=(j as i64) {
            for &q in tv.q_nodes() {
                let a = gamma * q * h;
                // log(w (e^a + e^-a) + 1 - 2w), written without cancellation.
                let per_step = (4.0 * w * (0.5 * a).sinh().powi(2)).ln_1p() / gamma;
                let want = (j_max - j) as f64 * per_step;
                let got = tv.theta(j, p, q).unwrap();
                assert!(
                    (got - want).abs() <= 1e-12 * want.abs().max(1e-300),
                    "j={j} p={p} q={q}: {got} vs {want}"
                );
            }
        }
    }
}

#[test]
fn leaves_are_the_payoff_and_levels_recombine() {
    let spec = reference();
    let tv = tree(&spec, true);
    let j = tv.steps();
    for p in -(j as i64)..=(j as i64) {
        let s = tv.node_price(j, p);
        for &q in tv.q_nodes() {
            assert_eq!(tv.theta(j, p, q).unwrap().to_bits(), spec.terminal_payoff(q, s).to_bits());
        }
    }
    for level in [0usize, 1, 17, 251] {
        assert!(tv.theta_row(level, level as i64).is_ok());
        assert!(tv.theta_row(level, level as i64 + 1).is_err());
        assert!(tv.theta_row(level, -(level as i64) - 1).is_err());
    }
}

#[test]
fn values_are_convex_in_inventory_and_controls_feasible() {
    let spec = reference();
    let tv = tree(&spec, true);
    let cfg = tv.config().clone();
    let max_abs = (0..=tv.steps())
        .flat_map(|j| (-(j as i64)..=j as i64).map(move |p| (j, p)))
        .map(|(j, p)| tv.theta_row(j, p).unwrap().iter().fold(0.0_f64, |m, v| m.max(v.abs())))
        .fold(0.0_f64, f64::max);
    let q_nodes = tv.q_nodes().to_vec();
    let cap = spec.market.rho_max * spec.market.volume.at(0.0);
    for j in 0..tv.steps() {
        for p in -(j as i64)..=(j as i64) {
            let row = tv.theta_row(j, p).unwrap();
            assert!(min_second_difference(row) >= -1e-6 * max_abs, "j={j} p={p}");
            for &q in &q_nodes {
                let v = tv.tree_policy(j, p, q).unwrap();
                assert!(v.abs() <= cap * (1.0 + 1e-12));
                let m = tv.control_steps(j, p, q).unwrap();
                assert!((v * cfg.dt - m as f64 * cfg.dq).abs() < 1e-6 * cfg.dq);
                let next = q + m as f64 * cfg.dq;
                assert!(next >= cfg.q_lo - 1e-6 && next <= cfg.q_hi + 1e-6);
            }
        }
    }
}

#[test]
fn root_price_dominates_the_tree_expected_payoff() {
    let spec = reference();
    let tv = tree(&spec, false);
    let j_max = tv.steps();
    let w = 1.0 / 4.0;
    let mut probs = vec![1.0];
    for _ in 0..j_max {
        let mut next = vec![0.0; probs.len() + 2];
        for (i, p) in probs.iter().enumerate() {
            next[i] += w * p;
            next[i + 1] += (1.0 - 2.0 * w) * p;
            next[i + 2] += w * p;
        }
        probs = next;
    }
    let expected: f64 = probs
        .iter()
        .enumerate()
        .map(|(i, p)| p * (tv.node_price(j_max, i as i64 - j_max as i64) - 45.0).max(0.0))
        .sum();
    for &q in tv.q_nodes() {
        let price = tv.theta(0, 0, q).unwrap() / spec.contract.nominal;
        assert!(price >= expected - 1e-12, "q={q}: {price} < {expected}");
    }
}

#[test]
fn symmetric_toy_does_not_trade_at_the_root() {
    let n = 1.0;
    let mut model = frozen_model(4.0, 5.0);
    model.market.rho_max = 5.0;
    model.market.volume = liqhedge_core::VolumeCurve::constant(0.2);
    let cfg = TreeConfig {
        dt: 0.25,
        alpha: SQRT2,
        dq: 0.0125,
        q_lo: -0.5,
        q_hi: 0.5,
        store_history: true,
    };
    let toy = |_: f64, s: f64| n * (s - 45.0).abs() / 2.0;
    let tv = solve_tree(&model, &toy, &cfg).unwrap();
    assert_eq!(tv.tree_policy(0, 0, 0.0).unwrap(), 0.0);

    // The same statement for the call itself: N (S - K)+ = N |S - K| / 2 + N (S - K) / 2
    // and the linear part only shifts inventory by N / 2.
    let cfg = TreeConfig {
        q_lo: 0.0,
        q_hi: 1.0,
        ..cfg
    };
    let call = |_: f64, s: f64| n * (s - 45.0).max(0.0);
    let tv = solve_tree(&model, &call, &cfg).unwrap();
    assert_eq!(tv.tree_policy(0, 0, 0.5).unwrap(), 0.0);
}

#[test]
fn flat_terminal_value_with_empty_book_stays_idle() {
    let mut model = frozen_model(4.0, 2.0);
    model.market.rho_max = 5.0;
    model.market.volume = liqhedge_core::VolumeCurve::constant(0.2);
    let cfg = TreeConfig {
        dt: 0.25,
        alpha: SQRT2,
        dq: 0.0125,
        q_lo: -0.5,
        q_hi: 0.5,
        store_history: true,
    };
    let tv = solve_tree(&model, &|_: f64, _: f64| 3.0, &cfg).unwrap();
    for j in 0..tv.steps() {
        for p in -(j as i64)..=(j as i64) {
            assert_eq!(tv.tree_policy(j, p, 0.0).unwrap(), 0.0);
        }
    }
}

#[test]
fn off_grid_queries_are_rejected() {
    let spec = reference();
    let tv = tree(&spec, false);
    assert!(matches!(tv.price_with_initial_exchange(1e7 + 1.0), Err(Error::OffGrid { .. })));
    assert!(tv.price_with_initial_exchange(1e7).is_ok());
}

#[test]
fn rescaled_problem_gives_the_same_price_per_share() {
    let spec = reference();
    let (c, m) = liqhedge_core::rescale_nominal(&spec.contract, &spec.market);
    assert_eq!(c.gamma, 4.0);
    let unit = liqhedge_core::PayoffSpec::new(c, m, spec.cost).unwrap();
    let a = tree_price(&spec);
    let b = tree_price(&unit);
    assert!((a - b).abs() <= 1e-3 * a, "{a} vs {b}");
}
