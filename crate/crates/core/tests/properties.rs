mod common;

use common::brute_force_hamiltonian;
use liqhedge_core::impact::{impacted_terminal, observed_payoff, observed_price};
use liqhedge_core::{
    bachelier_delta, bachelier_price, liquidation_penalty, rescale_nominal, CostFunction, ExecutionCost,
    MarketParams, OptionContract, PayoffSpec, Settlement,
};
use proptest::prelude::*;

fn cost_strategy() -> impl Strategy<Value = ExecutionCost> {
    (0.001f64..1.0, 0.2f64..2.0, 0.0f64..0.1).prop_map(|(eta, phi, psi)| ExecutionCost::new(eta, phi, psi).unwrap())
}

fn spec_strategy() -> impl Strategy<Value = PayoffSpec> {
    (1e6f64..5e7, 30.0f64..60.0, 1e-8f64..1e-6, 0.1f64..5.0, prop::bool::ANY).prop_map(
        |(nominal, strike, gamma, rho_max, cash)| {
            let mut market = MarketParams::reference();
            market.rho_max = rho_max;
            let contract = OptionContract {
                nominal,
                strike,
                gamma,
                q0: 0.5 * nominal,
                penalty_rate: rho_max,
                settlement: if cash { Settlement::Cash } else { Settlement::Physical },
                ..OptionContract::reference()
            };
            PayoffSpec::new(contract, market, ExecutionCost::reference()).unwrap()
        },
    )
}

proptest! {
    #[test]
    fn execution_cost_is_increasing_strictly_convex_and_superlinear(
        l in cost_strategy(), a in 0.0f64..10.0, b in 0.0f64..10.0,
    ) {
        prop_assume!((a - b).abs() > 1e-6);
        let (r1, r2) = (a.min(b), a.max(b));
        prop_assert!(l.exec_cost(r1) < l.exec_cost(r2));
        prop_assert!(l.exec_cost(0.5 * (r1 + r2)) < 0.5 * (l.exec_cost(r1) + l.exec_cost(r2)));
        prop_assert_eq!(l.exec_cost(-a), l.exec_cost(a));
        let ratios: Vec<f64> = [10.0, 1e2, 1e3, 1e4].iter().map(|&r| l.exec_cost(r) / r).collect();
        prop_assert!(ratios.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn hamiltonian_matches_grid_search(
        l in cost_strategy(), p in -3.0f64..3.0, rho_max in 0.05f64..10.0,
    ) {
        let h = l.hamiltonian(p, rho_max);
        let oracle = brute_force_hamiltonian(&l, p, rho_max);
        prop_assert!((h.value - oracle).abs() <= 1e-6 * oracle.abs().max(1e-12), "{} vs {}", h.value, oracle);
        let m = l.hamiltonian(-p, rho_max);
        prop_assert_eq!(m.value, h.value);
        prop_assert!(h.argmax == 0.0 || h.argmax.signum() == p.signum());
        prop_assert!(h.argmax.abs() <= rho_max);
    }

    #[test]
    fn penalty_matches_the_liquidation_integrals(spec in spec_strategy(), frac in -1.5f64..1.5) {
        let q = frac * spec.contract.nominal;
        prop_assume!(q != 0.0);
        let c = &spec.contract;
        let (rho, v) = (c.penalty_rate, spec.market.volume.terminal());
        let a = q.abs();
        let tau = a / (rho * v);
        let steps = 20_000;
        let h = tau / steps as f64;
        let risk: f64 = (0..steps)
            .map(|i| {
                let x = a - rho * v * (i as f64 + 0.5) * h;
                x * x * h
            })
            .sum();
        let quad = spec.cost.exec_cost(rho) * v * tau + 0.5 * c.gamma * spec.market.sigma.powi(2) * risk;
        let closed = liquidation_penalty(c, &spec.market, &spec.cost, q).unwrap();
        prop_assert!((closed - quad).abs() <= 1e-6 * quad, "{} vs {}", closed, quad);
        prop_assert_eq!(closed, spec.penalty(q));
    }

    #[test]
    fn payoff_dominates_intrinsic(spec in spec_strategy(), frac in -0.2f64..1.2, s in 20.0f64..80.0) {
        let c = &spec.contract;
        let q = frac * c.nominal;
        prop_assert!(spec.terminal_payoff(q, s) >= c.nominal * (s - c.strike).max(0.0));
    }

    #[test]
    fn bachelier_delta_is_the_price_slope(
        s in 20.0f64..70.0, k in 30.0f64..60.0, sigma in 0.1f64..2.0, tau in 1.0f64..300.0,
    ) {
        let h = 1e-4;
        let fd = (bachelier_price(s + h, k, sigma, tau) - bachelier_price(s - h, k, sigma, tau)) / (2.0 * h);
        prop_assert!((fd - bachelier_delta(s, k, sigma, tau)).abs() < 1e-6);
    }

    #[test]
    fn impacted_terminal_is_the_observed_payoff_in_new_coordinates(
        spec in spec_strategy(), k in 0.0f64..1e-6, frac in -0.2f64..1.2, s_tilde in 20.0f64..80.0,
    ) {
        let mut spec = spec;
        spec.market.k = k;
        let c = &spec.contract;
        let q = frac * c.nominal;
        let s = observed_price(k, c.q0, s_tilde, q);
        let lhs = impacted_terminal(&spec, q, s_tilde);
        let rhs = observed_payoff(&spec, q, s) - 0.5 * k * q * q + 0.5 * k * c.q0 * c.q0;
        prop_assert!((lhs - rhs).abs() <= 1e-9 * lhs.abs().max(rhs.abs()).max(1.0), "{} vs {}", lhs, rhs);
    }

    #[test]
    fn rescaling_preserves_the_per_share_penalty(spec in spec_strategy(), frac in 0.01f64..1.2) {
        let (c, m) = rescale_nominal(&spec.contract, &spec.market);
        let unit = PayoffSpec::new(c.clone(), m, spec.cost).unwrap();
        let n = spec.contract.nominal;
        prop_assert!((c.gamma - spec.contract.gamma * n).abs() <= 1e-12 * c.gamma);
        prop_assert!((c.q0 - 0.5).abs() < 1e-12);
        let a = spec.penalty(frac * n) / n;
        let b = unit.penalty(frac);
        prop_assert!((a - b).abs() <= 1e-10 * a, "{} vs {}", a, b);
    }
}
