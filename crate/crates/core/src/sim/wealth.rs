use rayon::prelude::*;

use super::paths::{draw_increments, path_rng};
use super::HedgePolicy;
use crate::error::{Error, Result};
use crate::model::MarketParams;
use crate::payoff::PayoffSpec;
use crate::cost::ExecutionCost;

/// Both sides of the wealth identity
/// `X_T + q_T S_T = e^{rT}(x + q S_0) + int e^{r(T-s)} (q_s (mu - r S_s) ds + q_s sigma dW_s - V L(v/V) ds)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WealthCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub residual: f64,
}

/// Evaluates the wealth identity along a discrete path.
///
/// The left side books trades of `v_i dt` shares at `S_{t_i}` and accrues
/// cash at rate `r` exactly over each step. The right side replaces the
/// integrals by left-point Riemann and Ito sums with
/// `dW_i = (S_{t_{i+1}} - S_{t_i} - mu dt) / sigma`. `speeds[i]` is held on
/// `[t_i, t_{i+1})`.
pub fn wealth_decomposition_check(
    market: &MarketParams,
    cost: &ExecutionCost,
    times: &[f64],
    prices: &[f64],
    speeds: &[f64],
    x0: f64,
    q0: f64,
) -> Result<WealthCheck> {
    let n = prices.len();
    if n < 2 || times.len() != n || speeds.len() + 1 != n {
        return Err(Error::Path("need n times, n prices and n - 1 speeds".into()));
    }
    let r = market.r;
    let horizon = times[n - 1] - times[0];
    let integral = |a: f64, b: f64| -> f64 {
        if r == 0.0 {
            b - a
        } else {
            ((-r * a).exp() - (-r * b).exp()) / r
        }
    };

    let mut x = x0;
    let mut q = q0;
    let mut drift = 0.0;
    let t0 = times[0];
    for i in 0..n - 1 {
        let (a, b) = (times[i] - t0, times[i + 1] - t0);
        let h = b - a;
        let v = speeds[i];
        let volume = market.volume.at(times[i] + 0.5 * h);
        let c = if v == 0.0 {
            0.0
        } else if volume > 0.0 {
            volume * cost.exec_cost(v / volume)
        } else {
            return Err(Error::NoFeasibleControl { t: times[i], q, s: prices[i] });
        };
        let growth = (r * h).exp();
        let accrual = if r == 0.0 { h } else { (growth - 1.0) / r };
        x = growth * x - (v * prices[i] + c) * accrual;

        let dw = (prices[i + 1] - prices[i] - market.mu * h) / market.sigma;
        let disc = integral(a, b);
        drift += q * (market.mu - r * prices[i]) * disc + (-r * a).exp() * q * market.sigma * dw - c * disc;
        q += v * h;
    }
    let lhs = x + q * prices[n - 1];
    let rhs = (r * horizon).exp() * (x0 + q0 * prices[0] + drift);
    Ok(WealthCheck {
        lhs,
        rhs,
        residual: lhs - rhs,
    })
}

/// Root-mean-square wealth residual at successive halvings of the time step.
#[derive(Debug, Clone, PartialEq)]
pub struct RefinementStudy {
    pub dt: Vec<f64>,
    pub rms_residual: Vec<f64>,
    /// Least-squares slope of `log rms` against `log dt`.
    pub slope: f64,
}

/// Runs the identity on `n_paths` Brownian paths at `levels` time steps
/// `T / base_steps / 2^l`, driving the inventory with `policy`. Coarse paths
/// are subsamples of the finest one, so each path is the same at all levels.
pub fn wealth_refinement_study<P: HedgePolicy + ?Sized>(
    spec: &PayoffSpec,
    policy: &P,
    base_steps: usize,
    levels: usize,
    n_paths: usize,
    seed: u64,
) -> Result<RefinementStudy> {
    if levels < 2 || base_steps == 0 || n_paths == 0 {
        return Err(Error::invalid("levels", "need >= 2 levels, >= 1 step and >= 1 path"));
    }
    let market = &spec.market;
    let maturity = spec.contract.maturity;
    let finest = base_steps << (levels - 1);
    let dtf = maturity / finest as f64;

    let per_path: Vec<Result<Vec<f64>>> = (0..n_paths)
        .into_par_iter()
        .map(|p| {
            let mut rng = path_rng(seed, p as u64);
            let mut incr = vec![0.0; finest];
            draw_increments(&mut rng, market.mu, market.sigma, dtf, &mut incr);
            let mut fine = Vec::with_capacity(finest + 1);
            fine.push(market.s0);
            for d in &incr {
                fine.push(fine.last().unwrap() + d);
            }
            (0..levels)
                .map(|l| {
                    let stride = 1usize << (levels - 1 - l);
                    let steps = finest / stride;
                    let h = maturity / steps as f64;
                    let times: Vec<f64> = (0..=steps).map(|i| i as f64 * h).collect();
                    let prices: Vec<f64> = (0..=steps).map(|i| fine[i * stride]).collect();
                    let mut q = spec.contract.q0;
                    let mut speeds = Vec::with_capacity(steps);
                    for i in 0..steps {
                        let v = policy.speed(times[i], q, prices[i])?;
                        speeds.push(v);
                        q += v * h;
                    }
                    let x0 = -spec.contract.q0 * market.s0;
                    let check = wealth_decomposition_check(
                        market,
                        &spec.cost,
                        &times,
                        &prices,
                        &speeds,
                        x0,
                        spec.contract.q0,
                    )?;
                    Ok(check.residual)
                })
                .collect()
        })
        .collect();

    let mut sums = vec![0.0; levels];
    for r in per_path {
        for (s, x) in sums.iter_mut().zip(r?) {
            *s += x * x;
        }
    }
    let rms: Vec<f64> = sums.iter().map(|s| (s / n_paths as f64).sqrt()).collect();
    let dt: Vec<f64> = (0..levels)
        .map(|l| maturity / (base_steps << l) as f64)
        .collect();
    let xs: Vec<f64> = dt.iter().map(|d| d.ln()).collect();
    let ys: Vec<f64> = rms.iter().map(|r| r.ln()).collect();
    let mx = xs.iter().sum::<f64>() / levels as f64;
    let my = ys.iter().sum::<f64>() / levels as f64;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    Ok(RefinementStudy {
        dt,
        rms_residual: rms,
        slope: sxy / sxx,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize, h: f64) -> Vec<f64> {
        (0..n).map(|i| i as f64 * h).collect()
    }

    #[test]
    fn idle_book_without_rates_is_exact() {
        let m = MarketParams::reference();
        let prices = [45.0, 45.3, 44.1, 46.2, 45.9];
        let t = grid(5, 0.25);
        let w = wealth_decomposition_check(&m, &ExecutionCost::reference(), &t, &prices, &[0.0; 4], 1e3, 2.0)
            .unwrap();
        assert!(w.residual.abs() < 1e-12 * w.lhs.abs(), "{w:?}");
        assert_eq!(w.lhs, 1e3 + 2.0 * 45.9);
    }

    #[test]
    fn idle_book_with_rates_compounds_exactly() {
        let mut m = MarketParams::reference();
        m.r = 0.05 / 252.0;
        m.sigma = 1.0;
        let prices = [45.0; 9];
        let t = grid(9, 2.0);
        let w = wealth_decomposition_check(&m, &ExecutionCost::reference(), &t, &prices, &[0.0; 8], 1e3, 2.0)
            .unwrap();
        assert!(w.residual.abs() < 1e-12 * w.lhs.abs(), "{w:?}");
    }

    #[test]
    fn residual_is_the_trading_cross_term() {
        // With r = 0 the residual equals sum v_i dt (S_{i+1} - S_i).
        let m = MarketParams::reference();
        let prices = [45.0, 45.3, 44.1, 46.2, 45.9];
        let speeds = [1e6, -2e6, 5e5, 0.0];
        let t = grid(5, 0.25);
        let w = wealth_decomposition_check(&m, &ExecutionCost::reference(), &t, &prices, &speeds, 0.0, 1e7)
            .unwrap();
        let cross: f64 = (0..4).map(|i| speeds[i] * 0.25 * (prices[i + 1] - prices[i])).sum();
        assert!((w.residual - cross).abs() < 1e-6 * cross.abs(), "{} {}", w.residual, cross);
    }
}
