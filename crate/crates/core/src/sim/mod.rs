//! Monte-Carlo backtests of hedging strategies with TWAP fills.
//!
//! The reported variable is the cost `-PnL` of the deal to the writer:
//! `Pi(q_T, S_T) - X_T - q_T S_T` with `X_0 = -q0 S0`.

mod hedge;
mod paths;
mod wealth;

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::impact::Solution;
use crate::pde::ThetaSurface;
use crate::tree::TreeValue;

pub use hedge::{
    hedge_trajectory, run_delta_hedge, run_delta_hedge_sweep, run_policy_hedge, write_path_dump,
    TrajectoryPoint,
};
pub use paths::{
    path_rng, scenario_path, simulate_price_paths, trinomial_path, twap_fill, PathConfig, PricePath,
    SCENARIO_SEED,
};
pub use wealth::{wealth_decomposition_check, wealth_refinement_study, RefinementStudy, WealthCheck};

/// Rebalancing counts of the delta-hedging benchmark.
pub const DEFAULT_REBALANCES: [usize; 6] = [10, 20, 40, 80, 160, 320];

/// Trading speed (shares/day) as a function of `(t, q, S)`.
pub trait HedgePolicy: Sync {
    fn speed(&self, t: f64, q: f64, s: f64) -> Result<f64>;
}

impl HedgePolicy for ThetaSurface {
    fn speed(&self, t: f64, q: f64, s: f64) -> Result<f64> {
        self.policy_at(t, q, s)
    }
}

impl HedgePolicy for TreeValue {
    fn speed(&self, t: f64, q: f64, s: f64) -> Result<f64> {
        self.policy_interpolated(t, q, s)
    }
}

impl HedgePolicy for Solution {
    fn speed(&self, t: f64, q: f64, s: f64) -> Result<f64> {
        self.policy(t, q, s)
    }
}

/// Adapter for closures.
pub struct FnPolicy<F>(pub F);

impl<F> HedgePolicy for FnPolicy<F>
where
    F: Fn(f64, f64, f64) -> Result<f64> + Sync,
{
    fn speed(&self, t: f64, q: f64, s: f64) -> Result<f64> {
        (self.0)(t, q, s)
    }
}

/// Summary of the cost over simulated paths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PnLStats {
    pub mean_cost: f64,
    /// Unbiased sample variance.
    pub var_cost: f64,
    pub exec_cost_mean: f64,
    pub n: usize,
    /// Paths dropped because they left the policy's domain.
    pub excluded: usize,
}

impl PnLStats {
    /// Sequential two-pass summary; the order of `outcomes` fixes the result.
    pub fn from_outcomes(outcomes: &[(f64, f64)], excluded: usize) -> Self {
        let n = outcomes.len();
        if n == 0 {
            return Self {
                mean_cost: f64::NAN,
                var_cost: f64::NAN,
                exec_cost_mean: f64::NAN,
                n,
                excluded,
            };
        }
        let nf = n as f64;
        let mean = outcomes.iter().map(|o| o.0).sum::<f64>() / nf;
        let exec = outcomes.iter().map(|o| o.1).sum::<f64>() / nf;
        let var = if n > 1 {
            outcomes.iter().map(|o| (o.0 - mean) * (o.0 - mean)).sum::<f64>() / (nf - 1.0)
        } else {
            0.0
        };
        Self {
            mean_cost: mean,
            var_cost: var,
            exec_cost_mean: exec,
            n,
            excluded,
        }
    }

    /// Standard error of `mean_cost`.
    pub fn std_error(&self) -> f64 {
        (self.var_cost / self.n as f64).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Delta,
    Policy,
}

impl Strategy {
    pub fn name(self) -> &'static str {
        match self {
            Strategy::Delta => "delta",
            Strategy::Policy => "policy",
        }
    }
}

/// One row of a simulation report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsRow {
    pub strategy: Strategy,
    /// Rebalancing dates for the delta hedge, decision points for the policy.
    pub rebalances: usize,
    pub stats: PnLStats,
    pub seed: u64,
}

/// Writes `strategy,M,mean_cost,var_cost,exec_cost_mean,n_paths,seed`.
pub fn write_stats_csv<W: Write>(rows: &[StatsRow], mut out: W) -> Result<()> {
    writeln!(out, "strategy,M,mean_cost,var_cost,exec_cost_mean,n_paths,seed")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.strategy.name(),
            r.rebalances,
            r.stats.mean_cost,
            r.stats.var_cost,
            r.stats.exec_cost_mean,
            r.stats.n,
            r.seed
        )?;
    }
    Ok(())
}
