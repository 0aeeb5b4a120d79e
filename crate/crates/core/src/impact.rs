//! Linear permanent impact through the unimpacted price `S~ = S - k (q - q0)`.
//!
//! In `(t, q, S~)` coordinates the problem has the same dynamics as without
//! impact (with `mu = r = 0`), so both solvers are reused as they are and only
//! the terminal condition changes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Settlement;
use crate::payoff::{PayoffSpec, TerminalCondition};
use crate::pde::{solve_theta, GridSpec, SchemeConfig, ThetaSurface};
use crate::tree::{solve_tree, TreeConfig, TreeValue};

/// Observed price from the unimpacted one.
#[inline]
pub fn observed_price(k: f64, q0: f64, s_tilde: f64, q: f64) -> f64 {
    s_tilde + k * (q - q0)
}

/// Unimpacted price from the observed one.
#[inline]
pub fn unimpacted_price(k: f64, q0: f64, s: f64, q: f64) -> f64 {
    s - k * (q - q0)
}

/// Terminal condition in `(q, S~)` coordinates.
#[derive(Debug, Clone)]
pub struct ImpactedTerminal {
    spec: PayoffSpec,
    /// Extra constant added to the terminal value; zero except in tests of the
    /// offset identity.
    offset: f64,
}

impl ImpactedTerminal {
    pub fn new(spec: &PayoffSpec) -> Result<Self> {
        spec.market.validate()?;
        Ok(Self {
            spec: spec.clone(),
            offset: 0.0,
        })
    }

    /// Same terminal condition without the `k q0^2 / 2` constant.
    pub fn without_initial_offset(spec: &PayoffSpec) -> Result<Self> {
        let k = spec.market.k;
        let q0 = spec.contract.q0;
        Ok(Self {
            offset: -0.5 * k * q0 * q0,
            ..Self::new(spec)?
        })
    }

    pub fn k(&self) -> f64 {
        self.spec.market.k
    }

    pub fn q0(&self) -> f64 {
        self.spec.contract.q0
    }
}

impl TerminalCondition for ImpactedTerminal {
    fn value(&self, q: f64, s_tilde: f64) -> f64 {
        impacted_terminal(&self.spec, q, s_tilde) + self.offset
    }
}

/// `theta(T, q, S~)`. With `S = S~ + k (q - q0)`:
///
/// - cash: `N (S - K)+ + l(q) + k q0^2 / 2`
/// - physical: `N (S - K)+ + 1{S >= K} (l(N - q) + k N (N - 2q) / 2) + 1{S < K} l(q) + k q0^2 / 2`
pub fn impacted_terminal(spec: &PayoffSpec, q: f64, s_tilde: f64) -> f64 {
    let c = &spec.contract;
    let k = spec.market.k;
    let n = c.nominal;
    let s = observed_price(k, c.q0, s_tilde, q);
    let intrinsic = n * (s - c.strike).max(0.0);
    let shift = 0.5 * k * c.q0 * c.q0;
    match c.settlement {
        Settlement::Cash => intrinsic + spec.penalty(q) + shift,
        Settlement::Physical => {
            if s >= c.strike {
                intrinsic + (spec.penalty(n - q) + 0.5 * k * n * (n - 2.0 * q)) + shift
            } else {
                intrinsic + spec.penalty(q) + shift
            }
        }
    }
}

/// What the writer owes at maturity in observed coordinates: the option plus
/// the cost of unwinding or completing the position, including the permanent
/// impact of that final trade.
pub fn observed_payoff(spec: &PayoffSpec, q: f64, s: f64) -> f64 {
    let c = &spec.contract;
    let k = spec.market.k;
    let n = c.nominal;
    let intrinsic = n * (s - c.strike).max(0.0);
    let residual = match c.settlement {
        Settlement::Cash => q,
        Settlement::Physical => {
            if s >= c.strike {
                n - q
            } else {
                q
            }
        }
    };
    intrinsic + spec.penalty(residual) + 0.5 * k * residual * residual
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Engine {
    Pde,
    Tree,
}

/// Engine choice together with its discretisation.
#[derive(Debug, Clone, PartialEq)]
pub enum SolverSetup {
    Pde { grid: GridSpec, scheme: SchemeConfig },
    Tree(TreeConfig),
}

impl SolverSetup {
    /// Default discretisation of `engine` for the scenario.
    pub fn default_for(engine: Engine, spec: &PayoffSpec, history: bool) -> Result<Self> {
        Ok(match engine {
            Engine::Pde => SolverSetup::Pde {
                grid: GridSpec::default_for(&spec.contract, &spec.market),
                scheme: SchemeConfig {
                    store_history: history,
                    ..SchemeConfig::default()
                },
            },
            Engine::Tree => {
                let mut cfg = TreeConfig::default_for(&spec.contract, &spec.market)?;
                cfg.store_history = history;
                SolverSetup::Tree(cfg)
            }
        })
    }

    pub fn engine(&self) -> Engine {
        match self {
            SolverSetup::Pde { .. } => Engine::Pde,
            SolverSetup::Tree(_) => Engine::Tree,
        }
    }
}

#[derive(Debug, Clone)]
pub enum Solution {
    Pde(ThetaSurface),
    Tree(TreeValue),
}

impl Solution {
    /// `theta(0, q, S)` at the root.
    pub fn value_at_root(&self, q: f64, s0: f64) -> Result<f64> {
        match self {
            Solution::Pde(s) => s.price(q, s0),
            Solution::Tree(t) => t.price_with_initial_exchange(q),
        }
    }

    /// Trading speed at `(t, q, S)` in solver coordinates.
    pub fn policy(&self, t: f64, q: f64, s: f64) -> Result<f64> {
        match self {
            Solution::Pde(surface) => surface.policy_at(t, q, s),
            Solution::Tree(tree) => tree.policy_interpolated(t, q, s),
        }
    }
}

/// Solution in `(t, q, S~)` coordinates and the price of the deal.
#[derive(Debug, Clone)]
pub struct ImpactSolution {
    pub solution: Solution,
    /// `theta(0, q0, S0)` in currency.
    pub price: f64,
    pub nominal: f64,
    pub k: f64,
    pub q0: f64,
}

impl ImpactSolution {
    pub fn price_per_share(&self) -> f64 {
        self.price / self.nominal
    }

    pub fn observed_price(&self, s_tilde: f64, q: f64) -> f64 {
        observed_price(self.k, self.q0, s_tilde, q)
    }

    pub fn unimpacted_price(&self, s: f64, q: f64) -> f64 {
        unimpacted_price(self.k, self.q0, s, q)
    }
}

/// Runs either solver on the impacted terminal condition. At `t = 0` the
/// inventory is `q0`, so `S~_0 = S_0`. With `k = 0` this is the plain solve.
pub fn solve_with_impact(spec: &PayoffSpec, setup: &SolverSetup) -> Result<ImpactSolution> {
    solve_with_terminal(spec, setup, &ImpactedTerminal::new(spec)?)
}

/// Same as [`solve_with_impact`] with an explicit terminal condition.
pub fn solve_with_terminal(
    spec: &PayoffSpec,
    setup: &SolverSetup,
    terminal: &ImpactedTerminal,
) -> Result<ImpactSolution> {
    let q0 = spec.contract.q0;
    let s0 = spec.market.s0;
    let model = spec.model();
    let solution = match setup {
        SolverSetup::Pde { grid, scheme } => {
            grid.validate_for(&spec.contract)?;
            Solution::Pde(solve_theta(&model, terminal, grid, scheme)?)
        }
        SolverSetup::Tree(cfg) => {
            let grid_q0 = cfg.q_nodes().iter().any(|&q| (q - q0).abs() <= 1e-9 * cfg.dq);
            if !grid_q0 {
                return Err(Error::OffGrid { q: q0 });
            }
            Solution::Tree(solve_tree(&model, terminal, cfg)?)
        }
    };
    let price = solution.value_at_root(q0, s0)?;
    Ok(ImpactSolution {
        solution,
        price,
        nominal: spec.contract.nominal,
        k: spec.market.k,
        q0,
    })
}
