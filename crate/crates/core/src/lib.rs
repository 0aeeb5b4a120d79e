//! Indifference pricing and optimal partial hedging of a call option when the
//! writer pays execution costs, faces a participation cap and possibly moves
//! the price permanently.
//!
//! The value of the deal is carried by `theta(t, q, S)`, computed either by a
//! finite-difference solver ([`pde`]) or a trinomial-tree dynamic program
//! ([`tree`]). [`impact`] handles linear permanent impact by a change of price
//! variable and [`sim`] backtests policies by Monte Carlo.

pub mod bachelier;
pub mod cost;
pub mod error;
pub mod impact;
pub mod model;
pub mod payoff;
pub mod pde;
pub mod sim;
pub mod tree;

pub use bachelier::{bachelier_delta, bachelier_price, normal_cdf, normal_pdf};
pub use cost::{hamiltonian_golden, CostFunction, ExecutionCost, Hamiltonian};
pub use error::{Error, Result};
pub use model::{rescale_nominal, HedgingModel, MarketParams, OptionContract, Settlement, VolumeCurve};
pub use payoff::{liquidation_penalty, PayoffSpec, TerminalCondition};
pub use pde::{solve_payoff, solve_theta, GridSpec, SchemeConfig, SplittingOrder, ThetaSurface};
pub use tree::{solve_tree, solve_tree_payoff, TreeConfig, TreeValue};
pub use impact::{solve_with_impact, Engine, ImpactSolution, ImpactedTerminal, Solution, SolverSetup};
pub use sim::{HedgePolicy, PathConfig, PnLStats};
