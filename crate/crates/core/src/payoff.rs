//! Terminal conditions: the liquidation penalty and the settlement payoffs.

use crate::cost::ExecutionCost;
use crate::error::{Error, Result};
use crate::model::{HedgingModel, MarketParams, OptionContract, Settlement};

/// Terminal value `Pi(q, S)` handed to the solvers.
pub trait TerminalCondition: Sync {
    fn value(&self, q: f64, s: f64) -> f64;
}

impl<F> TerminalCondition for F
where
    F: Fn(f64, f64) -> f64 + Sync,
{
    fn value(&self, q: f64, s: f64) -> f64 {
        self(q, s)
    }
}

/// Risk-liquidity premium of unwinding `q` shares after maturity at the
/// constant participation rate `contract.penalty_rate`:
/// `(L(rho)/rho)|q| + gamma sigma^2 |q|^3 / (6 rho V)`.
///
/// `V` is the last segment of the volume curve, extended past maturity.
pub fn liquidation_penalty(
    contract: &OptionContract,
    market: &MarketParams,
    cost: &ExecutionCost,
    q: f64,
) -> Result<f64> {
    let a = q.abs();
    if a == 0.0 {
        return Ok(0.0);
    }
    let v = market.volume.terminal();
    if v <= 0.0 {
        return Err(Error::LiquidationImpossible { q });
    }
    Ok(penalty_constant_volume(
        cost,
        contract.penalty_rate,
        v,
        contract.gamma,
        market.sigma,
        a,
    ))
}

#[inline]
fn penalty_constant_volume(cost: &ExecutionCost, rho: f64, v: f64, gamma: f64, sigma: f64, a: f64) -> f64 {
    cost.exec_cost(rho) / rho * a + gamma * sigma * sigma * a * a * a / (6.0 * rho * v)
}

/// Contract, market and cost bundled into a validated no-impact payoff.
#[derive(Debug, Clone, PartialEq)]
pub struct PayoffSpec {
    pub contract: OptionContract,
    pub market: MarketParams,
    pub cost: ExecutionCost,
}

impl PayoffSpec {
    pub fn new(contract: OptionContract, market: MarketParams, cost: ExecutionCost) -> Result<Self> {
        market.validate()?;
        cost.validate()?;
        contract.validate(&market)?;
        if market.volume.terminal() <= 0.0 {
            return Err(Error::LiquidationImpossible { q: contract.nominal });
        }
        Ok(Self {
            contract,
            market,
            cost,
        })
    }

    pub fn reference() -> Self {
        Self::new(
            OptionContract::reference(),
            MarketParams::reference(),
            ExecutionCost::reference(),
        )
        .expect("reference scenario is valid")
    }

    pub fn model(&self) -> HedgingModel {
        HedgingModel {
            market: self.market.clone(),
            cost: self.cost,
            gamma: self.contract.gamma,
            maturity: self.contract.maturity,
        }
    }

    /// `l(q)`; infallible because construction checked the terminal volume.
    #[inline]
    pub fn penalty(&self, q: f64) -> f64 {
        let a = q.abs();
        if a == 0.0 {
            return 0.0;
        }
        penalty_constant_volume(
            &self.cost,
            self.contract.penalty_rate,
            self.market.volume.terminal(),
            self.contract.gamma,
            self.market.sigma,
            a,
        )
    }

    /// `Pi(q, S)` without permanent impact. The option is exercised iff `S >= K`.
    pub fn terminal_payoff(&self, q: f64, s: f64) -> f64 {
        let c = &self.contract;
        let intrinsic = c.nominal * (s - c.strike).max(0.0);
        match c.settlement {
            Settlement::Physical => {
                if s >= c.strike {
                    intrinsic + self.penalty(c.nominal - q)
                } else {
                    intrinsic + self.penalty(q)
                }
            }
            Settlement::Cash => intrinsic + self.penalty(q),
        }
    }
}

impl TerminalCondition for PayoffSpec {
    fn value(&self, q: f64, s: f64) -> f64 {
        self.terminal_payoff(q, s)
    }
}
