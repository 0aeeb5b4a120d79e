//! Market, contract and nominal-rescaling definitions.
//!
//! Time is measured in days everywhere: `sigma` is in currency·day^-1/2,
//! volumes in shares·day^-1, `mu` in currency·day^-1 and `r` in day^-1.

use serde::{Deserialize, Serialize};

use crate::cost::ExecutionCost;
use crate::error::{Error, Result};

/// Piecewise-constant market volume `V(t)`.
///
/// Segment `i` covers `[starts[i], starts[i + 1])`; the last segment extends
/// to infinity, which is also the volume used for post-maturity liquidation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VolumeCurve {
    starts: Vec<f64>,
    values: Vec<f64>,
}

impl VolumeCurve {
    pub fn constant(v: f64) -> Self {
        Self {
            starts: vec![0.0],
            values: vec![v],
        }
    }

    /// Builds a curve from `(start_day, volume)` pairs. The first segment
    /// must start at day 0 and starts must be strictly increasing.
    pub fn piecewise(segments: &[(f64, f64)]) -> Result<Self> {
        if segments.is_empty() {
            return Err(Error::invalid("volume", "at least one segment is required"));
        }
        if segments[0].0 != 0.0 {
            return Err(Error::invalid("volume", "first segment must start at day 0"));
        }
        for w in segments.windows(2) {
            if !(w[1].0 > w[0].0) {
                return Err(Error::invalid("volume", "segment starts must be strictly increasing"));
            }
        }
        let curve = Self {
            starts: segments.iter().map(|s| s.0).collect(),
            values: segments.iter().map(|s| s.1).collect(),
        };
        curve.validate()?;
        Ok(curve)
    }

    pub fn validate(&self) -> Result<()> {
        if self.starts.is_empty() || self.starts.len() != self.values.len() {
            return Err(Error::invalid("volume", "malformed segment list"));
        }
        for &v in &self.values {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::invalid("volume", format!("volume {v} must be finite and >= 0")));
            }
        }
        Ok(())
    }

    /// Volume in force at time `t`.
    pub fn at(&self, t: f64) -> f64 {
        let idx = self.starts.partition_point(|&s| s <= t);
        self.values[idx.saturating_sub(1)]
    }

    /// Volume of the last segment, used after maturity.
    pub fn terminal(&self) -> f64 {
        *self.values.last().expect("non-empty curve")
    }

    pub fn max(&self) -> f64 {
        self.values.iter().cloned().fold(0.0, f64::max)
    }

    pub fn segments(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.starts.iter().cloned().zip(self.values.iter().cloned())
    }

    /// Distinct positive volume levels.
    pub fn positive_levels(&self) -> Vec<f64> {
        let mut out: Vec<f64> = Vec::new();
        for &v in &self.values {
            if v > 0.0 && !out.contains(&v) {
                out.push(v);
            }
        }
        out
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            starts: self.starts.clone(),
            values: self.values.iter().map(|v| v * factor).collect(),
        }
    }
}

/// Arithmetic Brownian price dynamics with linear permanent impact:
/// `dS = mu dt + sigma dW + k v dt`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarketParams {
    pub s0: f64,
    pub mu: f64,
    pub sigma: f64,
    pub r: f64,
    pub k: f64,
    pub volume: VolumeCurve,
    pub rho_max: f64,
}

impl MarketParams {
    /// Rounded Total SA figures: S0 = 45, sigma = 0.6/day^1/2, V = 4M shares/day,
    /// rho_max = 500%, no drift, no rates, no permanent impact.
    pub fn reference() -> Self {
        Self {
            s0: 45.0,
            mu: 0.0,
            sigma: 0.6,
            r: 0.0,
            k: 0.0,
            volume: VolumeCurve::constant(4.0e6),
            rho_max: 5.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.s0.is_finite() {
            return Err(Error::invalid("s0", "must be finite"));
        }
        if !(self.sigma.is_finite() && self.sigma > 0.0) {
            return Err(Error::invalid("sigma", "must be > 0"));
        }
        if !self.mu.is_finite() {
            return Err(Error::invalid("mu", "must be finite"));
        }
        if !self.r.is_finite() {
            return Err(Error::invalid("r", "must be finite"));
        }
        if !(self.k.is_finite() && self.k >= 0.0) {
            return Err(Error::invalid("k", "must be >= 0"));
        }
        if !(self.rho_max >= 0.0) {
            return Err(Error::invalid("rho_max", "must be >= 0"));
        }
        if self.k > 0.0 && (self.mu != 0.0 || self.r != 0.0) {
            return Err(Error::invalid(
                "k",
                "permanent impact is only supported with mu = 0 and r = 0",
            ));
        }
        self.volume.validate()
    }

    /// Maximal trading speed `rho_max * V(t)` in shares per day.
    pub fn max_speed(&self, t: f64) -> f64 {
        self.rho_max * self.volume.at(t)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Settlement {
    Physical,
    Cash,
}

/// A call written by the bank, together with the bank's risk aversion and the
/// inventory received from the client at inception.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptionContract {
    pub nominal: f64,
    pub strike: f64,
    pub maturity: f64,
    pub settlement: Settlement,
    pub gamma: f64,
    pub q0: f64,
    /// Participation rate of the post-maturity liquidation.
    pub penalty_rate: f64,
}

impl OptionContract {
    /// ATM call on 20M shares, 63 days, gamma = 2e-7, q0 = N/2, liquidation at 500%.
    pub fn reference() -> Self {
        Self {
            nominal: 2.0e7,
            strike: 45.0,
            maturity: 63.0,
            settlement: Settlement::Physical,
            gamma: 2.0e-7,
            q0: 1.0e7,
            penalty_rate: 5.0,
        }
    }

    pub fn validate(&self, market: &MarketParams) -> Result<()> {
        if !(self.nominal > 0.0 && self.nominal.is_finite()) {
            return Err(Error::invalid("nominal", "must be > 0"));
        }
        if !(self.strike > 0.0 && self.strike.is_finite()) {
            return Err(Error::invalid("strike", "must be > 0"));
        }
        if !(self.maturity > 0.0 && self.maturity.is_finite()) {
            return Err(Error::invalid("maturity", "must be > 0"));
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::invalid("gamma", "must be > 0"));
        }
        if !(self.q0 >= 0.0 && self.q0 <= self.nominal) {
            return Err(Error::invalid("q0", "must lie in [0, nominal]"));
        }
        if !(self.penalty_rate > 0.0 && self.penalty_rate <= market.rho_max) {
            return Err(Error::invalid("penalty_rate", "must lie in (0, rho_max]"));
        }
        Ok(())
    }
}

/// Everything the solvers need besides the terminal condition.
#[derive(Debug, Clone, PartialEq)]
pub struct HedgingModel {
    pub market: MarketParams,
    pub cost: ExecutionCost,
    pub gamma: f64,
    pub maturity: f64,
}

impl HedgingModel {
    pub fn validate(&self) -> Result<()> {
        self.market.validate()?;
        self.cost.validate()?;
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::invalid("gamma", "must be > 0"));
        }
        if !(self.maturity > 0.0 && self.maturity.is_finite()) {
            return Err(Error::invalid("maturity", "must be > 0"));
        }
        Ok(())
    }
}

/// Maps a nominal-`N` problem onto the equivalent unit-nominal one.
///
/// With `q = N q~`, the value function satisfies `theta(t, q, S) = N theta~(t, q~, S)`
/// when risk aversion is multiplied by `N` and volumes are divided by `N`.
/// The liquidation penalty rescales automatically because it is built from
/// `gamma` and `V`.
pub fn rescale_nominal(
    contract: &OptionContract,
    market: &MarketParams,
) -> (OptionContract, MarketParams) {
    let n = contract.nominal;
    let c = OptionContract {
        nominal: 1.0,
        gamma: contract.gamma * n,
        q0: contract.q0 / n,
        ..contract.clone()
    };
    let m = MarketParams {
        volume: market.volume.scaled(1.0 / n),
        // A linear impact in shares becomes k N per unit of rescaled inventory.
        k: market.k * n,
        ..market.clone()
    };
    (c, m)
}
