//! Finite-difference solver for the indifference-price PDE
//!
//! `-d_t theta + r theta + (mu - r S) q - mu d_S theta - sigma^2/2 d_SS theta
//!   - gamma sigma^2 e^{r(T-t)}/2 (d_S theta - q)^2 + V_t H(d_q theta) = 0`,
//!
//! marched backward from `theta(T, .) = Pi` by operator splitting: an
//! implicit step for the linear part (A), a monotone explicit step for the
//! mis-hedge term (B) and a semi-Lagrangian step for the execution term (C),
//! which also yields the optimal control.

mod export;
pub mod steps;
mod surface;

use serde::{Deserialize, Serialize};

pub use export::{write_surface_csv, write_surface_sidecar, SurfaceSidecar};
pub use surface::{SolveDiagnostics, ThetaSurface};

use crate::error::{Error, Result};
use crate::model::{HedgingModel, MarketParams, OptionContract};
use crate::payoff::{PayoffSpec, TerminalCondition};
use steps::{step_nonlinear, step_semilagrangian, ImplicitStep, LayerGrid};

/// Uniform discretisation of `[0, T] x [q_min, q_max] x [S_min, S_max]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub s_min: f64,
    pub s_max: f64,
    pub n_s: usize,
    pub q_min: f64,
    pub q_max: f64,
    pub n_q: usize,
    pub n_t: usize,
}

impl GridSpec {
    /// `S` in `K +/- 6 sigma sqrt(T)` with 481 nodes, `q` in `[-0.1 N, 1.1 N]`
    /// with 241 nodes, four time steps per day.
    pub fn default_for(contract: &OptionContract, market: &MarketParams) -> Self {
        let w = 6.0 * market.sigma * contract.maturity.sqrt();
        let n = contract.nominal;
        Self {
            s_min: contract.strike - w,
            s_max: contract.strike + w,
            n_s: 481,
            q_min: -0.1 * n,
            q_max: 1.1 * n,
            n_q: 241,
            n_t: ((4.0 * contract.maturity).round() as usize).max(2),
        }
    }

    /// Same box with every resolution multiplied by `factor` (`n - 1` scaled).
    pub fn refined(&self, factor: usize) -> Self {
        Self {
            n_s: (self.n_s - 1) * factor + 1,
            n_q: (self.n_q - 1) * factor + 1,
            n_t: self.n_t * factor,
            ..self.clone()
        }
    }

    pub fn ds(&self) -> f64 {
        (self.s_max - self.s_min) / (self.n_s - 1) as f64
    }

    pub fn dq(&self) -> f64 {
        (self.q_max - self.q_min) / (self.n_q - 1) as f64
    }

    pub fn s_nodes(&self) -> Vec<f64> {
        let ds = self.ds();
        (0..self.n_s).map(|k| self.s_min + k as f64 * ds).collect()
    }

    pub fn q_nodes(&self) -> Vec<f64> {
        let dq = self.dq();
        (0..self.n_q).map(|i| self.q_min + i as f64 * dq).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_s < 3 || self.n_q < 2 || self.n_t < 2 {
            return Err(Error::invalid("grid", "need n_s >= 3, n_q >= 2, n_t >= 2"));
        }
        if !(self.s_min < self.s_max) || !self.s_min.is_finite() || !self.s_max.is_finite() {
            return Err(Error::invalid("grid", "need s_min < s_max"));
        }
        if !(self.q_min <= 0.0 && 0.0 <= self.q_max && self.q_min < self.q_max) {
            return Err(Error::invalid("grid", "need q_min <= 0 <= q_max"));
        }
        Ok(())
    }

    pub fn validate_for(&self, contract: &OptionContract) -> Result<()> {
        self.validate()?;
        if !(self.s_min < contract.strike && contract.strike < self.s_max) {
            return Err(Error::invalid("grid", "strike must lie strictly inside [s_min, s_max]"));
        }
        if self.q_max < contract.nominal {
            return Err(Error::invalid("grid", "q_max must be >= nominal"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplittingOrder {
    /// implicit, mis-hedge, execution
    Abc,
    /// implicit, execution, mis-hedge
    Acb,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemeConfig {
    pub order: SplittingOrder,
    /// Keep every time level; otherwise only `t = 0` is retained.
    pub store_history: bool,
}

impl Default for SchemeConfig {
    fn default() -> Self {
        Self {
            order: SplittingOrder::Abc,
            store_history: true,
        }
    }
}

impl SchemeConfig {
    pub fn price_only() -> Self {
        Self {
            store_history: false,
            ..Self::default()
        }
    }
}

fn check_finite(grid: &LayerGrid, layer: &[f64], stage: &'static str, t: f64) -> Result<()> {
    if let Some(idx) = layer.iter().position(|v| !v.is_finite()) {
        let n_s = grid.n_s();
        return Err(Error::NonFinite {
            stage,
            t,
            q: grid.q[idx / n_s],
            s: grid.s[idx % n_s],
        });
    }
    Ok(())
}

/// Solves for `theta` on `grid`, starting from `terminal` at maturity.
pub fn solve_theta<T: TerminalCondition + ?Sized>(
    model: &HedgingModel,
    terminal: &T,
    grid: &GridSpec,
    scheme: &SchemeConfig,
) -> Result<ThetaSurface> {
    model.validate()?;
    grid.validate()?;
    let market = &model.market;
    let lg = LayerGrid {
        q: grid.q_nodes(),
        s: grid.s_nodes(),
    };
    let n_s = grid.n_s;
    let maturity = model.maturity;
    let dt = maturity / grid.n_t as f64;

    let mut layer = vec![0.0; grid.n_q * n_s];
    for (i, &q) in lg.q.iter().enumerate() {
        for (k, &s) in lg.s.iter().enumerate() {
            layer[i * n_s + k] = terminal.value(q, s);
        }
    }
    check_finite(&lg, &layer, "terminal condition", maturity)?;

    let implicit = ImplicitStep::new(&lg, market.sigma, market.mu, market.r, dt);
    let mut diagnostics = SolveDiagnostics::default();

    let keep = scheme.store_history;
    let mut values: Vec<Vec<f64>> = Vec::new();
    let mut controls: Vec<Vec<f64>> = Vec::new();
    if keep {
        values.push(layer.clone());
    }

    for n in (0..grid.n_t).rev() {
        let t = n as f64 * dt;
        let c = model.gamma * market.sigma * market.sigma * (market.r * (maturity - t)).exp();
        let volume = market.volume.at(t + 0.5 * dt);
        let mut control = vec![0.0; layer.len()];

        implicit.apply(&lg, &mut layer);
        check_finite(&lg, &layer, "implicit step", t)?;

        let mut nonlinear = |layer: &mut Vec<f64>| -> Result<()> {
            let sub = step_nonlinear(&lg, layer, c, dt);
            diagnostics.max_substeps = diagnostics.max_substeps.max(sub);
            diagnostics.total_substeps += sub;
            check_finite(&lg, layer, "mis-hedge step", t)
        };
        let execution = |layer: &mut Vec<f64>, control: &mut Vec<f64>| -> Result<()> {
            *layer = step_semilagrangian(
                &lg,
                layer,
                control,
                &model.cost,
                market.rho_max,
                volume,
                dt,
            )
            .map_err(|idx| Error::NoFeasibleControl {
                t,
                q: lg.q[idx / n_s],
                s: lg.s[idx % n_s],
            })?;
            check_finite(&lg, layer, "execution step", t)
        };
        match scheme.order {
            SplittingOrder::Abc => {
                nonlinear(&mut layer)?;
                execution(&mut layer, &mut control)?;
            }
            SplittingOrder::Acb => {
                execution(&mut layer, &mut control)?;
                nonlinear(&mut layer)?;
            }
        }

        if keep {
            values.push(layer.clone());
            controls.push(control);
        } else if n == 0 {
            values.push(layer.clone());
            controls.push(control);
        }
    }
    if keep {
        values.reverse();
        controls.reverse();
    }
    Ok(ThetaSurface {
        grid: grid.clone(),
        maturity,
        values,
        control: controls,
        diagnostics,
    })
}

/// Solves the no-impact problem for a payoff specification.
pub fn solve_payoff(spec: &PayoffSpec, grid: &GridSpec, scheme: &SchemeConfig) -> Result<ThetaSurface> {
    grid.validate_for(&spec.contract)?;
    solve_theta(&spec.model(), spec, grid, scheme)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_grid_contains_reference_points() {
        let spec = PayoffSpec::reference();
        let g = GridSpec::default_for(&spec.contract, &spec.market);
        g.validate_for(&spec.contract).unwrap();
        assert_eq!(g.n_t, 252);
        let q = g.q_nodes();
        assert!(q.iter().any(|&x| (x - 1e7).abs() < 1e-3));
        assert!(q.iter().any(|&x| x.abs() < 1e-3));
        let s = g.s_nodes();
        assert!(s.iter().any(|&x| (x - 45.0).abs() < 1e-9));
    }

    #[test]
    fn grid_validation() {
        let spec = PayoffSpec::reference();
        let mut g = GridSpec::default_for(&spec.contract, &spec.market);
        g.q_max = 0.5 * spec.contract.nominal;
        assert!(g.validate_for(&spec.contract).is_err());
        let mut g = GridSpec::default_for(&spec.contract, &spec.market);
        g.s_max = 44.0;
        assert!(g.validate_for(&spec.contract).is_err());
        let mut g = GridSpec::default_for(&spec.contract, &spec.market);
        g.n_t = 1;
        assert!(g.validate().is_err());
    }
}
