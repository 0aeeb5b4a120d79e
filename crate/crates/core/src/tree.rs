//! Discrete-time Bellman recursion on a recombining trinomial price tree.
//!
//! With `u_j(x, q, S) = -exp(-gamma e^{r(J-j)dt} (x + q S - theta_j(q, S)))`,
//! the recursion for `theta_j` is
//!
//! ```text
//! theta_j(q, S) = e^{-r(J-j)dt}/gamma inf_v log E[ exp( gamma e^{r(J-j-1)dt} (
//!     q S (e^{r dt} - 1) + L(v/V) V dt - (q + v dt)(mu dt + sigma sqrt(dt) eps)
//!     + theta_{j+1}(q + v dt, S + mu dt + sigma sqrt(dt) eps) ) ) ]
//! ```
//!
//! with `eps` in `{alpha, 0, -alpha}`. The deterministic terms leave the
//! expectation, so each node only needs
//! `G(q') = 1/g log E[exp(g (theta_{j+1}(q', S') - q' dS))]` once per grid
//! inventory, followed by a min-plus convolution with the execution costs.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{HedgingModel, MarketParams, OptionContract};
use crate::payoff::{PayoffSpec, TerminalCondition};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeConfig {
    /// Days per tree step.
    pub dt: f64,
    /// Trinomial spread; the step noise is `+-alpha` w.p. `1/(2 alpha^2)` each.
    pub alpha: f64,
    /// Inventory grid step (shares).
    pub dq: f64,
    pub q_lo: f64,
    pub q_hi: f64,
    #[serde(default = "default_true")]
    pub store_history: bool,
}

fn default_true() -> bool {
    true
}

fn is_integer(x: f64) -> bool {
    (x - x.round()).abs() <= 1e-9 * x.abs().max(1.0)
}

impl TreeConfig {
    /// Four steps per day, `alpha = sqrt(2)`, and the largest inventory step
    /// dividing `rho_max V dt` that still gives at least 200 steps across the
    /// nominal. Inventory bounds are `[0, N]` without drift and rates,
    /// `[-0.1 N, 1.1 N]` otherwise.
    pub fn default_for(contract: &OptionContract, market: &MarketParams) -> Result<Self> {
        let dt = 0.25;
        let n = contract.nominal;
        let (q_lo, q_hi) = if market.mu == 0.0 && market.r == 0.0 {
            (0.0, n)
        } else {
            (-0.1 * n, 1.1 * n)
        };
        let dq = default_dq(market.rho_max * market.volume.max() * dt, n, contract.q0, q_lo)?;
        Ok(Self {
            dt,
            alpha: std::f64::consts::SQRT_2,
            dq,
            q_lo,
            q_hi,
            store_history: true,
        })
    }

    pub fn steps(&self, maturity: f64) -> usize {
        (maturity / self.dt).round() as usize
    }

    pub fn q_nodes(&self) -> Vec<f64> {
        let n = ((self.q_hi - self.q_lo) / self.dq).round() as usize;
        (0..=n).map(|i| self.q_lo + i as f64 * self.dq).collect()
    }

    /// Branch probabilities for `(-alpha, 0, +alpha)`.
    pub fn weights(&self) -> [f64; 3] {
        let w = 1.0 / (2.0 * self.alpha * self.alpha);
        [w, 1.0 - 2.0 * w, w]
    }

    pub fn validate(&self, market: &MarketParams, maturity: f64) -> Result<()> {
        if !(self.alpha > 1.0 && self.alpha.is_finite()) {
            return Err(Error::invalid("alpha", "must be > 1"));
        }
        if !(self.dt > 0.0) || !is_integer(maturity / self.dt) || self.steps(maturity) == 0 {
            return Err(Error::invalid("dt", "maturity must be a positive multiple of dt"));
        }
        if !(self.dq > 0.0 && self.dq.is_finite()) {
            return Err(Error::invalid("dq", "must be > 0"));
        }
        if !(self.q_lo < self.q_hi) || !is_integer((self.q_hi - self.q_lo) / self.dq) {
            return Err(Error::invalid("q_hi", "inventory range must be a multiple of dq"));
        }
        for v in market.volume.positive_levels() {
            if !is_integer(market.rho_max * v * self.dt / self.dq) {
                return Err(Error::invalid(
                    "dq",
                    format!("rho_max * V * dt = {} is not a multiple of dq", market.rho_max * v * self.dt),
                ));
            }
        }
        Ok(())
    }

    fn q_index(&self, q: f64) -> Result<usize> {
        let x = (q - self.q_lo) / self.dq;
        let n = ((self.q_hi - self.q_lo) / self.dq).round();
        if !is_integer(x) || x.round() < 0.0 || x.round() > n {
            return Err(Error::OffGrid { q });
        }
        Ok(x.round() as usize)
    }
}

fn default_dq(step: f64, nominal: f64, q0: f64, q_lo: f64) -> Result<f64> {
    let target = nominal / 200.0;
    if step <= 0.0 {
        return Ok(target);
    }
    for m in 1..=1_000_000u64 {
        let dq = step / m as f64;
        if dq > target * (1.0 + 1e-12) {
            continue;
        }
        if is_integer(nominal / dq) && is_integer(q0 / dq) && is_integer(q_lo / dq) {
            return Ok(dq);
        }
    }
    Err(Error::invalid(
        "dq",
        "no divisor of rho_max * V * dt puts the nominal and q0 on the inventory grid",
    ))
}

/// Solved tree: `theta_j` and the optimal control at every node and grid inventory.
#[derive(Debug, Clone)]
pub struct TreeValue {
    cfg: TreeConfig,
    steps: usize,
    s0: f64,
    mu: f64,
    node_step: f64,
    q: Vec<f64>,
    /// `values[j][i * n_q + iq]` for node `p = i - j`; only `j = 0` without history.
    values: Vec<Vec<f64>>,
    /// Control in inventory-grid units per step: `v = m dq / dt`.
    controls: Vec<Vec<i32>>,
}

impl TreeValue {
    pub fn config(&self) -> &TreeConfig {
        &self.cfg
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn q_nodes(&self) -> &[f64] {
        &self.q
    }

    pub fn has_history(&self) -> bool {
        self.values.len() > 1
    }

    /// Price at node `(j, p)`, `-j <= p <= j`.
    pub fn node_price(&self, j: usize, p: i64) -> f64 {
        self.s0 + self.mu * j as f64 * self.cfg.dt + self.node_step * p as f64
    }

    /// Distance between adjacent price nodes of a level.
    pub fn node_step(&self) -> f64 {
        self.node_step
    }

    fn slot(&self, j: usize, p: i64) -> Result<usize> {
        if j > self.steps || p.unsigned_abs() as usize > j {
            return Err(Error::OutOfHull {
                t: j as f64 * self.cfg.dt,
                q: f64::NAN,
                s: f64::NAN,
            });
        }
        Ok((p + j as i64) as usize)
    }

    /// `theta_j(q, S_p)` for grid inventory `q`.
    pub fn theta(&self, j: usize, p: i64, q: f64) -> Result<f64> {
        let i = self.slot(j, p)?;
        let iq = self.cfg.q_index(q)?;
        let level = self.values.get(j).ok_or(Error::OutOfHull {
            t: j as f64 * self.cfg.dt,
            q,
            s: self.node_price(j, p),
        })?;
        Ok(level[i * self.q.len() + iq])
    }

    /// Whole `theta_j(., S_p)` row over the inventory grid.
    pub fn theta_row(&self, j: usize, p: i64) -> Result<&[f64]> {
        let i = self.slot(j, p)?;
        let n_q = self.q.len();
        let level = self.values.get(j).ok_or(Error::OutOfHull {
            t: j as f64 * self.cfg.dt,
            q: f64::NAN,
            s: self.node_price(j, p),
        })?;
        Ok(&level[i * n_q..(i + 1) * n_q])
    }

    /// Optimal trading speed (shares/day) at node `(j, p)` for grid inventory `q`.
    pub fn tree_policy(&self, j: usize, p: i64, q: f64) -> Result<f64> {
        let i = self.slot(j, p)?;
        let iq = self.cfg.q_index(q)?;
        if j >= self.steps {
            return Ok(0.0);
        }
        let level = self.controls.get(j).ok_or(Error::OutOfHull {
            t: j as f64 * self.cfg.dt,
            q,
            s: self.node_price(j, p),
        })?;
        Ok(level[i * self.q.len() + iq] as f64 * self.cfg.dq / self.cfg.dt)
    }

    /// Inventory-grid steps traded on `(j, p)` from grid inventory `q`.
    pub fn control_steps(&self, j: usize, p: i64, q: f64) -> Result<i32> {
        let v = self.tree_policy(j, p, q)?;
        Ok((v * self.cfg.dt / self.cfg.dq).round() as i32)
    }

    /// `theta_0(q0, S0)`: the price of the deal where the client hands over
    /// `q0` shares against `q0 S0` in cash.
    pub fn price_with_initial_exchange(&self, q0: f64) -> Result<f64> {
        self.theta(0, 0, q0)
    }

    /// Policy at an arbitrary `(t, q, S)`, interpolated bilinearly between
    /// price nodes and inventory nodes of level `floor(t / dt)`.
    pub fn policy_interpolated(&self, t: f64, q: f64, s: f64) -> Result<f64> {
        self.policy_lookup(t, q, s, false)
    }

    /// Like [`Self::policy_interpolated`], but prices and inventories outside
    /// the level's nodes take the value of the nearest edge node.
    pub fn policy_clamped(&self, t: f64, q: f64, s: f64) -> Result<f64> {
        self.policy_lookup(t, q, s, true)
    }

    fn policy_lookup(&self, t: f64, q: f64, s: f64, clamp: bool) -> Result<f64> {
        if !self.has_history() {
            return Err(Error::OutOfHull { t, q, s });
        }
        let dt = self.cfg.dt;
        if !(t >= -1e-9 * dt) || t > self.steps as f64 * dt * (1.0 + 1e-12) {
            return Err(Error::OutOfHull { t, q, s });
        }
        let j = ((t / dt + 1e-9).floor().max(0.0) as usize).min(self.steps - 1);
        let x = (s - self.s0 - self.mu * j as f64 * dt) / self.node_step + j as f64;
        let n_q = self.q.len();
        let y = (q - self.cfg.q_lo) / self.cfg.dq;
        let tol = 1e-9;
        // Queries on nodes must return the stored control exactly.
        let snap = |v: f64| if (v - v.round()).abs() <= tol { v.round() } else { v };
        let (x, y) = (snap(x), snap(y));
        let inside = x >= -tol && x <= 2.0 * j as f64 + tol && y >= -tol && y <= (n_q - 1) as f64 + tol;
        if !clamp && !inside || !(x.is_finite() && y.is_finite()) {
            return Err(Error::OutOfHull { t, q, s });
        }
        let ctl = &self.controls[j];
        let scale = self.cfg.dq / dt;
        let at = |i: usize, iq: usize| ctl[i * n_q + iq] as f64 * scale;
        let y = y.clamp(0.0, (n_q - 1) as f64);
        let iq = (y.floor() as usize).min(n_q - 2);
        let fq = y - iq as f64;
        if j == 0 {
            return Ok((1.0 - fq) * at(0, iq) + fq * at(0, iq + 1));
        }
        let x = x.clamp(0.0, 2.0 * j as f64);
        let i = (x.floor() as usize).min(2 * j - 1);
        let fs = x - i as f64;
        Ok((1.0 - fs) * ((1.0 - fq) * at(i, iq) + fq * at(i, iq + 1))
            + fs * ((1.0 - fq) * at(i + 1, iq) + fq * at(i + 1, iq + 1)))
    }

    /// Writes `j,p,S,q,theta,v` for every stored level.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "j,p,S,q,theta,v")?;
        let n_q = self.q.len();
        for (j, level) in self.values.iter().enumerate() {
            for i in 0..=2 * j {
                let p = i as i64 - j as i64;
                let s = self.node_price(j, p);
                for (iq, &q) in self.q.iter().enumerate() {
                    let v = if j < self.steps {
                        self.controls[j][i * n_q + iq] as f64 * self.cfg.dq / self.cfg.dt
                    } else {
                        0.0
                    };
                    writeln!(out, "{j},{p},{s},{q},{},{v}", level[i * n_q + iq])?;
                }
            }
        }
        Ok(())
    }
}

/// Backward induction from `theta_J = terminal` to the root.
pub fn solve_tree<T: TerminalCondition + ?Sized>(
    model: &HedgingModel,
    terminal: &T,
    cfg: &TreeConfig,
) -> Result<TreeValue> {
    model.validate()?;
    let market = &model.market;
    cfg.validate(market, model.maturity)?;
    let steps = cfg.steps(model.maturity);
    let dt = cfg.dt;
    let q = cfg.q_nodes();
    let n_q = q.len();
    let sq = market.sigma * dt.sqrt();
    let node_step = sq * cfg.alpha;
    let weights = cfg.weights();
    let drift = market.mu * dt;
    let growth = (market.r * dt).exp();
    let s_at = |j: usize, i: usize| market.s0 + market.mu * j as f64 * dt + node_step * (i as f64 - j as f64);

    let mut next = vec![0.0; (2 * steps + 1) * n_q];
    for i in 0..=2 * steps {
        let s = s_at(steps, i);
        for (iq, &qq) in q.iter().enumerate() {
            let v = terminal.value(qq, s);
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    stage: "terminal condition",
                    t: model.maturity,
                    q: qq,
                    s,
                });
            }
            next[i * n_q + iq] = v;
        }
    }

    let keep = cfg.store_history;
    let mut values: Vec<Vec<f64>> = Vec::new();
    let mut controls: Vec<Vec<i32>> = Vec::new();
    if keep {
        values.push(next.clone());
    }

    // Price moves for the branches (-alpha, 0, +alpha).
    let moves = [drift - node_step, drift, drift + node_step];

    for j in (0..steps).rev() {
        let t = j as f64 * dt;
        let g = model.gamma * (market.r * (steps - j - 1) as f64 * dt).exp();
        let volume = market.volume.at(t + 0.5 * dt);
        let max_m = if volume > 0.0 {
            (market.rho_max * volume * dt / cfg.dq + 1e-9).floor() as i64
        } else {
            0
        };
        // Candidate moves ordered 0, -1, +1, -2, +2, ... for tie-breaking.
        let mut moves_m: Vec<(i64, f64)> = vec![(0, 0.0)];
        for m in 1..=max_m {
            let speed = m as f64 * cfg.dq / dt;
            let c = volume * model.cost.exec_cost(speed / volume) * dt;
            moves_m.push((-m, c));
            moves_m.push((m, c));
        }

        let n_nodes = 2 * j + 1;
        let mut cur = vec![0.0; n_nodes * n_q];
        let mut ctl = vec![0i32; n_nodes * n_q];
        let failure = cur
            .par_chunks_mut(n_q)
            .zip(ctl.par_chunks_mut(n_q))
            .enumerate()
            .map(|(i, (row, crow))| {
                let s = s_at(j, i);
                let mut gq = vec![0.0; n_q];
                for iq in 0..n_q {
                    let qq = q[iq];
                    let a = [
                        next[i * n_q + iq] - qq * moves[0],
                        next[(i + 1) * n_q + iq] - qq * moves[1],
                        next[(i + 2) * n_q + iq] - qq * moves[2],
                    ];
                    let mx = a[0].max(a[1]).max(a[2]);
                    let acc = weights[0] * (g * (a[0] - mx)).exp_m1()
                        + weights[1] * (g * (a[1] - mx)).exp_m1()
                        + weights[2] * (g * (a[2] - mx)).exp_m1();
                    let val = mx + acc.ln_1p() / g;
                    if !val.is_finite() {
                        return Some((iq, s));
                    }
                    gq[iq] = val;
                }
                for iq in 0..n_q {
                    let mut best = f64::INFINITY;
                    let mut best_m = 0i64;
                    for &(m, c) in &moves_m {
                        let target = iq as i64 + m;
                        if target < 0 || target >= n_q as i64 {
                            continue;
                        }
                        let val = c + gq[target as usize];
                        if val < best {
                            best = val;
                            best_m = m;
                        }
                    }
                    let carry = q[iq] * s * (growth - 1.0);
                    row[iq] = (carry + best) / growth;
                    crow[iq] = best_m as i32;
                }
                None
            })
            .find_any(|r| r.is_some())
            .flatten();
        if let Some((iq, s)) = failure {
            return Err(Error::NonFinite {
                stage: "tree expectation",
                t,
                q: q[iq],
                s,
            });
        }
        if keep {
            values.push(cur.clone());
            controls.push(ctl);
        } else if j == 0 {
            controls.push(ctl);
        }
        next = cur;
    }
    if keep {
        values.reverse();
        controls.reverse();
    } else {
        values.push(next);
    }
    Ok(TreeValue {
        cfg: cfg.clone(),
        steps,
        s0: market.s0,
        mu: market.mu,
        node_step,
        q,
        values,
        controls,
    })
}

/// Solves the no-impact problem for a payoff specification.
pub fn solve_tree_payoff(spec: &PayoffSpec, cfg: &TreeConfig) -> Result<TreeValue> {
    cfg.q_index(spec.contract.q0)?;
    solve_tree(&spec.model(), spec, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trinomial_law_has_unit_variance() {
        let cfg = TreeConfig::default_for(&OptionContract::reference(), &MarketParams::reference()).unwrap();
        for alpha in [1.1, std::f64::consts::SQRT_2, 3.0] {
            let c = TreeConfig { alpha, ..cfg.clone() };
            let w = c.weights();
            assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-15);
            assert!(w.iter().all(|&x| x > 0.0));
            let mean = -alpha * w[0] + alpha * w[2];
            let var = alpha * alpha * (w[0] + w[2]);
            assert_eq!(mean, 0.0);
            assert!((var - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn reference_defaults() {
        let cfg = TreeConfig::default_for(&OptionContract::reference(), &MarketParams::reference()).unwrap();
        assert_eq!(cfg.dq, 1e5);
        assert_eq!((cfg.q_lo, cfg.q_hi), (0.0, 2e7));
        assert_eq!(cfg.q_nodes().len(), 201);
        let mut m = MarketParams::reference();
        m.rho_max = 0.5;
        let cfg = TreeConfig::default_for(&OptionContract::reference(), &m).unwrap();
        assert_eq!(cfg.dq, 1e5);
        m.r = 0.05 / 252.0;
        let cfg = TreeConfig::default_for(&OptionContract::reference(), &m).unwrap();
        assert_eq!((cfg.q_lo, cfg.q_hi), (-2e6, 2.2e7));
    }

    #[test]
    fn rejects_misaligned_inventory_step() {
        let m = MarketParams::reference();
        let mut cfg = TreeConfig::default_for(&OptionContract::reference(), &m).unwrap();
        cfg.dq = 3e5;
        assert!(cfg.validate(&m, 63.0).is_err());
        cfg.dq = 1e5;
        cfg.alpha = 1.0;
        assert!(cfg.validate(&m, 63.0).is_err());
        cfg.alpha = 1.5;
        cfg.dt = 0.4;
        assert!(cfg.validate(&m, 63.0).is_err());
    }

    #[test]
    fn off_grid_inventory() {
        let cfg = TreeConfig::default_for(&OptionContract::reference(), &MarketParams::reference()).unwrap();
        assert!(cfg.q_index(1e7).is_ok());
        assert!(matches!(cfg.q_index(1e7 + 3.0), Err(Error::OffGrid { .. })));
        assert!(cfg.q_index(-1e5).is_err());
    }
}
