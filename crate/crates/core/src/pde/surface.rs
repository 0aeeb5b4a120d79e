use serde::{Deserialize, Serialize};

use super::GridSpec;
use crate::error::{Error, Result};

/// Values of `theta` and the optimal trading speed on the solver grid.
///
/// `values[n]` is the layer at `t_n = n dt`. `control[n]` is the speed chosen
/// on `[t_n, t_{n+1})`. Without history only level 0 is kept.
#[derive(Debug, Clone)]
pub struct ThetaSurface {
    pub(crate) grid: GridSpec,
    pub(crate) maturity: f64,
    pub(crate) values: Vec<Vec<f64>>,
    pub(crate) control: Vec<Vec<f64>>,
    pub(crate) diagnostics: SolveDiagnostics,
}

/// Bookkeeping collected during a solve.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SolveDiagnostics {
    pub max_substeps: usize,
    pub total_substeps: usize,
}

/// Grid coordinate with rounding noise around nodes removed.
fn snap(x: f64) -> f64 {
    let r = x.round();
    if (x - r).abs() < 1e-9 {
        r
    } else {
        x
    }
}

impl ThetaSurface {
    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn maturity(&self) -> f64 {
        self.maturity
    }

    pub fn dt(&self) -> f64 {
        self.maturity / self.grid.n_t as f64
    }

    pub fn diagnostics(&self) -> &SolveDiagnostics {
        &self.diagnostics
    }

    pub fn has_history(&self) -> bool {
        self.values.len() > 1
    }

    pub fn q_nodes(&self) -> Vec<f64> {
        self.grid.q_nodes()
    }

    pub fn s_nodes(&self) -> Vec<f64> {
        self.grid.s_nodes()
    }

    /// Stored layer at time level `n`, if kept.
    pub fn layer(&self, n: usize) -> Option<&[f64]> {
        self.values.get(n).map(|v| v.as_slice())
    }

    pub fn control_layer(&self, n: usize) -> Option<&[f64]> {
        self.control.get(n).map(|v| v.as_slice())
    }

    /// Stored value at node `(n, i, k)`.
    pub fn node_value(&self, n: usize, i: usize, k: usize) -> Option<f64> {
        self.values.get(n).map(|l| l[i * self.grid.n_s + k])
    }

    fn locate(&self, t: f64, q: f64, s: f64) -> Result<(f64, f64)> {
        let g = &self.grid;
        let tol_t = 1e-9 * self.maturity;
        let tol_q = 1e-9 * (g.q_max - g.q_min);
        let tol_s = 1e-9 * (g.s_max - g.s_min);
        let inside = t >= -tol_t
            && t <= self.maturity + tol_t
            && q >= g.q_min - tol_q
            && q <= g.q_max + tol_q
            && s >= g.s_min - tol_s
            && s <= g.s_max + tol_s;
        if !inside || !(t.is_finite() && q.is_finite() && s.is_finite()) {
            return Err(Error::OutOfHull { t, q, s });
        }
        let xq = snap(((q - g.q_min) / g.dq()).clamp(0.0, (g.n_q - 1) as f64));
        let xs = snap(((s - g.s_min) / g.ds()).clamp(0.0, (g.n_s - 1) as f64));
        Ok((xq, xs))
    }

    fn bilinear(&self, layer: &[f64], xq: f64, xs: f64) -> f64 {
        let n_s = self.grid.n_s;
        let i = (xq.floor() as usize).min(self.grid.n_q - 2);
        let k = (xs.floor() as usize).min(n_s - 2);
        let fq = xq - i as f64;
        let fs = xs - k as f64;
        let v00 = layer[i * n_s + k];
        let v01 = layer[i * n_s + k + 1];
        let v10 = layer[(i + 1) * n_s + k];
        let v11 = layer[(i + 1) * n_s + k + 1];
        // Exact node hits must return the stored value bit for bit.
        if fq == 0.0 && fs == 0.0 {
            return v00;
        }
        (1.0 - fq) * ((1.0 - fs) * v00 + fs * v01) + fq * ((1.0 - fs) * v10 + fs * v11)
    }

    /// `theta(t, q, S)`: bilinear in `(q, S)`, linear between time levels.
    pub fn price_at(&self, t: f64, q: f64, s: f64) -> Result<f64> {
        let (xq, xs) = self.locate(t, q, s)?;
        let dt = self.dt();
        let x = (t / dt).clamp(0.0, self.grid.n_t as f64);
        let n = x.round();
        if (x - n).abs() < 1e-9 {
            let layer = self.values.get(n as usize).ok_or(Error::OutOfHull { t, q, s })?;
            return Ok(self.bilinear(layer, xq, xs));
        }
        let lo = x.floor() as usize;
        let (a, b) = match (self.values.get(lo), self.values.get(lo + 1)) {
            (Some(a), Some(b)) => (a, b),
            _ => return Err(Error::OutOfHull { t, q, s }),
        };
        let f = x - lo as f64;
        Ok((1.0 - f) * self.bilinear(a, xq, xs) + f * self.bilinear(b, xq, xs))
    }

    /// Optimal trading speed (shares/day) in force at time `t`, bilinear in `(q, S)`.
    pub fn policy_at(&self, t: f64, q: f64, s: f64) -> Result<f64> {
        let (xq, xs) = self.locate(t, q, s)?;
        let dt = self.dt();
        let n = ((t / dt + 1e-9).floor().max(0.0) as usize).min(self.grid.n_t - 1);
        let layer = self.control.get(n).ok_or(Error::OutOfHull { t, q, s })?;
        Ok(self.bilinear(layer, xq, xs))
    }

    /// Indifference price `theta(0, q0, S0)`.
    pub fn price(&self, q0: f64, s0: f64) -> Result<f64> {
        self.price_at(0.0, q0, s0)
    }
}
