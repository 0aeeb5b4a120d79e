//! The three split operators of one backward time step.
//!
//! A layer is a `(q, S)` slab stored row-major by inventory: node `(i, k)`
//! lives at `i * n_s + k`.

use rayon::prelude::*;

use crate::cost::{CostFunction, ExecutionCost};

/// Uniform `(q, S)` node positions of one layer.
#[derive(Debug, Clone)]
pub struct LayerGrid {
    pub q: Vec<f64>,
    pub s: Vec<f64>,
}

impl LayerGrid {
    pub fn n_q(&self) -> usize {
        self.q.len()
    }
    pub fn n_s(&self) -> usize {
        self.s.len()
    }
    pub fn ds(&self) -> f64 {
        self.s[1] - self.s[0]
    }
    pub fn dq(&self) -> f64 {
        self.q[1] - self.q[0]
    }
}

/// Backward-Euler solver for the linear part
/// `r theta + (mu - r S) q - mu d_S theta - sigma^2/2 d_SS theta`.
///
/// The matrix does not depend on `q`, so it is factored once and reused for
/// every inventory row. Boundary rows impose `d_SS theta = 0` and use the
/// inward one-sided first difference.
#[derive(Debug, Clone)]
pub struct ImplicitStep {
    sub: Vec<f64>,
    inv_diag: Vec<f64>,
    sup_mod: Vec<f64>,
    dt: f64,
    mu: f64,
    r: f64,
}

impl ImplicitStep {
    pub fn new(grid: &LayerGrid, sigma: f64, mu: f64, r: f64, dt: f64) -> Self {
        let n = grid.n_s();
        let ds = grid.ds();
        let diff = 0.5 * sigma * sigma * dt / (ds * ds);
        // Central drift while the matrix stays an M-matrix, upwind otherwise.
        let central = mu.abs() * ds <= sigma * sigma;
        let mut sub = vec![0.0; n];
        let mut diag = vec![0.0; n];
        let mut sup = vec![0.0; n];
        for k in 1..n - 1 {
            diag[k] = 1.0 + r * dt + 2.0 * diff;
            sub[k] = -diff;
            sup[k] = -diff;
            if central {
                sub[k] += mu * dt / (2.0 * ds);
                sup[k] -= mu * dt / (2.0 * ds);
            } else if mu > 0.0 {
                diag[k] += mu * dt / ds;
                sup[k] -= mu * dt / ds;
            } else {
                diag[k] -= mu * dt / ds;
                sub[k] += mu * dt / ds;
            }
        }
        diag[0] = 1.0 + r * dt + mu * dt / ds;
        sup[0] = -mu * dt / ds;
        diag[n - 1] = 1.0 + r * dt - mu * dt / ds;
        sub[n - 1] = mu * dt / ds;

        // Thomas factorisation.
        let mut inv_diag = vec![0.0; n];
        let mut sup_mod = vec![0.0; n];
        let mut d = diag[0];
        assert!(d != 0.0, "singular implicit system");
        inv_diag[0] = 1.0 / d;
        sup_mod[0] = sup[0] / d;
        for k in 1..n {
            d = diag[k] - sub[k] * sup_mod[k - 1];
            assert!(d != 0.0, "singular implicit system");
            inv_diag[k] = 1.0 / d;
            sup_mod[k] = sup[k] / d;
        }
        Self {
            sub,
            inv_diag,
            sup_mod,
            dt,
            mu,
            r,
        }
    }

    /// Solves one step in place for every inventory row.
    pub fn apply(&self, grid: &LayerGrid, layer: &mut [f64]) {
        let n_s = grid.n_s();
        layer
            .par_chunks_mut(n_s)
            .zip(grid.q.par_iter())
            .for_each(|(row, &q)| {
                if self.mu != 0.0 || self.r != 0.0 {
                    for (v, &s) in row.iter_mut().zip(&grid.s) {
                        *v -= self.dt * (self.mu - self.r * s) * q;
                    }
                }
                self.solve_row(row);
            });
    }

    fn solve_row(&self, row: &mut [f64]) {
        let n = row.len();
        row[0] *= self.inv_diag[0];
        for k in 1..n {
            row[k] = (row[k] - self.sub[k] * row[k - 1]) * self.inv_diag[k];
        }
        for k in (0..n - 1).rev() {
            row[k] -= self.sup_mod[k] * row[k + 1];
        }
    }
}

/// Godunov flux for `g(p) = c/2 (p - q)^2` with one-sided slopes `a = D-`, `b = D+`.
///
/// The backward update is `theta + dt * flux`; the flux is nonincreasing in
/// `a` and nondecreasing in `b`, which makes the explicit scheme monotone
/// under the CFL bound.
#[inline]
pub fn godunov_mishedge(a: f64, b: f64, q: f64, c: f64) -> f64 {
    let ga = 0.5 * c * (a - q) * (a - q);
    let gb = 0.5 * c * (b - q) * (b - q);
    if a <= b {
        ga.max(gb)
    } else if b <= q && q <= a {
        0.0
    } else {
        ga.min(gb)
    }
}

/// Explicit monotone step for the mis-hedge term `c/2 (d_S theta - q)^2`,
/// sub-stepped so that `h c max|D theta - q| <= dS`. All rows share the same
/// sub-steps, which keeps the time error uniform in `q`.
///
/// Returns the number of sub-steps.
pub fn step_nonlinear(grid: &LayerGrid, layer: &mut [f64], c: f64, dt: f64) -> usize {
    if c == 0.0 || dt == 0.0 {
        return 0;
    }
    let n_s = grid.n_s();
    let ds = grid.ds();
    let mut remaining = dt;
    let mut count = 0;
    while remaining > 0.0 {
        let dev = layer
            .par_chunks(n_s)
            .zip(grid.q.par_iter())
            .map(|(row, &q)| {
                row.windows(2)
                    .map(|w| ((w[1] - w[0]) / ds - q).abs())
                    .fold(0.0_f64, f64::max)
            })
            .reduce(|| 0.0, f64::max);
        let h = if c * dev * remaining <= ds {
            remaining
        } else {
            ds / (c * dev)
        };
        layer
            .par_chunks_mut(n_s)
            .zip(grid.q.par_iter())
            .for_each(|(row, &q)| {
                let slopes: Vec<f64> = row.windows(2).map(|w| (w[1] - w[0]) / ds).collect();
                for k in 0..n_s {
                    let a = if k == 0 { slopes[0] } else { slopes[k - 1] };
                    let b = if k == n_s - 1 { slopes[n_s - 2] } else { slopes[k] };
                    row[k] += h * godunov_mishedge(a, b, q, c);
                }
            });
        remaining = if h >= remaining { 0.0 } else { remaining - h };
        count += 1;
    }
    count
}

/// Semi-Lagrangian step for the execution term `V H(d_q theta)`:
/// `theta(q) <- min_d [ V L(d / (V dt)) dt + I(q + d) ]` over shifts
/// `|d| <= rho_max V dt` that keep `q + d` on the grid, where `I` is the
/// linear interpolant of the layer in `q`.
///
/// The minimum is exact: every shift landing on a node is scanned, then the
/// closed-form optimum is taken inside the two interpolation pieces next to
/// the best node. Ties go to the smallest shift, then to selling.
///
/// Writes the minimising trading speed `v = d / dt` into `control` and
/// returns the updated layer, or the index of a node without a finite value.
pub fn step_semilagrangian(
    grid: &LayerGrid,
    layer: &[f64],
    control: &mut [f64],
    cost: &ExecutionCost,
    rho_max: f64,
    volume: f64,
    dt: f64,
) -> Result<Vec<f64>, usize> {
    let n_s = grid.n_s();
    let n_q = grid.n_q();
    if volume <= 0.0 || rho_max <= 0.0 || dt <= 0.0 {
        control.iter_mut().for_each(|v| *v = 0.0);
        return Ok(layer.to_vec());
    }
    let dq = grid.dq();
    let vdt = volume * dt;
    // Reach in units of dq.
    let reach = rho_max * vdt / dq;
    let m_max = ((reach + 1e-9).floor() as usize).min(n_q - 1);
    let shift_cost: Vec<f64> = (0..=m_max)
        .map(|m| vdt * cost.exec_cost(m as f64 * dq / vdt))
        .collect();

    let mut out = vec![0.0; layer.len()];
    let failed = out
        .par_chunks_mut(n_s)
        .zip(control.par_chunks_mut(n_s))
        .enumerate()
        .map(|(i, (row, ctl))| {
            let lo = reach.min(i as f64);
            let hi = reach.min((n_q - 1 - i) as f64);
            let m_lo = (lo + 1e-9).floor() as usize;
            let m_hi = (hi + 1e-9).floor() as usize;
            let at = |j: usize, k: usize| layer[j * n_s + k];
            for k in 0..n_s {
                let mut best = at(i, k);
                let mut best_d = 0.0;
                for m in 1..=m_lo.max(m_hi) {
                    if m <= m_lo {
                        let v = shift_cost[m] + at(i - m, k);
                        if v < best {
                            best = v;
                            best_d = -(m as f64);
                        }
                    }
                    if m <= m_hi {
                        let v = shift_cost[m] + at(i + m, k);
                        if v < best {
                            best = v;
                            best_d = m as f64;
                        }
                    }
                }
                // Interiors of the pieces on either side of the best node.
                let mb = best_d as i64;
                for (a, b) in [(mb - 1, mb), (mb, mb + 1)] {
                    let from = (a as f64).max(-lo);
                    let to = (b as f64).min(hi);
                    if !(from < to) {
                        continue;
                    }
                    let ja = (i as i64 + a) as usize;
                    let (ta, tb) = (at(ja, k), at(ja + 1, k));
                    let slope = (tb - ta) / dq;
                    let rho = -cost.hamiltonian(slope, rho_max).argmax;
                    if !rho.is_finite() {
                        continue;
                    }
                    let d = (rho * vdt / dq).clamp(from, to);
                    let v = vdt * cost.exec_cost(d * dq / vdt) + ta + (d - a as f64) * (tb - ta);
                    if v < best {
                        best = v;
                        best_d = d;
                    }
                }
                if !best.is_finite() {
                    return Some(i * n_s + k);
                }
                row[k] = best;
                ctl[k] = best_d * dq / dt;
            }
            None
        })
        .find_any(|r| r.is_some())
        .flatten();
    match failed {
        Some(idx) => Err(idx),
        None => Ok(out),
    }
}
