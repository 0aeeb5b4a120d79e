use std::io::Write;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use super::paths::{draw_increments, path_rng, PathConfig, PricePath};
use super::{HedgePolicy, PnLStats};
use crate::bachelier::bachelier_delta;
use crate::error::{Error, Result};
use crate::impact::{observed_payoff, observed_price};
use crate::payoff::PayoffSpec;

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn lcm(a: usize, b: usize) -> usize {
    a / gcd(a, b) * b
}

/// Cost of trading at speed `v` for `dt` days against volume `volume`.
fn execution_cost(spec: &PayoffSpec, v: f64, volume: f64, dt: f64) -> f64 {
    if v == 0.0 {
        0.0
    } else if volume > 0.0 {
        volume * spec.cost.exec_cost(v / volume) * dt
    } else {
        f64::INFINITY
    }
}

/// Bachelier delta hedge with `rebalances` dates; see [`run_delta_hedge_sweep`].
pub fn run_delta_hedge(spec: &PayoffSpec, cfg: &PathConfig) -> Result<PnLStats> {
    Ok(run_delta_hedge_sweep(spec, cfg, &[cfg.rebalances])?.remove(0))
}

/// Bachelier delta hedge for several rebalancing counts on common paths.
///
/// Each path is simulated on the grid with `lcm(ms)` steps together with one
/// TWAP per fine step. A coarse interval's TWAP is the mean of its fine TWAPs,
/// which has exactly the conditional law of the coarse TWAP, so every `M`
/// sees the same Brownian path.
///
/// On `[t_i, t_{i+1})` the desk trades `N (Delta_{t_i} - Delta_{t_{i-1}})`
/// shares at the TWAP (nothing on the first interval), starting from
/// `q0 = N Delta_0`.
pub fn run_delta_hedge_sweep(spec: &PayoffSpec, cfg: &PathConfig, ms: &[usize]) -> Result<Vec<PnLStats>> {
    cfg.validate()?;
    let market = &spec.market;
    if market.r != 0.0 || market.k != 0.0 {
        return Err(Error::invalid("r", "the delta-hedging benchmark requires r = 0 and k = 0"));
    }
    if ms.is_empty() || ms.iter().any(|&m| m < 2) {
        return Err(Error::invalid("rebalances", "every rebalancing count must be >= 2"));
    }
    let c = &spec.contract;
    let maturity = c.maturity;
    let fine = ms.iter().fold(1, |a, &m| lcm(a, m));
    let dtf = maturity / fine as f64;
    let twap_sd = market.sigma * (dtf / 12.0).sqrt();

    let per_path: Vec<Vec<(f64, f64)>> = (0..cfg.n_paths)
        .into_par_iter()
        .map(|p| {
            let mut rng = path_rng(cfg.seed, p as u64);
            let mut incr = vec![0.0; fine];
            draw_increments(&mut rng, market.mu, market.sigma, dtf, &mut incr);
            let mut s = Vec::with_capacity(fine + 1);
            s.push(market.s0);
            for d in &incr {
                s.push(s.last().unwrap() + d);
            }
            let twap: Vec<f64> = (0..fine)
                .map(|f| {
                    let z: f64 = rng.sample(StandardNormal);
                    0.5 * (s[f] + s[f + 1]) + twap_sd * z
                })
                .collect();
            ms.iter()
                .map(|&m| {
                    let r = fine / m;
                    let dt = maturity / m as f64;
                    let delta0 = bachelier_delta(s[0], c.strike, market.sigma, maturity);
                    let mut q = c.nominal * delta0;
                    let mut x = -q * s[0];
                    let mut exec = 0.0;
                    let mut prev = delta0;
                    for i in 0..m {
                        let t = i as f64 * dt;
                        let delta = bachelier_delta(s[i * r], c.strike, market.sigma, maturity - t);
                        let v = if i == 0 { 0.0 } else { c.nominal * (delta - prev) / dt };
                        prev = delta;
                        if v != 0.0 {
                            let fill = twap[i * r..(i + 1) * r].iter().sum::<f64>() / r as f64;
                            let cost = execution_cost(spec, v, market.volume.at(t + 0.5 * dt), dt);
                            x -= v * dt * fill + cost;
                            q += v * dt;
                            exec += cost;
                        }
                    }
                    let st = s[fine];
                    (spec.terminal_payoff(q, st) - x - q * st, exec)
                })
                .collect()
        })
        .collect();

    let mut out = Vec::with_capacity(ms.len());
    for (j, _) in ms.iter().enumerate() {
        let outcomes: Vec<(f64, f64)> = per_path.iter().map(|v| v[j]).collect();
        if let Some(bad) = outcomes.iter().position(|o| !o.0.is_finite()) {
            return Err(Error::NonFinite {
                stage: "delta hedge",
                t: maturity,
                q: f64::NAN,
                s: bad as f64,
            });
        }
        out.push(PnLStats::from_outcomes(&outcomes, 0));
    }
    Ok(out)
}

/// State of one policy-hedged path at a decision point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathRow {
    pub t: f64,
    pub s: f64,
    pub s_tilde: f64,
    pub q: f64,
    pub v: f64,
    pub x: f64,
}

/// Follows `policy` along one unimpacted price path with the given TWAP
/// shocks. Returns `(cost, execution cost)`.
fn policy_path<P: HedgePolicy + ?Sized>(
    spec: &PayoffSpec,
    policy: &P,
    s_tilde: &[f64],
    twap_z: &[f64],
    dt: f64,
    mut rows: Option<&mut Vec<PathRow>>,
) -> Result<(f64, f64)> {
    let market = &spec.market;
    let (k, q0) = (market.k, spec.contract.q0);
    let growth = (market.r * dt).exp();
    let accrual = if market.r == 0.0 { dt } else { (growth - 1.0) / market.r };
    let twap_sd = market.sigma * (dt / 12.0).sqrt();
    let steps = s_tilde.len() - 1;
    let mut q = q0;
    let mut x = -q0 * s_tilde[0];
    let mut exec = 0.0;
    for i in 0..steps {
        let t = i as f64 * dt;
        let v = policy.speed(t, q, s_tilde[i])?;
        if let Some(r) = rows.as_deref_mut() {
            r.push(PathRow {
                t,
                s: observed_price(k, q0, s_tilde[i], q),
                s_tilde: s_tilde[i],
                q,
                v,
                x,
            });
        }
        let cost = execution_cost(spec, v, market.volume.at(t + 0.5 * dt), dt);
        let fill = 0.5 * (s_tilde[i] + s_tilde[i + 1]) + twap_sd * twap_z[i] + k * (q + 0.5 * v * dt - q0);
        x = growth * x - (v * dt * fill + cost) * accrual / dt;
        q += v * dt;
        exec += cost;
    }
    let st = observed_price(k, q0, s_tilde[steps], q);
    if let Some(r) = rows {
        r.push(PathRow {
            t: steps as f64 * dt,
            s: st,
            s_tilde: s_tilde[steps],
            q,
            v: 0.0,
            x,
        });
    }
    Ok((observed_payoff(spec, q, st) - x - q * st, exec))
}

fn draw_policy_path(spec: &PayoffSpec, cfg: &PathConfig, p: usize, dt: f64) -> (Vec<f64>, Vec<f64>) {
    let market = &spec.market;
    let steps = cfg.n_obs - 1;
    let mut rng = path_rng(cfg.seed, p as u64);
    let mut incr = vec![0.0; steps];
    draw_increments(&mut rng, market.mu, market.sigma, dt, &mut incr);
    let mut s = Vec::with_capacity(steps + 1);
    s.push(market.s0);
    for d in &incr {
        s.push(s.last().unwrap() + d);
    }
    let z: Vec<f64> = (0..steps).map(|_| rng.sample(StandardNormal)).collect();
    (s, z)
}

/// Applies `policy` at each of the `n_obs - 1` decision points, holding the
/// speed until the next one. Prices are simulated in unimpacted coordinates;
/// with `k > 0` the policy is queried at `S~` and fills and the terminal
/// payoff use the observed price. Paths that leave the policy's domain are
/// excluded and counted.
pub fn run_policy_hedge<P: HedgePolicy + ?Sized>(
    spec: &PayoffSpec,
    policy: &P,
    cfg: &PathConfig,
) -> Result<PnLStats> {
    cfg.validate()?;
    let steps = cfg.n_obs - 1;
    let dt = spec.contract.maturity / steps as f64;
    let results: Vec<Result<Option<(f64, f64)>>> = (0..cfg.n_paths)
        .into_par_iter()
        .map(|p| {
            let (s, z) = draw_policy_path(spec, cfg, p, dt);
            match policy_path(spec, policy, &s, &z, dt, None) {
                Ok(o) => Ok(Some(o)),
                Err(Error::OutOfHull { .. }) => Ok(None),
                Err(e) => Err(e),
            }
        })
        .collect();
    let mut outcomes = Vec::with_capacity(cfg.n_paths);
    let mut excluded = 0;
    for r in results {
        match r? {
            Some(o) => outcomes.push(o),
            None => excluded += 1,
        }
    }
    Ok(PnLStats::from_outcomes(&outcomes, excluded))
}

/// Writes `path_id,t,S,S_tilde,q,v,X` for the first `n_dump` paths of a
/// policy run.
pub fn write_path_dump<P: HedgePolicy + ?Sized, W: Write>(
    spec: &PayoffSpec,
    policy: &P,
    cfg: &PathConfig,
    n_dump: usize,
    mut out: W,
) -> Result<()> {
    cfg.validate()?;
    let steps = cfg.n_obs - 1;
    let dt = spec.contract.maturity / steps as f64;
    writeln!(out, "path_id,t,S,S_tilde,q,v,X")?;
    for p in 0..n_dump.min(cfg.n_paths) {
        let (s, z) = draw_policy_path(spec, cfg, p, dt);
        let mut rows = Vec::with_capacity(steps + 1);
        match policy_path(spec, policy, &s, &z, dt, Some(&mut rows)) {
            Ok(_) | Err(Error::OutOfHull { .. }) => {}
            Err(e) => return Err(e),
        }
        for r in rows {
            writeln!(out, "{p},{},{},{},{},{},{}", r.t, r.s, r.s_tilde, r.q, r.v, r.x)?;
        }
    }
    Ok(())
}

/// Model and delta-hedge inventories along a given price path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryPoint {
    pub t: f64,
    /// Observed price.
    pub s: f64,
    /// Unimpacted price (equal to `s` without permanent impact).
    pub s_tilde: f64,
    pub q_model: f64,
    pub q_delta: f64,
    /// Speed applied on `[t, t + dt)`; zero at maturity.
    pub v_model: f64,
}

/// Runs `policy` along `path` (unimpacted prices at the policy's time
/// resolution), starting from `q0`. The delta-hedge inventory is
/// `N Delta(S_t, T - t)` at the observed price.
pub fn hedge_trajectory<P: HedgePolicy + ?Sized>(
    spec: &PayoffSpec,
    policy: &P,
    path: &PricePath,
) -> Result<Vec<TrajectoryPoint>> {
    path.validate()?;
    let c = &spec.contract;
    if (path.maturity() - c.maturity).abs() > 1e-9 * c.maturity {
        return Err(Error::Path(format!(
            "path ends at t = {} but the option matures at {}",
            path.maturity(),
            c.maturity
        )));
    }
    let k = spec.market.k;
    let dt = path.dt();
    let n = path.len();
    let mut q = c.q0;
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let t = path.t[i];
        let st = path.s[i];
        let s = observed_price(k, c.q0, st, q);
        let v = if i + 1 < n { policy.speed(t, q, st)? } else { 0.0 };
        out.push(TrajectoryPoint {
            t,
            s,
            s_tilde: st,
            q_model: q,
            q_delta: c.nominal * bachelier_delta(s, c.strike, spec.market.sigma, c.maturity - t),
            v_model: v,
        });
        q += v * dt;
    }
    Ok(out)
}
