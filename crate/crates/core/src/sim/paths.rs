use std::io::{BufRead, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::MarketParams;

/// Independent generator for path `index` under `seed`.
pub fn path_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathConfig {
    pub n_paths: usize,
    /// Points per path including both ends.
    pub n_obs: usize,
    pub seed: u64,
    /// Rebalancing dates of the delta hedge.
    pub rebalances: usize,
}

impl Default for PathConfig {
    fn default() -> Self {
        Self {
            n_paths: 10_000,
            n_obs: 253,
            seed: 42,
            rebalances: 40,
        }
    }
}

impl PathConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_paths == 0 {
            return Err(Error::invalid("n_paths", "must be >= 1"));
        }
        if self.n_obs < 2 {
            return Err(Error::invalid("n_obs", "must be >= 2"));
        }
        if self.rebalances < 2 {
            return Err(Error::invalid("rebalances", "must be >= 2"));
        }
        Ok(())
    }
}

/// Price observations on a uniform time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PricePath {
    pub t: Vec<f64>,
    pub s: Vec<f64>,
}

impl PricePath {
    pub fn len(&self) -> usize {
        self.s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s.is_empty()
    }

    pub fn dt(&self) -> f64 {
        self.t[1] - self.t[0]
    }

    pub fn maturity(&self) -> f64 {
        *self.t.last().expect("non-empty path")
    }

    /// Reads `t,S` rows after a header; blank lines and `#` comments are skipped.
    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        let mut t = Vec::new();
        let mut s = Vec::new();
        let mut header = false;
        for (lineno, line) in input.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if !header {
                let cols: Vec<&str> = line.split(',').map(str::trim).collect();
                if cols.len() < 2 || cols[0] != "t" || cols[1] != "S" {
                    return Err(Error::Path(format!("expected header `t,S`, found `{line}`")));
                }
                header = true;
                continue;
            }
            let mut it = line.split(',').map(str::trim);
            let parse = |x: Option<&str>| -> Result<f64> {
                x.and_then(|v| v.parse::<f64>().ok())
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::Path(format!("line {}: malformed row `{line}`", lineno + 1)))
            };
            t.push(parse(it.next())?);
            s.push(parse(it.next())?);
        }
        let path = Self { t, s };
        path.validate()?;
        Ok(path)
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "t,S")?;
        for (t, s) in self.t.iter().zip(&self.s) {
            writeln!(out, "{t},{s}")?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.t.len() < 2 || self.t.len() != self.s.len() {
            return Err(Error::Path("a path needs at least two `t,S` rows".into()));
        }
        if self.t[0].abs() > 1e-12 {
            return Err(Error::Path("path must start at t = 0".into()));
        }
        let dt = self.dt();
        if !(dt > 0.0) {
            return Err(Error::Path("times must be increasing".into()));
        }
        for (i, w) in self.t.windows(2).enumerate() {
            if ((w[1] - w[0]) - dt).abs() > 1e-9 * dt.max(1.0) {
                return Err(Error::Path(format!("non-uniform time step at row {}", i + 2)));
            }
        }
        Ok(())
    }

    /// Checks that the path covers `[0, maturity]` with `steps` intervals.
    pub fn check_resolution(&self, maturity: f64, steps: usize) -> Result<()> {
        if self.len() != steps + 1 || (self.maturity() - maturity).abs() > 1e-9 * maturity {
            return Err(Error::Path(format!(
                "path has {} points up to t = {}, expected {} points up to t = {}",
                self.len(),
                self.maturity(),
                steps + 1,
                maturity
            )));
        }
        Ok(())
    }
}

/// Fills `incr` with Brownian price increments over steps of `dt`.
pub(crate) fn draw_increments<R: Rng>(rng: &mut R, mu: f64, sigma: f64, dt: f64, incr: &mut [f64]) {
    let sd = sigma * dt.sqrt();
    for x in incr.iter_mut() {
        let z: f64 = rng.sample(StandardNormal);
        *x = mu * dt + sd * z;
    }
}

/// `S_{i+1} = S_i + mu dt + sigma sqrt(dt) Z` on `n_obs` points over `[0, maturity]`.
pub fn simulate_price_paths(market: &MarketParams, maturity: f64, cfg: &PathConfig) -> Result<Vec<PricePath>> {
    cfg.validate()?;
    if !(market.sigma >= 0.0 && market.sigma.is_finite() && market.mu.is_finite()) {
        return Err(Error::invalid("sigma", "must be finite and >= 0"));
    }
    let steps = cfg.n_obs - 1;
    let dt = maturity / steps as f64;
    let t: Vec<f64> = (0..=steps).map(|i| i as f64 * dt).collect();
    Ok((0..cfg.n_paths)
        .map(|p| {
            let mut rng = path_rng(cfg.seed, p as u64);
            let mut incr = vec![0.0; steps];
            draw_increments(&mut rng, market.mu, market.sigma, dt, &mut incr);
            let mut s = Vec::with_capacity(steps + 1);
            s.push(market.s0);
            for d in incr {
                s.push(s.last().unwrap() + d);
            }
            PricePath { t: t.clone(), s }
        })
        .collect())
}

/// Average price over `[t_i, t_i + dt]` given both endpoints:
/// Gaussian with mean `(S_i + S_{i+1}) / 2` and variance `sigma^2 dt / 12`.
pub fn twap_fill<R: Rng + ?Sized>(s_i: f64, s_ip1: f64, sigma: f64, dt: f64, rng: &mut R) -> f64 {
    let z: f64 = rng.sample(StandardNormal);
    0.5 * (s_i + s_ip1) + sigma * (dt / 12.0).sqrt() * z
}

/// Walk on the trinomial tree nodes `S0 + sigma sqrt(dt) alpha p` with the
/// tree's branch probabilities.
pub fn trinomial_path(market: &MarketParams, maturity: f64, dt: f64, alpha: f64, seed: u64) -> PricePath {
    let steps = (maturity / dt).round() as usize;
    let w = 1.0 / (2.0 * alpha * alpha);
    let node = market.sigma * dt.sqrt() * alpha;
    let mut rng = path_rng(seed, 0);
    let mut p = 0i64;
    let mut t = Vec::with_capacity(steps + 1);
    let mut s = Vec::with_capacity(steps + 1);
    for j in 0..=steps {
        t.push(j as f64 * dt);
        s.push(market.s0 + market.mu * j as f64 * dt + node * p as f64);
        let u: f64 = rng.random();
        p += if u < w {
            -1
        } else if u < 1.0 - w {
            0
        } else {
            1
        };
    }
    PricePath { t, s }
}

/// Seed of the shipped scenario path.
pub const SCENARIO_SEED: u64 = 7;

/// The scenario path: a fixed-seed walk on the reference tree that finishes
/// well above the strike, so the option is exercised.
pub fn scenario_path(market: &MarketParams, strike: f64, maturity: f64) -> PricePath {
    let mut seed = SCENARIO_SEED;
    loop {
        let path = trinomial_path(market, maturity, 0.25, std::f64::consts::SQRT_2, seed);
        if *path.s.last().unwrap() >= strike + 2.0 {
            return path;
        }
        seed += 1;
    }
}
