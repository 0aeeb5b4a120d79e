//! JSON run configuration.
//!
//! Drift and interest rate are annualized in the file and converted to
//! per-day values with 252 trading days per year. Everything else is in the
//! library's units: days, shares, currency, `sigma` per square-root day.

use serde::{Deserialize, Serialize};

use liqhedge_core::pde::{GridSpec, SchemeConfig, SplittingOrder};
use liqhedge_core::sim::{PathConfig, Strategy, DEFAULT_REBALANCES};
use liqhedge_core::{
    Engine, Error, ExecutionCost, MarketParams, OptionContract, PayoffSpec, Result, Settlement, SolverSetup,
    TreeConfig, VolumeCurve,
};

pub const TRADING_DAYS: f64 = 252.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub market: MarketSection,
    pub cost: CostSection,
    pub contract: ContractSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub simulation: SimulationSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarketSection {
    pub s0: f64,
    /// Annualized drift (currency per year).
    #[serde(default)]
    pub mu: f64,
    /// Currency per square-root day.
    pub sigma: f64,
    /// Annualized rate.
    #[serde(default)]
    pub r: f64,
    #[serde(default)]
    pub k: f64,
    pub volume: VolumeSpec,
    pub rho_max: f64,
}

/// A constant daily volume or `[start_day, volume]` segments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum VolumeSpec {
    Constant(f64),
    Segments(Vec<(f64, f64)>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostSection {
    pub eta: f64,
    pub cost_exponent: f64,
    #[serde(default)]
    pub psi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContractSection {
    pub nominal: f64,
    pub strike: f64,
    pub maturity: f64,
    pub settlement: Settlement,
    pub gamma: f64,
    pub q0: f64,
    /// Participation rate of the post-maturity liquidation; `rho_max` if absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub penalty_rate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    #[serde(default = "default_engine")]
    pub engine: Engine,
    #[serde(default)]
    pub pde: PdeSection,
    #[serde(default)]
    pub tree: TreeSection,
}

fn default_engine() -> Engine {
    Engine::Pde
}

impl Default for SolverSection {
    fn default() -> Self {
        Self {
            engine: Engine::Pde,
            pde: PdeSection::default(),
            tree: TreeSection::default(),
        }
    }
}

/// Overrides of the default PDE grid.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PdeSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_s: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_q: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_t: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub order: Option<SplittingOrder>,
}

/// Overrides of the default tree discretisation.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TreeSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dq: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q_lo: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q_hi: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSection {
    #[serde(default = "default_paths")]
    pub n_paths: usize,
    #[serde(default = "default_obs")]
    pub n_obs: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_rebalances")]
    pub rebalances: Vec<usize>,
    #[serde(default = "default_strategies")]
    pub strategies: Vec<Strategy>,
    /// Per-path dump of the first paths of the policy run (`path_id,t,S,...`).
    #[serde(default)]
    pub dump_paths: usize,
}

fn default_paths() -> usize {
    10_000
}
fn default_obs() -> usize {
    253
}
fn default_seed() -> u64 {
    42
}
fn default_rebalances() -> Vec<usize> {
    DEFAULT_REBALANCES.to_vec()
}
fn default_strategies() -> Vec<Strategy> {
    vec![Strategy::Delta, Strategy::Policy]
}

impl Default for SimulationSection {
    fn default() -> Self {
        Self {
            n_paths: default_paths(),
            n_obs: default_obs(),
            seed: default_seed(),
            rebalances: default_rebalances(),
            strategies: default_strategies(),
            dump_paths: 0,
        }
    }
}

impl RunConfig {
    /// Parses and validates a configuration document.
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig =
            serde_json::from_str(text).map_err(|e| Error::invalid("config", e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    #[cfg(test)]
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    #[cfg(test)]
    pub fn reference() -> Self {
        Self {
            market: MarketSection {
                s0: 45.0,
                mu: 0.0,
                sigma: 0.6,
                r: 0.0,
                k: 0.0,
                volume: VolumeSpec::Constant(4.0e6),
                rho_max: 5.0,
            },
            cost: CostSection {
                eta: 0.1,
                cost_exponent: 0.75,
                psi: 0.0,
            },
            contract: ContractSection {
                nominal: 2.0e7,
                strike: 45.0,
                maturity: 63.0,
                settlement: Settlement::Physical,
                gamma: 2.0e-7,
                q0: 1.0e7,
                penalty_rate: None,
            },
            solver: SolverSection::default(),
            simulation: SimulationSection::default(),
        }
    }

    /// Re-checks every library-level invariant.
    pub fn validate(&self) -> Result<()> {
        let spec = self.payoff_spec()?;
        self.solver_setup(self.solver.engine, &spec, false)?;
        self.path_config()?;
        if self.simulation.rebalances.iter().any(|&m| m < 2) {
            return Err(Error::invalid("simulation.rebalances", "every entry must be >= 2"));
        }
        Ok(())
    }

    pub fn market(&self) -> Result<MarketParams> {
        let m = &self.market;
        let volume = match &m.volume {
            VolumeSpec::Constant(v) => {
                let c = VolumeCurve::constant(*v);
                c.validate()?;
                c
            }
            VolumeSpec::Segments(s) => VolumeCurve::piecewise(s)?,
        };
        let market = MarketParams {
            s0: m.s0,
            mu: m.mu / TRADING_DAYS,
            sigma: m.sigma,
            r: m.r / TRADING_DAYS,
            k: m.k,
            volume,
            rho_max: m.rho_max,
        };
        market.validate()?;
        Ok(market)
    }

    pub fn cost(&self) -> Result<ExecutionCost> {
        ExecutionCost::new(self.cost.eta, self.cost.cost_exponent, self.cost.psi)
    }

    pub fn contract(&self) -> OptionContract {
        let c = &self.contract;
        OptionContract {
            nominal: c.nominal,
            strike: c.strike,
            maturity: c.maturity,
            settlement: c.settlement,
            gamma: c.gamma,
            q0: c.q0,
            penalty_rate: c.penalty_rate.unwrap_or(self.market.rho_max),
        }
    }

    pub fn payoff_spec(&self) -> Result<PayoffSpec> {
        PayoffSpec::new(self.contract(), self.market()?, self.cost()?)
    }

    pub fn solver_setup(&self, engine: Engine, spec: &PayoffSpec, history: bool) -> Result<SolverSetup> {
        Ok(match engine {
            Engine::Pde => {
                let p = &self.solver.pde;
                let d = GridSpec::default_for(&spec.contract, &spec.market);
                let grid = GridSpec {
                    s_min: p.s_min.unwrap_or(d.s_min),
                    s_max: p.s_max.unwrap_or(d.s_max),
                    n_s: p.n_s.unwrap_or(d.n_s),
                    q_min: p.q_min.unwrap_or(d.q_min),
                    q_max: p.q_max.unwrap_or(d.q_max),
                    n_q: p.n_q.unwrap_or(d.n_q),
                    n_t: p.n_t.unwrap_or(d.n_t),
                };
                grid.validate_for(&spec.contract)?;
                let scheme = SchemeConfig {
                    order: p.order.unwrap_or(SplittingOrder::Abc),
                    store_history: history,
                };
                SolverSetup::Pde { grid, scheme }
            }
            Engine::Tree => {
                let t = &self.solver.tree;
                let d = TreeConfig::default_for(&spec.contract, &spec.market)?;
                let cfg = TreeConfig {
                    dt: t.dt.unwrap_or(d.dt),
                    alpha: t.alpha.unwrap_or(d.alpha),
                    dq: t.dq.unwrap_or(d.dq),
                    q_lo: t.q_lo.unwrap_or(d.q_lo),
                    q_hi: t.q_hi.unwrap_or(d.q_hi),
                    store_history: history,
                };
                cfg.validate(&spec.market, spec.contract.maturity)?;
                SolverSetup::Tree(cfg)
            }
        })
    }

    pub fn path_config(&self) -> Result<PathConfig> {
        let s = &self.simulation;
        let cfg = PathConfig {
            n_paths: s.n_paths,
            n_obs: s.n_obs,
            seed: s.seed,
            rebalances: s.rebalances.first().copied().unwrap_or(40),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_round_trip() {
        let cfg = RunConfig::reference();
        let text = cfg.to_json();
        let back = RunConfig::from_json(&text).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.to_json(), text);
    }

    #[test]
    fn rates_are_annualized() {
        let mut cfg = RunConfig::reference();
        cfg.market.r = 0.05;
        cfg.market.mu = 2.52;
        let m = cfg.market().unwrap();
        assert!((m.r - 0.05 / 252.0).abs() < 1e-18);
        assert!((m.mu - 0.01).abs() < 1e-15);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let mut v: serde_json::Value = serde_json::from_str(&RunConfig::reference().to_json()).unwrap();
        v["market"]["vol"] = serde_json::json!(1.0);
        assert!(RunConfig::from_json(&v.to_string()).is_err());
        let mut v: serde_json::Value = serde_json::from_str(&RunConfig::reference().to_json()).unwrap();
        v["extra"] = serde_json::json!({});
        assert!(RunConfig::from_json(&v.to_string()).is_err());
    }

    #[test]
    fn penalty_rate_follows_rho_max() {
        let mut cfg = RunConfig::reference();
        cfg.market.rho_max = 0.5;
        assert_eq!(cfg.contract().penalty_rate, 0.5);
        cfg.contract.penalty_rate = Some(0.25);
        assert_eq!(cfg.contract().penalty_rate, 0.25);
    }

    #[test]
    fn invalid_values_name_the_field() {
        let mut cfg = RunConfig::reference();
        cfg.contract.q0 = 3e7;
        let err = cfg.validate().unwrap_err();
        assert!(err.to_string().contains("q0"), "{err}");
        let mut cfg = RunConfig::reference();
        cfg.market.k = 1e-7;
        cfg.market.r = 0.05;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn volume_segments() {
        let text = RunConfig::reference()
            .to_json()
            .replace("\"volume\": 4000000.0", "\"volume\": [[0.0, 4000000.0], [10.5, 0.0], [11.0, 4000000.0]]");
        let cfg = RunConfig::from_json(&text).unwrap();
        assert!(matches!(cfg.market.volume, VolumeSpec::Segments(ref s) if s.len() == 3));
    }
}
