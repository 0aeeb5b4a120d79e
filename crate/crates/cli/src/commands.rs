use std::fs;
use std::io::{BufReader, Write};
use std::path::Path;
use std::time::Instant;

use serde_json::json;

use liqhedge_core::impact::{solve_with_impact, ImpactSolution, Solution};
use liqhedge_core::sim::{
    hedge_trajectory, run_delta_hedge_sweep, run_policy_hedge, scenario_path, write_path_dump, write_stats_csv,
    PricePath, StatsRow, Strategy,
};
use liqhedge_core::{Engine, Error, Result, Settlement, SolverSetup};

use crate::config::RunConfig;
use crate::output::{config_hash, open, trailer};
use crate::{Common, Format};

/// Loads the config and applies command-line overrides.
fn load(common: &Common) -> Result<(RunConfig, Engine)> {
    let text = fs::read_to_string(&common.config)
        .map_err(|e| Error::Io(format!("{}: {e}", common.config.display())))?;
    let mut cfg = RunConfig::from_json(&text)?;
    if let Some(seed) = common.seed {
        cfg.simulation.seed = seed;
    }
    if let Some(engine) = common.engine {
        cfg.solver.engine = engine.into();
    }
    cfg.validate()?;
    let engine = cfg.solver.engine;
    Ok((cfg, engine))
}

fn engine_name(e: Engine) -> &'static str {
    match e {
        Engine::Pde => "pde",
        Engine::Tree => "tree",
    }
}

fn diagnostics(setup: &SolverSetup, sol: &ImpactSolution) -> serde_json::Value {
    match (setup, &sol.solution) {
        (SolverSetup::Pde { grid, scheme }, Solution::Pde(surface)) => json!({
            "n_s": grid.n_s,
            "n_q": grid.n_q,
            "n_t": grid.n_t,
            "ds": grid.ds(),
            "dq": grid.dq(),
            "splitting": scheme.order,
            "max_substeps": surface.diagnostics().max_substeps,
            "total_substeps": surface.diagnostics().total_substeps,
        }),
        (SolverSetup::Tree(cfg), Solution::Tree(tree)) => json!({
            "dt": cfg.dt,
            "alpha": cfg.alpha,
            "dq": cfg.dq,
            "levels": tree.steps(),
            "n_q": tree.q_nodes().len(),
        }),
        _ => json!({}),
    }
}

fn solve(cfg: &RunConfig, engine: Engine, history: bool) -> Result<(SolverSetup, ImpactSolution, f64)> {
    let spec = cfg.payoff_spec()?;
    let setup = cfg.solver_setup(engine, &spec, history)?;
    let start = Instant::now();
    let sol = solve_with_impact(&spec, &setup)?;
    Ok((setup, sol, start.elapsed().as_secs_f64()))
}

pub fn price(common: &Common) -> Result<()> {
    let (cfg, engine) = load(common)?;
    let hash = config_hash(&cfg);
    let seed = cfg.simulation.seed;
    let (setup, sol, wall) = solve(&cfg, engine, false)?;
    let mut out = open(common.out.as_deref())?;
    match common.format {
        Format::Json => {
            let report = json!({
                "engine": engine_name(engine),
                "price_per_share": sol.price_per_share(),
                "price": sol.price,
                "nominal": sol.nominal,
                "q0": sol.q0,
                "wall_time_s": wall,
                "diagnostics": diagnostics(&setup, &sol),
                "version": env!("CARGO_PKG_VERSION"),
                "seed": seed,
                "config_hash": hash,
            });
            writeln!(out, "{}", serde_json::to_string_pretty(&report).expect("serializable"))?;
        }
        Format::Csv => {
            writeln!(out, "engine,price_per_share,price,wall_time_s")?;
            writeln!(out, "{},{},{},{}", engine_name(engine), sol.price_per_share(), sol.price, wall)?;
            writeln!(out, "{}", trailer(seed, &hash))?;
        }
    }
    out.flush()?;
    Ok(())
}

fn policy_steps(setup: &SolverSetup, maturity: f64) -> usize {
    match setup {
        SolverSetup::Pde { grid, .. } => grid.n_t,
        SolverSetup::Tree(cfg) => cfg.steps(maturity),
    }
}

pub fn hedge(common: &Common, path: Option<&Path>) -> Result<()> {
    let (cfg, engine) = load(common)?;
    let hash = config_hash(&cfg);
    let spec = cfg.payoff_spec()?;
    let setup = cfg.solver_setup(engine, &spec, true)?;
    let maturity = spec.contract.maturity;
    let path = match path {
        Some(p) => {
            let file = fs::File::open(p).map_err(|e| Error::Io(format!("{}: {e}", p.display())))?;
            PricePath::read_csv(BufReader::new(file))?
        }
        None => scenario_path(&spec.market, spec.contract.strike, maturity),
    };
    path.check_resolution(maturity, policy_steps(&setup, maturity))?;
    let sol = solve_with_impact(&spec, &setup)?;
    let traj = hedge_trajectory(&spec, &sol.solution, &path)?;
    let impact = spec.market.k != 0.0;
    let mut out = open(common.out.as_deref())?;
    match common.format {
        Format::Json => {
            let rows: Vec<_> = traj
                .iter()
                .map(|p| {
                    json!({"t": p.t, "S": p.s, "S_tilde": p.s_tilde, "q_model": p.q_model,
                           "q_bachelier_delta": p.q_delta, "v_model": p.v_model})
                })
                .collect();
            writeln!(out, "{}", serde_json::to_string_pretty(&rows).expect("serializable"))?;
        }
        Format::Csv => {
            write!(out, "t,S,q_model,q_bachelier_delta,v_model")?;
            writeln!(out, "{}", if impact { ",S_tilde" } else { "" })?;
            for p in &traj {
                write!(out, "{},{},{},{},{}", p.t, p.s, p.q_model, p.q_delta, p.v_model)?;
                if impact {
                    write!(out, ",{}", p.s_tilde)?;
                }
                writeln!(out)?;
            }
            writeln!(out, "{}", trailer(cfg.simulation.seed, &hash))?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn simulate(common: &Common) -> Result<()> {
    let (cfg, engine) = load(common)?;
    let hash = config_hash(&cfg);
    let spec = cfg.payoff_spec()?;
    let paths = cfg.path_config()?;
    let seed = paths.seed;
    let mut rows = Vec::new();
    let strategies = &cfg.simulation.strategies;
    if strategies.contains(&Strategy::Delta) {
        let ms = &cfg.simulation.rebalances;
        for (m, stats) in ms.iter().zip(run_delta_hedge_sweep(&spec, &paths, ms)?) {
            rows.push(StatsRow {
                strategy: Strategy::Delta,
                rebalances: *m,
                stats,
                seed,
            });
        }
    }
    if strategies.contains(&Strategy::Policy) {
        let (_, sol, _) = solve(&cfg, engine, true)?;
        let stats = run_policy_hedge(&spec, &sol.solution, &paths)?;
        if cfg.simulation.dump_paths > 0 {
            match &common.out {
                Some(p) => {
                    let dump = p.with_extension("paths.csv");
                    let mut w = open(Some(&dump))?;
                    write_path_dump(&spec, &sol.solution, &paths, cfg.simulation.dump_paths, &mut w)?;
                    writeln!(w, "{}", trailer(seed, &hash))?;
                    w.flush()?;
                }
                None => eprintln!("liqhedge: dump_paths needs --out; per-path dump skipped"),
            }
        }
        rows.push(StatsRow {
            strategy: Strategy::Policy,
            rebalances: paths.n_obs - 1,
            stats,
            seed,
        });
    }
    let mut out = open(common.out.as_deref())?;
    match common.format {
        Format::Json => {
            writeln!(out, "{}", serde_json::to_string_pretty(&rows).expect("serializable"))?;
        }
        Format::Csv => {
            write_stats_csv(&rows, &mut out)?;
            writeln!(out, "{}", trailer(seed, &hash))?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Applies `param = value` to a copy of the configuration.
pub fn with_param(cfg: &RunConfig, param: &str, value: &str) -> Result<RunConfig> {
    let mut c = cfg.clone();
    let num = || -> Result<f64> {
        value
            .trim()
            .parse::<f64>()
            .map_err(|_| Error::invalid("values", format!("`{value}` is not a number")))
    };
    match param {
        "eta" => c.cost.eta = num()?,
        "gamma" => c.contract.gamma = num()?,
        "q0" => c.contract.q0 = num()?,
        "rho_max" => c.market.rho_max = num()?,
        "r" => c.market.r = num()?,
        "mu" => c.market.mu = num()?,
        "k" => c.market.k = num()?,
        "settlement" => {
            c.contract.settlement = match value.trim() {
                "physical" => Settlement::Physical,
                "cash" => Settlement::Cash,
                other => return Err(Error::invalid("values", format!("unknown settlement `{other}`"))),
            }
        }
        other => {
            return Err(Error::invalid(
                "param",
                format!("unknown parameter `{other}`; expected eta, gamma, q0, rho_max, r, mu, k or settlement"),
            ))
        }
    }
    c.validate()?;
    Ok(c)
}

pub fn sweep(common: &Common, param: &str, values: &[String]) -> Result<()> {
    let (cfg, engine) = load(common)?;
    if values.is_empty() {
        return Err(Error::invalid("values", "at least one value is required"));
    }
    let variants: Vec<RunConfig> = values
        .iter()
        .map(|v| with_param(&cfg, param, v))
        .collect::<Result<_>>()?;
    let hash = config_hash(&cfg);
    let mut prices = Vec::with_capacity(values.len());
    for v in &variants {
        let (_, sol, _) = solve(v, engine, false)?;
        prices.push(sol.price_per_share());
    }
    let mut out = open(common.out.as_deref())?;
    match common.format {
        Format::Json => {
            let rows: Vec<_> = values
                .iter()
                .zip(&prices)
                .map(|(v, p)| json!({"param": param, "value": v.trim(), "price_per_share": p}))
                .collect();
            writeln!(out, "{}", serde_json::to_string_pretty(&rows).expect("serializable"))?;
        }
        Format::Csv => {
            writeln!(out, "param,value,price_per_share")?;
            for (v, p) in values.iter().zip(&prices) {
                writeln!(out, "{param},{},{p}", v.trim())?;
            }
            writeln!(out, "{}", trailer(cfg.simulation.seed, &hash))?;
        }
    }
    out.flush()?;
    Ok(())
}
