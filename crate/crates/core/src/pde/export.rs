use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{GridSpec, ThetaSurface};
use crate::cost::ExecutionCost;
use crate::error::Result;
use crate::model::{MarketParams, OptionContract};

/// Parameters stored next to a surface dump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurfaceSidecar {
    pub grid: GridSpec,
    pub maturity: f64,
    pub market: MarketParams,
    pub cost: ExecutionCost,
    pub gamma: f64,
    pub contract: Option<OptionContract>,
}

/// Writes `t,q,S,theta,v_star`, one row per stored node. The control at
/// maturity is reported as zero.
pub fn write_surface_csv<W: Write>(surface: &ThetaSurface, mut out: W) -> Result<()> {
    writeln!(out, "t,q,S,theta,v_star")?;
    let q = surface.q_nodes();
    let s = surface.s_nodes();
    let n_s = s.len();
    let dt = surface.dt();
    for (n, layer) in surface.values.iter().enumerate() {
        let ctl = surface.control.get(n);
        let t = n as f64 * dt;
        for (i, &qi) in q.iter().enumerate() {
            for (k, &sk) in s.iter().enumerate() {
                let idx = i * n_s + k;
                let v = ctl.map_or(0.0, |c| c[idx]);
                writeln!(out, "{t},{qi},{sk},{},{v}", layer[idx])?;
            }
        }
    }
    Ok(())
}

pub fn write_surface_sidecar<W: Write>(sidecar: &SurfaceSidecar, out: W) -> Result<()> {
    serde_json::to_writer_pretty(out, sidecar).map_err(|e| crate::error::Error::Io(e.to_string()))
}
