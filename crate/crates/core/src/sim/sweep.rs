use crate::error::{Error, Result};
use crate::policy::IndexRule;

use super::{simulate, SimResult, SystemConfig};

/// One (load, policy) cell of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub load: f64,
    pub result: SimResult,
}

/// Rescales arrival rates so the total load is `rho`, keeping each class's
/// share of the total arrival rate.
pub fn scale_to_load(base: &SystemConfig, rho: f64) -> Result<SystemConfig> {
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::Domain(format!("load must lie in (0, 1), got {rho}")));
    }
    let total: f64 = base.classes.iter().map(|c| c.lambda).sum();
    if !(total > 0.0) {
        return Err(Error::Domain("base configuration has no arrivals to scale".into()));
    }
    let per_unit: f64 = base.classes.iter().map(|c| c.lambda / total / c.mu).sum();
    let lambda_total = rho / per_unit;
    let mut cfg = base.clone();
    for c in &mut cfg.classes {
        c.lambda = c.lambda / total * lambda_total;
    }
    Ok(cfg)
}

/// Runs every policy at every load. `build` constructs a rule for the
/// rescaled system (index rules depend on arrival rates).
pub fn load_sweep<F>(base: &SystemConfig, loads: &[f64], mut build: F) -> Result<Vec<SweepRow>>
where
    F: FnMut(&SystemConfig) -> Result<Vec<Box<dyn IndexRule>>>,
{
    let mut rows = Vec::new();
    for &rho in loads {
        let cfg = scale_to_load(base, rho)?;
        for rule in build(&cfg)? {
            rows.push(SweepRow {
                load: rho,
                result: simulate(&cfg, rule.as_ref())?,
            });
        }
    }
    Ok(rows)
}
