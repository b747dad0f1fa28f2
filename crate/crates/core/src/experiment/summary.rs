//! `results.csv` rows and the Markdown ranking derived from them.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One (load, policy) cell of `results.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub experiment: String,
    pub load: f64,
    pub policy: String,
    /// Priority order for static priority (`"0>1"`), empty otherwise.
    pub order: String,
    pub mean_cost: f64,
    pub ci_half: f64,
    pub replications: usize,
    pub horizon: f64,
    pub warmup: f64,
    pub seed: u64,
    pub arrivals: u64,
    pub departures: u64,
    pub preemptions: u64,
    pub busy_fraction: f64,
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

pub(crate) fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    for r in rows {
        w.serialize(r).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_results(path: &Path) -> Result<Vec<ResultRow>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    r.deserialize().map(|row| row.map_err(csv_err)).collect()
}

/// Half-width of the difference of two independent means.
fn joint_ci(a: f64, b: f64) -> f64 {
    (a * a + b * b).sqrt()
}

fn label(r: &ResultRow) -> String {
    if r.order.is_empty() {
        r.policy.clone()
    } else {
        format!("{} ({})", r.policy, r.order)
    }
}

/// Ranks policies by mean cost at each load. A policy is marked `tied` when
/// its gap to the best is within 3 joint CI half-widths.
pub fn summarize(rows: &[ResultRow]) -> String {
    let mut by_load: BTreeMap<(String, u64), Vec<&ResultRow>> = BTreeMap::new();
    for r in rows {
        by_load.entry((r.experiment.clone(), r.load.to_bits())).or_default().push(r);
    }
    let mut out = String::new();
    let mut current = None;
    for ((exp, _), mut cell) in by_load {
        if current.as_ref() != Some(&exp) {
            let _ = writeln!(out, "# {exp}\n");
            current = Some(exp);
        }
        cell.sort_by(|a, b| a.mean_cost.total_cmp(&b.mean_cost).then_with(|| a.policy.cmp(&b.policy)));
        let best = cell[0];
        let _ = writeln!(out, "## load {}\n", best.load);
        let _ = writeln!(out, "| rank | policy | mean cost | 95% CI | vs best |");
        let _ = writeln!(out, "|---:|---|---:|---:|---|");
        for (i, r) in cell.iter().enumerate() {
            let flag = if i == 0 {
                "best"
            } else if r.mean_cost - best.mean_cost <= 3.0 * joint_ci(r.ci_half, best.ci_half) {
                "tied"
            } else {
                "worse"
            };
            let _ = writeln!(
                out,
                "| {} | {} | {:.6} | ±{:.6} | {} |",
                i + 1,
                label(r),
                r.mean_cost,
                r.ci_half,
                flag
            );
        }
        out.push('\n');
    }
    out
}

/// Wide per-figure table: one row per load, mean and CI columns per policy.
pub(crate) fn write_figure(path: &Path, rows: &[ResultRow]) -> Result<()> {
    let mut policies: Vec<&str> = Vec::new();
    for r in rows {
        if !policies.contains(&r.policy.as_str()) {
            policies.push(&r.policy);
        }
    }
    let mut loads: Vec<f64> = rows.iter().map(|r| r.load).collect();
    loads.dedup();
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    let mut header = vec!["load".to_string()];
    for p in &policies {
        header.push(format!("{p}_mean"));
        header.push(format!("{p}_ci"));
    }
    w.write_record(&header).map_err(csv_err)?;
    for load in loads {
        let mut rec = vec![load.to_string()];
        for p in &policies {
            match rows.iter().find(|r| r.load == load && r.policy == *p) {
                Some(r) => {
                    rec.push(r.mean_cost.to_string());
                    rec.push(r.ci_half.to_string());
                }
                None => rec.extend([String::new(), String::new()]),
            }
        }
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}
