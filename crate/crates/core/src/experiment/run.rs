use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use crate::bandit::{indexability_scan, whittle_fd_check, BanditEnv, McOptions};
use crate::bridge::coupled_equivalence;
use crate::cost::CostFunction;
use crate::error::{Error, Result};
use crate::policy::{default_grid, verify_monotone, ClassConfig, IndexRule, PolicyRegistry, PolicySpec};
use crate::sim::{simulate, SimResult, SystemConfig};

use super::summary::{summarize, write_figure, write_rows, ResultRow};
use super::{ExperimentSpec, Suite};

/// A problem found by [`validate`], located by its path in the spec.
#[derive(Debug, Clone, PartialEq)]
pub struct Issue {
    pub path: String,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub issues: Vec<Issue>,
}

impl ValidationReport {
    pub fn ok(&self) -> bool {
        self.issues.is_empty()
    }

    fn push(&mut self, path: impl Into<String>, message: impl ToString) {
        self.issues.push(Issue {
            path: path.into(),
            message: message.to_string(),
        });
    }
}

/// Pass/fail line for one check inside a suite.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckOutcome {
    pub suite: String,
    pub check: String,
    pub pass: bool,
    pub detail: String,
}

impl CheckOutcome {
    fn new(suite: Suite, check: impl Into<String>, pass: bool, detail: impl Into<String>) -> Self {
        Self {
            suite: suite.name().into(),
            check: check.into(),
            pass,
            detail: detail.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub out_dir: PathBuf,
    pub rows: Vec<ResultRow>,
    pub checks: Vec<CheckOutcome>,
}

impl RunReport {
    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

fn per_class_loads(classes: &[ClassConfig]) -> String {
    classes
        .iter()
        .enumerate()
        .map(|(i, c)| format!("class {i}: {:.4}", c.load()))
        .collect::<Vec<_>>()
        .join(", ")
}

/// Every rule a policy entry stands for at one system. A static priority
/// entry without an order expands to all orders.
fn expand(registry: &PolicyRegistry, p: &PolicySpec, classes: &[ClassConfig]) -> Result<Vec<(String, Box<dyn IndexRule>)>> {
    if p.name == "static_priority" && p.params.order.is_none() {
        return permutations(classes.len())
            .into_iter()
            .map(|order| {
                let label = order.iter().map(usize::to_string).collect::<Vec<_>>().join(">");
                Ok((label, registry.build(&PolicySpec::static_priority(order), classes)?))
            })
            .collect();
    }
    let label = p
        .params
        .order
        .as_ref()
        .map(|o| o.iter().map(usize::to_string).collect::<Vec<_>>().join(">"))
        .unwrap_or_default();
    Ok(vec![(label, registry.build(p, classes)?)])
}

fn permutations(k: usize) -> Vec<Vec<usize>> {
    fn go(prefix: &mut Vec<usize>, k: usize, out: &mut Vec<Vec<usize>>) {
        if prefix.len() == k {
            out.push(prefix.clone());
            return;
        }
        for i in 0..k {
            if !prefix.contains(&i) {
                prefix.push(i);
                go(prefix, k, out);
                prefix.pop();
            }
        }
    }
    let mut out = Vec::new();
    go(&mut Vec::new(), k, &mut out);
    out
}

/// Dry run: schema, stability, cost growth and index monotonicity for every
/// policy at every load. Problems are collected, not fatal.
pub fn validate(spec: &ExperimentSpec) -> ValidationReport {
    validate_with(spec, &PolicyRegistry::with_builtins())
}

fn validate_with(spec: &ExperimentSpec, registry: &PolicyRegistry) -> ValidationReport {
    let mut rep = ValidationReport::default();
    if spec.name.trim().is_empty() {
        rep.push("name", "must not be empty");
    }
    if spec.policies.is_empty() {
        rep.push("policies", "at least one policy is required");
    }
    if spec.suites.is_empty() {
        rep.push("suites", "at least one suite is required");
    }
    if spec.classes.is_empty() {
        rep.push("classes", "at least one class is required");
        return rep;
    }
    for (i, c) in spec.classes.iter().enumerate() {
        if let Err(e) = c.validate() {
            rep.push(format!("classes[{i}]"), e);
        }
    }
    for (i, p) in spec.policies.iter().enumerate() {
        if !registry.contains(&p.name) {
            rep.push(format!("policies[{i}].name"), Error::UnknownPolicy(p.name.clone()));
        }
    }
    for (i, &rho) in spec.loads.iter().enumerate() {
        if !(rho > 0.0 && rho < 1.0) {
            rep.push(
                format!("loads[{i}]"),
                Error::Unstable(format!("load {rho} must lie in (0, 1)")),
            );
        }
    }
    if !rep.ok() {
        return rep;
    }
    let systems = match spec.systems() {
        Ok(s) => s,
        Err(e) => {
            rep.push("loads", e);
            return rep;
        }
    };
    for (li, (rho, cfg)) in systems.iter().enumerate() {
        let at = if spec.loads.is_empty() {
            "classes".to_string()
        } else {
            format!("loads[{li}]")
        };
        if let Err(e) = cfg.validate() {
            let msg = match e {
                Error::Unstable(m) => format!("unstable: {m} ({})", per_class_loads(&cfg.classes)),
                other => other.to_string(),
            };
            rep.push(at, msg);
            continue;
        }
        for (ci, c) in cfg.classes.iter().enumerate() {
            if let Err(e) = c.check_growth() {
                rep.push(format!("classes[{ci}].cost"), format!("at load {rho}: {e}"));
            }
        }
        let grid = default_grid(&cfg.classes);
        for (pi, p) in spec.policies.iter().enumerate() {
            match expand(registry, p, &cfg.classes) {
                Ok(rules) => {
                    for (_, rule) in rules {
                        if let Err(e) = verify_monotone(rule.as_ref(), &grid) {
                            rep.push(format!("policies[{pi}]"), format!("at load {rho}: {e}"));
                        }
                    }
                }
                Err(e) => rep.push(format!("policies[{pi}]"), format!("at load {rho}: {e}")),
            }
        }
    }
    let b = &spec.bandit;
    if spec.suites.contains(&Suite::BanditChecks) {
        if !(b.alpha > 0.0) {
            rep.push("bandit.alpha", "must be > 0");
        }
        if !(b.t0 > 0.0 && b.t0.is_finite()) {
            rep.push("bandit.t0", "must be > 0");
        }
        if !(b.grid_max > 0.0) || b.grid_points < 2 {
            rep.push("bandit", "grid needs grid_max > 0 and at least 2 points");
        }
        if !(b.fd_delta > 0.0) || b.fd_reps < 2 {
            rep.push("bandit", "finite difference needs fd_delta > 0 and fd_reps >= 2");
        }
    }
    if spec.suites.contains(&Suite::BridgeChecks) {
        if !registry.contains(&spec.bridge.policy) {
            rep.push("bridge.policy", Error::UnknownPolicy(spec.bridge.policy.clone()));
        }
        if spec.bridge.replications == 0 {
            rep.push("bridge.replications", "must be >= 1");
        }
        if let Some(rho) = spec.bridge.load {
            if !(rho > 0.0 && rho < 1.0) {
                rep.push("bridge.load", Error::Unstable(format!("load {rho} must lie in (0, 1)")));
            }
        }
    }
    rep
}

/// Validates `spec`, then runs its suites and writes artifacts to
/// `spec.output_dir()`. A failing suite is recorded and the rest still run.
pub fn run(spec: &ExperimentSpec) -> Result<RunReport> {
    let registry = PolicyRegistry::with_builtins();
    let v = validate_with(spec, &registry);
    if let Some(first) = v.issues.first() {
        return Err(Error::config(first.path.clone(), first.message.clone()));
    }
    let out_dir = spec.output_dir();
    std::fs::create_dir_all(&out_dir)?;
    let mut rows = Vec::new();
    let mut checks = Vec::new();
    for &suite in &spec.suites {
        let result = match suite {
            Suite::Sweep => sweep(spec, &registry, &out_dir).map(|r| {
                let n = r.len();
                rows = r;
                vec![CheckOutcome::new(suite, "simulate", true, format!("{n} rows"))]
            }),
            Suite::BanditChecks => bandit_checks(spec, &out_dir),
            Suite::BridgeChecks => bridge_checks(spec, &registry, &out_dir),
            Suite::Sanity => sanity(spec, &out_dir),
        };
        match result {
            Ok(mut c) => checks.append(&mut c),
            Err(e) => checks.push(CheckOutcome::new(suite, "run", false, e.to_string())),
        }
    }
    let mut md = format!("# {} checks\n\n| suite | check | result | detail |\n|---|---|---|---|\n", spec.name);
    for c in &checks {
        let _ = writeln!(
            md,
            "| {} | {} | {} | {} |",
            c.suite,
            c.check,
            if c.pass { "pass" } else { "FAIL" },
            c.detail
        );
    }
    std::fs::write(out_dir.join("checks.md"), md)?;
    Ok(RunReport { out_dir, rows, checks })
}

fn sweep(spec: &ExperimentSpec, registry: &PolicyRegistry, out_dir: &Path) -> Result<Vec<ResultRow>> {
    let systems = spec.systems()?;
    let mut cells = Vec::new();
    for (load, cfg) in &systems {
        for p in &spec.policies {
            cells.push((*load, cfg, p, expand(registry, p, &cfg.classes)?));
        }
    }
    let cells = cells
        .par_iter()
        .map(|(load, cfg, p, rules)| {
            let mut best: Option<(String, SimResult)> = None;
            for (label, rule) in rules {
                let r = simulate(cfg, rule.as_ref())?;
                if best.as_ref().map_or(true, |(_, b)| r.mean_cost < b.mean_cost) {
                    best = Some((label.clone(), r));
                }
            }
            let (order, r) = best.expect("every policy entry expands to at least one rule");
            let reps: Vec<ReplicationRow> = r
                .replications
                .iter()
                .enumerate()
                .map(|(i, rep)| ReplicationRow {
                    load: *load,
                    policy: p.name.clone(),
                    replication: i,
                    mean_cost: rep.mean_cost,
                    ci_half: r.ci_half,
                    arrivals: rep.arrivals,
                    departures: rep.departures,
                    busy_fraction: rep.busy_fraction,
                })
                .collect();
            let row = ResultRow {
                experiment: spec.name.clone(),
                load: *load,
                policy: p.name.clone(),
                order,
                mean_cost: r.mean_cost,
                ci_half: r.ci_half,
                replications: cfg.replications,
                horizon: cfg.horizon,
                warmup: cfg.warmup,
                seed: cfg.seed,
                arrivals: r.arrivals,
                departures: r.departures,
                preemptions: r.preemptions,
                busy_fraction: r.busy_fraction,
            };
            Ok((row, reps))
        })
        .collect::<Result<Vec<_>>>()?;
    let (rows, reps): (Vec<ResultRow>, Vec<Vec<ReplicationRow>>) = cells.into_iter().unzip();
    write_rows(&out_dir.join("results.csv"), &rows)?;
    write_rows(&out_dir.join("replications.csv"), &reps.into_iter().flatten().collect::<Vec<_>>())?;
    std::fs::write(out_dir.join("summary.md"), summarize(&rows))?;
    if let Some(n) = spec.figure {
        write_figure(&out_dir.join(format!("fig{n}_data.csv")), &rows)?;
    }
    Ok(rows)
}

#[derive(Debug, Serialize)]
struct ReplicationRow {
    load: f64,
    policy: String,
    replication: usize,
    mean_cost: f64,
    ci_half: f64,
    arrivals: u64,
    departures: u64,
    busy_fraction: f64,
}

#[derive(Debug, Serialize)]
struct BanditRow {
    t: f64,
    whittle: f64,
    cost_bar: f64,
    gamma_fn: f64,
    hjb_margin_sign_ok: bool,
}

fn bandit_checks(spec: &ExperimentSpec, out_dir: &Path) -> Result<Vec<CheckOutcome>> {
    let b = &spec.bandit;
    let (_, cfg) = spec.systems()?.into_iter().next().expect("at least one system");
    let grid: Vec<f64> = (0..b.grid_points)
        .map(|k| b.grid_max * k as f64 / (b.grid_points - 1) as f64)
        .collect();
    let mut out = Vec::new();
    for (i, c) in cfg.classes.iter().enumerate() {
        let env = BanditEnv::new(c.lambda, c.mu, b.alpha, c.cost.clone())?;
        let tol = env.hjb_tolerance(b.t0)?;
        let mut rows = Vec::with_capacity(grid.len());
        for &t in &grid {
            let m = env.hjb_margin(t, b.t0)?;
            let ok = if t < b.t0 {
                m <= tol
            } else if t > b.t0 {
                m >= -tol
            } else {
                m.abs() <= tol
            };
            rows.push(BanditRow {
                t,
                whittle: env.whittle_discounted(t)?,
                cost_bar: env.cost_bar(t)?,
                gamma_fn: env.gamma_fn(t)?,
                hjb_margin_sign_ok: ok,
            });
        }
        write_rows(&out_dir.join(format!("bandit_class{i}.csv")), &rows)?;
        let bad = rows.iter().filter(|r| !r.hjb_margin_sign_ok).count();
        out.push(CheckOutcome::new(
            Suite::BanditChecks,
            format!("class {i} hjb sign pattern"),
            bad == 0,
            format!("{bad} of {} grid points violate the sign pattern", rows.len()),
        ));
        let scan = indexability_scan(&env, &grid[1..])?;
        out.push(CheckOutcome::new(
            Suite::BanditChecks,
            format!("class {i} index monotone"),
            scan.pass(),
            format!("{} decreases on {} points", scan.violations.len(), scan.points),
        ));
        let fd = whittle_fd_check(&env, b.t0, b.fd_delta, None, McOptions::new(b.fd_reps, spec.system.seed))?;
        out.push(CheckOutcome::new(
            Suite::BanditChecks,
            format!("class {i} index stationarity"),
            fd.within(3.0),
            format!("residual {:.4e} ± {:.4e} (closed form {:.4e})", fd.residual, fd.se, fd.exact),
        ));
    }
    Ok(out)
}

#[derive(Debug, Serialize)]
struct BridgeRow {
    replication: u64,
    events: u64,
    max_gap: f64,
    queue_cost: f64,
    rmab_cost: f64,
    pass: bool,
}

fn bridge_checks(spec: &ExperimentSpec, registry: &PolicyRegistry, out_dir: &Path) -> Result<Vec<CheckOutcome>> {
    let br = &spec.bridge;
    let cfg = match br.load {
        Some(rho) => crate::sim::scale_to_load(&spec.template(), rho)?,
        None => spec.systems()?.into_iter().next().expect("at least one system").1,
    };
    let rule = registry.build(&PolicySpec::named(&br.policy), &cfg.classes)?;
    let traces = (0..br.replications as u64)
        .into_par_iter()
        .map(|rep| {
            let tr = coupled_equivalence(&cfg, rule.as_ref(), rep, br.max_events, rep == 0)?;
            let row = BridgeRow {
                replication: rep,
                events: tr.events,
                max_gap: tr.max_gap,
                queue_cost: tr.queue.mean_cost,
                rmab_cost: tr.rmab.mean_cost,
                pass: tr.pass(),
            };
            Ok((row, tr))
        })
        .collect::<Result<Vec<_>>>()?;
    let trace: Vec<TraceCsvRow> = traces[0]
        .1
        .rows
        .iter()
        .map(|r| TraceCsvRow {
            t: r.time,
            class: r.class,
            queue_age: r.queue_age,
            arm_state: r.arm_state,
        })
        .collect();
    write_rows(&out_dir.join("bridge_trace.csv"), &trace)?;
    let divergence = traces
        .iter()
        .find_map(|(row, tr)| tr.first_divergence.as_ref().map(|d| (row.replication, d.clone())));
    let rows: Vec<BridgeRow> = traces.into_iter().map(|(r, _)| r).collect();
    write_rows(&out_dir.join("bridge.csv"), &rows)?;
    let worst = rows.iter().map(|r| r.max_gap).fold(0.0, f64::max);
    let mut detail = format!("{} replications, max |A - T| = {worst:e}", rows.len());
    if let Some((rep, d)) = divergence {
        let _ = write!(
            detail,
            "; replication {rep} diverged at event {} (t={}, class {}): {}",
            d.event, d.time, d.class, d.message
        );
    }
    Ok(vec![CheckOutcome::new(
        Suite::BridgeChecks,
        "trajectory coupling",
        rows.iter().all(|r| r.pass),
        detail,
    )])
}

#[derive(Debug, Serialize)]
struct TraceCsvRow {
    t: f64,
    class: usize,
    queue_age: f64,
    arm_state: f64,
}

#[derive(Debug, Serialize)]
struct SanityRow {
    mean_cost: f64,
    ci_half: f64,
    expected: f64,
    rel_err: f64,
    pass: bool,
}

/// M/M/1 with unit holding cost at load 1/2: the mean cost is the mean
/// number in system, `rho / (1 - rho) = 1`.
fn sanity(spec: &ExperimentSpec, out_dir: &Path) -> Result<Vec<CheckOutcome>> {
    let class = ClassConfig::new(0.5, 1.0, CostFunction::constant(1.0)?)?;
    let mut cfg = SystemConfig::new(vec![class], spec.system.horizon);
    cfg.replications = spec.system.replications;
    cfg.seed = spec.system.seed;
    let r = simulate(&cfg, &crate::policy::Fcfs::new(1))?;
    let expected = 1.0;
    let rel_err = (r.mean_cost - expected).abs() / expected;
    let row = SanityRow {
        mean_cost: r.mean_cost,
        ci_half: r.ci_half,
        expected,
        rel_err,
        pass: rel_err <= 0.05,
    };
    let pass = row.pass;
    write_rows(&out_dir.join("sanity.csv"), &[row])?;
    Ok(vec![CheckOutcome::new(
        Suite::Sanity,
        "mm1 mean cost",
        pass,
        format!("{:.5} ± {:.5} vs {expected} (rel err {:.3}%)", r.mean_cost, r.ci_half, 100.0 * rel_err),
    )])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::preset;

    #[test]
    fn permutations_cover_all_orders() {
        assert_eq!(permutations(1), vec![vec![0]]);
        let p3 = permutations(3);
        assert_eq!(p3.len(), 6);
        assert_eq!(p3[0], vec![0, 1, 2]);
        assert_eq!(p3[5], vec![2, 1, 0]);
    }

    #[test]
    fn fig7_preset_validates() {
        assert!(validate(&preset("fig7").unwrap()).ok());
    }

    #[test]
    fn empty_policy_list_is_rejected() {
        let mut s = preset("fig9").unwrap();
        s.policies.clear();
        let v = validate(&s);
        assert_eq!(v.issues[0].path, "policies");
        assert!(matches!(run(&s), Err(Error::Config { .. })));
    }

    #[test]
    fn full_load_is_named_unstable() {
        let mut s = preset("fig9").unwrap();
        s.loads = vec![0.5, 1.0];
        let v = validate(&s);
        assert_eq!(v.issues.len(), 1);
        assert_eq!(v.issues[0].path, "loads[1]");
        assert!(v.issues[0].message.contains("unstable"));

        let mut s = preset("sanity").unwrap();
        s.classes[0].lambda = 1.0;
        let v = validate(&s);
        assert!(v.issues[0].message.contains("class 0: 1.0000"), "{v:?}");
    }

    #[test]
    fn fast_exponential_growth_fails_growth_check() {
        let mut s = preset("sanity").unwrap();
        s.classes[0].cost = CostFunction::exponential(1.0, 0.6).unwrap();
        let v = validate(&s);
        assert_eq!(v.issues.len(), 1, "{v:?}");
        assert_eq!(v.issues[0].path, "classes[0].cost");
        s.classes[0].cost = CostFunction::exponential(1.0, 0.4).unwrap();
        assert!(validate(&s).ok());
    }
}
