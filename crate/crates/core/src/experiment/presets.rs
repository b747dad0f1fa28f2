//! Built-in experiment specs. The figure presets fix the rates given with
//! each figure; cost heights and deadlines are chosen to give the shapes
//! described there.

use crate::cost::CostFunction;
use crate::policy::{ClassConfig, PolicySpec};

use super::{BanditSpec, BridgeSpec, ExperimentSpec, Suite, SystemSpec};

pub const PRESETS: &[&str] = &["fig7", "fig8", "fig9", "fig10", "counterexample", "sanity"];

const FIGURE_LOADS: [f64; 5] = [0.3, 0.5, 0.7, 0.8, 0.9];

fn class(share: f64, mu: f64, cost: CostFunction) -> ClassConfig {
    ClassConfig::new(share, mu, cost).expect("preset class is valid")
}

fn step(h: f64, d: f64) -> CostFunction {
    CostFunction::smoothed_step(h, d, 0.02).expect("preset cost is valid")
}

fn poly(coeffs: &[f64]) -> CostFunction {
    CostFunction::polynomial(coeffs.to_vec()).expect("preset cost is valid")
}

fn comparison() -> Vec<PolicySpec> {
    ["whittle", "aalto", "gen_cmu", "fcfs", "static_priority"]
        .into_iter()
        .map(PolicySpec::named)
        .collect()
}

fn spec(name: &str, figure: Option<u32>, loads: &[f64], policies: Vec<PolicySpec>, classes: Vec<ClassConfig>) -> ExperimentSpec {
    ExperimentSpec {
        name: name.into(),
        figure,
        loads: loads.to_vec(),
        policies,
        suites: vec![Suite::Sweep],
        out: None,
        system: SystemSpec {
            horizon: 20_000.0,
            warmup: None,
            replications: 10,
            seed: 0,
            decision_quantum: None,
        },
        classes,
        bandit: BanditSpec::default(),
        bridge: BridgeSpec::default(),
    }
}

pub fn preset(name: &str) -> Option<ExperimentSpec> {
    let s = match name {
        // Short jobs pay a large penalty after a deadline, long jobs a low constant rate.
        "fig7" => spec(
            name,
            Some(7),
            &FIGURE_LOADS,
            comparison(),
            vec![class(0.9, 3.0, step(10.0, 2.0)), class(0.1, 1.0, CostFunction::constant(1.0).unwrap())],
        ),
        // Short jobs: high penalty after a late deadline. Long jobs: low penalty after an early one.
        "fig8" => spec(
            name,
            Some(8),
            &FIGURE_LOADS,
            comparison(),
            vec![class(0.5, 3.0, step(10.0, 3.0)), class(0.5, 1.0, step(1.0, 1.0))],
        ),
        // Linear cost for short jobs, quadratic for long ones, equal loads.
        "fig9" => spec(
            name,
            Some(9),
            &FIGURE_LOADS,
            comparison(),
            vec![class(0.75, 3.0, poly(&[0.0, 1.0])), class(0.25, 1.0, poly(&[0.0, 0.0, 1.0]))],
        ),
        // Two crossing linear costs on short jobs, a steep quadratic on long jobs.
        "fig10" => spec(
            name,
            Some(10),
            &FIGURE_LOADS,
            comparison(),
            vec![
                class(1.0, 3.0, poly(&[2.0, 0.5])),
                class(1.0, 3.0, poly(&[1.0, 2.0])),
                class(1.0, 1.0, poly(&[0.0, 0.0, 1.0])),
            ],
        ),
        // Identical linear costs and sizes, unequal arrival rates.
        "counterexample" => spec(
            name,
            None,
            &[0.5, 0.7, 0.9],
            vec![PolicySpec::named("whittle"), PolicySpec::named("fcfs")],
            vec![class(0.8, 1.0, poly(&[0.0, 1.0])), class(0.2, 1.0, poly(&[0.0, 1.0]))],
        ),
        "sanity" => {
            let mut s = spec(
                name,
                None,
                &[],
                vec![PolicySpec::named("fcfs")],
                vec![class(0.5, 1.0, CostFunction::constant(1.0).unwrap())],
            );
            s.suites = vec![Suite::Sanity];
            s.system.horizon = 1e6;
            s
        }
        _ => return None,
    };
    Some(s)
}
