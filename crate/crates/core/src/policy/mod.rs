//! Index policies: each class gets a nondecreasing index function of the age
//! of its oldest job, and the scheduler serves the class with the largest
//! index (ties go to the earliest arrival, then the lowest class id).

mod registry;
mod rules;
mod table;

use serde::{Deserialize, Serialize};

use crate::cost::{growth_check, CostFunction};
use crate::error::{Error, Result};

pub use registry::{Factory, PolicyParams, PolicyRegistry, PolicySpec};
pub use rules::{AccumulatedPriority, Aalto, Fcfs, GenCMu, StaticPriority, Whittle, PRIORITY_SEPARATION};
pub use table::TabulatedIndex;

/// One job class: Poisson arrivals at rate `lambda`, exponential sizes with
/// rate `mu`, and holding cost `cost` as a function of age.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassConfig {
    pub lambda: f64,
    pub mu: f64,
    pub cost: CostFunction,
}

impl ClassConfig {
    pub fn new(lambda: f64, mu: f64, cost: CostFunction) -> Result<Self> {
        let c = ClassConfig { lambda, mu, cost };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::Domain(format!("arrival rate must be >= 0, got {}", self.lambda)));
        }
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            return Err(Error::Domain(format!("service rate must be > 0, got {}", self.mu)));
        }
        Ok(())
    }

    pub fn load(&self) -> f64 {
        self.lambda / self.mu
    }

    /// Per-class stability plus the growth condition on the cost curve.
    pub fn check_growth(&self) -> Result<()> {
        let v = growth_check(&self.cost, self.lambda, self.mu)?;
        if v.pass {
            Ok(())
        } else {
            Err(Error::Domain(v.note))
        }
    }
}

/// A set of per-class index functions `V_i(age)`.
pub trait IndexRule: Send + Sync + std::fmt::Debug {
    fn name(&self) -> &str;

    fn num_classes(&self) -> usize;

    /// `V_class(age)` as used by the scheduler; may be tabulated.
    fn index(&self, class: usize, age: f64) -> f64;

    /// Whether the preferred class can change between arrivals and
    /// departures, so the scheduler must also re-decide on a time grid.
    fn needs_ticks(&self) -> bool {
        true
    }

    /// `V_class(age)` without any tabulation.
    fn exact_index(&self, class: usize, age: f64) -> Result<f64> {
        Ok(self.index(class, age))
    }
}

/// Evenly spaced age grid on `[0, t_max]` with `n` points.
pub fn age_grid(t_max: f64, n: usize) -> Vec<f64> {
    let n = n.max(2);
    (0..n).map(|i| t_max * i as f64 / (n - 1) as f64).collect()
}

/// A grid that covers every cost feature and several mean excess times.
pub fn default_grid(classes: &[ClassConfig]) -> Vec<f64> {
    let mut t_max: f64 = 1.0;
    for c in classes {
        t_max = t_max.max(2.0 * c.cost.feature_scale());
        let theta = c.mu - c.lambda;
        if theta > 0.0 {
            t_max = t_max.max(5.0 / theta);
        }
    }
    age_grid(t_max, 2001)
}

/// Checks that every class's index is nondecreasing on `grid`.
pub fn verify_monotone(rule: &dyn IndexRule, grid: &[f64]) -> Result<()> {
    if grid.len() < 100 {
        return Err(Error::Domain(format!(
            "monotonicity grid needs at least 100 points, got {}",
            grid.len()
        )));
    }
    if grid.windows(2).any(|w| !(w[1] > w[0])) || grid[0] < 0.0 {
        return Err(Error::Domain("monotonicity grid must be increasing and nonnegative".into()));
    }
    for class in 0..rule.num_classes() {
        let mut prev = rule.index(class, grid[0]);
        for w in grid.windows(2) {
            let v = rule.index(class, w[1]);
            if v < prev - 1e-12 * prev.abs().max(1.0) || v.is_nan() {
                return Err(Error::NonMonotone {
                    class,
                    age_lo: w[0],
                    age_hi: w[1],
                    value_lo: prev,
                    value_hi: v,
                });
            }
            prev = v;
        }
    }
    Ok(())
}
