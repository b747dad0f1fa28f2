use crate::cost::{CostFunction, ShiftedExpectation};
use crate::error::{Error, Result};

use super::table::TabulatedIndex;
use super::{ClassConfig, IndexRule};

/// Rank separation for static priorities. Ages stay far below this in any
/// realistic run, so a higher rank always wins.
pub const PRIORITY_SEPARATION: f64 = 1e12;

/// First come, first served across classes: `V_i(t) = t`.
#[derive(Debug, Clone)]
pub struct Fcfs {
    k: usize,
}

impl Fcfs {
    pub fn new(k: usize) -> Self {
        Self { k }
    }
}

impl IndexRule for Fcfs {
    fn name(&self) -> &str {
        "fcfs"
    }
    fn needs_ticks(&self) -> bool {
        false
    }
    fn num_classes(&self) -> usize {
        self.k
    }
    fn index(&self, _class: usize, age: f64) -> f64 {
        age
    }
}

/// Strict priority by class; `order[0]` is served first. FCFS within class.
#[derive(Debug, Clone)]
pub struct StaticPriority {
    rank: Vec<f64>,
    order: Vec<usize>,
}

impl StaticPriority {
    pub fn new(order: Vec<usize>) -> Result<Self> {
        let k = order.len();
        let mut rank = vec![f64::NAN; k];
        for (pos, &c) in order.iter().enumerate() {
            if c >= k || !rank[c].is_nan() {
                return Err(Error::Domain(format!("priority order {order:?} is not a permutation of 0..{k}")));
            }
            rank[c] = (k - 1 - pos) as f64;
        }
        Ok(Self { rank, order })
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }
}

impl IndexRule for StaticPriority {
    fn name(&self) -> &str {
        "static_priority"
    }
    fn needs_ticks(&self) -> bool {
        false
    }
    fn num_classes(&self) -> usize {
        self.rank.len()
    }
    fn index(&self, class: usize, age: f64) -> f64 {
        self.rank[class] * PRIORITY_SEPARATION + age
    }
}

/// Generalized c-mu rule: `V_i(t) = mu_i c_i(t)`.
#[derive(Debug, Clone)]
pub struct GenCMu {
    classes: Vec<(f64, CostFunction)>,
}

impl GenCMu {
    pub fn new(classes: &[ClassConfig]) -> Self {
        Self {
            classes: classes.iter().map(|c| (c.mu, c.cost.clone())).collect(),
        }
    }
}

impl IndexRule for GenCMu {
    fn name(&self) -> &str {
        "gen_cmu"
    }
    fn num_classes(&self) -> usize {
        self.classes.len()
    }
    fn index(&self, class: usize, age: f64) -> f64 {
        let (mu, c) = &self.classes[class];
        mu * c.value(age)
    }
}

/// Accumulated priority: `V_i(t) = b_i t`.
#[derive(Debug, Clone)]
pub struct AccumulatedPriority {
    slopes: Vec<f64>,
}

impl AccumulatedPriority {
    pub fn new(slopes: Vec<f64>) -> Result<Self> {
        if let Some(b) = slopes.iter().find(|b| !(**b >= 0.0 && b.is_finite())) {
            return Err(Error::Domain(format!("accumulation slopes must be >= 0, got {b}")));
        }
        Ok(Self { slopes })
    }

    /// `b_i = mu_i c_i(0) + 1`.
    pub fn default_slopes(classes: &[ClassConfig]) -> Vec<f64> {
        classes.iter().map(|c| c.mu * c.cost.value(0.0) + 1.0).collect()
    }

    pub fn slopes(&self) -> &[f64] {
        &self.slopes
    }
}

impl IndexRule for AccumulatedPriority {
    fn name(&self) -> &str {
        "accumulated_priority"
    }
    fn num_classes(&self) -> usize {
        self.slopes.len()
    }
    fn index(&self, class: usize, age: f64) -> f64 {
        self.slopes[class] * age
    }
}

/// `mu_i E[c_i(t + X_i)]` with `X_i ~ Exp(theta_i)`. Curves that need
/// quadrature are tabulated up to the age where a closed form takes over.
#[derive(Debug, Clone)]
struct ShiftIndex {
    classes: Vec<ShiftClass>,
}

#[derive(Debug, Clone)]
struct ShiftClass {
    mu: f64,
    cost: CostFunction,
    shift: ShiftedExpectation,
    table: Option<TabulatedIndex>,
}

impl ShiftIndex {
    fn new(classes: &[ClassConfig], rate: impl Fn(&ClassConfig) -> f64, tabulate: bool) -> Result<Self> {
        let classes = classes
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let shift = ShiftedExpectation::new(rate(c)).map_err(|e| match e {
                    Error::Domain(m) => Error::Domain(format!("class {i}: {m}")),
                    e => e,
                })?;
                // Fail early if the expectation diverges.
                shift.eval(&c.cost, 0.0)?;
                let table = match c.cost.quadrature_span() {
                    Some((t_hi, w)) if tabulate => {
                        let step = (w / 20.0).min(1e-3);
                        Some(TabulatedIndex::build(t_hi, step, |t| Ok(c.mu * shift.eval(&c.cost, t)?))?)
                    }
                    _ => None,
                };
                Ok(ShiftClass {
                    mu: c.mu,
                    cost: c.cost.clone(),
                    shift,
                    table,
                })
            })
            .collect::<Result<_>>()?;
        Ok(Self { classes })
    }

    fn exact(&self, class: usize, age: f64) -> Result<f64> {
        let c = &self.classes[class];
        Ok(c.mu * c.shift.eval(&c.cost, age)?)
    }

    fn index(&self, class: usize, age: f64) -> f64 {
        let c = &self.classes[class];
        if let Some(v) = c.table.as_ref().and_then(|t| t.get(age)) {
            return v;
        }
        // Every rate and curve was checked at construction.
        self.exact(class, age).unwrap_or(f64::NAN)
    }
}

/// `V_i(t) = mu_i E[c_i(t + S)]` with `S ~ Exp(mu_i)`.
#[derive(Debug, Clone)]
pub struct Aalto(ShiftIndex);

impl Aalto {
    pub fn new(classes: &[ClassConfig]) -> Result<Self> {
        Ok(Self(ShiftIndex::new(classes, |c| c.mu, true)?))
    }
}

impl IndexRule for Aalto {
    fn name(&self) -> &str {
        "aalto"
    }
    fn num_classes(&self) -> usize {
        self.0.classes.len()
    }
    fn index(&self, class: usize, age: f64) -> f64 {
        self.0.index(class, age)
    }
    fn exact_index(&self, class: usize, age: f64) -> Result<f64> {
        self.0.exact(class, age)
    }
}

/// `W_i(t) = mu_i E[c_i(t + X)]` with `X ~ Exp(mu_i - lambda_i)`.
#[derive(Debug, Clone)]
pub struct Whittle(ShiftIndex);

impl Whittle {
    pub fn new(classes: &[ClassConfig]) -> Result<Self> {
        Self::build(classes, true)
    }

    /// Without tabulation; every call runs the full expectation.
    pub fn untabulated(classes: &[ClassConfig]) -> Result<Self> {
        Self::build(classes, false)
    }

    fn build(classes: &[ClassConfig], tabulate: bool) -> Result<Self> {
        for (i, c) in classes.iter().enumerate() {
            if c.lambda >= c.mu {
                return Err(Error::config(
                    format!("classes[{i}]"),
                    format!("whittle index needs lambda < mu, got lambda={} mu={}", c.lambda, c.mu),
                ));
            }
        }
        Ok(Self(ShiftIndex::new(classes, |c| c.mu - c.lambda, tabulate)?))
    }
}

impl IndexRule for Whittle {
    fn name(&self) -> &str {
        "whittle"
    }
    fn num_classes(&self) -> usize {
        self.0.classes.len()
    }
    fn index(&self, class: usize, age: f64) -> f64 {
        self.0.index(class, age)
    }
    fn exact_index(&self, class: usize, age: f64) -> Result<f64> {
        self.0.exact(class, age)
    }
}
