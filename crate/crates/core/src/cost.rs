//! Holding-cost curves `c(t)` over job age and the scalar functionals built
//! on them: derivative, accumulated cost, the expected total cost rate of a
//! class given its oldest age, and expectations under an exponential shift.

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad::{self, GaussLaguerre, Tolerance};
use crate::rng;

/// Default logistic width of a deadline, relative to the deadline.
pub const DEFAULT_STEP_WIDTH_FRACTION: f64 = 0.01;
/// Default truncation of the exponential weight in quadrature.
pub const DEFAULT_TRUNCATION: f64 = 1e-12;

/// The concrete shape of a [`CostFunction`].
#[derive(Debug, Clone, PartialEq)]
pub enum Family {
    Constant { h: f64 },
    /// `a_0 + a_1 t + a_2 t^2 + ...`
    Polynomial { coeffs: Vec<f64> },
    /// Logistic approximation of a deadline: `h / (1 + exp(-(t - d) / w))`.
    SmoothedStep { h: f64, d: f64, w: f64 },
    /// Linear interpolation through `(t, value)` knots starting at `t = 0`,
    /// extended past the last knot with the last slope.
    PiecewiseLinear { knots: Vec<(f64, f64)> },
    /// `scale * exp(rate * t)`.
    Exponential { scale: f64, rate: f64 },
    Sum(Vec<CostFunction>),
}

/// A nondecreasing, nonnegative holding-cost curve. Instances can only be
/// built through the validating constructors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CostSpec", into = "CostSpec")]
pub struct CostFunction {
    family: Family,
}

fn finite(name: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name} must be finite, got {v}")))
    }
}

fn nonneg(name: &str, v: f64) -> Result<()> {
    finite(name, v)?;
    if v < 0.0 {
        return Err(Error::Domain(format!("{name} must be >= 0, got {v}")));
    }
    Ok(())
}

fn logistic(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

impl CostFunction {
    pub fn constant(h: f64) -> Result<Self> {
        nonneg("h", h)?;
        Ok(Self {
            family: Family::Constant { h },
        })
    }

    pub fn polynomial(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::Domain("polynomial needs at least one coefficient".into()));
        }
        for (j, &a) in coeffs.iter().enumerate() {
            nonneg(&format!("coeffs[{j}]"), a)?;
        }
        Ok(Self {
            family: Family::Polynomial { coeffs },
        })
    }

    pub fn smoothed_step(h: f64, d: f64, w: f64) -> Result<Self> {
        nonneg("h", h)?;
        finite("d", d)?;
        finite("w", w)?;
        if w <= 0.0 {
            return Err(Error::Domain(format!("step width must be > 0, got {w}")));
        }
        Ok(Self {
            family: Family::SmoothedStep { h, d, w },
        })
    }

    /// A deadline of height `h` at age `d`, smoothed with the default width.
    pub fn deadline(h: f64, d: f64) -> Result<Self> {
        if d <= 0.0 {
            return Err(Error::Domain(format!("deadline must be > 0, got {d}")));
        }
        Self::smoothed_step(h, d, DEFAULT_STEP_WIDTH_FRACTION * d)
    }

    pub fn piecewise_linear(knots: Vec<(f64, f64)>) -> Result<Self> {
        let Some(&(t0, v0)) = knots.first() else {
            return Err(Error::Domain("piecewise-linear cost needs a knot".into()));
        };
        if t0 != 0.0 {
            return Err(Error::Domain(format!("first knot must sit at t=0, got {t0}")));
        }
        nonneg("knots[0].value", v0)?;
        for (i, w) in knots.windows(2).enumerate() {
            finite("knot", w[1].0)?;
            finite("knot", w[1].1)?;
            if w[1].0 <= w[0].0 {
                return Err(Error::Domain(format!(
                    "knot times must increase (knot {} at {} after {})",
                    i + 1,
                    w[1].0,
                    w[0].0
                )));
            }
            if w[1].1 < w[0].1 {
                return Err(Error::Domain(format!(
                    "knot values must be nondecreasing (knot {}: {} < {})",
                    i + 1,
                    w[1].1,
                    w[0].1
                )));
            }
        }
        Ok(Self {
            family: Family::PiecewiseLinear { knots },
        })
    }

    pub fn exponential(scale: f64, rate: f64) -> Result<Self> {
        nonneg("scale", scale)?;
        nonneg("rate", rate)?;
        Ok(Self {
            family: Family::Exponential { scale, rate },
        })
    }

    pub fn sum(parts: Vec<CostFunction>) -> Result<Self> {
        if parts.is_empty() {
            return Err(Error::Domain("sum needs at least one part".into()));
        }
        Ok(Self {
            family: Family::Sum(parts),
        })
    }

    /// Multiply every value by `k > 0`.
    pub fn scaled(&self, k: f64) -> Result<Self> {
        if !(k > 0.0 && k.is_finite()) {
            return Err(Error::Domain(format!("scale factor must be > 0, got {k}")));
        }
        match &self.family {
            Family::Constant { h } => Self::constant(h * k),
            Family::Polynomial { coeffs } => Self::polynomial(coeffs.iter().map(|a| a * k).collect()),
            Family::SmoothedStep { h, d, w } => Self::smoothed_step(h * k, *d, *w),
            Family::PiecewiseLinear { knots } => {
                Self::piecewise_linear(knots.iter().map(|&(t, v)| (t, v * k)).collect())
            }
            Family::Exponential { scale, rate } => Self::exponential(scale * k, *rate),
            Family::Sum(parts) => Self::sum(parts.iter().map(|p| p.scaled(k)).collect::<Result<_>>()?),
        }
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    /// `c(t)`. Fails for negative ages.
    pub fn eval(&self, t: f64) -> Result<f64> {
        check_age(t)?;
        Ok(self.value(t))
    }

    /// `c'(t)` (right derivative at piecewise-linear knots).
    pub fn deriv(&self, t: f64) -> Result<f64> {
        check_age(t)?;
        Ok(self.slope(t))
    }

    /// `C(t) = ∫_0^t c(x) dx`.
    pub fn antideriv(&self, t: f64) -> Result<f64> {
        check_age(t)?;
        Ok(self.accumulated(t))
    }

    /// Unchecked `c(t)` for hot loops; callers guarantee `t >= 0`.
    pub fn value(&self, t: f64) -> f64 {
        match &self.family {
            Family::Constant { h } => *h,
            Family::Polynomial { coeffs } => horner(coeffs, t),
            Family::SmoothedStep { h, d, w } => h * logistic((t - d) / w),
            Family::PiecewiseLinear { knots } => {
                let (i, slope) = pl_segment(knots, t);
                knots[i].1 + slope * (t - knots[i].0)
            }
            Family::Exponential { scale, rate } => scale * (rate * t).exp(),
            Family::Sum(parts) => parts.iter().map(|p| p.value(t)).sum(),
        }
    }

    /// Unchecked `c'(t)`.
    pub fn slope(&self, t: f64) -> f64 {
        match &self.family {
            Family::Constant { .. } => 0.0,
            Family::Polynomial { coeffs } => {
                let mut acc = 0.0;
                for (j, a) in coeffs.iter().enumerate().skip(1).rev() {
                    acc = acc * t + j as f64 * a;
                }
                acc
            }
            Family::SmoothedStep { h, d, w } => {
                let s = logistic((t - d) / w);
                h / w * s * (1.0 - s)
            }
            Family::PiecewiseLinear { knots } => pl_segment(knots, t).1,
            Family::Exponential { scale, rate } => scale * rate * (rate * t).exp(),
            Family::Sum(parts) => parts.iter().map(|p| p.slope(t)).sum(),
        }
    }

    /// Unchecked `C(t)`.
    pub fn accumulated(&self, t: f64) -> f64 {
        match &self.family {
            Family::Constant { h } => h * t,
            Family::Polynomial { coeffs } => {
                let mut acc = 0.0;
                for (j, a) in coeffs.iter().enumerate().rev() {
                    acc = acc * t + a / (j + 1) as f64;
                }
                acc * t
            }
            Family::SmoothedStep { h, d, w } => h * w * (softplus((t - d) / w) - softplus(-d / w)),
            Family::PiecewiseLinear { knots } => {
                let mut acc = 0.0;
                for k in 0..knots.len() {
                    let (a, va) = knots[k];
                    if t <= a {
                        break;
                    }
                    let slope = segment_slope(knots, k);
                    let end = knots.get(k + 1).map_or(t, |n| n.0.min(t));
                    let len = end - a;
                    acc += va * len + 0.5 * slope * len * len;
                }
                acc
            }
            Family::Exponential { scale, rate } => {
                if *rate == 0.0 {
                    scale * t
                } else {
                    scale * (rate * t).exp_m1() / rate
                }
            }
            Family::Sum(parts) => parts.iter().map(|p| p.accumulated(t)).sum(),
        }
    }

    /// `∫_0^t C(x) dx`, the second antiderivative.
    pub fn accumulated2(&self, t: f64) -> f64 {
        match &self.family {
            Family::Constant { h } => 0.5 * h * t * t,
            Family::Polynomial { coeffs } => {
                let mut acc = 0.0;
                for (j, a) in coeffs.iter().enumerate().rev() {
                    acc = acc * t + a / ((j + 1) * (j + 2)) as f64;
                }
                acc * t * t
            }
            Family::SmoothedStep { d, .. } => {
                let f = |x: f64| self.accumulated(x);
                quad::integrate(f, 0.0, t, &[*d], Tolerance::default())
                    .unwrap_or_else(|_| quad::kronrod15(|x| self.accumulated(x), 0.0, t))
            }
            Family::PiecewiseLinear { knots } => {
                let mut acc = 0.0;
                let mut big_c = 0.0;
                for k in 0..knots.len() {
                    let (a, va) = knots[k];
                    if t <= a {
                        break;
                    }
                    let s = segment_slope(knots, k);
                    let end = knots.get(k + 1).map_or(t, |n| n.0.min(t));
                    let len = end - a;
                    acc += big_c * len + va * len * len / 2.0 + s * len * len * len / 6.0;
                    big_c += va * len + 0.5 * s * len * len;
                }
                acc
            }
            Family::Exponential { scale, rate } => {
                if *rate == 0.0 {
                    0.5 * scale * t * t
                } else {
                    scale * ((rate * t).exp_m1() / rate - t) / rate
                }
            }
            Family::Sum(parts) => parts.iter().map(|p| p.accumulated2(t)).sum(),
        }
    }

    /// `E[c(t + X)]` with `X ~ Exp(rate)`.
    pub fn exp_shift(&self, t: f64, rate: f64) -> Result<f64> {
        ShiftedExpectation::new(rate)?.eval(self, t)
    }

    /// `E[c'(t + X)] = rate (E[c(t + X)] - c(t))`.
    pub fn exp_shift_deriv(&self, t: f64, rate: f64) -> Result<f64> {
        Ok(rate * (self.exp_shift(t, rate)? - self.eval(t)?))
    }

    /// Whether `exp_shift` needs numerical quadrature for this curve.
    pub fn needs_quadrature(&self) -> bool {
        match &self.family {
            Family::SmoothedStep { .. } => true,
            Family::Sum(parts) => parts.iter().any(CostFunction::needs_quadrature),
            _ => false,
        }
    }

    /// Age beyond which `exp_shift` no longer needs quadrature, and the
    /// narrowest logistic width below it.
    pub fn quadrature_span(&self) -> Option<(f64, f64)> {
        match &self.family {
            Family::SmoothedStep { d, w, .. } => Some((d + 36.0 * w, *w)),
            Family::Sum(parts) => parts
                .iter()
                .filter_map(|p| p.quadrature_span())
                .reduce(|a, b| (a.0.max(b.0), a.1.min(b.1))),
            _ => None,
        }
    }

    /// Age beyond which the curve has no further features (deadlines, knots).
    pub fn feature_scale(&self) -> f64 {
        match &self.family {
            Family::SmoothedStep { d, w, .. } => d + 10.0 * w,
            Family::PiecewiseLinear { knots } => knots.last().map_or(0.0, |k| k.0),
            Family::Sum(parts) => parts.iter().map(|p| p.feature_scale()).fold(0.0, f64::max),
            _ => 0.0,
        }
    }

    fn breakpoints(&self, out: &mut Vec<f64>) {
        match &self.family {
            Family::SmoothedStep { d, w, .. } => out.extend([d - 5.0 * w, *d, d + 5.0 * w]),
            Family::PiecewiseLinear { knots } => out.extend(knots.iter().map(|k| k.0)),
            Family::Sum(parts) => parts.iter().for_each(|p| p.breakpoints(out)),
            _ => {}
        }
    }

    /// Age points where the curve changes character; useful as quadrature breakpoints.
    pub fn features(&self) -> Vec<f64> {
        let mut v = Vec::new();
        self.breakpoints(&mut v);
        v
    }
}

fn check_age(t: f64) -> Result<()> {
    if t.is_nan() || t < 0.0 {
        return Err(Error::Domain(format!("age must be >= 0, got {t}")));
    }
    Ok(())
}

fn horner(coeffs: &[f64], t: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, a| acc * t + a)
}

fn segment_slope(knots: &[(f64, f64)], k: usize) -> f64 {
    if knots.len() < 2 {
        return 0.0;
    }
    let k = k.min(knots.len() - 2);
    (knots[k + 1].1 - knots[k].1) / (knots[k + 1].0 - knots[k].0)
}

/// Index of the segment containing `t` and its slope.
fn pl_segment(knots: &[(f64, f64)], t: f64) -> (usize, f64) {
    if knots.len() < 2 || t < knots[0].0 {
        return (0, if knots.len() < 2 { 0.0 } else { segment_slope(knots, 0) });
    }
    let k = knots.partition_point(|kn| kn.0 <= t) - 1;
    let k = k.min(knots.len() - 2);
    (k, segment_slope(knots, k))
}

/// How an exponential-shift expectation is computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShiftMethod {
    ClosedForm,
    Quadrature,
}

/// `E[c(t + X)]` for `X ~ Exp(rate)`.
#[derive(Debug, Clone, Copy)]
pub struct ShiftedExpectation {
    rate: f64,
    eps_trunc: f64,
}

impl ShiftedExpectation {
    pub fn new(rate: f64) -> Result<Self> {
        if !(rate > 0.0) || rate.is_nan() {
            return Err(Error::Domain(format!(
                "shift rate must be > 0 (unstable class?), got {rate}"
            )));
        }
        Ok(Self {
            rate,
            eps_trunc: DEFAULT_TRUNCATION,
        })
    }

    pub fn with_truncation(mut self, eps: f64) -> Result<Self> {
        if !(eps > 0.0 && eps <= 1e-6) {
            return Err(Error::Domain(format!("truncation must lie in (0, 1e-6], got {eps}")));
        }
        self.eps_trunc = eps;
        Ok(self)
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn method(c: &CostFunction) -> ShiftMethod {
        if c.needs_quadrature() {
            ShiftMethod::Quadrature
        } else {
            ShiftMethod::ClosedForm
        }
    }

    pub fn eval(&self, c: &CostFunction, t: f64) -> Result<f64> {
        check_age(t)?;
        self.eval_unchecked(c, t)
    }

    fn eval_unchecked(&self, c: &CostFunction, t: f64) -> Result<f64> {
        let rate = self.rate;
        match &c.family {
            Family::Constant { h } => Ok(*h),
            Family::Polynomial { coeffs } => {
                // E[p(t+X)] = sum_k p^(k)(t) / rate^k.
                let mut deriv = coeffs.clone();
                let mut scale = 1.0;
                let mut acc = 0.0;
                while !deriv.is_empty() {
                    acc += horner(&deriv, t) * scale;
                    deriv = deriv
                        .iter()
                        .enumerate()
                        .skip(1)
                        .map(|(j, a)| j as f64 * a)
                        .collect();
                    scale /= rate;
                }
                Ok(acc)
            }
            Family::PiecewiseLinear { knots } => {
                let mut acc = c.value(t);
                let n = knots.len();
                if n < 2 {
                    return Ok(acc);
                }
                let (start, _) = pl_segment(knots, t);
                for k in start..n - 1 {
                    let s = segment_slope(knots, k);
                    let lo = knots[k].0.max(t);
                    let hi = if k == n - 2 { f64::INFINITY } else { knots[k + 1].0 };
                    if hi <= lo {
                        continue;
                    }
                    let upper = if hi.is_finite() { (-rate * (hi - t)).exp() } else { 0.0 };
                    acc += s * ((-rate * (lo - t)).exp() - upper) / rate;
                }
                Ok(acc)
            }
            Family::Exponential { scale, rate: b } => {
                if rate <= *b {
                    return Err(Error::Domain(format!(
                        "E[c(t+X)] diverges: growth rate {b} >= shift rate {rate}"
                    )));
                }
                Ok(scale * (b * t).exp() * rate / (rate - b))
            }
            Family::SmoothedStep { h, d, w } => {
                let z = (t - d) / w;
                if z >= 36.0 {
                    // Past the deadline the logistic is 1 - e^{-z} up to e^{-2z}.
                    let tw = rate * w;
                    Ok(h * (1.0 - (-z).exp() * tw / (tw + 1.0)))
                } else {
                    self.quadrature(c, t)
                }
            }
            Family::Sum(parts) => parts.iter().map(|p| self.eval_unchecked(p, t)).sum(),
        }
    }

    fn quadrature(&self, c: &CostFunction, t: f64) -> Result<f64> {
        let f = |x: f64| c.value(t + x);
        let g64 = GaussLaguerre::order64().expectation(self.rate, f);
        let g32 = GaussLaguerre::order32().expectation(self.rate, f);
        if (g64 - g32).abs() <= 1e-11 * g64.abs().max(1e-300) {
            return Ok(g64);
        }
        // Adaptive fallback on the truncated range plus the tail beyond it.
        let x_max = -self.eps_trunc.ln() / self.rate;
        let rate = self.rate;
        let breaks: Vec<f64> = c.features().into_iter().map(|b| b - t).collect();
        let body = quad::integrate(
            |x| rate * (-rate * x).exp() * c.value(t + x),
            0.0,
            x_max,
            &breaks,
            Tolerance {
                abs: 1e-14,
                rel: 1e-12,
                max_segments: 4000,
            },
        )?;
        let tail = self.eps_trunc * c.value(t + x_max);
        Ok(body + tail)
    }
}

/// Expected total instantaneous cost of a class whose oldest job has age `t`,
/// with younger jobs arriving as a Poisson(`lambda`) stream:
/// `r(t) = c(t) + lambda C(t)` for `t >= 0`, and 0 for `t < 0`.
pub fn reward_r(c: &CostFunction, lambda: f64, t: f64) -> f64 {
    if t < 0.0 {
        0.0
    } else {
        c.value(t) + lambda * c.accumulated(t)
    }
}

/// `r'(t) = c'(t) + lambda c(t)` for `t > 0`.
pub fn reward_r_slope(c: &CostFunction, lambda: f64, t: f64) -> f64 {
    if t < 0.0 {
        0.0
    } else {
        c.slope(t) + lambda * c.value(t)
    }
}

/// `∫_0^t r(s) ds` for `t >= 0`.
pub fn reward_r_integral(c: &CostFunction, lambda: f64, t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else {
        c.accumulated(t) + lambda * c.accumulated2(t)
    }
}

/// A Monte-Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    pub se: f64,
    pub n: usize,
}

impl McEstimate {
    pub fn from_samples(samples: impl IntoIterator<Item = f64>) -> Self {
        let mut acc = crate::stats::Welford::default();
        for x in samples {
            acc.push(x);
        }
        McEstimate {
            mean: acc.mean(),
            se: acc.std_err(),
            n: acc.count(),
        }
    }

    /// `|mean - target| <= k * se`, with an absolute floor for exact estimators.
    pub fn agrees_with(&self, target: f64, k: f64) -> bool {
        (self.mean - target).abs() <= k * self.se + 1e-12 * target.abs().max(1.0)
    }
}

/// Direct Monte-Carlo estimate of `r(t)`: draw the Poisson arrival epochs of
/// younger jobs on `(0, t)`, sum `c` over them and add `c(t)`.
pub fn r_mc_oracle(c: &CostFunction, lambda: f64, t: f64, n_reps: usize, seed: u64) -> Result<McEstimate> {
    check_age(t)?;
    if n_reps == 0 {
        return Err(Error::Domain("n_reps must be >= 1".into()));
    }
    if lambda == 0.0 || t == 0.0 {
        return Ok(McEstimate {
            mean: c.value(t),
            se: 0.0,
            n: n_reps,
        });
    }
    let mut rng = rng::stream(seed, 0, 0, rng::StreamKind::Oracle);
    let poisson = Poisson::new(lambda * t).map_err(|e| Error::Domain(e.to_string()))?;
    let ct = c.value(t);
    Ok(McEstimate::from_samples((0..n_reps).map(|_| {
        let n = poisson.sample(&mut rng) as usize;
        ct + (0..n).map(|_| c.value(rng.gen::<f64>() * t)).sum::<f64>()
    })))
}

/// Outcome of the subexponential-growth check.
#[derive(Debug, Clone, PartialEq)]
pub struct GrowthVerdict {
    pub pass: bool,
    pub note: String,
}

/// Checks that `∫_0^t c / e^{(mu - lambda) t} -> 0`, the condition for a class
/// to admit a policy with finite long-run cost.
pub fn growth_check(c: &CostFunction, lambda: f64, mu: f64) -> Result<GrowthVerdict> {
    if !(mu > lambda) {
        return Err(Error::Unstable(format!(
            "class with arrival rate {lambda} and service rate {mu} is not stable"
        )));
    }
    let margin = mu - lambda;
    Ok(match &c.family {
        Family::Constant { .. } => GrowthVerdict { pass: true, note: "constant".into() },
        Family::Polynomial { .. } => GrowthVerdict { pass: true, note: "polynomial growth".into() },
        Family::SmoothedStep { .. } => GrowthVerdict { pass: true, note: "bounded".into() },
        Family::PiecewiseLinear { .. } => GrowthVerdict { pass: true, note: "linear growth".into() },
        Family::Exponential { rate, .. } => {
            if *rate < margin {
                GrowthVerdict {
                    pass: true,
                    note: format!("exponential rate {rate} < mu - lambda = {margin}"),
                }
            } else {
                GrowthVerdict {
                    pass: false,
                    note: format!("exponential component grows at rate {rate} >= mu - lambda = {margin}"),
                }
            }
        }
        Family::Sum(parts) => {
            for (i, p) in parts.iter().enumerate() {
                let v = growth_check(p, lambda, mu)?;
                if !v.pass {
                    return Ok(GrowthVerdict {
                        pass: false,
                        note: format!("sum part {i}: {}", v.note),
                    });
                }
            }
            GrowthVerdict { pass: true, note: "all parts subexponential".into() }
        }
    })
}

/// Serialized form of a cost curve, tagged by `family`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum CostSpec {
    Constant { h: f64 },
    Polynomial { coeffs: Vec<f64> },
    SmoothedStep { h: f64, d: f64, w: Option<f64> },
    PiecewiseLinear { knots: Vec<[f64; 2]> },
    Exponential { scale: f64, rate: f64 },
    Sum { parts: Vec<CostSpec> },
}

impl TryFrom<CostSpec> for CostFunction {
    type Error = Error;

    fn try_from(spec: CostSpec) -> Result<Self> {
        match spec {
            CostSpec::Constant { h } => CostFunction::constant(h),
            CostSpec::Polynomial { coeffs } => CostFunction::polynomial(coeffs),
            CostSpec::SmoothedStep { h, d, w } => {
                CostFunction::smoothed_step(h, d, w.unwrap_or(DEFAULT_STEP_WIDTH_FRACTION * d))
            }
            CostSpec::PiecewiseLinear { knots } => {
                CostFunction::piecewise_linear(knots.into_iter().map(|[t, v]| (t, v)).collect())
            }
            CostSpec::Exponential { scale, rate } => CostFunction::exponential(scale, rate),
            CostSpec::Sum { parts } => CostFunction::sum(
                parts
                    .into_iter()
                    .map(CostFunction::try_from)
                    .collect::<Result<_>>()?,
            ),
        }
    }
}

impl From<CostFunction> for CostSpec {
    fn from(c: CostFunction) -> Self {
        match c.family {
            Family::Constant { h } => CostSpec::Constant { h },
            Family::Polynomial { coeffs } => CostSpec::Polynomial { coeffs },
            Family::SmoothedStep { h, d, w } => CostSpec::SmoothedStep { h, d, w: Some(w) },
            Family::PiecewiseLinear { knots } => CostSpec::PiecewiseLinear {
                knots: knots.into_iter().map(|(t, v)| [t, v]).collect(),
            },
            Family::Exponential { scale, rate } => CostSpec::Exponential { scale, rate },
            Family::Sum(parts) => CostSpec::Sum {
                parts: parts.into_iter().map(CostSpec::from).collect(),
            },
        }
    }
}
