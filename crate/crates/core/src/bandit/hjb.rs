//! Value function of the threshold policy at the index compensation, the
//! HJB margin, and the index scans built on them.

use super::BanditEnv;
use crate::cost::{reward_r, CostFunction};
use crate::error::{Error, Result};
use crate::quad::{self, Tolerance};

fn tol() -> Tolerance {
    Tolerance {
        abs: 1e-12,
        rel: 1e-10,
        max_segments: 4000,
    }
}

fn check(t: f64, t0: f64) -> Result<()> {
    if !(t >= 0.0 && t0 >= 0.0) || !t.is_finite() || !t0.is_finite() {
        return Err(Error::Domain(format!("states must be finite and >= 0 (t={t}, t0={t0})")));
    }
    Ok(())
}

/// Breakpoints of `c` shifted by `-offset`, for integrands `f(offset + s)`.
fn shifted_breaks(c: &CostFunction, offset: f64) -> Vec<f64> {
    c.features().into_iter().map(|f| f - offset).collect()
}

/// `∫_0^len alpha r(t + s) e^{-alpha s} ds`.
pub(crate) fn passive_reward(env: &BanditEnv, t: f64, len: f64) -> Result<f64> {
    let (a, lam) = (env.alpha(), env.lambda());
    let c = env.cost();
    let mut breaks = shifted_breaks(c, t);
    breaks.push(-t);
    quad::integrate(|s| a * reward_r(c, lam, t + s) * (-a * s).exp(), 0.0, len, &breaks, tol())
}

pub(crate) fn value(env: &BanditEnv, t: f64, t0: f64) -> Result<f64> {
    check(t, t0)?;
    let l = env.whittle_discounted(t0)?;
    let v0 = env.value_at_index(t0)?;
    let a = env.alpha();
    if t <= t0 {
        let len = t0 - t;
        let decay = (-a * len).exp();
        return Ok(passive_reward(env, t, len)? + decay * v0 - (-(-a * len).exp_m1()) * l / a);
    }
    let g1 = env.gamma1();
    let om = env.one_minus_gamma1();
    let k = env.lambda() * om;
    let breaks = shifted_breaks(env.cost(), 0.0);
    let kernel = quad::integrate(
        |s| (-k * (t - s)).exp() * env.cost_bar_slope(s).unwrap_or(f64::NAN),
        t0,
        t,
        &breaks,
        tol(),
    )?;
    if !kernel.is_finite() {
        return Err(Error::Numeric {
            message: "busy-period cost slope failed inside the value kernel".into(),
            residual: f64::NAN,
        });
    }
    let closed = g1 * (-k * (t - t0)).exp() * (env.lambda() / env.mu() - 1.0 / g1) * l / a;
    Ok(env.cost_bar(t)? / om + closed - g1 / om * kernel)
}

pub(crate) fn margin(env: &BanditEnv, t: f64, t0: f64) -> Result<f64> {
    let v = value(env, t, t0)?;
    let l = env.whittle_discounted(t0)?;
    let gap = if t <= t0 {
        // Passive below t0: V(t - T2) relaxes deterministically back to V(t).
        let g2 = env.gamma2();
        (1.0 - g2) * v - env.gamma_fn(t)? + l * (1.0 - g2) / env.alpha()
    } else {
        // Active above t0: V(t) = cost_bar(t) + gamma_1 E[V(t - T2)].
        (env.cost_bar(t)? - env.one_minus_gamma1() * v) / env.gamma1()
    };
    Ok(env.mu() * gap - l)
}

/// A decrease of the index between consecutive grid points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IndexDrop {
    pub t_lo: f64,
    pub t_hi: f64,
    pub w_lo: f64,
    pub w_hi: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IndexabilityReport {
    pub points: usize,
    pub violations: Vec<IndexDrop>,
}

impl IndexabilityReport {
    pub fn pass(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks that the discounted index is nondecreasing along `grid`.
pub fn indexability_scan(env: &BanditEnv, grid: &[f64]) -> Result<IndexabilityReport> {
    if grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Domain("grid must be strictly increasing".into()));
    }
    let w: Vec<f64> = grid.iter().map(|&t| env.whittle_discounted(t)).collect::<Result<_>>()?;
    let violations = grid
        .windows(2)
        .zip(w.windows(2))
        .filter(|(_, v)| v[1] < v[0] - 1e-12 * v[0].abs().max(1.0))
        .map(|(t, v)| IndexDrop {
            t_lo: t[0],
            t_hi: t[1],
            w_lo: v[0],
            w_hi: v[1],
        })
        .collect();
    Ok(IndexabilityReport {
        points: grid.len(),
        violations,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscountPoint {
    pub alpha: f64,
    pub discounted: f64,
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscountTrend {
    pub average: f64,
    pub points: Vec<DiscountPoint>,
}

impl DiscountTrend {
    /// Gaps shrink (weakly, up to 1e-12) at every step as alpha decreases.
    pub fn monotone(&self) -> bool {
        self.points.windows(2).all(|p| p[1].gap <= p[0].gap + 1e-12)
    }

    /// The smallest alpha has the smallest gap.
    pub fn converging(&self) -> bool {
        match self.points.split_last() {
            Some((last, rest)) => rest.iter().all(|p| last.gap <= p.gap + 1e-12),
            None => true,
        }
    }
}

/// Discounted cost of the always-active arm started at state 0 with no
/// compensation, `cost_bar(0) / (1 - gamma_1 gamma_2)`, for each `alpha`,
/// next to the long-run average cost `average` of the matching queue.
/// The gap is relative when `average > 0`, absolute otherwise.
pub fn discount_limit_check(
    lambda: f64,
    mu: f64,
    cost: &CostFunction,
    alphas: &[f64],
    average: f64,
) -> Result<DiscountTrend> {
    if alphas.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::Domain("alphas must be strictly decreasing".into()));
    }
    let points = alphas
        .iter()
        .map(|&alpha| {
            let env = BanditEnv::new(lambda, mu, alpha, cost.clone())?;
            let discounted = env.cost_bar(0.0)? / (1.0 - env.gamma1() * env.gamma2());
            let diff = (discounted - average).abs();
            let gap = if average > 0.0 { diff / average } else { diff };
            Ok(DiscountPoint {
                alpha,
                discounted,
                gap,
            })
        })
        .collect::<Result<_>>()?;
    Ok(DiscountTrend { average, points })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn env(c: CostFunction) -> BanditEnv {
        BanditEnv::new(1.0, 2.0, 0.5, c).unwrap()
    }

    #[test]
    fn value_is_continuous_at_threshold() {
        let e = env(CostFunction::polynomial(vec![0.5, 1.0, 0.2]).unwrap());
        let t0 = 1.3;
        let below = value(&e, t0 - 1e-7, t0).unwrap();
        let above = value(&e, t0 + 1e-7, t0).unwrap();
        let at = value(&e, t0, t0).unwrap();
        assert!((below - at).abs() < 1e-5 && (above - at).abs() < 1e-5, "{below} {at} {above}");
    }

    #[test]
    fn margin_sign_pattern_on_linear_cost() {
        let e = env(CostFunction::polynomial(vec![0.0, 1.0]).unwrap());
        let t0 = 1.0;
        let tol = e.hjb_tolerance(t0).unwrap();
        for i in 0..=60 {
            let t = 3.0 * i as f64 / 60.0;
            let m = margin(&e, t, t0).unwrap();
            if t < t0 {
                assert!(m <= tol, "t={t} m={m}");
            } else if t > t0 {
                assert!(m >= -tol, "t={t} m={m}");
            }
        }
    }

    #[test]
    fn scan_flags_nothing_for_monotone_costs() {
        let e = env(CostFunction::deadline(2.0, 1.0).unwrap());
        let grid: Vec<f64> = (0..500).map(|i| i as f64 * 0.01).collect();
        assert!(indexability_scan(&e, &grid).unwrap().pass());
        assert!(indexability_scan(&e, &[1.0, 1.0]).is_err());
    }

    #[test]
    fn zero_cost_discount_limit_is_zero() {
        let c = CostFunction::constant(0.0).unwrap();
        let tr = discount_limit_check(0.5, 1.0, &c, &[1.0, 0.1], 0.0).unwrap();
        assert!(tr.points.iter().all(|p| p.discounted == 0.0));
        assert!(tr.converging() && tr.monotone());
    }

    #[test]
    fn constant_cost_discount_limit_approaches_mm1_mean() {
        let c = CostFunction::constant(1.0).unwrap();
        let tr = discount_limit_check(0.5, 1.0, &c, &[1.0, 0.3, 0.1, 0.03, 1e-4], 1.0).unwrap();
        assert!(tr.converging(), "{tr:?}");
        assert!(tr.points[3].gap < tr.points[1].gap);
        assert!(tr.points.last().unwrap().gap < 1e-2);
        // Starting from a single fresh job, heavy discounting undershoots less
        // at alpha = 1 than at alpha = 0.3.
        assert!(!tr.monotone());
    }
}
