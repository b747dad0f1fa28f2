//! The single-arm discounted restless bandit behind the Whittle index.
//!
//! State `T` is the age of the oldest job (negative: time until the next
//! arrival). Passive: `dT = dt`. Active (allowed only for `T > 0`): `dT = dt`
//! plus drops of `Exp(lambda)` size at rate `mu`. Cost rate `alpha r(T)`,
//! minus the compensation `l` when passive, discounted at rate `alpha`.

mod hjb;
mod mc;

use crate::cost::{reward_r, CostFunction, ShiftedExpectation};
use crate::error::{Error, Result};

pub use hjb::{discount_limit_check, indexability_scan, DiscountPoint, DiscountTrend, IndexDrop, IndexabilityReport};
pub use mc::{
    busy_period_lst_mc, cost_bar_mc, gamma_fn_mc, threshold_cost_mc, whittle_fd_check, FdCheck, McOptions,
};

/// `gamma_1 = E[exp(-alpha T_1)]` for an M/M/1 busy period `T_1`: the root in
/// `(0, 1)` of `lambda g^2 - (lambda + mu + alpha) g + mu = 0`.
pub fn solve_gamma1(lambda: f64, mu: f64, alpha: f64) -> Result<f64> {
    Ok(Gamma1::new(lambda, mu, alpha)?.gamma1)
}

/// Residual `mu (1 - g) - (alpha + lambda - lambda g) g` of the busy-period
/// fixed point, scaled by `lambda + mu + alpha`.
pub fn gamma1_residual(lambda: f64, mu: f64, alpha: f64, g: f64) -> f64 {
    (mu * (1.0 - g) - (alpha + lambda - lambda * g) * g) / (lambda + mu + alpha)
}

#[derive(Debug, Clone, Copy)]
struct Gamma1 {
    gamma1: f64,
    one_minus: f64,
    theta: f64,
}

impl Gamma1 {
    fn new(lambda: f64, mu: f64, alpha: f64) -> Result<Self> {
        if !(mu > 0.0 && alpha > 0.0 && lambda >= 0.0) || !(mu + alpha + lambda).is_finite() {
            return Err(Error::Domain(format!(
                "need mu > 0, alpha > 0, lambda >= 0 (got lambda={lambda}, mu={mu}, alpha={alpha})"
            )));
        }
        let s = lambda + mu + alpha;
        let gap = mu - lambda;
        let disc = gap * gap + 2.0 * alpha * (lambda + mu) + alpha * alpha;
        if !(disc > 0.0) {
            return Err(Error::Numeric {
                message: "busy-period discriminant is not positive".into(),
                residual: disc,
            });
        }
        let root = disc.sqrt();
        let big = s + root;
        let gamma1 = 2.0 * mu / big;
        // Rationalized forms avoid cancellation for small alpha.
        let excess = (2.0 * (lambda + mu) + alpha) / (root + gap);
        let (one_minus, theta) = if root + gap > 0.0 {
            (alpha * (1.0 + excess) / big, big / (1.0 + excess))
        } else {
            let om = (s + root - 2.0 * mu) / big;
            (om, alpha / om)
        };
        Ok(Self {
            gamma1,
            one_minus,
            theta,
        })
    }
}

/// A single-arm bandit with its cached busy-period constants.
#[derive(Debug, Clone)]
pub struct BanditEnv {
    lambda: f64,
    mu: f64,
    alpha: f64,
    cost: CostFunction,
    gamma1: f64,
    one_minus_gamma1: f64,
    gamma2: f64,
    theta: f64,
    shift: ShiftedExpectation,
}

impl BanditEnv {
    pub fn new(lambda: f64, mu: f64, alpha: f64, cost: CostFunction) -> Result<Self> {
        if !(lambda < mu) {
            return Err(Error::Unstable(format!("bandit needs lambda < mu (lambda={lambda}, mu={mu})")));
        }
        let g = Gamma1::new(lambda, mu, alpha)?;
        let shift = ShiftedExpectation::new(g.theta)?;
        shift.eval(&cost, 0.0)?;
        Ok(Self {
            lambda,
            mu,
            alpha,
            cost,
            gamma1: g.gamma1,
            one_minus_gamma1: g.one_minus,
            gamma2: lambda / (lambda + alpha),
            theta: g.theta,
            shift,
        })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }
    pub fn mu(&self) -> f64 {
        self.mu
    }
    pub fn alpha(&self) -> f64 {
        self.alpha
    }
    pub fn cost(&self) -> &CostFunction {
        &self.cost
    }
    pub fn gamma1(&self) -> f64 {
        self.gamma1
    }
    /// `1 - gamma_1`, computed without cancellation.
    pub fn one_minus_gamma1(&self) -> f64 {
        self.one_minus_gamma1
    }
    pub fn gamma2(&self) -> f64 {
        self.gamma2
    }
    /// Rate of the shift `X`: `alpha / (1 - gamma_1)`.
    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn r(&self, t: f64) -> f64 {
        reward_r(&self.cost, self.lambda, t)
    }

    /// `E[c(t + X)]`, `X ~ Exp(theta)`.
    pub fn shifted_cost(&self, t: f64) -> Result<f64> {
        self.shift.eval(&self.cost, t)
    }

    /// Discounted cost of a busy period started at state `t`:
    /// `(1 - gamma_1) E[r(t + X)]`, with
    /// `E[r(t + X)] = r(t) - c(t) + mu / (gamma_1 theta) E[c(t + X)]`.
    pub fn cost_bar(&self, t: f64) -> Result<f64> {
        let ec = self.shifted_cost(t)?;
        let rc = self.lambda * self.cost.antideriv(t)?;
        Ok(self.one_minus_gamma1 * (rc + self.mu / (self.gamma1 * self.theta) * ec))
    }

    /// `d/dt cost_bar(t) = (1 - gamma_1) (lambda c(t) + mu / gamma_1 (E[c(t + X)] - c(t)))`.
    pub fn cost_bar_slope(&self, t: f64) -> Result<f64> {
        let ec = self.shifted_cost(t)?;
        let c = self.cost.eval(t)?;
        Ok(self.one_minus_gamma1 * (self.lambda * c + self.mu / self.gamma1 * (ec - c)))
    }

    /// Discounted cost over the passive stretch `[t - T_2, t]`:
    /// `alpha / (alpha + lambda) (r(t) - c(t))`.
    pub fn gamma_fn(&self, t: f64) -> Result<f64> {
        Ok(self.alpha / (self.alpha + self.lambda) * self.lambda * self.cost.antideriv(t)?)
    }

    /// `W(t0) = mu E[c(t0 + X)]`.
    pub fn whittle_discounted(&self, t0: f64) -> Result<f64> {
        Ok(self.mu * self.shifted_cost(t0)?)
    }

    /// As [`whittle_discounted`](Self::whittle_discounted) but pinned to 0 at `t0 = 0`, where
    /// the arm cannot be active.
    pub fn whittle_discounted_pinned(&self, t0: f64) -> Result<f64> {
        if t0 == 0.0 {
            Ok(0.0)
        } else {
            self.whittle_discounted(t0)
        }
    }

    /// Discounted cost of `Threshold(t0)` started at `t0` with compensation `l`.
    pub fn stationary_threshold_cost(&self, t0: f64, l: f64) -> Result<f64> {
        let g1 = self.gamma1;
        let g2 = self.gamma2;
        let num = self.cost_bar(t0)? + g1 * (self.gamma_fn(t0)? - l * (1.0 - g2) / self.alpha);
        Ok(num / (1.0 - g1 * g2))
    }

    /// Value at the threshold when `l` equals the index at `t0`:
    /// `r(t0) - c(t0) - l / alpha + (lambda + alpha) l / (mu alpha)`.
    pub fn value_at_index(&self, t0: f64) -> Result<f64> {
        let l = self.whittle_discounted(t0)?;
        Ok(self.lambda * self.cost.antideriv(t0)? - l / self.alpha
            + (self.lambda + self.alpha) * l / (self.mu * self.alpha))
    }

    /// Value function of `Threshold(t0)` with `l = W(t0)`.
    pub fn threshold_value(&self, t: f64, t0: f64) -> Result<f64> {
        hjb::value(self, t, t0)
    }

    /// `mu (V(t) - E[V(t - T_2)]) - l` for `Threshold(t0)` with `l = W(t0)`.
    /// Optimality of the threshold needs `m <= 0` below `t0` and `m >= 0` above.
    pub fn hjb_margin(&self, t: f64, t0: f64) -> Result<f64> {
        hjb::margin(self, t, t0)
    }

    /// Tolerance used when reading the sign of [`hjb_margin`](Self::hjb_margin).
    pub fn hjb_tolerance(&self, t0: f64) -> Result<f64> {
        Ok(1e-6 * self.whittle_discounted(t0)?.abs().max(1.0))
    }
}
