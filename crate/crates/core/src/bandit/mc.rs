//! Monte-Carlo estimators for the single-arm bandit.

use rand::Rng;
use rand_distr::{Distribution, Exp};

use super::hjb::passive_reward;
use super::BanditEnv;
use crate::cost::{reward_r, McEstimate};
use crate::error::{Error, Result};
use crate::quad::{self, Tolerance};
use crate::rng::{self, Stream, StreamKind};

/// Replication count, seed and discount truncation for the estimators.
#[derive(Debug, Clone, Copy)]
pub struct McOptions {
    pub n_reps: usize,
    pub seed: u64,
    /// Paths stop once `e^{-alpha s}` falls below this.
    pub horizon_eps: f64,
}

impl McOptions {
    pub fn new(n_reps: usize, seed: u64) -> Self {
        Self {
            n_reps,
            seed,
            horizon_eps: 1e-10,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n_reps == 0 {
            return Err(Error::Domain("n_reps must be >= 1".into()));
        }
        if !(self.horizon_eps > 0.0 && self.horizon_eps < 1.0) {
            return Err(Error::Domain(format!("horizon_eps must be in (0, 1), got {}", self.horizon_eps)));
        }
        Ok(())
    }
}

fn tol() -> Tolerance {
    Tolerance {
        abs: 1e-11,
        rel: 1e-9,
        max_segments: 2000,
    }
}

fn exp(rate: f64) -> Result<Exp<f64>> {
    Exp::new(rate).map_err(|e| Error::Domain(e.to_string()))
}

/// Draws an `Exp(rate)` variate, or `+inf` when `rate == 0`.
fn draw(rng: &mut Stream, d: &Option<Exp<f64>>) -> f64 {
    d.as_ref().map_or(f64::INFINITY, |d| d.sample(rng))
}

struct Sampler {
    drop_clock: Exp<f64>,
    drop_size: Option<Exp<f64>>,
}

impl Sampler {
    fn new(env: &BanditEnv) -> Result<Self> {
        Ok(Self {
            drop_clock: exp(env.mu())?,
            drop_size: (env.lambda() > 0.0).then(|| exp(env.lambda())).transpose()?,
        })
    }
}

/// `∫_0^len alpha r(t + u) e^{-alpha u} du` along one active stretch.
fn segment_reward(env: &BanditEnv, t: f64, len: f64) -> Result<f64> {
    let (a, lam) = (env.alpha(), env.lambda());
    let c = env.cost();
    let breaks: Vec<f64> = c.features().into_iter().map(|f| f - t).collect();
    quad::integrate(|u| a * reward_r(c, lam, t + u) * (-a * u).exp(), 0.0, len, &breaks, tol())
}

/// Discounted cost of one busy period started at `t0`: the oldest age
/// `t0 + A(s)` drifts up at unit rate and drops by `Exp(lambda)` at rate
/// `mu` until `A` goes negative.
pub fn cost_bar_mc(env: &BanditEnv, t0: f64, opts: McOptions) -> Result<McEstimate> {
    opts.validate()?;
    env.cost().eval(t0)?;
    let s = Sampler::new(env)?;
    let a = env.alpha();
    let t_max = -opts.horizon_eps.ln() / a;
    let mut rng = rng::stream(opts.seed, 0, 0, StreamKind::Bandit);
    let mut samples = Vec::with_capacity(opts.n_reps);
    for _ in 0..opts.n_reps {
        let (mut clock, mut age, mut total) = (0.0, 0.0, 0.0);
        while age >= 0.0 && clock < t_max {
            let tau = s.drop_clock.sample(&mut rng).min(t_max - clock);
            total += (-a * clock).exp() * segment_reward(env, t0 + age, tau)?;
            clock += tau;
            age += tau - draw(&mut rng, &s.drop_size);
        }
        samples.push(total);
    }
    Ok(McEstimate::from_samples(samples))
}

/// Direct estimate of `E[exp(-alpha T_1)]` over simulated M/M/1 busy periods.
pub fn busy_period_lst_mc(lambda: f64, mu: f64, alpha: f64, n_reps: usize, seed: u64) -> Result<McEstimate> {
    if !(lambda >= 0.0 && lambda < mu && alpha > 0.0) || n_reps == 0 {
        return Err(Error::Domain(format!(
            "need 0 <= lambda < mu, alpha > 0 and n_reps >= 1 (lambda={lambda}, mu={mu}, alpha={alpha})"
        )));
    }
    let total = exp(lambda + mu)?;
    let p_arrival = lambda / (lambda + mu);
    let mut rng = rng::stream(seed, 0, 1, StreamKind::Bandit);
    Ok(McEstimate::from_samples((0..n_reps).map(|_| {
        let (mut jobs, mut clock) = (1u64, 0.0);
        while jobs > 0 {
            clock += total.sample(&mut rng);
            if rng.gen::<f64>() < p_arrival {
                jobs += 1;
            } else {
                jobs -= 1;
            }
            if alpha * clock > 50.0 {
                return 0.0;
            }
        }
        (-alpha * clock).exp()
    })))
}

/// Discounted cost of the passive stretch `[t - T_2, t]`,
/// `E[∫_0^{T_2} alpha r(t - T_2 + s) e^{-alpha s} ds]`.
pub fn gamma_fn_mc(env: &BanditEnv, t: f64, opts: McOptions) -> Result<McEstimate> {
    opts.validate()?;
    env.cost().eval(t)?;
    if env.lambda() == 0.0 {
        return Ok(McEstimate {
            mean: 0.0,
            se: 0.0,
            n: opts.n_reps,
        });
    }
    let size = exp(env.lambda())?;
    let mut rng = rng::stream(opts.seed, 0, 2, StreamKind::Bandit);
    let mut samples = Vec::with_capacity(opts.n_reps);
    for _ in 0..opts.n_reps {
        let t2 = size.sample(&mut rng);
        samples.push(passive_reward(env, t - t2, t2)?);
    }
    Ok(McEstimate::from_samples(samples))
}

/// One stretch of a threshold-policy path: `len` time units starting at
/// `clock` in state `state`.
#[derive(Debug, Clone, Copy)]
struct Stretch {
    clock: f64,
    state: f64,
    len: f64,
}

/// Walks one path of `Threshold(x)` from `s0` up to `t_max`. The arm is
/// active iff its state is at least `max(x, 0)`.
fn threshold_path(env: &BanditEnv, s: &Sampler, x: f64, s0: f64, t_max: f64, rng: &mut Stream) -> Vec<Stretch> {
    let gate = x.max(0.0);
    let (mut clock, mut state) = (0.0, s0);
    let mut out = Vec::new();
    while clock < t_max {
        if state < gate {
            let len = (gate - state).min(t_max - clock);
            out.push(Stretch { clock, state, len });
            if !len.is_finite() {
                break;
            }
            clock += len;
            state += len;
        } else {
            let len = s.drop_clock.sample(rng).min(t_max - clock);
            out.push(Stretch { clock, state, len });
            clock += len;
            state += len - draw(rng, &s.drop_size);
        }
    }
    let _ = env;
    out
}

/// Cost of a recorded path with every state shifted by `shift`; stretches
/// below `gate + shift` pay the compensation.
fn path_cost(env: &BanditEnv, path: &[Stretch], gate: f64, shift: f64, l: f64) -> Result<f64> {
    let a = env.alpha();
    let mut total = 0.0;
    for st in path {
        let state = st.state + shift;
        let disc = (-a * st.clock).exp();
        if st.len.is_infinite() {
            // Passive forever from minus infinity: no reward, only compensation.
            total -= disc * l / a;
            continue;
        }
        let reward = if state == f64::NEG_INFINITY || state + st.len <= 0.0 {
            0.0
        } else {
            segment_reward(env, state, st.len)?
        };
        total += disc * reward;
        if st.state < gate {
            total -= disc * l * (-(-a * st.len).exp_m1()) / a;
        }
    }
    Ok(total)
}

/// Discounted single-arm cost of `Threshold(x)` from `s0` with compensation `l`.
pub fn threshold_cost_mc(env: &BanditEnv, x: f64, s0: f64, l: f64, opts: McOptions) -> Result<McEstimate> {
    opts.validate()?;
    if x.is_nan() || !s0.is_finite() {
        return Err(Error::Domain(format!("bad threshold {x} or start state {s0}")));
    }
    let s = Sampler::new(env)?;
    let t_max = -opts.horizon_eps.ln() / env.alpha();
    let mut rng = rng::stream(opts.seed, 0, 3, StreamKind::Bandit);
    let mut samples = Vec::with_capacity(opts.n_reps);
    for _ in 0..opts.n_reps {
        let path = threshold_path(env, &s, x, s0, t_max, &mut rng);
        samples.push(path_cost(env, &path, x.max(0.0), 0.0, l)?);
    }
    Ok(McEstimate::from_samples(samples))
}

/// Finite-difference check of the index definition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FdCheck {
    /// Compensation used.
    pub l: f64,
    pub delta: f64,
    /// Estimate of `(Cost^{t0}(t0) - Cost^{t0+delta}(t0)) / delta`.
    pub residual: f64,
    pub se: f64,
    /// The same difference quotient evaluated from the closed forms.
    pub exact: f64,
    pub n: usize,
}

impl FdCheck {
    pub fn within(&self, k: f64) -> bool {
        self.residual.abs() <= k * self.se
    }
}

/// Estimates `(Cost^{t0}(t0, l) - Cost^{t0+delta}(t0, l)) / delta` with
/// common random numbers: the `t0 + delta` path is the `t0` path delayed by
/// a passive stretch of length `delta` and shifted up by `delta`.
/// `l` defaults to the discounted index at `t0`.
pub fn whittle_fd_check(
    env: &BanditEnv,
    t0: f64,
    delta: f64,
    l: Option<f64>,
    opts: McOptions,
) -> Result<FdCheck> {
    opts.validate()?;
    if !(t0 > 0.0 && t0.is_finite()) || !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::Domain(format!("need t0 > 0 and delta > 0 (t0={t0}, delta={delta})")));
    }
    let l = match l {
        Some(l) => l,
        None => env.whittle_discounted(t0)?,
    };
    let a = env.alpha();
    let prefix = passive_reward(env, t0, delta)? - l * (-(-a * delta).exp_m1()) / a;
    let lag = (-a * delta).exp();

    let s = Sampler::new(env)?;
    let t_max = -opts.horizon_eps.ln() / a;
    let mut rng = rng::stream(opts.seed, 0, 4, StreamKind::Bandit);
    let mut samples = Vec::with_capacity(opts.n_reps);
    for _ in 0..opts.n_reps {
        let path = threshold_path(env, &s, t0, t0, t_max, &mut rng);
        let base = path_cost(env, &path, t0, 0.0, l)?;
        let late = prefix + lag * path_cost(env, &path, t0, delta, l)?;
        samples.push((base - late) / delta);
    }
    let est = McEstimate::from_samples(samples);

    let exact = (env.stationary_threshold_cost(t0, l)?
        - prefix
        - lag * env.stationary_threshold_cost(t0 + delta, l)?)
        / delta;
    Ok(FdCheck {
        l,
        delta,
        residual: est.mean,
        se: est.se,
        exact,
        n: est.n,
    })
}
