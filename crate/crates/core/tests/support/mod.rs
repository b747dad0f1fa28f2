//! Independent numerical oracles shared by the integration tests. Nothing
//! here calls the library's quadrature or closed forms.
#![allow(dead_code)]

use tvhc::CostFunction;

/// Adaptive Simpson on `[a, b]`.
pub fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    fn rec<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) + rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
    if b <= a {
        return 0.0;
    }
    let (fa, fm, fb) = (f(a), f(0.5 * (a + b)), f(b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    rec(f, a, b, fa, fm, fb, whole, tol, 48)
}

/// Simpson over `pieces` equal sub-intervals, each to `tol / pieces`.
pub fn simpson_pieces<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, pieces: usize, tol: f64) -> f64 {
    let w = (b - a) / pieces as f64;
    (0..pieces)
        .map(|k| simpson(f, a + k as f64 * w, a + (k + 1) as f64 * w, tol / pieces as f64))
        .sum()
}

/// `E[f(X)]`, `X ~ Exp(rate)`, truncated where the density is below 1e-16.
pub fn exp_expectation<F: Fn(f64) -> f64>(rate: f64, f: &F) -> f64 {
    let upper = 37.0 / rate;
    simpson_pieces(&|x| rate * (-rate * x).exp() * f(x), 0.0, upper, 400, 1e-13)
}

/// `r(t) = c(t) + lambda C(t)` from the defining sum, 0 for `t < 0`.
pub fn r(c: &CostFunction, lambda: f64, t: f64) -> f64 {
    if t < 0.0 {
        0.0
    } else {
        c.eval(t).unwrap() + lambda * c.antideriv(t).unwrap()
    }
}

/// `r'(t) = c'(t) + lambda c(t)` for `t > 0`.
pub fn r_slope(c: &CostFunction, lambda: f64, t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else {
        c.deriv(t).unwrap() + lambda * c.eval(t).unwrap()
    }
}

/// `gamma_1` as the root in (0, 1) of the busy-period fixed point, by bisection.
pub fn gamma1_bisect(lambda: f64, mu: f64, alpha: f64) -> f64 {
    let f = |g: f64| mu * (1.0 - g) - (alpha + lambda - lambda * g) * g;
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Discounted index from the stationarity condition, built from the
/// busy-period and passive-stretch costs and their slopes, each by direct
/// quadrature:
/// `W = [alpha (1 - g1 g2) r + Cbar' - alpha Cbar + g1 Gamma' - alpha g1 Gamma] / (1 - g1)`.
pub fn whittle_derivative_form(lambda: f64, mu: f64, alpha: f64, c: &CostFunction, t0: f64) -> f64 {
    let g1 = gamma1_bisect(lambda, mu, alpha);
    let g2 = lambda / (lambda + alpha);
    let theta = alpha / (1.0 - g1);
    let e_r = exp_expectation(theta, &|x| r(c, lambda, t0 + x));
    let e_r_slope = exp_expectation(theta, &|x| r_slope(c, lambda, t0 + x));
    let cost_bar = (1.0 - g1) * e_r;
    let cost_bar_slope = (1.0 - g1) * e_r_slope;
    let (gamma, gamma_slope) = if lambda == 0.0 {
        (0.0, 0.0)
    } else {
        let k = alpha / (alpha + lambda);
        let past = simpson_pieces(&|u| lambda * (-lambda * u).exp() * r(c, lambda, t0 - u), 0.0, t0, 64, 1e-13);
        let past_slope =
            simpson_pieces(&|u| lambda * (-lambda * u).exp() * r_slope(c, lambda, t0 - u), 0.0, t0, 64, 1e-13);
        // r jumps from 0 to c(0) at the origin.
        let jump = c.eval(0.0).unwrap() * lambda * (-lambda * t0).exp();
        (k * past, k * (past_slope + jump))
    };
    (alpha * (1.0 - g1 * g2) * r(c, lambda, t0) + cost_bar_slope - alpha * cost_bar + g1 * gamma_slope
        - alpha * g1 * gamma)
        / (1.0 - g1)
}

/// Value iteration for the single-arm bandit with compensation `l`, on the
/// grid `0, h, ..., s_max`, as a discrete-time chain with step `h`:
/// the state drifts up by `h`; when active a drop of `Exp(lambda)` size
/// happens with probability `mu h`. States below 0 are passive and drift
/// back to 0 deterministically, which is summed in closed form.
pub struct ValueIteration {
    pub h: f64,
    pub grid: Vec<f64>,
    pub value: Vec<f64>,
    /// `true` where passive is strictly cheaper, `false` where active is.
    pub passive: Vec<bool>,
    /// `Q_passive - Q_active` at each grid point.
    pub gap: Vec<f64>,
}

pub fn value_iteration(lambda: f64, mu: f64, alpha: f64, c: &CostFunction, l: f64, s_max: f64, h: f64) -> ValueIteration {
    let n = (s_max / h).round() as usize + 1;
    let grid: Vec<f64> = (0..n).map(|k| k as f64 * h).collect();
    let cost: Vec<f64> = grid.iter().map(|&s| alpha * r(c, lambda, s) * h).collect();
    let beta = (-alpha * h).exp();
    let p = mu * h;
    let decay = (-lambda * h).exp();
    let mut v = vec![0.0; n];
    let mut q_gap = vec![0.0; n];
    for _sweep in 0..200_000 {
        let v0 = v[0];
        // Value of landing at x - Y with Y > x (below zero):
        // e^{-lambda x} (lambda V(0) - l) / (lambda + alpha).
        let below = |x: f64| (-lambda * x).exp() * (lambda * v0 - l) / (lambda + alpha);
        // conv[k] = ∫_0^{x_k} lambda e^{-lambda y} V(x_k - y) dy with V linear between nodes.
        let mut conv = vec![0.0; n + 1];
        for k in 1..=n {
            let (va, vb) = (v[k - 1], if k < n { v[k] } else { 2.0 * v[n - 1] - v[n - 2] });
            // ∫_0^h lambda e^{-lambda (h - z)} (va + (vb - va) z / h) dz
            let cell = if lambda == 0.0 {
                0.0
            } else {
                let i0 = 1.0 - decay;
                let i1 = h - i0 / lambda;
                va * i0 + (vb - va) / h * i1
            };
            conv[k] = decay * conv[k - 1] + cell;
        }
        let mut next = vec![0.0; n];
        let mut delta: f64 = 0.0;
        for k in 0..n {
            let up = if k + 1 < n { v[k + 1] } else { 2.0 * v[n - 1] - v[n - 2] };
            let x = grid[k] + h;
            let ev_drop = conv[k + 1] + below(x);
            let passive = cost[k] - l * h + beta * up;
            let active = cost[k] + beta * ((1.0 - p) * up + p * ev_drop);
            let best = if k == 0 { passive } else { passive.min(active) };
            q_gap[k] = passive - active;
            delta = delta.max((best - v[k]).abs());
            next[k] = best;
        }
        v = next;
        if delta < 1e-11 * v.iter().fold(1.0f64, |m, x| m.max(x.abs())) {
            break;
        }
    }
    let passive = q_gap.iter().map(|&g| g < 0.0).collect();
    ValueIteration {
        h,
        grid,
        value: v,
        passive,
        gap: q_gap,
    }
}

/// A random admitted cost curve from any family. Exponential parts grow at
/// rate at most 0.1.
pub fn random_cost<R: rand::Rng>(rng: &mut R) -> CostFunction {
    fn leaf<R: rand::Rng>(rng: &mut R) -> CostFunction {
        match rng.gen_range(0..5) {
            0 => CostFunction::constant(rng.gen_range(0.0..5.0)).unwrap(),
            1 => {
                let n = rng.gen_range(1..4);
                CostFunction::polynomial((0..n).map(|_| rng.gen_range(0.0..2.0)).collect()).unwrap()
            }
            2 => CostFunction::smoothed_step(rng.gen_range(0.0..5.0), rng.gen_range(0.2..4.0), rng.gen_range(0.02..0.5))
                .unwrap(),
            3 => {
                let mut knots = vec![(0.0, rng.gen_range(0.0..2.0))];
                for _ in 0..rng.gen_range(1..4) {
                    let (t, v) = *knots.last().unwrap();
                    knots.push((t + rng.gen_range(0.1..2.0), v + rng.gen_range(0.0..2.0)));
                }
                CostFunction::piecewise_linear(knots).unwrap()
            }
            _ => CostFunction::exponential(rng.gen_range(0.1..2.0), rng.gen_range(0.0..0.1)).unwrap(),
        }
    }
    if rng.gen_bool(0.2) {
        CostFunction::sum(vec![leaf(rng), leaf(rng)]).unwrap()
    } else {
        leaf(rng)
    }
}

pub fn seeded(seed: u64) -> rand_chacha::ChaCha8Rng {
    rand::SeedableRng::seed_from_u64(seed)
}

/// Proptest strategy over [`random_cost`].
pub fn arb_cost() -> impl proptest::strategy::Strategy<Value = CostFunction> {
    use proptest::strategy::Strategy;
    proptest::num::u64::ANY.prop_map(|s| random_cost(&mut seeded(s)))
}

/// Stable `(lambda, mu, alpha)` with `mu - lambda >= 0.2`.
pub fn random_env<R: rand::Rng>(rng: &mut R) -> (f64, f64, f64) {
    let mu = rng.gen_range(0.5..4.0);
    let lambda = rng.gen_range(0.0..(mu - 0.2));
    let alpha = rng.gen_range(0.05..2.0);
    (lambda, mu, alpha)
}

/// Relative errors of the four busy-period and passive-stretch expectation
/// identities at state `t`, each left side by direct quadrature over the
/// `Exp(lambda)` look-back or the `Exp(theta)` shift:
///
/// * `E[r'(t - T2)] = lambda c(t)`
/// * `E[r(t - T2)] = r(t) - c(t)`
/// * `E[r'(t + X)] = mu / g1 E[c(t + X)] - theta c(t)`
/// * `E[r(t + X)] = r(t) - c(t) + mu (1 - g1) / (g1 alpha) E[c(t + X)]`
pub fn shift_identity_errors(lambda: f64, mu: f64, alpha: f64, c: &CostFunction, t: f64) -> [f64; 4] {
    let g1 = gamma1_bisect(lambda, mu, alpha);
    let theta = alpha / (1.0 - g1);
    let ct = c.eval(t).unwrap();
    let rt = r(c, lambda, t);
    let ec = exp_expectation(theta, &|x| c.eval(t + x).unwrap());

    let back = |f: &dyn Fn(f64) -> f64| {
        if lambda == 0.0 {
            0.0
        } else {
            simpson_pieces(&|u| lambda * (-lambda * u).exp() * f(t - u), 0.0, t, 64, 1e-13)
        }
    };
    // r jumps from 0 to c(0) at the origin, which T2 reaches with density lambda e^{-lambda t}.
    let jump = lambda * (-lambda * t).exp() * c.eval(0.0).unwrap();
    let lhs = [
        back(&|s| r_slope(c, lambda, s)) + jump,
        back(&|s| r(c, lambda, s)),
        exp_expectation(theta, &|x| r_slope(c, lambda, t + x)),
        exp_expectation(theta, &|x| r(c, lambda, t + x)),
    ];
    let rhs = [
        lambda * ct,
        rt - ct,
        mu / g1 * ec - theta * ct,
        rt - ct + mu * (1.0 - g1) / (g1 * alpha) * ec,
    ];
    let mut err = [0.0; 4];
    for k in 0..4 {
        let scale = rhs[k].abs().max(lhs[k].abs()).max(1e-9);
        err[k] = if lhs[k] == rhs[k] { 0.0 } else { (lhs[k] - rhs[k]).abs() / scale };
    }
    err
}

/// `mu E[c(t + X)]` with `X ~ Exp(alpha / (1 - gamma_1))`, by quadrature.
pub fn discounted_index(lambda: f64, mu: f64, alpha: f64, c: &CostFunction, t: f64) -> f64 {
    let theta = alpha / (1.0 - gamma1_bisect(lambda, mu, alpha));
    mu * exp_expectation(theta, &|x| c.eval(t + x).unwrap())
}

/// Agreement of value iteration with `Threshold(t0)` (passive below `t0`,
/// active above).
pub struct Agreement {
    /// Share of grid points where the actions match.
    pub raw: f64,
    /// Same, also counting points where `tie(t)` holds, i.e. where both
    /// actions are optimal.
    pub with_ties: f64,
}

pub fn action_agreement(vi: &ValueIteration, t0: f64, tie: impl Fn(f64) -> bool) -> Agreement {
    let n = vi.grid.len() as f64;
    let mismatched: Vec<f64> = vi
        .grid
        .iter()
        .zip(&vi.passive)
        .filter(|(&t, &passive)| passive != (t < t0))
        .map(|(&t, _)| t)
        .collect();
    let ties = mismatched.iter().filter(|&&t| tie(t)).count() as f64;
    let miss = mismatched.len() as f64;
    Agreement {
        raw: 1.0 - miss / n,
        with_ties: 1.0 - (miss - ties) / n,
    }
}
