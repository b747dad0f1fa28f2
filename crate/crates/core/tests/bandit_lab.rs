mod support;

use proptest::prelude::*;
use rand::Rng;
use tvhc::bandit::{
    busy_period_lst_mc, cost_bar_mc, discount_limit_check, gamma1_residual, gamma_fn_mc, indexability_scan,
    solve_gamma1, threshold_cost_mc, whittle_fd_check, BanditEnv, McOptions,
};
use tvhc::policy::{age_grid, ClassConfig, Fcfs};
use tvhc::sim::{simulate, SystemConfig};
use tvhc::{CostFunction, Error};

fn lin() -> CostFunction {
    CostFunction::polynomial(vec![0.0, 1.0]).unwrap()
}

fn env(c: CostFunction) -> BanditEnv {
    BanditEnv::new(1.0, 2.0, 0.5, c).unwrap()
}

#[test]
fn gamma1_examples() {
    assert_eq!(solve_gamma1(0.0, 1.0, 1.0).unwrap(), 0.5);
    let g = solve_gamma1(1.0, 2.0, 0.5).unwrap();
    assert!((g - (3.5 - 4.25f64.sqrt()) / 2.0).abs() < 1e-15);
    assert!((g - 0.719_223_593_595_585).abs() < 1e-12);
    let est = busy_period_lst_mc(1.0, 2.0, 0.5, 200_000, 1).unwrap();
    assert!(est.agrees_with(g, 3.0), "{est:?} vs {g}");

    let alpha = 1e-8;
    let g = solve_gamma1(1.0, 2.0, alpha).unwrap();
    assert!(((1.0 - g) / alpha - 1.0).abs() < 1e-6);
    // The transform exists without stability; the bandit does not.
    let g = solve_gamma1(2.0, 1.0, 0.5).unwrap();
    assert!(g > 0.0 && g < 1.0 && gamma1_residual(2.0, 1.0, 0.5, g).abs() < 1e-15);
    assert!(matches!(BanditEnv::new(2.0, 1.0, 0.5, lin()), Err(Error::Unstable(_))));
    assert!(solve_gamma1(1.0, 2.0, 0.0).is_err());
}

#[test]
fn gamma1_matches_bisection_on_random_triples() {
    let mut rng = support::seeded(1);
    for _ in 0..1000 {
        let (lambda, mu, alpha) = support::random_env(&mut rng);
        let g = solve_gamma1(lambda, mu, alpha).unwrap();
        assert!(g > 0.0 && g < 1.0);
        assert!(gamma1_residual(lambda, mu, alpha, g).abs() <= 1e-12);
        assert!((g - support::gamma1_bisect(lambda, mu, alpha)).abs() <= 1e-12);
    }
}

#[test]
fn cost_bar_examples() {
    let e = env(CostFunction::constant(2.0).unwrap());
    let (g, om) = (e.gamma1(), e.one_minus_gamma1());
    for t in [0.0, 1.0, 3.0] {
        let closed = om * (1.0 * 2.0 * t + 2.0 * om * 2.0 / (g * 0.5));
        assert!((e.cost_bar(t).unwrap() - closed).abs() < 1e-12 * closed.max(1.0));
    }
    let z = env(CostFunction::constant(0.0).unwrap());
    assert_eq!(z.cost_bar(2.0).unwrap(), 0.0);
    assert_eq!(cost_bar_mc(&z, 2.0, McOptions::new(100, 1)).unwrap().mean, 0.0);

    let e = env(lin());
    let est = cost_bar_mc(&e, 1.0, McOptions::new(20_000, 2)).unwrap();
    assert!(est.agrees_with(e.cost_bar(1.0).unwrap(), 3.0), "{est:?}");

    // Without arrivals a busy period is one Exp(mu) service.
    let e = BanditEnv::new(0.0, 1.5, 0.7, CostFunction::constant(1.0).unwrap()).unwrap();
    assert!((e.cost_bar(0.4).unwrap() - 0.7 / 2.2).abs() < 1e-14);
}

#[test]
fn gamma_fn_examples() {
    let e = env(CostFunction::constant(2.0).unwrap());
    assert_eq!(e.gamma_fn(0.0).unwrap(), 0.0);
    assert!((e.gamma_fn(3.0).unwrap() - 0.5 / 1.5 * 1.0 * 2.0 * 3.0).abs() < 1e-14);
    let est = gamma_fn_mc(&e, 3.0, McOptions::new(20_000, 3)).unwrap();
    assert!(est.agrees_with(2.0, 3.0), "{est:?}");
    let quiet = BanditEnv::new(0.0, 2.0, 0.5, lin()).unwrap();
    assert_eq!(quiet.gamma_fn(4.0).unwrap(), 0.0);
}

#[test]
fn monte_carlo_agrees_on_random_instances() {
    let mut rng = support::seeded(4);
    for i in 0..8 {
        let (lambda, mu, alpha) = support::random_env(&mut rng);
        let c = support::random_cost(&mut rng);
        let e = BanditEnv::new(lambda, mu, alpha.max(0.2), c.clone()).unwrap();
        let t = rng.gen_range(0.0..3.0);
        let o = McOptions::new(6_000, 40 + i);
        let cb = cost_bar_mc(&e, t, o).unwrap();
        assert!(cb.agrees_with(e.cost_bar(t).unwrap(), 3.5), "{c:?} {cb:?}");
        let gm = gamma_fn_mc(&e, t, o).unwrap();
        assert!(gm.agrees_with(e.gamma_fn(t).unwrap(), 3.5), "{c:?} {gm:?}");
        let l = rng.gen_range(0.0..2.0) * e.whittle_discounted(t).unwrap();
        let st = threshold_cost_mc(&e, t, t, l, o).unwrap();
        assert!(st.agrees_with(e.stationary_threshold_cost(t, l).unwrap(), 3.5), "{c:?} {st:?}");
    }
}

#[test]
fn whittle_examples() {
    let e = env(CostFunction::constant(3.0).unwrap());
    assert_eq!(e.whittle_discounted(0.7).unwrap(), 6.0);
    assert_eq!(e.whittle_discounted_pinned(0.0).unwrap(), 0.0);
    let e = env(lin());
    let expect = 2.0 * (1.5 + e.one_minus_gamma1() / 0.5);
    assert!((e.whittle_discounted(1.5).unwrap() - expect).abs() < 1e-13);

    // As alpha -> 0 the shift rate tends to mu - lambda.
    let c = CostFunction::polynomial(vec![0.0, 0.0, 1.0]).unwrap();
    let limit = 2.0 * c.exp_shift(1.0, 1.0).unwrap();
    let mut last = f64::INFINITY;
    for alpha in [1e-1, 1e-2, 1e-3, 1e-4] {
        let gap = (BanditEnv::new(1.0, 2.0, alpha, c.clone()).unwrap().whittle_discounted(1.0).unwrap() - limit).abs();
        assert!(gap < last && gap < 30.0 * alpha, "alpha={alpha} gap={gap}");
        last = gap;
    }
}

#[test]
fn always_passive_cost_matches_quadrature() {
    let e = env(CostFunction::polynomial(vec![0.5, 1.0]).unwrap());
    let (s0, l) = (0.5, 1.2);
    let est = threshold_cost_mc(&e, f64::INFINITY, s0, l, McOptions::new(50, 5)).unwrap();
    let exact = support::simpson_pieces(
        &|s| (0.5 * support::r(e.cost(), 1.0, s0 + s) - l) * (-0.5 * s).exp(),
        0.0,
        80.0,
        200,
        1e-12,
    );
    assert!((est.mean - exact).abs() < 1e-6 * exact.abs().max(1.0), "{} vs {exact}", est.mean);
    let z = env(CostFunction::constant(0.0).unwrap());
    assert_eq!(threshold_cost_mc(&z, 1.0, 1.0, 0.0, McOptions::new(100, 1)).unwrap().mean, 0.0);
    assert_eq!(z.stationary_threshold_cost(1.0, 0.0).unwrap(), 0.0);
}

#[test]
fn value_function_matches_monte_carlo() {
    let e = env(lin());
    let t0 = 1.0;
    let l = e.whittle_discounted(t0).unwrap();
    let v0 = e.value_at_index(t0).unwrap();
    assert!((v0 - e.stationary_threshold_cost(t0, l).unwrap()).abs() < 1e-12);
    for (k, t) in [0.2, 1.0, 2.5].into_iter().enumerate() {
        let est = threshold_cost_mc(&e, t0, t, l, McOptions::new(8_000, 60 + k as u64)).unwrap();
        let v = e.threshold_value(t, t0).unwrap();
        assert!(est.agrees_with(v, 3.0), "t={t} {est:?} vs {v}");
    }
}

#[test]
fn finite_difference_stationarity() {
    let e = env(lin());
    let fd = whittle_fd_check(&e, 1.0, 1e-2, None, McOptions::new(4_000, 7)).unwrap();
    assert!(fd.within(3.0), "{fd:?}");
    assert!(fd.exact.abs() < 1e-2 * fd.l);
    let wrong = whittle_fd_check(&e, 1.0, 1e-2, Some(2.0 * fd.l), McOptions::new(4_000, 7)).unwrap();
    assert!(!wrong.within(3.0), "{wrong:?}");

    let c = env(CostFunction::constant(1.0).unwrap());
    let fd = whittle_fd_check(&c, 1.0, 1e-2, None, McOptions::new(2_000, 8)).unwrap();
    assert!(fd.within(3.0), "{fd:?}");
    assert!(whittle_fd_check(&e, 0.0, 1e-2, None, McOptions::new(10, 1)).is_err());
}

#[test]
fn closed_form_index_solves_the_stationarity_condition() {
    let mut rng = support::seeded(8);
    for _ in 0..25 {
        let (lambda, mu, alpha) = support::random_env(&mut rng);
        let c = support::random_cost(&mut rng);
        let e = BanditEnv::new(lambda, mu, alpha, c.clone()).unwrap();
        let t0 = rng.gen_range(0.05..4.0);
        let w = e.whittle_discounted(t0).unwrap();
        let oracle = support::whittle_derivative_form(lambda, mu, alpha, &c, t0);
        assert!((w - oracle).abs() <= 1e-7 * w.abs().max(1.0), "{c:?} t0={t0}: {w} vs {oracle}");
    }
}

#[test]
fn expectation_identities_hold() {
    let mut rng = support::seeded(9);
    for _ in 0..20 {
        let (lambda, mu, alpha) = support::random_env(&mut rng);
        let c = support::random_cost(&mut rng);
        let t = rng.gen_range(0.0..4.0);
        let err = support::shift_identity_errors(lambda, mu, alpha, &c, t);
        assert!(err.iter().all(|&x| x <= 1e-4), "{c:?} λ={lambda} μ={mu} α={alpha} t={t}: {err:?}");
    }
}

#[test]
fn hjb_sign_pattern_and_value_iteration() {
    let cases = [
        (lin(), 1.0),
        (CostFunction::smoothed_step(10.0, 2.0, 0.02).unwrap(), 1.5),
        (CostFunction::polynomial(vec![0.0, 0.0, 1.0]).unwrap(), 1.0),
        (CostFunction::polynomial(vec![1.0, 2.0]).unwrap(), 2.0),
    ];
    for (c, t0) in cases {
        let e = env(c.clone());
        let tol = e.hjb_tolerance(t0).unwrap();
        for t in age_grid(3.0 * t0, 301) {
            let m = e.hjb_margin(t, t0).unwrap();
            if t < t0 {
                assert!(m <= tol, "{c:?} t={t} m={m}");
            } else if t > t0 {
                assert!(m >= -tol, "{c:?} t={t} m={m}");
            }
        }
        assert!(e.hjb_margin(t0, t0).unwrap().abs() <= tol);
        let l = e.whittle_discounted(t0).unwrap();
        let vi = support::value_iteration(1.0, 2.0, 0.5, &c, l, t0 + 20.0, 1e-2);
        let tie = |t: f64| (support::discounted_index(1.0, 2.0, 0.5, &c, t) - l).abs() <= 1e-6 * l;
        let share = support::action_agreement(&vi, t0, tie);
        assert!(share.raw >= 0.99, "{c:?}: {}", share.raw);
    }
}

#[test]
fn low_compensation_makes_always_active_optimal() {
    let c = CostFunction::polynomial(vec![0.5, 1.0]).unwrap();
    let e = env(c.clone());
    let l = 0.9 * e.whittle_discounted(0.0).unwrap();
    let vi = support::value_iteration(1.0, 2.0, 0.5, &c, l, 20.0, 1e-2);
    assert!(vi.passive.iter().skip(1).all(|&p| !p));
}

#[test]
fn indexability_across_families() {
    let mut rng = support::seeded(10);
    let grid = age_grid(8.0, 801);
    for _ in 0..20 {
        let (lambda, mu, alpha) = support::random_env(&mut rng);
        let e = BanditEnv::new(lambda, mu, alpha, support::random_cost(&mut rng)).unwrap();
        let rep = indexability_scan(&e, &grid).unwrap();
        assert!(rep.pass(), "{:?}", rep.violations.first());
        assert_eq!(rep.points, 801);
    }
    let flat = env(CostFunction::constant(1.0).unwrap());
    let rep = indexability_scan(&flat, &grid).unwrap();
    assert!(rep.pass());
    assert!(indexability_scan(&flat, &[1.0, 1.0]).is_err());
}

#[test]
fn discounted_cost_approaches_the_queue_average() {
    let c = CostFunction::constant(1.0).unwrap();
    let mut cfg = SystemConfig::new(vec![ClassConfig::new(0.5, 1.0, c.clone()).unwrap()], 1e5);
    cfg.replications = 10;
    let avg = simulate(&cfg, &Fcfs::new(1)).unwrap().mean_cost;
    let tr = discount_limit_check(0.5, 1.0, &c, &[1.0, 0.3, 0.1, 0.03, 0.003], avg).unwrap();
    assert!(tr.converging());
    assert!(tr.points[3].gap < tr.points[1].gap);
    assert!(tr.points[4].gap < 0.05);
    let zero = discount_limit_check(0.5, 1.0, &CostFunction::constant(0.0).unwrap(), &[1.0, 0.1], 0.0).unwrap();
    assert!(zero.points.iter().all(|p| p.discounted == 0.0 && p.gap == 0.0));
    assert!(discount_limit_check(0.5, 1.0, &c, &[0.1, 1.0], avg).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn shift_rate_is_at_least_the_drain_rate(lambda in 0.0..5.0f64, gap in 0.01..5.0f64, alpha in 1e-6..10.0f64) {
        let mu = lambda + gap;
        let e = BanditEnv::new(lambda, mu, alpha, CostFunction::constant(1.0).unwrap()).unwrap();
        prop_assert!(e.theta() >= gap * (1.0 - 1e-12));
        prop_assert!(e.gamma2() >= 0.0 && e.gamma2() < 1.0);
    }

    #[test]
    fn cost_bar_slope_matches_difference(c in support::arb_cost(), t in 0.1..4.0f64) {
        let e = env(c.clone());
        let h = 1e-5;
        let kinks = c.features();
        prop_assume!(kinks.iter().all(|k| (k - t).abs() > 10.0 * h));
        let fd = (e.cost_bar(t + h).unwrap() - e.cost_bar(t - h).unwrap()) / (2.0 * h);
        let d = e.cost_bar_slope(t).unwrap();
        prop_assert!((fd - d).abs() <= 1e-5 * d.abs().max(1.0), "{} vs {}", d, fd);
    }
}
