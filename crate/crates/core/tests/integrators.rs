//! Discrete schemes: single-step arithmetic against hand-computed values,
//! the implicit subproblem's stationarity, and the run loop's stopping,
//! recording, and energy-monotonicity bookkeeping.

use approx::assert_relative_eq;

use hamdesc_core::integrators::{
    run, step_classical_momentum, step_explicit1, step_explicit2,
    step_gradient_descent, step_implicit, IntegratorConfig, IntegratorError,
    Method, State, StopCause, StopRule,
};
use hamdesc_core::kinetic::{
    KineticEnergy, NormDescriptor, PowerKinetic, QuadraticKinetic,
};
use hamdesc_core::objective::{phi_power, power1d, quadratic, quartic2d};

fn scalar_quadratic() -> hamdesc_core::objective::ObjectiveSpec {
    power1d(2.0).unwrap()
}

#[test]
fn explicit1_single_step_golden() {
    let f = scalar_quadratic();
    let k = PowerKinetic::classical();
    let next = step_explicit1(&f, &k, 0.1, 0.5, &State::new(vec![1.0], vec![0.0]));
    assert_relative_eq!(next.p[0], -0.09523809523809523, max_relative = 1e-15);
    assert_relative_eq!(next.x[0], 0.9904761904761905, max_relative = 1e-15);
}

#[test]
fn explicit2_single_step_golden() {
    let f = scalar_quadratic();
    let k = PowerKinetic::classical();
    let next = step_explicit2(&f, &k, 0.1, 0.5, &State::new(vec![1.0], vec![0.0]));
    assert_relative_eq!(next.x[0], 1.0, max_relative = 1e-15);
    assert_relative_eq!(next.p[0], -0.1, max_relative = 1e-15);
}

#[test]
fn implicit_single_step_golden() {
    let f = scalar_quadratic();
    let k = PowerKinetic::classical();
    let next = step_implicit(&f, &k, 0.1, 0.5, &State::new(vec![1.0], vec![0.0]), 1e-12, 200)
        .unwrap();
    assert_relative_eq!(next.p[0], -0.09433962264150944, max_relative = 1e-10);
    assert_relative_eq!(next.x[0], 0.9905660377358491, max_relative = 1e-10);
}

#[test]
fn explicit2_steep_kinetic_golden() {
    // With grad k(0) = 0 the position does not move, so the momentum picks
    // up exactly -eps * f'(1) = -0.1 * 2^{3/4}.
    let f = phi_power(8.0 / 7.0, 2.0, 1).unwrap();
    let k = PowerKinetic::new(8.0, 2.0, NormDescriptor::euclidean()).unwrap();
    let next = step_explicit2(&f, &k, 0.1, 0.5, &State::new(vec![1.0], vec![0.0]));
    assert_relative_eq!(next.x[0], 1.0, max_relative = 1e-15);
    assert_relative_eq!(next.p[0], -0.16817928305074288, max_relative = 1e-14);
}

#[test]
fn momentum_is_explicit1_with_classical_kinetic() {
    let f = quartic2d();
    let k = PowerKinetic::classical();
    let s = State::new(vec![0.8, -0.4], vec![0.3, 0.1]);
    let a = step_classical_momentum(&f, 0.05, 0.3, &s);
    let b = step_explicit1(&f, &k, 0.05, 0.3, &s);
    assert_eq!(a.x, b.x);
    assert_eq!(a.p, b.p);
}

#[test]
fn gradient_descent_keeps_momentum_zero() {
    let f = scalar_quadratic();
    let s = step_gradient_descent(&f, 0.25, &State::new(vec![2.0], vec![9.0]));
    assert_relative_eq!(s.x[0], 1.5, max_relative = 1e-15);
    assert_eq!(s.p[0], 0.0);
}

#[test]
fn implicit_step_satisfies_its_defining_equations() {
    // Newton path: quartic objective and matched power kinetic, both with
    // Hessian products.
    let f = quartic2d();
    let k = PowerKinetic::new(4.0 / 3.0, 4.0 / 3.0, NormDescriptor::new(4.0 / 3.0).unwrap())
        .unwrap();
    let (eps, gam) = (0.02, 0.5);
    let s = State::new(vec![1.0, 1.0], vec![0.0, 0.0]);
    let next = step_implicit(&f, &k, eps, gam, &s, 1e-11, 200).unwrap();

    let delta = 1.0 / (1.0 + gam * eps);
    let gfx = f.grad(&next.x);
    // p+ = delta p - eps delta grad f(x+)
    for i in 0..2 {
        let expect = delta * (s.p[i] - eps * gfx[i]);
        assert_relative_eq!(next.p[i], expect, max_relative = 1e-9, epsilon = 1e-12);
    }
    // x+ = x + eps grad k(p+)
    let v = k.grad(&next.p).unwrap();
    for i in 0..2 {
        assert_relative_eq!(
            next.x[i],
            s.x[i] + eps * v[i],
            max_relative = 1e-8,
            epsilon = 1e-12
        );
    }
}

#[test]
fn implicit_step_fixed_point_path_without_hessians() {
    // normFour has no Hessian product, so the subsolver falls back to the
    // damped fixed-point map; the defining equations must still hold.
    let f = hamdesc_core::objective::norm_four(2);
    let k = PowerKinetic::classical();
    let (eps, gam) = (0.05, 0.5);
    let s = State::new(vec![1.0, -0.5], vec![0.1, 0.2]);
    let next = step_implicit(&f, &k, eps, gam, &s, 1e-11, 500).unwrap();
    let delta = 1.0 / (1.0 + gam * eps);
    let gfx = f.grad(&next.x);
    for i in 0..2 {
        let p_expect = delta * (s.p[i] - eps * gfx[i]);
        assert_relative_eq!(next.p[i], p_expect, max_relative = 1e-8, epsilon = 1e-12);
        assert_relative_eq!(
            next.x[i],
            s.x[i] + eps * next.p[i],
            max_relative = 1e-8,
            epsilon = 1e-12
        );
    }
}

#[test]
fn implicit_quadratic_pair_is_one_exact_solve() {
    // Quadratic objective + quadratic kinetic: the subproblem is linear, so
    // the residual collapses to machine precision immediately.
    let m = vec![vec![3.0, 1.0], vec![1.0, 2.0]];
    let f = quadratic(&m).unwrap();
    let k = QuadraticKinetic::new(&m).unwrap();
    let s = State::new(vec![1.0, -1.0], vec![0.5, 0.0]);
    let next = step_implicit(&f, &k, 0.1, 0.5, &s, 1e-14, 50).unwrap();
    let delta: f64 = 1.0 / 1.05;
    let gfx = f.grad(&next.x);
    let expect_p: Vec<f64> =
        (0..2).map(|i| delta * (s.p[i] - 0.1 * gfx[i])).collect();
    let v = KineticEnergy::velocity(&k, &expect_p);
    for i in 0..2 {
        assert_relative_eq!(next.p[i], expect_p[i], max_relative = 1e-12);
        assert_relative_eq!(next.x[i], s.x[i] + 0.1 * v[i], max_relative = 1e-12);
    }
}

#[test]
fn run_stops_on_suboptimality_tolerance() {
    let f = scalar_quadratic();
    let k = PowerKinetic::classical();
    let cfg = IntegratorConfig::new(Method::Implicit, 0.2, 0.5, 10_000);
    let out = run(&f, &k, &cfg, State::at_rest(vec![1.0]), StopRule::SuboptTol(1e-8))
        .unwrap();
    assert!(matches!(out.stop_cause, StopCause::SuboptTol { .. }));
    let last = out.records.last().unwrap();
    assert!(last.suboptimality.unwrap() <= 1e-8);
    assert_eq!(last.iter, out.iters);
    // Energy never rose.
    assert!(out.h_violation_iters.is_empty());
    assert!(out.warnings.is_empty());
}

#[test]
fn run_stops_on_gradient_tolerance() {
    let f = scalar_quadratic();
    let k = PowerKinetic::classical();
    let cfg = IntegratorConfig::new(Method::Explicit1, 0.1, 0.5, 10_000);
    let out = run(&f, &k, &cfg, State::at_rest(vec![1.0]), StopRule::GradTol(1e-6))
        .unwrap();
    assert!(matches!(out.stop_cause, StopCause::GradTol { .. }));
    let last = out.records.last().unwrap();
    assert!(f.grad(&last.x)[0].abs() <= 1e-6);
}

#[test]
fn run_honors_iteration_budget_and_stride() {
    let f = scalar_quadratic();
    let k = PowerKinetic::classical();
    let cfg = IntegratorConfig::new(Method::Explicit1, 0.05, 0.5, 100)
        .with_record_stride(30);
    let out = run(&f, &k, &cfg, State::at_rest(vec![1.0]), StopRule::Iters).unwrap();
    assert_eq!(out.stop_cause, StopCause::MaxIters);
    assert_eq!(out.iters, 100);
    let iters: Vec<usize> = out.records.iter().map(|r| r.iter).collect();
    // Stride samples plus the forced final record.
    assert_eq!(iters, vec![0, 30, 60, 90, 100]);
    // Suboptimality and energy are filled since the minimum is known.
    assert!(out.records.iter().all(|r| r.h.is_some() && r.suboptimality.is_some()));
}

#[test]
fn run_flags_divergence_as_a_result_not_an_error() {
    // Gradient descent on x^4/4 blows up from x = 5 at a huge step.
    let f = power1d(4.0).unwrap();
    let k = PowerKinetic::classical();
    let cfg = IntegratorConfig::new(Method::GradientDescent, 0.5, 0.0, 1000);
    let out = run(&f, &k, &cfg, State::at_rest(vec![5.0]), StopRule::Iters).unwrap();
    assert!(matches!(out.stop_cause, StopCause::NonFinite { .. }));
    assert!(out.iters < 1000);
}

#[test]
fn run_warns_when_explicit2_damping_is_overrun() {
    let f = scalar_quadratic();
    let k = PowerKinetic::classical();
    let cfg = IntegratorConfig::new(Method::Explicit2, 2.5, 0.5, 5);
    let out = run(&f, &k, &cfg, State::at_rest(vec![1.0]), StopRule::Iters).unwrap();
    assert!(
        out.warnings.iter().any(|w| w.contains("epsilon*gamma")),
        "expected an overdamping warning, got {:?}",
        out.warnings
    );
}

#[test]
fn run_validates_configuration() {
    let f = scalar_quadratic();
    let k = PowerKinetic::classical();
    let good = IntegratorConfig::new(Method::Explicit1, 0.1, 0.5, 10);

    let wrong_dim = run(&f, &k, &good, State::at_rest(vec![1.0, 2.0]), StopRule::Iters);
    assert!(matches!(
        wrong_dim,
        Err(IntegratorError::DimensionMismatch { expected: 1, got: 2 })
    ));

    let bad_eps = IntegratorConfig::new(Method::Explicit1, -0.1, 0.5, 10);
    assert!(matches!(
        run(&f, &k, &bad_eps, State::at_rest(vec![1.0]), StopRule::Iters),
        Err(IntegratorError::BadConfig(_))
    ));

    let bad_stride = IntegratorConfig::new(Method::Explicit1, 0.1, 0.5, 10)
        .with_record_stride(0);
    assert!(matches!(
        run(&f, &k, &bad_stride, State::at_rest(vec![1.0]), StopRule::Iters),
        Err(IntegratorError::BadConfig(_))
    ));

    // A suboptimality stop needs a known minimum.
    let anon = hamdesc_core::objective::ObjectiveSpec::new(
        "anon",
        1,
        Box::new(|x: &[f64]| x[0] * x[0]),
        Box::new(|x: &[f64]| vec![2.0 * x[0]]),
    );
    assert!(matches!(
        run(&anon, &k, &good, State::at_rest(vec![1.0]), StopRule::SuboptTol(1e-6)),
        Err(IntegratorError::MinimumUnknown)
    ));

    // A non-differentiable kinetic cannot be stepped.
    let a1 = PowerKinetic::new(1.0, 2.0, NormDescriptor::euclidean()).unwrap();
    assert!(matches!(
        run(&f, &a1, &good, State::at_rest(vec![1.0]), StopRule::Iters),
        Err(IntegratorError::KineticNotReady(_))
    ));
}

#[test]
fn relativistic_velocity_stays_below_light_speed() {
    // The saturating kinetic bounds |x_{i+1} - x_i| <= eps regardless of
    // how steep the objective is.
    let f = power1d(4.0).unwrap();
    let k = PowerKinetic::relativistic();
    let eps = 0.05;
    let cfg = IntegratorConfig::new(Method::Explicit1, eps, 0.5, 2000);
    let out = run(&f, &k, &cfg, State::at_rest(vec![5.0]), StopRule::Iters).unwrap();
    assert_eq!(out.stop_cause, StopCause::MaxIters);
    for pair in out.records.windows(2) {
        if pair[1].iter != pair[0].iter + 1 {
            continue;
        }
        let dx = (pair[1].x[0] - pair[0].x[0]).abs();
        assert!(dx <= eps * (1.0 + 1e-12), "step {} moved {dx}", pair[1].iter);
    }
}

#[test]
fn method_names_round_trip() {
    let methods = [
        (Method::Explicit1, "explicit1"),
        (Method::Explicit2, "explicit2"),
        (Method::Implicit, "implicit"),
        (Method::ClassicalMomentum, "momentum"),
        (Method::GradientDescent, "gd"),
    ];
    for (m, name) in methods {
        assert_eq!(m.name(), name);
    }
}
