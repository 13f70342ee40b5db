//! Catalogue objectives: values, gradients, minimizers, certificates, and
//! the sampled re-verification of the growth inequalities.

use approx::assert_relative_eq;

use hamdesc_core::kinetic::phi_eval;
use hamdesc_core::objective::{
    builtin, certify_growth, nonconvex1d, norm_four, phi_power, power1d,
    quadratic, quartic2d, random_spd_matrix, BuiltinParams, ObjectiveError,
    ObjectiveSpec,
};

fn finite_diff_grad(spec: &ObjectiveSpec, x: &[f64]) -> Vec<f64> {
    let h = 1e-6;
    (0..x.len())
        .map(|i| {
            let mut plus = x.to_vec();
            let mut minus = x.to_vec();
            plus[i] += h;
            minus[i] -= h;
            (spec.eval(&plus) - spec.eval(&minus)) / (2.0 * h)
        })
        .collect()
}

#[test]
fn quartic2d_values_and_minimum() {
    let f = quartic2d();
    assert_eq!(f.dim(), 2);
    assert_relative_eq!(f.eval(&[1.0, 1.0]), 16.0, max_relative = 1e-15);
    assert_eq!(f.eval(&[0.0, 0.0]), 0.0);
    assert_eq!(f.x_star().unwrap(), &[0.0, 0.0]);
    assert_eq!(f.f_star().unwrap(), 0.0);
    assert!(f.convex());

    let g = f.grad(&[1.0, -0.5]);
    let fd = finite_diff_grad(&f, &[1.0, -0.5]);
    assert_relative_eq!(g[0], fd[0], max_relative = 1e-6);
    assert_relative_eq!(g[1], fd[1], max_relative = 1e-6);

    let cert = f.certificate().unwrap();
    assert_eq!((cert.b, cert.big_b, cert.q), (4.0, 4.0, 4.0));
    assert!(cert.l_f.is_some() && cert.d_f.is_some());
}

#[test]
fn quartic2d_hessian_vector_product() {
    let f = quartic2d();
    let x = [0.7, -0.2];
    let v = [0.3, 1.1];
    let hv = f.hvp(&x, &v).expect("quartic has a closed Hessian");
    // Column-by-column finite differences of the gradient.
    let h = 1e-6;
    let xp: Vec<f64> = x.iter().zip(&v).map(|(xi, vi)| xi + h * vi).collect();
    let xm: Vec<f64> = x.iter().zip(&v).map(|(xi, vi)| xi - h * vi).collect();
    let gp = f.grad(&xp);
    let gm = f.grad(&xm);
    for i in 0..2 {
        assert_relative_eq!(hv[i], (gp[i] - gm[i]) / (2.0 * h), max_relative = 1e-5);
    }
}

#[test]
fn power1d_matches_closed_form() {
    let f = power1d(4.0).unwrap();
    assert_relative_eq!(f.eval(&[2.0]), 4.0, max_relative = 1e-15);
    assert_relative_eq!(f.grad(&[2.0])[0], 8.0, max_relative = 1e-15);
    assert_relative_eq!(f.grad(&[-2.0])[0], -8.0, max_relative = 1e-15);
    assert_eq!(f.grad(&[0.0])[0], 0.0);
    // The Hessian |x|^{b-2}(b-1) exists for b >= 2 only.
    assert!(f.has_hvp());
    assert!(!power1d(1.5).unwrap().has_hvp());
    assert!(power1d(1.0).is_err());

    let cert = f.certificate().unwrap();
    assert_eq!((cert.b, cert.big_b, cert.mu, cert.big_l), (4.0, 4.0, 1.0, 3.0));
}

#[test]
fn phi_power_is_radial_profile() {
    let f = phi_power(2.0, 8.0, 3).unwrap();
    let x = [1.0, -2.0, 2.0];
    let r = 3.0; // l2 norm of x
    assert_relative_eq!(
        f.eval(&x),
        phi_eval(2.0, 8.0, r).unwrap(),
        max_relative = 1e-14
    );
    let g = f.grad(&x);
    let fd = finite_diff_grad(&f, &x);
    for i in 0..3 {
        assert_relative_eq!(g[i], fd[i], max_relative = 1e-5);
    }
    // The (2, 8) pairing ships a calibrated certificate.
    let cert = f.certificate().unwrap();
    assert_eq!((cert.b, cert.big_b), (2.0, 8.0));
    // An uncalibrated mixed pairing does not.
    assert!(phi_power(2.0, 3.0, 2).unwrap().certificate().is_none());
    // Equal powers have an exact certificate.
    assert!(phi_power(4.0, 4.0, 2).unwrap().certificate().is_some());
}

#[test]
fn norm_four_value_and_gradient() {
    let f = norm_four(2);
    assert_relative_eq!(
        f.eval(&[1.0, 1.0]),
        std::f64::consts::SQRT_2 / 2.0,
        max_relative = 1e-14
    );
    let x = [0.5, -1.25];
    let fd = finite_diff_grad(&f, &x);
    let g = f.grad(&x);
    assert_relative_eq!(g[0], fd[0], max_relative = 1e-5);
    assert_relative_eq!(g[1], fd[1], max_relative = 1e-5);
    assert!(!f.has_hvp());
    // mu = L = 1 is exact for the l4 pairing in every dimension.
    let cert = f.certificate().unwrap();
    assert_eq!((cert.mu, cert.big_l, cert.q), (1.0, 1.0, 4.0));
}

#[test]
fn quadratic_objective_from_matrix() {
    let m = vec![vec![2.0, 0.0], vec![0.0, 0.5]];
    let f = quadratic(&m).unwrap();
    assert_relative_eq!(f.eval(&[1.0, 2.0]), 2.0, max_relative = 1e-14);
    let g = f.grad(&[1.0, 2.0]);
    assert_relative_eq!(g[0], 2.0, max_relative = 1e-12);
    assert_relative_eq!(g[1], 1.0, max_relative = 1e-12);
    assert_eq!(f.x_star().unwrap(), &[0.0, 0.0]);

    // The certificate brackets the extreme eigenvalues with a safety margin.
    let cert = f.certificate().unwrap();
    assert_eq!((cert.b, cert.big_b, cert.q), (2.0, 2.0, 2.0));
    assert!(cert.mu <= 0.5 && cert.mu >= 0.4);
    assert!(cert.big_l >= 2.0 && cert.big_l <= 2.2);

    // Indefinite and asymmetric matrices are rejected.
    assert!(quadratic(&[vec![1.0, 2.0], vec![2.0, 1.0]]).is_err());
    assert!(quadratic(&[vec![1.0, 0.3], vec![0.0, 1.0]]).is_err());
}

#[test]
fn nonconvex1d_minimum_and_certificate() {
    let f = nonconvex1d();
    let xs = f.x_star().unwrap()[0];
    assert_relative_eq!(xs, -1.0298665293222589, max_relative = 1e-14);
    // The shift centers the minimum exactly at zero.
    assert!(f.eval(&[xs]).abs() < 1e-15);
    assert!(f.grad(&[xs])[0].abs() < 1e-12);
    assert!(!f.convex());
    let cert = f.certificate().unwrap();
    assert_eq!(cert.sigma_power, Some(2.0));
    assert_eq!(cert.d_f_smooth, Some(1.5));
    // Second derivative 1/2 - sin(x) is bounded by 3/2 everywhere; check
    // the hvp agrees at a few points.
    for &x in &[-3.0, 0.0, 2.0] {
        let hv = f.hvp(&[x], &[1.0]).unwrap()[0];
        assert_relative_eq!(hv, 0.5 - x.sin(), max_relative = 1e-12);
        assert!(hv.abs() <= 1.5 + 1e-12);
    }
}

#[test]
fn builtin_dispatch_and_errors() {
    let names = ["quartic2d", "power1d", "phiPower", "normFour", "quadratic", "nonconvex1d"];
    let params = BuiltinParams {
        b: Some(2.0),
        big_b: Some(8.0),
        dim: Some(3),
        matrix: Some(vec![vec![1.0, 0.0], vec![0.0, 2.0]]),
    };
    for name in names {
        let spec = builtin(name, &params).unwrap();
        assert!(spec.dim() > 0);
    }
    assert!(matches!(
        builtin("rosenbrock", &params),
        Err(ObjectiveError::UnknownBuiltin(_))
    ));
    assert!(matches!(
        builtin("power1d", &BuiltinParams::default()),
        Err(ObjectiveError::MissingParameter { name: "power1d", param: "b" })
    ));
    assert!(matches!(
        builtin("phiPower", &BuiltinParams { b: Some(2.0), ..Default::default() }),
        Err(ObjectiveError::MissingParameter { name: "phiPower", .. })
    ));
}

#[test]
fn suboptimality_needs_a_minimum() {
    let f = quartic2d();
    assert_relative_eq!(f.suboptimality(&[1.0, 1.0]).unwrap(), 16.0);
    let anon = ObjectiveSpec::new(
        "anon",
        1,
        Box::new(|x: &[f64]| x[0] * x[0]),
        Box::new(|x: &[f64]| vec![2.0 * x[0]]),
    );
    assert!(matches!(
        anon.suboptimality(&[1.0]),
        Err(ObjectiveError::MinimumUnknown)
    ));
}

#[test]
fn growth_certificates_hold_on_samples() {
    let radii = [1e-3, 1e-2, 0.1, 1.0, 10.0, 100.0];
    let cases: Vec<(&str, ObjectiveSpec)> = vec![
        ("quartic2d", quartic2d()),
        ("power1d(2)", power1d(2.0).unwrap()),
        ("power1d(4)", power1d(4.0).unwrap()),
        ("phiPower(2,8)", phi_power(2.0, 8.0, 1).unwrap()),
        ("normFour(3)", norm_four(3)),
        ("nonconvex1d", nonconvex1d()),
    ];
    for (name, spec) in &cases {
        let report = certify_growth(spec, 200, &radii).unwrap();
        assert!(
            report.passed,
            "{name}: lower violation {:.3e}, gradient violation {:.3e}",
            report.max_lower_violation, report.max_gradient_violation
        );
        assert!(report.samples >= 200 * radii.len() - 10);
    }
}

#[test]
fn growth_certificate_holds_for_random_quadratic() {
    let m = random_spd_matrix(&[0.1, 1.0, 5.0], 7);
    let f = quadratic(&m).unwrap();
    let report = certify_growth(&f, 150, &[1e-2, 0.1, 1.0, 10.0]).unwrap();
    assert!(
        report.passed,
        "lower {:.3e}, gradient {:.3e}",
        report.max_lower_violation, report.max_gradient_violation
    );
}

#[test]
fn certify_growth_requires_metadata() {
    let anon = ObjectiveSpec::new(
        "anon",
        1,
        Box::new(|x: &[f64]| x[0] * x[0]),
        Box::new(|x: &[f64]| vec![2.0 * x[0]]),
    );
    assert!(matches!(
        certify_growth(&anon, 10, &[1.0]),
        Err(ObjectiveError::MissingCertificate)
    ));
}

#[test]
fn certify_growth_flags_a_wrong_certificate() {
    // Claim twice the true lower-growth scale on x^2/2: the sampled check
    // must fail rather than rubber-stamp it.
    let bogus = power1d(2.0).unwrap();
    let mut cert = bogus.certificate().unwrap().clone();
    cert.mu = 2.1;
    let rigged = ObjectiveSpec::new(
        "rigged",
        1,
        Box::new(|x: &[f64]| 0.5 * x[0] * x[0]),
        Box::new(|x: &[f64]| vec![x[0]]),
    )
    .with_minimum(vec![0.0], 0.0)
    .with_certificate(cert);
    let report = certify_growth(&rigged, 50, &[1.0]).unwrap();
    assert!(!report.passed);
    assert!(report.max_lower_violation > 1.0);
}

#[test]
fn random_spd_matrix_is_symmetric_with_prescribed_spectrum() {
    let eigs = [0.001, 0.5, 1.0, 3.0];
    let m = random_spd_matrix(&eigs, 42);
    for i in 0..4 {
        for j in 0..4 {
            assert_eq!(m[i][j], m[j][i], "exact symmetry after averaging");
        }
    }
    // Trace is basis-independent.
    let trace: f64 = (0..4).map(|i| m[i][i]).sum();
    assert_relative_eq!(trace, eigs.iter().sum::<f64>(), max_relative = 1e-12);
    // Reproducible for a seed, different across seeds.
    assert_eq!(m, random_spd_matrix(&eigs, 42));
    assert_ne!(m, random_spd_matrix(&eigs, 43));
    // And actually positive definite as far as the quadratic builtin cares.
    assert!(quadratic(&m).is_ok());
}
