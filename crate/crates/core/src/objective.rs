//! Objective functions with exact minimizer metadata and growth certificates.
//!
//! A [`GrowthCertificate`] records the constants of the two-sided growth
//! conditions an objective satisfies around its minimizer:
//!
//! ```text
//! f(x) − f(x⋆) ≥ μ φ_b^B(‖x − x⋆‖_q)          (lower growth)
//! φ_a^A(‖∇f(x)‖_{q'}) ≤ L (f(x) − f(x⋆))       (gradient growth)
//! ```
//!
//! with a = b/(b−1), A = B/(B−1). These constants feed the step-size bounds
//! and rate certificates in [`crate::analysis`]. Certificates attached to the
//! builtin catalogue are exact where a closed form exists and otherwise
//! frozen from direction sweeps with a safety margin; `certify_growth`
//! re-verifies them by sampling.

use crate::kinetic::{conjugate_exponent, phi_eval, NormDescriptor};
use crate::linalg::{self, DenseMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ObjectiveError {
    #[error("unknown builtin objective `{0}`")]
    UnknownBuiltin(String),
    #[error("builtin `{name}` needs parameter `{param}`")]
    MissingParameter { name: &'static str, param: &'static str },
    #[error("bad parameter for `{name}`: {reason}")]
    BadParameter { name: &'static str, reason: String },
    #[error("suboptimality needs a known optimal value")]
    MinimumUnknown,
    #[error("growth verification needs a certificate")]
    MissingCertificate,
    #[error("matrix must be square, symmetric, and positive definite")]
    BadMatrix,
}

/// Growth constants for an objective, stated w.r.t. the primal norm ‖·‖_q.
///
/// `q` names that norm's exponent (gradients are measured in the conjugate
/// ℓ_{q'}); the Euclidean pairing has q = 2. Optional fields carry the
/// Hessian-level constants used by the explicit methods: `l_f`/`d_f` for the
/// scheme that differentiates f twice, `n` for the norm-Hessian coupling,
/// and `sigma_power`/`d_f_smooth` for the uniform-smoothness condition the
/// non-convex analysis needs.
#[derive(Debug, Clone, PartialEq)]
pub struct GrowthCertificate {
    /// Body power b > 1 of the lower growth profile φ_b^B.
    pub b: f64,
    /// Tail power B > 1 of the lower growth profile.
    pub big_b: f64,
    /// Lower growth scale μ > 0.
    pub mu: f64,
    /// Gradient growth scale L > 0.
    pub big_l: f64,
    /// Hessian scale: λ_max(∇²f(x)) ≤ L_f (φ_{b/2}^{B/2})-type control.
    pub l_f: Option<f64>,
    /// Hessian conjugate budget paired with `l_f`.
    pub d_f: Option<f64>,
    /// Norm-Hessian constant (q̂ − 1 for an ℓ_q̂ kinetic norm with q̂ ≥ 2).
    pub n: Option<f64>,
    /// Uniform-smoothness exponent for the non-convex descent condition.
    pub sigma_power: Option<f64>,
    /// Uniform-smoothness scale for the non-convex descent condition.
    pub d_f_smooth: Option<f64>,
    /// Primal norm exponent the certificate is stated in.
    pub q: f64,
}

type EvalFn = Box<dyn Fn(&[f64]) -> f64 + Send + Sync>;
type GradFn = Box<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;
type HvpFn = Box<dyn Fn(&[f64], &[f64]) -> Vec<f64> + Send + Sync>;

/// An objective f with gradient, optional Hessian-vector product, and
/// optional minimizer/certificate metadata. Immutable after construction.
pub struct ObjectiveSpec {
    name: String,
    dim: usize,
    eval_fn: EvalFn,
    grad_fn: GradFn,
    hvp_fn: Option<HvpFn>,
    x_star: Option<Vec<f64>>,
    f_star: Option<f64>,
    certificate: Option<GrowthCertificate>,
    convex: bool,
}

impl std::fmt::Debug for ObjectiveSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ObjectiveSpec")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("has_hvp", &self.hvp_fn.is_some())
            .field("x_star", &self.x_star)
            .field("f_star", &self.f_star)
            .field("certificate", &self.certificate)
            .field("convex", &self.convex)
            .finish()
    }
}

impl ObjectiveSpec {
    pub fn new(
        name: impl Into<String>,
        dim: usize,
        eval: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        grad: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        ObjectiveSpec {
            name: name.into(),
            dim,
            eval_fn: Box::new(eval),
            grad_fn: Box::new(grad),
            hvp_fn: None,
            x_star: None,
            f_star: None,
            certificate: None,
            convex: true,
        }
    }

    pub fn with_hvp(
        mut self,
        hvp: impl Fn(&[f64], &[f64]) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        self.hvp_fn = Some(Box::new(hvp));
        self
    }

    pub fn with_minimum(mut self, x_star: Vec<f64>, f_star: f64) -> Self {
        self.x_star = Some(x_star);
        self.f_star = Some(f_star);
        self
    }

    pub fn with_certificate(mut self, certificate: GrowthCertificate) -> Self {
        self.certificate = Some(certificate);
        self
    }

    pub fn with_convexity(mut self, convex: bool) -> Self {
        self.convex = convex;
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        (self.eval_fn)(x)
    }

    pub fn grad(&self, x: &[f64]) -> Vec<f64> {
        (self.grad_fn)(x)
    }

    /// ∇²f(x)·v, when the objective carries a Hessian-vector product.
    pub fn hvp(&self, x: &[f64], v: &[f64]) -> Option<Vec<f64>> {
        self.hvp_fn.as_ref().map(|h| h(x, v))
    }

    pub fn has_hvp(&self) -> bool {
        self.hvp_fn.is_some()
    }

    pub fn x_star(&self) -> Option<&[f64]> {
        self.x_star.as_deref()
    }

    pub fn f_star(&self) -> Option<f64> {
        self.f_star
    }

    pub fn certificate(&self) -> Option<&GrowthCertificate> {
        self.certificate.as_ref()
    }

    pub fn convex(&self) -> bool {
        self.convex
    }

    /// f(x) − f(x⋆); needs the optimal value to be known.
    pub fn suboptimality(&self, x: &[f64]) -> Result<f64, ObjectiveError> {
        let f_star = self.f_star.ok_or(ObjectiveError::MinimumUnknown)?;
        Ok(self.eval(x) - f_star)
    }
}

/// Parameters for [`builtin`]; each builtin documents which fields it reads.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BuiltinParams {
    pub b: Option<f64>,
    pub big_b: Option<f64>,
    pub dim: Option<usize>,
    pub matrix: Option<Vec<Vec<f64>>>,
}

/// Builds a catalogue objective by name: `quartic2d`, `power1d` (needs `b`),
/// `phiPower` (needs `b`, `B`, `dim`), `normFour` (needs `dim`),
/// `quadratic` (needs `matrix`), `nonconvex1d`.
pub fn builtin(name: &str, params: &BuiltinParams) -> Result<ObjectiveSpec, ObjectiveError> {
    match name {
        "quartic2d" => Ok(quartic2d()),
        "power1d" => {
            let b = params
                .b
                .ok_or(ObjectiveError::MissingParameter { name: "power1d", param: "b" })?;
            power1d(b)
        }
        "phiPower" => {
            let b = params
                .b
                .ok_or(ObjectiveError::MissingParameter { name: "phiPower", param: "b" })?;
            let big_b = params
                .big_b
                .ok_or(ObjectiveError::MissingParameter { name: "phiPower", param: "B" })?;
            let dim = params
                .dim
                .ok_or(ObjectiveError::MissingParameter { name: "phiPower", param: "dim" })?;
            phi_power(b, big_b, dim)
        }
        "normFour" => {
            let dim = params
                .dim
                .ok_or(ObjectiveError::MissingParameter { name: "normFour", param: "dim" })?;
            Ok(norm_four(dim))
        }
        "quadratic" => {
            let matrix = params
                .matrix
                .as_ref()
                .ok_or(ObjectiveError::MissingParameter { name: "quadratic", param: "matrix" })?;
            quadratic(matrix)
        }
        "nonconvex1d" => Ok(nonconvex1d()),
        other => Err(ObjectiveError::UnknownBuiltin(other.to_string())),
    }
}

/// f(x) = (x₁+x₂)⁴ + ((x₁−x₂)/2)⁴: a convex quartic whose Hessian is
/// singular at the minimizer, so no fixed gradient-descent step is ever
/// inside a classical smoothness regime near 0.
///
/// Certificate constants are stated w.r.t. ℓ₄ (matched kinetic norm ℓ_{4/3})
/// and were frozen from direction sweeps with margin: μ rounded down from
/// the sweep minimum 1.4127…, L rounded up from 9.5244…, L_f up from 285.1….
pub fn quartic2d() -> ObjectiveSpec {
    ObjectiveSpec::new(
        "quartic2d",
        2,
        |x| {
            let s = x[0] + x[1];
            let d = 0.5 * (x[0] - x[1]);
            s.powi(4) + d.powi(4)
        },
        |x| {
            let s = x[0] + x[1];
            let d = 0.5 * (x[0] - x[1]);
            let gs = 4.0 * s.powi(3);
            let gd = 2.0 * d.powi(3);
            vec![gs + gd, gs - gd]
        },
    )
    .with_hvp(|x, v| {
        let s = x[0] + x[1];
        let d = 0.5 * (x[0] - x[1]);
        let hs = 12.0 * s * s * (v[0] + v[1]);
        let hd = 3.0 * d * d * (v[0] - v[1]);
        vec![hs + hd, hs - hd]
    })
    .with_minimum(vec![0.0, 0.0], 0.0)
    .with_certificate(GrowthCertificate {
        b: 4.0,
        big_b: 4.0,
        mu: 1.41,
        big_l: 9.53,
        l_f: Some(286.0),
        d_f: Some(2.0),
        n: None,
        sigma_power: None,
        d_f_smooth: None,
        q: 4.0,
    })
}

/// f(x) = |x|^b / b in one dimension, b > 1.
///
/// Exact certificate: the identity φ_{b'}^{b'}(|x|^{b−1}) = (b−1)·f(x) gives
/// L = b − 1 with μ = 1.
pub fn power1d(b: f64) -> Result<ObjectiveSpec, ObjectiveError> {
    if !(b.is_finite() && b > 1.0) {
        return Err(ObjectiveError::BadParameter {
            name: "power1d",
            reason: format!("exponent b must be > 1, got {b}"),
        });
    }
    let mut spec = ObjectiveSpec::new(
        "power1d",
        1,
        move |x| x[0].abs().powf(b) / b,
        move |x| vec![x[0].abs().powf(b - 1.0) * x[0].signum()],
    )
    .with_minimum(vec![0.0], 0.0)
    .with_certificate(GrowthCertificate {
        b,
        big_b: b,
        mu: 1.0,
        big_l: b - 1.0,
        l_f: (b >= 2.0).then_some(b - 1.0),
        d_f: if b > 2.0 {
            Some(b - 2.0)
        } else if b == 2.0 {
            Some(1.0)
        } else {
            None
        },
        n: None,
        sigma_power: None,
        d_f_smooth: None,
        q: 2.0,
    });
    if b >= 2.0 {
        spec = spec.with_hvp(move |x, v| {
            let h = if x[0] == 0.0 {
                if b == 2.0 {
                    1.0
                } else {
                    0.0
                }
            } else {
                (b - 1.0) * x[0].abs().powf(b - 2.0)
            };
            vec![h * v[0]]
        });
    }
    Ok(spec)
}

/// f(x) = φ_b^B(‖x‖₂): body power b near the minimizer, tail power B.
///
/// μ = 1 is exact by construction. The remaining constants have closed forms
/// only in special cases: for b = B the power identity gives L = b − 1, and
/// for (b, B) = (2, 8) the constants were frozen from grid sweeps of the
/// defining inequalities (L = 7 is the exact supremum of the ratio,
/// approached from below; L_f = 6.5 rounds the sweep value 6.444… up).
/// Other exponent pairs get no certificate.
pub fn phi_power(b: f64, big_b: f64, dim: usize) -> Result<ObjectiveSpec, ObjectiveError> {
    if !(b.is_finite() && big_b.is_finite() && b > 1.0 && big_b >= 1.0) {
        return Err(ObjectiveError::BadParameter {
            name: "phiPower",
            reason: format!("profile powers must satisfy b > 1, B >= 1, got ({b}, {big_b})"),
        });
    }
    if dim == 0 {
        return Err(ObjectiveError::BadParameter {
            name: "phiPower",
            reason: "dimension must be positive".into(),
        });
    }
    let mut spec = ObjectiveSpec::new(
        "phiPower",
        dim,
        move |x| {
            let r = linalg::norm2(x);
            phi_eval(b, big_b, r).expect("exponents validated at construction")
        },
        move |x| {
            let r = linalg::norm2(x);
            if r == 0.0 {
                return vec![0.0; x.len()];
            }
            let slope = crate::kinetic::phi_grad(b, big_b, r)
                .expect("exponents validated at construction");
            linalg::scale(x, slope / r)
        },
    )
    .with_minimum(vec![0.0; dim], 0.0);
    if b >= 2.0 {
        spec = spec.with_hvp(move |x, v| {
            let r = linalg::norm2(x);
            if r == 0.0 {
                return if b == 2.0 { v.to_vec() } else { vec![0.0; v.len()] };
            }
            let g = crate::kinetic::phi_grad(b, big_b, r).expect("validated");
            let h = crate::kinetic::phi_hess(b, big_b, r).expect("validated");
            let radial = linalg::dot(x, v) / (r * r);
            x.iter()
                .zip(v)
                .map(|(&xi, &vi)| (g / r) * vi + (h - g / r) * radial * xi)
                .collect()
        });
    }
    if b == big_b {
        spec = spec.with_certificate(GrowthCertificate {
            b,
            big_b,
            mu: 1.0,
            big_l: b - 1.0,
            l_f: (b >= 2.0).then_some(b - 1.0),
            d_f: if b > 2.0 {
                Some(b - 2.0)
            } else if b == 2.0 {
                Some(1.0)
            } else {
                None
            },
            n: None,
            sigma_power: None,
            d_f_smooth: None,
            q: 2.0,
        });
    } else if b == 2.0 && big_b == 8.0 {
        spec = spec.with_certificate(GrowthCertificate {
            b: 2.0,
            big_b: 8.0,
            mu: 1.0,
            big_l: 7.0,
            l_f: Some(6.5),
            d_f: Some(1.0),
            n: None,
            sigma_power: None,
            d_f_smooth: None,
            q: 2.0,
        });
    }
    Ok(spec)
}

/// f(x) = ‖x‖₄²/2. Quadratic growth in the ℓ₄ norm with μ = L = 1 exactly
/// (‖∇f(x)‖_{4/3} = ‖x‖₄ identically), which is why its iteration counts are
/// dimension-free for the matched ℓ_{4/3} kinetic while the Euclidean
/// constants — and with them gradient descent — degrade as d grows.
pub fn norm_four(dim: usize) -> ObjectiveSpec {
    let ell4 = NormDescriptor::new(4.0).expect("4 is a valid norm exponent");
    ObjectiveSpec::new(
        "normFour",
        dim,
        move |x| {
            let r = ell4.norm(x);
            0.5 * r * r
        },
        move |x| {
            let r = ell4.norm(x);
            if r == 0.0 {
                return vec![0.0; x.len()];
            }
            linalg::scale(&ell4.grad(x), r)
        },
    )
    .with_minimum(vec![0.0; dim], 0.0)
    .with_certificate(GrowthCertificate {
        b: 2.0,
        big_b: 2.0,
        mu: 1.0,
        big_l: 1.0,
        l_f: Some(4.0),
        d_f: Some(1.0),
        n: None,
        sigma_power: None,
        d_f_smooth: None,
        q: 4.0,
    })
}

/// f(x) = ⟨x, Mx⟩/2 for a symmetric positive definite M.
///
/// The certificate's μ and L are Rayleigh-quotient estimates of the extreme
/// eigenvalues (power iteration on M and M⁻¹) with a 1% safety margin; they
/// are reproducible but not certified bounds.
pub fn quadratic(matrix: &[Vec<f64>]) -> Result<ObjectiveSpec, ObjectiveError> {
    let m = DenseMatrix::from_rows(matrix).ok_or(ObjectiveError::BadMatrix)?;
    if !m.is_symmetric(1e-9) {
        return Err(ObjectiveError::BadMatrix);
    }
    let chol = m.cholesky().ok_or(ObjectiveError::BadMatrix)?;
    let dim = m.n();
    let (lambda_min, lambda_max) = {
        let start: Vec<f64> = (0..dim).map(|i| 1.0 / (i + 1) as f64).collect();
        let mut hi = start.clone();
        for _ in 0..300 {
            let next = m.matvec(&hi);
            let n = linalg::norm2(&next);
            if n == 0.0 {
                break;
            }
            hi = linalg::scale(&next, 1.0 / n);
        }
        let mut lo = start;
        for _ in 0..300 {
            let next = chol.solve(&lo);
            let n = linalg::norm2(&next);
            if n == 0.0 {
                break;
            }
            lo = linalg::scale(&next, 1.0 / n);
        }
        let rq = |v: &[f64]| linalg::dot(v, &m.matvec(v)) / linalg::dot(v, v);
        (rq(&lo), rq(&hi))
    };
    let m_eval = m.clone();
    let m_grad = m.clone();
    let m_hvp = m;
    Ok(ObjectiveSpec::new(
        "quadratic",
        dim,
        move |x| 0.5 * linalg::dot(x, &m_eval.matvec(x)),
        move |x| m_grad.matvec(x),
    )
    .with_hvp(move |_x, v| m_hvp.matvec(v))
    .with_minimum(vec![0.0; dim], 0.0)
    .with_certificate(GrowthCertificate {
        b: 2.0,
        big_b: 2.0,
        mu: 0.99 * lambda_min,
        big_l: 1.01 * lambda_max,
        l_f: Some(1.01 * lambda_max),
        d_f: Some(1.0),
        n: None,
        sigma_power: None,
        d_f_smooth: None,
        q: 2.0,
    }))
}

// Minimum location and value of x²/4 + sin x: the unique real root of
// x/2 + cos x and the offset that centers the minimum at zero.
const NONCONVEX_X_STAR: f64 = -1.029_866_529_322_258_9;
const NONCONVEX_SHIFT: f64 = 0.592_074_001_277_943_7;

/// f(x) = x²/4 + sin x, shifted so f(x⋆) = 0: smooth (|f''| ≤ 3/2), bounded
/// below, genuinely non-convex, with a unique global minimizer.
pub fn nonconvex1d() -> ObjectiveSpec {
    ObjectiveSpec::new(
        "nonconvex1d",
        1,
        |x| 0.25 * x[0] * x[0] + x[0].sin() + NONCONVEX_SHIFT,
        |x| vec![0.5 * x[0] + x[0].cos()],
    )
    .with_hvp(|x, v| vec![(0.5 - x[0].sin()) * v[0]])
    .with_minimum(vec![NONCONVEX_X_STAR], 0.0)
    .with_convexity(false)
    .with_certificate(GrowthCertificate {
        b: 2.0,
        big_b: 2.0,
        mu: 0.3,
        big_l: 1.49,
        l_f: Some(1.5),
        d_f: None,
        n: None,
        sigma_power: Some(2.0),
        d_f_smooth: Some(1.5),
        q: 2.0,
    })
}

/// Outcome of sampling both certificate inequalities; violations are
/// relative to the bound's own scale.
#[derive(Debug, Clone, PartialEq)]
pub struct GrowthReport {
    pub max_lower_violation: f64,
    pub max_gradient_violation: f64,
    pub samples: usize,
    pub passed: bool,
}

/// Re-verifies the certificate inequalities on `sample_count` random
/// directions at each radius in `radius_grid` (radii in the certificate's
/// primal norm, centered on x⋆). Sampling uses a fixed seed so reports are
/// reproducible. Passes iff both relative violations stay within 1e−9.
pub fn certify_growth(
    spec: &ObjectiveSpec,
    sample_count: usize,
    radius_grid: &[f64],
) -> Result<GrowthReport, ObjectiveError> {
    let cert = spec.certificate().ok_or(ObjectiveError::MissingCertificate)?;
    let x_star = spec.x_star().ok_or(ObjectiveError::MinimumUnknown)?;
    let f_star = spec.f_star().ok_or(ObjectiveError::MinimumUnknown)?;
    let primal = NormDescriptor::new(cert.q).map_err(|e| ObjectiveError::BadParameter {
        name: "certificate",
        reason: e.to_string(),
    })?;
    let dual = primal.dual();
    let a = conjugate_exponent(cert.b);
    let big_a = conjugate_exponent(cert.big_b);

    let mut rng = ChaCha8Rng::seed_from_u64(0x9e37_79b9);
    let mut max_lower: f64 = 0.0;
    let mut max_gradient: f64 = 0.0;
    let mut samples = 0;
    for &r in radius_grid {
        for _ in 0..sample_count {
            let mut u: Vec<f64> = (0..spec.dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let un = primal.norm(&u);
            if un == 0.0 {
                continue;
            }
            for (ui, xs) in u.iter_mut().zip(x_star) {
                *ui = xs + *ui * r / un;
            }
            let x = u;
            let s = spec.eval(&x) - f_star;
            let lower = cert.mu
                * phi_eval(cert.b, cert.big_b, r)
                    .expect("certificate powers are valid exponents");
            max_lower = max_lower.max((lower - s) / s.abs().max(1e-300));
            let g = dual.norm(&spec.grad(&x));
            let grad_side =
                phi_eval(a, big_a, g).expect("conjugate powers are valid exponents");
            let bound = cert.big_l * s;
            max_gradient = max_gradient.max((grad_side - bound) / bound.abs().max(1e-300));
            samples += 1;
        }
    }
    Ok(GrowthReport {
        max_lower_violation: max_lower,
        max_gradient_violation: max_gradient,
        samples,
        passed: max_lower <= 1e-9 && max_gradient <= 1e-9,
    })
}

/// Symmetric positive definite matrix with the prescribed eigenvalues in a
/// seeded random orthogonal basis (Householder QR of a uniform matrix).
pub fn random_spd_matrix(eigenvalues: &[f64], seed: u64) -> Vec<Vec<f64>> {
    let n = eigenvalues.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut raw = DenseMatrix::zeros(n);
    for i in 0..n {
        for j in 0..n {
            raw.set(i, j, rng.gen_range(-1.0..1.0));
        }
    }
    let q = linalg::qr_orthogonal(&raw);
    // M = Qᵀ diag(λ) Q, symmetrized to kill roundoff asymmetry.
    let mut lam_q = q.clone();
    for i in 0..n {
        for j in 0..n {
            lam_q.set(i, j, eigenvalues[i] * q.get(i, j));
        }
    }
    let m = q.transpose().matmul(&lam_q);
    let mut rows = m.to_rows();
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (rows[i][j] + rows[j][i]);
            rows[i][j] = avg;
            rows[j][i] = avg;
        }
    }
    rows
}
