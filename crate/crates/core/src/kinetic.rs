//! Power kinetic energies k(p) = φ_a^A(‖p‖_q) and their calculus.
//!
//! The scalar profile is
//!
//! ```text
//! φ_a^A(t) = (1/A) (t^a + 1)^{A/a} − 1/A,
//! ```
//!
//! which behaves like t^a/a near zero and t^A/A in the tail. This module
//! provides the profile's gradient, inverse gradient, convex conjugate, the
//! relative-error diagnostic ρ(t) with its supremum C_{a,A}, the ℓ_q norm
//! calculus needed to lift the profile to vectors, and two ready-made kinetic
//! energies: the power family itself and the quadratic ⟨p, M⁻¹p⟩/2 used for
//! preconditioning experiments.
//!
//! Numerical note: φ and φ' are evaluated through `expm1`/`log1p`. The naive
//! forms lose every significant digit for small t (the subtraction
//! (t^a+1)^{A/a} − 1 cancels), which silently corrupts every downstream
//! energy computation; the expm1 forms are exact to a few ulps.

use crate::linalg::{self, Cholesky, DenseMatrix};
use thiserror::Error;

/// Errors for the kinetic-energy calculus.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum KineticError {
    #[error("profile exponents must be finite and >= 1 (got a = {a}, A = {big_a})")]
    ExponentOutOfDomain { a: f64, big_a: f64 },
    #[error("profile argument must be a nonnegative real (got {0})")]
    NegativeArgument(f64),
    #[error("slope {0} is outside the range of phi' (the gradient saturates below 1 when A = 1)")]
    SlopeOutOfRange(f64),
    #[error("phi' is constant for a = A = 1 and cannot be inverted")]
    NotInvertible,
    #[error("rho and its bound need a, A > 1 with a != A (got a = {a}, A = {big_a})")]
    DiagnosticsUndefined { a: f64, big_a: f64 },
    #[error("rho sample {rho} at t = {t} escapes [1, {bound}]")]
    DiagnosticsInconsistent { t: f64, rho: f64, bound: f64 },
    #[error("norm exponent must be finite and > 1 (got q = {0})")]
    BadNormExponent(f64),
    #[error("the norm Hessian bound needs q >= 2 (got q = {0})")]
    HessianBoundUndefined(f64),
    #[error("operation needs a nonzero vector")]
    ZeroVector,
    #[error("power kinetic needs a > 1 or A > 1 for strict convexity (got a = {a}, A = {big_a})")]
    NotStrictlyConvex { a: f64, big_a: f64 },
    #[error("kinetic gradient needs a > 1; the profile is non-differentiable at the origin for a = {0}")]
    NotDifferentiable(f64),
    #[error("quadratic kinetic needs a symmetric positive definite matrix")]
    NotPositiveDefinite,
    #[error("inverse gradient root finding stalled at t = {t} (residual {residual:.3e})")]
    RootFindingStalled { t: f64, residual: f64 },
}

/// Conjugate exponent e' with 1/e + 1/e' = 1; +∞ when e = 1.
pub fn conjugate_exponent(e: f64) -> f64 {
    if e == 1.0 {
        f64::INFINITY
    } else if e.is_infinite() {
        1.0
    } else {
        e / (e - 1.0)
    }
}

fn check_exponents(a: f64, big_a: f64) -> Result<(), KineticError> {
    if !(a.is_finite() && big_a.is_finite() && a >= 1.0 && big_a >= 1.0) {
        return Err(KineticError::ExponentOutOfDomain { a, big_a });
    }
    Ok(())
}

fn check_nonneg(t: f64) -> Result<(), KineticError> {
    if !(t >= 0.0) {
        return Err(KineticError::NegativeArgument(t));
    }
    Ok(())
}

/// φ_a^A(t); strictly increasing, φ(0) = 0.
pub fn phi_eval(a: f64, big_a: f64, t: f64) -> Result<f64, KineticError> {
    check_exponents(a, big_a)?;
    check_nonneg(t)?;
    Ok(phi_eval_raw(a, big_a, t))
}

#[inline]
fn phi_eval_raw(a: f64, big_a: f64, t: f64) -> f64 {
    // (1/A)(t^a + 1)^{A/a} - 1/A  ==  expm1((A/a) log1p(t^a)) / A
    ((big_a / a) * t.powf(a).ln_1p()).exp_m1() / big_a
}

/// φ'(t) = (t^a + 1)^{(A−a)/a} t^{a−1}, continuously extended to t = 0.
pub fn phi_grad(a: f64, big_a: f64, t: f64) -> Result<f64, KineticError> {
    check_exponents(a, big_a)?;
    check_nonneg(t)?;
    Ok(phi_grad_raw(a, big_a, t))
}

#[inline]
fn phi_grad_raw(a: f64, big_a: f64, t: f64) -> f64 {
    if t == 0.0 {
        // t^{a-1} -> 0 for a > 1; for a = 1 the slope tends to (0+1)^{A-1} = 1.
        return if a > 1.0 { 0.0 } else { 1.0 };
    }
    (((big_a - a) / a) * t.powf(a).ln_1p()).exp() * t.powf(a - 1.0)
}

/// φ''(t), continuously extended to t = 0 where the limit exists
/// (+∞ for 1 < a < 2).
pub fn phi_hess(a: f64, big_a: f64, t: f64) -> Result<f64, KineticError> {
    check_exponents(a, big_a)?;
    check_nonneg(t)?;
    if t == 0.0 {
        return Ok(if a == 1.0 {
            big_a - 1.0
        } else if a < 2.0 {
            f64::INFINITY
        } else if a == 2.0 {
            1.0
        } else {
            0.0
        });
    }
    let ta = t.powf(a);
    Ok(phi_grad_raw(a, big_a, t) * ((big_a - a) * t.powf(a - 1.0) / (1.0 + ta) + (a - 1.0) / t))
}

/// The unique t ≥ 0 with φ'(t) = s.
///
/// Closed forms cover a = A, A = 1, and a = 1; otherwise a safeguarded
/// bisection (bracket grown geometrically, bisected to width 1e−8) followed
/// by a Newton polish brings the root to absolute tolerance 1e−12.
pub fn phi_grad_inverse(a: f64, big_a: f64, s: f64) -> Result<f64, KineticError> {
    check_exponents(a, big_a)?;
    check_nonneg(s)?;
    if a == 1.0 && big_a == 1.0 {
        return Err(KineticError::NotInvertible);
    }
    if big_a == 1.0 && s >= 1.0 {
        return Err(KineticError::SlopeOutOfRange(s));
    }
    if s == 0.0 {
        return Ok(0.0);
    }
    if a == big_a {
        return Ok(s.powf(1.0 / (a - 1.0)));
    }
    if big_a == 1.0 {
        // phi'(t) = (t^a/(t^a+1))^{(a-1)/a}, so t^a = sigma/(1-sigma) with
        // sigma = s^{a/(a-1)}; specializes to s/sqrt(1-s^2) for a = 2.
        let sigma = s.powf(a / (a - 1.0));
        return Ok((sigma / (1.0 - sigma)).powf(1.0 / a));
    }
    if a == 1.0 {
        // phi'(t) = (t+1)^{A-1} ranges over [1, inf); slopes at or below 1
        // belong to the conjugate's flat region and invert to 0.
        if s <= 1.0 {
            return Ok(0.0);
        }
        return Ok(s.powf(1.0 / (big_a - 1.0)) - 1.0);
    }

    // Generic case: phi' is strictly increasing and smooth.
    let b = conjugate_exponent(a);
    let mut hi = (2.0 * s.powf(b - 1.0)).max(1.0);
    let mut grew = 0;
    while phi_grad_raw(a, big_a, hi) < s {
        hi *= 2.0;
        grew += 1;
        if grew > 200 {
            return Err(KineticError::RootFindingStalled { t: hi, residual: s });
        }
    }
    let mut lo = 0.0;
    while hi - lo > 1e-8 {
        let mid = 0.5 * (lo + hi);
        if phi_grad_raw(a, big_a, mid) < s {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut t = 0.5 * (lo + hi);
    for _ in 0..40 {
        let g = phi_grad_raw(a, big_a, t) - s;
        if g == 0.0 {
            break;
        }
        let h = phi_hess(a, big_a, t)?;
        if !h.is_finite() || h == 0.0 {
            break;
        }
        let step = g / h;
        let next = t - step;
        // Keep the iterate inside the certified bracket.
        let next = if next < lo || next > hi { 0.5 * (lo + hi) } else { next };
        if (next - t).abs() <= 1e-13 * (1.0 + t.abs()) {
            t = next;
            break;
        }
        if phi_grad_raw(a, big_a, next) < s {
            lo = next;
        } else {
            hi = next;
        }
        t = next;
    }
    Ok(t)
}

/// Convex conjugate (φ_a^A)*(t) = sup_{s≥0} { t·s − φ(s) }.
///
/// Closed forms: a = A gives φ_b^b(t) = t^b/b; a = 1 gives 0 on [0,1] and
/// t^B/B − t + 1/A beyond; A = 1 gives 1 − (1−t^b)^{1/b} on [0,1] and +∞
/// beyond; a = A = 1 gives the indicator of [0,1]. The generic case solves
/// the stationarity condition t = φ'(s) through `phi_grad_inverse`.
pub fn phi_conj(a: f64, big_a: f64, t: f64) -> Result<f64, KineticError> {
    check_exponents(a, big_a)?;
    check_nonneg(t)?;
    if t == 0.0 {
        return Ok(0.0);
    }
    if a == 1.0 && big_a == 1.0 {
        return Ok(if t <= 1.0 { 0.0 } else { f64::INFINITY });
    }
    if big_a == 1.0 {
        let b = conjugate_exponent(a);
        if t > 1.0 {
            return Ok(f64::INFINITY);
        }
        return Ok(1.0 - (1.0 - t.powf(b)).powf(1.0 / b));
    }
    if a == 1.0 {
        if t <= 1.0 {
            return Ok(0.0);
        }
        let big_b = conjugate_exponent(big_a);
        return Ok(t.powf(big_b) / big_b - t + 1.0 / big_a);
    }
    if a == big_a {
        let b = conjugate_exponent(a);
        return Ok(t.powf(b) / b);
    }
    let s = phi_grad_inverse(a, big_a, t)?;
    Ok((t * s - phi_eval_raw(a, big_a, s)).max(0.0))
}

/// ρ(t): the factor by which chaining φ'_b^B after φ' overshoots the
/// identity, i.e. φ'_b^B(φ'(t)) = ρ(t)·t. Always in [1, C_{a,A}].
pub fn rho_eval(a: f64, big_a: f64, t: f64) -> Result<f64, KineticError> {
    if !(a > 1.0 && big_a > 1.0) || a == big_a {
        return Err(KineticError::DiagnosticsUndefined { a, big_a });
    }
    check_exponents(a, big_a)?;
    check_nonneg(t)?;
    if t == 0.0 {
        return Ok(1.0);
    }
    let b = conjugate_exponent(a);
    let big_b = conjugate_exponent(big_a);
    let u = t.powf(a) + 1.0;
    let base = 1.0 - 1.0 / u + u.powf(-(big_a - 1.0) / (a - 1.0));
    Ok(base.powf((big_b - b) / b))
}

/// C_{a,A} = sup_t ρ(t), by the closed form at ρ's stationary point.
/// Returns 1 within the |a − A| < 1e−12 window (the continuous limit).
pub fn c_const(a: f64, big_a: f64) -> Result<f64, KineticError> {
    check_exponents(a, big_a)?;
    if (a - big_a).abs() < 1e-12 {
        return Ok(1.0);
    }
    if a <= 1.0 || big_a <= 1.0 {
        return Err(KineticError::DiagnosticsUndefined { a, big_a });
    }
    let b = conjugate_exponent(a);
    let big_b = conjugate_exponent(big_a);
    let r = (a - 1.0) / (big_a - 1.0);
    let base = 1.0 - r.powf((a - 1.0) / (big_a - a)) + r.powf((big_a - 1.0) / (big_a - a));
    Ok(base.powf((big_b - b) / b))
}

/// ρ(t) sampled on a grid together with its certified supremum.
#[derive(Debug, Clone, PartialEq)]
pub struct ConjugateDiagnostics {
    /// C_{a,A}: the supremum of ρ.
    pub rho_max: f64,
    /// (t, ρ(t)) pairs, in the order sampled.
    pub rho_samples: Vec<(f64, f64)>,
}

/// Evaluates ρ on the given grid and verifies every sample sits inside
/// [1, C_{a,A}] (up to 1e−12 slack).
pub fn conjugate_diagnostics(
    a: f64,
    big_a: f64,
    ts: &[f64],
) -> Result<ConjugateDiagnostics, KineticError> {
    let rho_max = c_const(a, big_a)?;
    let mut rho_samples = Vec::with_capacity(ts.len());
    for &t in ts {
        let rho = rho_eval(a, big_a, t)?;
        if rho < 1.0 - 1e-12 || rho > rho_max + 1e-12 {
            return Err(KineticError::DiagnosticsInconsistent { t, rho, bound: rho_max });
        }
        rho_samples.push((t, rho));
    }
    Ok(ConjugateDiagnostics { rho_max, rho_samples })
}

/// ℓ_q norm descriptor for the momentum (dual) space; the implied primal
/// norm is ℓ_{q'} with 1/q + 1/q' = 1. Euclidean is q = 2.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormDescriptor {
    q: f64,
}

impl NormDescriptor {
    /// Requires 1 < q < ∞; the endpoints are non-differentiable and rejected.
    pub fn new(q: f64) -> Result<Self, KineticError> {
        if !(q.is_finite() && q > 1.0) {
            return Err(KineticError::BadNormExponent(q));
        }
        Ok(NormDescriptor { q })
    }

    pub fn euclidean() -> Self {
        NormDescriptor { q: 2.0 }
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    /// The descriptor of the conjugate exponent q' = q/(q−1).
    pub fn dual(&self) -> NormDescriptor {
        NormDescriptor { q: self.q / (self.q - 1.0) }
    }

    /// ‖p‖_q, computed against the largest coordinate to avoid overflow.
    pub fn norm(&self, p: &[f64]) -> f64 {
        let m = p.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
        if m == 0.0 {
            return 0.0;
        }
        let s: f64 = p.iter().map(|v| (v.abs() / m).powf(self.q)).sum();
        m * s.powf(1.0 / self.q)
    }

    /// ∇‖p‖_q = sign(p) (|p|/‖p‖)^{q−1}; the zero vector maps to zero.
    ///
    /// The division by ‖p‖ happens inside the power so no intermediate can
    /// overflow. Callers must not pass near-zero vectors expecting a
    /// polished direction: only the exact zero vector is special-cased.
    pub fn grad(&self, p: &[f64]) -> Vec<f64> {
        let n = self.norm(p);
        if n == 0.0 {
            return vec![0.0; p.len()];
        }
        p.iter().map(|&v| v.signum() * (v.abs() / n).powf(self.q - 1.0)).collect()
    }

    /// Certified bound (q−1)/‖p‖_q on the largest eigenvalue of ∇²‖p‖_q,
    /// measured in the ‖·‖_q geometry. Defined for q ≥ 2 and p ≠ 0.
    pub fn hess_maxeigen_bound(&self, p: &[f64]) -> Result<f64, KineticError> {
        if self.q < 2.0 {
            return Err(KineticError::HessianBoundUndefined(self.q));
        }
        let n = self.norm(p);
        if n == 0.0 {
            return Err(KineticError::ZeroVector);
        }
        Ok((self.q - 1.0) / n)
    }
}

/// Kinetic-energy interface shared by the integrators.
///
/// `velocity` is ∇k(p) — the map from momentum to velocity in the dynamics
/// x' = ∇k(p) — and `conjugate_grad` is its inverse ∇k*(v). Implementations
/// may panic on arguments outside the documented domains; `step_ready`
/// reports whether gradient-based stepping is safe, and the integrators
/// check it once per run.
pub trait KineticEnergy: Send + Sync {
    /// k(p).
    fn energy(&self, p: &[f64]) -> f64;
    /// ∇k(p).
    fn velocity(&self, p: &[f64]) -> Vec<f64>;
    /// k*(v); may be +∞.
    fn conjugate(&self, v: &[f64]) -> f64;
    /// ∇k*(v).
    fn conjugate_grad(&self, v: &[f64]) -> Vec<f64>;
    /// ∇²k(p)·v when a Hessian is available in closed form.
    fn hessian_matvec(&self, p: &[f64], v: &[f64]) -> Option<Vec<f64>>;
    /// Err when the energy cannot drive a gradient-based step.
    fn step_ready(&self) -> Result<(), KineticError>;
}

/// k(p) = φ_a^A(‖p‖_q).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerKinetic {
    a: f64,
    big_a: f64,
    norm: NormDescriptor,
}

impl PowerKinetic {
    /// Requires a, A ≥ 1 with at least one strict (strict convexity).
    pub fn new(a: f64, big_a: f64, norm: NormDescriptor) -> Result<Self, KineticError> {
        check_exponents(a, big_a)?;
        if a == 1.0 && big_a == 1.0 {
            return Err(KineticError::NotStrictlyConvex { a, big_a });
        }
        Ok(PowerKinetic { a, big_a, norm })
    }

    /// The classical kinetic energy ‖p‖₂²/2 (φ_2^2 is exactly t²/2).
    pub fn classical() -> Self {
        PowerKinetic { a: 2.0, big_a: 2.0, norm: NormDescriptor::euclidean() }
    }

    /// The relativistic kinetic energy √(‖p‖₂² + 1) − 1 = φ_2^1(‖p‖₂).
    pub fn relativistic() -> Self {
        PowerKinetic { a: 2.0, big_a: 1.0, norm: NormDescriptor::euclidean() }
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn big_a(&self) -> f64 {
        self.big_a
    }

    pub fn norm(&self) -> NormDescriptor {
        self.norm
    }

    /// Conjugate body exponent b = a/(a−1).
    pub fn b(&self) -> f64 {
        conjugate_exponent(self.a)
    }

    /// Conjugate tail exponent B = A/(A−1); +∞ when A = 1.
    pub fn big_b(&self) -> f64 {
        conjugate_exponent(self.big_a)
    }

    /// k(p); zero iff p = 0.
    pub fn eval(&self, p: &[f64]) -> f64 {
        phi_eval_raw(self.a, self.big_a, self.norm.norm(p))
    }

    /// ∇k(p) = φ'(‖p‖_q) ∇‖p‖_q, with ∇k(0) = 0. Needs a > 1.
    ///
    /// The returned vector has dual norm ‖∇k(p)‖_{q'} = φ'(‖p‖_q).
    pub fn grad(&self, p: &[f64]) -> Result<Vec<f64>, KineticError> {
        if self.a == 1.0 {
            return Err(KineticError::NotDifferentiable(self.a));
        }
        let r = self.norm.norm(p);
        if r == 0.0 {
            return Ok(vec![0.0; p.len()]);
        }
        let slope = phi_grad_raw(self.a, self.big_a, r);
        Ok(linalg::scale(&self.norm.grad(p), slope))
    }

    /// k*(v) = (φ_a^A)*(‖v‖_{q'}); +∞ outside the saturation ball when A = 1.
    pub fn conj_eval(&self, v: &[f64]) -> f64 {
        phi_conj(self.a, self.big_a, self.norm.dual().norm(v))
            .expect("exponents validated at construction")
    }

    /// ∇k*(v) = (φ')⁻¹(‖v‖_{q'}) ∇‖v‖_{q'}; inverts `grad` where defined.
    pub fn conj_grad(&self, v: &[f64]) -> Result<Vec<f64>, KineticError> {
        let dual = self.norm.dual();
        let r = dual.norm(v);
        if r == 0.0 {
            return Ok(vec![0.0; v.len()]);
        }
        let t = phi_grad_inverse(self.a, self.big_a, r)?;
        Ok(linalg::scale(&dual.grad(v), t))
    }

    /// ∇²k(p)·v, available in closed form for the Euclidean norm only.
    pub fn hess_matvec(&self, p: &[f64], v: &[f64]) -> Option<Vec<f64>> {
        if (self.norm.q - 2.0).abs() > 1e-12 {
            return None;
        }
        let r = linalg::norm2(p);
        if r == 0.0 {
            // ∇²k(0) = I when a = 2; other exponents are degenerate there.
            return if self.a == 2.0 { Some(v.to_vec()) } else { None };
        }
        let g = phi_grad_raw(self.a, self.big_a, r);
        let h = phi_hess(self.a, self.big_a, r).ok()?;
        if !h.is_finite() {
            return None;
        }
        let radial = linalg::dot(p, v) / (r * r);
        Some(
            v.iter()
                .zip(p)
                .map(|(&vi, &pi)| (g / r) * vi + (h - g / r) * radial * pi)
                .collect(),
        )
    }

    /// ρ samples and C_{a,A} for this profile's exponent pair.
    pub fn diagnostics(&self, ts: &[f64]) -> Result<ConjugateDiagnostics, KineticError> {
        conjugate_diagnostics(self.a, self.big_a, ts)
    }
}

impl KineticEnergy for PowerKinetic {
    fn energy(&self, p: &[f64]) -> f64 {
        self.eval(p)
    }

    fn velocity(&self, p: &[f64]) -> Vec<f64> {
        self.grad(p).expect("step_ready() rules out a = 1 before stepping")
    }

    fn conjugate(&self, v: &[f64]) -> f64 {
        self.conj_eval(v)
    }

    fn conjugate_grad(&self, v: &[f64]) -> Vec<f64> {
        self.conj_grad(v)
            .expect("argument must stay inside the gradient range (unit ball when A = 1)")
    }

    fn hessian_matvec(&self, p: &[f64], v: &[f64]) -> Option<Vec<f64>> {
        self.hess_matvec(p, v)
    }

    fn step_ready(&self) -> Result<(), KineticError> {
        if self.a == 1.0 {
            return Err(KineticError::NotDifferentiable(self.a));
        }
        Ok(())
    }
}

/// k(p) = ⟨p, M⁻¹p⟩/2 for a symmetric positive definite M.
///
/// Used by the preconditioning-invariance experiments: running with this
/// kinetic on f(x) = ⟨x, Mx⟩/2 reproduces, after the change of variables
/// p ↦ M⁻¹p, the identity-matrix run.
#[derive(Debug, Clone)]
pub struct QuadraticKinetic {
    m: DenseMatrix,
    chol: Cholesky,
}

impl QuadraticKinetic {
    pub fn new(matrix: &[Vec<f64>]) -> Result<Self, KineticError> {
        let m = DenseMatrix::from_rows(matrix).ok_or(KineticError::NotPositiveDefinite)?;
        if !m.is_symmetric(1e-9) {
            return Err(KineticError::NotPositiveDefinite);
        }
        let chol = m.cholesky().ok_or(KineticError::NotPositiveDefinite)?;
        Ok(QuadraticKinetic { m, chol })
    }

    pub fn dim(&self) -> usize {
        self.m.n()
    }

    /// M v.
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        self.m.matvec(v)
    }

    /// M⁻¹ v.
    pub fn apply_inverse(&self, v: &[f64]) -> Vec<f64> {
        self.chol.solve(v)
    }
}

impl KineticEnergy for QuadraticKinetic {
    fn energy(&self, p: &[f64]) -> f64 {
        0.5 * linalg::dot(p, &self.chol.solve(p))
    }

    fn velocity(&self, p: &[f64]) -> Vec<f64> {
        self.chol.solve(p)
    }

    fn conjugate(&self, v: &[f64]) -> f64 {
        0.5 * linalg::dot(v, &self.m.matvec(v))
    }

    fn conjugate_grad(&self, v: &[f64]) -> Vec<f64> {
        self.m.matvec(v)
    }

    fn hessian_matvec(&self, _p: &[f64], v: &[f64]) -> Option<Vec<f64>> {
        Some(self.chol.solve(v))
    }

    fn step_ready(&self) -> Result<(), KineticError> {
        Ok(())
    }
}
