//! Rate certificates: assumption constants, step-size bounds, Lyapunov
//! machinery, and guaranteed suboptimality envelopes.
//!
//! The central object is a [`ConstantsBundle`]: the handful of scalars
//! (α, C_{α,γ}, C_fK, C_K, …) that a kinetic/objective pairing must admit
//! for the solvers' convergence guarantees to apply. [`constants_known_power`]
//! derives a bundle when the objective's growth powers match the kinetic's
//! conjugate powers exactly; [`constants_relativistic`] covers the
//! relativistic kinetic paired with fast-growing objectives. From a bundle,
//! [`step_bound`] yields the certified maximal step size, [`w_recursion`]
//! the per-iteration envelope with f(xᵢ) − f(x⋆) ≤ 2Wᵢ, and
//! [`continuous_envelope`] its continuous-time counterpart.

use crate::integrators::State;
use crate::kinetic::{c_const, conjugate_exponent, KineticError, KineticEnergy, PowerKinetic};
use crate::objective::{GrowthCertificate, ObjectiveSpec};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error("damping must lie in (0, 1), got {0}")]
    BadDamping(f64),
    #[error("invalid parameters: {0}")]
    BadShape(String),
    #[error("constant `{which}` is required for {needed_for} but is not available")]
    MissingConstant { which: &'static str, needed_for: &'static str },
    #[error("certificate/kinetic pairing not covered: {0}")]
    CertificateMismatch(String),
    #[error(transparent)]
    Kinetic(#[from] KineticError),
    #[error("iteration failed to converge: {0}")]
    NoConvergence(String),
}

/// The damping-to-dissipation function α: nonincreasing, valued in (0, 1];
/// larger values mean the kinetic dominates the conjugate objective more
/// strongly at that energy level.
#[derive(Debug, Clone, PartialEq)]
pub enum AlphaFn {
    Constant(f64),
    /// α(y) = scale · (y + 1)^{1−A}; the relativistic kinetic's dissipation
    /// weakens as energy grows, with tail exponent A ∈ (1, 2].
    RelativisticDecay { scale: f64, big_a: f64 },
}

impl AlphaFn {
    pub fn eval(&self, y: f64) -> f64 {
        match *self {
            AlphaFn::Constant(c) => c,
            AlphaFn::RelativisticDecay { scale, big_a } => {
                scale * (y + 1.0).powf(1.0 - big_a)
            }
        }
    }
}

/// α = min{μ^{a−1}, μ^{A−1}, 1}, the constant dissipation ratio when the
/// objective's growth powers are exactly conjugate to the kinetic's (a, A).
pub fn alpha_known_power(mu: f64, a: f64, big_a: f64) -> AlphaFn {
    AlphaFn::Constant(mu.powf(a - 1.0).min(mu.powf(big_a - 1.0)).min(1.0))
}

/// α(y) = min{μ^{A−1}, μ, 1}·(y+1)^{1−A} for the relativistic kinetic
/// paired with an objective of tail growth B, A = B/(B−1) ∈ (1, 2].
/// Satisfies −α′(y)·y < α(y), so C_{α,γ} = γ is admissible.
pub fn alpha_relativistic(mu: f64, big_a: f64) -> AlphaFn {
    AlphaFn::RelativisticDecay {
        scale: mu.powf(big_a - 1.0).min(mu).min(1.0),
        big_a,
    }
}

/// Assumption constants for one kinetic/objective pairing. Every field a
/// guarantee might need is optional except the three every method needs;
/// [`step_bound`] and [`w_recursion`] report precisely which constant is
/// missing when a method's prerequisites aren't met.
///
/// `d_fk_hess_f` is the D_fK form for the scheme that differentiates the
/// objective twice (explicit1); `d_fk_hess_k` is the form for the scheme
/// that differentiates the kinetic twice (explicit2). Both can be defined
/// at once (e.g. b = B = 2) with different values, which is why the bundle
/// keeps them apart.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstantsBundle {
    pub alpha_fn: AlphaFn,
    /// α evaluated at 3H₀ once an initial energy is known; the worst α a
    /// run starting at energy H₀ can encounter.
    pub alpha_star: Option<f64>,
    pub c_alpha_gamma: f64,
    pub c_fk: f64,
    pub c_k: f64,
    pub d_fk_hess_f: Option<f64>,
    pub d_fk_hess_k: Option<f64>,
    pub d_k: Option<f64>,
    pub e_k: Option<f64>,
    pub f_k: Option<f64>,
    /// Smoothness power σ of the non-convex descent condition.
    pub sigma_power: Option<f64>,
    /// Objective-side uniform smoothness scale for the non-convex bound.
    pub d_f_smooth: Option<f64>,
    /// Kinetic-side uniform smoothness scale for the non-convex bound.
    pub d_k_smooth: Option<f64>,
}

impl ConstantsBundle {
    /// Fixes α⋆ = α(3H₀) for a run starting at total energy `h0`.
    pub fn with_alpha_star(mut self, h0: f64) -> Self {
        self.alpha_star = Some(self.alpha_fn.eval(3.0 * h0));
        self
    }
}

/// Which step-size bound / envelope family to apply. The first three are
/// the convex-case schemes; `NonconvexExplicit1` is the explicit1 scheme
/// under the uniform-smoothness (non-convex) certificate, whose bound is
/// inclusive rather than strict.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundKind {
    Implicit,
    Explicit1,
    Explicit2,
    NonconvexExplicit1,
}

impl BoundKind {
    pub fn name(self) -> &'static str {
        match self {
            BoundKind::Implicit => "implicit",
            BoundKind::Explicit1 => "explicit1",
            BoundKind::Explicit2 => "explicit2",
            BoundKind::NonconvexExplicit1 => "nonconvex-explicit1",
        }
    }

    /// Whether ε may sit exactly at the bound (≤) or must stay below it (<).
    pub fn is_inclusive(self) -> bool {
        matches!(self, BoundKind::NonconvexExplicit1)
    }
}

/// Everything a caller needs to quote a convergence guarantee: the maximal
/// certified step, the optimal contraction parameters, and whether the
/// per-iteration envelope divides or multiplies.
#[derive(Debug, Clone, PartialEq)]
pub struct RateCertificate {
    pub kind: BoundKind,
    pub epsilon_max: f64,
    /// "divide" for W⁺ = W/(1+c·α), "multiply" for W⁺ = W·(1−c·α).
    pub factor_form: &'static str,
    pub beta_star: f64,
    pub lambda_star: f64,
}

fn check_gamma(gamma: f64) -> Result<(), AnalysisError> {
    if !(gamma.is_finite() && gamma > 0.0 && gamma < 1.0) {
        return Err(AnalysisError::BadDamping(gamma));
    }
    Ok(())
}

/// Continuous-time contraction rate for the Lyapunov pairing (α, β, γ):
///
/// ```text
/// λ(α, β, γ) = min( (αγ − αβ − βγ)/(α − β),  β(1−γ)/(1−β) )
/// ```
///
/// with the second branch alone at α = β (numerator and denominator of the
/// first vanish together there). Requires α ∈ (0, 1], β ∈ (0, min(α, γ)],
/// γ ∈ (0, 1). The minimum is returned as-is; it is only a useful rate when
/// positive, and β near min(α, γ) can push the first branch negative.
pub fn lambda_rate(alpha: f64, beta: f64, gamma: f64) -> Result<f64, AnalysisError> {
    check_gamma(gamma)?;
    if !(alpha.is_finite() && alpha > 0.0 && alpha <= 1.0) {
        return Err(AnalysisError::BadShape(format!(
            "alpha must lie in (0, 1], got {alpha}"
        )));
    }
    if !(beta.is_finite() && beta > 0.0 && beta <= alpha.min(gamma)) {
        return Err(AnalysisError::BadShape(format!(
            "beta must lie in (0, min(alpha, gamma)] = (0, {}], got {beta}",
            alpha.min(gamma)
        )));
    }
    let second = beta * (1.0 - gamma) / (1.0 - beta);
    if (alpha - beta).abs() < 1e-15 {
        return Ok(second);
    }
    let first = (alpha * gamma - alpha * beta - beta * gamma) / (alpha - beta);
    Ok(first.min(second))
}

/// The maximizer β* of λ(α, ·, γ) and its value λ*, in closed form:
///
/// ```text
/// β* = (α + γ/2 − s)/(1 + α),   λ* = ((1−γ)α + γ/2 − s)/(1 − α),
/// s = √((1−γ)α² + γ²/4)
/// ```
///
/// degenerating to β* = γ/2, λ* = γ(1−γ)/(2−γ) at α = 1.
pub fn beta_lambda_star(alpha: f64, gamma: f64) -> Result<(f64, f64), AnalysisError> {
    check_gamma(gamma)?;
    if !(alpha.is_finite() && alpha > 0.0 && alpha <= 1.0) {
        return Err(AnalysisError::BadShape(format!(
            "alpha must lie in (0, 1], got {alpha}"
        )));
    }
    if (1.0 - alpha).abs() < 1e-9 {
        let beta_star = gamma / 2.0;
        let lambda_star = gamma * (1.0 - gamma) / (2.0 - gamma);
        return Ok((beta_star, lambda_star));
    }
    let s = ((1.0 - gamma) * alpha * alpha + gamma * gamma / 4.0).sqrt();
    let beta_star = (alpha + gamma / 2.0 - s) / (1.0 + alpha);
    let lambda_star = ((1.0 - gamma) * alpha + gamma / 2.0 - s) / (1.0 - alpha);
    Ok((beta_star, lambda_star))
}

/// V(x, p) = H(x, p) + β⟨x − x⋆, p⟩ where H = k(p) + f(x) − f(x⋆).
pub fn lyapunov_value(
    state: &State,
    spec: &ObjectiveSpec,
    kinetic: &dyn KineticEnergy,
    beta: f64,
    x_star: &[f64],
    f_star: f64,
) -> f64 {
    let h = kinetic.energy(&state.p) + spec.eval(&state.x) - f_star;
    let cross: f64 = state
        .x
        .iter()
        .zip(x_star)
        .zip(&state.p)
        .map(|((xi, xs), pi)| (xi - xs) * pi)
        .sum();
    h + beta * cross
}

/// Solves the self-consistent Lyapunov pairing at one state: V = H + β·c
/// with β = C_{α,γ}·α(2V)/2, where `cross` is c = ⟨x − x⋆, p⟩. Returns
/// (V, β). When the bundle's constants are valid the root is unique in
/// [H/2, 3H/2]; the damped iteration starting from V = H converges there.
pub fn lyapunov_fixed_point(
    h: f64,
    cross: f64,
    c_alpha_gamma: f64,
    alpha: &AlphaFn,
) -> Result<(f64, f64), AnalysisError> {
    let mut v = h;
    for _ in 0..500 {
        let beta = c_alpha_gamma * alpha.eval(2.0 * v) / 2.0;
        let next = 0.5 * v + 0.5 * (h + beta * cross);
        let done = (next - v).abs() <= 1e-12 * (1.0 + v.abs());
        v = next;
        if done {
            let beta = c_alpha_gamma * alpha.eval(2.0 * v) / 2.0;
            return Ok((v, beta));
        }
    }
    Err(AnalysisError::NoConvergence(format!(
        "Lyapunov pairing at H = {h}, cross = {cross} did not settle in 500 iterations"
    )))
}

fn check_matched_norm(
    cert: &GrowthCertificate,
    kinetic: &PowerKinetic,
) -> Result<(), AnalysisError> {
    let expect_q = conjugate_exponent(cert.q);
    if (kinetic.norm().q() - expect_q).abs() > 1e-9 {
        return Err(AnalysisError::CertificateMismatch(format!(
            "certificate is stated in the primal l_{} norm, so the kinetic must use the dual \
             l_{} norm, but it uses l_{}",
            cert.q,
            expect_q,
            kinetic.norm().q()
        )));
    }
    Ok(())
}

/// Assumption constants when the objective's growth powers are exactly
/// conjugate to the kinetic's: b = a/(a−1) and B = A/(A−1).
///
/// Always fills α = min{μ^{a−1}, μ^{A−1}, 1}, C_{α,γ} = γ,
/// C_fK = max{a−1, A−1, L}, C_K = max{a, A}. The scheme-specific constants
/// are filled opportunistically: the twice-differentiated-f form
/// D_fK = L_f·α⁻¹·max{D_f, 2·C_{a,A}·(max{a,A}−1)} when b, B ≥ 2 and the
/// certificate carries (L_f, D_f); the twice-differentiated-k family
/// D_K = m(m−1), E_k = m−1, F_k = 1, D_fK = α⁻¹(m−1+N)·max{2L, a−2, A−2}
/// (m = max{a, A}) when b, B ≤ 2, with N taken from the certificate or
/// derived as q̂−1 from the kinetic's ℓ_q̂ norm when q̂ ≥ 2. Non-convex
/// smoothness constants are copied through, with the kinetic-side scale
/// currently certified only for the classical kinetic (a = A = 2,
/// Euclidean), where it is 1.
pub fn constants_known_power(
    cert: &GrowthCertificate,
    kinetic: &PowerKinetic,
    gamma: f64,
) -> Result<ConstantsBundle, AnalysisError> {
    check_gamma(gamma)?;
    if !(cert.mu > 0.0 && cert.big_l > 0.0) {
        return Err(AnalysisError::BadShape(format!(
            "certificate scales must be positive, got mu = {}, L = {}",
            cert.mu, cert.big_l
        )));
    }
    let a = kinetic.a();
    let big_a = kinetic.big_a();
    let want_a = conjugate_exponent(cert.b);
    let want_big_a = conjugate_exponent(cert.big_b);
    if (a - want_a).abs() > 1e-9 || (big_a - want_big_a).abs() > 1e-9 {
        return Err(AnalysisError::CertificateMismatch(format!(
            "growth powers (b, B) = ({}, {}) demand kinetic powers ({}, {}), got ({}, {})",
            cert.b, cert.big_b, want_a, want_big_a, a, big_a
        )));
    }
    check_matched_norm(cert, kinetic)?;

    let alpha_fn = alpha_known_power(cert.mu, a, big_a);
    let alpha_scale = alpha_fn.eval(0.0);
    let m = a.max(big_a);
    let tol = 1e-9;

    let mut d_fk_hess_f = None;
    if cert.b >= 2.0 - tol && cert.big_b >= 2.0 - tol {
        if let (Some(l_f), Some(d_f)) = (cert.l_f, cert.d_f) {
            let c_aa = c_const(a, big_a)?;
            d_fk_hess_f = Some(l_f / alpha_scale * d_f.max(2.0 * c_aa * (m - 1.0)));
        }
    }

    let mut d_k = None;
    let mut e_k = None;
    let mut f_k = None;
    let mut d_fk_hess_k = None;
    if cert.b <= 2.0 + tol && cert.big_b <= 2.0 + tol {
        d_k = Some(m * (m - 1.0));
        e_k = Some(m - 1.0);
        f_k = Some(1.0);
        let q_hat = kinetic.norm().q();
        let n = cert.n.or_else(|| (q_hat >= 2.0 - 1e-12).then(|| q_hat - 1.0));
        if let Some(n) = n {
            d_fk_hess_k = Some(
                (m - 1.0 + n) / alpha_scale
                    * (2.0 * cert.big_l).max(a - 2.0).max(big_a - 2.0),
            );
        }
    }

    let euclidean_classical = (a - 2.0).abs() < 1e-12
        && (big_a - 2.0).abs() < 1e-12
        && (kinetic.norm().q() - 2.0).abs() < 1e-12;

    Ok(ConstantsBundle {
        alpha_fn,
        alpha_star: None,
        c_alpha_gamma: gamma,
        c_fk: (a - 1.0).max(big_a - 1.0).max(cert.big_l),
        c_k: m,
        d_fk_hess_f,
        d_fk_hess_k,
        d_k,
        e_k,
        f_k,
        sigma_power: cert.sigma_power,
        d_f_smooth: cert.d_f_smooth,
        d_k_smooth: euclidean_classical.then_some(1.0),
    })
}

/// Assumption constants for the relativistic kinetic (φ_2^1, Euclidean)
/// paired with an objective of Euclidean tail growth B ≥ 2: C_{α,γ} = γ,
/// C_fK = max{1, L}, C_K = 2, α from [`alpha_relativistic`] with
/// A = B/(B−1), and D_fK = 3L_f/min{μ^{A−1}, μ, 1} for B > 2 or
/// D_fK = 6L_f/min{μ, 1} at B = 2 (when the certificate carries L_f).
pub fn constants_relativistic(
    cert: &GrowthCertificate,
    kinetic: &PowerKinetic,
    gamma: f64,
) -> Result<ConstantsBundle, AnalysisError> {
    check_gamma(gamma)?;
    if (kinetic.a() - 2.0).abs() > 1e-12
        || (kinetic.big_a() - 1.0).abs() > 1e-12
        || (kinetic.norm().q() - 2.0).abs() > 1e-12
    {
        return Err(AnalysisError::CertificateMismatch(
            "these constants hold only for the relativistic kinetic (a = 2, A = 1, Euclidean)"
                .into(),
        ));
    }
    if (cert.q - 2.0).abs() > 1e-9 {
        return Err(AnalysisError::CertificateMismatch(
            "the relativistic constants need a Euclidean growth certificate".into(),
        ));
    }
    if cert.big_b < 2.0 - 1e-9 {
        return Err(AnalysisError::CertificateMismatch(format!(
            "the relativistic constants need tail growth B >= 2, got {}",
            cert.big_b
        )));
    }
    if !(cert.mu > 0.0 && cert.big_l > 0.0) {
        return Err(AnalysisError::BadShape(format!(
            "certificate scales must be positive, got mu = {}, L = {}",
            cert.mu, cert.big_l
        )));
    }
    let big_a = conjugate_exponent(cert.big_b);
    let scale = cert.mu.powf(big_a - 1.0).min(cert.mu).min(1.0);
    let d_fk_hess_f = cert.l_f.map(|l_f| {
        if (cert.big_b - 2.0).abs() <= 1e-12 {
            6.0 * l_f / cert.mu.min(1.0)
        } else {
            3.0 * l_f / scale
        }
    });
    Ok(ConstantsBundle {
        alpha_fn: alpha_relativistic(cert.mu, big_a),
        alpha_star: None,
        c_alpha_gamma: gamma,
        c_fk: cert.big_l.max(1.0),
        c_k: 2.0,
        d_fk_hess_f,
        d_fk_hess_k: None,
        d_k: None,
        e_k: None,
        f_k: None,
        sigma_power: cert.sigma_power,
        d_f_smooth: cert.d_f_smooth,
        d_k_smooth: None,
    })
}

/// ψ(t) = t − 3t^{1/3} + 2 for t ≥ 1, zero below: the lower envelope of the
/// relativistic kinetic as a function of squared slope.
pub fn psi_eval(t: f64) -> f64 {
    if t < 1.0 {
        0.0
    } else {
        t - 3.0 * t.cbrt() + 2.0
    }
}

/// Convex conjugate of ψ: ψ*(s) = 2(1−s)^{−1/2} − 2 on [0, 1), +∞ beyond
/// (and 0 for s < 0, where the supremum sits at t = 0). Satisfies
/// ψ*((φ₂¹)′(t)²) = 2φ₂¹(t).
pub fn psi_conj(s: f64) -> f64 {
    if s < 0.0 {
        0.0
    } else if s < 1.0 {
        2.0 / (1.0 - s).sqrt() - 2.0
    } else {
        f64::INFINITY
    }
}

fn need(
    value: Option<f64>,
    which: &'static str,
    needed_for: &'static str,
) -> Result<f64, AnalysisError> {
    value.ok_or(AnalysisError::MissingConstant { which, needed_for })
}

/// Certified maximal step size for a scheme under a constants bundle:
///
/// * implicit:  ε < (1−γ) / (2·max(C_fK, 1))
/// * explicit1: ε < min( (1−γ)/(2·max(C_fK + 6D_fK/C_{α,γ}, 1)),
///                       C_{α,γ}/(10C_fK + 5γC_K) )
/// * explicit2: ε < min( (1−γ)/(2(C_fK + 6D_fK/C_{α,γ})),
///                       (1−γ)/(8D_K(1+E_k)),
///                       C_{α,γ}/(6(5C_fK + 2γC_K) + 12γC_{α,γ}),
///                       √(1/(6γ²D_K F_k)) )
/// * non-convex explicit1: ε ≤ (γ/(D_f·D_K))^{1/(σ−1)}
///
/// All bounds are strict except the non-convex one
/// ([`BoundKind::is_inclusive`]).
pub fn step_bound(
    kind: BoundKind,
    bundle: &ConstantsBundle,
    gamma: f64,
) -> Result<f64, AnalysisError> {
    check_gamma(gamma)?;
    let c_ag = bundle.c_alpha_gamma;
    match kind {
        BoundKind::Implicit => Ok((1.0 - gamma) / (2.0 * bundle.c_fk.max(1.0))),
        BoundKind::Explicit1 => {
            let d_fk = need(bundle.d_fk_hess_f, "D_fK (f-Hessian form)", "the explicit1 bound")?;
            let first = (1.0 - gamma) / (2.0 * (bundle.c_fk + 6.0 * d_fk / c_ag).max(1.0));
            let second = c_ag / (10.0 * bundle.c_fk + 5.0 * gamma * bundle.c_k);
            Ok(first.min(second))
        }
        BoundKind::Explicit2 => {
            let d_fk = need(bundle.d_fk_hess_k, "D_fK (k-Hessian form)", "the explicit2 bound")?;
            let d_k = need(bundle.d_k, "D_K", "the explicit2 bound")?;
            let e_k = need(bundle.e_k, "E_k", "the explicit2 bound")?;
            let f_k = need(bundle.f_k, "F_k", "the explicit2 bound")?;
            let first = (1.0 - gamma) / (2.0 * (bundle.c_fk + 6.0 * d_fk / c_ag));
            let second = (1.0 - gamma) / (8.0 * d_k * (1.0 + e_k));
            let third =
                c_ag / (6.0 * (5.0 * bundle.c_fk + 2.0 * gamma * bundle.c_k) + 12.0 * gamma * c_ag);
            let fourth = (1.0 / (6.0 * gamma * gamma * d_k * f_k)).sqrt();
            Ok(first.min(second).min(third).min(fourth))
        }
        BoundKind::NonconvexExplicit1 => {
            let sigma = need(bundle.sigma_power, "sigma", "the non-convex bound")?;
            let d_f = need(bundle.d_f_smooth, "D_f (smoothness)", "the non-convex bound")?;
            let d_k = need(bundle.d_k_smooth, "D_K (smoothness)", "the non-convex bound")?;
            if sigma <= 1.0 {
                return Err(AnalysisError::BadShape(format!(
                    "smoothness power must exceed 1, got {sigma}"
                )));
            }
            Ok((gamma / (d_f * d_k)).powf(1.0 / (sigma - 1.0)))
        }
    }
}

/// The guaranteed suboptimality envelope: W₀ = `w0` and
///
/// * implicit:  Wᵢ₊₁ = Wᵢ / (1 + εC_{α,γ}(1 − γ − 2C_fK ε)·α(2Wᵢ)/4)
/// * explicit1: Wᵢ₊₁ = Wᵢ / (1 + εC_{α,γ}(1 − γ − 2ε(C_fK + 6D_fK/C_{α,γ}))·α(2Wᵢ)/4)
/// * explicit2: Wᵢ₊₁ = Wᵢ · (1 − εC_{α,γ}(1 − γ − 2ε(C_fK + 6D_fK/C_{α,γ}))·α(2Wᵢ)/4)
///
/// returning [W₀, …, W_n]. The schemes guarantee f(xᵢ) − f(x⋆) ≤ 2Wᵢ when
/// started with W₀ = 3H₀/2 and ε within [`step_bound`]; ε outside the bound
/// is rejected. The non-convex certificate has no suboptimality envelope.
pub fn w_recursion(
    kind: BoundKind,
    w0: f64,
    bundle: &ConstantsBundle,
    gamma: f64,
    epsilon: f64,
    n_steps: usize,
) -> Result<Vec<f64>, AnalysisError> {
    if kind == BoundKind::NonconvexExplicit1 {
        return Err(AnalysisError::BadShape(
            "the non-convex certificate bounds gradients, not suboptimality; \
             no W-envelope exists"
                .into(),
        ));
    }
    if !(w0.is_finite() && w0 >= 0.0) {
        return Err(AnalysisError::BadShape(format!(
            "envelope start must be a nonnegative real, got {w0}"
        )));
    }
    let bound = step_bound(kind, bundle, gamma)?;
    let inside = if kind.is_inclusive() { epsilon <= bound } else { epsilon < bound };
    if !(epsilon > 0.0 && inside) {
        return Err(AnalysisError::BadShape(format!(
            "step size {epsilon} is outside the certified range (bound {bound})"
        )));
    }
    let c_ag = bundle.c_alpha_gamma;
    let bracket = match kind {
        BoundKind::Implicit => 1.0 - gamma - 2.0 * bundle.c_fk * epsilon,
        BoundKind::Explicit1 => {
            let d_fk = bundle.d_fk_hess_f.expect("step_bound verified presence");
            1.0 - gamma - 2.0 * epsilon * (bundle.c_fk + 6.0 * d_fk / c_ag)
        }
        BoundKind::Explicit2 => {
            let d_fk = bundle.d_fk_hess_k.expect("step_bound verified presence");
            1.0 - gamma - 2.0 * epsilon * (bundle.c_fk + 6.0 * d_fk / c_ag)
        }
        BoundKind::NonconvexExplicit1 => unreachable!("rejected above"),
    };
    let mut out = Vec::with_capacity(n_steps + 1);
    let mut w = w0;
    out.push(w);
    for _ in 0..n_steps {
        let c = epsilon * c_ag * bracket * bundle.alpha_fn.eval(2.0 * w) / 4.0;
        w = match kind {
            BoundKind::Explicit2 => w * (1.0 - c),
            _ => w / (1.0 + c),
        };
        out.push(w);
    }
    Ok(out)
}

/// Continuous-time envelope W(t) with W(0) = `w0` and
/// W′ = −λ·α(2W)·W, λ = (1−γ)C_{α,γ}/4, sampled on `t_grid`
/// (nondecreasing, starting at or after 0). Exact exponential for constant
/// α; classic fourth-order Runge–Kutta substepping otherwise.
pub fn continuous_envelope(
    w0: f64,
    alpha: &AlphaFn,
    c_alpha_gamma: f64,
    gamma: f64,
    t_grid: &[f64],
) -> Result<Vec<f64>, AnalysisError> {
    check_gamma(gamma)?;
    if !(w0.is_finite() && w0 >= 0.0) {
        return Err(AnalysisError::BadShape(format!(
            "envelope start must be a nonnegative real, got {w0}"
        )));
    }
    if t_grid.windows(2).any(|w| w[1] < w[0]) || t_grid.first().is_some_and(|&t| t < 0.0) {
        return Err(AnalysisError::BadShape(
            "time grid must be nondecreasing and nonnegative".into(),
        ));
    }
    let lambda = (1.0 - gamma) * c_alpha_gamma / 4.0;
    if let AlphaFn::Constant(c) = alpha {
        return Ok(t_grid.iter().map(|&t| w0 * (-lambda * c * t).exp()).collect());
    }
    let field = |w: f64| -lambda * alpha.eval(2.0 * w) * w;
    let mut out = Vec::with_capacity(t_grid.len());
    let mut t = 0.0;
    let mut w = w0;
    for &target in t_grid {
        let span = target - t;
        if span > 0.0 {
            let steps = ((span * (1.0 + lambda) * 100.0).ceil() as usize).clamp(1, 1_000_000);
            let h = span / steps as f64;
            for _ in 0..steps {
                let k1 = field(w);
                let k2 = field(w + 0.5 * h * k1);
                let k3 = field(w + 0.5 * h * k2);
                let k4 = field(w + h * k3);
                w += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            }
            t = target;
        }
        out.push(w);
    }
    Ok(out)
}

/// Bundles the step bound with the optimal contraction parameters for a
/// scheme. β*/λ* are computed at α⋆ when the bundle has one, else at α(0);
/// for constant α the two agree.
pub fn rate_certificate(
    kind: BoundKind,
    bundle: &ConstantsBundle,
    gamma: f64,
) -> Result<RateCertificate, AnalysisError> {
    let epsilon_max = step_bound(kind, bundle, gamma)?;
    let alpha = bundle.alpha_star.unwrap_or_else(|| bundle.alpha_fn.eval(0.0));
    let (beta_star, lambda_star) = beta_lambda_star(alpha, gamma)?;
    let factor_form = match kind {
        BoundKind::Explicit2 => "multiply",
        _ => "divide",
    };
    Ok(RateCertificate {
        kind,
        epsilon_max,
        factor_form,
        beta_star,
        lambda_star,
    })
}

/// Ordinary least squares y ≈ slope·x + intercept with the coefficient of
/// determination of the fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

pub fn least_squares_line(xs: &[f64], ys: &[f64]) -> Result<LineFit, AnalysisError> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(AnalysisError::BadShape(format!(
            "need two matched samples or more, got {} and {}",
            xs.len(),
            ys.len()
        )));
    }
    let n = xs.len() as f64;
    let x_mean = xs.iter().sum::<f64>() / n;
    let y_mean = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for (&x, &y) in xs.iter().zip(ys) {
        sxx += (x - x_mean) * (x - x_mean);
        sxy += (x - x_mean) * (y - y_mean);
        syy += (y - y_mean) * (y - y_mean);
    }
    if sxx == 0.0 {
        return Err(AnalysisError::BadShape(
            "abscissa values are all identical; slope is undefined".into(),
        ));
    }
    let slope = sxy / sxx;
    let intercept = y_mean - slope * x_mean;
    let ss_res = syy - slope * sxy;
    let r2 = if syy == 0.0 { 1.0 } else { 1.0 - ss_res / syy };
    Ok(LineFit { slope, intercept, r2 })
}
