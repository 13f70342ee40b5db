//! Continuous-time simulation of the damped Hamiltonian flow and the
//! scalar power system driving the lower-bound analysis.
//!
//! [`simulate`] integrates x' = ∇k(p), p' = −∇f(x) − γp with an embedded
//! Dormand–Prince 5(4) pair under PI step control. The scalar system
//!
//! ```text
//! x' = |p|^{a−1} sgn(p),    p' = −|x|^{b−1} sgn(x) − γp
//! ```
//!
//! ([`LowerBoundProblem`]) exhibits a sharp dichotomy when 1/a + 1/b < 1:
//! almost every trajectory falls into a trapping region and converges only
//! polynomially with exponent 1/(ba − b − a), while the exceptional starts
//! (±η, 0) found by [`shoot_eta`] converge linearly. [`fit_rate`] classifies
//! an observed decay as one or the other.

use crate::analysis::least_squares_line;
use crate::integrators::State;
use crate::kinetic::{KineticEnergy, KineticError};
use crate::objective::ObjectiveSpec;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ContinuousError {
    #[error("bad configuration: {0}")]
    BadConfig(String),
    #[error("kinetic energy cannot drive the flow: {0}")]
    Kinetic(#[from] KineticError),
    #[error(
        "step size underflowed to {step:.3e} at t = {t:.6}; \
         the system looks stiff at this tolerance"
    )]
    Stiffness { t: f64, step: f64 },
    #[error("outside the regime this quantity is defined in: {0}")]
    OutsideRegime(String),
    #[error(
        "trajectory from ({theta}, 0) neither entered a trapping region nor passed \
         the origin before t = {horizon}"
    )]
    ClassificationAmbiguous { theta: f64, horizon: f64 },
    #[error("invalid shooting bracket: {0}")]
    InvalidBracket(String),
    #[error(
        "classification at theta = {theta} stayed tolerance-dependent down to the \
         1e-13 relative floor"
    )]
    ToleranceFloor { theta: f64 },
    #[error("cannot fit a rate: {0}")]
    DegenerateWindow(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct OdeConfig {
    pub t_end: f64,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
    /// Every how-many-th accepted step is recorded (first and last always).
    pub record_stride: usize,
}

impl OdeConfig {
    pub fn new(t_end: f64) -> Self {
        OdeConfig {
            t_end,
            rel_tol: 1e-9,
            abs_tol: 1e-12,
            max_step: f64::INFINITY,
            record_stride: 1,
        }
    }

    pub fn with_tolerances(mut self, rel_tol: f64, abs_tol: f64) -> Self {
        self.rel_tol = rel_tol;
        self.abs_tol = abs_tol;
        self
    }

    pub fn with_record_stride(mut self, stride: usize) -> Self {
        self.record_stride = stride;
        self
    }

    fn validate(&self) -> Result<(), ContinuousError> {
        if !(self.t_end.is_finite() && self.t_end >= 0.0) {
            return Err(ContinuousError::BadConfig(format!(
                "t_end must be a nonnegative real, got {}",
                self.t_end
            )));
        }
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0) {
            return Err(ContinuousError::BadConfig(format!(
                "tolerances must be positive, got rel {} abs {}",
                self.rel_tol, self.abs_tol
            )));
        }
        if !(self.max_step > 0.0) {
            return Err(ContinuousError::BadConfig(format!(
                "max step must be positive, got {}",
                self.max_step
            )));
        }
        if self.record_stride == 0 {
            return Err(ContinuousError::BadConfig("record stride must be positive".into()));
        }
        Ok(())
    }
}

/// One recorded instant of a continuous trajectory; `h` is
/// k(p) + f(x) − f(x⋆) (with f(x⋆) taken as 0 when unknown, which shifts
/// but never reorders the energies).
#[derive(Debug, Clone, PartialEq)]
pub struct OdeSample {
    pub t: f64,
    pub x: Vec<f64>,
    pub p: Vec<f64>,
    pub h: f64,
}

/// The flow's right-hand side split into (x', p') = (∇k(p), −∇f(x) − γp).
pub fn ode_field(
    kinetic: &dyn KineticEnergy,
    spec: &ObjectiveSpec,
    gamma: f64,
    state: &State,
) -> (Vec<f64>, Vec<f64>) {
    let velocity = kinetic.velocity(&state.p);
    let gfx = spec.grad(&state.x);
    let force = gfx
        .iter()
        .zip(&state.p)
        .map(|(&g, &p)| -g - gamma * p)
        .collect();
    (velocity, force)
}

// Dormand–Prince 5(4) coefficients (the stage-time column is irrelevant
// for an autonomous field). The last stage evaluates the field at the
// accepted point, so it seeds the next step for free (FSAL).
const A: [[f64; 6]; 6] = [
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const B5: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Integrates y' = field(y) from t = 0 to `t_end`, invoking `on_accept`
/// with the initial state and after every accepted step. `on_accept`
/// returning false ends the integration early without error.
fn dopri5(
    field: &dyn Fn(&[f64]) -> Vec<f64>,
    y0: &[f64],
    t_end: f64,
    rel_tol: f64,
    abs_tol: f64,
    max_step: f64,
    on_accept: &mut dyn FnMut(f64, &[f64]) -> bool,
) -> Result<(), ContinuousError> {
    let d = y0.len();
    let mut t = 0.0;
    let mut y = y0.to_vec();
    if !on_accept(t, &y) || t_end == 0.0 {
        return Ok(());
    }

    let mut k: Vec<Vec<f64>> = vec![vec![0.0; d]; 7];
    k[0] = field(&y);

    // First step from the ratio of state to slope scales; the controller
    // corrects any misjudgment within a few steps.
    let weight = |yi: f64| abs_tol + rel_tol * yi.abs();
    let y_scale: f64 = y.iter().map(|&v| (v / weight(v)).powi(2)).sum::<f64>().sqrt();
    let f_scale: f64 =
        k[0].iter().zip(&y).map(|(&f, &v)| (f / weight(v)).powi(2)).sum::<f64>().sqrt();
    let mut h = if f_scale > 0.0 {
        (0.01 * (1.0 + y_scale) / f_scale).min(t_end).min(max_step)
    } else {
        (t_end / 100.0).min(max_step)
    };
    h = h.max(1e-10);

    let mut err_prev: f64 = 1e-4;
    loop {
        h = h.min(max_step).min(t_end - t);
        if h < 1e-14 * t.abs().max(1.0) {
            return Err(ContinuousError::Stiffness { t, step: h });
        }
        let mut stage = vec![0.0; d];
        for s in 1..7 {
            for i in 0..d {
                let mut acc = 0.0;
                for (j, kj) in k.iter().enumerate().take(s) {
                    let a_sj = A[s - 1][j];
                    if a_sj != 0.0 {
                        acc += a_sj * kj[i];
                    }
                }
                stage[i] = y[i] + h * acc;
            }
            k[s] = field(&stage);
        }
        // Stage 7 is evaluated at the candidate point, so `stage` now holds
        // the fifth-order solution.
        let y_new = stage;
        let mut err_sq = 0.0;
        for i in 0..d {
            let mut e = 0.0;
            for s in 0..7 {
                e += (B5[s] - B4[s]) * k[s][i];
            }
            e *= h;
            let w = abs_tol + rel_tol * y[i].abs().max(y_new[i].abs());
            err_sq += (e / w) * (e / w);
        }
        let err = (err_sq / d as f64).sqrt();

        if err <= 1.0 {
            t += h;
            y = y_new;
            k.swap(0, 6);
            let cont = on_accept(t, &y);
            if !cont || t >= t_end {
                return Ok(());
            }
            let fac = (0.9 * err.powf(-0.14) * err_prev.powf(0.08)).clamp(0.2, 5.0);
            err_prev = err.max(1e-4);
            h *= fac;
        } else {
            h *= (0.9 * err.powf(-0.2)).max(0.2);
        }
    }
}

/// Simulates the flow for `kinetic`/`spec` under damping `gamma` from
/// `initial`, sampling every `record_stride` accepted steps (plus the
/// initial and final instants).
pub fn simulate(
    kinetic: &dyn KineticEnergy,
    spec: &ObjectiveSpec,
    gamma: f64,
    initial: &State,
    config: &OdeConfig,
) -> Result<Vec<OdeSample>, ContinuousError> {
    config.validate()?;
    if initial.x.len() != spec.dim() || initial.p.len() != spec.dim() {
        return Err(ContinuousError::BadConfig(format!(
            "state dimension {}/{} does not match objective dimension {}",
            initial.x.len(),
            initial.p.len(),
            spec.dim()
        )));
    }
    if !(gamma.is_finite() && gamma >= 0.0) {
        return Err(ContinuousError::BadConfig(format!(
            "damping must be nonnegative and finite, got {gamma}"
        )));
    }
    kinetic.step_ready()?;

    let d = spec.dim();
    let f_star = spec.f_star().unwrap_or(0.0);
    let field = |y: &[f64]| -> Vec<f64> {
        let (x, p) = y.split_at(d);
        let mut out = kinetic.velocity(p);
        let gfx = spec.grad(x);
        out.extend(gfx.iter().zip(p).map(|(&g, &pi)| -g - gamma * pi));
        out
    };
    let y0: Vec<f64> = initial.x.iter().chain(&initial.p).copied().collect();

    let mut samples = Vec::new();
    let mut accepted = 0usize;
    let mut on_accept = |t: f64, y: &[f64]| {
        let record = accepted % config.record_stride == 0 || t >= config.t_end;
        accepted += 1;
        if record {
            let (x, p) = y.split_at(d);
            samples.push(OdeSample {
                t,
                x: x.to_vec(),
                p: p.to_vec(),
                h: kinetic.energy(p) + spec.eval(x) - f_star,
            });
        }
        true
    };
    dopri5(
        &field,
        &y0,
        config.t_end,
        config.rel_tol,
        config.abs_tol,
        config.max_step,
        &mut on_accept,
    )?;
    Ok(samples)
}

/// The scalar two-power system x' = |p|^{a−1}sgn(p),
/// p' = −|x|^{b−1}sgn(x) − γp.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LowerBoundProblem {
    a: f64,
    b: f64,
    gamma: f64,
}

/// Trajectories of the scalar system halt once |x| drops below this: the
/// field is not Lipschitz at the origin, and data past that point says
/// nothing about the decay law.
pub const ORIGIN_CUTOFF: f64 = 1e-12;

impl LowerBoundProblem {
    pub fn new(a: f64, b: f64, gamma: f64) -> Result<Self, ContinuousError> {
        if !(a.is_finite() && b.is_finite() && a > 1.0 && b > 1.0) {
            return Err(ContinuousError::BadConfig(format!(
                "powers must exceed 1, got a = {a}, b = {b}"
            )));
        }
        if !(gamma.is_finite() && gamma > 0.0) {
            return Err(ContinuousError::BadConfig(format!(
                "damping must be positive, got {gamma}"
            )));
        }
        Ok(LowerBoundProblem { a, b, gamma })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// True when 1/a + 1/b < 1, the regime where generic trajectories are
    /// trapped into polynomial decay.
    pub fn sublinear_regime(&self) -> bool {
        1.0 / self.a + 1.0 / self.b < 1.0
    }

    /// The predicted polynomial decay exponent 1/(ba − b − a); only defined
    /// in the sublinear regime.
    pub fn predicted_exponent(&self) -> Option<f64> {
        self.sublinear_regime()
            .then(|| 1.0 / (self.b * self.a - self.b - self.a))
    }

    /// (x', p') at one state.
    pub fn field(&self, x: f64, p: f64) -> (f64, f64) {
        let dx = p.abs().powf(self.a - 1.0) * p.signum();
        let dp = -x.abs().powf(self.b - 1.0) * x.signum() - self.gamma * p;
        (dx, dp)
    }

    /// Width ξ(A) = ((γA − 1)/((b−1)A^a))^{1/(ba−b−a)} of the trapping
    /// region R_A. Needs the sublinear regime and A > 1/γ.
    pub fn xi(&self, big_a: f64) -> Result<f64, ContinuousError> {
        if !self.sublinear_regime() {
            return Err(ContinuousError::OutsideRegime(
                "trapping regions exist only when 1/a + 1/b < 1".into(),
            ));
        }
        if !(big_a > 1.0 / self.gamma) {
            return Err(ContinuousError::OutsideRegime(format!(
                "region parameter must exceed 1/gamma = {}, got {big_a}",
                1.0 / self.gamma
            )));
        }
        let q = self.b * self.a - self.b - self.a;
        Ok(((self.gamma * big_a - 1.0) / ((self.b - 1.0) * big_a.powf(self.a))).powf(1.0 / q))
    }

    /// Membership in R_A = {0 < x < ξ(A), −A·x^{b−1} < p < 0}.
    pub fn in_trapping_region(&self, big_a: f64, x: f64, p: f64) -> Result<bool, ContinuousError> {
        let xi = self.xi(big_a)?;
        Ok(0.0 < x && x < xi && -big_a * x.powf(self.b - 1.0) < p && p < 0.0)
    }
}

/// Integrates the scalar system from (x0, p0), halting at `t_end` or when
/// |x| < [`ORIGIN_CUTOFF`]. Samples are (t, x, p) at recorded steps.
pub fn simulate_power_system(
    prob: &LowerBoundProblem,
    x0: f64,
    p0: f64,
    config: &OdeConfig,
) -> Result<Vec<(f64, f64, f64)>, ContinuousError> {
    config.validate()?;
    let field = |y: &[f64]| -> Vec<f64> {
        let (dx, dp) = prob.field(y[0], y[1]);
        vec![dx, dp]
    };
    let mut samples = Vec::new();
    let mut accepted = 0usize;
    let mut on_accept = |t: f64, y: &[f64]| {
        let halt = y[0].abs() < ORIGIN_CUTOFF;
        if halt || accepted % config.record_stride == 0 || t >= config.t_end {
            samples.push((t, y[0], y[1]));
        }
        accepted += 1;
        !halt
    };
    dopri5(
        &field,
        &[x0, p0],
        config.t_end,
        config.rel_tol,
        config.abs_tol,
        config.max_step,
        &mut on_accept,
    )?;
    Ok(samples)
}

/// Outcome of watching a trajectory against one trapping region.
#[derive(Debug, Clone, PartialEq)]
pub struct TrappingReport {
    pub samples_checked: usize,
    /// (t, x, p) of the first sample outside the region, if any escaped.
    pub first_violation: Option<(f64, f64, f64)>,
}

impl TrappingReport {
    pub fn passed(&self) -> bool {
        self.first_violation.is_none()
    }
}

/// Simulates from a state inside R_A and checks membership at every
/// accepted step until `horizon`. Starting outside the region is an error.
pub fn trapping_forward_invariance_check(
    prob: &LowerBoundProblem,
    big_a: f64,
    x0: f64,
    p0: f64,
    horizon: f64,
) -> Result<TrappingReport, ContinuousError> {
    if !prob.in_trapping_region(big_a, x0, p0)? {
        return Err(ContinuousError::OutsideRegime(format!(
            "start ({x0}, {p0}) is not inside the trapping region"
        )));
    }
    let xi = prob.xi(big_a)?;
    let field = |y: &[f64]| -> Vec<f64> {
        let (dx, dp) = prob.field(y[0], y[1]);
        vec![dx, dp]
    };
    let mut checked = 0usize;
    let mut violation = None;
    let mut on_accept = |t: f64, y: &[f64]| {
        checked += 1;
        let (x, p) = (y[0], y[1]);
        let inside = 0.0 < x && x < xi && -big_a * x.powf(prob.b - 1.0) < p && p < 0.0;
        // The orbit may legitimately reach the cutoff ball around the
        // origin within the horizon; that is convergence, not escape.
        if !inside && x.abs() >= ORIGIN_CUTOFF && violation.is_none() {
            violation = Some((t, x, p));
        }
        violation.is_none() && x.abs() >= ORIGIN_CUTOFF
    };
    let config = OdeConfig::new(horizon);
    dopri5(
        &field,
        &[x0, p0],
        config.t_end,
        config.rel_tol,
        config.abs_tol,
        config.max_step,
        &mut on_accept,
    )?;
    Ok(TrappingReport {
        samples_checked: checked,
        first_violation: violation,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Shot {
    /// Entered a trapping region: destined for polynomial decay.
    Slow,
    /// Passed the origin into the left half-plane: the orbit spirals on.
    Cross,
    Ambiguous,
}

fn classify_once(
    prob: &LowerBoundProblem,
    theta: f64,
    horizon: f64,
    rel_tol: f64,
    xis: &[(f64, f64)],
) -> Result<Shot, ContinuousError> {
    let field = |y: &[f64]| -> Vec<f64> {
        let (dx, dp) = prob.field(y[0], y[1]);
        vec![dx, dp]
    };
    let mut shot = Shot::Ambiguous;
    // On the slow manifold the momentum sits at -x^(b-1), which for
    // near-critical shots is far below what the integrator resolves in p, so
    // the trapping test must tolerate that much slack on both edges. The
    // slack cannot misfile a crossing shot: while x > 0 the exact momentum
    // stays strictly negative, and a shot headed across the origin still
    // carries |p| well above the slack whenever the window is reachable.
    let p_slack = 10.0 * rel_tol * 1e-3;
    let mut on_accept = |_t: f64, y: &[f64]| {
        let (x, p) = (y[0], y[1]);
        // A trapped orbit keeps x > 0 for all time, so any x materially below
        // zero already certifies a crossing. Waiting for the momentum to swing
        // back past zero is not an option: left of the origin p relaxes onto
        // an equilibrium of size |x|^(b-1), which for near-critical shots sits
        // far below the integrator's absolute resolution.
        if x <= -ORIGIN_CUTOFF {
            shot = Shot::Cross;
            return false;
        }
        for &(big_a, xi) in xis {
            if 0.0 < x
                && x < xi
                && -big_a * x.powf(prob.b - 1.0) - p_slack < p
                && p < p_slack
            {
                shot = Shot::Slow;
                return false;
            }
        }
        x.abs() >= ORIGIN_CUTOFF
    };
    dopri5(&field, &[theta, 0.0], horizon, rel_tol, rel_tol * 1e-3, f64::INFINITY, &mut on_accept)?;
    Ok(shot)
}

/// Classifies stably: the verdict must agree between `rel_tol` and half of
/// it, tightening both until agreement or the 1e−13 floor.
fn classify(
    prob: &LowerBoundProblem,
    theta: f64,
    horizon: f64,
    xis: &[(f64, f64)],
    evaluations: &mut usize,
) -> Result<Shot, ContinuousError> {
    let mut rel_tol = 1e-9;
    loop {
        *evaluations += 2;
        let coarse = classify_once(prob, theta, horizon, rel_tol, xis)?;
        let fine = classify_once(prob, theta, horizon, rel_tol / 2.0, xis)?;
        if coarse == fine {
            if coarse == Shot::Ambiguous {
                return Err(ContinuousError::ClassificationAmbiguous { theta, horizon });
            }
            return Ok(coarse);
        }
        rel_tol /= 4.0;
        if rel_tol < 1e-13 {
            return Err(ContinuousError::ToleranceFloor { theta });
        }
    }
}

/// The exceptional starting height and its enclosing bracket.
#[derive(Debug, Clone, PartialEq)]
pub struct EtaEstimate {
    pub eta: f64,
    pub bracket: (f64, f64),
    /// Total ODE integrations spent (each stable classification costs at
    /// least two).
    pub evaluations: usize,
}

/// Locates the boundary η between starts (θ, 0) that fall into a trapping
/// region (θ < η) and those that re-cross the axis (θ > η), by bisection
/// until the bracket width is at most `tol` relative to η.
///
/// Trapping is detected against R_A for A ∈ {1.5, 2, 4}/γ; the horizon per
/// shot is 10⁴ time units. `bracket` overrides the automatic choice
/// lo = ξ(2/γ)/2 (guaranteed slow) with doubling until a crossing start is
/// found; explicit endpoints must classify slow/cross respectively.
pub fn shoot_eta(
    prob: &LowerBoundProblem,
    bracket: Option<(f64, f64)>,
    tol: f64,
) -> Result<EtaEstimate, ContinuousError> {
    if !prob.sublinear_regime() {
        return Err(ContinuousError::OutsideRegime(
            "the exceptional path exists only when 1/a + 1/b < 1".into(),
        ));
    }
    if !(tol.is_finite() && tol > 0.0 && tol < 1.0) {
        return Err(ContinuousError::BadConfig(format!(
            "relative bracket tolerance must lie in (0, 1), got {tol}"
        )));
    }
    let horizon = 1e4;
    let grid = [1.5 / prob.gamma, 2.0 / prob.gamma, 4.0 / prob.gamma];
    let mut xis = Vec::new();
    for big_a in grid {
        xis.push((big_a, prob.xi(big_a)?));
    }
    let mut evaluations = 0usize;

    let (mut lo, mut hi) = match bracket {
        Some((lo, hi)) => {
            if !(lo > 0.0 && hi > lo) {
                return Err(ContinuousError::InvalidBracket(format!(
                    "need 0 < lo < hi, got ({lo}, {hi})"
                )));
            }
            if classify(prob, lo, horizon, &xis, &mut evaluations)? != Shot::Slow {
                return Err(ContinuousError::InvalidBracket(format!(
                    "lower end {lo} does not classify as trapped"
                )));
            }
            if classify(prob, hi, horizon, &xis, &mut evaluations)? != Shot::Cross {
                return Err(ContinuousError::InvalidBracket(format!(
                    "upper end {hi} does not classify as crossing"
                )));
            }
            (lo, hi)
        }
        None => {
            let lo = prob.xi(2.0 / prob.gamma)? / 2.0;
            let mut hi = (2.0 * lo).max(1.0);
            let mut grown = 0;
            while classify(prob, hi, horizon, &xis, &mut evaluations)? != Shot::Cross {
                hi *= 2.0;
                grown += 1;
                if grown > 60 {
                    return Err(ContinuousError::InvalidBracket(
                        "no crossing start found below 2^60 times the initial guess".into(),
                    ));
                }
            }
            (lo, hi)
        }
    };

    while hi - lo > tol * 0.5 * (lo + hi) {
        let mid = 0.5 * (lo + hi);
        match classify(prob, mid, horizon, &xis, &mut evaluations)? {
            Shot::Slow => lo = mid,
            Shot::Cross => hi = mid,
            Shot::Ambiguous => unreachable!("classify never returns ambiguous"),
        }
    }
    Ok(EtaEstimate {
        eta: 0.5 * (lo + hi),
        bracket: (lo, hi),
        evaluations,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RateKind {
    Linear,
    Sublinear,
}

/// Decay law fitted to |x_t| samples: `rate` is the exponential rate from
/// the log-linear fit (|x| ≈ e^{−rate·t}), `power` the polynomial exponent
/// from the log-log fit (|x| ≈ t^{−power}); `kind` names whichever fit
/// explains the window better, and `fit_r2` is that fit's R².
#[derive(Debug, Clone, PartialEq)]
pub struct RateFit {
    pub kind: RateKind,
    pub rate: f64,
    pub power: f64,
    pub fit_r2: f64,
}

/// Fits both decay models to the (t, |x|) samples with t inside `window`
/// and picks the better-explained one. Samples with |x| = 0 (post-collapse)
/// are ignored; the log-log fit additionally needs t > 0.
pub fn fit_rate(
    samples: &[(f64, f64)],
    window: (f64, f64),
) -> Result<RateFit, ContinuousError> {
    let in_window: Vec<(f64, f64)> = samples
        .iter()
        .copied()
        .filter(|&(t, v)| t >= window.0 && t <= window.1 && v > 0.0)
        .collect();
    if in_window.len() < 2 {
        return Err(ContinuousError::DegenerateWindow(format!(
            "only {} usable samples in [{}, {}]",
            in_window.len(),
            window.0,
            window.1
        )));
    }
    let ts: Vec<f64> = in_window.iter().map(|&(t, _)| t).collect();
    let log_v: Vec<f64> = in_window.iter().map(|&(_, v)| v.ln()).collect();
    let linear = least_squares_line(&ts, &log_v).ok();

    let positive_t: Vec<(f64, f64)> =
        in_window.iter().copied().filter(|&(t, _)| t > 0.0).collect();
    let sublinear = if positive_t.len() >= 2 {
        let log_t: Vec<f64> = positive_t.iter().map(|&(t, _)| t.ln()).collect();
        let log_v: Vec<f64> = positive_t.iter().map(|&(_, v)| v.ln()).collect();
        least_squares_line(&log_t, &log_v).ok()
    } else {
        None
    };

    match (linear, sublinear) {
        (None, None) => Err(ContinuousError::DegenerateWindow(
            "neither decay model is fittable on this window".into(),
        )),
        (lin, sub) => {
            let lin_r2 = lin.as_ref().map_or(f64::NEG_INFINITY, |f| f.r2);
            let sub_r2 = sub.as_ref().map_or(f64::NEG_INFINITY, |f| f.r2);
            let rate = lin.as_ref().map_or(f64::NAN, |f| -f.slope);
            let power = sub.as_ref().map_or(f64::NAN, |f| -f.slope);
            let (kind, fit_r2) = if lin_r2 >= sub_r2 {
                (RateKind::Linear, lin_r2)
            } else {
                (RateKind::Sublinear, sub_r2)
            };
            Ok(RateFit { kind, rate, power, fit_r2 })
        }
    }
}
