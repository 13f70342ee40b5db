//! Discrete-time solvers for the damped Hamiltonian flow
//!
//! ```text
//! x' = ∇k(p),    p' = −∇f(x) − γ p
//! ```
//!
//! Three discretizations share the damping factor δ = 1/(1 + γε):
//!
//! * `explicit1` — momentum first: p⁺ = δ(p − ε∇f(x)), x⁺ = x + ε∇k(p⁺)
//! * `explicit2` — position first: x⁺ = x + ε∇k(p), p⁺ = (1−εγ)p − ε∇f(x⁺)
//! * `implicit`  — p⁺ = δp − εδ∇f(x⁺) with x⁺ defined through itself; x⁺ is
//!   the minimizer of G(x) = ε k*((x−xᵢ)/ε) + εδ f(x) − δ⟨pᵢ, x⟩
//!
//! plus two baselines, classical momentum (explicit1 with ∇k(p) = p baked
//! in) and plain gradient descent. [`run`] drives any of them with energy
//! tracking and configurable stopping.

use crate::kinetic::{KineticEnergy, KineticError};
use crate::linalg::{self, DenseMatrix};
use crate::objective::ObjectiveSpec;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IntegratorError {
    #[error("state dimension {got} does not match objective dimension {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("bad configuration: {0}")]
    BadConfig(String),
    #[error("kinetic energy cannot drive this scheme: {0}")]
    KineticNotReady(#[from] KineticError),
    #[error("suboptimality-based stopping needs an objective with a known minimum")]
    MinimumUnknown,
    #[error(
        "implicit subsolver stalled at iteration {iter}: residual {residual:.3e} \
         after {inner_iters} inner iterations"
    )]
    SubsolverFailed { iter: usize, residual: f64, inner_iters: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Explicit1,
    Explicit2,
    Implicit,
    ClassicalMomentum,
    GradientDescent,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Explicit1 => "explicit1",
            Method::Explicit2 => "explicit2",
            Method::Implicit => "implicit",
            Method::ClassicalMomentum => "momentum",
            Method::GradientDescent => "gd",
        }
    }
}

/// Position/momentum pair; the only mutable state a solver carries.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub x: Vec<f64>,
    pub p: Vec<f64>,
}

impl State {
    pub fn new(x: Vec<f64>, p: Vec<f64>) -> Self {
        State { x, p }
    }

    /// Position with zero momentum, the usual cold start.
    pub fn at_rest(x: Vec<f64>) -> Self {
        let p = vec![0.0; x.len()];
        State { x, p }
    }

    fn is_finite(&self) -> bool {
        self.x.iter().chain(&self.p).all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntegratorConfig {
    pub method: Method,
    pub epsilon: f64,
    pub gamma: f64,
    pub max_iters: usize,
    /// Implicit subsolver stops when ‖∇G‖₂ falls below this.
    pub subsolver_tol: f64,
    pub subsolver_max_iters: usize,
    /// Trajectory is recorded every this many iterations (first and last
    /// always included).
    pub record_stride: usize,
}

impl IntegratorConfig {
    pub fn new(method: Method, epsilon: f64, gamma: f64, max_iters: usize) -> Self {
        IntegratorConfig {
            method,
            epsilon,
            gamma,
            max_iters,
            subsolver_tol: 1e-10,
            subsolver_max_iters: 200,
            record_stride: 1,
        }
    }

    pub fn with_record_stride(mut self, stride: usize) -> Self {
        self.record_stride = stride;
        self
    }

    pub fn with_subsolver(mut self, tol: f64, max_iters: usize) -> Self {
        self.subsolver_tol = tol;
        self.subsolver_max_iters = max_iters;
        self
    }
}

/// Snapshot of the state at one recorded iteration. `h` and `suboptimality`
/// need the objective's minimum and are `None` without it; `v` is left for
/// callers that pair the trajectory with a rate certificate.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub iter: usize,
    pub x: Vec<f64>,
    pub p: Vec<f64>,
    pub h: Option<f64>,
    pub suboptimality: Option<f64>,
    pub v: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StopRule {
    /// Stop once f(x) − f(x⋆) ≤ tol.
    SuboptTol(f64),
    /// Stop once ‖∇f(x)‖₂ ≤ tol.
    GradTol(f64),
    /// Run the full iteration budget.
    Iters,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopCause {
    SuboptTol { iter: usize },
    GradTol { iter: usize },
    MaxIters,
    /// The state left the floating-point range; the offending iterate is the
    /// last record.
    NonFinite { iter: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub records: Vec<TrajectoryRecord>,
    /// Iterations whose total energy rose by more than 1e−12 of the largest
    /// energy seen so far — empty whenever the scheme is dissipating as the
    /// theory says it should.
    pub h_violation_iters: Vec<usize>,
    pub warnings: Vec<String>,
    pub stop_cause: StopCause,
    /// Steps actually taken (the last record's iteration index).
    pub iters: usize,
}

fn damping(epsilon: f64, gamma: f64) -> f64 {
    1.0 / (1.0 + gamma * epsilon)
}

pub fn step_explicit1(
    spec: &ObjectiveSpec,
    kinetic: &dyn KineticEnergy,
    epsilon: f64,
    gamma: f64,
    state: &State,
) -> State {
    let delta = damping(epsilon, gamma);
    let gfx = spec.grad(&state.x);
    let p = linalg::scale(&linalg::add_scaled(&state.p, -epsilon, &gfx), delta);
    let x = linalg::add_scaled(&state.x, epsilon, &kinetic.velocity(&p));
    State { x, p }
}

pub fn step_explicit2(
    spec: &ObjectiveSpec,
    kinetic: &dyn KineticEnergy,
    epsilon: f64,
    gamma: f64,
    state: &State,
) -> State {
    let x = linalg::add_scaled(&state.x, epsilon, &kinetic.velocity(&state.p));
    let gfx = spec.grad(&x);
    let p = linalg::add_scaled(&linalg::scale(&state.p, 1.0 - epsilon * gamma), -epsilon, &gfx);
    State { x, p }
}

pub fn step_classical_momentum(
    spec: &ObjectiveSpec,
    epsilon: f64,
    gamma: f64,
    state: &State,
) -> State {
    let delta = damping(epsilon, gamma);
    let gfx = spec.grad(&state.x);
    let p = linalg::scale(&linalg::add_scaled(&state.p, -epsilon, &gfx), delta);
    let x = linalg::add_scaled(&state.x, epsilon, &p);
    State { x, p }
}

pub fn step_gradient_descent(spec: &ObjectiveSpec, epsilon: f64, state: &State) -> State {
    let gfx = spec.grad(&state.x);
    State {
        x: linalg::add_scaled(&state.x, -epsilon, &gfx),
        p: vec![0.0; state.p.len()],
    }
}

/// One implicit step. Inner solve detail is in [`solve_implicit_update`].
pub fn step_implicit(
    spec: &ObjectiveSpec,
    kinetic: &dyn KineticEnergy,
    epsilon: f64,
    gamma: f64,
    state: &State,
    subsolver_tol: f64,
    subsolver_max_iters: usize,
) -> Result<State, IntegratorError> {
    solve_implicit_update(spec, kinetic, epsilon, gamma, state, subsolver_tol, subsolver_max_iters)
        .map_err(|(residual, inner_iters)| IntegratorError::SubsolverFailed {
            iter: 0,
            residual,
            inner_iters,
        })
}

/// Solves x⁺ = xᵢ + ε∇k(δpᵢ − εδ∇f(x⁺)) and returns the updated state.
///
/// The iterate x is repeatedly mapped through the right-hand side; when both
/// the objective and the kinetic expose Hessian products, the update is a
/// damped Newton step on F(x) = x − xᵢ − ε∇k(δpᵢ − εδ∇f(x)) with Jacobian
/// I + ε²δ ∇²k ∇²f built column-by-column, otherwise the fixed-point map
/// itself (backtracked on ‖F‖₂ either way). Convergence is declared at the
/// mapped point x̃ = xᵢ + ε∇k(δpᵢ − εδ∇f(x)), where the optimality residual
/// of G telescopes to ∇G(x̃) = εδ(∇f(x̃) − ∇f(x)) — this avoids evaluating
/// ∇k* and keeps every probe inside the conjugate's domain even for
/// saturating kinetics. Errors carry (last residual, inner iterations).
fn solve_implicit_update(
    spec: &ObjectiveSpec,
    kinetic: &dyn KineticEnergy,
    epsilon: f64,
    gamma: f64,
    state: &State,
    tol: f64,
    max_iters: usize,
) -> Result<State, (f64, usize)> {
    let delta = damping(epsilon, gamma);
    let p_scaled = linalg::scale(&state.p, delta);
    // q(x) = δpᵢ − εδ∇f(x) is the momentum the step would produce from x.
    let momentum_at = |gfx: &[f64]| linalg::add_scaled(&p_scaled, -epsilon * delta, gfx);
    let newton_possible = spec.has_hvp();

    let mut x = state.x.clone();
    let mut gfx = spec.grad(&x);
    let mut residual = f64::INFINITY;
    for _inner in 0..max_iters {
        let q = momentum_at(&gfx);
        let mapped = linalg::add_scaled(&state.x, epsilon, &kinetic.velocity(&q));
        let g_mapped = spec.grad(&mapped);
        residual = epsilon * delta * linalg::norm2(&linalg::sub(&g_mapped, &gfx));
        if residual <= tol {
            return Ok(State { p: momentum_at(&g_mapped), x: mapped });
        }

        let f_residual = linalg::sub(&mapped, &x);
        let f_norm = linalg::norm2(&f_residual);
        let mut direction = None;
        if newton_possible {
            direction = newton_direction(spec, kinetic, epsilon, delta, &x, &q, &f_residual);
        }
        let step = direction.unwrap_or(f_residual);

        // Backtrack on ‖F‖₂; the fixed-point map keeps candidates valid, so
        // only sufficient decrease is at stake here.
        let mut lambda = 1.0;
        loop {
            let candidate = linalg::add_scaled(&x, lambda, &step);
            let g_candidate = spec.grad(&candidate);
            let q_candidate = momentum_at(&g_candidate);
            let mapped_candidate =
                linalg::add_scaled(&state.x, epsilon, &kinetic.velocity(&q_candidate));
            let f_candidate = linalg::norm2(&linalg::sub(&mapped_candidate, &candidate));
            if f_candidate <= (1.0 - 0.25 * lambda) * f_norm || lambda < 1e-6 {
                x = candidate;
                gfx = g_candidate;
                break;
            }
            lambda *= 0.5;
        }
    }
    Err((residual, max_iters))
}

/// Newton direction for the implicit residual: solves
/// (I + ε²δ ∇²k(q) ∇²f(x)) s = F-residual. Returns `None` when the kinetic
/// declines a Hessian product at q or the system is singular.
fn newton_direction(
    spec: &ObjectiveSpec,
    kinetic: &dyn KineticEnergy,
    epsilon: f64,
    delta: f64,
    x: &[f64],
    q: &[f64],
    f_residual: &[f64],
) -> Option<Vec<f64>> {
    let d = x.len();
    let scale = epsilon * epsilon * delta;
    let mut jac = DenseMatrix::identity(d);
    let mut probe = vec![0.0; d];
    for j in 0..d {
        probe[j] = 1.0;
        let hf = spec.hvp(x, &probe)?;
        let hk_hf = kinetic.hessian_matvec(q, &hf)?;
        for i in 0..d {
            jac.set(i, j, jac.get(i, j) + scale * hk_hf[i]);
        }
        probe[j] = 0.0;
    }
    jac.solve(f_residual)
}

/// Runs `config.max_iters` steps of the configured method from `initial`,
/// recording the trajectory and watching energy monotonicity.
///
/// The stop rule is checked before every step, so a satisfied initial state
/// returns immediately. Total energy H = k(p) + f(x) − f(x⋆) and
/// suboptimality are tracked whenever the objective knows its minimum. A
/// state that leaves the floating-point range ends the run with
/// [`StopCause::NonFinite`] rather than an error, since a diverging run is
/// an answer, not a malfunction.
pub fn run(
    spec: &ObjectiveSpec,
    kinetic: &dyn KineticEnergy,
    config: &IntegratorConfig,
    initial: State,
    stop: StopRule,
) -> Result<RunResult, IntegratorError> {
    if initial.x.len() != spec.dim() {
        return Err(IntegratorError::DimensionMismatch {
            expected: spec.dim(),
            got: initial.x.len(),
        });
    }
    if initial.p.len() != spec.dim() {
        return Err(IntegratorError::DimensionMismatch {
            expected: spec.dim(),
            got: initial.p.len(),
        });
    }
    if !(config.epsilon.is_finite() && config.epsilon > 0.0) {
        return Err(IntegratorError::BadConfig(format!(
            "step size must be positive and finite, got {}",
            config.epsilon
        )));
    }
    if !(config.gamma.is_finite() && config.gamma >= 0.0) {
        return Err(IntegratorError::BadConfig(format!(
            "damping must be nonnegative and finite, got {}",
            config.gamma
        )));
    }
    if config.record_stride == 0 {
        return Err(IntegratorError::BadConfig("record stride must be positive".into()));
    }
    kinetic.step_ready()?;
    if matches!(stop, StopRule::SuboptTol(_)) && spec.f_star().is_none() {
        return Err(IntegratorError::MinimumUnknown);
    }

    let mut warnings = Vec::new();
    if config.method == Method::Explicit2 && config.epsilon * config.gamma >= 1.0 {
        warnings.push(format!(
            "explicit2 with epsilon*gamma = {} >= 1 reverses the momentum decay sign; \
             expect instability",
            config.epsilon * config.gamma
        ));
    }

    let f_star = spec.f_star();
    let mut state = initial;
    let mut records: Vec<TrajectoryRecord> = Vec::new();
    let mut h_violation_iters = Vec::new();
    let mut h_prev: Option<f64> = None;
    let mut h_scale: f64 = 0.0;
    let mut stop_cause = StopCause::MaxIters;

    let mut iter = 0usize;
    loop {
        let subopt = f_star.map(|fs| spec.eval(&state.x) - fs);
        let h = subopt.map(|s| kinetic.energy(&state.p) + s);
        if let Some(h_now) = h {
            h_scale = h_scale.max(h_now.abs());
            if let Some(prev) = h_prev {
                if h_now > prev + 1e-12 * h_scale {
                    h_violation_iters.push(iter);
                }
            }
            h_prev = Some(h_now);
        }
        let mut recorded = false;
        if iter % config.record_stride == 0 {
            records.push(TrajectoryRecord {
                iter,
                x: state.x.clone(),
                p: state.p.clone(),
                h,
                suboptimality: subopt,
                v: None,
            });
            recorded = true;
        }
        let record_now = |records: &mut Vec<TrajectoryRecord>| {
            if !recorded {
                records.push(TrajectoryRecord {
                    iter,
                    x: state.x.clone(),
                    p: state.p.clone(),
                    h,
                    suboptimality: subopt,
                    v: None,
                });
            }
        };

        let stopped = match stop {
            StopRule::SuboptTol(tol) => subopt.is_some_and(|s| s <= tol),
            StopRule::GradTol(tol) => linalg::norm2(&spec.grad(&state.x)) <= tol,
            StopRule::Iters => false,
        };
        if stopped {
            stop_cause = match stop {
                StopRule::SuboptTol(_) => StopCause::SuboptTol { iter },
                StopRule::GradTol(_) => StopCause::GradTol { iter },
                StopRule::Iters => unreachable!("Iters never stops early"),
            };
            record_now(&mut records);
            break;
        }
        if !state.is_finite() {
            stop_cause = StopCause::NonFinite { iter };
            record_now(&mut records);
            break;
        }
        if iter == config.max_iters {
            record_now(&mut records);
            break;
        }

        state = match config.method {
            Method::Explicit1 => {
                step_explicit1(spec, kinetic, config.epsilon, config.gamma, &state)
            }
            Method::Explicit2 => {
                step_explicit2(spec, kinetic, config.epsilon, config.gamma, &state)
            }
            Method::ClassicalMomentum => {
                step_classical_momentum(spec, config.epsilon, config.gamma, &state)
            }
            Method::GradientDescent => step_gradient_descent(spec, config.epsilon, &state),
            Method::Implicit => solve_implicit_update(
                spec,
                kinetic,
                config.epsilon,
                config.gamma,
                &state,
                config.subsolver_tol,
                config.subsolver_max_iters,
            )
            .map_err(|(residual, inner_iters)| IntegratorError::SubsolverFailed {
                iter,
                residual,
                inner_iters,
            })?,
        };
        iter += 1;
    }

    Ok(RunResult {
        records,
        h_violation_iters,
        warnings,
        stop_cause,
        iters: iter,
    })
}
