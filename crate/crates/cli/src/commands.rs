//! The five subcommands. Each one loads a config (or takes flags), builds
//! the objective/kinetic pair, delegates the math to `hamdesc-core`, and
//! writes CSV trajectories plus a JSON summary into the output directory.

use std::path::Path;

use serde::Serialize;

use hamdesc_core::analysis::{self, AlphaFn, BoundKind, ConstantsBundle};
use hamdesc_core::continuous::{
    self, ContinuousError, LowerBoundProblem, OdeConfig,
};
use hamdesc_core::integrators::{
    self, IntegratorConfig, IntegratorError, Method, State, StopCause, StopRule,
    TrajectoryRecord,
};
use hamdesc_core::kinetic::PowerKinetic;
use hamdesc_core::objective::ObjectiveSpec;

use crate::config::{
    build_kinetic, build_objective, load_config, BuiltKinetic, ExperimentConfig,
    KineticConfig,
};
use crate::output::{
    fmt_float, write_csv, write_json, write_trajectory_csv, TrajectoryRow,
};
use crate::{Ctx, Failure, LowerArgs, LowerMode};

fn parse_method(name: &str) -> Result<Method, Failure> {
    match name {
        "explicit1" => Ok(Method::Explicit1),
        "explicit2" => Ok(Method::Explicit2),
        "implicit" => Ok(Method::Implicit),
        "momentum" => Ok(Method::ClassicalMomentum),
        "gd" => Ok(Method::GradientDescent),
        other => Err(Failure::Config(format!(
            "unknown method \"{other}\"; expected explicit1, explicit2, implicit, \
             momentum, or gd"
        ))),
    }
}

/// The kinetic a method actually integrates: the Hamiltonian schemes use
/// the configured one, while the classical-momentum and gradient-descent
/// baselines are pinned to ‖p‖²/2 regardless of the config.
fn kinetic_for_method(
    method: Method,
    cfg: &KineticConfig,
) -> Result<BuiltKinetic, Failure> {
    match method {
        Method::ClassicalMomentum | Method::GradientDescent => {
            Ok(BuiltKinetic::Power(PowerKinetic::classical()))
        }
        _ => build_kinetic(cfg),
    }
}

/// Which certified step-size family covers a method, if any.
fn bound_kind_for(method: Method, convex: bool) -> Option<BoundKind> {
    match (method, convex) {
        (Method::Explicit1 | Method::ClassicalMomentum, true) => Some(BoundKind::Explicit1),
        (Method::Explicit1 | Method::ClassicalMomentum, false) => {
            Some(BoundKind::NonconvexExplicit1)
        }
        (Method::Explicit2, true) => Some(BoundKind::Explicit2),
        (Method::Implicit, true) => Some(BoundKind::Implicit),
        _ => None,
    }
}

/// Derives the assumption constants for a certificate/kinetic pairing,
/// routing the relativistic kinetic (a = 2, A = 1) to its own derivation.
fn build_bundle(
    spec: &ObjectiveSpec,
    kinetic: &BuiltKinetic,
    gamma: f64,
) -> Result<ConstantsBundle, Failure> {
    let cert = spec.certificate().ok_or_else(|| {
        Failure::Config(format!(
            "objective \"{}\" carries no growth certificate",
            spec.name()
        ))
    })?;
    let k = kinetic.power().ok_or_else(|| {
        Failure::Config(
            "assumption constants are derived for power kinetics only".to_string(),
        )
    })?;
    let relativistic = (k.a() - 2.0).abs() < 1e-12 && (k.big_a() - 1.0).abs() < 1e-12;
    let result = if relativistic {
        analysis::constants_relativistic(cert, k, gamma)
    } else {
        analysis::constants_known_power(cert, k, gamma)
    };
    result.map_err(|e| Failure::Config(e.to_string()))
}

/// The step size a method runs at: an explicit config value verbatim, or
/// `"auto"` resolved from the certified bound (0.9·bound for the strict
/// bounds, the bound itself where it is inclusive).
fn resolve_epsilon(
    explicit: Option<f64>,
    method: Method,
    spec: &ObjectiveSpec,
    kinetic: &BuiltKinetic,
    gamma: f64,
) -> Result<f64, Failure> {
    if let Some(value) = explicit {
        if !(value.is_finite() && value > 0.0) {
            return Err(Failure::Config(format!(
                "epsilon must be positive and finite, got {value}"
            )));
        }
        return Ok(value);
    }
    let kind = bound_kind_for(method, spec.convex()).ok_or_else(|| {
        Failure::Config(format!(
            "no certified step-size bound covers method \"{}\" here; \
             give epsilon a number",
            method.name()
        ))
    })?;
    let bundle = build_bundle(spec, kinetic, gamma)?;
    let bound = analysis::step_bound(kind, &bundle, gamma)
        .map_err(|e| Failure::Config(e.to_string()))?;
    Ok(if kind.is_inclusive() { bound } else { 0.9 * bound })
}

fn map_integrator_err(e: IntegratorError) -> Failure {
    match e {
        IntegratorError::SubsolverFailed { .. } => Failure::Solver(e.to_string()),
        _ => Failure::Config(e.to_string()),
    }
}

fn map_continuous_err(e: ContinuousError) -> Failure {
    match e {
        ContinuousError::Stiffness { .. }
        | ContinuousError::ClassificationAmbiguous { .. }
        | ContinuousError::ToleranceFloor { .. }
        | ContinuousError::DegenerateWindow(_) => Failure::Solver(e.to_string()),
        _ => Failure::Config(e.to_string()),
    }
}

fn stop_rule(cfg: &ExperimentConfig) -> Result<StopRule, Failure> {
    match &cfg.stop {
        None => Ok(StopRule::Iters),
        Some(s) => match (s.subopt_tol, s.grad_tol) {
            (Some(_), Some(_)) => Err(Failure::Config(
                "stop accepts either subopt_tol or grad_tol, not both".to_string(),
            )),
            (Some(tol), None) => Ok(StopRule::SuboptTol(tol)),
            (None, Some(tol)) => Ok(StopRule::GradTol(tol)),
            (None, None) => Ok(StopRule::Iters),
        },
    }
}

fn stop_cause_label(cause: &StopCause) -> String {
    match cause {
        StopCause::SuboptTol { iter } => format!("subopt-tol@{iter}"),
        StopCause::GradTol { iter } => format!("grad-tol@{iter}"),
        StopCause::MaxIters => "max-iters".to_string(),
        StopCause::NonFinite { iter } => format!("non-finite@{iter}"),
    }
}

fn required_x0(cfg: &ExperimentConfig, dim: usize) -> Result<Vec<f64>, Failure> {
    let x0 = cfg
        .x0
        .clone()
        .ok_or_else(|| Failure::Config("x0 is required".to_string()))?;
    if x0.len() != dim {
        return Err(Failure::Config(format!(
            "x0 has length {}, objective dimension is {dim}",
            x0.len()
        )));
    }
    Ok(x0)
}

fn optional_p0(cfg: &ExperimentConfig, dim: usize) -> Result<Vec<f64>, Failure> {
    match &cfg.p0 {
        None => Ok(vec![0.0; dim]),
        Some(p0) if p0.len() == dim => Ok(p0.clone()),
        Some(p0) => Err(Failure::Config(format!(
            "p0 has length {}, objective dimension is {dim}",
            p0.len()
        ))),
    }
}

#[derive(Serialize)]
struct AlphaEcho {
    form: &'static str,
    scale: f64,
    #[serde(rename = "A", skip_serializing_if = "Option::is_none")]
    big_a: Option<f64>,
}

/// Serializable view of a constants bundle for the JSON summaries.
#[derive(Serialize)]
struct BundleEcho {
    alpha: AlphaEcho,
    #[serde(skip_serializing_if = "Option::is_none")]
    alpha_star: Option<f64>,
    c_alpha_gamma: f64,
    c_fk: f64,
    c_k: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    d_fk_hess_f: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    d_fk_hess_k: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    d_k: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    e_k: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    f_k: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    sigma_power: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    d_f_smooth: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    d_k_smooth: Option<f64>,
}

impl BundleEcho {
    fn from_bundle(bundle: &ConstantsBundle) -> Self {
        let alpha = match bundle.alpha_fn {
            AlphaFn::Constant(c) => AlphaEcho { form: "constant", scale: c, big_a: None },
            AlphaFn::RelativisticDecay { scale, big_a } => AlphaEcho {
                form: "relativistic-decay",
                scale,
                big_a: Some(big_a),
            },
        };
        BundleEcho {
            alpha,
            alpha_star: bundle.alpha_star,
            c_alpha_gamma: bundle.c_alpha_gamma,
            c_fk: bundle.c_fk,
            c_k: bundle.c_k,
            d_fk_hess_f: bundle.d_fk_hess_f,
            d_fk_hess_k: bundle.d_fk_hess_k,
            d_k: bundle.d_k,
            e_k: bundle.e_k,
            f_k: bundle.f_k,
            sigma_power: bundle.sigma_power,
            d_f_smooth: bundle.d_f_smooth,
            d_k_smooth: bundle.d_k_smooth,
        }
    }
}

#[derive(Serialize)]
struct RateEcho {
    /// Slope of ln(f − f⋆) per iteration over the recorded tail.
    slope: f64,
    r2: f64,
}

#[derive(Serialize)]
struct MethodSummary {
    method: String,
    kinetic: String,
    epsilon: f64,
    iterations: usize,
    stop_cause: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    final_suboptimality: Option<f64>,
    h_monotone: bool,
    h_violations: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    rate: Option<RateEcho>,
    warnings: Vec<String>,
    trajectory_csv: String,
}

#[derive(Serialize)]
struct RunSummary {
    objective: String,
    dim: usize,
    gamma: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    constants: Option<BundleEcho>,
    methods: Vec<MethodSummary>,
}

/// Initial total energy H₀ = k(p₀) + f(x₀) − f⋆, when the minimum is known.
fn initial_energy(
    spec: &ObjectiveSpec,
    kinetic: &BuiltKinetic,
    x0: &[f64],
    p0: &[f64],
) -> Option<f64> {
    let f_star = spec.f_star()?;
    Some(kinetic.as_dyn().energy(p0) + spec.eval(x0) - f_star)
}

/// Converts run records into CSV rows, filling the V column from the
/// self-consistent Lyapunov pairing when a constants bundle and minimizer
/// are available and NaN otherwise.
fn rows_from_records(
    spec: &ObjectiveSpec,
    records: &[TrajectoryRecord],
    epsilon: f64,
    bundle: Option<&ConstantsBundle>,
) -> Vec<TrajectoryRow> {
    let x_star = spec.x_star();
    records
        .iter()
        .map(|rec| {
            let v = match (bundle, x_star, rec.h) {
                (Some(b), Some(xs), Some(h)) => {
                    let cross: f64 = rec
                        .x
                        .iter()
                        .zip(xs)
                        .zip(&rec.p)
                        .map(|((xi, xsi), pi)| (xi - xsi) * pi)
                        .sum();
                    analysis::lyapunov_fixed_point(h, cross, b.c_alpha_gamma, &b.alpha_fn)
                        .map(|(v, _)| v)
                        .unwrap_or(f64::NAN)
                }
                _ => f64::NAN,
            };
            TrajectoryRow {
                iter: rec.iter,
                t: rec.iter as f64 * epsilon,
                subopt: rec.suboptimality.unwrap_or(f64::NAN),
                h: rec.h.unwrap_or(f64::NAN),
                v,
                x: rec.x.clone(),
                p: rec.p.clone(),
            }
        })
        .collect()
}

/// Log-linear fit of the recorded suboptimality tail (second half of the
/// recorded points); reported only when it explains the data (R² ≥ 0.95).
fn fit_trajectory_rate(records: &[TrajectoryRecord]) -> Option<RateEcho> {
    let pts: Vec<(f64, f64)> = records
        .iter()
        .filter_map(|r| {
            r.suboptimality
                .filter(|&s| s > 0.0)
                .map(|s| (r.iter as f64, s.ln()))
        })
        .collect();
    if pts.len() < 6 {
        return None;
    }
    let tail = &pts[pts.len() / 2..];
    let xs: Vec<f64> = tail.iter().map(|&(x, _)| x).collect();
    let ys: Vec<f64> = tail.iter().map(|&(_, y)| y).collect();
    let fit = analysis::least_squares_line(&xs, &ys).ok()?;
    (fit.r2 >= 0.95).then_some(RateEcho { slope: fit.slope, r2: fit.r2 })
}

pub fn cmd_run(ctx: &Ctx, config_path: &Path) -> Result<(), Failure> {
    let cfg = load_config(config_path)?;
    let seed = ctx.seed.or(cfg.seed).unwrap_or(0);
    let spec = build_objective(&cfg.objective, seed)?;
    if cfg.methods.is_empty() {
        return Err(Failure::Config("methods list is empty".to_string()));
    }
    let x0 = required_x0(&cfg, spec.dim())?;
    let p0 = optional_p0(&cfg, spec.dim())?;
    let stop = stop_rule(&cfg)?;
    let explicit_eps = cfg.epsilon.explicit()?;
    ctx.ensure_out_dir()?;

    // Constants echo for the configured kinetic; methods pinned to the
    // classical kinetic may still differ, so V columns use per-method
    // bundles below.
    let config_kinetic = build_kinetic(&cfg.kinetic)?;
    let echo_bundle = spec.certificate().and_then(|_| {
        build_bundle(&spec, &config_kinetic, cfg.gamma).ok().map(|b| {
            match initial_energy(&spec, &config_kinetic, &x0, &p0) {
                Some(h0) => b.with_alpha_star(h0),
                None => b,
            }
        })
    });

    let mut methods_out = Vec::with_capacity(cfg.methods.len());
    for name in &cfg.methods {
        let method = parse_method(name)?;
        let kinetic = kinetic_for_method(method, &cfg.kinetic)?;
        let epsilon = resolve_epsilon(explicit_eps, method, &spec, &kinetic, cfg.gamma)?;
        let iconfig = IntegratorConfig::new(method, epsilon, cfg.gamma, cfg.max_iters)
            .with_record_stride(cfg.record_stride);
        let initial = State::new(x0.clone(), p0.clone());
        let result = integrators::run(&spec, kinetic.as_dyn(), &iconfig, initial, stop)
            .map_err(map_integrator_err)?;

        let bundle = build_bundle(&spec, &kinetic, cfg.gamma).ok();
        let rows = rows_from_records(&spec, &result.records, epsilon, bundle.as_ref());
        let csv_name = format!("{}.csv", method.name());
        write_trajectory_csv(&ctx.out.join(&csv_name), spec.dim(), &rows)?;

        let final_subopt = result.records.last().and_then(|r| r.suboptimality);
        if !ctx.quiet {
            let subopt_text = final_subopt
                .map(|s| fmt_float(s))
                .unwrap_or_else(|| "unknown".to_string());
            println!(
                "run {}: {} iterations, stop {}, final suboptimality {}",
                method.name(),
                result.iters,
                stop_cause_label(&result.stop_cause),
                subopt_text
            );
        }
        methods_out.push(MethodSummary {
            method: method.name().to_string(),
            kinetic: kinetic.describe(),
            epsilon,
            iterations: result.iters,
            stop_cause: stop_cause_label(&result.stop_cause),
            final_suboptimality: final_subopt,
            h_monotone: result.h_violation_iters.is_empty(),
            h_violations: result.h_violation_iters.len(),
            rate: fit_trajectory_rate(&result.records),
            warnings: result.warnings.clone(),
            trajectory_csv: csv_name,
        });
    }

    let summary = RunSummary {
        objective: spec.name().to_string(),
        dim: spec.dim(),
        gamma: cfg.gamma,
        constants: echo_bundle.as_ref().map(BundleEcho::from_bundle),
        methods: methods_out,
    };
    write_json(&ctx.out.join("summary.json"), &summary)
}

#[derive(Serialize)]
struct MethodRates {
    method: String,
    bound_kind: String,
    epsilon_max: f64,
    epsilon_auto: f64,
    factor_form: String,
    beta_star: f64,
    lambda_star: f64,
}

#[derive(Serialize)]
struct RatesReport {
    objective: String,
    gamma: f64,
    constants: BundleEcho,
    methods: Vec<MethodRates>,
}

fn method_rates(
    name: &str,
    spec: &ObjectiveSpec,
    bundle: &ConstantsBundle,
    gamma: f64,
) -> Result<MethodRates, Failure> {
    let method = parse_method(name)?;
    let kind = bound_kind_for(method, spec.convex()).ok_or_else(|| {
        Failure::Config(format!(
            "no certified bound covers method \"{}\" here",
            method.name()
        ))
    })?;
    let rc = analysis::rate_certificate(kind, bundle, gamma)
        .map_err(|e| Failure::Config(e.to_string()))?;
    let epsilon_auto = if kind.is_inclusive() {
        rc.epsilon_max
    } else {
        0.9 * rc.epsilon_max
    };
    Ok(MethodRates {
        method: method.name().to_string(),
        bound_kind: kind.name().to_string(),
        epsilon_max: rc.epsilon_max,
        epsilon_auto,
        factor_form: rc.factor_form.to_string(),
        beta_star: rc.beta_star,
        lambda_star: rc.lambda_star,
    })
}

pub fn cmd_rates(ctx: &Ctx, config_path: &Path) -> Result<(), Failure> {
    let cfg = load_config(config_path)?;
    let seed = ctx.seed.or(cfg.seed).unwrap_or(0);
    let spec = build_objective(&cfg.objective, seed)?;
    let kinetic = build_kinetic(&cfg.kinetic)?;
    let mut bundle = build_bundle(&spec, &kinetic, cfg.gamma)?;
    if let Some(x0) = &cfg.x0 {
        if x0.len() == spec.dim() {
            let p0 = optional_p0(&cfg, spec.dim())?;
            if let Some(h0) = initial_energy(&spec, &kinetic, x0, &p0) {
                bundle = bundle.with_alpha_star(h0);
            }
        }
    }
    ctx.ensure_out_dir()?;

    // An explicit method list is honored strictly; the default list keeps
    // whichever of the three schemes this pairing certifies.
    let (names, strict) = if cfg.methods.is_empty() {
        (
            vec![
                "implicit".to_string(),
                "explicit1".to_string(),
                "explicit2".to_string(),
            ],
            false,
        )
    } else {
        (cfg.methods.clone(), true)
    };
    let mut methods = Vec::new();
    for name in &names {
        match method_rates(name, &spec, &bundle, cfg.gamma) {
            Ok(m) => methods.push(m),
            Err(e) if strict => return Err(e),
            Err(_) => {}
        }
    }
    if !ctx.quiet {
        for m in &methods {
            println!(
                "rates {}: epsilon_max {}, beta* {}, lambda* {}",
                m.method,
                fmt_float(m.epsilon_max),
                fmt_float(m.beta_star),
                fmt_float(m.lambda_star)
            );
        }
    }
    let report = RatesReport {
        objective: spec.name().to_string(),
        gamma: cfg.gamma,
        constants: BundleEcho::from_bundle(&bundle),
        methods,
    };
    write_json(&ctx.out.join("rates.json"), &report)
}

#[derive(Serialize)]
struct OdeReport {
    objective: String,
    gamma: f64,
    t_end: f64,
    samples: usize,
    final_t: f64,
    final_h: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    final_suboptimality: Option<f64>,
    trajectory_csv: String,
}

pub fn cmd_ode(ctx: &Ctx, config_path: &Path) -> Result<(), Failure> {
    let cfg = load_config(config_path)?;
    let seed = ctx.seed.or(cfg.seed).unwrap_or(0);
    let spec = build_objective(&cfg.objective, seed)?;
    let kinetic = build_kinetic(&cfg.kinetic)?;
    let t_end = cfg
        .t_end
        .ok_or_else(|| Failure::Config("t_end is required for ode".to_string()))?;
    let x0 = required_x0(&cfg, spec.dim())?;
    let p0 = optional_p0(&cfg, spec.dim())?;
    let mut oc = OdeConfig::new(t_end).with_record_stride(cfg.record_stride);
    let (rel, abs) = (
        cfg.rel_tol.unwrap_or(oc.rel_tol),
        cfg.abs_tol.unwrap_or(oc.abs_tol),
    );
    oc = oc.with_tolerances(rel, abs);
    ctx.ensure_out_dir()?;

    let initial = State::new(x0, p0);
    let samples = continuous::simulate(kinetic.as_dyn(), &spec, cfg.gamma, &initial, &oc)
        .map_err(map_continuous_err)?;

    let bundle = spec
        .certificate()
        .and_then(|_| build_bundle(&spec, &kinetic, cfg.gamma).ok());
    let x_star = spec.x_star();
    let rows: Vec<TrajectoryRow> = samples
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let subopt = spec
                .f_star()
                .map(|fs| spec.eval(&s.x) - fs)
                .unwrap_or(f64::NAN);
            let v = match (&bundle, x_star) {
                (Some(b), Some(xs)) => {
                    let cross: f64 = s
                        .x
                        .iter()
                        .zip(xs)
                        .zip(&s.p)
                        .map(|((xi, xsi), pi)| (xi - xsi) * pi)
                        .sum();
                    analysis::lyapunov_fixed_point(s.h, cross, b.c_alpha_gamma, &b.alpha_fn)
                        .map(|(v, _)| v)
                        .unwrap_or(f64::NAN)
                }
                _ => f64::NAN,
            };
            TrajectoryRow {
                iter: i,
                t: s.t,
                subopt,
                h: s.h,
                v,
                x: s.x.clone(),
                p: s.p.clone(),
            }
        })
        .collect();
    write_trajectory_csv(&ctx.out.join("ode.csv"), spec.dim(), &rows)?;

    let last = samples.last().expect("simulate always records the initial sample");
    if !ctx.quiet {
        println!(
            "ode: {} samples to t = {}, final H {}",
            samples.len(),
            fmt_float(last.t),
            fmt_float(last.h)
        );
    }
    let report = OdeReport {
        objective: spec.name().to_string(),
        gamma: cfg.gamma,
        t_end,
        samples: samples.len(),
        final_t: last.t,
        final_h: last.h,
        final_suboptimality: spec.f_star().map(|fs| spec.eval(&last.x) - fs),
        trajectory_csv: "ode.csv".to_string(),
    };
    write_json(&ctx.out.join("ode.json"), &report)
}

#[derive(Serialize)]
struct FitEcho {
    kind: String,
    rate: f64,
    power: f64,
    r2: f64,
}

impl FitEcho {
    fn from_fit(fit: &continuous::RateFit) -> Self {
        FitEcho {
            kind: match fit.kind {
                continuous::RateKind::Linear => "linear".to_string(),
                continuous::RateKind::Sublinear => "sublinear".to_string(),
            },
            rate: fit.rate,
            power: fit.power,
            r2: fit.fit_r2,
        }
    }
}

#[derive(Serialize)]
struct LowerReport {
    mode: String,
    a: f64,
    b: f64,
    gamma: f64,
    sublinear_regime: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    predicted_exponent: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    eta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    eta_bracket: Option<(f64, f64)>,
    #[serde(skip_serializing_if = "Option::is_none")]
    shot_evaluations: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    fit: Option<FitEcho>,
    samples_csv: String,
}

fn power_rows(samples: &[(f64, f64, f64)]) -> Vec<Vec<String>> {
    samples
        .iter()
        .map(|&(t, x, p)| vec![fmt_float(t), fmt_float(x), fmt_float(p)])
        .collect()
}

pub fn cmd_lower(ctx: &Ctx, args: &LowerArgs) -> Result<(), Failure> {
    let prob = LowerBoundProblem::new(args.a, args.b, args.gamma)
        .map_err(|e| Failure::Config(e.to_string()))?;
    ctx.ensure_out_dir()?;
    match args.mode {
        LowerMode::Generic => {
            if !prob.sublinear_regime() {
                return Err(Failure::Config(format!(
                    "1/a + 1/b = {} >= 1: every trajectory of this system converges \
                     linearly in continuous time, so there is no sublinear exponent \
                     to fit; use exponents with 1/a + 1/b < 1",
                    1.0 / args.a + 1.0 / args.b
                )));
            }
            let t_end = args.t_end.unwrap_or(1e4);
            let oc = OdeConfig::new(t_end);
            let samples = continuous::simulate_power_system(&prob, args.x0, 0.0, &oc)
                .map_err(map_continuous_err)?;
            write_csv(&ctx.out.join("lower.csv"), "t,x,p", &power_rows(&samples))?;
            let pts: Vec<(f64, f64)> =
                samples.iter().map(|&(t, x, _)| (t, x.abs())).collect();
            let fit = continuous::fit_rate(&pts, (t_end / 100.0, t_end))
                .map_err(map_continuous_err)?;
            if !ctx.quiet {
                println!(
                    "lower generic: predicted exponent {}, fitted power {} (R² {})",
                    prob.predicted_exponent().map(fmt_float).unwrap_or_default(),
                    fmt_float(fit.power),
                    fmt_float(fit.fit_r2)
                );
            }
            let report = LowerReport {
                mode: "generic".to_string(),
                a: args.a,
                b: args.b,
                gamma: args.gamma,
                sublinear_regime: true,
                predicted_exponent: prob.predicted_exponent(),
                eta: None,
                eta_bracket: None,
                shot_evaluations: None,
                fit: Some(FitEcho::from_fit(&fit)),
                samples_csv: "lower.csv".to_string(),
            };
            write_json(&ctx.out.join("lower.json"), &report)
        }
        LowerMode::Eta => {
            if !prob.sublinear_regime() {
                return Err(Failure::Config(format!(
                    "1/a + 1/b = {} >= 1: the fast/slow dichotomy needs the \
                     sublinear regime 1/a + 1/b < 1",
                    1.0 / args.a + 1.0 / args.b
                )));
            }
            let est = continuous::shoot_eta(&prob, None, args.tol)
                .map_err(map_continuous_err)?;
            let t_end = args.t_end.unwrap_or(1e4);
            let oc = OdeConfig::new(t_end);
            let samples = continuous::simulate_power_system(&prob, est.eta, 0.0, &oc)
                .map_err(map_continuous_err)?;
            write_csv(&ctx.out.join("lower.csv"), "t,x,p", &power_rows(&samples))?;
            // Fit the decay while it is still under way: a finitely resolved
            // eta eventually peels off the critical path and freezes near the
            // separation scale, so the window ends where |x| first comes
            // within a factor of its final level.
            let x_floor = samples.last().map(|&(_, x, _)| x.abs()).unwrap_or(0.0);
            let t_hi = samples
                .iter()
                .find(|&&(_, x, _)| x.abs() <= 3.0 * x_floor)
                .map(|&(t, _, _)| t)
                .unwrap_or(t_end);
            let pts: Vec<(f64, f64)> =
                samples.iter().map(|&(t, x, _)| (t, x.abs())).collect();
            let fit = continuous::fit_rate(&pts, (1.0, t_hi)).ok();
            if !ctx.quiet {
                println!(
                    "lower eta: eta = {} in [{}, {}] after {} shots",
                    fmt_float(est.eta),
                    fmt_float(est.bracket.0),
                    fmt_float(est.bracket.1),
                    est.evaluations
                );
            }
            let report = LowerReport {
                mode: "eta".to_string(),
                a: args.a,
                b: args.b,
                gamma: args.gamma,
                sublinear_regime: true,
                predicted_exponent: prob.predicted_exponent(),
                eta: Some(est.eta),
                eta_bracket: Some(est.bracket),
                shot_evaluations: Some(est.evaluations),
                fit: fit.as_ref().map(FitEcho::from_fit),
                samples_csv: "lower.csv".to_string(),
            };
            write_json(&ctx.out.join("lower.json"), &report)
        }
        LowerMode::Sweep => {
            let t_end = args.t_end.unwrap_or(50.0);
            let oc = OdeConfig::new(t_end);
            if args.theta_count < 1 || args.theta_min <= 0.0 || args.theta_max < args.theta_min
            {
                return Err(Failure::Config(
                    "sweep needs 0 < theta-min <= theta-max and theta-count >= 1"
                        .to_string(),
                ));
            }
            let mut rows = Vec::new();
            for i in 0..args.theta_count {
                let frac = if args.theta_count == 1 {
                    0.0
                } else {
                    i as f64 / (args.theta_count - 1) as f64
                };
                let theta = args.theta_min + frac * (args.theta_max - args.theta_min);
                let samples = continuous::simulate_power_system(&prob, theta, 0.0, &oc)
                    .map_err(map_continuous_err)?;
                for (t, x, p) in samples {
                    rows.push(vec![
                        fmt_float(theta),
                        fmt_float(t),
                        fmt_float(x),
                        fmt_float(p),
                    ]);
                }
            }
            write_csv(&ctx.out.join("sweep.csv"), "theta,t,x,p", &rows)?;
            if !ctx.quiet {
                println!(
                    "lower sweep: {} starts in [{}, {}], {} samples",
                    args.theta_count,
                    fmt_float(args.theta_min),
                    fmt_float(args.theta_max),
                    rows.len()
                );
            }
            let report = LowerReport {
                mode: "sweep".to_string(),
                a: args.a,
                b: args.b,
                gamma: args.gamma,
                sublinear_regime: prob.sublinear_regime(),
                predicted_exponent: prob.predicted_exponent(),
                eta: None,
                eta_bracket: None,
                shot_evaluations: None,
                fit: None,
                samples_csv: "sweep.csv".to_string(),
            };
            write_json(&ctx.out.join("lower.json"), &report)
        }
    }
}

#[derive(Serialize)]
struct CompareEntry {
    dim: usize,
    method: String,
    epsilon: f64,
    iterations: usize,
    reached: bool,
}

#[derive(Serialize)]
struct CompareReport {
    objective: String,
    gamma: f64,
    subopt_tol: f64,
    table: Vec<CompareEntry>,
}

pub fn cmd_compare(ctx: &Ctx, config_path: &Path) -> Result<(), Failure> {
    let cfg = load_config(config_path)?;
    let seed = ctx.seed.or(cfg.seed).unwrap_or(0);
    let dims = cfg
        .dims
        .clone()
        .filter(|d| !d.is_empty())
        .ok_or_else(|| Failure::Config("compare needs a nonempty dims list".to_string()))?;
    if cfg.methods.is_empty() {
        return Err(Failure::Config("methods list is empty".to_string()));
    }
    let tol = cfg
        .stop
        .as_ref()
        .and_then(|s| s.subopt_tol)
        .ok_or_else(|| {
            Failure::Config("compare needs stop.subopt_tol for the iteration counts".to_string())
        })?;
    let explicit_eps = cfg.epsilon.explicit()?;
    ctx.ensure_out_dir()?;

    let mut table = Vec::new();
    for &d in &dims {
        let mut ocfg = cfg.objective.clone();
        ocfg.params.dim = Some(d);
        let spec = build_objective(&ocfg, seed)?;
        if spec.dim() != d {
            return Err(Failure::Config(format!(
                "objective \"{}\" has fixed dimension {}, conflicting with dims entry {d}",
                spec.name(),
                spec.dim()
            )));
        }
        let x0 = vec![cfg.x0_value; d];
        let p0 = vec![0.0; d];
        for name in &cfg.methods {
            let method = parse_method(name)?;
            let kinetic = kinetic_for_method(method, &cfg.kinetic)?;
            let epsilon =
                resolve_epsilon(explicit_eps, method, &spec, &kinetic, cfg.gamma)?;
            let iconfig = IntegratorConfig::new(method, epsilon, cfg.gamma, cfg.max_iters)
                .with_record_stride(cfg.record_stride);
            let initial = State::new(x0.clone(), p0.clone());
            let result = integrators::run(
                &spec,
                kinetic.as_dyn(),
                &iconfig,
                initial,
                StopRule::SuboptTol(tol),
            )
            .map_err(map_integrator_err)?;
            let reached = matches!(result.stop_cause, StopCause::SuboptTol { .. });
            if !ctx.quiet {
                println!(
                    "compare d={d} {}: {} iterations{}",
                    method.name(),
                    result.iters,
                    if reached { "" } else { " (tolerance not reached)" }
                );
            }
            table.push(CompareEntry {
                dim: d,
                method: method.name().to_string(),
                epsilon,
                iterations: result.iters,
                reached,
            });
        }
    }

    let csv_rows: Vec<Vec<String>> = table
        .iter()
        .map(|e| {
            vec![
                e.dim.to_string(),
                e.method.clone(),
                fmt_float(e.epsilon),
                e.iterations.to_string(),
                e.reached.to_string(),
            ]
        })
        .collect();
    write_csv(
        &ctx.out.join("compare.csv"),
        "dim,method,epsilon,iterations,reached",
        &csv_rows,
    )?;
    let report = CompareReport {
        objective: cfg.objective.name.clone(),
        gamma: cfg.gamma,
        subopt_tol: tol,
        table,
    };
    write_json(&ctx.out.join("compare.json"), &report)
}
