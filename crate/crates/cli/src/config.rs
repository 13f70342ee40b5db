//! JSON experiment configs shared by the `run`, `rates`, `ode`, and
//! `compare` subcommands. One schema covers all four; each command reads
//! the fields it needs and validates them there, so a config can be reused
//! across subcommands without editing.

use serde::Deserialize;

use hamdesc_core::kinetic::{
    KineticEnergy, NormDescriptor, PowerKinetic, QuadraticKinetic,
};
use hamdesc_core::objective::{self, BuiltinParams, ObjectiveSpec};

use crate::Failure;

fn default_max_iters() -> usize {
    10_000
}

fn default_stride() -> usize {
    1
}

fn default_norm_q() -> f64 {
    2.0
}

fn default_x0_value() -> f64 {
    1.0
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub objective: ObjectiveConfig,
    pub kinetic: KineticConfig,
    #[serde(default)]
    pub methods: Vec<String>,
    #[serde(default)]
    pub epsilon: EpsilonConfig,
    pub gamma: f64,
    #[serde(default)]
    pub x0: Option<Vec<f64>>,
    #[serde(default)]
    pub p0: Option<Vec<f64>>,
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    #[serde(default)]
    pub stop: Option<StopConfig>,
    #[serde(default = "default_stride")]
    pub record_stride: usize,
    #[serde(default)]
    pub seed: Option<u64>,
    // `ode` only.
    #[serde(default)]
    pub t_end: Option<f64>,
    #[serde(default)]
    pub rel_tol: Option<f64>,
    #[serde(default)]
    pub abs_tol: Option<f64>,
    // `compare` only: dimensions to sweep and the fill value for x0 = c·1.
    #[serde(default)]
    pub dims: Option<Vec<usize>>,
    #[serde(default = "default_x0_value")]
    pub x0_value: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectiveConfig {
    pub name: String,
    #[serde(default)]
    pub params: ObjectiveParamsConfig,
}

/// Builtin parameters; `eigenvalues` synthesizes a seeded random SPD matrix
/// for the `quadratic` objective when no explicit `matrix` is given.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectiveParamsConfig {
    #[serde(default)]
    pub b: Option<f64>,
    #[serde(default, rename = "B")]
    pub big_b: Option<f64>,
    #[serde(default)]
    pub dim: Option<usize>,
    #[serde(default)]
    pub matrix: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub eigenvalues: Option<Vec<f64>>,
}

/// Kinetic energy selector: `{"a": .., "A": .., "q": ..}` for a power
/// kinetic (q defaults to 2), `{"classical": true}` for ‖p‖²/2, or
/// `{"quadratic": [[..]]}` for ⟨p, M⁻¹p⟩/2.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum KineticConfig {
    Classical {
        classical: bool,
    },
    Quadratic {
        quadratic: Vec<Vec<f64>>,
    },
    Power {
        a: f64,
        #[serde(rename = "A")]
        big_a: f64,
        #[serde(default = "default_norm_q")]
        q: f64,
    },
}

/// `"auto"` (the default) derives ε from the certified step-size bound;
/// a number is used verbatim.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum EpsilonConfig {
    Value(f64),
    Keyword(String),
}

impl Default for EpsilonConfig {
    fn default() -> Self {
        EpsilonConfig::Keyword("auto".to_string())
    }
}

impl EpsilonConfig {
    /// `Some(value)` for an explicit step, `None` for `"auto"`.
    pub fn explicit(&self) -> Result<Option<f64>, Failure> {
        match self {
            EpsilonConfig::Value(v) => Ok(Some(*v)),
            EpsilonConfig::Keyword(k) if k == "auto" => Ok(None),
            EpsilonConfig::Keyword(k) => Err(Failure::Config(format!(
                "epsilon must be a number or \"auto\", got \"{k}\""
            ))),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StopConfig {
    #[serde(default)]
    pub subopt_tol: Option<f64>,
    #[serde(default)]
    pub grad_tol: Option<f64>,
}

pub fn load_config(path: &std::path::Path) -> Result<ExperimentConfig, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::Config(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| Failure::Config(format!("bad config {}: {e}", path.display())))
}

/// Builds the configured objective. The seed feeds the SPD synthesis when
/// `eigenvalues` is given; everything else is deterministic.
pub fn build_objective(
    cfg: &ObjectiveConfig,
    seed: u64,
) -> Result<ObjectiveSpec, Failure> {
    let mut params = BuiltinParams {
        b: cfg.params.b,
        big_b: cfg.params.big_b,
        dim: cfg.params.dim,
        matrix: cfg.params.matrix.clone(),
    };
    if params.matrix.is_none() {
        if let Some(eigs) = &cfg.params.eigenvalues {
            params.matrix = Some(objective::random_spd_matrix(eigs, seed));
        }
    }
    objective::builtin(&cfg.name, &params).map_err(|e| Failure::Config(e.to_string()))
}

/// A constructed kinetic energy, kept concrete so commands can reach the
/// power-kinetic accessors the constants derivations need.
pub enum BuiltKinetic {
    Power(PowerKinetic),
    Quadratic(QuadraticKinetic),
}

impl BuiltKinetic {
    pub fn as_dyn(&self) -> &dyn KineticEnergy {
        match self {
            BuiltKinetic::Power(k) => k,
            BuiltKinetic::Quadratic(k) => k,
        }
    }

    pub fn power(&self) -> Option<&PowerKinetic> {
        match self {
            BuiltKinetic::Power(k) => Some(k),
            BuiltKinetic::Quadratic(_) => None,
        }
    }

    pub fn describe(&self) -> String {
        match self {
            BuiltKinetic::Power(k) => format!(
                "power(a={}, A={}, q={})",
                k.a(),
                k.big_a(),
                k.norm().q()
            ),
            BuiltKinetic::Quadratic(k) => format!("quadratic(dim={})", k.dim()),
        }
    }
}

pub fn build_kinetic(cfg: &KineticConfig) -> Result<BuiltKinetic, Failure> {
    match cfg {
        KineticConfig::Classical { classical } => {
            if !classical {
                return Err(Failure::Config(
                    "\"classical\": false selects nothing; use a power or quadratic kinetic"
                        .to_string(),
                ));
            }
            Ok(BuiltKinetic::Power(PowerKinetic::classical()))
        }
        KineticConfig::Quadratic { quadratic } => QuadraticKinetic::new(quadratic)
            .map(BuiltKinetic::Quadratic)
            .map_err(|e| Failure::Config(e.to_string())),
        KineticConfig::Power { a, big_a, q } => {
            let norm = NormDescriptor::new(*q)
                .map_err(|e| Failure::Config(e.to_string()))?;
            PowerKinetic::new(*a, *big_a, norm)
                .map(BuiltKinetic::Power)
                .map_err(|e| Failure::Config(e.to_string()))
        }
    }
}
