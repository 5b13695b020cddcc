//! Run configuration: a flat TOML file per subcommand, overridden field by
//! field by command-line flags, then resolved against defaults into the
//! settings that are recorded in every output.

use std::path::Path;

use anyhow::{bail, Context, Result};
use clap::Args;
use growthlab_core::diagnostics::DEFAULT_TAU;
use growthlab_core::tracking::{DEFAULT_ALPHA, DEFAULT_BETA};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::catalog::{self, CatalogFunction, FunctionParams};

pub const DEFAULT_SEED: u64 = 20240601;

/// Reads a flat TOML table whose keys are the long flag names (with `_` for `-`).
pub fn load_file<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading config {}", path.display()))?;
    toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
}

macro_rules! overlay {
    ($ty:ident { $($field:ident),* $(,)? }) => {
        impl $ty {
            /// Fields set in `self` win over fields set in `base`.
            pub fn over(self, base: $ty) -> $ty {
                $ty { $($field: self.$field.or(base.$field)),* }
            }
        }
    };
}

/// Function selection shared by `diagnose` and `prox`.
#[derive(Debug, Clone, Default)]
pub struct FunctionArgs {
    pub function: Option<String>,
    pub p: Option<f64>,
    pub bound: Option<f64>,
    pub exponent: Option<f64>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnoseArgs {
    /// Catalog function id.
    #[arg(long = "fn")]
    #[serde(rename = "fn")]
    pub function: Option<String>,
    /// Exponent parameter of the function (power, halfpower).
    #[arg(long)]
    pub p: Option<f64>,
    /// Box half-width (quadbox).
    #[arg(long)]
    pub bound: Option<f64>,
    /// Growth exponent used by the estimators; defaults to the function's natural order.
    #[arg(long)]
    pub exponent: Option<f64>,
    /// Radius of the ball around the minimizer.
    #[arg(long)]
    pub delta: Option<f64>,
    /// Grid points per axis of the global solver.
    #[arg(long)]
    pub grid: Option<usize>,
    /// Local refinement starts taken from the best grid cells.
    #[arg(long)]
    pub multistart: Option<usize>,
    /// Smallest sampled tilt norm.
    #[arg(long)]
    pub tilt_min: Option<f64>,
    /// Largest sampled tilt norm.
    #[arg(long)]
    pub tilt_max: Option<f64>,
    /// Number of tilt norms, spaced geometrically.
    #[arg(long)]
    pub tilt_count: Option<usize>,
    /// Directions per tilt norm.
    #[arg(long)]
    pub directions: Option<usize>,
    /// Slack factor of the constant relations audit.
    #[arg(long)]
    pub tau: Option<f64>,
    /// Seed for all random sampling.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProxArgs {
    /// Catalog function id.
    #[arg(long = "fn")]
    #[serde(rename = "fn")]
    pub function: Option<String>,
    /// Exponent parameter of the function (power, halfpower).
    #[arg(long)]
    pub p: Option<f64>,
    /// Box half-width (quadbox).
    #[arg(long)]
    pub bound: Option<f64>,
    /// Growth exponent used by the estimators; defaults to the function's natural order.
    #[arg(long)]
    pub exponent: Option<f64>,
    /// Proximal parameter.
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Number of proximal steps K.
    #[arg(long)]
    pub iterations: Option<usize>,
    /// Starting point, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub x0: Option<Vec<f64>>,
    /// Radius of the search ball around the minimizer.
    #[arg(long)]
    pub delta: Option<f64>,
    /// Grid points per axis of the global solver.
    #[arg(long)]
    pub grid: Option<usize>,
    /// Local refinement starts taken from the best grid cells.
    #[arg(long)]
    pub multistart: Option<usize>,
    /// Growth constant for the rate audit; defaults to the catalog value.
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Seed for all random sampling.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrackingArgs {
    /// Interior grid points per axis.
    #[arg(long)]
    pub n: Option<usize>,
    /// Lower control bound.
    #[arg(long, allow_hyphen_values = true)]
    pub alpha: Option<f64>,
    /// Upper control bound.
    #[arg(long, allow_hyphen_values = true)]
    pub beta: Option<f64>,
    /// Projected-gradient stopping tolerance.
    #[arg(long)]
    pub tolerance: Option<f64>,
    /// Projected-gradient iteration cap.
    #[arg(long)]
    pub max_iterations: Option<usize>,
    /// Radius of the linearized-state shell for the second-order estimate.
    #[arg(long)]
    pub ssc_delta: Option<f64>,
    /// Random directions for the second-order estimate.
    #[arg(long)]
    pub ssc_samples: Option<usize>,
    /// Perturbation norms, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub eta_norms: Option<Vec<f64>>,
    /// Random perturbations drawn per norm.
    #[arg(long)]
    pub etas_per_norm: Option<usize>,
    /// Adjoint magnitude above which the control must sit at a bound.
    #[arg(long)]
    pub sign_tolerance: Option<f64>,
    /// Seed for all random sampling.
    #[arg(long)]
    pub seed: Option<u64>,
}

overlay!(ProxArgs {
    function,
    p,
    bound,
    exponent,
    epsilon,
    iterations,
    x0,
    delta,
    grid,
    multistart,
    gamma,
    seed
});
overlay!(DiagnoseArgs {
    function,
    p,
    bound,
    exponent,
    delta,
    grid,
    multistart,
    tilt_min,
    tilt_max,
    tilt_count,
    directions,
    tau,
    seed
});

macro_rules! function_args {
    ($($ty:ident),*) => {$(
        impl $ty {
            pub fn function_args(&self) -> FunctionArgs {
                FunctionArgs {
                    function: self.function.clone(),
                    p: self.p,
                    bound: self.bound,
                    exponent: self.exponent,
                }
            }
        }
    )*};
}
function_args!(DiagnoseArgs, ProxArgs);

overlay!(TrackingArgs {
    n,
    alpha,
    beta,
    tolerance,
    max_iterations,
    ssc_delta,
    ssc_samples,
    eta_norms,
    etas_per_norm,
    sign_tolerance,
    seed,
});

/// The function part of a resolved configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionSettings {
    #[serde(rename = "fn")]
    pub function: String,
    pub params: FunctionParams,
    pub exponent: f64,
}

fn resolve_function(
    args: &FunctionArgs,
    default_id: &str,
) -> Result<(FunctionSettings, CatalogFunction)> {
    let id = args
        .function
        .clone()
        .unwrap_or_else(|| default_id.to_string());
    let built = catalog::build(
        &id,
        &FunctionParams {
            p: args.p,
            bound: args.bound,
        },
    )?;
    let mut params = FunctionParams::default();
    for (name, v) in &built.params {
        match *name {
            "p" => params.p = Some(*v),
            "bound" => params.bound = Some(*v),
            _ => {}
        }
    }
    let exponent = args.exponent.unwrap_or(built.exponents.p());
    if !(exponent.is_finite() && exponent > 1.0) {
        bail!("growth exponent {exponent} must be finite and > 1");
    }
    Ok((
        FunctionSettings {
            function: id,
            params,
            exponent,
        },
        built,
    ))
}

fn default_grid(dim: usize) -> usize {
    if dim == 1 {
        2001
    } else {
        201
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnoseSettings {
    #[serde(flatten)]
    pub function: FunctionSettings,
    pub delta: f64,
    pub grid: usize,
    pub multistart: usize,
    pub tilt_min: f64,
    pub tilt_max: f64,
    pub tilt_count: usize,
    pub directions: usize,
    pub tau: f64,
    pub seed: u64,
}

impl DiagnoseArgs {
    pub fn resolve(&self) -> Result<(DiagnoseSettings, CatalogFunction)> {
        let (function, built) = resolve_function(&self.function_args(), "power")?;
        let dim = built.entry.dim;
        let s = DiagnoseSettings {
            function,
            delta: self.delta.unwrap_or(1.0),
            grid: self.grid.unwrap_or(default_grid(dim)),
            multistart: self.multistart.unwrap_or(8),
            tilt_min: self.tilt_min.unwrap_or(0.01),
            tilt_max: self.tilt_max.unwrap_or(1.0),
            tilt_count: self.tilt_count.unwrap_or(8),
            directions: self.directions.unwrap_or(if dim == 1 { 2 } else { 8 }),
            tau: self.tau.unwrap_or(DEFAULT_TAU),
            seed: self.seed.unwrap_or(DEFAULT_SEED),
        };
        if !(s.delta.is_finite() && s.delta > 0.0) {
            bail!("delta = {} must be finite and > 0", s.delta);
        }
        if !(s.tilt_min > 0.0 && s.tilt_max >= s.tilt_min && s.tilt_max.is_finite()) {
            bail!("tilt norms need 0 < tilt_min <= tilt_max");
        }
        if s.tilt_count == 0 || s.directions == 0 {
            bail!("tilt_count and directions must be >= 1");
        }
        if !(s.tau.is_finite() && s.tau >= 1.0) {
            bail!("tau = {} must be >= 1", s.tau);
        }
        Ok((s, built))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProxSettings {
    #[serde(flatten)]
    pub function: FunctionSettings,
    pub epsilon: f64,
    pub iterations: usize,
    pub x0: Vec<f64>,
    pub delta: f64,
    pub grid: usize,
    pub multistart: usize,
    pub gamma: Option<f64>,
    pub seed: u64,
}

impl ProxArgs {
    pub fn resolve(&self) -> Result<(ProxSettings, CatalogFunction)> {
        let (function, built) = resolve_function(&self.function_args(), "power")?;
        let dim = built.entry.dim;
        let x0 = self.x0.clone().unwrap_or_else(|| vec![1.0; dim]);
        if x0.len() != dim {
            bail!(
                "x0 has {} coordinates, function {} has dimension {dim}",
                x0.len(),
                function.function
            );
        }
        let x0_norm = x0.iter().map(|v| v * v).sum::<f64>().sqrt();
        let gamma = self
            .gamma
            .or_else(|| built.oracle.known_constants().and_then(|k| k.gamma));
        let s = ProxSettings {
            function,
            epsilon: self.epsilon.unwrap_or(0.5),
            iterations: self.iterations.unwrap_or(10),
            x0,
            delta: self.delta.unwrap_or(2.0 * x0_norm.max(1.0)),
            grid: self.grid.unwrap_or(default_grid(dim)),
            multistart: self.multistart.unwrap_or(8),
            gamma,
            seed: self.seed.unwrap_or(DEFAULT_SEED),
        };
        if s.iterations == 0 {
            bail!("iterations K must be >= 1");
        }
        if !(s.epsilon.is_finite() && s.epsilon > 0.0) {
            bail!("epsilon = {} must be finite and > 0", s.epsilon);
        }
        if let Some(g) = s.gamma {
            if !(g.is_finite() && g > 0.0) {
                bail!("gamma = {g} must be finite and > 0");
            }
            if s.epsilon >= g {
                bail!(
                    "{}",
                    growthlab_core::Error::EpsilonNotBelowGamma {
                        epsilon: s.epsilon,
                        gamma: g
                    }
                );
            }
        }
        Ok((s, built))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackingSettings {
    pub n: usize,
    pub alpha: f64,
    pub beta: f64,
    pub target: String,
    pub tolerance: f64,
    pub max_iterations: usize,
    pub ssc_delta: f64,
    pub ssc_samples: usize,
    pub eta_norms: Vec<f64>,
    pub etas_per_norm: usize,
    pub sign_tolerance: f64,
    pub seed: u64,
}

impl TrackingArgs {
    pub fn resolve(&self) -> Result<TrackingSettings> {
        let s = TrackingSettings {
            n: self.n.unwrap_or(32),
            alpha: self.alpha.unwrap_or(DEFAULT_ALPHA),
            beta: self.beta.unwrap_or(DEFAULT_BETA),
            target: "sin(pi x1) sin(pi x2)".into(),
            tolerance: self.tolerance.unwrap_or(1e-8),
            max_iterations: self.max_iterations.unwrap_or(20_000),
            ssc_delta: self.ssc_delta.unwrap_or(0.1),
            ssc_samples: self.ssc_samples.unwrap_or(32),
            eta_norms: self
                .eta_norms
                .clone()
                .unwrap_or_else(|| vec![1e-3, 1e-2, 1e-1]),
            etas_per_norm: self.etas_per_norm.unwrap_or(8),
            sign_tolerance: self.sign_tolerance.unwrap_or(1e-7),
            seed: self.seed.unwrap_or(DEFAULT_SEED),
        };
        if s.alpha.is_nan() || s.beta.is_nan() || s.alpha >= s.beta {
            bail!("alpha = {} must be below beta = {}", s.alpha, s.beta);
        }
        if !(s.tolerance > 0.0 && s.ssc_delta > 0.0 && s.sign_tolerance >= 0.0) {
            bail!("tolerance, ssc_delta and sign_tolerance must be positive");
        }
        if s.eta_norms.is_empty() || s.etas_per_norm == 0 {
            bail!("the sweep needs at least one norm and one sample per norm");
        }
        Ok(s)
    }
}
