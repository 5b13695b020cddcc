//! Closed-form test functions with their reference minimizer, natural growth
//! exponent and, where known analytically, the three stability constants.

use anyhow::{bail, Result};
use growthlab_core::{ExponentPair, ExtReal, FunctionOracle, KnownConstants, Point};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamSpec {
    pub name: &'static str,
    pub default: f64,
    pub doc: &'static str,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CatalogEntry {
    pub id: &'static str,
    pub formula: &'static str,
    pub dim: usize,
    pub params: &'static [ParamSpec],
    /// Constants that hold on every ball around the minimizer, as text.
    pub constants: &'static str,
}

const P_PARAM: ParamSpec = ParamSpec {
    name: "p",
    default: 2.0,
    doc: "exponent, > 1",
};
const HALF_P_PARAM: ParamSpec = ParamSpec {
    name: "p",
    default: 3.0,
    doc: "exponent, > 1",
};
const BOUND_PARAM: ParamSpec = ParamSpec {
    name: "bound",
    default: 1.0,
    doc: "half-width of the box, > 0",
};

pub const CATALOG: &[CatalogEntry] = &[
    CatalogEntry {
        id: "power",
        formula: "|x|^p",
        dim: 1,
        params: &[P_PARAM],
        constants: "gamma = 1, kappa = p^(-q/p), mu = p^(-q)",
    },
    CatalogEntry {
        id: "halfpower",
        formula: "max{x, 0}^p",
        dim: 1,
        params: &[HALF_P_PARAM],
        constants: "gamma = 0 (growth only on x > 0, where gamma = 1)",
    },
    CatalogEntry {
        id: "maxsq2d",
        formula: "max{x1, 0}^2 + x2^2",
        dim: 2,
        params: &[],
        constants: "gamma = 0 (growth only on x1 >= 0, where gamma = 1)",
    },
    CatalogEntry {
        id: "quadbox",
        formula: "x^2 + indicator of [-bound, bound]",
        dim: 1,
        params: &[BOUND_PARAM],
        constants: "gamma = 1, kappa = 1/2, mu = 1/4",
    },
    CatalogEntry {
        id: "quadcubic",
        formula: "x^2 + |x|^3",
        dim: 1,
        params: &[],
        constants: "gamma = 1, kappa = 1/2, mu = 1/4 (attained as x -> 0)",
    },
];

pub fn lookup(id: &str) -> Option<&'static CatalogEntry> {
    CATALOG.iter().find(|e| e.id == id)
}

/// Optional parameter overrides; each must be accepted by the chosen entry.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct FunctionParams {
    pub p: Option<f64>,
    pub bound: Option<f64>,
}

/// A catalog entry instantiated with concrete parameters.
#[derive(Debug, Clone)]
pub struct CatalogFunction {
    pub entry: &'static CatalogEntry,
    pub oracle: FunctionOracle,
    pub minimizer: Point,
    /// Exponent of the natural growth order at the minimizer.
    pub exponents: ExponentPair,
    /// Indicator of the side on which growth holds, for one-sided functions.
    pub growth_side: Option<FunctionOracle>,
    /// Parameters after defaults, in declaration order.
    pub params: Vec<(&'static str, f64)>,
}

fn resolve_param(entry: &CatalogEntry, name: &str, given: Option<f64>) -> Result<Option<f64>> {
    match (entry.params.iter().find(|s| s.name == name), given) {
        (Some(spec), v) => Ok(Some(v.unwrap_or(spec.default))),
        (None, Some(_)) => bail!("function {:?} takes no parameter {name:?}", entry.id),
        (None, None) => Ok(None),
    }
}

fn half_space(dim: usize, axis: usize) -> FunctionOracle {
    FunctionOracle::new(dim, format!("indicator of x{} >= 0", axis + 1), move |x| {
        if x[axis] >= 0.0 {
            ExtReal::ZERO
        } else {
            ExtReal::PosInf
        }
    })
}

pub fn build(id: &str, params: &FunctionParams) -> Result<CatalogFunction> {
    let Some(entry) = lookup(id) else {
        let ids: Vec<&str> = CATALOG.iter().map(|e| e.id).collect();
        bail!("unknown function id {id:?}; available: {}", ids.join(", "));
    };
    let p = resolve_param(entry, "p", params.p)?;
    let bound = resolve_param(entry, "bound", params.bound)?;
    if let Some(p) = p {
        if !(p.is_finite() && p > 1.0) {
            bail!("exponent p = {p} must be finite and > 1");
        }
    }
    if let Some(b) = bound {
        if !(b.is_finite() && b > 0.0) {
            bail!("bound = {b} must be finite and > 0");
        }
    }
    let quadratic = ExponentPair::from_p(2.0)?;
    let quarter = KnownConstants {
        gamma: Some(1.0),
        kappa: Some(0.5),
        mu: Some(0.25),
    };
    let (oracle, exponents, growth_side) = match entry.id {
        "power" => {
            let p = p.expect("declared");
            let pq = ExponentPair::from_p(p)?;
            let known = KnownConstants {
                gamma: Some(1.0),
                kappa: Some(p.powf(-pq.ratio())),
                mu: Some(p.powf(-pq.q())),
            };
            let f = FunctionOracle::finite(1, format!("|x|^{p}"), move |x| x[0].abs().powf(p))
                .with_constants(known);
            (f, pq, None)
        }
        "halfpower" => {
            let p = p.expect("declared");
            let f =
                FunctionOracle::finite(1, format!("max(x,0)^{p}"), move |x| x[0].max(0.0).powf(p));
            (f, ExponentPair::from_p(p)?, Some(half_space(1, 0)))
        }
        "maxsq2d" => {
            let f = FunctionOracle::finite(2, "max(x1,0)^2 + x2^2", |x| {
                x[0].max(0.0).powi(2) + x[1] * x[1]
            });
            (f, quadratic, Some(half_space(2, 0)))
        }
        "quadbox" => {
            let b = bound.expect("declared");
            let f = FunctionOracle::new(1, format!("x^2 + indicator[-{b},{b}]"), move |x| {
                if x[0].abs() <= b {
                    ExtReal::Finite(x[0] * x[0])
                } else {
                    ExtReal::PosInf
                }
            })
            .with_constants(quarter);
            (f, quadratic, None)
        }
        "quadcubic" => {
            let f = FunctionOracle::finite(1, "x^2 + |x|^3", |x| x[0] * x[0] + x[0].abs().powi(3))
                .with_constants(quarter);
            (f, quadratic, None)
        }
        other => unreachable!("catalog entry {other} has no constructor"),
    };
    let minimizer = Point::zeros(entry.dim);
    let oracle = oracle.with_minimizer(minimizer.clone())?;
    let mut resolved = Vec::new();
    if let Some(p) = p {
        resolved.push(("p", p));
    }
    if let Some(b) = bound {
        resolved.push(("bound", b));
    }
    Ok(CatalogFunction {
        entry,
        oracle,
        minimizer,
        exponents,
        growth_side,
        params: resolved,
    })
}

/// Human-readable listing of every entry.
pub fn listing() -> String {
    let mut out = String::new();
    for e in CATALOG {
        let params: Vec<String> = e
            .params
            .iter()
            .map(|s| format!("{}={} ({})", s.name, s.default, s.doc))
            .collect();
        let params = if params.is_empty() {
            "none".to_string()
        } else {
            params.join(", ")
        };
        out.push_str(&format!(
            "{:<10} {}  [dim {}; params: {}; minimizer 0; {}]\n",
            e.id, e.formula, e.dim, params, e.constants
        ));
    }
    out
}
