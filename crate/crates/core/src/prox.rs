//! The p-power proximal point method with global subproblem solves, and the
//! audit of its geometric convergence rates under a growth condition.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::minimize::{argmin_ball, SolverConfig, TiltedSolveResult};
use crate::space::{distance, BallRegion, ExponentPair, ExtReal, FunctionOracle, Point};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProxConfig {
    pub epsilon: f64,
    pub exponents: ExponentPair,
    pub iterations: usize,
    pub region: BallRegion,
    pub solver: SolverConfig,
}

impl ProxConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "epsilon = {} must be finite and > 0",
                self.epsilon
            )));
        }
        if self.iterations == 0 {
            return Err(Error::InvalidArgument(
                "the number of iterations must be >= 1".into(),
            ));
        }
        self.solver.validate()
    }
}

/// `y ↦ f(y) + (ε/p)‖y − anchor‖^p`.
pub fn proximal_objective(
    f: &FunctionOracle,
    anchor: &Point,
    epsilon: f64,
    p: f64,
) -> Result<FunctionOracle> {
    let a = anchor.clone();
    let coef = epsilon / p;
    let penalty = FunctionOracle::finite(
        anchor.dim(),
        format!("({epsilon}/{p})|y - x_k|^{p}"),
        move |y| coef * distance(y, &a).powf(p),
    );
    f.plus(&penalty)
}

/// One proximal step: the global minimizers of the proximal objective on the region.
pub fn prox_step(
    f: &FunctionOracle,
    anchor: &Point,
    cfg: &ProxConfig,
) -> Result<TiltedSolveResult> {
    cfg.validate()?;
    if !cfg.region.contains(anchor) {
        return Err(Error::InvalidArgument(
            "prox anchor must lie in the region".into(),
        ));
    }
    let objective = proximal_objective(f, anchor, cfg.epsilon, cfg.exponents.p())?;
    argmin_ball(&objective, &cfg.region, &cfg.solver)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProxTrajectory {
    /// `x_0, …, x_K`.
    pub points: Vec<Point>,
    pub values: Vec<ExtReal>,
    /// Solver output of step `k → k+1`; the iteration advances through its representative.
    pub steps: Vec<TiltedSolveResult>,
}

impl ProxTrajectory {
    /// Largest violation of `f(x_{k+1}) + (ε/p)‖x_{k+1} − x_k‖^p ≤ f(x_k)`.
    pub fn descent_excess(&self, epsilon: f64, p: f64) -> f64 {
        self.points
            .windows(2)
            .zip(self.values.windows(2))
            .map(|(x, v)| match (v[0], v[1]) {
                (ExtReal::Finite(f0), ExtReal::Finite(f1)) => {
                    f1 + epsilon / p * x[1].distance(&x[0]).powf(p) - f0
                }
                (ExtReal::PosInf, _) => f64::NEG_INFINITY,
                (_, ExtReal::PosInf) => f64::INFINITY,
            })
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

pub fn run_prox(f: &FunctionOracle, x0: &Point, cfg: &ProxConfig) -> Result<ProxTrajectory> {
    cfg.validate()?;
    f.check_dim(x0.dim())?;
    if !cfg.region.contains(x0) {
        return Err(Error::InvalidArgument("x0 must lie in the region".into()));
    }
    let mut points = vec![x0.clone()];
    let mut values = vec![f.evaluate(x0)];
    let mut steps = Vec::with_capacity(cfg.iterations);
    for _ in 0..cfg.iterations {
        let step = prox_step(f, points.last().expect("nonempty"), cfg)?;
        let next = step.representative().clone();
        values.push(f.evaluate(&next));
        points.push(next);
        steps.push(step);
    }
    Ok(ProxTrajectory {
        points,
        values,
        steps,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateRow {
    pub k: usize,
    pub distance: f64,
    pub bound_x: f64,
    pub value_gap: f64,
    pub bound_f: f64,
    /// `bound + slack − actual`; non-negative when the bound holds.
    pub margin_x: f64,
    pub margin_f: f64,
}

impl RateRow {
    pub fn holds(&self) -> bool {
        self.margin_x >= 0.0 && self.margin_f >= 0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateAudit {
    pub contraction: f64,
    pub rows: Vec<RateRow>,
    pub passed: bool,
}

pub const RATE_ABS_SLACK: f64 = 1e-8;
pub const RATE_REL_SLACK: f64 = 1e-6;

/// Checks `‖x_k − x̄‖ ≤ (ε/γ)^{kq/p} ‖x_0 − x̄‖` and
/// `f(x_k) − f(x̄) ≤ (ε/γ)^{kq} (f(x_0) − f(x̄))` for every `k`.
pub fn audit_rates(
    traj: &ProxTrajectory,
    gamma_ref: f64,
    xbar: &Point,
    fbar: f64,
    pq: &ExponentPair,
    epsilon: f64,
) -> Result<RateAudit> {
    if !(gamma_ref.is_finite() && gamma_ref > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "gamma_ref = {gamma_ref} must be finite and > 0"
        )));
    }
    if !(epsilon > 0.0 && epsilon < gamma_ref) {
        return Err(Error::EpsilonNotBelowGamma {
            epsilon,
            gamma: gamma_ref,
        });
    }
    let contraction = epsilon / gamma_ref;
    let x0 = traj
        .points
        .first()
        .ok_or_else(|| Error::InvalidArgument("empty trajectory".into()))?;
    let finite = |v: ExtReal| {
        v.finite()
            .ok_or_else(|| Error::InvalidArgument("trajectory left dom f".into()))
    };
    let d0 = x0.distance(xbar);
    let g0 = finite(traj.values[0])? - fbar;
    let rows = traj
        .points
        .iter()
        .zip(&traj.values)
        .enumerate()
        .map(|(k, (x, v))| {
            let kf = k as f64;
            let distance = x.distance(xbar);
            let value_gap = finite(*v)? - fbar;
            let bound_x = contraction.powf(kf * pq.ratio()) * d0;
            let bound_f = contraction.powf(kf * pq.q()) * g0;
            Ok(RateRow {
                k,
                distance,
                bound_x,
                value_gap,
                bound_f,
                margin_x: bound_x + RATE_ABS_SLACK + RATE_REL_SLACK * bound_x.abs() - distance,
                margin_f: bound_f + RATE_ABS_SLACK + RATE_REL_SLACK * bound_f.abs() - value_gap,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let passed = rows.iter().all(RateRow::holds);
    Ok(RateAudit {
        contraction,
        rows,
        passed,
    })
}
