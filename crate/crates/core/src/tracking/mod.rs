//! Box-constrained tracking for the semilinear elliptic state equation
//! `−Δy + y³ = u` on the unit square, discretized by finite differences.
//!
//! The reduced objective is `J(u) = ½‖y_u − y_d‖²` with gradient `p_u` (the
//! adjoint state) and second derivative `J''(u)v² = ∫ (1 − 6 y_u p_u) z_v²`.
//! Both identities hold exactly for the discrete objective built on the
//! discrete state equation, which is what the consistency tests exploit.

mod field;
mod pde;

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use field::{ControlField2D, Field2D, Grid2D};
pub use pde::{
    neg_laplacian, solve_adjoint, solve_linearized, solve_shifted_laplacian, solve_state,
    solve_state_detailed, state_residual, LinearSolveInfo, StateSolve, LINEAR_TOLERANCE,
    NEWTON_TOLERANCE,
};

use crate::error::{Error, Result};

pub const DEFAULT_ALPHA: f64 = 0.0;
pub const DEFAULT_BETA: f64 = 12.0;

/// A tracking problem `min ½‖y_u − y_d‖²` over `α ≤ u ≤ β`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackingProblem {
    pub target: Field2D,
    pub alpha: f64,
    pub beta: f64,
}

impl TrackingProblem {
    pub fn new(target: Field2D, alpha: f64, beta: f64) -> Result<Self> {
        field::check_bounds(alpha, beta)?;
        Ok(TrackingProblem {
            target,
            alpha,
            beta,
        })
    }

    /// `y_d = sin(πx₁) sin(πx₂)` with controls in `[0, 12]`. Exact tracking
    /// would need controls up to about `2π² + 1`, so the upper bound is active
    /// on a central region while the target is tracked closely near the edges.
    pub fn default_instance(n: usize) -> Result<Self> {
        let grid = Grid2D::new(n)?;
        let target = grid.sample(|x, y| (PI * x).sin() * (PI * y).sin());
        Self::new(target, DEFAULT_ALPHA, DEFAULT_BETA)
    }

    pub fn grid(&self) -> Grid2D {
        self.target.grid()
    }

    /// The same problem with target `y_d + η`.
    pub fn with_shifted_target(&self, eta: &Field2D) -> TrackingProblem {
        TrackingProblem {
            target: self.target.add(eta),
            alpha: self.alpha,
            beta: self.beta,
        }
    }

    fn clip(&self, u: &Field2D) -> Field2D {
        let (a, b) = (self.alpha, self.beta);
        u.map(|v| v.clamp(a, b))
    }

    pub fn control(&self, values: Field2D) -> Result<ControlField2D> {
        ControlField2D::new(values, self.alpha, self.beta)
    }
}

/// `J(u) = ½‖y_u − y_d‖²` in the discrete L² norm.
pub fn objective(u: &Field2D, y_d: &Field2D) -> Result<f64> {
    let y = solve_state(u)?;
    Ok(0.5 * y.sub(y_d).l2_norm().powi(2))
}

/// State, adjoint and objective at one control.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub state: Field2D,
    pub adjoint: Field2D,
    pub objective: f64,
}

pub fn evaluate(u: &Field2D, y_d: &Field2D) -> Result<Evaluation> {
    let state = solve_state(u)?;
    let adjoint = solve_adjoint(&state, y_d)?;
    let objective = 0.5 * state.sub(y_d).l2_norm().powi(2);
    Ok(Evaluation {
        state,
        adjoint,
        objective,
    })
}

/// `J''(ū)v² = ∫ (1 − 6 y_ū p_ū) z_v²`.
pub fn second_order_form(ubar: &Field2D, v: &Field2D, y_d: &Field2D) -> Result<f64> {
    let at = evaluate(ubar, y_d)?;
    let z = solve_linearized(v, &at.state)?;
    Ok(weighted_square(&at.state, &at.adjoint, &z))
}

fn weighted_square(y: &Field2D, p: &Field2D, z: &Field2D) -> f64 {
    let weight = y.zip_map(p, |yi, pi| 1.0 - 6.0 * yi * pi);
    weight
        .zip_map(z, |w, zi| w * zi * zi)
        .inner(&Field2D::constant(z.grid(), 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptConfig {
    /// Stop when `‖u − clip(u − p_u)‖ ≤ tolerance`.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Sufficient-decrease constant of the Armijo test.
    pub armijo: f64,
    pub initial_step: f64,
}

impl Default for OptConfig {
    fn default() -> Self {
        OptConfig {
            tolerance: 1e-8,
            max_iterations: 20_000,
            armijo: 1e-4,
            initial_step: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackingResult {
    pub control: ControlField2D,
    pub state: Field2D,
    pub adjoint: Field2D,
    pub objective: f64,
    /// Projected-gradient norm `‖ū − clip(ū − p_ū)‖` at the returned iterate.
    pub first_order_residual: f64,
    /// Newton residual of the state equation at the returned iterate.
    pub state_residual: f64,
    pub iterations: usize,
    /// `false` when the iteration cap (or a stalled line search) ended the run.
    pub converged: bool,
}

impl TrackingResult {
    /// `min_{u feasible} ∫ p_ū (u − ū)`, attained at a vertex of the box.
    pub fn vertex_first_order_gap(&self) -> f64 {
        let (a, b) = (self.control.alpha(), self.control.beta());
        let h = self.state.grid().h();
        h * h
            * self
                .adjoint
                .values()
                .iter()
                .zip(self.control.values())
                .map(|(&p, &u)| (p * (a - u)).min(p * (b - u)))
                .sum::<f64>()
    }

    /// Nodes where `p > tol` but `ū > α`, or `p < −tol` but `ū < β`.
    pub fn sign_violations(&self, tol: f64) -> usize {
        let (a, b) = (self.control.alpha(), self.control.beta());
        let slack = 1e-10 * (b - a);
        self.adjoint
            .values()
            .iter()
            .zip(self.control.values())
            .filter(|(&p, &u)| (p > tol && u > a + slack) || (p < -tol && u < b - slack))
            .count()
    }
}

fn projected_gradient_norm(problem: &TrackingProblem, u: &Field2D, p: &Field2D) -> f64 {
    u.sub(&problem.clip(&u.sub(p))).l2_norm()
}

/// Projected gradient with Barzilai–Borwein trial steps and Armijo backtracking.
pub fn solve_tracking(
    problem: &TrackingProblem,
    opt: &OptConfig,
    initial: Option<&Field2D>,
) -> Result<TrackingResult> {
    if !(opt.tolerance > 0.0 && opt.initial_step > 0.0 && opt.armijo > 0.0 && opt.armijo < 1.0) {
        return Err(Error::InvalidArgument(
            "optimizer tolerances must be positive, armijo in (0,1)".into(),
        ));
    }
    let grid = problem.grid();
    let mut u = match initial {
        Some(u0) => {
            if u0.grid() != grid {
                return Err(Error::DimensionMismatch {
                    expected: grid.len(),
                    actual: u0.grid().len(),
                });
            }
            problem.clip(u0)
        }
        None => Field2D::constant(grid, 0.5 * (problem.alpha + problem.beta)),
    };
    let mut at = evaluate(&u, &problem.target)?;
    let mut step = opt.initial_step;
    let mut previous: Option<(Field2D, Field2D)> = None;
    let mut iterations = 0;
    let mut converged = false;
    loop {
        let pg = projected_gradient_norm(problem, &u, &at.adjoint);
        if pg <= opt.tolerance {
            converged = true;
            break;
        }
        if iterations == opt.max_iterations {
            break;
        }
        if let Some((u_prev, p_prev)) = &previous {
            let du = u.sub(u_prev);
            let dg = at.adjoint.sub(p_prev);
            let curvature = du.inner(&dg);
            if curvature > 0.0 {
                step = (du.inner(&du) / curvature).clamp(1e-8, 1e8);
            }
        }
        let mut accepted = None;
        for _ in 0..60 {
            let trial = problem.clip(&u.sub(&at.adjoint.scaled(step)));
            let decrease = at.adjoint.inner(&trial.sub(&u));
            let y = solve_state(&trial)?;
            let j = 0.5 * y.sub(&problem.target).l2_norm().powi(2);
            if j <= at.objective + opt.armijo * decrease {
                accepted = Some((trial, y, j));
                break;
            }
            step *= 0.5;
        }
        let Some((trial, y, j)) = accepted else { break };
        iterations += 1;
        let p = solve_adjoint(&y, &problem.target)?;
        previous = Some((
            std::mem::replace(&mut u, trial),
            std::mem::replace(&mut at.adjoint, p),
        ));
        at.state = y;
        at.objective = j;
    }
    let first_order_residual = projected_gradient_norm(problem, &u, &at.adjoint);
    let state_residual = state_residual(&at.state, &u).l2_norm();
    Ok(TrackingResult {
        control: problem.control(u)?,
        state: at.state,
        adjoint: at.adjoint,
        objective: at.objective,
        first_order_residual,
        state_residual,
        iterations,
        converged,
    })
}

/// Feasible direction families used by the second-order and growth samplers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DirectionKind {
    LowerVertex,
    UpperVertex,
    /// The vertex minimizing `∫ p_ū (u − ū)`.
    FirstOrderVertex,
    RandomVertex,
    RandomInterior,
}

fn sample_targets(
    problem: &TrackingProblem,
    ubar: &TrackingResult,
    count: usize,
    seed: u64,
) -> Vec<(DirectionKind, Field2D)> {
    let grid = problem.grid();
    let (a, b) = (problem.alpha, problem.beta);
    let mut out = vec![
        (DirectionKind::LowerVertex, Field2D::constant(grid, a)),
        (DirectionKind::UpperVertex, Field2D::constant(grid, b)),
        (
            DirectionKind::FirstOrderVertex,
            ubar.adjoint.map(|p| if p > 0.0 { a } else { b }),
        ),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for k in 0..count {
        let values: Vec<f64> = if k % 2 == 0 {
            (0..grid.len())
                .map(|_| if rng.random::<bool>() { a } else { b })
                .collect()
        } else {
            (0..grid.len()).map(|_| rng.random_range(a..=b)).collect()
        };
        let kind = if k % 2 == 0 {
            DirectionKind::RandomVertex
        } else {
            DirectionKind::RandomInterior
        };
        out.push((
            kind,
            Field2D::from_values(grid, values).expect("finite samples"),
        ));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SscSample {
    pub kind: DirectionKind,
    /// Factor `t ∈ (0, 1]` applied to `u − ū` to land in the shell `‖z_v‖ ≤ δ`.
    pub scale: f64,
    pub linear_term: f64,
    pub quadratic_term: f64,
    pub z_norm: f64,
    pub quotient: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SscEstimate {
    /// Minimum sampled `(J'(ū)v + ½J''(ū)v²) / ‖z_v‖²`.
    pub c_hat: f64,
    pub delta: f64,
    pub samples: Vec<SscSample>,
}

/// Samples feasible directions `v = t(u − ū)` with `‖z_v‖ ≤ δ` and returns the
/// smallest second-order quotient. A positive value is evidence for the
/// second-order growth condition at `ū`.
pub fn ssc_estimate(
    problem: &TrackingProblem,
    ubar: &TrackingResult,
    delta: f64,
    sample_count: usize,
    seed: u64,
) -> Result<SscEstimate> {
    if !(delta.is_finite() && delta > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "shell radius delta = {delta} must be positive"
        )));
    }
    let y = &ubar.state;
    let p = &ubar.adjoint;
    let targets = sample_targets(problem, ubar, sample_count, seed);
    let samples: Vec<Option<SscSample>> = targets
        .par_iter()
        .map(|(kind, u)| {
            let v = u.sub(ubar.control.field());
            let z = solve_linearized(&v, y)?;
            let zn = z.l2_norm();
            if zn == 0.0 {
                return Ok(None);
            }
            let t = (delta / zn).min(1.0);
            let linear_term = t * p.inner(&v);
            let quadratic_term = t * t * weighted_square(y, p, &z);
            let z_norm = t * zn;
            let quotient = (linear_term + 0.5 * quadratic_term) / (z_norm * z_norm);
            Ok(Some(SscSample {
                kind: *kind,
                scale: t,
                linear_term,
                quadratic_term,
                z_norm,
                quotient,
            }))
        })
        .collect::<Result<_>>()?;
    let samples: Vec<SscSample> = samples.into_iter().flatten().collect();
    let c_hat = samples
        .iter()
        .map(|s| s.quotient)
        .fold(f64::INFINITY, f64::min);
    if samples.is_empty() {
        return Err(Error::NoSamplesInShell);
    }
    Ok(SscEstimate {
        c_hat,
        delta,
        samples,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthSample {
    pub kind: DirectionKind,
    pub scale: f64,
    pub objective_gap: f64,
    pub state_distance: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthCrossCheck {
    /// Minimum sampled `(J(u) − J(ū)) / ‖y_u − y_ū‖²`.
    pub c_hat: f64,
    pub samples: Vec<GrowthSample>,
}

/// Samples feasible controls with `‖y_u − y_ū‖ ≤ δ` and returns the smallest
/// quadratic growth quotient of the objective in terms of the state.
pub fn growth_cross_check(
    problem: &TrackingProblem,
    ubar: &TrackingResult,
    delta: f64,
    sample_count: usize,
    seed: u64,
) -> Result<GrowthCrossCheck> {
    if !(delta.is_finite() && delta > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "shell radius delta = {delta} must be positive"
        )));
    }
    let targets = sample_targets(problem, ubar, sample_count, seed);
    let samples: Vec<Option<GrowthSample>> = targets
        .par_iter()
        .map(|(kind, w)| {
            let v = w.sub(ubar.control.field());
            let zn = solve_linearized(&v, &ubar.state)?.l2_norm();
            if zn == 0.0 {
                return Ok(None);
            }
            let mut t = (delta / zn).min(1.0);
            for _ in 0..40 {
                let u = ubar.control.field().add(&v.scaled(t));
                let y = solve_state(&u)?;
                let dist = y.sub(&ubar.state).l2_norm();
                if dist <= delta {
                    if dist == 0.0 {
                        return Ok(None);
                    }
                    let gap = 0.5 * y.sub(&problem.target).l2_norm().powi(2) - ubar.objective;
                    return Ok(Some(GrowthSample {
                        kind: *kind,
                        scale: t,
                        objective_gap: gap,
                        state_distance: dist,
                        ratio: gap / (dist * dist),
                    }));
                }
                t *= 0.5;
            }
            Ok(None)
        })
        .collect::<Result<_>>()?;
    let samples: Vec<GrowthSample> = samples.into_iter().flatten().collect();
    if samples.is_empty() {
        return Err(Error::NoSamplesInShell);
    }
    let c_hat = samples
        .iter()
        .map(|s| s.ratio)
        .fold(f64::INFINITY, f64::min);
    Ok(GrowthCrossCheck { c_hat, samples })
}

/// Number of sine modes per axis in random perturbations.
pub const PERTURBATION_MODES: usize = 4;

/// `Σ_{k,l ≤ 4} c_kl sin(kπx₁) sin(lπx₂)` with standard normal coefficients,
/// rescaled to discrete L² norm `norm`.
pub fn random_smooth_field(grid: Grid2D, norm: f64, rng: &mut impl Rng) -> Field2D {
    let coeffs: Vec<f64> = (0..PERTURBATION_MODES * PERTURBATION_MODES)
        .map(|_| rng.sample(StandardNormal))
        .collect();
    let raw = grid.sample(|x, y| {
        let mut s = 0.0;
        for k in 0..PERTURBATION_MODES {
            for l in 0..PERTURBATION_MODES {
                s += coeffs[k * PERTURBATION_MODES + l]
                    * ((k + 1) as f64 * PI * x).sin()
                    * ((l + 1) as f64 * PI * y).sin();
            }
        }
        s
    });
    let current = raw.l2_norm();
    if current == 0.0 || norm == 0.0 {
        return Field2D::zeros(grid);
    }
    raw.scaled(norm / current)
}

fn sample_seed(seed: u64, norm_index: usize, sample: usize) -> u64 {
    seed ^ ((norm_index as u64) << 32) ^ (sample as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSample {
    pub norm_index: usize,
    pub sample: usize,
    pub eta_norm: f64,
    /// `‖y_{u_η} − y_ū‖ / ‖η‖`; `None` when `η = 0` or the solve failed.
    pub ratio: Option<f64>,
    pub state_shift: f64,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub samples: Vec<SweepSample>,
    /// Largest ratio over the sweep: the stationary-point sensitivity estimate.
    pub kappa_hat: f64,
    pub median_ratio: f64,
}

impl SweepReport {
    pub fn ratios(&self) -> Vec<f64> {
        self.samples.iter().filter_map(|s| s.ratio).collect()
    }

    /// Ratios do not grow as `‖η‖ → 0`: every ratio is at most `factor` times
    /// the largest ratio observed at the largest perturbation norm.
    pub fn bounded_toward_zero(&self, factor: f64) -> bool {
        let ratios = self.ratios();
        if ratios.is_empty() || ratios.iter().any(|r| !r.is_finite()) {
            return false;
        }
        let largest = self
            .samples
            .iter()
            .filter(|s| s.ratio.is_some())
            .map(|s| s.eta_norm)
            .fold(0.0, f64::max);
        let reference = self
            .samples
            .iter()
            .filter(|s| s.eta_norm >= largest * (1.0 - 1e-12))
            .filter_map(|s| s.ratio)
            .fold(0.0, f64::max);
        ratios.iter().all(|&r| r <= factor * reference)
    }

    /// Every ratio lies within `factor` of the median, in both directions.
    pub fn within_factor_of_median(&self, factor: f64) -> bool {
        let m = self.median_ratio;
        let ratios = self.ratios();
        !ratios.is_empty() && m > 0.0 && ratios.iter().all(|&r| r <= factor * m && r >= m / factor)
    }
}

fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    if v.len() % 2 == 1 {
        v[mid]
    } else {
        0.5 * (v[mid - 1] + v[mid])
    }
}

/// Solves the problems with targets `y_d + η` for random smooth `η` of each
/// requested norm, warm-started from `ū`, and records `‖y_{u_η} − y_ū‖ / ‖η‖`.
/// Per-sample solver failures are recorded, not propagated.
pub fn perturbation_sweep(
    problem: &TrackingProblem,
    ubar: &TrackingResult,
    eta_norms: &[f64],
    etas_per_norm: usize,
    opt: &OptConfig,
    seed: u64,
) -> Result<SweepReport> {
    if let Some(bad) = eta_norms.iter().find(|n| !(n.is_finite() && **n >= 0.0)) {
        return Err(Error::InvalidArgument(format!(
            "perturbation norm {bad} must be finite and >= 0"
        )));
    }
    let grid = problem.grid();
    let jobs: Vec<(usize, usize, f64)> = eta_norms
        .iter()
        .enumerate()
        .flat_map(|(ni, &norm)| (0..etas_per_norm).map(move |s| (ni, s, norm)))
        .collect();
    let samples: Vec<SweepSample> = jobs
        .par_iter()
        .map(|&(norm_index, sample, norm)| {
            let mut rng = ChaCha8Rng::seed_from_u64(sample_seed(seed, norm_index, sample));
            let eta = random_smooth_field(grid, norm, &mut rng);
            let eta_norm = eta.l2_norm();
            let perturbed = problem.with_shifted_target(&eta);
            let mut out = SweepSample {
                norm_index,
                sample,
                eta_norm,
                ratio: None,
                state_shift: f64::NAN,
                objective: f64::NAN,
                iterations: 0,
                converged: false,
                error: None,
            };
            match solve_tracking(&perturbed, opt, Some(ubar.control.field())) {
                Ok(res) => {
                    out.state_shift = res.state.sub(&ubar.state).l2_norm();
                    out.objective = res.objective;
                    out.iterations = res.iterations;
                    out.converged = res.converged;
                    if eta_norm > 0.0 {
                        out.ratio = Some(out.state_shift / eta_norm);
                    }
                }
                Err(e) => out.error = Some(e.to_string()),
            }
            out
        })
        .collect();
    let ratios: Vec<f64> = samples.iter().filter_map(|s| s.ratio).collect();
    let kappa_hat = ratios.iter().copied().fold(0.0, f64::max);
    Ok(SweepReport {
        median_ratio: median(&ratios),
        kappa_hat,
        samples,
    })
}

/// Factor within which sweep ratios must stay of their median.
pub const SWEEP_SPREAD_FACTOR: f64 = 4.0;

/// Second-order growth implies stable tracking: when the second-order estimate
/// is positive, every sweep solve must converge and the sensitivity ratios must
/// stay finite without growing as the perturbation shrinks.
pub fn stability_consistent(ssc: &SscEstimate, sweep: &SweepReport) -> bool {
    if ssc.c_hat <= 0.0 {
        return true;
    }
    let complete = sweep
        .samples
        .iter()
        .all(|s| s.error.is_none() && s.converged);
    complete && sweep.kappa_hat.is_finite() && sweep.bounded_toward_zero(SWEEP_SPREAD_FACTOR)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize) -> Grid2D {
        Grid2D::new(n).unwrap()
    }

    #[test]
    fn perfect_tracking_has_zero_objective() {
        let g = grid(12);
        let u = g.sample(|x, y| 3.0 + x - y);
        let yd = solve_state(&u).unwrap();
        assert_eq!(objective(&u, &yd).unwrap(), 0.0);
    }

    #[test]
    fn constant_target_with_zero_control() {
        let g = grid(63);
        let j = objective(&Field2D::zeros(g), &Field2D::constant(g, 2.0)).unwrap();
        // ½c²·(n h)² with c = 2
        assert!((j - 2.0 * (63.0f64 / 64.0).powi(2)).abs() < 1e-12);
        assert!((j - 2.0).abs() < 0.07);
    }

    #[test]
    fn second_order_form_collapses_without_adjoint() {
        let g = grid(10);
        let ubar = g.sample(|x, y| 4.0 * x + y);
        let yd = solve_state(&ubar).unwrap();
        let v = g.sample(|x, y| (x - 0.3) * (y + 0.2));
        let q = second_order_form(&ubar, &v, &yd).unwrap();
        let z = solve_linearized(&v, &yd).unwrap();
        assert!((q - z.l2_norm().powi(2)).abs() <= 1e-14 * q.max(1.0));
        assert!(q > 0.0);
        assert_eq!(
            second_order_form(&ubar, &Field2D::zeros(g), &yd).unwrap(),
            0.0
        );
    }

    #[test]
    fn second_difference_matches_second_order_form() {
        let g = grid(16);
        let yd = g.sample(|x, y| 2.0 * (PI * x).sin() * (PI * y).sin());
        let ubar = g.sample(|x, y| 5.0 + 3.0 * x * y);
        let v = g.sample(|x, y| (2.0 * PI * x).sin() + y);
        let t = 1e-3;
        let j0 = objective(&ubar, &yd).unwrap();
        let jp = objective(&ubar.add(&v.scaled(t)), &yd).unwrap();
        let jm = objective(&ubar.sub(&v.scaled(t)), &yd).unwrap();
        let fd = (jp - 2.0 * j0 + jm) / (t * t);
        let q = second_order_form(&ubar, &v, &yd).unwrap();
        assert!((fd - q).abs() <= 1e-4 * q.abs(), "fd {fd} q {q}");
    }

    #[test]
    fn attainable_target_is_recovered() {
        let g = grid(8);
        let ustar = g.sample(|x, y| 2.0 + x + y);
        let problem = TrackingProblem::new(solve_state(&ustar).unwrap(), 0.0, 8.0).unwrap();
        let res = solve_tracking(
            &problem,
            &OptConfig {
                tolerance: 1e-10,
                ..OptConfig::default()
            },
            None,
        )
        .unwrap();
        assert!(res.converged);
        assert!(res.objective < 1e-14, "{}", res.objective);
        assert!(res.state_residual <= NEWTON_TOLERANCE);
    }

    #[test]
    fn unreachable_target_gives_bang_bang_controls() {
        let g = grid(10);
        let problem = TrackingProblem::new(Field2D::constant(g, 10.0), -1.0, 2.0).unwrap();
        let res = solve_tracking(&problem, &OptConfig::default(), None).unwrap();
        assert!(res.converged);
        assert!(res.control.values().iter().all(|&u| u == 2.0));
        assert_eq!(res.sign_violations(1e-10), 0);
        assert!(res.vertex_first_order_gap() >= -1e-8);
    }

    #[test]
    fn ssc_quotient_is_one_half_without_adjoint() {
        let g = grid(8);
        let ustar = g.sample(|x, y| 3.0 + x * y);
        let problem = TrackingProblem::new(solve_state(&ustar).unwrap(), 0.0, 8.0).unwrap();
        let res = solve_tracking(
            &problem,
            &OptConfig {
                tolerance: 1e-11,
                ..OptConfig::default()
            },
            Some(&ustar),
        )
        .unwrap();
        let ssc = ssc_estimate(&problem, &res, 0.05, 4, 7).unwrap();
        assert!((ssc.c_hat - 0.5).abs() < 1e-6, "{}", ssc.c_hat);
        for s in &ssc.samples {
            assert!(s.z_norm <= 0.05 * (1.0 + 1e-12));
        }
    }

    #[test]
    fn sweep_with_zero_norm_skips_ratio() {
        let g = grid(6);
        let ustar = g.sample(|x, _| 1.0 + x);
        let problem = TrackingProblem::new(solve_state(&ustar).unwrap(), 0.0, 8.0).unwrap();
        let res = solve_tracking(&problem, &OptConfig::default(), Some(&ustar)).unwrap();
        let sweep =
            perturbation_sweep(&problem, &res, &[0.0], 2, &OptConfig::default(), 1).unwrap();
        assert!(sweep
            .samples
            .iter()
            .all(|s| s.ratio.is_none() && s.state_shift < 1e-9));
    }

    #[test]
    fn gradient_matches_central_differences() {
        let g = grid(12);
        let yd = g.sample(|x, y| (PI * x).sin() * (PI * y).sin());
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..5 {
            let u = random_smooth_field(g, 6.0, &mut rng).map(|v| v + 4.0);
            let v = random_smooth_field(g, 1.0, &mut rng);
            let at = evaluate(&u, &yd).unwrap();
            let t = 1e-5;
            let jp = objective(&u.add(&v.scaled(t)), &yd).unwrap();
            let jm = objective(&u.sub(&v.scaled(t)), &yd).unwrap();
            let fd = (jp - jm) / (2.0 * t);
            assert!((at.adjoint.inner(&v) - fd).abs() <= 1e-6 * (1.0 + at.objective));
        }
    }

    #[test]
    fn linearized_operator_is_self_adjoint() {
        let g = grid(12);
        let y = solve_state(&g.sample(|x, y| 9.0 * x * (1.0 - y))).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let v = random_smooth_field(g, 1.0, &mut rng);
        let w = random_smooth_field(g, 1.0, &mut rng);
        let zv = solve_linearized(&v, &y).unwrap();
        let zw = solve_linearized(&w, &y).unwrap();
        assert!((zv.inner(&w) - v.inner(&zw)).abs() <= 1e-10);
    }

    #[test]
    fn linearized_state_is_first_order_accurate() {
        let g = grid(12);
        let u = g.sample(|x, y| 6.0 + 4.0 * x - 2.0 * y);
        let v = g.sample(|x, y| (PI * x).sin() + (3.0 * y).cos());
        let y = solve_state(&u).unwrap();
        let z = solve_linearized(&v, &y).unwrap();
        let remainder = |t: f64| {
            solve_state(&u.add(&v.scaled(t)))
                .unwrap()
                .sub(&y)
                .sub(&z.scaled(t))
                .l2_norm()
        };
        let (r1, r2) = (remainder(1e-2), remainder(5e-3));
        // halving t divides an O(t²) remainder by about four
        assert!(r1 / r2 > 3.5 && r1 / r2 < 4.5, "{}", r1 / r2);
    }

    #[test]
    fn moving_target_toward_achieved_state_does_not_increase_objective() {
        let problem = TrackingProblem::default_instance(12).unwrap();
        let res = solve_tracking(&problem, &OptConfig::default(), None).unwrap();
        let eta = res.state.sub(&problem.target);
        for t in [0.1, 0.5, 1.0] {
            let shifted = problem.target.add(&eta.scaled(t));
            assert!(objective(res.control.field(), &shifted).unwrap() <= res.objective);
        }
    }

    #[test]
    fn default_instance_is_partly_active() {
        let problem = TrackingProblem::default_instance(16).unwrap();
        let res = solve_tracking(&problem, &OptConfig::default(), None).unwrap();
        assert!(res.converged);
        let at_upper = res
            .control
            .values()
            .iter()
            .filter(|&&u| u == problem.beta)
            .count();
        assert!(at_upper > 0 && at_upper < problem.grid().len());
        assert_eq!(res.sign_violations(1e-7), 0);
        assert!(res.vertex_first_order_gap() >= -1e-8);
        assert!(ssc_estimate(&problem, &res, 0.1, 8, 3).unwrap().c_hat > 0.0);
    }

    fn sweep_of(ratios: &[(f64, Option<f64>)]) -> SweepReport {
        let samples: Vec<SweepSample> = ratios
            .iter()
            .enumerate()
            .map(|(i, &(eta_norm, ratio))| SweepSample {
                norm_index: 0,
                sample: i,
                eta_norm,
                ratio,
                state_shift: 0.0,
                objective: 0.0,
                iterations: 1,
                converged: true,
                error: None,
            })
            .collect();
        let r: Vec<f64> = samples.iter().filter_map(|s| s.ratio).collect();
        SweepReport {
            kappa_hat: r.iter().copied().fold(0.0, f64::max),
            median_ratio: median(&r),
            samples,
        }
    }

    #[test]
    fn sweep_spread_checks() {
        let flat = sweep_of(&[(1e-3, Some(0.3)), (1e-2, Some(0.4)), (1e-1, Some(0.35))]);
        assert!(flat.within_factor_of_median(4.0) && flat.bounded_toward_zero(4.0));

        // insensitive at small norms: bounded, but not within a factor of the median
        let locked = sweep_of(&[
            (1e-3, Some(0.0)),
            (1e-3, Some(0.0)),
            (1e-2, Some(0.0)),
            (1e-1, Some(0.2)),
        ]);
        assert!(locked.bounded_toward_zero(4.0));
        assert!(!locked.within_factor_of_median(4.0));

        let blowup = sweep_of(&[(1e-3, Some(5.0)), (1e-2, Some(0.5)), (1e-1, Some(0.2))]);
        assert!(!blowup.bounded_toward_zero(4.0));
        assert_eq!(median(&[3.0, 1.0, 2.0, 10.0]), 2.5);
    }

    #[test]
    fn random_fields_have_requested_norm_and_are_reproducible() {
        let g = grid(20);
        let a = random_smooth_field(g, 0.01, &mut ChaCha8Rng::seed_from_u64(3));
        let b = random_smooth_field(g, 0.01, &mut ChaCha8Rng::seed_from_u64(3));
        assert_eq!(a, b);
        assert!((a.l2_norm() - 0.01).abs() < 1e-15);
    }
}
