//! Ball-constrained global minimization by dense grid scan plus multistart
//! compass-search polish.
//!
//! The solver reports every near-optimal point it finds rather than a single
//! minimizer, because the stability estimates downstream have to look at the
//! worst minimizer of each problem.

use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::space::{distance, BallRegion, ExtReal, FunctionOracle, Point, TiltForm};

/// Largest ambient dimension accepted by the grid scan.
pub const MAX_GRID_DIM: usize = 4;

const MAX_GRID_POINTS: usize = 50_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub grid_points_per_axis: usize,
    pub multistart_count: usize,
    pub polish_max_iters: usize,
    pub polish_step_tolerance: f64,
    /// Relative slack used when collecting near-optimal points.
    pub minimizer_value_tolerance: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            grid_points_per_axis: 201,
            multistart_count: 8,
            polish_max_iters: 4000,
            polish_step_tolerance: 1e-10,
            minimizer_value_tolerance: 1e-9,
        }
    }
}

impl SolverConfig {
    pub fn with_grid(mut self, points_per_axis: usize) -> Self {
        self.grid_points_per_axis = points_per_axis;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.grid_points_per_axis < 3 {
            return Err(Error::InvalidArgument(format!(
                "grid_points_per_axis = {} must be >= 3",
                self.grid_points_per_axis
            )));
        }
        for (name, v) in [
            ("polish_step_tolerance", self.polish_step_tolerance),
            ("minimizer_value_tolerance", self.minimizer_value_tolerance),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "{name} = {v} must be finite and > 0"
                )));
            }
        }
        Ok(())
    }
}

/// Near-optimal points of one ball-constrained problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TiltedSolveResult {
    /// Sorted lexicographically; never empty.
    pub minimizers: Vec<Point>,
    /// Objective value at each entry of `minimizers`.
    pub values: Vec<f64>,
    pub min_value: f64,
    pub evaluations: usize,
}

impl TiltedSolveResult {
    /// Lexicographically smallest minimizer.
    pub fn representative(&self) -> &Point {
        &self.minimizers[0]
    }
}

fn lex_cmp(a: &[f64], b: &[f64]) -> Ordering {
    a.partial_cmp(b).unwrap_or(Ordering::Equal)
}

fn grid_spacing(region: &BallRegion, n: usize) -> f64 {
    2.0 * region.radius() / (n - 1) as f64
}

fn check_grid(region: &BallRegion, n: usize) -> Result<usize> {
    let d = region.dim();
    if d > MAX_GRID_DIM {
        return Err(Error::InvalidArgument(format!(
            "grid scan supports dimension <= {MAX_GRID_DIM}, got {d}"
        )));
    }
    if n < 3 {
        return Err(Error::InvalidArgument(format!(
            "grid_points_per_axis = {n} must be >= 3"
        )));
    }
    let total = (0..d).try_fold(1usize, |acc, _| acc.checked_mul(n));
    match total {
        Some(t) if t <= MAX_GRID_POINTS => Ok(t),
        _ => Err(Error::InvalidArgument(format!(
            "grid of {n}^{d} points is too large"
        ))),
    }
}

fn grid_coords(region: &BallRegion, n: usize, mut index: usize) -> Vec<f64> {
    let r = region.radius();
    let last = (n - 1) as f64;
    region
        .center()
        .iter()
        .map(|&c| {
            let i = index % n;
            index /= n;
            c + r * (2.0 * i as f64 / last - 1.0)
        })
        .collect()
}

/// All points of the axis-aligned grid over the bounding cube that lie in the
/// closed ball, in index order. Points outside the ball are skipped.
pub fn ball_grid(region: &BallRegion, points_per_axis: usize) -> Result<Vec<Point>> {
    let total = check_grid(region, points_per_axis)?;
    Ok((0..total)
        .into_par_iter()
        .filter_map(|idx| {
            let x = grid_coords(region, points_per_axis, idx);
            region.contains(&x).then(|| Point::from_vec_unchecked(x))
        })
        .collect())
}

fn eval_checked(f: &FunctionOracle, x: &[f64]) -> Result<ExtReal> {
    let v = f.evaluate(x);
    if v.is_invalid() {
        return Err(Error::NonFiniteValue { point: x.to_vec() });
    }
    Ok(v)
}

struct Polished {
    x: Vec<f64>,
    value: f64,
    evaluations: usize,
}

fn polish(
    f: &FunctionOracle,
    region: &BallRegion,
    start: &[f64],
    start_value: f64,
    initial_step: f64,
    cfg: &SolverConfig,
) -> Result<Polished> {
    let mut x = start.to_vec();
    let mut fx = start_value;
    let mut step = initial_step;
    let mut evaluations = 0;
    let mut iters = 0;
    let mut trial = vec![0.0; x.len()];
    while step >= cfg.polish_step_tolerance && iters < cfg.polish_max_iters {
        iters += 1;
        let mut improved = false;
        for axis in 0..x.len() {
            for sign in [1.0, -1.0] {
                trial.copy_from_slice(&x);
                trial[axis] += sign * step;
                region.project(&mut trial);
                evaluations += 1;
                if let ExtReal::Finite(ft) = eval_checked(f, &trial)? {
                    if ft < fx {
                        x.copy_from_slice(&trial);
                        fx = ft;
                        improved = true;
                        break;
                    }
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    Ok(Polished {
        x,
        value: fx,
        evaluations,
    })
}

/// Global minimization of `f` over the closed ball `region`.
pub fn argmin_ball(
    f: &FunctionOracle,
    region: &BallRegion,
    cfg: &SolverConfig,
) -> Result<TiltedSolveResult> {
    cfg.validate()?;
    f.check_dim(region.dim())?;
    let n = cfg.grid_points_per_axis;
    let total = check_grid(region, n)?;
    let h = grid_spacing(region, n);
    let cell = h * (region.dim() as f64).sqrt();

    let scanned: Vec<Option<(Vec<f64>, ExtReal)>> = (0..total)
        .into_par_iter()
        .map(|idx| {
            let x = grid_coords(region, n, idx);
            if !region.contains(&x) {
                return None;
            }
            let v = f.evaluate(&x);
            Some((x, v))
        })
        .collect();

    let mut evaluations = 0;
    let mut grid: Vec<(Vec<f64>, f64)> = Vec::new();
    for (x, v) in scanned.into_iter().flatten() {
        evaluations += 1;
        if v.is_invalid() {
            return Err(Error::NonFiniteValue { point: x });
        }
        if let ExtReal::Finite(v) = v {
            grid.push((x, v));
        }
    }
    if grid.is_empty() {
        return Err(Error::AllInfinite);
    }

    // Starts: best grid points, thinned so that no two share a neighbourhood.
    let mut order: Vec<usize> = (0..grid.len()).collect();
    order.sort_by(|&a, &b| grid[a].1.total_cmp(&grid[b].1).then(a.cmp(&b)));
    let mut starts: Vec<usize> = Vec::with_capacity(cfg.multistart_count);
    for &i in &order {
        if starts.len() >= cfg.multistart_count {
            break;
        }
        if starts
            .iter()
            .all(|&s| distance(&grid[s].0, &grid[i].0) > 2.0 * cell)
        {
            starts.push(i);
        }
    }

    let polished: Vec<Result<Polished>> = starts
        .par_iter()
        .map(|&i| polish(f, region, &grid[i].0, grid[i].1, h, cfg))
        .collect();
    let mut basins: Vec<Polished> = Vec::with_capacity(polished.len());
    for p in polished {
        let p = p?;
        evaluations += p.evaluations;
        basins.push(p);
    }

    // One representative per basin: the best polished point within a grid cell.
    basins.sort_by(|a, b| {
        a.value
            .total_cmp(&b.value)
            .then_with(|| lex_cmp(&a.x, &b.x))
    });
    let mut kept: Vec<(Vec<f64>, f64)> = Vec::new();
    for b in basins {
        if kept.iter().all(|(k, _)| distance(k, &b.x) > cell) {
            kept.push((b.x, b.value));
        }
    }

    // A grid point is superseded when a polished point in its cell is strictly better.
    let mut candidates = kept.clone();
    for (x, v) in grid {
        let superseded = kept
            .iter()
            .any(|(k, kv)| *kv < v && distance(k, &x) <= cell);
        if !superseded {
            candidates.push((x, v));
        }
    }

    let best = candidates.iter().map(|c| c.1).fold(f64::INFINITY, f64::min);
    let cutoff = best + cfg.minimizer_value_tolerance * (1.0 + best.abs());
    let mut near: Vec<(Vec<f64>, f64)> = candidates.into_iter().filter(|c| c.1 <= cutoff).collect();
    near.sort_by(|a, b| lex_cmp(&a.0, &b.0).then(a.1.total_cmp(&b.1)));
    near.dedup_by(|a, b| a.0 == b.0);

    let (minimizers, values) = near
        .into_iter()
        .map(|(x, v)| (Point::from_vec_unchecked(x), v))
        .unzip();
    Ok(TiltedSolveResult {
        minimizers,
        values,
        min_value: best,
        evaluations,
    })
}

/// Minimizes `y ↦ f(y) − ⟨ξ, y⟩` over the ball.
pub fn argmin_tilted(
    f: &FunctionOracle,
    xi: &TiltForm,
    region: &BallRegion,
    cfg: &SolverConfig,
) -> Result<TiltedSolveResult> {
    argmin_ball(&f.tilted(xi)?, region, cfg)
}

/// Minimizes `f + g` over the ball.
pub fn argmin_perturbed(
    f: &FunctionOracle,
    g: &FunctionOracle,
    region: &BallRegion,
    cfg: &SolverConfig,
) -> Result<TiltedSolveResult> {
    argmin_ball(&f.plus(g)?, region, cfg)
}
