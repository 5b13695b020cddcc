//! Five-point finite differences for `−Δy + y³ = u` with zero Dirichlet data,
//! its adjoint and its linearization.

use serde::{Deserialize, Serialize};

use super::field::{l2_norm, Field2D, Grid2D};
use crate::error::{Error, Result};

/// Target for the discrete L² residual of the state equation.
pub const NEWTON_TOLERANCE: f64 = 1e-10;
/// Target for the discrete L² residual of the linear solves.
pub const LINEAR_TOLERANCE: f64 = 1e-12;

const NEWTON_MAX_ITERS: usize = 60;
const MAX_HALVINGS: usize = 30;

/// `out = (−Δ_h + diag(c)) x`; `c = None` means the pure Laplacian.
fn apply(grid: Grid2D, c: Option<&[f64]>, x: &[f64], out: &mut [f64]) {
    let n = grid.n();
    let inv_h2 = 1.0 / (grid.h() * grid.h());
    for j in 0..n {
        for i in 0..n {
            let k = j * n + i;
            let mut s = 4.0 * x[k];
            if i > 0 {
                s -= x[k - 1];
            }
            if i + 1 < n {
                s -= x[k + 1];
            }
            if j > 0 {
                s -= x[k - n];
            }
            if j + 1 < n {
                s -= x[k + n];
            }
            out[k] = s * inv_h2 + c.map_or(0.0, |c| c[k] * x[k]);
        }
    }
}

/// Discrete `−Δ_h x`.
pub fn neg_laplacian(x: &Field2D) -> Field2D {
    let mut out = Field2D::zeros(x.grid());
    apply(x.grid(), None, x.values(), out.values_mut());
    out
}

/// Summary of one conjugate-gradient solve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearSolveInfo {
    pub iterations: usize,
    /// Discrete L² norm of `b − A x` recomputed from the returned iterate.
    pub residual: f64,
}

/// Jacobi-preconditioned CG for the SPD system `(−Δ_h + diag(c)) x = b`, `c ≥ 0`.
fn conjugate_gradient(
    grid: Grid2D,
    c: &[f64],
    b: &[f64],
    x: &mut [f64],
    tol: f64,
) -> Result<LinearSolveInfo> {
    let len = b.len();
    let h = grid.h();
    let inv_h2 = 1.0 / (h * h);
    let diag: Vec<f64> = c.iter().map(|ci| 4.0 * inv_h2 + ci).collect();
    let mut r = vec![0.0; len];
    apply(grid, Some(c), x, &mut r);
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
    let mut z: Vec<f64> = r.iter().zip(&diag).map(|(ri, di)| ri / di).collect();
    let mut p = z.clone();
    let mut ap = vec![0.0; len];
    let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
    let max_iters = 20 * len + 100;
    let mut iterations = 0;
    while l2_norm(&r, h) > tol && iterations < max_iters {
        iterations += 1;
        apply(grid, Some(c), &p, &mut ap);
        let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
        if pap.is_nan() || pap <= 0.0 {
            return Err(Error::LinearSolverBreakdown(format!(
                "non-positive curvature p^T A p = {pap:e}"
            )));
        }
        let step = rz / pap;
        for k in 0..len {
            x[k] += step * p[k];
            r[k] -= step * ap[k];
        }
        for k in 0..len {
            z[k] = r[k] / diag[k];
        }
        let rz_new: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let beta = rz_new / rz;
        rz = rz_new;
        for k in 0..len {
            p[k] = z[k] + beta * p[k];
        }
    }
    apply(grid, Some(c), x, &mut r);
    let residual = h * r
        .iter()
        .zip(b)
        .map(|(ax, bi)| (bi - ax) * (bi - ax))
        .sum::<f64>()
        .sqrt();
    if !residual.is_finite() {
        return Err(Error::LinearSolverBreakdown(
            "residual is not finite".into(),
        ));
    }
    Ok(LinearSolveInfo {
        iterations,
        residual,
    })
}

/// Solves `(−Δ_h + diag(c)) x = b` to [`LINEAR_TOLERANCE`] (scaled by `max(1, ‖b‖)`).
pub fn solve_shifted_laplacian(c: &Field2D, b: &Field2D) -> Result<(Field2D, LinearSolveInfo)> {
    let grid = b.grid();
    if c.grid() != grid {
        return Err(Error::DimensionMismatch {
            expected: grid.len(),
            actual: c.grid().len(),
        });
    }
    let tol = LINEAR_TOLERANCE * b.l2_norm().max(1.0);
    let mut x = vec![0.0; grid.len()];
    let info = conjugate_gradient(grid, c.values(), b.values(), &mut x, tol)?;
    if info.residual > 10.0 * tol {
        return Err(Error::LinearSolverBreakdown(format!(
            "residual {:e} above tolerance {tol:e} after {} iterations",
            info.residual, info.iterations
        )));
    }
    Ok((Field2D::from_values(grid, x)?, info))
}

/// Discrete state equation residual `−Δ_h y + y³ − u`.
pub fn state_residual(y: &Field2D, u: &Field2D) -> Field2D {
    let mut out = neg_laplacian(y);
    for ((o, &yi), &ui) in out.values_mut().iter_mut().zip(y.values()).zip(u.values()) {
        *o += yi * yi * yi - ui;
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateSolve {
    pub state: Field2D,
    /// Discrete L² residual after each Newton step, starting from `y = 0`.
    pub residual_history: Vec<f64>,
}

impl StateSolve {
    pub fn residual(&self) -> f64 {
        *self.residual_history.last().expect("history is nonempty")
    }
}

/// Damped Newton for `−Δ_h y + y³ = u` started at `y = 0`.
pub fn solve_state_detailed(u: &Field2D) -> Result<StateSolve> {
    let grid = u.grid();
    let mut y = Field2D::zeros(grid);
    let mut f = state_residual(&y, u);
    let mut res = f.l2_norm();
    let mut history = vec![res];
    let mut iterations = 0;
    while res > NEWTON_TOLERANCE {
        if iterations == NEWTON_MAX_ITERS {
            return Err(Error::NewtonDivergence {
                iterations,
                last: res,
                history,
            });
        }
        iterations += 1;
        let jac = y.map(|v| 3.0 * v * v);
        let rhs = f.scaled(-1.0);
        let mut delta = vec![0.0; grid.len()];
        let tol = (1e-4 * res).max(1e-2 * NEWTON_TOLERANCE);
        conjugate_gradient(grid, jac.values(), rhs.values(), &mut delta, tol)?;
        let delta = Field2D::from_values(grid, delta)?;

        let mut t = 1.0;
        let mut halvings = 0;
        let (mut y_new, mut f_new, mut res_new);
        loop {
            y_new = y.add(&delta.scaled(t));
            f_new = state_residual(&y_new, u);
            res_new = f_new.l2_norm();
            if res_new < res || halvings == MAX_HALVINGS {
                break;
            }
            t *= 0.5;
            halvings += 1;
        }
        if res_new.is_nan() || res_new >= res {
            history.push(res_new);
            return Err(Error::NewtonDivergence {
                iterations,
                last: res_new,
                history,
            });
        }
        y = y_new;
        f = f_new;
        res = res_new;
        history.push(res);
    }
    Ok(StateSolve {
        state: y,
        residual_history: history,
    })
}

pub fn solve_state(u: &Field2D) -> Result<Field2D> {
    solve_state_detailed(u).map(|s| s.state)
}

/// Adjoint state: `(−Δ_h + 3 diag(y²)) p = y − y_d`.
pub fn solve_adjoint(y: &Field2D, y_d: &Field2D) -> Result<Field2D> {
    let c = y.map(|v| 3.0 * v * v);
    solve_shifted_laplacian(&c, &y.sub(y_d)).map(|(p, _)| p)
}

/// Linearized state: `(−Δ_h + 3 diag(y_base²)) z = v`.
pub fn solve_linearized(v: &Field2D, y_base: &Field2D) -> Result<Field2D> {
    let c = y_base.map(|w| 3.0 * w * w);
    solve_shifted_laplacian(&c, v).map(|(z, _)| z)
}
