//! Nodal fields on the interior of a uniform grid over the unit square.

use std::fmt::Write as _;
use std::ops::Deref;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `n × n` interior nodes of the unit square with mesh width `1/(n+1)`.
/// Boundary values are zero and not stored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Grid2D {
    n: usize,
}

impl Grid2D {
    pub const MIN_NODES: usize = 4;

    pub fn new(n: usize) -> Result<Self> {
        if n < Self::MIN_NODES {
            return Err(Error::InvalidArgument(format!(
                "grid needs at least {} interior nodes per axis, got {n}",
                Self::MIN_NODES
            )));
        }
        Ok(Grid2D { n })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> f64 {
        1.0 / (self.n + 1) as f64
    }

    pub fn len(&self) -> usize {
        self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Coordinates `(x1, x2)` of node `(i, j)`; `i` runs along a grid line.
    pub fn node(&self, i: usize, j: usize) -> (f64, f64) {
        let h = self.h();
        ((i + 1) as f64 * h, (j + 1) as f64 * h)
    }

    /// Samples `g` at every interior node.
    pub fn sample<F: Fn(f64, f64) -> f64>(&self, g: F) -> Field2D {
        let mut values = Vec::with_capacity(self.len());
        for j in 0..self.n {
            for i in 0..self.n {
                let (x1, x2) = self.node(i, j);
                values.push(g(x1, x2));
            }
        }
        Field2D {
            grid: *self,
            values,
        }
    }
}

/// Nodal values, stored row by row (`values[j * n + i]`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Field2D {
    grid: Grid2D,
    values: Vec<f64>,
}

impl Field2D {
    pub fn zeros(grid: Grid2D) -> Self {
        Field2D {
            grid,
            values: vec![0.0; grid.len()],
        }
    }

    pub fn constant(grid: Grid2D, c: f64) -> Self {
        Field2D {
            grid,
            values: vec![c; grid.len()],
        }
    }

    pub fn from_values(grid: Grid2D, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::DimensionMismatch {
                expected: grid.len(),
                actual: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(
                "field has non-finite entries".into(),
            ));
        }
        Ok(Field2D { grid, values })
    }

    pub fn grid(&self) -> Grid2D {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.grid.n() + i]
    }

    /// Discrete L² inner product `h² Σ a b`.
    pub fn inner(&self, other: &Field2D) -> f64 {
        let h = self.grid.h();
        h * h
            * self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a * b)
                .sum::<f64>()
    }

    /// Discrete L² norm `h · sqrt(Σ f²)`.
    pub fn l2_norm(&self) -> f64 {
        l2_norm(&self.values, self.grid.h())
    }

    pub fn map<F: Fn(f64) -> f64>(&self, g: F) -> Field2D {
        Field2D {
            grid: self.grid,
            values: self.values.iter().map(|&v| g(v)).collect(),
        }
    }

    pub fn zip_map<F: Fn(f64, f64) -> f64>(&self, other: &Field2D, g: F) -> Field2D {
        Field2D {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| g(a, b))
                .collect(),
        }
    }

    pub fn scaled(&self, a: f64) -> Field2D {
        self.map(|v| a * v)
    }

    pub fn add(&self, other: &Field2D) -> Field2D {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Field2D) -> Field2D {
        self.zip_map(other, |a, b| a - b)
    }

    /// One grid line per text line, values separated by single spaces.
    pub fn to_text(&self) -> String {
        let n = self.grid.n();
        let mut out = String::with_capacity(self.values.len() * 24);
        for row in self.values.chunks(n) {
            for (i, v) in row.iter().enumerate() {
                if i > 0 {
                    out.push(' ');
                }
                write!(out, "{v:e}").expect("write to String");
            }
            out.push('\n');
        }
        out
    }

    /// Parses the output of [`Field2D::to_text`]; blank lines and lines
    /// starting with `#` are skipped.
    pub fn from_text(text: &str) -> Result<Self> {
        let rows: Vec<Vec<f64>> = text
            .lines()
            .filter(|l| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
            .map(|l| {
                l.split_whitespace()
                    .map(|t| {
                        t.parse::<f64>().map_err(|e| {
                            Error::InvalidArgument(format!("bad field entry {t:?}: {e}"))
                        })
                    })
                    .collect()
            })
            .collect::<Result<_>>()?;
        let grid = Grid2D::new(rows.len())?;
        if rows.iter().any(|r| r.len() != rows.len()) {
            return Err(Error::InvalidArgument(
                "field text is not a square matrix".into(),
            ));
        }
        Field2D::from_values(grid, rows.into_iter().flatten().collect())
    }
}

pub(crate) fn l2_norm(values: &[f64], h: f64) -> f64 {
    h * values.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// A nodal control with its box bounds `alpha < beta`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlField2D {
    values: Field2D,
    alpha: f64,
    beta: f64,
}

impl ControlField2D {
    pub fn new(values: Field2D, alpha: f64, beta: f64) -> Result<Self> {
        check_bounds(alpha, beta)?;
        Ok(ControlField2D {
            values,
            alpha,
            beta,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn field(&self) -> &Field2D {
        &self.values
    }

    pub fn into_field(self) -> Field2D {
        self.values
    }

    pub fn is_feasible(&self) -> bool {
        self.values
            .values()
            .iter()
            .all(|&v| v >= self.alpha && v <= self.beta)
    }

    /// Pointwise projection onto `[alpha, beta]`.
    pub fn projected(&self) -> ControlField2D {
        let (a, b) = (self.alpha, self.beta);
        ControlField2D {
            values: self.values.map(|v| v.clamp(a, b)),
            alpha: a,
            beta: b,
        }
    }
}

impl Deref for ControlField2D {
    type Target = Field2D;

    fn deref(&self) -> &Field2D {
        &self.values
    }
}

pub(crate) fn check_bounds(alpha: f64, beta: f64) -> Result<()> {
    if !(alpha.is_finite() && beta.is_finite() && alpha < beta) {
        return Err(Error::InvalidArgument(format!(
            "control bounds [{alpha}, {beta}] need alpha < beta"
        )));
    }
    Ok(())
}
