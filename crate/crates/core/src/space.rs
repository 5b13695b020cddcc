//! Domain types for the Euclidean setting: points, tilt forms, conjugate
//! exponents, closed balls and extended-real-valued objective oracles.

use std::fmt;
use std::ops::{Add, Deref};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A value in ℝ ∪ {+∞}.
///
/// Indicator functions return [`ExtReal::PosInf`] outside their set; the
/// variant order makes every finite value compare below `PosInf`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub enum ExtReal {
    Finite(f64),
    PosInf,
}

impl ExtReal {
    pub const ZERO: ExtReal = ExtReal::Finite(0.0);

    pub fn is_finite(self) -> bool {
        matches!(self, ExtReal::Finite(_))
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            ExtReal::Finite(v) => Some(v),
            ExtReal::PosInf => None,
        }
    }

    /// True for `Finite(NaN)` and `Finite(-inf)`, which no oracle may return.
    pub fn is_invalid(self) -> bool {
        match self {
            ExtReal::Finite(v) => v.is_nan() || v == f64::NEG_INFINITY,
            ExtReal::PosInf => false,
        }
    }

    /// Shift by a finite real; `+∞` absorbs.
    pub fn shift(self, by: f64) -> ExtReal {
        match self {
            ExtReal::Finite(v) => ExtReal::Finite(v + by),
            ExtReal::PosInf => ExtReal::PosInf,
        }
    }
}

impl From<f64> for ExtReal {
    fn from(v: f64) -> Self {
        if v == f64::INFINITY {
            ExtReal::PosInf
        } else {
            ExtReal::Finite(v)
        }
    }
}

impl Add for ExtReal {
    type Output = ExtReal;

    fn add(self, rhs: ExtReal) -> ExtReal {
        match (self, rhs) {
            (ExtReal::Finite(a), ExtReal::Finite(b)) => ExtReal::Finite(a + b),
            _ => ExtReal::PosInf,
        }
    }
}

impl fmt::Display for ExtReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtReal::Finite(v) => write!(f, "{v}"),
            ExtReal::PosInf => write!(f, "+inf"),
        }
    }
}

fn check_finite(coords: &[f64], what: &str) -> Result<()> {
    if coords.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "{what} must have dimension >= 1"
        )));
    }
    if let Some(bad) = coords.iter().find(|c| !c.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "{what} has non-finite entry {bad}"
        )));
    }
    Ok(())
}

/// A point of ℝ^d with finite coordinates.
#[derive(Debug, Clone, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Point(Vec<f64>);

impl Point {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        check_finite(&coords, "point")?;
        Ok(Point(coords))
    }

    pub fn zeros(dim: usize) -> Self {
        Point(vec![0.0; dim.max(1)])
    }

    pub fn scalar(v: f64) -> Self {
        Point(vec![v])
    }

    pub(crate) fn from_vec_unchecked(coords: Vec<f64>) -> Self {
        Point(coords)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn norm(&self) -> f64 {
        norm(&self.0)
    }

    pub fn distance(&self, other: &Point) -> f64 {
        distance(&self.0, &other.0)
    }
}

impl Deref for Point {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// An element of the dual space; the pairing with a [`Point`] is the dot product.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TiltForm(Vec<f64>);

impl TiltForm {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        check_finite(&coords, "tilt form")?;
        Ok(TiltForm(coords))
    }

    pub fn zeros(dim: usize) -> Self {
        TiltForm(vec![0.0; dim.max(1)])
    }

    pub fn scalar(v: f64) -> Self {
        TiltForm(vec![v])
    }

    pub(crate) fn from_vec_unchecked(coords: Vec<f64>) -> Self {
        TiltForm(coords)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        norm(&self.0)
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&c| c == 0.0)
    }

    pub fn negated(&self) -> TiltForm {
        TiltForm(self.0.iter().map(|c| -c).collect())
    }
}

impl Deref for TiltForm {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// Conjugate exponents `p, q > 1` with `1/p + 1/q = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExponentPair {
    p: f64,
    q: f64,
}

impl ExponentPair {
    pub const CONJUGACY_TOL: f64 = 1e-12;

    /// Builds the pair from `p`, with `q = p / (p - 1)`.
    pub fn from_p(p: f64) -> Result<Self> {
        if !(p.is_finite() && p > 1.0) {
            return Err(Error::InvalidArgument(format!(
                "exponent p = {p} must be finite and > 1"
            )));
        }
        Self::new(p, p / (p - 1.0))
    }

    pub fn new(p: f64, q: f64) -> Result<Self> {
        if !(p.is_finite() && q.is_finite() && p > 1.0 && q > 1.0) {
            return Err(Error::InvalidArgument(format!(
                "exponents ({p}, {q}) must be finite and > 1"
            )));
        }
        if (1.0 / p + 1.0 / q - 1.0).abs() > Self::CONJUGACY_TOL {
            return Err(Error::InvalidArgument(format!(
                "exponents ({p}, {q}) are not conjugate"
            )));
        }
        Ok(ExponentPair { p, q })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    /// `q/p`, which equals `1/(p-1)`.
    pub fn ratio(&self) -> f64 {
        self.q / self.p
    }
}

/// Slack applied to closed-ball membership tests.
pub const BALL_SLACK: f64 = 1e-12;

/// Closed ball `B(center, radius)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BallRegion {
    center: Point,
    radius: f64,
}

impl BallRegion {
    pub fn new(center: Point, radius: f64) -> Result<Self> {
        if !(radius.is_finite() && radius > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "ball radius {radius} must be finite and > 0"
            )));
        }
        Ok(BallRegion { center, radius })
    }

    pub fn center(&self) -> &Point {
        &self.center
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn dim(&self) -> usize {
        self.center.dim()
    }

    fn slack(&self) -> f64 {
        BALL_SLACK * self.radius.max(1.0)
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        distance(x, &self.center) <= self.radius + self.slack()
    }

    /// Radial projection onto the ball.
    pub fn project(&self, x: &mut [f64]) {
        let d = distance(x, &self.center);
        if d > self.radius {
            let scale = self.radius / d;
            for (xi, ci) in x.iter_mut().zip(self.center.iter()) {
                *xi = ci + (*xi - ci) * scale;
            }
        }
    }
}

/// Analytic constants attached to catalog oracles. Only test harnesses read these.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct KnownConstants {
    pub gamma: Option<f64>,
    pub kappa: Option<f64>,
    pub mu: Option<f64>,
}

type EvalFn = dyn Fn(&[f64]) -> ExtReal + Send + Sync;

/// A deterministic extended-real-valued objective on ℝ^d.
#[derive(Clone)]
pub struct FunctionOracle {
    eval: Arc<EvalFn>,
    dim: usize,
    descriptor: String,
    known_minimizer: Option<Point>,
    known_constants: Option<KnownConstants>,
}

impl fmt::Debug for FunctionOracle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FunctionOracle")
            .field("descriptor", &self.descriptor)
            .field("dim", &self.dim)
            .field("known_minimizer", &self.known_minimizer)
            .field("known_constants", &self.known_constants)
            .finish()
    }
}

impl FunctionOracle {
    pub fn new<F>(dim: usize, descriptor: impl Into<String>, eval: F) -> Self
    where
        F: Fn(&[f64]) -> ExtReal + Send + Sync + 'static,
    {
        FunctionOracle {
            eval: Arc::new(eval),
            dim: dim.max(1),
            descriptor: descriptor.into(),
            known_minimizer: None,
            known_constants: None,
        }
    }

    /// Convenience constructor for objectives that are finite everywhere.
    pub fn finite<F>(dim: usize, descriptor: impl Into<String>, eval: F) -> Self
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        Self::new(dim, descriptor, move |x| ExtReal::from(eval(x)))
    }

    /// Attaches a known minimizer. Fails if the oracle is not finite there.
    pub fn with_minimizer(mut self, xbar: Point) -> Result<Self> {
        self.check_dim(xbar.dim())?;
        if !self.evaluate(&xbar).is_finite() {
            return Err(Error::InvalidArgument(format!(
                "{}: known minimizer {:?} is outside the domain",
                self.descriptor,
                xbar.coords()
            )));
        }
        self.known_minimizer = Some(xbar);
        Ok(self)
    }

    pub fn with_constants(mut self, constants: KnownConstants) -> Self {
        self.known_constants = Some(constants);
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn descriptor(&self) -> &str {
        &self.descriptor
    }

    pub fn known_minimizer(&self) -> Option<&Point> {
        self.known_minimizer.as_ref()
    }

    pub fn known_constants(&self) -> Option<&KnownConstants> {
        self.known_constants.as_ref()
    }

    pub fn evaluate(&self, x: &[f64]) -> ExtReal {
        (self.eval)(x)
    }

    pub(crate) fn check_dim(&self, dim: usize) -> Result<()> {
        if dim != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: dim,
            });
        }
        Ok(())
    }

    /// `y ↦ f(y) − ⟨ξ, y⟩`.
    pub fn tilted(&self, xi: &TiltForm) -> Result<FunctionOracle> {
        self.check_dim(xi.dim())?;
        let inner = Arc::clone(&self.eval);
        let tilt = xi.clone();
        Ok(FunctionOracle {
            eval: Arc::new(move |y: &[f64]| inner(y).shift(-dot(&tilt, y))),
            dim: self.dim,
            descriptor: format!("{} - <xi, .>", self.descriptor),
            known_minimizer: None,
            known_constants: None,
        })
    }

    /// `y ↦ f(y) + g(y)` with `+∞` absorbing.
    pub fn plus(&self, g: &FunctionOracle) -> Result<FunctionOracle> {
        self.check_dim(g.dim)?;
        let a = Arc::clone(&self.eval);
        let b = Arc::clone(&g.eval);
        Ok(FunctionOracle {
            eval: Arc::new(move |y: &[f64]| {
                let fa = a(y);
                if fa == ExtReal::PosInf {
                    return ExtReal::PosInf;
                }
                fa + b(y)
            }),
            dim: self.dim,
            descriptor: format!("{} + {}", self.descriptor, g.descriptor),
            known_minimizer: None,
            known_constants: None,
        })
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Dual pairing `⟨ξ, x⟩`.
pub fn pairing(xi: &TiltForm, x: &Point) -> Result<f64> {
    if xi.dim() != x.dim() {
        return Err(Error::DimensionMismatch {
            expected: xi.dim(),
            actual: x.dim(),
        });
    }
    Ok(dot(xi, x))
}

/// `f(x) − ⟨ξ, x⟩`.
pub fn tilted_value(f: &FunctionOracle, xi: &TiltForm, x: &Point) -> Result<ExtReal> {
    f.check_dim(x.dim())?;
    let shift = pairing(xi, x)?;
    Ok(f.evaluate(x).shift(-shift))
}

/// The Euclidean duality mapping `J_p(x) = ‖x‖^{p−2} x`, with `J_p(0) = 0`.
pub fn duality_map(x: &Point, p: f64) -> Result<TiltForm> {
    if !(p.is_finite() && p >= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "duality exponent p = {p} must be >= 1"
        )));
    }
    let r = x.norm();
    if r == 0.0 {
        return Ok(TiltForm::zeros(x.dim()));
    }
    let scale = r.powf(p - 2.0);
    Ok(TiltForm(x.iter().map(|c| c * scale).collect()))
}
