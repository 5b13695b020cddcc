//! Numerical toolkit for polynomial growth at strict local minimizers.
//!
//! The crate estimates the growth, tilt sub-stability and Łojasiewicz-type
//! constants of an objective around a reference minimizer, runs the p-power
//! proximal point method with its rate audit, and solves a semilinear elliptic
//! tracking problem on which the same stability notions are probed.

pub mod diagnostics;
pub mod error;
pub mod minimize;
pub mod prox;
pub mod space;
pub mod tracking;

pub use error::{Error, Result};
pub use minimize::{argmin_ball, argmin_perturbed, argmin_tilted, SolverConfig, TiltedSolveResult};
pub use space::{
    duality_map, pairing, tilted_value, BallRegion, ExponentPair, ExtReal, FunctionOracle,
    KnownConstants, Point, TiltForm,
};
