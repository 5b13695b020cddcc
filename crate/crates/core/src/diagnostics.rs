//! Estimators for the growth, tilt sub-stability and Łojasiewicz-type
//! constants around a reference minimizer, the audit of the relations between
//! them, the nonlinear perturbation probes and the subdifferential-graph checks.
//!
//! Every estimate is one-sided. Sampling can only miss bad points, so
//! `gamma_hat` over-estimates the best growth constant while `kappa_hat` and
//! `mu_hat` under-estimate the smallest admissible tilt and Łojasiewicz
//! constants.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::minimize::{argmin_perturbed, argmin_tilted, ball_grid, SolverConfig};
use crate::space::{
    distance, dot, BallRegion, ExponentPair, ExtReal, FunctionOracle, Point, TiltForm,
};

/// Samples closer than this to the reference point are left out of ratios.
pub const EXCLUSION_RADIUS: f64 = 1e-9;

/// Default multiplicative slack for the constant-relation audit.
pub const DEFAULT_TAU: f64 = 1.10;

/// Absolute resolution slack for distance and gap comparisons against solver output.
pub const RESOLUTION_SLACK: f64 = 1e-8;

const DIRECTION_SEED: u64 = 0x5eed_d1e5;

/// Deterministic, roughly uniform unit directions in ℝ^dim.
///
/// In one dimension the two unit vectors alternate; in two dimensions the
/// angles are equally spaced; above that, normalized Gaussian draws from a
/// fixed-seed stream are used.
pub fn sphere_directions(dim: usize, count: usize) -> Vec<Vec<f64>> {
    match dim {
        1 => (0..count)
            .map(|k| vec![if k % 2 == 0 { 1.0 } else { -1.0 }])
            .collect(),
        2 => (0..count)
            .map(|k| {
                let theta = 2.0 * std::f64::consts::PI * k as f64 / count as f64;
                vec![theta.cos(), theta.sin()]
            })
            .collect(),
        _ => {
            let mut rng = ChaCha8Rng::seed_from_u64(DIRECTION_SEED);
            let mut out = Vec::with_capacity(count);
            while out.len() < count {
                let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
                let n = crate::space::norm(&v);
                if n > 1e-12 {
                    out.push(v.into_iter().map(|c| c / n).collect());
                }
            }
            out
        }
    }
}

/// Which tilts the tilt and Łojasiewicz estimators probe.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TiltSampling {
    pub norms: Vec<f64>,
    pub directions_per_norm: usize,
}

impl TiltSampling {
    /// `count` norms spaced geometrically between `lo` and `hi`.
    pub fn geometric(lo: f64, hi: f64, count: usize, directions_per_norm: usize) -> Self {
        let norms = if count <= 1 {
            vec![lo]
        } else {
            (0..count)
                .map(|i| lo * (hi / lo).powf(i as f64 / (count - 1) as f64))
                .collect()
        };
        TiltSampling {
            norms,
            directions_per_norm,
        }
    }

    pub fn tilts(&self, dim: usize) -> Result<Vec<TiltForm>> {
        if let Some(bad) = self.norms.iter().find(|n| !(n.is_finite() && **n > 0.0)) {
            return Err(Error::InvalidArgument(format!(
                "tilt norm {bad} must be finite and > 0"
            )));
        }
        if self.directions_per_norm == 0 {
            return Err(Error::InvalidArgument(
                "directions_per_norm must be >= 1".into(),
            ));
        }
        let dirs = sphere_directions(dim, self.directions_per_norm);
        Ok(self
            .norms
            .iter()
            .flat_map(|&r| {
                dirs.iter()
                    .map(move |d| TiltForm::from_vec_unchecked(d.iter().map(|c| c * r).collect()))
            })
            .collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthEstimate {
    pub gamma_hat: f64,
    pub witness: Point,
    pub samples_used: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TiltEstimate {
    pub kappa_hat: f64,
    pub worst_tilt: TiltForm,
    pub worst_minimizer: Point,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LojaEstimate {
    pub mu_hat: f64,
    pub worst_tilt: TiltForm,
    pub worst_minimizer: Point,
}

fn reference_value(f: &FunctionOracle, xbar: &Point, region: &BallRegion) -> Result<f64> {
    f.check_dim(xbar.dim())?;
    if xbar != region.center() {
        return Err(Error::InvalidArgument(
            "the reference point must be the center of the region".into(),
        ));
    }
    f.evaluate(xbar)
        .finite()
        .ok_or_else(|| Error::InvalidArgument("f(xbar) must be finite".into()))
}

/// Infimum of `(f(x) − f(x̄)) / ‖x − x̄‖^p` over the grid samples of `region`.
///
/// Restrict the estimate to a subset by adding that subset's indicator to `f`.
pub fn estimate_growth(
    f: &FunctionOracle,
    xbar: &Point,
    region: &BallRegion,
    pq: &ExponentPair,
    cfg: &SolverConfig,
) -> Result<GrowthEstimate> {
    cfg.validate()?;
    let fbar = reference_value(f, xbar, region)?;
    let gap_tol = cfg.minimizer_value_tolerance * (1.0 + fbar.abs());
    let samples = ball_grid(region, cfg.grid_points_per_axis)?;
    let values: Vec<ExtReal> = samples.par_iter().map(|x| f.evaluate(x)).collect();

    let mut best: Option<(f64, usize)> = None;
    let mut used = 0;
    for (i, (x, v)) in samples.iter().zip(&values).enumerate() {
        if v.is_invalid() {
            return Err(Error::NonFiniteValue { point: x.to_vec() });
        }
        let Some(fx) = v.finite() else { continue };
        let r = x.distance(xbar);
        if r <= EXCLUSION_RADIUS {
            continue;
        }
        let gap = fx - fbar;
        if gap < -gap_tol {
            return Err(Error::NegativeGap {
                point: x.clone(),
                gap,
            });
        }
        used += 1;
        let ratio = gap.max(0.0) / r.powf(pq.p());
        if best.is_none_or(|(b, _)| ratio < b) {
            best = Some((ratio, i));
        }
    }
    let (gamma_hat, idx) = best.ok_or(Error::NoFiniteSamples)?;
    Ok(GrowthEstimate {
        gamma_hat,
        witness: samples[idx].clone(),
        samples_used: used,
    })
}

/// Minimizers of one tilted problem together with their untilted values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TiltProbe {
    pub tilt: TiltForm,
    pub minimizers: Vec<Point>,
    pub values: Vec<f64>,
}

impl TiltProbe {
    /// Largest violation of `f(x_ξ) − f(x̄) ≤ ⟨ξ, x_ξ − x̄⟩` over the minimizers.
    pub fn first_order_excess(&self, xbar: &Point, fbar: f64) -> f64 {
        self.minimizers
            .iter()
            .zip(&self.values)
            .map(|(x, fx)| {
                let shifted: Vec<f64> = x.iter().zip(xbar.iter()).map(|(a, b)| a - b).collect();
                (fx - fbar) - dot(&self.tilt, &shifted)
            })
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Solves every tilted problem; results come back in the order of `tilts`.
pub fn probe_tilts(
    f: &FunctionOracle,
    region: &BallRegion,
    tilts: &[TiltForm],
    cfg: &SolverConfig,
) -> Result<Vec<TiltProbe>> {
    tilts
        .par_iter()
        .map(|xi| {
            let res = argmin_tilted(f, xi, region, cfg)?;
            let values = res
                .minimizers
                .iter()
                .map(|m| f.evaluate(m).finite().ok_or(Error::AllInfinite))
                .collect::<Result<Vec<_>>>()?;
            Ok(TiltProbe {
                tilt: xi.clone(),
                minimizers: res.minimizers,
                values,
            })
        })
        .collect()
}

fn worst_over_probes<F>(probes: &[TiltProbe], ratio: F) -> Result<(f64, TiltForm, Point)>
where
    F: Fn(&Point, f64, f64) -> f64,
{
    let mut worst: Option<(f64, TiltForm, Point)> = None;
    for probe in probes {
        let tn = probe.tilt.norm();
        if tn == 0.0 {
            continue;
        }
        for (x, fx) in probe.minimizers.iter().zip(&probe.values) {
            let r = ratio(x, *fx, tn);
            if worst.as_ref().is_none_or(|w| r > w.0) {
                worst = Some((r, probe.tilt.clone(), x.clone()));
            }
        }
    }
    worst.ok_or_else(|| Error::InvalidArgument("no nonzero tilt was sampled".into()))
}

/// `max ‖x_ξ − x̄‖ / ‖ξ‖^{q/p}` over the probes and all their minimizers.
pub fn tilt_estimate_from(
    probes: &[TiltProbe],
    xbar: &Point,
    pq: &ExponentPair,
) -> Result<TiltEstimate> {
    let (kappa_hat, worst_tilt, worst_minimizer) =
        worst_over_probes(probes, |x, _, tn| x.distance(xbar) / tn.powf(pq.ratio()))?;
    Ok(TiltEstimate {
        kappa_hat,
        worst_tilt,
        worst_minimizer,
    })
}

/// `max (f(x_ξ) − f(x̄)) / ‖ξ‖^q` over the probes and all their minimizers.
pub fn loja_estimate_from(
    probes: &[TiltProbe],
    fbar: f64,
    pq: &ExponentPair,
) -> Result<LojaEstimate> {
    let (mu_hat, worst_tilt, worst_minimizer) =
        worst_over_probes(probes, |_, fx, tn| (fx - fbar).max(0.0) / tn.powf(pq.q()))?;
    Ok(LojaEstimate {
        mu_hat,
        worst_tilt,
        worst_minimizer,
    })
}

pub fn estimate_tilt_constant(
    f: &FunctionOracle,
    xbar: &Point,
    region: &BallRegion,
    pq: &ExponentPair,
    sampling: &TiltSampling,
    cfg: &SolverConfig,
) -> Result<TiltEstimate> {
    reference_value(f, xbar, region)?;
    let probes = probe_tilts(f, region, &sampling.tilts(region.dim())?, cfg)?;
    tilt_estimate_from(&probes, xbar, pq)
}

pub fn estimate_loja_constant(
    f: &FunctionOracle,
    xbar: &Point,
    region: &BallRegion,
    pq: &ExponentPair,
    sampling: &TiltSampling,
    cfg: &SolverConfig,
) -> Result<LojaEstimate> {
    let fbar = reference_value(f, xbar, region)?;
    let probes = probe_tilts(f, region, &sampling.tilts(region.dim())?, cfg)?;
    loja_estimate_from(&probes, fbar, pq)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RelationStatus {
    Pass,
    Fail,
    /// An estimate vanished and the relation is undefined.
    Degenerate,
}

/// One audited inequality `lhs ≤ rhs` (or `lhs ≥ rhs` for the growth relation).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelationCheck {
    pub relation: String,
    pub status: RelationStatus,
    pub lhs: f64,
    pub rhs: f64,
    /// Signed margin, positive when the relation holds.
    pub slack: f64,
    /// Measured ratio of the two sides without the slack factor.
    pub ratio: f64,
}

impl RelationCheck {
    pub fn holds(&self) -> bool {
        self.status == RelationStatus::Pass
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceAudit {
    pub tau: f64,
    pub kappa_vs_gamma: RelationCheck,
    pub mu_vs_kappa: RelationCheck,
    pub gamma_vs_mu: RelationCheck,
}

impl EquivalenceAudit {
    pub fn relations(&self) -> [&RelationCheck; 3] {
        [&self.kappa_vs_gamma, &self.mu_vs_kappa, &self.gamma_vs_mu]
    }

    /// No relation failed. Degenerate relations do not count as failures.
    pub fn passed(&self) -> bool {
        self.relations()
            .iter()
            .all(|r| r.status != RelationStatus::Fail)
    }

    pub fn degenerate(&self) -> bool {
        self.relations()
            .iter()
            .any(|r| r.status == RelationStatus::Degenerate)
    }

    /// The growth relation is tight within `tau` in both directions.
    pub fn growth_relation_tight(&self) -> bool {
        let r = self.gamma_vs_mu.ratio;
        self.gamma_vs_mu.status == RelationStatus::Pass && r <= self.tau && r >= 1.0 / self.tau
    }
}

fn relation(name: &str, lhs: f64, rhs: f64, upper: bool, degenerate: bool) -> RelationCheck {
    let (status, slack, ratio) = if degenerate {
        (RelationStatus::Degenerate, f64::NAN, f64::NAN)
    } else {
        let slack = if upper { rhs - lhs } else { lhs - rhs };
        let status = if slack >= 0.0 {
            RelationStatus::Pass
        } else {
            RelationStatus::Fail
        };
        (status, slack, lhs / rhs)
    };
    RelationCheck {
        relation: name.to_string(),
        status,
        lhs,
        rhs,
        slack,
        ratio,
    }
}

/// Checks, with slack factor `tau`:
/// (a) `κ̂ ≤ τ·γ̂^{−q/p}`, (b) `μ̂ ≤ τ·κ̂`, (c) `γ̂ ≥ p^{−q}·μ̂^{−1}/τ`.
///
/// When `γ̂ = 0` the reference point has no growth on the region and every
/// relation is reported degenerate; `μ̂ = 0` makes (c) degenerate.
pub fn check_equivalence(
    growth: &GrowthEstimate,
    tilt: &TiltEstimate,
    loja: &LojaEstimate,
    pq: &ExponentPair,
    tau: f64,
) -> EquivalenceAudit {
    let (gamma, kappa, mu) = (growth.gamma_hat, tilt.kappa_hat, loja.mu_hat);
    let (p, q) = (pq.p(), pq.q());
    let no_growth = gamma <= 0.0;
    let rhs_a = if no_growth {
        f64::INFINITY
    } else {
        gamma.powf(-pq.ratio())
    };
    let rhs_c = if mu <= 0.0 {
        f64::INFINITY
    } else {
        p.powf(-q) / mu
    };
    let mut a = relation(
        "kappa <= tau * gamma^(-q/p)",
        kappa,
        tau * rhs_a,
        true,
        no_growth,
    );
    let mut b = relation("mu <= tau * kappa", mu, tau * kappa, true, no_growth);
    let mut c = relation(
        "gamma >= p^(-q) / (mu * tau)",
        gamma,
        rhs_c / tau,
        false,
        no_growth || mu <= 0.0,
    );
    if !no_growth {
        a.ratio = kappa / rhs_a;
        b.ratio = mu / kappa;
    }
    if c.status != RelationStatus::Degenerate {
        c.ratio = gamma / rhs_c;
    }
    EquivalenceAudit {
        tau,
        kappa_vs_gamma: a,
        mu_vs_kappa: b,
        gamma_vs_mu: c,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    pub descriptor: String,
    pub growth: GrowthEstimate,
    pub tilt: TiltEstimate,
    pub loja: LojaEstimate,
    pub audit: EquivalenceAudit,
    pub exponents: ExponentPair,
    pub region: BallRegion,
    /// Largest `f(x_ξ) − f(x̄) − ⟨ξ, x_ξ − x̄⟩` seen; non-positive up to solver tolerance.
    pub first_order_excess: f64,
    pub tilts_probed: usize,
}

/// Runs all three estimators on one shared set of tilted solves and audits them.
pub fn diagnose(
    f: &FunctionOracle,
    xbar: &Point,
    region: &BallRegion,
    pq: &ExponentPair,
    sampling: &TiltSampling,
    cfg: &SolverConfig,
    tau: f64,
) -> Result<DiagnosticsReport> {
    let fbar = reference_value(f, xbar, region)?;
    let growth = estimate_growth(f, xbar, region, pq, cfg)?;
    let probes = probe_tilts(f, region, &sampling.tilts(region.dim())?, cfg)?;
    let tilt = tilt_estimate_from(&probes, xbar, pq)?;
    let loja = loja_estimate_from(&probes, fbar, pq)?;
    let audit = check_equivalence(&growth, &tilt, &loja, pq, tau);
    let first_order_excess = probes
        .iter()
        .map(|p| p.first_order_excess(xbar, fbar))
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(DiagnosticsReport {
        descriptor: f.descriptor().to_string(),
        growth,
        tilt,
        loja,
        audit,
        exponents: *pq,
        region: region.clone(),
        first_order_excess,
        tilts_probed: probes.len(),
    })
}

/// Shells used to approximate the metric slope.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeProbe {
    /// Decreasing probe radii; the last one is the reported estimate.
    pub radii: Vec<f64>,
    pub directions: usize,
}

impl Default for SlopeProbe {
    fn default() -> Self {
        SlopeProbe {
            radii: vec![1e-2, 1e-4, 1e-6],
            directions: 16,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSlope {
    pub slope: ExtReal,
    pub per_radius: Vec<f64>,
}

/// Local metric slope `limsup_{y→x} max{0, φ(x) − φ(y)} / ‖x − y‖`,
/// approximated on shrinking spheres around `x`.
pub fn metric_slope(phi: &FunctionOracle, x: &Point, probe: &SlopeProbe) -> Result<MetricSlope> {
    phi.check_dim(x.dim())?;
    if probe.radii.is_empty() || probe.radii.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
        return Err(Error::InvalidArgument(
            "probe radii must be a nonempty list of positive reals".into(),
        ));
    }
    if probe.radii.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidArgument(
            "probe radii must be strictly decreasing".into(),
        ));
    }
    let Some(fx) = phi.evaluate(x).finite() else {
        return Ok(MetricSlope {
            slope: ExtReal::PosInf,
            per_radius: Vec::new(),
        });
    };
    let dirs = sphere_directions(x.dim(), probe.directions.max(1));
    let per_radius: Vec<f64> = probe
        .radii
        .iter()
        .map(|&r| {
            dirs.iter()
                .map(|d| {
                    let y: Vec<f64> = x.iter().zip(d).map(|(a, b)| a + r * b).collect();
                    match phi.evaluate(&y) {
                        ExtReal::Finite(fy) => (fx - fy).max(0.0) / distance(x, &y),
                        ExtReal::PosInf => 0.0,
                    }
                })
                .fold(0.0, f64::max)
        })
        .collect();
    let slope = ExtReal::Finite(*per_radius.last().expect("radii nonempty"));
    Ok(MetricSlope { slope, per_radius })
}

/// Outcome of a nonlinear perturbation probe.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeOutcome {
    pub passed: bool,
    /// `κ · (Lip ζ or |∇φ|(x̄))^λ`.
    pub bound: f64,
    pub worst_distance: f64,
    pub witness: Point,
    pub minimizers: Vec<Point>,
}

fn perturbation_outcome(
    f: &FunctionOracle,
    g: &FunctionOracle,
    xbar: &Point,
    region: &BallRegion,
    bound: f64,
    cfg: &SolverConfig,
) -> Result<ProbeOutcome> {
    reference_value(f, xbar, region)?;
    let res = argmin_perturbed(f, g, region, cfg)?;
    let slack = RESOLUTION_SLACK * region.radius().max(1.0);
    let (worst_distance, witness) = res.minimizers.iter().map(|m| (m.distance(xbar), m)).fold(
        (f64::NEG_INFINITY, &res.minimizers[0]),
        |acc, cur| if cur.0 > acc.0 { cur } else { acc },
    );
    Ok(ProbeOutcome {
        passed: worst_distance <= bound + slack,
        bound,
        worst_distance,
        witness: witness.clone(),
        minimizers: res.minimizers,
    })
}

fn check_stability_params(lambda: f64, kappa: f64) -> Result<()> {
    if !(lambda.is_finite() && lambda > 0.0 && kappa.is_finite() && kappa > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "lambda = {lambda} and kappa = {kappa} must be positive"
        )));
    }
    Ok(())
}

/// Checks `‖x − x̄‖ ≤ κ (Lip ζ)^λ` for every minimizer of `f + ζ` on the region.
/// `lipschitz` is the analytic Lipschitz constant of `zeta`.
#[allow(clippy::too_many_arguments)]
pub fn lipschitz_probe(
    f: &FunctionOracle,
    xbar: &Point,
    region: &BallRegion,
    zeta: &FunctionOracle,
    lipschitz: f64,
    lambda: f64,
    kappa: f64,
    cfg: &SolverConfig,
) -> Result<ProbeOutcome> {
    check_stability_params(lambda, kappa)?;
    if !(lipschitz.is_finite() && lipschitz >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "Lipschitz constant {lipschitz} must be finite"
        )));
    }
    perturbation_outcome(f, zeta, xbar, region, kappa * lipschitz.powf(lambda), cfg)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvexProbeOutcome {
    pub slope: MetricSlope,
    pub outcome: ProbeOutcome,
}

/// Checks `‖x − x̄‖ ≤ κ |∇φ|(x̄)^λ` for every minimizer of `f + φ` on the region.
/// Convexity of `phi` is the caller's declaration and is not verified.
#[allow(clippy::too_many_arguments)]
pub fn convex_probe(
    f: &FunctionOracle,
    xbar: &Point,
    region: &BallRegion,
    phi: &FunctionOracle,
    lambda: f64,
    kappa: f64,
    slope_probe: &SlopeProbe,
    cfg: &SolverConfig,
) -> Result<ConvexProbeOutcome> {
    check_stability_params(lambda, kappa)?;
    let slope = metric_slope(phi, xbar, slope_probe)?;
    let s = slope.slope.finite().ok_or(Error::SlopeInfinite)?;
    let outcome = perturbation_outcome(f, phi, xbar, region, kappa * s.powf(lambda), cfg)?;
    Ok(ConvexProbeOutcome { slope, outcome })
}

/// A sampled element `(x, ξ)` of the graph of the subdifferential: `x` globally
/// minimizes `f − ξ` on the domain region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubgradientPair {
    pub point: Point,
    pub tilt: TiltForm,
}

pub fn sample_subdifferential_graph(
    f: &FunctionOracle,
    domain_region: &BallRegion,
    tilt_grid: &[TiltForm],
    cfg: &SolverConfig,
) -> Result<Vec<SubgradientPair>> {
    let probes = probe_tilts(f, domain_region, tilt_grid, cfg)?;
    Ok(probes
        .into_iter()
        .flat_map(|probe| {
            let tilt = probe.tilt;
            probe
                .minimizers
                .into_iter()
                .map(move |point| SubgradientPair {
                    point,
                    tilt: tilt.clone(),
                })
        })
        .collect())
}

/// Evenly spaced scalar tilts on `[lo, hi]`.
pub fn scalar_tilt_grid(lo: f64, hi: f64, count: usize) -> Vec<TiltForm> {
    if count == 1 {
        return vec![TiltForm::scalar(lo)];
    }
    (0..count)
        .map(|i| TiltForm::scalar(lo + (hi - lo) * i as f64 / (count - 1) as f64))
        .collect()
}

/// Result of a check over sampled subdifferential graph points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphCheck {
    pub passed: bool,
    /// No sampled point other than x̄: the pass carries no evidence.
    pub vacuous: bool,
    pub points_checked: usize,
    /// Largest ratio of the left side to `d(0, ∂f(x))^exponent`.
    pub worst_ratio: f64,
    pub witness: Option<Point>,
    /// The approximation of `d(0, ∂f(x))` at the witness.
    pub witness_subgradient_norm: Option<f64>,
}

/// Groups pairs by point and approximates `d(0, ∂f(x))` by the smallest
/// paired tilt norm.
fn subgradient_distances(pairs: &[SubgradientPair], xbar: &Point) -> Vec<(Point, f64)> {
    let mut groups: Vec<(Point, f64)> = Vec::new();
    for pair in pairs {
        if pair.point.distance(xbar) <= EXCLUSION_RADIUS {
            continue;
        }
        let tn = pair.tilt.norm();
        match groups
            .iter_mut()
            .find(|(x, _)| x.distance(&pair.point) <= EXCLUSION_RADIUS)
        {
            Some(g) => g.1 = g.1.min(tn),
            None => groups.push((pair.point.clone(), tn)),
        }
    }
    groups
}

fn graph_check<F>(
    pairs: &[SubgradientPair],
    xbar: &Point,
    exponent: f64,
    constant: f64,
    lhs: F,
) -> GraphCheck
where
    F: Fn(&Point) -> f64,
{
    let groups = subgradient_distances(pairs, xbar);
    let mut check = GraphCheck {
        passed: true,
        vacuous: groups.is_empty(),
        points_checked: groups.len(),
        worst_ratio: 0.0,
        witness: None,
        witness_subgradient_norm: None,
    };
    for (x, d) in &groups {
        let left = lhs(x);
        let scale = d.powf(exponent);
        let ratio = if scale > 0.0 {
            left / scale
        } else if left > 0.0 {
            f64::INFINITY
        } else {
            0.0
        };
        if left.is_nan() || left > constant * scale + RESOLUTION_SLACK {
            check.passed = false;
        }
        if check.witness.is_none() || ratio > check.worst_ratio {
            check.worst_ratio = ratio;
            check.witness = Some(x.clone());
            check.witness_subgradient_norm = Some(*d);
        }
    }
    check
}

/// `‖x − x̄‖ ≤ κ d(0, ∂f(x))^{q/p}` at every sampled graph point.
pub fn check_subregularity(
    pairs: &[SubgradientPair],
    xbar: &Point,
    pq: &ExponentPair,
    kappa: f64,
) -> GraphCheck {
    graph_check(pairs, xbar, pq.ratio(), kappa, |x| x.distance(xbar))
}

/// `f(x) − f(x̄) ≤ μ d(0, ∂f(x))^q` at every sampled graph point.
pub fn check_global_loja(
    pairs: &[SubgradientPair],
    f: &FunctionOracle,
    xbar: &Point,
    pq: &ExponentPair,
    mu: f64,
) -> GraphCheck {
    let fbar = f.evaluate(xbar).finite().unwrap_or(f64::NAN);
    graph_check(pairs, xbar, pq.q(), mu, |x| match f.evaluate(x) {
        ExtReal::Finite(fx) => fx - fbar,
        ExtReal::PosInf => f64::INFINITY,
    })
}
