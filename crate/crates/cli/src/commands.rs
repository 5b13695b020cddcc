//! Subcommand drivers. Each returns its report files in memory together with
//! the pass/fail verdict; errors map to exit code 1 and write nothing.

use anyhow::{bail, Result};
use growthlab_core::diagnostics::{
    self, DiagnosticsReport, GrowthEstimate, RelationCheck, TiltSampling,
};
use growthlab_core::prox::{self, ProxConfig, RateAudit};
use growthlab_core::tracking::{
    self, Field2D, OptConfig, SscEstimate, SweepReport, TrackingProblem, TrackingResult,
    NEWTON_TOLERANCE,
};
use growthlab_core::{BallRegion, ExponentPair, ExtReal, KnownConstants, Point, SolverConfig};
use serde::Serialize;

use crate::catalog::CatalogFunction;
use crate::config::{DiagnoseSettings, ProxSettings, TrackingSettings};
use crate::output::{comment_header, csv_document, json_document, num, opt_num, OutputFile};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_CHECK_FAILED: i32 = 2;

/// Largest tolerated `∫ p (u − ū)` deficit at a computed first-order point.
pub const FIRST_ORDER_GAP_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct CommandOutput {
    pub passed: bool,
    pub warnings: Vec<String>,
    pub summary: String,
    pub files: Vec<OutputFile>,
}

impl CommandOutput {
    pub fn exit_code(&self) -> i32 {
        if self.passed {
            EXIT_PASS
        } else {
            EXIT_CHECK_FAILED
        }
    }

    pub fn file(&self, name: &str) -> Option<&str> {
        self.files
            .iter()
            .find(|f| f.name == name)
            .map(|f| f.contents.as_str())
    }
}

fn solver(grid: usize, multistart: usize) -> Result<SolverConfig> {
    let cfg = SolverConfig {
        multistart_count: multistart,
        ..SolverConfig::default().with_grid(grid)
    };
    cfg.validate()?;
    Ok(cfg)
}

#[derive(Serialize)]
struct DiagnoseDocument<'a> {
    command: &'static str,
    config: &'a DiagnoseSettings,
    known_constants: Option<&'a KnownConstants>,
    report: &'a DiagnosticsReport,
    restricted_growth: Option<&'a GrowthEstimate>,
    passed: bool,
    warnings: &'a [String],
}

pub fn run_diagnose(settings: &DiagnoseSettings, func: &CatalogFunction) -> Result<CommandOutput> {
    let pq = ExponentPair::from_p(settings.function.exponent)?;
    let region = BallRegion::new(func.minimizer.clone(), settings.delta)?;
    let cfg = solver(settings.grid, settings.multistart)?;
    let sampling = TiltSampling::geometric(
        settings.tilt_min,
        settings.tilt_max,
        settings.tilt_count,
        settings.directions,
    );
    let report = diagnostics::diagnose(
        &func.oracle,
        &func.minimizer,
        &region,
        &pq,
        &sampling,
        &cfg,
        settings.tau,
    )?;
    let restricted = match &func.growth_side {
        Some(side) => Some(diagnostics::estimate_growth(
            &func.oracle.plus(side)?,
            &func.minimizer,
            &region,
            &pq,
            &cfg,
        )?),
        None => None,
    };

    let mut warnings = Vec::new();
    if report.audit.degenerate() {
        warnings.push(format!(
            "DegenerateEstimate: gamma_hat = {} (witness {:?}); no growth of order {} on the whole ball",
            report.growth.gamma_hat,
            report.growth.witness.coords(),
            pq.p()
        ));
    }
    if report.first_order_excess > 1e-8 {
        warnings.push(format!(
            "tilted solves violate first-order optimality by {:e}",
            report.first_order_excess
        ));
    }
    let passed = report.audit.passed();
    let known = func.oracle.known_constants();

    let header = comment_header("diagnose", settings)?;
    let mut rows = vec![
        estimate_row(
            "gamma_hat",
            report.growth.gamma_hat,
            known.and_then(|k| k.gamma),
        ),
        estimate_row(
            "kappa_hat",
            report.tilt.kappa_hat,
            known.and_then(|k| k.kappa),
        ),
        estimate_row("mu_hat", report.loja.mu_hat, known.and_then(|k| k.mu)),
    ];
    if let Some(r) = &restricted {
        rows.push(estimate_row("restricted_gamma_hat", r.gamma_hat, None));
    }
    rows.extend(report.audit.relations().iter().map(|r| relation_row(r)));
    let csv = csv_document(
        &header,
        &["quantity", "value", "reference", "status", "ratio"],
        &rows,
    )?;
    let json = json_document(&DiagnoseDocument {
        command: "diagnose",
        config: settings,
        known_constants: known,
        report: &report,
        restricted_growth: restricted.as_ref(),
        passed,
        warnings: &warnings,
    })?;

    let mut summary = format!(
        "{}: gamma_hat = {}, kappa_hat = {}, mu_hat = {}\n",
        report.descriptor, report.growth.gamma_hat, report.tilt.kappa_hat, report.loja.mu_hat
    );
    if let Some(r) = &restricted {
        summary += &format!("restricted gamma_hat = {}\n", r.gamma_hat);
    }
    for r in report.audit.relations() {
        summary += &format!("{}: {:?} (ratio {})\n", r.relation, r.status, r.ratio);
    }
    Ok(CommandOutput {
        passed,
        warnings,
        summary,
        files: vec![
            OutputFile::new("diagnostics.json", json),
            OutputFile::new("diagnostics.csv", csv),
        ],
    })
}

fn estimate_row(name: &str, value: f64, reference: Option<f64>) -> Vec<String> {
    vec![
        name.into(),
        num(value),
        opt_num(reference),
        String::new(),
        String::new(),
    ]
}

fn relation_row(r: &RelationCheck) -> Vec<String> {
    let status = serde_json::to_value(r.status)
        .ok()
        .and_then(|v| v.as_str().map(String::from))
        .unwrap_or_default();
    vec![
        r.relation.clone(),
        num(r.lhs),
        num(r.rhs),
        status,
        num(r.ratio),
    ]
}

#[derive(Serialize)]
struct ProxStep<'a> {
    k: usize,
    x: &'a [f64],
    f: ExtReal,
    tied_minimizers: usize,
}

#[derive(Serialize)]
struct ProxDocument<'a> {
    command: &'static str,
    config: &'a ProxSettings,
    trajectory: Vec<ProxStep<'a>>,
    descent_excess: f64,
    audit: Option<&'a RateAudit>,
    passed: bool,
    warnings: &'a [String],
}

pub fn run_prox(settings: &ProxSettings, func: &CatalogFunction) -> Result<CommandOutput> {
    let pq = ExponentPair::from_p(settings.function.exponent)?;
    let cfg = ProxConfig {
        epsilon: settings.epsilon,
        exponents: pq,
        iterations: settings.iterations,
        region: BallRegion::new(func.minimizer.clone(), settings.delta)?,
        solver: solver(settings.grid, settings.multistart)?,
    };
    let x0 = Point::new(settings.x0.clone())?;
    if !cfg.region.contains(&x0) {
        bail!(
            "x0 lies outside the ball of radius {} around the minimizer",
            settings.delta
        );
    }
    if !func.oracle.evaluate(&x0).is_finite() {
        bail!("f(x0) is not finite");
    }
    let traj = prox::run_prox(&func.oracle, &x0, &cfg)?;
    let fbar = func
        .oracle
        .evaluate(&func.minimizer)
        .finite()
        .expect("catalog minimizers have finite values");
    let audit = match settings.gamma {
        Some(g) => Some(prox::audit_rates(
            &traj,
            g,
            &func.minimizer,
            fbar,
            &pq,
            settings.epsilon,
        )?),
        None => None,
    };
    let mut warnings = Vec::new();
    if audit.is_none() {
        warnings.push(
            "no growth constant known for this function; rate audit skipped (pass --gamma)"
                .to_string(),
        );
    }
    let descent_excess = traj.descent_excess(settings.epsilon, pq.p());
    let passed = audit.as_ref().is_none_or(|a| a.passed);

    let dim = x0.dim();
    let mut columns: Vec<String> = vec!["k".into()];
    columns.extend((1..=dim).map(|i| format!("x{i}")));
    for c in [
        "f",
        "distance",
        "bound_x",
        "value_gap",
        "bound_f",
        "margin_x",
        "margin_f",
    ] {
        columns.push(c.into());
    }
    let rows: Vec<Vec<String>> = traj
        .points
        .iter()
        .zip(&traj.values)
        .enumerate()
        .map(|(k, (x, v))| {
            let mut row = vec![k.to_string()];
            row.extend(x.iter().map(|c| num(*c)));
            row.push(v.to_string());
            match audit.as_ref().map(|a| &a.rows[k]) {
                Some(r) => row.extend(
                    [
                        r.distance,
                        r.bound_x,
                        r.value_gap,
                        r.bound_f,
                        r.margin_x,
                        r.margin_f,
                    ]
                    .map(num),
                ),
                None => {
                    row.push(num(x.distance(&func.minimizer)));
                    row.extend(std::iter::repeat_n(String::new(), 5));
                }
            }
            row
        })
        .collect();
    let column_refs: Vec<&str> = columns.iter().map(String::as_str).collect();
    let csv = csv_document(&comment_header("prox", settings)?, &column_refs, &rows)?;
    let trajectory = traj
        .points
        .iter()
        .zip(&traj.values)
        .enumerate()
        .map(|(k, (x, v))| ProxStep {
            k,
            x: x.coords(),
            f: *v,
            tied_minimizers: if k == 0 {
                1
            } else {
                traj.steps[k - 1].minimizers.len()
            },
        })
        .collect();
    let json = json_document(&ProxDocument {
        command: "prox",
        config: settings,
        trajectory,
        descent_excess,
        audit: audit.as_ref(),
        passed,
        warnings: &warnings,
    })?;
    let last = traj.points.last().expect("nonempty");
    let mut summary = format!(
        "x_K = {:?}, f(x_K) = {}\n",
        last.coords(),
        traj.values.last().expect("nonempty")
    );
    if let Some(a) = &audit {
        summary += &format!(
            "rate audit (contraction {}): {}\n",
            a.contraction,
            if a.passed { "pass" } else { "fail" }
        );
    }
    Ok(CommandOutput {
        passed,
        warnings,
        summary,
        files: vec![
            OutputFile::new("trajectory.csv", csv),
            OutputFile::new("prox.json", json),
        ],
    })
}

/// Pass/fail items of a tracking run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrackingChecks {
    pub converged: bool,
    pub state_residual_ok: bool,
    pub sign_violations: usize,
    pub first_order_gap: f64,
    pub first_order_ok: bool,
    pub ssc_positive: bool,
    pub sweep_complete: bool,
    pub ratios_within_factor: bool,
    pub kappa_finite: bool,
    /// Positive second-order estimate implies bounded sensitivity ratios.
    pub stability_consistent: bool,
}

impl TrackingChecks {
    pub fn passed(&self) -> bool {
        self.converged
            && self.state_residual_ok
            && self.sign_violations == 0
            && self.first_order_ok
            && self.stability_consistent
    }
}

#[derive(Serialize)]
struct SolveSummary {
    objective: f64,
    first_order_residual: f64,
    state_residual: f64,
    iterations: usize,
    converged: bool,
    nodes_at_alpha: usize,
    nodes_at_beta: usize,
}

/// κ̂ comes from stationary points of the descent method, not certified
/// global minimizers, so it is labelled as a sensitivity.
#[derive(Serialize)]
struct SweepSummary {
    kappa_hat: f64,
    kappa_hat_meaning: &'static str,
    median_ratio: f64,
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'static str,
    config: &'a TrackingSettings,
    mesh_width: f64,
    solve: SolveSummary,
    ssc: &'a SscEstimate,
    growth_cross_check: f64,
    sweep: SweepSummary,
    checks: &'a TrackingChecks,
    passed: bool,
    warnings: &'a [String],
    files: [&'static str; 4],
}

pub struct TrackingRun {
    pub problem: TrackingProblem,
    pub result: TrackingResult,
    pub ssc: SscEstimate,
    pub sweep: SweepReport,
    pub checks: TrackingChecks,
}

/// Solves the instance, estimates the second-order constant and runs the sweep.
pub fn tracking_run(settings: &TrackingSettings) -> Result<(TrackingRun, f64)> {
    let base = TrackingProblem::default_instance(settings.n)?;
    let problem = TrackingProblem::new(base.target, settings.alpha, settings.beta)?;
    let opt = OptConfig {
        tolerance: settings.tolerance,
        max_iterations: settings.max_iterations,
        ..OptConfig::default()
    };
    let result = tracking::solve_tracking(&problem, &opt, None)?;
    let ssc = tracking::ssc_estimate(
        &problem,
        &result,
        settings.ssc_delta,
        settings.ssc_samples,
        settings.seed,
    )?;
    let growth = tracking::growth_cross_check(
        &problem,
        &result,
        settings.ssc_delta,
        settings.ssc_samples,
        settings.seed,
    )?;
    let sweep = tracking::perturbation_sweep(
        &problem,
        &result,
        &settings.eta_norms,
        settings.etas_per_norm,
        &opt,
        settings.seed,
    )?;
    let first_order_gap = result.vertex_first_order_gap();
    let checks = TrackingChecks {
        converged: result.converged,
        state_residual_ok: result.state_residual <= NEWTON_TOLERANCE,
        sign_violations: result.sign_violations(settings.sign_tolerance),
        first_order_gap,
        first_order_ok: first_order_gap >= -FIRST_ORDER_GAP_TOLERANCE,
        ssc_positive: ssc.c_hat > 0.0,
        sweep_complete: sweep
            .samples
            .iter()
            .all(|s| s.error.is_none() && s.converged),
        ratios_within_factor: sweep.within_factor_of_median(tracking::SWEEP_SPREAD_FACTOR),
        kappa_finite: sweep.kappa_hat.is_finite(),
        stability_consistent: tracking::stability_consistent(&ssc, &sweep),
    };
    Ok((
        TrackingRun {
            problem,
            result,
            ssc,
            sweep,
            checks,
        },
        growth.c_hat,
    ))
}

fn field_document(header: &str, field: &Field2D) -> String {
    format!("{header}{}", field.to_text())
}

pub fn run_tracking(settings: &TrackingSettings) -> Result<CommandOutput> {
    let (run, growth_c) = tracking_run(settings)?;
    let TrackingRun {
        problem,
        result,
        ssc,
        sweep,
        checks,
    } = &run;
    let mut warnings = Vec::new();
    if !result.converged {
        warnings.push(format!(
            "IterationCapReached: projected-gradient residual {:e} after {} iterations",
            result.first_order_residual, result.iterations
        ));
    }
    if ssc.c_hat <= 0.0 {
        warnings.push(format!(
            "second-order estimate {} is not positive; sweep bound not implied",
            ssc.c_hat
        ));
    }
    for s in sweep
        .samples
        .iter()
        .filter(|s| s.error.is_some() || !s.converged)
    {
        warnings.push(format!(
            "sweep sample {}/{} did not converge{}",
            s.norm_index,
            s.sample,
            s.error
                .as_ref()
                .map(|e| format!(": {e}"))
                .unwrap_or_default()
        ));
    }
    let passed = checks.passed();
    let header = comment_header("tracking", settings)?;
    let columns = [
        "norm_index",
        "sample",
        "eta_norm",
        "ratio",
        "state_shift",
        "objective",
        "iterations",
        "converged",
        "error",
    ];
    let rows: Vec<Vec<String>> = sweep
        .samples
        .iter()
        .map(|s| {
            vec![
                s.norm_index.to_string(),
                s.sample.to_string(),
                num(s.eta_norm),
                opt_num(s.ratio),
                num(s.state_shift),
                num(s.objective),
                s.iterations.to_string(),
                s.converged.to_string(),
                s.error.clone().unwrap_or_default(),
            ]
        })
        .collect();
    let sweep_csv = csv_document(&header, &columns, &rows)?;
    let values = result.control.values();
    let manifest = json_document(&Manifest {
        command: "tracking",
        config: settings,
        mesh_width: problem.grid().h(),
        solve: SolveSummary {
            objective: result.objective,
            first_order_residual: result.first_order_residual,
            state_residual: result.state_residual,
            iterations: result.iterations,
            converged: result.converged,
            nodes_at_alpha: values.iter().filter(|&&u| u == problem.alpha).count(),
            nodes_at_beta: values.iter().filter(|&&u| u == problem.beta).count(),
        },
        ssc,
        growth_cross_check: growth_c,
        sweep: SweepSummary {
            kappa_hat: sweep.kappa_hat,
            kappa_hat_meaning: "stationary-point sensitivity",
            median_ratio: sweep.median_ratio,
        },
        checks,
        passed,
        warnings: &warnings,
        files: ["control.txt", "state.txt", "adjoint.txt", "sweep.csv"],
    })?;
    let summary = format!(
        "J = {}, projected-gradient residual = {:e}, c_hat = {}, kappa_hat (stationary-point sensitivity) = {}, median ratio = {}\n",
        result.objective, result.first_order_residual, ssc.c_hat, sweep.kappa_hat, sweep.median_ratio
    );
    Ok(CommandOutput {
        passed,
        warnings,
        summary,
        files: vec![
            OutputFile::new(
                "control.txt",
                field_document(&header, result.control.field()),
            ),
            OutputFile::new("state.txt", field_document(&header, &result.state)),
            OutputFile::new("adjoint.txt", field_document(&header, &result.adjoint)),
            OutputFile::new("sweep.csv", sweep_csv),
            OutputFile::new("manifest.json", manifest),
        ],
    })
}
