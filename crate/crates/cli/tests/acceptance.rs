//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any fails.
//!
//! Reference values come from closed forms evaluated here (stationarity of the
//! tilted power function, manufactured PDE solutions, central differences),
//! not from the library code under test.

use std::f64::consts::PI;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use growthlab::catalog::{self, FunctionParams};
use growthlab::commands;
use growthlab::config::{DiagnoseArgs, TrackingArgs};
use growthlab_core::diagnostics::{
    self, check_global_loja, check_subregularity, convex_probe, estimate_growth, lipschitz_probe,
    sample_subdifferential_graph, scalar_tilt_grid, SlopeProbe, TiltSampling, DEFAULT_TAU,
};
use growthlab_core::prox::{audit_rates, run_prox, ProxConfig};
use growthlab_core::tracking::{
    evaluate, objective, random_smooth_field, second_order_form, solve_linearized,
    solve_state_detailed, Grid2D, TrackingProblem, NEWTON_TOLERANCE,
};
use growthlab_core::{BallRegion, ExponentPair, ExtReal, FunctionOracle, Point, SolverConfig};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

type Outcome = (bool, String);
type Criterion = (&'static str, fn() -> Outcome);

fn power(p: f64) -> FunctionOracle {
    catalog::build(
        "power",
        &FunctionParams {
            p: Some(p),
            bound: None,
        },
    )
    .unwrap()
    .oracle
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

/// Tilted minimizer and value gap of `|x|^p − ξx` from `p x^{p−1} = ξ`.
fn tilted_power_oracle(p: f64, xi: f64) -> (f64, f64) {
    let x = (xi / p).powf(1.0 / (p - 1.0));
    (x, x.powf(p))
}

fn power_constants() -> Outcome {
    let mut ok = true;
    let mut notes = Vec::new();
    for p in [1.5, 2.0, 3.0] {
        let start = Instant::now();
        let pq = ExponentPair::from_p(p).unwrap();
        let region = BallRegion::new(Point::scalar(0.0), 10.0).unwrap();
        let sampling = TiltSampling::geometric(0.05, 2.0, 8, 2);
        let cfg = SolverConfig::default().with_grid(2001);
        let r = diagnostics::diagnose(
            &power(p),
            &Point::scalar(0.0),
            &region,
            &pq,
            &sampling,
            &cfg,
            DEFAULT_TAU,
        )
        .unwrap();
        let elapsed = start.elapsed();
        // unit tilt: ‖x_ξ‖ / ‖ξ‖^{q/p} and gap / ‖ξ‖^q reduce to x and x^p
        let (kappa, mu) = tilted_power_oracle(p, 1.0);
        let errs = [
            rel(r.growth.gamma_hat, 1.0),
            rel(r.tilt.kappa_hat, kappa),
            rel(r.loja.mu_hat, mu),
        ];
        let pass = errs.iter().all(|e| *e <= 0.05) && elapsed < Duration::from_secs(10);
        ok &= pass;
        notes.push(format!(
            "p={p}: rel err gamma {:.1e} kappa {:.1e} mu {:.1e} in {:.2}s",
            errs[0],
            errs[1],
            errs[2],
            elapsed.as_secs_f64()
        ));
    }
    (ok, notes.join("; "))
}

fn audit_on_catalog() -> Outcome {
    let mut ok = true;
    let mut notes = Vec::new();
    for entry in catalog::CATALOG {
        let args = DiagnoseArgs {
            function: Some(entry.id.to_string()),
            ..Default::default()
        };
        let (settings, func) = args.resolve().unwrap();
        let out = commands::run_diagnose(&settings, &func).unwrap();
        let doc: serde_json::Value =
            serde_json::from_str(out.file("diagnostics.json").unwrap()).unwrap();
        let gamma = doc["report"]["growth"]["gamma_hat"].as_f64().unwrap();
        let statuses: Vec<String> = ["kappa_vs_gamma", "mu_vs_kappa", "gamma_vs_mu"]
            .iter()
            .map(|k| {
                doc["report"]["audit"][k]["status"]
                    .as_str()
                    .unwrap()
                    .to_string()
            })
            .collect();
        if gamma > 0.0 {
            ok &= statuses.iter().all(|s| s == "pass");
        }
        notes.push(format!(
            "{} gamma_hat={gamma:.4} [{}]",
            entry.id,
            statuses.join(",")
        ));
    }
    for p in [1.5, 2.0, 3.0] {
        let args = DiagnoseArgs {
            p: Some(p),
            delta: Some(10.0),
            tilt_min: Some(0.05),
            tilt_max: Some(2.0),
            ..Default::default()
        };
        let (settings, func) = args.resolve().unwrap();
        let out = commands::run_diagnose(&settings, &func).unwrap();
        let doc: serde_json::Value =
            serde_json::from_str(out.file("diagnostics.json").unwrap()).unwrap();
        let ratio = doc["report"]["audit"]["gamma_vs_mu"]["ratio"]
            .as_f64()
            .unwrap();
        let tight = (1.0 / DEFAULT_TAU..=DEFAULT_TAU).contains(&ratio);
        ok &= tight && out.passed;
        notes.push(format!("power p={p} relation (c) ratio {ratio:.6}"));
    }
    (ok, notes.join("; "))
}

fn partial_growth() -> Outcome {
    let f = FunctionOracle::finite(1, "max(x,0)^3", |x| x[0].max(0.0).powi(3));
    let pq = ExponentPair::from_p(3.0).unwrap();
    let region = BallRegion::new(Point::scalar(0.0), 1.0).unwrap();
    let cfg = SolverConfig::default().with_grid(2001);
    let full = estimate_growth(&f, &Point::scalar(0.0), &region, &pq, &cfg).unwrap();
    // x̄ itself is never sampled, so the closed half-line samples exactly {x > 0}
    let positive = FunctionOracle::new(1, "indicator x>=0", |x| {
        if x[0] >= 0.0 {
            ExtReal::ZERO
        } else {
            ExtReal::PosInf
        }
    });
    let restricted = estimate_growth(
        &f.plus(&positive).unwrap(),
        &Point::scalar(0.0),
        &region,
        &pq,
        &cfg,
    )
    .unwrap();
    let ok =
        full.gamma_hat == 0.0 && full.witness[0] < 0.0 && rel(restricted.gamma_hat, 1.0) <= 0.05;
    (
        ok,
        format!(
            "gamma_hat={} witness={}; restricted gamma_hat={}",
            full.gamma_hat, full.witness[0], restricted.gamma_hat
        ),
    )
}

fn perturbation_probes() -> Outcome {
    let mut ok = true;
    let mut notes = Vec::new();
    let xbar = Point::scalar(0.0);
    let region = BallRegion::new(xbar.clone(), 2.0).unwrap();
    let cfg = SolverConfig::default().with_grid(2001);
    let h = 2.0 * region.radius() / 2000.0;
    for p in [1.5, 2.0, 3.0] {
        let f = power(p);
        let pq = ExponentPair::from_p(p).unwrap();
        let gamma = estimate_growth(&f, &xbar, &region, &pq, &cfg)
            .unwrap()
            .gamma_hat;
        let kappa = gamma.powf(-pq.ratio()) * DEFAULT_TAU;
        let lambda = pq.ratio();
        let mut worst: f64 = 0.0;
        for (lip, anchor) in [(0.1, 1.0), (0.5, -1.0), (1.0, 0.3)] {
            let zeta = FunctionOracle::finite(1, format!("{lip}|y-{anchor}|"), move |y| {
                lip * (y[0] - anchor).abs()
            });
            let out = lipschitz_probe(&f, &xbar, &region, &zeta, lip, lambda, kappa, &cfg).unwrap();
            ok &= out.passed;
            worst = worst.max(out.worst_distance / out.bound);
            let zeta = FunctionOracle::finite(1, format!("{lip}sin(y)"), move |y| lip * y[0].sin());
            let out = lipschitz_probe(&f, &xbar, &region, &zeta, lip, lambda, kappa, &cfg).unwrap();
            ok &= out.passed;
            worst = worst.max(out.worst_distance / out.bound);
        }
        for (a, b) in [(0.3, 0.0), (-0.6, 0.5), (1.0, 2.0)] {
            let phi = FunctionOracle::finite(1, format!("{a}y+{b}y^2"), move |y| {
                a * y[0] + b * y[0] * y[0]
            });
            let out = convex_probe(
                &f,
                &xbar,
                &region,
                &phi,
                lambda,
                kappa,
                &SlopeProbe::default(),
                &cfg,
            )
            .unwrap();
            ok &= out.outcome.passed;
            worst = worst.max(out.outcome.worst_distance / out.outcome.bound);
        }
        // linear perturbation along the tilt estimator's worst tilt
        let sampling = TiltSampling::geometric(0.05, 1.0, 6, 2);
        let tilt =
            diagnostics::estimate_tilt_constant(&f, &xbar, &region, &pq, &sampling, &cfg).unwrap();
        let xi = tilt.worst_tilt[0];
        let phi = FunctionOracle::finite(1, "-xi y", move |y| -xi * y[0]);
        let out = convex_probe(
            &f,
            &xbar,
            &region,
            &phi,
            lambda,
            kappa,
            &SlopeProbe::default(),
            &cfg,
        )
        .unwrap();
        let agree = (out.outcome.worst_distance - tilt.worst_minimizer.distance(&xbar)).abs() <= h;
        ok &= agree && out.outcome.passed;
        notes.push(format!(
            "p={p}: worst distance/bound {worst:.3}, linear case agrees={agree}"
        ));
    }
    (ok, notes.join("; "))
}

fn prox_rates() -> Outcome {
    let start = Instant::now();
    let f = power(2.0);
    let pq = ExponentPair::from_p(2.0).unwrap();
    let cfg = ProxConfig {
        epsilon: 0.5,
        exponents: pq,
        iterations: 10,
        region: BallRegion::new(Point::scalar(0.0), 2.0).unwrap(),
        solver: SolverConfig::default().with_grid(2001),
    };
    let traj = run_prox(&f, &Point::scalar(1.0), &cfg).unwrap();
    let audit = audit_rates(&traj, 1.0, &Point::scalar(0.0), 0.0, &pq, 0.5).unwrap();
    // x_{k+1} = ε x_k / (2 + ε) from stationarity of x² + (ε/2)(x − x_k)²
    let mut max_err: f64 = 0.0;
    let mut envelopes = true;
    for (k, x) in traj.points.iter().enumerate() {
        let exact = 0.2f64.powi(k as i32);
        max_err = max_err.max((x[0] - exact).abs());
        envelopes &= x[0].abs() <= 0.5f64.powi(k as i32) && x[0] * x[0] <= 0.25f64.powi(k as i32);
    }
    let elapsed = start.elapsed();
    let ok = max_err <= 1e-6 && audit.passed && envelopes && elapsed < Duration::from_secs(5);
    (
        ok,
        format!(
            "max |x_k - 0.2^k| = {max_err:.2e}, audit {}, {:.2}s",
            audit.passed,
            elapsed.as_secs_f64()
        ),
    )
}

fn subregularity() -> Outcome {
    let f = catalog::build("quadbox", &FunctionParams::default())
        .unwrap()
        .oracle;
    let xbar = Point::scalar(0.0);
    let pq = ExponentPair::from_p(2.0).unwrap();
    let cfg = SolverConfig::default().with_grid(2001);
    let domain = BallRegion::new(xbar.clone(), 2.0).unwrap();
    let pairs =
        sample_subdifferential_graph(&f, &domain, &scalar_tilt_grid(-3.0, 3.0, 41), &cfg).unwrap();
    let (kappa, mu) = (0.5 * DEFAULT_TAU, 0.25 * DEFAULT_TAU);
    let sub = check_subregularity(&pairs, &xbar, &pq, kappa);
    let loja = check_global_loja(&pairs, &f, &xbar, &pq, mu);
    let sub_half = check_subregularity(&pairs, &xbar, &pq, kappa / 2.0);
    let loja_half = check_global_loja(&pairs, &f, &xbar, &pq, mu / 2.0);
    let ok = pairs.len() == 41
        && sub.passed
        && !sub.vacuous
        && loja.passed
        && !sub_half.passed
        && !loja_half.passed;
    (
        ok,
        format!(
            "{} pairs; kappa={kappa} pass={} (halved {}); mu={mu} pass={} (halved {})",
            pairs.len(),
            sub.passed,
            sub_half.passed,
            loja.passed,
            loja_half.passed
        ),
    )
}

fn pde_order() -> Outcome {
    let start = Instant::now();
    let mut errors = Vec::new();
    let mut max_res: f64 = 0.0;
    for n in [16, 32, 64] {
        let g = Grid2D::new(n).unwrap();
        let exact = g.sample(|x, y| (PI * x).sin() * (PI * y).sin());
        // −Δ(sin sin) = 2π² sin sin
        let u = exact.map(|s| 2.0 * PI * PI * s + s * s * s);
        let solve = solve_state_detailed(&u).unwrap();
        max_res = max_res.max(solve.residual());
        errors.push(solve.state.sub(&exact).l2_norm());
    }
    let ratios = [errors[0] / errors[1], errors[1] / errors[2]];
    let elapsed = start.elapsed();
    let ok = ratios.iter().all(|r| (3.3..=4.7).contains(r))
        && max_res <= NEWTON_TOLERANCE
        && elapsed < Duration::from_secs(60);
    (
        ok,
        format!(
            "ratios {:.3}, {:.3}; max Newton residual {max_res:.1e}; {:.2}s",
            ratios[0],
            ratios[1],
            elapsed.as_secs_f64()
        ),
    )
}

/// Relative tolerance of the second-difference check, calibrated on this run's
/// instance at t = 1e-3 (observed errors are below 1e-6).
const SECOND_DIFFERENCE_TOLERANCE: f64 = 1e-4;

fn derivative_consistency() -> Outcome {
    let problem = TrackingProblem::default_instance(16).unwrap();
    let g = problem.grid();
    let yd = &problem.target;
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut grad_err: f64 = 0.0;
    let mut adj_err: f64 = 0.0;
    let mut second_err: f64 = 0.0;
    for _ in 0..5 {
        let u = random_smooth_field(g, 5.0, &mut rng).map(|v| v + 6.0);
        let v = random_smooth_field(g, 1.0, &mut rng);
        let w = random_smooth_field(g, 1.0, &mut rng);
        let at = evaluate(&u, yd).unwrap();
        let t = 1e-5;
        let fd = (objective(&u.add(&v.scaled(t)), yd).unwrap()
            - objective(&u.sub(&v.scaled(t)), yd).unwrap())
            / (2.0 * t);
        grad_err = grad_err.max((at.adjoint.inner(&v) - fd).abs() / (1.0 + at.objective.abs()));

        let zv = solve_linearized(&v, &at.state).unwrap();
        let zw = solve_linearized(&w, &at.state).unwrap();
        adj_err = adj_err.max((zv.inner(&w) - v.inner(&zw)).abs());

        let t = 1e-3;
        let j0 = at.objective;
        let jp = objective(&u.add(&v.scaled(t)), yd).unwrap();
        let jm = objective(&u.sub(&v.scaled(t)), yd).unwrap();
        let fd2 = (jp - 2.0 * j0 + jm) / (t * t);
        let q = second_order_form(&u, &v, yd).unwrap();
        second_err = second_err.max((fd2 - q).abs() / q.abs());
    }
    let ok = grad_err <= 1e-6 && adj_err <= 1e-10 && second_err <= SECOND_DIFFERENCE_TOLERANCE;
    (
        ok,
        format!(
            "gradient {grad_err:.1e} (tol 1e-6), self-adjointness {adj_err:.1e} (tol 1e-10), \
             second difference {second_err:.1e} (tol {SECOND_DIFFERENCE_TOLERANCE:.0e})"
        ),
    )
}

fn tracking_consistency() -> Outcome {
    let start = Instant::now();
    let settings = TrackingArgs::default().resolve().unwrap();
    let (run, _) = commands::tracking_run(&settings).unwrap();
    let elapsed = start.elapsed();
    let c = &run.checks;
    let ratios = run.sweep.ratios();
    let lo = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let ok = settings.n == 32
        && run.ssc.c_hat > 0.0
        && ratios.len() == 24
        && c.ratios_within_factor
        && c.kappa_finite
        && c.stability_consistent
        && elapsed < Duration::from_secs(600);
    (
        ok,
        format!(
            "c_hat={:.4}, ratios in [{lo:.3}, {:.3}], median {:.3}, kappa_hat finite={}, {:.1}s",
            run.ssc.c_hat,
            run.sweep.kappa_hat,
            run.sweep.median_ratio,
            c.kappa_finite,
            elapsed.as_secs_f64()
        ),
    )
}

fn run_cli(dir: &Path, threads: &str, args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_growthlab"))
        .arg("--out")
        .arg(dir)
        .args(args)
        .env("GROWTHLAB_THREADS", threads)
        .output()
        .expect("spawn growthlab");
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
    )
}

fn read_dir_sorted(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .map(|rd| {
            rd.map(|e| {
                let e = e.unwrap();
                (
                    e.file_name().to_string_lossy().into_owned(),
                    std::fs::read(e.path()).unwrap(),
                )
            })
            .collect()
        })
        .unwrap_or_default();
    files.sort();
    files
}

fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let runs: [(&str, &[&str]); 4] = [
        (
            "diagnose",
            &["diagnose", "--fn", "maxsq2d", "--grid", "101"],
        ),
        ("prox", &["prox", "--fn", "quadcubic", "--epsilon", "0.4"]),
        (
            "tracking",
            &["tracking", "--n", "16", "--etas-per-norm", "4"],
        ),
        ("catalog", &["catalog"]),
    ];
    let mut ok = true;
    let mut notes = Vec::new();
    for (name, args) in runs {
        let a = tmp.path().join(format!("{name}-a"));
        let b = tmp.path().join(format!("{name}-b"));
        let (code_a, stdout_a) = run_cli(&a, "1", args);
        let (code_b, stdout_b) = run_cli(&b, "4", args);
        let (fa, fb) = (read_dir_sorted(&a), read_dir_sorted(&b));
        let same = code_a == code_b && stdout_a == stdout_b && fa == fb;
        let nonempty = name == "catalog" || !fa.is_empty();
        ok &= same && nonempty && code_a == 0;
        notes.push(format!("{name}: {} files identical={same}", fa.len()));
    }
    (ok, notes.join("; "))
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("power-family constants", power_constants),
        ("constant relations audit", audit_on_catalog),
        ("partial growth detection", partial_growth),
        ("perturbation probes", perturbation_probes),
        ("proximal point rates", prox_rates),
        ("subregularity and global Lojasiewicz", subregularity),
        ("PDE solver order", pde_order),
        (
            "adjoint, gradient and second-order consistency",
            derivative_consistency,
        ),
        ("tracking stability consistency", tracking_consistency),
        ("deterministic outputs", determinism),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let (ok, detail) = std::panic::catch_unwind(run).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            (false, format!("panicked: {}", msg.unwrap_or_default()))
        });
        if !ok {
            failed += 1;
        }
        println!(
            "criterion {:>2} {}: {name}: {detail}",
            i + 1,
            if ok { "PASS" } else { "FAIL" }
        );
    }
    println!(
        "acceptance: {} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
