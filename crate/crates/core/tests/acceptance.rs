//! Acceptance suite: one pass/fail line per criterion, nonzero exit on any failure.

mod common;

use std::f64::consts::PI;

use mgddf_core::config::presets;
use mgddf_core::kinematics::{canonical, forward_position, jacobian, ArmModel, ArmJacobian, ArmVector};
use mgddf_core::limits::{gddf_bound, presets as limit_presets};
use mgddf_core::simulation::{self, BallCatch, SimConfig};
use mgddf_core::solvers::{dyn_solve, lvi_solve, lvi_solve_observed, reference_solve, DynConfig, LviConfig, PrimalDual};
use mgddf_core::{run, BoundMode, FeedbackGain, TaskSpec, ARM_DOF};
use nalgebra::Vector3;
use rand::Rng;

const GRID: [(f64, f64); 5] = [(2.0, 2.0), (2.0, 3.0), (2.0, 4.0), (3.0, 1.0), (4.0, 1.0)];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn grid_config(rho: f64, n: f64, mode: BoundMode) -> SimConfig {
    let mut c = presets::by_name("paper-v-a").unwrap();
    c.schedule = limit_presets::shrinking_limits(rho, n);
    c.margin = mgddf_core::MarginParams::new(0.85, 2.0).unwrap();
    c.duration = 18.0;
    c.dt = 0.01;
    c.mode = mode;
    c
}

fn safety_under_mgddf() -> Outcome {
    let mut notes = Vec::new();
    let mut pass = true;
    for (rho, n) in GRID {
        match run(&grid_config(rho, n, BoundMode::Mgddf)) {
            Ok((_, report)) => {
                let hard = report.hard_violations();
                let worst = report.joints.iter().map(|j| j.max_hard_overshoot).fold(0.0, f64::max);
                let sched = report.joints.iter().map(|j| j.max_scheduled_overshoot).fold(0.0, f64::max);
                pass &= hard.is_empty();
                notes.push(format!("({rho},{n}) hard {worst:.1e} sched {sched:.1e}"));
            }
            Err(f) => {
                pass = false;
                notes.push(format!("({rho},{n}) failed: {f}"));
            }
        }
    }
    outcome(pass, notes.join("; "))
}

fn deficiency_under_gddf() -> Outcome {
    let mut exits = Vec::new();
    for (rho, n) in GRID {
        match run(&grid_config(rho, n, BoundMode::Gddf)) {
            Ok((_, report)) => {
                let joints = report.margin_violations();
                if !joints.is_empty() {
                    exits.push(format!("({rho},{n}) joints {joints:?}"));
                }
            }
            Err(f) => return outcome(false, format!("({rho},{n}) failed: {f}")),
        }
    }
    let pass = !exits.is_empty();
    outcome(pass, if pass { exits.join("; ") } else { "no joint left its margin region".into() })
}

fn solver_equivalence_and_monotonicity() -> (Outcome, Outcome) {
    let mut rng = common::rng(20_240_601);
    let nominal = LviConfig::default();
    let tight = LviConfig { tolerance: 1e-8, ..nominal };
    let dynamic = DynConfig { tolerance: 1e-8, max_pseudo_time: 1e4, ..DynConfig::default() };
    let (mut worst_lvi, mut worst_dyn, mut worst_iters) = (0.0f64, 0.0f64, 0usize);
    let mut failures = Vec::new();
    let mut worst_increase = 0.0f64;
    for case in 0..200 {
        let p = common::random_qp(&mut rng, 14, 6);
        let exact = match reference_solve(&p) {
            Ok(s) => s,
            Err(e) => {
                failures.push(format!("#{case} oracle: {e}"));
                continue;
            }
        };
        let star = exact.stacked();
        let start = PrimalDual::for_problem(&p);

        let mut last = f64::INFINITY;
        let coarse = lvi_solve_observed(&p, &nominal, &start, |d| {
            let dist = (d - &star).norm();
            worst_increase = worst_increase.max(dist - last);
            last = dist;
        });
        let coarse = match coarse {
            Ok(r) if r.converged && r.final_residual <= 1e-5 => r,
            Ok(r) => {
                failures.push(format!("#{case} lvi stopped at {:.1e}", r.final_residual));
                continue;
            }
            Err(e) => {
                failures.push(format!("#{case} lvi: {e}"));
                continue;
            }
        };
        worst_iters = worst_iters.max(coarse.iterations);

        match lvi_solve(&p, &tight, &coarse.solution) {
            Ok(r) => worst_lvi = worst_lvi.max((&r.solution.primal - &exact.primal).amax()),
            Err(e) => failures.push(format!("#{case} lvi refine: {e}")),
        }
        match dyn_solve(&p, &dynamic, &start) {
            Ok(r) if r.converged => worst_dyn = worst_dyn.max((&r.solution.primal - &exact.primal).amax()),
            Ok(r) => failures.push(format!("#{case} dyn stopped at {:.1e}", r.final_residual)),
            Err(e) => failures.push(format!("#{case} dyn: {e}")),
        }
    }
    let equivalence = outcome(
        failures.is_empty() && worst_lvi <= 1e-5 && worst_dyn <= 1e-5 && worst_iters <= 100_000,
        format!(
            "max primal error lvi {worst_lvi:.1e}, dyn {worst_dyn:.1e}; max lvi iterations to 1e-5: {worst_iters}{}",
            if failures.is_empty() { String::new() } else { format!("; failures: {}", failures.join(", ")) }
        ),
    );
    let monotone = outcome(
        failures.is_empty() && worst_increase <= 1e-12,
        format!("largest step-to-step increase of |d - d*|: {worst_increase:.1e}"),
    );
    (equivalence, monotone)
}

fn scheduler_analytics() -> Outcome {
    let mut worst_mid = 0.0f64;
    let mut worst_tail = 0.0f64;
    for (rho, n) in GRID {
        let s = limit_presets::shrinking_limits(rho, n);
        let tau = s.tau();
        let (lo, hi) = gddf_bound(&s, tau);
        let (lo_tail, hi_tail) = gddf_bound(&s, tau + 50.0 * rho);
        for i in 0..mgddf_core::DUAL_DOF {
            let d_lo = s.goal_min[i] - s.theta_min[i];
            let d_hi = s.goal_max[i] - s.theta_max[i];
            worst_mid = worst_mid.max((lo[i] - (s.theta_min[i] + d_lo / 2.0)).abs());
            worst_mid = worst_mid.max((hi[i] - (s.theta_max[i] + d_hi / 2.0)).abs());
            worst_tail = worst_tail.max((lo_tail[i] - s.goal_min[i]).abs() / d_lo.abs().max(1.0));
            worst_tail = worst_tail.max((hi_tail[i] - s.goal_max[i]).abs() / d_hi.abs().max(1.0));
        }
    }
    outcome(
        worst_mid <= 4.0 * f64::EPSILON && worst_tail <= 1e-12,
        format!("midpoint error {worst_mid:.1e}, scaled tail error {worst_tail:.1e}"),
    )
}

fn feedback_decay() -> Outcome {
    let mut c = presets::by_name("static").unwrap();
    c.duration = 3.0;
    let offset = Vector3::new(0.01, 0.0, 0.0);
    let slope_at = |gain: f64| {
        let mut cfg = c.clone();
        cfg.gain = FeedbackGain::uniform(gain).unwrap();
        simulation::tracking_error_decay_test(&cfg, offset)
    };
    let (nominal, low, high) = match (slope_at(1.0), slope_at(0.7), slope_at(1.3)) {
        (Ok(a), Ok(b), Ok(c)) => (a, b, c),
        _ => return outcome(false, "decay run failed"),
    };
    let bound = 1.1 * (-3.0f64).exp() * 0.01;
    let err = nominal.error_at(3.0);
    let robust = low.slope <= 0.5 * nominal.slope && high.slope <= 0.5 * nominal.slope;
    outcome(
        err <= bound && robust,
        format!(
            "|e(3 s)| = {:.3} cm (bound {:.3} cm); slopes {:.3} / {:.3} / {:.3} at gain 1 / 0.7 / 1.3",
            err * 100.0,
            bound * 100.0,
            nominal.slope,
            low.slope,
            high.slope
        ),
    )
}

fn central_difference(arm: &ArmModel, q: &ArmVector) -> ArmJacobian {
    let h = 1e-6;
    let mut jac = ArmJacobian::zeros();
    for i in 0..ARM_DOF {
        let mut plus = *q;
        let mut minus = *q;
        plus[i] += h;
        minus[i] -= h;
        jac.set_column(i, &((forward_position(arm, &plus) - forward_position(arm, &minus)) / (2.0 * h)));
    }
    jac
}

fn jacobian_correctness() -> Outcome {
    let mut rng = common::rng(7);
    let mut worst = 0.0f64;
    for arm in [canonical::left(), canonical::right()] {
        for _ in 0..100 {
            let q = ArmVector::from_fn(|_, _| rng.random_range(-PI..PI));
            worst = worst.max((jacobian(&arm, &q) - central_difference(&arm, &q)).amax());
        }
    }
    outcome(worst <= 1e-6, format!("max |J - J_fd| = {worst:.1e}"))
}

fn ball_catch() -> Outcome {
    let config = presets::by_name("ball-catch").unwrap();
    let TaskSpec::BallCatch(spec) = config.task.clone() else {
        return outcome(false, "ball-catch preset has another task");
    };
    let closure = spec.offset(spec.duration()).0.norm();
    let (log, report) = match run(&config) {
        Ok(r) => r,
        Err(f) => return outcome(false, format!("run failed: {f}")),
    };
    let rms = log.rms_tracking_error();
    let hard = report.hard_violations();
    let shape = BallCatch::default();
    outcome(
        closure <= 1e-12 && rms <= 2e-3 && hard.is_empty() && spec == shape,
        format!("closure {closure:.1e} m, rms {:.3} mm, joints outside limits {hard:?}", rms * 1e3),
    )
}

fn determinism() -> Outcome {
    for name in presets::NAMES {
        let config = presets::by_name(name).unwrap();
        let csv = |c: &SimConfig| run(c).map(|(log, _)| log.to_csv_string(true));
        match (csv(&config), csv(&config)) {
            (Ok(a), Ok(b)) if a == b => {}
            (Ok(_), Ok(_)) => return outcome(false, format!("{name}: runs differ")),
            _ => return outcome(false, format!("{name}: run failed")),
        }
    }
    outcome(true, format!("presets {} reproduce byte for byte", presets::NAMES.join(", ")))
}

fn main() {
    let (equivalence, monotone) = solver_equivalence_and_monotonicity();
    let results = [
        ("1 safety under MGDDF", safety_under_mgddf()),
        ("2 deficiency under GDDF", deficiency_under_gddf()),
        ("3 solver oracle equivalence", equivalence),
        ("4 projection monotonicity", monotone),
        ("5 scheduler analytics", scheduler_analytics()),
        ("6 exponential feedback decay", feedback_decay()),
        ("7 jacobian correctness", jacobian_correctness()),
        ("8 ball-catch closure and limits", ball_catch()),
        ("9 determinism", determinism()),
    ];
    let mut failed = 0;
    for (name, o) in &results {
        println!("criterion {name}: {} ({})", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        failed += usize::from(!o.pass);
    }
    println!("acceptance: {} of {} criteria passed", results.len() - failed, results.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
