mod common;

use mgddf_core::qp::QpProblem;
use mgddf_core::solvers::{
    dyn_solve, lvi_solve, reference_solve, residual, DynConfig, LviConfig, PrimalDual,
};
use nalgebra::DVector;
use rand::Rng;

fn tight() -> LviConfig {
    LviConfig { tolerance: 1e-9, ..LviConfig::default() }
}

#[test]
fn lvi_matches_oracle_on_small_problems() {
    let mut rng = common::rng(11);
    for case in 0..50 {
        let p = common::random_qp(&mut rng, 6, 3);
        let exact = reference_solve(&p).unwrap();
        let r = lvi_solve(&p, &tight(), &PrimalDual::for_problem(&p)).unwrap();
        assert!(r.converged, "case {case}");
        assert!((&r.solution.primal - &exact.primal).amax() < 1e-5, "case {case}");
    }
}

#[test]
fn oracle_residual_is_within_tolerance() {
    let mut rng = common::rng(12);
    for _ in 0..30 {
        let p = common::random_qp(&mut rng, 10, 4);
        let exact = reference_solve(&p).unwrap();
        assert!(residual(&exact.stacked(), &p).unwrap().norm() <= 1e-5);
    }
}

#[test]
fn exit_point_is_feasible() {
    let mut rng = common::rng(13);
    let cfg = LviConfig::default();
    for _ in 0..50 {
        let p = common::random_qp(&mut rng, 14, 6);
        let r = lvi_solve(&p, &cfg, &PrimalDual::for_problem(&p)).unwrap();
        let x = &r.solution.primal;
        for i in 0..p.primal_dim() {
            assert!(x[i] >= p.box_lower[i] && x[i] <= p.box_upper[i]);
        }
        assert!((&p.eq_matrix * x - &p.eq_rhs).norm() <= 10.0 * cfg.tolerance);
    }
}

/// A point of `{J x = b} ∩ box` on a random segment from `x`.
fn feasible_sample(p: &QpProblem, x: &DVector<f64>, rng: &mut impl Rng) -> DVector<f64> {
    // random direction projected onto the null space of J (rows of v_t span its row space)
    let v_t = p.eq_matrix.clone().svd(false, true).v_t.unwrap();
    let n = p.primal_dim();
    let mut dir = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
    for r in 0..v_t.nrows() {
        let row = v_t.row(r).transpose();
        dir -= &row * row.dot(&dir);
    }
    let mut reach = f64::INFINITY;
    for i in 0..n {
        if dir[i] > 0.0 {
            reach = reach.min((p.box_upper[i] - x[i]) / dir[i]);
        } else if dir[i] < 0.0 {
            reach = reach.min((p.box_lower[i] - x[i]) / dir[i]);
        }
    }
    x + dir * (reach.max(0.0) * rng.random_range(0.0..1.0))
}

#[test]
fn oracle_beats_random_feasible_points() {
    let mut rng = common::rng(14);
    for _ in 0..10 {
        let p = common::random_qp(&mut rng, 8, 3);
        let exact = reference_solve(&p).unwrap();
        let best = p.objective_value(&exact.primal);
        for _ in 0..1000 {
            let y = feasible_sample(&p, &exact.primal, &mut rng);
            assert!((&p.eq_matrix * &y - &p.eq_rhs).amax() < 1e-9);
            assert!(p.objective_value(&y) >= best - 1e-9);
        }
    }
}

#[test]
fn mvn_solution_is_the_pseudoinverse_solution() {
    use mgddf_core::kinematics::DualJointState;
    use mgddf_core::limits::presets;
    use mgddf_core::qp::{build_equality, build_objective, build_problem, BoxBounds, TaskReference};
    use mgddf_core::{DualArm, FeedbackGain, SchemeKind};
    use nalgebra::Vector3;

    let arms = DualArm::canonical();
    let schedule = presets::shrinking_limits(2.0, 1.0);
    let mut rng = common::rng(15);
    for _ in 0..100 {
        let theta = mgddf_core::DualVector::from_fn(|i, _| rng.random_range(schedule.theta_min[i]..schedule.theta_max[i]));
        let state = DualJointState::at_rest(theta);
        let v = |rng: &mut rand_chacha::ChaCha8Rng| {
            Vector3::new(rng.random_range(-0.1..0.1), rng.random_range(-0.1..0.1), rng.random_range(-0.1..0.1))
        };
        let p = arms.forward_positions(&theta);
        let reference = TaskReference {
            desired_position_left: Vector3::new(p[0], p[1], p[2]) + v(&mut rng),
            desired_position_right: Vector3::new(p[3], p[4], p[5]) + v(&mut rng),
            desired_velocity_left: v(&mut rng),
            desired_velocity_right: v(&mut rng),
        };
        let eq = build_equality(&arms, &state, &reference, &FeedbackGain::uniform(2.0).unwrap());
        let expected = eq.matrix.clone().pseudo_inverse(1e-12).unwrap() * &eq.rhs;
        let wide = BoxBounds { lower: DVector::repeat(14, -1e6), upper: DVector::repeat(14, 1e6) };
        let problem = build_problem(build_objective(&SchemeKind::Mvn, &state).unwrap(), eq, wide).unwrap();
        let solved = reference_solve(&problem).unwrap();
        assert!((&solved.primal - &expected).amax() < 1e-8);
    }
}

#[test]
fn dyn_agrees_with_lvi() {
    let mut rng = common::rng(16);
    let cfg = DynConfig { tolerance: 1e-8, max_pseudo_time: 1e4, ..DynConfig::default() };
    for _ in 0..20 {
        let p = common::random_qp(&mut rng, 6, 3);
        let a = lvi_solve(&p, &tight(), &PrimalDual::for_problem(&p)).unwrap();
        let b = dyn_solve(&p, &cfg, &PrimalDual::for_problem(&p)).unwrap();
        assert!(b.converged);
        assert!((&a.solution.primal - &b.solution.primal).amax() < 1e-5);
    }
}

/// Least-squares slope of `ln r` against pseudo-time over the tail after the first tenth.
fn log_residual_slope(history: &[f64], step: f64) -> f64 {
    let pts: Vec<(f64, f64)> = history
        .iter()
        .enumerate()
        .skip(history.len() / 10)
        .map(|(k, r)| (k as f64 * step, r.ln()))
        .collect();
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
    sxy / sxx
}

#[test]
fn dyn_converges_exponentially_and_faster_with_gain() {
    let mut rng = common::rng(17);
    for _ in 0..10 {
        let p = common::random_qp(&mut rng, 6, 3);
        let step = 1e-3;
        let slow = DynConfig { gain: 1.0, pseudo_step: step, max_pseudo_time: 1e4, tolerance: 1e-9, ..DynConfig::default() };
        let fast = DynConfig { gain: 2.0, ..slow };
        let a = dyn_solve(&p, &slow, &PrimalDual::for_problem(&p)).unwrap();
        let b = dyn_solve(&p, &fast, &PrimalDual::for_problem(&p)).unwrap();
        assert!(a.converged && b.converged);
        assert!(b.iterations <= a.iterations);
        let sa = log_residual_slope(&a.residual_history, step);
        let sb = log_residual_slope(&b.residual_history, step);
        assert!(sa < 0.0 && sb < sa, "slopes {sa} {sb}");
    }
}
