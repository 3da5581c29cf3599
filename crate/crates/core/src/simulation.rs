//! Closed-loop time stepping of the dual-arm system.

use std::f64::consts::PI;
use std::io::Write;

use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::kinematics::{DualArm, DualJointState, DualVector, TaskVector, DUAL_DOF};
use crate::limits::{
    clamp_scheduled_bounds, mode_kappa, window_from_bounds, BoundMode, LimitSchedule, MarginParams,
    ScheduledBounds, VelocityWindow,
};
use crate::qp::{build_equality, build_objective, build_problem, BoxBounds, FeedbackGain, SchemeKind, TaskReference};
use crate::solvers::{dyn_solve, lvi_solve, DynConfig, LviConfig, PrimalDual, SolveReport};

/// Violations smaller than this are treated as rounding noise (rad).
pub const VIOLATION_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SolverChoice {
    Lvi(LviConfig),
    Dyn(DynConfig),
}

impl SolverChoice {
    pub fn name(&self) -> &'static str {
        match self {
            SolverChoice::Lvi(_) => "lvi",
            SolverChoice::Dyn(_) => "dyn",
        }
    }
}

/// Ball path: `amplitudes = [up, left, down]` (m); a fourth segment returns
/// to the start. Every segment lasts `segment_duration` seconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BallCatch {
    pub amplitudes: [f64; 3],
    pub segment_duration: f64,
}

impl Default for BallCatch {
    fn default() -> Self {
        Self { amplitudes: [0.1, 0.1, 0.1], segment_duration: 4.5 }
    }
}

impl BallCatch {
    pub fn duration(&self) -> f64 {
        4.0 * self.segment_duration
    }

    fn segments(&self) -> [Vector3<f64>; 4] {
        let [up, left, down] = self.amplitudes;
        let a = Vector3::new(0.0, 0.0, up);
        let b = Vector3::new(0.0, left, 0.0);
        let c = Vector3::new(0.0, 0.0, -down);
        [a, b, c, -(a + b + c)]
    }

    /// Displacement of the ball from its start and its velocity at `t`.
    pub fn offset(&self, t: f64) -> (Vector3<f64>, Vector3<f64>) {
        let period = self.segment_duration;
        if t <= 0.0 || t >= self.duration() {
            return (Vector3::zeros(), Vector3::zeros());
        }
        let segments = self.segments();
        let index = ((t / period).floor() as usize).min(3);
        let u = (t - index as f64 * period) / period;
        let done: Vector3<f64> = segments[..index].iter().sum();
        let d = segments[index];
        let shape = u - (2.0 * PI * u).sin() / (2.0 * PI);
        let rate = (1.0 - (2.0 * PI * u).cos()) / period;
        (done + d * shape, d * rate)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Waypoint {
    pub time: f64,
    pub left: Vector3<f64>,
    pub right: Vector3<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TaskSpec {
    /// Hold the initial hand positions shifted by the offsets.
    HoldPose { offset_left: Vector3<f64>, offset_right: Vector3<f64> },
    /// Both hands follow the ball, keeping their initial separation.
    BallCatch(BallCatch),
    /// Piecewise-linear absolute positions; held before the first and after the last point.
    CustomPath(Vec<Waypoint>),
}

impl TaskSpec {
    pub fn hold() -> Self {
        TaskSpec::HoldPose { offset_left: Vector3::zeros(), offset_right: Vector3::zeros() }
    }

    pub fn name(&self) -> &'static str {
        match self {
            TaskSpec::HoldPose { .. } => "hold",
            TaskSpec::BallCatch(_) => "ball-catch",
            TaskSpec::CustomPath(_) => "path",
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        match self {
            TaskSpec::HoldPose { offset_left, offset_right } => {
                if offset_left.iter().chain(offset_right.iter()).any(|x| !x.is_finite()) {
                    return bad("hold offsets must be finite");
                }
            }
            TaskSpec::BallCatch(b) => {
                if !(b.segment_duration > 0.0 && b.segment_duration.is_finite()) {
                    return bad("ball segment duration must be positive");
                }
                if b.amplitudes.iter().any(|a| !a.is_finite()) {
                    return bad("ball amplitudes must be finite");
                }
            }
            TaskSpec::CustomPath(points) => {
                if points.is_empty() {
                    return bad("path needs at least one waypoint");
                }
                if points.windows(2).any(|w| !(w[1].time > w[0].time)) {
                    return bad("path waypoint times must increase");
                }
            }
        }
        Ok(())
    }
}

/// Reference of both hands on the ball path, starting from the given hand positions.
pub fn ball_catch_path(t: f64, spec: &BallCatch, start_left: &Vector3<f64>, start_right: &Vector3<f64>) -> TaskReference {
    let (offset, velocity) = spec.offset(t);
    TaskReference {
        desired_position_left: start_left + offset,
        desired_position_right: start_right + offset,
        desired_velocity_left: velocity,
        desired_velocity_right: velocity,
    }
}

fn path_reference(t: f64, points: &[Waypoint]) -> TaskReference {
    let first = &points[0];
    let last = &points[points.len() - 1];
    if t <= first.time {
        return TaskReference::stationary(first.left, first.right);
    }
    if t >= last.time {
        return TaskReference::stationary(last.left, last.right);
    }
    let k = points.partition_point(|p| p.time <= t) - 1;
    let (a, b) = (&points[k], &points[k + 1]);
    let span = b.time - a.time;
    let u = (t - a.time) / span;
    TaskReference {
        desired_position_left: a.left.lerp(&b.left, u),
        desired_position_right: a.right.lerp(&b.right, u),
        desired_velocity_left: (b.left - a.left) / span,
        desired_velocity_right: (b.right - a.right) / span,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub duration: f64,
    pub dt: f64,
    pub scheme: SchemeKind,
    pub mode: BoundMode,
    pub margin: MarginParams,
    pub schedule: LimitSchedule,
    pub gain: FeedbackGain,
    pub solver: SolverChoice,
    pub task: TaskSpec,
    pub initial_theta: DualVector,
    pub arms: DualArm,
}

impl SimConfig {
    /// Number of integration steps.
    pub fn steps(&self) -> usize {
        (self.duration / self.dt).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad(format!("dt must be positive: {}", self.dt));
        }
        if self.dt > 1.0 / self.margin.nu {
            return bad(format!("dt = {} exceeds 1/nu = {}", self.dt, 1.0 / self.margin.nu));
        }
        if !(self.duration >= 0.0 && self.duration.is_finite()) {
            return bad(format!("duration must be non-negative: {}", self.duration));
        }
        let ratio = self.duration / self.dt;
        if (ratio - ratio.round()).abs() > 1e-6 * ratio.max(1.0) {
            return bad(format!("duration {} is not a whole number of steps of {}", self.duration, self.dt));
        }
        if self.initial_theta.iter().any(|x| !x.is_finite()) {
            return bad("initial theta must be finite".into());
        }
        match &self.solver {
            SolverChoice::Lvi(c) => c.validate()?,
            SolverChoice::Dyn(c) => c.validate()?,
        }
        self.task.validate()?;
        build_objective(&self.scheme, &DualJointState::at_rest(self.initial_theta))?;
        Ok(())
    }
}

/// Everything recorded for one tick.
#[derive(Debug, Clone, PartialEq)]
pub struct TickRecord {
    pub time: f64,
    pub theta: DualVector,
    pub theta_dot: DualVector,
    /// Scheduled bounds of the active mode.
    pub bounds: ScheduledBounds,
    /// Margin region at the configured critical coefficient.
    pub margin_lower: DualVector,
    pub margin_upper: DualVector,
    pub window: VelocityWindow,
    pub position: TaskVector,
    pub reference: TaskVector,
    pub iterations: usize,
    pub residual: f64,
    /// Per joint: bit 0 outside the margin region, bit 1 outside the
    /// scheduled bounds, bit 2 outside the physical limits.
    pub flags: [u8; DUAL_DOF],
    pub residual_history: Vec<f64>,
}

impl TickRecord {
    pub fn tracking_error(&self) -> TaskVector {
        self.reference - self.position
    }
}

/// State carried between ticks.
#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub theta: DualVector,
    pub warm_start: PrimalDual,
}

/// A configured run: holds the task reference frame.
#[derive(Debug, Clone)]
pub struct Simulation {
    config: SimConfig,
    start_left: Vector3<f64>,
    start_right: Vector3<f64>,
}

impl Simulation {
    pub fn new(config: SimConfig) -> Result<Self> {
        config.validate()?;
        let p = config.arms.forward_positions(&config.initial_theta);
        Ok(Self {
            start_left: Vector3::new(p[0], p[1], p[2]),
            start_right: Vector3::new(p[3], p[4], p[5]),
            config,
        })
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn initial_state(&self) -> SimState {
        SimState { theta: self.config.initial_theta, warm_start: PrimalDual::zeros(DUAL_DOF, 6) }
    }

    pub fn reference(&self, t: f64) -> TaskReference {
        match &self.config.task {
            TaskSpec::HoldPose { offset_left, offset_right } => {
                TaskReference::stationary(self.start_left + offset_left, self.start_right + offset_right)
            }
            TaskSpec::BallCatch(spec) => ball_catch_path(t, spec, &self.start_left, &self.start_right),
            TaskSpec::CustomPath(points) => path_reference(t, points),
        }
    }

    /// Solves the tick QP at `t`; returns the record and the state after one Euler step.
    pub fn step(&self, state: &SimState, t: f64) -> Result<(SimState, TickRecord)> {
        let cfg = &self.config;
        let bounds = clamp_scheduled_bounds(&cfg.schedule, t, mode_kappa(cfg.mode, &cfg.margin));
        let (margin_lower, margin_upper) = match cfg.mode {
            BoundMode::Mgddf => (bounds.margin_lower, bounds.margin_upper),
            BoundMode::Gddf => {
                let m = clamp_scheduled_bounds(&cfg.schedule, t, cfg.margin.kappa);
                (m.margin_lower, m.margin_upper)
            }
        };
        let window =
            window_from_bounds(&state.theta, &cfg.schedule, cfg.margin.nu, &bounds.margin_lower, &bounds.margin_upper);
        if let Some(joint) = window.first_inverted() {
            return Err(Error::InvertedWindow { joint: joint + 1, time: t });
        }

        let joint_state = DualJointState::at_rest(state.theta);
        let reference = self.reference(t);
        let objective = build_objective(&cfg.scheme, &joint_state)?;
        let equality = build_equality(&cfg.arms, &joint_state, &reference, &cfg.gain);
        let problem = build_problem(objective, equality, BoxBounds::from(&window))?;
        let report = solve(&problem, &cfg.solver, &state.warm_start)
            .map_err(|e| Error::SolverFailure { time: t, message: e.to_string() })?;
        if !report.converged {
            return Err(Error::SolverFailure {
                time: t,
                message: format!("no convergence after {} iterations, residual {:e}", report.iterations, report.final_residual),
            });
        }
        let theta_dot = DualVector::from_column_slice(report.solution.primal.as_slice());

        let mut flags = [0u8; DUAL_DOF];
        for (i, flag) in flags.iter_mut().enumerate() {
            let th = state.theta[i];
            let outside = |lo: f64, hi: f64| th < lo - VIOLATION_TOLERANCE || th > hi + VIOLATION_TOLERANCE;
            if outside(margin_lower[i], margin_upper[i]) {
                *flag |= 1;
            }
            if outside(bounds.lower[i], bounds.upper[i]) {
                *flag |= 2;
            }
            if outside(cfg.schedule.theta_min[i], cfg.schedule.theta_max[i]) {
                *flag |= 4;
            }
        }

        let record = TickRecord {
            time: t,
            theta: state.theta,
            theta_dot,
            bounds,
            margin_lower,
            margin_upper,
            window,
            position: cfg.arms.forward_positions(&state.theta),
            reference: reference.positions(),
            iterations: report.iterations,
            residual: report.final_residual,
            flags,
            residual_history: report.residual_history,
        };
        let next = SimState { theta: state.theta + theta_dot * cfg.dt, warm_start: report.solution };
        Ok((next, record))
    }
}

fn solve(problem: &crate::qp::QpProblem, solver: &SolverChoice, warm: &PrimalDual) -> Result<SolveReport> {
    match solver {
        SolverChoice::Lvi(c) => lvi_solve(problem, c, warm),
        SolverChoice::Dyn(c) => dyn_solve(problem, c, warm),
    }
}

/// Per-tick records of a run.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SimLog {
    pub rows: Vec<TickRecord>,
}

impl SimLog {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Root-mean-square of the stacked tracking error over all ticks (m).
    pub fn rms_tracking_error(&self) -> f64 {
        if self.rows.is_empty() {
            return 0.0;
        }
        let sum: f64 = self.rows.iter().map(|r| r.tracking_error().norm_squared()).sum();
        (sum / self.rows.len() as f64).sqrt()
    }

    /// `sum |theta_dot|^2 dt`, left-rectangle rule.
    pub fn velocity_energy(&self, dt: f64) -> f64 {
        let n = self.rows.len().saturating_sub(1);
        self.rows[..n].iter().map(|r| r.theta_dot.norm_squared() * dt).sum()
    }

    pub fn header(with_history: bool) -> Vec<String> {
        let mut h = vec!["time".to_string()];
        let joint_group = |h: &mut Vec<String>, prefix: &str| {
            h.extend((1..=DUAL_DOF).map(|j| format!("{prefix}_{j}")));
        };
        for prefix in [
            "theta",
            "theta_dot",
            "sched_lo",
            "sched_hi",
            "margin_lo",
            "margin_hi",
            "window_lo",
            "window_hi",
        ] {
            joint_group(&mut h, prefix);
        }
        for what in ["pos", "err"] {
            for hand in ["l", "r"] {
                for axis in ["x", "y", "z"] {
                    h.push(format!("{what}_{hand}_{axis}"));
                }
            }
        }
        h.push("iterations".into());
        h.push("residual".into());
        joint_group(&mut h, "flag");
        if with_history {
            h.push("residual_history".into());
        }
        h
    }

    /// One header row, then one row per tick; numbers with 12 significant digits.
    pub fn write_csv<W: Write>(&self, out: W, with_history: bool) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(Self::header(with_history))?;
        for r in &self.rows {
            let mut row = vec![fmt_g(r.time)];
            for v in [
                &r.theta,
                &r.theta_dot,
                &r.bounds.lower,
                &r.bounds.upper,
                &r.margin_lower,
                &r.margin_upper,
                &r.window.lower,
                &r.window.upper,
            ] {
                row.extend(v.iter().map(|&x| fmt_g(x)));
            }
            row.extend(r.position.iter().map(|&x| fmt_g(x)));
            row.extend(r.tracking_error().iter().map(|&x| fmt_g(x)));
            row.push(r.iterations.to_string());
            row.push(fmt_g(r.residual));
            row.extend(r.flags.iter().map(|f| f.to_string()));
            if with_history {
                let h: Vec<String> = r.residual_history.iter().map(|&x| fmt_g(x)).collect();
                row.push(h.join(";"));
            }
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self, with_history: bool) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf, with_history).expect("writing to memory");
        String::from_utf8(buf).expect("csv is utf-8")
    }
}

/// `%.12g`
pub fn fmt_g(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{:.11e}", x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("exponent");
    let trim = |s: &str| -> String {
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s.to_string()
        }
    };
    if !(-4..12).contains(&exp) {
        format!("{}e{}{:02}", trim(mantissa), if exp < 0 { '-' } else { '+' }, exp.abs())
    } else {
        trim(&format!("{:.*}", (11 - exp) as usize, x))
    }
}

/// Worst excursions of one joint.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct JointViolation {
    pub max_margin_overshoot: f64,
    pub max_scheduled_overshoot: f64,
    pub max_hard_overshoot: f64,
    pub first_margin_violation: Option<f64>,
    pub first_hard_violation: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ViolationReport {
    pub joints: Vec<JointViolation>,
}

fn overshoot(x: f64, lo: f64, hi: f64) -> f64 {
    (x - hi).max(lo - x).max(0.0)
}

impl ViolationReport {
    pub fn from_log(log: &SimLog, schedule: &LimitSchedule) -> Self {
        let mut joints = vec![JointViolation::default(); DUAL_DOF];
        for r in &log.rows {
            for (i, j) in joints.iter_mut().enumerate() {
                let th = r.theta[i];
                let m = overshoot(th, r.margin_lower[i], r.margin_upper[i]);
                let s = overshoot(th, r.bounds.lower[i], r.bounds.upper[i]);
                let h = overshoot(th, schedule.theta_min[i], schedule.theta_max[i]);
                j.max_margin_overshoot = j.max_margin_overshoot.max(m);
                j.max_scheduled_overshoot = j.max_scheduled_overshoot.max(s);
                j.max_hard_overshoot = j.max_hard_overshoot.max(h);
                if m > VIOLATION_TOLERANCE && j.first_margin_violation.is_none() {
                    j.first_margin_violation = Some(r.time);
                }
                if h > VIOLATION_TOLERANCE && j.first_hard_violation.is_none() {
                    j.first_hard_violation = Some(r.time);
                }
            }
        }
        Self { joints }
    }

    /// Joints (1-based) that left their physical limits.
    pub fn hard_violations(&self) -> Vec<usize> {
        self.joints_where(|j| j.max_hard_overshoot > VIOLATION_TOLERANCE)
    }

    /// Joints (1-based) that left their scheduled bounds.
    pub fn scheduled_violations(&self) -> Vec<usize> {
        self.joints_where(|j| j.max_scheduled_overshoot > VIOLATION_TOLERANCE)
    }

    /// Joints (1-based) that left their margin region.
    pub fn margin_violations(&self) -> Vec<usize> {
        self.joints_where(|j| j.max_margin_overshoot > VIOLATION_TOLERANCE)
    }

    fn joints_where(&self, f: impl Fn(&JointViolation) -> bool) -> Vec<usize> {
        self.joints.iter().enumerate().filter(|(_, j)| f(j)).map(|(i, _)| i + 1).collect()
    }

    /// Plain-text table, one line per joint.
    pub fn summary(&self) -> String {
        let mut s = String::from("joint  margin_overshoot  scheduled_overshoot  hard_overshoot  first_margin  status\n");
        for (i, j) in self.joints.iter().enumerate() {
            let first = j.first_margin_violation.map_or("-".to_string(), |t| format!("{t:.2}"));
            let status = if j.max_hard_overshoot > VIOLATION_TOLERANCE {
                "LIMIT EXCEEDED"
            } else {
                "within limits"
            };
            s.push_str(&format!(
                "{:>5}  {:>16.3e}  {:>19.3e}  {:>14.3e}  {:>12}  {}\n",
                i + 1,
                j.max_margin_overshoot,
                j.max_scheduled_overshoot,
                j.max_hard_overshoot,
                first,
                status
            ));
        }
        s
    }
}

/// A run that stopped early, with everything logged up to the failure.
#[derive(Debug, Clone)]
pub struct RunFailure {
    pub error: Error,
    pub log: SimLog,
    pub report: ViolationReport,
}

impl std::fmt::Display for RunFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} ({} ticks logged)", self.error, self.log.len())
    }
}

impl std::error::Error for RunFailure {}

/// Runs the closed loop for `duration / dt` steps, logging `duration / dt + 1` ticks.
pub fn run(config: &SimConfig) -> std::result::Result<(SimLog, ViolationReport), Box<RunFailure>> {
    let fail = |error, log: SimLog| {
        let report = ViolationReport::from_log(&log, &config.schedule);
        Box::new(RunFailure { error, log, report })
    };
    let sim = Simulation::new(config.clone()).map_err(|e| fail(e, SimLog::default()))?;
    let steps = config.steps();
    let mut log = SimLog { rows: Vec::with_capacity(steps + 1) };
    let mut state = sim.initial_state();
    for k in 0..=steps {
        let t = k as f64 * config.dt;
        match sim.step(&state, t) {
            Ok((next, record)) => {
                log.rows.push(record);
                state = next;
            }
            Err(e) => return Err(fail(e, log)),
        }
    }
    let report = ViolationReport::from_log(&log, &config.schedule);
    Ok((log, report))
}

/// Result of a feedback decay run.
#[derive(Debug, Clone, PartialEq)]
pub struct DecayEstimate {
    /// Least-squares slope of `ln |error|` against time (1/s).
    pub slope: f64,
    /// `(t, |error|)` per tick.
    pub samples: Vec<(f64, f64)>,
}

impl DecayEstimate {
    pub fn error_at(&self, t: f64) -> f64 {
        let k = self.samples.partition_point(|s| s.0 < t - 1e-9);
        self.samples[k.min(self.samples.len() - 1)].1
    }
}

/// Holds the initial pose with the left-hand reference displaced by
/// `initial_offset` and fits the exponential decay of the tracking error.
pub fn tracking_error_decay_test(config: &SimConfig, initial_offset: Vector3<f64>) -> Result<DecayEstimate> {
    let mut cfg = config.clone();
    cfg.task = TaskSpec::HoldPose { offset_left: initial_offset, offset_right: Vector3::zeros() };
    let (log, _) = run(&cfg).map_err(|f| f.error)?;
    let samples: Vec<(f64, f64)> = log.rows.iter().map(|r| (r.time, r.tracking_error().norm())).collect();
    let floor = 1e-12;
    let pts: Vec<(f64, f64)> = samples.iter().filter(|s| s.1 > floor).map(|&(t, e)| (t, e.ln())).collect();
    let slope = if pts.len() < 2 {
        0.0
    } else {
        let n = pts.len() as f64;
        let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mt) * (p.0 - mt)).sum();
        sxy / sxx
    };
    Ok(DecayEstimate { slope, samples })
}
