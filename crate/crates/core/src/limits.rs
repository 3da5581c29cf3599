//! Time-varying joint limits and their conversion into velocity windows.
//!
//! Physical limits are pulled toward a goal interval by a logistic schedule.
//! A multiplicative safety margin, whose factor depends on the sign of each
//! bound, is carved out of the scheduled interval; once a margined bound
//! reaches its goal value it is held there. The per-tick velocity box combines
//! the joint-rate limits with a `nu`-scaled pull back inside the (margined)
//! position bounds.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::kinematics::{canonical, DualVector, ARM_DOF, DUAL_DOF};

/// Default position-to-velocity scale (1/s).
pub const DEFAULT_NU: f64 = 2.0;
/// Default critical coefficient.
pub const DEFAULT_KAPPA: f64 = 0.85;

#[derive(Debug, Clone, PartialEq)]
pub struct LimitSchedule {
    pub theta_min: DualVector,
    pub theta_max: DualVector,
    pub theta_dot_min: DualVector,
    pub theta_dot_max: DualVector,
    pub goal_min: DualVector,
    pub goal_max: DualVector,
    /// Sigmoid time constant (s).
    pub rho: f64,
    /// Task execution time (s).
    pub task_duration: f64,
    /// Proximity parameter, `>= 1`.
    pub n_param: f64,
    tau: f64,
}

impl LimitSchedule {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        theta_min: DualVector,
        theta_max: DualVector,
        theta_dot_min: DualVector,
        theta_dot_max: DualVector,
        goal_min: DualVector,
        goal_max: DualVector,
        rho: f64,
        task_duration: f64,
        n_param: f64,
    ) -> Result<Self> {
        let schedule = Self {
            theta_min,
            theta_max,
            theta_dot_min,
            theta_dot_max,
            goal_min,
            goal_max,
            rho,
            task_duration,
            n_param,
            tau: task_duration / n_param,
        };
        schedule.validate()?;
        Ok(schedule)
    }

    /// Midpoint of the sigmoid, `task_duration / n_param`.
    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// Same schedule with different sigmoid parameters.
    pub fn with_timing(&self, rho: f64, n_param: f64) -> Result<Self> {
        Self::new(
            self.theta_min,
            self.theta_max,
            self.theta_dot_min,
            self.theta_dot_max,
            self.goal_min,
            self.goal_max,
            rho,
            self.task_duration,
            n_param,
        )
    }

    /// Midpoint of the physical range of every joint.
    pub fn midrange(&self) -> DualVector {
        (self.theta_min + self.theta_max) * 0.5
    }

    fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidSchedule(msg));
        let vectors = [
            &self.theta_min,
            &self.theta_max,
            &self.theta_dot_min,
            &self.theta_dot_max,
            &self.goal_min,
            &self.goal_max,
        ];
        if vectors.iter().any(|v| v.iter().any(|x| !x.is_finite())) {
            return bad("limit vectors must be finite".into());
        }
        for i in 0..DUAL_DOF {
            let j = i + 1;
            if self.theta_min[i] >= self.theta_max[i] {
                return bad(format!("joint {j}: theta_min must be below theta_max"));
            }
            if !(self.theta_dot_min[i] < 0.0 && 0.0 < self.theta_dot_max[i]) {
                return bad(format!("joint {j}: rate limits must straddle zero"));
            }
            if !(self.theta_min[i] <= self.goal_min[i]
                && self.goal_min[i] <= self.goal_max[i]
                && self.goal_max[i] <= self.theta_max[i])
            {
                return bad(format!("joint {j}: goal interval must lie inside the physical limits"));
            }
        }
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            return bad("rho must be positive".into());
        }
        if !(self.task_duration > 0.0 && self.task_duration.is_finite()) {
            return bad("task_duration must be positive".into());
        }
        if !(self.n_param >= 1.0 && self.n_param.is_finite()) {
            return bad("n_param must be at least 1".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarginParams {
    pub kappa: f64,
    pub nu: f64,
}

impl MarginParams {
    pub fn new(kappa: f64, nu: f64) -> Result<Self> {
        if !(kappa > 0.0 && kappa < 1.0) {
            return Err(Error::InvalidMargin(format!("kappa out of (0,1): {kappa}")));
        }
        if !(nu > 0.0 && nu.is_finite()) {
            return Err(Error::InvalidMargin(format!("nu must be positive: {nu}")));
        }
        Ok(Self { kappa, nu })
    }
}

impl Default for MarginParams {
    fn default() -> Self {
        Self { kappa: DEFAULT_KAPPA, nu: DEFAULT_NU }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MarginCase {
    BothPositive,
    Straddling,
    BothNegative,
}

impl MarginCase {
    pub fn name(self) -> &'static str {
        match self {
            MarginCase::BothPositive => "both-positive",
            MarginCase::Straddling => "straddling",
            MarginCase::BothNegative => "both-negative",
        }
    }
}

/// Whether the position bounds carry a margin.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundMode {
    /// Plain schedule, no margin.
    Gddf,
    /// Schedule with sign-cased margins.
    Mgddf,
}

impl BoundMode {
    pub fn name(self) -> &'static str {
        match self {
            BoundMode::Gddf => "gddf",
            BoundMode::Mgddf => "mgddf",
        }
    }
}

/// Per-tick velocity box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VelocityWindow {
    pub lower: DualVector,
    pub upper: DualVector,
}

impl VelocityWindow {
    /// First joint (0-based) whose window is inverted.
    pub fn first_inverted(&self) -> Option<usize> {
        (0..DUAL_DOF).find(|&i| self.lower[i] > self.upper[i])
    }

    pub fn contains(&self, rates: &DualVector) -> bool {
        (0..DUAL_DOF).all(|i| self.lower[i] <= rates[i] && rates[i] <= self.upper[i])
    }
}

/// Scheduled and margined position bounds at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScheduledBounds {
    pub lower: DualVector,
    pub upper: DualVector,
    pub margin_lower: DualVector,
    pub margin_upper: DualVector,
}

/// Logistic blend factor `1 / (1 + exp(-(t - tau)/rho))`.
pub fn sigmoid(schedule: &LimitSchedule, t: f64) -> f64 {
    1.0 / (1.0 + (-(t - schedule.tau) / schedule.rho).exp())
}

/// Raw scheduled bounds `theta +- delta * sigmoid(t)`, without holds.
pub fn gddf_bound(schedule: &LimitSchedule, t: f64) -> (DualVector, DualVector) {
    let s = sigmoid(schedule, t);
    let lower = schedule.theta_min + (schedule.goal_min - schedule.theta_min) * s;
    let upper = schedule.theta_max + (schedule.goal_max - schedule.theta_max) * s;
    (lower, upper)
}

pub fn classify_case(theta_min: f64, theta_max: f64) -> Result<MarginCase> {
    if theta_min == 0.0 || theta_max == 0.0 {
        return Err(Error::DegenerateBound { lo: theta_min, hi: theta_max });
    }
    Ok(match (theta_min > 0.0, theta_max > 0.0) {
        (true, true) => MarginCase::BothPositive,
        (false, true) => MarginCase::Straddling,
        (false, false) => MarginCase::BothNegative,
        // lower above zero with upper below zero means lo > hi
        (true, false) => return Err(Error::CaseMismatch { case: "none", lo: theta_min, hi: theta_max }),
    })
}

/// Classification that tolerates one zero bound by using its partner's sign.
pub fn classify_case_lenient(theta_min: f64, theta_max: f64) -> Result<MarginCase> {
    match (theta_min == 0.0, theta_max == 0.0) {
        (false, false) => classify_case(theta_min, theta_max),
        (true, false) if theta_max > 0.0 => Ok(MarginCase::BothPositive),
        (false, true) if theta_min < 0.0 => Ok(MarginCase::BothNegative),
        _ => Err(Error::DegenerateBound { lo: theta_min, hi: theta_max }),
    }
}

/// Factor applied to an upper bound: `kappa` above zero, `2 - kappa` below.
fn upper_factor(bound: f64, kappa: f64) -> f64 {
    if bound > 0.0 {
        kappa
    } else {
        2.0 - kappa
    }
}

/// Factor applied to a lower bound: `2 - kappa` above zero, `kappa` below.
fn lower_factor(bound: f64, kappa: f64) -> f64 {
    if bound > 0.0 {
        2.0 - kappa
    } else {
        kappa
    }
}

/// Margined interval for bounds `lo < hi`. A bound that is exactly zero is
/// inset additively by `(1 - kappa) * (hi - lo)`.
fn margined(lo: f64, hi: f64, kappa: f64) -> (f64, f64) {
    let inset = (1.0 - kappa) * (hi - lo);
    let m_lo = if lo == 0.0 { inset } else { lower_factor(lo, kappa) * lo };
    let m_hi = if hi == 0.0 { -inset } else { upper_factor(hi, kappa) * hi };
    (m_lo, m_hi)
}

/// Critical-region boundaries for one joint:
/// both positive `((2-k) lo, k hi)`, straddling `(k lo, k hi)`,
/// both negative `(k lo, (2-k) hi)`.
pub fn margin_region(case: MarginCase, lo: f64, hi: f64, kappa: f64) -> Result<(f64, f64)> {
    if !(kappa > 0.0 && kappa < 1.0) {
        return Err(Error::InvalidMargin(format!("kappa out of (0,1): {kappa}")));
    }
    let actual = classify_case_lenient(lo, hi)?;
    if actual != case || lo >= hi {
        return Err(Error::CaseMismatch { case: case.name(), lo, hi });
    }
    Ok(margined(lo, hi, kappa))
}

/// Scheduled bounds with the hold rules applied, plus the margined bounds.
///
/// A margined bound that starts outside its nonzero goal value is held at the goal
/// from the first instant it reaches it; the raw bound is held at the value
/// whose margin equals the goal (`goal / kappa` or `goal / (2 - kappa)`,
/// depending on sign). With `kappa = 1` the margin coincides with the raw
/// bound, which is the plain-schedule baseline.
pub fn clamp_scheduled_bounds(schedule: &LimitSchedule, t: f64, kappa: f64) -> ScheduledBounds {
    let (set_lo, set_hi) = gddf_bound(schedule, t);
    let mut out = ScheduledBounds {
        lower: set_lo,
        upper: set_hi,
        margin_lower: DualVector::zeros(),
        margin_upper: DualVector::zeros(),
    };
    for i in 0..DUAL_DOF {
        let (m_lo, m_hi) = margined(set_lo[i], set_hi[i], kappa);
        out.margin_lower[i] = m_lo;
        out.margin_upper[i] = m_hi;

        let goal_hi = schedule.goal_max[i];
        let start_hi = margined(schedule.theta_min[i], schedule.theta_max[i], kappa).1;
        if goal_hi != 0.0 && start_hi > goal_hi && m_hi <= goal_hi {
            out.margin_upper[i] = goal_hi;
            out.upper[i] = goal_hi / upper_factor(goal_hi, kappa);
        }

        let goal_lo = schedule.goal_min[i];
        let start_lo = margined(schedule.theta_min[i], schedule.theta_max[i], kappa).0;
        if goal_lo != 0.0 && start_lo < goal_lo && m_lo >= goal_lo {
            out.margin_lower[i] = goal_lo;
            out.lower[i] = goal_lo / lower_factor(goal_lo, kappa);
        }
    }
    out
}

/// Effective critical coefficient for a bound mode.
pub fn mode_kappa(mode: BoundMode, margins: &MarginParams) -> f64 {
    match mode {
        BoundMode::Gddf => 1.0,
        BoundMode::Mgddf => margins.kappa,
    }
}

/// Velocity box from already-scheduled bounds: the rate limits intersected
/// with `nu * (bound - theta)` on each side.
pub fn window_from_bounds(
    theta: &DualVector,
    schedule: &LimitSchedule,
    nu: f64,
    margin_lower: &DualVector,
    margin_upper: &DualVector,
) -> VelocityWindow {
    let lower = DualVector::from_fn(|i, _| {
        schedule.theta_dot_min[i].max(nu * (margin_lower[i] - theta[i]))
    });
    let upper = DualVector::from_fn(|i, _| {
        schedule.theta_dot_max[i].min(nu * (margin_upper[i] - theta[i]))
    });
    VelocityWindow { lower, upper }
}

/// Velocity window at time `t`; an inverted window is returned as is.
pub fn velocity_window(
    theta: &DualVector,
    schedule: &LimitSchedule,
    margins: &MarginParams,
    t: f64,
    mode: BoundMode,
) -> VelocityWindow {
    let bounds = clamp_scheduled_bounds(schedule, t, mode_kappa(mode, margins));
    window_from_bounds(theta, schedule, margins.nu, &bounds.margin_lower, &bounds.margin_upper)
}

/// Named limit presets.
pub mod presets {
    use super::*;

    const DEG: f64 = PI / 180.0;

    /// Goal vectors of both arms in the dual-arm experiment:
    /// `(left_min, left_max, right_min, right_max)`.
    pub fn goal_vectors() -> ([f64; ARM_DOF], [f64; ARM_DOF], [f64; ARM_DOF], [f64; ARM_DOF]) {
        (
            [0.0, -54.0 * PI / 180.0, -10.5 * PI / 180.0, 0.0, -131.0 * PI / 180.0, PI / 3.0, 55.0 * PI / 180.0],
            [9.0 * PI / 180.0, 18.0 * PI / 180.0, 22.5 * PI / 180.0, PI / 2.0, 0.0, PI / 3.0, 55.0 * PI / 180.0],
            [-9.0 * PI / 180.0, -18.0 * PI / 180.0, -22.5 * PI / 180.0, PI / 2.0, -131.0 * PI / 180.0, PI / 3.0, -25.0 * PI / 36.0],
            [0.0, 54.0 * PI / 180.0, 10.5 * PI / 180.0, PI, 0.0, PI / 3.0, -25.0 * PI / 36.0],
        )
    }

    /// Physical limits of the canonical left arm (degrees). The right arm
    /// uses the mirror image under [`canonical::mirror_map`].
    pub const LEFT_LIMITS_DEG: [(f64, f64); ARM_DOF] = [
        (-40.5, 49.5),
        (-108.0, 72.0),
        (-84.0, 96.0),
        (-10.0, 100.0),
        (-150.0, 19.0),
        (10.0, 150.0),
        (5.0, 145.0),
    ];

    /// Joint-rate limit magnitude (rad/s) of every joint.
    pub const RATE_LIMIT: f64 = 2.0;

    pub fn physical_limits() -> (DualVector, DualVector) {
        let map = canonical::mirror_map();
        let mut lo = DualVector::zeros();
        let mut hi = DualVector::zeros();
        for (i, &(a, b)) in LEFT_LIMITS_DEG.iter().enumerate() {
            lo[i] = a * DEG;
            hi[i] = b * DEG;
            let (ra, rb) = map.apply_interval(i, lo[i], hi[i]);
            lo[i + ARM_DOF] = ra;
            hi[i + ARM_DOF] = rb;
        }
        (lo, hi)
    }

    /// Schedule of the dual-arm experiment for the given sigmoid timing.
    pub fn shrinking_limits(rho: f64, n_param: f64) -> LimitSchedule {
        let (theta_min, theta_max) = physical_limits();
        let (gl_lo, gl_hi, gr_lo, gr_hi) = goal_vectors();
        let join = |l: [f64; ARM_DOF], r: [f64; ARM_DOF]| {
            DualVector::from_fn(|i, _| if i < ARM_DOF { l[i] } else { r[i - ARM_DOF] })
        };
        LimitSchedule::new(
            theta_min,
            theta_max,
            DualVector::repeat(-RATE_LIMIT),
            DualVector::repeat(RATE_LIMIT),
            join(gl_lo, gr_lo),
            join(gl_hi, gr_hi),
            rho,
            18.0,
            n_param,
        )
        .expect("preset schedule is valid")
    }

    /// Physical limits with goals equal to the limits: nothing moves.
    pub fn static_limits(task_duration: f64) -> LimitSchedule {
        let (theta_min, theta_max) = physical_limits();
        LimitSchedule::new(
            theta_min,
            theta_max,
            DualVector::repeat(-RATE_LIMIT),
            DualVector::repeat(RATE_LIMIT),
            theta_min,
            theta_max,
            2.0,
            task_duration,
            1.0,
        )
        .expect("preset schedule is valid")
    }
}
