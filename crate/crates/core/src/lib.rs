//! Dual-arm redundancy resolution under time-varying joint limits.
//!
//! The crate is organised along the control loop:
//!
//! - [`kinematics`]: forward kinematics and Jacobians of the two 7-DOF arms,
//! - [`limits`]: scheduled joint limits, margins and the per-tick velocity window,
//! - [`qp`]: assembly of the per-tick quadratic program,
//! - [`solvers`]: projection and dynamic-system solvers plus an exact oracle,
//! - [`simulation`]: closed-loop stepping, logging and violation reports,
//! - [`config`]: INI configuration and named presets.

// `!(x > 0.0)` style checks are meant to reject NaN too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod kinematics;
pub mod limits;
pub mod qp;
pub mod simulation;
pub mod solvers;

pub use error::{Error, Result};
pub use kinematics::{
    dual_jacobian, forward_position, jacobian, ArmModel, DualArm, DualJointState, DualVector, Side,
    TaskVector, ARM_DOF, DUAL_DOF,
};
pub use limits::{BoundMode, LimitSchedule, MarginParams, VelocityWindow};
pub use qp::{FeedbackGain, QpProblem, SchemeKind, TaskReference};
pub use simulation::{run, SimConfig, SimLog, SolverChoice, TaskSpec, ViolationReport};
pub use solvers::{dyn_solve, lvi_solve, reference_solve, DynConfig, LviConfig, PrimalDual, SolveReport};
