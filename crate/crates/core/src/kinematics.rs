//! Forward kinematics and positional Jacobians for a pair of 7-DOF arms.
//!
//! Each arm is a serial chain of revolute joints. A joint is described by the
//! translation from the previous joint frame to its own origin, the rotation
//! axis expressed in that frame, and a constant angle offset added to the
//! commanded angle. All joint frames coincide in orientation with the shoulder
//! frame when every effective angle is zero. The torso frame has `x` pointing
//! forward, `y` to the robot's left and `z` up; the sagittal plane is `y = 0`.

use nalgebra::{Isometry3, Matrix3, SMatrix, SVector, Unit, UnitQuaternion, Vector3};

use crate::error::{Error, Result};

/// Joints per arm.
pub const ARM_DOF: usize = 7;
/// Joints of the dual-arm system.
pub const DUAL_DOF: usize = 2 * ARM_DOF;
/// Tracked task coordinates per arm (end-effector position only).
pub const TASK_DIM: usize = 3;
/// Tracked task coordinates of the dual-arm system.
pub const DUAL_TASK_DIM: usize = 2 * TASK_DIM;

pub type ArmVector = SVector<f64, ARM_DOF>;
pub type DualVector = SVector<f64, DUAL_DOF>;
pub type TaskVector = SVector<f64, DUAL_TASK_DIM>;
pub type ArmJacobian = SMatrix<f64, TASK_DIM, ARM_DOF>;
pub type DualJacobian = SMatrix<f64, DUAL_TASK_DIM, DUAL_DOF>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub fn name(self) -> &'static str {
        match self {
            Side::Left => "left",
            Side::Right => "right",
        }
    }
}

/// Geometry of one revolute joint.
#[derive(Debug, Clone, PartialEq)]
pub struct JointParams {
    /// Translation from the previous frame (meters).
    pub origin: Vector3<f64>,
    /// Rotation axis in the previous frame.
    pub axis: Unit<Vector3<f64>>,
    /// Added to the commanded angle (radians).
    pub angle_offset: f64,
}

/// One 7-DOF serial arm.
#[derive(Debug, Clone, PartialEq)]
pub struct ArmModel {
    side: Side,
    base: Isometry3<f64>,
    joints: Vec<JointParams>,
    tool: Vector3<f64>,
}

impl ArmModel {
    pub fn new(
        side: Side,
        base: Isometry3<f64>,
        joints: Vec<JointParams>,
        tool: Vector3<f64>,
    ) -> Result<Self> {
        if joints.len() != ARM_DOF {
            return Err(Error::InvalidArm(format!(
                "{} arm has {} joints, expected {ARM_DOF}",
                side.name(),
                joints.len()
            )));
        }
        let finite = |v: &Vector3<f64>| v.iter().all(|x| x.is_finite());
        for (i, j) in joints.iter().enumerate() {
            if !finite(&j.origin) || !finite(&j.axis) || !j.angle_offset.is_finite() {
                return Err(Error::InvalidArm(format!("joint {} is not finite", i + 1)));
            }
        }
        if !finite(&base.translation.vector) || !finite(&tool) {
            return Err(Error::InvalidArm("base or tool is not finite".into()));
        }
        // The chain needs a nonzero upper arm, forearm and hand; anything else
        // collapses the positional workspace.
        let segment_lengths = [
            joints[1..4].iter().map(|j| j.origin.norm()).sum::<f64>(),
            joints[4..].iter().map(|j| j.origin.norm()).sum::<f64>(),
            tool.norm(),
        ];
        if segment_lengths.iter().any(|&l| l <= 0.0) {
            return Err(Error::InvalidArm(format!(
                "{} arm has a zero-length segment (upper arm, forearm, hand) = {segment_lengths:?}",
                side.name()
            )));
        }
        Ok(Self { side, base, joints, tool })
    }

    pub fn side(&self) -> Side {
        self.side
    }

    pub fn base(&self) -> &Isometry3<f64> {
        &self.base
    }

    pub fn joints(&self) -> &[JointParams] {
        &self.joints
    }

    pub fn tool(&self) -> &Vector3<f64> {
        &self.tool
    }

    /// Reflects the chain across the sagittal plane.
    ///
    /// The returned model satisfies
    /// `forward_position(mirrored, map.apply(q)) == reflect(forward_position(self, q))`.
    pub fn mirrored(&self, map: &MirrorMap) -> ArmModel {
        let s = sagittal_reflection();
        let t = s * self.base.translation.vector;
        let r = s * self.base.rotation.to_rotation_matrix().into_inner() * s;
        let base = Isometry3::from_parts(
            t.into(),
            UnitQuaternion::from_matrix(&r),
        );
        let joints = self
            .joints
            .iter()
            .enumerate()
            .map(|(i, j)| {
                let sign = map.sign[i];
                // An axis is a pseudovector: reflecting it flips its sense, so a
                // joint whose angle keeps its sign needs the negated image.
                let axis = if sign < 0.0 { s * j.axis.into_inner() } else { -(s * j.axis.into_inner()) };
                JointParams {
                    origin: s * j.origin,
                    axis: Unit::new_normalize(axis),
                    angle_offset: sign * j.angle_offset - map.shift[i],
                }
            })
            .collect();
        ArmModel {
            side: match self.side {
                Side::Left => Side::Right,
                Side::Right => Side::Left,
            },
            base,
            joints,
            tool: s * self.tool,
        }
    }

    /// Joint origins and world-frame axes at `q`, plus the end-effector point.
    fn frames(&self, q: &ArmVector) -> ([Vector3<f64>; ARM_DOF], [Vector3<f64>; ARM_DOF], Vector3<f64>) {
        let mut rot: Matrix3<f64> = self.base.rotation.to_rotation_matrix().into_inner();
        let mut pos = self.base.translation.vector;
        let mut origins = [Vector3::zeros(); ARM_DOF];
        let mut axes = [Vector3::zeros(); ARM_DOF];
        for (i, joint) in self.joints.iter().enumerate() {
            pos += rot * joint.origin;
            origins[i] = pos;
            axes[i] = rot * joint.axis.into_inner();
            let local = nalgebra::Rotation3::from_axis_angle(&joint.axis, q[i] + joint.angle_offset);
            rot *= local.matrix();
        }
        let tip = pos + rot * self.tool;
        (origins, axes, tip)
    }
}

/// Maps a left-arm configuration onto the mirror-image right-arm
/// configuration: `q_right[i] = sign[i] * q_left[i] + shift[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MirrorMap {
    pub sign: [f64; ARM_DOF],
    pub shift: [f64; ARM_DOF],
}

impl MirrorMap {
    pub fn apply(&self, q: &ArmVector) -> ArmVector {
        ArmVector::from_fn(|i, _| self.sign[i] * q[i] + self.shift[i])
    }

    /// Applies the map to a (lower, upper) interval, keeping the ordering.
    pub fn apply_interval(&self, i: usize, lo: f64, hi: f64) -> (f64, f64) {
        let a = self.sign[i] * lo + self.shift[i];
        let b = self.sign[i] * hi + self.shift[i];
        (a.min(b), a.max(b))
    }
}

/// Reflection across the torso sagittal plane (`y -> -y`).
pub fn sagittal_reflection() -> Matrix3<f64> {
    Matrix3::from_diagonal(&Vector3::new(1.0, -1.0, 1.0))
}

/// Joint angles of one arm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointVector {
    pub side: Side,
    pub values: ArmVector,
}

impl JointVector {
    pub fn new(side: Side, values: ArmVector) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArm(format!("{} joint vector is not finite", side.name())));
        }
        Ok(Self { side, values })
    }
}

/// Joint angles and rates of both arms, left joints first.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualJointState {
    pub theta: DualVector,
    pub theta_dot: DualVector,
}

impl DualJointState {
    pub fn at_rest(theta: DualVector) -> Self {
        Self { theta, theta_dot: DualVector::zeros() }
    }

    pub fn left(&self) -> ArmVector {
        self.theta.fixed_rows::<ARM_DOF>(0).into_owned()
    }

    pub fn right(&self) -> ArmVector {
        self.theta.fixed_rows::<ARM_DOF>(ARM_DOF).into_owned()
    }
}

pub fn join_arms(left: &ArmVector, right: &ArmVector) -> DualVector {
    DualVector::from_fn(|i, _| if i < ARM_DOF { left[i] } else { right[i - ARM_DOF] })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EndEffectorState {
    pub position: Vector3<f64>,
    pub velocity: Vector3<f64>,
}

/// End-effector position in the torso frame.
pub fn forward_position(arm: &ArmModel, q: &ArmVector) -> Vector3<f64> {
    arm.frames(q).2
}

/// Positional Jacobian: column `i` is `axis_i x (tip - origin_i)`.
pub fn jacobian(arm: &ArmModel, q: &ArmVector) -> ArmJacobian {
    let (origins, axes, tip) = arm.frames(q);
    let mut jac = ArmJacobian::zeros();
    for i in 0..ARM_DOF {
        jac.set_column(i, &axes[i].cross(&(tip - origins[i])));
    }
    jac
}

/// Position and velocity of one end effector.
pub fn end_effector_state(arm: &ArmModel, q: &ArmVector, q_dot: &ArmVector) -> EndEffectorState {
    let (origins, axes, tip) = arm.frames(q);
    let mut velocity = Vector3::zeros();
    for i in 0..ARM_DOF {
        velocity += axes[i].cross(&(tip - origins[i])) * q_dot[i];
    }
    EndEffectorState { position: tip, velocity }
}

/// Both arms of the robot.
#[derive(Debug, Clone, PartialEq)]
pub struct DualArm {
    pub left: ArmModel,
    pub right: ArmModel,
}

impl DualArm {
    pub fn new(left: ArmModel, right: ArmModel) -> Result<Self> {
        if left.side() != Side::Left || right.side() != Side::Right {
            return Err(Error::InvalidArm("arm sides are swapped".into()));
        }
        Ok(Self { left, right })
    }

    /// The canonical model shipped with the crate.
    pub fn canonical() -> Self {
        canonical::dual_arm()
    }

    /// Stacked end-effector positions `[p_left; p_right]`.
    pub fn forward_positions(&self, theta: &DualVector) -> TaskVector {
        let state = DualJointState::at_rest(*theta);
        let pl = forward_position(&self.left, &state.left());
        let pr = forward_position(&self.right, &state.right());
        TaskVector::new(pl.x, pl.y, pl.z, pr.x, pr.y, pr.z)
    }
}

/// Block-diagonal dual-arm Jacobian `[J_L, 0; 0, J_R]`.
pub fn dual_jacobian(left: &ArmModel, right: &ArmModel, state: &DualJointState) -> DualJacobian {
    let mut jac = DualJacobian::zeros();
    jac.fixed_view_mut::<TASK_DIM, ARM_DOF>(0, 0)
        .copy_from(&jacobian(left, &state.left()));
    jac.fixed_view_mut::<TASK_DIM, ARM_DOF>(TASK_DIM, ARM_DOF)
        .copy_from(&jacobian(right, &state.right()));
    jac
}

/// The versioned arm table shipped with the crate.
pub mod canonical {
    use std::f64::consts::{FRAC_PI_2, PI};
    use std::sync::OnceLock;

    use super::*;

    /// Embedded table text; the same format as the `[arm.*]` config sections.
    pub const TABLE: &str = include_str!("../data/arm-v1.ini");
    pub const VERSION: &str = "arm-v1";

    /// Right-arm joints 1-3 turn the opposite way; joint 4 is zeroed a quarter
    /// turn later and joint 7 half a turn earlier than on the left arm.
    pub fn mirror_map() -> MirrorMap {
        MirrorMap {
            sign: [-1.0, -1.0, -1.0, 1.0, 1.0, 1.0, 1.0],
            shift: [0.0, 0.0, 0.0, FRAC_PI_2, 0.0, 0.0, -PI],
        }
    }

    pub fn dual_arm() -> DualArm {
        static MODEL: OnceLock<DualArm> = OnceLock::new();
        MODEL
            .get_or_init(|| {
                crate::config::parse_arm_table(TABLE).expect("embedded arm table is valid")
            })
            .clone()
    }

    pub fn left() -> ArmModel {
        dual_arm().left
    }

    pub fn right() -> ArmModel {
        dual_arm().right
    }
}

#[cfg(test)]
mod tests {
    use approx::assert_relative_eq;

    use super::*;

    fn central_difference(arm: &ArmModel, q: &ArmVector, h: f64) -> ArmJacobian {
        let mut jac = ArmJacobian::zeros();
        for i in 0..ARM_DOF {
            let mut plus = *q;
            let mut minus = *q;
            plus[i] += h;
            minus[i] -= h;
            let col = (forward_position(arm, &plus) - forward_position(arm, &minus)) / (2.0 * h);
            jac.set_column(i, &col);
        }
        jac
    }

    #[test]
    fn left_home_position_is_frozen() {
        // Straight arm hanging below the left shoulder: 0.30 + 0.25 + 0.08 m.
        let p = forward_position(&canonical::left(), &ArmVector::zeros());
        assert_relative_eq!(p, Vector3::new(0.0, 0.2, -0.63), epsilon = 1e-15);
    }

    #[test]
    fn right_home_is_mirror_of_left_home() {
        let map = canonical::mirror_map();
        let q = ArmVector::zeros();
        let pl = forward_position(&canonical::left(), &q);
        let pr = forward_position(&canonical::right(), &map.apply(&q));
        assert_relative_eq!(pr, sagittal_reflection() * pl, epsilon = 1e-14);
    }

    #[test]
    fn first_order_displacement_matches_jacobian() {
        let arm = canonical::left();
        let q = ArmVector::from_column_slice(&[0.1, -0.3, 0.1, 0.8, -1.1, 1.4, 1.3]);
        let mut dq = ArmVector::zeros();
        dq[0] = 1e-6;
        let moved = forward_position(&arm, &(q + dq)) - forward_position(&arm, &q);
        let predicted = jacobian(&arm, &q) * dq;
        assert!((moved - predicted).norm() < 1e-11);
    }

    #[test]
    fn axes_through_the_tip_have_zero_columns_at_home() {
        // Joints 3, 5 and 7 all spin about the vertical line through the hand.
        let jac = jacobian(&canonical::left(), &ArmVector::zeros());
        for col in [2, 4, 6] {
            assert!(jac.column(col).norm() < 1e-15, "column {col}");
        }
        assert!(jac.column(0).norm() > 0.1);
    }

    #[test]
    fn wrist_roll_never_moves_the_tip() {
        let q = ArmVector::from_column_slice(&[0.4, 0.2, -0.5, 1.0, 0.3, 0.9, -2.0]);
        let jac = jacobian(&canonical::left(), &q);
        assert!(jac.column(6).norm() < 1e-15);
    }

    #[test]
    fn mirrored_jacobians_are_reflected() {
        let map = canonical::mirror_map();
        let q = ArmVector::from_column_slice(&[0.2, -0.4, 0.3, 0.9, -1.0, 1.2, 0.7]);
        let jl = jacobian(&canonical::left(), &q);
        let jr = jacobian(&canonical::right(), &map.apply(&q));
        let sign = ArmVector::from_column_slice(&map.sign);
        // dq_right = sign .* dq_left, so J_R * diag(sign) = S * J_L.
        let lhs = jr * nalgebra::SMatrix::<f64, ARM_DOF, ARM_DOF>::from_diagonal(&sign);
        assert_relative_eq!(lhs, sagittal_reflection() * jl, epsilon = 1e-14);
    }

    #[test]
    fn canonical_right_is_the_mirrored_left() {
        let left = canonical::left();
        let right = canonical::right();
        let mirrored = left.mirrored(&canonical::mirror_map());
        assert_eq!(mirrored.side(), Side::Right);
        for (a, b) in mirrored.joints().iter().zip(right.joints()) {
            assert_relative_eq!(a.origin, b.origin, epsilon = 1e-15);
            assert_relative_eq!(a.axis.into_inner(), b.axis.into_inner(), epsilon = 1e-15);
            assert_relative_eq!(a.angle_offset, b.angle_offset, epsilon = 1e-15);
        }
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let arm = canonical::right();
        let q = ArmVector::from_column_slice(&[-0.3, 0.5, -0.2, 2.1, -0.7, 1.1, -2.2]);
        let err = (jacobian(&arm, &q) - central_difference(&arm, &q, 1e-5)).amax();
        assert!(err < 1e-6, "{err}");
    }

    #[test]
    fn dual_jacobian_is_block_diagonal() {
        let dual = DualArm::canonical();
        let theta = DualVector::from_fn(|i, _| 0.1 * i as f64 - 0.5);
        let state = DualJointState::at_rest(theta);
        let jac = dual_jacobian(&dual.left, &dual.right, &state);
        assert!(jac.fixed_view::<3, 7>(0, 7).iter().all(|&x| x == 0.0));
        assert!(jac.fixed_view::<3, 7>(3, 0).iter().all(|&x| x == 0.0));
        assert_eq!(jac.fixed_view::<3, 7>(0, 0).into_owned(), jacobian(&dual.left, &state.left()));
        assert_eq!(jac.fixed_view::<3, 7>(3, 7).into_owned(), jacobian(&dual.right, &state.right()));
    }

    #[test]
    fn dual_jacobian_times_rates_stacks_arm_velocities() {
        let dual = DualArm::canonical();
        let theta = DualVector::from_fn(|i, _| (0.37 * i as f64).sin());
        let rates = DualVector::from_fn(|i, _| (1.3 * i as f64).cos());
        let state = DualJointState { theta, theta_dot: rates };
        let stacked = dual_jacobian(&dual.left, &dual.right, &state) * rates;
        let vl = end_effector_state(&dual.left, &state.left(), &rates.fixed_rows::<7>(0).into_owned()).velocity;
        let vr = end_effector_state(&dual.right, &state.right(), &rates.fixed_rows::<7>(7).into_owned()).velocity;
        assert_relative_eq!(stacked, TaskVector::new(vl.x, vl.y, vl.z, vr.x, vr.y, vr.z), epsilon = 1e-14);
    }

    #[test]
    fn rejects_wrong_joint_count() {
        let left = canonical::left();
        let joints = left.joints()[..6].to_vec();
        let err = ArmModel::new(Side::Left, *left.base(), joints, *left.tool()).unwrap_err();
        assert!(matches!(err, Error::InvalidArm(_)));
    }

    #[test]
    fn rejects_zero_hand() {
        let left = canonical::left();
        let err = ArmModel::new(Side::Left, *left.base(), left.joints().to_vec(), Vector3::zeros())
            .unwrap_err();
        assert!(matches!(err, Error::InvalidArm(_)));
    }
}
