//! Per-tick quadratic program
//!
//! ```text
//!     minimize    1/2 x' M x + c' x
//!     subject to  J(theta) x = v_ref + K (p_ref - fk(theta))
//!                 lower <= x <= upper
//! ```
//!
//! over joint velocities `x`, where `(M, c)` come from the redundancy
//! resolution scheme and the box is the velocity window.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector, SMatrix, Vector3};

use crate::error::{Error, Result};
use crate::kinematics::{
    dual_jacobian, DualArm, DualJointState, DualVector, TaskVector, ARM_DOF, DUAL_DOF,
};
use crate::limits::VelocityWindow;

pub type ArmInertia = SMatrix<f64, ARM_DOF, ARM_DOF>;

/// Redundancy-resolution scheme, selecting `(M, c)`.
#[derive(Debug, Clone, PartialEq)]
#[allow(clippy::large_enum_variant)]
pub enum SchemeKind {
    /// Minimum kinetic energy: `M = blockdiag(inertia_left, inertia_right)`, `c = 0`.
    Mke { inertia_left: ArmInertia, inertia_right: ArmInertia },
    /// Repetitive motion: `M = I`, `c = lambda (theta - theta_zero)`.
    Rmp { lambda: f64, theta_zero: DualVector },
    /// Minimum velocity norm: `M = I`, `c = 0`.
    Mvn,
}

impl SchemeKind {
    pub fn name(&self) -> &'static str {
        match self {
            SchemeKind::Mke { .. } => "mke",
            SchemeKind::Rmp { .. } => "rmp",
            SchemeKind::Mvn => "mvn",
        }
    }

    pub fn mke_identity() -> Self {
        SchemeKind::Mke { inertia_left: ArmInertia::identity(), inertia_right: ArmInertia::identity() }
    }
}

/// Diagonal position-error feedback gains (1/s).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeedbackGain {
    pub gain_left: Vector3<f64>,
    pub gain_right: Vector3<f64>,
}

impl FeedbackGain {
    pub fn new(gain_left: Vector3<f64>, gain_right: Vector3<f64>) -> Result<Self> {
        let ok = |v: &Vector3<f64>| v.iter().all(|&g| g >= 0.0 && g.is_finite());
        if !ok(&gain_left) || !ok(&gain_right) {
            return Err(Error::InvalidConfig("feedback gains must be finite and non-negative".into()));
        }
        Ok(Self { gain_left, gain_right })
    }

    pub fn uniform(gain: f64) -> Result<Self> {
        Self::new(Vector3::repeat(gain), Vector3::repeat(gain))
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(self.gain_left * factor, self.gain_right * factor)
    }

    fn stacked(&self) -> TaskVector {
        TaskVector::new(
            self.gain_left.x,
            self.gain_left.y,
            self.gain_left.z,
            self.gain_right.x,
            self.gain_right.y,
            self.gain_right.z,
        )
    }
}

/// Desired end-effector positions and velocities of both hands.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TaskReference {
    pub desired_position_left: Vector3<f64>,
    pub desired_position_right: Vector3<f64>,
    pub desired_velocity_left: Vector3<f64>,
    pub desired_velocity_right: Vector3<f64>,
}

impl TaskReference {
    pub fn stationary(left: Vector3<f64>, right: Vector3<f64>) -> Self {
        Self {
            desired_position_left: left,
            desired_position_right: right,
            desired_velocity_left: Vector3::zeros(),
            desired_velocity_right: Vector3::zeros(),
        }
    }

    pub fn positions(&self) -> TaskVector {
        stack(&self.desired_position_left, &self.desired_position_right)
    }

    pub fn velocities(&self) -> TaskVector {
        stack(&self.desired_velocity_left, &self.desired_velocity_right)
    }
}

fn stack(a: &Vector3<f64>, b: &Vector3<f64>) -> TaskVector {
    TaskVector::new(a.x, a.y, a.z, b.x, b.y, b.z)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Objective {
    pub m: DMatrix<f64>,
    pub c: DVector<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Equality {
    pub matrix: DMatrix<f64>,
    pub rhs: DVector<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoxBounds {
    pub lower: DVector<f64>,
    pub upper: DVector<f64>,
}

impl From<&VelocityWindow> for BoxBounds {
    fn from(w: &VelocityWindow) -> Self {
        Self {
            lower: DVector::from_column_slice(w.lower.as_slice()),
            upper: DVector::from_column_slice(w.upper.as_slice()),
        }
    }
}

/// One assembled instance.
#[derive(Debug, Clone, PartialEq)]
pub struct QpProblem {
    pub m_matrix: DMatrix<f64>,
    pub c_vector: DVector<f64>,
    pub eq_matrix: DMatrix<f64>,
    pub eq_rhs: DVector<f64>,
    pub box_lower: DVector<f64>,
    pub box_upper: DVector<f64>,
    /// Some lower bound exceeds its upper bound.
    pub infeasible_box: bool,
}

impl QpProblem {
    /// Number of decision variables.
    pub fn primal_dim(&self) -> usize {
        self.c_vector.len()
    }

    /// Number of equality rows.
    pub fn dual_dim(&self) -> usize {
        self.eq_rhs.len()
    }

    pub fn objective_value(&self, x: &DVector<f64>) -> f64 {
        0.5 * x.dot(&(&self.m_matrix * x)) + self.c_vector.dot(x)
    }

    /// Row-major text dump with labeled sections; numbers keep full precision.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# qp n={} m={}", self.primal_dim(), self.dual_dim());
        let mut matrix = |name: &str, m: &DMatrix<f64>| {
            let _ = writeln!(out, "[{name}] {}x{}", m.nrows(), m.ncols());
            for r in 0..m.nrows() {
                let row: Vec<String> = (0..m.ncols()).map(|c| format!("{:e}", m[(r, c)])).collect();
                let _ = writeln!(out, "{}", row.join(" "));
            }
        };
        matrix("M", &self.m_matrix);
        matrix("J", &self.eq_matrix);
        for (name, v) in [
            ("c", &self.c_vector),
            ("b", &self.eq_rhs),
            ("lower", &self.box_lower),
            ("upper", &self.box_upper),
        ] {
            let _ = writeln!(out, "[{name}] {}", v.len());
            let row: Vec<String> = v.iter().map(|x| format!("{x:e}")).collect();
            let _ = writeln!(out, "{}", row.join(" "));
        }
        let _ = writeln!(out, "[infeasible_box] {}", self.infeasible_box);
        out
    }

    /// Parses the output of [`QpProblem::dump`].
    pub fn from_dump(text: &str) -> Result<Self> {
        let bad = |msg: &str| Error::Assembly(format!("dump: {msg}"));
        let mut sections: Vec<(String, Vec<f64>, usize, usize)> = Vec::new();
        let mut infeasible = false;
        let mut it = text.lines().filter(|l| !l.trim().is_empty() && !l.starts_with('#')).peekable();
        while let Some(line) = it.next() {
            let line = line.trim();
            let (name, shape) = line
                .strip_prefix('[')
                .and_then(|rest| rest.split_once(']'))
                .ok_or_else(|| bad("expected section header"))?;
            let shape = shape.trim();
            if name == "infeasible_box" {
                infeasible = shape == "true";
                continue;
            }
            let (rows, cols) = match shape.split_once('x') {
                Some((r, c)) => (
                    r.parse::<usize>().map_err(|_| bad("shape"))?,
                    c.parse::<usize>().map_err(|_| bad("shape"))?,
                ),
                None => (1, shape.parse::<usize>().map_err(|_| bad("shape"))?),
            };
            let data_rows = if shape.contains('x') { rows } else { 1 };
            let mut vals = Vec::with_capacity(rows * cols);
            for _ in 0..data_rows {
                let row = it.next().ok_or_else(|| bad("truncated"))?;
                for tok in row.split_whitespace() {
                    vals.push(tok.parse::<f64>().map_err(|_| bad("bad number"))?);
                }
            }
            if vals.len() != rows * cols {
                return Err(bad("wrong element count"));
            }
            sections.push((name.to_string(), vals, rows, cols));
        }
        let find = |name: &str| {
            sections
                .iter()
                .find(|s| s.0 == name)
                .ok_or_else(|| bad(&format!("missing section {name}")))
        };
        let mat = |name: &str| -> Result<DMatrix<f64>> {
            let (_, v, r, c) = find(name)?;
            Ok(DMatrix::from_row_slice(*r, *c, v))
        };
        let vec = |name: &str| -> Result<DVector<f64>> { Ok(DVector::from_vec(find(name)?.1.clone())) };
        let problem = QpProblem {
            m_matrix: mat("M")?,
            c_vector: vec("c")?,
            eq_matrix: mat("J")?,
            eq_rhs: vec("b")?,
            box_lower: vec("lower")?,
            box_upper: vec("upper")?,
            infeasible_box: infeasible,
        };
        Ok(problem)
    }
}

/// Objective matrices of a scheme at the current joint state.
pub fn build_objective(scheme: &SchemeKind, state: &DualJointState) -> Result<Objective> {
    let n = DUAL_DOF;
    match scheme {
        SchemeKind::Mvn => Ok(Objective { m: DMatrix::identity(n, n), c: DVector::zeros(n) }),
        SchemeKind::Rmp { lambda, theta_zero } => {
            if !(*lambda >= 0.0 && lambda.is_finite()) {
                return Err(Error::InvalidScheme(format!("lambda must be non-negative: {lambda}")));
            }
            let c = (state.theta - theta_zero) * *lambda;
            Ok(Objective { m: DMatrix::identity(n, n), c: DVector::from_column_slice(c.as_slice()) })
        }
        SchemeKind::Mke { inertia_left, inertia_right } => {
            for (side, inertia) in [("left", inertia_left), ("right", inertia_right)] {
                check_spd(inertia).map_err(|msg| Error::InvalidScheme(format!("{side} inertia {msg}")))?;
            }
            let mut m = DMatrix::zeros(n, n);
            m.view_mut((0, 0), (ARM_DOF, ARM_DOF)).copy_from(inertia_left);
            m.view_mut((ARM_DOF, ARM_DOF), (ARM_DOF, ARM_DOF)).copy_from(inertia_right);
            Ok(Objective { m, c: DVector::zeros(n) })
        }
    }
}

fn check_spd(m: &ArmInertia) -> std::result::Result<(), &'static str> {
    if m.iter().any(|x| !x.is_finite()) {
        return Err("is not finite");
    }
    let scale = m.amax().max(1.0);
    if (m - m.transpose()).amax() > 1e-12 * scale {
        return Err("is not symmetric");
    }
    if m.cholesky().is_none() {
        return Err("is not positive definite");
    }
    Ok(())
}

/// Equality block: dual Jacobian and the feedback-corrected task velocity.
pub fn build_equality(
    arms: &DualArm,
    state: &DualJointState,
    reference: &TaskReference,
    gain: &FeedbackGain,
) -> Equality {
    let jac = dual_jacobian(&arms.left, &arms.right, state);
    let error = reference.positions() - arms.forward_positions(&state.theta);
    let rhs = reference.velocities() + gain.stacked().component_mul(&error);
    Equality {
        matrix: DMatrix::from_column_slice(jac.nrows(), jac.ncols(), jac.as_slice()),
        rhs: DVector::from_column_slice(rhs.as_slice()),
    }
}

/// Assembles an instance, checking that the parts fit together.
pub fn build_problem(objective: Objective, equality: Equality, window: BoxBounds) -> Result<QpProblem> {
    let n = objective.c.len();
    let k = equality.rhs.len();
    let shape = |what: &str| Err(Error::Assembly(what.to_string()));
    if objective.m.shape() != (n, n) {
        return shape(&format!("M is {:?}, expected ({n}, {n})", objective.m.shape()));
    }
    if equality.matrix.shape() != (k, n) {
        return shape(&format!("J is {:?}, expected ({k}, {n})", equality.matrix.shape()));
    }
    if window.lower.len() != n || window.upper.len() != n {
        return shape(&format!(
            "box has lengths ({}, {}), expected {n}",
            window.lower.len(),
            window.upper.len()
        ));
    }
    let infeasible_box = window.lower.iter().zip(window.upper.iter()).any(|(l, u)| l > u);
    Ok(QpProblem {
        m_matrix: objective.m,
        c_vector: objective.c,
        eq_matrix: equality.matrix,
        eq_rhs: equality.rhs,
        box_lower: window.lower,
        box_upper: window.upper,
        infeasible_box,
    })
}

#[cfg(test)]
mod tests {
    use approx::assert_relative_eq;

    use super::*;
    use crate::kinematics::DualArm;

    fn some_state() -> DualJointState {
        DualJointState::at_rest(crate::limits::presets::shrinking_limits(2.0, 2.0).midrange())
    }

    #[test]
    fn mvn_objective_is_identity() {
        let o = build_objective(&SchemeKind::Mvn, &some_state()).unwrap();
        assert_eq!(o.m, DMatrix::identity(14, 14));
        assert_eq!(o.c, DVector::zeros(14));
    }

    #[test]
    fn rmp_linear_term() {
        let state = some_state();
        let scheme = SchemeKind::Rmp { lambda: 4.0, theta_zero: state.theta };
        assert_eq!(build_objective(&scheme, &state).unwrap().c, DVector::zeros(14));

        let mut zero = state.theta;
        zero[0] -= 0.1;
        let scheme = SchemeKind::Rmp { lambda: 4.0, theta_zero: zero };
        let c = build_objective(&scheme, &state).unwrap().c;
        assert_relative_eq!(c[0], 0.4, epsilon = 1e-14);
        assert!(c.rows(1, 13).iter().all(|&x| x == 0.0));
    }

    #[test]
    fn rmp_shift_of_start_changes_c_by_minus_lambda_delta() {
        let state = some_state();
        let delta = DualVector::from_fn(|i, _| 0.01 * (i as f64 - 6.0));
        let a = build_objective(&SchemeKind::Rmp { lambda: 3.0, theta_zero: state.theta }, &state).unwrap();
        let b = build_objective(&SchemeKind::Rmp { lambda: 3.0, theta_zero: state.theta + delta }, &state).unwrap();
        let diff = b.c - a.c;
        for i in 0..14 {
            assert_relative_eq!(diff[i], -3.0 * delta[i], epsilon = 1e-14);
        }
    }

    #[test]
    fn rmp_rejects_negative_lambda() {
        let scheme = SchemeKind::Rmp { lambda: -1.0, theta_zero: DualVector::zeros() };
        assert!(matches!(build_objective(&scheme, &some_state()), Err(Error::InvalidScheme(_))));
    }

    #[test]
    fn mke_blocks_and_spd_check() {
        let mut left = ArmInertia::identity() * 2.0;
        left[(0, 1)] = 0.5;
        left[(1, 0)] = 0.5;
        let scheme = SchemeKind::Mke { inertia_left: left, inertia_right: ArmInertia::identity() };
        let o = build_objective(&scheme, &some_state()).unwrap();
        assert_eq!(o.m[(0, 1)], 0.5);
        assert_eq!(o.m[(7, 7)], 1.0);
        assert_eq!(o.m[(0, 7)], 0.0);

        let mut bad = ArmInertia::identity();
        bad[(3, 3)] = -1.0;
        let scheme = SchemeKind::Mke { inertia_left: bad, inertia_right: ArmInertia::identity() };
        assert!(matches!(build_objective(&scheme, &some_state()), Err(Error::InvalidScheme(_))));
    }

    #[test]
    fn equality_rhs_with_zero_error_is_reference_velocity() {
        let arms = DualArm::canonical();
        let state = some_state();
        let p = arms.forward_positions(&state.theta);
        let reference = TaskReference {
            desired_position_left: Vector3::new(p[0], p[1], p[2]),
            desired_position_right: Vector3::new(p[3], p[4], p[5]),
            desired_velocity_left: Vector3::new(0.1, -0.2, 0.3),
            desired_velocity_right: Vector3::new(-0.4, 0.5, 0.6),
        };
        let eq = build_equality(&arms, &state, &reference, &FeedbackGain::uniform(7.0).unwrap());
        assert_eq!(eq.rhs.as_slice(), reference.velocities().as_slice());
    }

    #[test]
    fn equality_rhs_ignores_error_with_zero_gain() {
        let arms = DualArm::canonical();
        let state = some_state();
        let mut reference = TaskReference::stationary(Vector3::new(1.0, 2.0, 3.0), Vector3::zeros());
        reference.desired_velocity_right = Vector3::new(0.0, 0.1, 0.0);
        let eq = build_equality(&arms, &state, &reference, &FeedbackGain::uniform(0.0).unwrap());
        assert_eq!(eq.rhs.as_slice(), reference.velocities().as_slice());
    }

    #[test]
    fn equality_rhs_with_unit_gain_and_one_centimeter_error() {
        let arms = DualArm::canonical();
        let state = some_state();
        let p = arms.forward_positions(&state.theta);
        let reference = TaskReference::stationary(
            Vector3::new(p[0] + 0.01, p[1], p[2]),
            Vector3::new(p[3], p[4], p[5]),
        );
        let eq = build_equality(&arms, &state, &reference, &FeedbackGain::uniform(1.0).unwrap());
        let expected = [0.01, 0.0, 0.0, 0.0, 0.0, 0.0];
        for i in 0..6 {
            assert_relative_eq!(eq.rhs[i], expected[i], epsilon = 1e-15);
        }
        let jac = dual_jacobian(&arms.left, &arms.right, &state);
        assert_eq!(eq.matrix.as_slice(), jac.as_slice());
    }

    #[test]
    fn build_problem_checks_shapes() {
        let o = Objective { m: DMatrix::identity(3, 3), c: DVector::zeros(3) };
        let e = Equality { matrix: DMatrix::zeros(1, 4), rhs: DVector::zeros(1) };
        let b = BoxBounds { lower: DVector::repeat(3, -1.0), upper: DVector::repeat(3, 1.0) };
        assert!(matches!(build_problem(o, e, b), Err(Error::Assembly(_))));
    }

    #[test]
    fn build_problem_flags_inverted_box() {
        let o = Objective { m: DMatrix::identity(2, 2), c: DVector::zeros(2) };
        let e = Equality { matrix: DMatrix::from_row_slice(1, 2, &[1.0, 1.0]), rhs: DVector::zeros(1) };
        let b = BoxBounds {
            lower: DVector::from_vec(vec![-1.0, 0.5]),
            upper: DVector::from_vec(vec![1.0, 0.2]),
        };
        let p = build_problem(o.clone(), e.clone(), b.clone()).unwrap();
        assert!(p.infeasible_box);
        assert_eq!(p.m_matrix, o.m);
        assert_eq!(p.eq_matrix, e.matrix);
        assert_eq!(p.box_lower, b.lower);
    }

    #[test]
    fn dump_round_trips() {
        let o = Objective { m: DMatrix::from_row_slice(2, 2, &[2.0, 0.1, 0.1, 1.0 / 3.0]), c: DVector::from_vec(vec![0.3, -1e-17]) };
        let e = Equality { matrix: DMatrix::from_row_slice(1, 2, &[std::f64::consts::PI, -2.5]), rhs: DVector::from_vec(vec![0.7]) };
        let b = BoxBounds { lower: DVector::from_vec(vec![-1.0, -2.0]), upper: DVector::from_vec(vec![1.0, 2.0]) };
        let p = build_problem(o, e, b).unwrap();
        assert_eq!(QpProblem::from_dump(&p.dump()).unwrap(), p);
    }
}
