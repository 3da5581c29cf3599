//! INI configuration files and named presets.
//!
//! ```ini
//! preset = paper-v-a        ; optional starting point, default paper-v-a
//!
//! [simulation]
//! duration = 18
//! dt = 0.01
//! initial_theta = ...      ; 14 values (rad), default: middle of the limits
//!
//! [limits]                  ; 14 values per vector (rad, rad/s)
//! theta_min = ...
//! theta_max = ...
//! theta_dot_min = ...
//! theta_dot_max = ...
//! goal_min = ...
//! goal_max = ...
//! rho = 2
//! n_param = 1
//! task_duration = 18
//!
//! [margin]
//! mode = mgddf              ; or gddf
//! kappa = 0.85
//! nu = 2
//!
//! [scheme]
//! kind = mvn                ; mvn, rmp or mke
//! lambda = 4                ; rmp
//! theta_zero = ...          ; rmp, default: initial_theta
//! inertia_left = ...        ; mke, 49 values row-major, default identity
//! inertia_right = ...
//!
//! [feedback]
//! gain = 10                 ; all axes of both hands, or:
//! gain_left = 10, 10, 10
//! gain_right = 10, 10, 10
//!
//! [solver]
//! kind = lvi                ; or dyn
//! tolerance = 1e-5
//! omega = 1e10              ; lvi
//! max_iterations = 100000   ; lvi
//! gain = 1                  ; dyn
//! pseudo_step = 0.001       ; dyn
//! max_pseudo_time = 1000    ; dyn
//! z_bound = 1e10            ; dyn
//!
//! [task]
//! kind = hold               ; hold, ball-catch or path
//! offset_left = 0, 0, 0     ; hold (m)
//! offset_right = 0, 0, 0
//! amplitudes = 0.1, 0.1, 0.1 ; ball-catch: up, left, down (m)
//! segment_duration = 4.5
//! waypoints = t lx ly lz rx ry rz | ...  ; path
//! ```
//!
//! `[arm.left]` and `[arm.right]` replace the arm geometry; they use the same
//! keys as the embedded arm table (`base`, `joint1` .. `joint7`, `tool`).

use std::path::Path;

use ini::{Ini, ParseOption, Properties};
use nalgebra::{Isometry3, Translation3, Unit, UnitQuaternion, Vector3};

use crate::error::{Error, Result};
use crate::kinematics::{ArmModel, DualArm, DualVector, JointParams, Side, ARM_DOF, DUAL_DOF};
use crate::limits::{presets as limit_presets, BoundMode, LimitSchedule, MarginParams};
use crate::qp::{ArmInertia, FeedbackGain, SchemeKind};
use crate::simulation::{BallCatch, SimConfig, SolverChoice, TaskSpec, Waypoint};
use crate::solvers::{DynConfig, LviConfig};

fn key_error(key: &str, message: impl Into<String>) -> Error {
    Error::ConfigKey { key: key.to_string(), message: message.into() }
}

fn parse_ini(text: &str) -> Result<Ini> {
    let opt = ParseOption { enabled_quote: false, enabled_escape: false, ..ParseOption::default() };
    Ini::load_from_str_opt(text, opt).map_err(|e| Error::ConfigSyntax(e.to_string()))
}

fn parse_f64(key: &str, value: &str) -> Result<f64> {
    let v: f64 = value.trim().parse().map_err(|_| key_error(key, format!("not a number: `{}`", value.trim())))?;
    if !v.is_finite() {
        return Err(key_error(key, "must be finite"));
    }
    Ok(v)
}

fn parse_list(key: &str, value: &str, len: usize) -> Result<Vec<f64>> {
    let vals = value.split(',').map(|s| parse_f64(key, s)).collect::<Result<Vec<_>>>()?;
    if vals.len() != len {
        return Err(key_error(key, format!("expected {len} values, got {}", vals.len())));
    }
    Ok(vals)
}

fn parse_dual(key: &str, value: &str) -> Result<DualVector> {
    Ok(DualVector::from_vec(parse_list(key, value, DUAL_DOF)?))
}

fn parse_vec3(key: &str, value: &str) -> Result<Vector3<f64>> {
    Ok(Vector3::from_vec(parse_list(key, value, 3)?))
}

fn list(values: impl IntoIterator<Item = f64>) -> String {
    values.into_iter().map(|v| format!("{v:?}")).collect::<Vec<_>>().join(", ")
}

/// Unit vector from config text; already-unit input is kept bit for bit.
fn unit(v: Vector3<f64>) -> Option<Unit<Vector3<f64>>> {
    let n = v.norm();
    if !(n > 0.0) {
        None
    } else if (n - 1.0).abs() < 1e-12 {
        Some(Unit::new_unchecked(v))
    } else {
        Some(Unit::new_normalize(v))
    }
}

fn parse_arm(side: Side, section: &str, props: &Properties) -> Result<ArmModel> {
    let mut base = None;
    let mut tool = None;
    let mut joints: Vec<Option<JointParams>> = vec![None; ARM_DOF];
    for (k, v) in props.iter() {
        let key = format!("{section}.{k}");
        match k {
            "base" => {
                let vals = v.split(',').map(|s| parse_f64(&key, s)).collect::<Result<Vec<_>>>()?;
                let rotation = match vals.len() {
                    6 => UnitQuaternion::from_euler_angles(vals[3], vals[4], vals[5]),
                    7 => {
                        let q = nalgebra::Quaternion::new(vals[3], vals[4], vals[5], vals[6]);
                        if (q.norm() - 1.0).abs() < 1e-12 {
                            UnitQuaternion::new_unchecked(q)
                        } else {
                            UnitQuaternion::from_quaternion(q)
                        }
                    }
                    n => return Err(key_error(&key, format!("expected 6 or 7 values, got {n}"))),
                };
                base = Some(Isometry3::from_parts(Translation3::new(vals[0], vals[1], vals[2]), rotation));
            }
            "tool" => tool = Some(parse_vec3(&key, v)?),
            _ => {
                let index = k
                    .strip_prefix("joint")
                    .and_then(|n| n.parse::<usize>().ok())
                    .filter(|n| (1..=ARM_DOF).contains(n))
                    .ok_or_else(|| key_error(&key, "unknown key"))?;
                let vals = parse_list(&key, v, 7)?;
                let axis = unit(Vector3::new(vals[3], vals[4], vals[5]))
                    .ok_or_else(|| key_error(&key, "joint axis is zero"))?;
                joints[index - 1] = Some(JointParams {
                    origin: Vector3::new(vals[0], vals[1], vals[2]),
                    axis,
                    angle_offset: vals[6],
                });
            }
        }
    }
    let base = base.ok_or_else(|| key_error(&format!("{section}.base"), "missing"))?;
    let tool = tool.ok_or_else(|| key_error(&format!("{section}.tool"), "missing"))?;
    let joints = joints
        .into_iter()
        .enumerate()
        .map(|(i, j)| j.ok_or_else(|| key_error(&format!("{section}.joint{}", i + 1), "missing")))
        .collect::<Result<Vec<_>>>()?;
    ArmModel::new(side, base, joints, tool).map_err(|e| key_error(section, e.to_string()))
}

fn write_arm(out: &mut String, section: &str, arm: &ArmModel) {
    out.push_str(&format!("\n[{section}]\n"));
    let b = arm.base();
    let t = b.translation.vector;
    let (r, p, y) = b.rotation.euler_angles();
    let exact = UnitQuaternion::from_euler_angles(r, p, y) == b.rotation;
    let base = if exact {
        list([t.x, t.y, t.z, r, p, y])
    } else {
        let q = b.rotation.quaternion();
        list([t.x, t.y, t.z, q.w, q.i, q.j, q.k])
    };
    out.push_str(&format!("base = {base}\n"));
    for (i, j) in arm.joints().iter().enumerate() {
        let vals = [j.origin.x, j.origin.y, j.origin.z, j.axis.x, j.axis.y, j.axis.z, j.angle_offset];
        out.push_str(&format!("joint{} = {}\n", i + 1, list(vals)));
    }
    out.push_str(&format!("tool = {}\n", list(arm.tool().iter().copied())));
}

/// Parses an arm table with `[arm.left]` and `[arm.right]` sections.
pub fn parse_arm_table(text: &str) -> Result<DualArm> {
    let ini = parse_ini(text)?;
    let mut left = None;
    let mut right = None;
    for (name, props) in ini.iter() {
        match name {
            None if props.is_empty() => {}
            Some("arm.left") => left = Some(parse_arm(Side::Left, "arm.left", props)?),
            Some("arm.right") => right = Some(parse_arm(Side::Right, "arm.right", props)?),
            other => return Err(key_error(other.unwrap_or("(top level)"), "unknown section in arm table")),
        }
    }
    DualArm::new(
        left.ok_or_else(|| key_error("arm.left", "missing section"))?,
        right.ok_or_else(|| key_error("arm.right", "missing section"))?,
    )
}

/// Named starting configurations.
pub mod presets {
    use super::*;

    pub const NAMES: [&str; 3] = ["paper-v-a", "ball-catch", "static"];

    pub fn describe(name: &str) -> &'static str {
        match name {
            "paper-v-a" => "hold both hands while the limits close in on the goal box (rho = 2, N = 1)",
            "ball-catch" => "carry a ball up, left, down and back over 18 s under the shrinking limits",
            "static" => "hold pose under fixed physical limits, unit feedback gain",
            _ => "",
        }
    }

    fn base(schedule: LimitSchedule, task: TaskSpec, gain: f64) -> SimConfig {
        SimConfig {
            duration: 18.0,
            dt: 0.01,
            scheme: SchemeKind::Mvn,
            mode: BoundMode::Mgddf,
            margin: MarginParams::default(),
            initial_theta: schedule.midrange(),
            schedule,
            gain: FeedbackGain::uniform(gain).expect("non-negative gain"),
            solver: SolverChoice::Lvi(LviConfig::default()),
            task,
            arms: DualArm::canonical(),
        }
    }

    pub fn by_name(name: &str) -> Result<SimConfig> {
        match name {
            "paper-v-a" => Ok(base(limit_presets::shrinking_limits(2.0, 1.0), TaskSpec::hold(), 10.0)),
            "ball-catch" => {
                Ok(base(limit_presets::shrinking_limits(2.0, 1.0), TaskSpec::BallCatch(BallCatch::default()), 10.0))
            }
            "static" => Ok(base(limit_presets::static_limits(18.0), TaskSpec::hold(), 1.0)),
            _ => Err(key_error("preset", format!("unknown preset `{name}`; known: {}", NAMES.join(", ")))),
        }
    }
}

impl Default for SimConfig {
    fn default() -> Self {
        presets::by_name("paper-v-a").expect("default preset")
    }
}

/// Reads and validates a config file.
pub fn parse_config(path: &Path) -> Result<SimConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_config_str(&text)
}

/// Mutable collection of everything a file may override.
struct Draft {
    base: SimConfig,
    initial_theta: Option<DualVector>,
    limits: [DualVector; 6],
    rho: f64,
    n_param: f64,
    task_duration: f64,
    kappa: f64,
    nu: f64,
    scheme: String,
    lambda: f64,
    theta_zero: Option<DualVector>,
    inertia: [ArmInertia; 2],
    gain: [Vector3<f64>; 2],
    solver: String,
    lvi: LviConfig,
    dynamic: DynConfig,
    task: String,
    offsets: [Vector3<f64>; 2],
    ball: BallCatch,
    waypoints: Vec<Waypoint>,
}

impl Draft {
    fn new(base: SimConfig) -> Self {
        let s = &base.schedule;
        let (lambda, theta_zero, inertia) = match &base.scheme {
            SchemeKind::Rmp { lambda, theta_zero } => (*lambda, Some(*theta_zero), [ArmInertia::identity(); 2]),
            SchemeKind::Mke { inertia_left, inertia_right } => (0.0, None, [*inertia_left, *inertia_right]),
            SchemeKind::Mvn => (0.0, None, [ArmInertia::identity(); 2]),
        };
        let (lvi, dynamic) = match base.solver {
            SolverChoice::Lvi(c) => (c, DynConfig::default()),
            SolverChoice::Dyn(c) => (LviConfig::default(), c),
        };
        let (offsets, ball, waypoints) = match &base.task {
            TaskSpec::HoldPose { offset_left, offset_right } => {
                ([*offset_left, *offset_right], BallCatch::default(), Vec::new())
            }
            TaskSpec::BallCatch(b) => ([Vector3::zeros(); 2], *b, Vec::new()),
            TaskSpec::CustomPath(p) => ([Vector3::zeros(); 2], BallCatch::default(), p.clone()),
        };
        Self {
            initial_theta: Some(base.initial_theta),
            limits: [s.theta_min, s.theta_max, s.theta_dot_min, s.theta_dot_max, s.goal_min, s.goal_max],
            rho: s.rho,
            n_param: s.n_param,
            task_duration: s.task_duration,
            kappa: base.margin.kappa,
            nu: base.margin.nu,
            scheme: base.scheme.name().to_string(),
            lambda,
            theta_zero,
            inertia,
            gain: [base.gain.gain_left, base.gain.gain_right],
            solver: base.solver.name().to_string(),
            lvi,
            dynamic,
            task: base.task.name().to_string(),
            offsets,
            ball,
            waypoints,
            base,
        }
    }

    fn set(&mut self, section: &str, k: &str, v: &str) -> Result<()> {
        let key = format!("{section}.{k}");
        let key = key.as_str();
        let f = |v: &str| parse_f64(key, v);
        match (section, k) {
            ("simulation", "duration") => self.base.duration = f(v)?,
            ("simulation", "dt") => self.base.dt = f(v)?,
            ("simulation", "initial_theta") => self.initial_theta = Some(parse_dual(key, v)?),

            ("limits", "theta_min") => self.limits[0] = parse_dual(key, v)?,
            ("limits", "theta_max") => self.limits[1] = parse_dual(key, v)?,
            ("limits", "theta_dot_min") => self.limits[2] = parse_dual(key, v)?,
            ("limits", "theta_dot_max") => self.limits[3] = parse_dual(key, v)?,
            ("limits", "goal_min") => self.limits[4] = parse_dual(key, v)?,
            ("limits", "goal_max") => self.limits[5] = parse_dual(key, v)?,
            ("limits", "rho") => self.rho = f(v)?,
            ("limits", "n_param") => self.n_param = f(v)?,
            ("limits", "task_duration") => self.task_duration = f(v)?,

            ("margin", "mode") => {
                self.base.mode = match v.trim() {
                    "gddf" => BoundMode::Gddf,
                    "mgddf" => BoundMode::Mgddf,
                    other => return Err(key_error(key, format!("expected gddf or mgddf, got `{other}`"))),
                }
            }
            ("margin", "kappa") => self.kappa = f(v)?,
            ("margin", "nu") => self.nu = f(v)?,

            ("scheme", "kind") => self.scheme = choice(key, v, &["mvn", "rmp", "mke"])?,
            ("scheme", "lambda") => self.lambda = f(v)?,
            ("scheme", "theta_zero") => self.theta_zero = Some(parse_dual(key, v)?),
            ("scheme", "inertia_left") => self.inertia[0] = ArmInertia::from_row_slice(&parse_list(key, v, 49)?),
            ("scheme", "inertia_right") => self.inertia[1] = ArmInertia::from_row_slice(&parse_list(key, v, 49)?),

            ("feedback", "gain") => self.gain = [Vector3::repeat(f(v)?); 2],
            ("feedback", "gain_left") => self.gain[0] = parse_vec3(key, v)?,
            ("feedback", "gain_right") => self.gain[1] = parse_vec3(key, v)?,

            ("solver", "kind") => self.solver = choice(key, v, &["lvi", "dyn"])?,
            ("solver", "tolerance") => {
                self.lvi.tolerance = f(v)?;
                self.dynamic.tolerance = self.lvi.tolerance;
            }
            ("solver", "omega") => self.lvi.omega = f(v)?,
            ("solver", "max_iterations") => {
                self.lvi.max_iterations =
                    v.trim().parse().map_err(|_| key_error(key, format!("not a count: `{}`", v.trim())))?
            }
            ("solver", "gain") => self.dynamic.gain = f(v)?,
            ("solver", "pseudo_step") => self.dynamic.pseudo_step = f(v)?,
            ("solver", "max_pseudo_time") => self.dynamic.max_pseudo_time = f(v)?,
            ("solver", "z_bound") => self.dynamic.z_bound = f(v)?,

            ("task", "kind") => self.task = choice(key, v, &["hold", "ball-catch", "path"])?,
            ("task", "offset_left") => self.offsets[0] = parse_vec3(key, v)?,
            ("task", "offset_right") => self.offsets[1] = parse_vec3(key, v)?,
            ("task", "amplitudes") => {
                let a = parse_list(key, v, 3)?;
                self.ball.amplitudes = [a[0], a[1], a[2]];
            }
            ("task", "segment_duration") => self.ball.segment_duration = f(v)?,
            ("task", "waypoints") => {
                self.waypoints = v
                    .split('|')
                    .map(|p| {
                        let vals =
                            p.split_whitespace().map(|s| parse_f64(key, s)).collect::<Result<Vec<_>>>()?;
                        if vals.len() != 7 {
                            return Err(key_error(key, format!("waypoint needs 7 numbers, got {}", vals.len())));
                        }
                        Ok(Waypoint {
                            time: vals[0],
                            left: Vector3::new(vals[1], vals[2], vals[3]),
                            right: Vector3::new(vals[4], vals[5], vals[6]),
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
            }
            _ => return Err(key_error(key, "unknown key")),
        }
        Ok(())
    }

    fn finish(mut self) -> Result<SimConfig> {
        let [t_min, t_max, td_min, td_max, g_min, g_max] = self.limits;
        let schedule = LimitSchedule::new(
            t_min,
            t_max,
            td_min,
            td_max,
            g_min,
            g_max,
            self.rho,
            self.task_duration,
            self.n_param,
        )
        .map_err(|e| key_error("limits", e.to_string()))?;
        let margin = MarginParams::new(self.kappa, self.nu).map_err(|e| {
            let key = if self.kappa > 0.0 && self.kappa < 1.0 { "margin.nu" } else { "margin.kappa" };
            key_error(key, e.to_string())
        })?;
        let initial_theta = self.initial_theta.unwrap_or_else(|| schedule.midrange());
        let scheme = match self.scheme.as_str() {
            "rmp" => SchemeKind::Rmp { lambda: self.lambda, theta_zero: self.theta_zero.unwrap_or(initial_theta) },
            "mke" => SchemeKind::Mke { inertia_left: self.inertia[0], inertia_right: self.inertia[1] },
            _ => SchemeKind::Mvn,
        };
        let gain = FeedbackGain::new(self.gain[0], self.gain[1]).map_err(|e| key_error("feedback", e.to_string()))?;
        let solver = match self.solver.as_str() {
            "dyn" => SolverChoice::Dyn(self.dynamic),
            _ => SolverChoice::Lvi(self.lvi),
        };
        let task = match self.task.as_str() {
            "ball-catch" => TaskSpec::BallCatch(self.ball),
            "path" => TaskSpec::CustomPath(self.waypoints),
            _ => TaskSpec::HoldPose { offset_left: self.offsets[0], offset_right: self.offsets[1] },
        };
        self.base.schedule = schedule;
        self.base.margin = margin;
        self.base.initial_theta = initial_theta;
        self.base.scheme = scheme;
        self.base.gain = gain;
        self.base.solver = solver;
        self.base.task = task;
        let config = self.base;
        config.validate().map_err(|e| {
            let key = match &e {
                Error::InvalidScheme(_) => "scheme",
                _ => match e.to_string() {
                    s if s.contains("dt") => "simulation.dt",
                    s if s.contains("duration") => "simulation.duration",
                    s if s.contains("lvi") || s.contains("dyn") => "solver",
                    s if s.contains("theta") => "simulation.initial_theta",
                    _ => "task",
                },
            };
            key_error(key, e.to_string())
        })?;
        Ok(config)
    }
}

fn choice(key: &str, value: &str, options: &[&str]) -> Result<String> {
    let v = value.trim();
    if options.contains(&v) {
        Ok(v.to_string())
    } else {
        Err(key_error(key, format!("expected one of {}, got `{v}`", options.join(", "))))
    }
}

const SECTIONS: [&str; 7] = ["simulation", "limits", "margin", "scheme", "feedback", "solver", "task"];

/// Parses config text; keys not given keep the preset's values.
pub fn parse_config_str(text: &str) -> Result<SimConfig> {
    let ini = parse_ini(text)?;
    let general = ini.general_section();
    for (k, _) in general.iter() {
        if k != "preset" {
            return Err(key_error(k, "unknown key"));
        }
    }
    let base = match general.get("preset") {
        Some(name) => presets::by_name(name.trim())?,
        None => SimConfig::default(),
    };
    let mut arms = [None, None];
    let mut draft = Draft::new(base);
    for (name, props) in ini.iter() {
        let Some(name) = name else { continue };
        let mut seen = std::collections::HashSet::new();
        for (k, _) in props.iter() {
            if !seen.insert(k) {
                return Err(key_error(&format!("{name}.{k}"), "given more than once"));
            }
        }
        match name {
            "arm.left" => arms[0] = Some(parse_arm(Side::Left, name, props)?),
            "arm.right" => arms[1] = Some(parse_arm(Side::Right, name, props)?),
            s if SECTIONS.contains(&s) => {
                for (k, v) in props.iter() {
                    draft.set(s, k, v)?;
                }
            }
            other => return Err(key_error(other, "unknown section")),
        }
    }
    let [left, right] = arms;
    if let Some(l) = left {
        draft.base.arms.left = l;
    }
    if let Some(r) = right {
        draft.base.arms.right = r;
    }
    draft.finish()
}

/// Writes every setting explicitly; [`parse_config_str`] reads it back unchanged.
pub fn serialize_config(config: &SimConfig) -> String {
    let dual = |v: &DualVector| list(v.iter().copied());
    let vec3 = |v: &Vector3<f64>| list(v.iter().copied());
    let s = &config.schedule;
    let mut out = String::new();
    out.push_str("[simulation]\n");
    out.push_str(&format!("duration = {:?}\n", config.duration));
    out.push_str(&format!("dt = {:?}\n", config.dt));
    out.push_str(&format!("initial_theta = {}\n", dual(&config.initial_theta)));

    out.push_str("\n[limits]\n");
    for (k, v) in [
        ("theta_min", &s.theta_min),
        ("theta_max", &s.theta_max),
        ("theta_dot_min", &s.theta_dot_min),
        ("theta_dot_max", &s.theta_dot_max),
        ("goal_min", &s.goal_min),
        ("goal_max", &s.goal_max),
    ] {
        out.push_str(&format!("{k} = {}\n", dual(v)));
    }
    out.push_str(&format!("rho = {:?}\nn_param = {:?}\ntask_duration = {:?}\n", s.rho, s.n_param, s.task_duration));

    out.push_str("\n[margin]\n");
    out.push_str(&format!("mode = {}\n", config.mode.name()));
    out.push_str(&format!("kappa = {:?}\nnu = {:?}\n", config.margin.kappa, config.margin.nu));

    out.push_str("\n[scheme]\n");
    out.push_str(&format!("kind = {}\n", config.scheme.name()));
    match &config.scheme {
        SchemeKind::Rmp { lambda, theta_zero } => {
            out.push_str(&format!("lambda = {lambda:?}\ntheta_zero = {}\n", dual(theta_zero)));
        }
        SchemeKind::Mke { inertia_left, inertia_right } => {
            let rows = |m: &ArmInertia| list((0..49).map(|i| m[(i / 7, i % 7)]));
            out.push_str(&format!("inertia_left = {}\ninertia_right = {}\n", rows(inertia_left), rows(inertia_right)));
        }
        SchemeKind::Mvn => {}
    }

    out.push_str("\n[feedback]\n");
    out.push_str(&format!("gain_left = {}\ngain_right = {}\n", vec3(&config.gain.gain_left), vec3(&config.gain.gain_right)));

    out.push_str("\n[solver]\n");
    out.push_str(&format!("kind = {}\n", config.solver.name()));
    match &config.solver {
        SolverChoice::Lvi(c) => out.push_str(&format!(
            "tolerance = {:?}\nomega = {:?}\nmax_iterations = {}\n",
            c.tolerance, c.omega, c.max_iterations
        )),
        SolverChoice::Dyn(c) => out.push_str(&format!(
            "tolerance = {:?}\ngain = {:?}\npseudo_step = {:?}\nmax_pseudo_time = {:?}\nz_bound = {:?}\n",
            c.tolerance, c.gain, c.pseudo_step, c.max_pseudo_time, c.z_bound
        )),
    }

    out.push_str("\n[task]\n");
    out.push_str(&format!("kind = {}\n", config.task.name()));
    match &config.task {
        TaskSpec::HoldPose { offset_left, offset_right } => {
            out.push_str(&format!("offset_left = {}\noffset_right = {}\n", vec3(offset_left), vec3(offset_right)));
        }
        TaskSpec::BallCatch(b) => {
            out.push_str(&format!(
                "amplitudes = {}\nsegment_duration = {:?}\n",
                list(b.amplitudes),
                b.segment_duration
            ));
        }
        TaskSpec::CustomPath(points) => {
            let pts: Vec<String> = points
                .iter()
                .map(|p| {
                    [p.time, p.left.x, p.left.y, p.left.z, p.right.x, p.right.y, p.right.z]
                        .iter()
                        .map(|v| format!("{v:?}"))
                        .collect::<Vec<_>>()
                        .join(" ")
                })
                .collect();
            out.push_str(&format!("waypoints = {}\n", pts.join(" | ")));
        }
    }

    write_arm(&mut out, "arm.left", &config.arms.left);
    write_arm(&mut out, "arm.right", &config.arms.right);
    out
}
