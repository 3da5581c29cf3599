//! Solvers for [`QpProblem`].
//!
//! Both iterative solvers work on the stacked primal-dual vector
//! `d = [x; iota]` and the linear variational inequality
//!
//! ```text
//!     Gamma = [M, -J'; J, 0],   q = [c; -b],
//!     eps(d) = d - P(d - (Gamma d + q))
//! ```
//!
//! where `P` clamps the primal part into the box and the dual part into
//! `[-omega, omega]`. `eps(d) = 0` exactly at a KKT point of the QP.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::qp::QpProblem;

pub const DEFAULT_OMEGA: f64 = 1e10;
pub const DEFAULT_TOLERANCE: f64 = 1e-5;

/// Joint velocities and equality multipliers.
#[derive(Debug, Clone, PartialEq)]
pub struct PrimalDual {
    pub primal: DVector<f64>,
    pub dual: DVector<f64>,
}

impl PrimalDual {
    pub fn zeros(primal_dim: usize, dual_dim: usize) -> Self {
        Self { primal: DVector::zeros(primal_dim), dual: DVector::zeros(dual_dim) }
    }

    pub fn for_problem(problem: &QpProblem) -> Self {
        Self::zeros(problem.primal_dim(), problem.dual_dim())
    }

    pub fn stacked(&self) -> DVector<f64> {
        let n = self.primal.len();
        DVector::from_fn(n + self.dual.len(), |i, _| if i < n { self.primal[i] } else { self.dual[i - n] })
    }

    pub fn from_stacked(d: &DVector<f64>, primal_dim: usize) -> Self {
        Self {
            primal: d.rows(0, primal_dim).into_owned(),
            dual: d.rows(primal_dim, d.len() - primal_dim).into_owned(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LviConfig {
    pub omega: f64,
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for LviConfig {
    fn default() -> Self {
        Self { omega: DEFAULT_OMEGA, tolerance: DEFAULT_TOLERANCE, max_iterations: 100_000 }
    }
}

impl LviConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0) {
            return Err(Error::InvalidConfig(format!("lvi tolerance must be positive: {}", self.tolerance)));
        }
        if !(self.omega >= 1e6) {
            return Err(Error::InvalidConfig(format!("lvi omega must be at least 1e6: {}", self.omega)));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidConfig("lvi max_iterations must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DynConfig {
    /// Convergence-rate scale `H`.
    pub gain: f64,
    /// Explicit Euler step in pseudo-time.
    pub pseudo_step: f64,
    pub max_pseudo_time: f64,
    /// Bound on the dual state.
    pub z_bound: f64,
    /// Exit once `|eps|` drops to this.
    pub tolerance: f64,
}

impl DynConfig {
    /// Default step `1e-3 / gain`.
    pub fn with_gain(gain: f64) -> Self {
        Self {
            gain,
            pseudo_step: 1e-3 / gain,
            max_pseudo_time: 1e3 / gain,
            z_bound: DEFAULT_OMEGA,
            tolerance: DEFAULT_TOLERANCE,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gain > 0.0 && self.gain.is_finite()) {
            return Err(Error::InvalidConfig(format!("dyn gain must be positive: {}", self.gain)));
        }
        if !(self.pseudo_step > 0.0 && self.gain * self.pseudo_step < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "dyn pseudo_step must satisfy 0 < gain * step < 1: {}",
                self.pseudo_step
            )));
        }
        if !(self.max_pseudo_time > 0.0) {
            return Err(Error::InvalidConfig("dyn max_pseudo_time must be positive".into()));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::InvalidConfig("dyn tolerance must be positive".into()));
        }
        if !(self.z_bound >= 1e6) {
            return Err(Error::InvalidConfig("dyn z_bound must be at least 1e6".into()));
        }
        Ok(())
    }
}

impl Default for DynConfig {
    fn default() -> Self {
        Self::with_gain(1.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub solution: PrimalDual,
    pub iterations: usize,
    pub final_residual: f64,
    pub converged: bool,
    /// `|eps|` before each update, then at exit.
    pub residual_history: Vec<f64>,
}

/// Entrywise clamp of `d` into `[lower, upper]`.
pub fn project_box(d: &DVector<f64>, lower: &DVector<f64>, upper: &DVector<f64>) -> Result<DVector<f64>> {
    if let Some(index) = (0..lower.len()).find(|&i| lower[i] > upper[i]) {
        return Err(Error::InfeasibleBox { index, lower: lower[index], upper: upper[index] });
    }
    Ok(clamp(d, lower, upper))
}

fn clamp(d: &DVector<f64>, lower: &DVector<f64>, upper: &DVector<f64>) -> DVector<f64> {
    d.zip_zip_map(lower, upper, |x, lo, hi| x.max(lo).min(hi))
}

/// The problem in LVI form.
struct Lvi {
    n: usize,
    gamma: DMatrix<f64>,
    gamma_t: DMatrix<f64>,
    q: DVector<f64>,
    lower: DVector<f64>,
    upper: DVector<f64>,
}

impl Lvi {
    fn new(problem: &QpProblem, omega: f64) -> Result<Self> {
        if problem.infeasible_box {
            let index = (0..problem.primal_dim())
                .find(|&i| problem.box_lower[i] > problem.box_upper[i])
                .unwrap_or(0);
            return Err(Error::InfeasibleBox {
                index,
                lower: problem.box_lower[index],
                upper: problem.box_upper[index],
            });
        }
        let n = problem.primal_dim();
        let k = problem.dual_dim();
        let mut gamma = DMatrix::zeros(n + k, n + k);
        gamma.view_mut((0, 0), (n, n)).copy_from(&problem.m_matrix);
        gamma.view_mut((0, n), (n, k)).copy_from(&(-problem.eq_matrix.transpose()));
        gamma.view_mut((n, 0), (k, n)).copy_from(&problem.eq_matrix);
        let gamma_t = gamma.transpose();
        let q = DVector::from_fn(n + k, |i, _| if i < n { problem.c_vector[i] } else { -problem.eq_rhs[i - n] });
        let lower = DVector::from_fn(n + k, |i, _| if i < n { problem.box_lower[i] } else { -omega });
        let upper = DVector::from_fn(n + k, |i, _| if i < n { problem.box_upper[i] } else { omega });
        Ok(Self { n, gamma, gamma_t, q, lower, upper })
    }

    fn eps(&self, d: &DVector<f64>) -> DVector<f64> {
        let step = d - (&self.gamma * d + &self.q);
        d - clamp(&step, &self.lower, &self.upper)
    }

    /// `(Gamma' + I) e`
    fn sigma(&self, e: &DVector<f64>) -> DVector<f64> {
        &self.gamma_t * e + e
    }

    fn finish(&self, d: &DVector<f64>) -> PrimalDual {
        PrimalDual::from_stacked(&clamp(d, &self.lower, &self.upper), self.n)
    }
}

/// Projection residual `eps(d)` with the default dual bound.
pub fn residual(d: &DVector<f64>, problem: &QpProblem) -> Result<DVector<f64>> {
    Ok(Lvi::new(problem, DEFAULT_OMEGA)?.eps(d))
}

/// Projection-contraction iteration
/// `d <- d - |eps|^2 / |sigma|^2 * sigma`, `sigma = (Gamma' + I) eps`.
pub fn lvi_solve(problem: &QpProblem, config: &LviConfig, warm_start: &PrimalDual) -> Result<SolveReport> {
    lvi_solve_observed(problem, config, warm_start, |_| {})
}

/// [`lvi_solve`], calling `observe` with every iterate including the start.
pub fn lvi_solve_observed(
    problem: &QpProblem,
    config: &LviConfig,
    warm_start: &PrimalDual,
    mut observe: impl FnMut(&DVector<f64>),
) -> Result<SolveReport> {
    config.validate()?;
    let lvi = Lvi::new(problem, config.omega)?;
    let mut d = warm_start.stacked();
    if d.len() != lvi.q.len() {
        return Err(Error::Assembly(format!("warm start has length {}, expected {}", d.len(), lvi.q.len())));
    }
    let mut history = Vec::new();
    let mut iterations = 0;
    observe(&d);
    loop {
        let e = lvi.eps(&d);
        let norm = e.norm();
        history.push(norm);
        if !norm.is_finite() {
            return Err(Error::SolverStall { residual: norm });
        }
        if norm <= config.tolerance || iterations == config.max_iterations {
            return Ok(SolveReport {
                solution: lvi.finish(&d),
                iterations,
                final_residual: norm,
                converged: norm <= config.tolerance,
                residual_history: history,
            });
        }
        let s = lvi.sigma(&e);
        let s2 = s.norm_squared();
        if s2 == 0.0 {
            return Err(Error::SolverStall { residual: norm });
        }
        d.axpy(-(norm * norm) / s2, &s, 1.0);
        iterations += 1;
        observe(&d);
    }
}

/// Explicit Euler integration of `d' = -H (Gamma' + I) eps(d)`.
pub fn dyn_solve(problem: &QpProblem, config: &DynConfig, initial: &PrimalDual) -> Result<SolveReport> {
    config.validate()?;
    let lvi = Lvi::new(problem, config.z_bound)?;
    let mut d = initial.stacked();
    if d.len() != lvi.q.len() {
        return Err(Error::Assembly(format!("initial state has length {}, expected {}", d.len(), lvi.q.len())));
    }
    let rate = config.gain * config.pseudo_step;
    let max_steps = (config.max_pseudo_time / config.pseudo_step).ceil() as usize;
    let mut history: Vec<f64> = Vec::new();
    let mut steps = 0;
    loop {
        let e = lvi.eps(&d);
        let norm = e.norm();
        history.push(norm);
        let time = steps as f64 * config.pseudo_step;
        let grew = steps >= 1000 && norm > 10.0 * history[steps - 1000];
        if !norm.is_finite() || grew {
            return Err(Error::SolverDiverged { time, residual: norm });
        }
        if norm <= config.tolerance || steps >= max_steps {
            return Ok(SolveReport {
                solution: lvi.finish(&d),
                iterations: steps,
                final_residual: norm,
                converged: norm <= config.tolerance,
                residual_history: history,
            });
        }
        d.axpy(-rate, &lvi.sigma(&e), 1.0);
        steps += 1;
    }
}

/// Exact solve by enumerating box activity patterns, fewest active first.
///
/// Meant as a test oracle for small problems.
pub fn reference_solve(problem: &QpProblem) -> Result<PrimalDual> {
    let n = problem.primal_dim();
    if problem.infeasible_box {
        return Err(Error::Infeasible);
    }
    let candidates: Vec<usize> =
        (0..n).filter(|&i| problem.box_lower[i].is_finite() || problem.box_upper[i].is_finite()).collect();
    let mut active: Vec<(usize, Side)> = Vec::new();
    for count in 0..=candidates.len() {
        let mut found = None;
        for_each_combination(candidates.len(), count, &mut |combo| {
            for mask in 0..(1u64 << count) {
                active.clear();
                let mut usable = true;
                for (bit, &pos) in combo.iter().enumerate() {
                    let i = candidates[pos];
                    let side = if mask >> bit & 1 == 0 { Side::Lower } else { Side::Upper };
                    let value = match side {
                        Side::Lower => problem.box_lower[i],
                        Side::Upper => problem.box_upper[i],
                    };
                    // A fixed variable needs only one pattern.
                    let redundant = side == Side::Upper && problem.box_lower[i] == problem.box_upper[i];
                    if !value.is_finite() || redundant {
                        usable = false;
                        break;
                    }
                    active.push((i, side));
                }
                if usable {
                    if let Some(sol) = try_pattern(problem, &active) {
                        found = Some(sol);
                        return true;
                    }
                }
            }
            false
        });
        if let Some(sol) = found {
            return Ok(sol);
        }
    }
    Err(Error::Infeasible)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Side {
    Lower,
    Upper,
}

/// Calls `f` with each `k`-subset of `0..n` in lexicographic order until it returns true.
fn for_each_combination(n: usize, k: usize, f: &mut impl FnMut(&[usize]) -> bool) {
    if k > n {
        return;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        if f(&idx) {
            return;
        }
        let Some(pos) = (0..k).rev().find(|&p| idx[p] != p + n - k) else { return };
        idx[pos] += 1;
        for j in pos + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

fn try_pattern(problem: &QpProblem, active: &[(usize, Side)]) -> Option<PrimalDual> {
    let n = problem.primal_dim();
    let k = problem.dual_dim();
    let mut x = DVector::zeros(n);
    let mut is_active = vec![false; n];
    for &(i, side) in active {
        is_active[i] = true;
        x[i] = match side {
            Side::Lower => problem.box_lower[i],
            Side::Upper => problem.box_upper[i],
        };
    }
    let free: Vec<usize> = (0..n).filter(|&i| !is_active[i]).collect();
    let f = free.len();

    // [M_FF, -J_F'; J_F, 0] [x_F; iota] = [-c_F - M_FA x_A; b - J_A x_A]
    let mut kkt = DMatrix::zeros(f + k, f + k);
    let mut rhs = DVector::zeros(f + k);
    for (a, &i) in free.iter().enumerate() {
        for (b, &j) in free.iter().enumerate() {
            kkt[(a, b)] = problem.m_matrix[(i, j)];
        }
        for r in 0..k {
            kkt[(a, f + r)] = -problem.eq_matrix[(r, i)];
            kkt[(f + r, a)] = problem.eq_matrix[(r, i)];
        }
        rhs[a] = -problem.c_vector[i] - (0..n).map(|j| problem.m_matrix[(i, j)] * x[j]).sum::<f64>();
    }
    for r in 0..k {
        rhs[f + r] = problem.eq_rhs[r] - (0..n).map(|j| problem.eq_matrix[(r, j)] * x[j]).sum::<f64>();
    }

    if f + k == 0 {
        return Some(PrimalDual { primal: x, dual: DVector::zeros(0) });
    }
    let svd = kkt.svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smin > 1e-11 * smax.max(1.0)) {
        return None;
    }
    let sol = svd.solve(&rhs, 0.0).ok()?;
    for (a, &i) in free.iter().enumerate() {
        x[i] = sol[a];
    }
    let dual = sol.rows(f, k).into_owned();

    let scale = 1.0 + x.amax() + problem.box_upper.iter().chain(problem.box_lower.iter()).filter(|v| v.is_finite()).fold(0.0f64, |m, v| m.max(v.abs()));
    let tol = 1e-9 * scale;
    for &i in &free {
        if x[i] < problem.box_lower[i] - tol || x[i] > problem.box_upper[i] + tol {
            return None;
        }
    }
    let grad = &problem.m_matrix * &x + &problem.c_vector - problem.eq_matrix.transpose() * &dual;
    let gtol = 1e-9 * (1.0 + grad.amax() + dual.amax());
    for &(i, side) in active {
        if problem.box_lower[i] == problem.box_upper[i] {
            continue;
        }
        let ok = match side {
            Side::Lower => grad[i] >= -gtol,
            Side::Upper => grad[i] <= gtol,
        };
        if !ok {
            return None;
        }
    }
    for &i in &free {
        x[i] = x[i].max(problem.box_lower[i]).min(problem.box_upper[i]);
    }
    Some(PrimalDual { primal: x, dual })
}
