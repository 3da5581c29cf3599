#![allow(dead_code)]

use mgddf_core::qp::{build_problem, BoxBounds, Equality, Objective, QpProblem};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn normal(rng: &mut impl Rng) -> f64 {
    // Box-Muller
    let u: f64 = rng.random_range(f64::EPSILON..1.0);
    let v: f64 = rng.random_range(0.0..1.0);
    (-2.0 * u.ln()).sqrt() * (2.0 * std::f64::consts::PI * v).cos()
}

/// Strictly convex QP with a feasible box around a random point of the
/// equality manifold.
pub fn random_qp(rng: &mut impl Rng, max_n: usize, max_k: usize) -> QpProblem {
    let n = rng.random_range(2..=max_n);
    let k = rng.random_range(1..=max_k.min(n - 1));
    let a = DMatrix::from_fn(n, n, |_, _| normal(rng));
    let m = a.transpose() * &a / n as f64 + DMatrix::identity(n, n) * 0.5;
    let c = DVector::from_fn(n, |_, _| 0.5 * normal(rng));
    let j = DMatrix::from_fn(k, n, |_, _| normal(rng));
    let x0 = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
    let b = &j * &x0;
    let lower = DVector::from_fn(n, |i, _| x0[i] - rng.random_range(0.5..3.0));
    let upper = DVector::from_fn(n, |i, _| x0[i] + rng.random_range(0.5..3.0));
    build_problem(Objective { m, c }, Equality { matrix: j, rhs: b }, BoxBounds { lower, upper }).unwrap()
}
