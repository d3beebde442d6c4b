#![allow(dead_code)]

use pdelta_core::constitutive::ModelParams;
use pdelta_core::forms::ProblemData;

use rand::{Rng, SeedableRng};
use rand::rngs::StdRng;

/// Smooth data with nonzero forcing and boundary values.
pub struct SmoothData;

impl ProblemData for SmoothData {
    fn force(&self, x: [f64; 2], t: f64) -> [f64; 2] {
        [(x[0] + t).sin() + 0.5, x[0] * x[1].cos() - t]
    }
    fn dirichlet(&self, x: [f64; 2], t: f64) -> [f64; 2] {
        [0.2 * (x[1] + t).sin() + 0.1, 0.3 * x[0] * x[0] - 0.1 * t]
    }
    fn initial_velocity(&self, x: [f64; 2]) -> [f64; 2] {
        self.dirichlet(x, 0.0)
    }
}

pub fn smooth_velocity(x: [f64; 2]) -> [f64; 2] {
    [
        (2.0 * x[0] + x[1]).sin() + 0.3,
        0.5 * (x[0] - x[1]).cos() - 0.2 * x[0] * x[1],
    ]
}

pub fn smooth_pressure(x: [f64; 2]) -> f64 {
    x[0] * x[0] - x[1] + 0.25
}

pub fn params() -> ModelParams<f64> {
    ModelParams::new(1.5, 1e-3, 1e-2, 1e-4).unwrap()
}

pub fn random_vec(rng: &mut StdRng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

pub fn rng(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}

pub fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn diff_norm(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}
