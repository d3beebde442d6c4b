//! Error norms, convergence orders, work and the apparent Reynolds number.

use pdelta_core::constitutive::{apparent_viscosity, natural_distance_map, ModelParams, SymTensor2};
use pdelta_core::femspace::SpatialQuadrature;
use pdelta_core::forms::Discretization;
use pdelta_core::quadrature::gauss_legendre;
use pdelta_core::solver::SlabStats;
use pdelta_core::timebasis::{TemporalBasis, TimePartition};

use crate::manufactured::ManufacturedCase;

/// Space-time `L2(L2)` errors of the natural distance and of the divergence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorNorms {
    pub e_phi: f64,
    pub e_div: f64,
}

/// Integrates the errors of a trajectory with `q + 1` Gauss points per
/// spatial direction and `k + 2` Gauss points in time on every slab.
pub fn error_norms(
    disc: &Discretization,
    basis: &TemporalBasis<f64>,
    partition: &TimePartition<f64>,
    slabs: &[Vec<f64>],
    case: &ManufacturedCase,
) -> ErrorNorms {
    let quad = SpatialQuadrature::new(disc.config.quad_order + 1);
    let (tq, tw) = gauss_legendre::<f64>(basis.k + 2);
    let n = disc.num_dofs();
    let mv = disc.num_velocity_dofs();
    let area = disc.mesh.hx() * disc.mesh.hy();
    let params = &case.params;
    let mut phi2 = 0.0;
    let mut div2 = 0.0;
    for (step, u) in slabs.iter().enumerate() {
        let (t0, t1) = partition.interval(step + 1);
        let tau = t1 - t0;
        for (&that, &wt) in tq.iter().zip(&tw) {
            let t = t0 + that * tau;
            let l = basis.eval_all(that);
            let mut v = vec![0.0; mv];
            for (mu, lm) in l.iter().enumerate() {
                for (a, b) in v.iter_mut().zip(&u[mu * n..mu * n + mv]) {
                    *a += lm * b;
                }
            }
            for cell in 0..disc.mesh.num_cells() {
                for (xi, w) in quad.points.iter().zip(&quad.weights) {
                    let x = disc.mesh.map_point(cell, *xi);
                    let (_, gh) = disc.vel.eval(&v, cell, *xi);
                    let g = case.velocity_gradient(x, t);
                    let ph = natural_distance_map(params, &SymTensor2::sym_grad(gh));
                    let pe = natural_distance_map(params, &SymTensor2::sym_grad(g));
                    let weight = wt * tau * w * area;
                    phi2 += weight * (pe - ph).norm_sq();
                    let dv = gh[0][0] + gh[1][1];
                    div2 += weight * dv * dv;
                }
            }
        }
    }
    ErrorNorms {
        e_phi: phi2.sqrt(),
        e_div: div2.sqrt(),
    }
}

/// `log2(e_i / e_{i+1})`; `None` when a ratio is undefined.
pub fn eoc(errors: &[f64]) -> Vec<Option<f64>> {
    errors
        .windows(2)
        .map(|w| {
            if w[0] > 0.0 && w[1] > 0.0 && w[0].is_finite() && w[1].is_finite() {
                Some((w[0] / w[1]).log2())
            } else {
                None
            }
        })
        .collect()
}

/// Total Krylov iterations over all slabs and Newton steps times the slab
/// dof count.
pub fn work(stats: &[SlabStats], slab_dofs: usize) -> f64 {
    let its: usize = stats.iter().map(|s| s.linear_iterations()).sum();
    its as f64 * slab_dofs as f64
}

/// Same measure from a flat list of per-step Krylov counts.
pub fn work_from_counts(linear_iterations: &[usize], slab_dofs: usize) -> f64 {
    linear_iterations.iter().sum::<usize>() as f64 * slab_dofs as f64
}

/// `U L / eta_app(U / L)`.
pub fn apparent_reynolds(params: &ModelParams<f64>, velocity: f64, length: f64) -> f64 {
    velocity * length / apparent_viscosity(params, velocity / length)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eoc_examples() {
        let r = eoc(&[4.87470e-01, 1.90222e-01]);
        assert!((r[0].unwrap() - 1.357).abs() < 1e-3);
        assert_eq!(eoc(&[1.0, 0.25])[0], Some(2.0));
        assert_eq!(eoc(&[1.0, 1.0])[0], Some(0.0));
        assert_eq!(eoc(&[1.0, 0.0])[0], None);
    }

    #[test]
    fn reynolds_newtonian_limit() {
        let p = ModelParams::new(2.0, 1e-5, 1e-3, 1e-4).unwrap();
        let re = apparent_reynolds(&p, 2.0, 3.0);
        assert!((re - 6.0 / 1.1e-3).abs() < 1e-9 * re);
    }
}
