//! Time-step residual and Jacobian built from the tensor-product structure,
//! and sequential time marching.
//!
//! A slab vector stores the `k + 1` temporal node blocks one after another;
//! each block is a spatial state `[v; pi]` of length `M_v + M_p`.

use sprs::CsMat;
use thiserror::Error;

use crate::constitutive::{ModelParams, TangentVariant};
use crate::forms::{BoundaryState, Discretization, FormsError, ProblemData};
use crate::sparse::spmv;
use crate::timebasis::{TemporalBasis, TemporalMatrices, TimePartition};

/// One time step `(t0, t0 + tau]` with its incoming velocity trace.
pub struct SlabContext<'a, D: ProblemData + ?Sized> {
    pub disc: &'a Discretization,
    pub basis: &'a TemporalBasis<f64>,
    pub tmat: &'a TemporalMatrices<f64>,
    pub t0: f64,
    pub tau: f64,
    pub v_prev: &'a [f64],
    pub data: &'a D,
    pub params: ModelParams<f64>,
}

impl<D: ProblemData + ?Sized> Clone for SlabContext<'_, D> {
    fn clone(&self) -> Self {
        Self { ..*self }
    }
}

impl<'a, D: ProblemData + ?Sized> SlabContext<'a, D> {
    pub fn num_nodes(&self) -> usize {
        self.basis.num_nodes()
    }

    /// Spatial block length `M_v + M_p`.
    pub fn block_len(&self) -> usize {
        self.disc.num_dofs()
    }

    pub fn len(&self) -> usize {
        self.num_nodes() * self.block_len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn node_time(&self, mu: usize) -> f64 {
        self.t0 + self.tau * self.basis.nodes[mu]
    }

    pub fn block<'u>(&self, u: &'u [f64], mu: usize) -> &'u [f64] {
        let n = self.block_len();
        &u[mu * n..(mu + 1) * n]
    }

    pub fn boundary_states(&self) -> Result<Vec<BoundaryState>, FormsError> {
        (0..self.num_nodes())
            .map(|mu| {
                self.disc
                    .boundary_state(self.data, &self.params, self.node_time(mu))
            })
            .collect()
    }

    /// `-(K_t (x) M_x) V + (m_t (x) M_x) v^-` added into the velocity rows.
    fn add_time_derivative(&self, u: &[f64], out: &mut [f64], sign: f64, with_trace: bool) {
        let n = self.block_len();
        let mv = self.disc.num_velocity_dofs();
        let mass = self.disc.velocity_mass();
        let s = self.num_nodes();
        let mut mvs = vec![vec![0.0; mv]; s];
        for nu in 0..s {
            spmv(mass, &u[nu * n..nu * n + mv], &mut mvs[nu]);
        }
        let mut mprev = vec![0.0; mv];
        if with_trace {
            spmv(mass, self.v_prev, &mut mprev);
        }
        for mu in 0..s {
            let row = &mut out[mu * n..mu * n + mv];
            for nu in 0..s {
                let k = self.tmat.stiffness[mu][nu];
                if k != 0.0 {
                    for (r, m) in row.iter_mut().zip(&mvs[nu]) {
                        *r += sign * k * m;
                    }
                }
            }
            if with_trace {
                let m = self.tmat.left[mu];
                for (r, p) in row.iter_mut().zip(&mprev) {
                    *r -= sign * m * p;
                }
            }
        }
    }

    /// `R_n(U) = -[(K_t (x) M_x) V - (m_t (x) M_x) v^-; 0] + (tau M_t (x) I) F(U)`,
    /// with every spatial residual evaluated at its node time and pressure
    /// rows restricted to mean-zero tests when the pressure has a null space.
    pub fn residual(&self, u: &[f64]) -> Result<Vec<f64>, FormsError> {
        let bs = self.boundary_states()?;
        self.residual_with(u, &bs)
    }

    pub fn residual_with(&self, u: &[f64], bs: &[BoundaryState]) -> Result<Vec<f64>, FormsError> {
        self.residual_lagged(u, u, bs)
    }

    /// Residual with the inflow and CIP weights taken from the slab vector
    /// `advect`; the Jacobian is the exact derivative of this map at `advect = u`.
    pub fn residual_lagged(
        &self,
        u: &[f64],
        advect: &[f64],
        bs: &[BoundaryState],
    ) -> Result<Vec<f64>, FormsError> {
        assert_eq!(u.len(), self.len());
        assert_eq!(advect.len(), self.len());
        let n = self.block_len();
        let mut out = vec![0.0; self.len()];
        for mu in 0..self.num_nodes() {
            let ub = self.block(u, mu);
            let mut f = self.disc.spatial_residual_with(
                ub,
                self.node_time(mu),
                self.data,
                &self.params,
                self.block(advect, mu),
                &bs[mu],
            )?;
            self.disc.project_pressure_test_space(&mut f);
            let scale = self.tau * self.tmat.mass[mu][mu];
            for (o, fi) in out[mu * n..(mu + 1) * n].iter_mut().zip(&f) {
                *o = scale * fi;
            }
        }
        self.add_time_derivative(u, &mut out, -1.0, true);
        Ok(out)
    }

    /// `J_n dU = (K_t (x) M_x) dV + (tau M_t (x) I) diag(J_mu) dU`.
    pub fn jacobian_apply(
        &self,
        u: &[f64],
        variant: &TangentVariant<f64>,
        du: &[f64],
    ) -> Result<Vec<f64>, FormsError> {
        let n = self.block_len();
        let mut out = vec![0.0; self.len()];
        for mu in 0..self.num_nodes() {
            let ub = self.block(u, mu);
            let mut y = self.disc.spatial_jacobian_apply(
                ub,
                self.node_time(mu),
                self.data,
                &self.params,
                ub,
                variant,
                self.block(du, mu),
            )?;
            self.disc.project_pressure_test_space(&mut y);
            let scale = self.tau * self.tmat.mass[mu][mu];
            for (o, yi) in out[mu * n..(mu + 1) * n].iter_mut().zip(&y) {
                *o = scale * yi;
            }
        }
        self.add_time_derivative(du, &mut out, 1.0, false);
        Ok(out)
    }

    /// Assembled spatial Jacobians `J_mu` (unscaled, without the test-space
    /// restriction) at every temporal node.
    pub fn node_jacobians(
        &self,
        u: &[f64],
        variant: &TangentVariant<f64>,
    ) -> Result<Vec<CsMat<f64>>, FormsError> {
        (0..self.num_nodes())
            .map(|mu| {
                let ub = self.block(u, mu);
                self.disc.spatial_jacobian_assemble(
                    ub,
                    self.node_time(mu),
                    self.data,
                    &self.params,
                    ub,
                    variant,
                )
            })
            .collect()
    }

    /// `sqrt(r_v^T (tau M_t (x) M_v) r_v + r_p^T (tau M_t (x) M_p) r_p)`.
    pub fn mass_weighted_norm(&self, r: &[f64]) -> f64 {
        mass_weighted_norm(self.disc, &self.tmat.mass, self.tau, r)
    }

    pub fn left_trace(&self, u: &[f64]) -> Vec<f64> {
        left_trace(self.disc, u, self.num_nodes())
    }

    /// Velocity at the left endpoint of the slab, `sum_mu m_t[mu] V_mu`.
    pub fn left_endpoint_value(&self, u: &[f64]) -> Vec<f64> {
        let n = self.block_len();
        let mv = self.disc.num_velocity_dofs();
        let mut out = vec![0.0; mv];
        for mu in 0..self.num_nodes() {
            let m = self.tmat.left[mu];
            for (o, x) in out.iter_mut().zip(&u[mu * n..mu * n + mv]) {
                *o += m * x;
            }
        }
        out
    }

    /// Constant-in-time extension of the incoming trace; the pressure is
    /// copied from `pressure` (zero when absent).
    pub fn initial_guess(&self, pressure: Option<&[f64]>) -> Vec<f64> {
        let n = self.block_len();
        let mv = self.disc.num_velocity_dofs();
        let mut u = vec![0.0; self.len()];
        for mu in 0..self.num_nodes() {
            u[mu * n..mu * n + mv].copy_from_slice(self.v_prev);
            if let Some(p) = pressure {
                u[mu * n + mv..(mu + 1) * n].copy_from_slice(p);
            }
        }
        u
    }

    /// Shifts every nodal pressure block to zero mean when the pressure has
    /// a null space.
    pub fn normalize_pressure(&self, u: &mut [f64]) {
        if !self.disc.has_pressure_nullspace() {
            return;
        }
        let n = self.block_len();
        let mv = self.disc.num_velocity_dofs();
        for mu in 0..self.num_nodes() {
            self.disc
                .pres
                .normalize_mean(&mut u[mu * n + mv..(mu + 1) * n]);
        }
    }
}

/// Block mass-weighted norm of a slab vector.
pub fn mass_weighted_norm(
    disc: &Discretization,
    temporal_mass: &[Vec<f64>],
    tau: f64,
    r: &[f64],
) -> f64 {
    mass_weighted_dot(disc, temporal_mass, tau, r, r).max(0.0).sqrt()
}

pub fn mass_weighted_dot(
    disc: &Discretization,
    temporal_mass: &[Vec<f64>],
    tau: f64,
    a: &[f64],
    b: &[f64],
) -> f64 {
    let n = disc.num_dofs();
    let mv = disc.num_velocity_dofs();
    let mut tmp = vec![0.0; n];
    let mut total = 0.0;
    for (mu, row) in temporal_mass.iter().enumerate() {
        let w = tau * row[mu];
        let ab = &a[mu * n..(mu + 1) * n];
        let bb = &b[mu * n..(mu + 1) * n];
        spmv(disc.velocity_mass(), &bb[..mv], &mut tmp[..mv]);
        spmv(disc.pressure_mass(), &bb[mv..], &mut tmp[mv..]);
        total += w * ab.iter().zip(&tmp).map(|(x, y)| x * y).sum::<f64>();
    }
    total
}

/// Velocity block at the last temporal node.
pub fn left_trace(disc: &Discretization, u: &[f64], num_nodes: usize) -> Vec<f64> {
    let n = disc.num_dofs();
    let mv = disc.num_velocity_dofs();
    let start = (num_nodes - 1) * n;
    u[start..start + mv].to_vec()
}

#[derive(Debug, Error)]
#[error("slab {slab} failed: {source}")]
pub struct MarchError<E: std::error::Error + 'static> {
    pub slab: usize,
    #[source]
    pub source: E,
}

/// Solutions and solver statistics of every slab.
#[derive(Debug, Clone)]
pub struct Trajectory<S> {
    pub slabs: Vec<Vec<f64>>,
    pub stats: Vec<S>,
}

/// Solves the slabs of `partition` one after another. `solve` receives the
/// context, an initial guess and the 1-based slab index.
#[allow(clippy::too_many_arguments)]
pub fn march<D, S, E, F>(
    disc: &Discretization,
    basis: &TemporalBasis<f64>,
    tmat: &TemporalMatrices<f64>,
    partition: &TimePartition<f64>,
    data: &D,
    params: ModelParams<f64>,
    v0: &[f64],
    mut solve: F,
) -> Result<Trajectory<S>, MarchError<E>>
where
    D: ProblemData + ?Sized,
    E: std::error::Error + 'static,
    F: FnMut(&SlabContext<'_, D>, Vec<f64>, usize) -> Result<(Vec<f64>, S), E>,
{
    let mut slabs: Vec<Vec<f64>> = Vec::with_capacity(partition.num_steps());
    let mut stats = Vec::with_capacity(partition.num_steps());
    let mut trace = v0.to_vec();
    let n = disc.num_dofs();
    let mv = disc.num_velocity_dofs();
    let s = basis.num_nodes();
    for step in 1..=partition.num_steps() {
        let (t0, t1) = partition.interval(step);
        let ctx = SlabContext {
            disc,
            basis,
            tmat,
            t0,
            tau: t1 - t0,
            v_prev: &trace,
            data,
            params,
        };
        let pressure = slabs.last().map(|u| u[(s - 1) * n + mv..s * n].to_vec());
        let guess = ctx.initial_guess(pressure.as_deref());
        let (u, st) = solve(&ctx, guess, step).map_err(|source| MarchError { slab: step, source })?;
        trace = left_trace(disc, &u, s);
        slabs.push(u);
        stats.push(st);
    }
    Ok(Trajectory { slabs, stats })
}
