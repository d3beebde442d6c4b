//! Monolithic space-time multigrid: one V-cycle over spatially coarsened
//! slab operators with Vanka smoothing and a pinned dense coarse solve.

use nalgebra::{DMatrix, DVector, Dyn, LU};

use crate::constitutive::TangentVariant;
use crate::forms::{Discretization, DiscretizationConfig, ProblemData};
use crate::mesh::MeshHierarchy;
use crate::slab::SlabContext;

use super::operator::SlabOperator;
use super::transfer::{inject_state, Transfer};
use super::vanka::{PatchSet, PatchWeighting};
use super::SolverError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoarseMode {
    Galerkin,
    Rediscretize,
}

impl CoarseMode {
    pub fn label(self) -> &'static str {
        match self {
            CoarseMode::Galerkin => "galerkin",
            CoarseMode::Rediscretize => "rediscretize",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MgConfig {
    pub pre_smooth: usize,
    pub post_smooth: usize,
    pub omega: f64,
    /// Finest-level patches from one representative spatial block.
    pub surrogate: bool,
    /// Representative time as a fraction of the step.
    pub rep_theta: f64,
    pub rebuild_ratio: f64,
    pub rebuild_factor: f64,
    pub coarse_mode: CoarseMode,
    pub weighting: PatchWeighting,
}

impl Default for MgConfig {
    fn default() -> Self {
        Self {
            pre_smooth: 2,
            post_smooth: 2,
            omega: 0.7,
            surrogate: true,
            rep_theta: 0.5,
            rebuild_ratio: 0.9,
            rebuild_factor: 2.0,
            coarse_mode: CoarseMode::Galerkin,
            weighting: PatchWeighting::Average,
        }
    }
}

impl MgConfig {
    pub fn validate(&self) -> Result<(), SolverError> {
        if !(self.omega > 0.0 && self.omega <= 1.0) {
            return Err(SolverError::Config(format!("omega {} not in (0, 1]", self.omega)));
        }
        if !(0.0..=1.0).contains(&self.rep_theta) {
            return Err(SolverError::Config(format!(
                "representative point {} not in [0, 1]",
                self.rep_theta
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct MgLevel {
    pub disc: Discretization,
    /// Spatial index sets of the cell patches.
    pub cells: Vec<Vec<usize>>,
    pub op: Option<SlabOperator>,
    pub patches: Option<PatchSet>,
}

impl MgLevel {
    fn new(disc: Discretization) -> Self {
        let cells = (0..disc.mesh.num_cells())
            .map(|c| disc.cell_globals(c).to_vec())
            .collect();
        Self {
            disc,
            cells,
            op: None,
            patches: None,
        }
    }
}

/// Dense coarse solve. With a pressure null space the constant pressure
/// modes are pinned by a rank-`s` update and the result is shifted to zero
/// mean pressure at every node.
#[derive(Debug, Clone)]
struct CoarseSolver {
    lu: LU<f64, Dyn, Dyn>,
    pinned: bool,
}

#[derive(Debug, Clone)]
pub struct Multigrid {
    pub config: MgConfig,
    /// Coarsest first.
    pub levels: Vec<MgLevel>,
    /// `transfers[l]` maps level `l` to level `l + 1`.
    pub transfers: Vec<Transfer>,
    coarse: Option<CoarseSolver>,
}

/// `tau w_mu J_mu` for every temporal node.
fn scaled_blocks<D: ProblemData + ?Sized>(
    ctx: &SlabContext<'_, D>,
    jac: Vec<sprs::CsMat<f64>>,
) -> Vec<sprs::CsMat<f64>> {
    jac.into_iter()
        .enumerate()
        .map(|(mu, j)| j.map(|v| ctx.tau * ctx.tmat.mass[mu][mu] * v))
        .collect()
}

/// Evaluation of the slab polynomial at reference time `theta`.
pub fn representative_state<D: ProblemData + ?Sized>(
    ctx: &SlabContext<'_, D>,
    u: &[f64],
    theta: f64,
) -> Vec<f64> {
    let n = ctx.block_len();
    let w = ctx.basis.eval_all(theta);
    let mut out = vec![0.0; n];
    for (mu, wm) in w.iter().enumerate() {
        for (o, x) in out.iter_mut().zip(ctx.block(u, mu)) {
            *o += wm * x;
        }
    }
    out
}

impl Multigrid {
    pub fn new(
        hierarchy: &MeshHierarchy,
        disc_config: DiscretizationConfig,
        config: MgConfig,
    ) -> Result<Self, SolverError> {
        config.validate()?;
        let levels: Vec<MgLevel> = hierarchy
            .levels
            .iter()
            .map(|m| MgLevel::new(Discretization::new(m, disc_config)))
            .collect();
        let transfers = hierarchy
            .levels
            .windows(2)
            .map(|w| Transfer::new(&w[0], &w[1]))
            .collect();
        Ok(Self {
            config,
            levels,
            transfers,
            coarse: None,
        })
    }

    pub fn num_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn finest(&self) -> &MgLevel {
        self.levels.last().unwrap()
    }

    pub fn fine_operator(&self) -> Option<&SlabOperator> {
        self.finest().op.as_ref()
    }

    /// Exact finest operator `K_t (x) M_v + diag(tau w_mu J_mu)` at `u`.
    pub fn fine_slab_operator<D: ProblemData + ?Sized>(
        ctx: &SlabContext<'_, D>,
        u: &[f64],
        variant: &TangentVariant<f64>,
    ) -> Result<SlabOperator, SolverError> {
        let jac = ctx.node_jacobians(u, variant)?;
        Ok(SlabOperator {
            stiffness: ctx.tmat.stiffness.clone(),
            mass_v: ctx.disc.velocity_mass().clone(),
            blocks: scaled_blocks(ctx, jac),
            project_pressure: ctx.disc.has_pressure_nullspace(),
        })
    }

    /// Finest-level surrogate operator `K_t (x) M_v + (tau M_t) (x) J_rep`.
    pub fn surrogate_slab_operator<D: ProblemData + ?Sized>(
        ctx: &SlabContext<'_, D>,
        u: &[f64],
        variant: &TangentVariant<f64>,
        theta: f64,
    ) -> Result<SlabOperator, SolverError> {
        let rep = representative_state(ctx, u, theta);
        let t = ctx.t0 + theta * ctx.tau;
        let j = ctx
            .disc
            .spatial_jacobian_assemble(&rep, t, ctx.data, &ctx.params, &rep, variant)?;
        let jac = vec![j; ctx.num_nodes()];
        Ok(SlabOperator {
            stiffness: ctx.tmat.stiffness.clone(),
            mass_v: ctx.disc.velocity_mass().clone(),
            blocks: scaled_blocks(ctx, jac),
            project_pressure: false,
        })
    }

    /// Rebuilds the operators for the Newton state `u`. Finest-level patches
    /// are refreshed only when `rebuild_fine` is set or none exist; coarse
    /// levels always follow the new state.
    pub fn update<D: ProblemData + ?Sized>(
        &mut self,
        ctx: &SlabContext<'_, D>,
        u: &[f64],
        variant: &TangentVariant<f64>,
        rebuild_fine: bool,
    ) -> Result<(), SolverError> {
        let nl = self.levels.len();
        let top = nl - 1;
        assert_eq!(
            self.levels[top].disc.num_dofs(),
            ctx.block_len(),
            "hierarchy does not match the slab discretization"
        );
        let fine = Self::fine_slab_operator(ctx, u, variant)?;
        if top > 0 && (rebuild_fine || self.levels[top].patches.is_none()) {
            let patches = if self.config.surrogate {
                let sur = Self::surrogate_slab_operator(ctx, u, variant, self.config.rep_theta)?;
                PatchSet::build(&sur, &self.levels[top].cells, top)?.with_weighting(self.config.weighting)
            } else {
                PatchSet::build(&fine, &self.levels[top].cells, top)?.with_weighting(self.config.weighting)
            };
            self.levels[top].patches = Some(patches);
        }
        self.levels[top].op = Some(fine);

        let s = ctx.num_nodes();
        let mut states: Vec<Vec<f64>> = (0..s).map(|mu| ctx.block(u, mu).to_vec()).collect();
        for l in (0..top).rev() {
            let op = match self.config.coarse_mode {
                CoarseMode::Galerkin => self.levels[l + 1]
                    .op
                    .as_ref()
                    .unwrap()
                    .galerkin(&self.transfers[l]),
                CoarseMode::Rediscretize => {
                    let (cm, fm) = (&self.levels[l].disc.mesh, &self.levels[l + 1].disc.mesh);
                    states = states.iter().map(|x| inject_state(cm, fm, x)).collect();
                    let disc = &self.levels[l].disc;
                    let jac = states
                        .iter()
                        .enumerate()
                        .map(|(mu, x)| {
                            disc.spatial_jacobian_assemble(
                                x,
                                ctx.node_time(mu),
                                ctx.data,
                                &ctx.params,
                                x,
                                variant,
                            )
                        })
                        .collect::<Result<Vec<_>, _>>()?;
                    SlabOperator {
                        stiffness: ctx.tmat.stiffness.clone(),
                        mass_v: disc.velocity_mass().clone(),
                        blocks: scaled_blocks(ctx, jac),
                        project_pressure: false,
                    }
                }
            };
            if l > 0 {
                self.levels[l].patches = Some(
                    PatchSet::build(&op, &self.levels[l].cells, l)?
                        .with_weighting(self.config.weighting),
                );
            }
            self.levels[l].op = Some(op);
        }
        self.coarse = Some(self.factor_coarse()?);
        Ok(())
    }

    fn factor_coarse(&self) -> Result<CoarseSolver, SolverError> {
        let lvl = &self.levels[0];
        let op = lvl.op.as_ref().unwrap();
        let mut a = op.to_dense();
        let pinned = lvl.disc.has_pressure_nullspace();
        if pinned {
            let n = op.block_len();
            let mv = op.num_velocity();
            let nc = lvl.disc.mesh.num_cells();
            let mut alpha = 0.0f64;
            for mu in 0..op.num_nodes() {
                for c in 0..nc {
                    let col = a.column(mu * n + mv + 3 * c);
                    alpha = alpha.max(col.amax());
                }
            }
            if alpha == 0.0 {
                alpha = 1.0;
            }
            for mu in 0..op.num_nodes() {
                for ci in 0..nc {
                    for cj in 0..nc {
                        a[(mu * n + mv + 3 * ci, mu * n + mv + 3 * cj)] += alpha;
                    }
                }
            }
        }
        let lu = a.lu();
        if !lu.is_invertible() {
            return Err(SolverError::SingularCoarse);
        }
        Ok(CoarseSolver { lu, pinned })
    }

    fn coarse_solve(&self, r: &[f64]) -> Vec<f64> {
        let cs = self.coarse.as_ref().expect("multigrid used before update");
        let mut x = cs
            .lu
            .solve(&DVector::from_column_slice(r))
            .map(|v| v.as_slice().to_vec())
            .unwrap_or_else(|| vec![0.0; r.len()]);
        if cs.pinned {
            let lvl = &self.levels[0];
            let n = lvl.disc.num_dofs();
            let mv = lvl.disc.num_velocity_dofs();
            for blk in x.chunks_mut(n) {
                lvl.disc.pres.normalize_mean(&mut blk[mv..]);
            }
        }
        x
    }

    /// One V-cycle for `A_L d = r` from `d = 0`.
    pub fn vcycle(&self, r: &[f64]) -> Vec<f64> {
        self.cycle(self.levels.len() - 1, r)
    }

    fn cycle(&self, l: usize, r: &[f64]) -> Vec<f64> {
        if l == 0 {
            return self.coarse_solve(r);
        }
        let lvl = &self.levels[l];
        let op = lvl.op.as_ref().expect("multigrid used before update");
        let patches = lvl.patches.as_ref().expect("missing patches");
        let s = op.num_nodes();
        let cfg = &self.config;
        let mut d = vec![0.0; r.len()];
        patches.smooth(op, &mut d, r, cfg.pre_smooth, cfg.omega);
        let defect = op.defect(r, &d);
        let rc = self.transfers[l - 1].restrict_slab(&defect, s);
        let dc = self.cycle(l - 1, &rc);
        let corr = self.transfers[l - 1].prolongate_slab(&dc, s);
        for (a, b) in d.iter_mut().zip(&corr) {
            *a += b;
        }
        patches.smooth(op, &mut d, r, cfg.post_smooth, cfg.omega);
        d
    }

    /// Dense copy of the coarsest operator, for diagnostics.
    pub fn coarse_dense(&self) -> Option<DMatrix<f64>> {
        self.levels[0].op.as_ref().map(|o| o.to_dense())
    }
}
