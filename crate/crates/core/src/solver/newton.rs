//! Inexact Newton (and Picard) iteration on one slab: FGMRES preconditioned
//! by one multigrid V-cycle, Eisenstat-Walker forcing and Armijo
//! backtracking on `phi = 1/2 ||R||_M^2`.

use thiserror::Error;

use crate::constitutive::{ModelParams, TangentVariant};
use crate::forms::{Discretization, FormsError, ProblemData};
use crate::slab::{march, MarchError, SlabContext, Trajectory};
use crate::sparse::spmv;
use crate::timebasis::{TemporalBasis, TemporalMatrices, TimePartition};

use super::fgmres::{fgmres, KrylovConfig, KrylovError};
use super::multigrid::{CoarseMode, Multigrid};
use super::SolverError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonConfig {
    pub variant: TangentVariant<f64>,
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_nonlinear: usize,
    pub armijo_c1: f64,
    pub backtrack: f64,
    pub min_lambda: f64,
    pub eta0: f64,
    pub ew_gamma: f64,
    pub ew_alpha: f64,
    pub eta_max: f64,
    pub picard_tol: f64,
}

impl NewtonConfig {
    pub fn new(variant: TangentVariant<f64>) -> Self {
        Self {
            variant,
            abs_tol: 1e-12,
            rel_tol: 1e-10,
            max_nonlinear: 50,
            armijo_c1: 1e-4,
            backtrack: 0.5,
            min_lambda: 1.0 / 1024.0,
            eta0: 1e-2,
            ew_gamma: 0.9,
            ew_alpha: 2.0,
            eta_max: 0.9,
            picard_tol: 1e-4,
        }
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        let ok = self.abs_tol > 0.0
            && self.rel_tol > 0.0
            && self.armijo_c1 > 0.0
            && self.armijo_c1 < 1.0
            && self.backtrack > 0.0
            && self.backtrack < 1.0
            && self.min_lambda > 0.0
            && self.eta0 > 0.0
            && self.eta_max < 1.0
            && self.picard_tol > 0.0
            && self.max_nonlinear > 0;
        if ok {
            Ok(())
        } else {
            Err(SolverError::Config("invalid nonlinear solver settings".into()))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepStats {
    pub linear_iterations: usize,
    pub lambda: f64,
    pub residual_before: f64,
    pub residual_after: f64,
    pub forcing: f64,
    /// Relative linear residual reached.
    pub linear_residual: f64,
    /// Finest-level patches were rebuilt before this step.
    pub rebuilt: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SlabStats {
    pub slab: usize,
    pub variant: &'static str,
    pub coarse_mode: CoarseMode,
    pub levels: usize,
    pub initial_residual: f64,
    pub final_residual: f64,
    pub steps: Vec<StepStats>,
}

impl SlabStats {
    pub fn nonlinear_iterations(&self) -> usize {
        self.steps.len()
    }

    pub fn linear_iterations(&self) -> usize {
        self.steps.iter().map(|s| s.linear_iterations).sum()
    }

    pub fn rebuilds(&self) -> usize {
        self.steps.iter().filter(|s| s.rebuilt).count()
    }
}

#[derive(Debug, Error)]
pub enum NewtonError {
    #[error("slab {slab}: line search failed in iteration {iteration} (residual {residual:e})")]
    LineSearch {
        slab: usize,
        iteration: usize,
        residual: f64,
    },
    #[error("slab {slab}: no convergence in {iterations} nonlinear iterations (residual {residual:e})")]
    MaxIterations {
        slab: usize,
        iterations: usize,
        residual: f64,
    },
    #[error("slab {slab}: linear solve failed in iteration {iteration}: {source}")]
    Krylov {
        slab: usize,
        iteration: usize,
        #[source]
        source: KrylovError<SolverError>,
    },
    #[error("slab {slab}: {source}")]
    Setup {
        slab: usize,
        #[source]
        source: SolverError,
    },
}

impl NewtonError {
    pub fn slab(&self) -> usize {
        match self {
            NewtonError::LineSearch { slab, .. }
            | NewtonError::MaxIterations { slab, .. }
            | NewtonError::Krylov { slab, .. }
            | NewtonError::Setup { slab, .. } => *slab,
        }
    }
}

/// True when the patches should be rebuilt before the next linear solve.
pub fn rebuild_policy(
    residual_ratio: f64,
    last_linear: usize,
    previous_linear: Option<usize>,
    rho: f64,
    factor: f64,
) -> bool {
    residual_ratio > rho || previous_linear.is_some_and(|p| last_linear as f64 > factor * p as f64)
}

/// Eisenstat-Walker choice 2 with the usual safeguard, capped at `eta_max`
/// and floored so the linear solve does not go far below the nonlinear
/// stopping threshold.
pub fn forcing_term(
    cfg: &NewtonConfig,
    iteration: usize,
    residual: f64,
    previous_residual: f64,
    previous_eta: f64,
    stop: f64,
) -> f64 {
    let mut eta = if iteration == 0 {
        cfg.eta0
    } else {
        let e = cfg.ew_gamma * (residual / previous_residual).powf(cfg.ew_alpha);
        let safe = cfg.ew_gamma * previous_eta.powf(cfg.ew_alpha);
        if safe > 0.1 {
            e.max(safe)
        } else {
            e
        }
    };
    eta = eta.min(cfg.eta_max);
    eta.max(0.5 * stop / residual).min(cfg.eta_max)
}

/// `(tau M_t (x) diag(M_v, M_p)) x`.
pub fn slab_mass_apply(disc: &Discretization, temporal_mass: &[Vec<f64>], tau: f64, x: &[f64]) -> Vec<f64> {
    let n = disc.num_dofs();
    let mv = disc.num_velocity_dofs();
    let mut out = vec![0.0; x.len()];
    for (mu, row) in temporal_mass.iter().enumerate() {
        let w = tau * row[mu];
        let xb = &x[mu * n..(mu + 1) * n];
        let ob = &mut out[mu * n..(mu + 1) * n];
        spmv(disc.velocity_mass(), &xb[..mv], &mut ob[..mv]);
        spmv(disc.pressure_mass(), &xb[mv..], &mut ob[mv..]);
        for o in ob.iter_mut() {
            *o *= w;
        }
    }
    out
}

/// Smallest iteration budget granted to a solve with stale patches.
pub const STALE_MIN_ITERATIONS: usize = 10;

/// Solves `R_n(U) = 0` on one slab starting from `u0`.
pub fn nonlinear_solve_slab<D: ProblemData + ?Sized>(
    ctx: &SlabContext<'_, D>,
    u0: Vec<f64>,
    newton: &NewtonConfig,
    krylov: &KrylovConfig,
    mg: &mut Multigrid,
    slab: usize,
) -> Result<(Vec<f64>, SlabStats), NewtonError> {
    let setup = |source: SolverError| NewtonError::Setup { slab, source };
    let forms = |e: FormsError| setup(SolverError::Forms(e));
    newton.validate().map_err(setup)?;
    let variant = newton.variant;
    let picard = variant.is_picard();
    let bs = ctx.boundary_states().map_err(forms)?;
    let mut u = u0;
    let mut r = ctx.residual_with(&u, &bs).map_err(forms)?;
    let mut rn = ctx.mass_weighted_norm(&r);
    let mut stats = SlabStats {
        slab,
        variant: variant.label(),
        coarse_mode: mg.config.coarse_mode,
        levels: mg.num_levels(),
        initial_residual: rn,
        final_residual: rn,
        steps: Vec::new(),
    };
    let stop = newton.abs_tol.max(newton.rel_tol * rn);
    let mass = |x: &[f64]| slab_mass_apply(ctx.disc, &ctx.tmat.mass, ctx.tau, x);
    let mut rebuild = true;
    let mut prev_linear: Option<usize> = None;
    let mut prev_rn = rn;
    let mut prev_eta = newton.eta0;
    for m in 0..newton.max_nonlinear {
        if rn <= stop {
            break;
        }
        if !rn.is_finite() {
            return Err(NewtonError::MaxIterations {
                slab,
                iterations: m,
                residual: rn,
            });
        }
        let eta = if picard {
            newton.picard_tol
        } else {
            forcing_term(newton, m, rn, prev_rn, prev_eta, stop)
        };
        // With stale finest-level patches the solve is cut off once it needs
        // more than `rebuild_factor` times the previous iteration count (but at
        // least `STALE_MIN_ITERATIONS`), then
        // restarted with fresh patches; both attempts count towards the work.
        let mut spent = 0;
        let out = loop {
            mg.update(ctx, &u, &variant, rebuild).map_err(setup)?;
            let mut cfg = *krylov;
            if !rebuild {
                if let Some(p) = prev_linear {
                    let cap = (mg.config.rebuild_factor * p as f64).ceil() as usize;
                    cfg.max_iterations = cfg.max_iterations.min(cap.max(STALE_MIN_ITERATIONS));
                }
            }
            let op = mg.fine_operator().expect("operator built by update");
            let mgr = &*mg;
            let res = fgmres(
                |x| Ok::<_, SolverError>(op.apply(x)),
                |x, _| Ok(mgr.vcycle(x)),
                mass,
                &r,
                eta,
                &cfg,
            );
            match res {
                Ok(out) => break out,
                Err(KrylovError::NotConverged { iterations, .. }) if !rebuild => {
                    spent += iterations;
                    rebuild = true;
                }
                Err(source) => {
                    return Err(NewtonError::Krylov {
                        slab,
                        iteration: m,
                        source,
                    })
                }
            }
        };
        let linear_iterations = spent + out.iterations;
        let delta = out.solution;
        let mut lambda = 1.0;
        let (ut, rt, rtn) = loop {
            let ut: Vec<f64> = u.iter().zip(&delta).map(|(a, b)| a + lambda * b).collect();
            let rt = ctx.residual_with(&ut, &bs).map_err(forms)?;
            let rtn = ctx.mass_weighted_norm(&rt);
            let accept = picard
                || (rtn.is_finite() && 0.5 * rtn * rtn <= (1.0 - newton.armijo_c1 * lambda) * 0.5 * rn * rn);
            if accept {
                break (ut, rt, rtn);
            }
            lambda *= newton.backtrack;
            if lambda < newton.min_lambda {
                return Err(NewtonError::LineSearch {
                    slab,
                    iteration: m,
                    residual: rn,
                });
            }
        };
        stats.steps.push(StepStats {
            linear_iterations,
            lambda,
            residual_before: rn,
            residual_after: rtn,
            forcing: eta,
            linear_residual: out.residual / rn,
            rebuilt: rebuild,
        });
        rebuild = rebuild_policy(
            rtn / rn,
            linear_iterations,
            prev_linear,
            mg.config.rebuild_ratio,
            mg.config.rebuild_factor,
        );
        prev_linear = Some(linear_iterations);
        prev_rn = rn;
        prev_eta = eta;
        u = ut;
        r = rt;
        rn = rtn;
    }
    stats.final_residual = rn;
    if rn > stop {
        return Err(NewtonError::MaxIterations {
            slab,
            iterations: stats.steps.len(),
            residual: rn,
        });
    }
    ctx.normalize_pressure(&mut u);
    Ok((u, stats))
}

/// Time marching with [`nonlinear_solve_slab`] on every slab.
#[allow(clippy::too_many_arguments)]
pub fn solve_trajectory<D: ProblemData + ?Sized>(
    disc: &Discretization,
    basis: &TemporalBasis<f64>,
    tmat: &TemporalMatrices<f64>,
    partition: &TimePartition<f64>,
    data: &D,
    params: ModelParams<f64>,
    v0: &[f64],
    newton: &NewtonConfig,
    krylov: &KrylovConfig,
    mg: &mut Multigrid,
) -> Result<Trajectory<SlabStats>, MarchError<NewtonError>> {
    march(disc, basis, tmat, partition, data, params, v0, |ctx, guess, n| {
        nonlinear_solve_slab(ctx, guess, newton, krylov, mg, n)
    })
}
