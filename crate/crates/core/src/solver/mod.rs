//! Nonlinear and linear solvers for the slab systems.

pub mod fgmres;
pub mod multigrid;
pub mod newton;
pub mod operator;
pub mod transfer;
pub mod vanka;

use thiserror::Error;

use crate::forms::FormsError;

pub use fgmres::{fgmres, FgmresOutcome, KrylovConfig, KrylovError};
pub use multigrid::{CoarseMode, MgConfig, MgLevel, Multigrid};
pub use newton::{
    forcing_term, nonlinear_solve_slab, rebuild_policy, slab_mass_apply, solve_trajectory,
    NewtonConfig, NewtonError, SlabStats, StepStats,
};
pub use operator::SlabOperator;
pub use transfer::Transfer;
pub use vanka::{patch_perturbation_report, PatchPerturbation, PatchSet, PatchWeighting, PerturbationReport};

#[derive(Debug, Error)]
pub enum SolverError {
    #[error(transparent)]
    Forms(#[from] FormsError),
    #[error("singular patch {patch} on level {level}")]
    SingularPatch { level: usize, patch: usize },
    #[error("singular coarse-grid operator")]
    SingularCoarse,
    #[error("{0}")]
    Config(String),
}
