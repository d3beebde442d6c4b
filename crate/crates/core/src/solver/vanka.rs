//! Cell-based space-time Vanka patches: all velocity and pressure dofs of a
//! cell at every temporal node, solved densely and combined additively.

use nalgebra::{DMatrix, DVector, Dyn, LU};
use rayon::prelude::*;

use super::operator::SlabOperator;
use super::SolverError;

#[derive(Debug, Clone)]
pub struct Patch {
    /// Slab indices, node-major.
    pub dofs: Vec<usize>,
    pub matrix: DMatrix<f64>,
    lu: LU<f64, Dyn, Dyn>,
}

impl Patch {
    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let b = DVector::from_column_slice(rhs);
        self.lu
            .solve(&b)
            .map(|x| x.as_slice().to_vec())
            .unwrap_or_else(|| vec![0.0; rhs.len()])
    }
}

#[derive(Debug, Clone)]
pub struct PatchSet {
    pub patches: Vec<Patch>,
    /// `1 / (number of patches containing the dof)`, zero for uncovered dofs.
    pub inv_multiplicity: Vec<f64>,
    pub weighting: PatchWeighting,
}

/// How overlapping local corrections are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PatchWeighting {
    /// Plain sum `sum_K R_K^T A_K^{-1} R_K`.
    #[default]
    Sum,
    /// Each entry of the sum divided by its patch multiplicity.
    Average,
}

impl PatchWeighting {
    pub fn label(self) -> &'static str {
        match self {
            PatchWeighting::Sum => "sum",
            PatchWeighting::Average => "average",
        }
    }
}

/// Slab indices of a spatial index set replicated over `num_nodes` nodes.
pub fn slab_indices(spatial: &[usize], num_nodes: usize, block_len: usize) -> Vec<usize> {
    let mut out = Vec::with_capacity(spatial.len() * num_nodes);
    for mu in 0..num_nodes {
        out.extend(spatial.iter().map(|&i| mu * block_len + i));
    }
    out
}

impl PatchSet {
    /// Extracts and factorizes `R_K A R_K^T` for every spatial patch.
    pub fn build(op: &SlabOperator, cells: &[Vec<usize>], level: usize) -> Result<Self, SolverError> {
        let s = op.num_nodes();
        let n = op.block_len();
        let patches = cells
            .par_iter()
            .enumerate()
            .map(|(k, cell)| {
                let dofs = slab_indices(cell, s, n);
                let m = dofs.len();
                let matrix = DMatrix::from_fn(m, m, |i, j| op.entry(dofs[i], dofs[j]));
                let lu = matrix.clone().lu();
                if !lu.is_invertible() || !matrix.iter().all(|v| v.is_finite()) {
                    return Err(SolverError::SingularPatch { level, patch: k });
                }
                Ok(Patch { dofs, matrix, lu })
            })
            .collect::<Result<Vec<_>, _>>()?;
        let mut count = vec![0usize; op.len()];
        for p in &patches {
            for &i in &p.dofs {
                count[i] += 1;
            }
        }
        let inv_multiplicity = count
            .into_iter()
            .map(|c| if c == 0 { 0.0 } else { 1.0 / c as f64 })
            .collect();
        Ok(Self {
            patches,
            inv_multiplicity,
            weighting: PatchWeighting::Sum,
        })
    }

    pub fn len(&self) -> usize {
        self.patches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patches.is_empty()
    }

    pub fn with_weighting(mut self, weighting: PatchWeighting) -> Self {
        self.weighting = weighting;
        self
    }

    /// `sum_K R_K^T A_K^{-1} R_K defect`, optionally averaged over overlaps.
    pub fn correction(&self, defect: &[f64]) -> Vec<f64> {
        let local: Vec<Vec<f64>> = self
            .patches
            .par_iter()
            .map(|p| {
                let rhs: Vec<f64> = p.dofs.iter().map(|&i| defect[i]).collect();
                p.solve(&rhs)
            })
            .collect();
        let mut out = vec![0.0; defect.len()];
        for (p, x) in self.patches.iter().zip(&local) {
            for (&i, v) in p.dofs.iter().zip(x) {
                out[i] += v;
            }
        }
        if self.weighting == PatchWeighting::Average {
            for (o, w) in out.iter_mut().zip(&self.inv_multiplicity) {
                *o *= w;
            }
        }
        out
    }

    /// `steps` damped additive sweeps `d <- d + omega C (r - A d)`.
    pub fn smooth(&self, op: &SlabOperator, d: &mut [f64], r: &[f64], steps: usize, omega: f64) {
        if omega == 0.0 {
            return;
        }
        for _ in 0..steps {
            let defect = op.defect(r, d);
            let c = self.correction(&defect);
            for (di, ci) in d.iter_mut().zip(&c) {
                *di += omega * ci;
            }
        }
    }
}

/// Dense perturbation diagnostics of one patch pair `A`, `A~ = A + E`.
#[derive(Debug, Clone, Copy)]
pub struct PatchPerturbation {
    pub patch: usize,
    /// `||E||_2`.
    pub e_norm: f64,
    /// `||A^{-1} E||_2`.
    pub epsilon: f64,
    /// `max |z - 1|` over the eigenvalues `z` of `A^{-1} A~`.
    pub spectral_radius: f64,
}

impl PatchPerturbation {
    pub fn within_disk(&self, slack: f64) -> bool {
        self.spectral_radius <= self.epsilon + slack
    }
}

#[derive(Debug, Clone, Default)]
pub struct PerturbationReport {
    pub patches: Vec<PatchPerturbation>,
    /// Patches whose exact matrix is singular.
    pub skipped: Vec<usize>,
}

impl PerturbationReport {
    pub fn median_epsilon(&self) -> f64 {
        let mut e: Vec<f64> = self.patches.iter().map(|p| p.epsilon).collect();
        if e.is_empty() {
            return f64::NAN;
        }
        e.sort_by(|a, b| a.total_cmp(b));
        let m = e.len();
        if m % 2 == 1 {
            e[m / 2]
        } else {
            0.5 * (e[m / 2 - 1] + e[m / 2])
        }
    }
}

/// Compares exact and surrogate patches on the same index sets.
pub fn patch_perturbation_report(exact: &PatchSet, surrogate: &PatchSet) -> PerturbationReport {
    assert_eq!(exact.len(), surrogate.len());
    let results: Vec<Result<PatchPerturbation, usize>> = exact
        .patches
        .par_iter()
        .zip(&surrogate.patches)
        .enumerate()
        .map(|(k, (a, at))| perturbation(k, &a.matrix, &at.matrix))
        .collect();
    let mut report = PerturbationReport::default();
    for r in results {
        match r {
            Ok(p) => report.patches.push(p),
            Err(k) => report.skipped.push(k),
        }
    }
    report
}

/// Diagnostics for one pair of dense matrices; `Err(patch)` when `A` is singular.
pub fn perturbation(patch: usize, a: &DMatrix<f64>, at: &DMatrix<f64>) -> Result<PatchPerturbation, usize> {
    let e = at - a;
    let lu = a.clone().lu();
    let ae = lu.solve(&e).ok_or(patch)?;
    if !ae.iter().all(|v| v.is_finite()) {
        return Err(patch);
    }
    let e_norm = e.singular_values().max();
    let epsilon = ae.singular_values().max();
    let spectral_radius = ae
        .complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0f64, f64::max);
    Ok(PatchPerturbation {
        patch,
        e_norm,
        epsilon,
        spectral_radius,
    })
}
