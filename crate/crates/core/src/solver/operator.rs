//! Assembled slab operator `K_t (x) M_v + diag(B_1, ..., B_{k+1})` on one
//! multigrid level, where `B_mu = tau w_mu J_mu` on the finest level and its
//! Galerkin image on coarser ones.

use nalgebra::DMatrix;
use sprs::CsMat;

use crate::sparse::{entry_index, galerkin_product, spmv};

use super::transfer::Transfer;

#[derive(Debug, Clone)]
pub struct SlabOperator {
    pub stiffness: Vec<Vec<f64>>,
    pub mass_v: CsMat<f64>,
    pub blocks: Vec<CsMat<f64>>,
    /// Restrict pressure rows to mean-zero tests (finest level only).
    pub project_pressure: bool,
}

/// Value of `a[i][j]`, zero outside the pattern.
#[inline]
pub fn csr_get(a: &CsMat<f64>, i: usize, j: usize) -> f64 {
    let ip = a.indptr();
    entry_index(ip.raw_storage(), a.indices(), i, j)
        .map(|k| a.data()[k])
        .unwrap_or(0.0)
}

impl SlabOperator {
    pub fn num_nodes(&self) -> usize {
        self.blocks.len()
    }

    pub fn num_velocity(&self) -> usize {
        self.mass_v.rows()
    }

    pub fn block_len(&self) -> usize {
        self.blocks[0].rows()
    }

    pub fn len(&self) -> usize {
        self.num_nodes() * self.block_len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn project_block(&self, y: &mut [f64]) {
        let mv = self.num_velocity();
        let nc = (y.len() - mv) / 3;
        let mean = (0..nc).map(|c| y[mv + 3 * c]).sum::<f64>() / nc as f64;
        for c in 0..nc {
            y[mv + 3 * c] -= mean;
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let n = self.block_len();
        let mv = self.num_velocity();
        let s = self.num_nodes();
        let mut y = vec![0.0; self.len()];
        let mut mx = vec![vec![0.0; mv]; s];
        for nu in 0..s {
            spmv(&self.mass_v, &x[nu * n..nu * n + mv], &mut mx[nu]);
        }
        for mu in 0..s {
            let yb = &mut y[mu * n..(mu + 1) * n];
            spmv(&self.blocks[mu], &x[mu * n..(mu + 1) * n], yb);
            for nu in 0..s {
                let k = self.stiffness[mu][nu];
                if k != 0.0 {
                    for (a, b) in yb[..mv].iter_mut().zip(&mx[nu]) {
                        *a += k * b;
                    }
                }
            }
            if self.project_pressure {
                self.project_block(yb);
            }
        }
        y
    }

    /// `r - A x`.
    pub fn defect(&self, r: &[f64], x: &[f64]) -> Vec<f64> {
        let ax = self.apply(x);
        r.iter().zip(&ax).map(|(a, b)| a - b).collect()
    }

    /// Entry at slab indices `(i, j)`, ignoring the pressure projection.
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        let n = self.block_len();
        let mv = self.num_velocity();
        let (mu, li) = (i / n, i % n);
        let (nu, lj) = (j / n, j % n);
        let mut v = 0.0;
        if li < mv && lj < mv {
            let k = self.stiffness[mu][nu];
            if k != 0.0 {
                v += k * csr_get(&self.mass_v, li, lj);
            }
        }
        if mu == nu {
            v += csr_get(&self.blocks[mu], li, lj);
        }
        v
    }

    /// Dense copy including the projection, for coarse solves and oracles.
    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.block_len();
        let mv = self.num_velocity();
        let s = self.num_nodes();
        let mut a = DMatrix::zeros(self.len(), self.len());
        for mu in 0..s {
            for (v, (i, j)) in self.blocks[mu].iter() {
                a[(mu * n + i, mu * n + j)] += *v;
            }
            for nu in 0..s {
                let k = self.stiffness[mu][nu];
                if k == 0.0 {
                    continue;
                }
                for (v, (i, j)) in self.mass_v.iter() {
                    a[(mu * n + i, nu * n + j)] += k * v;
                }
            }
        }
        if self.project_pressure {
            let nc = (n - mv) / 3;
            for mu in 0..s {
                for col in 0..a.ncols() {
                    let mean = (0..nc).map(|c| a[(mu * n + mv + 3 * c, col)]).sum::<f64>()
                        / nc as f64;
                    for c in 0..nc {
                        a[(mu * n + mv + 3 * c, col)] -= mean;
                    }
                }
            }
        }
        a
    }

    /// Galerkin coarse operator `(I (x) P)^T A (I (x) P)` without projection.
    pub fn galerkin(&self, t: &Transfer) -> SlabOperator {
        SlabOperator {
            stiffness: self.stiffness.clone(),
            mass_v: galerkin_product(&self.mass_v, &t.vel),
            blocks: self.blocks.iter().map(|b| galerkin_product(b, &t.full)).collect(),
            project_pressure: false,
        }
    }
}
