//! Geometric transfers between nested Q2/P1disc spaces. Prolongation is the
//! exact embedding of the coarse spaces; restriction is its transpose. The
//! temporal factor is the identity, so slab transfers act node by node.

use sprs::CsMat;

use crate::femspace::q2_1d;
use crate::mesh::StructuredQuadMesh;
use crate::sparse::{pattern_from_rows, scatter_add, transpose};

#[derive(Debug, Clone)]
pub struct Transfer {
    /// Velocity prolongation `M_v^fine x M_v^coarse`.
    pub vel: CsMat<f64>,
    /// Pressure prolongation `M_p^fine x M_p^coarse`.
    pub pres: CsMat<f64>,
    /// Block diagonal `diag(P_v, P_p)` on spatial states.
    pub full: CsMat<f64>,
    full_t: CsMat<f64>,
    coarse_len: usize,
    fine_len: usize,
}

/// 1D Q2 interpolation from `2 nc + 1` coarse nodes to `4 nc + 1` fine nodes
/// as `(fine, coarse, weight)` triples.
fn q2_1d_prolongation(nc: usize) -> Vec<(usize, usize, f64)> {
    let mut out = Vec::new();
    for f in 0..=4 * nc {
        let cell = (f / 4).min(nc - 1);
        let xi = (f as f64 - 4.0 * cell as f64) / 4.0;
        let (l, _) = q2_1d(xi);
        for (a, &w) in l.iter().enumerate() {
            if w != 0.0 {
                out.push((f, 2 * cell + a, w));
            }
        }
    }
    out
}

fn from_triplets(nrows: usize, ncols: usize, t: &[(usize, usize, f64)]) -> CsMat<f64> {
    let mut rows = vec![Vec::new(); nrows];
    for &(i, j, _) in t {
        rows[i].push(j);
    }
    let mut m = pattern_from_rows(rows, ncols);
    for &(i, j, v) in t {
        scatter_add(&mut m, &[i], &[j], &[v]);
    }
    m
}

impl Transfer {
    pub fn new(coarse: &StructuredQuadMesh, fine: &StructuredQuadMesh) -> Self {
        assert!(
            fine.nx == 2 * coarse.nx && fine.ny == 2 * coarse.ny,
            "meshes are not nested by one refinement"
        );
        let px = q2_1d_prolongation(coarse.nx);
        let py = q2_1d_prolongation(coarse.ny);
        let (cnx, fnx) = (2 * coarse.nx + 1, 2 * fine.nx + 1);
        let cnn = cnx * (2 * coarse.ny + 1);
        let fnn = fnx * (2 * fine.ny + 1);
        let mut vt = Vec::with_capacity(2 * px.len() * py.len());
        for &(fy, cy, wy) in &py {
            for &(fx, cx, wx) in &px {
                for c in 0..2 {
                    vt.push((c * fnn + fy * fnx + fx, c * cnn + cy * cnx + cx, wx * wy));
                }
            }
        }
        let vel = from_triplets(2 * fnn, 2 * cnn, &vt);

        // a + b (x - 1/2) + c (y - 1/2) on the parent restricted to a child
        // with offset (ox, oy) in {0, 1/2}^2.
        let mut pt = Vec::with_capacity(3 * 5 * fine.num_cells());
        for fc in 0..fine.num_cells() {
            let (i, j) = fine.cell_ij(fc);
            let cc = coarse.cell_index(i / 2, j / 2);
            let ox = 0.5 * (i % 2) as f64 - 0.25;
            let oy = 0.5 * (j % 2) as f64 - 0.25;
            pt.push((3 * fc, 3 * cc, 1.0));
            pt.push((3 * fc, 3 * cc + 1, ox));
            pt.push((3 * fc, 3 * cc + 2, oy));
            pt.push((3 * fc + 1, 3 * cc + 1, 0.5));
            pt.push((3 * fc + 2, 3 * cc + 2, 0.5));
        }
        let pres = from_triplets(3 * fine.num_cells(), 3 * coarse.num_cells(), &pt);
        Self::from_parts(vel, pres)
    }

    /// Transfer built from given blocks, e.g. identities for degenerate tests.
    pub fn from_parts(vel: CsMat<f64>, pres: CsMat<f64>) -> Self {
        let (fv, cv) = (vel.rows(), vel.cols());
        let (fp, cp) = (pres.rows(), pres.cols());
        let mut t = Vec::with_capacity(vel.nnz() + pres.nnz());
        for (v, (i, j)) in vel.iter() {
            t.push((i, j, *v));
        }
        for (v, (i, j)) in pres.iter() {
            t.push((fv + i, cv + j, *v));
        }
        let full = from_triplets(fv + fp, cv + cp, &t);
        let full_t = transpose(&full);
        Self {
            vel,
            pres,
            full,
            full_t,
            coarse_len: cv + cp,
            fine_len: fv + fp,
        }
    }

    pub fn coarse_len(&self) -> usize {
        self.coarse_len
    }

    pub fn fine_len(&self) -> usize {
        self.fine_len
    }

    /// Prolongation of a spatial state `[v; pi]`.
    pub fn prolongate(&self, coarse: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.fine_len];
        crate::sparse::spmv(&self.full, coarse, &mut out);
        out
    }

    /// Transpose of [`Transfer::prolongate`].
    pub fn restrict(&self, fine: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.coarse_len];
        crate::sparse::spmv(&self.full_t, fine, &mut out);
        out
    }

    /// `(I (x) P)` on a slab vector of `num_nodes` blocks.
    pub fn prolongate_slab(&self, coarse: &[f64], num_nodes: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(num_nodes * self.fine_len);
        for blk in coarse.chunks(self.coarse_len).take(num_nodes) {
            out.extend(self.prolongate(blk));
        }
        out
    }

    pub fn restrict_slab(&self, fine: &[f64], num_nodes: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(num_nodes * self.coarse_len);
        for blk in fine.chunks(self.fine_len).take(num_nodes) {
            out.extend(self.restrict(blk));
        }
        out
    }
}

/// Coarse representative of a fine spatial state: velocity by injection at
/// the shared nodes, pressure by cellwise L2 projection onto the parent.
pub fn inject_state(coarse: &StructuredQuadMesh, fine: &StructuredQuadMesh, u: &[f64]) -> Vec<f64> {
    let (cnx, cny) = (2 * coarse.nx + 1, 2 * coarse.ny + 1);
    let fnx = 2 * fine.nx + 1;
    let fnn = fnx * (2 * fine.ny + 1);
    let cnn = cnx * cny;
    let mut out = vec![0.0; 2 * cnn + 3 * coarse.num_cells()];
    for c in 0..2 {
        for iy in 0..cny {
            for ix in 0..cnx {
                out[c * cnn + iy * cnx + ix] = u[c * fnn + 2 * iy * fnx + 2 * ix];
            }
        }
    }
    let pf = &u[2 * fnn..];
    let pc = &mut out[2 * cnn..];
    for fc in 0..fine.num_cells() {
        let (i, j) = fine.cell_ij(fc);
        let cc = coarse.cell_index(i / 2, j / 2);
        let ox = 0.5 * (i % 2) as f64 - 0.25;
        let oy = 0.5 * (j % 2) as f64 - 0.25;
        let (a, b, c) = (pf[3 * fc], pf[3 * fc + 1], pf[3 * fc + 2]);
        pc[3 * cc] += 0.25 * a;
        pc[3 * cc + 1] += 3.0 * (a * ox + b / 24.0);
        pc[3 * cc + 2] += 3.0 * (a * oy + c / 24.0);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::femspace::{PressureSpace, VelocitySpace};
    use crate::mesh::unit_square;

    #[test]
    fn prolongation_preserves_coarse_functions() {
        let c = unit_square(2).unwrap();
        let (f, _) = c.refine();
        let t = Transfer::new(&c, &f);
        let vc = VelocitySpace::new(&c);
        let vf = VelocitySpace::new(&f);
        let field = |x: [f64; 2]| [x[0] * x[0] * x[1] * x[1] - x[0], x[1] * x[1] + 2.0 * x[0] * x[1]];
        let mut uc = vc.interpolate(field);
        let pc = PressureSpace::new(&c);
        let pf = PressureSpace::new(&f);
        let quad = crate::femspace::SpatialQuadrature::new(3);
        let pres = |x: [f64; 2]| 1.0 + 3.0 * x[0] - 2.0 * x[1];
        uc.extend(pc.project(&quad, pres));
        let uf = t.prolongate(&uc);
        let vfine = vf.interpolate(field);
        let mv = vf.num_dofs();
        for k in 0..mv {
            assert!((uf[k] - vfine[k]).abs() < 1e-13);
        }
        let pfine = pf.project(&quad, pres);
        for k in 0..pfine.len() {
            assert!((uf[mv + k] - pfine[k]).abs() < 1e-13);
        }
        let back = inject_state(&c, &f, &uf);
        for (a, b) in back.iter().zip(&uc) {
            assert!((a - b).abs() < 1e-13);
        }
    }
}
