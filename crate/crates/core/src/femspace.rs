//! Continuous biquadratic velocity and discontinuous linear pressure on
//! structured quadrilateral meshes.
//!
//! Velocity nodes live on the `(2nx+1) x (2ny+1)` lattice of vertices, edge
//! midpoints and cell centers. Velocity coefficients are component blocked:
//! dof `c * n_nodes + node` for component `c`. The local node `b * 3 + a` of a
//! cell sits at reference coordinates `(a/2, b/2)`. Pressure uses the local
//! basis `{1, x - 1/2, y - 1/2}` in reference coordinates with dofs
//! `3 * cell + j`.

use crate::mesh::StructuredQuadMesh;
use crate::quadrature::gauss_legendre;

/// Values and derivatives of the three 1D quadratic Lagrange shapes at `x`.
#[inline]
pub fn q2_1d(x: f64) -> ([f64; 3], [f64; 3]) {
    (
        [
            2.0 * (x - 0.5) * (x - 1.0),
            -4.0 * x * (x - 1.0),
            2.0 * x * (x - 0.5),
        ],
        [4.0 * x - 3.0, -8.0 * x + 4.0, 4.0 * x - 1.0],
    )
}

/// Q2 shapes at reference point `xi` with reference gradients.
pub fn q2_shapes(xi: [f64; 2]) -> ([f64; 9], [[f64; 2]; 9]) {
    let (lx, dx) = q2_1d(xi[0]);
    let (ly, dy) = q2_1d(xi[1]);
    let mut v = [0.0; 9];
    let mut g = [[0.0; 2]; 9];
    for b in 0..3 {
        for a in 0..3 {
            v[b * 3 + a] = lx[a] * ly[b];
            g[b * 3 + a] = [dx[a] * ly[b], lx[a] * dy[b]];
        }
    }
    (v, g)
}

/// P1 discontinuous shapes `{1, x - 1/2, y - 1/2}` and reference gradients.
pub fn p1_shapes(xi: [f64; 2]) -> ([f64; 3], [[f64; 2]; 3]) {
    (
        [1.0, xi[0] - 0.5, xi[1] - 0.5],
        [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]],
    )
}

/// `(M_v, M_p)` for the Q2/P1disc pair on a structured mesh.
pub fn dof_counts(mesh: &StructuredQuadMesh) -> (usize, usize) {
    (
        2 * (2 * mesh.nx + 1) * (2 * mesh.ny + 1),
        3 * mesh.num_cells(),
    )
}

/// Tensor Gauss rule with `q` points per direction on `[0, 1]^2`.
#[derive(Debug, Clone)]
pub struct SpatialQuadrature {
    pub q: usize,
    pub points: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
}

impl SpatialQuadrature {
    pub fn new(q: usize) -> Self {
        let (x, w) = gauss_legendre::<f64>(q);
        let mut points = Vec::with_capacity(q * q);
        let mut weights = Vec::with_capacity(q * q);
        for j in 0..q {
            for i in 0..q {
                points.push([x[i], x[j]]);
                weights.push(w[i] * w[j]);
            }
        }
        Self { q, points, weights }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Physical-coordinate shape data of one cell at one reference point.
#[derive(Debug, Clone, Copy)]
pub struct ShapeEval {
    pub vel: [f64; 9],
    pub vel_grad: [[f64; 2]; 9],
    pub pres: [f64; 3],
    pub pres_grad: [[f64; 2]; 3],
}

#[derive(Debug, Clone)]
pub struct VelocitySpace {
    pub mesh: StructuredQuadMesh,
    pub nodes_x: usize,
    pub nodes_y: usize,
}

impl VelocitySpace {
    pub fn new(mesh: &StructuredQuadMesh) -> Self {
        Self {
            mesh: mesh.clone(),
            nodes_x: 2 * mesh.nx + 1,
            nodes_y: 2 * mesh.ny + 1,
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes_x * self.nodes_y
    }

    pub fn num_dofs(&self) -> usize {
        2 * self.num_nodes()
    }

    pub fn dof(&self, comp: usize, node: usize) -> usize {
        comp * self.num_nodes() + node
    }

    pub fn node_index(&self, ix: usize, iy: usize) -> usize {
        iy * self.nodes_x + ix
    }

    pub fn node_coords(&self, node: usize) -> [f64; 2] {
        let ix = node % self.nodes_x;
        let iy = node / self.nodes_x;
        [
            self.mesh.x0 + 0.5 * ix as f64 * self.mesh.hx(),
            self.mesh.y0 + 0.5 * iy as f64 * self.mesh.hy(),
        ]
    }

    /// Global node numbers of the 9 local nodes of a cell.
    pub fn cell_nodes(&self, cell: usize) -> [usize; 9] {
        let (i, j) = self.mesh.cell_ij(cell);
        let mut out = [0; 9];
        for b in 0..3 {
            for a in 0..3 {
                out[b * 3 + a] = self.node_index(2 * i + a, 2 * j + b);
            }
        }
        out
    }

    /// The 18 velocity dofs of a cell, component 0 first.
    pub fn cell_dofs(&self, cell: usize) -> [usize; 18] {
        let nodes = self.cell_nodes(cell);
        let nn = self.num_nodes();
        let mut out = [0; 18];
        for (a, &n) in nodes.iter().enumerate() {
            out[a] = n;
            out[9 + a] = nn + n;
        }
        out
    }

    /// True when a node lies on the domain boundary.
    pub fn is_boundary_node(&self, node: usize) -> bool {
        let ix = node % self.nodes_x;
        let iy = node / self.nodes_x;
        ix == 0 || iy == 0 || ix + 1 == self.nodes_x || iy + 1 == self.nodes_y
    }

    /// Nodal interpolation of a vector field.
    pub fn interpolate<F: Fn([f64; 2]) -> [f64; 2]>(&self, f: F) -> Vec<f64> {
        let nn = self.num_nodes();
        let mut out = vec![0.0; 2 * nn];
        for node in 0..nn {
            let v = f(self.node_coords(node));
            out[node] = v[0];
            out[nn + node] = v[1];
        }
        out
    }

    /// Velocity value and gradient `g[i][j] = d_j v_i` at a reference point.
    pub fn eval(&self, coeffs: &[f64], cell: usize, xi: [f64; 2]) -> ([f64; 2], [[f64; 2]; 2]) {
        let (phi, dphi) = q2_shapes(xi);
        let nodes = self.cell_nodes(cell);
        let nn = self.num_nodes();
        let (hx, hy) = (self.mesh.hx(), self.mesh.hy());
        let mut v = [0.0; 2];
        let mut g = [[0.0; 2]; 2];
        for a in 0..9 {
            for c in 0..2 {
                let u = coeffs[c * nn + nodes[a]];
                v[c] += u * phi[a];
                g[c][0] += u * dphi[a][0] / hx;
                g[c][1] += u * dphi[a][1] / hy;
            }
        }
        (v, g)
    }

    /// Evaluates at a physical point.
    pub fn eval_at(&self, coeffs: &[f64], x: [f64; 2]) -> ([f64; 2], [[f64; 2]; 2]) {
        let (cell, xi) = self.mesh.locate(x);
        self.eval(coeffs, cell, xi)
    }
}

#[derive(Debug, Clone)]
pub struct PressureSpace {
    pub mesh: StructuredQuadMesh,
}

impl PressureSpace {
    pub fn new(mesh: &StructuredQuadMesh) -> Self {
        Self { mesh: mesh.clone() }
    }

    pub fn num_dofs(&self) -> usize {
        3 * self.mesh.num_cells()
    }

    pub fn cell_dofs(&self, cell: usize) -> [usize; 3] {
        [3 * cell, 3 * cell + 1, 3 * cell + 2]
    }

    pub fn eval(&self, coeffs: &[f64], cell: usize, xi: [f64; 2]) -> f64 {
        let (psi, _) = p1_shapes(xi);
        (0..3).map(|j| coeffs[3 * cell + j] * psi[j]).sum()
    }

    pub fn eval_at(&self, coeffs: &[f64], x: [f64; 2]) -> f64 {
        let (cell, xi) = self.mesh.locate(x);
        self.eval(coeffs, cell, xi)
    }

    /// Cellwise L2 projection; the local basis is orthogonal with Gram
    /// matrix `|K| diag(1, 1/12, 1/12)`.
    pub fn project<F: Fn([f64; 2]) -> f64>(&self, quad: &SpatialQuadrature, f: F) -> Vec<f64> {
        let mut out = vec![0.0; self.num_dofs()];
        for cell in 0..self.mesh.num_cells() {
            let mut m = [0.0; 3];
            for (xi, w) in quad.points.iter().zip(&quad.weights) {
                let val = f(self.mesh.map_point(cell, *xi));
                let (psi, _) = p1_shapes(*xi);
                for j in 0..3 {
                    m[j] += w * val * psi[j];
                }
            }
            out[3 * cell] = m[0];
            out[3 * cell + 1] = 12.0 * m[1];
            out[3 * cell + 2] = 12.0 * m[2];
        }
        out
    }

    /// Integral of a pressure field over the domain.
    pub fn integral(&self, coeffs: &[f64]) -> f64 {
        let area = self.mesh.hx() * self.mesh.hy();
        (0..self.mesh.num_cells()).map(|c| coeffs[3 * c] * area).sum()
    }

    /// Shifts a pressure field to zero mean.
    pub fn normalize_mean(&self, coeffs: &mut [f64]) {
        let area = (self.mesh.x1 - self.mesh.x0) * (self.mesh.y1 - self.mesh.y0);
        let mean = self.integral(coeffs) / area;
        for c in 0..self.mesh.num_cells() {
            coeffs[3 * c] -= mean;
        }
    }
}

/// Shape data at reference point `xi` with gradients mapped to physical
/// coordinates by the constant diagonal cell Jacobian.
pub fn shape_eval(mesh: &StructuredQuadMesh, xi: [f64; 2]) -> ShapeEval {
    let (hx, hy) = (mesh.hx(), mesh.hy());
    let (vel, dv) = q2_shapes(xi);
    let (pres, dp) = p1_shapes(xi);
    let mut vel_grad = [[0.0; 2]; 9];
    for a in 0..9 {
        vel_grad[a] = [dv[a][0] / hx, dv[a][1] / hy];
    }
    let mut pres_grad = [[0.0; 2]; 3];
    for j in 0..3 {
        pres_grad[j] = [dp[j][0] / hx, dp[j][1] / hy];
    }
    ShapeEval {
        vel,
        vel_grad,
        pres,
        pres_grad,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::unit_square;

    #[test]
    fn counts() {
        let m = unit_square(4).unwrap();
        assert_eq!(dof_counts(&m), (162, 48));
        let m = unit_square(1).unwrap();
        assert_eq!(dof_counts(&m), (18, 3));
        let v = VelocitySpace::new(&m);
        assert_eq!(v.num_dofs(), 18);
    }

    #[test]
    fn partition_of_unity() {
        for &xi in &[[0.1, 0.2], [0.5, 0.5], [0.93, 0.01]] {
            let (v, g) = q2_shapes(xi);
            assert!((v.iter().sum::<f64>() - 1.0).abs() < 1e-14);
            let gx: f64 = g.iter().map(|d| d[0]).sum();
            let gy: f64 = g.iter().map(|d| d[1]).sum();
            assert!(gx.abs() < 1e-13 && gy.abs() < 1e-13);
        }
    }

    #[test]
    fn nodal_property() {
        for b in 0..3 {
            for a in 0..3 {
                let (v, _) = q2_shapes([a as f64 / 2.0, b as f64 / 2.0]);
                for (k, vk) in v.iter().enumerate() {
                    let e = if k == b * 3 + a { 1.0 } else { 0.0 };
                    assert!((vk - e).abs() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn biquadratic_reproduction() {
        let m = crate::mesh::uniform_mesh(3, 2, [0.0, 0.0, 1.5, 1.0]).unwrap();
        let space = VelocitySpace::new(&m);
        let f = |x: [f64; 2]| [x[0] * x[0] * x[1] * x[1], x[0] - 2.0 * x[1]];
        let u = space.interpolate(f);
        for &x in &[[0.13, 0.77], [1.41, 0.05], [0.7, 0.5]] {
            let (v, g) = space.eval_at(&u, x);
            let e = f(x);
            assert!((v[0] - e[0]).abs() < 1e-13 && (v[1] - e[1]).abs() < 1e-13);
            assert!((g[0][0] - 2.0 * x[0] * x[1] * x[1]).abs() < 1e-12);
            assert!((g[1][1] + 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn pressure_projection_reproduces_linears() {
        let m = unit_square(3).unwrap();
        let p = PressureSpace::new(&m);
        let quad = SpatialQuadrature::new(3);
        let f = |x: [f64; 2]| 1.0 + 2.0 * x[0] - 0.5 * x[1];
        let c = p.project(&quad, f);
        for &x in &[[0.1, 0.9], [0.5, 0.2], [0.99, 0.99]] {
            assert!((p.eval_at(&c, x) - f(x)).abs() < 1e-13);
        }
    }
}
