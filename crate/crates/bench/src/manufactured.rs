//! The manufactured space-time solution on the unit square and its forcing,
//! obtained by closed-form differentiation of the strong form.

use std::f64::consts::PI;

use pdelta_core::constitutive::{effective_viscosity, ConstitutiveError, ModelParams, SymTensor2};
use pdelta_core::forms::ProblemData;

#[derive(Debug, Clone, Copy)]
pub struct ManufacturedCase {
    pub params: ModelParams<f64>,
}

/// First and second spatial derivatives of the velocity divided by `sin t`.
struct Derivs {
    v: [f64; 2],
    /// `g[i][j] = d_j v_i`.
    g: [[f64; 2]; 2],
    /// `h[i][j][k] = d_j d_k v_i`.
    h: [[[f64; 2]; 2]; 2],
}

fn derivs(x: [f64; 2]) -> Derivs {
    let (sx, cx) = (PI * x[0]).sin_cos();
    let (sy, cy) = (PI * x[1]).sin_cos();
    let (s2x, c2x) = (2.0 * PI * x[0]).sin_cos();
    let (s2y, c2y) = (2.0 * PI * x[1]).sin_cos();
    let pi2 = PI * PI;
    let v = [sx * sx * sy * cy, -sx * cx * sy * sy];
    let g = [
        [2.0 * PI * sx * cx * sy * cy, PI * sx * sx * c2y],
        [-PI * c2x * sy * sy, -2.0 * PI * sx * cx * sy * cy],
    ];
    let v1xx = 2.0 * pi2 * c2x * sy * cy;
    let v1xy = 2.0 * pi2 * sx * cx * c2y;
    let v1yy = -2.0 * pi2 * sx * sx * s2y;
    let v2xx = 2.0 * pi2 * s2x * sy * sy;
    let v2xy = -2.0 * pi2 * c2x * sy * cy;
    let v2yy = -2.0 * pi2 * sx * cx * c2y;
    let h = [
        [[v1xx, v1xy], [v1xy, v1yy]],
        [[v2xx, v2xy], [v2xy, v2yy]],
    ];
    Derivs { v, g, h }
}

impl ManufacturedCase {
    pub fn new(params: ModelParams<f64>) -> Self {
        Self { params }
    }

    pub fn velocity(&self, x: [f64; 2], t: f64) -> [f64; 2] {
        let d = derivs(x);
        let a = t.sin();
        [a * d.v[0], a * d.v[1]]
    }

    pub fn velocity_gradient(&self, x: [f64; 2], t: f64) -> [[f64; 2]; 2] {
        let d = derivs(x);
        let a = t.sin();
        [
            [a * d.g[0][0], a * d.g[0][1]],
            [a * d.g[1][0], a * d.g[1][1]],
        ]
    }

    pub fn pressure(&self, x: [f64; 2], t: f64) -> f64 {
        0.25 * t.sin() * (2.0 * PI * x[0]).sin() * (2.0 * PI * x[1]).sin()
    }

    pub fn divergence(&self, x: [f64; 2], t: f64) -> f64 {
        let g = self.velocity_gradient(x, t);
        g[0][0] + g[1][1]
    }

    /// `f = d_t v + div(v (x) v) - div S(Dv) + grad pi`.
    pub fn forcing(&self, x: [f64; 2], t: f64) -> Result<[f64; 2], ConstitutiveError> {
        let p = &self.params;
        let d = derivs(x);
        let (a, da) = (t.sin(), t.cos());
        let g = [
            [a * d.g[0][0], a * d.g[0][1]],
            [a * d.g[1][0], a * d.g[1][1]],
        ];
        let v = [a * d.v[0], a * d.v[1]];
        let h = |i: usize, j: usize, k: usize| a * d.h[i][j][k];
        let dd = SymTensor2::sym_grad(g);
        // d_k D_ij
        let dd_k = |k: usize| {
            SymTensor2::new(h(0, 0, k), h(1, 1, k), 0.5 * (h(0, 1, k) + h(1, 0, k)))
        };
        let eta = effective_viscosity(p, &dd)?;
        let r2 = p.delta * p.delta + dd.norm_sq();
        let deta_coef = if p.p == 2.0 {
            0.0
        } else {
            p.nu * (p.p - 2.0) * r2.powf((p.p - 4.0) / 2.0)
        };
        // d_k eta = nu (p-2) (delta^2+|D|^2)^{(p-4)/2} D : d_k D
        let grad_eta = [deta_coef * dd.contract(&dd_k(0)), deta_coef * dd.contract(&dd_k(1))];
        let dmat = [[dd.a11, dd.a12], [dd.a12, dd.a22]];
        let d0 = dd_k(0);
        let d1 = dd_k(1);
        let div_d = [d0.a11 + d1.a12, d0.a12 + d1.a22];
        let (s2x, c2x) = (2.0 * PI * x[0]).sin_cos();
        let (s2y, c2y) = (2.0 * PI * x[1]).sin_cos();
        let grad_p = [0.5 * PI * a * c2x * s2y, 0.5 * PI * a * s2x * c2y];
        let mut f = [0.0; 2];
        for i in 0..2 {
            let conv = v[0] * g[i][0] + v[1] * g[i][1];
            let div_s = eta * div_d[i] + dmat[i][0] * grad_eta[0] + dmat[i][1] * grad_eta[1];
            f[i] = da * d.v[i] + conv - div_s + grad_p[i];
        }
        Ok(f)
    }
}

impl ProblemData for ManufacturedCase {
    fn force(&self, x: [f64; 2], t: f64) -> [f64; 2] {
        // Parameters are validated at construction of the solver run; a
        // domain failure here can only come from delta = 0 at a zero shear.
        self.forcing(x, t).unwrap_or([f64::NAN; 2])
    }

    fn dirichlet(&self, _x: [f64; 2], _t: f64) -> [f64; 2] {
        [0.0, 0.0]
    }

    fn initial_velocity(&self, _x: [f64; 2]) -> [f64; 2] {
        [0.0, 0.0]
    }
}
