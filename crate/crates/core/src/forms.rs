//! Spatial residual and Jacobian at one temporal node.
//!
//! The residual is right-hand side minus left-hand side of the stabilized
//! semilinear form: viscous and divergence-form convective volume terms,
//! pressure coupling, the convective boundary flux over the whole boundary,
//! Nitsche terms on Dirichlet faces with viscous coefficients frozen at the
//! lifting, and convection-aligned CIP on interior faces. The inflow weight on
//! Dirichlet faces and the CIP weight are taken from a separate `advect` field.
//!
//! The Jacobian returned here is the derivative of the left-hand side, so a
//! Newton correction solves `J du = F`.

use rayon::prelude::*;
use sprs::CsMat;
use thiserror::Error;

use crate::constitutive::{
    effective_viscosity, tangent_at, ConstitutiveError, ModelParams, SymTensor2, Tangent,
    TangentVariant,
};
use crate::femspace::{shape_eval, PressureSpace, ShapeEval, SpatialQuadrature, VelocitySpace};
use crate::mesh::{BoundaryTag, FaceKind, Side, StructuredQuadMesh};
use crate::quadrature::gauss_legendre;
use crate::sparse::{pattern_from_rows, scatter_add_raw};

pub const CELL_DOFS: usize = 21;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FormsError {
    #[error(transparent)]
    Constitutive(#[from] ConstitutiveError),
    #[error("{0}")]
    Refused(&'static str),
}

/// Body force, Dirichlet data and initial velocity.
pub trait ProblemData: Sync {
    fn force(&self, x: [f64; 2], t: f64) -> [f64; 2];
    fn dirichlet(&self, x: [f64; 2], t: f64) -> [f64; 2];
    fn initial_velocity(&self, x: [f64; 2]) -> [f64; 2];
}

/// Homogeneous data: no forcing, zero boundary values, fluid at rest.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroData;

impl ProblemData for ZeroData {
    fn force(&self, _: [f64; 2], _: f64) -> [f64; 2] {
        [0.0, 0.0]
    }
    fn dirichlet(&self, _: [f64; 2], _: f64) -> [f64; 2] {
        [0.0, 0.0]
    }
    fn initial_velocity(&self, _: [f64; 2]) -> [f64; 2] {
        [0.0, 0.0]
    }
}

/// Switches for individual terms. Everything is on by default; tests use it
/// to isolate pieces of the operator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TermMask {
    pub viscous: bool,
    pub convection: bool,
    pub pressure: bool,
    pub divergence: bool,
    pub nitsche: bool,
    pub cip: bool,
    pub forcing: bool,
}

impl TermMask {
    pub fn all() -> Self {
        Self {
            viscous: true,
            convection: true,
            pressure: true,
            divergence: true,
            nitsche: true,
            cip: true,
            forcing: true,
        }
    }

    /// Only the body force survives; the slab then reduces to `v' = f`.
    pub fn forcing_only() -> Self {
        Self {
            viscous: false,
            convection: false,
            pressure: false,
            divergence: false,
            nitsche: false,
            cip: false,
            forcing: true,
        }
    }
}

impl Default for TermMask {
    fn default() -> Self {
        Self::all()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscretizationConfig {
    pub gamma1: f64,
    pub gamma2: f64,
    pub gamma_cip: f64,
    /// Gauss points per direction for volume and face integrals.
    pub quad_order: usize,
    pub mask: TermMask,
}

impl Default for DiscretizationConfig {
    fn default() -> Self {
        Self {
            gamma1: 1e3,
            gamma2: 1e3,
            gamma_cip: 1.0,
            quad_order: 4,
            mask: TermMask::all(),
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct BFace {
    cell: usize,
    side: Side,
    normal: [f64; 2],
    h: f64,
    dirichlet: bool,
}

#[derive(Debug, Clone, Copy)]
struct IFace {
    minus: usize,
    plus: usize,
    side: Side,
    normal: [f64; 2],
    h: f64,
}

/// Frozen Dirichlet coefficients at one time: lifting trace, `D g`, `eta_D`.
#[derive(Debug, Clone)]
pub struct BoundaryState {
    pub lifting: Vec<f64>,
    g: Vec<[f64; 2]>,
    eta_d: Vec<f64>,
    dsd: Vec<Tangent<f64>>,
}

/// Per-point data of a frozen linearization.
#[derive(Debug, Clone, Copy)]
struct PointLin {
    tan: Tangent<f64>,
    v: [f64; 2],
}

#[derive(Debug, Clone)]
struct CellLin {
    vol: Vec<PointLin>,
    /// `(boundary face index, per-point data, inflow weights)`.
    faces: Vec<(usize, Vec<PointLin>, Vec<f64>)>,
}

/// Q2/P1disc discretization on one structured mesh with precomputed
/// reference tables (all cells are congruent).
#[derive(Debug, Clone)]
pub struct Discretization {
    pub mesh: StructuredQuadMesh,
    pub vel: VelocitySpace,
    pub pres: PressureSpace,
    pub config: DiscretizationConfig,
    pub quad: SpatialQuadrature,
    vol_tab: Vec<ShapeEval>,
    vol_w: Vec<f64>,
    face_s: Vec<f64>,
    face_w: Vec<f64>,
    face_tab: [Vec<ShapeEval>; 4],
    bfaces: Vec<BFace>,
    ifaces: Vec<IFace>,
    cell_bfaces: Vec<Vec<usize>>,
    mass_v: CsMat<f64>,
    mass_p: CsMat<f64>,
    pattern: CsMat<f64>,
}

#[inline]
fn neg_part(y: f64) -> f64 {
    0.5 * (y.abs() - y)
}

#[inline]
fn sym_outer(u: [f64; 2], n: [f64; 2]) -> SymTensor2<f64> {
    SymTensor2::new(u[0] * n[0], u[1] * n[1], 0.5 * (u[0] * n[1] + u[1] * n[0]))
}

#[inline]
fn full(a: &SymTensor2<f64>) -> [[f64; 2]; 2] {
    [[a.a11, a.a12], [a.a12, a.a22]]
}

/// Accumulates `W (r_c phi_a + G_cj d_j phi_a)` into velocity rows and
/// `W s psi_b` into pressure rows of a local vector.
#[inline]
fn accumulate(
    out: &mut [f64; CELL_DOFS],
    se: &ShapeEval,
    w: f64,
    r: [f64; 2],
    g: [[f64; 2]; 2],
    s: f64,
) {
    for a in 0..9 {
        let phi = se.vel[a];
        let d = se.vel_grad[a];
        for c in 0..2 {
            out[c * 9 + a] += w * (r[c] * phi + g[c][0] * d[0] + g[c][1] * d[1]);
        }
    }
    if s != 0.0 {
        for b in 0..3 {
            out[18 + b] += w * s * se.pres[b];
        }
    }
}

/// Value, gradient and pressure of local coefficients at a point.
#[inline]
fn eval_local(loc: &[f64; CELL_DOFS], se: &ShapeEval) -> ([f64; 2], [[f64; 2]; 2], f64) {
    let mut v = [0.0; 2];
    let mut g = [[0.0; 2]; 2];
    for a in 0..9 {
        let phi = se.vel[a];
        let d = se.vel_grad[a];
        for c in 0..2 {
            let u = loc[c * 9 + a];
            v[c] += u * phi;
            g[c][0] += u * d[0];
            g[c][1] += u * d[1];
        }
    }
    let p = loc[18] * se.pres[0] + loc[19] * se.pres[1] + loc[20] * se.pres[2];
    (v, g, p)
}

impl Discretization {
    pub fn new(mesh: &StructuredQuadMesh, config: DiscretizationConfig) -> Self {
        let vel = VelocitySpace::new(mesh);
        let pres = PressureSpace::new(mesh);
        let quad = SpatialQuadrature::new(config.quad_order);
        let area = mesh.hx() * mesh.hy();
        let vol_tab: Vec<ShapeEval> = quad.points.iter().map(|&p| shape_eval(mesh, p)).collect();
        let vol_w: Vec<f64> = quad.weights.iter().map(|w| w * area).collect();
        let (face_s, face_w) = gauss_legendre::<f64>(config.quad_order);
        let face_tab = Side::ALL.map(|side| {
            face_s
                .iter()
                .map(|&s| shape_eval(mesh, side.reference_point(s)))
                .collect::<Vec<_>>()
        });
        let mut bfaces = Vec::new();
        let mut ifaces = Vec::new();
        let mut cell_bfaces = vec![Vec::new(); mesh.num_cells()];
        for f in mesh.faces() {
            match f.kind {
                FaceKind::Boundary { cell, tag } => {
                    cell_bfaces[cell].push(bfaces.len());
                    bfaces.push(BFace {
                        cell,
                        side: f.side,
                        normal: f.normal,
                        h: f.h,
                        dirichlet: tag == BoundaryTag::Dirichlet,
                    });
                }
                FaceKind::Interior { minus, plus } => ifaces.push(IFace {
                    minus,
                    plus,
                    side: f.side,
                    normal: f.normal,
                    h: f.h,
                }),
            }
        }
        let mut disc = Self {
            mesh: mesh.clone(),
            vel,
            pres,
            config,
            quad,
            vol_tab,
            vol_w,
            face_s,
            face_w,
            face_tab,
            bfaces,
            ifaces,
            cell_bfaces,
            mass_v: CsMat::zero((0, 0)),
            mass_p: CsMat::zero((0, 0)),
            pattern: CsMat::zero((0, 0)),
        };
        disc.mass_v = disc.build_velocity_mass();
        disc.mass_p = disc.build_pressure_mass();
        disc.pattern = disc.build_pattern();
        disc
    }

    pub fn num_velocity_dofs(&self) -> usize {
        self.vel.num_dofs()
    }

    pub fn num_pressure_dofs(&self) -> usize {
        self.pres.num_dofs()
    }

    pub fn num_dofs(&self) -> usize {
        self.num_velocity_dofs() + self.num_pressure_dofs()
    }

    pub fn velocity_mass(&self) -> &CsMat<f64> {
        &self.mass_v
    }

    pub fn pressure_mass(&self) -> &CsMat<f64> {
        &self.mass_p
    }

    /// Global dofs of a cell: 18 velocity then 3 pressure.
    pub fn cell_globals(&self, cell: usize) -> [usize; CELL_DOFS] {
        let v = self.vel.cell_dofs(cell);
        let p = self.pres.cell_dofs(cell);
        let mv = self.num_velocity_dofs();
        let mut out = [0; CELL_DOFS];
        out[..18].copy_from_slice(&v);
        for j in 0..3 {
            out[18 + j] = mv + p[j];
        }
        out
    }

    fn gather(&self, u: &[f64], cell: usize) -> [f64; CELL_DOFS] {
        let g = self.cell_globals(cell);
        let mut out = [0.0; CELL_DOFS];
        for (o, &i) in out.iter_mut().zip(&g) {
            *o = u[i];
        }
        out
    }

    fn gather_velocity(&self, v: &[f64], cell: usize) -> [f64; CELL_DOFS] {
        let g = self.vel.cell_dofs(cell);
        let mut out = [0.0; CELL_DOFS];
        for k in 0..18 {
            out[k] = v[g[k]];
        }
        out
    }

    /// True when the pressure is determined only up to a constant, i.e. no
    /// Neumann boundary and the divergence and pressure couplings are active.
    pub fn has_pressure_nullspace(&self) -> bool {
        self.mesh.all_dirichlet() && self.config.mask.pressure && self.config.mask.divergence
    }

    /// Restricts the pressure test space to mean-zero functions by removing
    /// the component of the pressure rows along the constant test function.
    /// On uniform cells this is the orthogonal projection that zeroes the mean
    /// of the cellwise constant coefficients.
    pub fn project_pressure_test_space(&self, r: &mut [f64]) {
        if !self.has_pressure_nullspace() {
            return;
        }
        let mv = self.num_velocity_dofs();
        let nc = self.mesh.num_cells();
        let mean = (0..nc).map(|c| r[mv + 3 * c]).sum::<f64>() / nc as f64;
        for c in 0..nc {
            r[mv + 3 * c] -= mean;
        }
    }

    /// Nodal interpolation of `g_D` on Dirichlet boundary nodes, zero inside.
    pub fn lifting<D: ProblemData + ?Sized>(&self, data: &D, t: f64) -> Vec<f64> {
        let nn = self.vel.num_nodes();
        let mut out = vec![0.0; 2 * nn];
        for bf in self.bfaces.iter().filter(|b| b.dirichlet) {
            let nodes = self.vel.cell_nodes(bf.cell);
            let local: [usize; 3] = match bf.side {
                Side::Left => [0, 3, 6],
                Side::Right => [2, 5, 8],
                Side::Bottom => [0, 1, 2],
                Side::Top => [6, 7, 8],
            };
            for l in local {
                let node = nodes[l];
                let g = data.dirichlet(self.vel.node_coords(node), t);
                out[node] = g[0];
                out[nn + node] = g[1];
            }
        }
        out
    }

    /// Interpolates a velocity field nodally and a pressure field by local L2 projection.
    pub fn interpolate_state<V, P>(&self, v: V, p: P) -> Vec<f64>
    where
        V: Fn([f64; 2]) -> [f64; 2],
        P: Fn([f64; 2]) -> f64,
    {
        let mut u = self.vel.interpolate(v);
        u.extend(self.pres.project(&self.quad, p));
        u
    }

    pub fn boundary_state<D: ProblemData + ?Sized>(
        &self,
        data: &D,
        params: &ModelParams<f64>,
        t: f64,
    ) -> Result<BoundaryState, FormsError> {
        let lifting = self.lifting(data, t);
        let nq = self.face_s.len();
        let mut g = vec![[0.0; 2]; self.bfaces.len() * nq];
        let mut eta_d = vec![0.0; self.bfaces.len() * nq];
        let zero = tangent_at(&TangentVariant::Pic, params, &SymTensor2::zero())?;
        let mut dsd = vec![zero; self.bfaces.len() * nq];
        for (f, bf) in self.bfaces.iter().enumerate() {
            if !bf.dirichlet {
                continue;
            }
            let loc = self.gather_velocity(&lifting, bf.cell);
            for (q, se) in self.face_tab[bf.side.index()].iter().enumerate() {
                let (v, grad, _) = eval_local(&loc, se);
                let dg = SymTensor2::sym_grad(grad);
                g[f * nq + q] = v;
                eta_d[f * nq + q] = effective_viscosity(params, &dg)?;
                dsd[f * nq + q] = tangent_at(&TangentVariant::ExN, params, &dg)?;
            }
        }
        Ok(BoundaryState {
            lifting,
            g,
            eta_d,
            dsd,
        })
    }

    fn check_params(params: &ModelParams<f64>) -> Result<(), FormsError> {
        if params.delta > 0.0 {
            Ok(())
        } else {
            Err(ConstitutiveError::Domain("forms require delta > 0").into())
        }
    }

    /// `F(u)(w) = (f, w) + B_gamma(g, w) - A_gamma(u)(w)` for every test basis
    /// function. `u = [v; pi]`; the first `M_v` entries of `advect` supply
    /// the lagged inflow and CIP weights.
    pub fn spatial_residual<D: ProblemData + ?Sized>(
        &self,
        u: &[f64],
        t: f64,
        data: &D,
        params: &ModelParams<f64>,
        advect: &[f64],
    ) -> Result<Vec<f64>, FormsError> {
        Self::check_params(params)?;
        let bs = self.boundary_state(data, params, t)?;
        self.spatial_residual_with(u, t, data, params, advect, &bs)
    }

    pub fn spatial_residual_with<D: ProblemData + ?Sized>(
        &self,
        u: &[f64],
        t: f64,
        data: &D,
        params: &ModelParams<f64>,
        advect: &[f64],
        bs: &BoundaryState,
    ) -> Result<Vec<f64>, FormsError> {
        Self::check_params(params)?;
        let n = self.num_dofs();
        assert_eq!(u.len(), n);
        let locals: Vec<[f64; CELL_DOFS]> = (0..self.mesh.num_cells())
            .into_par_iter()
            .map(|c| self.cell_residual(c, u, t, data, params, advect, bs))
            .collect::<Result<_, _>>()?;
        let mut out = vec![0.0; n];
        for (c, loc) in locals.iter().enumerate() {
            for (k, &g) in self.cell_globals(c).iter().enumerate() {
                out[g] += loc[k];
            }
        }
        if self.config.mask.cip && self.config.gamma_cip != 0.0 {
            let nn = self.vel.num_nodes();
            let contrib: Vec<([usize; 18], [f64; 36])> = self
                .ifaces
                .par_iter()
                .map(|f| {
                    let (dofs, m) = self.cip_matrix(f, advect);
                    let mut y = [0.0; 36];
                    for comp in 0..2 {
                        for i in 0..18 {
                            let mut s = 0.0;
                            for j in 0..18 {
                                s += m[i * 18 + j] * u[comp * nn + dofs[j]];
                            }
                            y[comp * 18 + i] = -s;
                        }
                    }
                    (dofs, y)
                })
                .collect();
            for (dofs, y) in contrib {
                for comp in 0..2 {
                    for i in 0..18 {
                        out[comp * nn + dofs[i]] += y[comp * 18 + i];
                    }
                }
            }
        }
        Ok(out)
    }

    #[allow(clippy::too_many_arguments)]
    fn cell_residual<D: ProblemData + ?Sized>(
        &self,
        cell: usize,
        u: &[f64],
        t: f64,
        data: &D,
        params: &ModelParams<f64>,
        advect: &[f64],
        bs: &BoundaryState,
    ) -> Result<[f64; CELL_DOFS], FormsError> {
        let mask = self.config.mask;
        let loc = self.gather(u, cell);
        let mut out = [0.0; CELL_DOFS];
        for ((se, &w), xi) in self.vol_tab.iter().zip(&self.vol_w).zip(&self.quad.points) {
            let (v, grad, p) = eval_local(&loc, se);
            let mut g = [[0.0; 2]; 2];
            if mask.viscous {
                let a = SymTensor2::sym_grad(grad);
                let s = full(&(a * effective_viscosity(params, &a)?));
                for i in 0..2 {
                    for j in 0..2 {
                        g[i][j] -= s[i][j];
                    }
                }
            }
            if mask.convection {
                for i in 0..2 {
                    for j in 0..2 {
                        g[i][j] += v[i] * v[j];
                    }
                }
            }
            if mask.pressure {
                g[0][0] += p;
                g[1][1] += p;
            }
            let r = if mask.forcing {
                data.force(self.mesh.map_point(cell, *xi), t)
            } else {
                [0.0; 2]
            };
            let s = if mask.divergence {
                grad[0][0] + grad[1][1]
            } else {
                0.0
            };
            accumulate(&mut out, se, w, r, g, s);
        }
        let nq = self.face_s.len();
        for &fi in &self.cell_bfaces[cell] {
            let bf = self.bfaces[fi];
            let n = bf.normal;
            let adv = self.gather_velocity(advect, cell);
            for (q, se) in self.face_tab[bf.side.index()].iter().enumerate() {
                let w = self.face_w[q] * bf.h;
                let (v, grad, p) = eval_local(&loc, se);
                let vn = v[0] * n[0] + v[1] * n[1];
                let mut r = [0.0; 2];
                let mut g = [[0.0; 2]; 2];
                let mut s = 0.0;
                if mask.convection {
                    r[0] -= vn * v[0];
                    r[1] -= vn * v[1];
                }
                if bf.dirichlet {
                    if mask.viscous {
                        let a = SymTensor2::sym_grad(grad);
                        let sn = (a * effective_viscosity(params, &a)?).mul_vec(n);
                        r[0] += sn[0];
                        r[1] += sn[1];
                    }
                    if mask.pressure {
                        r[0] -= p * n[0];
                        r[1] -= p * n[1];
                    }
                    if mask.nitsche {
                        let k = fi * nq + q;
                        let gh = bs.g[k];
                        let (av, _, _) = eval_local(&adv, se);
                        let an = neg_part(av[0] * n[0] + av[1] * n[1]);
                        let gn = neg_part(gh[0] * n[0] + gh[1] * n[1]);
                        let e = [v[0] - gh[0], v[1] - gh[1]];
                        let en = e[0] * n[0] + e[1] * n[1];
                        let pen = self.config.gamma1 / bf.h * bs.eta_d[k];
                        let pen_n = self.config.gamma2 / bf.h;
                        for c in 0..2 {
                            r[c] -= pen * e[c] + pen_n * en * n[c];
                            if mask.convection {
                                r[c] += an * v[c] - gn * gh[c];
                            }
                        }
                        let y = full(&bs.dsd[k].apply(&sym_outer(e, n)));
                        for i in 0..2 {
                            for j in 0..2 {
                                g[i][j] += y[i][j];
                            }
                        }
                        s += en;
                    }
                }
                accumulate(&mut out, se, w, r, g, s);
            }
        }
        Ok(out)
    }

    /// Scalar CIP matrix on a face over the 9 + 9 shapes of both cells; the
    /// same block acts on each velocity component.
    fn cip_matrix(&self, f: &IFace, advect: &[f64]) -> ([usize; 18], [f64; 324]) {
        let nm = self.vel.cell_nodes(f.minus);
        let np = self.vel.cell_nodes(f.plus);
        let mut dofs = [0; 18];
        dofs[..9].copy_from_slice(&nm);
        dofs[9..].copy_from_slice(&np);
        let adv = self.gather_velocity(advect, f.minus);
        let tab_m = &self.face_tab[f.side.index()];
        let tab_p = &self.face_tab[f.side.opposite().index()];
        let n = f.normal;
        let scale = self.config.gamma_cip * f.h * f.h;
        let mut m = [0.0; 324];
        for q in 0..self.face_s.len() {
            let (av, _, _) = eval_local(&adv, &tab_m[q]);
            let weight = scale * (av[0] * n[0] + av[1] * n[1]).abs() * self.face_w[q] * f.h;
            if weight == 0.0 {
                continue;
            }
            let mut jmp = [0.0; 18];
            for a in 0..9 {
                let dm = tab_m[q].vel_grad[a];
                let dp = tab_p[q].vel_grad[a];
                jmp[a] = -(dm[0] * n[0] + dm[1] * n[1]);
                jmp[9 + a] = dp[0] * n[0] + dp[1] * n[1];
            }
            for i in 0..18 {
                for j in 0..18 {
                    m[i * 18 + j] += weight * jmp[i] * jmp[j];
                }
            }
        }
        (dofs, m)
    }

    fn cell_linearization(
        &self,
        cell: usize,
        u: &[f64],
        advect: &[f64],
        variant: &TangentVariant<f64>,
        params: &ModelParams<f64>,
    ) -> Result<CellLin, FormsError> {
        let loc = self.gather(u, cell);
        let vol = self
            .vol_tab
            .iter()
            .map(|se| {
                let (v, grad, _) = eval_local(&loc, se);
                let tan = tangent_at(variant, params, &SymTensor2::sym_grad(grad))?;
                Ok(PointLin { tan, v })
            })
            .collect::<Result<Vec<_>, FormsError>>()?;
        let adv = self.gather_velocity(advect, cell);
        let mut faces = Vec::with_capacity(self.cell_bfaces[cell].len());
        for &fi in &self.cell_bfaces[cell] {
            let bf = self.bfaces[fi];
            let n = bf.normal;
            let mut pts = Vec::with_capacity(self.face_s.len());
            let mut inflow = Vec::with_capacity(self.face_s.len());
            for se in self.face_tab[bf.side.index()].iter() {
                let (v, grad, _) = eval_local(&loc, se);
                let tan = tangent_at(variant, params, &SymTensor2::sym_grad(grad))?;
                pts.push(PointLin { tan, v });
                let (av, _, _) = eval_local(&adv, se);
                inflow.push(neg_part(av[0] * n[0] + av[1] * n[1]));
            }
            faces.push((fi, pts, inflow));
        }
        Ok(CellLin { vol, faces })
    }

    /// Action of the frozen local Jacobian on a local direction.
    fn cell_action(
        &self,
        lin: &CellLin,
        picard: bool,
        bs: &BoundaryState,
        du: &[f64; CELL_DOFS],
    ) -> [f64; CELL_DOFS] {
        let mask = self.config.mask;
        let mut out = [0.0; CELL_DOFS];
        for ((se, &w), pl) in self.vol_tab.iter().zip(&self.vol_w).zip(&lin.vol) {
            let (dv, dgrad, dp) = eval_local(du, se);
            let mut g = [[0.0; 2]; 2];
            if mask.viscous {
                g = full(&pl.tan.apply(&SymTensor2::sym_grad(dgrad)));
            }
            if mask.convection {
                let v = pl.v;
                for i in 0..2 {
                    for j in 0..2 {
                        g[i][j] -= dv[i] * v[j];
                        if !picard {
                            g[i][j] -= v[i] * dv[j];
                        }
                    }
                }
            }
            if mask.pressure {
                g[0][0] -= dp;
                g[1][1] -= dp;
            }
            let s = if mask.divergence {
                -(dgrad[0][0] + dgrad[1][1])
            } else {
                0.0
            };
            accumulate(&mut out, se, w, [0.0; 2], g, s);
        }
        let nq = self.face_s.len();
        for (fi, pts, inflow) in &lin.faces {
            let bf = self.bfaces[*fi];
            let n = bf.normal;
            for (q, se) in self.face_tab[bf.side.index()].iter().enumerate() {
                let w = self.face_w[q] * bf.h;
                let (dv, dgrad, dp) = eval_local(du, se);
                let v = pts[q].v;
                let vn = v[0] * n[0] + v[1] * n[1];
                let dvn = dv[0] * n[0] + dv[1] * n[1];
                let mut r = [0.0; 2];
                let mut g = [[0.0; 2]; 2];
                let mut s = 0.0;
                if mask.convection {
                    for c in 0..2 {
                        r[c] += vn * dv[c];
                        if !picard {
                            r[c] += dvn * v[c];
                        }
                    }
                }
                if bf.dirichlet {
                    if mask.viscous {
                        let tn = pts[q].tan.apply(&SymTensor2::sym_grad(dgrad)).mul_vec(n);
                        r[0] -= tn[0];
                        r[1] -= tn[1];
                    }
                    if mask.pressure {
                        r[0] += dp * n[0];
                        r[1] += dp * n[1];
                    }
                    if mask.nitsche {
                        let k = fi * nq + q;
                        let pen = self.config.gamma1 / bf.h * bs.eta_d[k];
                        let pen_n = self.config.gamma2 / bf.h;
                        for c in 0..2 {
                            r[c] += pen * dv[c] + pen_n * dvn * n[c];
                            if mask.convection {
                                r[c] -= inflow[q] * dv[c];
                            }
                        }
                        let y = full(&bs.dsd[k].apply(&sym_outer(dv, n)));
                        for i in 0..2 {
                            for j in 0..2 {
                                g[i][j] -= y[i][j];
                            }
                        }
                        s -= dvn;
                    }
                }
                accumulate(&mut out, se, w, r, g, s);
            }
        }
        out
    }

    /// Matrix-free action of the spatial Jacobian `J = dA_gamma/du` at state `u`
    /// with lagged weights from `advect`.
    #[allow(clippy::too_many_arguments)]
    pub fn spatial_jacobian_apply<D: ProblemData + ?Sized>(
        &self,
        u: &[f64],
        t: f64,
        data: &D,
        params: &ModelParams<f64>,
        advect: &[f64],
        variant: &TangentVariant<f64>,
        du: &[f64],
    ) -> Result<Vec<f64>, FormsError> {
        Self::check_params(params)?;
        let bs = self.boundary_state(data, params, t)?;
        let picard = variant.is_picard();
        let n = self.num_dofs();
        let locals: Vec<[f64; CELL_DOFS]> = (0..self.mesh.num_cells())
            .into_par_iter()
            .map(|c| {
                let lin = self.cell_linearization(c, u, advect, variant, params)?;
                Ok(self.cell_action(&lin, picard, &bs, &self.gather(du, c)))
            })
            .collect::<Result<_, FormsError>>()?;
        let mut out = vec![0.0; n];
        for (c, loc) in locals.iter().enumerate() {
            for (k, &g) in self.cell_globals(c).iter().enumerate() {
                out[g] += loc[k];
            }
        }
        if self.config.mask.cip && self.config.gamma_cip != 0.0 {
            let nn = self.vel.num_nodes();
            for f in &self.ifaces {
                let (dofs, m) = self.cip_matrix(f, advect);
                for comp in 0..2 {
                    for i in 0..18 {
                        let mut s = 0.0;
                        for j in 0..18 {
                            s += m[i * 18 + j] * du[comp * nn + dofs[j]];
                        }
                        out[comp * nn + dofs[i]] += s;
                    }
                }
            }
        }
        Ok(out)
    }

    /// Zero-valued matrix with the sparsity of the spatial Jacobian.
    pub fn jacobian_pattern(&self) -> &CsMat<f64> {
        &self.pattern
    }

    /// Assembled spatial Jacobian.
    pub fn spatial_jacobian_assemble<D: ProblemData + ?Sized>(
        &self,
        u: &[f64],
        t: f64,
        data: &D,
        params: &ModelParams<f64>,
        advect: &[f64],
        variant: &TangentVariant<f64>,
    ) -> Result<CsMat<f64>, FormsError> {
        Self::check_params(params)?;
        let bs = self.boundary_state(data, params, t)?;
        let picard = variant.is_picard();
        let locals: Vec<Vec<f64>> = (0..self.mesh.num_cells())
            .into_par_iter()
            .map(|c| {
                let lin = self.cell_linearization(c, u, advect, variant, params)?;
                let mut m = vec![0.0; CELL_DOFS * CELL_DOFS];
                let mut e = [0.0; CELL_DOFS];
                for j in 0..CELL_DOFS {
                    e[j] = 1.0;
                    let col = self.cell_action(&lin, picard, &bs, &e);
                    e[j] = 0.0;
                    for i in 0..CELL_DOFS {
                        m[i * CELL_DOFS + j] = col[i];
                    }
                }
                Ok(m)
            })
            .collect::<Result<_, FormsError>>()?;
        let mut mat = self.pattern.clone();
        let indptr = mat.indptr().raw_storage().to_vec();
        let indices = mat.indices().to_vec();
        {
            let data_mut = mat.data_mut();
            for (c, m) in locals.iter().enumerate() {
                let g = self.cell_globals(c);
                scatter_add_raw(&indptr, &indices, data_mut, &g, &g, m);
            }
            if self.config.mask.cip && self.config.gamma_cip != 0.0 {
                let nn = self.vel.num_nodes();
                for f in &self.ifaces {
                    let (dofs, m) = self.cip_matrix(f, advect);
                    for comp in 0..2 {
                        let g: Vec<usize> = dofs.iter().map(|d| comp * nn + d).collect();
                        scatter_add_raw(&indptr, &indices, data_mut, &g, &g, &m);
                    }
                }
            }
        }
        Ok(mat)
    }

    /// The CIP bilinear form alone, assembled with lagged weights.
    pub fn cip_assemble(&self, advect: &[f64]) -> CsMat<f64> {
        let mut mat = self.pattern.clone();
        let indptr = mat.indptr().raw_storage().to_vec();
        let indices = mat.indices().to_vec();
        let nn = self.vel.num_nodes();
        let data_mut = mat.data_mut();
        for f in &self.ifaces {
            let (dofs, m) = self.cip_matrix(f, advect);
            for comp in 0..2 {
                let g: Vec<usize> = dofs.iter().map(|d| comp * nn + d).collect();
                scatter_add_raw(&indptr, &indices, data_mut, &g, &g, &m);
            }
        }
        mat
    }

    fn build_pattern(&self) -> CsMat<f64> {
        let n = self.num_dofs();
        let mut rows: Vec<Vec<usize>> = vec![Vec::new(); n];
        for c in 0..self.mesh.num_cells() {
            let g = self.cell_globals(c);
            for &i in &g {
                rows[i].extend_from_slice(&g);
            }
        }
        let nn = self.vel.num_nodes();
        for f in &self.ifaces {
            let a = self.vel.cell_nodes(f.minus);
            let b = self.vel.cell_nodes(f.plus);
            for comp in 0..2 {
                for &i in a.iter().chain(b.iter()) {
                    let row = &mut rows[comp * nn + i];
                    row.extend(a.iter().chain(b.iter()).map(|j| comp * nn + j));
                }
            }
        }
        pattern_from_rows(rows, n)
    }

    fn build_velocity_mass(&self) -> CsMat<f64> {
        let nn = self.vel.num_nodes();
        let mut rows: Vec<Vec<usize>> = vec![Vec::new(); 2 * nn];
        for c in 0..self.mesh.num_cells() {
            let g = self.vel.cell_dofs(c);
            for comp in 0..2 {
                for i in 0..9 {
                    rows[g[comp * 9 + i]].extend_from_slice(&g[comp * 9..comp * 9 + 9]);
                }
            }
        }
        let mut mat = pattern_from_rows(rows, 2 * nn);
        let mut local = [0.0; 81];
        for (se, &w) in self.vol_tab.iter().zip(&self.vol_w) {
            for i in 0..9 {
                for j in 0..9 {
                    local[i * 9 + j] += w * se.vel[i] * se.vel[j];
                }
            }
        }
        let indptr = mat.indptr().raw_storage().to_vec();
        let indices = mat.indices().to_vec();
        let data = mat.data_mut();
        for c in 0..self.mesh.num_cells() {
            let g = self.vel.cell_dofs(c);
            for comp in 0..2 {
                let gg = &g[comp * 9..comp * 9 + 9];
                scatter_add_raw(&indptr, &indices, data, gg, gg, &local);
            }
        }
        mat
    }

    fn build_pressure_mass(&self) -> CsMat<f64> {
        let np = self.num_pressure_dofs();
        let area = self.mesh.hx() * self.mesh.hy();
        let indptr: Vec<usize> = (0..=np).collect();
        let indices: Vec<usize> = (0..np).collect();
        let data: Vec<f64> = (0..np)
            .map(|i| if i % 3 == 0 { area } else { area / 12.0 })
            .collect();
        CsMat::new((np, np), indptr, indices, data)
    }

    /// Coercivity diagnostic for the linearized viscous-Nitsche form at the
    /// state `u`: returns the form value on `v` and the lower bound built from
    /// the measured trace constant of `v`.
    pub fn coercivity_check<D: ProblemData + ?Sized>(
        &self,
        v: &[f64],
        u: &[f64],
        t: f64,
        data: &D,
        params: &ModelParams<f64>,
        variant: &TangentVariant<f64>,
    ) -> Result<CoercivityReport, FormsError> {
        if !(params.nu_inf > 0.0) {
            return Err(FormsError::Refused(
                "coercivity check requires nu_inf > 0",
            ));
        }
        Self::check_params(params)?;
        let bs = self.boundary_state(data, params, t)?;
        let nq = self.face_s.len();
        let mut volume = 0.0;
        let mut dv_sq = 0.0;
        let mut cross = 0.0;
        let mut penalty = 0.0;
        let mut bnd_sq = 0.0;
        let mut normal_sq = 0.0;
        for c in 0..self.mesh.num_cells() {
            let loc = self.gather_velocity(v, c);
            let st = self.gather(u, c);
            for (se, &w) in self.vol_tab.iter().zip(&self.vol_w) {
                let (_, grad, _) = eval_local(&loc, se);
                let (_, sgrad, _) = eval_local(&st, se);
                let tan = tangent_at(variant, params, &SymTensor2::sym_grad(sgrad))?;
                let d = SymTensor2::sym_grad(grad);
                volume += w * tan.apply(&d).contract(&d);
                dv_sq += w * d.norm_sq();
            }
            for &fi in &self.cell_bfaces[c] {
                let bf = self.bfaces[fi];
                if !bf.dirichlet {
                    continue;
                }
                let n = bf.normal;
                for (q, se) in self.face_tab[bf.side.index()].iter().enumerate() {
                    let w = self.face_w[q] * bf.h;
                    let (val, grad, _) = eval_local(&loc, se);
                    let (_, sgrad, _) = eval_local(&st, se);
                    let tan = tangent_at(variant, params, &SymTensor2::sym_grad(sgrad))?;
                    let d = SymTensor2::sym_grad(grad);
                    let tn = tan.apply(&d).mul_vec(n);
                    let k = fi * nq + q;
                    let y = bs.dsd[k].apply(&d).mul_vec(n);
                    cross += w * (tn[0] * val[0] + tn[1] * val[1] + y[0] * val[0] + y[1] * val[1]);
                    let vn = val[0] * n[0] + val[1] * n[1];
                    let vv = val[0] * val[0] + val[1] * val[1];
                    penalty += w / bf.h
                        * (self.config.gamma1 * bs.eta_d[k] * vv + self.config.gamma2 * vn * vn);
                    bnd_sq += w / bf.h * vv;
                    normal_sq += w / bf.h * vn * vn;
                }
            }
        }
        let lhs = volume - cross + penalty;
        let trace_constant = if dv_sq > 0.0 && bnd_sq > 0.0 {
            cross * cross / (dv_sq * bnd_sq)
        } else {
            0.0
        };
        let nu_inf = params.nu_inf;
        let bound = 0.5 * nu_inf * dv_sq
            + (self.config.gamma1 * nu_inf - trace_constant / (2.0 * nu_inf)) * bnd_sq
            + self.config.gamma2 * normal_sq;
        Ok(CoercivityReport {
            lhs,
            dv_norm_sq: dv_sq,
            boundary_norm_sq: bnd_sq,
            normal_norm_sq: normal_sq,
            trace_constant,
            bound,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoercivityReport {
    pub lhs: f64,
    pub dv_norm_sq: f64,
    pub boundary_norm_sq: f64,
    pub normal_norm_sq: f64,
    /// `cross^2 / (|Dv|^2 |h^{-1/2} v|^2)` for the sampled velocity.
    pub trace_constant: f64,
    pub bound: f64,
}
