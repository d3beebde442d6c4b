mod common;

use common::*;
use pdelta_core::constitutive::{tangent_at, SymTensor2, TangentVariant};
use pdelta_core::forms::{Discretization, DiscretizationConfig, ProblemData, TermMask, ZeroData};
use pdelta_core::mesh::unit_square;
use pdelta_core::sparse::{spmv, to_dense};

fn disc(n: usize) -> Discretization {
    Discretization::new(&unit_square(n).unwrap(), DiscretizationConfig::default())
}

fn smooth_state(d: &Discretization) -> Vec<f64> {
    d.interpolate_state(smooth_velocity, smooth_pressure)
}

#[test]
fn zero_state_zero_data_gives_zero_residual() {
    let d = disc(3);
    let u = vec![0.0; d.num_dofs()];
    let r = d.spatial_residual(&u, 0.3, &ZeroData, &params(), &u).unwrap();
    assert!(r.iter().all(|x| *x == 0.0));
}

#[test]
fn jacobian_matches_central_differences() {
    let d = disc(4);
    let u = smooth_state(&d);
    let pr = params();
    let mut rng = rng(11);
    for variant in [TangentVariant::ExN] {
        for _ in 0..3 {
            let du = random_vec(&mut rng, d.num_dofs());
            let jd = d
                .spatial_jacobian_apply(&u, 0.4, &SmoothData, &pr, &u, &variant, &du)
                .unwrap();
            let eps = 1e-6 * norm(&u).max(1.0) / norm(&du);
            let up: Vec<f64> = u.iter().zip(&du).map(|(a, b)| a + eps * b).collect();
            let um: Vec<f64> = u.iter().zip(&du).map(|(a, b)| a - eps * b).collect();
            let rp = d.spatial_residual(&up, 0.4, &SmoothData, &pr, &u).unwrap();
            let rm = d.spatial_residual(&um, 0.4, &SmoothData, &pr, &u).unwrap();
            let fd: Vec<f64> = rp.iter().zip(&rm).map(|(a, b)| -(a - b) / (2.0 * eps)).collect();
            let rel = diff_norm(&fd, &jd) / norm(&jd);
            assert!(rel < 1e-6, "relative FD mismatch {rel:e}");
        }
    }
}

#[test]
fn assembled_matches_matrix_free() {
    let d = disc(3);
    let u = smooth_state(&d);
    let pr = params();
    let mut rng = rng(5);
    for variant in [
        TangentVariant::Pic,
        TangentVariant::ExN,
        TangentVariant::ModN { sigma_max: 1e-2 },
    ] {
        let a = d
            .spatial_jacobian_assemble(&u, 0.1, &SmoothData, &pr, &u, &variant)
            .unwrap();
        for _ in 0..20 {
            let x = random_vec(&mut rng, d.num_dofs());
            let free = d
                .spatial_jacobian_apply(&u, 0.1, &SmoothData, &pr, &u, &variant, &x)
                .unwrap();
            let mut y = vec![0.0; d.num_dofs()];
            spmv(&a, &x, &mut y);
            let scale = norm(&free).max(1.0);
            assert!(diff_norm(&free, &y) / scale < 1e-12);
        }
    }
}

#[test]
fn modn_unclipped_equals_exact() {
    let d = disc(3);
    let u = smooth_state(&d);
    let pr = params();
    let x = random_vec(&mut rng(3), d.num_dofs());
    let ex = d
        .spatial_jacobian_apply(&u, 0.2, &SmoothData, &pr, &u, &TangentVariant::ExN, &x)
        .unwrap();
    let md = d
        .spatial_jacobian_apply(
            &u,
            0.2,
            &SmoothData,
            &pr,
            &u,
            &TangentVariant::ModN {
                sigma_max: f64::INFINITY,
            },
            &x,
        )
        .unwrap();
    assert!(max_abs_diff(&ex, &md) <= 1e-14 * norm(&ex).max(1.0));
}

#[test]
fn pressure_block_is_zero_and_cip_symmetric() {
    let d = disc(3);
    let u = smooth_state(&d);
    let a = d
        .spatial_jacobian_assemble(&u, 0.0, &SmoothData, &params(), &u, &TangentVariant::ExN)
        .unwrap();
    let mv = d.num_velocity_dofs();
    let dense = to_dense(&a);
    for i in mv..d.num_dofs() {
        for j in mv..d.num_dofs() {
            assert_eq!(dense[i][j], 0.0);
        }
    }
    let c = to_dense(&d.cip_assemble(&u));
    let mut asym = 0.0f64;
    let mut nonzero = 0.0f64;
    for i in 0..c.len() {
        for j in 0..c.len() {
            asym = asym.max((c[i][j] - c[j][i]).abs());
            nonzero = nonzero.max(c[i][j].abs());
        }
    }
    assert!(nonzero > 0.0);
    assert!(asym <= 1e-12);
}

#[test]
fn cip_vanishes_on_affine_velocity() {
    let d = disc(4);
    let u = d.interpolate_state(|x| [1.0 + 2.0 * x[0] - x[1], 0.5 * x[1] + 3.0 * x[0]], |_| 0.0);
    let c = d.cip_assemble(&u);
    let mut y = vec![0.0; d.num_dofs()];
    spmv(&c, &u, &mut y);
    assert!(norm(&y) < 1e-12);
}

/// Two liftings with the same trace give the same boundary functional.
#[test]
fn nitsche_terms_depend_on_trace_only() {
    let d = disc(3);
    let pr = params();
    let u1 = smooth_state(&d);
    let mut u2 = u1.clone();
    let nn = d.vel.num_nodes();
    let mut rng = rng(9);
    for node in 0..nn {
        if !d.vel.is_boundary_node(node) {
            u2[node] += random_vec(&mut rng, 1)[0];
            u2[nn + node] += random_vec(&mut rng, 1)[0];
        }
    }
    // Remove everything but the Nitsche boundary contributions.
    let mut cfg = DiscretizationConfig::default();
    cfg.mask = TermMask {
        viscous: false,
        convection: false,
        pressure: false,
        divergence: false,
        nitsche: true,
        cip: false,
        forcing: false,
    };
    let dn = Discretization::new(&d.mesh, cfg);
    let r1 = dn.spatial_residual(&u1, 0.2, &SmoothData, &pr, &u1).unwrap();
    let r2 = dn.spatial_residual(&u2, 0.2, &SmoothData, &pr, &u1).unwrap();
    assert!(max_abs_diff(&r1, &r2) <= 1e-12 * norm(&r1).max(1.0));
}

/// `T_exN(B):B <= T_modN(B):B <= T_Pic(B):B` at every quadrature point.
#[test]
fn variant_ordering_pointwise() {
    let pr = params();
    let mut rng = rng(17);
    for _ in 0..500 {
        let r = random_vec(&mut rng, 6);
        let a = SymTensor2::new(r[0], r[1], r[2]) * 10.0;
        let b = SymTensor2::new(r[3], r[4], r[5]);
        let q = |v: TangentVariant<f64>| tangent_at(&v, &pr, &a).unwrap().apply(&b).contract(&b);
        let ex = q(TangentVariant::ExN);
        let md = q(TangentVariant::ModN { sigma_max: 1e-3 });
        let pc = q(TangentVariant::Pic);
        assert!(ex <= md + 1e-15 && md <= pc + 1e-15);
    }
}

#[test]
fn coercivity_lower_bound_holds() {
    let d = disc(4);
    let pr = pdelta_core::constitutive::ModelParams::new(1.5, 1e-5, 1e-3, 1e-5).unwrap();
    let u = smooth_state(&d);
    let mut rng = rng(23);
    let zero = vec![0.0; d.num_velocity_dofs()];
    let rep = d
        .coercivity_check(&zero, &u, 0.0, &ZeroData, &pr, &TangentVariant::ExN)
        .unwrap();
    assert_eq!(rep.lhs, 0.0);
    assert_eq!(rep.bound, 0.0);
    for _ in 0..20 {
        let v = random_vec(&mut rng, d.num_velocity_dofs());
        let rep = d
            .coercivity_check(&v, &u, 0.0, &ZeroData, &pr, &TangentVariant::ModN { sigma_max: 1e-3 })
            .unwrap();
        assert!(rep.lhs >= 0.5 * pr.nu_inf * rep.dv_norm_sq);
        assert!(rep.lhs >= rep.bound * (1.0 - 1e-12));
    }
    let zero_inf = pdelta_core::constitutive::ModelParams::new(1.5, 1e-5, 1e-3, 0.0).unwrap();
    assert!(d
        .coercivity_check(&zero, &u, 0.0, &ZeroData, &zero_inf, &TangentVariant::ExN)
        .is_err());
}

#[test]
fn consistency_under_refinement() {
    // A Stokes-type problem whose exact solution is smooth: residual of the
    // interpolant, measured in a dual norm proxy, decreases with h.
    struct Stokes;
    impl ProblemData for Stokes {
        fn force(&self, x: [f64; 2], _: f64) -> [f64; 2] {
            // -div(eta D v) + grad p for v = (sin y, sin x), p = x, eta = 0.02.
            let half_eta = 0.01;
            [half_eta * x[1].sin() + 1.0, half_eta * x[0].sin()]
        }
        fn dirichlet(&self, x: [f64; 2], _: f64) -> [f64; 2] {
            [x[1].sin(), x[0].sin()]
        }
        fn initial_velocity(&self, x: [f64; 2]) -> [f64; 2] {
            self.dirichlet(x, 0.0)
        }
    }
    let pr = pdelta_core::constitutive::ModelParams::new(2.0, 1e-3, 1e-2, 1e-2).unwrap();
    let mut cfg = DiscretizationConfig::default();
    cfg.mask.convection = false;
    cfg.mask.cip = false;
    let mut prev = f64::INFINITY;
    for n in [2, 4, 8] {
        let d = Discretization::new(&unit_square(n).unwrap(), cfg);
        let u = d.interpolate_state(|x| [x[1].sin(), x[0].sin()], |x| x[0] - 0.5);
        let r = d.spatial_residual(&u, 0.0, &Stokes, &pr, &u).unwrap();
        let h = 1.0 / n as f64;
        // Scale by h^-1 so the value approximates a discrete H^-1 norm.
        let val = norm(&r) / h;
        assert!(val < prev, "residual {val:e} not decreasing");
        prev = val;
    }
}
