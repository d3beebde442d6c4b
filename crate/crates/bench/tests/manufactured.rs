use pdelta_bench::manufactured::ManufacturedCase;
use pdelta_bench::metrics::{eoc, error_norms, work_from_counts};
use pdelta_core::constitutive::{stress, ModelParams, SymTensor2};
use pdelta_core::forms::{Discretization, DiscretizationConfig, ProblemData};
use pdelta_core::mesh::unit_square;
use pdelta_core::quadrature::gauss_legendre;
use pdelta_core::timebasis::{gauss_radau, TimePartition};
use rand::{Rng, SeedableRng};

fn case(p: f64, delta: f64) -> ManufacturedCase {
    ManufacturedCase::new(ModelParams::new(p, delta, 1e-2, 1e-4).unwrap())
}

fn points(n: usize, seed: u64) -> Vec<([f64; 2], f64)> {
    let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
    (0..n)
        .map(|_| ([rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)], rng.gen_range(0.0..1.0)))
        .collect()
}

#[test]
fn velocity_is_solenoidal_and_vanishes_on_the_boundary() {
    let c = case(1.5, 1e-5);
    for (x, t) in points(1000, 1) {
        assert!(c.divergence(x, t).abs() < 1e-12);
        let g = c.velocity_gradient(x, t);
        assert!((g[0][0] + g[1][1]).abs() < 1e-12);
    }
    for s in [0.0, 0.3, 0.71, 1.0] {
        for x in [[s, 0.0], [s, 1.0], [0.0, s], [1.0, s]] {
            let v = c.velocity(x, 0.8);
            assert!(v[0].abs() < 1e-15 && v[1].abs() < 1e-15);
            assert_eq!(c.dirichlet(x, 0.8), [0.0, 0.0]);
        }
    }
    assert_eq!(c.initial_velocity([0.3, 0.4]), [0.0, 0.0]);
}

#[test]
fn gradient_matches_finite_differences() {
    let c = case(1.5, 1e-5);
    let h = 1e-6;
    for (x, t) in points(50, 2) {
        let g = c.velocity_gradient(x, t);
        for j in 0..2 {
            let mut xp = x;
            let mut xm = x;
            xp[j] += h;
            xm[j] -= h;
            let (vp, vm) = (c.velocity(xp, t), c.velocity(xm, t));
            for i in 0..2 {
                assert!((g[i][j] - (vp[i] - vm[i]) / (2.0 * h)).abs() < 1e-7);
            }
        }
    }
}

/// Strong form `dv/dt + (v . grad) v - div S(D v) + grad pi` evaluated with
/// nested central differences.
fn strong_form(c: &ManufacturedCase, x: [f64; 2], t: f64) -> [f64; 2] {
    let h = 1e-4;
    let dt = [0, 1].map(|i| (c.velocity(x, t + h)[i] - c.velocity(x, t - h)[i]) / (2.0 * h));
    let v = c.velocity(x, t);
    let g = c.velocity_gradient(x, t);
    let s = |y: [f64; 2]| stress(&c.params, &SymTensor2::sym_grad(c.velocity_gradient(y, t))).unwrap();
    let shift = |j: usize, d: f64| {
        let mut y = x;
        y[j] += d;
        y
    };
    let (sxp, sxm, syp, sym) = (s(shift(0, h)), s(shift(0, -h)), s(shift(1, h)), s(shift(1, -h)));
    let div = [
        (sxp.a11 - sxm.a11) / (2.0 * h) + (syp.a12 - sym.a12) / (2.0 * h),
        (sxp.a12 - sxm.a12) / (2.0 * h) + (syp.a22 - sym.a22) / (2.0 * h),
    ];
    let gp = [0, 1].map(|j| (c.pressure(shift(j, h), t) - c.pressure(shift(j, -h), t)) / (2.0 * h));
    [0, 1].map(|i| dt[i] + g[i][0] * v[0] + g[i][1] * v[1] - div[i] + gp[i])
}

#[test]
fn forcing_matches_strong_form() {
    for (p, delta) in [(1.5, 1e-3), (1.25, 1e-2), (2.0, 0.0)] {
        let c = case(p, delta);
        for (x, t) in points(40, 3) {
            let f = c.forcing(x, t).unwrap();
            let fd = strong_form(&c, x, t);
            let scale = f[0].abs().max(f[1].abs()).max(1.0);
            for i in 0..2 {
                assert!((f[i] - fd[i]).abs() < 1e-5 * scale, "p={p} at {x:?},{t}: {f:?} vs {fd:?}");
            }
            assert_eq!(c.force(x, t), f);
        }
    }
}

#[test]
fn forcing_at_initial_time_is_the_velocity_rate() {
    let c = case(1.5, 1e-15);
    let h = 1e-6;
    for (x, _) in points(30, 4) {
        let f = c.forcing(x, 0.0).unwrap();
        let rate = [0, 1].map(|i| (c.velocity(x, h)[i] - c.velocity(x, -h)[i]) / (2.0 * h));
        assert!(f.iter().all(|v| v.is_finite()));
        for i in 0..2 {
            assert!((f[i] - rate[i]).abs() < 1e-8);
        }
    }
}

/// For `p = 2` the natural distance is the symmetric gradient itself, so the
/// error of the zero state is `||D v||` and a Q2 state with known divergence
/// gives a closed-form divergence error.
#[test]
fn error_norms_match_reference_integrals() {
    let c = ManufacturedCase::new(ModelParams::new(2.0, 0.0, 1.0, 0.0).unwrap());
    let d = Discretization::new(&unit_square(2).unwrap(), DiscretizationConfig::default());
    let basis = gauss_radau::<f64>(1).unwrap();
    let part = TimePartition::uniform(0.0, 1.0, 2).unwrap();
    let n = d.num_dofs();
    let zero = vec![vec![0.0; 2 * n]; 2];
    let errs = error_norms(&d, &basis, &part, &zero, &c);
    assert_eq!(errs.e_div, 0.0);

    let (gx, gw) = gauss_legendre::<f64>(16);
    let mut reference = 0.0;
    for (tx, tw) in gx.iter().zip(&gw) {
        for (xx, xw) in gx.iter().zip(&gw) {
            for (yx, yw) in gx.iter().zip(&gw) {
                let a = SymTensor2::sym_grad(c.velocity_gradient([*xx, *yx], *tx));
                reference += tw * xw * yw * a.norm_sq();
            }
        }
    }
    let rel = (errs.e_phi - reference.sqrt()).abs() / reference.sqrt();
    assert!(rel < 1e-4, "relative quadrature mismatch {rel:e}");

    // v = (x^2, 0) at every node: div v = 2x, so e_div^2 = int 4x^2 = 4/3.
    let mut u = d.interpolate_state(|x| [x[0] * x[0], 0.0], |_| 0.0);
    u.extend(u.clone());
    let errs = error_norms(&d, &basis, &part, &[u.clone(), u], &c);
    assert!((errs.e_div - (4.0f64 / 3.0).sqrt()).abs() < 1e-12);
}

#[test]
fn orders_and_work() {
    let o = eoc(&[0.4, 0.1, 0.05, 0.0]);
    assert!((o[0].unwrap() - 2.0).abs() < 1e-14);
    assert!((o[1].unwrap() - 1.0).abs() < 1e-14);
    assert_eq!(o[2], None);
    assert_eq!(work_from_counts(&[3, 4, 5], 100), 1200.0);
}
