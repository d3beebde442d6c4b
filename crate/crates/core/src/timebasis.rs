//! Right-sided Gauss-Radau nodes on `(0, 1]`, the nodal Lagrange basis, and
//! the temporal mass, stiffness-plus-jump and left-endpoint matrices of one
//! DG time step.

use thiserror::Error;

use crate::quadrature::{gauss_legendre, legendre_pair};
use crate::scalar::Real;

pub const MAX_DEGREE: usize = 6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TimeBasisError {
    #[error("temporal degree {0} outside supported range 0..={MAX_DEGREE}")]
    UnsupportedDegree(usize),
    #[error("time partition must be strictly increasing with at least one interval")]
    InvalidPartition,
    #[error("defect study needs at least 3 step sizes")]
    TooFewSteps,
}

/// `(k+1)`-point right Radau rule with its nodal Lagrange basis.
#[derive(Debug, Clone, PartialEq)]
pub struct TemporalBasis<T> {
    pub k: usize,
    pub nodes: Vec<T>,
    pub weights: Vec<T>,
}

/// Reference-interval temporal matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct TemporalMatrices<T> {
    /// `int xi_j xi_i`, diagonal in the Radau nodal basis.
    pub mass: Vec<Vec<T>>,
    /// `int xi_j' xi_i + xi_j(0) xi_i(0)`.
    pub stiffness: Vec<Vec<T>>,
    /// `xi_i(0)`.
    pub left: Vec<T>,
}

pub fn gauss_radau<T: Real>(k: usize) -> Result<TemporalBasis<T>, TimeBasisError> {
    if k > MAX_DEGREE {
        return Err(TimeBasisError::UnsupportedDegree(k));
    }
    let s = k + 1;
    // Nodes on [-1, 1] are the roots of P_s - P_{s-1}; x = 1 is always one of them.
    let q = |x: T| {
        let (ps, psm1) = legendre_pair(s, x);
        ps - psm1
    };
    let mut roots = Vec::with_capacity(s);
    let samples = 4000;
    let grid = |i: usize| T::lit(-1.0 + 2.0 * i as f64 / samples as f64);
    let mut a = grid(0);
    let mut qa = q(a);
    for i in 1..samples {
        let b = grid(i);
        let qb = q(b);
        if qa == T::zero() {
            roots.push(a);
        } else if qa * qb < T::zero() {
            let (mut lo, mut hi, mut qlo) = (a, b, qa);
            for _ in 0..200 {
                let mid = (lo + hi) / T::lit(2.0);
                let qm = q(mid);
                if qm == T::zero() || (hi - lo) <= T::epsilon() {
                    lo = mid;
                    hi = mid;
                    break;
                }
                if qm * qlo < T::zero() {
                    hi = mid;
                } else {
                    lo = mid;
                    qlo = qm;
                }
            }
            roots.push((lo + hi) / T::lit(2.0));
        }
        a = b;
        qa = qb;
    }
    roots.push(T::one());
    debug_assert_eq!(roots.len(), s);

    let ss = T::lit((s * s) as f64);
    let mut nodes = Vec::with_capacity(s);
    let mut weights = Vec::with_capacity(s);
    for (i, &x) in roots.iter().enumerate() {
        let w = if i + 1 == s {
            T::lit(2.0) / ss
        } else {
            let (_, psm1) = legendre_pair(s, x);
            (T::one() + x) / (ss * psm1 * psm1)
        };
        nodes.push((x + T::one()) / T::lit(2.0));
        weights.push(w / T::lit(2.0));
    }
    *nodes.last_mut().unwrap() = T::one();
    Ok(TemporalBasis { k, nodes, weights })
}

impl<T: Real> TemporalBasis<T> {
    pub fn num_nodes(&self) -> usize {
        self.k + 1
    }

    /// `ell_mu(t)` on the reference interval.
    pub fn lagrange_eval(&self, mu: usize, t: T) -> T {
        let tm = self.nodes[mu];
        self.nodes
            .iter()
            .enumerate()
            .filter(|(nu, _)| *nu != mu)
            .fold(T::one(), |acc, (_, &tn)| acc * (t - tn) / (tm - tn))
    }

    pub fn lagrange_deriv(&self, mu: usize, t: T) -> T {
        let tm = self.nodes[mu];
        let mut sum = T::zero();
        for (kappa, &tk) in self.nodes.iter().enumerate() {
            if kappa == mu {
                continue;
            }
            let mut prod = T::one() / (tm - tk);
            for (nu, &tn) in self.nodes.iter().enumerate() {
                if nu != mu && nu != kappa {
                    prod = prod * (t - tn) / (tm - tn);
                }
            }
            sum = sum + prod;
        }
        sum
    }

    /// All basis values at `t`.
    pub fn eval_all(&self, t: T) -> Vec<T> {
        (0..self.num_nodes()).map(|mu| self.lagrange_eval(mu, t)).collect()
    }

    /// Applies the rule to `f` on `[0, 1]`.
    pub fn integrate<F: FnMut(T) -> T>(&self, mut f: F) -> T {
        self.nodes
            .iter()
            .zip(&self.weights)
            .fold(T::zero(), |acc, (&t, &w)| acc + w * f(t))
    }
}

pub fn temporal_matrices<T: Real>(basis: &TemporalBasis<T>) -> TemporalMatrices<T> {
    let n = basis.num_nodes();
    let (gx, gw) = gauss_legendre::<T>(n + 1);
    let mut mass = vec![vec![T::zero(); n]; n];
    let mut stiffness = vec![vec![T::zero(); n]; n];
    let left: Vec<T> = (0..n).map(|i| basis.lagrange_eval(i, T::zero())).collect();
    for (&t, &w) in gx.iter().zip(&gw) {
        let vals = basis.eval_all(t);
        let ders: Vec<T> = (0..n).map(|j| basis.lagrange_deriv(j, t)).collect();
        for i in 0..n {
            for j in 0..n {
                mass[i][j] = mass[i][j] + w * vals[j] * vals[i];
                stiffness[i][j] = stiffness[i][j] + w * ders[j] * vals[i];
            }
        }
    }
    for i in 0..n {
        for j in 0..n {
            stiffness[i][j] = stiffness[i][j] + left[j] * left[i];
        }
    }
    TemporalMatrices { mass, stiffness, left }
}

/// Temporal mesh `t_0 < t_1 < ... < t_N`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimePartition<T> {
    points: Vec<T>,
}

impl<T: Real> TimePartition<T> {
    pub fn new(points: Vec<T>) -> Result<Self, TimeBasisError> {
        if points.len() < 2 || points.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(TimeBasisError::InvalidPartition);
        }
        Ok(Self { points })
    }

    pub fn uniform(t0: T, t1: T, steps: usize) -> Result<Self, TimeBasisError> {
        if steps == 0 {
            return Err(TimeBasisError::InvalidPartition);
        }
        let dt = (t1 - t0) / T::lit(steps as f64);
        let mut points: Vec<T> = (0..=steps).map(|n| t0 + dt * T::lit(n as f64)).collect();
        points[steps] = t1;
        Self::new(points)
    }

    pub fn num_steps(&self) -> usize {
        self.points.len() - 1
    }

    pub fn points(&self) -> &[T] {
        &self.points
    }

    /// `(t_{n-1}, t_n)` for the 1-based step `n`.
    pub fn interval(&self, n: usize) -> (T, T) {
        (self.points[n - 1], self.points[n])
    }

    pub fn step(&self, n: usize) -> T {
        self.points[n] - self.points[n - 1]
    }

    pub fn max_step(&self) -> T {
        (1..=self.num_steps())
            .map(|n| self.step(n))
            .fold(T::zero(), |a, b| a.max(b))
    }
}

/// Result of a quadrature-defect order study.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DefectOrder<T> {
    /// All defects fell below the round-off floor.
    Exact,
    Observed(T),
}

/// Least-squares slope of `log |int_0^tau f - tau Q(f(tau .))|` against
/// `log tau`. The reference integral uses a composite 20-point Gauss-Legendre
/// rule; defects below `1e-14` are treated as exact.
pub fn quadrature_defect_order<T: Real, F: Fn(T) -> T>(
    k: usize,
    f: F,
    taus: &[T],
) -> Result<DefectOrder<T>, TimeBasisError> {
    if taus.len() < 3 {
        return Err(TimeBasisError::TooFewSteps);
    }
    let basis = gauss_radau::<T>(k)?;
    let (gx, gw) = gauss_legendre::<T>(20);
    let panels = 4;
    let reference = |tau: T| {
        let h = tau / T::lit(panels as f64);
        (0..panels).fold(T::zero(), |acc, i| {
            let a = h * T::lit(i as f64);
            acc + gx
                .iter()
                .zip(&gw)
                .fold(T::zero(), |s, (&x, &w)| s + w * h * f(a + h * x))
        })
    };
    let floor = T::lit(1e-14);
    let points: Vec<(T, T)> = taus
        .iter()
        .filter_map(|&tau| {
            let q = tau * basis.integrate(|s| f(tau * s));
            let defect = (reference(tau) - q).abs();
            (defect > floor).then(|| (tau.ln(), defect.ln()))
        })
        .collect();
    if points.len() < 2 {
        return Ok(DefectOrder::Exact);
    }
    let n = T::lit(points.len() as f64);
    let mx = points.iter().fold(T::zero(), |a, p| a + p.0) / n;
    let my = points.iter().fold(T::zero(), |a, p| a + p.1) / n;
    let sxy = points.iter().fold(T::zero(), |a, p| a + (p.0 - mx) * (p.1 - my));
    let sxx = points.iter().fold(T::zero(), |a, p| a + (p.0 - mx) * (p.0 - mx));
    Ok(DefectOrder::Observed(sxy / sxx))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn degree_zero_rule() {
        let b = gauss_radau::<f64>(0).unwrap();
        assert_eq!(b.nodes, vec![1.0]);
        assert_eq!(b.weights, vec![1.0]);
        let m = temporal_matrices(&b);
        assert!((m.mass[0][0] - 1.0).abs() < 1e-15);
        assert!((m.stiffness[0][0] - 1.0).abs() < 1e-15);
        assert_eq!(m.left, vec![1.0]);
    }

    #[test]
    fn degree_one_rule_matches_moment_oracle() {
        // Two-point rule exact on P_2 with the node at 1: w0 + w1 = 1,
        // w0 x + w1 = 1/2, w0 x^2 + w1 = 1/3 gives x = 1/3, w0 = 3/4, w1 = 1/4.
        let b = gauss_radau::<f64>(1).unwrap();
        assert!((b.nodes[0] - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(b.nodes[1], 1.0);
        assert!((b.weights[0] - 0.75).abs() < 1e-15);
        assert!((b.weights[1] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn degree_two_exactness_boundary() {
        let b = gauss_radau::<f64>(2).unwrap();
        assert!((b.integrate(|t| t.powi(4)) - 0.2).abs() < 1e-15);
        assert!((b.integrate(|t| t.powi(5)) - 1.0 / 6.0).abs() > 1e-6);
    }

    #[test]
    fn moments_up_to_2k() {
        for k in 0..=MAX_DEGREE {
            let b = gauss_radau::<f64>(k).unwrap();
            for j in 0..=2 * k {
                let q = b.integrate(|t| t.powi(j as i32));
                assert!((q - 1.0 / (j as f64 + 1.0)).abs() < 1e-14, "k={k} j={j}");
            }
            assert!(b.weights.iter().all(|&w| w > 0.0));
            assert!(b.nodes.windows(2).all(|w| w[0] < w[1]));
            assert!(b.nodes[0] > 0.0);
        }
        assert!(gauss_radau::<f64>(MAX_DEGREE + 1).is_err());
    }

    #[test]
    fn degree_one_matrices() {
        let m = temporal_matrices(&gauss_radau::<f64>(1).unwrap());
        let expected = [[9.0 / 8.0, 3.0 / 8.0], [-9.0 / 8.0, 5.0 / 8.0]];
        for i in 0..2 {
            for j in 0..2 {
                assert!((m.stiffness[i][j] - expected[i][j]).abs() < 1e-14);
            }
        }
        assert!((m.left[0] - 1.5).abs() < 1e-14);
        assert!((m.left[1] + 0.5).abs() < 1e-14);
    }

    #[test]
    fn mass_is_diagonal_and_rows_sum_to_left_trace() {
        for k in 0..=4 {
            let b = gauss_radau::<f64>(k).unwrap();
            let m = temporal_matrices(&b);
            for i in 0..=k {
                for j in 0..=k {
                    if i == j {
                        assert!((m.mass[i][j] - b.weights[i]).abs() < 1e-14);
                    } else {
                        assert!(m.mass[i][j].abs() < 1e-14);
                    }
                }
                let row: f64 = m.stiffness[i].iter().sum();
                assert!((row - m.left[i]).abs() < 1e-13, "k={k}");
            }
        }
    }

    #[test]
    fn lagrange_basis_properties() {
        let b = gauss_radau::<f64>(3).unwrap();
        for mu in 0..=3 {
            for nu in 0..=3 {
                let v = b.lagrange_eval(mu, b.nodes[nu]);
                assert!((v - if mu == nu { 1.0 } else { 0.0 }).abs() < 1e-13);
            }
        }
        for &t in &[0.0, 0.17, 0.5, 0.93] {
            let s: f64 = b.eval_all(t).iter().sum();
            assert!((s - 1.0).abs() < 1e-13);
        }
        let b1 = gauss_radau::<f64>(1).unwrap();
        let l = b1.eval_all(0.0);
        assert!((l[0] - 1.5).abs() < 1e-15 && (l[1] + 0.5).abs() < 1e-15);
    }

    #[test]
    fn defect_orders() {
        let taus = [0.5, 0.25, 0.125, 0.0625];
        match quadrature_defect_order(1, |t: f64| t.exp(), &taus).unwrap() {
            DefectOrder::Observed(s) => assert!((3.7..=4.3).contains(&s), "slope {s}"),
            DefectOrder::Exact => panic!("exp is not integrated exactly"),
        }
        // degree-2k polynomial is integrated exactly
        let exact = quadrature_defect_order(2, |t: f64| 1.0 + t + t.powi(4), &taus).unwrap();
        assert_eq!(exact, DefectOrder::Exact);
        let nonzero = quadrature_defect_order(1, |t: f64| t.powi(3), &taus).unwrap();
        assert!(matches!(nonzero, DefectOrder::Observed(_)));
        assert!(quadrature_defect_order(1, |t: f64| t, &[0.5, 0.25]).is_err());
    }

    #[test]
    fn partition_basics() {
        let p = TimePartition::<f64>::uniform(0.0, 1.0, 4).unwrap();
        assert_eq!(p.num_steps(), 4);
        assert!((p.step(2) - 0.25).abs() < 1e-15);
        assert_eq!(p.interval(4), (0.75, 1.0));
        assert!(TimePartition::new(vec![0.0, 0.5, 0.5]).is_err());
        assert!(TimePartition::<f64>::uniform(0.0, 1.0, 0).is_err());
    }
}
