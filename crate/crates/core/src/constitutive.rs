//! Regularized power-law stress, its derivative, and the three constitutive
//! tangents used by the nonlinear solvers.
//!
//! The stress law is `S(A) = eta(A) A` with effective viscosity
//! `eta(A) = nu_inf + nu (delta^2 + |A|^2)^((p-2)/2)`. Every tangent used here
//! has the form `T(B) = eta B + c (A:B) A`, a rank-one perturbation of a
//! multiple of the identity on symmetric 2x2 tensors, so its spectrum is
//! `{eta, eta + c |A|^2}`.

use std::ops::{Add, Mul, Neg, Sub};

use thiserror::Error;

use crate::scalar::Real;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConstitutiveError {
    #[error("invalid model parameters: {0}")]
    InvalidParams(String),
    #[error("domain error: {0}")]
    Domain(&'static str),
}

/// Constitutive tuple `(p, delta, nu, nu_inf)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams<T> {
    pub p: T,
    pub delta: T,
    pub nu: T,
    pub nu_inf: T,
}

impl<T: Real> ModelParams<T> {
    pub fn new(p: T, delta: T, nu: T, nu_inf: T) -> Result<Self, ConstitutiveError> {
        let params = Self { p, delta, nu, nu_inf };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<(), ConstitutiveError> {
        let one = T::one();
        let two = T::lit(2.0);
        if !(self.p > one && self.p <= two) {
            return Err(ConstitutiveError::InvalidParams(format!(
                "exponent p = {} outside (1, 2]",
                self.p
            )));
        }
        if !(self.delta >= T::zero()) {
            return Err(ConstitutiveError::InvalidParams(format!(
                "delta = {} must be nonnegative",
                self.delta
            )));
        }
        if !(self.nu > T::zero()) {
            return Err(ConstitutiveError::InvalidParams(format!(
                "nu = {} must be positive",
                self.nu
            )));
        }
        if !(self.nu_inf >= T::zero()) {
            return Err(ConstitutiveError::InvalidParams(format!(
                "nu_inf = {} must be nonnegative",
                self.nu_inf
            )));
        }
        Ok(())
    }

    /// `nu (delta^2 + r2)^((p-2)/2)` for a squared shear magnitude `r2`.
    #[inline]
    fn power_part(&self, r2: T) -> T {
        let base = self.delta * self.delta + r2;
        self.nu * base.powf((self.p - T::lit(2.0)) / T::lit(2.0))
    }

    fn require_regularized(&self) -> Result<(), ConstitutiveError> {
        if self.delta > T::zero() {
            Ok(())
        } else {
            Err(ConstitutiveError::Domain("derivative requires delta > 0"))
        }
    }
}

/// Symmetric 2x2 tensor stored as `(a11, a22, a12)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SymTensor2<T> {
    pub a11: T,
    pub a22: T,
    pub a12: T,
}

impl<T: Real> SymTensor2<T> {
    pub fn new(a11: T, a22: T, a12: T) -> Self {
        Self { a11, a22, a12 }
    }

    pub fn zero() -> Self {
        Self::new(T::zero(), T::zero(), T::zero())
    }

    pub fn diag(a11: T, a22: T) -> Self {
        Self::new(a11, a22, T::zero())
    }

    /// Symmetric part of a velocity gradient `grad[i][j] = d_j v_i`.
    pub fn sym_grad(grad: [[T; 2]; 2]) -> Self {
        let half = T::lit(0.5);
        Self::new(grad[0][0], grad[1][1], half * (grad[0][1] + grad[1][0]))
    }

    /// Frobenius contraction `A:B`.
    #[inline]
    pub fn contract(&self, other: &Self) -> T {
        self.a11 * other.a11 + self.a22 * other.a22 + T::lit(2.0) * self.a12 * other.a12
    }

    #[inline]
    pub fn norm_sq(&self) -> T {
        self.contract(self)
    }

    #[inline]
    pub fn norm(&self) -> T {
        self.norm_sq().sqrt()
    }

    #[inline]
    pub fn trace(&self) -> T {
        self.a11 + self.a22
    }

    /// Tensor-vector product `A n`.
    #[inline]
    pub fn mul_vec(&self, n: [T; 2]) -> [T; 2] {
        [
            self.a11 * n[0] + self.a12 * n[1],
            self.a12 * n[0] + self.a22 * n[1],
        ]
    }

    /// Coordinates in the orthonormal basis `{e11, e22, sqrt(2) e12}` under
    /// which `A:B` is the Euclidean dot product.
    pub fn to_weighted(&self) -> [T; 3] {
        [self.a11, self.a22, T::lit(2.0).sqrt() * self.a12]
    }

    pub fn from_weighted(c: [T; 3]) -> Self {
        Self::new(c[0], c[1], c[2] / T::lit(2.0).sqrt())
    }

    pub fn max_abs_diff(&self, other: &Self) -> T {
        (self.a11 - other.a11)
            .abs()
            .max((self.a22 - other.a22).abs())
            .max((self.a12 - other.a12).abs())
    }
}

impl<T: Real> Add for SymTensor2<T> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.a11 + o.a11, self.a22 + o.a22, self.a12 + o.a12)
    }
}

impl<T: Real> Sub for SymTensor2<T> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(self.a11 - o.a11, self.a22 - o.a22, self.a12 - o.a12)
    }
}

impl<T: Real> Neg for SymTensor2<T> {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.a11, -self.a22, -self.a12)
    }
}

impl<T: Real> Mul<T> for SymTensor2<T> {
    type Output = Self;
    fn mul(self, s: T) -> Self {
        Self::new(self.a11 * s, self.a22 * s, self.a12 * s)
    }
}

/// Linearization of the constitutive law used in the correction equation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TangentVariant<T> {
    /// Picard: frozen effective viscosity, no derivative of the stress law.
    Pic,
    /// Exact Frechet derivative of the stress law.
    ExN,
    /// Stress-clipped rank-one correction with clip bound `sigma_max`.
    ModN { sigma_max: T },
}

impl<T: Real> TangentVariant<T> {
    pub fn is_picard(&self) -> bool {
        matches!(self, TangentVariant::Pic)
    }

    pub fn label(&self) -> &'static str {
        match self {
            TangentVariant::Pic => "pic",
            TangentVariant::ExN => "exn",
            TangentVariant::ModN { .. } => "modn",
        }
    }
}

/// A tangent frozen at a state `A`: `B -> eta B + coef (A:B) A`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tangent<T> {
    pub eta: T,
    pub mu: T,
    pub coef: T,
    pub clip: T,
    pub a: SymTensor2<T>,
}

impl<T: Real> Tangent<T> {
    #[inline]
    pub fn apply(&self, b: &SymTensor2<T>) -> SymTensor2<T> {
        *b * self.eta + self.a * (self.coef * self.a.contract(b))
    }

    pub fn lambda_perp(&self) -> T {
        self.eta
    }

    pub fn lambda_par(&self) -> T {
        self.eta + self.coef * self.a.norm_sq()
    }
}

/// Effective viscosity and the spectral quantities of a tangent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TangentEval<T> {
    pub eta: T,
    pub mu: T,
    pub lambda_perp: T,
    pub lambda_par: T,
    pub ratio: T,
    pub s: T,
}

pub fn effective_viscosity<T: Real>(
    params: &ModelParams<T>,
    a: &SymTensor2<T>,
) -> Result<T, ConstitutiveError> {
    let r2 = a.norm_sq();
    if params.delta == T::zero() && r2 == T::zero() && params.p < T::lit(2.0) {
        return Err(ConstitutiveError::Domain(
            "effective viscosity is singular at zero shear when delta = 0",
        ));
    }
    Ok(params.nu_inf + params.power_part(r2))
}

/// Scalar apparent viscosity at shear rate `gamma_dot`.
pub fn apparent_viscosity<T: Real>(params: &ModelParams<T>, gamma_dot: T) -> T {
    params.nu_inf + params.power_part(gamma_dot * gamma_dot)
}

/// `S(A) = eta(A) A`. For `delta = 0` the zero-shear limit `S(0) = 0` is used.
pub fn stress<T: Real>(
    params: &ModelParams<T>,
    a: &SymTensor2<T>,
) -> Result<SymTensor2<T>, ConstitutiveError> {
    if params.delta == T::zero() && a.norm_sq() == T::zero() {
        return Ok(SymTensor2::zero());
    }
    Ok(*a * effective_viscosity(params, a)?)
}

/// Frechet derivative `DS(A)[H]`.
pub fn stress_derivative_apply<T: Real>(
    params: &ModelParams<T>,
    a: &SymTensor2<T>,
    h: &SymTensor2<T>,
) -> Result<SymTensor2<T>, ConstitutiveError> {
    Ok(tangent_at(&TangentVariant::ExN, params, a)?.apply(h))
}

/// Freezes the tangent of `variant` at the state `A`.
pub fn tangent_at<T: Real>(
    variant: &TangentVariant<T>,
    params: &ModelParams<T>,
    a: &SymTensor2<T>,
) -> Result<Tangent<T>, ConstitutiveError> {
    params.require_regularized()?;
    let r2 = a.norm_sq();
    let delta2 = params.delta * params.delta + r2;
    let mu = params.power_part(r2);
    let eta = params.nu_inf + mu;
    let exact = (params.p - T::lit(2.0)) * mu / delta2;
    let (coef, clip) = match variant {
        TangentVariant::Pic => (T::zero(), T::zero()),
        TangentVariant::ExN => (exact, T::one()),
        TangentVariant::ModN { sigma_max } => {
            let sigma_norm = mu * r2.sqrt();
            let s = if sigma_norm == T::zero() {
                T::zero()
            } else {
                T::one().min(*sigma_max / sigma_norm)
            };
            (s * exact, s)
        }
    };
    Ok(Tangent { eta, mu, coef, clip, a: *a })
}

pub fn tangent_apply<T: Real>(
    variant: &TangentVariant<T>,
    params: &ModelParams<T>,
    a: &SymTensor2<T>,
    b: &SymTensor2<T>,
) -> Result<SymTensor2<T>, ConstitutiveError> {
    Ok(tangent_at(variant, params, a)?.apply(b))
}

pub fn tangent_spectrum<T: Real>(
    variant: &TangentVariant<T>,
    params: &ModelParams<T>,
    a: &SymTensor2<T>,
) -> Result<TangentEval<T>, ConstitutiveError> {
    let t = tangent_at(variant, params, a)?;
    let lambda_perp = t.lambda_perp();
    let lambda_par = t.lambda_par();
    Ok(TangentEval {
        eta: t.eta,
        mu: t.mu,
        lambda_perp,
        lambda_par,
        ratio: lambda_perp / lambda_par,
        s: t.clip,
    })
}

/// `Phi_delta(A) = (delta^2 + |A|^2)^((p-2)/4) A`, with `Phi(0) = 0` when `delta = 0`.
pub fn natural_distance_map<T: Real>(params: &ModelParams<T>, a: &SymTensor2<T>) -> SymTensor2<T> {
    let r2 = a.norm_sq();
    if r2 == T::zero() {
        return SymTensor2::zero();
    }
    let base = params.delta * params.delta + r2;
    *a * base.powf((params.p - T::lit(2.0)) / T::lit(4.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand::rngs::StdRng;

    fn params(p: f64, delta: f64, nu: f64, nu_inf: f64) -> ModelParams<f64> {
        ModelParams::new(p, delta, nu, nu_inf).unwrap()
    }

    fn random_tensor(rng: &mut StdRng, scale: f64) -> SymTensor2<f64> {
        SymTensor2::new(
            scale * rng.gen_range(-1.0..1.0),
            scale * rng.gen_range(-1.0..1.0),
            scale * rng.gen_range(-1.0..1.0),
        )
    }

    #[test]
    fn params_reject_out_of_range() {
        assert!(ModelParams::new(1.0, 1e-5, 1.0, 0.0).is_err());
        assert!(ModelParams::new(2.5, 1e-5, 1.0, 0.0).is_err());
        assert!(ModelParams::new(1.5, -1.0, 1.0, 0.0).is_err());
        assert!(ModelParams::new(1.5, 1e-5, 0.0, 0.0).is_err());
        assert!(ModelParams::new(1.5, 1e-5, 1.0, -1e-3).is_err());
        assert!(ModelParams::new(2.0, 0.0, 1.0, 0.0).is_ok());
    }

    #[test]
    fn viscosity_at_zero_shear() {
        let pr = params(1.5, 1e-2, 2.0, 0.1);
        let eta = effective_viscosity(&pr, &SymTensor2::zero()).unwrap();
        assert!((eta - (0.1 + 2.0 * 1e-2f64.powf(-0.5))).abs() < 1e-12);
    }

    #[test]
    fn newtonian_limit() {
        let pr = params(2.0, 1e-3, 0.5, 0.25);
        let a = SymTensor2::new(3.0, -1.0, 2.0);
        assert!((effective_viscosity(&pr, &a).unwrap() - 0.75).abs() < 1e-15);
        let s = stress(&pr, &a).unwrap();
        assert!(s.max_abs_diff(&(a * 0.75)) < 1e-15);
    }

    #[test]
    fn viscosity_scalar_oracle() {
        let pr = params(1.5, 1e-5, 1e-2, 0.0);
        let a = SymTensor2::diag(1.0, -1.0);
        // |A|^2 = 2
        let expected = 1e-2 * (1e-10f64 + 2.0).powf(-0.25);
        assert!((effective_viscosity(&pr, &a).unwrap() - expected).abs() < 1e-16);
    }

    #[test]
    fn singular_viscosity_is_domain_error() {
        let pr = params(1.5, 0.0, 1.0, 0.0);
        assert!(matches!(
            effective_viscosity(&pr, &SymTensor2::zero()),
            Err(ConstitutiveError::Domain(_))
        ));
        assert_eq!(stress(&pr, &SymTensor2::zero()).unwrap(), SymTensor2::zero());
        assert!(stress_derivative_apply(&pr, &SymTensor2::diag(1.0, 0.0), &SymTensor2::zero()).is_err());
    }

    #[test]
    fn stress_is_strictly_monotone() {
        let pr = params(1.3, 1e-4, 1e-2, 0.0);
        let mut rng = StdRng::seed_from_u64(7);
        for _ in 0..100 {
            let a = random_tensor(&mut rng, 3.0);
            let b = random_tensor(&mut rng, 3.0);
            let ds = stress(&pr, &a).unwrap() - stress(&pr, &b).unwrap();
            assert!(ds.contract(&(a - b)) > 0.0);
        }
    }

    #[test]
    fn derivative_at_zero_is_isotropic() {
        let pr = params(1.4, 1e-3, 1.0, 0.2);
        let h = SymTensor2::new(0.3, -0.7, 1.1);
        let eta0 = effective_viscosity(&pr, &SymTensor2::zero()).unwrap();
        let d = stress_derivative_apply(&pr, &SymTensor2::zero(), &h).unwrap();
        assert_eq!(d, h * eta0);
    }

    #[test]
    fn derivative_on_orthogonal_complement() {
        let pr = params(1.4, 1e-3, 1.0, 0.2);
        let a = SymTensor2::new(1.0, 2.0, 0.5);
        // A:H = 1*2 + 2*(-1) + 2*0.5*0 = 0
        let h = SymTensor2::new(2.0, -1.0, 0.0);
        assert_eq!(a.contract(&h), 0.0);
        let eta = effective_viscosity(&pr, &a).unwrap();
        let d = stress_derivative_apply(&pr, &a, &h).unwrap();
        assert!(d.max_abs_diff(&(h * eta)) < 1e-14);
    }

    #[test]
    fn derivative_matches_central_differences() {
        let pr = params(1.25, 1e-3, 1e-2, 1e-5);
        let mut rng = StdRng::seed_from_u64(11);
        for _ in 0..200 {
            let a = random_tensor(&mut rng, 2.0);
            let h = random_tensor(&mut rng, 1.0);
            let eps = 1e-6 * a.norm().max(1.0);
            let fd = (stress(&pr, &(a + h * eps)).unwrap() - stress(&pr, &(a - h * eps)).unwrap())
                * (0.5 / eps);
            let d = stress_derivative_apply(&pr, &a, &h).unwrap();
            let rel = (fd - d).norm() / d.norm();
            assert!(rel < 1e-6, "rel {rel}");
        }
    }

    #[test]
    fn modn_limits_reproduce_pic_and_exn() {
        let pr = params(1.5, 1e-4, 1e-2, 1e-5);
        let mut rng = StdRng::seed_from_u64(3);
        for _ in 0..100 {
            let a = random_tensor(&mut rng, 5.0);
            let b = random_tensor(&mut rng, 1.0);
            let zero = TangentVariant::ModN { sigma_max: 0.0 };
            let inf = TangentVariant::ModN { sigma_max: f64::INFINITY };
            assert_eq!(
                tangent_apply(&zero, &pr, &a, &b).unwrap(),
                tangent_apply(&TangentVariant::Pic, &pr, &a, &b).unwrap()
            );
            assert_eq!(
                tangent_apply(&inf, &pr, &a, &b).unwrap(),
                tangent_apply(&TangentVariant::ExN, &pr, &a, &b).unwrap()
            );
        }
    }

    #[test]
    fn exact_parallel_eigenvalue_near_zero_delta() {
        let pr = params(1.5, 1e-10, 1e-2, 0.0);
        let a = SymTensor2::diag(1.0, 0.0);
        let b = a * (1.0 / a.norm());
        let out = tangent_apply(&TangentVariant::ExN, &pr, &a, &b).unwrap();
        let expected = 1e-2 * (1e-20f64 + 1.0).powf(-1.25) * (1e-20 + 0.5);
        assert!((out.contract(&b) - expected).abs() < 1e-16);
        assert!((expected - 0.5 * 1e-2).abs() < 1e-15);
    }

    #[test]
    fn picard_is_isotropic() {
        let pr = params(1.2, 1e-5, 1e-3, 0.0);
        let ev = tangent_spectrum(&TangentVariant::Pic, &pr, &SymTensor2::new(3.0, 1.0, -2.0)).unwrap();
        assert_eq!(ev.ratio, 1.0);
        assert_eq!(ev.lambda_par, ev.lambda_perp);
    }

    #[test]
    fn exact_ratio_large_shear_limit() {
        let pr = params(1.5, 1e-8, 1.0, 0.0);
        let ev = tangent_spectrum(&TangentVariant::ExN, &pr, &SymTensor2::diag(1e3, -1e3)).unwrap();
        assert!(ev.ratio <= 2.0 + 1e-12);
        assert!((ev.ratio - 2.0).abs() < 1e-10);
    }

    #[test]
    fn natural_distance_map_cases() {
        let pr = params(1.5, 1e-3, 1.0, 0.0);
        assert_eq!(natural_distance_map(&pr, &SymTensor2::zero()), SymTensor2::zero());
        let pr2 = params(2.0, 1e-3, 1.0, 0.0);
        let a = SymTensor2::new(0.4, 1.0, -0.3);
        assert!(natural_distance_map(&pr2, &a).max_abs_diff(&a) < 1e-15);
        let mut rng = StdRng::seed_from_u64(5);
        for _ in 0..100 {
            let a = random_tensor(&mut rng, 4.0);
            let phi = natural_distance_map(&pr, &a);
            let r2 = a.norm_sq();
            let expected = (1e-6 + r2).powf(-0.25) * r2;
            assert!((phi.norm_sq() - expected).abs() <= 1e-13 * expected.max(1.0));
        }
        let pr0 = params(1.5, 0.0, 1.0, 0.0);
        assert_eq!(natural_distance_map(&pr0, &SymTensor2::zero()), SymTensor2::zero());
    }

    #[test]
    fn weighted_coordinates_preserve_contraction() {
        let a = SymTensor2::new(0.3, -1.2, 0.7);
        let b = SymTensor2::new(-2.0, 0.5, 1.5);
        let (wa, wb) = (a.to_weighted(), b.to_weighted());
        let dot: f64 = wa.iter().zip(&wb).map(|(x, y)| x * y).sum();
        assert!((dot - a.contract(&b)).abs() < 1e-15);
        assert!(SymTensor2::from_weighted(wa).max_abs_diff(&a) < 1e-16);
    }

    #[test]
    fn single_precision_instantiation() {
        let pr = ModelParams::<f32>::new(1.5, 1e-3, 1.0, 0.0).unwrap();
        let eta = effective_viscosity(&pr, &SymTensor2::diag(1.0f32, 0.0)).unwrap();
        assert!((eta - (1e-6f32 + 1.0).powf(-0.25)).abs() < 1e-6);
    }
}
