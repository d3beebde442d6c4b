//! Gauss-Legendre rules and Legendre polynomial evaluation.

use crate::scalar::Real;

/// Evaluates `(P_n(x), P_{n-1}(x))` by the three-term recurrence.
pub fn legendre_pair<T: Real>(n: usize, x: T) -> (T, T) {
    if n == 0 {
        return (T::one(), T::zero());
    }
    let mut prev = T::one();
    let mut cur = x;
    for j in 1..n {
        let jj = T::lit(j as f64);
        let next = ((T::lit(2.0) * jj + T::one()) * x * cur - jj * prev) / (jj + T::one());
        prev = cur;
        cur = next;
    }
    (cur, prev)
}

/// `n`-point Gauss-Legendre rule on `[0, 1]`, nodes ascending.
pub fn gauss_legendre<T: Real>(n: usize) -> (Vec<T>, Vec<T>) {
    assert!(n >= 1, "Gauss-Legendre rule needs at least one point");
    let mut nodes = vec![T::zero(); n];
    let mut weights = vec![T::zero(); n];
    let nn = T::lit(n as f64);
    for i in 0..n {
        // Chebyshev-type initial guess for the i-th largest root on [-1, 1].
        let mut x = T::lit((std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos());
        for _ in 0..100 {
            let (p, pm1) = legendre_pair(n, x);
            let dp = nn * (x * p - pm1) / (x * x - T::one());
            let dx = p / dp;
            x = x - dx;
            if dx.abs() <= T::epsilon() * T::lit(4.0) {
                break;
            }
        }
        let (p, pm1) = legendre_pair(n, x);
        let dp = nn * (x * p - pm1) / (x * x - T::one());
        let w = T::lit(2.0) / ((T::one() - x * x) * dp * dp);
        nodes[n - 1 - i] = (x + T::one()) / T::lit(2.0);
        weights[n - 1 - i] = w / T::lit(2.0);
    }
    (nodes, weights)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_moments() {
        for n in 1..=8 {
            let (x, w) = gauss_legendre::<f64>(n);
            for j in 0..2 * n {
                let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(j as i32)).sum();
                assert!((q - 1.0 / (j as f64 + 1.0)).abs() < 1e-14, "n={n} j={j}");
            }
            assert!(x.windows(2).all(|p| p[0] < p[1]));
        }
    }
}
