//! Small tabulations: tangent spectra over a shear-rate grid and the
//! temporal quadrature check.

use std::io::Write;

use pdelta_core::constitutive::{tangent_spectrum, ModelParams, SymTensor2, TangentVariant};
use pdelta_core::timebasis::{gauss_radau, quadrature_defect_order, temporal_matrices, DefectOrder};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrumRow {
    pub abs_a: f64,
    pub lambda_perp: f64,
    pub lambda_par: f64,
    /// `lambda_perp / lambda_par`.
    pub ratio: f64,
    pub clip: f64,
}

/// Spectrum of the tangent at `A = |A| diag(1, -1) / sqrt(2)` for `points`
/// values of `|A|` spaced geometrically in `[a_min, a_max]`.
pub fn spectrum_table(
    params: &ModelParams<f64>,
    variant: &TangentVariant<f64>,
    a_min: f64,
    a_max: f64,
    points: usize,
) -> anyhow::Result<Vec<SpectrumRow>> {
    anyhow::ensure!(a_min > 0.0 && a_max >= a_min && points >= 1, "invalid |A| grid");
    let dir = SymTensor2::diag(1.0, -1.0) * std::f64::consts::FRAC_1_SQRT_2;
    (0..points)
        .map(|j| {
            let frac = if points == 1 { 0.0 } else { j as f64 / (points - 1) as f64 };
            let abs_a = a_min * (a_max / a_min).powf(frac);
            let e = tangent_spectrum(variant, params, &(dir * abs_a))?;
            Ok(SpectrumRow {
                abs_a,
                lambda_perp: e.lambda_perp,
                lambda_par: e.lambda_par,
                ratio: e.ratio,
                clip: e.s,
            })
        })
        .collect()
}

pub fn write_spectrum<W: Write>(out: W, rows: &[SpectrumRow]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["abs_a", "lambda_perp", "lambda_par", "ratio", "clip"])?;
    for r in rows {
        w.write_record(
            [r.abs_a, r.lambda_perp, r.lambda_par, r.ratio, r.clip].map(|x| format!("{x:.16e}")),
        )?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadRow {
    pub k: usize,
    /// Largest error over monomials `t^j`, `j <= 2k`.
    pub monomial_error: f64,
    /// Largest `|M_t[i][j]|` off the diagonal.
    pub mass_offdiag: f64,
    /// Observed defect order for `exp(t)`; `None` when the rule is exact at
    /// round-off level on every step.
    pub defect_order: Option<f64>,
    pub expected_order: usize,
}

/// Checks the right Radau rules of degree `0..=k_max`.
pub fn quadcheck(k_max: usize) -> anyhow::Result<Vec<QuadRow>> {
    let taus = [0.4, 0.2, 0.1, 0.05];
    (0..=k_max)
        .map(|k| {
            let basis = gauss_radau::<f64>(k)?;
            let monomial_error = (0..=2 * k)
                .map(|j| {
                    let q = basis.integrate(|t| t.powi(j as i32));
                    (q - 1.0 / (j as f64 + 1.0)).abs()
                })
                .fold(0.0f64, f64::max);
            let m = temporal_matrices(&basis).mass;
            let mut mass_offdiag = 0.0f64;
            for (i, row) in m.iter().enumerate() {
                for (j, v) in row.iter().enumerate() {
                    if i != j {
                        mass_offdiag = mass_offdiag.max(v.abs());
                    }
                }
            }
            let defect_order = match quadrature_defect_order(k, f64::exp, &taus)? {
                DefectOrder::Exact => None,
                DefectOrder::Observed(o) => Some(o),
            };
            Ok(QuadRow {
                k,
                monomial_error,
                mass_offdiag,
                defect_order,
                expected_order: 2 * k + 2,
            })
        })
        .collect()
}

pub fn write_quadcheck<W: Write>(out: W, rows: &[QuadRow]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "k",
        "monomial_error",
        "mass_offdiag",
        "defect_order",
        "expected_order",
    ])?;
    for r in rows {
        w.write_record([
            r.k.to_string(),
            format!("{:.16e}", r.monomial_error),
            format!("{:.16e}", r.mass_offdiag),
            r.defect_order
                .map_or_else(|| "NaN".to_string(), |o| format!("{o:.16e}")),
            r.expected_order.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spectrum_ratio_tends_to_inverse_p_minus_one() {
        let pr = ModelParams::new(1.5, 1e-8, 1.0, 0.0).unwrap();
        let rows = spectrum_table(&pr, &TangentVariant::ExN, 1e-3, 1e3, 7).unwrap();
        let last = rows.last().unwrap();
        assert!((last.ratio - 2.0).abs() < 1e-10);
        assert!(rows.iter().all(|r| r.ratio <= 2.0 + 1e-12));
        let pic = spectrum_table(&pr, &TangentVariant::Pic, 1e-3, 1e3, 3).unwrap();
        assert!(pic.iter().all(|r| r.ratio == 1.0));
    }

    #[test]
    fn quadcheck_rows() {
        let rows = quadcheck(2).unwrap();
        assert_eq!(rows.len(), 3);
        assert!(rows.iter().all(|r| r.monomial_error < 1e-14 && r.mass_offdiag < 1e-14));
        let o = rows[1].defect_order.unwrap();
        assert!((3.7..=4.3).contains(&o), "order {o}");
    }
}
