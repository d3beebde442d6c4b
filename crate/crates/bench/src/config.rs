//! Experiment manifests: a TOML file with `model`, `discretization`,
//! `solver` and `mg` tables. Every key is optional; missing keys keep the
//! built-in defaults and command-line flags override the file.

use std::path::Path;

use serde::Deserialize;

use pdelta_core::constitutive::{ModelParams, TangentVariant};
use pdelta_core::solver::{CoarseMode, PatchWeighting};

use crate::runner::{Instance, SolverSetup};

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub p: Option<f64>,
    pub delta: Option<f64>,
    pub nu: Option<f64>,
    pub nu_inf: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscretizationSection {
    /// Cells per direction on the finest mesh.
    pub cells: Option<usize>,
    pub coarsest_cells: Option<usize>,
    pub steps: Option<usize>,
    pub t_end: Option<f64>,
    pub degree: Option<usize>,
    pub gamma1: Option<f64>,
    pub gamma2: Option<f64>,
    pub gamma_cip: Option<f64>,
    pub quad_order: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    pub variant: Option<String>,
    pub sigma_max: Option<f64>,
    pub abs_tol: Option<f64>,
    pub rel_tol: Option<f64>,
    pub max_nonlinear: Option<usize>,
    pub picard_tol: Option<f64>,
    pub restart: Option<usize>,
    pub max_krylov: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MgSection {
    pub pre_smooth: Option<usize>,
    pub post_smooth: Option<usize>,
    pub omega: Option<f64>,
    pub surrogate: Option<bool>,
    pub rep_theta: Option<f64>,
    pub rebuild_ratio: Option<f64>,
    pub rebuild_factor: Option<f64>,
    pub coarse: Option<String>,
    pub weighting: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub discretization: DiscretizationSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub mg: MgSection,
}

macro_rules! overlay {
    ($dst:expr, $src:expr, $($f:ident),+) => {
        $( if $src.$f.is_some() { $dst.$f = $src.$f.clone(); } )+
    };
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> anyhow::Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| anyhow::anyhow!("cannot read {}: {e}", path.display()))?;
        Self::from_toml(&text)
    }

    /// Keys set in `other` replace those of `self`.
    pub fn overlay(&mut self, other: &ExperimentConfig) {
        overlay!(self.model, other.model, p, delta, nu, nu_inf);
        overlay!(
            self.discretization,
            other.discretization,
            cells,
            coarsest_cells,
            steps,
            t_end,
            degree,
            gamma1,
            gamma2,
            gamma_cip,
            quad_order
        );
        overlay!(
            self.solver,
            other.solver,
            variant,
            sigma_max,
            abs_tol,
            rel_tol,
            max_nonlinear,
            picard_tol,
            restart,
            max_krylov
        );
        overlay!(
            self.mg,
            other.mg,
            pre_smooth,
            post_smooth,
            omega,
            surrogate,
            rep_theta,
            rebuild_ratio,
            rebuild_factor,
            coarse,
            weighting
        );
    }

    /// Model parameters; unset values default to `p = 1.5`, `delta = 1e-5`,
    /// `nu = 1e-3`, `nu_inf = 0`.
    pub fn params(&self) -> anyhow::Result<ModelParams<f64>> {
        let m = &self.model;
        Ok(ModelParams::new(
            m.p.unwrap_or(1.5),
            m.delta.unwrap_or(1e-5),
            m.nu.unwrap_or(1e-3),
            m.nu_inf.unwrap_or(0.0),
        )?)
    }

    pub fn instance(&self) -> anyhow::Result<Instance> {
        let d = &self.discretization;
        let cells = d.cells.unwrap_or(8);
        Ok(Instance {
            params: self.params()?,
            cells,
            steps: d.steps.unwrap_or(cells),
            t_end: d.t_end.unwrap_or(1.0),
        })
    }

    /// Solver settings; `sigma_max` defaults to `nu`.
    pub fn setup(&self) -> anyhow::Result<SolverSetup> {
        let params = self.params()?;
        let variant = parse_variant(
            self.solver.variant.as_deref().unwrap_or("modn"),
            self.solver.sigma_max.unwrap_or(params.nu),
        )?;
        let mut s = SolverSetup::new(variant);
        let d = &self.discretization;
        overlay_value(&mut s.degree, d.degree);
        overlay_value(&mut s.coarsest_cells, d.coarsest_cells);
        overlay_value(&mut s.disc.gamma1, d.gamma1);
        overlay_value(&mut s.disc.gamma2, d.gamma2);
        overlay_value(&mut s.disc.gamma_cip, d.gamma_cip);
        overlay_value(&mut s.disc.quad_order, d.quad_order);
        let sv = &self.solver;
        overlay_value(&mut s.newton.abs_tol, sv.abs_tol);
        overlay_value(&mut s.newton.rel_tol, sv.rel_tol);
        overlay_value(&mut s.newton.max_nonlinear, sv.max_nonlinear);
        overlay_value(&mut s.newton.picard_tol, sv.picard_tol);
        overlay_value(&mut s.krylov.restart, sv.restart);
        overlay_value(&mut s.krylov.max_iterations, sv.max_krylov);
        let mg = &self.mg;
        overlay_value(&mut s.mg.pre_smooth, mg.pre_smooth);
        overlay_value(&mut s.mg.post_smooth, mg.post_smooth);
        overlay_value(&mut s.mg.omega, mg.omega);
        overlay_value(&mut s.mg.surrogate, mg.surrogate);
        overlay_value(&mut s.mg.rep_theta, mg.rep_theta);
        overlay_value(&mut s.mg.rebuild_ratio, mg.rebuild_ratio);
        overlay_value(&mut s.mg.rebuild_factor, mg.rebuild_factor);
        if let Some(c) = &mg.coarse {
            s.mg.coarse_mode = parse_coarse(c)?;
        }
        if let Some(w) = &mg.weighting {
            s.mg.weighting = parse_weighting(w)?;
        }
        s.mg.validate()?;
        s.newton.validate()?;
        Ok(s)
    }
}

fn overlay_value<T: Copy>(dst: &mut T, src: Option<T>) {
    if let Some(v) = src {
        *dst = v;
    }
}

pub fn parse_variant(name: &str, sigma_max: f64) -> anyhow::Result<TangentVariant<f64>> {
    match name.to_ascii_lowercase().as_str() {
        "pic" | "picard" => Ok(TangentVariant::Pic),
        "exn" | "newton" => Ok(TangentVariant::ExN),
        "modn" => Ok(TangentVariant::ModN { sigma_max }),
        other => anyhow::bail!("unknown solver variant `{other}` (pic, exn, modn)"),
    }
}

pub fn parse_coarse(name: &str) -> anyhow::Result<CoarseMode> {
    match name.to_ascii_lowercase().as_str() {
        "galerkin" => Ok(CoarseMode::Galerkin),
        "rediscretize" => Ok(CoarseMode::Rediscretize),
        other => anyhow::bail!("unknown coarse mode `{other}` (galerkin, rediscretize)"),
    }
}

pub fn parse_weighting(name: &str) -> anyhow::Result<PatchWeighting> {
    match name.to_ascii_lowercase().as_str() {
        "sum" => Ok(PatchWeighting::Sum),
        "average" => Ok(PatchWeighting::Average),
        other => anyhow::bail!("unknown patch weighting `{other}` (sum, average)"),
    }
}
