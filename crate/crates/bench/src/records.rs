//! Flat CSV records of benchmark runs.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use pdelta_core::solver::SlabStats;

use crate::metrics::ErrorNorms;
use crate::runner::Instance;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub p: f64,
    pub delta: f64,
    pub nu: f64,
    pub nu_inf: f64,
    pub cells: usize,
    pub steps: usize,
    pub solver: String,
    pub success: bool,
    #[serde(rename = "W")]
    pub work: f64,
    #[serde(rename = "mean_nNL")]
    pub mean_nnl: f64,
    #[serde(rename = "max_nNL")]
    pub max_nnl: f64,
    #[serde(rename = "mean_nL")]
    pub mean_nl: f64,
    #[serde(rename = "max_nL")]
    pub max_nl: f64,
    pub e_phi: f64,
    pub e_div: f64,
    pub wall_s: f64,
}

impl RunRecord {
    /// A failed record for `inst`; `fill` turns it into a success.
    pub fn empty(inst: &Instance, solver: &str) -> Self {
        Self {
            p: inst.params.p,
            delta: inst.params.delta,
            nu: inst.params.nu,
            nu_inf: inst.params.nu_inf,
            cells: inst.cells * inst.cells,
            steps: inst.steps,
            solver: solver.to_string(),
            success: false,
            work: f64::INFINITY,
            mean_nnl: f64::NAN,
            max_nnl: f64::NAN,
            mean_nl: f64::NAN,
            max_nl: f64::NAN,
            e_phi: f64::NAN,
            e_div: f64::NAN,
            wall_s: 0.0,
        }
    }

    pub fn fill(&mut self, stats: &[SlabStats], work: f64, errors: ErrorNorms) {
        let nnl: Vec<usize> = stats.iter().map(|s| s.nonlinear_iterations()).collect();
        let nl: Vec<usize> = stats
            .iter()
            .flat_map(|s| s.steps.iter().map(|st| st.linear_iterations))
            .collect();
        self.success = true;
        self.work = work;
        self.mean_nnl = mean(&nnl);
        self.max_nnl = nnl.iter().copied().max().unwrap_or(0) as f64;
        self.mean_nl = mean(&nl);
        self.max_nl = nl.iter().copied().max().unwrap_or(0) as f64;
        self.e_phi = errors.e_phi;
        self.e_div = errors.e_div;
    }

    /// Instance key shared by all solvers on the same problem.
    pub fn instance_key(&self) -> String {
        format!(
            "{:e}|{:e}|{:e}|{:e}|{}|{}",
            self.p, self.delta, self.nu, self.nu_inf, self.cells, self.steps
        )
    }
}

fn mean(v: &[usize]) -> f64 {
    if v.is_empty() {
        f64::NAN
    } else {
        v.iter().sum::<usize>() as f64 / v.len() as f64
    }
}

pub const RECORD_HEADER: [&str; 16] = [
    "p", "delta", "nu", "nu_inf", "cells", "steps", "solver", "success", "W", "mean_nNL",
    "max_nNL", "mean_nL", "max_nL", "e_phi", "e_div", "wall_s",
];

fn sci(x: f64) -> String {
    format!("{x:.16e}")
}

/// Writes records with every float in full-precision scientific notation.
pub fn write_records<W: Write>(out: W, records: &[RunRecord]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RECORD_HEADER)?;
    for r in records {
        w.write_record([
            sci(r.p),
            sci(r.delta),
            sci(r.nu),
            sci(r.nu_inf),
            r.cells.to_string(),
            r.steps.to_string(),
            r.solver.clone(),
            r.success.to_string(),
            sci(r.work),
            sci(r.mean_nnl),
            sci(r.max_nnl),
            sci(r.mean_nl),
            sci(r.max_nl),
            sci(r.e_phi),
            sci(r.e_div),
            sci(r.wall_s),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_records<R: Read>(input: R) -> csv::Result<Vec<RunRecord>> {
    let mut r = csv::Reader::from_reader(input);
    r.deserialize().collect()
}
