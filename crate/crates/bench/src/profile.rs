//! Dolan-More performance profiles over the work measure.

use std::collections::BTreeMap;
use std::io::Write;

use thiserror::Error;

use crate::records::RunRecord;

#[derive(Debug, Error)]
pub enum ProfileError {
    #[error("no records to profile")]
    Empty,
    #[error("tau grid must be nonempty, finite, >= 1 and increasing")]
    Grid,
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Sampled `pi_s(tau)` for every solver.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileTable {
    pub taus: Vec<f64>,
    pub solvers: Vec<String>,
    /// `values[s][j] = pi_s(taus[j])`.
    pub values: Vec<Vec<f64>>,
    /// Fraction of instances each solver solved, i.e. `pi_s(inf)`.
    pub success: Vec<f64>,
}

/// Ratios `r_{i,s} = W_{i,s} / min_s' W_{i,s'}`, keyed by instance and
/// solver. Failed or missing runs and instances nobody solved get infinity.
pub fn performance_ratios(records: &[RunRecord]) -> (Vec<String>, Vec<String>, Vec<Vec<f64>>) {
    let mut solvers: Vec<String> = records.iter().map(|r| r.solver.clone()).collect();
    solvers.sort();
    solvers.dedup();
    let mut work: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for r in records {
        let row = work
            .entry(r.instance_key())
            .or_insert_with(|| vec![f64::INFINITY; solvers.len()]);
        let s = solvers.iter().position(|x| *x == r.solver).unwrap();
        let w = if r.success && r.work.is_finite() { r.work } else { f64::INFINITY };
        row[s] = row[s].min(w);
    }
    let instances: Vec<String> = work.keys().cloned().collect();
    let ratios = work
        .into_values()
        .map(|row| {
            let best = row.iter().copied().fold(f64::INFINITY, f64::min);
            row.iter()
                .map(|&w| {
                    if !w.is_finite() || !best.is_finite() {
                        f64::INFINITY
                    } else if w == best {
                        // Exact ties, including 0/0, count as minimizers.
                        1.0
                    } else {
                        w / best
                    }
                })
                .collect()
        })
        .collect();
    (instances, solvers, ratios)
}

pub fn dolan_more(records: &[RunRecord], taus: &[f64]) -> Result<ProfileTable, ProfileError> {
    if records.is_empty() {
        return Err(ProfileError::Empty);
    }
    if taus.is_empty()
        || taus.iter().any(|t| !t.is_finite() || *t < 1.0)
        || taus.windows(2).any(|w| w[1] <= w[0])
    {
        return Err(ProfileError::Grid);
    }
    let (instances, solvers, ratios) = performance_ratios(records);
    let n = instances.len() as f64;
    let frac = |s: usize, tau: f64| ratios.iter().filter(|r| r[s] <= tau).count() as f64 / n;
    let values = (0..solvers.len())
        .map(|s| taus.iter().map(|&t| frac(s, t)).collect())
        .collect();
    let success = (0..solvers.len()).map(|s| frac(s, f64::MAX)).collect();
    Ok(ProfileTable {
        taus: taus.to_vec(),
        solvers,
        values,
        success,
    })
}

/// `count` points from 1 to `tau_max`, spaced geometrically.
pub fn log_tau_grid(tau_max: f64, count: usize) -> Vec<f64> {
    assert!(tau_max > 1.0 && count >= 2);
    (0..count)
        .map(|j| tau_max.powf(j as f64 / (count - 1) as f64))
        .collect()
}

/// Columns `tau` and one per solver.
pub fn write_profile<W: Write>(out: W, table: &ProfileTable) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["tau".to_string()];
    header.extend(table.solvers.iter().cloned());
    w.write_record(&header)?;
    for (j, tau) in table.taus.iter().enumerate() {
        let mut row = vec![format!("{tau:.16e}")];
        row.extend(table.values.iter().map(|v| format!("{:.16e}", v[j])));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
