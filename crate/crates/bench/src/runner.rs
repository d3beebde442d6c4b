//! Runs one benchmark instance of the manufactured problem end to end.

use std::time::Instant;

use pdelta_core::constitutive::{ModelParams, TangentVariant};
use pdelta_core::forms::{Discretization, DiscretizationConfig};
use pdelta_core::mesh::MeshHierarchy;
use pdelta_core::slab::Trajectory;
use pdelta_core::solver::{solve_trajectory, KrylovConfig, MgConfig, Multigrid, NewtonConfig, SlabStats};
use pdelta_core::timebasis::{gauss_radau, temporal_matrices, TimePartition};

use crate::manufactured::ManufacturedCase;
use crate::metrics::{eoc, error_norms, work, ErrorNorms};
use crate::records::RunRecord;

/// Model parameters, cells per direction and time steps on `[0, t_end]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Instance {
    pub params: ModelParams<f64>,
    pub cells: usize,
    pub steps: usize,
    pub t_end: f64,
}

impl Instance {
    pub fn new(params: ModelParams<f64>, cells: usize) -> Self {
        Self {
            params,
            cells,
            steps: cells,
            t_end: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverSetup {
    pub degree: usize,
    pub coarsest_cells: usize,
    pub newton: NewtonConfig,
    pub krylov: KrylovConfig,
    pub mg: MgConfig,
    pub disc: DiscretizationConfig,
}

impl SolverSetup {
    pub fn new(variant: TangentVariant<f64>) -> Self {
        Self {
            degree: 1,
            coarsest_cells: 4,
            newton: NewtonConfig::new(variant),
            krylov: KrylovConfig::default(),
            mg: MgConfig::default(),
            disc: DiscretizationConfig::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub record: RunRecord,
    pub errors: Option<ErrorNorms>,
    pub trajectory: Option<Trajectory<SlabStats>>,
    pub failure: Option<String>,
}

/// Solves the manufactured problem for one instance and solver.
pub fn run_instance(inst: &Instance, setup: &SolverSetup) -> anyhow::Result<RunOutcome> {
    let start = Instant::now();
    let case = ManufacturedCase::new(inst.params);
    let hierarchy = MeshHierarchy::unit_square(setup.coarsest_cells, inst.cells)?;
    let disc = Discretization::new(hierarchy.finest(), setup.disc);
    let basis = gauss_radau::<f64>(setup.degree)?;
    let tmat = temporal_matrices(&basis);
    let partition = TimePartition::uniform(0.0, inst.t_end, inst.steps)?;
    let mut mg = Multigrid::new(&hierarchy, setup.disc, setup.mg)?;
    let v0 = disc.vel.interpolate(|x| {
        use pdelta_core::forms::ProblemData;
        case.initial_velocity(x)
    });
    let slab_dofs = basis.num_nodes() * disc.num_dofs();
    let result = solve_trajectory(
        &disc,
        &basis,
        &tmat,
        &partition,
        &case,
        inst.params,
        &v0,
        &setup.newton,
        &setup.krylov,
        &mut mg,
    );
    let mut record = RunRecord::empty(inst, setup.newton.variant.label());
    match result {
        Ok(traj) => {
            let errs = error_norms(&disc, &basis, &partition, &traj.slabs, &case);
            record.fill(&traj.stats, work(&traj.stats, slab_dofs), errs);
            record.wall_s = start.elapsed().as_secs_f64();
            Ok(RunOutcome {
                record,
                errors: Some(errs),
                trajectory: Some(traj),
                failure: None,
            })
        }
        Err(e) => {
            record.wall_s = start.elapsed().as_secs_f64();
            Ok(RunOutcome {
                record,
                errors: None,
                trajectory: None,
                failure: Some(e.to_string()),
            })
        }
    }
}

/// One level of a convergence study.
#[derive(Debug, Clone)]
pub struct ConvergenceRow {
    pub h: f64,
    pub e_phi: f64,
    pub eoc_phi: Option<f64>,
    pub e_div: f64,
    pub eoc_div: Option<f64>,
    pub record: RunRecord,
}

/// Runs `inst` on `cells` per direction for each entry of `levels`, with
/// `steps = steps_per_cell * cells` time steps. Stops at the first failure.
pub fn convergence_study(
    base: &Instance,
    setup: &SolverSetup,
    levels: &[usize],
    steps_per_cell: usize,
) -> anyhow::Result<Vec<ConvergenceRow>> {
    let mut rows: Vec<ConvergenceRow> = Vec::new();
    for &cells in levels {
        let inst = Instance {
            cells,
            steps: steps_per_cell * cells,
            ..*base
        };
        let out = run_instance(&inst, setup)?;
        let Some(errs) = out.errors else {
            anyhow::bail!(
                "level with {cells} cells per direction failed: {}",
                out.failure.unwrap_or_default()
            );
        };
        rows.push(ConvergenceRow {
            h: 1.0 / cells as f64,
            e_phi: errs.e_phi,
            eoc_phi: None,
            e_div: errs.e_div,
            eoc_div: None,
            record: out.record,
        });
    }
    let phi = eoc(&rows.iter().map(|r| r.e_phi).collect::<Vec<_>>());
    let div = eoc(&rows.iter().map(|r| r.e_div).collect::<Vec<_>>());
    for (i, row) in rows.iter_mut().enumerate().skip(1) {
        row.eoc_phi = phi[i - 1];
        row.eoc_div = div[i - 1];
    }
    Ok(rows)
}

pub fn write_convergence<W: std::io::Write>(out: W, rows: &[ConvergenceRow]) -> csv::Result<()> {
    let f = |x: Option<f64>| x.map_or_else(|| "NaN".to_string(), |v| format!("{v:.16e}"));
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["h", "e_phi", "eoc_phi", "e_div", "eoc_div"])?;
    for r in rows {
        w.write_record([
            format!("{:.16e}", r.h),
            format!("{:.16e}", r.e_phi),
            f(r.eoc_phi),
            format!("{:.16e}", r.e_div),
            f(r.eoc_div),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Parameter values of a sweep; instances are the Cartesian product.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepGrid {
    pub p: Vec<f64>,
    pub delta: Vec<f64>,
    pub nu: Vec<f64>,
    pub nu_inf: Vec<f64>,
    /// Cells per direction.
    pub cells: Vec<usize>,
}

impl SweepGrid {
    /// 16 to 1024 cells, two values per parameter.
    pub fn desk() -> Self {
        Self {
            p: vec![1.25, 1.5],
            delta: vec![1e-5, 1e-10],
            nu: vec![1e-2, 1e-3],
            nu_inf: vec![0.0, 1e-5],
            cells: vec![4, 8, 16, 32],
        }
    }

    /// The full parameter grid of the benchmark study, on desk-scale meshes.
    pub fn full() -> Self {
        Self {
            p: vec![1.16, 1.2, 1.25, 1.33, 1.5, 1.66],
            delta: vec![1e-5, 1e-10, 1e-15, 1e-20],
            nu: vec![1e-1, 1e-2, 1e-3],
            nu_inf: vec![1e-5, 0.0],
            cells: vec![4, 8, 16, 32],
        }
    }

    pub fn instances(&self) -> anyhow::Result<Vec<Instance>> {
        let mut out = Vec::new();
        for &p in &self.p {
            for &delta in &self.delta {
                for &nu in &self.nu {
                    for &nu_inf in &self.nu_inf {
                        for &cells in &self.cells {
                            let params = ModelParams::new(p, delta, nu, nu_inf)?;
                            out.push(Instance::new(params, cells));
                        }
                    }
                }
            }
        }
        Ok(out)
    }
}

/// Builds the solver settings for an instance and a solver name.
pub type SetupFor<'a> = dyn Fn(&Instance, &str) -> anyhow::Result<SolverSetup> + Sync + 'a;

/// Runs every instance with every solver. Instances run concurrently and
/// records come back in a deterministic order.
pub fn sweep(
    instances: &[Instance],
    solvers: &[String],
    setup_for: &SetupFor<'_>,
) -> anyhow::Result<Vec<RunRecord>> {
    use rayon::prelude::*;
    let jobs: Vec<(&Instance, &String)> = instances
        .iter()
        .flat_map(|i| solvers.iter().map(move |s| (i, s)))
        .collect();
    jobs.par_iter()
        .map(|(inst, solver)| {
            let setup = setup_for(inst, solver)?;
            Ok(run_instance(inst, &setup)?.record)
        })
        .collect()
}
