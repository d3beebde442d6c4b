use std::fs::File;
use std::io::{self, Write};
use std::path::PathBuf;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};

use pdelta_bench::config::{parse_variant, ExperimentConfig, ModelSection};
use pdelta_bench::profile::{dolan_more, log_tau_grid, write_profile};
use pdelta_bench::records::{read_records, write_records};
use pdelta_bench::reports::{quadcheck, spectrum_table, write_quadcheck, write_spectrum};
use pdelta_bench::runner::{
    convergence_study, sweep, write_convergence, Instance, SweepGrid,
};
use pdelta_core::constitutive::ModelParams;

#[derive(Parser)]
#[command(name = "pdelta-bench", version, about = "Space-time (p,delta)-Navier-Stokes solver laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Manufactured-solution errors and orders under uniform space-time refinement.
    Convergence(ConvergenceArgs),
    /// Runs every solver on a parameter grid and writes run records.
    Sweep(SweepArgs),
    /// Dolan-More profile of the work in a records file.
    Profile(ProfileArgs),
    /// Eigenvalues of a constitutive tangent over a range of |A|.
    TangentSpectrum(SpectrumArgs),
    /// Exactness and defect order of the temporal quadrature.
    Quadcheck(QuadArgs),
}

#[derive(Args, Clone)]
struct ModelArgs {
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    nu: Option<f64>,
    #[arg(long = "nu-inf")]
    nu_inf: Option<f64>,
}

impl ModelArgs {
    fn section(&self) -> ModelSection {
        ModelSection {
            p: self.p,
            delta: self.delta,
            nu: self.nu,
            nu_inf: self.nu_inf,
        }
    }
}

#[derive(Args, Clone)]
struct SolverArgs {
    /// TOML manifest; flags override its entries.
    #[arg(long)]
    config: Option<PathBuf>,
    /// pic, exn or modn.
    #[arg(long)]
    variant: Option<String>,
    #[arg(long = "sigma-max")]
    sigma_max: Option<f64>,
    #[arg(long)]
    omega: Option<f64>,
    /// galerkin or rediscretize.
    #[arg(long)]
    coarse: Option<String>,
    /// sum or average.
    #[arg(long)]
    weighting: Option<String>,
    #[arg(long = "coarsest-cells")]
    coarsest_cells: Option<usize>,
    #[arg(long)]
    degree: Option<usize>,
}

impl SolverArgs {
    fn load(&self, model: &ModelArgs) -> anyhow::Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        let mut cli = ExperimentConfig {
            model: model.section(),
            ..Default::default()
        };
        cli.solver.variant = self.variant.clone();
        cli.solver.sigma_max = self.sigma_max;
        cli.mg.omega = self.omega;
        cli.mg.coarse = self.coarse.clone();
        cli.mg.weighting = self.weighting.clone();
        cli.discretization.coarsest_cells = self.coarsest_cells;
        cli.discretization.degree = self.degree;
        cfg.overlay(&cli);
        Ok(cfg)
    }
}

#[derive(Args)]
struct ConvergenceArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    solver: SolverArgs,
    /// Number of refinement levels.
    #[arg(long, default_value_t = 4)]
    levels: usize,
    /// Cells per direction on the first level.
    #[arg(long = "start-cells", default_value_t = 4)]
    start_cells: usize,
    /// Time steps per cell in one direction.
    #[arg(long = "steps-per-cell", default_value_t = 1)]
    steps_per_cell: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    solver: SolverArgs,
    /// Use the full parameter grid instead of the desk-scale one.
    #[arg(long)]
    full: bool,
    #[arg(long, value_delimiter = ',')]
    p: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    delta: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    nu: Option<Vec<f64>>,
    #[arg(long = "nu-inf", value_delimiter = ',')]
    nu_inf: Option<Vec<f64>>,
    /// Cells per direction.
    #[arg(long, value_delimiter = ',')]
    cells: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',', default_value = "pic,exn,modn")]
    solvers: Vec<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ProfileArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long = "tau-max", default_value_t = 16.0)]
    tau_max: f64,
    #[arg(long, default_value_t = 61)]
    points: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SpectrumArgs {
    #[arg(long, default_value_t = 1.5)]
    p: f64,
    #[arg(long, default_value_t = 1e-5)]
    delta: f64,
    #[arg(long, default_value_t = 1e-3)]
    nu: f64,
    #[arg(long = "nu-inf", default_value_t = 0.0)]
    nu_inf: f64,
    #[arg(long, default_value = "exn")]
    variant: String,
    /// Clip bound for modn; defaults to nu.
    #[arg(long = "sigma-max")]
    sigma_max: Option<f64>,
    #[arg(long = "a-min", default_value_t = 1e-6)]
    a_min: f64,
    #[arg(long = "a-max", default_value_t = 1e6)]
    a_max: f64,
    #[arg(long, default_value_t = 49)]
    points: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct QuadArgs {
    #[arg(long = "k-max", default_value_t = 4)]
    k_max: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn sink(path: &Option<PathBuf>) -> anyhow::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(File::create(p).with_context(|| format!("cannot create {}", p.display()))?),
        None => Box::new(io::stdout()),
    })
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Convergence(a) => {
            let cfg = a.solver.load(&a.model)?;
            let inst = cfg.instance()?;
            let setup = cfg.setup()?;
            anyhow::ensure!(a.levels >= 1 && a.start_cells >= 1, "need at least one level");
            let levels: Vec<usize> = (0..a.levels).map(|j| a.start_cells << j).collect();
            let rows = convergence_study(&inst, &setup, &levels, a.steps_per_cell.max(1))?;
            write_convergence(sink(&a.out)?, &rows)?;
        }
        Command::Sweep(a) => {
            let mut grid = if a.full { SweepGrid::full() } else { SweepGrid::desk() };
            if let Some(v) = a.p {
                grid.p = v;
            }
            if let Some(v) = a.delta {
                grid.delta = v;
            }
            if let Some(v) = a.nu {
                grid.nu = v;
            }
            if let Some(v) = a.nu_inf {
                grid.nu_inf = v;
            }
            if let Some(v) = a.cells {
                grid.cells = v;
            }
            let base = a.solver.load(&ModelArgs {
                p: None,
                delta: None,
                nu: None,
                nu_inf: None,
            })?;
            let instances = grid.instances()?;
            let setup_for = |inst: &Instance, solver: &str| {
                let mut cfg = base.clone();
                cfg.model = ModelSection {
                    p: Some(inst.params.p),
                    delta: Some(inst.params.delta),
                    nu: Some(inst.params.nu),
                    nu_inf: Some(inst.params.nu_inf),
                };
                cfg.solver.variant = Some(solver.to_string());
                cfg.setup()
            };
            let records = sweep(&instances, &a.solvers, &setup_for)?;
            write_records(sink(&a.out)?, &records)?;
        }
        Command::Profile(a) => {
            let file = File::open(&a.input).with_context(|| format!("cannot open {}", a.input.display()))?;
            let records = read_records(file)?;
            let table = dolan_more(&records, &log_tau_grid(a.tau_max, a.points.max(2)))?;
            write_profile(sink(&a.out)?, &table)?;
        }
        Command::TangentSpectrum(a) => {
            let params = ModelParams::new(a.p, a.delta, a.nu, a.nu_inf)?;
            let variant = parse_variant(&a.variant, a.sigma_max.unwrap_or(a.nu))?;
            let rows = spectrum_table(&params, &variant, a.a_min, a.a_max, a.points)?;
            write_spectrum(sink(&a.out)?, &rows)?;
        }
        Command::Quadcheck(a) => {
            write_quadcheck(sink(&a.out)?, &quadcheck(a.k_max)?)?;
        }
    }
    Ok(())
}

fn main() {
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
