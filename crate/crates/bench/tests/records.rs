use std::io::Write;

use pdelta_bench::config::ExperimentConfig;
use pdelta_bench::metrics::work_from_counts;
use pdelta_bench::profile::dolan_more;
use pdelta_bench::records::{read_records, write_records, RunRecord, RECORD_HEADER};
use pdelta_bench::runner::{run_instance, Instance, SolverSetup};
use pdelta_core::constitutive::{ModelParams, TangentVariant};

fn same(a: f64, b: f64) -> bool {
    a == b || (a.is_nan() && b.is_nan())
}

#[test]
fn records_round_trip_and_work_is_recomputable() {
    let inst = Instance::new(ModelParams::new(1.5, 1e-5, 1e-2, 0.0).unwrap(), 4);
    let mut setup = SolverSetup::new(TangentVariant::ModN { sigma_max: 1e-2 });
    setup.coarsest_cells = 2;
    let out = run_instance(&inst, &setup).unwrap();
    assert!(out.failure.is_none(), "{:?}", out.failure);
    let traj = out.trajectory.unwrap();
    let counts: Vec<usize> = traj
        .stats
        .iter()
        .flat_map(|s| s.steps.iter().map(|st| st.linear_iterations))
        .collect();
    // Two temporal nodes, each with 2 * 81 velocity and 3 * 16 pressure dofs.
    let slab_dofs = 2 * (2 * 81 + 48);
    assert_eq!(out.record.work, work_from_counts(&counts, slab_dofs));
    assert_eq!(out.record.cells, 16);
    assert_eq!(out.record.steps, 4);
    assert!(out.record.success);
    assert!(out.record.e_phi > 0.0 && out.record.e_div > 0.0);

    let failed = RunRecord::empty(&inst, "pic");
    let mut buf = Vec::new();
    write_records(&mut buf, &[out.record.clone(), failed.clone()]).unwrap();
    let text = String::from_utf8(buf.clone()).unwrap();
    assert_eq!(text.lines().next().unwrap(), RECORD_HEADER.join(","));
    let back = read_records(buf.as_slice()).unwrap();
    assert_eq!(back[0], out.record);
    assert_eq!(back[1].solver, "pic");
    assert!(!back[1].success && back[1].work.is_infinite());
    assert!(same(back[1].mean_nl, failed.mean_nl));
}

#[test]
fn profile_from_handwritten_records() {
    let header = RECORD_HEADER.join(",");
    let row = |cells: usize, solver: &str, ok: bool, w: &str| {
        format!("1.5,1e-5,1e-3,0,{cells},4,{solver},{ok},{w},3,4,10,12,0.1,0.01,1.0")
    };
    let text = [
        header,
        row(16, "exn", true, "100"),
        row(16, "modn", true, "150"),
        row(16, "pic", true, "400"),
        row(64, "exn", false, "inf"),
        row(64, "modn", true, "200"),
        row(64, "pic", true, "300"),
    ]
    .join("\n");
    let recs = read_records(text.as_bytes()).unwrap();
    let t = dolan_more(&recs, &[1.0, 1.5, 2.0, 4.0]).unwrap();
    assert_eq!(t.solvers, vec!["exn", "modn", "pic"]);
    assert_eq!(t.values[0], vec![0.5, 0.5, 0.5, 0.5]);
    assert_eq!(t.values[1], vec![0.5, 1.0, 1.0, 1.0]);
    assert_eq!(t.values[2], vec![0.0, 0.5, 0.5, 1.0]);
    assert_eq!(t.success, vec![0.5, 1.0, 1.0]);
}

#[test]
fn config_file_round_trip() {
    let mut f = tempfile::NamedTempFile::new().unwrap();
    writeln!(
        f,
        "[model]\np = 1.25\ndelta = 1e-10\n[discretization]\ncells = 8\nsteps = 3\ncoarsest_cells = 2\n[solver]\nvariant = \"pic\"\nmax_krylov = 77\n[mg]\nweighting = \"sum\"\nsurrogate = false\n"
    )
    .unwrap();
    let cfg = ExperimentConfig::load(f.path()).unwrap();
    let inst = cfg.instance().unwrap();
    assert_eq!((inst.cells, inst.steps), (8, 3));
    assert_eq!(inst.params.p, 1.25);
    assert_eq!(inst.params.nu, 1e-3);
    let s = cfg.setup().unwrap();
    assert_eq!(s.newton.variant, TangentVariant::Pic);
    assert_eq!(s.krylov.max_iterations, 77);
    assert_eq!(s.coarsest_cells, 2);
    assert!(!s.mg.surrogate);
    assert!(ExperimentConfig::load(std::path::Path::new("/nonexistent/x.toml")).is_err());
}
