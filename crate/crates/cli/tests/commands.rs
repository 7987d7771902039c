//! Drives the `regrom` binary through its verbs on small problems.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use regrom::io;
use tempfile::TempDir;

const SMALL: &str = "\
# small Burgers run
n_elements = 40
nu = 1e-2
dt = 0.05
n_steps = 20
r = 4
delta = 0.1
mu = 0.01
";

fn regrom(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_regrom"))
        .args(args)
        .env_remove("REGROM_THREADS")
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn setup(extra: &str) -> (TempDir, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, format!("{SMALL}{extra}")).unwrap();
    (dir, cfg)
}

fn ok(o: &Output) {
    assert!(
        o.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&o.stderr)
    );
}

fn run_all(dir: &Path, verbs: &[&str]) {
    for verb in verbs {
        ok(&regrom(dir, &[verb, "--config", "run.cfg"]));
    }
}

#[test]
fn offline_and_online_verbs() {
    let (dir, _) = setup("");
    let d = dir.path();
    run_all(d, &["fom", "pod"]);
    let snaps = io::read_matrix::<f64>(&d.join("output/snapshots.txt")).unwrap();
    assert_eq!(snaps.shape(), (41, 21));
    let basis = io::read_pod_basis::<f64>(&d.join("output/basis")).unwrap();
    assert_eq!(basis.r(), 4);
    let defect = io::read_vector::<f64>(&d.join("output/orthonormality_defect.txt")).unwrap();
    assert!(defect[0] < 1e-10);

    for model in ["grom", "lrom", "adlrom"] {
        ok(&regrom(
            d,
            &["rom", "--config", "run.cfg", "--model", model],
        ));
        let traj =
            io::read_matrix::<f64>(&d.join(format!("output/trajectory_{model}.txt"))).unwrap();
        assert_eq!(traj.shape(), (21, 4));
    }

    // L-ROM at δ = 0 reproduces G-ROM.
    let g = io::read_matrix::<f64>(&d.join("output/trajectory_grom.txt")).unwrap();
    ok(&regrom(
        d,
        &[
            "rom", "--config", "run.cfg", "--model", "lrom", "--delta", "0",
        ],
    ));
    let l = io::read_matrix::<f64>(&d.join("output/trajectory_lrom.txt")).unwrap();
    assert!((g - l).amax() < 1e-10);

    ok(&regrom(d, &["compare", "--config", "run.cfg"]));
    let summary = fs::read_to_string(d.join("output/summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 4);
    assert!(summary.starts_with("model,mean_abs_l2,mean_rel_l2\ngrom,"));
    let errors = io::read_series::<f64>(&d.join("output/errors.csv")).unwrap();
    assert_eq!(errors.n_rows(), 21);
    assert_eq!(
        errors.headers.last().map(String::as_str),
        Some("relative_reduction")
    );
    let energy = io::read_series::<f64>(&d.join("output/energy.csv")).unwrap();
    assert_eq!(
        energy.headers,
        ["time", "reference", "grom", "lrom", "adlrom"]
    );

    // Reproducible summaries.
    ok(&regrom(d, &["compare", "--config", "run.cfg"]));
    assert_eq!(
        fs::read_to_string(d.join("output/summary.csv")).unwrap(),
        summary
    );

    // A single-point sweep matches the comparison.
    ok(&regrom(d, &["sweep", "--config", "run.cfg"]));
    let sweep = io::read_series::<f64>(&d.join("output/sweep.csv")).unwrap();
    assert_eq!(sweep.n_rows(), 1);
    let means: Vec<f64> = summary
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    for (k, name) in ["grom", "lrom", "adlrom"].iter().enumerate() {
        assert_eq!(sweep.column(name).unwrap()[0], Some(means[k]));
    }
}

#[test]
fn sweep_is_independent_of_thread_count() {
    let (dir, _) = setup("sweep_delta = 0.05, 0.1, 0.2\nsweep_mu = 0.001, 0.01\n");
    let d = dir.path();
    run_all(d, &["fom", "pod", "sweep"]);
    let serial = fs::read_to_string(d.join("output/sweep.csv")).unwrap();
    assert_eq!(serial.lines().count(), 7);
    let o = Command::new(env!("CARGO_BIN_EXE_regrom"))
        .args(["sweep", "--config", "run.cfg"])
        .env("REGROM_THREADS", "3")
        .current_dir(d)
        .output()
        .unwrap();
    ok(&o);
    assert_eq!(
        fs::read_to_string(d.join("output/sweep.csv")).unwrap(),
        serial
    );
}

#[test]
fn failures_exit_nonzero_without_summary() {
    let (dir, _) = setup("");
    let d = dir.path();
    run_all(d, &["fom"]);
    let o = regrom(d, &["pod", "--config", "run.cfg", "--r", "30"]);
    assert!(!o.status.success());
    let msg = String::from_utf8_lossy(&o.stderr);
    assert!(msg.contains("numerical rank"), "{msg}");

    // Newton cannot converge in one iteration with this tolerance.
    let (dir, _) = setup("newton_tol = 1e-300\nnewton_max_iter = 1\n");
    let d = dir.path();
    let o = regrom(d, &["fom", "--config", "run.cfg"]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("Newton failed"));

    let (dir, _) = setup("");
    let d = dir.path();
    run_all(d, &["fom", "pod"]);
    let o = Command::new(env!("CARGO_BIN_EXE_regrom"))
        .args(["sweep", "--config", "run.cfg"])
        .env("REGROM_THREADS", "zero")
        .current_dir(d)
        .output()
        .unwrap();
    assert!(!o.status.success());
    assert!(!d.join("output/sweep.csv").exists());
}

#[test]
fn config_errors_are_reported() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(
        d.join("run.cfg"),
        "n_elements = 10\ndt = 0.1\nn_steps = 2\nr = 2\n",
    )
    .unwrap();
    let o = regrom(d, &["fom", "--config", "run.cfg"]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("`nu`"));

    fs::write(
        d.join("run.cfg"),
        "n_elements = -3\nnu = 1\ndt = 0.1\nn_steps = 2\nr = 2\n",
    )
    .unwrap();
    let o = regrom(d, &["fom", "--config", "run.cfg"]);
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 1"));

    let (dir, _) = setup("sweep_delta =\n");
    let o = regrom(dir.path(), &["sweep", "--config", "run.cfg"]);
    assert!(!o.status.success());
}

#[test]
fn zero_initial_condition_and_identical_snapshots() {
    let (dir, _) = setup("initial_condition = zero\n");
    let d = dir.path();
    run_all(d, &["fom"]);
    let snaps = io::read_matrix::<f64>(&d.join("output/snapshots.txt")).unwrap();
    assert_eq!(snaps.amax(), 0.0);
    let o = regrom(d, &["pod", "--config", "run.cfg"]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("numerical rank 0"));
}

#[test]
fn external_import_without_fem() {
    // Export a Burgers run, then reuse it through the import path.
    let (dir, _) = setup("");
    let d = dir.path();
    run_all(d, &["fom", "pod", "compare"]);
    let import = d.join("import");
    fs::create_dir(&import).unwrap();
    for f in ["snapshots.txt", "mass.mtx", "stiffness.mtx"] {
        fs::copy(d.join("output").join(f), import.join(f)).unwrap();
    }
    fs::copy(
        d.join("output/operators/tensor.txt"),
        import.join("tensor.txt"),
    )
    .unwrap();
    fs::write(
        import.join("run.cfg"),
        "problem = external_import\nnu = 1e-2\ndt = 0.05\nr = 4\ndelta = 0.1\nmu = 0.01\n\
         snapshots_file = snapshots.txt\nmass_file = mass.mtx\nstiffness_file = stiffness.mtx\ntensor_file = tensor.txt\n",
    )
    .unwrap();
    run_all(&import, &["pod", "compare"]);
    for model in ["grom", "lrom", "adlrom"] {
        let a = io::read_matrix::<f64>(&d.join(format!("output/trajectory_{model}.txt"))).unwrap();
        let b =
            io::read_matrix::<f64>(&import.join(format!("output/trajectory_{model}.txt"))).unwrap();
        assert!((a - b).amax() <= 1e-12);
    }
    assert_eq!(
        fs::read_to_string(d.join("output/summary.csv")).unwrap(),
        fs::read_to_string(import.join("output/summary.csv")).unwrap()
    );

    // Identical snapshot columns carry no fluctuation energy.
    let same = import.join("same.txt");
    let snaps = io::read_matrix::<f64>(&import.join("snapshots.txt")).unwrap();
    let col = snaps.column(5).into_owned();
    let rep = nalgebra::DMatrix::from_columns(&vec![col; snaps.ncols()]);
    io::write_matrix(&same, &rep).unwrap();
    let cfg = fs::read_to_string(import.join("run.cfg"))
        .unwrap()
        .replace("snapshots.txt", "same.txt")
        .replace("tensor_file = tensor.txt\n", "");
    fs::write(import.join("run.cfg"), format!("{cfg}center = true\n")).unwrap();
    let o = regrom(&import, &["pod", "--config", "run.cfg"]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("rank"));
}
