//! Offline and online stages shared by the commands and the acceptance suite.

use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use nalgebra::{DMatrix, DVector};
use nalgebra_sparse::CsrMatrix;
use rayon::prelude::*;

use regrom::fem1d::{
    assemble_fem_system, build_uniform_mesh, burgers_initial_condition, solve_burgers_fom,
};
use regrom::io::{self, SeriesTable};
use regrom::metrics::{
    kinetic_energy_series, l2_error_series, lift_trajectory, relative_reduction,
    time_average_errors,
};
use regrom::operators::{assemble_reduced_operators, project_operators};
use regrom::pod::{energy_fractions, pod_from_snapshots};
use regrom::solvers::project_initial_condition;
use regrom::{
    ConvectionTensor, ErrorSeriesF64, FemSystem1DF64, FemTrajectoryF64, PodBasisF64,
    ReducedConvection, RomOperatorsF64, RomSolver, RomTrajectoryF64, SnapshotSetF64,
};

use crate::config::{ExperimentConfig, InitialCondition, ModelName, Problem};

/// Full-order data the reduced models are built from and measured against.
#[derive(Debug, Clone)]
pub struct Offline {
    pub mass: CsrMatrix<f64>,
    pub stiffness: CsrMatrix<f64>,
    /// Present for the built-in Burgers problem; supplies the convection.
    pub system: Option<FemSystem1DF64>,
    pub snapshots: SnapshotSetF64,
    pub reference: FemTrajectoryF64,
}

impl Offline {
    pub fn initial_state(&self) -> DVector<f64> {
        self.snapshots.matrix.column(0).into_owned()
    }
}

fn burgers_system(n_elements: usize) -> Result<FemSystem1DF64> {
    Ok(assemble_fem_system(build_uniform_mesh(n_elements)?))
}

fn burgers_run(
    cfg: &ExperimentConfig,
    n_elements: usize,
    n_steps: usize,
    dt: f64,
) -> Result<(FemSystem1DF64, FemTrajectoryF64)> {
    let sys = burgers_system(n_elements)?;
    let ic = match cfg.initial_condition {
        InitialCondition::Step => burgers_initial_condition(&sys.mesh),
        InitialCondition::Zero => DVector::zeros(sys.n_dofs()),
    };
    let traj = solve_burgers_fom(&sys, &ic, cfg.nu, dt, n_steps, &cfg.newton)
        .with_context(|| format!("full-order solve with {n_elements} elements"))?;
    Ok((sys, traj))
}

/// Runs the built-in full-order model, and the finer reference when one is
/// configured, interpolated to the snapshot mesh.
pub fn run_fom(cfg: &ExperimentConfig) -> Result<Offline> {
    ensure!(
        cfg.problem == Problem::BurgersBuiltin,
        "the full-order model is only available for burgers_builtin"
    );
    let n_steps = cfg.n_steps.unwrap_or(0);
    let (sys, traj) = burgers_run(cfg, cfg.n_elements, n_steps, cfg.dt)?;
    let reference = match cfg.reference_elements {
        None => traj.clone(),
        Some(fine) => {
            let fine_steps = cfg.reference_steps.unwrap_or(n_steps);
            let fine_dt = cfg.dt * n_steps as f64 / fine_steps.max(1) as f64;
            let (fine_sys, fine_traj) = burgers_run(cfg, fine, fine_steps, fine_dt)?;
            let states = fine_traj
                .states
                .iter()
                .map(|s| fine_sys.mesh.interpolate_to(s, &sys.mesh))
                .collect::<Result<Vec<_>, _>>()?;
            FemTrajectoryF64 {
                times: fine_traj.times,
                states,
                residuals: fine_traj.residuals,
            }
        }
    };
    let snapshots = SnapshotSetF64::from_states(&traj.states, traj.times.clone())
        .context("full-order run produced fewer than two snapshots")?;
    Ok(Offline {
        mass: sys.mass.clone(),
        stiffness: sys.stiffness.clone(),
        system: Some(sys),
        snapshots,
        reference,
    })
}

fn states_of(m: &DMatrix<f64>) -> Vec<DVector<f64>> {
    m.column_iter().map(|c| c.into_owned()).collect()
}

fn uniform_times(n: usize, dt: f64) -> Vec<f64> {
    (0..n).map(|k| k as f64 * dt).collect()
}

fn read_times(path: &Path, expected: usize) -> Result<Vec<f64>> {
    let times: Vec<f64> = io::read_vector(path)?.iter().copied().collect();
    ensure!(
        times.len() == expected,
        "{}: {} times for {} snapshots",
        path.display(),
        times.len(),
        expected
    );
    Ok(times)
}

/// Reads an externally produced snapshot set and its discrete operators.
pub fn load_import(cfg: &ExperimentConfig) -> Result<Offline> {
    let files = &cfg.import;
    let need =
        |p: &Option<PathBuf>, key: &str| p.clone().with_context(|| format!("missing `{key}`"));
    let snaps = io::read_matrix::<f64>(&need(&files.snapshots, "snapshots_file")?)?;
    let mass = io::read_coordinate::<f64>(&need(&files.mass, "mass_file")?)?;
    let stiffness = io::read_coordinate::<f64>(&need(&files.stiffness, "stiffness_file")?)?;
    let n = snaps.nrows();
    ensure!(
        mass.nrows() == n && mass.ncols() == n,
        "mass matrix is {}×{}, snapshots have {n} rows",
        mass.nrows(),
        mass.ncols()
    );
    ensure!(
        stiffness.nrows() == n && stiffness.ncols() == n,
        "stiffness matrix is {}×{}, snapshots have {n} rows",
        stiffness.nrows(),
        stiffness.ncols()
    );
    if let Some(steps) = cfg.n_steps {
        ensure!(
            snaps.ncols() == steps + 1,
            "n_steps = {steps} but the snapshot file has {} columns",
            snaps.ncols()
        );
    }
    let times = match &files.times {
        Some(p) => read_times(p, snaps.ncols())?,
        None => uniform_times(snaps.ncols(), cfg.dt),
    };
    let reference = match &files.reference {
        Some(p) => {
            let r = io::read_matrix::<f64>(p)?;
            ensure!(
                r.nrows() == n,
                "reference has {} rows, snapshots have {n}",
                r.nrows()
            );
            FemTrajectoryF64 {
                times: uniform_times(r.ncols(), cfg.dt),
                states: states_of(&r),
                residuals: vec![0.0; r.ncols()],
            }
        }
        None => FemTrajectoryF64 {
            times: times.clone(),
            states: states_of(&snaps),
            residuals: vec![0.0; snaps.ncols()],
        },
    };
    let snapshots = SnapshotSetF64::new(snaps, times)?;
    Ok(Offline {
        mass,
        stiffness,
        system: None,
        snapshots,
        reference,
    })
}

/// Offline data in memory: runs the full-order model or reads the import.
pub fn build_offline(cfg: &ExperimentConfig) -> Result<Offline> {
    match cfg.problem {
        Problem::BurgersBuiltin => run_fom(cfg),
        Problem::ExternalImport => load_import(cfg),
    }
}

pub fn build_basis(cfg: &ExperimentConfig, offline: &Offline) -> Result<PodBasisF64> {
    Ok(pod_from_snapshots(
        &offline.snapshots,
        &offline.mass,
        cfg.r,
        cfg.center,
    )?)
}

pub fn build_operators(
    cfg: &ExperimentConfig,
    offline: &Offline,
    basis: &PodBasisF64,
) -> Result<RomOperatorsF64> {
    if let Some(sys) = &offline.system {
        return Ok(project_operators(basis, sys, cfg.nu, None)?);
    }
    let r = basis.r();
    let conv = match &cfg.import.tensor {
        None => ReducedConvection::tensor_only(ConvectionTensor::zeros(r)),
        Some(p) => {
            let tensor = io::read_tensor::<f64>(p)?;
            let mut conv = ReducedConvection::tensor_only(tensor);
            if let Some(p) = &cfg.import.conv_center_left {
                conv.center_left = io::read_matrix(p)?;
            }
            if let Some(p) = &cfg.import.conv_center_right {
                conv.center_right = io::read_matrix(p)?;
            }
            if let Some(p) = &cfg.import.conv_center_self {
                conv.center_self = io::read_vector(p)?;
            }
            conv
        }
    };
    Ok(assemble_reduced_operators(
        basis,
        &offline.mass,
        &offline.stiffness,
        cfg.nu,
        None,
        conv,
    )?)
}

/// Everything the online stage needs.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub offline: Offline,
    pub basis: PodBasisF64,
    pub ops: RomOperatorsF64,
    pub c0: DVector<f64>,
}

impl Prepared {
    pub fn new(offline: Offline, basis: PodBasisF64, ops: RomOperatorsF64) -> Result<Self> {
        let c0 = project_initial_condition(&basis, &offline.initial_state(), &offline.mass)?;
        Ok(Self {
            offline,
            basis,
            ops,
            c0,
        })
    }

    /// Whole offline stage in memory.
    pub fn build(cfg: &ExperimentConfig) -> Result<Self> {
        let offline = build_offline(cfg)?;
        let basis = build_basis(cfg, &offline)?;
        let ops = build_operators(cfg, &offline, &basis)?;
        Self::new(offline, basis, ops)
    }

    /// Offline stage from the artifacts of earlier `fom` and `pod` runs.
    pub fn load(cfg: &ExperimentConfig) -> Result<Self> {
        let offline = load_offline(cfg)?;
        let basis = io::read_pod_basis(&cfg.output_dir.join("basis"))
            .context("reading the basis; run `pod` first")?;
        let ops = io::read_rom_operators(&cfg.output_dir.join("operators"))
            .context("reading the operators; run `pod` first")?;
        ensure!(
            basis.dim() == offline.snapshots.dim(),
            "basis dimension {} does not match the snapshots",
            basis.dim()
        );
        Self::new(offline, basis, ops)
    }

    pub fn run(&self, cfg: &ExperimentConfig, model: ModelName) -> Result<RomTrajectoryF64> {
        let kind = cfg.model_kind(model)?;
        let n_steps = self.offline.snapshots.n_snapshots() - 1;
        RomSolver::new(&self.ops, kind)?
            .with_coupling(cfg.coupling)
            .run(cfg.scheme, &self.c0, None, cfg.dt, n_steps, &cfg.newton)
            .with_context(|| format!("{model} online solve"))
    }

    pub fn errors(&self, traj: &RomTrajectoryF64) -> Result<ErrorSeriesF64> {
        Ok(l2_error_series(
            &self.offline.reference,
            traj,
            &self.basis,
            &self.offline.mass,
        )?)
    }

    pub fn mean_error(&self, cfg: &ExperimentConfig, model: ModelName) -> Result<f64> {
        Ok(time_average_errors(&self.errors(&self.run(cfg, model)?)?)?.0)
    }
}

/// Result of running all three models on one basis.
#[derive(Debug, Clone)]
pub struct Comparison {
    pub models: Vec<ModelResult>,
    pub reduction: Vec<Option<f64>>,
    pub reference_energy: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct ModelResult {
    pub model: ModelName,
    pub trajectory: RomTrajectoryF64,
    pub errors: ErrorSeriesF64,
    pub energy: Vec<f64>,
    pub mean_abs: f64,
    pub mean_rel: Option<f64>,
}

impl Comparison {
    pub fn get(&self, model: ModelName) -> &ModelResult {
        self.models
            .iter()
            .find(|m| m.model == model)
            .expect("all models present")
    }
}

pub fn compare_models(cfg: &ExperimentConfig, prep: &Prepared) -> Result<Comparison> {
    let mut models = Vec::new();
    for model in ModelName::ALL {
        let trajectory = prep.run(cfg, model)?;
        let errors = prep.errors(&trajectory)?;
        let energy = kinetic_energy_series(
            &lift_trajectory(&prep.basis, &trajectory)?,
            &prep.offline.mass,
        )?;
        let (mean_abs, mean_rel) = time_average_errors(&errors)?;
        models.push(ModelResult {
            model,
            trajectory,
            errors,
            energy,
            mean_abs,
            mean_rel,
        });
    }
    let reduction = relative_reduction(&models[0].errors, &models[2].errors)?;
    let reference_energy =
        kinetic_energy_series(&prep.offline.reference.states, &prep.offline.mass)?;
    Ok(Comparison {
        models,
        reduction,
        reference_energy,
    })
}

/// One point of a `(δ, μ)` sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub delta: f64,
    pub mu: f64,
    pub grom: f64,
    pub lrom: f64,
    pub adlrom: f64,
}

pub fn sweep_threads() -> Result<usize> {
    match std::env::var("REGROM_THREADS") {
        Err(_) => Ok(1),
        Ok(s) => match s.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => bail!("REGROM_THREADS must be a positive integer, got `{s}`"),
        },
    }
}

pub fn run_sweep(
    cfg: &ExperimentConfig,
    prep: &Prepared,
    threads: usize,
) -> Result<Vec<SweepPoint>> {
    let points = cfg.sweep_points()?;
    let grom = prep.mean_error(cfg, ModelName::Grom)?;
    let eval = |&(delta, mu): &(f64, f64)| -> Result<SweepPoint> {
        let mut point_cfg = cfg.clone();
        point_cfg.delta = Some(delta);
        if !mu.is_nan() {
            point_cfg.mu = Some(mu);
        }
        Ok(SweepPoint {
            delta,
            mu,
            grom,
            lrom: prep.mean_error(&point_cfg, ModelName::Lrom)?,
            adlrom: prep.mean_error(&point_cfg, ModelName::Adlrom)?,
        })
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()?;
    pool.install(|| points.par_iter().map(eval).collect())
}

// File layout under `output_dir`.

fn out(cfg: &ExperimentConfig, name: &str) -> PathBuf {
    cfg.output_dir.join(name)
}

pub fn trajectory_path(cfg: &ExperimentConfig, model: ModelName) -> PathBuf {
    out(cfg, &format!("trajectory_{}.txt", model.label()))
}

/// Reads back what `fom` wrote, or the import files.
pub fn load_offline(cfg: &ExperimentConfig) -> Result<Offline> {
    if cfg.problem == Problem::ExternalImport {
        return load_import(cfg);
    }
    let snaps = io::read_matrix::<f64>(&out(cfg, "snapshots.txt"))
        .context("reading snapshots; run `fom` first")?;
    let times = read_times(&out(cfg, "times.txt"), snaps.ncols())?;
    let sys = burgers_system(cfg.n_elements)?;
    ensure!(
        snaps.nrows() == sys.n_dofs(),
        "snapshots have {} rows, mesh has {} nodes",
        snaps.nrows(),
        sys.n_dofs()
    );
    let reference = if cfg.reference_elements.is_some() {
        let r = io::read_matrix::<f64>(&out(cfg, "reference.txt"))
            .context("reading the reference; run `fom` first")?;
        let rt = read_times(&out(cfg, "reference_times.txt"), r.ncols())?;
        FemTrajectoryF64 {
            times: rt,
            states: states_of(&r),
            residuals: vec![0.0; r.ncols()],
        }
    } else {
        FemTrajectoryF64 {
            times: times.clone(),
            states: states_of(&snaps),
            residuals: vec![0.0; snaps.ncols()],
        }
    };
    Ok(Offline {
        mass: sys.mass.clone(),
        stiffness: sys.stiffness.clone(),
        system: Some(sys),
        snapshots: SnapshotSetF64::new(snaps, times)?,
        reference,
    })
}

fn times_vector(t: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(t)
}

pub fn cmd_fom(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    let offline = run_fom(cfg)?;
    let mut written = vec![
        out(cfg, "snapshots.txt"),
        out(cfg, "times.txt"),
        out(cfg, "mass.mtx"),
        out(cfg, "stiffness.mtx"),
    ];
    io::write_matrix(&written[0], &offline.snapshots.matrix)?;
    io::write_vector(&written[1], &times_vector(&offline.snapshots.times))?;
    io::write_coordinate(&written[2], &offline.mass)?;
    io::write_coordinate(&written[3], &offline.stiffness)?;
    if cfg.reference_elements.is_some() {
        let r = DMatrix::from_columns(&offline.reference.states);
        written.push(out(cfg, "reference.txt"));
        io::write_matrix(&out(cfg, "reference.txt"), &r)?;
        written.push(out(cfg, "reference_times.txt"));
        io::write_vector(
            &out(cfg, "reference_times.txt"),
            &times_vector(&offline.reference.times),
        )?;
    }
    Ok(written)
}

pub fn cmd_pod(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    let offline = load_offline(cfg)?;
    let basis = build_basis(cfg, &offline)?;
    let ops = build_operators(cfg, &offline, &basis)?;
    io::write_pod_basis(&out(cfg, "basis"), &basis)?;
    io::write_rom_operators(&out(cfg, "operators"), &ops)?;
    let mut table = SeriesTable::new();
    table.push_defined("eigenvalue", &basis.eigenvalues)?;
    table.push_defined("energy_fraction", &energy_fractions(&basis)?)?;
    let report = out(cfg, "pod_report.csv");
    io::write_series(&report, &table)?;
    let defect = out(cfg, "orthonormality_defect.txt");
    io::write_vector(
        &defect,
        &DVector::from_element(1, basis.orthonormality_defect(&offline.mass)),
    )?;
    Ok(vec![
        out(cfg, "basis"),
        out(cfg, "operators"),
        report,
        defect,
    ])
}

fn write_trajectory(
    cfg: &ExperimentConfig,
    model: ModelName,
    traj: &RomTrajectoryF64,
) -> Result<Vec<PathBuf>> {
    let path = trajectory_path(cfg, model);
    io::write_matrix(&path, &traj.coeff_matrix())?;
    let mut diag = SeriesTable::new();
    diag.push_defined("time", &traj.times)?;
    diag.push_defined(
        "newton_iterations",
        &traj
            .newton_iters
            .iter()
            .map(|&k| k as f64)
            .collect::<Vec<_>>(),
    )?;
    diag.push_defined("residual", &traj.residuals)?;
    let diag_path = out(cfg, &format!("newton_{}.csv", model.label()));
    io::write_series(&diag_path, &diag)?;
    Ok(vec![path, diag_path])
}

pub fn cmd_rom(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    let prep = Prepared::load(cfg)?;
    let traj = prep.run(cfg, cfg.model)?;
    write_trajectory(cfg, cfg.model, &traj)
}

pub fn format_summary(cmp: &Comparison) -> String {
    let mut s = String::from("model,mean_abs_l2,mean_rel_l2\n");
    for m in &cmp.models {
        let rel = m.mean_rel.map(|v| format!("{v:.16e}")).unwrap_or_default();
        s.push_str(&format!("{},{:.16e},{rel}\n", m.model, m.mean_abs));
    }
    s
}

pub fn cmd_compare(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    let prep = Prepared::load(cfg)?;
    let cmp = compare_models(cfg, &prep)?;
    let mut written = Vec::new();
    let times = &cmp.models[0].errors.times;
    let mut errors = SeriesTable::new();
    errors.push_defined("time", times)?;
    let mut energy = SeriesTable::new();
    energy.push_defined("time", times)?;
    energy.push_defined("reference", &cmp.reference_energy)?;
    for m in &cmp.models {
        written.extend(write_trajectory(cfg, m.model, &m.trajectory)?);
        errors.push_defined(&format!("{}_abs", m.model), &m.errors.abs_l2)?;
        errors.push(&format!("{}_rel", m.model), m.errors.rel_l2.clone())?;
        energy.push_defined(m.model.label(), &m.energy)?;
    }
    errors.push("relative_reduction", cmp.reduction.clone())?;
    for (name, table) in [("errors.csv", &errors), ("energy.csv", &energy)] {
        io::write_series(&out(cfg, name), table)?;
        written.push(out(cfg, name));
    }
    let summary = out(cfg, "summary.csv");
    io::write_atomic(&summary, &format_summary(&cmp))?;
    written.push(summary);
    Ok(written)
}

pub fn format_sweep(points: &[SweepPoint]) -> String {
    let mut s = String::from("delta,mu,grom,lrom,adlrom\n");
    for p in points {
        let mu = if p.mu.is_nan() {
            String::new()
        } else {
            format!("{:.16e}", p.mu)
        };
        s.push_str(&format!(
            "{:.16e},{mu},{:.16e},{:.16e},{:.16e}\n",
            p.delta, p.grom, p.lrom, p.adlrom
        ));
    }
    s
}

pub fn cmd_sweep(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    let threads = sweep_threads()?;
    let prep = Prepared::load(cfg)?;
    let points = run_sweep(cfg, &prep, threads)?;
    let path = out(cfg, "sweep.csv");
    io::write_atomic(&path, &format_sweep(&points))?;
    Ok(vec![path])
}
