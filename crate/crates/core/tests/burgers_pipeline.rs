//! End-to-end offline/online chain on small Burgers problems.

use nalgebra::DVector;
use regrom::fem1d::{
    assemble_fem_system, build_uniform_mesh, burgers_initial_condition, solve_burgers_fom,
};
use regrom::metrics::{l2_error_series, state_error_series, time_average_errors};
use regrom::operators::project_operators;
use regrom::pod::{energy_fractions, pod_from_snapshots};
use regrom::solvers::{project_initial_condition, run_rom};
use regrom::{
    AdConfig, AdMethod, Bdf2Start, FilterConfig, NewtonConfig, RomModelKind, SnapshotSet,
    TimeScheme,
};

fn kinds() -> Vec<RomModelKind<f64>> {
    let filter = FilterConfig { delta: 0.05 };
    vec![
        RomModelKind::Galerkin,
        RomModelKind::Leray(filter),
        RomModelKind::ApproximateDeconvolution(AdConfig {
            method: AdMethod::Lavrentiev { mu: 0.01 },
            filter,
        }),
        RomModelKind::ApproximateDeconvolution(AdConfig {
            method: AdMethod::Tikhonov { mu: 0.01 },
            filter,
        }),
        RomModelKind::ApproximateDeconvolution(AdConfig {
            method: AdMethod::VanCittert { order: 3 },
            filter,
        }),
    ]
}

#[test]
fn rom_errors_dominate_projection_errors() {
    let sys = assemble_fem_system(build_uniform_mesh::<f64>(60).unwrap());
    let ic = burgers_initial_condition(&sys.mesh);
    let newton = NewtonConfig::default();
    let fom = solve_burgers_fom(&sys, &ic, 5e-3, 1.0 / 30.0, 30, &newton).unwrap();
    let snaps = SnapshotSet::from_states(&fom.states, fom.times.clone()).unwrap();
    for center in [false, true] {
        let basis = pod_from_snapshots(&snaps, &sys.mass, 6, center).unwrap();
        assert!(basis.orthonormality_defect(&sys.mass) < 1e-10);
        let fractions = energy_fractions(&basis).unwrap();
        assert!(
            fractions.windows(2).all(|w| w[1] >= w[0]) && *fractions.last().unwrap() <= 1.0 + 1e-14
        );

        let projected: Vec<DVector<f64>> = fom
            .states
            .iter()
            .map(|u| {
                let c = project_initial_condition(&basis, u, &sys.mass).unwrap();
                &basis.centering + &basis.modes * c
            })
            .collect();
        let best = state_error_series(&fom.times, &fom.states, &projected, &sys.mass).unwrap();

        let ops = project_operators(&basis, &sys, 5e-3, None).unwrap();
        let c0 = project_initial_condition(&basis, &ic, &sys.mass).unwrap();
        for kind in kinds() {
            for scheme in [
                TimeScheme::ImplicitEuler,
                TimeScheme::Bdf2(Bdf2Start::FirstStepEuler),
            ] {
                let traj = run_rom(kind, scheme, &ops, &c0, None, 1.0 / 30.0, 30, &newton).unwrap();
                let errs = l2_error_series(&fom, &traj, &basis, &sys.mass).unwrap();
                for (e, b) in errs.abs_l2.iter().zip(&best.abs_l2) {
                    assert!(
                        *e >= b - 1e-12,
                        "{kind:?}: {e} below best approximation {b}"
                    );
                }
                let (mean, _) = time_average_errors(&errs).unwrap();
                assert!(mean.is_finite() && mean < 1.0);
            }
        }
    }
}

#[test]
fn single_precision_chain_tracks_double() {
    let newton64 = NewtonConfig::default();
    let newton32 = NewtonConfig {
        abs_tol: 1e-5f32,
        max_iter: 25,
    };
    let sys64 = assemble_fem_system(build_uniform_mesh::<f64>(30).unwrap());
    let sys32 = assemble_fem_system(build_uniform_mesh::<f32>(30).unwrap());
    let fom64 = solve_burgers_fom(
        &sys64,
        &burgers_initial_condition(&sys64.mesh),
        1e-2,
        0.05,
        10,
        &newton64,
    )
    .unwrap();
    let fom32 = solve_burgers_fom(
        &sys32,
        &burgers_initial_condition(&sys32.mesh),
        1e-2f32,
        0.05,
        10,
        &newton32,
    )
    .unwrap();
    for (a, b) in fom64.states.iter().zip(&fom32.states) {
        for (x, y) in a.iter().zip(b.iter()) {
            assert!((x - *y as f64).abs() < 1e-4);
        }
    }
    let snaps = SnapshotSet::from_states(&fom32.states, fom32.times.clone()).unwrap();
    let basis = pod_from_snapshots(&snaps, &sys32.mass, 4, true).unwrap();
    let ops = project_operators(&basis, &sys32, 1e-2, None).unwrap();
    let c0 = project_initial_condition(&basis, &fom32.states[0], &sys32.mass).unwrap();
    let kind = RomModelKind::Leray(FilterConfig { delta: 0.1f32 });
    let traj = run_rom(
        kind,
        TimeScheme::ImplicitEuler,
        &ops,
        &c0,
        None,
        0.05,
        10,
        &newton32,
    )
    .unwrap();
    assert!(traj.coeffs.iter().all(|c| c.iter().all(|v| v.is_finite())));
}

#[test]
fn runs_are_deterministic() {
    let sys = assemble_fem_system(build_uniform_mesh::<f64>(40).unwrap());
    let ic = burgers_initial_condition(&sys.mesh);
    let newton = NewtonConfig::default();
    let run = || {
        let fom = solve_burgers_fom(&sys, &ic, 1e-3, 0.05, 20, &newton).unwrap();
        let snaps = SnapshotSet::from_states(&fom.states, fom.times.clone()).unwrap();
        let basis = pod_from_snapshots(&snaps, &sys.mass, 5, false).unwrap();
        let ops = project_operators(&basis, &sys, 1e-3, None).unwrap();
        let c0 = project_initial_condition(&basis, &ic, &sys.mass).unwrap();
        run_rom(
            kinds()[2],
            TimeScheme::ImplicitEuler,
            &ops,
            &c0,
            None,
            0.05,
            20,
            &newton,
        )
        .unwrap()
    };
    assert_eq!(run(), run());
}
