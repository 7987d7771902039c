//! Error and energy diagnostics of reduced trajectories against full-order
//! references. All norms are the discrete L² norm induced by the mass matrix.

use nalgebra::DVector;
use nalgebra_sparse::CsrMatrix;

use crate::error::{check_dim, RomError, RomResult};
use crate::fem1d::FemTrajectory;
use crate::linalg::energy_norm;
use crate::pod::PodBasis;
use crate::scalar::Real;
use crate::solvers::RomTrajectory;

/// Reference norms below this give an undefined relative error, and
/// Galerkin errors below it give an undefined relative reduction.
pub const UNDEFINED_BELOW: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorSeries<T> {
    pub times: Vec<T>,
    pub abs_l2: Vec<T>,
    /// `None` where the reference norm vanishes.
    pub rel_l2: Vec<Option<T>>,
}

impl<T: Real> ErrorSeries<T> {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// `U + Σ c_j φ_j`.
pub fn lift<T: Real>(basis: &PodBasis<T>, c: &DVector<T>) -> RomResult<DVector<T>> {
    check_dim("coefficients", c.len(), basis.r())?;
    Ok(&basis.centering + &basis.modes * c)
}

pub fn lift_trajectory<T: Real>(
    basis: &PodBasis<T>,
    traj: &RomTrajectory<T>,
) -> RomResult<Vec<DVector<T>>> {
    traj.coeffs.iter().map(|c| lift(basis, c)).collect()
}

fn check_times<T: Real>(a: &[T], b: &[T]) -> RomResult<()> {
    if a.len() != b.len() {
        return Err(RomError::invalid(format!(
            "time grids differ in length: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    for (k, (&s, &t)) in a.iter().zip(b).enumerate() {
        let scale = T::one().max(s.abs()).max(t.abs());
        if (s - t).abs() > T::lit(1e-10) * scale {
            return Err(RomError::invalid(format!(
                "time grids differ at instant {k}: {s} vs {t}"
            )));
        }
    }
    Ok(())
}

/// Errors between two sequences of full-order states on one time grid.
pub fn state_error_series<T: Real>(
    times: &[T],
    reference: &[DVector<T>],
    approx: &[DVector<T>],
    mass: &CsrMatrix<T>,
) -> RomResult<ErrorSeries<T>> {
    check_dim("reference states", reference.len(), times.len())?;
    check_dim("approximate states", approx.len(), times.len())?;
    let mut abs_l2 = Vec::with_capacity(times.len());
    let mut rel_l2 = Vec::with_capacity(times.len());
    for (r, a) in reference.iter().zip(approx) {
        check_dim("state", r.len(), mass.nrows())?;
        check_dim("state", a.len(), mass.nrows())?;
        let err = energy_norm(mass, &(r - a));
        let norm = energy_norm(mass, r);
        abs_l2.push(err);
        rel_l2.push((norm > T::lit(UNDEFINED_BELOW)).then(|| err / norm));
    }
    Ok(ErrorSeries {
        times: times.to_vec(),
        abs_l2,
        rel_l2,
    })
}

pub fn l2_error_series<T: Real>(
    reference: &FemTrajectory<T>,
    rom: &RomTrajectory<T>,
    basis: &PodBasis<T>,
    mass: &CsrMatrix<T>,
) -> RomResult<ErrorSeries<T>> {
    check_times(&reference.times, &rom.times)?;
    let lifted = lift_trajectory(basis, rom)?;
    state_error_series(&reference.times, &reference.states, &lifted, mass)
}

/// `RE(t) = -100 (E_G - E_ADL) / E_G`; `None` where `E_G` vanishes.
pub fn relative_reduction<T: Real>(
    g_err: &ErrorSeries<T>,
    adl_err: &ErrorSeries<T>,
) -> RomResult<Vec<Option<T>>> {
    check_times(&g_err.times, &adl_err.times)?;
    let hundred = T::lit(100.0);
    Ok(g_err
        .abs_l2
        .iter()
        .zip(&adl_err.abs_l2)
        .map(|(&g, &a)| (g >= T::lit(UNDEFINED_BELOW)).then(|| -hundred * (g - a) / g))
        .collect())
}

/// `½ ‖u‖²_M` per state.
pub fn kinetic_energy_series<T: Real>(
    states: &[DVector<T>],
    mass: &CsrMatrix<T>,
) -> RomResult<Vec<T>> {
    states
        .iter()
        .map(|u| {
            check_dim("state", u.len(), mass.nrows())?;
            let n = energy_norm(mass, u);
            Ok(n * n / T::lit(2.0))
        })
        .collect()
}

/// Means of the absolute and relative errors over instants `1..=M`; the
/// initial instant is excluded. Undefined relative entries are skipped and
/// the relative mean is `None` when none remain.
pub fn time_average_errors<T: Real>(series: &ErrorSeries<T>) -> RomResult<(T, Option<T>)> {
    if series.abs_l2.len() < 2 {
        return Err(RomError::invalid(
            "time average needs at least one step after the initial instant",
        ));
    }
    let abs = &series.abs_l2[1..];
    let mean_abs = abs.iter().fold(T::zero(), |s, &e| s + e) / T::from_count(abs.len());
    let rel: Vec<T> = series.rel_l2[1..].iter().flatten().copied().collect();
    let mean_rel = (!rel.is_empty())
        .then(|| rel.iter().fold(T::zero(), |s, &e| s + e) / T::from_count(rel.len()));
    Ok((mean_abs, mean_rel))
}
