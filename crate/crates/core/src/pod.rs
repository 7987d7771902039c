//! Snapshot centering and POD by the method of snapshots, orthonormal in the
//! inner product induced by the full-order mass matrix.

use nalgebra::{DMatrix, DVector};
use nalgebra_sparse::CsrMatrix;

use crate::error::{check_dim, RomError, RomResult};
use crate::linalg::{sparse_bilinear, spmm, spmv};
use crate::scalar::Real;

/// Eigenvalues below this fraction of the largest count as zero.
pub const RANK_TOLERANCE: f64 = 1e-13;

/// Snapshot columns with their time instants.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotSet<T: Real> {
    pub matrix: DMatrix<T>,
    pub times: Vec<T>,
}

impl<T: Real> SnapshotSet<T> {
    pub fn new(matrix: DMatrix<T>, times: Vec<T>) -> RomResult<Self> {
        if matrix.ncols() != times.len() {
            return Err(RomError::invalid(format!(
                "{} snapshot columns but {} time instants",
                matrix.ncols(),
                times.len()
            )));
        }
        if times.len() < 2 {
            return Err(RomError::invalid(
                "a snapshot set needs at least two columns",
            ));
        }
        Ok(Self { matrix, times })
    }

    pub fn from_states(states: &[DVector<T>], times: Vec<T>) -> RomResult<Self> {
        let n = states.first().map_or(0, |s| s.len());
        if states.iter().any(|s| s.len() != n) {
            return Err(RomError::invalid("snapshots have differing lengths"));
        }
        Self::new(DMatrix::from_columns(states), times)
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn n_snapshots(&self) -> usize {
        self.matrix.ncols()
    }
}

/// Subtracts the arithmetic mean of all columns.
pub fn center_snapshots<T: Real>(snaps: &SnapshotSet<T>) -> (DVector<T>, SnapshotSet<T>) {
    let m = T::from_count(snaps.n_snapshots());
    let centering = snaps.matrix.column_sum() / m;
    let mut centered = snaps.matrix.clone();
    for mut col in centered.column_iter_mut() {
        col -= &centering;
    }
    (
        centering,
        SnapshotSet {
            matrix: centered,
            times: snaps.times.clone(),
        },
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct PodBasis<T: Real> {
    pub centering: DVector<T>,
    /// Full-order dimension by `r`, one mode per column.
    pub modes: DMatrix<T>,
    /// Full nonincreasing spectrum of the snapshot correlation operator.
    pub eigenvalues: Vec<T>,
}

impl<T: Real> PodBasis<T> {
    pub fn r(&self) -> usize {
        self.modes.ncols()
    }

    pub fn dim(&self) -> usize {
        self.modes.nrows()
    }

    pub fn mode(&self, i: usize) -> DVector<T> {
        self.modes.column(i).into_owned()
    }

    /// Keeps the first `r` modes.
    pub fn truncated(&self, r: usize) -> RomResult<Self> {
        if r == 0 || r > self.r() {
            return Err(RomError::invalid(format!(
                "cannot truncate a basis of {} modes to {r}",
                self.r()
            )));
        }
        Ok(Self {
            centering: self.centering.clone(),
            modes: self.modes.columns(0, r).into_owned(),
            eigenvalues: self.eigenvalues.clone(),
        })
    }

    /// Basis with zero centering; for data that is not centered.
    pub fn uncentered(modes: DMatrix<T>, eigenvalues: Vec<T>) -> Self {
        Self {
            centering: DVector::zeros(modes.nrows()),
            modes,
            eigenvalues,
        }
    }

    /// Largest deviation of `Φᵀ M Φ` from the identity.
    pub fn orthonormality_defect(&self, mass: &CsrMatrix<T>) -> T {
        let gram = self.modes.transpose() * spmm(mass, &self.modes);
        let eye = DMatrix::<T>::identity(self.r(), self.r());
        (gram - eye).amax()
    }
}

/// Method of snapshots: eigendecomposition of the mass-weighted Gram matrix
/// `K = Xᵀ M X / (M+1)` of the centered columns `X`.
pub fn compute_pod<T: Real>(
    centered: &SnapshotSet<T>,
    mass: &CsrMatrix<T>,
    r: usize,
) -> RomResult<PodBasis<T>> {
    check_dim("mass matrix rows", mass.nrows(), centered.dim())?;
    check_dim("mass matrix columns", mass.ncols(), centered.dim())?;
    if r == 0 {
        return Err(RomError::invalid("POD dimension r must be at least 1"));
    }
    let x = &centered.matrix;
    let m = centered.n_snapshots();
    let m_t = T::from_count(m);
    let mx = spmm(mass, x);
    let mut gram = x.transpose() * mx / m_t;
    gram = (&gram + gram.transpose()) * T::lit(0.5);

    let eig = gram.symmetric_eigen();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let eigenvalues: Vec<T> = order
        .iter()
        .map(|&k| eig.eigenvalues[k].max(T::zero()))
        .collect();

    let largest = eigenvalues[0];
    let threshold = largest * T::lit(RANK_TOLERANCE);
    let rank = if largest > T::zero() {
        eigenvalues.iter().take_while(|&&l| l > threshold).count()
    } else {
        0
    };
    if r > rank {
        return Err(RomError::RankDeficient { requested: r, rank });
    }

    let mut modes = DMatrix::zeros(centered.dim(), r);
    for (i, &k) in order.iter().take(r).enumerate() {
        let scale = T::one() / (m_t * eigenvalues[i]).sqrt();
        let mode = x * eig.eigenvectors.column(k) * scale;
        modes.set_column(i, &mode);
    }
    reorthonormalize(&mut modes, mass);
    for mut col in modes.column_iter_mut() {
        let pivot = col.iter().fold(
            T::zero(),
            |acc, &v| if v.abs() > acc.abs() { v } else { acc },
        );
        if pivot < T::zero() {
            col.neg_mut();
        }
    }
    Ok(PodBasis {
        centering: DVector::zeros(centered.dim()),
        modes,
        eigenvalues,
    })
}

/// Two passes of modified Gram–Schmidt in the mass inner product. The modes
/// from the eigenvectors are already orthonormal up to roundoff amplified by
/// `λ_max / λ_i`; this removes that drift without changing the span.
fn reorthonormalize<T: Real>(modes: &mut DMatrix<T>, mass: &CsrMatrix<T>) {
    for _ in 0..2 {
        for i in 0..modes.ncols() {
            let mut v = modes.column(i).into_owned();
            for j in 0..i {
                let q = modes.column(j).into_owned();
                let proj = sparse_bilinear(mass, &q, &v);
                v -= q * proj;
            }
            let norm = v.dot(&spmv(mass, &v)).sqrt();
            modes.set_column(i, &(v / norm));
        }
    }
}

/// Centers `snaps` and computes an `r`-mode basis carrying the centering.
pub fn pod_from_snapshots<T: Real>(
    snaps: &SnapshotSet<T>,
    mass: &CsrMatrix<T>,
    r: usize,
    center: bool,
) -> RomResult<PodBasis<T>> {
    if center {
        let (centering, centered) = center_snapshots(snaps);
        let mut basis = compute_pod(&centered, mass, r)?;
        basis.centering = centering;
        Ok(basis)
    } else {
        compute_pod(snaps, mass, r)
    }
}

/// Cumulative energy fractions `Σ_{i≤k} λ_i / Σ λ_i`.
pub fn energy_fractions<T: Real>(basis: &PodBasis<T>) -> RomResult<Vec<T>> {
    let total = basis.eigenvalues.iter().fold(T::zero(), |a, &b| a + b);
    if !(total > T::zero()) {
        return Err(RomError::UndefinedEnergy);
    }
    let mut acc = T::zero();
    Ok(basis
        .eigenvalues
        .iter()
        .map(|&l| {
            acc += l;
            acc / total
        })
        .collect())
}
