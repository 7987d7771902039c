//! Galerkin projection of the full-order operators onto a POD basis.
//!
//! With `u_r = U + Σ c_j φ_j` and convection written as `(w·∇)v` tested
//! against `φ_i`, the Galerkin system is `M c' = b + A c + cᵀ B c` with
//!
//! ```text
//! b_i     = (φ_i, f) - (φ_i, U·∇U) - ν (∇φ_i, ∇U)
//! A_im    = -(φ_i, U·∇φ_m) - (φ_i, φ_m·∇U) - ν (∇φ_i, ∇φ_m)
//! B_imn   = -(φ_i, φ_m·∇φ_n)
//! ```
//!
//! The two centering cross-convection blocks are kept separately because the
//! regularized models convect with a different field than they transport.

use nalgebra::{DMatrix, DVector};
use nalgebra_sparse::CsrMatrix;

use crate::error::{check_dim, RomError, RomResult};
use crate::fem1d::FemSystem1D;
use crate::linalg::{spmm, spmv};
use crate::pod::PodBasis;
use crate::scalar::Real;

/// Full-order discretization a basis can be projected against.
pub trait FullOrderOperators<T: Real> {
    fn dim(&self) -> usize;
    fn mass(&self) -> &CsrMatrix<T>;
    fn stiffness(&self) -> &CsrMatrix<T>;
    /// `k -> ((w·∇)v, ψ_k)` over all full-order basis functions `ψ_k`.
    fn convection(&self, w: &DVector<T>, v: &DVector<T>) -> DVector<T>;
}

impl<T: Real> FullOrderOperators<T> for FemSystem1D<T> {
    fn dim(&self) -> usize {
        self.n_dofs()
    }

    fn mass(&self) -> &CsrMatrix<T> {
        &self.mass
    }

    fn stiffness(&self) -> &CsrMatrix<T> {
        &self.stiffness
    }

    fn convection(&self, w: &DVector<T>, v: &DVector<T>) -> DVector<T> {
        self.convection_load(w, v)
    }
}

/// Dense `r × r × r` tensor, stored slice-major: entry `(i, m, n)` lives at
/// `(i * r + m) * r + n`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvectionTensor<T> {
    r: usize,
    data: Vec<T>,
}

impl<T: Real> ConvectionTensor<T> {
    pub fn zeros(r: usize) -> Self {
        Self {
            r,
            data: vec![T::zero(); r * r * r],
        }
    }

    pub fn from_vec(r: usize, data: Vec<T>) -> RomResult<Self> {
        check_dim("convection tensor entries", data.len(), r * r * r)?;
        Ok(Self { r, data })
    }

    pub fn from_fn(r: usize, mut f: impl FnMut(usize, usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(r * r * r);
        for i in 0..r {
            for m in 0..r {
                for n in 0..r {
                    data.push(f(i, m, n));
                }
            }
        }
        Self { r, data }
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    #[inline]
    pub fn get(&self, i: usize, m: usize, n: usize) -> T {
        self.data[(i * self.r + m) * self.r + n]
    }

    pub fn set(&mut self, i: usize, m: usize, n: usize, v: T) {
        self.data[(i * self.r + m) * self.r + n] = v;
    }

    /// `Σ_{m,n} B_imn d_m c_n`.
    pub fn contract(&self, d: &DVector<T>, c: &DVector<T>) -> DVector<T> {
        DVector::from_fn(self.r, |i, _| {
            let mut s = T::zero();
            for m in 0..self.r {
                let mut row = T::zero();
                for n in 0..self.r {
                    row += self.get(i, m, n) * c[n];
                }
                s += d[m] * row;
            }
            s
        })
    }

    /// Matrix `(i, n) -> Σ_m B_imn d_m`, acting on the transported coefficients.
    pub fn contract_convecting(&self, d: &DVector<T>) -> DMatrix<T> {
        DMatrix::from_fn(self.r, self.r, |i, n| {
            (0..self.r).fold(T::zero(), |s, m| s + self.get(i, m, n) * d[m])
        })
    }

    /// Matrix `(i, m) -> Σ_n B_imn c_n`, acting on the convecting coefficients.
    pub fn contract_convected(&self, c: &DVector<T>) -> DMatrix<T> {
        DMatrix::from_fn(self.r, self.r, |i, m| {
            (0..self.r).fold(T::zero(), |s, n| s + self.get(i, m, n) * c[n])
        })
    }
}

/// The reduced convection data: trilinear tensor plus the centering terms.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedConvection<T: Real> {
    pub tensor: ConvectionTensor<T>,
    /// `(φ_i, U·∇φ_m)`
    pub center_left: DMatrix<T>,
    /// `(φ_i, φ_m·∇U)`
    pub center_right: DMatrix<T>,
    /// `(φ_i, U·∇U)`
    pub center_self: DVector<T>,
}

impl<T: Real> ReducedConvection<T> {
    /// No centering contributions.
    pub fn tensor_only(tensor: ConvectionTensor<T>) -> Self {
        let r = tensor.r();
        Self {
            tensor,
            center_left: DMatrix::zeros(r, r),
            center_right: DMatrix::zeros(r, r),
            center_self: DVector::zeros(r),
        }
    }

    pub fn project(basis: &PodBasis<T>, fom: &impl FullOrderOperators<T>) -> Self {
        let r = basis.r();
        let phi = &basis.modes;
        let u = &basis.centering;
        let modes: Vec<DVector<T>> = (0..r).map(|i| basis.mode(i)).collect();
        let mut tensor = ConvectionTensor::zeros(r);
        for m in 0..r {
            for n in 0..r {
                let load = fom.convection(&modes[m], &modes[n]);
                let proj = phi.tr_mul(&load);
                for i in 0..r {
                    tensor.set(i, m, n, -proj[i]);
                }
            }
        }
        let mut center_left = DMatrix::zeros(r, r);
        let mut center_right = DMatrix::zeros(r, r);
        for (m, mode) in modes.iter().enumerate() {
            center_left.set_column(m, &phi.tr_mul(&fom.convection(u, mode)));
            center_right.set_column(m, &phi.tr_mul(&fom.convection(mode, u)));
        }
        let center_self = phi.tr_mul(&fom.convection(u, u));
        Self {
            tensor,
            center_left,
            center_right,
            center_self,
        }
    }
}

/// Every projected quantity the online solvers need.
#[derive(Debug, Clone, PartialEq)]
pub struct RomOperators<T: Real> {
    /// Diffusion coefficient (ν, or Re⁻¹).
    pub nu: T,
    pub mass: DMatrix<T>,
    pub stiffness: DMatrix<T>,
    pub b: DVector<T>,
    pub a_lin: DMatrix<T>,
    pub conv_center_left: DMatrix<T>,
    pub conv_center_right: DMatrix<T>,
    pub tensor: ConvectionTensor<T>,
    /// `(φ_i, U)`
    pub center_mass: DVector<T>,
    /// `(∇φ_i, ∇U)`
    pub center_stiffness: DVector<T>,
}

impl<T: Real> RomOperators<T> {
    pub fn r(&self) -> usize {
        self.mass.nrows()
    }

    /// Operators with no convection and no centering: `M c' = -ν S c`.
    pub fn linear(mass: DMatrix<T>, stiffness: DMatrix<T>, nu: T) -> RomResult<Self> {
        let r = mass.nrows();
        let ops = Self {
            nu,
            a_lin: &stiffness * (-nu),
            mass,
            stiffness,
            b: DVector::zeros(r),
            conv_center_left: DMatrix::zeros(r, r),
            conv_center_right: DMatrix::zeros(r, r),
            tensor: ConvectionTensor::zeros(r),
            center_mass: DVector::zeros(r),
            center_stiffness: DVector::zeros(r),
        };
        ops.validate()?;
        Ok(ops)
    }

    /// Checks that all fields agree on `r` and that the reduced mass is
    /// symmetric.
    pub fn validate(&self) -> RomResult<()> {
        let r = self.r();
        let square = |name: &str, m: &DMatrix<T>| -> RomResult<()> {
            check_dim(&format!("{name} rows"), m.nrows(), r)?;
            check_dim(&format!("{name} columns"), m.ncols(), r)
        };
        square("mass", &self.mass)?;
        square("stiffness", &self.stiffness)?;
        square("a_lin", &self.a_lin)?;
        square("conv_center_left", &self.conv_center_left)?;
        square("conv_center_right", &self.conv_center_right)?;
        check_dim("b", self.b.len(), r)?;
        check_dim("center_mass", self.center_mass.len(), r)?;
        check_dim("center_stiffness", self.center_stiffness.len(), r)?;
        check_dim("tensor", self.tensor.r(), r)?;
        if !(self.nu >= T::zero()) {
            return Err(RomError::invalid(
                "diffusion coefficient must be nonnegative",
            ));
        }
        Ok(())
    }

    /// Right-hand side offset `g` of the reduced filter system
    /// `(M + δ²S) c̄ = M c + g` when both the filtered and the unfiltered
    /// fields carry the centering: `g_i = -δ² (∇φ_i, ∇U)`.
    pub fn filter_offset(&self, delta: T) -> DVector<T> {
        &self.center_stiffness * (-(delta * delta))
    }

    /// The transport-only part of the linear operator, `-(φ_i, U·∇φ_m) - ν S`;
    /// `a_lin` minus this is the convecting-side centering block.
    pub fn transport_linear(&self) -> DMatrix<T> {
        &self.a_lin + &self.conv_center_right
    }
}

/// Assembles the reduced operators from projected linear pieces and reduced
/// convection data. Used directly by the import path, where the convection
/// tensor comes from an external tool.
pub fn assemble_reduced_operators<T: Real>(
    basis: &PodBasis<T>,
    mass: &CsrMatrix<T>,
    stiffness: &CsrMatrix<T>,
    nu: T,
    forcing: Option<&DVector<T>>,
    conv: ReducedConvection<T>,
) -> RomResult<RomOperators<T>> {
    let n = basis.dim();
    let r = basis.r();
    for (name, a) in [("mass", mass), ("stiffness", stiffness)] {
        check_dim(&format!("{name} rows"), a.nrows(), n)?;
        check_dim(&format!("{name} columns"), a.ncols(), n)?;
    }
    check_dim("centering", basis.centering.len(), n)?;
    check_dim("convection tensor", conv.tensor.r(), r)?;
    check_dim("center_self", conv.center_self.len(), r)?;
    for m in [&conv.center_left, &conv.center_right] {
        check_dim("centering convection block", m.nrows(), r)?;
        check_dim("centering convection block", m.ncols(), r)?;
    }
    let phi = &basis.modes;
    let m_r = phi.tr_mul(&spmm(mass, phi));
    let s_r = phi.tr_mul(&spmm(stiffness, phi));
    let m_r = (&m_r + m_r.transpose()) * T::lit(0.5);
    let s_r = (&s_r + s_r.transpose()) * T::lit(0.5);
    let center_mass = phi.tr_mul(&spmv(mass, &basis.centering));
    let center_stiffness = phi.tr_mul(&spmv(stiffness, &basis.centering));

    let forcing_r = match forcing {
        Some(f) => {
            check_dim("forcing", f.len(), n)?;
            phi.tr_mul(&spmv(mass, f))
        }
        None => DVector::zeros(r),
    };
    let b = forcing_r - &conv.center_self - &center_stiffness * nu;
    let a_lin = -&conv.center_left - &conv.center_right - &s_r * nu;
    let ops = RomOperators {
        nu,
        mass: m_r,
        stiffness: s_r,
        b,
        a_lin,
        conv_center_left: conv.center_left,
        conv_center_right: conv.center_right,
        tensor: conv.tensor,
        center_mass,
        center_stiffness,
    };
    ops.validate()?;
    Ok(ops)
}

/// Projects a full-order discretization onto `basis`. The forcing, when
/// given, is a full-order nodal field and is paired through the mass matrix.
pub fn project_operators<T: Real>(
    basis: &PodBasis<T>,
    fom: &impl FullOrderOperators<T>,
    nu: T,
    forcing: Option<&DVector<T>>,
) -> RomResult<RomOperators<T>> {
    check_dim("basis dimension", basis.dim(), fom.dim())?;
    let conv = ReducedConvection::project(basis, fom);
    assemble_reduced_operators(basis, fom.mass(), fom.stiffness(), nu, forcing, conv)
}

/// `g_i = -δ² (∇φ_i, ∇U)` computed straight from the full-order stiffness.
pub fn compute_filter_offset<T: Real>(
    basis: &PodBasis<T>,
    stiffness: &CsrMatrix<T>,
    delta: T,
) -> RomResult<DVector<T>> {
    check_dim("stiffness rows", stiffness.nrows(), basis.dim())?;
    if !(delta >= T::zero()) {
        return Err(RomError::invalid("filter radius must be nonnegative"));
    }
    Ok(basis.modes.tr_mul(&spmv(stiffness, &basis.centering)) * (-(delta * delta)))
}

/// Galerkin right-hand side `b + A c + cᵀ B c`.
pub fn grom_rhs<T: Real>(ops: &RomOperators<T>, c: &DVector<T>) -> RomResult<DVector<T>> {
    check_dim("coefficient vector", c.len(), ops.r())?;
    Ok(&ops.b + &ops.a_lin * c + ops.tensor.contract(c, c))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem1d::{assemble_fem_system, build_uniform_mesh};
    use crate::linalg::sparse_bilinear;
    use crate::pod::{pod_from_snapshots, SnapshotSet};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_basis(
        sys: &FemSystem1D<f64>,
        m: usize,
        r: usize,
        seed: u64,
        center: bool,
    ) -> PodBasis<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = sys.n_dofs();
        let cols: Vec<DVector<f64>> = (0..m)
            .map(|_| {
                let mut v = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
                v[0] = 0.0;
                v[n - 1] = 0.0;
                v
            })
            .collect();
        let snaps = SnapshotSet::from_states(&cols, (0..m).map(|k| k as f64).collect()).unwrap();
        pod_from_snapshots(&snaps, &sys.mass, r, center).unwrap()
    }

    /// Direct per-element quadrature of `∫ a b_x c` with the midpoint-refined
    /// Simpson rule, independent of the Gauss-based load assembly.
    fn trilinear_oracle(
        sys: &FemSystem1D<f64>,
        a: &DVector<f64>,
        b: &DVector<f64>,
        c: &DVector<f64>,
    ) -> f64 {
        let mesh = &sys.mesh;
        let mut total = 0.0;
        for e in 0..mesh.n_elements() {
            let (xa, xb) = (mesh.nodes()[e], mesh.nodes()[e + 1]);
            let bx = (b[e + 1] - b[e]) / (xb - xa);
            let f = |x: f64| mesh.evaluate(a, x) * bx * mesh.evaluate(c, x);
            let xm = 0.5 * (xa + xb);
            total += (xb - xa) / 6.0 * (f(xa) + 4.0 * f(xm) + f(xb));
        }
        total
    }

    #[test]
    fn zero_centering_and_forcing_give_zero_b() {
        let sys = assemble_fem_system(build_uniform_mesh::<f64>(12).unwrap());
        let basis = random_basis(&sys, 6, 3, 1, false);
        let ops = project_operators(&basis, &sys, 1e-3, None).unwrap();
        assert_eq!(ops.b.amax(), 0.0);
        assert!((&ops.mass - DMatrix::identity(3, 3)).amax() < 1e-10);
    }

    #[test]
    fn tensor_matches_quadrature_oracle() {
        let sys = assemble_fem_system(build_uniform_mesh::<f64>(4).unwrap());
        let basis = random_basis(&sys, 4, 2, 2, true);
        let ops = project_operators(&basis, &sys, 1e-2, None).unwrap();
        let phi: Vec<_> = (0..2).map(|i| basis.mode(i)).collect();
        let u = &basis.centering;
        for i in 0..2 {
            for m in 0..2 {
                for n in 0..2 {
                    let want = -trilinear_oracle(&sys, &phi[m], &phi[n], &phi[i]);
                    assert!((ops.tensor.get(i, m, n) - want).abs() < 1e-12);
                }
                let left = trilinear_oracle(&sys, u, &phi[m], &phi[i]);
                let right = trilinear_oracle(&sys, &phi[m], u, &phi[i]);
                assert!((ops.conv_center_left[(i, m)] - left).abs() < 1e-12);
                assert!((ops.conv_center_right[(i, m)] - right).abs() < 1e-12);
            }
            let cc = trilinear_oracle(&sys, u, u, &phi[i]);
            let diff = sparse_bilinear(&sys.stiffness, &phi[i], u);
            assert!((ops.b[i] - (-cc - 1e-2 * diff)).abs() < 1e-12);
        }
    }

    #[test]
    fn a_lin_decomposition_and_stiffness_properties() {
        let sys = assemble_fem_system(build_uniform_mesh::<f64>(20).unwrap());
        let basis = random_basis(&sys, 9, 5, 3, true);
        let ops = project_operators(&basis, &sys, 0.3, None).unwrap();
        let expect = -&ops.conv_center_left - &ops.conv_center_right - &ops.stiffness * 0.3;
        assert!((&ops.a_lin - expect).amax() <= 1e-12);
        assert!((&ops.stiffness - ops.stiffness.transpose()).amax() == 0.0);
        let eig = ops.stiffness.clone().symmetric_eigen();
        assert!(eig.eigenvalues.iter().all(|&l| l >= -1e-10));
    }

    #[test]
    fn reduced_diffusion_pairing_consistent() {
        let sys = assemble_fem_system(build_uniform_mesh::<f64>(25).unwrap());
        let basis = random_basis(&sys, 8, 4, 4, true);
        let ops = project_operators(&basis, &sys, 1.0, None).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..10 {
            let c = DVector::from_fn(4, |_, _| rng.random_range(-2.0..2.0));
            let v = &basis.modes * &c;
            let lhs = c.dot(&(&ops.stiffness * &c));
            let rhs = sparse_bilinear(&sys.stiffness, &v, &v);
            assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + rhs.abs()));
        }
    }

    #[test]
    fn reduced_mass_is_identity_for_any_r() {
        let sys = assemble_fem_system(build_uniform_mesh::<f64>(15).unwrap());
        for (seed, r) in [(5, 1), (6, 3), (7, 6)] {
            let basis = random_basis(&sys, 8, r, seed, true);
            let ops = project_operators(&basis, &sys, 1.0, None).unwrap();
            assert!((&ops.mass - DMatrix::identity(r, r)).amax() <= 1e-10);
        }
    }

    #[test]
    fn filter_offset_examples() {
        let sys = assemble_fem_system(build_uniform_mesh::<f64>(10).unwrap());
        let zero_center = random_basis(&sys, 5, 3, 8, false);
        assert_eq!(
            compute_filter_offset(&zero_center, &sys.stiffness, 0.7)
                .unwrap()
                .amax(),
            0.0
        );

        let basis = random_basis(&sys, 5, 3, 9, true);
        assert_eq!(
            compute_filter_offset(&basis, &sys.stiffness, 0.0)
                .unwrap()
                .amax(),
            0.0
        );

        let g = compute_filter_offset(&basis, &sys.stiffness, 0.4).unwrap();
        let dense = crate::linalg::csr_to_dense(&sys.stiffness);
        for i in 0..3 {
            let want = -0.16 * basis.mode(i).dot(&(&dense * &basis.centering));
            assert!((g[i] - want).abs() < 1e-12);
        }
        let ops = project_operators(&basis, &sys, 1.0, None).unwrap();
        assert!((ops.filter_offset(0.4) - g).amax() < 1e-12);
        assert!(compute_filter_offset(&basis, &sys.stiffness, -1.0).is_err());
    }

    #[test]
    fn rhs_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let r = 3;
        let ops = RomOperators {
            nu: 0.1,
            mass: DMatrix::identity(r, r),
            stiffness: DMatrix::identity(r, r),
            b: DVector::from_fn(r, |_, _| rng.random_range(-1.0..1.0)),
            a_lin: DMatrix::from_fn(r, r, |_, _| rng.random_range(-1.0..1.0)),
            conv_center_left: DMatrix::zeros(r, r),
            conv_center_right: DMatrix::zeros(r, r),
            tensor: ConvectionTensor::from_fn(r, |_, _, _| rng.random_range(-1.0..1.0)),
            center_mass: DVector::zeros(r),
            center_stiffness: DVector::zeros(r),
        };
        assert_eq!(grom_rhs(&ops, &DVector::zeros(r)).unwrap(), ops.b);

        let c = DVector::from_fn(r, |_, _| rng.random_range(-1.0..1.0));
        let got = grom_rhs(&ops, &c).unwrap();
        let mut want = ops.b.clone();
        for i in 0..r {
            for m in 0..r {
                want[i] += ops.a_lin[(i, m)] * c[m];
                for n in 0..r {
                    want[i] += ops.tensor.get(i, m, n) * c[m] * c[n];
                }
            }
        }
        assert!((got - want).amax() < 1e-13);

        let ident = RomOperators {
            b: DVector::zeros(r),
            a_lin: DMatrix::identity(r, r),
            tensor: ConvectionTensor::zeros(r),
            ..ops
        };
        assert_eq!(grom_rhs(&ident, &c).unwrap(), c);
        assert!(grom_rhs(&ident, &DVector::zeros(2)).is_err());
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let sys = assemble_fem_system(build_uniform_mesh::<f64>(10).unwrap());
        let other = assemble_fem_system(build_uniform_mesh::<f64>(12).unwrap());
        let basis = random_basis(&sys, 5, 2, 10, true);
        assert!(matches!(
            project_operators(&basis, &other, 1.0, None),
            Err(RomError::InvalidArgument(_))
        ));
    }

    proptest! {
        #[test]
        fn contraction_is_bilinear(
            seed in 0u64..1000,
            alpha in -3.0f64..3.0,
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let r = 4;
            let t = ConvectionTensor::from_fn(r, |_, _, _| rng.random_range(-1.0..1.0));
            let mut v = || DVector::from_fn(r, |_, _| rng.random_range(-1.0..1.0));
            let (c1, c2, d) = (v(), v(), v());
            let lhs = t.contract(&(&c1 * alpha + &c2), &d);
            let rhs = t.contract(&c1, &d) * alpha + t.contract(&c2, &d);
            prop_assert!((lhs - rhs).amax() < 1e-12);
            let lhs = t.contract(&d, &(&c1 * alpha + &c2));
            let rhs = t.contract(&d, &c1) * alpha + t.contract(&d, &c2);
            prop_assert!((lhs - rhs).amax() < 1e-12);
            prop_assert!((t.contract_convecting(&d) * &c1 - t.contract(&d, &c1)).amax() < 1e-13);
            prop_assert!((t.contract_convected(&c1) * &d - t.contract(&d, &c1)).amax() < 1e-13);
        }
    }
}
