//! Time integration of the Galerkin, Leray and approximate-deconvolution
//! Leray reduced models.
//!
//! All three share one step residual. With `F(c, d)` the Galerkin
//! right-hand side where `d` convects and `c` is transported,
//!
//! ```text
//! F(c, d) = b - (φ, U·∇φ) c - ν S c - (φ, φ·∇U) d + Σ_m B_·mn d_m c_n
//! ```
//!
//! implicit Euler solves `M (c - c_n)/dt - F(c, d(c)) = 0` and BDF2 solves
//! `M (c - 4/3 c_n + 1/3 c_{n-1})/dt - 2/3 F(c, d(c)) = 0`. The convecting
//! coefficients are `d = c` (G-ROM), the filtered `c̄` (L-ROM), or the
//! deconvolved `D(c̄)` (ADL-ROM). They are re-solved from every Newton
//! iterate; `d` is affine in `c`, so its Jacobian is a constant matrix.

use nalgebra::{DMatrix, DVector};
use nalgebra_sparse::CsrMatrix;

use crate::error::{check_dim, RomError, RomResult};
use crate::filters::{AdConfig, Deconvolution, DifferentialFilter, FilterConfig};
use crate::linalg::{lu_solve, spmv};
use crate::operators::RomOperators;
use crate::pod::PodBasis;
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RomModelKind<T> {
    Galerkin,
    Leray(FilterConfig<T>),
    ApproximateDeconvolution(AdConfig<T>),
}

impl<T: Real> RomModelKind<T> {
    pub fn label(&self) -> &'static str {
        match self {
            RomModelKind::Galerkin => "grom",
            RomModelKind::Leray(_) => "lrom",
            RomModelKind::ApproximateDeconvolution(_) => "adlrom",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Bdf2Start {
    /// Caller supplies `c_{-1}` alongside `c_0`.
    GivenHistory,
    /// First step taken with implicit Euler.
    FirstStepEuler,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimeScheme {
    ImplicitEuler,
    Bdf2(Bdf2Start),
}

/// When the convecting coefficients are evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ConvectingCoupling {
    /// From the current Newton iterate.
    #[default]
    Implicit,
    /// From the previous time level, held fixed during the step.
    Lagged,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonConfig<T> {
    pub abs_tol: T,
    pub max_iter: usize,
}

impl<T: Real> Default for NewtonConfig<T> {
    fn default() -> Self {
        Self {
            abs_tol: T::lit(1e-10),
            max_iter: 25,
        }
    }
}

impl<T: Real> NewtonConfig<T> {
    pub fn validate(&self) -> RomResult<()> {
        if !(self.abs_tol > T::zero()) {
            return Err(RomError::invalid("Newton tolerance must be positive"));
        }
        if self.max_iter == 0 {
            return Err(RomError::invalid("Newton needs at least one iteration"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RomTrajectory<T: Real> {
    pub times: Vec<T>,
    pub coeffs: Vec<DVector<T>>,
    /// Newton iterations per step; entry 0 (initial state) is zero.
    pub newton_iters: Vec<usize>,
    /// Accepted residual norm per step; entry 0 is zero.
    pub residuals: Vec<T>,
}

impl<T: Real> RomTrajectory<T> {
    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Coefficients as a `steps × r` matrix, one row per instant.
    pub fn coeff_matrix(&self) -> DMatrix<T> {
        let r = self.coeffs.first().map_or(0, |c| c.len());
        DMatrix::from_fn(self.coeffs.len(), r, |k, j| self.coeffs[k][j])
    }
}

/// The affine map `c -> d(c)` and its constant linear part.
#[derive(Debug, Clone)]
enum ConvectingMap<T: Real> {
    Identity,
    Filtered(DifferentialFilter<T>),
    Deconvolved(Deconvolution<T>),
}

impl<T: Real> ConvectingMap<T> {
    fn eval(&self, c: &DVector<T>) -> DVector<T> {
        match self {
            ConvectingMap::Identity => c.clone(),
            ConvectingMap::Filtered(f) => f.apply(c),
            ConvectingMap::Deconvolved(ad) => ad.apply(&ad.filter().apply(c)),
        }
    }

    fn eval_homogeneous(&self, c: &DVector<T>) -> DVector<T> {
        match self {
            ConvectingMap::Identity => c.clone(),
            ConvectingMap::Filtered(f) => f.apply_homogeneous(c),
            ConvectingMap::Deconvolved(ad) => {
                ad.apply_homogeneous(&ad.filter().apply_homogeneous(c))
            }
        }
    }

    fn jacobian(&self, r: usize) -> DMatrix<T> {
        let mut jac = DMatrix::zeros(r, r);
        for j in 0..r {
            let mut e = DVector::zeros(r);
            e[j] = T::one();
            jac.set_column(j, &self.eval_homogeneous(&e));
        }
        jac
    }
}

/// History a step is solved against.
#[derive(Debug, Clone, Copy)]
enum History<'a, T: Real> {
    Euler(&'a DVector<T>),
    Bdf2(&'a DVector<T>, &'a DVector<T>),
}

impl<T: Real> History<'_, T> {
    fn latest(&self) -> &DVector<T> {
        match self {
            History::Euler(c) | History::Bdf2(c, _) => c,
        }
    }

    /// `(β, γ)` with residual `M (c - β)/dt - γ F`.
    fn weights(&self) -> (DVector<T>, T) {
        match self {
            History::Euler(c) => ((*c).clone(), T::one()),
            History::Bdf2(c, cm) => (
                *c * T::lit(4.0 / 3.0) - *cm * T::lit(1.0 / 3.0),
                T::lit(2.0 / 3.0),
            ),
        }
    }
}

/// Prepared solver for one operator set and model: factorizations and the
/// convecting-map Jacobian are computed once.
#[derive(Debug, Clone)]
pub struct RomSolver<'a, T: Real> {
    ops: &'a RomOperators<T>,
    kind: RomModelKind<T>,
    map: ConvectingMap<T>,
    map_jacobian: DMatrix<T>,
    transport: DMatrix<T>,
    coupling: ConvectingCoupling,
}

impl<'a, T: Real> RomSolver<'a, T> {
    pub fn new(ops: &'a RomOperators<T>, kind: RomModelKind<T>) -> RomResult<Self> {
        ops.validate()?;
        let map = match kind {
            RomModelKind::Galerkin => ConvectingMap::Identity,
            RomModelKind::Leray(cfg) => ConvectingMap::Filtered(DifferentialFilter::new(ops, cfg)?),
            RomModelKind::ApproximateDeconvolution(cfg) => {
                ConvectingMap::Deconvolved(Deconvolution::new(ops, &cfg)?)
            }
        };
        let map_jacobian = map.jacobian(ops.r());
        Ok(Self {
            ops,
            kind,
            map,
            map_jacobian,
            transport: ops.transport_linear(),
            coupling: ConvectingCoupling::Implicit,
        })
    }

    pub fn with_coupling(mut self, coupling: ConvectingCoupling) -> Self {
        self.coupling = coupling;
        self
    }

    pub fn kind(&self) -> &RomModelKind<T> {
        &self.kind
    }

    pub fn r(&self) -> usize {
        self.ops.r()
    }

    /// Convecting coefficients `d(c)`.
    pub fn convecting(&self, c: &DVector<T>) -> DVector<T> {
        self.map.eval(c)
    }

    /// `F(c, d)`.
    pub fn rhs(&self, c: &DVector<T>, d: &DVector<T>) -> DVector<T> {
        &self.ops.b + &self.transport * c - &self.ops.conv_center_right * d
            + self.ops.tensor.contract(d, c)
    }

    fn rhs_jacobian(&self, c: &DVector<T>, d: &DVector<T>, through_d: bool) -> DMatrix<T> {
        let mut jac = &self.transport + self.ops.tensor.contract_convecting(d);
        if through_d {
            let dd = self.ops.tensor.contract_convected(c) - &self.ops.conv_center_right;
            jac += dd * &self.map_jacobian;
        }
        jac
    }

    fn convecting_for(&self, c: &DVector<T>, hist: &History<'_, T>) -> DVector<T> {
        match self.coupling {
            ConvectingCoupling::Implicit => self.convecting(c),
            ConvectingCoupling::Lagged => self.convecting(hist.latest()),
        }
    }

    fn residual(&self, c: &DVector<T>, hist: &History<'_, T>, dt: T) -> DVector<T> {
        let (beta, gamma) = hist.weights();
        let d = self.convecting_for(c, hist);
        &self.ops.mass * (c - beta) / dt - self.rhs(c, &d) * gamma
    }

    fn jacobian(&self, c: &DVector<T>, hist: &History<'_, T>, dt: T) -> DMatrix<T> {
        let (_, gamma) = hist.weights();
        let d = self.convecting_for(c, hist);
        let implicit = self.coupling == ConvectingCoupling::Implicit;
        &self.ops.mass / dt - self.rhs_jacobian(c, &d, implicit) * gamma
    }

    /// Implicit-Euler step residual, exposed for verification.
    pub fn euler_residual(&self, c: &DVector<T>, c_n: &DVector<T>, dt: T) -> DVector<T> {
        self.residual(c, &History::Euler(c_n), dt)
    }

    pub fn euler_jacobian(&self, c: &DVector<T>, c_n: &DVector<T>, dt: T) -> DMatrix<T> {
        self.jacobian(c, &History::Euler(c_n), dt)
    }

    pub fn bdf2_residual(
        &self,
        c: &DVector<T>,
        c_n: &DVector<T>,
        c_nm1: &DVector<T>,
        dt: T,
    ) -> DVector<T> {
        self.residual(c, &History::Bdf2(c_n, c_nm1), dt)
    }

    pub fn bdf2_jacobian(
        &self,
        c: &DVector<T>,
        c_n: &DVector<T>,
        c_nm1: &DVector<T>,
        dt: T,
    ) -> DMatrix<T> {
        self.jacobian(c, &History::Bdf2(c_n, c_nm1), dt)
    }

    fn newton(
        &self,
        hist: History<'_, T>,
        dt: T,
        newton: &NewtonConfig<T>,
        step: usize,
    ) -> RomResult<(DVector<T>, usize, T)> {
        let mut c = hist.latest().clone();
        let mut iterations = 0;
        loop {
            let res = self.residual(&c, &hist, dt);
            let norm = res.norm();
            let fail = |c: &DVector<T>, iterations| RomError::SolverFailure {
                step,
                iterations,
                residual: norm.as_f64(),
                iterate: c.iter().map(|v| v.as_f64()).collect(),
            };
            if !norm.is_finite() {
                return Err(fail(&c, iterations));
            }
            if norm <= newton.abs_tol {
                return Ok((c, iterations, norm));
            }
            if iterations == newton.max_iter {
                return Err(fail(&c, iterations));
            }
            let jac = self.jacobian(&c, &hist, dt);
            let delta = lu_solve(jac, &(-res)).ok_or_else(|| fail(&c, iterations))?;
            c += delta;
            iterations += 1;
        }
    }

    /// One step; `c_nm1` is required for BDF2. Returns the new coefficients
    /// and the Newton iteration count.
    pub fn step(
        &self,
        scheme: TimeScheme,
        c_n: &DVector<T>,
        c_nm1: Option<&DVector<T>>,
        dt: T,
        newton: &NewtonConfig<T>,
        step_index: usize,
    ) -> RomResult<(DVector<T>, usize)> {
        check_dim("coefficient vector", c_n.len(), self.r())?;
        if !(dt > T::zero()) {
            return Err(RomError::invalid("time step must be positive"));
        }
        let hist = match (scheme, c_nm1) {
            (TimeScheme::ImplicitEuler, _) => History::Euler(c_n),
            (TimeScheme::Bdf2(_), Some(cm)) => {
                check_dim("previous coefficient vector", cm.len(), self.r())?;
                History::Bdf2(c_n, cm)
            }
            (TimeScheme::Bdf2(_), None) => {
                return Err(RomError::invalid("BDF2 step needs two history states"))
            }
        };
        let (c, iters, _) = self.newton(hist, dt, newton, step_index)?;
        Ok((c, iters))
    }

    /// Integrates `n_steps` steps from `c0` at times `k dt`.
    pub fn run(
        &self,
        scheme: TimeScheme,
        c0: &DVector<T>,
        c_minus1: Option<&DVector<T>>,
        dt: T,
        n_steps: usize,
        newton: &NewtonConfig<T>,
    ) -> RomResult<RomTrajectory<T>> {
        check_dim("initial coefficients", c0.len(), self.r())?;
        newton.validate()?;
        if !(dt > T::zero()) {
            return Err(RomError::invalid("time step must be positive"));
        }
        let mut prev = match scheme {
            TimeScheme::Bdf2(Bdf2Start::GivenHistory) => {
                let cm = c_minus1
                    .ok_or_else(|| RomError::invalid("BDF2 with given history needs c_minus1"))?;
                check_dim("c_minus1", cm.len(), self.r())?;
                Some(cm.clone())
            }
            _ => None,
        };
        let mut traj = RomTrajectory {
            times: vec![T::zero()],
            coeffs: vec![c0.clone()],
            newton_iters: vec![0],
            residuals: vec![T::zero()],
        };
        for step in 1..=n_steps {
            let current = traj.coeffs.last().expect("nonempty");
            let hist = match (scheme, &prev) {
                (TimeScheme::ImplicitEuler, _) | (TimeScheme::Bdf2(_), None) => {
                    History::Euler(current)
                }
                (TimeScheme::Bdf2(_), Some(cm)) => History::Bdf2(current, cm),
            };
            let (c, iters, res) = self.newton(hist, dt, newton, step)?;
            if matches!(scheme, TimeScheme::Bdf2(_)) {
                prev = Some(current.clone());
            }
            traj.times.push(T::from_count(step) * dt);
            traj.coeffs.push(c);
            traj.newton_iters.push(iters);
            traj.residuals.push(res);
        }
        Ok(traj)
    }
}

/// Convection matrix `(i, n) -> Σ_m B_imn d_m` for convecting coefficients
/// `d`; `assemble_convection_matrix(d) · c` is the quadratic Galerkin term.
pub fn assemble_convection_matrix<T: Real>(
    ops: &RomOperators<T>,
    d: &DVector<T>,
) -> RomResult<DMatrix<T>> {
    check_dim("convecting coefficients", d.len(), ops.r())?;
    Ok(ops.tensor.contract_convecting(d))
}

pub fn step_rom<T: Real>(
    kind: RomModelKind<T>,
    scheme: TimeScheme,
    ops: &RomOperators<T>,
    c_n: &DVector<T>,
    c_nm1: Option<&DVector<T>>,
    dt: T,
    newton: &NewtonConfig<T>,
) -> RomResult<DVector<T>> {
    RomSolver::new(ops, kind)?
        .step(scheme, c_n, c_nm1, dt, newton, 1)
        .map(|(c, _)| c)
}

#[allow(clippy::too_many_arguments)]
pub fn run_rom<T: Real>(
    kind: RomModelKind<T>,
    scheme: TimeScheme,
    ops: &RomOperators<T>,
    c0: &DVector<T>,
    c_minus1: Option<&DVector<T>>,
    dt: T,
    n_steps: usize,
    newton: &NewtonConfig<T>,
) -> RomResult<RomTrajectory<T>> {
    RomSolver::new(ops, kind)?.run(scheme, c0, c_minus1, dt, n_steps, newton)
}

/// `c0_i = φ_iᵀ M (u0 - U)`.
pub fn project_initial_condition<T: Real>(
    basis: &PodBasis<T>,
    u0: &DVector<T>,
    mass: &CsrMatrix<T>,
) -> RomResult<DVector<T>> {
    check_dim("initial state", u0.len(), basis.dim())?;
    check_dim("mass matrix", mass.nrows(), basis.dim())?;
    Ok(basis.modes.tr_mul(&spmv(mass, &(u0 - &basis.centering))))
}
