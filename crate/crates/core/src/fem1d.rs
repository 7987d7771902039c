//! Piecewise-linear finite elements for viscous Burgers on `[0, 1]`.
//!
//! The full-order model is
//!
//! ```text
//! M (u^{n+1} - u^n) / dt + nu S u^{n+1} + N(u^{n+1}) = 0
//! ```
//!
//! on the interior nodes, with homogeneous Dirichlet values at both ends.
//! `N_i(u) = (u u_x, phi_i)` is integrated with 3-point Gauss per element,
//! which is exact for the products of hat functions involved.

use nalgebra::DVector;
use nalgebra_sparse::{CooMatrix, CsrMatrix};

use crate::error::{check_dim, RomError, RomResult};
use crate::linalg::{csr_entry, spmv, Tridiagonal};
use crate::scalar::Real;
use crate::solvers::NewtonConfig;

#[derive(Debug, Clone, PartialEq)]
pub struct Mesh1D<T> {
    nodes: Vec<T>,
}

impl<T: Real> Mesh1D<T> {
    /// Builds a mesh from explicit node positions, strictly increasing from
    /// 0 to 1.
    pub fn from_nodes(nodes: Vec<T>) -> RomResult<Self> {
        if nodes.len() < 3 {
            return Err(RomError::invalid("a mesh needs at least two elements"));
        }
        if nodes[0] != T::zero() || nodes[nodes.len() - 1] != T::one() {
            return Err(RomError::invalid("mesh must span [0, 1]"));
        }
        if nodes.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(RomError::invalid("mesh nodes must be strictly increasing"));
        }
        Ok(Self { nodes })
    }

    pub fn nodes(&self) -> &[T] {
        &self.nodes
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_elements(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn element_size(&self, e: usize) -> T {
        self.nodes[e + 1] - self.nodes[e]
    }

    /// Evaluates the piecewise-linear interpolant of nodal `values` at `x`.
    pub fn evaluate(&self, values: &DVector<T>, x: T) -> T {
        let last = self.n_elements() - 1;
        // first element whose right node is >= x
        let e = self.nodes[1..].partition_point(|&xn| xn < x).min(last);
        let t = (x - self.nodes[e]) / self.element_size(e);
        values[e] * (T::one() - t) + values[e + 1] * t
    }

    /// Nodal interpolation of a field given on `self` onto the nodes of
    /// `target`.
    pub fn interpolate_to(&self, values: &DVector<T>, target: &Mesh1D<T>) -> RomResult<DVector<T>> {
        check_dim("interpolated field", values.len(), self.n_nodes())?;
        Ok(DVector::from_iterator(
            target.n_nodes(),
            target.nodes.iter().map(|&x| self.evaluate(values, x)),
        ))
    }
}

pub fn build_uniform_mesh<T: Real>(n_elements: usize) -> RomResult<Mesh1D<T>> {
    if n_elements < 2 {
        return Err(RomError::invalid(format!(
            "n_elements must be at least 2, got {n_elements}"
        )));
    }
    let n = T::from_count(n_elements);
    let nodes = (0..=n_elements).map(|i| T::from_count(i) / n).collect();
    Ok(Mesh1D { nodes })
}

/// Mesh plus assembled mass and stiffness matrices.
///
/// The matrices are assembled over all nodes; Dirichlet rows are eliminated
/// by the solver, not by the assembly.
#[derive(Debug, Clone)]
pub struct FemSystem1D<T: Real> {
    pub mesh: Mesh1D<T>,
    pub mass: CsrMatrix<T>,
    pub stiffness: CsrMatrix<T>,
    pub dirichlet_dofs: Vec<usize>,
}

pub fn assemble_fem_system<T: Real>(mesh: Mesh1D<T>) -> FemSystem1D<T> {
    let n = mesh.n_nodes();
    let mut mass = CooMatrix::new(n, n);
    let mut stiffness = CooMatrix::new(n, n);
    let sixth = T::lit(1.0 / 6.0);
    for e in 0..mesh.n_elements() {
        let h = mesh.element_size(e);
        let (a, b) = (e, e + 1);
        let m_diag = h * sixth * T::lit(2.0);
        let m_off = h * sixth;
        let k = T::one() / h;
        mass.push(a, a, m_diag);
        mass.push(b, b, m_diag);
        mass.push(a, b, m_off);
        mass.push(b, a, m_off);
        stiffness.push(a, a, k);
        stiffness.push(b, b, k);
        stiffness.push(a, b, -k);
        stiffness.push(b, a, -k);
    }
    FemSystem1D {
        mass: CsrMatrix::from(&mass),
        stiffness: CsrMatrix::from(&stiffness),
        dirichlet_dofs: vec![0, n - 1],
        mesh,
    }
}

/// 3-point Gauss rule on the reference element `[0, 1]`.
fn gauss3<T: Real>() -> [(T, T); 3] {
    let off = T::lit(15f64.sqrt() / 10.0);
    let half = T::lit(0.5);
    [
        (half - off, T::lit(5.0 / 18.0)),
        (half, T::lit(8.0 / 18.0)),
        (half + off, T::lit(5.0 / 18.0)),
    ]
}

impl<T: Real> FemSystem1D<T> {
    pub fn n_dofs(&self) -> usize {
        self.mesh.n_nodes()
    }

    pub fn interior_dofs(&self) -> std::ops::Range<usize> {
        1..self.n_dofs() - 1
    }

    /// Load vector `k -> (w v_x, psi_k)`: `w` convects, `v` is convected and
    /// `psi_k` is the hat function of node `k`.
    pub fn convection_load(&self, w: &DVector<T>, v: &DVector<T>) -> DVector<T> {
        let mut out = DVector::zeros(self.n_dofs());
        let quad = gauss3::<T>();
        for e in 0..self.mesh.n_elements() {
            let h = self.mesh.element_size(e);
            let slope = (v[e + 1] - v[e]) / h;
            let (mut fa, mut fb) = (T::zero(), T::zero());
            for &(xi, wt) in &quad {
                let wq = w[e] * (T::one() - xi) + w[e + 1] * xi;
                let f = wt * h * wq * slope;
                fa += f * (T::one() - xi);
                fb += f * xi;
            }
            out[e] += fa;
            out[e + 1] += fb;
        }
        out
    }

    /// Jacobian of `u -> (u u_x, psi_k)`, tridiagonal over all nodes.
    pub fn convection_jacobian(&self, u: &DVector<T>) -> Tridiagonal<T> {
        let mut jac = Tridiagonal::zeros(self.n_dofs());
        let quad = gauss3::<T>();
        for e in 0..self.mesh.n_elements() {
            let h = self.mesh.element_size(e);
            let slope = (u[e + 1] - u[e]) / h;
            let dpsi = [-T::one() / h, T::one() / h];
            for &(xi, wt) in &quad {
                let psi = [T::one() - xi, xi];
                let uq = u[e] * psi[0] + u[e + 1] * psi[1];
                for (lk, &test) in psi.iter().enumerate() {
                    for lj in 0..2 {
                        // d/du_j of u u_x = psi_j u_x + u psi_j'
                        let d = psi[lj] * slope + uq * dpsi[lj];
                        jac.add(e + lk, e + lj, wt * h * d * test);
                    }
                }
            }
        }
        jac
    }
}

/// Nodal interpolant of the discontinuous Burgers initial condition:
/// 1 on `(0, 0.5)`, 0 at `x = 0` and on `[0.5, 1]`.
pub fn burgers_initial_condition<T: Real>(mesh: &Mesh1D<T>) -> DVector<T> {
    let half = T::lit(0.5);
    DVector::from_iterator(
        mesh.n_nodes(),
        mesh.nodes().iter().map(|&x| {
            if x > T::zero() && x < half {
                T::one()
            } else {
                T::zero()
            }
        }),
    )
}

pub fn assemble_burgers_nonlinearity<T: Real>(
    sys: &FemSystem1D<T>,
    u: &DVector<T>,
) -> RomResult<DVector<T>> {
    check_dim("Burgers state", u.len(), sys.n_dofs())?;
    Ok(sys.convection_load(u, u))
}

#[derive(Debug, Clone)]
pub struct FemTrajectory<T> {
    pub times: Vec<T>,
    pub states: Vec<DVector<T>>,
    /// Accepted Newton residual norm per step; entry 0 (initial state) is zero.
    pub residuals: Vec<T>,
}

impl<T: Real> FemTrajectory<T> {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }
}

/// Implicit-Euler residual restricted to interior nodes.
fn burgers_residual<T: Real>(
    sys: &FemSystem1D<T>,
    u: &DVector<T>,
    u_prev: &DVector<T>,
    nu: T,
    dt: T,
) -> DVector<T> {
    let full = spmv(&sys.mass, &(u - u_prev)) / dt
        + spmv(&sys.stiffness, u) * nu
        + sys.convection_load(u, u);
    full.rows_range(sys.interior_dofs()).into_owned()
}

fn burgers_jacobian<T: Real>(sys: &FemSystem1D<T>, u: &DVector<T>, nu: T, dt: T) -> Tridiagonal<T> {
    let conv = sys.convection_jacobian(u);
    let interior = sys.interior_dofs();
    let mut jac = Tridiagonal::zeros(interior.len());
    for (li, i) in interior.clone().enumerate() {
        for j in [i - 1, i, i + 1] {
            if !interior.contains(&j) {
                continue;
            }
            let lj = j - interior.start;
            let lin = csr_entry(&sys.mass, i, j) / dt + csr_entry(&sys.stiffness, i, j) * nu;
            let c = if j == i {
                conv.diag[i]
            } else if j == i + 1 {
                conv.upper[i]
            } else {
                conv.lower[j]
            };
            jac.add(li, lj, lin + c);
        }
    }
    jac
}

/// Integrates Burgers from `ic` for `n_steps` implicit-Euler steps of size
/// `dt`, solving each step with Newton and the analytic Jacobian.
pub fn solve_burgers_fom<T: Real>(
    sys: &FemSystem1D<T>,
    ic: &DVector<T>,
    nu: T,
    dt: T,
    n_steps: usize,
    newton: &NewtonConfig<T>,
) -> RomResult<FemTrajectory<T>> {
    check_dim("initial condition", ic.len(), sys.n_dofs())?;
    if !(nu > T::zero()) || !(dt > T::zero()) {
        return Err(RomError::invalid("nu and dt must be positive"));
    }
    newton.validate()?;
    if sys.dirichlet_dofs.iter().any(|&d| ic[d] != T::zero()) {
        return Err(RomError::invalid(
            "initial condition must vanish at the Dirichlet nodes",
        ));
    }
    let interior = sys.interior_dofs();
    let mut times = Vec::with_capacity(n_steps + 1);
    let mut states = Vec::with_capacity(n_steps + 1);
    let mut residuals = Vec::with_capacity(n_steps + 1);
    times.push(T::zero());
    states.push(ic.clone());
    residuals.push(T::zero());

    for step in 1..=n_steps {
        let prev = &states[step - 1];
        let mut u = prev.clone();
        let mut iterations = 0;
        let accepted = loop {
            let res = burgers_residual(sys, &u, prev, nu, dt);
            let norm = res.norm();
            if !norm.is_finite() {
                return Err(newton_failure(step, iterations, norm, &u));
            }
            if norm <= newton.abs_tol {
                break norm;
            }
            if iterations == newton.max_iter {
                return Err(newton_failure(step, iterations, norm, &u));
            }
            let jac = burgers_jacobian(sys, &u, nu, dt);
            let delta = jac.solve(&(-res))?;
            for (k, i) in interior.clone().enumerate() {
                u[i] += delta[k];
            }
            iterations += 1;
        };
        times.push(T::from_count(step) * dt);
        states.push(u);
        residuals.push(accepted);
    }
    Ok(FemTrajectory {
        times,
        states,
        residuals,
    })
}

fn newton_failure<T: Real>(
    step: usize,
    iterations: usize,
    residual: T,
    u: &DVector<T>,
) -> RomError {
    RomError::SolverFailure {
        step,
        iterations,
        residual: residual.as_f64(),
        iterate: u.iter().map(|v| v.as_f64()).collect(),
    }
}
