//! Small linear-algebra helpers: sparse products, a pivoted tridiagonal
//! solver for the 1D Newton systems, and dense SPD factorization wrappers.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use nalgebra_sparse::CsrMatrix;

use crate::error::{check_dim, RomError, RomResult};
use crate::scalar::Real;

/// `A x` for a CSR matrix.
pub fn spmv<T: Real>(a: &CsrMatrix<T>, x: &DVector<T>) -> DVector<T> {
    debug_assert_eq!(a.ncols(), x.len());
    DVector::from_iterator(
        a.nrows(),
        a.row_iter().map(|row| {
            row.col_indices()
                .iter()
                .zip(row.values())
                .fold(T::zero(), |acc, (&j, &v)| acc + v * x[j])
        }),
    )
}

/// `A X` for a CSR matrix and a dense right-hand side.
pub fn spmm<T: Real>(a: &CsrMatrix<T>, x: &DMatrix<T>) -> DMatrix<T> {
    debug_assert_eq!(a.ncols(), x.nrows());
    let mut out = DMatrix::zeros(a.nrows(), x.ncols());
    for (i, row) in a.row_iter().enumerate() {
        for (&j, &v) in row.col_indices().iter().zip(row.values()) {
            for k in 0..x.ncols() {
                out[(i, k)] += v * x[(j, k)];
            }
        }
    }
    out
}

/// `xᵀ A y`.
pub fn sparse_bilinear<T: Real>(a: &CsrMatrix<T>, x: &DVector<T>, y: &DVector<T>) -> T {
    x.dot(&spmv(a, y))
}

/// Norm induced by an SPD matrix, `sqrt(vᵀ A v)`.
pub fn energy_norm<T: Real>(a: &CsrMatrix<T>, v: &DVector<T>) -> T {
    sparse_bilinear(a, v, v).max(T::zero()).sqrt()
}

/// Entry `(i, j)` of a CSR matrix, zero when not stored.
pub fn csr_entry<T: Real>(a: &CsrMatrix<T>, i: usize, j: usize) -> T {
    a.get_entry(i, j)
        .map(|e| e.into_value())
        .unwrap_or_else(T::zero)
}

pub fn csr_to_dense<T: Real>(a: &CsrMatrix<T>) -> DMatrix<T> {
    let mut d = DMatrix::zeros(a.nrows(), a.ncols());
    for (i, j, &v) in a.triplet_iter() {
        d[(i, j)] += v;
    }
    d
}

/// Factors a dense SPD matrix, mapping failure to a numerical error.
pub fn cholesky<T: Real>(a: DMatrix<T>, what: &str) -> RomResult<Cholesky<T, Dyn>> {
    if !a.is_square() {
        return Err(RomError::invalid(format!("{what}: matrix is not square")));
    }
    Cholesky::new(a).ok_or_else(|| {
        RomError::Numerical(format!("{what}: matrix is not symmetric positive definite"))
    })
}

/// Dense LU solve of `A x = b`.
pub fn lu_solve<T: Real>(a: DMatrix<T>, b: &DVector<T>) -> Option<DVector<T>> {
    a.lu().solve(b)
}

/// Tridiagonal matrix stored by diagonals.
#[derive(Debug, Clone, PartialEq)]
pub struct Tridiagonal<T> {
    pub lower: Vec<T>,
    pub diag: Vec<T>,
    pub upper: Vec<T>,
}

impl<T: Real> Tridiagonal<T> {
    pub fn zeros(n: usize) -> Self {
        let off = n.saturating_sub(1);
        Self {
            lower: vec![T::zero(); off],
            diag: vec![T::zero(); n],
            upper: vec![T::zero(); off],
        }
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    /// Adds `v` at `(i, j)`; `|i - j|` must be at most one.
    pub fn add(&mut self, i: usize, j: usize, v: T) {
        if i == j {
            self.diag[i] += v;
        } else if j == i + 1 {
            self.upper[i] += v;
        } else if i == j + 1 {
            self.lower[j] += v;
        } else {
            panic!("({i}, {j}) outside the tridiagonal band");
        }
    }

    pub fn mul_vec(&self, x: &DVector<T>) -> DVector<T> {
        let n = self.dim();
        DVector::from_fn(n, |i, _| {
            let mut s = self.diag[i] * x[i];
            if i > 0 {
                s += self.lower[i - 1] * x[i - 1];
            }
            if i + 1 < n {
                s += self.upper[i] * x[i + 1];
            }
            s
        })
    }

    pub fn to_dense(&self) -> DMatrix<T> {
        let n = self.dim();
        let mut d = DMatrix::zeros(n, n);
        for i in 0..n {
            d[(i, i)] = self.diag[i];
            if i + 1 < n {
                d[(i, i + 1)] = self.upper[i];
                d[(i + 1, i)] = self.lower[i];
            }
        }
        d
    }

    /// Solves `A x = b` by LU with partial pivoting (the LAPACK `gttrf`/`gtts2`
    /// scheme, which fills one extra superdiagonal).
    pub fn solve(&self, b: &DVector<T>) -> RomResult<DVector<T>> {
        let n = self.dim();
        check_dim("tridiagonal right-hand side", b.len(), n)?;
        if n == 0 {
            return Ok(DVector::zeros(0));
        }
        let mut dl = self.lower.clone();
        let mut d = self.diag.clone();
        let mut du = self.upper.clone();
        let mut du2 = vec![T::zero(); n.saturating_sub(2)];
        let mut swapped = vec![false; n.saturating_sub(1)];

        for i in 0..n.saturating_sub(1) {
            if d[i].abs() >= dl[i].abs() {
                if d[i] != T::zero() {
                    let fact = dl[i] / d[i];
                    dl[i] = fact;
                    d[i + 1] -= fact * du[i];
                }
            } else {
                let fact = d[i] / dl[i];
                d[i] = dl[i];
                dl[i] = fact;
                let temp = du[i];
                du[i] = d[i + 1];
                d[i + 1] = temp - fact * d[i + 1];
                if i + 2 < n {
                    du2[i] = du[i + 1];
                    du[i + 1] = -fact * du[i + 1];
                }
                swapped[i] = true;
            }
        }
        if d.iter().any(|v| *v == T::zero() || !v.is_finite()) {
            return Err(RomError::Numerical("singular tridiagonal matrix".into()));
        }

        let mut x = b.clone();
        for i in 0..n - 1 {
            if swapped[i] {
                let temp = x[i];
                x[i] = x[i + 1];
                x[i + 1] = temp - dl[i] * x[i];
            } else {
                let xi = x[i];
                x[i + 1] -= dl[i] * xi;
            }
        }
        x[n - 1] /= d[n - 1];
        if n > 1 {
            x[n - 2] = (x[n - 2] - du[n - 2] * x[n - 1]) / d[n - 2];
        }
        for i in (0..n.saturating_sub(2)).rev() {
            x[i] = (x[i] - du[i] * x[i + 1] - du2[i] * x[i + 2]) / d[i];
        }
        Ok(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra_sparse::CooMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_tridiagonal(n: usize, rng: &mut ChaCha8Rng) -> Tridiagonal<f64> {
        let mut t = Tridiagonal::zeros(n);
        for v in t
            .lower
            .iter_mut()
            .chain(t.diag.iter_mut())
            .chain(t.upper.iter_mut())
        {
            *v = rng.random_range(-1.0..1.0);
        }
        t
    }

    #[test]
    fn tridiagonal_solve_matches_dense_lu() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in [1, 2, 3, 5, 17, 64] {
            let t = random_tridiagonal(n, &mut rng);
            let b = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
            let x = t.solve(&b).unwrap();
            let dense = t.to_dense().lu().solve(&b).unwrap();
            assert!(
                (&x - &dense).norm() <= 1e-9 * (1.0 + dense.norm()),
                "n = {n}"
            );
            assert!((t.mul_vec(&x) - &b).norm() <= 1e-9 * (1.0 + x.norm()));
        }
    }

    #[test]
    fn tridiagonal_pivots_on_zero_diagonal() {
        // [[0, 1], [1, 0]] needs a row swap.
        let t = Tridiagonal {
            lower: vec![1.0],
            diag: vec![0.0, 0.0],
            upper: vec![1.0],
        };
        let x = t.solve(&DVector::from_vec(vec![2.0, 3.0])).unwrap();
        assert_eq!(x.as_slice(), &[3.0, 2.0]);
    }

    #[test]
    fn tridiagonal_singular_is_reported() {
        let t = Tridiagonal {
            lower: vec![1.0],
            diag: vec![1.0, 1.0],
            upper: vec![1.0],
        };
        assert!(matches!(
            t.solve(&DVector::from_vec(vec![1.0, 1.0])),
            Err(RomError::Numerical(_))
        ));
    }

    #[test]
    fn sparse_products_match_dense() {
        let mut coo = CooMatrix::new(3, 3);
        coo.push(0, 0, 2.0);
        coo.push(0, 2, -1.0);
        coo.push(1, 1, 3.0);
        coo.push(2, 0, 4.0);
        coo.push(2, 0, 1.0);
        let a = CsrMatrix::from(&coo);
        let dense = csr_to_dense(&a);
        let x = DVector::from_vec(vec![1.0, -2.0, 0.5]);
        assert_eq!(spmv(&a, &x), &dense * &x);
        let xm = DMatrix::from_fn(3, 2, |i, j| (i + 2 * j) as f64);
        assert_eq!(spmm(&a, &xm), &dense * &xm);
        assert_eq!(csr_entry(&a, 2, 0), 5.0);
        assert_eq!(csr_entry(&a, 1, 0), 0.0);
    }
}
