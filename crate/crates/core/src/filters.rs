//! Reduced differential filter and approximate deconvolution.
//!
//! The filter `G = (I - δ²Δ)⁻¹` acts on coefficients through
//! `(M + δ²S) c̄ = M c + g`. The deconvolution operators approximate `G⁻¹`:
//!
//! * van Cittert: `N` Richardson sweeps `c ← c + (c̄ - G c)` from `c = c̄`,
//!   i.e. the truncated Neumann series `Σ_{n≤N} (I - G)ⁿ c̄`;
//! * Tikhonov (biharmonic term dropped): `[(1+μ)M + 2μδ²S] c_AD = (M + δ²S) c̄`;
//! * Lavrentiev: `[(1+μ)M + μδ²S] c_AD = (M + δ²S) c̄`.
//!
//! When the basis carries a centering `U`, every system is written for the
//! full fields `U + Σ c_j φ_j`, which adds constant offsets built from
//! `(φ_i, U)` and `(∇φ_i, ∇U)` to the right-hand sides. The maps stay
//! affine in their input and reduce to the forms above when `U = 0`.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{check_dim, RomError, RomResult};
use crate::linalg::cholesky;
use crate::operators::RomOperators;
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterConfig<T> {
    pub delta: T,
}

impl<T: Real> FilterConfig<T> {
    pub fn new(delta: T) -> RomResult<Self> {
        let cfg = Self { delta };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> RomResult<()> {
        if self.delta >= T::zero() && self.delta.is_finite() {
            Ok(())
        } else {
            Err(RomError::invalid(format!(
                "filter radius must be finite and nonnegative, got {}",
                self.delta
            )))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AdMethod<T> {
    VanCittert {
        order: usize,
    },
    Tikhonov {
        mu: T,
    },
    /// `mu = 0` is allowed and inverts the filter exactly.
    Lavrentiev {
        mu: T,
    },
}

impl<T: Real> AdMethod<T> {
    pub fn name(&self) -> &'static str {
        match self {
            AdMethod::VanCittert { .. } => "van_cittert",
            AdMethod::Tikhonov { .. } => "tikhonov",
            AdMethod::Lavrentiev { .. } => "lavrentiev",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdConfig<T> {
    pub method: AdMethod<T>,
    pub filter: FilterConfig<T>,
}

impl<T: Real> AdConfig<T> {
    pub fn validate(&self) -> RomResult<()> {
        self.filter.validate()?;
        match self.method {
            AdMethod::VanCittert { .. } => Ok(()),
            AdMethod::Tikhonov { mu } if mu > T::zero() && mu.is_finite() => Ok(()),
            AdMethod::Lavrentiev { mu } if mu >= T::zero() && mu.is_finite() => Ok(()),
            AdMethod::Tikhonov { mu } => Err(RomError::invalid(format!(
                "Tikhonov parameter must be positive, got {mu}"
            ))),
            AdMethod::Lavrentiev { mu } => Err(RomError::invalid(format!(
                "Lavrentiev parameter must be nonnegative, got {mu}"
            ))),
        }
    }
}

/// Factored reduced filter for one radius.
#[derive(Debug, Clone)]
pub struct DifferentialFilter<T: Real> {
    delta: T,
    mass: DMatrix<T>,
    system: DMatrix<T>,
    factor: Cholesky<T, Dyn>,
    offset: DVector<T>,
}

impl<T: Real> DifferentialFilter<T> {
    pub fn new(ops: &RomOperators<T>, cfg: FilterConfig<T>) -> RomResult<Self> {
        cfg.validate()?;
        let d2 = cfg.delta * cfg.delta;
        let system = &ops.mass + &ops.stiffness * d2;
        let factor = cholesky(system.clone(), "filter matrix M + δ²S")?;
        Ok(Self {
            delta: cfg.delta,
            mass: ops.mass.clone(),
            system,
            factor,
            offset: ops.filter_offset(cfg.delta),
        })
    }

    pub fn delta(&self) -> T {
        self.delta
    }

    /// `M + δ²S`.
    pub fn system(&self) -> &DMatrix<T> {
        &self.system
    }

    pub fn offset(&self) -> &DVector<T> {
        &self.offset
    }

    /// Filtered coefficients `c̄`.
    pub fn apply(&self, c: &DVector<T>) -> DVector<T> {
        self.factor.solve(&(&self.mass * c + &self.offset))
    }

    /// Linear part of [`apply`](Self::apply) (no centering offset).
    pub fn apply_homogeneous(&self, c: &DVector<T>) -> DVector<T> {
        self.factor.solve(&(&self.mass * c))
    }
}

#[derive(Debug, Clone)]
enum DeconvolutionKind<T: Real> {
    VanCittert(usize),
    /// `A c_AD = (M + δ²S) c̄ + h` for Tikhonov and Lavrentiev.
    Shifted {
        factor: Cholesky<T, Dyn>,
        offset: DVector<T>,
    },
}

/// Factored approximate-deconvolution operator, bundled with the filter it
/// inverts.
#[derive(Debug, Clone)]
pub struct Deconvolution<T: Real> {
    filter: DifferentialFilter<T>,
    kind: DeconvolutionKind<T>,
}

impl<T: Real> Deconvolution<T> {
    pub fn new(ops: &RomOperators<T>, cfg: &AdConfig<T>) -> RomResult<Self> {
        cfg.validate()?;
        let filter = DifferentialFilter::new(ops, cfg.filter)?;
        let d2 = cfg.filter.delta * cfg.filter.delta;
        let one = T::one();
        // (φ_i, A U) - (φ_i, (I - δ²Δ) U) with A = (1+μ)I - s μ δ² Δ
        let shifted = |mu: T, s: T| -> RomResult<DeconvolutionKind<T>> {
            let a = &ops.mass * (one + mu) + &ops.stiffness * (s * mu * d2);
            let factor = cholesky(a, "deconvolution matrix")?;
            let offset = &ops.center_mass * (-mu) + &ops.center_stiffness * ((one - s * mu) * d2);
            Ok(DeconvolutionKind::Shifted { factor, offset })
        };
        let kind = match cfg.method {
            AdMethod::VanCittert { order } => DeconvolutionKind::VanCittert(order),
            AdMethod::Tikhonov { mu } => shifted(mu, T::lit(2.0))?,
            AdMethod::Lavrentiev { mu } => shifted(mu, one)?,
        };
        Ok(Self { filter, kind })
    }

    pub fn filter(&self) -> &DifferentialFilter<T> {
        &self.filter
    }

    /// `c_AD` from filtered coefficients `c̄`.
    pub fn apply(&self, c_bar: &DVector<T>) -> DVector<T> {
        self.apply_impl(c_bar, false)
    }

    /// Linear part of [`apply`](Self::apply).
    pub fn apply_homogeneous(&self, c_bar: &DVector<T>) -> DVector<T> {
        self.apply_impl(c_bar, true)
    }

    fn apply_impl(&self, c_bar: &DVector<T>, homogeneous: bool) -> DVector<T> {
        match &self.kind {
            DeconvolutionKind::VanCittert(order) => {
                let mut c_ad = c_bar.clone();
                for _ in 0..*order {
                    let smoothed = if homogeneous {
                        self.filter.apply_homogeneous(&c_ad)
                    } else {
                        self.filter.apply(&c_ad)
                    };
                    c_ad += c_bar - smoothed;
                }
                c_ad
            }
            DeconvolutionKind::Shifted { factor, offset } => {
                let mut rhs = self.filter.system() * c_bar;
                if !homogeneous {
                    rhs += offset;
                }
                factor.solve(&rhs)
            }
        }
    }
}

pub fn apply_filter<T: Real>(
    ops: &RomOperators<T>,
    cfg: FilterConfig<T>,
    c: &DVector<T>,
) -> RomResult<DVector<T>> {
    check_dim("coefficient vector", c.len(), ops.r())?;
    Ok(DifferentialFilter::new(ops, cfg)?.apply(c))
}

fn deconvolve_checked<T: Real>(
    ops: &RomOperators<T>,
    cfg: &AdConfig<T>,
    c_bar: &DVector<T>,
    expected: &str,
) -> RomResult<DVector<T>> {
    if cfg.method.name() != expected {
        return Err(RomError::invalid(format!(
            "expected a {expected} configuration, got {}",
            cfg.method.name()
        )));
    }
    check_dim("filtered coefficient vector", c_bar.len(), ops.r())?;
    Ok(Deconvolution::new(ops, cfg)?.apply(c_bar))
}

pub fn deconvolve_van_cittert<T: Real>(
    ops: &RomOperators<T>,
    cfg: &AdConfig<T>,
    c_bar: &DVector<T>,
) -> RomResult<DVector<T>> {
    deconvolve_checked(ops, cfg, c_bar, "van_cittert")
}

pub fn deconvolve_tikhonov<T: Real>(
    ops: &RomOperators<T>,
    cfg: &AdConfig<T>,
    c_bar: &DVector<T>,
) -> RomResult<DVector<T>> {
    deconvolve_checked(ops, cfg, c_bar, "tikhonov")
}

pub fn deconvolve_lavrentiev<T: Real>(
    ops: &RomOperators<T>,
    cfg: &AdConfig<T>,
    c_bar: &DVector<T>,
) -> RomResult<DVector<T>> {
    deconvolve_checked(ops, cfg, c_bar, "lavrentiev")
}
