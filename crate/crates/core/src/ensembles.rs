//! Random problem instances: coefficient families, Gaussian designs with a
//! prescribed covariance, Gaussian noise, and the covariance assumptions the
//! recovery guarantees rely on.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_4};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{linf_operator_norm, Cholesky};
use crate::matrix::{axpy, DenseMatrix};
use crate::rng::{tag, GaussianStream};
use crate::scalar::Scalar;
use crate::theory::{extreme_eigenvalues, SupportSet};

/// Coefficient family on the support rows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    /// Both tasks share `(1/√2)·1_s`.
    Identical,
    /// Second task `(1/√2)·1_{s/2} ⊗ (1, −1)`, orthogonal to the first.
    Orthonormal,
    /// Second task `(1/√2)·1_{s/4} ⊗ (1, 1, 1, −1)`, at 60° to the first.
    Intermediate,
    /// `1_{s/2} ⊗ B₁(α)`, rows alternating `(1/√2, 1/√2)` and `(cos(π/4+α), sin(π/4+α))`.
    B1Alpha { alpha: f64 },
    /// Caller-supplied s×K support block.
    Custom { b_s: DenseMatrix<f64> },
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::Identical => "identical",
            Family::Orthonormal => "orthonormal",
            Family::Intermediate => "intermediate",
            Family::B1Alpha { .. } => "b1_alpha",
            Family::Custom { .. } => "custom",
        }
    }

    /// ψ under an identity covariance, where a closed form is known.
    pub fn closed_form_psi(&self, s: usize) -> Option<f64> {
        let s = s as f64;
        match self {
            Family::Identical => Some(s),
            Family::Orthonormal => Some(s / 2.0),
            Family::Intermediate => Some(0.75 * s),
            Family::B1Alpha { alpha } => Some(s / 2.0 * (1.0 + alpha.cos().abs())),
            Family::Custom { .. } => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Covariance {
    Identity,
    /// `Σᵢⱼ = ρ^|i−j|`.
    Toeplitz { rho: f64 },
    Explicit(DenseMatrix<f64>),
}

impl Covariance {
    pub fn matrix<T: Scalar>(&self, p: usize) -> Result<DenseMatrix<T>> {
        match self {
            Covariance::Identity => Ok(DenseMatrix::identity(p)),
            Covariance::Toeplitz { rho } => {
                if !(rho.abs() < 1.0) {
                    return Err(Error::InvalidArgument(format!("Toeplitz rho must satisfy |rho| < 1, got {rho}")));
                }
                Ok(toeplitz(p, T::lit(*rho)))
            }
            Covariance::Explicit(m) => {
                if m.shape() != (p, p) {
                    return Err(Error::ShapeMismatch(format!(
                        "explicit covariance is {}x{}, expected {p}x{p}",
                        m.rows(),
                        m.cols()
                    )));
                }
                Ok(m.cast())
            }
        }
    }
}

/// `Σᵢⱼ = ρ^|i−j|`.
pub fn toeplitz<T: Scalar>(p: usize, rho: T) -> DenseMatrix<T> {
    DenseMatrix::from_fn(p, p, |i, j| rho.powi(i.abs_diff(j) as i32))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Placement {
    /// Support is `{0, …, s−1}`.
    #[default]
    FirstS,
    /// Support drawn uniformly from the `s`-subsets, keyed by the seed.
    Random,
}

/// Recipe for one family of regression problems.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub p: usize,
    pub s: usize,
    pub k: usize,
    pub sigma: f64,
    pub family: Family,
    pub covariance: Covariance,
    pub placement: Placement,
}

impl EnsembleSpec {
    /// Standard Gaussian design, support on the first `s` rows, two tasks.
    pub fn standard(family: Family, p: usize, s: usize, sigma: f64) -> Self {
        let k = match &family {
            Family::Custom { b_s } => b_s.cols(),
            _ => 2,
        };
        Self {
            p,
            s,
            k,
            sigma,
            family,
            covariance: Covariance::Identity,
            placement: Placement::FirstS,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.s == 0 || self.s > self.p {
            return Err(Error::BadFamilyShape(format!(
                "need 1 <= s <= p, got s = {}, p = {}",
                self.s, self.p
            )));
        }
        if self.k == 0 {
            return Err(Error::BadFamilyShape("K must be positive".into()));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::InvalidArgument(format!("noise level must be >= 0, got {}", self.sigma)));
        }
        match &self.family {
            Family::Identical | Family::Orthonormal | Family::Intermediate => {
                if !self.s.is_multiple_of(4) {
                    return Err(Error::BadFamilyShape(format!(
                        "family {} needs s divisible by 4, got {}",
                        self.family.name(),
                        self.s
                    )));
                }
                if self.k != 2 {
                    return Err(Error::BadFamilyShape(format!(
                        "family {} has K = 2, got {}",
                        self.family.name(),
                        self.k
                    )));
                }
            }
            Family::B1Alpha { alpha } => {
                if !self.s.is_multiple_of(2) {
                    return Err(Error::BadFamilyShape(format!("b1_alpha needs even s, got {}", self.s)));
                }
                if self.k != 2 {
                    return Err(Error::BadFamilyShape(format!("b1_alpha has K = 2, got {}", self.k)));
                }
                if !alpha.is_finite() {
                    return Err(Error::InvalidArgument("alpha must be finite".into()));
                }
            }
            Family::Custom { b_s } => {
                if b_s.shape() != (self.s, self.k) {
                    return Err(Error::BadFamilyShape(format!(
                        "custom block is {}x{}, expected {}x{}",
                        b_s.rows(),
                        b_s.cols(),
                        self.s,
                        self.k
                    )));
                }
            }
        }
        Ok(())
    }

    /// s×K block of coefficients on the support, in support order.
    pub fn support_block<T: Scalar>(&self) -> Result<DenseMatrix<T>> {
        self.validate()?;
        let h = T::lit(FRAC_1_SQRT_2);
        let s = self.s;
        let block = match &self.family {
            Family::Identical => DenseMatrix::from_fn(s, 2, |_, _| h),
            Family::Orthonormal => {
                DenseMatrix::from_fn(s, 2, |i, j| if j == 1 && i % 2 == 1 { -h } else { h })
            }
            Family::Intermediate => {
                DenseMatrix::from_fn(s, 2, |i, j| if j == 1 && i % 4 == 3 { -h } else { h })
            }
            Family::B1Alpha { alpha } => {
                let angle = T::lit(FRAC_PI_4 + alpha);
                DenseMatrix::from_fn(s, 2, |i, j| match (i % 2, j) {
                    (0, _) => h,
                    (_, 0) => angle.cos(),
                    _ => angle.sin(),
                })
            }
            Family::Custom { b_s } => b_s.cast(),
        };
        Ok(block)
    }

    pub fn covariance_matrix<T: Scalar>(&self) -> Result<DenseMatrix<T>> {
        self.covariance.matrix(self.p)
    }

    /// Support rows for this spec; `seed` is only consulted for random placement.
    pub fn support(&self, seed: u64) -> Result<SupportSet> {
        match self.placement {
            Placement::FirstS => SupportSet::first(self.s, self.p),
            Placement::Random => {
                let mut stream = GaussianStream::new(seed, tag::SUPPORT, 0);
                let mut pool: Vec<usize> = (0..self.p).collect();
                for i in 0..self.s {
                    let j = i + stream.below((self.p - i) as u64) as usize;
                    pool.swap(i, j);
                }
                pool.truncate(self.s);
                SupportSet::new(pool, self.p)
            }
        }
    }
}

/// Full coefficient matrix together with its row support.
#[derive(Clone, Debug, PartialEq)]
pub struct Coefficients<T> {
    pub b: DenseMatrix<T>,
    pub support: SupportSet,
}

impl<T: Scalar> Coefficients<T> {
    /// Coefficients restricted to the support rows.
    pub fn support_block(&self) -> DenseMatrix<T> {
        self.b.select_rows(self.support.indices())
    }
}

/// p×K coefficient matrix B* whose nonzero rows are the family block.
pub fn make_coefficients<T: Scalar>(spec: &EnsembleSpec, seed: u64) -> Result<Coefficients<T>> {
    let block = spec.support_block::<T>()?;
    let support = spec.support(seed)?;
    let mut b = DenseMatrix::zeros(spec.p, spec.k);
    for (r, &i) in support.indices().iter().enumerate() {
        b.row_mut(i).copy_from_slice(block.row(r));
    }
    Ok(Coefficients { b, support })
}

/// Draws rows i.i.d. from `N(0, Σ)` as `G·Lᵀ` with `Σ = L·Lᵀ`.
#[derive(Clone, Debug)]
pub struct DesignSampler<T> {
    p: usize,
    // `None` for the identity covariance
    factor: Option<DenseMatrix<T>>,
}

impl<T: Scalar> DesignSampler<T> {
    pub fn new(sigma: &DenseMatrix<T>) -> Result<Self> {
        let p = sigma.rows();
        if *sigma == DenseMatrix::identity(p) {
            return Ok(Self { p, factor: None });
        }
        let l = Cholesky::new(sigma)?.into_factor();
        Ok(Self { p, factor: Some(l) })
    }

    pub fn identity(p: usize) -> Self {
        Self { p, factor: None }
    }

    pub fn sample(&self, n: usize, seed: u64) -> DenseMatrix<T> {
        let mut stream = GaussianStream::new(seed, tag::DESIGN, 0);
        let g: Vec<T> = (0..n * self.p).map(|_| T::lit(stream.normal())).collect();
        let g = DenseMatrix::from_vec_unchecked(n, self.p, g);
        match &self.factor {
            None => g,
            Some(l) => {
                // row_i(X) = row_i(G)·Lᵀ, i.e. X[i, a] = Σ_{b ≤ a} G[i, b]·L[a, b]
                let mut x = DenseMatrix::zeros(n, self.p);
                let lt = l.transpose();
                for i in 0..n {
                    let out = x.row_mut(i);
                    for (b, &gv) in g.row(i).iter().enumerate() {
                        axpy(gv, lt.row(b), out);
                    }
                }
                x
            }
        }
    }
}

/// n×p design with i.i.d. `N(0, Σ)` rows, deterministic in `seed`.
pub fn sample_design<T: Scalar>(n: usize, sigma: &DenseMatrix<T>, seed: u64) -> Result<DenseMatrix<T>> {
    if n == 0 {
        return Err(Error::InvalidArgument("sample size must be positive".into()));
    }
    Ok(DesignSampler::new(sigma)?.sample(n, seed))
}

/// n×K noise with i.i.d. `N(0, σ²)` entries, deterministic in `seed`.
pub fn sample_noise<T: Scalar>(n: usize, k: usize, sigma: T, seed: u64) -> DenseMatrix<T> {
    let mut stream = GaussianStream::new(seed, tag::NOISE, 0);
    let data = (0..n * k).map(|_| sigma * T::lit(stream.normal())).collect();
    DenseMatrix::from_vec_unchecked(n, k, data)
}

/// `Y = X·B* + W`.
pub fn assemble_observations<T: Scalar>(
    x: &DenseMatrix<T>,
    bstar: &DenseMatrix<T>,
    w: &DenseMatrix<T>,
) -> Result<DenseMatrix<T>> {
    x.matmul(bstar)?.try_add(w)
}

/// Eigen-spectrum and incoherence constants of a covariance relative to a support.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssumptionReport<T> {
    pub cmin: T,
    pub cmax: T,
    pub incoherence_gamma: T,
    pub dmax: T,
    pub a1_ok: bool,
    pub a2_ok: bool,
    pub a3_ok: bool,
}

/// Evaluates bounded eigenspectrum, mutual incoherence and self-incoherence.
pub fn check_assumptions<T: Scalar>(sigma: &DenseMatrix<T>, support: &SupportSet) -> Result<AssumptionReport<T>> {
    let p = sigma.rows();
    if !sigma.is_square() || support.ambient_p() != p {
        return Err(Error::ShapeMismatch(format!(
            "covariance {}x{} against support over p = {}",
            sigma.rows(),
            sigma.cols(),
            support.ambient_p()
        )));
    }
    if support.is_empty() || support.len() == p {
        return Err(Error::InvalidArgument(
            "support must be nonempty and a proper subset".into(),
        ));
    }
    // full-matrix factorization surfaces NotPositiveDefinite for Σ itself
    Cholesky::new(sigma)?;
    let s_idx = support.indices();
    let c_idx = support.complement();
    let sigma_ss = sigma.select(s_idx, s_idx);
    let chol = Cholesky::new(&sigma_ss)?;
    let (cmin, cmax) = extreme_eigenvalues(&sigma_ss)?;
    let inv = chol.inverse();
    let dmax = linf_operator_norm(&inv);
    let cross = sigma.select(&c_idx, s_idx).matmul(&inv)?;
    let gamma = (T::one() - linf_operator_norm(&cross)).min(T::one());
    Ok(AssumptionReport {
        cmin,
        cmax,
        incoherence_gamma: gamma,
        dmax,
        a1_ok: cmin > T::zero() && cmin <= cmax && cmax.is_finite(),
        a2_ok: gamma > T::zero(),
        a3_ok: dmax.is_finite(),
    })
}
