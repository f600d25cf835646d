//! Closed-form quantities of the sample-complexity theory: the row normalization
//! ζ, the sparsity-overlap function ψ, the rescaled sample size θ and the
//! bounds and special cases built from them.
//!
//! Logarithms are natural logarithms throughout.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{largest_eigenvalue_psd, solve_spd, spectral_norm, Cholesky};
use crate::matrix::{norm2, DenseMatrix};
use crate::scalar::Scalar;

/// Row norms at or below this are treated as zero by [`zeta`].
pub const ZETA_ZERO_TOL: f64 = 1e-12;

/// Entries with magnitude at or below this count as exact zeros in the
/// sign-pattern formulas of [`psi_two_by_two`] and in per-column supports.
pub const ENTRY_ZERO_TOL: f64 = 1e-12;

/// Sorted set of row indices into `{0, …, p−1}`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SupportSet {
    indices: Vec<usize>,
    ambient_p: usize,
}

impl SupportSet {
    pub fn new(mut indices: Vec<usize>, ambient_p: usize) -> Result<Self> {
        if ambient_p == 0 {
            return Err(Error::InvalidArgument("ambient dimension must be positive".into()));
        }
        indices.sort_unstable();
        if indices.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidArgument("support indices must be distinct".into()));
        }
        if let Some(&last) = indices.last() {
            if last >= ambient_p {
                return Err(Error::InvalidArgument(format!(
                    "support index {last} out of range for p = {ambient_p}"
                )));
            }
        }
        Ok(Self { indices, ambient_p })
    }

    /// `{0, …, s−1}`.
    pub fn first(s: usize, ambient_p: usize) -> Result<Self> {
        Self::new((0..s).collect(), ambient_p)
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn ambient_p(&self) -> usize {
        self.ambient_p
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.indices.binary_search(&i).is_ok()
    }

    /// Indices of `{0, …, p−1}` not in the set, ascending.
    pub fn complement(&self) -> Vec<usize> {
        (0..self.ambient_p).filter(|&i| !self.contains(i)).collect()
    }

    pub fn union(&self, other: &Self) -> Result<Self> {
        if self.ambient_p != other.ambient_p {
            return Err(Error::ShapeMismatch(format!(
                "supports over p = {} and p = {}",
                self.ambient_p, other.ambient_p
            )));
        }
        let mut all = self.indices.clone();
        all.extend(other.indices.iter().copied().filter(|i| !self.contains(*i)));
        Self::new(all, self.ambient_p)
    }
}

/// Matrix of unit-ℓ2 rows `βᵢ / ‖βᵢ‖₂`.
pub fn zeta<T: Scalar>(b_s: &DenseMatrix<T>, zero_tol: T) -> Result<DenseMatrix<T>> {
    let mut out = b_s.clone();
    for i in 0..out.rows() {
        let nrm = norm2(out.row(i));
        if nrm <= zero_tol {
            return Err(Error::ZeroRow(i));
        }
        out.row_mut(i).iter_mut().for_each(|v| *v /= nrm);
    }
    Ok(out)
}

/// `ζ(B_S)ᵀ Σ_SS⁻¹ ζ(B_S)`, the K×K matrix whose spectral norm is ψ.
pub fn overlap_matrix<T: Scalar>(
    b_s: &DenseMatrix<T>,
    sigma_ss: &DenseMatrix<T>,
) -> Result<DenseMatrix<T>> {
    if sigma_ss.rows() != b_s.rows() {
        return Err(Error::ShapeMismatch(format!(
            "B_S has {} rows but Σ_SS is {}x{}",
            b_s.rows(),
            sigma_ss.rows(),
            sigma_ss.cols()
        )));
    }
    let z = zeta(b_s, T::lit(ZETA_ZERO_TOL))?;
    let sinv_z = solve_spd(sigma_ss, &z)?;
    let m = z.tr_matmul(&sinv_z)?;
    // symmetrize away round-off so the result is an exact PSD input for later factorizations
    Ok(DenseMatrix::from_fn(m.rows(), m.cols(), |i, j| {
        (m.get(i, j) + m.get(j, i)) * T::lit(0.5)
    }))
}

/// Sparsity-overlap function ψ(B) = ‖ζ(B_S)ᵀ Σ_SS⁻¹ ζ(B_S)‖₂.
pub fn sparsity_overlap<T: Scalar>(b_s: &DenseMatrix<T>, sigma_ss: &DenseMatrix<T>) -> Result<T> {
    spectral_norm(&overlap_matrix(b_s, sigma_ss)?)
}

/// Rescaled sample size θ = n / (2 ψ log(p − s)).
pub fn sample_complexity_theta<T: Scalar>(n: usize, p: usize, s: usize, psi: T) -> Result<T> {
    if s == 0 || s >= p {
        return Err(Error::InvalidArgument(format!("need p > s >= 1, got p = {p}, s = {s}")));
    }
    if p - s < 2 {
        return Err(Error::DegenerateLogArgument((p - s) as f64));
    }
    if !(psi > T::zero()) {
        return Err(Error::InvalidArgument(format!("psi must be positive, got {psi}")));
    }
    Ok(T::lit(n as f64) / (T::lit(2.0) * psi * T::lit(((p - s) as f64).ln())))
}

/// Bracket `s/(Cmax·K) ≤ ψ ≤ s/Cmin` valid whenever the eigenvalues of Σ_SS
/// lie in `[Cmin, Cmax]`.
pub fn psi_bounds<T: Scalar>(s: usize, k: usize, cmin: T, cmax: T) -> (T, T) {
    let s = T::lit(s as f64);
    (s / (cmax * T::lit(k as f64)), s / cmin)
}

/// ψ for the two-row, two-task correlated design family.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwoByTwo<T> {
    pub psi_group: T,
    pub psi_col1: T,
    pub psi_col2: T,
    pub mu_plus: T,
    pub mu_minus: T,
}

impl<T: Scalar> TwoByTwo<T> {
    /// `max(0, ψ_group − max(ψ_col1, ψ_col2))`: how far the group penalty is worse
    /// than the per-task Lasso.
    pub fn violation(&self) -> T {
        (self.psi_group - self.psi_col1.max(self.psi_col2)).max(T::zero())
    }
}

fn nonzero<T: Scalar>(x: T) -> bool {
    x.abs() > T::lit(ENTRY_ZERO_TOL)
}

fn sign<T: Scalar>(x: T) -> T {
    if nonzero(x) {
        x.signum()
    } else {
        T::zero()
    }
}

fn indicator<T: Scalar>(b: bool) -> T {
    if b {
        T::one()
    } else {
        T::zero()
    }
}

/// Closed forms for `ζ(B_S) = [[cos θ₁, sin θ₁], [cos θ₂, sin θ₂]]` and
/// `Σ_SS⁻¹ = [[1, ρ], [ρ, 1]]`.
///
/// The per-column values use the sign vectors of each column against the full
/// `Σ_SS⁻¹`; an entry with magnitude at most [`ENTRY_ZERO_TOL`] counts as zero.
pub fn psi_two_by_two<T: Scalar>(theta1: T, theta2: T, rho: T) -> Result<TwoByTwo<T>> {
    if !(rho.abs() < T::one()) {
        return Err(Error::InvalidArgument(format!("|rho| must be < 1, got {rho}")));
    }
    let one = T::one();
    let two = T::lit(2.0);
    let c = (theta1 - theta2).cos();
    let mu_plus = (one + rho) * (one + c);
    let mu_minus = (one - rho) * (one - c);
    let (c1, c2, s1, s2) = (theta1.cos(), theta2.cos(), theta1.sin(), theta2.sin());
    let psi_col1 = indicator::<T>(nonzero(c1)) + indicator::<T>(nonzero(c2))
        + two * rho * sign(c1) * sign(c2);
    let psi_col2 = indicator::<T>(nonzero(s1)) + indicator::<T>(nonzero(s2))
        + two * rho * sign(s1) * sign(s2);
    Ok(TwoByTwo {
        psi_group: mu_plus.max(mu_minus),
        psi_col1,
        psi_col2,
        mu_plus,
        mu_minus,
    })
}

/// Explicit `(ζ(B_S), Σ_SS)` pair of the two-by-two family.
pub fn two_by_two_instance<T: Scalar>(
    theta1: T,
    theta2: T,
    rho: T,
) -> Result<(DenseMatrix<T>, DenseMatrix<T>)> {
    if !(rho.abs() < T::one()) {
        return Err(Error::InvalidArgument(format!("|rho| must be < 1, got {rho}")));
    }
    let b = DenseMatrix::new(2, 2, vec![theta1.cos(), theta1.sin(), theta2.cos(), theta2.sin()])?;
    let det = T::one() - rho * rho;
    let sigma = DenseMatrix::new(2, 2, vec![T::one() / det, -rho / det, -rho / det, T::one() / det])?;
    Ok((b, sigma))
}

/// Rows of column `k` whose entries are nonzero.
pub fn column_support<T: Scalar>(b: &DenseMatrix<T>, k: usize) -> Vec<usize> {
    (0..b.rows()).filter(|&i| nonzero(b.get(i, k))).collect()
}

/// ψ of the single task in column `k`, i.e. `z_kᵀ (Σ_{S_k S_k})⁻¹ z_k` with `z_k`
/// the sign vector of the column on its own support `S_k`.
pub fn column_psi<T: Scalar>(b: &DenseMatrix<T>, sigma: &DenseMatrix<T>, k: usize) -> Result<T> {
    let sk = column_support(b, k);
    if sk.is_empty() {
        return Err(Error::EmptyColumnSupport(k));
    }
    let col = b.select(&sk, &[k]);
    sparsity_overlap(&col, &sigma.select(&sk, &sk))
}

/// `z_kᵀ Σ_SS⁻¹ z_k` with `z_k` the sign vector of column `k` of `b_s` on the
/// whole support `S` (zero where the column vanishes).
///
/// This is column `k`'s diagonal entry of the overlap matrix whenever every
/// row of `b_s` has a single nonzero entry, and is the per-task quantity in the
/// closed forms of [`psi_two_by_two`].
pub fn column_overlap<T: Scalar>(b_s: &DenseMatrix<T>, sigma_ss: &DenseMatrix<T>, k: usize) -> Result<T> {
    if sigma_ss.shape() != (b_s.rows(), b_s.rows()) {
        return Err(Error::ShapeMismatch(format!(
            "B_S has {} rows but Σ_SS is {}x{}",
            b_s.rows(),
            sigma_ss.rows(),
            sigma_ss.cols()
        )));
    }
    let z = DenseMatrix::from_fn(b_s.rows(), 1, |i, _| sign(b_s.get(i, k)));
    if z.as_slice().iter().all(|v| *v == T::zero()) {
        return Err(Error::EmptyColumnSupport(k));
    }
    let sinv_z = solve_spd(sigma_ss, &z)?;
    Ok(z.tr_matmul(&sinv_z)?.get(0, 0))
}

/// `maxₖ ψ(β⁽ᵏ⁾)·log(p − sₖ)`: the sample-size scale at which separate per-task
/// Lasso fits recover their supports, up to a design-dependent constant that is
/// deliberately omitted.
pub fn ordinary_lasso_complexity<T: Scalar>(b: &DenseMatrix<T>, sigma: &DenseMatrix<T>) -> Result<T> {
    let p = b.rows();
    if sigma.shape() != (p, p) {
        return Err(Error::ShapeMismatch(format!(
            "Σ is {}x{} but B has {p} rows",
            sigma.rows(),
            sigma.cols()
        )));
    }
    let mut worst = T::zero();
    for k in 0..b.cols() {
        let sk = column_support(b, k).len();
        if sk == 0 {
            return Err(Error::EmptyColumnSupport(k));
        }
        if p < sk + 2 {
            return Err(Error::DegenerateLogArgument((p - sk) as f64));
        }
        let psi = column_psi(b, sigma, k)?;
        worst = worst.max(psi * T::lit(((p - sk) as f64).ln()));
    }
    Ok(worst)
}

/// Smallest ℓ2 row norm, `b*_min`.
pub fn bmin<T: Scalar>(b_s: &DenseMatrix<T>) -> T {
    b_s.row_iter().map(norm2).fold(T::infinity(), T::min)
}

/// ψ for `1_{s/2} ⊗ B₁(α)` under an identity covariance: `(s/2)(1 + |cos α|)`.
pub fn b1_alpha_psi<T: Scalar>(s: usize, alpha: T) -> T {
    T::lit(s as f64 / 2.0) * (T::one() + alpha.cos().abs())
}

/// Extreme eigenvalues `(Cmin, Cmax)` of an SPD matrix, by power iteration on the
/// matrix and on its inverse.
pub fn extreme_eigenvalues<T: Scalar>(a: &DenseMatrix<T>) -> Result<(T, T)> {
    let chol = Cholesky::new(a)?;
    let cmax = largest_eigenvalue_psd(a)?;
    let inv = chol.inverse();
    let inv = DenseMatrix::from_fn(inv.rows(), inv.cols(), |i, j| {
        (inv.get(i, j) + inv.get(j, i)) * T::lit(0.5)
    });
    let cmin = T::one() / largest_eigenvalue_psd(&inv)?;
    Ok((cmin, cmax))
}

/// Summary of the theory for one coefficient matrix and covariance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TheoryReport<T> {
    pub psi: T,
    pub theta: T,
    pub psi_lower: T,
    pub psi_upper: T,
    pub bmin: T,
}

impl<T: Scalar> TheoryReport<T> {
    /// `b_s` is the s×K restriction of B* to its support, `sigma_ss` the matching
    /// block of the covariance, `n` the sample size and `p` the ambient dimension.
    pub fn compute(b_s: &DenseMatrix<T>, sigma_ss: &DenseMatrix<T>, n: usize, p: usize) -> Result<Self> {
        let psi = sparsity_overlap(b_s, sigma_ss)?;
        let theta = sample_complexity_theta(n, p, b_s.rows(), psi)?;
        let (cmin, cmax) = extreme_eigenvalues(sigma_ss)?;
        let (psi_lower, psi_upper) = psi_bounds(b_s.rows(), b_s.cols(), cmin, cmax);
        Ok(Self {
            psi,
            theta,
            psi_lower,
            psi_upper,
            bmin: bmin(b_s),
        })
    }
}
