//! Primal-dual witness construction for exact support recovery.
//!
//! Given the true support `S`, the witness fixes `B̂_{Sᶜ} = 0`, solves the
//! group Lasso restricted to `S`, recovers the dual block `Ẑ_S` from the
//! stationarity condition and then checks whether the off-support dual rows
//! are strictly feasible. When both events below hold, `[B̂_S; 0]` is the unique
//! optimum of the full program and its row support is exactly `S`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{linf_l2, spectral_norm, Cholesky};
use crate::matrix::{norm2, DenseMatrix};
use crate::rng::{tag, GaussianStream};
use crate::scalar::Scalar;
use crate::solver::{restricted_gram, restricted_group_lasso, SolveError, SolverConfig};
use crate::theory::{bmin, sparsity_overlap, zeta, SupportSet, ZETA_ZERO_TOL};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Scalar"))]
pub struct WitnessReport<T> {
    pub b_hat_s: DenseMatrix<T>,
    pub z_hat_s: DenseMatrix<T>,
    /// `B̂_S − B*_S`.
    pub u_s: DenseMatrix<T>,
    pub v_sc: DenseMatrix<T>,
    /// `‖U_S‖_{ℓ∞/ℓ2} ≤ b*_min / 2`.
    pub event_u: bool,
    /// `‖V_Sᶜ‖_{ℓ∞/ℓ2} < λ`.
    pub event_v: bool,
    /// `λ − ‖V_Sᶜ‖_{ℓ∞/ℓ2}`.
    pub strict_dual_feasibility_margin: T,
    pub m_n_spectral: T,
    /// `None` when some `‖Δᵢ‖₂ > 1/2` and the perturbation bound does not apply.
    pub zeta_bound_ok: Option<bool>,
    /// `‖Ẑ_S − ζ(B̂_S)‖_{ℓ∞/ℓ2}`, or `None` if a row of `B̂_S` vanished.
    pub zeta_discrepancy: Option<T>,
    /// `‖Σ̂_SS·U_S − X_SᵀW/n + λ·Ẑ_S‖_max`.
    pub stationarity_residual: T,
    pub lambda: T,
    pub bmin: T,
}

impl<T: Scalar> WitnessReport<T> {
    /// Both witness events hold, so the restricted solution certifies exact recovery.
    pub fn certifies_recovery(&self) -> bool {
        self.event_u && self.event_v
    }

    /// `[B̂_S; 0]` scattered back to a p×K matrix.
    pub fn full_estimate(&self, support: &SupportSet) -> DenseMatrix<T> {
        let mut b = DenseMatrix::zeros(support.ambient_p(), self.b_hat_s.cols());
        for (r, &i) in support.indices().iter().enumerate() {
            b.row_mut(i).copy_from_slice(self.b_hat_s.row(r));
        }
        b
    }
}

/// Restricted Gram factorization together with the products needed to apply
/// the projector onto the column span of `X_S` without forming it.
struct RestrictedDesign<'a, T> {
    x_s: &'a DenseMatrix<T>,
    gram: DenseMatrix<T>,
    chol: Cholesky<T>,
    inv_n: T,
}

impl<'a, T: Scalar> RestrictedDesign<'a, T> {
    fn new(x_s: &'a DenseMatrix<T>) -> Result<Self> {
        let chol = restricted_gram(x_s)?;
        let inv_n = T::one() / T::lit(x_s.rows() as f64);
        let gram = x_s.tr_matmul(x_s)?.scale(inv_n);
        Ok(Self { x_s, gram, chol, inv_n })
    }

    /// `Π_S·A` with `Π_S = X_S (X_SᵀX_S)⁻¹ X_Sᵀ`.
    fn project(&self, a: &DenseMatrix<T>) -> Result<DenseMatrix<T>> {
        let coef = self.chol.solve(&self.x_s.tr_matmul(a)?.scale(self.inv_n))?;
        self.x_s.matmul(&coef)
    }

    /// `(I − Π_S)·A`.
    fn residualize(&self, a: &DenseMatrix<T>) -> Result<DenseMatrix<T>> {
        a.try_sub(&self.project(a)?)
    }
}

/// Builds the primal-dual witness for `Y = X·B* + W` on the support `S`.
///
/// `cfg` controls the restricted solve; its `lambda` must be positive and is
/// the regularization level of the witness.
pub fn construct_witness<T: Scalar>(
    x: &DenseMatrix<T>,
    w: &DenseMatrix<T>,
    bstar: &DenseMatrix<T>,
    support: &SupportSet,
    cfg: &SolverConfig<T>,
) -> Result<WitnessReport<T>, SolveError<T>> {
    let lambda = cfg.lambda;
    if !(lambda > T::zero()) {
        return Err(Error::InvalidArgument(format!("witness needs lambda > 0, got {lambda}")).into());
    }
    let (n, p) = x.shape();
    let k = w.cols();
    if w.rows() != n || bstar.shape() != (p, k) || support.ambient_p() != p {
        return Err(Error::ShapeMismatch(format!(
            "X {n}x{p}, W {}x{}, B* {}x{}, support over p = {}",
            w.rows(),
            w.cols(),
            bstar.rows(),
            bstar.cols(),
            support.ambient_p()
        ))
        .into());
    }
    let s_idx = support.indices();
    let c_idx = support.complement();
    let bstar_s = bstar.select_rows(s_idx);
    // fail early with ZeroRow before any solve
    zeta(&bstar_s, T::lit(ZETA_ZERO_TOL))?;

    let x_s = x.select_cols(s_idx);
    let design = RestrictedDesign::new(&x_s)?;
    // only the support columns enter Y; rows of B* off S are ignored by construction
    let y = x_s.matmul(&bstar_s)?.try_add(w)?;
    let b_hat_s = restricted_group_lasso(&x_s, &y, cfg)?.b_hat;

    let u_s = b_hat_s.try_sub(&bstar_s)?;
    let xs_w = x_s.tr_matmul(w)?.scale(design.inv_n);
    let grad = design.gram.matmul(&u_s)?.try_sub(&xs_w)?;
    let z_hat_s = grad.scale(-T::one() / lambda);
    let stationarity_residual = grad.try_add(&z_hat_s.scale(lambda))?.max_abs();

    // V_Sᶜ = X_Sᶜᵀ[(Π_S − I)W/n − λ X_S Σ̂_SS⁻¹ Ẑ_S / n]
    let lifted = x_s.matmul(&design.chol.solve(&z_hat_s)?)?.scale(lambda * design.inv_n);
    let inner = design.residualize(w)?.scale(-design.inv_n).try_sub(&lifted)?;
    let v_sc = x.select_cols(&c_idx).tr_matmul(&inner)?;
    let v_norm = if c_idx.is_empty() { T::zero() } else { linf_l2(&v_sc) };

    let bmin_star = bmin(&bstar_s);
    let m_n = m_matrix_with(&design, w, &z_hat_s, lambda)?;
    let zeta_check = zeta_perturbation_check(&z_hat_s, &bstar_s, &u_s)?;
    let zeta_discrepancy = zeta(&b_hat_s, T::lit(ZETA_ZERO_TOL))
        .ok()
        .map(|zb| linf_l2(&z_hat_s.try_sub(&zb).expect("same shape")));

    Ok(WitnessReport {
        event_u: linf_l2(&u_s) <= bmin_star / T::lit(2.0),
        event_v: v_norm < lambda,
        strict_dual_feasibility_margin: lambda - v_norm,
        m_n_spectral: spectral_norm(&m_n)?,
        zeta_bound_ok: zeta_check.ok,
        zeta_discrepancy,
        stationarity_residual,
        b_hat_s,
        z_hat_s,
        u_s,
        v_sc,
        lambda,
        bmin: bmin_star,
    })
}

/// `(I − Π_S)·A`, the residual of `A` after projection onto the column span of `X_S`.
pub fn residual_projection<T: Scalar>(x_s: &DenseMatrix<T>, a: &DenseMatrix<T>) -> Result<DenseMatrix<T>> {
    RestrictedDesign::new(x_s)?.residualize(a)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Scalar"))]
pub struct MMatrix<T> {
    pub m_n: DenseMatrix<T>,
    pub spectral: T,
    /// `λ²·ψ(B*)·(1 + δ)/n`.
    pub bound: T,
}

impl<T: Scalar> MMatrix<T> {
    pub fn within_bound(&self) -> bool {
        self.spectral <= self.bound
    }
}

/// `M_n = (λ²/n)·Ẑ_Sᵀ Σ̂_SS⁻¹ Ẑ_S + (1/n²)·Wᵀ(I − Π_S)W`, the conditional
/// covariance of the off-support dual rows, and its spectral norm compared
/// against `λ²·ψ·(1 + δ)/n`.
pub fn m_matrix<T: Scalar>(
    x_s: &DenseMatrix<T>,
    w: &DenseMatrix<T>,
    z_hat_s: &DenseMatrix<T>,
    lambda: T,
    psi: T,
    delta: T,
) -> Result<MMatrix<T>> {
    if x_s.rows() != w.rows() || z_hat_s.shape() != (x_s.cols(), w.cols()) {
        return Err(Error::ShapeMismatch(format!(
            "X_S {}x{}, W {}x{}, Z_S {}x{}",
            x_s.rows(),
            x_s.cols(),
            w.rows(),
            w.cols(),
            z_hat_s.rows(),
            z_hat_s.cols()
        )));
    }
    let design = RestrictedDesign::new(x_s)?;
    let m_n = m_matrix_with(&design, w, z_hat_s, lambda)?;
    let spectral = spectral_norm(&m_n)?;
    let n = T::lit(x_s.rows() as f64);
    Ok(MMatrix {
        m_n,
        spectral,
        bound: lambda * lambda * psi * (T::one() + delta) / n,
    })
}

fn m_matrix_with<T: Scalar>(
    design: &RestrictedDesign<'_, T>,
    w: &DenseMatrix<T>,
    z_hat_s: &DenseMatrix<T>,
    lambda: T,
) -> Result<DenseMatrix<T>> {
    let inv_n = design.inv_n;
    let signal = z_hat_s.tr_matmul(&design.chol.solve(z_hat_s)?)?.scale(lambda * lambda * inv_n);
    let noise = w.tr_matmul(&design.residualize(w)?)?.scale(inv_n * inv_n);
    let m = signal.try_add(&noise)?;
    Ok(DenseMatrix::from_fn(m.rows(), m.cols(), |i, j| {
        (m.get(i, j) + m.get(j, i)) * T::lit(0.5)
    }))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZetaCheck<T> {
    pub lhs: T,
    pub rhs: T,
    /// `None` when the bound's precondition `‖Δᵢ‖₂ ≤ 1/2` fails for some row.
    pub ok: Option<bool>,
}

/// Compares `‖Ẑ_S − ζ(B*_S)‖_{ℓ∞/ℓ2}` with `4‖Δ‖_{ℓ∞/ℓ2}`, `Δᵢ = Uᵢ/‖β*ᵢ‖₂`.
pub fn zeta_perturbation_check<T: Scalar>(
    z_hat_s: &DenseMatrix<T>,
    bstar_s: &DenseMatrix<T>,
    u_s: &DenseMatrix<T>,
) -> Result<ZetaCheck<T>> {
    if z_hat_s.shape() != bstar_s.shape() || u_s.shape() != bstar_s.shape() {
        return Err(Error::ShapeMismatch("Z_S, B*_S and U_S must have equal shapes".into()));
    }
    let zeta_star = zeta(bstar_s, T::lit(ZETA_ZERO_TOL))?;
    let lhs = linf_l2(&z_hat_s.try_sub(&zeta_star)?);
    let mut delta_max = T::zero();
    for i in 0..u_s.rows() {
        delta_max = delta_max.max(norm2(u_s.row(i)) / norm2(bstar_s.row(i)));
    }
    let rhs = T::lit(4.0) * delta_max;
    let ok = (delta_max <= T::lit(0.5)).then(|| lhs <= rhs + T::lit(1e-12));
    Ok(ZetaCheck { lhs, rhs, ok })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationReport {
    pub n: usize,
    pub s: usize,
    /// `√(s/n)`.
    pub bound: f64,
    /// `‖(1/n)UᵀU − I‖₂` per trial.
    pub deviations: Vec<f64>,
    pub within_bound: usize,
}

impl ConcentrationReport {
    pub fn rate(&self) -> f64 {
        self.within_bound as f64 / self.deviations.len() as f64
    }
}

/// Draws `trials` standard Gaussian n×s matrices and records how often the
/// sample covariance deviates from the identity by at most `√(s/n)` in
/// spectral norm.
pub fn concentration_check(n: usize, s: usize, trials: usize, seed: u64) -> Result<ConcentrationReport> {
    if n == 0 || s == 0 || trials == 0 {
        return Err(Error::InvalidArgument("n, s and trials must be positive".into()));
    }
    let bound = (s as f64 / n as f64).sqrt();
    let mut deviations = Vec::with_capacity(trials);
    for t in 0..trials {
        let mut stream = GaussianStream::new(seed, tag::CONCENTRATION, t as u64);
        let u = DenseMatrix::from_fn(n, s, |_, _| stream.normal());
        let mut g = u.tr_matmul(&u)?.scale(1.0 / n as f64);
        for i in 0..s {
            g[(i, i)] -= 1.0;
        }
        // near-tied extreme eigenvalues slow power iteration down, but then the
        // best estimate is already within the tiny gap of the true norm
        let dev = match spectral_norm(&g) {
            Ok(v) => v,
            Err(Error::ConvergenceFailure { estimate, .. }) => estimate,
            Err(e) => return Err(e),
        };
        deviations.push(dev);
    }
    let within_bound = deviations.iter().filter(|&&d| d <= bound).count();
    Ok(ConcentrationReport {
        n,
        s,
        bound,
        deviations,
        within_bound,
    })
}

/// ψ of `B*_S` under the empirical covariance `Σ̂_SS = X_SᵀX_S/n`.
pub fn empirical_psi<T: Scalar>(x_s: &DenseMatrix<T>, bstar_s: &DenseMatrix<T>) -> Result<T> {
    let gram = x_s.tr_matmul(x_s)?.scale(T::one() / T::lit(x_s.rows() as f64));
    sparsity_overlap(bstar_s, &gram)
}
