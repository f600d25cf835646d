//! ℓ1/ℓ2 group Lasso for multi-task regression,
//!
//! ```text
//! minimize  (1/2n)‖Y − X·B‖²_F + λ Σᵢ ‖βᵢ‖₂
//! ```
//!
//! solved by cyclic block coordinate descent over the rows of `B`, with
//! optimality certified by the KKT residual.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::{Error, Result};
use crate::linalg::{l1_l2, Cholesky};
use crate::matrix::{axpy, dot, norm2, DenseMatrix};
use crate::scalar::Scalar;
use crate::theory::SupportSet;

/// Condition estimates above this make [`restricted_group_lasso`] refuse the problem.
pub const MAX_CONDITION: f64 = 1e12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig<T> {
    pub lambda: T,
    pub max_iter: usize,
    /// Largest ℓ2 change of any row during a full sweep at convergence.
    pub tol: T,
    /// Row-norm threshold for support extraction.
    pub zero_tol: T,
    /// KKT violation required before a solve is reported as converged.
    pub kkt_tol: T,
    /// Record the objective after each full sweep.
    pub track_objective: bool,
}

impl<T: Scalar> SolverConfig<T> {
    pub fn new(lambda: T) -> Self {
        Self {
            lambda,
            max_iter: 50_000,
            tol: T::lit(1e-9),
            zero_tol: T::lit(1e-10),
            kkt_tol: T::lit(1e-7),
            track_objective: false,
        }
    }

    pub fn with_tol(mut self, tol: T) -> Self {
        self.tol = tol;
        self
    }

    pub fn tracking_objective(mut self) -> Self {
        self.track_objective = true;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= T::zero()) || !self.lambda.is_finite() {
            return Err(Error::InvalidArgument(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        if !(self.tol > T::zero()) {
            return Err(Error::InvalidArgument(format!("tol must be > 0, got {}", self.tol)));
        }
        if !(self.zero_tol >= T::zero()) {
            return Err(Error::InvalidArgument(format!("zero_tol must be >= 0, got {}", self.zero_tol)));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidArgument("max_iter must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Scalar"))]
pub struct Solution<T> {
    pub b_hat: DenseMatrix<T>,
    /// Number of sweeps, full or restricted to the active rows.
    pub iterations: usize,
    pub converged: bool,
    pub objective: T,
    pub kkt_max_violation: T,
    pub support: SupportSet,
    /// Objective after each full sweep, if requested.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub objective_trace: Vec<T>,
}

#[derive(Debug, Error)]
pub enum SolveError<T: Scalar> {
    #[error("block coordinate descent did not converge in {} sweeps (KKT violation {})", .0.iterations, .0.kkt_max_violation)]
    NotConverged(Box<Solution<T>>),
    #[error(transparent)]
    Core(#[from] Error),
}

impl<T: Scalar> SolveError<T> {
    /// Best iterate carried by a convergence failure.
    pub fn best_iterate(&self) -> Option<&Solution<T>> {
        match self {
            SolveError::NotConverged(sol) => Some(sol),
            SolveError::Core(_) => None,
        }
    }
}

/// `(1/2n)‖Y − X·B‖²_F + λ‖B‖_{ℓ1/ℓ2}`.
pub fn objective<T: Scalar>(x: &DenseMatrix<T>, y: &DenseMatrix<T>, b: &DenseMatrix<T>, lambda: T) -> Result<T> {
    let r = y.try_sub(&x.matmul(b)?)?;
    let n = T::lit(x.rows() as f64);
    let f = r.frobenius_norm();
    Ok(f * f / (T::lit(2.0) * n) + lambda * l1_l2(b))
}

/// Row support `{i : ‖βᵢ‖₂ > zero_tol}`.
pub fn support<T: Scalar>(b: &DenseMatrix<T>, zero_tol: T) -> SupportSet {
    let idx = (0..b.rows()).filter(|&i| b.row_norm(i) > zero_tol).collect();
    SupportSet::new(idx, b.rows()).expect("row indices are distinct and in range")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Scalar"))]
pub struct KktReport<T> {
    pub max_violation: T,
    /// `1 − maxⱼ ‖ẑⱼ‖₂` over zero rows; positive means strict dual feasibility.
    pub dual_feasibility_gap: T,
    pub z_hat: DenseMatrix<T>,
}

/// Optimality residual of `B_hat` for the group Lasso at `lambda`.
///
/// With `G = (1/n)Xᵀ(X·B − Y)`, nonzero rows must satisfy
/// `Gᵢ + λ·βᵢ/‖βᵢ‖₂ = 0` and zero rows `‖Gⱼ‖₂ ≤ λ`.
pub fn kkt_residual<T: Scalar>(
    x: &DenseMatrix<T>,
    y: &DenseMatrix<T>,
    b_hat: &DenseMatrix<T>,
    lambda: T,
) -> Result<KktReport<T>> {
    if !(lambda > T::zero()) {
        return Err(Error::InvalidArgument(format!("KKT check needs lambda > 0, got {lambda}")));
    }
    check_shapes(x, y)?;
    if b_hat.shape() != (x.cols(), y.cols()) {
        return Err(Error::ShapeMismatch(format!(
            "B is {}x{}, expected {}x{}",
            b_hat.rows(),
            b_hat.cols(),
            x.cols(),
            y.cols()
        )));
    }
    let n = T::lit(x.rows() as f64);
    let resid = x.matmul(b_hat)?.try_sub(y)?;
    let grad = x.tr_matmul(&resid)?.scale(T::one() / n);
    Ok(kkt_from_gradient(&grad, b_hat, lambda))
}

fn kkt_from_gradient<T: Scalar>(grad: &DenseMatrix<T>, b: &DenseMatrix<T>, lambda: T) -> KktReport<T> {
    let (p, k) = b.shape();
    let mut z_hat = DenseMatrix::zeros(p, k);
    let mut worst = T::zero();
    let mut max_off = T::zero();
    let mut tmp = vec![T::zero(); k];
    for i in 0..p {
        let beta = b.row(i);
        let g = grad.row(i);
        let nb = norm2(beta);
        if nb > T::zero() {
            for c in 0..k {
                let z = beta[c] / nb;
                z_hat[(i, c)] = z;
                tmp[c] = g[c] + lambda * z;
            }
            worst = worst.max(norm2(&tmp));
        } else {
            for c in 0..k {
                z_hat[(i, c)] = -g[c] / lambda;
            }
            let nz = norm2(z_hat.row(i));
            max_off = max_off.max(nz);
            worst = worst.max((nz - T::one()).max(T::zero()));
        }
    }
    KktReport {
        max_violation: worst,
        dual_feasibility_gap: T::one() - max_off,
        z_hat,
    }
}

fn check_shapes<T: Scalar>(x: &DenseMatrix<T>, y: &DenseMatrix<T>) -> Result<()> {
    if x.rows() != y.rows() {
        return Err(Error::ShapeMismatch(format!(
            "X has {} rows but Y has {}",
            x.rows(),
            y.rows()
        )));
    }
    Ok(())
}

/// Column-oriented working copy of the problem with the running residual.
struct Workspace<'a, T> {
    n: usize,
    p: usize,
    k: usize,
    inv_n: T,
    // column j of X at xt[j*n..(j+1)*n]
    xt: Vec<T>,
    gram_diag: Vec<T>,
    y: &'a DenseMatrix<T>,
    // task c of the residual Y − X·B at resid[c*n..(c+1)*n]
    resid: Vec<T>,
    b: DenseMatrix<T>,
}

impl<'a, T: Scalar> Workspace<'a, T> {
    fn new(x: &DenseMatrix<T>, y: &'a DenseMatrix<T>, b0: DenseMatrix<T>) -> Self {
        let (n, p) = x.shape();
        let k = y.cols();
        let inv_n = T::one() / T::lit(n as f64);
        let xt = x.transpose().into_vec();
        let gram_diag = xt.chunks_exact(n).map(|c| dot(c, c) * inv_n).collect();
        let mut ws = Self {
            n,
            p,
            k,
            inv_n,
            xt,
            gram_diag,
            y,
            resid: vec![T::zero(); n * k],
            b: b0,
        };
        ws.refresh_residual();
        ws
    }

    fn col(&self, j: usize) -> &[T] {
        &self.xt[j * self.n..(j + 1) * self.n]
    }

    fn refresh_residual(&mut self) {
        let (n, k) = (self.n, self.k);
        for c in 0..k {
            for i in 0..n {
                self.resid[c * n + i] = self.y.get(i, c);
            }
        }
        for j in 0..self.p {
            for c in 0..k {
                let bj = self.b.get(j, c);
                if bj != T::zero() {
                    let (xcol, r) = (&self.xt[j * n..(j + 1) * n], &mut self.resid[c * n..(c + 1) * n]);
                    axpy(-bj, xcol, r);
                }
            }
        }
    }

    /// Exact minimization over row `j`; returns the ℓ2 change of the row.
    fn update(&mut self, j: usize, lambda: T, corr: &mut [T], delta: &mut [T]) -> T {
        let gjj = self.gram_diag[j];
        if gjj == T::zero() {
            return T::zero();
        }
        let n = self.n;
        for c in 0..self.k {
            corr[c] = dot(self.col(j), &self.resid[c * n..(c + 1) * n]) * self.inv_n + gjj * self.b.get(j, c);
        }
        let nc = norm2(corr);
        let shrink = if nc > lambda { T::one() - lambda / nc } else { T::zero() };
        let mut change = T::zero();
        for c in 0..self.k {
            let new = shrink * corr[c] / gjj;
            delta[c] = new - self.b.get(j, c);
            self.b[(j, c)] = new;
            change += delta[c] * delta[c];
        }
        if change > T::zero() {
            for c in 0..self.k {
                if delta[c] != T::zero() {
                    let (xcol, r) = (&self.xt[j * n..(j + 1) * n], &mut self.resid[c * n..(c + 1) * n]);
                    axpy(-delta[c], xcol, r);
                }
            }
        }
        change.sqrt()
    }

    fn sweep(&mut self, rows: impl Iterator<Item = usize>, lambda: T, corr: &mut [T], delta: &mut [T]) -> T {
        let mut worst = T::zero();
        for j in rows {
            worst = worst.max(self.update(j, lambda, corr, delta));
        }
        worst
    }

    fn objective(&self, lambda: T) -> T {
        let rss = dot(&self.resid, &self.resid);
        rss * self.inv_n / T::lit(2.0) + lambda * l1_l2(&self.b)
    }

    fn kkt(&self, lambda: T) -> KktReport<T> {
        let (n, p, k) = (self.n, self.p, self.k);
        let mut grad = DenseMatrix::zeros(p, k);
        for j in 0..p {
            for c in 0..k {
                grad[(j, c)] = -dot(self.col(j), &self.resid[c * n..(c + 1) * n]) * self.inv_n;
            }
        }
        kkt_from_gradient(&grad, &self.b, lambda)
    }
}

/// Group Lasso from the zero initialization.
pub fn group_lasso<T: Scalar>(
    x: &DenseMatrix<T>,
    y: &DenseMatrix<T>,
    cfg: &SolverConfig<T>,
) -> Result<Solution<T>, SolveError<T>> {
    group_lasso_from(x, y, cfg, DenseMatrix::zeros(x.cols(), y.cols()))
}

/// Group Lasso started from `init`.
///
/// Each sweep visits all rows in order; between full sweeps the rows that are
/// currently nonzero are swept until they settle. A solve is converged once a
/// full sweep moves no row by more than `tol` and the KKT violation is at most
/// `kkt_tol`.
pub fn group_lasso_from<T: Scalar>(
    x: &DenseMatrix<T>,
    y: &DenseMatrix<T>,
    cfg: &SolverConfig<T>,
    init: DenseMatrix<T>,
) -> Result<Solution<T>, SolveError<T>> {
    cfg.validate()?;
    check_shapes(x, y)?;
    if init.shape() != (x.cols(), y.cols()) {
        return Err(Error::ShapeMismatch(format!(
            "initial B is {}x{}, expected {}x{}",
            init.rows(),
            init.cols(),
            x.cols(),
            y.cols()
        ))
        .into());
    }
    let lambda = cfg.lambda;
    let p = x.cols();
    let mut ws = Workspace::new(x, y, init);
    let mut corr = vec![T::zero(); ws.k];
    let mut delta = vec![T::zero(); ws.k];
    let mut trace = Vec::new();
    if cfg.track_objective {
        trace.push(ws.objective(lambda));
    }

    let mut iterations = 0;
    let mut converged = false;
    let mut kkt;
    loop {
        let change = ws.sweep(0..p, lambda, &mut corr, &mut delta);
        iterations += 1;
        if cfg.track_objective {
            trace.push(ws.objective(lambda));
        }
        if change <= cfg.tol {
            ws.refresh_residual();
            kkt = ws.kkt(lambda);
            if kkt.max_violation <= cfg.kkt_tol || lambda == T::zero() && change == T::zero() {
                converged = kkt.max_violation <= cfg.kkt_tol;
                break;
            }
            if change == T::zero() {
                break;
            }
        }
        if iterations >= cfg.max_iter {
            ws.refresh_residual();
            kkt = ws.kkt(lambda);
            break;
        }
        let active: Vec<usize> = (0..p).filter(|&j| ws.b.row(j).iter().any(|v| *v != T::zero())).collect();
        while iterations < cfg.max_iter {
            let change = ws.sweep(active.iter().copied(), lambda, &mut corr, &mut delta);
            iterations += 1;
            if change <= cfg.tol {
                break;
            }
        }
        // periodic refresh bounds round-off drift in the running residual
        ws.refresh_residual();
    }

    let objective = ws.objective(lambda);
    let support = support(&ws.b, cfg.zero_tol);
    let solution = Solution {
        b_hat: ws.b,
        iterations,
        converged,
        objective,
        kkt_max_violation: kkt.max_violation,
        support,
        objective_trace: trace,
    };
    if converged {
        Ok(solution)
    } else {
        Err(SolveError::NotConverged(Box::new(solution)))
    }
}

/// Group Lasso on the columns `X_S` only, which is strictly convex when
/// `X_Sᵀ X_S / n` is positive definite.
pub fn restricted_group_lasso<T: Scalar>(
    x_s: &DenseMatrix<T>,
    y: &DenseMatrix<T>,
    cfg: &SolverConfig<T>,
) -> Result<Solution<T>, SolveError<T>> {
    restricted_gram(x_s)?;
    group_lasso(x_s, y, cfg)
}

/// Cholesky factor of `X_Sᵀ X_S / n`, rejecting rank-deficient or badly conditioned designs.
pub fn restricted_gram<T: Scalar>(x_s: &DenseMatrix<T>) -> Result<Cholesky<T>> {
    let (n, s) = x_s.shape();
    if s >= n {
        return Err(Error::IllConditioned(f64::INFINITY));
    }
    let gram = x_s.tr_matmul(x_s)?.scale(T::one() / T::lit(n as f64));
    let chol = Cholesky::new(&gram).map_err(|_| Error::IllConditioned(f64::INFINITY))?;
    let cond = chol.condition_estimate();
    if cond.as_f64() > MAX_CONDITION {
        return Err(Error::IllConditioned(cond.as_f64()));
    }
    Ok(chol)
}

/// Union of the supports of separate single-task Lasso fits, one per column of `Y`.
pub fn lasso_union_rows<T: Scalar>(
    x: &DenseMatrix<T>,
    y: &DenseMatrix<T>,
    cfg: &SolverConfig<T>,
) -> Result<SupportSet, SolveError<T>> {
    check_shapes(x, y)?;
    let mut union = SupportSet::new(Vec::new(), x.cols())?;
    for c in 0..y.cols() {
        let yc = y.select_cols(&[c]);
        let sol = group_lasso(x, &yc, cfg)?;
        union = union.union(&sol.support)?;
    }
    Ok(union)
}

/// Smallest λ with the all-zero solution: `‖(1/n)XᵀY‖_{ℓ∞/ℓ2}`.
pub fn lambda_max<T: Scalar>(x: &DenseMatrix<T>, y: &DenseMatrix<T>) -> Result<T> {
    check_shapes(x, y)?;
    let g = x.tr_matmul(y)?.scale(T::one() / T::lit(x.rows() as f64));
    Ok(crate::linalg::linf_l2(&g))
}
