//! Factorizations, solves and the matrix norms used throughout the crate.

use std::fmt;

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{dot, norm2, DenseMatrix};
use crate::scalar::Scalar;

/// Iteration cap for power iteration.
pub const POWER_MAX_ITER: usize = 10_000;

/// Seed of the single random restart in [`spectral_norm`]; fixed so results are reproducible.
const RESTART_SEED: u64 = 0x005e_ed0f_90e7;

/// Lower-triangular Cholesky factor `L` with `A = L·Lᵀ`.
#[derive(Clone, Debug)]
pub struct Cholesky<T> {
    l: DenseMatrix<T>,
}

impl<T: Scalar> Cholesky<T> {
    pub fn new(a: &DenseMatrix<T>) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::ShapeMismatch(format!(
                "Cholesky needs a square matrix, got {}x{}",
                a.rows(),
                a.cols()
            )));
        }
        let asym = a.asymmetry();
        if asym > T::lit(T::SYMMETRY_TOL) {
            return Err(Error::NotSymmetric {
                asymmetry: asym.as_f64(),
            });
        }
        let n = a.rows();
        let max_diag = (0..n).fold(T::zero(), |m, i| m.max(a.get(i, i)));
        let floor = T::lit(T::PIVOT_TOL) * max_diag;
        let mut l = DenseMatrix::zeros(n, n);
        for j in 0..n {
            let lj = &l.row(j)[..j];
            let pivot = a.get(j, j) - dot(lj, lj);
            if !(pivot > floor) || max_diag <= T::zero() {
                return Err(Error::NotPositiveDefinite {
                    index: j,
                    pivot: pivot.as_f64(),
                });
            }
            let d = pivot.sqrt();
            l.set(j, j, d);
            for i in (j + 1)..n {
                let s = a.get(i, j) - dot(&l.row(i)[..j], &l.row(j)[..j]);
                l.set(i, j, s / d);
            }
        }
        Ok(Self { l })
    }

    pub fn factor(&self) -> &DenseMatrix<T> {
        &self.l
    }

    pub fn into_factor(self) -> DenseMatrix<T> {
        self.l
    }

    pub fn dim(&self) -> usize {
        self.l.rows()
    }

    /// `L⁻¹·B` by forward substitution, column block at a time.
    pub fn solve_lower(&self, b: &DenseMatrix<T>) -> Result<DenseMatrix<T>> {
        self.check_rhs(b)?;
        let n = self.dim();
        let k = b.cols();
        let mut x = b.clone();
        for i in 0..n {
            for j in 0..i {
                let lij = self.l.get(i, j);
                if lij == T::zero() {
                    continue;
                }
                for c in 0..k {
                    let v = x.get(j, c);
                    x[(i, c)] -= lij * v;
                }
            }
            let d = self.l.get(i, i);
            for v in x.row_mut(i) {
                *v /= d;
            }
        }
        Ok(x)
    }

    /// `L⁻ᵀ·B` by back substitution.
    pub fn solve_upper(&self, b: &DenseMatrix<T>) -> Result<DenseMatrix<T>> {
        self.check_rhs(b)?;
        let n = self.dim();
        let k = b.cols();
        let mut x = b.clone();
        for i in (0..n).rev() {
            for j in (i + 1)..n {
                let lji = self.l.get(j, i);
                if lji == T::zero() {
                    continue;
                }
                for c in 0..k {
                    let v = x.get(j, c);
                    x[(i, c)] -= lji * v;
                }
            }
            let d = self.l.get(i, i);
            for v in x.row_mut(i) {
                *v /= d;
            }
        }
        Ok(x)
    }

    /// `A⁻¹·B`.
    pub fn solve(&self, b: &DenseMatrix<T>) -> Result<DenseMatrix<T>> {
        self.solve_upper(&self.solve_lower(b)?)
    }

    pub fn inverse(&self) -> DenseMatrix<T> {
        self.solve(&DenseMatrix::identity(self.dim()))
            .expect("identity has matching shape")
    }

    /// Crude condition number estimate `(max Lᵢᵢ / min Lᵢᵢ)²`, a lower bound on κ₂(A).
    pub fn condition_estimate(&self) -> T {
        let (lo, hi) = (0..self.dim())
            .map(|i| self.l.get(i, i))
            .fold((T::infinity(), T::zero()), |(lo, hi), d| (lo.min(d), hi.max(d)));
        let r = hi / lo;
        r * r
    }

    fn check_rhs(&self, b: &DenseMatrix<T>) -> Result<()> {
        if b.rows() != self.dim() {
            return Err(Error::ShapeMismatch(format!(
                "right-hand side has {} rows, factor has dimension {}",
                b.rows(),
                self.dim()
            )));
        }
        Ok(())
    }
}

/// Lower-triangular `L` with `A = L·Lᵀ` for a symmetric positive-definite `A`.
pub fn cholesky<T: Scalar>(a: &DenseMatrix<T>) -> Result<DenseMatrix<T>> {
    Cholesky::new(a).map(Cholesky::into_factor)
}

/// Solves `A·X = B` for symmetric positive-definite `A`.
pub fn solve_spd<T: Scalar>(a: &DenseMatrix<T>, b: &DenseMatrix<T>) -> Result<DenseMatrix<T>> {
    Cholesky::new(a)?.solve(b)
}

/// Largest singular value, by power iteration on the smaller Gram matrix.
///
/// The iteration starts from the normalized all-ones vector and is repeated
/// once from a pseudo-random start; the larger Rayleigh quotient wins.
pub fn spectral_norm<T: Scalar>(a: &DenseMatrix<T>) -> Result<T> {
    let gram = if a.cols() <= a.rows() {
        a.tr_matmul(a)?
    } else {
        let at = a.transpose();
        at.tr_matmul(&at)?
    };
    largest_eigenvalue_psd(&gram).map(|mu| mu.max(T::zero()).sqrt())
}

/// Largest eigenvalue of a symmetric positive semi-definite matrix.
pub fn largest_eigenvalue_psd<T: Scalar>(g: &DenseMatrix<T>) -> Result<T> {
    if !g.is_square() {
        return Err(Error::ShapeMismatch("eigenvalue of a non-square matrix".into()));
    }
    let k = g.rows();
    let tol = T::lit(T::POWER_TOL);

    let ones = vec![T::one(); k];
    let mut rng = ChaCha8Rng::seed_from_u64(RESTART_SEED);
    let random: Vec<T> = (0..k)
        .map(|_| T::lit((rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64 - 0.5))
        .collect();

    let first = power_iterate(g, ones, tol);
    let second = power_iterate(g, random, tol);
    let best = first.estimate.max(second.estimate);
    if first.converged && second.converged {
        Ok(best)
    } else {
        Err(Error::ConvergenceFailure {
            estimate: best.as_f64(),
            iterations: first.iterations.max(second.iterations),
        })
    }
}

struct PowerRun<T> {
    estimate: T,
    converged: bool,
    iterations: usize,
}

fn power_iterate<T: Scalar>(g: &DenseMatrix<T>, mut v: Vec<T>, tol: T) -> PowerRun<T> {
    let nv = norm2(&v);
    if nv == T::zero() {
        v = vec![T::one(); g.rows()];
    }
    let nv = norm2(&v);
    v.iter_mut().for_each(|x| *x /= nv);

    let mut prev = T::zero();
    for it in 1..=POWER_MAX_ITER {
        let w = g.matvec(&v).expect("square matrix");
        let nw = norm2(&w);
        if nw == T::zero() {
            return PowerRun {
                estimate: T::zero(),
                converged: true,
                iterations: it,
            };
        }
        let mu = dot(&v, &w);
        v = w.into_iter().map(|x| x / nw).collect();
        if it > 1 && (mu - prev).abs() <= tol * mu.abs() {
            return PowerRun {
                estimate: mu,
                converged: true,
                iterations: it,
            };
        }
        prev = mu;
    }
    PowerRun {
        estimate: prev,
        converged: false,
        iterations: POWER_MAX_ITER,
    }
}

/// Norm orders accepted by [`block_norm`].
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum NormOrder {
    One,
    Two,
    Inf,
}

impl fmt::Display for NormOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NormOrder::One => "1",
            NormOrder::Two => "2",
            NormOrder::Inf => "inf",
        })
    }
}

fn vector_norm<T: Scalar>(v: &[T], order: NormOrder) -> T {
    match order {
        NormOrder::One => v.iter().map(|x| x.abs()).sum(),
        NormOrder::Two => norm2(v),
        NormOrder::Inf => v.iter().fold(T::zero(), |m, x| m.max(x.abs())),
    }
}

/// ℓa/ℓb block norm: the ℓa norm (a ∈ {1, ∞}) of the vector of row-wise ℓb norms.
pub fn block_norm<T: Scalar>(a: &DenseMatrix<T>, outer: NormOrder, inner: NormOrder) -> Result<T> {
    let rows = a.row_iter().map(|r| vector_norm(r, inner));
    match outer {
        NormOrder::One => Ok(rows.sum()),
        NormOrder::Inf => Ok(rows.fold(T::zero(), T::max)),
        NormOrder::Two => Err(Error::UnsupportedOrder {
            a: outer.to_string(),
            b: inner.to_string(),
        }),
    }
}

/// Shorthand for the ℓ∞/ℓ2 block norm, the largest row ℓ2 norm.
pub fn linf_l2<T: Scalar>(a: &DenseMatrix<T>) -> T {
    a.row_iter().map(norm2).fold(T::zero(), T::max)
}

/// Shorthand for the ℓ1/ℓ2 block norm, the sum of row ℓ2 norms.
pub fn l1_l2<T: Scalar>(a: &DenseMatrix<T>) -> T {
    a.row_iter().map(norm2).sum()
}

/// ℓ∞ operator norm: the largest absolute row sum.
pub fn linf_operator_norm<T: Scalar>(a: &DenseMatrix<T>) -> T {
    a.row_iter()
        .map(|r| vector_norm(r, NormOrder::One))
        .fold(T::zero(), T::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[&[f64]]) -> DenseMatrix<f64> {
        DenseMatrix::from_f64_rows(rows).unwrap()
    }

    #[test]
    fn cholesky_small_cases() {
        assert_eq!(
            cholesky(&DenseMatrix::<f64>::identity(3)).unwrap(),
            DenseMatrix::identity(3)
        );
        let l = cholesky(&m(&[&[4.0, 2.0], &[2.0, 5.0]])).unwrap();
        assert_eq!(l, m(&[&[2.0, 0.0], &[1.0, 2.0]]));
    }

    #[test]
    fn cholesky_rejects_indefinite_and_asymmetric() {
        assert!(matches!(
            cholesky(&m(&[&[1.0, 2.0], &[2.0, 1.0]])),
            Err(Error::NotPositiveDefinite { index: 1, .. })
        ));
        assert!(matches!(
            cholesky(&m(&[&[1.0, 0.0], &[0.0, 0.0]])),
            Err(Error::NotPositiveDefinite { index: 1, .. })
        ));
        assert!(matches!(
            cholesky(&m(&[&[2.0, 1.0], &[0.0, 2.0]])),
            Err(Error::NotSymmetric { .. })
        ));
    }

    #[test]
    fn solves() {
        let b = m(&[&[1.0, -2.0], &[3.0, 0.5]]);
        assert_eq!(solve_spd(&DenseMatrix::identity(2), &b).unwrap(), b);
        let x = solve_spd(&m(&[&[2.0, 0.0], &[0.0, 4.0]]), &m(&[&[2.0], &[8.0]])).unwrap();
        assert!(x.try_sub(&m(&[&[1.0], &[2.0]])).unwrap().max_abs() < 1e-15);
    }

    #[test]
    fn spectral_norm_simple() {
        assert!((spectral_norm(&DenseMatrix::<f64>::identity(5)).unwrap() - 1.0).abs() < 1e-12);
        let d = DenseMatrix::<f64>::from_diag(&[3.0, 1.0, 2.0]);
        assert!((spectral_norm(&d).unwrap() - 3.0).abs() < 1e-9);
        assert_eq!(spectral_norm(&DenseMatrix::<f64>::zeros(2, 3)).unwrap(), 0.0);
        // all-ones start is orthogonal to the top singular vector here; the restart finds it
        let tricky = m(&[&[2.0, -2.0], &[0.0, 0.0]]);
        assert!((spectral_norm(&tricky).unwrap() - 8f64.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn spectral_norm_f32() {
        let d = DenseMatrix::<f32>::from_diag(&[3.0, 1.0, 2.0]);
        assert!((spectral_norm(&d).unwrap() - 3.0).abs() < 1e-3);
    }

    #[test]
    fn block_norms_by_hand() {
        let a = m(&[&[3.0, 4.0], &[0.0, 0.0]]);
        assert_eq!(block_norm(&a, NormOrder::Inf, NormOrder::Two).unwrap(), 5.0);
        let b = m(&[&[1.0, -1.0], &[2.0, 2.0]]);
        assert_eq!(block_norm(&b, NormOrder::One, NormOrder::One).unwrap(), 6.0);
        assert_eq!(block_norm(&b, NormOrder::Inf, NormOrder::Inf).unwrap(), 2.0);
        assert!(matches!(
            block_norm(&b, NormOrder::Two, NormOrder::Two),
            Err(Error::UnsupportedOrder { .. })
        ));
    }

    #[test]
    fn linf_operator_by_hand() {
        assert_eq!(linf_operator_norm(&DenseMatrix::<f64>::identity(4)), 1.0);
        assert_eq!(linf_operator_norm(&m(&[&[1.0, -2.0], &[3.0, 0.5]])), 3.5);
    }
}
