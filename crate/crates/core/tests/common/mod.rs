//! Independent reference implementations used to check the library.
//!
//! Nothing here calls into the routines under test except matrix storage and
//! the Gaussian stream used to draw inputs.

#![allow(dead_code)]

use gl_lab::rng::GaussianStream;
use gl_lab::DenseMatrix;

pub fn gaussian(rows: usize, cols: usize, seed: u64) -> DenseMatrix<f64> {
    let mut g = GaussianStream::new(seed, 0xAB, 0);
    DenseMatrix::from_fn(rows, cols, |_, _| g.normal())
}

/// `GᵀG + δI` for a random square `G`.
pub fn random_spd(p: usize, delta: f64, seed: u64) -> DenseMatrix<f64> {
    let g = gaussian(p, p, seed);
    let mut a = DenseMatrix::from_fn(p, p, |i, j| (0..p).map(|r| g.get(r, i) * g.get(r, j)).sum());
    for i in 0..p {
        a[(i, i)] += delta;
    }
    a
}

pub fn naive_matmul(a: &DenseMatrix<f64>, b: &DenseMatrix<f64>) -> DenseMatrix<f64> {
    DenseMatrix::from_fn(a.rows(), b.cols(), |i, j| (0..a.cols()).map(|k| a.get(i, k) * b.get(k, j)).sum())
}

/// All eigenvalues of a symmetric matrix by cyclic Jacobi rotations, ascending.
pub fn jacobi_eigenvalues(a: &DenseMatrix<f64>) -> Vec<f64> {
    let n = a.rows();
    let mut m: Vec<Vec<f64>> = (0..n).map(|i| a.row(i).to_vec()).collect();
    for _ in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| m[i][j] * m[i][j]).sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                if m[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (m[q][q] - m[p][p]) / (2.0 * m[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (mkp, mkq) = (m[k][p], m[k][q]);
                    m[k][p] = c * mkp - s * mkq;
                    m[k][q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let (mpk, mqk) = (m[p][k], m[q][k]);
                    m[p][k] = c * mpk - s * mqk;
                    m[q][k] = s * mpk + c * mqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| m[i][i]).collect();
    ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
    ev
}

/// Largest singular value via Jacobi on `AᵀA`.
pub fn jacobi_spectral_norm(a: &DenseMatrix<f64>) -> f64 {
    let ata = naive_matmul(&a.transpose(), a);
    jacobi_eigenvalues(&ata).last().copied().unwrap().max(0.0).sqrt()
}

pub fn random_unit(k: usize, g: &mut GaussianStream) -> Vec<f64> {
    let v: Vec<f64> = (0..k).map(|_| g.normal()).collect();
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / n).collect()
}

/// `max ‖A·v‖₂` over `draws` random unit vectors, a lower bound on the spectral norm.
pub fn sampled_spectral_lower(a: &DenseMatrix<f64>, draws: usize, seed: u64) -> f64 {
    let mut g = GaussianStream::new(seed, 0x51, 0);
    (0..draws)
        .map(|_| {
            let v = random_unit(a.cols(), &mut g);
            (0..a.rows())
                .map(|i| a.row(i).iter().zip(&v).map(|(x, y)| x * y).sum::<f64>().powi(2))
                .sum::<f64>()
                .sqrt()
        })
        .fold(0.0, f64::max)
}

/// Group Lasso by proximal gradient on the Gram form, step `1/L` with
/// `L = λ_max(XᵀX/n)`.
pub fn prox_grad_group_lasso(x: &DenseMatrix<f64>, y: &DenseMatrix<f64>, lambda: f64, max_iter: usize) -> DenseMatrix<f64> {
    let n = x.rows() as f64;
    let (p, k) = (x.cols(), y.cols());
    let gram = naive_matmul(&x.transpose(), x).scale(1.0 / n);
    let c = naive_matmul(&x.transpose(), y).scale(1.0 / n);
    let lip = *jacobi_eigenvalues(&gram).last().unwrap();
    let step = 1.0 / lip;
    let mut b = vec![vec![0.0; k]; p];
    for _ in 0..max_iter {
        let mut change = 0.0f64;
        let mut next = vec![vec![0.0; k]; p];
        for i in 0..p {
            let mut z = vec![0.0; k];
            for kk in 0..k {
                let grad: f64 = (0..p).map(|j| gram.get(i, j) * b[j][kk]).sum::<f64>() - c.get(i, kk);
                z[kk] = b[i][kk] - step * grad;
            }
            let nz = z.iter().map(|v| v * v).sum::<f64>().sqrt();
            let shrink = if nz > step * lambda { 1.0 - step * lambda / nz } else { 0.0 };
            for kk in 0..k {
                next[i][kk] = shrink * z[kk];
                change = change.max((next[i][kk] - b[i][kk]).abs());
            }
        }
        b = next;
        if change < 1e-15 {
            break;
        }
    }
    DenseMatrix::from_fn(p, k, |i, j| b[i][j])
}

pub fn objective(x: &DenseMatrix<f64>, y: &DenseMatrix<f64>, b: &DenseMatrix<f64>, lambda: f64) -> f64 {
    let r = naive_matmul(x, b);
    let rss: f64 = (0..y.rows()).flat_map(|i| (0..y.cols()).map(move |j| (i, j))).map(|(i, j)| (y.get(i, j) - r.get(i, j)).powi(2)).sum();
    let pen: f64 = (0..b.rows()).map(|i| b.row(i).iter().map(|v| v * v).sum::<f64>().sqrt()).sum();
    rss / (2.0 * x.rows() as f64) + lambda * pen
}

pub fn frob_diff(a: &DenseMatrix<f64>, b: &DenseMatrix<f64>) -> f64 {
    a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Row ℓ2 norms maximized, computed directly.
pub fn max_row_norm(a: &DenseMatrix<f64>) -> f64 {
    (0..a.rows()).map(|i| a.row(i).iter().map(|v| v * v).sum::<f64>().sqrt()).fold(0.0, f64::max)
}
