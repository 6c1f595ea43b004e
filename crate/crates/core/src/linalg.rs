//! Small dense linear-algebra kernels: cyclic Jacobi eigensolver, power
//! iteration, symmetric matrix exponential and random orthogonal frames.
//!
//! Matrices here are at most a few hundred entries on a side, so everything is
//! plain `O(n^3)` sweeps over a `DMatrix`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Off-diagonal Frobenius norm at which a Jacobi sweep counts as converged,
/// relative to `max(1, |A|_F)`.
pub const JACOBI_TOL: f64 = 1e-12;
const JACOBI_MAX_SWEEPS: usize = 100;

/// Eigen-decomposition of a real symmetric matrix.
#[derive(Clone, Debug)]
pub struct SymmetricEigen {
    /// Eigenvalues in ascending order.
    pub values: Vec<f64>,
    /// Column `i` is the unit eigenvector for `values[i]`.
    pub vectors: DMatrix<f64>,
    pub sweeps: usize,
}

fn off_diagonal_norm(a: &DMatrix<f64>) -> f64 {
    let n = a.nrows();
    let mut s = 0.0;
    for j in 0..n {
        for i in 0..n {
            if i != j {
                s += a[(i, j)] * a[(i, j)];
            }
        }
    }
    s.sqrt()
}

/// Cyclic Jacobi sweeps with Rutishauser's stable rotation formulas.
///
/// The input is assumed symmetric; only the upper triangle drives the
/// rotations but both triangles are updated.
pub fn symmetric_eigen(matrix: &DMatrix<f64>) -> Result<SymmetricEigen> {
    let n = matrix.nrows();
    if matrix.ncols() != n {
        return Err(Error::Domain(format!(
            "eigensolver needs a square matrix, got {}x{}",
            n,
            matrix.ncols()
        )));
    }
    if matrix.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numeric("non-finite entry passed to eigensolver".into()));
    }
    let mut a = matrix.clone();
    let mut v = DMatrix::<f64>::identity(n, n);
    let scale = matrix.norm().max(1.0);
    let mut sweeps = 0;
    while off_diagonal_norm(&a) > JACOBI_TOL * scale {
        if sweeps == JACOBI_MAX_SWEEPS {
            return Err(Error::Numeric(format!(
                "Jacobi eigensolver did not converge in {} sweeps (n = {}, off-diagonal norm {:e})",
                JACOBI_MAX_SWEEPS,
                n,
                off_diagonal_norm(&a)
            )));
        }
        sweeps += 1;
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].total_cmp(&a[(j, j)]).then(i.cmp(&j)));
    let values = order.iter().map(|&i| a[(i, i)]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| v[(r, order[c])]);
    Ok(SymmetricEigen {
        values,
        vectors,
        sweeps,
    })
}

/// Ascending eigenvalues only.
pub fn symmetric_spectrum(matrix: &DMatrix<f64>) -> Result<Vec<f64>> {
    Ok(symmetric_eigen(matrix)?.values)
}

/// `exp(scale * S)` for symmetric `S`.
pub fn symmetric_exp(matrix: &DMatrix<f64>, scale: f64) -> Result<DMatrix<f64>> {
    let eig = symmetric_eigen(matrix)?;
    let n = matrix.nrows();
    let mut out = DMatrix::zeros(n, n);
    for (k, &lambda) in eig.values.iter().enumerate() {
        let w = (scale * lambda).exp();
        if !w.is_finite() {
            return Err(Error::Numeric(format!(
                "matrix exponential overflow: exp({:e})",
                scale * lambda
            )));
        }
        let col = eig.vectors.column(k);
        for j in 0..n {
            for i in 0..n {
                out[(i, j)] += w * col[i] * col[j];
            }
        }
    }
    Ok(out)
}

/// Result of [`power_iteration`].
#[derive(Clone, Debug)]
pub struct PowerResult {
    pub value: f64,
    pub vector: DVector<f64>,
    pub iterations: usize,
}

/// Dominant eigenvalue of a nonnegative matrix by power iteration from `start`.
///
/// Stops when successive norm estimates agree to relative tolerance `rel_tol`.
/// A start vector in the kernel yields eigenvalue 0.
pub fn power_iteration(
    matrix: &DMatrix<f64>,
    start: &DVector<f64>,
    rel_tol: f64,
    max_iter: usize,
) -> Result<PowerResult> {
    let start_norm = start.norm();
    if start_norm == 0.0 {
        return Err(Error::Domain("power iteration needs a nonzero start vector".into()));
    }
    let mut v = start / start_norm;
    let mut estimate = f64::NAN;
    for it in 1..=max_iter {
        let w = matrix * &v;
        let norm = w.norm();
        if norm == 0.0 {
            return Ok(PowerResult {
                value: 0.0,
                vector: v,
                iterations: it,
            });
        }
        let converged = (norm - estimate).abs() <= rel_tol * norm;
        estimate = norm;
        v = w / norm;
        if converged {
            return Ok(PowerResult {
                value: estimate,
                vector: v,
                iterations: it,
            });
        }
    }
    Err(Error::Numeric(format!(
        "power iteration did not converge in {} iterations (size {}, last estimate {:e})",
        max_iter,
        matrix.nrows(),
        estimate
    )))
}

/// Largest `|Q^T Q - I|` entry.
pub fn orthogonality_defect(q: &DMatrix<f64>) -> f64 {
    let n = q.nrows();
    let g = q.transpose() * q;
    let mut worst = 0.0f64;
    for j in 0..n {
        for i in 0..n {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((g[(i, j)] - target).abs());
        }
    }
    worst
}

/// Largest `|A - A^T|` entry.
pub fn asymmetry(a: &DMatrix<f64>) -> f64 {
    let n = a.nrows();
    let mut worst = 0.0f64;
    for j in 0..n {
        for i in 0..j {
            worst = worst.max((a[(i, j)] - a[(j, i)]).abs());
        }
    }
    worst
}

pub fn symmetrize(a: &DMatrix<f64>) -> DMatrix<f64> {
    (a + a.transpose()) * 0.5
}

/// Gaussian matrix orthonormalized row by row (modified Gram-Schmidt), giving
/// a Haar-distributed orthogonal frame.
pub fn random_orthogonal<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DMatrix<f64> {
    loop {
        let mut q = DMatrix::<f64>::from_fn(n, n, |_, _| rng.sample(StandardNormal));
        let mut ok = true;
        for i in 0..n {
            for j in 0..i {
                let d: f64 = (0..n).map(|k| q[(i, k)] * q[(j, k)]).sum();
                for k in 0..n {
                    q[(i, k)] -= d * q[(j, k)];
                }
            }
            let norm: f64 = (0..n).map(|k| q[(i, k)] * q[(i, k)]).sum::<f64>().sqrt();
            if norm < 1e-8 {
                ok = false;
                break;
            }
            for k in 0..n {
                q[(i, k)] /= norm;
            }
        }
        if ok {
            return q;
        }
    }
}

/// Pairwise (cascade) summation; the reduction tree depends only on the length.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 8 {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}
