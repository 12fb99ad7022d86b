//! Dense symmetric eigensolver and matrix-exponential helpers.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Off-diagonal Frobenius norm at which Jacobi sweeps stop.
pub const JACOBI_TOL: f64 = 1e-12;
const MAX_SWEEPS: usize = 100;

/// Eigen-decomposition `A = V diag(values) V^T` with ascending eigenvalues;
/// column `k` of `vectors` belongs to `values[k]`.
#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    pub values: Vec<f64>,
    pub vectors: DMatrix<f64>,
}

fn off_diagonal_norm(a: &DMatrix<f64>) -> f64 {
    let n = a.nrows();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += a[(i, j)] * a[(i, j)];
            }
        }
    }
    s.sqrt()
}

pub fn max_asymmetry(a: &DMatrix<f64>) -> f64 {
    let n = a.nrows();
    let mut m: f64 = 0.0;
    for i in 0..n {
        for j in 0..i {
            m = m.max((a[(i, j)] - a[(j, i)]).abs());
        }
    }
    m
}

/// Cyclic Jacobi sweeps on a real symmetric matrix.
///
/// Each rotation annihilates one off-diagonal pair; sweeps continue until
/// the off-diagonal norm drops below `JACOBI_TOL` relative to the
/// Frobenius norm of the input (absolute for the zero matrix).
pub fn symmetric_eigen(a: &DMatrix<f64>) -> Result<SymmetricEigen> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch {
            expected: a.nrows(),
            actual: a.ncols(),
        });
    }
    let scale = a.norm().max(1.0);
    let asym = max_asymmetry(a);
    if asym > 1e-12 * scale {
        return Err(Error::NotSymmetric { asymmetry: asym });
    }
    let n = a.nrows();
    let mut m = a.clone();
    let mut v = DMatrix::<f64>::identity(n, n);

    for _ in 0..MAX_SWEEPS {
        if off_diagonal_norm(&m) <= JACOBI_TOL * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let app = m[(p, p)];
                let aqq = m[(q, q)];
                let tau = (aqq - app) / (2.0 * apq);
                // signum(0.0) == 1.0, so tau = 0 gives the 45 degree rotation
                let t = tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;

                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
                m[(p, q)] = 0.0;
                m[(q, p)] = 0.0;
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
    order.sort_by(|&i, &j| m[(i, i)].total_cmp(&m[(j, j)]));
    let values = order.iter().map(|&i| m[(i, i)]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| v[(r, order[c])]);
    Ok(SymmetricEigen { values, vectors })
}

/// Antisymmetric generator filled row-wise from the strict upper triangle:
/// `A_pq = params[idx]`, `A_qp = -params[idx]` for `p < q`.
pub fn antisymmetric_from_params(dim: usize, params: &[f64]) -> Result<DMatrix<f64>> {
    let expected = dim * (dim - 1) / 2;
    if params.len() != expected {
        return Err(Error::DimensionMismatch {
            expected,
            actual: params.len(),
        });
    }
    let mut a = DMatrix::zeros(dim, dim);
    let mut idx = 0;
    for p in 0..dim {
        for q in p + 1..dim {
            a[(p, q)] = params[idx];
            a[(q, p)] = -params[idx];
            idx += 1;
        }
    }
    Ok(a)
}

/// Number of free parameters of a `dim x dim` antisymmetric matrix.
pub fn antisymmetric_param_count(dim: usize) -> usize {
    dim * (dim - 1) / 2
}

/// `d/dt exp(A + t E)` at `t = 0`, read off the upper-right block of
/// `exp([[A, E], [0, A]])`.
pub fn expm_frechet(a: &DMatrix<f64>, direction: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let mut block = DMatrix::zeros(2 * n, 2 * n);
    block.view_mut((0, 0), (n, n)).copy_from(a);
    block.view_mut((n, n), (n, n)).copy_from(a);
    block.view_mut((0, n), (n, n)).copy_from(direction);
    let e = block.exp();
    e.view((0, n), (n, n)).into_owned()
}
