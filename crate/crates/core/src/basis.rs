//! Basis changes between the exact eigenbasis and a trial eigenbasis.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Entrywise tolerance on `U^dagger U = I`.
pub const UNITARITY_TOL: f64 = 1e-10;
/// Tolerance on row and column sums of a doubly stochastic matrix.
pub const STOCHASTIC_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BasisMode {
    Orthogonal,
    Unitary,
    Permutation,
}

impl BasisMode {
    pub fn name(&self) -> &'static str {
        match self {
            BasisMode::Orthogonal => "orthogonal",
            BasisMode::Unitary => "unitary",
            BasisMode::Permutation => "permutation",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Entries {
    Real(DMatrix<f64>),
    Complex(DMatrix<Complex64>),
}

/// A unitary `U` with `U_kl = <Psi_k|U|Psi_l>` in the exact eigenbasis.
///
/// Column `l` holds the `l`-th trial eigenvector. Only `|U_kl|^2` enters
/// any error functional, so the mode is metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisMap {
    entries: Entries,
    mode: BasisMode,
}

impl BasisMap {
    pub fn identity(dim: usize) -> Self {
        Self {
            entries: Entries::Real(DMatrix::identity(dim, dim)),
            mode: BasisMode::Permutation,
        }
    }

    /// Real orthogonal matrix, validated to `UNITARITY_TOL`.
    pub fn orthogonal(u: DMatrix<f64>) -> Result<Self> {
        Self::orthogonal_with_tolerance(u, UNITARITY_TOL)
    }

    pub fn orthogonal_with_tolerance(u: DMatrix<f64>, tol: f64) -> Result<Self> {
        if !u.is_square() {
            return Err(Error::DimensionMismatch {
                expected: u.nrows(),
                actual: u.ncols(),
            });
        }
        let deviation = real_unitarity_deviation(&u);
        if !(deviation <= tol) {
            return Err(Error::NotUnitary { deviation });
        }
        Ok(Self {
            entries: Entries::Real(u),
            mode: BasisMode::Orthogonal,
        })
    }

    /// Complex unitary matrix, validated to `UNITARITY_TOL`.
    pub fn unitary(u: DMatrix<Complex64>) -> Result<Self> {
        if !u.is_square() {
            return Err(Error::DimensionMismatch {
                expected: u.nrows(),
                actual: u.ncols(),
            });
        }
        let d = u.nrows();
        let gram = u.adjoint() * &u;
        let mut deviation: f64 = 0.0;
        for i in 0..d {
            for j in 0..d {
                let target = if i == j { 1.0 } else { 0.0 };
                deviation = deviation.max((gram[(i, j)] - Complex64::new(target, 0.0)).norm());
            }
        }
        if !(deviation <= UNITARITY_TOL) {
            return Err(Error::NotUnitary { deviation });
        }
        Ok(Self {
            entries: Entries::Complex(u),
            mode: BasisMode::Unitary,
        })
    }

    /// Permutation basis map: trial state `l` equals exact state `mapping[l]`.
    pub fn permutation(mapping: &[usize]) -> Result<Self> {
        let d = mapping.len();
        let mut seen = vec![false; d];
        for &m in mapping {
            if m >= d || seen[m] {
                return Err(Error::InvalidArgument(format!(
                    "{mapping:?} is not a permutation of 0..{d}"
                )));
            }
            seen[m] = true;
        }
        let mut u = DMatrix::zeros(d, d);
        for (l, &k) in mapping.iter().enumerate() {
            u[(k, l)] = 1.0;
        }
        Ok(Self {
            entries: Entries::Real(u),
            mode: BasisMode::Permutation,
        })
    }

    pub fn dim(&self) -> usize {
        match &self.entries {
            Entries::Real(m) => m.nrows(),
            Entries::Complex(m) => m.nrows(),
        }
    }

    pub fn mode(&self) -> BasisMode {
        self.mode
    }

    /// Real part of the matrix, `None` for genuinely complex maps.
    pub fn as_real(&self) -> Option<&DMatrix<f64>> {
        match &self.entries {
            Entries::Real(m) => Some(m),
            Entries::Complex(_) => None,
        }
    }

    pub fn to_complex(&self) -> DMatrix<Complex64> {
        match &self.entries {
            Entries::Real(m) => m.map(|x| Complex64::new(x, 0.0)),
            Entries::Complex(m) => m.clone(),
        }
    }

    /// Entrywise squared moduli `|U_kl|^2`.
    pub fn squared_moduli(&self) -> DMatrix<f64> {
        match &self.entries {
            Entries::Real(m) => m.map(|x| x * x),
            Entries::Complex(m) => m.map(|z| z.norm_sqr()),
        }
    }

    pub fn unitarity_deviation(&self) -> f64 {
        match &self.entries {
            Entries::Real(m) => real_unitarity_deviation(m),
            Entries::Complex(m) => {
                let d = m.nrows();
                let gram = m.adjoint() * m;
                let mut dev: f64 = 0.0;
                for i in 0..d {
                    for j in 0..d {
                        let t = if i == j { 1.0 } else { 0.0 };
                        dev = dev.max((gram[(i, j)] - Complex64::new(t, 0.0)).norm());
                    }
                }
                dev
            }
        }
    }
}

fn real_unitarity_deviation(u: &DMatrix<f64>) -> f64 {
    let gram = u.transpose() * u;
    let d = u.nrows();
    let mut dev: f64 = 0.0;
    for i in 0..d {
        for j in 0..d {
            let t = if i == j { 1.0 } else { 0.0 };
            dev = dev.max((gram[(i, j)] - t).abs());
        }
    }
    dev
}

/// Doubly stochastic matrix `X_kl = |<Psi_k|Psi~_l>|^2`.
///
/// `X w` is the weight vector seen by the exact basis and `X^T E` holds
/// the trial energy expectations.
#[derive(Debug, Clone, PartialEq)]
pub struct UnistochasticMatrix {
    x: DMatrix<f64>,
}

impl UnistochasticMatrix {
    pub fn from_basis(u: &BasisMap) -> Result<Self> {
        let deviation = u.unitarity_deviation();
        if !(deviation <= UNITARITY_TOL) {
            return Err(Error::NotUnitary { deviation });
        }
        Self::doubly_stochastic(u.squared_moduli())
    }

    /// Accepts any doubly stochastic matrix, e.g. a point of the Birkhoff
    /// polytope that need not be unistochastic.
    pub fn doubly_stochastic(x: DMatrix<f64>) -> Result<Self> {
        if !x.is_square() {
            return Err(Error::DimensionMismatch {
                expected: x.nrows(),
                actual: x.ncols(),
            });
        }
        let d = x.nrows();
        if x.iter().any(|&v| v < -STOCHASTIC_TOL || !v.is_finite()) {
            return Err(Error::InvalidArgument("negative matrix entry".into()));
        }
        for i in 0..d {
            let row: f64 = x.row(i).sum();
            let col: f64 = x.column(i).sum();
            if (row - 1.0).abs() > STOCHASTIC_TOL || (col - 1.0).abs() > STOCHASTIC_TOL {
                return Err(Error::InvalidArgument(format!(
                    "row/column {i} sums to {row}/{col}, not 1"
                )));
            }
        }
        Ok(Self { x })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn dim(&self) -> usize {
        self.x.nrows()
    }

    pub fn get(&self, k: usize, l: usize) -> f64 {
        self.x[(k, l)]
    }

    /// `X w`.
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        let d = self.dim();
        (0..d)
            .map(|k| (0..d).map(|l| self.x[(k, l)] * v[l]).sum())
            .collect()
    }

    /// `X^T v`.
    pub fn apply_transpose(&self, v: &[f64]) -> Vec<f64> {
        let d = self.dim();
        (0..d)
            .map(|l| (0..d).map(|k| self.x[(k, l)] * v[k]).sum())
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rotation(theta: f64) -> DMatrix<f64> {
        DMatrix::from_row_slice(2, 2, &[theta.cos(), -theta.sin(), theta.sin(), theta.cos()])
    }

    #[test]
    fn identity_gives_identity() {
        let x = UnistochasticMatrix::from_basis(&BasisMap::identity(4)).unwrap();
        assert_eq!(x.matrix(), &DMatrix::<f64>::identity(4, 4));
    }

    #[test]
    fn permutation_gives_same_permutation_matrix() {
        let p = BasisMap::permutation(&[2, 0, 1]).unwrap();
        let x = UnistochasticMatrix::from_basis(&p).unwrap();
        assert_eq!(x.matrix(), p.as_real().unwrap());
        assert_eq!(x.get(2, 0), 1.0);
        assert!(BasisMap::permutation(&[0, 0, 1]).is_err());
    }

    #[test]
    fn rotation_squares() {
        let theta = 0.37_f64;
        let u = BasisMap::orthogonal(rotation(theta)).unwrap();
        let x = UnistochasticMatrix::from_basis(&u).unwrap();
        let (c2, s2) = (theta.cos().powi(2), theta.sin().powi(2));
        let expected = DMatrix::from_row_slice(2, 2, &[c2, s2, s2, c2]);
        assert!((x.matrix() - expected).abs().max() < 1e-15);
    }

    #[test]
    fn rejects_non_unitary() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.1, 0.0, 1.0]);
        assert!(matches!(
            BasisMap::orthogonal(m),
            Err(Error::NotUnitary { .. })
        ));
        let bad = DMatrix::from_row_slice(2, 2, &[0.5, 0.5, 0.5, 0.6]);
        assert!(UnistochasticMatrix::doubly_stochastic(bad).is_err());
    }

    #[test]
    fn complex_phases_only_enter_through_moduli() {
        let i = Complex64::new(0.0, 1.0);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let u = DMatrix::from_row_slice(
            2,
            2,
            &[Complex64::new(s, 0.0), i * s, i * s, Complex64::new(s, 0.0)],
        );
        let map = BasisMap::unitary(u).unwrap();
        let x = UnistochasticMatrix::from_basis(&map).unwrap();
        assert!((x.get(0, 1) - 0.5).abs() < 1e-15);
        assert_eq!(map.mode(), BasisMode::Unitary);
    }
}
