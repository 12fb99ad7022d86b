//! Energy spectra and ensemble weight vectors.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative gap below which two energies count as degenerate.
pub const SPECTRUM_DEGENERACY_REL: f64 = 1e-12;
/// Absolute gap below which two weights count as degenerate.
pub const WEIGHT_DEGENERACY_ABS: f64 = 1e-12;
/// Allowed deviation of the weight sum from one.
pub const WEIGHT_SUM_TOL: f64 = 1e-12;

/// Strictly ascending, non-degenerate eigenvalues of the target Hamiltonian.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergySpectrum {
    values: Vec<f64>,
}

impl EnergySpectrum {
    /// Validates that `values` has at least two entries and is strictly
    /// ascending with gaps above `1e-12` times the spread.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        Self::with_tolerance(values, SPECTRUM_DEGENERACY_REL)
    }

    pub fn with_tolerance(values: Vec<f64>, relative_tol: f64) -> Result<Self> {
        let d = values.len();
        if d < 2 {
            return Err(Error::DimensionOutOfRange {
                dim: d,
                min: 2,
                max: usize::MAX,
            });
        }
        if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "energy E_{bad} is not finite"
            )));
        }
        let spread = values[d - 1] - values[0];
        let eps = relative_tol * spread.abs();
        for k in 0..d - 1 {
            let gap = values[k + 1] - values[k];
            if gap <= eps || gap <= 0.0 {
                return Err(Error::DegenerateSpectrum { index: k, gap });
            }
        }
        Ok(Self { values })
    }

    /// Sorts before validating.
    pub fn from_unsorted(mut values: Vec<f64>) -> Result<Self> {
        values.sort_by(f64::total_cmp);
        Self::new(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// `E_{k+1} - E_k`.
    pub fn gap(&self, k: usize) -> f64 {
        self.values[k + 1] - self.values[k]
    }

    pub fn spread(&self) -> f64 {
        self.values[self.dim() - 1] - self.values[0]
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        if factor <= 0.0 {
            return Err(Error::InvalidArgument(
                "spectrum scale factor must be positive".into(),
            ));
        }
        Self::new(self.values.iter().map(|e| e * factor).collect())
    }
}

/// Which closed-form branch of the bound theorems a weight vector falls into.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum WeightShape {
    /// `w_0 > w_1 > ... > w_{D-1} >= 0`: every entry distinct. A single
    /// trailing zero is allowed since all entries stay distinct.
    StrictFull,
    /// `w_0 > ... > w_{K-1} > w_K = ... = w_{D-1} = 0` with `K < D - 1`.
    StrictHead {
        k: usize,
    },
    Other,
}

impl WeightShape {
    pub fn name(&self) -> &'static str {
        match self {
            WeightShape::StrictFull => "strict-full",
            WeightShape::StrictHead { .. } => "strict-head",
            WeightShape::Other => "other",
        }
    }
}

impl fmt::Display for WeightShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WeightShape::StrictHead { k } => write!(f, "strict-head(K={k})"),
            other => f.write_str(other.name()),
        }
    }
}

/// A descending probability vector of ensemble weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightVector {
    weights: Vec<f64>,
}

impl WeightVector {
    /// Validates non-negativity, descending order and unit sum.
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.len() < 2 {
            return Err(Error::DimensionOutOfRange {
                dim: weights.len(),
                min: 2,
                max: usize::MAX,
            });
        }
        for (l, &x) in weights.iter().enumerate() {
            if !x.is_finite() || x < 0.0 {
                return Err(Error::InvalidWeights(format!(
                    "w_{l} = {x} is not a finite non-negative number"
                )));
            }
        }
        if let Some(l) = weights.windows(2).position(|p| p[1] > p[0]) {
            return Err(Error::InvalidWeights(format!(
                "weights must be non-increasing but w_{} < w_{}",
                l,
                l + 1
            )));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::InvalidWeights(format!(
                "weights sum to {sum}, not 1"
            )));
        }
        Ok(Self { weights })
    }

    /// Rescales arbitrary non-negative descending entries to unit sum.
    pub fn normalized(raw: Vec<f64>) -> Result<Self> {
        let sum: f64 = raw.iter().sum();
        if !(sum > 0.0) || !sum.is_finite() {
            return Err(Error::InvalidWeights(
                "cannot normalize a vector with non-positive sum".into(),
            ));
        }
        Self::new(raw.into_iter().map(|x| x / sum).collect())
    }

    /// Rebuilds `w` from gap coordinates `mu_l = w_l - w_{l+1}`, `mu_{D-1} = w_{D-1}`.
    pub fn from_mu(mu: &[f64]) -> Result<Self> {
        let d = mu.len();
        let mut w = vec![0.0; d];
        let mut acc = 0.0;
        for l in (0..d).rev() {
            acc += mu[l];
            w[l] = acc;
        }
        Self::new(w)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.weights
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn get(&self, l: usize) -> f64 {
        self.weights[l]
    }

    /// `w_l` with the convention `w_D = 0`.
    pub fn padded(&self, l: usize) -> f64 {
        self.weights.get(l).copied().unwrap_or(0.0)
    }

    /// Number of strictly positive weights.
    pub fn positive_count(&self) -> usize {
        self.weights
            .iter()
            .take_while(|&&x| x > WEIGHT_DEGENERACY_ABS)
            .count()
    }

    /// Gap coordinates.
    pub fn mu(&self) -> Vec<f64> {
        let d = self.dim();
        (0..d)
            .map(|l| self.padded(l) - self.padded(l + 1))
            .collect()
    }

    pub fn shape(&self) -> WeightShape {
        let d = self.dim();
        let k = self.positive_count();
        let strict_head = (0..k.saturating_sub(1))
            .all(|l| self.weights[l] - self.weights[l + 1] > WEIGHT_DEGENERACY_ABS);
        if !strict_head {
            return WeightShape::Other;
        }
        if k >= d - 1 {
            WeightShape::StrictFull
        } else {
            WeightShape::StrictHead { k }
        }
    }

    /// Number of states whose errors the summed bounds refer to: all `D`
    /// for a strictly decreasing vector, otherwise the positive count `K`.
    pub fn targeted_count(&self) -> usize {
        match self.shape() {
            WeightShape::StrictFull => self.dim(),
            _ => self.positive_count(),
        }
    }

    /// True when `w_k` differs from both neighbours, with `w_D = 0`.
    pub fn is_nondegenerate_at(&self, k: usize) -> bool {
        if k >= self.dim() {
            return false;
        }
        let left = k == 0 || self.padded(k - 1) - self.padded(k) > WEIGHT_DEGENERACY_ABS;
        let right = self.padded(k) - self.padded(k + 1) > WEIGHT_DEGENERACY_ABS;
        left && right
    }

    pub fn dot(&self, other: &[f64]) -> f64 {
        self.weights.iter().zip(other).map(|(a, b)| a * b).sum()
    }
}

/// Heaviside step with `theta(0) = 1/2`.
pub fn heaviside(x: i64) -> f64 {
    match x.cmp(&0) {
        std::cmp::Ordering::Greater => 1.0,
        std::cmp::Ordering::Equal => 0.5,
        std::cmp::Ordering::Less => 0.0,
    }
}

pub(crate) fn check_dims(w: &WeightVector, e: &EnergySpectrum) -> Result<()> {
    if w.dim() != e.dim() {
        return Err(Error::DimensionMismatch {
            expected: e.dim(),
            actual: w.dim(),
        });
    }
    Ok(())
}
