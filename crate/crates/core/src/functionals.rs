//! Exact error functionals of a trial ensemble state.
//!
//! A trial state is `U rho_w U^dagger`; every error below is a linear
//! function of the unistochastic matrix `X_kl = |U_kl|^2`.

use serde::{Deserialize, Serialize};

use crate::basis::{BasisMap, UnistochasticMatrix};
use crate::error::{Error, Result};
use crate::spectrum::{check_dims, EnergySpectrum, WeightVector};

/// `sum_k w_k E_k` for descending `w` and ascending `E`, the minimum of the
/// ensemble energy over all trial states.
pub fn ensemble_energy(w: &WeightVector, e: &EnergySpectrum) -> Result<f64> {
    check_dims(w, e)?;
    Ok(w.dot(e.values()))
}

/// All error quantities of one trial ensemble state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBundle {
    /// `w . (E~ - E)`, non-negative by the ensemble variational principle.
    pub delta_e_w: f64,
    /// The same error from the weight side, `(X w - w) . E`.
    pub delta_e_w_weight_form: f64,
    /// Squared Hilbert-Schmidt distance `2 w . (w - X w)`.
    pub delta_rho_w: f64,
    /// `1 - X_kk` per eigenstate.
    pub delta_psi: Vec<f64>,
    /// `E~_k - E_k` per eigenenergy (signed).
    pub delta_e: Vec<f64>,
    /// Number of states the summed errors run over.
    pub targeted: usize,
    pub sum_psi: f64,
    pub sum_abs_e: f64,
    /// Partial sums `F_k = sum_{j<=k} (E~_j - E_j)`.
    pub kyfan_partials: Vec<f64>,
}

impl ErrorBundle {
    pub fn dim(&self) -> usize {
        self.delta_psi.len()
    }
}

/// Errors of the trial state `U rho_w U^dagger`.
pub fn error_bundle(u: &BasisMap, w: &WeightVector, e: &EnergySpectrum) -> Result<ErrorBundle> {
    check_dims(w, e)?;
    if u.dim() != w.dim() {
        return Err(Error::DimensionMismatch {
            expected: w.dim(),
            actual: u.dim(),
        });
    }
    let x = UnistochasticMatrix::from_basis(u)?;
    Ok(error_bundle_from_stochastic(&x, w, e))
}

/// Errors evaluated at any doubly stochastic `X` (the functionals extend
/// linearly to the whole Birkhoff polytope).
pub fn error_bundle_from_stochastic(
    x: &UnistochasticMatrix,
    w: &WeightVector,
    e: &EnergySpectrum,
) -> ErrorBundle {
    let d = w.dim();
    let wv = w.as_slice();
    let ev = e.values();
    let trial_e = x.apply_transpose(ev);
    let trial_w = x.apply(wv);

    let delta_e: Vec<f64> = trial_e.iter().zip(ev).map(|(t, ex)| t - ex).collect();
    let delta_e_w = w.dot(&delta_e);
    let delta_e_w_weight_form: f64 = trial_w
        .iter()
        .zip(wv)
        .zip(ev)
        .map(|((tw, wl), el)| (tw - wl) * el)
        .sum();
    let delta_rho_w = 2.0
        * wv.iter()
            .zip(&trial_w)
            .map(|(a, b)| a * (a - b))
            .sum::<f64>();
    let delta_psi: Vec<f64> = (0..d).map(|k| 1.0 - x.get(k, k)).collect();

    let mut kyfan_partials = Vec::with_capacity(d);
    let mut acc = 0.0;
    for de in &delta_e {
        acc += de;
        kyfan_partials.push(acc);
    }

    let targeted = w.targeted_count();
    let sum_psi = delta_psi[..targeted].iter().sum();
    let sum_abs_e = delta_e[..targeted].iter().map(|v| v.abs()).sum();

    ErrorBundle {
        delta_e_w,
        delta_e_w_weight_form,
        delta_rho_w,
        delta_psi,
        delta_e,
        targeted,
        sum_psi,
        sum_abs_e,
        kyfan_partials,
    }
}

/// `X_kl = |U_kl|^2`.
pub fn unistochastic_from_basis(u: &BasisMap) -> Result<UnistochasticMatrix> {
    UnistochasticMatrix::from_basis(u)
}

/// Prefactors `(1/(E_{D-1}-E_0), 1/(E_1-E_0))` of the pure-state bound
/// `q_- dE <= ||Psi~ - Psi_0||^2 / 2 <= q_+ dE` for the ground state.
pub fn rr_state_bounds(e: &EnergySpectrum) -> (f64, f64) {
    let v = e.values();
    (1.0 / (v[v.len() - 1] - v[0]), 1.0 / (v[1] - v[0]))
}

/// `||A||_HS * sqrt(a_+ dE_w)`, the bound on the error of any observable
/// expectation value.
pub fn observable_error_bound(hs_norm_a: f64, a_plus: f64, delta_e_w: f64) -> Result<f64> {
    for (name, v) in [
        ("||A||_HS", hs_norm_a),
        ("a_+", a_plus),
        ("dE_w", delta_e_w),
    ] {
        if !(v >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "{name} must be non-negative, got {v}"
            )));
        }
    }
    Ok(hs_norm_a * (a_plus * delta_e_w).sqrt())
}
