//! Linear error bounds relating every error quantity to the ensemble-energy
//! error `dE_w`, together with a compliance checker.
//!
//! Each bound has the form `d_- dE_w <= dQ <= d_+ dE_w` and is tight for
//! `dE_w <= g`, where `g` is the smallest ensemble error reachable by
//! swapping two adjacent exact eigenstates.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functionals::ErrorBundle;
use crate::spectrum::{check_dims, heaviside, EnergySpectrum, WeightShape, WeightVector};

/// Absolute slack allowed when checking a bound.
pub const BOUND_SLACK: f64 = 1e-10;

/// Minimal (`g`) and maximal (`G`) ensemble error of a two-state swap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapFunctions {
    pub g: f64,
    #[serde(rename = "G")]
    pub big_g: f64,
}

/// `t_k = (w_k - w_{k+1})(E_{k+1} - E_k)` with `w_D = 0`; defined for `k < D - 1`.
pub fn swap_error(w: &WeightVector, e: &EnergySpectrum, k: usize) -> f64 {
    (w.padded(k) - w.padded(k + 1)) * e.gap(k)
}

pub fn gap_functions(w: &WeightVector, e: &EnergySpectrum) -> Result<GapFunctions> {
    check_dims(w, e)?;
    let d = w.dim();
    let g = (0..d - 1)
        .filter(|&k| w.get(k) > w.get(k + 1))
        .map(|k| swap_error(w, e, k))
        .fold(f64::INFINITY, f64::min);
    if !g.is_finite() {
        return Err(Error::EqualWeights);
    }
    let big_g = (w.get(0) - w.get(d - 1)) * e.spread();
    Ok(GapFunctions { g, big_g })
}

fn require_theorem_shape(w: &WeightVector) -> Result<WeightShape> {
    match w.shape() {
        WeightShape::Other => Err(Error::ShapeViolation {
            shape: "other",
            required: "strictly decreasing, or strictly decreasing head with zero tail",
        }),
        s => Ok(s),
    }
}

fn min_max(it: impl Iterator<Item = f64>) -> (f64, f64) {
    it.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
        (lo.min(v), hi.max(v))
    })
}

/// `(a_-, a_+)` bounding the ensemble-state error `dRho_w`.
pub fn ensemble_state_prefactors(w: &WeightVector, e: &EnergySpectrum) -> Result<(f64, f64)> {
    check_dims(w, e)?;
    let d = w.dim();
    let ratio = |k: usize| (w.padded(k) - w.padded(k + 1)) / e.gap(k);
    match require_theorem_shape(w)? {
        WeightShape::StrictFull => {
            let (lo, hi) = min_max((0..d - 1).map(ratio));
            Ok((2.0 * lo, 2.0 * hi))
        }
        WeightShape::StrictHead { k: kk } => {
            let ev = e.values();
            let tail = w.get(kk - 1) / (ev[d - 1] - ev[kk - 1]);
            let (head_lo, _) = min_max((0..kk - 1).map(ratio));
            let (_, hi) = min_max((0..kk).map(ratio));
            Ok((2.0 * head_lo.min(tail), 2.0 * hi))
        }
        WeightShape::Other => unreachable!(),
    }
}

fn require_nondegenerate(w: &WeightVector, k: usize) -> Result<()> {
    if k >= w.dim() {
        return Err(Error::IndexOutOfRange {
            index: k,
            reason: format!("dimension is {}", w.dim()),
        });
    }
    if !w.is_nondegenerate_at(k) {
        return Err(Error::DegenerateWeight { index: k });
    }
    Ok(())
}

/// `b_+^(k)` bounding the eigenstate error `dPsi_k` from above (the lower
/// bound is zero).
pub fn eigenstate_prefactor(k: usize, w: &WeightVector, e: &EnergySpectrum) -> Result<f64> {
    check_dims(w, e)?;
    require_nondegenerate(w, k)?;
    let d = w.dim();
    let t = if k == 0 {
        swap_error(w, e, 0)
    } else if k == d - 1 {
        swap_error(w, e, d - 2)
    } else {
        swap_error(w, e, k - 1).min(swap_error(w, e, k))
    };
    Ok(1.0 / t)
}

/// Lower and upper prefactors for the summed eigenstate error over the
/// targeted states.
pub fn eigenstate_sum_prefactors(w: &WeightVector, e: &EnergySpectrum) -> Result<(f64, f64)> {
    check_dims(w, e)?;
    let shape = require_theorem_shape(w)?;
    let gaps = gap_functions(w, e)?;
    match shape {
        WeightShape::StrictFull => Ok((2.0 / gaps.big_g, 2.0 / gaps.g)),
        WeightShape::StrictHead { k: kk } => {
            let upper = (0..kk)
                .map(|k| 2.0 * heaviside(kk as i64 - k as i64 - 1) / swap_error(w, e, k))
                .fold(f64::NEG_INFINITY, f64::max);
            Ok((1.0 / gaps.big_g, upper))
        }
        WeightShape::Other => unreachable!(),
    }
}

/// `(c_-^(k), c_+^(k))` bounding the signed eigenenergy error `dE_k`.
/// These depend on the weights only.
pub fn eigenenergy_prefactors(k: usize, w: &WeightVector) -> Result<(f64, f64)> {
    require_nondegenerate(w, k)?;
    let c_minus = if k == 0 {
        0.0
    } else {
        1.0 / (w.get(k) - w.get(k - 1))
    };
    let c_plus = 1.0 / (w.get(k) - w.padded(k + 1));
    Ok((c_minus, c_plus))
}

/// Lower and upper prefactors for the summed absolute eigenenergy error.
pub fn eigenenergy_sum_prefactors(w: &WeightVector) -> Result<(f64, f64)> {
    let d = w.dim();
    match require_theorem_shape(w)? {
        WeightShape::StrictFull => {
            let upper = (0..d - 1)
                .map(|k| 2.0 / (w.get(k) - w.get(k + 1)))
                .fold(f64::NEG_INFINITY, f64::max);
            Ok((2.0 / (w.get(0) - w.get(d - 1)), upper))
        }
        WeightShape::StrictHead { k: kk } => {
            let upper = (0..kk)
                .map(|k| 2.0 * heaviside(kk as i64 - k as i64 - 1) / (w.get(k) - w.get(k + 1)))
                .fold(f64::NEG_INFINITY, f64::max);
            Ok((1.0 / w.get(0), upper))
        }
        WeightShape::Other => unreachable!(),
    }
}

/// A lower/upper prefactor pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prefactors {
    pub lower: f64,
    pub upper: f64,
}

impl From<(f64, f64)> for Prefactors {
    fn from((lower, upper): (f64, f64)) -> Self {
        Self { lower, upper }
    }
}

/// Every prefactor available for a given `(w, E)`.
///
/// Entries that the theorems do not cover for this weight vector are
/// `None`, and the reason is listed in `refusals`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundSet {
    pub shape: WeightShape,
    pub targeted: usize,
    pub gaps: GapFunctions,
    /// Ensemble-state `(a_-, a_+)`.
    pub ensemble_state: Option<Prefactors>,
    /// Per-state `b_+^(k)`.
    pub eigenstate: Vec<Option<f64>>,
    pub eigenstate_sum: Option<Prefactors>,
    /// Per-state `(c_-^(k), c_+^(k))`.
    pub eigenenergy: Vec<Option<Prefactors>>,
    pub eigenenergy_sum: Option<Prefactors>,
    pub refusals: Vec<String>,
}

impl BoundSet {
    pub fn compute(w: &WeightVector, e: &EnergySpectrum) -> Result<Self> {
        check_dims(w, e)?;
        let gaps = gap_functions(w, e)?;
        let mut refusals = Vec::new();
        let mut keep = |label: String, r: Result<(f64, f64)>| match r {
            Ok(p) => Some(Prefactors::from(p)),
            Err(err) => {
                refusals.push(format!("{label}: {err}"));
                None
            }
        };
        let ensemble_state = keep("delta_rho_w".into(), ensemble_state_prefactors(w, e));
        let eigenstate_sum = keep("sum_psi".into(), eigenstate_sum_prefactors(w, e));
        let eigenenergy_sum = keep("sum_abs_E".into(), eigenenergy_sum_prefactors(w));
        let eigenenergy = (0..w.dim())
            .map(|k| keep(format!("delta_E_{k}"), eigenenergy_prefactors(k, w)))
            .collect();
        let eigenstate = (0..w.dim())
            .map(|k| {
                keep(
                    format!("delta_psi_{k}"),
                    eigenstate_prefactor(k, w, e).map(|b| (0.0, b)),
                )
                .map(|p| p.upper)
            })
            .collect();
        Ok(Self {
            shape: w.shape(),
            targeted: w.targeted_count(),
            gaps,
            ensemble_state,
            eigenstate,
            eigenstate_sum,
            eigenenergy,
            eigenenergy_sum,
            refusals,
        })
    }

    /// `(quantity, lower, upper)` rows for every available prefactor.
    pub fn rows(&self) -> Vec<(String, f64, f64)> {
        let mut rows = Vec::new();
        if let Some(p) = self.ensemble_state {
            rows.push(("delta_rho_w".to_string(), p.lower, p.upper));
        }
        for (k, b) in self.eigenstate.iter().enumerate() {
            if let Some(b) = b {
                rows.push((format!("delta_psi_{k}"), 0.0, *b));
            }
        }
        if let Some(p) = self.eigenstate_sum {
            rows.push(("sum_psi".to_string(), p.lower, p.upper));
        }
        for (k, c) in self.eigenenergy.iter().enumerate() {
            if let Some(p) = c {
                rows.push((format!("delta_E_{k}"), p.lower, p.upper));
            }
        }
        if let Some(p) = self.eigenenergy_sum {
            rows.push(("sum_abs_E".to_string(), p.lower, p.upper));
        }
        rows
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ComplianceStatus {
    Compliant,
    Violated,
    /// `dE_w > g`: the linear bounds are not guaranteed, nothing is judged.
    OutOfRegime,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub quantity: String,
    pub value: f64,
    pub lower: f64,
    pub upper: f64,
    /// `value - lower`.
    pub slack_lower: f64,
    /// `upper - value`.
    pub slack_upper: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplianceReport {
    pub delta_e_w: f64,
    pub g: f64,
    pub status: ComplianceStatus,
    pub checks: Vec<BoundCheck>,
}

impl ComplianceReport {
    /// Failed checks, counted only inside the validity regime.
    pub fn violations(&self) -> Vec<&BoundCheck> {
        if self.status == ComplianceStatus::OutOfRegime {
            return Vec::new();
        }
        self.checks.iter().filter(|c| !c.holds).collect()
    }

    pub fn in_regime(&self) -> bool {
        self.status != ComplianceStatus::OutOfRegime
    }

    pub fn check(&self, quantity: &str) -> Option<&BoundCheck> {
        self.checks.iter().find(|c| c.quantity == quantity)
    }
}

pub fn check_bounds(bundle: &ErrorBundle, bounds: &BoundSet) -> ComplianceReport {
    check_bounds_with_slack(bundle, bounds, BOUND_SLACK)
}

pub fn check_bounds_with_slack(
    bundle: &ErrorBundle,
    bounds: &BoundSet,
    slack: f64,
) -> ComplianceReport {
    let de = bundle.delta_e_w;
    let mut checks = Vec::new();
    let mut push = |quantity: String, value: f64, lo: f64, hi: f64| {
        let (lower, upper) = (lo * de, hi * de);
        let slack_lower = value - lower;
        let slack_upper = upper - value;
        checks.push(BoundCheck {
            quantity,
            value,
            lower,
            upper,
            slack_lower,
            slack_upper,
            holds: slack_lower >= -slack && slack_upper >= -slack,
        });
    };

    if let Some(p) = bounds.ensemble_state {
        push("delta_rho_w".into(), bundle.delta_rho_w, p.lower, p.upper);
    }
    for (k, b) in bounds.eigenstate.iter().enumerate() {
        if let Some(b) = b {
            push(format!("delta_psi_{k}"), bundle.delta_psi[k], 0.0, *b);
        }
    }
    if let Some(p) = bounds.eigenstate_sum {
        push("sum_psi".into(), bundle.sum_psi, p.lower, p.upper);
    }
    for (k, c) in bounds.eigenenergy.iter().enumerate() {
        if let Some(p) = c {
            push(format!("delta_E_{k}"), bundle.delta_e[k], p.lower, p.upper);
        }
    }
    if let Some(p) = bounds.eigenenergy_sum {
        push("sum_abs_E".into(), bundle.sum_abs_e, p.lower, p.upper);
    }

    let in_regime = de <= bounds.gaps.g;
    let status = if !in_regime {
        ComplianceStatus::OutOfRegime
    } else if checks.iter().all(|c| c.holds) {
        ComplianceStatus::Compliant
    } else {
        ComplianceStatus::Violated
    };
    ComplianceReport {
        delta_e_w: de,
        g: bounds.gaps.g,
        status,
        checks,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::BasisMap;
    use crate::functionals::error_bundle;

    fn w(v: &[f64]) -> WeightVector {
        WeightVector::new(v.to_vec()).unwrap()
    }

    fn e(v: &[f64]) -> EnergySpectrum {
        EnergySpectrum::new(v.to_vec()).unwrap()
    }

    const TOL: f64 = 1e-12;

    #[test]
    fn gap_function_examples() {
        let g = gap_functions(&w(&[0.5, 0.3, 0.2]), &e(&[-1.0, 0.0, 2.0])).unwrap();
        assert!((g.g - 0.2).abs() < TOL && (g.big_g - 0.9).abs() < TOL);
        let g = gap_functions(&w(&[1.0, 0.0, 0.0]), &e(&[-1.0, 0.0, 2.0])).unwrap();
        assert!((g.g - 1.0).abs() < TOL && (g.big_g - 3.0).abs() < TOL);
        assert!(matches!(
            gap_functions(&w(&[0.25; 4]), &e(&[0.0, 1.0, 2.0, 3.0])),
            Err(Error::EqualWeights)
        ));
    }

    #[test]
    fn ensemble_state_examples() {
        let (lo, hi) =
            ensemble_state_prefactors(&w(&[0.5, 0.3, 0.2]), &e(&[-1.0, 0.0, 2.0])).unwrap();
        assert!((lo - 0.1).abs() < TOL && (hi - 0.4).abs() < TOL);

        let (lo, hi) = ensemble_state_prefactors(&w(&[0.7, 0.3]), &e(&[-0.3, 1.1])).unwrap();
        assert!((lo - hi).abs() < TOL);

        let head = w(&[0.75, 0.25, 0.0, 0.0, 0.0]);
        let levels = e(&[-1.0, 0.0, 2.0, 5.0, 8.0]);
        let (lo, hi) = ensemble_state_prefactors(&head, &levels).unwrap();
        // min{(0.75-0.25)/1, 0.25/8} and max{0.5/1, 0.25/2}
        assert!((lo - 2.0 * 0.25 / 8.0).abs() < TOL);
        assert!((hi - 1.0).abs() < TOL);

        assert!(matches!(
            ensemble_state_prefactors(&w(&[0.4, 0.4, 0.2]), &e(&[0.0, 1.0, 2.0])),
            Err(Error::ShapeViolation { .. })
        ));
    }

    #[test]
    fn eigenstate_examples() {
        let (ww, ee) = (w(&[0.5, 0.3, 0.2]), e(&[-1.0, 0.0, 2.0]));
        assert!((eigenstate_prefactor(0, &ww, &ee).unwrap() - 5.0).abs() < TOL);
        assert!((eigenstate_prefactor(1, &ww, &ee).unwrap() - 5.0).abs() < TOL);
        assert!((eigenstate_prefactor(2, &ww, &ee).unwrap() - 5.0).abs() < TOL);
        let degenerate = w(&[0.4, 0.4, 0.2]);
        assert!(matches!(
            eigenstate_prefactor(0, &degenerate, &ee),
            Err(Error::DegenerateWeight { index: 0 })
        ));
        assert!(eigenstate_prefactor(2, &degenerate, &ee).is_ok());
    }

    #[test]
    fn eigenstate_sum_examples() {
        let (lo, hi) =
            eigenstate_sum_prefactors(&w(&[0.5, 0.3, 0.2]), &e(&[-1.0, 0.0, 2.0])).unwrap();
        assert!((lo - 2.0 / 0.9).abs() < TOL && (hi - 10.0).abs() < TOL);

        let ee = e(&[-1.0, 0.0, 2.0]);
        let (lo, hi) = eigenstate_sum_prefactors(&w(&[1.0, 0.0, 0.0]), &ee).unwrap();
        assert!((hi - 1.0 / (1.0 * 1.0)).abs() < TOL);
        assert!((lo - 1.0 / 3.0).abs() < TOL);
    }

    #[test]
    fn eigenenergy_examples() {
        let ww = w(&[0.5, 0.3, 0.2]);
        let (lo, hi) = eigenenergy_prefactors(1, &ww).unwrap();
        assert!((lo + 5.0).abs() < TOL && (hi - 10.0).abs() < TOL);
        assert_eq!(eigenenergy_prefactors(0, &ww).unwrap().0, 0.0);
        let head = w(&[0.75, 0.25, 0.0, 0.0]);
        assert!((eigenenergy_prefactors(1, &head).unwrap().1 - 4.0).abs() < TOL);
        assert!(eigenenergy_prefactors(2, &head).is_err());
    }

    #[test]
    fn eigenenergy_sum_examples() {
        let (lo, hi) = eigenenergy_sum_prefactors(&w(&[0.5, 0.3, 0.2])).unwrap();
        assert!((lo - 2.0 / 0.3).abs() < TOL && (hi - 20.0).abs() < TOL);
    }

    #[test]
    fn bound_set_refuses_degenerate_entries() {
        let set = BoundSet::compute(&w(&[0.5, 0.5, 0.0]), &e(&[-1.0, 0.0, 1.0])).unwrap();
        assert!(set.ensemble_state.is_none());
        assert!(set.eigenstate[0].is_none() && set.eigenstate[1].is_none());
        assert!(set.eigenenergy[0].is_none() && set.eigenenergy[1].is_none());
        assert!(set.refusals.iter().any(|r| r.contains("delta_psi_0")));
    }

    #[test]
    fn identity_passes_with_full_slack() {
        let (ww, ee) = (w(&[0.5, 0.3, 0.2]), e(&[-1.0, 0.0, 2.0]));
        let set = BoundSet::compute(&ww, &ee).unwrap();
        let bundle = error_bundle(&BasisMap::identity(3), &ww, &ee).unwrap();
        let report = check_bounds(&bundle, &set);
        assert_eq!(report.status, ComplianceStatus::Compliant);
        assert!(report
            .checks
            .iter()
            .all(|c| c.slack_lower == 0.0 && c.slack_upper == 0.0));
    }

    #[test]
    fn large_error_is_out_of_regime() {
        let (ww, ee) = (w(&[0.5, 0.3, 0.2]), e(&[-1.0, 0.0, 2.0]));
        let set = BoundSet::compute(&ww, &ee).unwrap();
        let reversed = BasisMap::permutation(&[2, 1, 0]).unwrap();
        let report = check_bounds(&error_bundle(&reversed, &ww, &ee).unwrap(), &set);
        assert_eq!(report.status, ComplianceStatus::OutOfRegime);
        assert!(report.violations().is_empty());
    }

    #[test]
    fn scaling_covariance() {
        let (ww, ee) = (w(&[0.4, 0.3, 0.2, 0.1]), e(&[-1.0, 0.5, 1.0, 3.0]));
        let lambda = 2.5;
        let scaled = ee.scaled(lambda).unwrap();
        let (a0, a1) = ensemble_state_prefactors(&ww, &ee).unwrap();
        let (b0, b1) = ensemble_state_prefactors(&ww, &scaled).unwrap();
        assert!((a0 / lambda - b0).abs() < TOL && (a1 / lambda - b1).abs() < TOL);
        for k in 0..4 {
            let p = eigenstate_prefactor(k, &ww, &ee).unwrap();
            let q = eigenstate_prefactor(k, &ww, &scaled).unwrap();
            assert!((p / lambda - q).abs() < TOL);
        }
        let (s0, s1) = eigenstate_sum_prefactors(&ww, &ee).unwrap();
        let (t0, t1) = eigenstate_sum_prefactors(&ww, &scaled).unwrap();
        assert!((s0 / lambda - t0).abs() < TOL && (s1 / lambda - t1).abs() < TOL);
    }
}
