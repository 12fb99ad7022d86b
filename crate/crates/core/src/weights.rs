//! Optimal ensemble weights.
//!
//! For every error quantity the weight vector minimizing the upper-bound
//! prefactor has a closed form. [`grid_search_optimal`] recovers the same
//! optimum by brute force over the gap coordinates
//! `mu_l = w_l - w_{l+1}` (`mu_{D-1} = w_{D-1}`), where the normalization
//! becomes the linear constraint `sum_l (l + 1) mu_l = 1`.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectrum::{heaviside, EnergySpectrum, WeightVector};

/// The error quantity whose upper bound a weight vector should minimize.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum WeightTarget {
    /// `|dE_k|` of a single eigenenergy.
    Energy { k: usize },
    /// `sum_k |dE_k|` over all `D` energies.
    AllEnergies,
    /// `sum_{k<K} |dE_k|`.
    LowestEnergies { count: usize },
    /// `dPsi_k` of a single eigenstate.
    State { k: usize },
    /// `sum_k dPsi_k` over all `D` states.
    AllStates,
    /// `sum_{k<K} dPsi_k`.
    LowestStates { count: usize },
}

impl WeightTarget {
    pub fn needs_spectrum(&self) -> bool {
        matches!(
            self,
            WeightTarget::State { .. }
                | WeightTarget::AllStates
                | WeightTarget::LowestStates { .. }
        )
    }

    /// Closed-form optimal weights for dimension `d`; state targets read
    /// the gaps of `e`.
    pub fn closed_form(&self, d: usize, e: Option<&EnergySpectrum>) -> Result<WeightVector> {
        let spectrum = || -> Result<&EnergySpectrum> {
            let e = e.ok_or_else(|| {
                Error::InvalidArgument(format!("target {self} needs an energy spectrum"))
            })?;
            if e.dim() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    actual: e.dim(),
                });
            }
            Ok(e)
        };
        match *self {
            WeightTarget::Energy { k } => optimal_weights_single_energy(k, d),
            WeightTarget::AllEnergies => optimal_weights_all_energies(d),
            WeightTarget::LowestEnergies { count } => optimal_weights_lowest_k_energies(count, d),
            WeightTarget::State { k } => optimal_weights_single_state(k, spectrum()?),
            WeightTarget::AllStates => optimal_weights_all_states(spectrum()?),
            WeightTarget::LowestStates { count } => {
                optimal_weights_lowest_k_states(count, spectrum()?)
            }
        }
    }

    /// The minimal achievable upper-bound prefactor.
    pub fn lowest_upper_bound(&self, d: usize, e: Option<&EnergySpectrum>) -> Result<f64> {
        // validates ranges and the spectrum
        self.closed_form(d, e)?;
        let gap = |j: usize| e.map(|s| s.gap(j)).unwrap_or(f64::NAN);
        Ok(match *self {
            WeightTarget::Energy { k } => 2.0 * k as f64 + 1.0,
            WeightTarget::AllEnergies => (d * (d - 1)) as f64,
            WeightTarget::LowestEnergies { count } => (count * count) as f64,
            WeightTarget::State { k } => {
                let r_plus = 1.0 / gap(k);
                if k == 0 {
                    r_plus
                } else {
                    let r_minus = 1.0 / gap(k - 1);
                    k as f64 * (r_minus + r_plus) + r_plus
                }
            }
            WeightTarget::AllStates => (1..d).map(|k| 2.0 * k as f64 / gap(k - 1)).sum(),
            WeightTarget::LowestStates { count } => (1..=count)
                .map(|k| 2.0 * k as f64 * heaviside(count as i64 - k as i64) / gap(k - 1))
                .sum(),
        })
    }
}

impl fmt::Display for WeightTarget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WeightTarget::Energy { k } => write!(f, "E_k(k={k})"),
            WeightTarget::AllEnergies => f.write_str("sumE_all"),
            WeightTarget::LowestEnergies { count } => write!(f, "sumE_K(K={count})"),
            WeightTarget::State { k } => write!(f, "Psi_k(k={k})"),
            WeightTarget::AllStates => f.write_str("sumPsi_all"),
            WeightTarget::LowestStates { count } => write!(f, "sumPsi_K(K={count})"),
        }
    }
}

/// Target family without its index, as named on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TargetKind {
    Energy,
    AllEnergies,
    LowestEnergies,
    State,
    AllStates,
    LowestStates,
}

impl FromStr for TargetKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "E_k" => TargetKind::Energy,
            "sumE_all" => TargetKind::AllEnergies,
            "sumE_K" => TargetKind::LowestEnergies,
            "Psi_k" => TargetKind::State,
            "sumPsi_all" => TargetKind::AllStates,
            "sumPsi_K" => TargetKind::LowestStates,
            other => {
                return Err(Error::InvalidArgument(format!(
                    "unknown target `{other}` (expected E_k, sumE_all, sumE_K, Psi_k, sumPsi_all or sumPsi_K)"
                )))
            }
        })
    }
}

impl TargetKind {
    /// Attaches the index (`k` or `K`) where the family needs one.
    pub fn with_index(self, k: Option<usize>, count: Option<usize>) -> Result<WeightTarget> {
        let need = |v: Option<usize>, name: &str| {
            v.ok_or_else(|| Error::InvalidArgument(format!("target needs --{name}")))
        };
        Ok(match self {
            TargetKind::Energy => WeightTarget::Energy { k: need(k, "k")? },
            TargetKind::AllEnergies => WeightTarget::AllEnergies,
            TargetKind::LowestEnergies => WeightTarget::LowestEnergies {
                count: need(count, "K")?,
            },
            TargetKind::State => WeightTarget::State { k: need(k, "k")? },
            TargetKind::AllStates => WeightTarget::AllStates,
            TargetKind::LowestStates => WeightTarget::LowestStates {
                count: need(count, "K")?,
            },
        })
    }
}

fn require_dim(d: usize) -> Result<()> {
    if d < 2 {
        return Err(Error::DimensionOutOfRange {
            dim: d,
            min: 2,
            max: usize::MAX,
        });
    }
    Ok(())
}

/// `(2, ..., 2, 1, 0, ..., 0) / (2k + 1)` with `k` leading twos.
pub fn optimal_weights_single_energy(k: usize, d: usize) -> Result<WeightVector> {
    require_dim(d)?;
    if k + 2 > d {
        return Err(Error::IndexOutOfRange {
            index: k,
            reason: format!("single-energy target requires k <= D - 2 = {}", d - 2),
        });
    }
    let mut raw = vec![0.0; d];
    raw[..k].fill(2.0);
    raw[k] = 1.0;
    WeightVector::normalized(raw)
}

/// Equally spaced weights `2/(D(D-1)) (D-1, D-2, ..., 1, 0)`.
pub fn optimal_weights_all_energies(d: usize) -> Result<WeightVector> {
    require_dim(d)?;
    WeightVector::normalized((0..d).map(|l| (d - 1 - l) as f64).collect())
}

/// `(2K-1, 2K-3, ..., 3, 1, 0, ..., 0) / K^2`.
pub fn optimal_weights_lowest_k_energies(count: usize, d: usize) -> Result<WeightVector> {
    require_dim(d)?;
    if count == 0 || count + 1 >= d {
        return Err(Error::IndexOutOfRange {
            index: count,
            reason: format!("lowest-K target requires 0 < K < D - 1 = {}", d - 1),
        });
    }
    WeightVector::normalized(
        (0..d)
            .map(|l| {
                if l < count {
                    (2 * (count - l) - 1) as f64
                } else {
                    0.0
                }
            })
            .collect(),
    )
}

/// `w ∝ (r_- + r_+, ..., r_- + r_+, r_+, 0, ..., 0)` with `k` leading
/// entries and `r_± = 1/|E_k - E_{k±1}|`; `k = 0` gives `(1, 0, ..., 0)`.
pub fn optimal_weights_single_state(k: usize, e: &EnergySpectrum) -> Result<WeightVector> {
    let d = e.dim();
    if k + 2 > d {
        return Err(Error::IndexOutOfRange {
            index: k,
            reason: format!("single-state target requires k <= D - 2 = {}", d - 2),
        });
    }
    let r_plus = 1.0 / e.gap(k);
    let r_minus = if k == 0 { 0.0 } else { 1.0 / e.gap(k - 1) };
    let mut raw = vec![0.0; d];
    raw[..k].fill(r_minus + r_plus);
    raw[k] = r_plus;
    WeightVector::normalized(raw)
}

/// `w_k ∝ sum_{j=k+1}^{D-1} 1/(E_j - E_{j-1})`.
pub fn optimal_weights_all_states(e: &EnergySpectrum) -> Result<WeightVector> {
    let d = e.dim();
    let raw = (0..d)
        .map(|k| (k + 1..d).map(|j| 1.0 / e.gap(j - 1)).sum())
        .collect();
    WeightVector::normalized(raw)
}

/// `w_k ∝ sum_{j=k+1}^{D-1} theta(K - j)/(E_j - E_{j-1})`; the boundary
/// term `j = K` enters with weight one half.
pub fn optimal_weights_lowest_k_states(count: usize, e: &EnergySpectrum) -> Result<WeightVector> {
    let d = e.dim();
    if count == 0 || count + 1 >= d {
        return Err(Error::IndexOutOfRange {
            index: count,
            reason: format!("lowest-K target requires 0 < K < D - 1 = {}", d - 1),
        });
    }
    let raw = (0..d)
        .map(|k| {
            (k + 1..d)
                .map(|j| heaviside(count as i64 - j as i64) / e.gap(j - 1))
                .sum()
        })
        .collect();
    WeightVector::normalized(raw)
}

/// Upper-bound terms written directly in gap coordinates. The bound is the
/// largest term; a zero gap in an active term makes it infinite.
fn bound_terms(target: &WeightTarget, mu: &[f64], gaps: &[f64], out: &mut Vec<f64>) {
    out.clear();
    let d = mu.len();
    let inv = |num: f64, den: f64| if den > 0.0 { num / den } else { f64::INFINITY };
    match *target {
        WeightTarget::Energy { k } => {
            if k > 0 {
                out.push(inv(1.0, mu[k - 1]));
            }
            out.push(inv(1.0, mu[k]));
        }
        WeightTarget::AllEnergies => out.extend((0..d - 1).map(|k| inv(2.0, mu[k]))),
        WeightTarget::LowestEnergies { count } => {
            out.extend((0..count).map(|k| inv(2.0 * heaviside(count as i64 - k as i64 - 1), mu[k])))
        }
        WeightTarget::State { k } => {
            if k > 0 {
                out.push(inv(1.0, mu[k - 1] * gaps[k - 1]));
            }
            out.push(inv(1.0, mu[k] * gaps[k]));
        }
        WeightTarget::AllStates => out.extend((0..d - 1).map(|k| inv(2.0, mu[k] * gaps[k]))),
        WeightTarget::LowestStates { count } => out.extend((0..count).map(|k| {
            inv(
                2.0 * heaviside(count as i64 - k as i64 - 1),
                mu[k] * gaps[k],
            )
        })),
    }
    out.sort_by(|a, b| b.total_cmp(a));
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridOptimum {
    pub weights: WeightVector,
    pub mu: Vec<f64>,
    pub bound: f64,
    pub evaluated: u64,
}

#[derive(Clone)]
struct Candidate {
    terms: Vec<f64>,
    w: Vec<f64>,
    mu: Vec<f64>,
}

const TERM_REL_TOL: f64 = 1e-12;

fn cmp_terms(a: &[f64], b: &[f64]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        if x.is_infinite() && y.is_infinite() {
            continue;
        }
        let scale = x.abs().max(y.abs()).max(1.0);
        if (x - y).abs() > TERM_REL_TOL * scale {
            return x.total_cmp(y);
        }
    }
    Ordering::Equal
}

/// Smaller is better: leximin on the bound terms, then lexicographically
/// largest `w`.
fn better(a: &Candidate, b: &Candidate) -> Ordering {
    cmp_terms(&a.terms, &b.terms).then_with(|| {
        for (x, y) in a.w.iter().zip(&b.w) {
            match y.total_cmp(x) {
                Ordering::Equal => continue,
                o => return o,
            }
        }
        Ordering::Equal
    })
}

fn pick(a: Option<Candidate>, b: Option<Candidate>) -> Option<Candidate> {
    match (a, b) {
        (None, x) | (x, None) => x,
        (Some(a), Some(b)) => Some(if better(&b, &a) == Ordering::Less {
            b
        } else {
            a
        }),
    }
}

/// Largest grid the search will enumerate.
pub const MAX_GRID_POINTS: f64 = 5e8;

/// Dense grid search over `mu_l = i_l * resolution` for `l < D - 1`, with
/// `mu_{D-1}` absorbing the remaining normalization.
///
/// Minimizes the largest upper-bound term; ties are broken by the next
/// largest term and so on, then by the lexicographically largest `w`.
pub fn grid_search_optimal(
    target: &WeightTarget,
    d: usize,
    e: Option<&EnergySpectrum>,
    resolution: f64,
) -> Result<GridOptimum> {
    require_dim(d)?;
    if !(resolution > 0.0 && resolution <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "grid resolution must lie in (0, 1], got {resolution}"
        )));
    }
    // range checks shared with the closed forms
    let lowest = |c: usize| c > 0 && c + 1 < d;
    match *target {
        WeightTarget::Energy { k } | WeightTarget::State { k } if k + 2 > d => {
            return Err(Error::IndexOutOfRange {
                index: k,
                reason: format!("requires k <= D - 2 = {}", d - 2),
            })
        }
        WeightTarget::LowestEnergies { count } | WeightTarget::LowestStates { count }
            if !lowest(count) =>
        {
            return Err(Error::IndexOutOfRange {
                index: count,
                reason: format!("requires 0 < K < D - 1 = {}", d - 1),
            })
        }
        _ => {}
    }
    let gaps: Vec<f64> = if target.needs_spectrum() {
        let e = e.ok_or_else(|| {
            Error::InvalidArgument(format!("target {target} needs an energy spectrum"))
        })?;
        if e.dim() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                actual: e.dim(),
            });
        }
        (0..d - 1).map(|k| e.gap(k)).collect()
    } else {
        vec![1.0; d - 1]
    };

    let budget = (1.0 / resolution + 1e-9).floor() as u64;
    let free = d - 1;
    let mut estimate = (budget as f64 + 1.0).powi(free as i32);
    for l in 1..=free {
        estimate /= (l * l) as f64;
    }
    if estimate > MAX_GRID_POINTS {
        return Err(Error::InvalidArgument(format!(
            "grid of ~{estimate:.2e} points exceeds the limit of {MAX_GRID_POINTS:e}"
        )));
    }

    let best = (0..=budget)
        .into_par_iter()
        .map(|i0| {
            let mut idx = vec![0u64; free];
            idx[0] = i0;
            let mut mu = vec![0.0; d];
            let mut terms = Vec::with_capacity(d);
            let mut best: Option<Candidate> = None;
            let mut evaluated = 0u64;
            enumerate(1, i0, budget, &mut idx, &mut |idx: &[u64], used: u64| {
                evaluated += 1;
                for (l, &i) in idx.iter().enumerate() {
                    mu[l] = i as f64 * resolution;
                }
                mu[d - 1] = (1.0 - used as f64 * resolution).max(0.0) / d as f64;
                bound_terms(target, &mu, &gaps, &mut terms);
                if terms[0].is_infinite() {
                    return;
                }
                let improves = match &best {
                    None => true,
                    Some(b) => match cmp_terms(&terms, &b.terms) {
                        Ordering::Less => true,
                        Ordering::Greater => false,
                        Ordering::Equal => {
                            let w = weights_from_mu(&mu);
                            better(
                                &Candidate {
                                    terms: terms.clone(),
                                    w,
                                    mu: mu.clone(),
                                },
                                b,
                            ) == Ordering::Less
                        }
                    },
                };
                if improves {
                    best = Some(Candidate {
                        terms: terms.clone(),
                        w: weights_from_mu(&mu),
                        mu: mu.clone(),
                    });
                }
            });
            (best, evaluated)
        })
        .reduce(|| (None, 0), |(a, na), (b, nb)| (pick(a, b), na + nb));

    let (best, evaluated) = best;
    let best = best.ok_or(Error::InfeasibleGrid { resolution })?;
    Ok(GridOptimum {
        weights: WeightVector::normalized(best.w)?,
        bound: best.terms[0],
        mu: best.mu,
        evaluated,
    })
}

fn weights_from_mu(mu: &[f64]) -> Vec<f64> {
    let mut w = vec![0.0; mu.len()];
    let mut acc = 0.0;
    for l in (0..mu.len()).rev() {
        acc += mu[l];
        w[l] = acc;
    }
    w
}

/// Visits every `idx` with `sum_l (l + 1) idx[l] <= budget`, fixing
/// coordinates `< level` from the caller.
fn enumerate(
    level: usize,
    used: u64,
    budget: u64,
    idx: &mut Vec<u64>,
    visit: &mut dyn FnMut(&[u64], u64),
) {
    if level == idx.len() {
        visit(idx, used);
        return;
    }
    let cost = level as u64 + 1;
    let max = (budget - used) / cost;
    for i in 0..=max {
        idx[level] = i;
        enumerate(level + 1, used + i * cost, budget, idx, visit);
    }
    idx[level] = 0;
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_w(w: &WeightVector, expected: &[f64]) {
        for (a, b) in w.as_slice().iter().zip(expected) {
            assert!(
                (a - b).abs() < 1e-12,
                "{:?} vs {:?}",
                w.as_slice(),
                expected
            );
        }
    }

    #[test]
    fn single_energy_examples() {
        assert_w(
            &optimal_weights_single_energy(0, 3).unwrap(),
            &[1.0, 0.0, 0.0],
        );
        assert_w(
            &optimal_weights_single_energy(1, 4).unwrap(),
            &[2.0 / 3.0, 1.0 / 3.0, 0.0, 0.0],
        );
        assert_eq!(
            WeightTarget::Energy { k: 2 }
                .lowest_upper_bound(5, None)
                .unwrap(),
            5.0
        );
        assert!(optimal_weights_single_energy(3, 4).is_err());
    }

    #[test]
    fn all_energies_examples() {
        assert_w(
            &optimal_weights_all_energies(4).unwrap(),
            &[0.5, 1.0 / 3.0, 1.0 / 6.0, 0.0],
        );
        assert_w(&optimal_weights_all_energies(2).unwrap(), &[1.0, 0.0]);
        assert_eq!(
            WeightTarget::AllEnergies
                .lowest_upper_bound(4, None)
                .unwrap(),
            12.0
        );
        assert!(optimal_weights_all_energies(1).is_err());
    }

    #[test]
    fn lowest_energies_examples() {
        assert_w(
            &optimal_weights_lowest_k_energies(2, 5).unwrap(),
            &[0.75, 0.25, 0.0, 0.0, 0.0],
        );
        assert_w(
            &optimal_weights_lowest_k_energies(1, 4).unwrap(),
            &[1.0, 0.0, 0.0, 0.0],
        );
        assert_eq!(
            WeightTarget::LowestEnergies { count: 3 }
                .lowest_upper_bound(6, None)
                .unwrap(),
            9.0
        );
        assert!(optimal_weights_lowest_k_energies(3, 4).is_err());
        assert!(optimal_weights_lowest_k_energies(0, 4).is_err());
    }

    #[test]
    fn single_state_examples() {
        let equidistant = EnergySpectrum::new(vec![0.0, 1.0, 2.0, 3.0]).unwrap();
        assert_w(
            &optimal_weights_single_state(1, &equidistant).unwrap(),
            &[2.0 / 3.0, 1.0 / 3.0, 0.0, 0.0],
        );
        assert_w(
            &optimal_weights_single_state(0, &equidistant).unwrap(),
            &[1.0, 0.0, 0.0, 0.0],
        );
        let e = EnergySpectrum::new(vec![-1.0, 0.0, 2.0]).unwrap();
        assert_w(
            &optimal_weights_single_state(1, &e).unwrap(),
            &[0.75, 0.25, 0.0],
        );
        assert!(optimal_weights_single_state(2, &e).is_err());
    }

    #[test]
    fn all_states_examples() {
        let equidistant = EnergySpectrum::new(vec![0.0, 0.5, 1.0, 1.5]).unwrap();
        assert_w(
            &optimal_weights_all_states(&equidistant).unwrap(),
            optimal_weights_all_energies(4).unwrap().as_slice(),
        );
        let two = EnergySpectrum::new(vec![0.0, 3.0]).unwrap();
        assert_w(&optimal_weights_all_states(&two).unwrap(), &[1.0, 0.0]);
        let e = EnergySpectrum::new(vec![-1.0, 0.0, 2.0]).unwrap();
        assert_w(&optimal_weights_all_states(&e).unwrap(), &[0.75, 0.25, 0.0]);
    }

    #[test]
    fn lowest_states_examples() {
        let e = EnergySpectrum::new(vec![-1.0, 0.0, 2.0, 5.0, 8.0]).unwrap();
        let w = optimal_weights_lowest_k_states(2, &e).unwrap();
        let (w0, w1) = (1.0 + 0.25, 0.25);
        assert_w(&w, &[w0 / (w0 + w1), w1 / (w0 + w1), 0.0, 0.0, 0.0]);
        assert_w(
            &optimal_weights_lowest_k_states(1, &e).unwrap(),
            &[1.0, 0.0, 0.0, 0.0, 0.0],
        );
        // equidistant gaps: (2K-2, 2K-4, ..., 2, 1, 0...) up to normalization
        let eq = EnergySpectrum::new(vec![0.0, 1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_w(
            &optimal_weights_lowest_k_states(3, &eq).unwrap(),
            &[2.5 / 4.5, 1.5 / 4.5, 0.5 / 4.5, 0.0, 0.0],
        );
    }

    #[test]
    fn grid_recovers_rr_limit() {
        let opt = grid_search_optimal(&WeightTarget::Energy { k: 0 }, 3, None, 1e-2).unwrap();
        assert_w(&opt.weights, &[1.0, 0.0, 0.0]);
        assert!((opt.bound - 1.0).abs() < 1e-12);
    }

    #[test]
    fn grid_all_energies_d3() {
        let res = 1e-3;
        let opt = grid_search_optimal(&WeightTarget::AllEnergies, 3, None, res).unwrap();
        for (a, b) in opt
            .weights
            .as_slice()
            .iter()
            .zip([2.0 / 3.0, 1.0 / 3.0, 0.0])
        {
            assert!((a - b).abs() <= res * (1.0 + 1e-6), "{:?}", opt.weights);
        }
        assert!((opt.bound - 6.0).abs() / 6.0 < 0.01);
    }

    #[test]
    fn grid_rejects_bad_input() {
        assert!(grid_search_optimal(&WeightTarget::AllEnergies, 3, None, 0.0).is_err());
        assert!(grid_search_optimal(&WeightTarget::AllStates, 3, None, 0.1).is_err());
        assert!(grid_search_optimal(&WeightTarget::AllEnergies, 8, None, 1e-3).is_err());
    }

    #[test]
    fn target_names_parse() {
        assert_eq!(
            "sumE_K".parse::<TargetKind>().unwrap(),
            TargetKind::LowestEnergies
        );
        assert!("bogus".parse::<TargetKind>().is_err());
        assert!(TargetKind::Energy.with_index(None, None).is_err());
    }
}
