//! Random trial ensembles and bound-saturating Jacobi rotations.
//!
//! Random trial bases are `exp(A)` with a real antisymmetric generator (or
//! `exp(iH)` with a Hermitian one), every generator entry uniform in
//! `[-pi, pi]`.
//!
//! Seed contract: sample `i` of a run with seed `s` draws its generator
//! from `ChaCha8Rng::seed_from_u64(s)` switched to stream `i`. Each sample
//! is therefore reproducible on its own, and a record stream does not
//! depend on the number of worker threads.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::{BasisMap, UnistochasticMatrix};
use crate::bounds::{check_bounds, swap_error, BoundCheck, BoundSet};
use crate::error::{Error, Result};
use crate::format::g12;
use crate::functionals::{error_bundle_from_stochastic, ErrorBundle};
use crate::polytope::{neighbor_transpositions, Permutation};
use crate::spectrum::{check_dims, EnergySpectrum, WeightVector};

/// Version of the record CSV and envelope JSON layouts.
pub const SCHEMA_VERSION: u32 = 1;
/// Records with `dE_w` at or below this value are left out of ratios.
pub const RATIO_FLOOR: f64 = 1e-12;
pub const ENVELOPE_BINS: usize = 50;
/// The log bins cover `[g * ENVELOPE_BIN_SPAN, g]`; smaller errors fall
/// into the first bin.
pub const ENVELOPE_BIN_SPAN: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SampleMode {
    Orthogonal,
    Unitary,
}

impl FromStr for SampleMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "orthogonal" => Ok(SampleMode::Orthogonal),
            "unitary" => Ok(SampleMode::Unitary),
            other => Err(Error::InvalidArgument(format!(
                "unknown sampling mode `{other}` (expected orthogonal or unitary)"
            ))),
        }
    }
}

fn sample_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
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

/// Real antisymmetric generator with entries uniform in `[-pi, pi]`.
pub fn random_antisymmetric<R: Rng>(d: usize, rng: &mut R) -> DMatrix<f64> {
    let mut a = DMatrix::zeros(d, d);
    for p in 0..d {
        for q in p + 1..d {
            let x = rng.random_range(-PI..=PI);
            a[(p, q)] = x;
            a[(q, p)] = -x;
        }
    }
    a
}

/// `exp(A)` for a real antisymmetric `A`.
pub fn orthogonal_from_generator(a: &DMatrix<f64>) -> Result<BasisMap> {
    BasisMap::orthogonal(a.exp())
}

/// `exp(iH)` for a Hermitian `H`.
pub fn unitary_from_generator(h: &DMatrix<Complex64>) -> Result<BasisMap> {
    BasisMap::unitary((h * Complex64::new(0.0, 1.0)).exp())
}

pub fn sample_orthogonal(d: usize, seed: u64) -> Result<BasisMap> {
    sample_orthogonal_indexed(d, seed, 0)
}

pub fn sample_orthogonal_indexed(d: usize, seed: u64, index: u64) -> Result<BasisMap> {
    require_dim(d)?;
    let mut rng = sample_rng(seed, index);
    orthogonal_from_generator(&random_antisymmetric(d, &mut rng))
}

pub fn sample_unitary(d: usize, seed: u64) -> Result<BasisMap> {
    sample_unitary_indexed(d, seed, 0)
}

/// `exp(iH)` with `H` Hermitian: real diagonal and the real and imaginary
/// parts of the upper triangle uniform in `[-pi, pi]`.
pub fn sample_unitary_indexed(d: usize, seed: u64, index: u64) -> Result<BasisMap> {
    require_dim(d)?;
    let mut rng = sample_rng(seed, index);
    let mut h = DMatrix::from_element(d, d, Complex64::new(0.0, 0.0));
    for p in 0..d {
        h[(p, p)] = Complex64::new(rng.random_range(-PI..=PI), 0.0);
        for q in p + 1..d {
            let z = Complex64::new(rng.random_range(-PI..=PI), rng.random_range(-PI..=PI));
            h[(p, q)] = z;
            h[(q, p)] = z.conj();
        }
    }
    unitary_from_generator(&h)
}

pub fn sample_indexed(mode: SampleMode, d: usize, seed: u64, index: u64) -> Result<BasisMap> {
    match mode {
        SampleMode::Orthogonal => sample_orthogonal_indexed(d, seed, index),
        SampleMode::Unitary => sample_unitary_indexed(d, seed, index),
    }
}

/// Which bound a Jacobi rotation should saturate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SaturationTarget {
    EnsembleStateUpper,
    EnsembleStateLower,
    EigenstateUpper(usize),
    EigenstateSumUpper,
    EigenenergyUpper(usize),
    EigenenergyLower(usize),
    EigenenergySumUpper,
}

impl SaturationTarget {
    /// Quantity name as used by the compliance checker.
    pub fn quantity(&self) -> String {
        match self {
            SaturationTarget::EnsembleStateUpper | SaturationTarget::EnsembleStateLower => {
                "delta_rho_w".into()
            }
            SaturationTarget::EigenstateUpper(k) => format!("delta_psi_{k}"),
            SaturationTarget::EigenstateSumUpper => "sum_psi".into(),
            SaturationTarget::EigenenergyUpper(k) | SaturationTarget::EigenenergyLower(k) => {
                format!("delta_E_{k}")
            }
            SaturationTarget::EigenenergySumUpper => "sum_abs_E".into(),
        }
    }

    pub fn is_upper(&self) -> bool {
        !matches!(
            self,
            SaturationTarget::EnsembleStateLower | SaturationTarget::EigenenergyLower(_)
        )
    }

    /// The quantity's value in a bundle.
    pub fn value(&self, b: &ErrorBundle) -> f64 {
        match *self {
            SaturationTarget::EnsembleStateUpper | SaturationTarget::EnsembleStateLower => {
                b.delta_rho_w
            }
            SaturationTarget::EigenstateUpper(k) => b.delta_psi[k],
            SaturationTarget::EigenstateSumUpper => b.sum_psi,
            SaturationTarget::EigenenergyUpper(k) | SaturationTarget::EigenenergyLower(k) => {
                b.delta_e[k]
            }
            SaturationTarget::EigenenergySumUpper => b.sum_abs_e,
        }
    }

    /// Every target whose bound is available for `bounds`.
    pub fn all_available(bounds: &BoundSet) -> Vec<SaturationTarget> {
        let mut out = Vec::new();
        if bounds.ensemble_state.is_some() {
            out.push(SaturationTarget::EnsembleStateUpper);
            out.push(SaturationTarget::EnsembleStateLower);
        }
        let d = bounds.eigenstate.len();
        for k in 0..d {
            if bounds.eigenstate[k].is_some() {
                out.push(SaturationTarget::EigenstateUpper(k));
            }
        }
        if bounds.eigenstate_sum.is_some() {
            out.push(SaturationTarget::EigenstateSumUpper);
        }
        for k in 0..d {
            if bounds.eigenenergy[k].is_some() {
                if k + 1 < d {
                    out.push(SaturationTarget::EigenenergyUpper(k));
                }
                if k > 0 {
                    out.push(SaturationTarget::EigenenergyLower(k));
                }
            }
        }
        if bounds.eigenenergy_sum.is_some() {
            out.push(SaturationTarget::EigenenergySumUpper);
        }
        out
    }
}

impl fmt::Display for SaturationTarget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let side = if self.is_upper() { "upper" } else { "lower" };
        write!(f, "{}:{side}", self.quantity())
    }
}

/// Rotation angle, or the ensemble error the rotation should produce.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RotationAmount {
    Angle(f64),
    Delta(f64),
}

#[derive(Debug, Clone)]
pub struct SaturatingState {
    pub basis: BasisMap,
    /// The two mixed exact states `(k, l)`, `k < l`.
    pub plane: (usize, usize),
    pub theta: f64,
    /// `dQ / dE_w` along the rotation.
    pub ratio: f64,
    /// `dE_w` of the fully swapped state.
    pub swap_error: f64,
}

/// Plane rotation mixing exact states `k` and `l` by `theta`.
pub fn plane_rotation(d: usize, k: usize, l: usize, theta: f64) -> Result<BasisMap> {
    if k >= d || l >= d || k == l {
        return Err(Error::InvalidArgument(format!(
            "invalid rotation plane ({k}, {l}) in dimension {d}"
        )));
    }
    let (s, c) = theta.sin_cos();
    let mut u = DMatrix::identity(d, d);
    u[(k, k)] = c;
    u[(l, l)] = c;
    u[(k, l)] = -s;
    u[(l, k)] = s;
    BasisMap::orthogonal(u)
}

/// `dQ/dE_w` for a rotation in the plane `(k, l)`, `k < l`.
fn plane_ratio(
    target: &SaturationTarget,
    w: &WeightVector,
    e: &EnergySpectrum,
    k: usize,
    l: usize,
) -> f64 {
    let dw = w.get(k) - w.get(l);
    let de = e.values()[l] - e.values()[k];
    let targeted = w.targeted_count();
    let hits = (k < targeted) as usize + (l < targeted) as usize;
    match target {
        SaturationTarget::EnsembleStateUpper | SaturationTarget::EnsembleStateLower => {
            2.0 * dw / de
        }
        SaturationTarget::EigenstateUpper(_) => 1.0 / (dw * de),
        SaturationTarget::EigenstateSumUpper => hits as f64 / (dw * de),
        SaturationTarget::EigenenergyUpper(_) => 1.0 / dw,
        SaturationTarget::EigenenergyLower(_) => -1.0 / dw,
        SaturationTarget::EigenenergySumUpper => hits as f64 / dw,
    }
}

fn degenerate_plane(w: &WeightVector, k: usize, l: usize) -> bool {
    w.get(k) - w.get(l) <= crate::spectrum::WEIGHT_DEGENERACY_ABS
}

/// Adjacent-plane rotation that saturates the chosen bound.
///
/// The plane is the one extremizing the theorem's prefactor: e.g. for
/// `dPsi_k` the neighbour of `k` with the smaller swap error, for the
/// ensemble state the neighbour pair with the largest (or smallest)
/// `(w_k - w_l)/(E_l - E_k)`. Along the rotation `dE_w = sin^2(theta) t`
/// with `t` the swap error of the plane, and every error is proportional
/// to `sin^2(theta)`, so `dQ/dE_w` equals the prefactor exactly.
pub fn jacobi_saturating_state(
    target: SaturationTarget,
    w: &WeightVector,
    e: &EnergySpectrum,
    amount: RotationAmount,
) -> Result<SaturatingState> {
    check_dims(w, e)?;
    let d = w.dim();
    let check_k = |k: usize| -> Result<()> {
        if k >= d {
            return Err(Error::IndexOutOfRange {
                index: k,
                reason: format!("dimension is {d}"),
            });
        }
        if !w.is_nondegenerate_at(k) {
            return Err(Error::DegenerateWeight { index: k });
        }
        Ok(())
    };
    let candidates: Vec<(usize, usize)> = match target {
        SaturationTarget::EigenstateUpper(k) => {
            check_k(k)?;
            let mut c = Vec::new();
            if k > 0 {
                c.push((k - 1, k));
            }
            if k + 1 < d {
                c.push((k, k + 1));
            }
            c
        }
        SaturationTarget::EigenenergyUpper(k) => {
            check_k(k)?;
            if k + 1 >= d {
                return Err(Error::IndexOutOfRange {
                    index: k,
                    reason: "the highest level has no upper neighbour to mix with".into(),
                });
            }
            vec![(k, k + 1)]
        }
        SaturationTarget::EigenenergyLower(k) => {
            check_k(k)?;
            if k == 0 {
                return Err(Error::IndexOutOfRange {
                    index: 0,
                    reason: "the ground state has no lower neighbour to mix with".into(),
                });
            }
            vec![(k - 1, k)]
        }
        _ => neighbor_transpositions(w)?,
    };
    let candidates: Vec<(usize, usize)> = candidates
        .into_iter()
        .filter(|&(k, l)| !degenerate_plane(w, k, l))
        .collect();

    let pick_max = !matches!(target, SaturationTarget::EnsembleStateLower);
    let ratio_of = |&(k, l): &(usize, usize)| {
        let r = plane_ratio(&target, w, e, k, l);
        // EigenenergyLower is negative; its extremal plane is fixed anyway
        if pick_max {
            r
        } else {
            -r
        }
    };
    let &(k, l) = candidates
        .iter()
        .max_by(|a, b| ratio_of(a).total_cmp(&ratio_of(b)))
        .ok_or(Error::DegenerateWeight { index: 0 })?;
    let ratio = plane_ratio(&target, w, e, k, l);
    let t = (w.get(k) - w.get(l)) * (e.values()[l] - e.values()[k]);

    let theta = match amount {
        RotationAmount::Angle(theta) => theta,
        RotationAmount::Delta(delta) => {
            if !(delta >= 0.0) || delta > t {
                return Err(Error::OutOfRegime { delta, g: t });
            }
            (delta / t).sqrt().asin()
        }
    };
    Ok(SaturatingState {
        basis: plane_rotation(d, k, l, theta)?,
        plane: (k, l),
        theta,
        ratio,
        swap_error: t,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RecordSource {
    Random,
    Permutation,
    Jacobi,
}

impl RecordSource {
    pub fn name(&self) -> &'static str {
        match self {
            RecordSource::Random => "random",
            RecordSource::Permutation => "permutation",
            RecordSource::Jacobi => "jacobi",
        }
    }
}

impl FromStr for RecordSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random" => Ok(RecordSource::Random),
            "permutation" => Ok(RecordSource::Permutation),
            "jacobi" => Ok(RecordSource::Jacobi),
            other => Err(Error::InvalidArgument(format!(
                "unknown record source `{other}`"
            ))),
        }
    }
}

/// One trial ensemble and its errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScatterRecord {
    pub seed: u64,
    pub sample_index: u64,
    pub source: RecordSource,
    pub bundle: ErrorBundle,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScatterConfig {
    pub n_samples: u64,
    pub mode: SampleMode,
    pub seed: u64,
    /// Points per saturating target in the Jacobi sweep; 0 disables it.
    pub jacobi_steps: usize,
    pub include_permutations: bool,
}

impl ScatterConfig {
    pub fn new(n_samples: u64, seed: u64) -> Self {
        Self {
            n_samples,
            mode: SampleMode::Orthogonal,
            seed,
            jacobi_steps: 20,
            include_permutations: true,
        }
    }
}

/// Extremal ratios `dQ/dE_w` of one quantity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantityEnvelope {
    pub min_ratio: f64,
    pub max_ratio: f64,
    /// Largest ratio per logarithmic bin of `dE_w` over `(0, g]`.
    pub bin_max: Vec<Option<f64>>,
}

impl QuantityEnvelope {
    fn new() -> Self {
        Self {
            min_ratio: f64::INFINITY,
            max_ratio: f64::NEG_INFINITY,
            bin_max: vec![None; ENVELOPE_BINS],
        }
    }

    fn add(&mut self, bin: usize, ratio: f64) {
        self.min_ratio = self.min_ratio.min(ratio);
        self.max_ratio = self.max_ratio.max(ratio);
        let slot = &mut self.bin_max[bin];
        *slot = Some(slot.map_or(ratio, |m| m.max(ratio)));
    }

    fn merge(&mut self, other: &QuantityEnvelope) {
        self.min_ratio = self.min_ratio.min(other.min_ratio);
        self.max_ratio = self.max_ratio.max(other.max_ratio);
        for (a, b) in self.bin_max.iter_mut().zip(&other.bin_max) {
            *a = match (*a, *b) {
                (Some(x), Some(y)) => Some(x.max(y)),
                (x, y) => x.or(y),
            };
        }
    }
}

/// Ratio envelopes over all in-regime records of one source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub g: f64,
    pub records: u64,
    pub quantities: BTreeMap<String, QuantityEnvelope>,
}

impl Envelope {
    pub fn new(g: f64) -> Self {
        Self {
            g,
            records: 0,
            quantities: BTreeMap::new(),
        }
    }

    fn bin(&self, de: f64) -> usize {
        let lo = (self.g * ENVELOPE_BIN_SPAN).ln();
        let hi = self.g.ln();
        let x = (de.ln() - lo) / (hi - lo);
        ((x * ENVELOPE_BINS as f64).floor().max(0.0) as usize).min(ENVELOPE_BINS - 1)
    }

    /// Adds `b` if `RATIO_FLOOR < dE_w <= g`.
    pub fn add(&mut self, b: &ErrorBundle) {
        let de = b.delta_e_w;
        if !(de > RATIO_FLOOR && de <= self.g) {
            return;
        }
        self.records += 1;
        let bin = self.bin(de);
        let mut put = |name: String, v: f64| {
            self.quantities
                .entry(name)
                .or_insert_with(QuantityEnvelope::new)
                .add(bin, v / de);
        };
        put("delta_rho_w".into(), b.delta_rho_w);
        put("sum_psi".into(), b.sum_psi);
        put("sum_abs_E".into(), b.sum_abs_e);
        for (k, v) in b.delta_psi.iter().enumerate() {
            put(format!("delta_psi_{k}"), *v);
        }
        for (k, v) in b.delta_e.iter().enumerate() {
            put(format!("delta_E_{k}"), *v);
        }
    }

    pub fn merge(&mut self, other: &Envelope) {
        self.records += other.records;
        for (name, q) in &other.quantities {
            self.quantities
                .entry(name.clone())
                .or_insert_with(QuantityEnvelope::new)
                .merge(q);
        }
    }

    pub fn max_ratio(&self, quantity: &str) -> Option<f64> {
        self.quantities.get(quantity).map(|q| q.max_ratio)
    }

    pub fn min_ratio(&self, quantity: &str) -> Option<f64> {
        self.quantities.get(quantity).map(|q| q.min_ratio)
    }
}

/// Totals of one scatter experiment for one weight vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScatterSummary {
    pub schema_version: u32,
    pub seed: u64,
    pub weights: Vec<f64>,
    pub energies: Vec<f64>,
    pub bounds: BoundSet,
    pub records: u64,
    pub in_regime: u64,
    pub violations: u64,
    pub worst_violation: Option<BoundCheck>,
    /// Most negative `dE_w` and Ky Fan partial sum seen.
    pub min_delta_e_w: f64,
    pub min_kyfan_partial: f64,
    /// Largest `|F_{D-1}|`, zero up to rounding.
    pub max_abs_trace_partial: f64,
    pub envelopes: BTreeMap<RecordSource, Envelope>,
}

impl ScatterSummary {
    fn new(seed: u64, w: &WeightVector, e: &EnergySpectrum, bounds: BoundSet) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            seed,
            weights: w.as_slice().to_vec(),
            energies: e.values().to_vec(),
            records: 0,
            in_regime: 0,
            violations: 0,
            worst_violation: None,
            min_delta_e_w: f64::INFINITY,
            min_kyfan_partial: f64::INFINITY,
            max_abs_trace_partial: 0.0,
            envelopes: [
                RecordSource::Random,
                RecordSource::Permutation,
                RecordSource::Jacobi,
            ]
            .into_iter()
            .map(|s| (s, Envelope::new(bounds.gaps.g)))
            .collect(),
            bounds,
        }
    }

    fn add(&mut self, source: RecordSource, b: &ErrorBundle) {
        self.records += 1;
        self.min_delta_e_w = self.min_delta_e_w.min(b.delta_e_w);
        let d = b.kyfan_partials.len();
        for f in &b.kyfan_partials[..d - 1] {
            self.min_kyfan_partial = self.min_kyfan_partial.min(*f);
        }
        self.max_abs_trace_partial = self
            .max_abs_trace_partial
            .max(b.kyfan_partials[d - 1].abs());
        let report = check_bounds(b, &self.bounds);
        if report.in_regime() {
            self.in_regime += 1;
            let bad = report.violations();
            if !bad.is_empty() {
                self.violations += 1;
                for c in bad {
                    let worse = self.worst_violation.as_ref().is_none_or(|w| {
                        c.slack_lower.min(c.slack_upper) < w.slack_lower.min(w.slack_upper)
                    });
                    if worse {
                        self.worst_violation = Some(c.clone());
                    }
                }
            }
        }
        self.envelopes
            .get_mut(&source)
            .expect("all sources present")
            .add(b);
    }

    /// Envelope over every source.
    pub fn combined_envelope(&self) -> Envelope {
        let mut all = Envelope::new(self.bounds.gaps.g);
        for e in self.envelopes.values() {
            all.merge(e);
        }
        all
    }
}

const CHUNK: u64 = 4096;

/// Runs random samples, all `D!` permutations and a Jacobi sweep for
/// every weight vector in `ws`, reusing each sampled basis across them.
///
/// `sink(weight_index, record)` sees the records in a fixed order:
/// random samples by index, then permutations in lexicographic order,
/// then the sweep.
pub fn scatter_experiment_multi(
    ws: &[WeightVector],
    e: &EnergySpectrum,
    config: &ScatterConfig,
    mut sink: impl FnMut(usize, &ScatterRecord) -> Result<()>,
) -> Result<Vec<ScatterSummary>> {
    let d = e.dim();
    let mut summaries = Vec::with_capacity(ws.len());
    for w in ws {
        check_dims(w, e)?;
        summaries.push(ScatterSummary::new(
            config.seed,
            w,
            e,
            BoundSet::compute(w, e)?,
        ));
    }

    let mut emit =
        |wi: usize, rec: ScatterRecord, summaries: &mut Vec<ScatterSummary>| -> Result<()> {
            summaries[wi].add(rec.source, &rec.bundle);
            sink(wi, &rec)
        };

    let mut start = 0;
    while start < config.n_samples {
        let end = (start + CHUNK).min(config.n_samples);
        let chunk: Vec<Vec<ErrorBundle>> = (start..end)
            .into_par_iter()
            .map(|i| -> Result<Vec<ErrorBundle>> {
                let u = sample_indexed(config.mode, d, config.seed, i)?;
                let x = UnistochasticMatrix::from_basis(&u)?;
                Ok(ws
                    .iter()
                    .map(|w| error_bundle_from_stochastic(&x, w, e))
                    .collect())
            })
            .collect::<Result<_>>()?;
        for (offset, bundles) in chunk.into_iter().enumerate() {
            for (wi, bundle) in bundles.into_iter().enumerate() {
                let rec = ScatterRecord {
                    seed: config.seed,
                    sample_index: start + offset as u64,
                    source: RecordSource::Random,
                    bundle,
                };
                emit(wi, rec, &mut summaries)?;
            }
        }
        start = end;
    }

    if config.include_permutations && d <= crate::polytope::MAX_ENUMERATION_DIM {
        for (i, p) in Permutation::all(d)?.iter().enumerate() {
            let x = UnistochasticMatrix::from_basis(&p.to_basis_map())?;
            for (wi, w) in ws.iter().enumerate() {
                let rec = ScatterRecord {
                    seed: config.seed,
                    sample_index: i as u64,
                    source: RecordSource::Permutation,
                    bundle: error_bundle_from_stochastic(&x, w, e),
                };
                emit(wi, rec, &mut summaries)?;
            }
        }
    }

    if config.jacobi_steps > 0 {
        for (wi, w) in ws.iter().enumerate() {
            let bounds = summaries[wi].bounds.clone();
            let g = bounds.gaps.g;
            let mut index = 0u64;
            for target in SaturationTarget::all_available(&bounds) {
                for step in 1..=config.jacobi_steps {
                    let delta = g * step as f64 / config.jacobi_steps as f64;
                    let s = jacobi_saturating_state(target, w, e, RotationAmount::Delta(delta))?;
                    let x = UnistochasticMatrix::from_basis(&s.basis)?;
                    let rec = ScatterRecord {
                        seed: config.seed,
                        sample_index: index,
                        source: RecordSource::Jacobi,
                        bundle: error_bundle_from_stochastic(&x, w, e),
                    };
                    index += 1;
                    emit(wi, rec, &mut summaries)?;
                }
            }
        }
    }
    Ok(summaries)
}

/// Single-weight-vector form of [`scatter_experiment_multi`].
pub fn scatter_experiment(
    w: &WeightVector,
    e: &EnergySpectrum,
    config: &ScatterConfig,
    mut sink: impl FnMut(&ScatterRecord) -> Result<()>,
) -> Result<ScatterSummary> {
    let mut out = scatter_experiment_multi(std::slice::from_ref(w), e, config, |_, r| sink(r))?;
    Ok(out.remove(0))
}

/// CSV header of the record stream for dimension `d`.
pub fn record_header(d: usize) -> Vec<String> {
    let mut h: Vec<String> = ["seed", "sample_index", "source", "delta_E_w", "delta_rho_w"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    h.extend((0..d).map(|k| format!("delta_psi_{k}")));
    h.extend((0..d).map(|k| format!("delta_E_{k}")));
    h.push("sum_psi".into());
    h.push("sum_abs_E".into());
    h
}

/// Writes records as CSV, preceded by a `# schema_version=...` comment.
pub struct RecordWriter<W: Write> {
    inner: csv::Writer<W>,
    dim: usize,
}

impl<W: Write> RecordWriter<W> {
    pub fn new(mut out: W, dim: usize, seed: u64, extra: &str) -> Result<Self> {
        writeln!(out, "# schema_version={SCHEMA_VERSION} seed={seed}{extra}")?;
        let mut inner = csv::Writer::from_writer(out);
        inner.write_record(record_header(dim))?;
        Ok(Self { inner, dim })
    }

    pub fn write(&mut self, r: &ScatterRecord) -> Result<()> {
        let b = &r.bundle;
        if b.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: b.dim(),
            });
        }
        let mut row = vec![
            r.seed.to_string(),
            r.sample_index.to_string(),
            r.source.name().to_string(),
            g12(b.delta_e_w),
            g12(b.delta_rho_w),
        ];
        row.extend(b.delta_psi.iter().map(|&v| g12(v)));
        row.extend(b.delta_e.iter().map(|&v| g12(v)));
        row.push(g12(b.sum_psi));
        row.push(g12(b.sum_abs_e));
        self.inner.write_record(&row)?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<W> {
        self.inner.flush()?;
        self.inner
            .into_inner()
            .map_err(|e| Error::Io(e.into_error()))
    }
}

/// A record read back from CSV. The Ky Fan partial sums and `dE_w`
/// weight form are not stored and are rebuilt from the columns.
pub fn read_records<R: std::io::Read>(input: R) -> Result<Vec<ScatterRecord>> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(input);
    let headers = reader.headers()?.clone();
    let d = headers
        .iter()
        .filter(|h| h.starts_with("delta_psi_"))
        .count();
    if headers.iter().collect::<Vec<_>>() != record_header(d) {
        return Err(Error::InvalidArgument(format!(
            "unexpected record header: {}",
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut out = Vec::new();
    for (line, row) in reader.records().enumerate() {
        let row = row?;
        let num = |i: usize| -> Result<f64> {
            row[i].parse::<f64>().map_err(|_| {
                Error::InvalidArgument(format!("row {}: `{}` is not a number", line + 1, &row[i]))
            })
        };
        let int = |i: usize| -> Result<u64> {
            row[i].parse::<u64>().map_err(|_| {
                Error::InvalidArgument(format!("row {}: `{}` is not an integer", line + 1, &row[i]))
            })
        };
        let delta_psi: Vec<f64> = (0..d).map(|k| num(5 + k)).collect::<Result<_>>()?;
        let delta_e: Vec<f64> = (0..d).map(|k| num(5 + d + k)).collect::<Result<_>>()?;
        let mut acc = 0.0;
        let kyfan_partials = delta_e
            .iter()
            .map(|v| {
                acc += v;
                acc
            })
            .collect();
        let delta_e_w = num(3)?;
        out.push(ScatterRecord {
            seed: int(0)?,
            sample_index: int(1)?,
            source: row[2].parse()?,
            bundle: ErrorBundle {
                delta_e_w,
                delta_e_w_weight_form: delta_e_w,
                delta_rho_w: num(4)?,
                delta_psi,
                delta_e,
                targeted: d,
                sum_psi: num(5 + 2 * d)?,
                sum_abs_e: num(6 + 2 * d)?,
                kyfan_partials,
            },
        });
    }
    Ok(out)
}

/// Default step of the "nearly equal" weights `1 + step (k-1-i)`.
pub const NEARLY_EQUAL_STEP: f64 = 0.05;

/// The preset weight vectors for `d` levels with `k` targeted states:
/// nearly equal (`w_i` proportional to `1 + step (k-1-i)`), optimal for the
/// summed energy error, and geometric with ratios 4 and 8 (zero tail when
/// `k < d`).
pub fn preset_weight_vectors(d: usize, k: usize, step: f64) -> Result<Vec<(String, WeightVector)>> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "nearly-equal step must be positive, got {step}"
        )));
    }
    if k == 0 || k > d {
        return Err(Error::IndexOutOfRange {
            index: k,
            reason: format!("targeted count must lie in 1..={d}"),
        });
    }
    let pad = |mut v: Vec<f64>| {
        v.resize(d, 0.0);
        v
    };
    let nearly_equal = pad((0..k).map(|i| 1.0 + step * (k - 1 - i) as f64).collect());
    let optimal = if k == d {
        crate::weights::optimal_weights_all_energies(d)?
    } else {
        crate::weights::optimal_weights_lowest_k_energies(k, d)?
    };
    let geometric = |r: f64| pad((0..k).map(|i| r.powi((k - 1 - i) as i32)).collect());
    Ok(vec![
        (
            "nearly_equal".into(),
            WeightVector::normalized(nearly_equal)?,
        ),
        ("optimal".into(), optimal),
        ("ratio_4".into(), WeightVector::normalized(geometric(4.0))?),
        ("ratio_8".into(), WeightVector::normalized(geometric(8.0))?),
    ])
}

/// Swap errors `t_k` of all adjacent planes, for reporting.
pub fn adjacent_swap_errors(w: &WeightVector, e: &EnergySpectrum) -> Vec<f64> {
    (0..w.dim() - 1).map(|k| swap_error(w, e, k)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn wv(v: &[f64]) -> WeightVector {
        WeightVector::new(v.to_vec()).unwrap()
    }

    fn es(v: &[f64]) -> EnergySpectrum {
        EnergySpectrum::new(v.to_vec()).unwrap()
    }

    #[test]
    fn zero_generator_is_identity() {
        let u = orthogonal_from_generator(&DMatrix::zeros(3, 3)).unwrap();
        assert!((u.as_real().unwrap() - DMatrix::identity(3, 3)).abs().max() < 1e-15);
        let v =
            unitary_from_generator(&DMatrix::from_element(3, 3, Complex64::new(0.0, 0.0))).unwrap();
        assert!(v.unitarity_deviation() < 1e-15);
    }

    #[test]
    fn two_level_generator_is_rotation() {
        let theta = 0.4;
        let a = DMatrix::from_row_slice(2, 2, &[0.0, theta, -theta, 0.0]);
        let u = orthogonal_from_generator(&a).unwrap();
        let m = u.as_real().unwrap();
        assert!((m[(0, 0)] - theta.cos()).abs() < 1e-14);
        assert!((m[(0, 1)] - theta.sin()).abs() < 1e-14);
    }

    #[test]
    fn sampling_is_deterministic() {
        let a = sample_orthogonal_indexed(4, 11, 5).unwrap();
        let b = sample_orthogonal_indexed(4, 11, 5).unwrap();
        let c = sample_orthogonal_indexed(4, 11, 6).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(sample_unitary(3, 1).unwrap().unitarity_deviation() < 1e-10);
    }

    #[test]
    fn jacobi_swap_and_zero_angle() {
        let w = wv(&[0.5, 0.3, 0.2]);
        let e = es(&[-1.0, 0.0, 2.0]);
        let s = jacobi_saturating_state(
            SaturationTarget::EigenenergyUpper(0),
            &w,
            &e,
            RotationAmount::Angle(std::f64::consts::FRAC_PI_2),
        )
        .unwrap();
        let b = crate::functionals::error_bundle(&s.basis, &w, &e).unwrap();
        assert!((b.delta_e_w - 0.2 * 1.0).abs() < 1e-15);
        let z = jacobi_saturating_state(
            SaturationTarget::EigenstateSumUpper,
            &w,
            &e,
            RotationAmount::Angle(0.0),
        )
        .unwrap();
        let b = crate::functionals::error_bundle(&z.basis, &w, &e).unwrap();
        assert_eq!(b.delta_e_w, 0.0);
        assert_eq!(b.sum_psi, 0.0);
    }

    #[test]
    fn jacobi_refuses_degenerate_and_out_of_range() {
        let w = wv(&[0.5, 0.5, 0.0]);
        let e = es(&[-1.0, 0.0, 1.0]);
        assert!(matches!(
            jacobi_saturating_state(
                SaturationTarget::EigenstateUpper(0),
                &w,
                &e,
                RotationAmount::Angle(0.1)
            ),
            Err(Error::DegenerateWeight { index: 0 })
        ));
        let w = wv(&[0.5, 0.3, 0.2]);
        assert!(matches!(
            jacobi_saturating_state(
                SaturationTarget::EigenstateUpper(0),
                &w,
                &e,
                RotationAmount::Delta(5.0)
            ),
            Err(Error::OutOfRegime { .. })
        ));
    }

    #[test]
    fn preset_vectors() {
        let v = preset_weight_vectors(3, 3, NEARLY_EQUAL_STEP).unwrap();
        assert_eq!(v.len(), 4);
        let r4 = &v[2].1;
        assert!((r4.get(0) - 16.0 / 21.0).abs() < 1e-15);
        let v5 = preset_weight_vectors(5, 3, NEARLY_EQUAL_STEP).unwrap();
        assert_eq!(
            v5[1].1.as_slice(),
            &[5.0 / 9.0, 3.0 / 9.0, 1.0 / 9.0, 0.0, 0.0]
        );
        assert!(v5.iter().all(|(_, w)| w.positive_count() == 3));
    }

    #[test]
    fn csv_roundtrip() {
        let w = wv(&[0.5, 0.3, 0.2]);
        let e = es(&[-1.0, 0.0, 2.0]);
        let mut cfg = ScatterConfig::new(3, 9);
        cfg.jacobi_steps = 2;
        let mut records = Vec::new();
        scatter_experiment(&w, &e, &cfg, |r| {
            records.push(r.clone());
            Ok(())
        })
        .unwrap();
        let mut writer = RecordWriter::new(Vec::new(), 3, 9, "").unwrap();
        for r in &records {
            writer.write(r).unwrap();
        }
        let bytes = writer.finish().unwrap();
        let text = String::from_utf8(bytes.clone()).unwrap();
        assert!(text.starts_with("# schema_version=1 seed=9\nseed,sample_index,source,delta_E_w"));
        let back = read_records(bytes.as_slice()).unwrap();
        assert_eq!(back.len(), records.len());
        for (a, b) in back.iter().zip(&records) {
            assert_eq!(a.source, b.source);
            assert!((a.bundle.delta_e_w - b.bundle.delta_e_w).abs() < 1e-11);
        }
    }
}
