//! Permutohedron and Birkhoff-polytope geometry.
//!
//! Trial weight vectors `X w` fill the permutohedron `P(w)` and trial
//! energy vectors `X^T E` fill `P(E)`. The ensemble-energy error is linear
//! on both, so every level set `dE_w = delta` is a hyperplane slice and any
//! linear error functional attains its extrema at the slice vertices. The
//! analytic slice uses only the edges leaving the reference vertices; the
//! brute-force routines enumerate every vertex and edge and serve as an
//! independent oracle.

use std::collections::HashMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::basis::{BasisMap, UnistochasticMatrix};
use crate::bounds::gap_functions;
use crate::error::{Error, Result};
use crate::functionals::{error_bundle_from_stochastic, ErrorBundle};
use crate::spectrum::{
    check_dims, EnergySpectrum, WeightShape, WeightVector, WEIGHT_DEGENERACY_ABS,
};

/// Largest dimension for plain vertex enumeration.
pub const MAX_ENUMERATION_DIM: usize = 8;
/// Largest dimension for the all-edges oracles.
pub const MAX_BRUTE_FORCE_DIM: usize = 6;
/// Tolerance on the hyperplane equation of slice vertices.
pub const HYPERPLANE_TOL: f64 = 1e-10;

/// A permutation `sigma` of `0..D`, acting on vectors as
/// `(sigma v)_i = v[sigma(i)]`.
///
/// As a basis map, trial state `l` is exact state `sigma(l)`, so the trial
/// energies are `sigma E`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Permutation {
    mapping: Vec<usize>,
}

impl Permutation {
    pub fn new(mapping: Vec<usize>) -> Result<Self> {
        let d = mapping.len();
        let mut seen = vec![false; d];
        for &m in &mapping {
            if m >= d || seen[m] {
                return Err(Error::InvalidArgument(format!(
                    "{mapping:?} is not a permutation of 0..{d}"
                )));
            }
            seen[m] = true;
        }
        Ok(Self { mapping })
    }

    pub fn identity(d: usize) -> Self {
        Self {
            mapping: (0..d).collect(),
        }
    }

    pub fn transposition(d: usize, i: usize, j: usize) -> Result<Self> {
        if i >= d || j >= d {
            return Err(Error::IndexOutOfRange {
                index: i.max(j),
                reason: format!("dimension is {d}"),
            });
        }
        let mut mapping: Vec<usize> = (0..d).collect();
        mapping.swap(i, j);
        Ok(Self { mapping })
    }

    /// Permutation from cycle notation, e.g. `[[0, 2, 1]]` maps 0→2→1→0.
    pub fn from_cycles(d: usize, cycles: &[Vec<usize>]) -> Result<Self> {
        let mut mapping: Vec<usize> = (0..d).collect();
        let mut used = vec![false; d];
        for cycle in cycles {
            for (pos, &i) in cycle.iter().enumerate() {
                if i >= d || used[i] {
                    return Err(Error::InvalidCycleStructure(format!(
                        "index {i} is out of range or repeated in {cycles:?}"
                    )));
                }
                used[i] = true;
                mapping[i] = cycle[(pos + 1) % cycle.len()];
            }
        }
        Ok(Self { mapping })
    }

    pub fn dim(&self) -> usize {
        self.mapping.len()
    }

    pub fn mapping(&self) -> &[usize] {
        &self.mapping
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        self.mapping.iter().map(|&m| v[m]).collect()
    }

    pub fn inverse(&self) -> Self {
        let mut inv = vec![0; self.dim()];
        for (i, &m) in self.mapping.iter().enumerate() {
            inv[m] = i;
        }
        Self { mapping: inv }
    }

    /// `(self ∘ other)(i) = self(other(i))`.
    pub fn compose(&self, other: &Permutation) -> Self {
        Self {
            mapping: other.mapping.iter().map(|&i| self.mapping[i]).collect(),
        }
    }

    /// Non-trivial cycles, each starting at its smallest index.
    pub fn cycles(&self) -> Vec<Vec<usize>> {
        let d = self.dim();
        let mut seen = vec![false; d];
        let mut out = Vec::new();
        for start in 0..d {
            if seen[start] {
                continue;
            }
            let mut cycle = vec![start];
            seen[start] = true;
            let mut i = self.mapping[start];
            while i != start {
                seen[i] = true;
                cycle.push(i);
                i = self.mapping[i];
            }
            if cycle.len() > 1 {
                out.push(cycle);
            }
        }
        out
    }

    pub fn is_single_cycle(&self) -> bool {
        self.cycles().len() == 1
    }

    pub fn to_basis_map(&self) -> BasisMap {
        BasisMap::permutation(&self.mapping).expect("validated permutation")
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        let d = self.dim();
        let mut m = DMatrix::zeros(d, d);
        for (l, &k) in self.mapping.iter().enumerate() {
            m[(k, l)] = 1.0;
        }
        m
    }

    /// All `D!` permutations in lexicographic order.
    pub fn all(d: usize) -> Result<Vec<Permutation>> {
        guard_dim(d, MAX_ENUMERATION_DIM)?;
        let mut current: Vec<usize> = (0..d).collect();
        let mut out = vec![Self {
            mapping: current.clone(),
        }];
        while next_permutation(&mut current) {
            out.push(Self {
                mapping: current.clone(),
            });
        }
        Ok(out)
    }
}

fn guard_dim(d: usize, max: usize) -> Result<()> {
    if d == 0 || d > max {
        return Err(Error::DimensionOutOfRange {
            dim: d,
            min: 1,
            max,
        });
    }
    Ok(())
}

fn next_permutation<T: PartialOrd>(v: &mut [T]) -> bool {
    let n = v.len();
    if n < 2 {
        return false;
    }
    let mut i = n - 1;
    while i > 0 && !(v[i - 1] < v[i]) {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = n - 1;
    while !(v[i - 1] < v[j]) {
        j -= 1;
    }
    v.swap(i - 1, j);
    v[i..].reverse();
    true
}

/// All distinct permutations of `v`, in lexicographic order of values.
pub fn permutohedron_vertices(v: &[f64]) -> Result<Vec<Vec<f64>>> {
    guard_dim(v.len(), MAX_ENUMERATION_DIM)?;
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidArgument(
            "vector entries must be finite".into(),
        ));
    }
    let mut current = v.to_vec();
    current.sort_by(f64::total_cmp);
    let mut out = vec![current.clone()];
    while next_permutation(&mut current) {
        out.push(current.clone());
    }
    Ok(out)
}

/// Which permutohedron a slice lives in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Space {
    /// `P(w)`, points are trial weight vectors `X w`.
    Weights,
    /// `P(E)`, points are trial energy vectors `X^T E`.
    Energies,
}

impl Space {
    pub fn name(&self) -> &'static str {
        match self {
            Space::Weights => "weights",
            Space::Energies => "energies",
        }
    }

    fn base_and_dual<'a>(&self, w: &'a [f64], e: &'a [f64]) -> (&'a [f64], &'a [f64]) {
        match self {
            Space::Weights => (w, e),
            Space::Energies => (e, w),
        }
    }
}

/// `dE_w` as a function on the permutohedron: `dual . (v - base)`.
fn hyperplane_value(v: &[f64], base: &[f64], dual: &[f64]) -> f64 {
    v.iter()
        .zip(base)
        .zip(dual)
        .map(|((a, b), c)| c * (a - b))
        .sum()
}

/// An affine functional `coeffs . v + offset` on one permutohedron.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearTarget {
    pub name: String,
    pub space: Space,
    pub coeffs: Vec<f64>,
    pub offset: f64,
}

impl LinearTarget {
    pub fn new(name: impl Into<String>, space: Space, coeffs: Vec<f64>, offset: f64) -> Self {
        Self {
            name: name.into(),
            space,
            coeffs,
            offset,
        }
    }

    /// `dRho_w = 2 w . (w - v)` on `P(w)`.
    pub fn ensemble_state(w: &WeightVector) -> Self {
        let wv = w.as_slice();
        Self::new(
            "delta_rho_w",
            Space::Weights,
            wv.iter().map(|x| -2.0 * x).collect(),
            2.0 * w.dot(wv),
        )
    }

    /// `dE_k = u_k - E_k` on `P(E)`.
    pub fn eigenenergy(k: usize, e: &EnergySpectrum) -> Result<Self> {
        if k >= e.dim() {
            return Err(Error::IndexOutOfRange {
                index: k,
                reason: format!("dimension is {}", e.dim()),
            });
        }
        let mut coeffs = vec![0.0; e.dim()];
        coeffs[k] = 1.0;
        Ok(Self::new(
            format!("delta_E_{k}"),
            Space::Energies,
            coeffs,
            -e.values()[k],
        ))
    }

    pub fn eval(&self, v: &[f64]) -> f64 {
        self.coeffs.iter().zip(v).map(|(c, x)| c * x).sum::<f64>() + self.offset
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Extrema {
    pub min: f64,
    pub max: f64,
}

impl Extrema {
    fn of(values: impl IntoIterator<Item = f64>) -> Option<Self> {
        let mut it = values.into_iter().peekable();
        it.peek()?;
        let (min, max) = it.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
            (lo.min(v), hi.max(v))
        });
        Some(Self { min, max })
    }
}

/// A `(+)`-vertex `S_{kl} r` adjacent to the reference vertex `r`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PositiveVertex {
    pub reference: usize,
    pub transposition: (usize, usize),
    pub vertex: Vec<f64>,
    /// `dE_w` at the vertex.
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VertexClassification {
    pub space: Space,
    /// `(-)`-vertices, where `dE_w = 0`.
    pub reference: Vec<Vec<f64>>,
    pub positive: Vec<PositiveVertex>,
}

/// Transpositions `(k, l)` leading from a reference vertex to its `(+)`
/// neighbors: adjacent swaps inside the positive head, and swaps of the
/// last positive weight with every zero-weight position.
pub fn neighbor_transpositions(w: &WeightVector) -> Result<Vec<(usize, usize)>> {
    let d = w.dim();
    match w.shape() {
        WeightShape::StrictFull => Ok((0..d - 1).map(|k| (k, k + 1)).collect()),
        WeightShape::StrictHead { k: kk } => {
            let mut out: Vec<(usize, usize)> = (0..kk - 1).map(|k| (k, k + 1)).collect();
            out.extend((kk..d).map(|l| (kk - 1, l)));
            Ok(out)
        }
        WeightShape::Other => Err(Error::ShapeViolation {
            shape: "other",
            required: "strictly decreasing, or strictly decreasing head with zero tail",
        }),
    }
}

fn dedup_vectors(vs: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    let mut seen = HashMap::new();
    let mut out = Vec::new();
    for v in vs {
        let key: Vec<u64> = v.iter().map(|x| x.to_bits()).collect();
        if seen.insert(key, ()).is_none() {
            out.push(v);
        }
    }
    out
}

/// Reference vertices of `P(w)` or `P(E)` together with their `(+)`
/// neighbors, for `0 <= delta <= g`.
pub fn reference_and_positive_vertices(
    space: Space,
    w: &WeightVector,
    e: &EnergySpectrum,
    delta: f64,
) -> Result<VertexClassification> {
    check_dims(w, e)?;
    guard_dim(w.dim(), MAX_ENUMERATION_DIM)?;
    let g = gap_functions(w, e)?.g;
    if !(delta >= 0.0) || delta > g * (1.0 + 1e-12) {
        return Err(Error::OutOfRegime { delta, g });
    }
    let pairs = neighbor_transpositions(w)?;
    let (base, dual) = space.base_and_dual(w.as_slice(), e.values());

    // permuting the zero-weight tail leaves dE_w unchanged
    let k = w.positive_count();
    let tail: Vec<f64> = base[k..].to_vec();
    let reference = dedup_vectors(
        permutohedron_vertices_allow_empty(&tail)
            .into_iter()
            .map(|t| {
                let mut r = base[..k].to_vec();
                r.extend(t);
                r
            })
            .collect(),
    );

    let mut positive = Vec::new();
    for (ri, r) in reference.iter().enumerate() {
        for &(a, b) in &pairs {
            let mut v = r.clone();
            v.swap(a, b);
            let error = hyperplane_value(&v, base, dual);
            positive.push(PositiveVertex {
                reference: ri,
                transposition: (a, b),
                vertex: v,
                error,
            });
        }
    }
    Ok(VertexClassification {
        space,
        reference,
        positive,
    })
}

fn permutohedron_vertices_allow_empty(v: &[f64]) -> Vec<Vec<f64>> {
    if v.is_empty() {
        vec![Vec::new()]
    } else {
        permutohedron_vertices(v).expect("tail is shorter than the guarded dimension")
    }
}

/// A slice vertex `v_{kl} = (1 - p) r + p S_{kl} r` on the edge from a
/// reference vertex to one of its neighbors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SliceVertex {
    pub transposition: (usize, usize),
    pub p: f64,
    pub point: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PermutohedronSlice {
    pub space: Space,
    pub base: Vec<f64>,
    pub delta: f64,
    pub intersection_vertices: Vec<SliceVertex>,
}

/// Intersection of the hyperplane `dE_w = delta` with the edges leaving
/// the reference vertices.
pub fn permutohedron_slice(
    space: Space,
    w: &WeightVector,
    e: &EnergySpectrum,
    delta: f64,
) -> Result<PermutohedronSlice> {
    let classes = reference_and_positive_vertices(space, w, e, delta)?;
    let (base, _) = space.base_and_dual(w.as_slice(), e.values());
    let intersection_vertices = classes
        .positive
        .iter()
        .map(|pv| {
            let r = &classes.reference[pv.reference];
            let p = delta / pv.error;
            let point = r
                .iter()
                .zip(&pv.vertex)
                .map(|(a, b)| (1.0 - p) * a + p * b)
                .collect();
            SliceVertex {
                transposition: pv.transposition,
                p,
                point,
            }
        })
        .collect();
    Ok(PermutohedronSlice {
        space,
        base: base.to_vec(),
        delta,
        intersection_vertices,
    })
}

fn check_target(target: &LinearTarget, d: usize) -> Result<()> {
    if target.coeffs.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            actual: target.coeffs.len(),
        });
    }
    Ok(())
}

/// Extrema of a linear target over `{dE_w = delta}` from the analytic slice.
pub fn constrained_extrema(
    target: &LinearTarget,
    w: &WeightVector,
    e: &EnergySpectrum,
    delta: f64,
) -> Result<Extrema> {
    check_target(target, w.dim())?;
    let slice = permutohedron_slice(target.space, w, e, delta)?;
    Extrema::of(
        slice
            .intersection_vertices
            .iter()
            .map(|v| target.eval(&v.point)),
    )
    .ok_or_else(|| Error::InvalidArgument("slice has no vertices".into()))
}

/// Extrema of a linear target over `{dE_w = delta}` by enumerating every
/// vertex and every edge of the permutohedron.
///
/// Two vertices share an edge when they differ by swapping two entries
/// whose values are adjacent among the distinct values. Works for any
/// `delta` between the smallest and largest vertex error.
pub fn brute_force_extrema(
    target: &LinearTarget,
    w: &WeightVector,
    e: &EnergySpectrum,
    delta: f64,
) -> Result<Extrema> {
    check_dims(w, e)?;
    let d = w.dim();
    guard_dim(d, MAX_BRUTE_FORCE_DIM)?;
    check_target(target, d)?;
    let (base, dual) = target.space.base_and_dual(w.as_slice(), e.values());

    let vertices = permutohedron_vertices(base)?;
    let index: HashMap<Vec<u64>, usize> = vertices
        .iter()
        .enumerate()
        .map(|(i, v)| (v.iter().map(|x| x.to_bits()).collect(), i))
        .collect();
    let mut distinct = base.to_vec();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    let rank = |x: f64| {
        distinct
            .iter()
            .position(|&y| y == x)
            .expect("value of base")
    };

    let h: Vec<f64> = vertices
        .iter()
        .map(|v| hyperplane_value(v, base, dual))
        .collect();
    let scale = h
        .iter()
        .fold(0.0f64, |m, x| m.max(x.abs()))
        .max(f64::MIN_POSITIVE);
    let tol = 1e-12 * scale;

    let mut values = Vec::new();
    for (i, v) in vertices.iter().enumerate() {
        if (h[i] - delta).abs() <= tol {
            values.push(target.eval(v));
        }
        for a in 0..d {
            for b in a + 1..d {
                if rank(v[a]).abs_diff(rank(v[b])) != 1 {
                    continue;
                }
                let mut u = v.clone();
                u.swap(a, b);
                let key: Vec<u64> = u.iter().map(|x| x.to_bits()).collect();
                let j = index[&key];
                if j <= i {
                    continue;
                }
                let (lo, hi) = (h[i] - delta, h[j] - delta);
                if lo.abs() <= tol || hi.abs() <= tol || lo.signum() == hi.signum() {
                    continue;
                }
                let p = (delta - h[i]) / (h[j] - h[i]);
                let point: Vec<f64> = v
                    .iter()
                    .zip(&u)
                    .map(|(x, y)| (1.0 - p) * x + p * y)
                    .collect();
                values.push(target.eval(&point));
            }
        }
    }
    Extrema::of(values).ok_or_else(|| {
        Error::InvalidArgument(format!(
            "hyperplane dE_w = {delta} does not meet the permutohedron"
        ))
    })
}

/// `dE_w` of the permutation basis map `sigma`.
pub fn permutation_error(sigma: &Permutation, w: &[f64], e: &[f64]) -> f64 {
    let trial = sigma.apply(e);
    w.iter()
        .zip(trial.iter().zip(e))
        .map(|(wl, (t, x))| wl * (t - x))
        .sum()
}

/// Error bundles at every vertex of the Birkhoff-polytope slice
/// `{X doubly stochastic : dE_w(X) = delta}`.
///
/// Vertices of the Birkhoff polytope are permutation matrices; `P_sigma`
/// and `P_tau` share an edge exactly when `sigma^-1 tau` is a single cycle.
/// Every error functional except `sum |dE_k|` is linear in `X`, so their
/// extrema over the slice are attained among these bundles; the convex
/// `sum |dE_k|` attains its maximum there too.
pub fn birkhoff_slice_bundles(
    w: &WeightVector,
    e: &EnergySpectrum,
    delta: f64,
) -> Result<Vec<ErrorBundle>> {
    check_dims(w, e)?;
    let d = w.dim();
    guard_dim(d, MAX_BRUTE_FORCE_DIM)?;
    let perms = Permutation::all(d)?;
    let h: Vec<f64> = perms
        .iter()
        .map(|p| permutation_error(p, w.as_slice(), e.values()))
        .collect();
    let scale = h
        .iter()
        .fold(0.0f64, |m, x| m.max(x.abs()))
        .max(f64::MIN_POSITIVE);
    let tol = 1e-12 * scale;

    let mut out = Vec::new();
    let bundle = |x: DMatrix<f64>| -> Result<ErrorBundle> {
        Ok(error_bundle_from_stochastic(
            &UnistochasticMatrix::doubly_stochastic(x)?,
            w,
            e,
        ))
    };
    for (i, si) in perms.iter().enumerate() {
        if (h[i] - delta).abs() <= tol {
            out.push(bundle(si.matrix())?);
        }
        let inv = si.inverse();
        for j in i + 1..perms.len() {
            let (lo, hi) = (h[i] - delta, h[j] - delta);
            if lo.abs() <= tol || hi.abs() <= tol || lo.signum() == hi.signum() {
                continue;
            }
            if !inv.compose(&perms[j]).is_single_cycle() {
                continue;
            }
            let p = (delta - h[i]) / (h[j] - h[i]);
            out.push(bundle(si.matrix() * (1.0 - p) + perms[j].matrix() * p)?);
        }
    }
    if out.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "hyperplane dE_w = {delta} does not meet the Birkhoff polytope"
        )));
    }
    Ok(out)
}

/// Extrema of one scalar of the error bundle over the Birkhoff slice.
pub fn birkhoff_extrema(
    w: &WeightVector,
    e: &EnergySpectrum,
    delta: f64,
    quantity: impl Fn(&ErrorBundle) -> f64,
) -> Result<Extrema> {
    let bundles = birkhoff_slice_bundles(w, e, delta)?;
    Ok(Extrema::of(bundles.iter().map(quantity)).expect("non-empty slice"))
}

/// Minimum of `w^T P E` over all permutation matrices `P`. By the
/// rearrangement inequality it equals `w(desc) . E(asc)`.
pub fn gok_minimum_check(w: &[f64], e: &[f64]) -> Result<f64> {
    Ok(gok_extremes(w, e)?.min)
}

/// Minimum and maximum of `w^T P E` over all permutations.
pub fn gok_extremes(w: &[f64], e: &[f64]) -> Result<Extrema> {
    if w.len() != e.len() {
        return Err(Error::DimensionMismatch {
            expected: w.len(),
            actual: e.len(),
        });
    }
    let perms = Permutation::all(w.len())?;
    Ok(Extrema::of(perms.iter().map(|p| {
        let pe = p.apply(e);
        w.iter().zip(&pe).map(|(a, b)| a * b).sum()
    }))
    .expect("at least one permutation"))
}

/// Lower and upper bounds on `dE_w` of a `(+)`-vertex made of one cycle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleReport {
    /// The cycle touching positive weights, empty for a reference vertex.
    pub cycle: Vec<usize>,
    pub length: usize,
    /// Number of positive weights the cycle moves.
    pub positive_moved: usize,
    pub delta_e_w: f64,
    /// Smallest swap error among two positive weights.
    pub delta_1: f64,
    /// Smallest swap error between a positive and a zero weight.
    pub delta_2: f64,
    pub big_g: f64,
    /// `min((L'-1) d1, (2L'-1) d2)`, or `d2` when `L' = 1`.
    pub lower: f64,
    /// The lower bound selected by the `d1 <= 2 d2` case split.
    pub lower_case_split: f64,
    pub upper: f64,
    pub holds: bool,
    pub case_split_holds: bool,
}

/// Checks the one-cycle bounds `dE_w <= min(L', floor(L/2)) G` and
/// `dE_w >= min((L'-1) d1, (2L'-1) d2)`.
///
/// The lower bound is often quoted as a case split: `(L'-1) d1` when
/// `d1 <= 2 d2` and `L' > 1`, `(2L'-1) d2` otherwise. The first branch
/// coincides with the minimum, but the second overshoots for a swap of two
/// positive weights when `2 d2 < d1 < 3 d2`, so it is reported separately
/// and not used for `holds`.
///
/// Cycles that only move zero weights are ignored; at most one cycle may
/// touch the positive weights.
pub fn cycle_bound_check(
    sigma: &Permutation,
    w: &WeightVector,
    e: &EnergySpectrum,
) -> Result<CycleReport> {
    check_dims(w, e)?;
    if sigma.dim() != w.dim() {
        return Err(Error::DimensionMismatch {
            expected: w.dim(),
            actual: sigma.dim(),
        });
    }
    if w.shape() == WeightShape::Other {
        return Err(Error::ShapeViolation {
            shape: "other",
            required: "strictly decreasing, or strictly decreasing head with zero tail",
        });
    }
    let d = w.dim();
    let kk = w.positive_count();
    let wv = w.as_slice();
    let ev = e.values();
    let positive = |i: usize| wv[i] > WEIGHT_DEGENERACY_ABS;

    let active: Vec<Vec<usize>> = sigma
        .cycles()
        .into_iter()
        .filter(|c| c.iter().any(|&i| positive(i)))
        .collect();
    if active.len() > 1 {
        return Err(Error::InvalidCycleStructure(format!(
            "{} cycles move positive weights; expected one",
            active.len()
        )));
    }
    let cycle = active.into_iter().next().unwrap_or_default();
    let length = cycle.len();
    let positive_moved = cycle.iter().filter(|&&i| positive(i)).count();
    let delta_e_w = permutation_error(sigma, wv, ev);

    let swap = |i: usize, j: usize| (wv[i] - wv[j]) * (ev[j] - ev[i]);
    let delta_1 = (0..kk)
        .flat_map(|i| (i + 1..kk).map(move |j| (i, j)))
        .map(|(i, j)| swap(i, j))
        .fold(f64::INFINITY, f64::min);
    let delta_2 = (0..kk)
        .flat_map(|i| (kk..d).map(move |j| (i, j)))
        .map(|(i, j)| swap(i, j))
        .fold(f64::INFINITY, f64::min);
    let big_g = gap_functions(w, e)?.big_g;

    let (lower, lower_case_split, upper) = if length == 0 {
        (0.0, 0.0, 0.0)
    } else {
        let lp = positive_moved as f64;
        let first = (lp - 1.0) * delta_1;
        let second = (2.0 * lp - 1.0) * delta_2;
        let lower = if positive_moved > 1 {
            first.min(second)
        } else {
            second
        };
        let split = if delta_1 <= 2.0 * delta_2 && positive_moved > 1 {
            first
        } else {
            second
        };
        let upper = positive_moved.min(length / 2) as f64 * big_g;
        (lower, split, upper)
    };
    let slack = 1e-12 * big_g.max(1.0);
    let holds = delta_e_w >= lower - slack && delta_e_w <= upper + slack;
    let case_split_holds = delta_e_w >= lower_case_split - slack && delta_e_w <= upper + slack;
    Ok(CycleReport {
        cycle,
        length,
        positive_moved,
        delta_e_w,
        delta_1,
        delta_2,
        big_g,
        lower,
        lower_case_split,
        upper,
        holds,
        case_split_holds,
    })
}
