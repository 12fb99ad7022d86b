//! Statevector ensemble VQE on a transverse Ising model.
//!
//! The trial basis is `U = exp(A(params))` over the full orthogonal group
//! and the cost is the ensemble energy `sum_k w_k (U^T H U)_kk`, minimized
//! with Adam. Every iteration records the full error bundle of the trial
//! ensemble relative to the exact eigenbasis.

use std::io::Write;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::BasisMap;
use crate::bounds::{check_bounds_with_slack, BoundSet};
use crate::error::{Error, Result};
use crate::format::g12;
use crate::functionals::{error_bundle, ErrorBundle};
use crate::linalg::{
    antisymmetric_from_params, antisymmetric_param_count, expm_frechet, symmetric_eigen,
};
use crate::spectrum::{EnergySpectrum, WeightVector};

pub const MAX_SPINS: usize = 10;
/// Consecutive cost increases that count as divergence.
pub const DIVERGENCE_STREAK: usize = 100;
pub const CONVERGENCE_THRESHOLD: f64 = 1e-10;
pub const FD_STEP: f64 = 1e-6;
/// Slack used when checking trace points against the bounds.
pub const TRACE_SLACK: f64 = 1e-8;

/// `H = sum_i a_i X_i + sum_{i<j} J_ij Z_i Z_j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsingModel {
    pub a: Vec<f64>,
    /// `(i, j, J_ij)` with `i < j`.
    pub couplings: Vec<(usize, usize, f64)>,
}

impl IsingModel {
    pub fn new(a: Vec<f64>, couplings: Vec<(usize, usize, f64)>) -> Result<Self> {
        let n = a.len();
        if n == 0 || n > MAX_SPINS {
            return Err(Error::DimensionOutOfRange {
                dim: n,
                min: 1,
                max: MAX_SPINS,
            });
        }
        if a.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument(
                "field coefficients must be finite".into(),
            ));
        }
        for &(i, j, jij) in &couplings {
            if i >= j || j >= n {
                return Err(Error::InvalidArgument(format!(
                    "coupling ({i}, {j}) must satisfy i < j < {n}"
                )));
            }
            if !jij.is_finite() {
                return Err(Error::InvalidArgument("couplings must be finite".into()));
            }
        }
        Ok(Self { a, couplings })
    }

    /// Two spins with `J_12 = 0.09`, `a = (0.32696, 0.80430)`.
    pub fn reference() -> Self {
        Self {
            a: vec![0.32696, 0.80430],
            couplings: vec![(0, 1, 0.09)],
        }
    }

    pub fn spins(&self) -> usize {
        self.a.len()
    }
}

fn pauli_x() -> DMatrix<f64> {
    DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0])
}

fn pauli_z() -> DMatrix<f64> {
    DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0])
}

/// `op` on the listed sites, identity elsewhere; site 0 is the leftmost
/// Kronecker factor.
fn embed(n: usize, ops: &[(usize, &DMatrix<f64>)]) -> DMatrix<f64> {
    let id = DMatrix::<f64>::identity(2, 2);
    let mut out = DMatrix::from_element(1, 1, 1.0);
    for site in 0..n {
        let factor = ops
            .iter()
            .find(|(s, _)| *s == site)
            .map_or(&id, |(_, m)| *m);
        out = out.kronecker(factor);
    }
    out
}

pub fn build_hamiltonian(model: &IsingModel) -> Result<DMatrix<f64>> {
    let n = model.spins();
    if n == 0 || n > MAX_SPINS {
        return Err(Error::DimensionOutOfRange {
            dim: n,
            min: 1,
            max: MAX_SPINS,
        });
    }
    let (x, z) = (pauli_x(), pauli_z());
    let dim = 1 << n;
    let mut h = DMatrix::zeros(dim, dim);
    for (i, &ai) in model.a.iter().enumerate() {
        if ai != 0.0 {
            h += embed(n, &[(i, &x)]) * ai;
        }
    }
    for &(i, j, jij) in &model.couplings {
        if jij != 0.0 {
            h += embed(n, &[(i, &z), (j, &z)]) * jij;
        }
    }
    Ok(h)
}

/// Ascending eigenvalues and the matching eigenvector columns.
pub fn exact_eigensystem(h: &DMatrix<f64>) -> Result<(EnergySpectrum, DMatrix<f64>)> {
    let eig = symmetric_eigen(h)?;
    Ok((EnergySpectrum::new(eig.values)?, eig.vectors))
}

pub fn exact_spectrum(h: &DMatrix<f64>) -> Result<EnergySpectrum> {
    Ok(exact_eigensystem(h)?.0)
}

pub fn ansatz_unitary(dim: usize, params: &[f64]) -> Result<BasisMap> {
    BasisMap::orthogonal(antisymmetric_from_params(dim, params)?.exp())
}

fn check_shapes(params: &[f64], w: &WeightVector, h: &DMatrix<f64>) -> Result<usize> {
    let d = h.nrows();
    if h.ncols() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            actual: h.ncols(),
        });
    }
    if w.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            actual: w.dim(),
        });
    }
    let p = antisymmetric_param_count(d);
    if params.len() != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            actual: params.len(),
        });
    }
    Ok(d)
}

fn cost_of(u: &DMatrix<f64>, w: &WeightVector, h: &DMatrix<f64>) -> f64 {
    let hu = h * u;
    (0..u.ncols())
        .map(|k| w.get(k) * u.column(k).dot(&hu.column(k)))
        .sum()
}

/// `sum_k w_k (U^T H U)_kk` for `U = exp(A(params))`.
pub fn ensemble_cost(params: &[f64], w: &WeightVector, h: &DMatrix<f64>) -> Result<f64> {
    let d = check_shapes(params, w, h)?;
    let u = antisymmetric_from_params(d, params)?.exp();
    Ok(cost_of(&u, w, h))
}

/// Exact gradient through the Frechet derivative of the exponential:
/// `dC/dp = 2 sum_k w_k (U^T H dU)_kk`.
pub fn ensemble_cost_gradient(
    params: &[f64],
    w: &WeightVector,
    h: &DMatrix<f64>,
) -> Result<Vec<f64>> {
    let d = check_shapes(params, w, h)?;
    let a = antisymmetric_from_params(d, params)?;
    let hu = h * a.exp();
    let mut grad = Vec::with_capacity(params.len());
    for p in 0..d {
        for q in p + 1..d {
            let mut dir = DMatrix::zeros(d, d);
            dir[(p, q)] = 1.0;
            dir[(q, p)] = -1.0;
            let du = expm_frechet(&a, &dir);
            let g: f64 = (0..d)
                .map(|k| w.get(k) * du.column(k).dot(&hu.column(k)))
                .sum();
            grad.push(2.0 * g);
        }
    }
    Ok(grad)
}

/// Central finite differences with step `FD_STEP`.
pub fn finite_difference_gradient(
    params: &[f64],
    w: &WeightVector,
    h: &DMatrix<f64>,
) -> Result<Vec<f64>> {
    check_shapes(params, w, h)?;
    let mut x = params.to_vec();
    let mut grad = Vec::with_capacity(params.len());
    for i in 0..params.len() {
        x[i] = params[i] + FD_STEP;
        let plus = ensemble_cost(&x, w, h)?;
        x[i] = params[i] - FD_STEP;
        let minus = ensemble_cost(&x, w, h)?;
        x[i] = params[i];
        grad.push((plus - minus) / (2.0 * FD_STEP));
    }
    Ok(grad)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GradientMode {
    Analytic,
    FiniteDifference,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Half-width of the uniform initialization interval.
    pub init_scale: f64,
    pub max_iter: usize,
    pub seed: u64,
    pub gradient: GradientMode,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            init_scale: 0.1,
            max_iter: 5000,
            seed: 0,
            gradient: GradientMode::Analytic,
        }
    }
}

impl AdamConfig {
    fn validate(&self) -> Result<()> {
        let ok = self.learning_rate > 0.0
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.epsilon > 0.0
            && self.init_scale >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!(
                "invalid Adam settings: {self:?}"
            )))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub iter: usize,
    pub cost: f64,
    pub param_norm: f64,
    /// Running minimum of `dE_w` up to and including this point.
    pub best_delta_e_w: f64,
    /// `max |U^T U - I|`.
    pub orthogonality: f64,
    pub bundle: ErrorBundle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerTrace {
    pub weights: Vec<f64>,
    pub spectrum: Vec<f64>,
    pub points: Vec<TracePoint>,
    pub converged: bool,
    pub final_params: Vec<f64>,
}

impl OptimizerTrace {
    pub fn last(&self) -> &TracePoint {
        self.points
            .last()
            .expect("trace holds at least the initial point")
    }
}

/// Adam on `ensemble_cost`, stopping once `dE_w < CONVERGENCE_THRESHOLD`.
///
/// The trace holds the initial point plus one point per update.
pub fn adam_optimize(
    w: &WeightVector,
    h: &DMatrix<f64>,
    config: &AdamConfig,
) -> Result<OptimizerTrace> {
    config.validate()?;
    let d = h.nrows();
    let n_params = antisymmetric_param_count(d);
    let (spectrum, vectors) = exact_eigensystem(h)?;
    let exact = crate::functionals::ensemble_energy(w, &spectrum)?;

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut params: Vec<f64> = (0..n_params)
        .map(|_| {
            if config.init_scale > 0.0 {
                rng.random_range(-config.init_scale..=config.init_scale)
            } else {
                0.0
            }
        })
        .collect();
    check_shapes(&params, w, h)?;

    let vt = vectors.transpose();
    let mut best = f64::INFINITY;
    let mut record = |iter: usize, params: &[f64]| -> Result<TracePoint> {
        let u = antisymmetric_from_params(d, params)?.exp();
        let cost = cost_of(&u, w, h);
        let orthogonality = (u.transpose() * &u - DMatrix::identity(d, d)).abs().max();
        // overlaps <Psi_k | Psi~_l> between exact and trial states
        let overlap = BasisMap::orthogonal_with_tolerance(&vt * &u, 1e-8)?;
        let bundle = error_bundle(&overlap, w, &spectrum)?;
        best = best.min(bundle.delta_e_w);
        Ok(TracePoint {
            iter,
            cost,
            param_norm: params.iter().map(|p| p * p).sum::<f64>().sqrt(),
            best_delta_e_w: best,
            orthogonality,
            bundle,
        })
    };

    let mut points = vec![record(0, &params)?];
    let mut m = vec![0.0; n_params];
    let mut v = vec![0.0; n_params];
    let mut streak = 0;
    let mut converged = points[0].cost - exact < CONVERGENCE_THRESHOLD;
    for t in 1..=config.max_iter {
        if converged {
            break;
        }
        let grad = match config.gradient {
            GradientMode::Analytic => ensemble_cost_gradient(&params, w, h)?,
            GradientMode::FiniteDifference => finite_difference_gradient(&params, w, h)?,
        };
        let b1t = 1.0 - config.beta1.powi(t as i32);
        let b2t = 1.0 - config.beta2.powi(t as i32);
        for i in 0..n_params {
            m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * grad[i];
            v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * grad[i] * grad[i];
            let mhat = m[i] / b1t;
            let vhat = v[i] / b2t;
            params[i] -= config.learning_rate * mhat / (vhat.sqrt() + config.epsilon);
        }
        let point = record(t, &params)?;
        let prev = points.last().expect("nonempty").cost;
        streak = if point.cost > prev { streak + 1 } else { 0 };
        converged = point.bundle.delta_e_w < CONVERGENCE_THRESHOLD;
        points.push(point);
        if streak >= DIVERGENCE_STREAK {
            return Err(Error::Diverged {
                iteration: t,
                streak,
            });
        }
    }
    Ok(OptimizerTrace {
        weights: w.as_slice().to_vec(),
        spectrum: spectrum.values().to_vec(),
        points,
        converged,
        final_params: params,
    })
}

/// `w^(n)` proportional to `((D)^n, (D-1)^n, ..., 1^n)`.
pub fn power_weights(d: usize, n: u32) -> Result<WeightVector> {
    WeightVector::normalized((0..d).map(|k| ((d - k) as f64).powi(n as i32)).collect())
}

/// Trace points inside the validity regime that break a bound by more
/// than `TRACE_SLACK`, as `(iteration, quantity)`.
pub fn trace_violations(trace: &OptimizerTrace, bounds: &BoundSet) -> Vec<(usize, String)> {
    let mut out = Vec::new();
    for p in &trace.points {
        let report = check_bounds_with_slack(&p.bundle, bounds, TRACE_SLACK);
        for c in report.violations() {
            out.push((p.iter, c.quantity.clone()));
        }
    }
    out
}

/// Number of sign changes of `dE_k` along the trace, ignoring exact zeros.
pub fn sign_changes(trace: &OptimizerTrace, k: usize) -> usize {
    let signs: Vec<bool> = trace
        .points
        .iter()
        .map(|p| p.bundle.delta_e[k])
        .filter(|v| *v != 0.0)
        .map(|v| v > 0.0)
        .collect();
    signs.windows(2).filter(|s| s[0] != s[1]).count()
}

pub fn trace_header(d: usize) -> Vec<String> {
    let mut h = vec!["iter".to_string(), "delta_E_w".into(), "delta_rho_w".into()];
    h.extend((0..d).map(|k| format!("delta_psi_{k}")));
    h.extend((0..d).map(|k| format!("delta_E_{k}")));
    h.push("sum_psi".into());
    h.push("sum_abs_E".into());
    h
}

/// Trace CSV preceded by a `# schema_version=...` comment line.
pub fn write_trace_csv<W: Write>(mut out: W, trace: &OptimizerTrace, seed: u64) -> Result<()> {
    let d = trace.spectrum.len();
    writeln!(
        out,
        "# schema_version={} seed={seed}",
        crate::sampler::SCHEMA_VERSION
    )?;
    let mut csv = csv::Writer::from_writer(out);
    csv.write_record(trace_header(d))?;
    for p in &trace.points {
        let b = &p.bundle;
        let mut row = vec![p.iter.to_string(), g12(b.delta_e_w), g12(b.delta_rho_w)];
        row.extend(b.delta_psi.iter().map(|&x| g12(x)));
        row.extend(b.delta_e.iter().map(|&x| g12(x)));
        row.push(g12(b.sum_psi));
        row.push(g12(b.sum_abs_e));
        csv.write_record(&row)?;
    }
    csv.flush()?;
    Ok(())
}

/// `quantity,lower_prefactor,upper_prefactor,g,G` for every available bound.
pub fn write_bounds_csv<W: Write>(mut out: W, bounds: &BoundSet, seed: u64) -> Result<()> {
    writeln!(
        out,
        "# schema_version={} seed={seed}",
        crate::sampler::SCHEMA_VERSION
    )?;
    let mut csv = csv::Writer::from_writer(out);
    csv.write_record(["quantity", "lower_prefactor", "upper_prefactor", "g", "G"])?;
    let (g, big_g) = (g12(bounds.gaps.g), g12(bounds.gaps.big_g));
    for (name, lo, hi) in bounds.rows() {
        csv.write_record([name, g12(lo), g12(hi), g.clone(), big_g.clone()])?;
    }
    csv.flush()?;
    Ok(())
}

#[derive(Debug, Clone)]
pub struct DemoRun {
    pub exponent: u32,
    pub weights: WeightVector,
    pub bounds: BoundSet,
    pub trace: OptimizerTrace,
}

/// One optimization per weight exponent, run concurrently.
pub fn run_demo(
    model: &IsingModel,
    exponents: &[u32],
    config: &AdamConfig,
) -> Result<Vec<DemoRun>> {
    let h = build_hamiltonian(model)?;
    let spectrum = exact_spectrum(&h)?;
    exponents
        .par_iter()
        .map(|&n| {
            let weights = power_weights(h.nrows(), n)?;
            let bounds = BoundSet::compute(&weights, &spectrum)?;
            let trace = adam_optimize(&weights, &h, config)?;
            Ok(DemoRun {
                exponent: n,
                weights,
                bounds,
                trace,
            })
        })
        .collect()
}

/// Writes `trace_w{n}.csv` and `bounds_w{n}.csv` per run into `dir`.
pub fn write_demo(
    dir: &std::path::Path,
    runs: &[DemoRun],
    seed: u64,
) -> Result<Vec<std::path::PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut paths = Vec::new();
    for run in runs {
        let trace_path = dir.join(format!("trace_w{}.csv", run.exponent));
        write_trace_csv(std::fs::File::create(&trace_path)?, &run.trace, seed)?;
        let bounds_path = dir.join(format!("bounds_w{}.csv", run.exponent));
        write_bounds_csv(std::fs::File::create(&bounds_path)?, &run.bounds, seed)?;
        paths.push(trace_path);
        paths.push(bounds_path);
    }
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_spin_is_pauli_x() {
        let h = build_hamiltonian(&IsingModel::new(vec![1.0], vec![]).unwrap()).unwrap();
        assert_eq!(h, pauli_x());
        let s = exact_spectrum(&h).unwrap();
        assert!((s.values()[0] + 1.0).abs() < 1e-14 && (s.values()[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn reference_model_diagonal_and_spectrum() {
        let h = build_hamiltonian(&IsingModel::reference()).unwrap();
        let diag: Vec<f64> = (0..4).map(|i| h[(i, i)]).collect();
        assert_eq!(diag, vec![0.09, -0.09, -0.09, 0.09]);
        let s = exact_spectrum(&h).unwrap();
        for (a, b) in s
            .values()
            .iter()
            .zip([-1.13483, -0.48575, 0.48575, 1.13483])
        {
            assert!((a - b).abs() < 1e-5);
        }
    }

    #[test]
    fn zero_model_is_zero_matrix() {
        let m = IsingModel::new(vec![0.0, 0.0, 0.0], vec![(0, 2, 0.0)]).unwrap();
        assert_eq!(build_hamiltonian(&m).unwrap(), DMatrix::zeros(8, 8));
    }

    #[test]
    fn rejects_bad_models() {
        assert!(IsingModel::new(vec![], vec![]).is_err());
        assert!(IsingModel::new(vec![0.0; 11], vec![]).is_err());
        assert!(IsingModel::new(vec![0.0; 2], vec![(1, 0, 1.0)]).is_err());
    }

    #[test]
    fn ansatz_identity_and_rotation() {
        let u = ansatz_unitary(4, &[0.0; 6]).unwrap();
        assert_eq!(u.as_real().unwrap(), &DMatrix::identity(4, 4));
        let r = ansatz_unitary(2, &[0.3]).unwrap();
        let m = r.as_real().unwrap();
        assert!((m[(0, 0)] - 0.3f64.cos()).abs() < 1e-14);
        assert!((m[(0, 1)] - 0.3f64.sin()).abs() < 1e-14);
        assert!(ansatz_unitary(3, &[0.0; 2]).is_err());
    }

    #[test]
    fn zero_iterations_give_initial_point() {
        let h = build_hamiltonian(&IsingModel::reference()).unwrap();
        let w = power_weights(4, 1).unwrap();
        let cfg = AdamConfig {
            max_iter: 0,
            ..AdamConfig::default()
        };
        let trace = adam_optimize(&w, &h, &cfg).unwrap();
        assert_eq!(trace.points.len(), 1);
        assert_eq!(trace.points[0].iter, 0);
    }

    #[test]
    fn power_weight_values() {
        let w = power_weights(4, 2).unwrap();
        let s = 16.0 + 9.0 + 4.0 + 1.0;
        assert!((w.get(0) - 16.0 / s).abs() < 1e-15 && (w.get(3) - 1.0 / s).abs() < 1e-15);
    }
}
