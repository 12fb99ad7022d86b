//! Error bounds for ensemble variational principles.
//!
//! The ensemble energy `sum_k w_k <Psi~_k|H|Psi~_k>` of any orthonormal trial
//! basis is bounded below by `sum_k w_k E_k`. This crate quantifies how far
//! the trial states, the ensemble state and the individual energies can be
//! from their exact counterparts once the ensemble-energy error is known.

// `!(x >= 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod basis;
pub mod bounds;
pub mod error;
pub mod format;
pub mod functionals;
pub mod linalg;
pub mod polytope;
pub mod sampler;
pub mod spectrum;
pub mod vqe;
pub mod weights;

pub use basis::{BasisMap, BasisMode, UnistochasticMatrix};
pub use bounds::{
    check_bounds, eigenenergy_prefactors, eigenenergy_sum_prefactors, eigenstate_prefactor,
    eigenstate_sum_prefactors, ensemble_state_prefactors, gap_functions, BoundSet,
    ComplianceReport, ComplianceStatus, GapFunctions,
};
pub use error::{Error, ErrorKind, Result};
pub use functionals::{
    ensemble_energy, error_bundle, observable_error_bound, rr_state_bounds,
    unistochastic_from_basis, ErrorBundle,
};
pub use spectrum::{EnergySpectrum, WeightShape, WeightVector};
pub use weights::{grid_search_optimal, GridOptimum, TargetKind, WeightTarget};
