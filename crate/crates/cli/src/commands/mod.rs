pub mod bounds;
pub mod check;
pub mod polytope;
pub mod sample;
pub mod vqe;
pub mod weights;

use anyhow::{Context, Result};
use ensemble_bounds::{EnergySpectrum, WeightVector};

use crate::input;
use crate::SystemArgs;

pub fn require_spectrum(s: &SystemArgs) -> Result<EnergySpectrum> {
    let arg = s
        .energies
        .as_deref()
        .ok_or_else(|| ensemble_bounds::Error::InvalidArgument("--E is required".into()))?;
    input::spectrum(arg).context("parsing --E")
}

pub fn require_weights(s: &SystemArgs) -> Result<WeightVector> {
    let arg = s
        .weights
        .as_deref()
        .ok_or_else(|| ensemble_bounds::Error::InvalidArgument("--w is required".into()))?;
    input::weights(arg, s.normalize).context("parsing --w")
}

pub fn require_system(s: &SystemArgs) -> Result<(WeightVector, EnergySpectrum)> {
    let e = require_spectrum(s)?;
    let w = require_weights(s)?;
    if w.dim() != e.dim() {
        return Err(ensemble_bounds::Error::DimensionMismatch {
            expected: e.dim(),
            actual: w.dim(),
        }
        .into());
    }
    Ok((w, e))
}
