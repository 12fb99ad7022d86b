use anyhow::Result;
use clap::Args;
use ensemble_bounds::format::{g12, join_g12};
use ensemble_bounds::weights::TargetKind;
use ensemble_bounds::{BoundSet, EnergySpectrum, WeightVector};
use serde_json::{json, Value};

use super::{require_spectrum, require_weights};
use crate::output::{header, num, nums, Format, Output};
use crate::{CheckFailed, SystemArgs};

#[derive(Args)]
pub struct BoundsArgs {
    #[command(flatten)]
    system: SystemArgs,
    /// Use the optimal weights for this target instead of --w
    /// (E_k, sumE_all, sumE_K, Psi_k, sumPsi_all, sumPsi_K).
    #[arg(long = "w-optimal")]
    w_optimal: Option<String>,
    /// Dimension, needed with --w-optimal when --E is absent.
    #[arg(long = "D")]
    dim: Option<usize>,
    #[arg(long = "k")]
    k: Option<usize>,
    #[arg(long = "K")]
    count: Option<usize>,
}

pub fn run(args: BoundsArgs, out: &Output) -> Result<()> {
    let e = match &args.system.energies {
        Some(_) => Some(require_spectrum(&args.system)?),
        None => None,
    };
    let (w, named) = match &args.w_optimal {
        Some(name) => {
            let target = name.parse::<TargetKind>()?.with_index(args.k, args.count)?;
            let d = match (&e, args.dim) {
                (Some(e), Some(d)) if d != e.dim() => {
                    return Err(ensemble_bounds::Error::DimensionMismatch {
                        expected: e.dim(),
                        actual: d,
                    }
                    .into())
                }
                (Some(e), _) => e.dim(),
                (None, Some(d)) => d,
                (None, None) => {
                    return Err(ensemble_bounds::Error::InvalidArgument(
                        "--w-optimal needs --D or --E".into(),
                    )
                    .into())
                }
            };
            let w = target.closed_form(d, e.as_ref())?;
            let lub = target.lowest_upper_bound(d, e.as_ref())?;
            (w, Some((target.to_string(), lub)))
        }
        None => (require_weights(&args.system)?, None),
    };
    if let Some(e) = &e {
        if e.dim() != w.dim() {
            return Err(ensemble_bounds::Error::DimensionMismatch {
                expected: e.dim(),
                actual: w.dim(),
            }
            .into());
        }
    }
    let bounds = match &e {
        Some(e) => Some(BoundSet::compute(&w, e)?),
        None => None,
    };
    emit(out, &w, e.as_ref(), bounds.as_ref(), named.as_ref())?;

    // pairs of equal weights, at least one of them positive; the padded
    // w_D = 0 only makes the top bound loose and is reported as a refusal
    let ws = w.as_slice();
    let mut degenerate: Vec<usize> = Vec::new();
    for k in 0..ws.len().saturating_sub(1) {
        if ws[k] > ensemble_bounds::spectrum::WEIGHT_DEGENERACY_ABS
            && ws[k] - ws[k + 1] <= ensemble_bounds::spectrum::WEIGHT_DEGENERACY_ABS
        {
            degenerate.extend([k, k + 1]);
        }
    }
    degenerate.dedup();
    if !degenerate.is_empty() {
        let ks = degenerate
            .iter()
            .map(|k| k.to_string())
            .collect::<Vec<_>>()
            .join(",");
        return Err(CheckFailed(format!(
            "degenerate weights at k={ks}: states sharing a weight can mix at no energy cost, \
             so b_plus and c_-/c_+ are refused there"
        ))
        .into());
    }
    Ok(())
}

fn emit(
    out: &Output,
    w: &WeightVector,
    e: Option<&EnergySpectrum>,
    bounds: Option<&BoundSet>,
    named: Option<&(String, f64)>,
) -> Result<()> {
    match out.format {
        Format::Json => {
            let mut body = json!({ "weights": nums(w.as_slice()) });
            if let Some((target, lub)) = named {
                body["target"] = json!(target);
                body["lowest_upper_bound"] = num(*lub);
            }
            if let (Some(e), Some(b)) = (e, bounds) {
                body["energies"] = nums(e.values());
                body["shape"] = json!(b.shape.name());
                body["targeted"] = json!(b.targeted);
                body["g"] = num(b.gaps.g);
                body["G"] = num(b.gaps.big_g);
                body["prefactors"] = Value::Array(
                    b.rows()
                        .into_iter()
                        .map(|(q, lo, hi)| json!({ "quantity": q, "lower": num(lo), "upper": num(hi) }))
                        .collect(),
                );
                body["refusals"] = json!(b.refusals);
            }
            out.json(body)
        }
        Format::Csv => {
            let mut extra = vec![("w", join_g12(w.as_slice()))];
            if let Some((target, lub)) = named {
                extra.push(("target", target.clone()));
                extra.push(("lowest_upper_bound", g12(*lub)));
            }
            let Some(b) = bounds else {
                return out.csv(
                    &extra,
                    &header(&["quantity", "lower_prefactor", "upper_prefactor", "g", "G"]),
                    &[],
                );
            };
            for r in &b.refusals {
                eprintln!("refused: {r}");
            }
            let rows: Vec<Vec<String>> = b
                .rows()
                .into_iter()
                .map(|(q, lo, hi)| vec![q, g12(lo), g12(hi), g12(b.gaps.g), g12(b.gaps.big_g)])
                .collect();
            out.csv(
                &extra,
                &header(&["quantity", "lower_prefactor", "upper_prefactor", "g", "G"]),
                &rows,
            )
        }
    }
}
