use anyhow::Result;
use clap::Args;
use ensemble_bounds::format::g12;
use ensemble_bounds::weights::{grid_search_optimal, TargetKind};
use serde_json::json;

use crate::input;
use crate::output::{num, nums, Format, Output};
use crate::CheckFailed;

#[derive(Args)]
pub struct WeightsArgs {
    /// E_k, sumE_all, sumE_K, Psi_k, sumPsi_all or sumPsi_K.
    #[arg(long)]
    target: String,
    #[arg(long = "k")]
    k: Option<usize>,
    #[arg(long = "K")]
    count: Option<usize>,
    #[arg(long = "D")]
    dim: Option<usize>,
    /// Energies; required for the state targets.
    #[arg(long = "E", allow_hyphen_values = true)]
    energies: Option<String>,
    /// Cross-check the closed form against a grid search.
    #[arg(long)]
    verify: bool,
    /// Grid step in the gap coordinates for --verify.
    #[arg(long, default_value_t = 1e-3)]
    resolution: f64,
}

pub fn run(args: WeightsArgs, out: &Output) -> Result<()> {
    let target = args
        .target
        .parse::<TargetKind>()?
        .with_index(args.k, args.count)?;
    let e = args.energies.as_deref().map(input::spectrum).transpose()?;
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
            return Err(
                ensemble_bounds::Error::InvalidArgument("--D or --E is required".into()).into(),
            )
        }
    };
    let w = target.closed_form(d, e.as_ref())?;
    let bound = target.lowest_upper_bound(d, e.as_ref())?;
    let grid = if args.verify {
        Some(grid_search_optimal(
            &target,
            d,
            e.as_ref(),
            args.resolution,
        )?)
    } else {
        None
    };
    let deviation = grid.as_ref().map(|g| {
        w.as_slice()
            .iter()
            .zip(g.weights.as_slice())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    });
    // one grid step in mu moves a weight by at most `resolution`
    let agrees = match (&grid, deviation) {
        (Some(g), Some(dev)) => {
            dev <= args.resolution * (1.0 + 1e-9) && (g.bound - bound).abs() <= 0.01 * bound.abs()
        }
        _ => true,
    };

    match out.format {
        Format::Json => {
            let mut body = json!({
                "target": target.to_string(),
                "weights": nums(w.as_slice()),
                "lowest_upper_bound": num(bound),
            });
            if let (Some(g), Some(dev)) = (&grid, deviation) {
                body["grid"] = json!({
                    "resolution": num(args.resolution),
                    "weights": nums(g.weights.as_slice()),
                    "bound": num(g.bound),
                    "evaluated": g.evaluated,
                    "max_weight_deviation": num(dev),
                    "agrees": agrees,
                });
            }
            out.json(body)?;
        }
        Format::Csv => {
            let mut header = vec!["source".to_string(), "lowest_upper_bound".into()];
            header.extend((0..d).map(|k| format!("w_{k}")));
            let row = |src: &str, b: f64, ws: &[f64]| {
                let mut r = vec![src.to_string(), g12(b)];
                r.extend(ws.iter().map(|&x| g12(x)));
                r
            };
            let mut rows = vec![row("closed_form", bound, w.as_slice())];
            if let Some(g) = &grid {
                rows.push(row("grid", g.bound, g.weights.as_slice()));
            }
            out.csv(&[("target", target.to_string())], &header, &rows)?;
        }
    }
    if !agrees {
        return Err(CheckFailed(format!(
            "grid search disagrees with the closed form for {target} (max weight deviation {})",
            g12(deviation.unwrap_or(f64::NAN))
        ))
        .into());
    }
    Ok(())
}
