use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Args;
use ensemble_bounds::bounds::{check_bounds_with_slack, BOUND_SLACK};
use ensemble_bounds::format::g12;
use ensemble_bounds::sampler::read_records;
use ensemble_bounds::BoundSet;
use serde_json::json;

use super::require_system;
use crate::output::{header, num, Format, Output};
use crate::{CheckFailed, SystemArgs};

#[derive(Args)]
pub struct CheckArgs {
    #[command(flatten)]
    system: SystemArgs,
    /// Record CSV as written by `sample --records`.
    #[arg(long)]
    input: PathBuf,
    /// Absolute tolerance on each bound.
    #[arg(long, default_value_t = BOUND_SLACK)]
    slack: f64,
}

pub fn run(args: CheckArgs, out: &Output) -> Result<()> {
    let (w, e) = require_system(&args.system)?;
    let bounds = BoundSet::compute(&w, &e)?;
    let file = std::fs::File::open(&args.input)
        .map_err(ensemble_bounds::Error::Io)
        .with_context(|| format!("opening {}", args.input.display()))?;
    let records = read_records(std::io::BufReader::new(file))?;
    let mut in_regime = 0u64;
    let mut failures = Vec::new();
    for r in &records {
        if r.bundle.dim() != w.dim() {
            return Err(ensemble_bounds::Error::DimensionMismatch {
                expected: w.dim(),
                actual: r.bundle.dim(),
            }
            .into());
        }
        let report = check_bounds_with_slack(&r.bundle, &bounds, args.slack);
        if report.in_regime() {
            in_regime += 1;
        }
        for c in report.violations() {
            failures.push((r.source.name(), r.sample_index, c.clone()));
        }
    }

    match out.format {
        Format::Json => out.json(json!({
            "records": records.len(),
            "in_regime": in_regime,
            "g": num(bounds.gaps.g),
            "violations": failures.iter().map(|(src, i, c)| json!({
                "source": src, "sample_index": i, "quantity": c.quantity,
                "value": num(c.value), "lower": num(c.lower), "upper": num(c.upper),
            })).collect::<Vec<_>>(),
        }))?,
        Format::Csv => {
            let rows: Vec<Vec<String>> = failures
                .iter()
                .map(|(src, i, c)| {
                    vec![
                        src.to_string(),
                        i.to_string(),
                        c.quantity.clone(),
                        g12(c.value),
                        g12(c.lower),
                        g12(c.upper),
                    ]
                })
                .collect();
            out.csv(
                &[
                    ("records", records.len().to_string()),
                    ("in_regime", in_regime.to_string()),
                ],
                &header(&[
                    "source",
                    "sample_index",
                    "quantity",
                    "value",
                    "lower",
                    "upper",
                ]),
                &rows,
            )?;
        }
    }
    if !failures.is_empty() {
        return Err(CheckFailed(format!("{} bound violations", failures.len())).into());
    }
    Ok(())
}
