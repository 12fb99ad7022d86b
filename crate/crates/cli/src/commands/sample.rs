use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Args;
use ensemble_bounds::format::g12;
use ensemble_bounds::sampler::{
    preset_weight_vectors, scatter_experiment_multi, RecordSource, RecordWriter, SampleMode,
    ScatterConfig, ScatterSummary, NEARLY_EQUAL_STEP,
};
use ensemble_bounds::{EnergySpectrum, WeightVector};
use serde_json::{json, Value};

use super::require_system;
use crate::output::{header, num, nums, Format, Output};
use crate::{CheckFailed, SystemArgs};

#[derive(Args)]
pub struct SampleArgs {
    #[command(flatten)]
    system: SystemArgs,
    /// Use a preset instead of --E/--w: `three-level` is E=(-1,0,2),
    /// `five-level` is E=(-1,0,2,5,8), each with four weight vectors
    /// targeting the lowest three states (nearly equal, optimal for the
    /// summed energy error, geometric ratios 4 and 8).
    #[arg(long, value_parser = ["three-level", "five-level"])]
    preset: Option<String>,
    /// Step of the "nearly equal" preset weights, proportional to
    /// 1 + step (K-1-k).
    #[arg(long, default_value_t = NEARLY_EQUAL_STEP)]
    nearly_equal_step: f64,
    /// Number of random trial bases.
    #[arg(long, default_value_t = 100_000)]
    n: u64,
    /// orthogonal or unitary.
    #[arg(long, default_value = "orthogonal")]
    mode: String,
    /// Points per bound in the Jacobi saturation sweep (0 disables it).
    #[arg(long, default_value_t = 20)]
    jacobi_steps: usize,
    /// Leave out the D! permutation vertices.
    #[arg(long)]
    no_permutations: bool,
    /// Write every record as CSV: a file for one weight vector, a
    /// directory of `records_<name>.csv` for several.
    #[arg(long)]
    records: Option<PathBuf>,
    /// Fail (exit 2) if any in-regime record violates a bound.
    #[arg(long)]
    check: bool,
}

pub fn run(args: SampleArgs, out: &Output) -> Result<()> {
    let (e, sets): (EnergySpectrum, Vec<(String, WeightVector)>) = match args.preset.as_deref() {
        Some(preset) => {
            let e = if preset == "three-level" {
                vec![-1.0, 0.0, 2.0]
            } else {
                vec![-1.0, 0.0, 2.0, 5.0, 8.0]
            };
            let e = EnergySpectrum::new(e)?;
            let sets = preset_weight_vectors(e.dim(), 3, args.nearly_equal_step)?;
            (e, sets)
        }
        None => {
            let (w, e) = require_system(&args.system)?;
            (e, vec![("w".to_string(), w)])
        }
    };
    let config = ScatterConfig {
        n_samples: args.n,
        mode: args.mode.parse::<SampleMode>()?,
        seed: out.seed,
        jacobi_steps: args.jacobi_steps,
        include_permutations: !args.no_permutations,
    };

    let mut writers = Vec::new();
    if let Some(path) = &args.records {
        let paths: Vec<PathBuf> = if sets.len() == 1 {
            vec![path.clone()]
        } else {
            std::fs::create_dir_all(path).map_err(ensemble_bounds::Error::Io)?;
            sets.iter()
                .map(|(name, _)| path.join(format!("records_{name}.csv")))
                .collect()
        };
        for (p, (name, w)) in paths.iter().zip(&sets) {
            let f = File::create(p)
                .map_err(ensemble_bounds::Error::Io)
                .with_context(|| format!("creating {}", p.display()))?;
            let extra = format!(
                " weights={name} w={}",
                ensemble_bounds::format::join_g12(w.as_slice())
            );
            writers.push(RecordWriter::new(
                BufWriter::new(f),
                e.dim(),
                out.seed,
                &extra,
            )?);
        }
    }
    let ws: Vec<WeightVector> = sets.iter().map(|(_, w)| w.clone()).collect();
    let summaries = scatter_experiment_multi(&ws, &e, &config, |i, r| {
        if let Some(w) = writers.get_mut(i) {
            w.write(r)?;
        }
        Ok(())
    })?;
    for w in writers {
        w.finish()?;
    }

    emit(out, &sets, &summaries)?;
    let bad: u64 = summaries.iter().map(|s| s.violations).sum();
    if args.check && bad > 0 {
        return Err(CheckFailed(format!("{bad} in-regime records violate a bound")).into());
    }
    Ok(())
}

/// `(quantity, lower, upper, all-source min, all-source max, random min, random max)`.
fn envelope_rows(s: &ScatterSummary) -> Vec<(String, f64, f64, f64, f64, f64, f64)> {
    let all = s.combined_envelope();
    let random = &s.envelopes[&RecordSource::Random];
    s.bounds
        .rows()
        .into_iter()
        .map(|(q, lo, hi)| {
            let get = |v: Option<f64>| v.unwrap_or(f64::NAN);
            (
                q.clone(),
                lo,
                hi,
                get(all.min_ratio(&q)),
                get(all.max_ratio(&q)),
                get(random.min_ratio(&q)),
                get(random.max_ratio(&q)),
            )
        })
        .collect()
}

fn emit(out: &Output, sets: &[(String, WeightVector)], summaries: &[ScatterSummary]) -> Result<()> {
    match out.format {
        Format::Json => {
            let runs: Vec<Value> = sets
                .iter()
                .zip(summaries)
                .map(|((name, w), s)| {
                    let envelopes: serde_json::Map<String, Value> = s
                        .envelopes
                        .iter()
                        .map(|(src, env)| {
                            let qs: serde_json::Map<String, Value> = env
                                .quantities
                                .iter()
                                .map(|(q, v)| {
                                    let bins: Vec<Value> = v
                                        .bin_max
                                        .iter()
                                        .map(|b| b.map_or(Value::Null, num))
                                        .collect();
                                    (
                                        q.clone(),
                                        json!({ "min_ratio": num(v.min_ratio), "max_ratio": num(v.max_ratio), "bin_max": bins }),
                                    )
                                })
                                .collect();
                            (src.name().to_string(), json!({ "records": env.records, "quantities": qs }))
                        })
                        .collect();
                    let quantities: Vec<Value> = envelope_rows(s)
                        .into_iter()
                        .map(|(q, lo, hi, mn, mx, rmn, rmx)| {
                            json!({
                                "quantity": q, "lower_prefactor": num(lo), "upper_prefactor": num(hi),
                                "envelope_min": num(mn), "envelope_max": num(mx),
                                "random_min": num(rmn), "random_max": num(rmx),
                            })
                        })
                        .collect();
                    json!({
                        "name": name,
                        "weights": nums(w.as_slice()),
                        "g": num(s.bounds.gaps.g),
                        "G": num(s.bounds.gaps.big_g),
                        "records": s.records,
                        "in_regime": s.in_regime,
                        "violations": s.violations,
                        "worst_violation": s.worst_violation.as_ref().map(|c| json!({
                            "quantity": c.quantity, "value": num(c.value),
                            "lower": num(c.lower), "upper": num(c.upper),
                        })),
                        "min_delta_E_w": num(s.min_delta_e_w),
                        "min_kyfan_partial": num(s.min_kyfan_partial),
                        "max_abs_trace_partial": num(s.max_abs_trace_partial),
                        "bounds": quantities,
                        "envelopes": envelopes,
                    })
                })
                .collect();
            out.json(json!({
                "energies": nums(&summaries[0].energies),
                "runs": runs,
            }))
        }
        Format::Csv => {
            let mut rows = Vec::new();
            for ((name, _), s) in sets.iter().zip(summaries) {
                eprintln!(
                    "{name}: records={} in_regime={} violations={} min_delta_E_w={}",
                    s.records,
                    s.in_regime,
                    s.violations,
                    g12(s.min_delta_e_w)
                );
                for (q, lo, hi, mn, mx, rmn, rmx) in envelope_rows(s) {
                    rows.push(vec![
                        name.clone(),
                        q,
                        g12(lo),
                        g12(hi),
                        g12(mn),
                        g12(mx),
                        g12(rmn),
                        g12(rmx),
                    ]);
                }
            }
            out.csv(
                &[],
                &header(&[
                    "weights",
                    "quantity",
                    "lower_prefactor",
                    "upper_prefactor",
                    "envelope_min",
                    "envelope_max",
                    "random_min",
                    "random_max",
                ]),
                &rows,
            )
        }
    }
}
