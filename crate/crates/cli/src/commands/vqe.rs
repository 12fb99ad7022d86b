use std::path::PathBuf;

use anyhow::Result;
use clap::Args;
use ensemble_bounds::format::{g12, join_g12};
use ensemble_bounds::vqe::{
    build_hamiltonian, exact_spectrum, run_demo, sign_changes, trace_violations, write_demo,
    AdamConfig, DemoRun, GradientMode, IsingModel,
};
use serde_json::{json, Value};

use crate::input;
use crate::output::{header, num, nums, Format, Output};

#[derive(Args)]
pub struct VqeArgs {
    /// Two spins with J_12 = 0.09, a = (0.32696, 0.80430).
    #[arg(long)]
    reference_model: bool,
    /// Transverse-field coefficients a_i, one per spin.
    #[arg(long, allow_hyphen_values = true, conflicts_with = "reference_model")]
    a: Option<String>,
    /// Coupling `i,j,J_ij` (0-based, i < j); repeatable.
    #[arg(long, allow_hyphen_values = true, conflicts_with = "reference_model")]
    coupling: Vec<String>,
    /// Weight exponents n for w proportional to (D^n, ..., 2^n, 1); repeatable.
    #[arg(long = "weights-exp", default_values_t = [1u32, 2, 3])]
    weights_exp: Vec<u32>,
    #[arg(long, default_value_t = 5000)]
    max_iter: usize,
    #[arg(long, default_value_t = 0.01)]
    lr: f64,
    /// Use central finite differences instead of the exact gradient.
    #[arg(long)]
    finite_difference: bool,
    /// Write trace_w<n>.csv and bounds_w<n>.csv here.
    #[arg(long)]
    trace_dir: Option<PathBuf>,
    /// Print the exact spectrum and stop.
    #[arg(long)]
    spectrum_only: bool,
}

fn model(args: &VqeArgs) -> Result<IsingModel> {
    if args.reference_model {
        return Ok(IsingModel::reference());
    }
    let a = args.a.as_deref().ok_or_else(|| {
        ensemble_bounds::Error::InvalidArgument("give --reference-model or --a".into())
    })?;
    let mut couplings = Vec::new();
    for c in &args.coupling {
        let v = input::parse_vector(c)?;
        let index = |x: f64| -> Result<usize> {
            if x >= 0.0 && x.fract() == 0.0 {
                Ok(x as usize)
            } else {
                Err(ensemble_bounds::Error::InvalidArgument(format!(
                    "spin index {x} is not an integer"
                ))
                .into())
            }
        };
        if v.len() != 3 {
            return Err(ensemble_bounds::Error::InvalidArgument(format!(
                "coupling `{c}` needs i,j,J"
            ))
            .into());
        }
        couplings.push((index(v[0])?, index(v[1])?, v[2]));
    }
    Ok(IsingModel::new(input::parse_vector(a)?, couplings)?)
}

pub fn run(args: VqeArgs, out: &Output) -> Result<()> {
    let model = model(&args)?;
    let h = build_hamiltonian(&model)?;
    let spectrum = exact_spectrum(&h)?;
    if args.spectrum_only {
        return match out.format {
            Format::Json => out.json(json!({ "exact_spectrum": nums(spectrum.values()) })),
            Format::Csv => {
                let rows: Vec<Vec<String>> = spectrum
                    .values()
                    .iter()
                    .enumerate()
                    .map(|(k, e)| vec![k.to_string(), g12(*e)])
                    .collect();
                out.csv(&[], &header(&["k", "E_k"]), &rows)
            }
        };
    }

    let config = AdamConfig {
        learning_rate: args.lr,
        max_iter: args.max_iter,
        seed: out.seed,
        gradient: if args.finite_difference {
            GradientMode::FiniteDifference
        } else {
            GradientMode::Analytic
        },
        ..AdamConfig::default()
    };
    let runs = run_demo(&model, &args.weights_exp, &config)?;
    if let Some(dir) = &args.trace_dir {
        write_demo(dir, &runs, out.seed)?;
    }

    match out.format {
        Format::Json => {
            let list: Vec<Value> = runs
                .iter()
                .map(|r| {
                    let t = &r.trace;
                    json!({
                        "weights_exp": r.exponent,
                        "weights": nums(r.weights.as_slice()),
                        "iterations": t.points.len() - 1,
                        "converged": t.converged,
                        "final_delta_E_w": num(t.last().bundle.delta_e_w),
                        "best_delta_E_w": num(t.last().best_delta_e_w),
                        "bound_violations": trace_violations(t, &r.bounds).len(),
                        "delta_E_1_sign_changes": energy_sign_changes(r),
                        "g": num(r.bounds.gaps.g),
                        "G": num(r.bounds.gaps.big_g),
                    })
                })
                .collect();
            out.json(json!({
                "exact_spectrum": nums(spectrum.values()),
                "runs": list,
            }))
        }
        Format::Csv => {
            let rows: Vec<Vec<String>> = runs
                .iter()
                .map(|r| {
                    let t = &r.trace;
                    vec![
                        r.exponent.to_string(),
                        join_g12(r.weights.as_slice()).replace(',', ";"),
                        (t.points.len() - 1).to_string(),
                        t.converged.to_string(),
                        g12(t.last().bundle.delta_e_w),
                        trace_violations(t, &r.bounds).len().to_string(),
                        energy_sign_changes(r).to_string(),
                    ]
                })
                .collect();
            out.csv(
                &[("exact_spectrum", join_g12(spectrum.values()))],
                &header(&[
                    "weights_exp",
                    "weights",
                    "iterations",
                    "converged",
                    "final_delta_E_w",
                    "bound_violations",
                    "delta_E_1_sign_changes",
                ]),
                &rows,
            )
        }
    }
}

fn energy_sign_changes(run: &DemoRun) -> usize {
    if run.weights.dim() > 1 {
        sign_changes(&run.trace, 1)
    } else {
        0
    }
}
