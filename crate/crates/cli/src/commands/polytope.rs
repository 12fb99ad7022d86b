use anyhow::Result;
use clap::Args;
use ensemble_bounds::format::g12;
use ensemble_bounds::polytope::{
    brute_force_extrema, constrained_extrema, cycle_bound_check, gok_minimum_check,
    permutohedron_slice, LinearTarget, Permutation, Space,
};
use serde_json::{json, Value};

use super::require_system;
use crate::input;
use crate::output::{header, num, nums, Format, Output};
use crate::{CheckFailed, SystemArgs};

#[derive(Args)]
pub struct PolytopeArgs {
    #[command(flatten)]
    system: SystemArgs,
    /// Ensemble-energy error defining the slicing hyperplane; 0 < delta <= g.
    #[arg(long)]
    delta: f64,
    /// Also enumerate every polytope vertex and edge and compare.
    #[arg(long)]
    oracle: bool,
    /// Check the one-cycle vertex bounds for this permutation, given as
    /// the image list `sigma(0),sigma(1),...`.
    #[arg(long)]
    permutation: Option<String>,
}

const AGREE_TOL: f64 = 1e-10;

pub fn run(args: PolytopeArgs, out: &Output) -> Result<()> {
    let (w, e) = require_system(&args.system)?;
    let mut targets = vec![LinearTarget::ensemble_state(&w)];
    for k in 0..w.dim() {
        targets.push(LinearTarget::eigenenergy(k, &e)?);
    }
    let mut rows = Vec::new();
    let mut disagreements = 0;
    for t in &targets {
        let a = constrained_extrema(t, &w, &e, args.delta)?;
        let b = if args.oracle {
            Some(brute_force_extrema(t, &w, &e, args.delta)?)
        } else {
            None
        };
        let agree = b.map(|b| {
            let close = |x: f64, y: f64| (x - y).abs() <= AGREE_TOL * (1.0 + x.abs().max(y.abs()));
            close(a.min, b.min) && close(a.max, b.max)
        });
        if agree == Some(false) {
            disagreements += 1;
        }
        rows.push((t.name.clone(), a, b, agree));
    }
    let slices = [Space::Weights, Space::Energies]
        .into_iter()
        .map(|s| permutohedron_slice(s, &w, &e, args.delta))
        .collect::<Result<Vec<_>, _>>()?;
    let gok_min = gok_minimum_check(w.as_slice(), e.values())?;
    let cycle = match &args.permutation {
        Some(p) => {
            let mapping: Vec<usize> = input::parse_vector(p)?
                .into_iter()
                .map(|x| {
                    if x >= 0.0 && x.fract() == 0.0 {
                        Ok(x as usize)
                    } else {
                        Err(ensemble_bounds::Error::InvalidArgument(format!(
                            "permutation entry {x} is not an index"
                        )))
                    }
                })
                .collect::<Result<_, _>>()?;
            Some(cycle_bound_check(&Permutation::new(mapping)?, &w, &e)?)
        }
        None => None,
    };

    match out.format {
        Format::Json => {
            let extrema: Vec<Value> = rows
                .iter()
                .map(|(name, a, b, agree)| {
                    let mut v = json!({ "quantity": name, "min": num(a.min), "max": num(a.max) });
                    if let Some(b) = b {
                        v["oracle_min"] = num(b.min);
                        v["oracle_max"] = num(b.max);
                        v["agree"] = json!(agree);
                    }
                    v
                })
                .collect();
            let slices: Vec<Value> = slices
                .iter()
                .map(|s| {
                    json!({
                        "space": s.space.name(),
                        "base": nums(&s.base),
                        "delta": num(s.delta),
                        "vertices": s.intersection_vertices.iter().map(|v| json!({
                            "transposition": [v.transposition.0, v.transposition.1],
                            "p": num(v.p),
                            "point": nums(&v.point),
                        })).collect::<Vec<_>>(),
                    })
                })
                .collect();
            let mut body = json!({
                "weights": nums(w.as_slice()),
                "energies": nums(e.values()),
                "delta": num(args.delta),
                "gok_minimum": num(gok_min),
                "extrema": extrema,
                "slices": slices,
            });
            if let Some(c) = &cycle {
                body["cycle"] = json!({
                    "cycle": c.cycle, "length": c.length, "positive_moved": c.positive_moved,
                    "delta_E_w": num(c.delta_e_w), "delta_1": num(c.delta_1), "delta_2": num(c.delta_2),
                    "G": num(c.big_g), "lower": num(c.lower), "upper": num(c.upper),
                    "lower_case_split": num(c.lower_case_split),
                    "holds": c.holds, "case_split_holds": c.case_split_holds,
                });
            }
            out.json(body)?;
        }
        Format::Csv => {
            let table: Vec<Vec<String>> = rows
                .iter()
                .map(|(name, a, b, agree)| {
                    let mut r = vec![name.clone(), g12(a.min), g12(a.max)];
                    match b {
                        Some(b) => {
                            r.extend([g12(b.min), g12(b.max), agree.unwrap_or(false).to_string()])
                        }
                        None => r.extend([String::new(), String::new(), String::new()]),
                    }
                    r
                })
                .collect();
            let mut extra = vec![("delta", g12(args.delta)), ("gok_minimum", g12(gok_min))];
            if let Some(c) = &cycle {
                extra.push(("cycle_delta_E_w", g12(c.delta_e_w)));
                extra.push(("cycle_lower", g12(c.lower)));
                extra.push(("cycle_upper", g12(c.upper)));
                extra.push(("cycle_holds", c.holds.to_string()));
            }
            out.csv(
                &extra,
                &header(&[
                    "quantity",
                    "min",
                    "max",
                    "oracle_min",
                    "oracle_max",
                    "agree",
                ]),
                &table,
            )?;
        }
    }
    if disagreements > 0 {
        return Err(CheckFailed(format!(
            "{disagreements} quantities disagree between the analytic slice and the vertex oracle"
        ))
        .into());
    }
    if let Some(c) = cycle {
        if !c.holds {
            return Err(
                CheckFailed("the permutation vertex violates its cycle bounds".into()).into(),
            );
        }
    }
    Ok(())
}
