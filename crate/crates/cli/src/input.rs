use std::path::Path;

use anyhow::{bail, Context, Result};
use ensemble_bounds::{EnergySpectrum, WeightVector};

/// Parses `1,2,3` or `@path`; a file may separate values by commas or
/// whitespace and use `#` comments.
pub fn parse_vector(arg: &str) -> Result<Vec<f64>> {
    let text = match arg.strip_prefix('@') {
        Some(path) => read_file(Path::new(path))?,
        None => arg.to_string(),
    };
    let mut out = Vec::new();
    for line in text.lines() {
        let line = line.split('#').next().unwrap_or("");
        for tok in line.split(|c: char| c == ',' || c.is_whitespace()) {
            if tok.is_empty() {
                continue;
            }
            let v: f64 = tok.parse().map_err(|_| {
                ensemble_bounds::Error::InvalidArgument(format!("`{tok}` is not a number"))
            })?;
            if !v.is_finite() {
                bail!(ensemble_bounds::Error::InvalidArgument(format!(
                    "`{tok}` is not finite"
                )));
            }
            out.push(v);
        }
    }
    if out.is_empty() {
        bail!(ensemble_bounds::Error::InvalidArgument(format!(
            "no values in `{arg}`"
        )));
    }
    Ok(out)
}

pub fn read_file(path: &Path) -> Result<String> {
    std::fs::read_to_string(path)
        .map_err(ensemble_bounds::Error::Io)
        .with_context(|| format!("reading {}", path.display()))
}

pub fn spectrum(arg: &str) -> Result<EnergySpectrum> {
    Ok(EnergySpectrum::new(parse_vector(arg)?)?)
}

pub fn weights(arg: &str, normalize: bool) -> Result<WeightVector> {
    let v = parse_vector(arg)?;
    Ok(if normalize {
        WeightVector::normalized(v)?
    } else {
        WeightVector::new(v)?
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inline_and_file_vectors() {
        assert_eq!(parse_vector("-1,0,2").unwrap(), vec![-1.0, 0.0, 2.0]);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("e.txt");
        std::fs::write(&p, "# energies\n-1 0\n2.5\n").unwrap();
        assert_eq!(
            parse_vector(&format!("@{}", p.display())).unwrap(),
            vec![-1.0, 0.0, 2.5]
        );
        assert!(parse_vector("1,x").is_err());
        assert!(parse_vector("").is_err());
    }
}
