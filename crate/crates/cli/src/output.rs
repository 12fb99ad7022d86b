use std::fs::File;
use std::io::{self, Write};
use std::path::PathBuf;

use anyhow::Result;
use ensemble_bounds::format::g12;
use ensemble_bounds::sampler::SCHEMA_VERSION;
use serde_json::{json, Map, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

/// Where and how a command writes its main result.
pub struct Output {
    pub format: Format,
    pub seed: u64,
    pub path: Option<PathBuf>,
}

impl Output {
    pub fn writer(&self) -> Result<Box<dyn Write>> {
        Ok(match &self.path {
            Some(p) => Box::new(io::BufWriter::new(
                File::create(p).map_err(ensemble_bounds::Error::Io)?,
            )),
            None => Box::new(io::stdout().lock()),
        })
    }

    /// JSON object with `schema_version` and `seed` prepended.
    pub fn json(&self, body: Value) -> Result<()> {
        let mut obj = Map::new();
        obj.insert("schema_version".into(), json!(SCHEMA_VERSION));
        obj.insert("seed".into(), json!(self.seed));
        if let Value::Object(m) = body {
            obj.extend(m);
        }
        let mut w = self.writer()?;
        serde_json::to_writer_pretty(&mut w, &Value::Object(obj))?;
        writeln!(w).map_err(ensemble_bounds::Error::Io)?;
        w.flush().map_err(ensemble_bounds::Error::Io)?;
        Ok(())
    }

    /// CSV table behind a `# schema_version=.. seed=..` line; `extra` is
    /// appended to that line as `key=value` pairs.
    pub fn csv(
        &self,
        extra: &[(&str, String)],
        header: &[String],
        rows: &[Vec<String>],
    ) -> Result<()> {
        let mut w = self.writer()?;
        let mut line = format!("# schema_version={SCHEMA_VERSION} seed={}", self.seed);
        for (k, v) in extra {
            line.push_str(&format!(" {k}={v}"));
        }
        writeln!(w, "{line}").map_err(ensemble_bounds::Error::Io)?;
        let mut csv = csv::Writer::from_writer(w);
        csv.write_record(header)?;
        for r in rows {
            csv.write_record(r)?;
        }
        csv.flush().map_err(ensemble_bounds::Error::Io)?;
        Ok(())
    }
}

/// A JSON number carrying 12 significant digits; `null` when not finite.
pub fn num(x: f64) -> Value {
    if !x.is_finite() {
        return Value::Null;
    }
    let rounded: f64 = g12(x).parse().expect("g12 output parses");
    json!(rounded)
}

pub fn nums(v: &[f64]) -> Value {
    Value::Array(v.iter().map(|&x| num(x)).collect())
}

pub fn header(cols: &[&str]) -> Vec<String> {
    cols.iter().map(|s| s.to_string()).collect()
}
