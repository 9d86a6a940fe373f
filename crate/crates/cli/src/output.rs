use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::{json, Value};

use selfsim::levy::CadlagPath;
use selfsim::timechange::Lifetime;

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    }
    let file = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    Ok(BufWriter::new(file))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut out = create(path)?;
    serde_json::to_writer_pretty(&mut out, value)?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}

pub fn write_path(path: &Path, cadlag: &CadlagPath) -> Result<()> {
    cadlag.write_csv(create(path)?)?;
    Ok(())
}

/// Plain table; floats use the shortest round-trip representation.
pub fn write_table(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let mut out = csv::Writer::from_writer(create(path)?);
    out.write_record(header)?;
    for row in rows {
        out.write_record(&row)?;
    }
    out.flush()?;
    Ok(())
}

pub fn lifetime_json(lifetime: &Lifetime) -> Value {
    match *lifetime {
        Lifetime::Killed(value) => json!({ "kind": "killed", "value": value }),
        Lifetime::Converged { value, tail } => json!({ "kind": "converged", "value": value, "tail": tail }),
        Lifetime::Divergent { at_horizon } => json!({ "kind": "divergent", "at_horizon": at_horizon }),
        Lifetime::Undetermined { at_horizon } => json!({ "kind": "undetermined", "at_horizon": at_horizon }),
    }
}
