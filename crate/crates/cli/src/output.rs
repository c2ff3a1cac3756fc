use std::fs::File;
use std::io::{self, Write};
use std::path::Path;

use overgroup::experiments::SCHEMA_VERSION;
use serde::Serialize;

use crate::CliError;

pub fn invocation() -> String {
    std::env::args().collect::<Vec<_>>().join(" ")
}

fn sink(out: Option<&Path>) -> Result<Box<dyn Write>, CliError> {
    Ok(match out {
        Some(p) => Box::new(File::create(p).map_err(|e| CliError::io(p, e))?),
        None => Box::new(io::stdout().lock()),
    })
}

/// Comment line with schema version and invocation, then a header row and
/// one row per record.
pub fn write_csv<R: Serialize>(out: Option<&Path>, experiment: &str, rows: &[R]) -> Result<(), CliError> {
    let mut w = sink(out)?;
    writeln!(w, "# overgroup {experiment} schema_version={SCHEMA_VERSION} invocation: {}", invocation())?;
    let mut csv = csv::Writer::from_writer(w);
    for r in rows {
        csv.serialize(r)?;
    }
    csv.flush()?;
    Ok(())
}

pub fn write_json<T: Serialize>(out: Option<&Path>, value: &T) -> Result<(), CliError> {
    let mut w = sink(out)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    Ok(())
}
