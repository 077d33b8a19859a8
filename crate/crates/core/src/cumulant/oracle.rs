//! Oracle tables for reuse by experiments and external comparison.

use std::io::Write;

use serde::Serialize;

use crate::error::Result;

/// One prediction: time, the input it was computed for, and the value.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OracleRow {
    pub t: f64,
    pub input: String,
    pub prediction: f64,
}

/// Writes `t,input,prediction` rows preceded by a `# config_hash=` line.
pub fn write_oracle_csv<W: Write>(mut w: W, config_hash: &str, rows: &[OracleRow]) -> Result<()> {
    writeln!(w, "# config_hash={config_hash}")?;
    writeln!(w, "t,input,prediction")?;
    for r in rows {
        writeln!(w, "{},{},{}", r.t, r.input, r.prediction)?;
    }
    Ok(())
}
