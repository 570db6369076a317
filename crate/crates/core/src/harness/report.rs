//! JSON and CSV report emission.

use std::fmt::Write as _;
use std::path::Path;

use super::runner::ResultTable;
use crate::budget::format_epsilon;
use crate::error::{Error, Result};

pub const CSV_HEADER: &str = "method,eps,seed,fid,precision,recall,ndb_count,ndb_fraction,superclass_mass,wall_ms";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    /// Full nested table including per-bin NDB detail and PRD curves.
    Json,
    /// One line per row; missing values are empty fields.
    Csv,
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn to_csv(table: &ResultTable) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in &table.rows {
        let m = r.metrics.as_ref();
        let eps = r.eps.map(format_epsilon).unwrap_or_default();
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            r.method,
            eps,
            r.seed,
            opt(m.and_then(|m| m.fid)),
            opt(m.and_then(|m| m.precision)),
            opt(m.and_then(|m| m.recall)),
            opt(m.and_then(|m| m.ndb_count)),
            opt(m.and_then(|m| m.ndb_fraction)),
            opt(r.superclass_mass),
            r.wall_ms
        )
        .expect("writing to a String");
    }
    out
}

pub fn emit_report(table: &ResultTable, path: impl AsRef<Path>, format: ReportFormat) -> Result<()> {
    let path = path.as_ref();
    let text = match format {
        ReportFormat::Csv => to_csv(table),
        ReportFormat::Json => serde_json::to_string_pretty(table)?,
    };
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}
