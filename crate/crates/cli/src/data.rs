//! Micro-data CSV: a header row naming `d`, `z` and optionally `y`, then one
//! integer-coded observation per row.

use std::io::{Read, Write};

use encourage_core::simulate::{MicroData, Observation};

use crate::CliError;

/// Reads observations; `y` is kept only when `with_outcome` is set.
/// Row numbers in errors count data rows from 1.
pub fn read_micro_data<R: Read>(reader: R, with_outcome: bool) -> Result<MicroData, CliError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| CliError::Input(format!("cannot read CSV header: {e}")))?
        .clone();
    let column = |name: &str| headers.iter().position(|h| h == name);
    let d_col = column("d").ok_or_else(|| CliError::Input("CSV header has no \"d\" column".into()))?;
    let z_col = column("z").ok_or_else(|| CliError::Input("CSV header has no \"z\" column".into()))?;
    let y_col = if with_outcome {
        Some(column("y").ok_or_else(|| CliError::Input("CSV header has no \"y\" column".into()))?)
    } else {
        None
    };
    let mut rows = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| CliError::Input(format!("row {row}: {e}")))?;
        let field = |col: usize, name: &str| -> Result<&str, CliError> {
            record
                .get(col)
                .ok_or_else(|| CliError::Input(format!("row {row}: missing {name}")))
        };
        let d = field(d_col, "d")?
            .parse::<usize>()
            .map_err(|_| CliError::Input(format!("row {row}: d must be a nonnegative integer")))?;
        let z = field(z_col, "z")?
            .parse::<usize>()
            .map_err(|_| CliError::Input(format!("row {row}: z must be a nonnegative integer")))?;
        let y = match y_col {
            Some(col) => Some(
                field(col, "y")?
                    .parse::<i64>()
                    .map_err(|_| CliError::Input(format!("row {row}: y must be an integer")))?,
            ),
            None => None,
        };
        rows.push(Observation { y, d, z });
    }
    Ok(MicroData::external(rows))
}

/// Writes `y,d,z` when the data carry outcomes and `d,z` otherwise.
pub fn write_micro_data<W: Write>(writer: W, data: &MicroData) -> Result<(), CliError> {
    let io = |e: csv::Error| CliError::Input(format!("cannot write CSV: {e}"));
    let mut w = csv::WriterBuilder::new().from_writer(writer);
    let with_y = data.has_outcome();
    if with_y {
        w.write_record(["y", "d", "z"]).map_err(io)?;
    } else {
        w.write_record(["d", "z"]).map_err(io)?;
    }
    for r in &data.rows {
        match (with_y, r.y) {
            (true, Some(y)) => w
                .write_record([y.to_string(), r.d.to_string(), r.z.to_string()])
                .map_err(io)?,
            _ => w.write_record([r.d.to_string(), r.z.to_string()]).map_err(io)?,
        }
    }
    w.flush().map_err(|e| CliError::Input(format!("cannot write CSV: {e}")))?;
    Ok(())
}
