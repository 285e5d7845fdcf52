use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::args::{Format, OutputArgs};
use crate::failure::Failure;

/// Version of every JSON document the CLI writes.
pub const SCHEMA_VERSION: u32 = 1;

/// JSON document with the common header.
#[derive(Serialize)]
pub struct Envelope<'a, B: Serialize> {
    pub schema_version: u32,
    pub command: &'a str,
    #[serde(flatten)]
    pub body: B,
}

/// Rows of a CSV table.
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Self { header: header.into_iter().map(Into::into).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    fn write<W: Write>(&self, w: W) -> Result<(), Failure> {
        let mut w = csv::Writer::from_writer(w);
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Formats a float for CSV; missing values become empty cells.
pub fn cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn resolve_format(out: &OutputArgs, default: Format) -> Format {
    out.format.unwrap_or_else(|| match out.output.as_deref().and_then(Path::extension) {
        Some(ext) if ext.eq_ignore_ascii_case("json") => Format::Json,
        Some(ext) if ext.eq_ignore_ascii_case("csv") => Format::Csv,
        _ => default,
    })
}

fn sink(out: &OutputArgs) -> Result<Box<dyn Write>, Failure> {
    Ok(match &out.output {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

pub fn emit_json<B: Serialize>(out: &OutputArgs, command: &str, body: B) -> Result<(), Failure> {
    let mut w = sink(out)?;
    let doc = Envelope { schema_version: SCHEMA_VERSION, command, body };
    serde_json::to_writer_pretty(&mut w, &doc)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

pub fn emit_table(out: &OutputArgs, table: &Table) -> Result<(), Failure> {
    let mut w = sink(out)?;
    table.write(&mut w)?;
    w.flush()?;
    Ok(())
}

/// Writes `body` as JSON or `table` as CSV according to the resolved format.
pub fn emit<B: Serialize>(
    out: &OutputArgs,
    default: Format,
    command: &str,
    body: B,
    table: impl FnOnce() -> Table,
) -> Result<(), Failure> {
    match resolve_format(out, default) {
        Format::Json => emit_json(out, command, body),
        Format::Csv => emit_table(out, &table()),
    }
}
