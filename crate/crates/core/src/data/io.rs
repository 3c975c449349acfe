use std::collections::HashMap;
use std::fs::File;
use std::path::Path;

use super::{ColumnData, ColumnKind, Schema, Table};
use crate::error::{Error, Result};

pub fn load_schema(path: impl AsRef<Path>) -> Result<Schema> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let schema: Schema = serde_json::from_reader(std::io::BufReader::new(file))?;
    schema.validate()?;
    Ok(schema)
}

pub fn save_schema(schema: &Schema, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    serde_json::to_writer_pretty(std::io::BufWriter::new(file), schema)?;
    Ok(())
}

/// Reads a CSV file using a schema manifest file.
pub fn load_csv(path: impl AsRef<Path>, schema_manifest: impl AsRef<Path>) -> Result<Table> {
    let schema = load_schema(schema_manifest)?;
    read_csv(path, &schema)
}

/// Reads a CSV file whose header names exactly the schema's columns (any order).
pub fn read_csv(path: impl AsRef<Path>, schema: &Schema) -> Result<Table> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
    let headers = reader.headers()?.clone();

    let positions: HashMap<&str, usize> = headers.iter().enumerate().map(|(i, h)| (h, i)).collect();
    if let Some(extra) = headers.iter().find(|h| schema.index_of(h).is_none()) {
        return Err(Error::Parse {
            path: path.into(),
            row: 0,
            column: extra.to_string(),
            message: "column not declared in schema".into(),
        });
    }
    let mut source = Vec::with_capacity(schema.len());
    for col in &schema.columns {
        let pos = positions
            .get(col.name.as_str())
            .ok_or_else(|| Error::MissingColumn { path: path.into(), column: col.name.clone() })?;
        source.push(*pos);
    }

    let lookups: Vec<Option<HashMap<&str, u32>>> = schema
        .columns
        .iter()
        .map(|c| match &c.kind {
            ColumnKind::Numerical => None,
            ColumnKind::Categorical { categories } => {
                Some(categories.iter().enumerate().map(|(i, s)| (s.as_str(), i as u32)).collect())
            }
        })
        .collect();
    let mut columns: Vec<ColumnData> = schema
        .columns
        .iter()
        .map(|c| match c.kind {
            ColumnKind::Numerical => ColumnData::Numerical(Vec::new()),
            ColumnKind::Categorical { .. } => ColumnData::Categorical(Vec::new()),
        })
        .collect();

    for (r, record) in reader.records().enumerate() {
        let row = r + 1;
        let record = record?;
        for (c, col) in schema.columns.iter().enumerate() {
            let parse_err = |message: String| Error::Parse {
                path: path.into(),
                row,
                column: col.name.clone(),
                message,
            };
            let raw = record
                .get(source[c])
                .ok_or_else(|| parse_err("row has too few fields".into()))?;
            if raw.is_empty() {
                return Err(parse_err("missing value".into()));
            }
            match (&mut columns[c], &lookups[c]) {
                (ColumnData::Numerical(v), None) => {
                    let x: f64 = raw
                        .trim()
                        .parse()
                        .map_err(|_| parse_err(format!("`{raw}` is not a number")))?;
                    if !x.is_finite() {
                        return Err(parse_err(format!("`{raw}` is not finite")));
                    }
                    v.push(x);
                }
                (ColumnData::Categorical(v), Some(map)) => {
                    let code = map
                        .get(raw)
                        .ok_or_else(|| parse_err(format!("unknown category `{raw}`")))?;
                    v.push(*code);
                }
                _ => unreachable!(),
            }
        }
    }
    Table::new(schema.clone(), columns)
}

/// Writes a table as CSV with a header row. Numbers use Rust's shortest
/// round-trip formatting, so `read_csv` restores them bit-exactly.
pub fn write_csv(table: &Table, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut writer = csv::Writer::from_writer(std::io::BufWriter::new(file));
    writer.write_record(table.schema().columns.iter().map(|c| c.name.as_str()))?;
    let mut record = Vec::with_capacity(table.n_cols());
    for row in 0..table.n_rows() {
        record.clear();
        for col in 0..table.n_cols() {
            record.push(table.cell_string(row, col));
        }
        writer.write_record(&record)?;
    }
    writer.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}
