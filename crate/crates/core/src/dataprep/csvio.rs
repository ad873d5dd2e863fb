use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::log::{PrepLog, PrepStep};
use super::{Dataset, PrepError};

/// Which column holds the outcome, and the labels it may take.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CsvSchema {
    pub chosen_column: String,
    pub alternatives: Vec<String>,
}

/// Reads comma-separated text with a header row. Rows with an empty outcome
/// cell are dropped and counted; every other cell must parse as a number.
pub fn parse_dataset(text: &str, schema: &CsvSchema) -> Result<Dataset, PrepError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| PrepError::Csv {
            line: 1,
            message: e.to_string(),
        })?
        .clone();
    if headers.is_empty() || headers.iter().all(|h| h.trim().is_empty()) {
        return Err(PrepError::MissingHeader);
    }
    let names: Vec<String> = headers.iter().map(|h| h.trim().to_string()).collect();
    let chosen_position = names
        .iter()
        .position(|h| *h == schema.chosen_column)
        .ok_or_else(|| PrepError::MissingChosenColumn(schema.chosen_column.clone()))?;

    let mut columns: IndexMap<String, Vec<f64>> = IndexMap::new();
    for (i, name) in names.iter().enumerate() {
        if i != chosen_position && columns.insert(name.clone(), Vec::new()).is_some() {
            return Err(PrepError::DuplicateColumn(name.clone()));
        }
    }

    let mut chosen = Vec::new();
    let mut rows_read = 0usize;
    let mut dropped = 0usize;
    for record in reader.records() {
        let record = record.map_err(|e| PrepError::Csv {
            line: e.position().map(|p| p.line()).unwrap_or(0),
            message: e.to_string(),
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if record.len() != names.len() {
            return Err(PrepError::Ragged {
                line,
                expected: names.len(),
                found: record.len(),
            });
        }
        rows_read += 1;
        let label = record[chosen_position].trim();
        if label.is_empty() {
            dropped += 1;
            continue;
        }
        let alt = schema
            .alternatives
            .iter()
            .position(|a| a == label)
            .ok_or_else(|| PrepError::UnknownAlternative {
                line,
                column: schema.chosen_column.clone(),
                label: label.to_string(),
            })?;
        let mut values = Vec::with_capacity(columns.len());
        for (i, field) in record.iter().enumerate() {
            if i == chosen_position {
                continue;
            }
            let v: f64 = field.trim().parse().map_err(|_| PrepError::NotNumeric {
                line,
                column: names[i].clone(),
                value: field.to_string(),
            })?;
            values.push(v);
        }
        for (col, v) in columns.values_mut().zip(values) {
            col.push(v);
        }
        chosen.push(alt);
    }

    let mut provenance = PrepLog::default();
    provenance.push(PrepStep::Parse {
        schema: schema.clone(),
        rows_read,
        rows_dropped: dropped,
    });
    Ok(Dataset {
        columns,
        alternatives: schema.alternatives.clone(),
        chosen,
        chosen_column: schema.chosen_column.clone(),
        chosen_position,
        provenance,
    })
}

/// Comma-separated text with a header row; numbers use the shortest exact decimal form.
pub fn write_dataset(data: &Dataset) -> String {
    let mut writer = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    let mut header: Vec<&str> = data.columns.keys().map(String::as_str).collect();
    let pos = data.chosen_position.min(header.len());
    header.insert(pos, &data.chosen_column);
    writer.write_record(&header).expect("in-memory write");
    let cols: Vec<&Vec<f64>> = data.columns.values().collect();
    let mut fields: Vec<String> = Vec::with_capacity(header.len());
    for row in 0..data.rows() {
        fields.clear();
        fields.extend(cols.iter().map(|c| format_number(c[row])));
        fields.insert(pos, data.alternatives[data.chosen[row]].clone());
        writer.write_record(&fields).expect("in-memory write");
    }
    String::from_utf8(writer.into_inner().expect("in-memory flush")).expect("utf-8 input")
}

fn format_number(x: f64) -> String {
    if x == 0.0 {
        // Normalize -0 so replays and re-exports agree byte for byte.
        "0".to_string()
    } else {
        format!("{x}")
    }
}
