use std::fs::File;
use std::io::Write;
use std::path::Path;

use super::{DataError, LabeledWindow, Result, SignalRecord};
use crate::tensor::Tensor;

/// Which columns of a headered CSV to read, and how to window them.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CsvSchema {
    pub channels: Vec<String>,
    pub label: String,
    pub window: usize,
    pub stride: usize,
}

fn io_err(path: &Path, source: std::io::Error) -> DataError {
    DataError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Read one row per time step into a `C x T` record.
pub fn read_record(path: &Path, schema: &CsvSchema) -> Result<SignalRecord> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
    let headers = reader.headers()?.clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| DataError::Schema(format!("missing column '{name}'")))
    };
    let channel_cols = schema
        .channels
        .iter()
        .map(|c| find(c))
        .collect::<Result<Vec<_>>>()?;
    let label_col = find(&schema.label)?;

    let mut columns: Vec<Vec<f32>> = vec![Vec::new(); channel_cols.len()];
    let mut labels = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let row = row?;
        // header is line 1
        let line = i + 2;
        for (col, &idx) in columns.iter_mut().zip(&channel_cols) {
            let cell = row.get(idx).unwrap_or("").trim();
            let v: f32 = cell.parse().map_err(|_| DataError::Parse {
                line,
                column: headers[idx].to_string(),
                value: cell.to_string(),
            })?;
            col.push(v);
        }
        let cell = row.get(label_col).unwrap_or("").trim();
        let label: usize = cell.parse().map_err(|_| DataError::Parse {
            line,
            column: schema.label.clone(),
            value: cell.to_string(),
        })?;
        labels.push(label);
    }
    let samples = Tensor::new(vec![columns.len(), labels.len()], columns.concat())
        .expect("column lengths agree");
    SignalRecord::new(samples, labels)
}

/// Windows in file order, labelled by the median of their samples' labels.
pub fn load_csv(path: &Path, schema: &CsvSchema) -> Result<Vec<LabeledWindow>> {
    let record = read_record(path, schema)?;
    Ok(record
        .windows(schema.window, schema.stride)?
        .into_iter()
        .map(|(w, _)| w)
        .collect())
}

/// Write windows back to back, one row per time step, every row carrying
/// its window's label. Reading with `stride == window` recovers them.
pub fn write_windows_csv(path: &Path, channel_names: &[String], windows: &[LabeledWindow]) -> Result<()> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut out = std::io::BufWriter::new(file);
    let mut header = channel_names.join(",");
    header.push_str(",label\n");
    out.write_all(header.as_bytes()).map_err(|e| io_err(path, e))?;
    let mut line = String::new();
    for w in windows {
        if w.channels() != channel_names.len() {
            return Err(DataError::Contract(format!(
                "window has {} channels, header has {}",
                w.channels(),
                channel_names.len()
            )));
        }
        for t in 0..w.len() {
            line.clear();
            for c in 0..w.channels() {
                // shortest round-trip representation of the f32 value
                line.push_str(&format!("{},", w.data.row(c)[t]));
            }
            line.push_str(&w.label.to_string());
            line.push('\n');
            out.write_all(line.as_bytes()).map_err(|e| io_err(path, e))?;
        }
    }
    out.flush().map_err(|e| io_err(path, e))
}
