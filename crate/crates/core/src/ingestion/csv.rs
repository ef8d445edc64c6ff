//! Wide CSV panels.
//!
//! UTF-8, one header row: `ts,<id_1>,...,<id_N>`; then one row per time point
//! with the timestamp followed by one reading per series. Blank cells are
//! errors; nothing is imputed.

use std::io::{Read, Write};
use std::path::Path;

use crate::engine::RawPanel;
use crate::error::{Error, Result};

pub fn parse_wide_csv(path: impl AsRef<Path>) -> Result<RawPanel> {
    let file = std::fs::File::open(path.as_ref())
        .map_err(|e| Error::Io(format!("{}: {e}", path.as_ref().display())))?;
    read_wide_csv(file)
}

pub fn read_wide_csv<R: Read>(reader: R) -> Result<RawPanel> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).flexible(true).from_reader(reader);
    let mut records = rdr.records();
    let header = match records.next() {
        Some(r) => r.map_err(|e| csv_err(1, e))?,
        None => return Err(Error::Parse { line: 1, message: "empty file".into() }),
    };
    if header.len() < 2 {
        return Err(Error::Parse { line: 1, message: "header needs a timestamp column and at least one series".into() });
    }
    if header.get(0).map(str::trim) != Some("ts") {
        return Err(Error::Parse { line: 1, message: "first header cell must be \"ts\"".into() });
    }
    let ids: Vec<String> = header.iter().skip(1).map(|s| s.trim().to_string()).collect();
    let mut seen = std::collections::HashSet::new();
    for id in &ids {
        if id.is_empty() {
            return Err(Error::Parse { line: 1, message: "empty series id".into() });
        }
        if !seen.insert(id) {
            return Err(Error::Parse { line: 1, message: format!("duplicate series id '{id}'") });
        }
    }
    let mut rows = vec![Vec::new(); ids.len()];
    let mut ts = Vec::new();
    for (i, rec) in records.enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| csv_err(line, e))?;
        if rec.len() != ids.len() + 1 {
            return Err(Error::Parse {
                line,
                message: format!("expected {} cells, found {}", ids.len() + 1, rec.len()),
            });
        }
        let mut cells = rec.iter().enumerate().map(|(c, cell)| {
            let cell = cell.trim();
            if cell.is_empty() {
                return Err(Error::Parse { line, message: format!("blank cell in column {}", c + 1) });
            }
            cell.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::Parse { line, message: format!("non-numeric cell '{cell}' in column {}", c + 1) })
        });
        ts.push(cells.next().expect("row has a timestamp")?);
        for (row, cell) in rows.iter_mut().zip(cells) {
            row.push(cell?);
        }
    }
    if ts.is_empty() {
        return Err(Error::Parse { line: 2, message: "no data rows".into() });
    }
    RawPanel::new(ids, rows, ts)
}

fn csv_err(line: usize, e: csv::Error) -> Error {
    Error::Parse { line, message: e.to_string() }
}

/// Write `panel` in the wide layout. Numbers use the shortest round-trip form.
pub fn write_wide_csv<W: Write>(panel: &RawPanel, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["ts".to_string()];
    header.extend(panel.series_ids().iter().cloned());
    w.write_record(&header).map_err(|e| Error::Io(e.to_string()))?;
    for (t, ts) in panel.timestamps().iter().enumerate() {
        let mut rec = vec![ts.to_string()];
        rec.extend(panel.rows().iter().map(|r| r[t].to_string()));
        w.write_record(&rec).map_err(|e| Error::Io(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}
