//! MS-plot table output: `id,mo,vo,label,approximate`.

use std::io::Write;

use fdastream_core::{Error, MsSnapshot, Result};

/// Write `snapshot` as CSV. Numbers use the shortest representation that
/// parses back to the same `f64`.
pub fn write_msplot_csv<W: Write>(snapshot: &MsSnapshot, mut out: W) -> Result<()> {
    writeln!(out, "id,mo,vo,label,approximate")?;
    for p in &snapshot.points {
        writeln!(out, "{},{},{},{},{}", csv_field(&p.id), p.mo, p.vo, p.label.as_str(), p.approximate)?;
    }
    out.flush()?;
    Ok(())
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// One parsed row of an MS-plot CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct MsRow {
    pub id: String,
    pub mo: f64,
    pub vo: f64,
    pub label: String,
    pub approximate: bool,
}

/// Parse CSV produced by [`write_msplot_csv`].
pub fn read_msplot_csv(text: &str) -> Result<Vec<MsRow>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, "id,mo,vo,label,approximate")) => {}
        _ => return Err(Error::Parse { line: 1, message: "expected header id,mo,vo,label,approximate".into() }),
    }
    lines
        .filter(|(_, l)| !l.is_empty())
        .map(|(i, line)| {
            let err = |m: &str| Error::Parse { line: i + 1, message: m.to_string() };
            // ids may be quoted; the numeric tail never contains commas
            let mut tail = line.rsplitn(5, ',');
            let approximate = tail.next().ok_or_else(|| err("missing approximate"))?;
            let label = tail.next().ok_or_else(|| err("missing label"))?;
            let vo = tail.next().ok_or_else(|| err("missing vo"))?;
            let mo = tail.next().ok_or_else(|| err("missing mo"))?;
            let id = tail.next().ok_or_else(|| err("missing id"))?;
            let id = match id.strip_prefix('"').and_then(|s| s.strip_suffix('"')) {
                Some(q) => q.replace("\"\"", "\""),
                None => id.to_string(),
            };
            Ok(MsRow {
                id,
                mo: mo.parse().map_err(|_| err("bad mo"))?,
                vo: vo.parse().map_err(|_| err("bad vo"))?,
                label: label.to_string(),
                approximate: approximate.parse().map_err(|_| err("bad approximate flag"))?,
            })
        })
        .collect()
}
