//! Static MS-plot scatter as SVG.

use std::fmt::Write;

use fdastream_core::engine::Label;
use fdastream_core::{Error, MsSnapshot, Result};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const MARGIN: f64 = 56.0;
const CENTRAL: &str = "#1b9e9e";
const OUTLYING: &str = "#e7679b";

/// Render MO (x) against VO (y). Output depends only on the snapshot.
pub fn msplot_svg(snapshot: &MsSnapshot) -> Result<String> {
    if snapshot.points.is_empty() {
        return Err(Error::InvalidOperation("nothing to plot: snapshot has no series".into()));
    }
    let (x0, x1) = padded_range(snapshot.points.iter().map(|p| p.mo));
    let (y0, y1) = padded_range(snapshot.points.iter().map(|p| p.vo));
    let sx = |x: f64| MARGIN + (x - x0) / (x1 - x0) * (WIDTH - 2.0 * MARGIN);
    let sy = |y: f64| HEIGHT - MARGIN - (y - y0) / (y1 - y0) * (HEIGHT - 2.0 * MARGIN);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let (bx, by) = (MARGIN, HEIGHT - MARGIN);
    let _ = writeln!(
        s,
        r#"<path d="M{bx} {MARGIN} L{bx} {by} L{} {by}" stroke="black" fill="none"/>"#,
        WIDTH - MARGIN
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle" font-family="sans-serif" font-size="14">MO</text>"#,
        WIDTH / 2.0,
        HEIGHT - 16.0
    );
    let _ = writeln!(
        s,
        r#"<text x="18" y="{}" text-anchor="middle" font-family="sans-serif" font-size="14" transform="rotate(-90 18 {})">VO</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0
    );
    for (v, x) in [(x0, sx(x0)), (x1, sx(x1))] {
        let _ = writeln!(s, r#"<text x="{x:.2}" y="{}" text-anchor="middle" font-family="sans-serif" font-size="10">{v:.3}</text>"#, by + 14.0);
    }
    for (v, y) in [(y0, sy(y0)), (y1, sy(y1))] {
        let _ = writeln!(s, r#"<text x="{}" y="{y:.2}" text-anchor="end" font-family="sans-serif" font-size="10">{v:.3}</text>"#, bx - 4.0);
    }
    for p in &snapshot.points {
        let fill = match p.label {
            Label::Central => CENTRAL,
            Label::Outlying => OUTLYING,
        };
        let _ = writeln!(
            s,
            r#"<circle cx="{:.2}" cy="{:.2}" r="4" fill="{fill}"><title>{}</title></circle>"#,
            sx(p.mo),
            sy(p.vo),
            escape(&p.id)
        );
    }
    s.push_str("</svg>\n");
    Ok(s)
}

fn padded_range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    let pad = if hi > lo { 0.05 * (hi - lo) } else { 1.0 };
    (lo - pad, hi + pad)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
