//! CSV and SVG exports of the enumeration path.
//!
//! The SVG draws the path as a polyline with columns running horizontally
//! and the depth i increasing downward, with tick marks at the turn depths
//! b_k and 2b_k.

use std::fmt::Write as _;

use num_traits::ToPrimitive;

use crate::error::{Error, Result};
use crate::ordering::{path_prefix, BList};

/// One `rank,i,j` line per path cell.
pub fn path_csv(b: &BList, count: usize) -> Result<String> {
    let mut out = String::from("rank,i,j\n");
    for (rank, c) in path_prefix(count, b)?.iter().enumerate() {
        let _ = writeln!(out, "{rank},{},{}", c.i, c.j);
    }
    Ok(out)
}

const CELL: u64 = 14;
const MARGIN: u64 = 40;

/// The path polyline as a standalone SVG document.
pub fn figure_svg(b: &BList, count: usize) -> Result<String> {
    let path = path_prefix(count, b)?;
    let mut max_i = 0u64;
    let mut max_j = 0u64;
    let mut pts = Vec::with_capacity(path.len());
    for c in &path {
        let i = c.i.to_u64().ok_or_else(|| {
            Error::InvalidParameter("figure export needs desk-scale coordinates".into())
        })?;
        let j = c.j.to_u64().unwrap();
        max_i = max_i.max(i);
        max_j = max_j.max(j);
        pts.push((MARGIN + j * CELL, MARGIN + i * CELL));
    }
    let width = MARGIN * 2 + (max_j + 1) * CELL;
    let height = MARGIN * 2 + (max_i + 1) * CELL;

    let mut out = String::new();
    let _ = writeln!(out, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">"#
    );
    let _ = writeln!(out, r#"  <rect width="{width}" height="{height}" fill="white"/>"#);
    // Depth ticks at each turn parameter within view.
    for (idx, bk) in b.values().iter().enumerate() {
        let k = idx + 1;
        for (mult, label) in [(1u64, format!("b{k}")), (2, format!("2b{k}"))] {
            let Some(depth) = bk.to_u64().and_then(|v| v.checked_mul(mult)) else {
                continue;
            };
            if depth > max_i {
                continue;
            }
            let y = MARGIN + depth * CELL;
            let _ = writeln!(
                out,
                r##"  <line x1="{}" y1="{y}" x2="{}" y2="{y}" stroke="#bbbbbb" stroke-dasharray="4 3"/>"##,
                MARGIN / 2,
                width - MARGIN / 2
            );
            let _ = writeln!(
                out,
                r##"  <text x="2" y="{}" font-size="11" fill="#555555">{label}</text>"##,
                y + 4
            );
        }
    }
    let mut points = String::new();
    for (x, y) in &pts {
        let _ = write!(points, "{x},{y} ");
    }
    let _ = writeln!(
        out,
        r#"  <polyline fill="none" stroke="red" stroke-width="1.5" points="{}"/>"#,
        points.trim_end()
    );
    // Grid dots on the visited cells.
    for (x, y) in &pts {
        let _ = writeln!(out, r#"  <circle cx="{x}" cy="{y}" r="1.6" fill="black"/>"#);
    }
    let _ = writeln!(out, "</svg>");
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_lists_ranks_in_order() {
        let b = BList::closed_u64(&[6, 30]).unwrap();
        let csv = path_csv(&b, 10).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "rank,i,j");
        assert_eq!(lines[1], "0,0,0");
        assert_eq!(lines[8], "7,6,1");
        assert_eq!(lines.len(), 11);
    }

    #[test]
    fn svg_contains_turns_and_ticks() {
        let b = BList::closed_u64(&[6, 30]).unwrap();
        let svg = figure_svg(&b, 200).unwrap();
        assert!(svg.starts_with("<?xml"));
        assert!(svg.contains("<polyline"));
        assert!(svg.contains(">b1<"));
        assert!(svg.contains(">2b1<"));
        // Deterministic output.
        assert_eq!(svg, figure_svg(&b, 200).unwrap());
        // The first turn: the polyline passes through the cell of (6,0)
        // and the adjacent (6,1).
        let x0 = 40;
        let y6 = 40 + 6 * 14;
        assert!(svg.contains(&format!("{x0},{y6}")));
        assert!(svg.contains(&format!("{},{y6}", 40 + 14)));
    }
}
