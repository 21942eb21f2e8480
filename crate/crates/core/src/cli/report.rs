//! Self-describing JSON reports and CSV tables.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::config::RunConfig;
use crate::context::GridSummary;
use crate::error::Result;

/// Version string embedded in every report.
pub const VERSION: &str = concat!("sobolev-lab ", env!("CARGO_PKG_VERSION"));

#[derive(Serialize)]
pub struct Report<'a, T: Serialize> {
    pub version: &'static str,
    pub config: &'a RunConfig,
    pub grid: Option<GridSummary>,
    pub result: &'a T,
}

/// Writes `report` as pretty JSON to `dir/name` and returns the path.
pub fn write_json<T: Serialize>(dir: &Path, name: &str, config: &RunConfig, grid: Option<GridSummary>, result: &T) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(name);
    let mut text = serde_json::to_string_pretty(&Report { version: VERSION, config, grid, result })?;
    text.push('\n');
    std::fs::write(&path, text)?;
    Ok(path)
}

/// One CSV cell.
pub enum Cell {
    Num(f64),
    Int(usize),
    Text(String),
}

/// Seventeen significant digits in scientific notation.
pub fn format_number(x: f64) -> String {
    format!("{x:.16e}")
}

fn quote(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn csv_text(header: &[&str], rows: &[Vec<Cell>]) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        let cells: Vec<String> = row
            .iter()
            .map(|c| match c {
                Cell::Num(x) => format_number(*x),
                Cell::Int(i) => i.to_string(),
                Cell::Text(s) => quote(s),
            })
            .collect();
        let _ = writeln!(out, "{}", cells.join(","));
    }
    out
}

pub fn write_csv(dir: &Path, name: &str, header: &[&str], rows: &[Vec<Cell>]) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(name);
    std::fs::write(&path, csv_text(header, rows))?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_round_trip() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, f64::MIN_POSITIVE] {
            let s = format_number(x);
            assert_eq!(s.parse::<f64>().unwrap(), x, "{s}");
        }
        assert_eq!(format_number(1.0), "1.0000000000000000e0");
    }

    #[test]
    fn csv_quotes_text_with_commas() {
        let t = csv_text(&["label", "x"], &[vec![Cell::Text("a,b".into()), Cell::Num(2.0)], vec![Cell::Text("c".into()), Cell::Int(3)]]);
        assert_eq!(t, "label,x\n\"a,b\",2.0000000000000000e0\nc,3\n");
    }
}
