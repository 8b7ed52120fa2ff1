//! CSV and JSON writers.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};

pub const SCATTER_HEADER: [&str; 5] = ["ggm", "tangle", "rank", "outcome", "sample_index"];

/// Formats `x` with 12 significant digits, in the style of C's `%.12g`.
pub fn fmt_sig(x: f64) -> String {
    const DIGITS: i32 = 12;
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let sci = format!("{:.*e}", (DIGITS - 1) as usize, x);
    let (mantissa, exp) = sci.split_once('e').expect("scientific notation");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..DIGITS).contains(&exp) {
        let m = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (DIGITS - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// A single CSV cell.
#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(u64),
    Text(String),
    Empty,
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Num(x) => fmt_sig(*x),
            Cell::Int(i) => i.to_string(),
            Cell::Text(t) => t.clone(),
            Cell::Empty => String::new(),
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Num(x)
    }
}

impl From<usize> for Cell {
    fn from(i: usize) -> Self {
        Cell::Int(i as u64)
    }
}

impl From<&str> for Cell {
    fn from(t: &str) -> Self {
        Cell::Text(t.into())
    }
}

impl From<Option<f64>> for Cell {
    fn from(x: Option<f64>) -> Self {
        x.map_or(Cell::Empty, Cell::Num)
    }
}

impl From<Option<usize>> for Cell {
    fn from(x: Option<usize>) -> Self {
        x.map_or(Cell::Empty, |i| Cell::Int(i as u64))
    }
}

/// An in-memory table that is written in one go.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self { header: header.iter().map(|h| h.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header).expect("in-memory write");
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::render)).expect("in-memory write");
        }
        w.into_inner().expect("in-memory flush")
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()).map_err(|e| LabError::io(path, e))
    }
}

/// One optimized sample in the `(GGM, tangle)` plane.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScatterRow {
    pub ggm: f64,
    pub tangle: f64,
    pub rank: usize,
    /// 1-based outcome label.
    pub outcome: usize,
    pub sample_index: usize,
}

pub fn scatter_table(rows: &[ScatterRow]) -> Table {
    let mut t = Table::new(&SCATTER_HEADER);
    for r in rows {
        t.push(vec![r.ggm.into(), r.tangle.into(), r.rank.into(), r.outcome.into(), r.sample_index.into()]);
    }
    t
}

/// Writes the scatter CSV (one row per sample and rank).
pub fn emit_scatter(path: &Path, rows: &[ScatterRow]) -> Result<()> {
    scatter_table(rows).write(path)
}

/// Equal-width histogram over `[lo, hi]`; values outside are clamped into the end bins.
#[derive(Clone, Debug, PartialEq)]
pub struct Histogram {
    pub series: String,
    pub lo: f64,
    pub hi: f64,
    pub counts: Vec<usize>,
}

impl Histogram {
    pub fn build(series: &str, values: &[f64], lo: f64, hi: f64, bins: usize) -> Self {
        let mut counts = vec![0usize; bins];
        let width = (hi - lo) / bins as f64;
        for &v in values.iter().filter(|v| v.is_finite()) {
            let b = ((v - lo) / width).floor();
            let b = if b < 0.0 { 0 } else { (b as usize).min(bins - 1) };
            counts[b] += 1;
        }
        Self { series: series.into(), lo, hi, counts }
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }
}

/// Long-format histogram CSV with normalized frequencies.
pub fn histogram_table(hists: &[Histogram]) -> Table {
    let mut t = Table::new(&["series", "bin_lo", "bin_hi", "count", "frequency"]);
    for h in hists {
        let width = (h.hi - h.lo) / h.counts.len() as f64;
        let total = h.total().max(1) as f64;
        for (i, &c) in h.counts.iter().enumerate() {
            let lo = h.lo + width * i as f64;
            t.push(vec![h.series.as_str().into(), lo.into(), (lo + width).into(), c.into(), (c as f64 / total).into()]);
        }
    }
    t
}

/// Creates the output directory if needed.
pub fn prepare_dir(dir: &Path) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|e| LabError::io(dir, e))?;
    Ok(dir.to_path_buf())
}

pub fn write_json<S: Serialize>(path: &Path, value: &S) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("serializable summary");
    text.push('\n');
    std::fs::write(path, text).map_err(|e| LabError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twelve_significant_digits() {
        assert_eq!(fmt_sig(0.5), "0.5");
        assert_eq!(fmt_sig(1.0 / 3.0), "0.333333333333");
        assert_eq!(fmt_sig(2.0 / 3.0 * 1e-7), "6.66666666667e-08");
        assert_eq!(fmt_sig(123456789012345.0), "1.23456789012e+14");
        assert_eq!(fmt_sig(-1.5e-3), "-0.0015");
        assert_eq!(fmt_sig(100.0), "100");
        assert_eq!(fmt_sig(0.0), "0");
        assert_eq!(fmt_sig(-0.0), "-0");
        assert_eq!(fmt_sig(f64::NAN), "nan");
        assert_eq!(fmt_sig(999999999999.5), "1e+12");
    }

    #[test]
    fn formatted_values_round_trip_to_twelve_digits() {
        for x in [0.123456789012345, -9.87654321e-12, 4.2e15, 0.999999999999999] {
            let y: f64 = fmt_sig(x).parse().unwrap();
            assert!(((x - y) / x).abs() < 1e-11, "{x} vs {y}");
        }
    }

    #[test]
    fn scatter_csv_layout() {
        let rows = [
            ScatterRow { ggm: 0.5, tangle: 1.0, rank: 2, outcome: 1, sample_index: 0 },
            ScatterRow { ggm: 0.25, tangle: -1e-9, rank: 4, outcome: 1, sample_index: 1 },
        ];
        let text = String::from_utf8(scatter_table(&rows).to_bytes()).unwrap();
        assert_eq!(text, "ggm,tangle,rank,outcome,sample_index\n0.5,1,2,1,0\n0.25,-1e-09,4,1,1\n");
    }

    #[test]
    fn histogram_counts_everything_once() {
        let h = Histogram::build("x", &[0.0, 0.1, 0.5, 0.99, 1.0, 2.0, -1.0, f64::NAN], 0.0, 1.0, 4);
        assert_eq!(h.counts, vec![3, 0, 1, 3]);
        let t = histogram_table(&[h]);
        assert_eq!(t.rows.len(), 4);
        assert_eq!(t.rows[0][4], Cell::Num(3.0 / 7.0));
    }
}
