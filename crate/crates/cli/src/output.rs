//! Rendering of verb results as JSON, CSV or aligned text.

use std::fmt::Write as _;

use clap::ValueEnum;
use serde_json::Value;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Pretty,
}

#[derive(Clone, Debug)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
    Bool(bool),
    Empty,
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Num(x)
    }
}

impl From<usize> for Cell {
    fn from(x: usize) -> Self {
        Cell::Int(x as i64)
    }
}

impl From<u64> for Cell {
    fn from(x: u64) -> Self {
        Cell::Int(x as i64)
    }
}

impl From<i64> for Cell {
    fn from(x: i64) -> Self {
        Cell::Int(x)
    }
}

impl From<bool> for Cell {
    fn from(x: bool) -> Self {
        Cell::Bool(x)
    }
}

impl From<&str> for Cell {
    fn from(x: &str) -> Self {
        Cell::Text(x.to_string())
    }
}

impl From<String> for Cell {
    fn from(x: String) -> Self {
        Cell::Text(x)
    }
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Num(x) => fmt_sig(*x, 6),
            Cell::Int(i) => i.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Bool(b) => b.to_string(),
            Cell::Empty => String::new(),
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Table { columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }
}

/// A verb's result: the full JSON document, a flat table for CSV, and
/// headline lines printed above the table in pretty mode.
pub struct Output {
    pub json: Value,
    pub table: Table,
    pub headline: Vec<String>,
}

impl Output {
    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Json => {
                let mut s = serde_json::to_string_pretty(&self.json).expect("JSON values serialise");
                s.push('\n');
                s
            }
            Format::Csv => render_csv(&self.table),
            Format::Pretty => {
                let mut s = String::new();
                for h in &self.headline {
                    s.push_str(h);
                    s.push('\n');
                }
                if !self.table.rows.is_empty() {
                    if !self.headline.is_empty() {
                        s.push('\n');
                    }
                    s.push_str(&render_aligned(&self.table));
                }
                s
            }
        }
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn render_csv(t: &Table) -> String {
    let mut s = String::new();
    let line = |cells: Vec<String>| cells.iter().map(|c| csv_field(c)).collect::<Vec<_>>().join(",");
    s.push_str(&line(t.columns.clone()));
    s.push('\n');
    for row in &t.rows {
        s.push_str(&line(row.iter().map(Cell::render).collect()));
        s.push('\n');
    }
    s
}

fn render_aligned(t: &Table) -> String {
    let cells: Vec<Vec<String>> = t.rows.iter().map(|r| r.iter().map(Cell::render).collect()).collect();
    let widths: Vec<usize> = (0..t.columns.len())
        .map(|j| cells.iter().map(|r| r[j].chars().count()).chain([t.columns[j].chars().count()]).max().unwrap_or(0))
        .collect();
    let mut s = String::new();
    let mut line = |fields: &[String]| {
        let parts: Vec<String> = fields.iter().zip(&widths).map(|(f, w)| format!("{f:>w$}")).collect();
        let _ = writeln!(s, "{}", parts.join("  ").trim_end());
    };
    line(&t.columns);
    for r in &cells {
        line(r);
    }
    s
}

/// `printf("%.{digits}g")`: shortest of fixed and scientific notation with
/// `digits` significant figures, trailing zeros removed.
pub fn fmt_sig(x: f64, digits: usize) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    if x == 0.0 {
        return "0".into();
    }
    let digits = digits.max(1);
    // Round first so that e.g. 9.999995 moves to the next decade.
    let sci = format!("{:.*e}", digits - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= digits as i32 {
        let m = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
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
