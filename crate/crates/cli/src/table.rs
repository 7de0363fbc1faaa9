//! Result tables and their CSV/JSON renderings.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Cell {
    Int(i64),
    Num(f64),
    Text(String),
    Empty,
}

impl From<f64> for Cell {
    /// Non-finite values become empty cells; JSON has no encoding for them.
    fn from(v: f64) -> Self {
        if v.is_finite() {
            Cell::Num(v)
        } else {
            Cell::Empty
        }
    }
}

impl From<i64> for Cell {
    fn from(v: i64) -> Self {
        Cell::Int(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    /// `1` for dimensionless numbers, `label` for text.
    pub unit: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultTable {
    pub name: String,
    pub columns: Vec<Column>,
    pub rows: Vec<Vec<Cell>>,
}

impl ResultTable {
    pub fn new(name: &str, columns: &[(&str, &str)]) -> Self {
        ResultTable {
            name: name.into(),
            columns: columns.iter().map(|(n, u)| Column { name: (*n).into(), unit: (*u).into() }).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "ragged row in table {}", self.name);
        self.rows.push(row);
    }

    /// One-row table from `(name, unit, value)` triples.
    pub fn single(name: &str, entries: Vec<(String, String, Cell)>) -> Self {
        let mut t = ResultTable { name: name.into(), columns: Vec::new(), rows: Vec::new() };
        let mut row = Vec::new();
        for (n, u, v) in entries {
            t.columns.push(Column { name: n, unit: u });
            row.push(v);
        }
        t.rows.push(row);
        t
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let header: Vec<String> = self.columns.iter().map(|c| quote(&format!("{}[{}]", c.name, c.unit))).collect();
        out.push_str(&header.join(","));
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(format_cell).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

/// Shortest representation that parses back to the same `f64`.
pub fn format_num(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 || (1e-4..1e15).contains(&a) {
        format!("{v:?}")
    } else {
        format!("{v:e}")
    }
}

fn format_cell(c: &Cell) -> String {
    match c {
        Cell::Int(i) => i.to_string(),
        Cell::Num(v) => format_num(*v),
        Cell::Text(s) => quote(s),
        Cell::Empty => String::new(),
    }
}

fn quote(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        let mut q = String::from("\"");
        for ch in s.chars() {
            if ch == '"' {
                q.push('"');
            }
            q.push(ch);
        }
        q.push('"');
        q
    } else {
        s.to_string()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub scenario_sha256: String,
    pub seed: Option<u64>,
    pub tables: Vec<ResultTable>,
    pub warnings: Vec<String>,
}

impl Document {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("tables serialize");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }

    /// Human-readable digest for the terminal.
    pub fn summary(&self) -> String {
        let mut s = String::new();
        for t in &self.tables {
            let _ = writeln!(s, "{}: {} rows × {} columns", t.name, t.rows.len(), t.columns.len());
            if t.rows.len() == 1 {
                for (c, v) in t.columns.iter().zip(&t.rows[0]) {
                    let _ = writeln!(s, "  {:<28} {} {}", c.name, format_cell(v), c.unit);
                }
            }
        }
        for w in &self.warnings {
            let _ = writeln!(s, "warning: {w}");
        }
        s
    }
}
