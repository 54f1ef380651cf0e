use std::io::Write;
use std::path::Path;

use serde::Serialize;

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(i64),
    Float(f64),
    Text(String),
}

impl Cell {
    /// Floats carry 17 significant digits.
    pub fn render(&self) -> String {
        match self {
            Cell::Int(i) => i.to_string(),
            Cell::Float(x) => format!("{x:.16e}"),
            Cell::Text(s) => s.clone(),
        }
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

#[derive(Debug, Clone)]
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: &[&'static str]) -> Self {
        Self {
            columns: columns.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn write_csv(&self, path: &Path) -> anyhow::Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_path(path)?;
        w.write_record(&self.columns)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::render))?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Bound {
    /// `value ≤ limit`.
    Max,
    /// `value ≥ limit`.
    Min,
}

/// One declared tolerance evaluated on one row.
#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub row: String,
    pub quantity: String,
    pub value: f64,
    pub bound: Bound,
    pub limit: f64,
    pub passed: bool,
}

impl Check {
    pub fn max(row: impl Into<String>, quantity: impl Into<String>, value: f64, limit: f64) -> Self {
        Self::new(row.into(), quantity.into(), value, Bound::Max, limit)
    }

    pub fn min(row: impl Into<String>, quantity: impl Into<String>, value: f64, limit: f64) -> Self {
        Self::new(row.into(), quantity.into(), value, Bound::Min, limit)
    }

    fn new(row: String, quantity: String, value: f64, bound: Bound, limit: f64) -> Self {
        let passed = match bound {
            Bound::Max => value <= limit,
            Bound::Min => value >= limit,
        };
        Self { row, quantity, value, bound, limit, passed }
    }

    pub fn describe(&self) -> String {
        let op = match self.bound {
            Bound::Max => "<=",
            Bound::Min => ">=",
        };
        format!("row {}: {} = {:.6e} violates {} {:.6e}", self.row, self.quantity, self.value, op, self.limit)
    }
}

/// Grid dump: one line per node with its coordinates and the value.
pub fn write_field(path: &Path, field: &wptlab::manifold::ScalarField) -> anyhow::Result<()> {
    let grid = field.grid();
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    let header = if grid.dim() == 1 { "x,value" } else { "x,y,value" };
    writeln!(out, "{header}")?;
    for (k, v) in field.values().iter().enumerate() {
        let c = grid.coord(k);
        if grid.dim() == 1 {
            writeln!(out, "{:.16e},{:.16e}", c[0], v)?;
        } else {
            writeln!(out, "{:.16e},{:.16e},{:.16e}", c[0], c[1], v)?;
        }
    }
    out.flush()?;
    Ok(())
}
