use std::fmt;
use std::fs;
use std::path::Path;

use super::IoError;

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(i64),
    Num(f64),
    Text(String),
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cell::Int(i) => write!(f, "{i}"),
            // 17 significant digits round-trip every double
            Cell::Num(x) => write!(f, "{x:.16e}"),
            Cell::Text(s) => f.write_str(s),
        }
    }
}

impl Cell {
    fn parse(s: &str) -> Cell {
        if let Ok(i) = s.parse::<i64>() {
            return Cell::Int(i);
        }
        match s.parse::<f64>() {
            Ok(x) => Cell::Num(x),
            Err(_) => Cell::Text(s.to_string()),
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Cell::Int(i) => Some(*i as f64),
            Cell::Num(x) => Some(*x),
            Cell::Text(_) => None,
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
        Cell::Int(i as i64)
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.to_string())
    }
}

/// Rectangular table with a header row.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl CsvTable {
    pub fn new(header: &[&str]) -> Self {
        CsvTable { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.header.len(), "row width must match the header");
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        w.write_record(&self.header).expect("in-memory write");
        for row in &self.rows {
            w.write_record(row.iter().map(|c| c.to_string())).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("cells are UTF-8")
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
        let header: Vec<String> = r.headers().map_err(|e| e.to_string())?.iter().map(str::to_string).collect();
        if header.is_empty() {
            return Err("empty CSV".into());
        }
        let rows = r
            .records()
            .map(|rec| rec.map(|rec| rec.iter().map(Cell::parse).collect()).map_err(|e| e.to_string()))
            .collect::<Result<Vec<Vec<Cell>>, String>>()?;
        Ok(CsvTable { header, rows })
    }

    pub fn write(&self, path: &Path) -> Result<(), IoError> {
        fs::write(path, self.to_csv()).map_err(|e| IoError::file(path, e))
    }

    pub fn read(path: &Path) -> Result<Self, IoError> {
        let text = fs::read_to_string(path).map_err(|e| IoError::file(path, e))?;
        CsvTable::parse(&text).map_err(|m| IoError::Format(format!("{}: {m}", path.display())))
    }

    /// Numeric column by header name.
    pub fn column(&self, name: &str) -> Result<Vec<f64>, IoError> {
        let j = self
            .header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| IoError::Format(format!("missing column '{name}'")))?;
        self.rows
            .iter()
            .enumerate()
            .map(|(i, r)| r[j].as_f64().ok_or_else(|| IoError::Format(format!("row {}: column '{name}' is not numeric", i + 1))))
            .collect()
    }
}
