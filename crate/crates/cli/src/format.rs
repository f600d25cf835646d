//! Tabular artifacts and their CSV / JSON encodings.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde_json::{Map, Number, Value};

use crate::error::CliError;

/// `x` with 17 significant digits in the style of C's `%.17g`: fixed notation
/// for decimal exponents in `[-5, 17)`, scientific otherwise, trailing zeros
/// dropped. Every finite `f64` survives a parse round trip.
pub fn fmt_g17(x: f64) -> String {
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    if x.is_nan() {
        return "NaN".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let sci = format!("{x:.16e}");
    let (mantissa, exp) = sci.split_once('e').expect("scientific format has an exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..17).contains(&exp) {
        let fixed = format!("{:.*}", (16 - exp) as usize, x);
        trim_zeros(&fixed).to_string()
    } else {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim_zeros(mantissa), exp.abs())
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Int(u64),
    Float(f64),
    Bool(bool),
    Str(String),
    Null,
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Float(v) => fmt_g17(*v),
            Cell::Bool(v) => v.to_string(),
            Cell::Str(v) => v.clone(),
            Cell::Null => String::new(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Int(v) => Value::from(*v),
            Cell::Float(v) => Number::from_f64(*v).map_or(Value::Null, Value::Number),
            Cell::Bool(v) => Value::Bool(*v),
            Cell::Str(v) => Value::String(v.clone()),
            Cell::Null => Value::Null,
        }
    }

    fn from_json(v: &Value) -> Result<Self, CliError> {
        Ok(match v {
            Value::Null => Cell::Null,
            Value::Bool(b) => Cell::Bool(*b),
            Value::String(s) => Cell::Str(s.clone()),
            Value::Number(n) => match n.as_u64() {
                Some(u) => Cell::Int(u),
                None => Cell::Float(n.as_f64().ok_or_else(|| CliError::Parse(format!("unrepresentable number {n}")))?),
            },
            _ => return Err(CliError::Parse("table cells must be scalars".into())),
        })
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as u64)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v)
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Bool(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Str(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Str(v)
    }
}

impl<T: Into<Cell>> From<Option<T>> for Cell {
    fn from(v: Option<T>) -> Self {
        v.map_or(Cell::Null, Into::into)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl Format {
    pub fn name(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

/// Named columns and rows of cells. CSV is the header line followed by one
/// line per row; JSON is an array of objects keyed by the column names.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width must match the header");
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for row in &self.rows {
            let line: Vec<String> = row.iter().map(Cell::csv).collect();
            out.push_str(&line.join(","));
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> String {
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|row| {
                let obj: Map<String, Value> = self.columns.iter().cloned().zip(row.iter().map(Cell::json)).collect();
                Value::Object(obj)
            })
            .collect();
        let mut out = serde_json::to_string_pretty(&Value::Array(rows)).expect("JSON values serialize");
        out.push('\n');
        out
    }

    /// Reads the JSON encoding back; column order is taken from the first row.
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let value: Value = serde_json::from_str(text).map_err(|e| CliError::Parse(format!("JSON table: {e}")))?;
        let Value::Array(items) = value else {
            return Err(CliError::Parse("JSON table must be an array of objects".into()));
        };
        let mut table = Table { columns: Vec::new(), rows: Vec::new() };
        for (i, item) in items.iter().enumerate() {
            let Value::Object(obj) = item else {
                return Err(CliError::Parse(format!("row {i} is not an object")));
            };
            if i == 0 {
                table.columns = obj.keys().cloned().collect();
            } else if !obj.keys().eq(table.columns.iter()) {
                return Err(CliError::Parse(format!("row {i} has different columns")));
            }
            table.rows.push(obj.values().map(Cell::from_json).collect::<Result<_, _>>()?);
        }
        Ok(table)
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Csv => self.to_csv(),
            Format::Json => self.to_json(),
        }
    }
}

/// `<path>.meta.json`.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(".meta.json");
    PathBuf::from(name)
}

/// Writes `table` to `path` (or stdout when `None`) and, for files, the
/// metadata sidecar.
pub fn emit(table: &Table, format: Format, path: Option<&Path>, meta: &Value) -> Result<(), CliError> {
    let body = table.render(format);
    match path {
        Some(path) => {
            fs::write(path, body).map_err(|e| CliError::io(path, e))?;
            let side = sidecar_path(path);
            let mut text = serde_json::to_string_pretty(meta).expect("JSON values serialize");
            text.push('\n');
            fs::write(&side, text).map_err(|e| CliError::io(side, e))
        }
        None => std::io::stdout()
            .write_all(body.as_bytes())
            .map_err(|e| CliError::io("<stdout>", e)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn g17_examples() {
        assert_eq!(fmt_g17(0.5), "0.5");
        assert_eq!(fmt_g17(0.1), "0.10000000000000001");
        assert_eq!(fmt_g17(2.0), "2");
        assert_eq!(fmt_g17(-1.25), "-1.25");
        assert_eq!(fmt_g17(1e-7), "9.9999999999999995e-08");
        assert_eq!(fmt_g17(1e20), "1e+20");
        assert_eq!(fmt_g17(123456.0), "123456");
        assert_eq!(fmt_g17(0.0), "0");
    }

    #[test]
    fn g17_round_trips() {
        for &x in &[std::f64::consts::PI, 1.0 / 3.0, 6.02214076e23, 5e-324, f64::MAX, -2.5e-6, 0.30000000000000004] {
            assert_eq!(fmt_g17(x).parse::<f64>().unwrap(), x, "{x}");
        }
    }

    #[test]
    fn json_round_trip_is_byte_identical() {
        let mut t = Table::new(&["a", "b", "c", "d"]);
        t.push(vec![Cell::Float(0.1), Cell::Int(3), Cell::Null, Cell::Str("x".into())]);
        t.push(vec![Cell::Float(2.0), Cell::Int(0), Cell::Bool(true), Cell::Str("y".into())]);
        let text = t.to_json();
        let back = Table::from_json(&text).unwrap();
        assert_eq!(back, t);
        assert_eq!(back.to_json(), text);
    }
}
