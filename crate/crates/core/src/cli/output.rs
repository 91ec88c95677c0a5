//! CSV and JSON rendering of result tables.

use std::io::{self, Write};
use std::path::Path;

use serde_json::{json, Value};

/// Round-trip formatting with 17 significant digits.
pub fn format_number(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        x.to_string()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Number(f64),
    Flag(bool),
    Text(String),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Number(x) => format_number(*x),
            Cell::Flag(b) => u8::from(*b).to_string(),
            Cell::Text(s) => s.clone(),
        }
    }

    fn to_json(&self) -> Value {
        match self {
            Cell::Number(x) if x.is_finite() => json!(x),
            Cell::Number(_) => Value::Null,
            Cell::Flag(b) => json!(b),
            Cell::Text(s) => json!(s),
        }
    }

    pub fn as_number(&self) -> Option<f64> {
        match self {
            Cell::Number(x) => Some(*x),
            _ => None,
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Number(x)
    }
}

impl From<Option<f64>> for Cell {
    fn from(x: Option<f64>) -> Self {
        Cell::Number(x.unwrap_or(f64::NAN))
    }
}

impl From<bool> for Cell {
    fn from(b: bool) -> Self {
        Cell::Flag(b)
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.to_string())
    }
}

impl From<String> for Cell {
    fn from(s: String) -> Self {
        Cell::Text(s)
    }
}

/// Metadata written as `# key: value` lines ahead of the CSV header.
#[derive(Debug, Clone, PartialEq)]
pub struct Provenance {
    pub entries: Vec<(String, String)>,
}

impl Provenance {
    pub fn new(scenario: &str, sha256: &str, command: &str) -> Self {
        Self {
            entries: vec![
                ("tool".into(), format!("condsqueeze {}", env!("CARGO_PKG_VERSION"))),
                ("command".into(), command.into()),
                ("scenario".into(), scenario.into()),
                ("scenario_sha256".into(), sha256.into()),
            ],
        }
    }

    pub fn push(&mut self, key: &str, value: impl Into<String>) {
        self.entries.push((key.into(), value.into()));
    }
}

/// Column-named rows sharing one provenance block.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultTable {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum)]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

impl ResultTable {
    pub fn new(columns: Vec<&'static str>, provenance: Provenance) -> Self {
        Self { columns, rows: Vec::new(), provenance }
    }

    /// Appends a row; panics on a column-count mismatch, which is a
    /// programming error in the caller.
    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width does not match the header");
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| *c == name)
    }

    /// Rows whose `status` cell is anything but `ok`.
    pub fn failures(&self) -> usize {
        match self.column("status") {
            Some(i) => self.rows.iter().filter(|r| r[i] != Cell::Text("ok".into())).count(),
            None => 0,
        }
    }

    pub fn write_csv<W: Write>(&self, out: W) -> io::Result<()> {
        let mut out = io::BufWriter::new(out);
        for (k, v) in &self.provenance.entries {
            writeln!(out, "# {k}: {v}")?;
        }
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
        w.write_record(&self.columns)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::render))?;
        }
        w.flush()
    }

    pub fn to_json(&self) -> Value {
        let provenance: serde_json::Map<String, Value> =
            self.provenance.entries.iter().map(|(k, v)| (k.clone(), json!(v))).collect();
        let rows: Vec<Value> = self.rows.iter().map(|r| Value::Array(r.iter().map(Cell::to_json).collect())).collect();
        json!({ "provenance": provenance, "columns": self.columns, "rows": rows })
    }

    pub fn write_json<W: Write>(&self, out: W) -> io::Result<()> {
        let mut out = io::BufWriter::new(out);
        serde_json::to_writer_pretty(&mut out, &self.to_json())?;
        writeln!(out)?;
        out.flush()
    }

    /// Writes `<dir>/<stem>.<ext>` and returns the path.
    pub fn save(&self, dir: &Path, stem: &str, format: Format) -> io::Result<std::path::PathBuf> {
        std::fs::create_dir_all(dir)?;
        let path = dir.join(format!("{stem}.{}", format.extension()));
        let file = std::fs::File::create(&path)?;
        match format {
            Format::Csv => self.write_csv(file)?,
            Format::Json => self.write_json(file)?,
        }
        Ok(path)
    }
}

/// CSV text without the `#` provenance lines.
pub fn csv_body(text: &str) -> String {
    text.lines().filter(|l| !l.starts_with('#')).map(|l| format!("{l}\n")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample() -> ResultTable {
        let mut t = ResultTable::new(vec!["x", "flag", "status"], Provenance::new("demo", "abc", "sweep"));
        t.push(vec![1.5.into(), true.into(), "ok".into()]);
        t.push(vec![f64::NAN.into(), false.into(), "error: no crossing".into()]);
        t
    }

    #[test]
    fn csv_layout() {
        let mut buf = Vec::new();
        sample().write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert!(lines[0].starts_with("# tool: condsqueeze "));
        assert_eq!(lines[3], "# scenario_sha256: abc");
        assert_eq!(lines[4], "x,flag,status");
        assert_eq!(lines[5], "1.5000000000000000e0,1,ok");
        assert_eq!(lines[6], "NaN,0,error: no crossing");
        assert_eq!(csv_body(&text), "x,flag,status\n1.5000000000000000e0,1,ok\nNaN,0,error: no crossing\n");
    }

    #[test]
    fn json_layout() {
        let v = sample().to_json();
        assert_eq!(v["columns"][0], "x");
        assert_eq!(v["rows"][0][0], 1.5);
        assert!(v["rows"][1][0].is_null());
        assert_eq!(v["provenance"]["scenario"], "demo");
    }

    #[test]
    fn failure_count() {
        assert_eq!(sample().failures(), 1);
    }

    proptest! {
        #[test]
        fn numbers_round_trip(x in any::<f64>().prop_filter("finite", |x| x.is_finite())) {
            let s = format_number(x);
            prop_assert_eq!(s.parse::<f64>().unwrap().to_bits(), x.to_bits());
        }
    }
}
