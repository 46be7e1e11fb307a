//! Tabular records and their CSV / JSON encodings.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde_json::{json, Map, Value};
use sl3_coupler::{FieldVector, C64};

use crate::config::Format;
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cell {
    Real(f64),
    Int(i64),
    Complex(C64),
    Text(&'static str),
    Bool(bool),
    /// Undefined value (e.g. a renormalisation of a vanishing total).
    Empty,
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Real(v)
    }
}

impl From<C64> for Cell {
    fn from(v: C64) -> Self {
        Cell::Complex(v)
    }
}

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Cell::Empty, Cell::Real)
    }
}

/// Whether a column holds real or complex values decides its CSV layout.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColumnKind {
    Scalar,
    Complex,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub columns: Vec<(String, ColumnKind)>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(name: &str, columns: &[(&str, ColumnKind)]) -> Self {
        Table {
            name: name.to_string(),
            columns: columns.iter().map(|(n, k)| (n.to_string(), *k)).collect(),
            rows: Vec::new(),
        }
    }

    pub fn with_columns(name: &str, columns: Vec<(String, ColumnKind)>) -> Self {
        Table {
            name: name.to_string(),
            columns,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    /// Flat CSV column names; complex columns split into `_re`/`_im`.
    pub fn csv_header(&self) -> Vec<String> {
        self.columns
            .iter()
            .flat_map(|(n, k)| match k {
                ColumnKind::Scalar => vec![n.clone()],
                ColumnKind::Complex => vec![format!("{n}_re"), format!("{n}_im")],
            })
            .collect()
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<(), CliError> {
        writeln!(out, "# {}", self.csv_header().join(","))?;
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
        for row in &self.rows {
            let mut fields = Vec::with_capacity(row.len() + 4);
            for (cell, (_, kind)) in row.iter().zip(&self.columns) {
                match (cell, kind) {
                    (Cell::Complex(c), _) => {
                        fields.push(real_text(c.re));
                        fields.push(real_text(c.im));
                    }
                    (Cell::Empty, ColumnKind::Complex) => fields.extend([String::new(), String::new()]),
                    (Cell::Empty, ColumnKind::Scalar) => fields.push(String::new()),
                    (Cell::Real(v), _) => fields.push(real_text(*v)),
                    (Cell::Int(v), _) => fields.push(v.to_string()),
                    (Cell::Text(t), _) => fields.push(t.to_string()),
                    (Cell::Bool(b), _) => fields.push(b.to_string()),
                }
            }
            w.write_record(&fields).map_err(|e| CliError::Io(e.into()))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_json(&self) -> Value {
        let records: Vec<Value> = self
            .rows
            .iter()
            .map(|row| {
                let mut obj = Map::new();
                for (cell, (name, _)) in row.iter().zip(&self.columns) {
                    obj.insert(name.clone(), cell_json(cell));
                }
                Value::Object(obj)
            })
            .collect();
        Value::Array(records)
    }
}

fn real_text(v: f64) -> String {
    // Shortest round-trip representation, always with '.' as separator.
    format!("{v:?}")
}

fn cell_json(c: &Cell) -> Value {
    match c {
        Cell::Real(v) if v.is_finite() => json!(v),
        Cell::Real(_) | Cell::Empty => Value::Null,
        Cell::Int(v) => json!(v),
        Cell::Complex(c) => json!({"re": finite_or_null(c.re), "im": finite_or_null(c.im)}),
        Cell::Text(t) => json!(t),
        Cell::Bool(b) => json!(b),
    }
}

fn finite_or_null(v: f64) -> Value {
    if v.is_finite() {
        json!(v)
    } else {
        Value::Null
    }
}

/// All tables produced by one run; the first is the primary record set.
#[derive(Debug, Clone, PartialEq)]
pub struct Output {
    pub command: &'static str,
    pub tables: Vec<Table>,
}

impl Output {
    /// Paths the tables are written to: the primary at `out`, the others
    /// beside it as `<stem>.<table>.<ext>`. JSON keeps everything in `out`.
    pub fn file_paths(&self, out: &Path, format: Format) -> Vec<PathBuf> {
        match format {
            Format::Json => vec![out.to_path_buf()],
            Format::Csv => {
                let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
                let ext = out.extension().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "csv".into());
                std::iter::once(out.to_path_buf())
                    .chain(self.tables[1..].iter().map(|t| out.with_file_name(format!("{stem}.{}.{ext}", t.name))))
                    .collect()
            }
        }
    }

    pub fn to_json(&self) -> Value {
        let mut obj = Map::new();
        obj.insert("command".into(), json!(self.command));
        for t in &self.tables {
            obj.insert(t.name.clone(), t.to_json());
        }
        Value::Object(obj)
    }

    /// Writes to stdout: JSON as one document, CSV tables one after another
    /// separated by a blank line.
    pub fn write_stdout(&self, format: Format) -> Result<(), CliError> {
        let stdout = std::io::stdout();
        let mut lock = stdout.lock();
        match format {
            Format::Json => {
                serde_json::to_writer_pretty(&mut lock, &self.to_json()).map_err(|e| CliError::Io(e.into()))?;
                writeln!(lock)?;
            }
            Format::Csv => {
                for (k, t) in self.tables.iter().enumerate() {
                    if k > 0 {
                        writeln!(lock)?;
                        writeln!(lock, "# table: {}", t.name)?;
                    }
                    t.write_csv(&mut lock)?;
                }
            }
        }
        Ok(())
    }

    /// Writes every file through a temporary sibling and renames it into
    /// place; on failure nothing is left behind.
    pub fn write_files(&self, out: &Path, format: Format) -> Result<Vec<PathBuf>, CliError> {
        let paths = self.file_paths(out, format);
        let mut written: Vec<PathBuf> = Vec::new();
        let result = (|| {
            for (k, path) in paths.iter().enumerate() {
                let tmp = partial_path(path);
                written.push(tmp.clone());
                let file = std::fs::File::create(&tmp)
                    .map_err(|e| CliError::Config(format!("field `out`: {}: {e}", path.display())))?;
                let mut buf = std::io::BufWriter::new(file);
                match format {
                    Format::Json => {
                        serde_json::to_writer_pretty(&mut buf, &self.to_json()).map_err(|e| CliError::Io(e.into()))?;
                        writeln!(buf)?;
                    }
                    Format::Csv => self.tables[k].write_csv(&mut buf)?,
                }
                buf.into_inner().map_err(|e| CliError::Io(e.into_error()))?.sync_all()?;
            }
            for path in &paths {
                std::fs::rename(partial_path(path), path)?;
            }
            Ok(())
        })();
        if result.is_err() {
            for p in written {
                let _ = std::fs::remove_file(p);
            }
        }
        result.map(|_| paths)
    }
}

fn partial_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().map(|s| s.to_os_string()).unwrap_or_default();
    name.push(".partial");
    path.with_file_name(name)
}

/// Mode intensities `I_j = |E_j|²` and the renormalised `Ĩ_j = I_j / Σ I`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntensityRecord {
    pub intensity: [f64; 3],
    /// `None` when the total intensity vanishes or is not finite.
    pub normalized: Option<[f64; 3]>,
}

pub fn emit_intensities(fields: &[FieldVector]) -> Vec<IntensityRecord> {
    fields
        .iter()
        .map(|e| {
            let intensity = [e[0].norm_sqr(), e[1].norm_sqr(), e[2].norm_sqr()];
            let total: f64 = intensity.iter().sum();
            let normalized = (total > 0.0 && total.is_finite()).then(|| intensity.map(|v| v / total));
            IntensityRecord { intensity, normalized }
        })
        .collect()
}

/// Gnuplot script drawing every numeric column of the primary CSV against
/// the first one.
pub fn plot_script(table: &Table, data: &Path) -> String {
    let header = table.csv_header();
    let mut s = String::new();
    s.push_str("set datafile separator ','\nset datafile commentschars '#'\nset key outside\n");
    s.push_str(&format!("set xlabel '{}'\n", header[0]));
    let plots: Vec<String> = header
        .iter()
        .enumerate()
        .skip(1)
        .filter(|(k, _)| {
            let col = table_column_of(table, *k);
            !table.rows.iter().any(|r| matches!(r[col], Cell::Text(_) | Cell::Bool(_)))
        })
        .map(|(k, name)| format!("'{}' using 1:{} with lines title '{}'", data.display(), k + 1, name))
        .collect();
    s.push_str(&format!("plot {}\n", plots.join(", \\\n     ")));
    s
}

fn table_column_of(table: &Table, flat: usize) -> usize {
    let mut k = 0;
    for (col, (_, kind)) in table.columns.iter().enumerate() {
        k += if *kind == ColumnKind::Complex { 2 } else { 1 };
        if flat < k {
            return col;
        }
    }
    table.columns.len() - 1
}
