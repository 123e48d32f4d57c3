//! Output documents and their readers.
//!
//! Every subcommand produces a [`Report`]. JSON carries the report verbatim;
//! CSV and text carry its tabular form. Numbers are written in the shortest
//! form that parses back to the same `f64`.

use std::io::Write;
use std::path::Path;

use rydion::{TurningPointErrors, Warning};
use serde::{Deserialize, Serialize};

use crate::config::ValidationReport;
use crate::failure::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum)]
pub enum Format {
    #[default]
    Csv,
    Json,
    Text,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Cell {
    Num(f64),
    Text(String),
}

impl Cell {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Cell::Num(v) => Some(*v),
            Cell::Text(_) => None,
        }
    }

    fn render(&self) -> String {
        match self {
            Cell::Num(v) => format!("{v:?}"),
            Cell::Text(s) => s.clone(),
        }
    }

    fn parse(field: &str) -> Cell {
        match field.parse::<f64>() {
            Ok(v) => Cell::Num(v),
            Err(_) => Cell::Text(field.to_string()),
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
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

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
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
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// Numeric column by name.
    pub fn numbers(&self, name: &str) -> Result<Vec<f64>, CliError> {
        let i = self
            .column_index(name)
            .ok_or_else(|| CliError::config(format!("input has no column {name:?}")))?;
        self.rows
            .iter()
            .enumerate()
            .map(|(r, row)| {
                row.get(i).and_then(Cell::as_f64).ok_or_else(|| {
                    CliError::config(format!("row {}: column {name:?} is not a number", r + 1))
                })
            })
            .collect()
    }

    pub fn to_csv(&self) -> Result<String, CliError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.columns)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::render))?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::io(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| CliError::io(e.to_string()))
    }

    pub fn from_csv(text: &str) -> Result<Self, CliError> {
        let mut r = csv::Reader::from_reader(text.as_bytes());
        let columns = r
            .headers()
            .map_err(|e| CliError::config(format!("csv header: {e}")))?
            .iter()
            .map(str::to_string)
            .collect();
        let mut rows = Vec::new();
        for rec in r.records() {
            let rec = rec.map_err(|e| CliError::config(format!("csv: {e}")))?;
            rows.push(rec.iter().map(Cell::parse).collect());
        }
        Ok(Self { columns, rows })
    }

    pub fn to_text(&self) -> String {
        let rendered: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|r| r.iter().map(Cell::render).collect())
            .collect();
        let widths: Vec<usize> = (0..self.columns.len())
            .map(|i| {
                rendered
                    .iter()
                    .map(|r| r[i].len())
                    .chain([self.columns[i].len()])
                    .max()
                    .unwrap_or(0)
            })
            .collect();
        let line = |cells: &[String]| {
            cells
                .iter()
                .zip(&widths)
                .map(|(c, w)| format!("{c:>w$}"))
                .collect::<Vec<_>>()
                .join("  ")
        };
        let mut out = line(&self.columns);
        out.push('\n');
        for r in &rendered {
            out.push_str(&line(r));
            out.push('\n');
        }
        out
    }

    /// Sorts rows by the leading column, numbers before text.
    pub fn sort_by_leading(&mut self) {
        self.rows.sort_by(|a, b| match (&a[0], &b[0]) {
            (Cell::Num(x), Cell::Num(y)) => x.total_cmp(y),
            (Cell::Num(_), Cell::Text(_)) => std::cmp::Ordering::Less,
            (Cell::Text(_), Cell::Num(_)) => std::cmp::Ordering::Greater,
            (Cell::Text(x), Cell::Text(y)) => x.cmp(y),
        });
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateInfo {
    pub label: String,
    pub polarizability: f64,
    pub freq_x_hz: f64,
    pub freq_y_hz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrapInfo {
    pub drive_freq_hz: f64,
    pub grad_rf: f64,
    pub grad_dc: f64,
    pub asymmetry: f64,
    pub mathieu_q: f64,
    pub micromotion_factor: f64,
    pub secular_x_hz: f64,
    pub secular_y_hz: f64,
    pub secular_z_hz: f64,
    pub mass_kg: f64,
    pub charge_c: f64,
    pub states: Vec<StateInfo>,
    pub warnings: Vec<Warning>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterRow {
    pub name: String,
    pub value: f64,
    pub sigma: f64,
    pub unit: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub line_model: String,
    pub parameters: Vec<ParameterRow>,
    pub chi_squared: f64,
    pub dof: usize,
    pub residual_norm: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TurningPointReport {
    /// Control value at the turning point, in the units of the input.
    pub control: f64,
    pub shift_hz: f64,
    /// Hz per control unit squared.
    pub curvature_hz: f64,
    pub errors: Option<TurningPointErrors>,
    pub warnings: Vec<Warning>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldLimit {
    pub polarizability: f64,
    pub linewidth_hz: f64,
    pub fraction: f64,
    pub residual_field_v_per_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "report", rename_all = "snake_case")]
pub enum Report {
    Table(Table),
    TrapInfo(TrapInfo),
    Fit(FitReport),
    TurningPoint(TurningPointReport),
    FieldLimit(FieldLimit),
    Validation(ValidationReport),
}

fn quantity_table(pairs: Vec<(String, Cell)>) -> Table {
    let mut t = Table::new(&["quantity", "value"]);
    for (k, v) in pairs {
        t.push(vec![Cell::Text(k), v]);
    }
    t
}

impl Report {
    /// Tabular form used for CSV and text output.
    pub fn to_table(&self) -> Table {
        match self {
            Report::Table(t) => t.clone(),
            Report::TrapInfo(i) => {
                let mut p: Vec<(String, Cell)> = vec![
                    ("drive_freq_hz".into(), i.drive_freq_hz.into()),
                    ("grad_rf".into(), i.grad_rf.into()),
                    ("grad_dc".into(), i.grad_dc.into()),
                    ("asymmetry".into(), i.asymmetry.into()),
                    ("mathieu_q".into(), i.mathieu_q.into()),
                    ("micromotion_factor".into(), i.micromotion_factor.into()),
                    ("secular_x_hz".into(), i.secular_x_hz.into()),
                    ("secular_y_hz".into(), i.secular_y_hz.into()),
                    ("secular_z_hz".into(), i.secular_z_hz.into()),
                    ("mass_kg".into(), i.mass_kg.into()),
                    ("charge_c".into(), i.charge_c.into()),
                ];
                for s in &i.states {
                    p.push((
                        format!("{}.polarizability", s.label),
                        s.polarizability.into(),
                    ));
                    p.push((format!("{}.freq_x_hz", s.label), s.freq_x_hz.into()));
                    p.push((format!("{}.freq_y_hz", s.label), s.freq_y_hz.into()));
                }
                for w in &i.warnings {
                    p.push(("warning".into(), w.to_string().into()));
                }
                quantity_table(p)
            }
            Report::Fit(f) => {
                let mut t = Table::new(&["parameter", "value", "sigma", "unit"]);
                for p in &f.parameters {
                    t.push(vec![
                        p.name.as_str().into(),
                        p.value.into(),
                        p.sigma.into(),
                        p.unit.as_str().into(),
                    ]);
                }
                t.push(vec![
                    "chi_squared".into(),
                    f.chi_squared.into(),
                    0.0.into(),
                    "".into(),
                ]);
                t.push(vec![
                    "dof".into(),
                    (f.dof as f64).into(),
                    0.0.into(),
                    "".into(),
                ]);
                t
            }
            Report::TurningPoint(tp) => {
                let e = tp.errors;
                let mut t = Table::new(&["quantity", "value", "sigma"]);
                let sig = |f: fn(&TurningPointErrors) -> f64| {
                    e.as_ref()
                        .map_or(Cell::Text(String::new()), |e| f(e).into())
                };
                t.push(vec![
                    "control".into(),
                    tp.control.into(),
                    sig(|e| e.control),
                ]);
                t.push(vec![
                    "shift_hz".into(),
                    tp.shift_hz.into(),
                    sig(|e| e.shift),
                ]);
                t.push(vec![
                    "curvature_hz".into(),
                    tp.curvature_hz.into(),
                    sig(|e| e.curvature),
                ]);
                for w in &tp.warnings {
                    t.push(vec!["warning".into(), w.to_string().into(), "".into()]);
                }
                t
            }
            Report::FieldLimit(l) => quantity_table(vec![
                ("polarizability".into(), l.polarizability.into()),
                ("linewidth_hz".into(), l.linewidth_hz.into()),
                ("fraction".into(), l.fraction.into()),
                (
                    "residual_field_v_per_m".into(),
                    l.residual_field_v_per_m.into(),
                ),
            ]),
            Report::Validation(v) => {
                let mut t = Table::new(&["severity", "message"]);
                for m in &v.violations {
                    t.push(vec!["violation".into(), m.as_str().into()]);
                }
                for w in &v.warnings {
                    t.push(vec!["warning".into(), w.to_string().into()]);
                }
                t
            }
        }
    }

    pub fn render(&self, format: Format) -> Result<String, CliError> {
        match format {
            Format::Json => Ok(serde_json::to_string_pretty(self)? + "\n"),
            Format::Csv => self.to_table().to_csv(),
            Format::Text => Ok(self.to_table().to_text()),
        }
    }

    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::config(format!("report: {e}")))
    }
}

/// Writes to `out`, or to stdout when absent.
pub fn emit(report: &Report, format: Format, out: Option<&Path>) -> Result<(), CliError> {
    let text = report.render(format)?;
    match out {
        Some(p) => {
            std::fs::write(p, text).map_err(|e| CliError::io(format!("{}: {e}", p.display())))
        }
        None => {
            let mut s = std::io::stdout().lock();
            s.write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

/// Reads a table from CSV, or from a JSON table report when the file ends in `.json`.
pub fn read_table(path: &Path) -> Result<Table, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
    if path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("json"))
    {
        match Report::from_json(&text)? {
            Report::Table(t) => Ok(t),
            other => Ok(other.to_table()),
        }
    } else {
        Table::from_csv(&text)
    }
}
