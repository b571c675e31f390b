//! JSON and CSV documents. Every document carries the format version, the
//! kind of run and the resolved configuration. Parsing a document and
//! emitting it again reproduces the input byte for byte.
//!
//! CSV layout:
//!
//! ```text
//! # tlrcool format_version=1 kind=<kind>
//! # config: <compact JSON>
//! <header>
//! <rows>
//! ```

use std::fmt::Write as _;

use serde::Serialize;
use serde_json::Value;

use crate::cooling::CoolingReport;
use crate::error::{ModelError, Result};
use crate::spectrum::SpectrumSample;
use crate::sweep::{Cell, SweepTable};

pub const FORMAT_VERSION: u32 = 1;

pub const SPECTRUM_COLUMNS: [&str; 9] = [
    "omega",
    "s_x",
    "s_p",
    "s_th",
    "s_ca",
    "re_chi",
    "im_chi",
    "gamma_ca",
    "omega_b_eff_sq",
];

/// Quantities a sweep can tabulate per grid point.
pub const REPORT_COLUMNS: [&str; 30] = [
    "delta",
    "delta0",
    "cavity_amplitude",
    "stability",
    "var_x",
    "var_p",
    "n_bf_exact",
    "var_x_approx",
    "n_bf_approx",
    "n_bf_approx_valid",
    "t_eff",
    "t_eff_valid",
    "t_eff_approx",
    "n_ca",
    "n_b",
    "n_cav",
    "gamma_ca_at_wb",
    "gamma_b_eff_at_wb",
    "omega_b_eff_sq_at_wb",
    "equipartition_ratio",
    "quadrature_error_x",
    "quadrature_error_p",
    "n_evaluations",
    "converged",
    "weak_coupling",
    "high_quality_cavity",
    "condition_20",
    "condition_22",
    "rwa_ok",
    "linearization_ok",
];

fn fmt_err(msg: impl Into<String>) -> ModelError {
    ModelError::Config(msg.into())
}

/// Shortest round-trip decimal; exponent form outside [1e-4, 1e15).
pub fn format_number(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 || (1e-4..1e15).contains(&a) || !x.is_finite() {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum CsvValue {
    Empty,
    Number(f64),
    Bool(bool),
    Text(String),
}

impl CsvValue {
    fn emit(&self, out: &mut String) {
        match self {
            CsvValue::Empty => {}
            CsvValue::Number(x) => out.push_str(&format_number(*x)),
            CsvValue::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
            CsvValue::Text(s) => {
                if s.contains([',', '"', '\n'])
                    || s.parse::<f64>().is_ok()
                    || s == "true"
                    || s == "false"
                    || s.is_empty()
                {
                    out.push('"');
                    out.push_str(&s.replace('"', "\"\""));
                    out.push('"');
                } else {
                    out.push_str(s);
                }
            }
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            CsvValue::Number(x) => Some(*x),
            _ => None,
        }
    }

    fn opt(v: Option<f64>) -> Self {
        v.map_or(CsvValue::Empty, CsvValue::Number)
    }
}

fn report_value(r: &CoolingReport, column: &str) -> CsvValue {
    use CsvValue::{Bool, Number};
    match column {
        "delta" => Number(r.delta),
        "delta0" => Number(r.delta0),
        "cavity_amplitude" => Number(r.cavity_amplitude),
        "stability" => CsvValue::Text(r.stability.to_string()),
        "var_x" => CsvValue::opt(r.var_x),
        "var_p" => CsvValue::opt(r.var_p),
        "n_bf_exact" => CsvValue::opt(r.n_bf_exact),
        "var_x_approx" => CsvValue::opt(r.var_x_approx),
        "n_bf_approx" => CsvValue::opt(r.n_bf_approx),
        "n_bf_approx_valid" => Bool(r.n_bf_approx_valid),
        "t_eff" => CsvValue::opt(r.t_eff),
        "t_eff_valid" => Bool(r.t_eff_valid),
        "t_eff_approx" => CsvValue::opt(r.t_eff_approx),
        "n_ca" => CsvValue::opt(r.n_ca),
        "n_b" => Number(r.n_b),
        "n_cav" => Number(r.n_cav),
        "gamma_ca_at_wb" => Number(r.gamma_ca_at_wb),
        "gamma_b_eff_at_wb" => Number(r.gamma_b_eff_at_wb),
        "omega_b_eff_sq_at_wb" => Number(r.omega_b_eff_sq_at_wb),
        "equipartition_ratio" => CsvValue::opt(r.equipartition_ratio),
        "quadrature_error_x" => CsvValue::opt(r.quadrature_error_x),
        "quadrature_error_p" => CsvValue::opt(r.quadrature_error_p),
        "n_evaluations" => Number(r.n_evaluations as f64),
        "converged" => Bool(r.converged),
        "weak_coupling" => Bool(r.flags.weak_coupling),
        "high_quality_cavity" => Bool(r.flags.high_quality_cavity),
        "condition_20" => Bool(r.flags.condition_20),
        "condition_22" => Bool(r.flags.condition_22),
        "rwa_ok" => Bool(r.flags.rwa_ok),
        "linearization_ok" => Bool(r.flags.linearization_ok),
        _ => CsvValue::Empty,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CsvDocument {
    pub kind: String,
    pub config: Value,
    pub header: Vec<String>,
    pub rows: Vec<Vec<CsvValue>>,
}

impl CsvDocument {
    pub fn emit(&self) -> String {
        let mut out = String::new();
        writeln!(out, "# tlrcool format_version={FORMAT_VERSION} kind={}", self.kind).unwrap();
        writeln!(out, "# config: {}", serde_json::to_string(&self.config).expect("json")).unwrap();
        out.push_str(&self.header.join(","));
        out.push('\n');
        for row in &self.rows {
            for (i, v) in row.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                v.emit(&mut out);
            }
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let first = lines.next().ok_or_else(|| fmt_err("empty CSV document"))?;
        let rest = first
            .strip_prefix("# tlrcool format_version=")
            .ok_or_else(|| fmt_err("missing CSV preamble"))?;
        let (version, kind) = rest.split_once(" kind=").ok_or_else(|| fmt_err("bad CSV preamble"))?;
        check_version(version.parse().map_err(|_| fmt_err("bad format version"))?)?;
        let cfg_line = lines.next().ok_or_else(|| fmt_err("missing config line"))?;
        let cfg = cfg_line
            .strip_prefix("# config: ")
            .ok_or_else(|| fmt_err("missing config line"))?;
        let config: Value = serde_json::from_str(cfg).map_err(|e| fmt_err(e.to_string()))?;
        let header: Vec<String> = lines
            .next()
            .ok_or_else(|| fmt_err("missing header"))?
            .split(',')
            .map(str::to_string)
            .collect();
        let mut rows = Vec::new();
        for line in lines {
            let row = split_row(line)?;
            if row.len() != header.len() {
                return Err(fmt_err(format!(
                    "row has {} fields, header has {}",
                    row.len(),
                    header.len()
                )));
            }
            rows.push(row);
        }
        Ok(CsvDocument {
            kind: kind.to_string(),
            config,
            header,
            rows,
        })
    }

    pub fn column(&self, name: &str) -> Option<Vec<CsvValue>> {
        let i = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[i].clone()).collect())
    }
}

fn check_version(v: u32) -> Result<()> {
    if v != FORMAT_VERSION {
        return Err(fmt_err(format!("unsupported format version {v}")));
    }
    Ok(())
}

fn split_row(line: &str) -> Result<Vec<CsvValue>> {
    let mut out = Vec::new();
    let mut chars = line.chars().peekable();
    loop {
        if chars.peek() == Some(&'"') {
            chars.next();
            let mut s = String::new();
            loop {
                match chars.next() {
                    Some('"') if chars.peek() == Some(&'"') => {
                        chars.next();
                        s.push('"');
                    }
                    Some('"') => break,
                    Some(c) => s.push(c),
                    None => return Err(fmt_err("unterminated quoted field")),
                }
            }
            out.push(CsvValue::Text(s));
            match chars.next() {
                None => break,
                Some(',') => continue,
                Some(_) => return Err(fmt_err("text after quoted field")),
            }
        } else {
            let mut s = String::new();
            let mut ended = true;
            for c in chars.by_ref() {
                if c == ',' {
                    ended = false;
                    break;
                }
                s.push(c);
            }
            out.push(match s.as_str() {
                "" => CsvValue::Empty,
                "true" => CsvValue::Bool(true),
                "false" => CsvValue::Bool(false),
                _ => match s.parse::<f64>() {
                    Ok(x) => CsvValue::Number(x),
                    Err(_) => CsvValue::Text(s),
                },
            });
            if ended {
                break;
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct JsonDocument {
    pub kind: String,
    pub config: Value,
    pub data: Value,
}

impl JsonDocument {
    pub fn new(kind: &str, config: Value, data: &impl Serialize) -> Self {
        JsonDocument {
            kind: kind.to_string(),
            config,
            data: serde_json::to_value(data).expect("serializable output"),
        }
    }

    /// Pretty JSON with keys in sorted order, newline-terminated.
    pub fn emit(&self) -> String {
        let v = serde_json::json!({
            "format_version": FORMAT_VERSION,
            "kind": self.kind,
            "config": self.config,
            "data": self.data,
        });
        let mut s = serde_json::to_string_pretty(&v).expect("json");
        s.push('\n');
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut v: Value = serde_json::from_str(text).map_err(|e| fmt_err(e.to_string()))?;
        let version = v
            .get("format_version")
            .and_then(Value::as_u64)
            .ok_or_else(|| fmt_err("missing format_version"))?;
        check_version(version as u32)?;
        let kind = v
            .get("kind")
            .and_then(Value::as_str)
            .ok_or_else(|| fmt_err("missing kind"))?
            .to_string();
        let obj = v.as_object_mut().ok_or_else(|| fmt_err("not a JSON object"))?;
        let config = obj.remove("config").ok_or_else(|| fmt_err("missing config"))?;
        let data = obj.remove("data").ok_or_else(|| fmt_err("missing data"))?;
        Ok(JsonDocument { kind, config, data })
    }
}

pub fn spectrum_csv(samples: &[SpectrumSample], config: Value) -> CsvDocument {
    let rows = samples
        .iter()
        .map(|s| {
            [
                s.omega,
                s.s_x,
                s.s_p,
                s.s_th,
                s.s_ca,
                s.chi_eff.re,
                s.chi_eff.im,
                s.gamma_ca,
                s.omega_b_eff_sq,
            ]
            .into_iter()
            .map(CsvValue::Number)
            .collect()
        })
        .collect();
    CsvDocument {
        kind: "spectrum".into(),
        config,
        header: SPECTRUM_COLUMNS.iter().map(|s| s.to_string()).collect(),
        rows,
    }
}

/// One row per report with the chosen columns.
pub fn reports_csv(kind: &str, reports: &[&CoolingReport], columns: &[String], config: Value) -> CsvDocument {
    CsvDocument {
        kind: kind.into(),
        config,
        header: columns.to_vec(),
        rows: reports
            .iter()
            .map(|r| columns.iter().map(|c| report_value(r, c)).collect())
            .collect(),
    }
}

/// Grid index, axis coordinates, status, requested outputs, error message.
pub fn sweep_csv(table: &SweepTable, outputs: &[String], config: Value) -> CsvDocument {
    let mut header = vec!["index".to_string()];
    header.extend(table.axes.iter().map(|a| a.name().to_string()));
    header.push("status".into());
    header.extend(outputs.iter().cloned());
    header.push("message".into());
    let rows = table
        .points
        .iter()
        .map(|p| {
            let mut row = vec![CsvValue::Number(p.index as f64)];
            row.extend(p.coords.iter().map(|&c| CsvValue::Number(c)));
            match &p.cell {
                Cell::Ok(r) => {
                    row.push(CsvValue::Text("ok".into()));
                    row.extend(outputs.iter().map(|c| report_value(r, c)));
                    row.push(CsvValue::Empty);
                }
                Cell::Error { message } => {
                    row.push(CsvValue::Text("error".into()));
                    row.extend(outputs.iter().map(|_| CsvValue::Empty));
                    row.push(CsvValue::Text(message.clone()));
                }
            }
            row
        })
        .collect();
    CsvDocument {
        kind: "sweep".into(),
        config,
        header,
        rows,
    }
}
