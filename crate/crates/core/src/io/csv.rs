//! CSV datasets. One header row, one sample per row, fixed units:
//! s, PWM units, deg/s, deg/s², N·m.
//!
//! Single shaft: `t,pwm,omega,omega_dot,tau` (`omega_dot` optional).
//! Coupled group: `t,pwm_0..,omega_j_0..,tau_j_0..[,omega_m_0..][,omega_dot_j_0..]`.
//!
//! A column name may carry a unit in brackets, e.g. `omega[deg/s]`; any unit
//! other than the fixed one is rejected.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use crate::dataset::{CoupledDataset, CoupledSample, Dataset, DatasetMeta, Sample};
use crate::error::{Error, Result};
use crate::identify::CurvePoint;

use super::write_atomic;

/// Moving-average window applied when accelerations are derived on load.
pub const DEFAULT_ACCEL_WINDOW: usize = 5;

fn accepted_units(column: &str) -> &'static [&'static str] {
    let base = column.trim_end_matches(|c: char| c.is_ascii_digit()).trim_end_matches('_');
    match base {
        "t" => &["s"],
        "pwm" => &["pwm", "%", "-", ""],
        "omega" | "omega_j" | "omega_m" => &["deg/s"],
        "omega_dot" | "omega_dot_j" => &["deg/s^2", "deg/s2", "deg/s²"],
        "tau" | "tau_j" => &["n·m", "nm", "n.m", "n*m"],
        _ => &[],
    }
}

/// Splits `name[unit]`, checking the unit against the fixed schema.
fn column_name(raw: &str) -> Result<String> {
    let raw = raw.trim();
    match raw.split_once('[') {
        None => Ok(raw.to_string()),
        Some((name, rest)) => {
            let name = name.trim().to_string();
            let unit = rest.trim_end_matches(']').trim().to_lowercase();
            if accepted_units(&name).contains(&unit.as_str()) {
                Ok(name)
            } else {
                Err(Error::Data(format!(
                    "unit mismatch on column '{name}': got '{unit}', expected {:?}",
                    accepted_units(&name)
                )))
            }
        }
    }
}

struct Table {
    columns: HashMap<String, usize>,
    /// `(file line, values)` for rows with every value finite
    rows: Vec<(usize, Vec<f64>)>,
    dropped: usize,
}

fn read_table<R: Read>(reader: R) -> Result<Table> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.is_empty() || headers.iter().all(|h| h.is_empty()) {
        return Err(Error::Data("missing header row".into()));
    }
    let mut columns = HashMap::new();
    for (i, h) in headers.iter().enumerate() {
        if columns.insert(column_name(h)?, i).is_some() {
            return Err(Error::Data(format!("duplicate column '{h}'")));
        }
    }
    let mut rows = Vec::new();
    let mut dropped = 0;
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = k + 2;
        let values = rec
            .iter()
            .map(|v| {
                v.parse::<f64>()
                    .map_err(|_| Error::Data(format!("line {line}: cannot parse '{v}' as a number")))
            })
            .collect::<Result<Vec<f64>>>()?;
        if values.iter().all(|v| v.is_finite()) {
            rows.push((line, values));
        } else {
            dropped += 1;
        }
    }
    if rows.is_empty() {
        return Err(Error::Data("no data rows".into()));
    }
    let mut prev: Option<f64> = None;
    let t = columns.get("t").copied();
    if let Some(t) = t {
        for (line, v) in &rows {
            if prev.is_some_and(|p| v[t] <= p) {
                return Err(Error::Data(format!("line {line}: timestamp {} is not after the previous row", v[t])));
            }
            prev = Some(v[t]);
        }
    }
    Ok(Table { columns, rows, dropped })
}

impl Table {
    fn require(&self, name: &str) -> Result<usize> {
        self.columns
            .get(name)
            .copied()
            .ok_or_else(|| Error::Data(format!("missing column '{name}'")))
    }

    fn indexed(&self, prefix: &str) -> Vec<usize> {
        (0..)
            .map_while(|k| self.columns.get(&format!("{prefix}_{k}")).copied())
            .collect()
    }
}

fn meta_for(path: Option<&Path>, dropped: usize) -> DatasetMeta {
    DatasetMeta {
        shaft: path
            .and_then(|p| p.file_stem())
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "shaft".into()),
        sample_rate: 0.0,
        derived_acceleration: false,
        dropped_rows: dropped,
    }
}

pub fn read_dataset<R: Read>(reader: R, shaft: Option<&Path>) -> Result<Dataset> {
    let table = read_table(reader)?;
    let t = table.require("t")?;
    let pwm = table.require("pwm")?;
    let omega = table.require("omega")?;
    let tau = table.require("tau")?;
    let omega_dot = table.columns.get("omega_dot").copied();
    let samples = table
        .rows
        .iter()
        .map(|(_, v)| Sample {
            t: v[t],
            pwm: v[pwm],
            omega: v[omega],
            omega_dot: omega_dot.map_or(0.0, |i| v[i]),
            tau: v[tau],
        })
        .collect();
    let d = Dataset::new(samples, meta_for(shaft, table.dropped))?;
    Ok(if omega_dot.is_none() {
        d.with_derived_acceleration(DEFAULT_ACCEL_WINDOW)
    } else {
        d
    })
}

pub fn load_dataset(path: &Path) -> Result<Dataset> {
    let f = std::fs::File::open(path)?;
    read_dataset(f, Some(path))
}

pub fn read_coupled_dataset<R: Read>(reader: R, shaft: Option<&Path>) -> Result<CoupledDataset> {
    let table = read_table(reader)?;
    let t = table.require("t")?;
    let pwm = table.indexed("pwm");
    let n = pwm.len();
    if n == 0 {
        return Err(Error::Data("missing column 'pwm_0'".into()));
    }
    let omega_j = table.indexed("omega_j");
    let tau_j = table.indexed("tau_j");
    let omega_m = table.indexed("omega_m");
    let omega_dot_j = table.indexed("omega_dot_j");
    for (name, cols, optional) in [
        ("omega_j", &omega_j, false),
        ("tau_j", &tau_j, false),
        ("omega_m", &omega_m, true),
        ("omega_dot_j", &omega_dot_j, true),
    ] {
        if !(cols.len() == n || (optional && cols.is_empty())) {
            return Err(Error::Data(format!("expected {n} '{name}_*' columns, found {}", cols.len())));
        }
    }
    let pick = |v: &[f64], cols: &[usize]| cols.iter().map(|&c| v[c]).collect::<Vec<f64>>();
    let samples = table
        .rows
        .iter()
        .map(|(_, v)| CoupledSample {
            t: v[t],
            pwm: pick(v, &pwm),
            omega_j: pick(v, &omega_j),
            tau_j: pick(v, &tau_j),
            omega_dot_j: (!omega_dot_j.is_empty()).then(|| pick(v, &omega_dot_j)),
            omega_m: (!omega_m.is_empty()).then(|| pick(v, &omega_m)),
        })
        .collect();
    CoupledDataset::new(n, samples, meta_for(shaft, table.dropped))
}

pub fn load_coupled_dataset(path: &Path) -> Result<CoupledDataset> {
    let f = std::fs::File::open(path)?;
    read_coupled_dataset(f, Some(path))
}

pub fn write_dataset<W: Write>(d: &Dataset, w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["t", "pwm", "omega", "omega_dot", "tau"])?;
    for s in d {
        wtr.write_record([s.t, s.pwm, s.omega, s.omega_dot, s.tau].map(|v| v.to_string()))?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn write_coupled_dataset<W: Write>(d: &CoupledDataset, w: W) -> Result<()> {
    let n = d.channels();
    let mut header = vec!["t".to_string()];
    let with_m = d.has_motor_encoders();
    let with_acc = d.has_acceleration();
    let mut groups = vec!["pwm", "omega_j", "tau_j"];
    if with_m {
        groups.push("omega_m");
    }
    if with_acc {
        groups.push("omega_dot_j");
    }
    for g in &groups {
        header.extend((0..n).map(|k| format!("{g}_{k}")));
    }
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(&header)?;
    for s in d.samples() {
        let mut row = vec![s.t];
        row.extend(&s.pwm);
        row.extend(&s.omega_j);
        row.extend(&s.tau_j);
        if let Some(m) = &s.omega_m {
            row.extend(m);
        }
        if let Some(a) = &s.omega_dot_j {
            row.extend(a);
        }
        wtr.write_record(row.iter().map(|v| v.to_string()))?;
    }
    wtr.flush()?;
    Ok(())
}

fn to_bytes(f: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    Ok(buf)
}

pub fn save_dataset(d: &Dataset, path: &Path) -> Result<()> {
    write_atomic(path, &to_bytes(|b| write_dataset(d, b))?)
}

pub fn save_coupled_dataset(d: &CoupledDataset, path: &Path) -> Result<()> {
    write_atomic(path, &to_bytes(|b| write_coupled_dataset(d, b))?)
}

/// Plotting contract for a friction fit: `omega,tau_model,tau_measured`.
pub fn write_curve<W: Write>(points: &[CurvePoint], w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["omega", "tau_model", "tau_measured"])?;
    for p in points {
        wtr.write_record([p.omega, p.tau_model, p.tau_measured].map(|v| v.to_string()))?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn save_curve(points: &[CurvePoint], path: &Path) -> Result<()> {
    write_atomic(path, &to_bytes(|b| write_curve(points, b))?)
}
