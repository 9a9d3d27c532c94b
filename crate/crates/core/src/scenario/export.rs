use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{OutputSpec, ScenarioReport};
use crate::error::{Error, Result};
use crate::model::{control_coefficient, linear_entropy, ScaledParams, SegmentKind, Trajectory};

pub const CSV_HEADER: &str = "t,y,z,u,phase,S_l,mu_eff";

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(Error::Parse(format!(
                "unknown format `{other}` (expected csv or json)"
            ))),
        }
    }
}

/// One parsed row of a trajectory file.
#[derive(Clone, Debug, PartialEq)]
pub struct CsvRow {
    pub t: f64,
    pub y: f64,
    pub z: f64,
    pub u: f64,
    pub phase: SegmentKind,
    pub s_l: f64,
    pub mu_eff: f64,
}

/// Nine significant digits.
fn fmt9(x: f64) -> String {
    format!("{x:.8e}")
}

fn row_values<'a>(
    traj: &'a Trajectory,
    p: &ScaledParams,
) -> impl Iterator<Item = ([f64; 4], SegmentKind, [f64; 2])> + 'a {
    let p = *p;
    traj.samples.iter().map(move |s| {
        (
            [s.t, s.state.y, s.state.z, s.u],
            s.phase,
            [linear_entropy(s.state), control_coefficient(s.state, &p)],
        )
    })
}

pub fn render_trajectory_csv(traj: &Trajectory, p: &ScaledParams) -> String {
    let mut out = String::with_capacity(96 * (traj.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for (a, phase, b) in row_values(traj, p) {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            fmt9(a[0]),
            fmt9(a[1]),
            fmt9(a[2]),
            fmt9(a[3]),
            phase.token(),
            fmt9(b[0]),
            fmt9(b[1])
        );
    }
    out
}

/// Same rounded numbers as the CSV. Non-finite values become strings.
fn json_number(x: f64) -> Value {
    let rounded: f64 = fmt9(x).parse().expect("formatted float parses");
    if rounded.is_finite() {
        json!(rounded)
    } else {
        json!(fmt9(x))
    }
}

pub fn render_trajectory_json(traj: &Trajectory, p: &ScaledParams) -> String {
    let rows: Vec<Value> = row_values(traj, p)
        .map(|(a, phase, b)| {
            json!([
                json_number(a[0]),
                json_number(a[1]),
                json_number(a[2]),
                json_number(a[3]),
                phase.token(),
                json_number(b[0]),
                json_number(b[1])
            ])
        })
        .collect();
    let columns: Vec<&str> = CSV_HEADER.split(',').collect();
    let doc = json!({ "columns": columns, "rows": rows });
    serde_json::to_string_pretty(&doc).expect("json values serialize") + "\n"
}

pub fn write_trajectory(
    traj: &Trajectory,
    p: &ScaledParams,
    path: &Path,
    format: Format,
) -> Result<()> {
    let text = match format {
        Format::Csv => render_trajectory_csv(traj, p),
        Format::Json => render_trajectory_json(traj, p),
    };
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn write_report_json(report: &ScenarioReport, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(report)
        .map_err(|e| Error::Parse(format!("report serialization: {e}")))?;
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

/// `out.csv` → `out.report.json`.
pub fn report_path(trajectory_path: &Path) -> PathBuf {
    trajectory_path.with_extension("report.json")
}

/// Writes the trajectory and its report; returns both paths.
pub fn export(
    traj: &Trajectory,
    report: &ScenarioReport,
    spec: &OutputSpec,
) -> Result<(PathBuf, PathBuf)> {
    write_trajectory(traj, &report.diagnostics.params, &spec.path, spec.format)?;
    let rp = report_path(&spec.path);
    write_report_json(report, &rp)?;
    Ok((spec.path.clone(), rp))
}

pub fn parse_trajectory_csv(text: &str) -> Result<Vec<CsvRow>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == CSV_HEADER => {}
        other => {
            return Err(Error::Parse(format!(
                "expected header `{CSV_HEADER}`, found {other:?}"
            )))
        }
    }
    lines
        .enumerate()
        .filter(|(_, l)| !l.is_empty())
        .map(|(i, line)| {
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 7 {
                return Err(Error::Parse(format!(
                    "line {}: expected 7 columns, found {}",
                    i + 2,
                    cols.len()
                )));
            }
            let num = |k: usize| {
                cols[k]
                    .parse::<f64>()
                    .map_err(|e| Error::Parse(format!("line {}: `{}`: {e}", i + 2, cols[k])))
            };
            Ok(CsvRow {
                t: num(0)?,
                y: num(1)?,
                z: num(2)?,
                u: num(3)?,
                phase: cols[4].parse()?,
                s_l: num(5)?,
                mu_eff: num(6)?,
            })
        })
        .collect()
}

pub fn read_trajectory_csv(path: &Path) -> Result<Vec<CsvRow>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_trajectory_csv(&text)
}
