//! Plain-text persistence: trajectory CSV, diagnostics sidecar, two-column
//! curve files and a gnuplot stub.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{Field, Grid, ProblemParams};
use crate::regularization::{build_cutoff_g, build_cutoff_h, RegularizationSpec};
use crate::solver::{Event, StepDiagnostics, Trajectory};
use crate::verify::EstimateReport;

/// 17 significant digits, enough to round-trip any `f64`.
pub fn format_number(v: f64) -> String {
    format!("{v:.16e}")
}

/// Header `t,x_0,...,x_{n-1}` then one row per snapshot.
pub fn trajectory_csv(traj: &Trajectory) -> String {
    let n = traj.grid.len();
    let mut out = String::with_capacity((traj.snapshots.len() + 1) * (n + 1) * 24);
    out.push('t');
    for i in 0..n {
        let _ = write!(out, ",x_{i}");
    }
    out.push('\n');
    for snap in &traj.snapshots {
        out.push_str(&format_number(snap.time()));
        for v in snap.values() {
            out.push(',');
            out.push_str(&format_number(*v));
        }
        out.push('\n');
    }
    out
}

pub fn write_trajectory_csv(traj: &Trajectory, path: &Path) -> Result<()> {
    fs::write(path, trajectory_csv(traj))?;
    Ok(())
}

fn parse_number(s: &str) -> Result<f64> {
    s.trim()
        .parse()
        .map_err(|_| Error::InvalidField(format!("not a number: {s:?}")))
}

/// Inverse of [`trajectory_csv`].
pub fn parse_trajectory_csv(text: &str) -> Result<Vec<Field>> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| Error::InvalidField("empty trajectory file".into()))?;
    let n = header.split(',').count() - 1;
    let grid = Grid::new(n)?;
    lines
        .filter(|l| !l.trim().is_empty())
        .map(|line| {
            let cells = line.split(',').map(parse_number).collect::<Result<Vec<f64>>>()?;
            if cells.len() != n + 1 {
                return Err(Error::GridMismatch(cells.len() - 1, n));
            }
            Field::new(grid, cells[1..].to_vec(), cells[0])
        })
        .collect()
}

pub fn read_trajectory_csv(path: &Path) -> Result<Vec<Field>> {
    parse_trajectory_csv(&fs::read_to_string(path)?)
}

#[derive(Serialize)]
struct DiagnosticsFile<'a> {
    params: &'a ProblemParams,
    n: usize,
    theta: f64,
    corridor: Option<&'a RegularizationSpec>,
    events: &'a [Event],
    steps: &'a [StepDiagnostics],
}

pub fn diagnostics_json(traj: &Trajectory) -> Result<String> {
    let file = DiagnosticsFile {
        params: &traj.params,
        n: traj.grid.len(),
        theta: traj.theta,
        corridor: traj.corridor.as_ref(),
        events: &traj.events,
        steps: &traj.diagnostics,
    };
    Ok(serde_json::to_string_pretty(&file)?)
}

pub fn write_diagnostics_json(traj: &Trajectory, path: &Path) -> Result<()> {
    fs::write(path, diagnostics_json(traj)?)?;
    Ok(())
}

/// Two-column CSV with the given header.
pub fn curve_csv(header: (&str, &str), points: impl IntoIterator<Item = (f64, f64)>) -> String {
    let mut out = format!("{},{}\n", header.0, header.1);
    for (a, b) in points {
        let _ = writeln!(out, "{},{}", format_number(a), format_number(b));
    }
    out
}

/// Parses any numeric CSV with a header row into rows of numbers.
pub fn parse_numeric_csv(text: &str) -> Result<Vec<Vec<f64>>> {
    text.lines()
        .skip(1)
        .filter(|l| !l.trim().is_empty())
        .map(|l| l.split(',').map(parse_number).collect())
        .collect()
}

/// Writes `<stem>_observed.csv` and `<stem>_bound.csv` into `dir`.
pub fn write_report_curves(report: &EstimateReport, dir: &Path, stem: &str) -> Result<()> {
    fs::create_dir_all(dir)?;
    let observed = report.times.iter().copied().zip(report.observed.iter().copied());
    let bound = report.times.iter().copied().zip(report.bound.iter().copied());
    fs::write(dir.join(format!("{stem}_observed.csv")), curve_csv(("t", "observed"), observed))?;
    fs::write(dir.join(format!("{stem}_bound.csv")), curve_csv(("t", "bound"), bound))?;
    Ok(())
}

/// Samples `(r, h(r), g(r))` at `count` points on `[lo, hi]`.
pub fn cutoff_csv(params: &ProblemParams, spec: &RegularizationSpec, lo: f64, hi: f64, count: usize) -> Result<String> {
    let h = build_cutoff_h(params, spec)?;
    let g = build_cutoff_g(params, spec)?;
    let last = count.max(2) - 1;
    let mut out = String::from("r,h,g\n");
    for i in 0..=last {
        let r = lo + (hi - lo) * i as f64 / last as f64;
        let _ = writeln!(out, "{},{},{}", format_number(r), format_number(h.evaluate(r)), format_number(g.evaluate(r)));
    }
    Ok(out)
}

/// Gnuplot script plotting every two-column CSV in `curves/`.
pub fn gnuplot_stub(curve_files: &[String]) -> String {
    let mut out = String::from("set datafile separator ','\nset key autotitle columnhead\nset xlabel 't'\n");
    if curve_files.is_empty() {
        return out;
    }
    out.push_str("plot ");
    let entries: Vec<String> = curve_files
        .iter()
        .map(|f| format!("'curves/{f}' using 1:2 with lines"))
        .collect();
    out.push_str(&entries.join(", \\\n     "));
    out.push('\n');
    out
}
