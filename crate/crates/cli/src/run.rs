//! Command execution and the on-disk run layout
//! `<root>/<run_id>/{config.json, trajectory.csv, diagnostics.json, report.json, curves/*.csv, plot.gp}`.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use sdl_core::bounds::BoundCurve;
use sdl_core::io::{
    curve_csv, cutoff_csv, gnuplot_stub, write_diagnostics_json, write_report_curves, write_trajectory_csv,
};
use sdl_core::model::{bump_profile, make_initial, validate_params, Field, RawParams};
use sdl_core::regularization::{corridor_schedule, mollify_initial};
use sdl_core::solver::{solve_regularized, solve_singular, DeltaConvergenceRecord, SolveOptions, Trajectory};
use sdl_core::verify::{
    check_contraction, check_dependence, check_energy, check_gradient, check_linfty, check_mass,
    delta_convergence_study, epsilon_grid, grid_convergence_study, DependenceRecord, EstimateReport,
};

use crate::config::{Command, RunConfig, Validated};
use crate::CliError;

/// Mollification schedule used when the data vanishes and none is given.
pub const DEFAULT_SCHEDULE: [f64; 4] = [0.08, 0.04, 0.02, 0.01];

/// Perturbation amplitudes for the dependence family.
pub const DEPENDENCE_AMPLITUDES: [f64; 3] = [1e-1, 1e-2, 1e-3];

#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub command: Command,
    pub run_id: String,
    pub directory: Option<PathBuf>,
    pub checks: usize,
    pub failed: usize,
    /// Smallest `margin / tolerance` over the checks, if any ran.
    pub worst_margin: Option<f64>,
    #[serde(skip)]
    pub solver_faults: usize,
}

impl RunSummary {
    fn new(command: Command, cfg: &RunConfig, directory: Option<PathBuf>) -> Self {
        Self {
            command,
            run_id: cfg.outputs.run_id.clone(),
            directory,
            checks: 0,
            failed: 0,
            worst_margin: None,
            solver_faults: 0,
        }
    }

    fn record(&mut self, reports: &[EstimateReport]) {
        for r in reports {
            self.checks += 1;
            self.failed += !r.pass as usize;
            let scaled = if r.tolerance > 0.0 { r.margin / r.tolerance } else { r.margin };
            self.worst_margin = Some(self.worst_margin.map_or(scaled, |w: f64| w.min(scaled)));
        }
    }

    pub fn exit_code(&self) -> i32 {
        if self.solver_faults > 0 {
            3
        } else if self.failed > 0 {
            2
        } else {
            0
        }
    }

    pub fn line(&self) -> String {
        let mut out = format!("{} {}: ", self.command.name(), self.run_id);
        if self.checks > 0 {
            out.push_str(&format!("{}/{} checks passed", self.checks - self.failed, self.checks));
            if let Some(w) = self.worst_margin {
                out.push_str(&format!(", worst margin/tolerance {w:.3e}"));
            }
        } else {
            out.push_str("ok");
        }
        if self.solver_faults > 0 {
            out.push_str(&format!(", {} solver faults", self.solver_faults));
        }
        if let Some(dir) = &self.directory {
            out.push_str(&format!(" -> {}", dir.display()));
        }
        out
    }
}

/// Loads, validates and executes `config_path` as `command`. A `command`
/// named in the config must match, except under `validate`.
pub fn run(command: Command, config_path: &Path, force: bool, workers: Option<usize>) -> Result<RunSummary, CliError> {
    let cfg = RunConfig::load(config_path)?;
    if let Some(named) = cfg.command {
        if named != command && command != Command::Validate {
            return Err(CliError::Config(format!(
                "config names command `{}` but `{}` was requested",
                named.name(),
                command.name()
            )));
        }
    }
    let v = cfg.validate()?;
    if command == Command::Validate {
        return Ok(RunSummary::new(command, &v.config, None));
    }
    let dir = prepare_run_dir(&v.config.output_root(), &v.config.outputs.run_id, force)?;
    fs::write(dir.join("config.json"), serde_json::to_string_pretty(&v.config).map_err(io_json)?)?;
    let mut summary = RunSummary::new(command, &v.config, Some(dir.clone()));
    match command {
        Command::Validate => unreachable!(),
        Command::Solve => solve_command(&v, &dir)?,
        Command::Verify => verify_command(&v, &dir, &mut summary)?,
        Command::Converge => converge_command(&v, &dir)?,
        Command::Depend => depend_command(&v, &dir, &mut summary)?,
        Command::Sweep => sweep_command(&v, &dir, &mut summary, workers)?,
    }
    Ok(summary)
}

fn io_json(e: serde_json::Error) -> CliError {
    CliError::Io(std::io::Error::other(e))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    fs::write(path, serde_json::to_string_pretty(value).map_err(io_json)?)?;
    Ok(())
}

/// Creates `<root>/<run_id>`, refusing to reuse it unless `force` is set.
pub fn prepare_run_dir(root: &Path, run_id: &str, force: bool) -> Result<PathBuf, CliError> {
    let dir = root.join(run_id);
    if dir.exists() {
        if !force {
            return Err(CliError::Config(format!(
                "{} already exists; pass --force to overwrite",
                dir.display()
            )));
        }
        fs::remove_dir_all(&dir)?;
    }
    fs::create_dir_all(dir.join("curves"))?;
    Ok(dir)
}

fn options(v: &Validated) -> SolveOptions {
    SolveOptions::new(v.config.stepping).with_stride(v.config.outputs.stride)
}

fn schedule(v: &Validated) -> Vec<f64> {
    if v.config.schedule.is_empty() {
        DEFAULT_SCHEDULE.to_vec()
    } else {
        v.config.schedule.clone()
    }
}

fn initial(v: &Validated) -> Result<Field, CliError> {
    make_initial(&v.config.initial, v.grid, &v.params).map_err(CliError::from_core)
}

/// Regularized solve for positive data, two-phase mollified solve otherwise.
fn trajectory(v: &Validated, u0: &Field) -> Result<(Trajectory, Option<DeltaConvergenceRecord>), CliError> {
    let opts = options(v);
    let horizon = v.params.horizon();
    if u0.min() > 0.0 {
        let corridor = corridor_schedule(&v.params, u0, None).map_err(CliError::from_core)?;
        let traj = solve_regularized(u0, &v.params, corridor, &opts, horizon).map_err(CliError::from_core)?;
        Ok((traj, None))
    } else {
        let (traj, record) =
            solve_singular(u0, &v.params, &schedule(v), &opts, horizon, None).map_err(CliError::from_core)?;
        Ok((traj, Some(record)))
    }
}

fn write_trajectory(v: &Validated, dir: &Path, traj: &Trajectory) -> Result<(), CliError> {
    write_trajectory_csv(traj, &dir.join("trajectory.csv")).map_err(CliError::from_core)?;
    write_diagnostics_json(traj, &dir.join("diagnostics.json")).map_err(CliError::from_core)?;
    let curves = dir.join("curves");
    let mut names = Vec::new();
    let mut emit = |name: &str, header: (&str, &str), points: Vec<(f64, f64)>| -> Result<(), CliError> {
        fs::write(curves.join(name), curve_csv(header, points))?;
        names.push(name.to_string());
        Ok(())
    };
    emit("c0_bound.csv", ("t", "bound"), BoundCurve::c0(v.params).sample(201))?;
    if let Ok(lower) = BoundCurve::mass_lower(v.params, traj.initial()) {
        emit("mass_lower_bound.csv", ("t", "bound"), lower.sample(201))?;
    }
    emit("max.csv", ("t", "max"), traj.diagnostics.iter().map(|d| (d.t, d.max)).collect())?;
    emit("mass.csv", ("t", "mass"), traj.diagnostics.iter().map(|d| (d.t, d.mass)).collect())?;
    emit("boundary_flux.csv", ("t", "flux"), traj.diagnostics.iter().map(|d| (d.t, d.boundary_flux)).collect())?;
    if let Some(corridor) = &traj.corridor {
        let hi = 2.5 * corridor.m_bar;
        let text = cutoff_csv(&v.params, corridor, -0.5 * hi, hi, 401).map_err(CliError::from_core)?;
        fs::write(curves.join("cutoffs.csv"), text)?;
    }
    if v.config.outputs.emit_plots {
        fs::write(dir.join("plot.gp"), gnuplot_stub(&names))?;
    }
    Ok(())
}

fn solve_command(v: &Validated, dir: &Path) -> Result<(), CliError> {
    let u0 = initial(v)?;
    let (traj, record) = trajectory(v, &u0)?;
    write_trajectory(v, dir, &traj)?;
    if let Some(record) = record {
        write_json(&dir.join("delta_convergence.json"), &record)?;
    }
    Ok(())
}

/// `u * (1 - eps * phi)` with a unit bump `phi` centered at 0.4.
fn perturbed(u: &Field, eps: f64) -> Result<Field, CliError> {
    let grid = u.grid();
    let values = grid
        .nodes()
        .zip(u.values())
        .map(|(x, a)| a * (1.0 - eps * bump_profile((x - 0.4) / 0.25)))
        .collect();
    Field::new(grid, values, u.time()).map_err(CliError::from_core)
}

fn dependence(v: &Validated, base: &Field) -> Result<DependenceRecord, CliError> {
    let pairs = DEPENDENCE_AMPLITUDES
        .iter()
        .map(|&eps| Ok((base.clone(), perturbed(base, eps)?)))
        .collect::<Result<Vec<_>, CliError>>()?;
    let horizon = v.params.horizon();
    check_dependence(&pairs, &v.params, &options(v), 0.1 * horizon, horizon).map_err(CliError::from_core)
}

#[derive(Serialize)]
struct ReportFile<'a> {
    run_id: &'a str,
    command: Command,
    passed: usize,
    failed: usize,
    reports: &'a [EstimateReport],
}

fn write_reports(v: &Validated, dir: &Path, command: Command, reports: &[EstimateReport]) -> Result<(), CliError> {
    let failed = reports.iter().filter(|r| !r.pass).count();
    let file = ReportFile {
        run_id: &v.config.outputs.run_id,
        command,
        passed: reports.len() - failed,
        failed,
        reports,
    };
    write_json(&dir.join("report.json"), &file)?;
    for r in reports {
        let stem = serde_json::to_value(r.lemma).map_err(io_json)?;
        let stem = stem.as_str().unwrap_or("report").to_lowercase();
        write_report_curves(r, &dir.join("curves"), &stem).map_err(CliError::from_core)?;
    }
    Ok(())
}

fn verify_command(v: &Validated, dir: &Path, summary: &mut RunSummary) -> Result<(), CliError> {
    let u0 = initial(v)?;
    let (traj, record) = trajectory(v, &u0)?;
    write_trajectory(v, dir, &traj)?;
    let start = traj.initial().clone();
    let horizon = v.params.horizon();
    let exclude = record.as_ref().map(|r| 10.0 * r.deltas.last().copied().unwrap_or(0.0));

    let other = perturbed(&start, 0.1)?;
    let corridor = corridor_schedule(&v.params, &other, None).map_err(CliError::from_core)?;
    let other_traj = solve_regularized(&other, &v.params, corridor, &options(v), horizon).map_err(CliError::from_core)?;
    let base_traj = if record.is_some() {
        let corridor = corridor_schedule(&v.params, &start, None).map_err(CliError::from_core)?;
        solve_regularized(&start, &v.params, corridor, &options(v), horizon).map_err(CliError::from_core)?
    } else {
        traj.clone()
    };

    let dep = dependence(v, &start)?;
    let tol = epsilon_grid(&v.params, v.grid, v.config.stepping.dt_max);
    let reports = vec![
        check_linfty(&traj, &v.params),
        check_gradient(&traj, &[0.25 * horizon, 0.5 * horizon, horizon]).report,
        check_mass(&traj, &v.params, &start).map_err(CliError::from_core)?,
        check_contraction(&base_traj, &other_traj, &v.params).map_err(CliError::from_core)?,
        dep.report(&v.params, tol),
        check_energy(&traj, &v.params, exclude).map_err(CliError::from_core)?,
    ];
    write_json(&dir.join("dependence.json"), &dep)?;
    if let Some(record) = record {
        write_json(&dir.join("delta_convergence.json"), &record)?;
    }
    write_reports(v, dir, Command::Verify, &reports)?;
    summary.record(&reports);
    Ok(())
}

fn converge_command(v: &Validated, dir: &Path) -> Result<(), CliError> {
    let u0 = initial(v)?;
    let opts = options(v).with_stride(usize::MAX);
    let t_probe = 0.1 * v.params.horizon();
    let deltas = schedule(v);
    let positive = u0.min() > 0.0;
    let mut out = serde_json::Map::new();
    if deltas.len() >= 2 {
        let table = delta_convergence_study(&u0, &v.params, &deltas, t_probe, &opts).map_err(CliError::from_core)?;
        let points = table.deltas.iter().copied().skip(1).zip(table.l1.iter().copied());
        fs::write(dir.join("curves").join("delta_l1.csv"), curve_csv(("delta", "l1"), points))?;
        out.insert("delta".into(), serde_json::to_value(&table).map_err(io_json)?);
    }
    let n = v.grid.len();
    let n_list = [n, 2 * n - 1, 4 * n - 3];
    let mollify = (!positive).then(|| *deltas.last().expect("nonempty schedule"));
    let study = grid_convergence_study(&v.config.initial, &v.params, &n_list, &opts, t_probe, mollify)
        .map_err(CliError::from_core)?;
    out.insert("grid".into(), serde_json::to_value(&study).map_err(io_json)?);
    write_json(&dir.join("convergence.json"), &out)
}

fn depend_command(v: &Validated, dir: &Path, summary: &mut RunSummary) -> Result<(), CliError> {
    let u0 = initial(v)?;
    let base = if u0.min() > 0.0 {
        u0
    } else {
        mollify_initial(&u0, &v.params, *schedule(v).last().expect("nonempty schedule")).map_err(CliError::from_core)?
    };
    let dep = dependence(v, &base)?;
    let tol = epsilon_grid(&v.params, v.grid, v.config.stepping.dt_max);
    let reports = vec![dep.report(&v.params, tol)];
    write_json(&dir.join("dependence.json"), &dep)?;
    write_reports(v, dir, Command::Depend, &reports)?;
    summary.record(&reports);
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
struct SweepCell {
    m: f64,
    p: f64,
    alpha: f64,
    status: String,
    linfty_margin: f64,
    mass_margin: f64,
    energy_margin: f64,
    pass: bool,
}

fn sweep_cell(v: &Validated, m: f64, p: f64, alpha: f64) -> (SweepCell, Vec<EstimateReport>, bool) {
    let mut cell = SweepCell {
        m,
        p,
        alpha,
        status: String::new(),
        linfty_margin: f64::NAN,
        mass_margin: f64::NAN,
        energy_margin: f64::NAN,
        pass: false,
    };
    let raw = RawParams { m, p, alpha, ..v.config.params.clone() };
    let params = match validate_params(&raw) {
        Ok(params) => params,
        Err(e) => {
            cell.status = format!("rejected: {e}");
            return (cell, Vec::new(), false);
        }
    };
    let cell_v = Validated {
        params,
        ..v.clone()
    };
    let result = initial(&cell_v).and_then(|u0| trajectory(&cell_v, &u0)).and_then(|(traj, record)| {
        let exclude = record.as_ref().map(|r| 10.0 * r.deltas.last().copied().unwrap_or(0.0));
        Ok(vec![
            check_linfty(&traj, &params),
            check_mass(&traj, &params, traj.initial()).map_err(CliError::from_core)?,
            check_energy(&traj, &params, exclude).map_err(CliError::from_core)?,
        ])
    });
    match result {
        Ok(reports) => {
            cell.linfty_margin = reports[0].margin;
            cell.mass_margin = reports[1].margin;
            cell.energy_margin = reports[2].margin;
            cell.pass = reports.iter().all(|r| r.pass);
            cell.status = "ok".into();
            (cell, reports, false)
        }
        Err(e) => {
            cell.status = e.to_string();
            (cell, Vec::new(), e.exit_code() == 3)
        }
    }
}

fn sweep_command(v: &Validated, dir: &Path, summary: &mut RunSummary, workers: Option<usize>) -> Result<(), CliError> {
    let axes = v
        .config
        .sweep
        .clone()
        .ok_or_else(|| CliError::Config("sweep requires a `sweep` block".into()))?;
    let mut cells = Vec::new();
    for &m in &axes.m {
        for &p in &axes.p {
            for &alpha in &axes.alpha {
                cells.push((m, p, alpha));
            }
        }
    }
    let threads = workers
        .or_else(|| std::thread::available_parallelism().ok().map(|n| n.get()))
        .unwrap_or(1);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Config(format!("cannot build worker pool: {e}")))?;
    let results: Vec<(SweepCell, Vec<EstimateReport>, bool)> =
        pool.install(|| cells.par_iter().map(|&(m, p, alpha)| sweep_cell(v, m, p, alpha)).collect());

    let mut csv = String::from("m,p,alpha,status,linfty_margin,mass_margin,energy_margin,pass\n");
    for (cell, reports, fault) in &results {
        csv.push_str(&format!(
            "{},{},{},{},{:e},{:e},{:e},{}\n",
            cell.m,
            cell.p,
            cell.alpha,
            cell.status.replace(',', ";"),
            cell.linfty_margin,
            cell.mass_margin,
            cell.energy_margin,
            cell.pass
        ));
        summary.record(reports);
        summary.solver_faults += *fault as usize;
    }
    fs::write(dir.join("sweep.csv"), csv)?;
    let cells: Vec<&SweepCell> = results.iter().map(|r| &r.0).collect();
    write_json(&dir.join("sweep.json"), &cells)
}
