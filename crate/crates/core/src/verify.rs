//! Estimate checks on computed trajectories and the comparative studies
//! (contraction, continuous dependence, mollification and grid refinement).
//!
//! Every check produces an [`EstimateReport`] holding the observed curve,
//! the bound curve and the signed margin; `pass` is `margin >= -tolerance`.

use rayon::prelude::*;
use serde::Serialize;

use crate::bounds::{c0_bound, energy_bound, mass_lower_bound, q_exponent};
use crate::error::{Error, Result};
use crate::model::{make_initial, Field, Grid, InitialSpec, ProblemParams};
use crate::regularization::{corridor_schedule, mollify_initial};
use crate::solver::{solve_mollified_levels, solve_regularized, SolveOptions, StepDiagnostics, Trajectory};

/// Multiplier in the default tolerance `C_tol (dx^2 + dt) max(1, C_0(T))`.
pub const DEFAULT_TOLERANCE_FACTOR: f64 = 5.0;

/// `factor (dx^2 + dt) max(1, C_0(T))`.
pub fn tolerance(params: &ProblemParams, grid: Grid, dt: f64, factor: f64) -> f64 {
    let dx = grid.dx();
    factor * (dx * dx + dt) * c0_bound(params, params.horizon()).max(1.0)
}

/// The default grid tolerance with `C_tol = 5`.
pub fn epsilon_grid(params: &ProblemParams, grid: Grid, dt: f64) -> f64 {
    tolerance(params, grid, dt, DEFAULT_TOLERANCE_FACTOR)
}

fn nominal_dt(traj: &Trajectory) -> f64 {
    traj.diagnostics.iter().map(|d| d.dt).fold(0.0, f64::max)
}

fn same_grid(f: &Field, g: &Field) -> Result<Grid> {
    if f.grid() != g.grid() {
        return Err(Error::GridMismatch(f.grid().len(), g.grid().len()));
    }
    Ok(f.grid())
}

/// `\int_0^1 |f - g| dx` by the trapezoid rule.
pub fn l1_distance(f: &Field, g: &Field) -> Result<f64> {
    let grid = same_grid(f, g)?;
    let diff: Vec<f64> = f.values().iter().zip(g.values()).map(|(a, b)| (a - b).abs()).collect();
    Ok(grid.integrate(&diff))
}

pub fn sup_distance(f: &Field, g: &Field) -> Result<f64> {
    same_grid(f, g)?;
    Ok(f.values().iter().zip(g.values()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
}

/// Largest centered difference of `u^{m/q}` over interior nodes.
pub fn transformed_gradient_sup(f: &Field, m: f64) -> Result<f64> {
    f.ensure_positive()?;
    let ratio = m / q_exponent(m);
    let dx = f.grid().dx();
    let v: Vec<f64> = f.values().iter().map(|u| u.powf(ratio)).collect();
    Ok(v.windows(3).map(|w| ((w[2] - w[0]) / (2.0 * dx)).abs()).fold(0.0, f64::max))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Lemma {
    #[serde(rename = "L1_Linfty")]
    Linfty,
    #[serde(rename = "L2_gradient")]
    Gradient,
    #[serde(rename = "L3_mass")]
    Mass,
    #[serde(rename = "L4_contraction")]
    Contraction,
    #[serde(rename = "Thm_dependence")]
    Dependence,
    #[serde(rename = "Eq26_energy")]
    Energy,
}

#[derive(Debug, Clone, Serialize)]
pub struct EstimateReport {
    pub lemma: Lemma,
    pub times: Vec<f64>,
    pub observed: Vec<f64>,
    pub bound: Vec<f64>,
    /// Smallest signed slack; negative means the bound was exceeded.
    pub margin: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub note: String,
}

impl EstimateReport {
    /// Report for `observed <= bound`.
    pub fn upper(lemma: Lemma, times: Vec<f64>, observed: Vec<f64>, bound: Vec<f64>, tolerance: f64) -> Self {
        let margin = bound.iter().zip(&observed).map(|(b, o)| b - o).fold(f64::INFINITY, f64::min);
        Self::finish(lemma, times, observed, bound, margin, tolerance)
    }

    /// Report for `observed >= bound`.
    pub fn lower(lemma: Lemma, times: Vec<f64>, observed: Vec<f64>, bound: Vec<f64>, tolerance: f64) -> Self {
        let margin = bound.iter().zip(&observed).map(|(b, o)| o - b).fold(f64::INFINITY, f64::min);
        Self::finish(lemma, times, observed, bound, margin, tolerance)
    }

    fn finish(lemma: Lemma, times: Vec<f64>, observed: Vec<f64>, bound: Vec<f64>, margin: f64, tolerance: f64) -> Self {
        let pass = !margin.is_nan() && margin >= -tolerance;
        Self {
            lemma,
            times,
            observed,
            bound,
            margin,
            tolerance,
            pass,
            note: String::new(),
        }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = note.into();
        self
    }

    /// Time of the smallest slack.
    pub fn worst_time(&self) -> Option<f64> {
        let sign = match self.lemma {
            Lemma::Mass => -1.0,
            _ => 1.0,
        };
        self.times
            .iter()
            .zip(self.bound.iter().zip(&self.observed))
            .map(|(t, (b, o))| (*t, sign * (b - o)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(t, _)| t)
    }
}

/// `(t, value)` from per-step diagnostics merged with snapshot values, by time.
fn merged_series(traj: &Trajectory, from_diag: impl Fn(&StepDiagnostics) -> f64, from_field: impl Fn(&Field) -> f64) -> Vec<(f64, f64)> {
    let mut series: Vec<(f64, f64)> = traj.diagnostics.iter().map(|d| (d.t, from_diag(d))).collect();
    series.extend(traj.snapshots.iter().map(|f| (f.time(), from_field(f))));
    series.sort_by(|a, b| a.0.total_cmp(&b.0));
    series
}

/// Sup bound: running maximum against `C_0(t)`.
pub fn check_linfty(traj: &Trajectory, params: &ProblemParams) -> EstimateReport {
    let tol = epsilon_grid(params, traj.grid, nominal_dt(traj));
    let mut running = f64::NEG_INFINITY;
    let (mut times, mut observed, mut bound) = (Vec::new(), Vec::new(), Vec::new());
    for (t, max) in merged_series(traj, |d| d.max, Field::max) {
        running = running.max(max);
        times.push(t);
        observed.push(running);
        bound.push(c0_bound(params, t));
    }
    EstimateReport::upper(Lemma::Linfty, times, observed, bound, tol)
}

/// Energy line `\int u^{2-m-alpha} <= \int u_0^{2-m-alpha} + (alpha + m - 2) t`.
///
/// Rows with `min u < exclude_below` are skipped. The tolerance is the grid
/// tolerance scaled by `max(1, |k| min(u)^{k-1})`, the sensitivity of the
/// integrand `u^k` at the smallest sample.
pub fn check_energy(traj: &Trajectory, params: &ProblemParams, exclude_below: Option<f64>) -> Result<EstimateReport> {
    let u0 = traj.initial();
    u0.ensure_positive()?;
    let k = params.energy_exponent();
    let energy0 = crate::bounds::power_integral(u0, k);
    let floor = exclude_below.unwrap_or(0.0);
    let mut scale: f64 = 1.0;
    let (mut times, mut observed, mut bound) = (Vec::new(), Vec::new(), Vec::new());
    let mut excluded = 0;
    for d in &traj.diagnostics {
        if d.min < floor {
            excluded += 1;
            continue;
        }
        scale = scale.max(k.abs() * d.min.powf(k - 1.0));
        times.push(d.t);
        observed.push(d.energy);
        bound.push(energy_bound(params, energy0, d.t));
    }
    let tol = epsilon_grid(params, traj.grid, nominal_dt(traj)) * scale;
    let note = format!(
        "tolerance scaled by {scale:.6e} = max(1, |k| min(u)^(k-1)), k = {k}; {excluded} rows excluded with min u < {floor:e}"
    );
    Ok(EstimateReport::upper(Lemma::Energy, times, observed, bound, tol).with_note(note))
}

/// Mass lower bound computed from the trajectory's initial field.
pub fn check_mass(traj: &Trajectory, params: &ProblemParams, u0: &Field) -> Result<EstimateReport> {
    let tol = epsilon_grid(params, traj.grid, nominal_dt(traj));
    let mut times = Vec::new();
    let mut observed = Vec::new();
    let mut bound = Vec::new();
    for d in &traj.diagnostics {
        times.push(d.t);
        observed.push(d.mass);
        bound.push(mass_lower_bound(params, u0, d.t)?);
    }
    Ok(EstimateReport::lower(Lemma::Mass, times, observed, bound, tol))
}

/// Mass balance residual per step:
/// `|dM/dt + u(1)^{m-1+alpha} - \int u^p|` with the step's theta weighting.
pub fn mass_balance_residuals(traj: &Trajectory) -> Vec<(f64, f64)> {
    let theta = traj.theta;
    traj.diagnostics
        .windows(2)
        .filter(|w| w[1].dt > 0.0)
        .map(|w| {
            let (a, b) = (&w[0], &w[1]);
            let rate = (b.mass - a.mass) / b.dt;
            let balance = theta * (b.source_integral - b.boundary_flux)
                + (1.0 - theta) * (a.source_integral - a.boundary_flux);
            (b.t, (rate - balance).abs())
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct GradientCheck {
    /// `(T_k, C_hat(T_k))` for each nested horizon.
    pub constants: Vec<(f64, f64)>,
    pub monotone: bool,
    /// Indices `k` where `C_hat(T_{k+1}) > 10 C_hat(T_k)`.
    pub flagged_jumps: Vec<usize>,
    pub report: EstimateReport,
}

impl GradientCheck {
    /// Constant over the full trajectory.
    pub fn c_hat(&self) -> f64 {
        self.constants.last().map(|c| c.1).unwrap_or(0.0)
    }
}

fn c_hat_until(diagnostics: &[StepDiagnostics], horizon: f64) -> f64 {
    diagnostics
        .iter()
        .filter(|d| d.t > 0.0 && d.t <= horizon * (1.0 + 1e-12))
        .map(|d| d.grad_sup / (1.0 + d.t.powf(-0.5)))
        .fold(0.0, f64::max)
}

/// Empirical gradient constant `max sup|(u^{m/q})_x| / (1 + t^{-1/2})` for
/// nested horizons, and its monotonicity.
pub fn check_gradient(traj: &Trajectory, horizons: &[f64]) -> GradientCheck {
    let mut horizons: Vec<f64> = horizons.to_vec();
    horizons.sort_by(f64::total_cmp);
    if horizons.is_empty() {
        horizons.push(traj.end_time());
    }
    let constants: Vec<(f64, f64)> = horizons.iter().map(|&h| (h, c_hat_until(&traj.diagnostics, h))).collect();
    let monotone = constants.windows(2).all(|w| w[1].1 >= w[0].1);
    let flagged_jumps = constants
        .windows(2)
        .enumerate()
        .filter(|(_, w)| w[0].1 > 0.0 && w[1].1 > 10.0 * w[0].1)
        .map(|(i, _)| i)
        .collect();
    let c_hat = c_hat_until(&traj.diagnostics, f64::INFINITY);
    let rows: Vec<&StepDiagnostics> = traj.diagnostics.iter().filter(|d| d.t > 0.0).collect();
    let report = EstimateReport::upper(
        Lemma::Gradient,
        rows.iter().map(|d| d.t).collect(),
        rows.iter().map(|d| d.grad_sup).collect(),
        rows.iter().map(|d| c_hat * (1.0 + d.t.powf(-0.5))).collect(),
        0.0,
    );
    let pass = report.pass && monotone && c_hat.is_finite();
    let report = EstimateReport { pass, ..report }.with_note(format!("C_hat = {c_hat:.6e}"));
    GradientCheck {
        constants,
        monotone,
        flagged_jumps,
        report,
    }
}

/// `sup |(u^{m/q})_x| min(1, sqrt t)` at the requested snapshot times.
pub fn gradient_scaling(traj: &Trajectory, times: &[f64]) -> Result<Vec<(f64, f64)>> {
    times
        .iter()
        .filter_map(|&t| traj.snapshot_at(t).map(|f| (t, f)))
        .map(|(t, f)| Ok((t, transformed_gradient_sup(f, traj.params.m())? * t.sqrt().min(1.0))))
        .collect()
}

fn shared_times(a: &Trajectory, b: &Trajectory) -> Vec<f64> {
    a.snapshots
        .iter()
        .map(Field::time)
        .filter(|&t| b.snapshot_at(t).is_some())
        .collect()
}

/// L1 contraction with source: `||u2 - u1||(t) <= ||u20 - u10|| + \int_0^t ||u2^p - u1^p|| d tau`,
/// checked at every shared snapshot time.
pub fn check_contraction(a: &Trajectory, b: &Trajectory, params: &ProblemParams) -> Result<EstimateReport> {
    if a.grid != b.grid {
        return Err(Error::GridMismatch(a.grid.len(), b.grid.len()));
    }
    let grid = a.grid;
    let p = params.p();
    let times = shared_times(a, b);
    let mut observed = Vec::with_capacity(times.len());
    let mut source = Vec::with_capacity(times.len());
    for &t in &times {
        let (fa, fb) = (a.snapshot_at(t).unwrap(), b.snapshot_at(t).unwrap());
        observed.push(l1_distance(fa, fb)?);
        let diff: Vec<f64> = fa.values().iter().zip(fb.values()).map(|(x, y)| (y.powf(p) - x.powf(p)).abs()).collect();
        source.push(grid.integrate(&diff));
    }
    let initial = observed.first().copied().unwrap_or(0.0);
    let mut bound = Vec::with_capacity(times.len());
    let mut accumulated = 0.0;
    for i in 0..times.len() {
        if i > 0 {
            accumulated += 0.5 * (times[i] - times[i - 1]) * (source[i] + source[i - 1]);
        }
        bound.push(initial + accumulated);
    }
    let dt = nominal_dt(a).max(nominal_dt(b));
    let tol = epsilon_grid(params, grid, dt);
    let max_gap = times.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
    let t_end = times.last().copied().unwrap_or(0.0);
    let note = if max_gap > t_end / 64.0 + 1e-12 {
        format!("snapshot spacing {max_gap:e} exceeds t_end/64; time integral is coarse")
    } else {
        String::new()
    };
    Ok(EstimateReport::upper(Lemma::Contraction, times, observed, bound, tol).with_note(note))
}

#[derive(Debug, Clone, Serialize)]
pub struct PairRecord {
    pub initial_distance: f64,
    pub max_distance: f64,
    /// `max_t ||u2 - u1|| / ||u20 - u10||`, zero for identical data.
    pub max_ratio: f64,
    /// Minimum of both solutions on `[t*, T]`.
    pub xi: f64,
    /// `||u2 - u1|| <= 2 ||u20 - u10||` on `[0, t*]`.
    pub factor_two_holds: bool,
    /// `||u2 - u1|| <= 2 ||u20 - u10|| e^{p xi^{p-1} t}` on `[t*, T]`.
    pub gronwall_holds: bool,
    /// True when the ratio exceeds 2 somewhere on `[t*, T]`, i.e. the
    /// exponential factor is what keeps the bound valid there.
    pub exponential_binds: bool,
    /// `2 e^{p xi^{p-1} T}`.
    pub gronwall_constant: f64,
    pub times: Vec<f64>,
    pub distances: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct DependenceRecord {
    pub pairs: Vec<PairRecord>,
    pub t_star: f64,
    pub empirical_c: f64,
}

impl DependenceRecord {
    pub fn pass(&self) -> bool {
        self.pairs.iter().all(|p| p.factor_two_holds && p.gronwall_holds)
    }

    /// Report form: observed ratio curve of the worst pair against its bound.
    pub fn report(&self, params: &ProblemParams, tolerance: f64) -> EstimateReport {
        let worst = self
            .pairs
            .iter()
            .max_by(|a, b| a.max_ratio.total_cmp(&b.max_ratio));
        let (times, observed, bound) = match worst {
            Some(pair) if pair.initial_distance > 0.0 => {
                let bound = pair
                    .times
                    .iter()
                    .map(|&t| {
                        let base = 2.0 * pair.initial_distance;
                        if t <= self.t_star {
                            base
                        } else {
                            base * (params.p() * pair.xi.powf(params.p() - 1.0) * t).exp()
                        }
                    })
                    .collect();
                (pair.times.clone(), pair.distances.clone(), bound)
            }
            _ => (Vec::new(), Vec::new(), Vec::new()),
        };
        let report = EstimateReport::upper(Lemma::Dependence, times, observed, bound, tolerance);
        let pass = report.pass && self.pass();
        EstimateReport { pass, ..report }.with_note(format!("empirical C = {:.6e}, t* = {}", self.empirical_c, self.t_star))
    }
}

/// Solves each pair from its initial corridor and checks the two-phase
/// dependence bound: factor 2 up to `t_star`, Gronwall form after.
pub fn check_dependence(
    pairs: &[(Field, Field)],
    params: &ProblemParams,
    opts: &SolveOptions,
    t_star: f64,
    t_end: f64,
) -> Result<DependenceRecord> {
    let mut opts = opts.clone();
    opts.checkpoints.push(t_star);
    let records = pairs
        .par_iter()
        .map(|(u10, u20)| {
            let solve = |u: &Field| -> Result<Trajectory> {
                let spec = corridor_schedule(params, u, None)?;
                solve_regularized(u, params, spec, &opts, t_end)
            };
            let (a, b) = (solve(u10)?, solve(u20)?);
            let tol = epsilon_grid(params, a.grid, nominal_dt(&a));
            let times = shared_times(&a, &b);
            let distances = times
                .iter()
                .map(|&t| l1_distance(a.snapshot_at(t).unwrap(), b.snapshot_at(t).unwrap()))
                .collect::<Result<Vec<f64>>>()?;
            let initial = distances[0];
            let xi = a
                .diagnostics
                .iter()
                .chain(&b.diagnostics)
                .filter(|d| d.t >= t_star)
                .map(|d| d.min)
                .fold(f64::INFINITY, f64::min);
            if !(xi > 0.0) {
                return Err(Error::XiNonpositive(xi));
            }
            let rate = params.p() * xi.powf(params.p() - 1.0);
            let mut factor_two_holds = true;
            let mut gronwall_holds = true;
            let mut exponential_binds = false;
            for (&t, &d) in times.iter().zip(&distances) {
                if t <= t_star {
                    factor_two_holds &= d <= 2.0 * initial + tol;
                } else {
                    gronwall_holds &= d <= 2.0 * initial * (rate * t).exp() + tol;
                    exponential_binds |= d > 2.0 * initial;
                }
            }
            let max_distance = distances.iter().copied().fold(0.0, f64::max);
            let max_ratio = if initial > 0.0 { max_distance / initial } else { 0.0 };
            Ok(PairRecord {
                initial_distance: initial,
                max_distance,
                max_ratio,
                xi,
                factor_two_holds,
                gronwall_holds,
                exponential_binds,
                gronwall_constant: 2.0 * (rate * t_end).exp(),
                times,
                distances,
            })
        })
        .collect::<Result<Vec<PairRecord>>>()?;
    let empirical_c = records.iter().map(|r| r.max_ratio).fold(0.0, f64::max);
    Ok(DependenceRecord {
        pairs: records,
        t_star,
        empirical_c,
    })
}

/// Relative spread of `max_distance / eps` across a perturbation family:
/// `max / min - 1`.
pub fn linear_response_spread(record: &DependenceRecord, amplitudes: &[f64]) -> f64 {
    let slopes: Vec<f64> = record
        .pairs
        .iter()
        .zip(amplitudes)
        .map(|(p, eps)| p.max_distance / eps)
        .collect();
    let hi = slopes.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = slopes.iter().copied().fold(f64::INFINITY, f64::min);
    hi / lo - 1.0
}

#[derive(Debug, Clone, Serialize)]
pub struct DeltaTable {
    pub deltas: Vec<f64>,
    pub t_probe: f64,
    /// Distances between consecutive levels `k`, `k + 1`.
    pub l1: Vec<f64>,
    pub sup: Vec<f64>,
    pub min_at_probe: Vec<f64>,
    pub cauchy_decreasing: bool,
}

/// Distances between consecutive mollification levels at `t_probe`.
pub fn delta_convergence_study(
    u0: &Field,
    params: &ProblemParams,
    deltas: &[f64],
    t_probe: f64,
    opts: &SolveOptions,
) -> Result<DeltaTable> {
    let levels = solve_mollified_levels(u0, params, deltas, opts, t_probe)?;
    let mut l1 = Vec::new();
    let mut sup = Vec::new();
    for pair in levels.windows(2) {
        l1.push(l1_distance(pair[0].last(), pair[1].last())?);
        sup.push(sup_distance(pair[0].last(), pair[1].last())?);
    }
    let cauchy_decreasing = l1.windows(2).all(|w| w[1] < w[0]);
    Ok(DeltaTable {
        deltas: deltas.to_vec(),
        t_probe,
        l1,
        sup,
        min_at_probe: levels.iter().map(|l| l.last().min()).collect(),
        cauchy_decreasing,
    })
}

/// One refinement level: node count and time step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Level {
    pub n: usize,
    pub dt: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceStudy {
    pub levels: Vec<Level>,
    pub t_probe: f64,
    /// L1 differences between consecutive levels, on the coarser grid.
    pub differences: Vec<f64>,
    /// `log(e_k / e_{k+1}) / log(r)` for each consecutive difference pair.
    pub orders: Vec<f64>,
}

impl ConvergenceStudy {
    pub fn order(&self) -> f64 {
        self.orders.last().copied().unwrap_or(f64::NAN)
    }
}

fn restrict(fine: &Field, coarse: Grid) -> Result<Field> {
    let fg = fine.grid();
    if fg == coarse {
        return Ok(fine.clone());
    }
    if (fg.len() - 1) % (coarse.len() - 1) != 0 {
        return Err(Error::GridMismatch(fg.len(), coarse.len()));
    }
    let stride = (fg.len() - 1) / (coarse.len() - 1);
    let values = fine.values().iter().step_by(stride).copied().collect();
    Field::new(coarse, values, fine.time())
}

/// Self-convergence over a sequence of levels refined by a common ratio in
/// either `dx` or `dt`. With `mollify = Some(delta)`, the sampled data is
/// mollified before solving.
pub fn convergence_study(
    spec: &InitialSpec,
    params: &ProblemParams,
    levels: &[Level],
    opts: &SolveOptions,
    t_probe: f64,
    mollify: Option<f64>,
) -> Result<ConvergenceStudy> {
    let finals = levels
        .par_iter()
        .map(|level| {
            let grid = Grid::new(level.n)?;
            let mut u0 = make_initial(spec, grid, params)?;
            if let Some(delta) = mollify {
                u0 = mollify_initial(&u0, params, delta)?;
            }
            let mut level_opts = opts.clone();
            level_opts.step.dt_init = level.dt;
            level_opts.step.dt_max = level.dt;
            level_opts.step.dt_min = level_opts.step.dt_min.min(level.dt);
            level_opts.stride = usize::MAX;
            let corridor = corridor_schedule(params, &u0, None)?;
            Ok(solve_regularized(&u0, params, corridor, &level_opts, t_probe)?.last().clone())
        })
        .collect::<Result<Vec<Field>>>()?;
    let mut differences = Vec::new();
    for pair in finals.windows(2) {
        let fine = restrict(&pair[1], pair[0].grid())?;
        differences.push(l1_distance(&pair[0], &fine)?);
    }
    let orders = differences
        .windows(2)
        .zip(levels.windows(2))
        .map(|(e, l)| {
            let ratio = if l[1].n != l[0].n {
                (l[1].n - 1) as f64 / (l[0].n - 1) as f64
            } else {
                l[0].dt / l[1].dt
            };
            (e[0] / e[1]).ln() / ratio.ln()
        })
        .collect();
    Ok(ConvergenceStudy {
        levels: levels.to_vec(),
        t_probe,
        differences,
        orders,
    })
}

/// Spatial self-convergence at a fixed time step over the node counts.
pub fn grid_convergence_study(
    spec: &InitialSpec,
    params: &ProblemParams,
    n_list: &[usize],
    opts: &SolveOptions,
    t_probe: f64,
    mollify: Option<f64>,
) -> Result<ConvergenceStudy> {
    let dt = opts.step.dt_init;
    let levels: Vec<Level> = n_list.iter().map(|&n| Level { n, dt }).collect();
    convergence_study(spec, params, &levels, opts, t_probe, mollify)
}
