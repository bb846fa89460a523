//! Time integration of the regularized problem on a uniform grid.
//!
//! Spatial operator at node `i`, in one of two forms. The flux form
//!
//! ```text
//! F_i(w) = D(H Dw)_i + [(m - 1) g(w_i) - h'(w_i)] (D1 w_i)^2 + w_i^p,  H = face mean of h
//! ```
//!
//! is conservative and keeps a discrete maximum principle across jumps; the
//! correction term vanishes on `[delta, M_bar]`. The non-divergence form
//!
//! ```text
//! F_i(w) = h(w_i) D2 w_i + (m - 1) g(w_i) (D1 w_i)^2 + w_i^p
//! ```
//!
//! uses centered differences and is accurate for smooth data only. Both are
//! closed by `w_x(0) = 0` and `w_x(1) = -w^alpha` through ghost nodes
//! `w_{-1} = w_1`, `w_n = w_{n-2} - 2 dx w_{n-1}^alpha`.
//! Each step solves `w - w_old = dt [theta F(w) + (1 - theta) F(w_old)]` with
//! damped Newton and a tridiagonal Jacobian.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::power_integral;
use crate::error::{Error, Result};
use crate::model::{mass, Field, Grid, ProblemParams};
use crate::regularization::{
    build_cutoff_g, build_cutoff_h, corridor_schedule, mollify_initial, Breach, BreachEdge,
    CutoffFn, RegularizationSpec,
};
use crate::verify::{l1_distance, sup_distance, transformed_gradient_sup};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StepConfig {
    pub dt_init: f64,
    pub dt_min: f64,
    pub dt_max: f64,
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    /// 1 = backward Euler, 0.5 = Crank-Nicolson.
    pub theta: f64,
    pub form: SpatialForm,
}

/// Spatial discretization of the diffusion terms.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpatialForm {
    #[default]
    Flux,
    NonDivergence,
}

impl Default for StepConfig {
    fn default() -> Self {
        Self {
            dt_init: 1e-4,
            dt_min: 1e-10,
            dt_max: 1e-4,
            newton_tol: 1e-10,
            newton_max_iter: 25,
            theta: 1.0,
            form: SpatialForm::Flux,
        }
    }
}

impl StepConfig {
    /// Fixed step `dt` (no growth beyond it) with default Newton settings.
    pub fn fixed(dt: f64) -> Self {
        Self {
            dt_init: dt,
            dt_max: dt,
            dt_min: (dt * 1e-6).min(1e-10),
            ..Self::default()
        }
    }

    pub fn with_theta(mut self, theta: f64) -> Self {
        self.theta = theta;
        self
    }

    pub fn with_form(mut self, form: SpatialForm) -> Self {
        self.form = form;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt_min > 0.0 && self.dt_min <= self.dt_init && self.dt_init <= self.dt_max) {
            return Err(Error::InvalidStepConfig("need 0 < dt_min <= dt_init <= dt_max"));
        }
        if !(self.newton_tol > 0.0) {
            return Err(Error::InvalidStepConfig("newton_tol must be positive"));
        }
        if self.newton_max_iter == 0 {
            return Err(Error::InvalidStepConfig("newton_max_iter must be at least 1"));
        }
        if !(0.5..=1.0).contains(&self.theta) {
            return Err(Error::InvalidStepConfig("theta must lie in [0.5, 1]"));
        }
        Ok(())
    }
}

/// Output and monitoring options for a solve.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveOptions {
    pub step: StepConfig,
    /// Store a snapshot every `stride` accepted steps.
    pub stride: usize,
    /// Times the integrator must land on exactly; a snapshot is stored at each.
    pub checkpoints: Vec<f64>,
    /// Drops the diffusion terms (reaction-only test hook).
    pub reaction_only: bool,
    /// Corridor expansions allowed before giving up.
    pub max_expansions: usize,
}

impl SolveOptions {
    pub fn new(step: StepConfig) -> Self {
        Self {
            step,
            stride: 1,
            checkpoints: Vec::new(),
            reaction_only: false,
            max_expansions: 32,
        }
    }

    pub fn with_stride(mut self, stride: usize) -> Self {
        self.stride = stride.max(1);
        self
    }

    pub fn with_checkpoints(mut self, checkpoints: Vec<f64>) -> Self {
        self.checkpoints = checkpoints;
        self
    }

    pub fn reaction_only(mut self) -> Self {
        self.reaction_only = true;
        self
    }
}

/// Scalars recorded after every accepted step (row 0 is the initial state).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepDiagnostics {
    pub t: f64,
    pub dt: f64,
    pub mass: f64,
    pub max: f64,
    pub min: f64,
    /// `sup |(u^{m/q})_x|` over interior nodes.
    pub grad_sup: f64,
    /// `u(1, t)^{m-1+alpha}`.
    pub boundary_flux: f64,
    /// `\int u^p dx`.
    pub source_integral: f64,
    /// `\int u^{2-m-alpha} dx`.
    pub energy: f64,
    pub newton_iters: usize,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum Event {
    CorridorBreach {
        time: f64,
        edge: BreachEdge,
        value: f64,
    },
    ScheduleChange {
        time: f64,
        delta: f64,
        m_bar: f64,
    },
    StepRejected {
        time: f64,
        dt: f64,
    },
    Restart {
        time: f64,
        delta: f64,
    },
}

#[derive(Debug, Clone, Serialize)]
pub struct Trajectory {
    pub params: ProblemParams,
    pub grid: Grid,
    pub theta: f64,
    pub snapshots: Vec<Field>,
    pub diagnostics: Vec<StepDiagnostics>,
    pub events: Vec<Event>,
    pub corridor: Option<RegularizationSpec>,
}

impl Trajectory {
    pub fn initial(&self) -> &Field {
        &self.snapshots[0]
    }

    pub fn last(&self) -> &Field {
        self.snapshots.last().expect("trajectory has an initial snapshot")
    }

    pub fn end_time(&self) -> f64 {
        self.last().time()
    }

    /// Snapshot stored at `t` (within `1e-12`), if any.
    pub fn snapshot_at(&self, t: f64) -> Option<&Field> {
        self.snapshots
            .iter()
            .find(|f| (f.time() - t).abs() <= 1e-12 * t.abs().max(1.0))
    }

    pub fn breaches(&self) -> usize {
        self.events
            .iter()
            .filter(|e| matches!(e, Event::CorridorBreach { .. }))
            .count()
    }

    /// Largest sample over all recorded steps.
    pub fn running_max(&self) -> f64 {
        self.diagnostics.iter().map(|d| d.max).fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Exact solution `[(1-p) t + c^{1-p}]^{1/(1-p)}` of `u' = u^p`, `u(0) = c`.
pub fn reaction_exact(u0_const: f64, p: f64, t: f64) -> f64 {
    crate::bounds::reaction_envelope(u0_const, p, t)
}

/// Discrete operator with the current cutoffs.
struct Scheme {
    h: CutoffFn,
    g: CutoffFn,
    m_minus_one: f64,
    p: f64,
    alpha: f64,
    dx: f64,
    reaction_only: bool,
    form: SpatialForm,
    /// `[delta, M_bar]`, where `(m - 1) g = h'`.
    corridor: (f64, f64),
}

/// Tridiagonal rows `(lower, diag, upper)` of `dF/dw`.
struct Tridiagonal {
    lower: Vec<f64>,
    diag: Vec<f64>,
    upper: Vec<f64>,
}

impl Tridiagonal {
    fn set(&mut self, i: usize, row: [f64; 3]) {
        self.lower[i] = row[0];
        self.diag[i] = row[1];
        self.upper[i] = row[2];
    }
}

impl Scheme {
    fn new(params: &ProblemParams, spec: &RegularizationSpec, dx: f64, reaction_only: bool, form: SpatialForm) -> Result<Self> {
        Ok(Self {
            h: build_cutoff_h(params, spec)?,
            g: build_cutoff_g(params, spec)?,
            m_minus_one: params.m() - 1.0,
            p: params.p(),
            alpha: params.alpha(),
            dx,
            reaction_only,
            form,
            corridor: (spec.delta, spec.m_bar),
        })
    }

    /// First and second differences at node `i` with the ghost closures,
    /// plus their derivatives with respect to `w_{i-1}, w_i, w_{i+1}`.
    #[inline]
    fn stencil(&self, w: &[f64], i: usize) -> Stencil {
        let n = w.len();
        let dx = self.dx;
        let dx2 = dx * dx;
        if i == 0 {
            Stencil {
                d1: 0.0,
                d2: 2.0 * (w[1] - w[0]) / dx2,
                d1_dw: [0.0, 0.0, 0.0],
                d2_dw: [0.0, -2.0 / dx2, 2.0 / dx2],
            }
        } else if i == n - 1 {
            // |w|^{alpha-1} w on the positive branch
            let wa = w[i].powf(self.alpha);
            let dwa = self.alpha * wa / w[i];
            Stencil {
                d1: -wa,
                d2: (2.0 * w[i - 1] - 2.0 * w[i] - 2.0 * dx * wa) / dx2,
                d1_dw: [0.0, -dwa, 0.0],
                d2_dw: [2.0 / dx2, (-2.0 - 2.0 * dx * dwa) / dx2, 0.0],
            }
        } else {
            Stencil {
                d1: (w[i + 1] - w[i - 1]) / (2.0 * dx),
                d2: (w[i + 1] - 2.0 * w[i] + w[i - 1]) / dx2,
                d1_dw: [-0.5 / dx, 0.0, 0.5 / dx],
                d2_dw: [1.0 / dx2, -2.0 / dx2, 1.0 / dx2],
            }
        }
    }

    /// `(m - 1) g(r) - h'(r)` and its derivative; zero inside the corridor.
    fn flux_correction(&self, r: f64) -> (f64, f64) {
        if r >= self.corridor.0 && r <= self.corridor.1 {
            return (0.0, 0.0);
        }
        let k = |r: f64| self.m_minus_one * self.g.evaluate(r) - self.h.derivative(r);
        let eps = 1e-7 * r.abs().max(1e-3);
        (k(r), (k(r + eps) - k(r - eps)) / (2.0 * eps))
    }

    /// Diffusion part at node `i` and its stencil derivatives.
    fn diffusion(&self, w: &[f64], i: usize) -> (f64, [f64; 3]) {
        match self.form {
            SpatialForm::NonDivergence => {
                let s = self.stencil(w, i);
                let (hv, dh) = self.h.eval_with_derivative(w[i]);
                let (gv, dg) = self.g.eval_with_derivative(w[i]);
                let c = self.m_minus_one;
                let value = hv * s.d2 + c * gv * s.d1 * s.d1;
                let partial = |k: usize| hv * s.d2_dw[k] + 2.0 * c * gv * s.d1 * s.d1_dw[k];
                let row = [partial(0), partial(1) + dh * s.d2 + c * dg * s.d1 * s.d1, partial(2)];
                (value, row)
            }
            SpatialForm::Flux => self.flux_diffusion(w, i),
        }
    }

    /// `[H_{i+1/2}(w_{i+1} - w_i) - H_{i-1/2}(w_i - w_{i-1})] / dx^2` with
    /// `H = (h(a) + h(b)) / 2`, mirrored at `x = 0` and closed by the outflow
    /// flux `-h(w) w^alpha` over a half cell at `x = 1`.
    fn flux_diffusion(&self, w: &[f64], i: usize) -> (f64, [f64; 3]) {
        let n = w.len();
        let dx = self.dx;
        let dx2 = dx * dx;
        let (hc, dhc) = self.h.eval_with_derivative(w[i]);
        let s = self.stencil(w, i);
        let (k, dk) = self.flux_correction(w[i]);
        let correction = k * s.d1 * s.d1;
        let dcorr = |j: usize| 2.0 * k * s.d1 * s.d1_dw[j];
        let mut row = [dcorr(0), dcorr(1) + dk * s.d1 * s.d1, dcorr(2)];
        let value;
        if i == 0 {
            let (hr, dhr) = self.h.eval_with_derivative(w[1]);
            let hp = 0.5 * (hc + hr);
            let dp = w[1] - w[0];
            value = 2.0 * hp * dp / dx2;
            row[1] += 2.0 * (0.5 * dhc * dp - hp) / dx2;
            row[2] += 2.0 * (hp + 0.5 * dhr * dp) / dx2;
        } else if i == n - 1 {
            let (hl, dhl) = self.h.eval_with_derivative(w[i - 1]);
            let hm = 0.5 * (hl + hc);
            let dm = w[i] - w[i - 1];
            let wa = w[i].powf(self.alpha);
            let dwa = self.alpha * wa / w[i];
            value = 2.0 * (-dx * hc * wa - hm * dm) / dx2;
            row[0] += 2.0 * (hm - 0.5 * dhl * dm) / dx2;
            row[1] += 2.0 * (-dx * (dhc * wa + hc * dwa) - 0.5 * dhc * dm - hm) / dx2;
        } else {
            let (hl, dhl) = self.h.eval_with_derivative(w[i - 1]);
            let (hr, dhr) = self.h.eval_with_derivative(w[i + 1]);
            let (hm, hp) = (0.5 * (hl + hc), 0.5 * (hc + hr));
            let (dm, dp) = (w[i] - w[i - 1], w[i + 1] - w[i]);
            value = (hp * dp - hm * dm) / dx2;
            row[0] += (hm - 0.5 * dhl * dm) / dx2;
            row[1] += (0.5 * dhc * (dp - dm) - hp - hm) / dx2;
            row[2] += (hp + 0.5 * dhr * dp) / dx2;
        }
        (value + correction, row)
    }

    fn apply(&self, w: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            let source = w[i].powf(self.p);
            *o = if self.reaction_only { source } else { self.diffusion(w, i).0 + source };
        }
    }

    fn apply_with_jacobian(&self, w: &[f64], out: &mut [f64], jac: &mut Tridiagonal) {
        for i in 0..w.len() {
            let source = w[i].powf(self.p);
            let dsource = self.p * source / w[i];
            if self.reaction_only {
                out[i] = source;
                jac.set(i, [0.0, dsource, 0.0]);
                continue;
            }
            let (value, row) = self.diffusion(w, i);
            out[i] = value + source;
            jac.set(i, [row[0], row[1] + dsource, row[2]]);
        }
    }
}

struct Stencil {
    d1: f64,
    d2: f64,
    d1_dw: [f64; 3],
    d2_dw: [f64; 3],
}

/// Solves `(lower, diag, upper) x = rhs` in place (Thomas algorithm).
fn solve_tridiagonal(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &mut [f64], scratch: &mut [f64]) -> bool {
    let n = diag.len();
    let mut beta = diag[0];
    if beta == 0.0 {
        return false;
    }
    rhs[0] /= beta;
    for i in 1..n {
        scratch[i] = upper[i - 1] / beta;
        beta = diag[i] - lower[i] * scratch[i];
        if beta == 0.0 || !beta.is_finite() {
            return false;
        }
        rhs[i] = (rhs[i] - lower[i] * rhs[i - 1]) / beta;
    }
    for i in (0..n - 1).rev() {
        rhs[i] -= scratch[i + 1] * rhs[i + 1];
    }
    true
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |acc, x| acc.max(x.abs()))
}

/// Result of one implicit step.
#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub field: Field,
    pub newton_iters: usize,
    pub residual: f64,
}

const MAX_DAMPING_HALVINGS: usize = 8;

/// Workspace for repeated Newton solves on one grid.
struct Stepper {
    scheme: Scheme,
    theta: f64,
    tol: f64,
    max_iter: usize,
    jac: Tridiagonal,
    f_new: Vec<f64>,
    f_old: Vec<f64>,
    resid: Vec<f64>,
    trial_resid: Vec<f64>,
    delta: Vec<f64>,
    trial: Vec<f64>,
    scratch: Vec<f64>,
}

impl Stepper {
    fn new(scheme: Scheme, cfg: &StepConfig, n: usize) -> Self {
        Self {
            scheme,
            theta: cfg.theta,
            tol: cfg.newton_tol,
            max_iter: cfg.newton_max_iter,
            jac: Tridiagonal {
                lower: vec![0.0; n],
                diag: vec![0.0; n],
                upper: vec![0.0; n],
            },
            f_new: vec![0.0; n],
            f_old: vec![0.0; n],
            resid: vec![0.0; n],
            trial_resid: vec![0.0; n],
            delta: vec![0.0; n],
            trial: vec![0.0; n],
            scratch: vec![0.0; n],
        }
    }

    fn trial_residual(&mut self, old: &[f64], dt: f64) -> f64 {
        self.scheme.apply(&self.trial, &mut self.f_new);
        for i in 0..old.len() {
            self.trial_resid[i] =
                self.trial[i] - old[i] - dt * (self.theta * self.f_new[i] + (1.0 - self.theta) * self.f_old[i]);
        }
        max_abs(&self.trial_resid)
    }

    /// Advances `old` by `dt`, writing the result into `w`. Returns the
    /// iteration count and final residual.
    fn step(&mut self, old: &[f64], dt: f64, time: f64, w: &mut Vec<f64>) -> Result<(usize, f64)> {
        let n = old.len();
        if self.theta < 1.0 {
            self.scheme.apply(old, &mut self.f_old);
        } else {
            self.f_old.iter_mut().for_each(|v| *v = 0.0);
        }
        w.clear();
        w.extend_from_slice(old);
        let scale = max_abs(old).max(1.0);
        let tol = self.tol * scale;
        let diverged = |residual: f64| Error::NewtonDiverged { time, dt, residual };

        let mut norm = f64::INFINITY;
        for iter in 0..=self.max_iter {
            self.scheme.apply_with_jacobian(w, &mut self.f_new, &mut self.jac);
            for i in 0..n {
                self.resid[i] = w[i] - old[i] - dt * (self.theta * self.f_new[i] + (1.0 - self.theta) * self.f_old[i]);
            }
            norm = max_abs(&self.resid);
            if !norm.is_finite() {
                return Err(diverged(norm));
            }
            if norm <= tol {
                return Ok((iter, norm));
            }
            if iter == self.max_iter {
                break;
            }
            let a = dt * self.theta;
            for i in 0..n {
                self.jac.lower[i] *= -a;
                self.jac.upper[i] *= -a;
                self.jac.diag[i] = 1.0 - a * self.jac.diag[i];
                self.delta[i] = -self.resid[i];
            }
            if !solve_tridiagonal(&self.jac.lower, &self.jac.diag, &self.jac.upper, &mut self.delta, &mut self.scratch) {
                return Err(diverged(norm));
            }
            // Stagnation at round-off: the update no longer moves the iterate.
            let step_size = max_abs(&self.delta);
            if step_size <= 4.0 * f64::EPSILON * scale && norm <= 1e3 * tol {
                return Ok((iter, norm));
            }
            let mut lambda = 1.0;
            let mut accepted = false;
            for _ in 0..=MAX_DAMPING_HALVINGS {
                let mut positive = true;
                for i in 0..n {
                    self.trial[i] = w[i] + lambda * self.delta[i];
                    if !(self.trial[i] > 0.0 && self.trial[i].is_finite()) {
                        positive = false;
                    }
                }
                if positive {
                    let trial_norm = self.trial_residual(old, dt);
                    if trial_norm < norm || trial_norm <= tol {
                        accepted = true;
                        break;
                    }
                }
                lambda *= 0.5;
            }
            if !accepted {
                return Err(diverged(norm));
            }
            w.copy_from_slice(&self.trial);
        }
        Err(diverged(norm))
    }
}

/// One theta-weighted implicit step of the regularized problem.
pub fn step_regularized(
    state: &Field,
    dt: f64,
    spec: &RegularizationSpec,
    params: &ProblemParams,
    cfg: &StepConfig,
) -> Result<StepOutcome> {
    cfg.validate()?;
    state.ensure_positive()?;
    let grid = state.grid();
    let scheme = Scheme::new(params, spec, grid.dx(), false, cfg.form)?;
    let mut stepper = Stepper::new(scheme, cfg, grid.len());
    let mut next = Vec::with_capacity(grid.len());
    let (iters, residual) = stepper.step(state.values(), dt, state.time(), &mut next)?;
    if next.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteState(state.time() + dt));
    }
    Ok(StepOutcome {
        field: Field::new(grid, next, state.time() + dt)?,
        newton_iters: iters,
        residual,
    })
}

/// Per-step scalars for a strictly positive state.
pub fn diagnose(field: &Field, params: &ProblemParams, dt: f64, newton_iters: usize, residual: f64) -> StepDiagnostics {
    let values = field.values();
    let grid = field.grid();
    StepDiagnostics {
        t: field.time(),
        dt,
        mass: mass(field),
        max: field.max(),
        min: field.min(),
        grad_sup: transformed_gradient_sup(field, params.m()).unwrap_or(f64::NAN),
        boundary_flux: values[values.len() - 1].powf(params.flux_exponent()),
        source_integral: grid.integrate_map(values, |v| v.powf(params.p())),
        energy: power_integral(field, params.energy_exponent()),
        newton_iters,
        residual,
    }
}

/// Empirical gradient constant `max_t grad_sup / (1 + t^{-1/2})` over the
/// recorded steps with `t > 0`.
pub fn empirical_gradient_constant(diagnostics: &[StepDiagnostics]) -> f64 {
    diagnostics
        .iter()
        .filter(|d| d.t > 0.0 && d.grad_sup.is_finite())
        .map(|d| d.grad_sup / (1.0 + d.t.powf(-0.5)))
        .fold(0.0, f64::max)
}

fn sorted_targets(checkpoints: &[f64], start: f64, t_end: f64) -> Vec<f64> {
    let mut targets: Vec<f64> = checkpoints
        .iter()
        .copied()
        .filter(|&c| c > start && c < t_end)
        .collect();
    targets.push(t_end);
    targets.sort_by(f64::total_cmp);
    targets.dedup_by(|a, b| (*a - *b).abs() <= 1e-14 * b.abs().max(1.0));
    targets
}

/// Integrates the regularized problem from `u0` to `t_end`, checking the
/// corridor after every step. A step that leaves the corridor is rejected,
/// the corridor is widened through [`corridor_schedule`] and the step is
/// retried with rebuilt cutoffs.
pub fn solve_regularized(
    u0: &Field,
    params: &ProblemParams,
    spec: RegularizationSpec,
    opts: &SolveOptions,
    t_end: f64,
) -> Result<Trajectory> {
    opts.step.validate()?;
    u0.ensure_positive()?;
    let grid = u0.grid();
    let mut spec = RegularizationSpec::new(spec.delta, spec.m_bar)?;
    let mut stepper = Stepper::new(Scheme::new(params, &spec, grid.dx(), opts.reaction_only, opts.step.form)?, &opts.step, grid.len());

    let mut state = u0.values().to_vec();
    let mut t = u0.time();
    let mut diagnostics = vec![diagnose(u0, params, 0.0, 0, 0.0)];
    let mut snapshots = vec![u0.clone()];
    let mut events = Vec::new();
    let mut expansions = 0;
    let mut dt = opts.step.dt_init;
    let mut since_snapshot = 0;
    let mut next = Vec::with_capacity(grid.len());

    for target in sorted_targets(&opts.checkpoints, t, t_end) {
        while t < target {
            let remaining = target - t;
            let mut h = dt.min(remaining);
            let lands = remaining - h <= 1e-6 * h;
            if lands {
                h = remaining;
            }
            match stepper.step(&state, h, t, &mut next) {
                Ok((iters, residual)) => {
                    let t_new = if lands { target } else { t + h };
                    if next.iter().any(|v| !v.is_finite()) {
                        return Err(Error::NonFiniteState(t_new));
                    }
                    let (lo, hi) = next.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                        (lo.min(v), hi.max(v))
                    });
                    let breach = if hi > spec.m_bar {
                        Some(Breach { edge: BreachEdge::Upper, time: t_new, value: hi })
                    } else if lo < spec.delta {
                        Some(Breach { edge: BreachEdge::Lower, time: t_new, value: lo })
                    } else {
                        None
                    };
                    if let Some(breach) = breach {
                        expansions += 1;
                        if expansions > opts.max_expansions {
                            return Err(Error::ScheduleDiverged { expansions, time: t_new });
                        }
                        events.push(Event::CorridorBreach {
                            time: breach.time,
                            edge: breach.edge,
                            value: breach.value,
                        });
                        let c_hat = empirical_gradient_constant(&diagnostics);
                        let widened = corridor_schedule(params, u0, Some((&spec, &breach, c_hat)))?;
                        if widened == spec {
                            return Err(Error::ScheduleDiverged { expansions, time: t_new });
                        }
                        spec = widened;
                        events.push(Event::ScheduleChange {
                            time: breach.time,
                            delta: spec.delta,
                            m_bar: spec.m_bar,
                        });
                        stepper.scheme = Scheme::new(params, &spec, grid.dx(), opts.reaction_only, opts.step.form)?;
                        continue;
                    }
                    std::mem::swap(&mut state, &mut next);
                    t = t_new;
                    let field = Field::new(grid, state.clone(), t)?;
                    diagnostics.push(diagnose(&field, params, h, iters, residual));
                    since_snapshot += 1;
                    if since_snapshot >= opts.stride || t == target {
                        snapshots.push(field);
                        since_snapshot = 0;
                    }
                    dt = (dt * 2.0).min(opts.step.dt_max);
                }
                Err(Error::NewtonDiverged { .. }) if h * 0.5 >= opts.step.dt_min => {
                    events.push(Event::StepRejected { time: t, dt: h });
                    dt = h * 0.5;
                }
                Err(e) => return Err(e),
            }
        }
    }

    Ok(Trajectory {
        params: *params,
        grid,
        theta: opts.step.theta,
        snapshots,
        diagnostics,
        events,
        corridor: Some(spec),
    })
}

/// Forward-Euler integration of the same spatial discretization with its
/// own operator assembly. Test and verification use only.
pub fn explicit_oracle(
    u0: &Field,
    params: &ProblemParams,
    spec: &RegularizationSpec,
    tiny_dt: f64,
    t_end: f64,
    reaction_only: bool,
    form: SpatialForm,
    stride: usize,
) -> Result<Trajectory> {
    u0.ensure_positive()?;
    let grid = u0.grid();
    let n = grid.len();
    let dx = grid.dx();
    let h = build_cutoff_h(params, spec)?;
    let g = build_cutoff_g(params, spec)?;
    let stride = stride.max(1);

    let mut w = u0.values().to_vec();
    let mut padded = vec![0.0; n + 2];
    let mut t = u0.time();
    let mut diagnostics = vec![diagnose(u0, params, 0.0, 0, 0.0)];
    let mut snapshots = vec![u0.clone()];
    let mut k = 0usize;
    while t < t_end {
        let remaining = t_end - t;
        let dt = if remaining - tiny_dt <= 1e-6 * tiny_dt { remaining } else { tiny_dt };
        if !reaction_only {
            let h_max = w.iter().map(|&v| h.evaluate(v)).fold(0.0, f64::max);
            let limit = 0.4 * dx * dx / h_max;
            if dt > limit {
                return Err(Error::StabilityViolation { dt, limit });
            }
        }
        padded[1..=n].copy_from_slice(&w);
        padded[0] = w[1];
        padded[n + 1] = w[n - 2] - 2.0 * dx * w[n - 1].powf(params.alpha());
        let hv: Vec<f64> = w.iter().map(|&v| h.evaluate(v)).collect();
        // q[j]: flux h u_x through the face between nodes j and j + 1
        let q: Vec<f64> = (0..n - 1).map(|j| 0.5 * (hv[j] + hv[j + 1]) * (w[j + 1] - w[j]) / dx).collect();
        let outflow = -hv[n - 1] * w[n - 1].powf(params.alpha());
        let update: Vec<f64> = (0..n)
            .map(|i| {
                let (l, c, r) = (padded[i], padded[i + 1], padded[i + 2]);
                let mut rate = c.powf(params.p());
                if !reaction_only {
                    let d1 = (r - l) / (2.0 * dx);
                    rate += match form {
                        SpatialForm::NonDivergence => {
                            let d2 = (l - 2.0 * c + r) / (dx * dx);
                            hv[i] * d2 + (params.m() - 1.0) * g.evaluate(c) * d1 * d1
                        }
                        SpatialForm::Flux => {
                            let divergence = if i == 0 {
                                2.0 * q[0] / dx
                            } else if i == n - 1 {
                                2.0 * (outflow - q[n - 2]) / dx
                            } else {
                                (q[i] - q[i - 1]) / dx
                            };
                            let inside = c >= spec.delta && c <= spec.m_bar;
                            let k = if inside { 0.0 } else { (params.m() - 1.0) * g.evaluate(c) - h.derivative(c) };
                            divergence + k * d1 * d1
                        }
                    };
                }
                c + dt * rate
            })
            .collect();
        if update.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::NonFiniteState(t + dt));
        }
        w = update;
        t = if dt == remaining { t_end } else { t + dt };
        k += 1;
        let field = Field::new(grid, w.clone(), t)?;
        diagnostics.push(diagnose(&field, params, dt, 0, 0.0));
        if k % stride == 0 || t == t_end {
            snapshots.push(field);
        }
    }
    Ok(Trajectory {
        params: *params,
        grid,
        theta: 0.0,
        snapshots,
        diagnostics,
        events: Vec::new(),
        corridor: Some(*spec),
    })
}

/// `count` logarithmically spaced times in `[t_max * 10^{-decades}, t_max]`.
pub fn log_times(t_max: f64, count: usize, decades: f64) -> Vec<f64> {
    let last = count.max(2) - 1;
    (0..=last)
        .map(|i| {
            if i == last {
                t_max
            } else {
                t_max * 10f64.powf(-decades * (1.0 - i as f64 / last as f64))
            }
        })
        .collect()
}

/// Number of log-spaced comparison times for the Cauchy record.
pub const COMPARISON_TIMES: usize = 32;

/// Pairwise distances between consecutive mollification levels.
#[derive(Debug, Clone, Serialize)]
pub struct DeltaConvergenceRecord {
    pub deltas: Vec<f64>,
    pub t0: f64,
    pub comparison_times: Vec<f64>,
    /// `l1[k][j]`: distance between levels `k` and `k + 1` at time `j`.
    pub l1: Vec<Vec<f64>>,
    pub l1_at_t0: Vec<f64>,
    pub sup_at_t0: Vec<f64>,
    pub min_at_t0: Vec<f64>,
    /// Number of times `t0` was halved to keep the mass above `u0_bar / 2`.
    pub t0_halvings: usize,
}

/// Solves every mollification level on `[0, t0]` (in parallel).
pub fn solve_mollified_levels(
    u0: &Field,
    params: &ProblemParams,
    deltas: &[f64],
    opts: &SolveOptions,
    t0: f64,
) -> Result<Vec<Trajectory>> {
    deltas
        .par_iter()
        .map(|&delta| {
            let data = mollify_initial(u0, params, delta)?;
            let spec = corridor_schedule(params, &data, None)?;
            solve_regularized(&data, params, spec, opts, t0)
        })
        .collect()
}

fn first_mass_collapse(traj: &Trajectory, half_mean: f64) -> Option<(f64, f64)> {
    traj.diagnostics.iter().find(|d| d.mass < half_mean).map(|d| (d.t, d.mass))
}

/// Two-phase solve for data that may vanish: mollified problems for each
/// `delta` on `[0, t0]`, a Cauchy record across levels, then a restart from
/// the finest level at `t0` integrated to `t_end`.
///
/// With `t0 = None` the restart time starts at `0.1 T` and is halved until
/// every level keeps its mass above half the initial mean. An explicit `t0`
/// that violates this yields [`Error::MassCollapse`].
pub fn solve_singular(
    u0: &Field,
    params: &ProblemParams,
    deltas: &[f64],
    opts: &SolveOptions,
    t_end: f64,
    t0: Option<f64>,
) -> Result<(Trajectory, DeltaConvergenceRecord)> {
    if deltas.is_empty() {
        return Err(Error::DeltaOutOfRange(f64::NAN));
    }
    let half_mean = 0.5 * mass(u0);
    if half_mean <= 0.0 {
        return Err(Error::EmptyMass);
    }
    let auto = t0.is_none();
    let mut t0 = t0.unwrap_or(0.1 * params.horizon()).min(t_end);
    let mut halvings = 0;
    let (levels, times) = loop {
        let times = log_times(t0, COMPARISON_TIMES, 3.0);
        let level_opts = SolveOptions {
            checkpoints: times.clone(),
            ..opts.clone()
        };
        let levels = solve_mollified_levels(u0, params, deltas, &level_opts, t0)?;
        match levels.iter().find_map(|l| first_mass_collapse(l, half_mean)) {
            None => break (levels, times),
            Some((time, m)) if !auto || halvings >= 8 => {
                return Err(Error::MassCollapse { time, mass: m, half_mean });
            }
            Some(_) => {
                t0 *= 0.5;
                halvings += 1;
            }
        }
    };

    let mut l1 = Vec::new();
    let mut l1_at_t0 = Vec::new();
    let mut sup_at_t0 = Vec::new();
    for pair in levels.windows(2) {
        let row = times
            .iter()
            .map(|&t| {
                let a = pair[0].snapshot_at(t).expect("checkpoint snapshot");
                let b = pair[1].snapshot_at(t).expect("checkpoint snapshot");
                l1_distance(a, b)
            })
            .collect::<Result<Vec<f64>>>()?;
        l1_at_t0.push(*row.last().expect("nonempty comparison grid"));
        sup_at_t0.push(sup_distance(pair[0].last(), pair[1].last())?);
        l1.push(row);
    }
    let min_at_t0 = levels.iter().map(|l| l.last().min()).collect();

    let finest = levels.last().expect("at least one level");
    let restart_state = finest.last().clone();
    let mut stitched = finest.clone();
    stitched.events.push(Event::Restart {
        time: t0,
        delta: *deltas.last().expect("nonempty schedule"),
    });
    if t_end > t0 {
        let spec = corridor_schedule(params, &restart_state, None)?;
        let tail = solve_regularized(&restart_state, params, spec, opts, t_end)?;
        stitched.snapshots.extend(tail.snapshots.into_iter().skip(1));
        stitched.diagnostics.extend(tail.diagnostics.into_iter().skip(1));
        stitched.events.extend(tail.events);
        stitched.corridor = tail.corridor;
    }

    let record = DeltaConvergenceRecord {
        deltas: deltas.to_vec(),
        t0,
        comparison_times: times,
        l1,
        l1_at_t0,
        sup_at_t0,
        min_at_t0,
        t0_halvings: halvings,
    };
    Ok((stitched, record))
}
