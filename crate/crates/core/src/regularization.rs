//! Cutoff coefficients for the uniformly parabolic regularized problem
//!
//! ```text
//! w_t = h(w) w_xx + (m - 1) g(w) w_x^2 + w^p
//! ```
//!
//! together with mollified initial data and the corridor `(delta, M_bar)`
//! inside which `h(r) = r^{m-1}` and `g(r) = r^{m-2}`.

use serde::Serialize;

use crate::bounds::{c0_bound, eta, q_exponent};
use crate::error::{Error, Result};
use crate::model::{Field, ProblemParams};

/// Corridor edges. The cutoffs agree with the true power laws on
/// `[delta, m_bar]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegularizationSpec {
    pub delta: f64,
    pub m_bar: f64,
}

impl RegularizationSpec {
    pub fn new(delta: f64, m_bar: f64) -> Result<Self> {
        if !(delta > 0.0 && delta < m_bar && m_bar.is_finite()) {
            return Err(Error::InvalidCorridor { delta, m_bar });
        }
        Ok(Self { delta, m_bar })
    }

    pub fn contains(&self, value: f64) -> bool {
        value >= self.delta && value <= self.m_bar
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum NegativeTail {
    /// Constant `2 delta^e` for `r < 0`.
    Flat,
    /// `2 delta^e f(r)` with `f` compactly supported in `[-2, 2]`.
    Compact,
}

/// A five-branch cutoff of the power law `r^e` with `e < 0`:
///
/// * `r < 0`: `2 delta^e` (times `f(r)` for `g`)
/// * `[0, delta)`: monotone cubic Hermite blend
/// * `[delta, m_bar]`: `r^e`
/// * `(m_bar, 2 m_bar)`: smoothstep blend of `r^e` into the constant
/// * `r >= 2 m_bar`: `(2 m_bar)^e / 2`
///
/// The blends match values and first derivatives at every breakpoint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CutoffFn {
    exponent: f64,
    delta: f64,
    m_bar: f64,
    tail: NegativeTail,
    low: f64,
    high: f64,
}

impl CutoffFn {
    fn new(exponent: f64, spec: &RegularizationSpec, tail: NegativeTail) -> Result<Self> {
        let spec = RegularizationSpec::new(spec.delta, spec.m_bar)?;
        Ok(Self {
            exponent,
            delta: spec.delta,
            m_bar: spec.m_bar,
            tail,
            low: 2.0 * spec.delta.powf(exponent),
            high: 0.5 * (2.0 * spec.m_bar).powf(exponent),
        })
    }

    pub fn exponent(&self) -> f64 {
        self.exponent
    }

    /// Breakpoints `{0, delta, m_bar, 2 m_bar}`.
    pub fn breakpoints(&self) -> [f64; 4] {
        [0.0, self.delta, self.m_bar, 2.0 * self.m_bar]
    }

    /// `2 delta^e`, the value for `r < 0` (upper bound of `h`).
    pub fn lower_plateau(&self) -> f64 {
        self.low
    }

    /// `(2 m_bar)^e / 2`, the value for `r >= 2 m_bar` (lower bound of `h`).
    pub fn upper_plateau(&self) -> f64 {
        self.high
    }

    pub fn evaluate(&self, r: f64) -> f64 {
        self.eval_with_derivative(r).0
    }

    pub fn derivative(&self, r: f64) -> f64 {
        self.eval_with_derivative(r).1
    }

    /// Value and derivative in one pass; this is what Newton calls.
    #[inline]
    pub fn eval_with_derivative(&self, r: f64) -> (f64, f64) {
        let e = self.exponent;
        if r >= self.delta && r <= self.m_bar {
            let pw = r.powf(e);
            (pw, e * pw / r)
        } else if r < 0.0 {
            match self.tail {
                NegativeTail::Flat => (self.low, 0.0),
                NegativeTail::Compact => {
                    let (f, df) = compact_step(r);
                    (self.low * f, self.low * df)
                }
            }
        } else if r < self.delta {
            let d = self.delta;
            let t = r / d;
            let p1 = 0.5 * self.low;
            let m1 = e * p1;
            let (t2, t3) = (t * t, t * t * t);
            let value = self.low * (2.0 * t3 - 3.0 * t2 + 1.0)
                + p1 * (3.0 * t2 - 2.0 * t3)
                + m1 * (t3 - t2);
            let slope = (self.low * (6.0 * t2 - 6.0 * t)
                + p1 * (6.0 * t - 6.0 * t2)
                + m1 * (3.0 * t2 - 2.0 * t))
                / d;
            (value, slope)
        } else if r < 2.0 * self.m_bar {
            let xi = (r - self.m_bar) / self.m_bar;
            let s = xi * xi * (3.0 - 2.0 * xi);
            let ds = 6.0 * xi * (1.0 - xi) / self.m_bar;
            let pw = r.powf(e);
            let value = (1.0 - s) * pw + s * self.high;
            let slope = (1.0 - s) * e * pw / r + ds * (self.high - pw);
            (value, slope)
        } else {
            (self.high, 0.0)
        }
    }
}

fn smooth_edge(x: f64) -> (f64, f64) {
    if x > 0.0 {
        let v = (-1.0 / x).exp();
        (v, v / (x * x))
    } else {
        (0.0, 0.0)
    }
}

/// C-infinity `f` with `f = 1` on `|r| <= 1`, `f = 0` on `|r| >= 2`,
/// monotone in `|r|` between. Returns `(f, f')`.
pub fn compact_step(r: f64) -> (f64, f64) {
    let s = r.abs();
    if s <= 1.0 {
        return (1.0, 0.0);
    }
    if s >= 2.0 {
        return (0.0, 0.0);
    }
    let (a, da) = smooth_edge(2.0 - s);
    let (b, db) = smooth_edge(s - 1.0);
    let denom = a + b;
    // d/ds [a / (a + b)] with a' = -da, b' = db
    let dfds = (-da * b - a * db) / (denom * denom);
    (a / denom, dfds * r.signum())
}

/// Cutoff of the diffusivity `r^{m-1}`.
pub fn build_cutoff_h(params: &ProblemParams, spec: &RegularizationSpec) -> Result<CutoffFn> {
    CutoffFn::new(params.m() - 1.0, spec, NegativeTail::Flat)
}

/// Cutoff of `r^{m-2}`, the coefficient of the squared gradient.
pub fn build_cutoff_g(params: &ProblemParams, spec: &RegularizationSpec) -> Result<CutoffFn> {
    CutoffFn::new(params.m() - 2.0, spec, NegativeTail::Compact)
}

/// Normalized C-infinity bump supported on `[-1, 1]` (unnormalized form).
fn kernel(z: f64) -> f64 {
    if z.abs() < 1.0 {
        (-1.0 / (1.0 - z * z)).exp()
    } else {
        0.0
    }
}

/// Largest admissible mollification width (exclusive).
pub const MAX_MOLLIFIER_DELTA: f64 = 1.0 / 12.0;

/// Builds `delta + delta^alpha x^2 (1 - x) + (u_0^* * J_delta)(x)`, where
/// `u_0^*` is `u_0` cut to zero outside `[2 delta, 1 - 2 delta]` and
/// `J_delta` is the bump of radius `delta`, normalized on the grid lattice
/// so constants are reproduced away from the boundary.
pub fn mollify_initial(u0: &Field, params: &ProblemParams, delta: f64) -> Result<Field> {
    if !(delta > 0.0 && delta < MAX_MOLLIFIER_DELTA) {
        return Err(Error::DeltaOutOfRange(delta));
    }
    let grid = u0.grid();
    let n = grid.len();
    let dx = grid.dx();
    let radius = (delta / dx).ceil() as usize;
    let taps: Vec<f64> = (0..=radius).map(|k| kernel(k as f64 * dx / delta)).collect();
    let lattice_sum = taps[0] + 2.0 * taps[1..].iter().sum::<f64>();

    let truncated: Vec<f64> = grid
        .nodes()
        .zip(u0.values())
        .map(|(x, &v)| if x >= 2.0 * delta && x <= 1.0 - 2.0 * delta { v } else { 0.0 })
        .collect();

    let cubic = delta.powf(params.alpha());
    let mut values = Vec::with_capacity(n);
    for i in 0..n {
        let lo = i.saturating_sub(radius);
        let hi = (i + radius).min(n - 1);
        let smoothed: f64 = (lo..=hi)
            .map(|j| taps[i.abs_diff(j)] * truncated[j] * if j == 0 || j == n - 1 { 0.5 } else { 1.0 })
            .sum::<f64>()
            / lattice_sum;
        let x = grid.x(i);
        values.push(delta + cubic * x * x * (1.0 - x) + smoothed);
    }
    Field::new(grid, values, u0.time())
}

/// Which corridor edge the solution crossed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum BreachEdge {
    Lower,
    Upper,
}

/// Exit diagnostics of a corridor breach.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Breach {
    pub edge: BreachEdge,
    pub time: f64,
    pub value: f64,
}

/// Mass-based floor `[eta^{m/q} + c_hat (1 + t^{-1/2})]^{q/m}` for the
/// lower corridor edge.
pub fn empirical_floor(params: &ProblemParams, eta: f64, c_hat: f64, t_exit: f64) -> f64 {
    let ratio = params.m() / q_exponent(params.m());
    (eta.powf(ratio) + c_hat * (1.0 + t_exit.powf(-0.5))).powf(1.0 / ratio)
}

/// Initial corridor `(min(u_0)/2, 2M)`, or the expanded corridor after a
/// breach: `M_bar = 2 max(2M, C_0(T))` and
/// `delta = min(floor, delta_prev) / 2`.
pub fn corridor_schedule(
    params: &ProblemParams,
    u0: &Field,
    prior: Option<(&RegularizationSpec, &Breach, f64)>,
) -> Result<RegularizationSpec> {
    u0.ensure_positive()?;
    match prior {
        None => RegularizationSpec::new(0.5 * u0.min(), 2.0 * params.max_initial()),
        Some((prev, breach, c_hat)) => {
            let eta = eta(params, u0)?;
            let floor = empirical_floor(params, eta, c_hat.max(0.0), breach.time);
            let delta = 0.5 * floor.min(prev.delta);
            let target = 2.0 * f64::max(2.0 * params.max_initial(), c0_bound(params, params.horizon()));
            let m_bar = target.max(prev.m_bar);
            RegularizationSpec::new(delta, m_bar)
        }
    }
}
