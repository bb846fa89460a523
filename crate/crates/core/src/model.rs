//! Problem parameters, the uniform grid on `[0, 1]`, sampled fields and
//! initial-data presets.
//!
//! The equation being studied is
//!
//! ```text
//! u_t = (u^{m-1} u_x)_x + u^p,   0 < x < 1, t > 0
//! u_x(0, t) = 0,  u_x(1, t) = -u^alpha
//! ```
//!
//! with `-1 < m < 0`, `0 < p < 1`, `alpha > 2 - m` and `0 <= u_0 <= M`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Unvalidated parameter record, as read from a config file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawParams {
    pub m: f64,
    pub p: f64,
    pub alpha: f64,
    #[serde(rename = "M")]
    pub max_initial: f64,
    #[serde(rename = "T")]
    pub horizon: f64,
}

/// Validated exponents and bounds. Construct through [`validate_params`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProblemParams {
    m: f64,
    p: f64,
    alpha: f64,
    #[serde(rename = "M")]
    max_initial: f64,
    #[serde(rename = "T")]
    horizon: f64,
}

impl ProblemParams {
    pub fn new(m: f64, p: f64, alpha: f64, max_initial: f64, horizon: f64) -> Result<Self> {
        validate_params(&RawParams {
            m,
            p,
            alpha,
            max_initial,
            horizon,
        })
    }

    /// Diffusion exponent `m` in `(-1, 0)`.
    pub fn m(&self) -> f64 {
        self.m
    }

    /// Source exponent `p` in `(0, 1)`.
    pub fn p(&self) -> f64 {
        self.p
    }

    /// Outflow exponent `alpha > 2 - m`.
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Upper bound `M` on the initial data.
    pub fn max_initial(&self) -> f64 {
        self.max_initial
    }

    /// Time horizon `T`.
    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// Exponent `2 - m - alpha` of the energy integral; always negative.
    pub fn energy_exponent(&self) -> f64 {
        2.0 - self.m - self.alpha
    }

    /// Exponent `m - 1 + alpha` of the boundary flux `u(1, t)^{m-1+alpha}`.
    pub fn flux_exponent(&self) -> f64 {
        self.m - 1.0 + self.alpha
    }

    pub fn with_horizon(&self, horizon: f64) -> Result<Self> {
        Self::new(self.m, self.p, self.alpha, self.max_initial, horizon)
    }

    pub fn with_max_initial(&self, max_initial: f64) -> Result<Self> {
        Self::new(self.m, self.p, self.alpha, max_initial, self.horizon)
    }

    pub fn raw(&self) -> RawParams {
        RawParams {
            m: self.m,
            p: self.p,
            alpha: self.alpha,
            max_initial: self.max_initial,
            horizon: self.horizon,
        }
    }
}

/// Checks the admissible ranges in the fixed order `m, p, alpha, M, T` and
/// reports the first violation.
pub fn validate_params(raw: &RawParams) -> Result<ProblemParams> {
    let RawParams {
        m,
        p,
        alpha,
        max_initial,
        horizon,
    } = *raw;
    let violation = |field, constraint| Err(Error::RangeViolation { field, constraint });
    if !(m > -1.0 && m < 0.0) {
        return violation("m", "-1<m<0");
    }
    if !(p > 0.0 && p < 1.0) {
        return violation("p", "0<p<1");
    }
    if !(alpha.is_finite() && alpha > 2.0 - m) {
        return violation("alpha", "2-m<alpha");
    }
    if !(max_initial.is_finite() && max_initial > 0.0) {
        return violation("M", "M>0");
    }
    if !(horizon.is_finite() && horizon > 0.0) {
        return violation("T", "T>0");
    }
    Ok(ProblemParams {
        m,
        p,
        alpha,
        max_initial,
        horizon,
    })
}

/// Uniform grid on `[0, 1]` with `n` nodes including both endpoints.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Grid {
    n: usize,
}

impl Grid {
    pub fn new(n: usize) -> Result<Self> {
        if n < 3 {
            return Err(Error::InvalidGrid(format!("need at least 3 nodes, got {n}")));
        }
        Ok(Self { n })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dx(&self) -> f64 {
        1.0 / (self.n - 1) as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        i as f64 / (self.n - 1) as f64
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n).map(move |i| self.x(i))
    }

    /// Trapezoid weights; they sum to one.
    pub fn weight(&self, i: usize) -> f64 {
        if i == 0 || i == self.n - 1 {
            0.5 * self.dx()
        } else {
            self.dx()
        }
    }

    /// Trapezoid rule for samples on this grid.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        debug_assert_eq!(values.len(), self.n);
        let interior: f64 = values[1..self.n - 1].iter().sum();
        self.dx() * (interior + 0.5 * (values[0] + values[self.n - 1]))
    }

    /// Trapezoid rule of `f(u_i)` without allocating.
    pub fn integrate_map(&self, values: &[f64], f: impl Fn(f64) -> f64) -> f64 {
        let last = self.n - 1;
        let interior: f64 = values[1..last].iter().map(|&v| f(v)).sum();
        self.dx() * (interior + 0.5 * (f(values[0]) + f(values[last])))
    }

    /// Whether `fine` refines `self` by halving the spacing (`2n - 1` nodes).
    pub fn is_refined_by(&self, fine: &Grid) -> bool {
        fine.n == 2 * self.n - 1
    }
}

/// Nonnegative samples of the solution on a grid at one time.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Field {
    grid: Grid,
    values: Vec<f64>,
    time: f64,
}

impl Field {
    pub fn new(grid: Grid, values: Vec<f64>, time: f64) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidField(format!(
                "expected {} samples, got {}",
                grid.len(),
                values.len()
            )));
        }
        if !(time.is_finite() && time >= 0.0) {
            return Err(Error::InvalidField(format!("bad timestamp {time}")));
        }
        if let Some((i, v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !v.is_finite() || **v < 0.0)
        {
            return Err(Error::InvalidField(format!(
                "sample {v} at node {i} is negative or non-finite"
            )));
        }
        Ok(Self { grid, values, time })
    }

    pub fn constant(grid: Grid, value: f64) -> Result<Self> {
        Self::new(grid, vec![value; grid.len()], 0.0)
    }

    pub fn from_fn(grid: Grid, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(grid, grid.nodes().map(f).collect(), 0.0)
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn at_time(mut self, time: f64) -> Self {
        self.time = time;
        self
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Index and value of the smallest sample.
    pub fn argmin(&self) -> (usize, f64) {
        self.values
            .iter()
            .copied()
            .enumerate()
            .fold((0, f64::INFINITY), |acc, (i, v)| if v < acc.1 { (i, v) } else { acc })
    }

    /// Fails with [`Error::NonpositiveData`] unless every sample is `> 0`.
    pub fn ensure_positive(&self) -> Result<()> {
        let (i, v) = self.argmin();
        if v > 0.0 {
            Ok(())
        } else {
            Err(Error::NonpositiveData {
                x: self.grid.x(i),
                value: v,
            })
        }
    }

    /// Pointwise sum, used for mass linearity checks.
    pub fn add(&self, other: &Field) -> Result<Field> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch(self.grid.len(), other.grid.len()));
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a + b)
            .collect();
        Field::new(self.grid, values, self.time)
    }
}

/// Trapezoid approximation of `\int_0^1 f dx`.
pub fn mass(f: &Field) -> f64 {
    f.grid.integrate(&f.values)
}

/// Shape of an initial-data preset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialKind {
    Constant {
        value: f64,
    },
    /// Smooth compactly supported bump `height * exp(1 - 1/(1 - r^2))`,
    /// `r = (x - center) / width`.
    Bump {
        center: f64,
        width: f64,
        height: f64,
    },
    /// `height` on `(a, b)`, `height / 2` at the jump nodes, zero elsewhere.
    Plateau {
        a: f64,
        b: f64,
        height: f64,
    },
    /// Equally spaced samples on `[0, 1]`, linearly interpolated.
    Table {
        samples: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "FlatInitial", into = "FlatInitial")]
pub struct InitialSpec {
    pub kind: InitialKind,
    /// Nonnegative floor added to the preset.
    #[serde(default)]
    pub base: f64,
    /// Cap the samples at `M` instead of rejecting them.
    #[serde(default)]
    pub clip: bool,
}

/// Wire form of [`InitialSpec`]: one flat object keyed by `kind`, with
/// fields foreign to that kind rejected.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FlatInitial {
    kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    value: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    center: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    width: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    height: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    a: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    b: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    samples: Option<Vec<f64>>,
    #[serde(default)]
    base: f64,
    #[serde(default)]
    clip: bool,
}

impl TryFrom<FlatInitial> for InitialSpec {
    type Error = String;

    fn try_from(f: FlatInitial) -> std::result::Result<Self, String> {
        let present = [
            ("value", f.value.is_some()),
            ("center", f.center.is_some()),
            ("width", f.width.is_some()),
            ("height", f.height.is_some()),
            ("a", f.a.is_some()),
            ("b", f.b.is_some()),
            ("samples", f.samples.is_some()),
        ];
        let allowed: &[&str] = match f.kind.as_str() {
            "constant" => &["value"],
            "bump" => &["center", "width", "height"],
            "plateau" => &["a", "b", "height"],
            "table" => &["samples"],
            other => return Err(format!("unknown initial kind `{other}`")),
        };
        if let Some((name, _)) = present.iter().find(|(n, on)| *on && !allowed.contains(n)) {
            return Err(format!("field `{name}` does not apply to kind `{}`", f.kind));
        }
        let need = |v: Option<f64>, name: &str| v.ok_or_else(|| format!("kind `{}` needs `{name}`", f.kind));
        let kind = match f.kind.as_str() {
            "constant" => InitialKind::Constant { value: need(f.value, "value")? },
            "bump" => InitialKind::Bump {
                center: need(f.center, "center")?,
                width: need(f.width, "width")?,
                height: need(f.height, "height")?,
            },
            "plateau" => InitialKind::Plateau {
                a: need(f.a, "a")?,
                b: need(f.b, "b")?,
                height: need(f.height, "height")?,
            },
            _ => InitialKind::Table {
                samples: f.samples.clone().ok_or("kind `table` needs `samples`")?,
            },
        };
        Ok(InitialSpec { kind, base: f.base, clip: f.clip })
    }
}

impl From<InitialSpec> for FlatInitial {
    fn from(spec: InitialSpec) -> Self {
        let mut f = FlatInitial { base: spec.base, clip: spec.clip, ..Default::default() };
        match spec.kind {
            InitialKind::Constant { value } => {
                f.kind = "constant".into();
                f.value = Some(value);
            }
            InitialKind::Bump { center, width, height } => {
                f.kind = "bump".into();
                (f.center, f.width, f.height) = (Some(center), Some(width), Some(height));
            }
            InitialKind::Plateau { a, b, height } => {
                f.kind = "plateau".into();
                (f.a, f.b, f.height) = (Some(a), Some(b), Some(height));
            }
            InitialKind::Table { samples } => {
                f.kind = "table".into();
                f.samples = Some(samples);
            }
        }
        f
    }
}

impl InitialSpec {
    pub fn new(kind: InitialKind) -> Self {
        Self {
            kind,
            base: 0.0,
            clip: false,
        }
    }

    pub fn with_base(mut self, base: f64) -> Self {
        self.base = base;
        self
    }

    pub fn clipped(mut self) -> Self {
        self.clip = true;
        self
    }

    fn sample(&self, x: f64) -> f64 {
        let raw = match &self.kind {
            InitialKind::Constant { value } => *value,
            InitialKind::Bump {
                center,
                width,
                height,
            } => height * bump_profile((x - center) / width),
            InitialKind::Plateau { a, b, height } => {
                const EDGE: f64 = 1e-12;
                if (x - a).abs() <= EDGE || (x - b).abs() <= EDGE {
                    0.5 * height
                } else if x > *a && x < *b {
                    *height
                } else {
                    0.0
                }
            }
            InitialKind::Table { samples } => interpolate_table(samples, x),
        };
        raw + self.base
    }

    fn check_shape(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidInitial(msg.to_string()));
        if !(self.base.is_finite() && self.base >= 0.0) {
            return bad("base must be finite and nonnegative");
        }
        match &self.kind {
            InitialKind::Constant { value } if !value.is_finite() => bad("non-finite constant"),
            InitialKind::Bump { width, height, .. } if !(*width > 0.0 && height.is_finite()) => {
                bad("bump needs width > 0")
            }
            InitialKind::Plateau { a, b, .. } if !(a < b) => bad("plateau needs a < b"),
            InitialKind::Table { samples } if samples.len() < 2 => {
                bad("table needs at least two samples")
            }
            _ => Ok(()),
        }
    }
}

/// `exp(1 - 1/(1 - r^2))` on `|r| < 1`, zero outside; peaks at 1.
pub fn bump_profile(r: f64) -> f64 {
    if r.abs() < 1.0 {
        (1.0 - 1.0 / (1.0 - r * r)).exp()
    } else {
        0.0
    }
}

fn interpolate_table(samples: &[f64], x: f64) -> f64 {
    let segments = (samples.len() - 1) as f64;
    let s = (x.clamp(0.0, 1.0) * segments).min(segments);
    let i = (s.floor() as usize).min(samples.len() - 2);
    let frac = s - i as f64;
    samples[i] * (1.0 - frac) + samples[i + 1] * frac
}

/// Samples an initial preset at time zero, enforcing `0 <= u_0 <= M` and a
/// positive mean.
pub fn make_initial(spec: &InitialSpec, grid: Grid, params: &ProblemParams) -> Result<Field> {
    spec.check_shape()?;
    let bound = params.max_initial();
    let mut values = Vec::with_capacity(grid.len());
    for x in grid.nodes() {
        let mut v = spec.sample(x);
        if !v.is_finite() || v < 0.0 {
            return Err(Error::InvalidInitial(format!("sample {v} at x={x}")));
        }
        if v > bound {
            if spec.clip {
                v = bound;
            } else {
                return Err(Error::BoundViolation { x, value: v, bound });
            }
        }
        values.push(v);
    }
    let field = Field::new(grid, values, 0.0)?;
    if mass(&field) <= 0.0 {
        return Err(Error::EmptyMass);
    }
    Ok(field)
}
