//! Closed-form a priori bounds: the reaction envelope `C_0(t)`, the
//! `L^{1+q}` envelope, the transformed-gradient exponent and the mass lower
//! bound driven by the energy integral `\int u^{2-m-alpha}`.

use serde::Serialize;

use crate::error::Result;
use crate::model::{Field, ProblemParams};

/// Upper envelope `[(1-p) t + M^{1-p}]^{1/(1-p)}` for the supremum of the
/// solution on `[0, t]`.
pub fn c0_bound(params: &ProblemParams, t: f64) -> f64 {
    reaction_envelope(params.max_initial(), params.p(), t)
}

/// Same envelope with the `L^{1+q}` norm of the data in place of `M`.
pub fn lq_bound(params: &ProblemParams, u0_norm: f64, t: f64) -> f64 {
    reaction_envelope(u0_norm, params.p(), t)
}

pub(crate) fn reaction_envelope(start: f64, p: f64, t: f64) -> f64 {
    let k = 1.0 - p;
    (k * t + start.powf(k)).powf(1.0 / k)
}

/// `q = (3m - 1) / (2(m - 1))`, the exponent for which `u^{m/q}` has a
/// gradient bound of shape `C_T (1 + t^{-1/2})`.
pub fn q_exponent(m: f64) -> f64 {
    (3.0 * m - 1.0) / (2.0 * (m - 1.0))
}

/// The two expressions that must be positive for the gradient estimate:
/// `(1 - q)(q - 1 - q/m)` and `2m/q + 1 - m`.
pub fn gradient_sign_conditions(m: f64) -> (f64, f64) {
    let q = q_exponent(m);
    ((1.0 - q) * (q - 1.0 - q / m), 2.0 * m / q + 1.0 - m)
}

/// `\int_0^1 u^k dx` by the trapezoid rule.
pub fn power_integral(f: &Field, k: f64) -> f64 {
    f.grid().integrate_map(f.values(), |v| v.powf(k))
}

/// Right-hand side of the energy inequality:
/// `\int u_0^{2-m-alpha} dx + (alpha + m - 2) t`.
pub fn energy_bound(params: &ProblemParams, energy0: f64, t: f64) -> f64 {
    energy0 + (params.alpha() + params.m() - 2.0) * t
}

/// Lower bound on `\int u(x, t) dx`:
/// `[(alpha + m - 2) t + \int u_0^{2-m-alpha}]^{1/(2-m-alpha)}`.
pub fn mass_lower_bound(params: &ProblemParams, u0: &Field, t: f64) -> Result<f64> {
    u0.ensure_positive()?;
    let k = params.energy_exponent();
    Ok(mass_lower_from_energy(params, power_integral(u0, k), t))
}

pub(crate) fn mass_lower_from_energy(params: &ProblemParams, energy0: f64, t: f64) -> f64 {
    energy_bound(params, energy0, t).powf(1.0 / params.energy_exponent())
}

/// The mass floor at the horizon, used to size the lower corridor edge.
pub fn eta(params: &ProblemParams, u0: &Field) -> Result<f64> {
    mass_lower_bound(params, u0, params.horizon())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum BoundLabel {
    C0,
    Lq,
    MassLower,
    Eta,
}

/// A bound evaluated as a function of time, with any data integral baked in.
#[derive(Debug, Clone, Serialize)]
pub struct BoundCurve {
    pub label: BoundLabel,
    pub params: ProblemParams,
    /// `||u_0||_{L^{1+q}}` for `Lq`, `\int u_0^{2-m-alpha}` for `MassLower`/`Eta`.
    pub data_constant: Option<f64>,
}

impl BoundCurve {
    pub fn c0(params: ProblemParams) -> Self {
        Self {
            label: BoundLabel::C0,
            params,
            data_constant: None,
        }
    }

    pub fn lq(params: ProblemParams, u0_norm: f64) -> Self {
        Self {
            label: BoundLabel::Lq,
            params,
            data_constant: Some(u0_norm),
        }
    }

    pub fn mass_lower(params: ProblemParams, u0: &Field) -> Result<Self> {
        u0.ensure_positive()?;
        Ok(Self {
            label: BoundLabel::MassLower,
            params,
            data_constant: Some(power_integral(u0, params.energy_exponent())),
        })
    }

    pub fn eta(params: ProblemParams, u0: &Field) -> Result<Self> {
        Ok(Self {
            label: BoundLabel::Eta,
            ..Self::mass_lower(params, u0)?
        })
    }

    pub fn evaluate(&self, t: f64) -> f64 {
        let c = self.data_constant.unwrap_or(0.0);
        match self.label {
            BoundLabel::C0 => c0_bound(&self.params, t),
            BoundLabel::Lq => lq_bound(&self.params, c, t),
            BoundLabel::MassLower => mass_lower_from_energy(&self.params, c, t),
            BoundLabel::Eta => mass_lower_from_energy(&self.params, c, self.params.horizon()),
        }
    }

    /// `(t, bound)` pairs at `count` equally spaced times on `[0, T]`.
    pub fn sample(&self, count: usize) -> Vec<(f64, f64)> {
        let horizon = self.params.horizon();
        let last = count.max(2) - 1;
        (0..=last)
            .map(|i| {
                let t = horizon * i as f64 / last as f64;
                (t, self.evaluate(t))
            })
            .collect()
    }
}
