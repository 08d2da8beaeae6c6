//! Closed-form reference solutions: the Lambert W function, the stress and
//! equilibrium concentration around a circular hole in a tensioned plate,
//! transient diffusion in a slab, and the nondimensional scalings.

use std::f64::consts::{E, PI};

use thiserror::Error;

use crate::constitutive::MaterialParams;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("Lambert W is undefined for x = {0} < -1/e")]
    LambertDomain(f64),
    #[error("Lambert W iteration did not converge for x = {0}")]
    LambertNoConvergence(f64),
    #[error("radius {r} lies inside the hole of radius {r0}")]
    InsideHole { r: f64, r0: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParams(String),
}

/// Principal branch `W0(x)`, the solution of `w e^w = x` with `w >= -1`.
pub fn lambert_w(x: f64) -> Result<f64, OracleError> {
    let branch = -1.0 / E;
    if x.is_nan() || x < branch {
        return Err(OracleError::LambertDomain(x));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    if x == branch {
        return Ok(-1.0);
    }
    if x.is_infinite() {
        return Ok(f64::INFINITY);
    }
    let mut w = if x < -0.25 {
        // Expansion about the branch point.
        let p = (2.0 * (E * x + 1.0)).max(0.0).sqrt();
        -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p * p * p
    } else if x < 3.0 {
        (1.0 + x).ln() * (1.0 - 0.25 * (1.0 + x).ln().min(1.0))
    } else {
        let l = x.ln();
        l - l.ln() + l.ln() / l
    };
    for _ in 0..50 {
        let ew = w.exp();
        let f = w * ew - x;
        let wp1 = w + 1.0;
        if wp1.abs() < 1e-300 {
            break;
        }
        let step = f / (ew * wp1 - (w + 2.0) * f / (2.0 * wp1));
        w -= step;
        if step.abs() <= 1e-15 * (1.0 + w.abs()) {
            return Ok(w);
        }
    }
    if (w * w.exp() - x).abs() <= 1e-12 * x.abs().max(1.0) {
        Ok(w)
    } else {
        Err(OracleError::LambertNoConvergence(x))
    }
}

/// Parameters of the tensioned plate with a hole.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalyticParams {
    /// Remote tension, Pa.
    pub p: f64,
    /// Hole radius, m.
    pub r0: f64,
    pub nu: f64,
    /// Young's modulus, Pa.
    pub e: f64,
    /// Reference concentration.
    pub c0: f64,
    /// Partial molar volume entering `k`, m³/mol.
    pub v_h: f64,
    /// Concentration expansion coefficient.
    pub alpha_c: f64,
    pub gas_constant: f64,
    pub temperature: f64,
}

impl AnalyticParams {
    /// Takes `V_H = Ω` and `α_c = Ω/3` from the material.
    pub fn from_material(m: &MaterialParams, p: f64, r0: f64, c0: f64) -> Self {
        AnalyticParams {
            p,
            r0,
            nu: m.poisson_ratio,
            e: m.youngs_modulus,
            c0,
            v_h: m.molar_volume,
            alpha_c: m.molar_volume / 3.0,
            gas_constant: m.gas_constant,
            temperature: m.temperature,
        }
    }

    pub fn k(&self) -> f64 {
        self.v_h / (self.gas_constant * self.temperature)
    }

    pub fn q(&self) -> f64 {
        2.0 * self.alpha_c * self.v_h * self.e / (9.0 * (1.0 - self.nu) * self.gas_constant * self.temperature)
    }

    fn check_radius(&self, r: f64) -> Result<(), OracleError> {
        if !(self.r0 > 0.0) {
            return Err(OracleError::InvalidParams(format!("hole radius {} must be positive", self.r0)));
        }
        if r < self.r0 {
            return Err(OracleError::InsideHole { r, r0: self.r0 });
        }
        Ok(())
    }
}

/// Hydrostatic stress around the hole in the closed form
/// `((1+ν)p/3)(2R0²/r² cos 2β − 1)`.
///
/// This is the negative of the classical plane-strain Kirsch field (see
/// [`kirsch_hydrostatic`]); no rotation of `β` maps one onto the other.
pub fn hole_hydrostatic(r: f64, beta: f64, params: &AnalyticParams) -> Result<f64, OracleError> {
    hole_hydrostatic_offset(r, beta, 0.0, params)
}

/// [`hole_hydrostatic`] evaluated at `β + beta_offset`.
pub fn hole_hydrostatic_offset(
    r: f64,
    beta: f64,
    beta_offset: f64,
    params: &AnalyticParams,
) -> Result<f64, OracleError> {
    params.check_radius(r)?;
    let ratio = params.r0 * params.r0 / (r * r);
    Ok((1.0 + params.nu) * params.p / 3.0 * (2.0 * ratio * (2.0 * (beta + beta_offset)).cos() - 1.0))
}

/// Plane-strain Kirsch hydrostatic stress `((1+ν)p/3)(1 − 2R0²/r² cos 2θ)`
/// for remote tension `p` along `θ = 0`.
pub fn kirsch_hydrostatic(r: f64, theta: f64, params: &AnalyticParams) -> Result<f64, OracleError> {
    params.check_radius(r)?;
    let ratio = params.r0 * params.r0 / (r * r);
    Ok((1.0 + params.nu) * params.p / 3.0 * (1.0 - 2.0 * ratio * (2.0 * theta).cos()))
}

/// Equilibrium concentration around the hole, `A e^{−W(A)}` with
/// `A = C0 exp(−k (2(1+ν)R0²p/(3r²)) cos 2β + C0 Q)`.
pub fn hole_concentration(r: f64, beta: f64, params: &AnalyticParams) -> Result<f64, OracleError> {
    params.check_radius(r)?;
    let a = hole_lambert_argument(r, beta, params);
    let w = lambert_w(a)?;
    Ok(a * (-w).exp())
}

/// The argument `A` of [`hole_concentration`].
pub fn hole_lambert_argument(r: f64, beta: f64, params: &AnalyticParams) -> f64 {
    let s = 2.0 * (1.0 + params.nu) * params.r0 * params.r0 * params.p / (3.0 * r * r);
    params.c0 * (-params.k() * s * (2.0 * beta).cos() + params.c0 * params.q()).exp()
}

/// Series value and the magnitude of the first omitted term.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesValue {
    pub value: f64,
    pub truncation_bound: f64,
}

/// Concentration in a slab `0 <= x <= L` held at `c = 1` on `x = 0`,
/// insulated at `x = L`, initially empty.
pub fn slab_series(x: f64, t: f64, d: f64, l: f64, n_terms: usize) -> SeriesValue {
    let term = |n: usize| {
        let m = (2 * n + 1) as f64 * PI / 2.0;
        let amp = 2.0 / m;
        (amp * (m * x / l).sin() * (-m * m * d * t / (l * l)).exp(), amp * (-m * m * d * t / (l * l)).exp())
    };
    let mut sum = 0.0;
    for n in 0..n_terms {
        sum += term(n).0;
    }
    SeriesValue {
        value: 1.0 - sum,
        truncation_bound: term(n_terms).1,
    }
}

/// Characteristic scales: `t* = L*²/D`, `c* = c_max`, `σ* = RT/Ω`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NondimScales {
    pub length: f64,
    pub time: f64,
    pub concentration: f64,
    pub stress: f64,
}

impl NondimScales {
    pub fn new(params: &MaterialParams, length: f64) -> Result<Self, OracleError> {
        let s = NondimScales {
            length,
            time: length * length / params.diffusivity,
            concentration: params.c_max,
            stress: params.gas_constant * params.temperature / params.molar_volume,
        };
        for (name, v) in [
            ("length", s.length),
            ("time", s.time),
            ("concentration", s.concentration),
            ("stress", s.stress),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(OracleError::InvalidParams(format!("{name} scale {v} must be positive and finite")));
            }
        }
        Ok(s)
    }

    pub fn x_hat(&self, x: f64) -> f64 {
        x / self.length
    }
    pub fn x_from_hat(&self, x: f64) -> f64 {
        x * self.length
    }
    pub fn t_hat(&self, t: f64) -> f64 {
        t / self.time
    }
    pub fn t_from_hat(&self, t: f64) -> f64 {
        t * self.time
    }
    pub fn c_hat(&self, c: f64) -> f64 {
        c / self.concentration
    }
    pub fn c_from_hat(&self, c: f64) -> f64 {
        c * self.concentration
    }
    pub fn sigma_hat(&self, s: f64) -> f64 {
        s / self.stress
    }
    pub fn sigma_from_hat(&self, s: f64) -> f64 {
        s * self.stress
    }
}
