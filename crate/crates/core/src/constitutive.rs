//! Plane-strain material point: isotropic elasticity, chemical (swelling)
//! strain and J2 plasticity with linear isotropic or kinematic hardening.

use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use thiserror::Error;

/// Universal gas constant, J/(mol K).
pub const GAS_CONSTANT: f64 = 8.314;

/// Yield tolerance relative to the initial yield stress.
pub const YIELD_TOL: f64 = 1e-6;

/// Iteration cap for the local consistency solve.
pub const MAX_LOCAL_ITERATIONS: usize = 50;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConstitutiveError {
    #[error("invalid material parameter: {0}")]
    InvalidParams(String),
    #[error("non-finite trial state")]
    NonFinite,
    #[error("return mapping did not converge in {iterations} iterations (|f| = {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
}

/// Symmetric tensor with the in-plane components and the out-of-plane normal.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SymTensor2D {
    pub xx: f64,
    pub yy: f64,
    pub zz: f64,
    pub xy: f64,
}

impl SymTensor2D {
    pub const ZERO: SymTensor2D = SymTensor2D {
        xx: 0.0,
        yy: 0.0,
        zz: 0.0,
        xy: 0.0,
    };
    pub const IDENTITY: SymTensor2D = SymTensor2D {
        xx: 1.0,
        yy: 1.0,
        zz: 1.0,
        xy: 0.0,
    };

    pub fn new(xx: f64, yy: f64, zz: f64, xy: f64) -> Self {
        SymTensor2D { xx, yy, zz, xy }
    }

    /// In-plane strain tensor; `zz` is zero.
    pub fn plane(xx: f64, yy: f64, xy: f64) -> Self {
        SymTensor2D { xx, yy, zz: 0.0, xy }
    }

    pub fn trace(&self) -> f64 {
        self.xx + self.yy + self.zz
    }

    pub fn deviator(&self) -> Self {
        let m = self.trace() / 3.0;
        SymTensor2D::new(self.xx - m, self.yy - m, self.zz - m, self.xy)
    }

    /// Double contraction `A : B`, counting the shear component twice.
    pub fn dot(&self, o: &Self) -> f64 {
        self.xx * o.xx + self.yy * o.yy + self.zz * o.zz + 2.0 * self.xy * o.xy
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.xx.is_finite() && self.yy.is_finite() && self.zz.is_finite() && self.xy.is_finite()
    }

    /// Stress-like component vector `[xx, yy, zz, xy]`.
    pub fn to_array(&self) -> [f64; 4] {
        [self.xx, self.yy, self.zz, self.xy]
    }

    /// Strain-like component vector with engineering shear `[xx, yy, zz, 2 xy]`.
    pub fn to_engineering(&self) -> [f64; 4] {
        [self.xx, self.yy, self.zz, 2.0 * self.xy]
    }

    pub fn from_engineering(v: [f64; 4]) -> Self {
        SymTensor2D::new(v[0], v[1], v[2], 0.5 * v[3])
    }

    pub fn from_array(v: [f64; 4]) -> Self {
        SymTensor2D::new(v[0], v[1], v[2], v[3])
    }
}

impl Add for SymTensor2D {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        SymTensor2D::new(self.xx + o.xx, self.yy + o.yy, self.zz + o.zz, self.xy + o.xy)
    }
}

impl AddAssign for SymTensor2D {
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

impl Sub for SymTensor2D {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        SymTensor2D::new(self.xx - o.xx, self.yy - o.yy, self.zz - o.zz, self.xy - o.xy)
    }
}

impl Neg for SymTensor2D {
    type Output = Self;
    fn neg(self) -> Self {
        self * -1.0
    }
}

impl Mul<f64> for SymTensor2D {
    type Output = Self;
    fn mul(self, s: f64) -> Self {
        SymTensor2D::new(self.xx * s, self.yy * s, self.zz * s, self.xy * s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Hardening {
    /// Purely elastic material; yield is never checked.
    #[default]
    None,
    Isotropic,
    Kinematic,
}

impl Hardening {
    pub fn name(&self) -> &'static str {
        match self {
            Hardening::None => "none",
            Hardening::Isotropic => "isotropic",
            Hardening::Kinematic => "kinematic",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "none" | "elastic" => Some(Hardening::None),
            "isotropic" => Some(Hardening::Isotropic),
            "kinematic" => Some(Hardening::Kinematic),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaterialParams {
    /// Young's modulus, Pa.
    pub youngs_modulus: f64,
    pub poisson_ratio: f64,
    /// Initial yield stress, Pa.
    pub yield_stress: f64,
    pub hardening: Hardening,
    /// Isotropic hardening modulus `dσ_y / dε̄ᵖ`, Pa.
    pub isotropic_modulus: f64,
    /// Kinematic hardening constant: `Δβ = h Δεᵖ`, Pa.
    pub kinematic_modulus: f64,
    /// Diffusivity, m²/s.
    pub diffusivity: f64,
    /// Partial molar volume, m³/mol.
    pub molar_volume: f64,
    pub gas_constant: f64,
    /// Absolute temperature, K.
    pub temperature: f64,
    /// Stress-free reference concentration, mol/m³.
    pub c0: f64,
    /// Concentration scale for normalised output, mol/m³.
    pub c_max: f64,
}

impl MaterialParams {
    /// Steel specimen used for the hole-in-plate comparison.
    pub fn steel() -> Self {
        let e = 210e9;
        MaterialParams {
            youngs_modulus: e,
            poisson_ratio: 0.3,
            yield_stress: 400e6,
            hardening: Hardening::None,
            isotropic_modulus: e / 100.0,
            kinematic_modulus: e / 100.0,
            diffusivity: 1.27e-8,
            molar_volume: 1.96e-6,
            gas_constant: GAS_CONSTANT,
            temperature: 300.0,
            c0: 1.0,
            c_max: 1.0,
        }
    }

    /// Lithium in graphite.
    pub fn graphite() -> Self {
        let e = 19.25e9;
        MaterialParams {
            youngs_modulus: e,
            poisson_ratio: 0.3,
            yield_stress: 100e6,
            hardening: Hardening::None,
            isotropic_modulus: e / 100.0,
            kinematic_modulus: e / 100.0,
            diffusivity: 3.9e-14,
            molar_volume: 4.17e-6,
            gas_constant: GAS_CONSTANT,
            temperature: 300.0,
            c0: 0.0,
            c_max: 2.29e4,
        }
    }

    pub fn with_hardening(mut self, hardening: Hardening) -> Self {
        self.hardening = hardening;
        self
    }

    pub fn is_plastic(&self) -> bool {
        self.hardening != Hardening::None
    }

    pub fn validate(&self) -> Result<(), ConstitutiveError> {
        let bad = |m: String| Err(ConstitutiveError::InvalidParams(m));
        let fields = [
            self.youngs_modulus,
            self.poisson_ratio,
            self.yield_stress,
            self.isotropic_modulus,
            self.kinematic_modulus,
            self.diffusivity,
            self.molar_volume,
            self.gas_constant,
            self.temperature,
            self.c0,
            self.c_max,
        ];
        if fields.iter().any(|v| !v.is_finite()) {
            return bad("all parameters must be finite".into());
        }
        if self.youngs_modulus <= 0.0 {
            return bad(format!("E = {} must be positive", self.youngs_modulus));
        }
        if !(0.0..0.5).contains(&self.poisson_ratio) {
            return bad(format!("nu = {} must lie in [0, 0.5)", self.poisson_ratio));
        }
        if self.diffusivity <= 0.0 {
            return bad(format!("D = {} must be positive", self.diffusivity));
        }
        if self.temperature <= 0.0 {
            return bad(format!("T = {} must be positive", self.temperature));
        }
        if self.gas_constant <= 0.0 {
            return bad(format!("R = {} must be positive", self.gas_constant));
        }
        if self.molar_volume < 0.0 {
            return bad(format!("Omega = {} must be non-negative", self.molar_volume));
        }
        if self.c_max <= 0.0 {
            return bad(format!("c_max = {} must be positive", self.c_max));
        }
        if self.is_plastic() {
            if self.yield_stress <= 0.0 {
                return bad(format!("yield stress {} must be positive", self.yield_stress));
            }
            if self.isotropic_modulus < 0.0 || self.kinematic_modulus < 0.0 {
                return bad("hardening moduli must be non-negative".into());
            }
        }
        Ok(())
    }

    /// Lamé constants `(λ, μ)`.
    pub fn lame(&self) -> (f64, f64) {
        let (e, nu) = (self.youngs_modulus, self.poisson_ratio);
        (e * nu / ((1.0 + nu) * (1.0 - 2.0 * nu)), e / (2.0 * (1.0 + nu)))
    }

    pub fn bulk_modulus(&self) -> f64 {
        let (lambda, mu) = self.lame();
        lambda + 2.0 * mu / 3.0
    }

    /// Stress-diffusion coupling coefficient `Ω / (R T)`, 1/Pa.
    pub fn coupling(&self) -> f64 {
        self.molar_volume / (self.gas_constant * self.temperature)
    }
}

/// 4x4 tangent acting on engineering strain `[xx, yy, zz, γxy]` and
/// producing stress `[xx, yy, zz, xy]`.
pub type Tangent = [[f64; 4]; 4];

pub fn elastic_stiffness(params: &MaterialParams) -> Tangent {
    let (lambda, mu) = params.lame();
    let mut c = [[0.0; 4]; 4];
    for (i, row) in c.iter_mut().enumerate().take(3) {
        for (j, v) in row.iter_mut().enumerate().take(3) {
            *v = lambda + if i == j { 2.0 * mu } else { 0.0 };
        }
    }
    c[3][3] = mu;
    c
}

pub fn apply_tangent(c: &Tangent, strain: &SymTensor2D) -> SymTensor2D {
    let e = strain.to_engineering();
    let mut s = [0.0; 4];
    for i in 0..4 {
        s[i] = (0..4).map(|j| c[i][j] * e[j]).sum();
    }
    SymTensor2D::from_array(s)
}

pub fn chemical_strain(c: f64, params: &MaterialParams) -> SymTensor2D {
    SymTensor2D::IDENTITY * ((c - params.c0) * params.molar_volume / 3.0)
}

pub fn hydrostatic(s: &SymTensor2D) -> f64 {
    s.trace() / 3.0
}

pub fn von_mises(s: &SymTensor2D) -> f64 {
    (1.5 * s.deviator().dot(&s.deviator())).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MaterialState {
    pub stress: SymTensor2D,
    pub plastic_strain: SymTensor2D,
    pub back_stress: SymTensor2D,
    pub eq_plastic_strain: f64,
}

impl MaterialState {
    pub fn with_stress(stress: SymTensor2D) -> Self {
        MaterialState {
            stress,
            ..Default::default()
        }
    }

    /// Current yield stress.
    pub fn yield_stress(&self, params: &MaterialParams) -> f64 {
        match params.hardening {
            Hardening::Isotropic => params.yield_stress + params.isotropic_modulus * self.eq_plastic_strain,
            _ => params.yield_stress,
        }
    }

    /// Yield function in equivalent-stress form, `√(3/2)|S − β| − σ_y`.
    pub fn yield_function(&self, params: &MaterialParams) -> f64 {
        let xi = self.stress.deviator() - self.back_stress;
        (1.5f64).sqrt() * xi.norm() - self.yield_stress(params)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StressUpdate {
    pub state: MaterialState,
    /// Algorithmic tangent `dσ / dε`.
    pub tangent: Tangent,
    pub plastic: bool,
}

/// Backward-Euler update of a material point for total strain increment
/// `d_strain` and concentration increment `d_c`, by radial return.
pub fn update_stress(
    old: &MaterialState,
    d_strain: &SymTensor2D,
    d_c: f64,
    params: &MaterialParams,
) -> Result<StressUpdate, ConstitutiveError> {
    let c_el = elastic_stiffness(params);
    let d_chem = SymTensor2D::IDENTITY * (d_c * params.molar_volume / 3.0);
    let trial = old.stress + apply_tangent(&c_el, &(*d_strain - d_chem));
    if !trial.is_finite() {
        return Err(ConstitutiveError::NonFinite);
    }
    let mut state = MaterialState { stress: trial, ..*old };
    if !params.is_plastic() {
        return Ok(StressUpdate {
            state,
            tangent: c_el,
            plastic: false,
        });
    }

    let (_, mu) = params.lame();
    let bulk = params.bulk_modulus();
    let (iso, kin) = match params.hardening {
        Hardening::Isotropic => (params.isotropic_modulus, 0.0),
        Hardening::Kinematic => (0.0, params.kinematic_modulus),
        Hardening::None => unreachable!(),
    };
    let xi_trial = trial.deviator() - old.back_stress;
    let xi_norm = xi_trial.norm();
    let q_trial = (1.5f64).sqrt() * xi_norm;
    let tol = YIELD_TOL * params.yield_stress;
    if q_trial - old.yield_stress(params) <= tol {
        return Ok(StressUpdate {
            state,
            tangent: c_el,
            plastic: false,
        });
    }

    // Scalar Newton on the consistency condition in terms of Δε̄ᵖ.
    let slope = 3.0 * mu + 1.5 * kin + iso;
    let mut dep = 0.0;
    let mut residual = f64::INFINITY;
    let mut converged = false;
    for _ in 0..MAX_LOCAL_ITERATIONS {
        let sy = params.yield_stress + iso * (old.eq_plastic_strain + dep);
        residual = q_trial - (3.0 * mu + 1.5 * kin) * dep - sy;
        if residual.abs() <= tol {
            converged = true;
            break;
        }
        dep += residual / slope;
    }
    if !converged || !dep.is_finite() {
        return Err(ConstitutiveError::NoConvergence {
            iterations: MAX_LOCAL_ITERATIONS,
            residual,
        });
    }

    let n = xi_trial * (1.0 / xi_norm);
    let d_gamma = (1.5f64).sqrt() * dep;
    let d_plastic = n * d_gamma;
    state.stress = trial - n * (2.0 * mu * d_gamma);
    state.plastic_strain = old.plastic_strain + d_plastic;
    state.back_stress = old.back_stress + d_plastic * kin;
    state.eq_plastic_strain = old.eq_plastic_strain + dep;

    let theta = 1.0 - 2.0 * mu * d_gamma / xi_norm;
    let theta_bar = 2.0 * mu / (2.0 * mu + kin + 2.0 * iso / 3.0) - (1.0 - theta);
    let na = n.to_array();
    let mut tangent = [[0.0; 4]; 4];
    for (i, row) in tangent.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            let vol = if i < 3 && j < 3 { bulk } else { 0.0 };
            let dev = match (i < 3, j < 3) {
                (true, true) => (if i == j { 1.0 } else { 0.0 }) - 1.0 / 3.0,
                (false, false) => 0.5,
                _ => 0.0,
            };
            *v = vol + 2.0 * mu * theta * dev - 2.0 * mu * theta_bar * na[i] * na[j];
        }
    }
    Ok(StressUpdate {
        state,
        tangent,
        plastic: true,
    })
}

/// Drives a material point along a uniaxial-stress path: the axial strain
/// follows `axial` while the lateral normal stresses are iterated to zero.
/// Returns the axial stress after each entry.
pub fn drive_uniaxial(params: &MaterialParams, axial: &[f64]) -> Result<Vec<f64>, ConstitutiveError> {
    params.validate()?;
    let tol = 1e-8 * params.yield_stress.max(1.0);
    let mut state = MaterialState::default();
    let mut strain = SymTensor2D::ZERO;
    let mut out = Vec::with_capacity(axial.len());
    for &target in axial {
        let mut d = SymTensor2D::new(target - strain.xx, 0.0, 0.0, 0.0);
        let mut converged = false;
        let mut update = update_stress(&state, &d, 0.0, params)?;
        for _ in 0..MAX_LOCAL_ITERATIONS {
            let s = update.state.stress;
            if s.yy.abs() <= tol && s.zz.abs() <= tol {
                converged = true;
                break;
            }
            // Solve the 2x2 lateral block of the tangent for the correction.
            let t = &update.tangent;
            let (a, b, c, e) = (t[1][1], t[1][2], t[2][1], t[2][2]);
            let det = a * e - b * c;
            d.yy -= (e * s.yy - b * s.zz) / det;
            d.zz -= (a * s.zz - c * s.yy) / det;
            update = update_stress(&state, &d, 0.0, params)?;
        }
        if !converged {
            return Err(ConstitutiveError::NoConvergence {
                iterations: MAX_LOCAL_ITERATIONS,
                residual: update.state.stress.yy.abs().max(update.state.stress.zz.abs()),
            });
        }
        strain += d;
        state = update.state;
        out.push(state.stress.xx);
    }
    Ok(out)
}
