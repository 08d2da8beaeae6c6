//! Scenario configuration and construction of the two boundary value
//! problems: a plate with a hole under edge loading, and a circular particle
//! charged through its outer surface.
//!
//! Configuration files are flat `section.key = value` lines with `#`
//! comments. Concentrations in the file are normalised by `material.c_max`;
//! times are normalised by `L*²/D`.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt::Write as _;

use thiserror::Error;

use crate::assembly::{BoundaryConditions, Coupling, DirichletBc, Field, FieldState, FluxBc, Schedule, Target, TractionBc};
use crate::constitutive::{Hardening, MaterialParams};
use crate::mesh::{self, BoundaryTag, Geometry, Mesh, MeshError};
use crate::oracles::{NondimScales, OracleError};
use crate::solver::{Probe, Scenario, SolverConfig};
use crate::sparse::Ordering;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid value for `{field}`: {message}")]
    Invalid { field: String, message: String },
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Scale(#[from] OracleError),
}

fn invalid(field: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field: field.to_string(),
        message: message.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScenarioKind {
    /// Plate with hole, displacement-loaded right edge, species source on
    /// the left edge.
    BvpA,
    /// Plate with hole under remote traction with insulated boundaries.
    Validation,
    /// Particle (annulus or disk) under boundary influx.
    BvpB,
}

impl ScenarioKind {
    pub fn name(&self) -> &'static str {
        match self {
            ScenarioKind::BvpA => "bvp_a",
            ScenarioKind::Validation => "validation",
            ScenarioKind::BvpB => "bvp_b",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "bvp_a" => Some(ScenarioKind::BvpA),
            "validation" => Some(ScenarioKind::Validation),
            "bvp_b" => Some(ScenarioKind::BvpB),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GeometryConfig {
    PlateWithHole {
        length: f64,
        radius: f64,
        target_h: f64,
        far_h: Option<f64>,
    },
    Annulus {
        inner_radius: f64,
        outer_radius: f64,
        target_h: f64,
    },
}

impl GeometryConfig {
    pub fn build_mesh(&self) -> Result<Mesh, MeshError> {
        match *self {
            GeometryConfig::PlateWithHole {
                length,
                radius,
                target_h,
                far_h,
            } => mesh::generate_plate_with_hole_graded(length, radius, target_h, far_h),
            GeometryConfig::Annulus {
                inner_radius,
                outer_radius,
                target_h,
            } => mesh::generate_annulus(inner_radius, outer_radius, target_h),
        }
    }

    /// Default nondimensionalisation length: plate side or particle radius.
    pub fn length_scale(&self) -> f64 {
        match *self {
            GeometryConfig::PlateWithHole { length, .. } => length,
            GeometryConfig::Annulus { outer_radius, .. } => outer_radius,
        }
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        let tol = 1e-9 * self.length_scale();
        match *self {
            GeometryConfig::PlateWithHole { length, radius, .. } => {
                x.abs() <= 0.5 * length + tol && y.abs() <= 0.5 * length + tol && x.hypot(y) >= radius - tol
            }
            GeometryConfig::Annulus {
                inner_radius,
                outer_radius,
                ..
            } => {
                let r = x.hypot(y);
                r <= outer_radius + tol && r >= inner_radius - tol
            }
        }
    }

    fn default_probes(&self) -> Vec<Probe> {
        match *self {
            GeometryConfig::PlateWithHole { radius, .. } => {
                vec![Probe::new("A", -radius, 0.0), Probe::new("B", 0.0, radius)]
            }
            GeometryConfig::Annulus {
                inner_radius,
                outer_radius,
                ..
            } => vec![Probe::new("inner", inner_radius, 0.0), Probe::new("outer", outer_radius, 0.0)],
        }
    }
}

/// Time stepping and solver controls; times are nondimensional.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverSettings {
    pub dt_hat: f64,
    pub t_end_hat: f64,
    pub newton_abs_tol: f64,
    pub newton_rel_tol: f64,
    pub newton_max_iter: usize,
    pub stagger_tol: f64,
    pub stagger_max_iter: usize,
    pub max_halvings: usize,
    /// Overrides the geometry's default length scale `L*`.
    pub length_scale: Option<f64>,
}

impl Default for SolverSettings {
    fn default() -> Self {
        let d = SolverConfig::default();
        SolverSettings {
            dt_hat: 0.01,
            t_end_hat: 1.0,
            newton_abs_tol: d.newton_abs_tol,
            newton_rel_tol: d.newton_rel_tol,
            newton_max_iter: d.newton_max_iter,
            stagger_tol: d.stagger_tol,
            stagger_max_iter: d.stagger_max_iter,
            max_halvings: d.max_halvings,
            length_scale: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub kind: ScenarioKind,
    pub geometry: GeometryConfig,
    /// Material with `hardening` holding the law used when plasticity is on.
    pub material: MaterialParams,
    /// Final right-edge displacement, m.
    pub u_final: f64,
    /// Ramp duration of the edge displacement, nondimensional.
    pub t_ramp_hat: f64,
    /// Remote traction magnitude, Pa.
    pub traction: f64,
    /// Boundary influx, mol/(m² s); positive charges the body.
    pub influx: f64,
    /// Initial normalised concentration.
    pub c_initial_hat: f64,
    /// Normalised Dirichlet concentration per boundary tag.
    pub c_dirichlet: Vec<(BoundaryTag, f64)>,
    pub coupling: Coupling,
    pub plasticity: bool,
    pub probes: Vec<Probe>,
    pub solver: SolverSettings,
    pub output_dir: Option<String>,
    /// Write a field snapshot every this many steps (0 = final only).
    pub snapshot_stride: usize,
}

impl ScenarioConfig {
    /// Plate of side 1 m with a 0.1 m hole; right edge pulled by 1 mm.
    pub fn bvp_a_default() -> Self {
        let geometry = GeometryConfig::PlateWithHole {
            length: 1.0,
            radius: 0.1,
            target_h: 0.02,
            far_h: None,
        };
        ScenarioConfig {
            kind: ScenarioKind::BvpA,
            geometry,
            material: MaterialParams {
                c0: 0.0,
                ..MaterialParams::steel().with_hardening(Hardening::Isotropic)
            },
            u_final: 1e-3,
            t_ramp_hat: 0.1,
            traction: 0.0,
            influx: 0.0,
            c_initial_hat: 0.0,
            c_dirichlet: vec![(BoundaryTag::Left, 1.0)],
            coupling: Coupling::TwoWay,
            plasticity: false,
            probes: geometry.default_probes(),
            solver: SolverSettings {
                dt_hat: 0.02,
                t_end_hat: 3.0,
                ..SolverSettings::default()
            },
            output_dir: None,
            snapshot_stride: 0,
        }
    }

    /// Plate under 100 MPa remote tension with uniform initial concentration.
    pub fn validation_default() -> Self {
        let geometry = GeometryConfig::PlateWithHole {
            length: 1.0,
            radius: 0.05,
            target_h: 0.004,
            far_h: Some(0.05),
        };
        ScenarioConfig {
            kind: ScenarioKind::Validation,
            geometry,
            material: MaterialParams {
                c0: 1e-3,
                ..MaterialParams::steel().with_hardening(Hardening::Isotropic)
            },
            u_final: 0.0,
            t_ramp_hat: 0.0,
            traction: 100e6,
            influx: 0.0,
            c_initial_hat: 1e-3,
            c_dirichlet: Vec::new(),
            coupling: Coupling::TwoWay,
            plasticity: false,
            probes: geometry.default_probes(),
            solver: SolverSettings {
                dt_hat: 10.0,
                t_end_hat: 100.0,
                ..SolverSettings::default()
            },
            output_dir: None,
            snapshot_stride: 0,
        }
    }

    /// Graphite particle of radius 1 µm with a central void.
    pub fn bvp_b_default() -> Self {
        let geometry = GeometryConfig::Annulus {
            inner_radius: 0.1e-6,
            outer_radius: 1e-6,
            target_h: 0.05e-6,
        };
        ScenarioConfig {
            kind: ScenarioKind::BvpB,
            geometry,
            material: MaterialParams::graphite().with_hardening(Hardening::Isotropic),
            u_final: 0.0,
            t_ramp_hat: 0.0,
            traction: 0.0,
            influx: 2e-5,
            c_initial_hat: 0.0,
            c_dirichlet: Vec::new(),
            coupling: Coupling::TwoWay,
            plasticity: false,
            probes: geometry.default_probes(),
            solver: SolverSettings {
                dt_hat: 0.005,
                t_end_hat: 0.2,
                ..SolverSettings::default()
            },
            output_dir: None,
            snapshot_stride: 0,
        }
    }

    pub fn default_for(kind: ScenarioKind) -> Self {
        match kind {
            ScenarioKind::BvpA => Self::bvp_a_default(),
            ScenarioKind::Validation => Self::validation_default(),
            ScenarioKind::BvpB => Self::bvp_b_default(),
        }
    }

    pub fn length_scale(&self) -> f64 {
        self.solver.length_scale.unwrap_or_else(|| self.geometry.length_scale())
    }

    pub fn scales(&self) -> Result<NondimScales, ConfigError> {
        Ok(NondimScales::new(&self.material, self.length_scale())?)
    }

    /// Material with the hardening law switched off when plasticity is off.
    pub fn effective_material(&self) -> MaterialParams {
        let mut m = self.material.clone();
        if !self.plasticity {
            m.hardening = Hardening::None;
        }
        m
    }

    pub fn solver_config(&self) -> Result<SolverConfig, ConfigError> {
        let scales = self.scales()?;
        let s = &self.solver;
        Ok(SolverConfig {
            dt: scales.t_from_hat(s.dt_hat),
            t_end: scales.t_from_hat(s.t_end_hat),
            newton_abs_tol: s.newton_abs_tol,
            newton_rel_tol: s.newton_rel_tol,
            newton_max_iter: s.newton_max_iter,
            stagger_tol: s.stagger_tol,
            stagger_max_iter: s.stagger_max_iter,
            coupling: self.coupling,
            plasticity: self.plasticity,
            max_halvings: s.max_halvings,
            max_strain_increment: None,
            ordering: Ordering::MinimumDegree,
        })
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.material.validate().map_err(|e| invalid("material", e.to_string()))?;
        if self.plasticity && self.material.hardening == Hardening::None {
            return Err(invalid("plasticity.hardening", "plasticity is on but no hardening law is selected"));
        }
        match (self.kind, &self.geometry) {
            (ScenarioKind::BvpB, GeometryConfig::Annulus { .. }) => {}
            (ScenarioKind::BvpA | ScenarioKind::Validation, GeometryConfig::PlateWithHole { .. }) => {}
            _ => {
                return Err(invalid(
                    "geometry.kind",
                    format!("scenario `{}` requires a different geometry", self.kind.name()),
                ))
            }
        }
        match self.geometry {
            GeometryConfig::PlateWithHole {
                length,
                radius,
                target_h,
                far_h,
            } => {
                if !(length > 0.0 && radius > 0.0 && 2.0 * radius < length) {
                    return Err(invalid("geometry.radius", "need 0 < radius < length / 2"));
                }
                if !(target_h > 0.0) || far_h.is_some_and(|h| !(h > 0.0)) {
                    return Err(invalid("geometry.target_h", "mesh sizes must be positive"));
                }
            }
            GeometryConfig::Annulus {
                inner_radius,
                outer_radius,
                target_h,
            } => {
                if !(inner_radius >= 0.0 && outer_radius > inner_radius) {
                    return Err(invalid("geometry.inner_radius", "need 0 <= inner_radius < outer_radius"));
                }
                if !(target_h > 0.0) {
                    return Err(invalid("geometry.target_h", "mesh size must be positive"));
                }
            }
        }
        let tags = geometry_tags(&self.geometry);
        for (tag, v) in &self.c_dirichlet {
            if !tags.contains(tag) {
                return Err(invalid(
                    &format!("concentration.dirichlet.{}", tag.name()),
                    "tag does not exist for this geometry",
                ));
            }
            if !v.is_finite() {
                return Err(invalid(&format!("concentration.dirichlet.{}", tag.name()), "must be finite"));
            }
        }
        for p in &self.probes {
            if !self.geometry.contains(p.x, p.y) {
                return Err(invalid(&format!("probes.{}", p.name), "probe lies outside the domain"));
            }
        }
        let s = &self.solver;
        if !(s.dt_hat > 0.0 && s.t_end_hat >= 0.0) {
            return Err(invalid("solver.dt_hat", "time step must be positive and end time non-negative"));
        }
        if s.length_scale.is_some_and(|l| !(l > 0.0)) {
            return Err(invalid("solver.length_scale", "must be positive"));
        }
        if !(self.t_ramp_hat >= 0.0) {
            return Err(invalid("loading.t_ramp_hat", "must be non-negative"));
        }
        for (name, v) in [
            ("loading.u_final", self.u_final),
            ("loading.traction", self.traction),
            ("loading.influx", self.influx),
            ("concentration.initial", self.c_initial_hat),
        ] {
            if !v.is_finite() {
                return Err(invalid(name, "must be finite"));
            }
        }
        self.solver_config()?
            .validate()
            .map_err(|e| invalid("solver", e.to_string()))?;
        Ok(())
    }

    /// Canonical text form; [`load_config`] reads it back unchanged.
    pub fn serialize(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("scenario.kind", self.kind.name().into());
        match self.geometry {
            GeometryConfig::PlateWithHole {
                length,
                radius,
                target_h,
                far_h,
            } => {
                kv("geometry.kind", "plate_with_hole".into());
                kv("geometry.length", fmt(length));
                kv("geometry.radius", fmt(radius));
                kv("geometry.target_h", fmt(target_h));
                if let Some(h) = far_h {
                    kv("geometry.far_h", fmt(h));
                }
            }
            GeometryConfig::Annulus {
                inner_radius,
                outer_radius,
                target_h,
            } => {
                kv("geometry.kind", "annulus".into());
                kv("geometry.inner_radius", fmt(inner_radius));
                kv("geometry.outer_radius", fmt(outer_radius));
                kv("geometry.target_h", fmt(target_h));
            }
        }
        let m = &self.material;
        kv("material.E", fmt(m.youngs_modulus));
        kv("material.nu", fmt(m.poisson_ratio));
        kv("material.D", fmt(m.diffusivity));
        kv("material.Omega", fmt(m.molar_volume));
        kv("material.R", fmt(m.gas_constant));
        kv("material.T", fmt(m.temperature));
        kv("material.c0", fmt(m.c0));
        kv("material.c_max", fmt(m.c_max));
        kv("material.yield_stress", fmt(m.yield_stress));
        kv("material.H", fmt(m.isotropic_modulus));
        kv("material.h", fmt(m.kinematic_modulus));
        kv("plasticity.enabled", self.plasticity.to_string());
        kv("plasticity.hardening", m.hardening.name().into());
        kv("loading.u_final", fmt(self.u_final));
        kv("loading.t_ramp_hat", fmt(self.t_ramp_hat));
        kv("loading.traction", fmt(self.traction));
        kv("loading.influx", fmt(self.influx));
        kv("concentration.initial", fmt(self.c_initial_hat));
        if self.c_dirichlet.is_empty() {
            kv("concentration.dirichlet", "none".into());
        }
        for (tag, v) in &self.c_dirichlet {
            kv(&format!("concentration.dirichlet.{}", tag.name()), fmt(*v));
        }
        kv("coupling.mode", self.coupling.name().into());
        if self.probes.is_empty() {
            kv("probes", "none".into());
        }
        for p in &self.probes {
            kv(&format!("probes.{}", p.name), format!("{}, {}", fmt(p.x), fmt(p.y)));
        }
        let sv = &self.solver;
        kv("solver.dt_hat", fmt(sv.dt_hat));
        kv("solver.t_end_hat", fmt(sv.t_end_hat));
        kv("solver.newton_abs_tol", fmt(sv.newton_abs_tol));
        kv("solver.newton_rel_tol", fmt(sv.newton_rel_tol));
        kv("solver.newton_max_iter", sv.newton_max_iter.to_string());
        kv("solver.stagger_tol", fmt(sv.stagger_tol));
        kv("solver.stagger_max_iter", sv.stagger_max_iter.to_string());
        kv("solver.max_halvings", sv.max_halvings.to_string());
        if let Some(l) = sv.length_scale {
            kv("solver.length_scale", fmt(l));
        }
        if let Some(d) = &self.output_dir {
            kv("output.directory", d.clone());
        }
        kv("output.snapshot_stride", self.snapshot_stride.to_string());
        s
    }
}

fn fmt(v: f64) -> String {
    format!("{v:?}")
}

fn geometry_tags(g: &GeometryConfig) -> &'static [BoundaryTag] {
    match *g {
        GeometryConfig::PlateWithHole { length, radius, .. } => Geometry::PlateWithHole { length, radius }.tags(),
        GeometryConfig::Annulus {
            inner_radius,
            outer_radius,
            ..
        } => Geometry::Annulus {
            inner_radius,
            outer_radius,
        }
        .tags(),
    }
}

const KNOWN_KEYS: &[&str] = &[
    "scenario.kind",
    "geometry.kind",
    "geometry.length",
    "geometry.radius",
    "geometry.target_h",
    "geometry.far_h",
    "geometry.inner_radius",
    "geometry.outer_radius",
    "material.preset",
    "material.E",
    "material.nu",
    "material.D",
    "material.Omega",
    "material.R",
    "material.T",
    "material.c0",
    "material.c_max",
    "material.yield_stress",
    "material.H",
    "material.h",
    "plasticity.enabled",
    "plasticity.hardening",
    "loading.u_final",
    "loading.t_ramp_hat",
    "loading.traction",
    "loading.influx",
    "concentration.initial",
    "concentration.dirichlet",
    "coupling.mode",
    "probes",
    "solver.dt_hat",
    "solver.t_end_hat",
    "solver.newton_abs_tol",
    "solver.newton_rel_tol",
    "solver.newton_max_iter",
    "solver.stagger_tol",
    "solver.stagger_max_iter",
    "solver.max_halvings",
    "solver.length_scale",
    "output.directory",
    "output.snapshot_stride",
];

struct Entries {
    map: BTreeMap<String, (usize, String)>,
}

impl Entries {
    fn take(&mut self, key: &str) -> Option<(usize, String)> {
        self.map.remove(key)
    }

    fn f64(&mut self, key: &str) -> Result<Option<f64>, ConfigError> {
        self.take(key)
            .map(|(line, v)| {
                v.parse::<f64>().map_err(|_| ConfigError::Parse {
                    line,
                    message: format!("`{key}` expects a number, got `{v}`"),
                })
            })
            .transpose()
    }

    fn usize(&mut self, key: &str) -> Result<Option<usize>, ConfigError> {
        self.take(key)
            .map(|(line, v)| {
                v.parse::<usize>().map_err(|_| ConfigError::Parse {
                    line,
                    message: format!("`{key}` expects a non-negative integer, got `{v}`"),
                })
            })
            .transpose()
    }

    fn bool(&mut self, key: &str) -> Result<Option<bool>, ConfigError> {
        self.take(key)
            .map(|(line, v)| match v.as_str() {
                "true" | "on" | "yes" => Ok(true),
                "false" | "off" | "no" => Ok(false),
                _ => Err(ConfigError::Parse {
                    line,
                    message: format!("`{key}` expects true/false, got `{v}`"),
                }),
            })
            .transpose()
    }

    fn prefixed(&mut self, prefix: &str) -> Vec<(String, usize, String)> {
        let keys: Vec<String> = self.map.keys().filter(|k| k.starts_with(prefix)).cloned().collect();
        keys.into_iter()
            .map(|k| {
                let (line, v) = self.map.remove(&k).unwrap();
                (k[prefix.len()..].to_string(), line, v)
            })
            .collect()
    }
}

fn set<T>(target: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *target = v;
    }
}

/// Parses and validates a configuration file.
pub fn load_config(text: &str) -> Result<ScenarioConfig, ConfigError> {
    let mut map = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((k, v)) = content.split_once('=') else {
            return Err(ConfigError::Parse {
                line,
                message: format!("expected `key = value`, got `{content}`"),
            });
        };
        let (k, v) = (k.trim().to_string(), v.trim().to_string());
        let known = KNOWN_KEYS.contains(&k.as_str())
            || k.starts_with("probes.") && k.len() > "probes.".len()
            || k.starts_with("concentration.dirichlet.");
        if !known {
            return Err(ConfigError::Parse {
                line,
                message: format!("unknown key `{k}`"),
            });
        }
        if map.insert(k.clone(), (line, v)).is_some() {
            return Err(ConfigError::Parse {
                line,
                message: format!("duplicate key `{k}`"),
            });
        }
    }
    let mut e = Entries { map };

    let kind = match e.take("scenario.kind") {
        Some((line, v)) => ScenarioKind::from_name(&v).ok_or_else(|| ConfigError::Parse {
            line,
            message: format!("unknown scenario kind `{v}` (expected bvp_a, validation or bvp_b)"),
        })?,
        None => return Err(invalid("scenario.kind", "missing")),
    };
    let mut cfg = ScenarioConfig::default_for(kind);

    let geometry_kind = e.take("geometry.kind");
    let plate = match &geometry_kind {
        Some((_, v)) if v == "plate_with_hole" => true,
        Some((_, v)) if v == "annulus" => false,
        Some((line, v)) => {
            return Err(ConfigError::Parse {
                line: *line,
                message: format!("unknown geometry kind `{v}`"),
            })
        }
        None => matches!(cfg.geometry, GeometryConfig::PlateWithHole { .. }),
    };
    let defaults = cfg.geometry;
    let target_h = e.f64("geometry.target_h")?;
    cfg.geometry = if plate {
        let (mut length, mut radius, mut h, mut far) = match defaults {
            GeometryConfig::PlateWithHole {
                length,
                radius,
                target_h,
                far_h,
            } => (length, radius, target_h, far_h),
            _ => (1.0, 0.1, 0.02, None),
        };
        set(&mut length, e.f64("geometry.length")?);
        set(&mut radius, e.f64("geometry.radius")?);
        set(&mut h, target_h);
        if let Some(f) = e.f64("geometry.far_h")? {
            far = Some(f);
        }
        GeometryConfig::PlateWithHole {
            length,
            radius,
            target_h: h,
            far_h: far,
        }
    } else {
        let (mut ri, mut ro, mut h) = match defaults {
            GeometryConfig::Annulus {
                inner_radius,
                outer_radius,
                target_h,
            } => (inner_radius, outer_radius, target_h),
            _ => (0.1e-6, 1e-6, 0.05e-6),
        };
        set(&mut ri, e.f64("geometry.inner_radius")?);
        set(&mut ro, e.f64("geometry.outer_radius")?);
        set(&mut h, target_h);
        GeometryConfig::Annulus {
            inner_radius: ri,
            outer_radius: ro,
            target_h: h,
        }
    };
    for stray in ["geometry.length", "geometry.radius", "geometry.far_h", "geometry.inner_radius", "geometry.outer_radius"] {
        if let Some((line, _)) = e.take(stray) {
            return Err(ConfigError::Parse {
                line,
                message: format!("`{stray}` does not apply to this geometry"),
            });
        }
    }

    if let Some((line, v)) = e.take("material.preset") {
        let hardening = cfg.material.hardening;
        cfg.material = match v.as_str() {
            "steel_table1" => MaterialParams::steel(),
            "graphite_table2" => MaterialParams::graphite(),
            _ => {
                return Err(ConfigError::Parse {
                    line,
                    message: format!("unknown material preset `{v}`"),
                })
            }
        };
        cfg.material.hardening = hardening;
    }
    let m = &mut cfg.material;
    set(&mut m.youngs_modulus, e.f64("material.E")?);
    set(&mut m.poisson_ratio, e.f64("material.nu")?);
    set(&mut m.diffusivity, e.f64("material.D")?);
    set(&mut m.molar_volume, e.f64("material.Omega")?);
    set(&mut m.gas_constant, e.f64("material.R")?);
    set(&mut m.temperature, e.f64("material.T")?);
    set(&mut m.c0, e.f64("material.c0")?);
    set(&mut m.c_max, e.f64("material.c_max")?);
    set(&mut m.yield_stress, e.f64("material.yield_stress")?);
    set(&mut m.isotropic_modulus, e.f64("material.H")?);
    set(&mut m.kinematic_modulus, e.f64("material.h")?);
    set(&mut cfg.plasticity, e.bool("plasticity.enabled")?);
    if let Some((line, v)) = e.take("plasticity.hardening") {
        m.hardening = Hardening::from_name(&v).ok_or_else(|| ConfigError::Parse {
            line,
            message: format!("unknown hardening law `{v}`"),
        })?;
    }

    set(&mut cfg.u_final, e.f64("loading.u_final")?);
    set(&mut cfg.t_ramp_hat, e.f64("loading.t_ramp_hat")?);
    set(&mut cfg.traction, e.f64("loading.traction")?);
    set(&mut cfg.influx, e.f64("loading.influx")?);
    set(&mut cfg.c_initial_hat, e.f64("concentration.initial")?);

    if let Some((line, v)) = e.take("concentration.dirichlet") {
        if v != "none" {
            return Err(ConfigError::Parse {
                line,
                message: "`concentration.dirichlet` only accepts `none`; use concentration.dirichlet.<tag>".into(),
            });
        }
        cfg.c_dirichlet.clear();
    }
    for (tag_name, line, v) in e.prefixed("concentration.dirichlet.") {
        let tag = BoundaryTag::from_name(&tag_name).ok_or_else(|| ConfigError::Parse {
            line,
            message: format!("unknown boundary tag `{tag_name}`"),
        })?;
        cfg.c_dirichlet.retain(|(t, _)| *t != tag);
        if v == "off" {
            continue;
        }
        let value = v.parse::<f64>().map_err(|_| ConfigError::Parse {
            line,
            message: format!("Dirichlet value for `{tag_name}` must be a number or `off`"),
        })?;
        cfg.c_dirichlet.push((tag, value));
    }
    cfg.c_dirichlet.sort_by_key(|(t, _)| *t);

    if let Some((line, v)) = e.take("coupling.mode") {
        cfg.coupling = Coupling::from_name(&v).ok_or_else(|| ConfigError::Parse {
            line,
            message: format!("unknown coupling mode `{v}` (expected oneway or twoway)"),
        })?;
    }

    let explicit_none = match e.take("probes") {
        Some((_, v)) if v == "none" => true,
        Some((line, v)) => {
            return Err(ConfigError::Parse {
                line,
                message: format!("`probes` only accepts `none`, got `{v}`"),
            })
        }
        None => false,
    };
    let listed = e.prefixed("probes.");
    if explicit_none || !listed.is_empty() {
        cfg.probes.clear();
    } else {
        cfg.probes = cfg.geometry.default_probes();
    }
    let mut listed: Vec<(usize, Probe)> = listed
        .into_iter()
        .map(|(name, line, v)| {
            let parts: Vec<&str> = v.split(',').map(str::trim).collect();
            let coords: Option<Vec<f64>> = parts.iter().map(|p| p.parse().ok()).collect();
            match coords.as_deref() {
                Some([x, y]) => Ok((line, Probe::new(&name, *x, *y))),
                _ => Err(ConfigError::Parse {
                    line,
                    message: format!("probe `{name}` expects `x, y`, got `{v}`"),
                }),
            }
        })
        .collect::<Result<_, _>>()?;
    listed.sort_by_key(|(line, _)| *line);
    cfg.probes.extend(listed.into_iter().map(|(_, p)| p));

    let s = &mut cfg.solver;
    set(&mut s.dt_hat, e.f64("solver.dt_hat")?);
    set(&mut s.t_end_hat, e.f64("solver.t_end_hat")?);
    set(&mut s.newton_abs_tol, e.f64("solver.newton_abs_tol")?);
    set(&mut s.newton_rel_tol, e.f64("solver.newton_rel_tol")?);
    set(&mut s.newton_max_iter, e.usize("solver.newton_max_iter")?);
    set(&mut s.stagger_tol, e.f64("solver.stagger_tol")?);
    set(&mut s.stagger_max_iter, e.usize("solver.stagger_max_iter")?);
    set(&mut s.max_halvings, e.usize("solver.max_halvings")?);
    if let Some(l) = e.f64("solver.length_scale")? {
        s.length_scale = Some(l);
    }
    if let Some((_, d)) = e.take("output.directory") {
        cfg.output_dir = Some(d);
    }
    set(&mut cfg.snapshot_stride, e.usize("output.snapshot_stride")?);
    debug_assert!(e.map.is_empty(), "unconsumed keys: {:?}", e.map.keys());

    cfg.validate()?;
    Ok(cfg)
}

fn concentration_field(mesh: &Mesh, material: &MaterialParams, c_hat: f64) -> FieldState {
    FieldState::uniform(mesh, c_hat * material.c_max)
}

fn dirichlet_c(cfg: &ScenarioConfig) -> Vec<DirichletBc> {
    cfg.c_dirichlet
        .iter()
        .map(|&(tag, v)| DirichletBc {
            target: Target::Tag(tag),
            field: Field::C,
            value: v * cfg.material.c_max,
            schedule: Schedule::Constant,
        })
        .collect()
}

fn fixed(node: usize, field: Field, value: f64, schedule: Schedule) -> DirichletBc {
    DirichletBc {
        target: Target::Node(node),
        field,
        value,
        schedule,
    }
}

/// Builds the scenario selected by `cfg.kind`.
pub fn build(cfg: &ScenarioConfig) -> Result<Scenario, ConfigError> {
    match cfg.kind {
        ScenarioKind::BvpA => build_bvp_a(cfg),
        ScenarioKind::Validation => build_validation(cfg),
        ScenarioKind::BvpB => build_bvp_b(cfg),
    }
}

fn plate_dims(cfg: &ScenarioConfig) -> Result<(f64, f64), ConfigError> {
    match cfg.geometry {
        GeometryConfig::PlateWithHole { length, radius, .. } => Ok((length, radius)),
        _ => Err(invalid("geometry.kind", "plate_with_hole geometry required")),
    }
}

/// Left edge held at `u_x = 0` with `u_y = 0` at its midpoint, right edge
/// displaced by a ramped `u_x`, species supplied through the Dirichlet tags.
pub fn build_bvp_a(cfg: &ScenarioConfig) -> Result<Scenario, ConfigError> {
    cfg.validate()?;
    let (length, _) = plate_dims(cfg)?;
    let mesh = cfg.geometry.build_mesh()?;
    let scales = cfg.scales()?;
    let ramp = Schedule::Ramp {
        t_ramp: scales.t_from_hat(cfg.t_ramp_hat),
    };
    let mid_left = mesh.nearest_node(-0.5 * length, 0.0);
    let mut dirichlet = vec![
        DirichletBc {
            target: Target::Tag(BoundaryTag::Left),
            field: Field::Ux,
            value: 0.0,
            schedule: Schedule::Constant,
        },
        fixed(mid_left, Field::Uy, 0.0, Schedule::Constant),
        DirichletBc {
            target: Target::Tag(BoundaryTag::Right),
            field: Field::Ux,
            value: cfg.u_final,
            schedule: ramp,
        },
    ];
    dirichlet.extend(dirichlet_c(cfg));
    let initial = concentration_field(&mesh, &cfg.material, cfg.c_initial_hat);
    Ok(Scenario {
        params: cfg.effective_material(),
        bcs: BoundaryConditions {
            dirichlet,
            traction: Vec::new(),
            flux: Vec::new(),
        },
        initial,
        probes: cfg.probes.clone(),
        scales,
        mesh,
    })
}

/// Remote tension `p` on the left and right edges, insulated boundary and
/// uniform initial concentration; rigid modes are removed by symmetry
/// conditions at the edge midpoints.
pub fn build_validation(cfg: &ScenarioConfig) -> Result<Scenario, ConfigError> {
    cfg.validate()?;
    let (length, _) = plate_dims(cfg)?;
    let mesh = cfg.geometry.build_mesh()?;
    let scales = cfg.scales()?;
    let half = 0.5 * length;
    let dirichlet = vec![
        fixed(mesh.nearest_node(-half, 0.0), Field::Uy, 0.0, Schedule::Constant),
        fixed(mesh.nearest_node(half, 0.0), Field::Uy, 0.0, Schedule::Constant),
        fixed(mesh.nearest_node(0.0, -half), Field::Ux, 0.0, Schedule::Constant),
        fixed(mesh.nearest_node(0.0, half), Field::Ux, 0.0, Schedule::Constant),
    ]
    .into_iter()
    .chain(dirichlet_c(cfg))
    .collect();
    let schedule = if cfg.t_ramp_hat > 0.0 {
        Schedule::Ramp {
            t_ramp: scales.t_from_hat(cfg.t_ramp_hat),
        }
    } else {
        Schedule::Constant
    };
    let traction = vec![
        TractionBc {
            tag: BoundaryTag::Left,
            traction: [-cfg.traction, 0.0],
            schedule,
        },
        TractionBc {
            tag: BoundaryTag::Right,
            traction: [cfg.traction, 0.0],
            schedule,
        },
    ];
    let initial = concentration_field(&mesh, &cfg.material, cfg.c_initial_hat);
    Ok(Scenario {
        params: cfg.effective_material(),
        bcs: BoundaryConditions {
            dirichlet,
            traction,
            flux: Vec::new(),
        },
        initial,
        probes: cfg.probes.clone(),
        scales,
        mesh,
    })
}

/// Influx through the outer surface; one outer node is pinned and the
/// diametrically opposite node is held tangentially.
pub fn build_bvp_b(cfg: &ScenarioConfig) -> Result<Scenario, ConfigError> {
    cfg.validate()?;
    let GeometryConfig::Annulus { outer_radius, .. } = cfg.geometry else {
        return Err(invalid("geometry.kind", "annulus geometry required"));
    };
    let mesh = cfg.geometry.build_mesh()?;
    let scales = cfg.scales()?;
    let pin = mesh.nearest_node(outer_radius, 0.0);
    let opposite = mesh.nearest_node(-outer_radius, 0.0);
    let dirichlet = vec![
        fixed(pin, Field::Ux, 0.0, Schedule::Constant),
        fixed(pin, Field::Uy, 0.0, Schedule::Constant),
        fixed(opposite, Field::Uy, 0.0, Schedule::Constant),
    ]
    .into_iter()
    .chain(dirichlet_c(cfg))
    .collect();
    let flux = vec![FluxBc {
        tag: BoundaryTag::Outer,
        influx: cfg.influx,
        schedule: Schedule::Constant,
    }];
    let initial = concentration_field(&mesh, &cfg.material, cfg.c_initial_hat);
    Ok(Scenario {
        params: cfg.effective_material(),
        bcs: BoundaryConditions {
            dirichlet,
            traction: Vec::new(),
            flux,
        },
        initial,
        probes: cfg.probes.clone(),
        scales,
        mesh,
    })
}

/// Angles at which hole-boundary values are compared with the closed form.
pub const COMPARISON_ANGLES: [f64; 3] = [0.0, PI / 4.0, PI / 2.0];

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn steel_preset_expands() {
        let c = load_config("scenario.kind = bvp_a\nmaterial.preset = steel_table1\n").unwrap();
        assert_eq!(c.material.youngs_modulus, 210e9);
        assert_eq!(c.material.poisson_ratio, 0.3);
        assert_eq!(c.material.diffusivity, 1.27e-8);
        assert_eq!(c.material.temperature, 300.0);
        assert_eq!(c.material.molar_volume, 1.96e-6);
    }

    #[test]
    fn graphite_preset_expands() {
        let c = load_config("scenario.kind = bvp_b\nmaterial.preset = graphite_table2 # Li in graphite\n").unwrap();
        assert_eq!(c.material.youngs_modulus, 19.25e9);
        assert_eq!(c.material.diffusivity, 3.9e-14);
        assert_eq!(c.material.molar_volume, 4.17e-6);
    }

    #[test]
    fn unknown_key_reports_line() {
        let err = load_config("scenario.kind = bvp_a\n\nmaterial.Young = 1\n").unwrap_err();
        assert!(matches!(err, ConfigError::Parse { line: 3, .. }), "{err}");
    }

    #[test]
    fn validation_names_field() {
        let err = load_config("scenario.kind = bvp_a\nmaterial.nu = 0.7\n").unwrap_err();
        assert!(matches!(err, ConfigError::Invalid { ref field, .. } if field == "material"), "{err}");
        let err = load_config("scenario.kind = bvp_a\nprobes.X = 5.0, 0.0\n").unwrap_err();
        assert!(matches!(err, ConfigError::Invalid { ref field, .. } if field == "probes.X"), "{err}");
    }

    #[test]
    fn round_trip() {
        for kind in [ScenarioKind::BvpA, ScenarioKind::Validation, ScenarioKind::BvpB] {
            let c = ScenarioConfig::default_for(kind);
            let text = c.serialize();
            let back = load_config(&text).unwrap();
            assert_eq!(back, c, "{text}");
            assert_eq!(back.serialize(), text);
        }
        let c = load_config(
            "scenario.kind = bvp_a\nconcentration.dirichlet = none\nprobes.P = 0.2, 0.3\nplasticity.enabled = on\nplasticity.hardening = kinematic\n",
        )
        .unwrap();
        assert_eq!(load_config(&c.serialize()).unwrap(), c);
        assert!(c.c_dirichlet.is_empty());
    }

    #[test]
    fn geometry_mismatch_rejected() {
        let err = load_config("scenario.kind = bvp_b\ngeometry.kind = plate_with_hole\n").unwrap_err();
        assert!(matches!(err, ConfigError::Invalid { .. }));
    }
}
