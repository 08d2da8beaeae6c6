//! Backward-Euler time stepping with a monolithic Newton solve for
//! displacement and concentration, wrapped in a plasticity stagger loop.

use thiserror::Error;

use crate::assembly::{
    apply_boundary_conditions, element_hydrostatic, recover_hydrostatic, Assembler, AssemblyError, AssemblyInput,
    BoundaryConditions, Coupling, FieldState, N_QP,
};
use crate::constitutive::{self, Hardening, MaterialParams, MaterialState, StressUpdate};
use crate::mesh::Mesh;
use crate::oracles::NondimScales;
use crate::sparse::{compute_ordering, LinalgError, LuFactors, Ordering};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Assembly(#[from] AssemblyError),
    #[error("linear solve failed: {0}")]
    Linalg(#[from] LinalgError),
    #[error("Newton diverged at t = {time:e} after {iterations} iterations (residual {residual:e})")]
    NewtonDiverged { time: f64, iterations: usize, residual: f64 },
    #[error("Newton did not converge at t = {time:e} in {iterations} iterations (residual {residual:e})")]
    NewtonNoConvergence { time: f64, iterations: usize, residual: f64 },
    #[error("stagger loop did not converge at t = {time:e} in {passes} passes (change {change:e})")]
    StaggerNoConvergence { time: f64, passes: usize, change: f64 },
    #[error("strain increment {increment:e} exceeds the limit {limit:e} at t = {time:e}")]
    StrainIncrementLimit { time: f64, increment: f64, limit: f64 },
    #[error("time step exhausted at t = {time:e} after {halvings} halvings: {cause}")]
    StepExhausted {
        time: f64,
        halvings: usize,
        cause: Box<SolverError>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// Time step, s.
    pub dt: f64,
    /// End time, s.
    pub t_end: f64,
    pub newton_abs_tol: f64,
    pub newton_rel_tol: f64,
    pub newton_max_iter: usize,
    pub stagger_tol: f64,
    pub stagger_max_iter: usize,
    pub coupling: Coupling,
    pub plasticity: bool,
    /// Step halvings allowed before a failed step aborts the run.
    pub max_halvings: usize,
    /// Rejects steps whose element strain increment exceeds this value.
    pub max_strain_increment: Option<f64>,
    pub ordering: Ordering,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            dt: 1.0,
            t_end: 1.0,
            newton_abs_tol: 1e-10,
            newton_rel_tol: 1e-8,
            newton_max_iter: 25,
            stagger_tol: 1e-6,
            stagger_max_iter: 10,
            coupling: Coupling::TwoWay,
            plasticity: false,
            max_halvings: 4,
            max_strain_increment: None,
            ordering: Ordering::MinimumDegree,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), SolverError> {
        let bad = |m: &str| Err(SolverError::InvalidConfig(m.to_string()));
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad("dt must be positive and finite");
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return bad("t_end must be non-negative and finite");
        }
        if !(self.newton_abs_tol > 0.0 && self.newton_rel_tol > 0.0 && self.stagger_tol > 0.0) {
            return bad("tolerances must be positive");
        }
        if self.newton_max_iter == 0 || self.stagger_max_iter == 0 {
            return bad("iteration limits must be at least 1");
        }
        if let Some(limit) = self.max_strain_increment {
            if !(limit > 0.0) {
                return bad("max_strain_increment must be positive");
            }
        }
        Ok(())
    }
}

/// Named sampling location.
#[derive(Debug, Clone, PartialEq)]
pub struct Probe {
    pub name: String,
    pub x: f64,
    pub y: f64,
}

impl Probe {
    pub fn new(name: &str, x: f64, y: f64) -> Self {
        Probe {
            name: name.to_string(),
            x,
            y,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeSample {
    pub time: f64,
    pub t_hat: f64,
    pub probe: String,
    pub x: f64,
    pub y: f64,
    pub c: f64,
    pub c_hat: f64,
    pub sigma_h: f64,
    pub sigma_h_hat: f64,
    pub sigma_e: f64,
    pub eps_p_eq: f64,
}

/// Nodal fields are interpolated in the containing element; the equivalent
/// stress and plastic strain come from the nearest quadrature point.
pub fn sample_probe(
    mesh: &Mesh,
    state: &FieldState,
    probe: &Probe,
    time: f64,
    scales: &NondimScales,
) -> ProbeSample {
    let (e, l) = mesh.locate(probe.x, probe.y).unwrap_or_else(|| {
        let n = mesh.nearest_node(probe.x, probe.y);
        let e = mesh.elements().iter().position(|t| t.nodes.contains(&n)).unwrap_or(0);
        let mut l = [0.0; 3];
        for (k, &m) in mesh.elements()[e].nodes.iter().enumerate() {
            if m == n {
                l[k] = 1.0;
            }
        }
        (e, l)
    });
    let nodes = mesh.elements()[e].nodes;
    let c: f64 = (0..3).map(|k| l[k] * state.concentration(nodes[k])).sum();
    let sigma_h: f64 = (0..3).map(|k| l[k] * state.sigma_h[nodes[k]]).sum();
    // Quadrature point q sits at barycentric weight 2/3 on vertex q.
    let q = (0..N_QP)
        .map(|q| {
            let target: [f64; 3] = std::array::from_fn(|k| if k == q { 2.0 / 3.0 } else { 1.0 / 6.0 });
            let d: f64 = (0..3).map(|k| (l[k] - target[k]).powi(2)).sum();
            (q, d)
        })
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(q, _)| q)
        .unwrap_or(0);
    let qp = &state.states[e][q];
    ProbeSample {
        time,
        t_hat: scales.t_hat(time),
        probe: probe.name.clone(),
        x: probe.x,
        y: probe.y,
        c,
        c_hat: scales.c_hat(c),
        sigma_h,
        sigma_h_hat: scales.sigma_hat(sigma_h),
        sigma_e: constitutive::von_mises(&qp.stress),
        eps_p_eq: qp.eq_plastic_strain,
    }
}

/// Mesh, material, boundary conditions and probes of one simulation.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub mesh: Mesh,
    pub params: MaterialParams,
    pub bcs: BoundaryConditions,
    pub initial: FieldState,
    pub probes: Vec<Probe>,
    pub scales: NondimScales,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepReport {
    pub time: f64,
    pub dt: f64,
    pub newton_iterations: usize,
    pub stagger_passes: usize,
    pub residual_norm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub time: f64,
    pub t_hat: f64,
    pub newton_iterations: usize,
    pub stagger_passes: usize,
    pub residual_norm: f64,
    pub total_concentration: f64,
    pub max_eq_plastic_strain: f64,
    pub probes: Vec<ProbeSample>,
}

/// A failed step that was retried with `2^level` sub-steps.
#[derive(Debug, Clone, PartialEq)]
pub struct RefinementEvent {
    pub time: f64,
    pub level: usize,
    pub cause: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TimeHistory {
    pub records: Vec<StepRecord>,
    pub refinements: Vec<RefinementEvent>,
}

impl TimeHistory {
    pub fn probe_series(&self, name: &str) -> Vec<&ProbeSample> {
        self.records
            .iter()
            .flat_map(|r| r.probes.iter().filter(|p| p.probe == name))
            .collect()
    }
}

/// Residual ratio up to which a Newton iteration reuses the previous LU
/// factors instead of refactoring the current Jacobian.
const REUSE_CONTRACTION: f64 = 0.7;

struct NewtonOutcome {
    x: Vec<f64>,
    updates: Vec<[StressUpdate; N_QP]>,
    sigma_h: Vec<f64>,
    iterations: usize,
    residual: f64,
    initial: f64,
}

/// Time-stepping state of one scenario.
pub struct Simulation<'a> {
    scenario: &'a Scenario,
    config: SolverConfig,
    params: MaterialParams,
    assembler: Assembler,
    ordering: Option<Vec<usize>>,
    state: FieldState,
    time: f64,
}

impl<'a> Simulation<'a> {
    pub fn new(scenario: &'a Scenario, config: SolverConfig) -> Result<Self, SolverError> {
        config.validate()?;
        scenario
            .params
            .validate()
            .map_err(|e| SolverError::InvalidConfig(e.to_string()))?;
        scenario.bcs.check(&scenario.mesh)?;
        let mut params = scenario.params.clone();
        if !config.plasticity {
            params.hardening = Hardening::None;
        }
        let assembler = Assembler::new(&scenario.mesh);
        Ok(Simulation {
            scenario,
            config,
            params,
            assembler,
            ordering: None,
            state: scenario.initial.clone(),
            time: 0.0,
        })
    }

    pub fn state(&self) -> &FieldState {
        &self.state
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn assembler(&self) -> &Assembler {
        &self.assembler
    }

    pub fn config(&self) -> &SolverConfig {
        &self.config
    }

    pub fn total_concentration(&self) -> f64 {
        self.assembler.total_concentration(&self.state.x)
    }

    pub fn sample(&self) -> Vec<ProbeSample> {
        self.scenario
            .probes
            .iter()
            .map(|p| sample_probe(&self.scenario.mesh, &self.state, p, self.time, &self.scenario.scales))
            .collect()
    }

    fn residual_norm(&self, r: &[f64], x: &[f64]) -> f64 {
        let p = &self.params;
        let len = self.scenario.mesh.geometry().characteristic_length();
        let c_ref = x.iter().skip(2).step_by(3).fold(p.c_max, |m, v| m.max(v.abs()));
        let su = 1.0 / (p.youngs_modulus * len);
        let sc = 1.0 / (p.diffusivity * c_ref);
        r.iter()
            .enumerate()
            .map(|(i, v)| {
                let s = if i % 3 == 2 { sc } else { su };
                (v * s).powi(2)
            })
            .sum::<f64>()
            .sqrt()
    }

    /// Advances by `dt` without step refinement.
    pub fn step(&mut self, dt: f64) -> Result<StepReport, SolverError> {
        let t_new = self.time + dt;
        let mesh = &self.scenario.mesh;
        let constraints = self.scenario.bcs.constraints(mesh, t_new)?;
        let external = self.scenario.bcs.external_load(mesh, t_new)?;
        let mut x = self.state.x.clone();
        for &(d, v) in &constraints {
            x[d] = v;
        }
        let plastic = self.params.is_plastic();
        let mut previous: Option<Vec<[MaterialState; N_QP]>> = None;
        let mut total_iterations = 0;
        let mut passes = 0;
        let mut residual = 0.0;
        let mut converged_states = None;
        let mut change = f64::INFINITY;
        let mut reference = None;
        for pass in 1..=self.config.stagger_max_iter {
            passes = pass;
            let out = self.newton(x, &constraints, &external, dt, t_new, reference)?;
            let NewtonOutcome {
                x: xs,
                updates,
                sigma_h,
                iterations: iters,
                residual: res,
                initial,
            } = out;
            reference = reference.or(Some(initial));
            x = xs;
            total_iterations += iters;
            residual = res;
            let states: Vec<[MaterialState; N_QP]> = updates.iter().map(|u| u.map(|s| s.state)).collect();
            if !plastic {
                converged_states = Some((states, sigma_h));
                change = 0.0;
                break;
            }
            if let Some(prev) = &previous {
                change = prev
                    .iter()
                    .zip(&states)
                    .flat_map(|(a, b)| a.iter().zip(b.iter()))
                    .map(|(a, b)| (a.stress - b.stress).norm())
                    .fold(0.0, f64::max);
            }
            let done = change <= self.config.stagger_tol * self.params.yield_stress
                || self.config.stagger_max_iter == 1;
            previous = Some(states.clone());
            if done {
                converged_states = Some((states, sigma_h));
                break;
            }
        }
        let Some((states, sigma_h)) = converged_states else {
            return Err(SolverError::StaggerNoConvergence {
                time: t_new,
                passes,
                change,
            });
        };
        self.state = FieldState { x, states, sigma_h };
        self.time = t_new;
        Ok(StepReport {
            time: t_new,
            dt,
            newton_iterations: total_iterations,
            stagger_passes: passes,
            residual_norm: residual,
        })
    }

    /// Newton solve from `x`. The relative tolerance is measured against
    /// `reference`, or against the initial residual when none is given.
    fn newton(
        &mut self,
        mut x: Vec<f64>,
        constraints: &[(usize, f64)],
        external: &[f64],
        dt: f64,
        t_new: f64,
        reference: Option<f64>,
    ) -> Result<NewtonOutcome, SolverError> {
        let mesh = &self.scenario.mesh;
        let x_old = &self.state.x;
        let mut first = 0.0;
        let mut initial = 0.0;
        let mut last = f64::INFINITY;
        let mut growth = 0;
        let mut lu: Option<LuFactors> = None;
        let mut lu_branches: Vec<bool> = Vec::new();
        let mut constrained = vec![false; x.len()];
        for &(d, _) in constraints {
            constrained[d] = true;
        }
        for k in 0..=self.config.newton_max_iter {
            if let Some(limit) = self.config.max_strain_increment {
                let inc = self.assembler.max_strain_increment(&x, x_old);
                if inc > limit {
                    return Err(SolverError::StrainIncrementLimit {
                        time: t_new,
                        increment: inc,
                        limit,
                    });
                }
            }
            let updates = self.assembler.update_states(&x, x_old, &self.state.states, &self.params)?;
            let states: Vec<[MaterialState; N_QP]> = updates.iter().map(|u| u.map(|s| s.state)).collect();
            let sigma_h = recover_hydrostatic(mesh, &element_hydrostatic(&states));
            let input = AssemblyInput {
                x_new: &x,
                x_old,
                updates: &updates,
                sigma_h: &sigma_h,
                params: &self.params,
                dt,
                coupling: self.config.coupling,
                external,
            };
            let (mut r, j) = self.assembler.assemble(&input, true)?;
            for (i, v) in r.iter_mut().enumerate() {
                if constrained[i] {
                    *v = 0.0;
                }
            }
            let norm = self.residual_norm(&r, &x);
            if !norm.is_finite() {
                return Err(SolverError::NewtonDiverged {
                    time: t_new,
                    iterations: k,
                    residual: norm,
                });
            }
            let converged = |first: f64| norm <= self.config.newton_abs_tol.max(self.config.newton_rel_tol * first);
            if k == 0 {
                initial = norm;
                first = reference.unwrap_or(norm);
                // Later stagger passes may already start converged.
                if reference.is_some() && converged(first) {
                    return Ok(NewtonOutcome {
                        x,
                        updates,
                        sigma_h,
                        iterations: 0,
                        residual: norm,
                        initial,
                    });
                }
            } else {
                if converged(first) {
                    return Ok(NewtonOutcome {
                        x,
                        updates,
                        sigma_h,
                        iterations: k,
                        residual: norm,
                        initial,
                    });
                }
                growth = if norm > last { growth + 1 } else { 0 };
                if growth >= 3 {
                    return Err(SolverError::NewtonDiverged {
                        time: t_new,
                        iterations: k,
                        residual: norm,
                    });
                }
            }
            if k == self.config.newton_max_iter {
                return Err(SolverError::NewtonNoConvergence {
                    time: t_new,
                    iterations: k,
                    residual: norm,
                });
            }
            // Keep the factorisation while the residual contracts fast enough
            // and no quadrature point has switched branch since it was built.
            let branches: Vec<bool> = updates.iter().flat_map(|u| u.iter().map(|s| s.plastic)).collect();
            let refactor = k == 0 || norm > REUSE_CONTRACTION * last || lu_branches != branches;
            last = norm;
            let mut j = j.expect("jacobian requested");
            let mut rhs: Vec<f64> = r.iter().map(|v| -v).collect();
            apply_boundary_conditions(&mut j, &mut rhs, &x, constraints)?;
            if self.ordering.is_none() {
                self.ordering = Some(compute_ordering(&j, self.config.ordering));
            }
            if refactor || lu.is_none() {
                lu = Some(LuFactors::factor(&j, self.ordering.as_ref().unwrap())?);
                lu_branches = branches;
            }
            let dx = lu.as_ref().unwrap().solve_refined(&j, &rhs)?;
            for (xi, d) in x.iter_mut().zip(&dx) {
                *xi += d;
            }
        }
        unreachable!()
    }

    /// Advances by `dt`, retrying with 2, 4, ... sub-steps on failure.
    pub fn step_refined(&mut self, dt: f64, history: &mut TimeHistory) -> Result<Vec<StepReport>, SolverError> {
        let start_state = self.state.clone();
        let start_time = self.time;
        let mut level = 0;
        loop {
            let n_sub = 1usize << level;
            let sub = dt / n_sub as f64;
            let mut reports = Vec::with_capacity(n_sub);
            let mut failure = None;
            for _ in 0..n_sub {
                match self.step(sub) {
                    Ok(r) => reports.push(r),
                    Err(e) => {
                        failure = Some(e);
                        break;
                    }
                }
            }
            match failure {
                None => return Ok(reports),
                Some(e) => {
                    self.state = start_state.clone();
                    self.time = start_time;
                    if level >= self.config.max_halvings || !is_recoverable(&e) {
                        return Err(SolverError::StepExhausted {
                            time: start_time,
                            halvings: level,
                            cause: Box::new(e),
                        });
                    }
                    level += 1;
                    history.refinements.push(RefinementEvent {
                        time: start_time,
                        level,
                        cause: e.to_string(),
                    });
                }
            }
        }
    }

    /// Runs to `t_end`, sampling the probes after every step.
    pub fn run(&mut self) -> Result<TimeHistory, SolverError> {
        self.run_with(|_, _| {})
    }

    /// As [`Simulation::run`], calling `observer` after every accepted step.
    pub fn run_with<F>(&mut self, mut observer: F) -> Result<TimeHistory, SolverError>
    where
        F: FnMut(&Simulation<'_>, &StepReport),
    {
        let mut history = TimeHistory::default();
        let t_end = self.config.t_end;
        let dt = self.config.dt;
        while self.time < t_end * (1.0 - 1e-12) {
            let h = dt.min(t_end - self.time);
            let reports = self.step_refined(h, &mut history)?;
            let last = *reports.last().expect("at least one sub-step");
            let agg = StepReport {
                time: last.time,
                dt: h,
                newton_iterations: reports.iter().map(|r| r.newton_iterations).sum(),
                stagger_passes: reports.iter().map(|r| r.stagger_passes).max().unwrap_or(0),
                residual_norm: last.residual_norm,
            };
            history.records.push(StepRecord {
                time: self.time,
                t_hat: self.scenario.scales.t_hat(self.time),
                newton_iterations: agg.newton_iterations,
                stagger_passes: agg.stagger_passes,
                residual_norm: agg.residual_norm,
                total_concentration: self.total_concentration(),
                max_eq_plastic_strain: self.state.max_eq_plastic_strain(),
                probes: self.sample(),
            });
            observer(self, &agg);
        }
        Ok(history)
    }
}

fn is_recoverable(e: &SolverError) -> bool {
    !matches!(e, SolverError::InvalidConfig(_) | SolverError::Assembly(AssemblyError::MissingTag(_)))
}
