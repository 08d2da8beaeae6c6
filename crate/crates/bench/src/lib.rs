//! Fixtures shared by the kernel benchmarks in `benches/`.

use chemoplast::assembly::{apply_boundary_conditions, AssemblyInput};
use chemoplast::{scenario, Assembler, Scenario, ScenarioConfig, SparseMatrix};

/// First Newton system of the default plate-with-hole run.
pub struct Fixture {
    pub scenario: Scenario,
    pub assembler: Assembler,
    pub x: Vec<f64>,
    pub external: Vec<f64>,
    pub dt: f64,
    pub jacobian: SparseMatrix,
    pub rhs: Vec<f64>,
}

impl Fixture {
    pub fn plate(target_h: f64) -> Self {
        let mut cfg = ScenarioConfig::bvp_a_default();
        if let chemoplast::GeometryConfig::PlateWithHole { target_h: h, .. } = &mut cfg.geometry {
            *h = target_h;
        }
        let scenario = scenario::build(&cfg).expect("default scenario builds");
        let solver = cfg.solver_config().expect("default solver settings");
        let assembler = Assembler::new(&scenario.mesh);
        let dt = solver.dt;
        let constraints = scenario.bcs.constraints(&scenario.mesh, dt).expect("tags present");
        let external = scenario.bcs.external_load(&scenario.mesh, dt).expect("tags present");
        let mut x = scenario.initial.x.clone();
        for &(d, v) in &constraints {
            x[d] = v;
        }
        let mut f = Fixture {
            scenario,
            assembler,
            x,
            external,
            dt,
            jacobian: SparseMatrix::identity(1),
            rhs: Vec::new(),
        };
        let (r, j) = f.assemble(true);
        let mut j = j.expect("jacobian requested");
        let mut rhs: Vec<f64> = r.iter().map(|v| -v).collect();
        apply_boundary_conditions(&mut j, &mut rhs, &f.x, &constraints).expect("constraints fit");
        f.jacobian = j;
        f.rhs = rhs;
        f
    }

    /// Constitutive update and residual (and Jacobian) at the fixture iterate.
    pub fn assemble(&self, jacobian: bool) -> (Vec<f64>, Option<SparseMatrix>) {
        let sc = &self.scenario;
        let x_old = &sc.initial.x;
        let updates = self
            .assembler
            .update_states(&self.x, x_old, &sc.initial.states, &sc.params)
            .expect("elastic update");
        let input = AssemblyInput {
            x_new: &self.x,
            x_old,
            updates: &updates,
            sigma_h: &sc.initial.sigma_h,
            params: &sc.params,
            dt: self.dt,
            coupling: chemoplast::Coupling::TwoWay,
            external: &self.external,
        };
        self.assembler.assemble(&input, jacobian).expect("assembly")
    }
}
