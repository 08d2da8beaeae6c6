mod common;

use chemoplast::solver::sample_probe;
use chemoplast::*;
use common::{fix, fix_node, rectangle_scenario};

fn insulated(params: MaterialParams) -> Scenario {
    let mesh = mesh::generate_rectangle(1e-6, 1e-6, 8, 8).unwrap();
    let far = mesh.nearest_node(1e-6, 0.0);
    let bcs = BoundaryConditions {
        dirichlet: vec![fix_node(0, Field::Ux, 0.0), fix_node(0, Field::Uy, 0.0), fix_node(far, Field::Uy, 0.0)],
        ..Default::default()
    };
    rectangle_scenario(1e-6, 1e-6, 8, 8, params, bcs, |x, y| {
        1e4 * (1.0 + 0.9 * (x * 3e6).sin() * (y * 2e6).cos())
    })
}

fn config(sc: &Scenario, dt_hat: f64, steps: usize, coupling: Coupling, plasticity: bool) -> SolverConfig {
    let dt = sc.scales.t_from_hat(dt_hat);
    SolverConfig {
        dt,
        t_end: dt * steps as f64,
        coupling,
        plasticity,
        ..Default::default()
    }
}

#[test]
fn insulated_body_conserves_species() {
    let sc = insulated(MaterialParams::graphite().with_hardening(Hardening::Isotropic));
    for coupling in [Coupling::OneWay, Coupling::TwoWay] {
        let mut sim = Simulation::new(&sc, config(&sc, 0.02, 20, coupling, true)).unwrap();
        let m0 = sim.total_concentration();
        let h = sim.run().unwrap();
        let mut prev = m0;
        for r in &h.records {
            assert!((r.total_concentration - prev).abs() <= 1e-10 * m0);
            prev = r.total_concentration;
        }
        assert!(h.records.last().unwrap().max_eq_plastic_strain > 0.0, "{coupling:?}");
    }
}

#[test]
fn unloaded_body_stays_at_rest() {
    let sc = {
        let mut s = insulated(MaterialParams::steel());
        s.initial = FieldState::uniform(&s.mesh, 1.0);
        s
    };
    let mut sim = Simulation::new(&sc, config(&sc, 0.1, 3, Coupling::TwoWay, true)).unwrap();
    let h = sim.run().unwrap();
    assert!(sim.state().x.iter().step_by(3).all(|v| v.abs() < 1e-18));
    for r in &h.records {
        assert_eq!(r.newton_iterations, 1);
    }
}

#[test]
fn elastic_one_way_newton_is_direct() {
    let cfg = ScenarioConfig::bvp_a_default();
    let sc = scenario::build(&cfg).unwrap();
    let mut solver = cfg.solver_config().unwrap();
    solver.coupling = Coupling::OneWay;
    solver.plasticity = false;
    solver.t_end = 5.0 * solver.dt;
    let mut sim = Simulation::new(&sc, solver).unwrap();
    for r in sim.run().unwrap().records {
        assert!(r.newton_iterations <= 2);
    }
}

#[test]
fn one_way_concentration_ignores_plasticity() {
    let mut cfg = ScenarioConfig::bvp_a_default();
    cfg.u_final = 5e-3;
    cfg.t_ramp_hat = 0.5;
    cfg.coupling = Coupling::OneWay;
    cfg.plasticity = true;
    cfg.solver.t_end_hat = 0.5;
    cfg.solver.dt_hat = 0.05;
    let sc = scenario::build(&cfg).unwrap();
    let run = |plastic: bool| {
        let mut s = cfg.solver_config().unwrap();
        s.plasticity = plastic;
        let mut sim = Simulation::new(&sc, s).unwrap();
        let h = sim.run().unwrap();
        assert!(h.refinements.is_empty(), "{:?}", h.refinements);
        (sim.state().concentrations(), h.records.last().unwrap().max_eq_plastic_strain)
    };
    let (c_el, p_el) = run(false);
    let (c_pl, p_pl) = run(true);
    assert_eq!(p_el, 0.0);
    assert!(p_pl > 1e-3);
    for (a, b) in c_el.iter().zip(&c_pl) {
        assert!((a - b).abs() <= 1e-10 * a.abs().max(1.0), "{a:e} {b:e}");
    }
}

fn ramp_strip(limit: Option<f64>, dt_hat: f64) -> (Vec<f64>, usize) {
    let params = {
        let mut p = MaterialParams::steel();
        p.hardening = Hardening::None;
        p
    };
    let bcs = BoundaryConditions {
        dirichlet: vec![
            fix(BoundaryTag::Left, Field::Ux, 0.0),
            fix_node(0, Field::Uy, 0.0),
            DirichletBc {
                target: Target::Tag(BoundaryTag::Right),
                field: Field::Ux,
                value: 1e-3,
                schedule: Schedule::Ramp { t_ramp: 1.0 },
            },
        ],
        ..Default::default()
    };
    let sc = rectangle_scenario(1.0, 0.25, 8, 2, params, bcs, |_, _| 1.0);
    let dt = sc.scales.t_from_hat(dt_hat);
    let cfg = SolverConfig {
        dt,
        t_end: 4.0 * dt,
        max_strain_increment: limit,
        ..Default::default()
    };
    let mut sim = Simulation::new(&sc, cfg).unwrap();
    let h = sim.run().unwrap();
    (sim.state().x.clone(), h.refinements.len())
}

#[test]
fn strain_limit_halves_the_step() {
    // Ramp rate 1e-3 per second over a unit length.
    let sc_dt = {
        let p = MaterialParams::steel();
        NondimScales::new(&p, 1.0).unwrap().t_hat(0.1)
    };
    let (refined, events) = ramp_strip(Some(7e-5), sc_dt);
    assert!(events >= 1);
    let (direct, none) = ramp_strip(None, sc_dt);
    assert_eq!(none, 0);
    let scale = direct.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    for (a, b) in refined.iter().zip(&direct) {
        assert!((a - b).abs() <= 1e-9 * scale, "{a:e} {b:e}");
    }
}

#[test]
fn strain_limit_exhausts_halvings() {
    let cfg = ScenarioConfig::bvp_a_default();
    let sc = scenario::build(&cfg).unwrap();
    let mut s = cfg.solver_config().unwrap();
    s.max_strain_increment = Some(1e-12);
    s.max_halvings = 2;
    let mut sim = Simulation::new(&sc, s).unwrap();
    match sim.run() {
        Err(SolverError::StepExhausted { halvings, cause, .. }) => {
            assert_eq!(halvings, 2);
            assert!(matches!(*cause, SolverError::StrainIncrementLimit { .. }));
        }
        other => panic!("unexpected {other:?}"),
    }
    assert_eq!(sim.time(), 0.0);
}

#[test]
fn probes_interpolate_linear_fields_exactly() {
    let mesh = mesh::generate_plate_with_hole(1.0, 0.2, 0.1).unwrap();
    let mut state = FieldState::uniform(&mesh, 0.0);
    let f = |x: f64, y: f64| 2.0 + 0.5 * x - 1.5 * y;
    for (i, n) in mesh.nodes().iter().enumerate() {
        state.set_concentration(i, f(n.x, n.y));
        state.sigma_h[i] = 1e6 * f(n.y, n.x);
    }
    let scales = NondimScales::new(&MaterialParams::steel(), 1.0).unwrap();
    for (x, y) in [(0.31, -0.12), (-0.45, 0.4), (0.0, 0.2), (0.5, 0.5)] {
        let s = sample_probe(&mesh, &state, &Probe::new("p", x, y), 0.0, &scales);
        assert!((s.c - f(x, y)).abs() < 1e-12);
        assert!((s.sigma_h - 1e6 * f(y, x)).abs() < 1e-6);
    }
}

#[test]
fn invalid_config_is_rejected() {
    let sc = insulated(MaterialParams::steel());
    let mut cfg = config(&sc, 0.1, 1, Coupling::TwoWay, false);
    cfg.dt = -1.0;
    assert!(matches!(Simulation::new(&sc, cfg), Err(SolverError::InvalidConfig(_))));
}
