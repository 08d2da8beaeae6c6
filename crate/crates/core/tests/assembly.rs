mod common;

use chemoplast::assembly::{recover_hydrostatic, N_QP};
use chemoplast::constitutive::hydrostatic;
use chemoplast::*;
use common::{patch_stresses, TwoElement};

#[test]
fn patch_test_constant_stress() {
    let mesh = mesh::generate_plate_with_hole(1.0, 0.2, 0.1).unwrap();
    let stresses = patch_stresses(&mesh, [[1e-4, 3e-5], [-2e-5, -4e-5]], 0.3);
    let reference = stresses[0][0];
    let scale = reference.norm();
    for s in stresses.iter().flat_map(|e| e.iter()) {
        assert!((*s - reference).norm() <= 1e-10 * scale);
    }
}

#[test]
fn jacobian_matches_finite_differences() {
    let fx = TwoElement::new();
    for coupling in [Coupling::OneWay, Coupling::TwoWay] {
        for dt in [1.0, 1e3] {
            let err = fx.frozen(coupling, dt).jacobian_error(&fx.x, &fx.fd_steps());
            assert!(err <= 1e-5, "{coupling:?} dt={dt}: {err:e}");
        }
    }
}

#[test]
fn plastic_jacobian_matches_finite_differences() {
    let mut fx = TwoElement::new();
    fx.params = MaterialParams::steel();
    for (i, nd) in fx.mesh.nodes().iter().enumerate() {
        fx.x[3 * i] = 4e-3 * nd.x + 1e-3 * nd.y;
        fx.x[3 * i + 1] = -1e-3 * nd.y;
    }
    let err = fx.frozen(Coupling::TwoWay, 10.0).jacobian_error(&fx.x, &[1e-12, 1e-12, 1e-4]);
    assert!(err <= 1e-4, "{err:e}");
}

#[test]
fn residual_is_translation_invariant() {
    let fx = TwoElement::new();
    let moved = fx.mesh.translated(3.0, -7.5);
    let asm = Assembler::new(&moved);
    let frozen = fx.frozen(Coupling::TwoWay, 5.0);
    let shifted = common::Frozen { asm: &asm, ..frozen };
    let (r0, _) = frozen.assemble(&fx.x, false);
    let (r1, _) = shifted.assemble(&fx.x, false);
    let scale = r0.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    for (a, b) in r0.iter().zip(&r1) {
        assert!((a - b).abs() <= 1e-9 * scale);
    }
}

#[test]
fn recovery_reproduces_linear_field_at_interior_nodes() {
    let mesh = mesh::generate_rectangle(2.0, 1.0, 8, 4).unwrap();
    let f = |x: f64, y: f64| 3.0 * x - 2.0 * y + 0.5;
    let centroid_values: Vec<f64> = (0..mesh.n_elements())
        .map(|e| {
            let c = mesh.element_coords(e);
            f((c[0][0] + c[1][0] + c[2][0]) / 3.0, (c[0][1] + c[1][1] + c[2][1]) / 3.0)
        })
        .collect();
    let nodal = recover_hydrostatic(&mesh, &centroid_values);
    let boundary: std::collections::HashSet<usize> = mesh.boundary().iter().flat_map(|e| e.nodes).collect();
    for (i, n) in mesh.nodes().iter().enumerate() {
        if !boundary.contains(&i) {
            assert!((nodal[i] - f(n.x, n.y)).abs() < 1e-12, "node {i}");
        }
    }
}

#[test]
fn hydrostatic_of_uniform_state_is_recovered_exactly() {
    let mesh = mesh::generate_annulus(0.2, 1.0, 0.1).unwrap();
    let stresses = patch_stresses(&mesh, [[1e-4, 0.0], [0.0, 1e-4]], 0.0);
    let element: Vec<f64> = stresses
        .iter()
        .map(|e| e.iter().map(hydrostatic).sum::<f64>() / N_QP as f64)
        .collect();
    let nodal = recover_hydrostatic(&mesh, &element);
    for v in nodal {
        assert!((v - element[0]).abs() <= 1e-9 * element[0].abs());
    }
}

#[test]
fn flux_load_integrates_to_total_inflow() {
    let mesh = mesh::generate_annulus(0.3, 1.0, 0.05).unwrap();
    let bcs = BoundaryConditions {
        flux: vec![FluxBc {
            tag: BoundaryTag::Outer,
            influx: 2.5,
            schedule: Schedule::Constant,
        }],
        ..Default::default()
    };
    let f = bcs.external_load(&mesh, 0.0).unwrap();
    let perimeter: f64 = mesh
        .edges_with_tag(BoundaryTag::Outer)
        .map(|e| {
            let (a, b) = (mesh.node(e.nodes[0]), mesh.node(e.nodes[1]));
            (b.x - a.x).hypot(b.y - a.y)
        })
        .sum();
    let total: f64 = f.iter().skip(2).step_by(3).sum();
    assert!((total - 2.5 * perimeter).abs() < 1e-12 * total);
    assert!(f.iter().enumerate().all(|(i, v)| i % 3 == 2 || *v == 0.0));
    // Polygonal perimeter approaches the circle.
    assert!((perimeter - 2.0 * std::f64::consts::PI).abs() < 0.01);
}

#[test]
fn traction_load_integrates_to_resultant() {
    let mesh = mesh::generate_rectangle(2.0, 1.0, 6, 3).unwrap();
    let bcs = BoundaryConditions {
        traction: vec![TractionBc {
            tag: BoundaryTag::Right,
            traction: [3.0, -1.0],
            schedule: Schedule::Ramp { t_ramp: 2.0 },
        }],
        ..Default::default()
    };
    let f = bcs.external_load(&mesh, 1.0).unwrap();
    let fx: f64 = f.iter().step_by(3).sum();
    let fy: f64 = f.iter().skip(1).step_by(3).sum();
    assert!((fx - 1.5).abs() < 1e-12);
    assert!((fy + 0.5).abs() < 1e-12);
}

#[test]
fn bvp_a_constraint_counts() {
    let cfg = ScenarioConfig::bvp_a_default();
    let sc = scenario::build(&cfg).unwrap();
    let n_left = sc.mesh.nodes_with_tag(BoundaryTag::Left).len();
    let n_right = sc.mesh.nodes_with_tag(BoundaryTag::Right).len();
    let s = sc.bcs.summary(&sc.mesh).unwrap();
    assert_eq!(s.u_constraints + s.c_constraints, 2 * n_left + 1 + n_right);
    assert_eq!(s.c_constraints, n_left);
    assert!(!s.rigid_modes_free);
}

#[test]
fn bvp_b_has_no_concentration_constraints() {
    let sc = scenario::build(&ScenarioConfig::bvp_b_default()).unwrap();
    let s = sc.bcs.summary(&sc.mesh).unwrap();
    assert_eq!(s.c_constraints, 0);
    assert_eq!(s.u_constraints, 3);
}

#[test]
fn missing_tag_is_reported() {
    let mesh = mesh::generate_annulus(0.0, 1.0, 0.1).unwrap();
    let bcs = BoundaryConditions {
        flux: vec![FluxBc {
            tag: BoundaryTag::Inner,
            influx: 1.0,
            schedule: Schedule::Constant,
        }],
        ..Default::default()
    };
    assert!(matches!(bcs.check(&mesh), Err(AssemblyError::MissingTag(BoundaryTag::Inner))));
}

#[test]
fn assembly_is_repeatable() {
    let fx = TwoElement::new();
    let frozen = fx.frozen(Coupling::TwoWay, 2.0);
    let (r0, j0) = frozen.assemble(&fx.x, true);
    let (r1, j1) = frozen.assemble(&fx.x, true);
    assert_eq!(r0, r1);
    assert_eq!(j0.unwrap().values(), j1.unwrap().values());
}
