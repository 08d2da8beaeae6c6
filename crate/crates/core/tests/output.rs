use std::collections::HashMap;

use chemoplast::output::{self, COMPARISON_CSV_HEADER, PROBE_CSV_HEADER};
use chemoplast::*;

/// Minimal reader for the legacy ASCII unstructured-grid files we write.
struct Vtk {
    points: Vec<[f64; 3]>,
    cells: Vec<Vec<usize>>,
    cell_types: Vec<u32>,
    point_scalars: HashMap<String, Vec<f64>>,
    point_vectors: HashMap<String, Vec<[f64; 3]>>,
    cell_scalars: HashMap<String, Vec<f64>>,
}

fn parse_vtk(text: &str) -> Vtk {
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("# vtk DataFile Version 3.0"));
    lines.next().unwrap();
    assert_eq!(lines.next(), Some("ASCII"));
    assert_eq!(lines.next(), Some("DATASET UNSTRUCTURED_GRID"));
    let mut vtk = Vtk {
        points: Vec::new(),
        cells: Vec::new(),
        cell_types: Vec::new(),
        point_scalars: HashMap::new(),
        point_vectors: HashMap::new(),
        cell_scalars: HashMap::new(),
    };
    let nums = |l: &str| l.split_whitespace().map(|t| t.parse::<f64>().unwrap()).collect::<Vec<_>>();
    let mut section = "";
    let mut count = 0;
    while let Some(line) = lines.next() {
        let tok: Vec<&str> = line.split_whitespace().collect();
        match tok.first().copied() {
            Some("POINTS") => {
                let n: usize = tok[1].parse().unwrap();
                for _ in 0..n {
                    let v = nums(lines.next().unwrap());
                    vtk.points.push([v[0], v[1], v[2]]);
                }
            }
            Some("CELLS") => {
                let n: usize = tok[1].parse().unwrap();
                let total: usize = tok[2].parse().unwrap();
                let mut seen = 0;
                for _ in 0..n {
                    let v: Vec<usize> = lines.next().unwrap().split_whitespace().map(|t| t.parse().unwrap()).collect();
                    assert_eq!(v[0] + 1, v.len());
                    seen += v.len();
                    vtk.cells.push(v[1..].to_vec());
                }
                assert_eq!(seen, total);
            }
            Some("CELL_TYPES") => {
                let n: usize = tok[1].parse().unwrap();
                for _ in 0..n {
                    vtk.cell_types.push(lines.next().unwrap().trim().parse().unwrap());
                }
            }
            Some("POINT_DATA") | Some("CELL_DATA") => {
                section = tok[0];
                count = tok[1].parse().unwrap();
            }
            Some("SCALARS") => {
                assert_eq!(lines.next(), Some("LOOKUP_TABLE default"));
                let vals: Vec<f64> = (0..count).map(|_| nums(lines.next().unwrap())[0]).collect();
                let map = if section == "POINT_DATA" { &mut vtk.point_scalars } else { &mut vtk.cell_scalars };
                map.insert(tok[1].to_string(), vals);
            }
            Some("VECTORS") => {
                let vals = (0..count)
                    .map(|_| {
                        let v = nums(lines.next().unwrap());
                        [v[0], v[1], v[2]]
                    })
                    .collect();
                vtk.point_vectors.insert(tok[1].to_string(), vals);
            }
            None => {}
            Some(other) => panic!("unexpected line {other}"),
        }
    }
    vtk
}

fn short_run() -> (Scenario, FieldState, TimeHistory) {
    let mut cfg = ScenarioConfig::bvp_a_default();
    cfg.solver.t_end_hat = 0.04;
    cfg.solver.dt_hat = 0.02;
    let sc = scenario::build(&cfg).unwrap();
    let mut sim = Simulation::new(&sc, cfg.solver_config().unwrap()).unwrap();
    let h = sim.run().unwrap();
    let state = sim.state().clone();
    (sc, state, h)
}

#[test]
fn vtk_snapshot_round_trips() {
    let (sc, state, _) = short_run();
    let mut buf = Vec::new();
    output::write_vtk_to(&sc.mesh, &state, &mut buf).unwrap();
    let vtk = parse_vtk(std::str::from_utf8(&buf).unwrap());
    assert_eq!(vtk.points.len(), sc.mesh.n_nodes());
    assert_eq!(vtk.cells.len(), sc.mesh.n_elements());
    assert!(vtk.cell_types.iter().all(|&t| t == 5));
    for (p, n) in vtk.points.iter().zip(sc.mesh.nodes()) {
        assert!((p[0] - n.x).abs() < 1e-12 && (p[1] - n.y).abs() < 1e-12 && p[2] == 0.0);
    }
    for (c, t) in vtk.cells.iter().zip(sc.mesh.elements()) {
        assert_eq!(c.as_slice(), &t.nodes);
    }
    let c = &vtk.point_scalars["c"];
    for (i, v) in c.iter().enumerate() {
        assert!((v - state.concentration(i)).abs() <= 1e-11 * v.abs().max(1e-30));
    }
    let u = &vtk.point_vectors["u"];
    for (i, v) in u.iter().enumerate() {
        let [ux, uy] = state.displacement(i);
        assert!((v[0] - ux).abs() <= 1e-11 * ux.abs().max(1e-30));
        assert!((v[1] - uy).abs() <= 1e-11 * uy.abs().max(1e-30));
    }
    assert_eq!(vtk.point_scalars["sigma_h"].len(), sc.mesh.n_nodes());
    assert_eq!(vtk.cell_scalars["eps_p_eq"].len(), sc.mesh.n_elements());
}

#[test]
fn probe_csv_has_one_row_per_probe_and_step() {
    let (sc, _, h) = short_run();
    let mut buf = Vec::new();
    output::write_probe_csv_to(&h, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(header.join(","), PROBE_CSV_HEADER);
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), h.records.len() * sc.probes.len());
    let col = |name: &str| header.iter().position(|h| *h == name).unwrap();
    for (row, sample) in rows.iter().zip(h.records.iter().flat_map(|r| r.probes.iter())) {
        assert_eq!(row.len(), header.len());
        assert_eq!(row[col("probe")], sample.probe);
        let t: f64 = row[col("t_hat")].parse().unwrap();
        let c: f64 = row[col("c")].parse().unwrap();
        assert!((t - sample.t_hat).abs() <= 1e-11 * t.abs());
        assert!((c - sample.c).abs() <= 1e-11 * c.abs().max(1e-30));
    }
}

#[test]
fn comparison_csv_lists_requested_angles() {
    let mut light = ScenarioConfig::validation_default();
    light.geometry = GeometryConfig::PlateWithHole {
        length: 1.0,
        radius: 0.05,
        target_h: 0.02,
        far_h: Some(0.1),
    };
    let sc = scenario::build(&light).unwrap();
    let analytic = AnalyticParams::from_material(&sc.params, light.traction, 0.05, sc.initial.concentration(0));
    let rows = output::analytic_comparison(&sc.mesh, &sc.initial, &analytic, &scenario::COMPARISON_ANGLES, &sc.scales)
        .unwrap();
    assert_eq!(rows.len(), 3);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cmp.csv");
    output::write_comparison_csv(&rows, &path).unwrap();
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some(COMPARISON_CSV_HEADER));
    for (line, row) in lines.zip(&rows) {
        let v: Vec<f64> = line.split(',').map(|t| t.parse().unwrap()).collect();
        assert_eq!(v.len(), 5);
        assert!((v[0] - row.beta).abs() < 1e-12);
        assert!((v[2] - row.sigma_h_exact).abs() <= 1e-11 * row.sigma_h_exact.abs());
    }
}
