//! Probe time series (CSV), field snapshots (legacy VTK) and the hole-plate
//! comparison table.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use crate::assembly::{FieldState, N_QP};
use crate::mesh::{Geometry, Mesh};
use crate::oracles::{hole_concentration, kirsch_hydrostatic, AnalyticParams, NondimScales, OracleError};
use crate::solver::{sample_probe, Probe, TimeHistory};

pub const PROBE_CSV_HEADER: &str = "time,t_hat,probe,x,y,c,c_hat,sigma_h,sigma_h_hat,sigma_e,eps_p_eq";
pub const VTK_HEADER: &str = "# vtk DataFile Version 3.0";
pub const COMPARISON_CSV_HEADER: &str = "beta,sigma_h_fe,sigma_h_exact,c_fe,c_exact";

pub fn write_probe_csv_to<W: Write>(history: &TimeHistory, mut w: W) -> io::Result<()> {
    writeln!(w, "{PROBE_CSV_HEADER}")?;
    for rec in &history.records {
        for p in &rec.probes {
            writeln!(
                w,
                "{:.12e},{:.12e},{},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e}",
                p.time, p.t_hat, p.probe, p.x, p.y, p.c, p.c_hat, p.sigma_h, p.sigma_h_hat, p.sigma_e, p.eps_p_eq
            )?;
        }
    }
    w.flush()
}

pub fn write_probe_csv(history: &TimeHistory, path: &Path) -> io::Result<()> {
    write_probe_csv_to(history, BufWriter::new(File::create(path)?))
}

pub fn write_vtk_to<W: Write>(mesh: &Mesh, state: &FieldState, mut w: W) -> io::Result<()> {
    writeln!(w, "{VTK_HEADER}")?;
    writeln!(w, "chemoplast snapshot")?;
    writeln!(w, "ASCII")?;
    writeln!(w, "DATASET UNSTRUCTURED_GRID")?;
    writeln!(w, "POINTS {} double", mesh.n_nodes())?;
    for n in mesh.nodes() {
        writeln!(w, "{:.12e} {:.12e} 0", n.x, n.y)?;
    }
    let ne = mesh.n_elements();
    writeln!(w, "CELLS {} {}", ne, 4 * ne)?;
    for t in mesh.elements() {
        writeln!(w, "3 {} {} {}", t.nodes[0], t.nodes[1], t.nodes[2])?;
    }
    writeln!(w, "CELL_TYPES {ne}")?;
    for _ in 0..ne {
        writeln!(w, "5")?;
    }
    writeln!(w, "POINT_DATA {}", mesh.n_nodes())?;
    writeln!(w, "SCALARS c double 1")?;
    writeln!(w, "LOOKUP_TABLE default")?;
    for i in 0..mesh.n_nodes() {
        writeln!(w, "{:.12e}", state.concentration(i))?;
    }
    writeln!(w, "SCALARS sigma_h double 1")?;
    writeln!(w, "LOOKUP_TABLE default")?;
    for v in &state.sigma_h {
        writeln!(w, "{v:.12e}")?;
    }
    writeln!(w, "VECTORS u double")?;
    for i in 0..mesh.n_nodes() {
        let [ux, uy] = state.displacement(i);
        writeln!(w, "{ux:.12e} {uy:.12e} 0")?;
    }
    writeln!(w, "CELL_DATA {ne}")?;
    writeln!(w, "SCALARS eps_p_eq double 1")?;
    writeln!(w, "LOOKUP_TABLE default")?;
    for qs in &state.states {
        let mean = qs.iter().map(|s| s.eq_plastic_strain).sum::<f64>() / N_QP as f64;
        writeln!(w, "{mean:.12e}")?;
    }
    w.flush()
}

pub fn write_vtk_snapshot(mesh: &Mesh, state: &FieldState, path: &Path) -> io::Result<()> {
    write_vtk_to(mesh, state, BufWriter::new(File::create(path)?))
}

/// Finite-element and closed-form values on the hole boundary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComparisonRow {
    pub beta: f64,
    pub sigma_h_fe: f64,
    pub sigma_h_exact: f64,
    pub c_fe: f64,
    pub c_exact: f64,
}

/// Samples the hole boundary at angles `betas` (measured from the load
/// axis) and evaluates the Kirsch hydrostatic stress and the equilibrium
/// concentration there. `c0` is the mean concentration of the plate.
pub fn analytic_comparison(
    mesh: &Mesh,
    state: &FieldState,
    analytic: &AnalyticParams,
    betas: &[f64],
    scales: &NondimScales,
) -> Result<Vec<ComparisonRow>, OracleError> {
    let radius = match *mesh.geometry() {
        Geometry::PlateWithHole { radius, .. } => radius,
        _ => analytic.r0,
    };
    betas
        .iter()
        .map(|&beta| {
            let probe = Probe::new("hole", radius * beta.cos(), radius * beta.sin());
            let s = sample_probe(mesh, state, &probe, 0.0, scales);
            Ok(ComparisonRow {
                beta,
                sigma_h_fe: s.sigma_h,
                sigma_h_exact: kirsch_hydrostatic(analytic.r0, beta, analytic)?,
                c_fe: s.c,
                c_exact: hole_concentration(analytic.r0, beta, analytic)?,
            })
        })
        .collect()
}

pub fn write_comparison_csv(rows: &[ComparisonRow], path: &Path) -> io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{COMPARISON_CSV_HEADER}")?;
    for r in rows {
        writeln!(
            w,
            "{:.12e},{:.12e},{:.12e},{:.12e},{:.12e}",
            r.beta, r.sigma_h_fe, r.sigma_h_exact, r.c_fe, r.c_exact
        )?;
    }
    w.flush()
}
