#![allow(dead_code)]

use chemoplast::assembly::{AssemblyInput, N_QP};
use chemoplast::*;

pub struct Frozen<'a> {
    pub asm: &'a Assembler,
    pub x_old: &'a [f64],
    pub states: &'a [[MaterialState; N_QP]],
    pub sigma_h: &'a [f64],
    pub params: &'a MaterialParams,
    pub dt: f64,
    pub coupling: Coupling,
    pub external: &'a [f64],
}

impl Frozen<'_> {
    pub fn assemble(&self, x: &[f64], jacobian: bool) -> (Vec<f64>, Option<SparseMatrix>) {
        let updates = self.asm.update_states(x, self.x_old, self.states, self.params).unwrap();
        let input = AssemblyInput {
            x_new: x,
            x_old: self.x_old,
            updates: &updates,
            sigma_h: self.sigma_h,
            params: self.params,
            dt: self.dt,
            coupling: self.coupling,
            external: self.external,
        };
        self.asm.assemble(&input, jacobian).unwrap()
    }

    /// Largest relative column error of the analytic Jacobian against central
    /// differences with the nodal hydrostatic stress held fixed.
    pub fn jacobian_error(&self, x: &[f64], steps: &[f64]) -> f64 {
        let (_, j) = self.assemble(x, true);
        let j = j.unwrap();
        let n = x.len();
        let mut worst: f64 = 0.0;
        for col in 0..n {
            let h = steps[col % 3];
            let mut xp = x.to_vec();
            let mut xm = x.to_vec();
            xp[col] += h;
            xm[col] -= h;
            let (rp, _) = self.assemble(&xp, false);
            let (rm, _) = self.assemble(&xm, false);
            let fd: Vec<f64> = rp.iter().zip(&rm).map(|(a, b)| (a - b) / (2.0 * h)).collect();
            let an: Vec<f64> = (0..n).map(|r| j.get(r, col)).collect();
            let diff = fd.iter().zip(&an).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            let scale = an.iter().map(|v| v * v).sum::<f64>().sqrt();
            if scale > 0.0 {
                worst = worst.max(diff / scale);
            }
        }
        worst
    }
}

/// Two-element unit square test fixture with a nonuniform concentration and
/// a linear nodal hydrostatic stress.
pub struct TwoElement {
    pub mesh: Mesh,
    pub asm: Assembler,
    pub params: MaterialParams,
    pub x: Vec<f64>,
    pub x_old: Vec<f64>,
    pub states: Vec<[MaterialState; N_QP]>,
    pub sigma_h: Vec<f64>,
    pub external: Vec<f64>,
}

impl TwoElement {
    pub fn new() -> Self {
        let mesh = mesh::generate_rectangle(1e-3, 1e-3, 1, 1).unwrap();
        assert_eq!(mesh.n_elements(), 2);
        let asm = Assembler::new(&mesh);
        let mut params = MaterialParams::steel();
        params.hardening = Hardening::None;
        let n = asm.dofmap().n_dofs();
        let mut x_old = vec![0.0; n];
        for i in 0..mesh.n_nodes() {
            x_old[3 * i + 2] = 0.2 + 0.1 * i as f64;
        }
        let mut x = x_old.clone();
        for (i, nd) in mesh.nodes().iter().enumerate() {
            x[3 * i] = 1e-6 * (nd.x / 1e-3) + 2e-7 * (nd.y / 1e-3);
            x[3 * i + 1] = -3e-7 * (nd.x / 1e-3) * (nd.y / 1e-3);
            x[3 * i + 2] += 0.05 * (i as f64 - 1.5);
        }
        let sigma_h = mesh.nodes().iter().map(|nd| 1e8 * (nd.x - 0.5 * nd.y) / 1e-3).collect();
        let states = vec![[MaterialState::default(); N_QP]; mesh.n_elements()];
        TwoElement {
            mesh,
            asm,
            params,
            x,
            x_old,
            states,
            sigma_h,
            external: vec![0.0; n],
        }
    }

    pub fn frozen(&self, coupling: Coupling, dt: f64) -> Frozen<'_> {
        Frozen {
            asm: &self.asm,
            x_old: &self.x_old,
            states: &self.states,
            sigma_h: &self.sigma_h,
            params: &self.params,
            dt,
            coupling,
            external: &self.external,
        }
    }

    pub fn fd_steps(&self) -> [f64; 3] {
        [1e-9, 1e-9, 1e-4]
    }
}

/// Elastic material with uniform concentration and a linear displacement
/// field `u = A x`; returns the quadrature stresses of every element.
pub fn patch_stresses(mesh: &Mesh, grad_u: [[f64; 2]; 2], c: f64) -> Vec<[SymTensor2D; N_QP]> {
    let asm = Assembler::new(mesh);
    let mut params = MaterialParams::steel();
    params.hardening = Hardening::None;
    params.c0 = c;
    let n = asm.dofmap().n_dofs();
    let mut x_old = vec![0.0; n];
    for i in 0..mesh.n_nodes() {
        x_old[3 * i + 2] = c;
    }
    let mut x = x_old.clone();
    for (i, nd) in mesh.nodes().iter().enumerate() {
        x[3 * i] = grad_u[0][0] * nd.x + grad_u[0][1] * nd.y;
        x[3 * i + 1] = grad_u[1][0] * nd.x + grad_u[1][1] * nd.y;
    }
    let states = vec![[MaterialState::default(); N_QP]; mesh.n_elements()];
    asm.update_states(&x, &x_old, &states, &params)
        .unwrap()
        .iter()
        .map(|u| u.map(|s| s.state.stress))
        .collect()
}

pub fn rel_l2(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
    let den: f64 = b.iter().map(|y| y * y).sum();
    (num / den).sqrt()
}

/// Scenario on a structured rectangle with the given boundary conditions and
/// initial concentration.
pub fn rectangle_scenario<F>(
    width: f64,
    height: f64,
    nx: usize,
    ny: usize,
    params: MaterialParams,
    bcs: BoundaryConditions,
    c_init: F,
) -> Scenario
where
    F: Fn(f64, f64) -> f64,
{
    let mesh = mesh::generate_rectangle(width, height, nx, ny).unwrap();
    let mut initial = FieldState::uniform(&mesh, 0.0);
    for (i, n) in mesh.nodes().iter().enumerate() {
        initial.set_concentration(i, c_init(n.x, n.y));
    }
    let scales = NondimScales::new(&params, width.max(height)).unwrap();
    Scenario {
        mesh,
        params,
        bcs,
        initial,
        probes: Vec::new(),
        scales,
    }
}

pub fn fix(tag: BoundaryTag, field: Field, value: f64) -> DirichletBc {
    DirichletBc {
        target: Target::Tag(tag),
        field,
        value,
        schedule: Schedule::Constant,
    }
}

pub fn fix_node(node: usize, field: Field, value: f64) -> DirichletBc {
    DirichletBc {
        target: Target::Node(node),
        field,
        value,
        schedule: Schedule::Constant,
    }
}
