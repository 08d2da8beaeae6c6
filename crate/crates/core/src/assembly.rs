//! Linear-triangle discretisation of the coupled mechanics and diffusion
//! equations: element residuals and Jacobians, hydrostatic-stress recovery
//! and boundary terms.

use std::sync::OnceLock;

use rayon::prelude::*;
use thiserror::Error;

use crate::constitutive::{self, ConstitutiveError, MaterialParams, MaterialState, StressUpdate, SymTensor2D};
use crate::mesh::{BoundaryTag, Mesh};
use crate::sparse::{apply_dirichlet, LinalgError, SparseMatrix};

/// Environment variable capping the number of assembly threads (0 = auto).
pub const THREADS_ENV: &str = "CHEMOPLAST_THREADS";

/// Number of quadrature points per element.
pub const N_QP: usize = 3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AssemblyError {
    #[error("element {element}, quadrature point {point}: {source}")]
    Constitutive {
        element: usize,
        point: usize,
        source: ConstitutiveError,
    },
    #[error("boundary condition references tag `{0}` which is absent from the mesh")]
    MissingTag(BoundaryTag),
    #[error("boundary condition references node {node} but the mesh has {n_nodes} nodes")]
    MissingNode { node: usize, n_nodes: usize },
    #[error("vector of length {len} where {expected} was expected")]
    DimensionMismatch { len: usize, expected: usize },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

pub(crate) fn thread_pool() -> &'static rayon::ThreadPool {
    static POOL: OnceLock<rayon::ThreadPool> = OnceLock::new();
    POOL.get_or_init(|| {
        let n = std::env::var(THREADS_ENV)
            .ok()
            .and_then(|v| v.trim().parse::<usize>().ok())
            .unwrap_or(0);
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .expect("failed to build assembly thread pool")
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Coupling {
    /// Concentration drives stress through swelling only.
    OneWay,
    /// Hydrostatic-stress gradients also drive species flux.
    #[default]
    TwoWay,
}

impl Coupling {
    pub fn name(&self) -> &'static str {
        match self {
            Coupling::OneWay => "oneway",
            Coupling::TwoWay => "twoway",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "oneway" | "one-way" => Some(Coupling::OneWay),
            "twoway" | "two-way" => Some(Coupling::TwoWay),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Field {
    Ux,
    Uy,
    C,
}

impl Field {
    pub fn offset(self) -> usize {
        match self {
            Field::Ux => 0,
            Field::Uy => 1,
            Field::C => 2,
        }
    }
}

/// Node-major dof numbering `(u_x, u_y, c)` per node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DofMap {
    n_nodes: usize,
}

impl DofMap {
    pub fn new(n_nodes: usize) -> Self {
        DofMap { n_nodes }
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn n_dofs(&self) -> usize {
        3 * self.n_nodes
    }

    pub fn dof(&self, node: usize, field: Field) -> usize {
        3 * node + field.offset()
    }

    pub fn node_of(&self, dof: usize) -> (usize, Field) {
        let f = match dof % 3 {
            0 => Field::Ux,
            1 => Field::Uy,
            _ => Field::C,
        };
        (dof / 3, f)
    }
}

/// Solution and history variables at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldState {
    /// Global dof vector, see [`DofMap`].
    pub x: Vec<f64>,
    pub states: Vec<[MaterialState; N_QP]>,
    /// Recovered nodal hydrostatic stress.
    pub sigma_h: Vec<f64>,
}

impl FieldState {
    /// Undeformed, stress-free state with uniform concentration `c`.
    pub fn uniform(mesh: &Mesh, c: f64) -> Self {
        let n = mesh.n_nodes();
        let mut x = vec![0.0; 3 * n];
        for i in 0..n {
            x[3 * i + 2] = c;
        }
        FieldState {
            x,
            states: vec![[MaterialState::default(); N_QP]; mesh.n_elements()],
            sigma_h: vec![0.0; n],
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.x.len() / 3
    }

    pub fn displacement(&self, node: usize) -> [f64; 2] {
        [self.x[3 * node], self.x[3 * node + 1]]
    }

    pub fn concentration(&self, node: usize) -> f64 {
        self.x[3 * node + 2]
    }

    pub fn concentrations(&self) -> Vec<f64> {
        self.x.iter().skip(2).step_by(3).copied().collect()
    }

    pub fn set_concentration(&mut self, node: usize, c: f64) {
        self.x[3 * node + 2] = c;
    }

    pub fn max_eq_plastic_strain(&self) -> f64 {
        self.states
            .iter()
            .flat_map(|s| s.iter())
            .fold(0.0, |m, s| m.max(s.eq_plastic_strain))
    }
}

/// Quadrature points on the reference triangle (area ½) and their weights.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureRule {
    pub points: [[f64; 2]; N_QP],
    pub weights: [f64; N_QP],
}

/// Three-point rule exact for quadratics.
pub const QUADRATURE: QuadratureRule = QuadratureRule {
    points: [[1.0 / 6.0, 1.0 / 6.0], [2.0 / 3.0, 1.0 / 6.0], [1.0 / 6.0, 2.0 / 3.0]],
    weights: [1.0 / 6.0; N_QP],
};

/// Linear basis on the reference triangle and its (constant) gradients.
pub fn shape_tri3(xi: f64, eta: f64) -> ([f64; 3], [[f64; 2]; 3]) {
    ([1.0 - xi - eta, xi, eta], [[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])
}

/// Physical-space area and basis gradients of one triangle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElementGeometry {
    pub area: f64,
    pub grad: [[f64; 2]; 3],
}

impl ElementGeometry {
    pub fn new(c: &[[f64; 2]; 3]) -> Self {
        let (x, y) = ([c[0][0], c[1][0], c[2][0]], [c[0][1], c[1][1], c[2][1]]);
        let det = (x[1] - x[0]) * (y[2] - y[0]) - (x[2] - x[0]) * (y[1] - y[0]);
        let mut grad = [[0.0; 2]; 3];
        for a in 0..3 {
            let (b, d) = ((a + 1) % 3, (a + 2) % 3);
            grad[a] = [(y[b] - y[d]) / det, (x[d] - x[b]) / det];
        }
        ElementGeometry { area: 0.5 * det, grad }
    }

    /// Small strain of a local displacement vector `[ux0, uy0, ux1, ...]`.
    pub fn strain(&self, u: &[[f64; 2]; 3]) -> SymTensor2D {
        let mut e = SymTensor2D::ZERO;
        for a in 0..3 {
            let [gx, gy] = self.grad[a];
            e.xx += gx * u[a][0];
            e.yy += gy * u[a][1];
            e.xy += 0.5 * (gy * u[a][0] + gx * u[a][1]);
        }
        e
    }
}

/// Area-weighted nodal average of element values (lumped L2 projection).
pub fn recover_hydrostatic(mesh: &Mesh, element_values: &[f64]) -> Vec<f64> {
    let mut num = vec![0.0; mesh.n_nodes()];
    let mut den = vec![0.0; mesh.n_nodes()];
    for (e, tri) in mesh.elements().iter().enumerate() {
        let a = mesh.element_area(e);
        for &n in &tri.nodes {
            num[n] += a * element_values[e];
            den[n] += a;
        }
    }
    num.iter().zip(&den).map(|(s, w)| if *w > 0.0 { s / w } else { 0.0 }).collect()
}

/// Quadrature-averaged hydrostatic stress of every element.
pub fn element_hydrostatic(states: &[[MaterialState; N_QP]]) -> Vec<f64> {
    states
        .iter()
        .map(|qs| qs.iter().map(|s| constitutive::hydrostatic(&s.stress)).sum::<f64>() / N_QP as f64)
        .collect()
}

/// Load history multiplier applied to a boundary value.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Schedule {
    #[default]
    Constant,
    /// Linear ramp from 0 at `t = 0` to 1 at `t_ramp`, then held.
    Ramp { t_ramp: f64 },
}

impl Schedule {
    pub fn factor(&self, t: f64) -> f64 {
        match *self {
            Schedule::Constant => 1.0,
            Schedule::Ramp { t_ramp } if t_ramp > 0.0 => (t / t_ramp).clamp(0.0, 1.0),
            Schedule::Ramp { .. } => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Target {
    Tag(BoundaryTag),
    Node(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DirichletBc {
    pub target: Target,
    pub field: Field,
    pub value: f64,
    pub schedule: Schedule,
}

/// Surface traction (force per unit length) on a tagged boundary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TractionBc {
    pub tag: BoundaryTag,
    pub traction: [f64; 2],
    pub schedule: Schedule,
}

/// Species influx on a tagged boundary; positive values enter the body.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FluxBc {
    pub tag: BoundaryTag,
    pub influx: f64,
    pub schedule: Schedule,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct BoundaryConditions {
    pub dirichlet: Vec<DirichletBc>,
    pub traction: Vec<TractionBc>,
    pub flux: Vec<FluxBc>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BcSummary {
    pub u_constraints: usize,
    pub c_constraints: usize,
    /// No displacement constraint at all: rigid-body modes are unrestrained.
    pub rigid_modes_free: bool,
}

/// Two-point Gauss rule on `[0, 1]`.
const EDGE_GAUSS: [(f64, f64); 2] = [(0.211_324_865_405_187_1, 0.5), (0.788_675_134_594_812_9, 0.5)];

impl BoundaryConditions {
    pub fn check(&self, mesh: &Mesh) -> Result<(), AssemblyError> {
        let tags = self
            .dirichlet
            .iter()
            .filter_map(|d| match d.target {
                Target::Tag(t) => Some(t),
                Target::Node(_) => None,
            })
            .chain(self.traction.iter().map(|t| t.tag))
            .chain(self.flux.iter().map(|f| f.tag));
        for tag in tags {
            if !mesh.has_tag(tag) {
                return Err(AssemblyError::MissingTag(tag));
            }
        }
        for d in &self.dirichlet {
            if let Target::Node(node) = d.target {
                if node >= mesh.n_nodes() {
                    return Err(AssemblyError::MissingNode {
                        node,
                        n_nodes: mesh.n_nodes(),
                    });
                }
            }
        }
        Ok(())
    }

    /// Prescribed `(dof, value)` pairs at time `t`, one per constrained dof.
    pub fn constraints(&self, mesh: &Mesh, t: f64) -> Result<Vec<(usize, f64)>, AssemblyError> {
        self.check(mesh)?;
        let dm = DofMap::new(mesh.n_nodes());
        let mut out: Vec<(usize, f64)> = Vec::new();
        let mut seen = vec![false; dm.n_dofs()];
        for d in &self.dirichlet {
            let nodes = match d.target {
                Target::Tag(tag) => mesh.nodes_with_tag(tag),
                Target::Node(n) => vec![n],
            };
            let v = d.value * d.schedule.factor(t);
            for n in nodes {
                let dof = dm.dof(n, d.field);
                if !seen[dof] {
                    seen[dof] = true;
                    out.push((dof, v));
                }
            }
        }
        out.sort_by_key(|&(d, _)| d);
        Ok(out)
    }

    /// Consistent nodal forces and species supply from the Neumann data.
    pub fn external_load(&self, mesh: &Mesh, t: f64) -> Result<Vec<f64>, AssemblyError> {
        self.check(mesh)?;
        let dm = DofMap::new(mesh.n_nodes());
        let mut f = vec![0.0; dm.n_dofs()];
        let edge = |tag: BoundaryTag| {
            mesh.edges_with_tag(tag).map(|e| {
                let (a, b) = (mesh.node(e.nodes[0]), mesh.node(e.nodes[1]));
                (e.nodes, (b.x - a.x).hypot(b.y - a.y))
            })
        };
        for tr in &self.traction {
            let s = tr.schedule.factor(t);
            for ([a, b], len) in edge(tr.tag) {
                for (gp, w) in EDGE_GAUSS {
                    let (na, nb) = (1.0 - gp, gp);
                    for k in 0..2 {
                        let v = w * len * s * tr.traction[k];
                        f[3 * a + k] += v * na;
                        f[3 * b + k] += v * nb;
                    }
                }
            }
        }
        for fl in &self.flux {
            let s = fl.schedule.factor(t);
            for ([a, b], len) in edge(fl.tag) {
                for (gp, w) in EDGE_GAUSS {
                    let v = w * len * s * fl.influx;
                    f[dm.dof(a, Field::C)] += v * (1.0 - gp);
                    f[dm.dof(b, Field::C)] += v * gp;
                }
            }
        }
        Ok(f)
    }

    pub fn summary(&self, mesh: &Mesh) -> Result<BcSummary, AssemblyError> {
        let cons = self.constraints(mesh, f64::INFINITY)?;
        let c_constraints = cons.iter().filter(|(d, _)| d % 3 == 2).count();
        let u_constraints = cons.len() - c_constraints;
        Ok(BcSummary {
            u_constraints,
            c_constraints,
            rigid_modes_free: u_constraints == 0,
        })
    }
}

/// Imposes Dirichlet data on a Newton system `J δ = rhs` at iterate `x`, so
/// that `x + δ` meets every prescribed value.
pub fn apply_boundary_conditions(
    jacobian: &mut SparseMatrix,
    rhs: &mut [f64],
    x: &[f64],
    constraints: &[(usize, f64)],
) -> Result<(), AssemblyError> {
    let shifted: Vec<(usize, f64)> = constraints.iter().map(|&(d, v)| (d, v - x[d])).collect();
    apply_dirichlet(jacobian, rhs, &shifted)?;
    Ok(())
}

/// Inputs to a residual/Jacobian evaluation at `t_{n+1}`.
#[derive(Debug, Clone, Copy)]
pub struct AssemblyInput<'a> {
    pub x_new: &'a [f64],
    pub x_old: &'a [f64],
    /// Constitutive updates at every quadrature point for `x_new`.
    pub updates: &'a [[StressUpdate; N_QP]],
    /// Nodal hydrostatic stress entering the stress-driven flux.
    pub sigma_h: &'a [f64],
    pub params: &'a MaterialParams,
    pub dt: f64,
    pub coupling: Coupling,
    /// Neumann load vector from [`BoundaryConditions::external_load`].
    pub external: &'a [f64],
}

/// Precomputed element geometry and the global sparsity pattern.
#[derive(Debug, Clone)]
pub struct Assembler {
    dofmap: DofMap,
    geometry: Vec<ElementGeometry>,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    /// Storage slot of each local 9x9 entry.
    slots: Vec<[usize; 81]>,
    connectivity: Vec<[usize; 3]>,
}

impl Assembler {
    pub fn new(mesh: &Mesh) -> Self {
        let dofmap = DofMap::new(mesh.n_nodes());
        let n = dofmap.n_dofs();
        let connectivity: Vec<[usize; 3]> = mesh.elements().iter().map(|t| t.nodes).collect();
        let geometry = (0..mesh.n_elements())
            .map(|e| ElementGeometry::new(&mesh.element_coords(e)))
            .collect();

        let mut neighbours: Vec<Vec<usize>> = vec![Vec::new(); mesh.n_nodes()];
        for t in &connectivity {
            for &a in t {
                neighbours[a].extend_from_slice(t);
            }
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::new();
        row_ptr.push(0);
        for nb in neighbours.iter_mut() {
            nb.sort_unstable();
            nb.dedup();
            let cols: Vec<usize> = nb.iter().flat_map(|&m| [3 * m, 3 * m + 1, 3 * m + 2]).collect();
            for _ in 0..3 {
                col_idx.extend_from_slice(&cols);
                row_ptr.push(col_idx.len());
            }
        }
        let pattern = SparseMatrix::from_pattern(n, row_ptr.clone(), col_idx.clone());
        let slots = connectivity
            .iter()
            .map(|t| {
                let mut s = [0usize; 81];
                for la in 0..9 {
                    for lb in 0..9 {
                        let (r, c) = (3 * t[la / 3] + la % 3, 3 * t[lb / 3] + lb % 3);
                        s[9 * la + lb] = pattern.position(r, c).expect("element entry missing from pattern");
                    }
                }
                s
            })
            .collect();
        Assembler {
            dofmap,
            geometry,
            row_ptr,
            col_idx,
            slots,
            connectivity,
        }
    }

    pub fn dofmap(&self) -> DofMap {
        self.dofmap
    }

    pub fn geometry(&self) -> &[ElementGeometry] {
        &self.geometry
    }

    /// Zero matrix on the assembly pattern.
    pub fn empty_matrix(&self) -> SparseMatrix {
        SparseMatrix::from_pattern(self.dofmap.n_dofs(), self.row_ptr.clone(), self.col_idx.clone())
    }

    fn check_len(&self, v: &[f64], expected: usize) -> Result<(), AssemblyError> {
        if v.len() != expected {
            return Err(AssemblyError::DimensionMismatch { len: v.len(), expected });
        }
        Ok(())
    }

    /// Constitutive update at every quadrature point for the increment
    /// `x_old -> x_new`, starting from the converged `old` states.
    pub fn update_states(
        &self,
        x_new: &[f64],
        x_old: &[f64],
        old: &[[MaterialState; N_QP]],
        params: &MaterialParams,
    ) -> Result<Vec<[StressUpdate; N_QP]>, AssemblyError> {
        let n = self.dofmap.n_dofs();
        self.check_len(x_new, n)?;
        self.check_len(x_old, n)?;
        if old.len() != self.geometry.len() {
            return Err(AssemblyError::DimensionMismatch {
                len: old.len(),
                expected: self.geometry.len(),
            });
        }
        thread_pool().install(|| {
            (0..self.geometry.len())
                .into_par_iter()
                .map(|e| {
                    let t = &self.connectivity[e];
                    let g = &self.geometry[e];
                    let du = t.map(|m| [x_new[3 * m] - x_old[3 * m], x_new[3 * m + 1] - x_old[3 * m + 1]]);
                    let dc = t.map(|m| x_new[3 * m + 2] - x_old[3 * m + 2]);
                    let de = g.strain(&du);
                    let mut out = [None; N_QP];
                    for q in 0..N_QP {
                        let [xi, eta] = QUADRATURE.points[q];
                        let (nq, _) = shape_tri3(xi, eta);
                        let dcq = nq[0] * dc[0] + nq[1] * dc[1] + nq[2] * dc[2];
                        let u = constitutive::update_stress(&old[e][q], &de, dcq, params).map_err(|source| {
                            AssemblyError::Constitutive {
                                element: e,
                                point: q,
                                source,
                            }
                        })?;
                        out[q] = Some(u);
                    }
                    Ok(out.map(|u| u.unwrap()))
                })
                .collect()
        })
    }

    /// Residual `F(x_new)` and, on request, its Jacobian. The Jacobian omits
    /// the sensitivity of the stress-driven flux to the displacements.
    pub fn assemble(
        &self,
        input: &AssemblyInput<'_>,
        jacobian: bool,
    ) -> Result<(Vec<f64>, Option<SparseMatrix>), AssemblyError> {
        let n = self.dofmap.n_dofs();
        self.check_len(input.x_new, n)?;
        self.check_len(input.x_old, n)?;
        self.check_len(input.external, n)?;
        self.check_len(input.sigma_h, self.dofmap.n_nodes())?;
        if input.updates.len() != self.geometry.len() {
            return Err(AssemblyError::DimensionMismatch {
                len: input.updates.len(),
                expected: self.geometry.len(),
            });
        }
        let locals: Vec<([f64; 9], [f64; 81])> = thread_pool().install(|| {
            (0..self.geometry.len())
                .into_par_iter()
                .map(|e| self.element(e, input, jacobian))
                .collect()
        });
        let mut residual: Vec<f64> = input.external.iter().map(|v| -v).collect();
        let mut matrix = jacobian.then(|| self.empty_matrix());
        // Sequential scatter in element order keeps the sums deterministic.
        for (e, (r, k)) in locals.iter().enumerate() {
            let t = &self.connectivity[e];
            for la in 0..9 {
                residual[3 * t[la / 3] + la % 3] += r[la];
            }
            if let Some(m) = matrix.as_mut() {
                let vals = m.values_mut();
                for (s, v) in self.slots[e].iter().zip(k.iter()) {
                    vals[*s] += v;
                }
            }
        }
        Ok((residual, matrix))
    }

    fn element(&self, e: usize, inp: &AssemblyInput<'_>, jacobian: bool) -> ([f64; 9], [f64; 81]) {
        let t = &self.connectivity[e];
        let g = &self.geometry[e];
        let p = inp.params;
        let mut r = [0.0; 9];
        let mut k = [0.0; 81];
        let c_new = t.map(|m| inp.x_new[3 * m + 2]);
        let c_old = t.map(|m| inp.x_old[3 * m + 2]);
        let grad_c = grad(&g.grad, &c_new);
        let sh = t.map(|m| inp.sigma_h[m]);
        let grad_sh = grad(&g.grad, &sh);
        let d = p.diffusivity;
        let drift = match inp.coupling {
            Coupling::TwoWay => d * p.coupling(),
            Coupling::OneWay => 0.0,
        };
        let inv_dt = 1.0 / inp.dt;
        let chem = p.molar_volume / 3.0;
        // Stress-space rows of B for (ux_a, uy_a).
        let b = |a: usize, f: usize| -> [f64; 4] {
            let [gx, gy] = g.grad[a];
            if f == 0 {
                [gx, 0.0, 0.0, gy]
            } else {
                [0.0, gy, 0.0, gx]
            }
        };

        for q in 0..N_QP {
            let [xi, eta] = QUADRATURE.points[q];
            let (nq, _) = shape_tri3(xi, eta);
            let w = 2.0 * g.area * QUADRATURE.weights[q];
            let upd = &inp.updates[e][q];
            let sig = upd.state.stress.to_array();
            let cq: f64 = (0..3).map(|a| nq[a] * c_new[a]).sum();
            let cq_old: f64 = (0..3).map(|a| nq[a] * c_old[a]).sum();
            let rate = (cq - cq_old) * inv_dt;

            for a in 0..3 {
                for f in 0..2 {
                    let ba = b(a, f);
                    r[3 * a + f] += w * dot4(&ba, &sig);
                }
                let ga = g.grad[a];
                r[3 * a + 2] += w
                    * (rate * nq[a] + d * dot2(&ga, &grad_c) - drift * cq * dot2(&ga, &grad_sh));
            }

            if !jacobian {
                continue;
            }
            let dt = &upd.tangent;
            // dσ/dc = −C_alg : (Ω/3) I.
            let mut dsig_dc = [0.0; 4];
            for (i, v) in dsig_dc.iter_mut().enumerate() {
                *v = -chem * (dt[i][0] + dt[i][1] + dt[i][2]);
            }
            for a in 0..3 {
                for fa in 0..2 {
                    let ba = b(a, fa);
                    // Row of Bᵀ C_alg.
                    let mut bc = [0.0; 4];
                    for (j, v) in bc.iter_mut().enumerate() {
                        *v = (0..4).map(|i| ba[i] * dt[i][j]).sum();
                    }
                    let row = 9 * (3 * a + fa);
                    for bn in 0..3 {
                        for fb in 0..2 {
                            k[row + 3 * bn + fb] += w * dot4(&bc, &b(bn, fb));
                        }
                        k[row + 3 * bn + 2] += w * dot4(&ba, &dsig_dc) * nq[bn];
                    }
                }
                let row = 9 * (3 * a + 2);
                let ga = g.grad[a];
                for bn in 0..3 {
                    let gb = g.grad[bn];
                    k[row + 3 * bn + 2] += w
                        * (inv_dt * nq[a] * nq[bn] + d * dot2(&ga, &gb) - drift * nq[bn] * dot2(&ga, &grad_sh));
                }
            }
        }
        (r, k)
    }

    /// Largest norm of the element strain increment between two dof vectors.
    pub fn max_strain_increment(&self, x_new: &[f64], x_old: &[f64]) -> f64 {
        self.connectivity
            .iter()
            .zip(&self.geometry)
            .map(|(t, g)| {
                let du = t.map(|m| [x_new[3 * m] - x_old[3 * m], x_new[3 * m + 1] - x_old[3 * m + 1]]);
                g.strain(&du).norm()
            })
            .fold(0.0, f64::max)
    }

    /// `∫ c dΩ` of the nodal concentration field.
    pub fn total_concentration(&self, x: &[f64]) -> f64 {
        self.connectivity
            .iter()
            .zip(&self.geometry)
            .map(|(t, g)| g.area * t.iter().map(|&m| x[3 * m + 2]).sum::<f64>() / 3.0)
            .sum()
    }
}

fn grad(g: &[[f64; 2]; 3], v: &[f64; 3]) -> [f64; 2] {
    [
        g[0][0] * v[0] + g[1][0] * v[1] + g[2][0] * v[2],
        g[0][1] * v[0] + g[1][1] * v[1] + g[2][1] * v[2],
    ]
}

fn dot2(a: &[f64; 2], b: &[f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

fn dot4(a: &[f64; 4], b: &[f64; 4]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2] + a[3] * b[3]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::generate_rectangle;

    #[test]
    fn shape_functions() {
        let (n, g) = shape_tri3(1.0 / 3.0, 1.0 / 3.0);
        for v in n {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
        assert_eq!(shape_tri3(0.0, 0.0).0, [1.0, 0.0, 0.0]);
        let (n, _) = shape_tri3(0.2, 0.7);
        assert!((n.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert_eq!(g.iter().map(|v| v[0]).sum::<f64>(), 0.0);
        assert_eq!(g.iter().map(|v| v[1]).sum::<f64>(), 0.0);
    }

    #[test]
    fn quadrature_integrates_quadratics() {
        assert!((QUADRATURE.weights.iter().sum::<f64>() - 0.5).abs() < 1e-15);
        // ∫ ξ² over the reference triangle is 1/12, ∫ ξη is 1/24.
        let i2: f64 = (0..N_QP).map(|q| QUADRATURE.weights[q] * QUADRATURE.points[q][0].powi(2)).sum();
        let i11: f64 = (0..N_QP)
            .map(|q| QUADRATURE.weights[q] * QUADRATURE.points[q][0] * QUADRATURE.points[q][1])
            .sum();
        assert!((i2 - 1.0 / 12.0).abs() < 1e-15);
        assert!((i11 - 1.0 / 24.0).abs() < 1e-15);
    }

    #[test]
    fn recovery_of_uniform_and_single() {
        let m = generate_rectangle(1.0, 1.0, 3, 3).unwrap();
        let r = recover_hydrostatic(&m, &vec![4.5; m.n_elements()]);
        assert!(r.iter().all(|v| (v - 4.5).abs() < 1e-14));
    }

    #[test]
    fn dof_map_round_trip() {
        let d = DofMap::new(7);
        assert_eq!(d.n_dofs(), 21);
        for n in 0..7 {
            for f in [Field::Ux, Field::Uy, Field::C] {
                assert_eq!(d.node_of(d.dof(n, f)), (n, f));
            }
        }
    }

    #[test]
    fn ramp_schedule() {
        let s = Schedule::Ramp { t_ramp: 2.0 };
        assert_eq!(s.factor(-1.0), 0.0);
        assert_eq!(s.factor(1.0), 0.5);
        assert_eq!(s.factor(5.0), 1.0);
        assert_eq!(Schedule::Constant.factor(0.0), 1.0);
    }
}
