//! Linear triangle meshes for the two study geometries.
//!
//! Meshes are built from structured templates rather than a Delaunay mesher:
//! the plate with a hole is a ray-mapped grid graded geometrically away from
//! the hole, the annulus (or solid disk) is a stack of concentric rings
//! stitched together strip by strip. Both layouts are mirror-symmetric about
//! the coordinate axes and fully deterministic.

use std::collections::HashMap;
use std::f64::consts::PI;

use thiserror::Error;

/// Relative tolerance used to detect coincident nodes.
pub const DEDUP_TOLERANCE: f64 = 1e-12;

/// Elements with an interior angle below this value are reported as slivers.
pub const SLIVER_ANGLE_DEG: f64 = 5.0;

/// Minimum number of segments used to discretise any circle.
pub const MIN_CIRCLE_SEGMENTS: usize = 16;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeshError {
    #[error("infeasible geometry: {0}")]
    InfeasibleGeometry(String),
    #[error("target edge size {target_h} cannot resolve a circle of radius {radius} with at least 8 segments")]
    TooCoarse { target_h: f64, radius: f64 },
    #[error("element {element} references node {node} but the mesh has {n_nodes} nodes")]
    InvalidNode { element: usize, node: usize, n_nodes: usize },
    #[error("node {0} has non-finite coordinates")]
    NonFinite(usize),
}

/// A mesh vertex. Node ids are the dense indices into [`Mesh::nodes`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Node {
    pub x: f64,
    pub y: f64,
}

/// Three-node triangle, counter-clockwise.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Tri3 {
    pub nodes: [usize; 3],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BoundaryTag {
    Left,
    Right,
    Top,
    Bottom,
    Hole,
    Inner,
    Outer,
}

impl BoundaryTag {
    pub const ALL: [BoundaryTag; 7] = [
        BoundaryTag::Left,
        BoundaryTag::Right,
        BoundaryTag::Top,
        BoundaryTag::Bottom,
        BoundaryTag::Hole,
        BoundaryTag::Inner,
        BoundaryTag::Outer,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BoundaryTag::Left => "left",
            BoundaryTag::Right => "right",
            BoundaryTag::Top => "top",
            BoundaryTag::Bottom => "bottom",
            BoundaryTag::Hole => "hole",
            BoundaryTag::Inner => "inner",
            BoundaryTag::Outer => "outer",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|t| t.name() == name)
    }
}

impl std::fmt::Display for BoundaryTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// A boundary segment. The node order follows the owning element's
/// counter-clockwise orientation, so the outward normal is `(dy, -dx)/len`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryEdge {
    pub nodes: [usize; 2],
    pub tag: BoundaryTag,
    pub element: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Geometry {
    /// Square of side `length` centred at the origin with a central hole.
    PlateWithHole { length: f64, radius: f64 },
    /// Annulus centred at the origin; `inner_radius == 0` is a solid disk.
    Annulus { inner_radius: f64, outer_radius: f64 },
    /// Axis-aligned rectangle with its lower-left corner at the origin.
    Rectangle { width: f64, height: f64 },
}

impl Geometry {
    pub fn characteristic_length(&self) -> f64 {
        match *self {
            Geometry::PlateWithHole { length, .. } => length,
            Geometry::Annulus { outer_radius, .. } => 2.0 * outer_radius,
            Geometry::Rectangle { width, height } => width.max(height),
        }
    }

    /// Exact area of the continuous domain.
    pub fn area(&self) -> f64 {
        match *self {
            Geometry::PlateWithHole { length, radius } => length * length - PI * radius * radius,
            Geometry::Annulus {
                inner_radius,
                outer_radius,
            } => PI * (outer_radius * outer_radius - inner_radius * inner_radius),
            Geometry::Rectangle { width, height } => width * height,
        }
    }

    pub fn tags(&self) -> &'static [BoundaryTag] {
        match *self {
            Geometry::PlateWithHole { .. } => &[
                BoundaryTag::Left,
                BoundaryTag::Right,
                BoundaryTag::Top,
                BoundaryTag::Bottom,
                BoundaryTag::Hole,
            ],
            Geometry::Annulus { inner_radius, .. } if inner_radius > 0.0 => {
                &[BoundaryTag::Inner, BoundaryTag::Outer]
            }
            Geometry::Annulus { .. } => &[BoundaryTag::Outer],
            Geometry::Rectangle { .. } => &[
                BoundaryTag::Left,
                BoundaryTag::Right,
                BoundaryTag::Top,
                BoundaryTag::Bottom,
            ],
        }
    }
}

/// Immutable triangle mesh with tagged boundary.
#[derive(Debug, Clone)]
pub struct Mesh {
    nodes: Vec<Node>,
    elements: Vec<Tri3>,
    boundary: Vec<BoundaryEdge>,
    geometry: Geometry,
}

impl Mesh {
    /// Assembles a mesh from raw parts. Element orientation is normalised to
    /// counter-clockwise and boundary edges are tagged with `classify`, which
    /// receives the edge midpoint.
    pub fn from_parts<F>(
        nodes: Vec<Node>,
        mut elements: Vec<Tri3>,
        geometry: Geometry,
        classify: F,
    ) -> Result<Mesh, MeshError>
    where
        F: Fn(f64, f64) -> BoundaryTag,
    {
        for (i, n) in nodes.iter().enumerate() {
            if !n.x.is_finite() || !n.y.is_finite() {
                return Err(MeshError::NonFinite(i));
            }
        }
        for (e, tri) in elements.iter_mut().enumerate() {
            for &n in &tri.nodes {
                if n >= nodes.len() {
                    return Err(MeshError::InvalidNode {
                        element: e,
                        node: n,
                        n_nodes: nodes.len(),
                    });
                }
            }
            if signed_area(&nodes, tri) < 0.0 {
                tri.nodes.swap(1, 2);
            }
        }
        let boundary = find_boundary(&elements)
            .into_iter()
            .map(|(a, b, element)| {
                let mx = 0.5 * (nodes[a].x + nodes[b].x);
                let my = 0.5 * (nodes[a].y + nodes[b].y);
                BoundaryEdge {
                    nodes: [a, b],
                    tag: classify(mx, my),
                    element,
                }
            })
            .collect();
        Ok(Mesh {
            nodes,
            elements,
            boundary,
            geometry,
        })
    }

    /// Builds a mesh without touching element orientation or boundary tags.
    /// Intended for tests and tools that need to inspect malformed meshes.
    pub fn from_raw(
        nodes: Vec<Node>,
        elements: Vec<Tri3>,
        boundary: Vec<BoundaryEdge>,
        geometry: Geometry,
    ) -> Mesh {
        Mesh {
            nodes,
            elements,
            boundary,
            geometry,
        }
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn elements(&self) -> &[Tri3] {
        &self.elements
    }

    pub fn boundary(&self) -> &[BoundaryEdge] {
        &self.boundary
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_elements(&self) -> usize {
        self.elements.len()
    }

    pub fn node(&self, id: usize) -> Node {
        self.nodes[id]
    }

    pub fn element_coords(&self, e: usize) -> [[f64; 2]; 3] {
        let t = self.elements[e].nodes;
        t.map(|n| [self.nodes[n].x, self.nodes[n].y])
    }

    pub fn element_area(&self, e: usize) -> f64 {
        signed_area(&self.nodes, &self.elements[e])
    }

    pub fn total_area(&self) -> f64 {
        (0..self.elements.len()).map(|e| self.element_area(e)).sum()
    }

    pub fn has_tag(&self, tag: BoundaryTag) -> bool {
        self.boundary.iter().any(|b| b.tag == tag)
    }

    pub fn edges_with_tag(&self, tag: BoundaryTag) -> impl Iterator<Item = &BoundaryEdge> {
        self.boundary.iter().filter(move |b| b.tag == tag)
    }

    /// Sorted, de-duplicated node ids lying on edges with `tag`.
    pub fn nodes_with_tag(&self, tag: BoundaryTag) -> Vec<usize> {
        let mut ids: Vec<usize> = self
            .edges_with_tag(tag)
            .flat_map(|b| b.nodes)
            .collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }

    /// Node closest to `(x, y)`.
    pub fn nearest_node(&self, x: f64, y: f64) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, n) in self.nodes.iter().enumerate() {
            let d = (n.x - x).powi(2) + (n.y - y).powi(2);
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        best
    }

    /// Finds the element containing `(x, y)` and the barycentric coordinates
    /// of the point in it. Points within a small tolerance of an element
    /// (e.g. on the polygonal boundary) are accepted.
    pub fn locate(&self, x: f64, y: f64) -> Option<(usize, [f64; 3])> {
        let tol = 1e-9;
        let mut best: Option<(usize, [f64; 3], f64)> = None;
        for e in 0..self.elements.len() {
            let l = barycentric(&self.element_coords(e), x, y);
            let worst = l.iter().cloned().fold(f64::INFINITY, f64::min);
            if worst >= -tol {
                return Some((e, l));
            }
            if best.as_ref().map_or(true, |b| worst > b.2) {
                best = Some((e, l, worst));
            }
        }
        // Points on a curved boundary sit slightly outside the chord.
        let scale = self.characteristic_edge();
        best.and_then(|(e, l, worst)| {
            let c = self.element_coords(e);
            let h = ((c[1][0] - c[0][0]).powi(2) + (c[1][1] - c[0][1]).powi(2)).sqrt();
            (worst * h >= -0.05 * scale).then(|| {
                let clipped = l.map(|v| v.max(0.0));
                let s: f64 = clipped.iter().sum();
                (e, clipped.map(|v| v / s))
            })
        })
    }

    fn characteristic_edge(&self) -> f64 {
        (self.geometry.area() / self.elements.len().max(1) as f64).sqrt()
    }

    /// Returns a copy with every node shifted by `(dx, dy)`.
    pub fn translated(&self, dx: f64, dy: f64) -> Mesh {
        let mut m = self.clone();
        for n in &mut m.nodes {
            n.x += dx;
            n.y += dy;
        }
        m
    }
}

pub fn signed_area(nodes: &[Node], tri: &Tri3) -> f64 {
    let [a, b, c] = tri.nodes.map(|i| nodes[i]);
    0.5 * ((b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y))
}

pub fn barycentric(c: &[[f64; 2]; 3], x: f64, y: f64) -> [f64; 3] {
    let det = (c[1][0] - c[0][0]) * (c[2][1] - c[0][1]) - (c[2][0] - c[0][0]) * (c[1][1] - c[0][1]);
    let l1 = ((x - c[0][0]) * (c[2][1] - c[0][1]) - (c[2][0] - c[0][0]) * (y - c[0][1])) / det;
    let l2 = ((c[1][0] - c[0][0]) * (y - c[0][1]) - (x - c[0][0]) * (c[1][1] - c[0][1])) / det;
    [1.0 - l1 - l2, l1, l2]
}

/// Edges used by exactly one element, oriented as in that element.
fn find_boundary(elements: &[Tri3]) -> Vec<(usize, usize, usize)> {
    let mut count: HashMap<(usize, usize), (usize, usize, usize, u32)> = HashMap::new();
    for (e, t) in elements.iter().enumerate() {
        for k in 0..3 {
            let a = t.nodes[k];
            let b = t.nodes[(k + 1) % 3];
            let key = (a.min(b), a.max(b));
            let entry = count.entry(key).or_insert((a, b, e, 0));
            entry.3 += 1;
        }
    }
    let mut edges: Vec<_> = count
        .into_values()
        .filter(|v| v.3 == 1)
        .map(|(a, b, e, _)| (a, b, e))
        .collect();
    edges.sort_unstable_by_key(|&(a, b, e)| (e, a, b));
    edges
}

fn circle_segments(radius: f64, target_h: f64) -> usize {
    MIN_CIRCLE_SEGMENTS.max((2.0 * PI * radius / target_h).ceil() as usize)
}

/// Square plate of side `length` with a central hole of radius `radius`.
///
/// `target_h` sets the edge length on the hole; elements grow geometrically
/// towards the outer square, keeping a near-unit aspect ratio.
pub fn generate_plate_with_hole(length: f64, radius: f64, target_h: f64) -> Result<Mesh, MeshError> {
    generate_plate_with_hole_graded(length, radius, target_h, None)
}

/// Same as [`generate_plate_with_hole`] with an optional cap on the edge
/// length along the outer square.
pub fn generate_plate_with_hole_graded(
    length: f64,
    radius: f64,
    target_h: f64,
    far_h: Option<f64>,
) -> Result<Mesh, MeshError> {
    if !(radius > 0.0 && length > 0.0 && radius < 0.5 * length) {
        return Err(MeshError::InfeasibleGeometry(format!(
            "hole radius {radius} must satisfy 0 < r < L/2 = {}",
            0.5 * length
        )));
    }
    check_resolution(radius, target_h)?;
    let half = 0.5 * length;
    let n_circle = circle_segments(radius, target_h);
    let mut per_octant = n_circle.div_ceil(8).max(2);
    if let Some(far) = far_h {
        if !(far > 0.0) {
            return Err(MeshError::InfeasibleGeometry(format!("far-field edge size {far} must be positive")));
        }
        // Ray spacing on the square is widest at the corners, where it is
        // `2 * half * dθ`.
        per_octant = per_octant.max((0.5 * PI * half / far).ceil() as usize);
    }
    let n_rays = 8 * per_octant;

    // Geometric grading with ratio matched to the angular step gives square
    // cells in the polar region near the hole.
    let growth = 1.0 + 2.0 * PI / n_rays as f64;
    let first = 2.0 * PI * radius / n_rays as f64;
    let reach = half - radius;
    let n_layers = (((1.0 + reach * (growth - 1.0) / first).ln() / growth.ln()).ceil() as usize).max(1);
    let denom = growth.powi(n_layers as i32) - 1.0;
    let t: Vec<f64> = (0..=n_layers)
        .map(|k| (growth.powi(k as i32) - 1.0) / denom)
        .collect();

    let mut nodes = Vec::with_capacity(n_rays * (n_layers + 1));
    for &tk in &t {
        for j in 0..n_rays {
            let (s, c) = exact_sin_cos(j, n_rays);
            let inner = (radius * c, radius * s);
            let scale = half / c.abs().max(s.abs());
            let outer = (scale * c, scale * s);
            nodes.push(Node {
                x: inner.0 + tk * (outer.0 - inner.0),
                y: inner.1 + tk * (outer.1 - inner.1),
            });
        }
    }
    let id = |j: usize, k: usize| k * n_rays + (j % n_rays);
    let mut elements = Vec::with_capacity(2 * n_rays * n_layers);
    for k in 0..n_layers {
        for j in 0..n_rays {
            let a = id(j, k);
            let b = id(j + 1, k);
            let c = id(j + 1, k + 1);
            let d = id(j, k + 1);
            if (j / per_octant) % 2 == 0 {
                elements.push(Tri3 { nodes: [a, b, c] });
                elements.push(Tri3 { nodes: [a, c, d] });
            } else {
                elements.push(Tri3 { nodes: [a, b, d] });
                elements.push(Tri3 { nodes: [b, c, d] });
            }
        }
    }
    let tol = 1e-9 * length;
    Mesh::from_parts(
        nodes,
        elements,
        Geometry::PlateWithHole { length, radius },
        move |x, y| {
            if (x - half).abs() < tol {
                BoundaryTag::Right
            } else if (x + half).abs() < tol {
                BoundaryTag::Left
            } else if (y - half).abs() < tol {
                BoundaryTag::Top
            } else if (y + half).abs() < tol {
                BoundaryTag::Bottom
            } else {
                BoundaryTag::Hole
            }
        },
    )
}

/// Sine and cosine of `2πj/n`, exact at multiples of π/4 so that axis and
/// corner rays land exactly on the square.
fn exact_sin_cos(j: usize, n: usize) -> (f64, f64) {
    let j = j % n;
    if n % 8 == 0 {
        let q = n / 8;
        if j % q == 0 {
            let h = std::f64::consts::FRAC_1_SQRT_2;
            return [
                (0.0, 1.0),
                (h, h),
                (1.0, 0.0),
                (h, -h),
                (0.0, -1.0),
                (-h, -h),
                (-1.0, 0.0),
                (-h, h),
            ][j / q];
        }
    }
    (2.0 * PI * j as f64 / n as f64).sin_cos()
}

fn check_resolution(radius: f64, target_h: f64) -> Result<(), MeshError> {
    if !(target_h > 0.0) || target_h >= radius || 2.0 * PI * radius / target_h < 8.0 {
        return Err(MeshError::TooCoarse { target_h, radius });
    }
    Ok(())
}

/// Annulus `r_i <= r <= r_o`; `r_i = 0` produces a solid disk.
pub fn generate_annulus(inner_radius: f64, outer_radius: f64, target_h: f64) -> Result<Mesh, MeshError> {
    if !(inner_radius >= 0.0 && inner_radius < outer_radius) {
        return Err(MeshError::InfeasibleGeometry(format!(
            "radii must satisfy 0 <= r_i < r_o (got r_i = {inner_radius}, r_o = {outer_radius})"
        )));
    }
    check_resolution(outer_radius, target_h)?;
    let solid = inner_radius == 0.0;
    let span = outer_radius - inner_radius;
    let n_rings = ((span / target_h).ceil() as usize).max(1);
    let ring_count = |rho: f64, boundary: bool| {
        let min = if boundary { MIN_CIRCLE_SEGMENTS } else { 8 };
        let raw = (2.0 * PI * rho / target_h).ceil() as usize;
        4 * min.max(raw).div_ceil(4)
    };

    let mut nodes = Vec::new();
    let mut rings: Vec<(usize, usize)> = Vec::new(); // (first node id, count)
    if solid {
        nodes.push(Node { x: 0.0, y: 0.0 });
    }
    let first_ring = usize::from(solid);
    for k in first_ring..=n_rings {
        let rho = inner_radius + span * k as f64 / n_rings as f64;
        let boundary = k == n_rings || (k == 0 && !solid);
        let n = ring_count(rho, boundary);
        rings.push((nodes.len(), n));
        for i in 0..n {
            let (s, c) = exact_sin_cos(i, n);
            nodes.push(Node { x: rho * c, y: rho * s });
        }
    }

    let mut elements = Vec::new();
    if solid {
        let (start, n) = rings[0];
        for i in 0..n {
            elements.push(Tri3 {
                nodes: [0, start + i, start + (i + 1) % n],
            });
        }
    }
    for w in rings.windows(2) {
        stitch_rings(w[0], w[1], &mut elements);
    }
    let mid = if solid { 0.5 * outer_radius } else { 0.5 * (inner_radius + outer_radius) };
    Mesh::from_parts(
        nodes,
        elements,
        Geometry::Annulus {
            inner_radius,
            outer_radius,
        },
        move |x, y| {
            if (x * x + y * y).sqrt() < mid {
                BoundaryTag::Inner
            } else {
                BoundaryTag::Outer
            }
        },
    )
}

/// Triangulates the strip between two concentric rings by advancing along
/// whichever ring has the smaller next angle.
fn stitch_rings(inner: (usize, usize), outer: (usize, usize), out: &mut Vec<Tri3>) {
    let (a0, na) = inner;
    let (b0, nb) = outer;
    let (mut i, mut j) = (0usize, 0usize);
    while i < na || j < nb {
        let next_a = (i + 1) as f64 / na as f64;
        let next_b = (j + 1) as f64 / nb as f64;
        let advance_inner = j == nb || (i < na && next_a <= next_b);
        if advance_inner {
            out.push(Tri3 {
                nodes: [a0 + i % na, a0 + (i + 1) % na, b0 + j % nb],
            });
            i += 1;
        } else {
            out.push(Tri3 {
                nodes: [a0 + i % na, b0 + (j + 1) % nb, b0 + j % nb],
            });
            j += 1;
        }
    }
}

/// Structured `nx` by `ny` rectangle of triangles with its lower-left corner
/// at the origin.
pub fn generate_rectangle(width: f64, height: f64, nx: usize, ny: usize) -> Result<Mesh, MeshError> {
    if !(width > 0.0 && height > 0.0) || nx == 0 || ny == 0 {
        return Err(MeshError::InfeasibleGeometry(format!(
            "rectangle {width} x {height} with {nx} x {ny} cells"
        )));
    }
    let mut nodes = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            nodes.push(Node {
                x: width * i as f64 / nx as f64,
                y: height * j as f64 / ny as f64,
            });
        }
    }
    let id = |i: usize, j: usize| j * (nx + 1) + i;
    let mut elements = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let (a, b, c, d) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
            elements.push(Tri3 { nodes: [a, b, c] });
            elements.push(Tri3 { nodes: [a, c, d] });
        }
    }
    let tol = 1e-9 * width.max(height);
    Mesh::from_parts(nodes, elements, Geometry::Rectangle { width, height }, move |x, y| {
        if x.abs() < tol {
            BoundaryTag::Left
        } else if (x - width).abs() < tol {
            BoundaryTag::Right
        } else if y.abs() < tol {
            BoundaryTag::Bottom
        } else {
            BoundaryTag::Top
        }
    })
}

/// Mesh quality and topology summary produced by [`validate`].
#[derive(Debug, Clone, PartialEq)]
pub struct QualityReport {
    pub min_angle_deg: f64,
    pub max_aspect_ratio: f64,
    pub inverted: Vec<usize>,
    pub slivers: Vec<usize>,
    pub duplicate_nodes: Vec<(usize, usize)>,
    pub unreferenced_nodes: Vec<usize>,
    /// Boundary edges (single-element edges) missing from the tagged list.
    pub untagged_boundary_edges: usize,
    /// Tagged edges that do not lie on the boundary of exactly one element.
    pub bogus_boundary_edges: usize,
    pub euler_characteristic: i64,
    pub boundary_loops: usize,
}

impl QualityReport {
    pub fn violations(&self) -> usize {
        self.inverted.len()
            + self.slivers.len()
            + self.duplicate_nodes.len()
            + self.unreferenced_nodes.len()
            + self.untagged_boundary_edges
            + self.bogus_boundary_edges
    }

    pub fn is_ok(&self) -> bool {
        self.violations() == 0
    }
}

/// Inspects element quality, orientation and boundary topology.
pub fn validate(mesh: &Mesh) -> QualityReport {
    let nodes = mesh.nodes();
    let mut min_angle = f64::INFINITY;
    let mut max_aspect: f64 = 0.0;
    let mut inverted = Vec::new();
    let mut slivers = Vec::new();
    let mut referenced = vec![false; nodes.len()];
    for (e, tri) in mesh.elements().iter().enumerate() {
        for &n in &tri.nodes {
            if n < nodes.len() {
                referenced[n] = true;
            }
        }
        let area = signed_area(nodes, tri);
        if area <= 0.0 {
            inverted.push(e);
        }
        let p = tri.nodes.map(|n| nodes[n]);
        let len = |a: Node, b: Node| ((a.x - b.x).powi(2) + (a.y - b.y).powi(2)).sqrt();
        let l = [len(p[1], p[2]), len(p[2], p[0]), len(p[0], p[1])];
        let mut elem_min: f64 = 180.0;
        for k in 0..3 {
            let (a, b, c) = (l[k], l[(k + 1) % 3], l[(k + 2) % 3]);
            let cos = ((b * b + c * c - a * a) / (2.0 * b * c)).clamp(-1.0, 1.0);
            elem_min = elem_min.min(cos.acos().to_degrees());
        }
        min_angle = min_angle.min(elem_min);
        if elem_min < SLIVER_ANGLE_DEG {
            slivers.push(e);
        }
        let lmax = l.iter().cloned().fold(0.0, f64::max);
        let perimeter: f64 = l.iter().sum();
        let aspect = lmax * perimeter / (4.0 * 3f64.sqrt() * area.abs());
        max_aspect = max_aspect.max(aspect);
    }
    let unreferenced_nodes = referenced
        .iter()
        .enumerate()
        .filter(|(_, r)| !**r)
        .map(|(i, _)| i)
        .collect();

    let tol = DEDUP_TOLERANCE * mesh.geometry().characteristic_length();
    let mut order: Vec<usize> = (0..nodes.len()).collect();
    order.sort_by(|&a, &b| nodes[a].x.total_cmp(&nodes[b].x));
    let mut duplicate_nodes = Vec::new();
    for (p, &i) in order.iter().enumerate() {
        for &j in &order[p + 1..] {
            if nodes[j].x - nodes[i].x > tol {
                break;
            }
            if (nodes[j].y - nodes[i].y).abs() <= tol {
                duplicate_nodes.push((i.min(j), i.max(j)));
            }
        }
    }

    let mut edge_count: HashMap<(usize, usize), u32> = HashMap::new();
    for t in mesh.elements() {
        for k in 0..3 {
            let (a, b) = (t.nodes[k], t.nodes[(k + 1) % 3]);
            *edge_count.entry((a.min(b), a.max(b))).or_default() += 1;
        }
    }
    let mut tagged: HashMap<(usize, usize), u32> = HashMap::new();
    for b in mesh.boundary() {
        let [a, c] = b.nodes;
        *tagged.entry((a.min(c), a.max(c))).or_default() += 1;
    }
    let untagged_boundary_edges = edge_count
        .iter()
        .filter(|(k, &v)| v == 1 && !tagged.contains_key(k))
        .count();
    let bogus_boundary_edges = tagged
        .iter()
        .filter(|(k, &v)| v != 1 || edge_count.get(k) != Some(&1))
        .count();

    let v = referenced.iter().filter(|r| **r).count() as i64;
    let euler_characteristic = v - edge_count.len() as i64 + mesh.n_elements() as i64;
    let boundary_loops = count_loops(mesh.boundary());

    QualityReport {
        min_angle_deg: min_angle,
        max_aspect_ratio: max_aspect,
        inverted,
        slivers,
        duplicate_nodes,
        unreferenced_nodes,
        untagged_boundary_edges,
        bogus_boundary_edges,
        euler_characteristic,
        boundary_loops,
    }
}

fn count_loops(edges: &[BoundaryEdge]) -> usize {
    let mut parent: HashMap<usize, usize> = HashMap::new();
    fn find(parent: &mut HashMap<usize, usize>, x: usize) -> usize {
        let p = *parent.entry(x).or_insert(x);
        if p == x {
            x
        } else {
            let r = find(parent, p);
            parent.insert(x, r);
            r
        }
    }
    for e in edges {
        let ra = find(&mut parent, e.nodes[0]);
        let rb = find(&mut parent, e.nodes[1]);
        if ra != rb {
            parent.insert(ra, rb);
        }
    }
    let keys: Vec<usize> = parent.keys().copied().collect();
    let mut roots: Vec<usize> = keys.into_iter().map(|k| find(&mut parent, k)).collect();
    roots.sort_unstable();
    roots.dedup();
    roots.len()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plate_area_matches_square_minus_disk() {
        let m = generate_plate_with_hole(1.0, 0.05, 0.01).unwrap();
        let exact = 1.0 - PI * 0.05 * 0.05;
        assert!(((m.total_area() - exact) / exact).abs() < 5e-3);
        assert!((exact - 0.992146).abs() < 1e-6);
    }

    #[test]
    fn plate_rejects_oversized_hole() {
        assert!(matches!(
            generate_plate_with_hole(1.0, 0.6, 0.01),
            Err(MeshError::InfeasibleGeometry(_))
        ));
    }

    #[test]
    fn plate_rejects_coarse_target() {
        assert!(matches!(
            generate_plate_with_hole(1.0, 0.05, 0.06),
            Err(MeshError::TooCoarse { .. })
        ));
    }

    #[test]
    fn plate_chord_error_within_bound() {
        let (r, h) = (0.05, 0.01);
        let m = generate_plate_with_hole(1.0, r, h).unwrap();
        for e in m.edges_with_tag(BoundaryTag::Hole) {
            let [a, b] = e.nodes.map(|n| m.node(n));
            let mid = (0.5 * (a.x + b.x)).hypot(0.5 * (a.y + b.y));
            assert!(r - mid <= h * h / (8.0 * r) + 1e-15);
            let chord = (a.x - b.x).hypot(a.y - b.y);
            assert!(chord <= h + 1e-12);
        }
    }

    #[test]
    fn plate_mesh_is_clean() {
        let m = generate_plate_with_hole(1.0, 0.05, 0.02).unwrap();
        let q = validate(&m);
        assert!(q.is_ok(), "{q:?}");
        assert_eq!(q.euler_characteristic, 0);
        assert_eq!(q.boundary_loops, 2);
        for tag in [BoundaryTag::Left, BoundaryTag::Right, BoundaryTag::Top, BoundaryTag::Bottom, BoundaryTag::Hole] {
            assert!(m.has_tag(tag));
        }
    }

    #[test]
    fn plate_far_field_cap_refines_outer_square() {
        let m = generate_plate_with_hole_graded(1.0, 0.05, 0.01, Some(0.05)).unwrap();
        for e in m.edges_with_tag(BoundaryTag::Left) {
            let [a, b] = e.nodes.map(|n| m.node(n));
            assert!((a.x - b.x).hypot(a.y - b.y) <= 0.05 + 1e-12);
        }
        assert!(validate(&m).is_ok());
    }

    #[test]
    fn annulus_area_and_topology() {
        let m = generate_annulus(0.2, 1.0, 0.05).unwrap();
        let exact = PI * (1.0 - 0.04);
        assert!((exact - 3.0159).abs() < 1e-4);
        assert!(((m.total_area() - exact) / exact).abs() < 1e-2);
        let q = validate(&m);
        assert!(q.is_ok(), "{q:?}");
        assert_eq!(q.euler_characteristic, 0);
        assert!(m.has_tag(BoundaryTag::Inner));
    }

    #[test]
    fn solid_disk_has_no_inner_edges() {
        let m = generate_annulus(0.0, 1.0, 0.1).unwrap();
        assert_eq!(m.edges_with_tag(BoundaryTag::Inner).count(), 0);
        let q = validate(&m);
        assert!(q.is_ok(), "{q:?}");
        assert_eq!(q.euler_characteristic, 1);
        assert_eq!(q.boundary_loops, 1);
    }

    #[test]
    fn degenerate_annulus_is_rejected() {
        assert!(generate_annulus(1.0, 1.0, 0.05).is_err());
    }

    #[test]
    fn equilateral_triangle_min_angle() {
        let nodes = vec![
            Node { x: 0.0, y: 0.0 },
            Node { x: 1.0, y: 0.0 },
            Node { x: 0.5, y: 0.75f64.sqrt() },
        ];
        let m = Mesh::from_parts(
            nodes,
            vec![Tri3 { nodes: [0, 1, 2] }],
            Geometry::Rectangle { width: 1.0, height: 1.0 },
            |_, _| BoundaryTag::Bottom,
        )
        .unwrap();
        let q = validate(&m);
        assert!((q.min_angle_deg - 60.0).abs() < 1e-9);
        assert!((q.max_aspect_ratio - 1.0).abs() < 1e-9);
        assert!(q.is_ok());
    }

    #[test]
    fn reversed_element_is_flagged() {
        let m = generate_rectangle(1.0, 1.0, 2, 2).unwrap();
        let mut elements = m.elements().to_vec();
        elements[3].nodes.swap(0, 1);
        let bad = Mesh::from_raw(m.nodes().to_vec(), elements, m.boundary().to_vec(), *m.geometry());
        let q = validate(&bad);
        assert_eq!(q.inverted, vec![3]);
    }

    #[test]
    fn locate_reproduces_node_positions() {
        let m = generate_plate_with_hole(1.0, 0.1, 0.05).unwrap();
        let (e, l) = m.locate(-0.1, 0.0).unwrap();
        let c = m.element_coords(e);
        let x: f64 = (0..3).map(|k| l[k] * c[k][0]).sum();
        assert!((x + 0.1).abs() < 1e-9);
        assert!(m.locate(0.0, 0.0).is_none());
    }
}
