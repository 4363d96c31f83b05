//! Triangulated planar domains and P1 finite-element data.
//!
//! The mesh owns the consistent mass matrix `M` and stiffness matrix `S`
//! assembled with homogeneous Neumann conditions, i.e. no boundary terms.

use std::collections::HashMap;
use std::fmt::Write as _;

use crate::error::{invalid, Error, Result};
use crate::linalg::CsrMatrix;

pub type Point = [f64; 2];

/// Axis-aligned rectangle `[x0, x1] x [y0, y1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub min: Point,
    pub max: Point,
}

impl Rect {
    pub fn new(min: Point, max: Point) -> Self {
        Self { min, max }
    }

    pub fn unit() -> Self {
        Self::new([0.0, 0.0], [1.0, 1.0])
    }

    pub fn area(&self) -> f64 {
        (self.max[0] - self.min[0]) * (self.max[1] - self.min[1])
    }
}

/// Area and constant basis-function gradients of one triangle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElementData {
    pub area: f64,
    pub gradients: [Point; 3],
}

/// A triangulated domain with P1 element data.
#[derive(Debug, Clone)]
pub struct TriMesh {
    nodes: Vec<Point>,
    elements: Vec<[usize; 3]>,
    element_data: Vec<ElementData>,
    /// Global edge ids of the local edges `(n0,n1)`, `(n1,n2)`, `(n2,n0)`.
    element_edges: Vec<[usize; 3]>,
    edges: Vec<[usize; 2]>,
    boundary_nodes: Vec<usize>,
    mass: CsrMatrix,
    stiffness: CsrMatrix,
    spacing: f64,
}

/// Area and basis gradients of the triangle with the given corners.
pub fn triangle_data(p: [Point; 3]) -> Result<ElementData> {
    let [a, b, c] = p;
    let det = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]);
    if det <= 0.0 || !det.is_finite() {
        return Err(Error::MeshIntegrity(format!(
            "degenerate or clockwise element with signed double area {det:e}"
        )));
    }
    let g = |(y1, y2, x1, x2): (f64, f64, f64, f64)| [(y1 - y2) / det, (x2 - x1) / det];
    Ok(ElementData {
        area: 0.5 * det,
        gradients: [
            g((b[1], c[1], b[0], c[0])),
            g((c[1], a[1], c[0], a[0])),
            g((a[1], b[1], a[0], b[0])),
        ],
    })
}

impl TriMesh {
    /// Builds a mesh from node coordinates and counterclockwise elements.
    pub fn from_parts(nodes: Vec<Point>, elements: Vec<[usize; 3]>) -> Result<Self> {
        if elements.is_empty() {
            return Err(invalid("mesh has no elements"));
        }
        let mut element_data = Vec::with_capacity(elements.len());
        for (e, tri) in elements.iter().enumerate() {
            if tri.iter().any(|&n| n >= nodes.len()) {
                return Err(Error::MeshIntegrity(format!("element {e} references a missing node")));
            }
            let data = triangle_data([nodes[tri[0]], nodes[tri[1]], nodes[tri[2]]])
                .map_err(|err| Error::MeshIntegrity(format!("element {e}: {err}")))?;
            element_data.push(data);
        }

        let mut edge_ids: HashMap<[usize; 2], usize> = HashMap::new();
        let mut edges = Vec::new();
        let mut edge_count: Vec<usize> = Vec::new();
        let mut element_edges = Vec::with_capacity(elements.len());
        for tri in &elements {
            let mut ids = [0; 3];
            for l in 0..3 {
                let (a, b) = (tri[l], tri[(l + 1) % 3]);
                let key = [a.min(b), a.max(b)];
                let id = *edge_ids.entry(key).or_insert_with(|| {
                    edges.push(key);
                    edge_count.push(0);
                    edges.len() - 1
                });
                edge_count[id] += 1;
                ids[l] = id;
            }
            element_edges.push(ids);
        }
        if let Some(id) = edge_count.iter().position(|&c| c > 2) {
            return Err(Error::MeshIntegrity(format!(
                "edge {:?} is shared by more than two elements",
                edges[id]
            )));
        }
        let mut on_boundary = vec![false; nodes.len()];
        for (id, &c) in edge_count.iter().enumerate() {
            if c == 1 {
                on_boundary[edges[id][0]] = true;
                on_boundary[edges[id][1]] = true;
            }
        }
        let boundary_nodes = (0..nodes.len()).filter(|&n| on_boundary[n]).collect();

        let n = nodes.len();
        let mut mass_t = Vec::with_capacity(9 * elements.len());
        let mut stiff_t = Vec::with_capacity(9 * elements.len());
        for (tri, data) in elements.iter().zip(&element_data) {
            for a in 0..3 {
                for b in 0..3 {
                    let m = if a == b { data.area / 6.0 } else { data.area / 12.0 };
                    let ga = data.gradients[a];
                    let gb = data.gradients[b];
                    mass_t.push((tri[a], tri[b], m));
                    stiff_t.push((tri[a], tri[b], data.area * (ga[0] * gb[0] + ga[1] * gb[1])));
                }
            }
        }
        let mass = CsrMatrix::from_triplets(n, mass_t);
        let stiffness = CsrMatrix::from_triplets(n, stiff_t);

        let spacing = {
            let mean_area = element_data.iter().map(|d| d.area).sum::<f64>() / elements.len() as f64;
            (2.0 * mean_area).sqrt()
        };

        Ok(Self {
            nodes,
            elements,
            element_data,
            element_edges,
            edges,
            boundary_nodes,
            mass,
            stiffness,
            spacing,
        })
    }

    pub fn nodes(&self) -> &[Point] {
        &self.nodes
    }

    pub fn node(&self, n: usize) -> Point {
        self.nodes[n]
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn elements(&self) -> &[[usize; 3]] {
        &self.elements
    }

    pub fn element_count(&self) -> usize {
        self.elements.len()
    }

    pub fn element(&self, e: usize) -> [usize; 3] {
        self.elements[e]
    }

    pub fn element_data(&self, e: usize) -> &ElementData {
        &self.element_data[e]
    }

    pub fn element_edges(&self, e: usize) -> [usize; 3] {
        self.element_edges[e]
    }

    pub fn edge(&self, id: usize) -> [usize; 2] {
        self.edges[id]
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn boundary_nodes(&self) -> &[usize] {
        &self.boundary_nodes
    }

    pub fn mass(&self) -> &CsrMatrix {
        &self.mass
    }

    pub fn stiffness(&self) -> &CsrMatrix {
        &self.stiffness
    }

    /// Typical element diameter, `sqrt(2 * mean element area)`; the grid
    /// spacing for structured meshes.
    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn area(&self) -> f64 {
        self.element_data.iter().map(|d| d.area).sum()
    }

    /// Corner coordinates of element `e`.
    pub fn corners(&self, e: usize) -> [Point; 3] {
        let t = self.elements[e];
        [self.nodes[t[0]], self.nodes[t[1]], self.nodes[t[2]]]
    }

    /// Constant gradient of the P1 interpolant of `values` on element `e`.
    pub fn element_gradient(&self, e: usize, values: &[f64]) -> Point {
        let t = self.elements[e];
        let g = &self.element_data[e].gradients;
        let mut out = [0.0; 2];
        for l in 0..3 {
            out[0] += g[l][0] * values[t[l]];
            out[1] += g[l][1] * values[t[l]];
        }
        out
    }

    /// `integral of u` for a P1 nodal field, i.e. `1^T M u`.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        self.elements
            .iter()
            .zip(&self.element_data)
            .map(|(t, d)| d.area * (values[t[0]] + values[t[1]] + values[t[2]]) / 3.0)
            .sum()
    }

    /// Plain-text listing, one node or element per line.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for (i, p) in self.nodes.iter().enumerate() {
            let _ = writeln!(out, "node {i} {} {}", p[0], p[1]);
        }
        for (e, t) in self.elements.iter().enumerate() {
            let _ = writeln!(out, "element {e} {} {} {}", t[0], t[1], t[2]);
        }
        out
    }
}

/// Structured triangulation of `domain` with an `nx x ny` node grid.
///
/// Every grid cell is split along its lower-left to upper-right diagonal.
pub fn build_structured_mesh(nx: usize, ny: usize, domain: Rect) -> Result<TriMesh> {
    if nx < 2 || ny < 2 {
        return Err(invalid(format!("structured mesh needs at least 2x2 nodes, got {nx}x{ny}")));
    }
    let dx = (domain.max[0] - domain.min[0]) / (nx - 1) as f64;
    let dy = (domain.max[1] - domain.min[1]) / (ny - 1) as f64;
    let mut nodes = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let x = if i == nx - 1 { domain.max[0] } else { domain.min[0] + i as f64 * dx };
            let y = if j == ny - 1 { domain.max[1] } else { domain.min[1] + j as f64 * dy };
            nodes.push([x, y]);
        }
    }
    let id = |i: usize, j: usize| j * nx + i;
    let mut elements = Vec::with_capacity(2 * (nx - 1) * (ny - 1));
    for j in 0..ny - 1 {
        for i in 0..nx - 1 {
            let (a, b, c, d) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
            elements.push([a, b, c]);
            elements.push([a, c, d]);
        }
    }
    let mut mesh = TriMesh::from_parts(nodes, elements)?;
    mesh.spacing = dx.max(dy);
    Ok(mesh)
}

/// Mesh with `cells x cells` grid cells on the unit square.
pub fn unit_square(cells: usize) -> Result<TriMesh> {
    build_structured_mesh(cells + 1, cells + 1, Rect::unit())
}

/// Area and basis gradients of element `e`.
pub fn p1_element_quantities(mesh: &TriMesh, e: usize) -> Result<ElementData> {
    if e >= mesh.element_count() {
        return Err(invalid(format!("element index {e} out of range")));
    }
    Ok(*mesh.element_data(e))
}
