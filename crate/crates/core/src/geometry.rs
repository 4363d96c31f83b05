//! Interface extraction from P1 vector fields.
//!
//! Inside an element the field is affine, so every score `p_i . u(x)` is an
//! affine function of position and the region where phase `i` wins,
//!
//! ```text
//! R_i = { x in e : p_i . u(x) >= p_l . u(x) for all l != i },
//! ```
//!
//! is a convex polygon. It is obtained by clipping the triangle with the
//! half-planes `(p_i - p_l) . u(x) >= 0`. Polygon edges created by a clip are
//! tagged with the opposing phase; those edges are the interface segments.
//! Crossing points that lie on mesh edges are recomputed from the two edge
//! nodes in a canonical order so that neighbouring elements produce bitwise
//! identical points.

use std::collections::{BTreeMap, HashMap};

use crate::error::{invalid, Error, Result};
use crate::field::{PhaseLabels, VectorField};
use crate::mesh::{Point, TriMesh};
use crate::simplex::ReferenceFrame;

/// Where a polygon vertex sits in the mesh.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Locator {
    Node(usize),
    Edge(usize),
    Interior(usize),
}

/// Convex region of one phase inside an interface element.
#[derive(Debug, Clone, PartialEq)]
pub struct Polygon {
    pub phase: usize,
    pub vertices: Vec<Point>,
    /// Barycentric coordinates of the vertices with respect to the element.
    pub barycentric: Vec<[f64; 3]>,
    /// Phase across the edge leaving vertex `j`, `None` on element edges.
    pub edge_phase: Vec<Option<usize>>,
    pub locators: Vec<Locator>,
}

impl Polygon {
    pub fn area(&self) -> f64 {
        polygon_area(&self.vertices)
    }
}

/// Element whose nodes carry more than one label, with its phase polygons.
#[derive(Debug, Clone, PartialEq)]
pub struct InterfaceElement {
    pub element: usize,
    pub polygons: Vec<Polygon>,
}

/// Straight piece of the interface between phases `pair.0 < pair.1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub pair: (usize, usize),
    pub element: usize,
    pub start: Point,
    pub end: Point,
    pub start_loc: Locator,
    pub end_loc: Locator,
}

impl Segment {
    pub fn length(&self) -> f64 {
        dist(self.start, self.end)
    }
}

/// Element where three or more phases meet.
#[derive(Debug, Clone, PartialEq)]
pub struct Junction {
    pub element: usize,
    pub point: Point,
    /// The three phases whose pairwise zero lines define the point.
    pub phases: [usize; 3],
}

/// Sub-element description of all interfaces of a field.
#[derive(Debug, Clone, PartialEq)]
pub struct InterfaceGeometry {
    k: usize,
    elements: Vec<InterfaceElement>,
    element_slot: HashMap<usize, usize>,
    segments: Vec<Segment>,
    junctions: Vec<Junction>,
    areas: Vec<f64>,
    uniform_phase: Vec<Option<u16>>,
    degenerate_crossings: usize,
}

impl InterfaceGeometry {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn interface_elements(&self) -> &[InterfaceElement] {
        &self.elements
    }

    /// Polygons of element `e` when it is an interface element.
    pub fn element_polygons(&self, e: usize) -> Option<&[Polygon]> {
        self.element_slot.get(&e).map(|&s| self.elements[s].polygons.as_slice())
    }

    /// Phase owning the whole of element `e`, `None` for interface elements.
    pub fn uniform_phase(&self, e: usize) -> Option<usize> {
        self.uniform_phase[e].map(usize::from)
    }

    pub fn element_count(&self) -> usize {
        self.uniform_phase.len()
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn junctions(&self) -> &[Junction] {
        &self.junctions
    }

    pub fn areas(&self) -> &[f64] {
        &self.areas
    }

    /// Count of interface pieces whose defining function is flat in its element.
    pub fn degenerate_crossings(&self) -> usize {
        self.degenerate_crossings
    }

    /// Total interface length between phases `i` and `j` (any order).
    pub fn interface_length(&self, i: usize, j: usize) -> f64 {
        let pair = (i.min(j), i.max(j));
        self.segments.iter().filter(|s| s.pair == pair).map(Segment::length).sum()
    }

    pub fn total_length(&self) -> f64 {
        self.segments.iter().map(Segment::length).sum()
    }

    /// Crossing points keyed by their mesh location and phase pair.
    pub fn crossing_points(&self) -> HashMap<(Locator, (usize, usize)), Point> {
        let mut out = HashMap::new();
        for s in &self.segments {
            out.insert((s.start_loc, s.pair), s.start);
            out.insert((s.end_loc, s.pair), s.end);
        }
        out
    }

    /// Pairs `(i, j)` with at least one interface segment.
    pub fn pairs(&self) -> Vec<(usize, usize)> {
        let mut pairs: Vec<_> = self.segments.iter().map(|s| s.pair).collect();
        pairs.sort_unstable();
        pairs.dedup();
        pairs
    }

    /// Groups the segments of `pair` into connected chains (indices into `segments()`).
    pub fn chains(&self, pair: (usize, usize)) -> Vec<Vec<usize>> {
        segment_chains(&self.segments, pair)
    }

    /// Distinct segment endpoints of the given segments.
    pub fn chain_points(&self, chain: &[usize]) -> Vec<Point> {
        chain_points(&self.segments, chain)
    }
}

/// Connected groups of segments of one pair, as indices into `segments`.
pub fn segment_chains(segments: &[Segment], pair: (usize, usize)) -> Vec<Vec<usize>> {
    let pair = (pair.0.min(pair.1), pair.0.max(pair.1));
    let idx: Vec<usize> = (0..segments.len()).filter(|&s| segments[s].pair == pair).collect();
    let mut parent: Vec<usize> = (0..idx.len()).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    let mut seen: HashMap<Locator, usize> = HashMap::new();
    for (pos, &s) in idx.iter().enumerate() {
        for loc in [segments[s].start_loc, segments[s].end_loc] {
            match seen.get(&loc) {
                Some(&other) => {
                    let (a, b) = (find(&mut parent, pos), find(&mut parent, other));
                    parent[a] = b;
                }
                None => {
                    seen.insert(loc, pos);
                }
            }
        }
    }
    let mut groups: HashMap<usize, Vec<usize>> = HashMap::new();
    for pos in 0..idx.len() {
        let root = find(&mut parent, pos);
        groups.entry(root).or_default().push(idx[pos]);
    }
    let mut out: Vec<Vec<usize>> = groups.into_values().collect();
    out.sort_by_key(|g| g[0]);
    out
}

/// Distinct segment endpoints of the given segments.
pub fn chain_points(segments: &[Segment], chain: &[usize]) -> Vec<Point> {
    let mut seen = HashMap::new();
    for &s in chain {
        let seg = &segments[s];
        seen.entry(seg.start_loc).or_insert(seg.start);
        seen.entry(seg.end_loc).or_insert(seg.end);
    }
    let mut pts: Vec<Point> = seen.into_values().collect();
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    pts
}

pub(crate) fn dist(a: Point, b: Point) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// Shoelace area of a simple polygon (positive for counterclockwise order).
pub fn polygon_area(v: &[Point]) -> f64 {
    let n = v.len();
    if n < 3 {
        return 0.0;
    }
    let mut s = 0.0;
    for j in 0..n {
        let a = v[j];
        let b = v[(j + 1) % n];
        s += a[0] * b[1] - a[1] * b[0];
    }
    0.5 * s
}

#[derive(Clone, Copy)]
struct ClipVertex {
    bary: [f64; 3],
    mask: u8,
    leaving: Option<usize>,
    cut: Option<usize>,
}

fn node_mask(v: usize) -> u8 {
    (1 << v) | (1 << ((v + 2) % 3))
}

/// Scores `p_i . u` at the three nodes of an element, `scores[v][i]`.
fn element_scores(u: &VectorField, tri: [usize; 3]) -> Vec<Vec<f64>> {
    let k = u.frame().k();
    tri.iter().map(|&n| (0..k).map(|i| u.phase_score(i, n)).collect()).collect()
}

/// Clips the element into the region where phase `i` wins.
fn clip_region(scores: &[Vec<f64>], i: usize, k: usize) -> Vec<ClipVertex> {
    let mut poly: Vec<ClipVertex> = (0..3)
        .map(|v| {
            let mut bary = [0.0; 3];
            bary[v] = 1.0;
            ClipVertex {
                bary,
                mask: node_mask(v),
                leaving: None,
                cut: None,
            }
        })
        .collect();
    for l in 0..k {
        if l == i {
            continue;
        }
        let g: [f64; 3] = [
            scores[0][i] - scores[0][l],
            scores[1][i] - scores[1][l],
            scores[2][i] - scores[2][l],
        ];
        // lower indices win ties
        let inside = |val: f64| if l < i { val > 0.0 } else { val >= 0.0 };
        let eval = |b: &[f64; 3]| b[0] * g[0] + b[1] * g[1] + b[2] * g[2];
        if g.iter().all(|&x| inside(x)) {
            continue;
        }
        if g.iter().all(|&x| !inside(x)) {
            return Vec::new();
        }
        let n = poly.len();
        let vals: Vec<f64> = poly.iter().map(|p| eval(&p.bary)).collect();
        let mut out = Vec::with_capacity(n + 1);
        for j in 0..n {
            let a = poly[j];
            let b = poly[(j + 1) % n];
            let (ga, gb) = (vals[j], vals[(j + 1) % n]);
            let (ia, ib) = (inside(ga), inside(gb));
            if ia {
                out.push(a);
            }
            if ia != ib {
                let t = ga / (ga - gb);
                let mut bary = [0.0; 3];
                for c in 0..3 {
                    bary[c] = a.bary[c] + t * (b.bary[c] - a.bary[c]);
                }
                let mask = a.mask & b.mask;
                let leaving = if ia { Some(l) } else { a.leaving };
                out.push(ClipVertex {
                    bary,
                    mask,
                    leaving,
                    cut: Some(l),
                });
            }
        }
        poly = out;
        if poly.len() < 3 {
            return Vec::new();
        }
    }
    poly
}

/// Local edge index (0, 1, 2) encoded in a single-bit mask.
fn mask_edge(mask: u8) -> Option<usize> {
    match mask {
        1 => Some(0),
        2 => Some(1),
        4 => Some(2),
        _ => None,
    }
}

/// Builds the exact phase partition of every element and the interface segments.
pub fn extract_interfaces(mesh: &TriMesh, u: &VectorField) -> Result<InterfaceGeometry> {
    if !u.is_finite() {
        return Err(invalid("field contains non-finite values"));
    }
    if u.node_count() != mesh.node_count() {
        return Err(invalid("field and mesh sizes differ"));
    }
    let k = u.frame().k();
    let labels: Vec<usize> = (0..u.node_count()).map(|n| crate::field::winning_phase(u, n)).collect();
    let mut areas = vec![0.0; k];
    let mut uniform_phase = vec![None; mesh.element_count()];
    let mut elements = Vec::new();
    let mut element_slot = HashMap::new();
    let mut segments = Vec::new();
    let mut junctions = Vec::new();
    let mut degenerate = 0;

    for e in 0..mesh.element_count() {
        let tri = mesh.element(e);
        let (l0, l1, l2) = (labels[tri[0]], labels[tri[1]], labels[tri[2]]);
        let elem_area = mesh.element_data(e).area;
        if l0 == l1 && l1 == l2 {
            uniform_phase[e] = Some(l0 as u16);
            areas[l0] += elem_area;
            continue;
        }
        let scores = element_scores(u, tri);
        let corners = mesh.corners(e);
        let edges = mesh.element_edges(e);
        let mut polygons = Vec::new();
        for i in 0..k {
            let clip = clip_region(&scores, i, k);
            if clip.is_empty() {
                continue;
            }
            let poly = finish_polygon(mesh, e, tri, corners, edges, &scores, i, clip);
            if poly.vertices.len() < 3 || poly.area() <= 1e-15 * elem_area {
                continue;
            }
            polygons.push(poly);
        }
        // rescale roundoff so that the element is exactly partitioned
        let total: f64 = polygons.iter().map(Polygon::area).sum();
        for p in &polygons {
            areas[p.phase] += p.area() * elem_area / total;
        }
        let present: Vec<usize> = polygons.iter().map(|p| p.phase).collect();
        for p in &polygons {
            let n = p.vertices.len();
            for j in 0..n {
                if let Some(l) = p.edge_phase[j] {
                    // the lower phase records the segment unless its polygon vanished
                    if p.phase < l || !present.contains(&l) {
                        let seg = Segment {
                            pair: (p.phase.min(l), p.phase.max(l)),
                            element: e,
                            start: p.vertices[j],
                            end: p.vertices[(j + 1) % n],
                            start_loc: p.locators[j],
                            end_loc: p.locators[(j + 1) % n],
                        };
                        if seg.length() > 1e-14 * mesh.spacing() {
                            segments.push(seg);
                        }
                    }
                    if flat_pair(mesh, e, &scores, p.phase, l) {
                        degenerate += 1;
                    }
                }
            }
        }
        if polygons.len() >= 3 {
            let mut by_area: Vec<(f64, usize)> = polygons.iter().map(|p| (p.area(), p.phase)).collect();
            let mut nodal: Vec<usize> = vec![l0, l1, l2];
            nodal.sort_unstable();
            nodal.dedup();
            let phases = if nodal.len() == 3 {
                [nodal[0], nodal[1], nodal[2]]
            } else {
                by_area.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
                let mut top = [by_area[0].1, by_area[1].1, by_area[2].1];
                top.sort_unstable();
                top
            };
            junctions.push(Junction {
                element: e,
                point: junction_point(mesh, e, &scores, phases),
                phases,
            });
        }
        element_slot.insert(e, elements.len());
        elements.push(InterfaceElement { element: e, polygons });
    }

    Ok(InterfaceGeometry {
        k,
        elements,
        element_slot,
        segments,
        junctions,
        areas,
        uniform_phase,
        degenerate_crossings: degenerate,
    })
}

fn pair_gradient(mesh: &TriMesh, e: usize, scores: &[Vec<f64>], i: usize, l: usize) -> Point {
    let g = mesh.element_data(e).gradients;
    let mut out = [0.0; 2];
    for v in 0..3 {
        let d = scores[v][i] - scores[v][l];
        out[0] += g[v][0] * d;
        out[1] += g[v][1] * d;
    }
    out
}

fn flat_pair(mesh: &TriMesh, e: usize, scores: &[Vec<f64>], i: usize, l: usize) -> bool {
    let g = pair_gradient(mesh, e, scores, i, l);
    (g[0].hypot(g[1])) * mesh.spacing() < 1e-14
}

#[allow(clippy::too_many_arguments)]
fn finish_polygon(
    mesh: &TriMesh,
    e: usize,
    tri: [usize; 3],
    corners: [Point; 3],
    edges: [usize; 3],
    scores: &[Vec<f64>],
    phase: usize,
    clip: Vec<ClipVertex>,
) -> Polygon {
    let mut vertices = Vec::with_capacity(clip.len());
    let mut barycentric = Vec::with_capacity(clip.len());
    let mut edge_phase = Vec::with_capacity(clip.len());
    let mut locators = Vec::with_capacity(clip.len());
    for cv in &clip {
        let (bary, loc) = if let Some(v) = (0..3).find(|&v| cv.mask == node_mask(v)) {
            let mut b = [0.0; 3];
            b[v] = 1.0;
            (b, Locator::Node(tri[v]))
        } else if let Some(le) = mask_edge(cv.mask) {
            canonical_edge_point(tri, le, edges[le], scores, phase, cv)
        } else {
            (cv.bary, Locator::Interior(e))
        };
        let p = [
            bary[0] * corners[0][0] + bary[1] * corners[1][0] + bary[2] * corners[2][0],
            bary[0] * corners[0][1] + bary[1] * corners[1][1] + bary[2] * corners[2][1],
        ];
        // merge coincident consecutive vertices
        if let Some(&last) = vertices.last() {
            if dist(last, p) <= 1e-15 * mesh.spacing() {
                *edge_phase.last_mut().unwrap() = cv.leaving;
                continue;
            }
        }
        vertices.push(p);
        barycentric.push(bary);
        edge_phase.push(cv.leaving);
        locators.push(loc);
    }
    while vertices.len() > 1 && dist(vertices[0], *vertices.last().unwrap()) <= 1e-15 * mesh.spacing() {
        vertices.pop();
        barycentric.pop();
        edge_phase.pop();
        locators.pop();
    }
    Polygon {
        phase,
        vertices,
        barycentric,
        edge_phase,
        locators,
    }
}

/// Zero of the governing pairwise score difference along a mesh edge,
/// evaluated from the edge nodes in global index order.
fn canonical_edge_point(
    tri: [usize; 3],
    local_edge: usize,
    edge_id: usize,
    scores: &[Vec<f64>],
    phase: usize,
    cv: &ClipVertex,
) -> ([f64; 3], Locator) {
    let Some(l) = cv.cut else {
        return (cv.bary, Locator::Edge(edge_id));
    };
    let (va, vb) = (local_edge, (local_edge + 1) % 3);
    let (lo, hi) = if tri[va] < tri[vb] { (va, vb) } else { (vb, va) };
    let (p, q) = (phase.min(l), phase.max(l));
    let f_lo = scores[lo][p] - scores[lo][q];
    let f_hi = scores[hi][p] - scores[hi][q];
    if f_lo == f_hi {
        return (cv.bary, Locator::Edge(edge_id));
    }
    let t = (f_lo / (f_lo - f_hi)).clamp(0.0, 1.0);
    let mut bary = [0.0; 3];
    bary[lo] = 1.0 - t;
    bary[hi] = t;
    if t == 0.0 {
        (bary, Locator::Node(tri[lo]))
    } else if t == 1.0 {
        (bary, Locator::Node(tri[hi]))
    } else {
        (bary, Locator::Edge(edge_id))
    }
}

fn junction_point(mesh: &TriMesh, e: usize, scores: &[Vec<f64>], phases: [usize; 3]) -> Point {
    let corners = mesh.corners(e);
    let centroid = [
        (corners[0][0] + corners[1][0] + corners[2][0]) / 3.0,
        (corners[0][1] + corners[1][1] + corners[2][1]) / 3.0,
    ];
    let [a, b, c] = phases;
    let g1 = pair_gradient(mesh, e, scores, a, b);
    let g2 = pair_gradient(mesh, e, scores, a, c);
    let n1 = g1[0].hypot(g1[1]);
    let n2 = g2[0].hypot(g2[1]);
    let cross = g1[0] * g2[1] - g1[1] * g2[0];
    if n1 == 0.0 || n2 == 0.0 || (cross / (n1 * n2)).abs() < 1e-10 {
        return centroid;
    }
    // f(x) = f(x0) + g . (x - x0) with x0 = node 0
    let f1 = scores[0][a] - scores[0][b];
    let f2 = scores[0][a] - scores[0][c];
    let dx = (-f1 * g2[1] + f2 * g1[1]) / cross;
    let dy = (-g1[0] * f2 + g2[0] * f1) / cross;
    clamp_to_triangle([corners[0][0] + dx, corners[0][1] + dy], corners)
}

/// Closest point of the closed triangle to `p`.
fn clamp_to_triangle(p: Point, t: [Point; 3]) -> Point {
    let data = match crate::mesh::triangle_data(t) {
        Ok(d) => d,
        Err(_) => return p,
    };
    let bary: Vec<f64> = (0..3)
        .map(|v| {
            let w = t[(v + 1) % 3];
            let g = data.gradients[v];
            // phi_v vanishes at the other two corners
            g[0] * (p[0] - w[0]) + g[1] * (p[1] - w[1])
        })
        .collect();
    if bary.iter().all(|&b| b >= 0.0) {
        return p;
    }
    let mut best = t[0];
    let mut best_d = f64::INFINITY;
    for v in 0..3 {
        let a = t[v];
        let b = t[(v + 1) % 3];
        let ab = [b[0] - a[0], b[1] - a[1]];
        let len2 = ab[0] * ab[0] + ab[1] * ab[1];
        let s = (((p[0] - a[0]) * ab[0] + (p[1] - a[1]) * ab[1]) / len2).clamp(0.0, 1.0);
        let q = [a[0] + s * ab[0], a[1] + s * ab[1]];
        let d = dist(p, q);
        if d < best_d {
            best_d = d;
            best = q;
        }
    }
    best
}

/// Exact per-phase areas of the partition.
pub fn phase_areas(g: &InterfaceGeometry) -> Vec<f64> {
    g.areas().to_vec()
}

/// Scalar nodal fields `s_il`, keyed by ordered pair `(i, l)`, such that
/// `d meas(P_i) / dw = sum_l (p_i - p_l) s_il`.
///
/// Perturbing the field moves the boundary between `R_i` and `R_l` along its
/// normal by `(p_i - p_l) . du / |grad((p_i - p_l) . u)|`, so
/// `s_il[a] = integral_{R_i|R_l} phi_a / |grad f_il| dl`, evaluated exactly
/// since `phi_a` is linear along each segment.
///
/// Crossings where `|grad f_il|` vanishes on the element are skipped.
pub fn pair_area_fields(mesh: &TriMesh, u: &VectorField, g: &InterfaceGeometry) -> BTreeMap<(usize, usize), Vec<f64>> {
    let mut out: BTreeMap<(usize, usize), Vec<f64>> = BTreeMap::new();
    for ie in g.interface_elements() {
        let e = ie.element;
        let tri = mesh.element(e);
        let scores = element_scores(u, tri);
        for p in &ie.polygons {
            let i = p.phase;
            let n = p.vertices.len();
            for j in 0..n {
                let Some(l) = p.edge_phase[j] else { continue };
                let gr = pair_gradient(mesh, e, &scores, i, l);
                let gnorm = gr[0].hypot(gr[1]);
                if gnorm * mesh.spacing() < 1e-14 {
                    continue;
                }
                let len = dist(p.vertices[j], p.vertices[(j + 1) % n]);
                let (ba, bb) = (p.barycentric[j], p.barycentric[(j + 1) % n]);
                let s = out.entry((i, l)).or_insert_with(|| vec![0.0; mesh.node_count()]);
                for v in 0..3 {
                    s[tri[v]] += 0.5 * len * (ba[v] + bb[v]) / gnorm;
                }
            }
        }
    }
    out
}

/// `sum_i weights[i] * d meas(P_i) / dw`, one vector per field component.
pub fn weighted_area_gradient(
    mesh: &TriMesh,
    u: &VectorField,
    g: &InterfaceGeometry,
    weights: &[f64],
) -> Vec<Vec<f64>> {
    combine_pair_fields(u.frame(), &pair_area_fields(mesh, u, g), weights, mesh.node_count())
}

/// `sum_(i,l) weights[i] (p_i - p_l) s_il` for the given pair fields.
pub fn combine_pair_fields(
    frame: &ReferenceFrame,
    fields: &BTreeMap<(usize, usize), Vec<f64>>,
    weights: &[f64],
    nodes: usize,
) -> Vec<Vec<f64>> {
    let mut grad = vec![vec![0.0; nodes]; frame.dim()];
    for (&(i, l), s) in fields {
        if weights[i] == 0.0 {
            continue;
        }
        for (c, gc) in grad.iter_mut().enumerate() {
            let coef = weights[i] * (frame.vector(i)[c] - frame.vector(l)[c]);
            if coef != 0.0 {
                gc.iter_mut().zip(s).for_each(|(x, y)| *x += coef * y);
            }
        }
    }
    grad
}

/// Per-node derivative of `meas(P_i)`, one vector per field component.
pub fn area_gradient(mesh: &TriMesh, u: &VectorField, g: &InterfaceGeometry, phase: usize) -> Result<Vec<Vec<f64>>> {
    if phase >= u.frame().k() {
        return Err(invalid(format!("phase {phase} out of range")));
    }
    let mut w = vec![0.0; u.frame().k()];
    w[phase] = 1.0;
    Ok(weighted_area_gradient(mesh, u, g, &w))
}

/// Fitted circle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Circle {
    pub center: Point,
    pub radius: f64,
}

impl Circle {
    /// Largest `| |p - c| - r |` over the points.
    pub fn max_residual(&self, points: &[Point]) -> f64 {
        points
            .iter()
            .map(|&p| (dist(p, self.center) - self.radius).abs())
            .fold(0.0, f64::max)
    }
}

fn solve3(a: [[f64; 3]; 3], b: [f64; 3]) -> Option<[f64; 3]> {
    let mut m = [[0.0; 4]; 3];
    for r in 0..3 {
        m[r][..3].copy_from_slice(&a[r]);
        m[r][3] = b[r];
    }
    let scale = a.iter().flatten().fold(0.0_f64, |s, v| s.max(v.abs()));
    if scale == 0.0 {
        return None;
    }
    for col in 0..3 {
        let piv = (col..3).max_by(|&x, &y| m[x][col].abs().partial_cmp(&m[y][col].abs()).unwrap())?;
        if m[piv][col].abs() <= 1e-12 * scale {
            return None;
        }
        m.swap(col, piv);
        for r in 0..3 {
            if r != col {
                let f = m[r][col] / m[col][col];
                for c in col..4 {
                    m[r][c] -= f * m[col][c];
                }
            }
        }
    }
    Some([m[0][3] / m[0][0], m[1][3] / m[1][1], m[2][3] / m[2][2]])
}

/// Least-squares circle minimizing `sum ((x-a)^2 + (y-b)^2 - r^2)^2`.
///
/// The functional is linear in `(a, b, a^2 + b^2 - r^2)`, so the algebraic
/// (Kasa) fit solves it directly; one Gauss-Newton step in `(a, b, r)` then
/// polishes the roundoff.
pub fn fit_circle(points: &[Point]) -> Result<Circle> {
    if points.len() < 3 {
        return Err(Error::DegenerateFit(format!("need at least 3 points, got {}", points.len())));
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p[0]).sum::<f64>() / n;
    let my = points.iter().map(|p| p[1]).sum::<f64>() / n;
    let spread = points
        .iter()
        .map(|p| (p[0] - mx).abs().max((p[1] - my).abs()))
        .fold(0.0, f64::max);
    if spread == 0.0 {
        return Err(Error::DegenerateFit("all points coincide".into()));
    }
    // work in centred, scaled coordinates
    let q: Vec<Point> = points.iter().map(|p| [(p[0] - mx) / spread, (p[1] - my) / spread]).collect();
    let mut ata = [[0.0; 3]; 3];
    let mut atb = [0.0; 3];
    for p in &q {
        let row = [p[0], p[1], 1.0];
        let rhs = -(p[0] * p[0] + p[1] * p[1]);
        for r in 0..3 {
            for c in 0..3 {
                ata[r][c] += row[r] * row[c];
            }
            atb[r] += row[r] * rhs;
        }
    }
    let [d, e, f] = solve3(ata, atb).ok_or_else(|| Error::DegenerateFit("points are collinear".into()))?;
    let (mut a, mut b) = (-d / 2.0, -e / 2.0);
    let r2 = a * a + b * b - f;
    if r2 <= 0.0 {
        return Err(Error::DegenerateFit("no real circle fits the points".into()));
    }
    let mut r = r2.sqrt();
    if r > 1e8 {
        return Err(Error::DegenerateFit("points are collinear".into()));
    }
    // Gauss-Newton on the residuals (x-a)^2 + (y-b)^2 - r^2
    let mut jtj = [[0.0; 3]; 3];
    let mut jtr = [0.0; 3];
    for p in &q {
        let res = (p[0] - a).powi(2) + (p[1] - b).powi(2) - r * r;
        let jac = [-2.0 * (p[0] - a), -2.0 * (p[1] - b), -2.0 * r];
        for x in 0..3 {
            for y in 0..3 {
                jtj[x][y] += jac[x] * jac[y];
            }
            jtr[x] += jac[x] * res;
        }
    }
    if let Some(step) = solve3(jtj, jtr) {
        a -= step[0];
        b -= step[1];
        r -= step[2];
    }
    Ok(Circle {
        center: [mx + a * spread, my + b * spread],
        radius: r.abs() * spread,
    })
}

/// Number of endpoints per branch used for junction tangents.
pub const JUNCTION_FIT_POINTS: usize = 10;

/// Angles (degrees) between the three interface branches leaving a junction.
///
/// Each branch direction is the tangent, at the junction, of the circle fitted
/// to the `JUNCTION_FIT_POINTS` segment endpoints of that pair closest to the
/// junction, oriented away from it. Angles are returned in counterclockwise order of the branches and sum
/// to 360.
pub fn junction_angles(g: &InterfaceGeometry, junction: &Junction) -> Result<[f64; 3]> {
    junction_angles_with(g, junction.point, junction.phases, JUNCTION_FIT_POINTS)
}

/// As [`junction_angles`] with an explicit junction point and fit size.
pub fn junction_angles_with(g: &InterfaceGeometry, at: Point, phases: [usize; 3], n_fit: usize) -> Result<[f64; 3]> {
    let [a, b, c] = phases;
    let mut dirs = Vec::with_capacity(3);
    for pair in [(a, b), (a, c), (b, c)] {
        let pair = (pair.0.min(pair.1), pair.0.max(pair.1));
        let idx: Vec<usize> = (0..g.segments().len()).filter(|&s| g.segments()[s].pair == pair).collect();
        let mut pts = g.chain_points(&idx);
        pts.retain(|&p| dist(p, at) > 1e-12);
        pts.sort_by(|p, q| dist(*p, at).partial_cmp(&dist(*q, at)).unwrap());
        pts.truncate(n_fit);
        dirs.push(branch_direction(at, &pts).ok_or_else(|| {
            Error::InsufficientData(format!("branch {:?} has fewer than 2 points", (pair.0 + 1, pair.1 + 1)))
        })?);
    }
    Ok(angles_between(&dirs))
}

/// Unit direction in which the curve through `pts` leaves `at`.
///
/// Uses the tangent of the fitted circle at the point nearest `at`; falls back
/// to the principal axis when the points are too few or too straight for a
/// circle.
pub fn branch_direction(at: Point, pts: &[Point]) -> Option<Point> {
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p[0]).sum::<f64>() / n;
    let my = pts.iter().map(|p| p[1]).sum::<f64>() / n;
    let extent = pts.iter().map(|&p| dist(p, at)).fold(0.0, f64::max);
    let circle = if pts.len() >= 4 { fit_circle(pts).ok() } else { None };
    let mut d = match circle {
        Some(c) if c.radius < 1e3 * extent && dist(at, c.center) > 0.0 => {
            let r = [at[0] - c.center[0], at[1] - c.center[1]];
            [-r[1], r[0]]
        }
        _ => {
            let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
            for p in pts {
                let (dx, dy) = (p[0] - mx, p[1] - my);
                sxx += dx * dx;
                sxy += dx * dy;
                syy += dy * dy;
            }
            let theta = 0.5 * (2.0 * sxy).atan2(sxx - syy);
            [theta.cos(), theta.sin()]
        }
    };
    let norm = d[0].hypot(d[1]);
    d = [d[0] / norm, d[1] / norm];
    if (mx - at[0]) * d[0] + (my - at[1]) * d[1] < 0.0 {
        d = [-d[0], -d[1]];
    }
    Some(d)
}

/// Consecutive counterclockwise angles (degrees) between three directions.
pub fn angles_between(dirs: &[Point]) -> [f64; 3] {
    let mut polar: Vec<f64> = dirs.iter().map(|d| d[1].atan2(d[0]).to_degrees()).collect();
    polar.sort_by(|a, b| a.partial_cmp(b).unwrap());
    [
        polar[1] - polar[0],
        polar[2] - polar[1],
        360.0 - (polar[2] - polar[0]),
    ]
}

/// Connected components of the nodes labelled `phase` (mesh-edge adjacency).
pub fn phase_components(mesh: &TriMesh, labels: &PhaseLabels, phase: usize) -> usize {
    let n = mesh.node_count();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for id in 0..mesh.edge_count() {
        let [a, b] = mesh.edge(id);
        if labels.get(a) == phase && labels.get(b) == phase {
            let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
            parent[ra] = rb;
        }
    }
    let mut roots: Vec<usize> = (0..n).filter(|&x| labels.get(x) == phase).map(|x| find(&mut parent, x)).collect();
    roots.sort_unstable();
    roots.dedup();
    roots.len()
}
