//! Vector-valued nodal fields, phase labels and thresholding.

use crate::error::{invalid, Result};
use crate::mesh::{Point, Rect, TriMesh};
use crate::simplex::ReferenceFrame;

/// Nodal values of `u: Omega -> R^{k-1}`, stored component by component.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    frame: ReferenceFrame,
    components: Vec<Vec<f64>>,
}

impl VectorField {
    pub fn new(frame: ReferenceFrame, components: Vec<Vec<f64>>) -> Result<Self> {
        if components.len() != frame.dim() {
            return Err(invalid(format!(
                "expected {} components, got {}",
                frame.dim(),
                components.len()
            )));
        }
        let n = components[0].len();
        if components.iter().any(|c| c.len() != n) {
            return Err(invalid("components have different lengths"));
        }
        if components.iter().flatten().any(|v| !v.is_finite()) {
            return Err(invalid("field values must be finite"));
        }
        Ok(Self { frame, components })
    }

    pub fn zeros(frame: ReferenceFrame, nodes: usize) -> Self {
        let components = vec![vec![0.0; nodes]; frame.dim()];
        Self { frame, components }
    }

    pub fn frame(&self) -> &ReferenceFrame {
        &self.frame
    }

    pub fn node_count(&self) -> usize {
        self.components[0].len()
    }

    pub fn components(&self) -> &[Vec<f64>] {
        &self.components
    }

    pub fn components_mut(&mut self) -> &mut [Vec<f64>] {
        &mut self.components
    }

    pub fn into_components(self) -> Vec<Vec<f64>> {
        self.components
    }

    pub fn value(&self, n: usize) -> Vec<f64> {
        self.components.iter().map(|c| c[n]).collect()
    }

    /// `p_i . u(x_n)`
    pub fn phase_score(&self, i: usize, n: usize) -> f64 {
        self.frame
            .vector(i)
            .iter()
            .zip(&self.components)
            .map(|(p, c)| p * c[n])
            .sum()
    }

    pub fn is_finite(&self) -> bool {
        self.components.iter().flatten().all(|v| v.is_finite())
    }

    /// `a * self + b * other`
    pub fn combine(&self, a: f64, other: &VectorField, b: f64) -> VectorField {
        let components = self
            .components
            .iter()
            .zip(&other.components)
            .map(|(x, y)| x.iter().zip(y).map(|(x, y)| a * x + b * y).collect())
            .collect();
        VectorField {
            frame: self.frame.clone(),
            components,
        }
    }

    pub fn max_abs_diff(&self, other: &VectorField) -> f64 {
        self.components
            .iter()
            .zip(&other.components)
            .flat_map(|(x, y)| x.iter().zip(y).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max)
    }
}

/// Per-node phase index (0-based).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PhaseLabels {
    k: usize,
    labels: Vec<u16>,
}

impl PhaseLabels {
    pub fn new(k: usize, labels: Vec<usize>) -> Result<Self> {
        if let Some(&bad) = labels.iter().find(|&&l| l >= k) {
            return Err(invalid(format!("label {bad} out of range for k = {k}")));
        }
        Ok(Self {
            k,
            labels: labels.into_iter().map(|l| l as u16).collect(),
        })
    }

    pub fn uniform(k: usize, phase: usize, nodes: usize) -> Self {
        Self {
            k,
            labels: vec![phase as u16; nodes],
        }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn get(&self, n: usize) -> usize {
        self.labels[n] as usize
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.labels.iter().map(|&l| l as usize)
    }

    pub fn count(&self, phase: usize) -> usize {
        self.labels.iter().filter(|&&l| l as usize == phase).count()
    }

    /// Number of nodes whose labels differ.
    pub fn hamming(&self, other: &PhaseLabels) -> usize {
        self.labels.iter().zip(&other.labels).filter(|(a, b)| a != b).count()
    }
}

/// Planar region used to lay out initial phases.
#[derive(Debug, Clone, PartialEq)]
pub enum Shape {
    Disk { center: Point, radius: f64 },
    Ellipse { center: Point, semi_axes: [f64; 2] },
    Rect(Rect),
    /// Points `x` with `(x - point) . normal >= 0`.
    HalfPlane { point: Point, normal: Point },
    Everywhere,
}

impl Shape {
    pub fn contains(&self, p: Point) -> bool {
        match *self {
            Shape::Disk { center, radius } => {
                (p[0] - center[0]).powi(2) + (p[1] - center[1]).powi(2) <= radius * radius
            }
            Shape::Ellipse { center, semi_axes } => {
                ((p[0] - center[0]) / semi_axes[0]).powi(2) + ((p[1] - center[1]) / semi_axes[1]).powi(2)
                    <= 1.0
            }
            Shape::Rect(r) => p[0] >= r.min[0] && p[0] <= r.max[0] && p[1] >= r.min[1] && p[1] <= r.max[1],
            Shape::HalfPlane { point, normal } => {
                (p[0] - point[0]) * normal[0] + (p[1] - point[1]) * normal[1] >= 0.0
            }
            Shape::Everywhere => true,
        }
    }
}

/// A shape assigned to a phase (0-based).
#[derive(Debug, Clone, PartialEq)]
pub struct Region {
    pub phase: usize,
    pub shape: Shape,
}

impl Region {
    pub fn new(phase: usize, shape: Shape) -> Self {
        Self { phase, shape }
    }
}

/// Labels every node with the phase of the first region containing it.
///
/// The last region is expected to be the background and to cover the domain.
pub fn assign_initial_phases(mesh: &TriMesh, k: usize, regions: &[Region]) -> Result<PhaseLabels> {
    if regions.is_empty() {
        return Err(invalid("at least one region (the background) is required"));
    }
    if let Some(r) = regions.iter().find(|r| r.phase >= k) {
        return Err(invalid(format!("region phase {} out of range for k = {k}", r.phase)));
    }
    let labels = mesh
        .nodes()
        .iter()
        .map(|&p| {
            regions
                .iter()
                .find(|r| r.shape.contains(p))
                .map(|r| r.phase)
                .ok_or_else(|| invalid(format!("node at ({}, {}) is not covered by any region", p[0], p[1])))
        })
        .collect::<Result<Vec<_>>>()?;
    PhaseLabels::new(k, labels)
}

/// Field taking the value `p_{label}` at every node.
pub fn labels_to_field(labels: &PhaseLabels, frame: &ReferenceFrame) -> VectorField {
    let components = (0..frame.dim())
        .map(|c| labels.iter().map(|l| frame.vector(l)[c]).collect())
        .collect();
    VectorField {
        frame: frame.clone(),
        components,
    }
}

/// Index of the largest `p_i . u` at node `n`; the smallest index wins ties.
pub fn winning_phase(u: &VectorField, n: usize) -> usize {
    let mut best = 0;
    let mut best_score = u.phase_score(0, n);
    for i in 1..u.frame().k() {
        let s = u.phase_score(i, n);
        if s > best_score {
            best = i;
            best_score = s;
        }
    }
    best
}

/// Nodal thresholding to the closest reference vector.
pub fn threshold(u: &VectorField) -> PhaseLabels {
    PhaseLabels {
        k: u.frame().k(),
        labels: (0..u.node_count()).map(|n| winning_phase(u, n) as u16).collect(),
    }
}

/// `w_i = (k-1)/k (u . p_i + 1/(k-1))`, the scalar indicator equivalent of phase `i`.
pub fn scalar_equivalents(u: &VectorField, i: usize) -> Result<Vec<f64>> {
    let k = u.frame().k();
    if i >= k {
        return Err(invalid(format!("phase {i} out of range for k = {k}")));
    }
    let kf = k as f64;
    Ok((0..u.node_count())
        .map(|n| (kf - 1.0) / kf * (u.phase_score(i, n) + 1.0 / (kf - 1.0)))
        .collect())
}

/// Nodal values of `u . p_ij` with `p_ij = (p_i - p_j)/|p_i - p_j|`.
pub fn project_pair(u: &VectorField, i: usize, j: usize) -> Result<Vec<f64>> {
    let dir = u.frame().pair_direction(i, j)?;
    Ok((0..u.node_count())
        .map(|n| dir.iter().zip(u.components()).map(|(d, c)| d * c[n]).sum())
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::unit_square;
    use crate::simplex::reference_vectors;

    #[test]
    fn disk_labels_match_area() {
        let mesh = unit_square(40).unwrap();
        let regions = [
            Region::new(0, Shape::Disk { center: [0.5, 0.5], radius: 0.35 }),
            Region::new(1, Shape::Everywhere),
        ];
        let labels = assign_initial_phases(&mesh, 2, &regions).unwrap();
        let frac = labels.count(0) as f64 / labels.len() as f64;
        let exact = std::f64::consts::PI * 0.35 * 0.35;
        // one layer of cells around the circle
        let slack = 2.0 * std::f64::consts::PI * 0.35 * mesh.spacing();
        assert!((frac - exact).abs() < slack, "{frac} vs {exact}");
    }

    #[test]
    fn background_only_and_precedence() {
        let mesh = unit_square(4).unwrap();
        let labels = assign_initial_phases(&mesh, 3, &[Region::new(2, Shape::Everywhere)]).unwrap();
        assert_eq!(labels.count(2), mesh.node_count());
        let regions = [
            Region::new(0, Shape::Rect(Rect::new([0.0, 0.0], [0.6, 1.0]))),
            Region::new(1, Shape::Rect(Rect::new([0.4, 0.0], [1.0, 1.0]))),
            Region::new(2, Shape::Everywhere),
        ];
        let labels = assign_initial_phases(&mesh, 3, &regions).unwrap();
        // x = 0.5 lies in both rectangles: the first one wins
        let n = mesh.nodes().iter().position(|p| p[0] == 0.5).unwrap();
        assert_eq!(labels.get(n), 0);
        assert!(assign_initial_phases(&mesh, 3, &[]).is_err());
        let uncovered = [Region::new(0, Shape::Disk { center: [0.0, 0.0], radius: 0.1 })];
        assert!(assign_initial_phases(&mesh, 3, &uncovered).is_err());
    }

    #[test]
    fn field_round_trip() {
        let frame = reference_vectors(3).unwrap();
        let labels = PhaseLabels::new(3, vec![0, 1, 2, 2, 1, 0]).unwrap();
        let u = labels_to_field(&labels, &frame);
        assert_eq!(threshold(&u), labels);
        let all_one = labels_to_field(&PhaseLabels::uniform(3, 0, 4), &frame);
        assert!(all_one.components()[0].iter().all(|&v| (v - 1.0).abs() < 1e-15));
        assert!(all_one.components()[1].iter().all(|&v| v.abs() < 1e-15));
    }

    #[test]
    fn threshold_ties_and_examples() {
        let f2 = reference_vectors(2).unwrap();
        let u = VectorField::new(f2, vec![vec![0.0, 0.3, -0.2]]).unwrap();
        assert_eq!(threshold(&u).iter().collect::<Vec<_>>(), vec![0, 0, 1]);
        let f3 = reference_vectors(3).unwrap();
        let u = VectorField::new(f3.clone(), vec![vec![0.9], vec![0.1]]).unwrap();
        assert!((u.phase_score(1, 0) + 0.363_397_459_621_556_1).abs() < 1e-12);
        assert!((u.phase_score(2, 0) + 0.536_602_540_378_443_9).abs() < 1e-12);
        assert_eq!(threshold(&u).get(0), 0);
    }

    #[test]
    fn scalar_equivalents_are_indicators() {
        let frame = reference_vectors(4).unwrap();
        let labels = PhaseLabels::new(4, vec![0, 1, 2, 3, 3]).unwrap();
        let u = labels_to_field(&labels, &frame);
        for i in 0..4 {
            let w = scalar_equivalents(&u, i).unwrap();
            for (n, l) in labels.iter().enumerate() {
                let want = if l == i { 1.0 } else { 0.0 };
                assert!((w[n] - want).abs() < 1e-14);
            }
        }
        let v = VectorField::new(frame, vec![vec![0.3, -2.0], vec![0.1, 0.7], vec![-0.4, 5.0]]).unwrap();
        for n in 0..2 {
            let s: f64 = (0..4).map(|i| scalar_equivalents(&v, i).unwrap()[n]).sum();
            assert!((s - 1.0).abs() < 1e-13);
        }
        assert!(scalar_equivalents(&v, 4).is_err());
    }

    #[test]
    fn pair_projection() {
        let f2 = reference_vectors(2).unwrap();
        let u = VectorField::new(f2, vec![vec![1.0, 0.0]]).unwrap();
        assert_eq!(project_pair(&u, 0, 1).unwrap(), vec![1.0, 0.0]);
        let f3 = reference_vectors(3).unwrap();
        let mid: Vec<f64> = (0..2).map(|c| 0.5 * (f3.vector(0)[c] + f3.vector(2)[c])).collect();
        let u = VectorField::new(f3, vec![vec![1.0, mid[0]], vec![0.0, mid[1]]]).unwrap();
        let u12 = project_pair(&u, 0, 1).unwrap();
        assert!((u12[0] - 3f64.sqrt() / 2.0).abs() < 1e-14);
        assert!(project_pair(&u, 0, 2).unwrap()[1].abs() < 1e-14);
        assert!(project_pair(&u, 1, 0).is_err());
    }

    #[test]
    fn non_finite_values_rejected() {
        let f2 = reference_vectors(2).unwrap();
        assert!(VectorField::new(f2, vec![vec![f64::NAN]]).is_err());
    }
}
