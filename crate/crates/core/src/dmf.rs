//! Discrete Morse flow: successive minimization of
//!
//! ```text
//! F_n(w) = integral |w - w_{n-1}|^2 / 2h + |grad w|^2 / 2  dx  + penalty(areas of w)
//! ```
//!
//! with P1 elements. The quadratic part has Hessian `H = (M + hS) / h`; it is
//! minimized exactly by a linear solve, which also serves as warm start and
//! preconditioner for gradient descent on the penalized functional.

use std::collections::BTreeMap;

use crate::error::{invalid, Result};
use crate::field::VectorField;
use crate::geometry::{combine_pair_fields, extract_interfaces, pair_area_fields, InterfaceGeometry};
use crate::linalg::{conjugate_gradient, dot, solve_dense, BandedCholesky, CsrMatrix};
use crate::mesh::TriMesh;

/// Penalty applied to the area deficit of each constrained phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PenaltyForm {
    /// `(1/eps) (A - meas)^2`
    #[default]
    Quadratic,
    /// `P(s) = -s/eps` for `s <= 0`, `-eps s` for `s > 0`, with `s = meas - A`
    PiecewiseLinear,
    /// `|A - meas| / eps`
    Absolute,
}

impl PenaltyForm {
    fn value(self, eps: f64, target: f64, meas: f64) -> f64 {
        let s = meas - target;
        match self {
            PenaltyForm::Quadratic => s * s / eps,
            PenaltyForm::PiecewiseLinear => {
                if s <= 0.0 {
                    -s / eps
                } else {
                    -eps * s
                }
            }
            PenaltyForm::Absolute => s.abs() / eps,
        }
    }

    /// Derivative with respect to the measured area.
    fn slope(self, eps: f64, target: f64, meas: f64) -> f64 {
        let s = meas - target;
        match self {
            PenaltyForm::Quadratic => 2.0 * s / eps,
            PenaltyForm::PiecewiseLinear => {
                if s <= 0.0 {
                    -1.0 / eps
                } else {
                    -eps
                }
            }
            PenaltyForm::Absolute => {
                if s == 0.0 {
                    0.0
                } else {
                    s.signum() / eps
                }
            }
        }
    }
}

/// Parameters of the inner minimizations of one outer step.
#[derive(Debug, Clone, PartialEq)]
pub struct DmfParams {
    /// Inner time step `dt / K`.
    pub h: f64,
    /// Inner steps per outer step.
    pub k_inner: usize,
    pub epsilon: f64,
    pub penalty_form: PenaltyForm,
    /// Prescribed area per phase; `None` leaves the phase free.
    pub targets: Vec<Option<f64>>,
    pub cg_tol: f64,
    pub cg_max_iter: usize,
    pub descent_tol: f64,
    pub descent_max_iter: usize,
    pub armijo_c: f64,
    pub armijo_shrink: f64,
}

impl DmfParams {
    /// Unconstrained parameters for `k` phases with outer step `dt`.
    pub fn new(dt: f64, k_inner: usize, k: usize) -> Self {
        Self {
            h: dt / k_inner.max(1) as f64,
            k_inner,
            epsilon: 1e-6,
            penalty_form: PenaltyForm::Quadratic,
            targets: vec![None; k],
            cg_tol: 1e-10,
            cg_max_iter: 10_000,
            descent_tol: 1e-10,
            descent_max_iter: 500,
            armijo_c: 1e-4,
            armijo_shrink: 0.5,
        }
    }

    pub fn constrained(&self) -> bool {
        self.targets.iter().any(Option::is_some)
    }

    pub fn validate(&self, domain_area: f64) -> Result<()> {
        if !(self.h > 0.0 && self.h.is_finite()) {
            return Err(invalid(format!("inner step must be positive, got {}", self.h)));
        }
        if self.k_inner == 0 {
            return Err(invalid("K must be at least 1"));
        }
        if self.constrained() && !(self.epsilon > 0.0) {
            return Err(invalid("penalty parameter must be positive"));
        }
        if self.targets.iter().all(Option::is_some) {
            let total: f64 = self.targets.iter().flatten().sum();
            if (total - domain_area).abs() > 1e-8 {
                return Err(invalid(format!(
                    "targets sum to {total}, domain area is {domain_area}"
                )));
            }
        }
        Ok(())
    }
}

/// Interface geometry recorded just before a thresholding.
#[derive(Debug, Clone)]
pub struct RecalledGeometry {
    geometry: InterfaceGeometry,
}

impl RecalledGeometry {
    pub fn new(mesh: &TriMesh, geometry: InterfaceGeometry) -> Result<Self> {
        if geometry.element_count() != mesh.element_count() {
            return Err(invalid("recalled geometry does not match the mesh"));
        }
        for ie in geometry.interface_elements() {
            let area = mesh.element_data(ie.element).area;
            let sum: f64 = ie.polygons.iter().map(|p| p.area()).sum();
            if (sum - area).abs() > 1e-9 * area {
                return Err(invalid(format!("polygons of element {} do not partition it", ie.element)));
            }
        }
        Ok(Self { geometry })
    }

    pub fn geometry(&self) -> &InterfaceGeometry {
        &self.geometry
    }

    pub fn split_elements(&self) -> usize {
        self.geometry.interface_elements().len()
    }
}

fn element_mass_apply(area: f64, x: [f64; 3]) -> [f64; 3] {
    let s = x[0] + x[1] + x[2];
    let f = area / 12.0;
    [f * (x[0] + s), f * (x[1] + s), f * (x[2] + s)]
}

/// Implicit Euler heat step `(M + hS) w = M u_prev`, per component.
pub fn heat_step(mesh: &TriMesh, u_prev: &VectorField, h: f64) -> Result<VectorField> {
    if !(h > 0.0) {
        return Err(invalid(format!("inner step must be positive, got {h}")));
    }
    let system = mesh.mass().add_scaled(h, mesh.stiffness());
    let mut out = Vec::with_capacity(u_prev.components().len());
    for comp in u_prev.components() {
        let b = mesh.mass().apply(comp);
        let mut x = comp.clone();
        conjugate_gradient(&system, &b, &mut x, 1e-10, 10_000)?;
        out.push(x);
    }
    VectorField::new(u_prev.frame().clone(), out)
}

/// Value of `sum_i integral_{R_i} |u - p_i|^2 / 2h` over the recalled elements.
///
/// Each polygon is fan-triangulated and integrated with the edge-midpoint rule,
/// which is exact for the quadratic integrand.
pub fn geometry_mass_term(mesh: &TriMesh, u: &VectorField, recalled: &RecalledGeometry, h: f64) -> Result<f64> {
    if recalled.geometry.element_count() != mesh.element_count() || u.node_count() != mesh.node_count() {
        return Err(invalid("recalled geometry does not match the mesh"));
    }
    let frame = u.frame();
    let dim = frame.dim();
    let mut total = 0.0;
    for ie in recalled.geometry.interface_elements() {
        let tri = mesh.element(ie.element);
        let value_at = |b: [f64; 3], phase: usize| -> f64 {
            (0..dim)
                .map(|c| {
                    let comp = &u.components()[c];
                    let v = b[0] * comp[tri[0]] + b[1] * comp[tri[1]] + b[2] * comp[tri[2]];
                    (v - frame.vector(phase)[c]).powi(2)
                })
                .sum()
        };
        for poly in &ie.polygons {
            let n = poly.vertices.len();
            for j in 1..n - 1 {
                let (a, b, c) = (0, j, j + 1);
                let area = crate::geometry::polygon_area(&[poly.vertices[a], poly.vertices[b], poly.vertices[c]]);
                let mid = |x: usize, y: usize| {
                    let (p, q) = (poly.barycentric[x], poly.barycentric[y]);
                    [0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1]), 0.5 * (p[2] + q[2])]
                };
                let q = value_at(mid(a, b), poly.phase) + value_at(mid(b, c), poly.phase) + value_at(mid(c, a), poly.phase);
                total += area * q / 3.0;
            }
        }
    }
    Ok(total / (2.0 * h))
}

/// The field the mass term is measured against.
#[derive(Debug, Clone, Copy)]
pub enum Previous<'a> {
    /// Nodal P1 field `w_{n-1}`.
    Nodal(&'a VectorField),
    /// Thresholded field, with `p_i` on each recalled polygon `R_i` instead.
    Recalled {
        field: &'a VectorField,
        geometry: &'a RecalledGeometry,
    },
}

/// Buoyancy-type linear term `integral f w / sqrt(4 pi n h)` of the scalar
/// two-phase formulation, where `w = (p . u + 1) / 2` indicates `phase`.
#[derive(Debug, Clone)]
pub struct Transport {
    pub f: Vec<f64>,
    pub phase: usize,
}

/// Value and gradient (with respect to the single field component) of the transport term.
pub fn transport_term(mesh: &TriMesh, u: &VectorField, t: &Transport, n: usize, h: f64) -> Result<(f64, Vec<f64>)> {
    if n < 1 {
        return Err(invalid("inner step index must be at least 1"));
    }
    if u.frame().k() != 2 {
        return Err(invalid("transport requires the two-phase scalar mode"));
    }
    if t.f.len() != mesh.node_count() {
        return Err(invalid("transport field has the wrong length"));
    }
    let sigma = u.frame().vector(t.phase)[0];
    let denom = (4.0 * std::f64::consts::PI * n as f64 * h).sqrt();
    let mf = mesh.mass().apply(&t.f);
    let comp = &u.components()[0];
    let w: Vec<f64> = comp.iter().map(|x| 0.5 * (sigma * x + 1.0)).collect();
    let value = dot(&mf, &w) / denom;
    let grad = mf.iter().map(|x| 0.5 * sigma * x / denom).collect();
    Ok((value, grad))
}

/// Result of one inner minimization.
#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub field: VectorField,
    pub geometry: InterfaceGeometry,
    /// Functional value of `field`.
    pub functional: f64,
    /// Functional value of the unpenalized minimizer used as warm start.
    pub warm_functional: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Assembled operator for a fixed mesh and inner step.
#[derive(Debug, Clone)]
pub struct InnerSolver<'m> {
    mesh: &'m TriMesh,
    system: CsrMatrix,
    factor: Option<BandedCholesky>,
    params: DmfParams,
}

/// Band storage above which the solver falls back to conjugate gradients.
const MAX_BAND_STORAGE: usize = 20_000_000;

struct Problem<'p> {
    b: Vec<Vec<f64>>,
    c: f64,
    scale: f64,
    linear: Option<&'p [f64]>,
    linear_const: f64,
}

impl<'m> InnerSolver<'m> {
    pub fn new(mesh: &'m TriMesh, params: DmfParams) -> Result<Self> {
        params.validate(mesh.area())?;
        let system = mesh.mass().add_scaled(params.h, mesh.stiffness());
        let factor = if system.n() * (system.bandwidth() + 1) <= MAX_BAND_STORAGE {
            Some(BandedCholesky::factor(&system)?)
        } else {
            None
        };
        Ok(Self {
            mesh,
            system,
            factor,
            params,
        })
    }

    pub fn params(&self) -> &DmfParams {
        &self.params
    }

    pub fn mesh(&self) -> &TriMesh {
        self.mesh
    }

    fn solve(&self, b: &[f64], guess: &[f64]) -> Result<Vec<f64>> {
        if let Some(f) = &self.factor {
            return Ok(f.solve(b));
        }
        let mut x = guess.to_vec();
        conjugate_gradient(&self.system, b, &mut x, self.params.cg_tol, self.params.cg_max_iter)?;
        Ok(x)
    }

    /// `b` and `c` of the mass term `(w'Mw - 2b'w + c) / 2h`.
    fn mass_data(&self, prev: Previous<'_>) -> Result<(Vec<Vec<f64>>, f64)> {
        let mesh = self.mesh;
        match prev {
            Previous::Nodal(u) => {
                let b: Vec<Vec<f64>> = u.components().iter().map(|c| mesh.mass().apply(c)).collect();
                let c = u.components().iter().zip(&b).map(|(x, y)| dot(x, y)).sum();
                Ok((b, c))
            }
            Previous::Recalled { field, geometry } => {
                let g = geometry.geometry();
                if g.element_count() != mesh.element_count() || field.node_count() != mesh.node_count() {
                    return Err(invalid("recalled geometry does not match the mesh"));
                }
                let frame = field.frame();
                let dim = frame.dim();
                let mut b: Vec<Vec<f64>> = vec![vec![0.0; mesh.node_count()]; dim];
                let mut c = 0.0;
                for e in 0..mesh.element_count() {
                    let tri = mesh.element(e);
                    let area = mesh.element_data(e).area;
                    match g.element_polygons(e) {
                        None => {
                            for (d, comp) in field.components().iter().enumerate() {
                                let x = [comp[tri[0]], comp[tri[1]], comp[tri[2]]];
                                let mx = element_mass_apply(area, x);
                                for v in 0..3 {
                                    b[d][tri[v]] += mx[v];
                                }
                                c += x[0] * mx[0] + x[1] * mx[1] + x[2] * mx[2];
                            }
                        }
                        Some(polys) => {
                            for poly in polys {
                                // integral of phi_v over R_i = |R_i| phi_v(centroid)
                                let pa = poly.area();
                                let Some(cb) = polygon_centroid_bary(poly, pa) else { continue };
                                for d in 0..dim {
                                    let pc = frame.vector(poly.phase)[d];
                                    for v in 0..3 {
                                        b[d][tri[v]] += pc * pa * cb[v];
                                    }
                                }
                                c += pa;
                            }
                        }
                    }
                }
                Ok((b, c))
            }
        }
    }

    fn quadratic_value(&self, p: &Problem<'_>, w: &[Vec<f64>]) -> f64 {
        let h = self.params.h;
        let mut q = p.c;
        for (comp, b) in w.iter().zip(&p.b) {
            q += self.system.quad_form(comp) - 2.0 * dot(b, comp);
        }
        let mut value = p.scale * q / (2.0 * h);
        if let Some(l) = p.linear {
            value += dot(l, &w[0]) + p.linear_const;
        }
        value
    }

    fn penalty(&self, areas: &[f64]) -> f64 {
        let prm = &self.params;
        prm.targets
            .iter()
            .zip(areas)
            .filter_map(|(t, &a)| t.map(|t| prm.penalty_form.value(prm.epsilon, t, a)))
            .sum()
    }

    fn penalty_slopes(&self, areas: &[f64]) -> Vec<f64> {
        let prm = &self.params;
        prm.targets
            .iter()
            .zip(areas)
            .map(|(t, &a)| t.map_or(0.0, |t| prm.penalty_form.slope(prm.epsilon, t, a)))
            .collect()
    }

    /// Minimizes the mass term against `prev` plus Dirichlet energy, the penalty,
    /// and optionally the transport term of inner step `n`.
    pub fn step(&self, prev: Previous<'_>, transport: Option<&Transport>, n: usize) -> Result<StepOutcome> {
        let frame = match prev {
            Previous::Nodal(u) => u.frame().clone(),
            Previous::Recalled { field, .. } => field.frame().clone(),
        };
        let guess: Vec<Vec<f64>> = match prev {
            Previous::Nodal(u) => u.components().to_vec(),
            Previous::Recalled { field, .. } => field.components().to_vec(),
        };
        let h = self.params.h;
        let (b, c) = self.mass_data(prev)?;
        let (scale, linear, linear_const) = match transport {
            Some(t) => {
                let probe = VectorField::zeros(frame.clone(), self.mesh.node_count());
                let (v0, grad) = transport_term(self.mesh, &probe, t, n, h)?;
                (0.25, Some(grad), v0)
            }
            None => (1.0, None, 0.0),
        };
        let problem = Problem {
            b,
            c,
            scale,
            linear: linear.as_deref(),
            linear_const,
        };

        // unpenalized minimizer: A w = b - (h / scale) l
        let mut w_star = Vec::with_capacity(problem.b.len());
        for (d, bd) in problem.b.iter().enumerate() {
            let rhs: Vec<f64> = match (d, problem.linear) {
                (0, Some(l)) => bd.iter().zip(l).map(|(x, y)| x - h / scale * y).collect(),
                _ => bd.clone(),
            };
            w_star.push(self.solve(&rhs, &guess[d])?);
        }
        let field = VectorField::new(frame.clone(), w_star.clone())?;
        let geometry = extract_interfaces(self.mesh, &field)?;
        let warm = self.quadratic_value(&problem, &w_star) + self.penalty(geometry.areas());
        if !self.params.constrained() {
            return Ok(StepOutcome {
                field,
                geometry,
                functional: warm,
                warm_functional: warm,
                iterations: 0,
                converged: true,
            });
        }
        self.descend(&problem, frame, w_star, field, geometry, warm)
    }

    /// Preconditioned descent on the penalized functional.
    ///
    /// The metric is `H + P'' G'G`, where the rows of `G` are the area gradients
    /// of the constrained phases. Because `G` has one row per constrained phase,
    /// the preconditioned direction reduces to a small dense system:
    /// `d = (w* - w) - sum_i mu_i H^{-1} g_i`. The coefficients `mu` minimize the
    /// model with linearized areas; an Armijo search on the true functional
    /// guards against the model being wrong across element boundaries.
    fn descend(
        &self,
        problem: &Problem<'_>,
        frame: crate::simplex::ReferenceFrame,
        w_star: Vec<Vec<f64>>,
        mut field: VectorField,
        mut geometry: InterfaceGeometry,
        warm: f64,
    ) -> Result<StepOutcome> {
        let prm = &self.params;
        let h = prm.h;
        let scale = problem.scale;
        let nodes = self.mesh.node_count();
        let dim = w_star.len();
        let constrained: Vec<(usize, f64)> =
            prm.targets.iter().enumerate().filter_map(|(i, t)| t.map(|t| (i, t))).collect();
        let m = constrained.len();
        let mut value = warm;
        let mut iterations = 0;
        let mut converged = false;
        let mut unit = vec![0.0; prm.targets.len()];
        let zeros = vec![0.0; nodes];
        while iterations < prm.descent_max_iter {
            iterations += 1;
            let w = field.components();
            let fields = pair_area_fields(self.mesh, &field, &geometry);
            // A^{-1} s_il for the pairs bordering constrained phases; s_il and s_li
            // agree to round-off unless one side's polygon is missing, and then
            // share the solve (this only touches the preconditioner)
            let mut solved: BTreeMap<(usize, usize), Vec<f64>> = BTreeMap::new();
            for (&(i, l), s) in &fields {
                if prm.targets[i].is_none() {
                    continue;
                }
                let y = match solved.get(&(l, i)) {
                    Some(y) if fields.get(&(l, i)).is_some_and(|t| nearly_equal(s, t)) => y.clone(),
                    _ => self.solve(s, &zeros)?,
                };
                solved.insert((i, l), y);
            }
            let mut grads = Vec::with_capacity(m);
            let mut z = Vec::with_capacity(m);
            for &(i, _) in &constrained {
                unit.iter_mut().for_each(|x| *x = 0.0);
                unit[i] = h / scale;
                z.push(combine_pair_fields(&frame, &solved, &unit, nodes));
                unit[i] = 1.0;
                grads.push(combine_pair_fields(&frame, &fields, &unit, nodes));
            }
            let to_star: Vec<Vec<f64>> = w_star.iter().zip(w).map(|(a, b)| a.iter().zip(b).map(|(x, y)| x - y).collect()).collect();
            let mut bmat = vec![vec![0.0; m]; m];
            let mut deficit = vec![0.0; m];
            for a in 0..m {
                for b in 0..m {
                    bmat[a][b] = (0..dim).map(|c| dot(&grads[a][c], &z[b][c])).sum();
                }
                let lin: f64 = (0..dim).map(|c| dot(&grads[a][c], &to_star[c])).sum();
                deficit[a] = geometry.areas()[constrained[a].0] + lin - constrained[a].1;
            }
            let mu = self.model_coefficients(&bmat, &deficit);
            let mut dir = to_star;
            for (a, zi) in z.iter().enumerate() {
                for c in 0..dim {
                    for (d, zz) in dir[c].iter_mut().zip(&zi[c]) {
                        *d -= mu[a] * zz;
                    }
                }
            }
            let slopes = self.penalty_slopes(geometry.areas());
            let g_pen = combine_pair_fields(&frame, &fields, &slopes, nodes);
            let mut directional = 0.0;
            for c in 0..dim {
                let diff: Vec<f64> = w[c].iter().zip(&w_star[c]).map(|(a, b)| a - b).collect();
                let a_diff = self.system.apply(&diff);
                directional += dot(&a_diff, &dir[c]) * scale / h + dot(&g_pen[c], &dir[c]);
            }
            if dir.iter().all(|d| d.iter().all(|&x| x == 0.0)) {
                converged = true;
                break;
            }
            let mut t = 1.0;
            let mut accepted = None;
            while t > 1e-10 {
                let comps: Vec<Vec<f64>> = w
                    .iter()
                    .zip(&dir)
                    .map(|(x, d)| x.iter().zip(d).map(|(a, b)| a + t * b).collect())
                    .collect();
                let f = VectorField::new(frame.clone(), comps)?;
                let g = extract_interfaces(self.mesh, &f)?;
                let v = self.quadratic_value(problem, f.components()) + self.penalty(g.areas());
                if v < value && v <= value + prm.armijo_c * t * directional.min(0.0) {
                    accepted = Some((v, f, g));
                    break;
                }
                t *= prm.armijo_shrink;
            }
            let Some((v, f, g)) = accepted else {
                // no acceptable step: stationary to working precision
                converged = true;
                break;
            };
            let decrease = value - v;
            field = f;
            geometry = g;
            value = v;
            if decrease <= prm.descent_tol * value.abs().max(f64::MIN_POSITIVE) {
                converged = true;
                break;
            }
        }
        Ok(StepOutcome {
            field,
            geometry,
            functional: value,
            warm_functional: warm,
            iterations,
            converged,
        })
    }

    /// Coefficients `mu` of the model step for the area-coupling matrix `B`
    /// and the linearized deficits `s` (measured minus target at `w*`).
    fn model_coefficients(&self, b: &[Vec<f64>], s: &[f64]) -> Vec<f64> {
        let prm = &self.params;
        let m = s.len();
        let scale_b = (0..m).map(|i| b[i][i].abs()).fold(0.0, f64::max);
        if scale_b == 0.0 {
            return vec![0.0; m];
        }
        match prm.penalty_form {
            PenaltyForm::Quadratic => {
                let mut a = b.to_vec();
                for (i, row) in a.iter_mut().enumerate() {
                    row[i] += 0.5 * prm.epsilon;
                }
                solve_dense(a, s.to_vec()).unwrap_or_else(|| vec![0.0; m])
            }
            form => {
                // area change per phase from the one-dimensional model, then
                // the coefficients realizing those changes
                let x: Vec<f64> = (0..m)
                    .map(|i| {
                        let (bi, si, eps) = (b[i][i], s[i], prm.epsilon);
                        match form {
                            PenaltyForm::Absolute => si.clamp(-bi / eps, bi / eps),
                            _ => {
                                if si > -eps * bi {
                                    -eps * bi
                                } else if si < -bi / eps {
                                    -bi / eps
                                } else {
                                    si
                                }
                            }
                        }
                    })
                    .collect();
                let mut a = b.to_vec();
                for (i, row) in a.iter_mut().enumerate() {
                    row[i] += 1e-10 * scale_b;
                }
                solve_dense(a, x).unwrap_or_else(|| vec![0.0; m])
            }
        }
    }
}

fn nearly_equal(a: &[f64], b: &[f64]) -> bool {
    let scale = a.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    a.iter().zip(b).all(|(x, y)| (x - y).abs() <= 1e-12 * scale)
}

/// Barycentric coordinates of the area centroid of a polygon.
fn polygon_centroid_bary(poly: &crate::geometry::Polygon, area: f64) -> Option<[f64; 3]> {
    if area <= 0.0 {
        return None;
    }
    let n = poly.vertices.len();
    let mut acc = [0.0; 3];
    for j in 1..n - 1 {
        let ta = crate::geometry::polygon_area(&[poly.vertices[0], poly.vertices[j], poly.vertices[j + 1]]);
        for v in 0..3 {
            acc[v] += ta * (poly.barycentric[0][v] + poly.barycentric[j][v] + poly.barycentric[j + 1][v]) / 3.0;
        }
    }
    Some([acc[0] / area, acc[1] / area, acc[2] / area])
}

/// One penalized inner step from `u_prev` (a single minimization).
pub fn penalized_step(
    mesh: &TriMesh,
    u_prev: &VectorField,
    params: &DmfParams,
    recalled: Option<&RecalledGeometry>,
) -> Result<StepOutcome> {
    let solver = InnerSolver::new(mesh, params.clone())?;
    let prev = match recalled {
        Some(geometry) => Previous::Recalled { field: u_prev, geometry },
        None => Previous::Nodal(u_prev),
    };
    solver.step(prev, None, 1)
}

/// Derivative of `meas(P_i)` for the field `u`, together with the number of
/// interface pieces skipped as degenerate.
pub fn area_gradient(mesh: &TriMesh, u: &VectorField, phase: usize) -> Result<(Vec<Vec<f64>>, usize)> {
    let g = extract_interfaces(mesh, u)?;
    let grad = crate::geometry::area_gradient(mesh, u, &g, phase)?;
    Ok((grad, g.degenerate_crossings()))
}
