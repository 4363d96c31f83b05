//! Outer BMO / BMO* loops.
//!
//! Each outer step runs `K` inner minimizations from the thresholded field and
//! then thresholds at the nodes. In BMO* mode the interface geometry of the
//! last inner iterate is recorded before thresholding and the first inner
//! step of the next round measures its mass term against it.

use std::collections::HashMap;

use crate::dmf::{DmfParams, InnerSolver, PenaltyForm, Previous, RecalledGeometry, Transport};
use crate::error::{invalid, Error, Result};
use crate::field::{assign_initial_phases, labels_to_field, threshold, PhaseLabels, Region, VectorField};
use crate::geometry::{dist, extract_interfaces, fit_circle, phase_components, Circle, InterfaceGeometry, Junction, Locator, Segment};
use crate::mesh::{build_structured_mesh, Point, Rect, TriMesh};
use crate::simplex::ReferenceFrame;

/// Outer loop variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Mode {
    #[default]
    Bmo,
    BmoStar,
}

/// Area constraints.
#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub epsilon: f64,
    pub form: PenaltyForm,
    /// Phases to constrain; `None` constrains all of them.
    pub phases: Option<Vec<usize>>,
    /// Explicit targets overriding the measured initial areas.
    pub targets: Option<Vec<f64>>,
}

impl Default for Constraint {
    fn default() -> Self {
        Self {
            epsilon: 1e-6,
            form: PenaltyForm::Quadratic,
            phases: None,
            targets: None,
        }
    }
}

/// Source of the transport coefficient `f`.
#[derive(Debug, Clone, PartialEq)]
pub enum TransportField {
    /// `f = beta * g` with `g = -y` the coordinate along gravity.
    Buoyancy { beta: f64 },
    /// Nodal values.
    Values(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransportConfig {
    pub field: TransportField,
    /// Phase playing the role of `{w >= 1/2}`.
    pub phase: usize,
}

/// Initial phase layout.
#[derive(Debug, Clone, PartialEq)]
pub enum Initial {
    Regions(Vec<Region>),
    Labels(PhaseLabels),
}

/// Everything needed to reproduce a run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// Node counts per side.
    pub nx: usize,
    pub ny: usize,
    pub domain: Rect,
    pub k: usize,
    pub initial: Initial,
    pub dt: f64,
    pub k_inner: usize,
    pub steps: usize,
    pub mode: Mode,
    pub constraint: Option<Constraint>,
    pub transport: Option<TransportConfig>,
    /// Full geometry (labels, segments, junctions) is kept every `output_every` steps.
    pub output_every: usize,
    /// Fit a circle to the interface of this pair at every step.
    pub fit_pair: Option<(usize, usize)>,
    /// Stop once an interface is present but has not moved for the last 5 steps.
    pub halt_on_stall: bool,
    pub descent_max_iter: usize,
}

impl RunConfig {
    /// Unit-square run on a `cells × cells` grid.
    pub fn new(cells: usize, k: usize, initial: Vec<Region>, dt: f64, k_inner: usize, steps: usize) -> Self {
        Self {
            nx: cells + 1,
            ny: cells + 1,
            domain: Rect::unit(),
            k,
            initial: Initial::Regions(initial),
            dt,
            k_inner,
            steps,
            mode: Mode::Bmo,
            constraint: None,
            transport: None,
            output_every: 10,
            fit_pair: None,
            halt_on_stall: false,
            descent_max_iter: 500,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(invalid(format!("time step must be positive, got {}", self.dt)));
        }
        if self.k_inner == 0 || self.steps == 0 {
            return Err(invalid("K and M must be at least 1"));
        }
        if self.nx < 2 || self.ny < 2 {
            return Err(invalid("mesh needs at least 2 nodes per side"));
        }
        if self.output_every == 0 {
            return Err(invalid("output cadence must be at least 1"));
        }
        if let Some(t) = &self.transport {
            if self.k != 2 {
                return Err(invalid("transport requires k = 2"));
            }
            if t.phase >= 2 {
                return Err(invalid("transport phase out of range"));
            }
        }
        if let Some(c) = &self.constraint {
            if !(c.epsilon > 0.0) {
                return Err(invalid("penalty parameter must be positive"));
            }
            if let Some(p) = &c.phases {
                if p.iter().any(|&i| i >= self.k) {
                    return Err(invalid("constrained phase out of range"));
                }
            }
            if let Some(t) = &c.targets {
                if t.len() != self.k {
                    return Err(invalid("one target area per phase is required"));
                }
            }
        }
        Ok(())
    }

    pub fn time(&self, step: usize) -> f64 {
        step as f64 * self.dt
    }
}

/// Per-step record of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    pub time: f64,
    pub areas: Vec<f64>,
    pub interface_length: f64,
    pub pairs: Vec<(usize, usize)>,
    /// Connected components of each phase's nodal labels.
    pub components: Vec<usize>,
    /// Largest crossing-point displacement since the previous step
    /// (infinite when crossings appear or vanish, `0` without interfaces).
    pub displacement: f64,
    /// Functional value of the last inner minimization.
    pub functional: Option<f64>,
    pub descent_iterations: usize,
    pub converged: bool,
    pub fitted: Option<Circle>,
    pub labels: Option<PhaseLabels>,
    pub segments: Option<Vec<Segment>>,
    pub junctions: Option<Vec<Junction>>,
}

/// Recorded run.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub config: RunConfig,
    pub targets: Vec<Option<f64>>,
    pub records: Vec<StepRecord>,
    pub mesh: TriMesh,
    /// Field after the last thresholding.
    pub final_field: VectorField,
    /// Geometry of the last inner iterate.
    pub final_geometry: InterfaceGeometry,
    /// Inner steps whose descent hit the iteration cap.
    pub unconverged_steps: usize,
}

impl Trajectory {
    pub fn last(&self) -> &StepRecord {
        self.records.last().expect("trajectory has the initial record")
    }

    /// Largest `|A_i - target_i|` over all records and constrained phases.
    pub fn max_drift(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for r in &self.records {
            for (a, t) in r.areas.iter().zip(&self.targets) {
                if let Some(t) = t {
                    worst = worst.max((a - t).abs());
                }
            }
        }
        worst
    }

    pub fn stalled(&self) -> bool {
        stall_detector(&self.records)
    }
}

/// Steps in the stall window.
pub const STALL_WINDOW: usize = 5;

/// True iff the last `STALL_WINDOW` records show no crossing point moving more than `1e-12`.
pub fn stall_detector(records: &[StepRecord]) -> bool {
    if records.len() < STALL_WINDOW {
        return false;
    }
    records[records.len() - STALL_WINDOW..].iter().all(|r| r.displacement <= 1e-12)
}

fn displacement(prev: &HashMap<(Locator, (usize, usize)), Point>, next: &HashMap<(Locator, (usize, usize)), Point>) -> f64 {
    let mut worst: f64 = 0.0;
    for (key, p) in next {
        match prev.get(key) {
            Some(q) => worst = worst.max(dist(*p, *q)),
            None => return f64::INFINITY,
        }
    }
    if prev.keys().any(|k| !next.contains_key(k)) {
        return f64::INFINITY;
    }
    worst
}

fn with_context(e: Error, step: usize, inner: usize) -> Error {
    let ctx = format!("outer step {step}, inner step {inner}");
    match e {
        Error::NumericalFailure(m) => Error::NumericalFailure(format!("{ctx}: {m}")),
        Error::InvalidArgument(m) => Error::InvalidArgument(format!("{ctx}: {m}")),
        other => other,
    }
}

/// Runs a standard BMO simulation.
pub fn bmo_run(config: &RunConfig) -> Result<Trajectory> {
    if config.mode != Mode::Bmo {
        return Err(invalid("bmo_run requires mode = bmo"));
    }
    run(config)
}

/// Runs a BMO* simulation with geometry recall.
pub fn bmo_star_run(config: &RunConfig) -> Result<Trajectory> {
    if config.mode != Mode::BmoStar {
        return Err(invalid("bmo_star_run requires mode = bmo_star"));
    }
    run(config)
}

struct Recorder<'a> {
    config: &'a RunConfig,
    mesh: &'a TriMesh,
    crossings: HashMap<(Locator, (usize, usize)), Point>,
}

impl Recorder<'_> {
    fn record(
        &mut self,
        step: usize,
        geometry: &InterfaceGeometry,
        labels: &PhaseLabels,
        functional: Option<f64>,
        descent_iterations: usize,
        converged: bool,
    ) -> StepRecord {
        let crossings = geometry.crossing_points();
        let disp = if step == 0 {
            f64::INFINITY
        } else {
            displacement(&self.crossings, &crossings)
        };
        self.crossings = crossings;
        let fitted = self.config.fit_pair.and_then(|pair| {
            let idx: Vec<usize> = (0..geometry.segments().len())
                .filter(|&s| geometry.segments()[s].pair == pair)
                .collect();
            fit_circle(&geometry.chain_points(&idx)).ok()
        });
        let full = step % self.config.output_every == 0 || step == self.config.steps;
        StepRecord {
            step,
            time: self.config.time(step),
            areas: geometry.areas().to_vec(),
            interface_length: geometry.total_length(),
            pairs: geometry.pairs(),
            components: (0..self.config.k).map(|i| phase_components(self.mesh, labels, i)).collect(),
            displacement: disp,
            functional,
            descent_iterations,
            converged,
            fitted,
            labels: full.then(|| labels.clone()),
            segments: full.then(|| geometry.segments().to_vec()),
            junctions: full.then(|| geometry.junctions().to_vec()),
        }
    }
}

/// Nodal values of the transport coefficient.
pub fn transport_values(mesh: &TriMesh, field: &TransportField) -> Result<Vec<f64>> {
    match field {
        TransportField::Buoyancy { beta } => Ok(mesh.nodes().iter().map(|p| -beta * p[1]).collect()),
        TransportField::Values(v) => {
            if v.len() != mesh.node_count() {
                return Err(invalid("transport values do not match the mesh"));
            }
            Ok(v.clone())
        }
    }
}

/// Runs the configured simulation in its mode.
pub fn run(config: &RunConfig) -> Result<Trajectory> {
    run_with(config, |_| {})
}

/// Runs the simulation, calling `observe` with every new record.
pub fn run_with(config: &RunConfig, mut observe: impl FnMut(&StepRecord)) -> Result<Trajectory> {
    config.validate()?;
    let mesh = build_structured_mesh(config.nx, config.ny, config.domain)?;
    let frame = ReferenceFrame::new(config.k)?;
    let labels0 = match &config.initial {
        Initial::Regions(regions) => assign_initial_phases(&mesh, config.k, regions)?,
        Initial::Labels(l) => {
            if l.len() != mesh.node_count() || l.k() != config.k {
                return Err(invalid("initial labels do not match the configuration"));
            }
            l.clone()
        }
    };
    let mut u = labels_to_field(&labels0, &frame);
    let geom0 = extract_interfaces(&mesh, &u)?;

    let mut params = DmfParams::new(config.dt, config.k_inner, config.k);
    params.descent_max_iter = config.descent_max_iter;
    if let Some(c) = &config.constraint {
        params.epsilon = c.epsilon;
        params.penalty_form = c.form;
        let measured = c.targets.clone().unwrap_or_else(|| geom0.areas().to_vec());
        params.targets = (0..config.k)
            .map(|i| match &c.phases {
                Some(p) if !p.contains(&i) => None,
                _ => Some(measured[i]),
            })
            .collect();
        // the measured areas sum to the domain area only up to roundoff
        if params.targets.iter().all(Option::is_some) {
            let total: f64 = params.targets.iter().flatten().sum();
            let fix = (mesh.area() - total) / config.k as f64;
            for t in params.targets.iter_mut().flatten() {
                *t += fix;
            }
        }
    }
    let targets = params.targets.clone();
    let solver = InnerSolver::new(&mesh, params)?;
    let transport = match &config.transport {
        Some(t) => Some(Transport {
            f: transport_values(&mesh, &t.field)?,
            phase: t.phase,
        }),
        None => None,
    };

    let mut recorder = Recorder {
        config,
        mesh: &mesh,
        crossings: HashMap::new(),
    };
    let mut records = Vec::with_capacity(config.steps + 1);
    let first = recorder.record(0, &geom0, &labels0, None, 0, true);
    observe(&first);
    records.push(first);
    let mut recalled = match config.mode {
        Mode::BmoStar => Some(RecalledGeometry::new(&mesh, geom0.clone())?),
        Mode::Bmo => None,
    };
    let mut last_geometry = geom0;
    let mut unconverged = 0;

    for m in 1..=config.steps {
        let mut w = u.clone();
        let mut functional = None;
        let mut iterations = 0;
        let mut converged = true;
        let mut geometry = None;
        for n in 1..=config.k_inner {
            let prev = match (&recalled, n) {
                (Some(r), 1) => Previous::Recalled { field: &u, geometry: r },
                _ => Previous::Nodal(&w),
            };
            let out = solver
                .step(prev, transport.as_ref(), n)
                .map_err(|e| with_context(e, m, n))?;
            if !out.converged {
                unconverged += 1;
                converged = false;
            }
            functional = Some(out.functional);
            iterations += out.iterations;
            w = out.field;
            geometry = Some(out.geometry);
        }
        let geometry = geometry.expect("K >= 1");
        let labels = threshold(&w);
        u = labels_to_field(&labels, &frame);
        let rec = recorder.record(m, &geometry, &labels, functional, iterations, converged);
        observe(&rec);
        records.push(rec);
        if recalled.is_some() {
            recalled = Some(RecalledGeometry::new(&mesh, geometry.clone())?);
        }
        last_geometry = geometry;
        if config.halt_on_stall && !records[records.len() - 1].pairs.is_empty() && stall_detector(&records) {
            break;
        }
    }

    Ok(Trajectory {
        config: config.clone(),
        targets,
        records,
        mesh,
        final_field: u,
        final_geometry: last_geometry,
        unconverged_steps: unconverged,
    })
}
