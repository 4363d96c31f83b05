//! Canned run configurations and the measurements taken on them.

use crate::dmf::PenaltyForm;
use crate::driver::{run, stall_detector, STALL_WINDOW, Constraint, Mode, RunConfig, TransportConfig, TransportField, Trajectory};
use crate::error::{invalid, Error, Result};
use crate::field::{Region, Shape};
use crate::geometry::{chain_points, dist, fit_circle, junction_angles, segment_chains, Circle, Segment};
use crate::mesh::Point;
use crate::oracles::{circle_radius_exact, extinction_time, radius_error};

pub const SCENARIOS: [&str; 9] = [
    "shrinking_circle",
    "two_circles",
    "double_bubble",
    "triple_bubble",
    "nine_phases",
    "coalesce_2p",
    "coalesce_3p",
    "rising_bubble_wide",
    "rising_bubble_tall",
];

pub const CIRCLE_RADIUS: f64 = 0.35;
pub const CIRCLE_K: usize = 10;
pub const TWO_CIRCLES: [(f64, [f64; 2]); 2] = [(0.1996, [0.28, 0.5]), (0.1384, [0.72, 0.5])];
pub const BUOYANCY: f64 = 20.5;

fn disk(phase: usize, center: [f64; 2], radius: f64) -> Region {
    Region::new(phase, Shape::Disk { center, radius })
}

fn ellipse(phase: usize, center: [f64; 2], semi_axes: [f64; 2]) -> Region {
    Region::new(phase, Shape::Ellipse { center, semi_axes })
}

fn ambient(phase: usize) -> Region {
    Region::new(phase, Shape::Everywhere)
}

fn constrained(epsilon: f64) -> Option<Constraint> {
    Some(Constraint {
        epsilon,
        ..Constraint::default()
    })
}

/// Disk of radius 0.35 shrinking under curvature flow; `dt = (1/cells) / subdivision`.
///
/// A stalled run stops early: nothing changes once the labels stop moving.
pub fn circle_config(cells: usize, subdivision: usize, mode: Mode) -> RunConfig {
    let dt = 1.0 / (cells * subdivision) as f64;
    let steps = (extinction_time(CIRCLE_RADIUS) / dt).ceil() as usize + 1;
    let regions = vec![disk(0, [0.5, 0.5], CIRCLE_RADIUS), ambient(1)];
    let mut c = RunConfig::new(cells, 2, regions, dt, CIRCLE_K, steps);
    c.mode = mode;
    c.fit_pair = Some((0, 1));
    c.halt_on_stall = true;
    c
}

/// Two same-phase circles under a total-area constraint.
pub fn two_circles_config(epsilon: f64) -> RunConfig {
    let regions = vec![
        disk(0, TWO_CIRCLES[0].1, TWO_CIRCLES[0].0),
        disk(0, TWO_CIRCLES[1].1, TWO_CIRCLES[1].0),
        ambient(1),
    ];
    let mut c = RunConfig::new(85, 2, regions, 2.5e-4, 30, 80);
    c.mode = Mode::BmoStar;
    c.output_every = 1;
    c.constraint = Some(Constraint {
        epsilon,
        phases: Some(vec![0]),
        ..Constraint::default()
    });
    c
}

pub fn scenario_config(name: &str) -> Result<RunConfig> {
    let c = match name {
        "shrinking_circle" => circle_config(40, 8, Mode::BmoStar),
        "two_circles" => two_circles_config(1e-6),
        "double_bubble" => {
            let regions = vec![disk(1, [0.32, 0.0], 0.2523), disk(2, [0.66, 0.0], 0.1382), ambient(0)];
            let mut c = RunConfig::new(120, 3, regions, 1e-3, 10, 200);
            c.mode = Mode::BmoStar;
            c.constraint = constrained(1e-6);
            c
        }
        "triple_bubble" => {
            let regions = vec![
                disk(1, [0.4, 0.42], 0.15),
                disk(2, [0.62, 0.45], 0.13),
                disk(3, [0.5, 0.62], 0.14),
                ambient(0),
            ];
            let mut c = RunConfig::new(53, 4, regions, 5e-4, 10, 60);
            c.mode = Mode::BmoStar;
            c.constraint = constrained(1e-6);
            c
        }
        "nine_phases" => {
            let mut regions: Vec<Region> = [0.2, 0.4, 0.6, 0.8]
                .iter()
                .enumerate()
                .map(|(i, &x)| disk(i + 1, [x, 0.08], 0.1))
                .collect();
            regions.extend([0.3, 0.5, 0.7].iter().enumerate().map(|(i, &x)| disk(i + 5, [x, 0.26], 0.09)));
            regions.push(disk(8, [0.55, 0.42], 0.08));
            regions.push(ambient(0));
            let mut c = RunConfig::new(69, 9, regions, 3e-4, 30, 60);
            c.mode = Mode::BmoStar;
            c.constraint = constrained(1e-6);
            c
        }
        "coalesce_2p" => {
            let regions = vec![
                ellipse(1, [0.35, 0.5], [0.12, 0.2]),
                ellipse(1, [0.65, 0.5], [0.12, 0.2]),
                ambient(0),
            ];
            let mut c = RunConfig::new(53, 2, regions, 5e-4, 10, 150);
            c.mode = Mode::BmoStar;
            c.constraint = constrained(1e-6);
            c.fit_pair = Some((0, 1));
            c
        }
        "coalesce_3p" => {
            let regions = vec![
                ellipse(1, [0.37, 0.5], [0.14, 0.2]),
                ellipse(2, [0.63, 0.5], [0.14, 0.2]),
                ambient(0),
            ];
            let mut c = RunConfig::new(53, 3, regions, 5e-4, 10, 150);
            c.mode = Mode::BmoStar;
            c.constraint = constrained(1e-6);
            c
        }
        "rising_bubble_wide" => rising_bubble([0.3, 0.12], 150),
        "rising_bubble_tall" => rising_bubble([0.2, 0.45], 80),
        _ => return Err(invalid(format!("unknown scenario '{name}'"))),
    };
    Ok(c)
}

fn rising_bubble(semi_axes: [f64; 2], steps: usize) -> RunConfig {
    let regions = vec![ellipse(1, [0.5, 0.0], semi_axes), ambient(0)];
    let mut c = RunConfig::new(53, 2, regions, 1e-3, 20, steps);
    c.mode = Mode::BmoStar;
    c.constraint = Some(Constraint {
        epsilon: 1e-3,
        form: PenaltyForm::Absolute,
        phases: Some(vec![1]),
        targets: None,
    });
    c.transport = Some(TransportConfig {
        field: TransportField::Buoyancy { beta: BUOYANCY },
        phase: 1,
    });
    c.fit_pair = Some((0, 1));
    c
}

pub fn run_scenario(name: &str) -> Result<Trajectory> {
    run(&scenario_config(name)?)
}

/// Circles fitted to each connected interface chain of `pair`, largest first.
///
/// Points within `margin` of any point in `exclude` are dropped before fitting.
/// Chains left with fewer than `min_points` points or a degenerate fit are skipped.
pub fn chain_circles(
    segments: &[Segment],
    pair: (usize, usize),
    min_points: usize,
    exclude: &[Point],
    margin: f64,
) -> Vec<Circle> {
    let mut out: Vec<Circle> = segment_chains(segments, pair)
        .iter()
        .map(|c| {
            let mut pts = chain_points(segments, c);
            pts.retain(|&p| exclude.iter().all(|&q| dist(p, q) > margin));
            pts
        })
        .filter(|p| p.len() >= min_points.max(3))
        .filter_map(|p| fit_circle(&p).ok())
        .collect();
    out.sort_by(|a, b| b.radius.total_cmp(&a.radius));
    out
}

/// Fitted radii and junction angles of a two-bubble configuration in phases 1 and 2.
#[derive(Debug, Clone, PartialEq)]
pub struct DoubleBubbleMeasure {
    pub r1: f64,
    pub r2: f64,
    /// Radius of the common arc, negative when it bulges into bubble 1.
    pub r12: f64,
    /// Angles at every detected triple junction of phases 0, 1, 2.
    pub angles: Vec<[f64; 3]>,
    pub areas: [f64; 2],
}

impl DoubleBubbleMeasure {
    /// `|1/r1 - 1/r2 - 1/r12|` relative to `1/|r12|`.
    pub fn radii_residual(&self) -> f64 {
        (1.0 / self.r1 - 1.0 / self.r2 - 1.0 / self.r12).abs() * self.r12.abs()
    }
}

/// Cells around each triple junction left out of the arc fits.
pub const JUNCTION_MARGIN_CELLS: f64 = 2.0;

/// Measures the final configuration of a run whose bubbles are phases 1 (larger) and 2.
///
/// Arc points within `JUNCTION_MARGIN_CELLS` of a triple junction are not fitted:
/// the junction elements bend the discrete arcs toward the junction point.
pub fn measure_double_bubble(traj: &Trajectory) -> Result<DoubleBubbleMeasure> {
    let g = &traj.final_geometry;
    let corners: Vec<Point> = g.junctions().iter().map(|j| j.point).collect();
    let margin = JUNCTION_MARGIN_CELLS * traj.mesh.spacing();
    let fit = |pair| {
        chain_circles(g.segments(), pair, 3, &corners, margin)
            .into_iter()
            .next()
            .ok_or_else(|| Error::DegenerateFit(format!("no arc for pair {pair:?}")))
    };
    let (c1, c2, c12) = (fit((0, 1))?, fit((0, 2))?, fit((1, 2))?);
    let toward_two = dist(c12.center, c2.center) < dist(c12.center, c1.center);
    let angles = g
        .junctions()
        .iter()
        .filter(|j| {
            let mut p = j.phases;
            p.sort_unstable();
            p == [0, 1, 2]
        })
        .map(|j| junction_angles(g, j))
        .collect::<Result<Vec<_>>>()?;
    let last = traj.last();
    Ok(DoubleBubbleMeasure {
        r1: c1.radius,
        r2: c2.radius,
        r12: if toward_two { -c12.radius } else { c12.radius },
        angles,
        areas: [last.areas[1], last.areas[2]],
    })
}

/// Outcome of one shrinking-circle run.
#[derive(Debug, Clone, PartialEq)]
pub struct CircleRun {
    pub cells: usize,
    pub subdivision: usize,
    pub mode: Mode,
    /// Time-averaged radius error before extinction; `None` when the run stalls.
    pub error: Option<f64>,
    pub stalled: bool,
}

/// Runs the shrinking-circle test and averages the radius error over steps before extinction.
pub fn circle_run(cells: usize, subdivision: usize, mode: Mode) -> Result<CircleRun> {
    let config = circle_config(cells, subdivision, mode);
    let traj = run(&config)?;
    let ext = extinction_time(CIRCLE_RADIUS);
    let mut fitted = Vec::new();
    let mut exact = Vec::new();
    for r in traj.records.iter().filter(|r| r.time < ext) {
        fitted.push(r.fitted.map_or(0.0, |c| c.radius));
        exact.push(circle_radius_exact(CIRCLE_RADIUS, r.time).unwrap_or(0.0));
    }
    let before: Vec<_> = traj.records.iter().filter(|r| r.time < ext && !r.pairs.is_empty()).cloned().collect();
    let stalled = before.windows(STALL_WINDOW).any(stall_detector);
    Ok(CircleRun {
        cells,
        subdivision,
        mode,
        error: (!stalled).then(|| radius_error(&fitted, &exact)),
        stalled,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_scenario_is_valid() {
        for name in SCENARIOS {
            scenario_config(name).unwrap().validate().unwrap();
        }
        assert!(scenario_config("nope").is_err());
    }
}
