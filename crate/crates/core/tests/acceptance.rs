//! Acceptance suite: one line per criterion with the measured values.
//!
//! Run with `cargo test -p curveflow --test acceptance`; extra arguments select
//! criteria by substring, e.g. `-- c3 c8`. Failed criteria are reported but only
//! fail the process when `ACCEPTANCE_STRICT` is set.

use std::time::{Duration, Instant};

use curveflow::driver::{run, Initial, Mode, RunConfig, Trajectory};
use curveflow::field::{PhaseLabels, VectorField};
use curveflow::geometry::extract_interfaces;
use curveflow::linalg::BandedCholesky;
use curveflow::mesh::unit_square;
use curveflow::oracles::{
    double_bubble_equilibrium, lagrange_multipliers, three_phase_velocities, two_circle_ode,
    velocity_from_multipliers, MultiphaseStats,
};
use curveflow::scenarios::{
    chain_circles, circle_run, measure_double_bubble, run_scenario, scenario_config, two_circles_config,
    TWO_CIRCLES,
};
use curveflow::simplex::ReferenceFrame;
use curveflow::Point;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

type Check = fn() -> Outcome;

const CRITERIA: [(&str, &str, Check, u64); 11] = [
    ("c1", "reference frames", c1_frames, 1),
    ("c2", "scalar/vector equivalence", c2_equivalence, 60),
    ("c3", "shrinking circle", c3_circle, 60),
    ("c4", "critical ratio", c4_critical_ratio, 600),
    ("c5", "two-circle penalty sweep", c5_two_circles, 300),
    ("c6", "area preservation", c6_area_preservation, 1200),
    ("c7", "double bubble", c7_double_bubble, 600),
    ("c8", "Lagrange oracle consistency", c8_lagrange, 1),
    ("c9", "area gradient", c9_area_gradient, 60),
    ("c10", "transport", c10_transport, 600),
    ("c11", "coalescence", c11_coalescence, 600),
];

fn main() {
    let filters: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (id, name, check, limit) in CRITERIA {
        if !filters.is_empty() && !filters.iter().any(|f| id == f || name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let out = check();
        let elapsed = start.elapsed();
        let in_time = elapsed <= Duration::from_secs(limit);
        let pass = out.pass && in_time;
        if !pass {
            failed += 1;
        }
        println!(
            "[{}] {id} {name}: {} ({:.1}s, limit {limit}s)",
            if pass { "PASS" } else { "FAIL" },
            out.detail,
            elapsed.as_secs_f64()
        );
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        if std::env::var_os("ACCEPTANCE_STRICT").is_some() {
            std::process::exit(1);
        }
    } else {
        println!("all criteria passed");
    }
}

fn c1_frames() -> Outcome {
    let mut worst: f64 = 0.0;
    for k in 2..=8 {
        let f = ReferenceFrame::new(k).unwrap();
        let target = 1.0 / (1.0 - k as f64);
        for i in 0..k {
            let pi = f.vector(i);
            worst = worst.max((pi.iter().map(|x| x * x).sum::<f64>().sqrt() - 1.0).abs());
            for j in i + 1..k {
                let d: f64 = pi.iter().zip(f.vector(j)).map(|(a, b)| a * b).sum();
                worst = worst.max((d - target).abs());
            }
        }
        for c in 0..f.dim() {
            worst = worst.max((0..k).map(|i| f.vector(i)[c]).sum::<f64>().abs());
        }
    }
    outcome(worst <= 1e-12, format!("k=2..8, max defect {worst:.1e} (<= 1e-12)"))
}

/// Thresholding by `k` independent scalar heat flows, each solved with its own factorization.
fn scalar_bmo(mesh: &curveflow::mesh::TriMesh, labels: &PhaseLabels, h: f64, k_inner: usize) -> PhaseLabels {
    let a = mesh.mass().add_scaled(h, mesh.stiffness());
    let chol = BandedCholesky::factor(&a).unwrap();
    let k = labels.k();
    let heat: Vec<Vec<f64>> = (0..k)
        .map(|i| {
            let mut chi: Vec<f64> = labels.iter().map(|l| if l == i { 1.0 } else { 0.0 }).collect();
            for _ in 0..k_inner {
                chi = chol.solve(&mesh.mass().apply(&chi));
            }
            chi
        })
        .collect();
    let out = (0..labels.len())
        .map(|n| {
            let mut best = 0;
            for i in 1..k {
                if heat[i][n] > heat[best][n] {
                    best = i;
                }
            }
            best
        })
        .collect();
    PhaseLabels::new(k, out).unwrap()
}

fn c2_equivalence() -> Outcome {
    let (cells, steps, k_inner, dt) = (40, 5, 3, 1.0 / 320.0);
    let mesh = unit_square(cells).unwrap();
    let mut mismatched = 0;
    let mut runs = 0;
    for k in 2..=5 {
        for seed in 0..10u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed * 31 + k as u64);
            // random blobs: each node takes the phase of its nearest random site
            let sites: Vec<(Point, usize)> = (0..3 * k).map(|s| ([rng.gen(), rng.gen()], s % k)).collect();
            let init: Vec<usize> = mesh
                .nodes()
                .iter()
                .map(|p| {
                    sites
                        .iter()
                        .min_by(|a, b| dist2(a.0, *p).total_cmp(&dist2(b.0, *p)))
                        .unwrap()
                        .1
                })
                .collect();
            let labels = PhaseLabels::new(k, init).unwrap();
            let mut cfg = RunConfig::new(cells, k, vec![], dt, k_inner, steps);
            cfg.initial = Initial::Labels(labels.clone());
            cfg.output_every = 1;
            let traj = run(&cfg).unwrap();
            let mut scalar = labels;
            for s in 1..=steps {
                scalar = scalar_bmo(&mesh, &scalar, dt / k_inner as f64, k_inner);
                let vector = traj.records[s].labels.as_ref().unwrap();
                mismatched += scalar.hamming(vector);
            }
            runs += 1;
        }
    }
    outcome(
        mismatched == 0,
        format!("{runs} runs x {steps} steps on {cells}x{cells}, {mismatched} mismatched node labels"),
    )
}

fn dist2(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)
}

fn c3_circle() -> Outcome {
    let bmo = circle_run(40, 8, Mode::Bmo).unwrap();
    let star = circle_run(40, 8, Mode::BmoStar).unwrap();
    let (eb, es) = (bmo.error.unwrap_or(f64::INFINITY), star.error.unwrap_or(f64::INFINITY));
    outcome(
        eb <= 0.010 && es <= 0.008,
        format!("40x40 / 8: BMO {eb:.4} (<= 0.010), BMO* {es:.4} (<= 0.008)"),
    )
}

fn c4_critical_ratio() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for (cells, sub) in [(80, 32), (80, 64), (160, 32)] {
        let r = circle_run(cells, sub, Mode::Bmo).unwrap();
        pass &= r.stalled;
        parts.push(format!("BMO {cells}/{sub} {}", if r.stalled { "stalls" } else { "moves" }));
    }
    let r = circle_run(160, 256, Mode::BmoStar).unwrap();
    let e = r.error.unwrap_or(f64::INFINITY);
    pass &= !r.stalled && e <= 0.02;
    parts.push(format!("BMO* 160/256 error {e:.4} (<= 0.02)"));
    outcome(pass, parts.join(", "))
}

/// Largest and second-largest fitted circle radius at every record (0 when absent).
fn two_radii(traj: &Trajectory) -> Vec<(f64, f64, f64)> {
    traj.records
        .iter()
        .map(|r| {
            let c = chain_circles(r.segments.as_ref().unwrap(), (0, 1), 3, &[], 0.0);
            (r.time, c.first().map_or(0.0, |c| c.radius), c.get(1).map_or(0.0, |c| c.radius))
        })
        .collect()
}

fn c5_two_circles() -> Outcome {
    let epsilons = [1e0, 1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7];
    let cfg = two_circles_config(1.0);
    let horizon = cfg.dt * cfg.steps as f64;
    let exact = two_circle_ode(TWO_CIRCLES[0].0, TWO_CIRCLES[1].0, horizon, 1e-6).unwrap();
    let mut series = Vec::new();
    let mut sup = Vec::new();
    for &eps in &epsilons {
        let traj = run(&two_circles_config(eps)).unwrap();
        let s = two_radii(&traj);
        let dev = s
            .iter()
            .map(|&(t, a, b)| {
                let (ea, eb) = exact.at(t);
                (a - ea).abs().max((b - eb).abs())
            })
            .fold(0.0, f64::max);
        sup.push(dev);
        series.push(s);
    }
    let monotone = sup.windows(2).all(|w| w[1] <= w[0] + 1e-4);
    let strong_ok = epsilons.iter().zip(&sup).filter(|(e, _)| **e <= 1e-5).all(|(_, d)| *d <= 5e-3);
    let mut pairwise: f64 = 0.0;
    for a in 5..8 {
        for b in a + 1..8 {
            for (x, y) in series[a].iter().zip(&series[b]) {
                pairwise = pairwise.max((x.1 - y.1).abs()).max((x.2 - y.2).abs());
            }
        }
    }
    let list: Vec<String> = epsilons.iter().zip(&sup).map(|(e, d)| format!("{e:.0e}:{d:.4}")).collect();
    outcome(
        monotone && strong_ok && pairwise <= 1e-3,
        format!(
            "sup deviation {} (monotone {monotone}, <= 5e-3 for eps <= 1e-5: {strong_ok}), eps 1e-5..1e-7 pairwise {pairwise:.1e} (<= 1e-3)",
            list.join(" ")
        ),
    )
}

fn c6_area_preservation() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for name in ["triple_bubble", "nine_phases"] {
        let start = Instant::now();
        let traj = run_scenario(name).unwrap();
        let drift = traj.max_drift();
        pass &= drift <= 1e-3;
        parts.push(format!(
            "{name} max drift {drift:.1e} over {} steps ({:.0}s)",
            traj.config.steps,
            start.elapsed().as_secs_f64()
        ));
    }
    outcome(pass, format!("{} (<= 1e-3)", parts.join(", ")))
}

fn c7_double_bubble() -> Outcome {
    let traj = run_scenario("double_bubble").unwrap();
    let m = measure_double_bubble(&traj).unwrap();
    // the oracle takes the areas the run was constrained to
    let t = &traj.targets;
    let oracle = double_bubble_equilibrium(t[1].unwrap(), t[2].unwrap()).unwrap();
    let rel = |a: f64, b: f64| ((a - b) / b).abs();
    let (e1, e2, e12) = (rel(m.r1, oracle.r1), rel(m.r2, oracle.r2), rel(m.r12, oracle.r12));
    let resid = m.radii_residual();
    let angle_dev = m
        .angles
        .iter()
        .flat_map(|a| a.iter().map(|x| (x - 120.0).abs()))
        .fold(0.0, f64::max);
    let angles: Vec<String> = m.angles.iter().map(|a| format!("{:.1}/{:.1}/{:.1}", a[0], a[1], a[2])).collect();
    outcome(
        resid <= 0.1 && e1.max(e2).max(e12) <= 0.05 && !m.angles.is_empty() && angle_dev <= 5.0,
        format!(
            "r1 {:.4} r2 {:.4} r12 {:.4} vs oracle {:.4} {:.4} {:.4} (rel {e1:.3} {e2:.3} {e12:.3} <= 0.05), radii residual {resid:.3} (<= 0.1), angles {} (120 +- 5)",
            m.r1,
            m.r2,
            m.r12,
            oracle.r1,
            oracle.r2,
            oracle.r12,
            angles.join(", ")
        ),
    )
}

fn c8_lagrange() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst: f64 = 0.0;
    let mut worst_reduced: f64 = 0.0;
    for _ in 0..1000 {
        let mut s = MultiphaseStats::new(3);
        for (i, j) in [(0, 1), (0, 2), (1, 2)] {
            s.set(i, j, rng.gen_range(0.1..2.0), rng.gen_range(-5.0..5.0));
        }
        let lambda = lagrange_multipliers(&s).unwrap();
        let kappa = rng.gen_range(-5.0..5.0);
        for pair in [(0, 1), (0, 2), (1, 2)] {
            let closed = three_phase_velocities(&s, kappa, pair).unwrap();
            let linear = velocity_from_multipliers(&s, &lambda, kappa, pair);
            worst = worst.max((closed - linear).abs() / linear.abs().max(1.0));
        }
        // phases 0 and 1 separated: each interface with phase 2 is a two-phase problem
        s.set(0, 1, 0.0, 0.0);
        for (i, pair) in [(0, (0, 2)), (1, (1, 2))] {
            let v = three_phase_velocities(&s, kappa, pair).unwrap();
            let two_phase = -kappa + s.boundary_curvature(i) / s.boundary_length(i);
            worst_reduced = worst_reduced.max((v - two_phase).abs() / two_phase.abs().max(1.0));
        }
    }
    outcome(
        worst <= 1e-12 && worst_reduced <= 1e-12,
        format!("1000 configurations: closed form vs linear system {worst:.1e}, L12 = 0 vs two-phase {worst_reduced:.1e} (<= 1e-12)"),
    )
}

fn c9_area_gradient() -> Outcome {
    let mesh = unit_square(12).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let (mut tested, mut flat, mut degenerate_skips) = (0, 0, 0);
    let mut worst: f64 = 0.0;
    let step = 1e-6;
    while tested < 100 {
        let k = rng.gen_range(2..=4);
        let frame = ReferenceFrame::new(k).unwrap();
        // each phase scores an affine function vanishing at a random point of the domain, plus noise
        let coef: Vec<[f64; 3]> = (0..k)
            .map(|_| {
                let (a, b) = (rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
                let (cx, cy): (f64, f64) = (rng.gen_range(0.2..0.8), rng.gen_range(0.2..0.8));
                [-(a * cx + b * cy), a, b]
            })
            .collect();
        let comps: Vec<Vec<f64>> = (0..frame.dim())
            .map(|c| {
                mesh.nodes()
                    .iter()
                    .map(|p| {
                        (0..k)
                            .map(|i| (coef[i][0] + coef[i][1] * p[0] + coef[i][2] * p[1]) * frame.vector(i)[c])
                            .sum::<f64>()
                    })
                    .collect()
            })
            .collect();
        let mut u = VectorField::new(frame.clone(), comps).unwrap();
        for c in u.components_mut() {
            c.iter_mut().for_each(|x| *x += rng.gen_range(-0.05..0.05));
        }
        let phase = rng.gen_range(0..k);
        let (grad, degenerate) = curveflow::dmf::area_gradient(&mesh, &u, phase).unwrap();
        let g = extract_interfaces(&mesh, &u).unwrap();
        let scale = grad.iter().flatten().fold(0.0_f64, |m, x| m.max(x.abs()));
        if degenerate > 0 {
            degenerate_skips += 1;
            continue;
        }
        if scale == 0.0 {
            // the phase does not touch any interface
            flat += 1;
            continue;
        }
        let mut nodes: Vec<usize> = g.interface_elements().iter().flat_map(|ie| mesh.element(ie.element)).collect();
        nodes.sort_unstable();
        nodes.dedup();
        let area_at = |c: usize, n: usize, delta: f64| {
            let mut v = u.clone();
            v.components_mut()[c][n] += delta;
            extract_interfaces(&mesh, &v).unwrap().areas()[phase]
        };
        for &n in &nodes {
            for c in 0..frame.dim() {
                let fd = (area_at(c, n, step) - area_at(c, n, -step)) / (2.0 * step);
                worst = worst.max((fd - grad[c][n]).abs() / scale);
            }
        }
        tested += 1;
    }
    outcome(
        worst <= 1e-5,
        format!(
            "{tested} configurations ({degenerate_skips} with degenerate crossings and {flat} away from every interface skipped), max relative error {worst:.1e} (<= 1e-5)"
        ),
    )
}

/// Lowest and highest interface point of a snapshot.
fn vertical_extent(r: &curveflow::driver::StepRecord) -> Option<(f64, f64)> {
    let seg = r.segments.as_ref()?;
    let ys = seg.iter().flat_map(|s| [s.start[1], s.end[1]]);
    Some(ys.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), y| (lo.min(y), hi.max(y))))
}

fn c10_transport() -> Outcome {
    let wide = run_scenario("rising_bubble_wide").unwrap();
    let dx = wide.mesh.spacing();
    let snaps: Vec<(f64, f64)> = wide.records.iter().filter_map(vertical_extent).collect();
    let n = snaps.len();
    let attached = snaps[n - 1].0 <= 1e-12;
    // stationary: the top of the bubble has settled over the last three snapshots
    let settle = (snaps[n - 1].1 - snaps[n - 3].1).abs();
    let wide_ok = attached && settle <= 0.1 * dx && wide.max_drift() <= 1e-3;

    let tall = run_scenario("rising_bubble_tall").unwrap();
    let detach = tall
        .records
        .iter()
        .filter(|r| r.segments.is_some())
        .find(|r| vertical_extent(r).unwrap().0 > 1e-12)
        .map(|r| r.step);
    let last = tall.last();
    let circles = chain_circles(last.segments.as_ref().unwrap(), (0, 1), 3, &[], 0.0);
    let g = &tall.final_geometry;
    let variance = circles
        .first()
        .map(|c| {
            let pts: Vec<Point> = g.segments().iter().flat_map(|s| [s.start, s.end]).collect();
            c.max_residual(&pts) / c.radius
        })
        .unwrap_or(f64::INFINITY);
    let tall_ok = detach.is_some() && variance <= 0.05 && circles.len() == 1 && tall.max_drift() <= 1e-3;
    outcome(
        wide_ok && tall_ok,
        format!(
            "wide bubble attached {attached}, top moved {settle:.1e} over the last 20 steps (<= {:.1e}), drift {:.1e}; tall bubble detached at step {}, final radius variance {:.3} (<= 0.05), drift {:.1e} (<= 1e-3)",
            0.1 * dx,
            wide.max_drift(),
            detach.map_or("-".to_string(), |s| s.to_string()),
            variance,
            tall.max_drift()
        ),
    )
}

fn c11_coalescence() -> Outcome {
    let cfg = scenario_config("coalesce_2p").unwrap();
    let traj = run(&cfg).unwrap();
    let dx = traj.mesh.spacing();
    let first = traj.records[0].components[1];
    let merged = traj.records.iter().position(|r| r.components[1] == 1);
    let g = &traj.final_geometry;
    let circles = chain_circles(g.segments(), (0, 1), 3, &[], 0.0);
    let pts: Vec<Point> = g.segments().iter().flat_map(|s| [s.start, s.end]).collect();
    let residual = circles.first().map_or(f64::INFINITY, |c| c.max_residual(&pts));
    let radii: Vec<f64> = traj.records.iter().rev().take(20).filter_map(|r| r.fitted.map(|c| c.radius)).collect();
    let spread = radii.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - radii.iter().cloned().fold(f64::INFINITY, f64::min);
    let ok = first == 2
        && merged.is_some()
        && traj.last().components[1] == 1
        && circles.len() == 1
        && residual <= 2.0 * dx
        && spread <= 0.1 * dx;
    outcome(
        ok,
        format!(
            "components {first} -> 1 at step {}, final circle residual {residual:.4} (<= {:.4}), radius change over last 20 steps {spread:.1e} (<= {:.1e})",
            merged.map_or("-".to_string(), |s| s.to_string()),
            2.0 * dx,
            0.1 * dx
        ),
    )
}
