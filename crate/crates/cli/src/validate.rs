//! Oracle cross-checks behind `curveflow validate`.

use std::time::Instant;

use curveflow::driver::{run, Initial, RunConfig, Trajectory};
use curveflow::field::{PhaseLabels, VectorField};
use curveflow::geometry::extract_interfaces;
use curveflow::linalg::BandedCholesky;
use curveflow::mesh::{unit_square, TriMesh};
use curveflow::oracles::{double_bubble_equilibrium, two_circle_ode};
use curveflow::scenarios::{chain_circles, measure_double_bubble, run_scenario, two_circles_config, TWO_CIRCLES};
use curveflow::simplex::ReferenceFrame;
use curveflow::Point;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const CHECKS: [&str; 6] = [
    "frames",
    "equivalence",
    "area_gradient",
    "two_circles",
    "double_bubble",
    "junction_angles",
];

#[derive(Debug, Clone, Default)]
pub struct ValidateOptions {
    /// Substring selecting checks by name.
    pub filter: Option<String>,
    /// Test hook: perturb one frame vector before checking the invariants.
    pub perturb_frame: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

impl std::fmt::Display for CheckResult {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "[{}] {}: {}", if self.pass { "PASS" } else { "FAIL" }, self.name, self.detail)
    }
}

fn result(name: &'static str, pass: bool, detail: String) -> CheckResult {
    CheckResult { name, pass, detail }
}

fn failed(name: &'static str, e: impl std::fmt::Display) -> CheckResult {
    result(name, false, format!("error: {e}"))
}

/// Runs the selected checks, calling `report` as each one finishes.
pub fn cmd_validate(opts: &ValidateOptions, mut report: impl FnMut(&CheckResult)) -> Vec<CheckResult> {
    let selected: Vec<&'static str> = CHECKS
        .iter()
        .copied()
        .filter(|c| opts.filter.as_deref().map_or(true, |f| c.contains(f)))
        .collect();
    let mut bubble: Option<curveflow::Result<Trajectory>> = None;
    let mut out = Vec::new();
    for name in selected {
        let start = Instant::now();
        let mut r = match name {
            "frames" => check_frames(opts.perturb_frame),
            "equivalence" => check_equivalence(),
            "area_gradient" => check_area_gradient(),
            "two_circles" => check_two_circles(),
            _ => {
                let traj = bubble.get_or_insert_with(|| run_scenario("double_bubble"));
                match traj {
                    Err(e) => failed(name, e),
                    Ok(t) if name == "double_bubble" => check_double_bubble(t),
                    Ok(t) => check_junction_angles(t),
                }
            }
        };
        r.detail.push_str(&format!(" [{:.1}s]", start.elapsed().as_secs_f64()));
        report(&r);
        out.push(r);
    }
    out
}

fn check_frames(perturb: bool) -> CheckResult {
    let mut worst: f64 = 0.0;
    for k in 2..=8 {
        let frame = match ReferenceFrame::new(k) {
            Ok(f) => f,
            Err(e) => return failed("frames", e),
        };
        let mut v: Vec<Vec<f64>> = (0..k).map(|i| frame.vector(i).to_vec()).collect();
        if perturb {
            v[0][0] += 1e-3;
        }
        let target = 1.0 / (1.0 - k as f64);
        for i in 0..k {
            worst = worst.max((v[i].iter().map(|x| x * x).sum::<f64>().sqrt() - 1.0).abs());
            for j in i + 1..k {
                let d: f64 = v[i].iter().zip(&v[j]).map(|(a, b)| a * b).sum();
                worst = worst.max((d - target).abs());
            }
        }
        for c in 0..frame.dim() {
            worst = worst.max(v.iter().map(|p| p[c]).sum::<f64>().abs());
        }
    }
    result(
        "frames",
        worst <= 1e-12,
        format!("k = 2..8, unit norm / pairwise dot 1/(1-k) / zero sum, max defect {worst:.1e} (<= 1e-12)"),
    )
}

/// `k` independent scalar heat flows, thresholded by argmax (ties to the lower phase).
fn scalar_bmo(mesh: &TriMesh, chol: &BandedCholesky, labels: &PhaseLabels, k_inner: usize) -> PhaseLabels {
    let k = labels.k();
    let heat: Vec<Vec<f64>> = (0..k)
        .map(|i| {
            let mut chi: Vec<f64> = labels.iter().map(|l| f64::from(u8::from(l == i))).collect();
            for _ in 0..k_inner {
                chi = chol.solve(&mesh.mass().apply(&chi));
            }
            chi
        })
        .collect();
    let out = (0..labels.len())
        .map(|n| (1..k).fold(0, |best, i| if heat[i][n] > heat[best][n] { i } else { best }))
        .collect();
    PhaseLabels::new(k, out).expect("labels in range")
}

fn check_equivalence() -> CheckResult {
    const NAME: &str = "equivalence";
    let (cells, steps, k_inner, dt) = (40, 4, 3, 1.0 / 320.0);
    let run_one = |k: usize, seed: u64| -> curveflow::Result<usize> {
        let mesh = unit_square(cells)?;
        let a = mesh.mass().add_scaled(dt / k_inner as f64, mesh.stiffness());
        let chol = BandedCholesky::factor(&a)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sites: Vec<(Point, usize)> = (0..3 * k).map(|s| ([rng.gen(), rng.gen()], s % k)).collect();
        let init = mesh
            .nodes()
            .iter()
            .map(|p| {
                let d = |q: Point| (q[0] - p[0]).powi(2) + (q[1] - p[1]).powi(2);
                sites.iter().min_by(|a, b| d(a.0).total_cmp(&d(b.0))).map_or(0, |s| s.1)
            })
            .collect();
        let labels = PhaseLabels::new(k, init)?;
        let mut cfg = RunConfig::new(cells, k, vec![], dt, k_inner, steps);
        cfg.initial = Initial::Labels(labels.clone());
        cfg.output_every = 1;
        let traj = run(&cfg)?;
        let mut scalar = labels;
        let mut mismatched = 0;
        for r in &traj.records[1..] {
            scalar = scalar_bmo(&mesh, &chol, &scalar, k_inner);
            mismatched += r.labels.as_ref().map_or(usize::MAX / 2, |v| scalar.hamming(v));
        }
        Ok(mismatched)
    };
    let mut total = 0;
    let mut runs = 0;
    for k in 2..=4 {
        for seed in 0..3 {
            match run_one(k, 1000 + seed * 7 + k as u64) {
                Ok(m) => total += m,
                Err(e) => return failed(NAME, e),
            }
            runs += 1;
        }
    }
    result(
        NAME,
        total == 0,
        format!("{runs} random {cells}x{cells} runs x {steps} steps, vector BMO vs scalar heat flows: {total} mismatched labels"),
    )
}

fn check_area_gradient() -> CheckResult {
    const NAME: &str = "area_gradient";
    let mesh = match unit_square(10) {
        Ok(m) => m,
        Err(e) => return failed(NAME, e),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let step = 1e-6;
    let (mut tested, mut attempts) = (0, 0);
    let mut worst: f64 = 0.0;
    while tested < 20 && attempts < 200 {
        attempts += 1;
        let k = rng.gen_range(2..=4);
        let frame = ReferenceFrame::new(k).expect("k >= 2");
        // affine scores vanishing inside the domain, so that the phases compete
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
                        let s: f64 = (0..k)
                            .map(|i| (coef[i][0] + coef[i][1] * p[0] + coef[i][2] * p[1]) * frame.vector(i)[c])
                            .sum();
                        s + rng.gen_range(-0.05..0.05)
                    })
                    .collect()
            })
            .collect();
        let u = VectorField::new(frame.clone(), comps).expect("matching sizes");
        let phase = rng.gen_range(0..k);
        let Ok((grad, degenerate)) = curveflow::dmf::area_gradient(&mesh, &u, phase) else {
            continue;
        };
        let Ok(g) = extract_interfaces(&mesh, &u) else { continue };
        let scale = grad.iter().flatten().fold(0.0_f64, |m, x| m.max(x.abs()));
        if degenerate > 0 || scale == 0.0 {
            continue;
        }
        let mut nodes: Vec<usize> = g.interface_elements().iter().flat_map(|ie| mesh.element(ie.element)).collect();
        nodes.sort_unstable();
        nodes.dedup();
        let area_at = |c: usize, n: usize, delta: f64| {
            let mut v = u.clone();
            v.components_mut()[c][n] += delta;
            extract_interfaces(&mesh, &v).map(|g| g.areas()[phase]).unwrap_or(f64::NAN)
        };
        for &n in &nodes {
            for c in 0..frame.dim() {
                let fd = (area_at(c, n, step) - area_at(c, n, -step)) / (2.0 * step);
                let e = (fd - grad[c][n]).abs() / scale;
                worst = worst.max(if e.is_nan() { f64::INFINITY } else { e });
            }
        }
        tested += 1;
    }
    result(
        NAME,
        tested == 20 && worst <= 1e-5,
        format!("{tested} random fields, analytic vs central differences, max relative error {worst:.1e} (<= 1e-5)"),
    )
}

fn check_two_circles() -> CheckResult {
    const NAME: &str = "two_circles";
    let cfg = two_circles_config(1e-6);
    let horizon = cfg.dt * cfg.steps as f64;
    let exact = match two_circle_ode(TWO_CIRCLES[0].0, TWO_CIRCLES[1].0, horizon, 1e-6) {
        Ok(x) => x,
        Err(e) => return failed(NAME, e),
    };
    let traj = match run(&cfg) {
        Ok(t) => t,
        Err(e) => return failed(NAME, e),
    };
    let mut dev: f64 = 0.0;
    for r in &traj.records {
        let Some(seg) = &r.segments else { continue };
        let c = chain_circles(seg, (0, 1), 3, &[], 0.0);
        let (a, b) = (c.first().map_or(0.0, |c| c.radius), c.get(1).map_or(0.0, |c| c.radius));
        let (ea, eb) = exact.at(r.time);
        dev = dev.max((a - ea).abs()).max((b - eb).abs());
    }
    let (ea, eb) = exact.at(horizon);
    result(
        NAME,
        dev <= 5e-3,
        format!(
            "eps = 1e-6 over t <= {horizon}: RK4 radii at the end {ea:.4} / {eb:.4}, max deviation {dev:.4} (<= 5e-3)"
        ),
    )
}

fn check_double_bubble(traj: &Trajectory) -> CheckResult {
    const NAME: &str = "double_bubble";
    let m = match measure_double_bubble(traj) {
        Ok(m) => m,
        Err(e) => return failed(NAME, e),
    };
    let (Some(a1), Some(a2)) = (traj.targets[1], traj.targets[2]) else {
        return result(NAME, false, "bubble phases are not constrained".into());
    };
    let oracle = match double_bubble_equilibrium(a1, a2) {
        Ok(o) => o,
        Err(e) => return failed(NAME, e),
    };
    let rel = |a: f64, b: f64| ((a - b) / b).abs();
    let worst = rel(m.r1, oracle.r1).max(rel(m.r2, oracle.r2)).max(rel(m.r12, oracle.r12));
    let resid = m.radii_residual();
    result(
        NAME,
        worst <= 0.05 && resid <= 0.1,
        format!(
            "r1 {:.4} r2 {:.4} r12 {:.4} vs equilibrium {:.4} {:.4} {:.4} (max rel {worst:.3} <= 0.05), |1/r1 - 1/r2 - 1/r12| r12 = {resid:.3} (<= 0.1)",
            m.r1, m.r2, m.r12, oracle.r1, oracle.r2, oracle.r12
        ),
    )
}

fn check_junction_angles(traj: &Trajectory) -> CheckResult {
    const NAME: &str = "junction_angles";
    let m = match measure_double_bubble(traj) {
        Ok(m) => m,
        Err(e) => return failed(NAME, e),
    };
    let dev = m.angles.iter().flatten().map(|a| (a - 120.0).abs()).fold(0.0, f64::max);
    let list: Vec<String> = m.angles.iter().map(|a| format!("{:.1}/{:.1}/{:.1}", a[0], a[1], a[2])).collect();
    result(
        NAME,
        !m.angles.is_empty() && dev <= 5.0,
        format!("double-bubble triple junction angles {} deg (120 +- 5)", list.join(", ")),
    )
}
