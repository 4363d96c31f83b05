use curveflow::dmf::heat_step;
use curveflow::driver::{run, Initial, Mode, RunConfig};
use curveflow::field::{threshold, PhaseLabels, VectorField};
use curveflow::geometry::extract_interfaces;
use curveflow::mesh::{unit_square, TriMesh};
use curveflow::oracles::{double_bubble_equilibrium, lagrange_multipliers, two_circle_ode, MultiphaseStats};
use curveflow::scenarios::circle_config;
use curveflow::ReferenceFrame;
use proptest::prelude::*;

const CELLS: usize = 8;
const NODES: usize = (CELLS + 1) * (CELLS + 1);

fn mesh() -> TriMesh {
    unit_square(CELLS).unwrap()
}

/// `u(n) = sum_i s_i(n) p_{perm[i]}`.
fn field(k: usize, scores: &[f64], perm: &[usize]) -> VectorField {
    let frame = ReferenceFrame::new(k).unwrap();
    let comps = (0..frame.dim())
        .map(|c| (0..NODES).map(|n| (0..k).map(|i| scores[i * NODES + n] * frame.vector(perm[i])[c]).sum()).collect())
        .collect();
    VectorField::new(frame, comps).unwrap()
}

fn scores(k: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, k * NODES)
}

fn k_and_scores() -> impl Strategy<Value = (usize, Vec<f64>)> {
    (2usize..=5).prop_flat_map(|k| (Just(k), scores(k)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn frame_vertices_are_equidistant(k in 2usize..=8) {
        let f = ReferenceFrame::new(k).unwrap();
        prop_assert!(f.invariant_defect() <= 1e-12);
        let d = (2.0 * k as f64 / (k as f64 - 1.0)).sqrt();
        for i in 0..k {
            for j in i + 1..k {
                let dij = f.vector(i).iter().zip(f.vector(j)).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
                prop_assert!((dij - d).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn stiffness_is_positive_semidefinite(x in prop::collection::vec(-1.0f64..1.0, NODES), c in -5.0f64..5.0) {
        let m = mesh();
        prop_assert!(m.stiffness().quad_form(&x) >= -1e-12);
        let shifted: Vec<f64> = x.iter().map(|v| v + c).collect();
        prop_assert!((m.stiffness().quad_form(&shifted) - m.stiffness().quad_form(&x)).abs() <= 1e-9);
    }

    #[test]
    fn affine_functions_have_exact_element_gradients(a in -3.0f64..3.0, b in -3.0f64..3.0, c in -3.0f64..3.0) {
        let m = mesh();
        let f = |p: [f64; 2]| a + b * p[0] + c * p[1];
        for e in 0..m.element_count() {
            let d = m.element_data(e);
            let mut g = [0.0; 2];
            for (v, &n) in m.element(e).iter().enumerate() {
                g[0] += f(m.node(n)) * d.gradients[v][0];
                g[1] += f(m.node(n)) * d.gradients[v][1];
            }
            prop_assert!((g[0] - b).abs() <= 1e-10 && (g[1] - c).abs() <= 1e-10);
        }
    }

    #[test]
    fn threshold_ignores_positive_scaling((k, s) in k_and_scores(), scale in 1e-3f64..1e3) {
        let perm: Vec<usize> = (0..k).collect();
        let u = field(k, &s, &perm);
        let scaled = u.combine(scale, &u, 0.0);
        prop_assert_eq!(threshold(&u), threshold(&scaled));
    }

    #[test]
    fn heat_step_is_linear((k, s) in k_and_scores(), t in scores(5), a in -2.0f64..2.0, b in -2.0f64..2.0) {
        let m = mesh();
        let perm: Vec<usize> = (0..k).collect();
        let (u, v) = (field(k, &s, &perm), field(k, &t[..k * NODES], &perm));
        let h = 1e-3;
        let lhs = heat_step(&m, &u.combine(a, &v, b), h).unwrap();
        let rhs = heat_step(&m, &u, h).unwrap().combine(a, &heat_step(&m, &v, h).unwrap(), b);
        prop_assert!(lhs.max_abs_diff(&rhs) <= 1e-9);
    }

    #[test]
    fn phase_areas_partition_the_domain((k, s) in k_and_scores()) {
        let m = mesh();
        let perm: Vec<usize> = (0..k).collect();
        let g = extract_interfaces(&m, &field(k, &s, &perm)).unwrap();
        prop_assert!((g.areas().iter().sum::<f64>() - 1.0).abs() <= 1e-10);
        for ie in g.interface_elements() {
            let total: f64 = ie.polygons.iter().map(|p| p.area()).sum();
            prop_assert!((total - m.element_data(ie.element).area).abs() <= 1e-12);
        }
    }

    #[test]
    fn areas_follow_a_relabeling((k, s) in k_and_scores(), seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let m = mesh();
        let ident: Vec<usize> = (0..k).collect();
        let mut perm = ident.clone();
        perm.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
        let a = extract_interfaces(&m, &field(k, &s, &ident)).unwrap();
        let b = extract_interfaces(&m, &field(k, &s, &perm)).unwrap();
        for i in 0..k {
            prop_assert!((a.areas()[i] - b.areas()[perm[i]]).abs() <= 1e-12);
        }
    }

    #[test]
    fn lagrange_multipliers_scale_with_curvature(
        data in prop::collection::vec((0.1f64..2.0, -5.0f64..5.0), 3),
        c in -4.0f64..4.0,
    ) {
        let mut s = MultiphaseStats::new(3);
        let mut t = MultiphaseStats::new(3);
        for ((i, j), (len, kappa)) in [(0, 1), (0, 2), (1, 2)].into_iter().zip(&data) {
            s.set(i, j, *len, *kappa);
            t.set(i, j, *len, c * kappa);
        }
        let (ls, lt) = (lagrange_multipliers(&s).unwrap(), lagrange_multipliers(&t).unwrap());
        for (a, b) in ls.iter().zip(&lt) {
            prop_assert!((c * a - b).abs() <= 1e-10 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn double_bubble_swap_symmetry(a1 in 0.01f64..0.2, a2 in 0.01f64..0.2) {
        prop_assume!((a1 - a2).abs() > 1e-4);
        let x = double_bubble_equilibrium(a1, a2).unwrap();
        let y = double_bubble_equilibrium(a2, a1).unwrap();
        prop_assert!((x.r1 - y.r2).abs() <= 1e-8 && (x.r2 - y.r1).abs() <= 1e-8);
        prop_assert!((1.0 / x.r12 + 1.0 / y.r12).abs() <= 1e-6 * (1.0 / x.r12).abs().max(1.0));
    }

    #[test]
    fn two_circle_ode_conserves_area(ra in 0.15f64..0.3, ratio in 0.3f64..0.95) {
        let rb = ra * ratio;
        let sol = two_circle_ode(ra, rb, 0.02, 1e-5).unwrap();
        let area0 = ra * ra + rb * rb;
        for ((r1, r2), _) in sol.r1.iter().zip(&sol.r2).zip(&sol.times) {
            if *r2 < 10.0 * 1e-5f64.sqrt() {
                break;
            }
            prop_assert!(((r1 * r1 + r2 * r2) - area0).abs() <= 1e-8 * area0);
        }
    }
}

fn voronoi_labels(mesh: &TriMesh, k: usize, sites: &[([f64; 2], usize)]) -> PhaseLabels {
    let l = mesh
        .nodes()
        .iter()
        .map(|p| {
            let d = |q: [f64; 2]| (q[0] - p[0]).powi(2) + (q[1] - p[1]).powi(2);
            sites.iter().min_by(|a, b| d(a.0).total_cmp(&d(b.0))).unwrap().1
        })
        .collect();
    PhaseLabels::new(k, l).unwrap()
}

#[test]
fn identical_configs_give_identical_trajectories() {
    let mesh = unit_square(20).unwrap();
    let labels = voronoi_labels(&mesh, 3, &[([0.2, 0.3], 0), ([0.7, 0.6], 1), ([0.4, 0.8], 2), ([0.8, 0.1], 0)]);
    let mut c = RunConfig::new(20, 3, vec![], 1e-3, 3, 6);
    c.initial = Initial::Labels(labels);
    c.mode = Mode::BmoStar;
    c.output_every = 1;
    let (a, b) = (run(&c).unwrap(), run(&c).unwrap());
    assert_eq!(a.records, b.records);
}

#[test]
fn unconstrained_length_does_not_increase() {
    for mode in [Mode::Bmo, Mode::BmoStar] {
        let t = run(&circle_config(40, 4, mode)).unwrap();
        for w in t.records.windows(2) {
            if w[1].pairs.is_empty() {
                break;
            }
            assert!(
                w[1].interface_length <= w[0].interface_length + 1e-8,
                "{mode:?} step {}: {} -> {}",
                w[1].step,
                w[0].interface_length,
                w[1].interface_length
            );
        }
    }
}
