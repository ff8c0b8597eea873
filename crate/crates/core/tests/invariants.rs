use ndarray::{Array1, Array2, ArrayD, IxDyn};
use proptest::prelude::*;

use lateral_lab::estimates::trace_check;
use lateral_lab::forward::{ForwardSolver, PicardOptions, ProblemData};
use lateral_lab::inverse::{bihari_bound, cutoff};
use lateral_lab::io::{read_dense, write_dense};
use lateral_lab::mesh::{EllipticCoefficients, Geometry, Mesh, TimeGrid};
use lateral_lab::nonlocal::KernelSet;
use lateral_lab::presets::{kernels, seeded_rng, smooth_random_field, KernelParams, KernelPreset};
use lateral_lab::report::ReportContext;
use lateral_lab::weights::{PseudoConvexFn, WeightConfig};
use rand::Rng;

fn saturating_problem(n: usize, nt: usize) -> ProblemData {
    let mesh = Mesh::build(Geometry::Interval, n, "right").unwrap();
    let grid = TimeGrid::new(1.0, nt).unwrap();
    let cfg = WeightConfig::new(1.0, 1.0, 1.0, PseudoConvexFn::toward_gamma(&mesh)).unwrap();
    let params = KernelParams { kappa: 0.05, ..Default::default() };
    let ks = kernels(KernelPreset::HypothesisSaturating, &params, &mesh, &grid, &cfg, 0.25, 0.5, 1.5).unwrap();
    let z = Array2::zeros((grid.levels(), mesh.nnodes()));
    ProblemData::new(mesh.clone(), grid, EllipticCoefficients::identity(&mesh), ks, z.clone(), z).unwrap()
}

fn random_data(p: &ProblemData, seed: u64) -> (Array2<f64>, Array2<f64>, Array1<f64>) {
    let mut rng = seeded_rng(seed);
    let f0 = smooth_random_field(&p.mesh, &p.grid, 3, &mut rng);
    let g = smooth_random_field(&p.mesh, &p.grid, 3, &mut rng);
    let u0 = g.row(0).to_owned();
    (f0, g, u0)
}

fn tight() -> PicardOptions {
    PicardOptions { tol: 1e-15, max_sweeps: 200 }
}

#[test]
fn zero_data_gives_zero_trajectory() {
    let p = saturating_problem(21, 40);
    let s = ForwardSolver::new(&p).unwrap();
    let z = Array2::zeros(p.f0.raw_dim());
    let u = s.solve(&z, &z, z.row(0), tight()).unwrap().u;
    assert!(u.iter().all(|v| *v == 0.0));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn solution_map_is_linear(seed in 0u64..1000, a in -2.0f64..2.0, b in -2.0f64..2.0) {
        let p = saturating_problem(17, 24);
        let s = ForwardSolver::new(&p).unwrap();
        let (f1, g1, u1) = random_data(&p, seed);
        let (f2, g2, u2) = random_data(&p, seed + 7919);
        let y1 = s.solve(&f1, &g1, u1.view(), tight()).unwrap().u;
        let y2 = s.solve(&f2, &g2, u2.view(), tight()).unwrap().u;
        let f = &f1 * a + &f2 * b;
        let g = &g1 * a + &g2 * b;
        let u0 = &u1 * a + &u2 * b;
        let y = s.solve(&f, &g, u0.view(), tight()).unwrap().u;
        let combo = &y1 * a + &y2 * b;
        let scale = y1.iter().chain(y2.iter()).fold(0.0f64, |m, v| m.max(v.abs())) * (a.abs() + b.abs());
        let diff = (&y - &combo).iter().fold(0.0f64, |m, v| m.max(v.abs()));
        prop_assert!(diff <= 1e-10 * scale.max(1e-300), "diff {diff} scale {scale}");
    }

    #[test]
    fn trace_lemma_on_random_fields(seed in 0u64..10_000, r0 in 0.0f64..6.0, eps in 0.05f64..3.0, j in 1usize..=2) {
        let mesh = Mesh::build(Geometry::Interval, 21, "right").unwrap();
        let grid = TimeGrid::new(1.0, 40).unwrap();
        let cfg = WeightConfig::new(1.0, 1.0, 1.0, PseudoConvexFn::toward_gamma(&mesh)).unwrap();
        let w = smooth_random_field(&mesh, &grid, 4, &mut seeded_rng(seed));
        let r = trace_check(&w, r0, eps, j, (0.25, 0.5), &cfg, &mesh, &grid, &ReportContext::default()).unwrap();
        prop_assert!(r.margin >= -1e-8 * r.rhs.abs(), "{r:?}");
    }

    #[test]
    fn bihari_bound_is_monotone(seed in 0u64..10_000) {
        let grid = TimeGrid::new(1.0, 200).unwrap();
        let l = grid.levels();
        let mut rng = seeded_rng(seed);
        let a = rng.gen_range(0.0..2.0);
        let b: Vec<f64> = (0..l).map(|_| rng.gen_range(0.0..2.0)).collect();
        let k: Vec<f64> = (0..l).map(|_| rng.gen_range(0.0..2.0)).collect();
        let base = bihari_bound(a, &b, &k, &grid).unwrap();
        let which = rng.gen_range(0..3);
        let bump = rng.gen_range(0.0..1.0);
        let (a2, b2, k2) = match which {
            0 => (a + bump, b.clone(), k.clone()),
            1 => (a, b.iter().map(|v| v + bump).collect(), k.clone()),
            _ => (a, b.clone(), k.iter().map(|v| v + bump).collect()),
        };
        let up = bihari_bound(a2, &b2, &k2, &grid).unwrap();
        for (n, (x, y)) in base.iter().zip(&up).enumerate() {
            prop_assert!(y >= x, "level {n}: {y} < {x}");
        }
    }

    #[test]
    fn cutoff_profile_is_a_monotone_ramp(eps in 0.001f64..0.124, nt in 20usize..400) {
        let grid = TimeGrid::new(2.0, nt).unwrap();
        let c = cutoff(eps, 0.5, &grid).unwrap();
        prop_assert!(c.profile.iter().all(|v| (0.0..=1.0).contains(v)));
        prop_assert!(c.profile.windows(2).all(|w| w[1] >= w[0]));
        prop_assert!(c.derivative.iter().all(|d| *d <= c.sup_derivative * (1.0 + 1e-12)));
        for n in 0..grid.levels() {
            let t = grid.time(n);
            if t <= eps * 2.0 {
                prop_assert_eq!(c.profile[n], 0.0);
            }
            if t >= 4.0 * eps {
                prop_assert_eq!(c.profile[n], 1.0);
            }
        }
    }

    #[test]
    fn dense_files_round_trip(dims in prop::collection::vec(1usize..6, 1..4), seed in 0u64..1000) {
        let mut rng = seeded_rng(seed);
        let len: usize = dims.iter().product();
        let data: Vec<f64> = (0..len).map(|_| rng.gen_range(-1e6..1e6)).collect();
        let a = ArrayD::from_shape_vec(IxDyn(&dims), data).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.bin");
        write_dense(&path, &a).unwrap();
        let b = read_dense(&path).unwrap();
        prop_assert_eq!(a, b);
    }
}

#[test]
fn zero_kernels_skip_picard() {
    let mesh = Mesh::build(Geometry::Interval, 11, "right").unwrap();
    let grid = TimeGrid::new(1.0, 10).unwrap();
    let ks = KernelSet::zero(&mesh, &grid, 0.25, 0.5, 1.5).unwrap();
    let z = Array2::zeros((grid.levels(), mesh.nnodes()));
    let p = ProblemData::new(mesh.clone(), grid, EllipticCoefficients::identity(&mesh), ks, z.clone(), z).unwrap();
    let (f, g, u0) = random_data(&p, 1);
    let sol = ForwardSolver::new(&p).unwrap().solve(&f, &g, u0.view(), tight()).unwrap();
    assert!(sol.l2_history.is_empty());
}
