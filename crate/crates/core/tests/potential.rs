use std::f64::consts::PI;

use petallab_core::compacts::CompactSet;
use petallab_core::domains::KoenigsDomain;
use petallab_core::energy::{self, project_simplex, simplex_qp};
use petallab_core::fekete::{self, FeketeConfig, LogKernel, Metric};
use petallab_core::hypgeom;
use petallab_core::kernel::GreenSource;
use petallab_core::oracles::ClosedForm;
use petallab_core::wos::WosConfig;
use petallab_core::Point64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn p(re: f64, im: f64) -> Point64 {
    Point64::new(re, im)
}

fn oracle(form: ClosedForm<f64>, t: f64) -> GreenSource<f64> {
    GreenSource::Oracle { form, t }
}

#[test]
fn three_diameter_of_the_unit_interval() {
    let grid: Vec<Point64> = (0..=32).map(|i| p(-1.0 + i as f64 / 16.0, 0.0)).collect();
    let kernel = LogKernel::euclidean(&grid);
    let res = fekete::n_diameter_on(&kernel, 3, &FeketeConfig::default()).unwrap();
    assert!(
        (res.diameter - 2f64.powf(1.0 / 3.0)).abs() < 1e-12,
        "{}",
        res.diameter
    );
    assert_eq!(res.tuple, vec![p(-1.0, 0.0), p(0.0, 0.0), p(1.0, 0.0)]);
}

#[test]
fn diameters_never_grow_with_n() {
    let k = CompactSet::disk(p(0.0, 1.5), 0.4).unwrap();
    let cfg = FeketeConfig::default();
    let metrics = [
        Metric::Euclidean,
        Metric::Hyperbolic(oracle(ClosedForm::Strip { y0: 0.0, y1: PI }, 0.0)),
    ];
    for metric in &metrics {
        let d: Vec<f64> = (2..=6)
            .map(|n| fekete::n_diameter(&k, n, metric, 32, &cfg).unwrap().diameter)
            .collect();
        for w in d.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-9), "{metric:?}: {d:?}");
        }
    }
}

#[test]
fn fekete_tuple_beats_random_tuples() {
    let k = CompactSet::polyline(vec![p(-1.0, 1.0), p(0.0, 2.0), p(1.5, 1.2)]).unwrap();
    let src = oracle(ClosedForm::HalfPlane { y0: 0.0 }, 0.0);
    let kernel = LogKernel::hyperbolic(&k.discretize(32).unwrap().candidates, &src).unwrap();
    let n = 4;
    let best = fekete::n_diameter_on(&kernel, n, &FeketeConfig::default()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let m = kernel.points().len();
    for _ in 0..1000 {
        let mut idx: Vec<usize> = Vec::new();
        while idx.len() < n {
            let i = rng.random_range(0..m);
            if !idx.contains(&i) {
                idx.push(i);
            }
        }
        let mut s = 0.0;
        for a in 0..n {
            for b in a + 1..n {
                s += kernel.log_k(idx[a], idx[b]);
            }
        }
        assert!(fekete::diameter_from_sum(s, n) <= best.diameter * (1.0 + 1e-12));
    }
}

#[test]
fn disk_capacity_and_uniform_weights() {
    let k = CompactSet::disk(p(0.0, 0.0), 0.5).unwrap();
    let eq = energy::equilibrium_with(&k, &oracle(ClosedForm::Disk, 0.0), 64).unwrap();
    let exact = 2.0 * PI / 2f64.ln();
    assert!((eq.capacity / exact - 1.0).abs() < 0.02, "{}", eq.capacity);
    let uniform = 1.0 / 64.0;
    assert!(eq.weights.iter().all(|w| (w - uniform).abs() < 1e-3));
    assert!((eq.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
}

#[test]
fn caph_of_a_disk_matches_its_energy() {
    let k = CompactSet::disk(p(0.0, 0.0), 0.5).unwrap();
    let src = oracle(ClosedForm::Disk, 0.0);
    let caph = fekete::caph_estimate(&k, &src, 12, 64, &FeketeConfig::default()).unwrap();
    assert!((0.49..=0.51).contains(&caph.value), "{}", caph.value);
    let eq = energy::equilibrium_with(&k, &src, 64).unwrap();
    assert!((caph.value / (-eq.energy).exp() - 1.0).abs() < 0.02);
}

#[test]
fn smaller_domain_has_smaller_green_and_larger_capacity() {
    let k = CompactSet::disk(p(0.0, 1.5), 0.3).unwrap();
    let nodes = k.discretize(32).unwrap().boundary_nodes;
    let strip = oracle(ClosedForm::Strip { y0: 0.0, y1: PI }, 0.0);
    let half = oracle(ClosedForm::HalfPlane { y0: 0.0 }, 0.0);
    let (gs, _) = energy::green_matrix(&nodes, &strip).unwrap();
    let (gh, _) = energy::green_matrix(&nodes, &half).unwrap();
    for i in 0..nodes.len() {
        for j in 0..nodes.len() {
            if i != j {
                assert!(gs[i][j] <= gh[i][j] + 1e-12);
            }
        }
    }
    let cs = energy::equilibrium_with(&k, &strip, 32).unwrap().capacity;
    let ch = energy::equilibrium_with(&k, &half, 32).unwrap().capacity;
    assert!(cs >= ch, "{cs} < {ch}");
}

#[test]
fn hyperbolic_area_of_a_disk_in_a_strip() {
    let k = CompactSet::disk(p(0.0, PI / 2.0), 0.5).unwrap();
    let s = KoenigsDomain::strip(0.0, PI).unwrap();
    let a = hypgeom::hyp_area(&k, &s, 0.0, 64, &WosConfig::default()).unwrap();
    // Polar quadrature of λ² = 1/(4 sin² y) over the disk.
    let n = 400;
    let mut exact = 0.0;
    for i in 0..n {
        let r = 0.5 * (i as f64 + 0.5) / n as f64;
        for j in 0..n {
            let th = 2.0 * PI * (j as f64 + 0.5) / n as f64;
            let y = PI / 2.0 + r * th.sin();
            exact += r / (4.0 * y.sin().powi(2));
        }
    }
    exact *= (0.5 / n as f64) * (2.0 * PI / n as f64);
    assert!((a.value / exact - 1.0).abs() < 1e-3, "{} vs {exact}", a.value);
    assert_eq!(a.std_err, 0.0);
    let line = CompactSet::polyline(vec![p(-1.0, 1.0), p(1.0, 1.0)]).unwrap();
    assert_eq!(
        hypgeom::hyp_area(&line, &s, 0.0, 64, &WosConfig::default())
            .unwrap()
            .value,
        0.0
    );
}

#[test]
fn f32_capacity_smoke() {
    let k = CompactSet::disk(petallab_core::Point32::new(0.0, 0.0), 0.5f32).unwrap();
    let eq = energy::equilibrium_with(
        &k,
        &GreenSource::Oracle {
            form: ClosedForm::Disk,
            t: 0.0f32,
        },
        32,
    )
    .unwrap();
    assert!(
        (eq.capacity as f64 / (2.0 * PI / 2f64.ln()) - 1.0).abs() < 0.03,
        "{}",
        eq.capacity
    );
}

fn grid_strategy() -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((-2.0..2.0f64, -2.0..2.0f64), 8..20)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn exchange_search_matches_exhaustive(pts in grid_strategy(), n in 2usize..=4) {
        let grid: Vec<Point64> = pts.iter().map(|&(x, y)| p(x, y)).collect();
        let kernel = LogKernel::euclidean(&grid);
        let (s, _) = fekete::exhaustive(&kernel, n);
        let res = fekete::n_diameter_on(&kernel, n, &FeketeConfig::default()).unwrap();
        let exact = fekete::diameter_from_sum(s, n);
        prop_assert!((res.diameter - exact).abs() <= 1e-12 * exact, "{} vs {exact}", res.diameter);
    }

    #[test]
    fn simplex_projection_is_a_projection(v in prop::collection::vec(-5.0..5.0f64, 1..30)) {
        let w = project_simplex(&v);
        prop_assert!(w.iter().all(|x| *x >= 0.0));
        prop_assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let again = project_simplex(&w);
        for (a, b) in w.iter().zip(&again) {
            prop_assert!((a - b).abs() < 1e-12);
        }
        // Optimality: v − w is constant on the support and no larger off it.
        let theta = v.iter().zip(&w).find(|(_, x)| **x > 0.0).map(|(a, b)| a - b).unwrap();
        for (a, b) in v.iter().zip(&w) {
            if *b > 0.0 {
                prop_assert!((a - b - theta).abs() < 1e-9);
            } else {
                prop_assert!(*a <= theta + 1e-9);
            }
        }
    }

    #[test]
    fn simplex_qp_beats_uniform_and_vertices(rows in prop::collection::vec(prop::collection::vec(-1.0..1.0f64, 6), 6)) {
        // G = AᵀA + I is positive definite.
        let n = 6;
        let g: Vec<Vec<f64>> = (0..n)
            .map(|i| (0..n).map(|j| (0..n).map(|k| rows[k][i] * rows[k][j]).sum::<f64>() + if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        let sol = simplex_qp(&g, 100_000);
        let q = |w: &[f64]| (0..n).map(|i| (0..n).map(|j| w[i] * g[i][j] * w[j]).sum::<f64>()).sum::<f64>();
        prop_assert!(sol.weights.iter().all(|x| *x >= 0.0));
        prop_assert!((sol.weights.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        prop_assert!((q(&sol.weights) - sol.value).abs() < 1e-9);
        prop_assert!(sol.value <= q(&vec![1.0 / n as f64; n]) + 1e-12);
        for i in 0..n {
            prop_assert!(sol.value <= g[i][i] + 1e-12);
        }
    }

    #[test]
    fn oracle_density_obeys_koebe(x in -5.0..5.0f64, y in 0.01..3.13f64) {
        let s = KoenigsDomain::strip(0.0, PI).unwrap();
        let w = p(x, y);
        let (lo, hi) = hypgeom::density_bounds(w, &s, 0.0).unwrap();
        let l = ClosedForm::Strip { y0: 0.0, y1: PI }.density(w).unwrap();
        prop_assert!(lo <= l * (1.0 + 1e-12) && l <= hi * (1.0 + 1e-12));
    }

    #[test]
    fn quasi_hyperbolic_bounds_hold_for_oracles(
        a in (-4.0..4.0f64, 0.05..3.0f64), b in (-4.0..4.0f64, 0.05..3.0f64), t in -5.0..0.0f64,
    ) {
        prop_assume!((a.0 - b.0).hypot(a.1 - b.1) > 1e-6);
        let (z, w) = (p(a.0, a.1), p(b.0, b.1));
        let s = KoenigsDomain::strip(0.0, PI).unwrap();
        let form = ClosedForm::Strip { y0: 0.0, y1: PI };
        let d = form.distance(z, w).unwrap();
        let g = form.green(z, w).unwrap();
        prop_assert!(hypgeom::distance_lower_bound(z, w, &s, t).unwrap() <= d * (1.0 + 1e-12) + 1e-12);
        prop_assert!(hypgeom::green_upper_bound(z, w, &s, t).unwrap() >= g * (1.0 - 1e-12));
    }
}
