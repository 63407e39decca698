use std::sync::Arc;

use densepoly::config::ExperimentConfig;
use densepoly::conjugate::{uniform_grid, young_conjugate, Domain, SampledFunction1D};
use densepoly::flt::{DiscreteFunctional, EntireFunction, Term};
use densepoly::kernel::{estimate_ch, exact_remainder, fejer_h, remainder_bound, taylor_u};
use densepoly::seqspace::{p_seminorm, FnSequence, SeqWeightFamily};
use densepoly::smoothfn::LinearCombination;
use densepoly::{Fleet, FleetFunction, SharedFn, WeightFamily, WeightKind};
use num_complex::Complex64;
use proptest::prelude::*;

fn samples(values: &[f64]) -> SampledFunction1D {
    let nodes = uniform_grid(-2.0, 2.0, values.len());
    SampledFunction1D::new(nodes, values.to_vec(), Domain::FullLine).unwrap()
}

fn fleet_fn(i: usize) -> SharedFn {
    Arc::new(FleetFunction::new(Fleet::ALL[i % Fleet::ALL.len()], 1))
}

fn p_of(f: SharedFn) -> f64 {
    let w = WeightFamily::power(2.0, 1).unwrap();
    let mut s = FnSequence::new();
    s.insert(1, f).unwrap();
    p_seminorm(&s, 1, &SeqWeightFamily::default(), &w, 3.0, 257)
        .unwrap()
        .value
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn fenchel_young(values in prop::collection::vec(-5.0f64..5.0, 3..40), x in -4.0f64..4.0) {
        let u = samples(&values);
        let star = u.conjugate_at(x).0;
        for (&y, &v) in u.nodes().iter().zip(u.values()) {
            prop_assert!(star + v >= x * y - 1e-12);
        }
    }

    #[test]
    fn conjugate_is_convex(values in prop::collection::vec(-5.0f64..5.0, 3..40)) {
        let xs = uniform_grid(-3.0, 3.0, 61);
        let u = samples(&values);
        let star: Vec<f64> = xs.iter().map(|&x| u.conjugate_at(x).0).collect();
        for t in star.windows(3) {
            prop_assert!(t[0] + t[2] - 2.0 * t[1] >= -1e-9);
        }
    }

    #[test]
    fn conjugate_reverses_order(
        values in prop::collection::vec(-5.0f64..5.0, 3..40),
        bumps in prop::collection::vec(0.0f64..2.0, 40),
        x in -4.0f64..4.0,
    ) {
        let higher: Vec<f64> = values.iter().zip(&bumps).map(|(v, b)| v + b).collect();
        let a = samples(&values).conjugate_at(x).0;
        let b = samples(&higher).conjugate_at(x).0;
        prop_assert!(b <= a + 1e-12);
    }

    #[test]
    fn conjugate_shift_by_constant(values in prop::collection::vec(-5.0f64..5.0, 3..40), c in -3.0f64..3.0) {
        let xs = uniform_grid(-3.0, 3.0, 13);
        let shifted: Vec<f64> = values.iter().map(|v| v + c).collect();
        let (a, b) = (samples(&values), samples(&shifted));
        for &x in &xs {
            prop_assert!((a.conjugate_at(x).0 - c - b.conjugate_at(x).0).abs() <= 1e-12);
        }
    }

    #[test]
    fn convex_search_matches_scan(mut slopes in prop::collection::vec(-10.0f64..10.0, 2..60), x in 0.0f64..3.0) {
        slopes.sort_by(f64::total_cmp);
        slopes[0] = -10.0;
        // A steep outer half so the truncation certificate passes.
        slopes.extend(vec![10.0; slopes.len()]);
        let nodes = uniform_grid(0.0, 4.0, slopes.len() + 1);
        let h = nodes[1];
        let mut values = vec![0.0];
        for s in &slopes {
            values.push(values.last().unwrap() + s * h);
        }
        let u = SampledFunction1D::new(nodes, values, Domain::HalfLine).unwrap();
        let fast = young_conjugate(&u, &[x]).unwrap().values()[0];
        prop_assert!((fast - u.conjugate_at(x).0).abs() <= 1e-12);
    }

    #[test]
    fn kernel_between_zero_and_quarter(x in -1e3f64..1e3) {
        let h = fejer_h(x);
        prop_assert!((0.0..=0.25).contains(&h));
    }

    #[test]
    fn remainder_within_bound(x in -5.0f64..5.0, y in -3.0f64..3.0, n in 0usize..=20) {
        for pt in [vec![x], vec![x, y]] {
            let ch = estimate_ch(8, pt.len()).unwrap();
            let e = exact_remainder(n, &pt).unwrap();
            prop_assert!(e.abs() <= remainder_bound(n, &pt, ch));
        }
    }

    #[test]
    fn taylor_polynomials_nest(n in 0usize..16) {
        prop_assert_eq!(taylor_u(n + 3, 2).truncate(n), taylor_u(n, 2));
    }

    #[test]
    fn transform_is_linear(
        pts in prop::collection::vec(-2.0f64..2.0, 1..4),
        orders in prop::collection::vec(0usize..3, 4),
        re in -3.0f64..3.0, im in -3.0f64..3.0,
        zr in -2.0f64..2.0, zi in -2.0f64..2.0,
    ) {
        let one = Complex64::new(1.0, 0.0);
        let f = DiscreteFunctional::new(
            pts.iter().zip(&orders).map(|(&a, &k)| Term::new(one, k, a)).collect(),
        ).unwrap();
        let g = DiscreteFunctional::delta(0.5);
        let c = Complex64::new(re, im);
        let z = Complex64::new(zr, zi);
        let lhs = f.scale(c).add(&g).transform().eval(z);
        let rhs = c * f.transform().eval(z) + g.transform().eval(z);
        prop_assert!((lhs - rhs).norm() <= 1e-10 * (1.0 + lhs.norm()));
    }

    #[test]
    fn real_functionals_are_hermitian(a in -2.0f64..2.0, k in 0usize..4, zr in -3.0f64..3.0, zi in -3.0f64..3.0) {
        let f = DiscreteFunctional::derivative_at(k, a).transform();
        let z = Complex64::new(zr, zi);
        let lhs = f.eval(-z.conj());
        let rhs = f.eval(z).conj();
        prop_assert!((lhs - rhs).norm() <= 1e-12 * (1.0 + lhs.norm()));
    }

    #[test]
    fn config_round_trips(seed in 0u64..=i64::MAX as u64, eps in 1e-3f64..10.0, a in 1.01f64..4.0) {
        let mut cfg = ExperimentConfig {
            seed,
            weight: WeightKind::Power { a },
            ..ExperimentConfig::default()
        };
        cfg.approx.eps = eps;
        let back: ExperimentConfig = cfg.to_toml().unwrap().parse().unwrap();
        prop_assert_eq!(back, cfg);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn p_seminorm_homogeneous(i in 0usize..5, c in -4.0f64..4.0) {
        let f = fleet_fn(i);
        let scaled: SharedFn = Arc::new(LinearCombination::scaled(c, f.clone()));
        let (p, q) = (p_of(f), p_of(scaled));
        prop_assert!((q - c.abs() * p).abs() <= 1e-12 * (1.0 + p));
    }

    #[test]
    fn p_seminorm_triangle(i in 0usize..5, j in 0usize..5, c in -3.0f64..3.0) {
        let (f, g) = (fleet_fn(i), fleet_fn(j));
        let sum: SharedFn = Arc::new(
            LinearCombination::new(1, vec![(1.0, f.clone()), (c, g.clone())]).unwrap(),
        );
        let scaled: SharedFn = Arc::new(LinearCombination::scaled(c, g));
        prop_assert!(p_of(sum) <= (p_of(f) + p_of(scaled)) * (1.0 + 1e-12));
    }
}
