use proptest::prelude::*;

use randtime_core::diffusion::{DiffusionModel, LocalTimeEstimator, ScaleFunction};
use randtime_core::finite_horizon::{big_f, big_f_integral, f_mu, h_mu, simulate_p, FiniteHorizonSpec};
use randtime_core::levy::{Jumps, LevyModel};
use randtime_core::oracles::{bm_lastexit_joint, bm_max_joint, bm_max_rho, ig_hitting, pareto_sup};
use randtime_core::stats::{ks_p_value, mc_driver};
use randtime_core::{eta_u, EtaIndex, MonteCarloConfig, RngStream};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn simulated_running_max_dominates_path(seed in any::<u64>(), mu in -2.0f64..2.0, level in -1.0f64..1.0) {
        let spec = FiniteHorizonSpec::new(mu, 1.0, None).unwrap();
        let mut rng = RngStream::new(seed, 0);
        let p = simulate_p(&spec, 1e-2, Some(level), LocalTimeEstimator::Tanaka, &mut rng).unwrap().path;
        p.validate().unwrap();
        prop_assert_eq!(p.running_max[0], p.x[0]);
        for i in 1..p.len() {
            prop_assert!(p.t[i] > p.t[i - 1]);
            prop_assert!(p.running_max[i] >= p.running_max[i - 1]);
            prop_assert!(p.running_max[i] >= p.x[i]);
            prop_assert!(p.local_time[i] >= p.local_time[i - 1]);
        }
    }

    #[test]
    fn eta_is_monotone_in_u(mut k in prop::collection::vec(0.0f64..=1.0, 1..40), u in 0.0f64..1.0, v in 0.0f64..1.0) {
        k.sort_by(f64::total_cmp);
        let (u, v) = if u <= v { (u, v) } else { (v, u) };
        let (a, b) = (eta_u(&k, u).unwrap(), eta_u(&k, v).unwrap());
        prop_assert!(a <= b);
        if let EtaIndex::At(i) = a {
            prop_assert!(k[i] >= u && (i == 0 || k[i - 1] < u));
        }
    }

    #[test]
    fn rng_streams_reproduce(seed in any::<u64>(), stream in any::<u64>()) {
        let mut a = RngStream::new(seed, stream);
        let mut b = RngStream::new(seed, stream);
        let mut c = RngStream::new(seed, stream.wrapping_add(1));
        let xa: Vec<f64> = (0..16).map(|_| a.uniform()).collect();
        let xb: Vec<f64> = (0..16).map(|_| b.uniform()).collect();
        let xc: Vec<f64> = (0..16).map(|_| c.uniform()).collect();
        prop_assert_eq!(&xa, &xb);
        prop_assert_ne!(&xa, &xc);
    }

    #[test]
    fn mc_driver_ignores_worker_count(seed in any::<u64>(), n in 1usize..200, workers in 2usize..5) {
        let task = |rng: &mut RngStream, i: usize| Ok((i, rng.normal(), rng.exp1()));
        let one = mc_driver(&MonteCarloConfig::new(n, seed, 1e-3).unwrap(), task).unwrap();
        let many = mc_driver(&MonteCarloConfig::new(n, seed, 1e-3).unwrap().with_workers(workers), task).unwrap();
        prop_assert_eq!(one.samples, many.samples);
    }

    #[test]
    fn ks_p_value_decreases_in_d(d1 in 0.0f64..0.5, d2 in 0.0f64..0.5, n in 100.0f64..1e5) {
        let (lo, hi) = if d1 <= d2 { (d1, d2) } else { (d2, d1) };
        let (p_lo, p_hi) = (ks_p_value(lo, n), ks_p_value(hi, n));
        prop_assert!((0.0..=1.0).contains(&p_lo) && (0.0..=1.0).contains(&p_hi));
        prop_assert!(p_hi <= p_lo + 1e-15);
    }

    #[test]
    fn levy_exponent_convex_and_tilt_consistent(
        alpha in -3.0f64..-0.2,
        sigma2 in 0.1f64..2.0,
        c in 0.0f64..2.0,
        lambda in 0.5f64..3.0,
        p in prop::sample::select(vec![0.0, 0.5]),
    ) {
        let model = LevyModel::new(alpha, sigma2, Jumps::Power { c, lambda, p });
        prop_assume!(model.is_ok());
        let model = model.unwrap();
        prop_assert_eq!(model.theta(0.0), 0.0);
        let tilted = model.tilt().unwrap();
        let q = model.find_q().unwrap();
        prop_assert!(model.theta(q).abs() < 1e-10);
        prop_assert!(model.dtheta(q) > 0.0);
        let h = 1e-2;
        for i in 1..60 {
            let z = 0.05 * i as f64;
            let second = model.theta(z + h) - 2.0 * model.theta(z) + model.theta(z - h);
            prop_assert!(second >= -1e-8, "second difference {second} at {z}");
            prop_assert!((tilted.theta_q(z) - model.theta(z + q)).abs() < 1e-10);
        }
    }

    #[test]
    fn scale_function_increasing_and_invertible(a in 0.1f64..2.0, x0 in 0.5f64..3.0) {
        let model = DiffusionModel::bessel(a, x0).unwrap();
        let s = ScaleFunction::build_quadrature(&model).unwrap();
        prop_assert!((s.eval(x0) - 1.0).abs() < 1e-10);
        let grid = model.probe_grid(60);
        for w in grid.windows(2) {
            prop_assert!(s.eval(w[1]) > s.eval(w[0]));
        }
        for &x in &grid {
            let back = s.inverse(s.eval(x)).unwrap();
            prop_assert!((back - x).abs() <= 1e-8 * x.max(1.0), "x={x} back={back}");
        }
    }

    #[test]
    fn big_f_in_unit_interval_and_decreasing(mu in -2.0f64..2.0, tau in 0.01f64..5.0, z in 0.0f64..4.0, dz in 1e-3f64..1.0) {
        let (a, b) = (big_f(mu, tau, z).unwrap(), big_f(mu, tau, z + dz).unwrap());
        prop_assert!((0.0..=1.0).contains(&a) && (0.0..=1.0).contains(&b));
        prop_assert!(b <= a + 1e-10);
        prop_assert!((a - big_f_integral(mu, tau, z).unwrap()).abs() < 1e-8);
    }

    #[test]
    fn f_and_h_nonnegative_and_decreasing(mu in -2.0f64..2.0, tau in 0.01f64..5.0, dtau in 1e-3f64..2.0) {
        let (f0, f1) = (f_mu(mu, tau).unwrap(), f_mu(mu, tau + dtau).unwrap());
        let (h0, h1) = (h_mu(mu, tau).unwrap(), h_mu(mu, tau + dtau).unwrap());
        prop_assert!(f1 >= 0.0 && h1 >= 0.0);
        prop_assert!(f1 <= f0 + 1e-12 && h1 <= h0 + 1e-12);
    }

    #[test]
    fn oracle_densities_nonnegative(mu in 0.2f64..3.0, x in -2.0f64..-0.05, t in 0.0f64..10.0, y in -1.0f64..8.0, a in 0.1f64..2.0) {
        prop_assert!(bm_max_joint(mu).unwrap().pdf2(t, y.abs()) >= 0.0);
        prop_assert!(bm_max_rho(mu).unwrap().pdf(t) >= 0.0);
        prop_assert!(bm_lastexit_joint(mu, x).unwrap().pdf2(t, y.abs()) >= 0.0);
        prop_assert!(ig_hitting(mu, -x).unwrap().pdf(t) >= 0.0);
        prop_assert!(pareto_sup(a, 1.0).unwrap().pdf(y) >= 0.0);
    }
}
