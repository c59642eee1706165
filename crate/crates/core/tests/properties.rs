use proptest::prelude::*;

use w2sg_core::analysis::{aggregate, mid_ranks, spearman};
use w2sg_core::geometry::{embed_with_overlap, metrics, norm, random_unit, UnitVector};
use w2sg_core::landscape::{radius_report, theory_bound};
use w2sg_core::rng::seeded;
use w2sg_core::spectral::bbp_overlap;
use w2sg_core::training::{pgd_step, projection_residual};

fn unit(d: usize, seed: u64) -> UnitVector {
    random_unit(d, &mut seeded(seed)).unwrap()
}

proptest! {
    #[test]
    fn normalize_gives_unit_norm(v in prop::collection::vec(-1e3f64..1e3, 2..64)) {
        prop_assume!(norm(&v) > 1e-6);
        let u = UnitVector::normalize(v).unwrap();
        prop_assert!((norm(u.as_slice()) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pgd_stays_on_sphere(seed in any::<u64>(), d in 2usize..100, scale in 1e-6f64..1e3, eta in 1e-6f64..1e-1) {
        let w = unit(d, seed);
        let g: Vec<f64> = unit(d, seed ^ 1).as_slice().iter().map(|c| c * scale).collect();
        if let Ok(next) = pgd_step(&w, &g, eta) {
            prop_assert!((norm(next.as_slice()) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn residual_bound_for_small_steps(seed in any::<u64>(), d in 2usize..200, step in 1e-9f64..0.1) {
        let w = unit(d, seed);
        let g = unit(d, seed.wrapping_add(7));
        // scale so that eta * ||g|| = step
        let eta = 1e-5;
        let g: Vec<f64> = g.as_slice().iter().map(|c| c * step / eta).collect();
        prop_assert!(projection_residual(&w, &g, eta).unwrap().bound_ok);
    }

    #[test]
    fn embedding_hits_requested_overlap(seed in any::<u64>(), d in 2usize..300, overlap in -1.0f64..1.0) {
        let t = unit(d, seed);
        let out = embed_with_overlap(&t, overlap, &mut seeded(seed ^ 3)).unwrap();
        prop_assert!((out.dot(t.as_slice()) - overlap).abs() < 1e-10);
        prop_assert!((norm(out.as_slice()) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn metrics_sphere_identity(seed in any::<u64>(), d in 2usize..50) {
        let (a, b) = (unit(d, seed), unit(d, seed ^ 5));
        let m = metrics(&a, &b).unwrap();
        prop_assert!((m.distance * m.distance - (2.0 - 2.0 * m.correlation)).abs() < 1e-12);
    }

    #[test]
    fn radius_solves_its_quadratic(
        mu0 in 1e-3f64..2.0, m1 in 0.1f64..5.0, m2 in 1e-3f64..3.0, m3 in 1e-3f64..3.0, lambda in 0.0f64..20.0,
    ) {
        let r = radius_report(mu0, m1, m2, m3, lambda).unwrap();
        let lhs = r.c2_hess * r.zeta_star * r.zeta_star + r.c1_hess * r.zeta_star;
        prop_assert!((lhs - mu0 / 2.0).abs() <= 1e-10 * mu0 / 2.0);
        prop_assert!(r.zeta <= r.zeta_star && r.zeta <= r.drift_budget);
        prop_assert!((0.0..=90.0).contains(&r.angle_deg));
    }

    #[test]
    fn bound_starts_at_initial_distance(tau in 0.01f64..0.99, mu in 0.01f64..1.0, phi in 0.0f64..0.3) {
        let c = theory_bound(tau, mu, phi, 1e-3, 5.0, 200, &[0, 10]).unwrap();
        prop_assert_eq!(c.values[0], 2.0 - 2.0 * tau);
    }

    #[test]
    fn bbp_is_monotone_in_lambda(alpha in 0.1f64..100.0, l1 in 0.0f64..10.0, dl in 0.0f64..10.0) {
        prop_assert!(bbp_overlap(alpha, l1) <= bbp_overlap(alpha, l1 + dl));
        prop_assert!((0.0..=1.0).contains(&bbp_overlap(alpha, l1)));
    }

    #[test]
    fn mid_ranks_sum(v in prop::collection::vec(0i32..10, 1..50)) {
        let v: Vec<f64> = v.into_iter().map(f64::from).collect();
        let n = v.len() as f64;
        prop_assert!((mid_ranks(&v).iter().sum::<f64>() - n * (n + 1.0) / 2.0).abs() < 1e-9);
    }

    #[test]
    fn spearman_ignores_monotone_transforms(v in prop::collection::vec((-10.0f64..10.0, -10.0f64..10.0), 4..40)) {
        let (x, y): (Vec<f64>, Vec<f64>) = v.into_iter().unzip();
        if let Ok(a) = spearman(&x, &y) {
            let ex: Vec<f64> = x.iter().map(|t| t.exp()).collect();
            let b = spearman(&ex, &y).unwrap();
            prop_assert!((a.rho - b.rho).abs() < 1e-12);
        }
    }

    #[test]
    fn aggregate_is_order_invariant(mut rows in prop::collection::vec((0u8..4, -5.0f64..5.0), 1..30), seed in any::<u64>()) {
        let a: Vec<(f64, f64)> = rows.iter().map(|&(k, v)| (f64::from(k), v)).collect();
        use rand::seq::SliceRandom;
        rows.shuffle(&mut seeded(seed));
        let b: Vec<(f64, f64)> = rows.iter().map(|&(k, v)| (f64::from(k), v)).collect();
        let (ga, gb) = (aggregate(&a).unwrap(), aggregate(&b).unwrap());
        prop_assert_eq!(ga.len(), gb.len());
        for (p, q) in ga.iter().zip(&gb) {
            prop_assert_eq!(p.n, q.n);
            prop_assert!((p.mean - q.mean).abs() < 1e-12 && (p.std - q.std).abs() < 1e-12);
        }
    }
}
