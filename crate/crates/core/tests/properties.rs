use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use ucpec::entropy::{
    binary_relative_entropy, conditional_renyi_sibson, delta2_residual, h2, project_simplex, solve_delta2, CqSource,
};
use ucpec::field::{FqMatrix, Gf};
use ucpec::hashing::{sample_with, HashFamilyKind};
use ucpec::optimizer::{i_projection, kl, ProbabilitySet};
use ucpec::schur_weyl::{class_size, enumerate_types};

const ORDERS: [u32; 9] = [2, 3, 4, 5, 7, 8, 9, 16, 27];

proptest! {
    #[test]
    fn field_axioms(qi in 0..ORDERS.len(), a in 0u32..1000, b in 0u32..1000, c in 0u32..1000) {
        let q = ORDERS[qi];
        let f = Gf::of_order(q).unwrap();
        let (a, b, c) = (a % q, b % q, c % q);
        prop_assert_eq!(f.mul(a, f.add(b, c)), f.add(f.mul(a, b), f.mul(a, c)));
        prop_assert_eq!(f.mul(f.mul(a, b), c), f.mul(a, f.mul(b, c)));
        prop_assert_eq!(f.add(a, f.neg(a)), 0);
        prop_assert_eq!(f.sub(f.add(a, b), b), a);
        if a != 0 {
            prop_assert_eq!(f.mul(a, f.inv(a).unwrap()), 1);
        } else {
            prop_assert!(f.inv(0).is_err());
        }
        prop_assert_eq!(f.trace(f.add(a, b)), (f.trace(a) + f.trace(b)) % f.p());
    }

    #[test]
    fn sampled_surjections_invert_after_completion(q in prop::sample::select(vec![2u32, 3, 5]), n in 1usize..5, seed in any::<u64>()) {
        let f = Gf::of_order(q).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = sample_with(&f, HashFamilyKind::AllSurjective, n, n, &mut rng).unwrap();
        prop_assert_eq!(h.rank(&f), n);
        let inv = h.inverse(&f).unwrap();
        prop_assert_eq!(h.mul(&f, &inv).unwrap(), FqMatrix::identity(n));
    }

    #[test]
    fn simplex_projection_is_a_projection(v in prop::collection::vec(-3.0f64..3.0, 1..8)) {
        let p = project_simplex(&v);
        prop_assert!(p.iter().all(|x| *x >= 0.0));
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let again = project_simplex(&p);
        for (x, y) in p.iter().zip(&again) {
            prop_assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn binary_divergence_is_a_divergence(p in 0.0f64..=1.0, q in 0.001f64..0.999) {
        let d = binary_relative_entropy(p, q);
        prop_assert!(d >= 0.0);
        prop_assert!(binary_relative_entropy(q, q).abs() < 1e-15);
        // D(p‖½) = 1 − h(p)
        prop_assert!((binary_relative_entropy(p, 0.5) - (1.0 - h2(p))).abs() < 1e-12);
    }

    #[test]
    fn delta2_solves_its_equation_and_shrinks_with_n(p in 0.0f64..0.6, log_n in 3.0f64..12.0, log2_eps in -140.0f64..-10.0) {
        let n = 10f64.powf(log_n);
        let d = solve_delta2(p, n, log2_eps).unwrap();
        prop_assert!(d > 0.0 && p + d <= 1.0);
        prop_assert!(delta2_residual(p, n, log2_eps, d).abs() <= 1e-10);
        let d_more = solve_delta2(p, 10.0 * n, log2_eps).unwrap();
        prop_assert!(d_more < d);
    }

    #[test]
    fn i_projection_beats_feasible_points(
        raw_q in prop::collection::vec(0.05f64..1.0, 5),
        gamma in prop::collection::vec(-1.0f64..1.0, 4),
        raw_p in prop::collection::vec(0.0f64..1.0, 4),
    ) {
        let z: f64 = raw_q.iter().sum();
        let q: Vec<f64> = raw_q.iter().map(|v| v / z).collect();
        let last = q[4];
        let set = ProbabilitySet::Halfspace { gamma: gamma.clone(), last };
        let (d, proj) = i_projection(&set, &q);
        let s: f64 = raw_p.iter().sum();
        prop_assume!(s > 0.0);
        let mut cand: Vec<f64> = raw_p.iter().map(|v| v * (1.0 - last) / s).collect();
        let feasible = gamma.iter().zip(&cand).map(|(g, v)| g * v).sum::<f64>() >= 0.0;
        cand.push(last);
        if d.is_finite() {
            prop_assert!(gamma.iter().zip(&proj).map(|(g, v)| g * v).sum::<f64>() >= -1e-9);
            prop_assert!((kl(&proj, &q) - d).abs() <= 1e-9 * d.max(1.0));
            if feasible {
                prop_assert!(kl(&cand, &q) >= d - 1e-9);
            }
        } else {
            prop_assert!(!feasible || cand[..4].iter().all(|v| *v == 0.0));
        }
    }

    #[test]
    fn type_classes_partition_strings(n in 1usize..8, k in 1usize..5) {
        let total: f64 = enumerate_types(n, k).iter().map(|t| class_size(t)).sum();
        prop_assert_eq!(total, (k as f64).powi(n as i32));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn sibson_entropy_is_bounded_and_monotone(seed in any::<u64>(), k in 2usize..4, d in 1usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let src = CqSource::random(k, d, &mut rng);
        let mut prev = f64::INFINITY;
        for i in 1..10 {
            let h = conditional_renyi_sibson(&src, i as f64 / 10.0).unwrap();
            prop_assert!(h <= (k as f64).log2() + 1e-12);
            prop_assert!(h >= -(d as f64).log2() - 1e-12);
            prop_assert!(h <= prev + 1e-12);
            prev = h;
        }
    }
}
