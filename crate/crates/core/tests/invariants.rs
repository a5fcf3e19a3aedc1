use proptest::prelude::*;

use polyq::field::{interaction_energy, subadditivity_sides};
use polyq::structure::{
    argmax_points, detect_events, distance_to_optimality, lambda_gap_bound, optimal_trajectory,
};
use polyq::{occupation, parity_sign_sums, ChargeVector, Parity, Sign, Site, Step, Walk};

fn instance(max_n: usize) -> impl Strategy<Value = (ChargeVector, Walk)> {
    (1usize..=3, 1usize..=max_n).prop_flat_map(|(d, n)| {
        (
            prop::collection::vec(-4i32..=4, n),
            prop::collection::vec(0u8..(2 * d as u8), n - 1),
        )
            .prop_map(move |(q, steps)| {
                let q = ChargeVector::new(q.into_iter().map(f64::from).collect());
                let w = Walk::from_steps(d, steps.into_iter().map(Step).collect()).unwrap();
                (q, w)
            })
    })
}

proptest! {
    #[test]
    fn local_times_sum_to_n((q, w) in instance(120)) {
        let f = occupation(&q, &w).unwrap();
        let total: u32 = f.iter().map(|(_, s)| s.local_time).sum();
        prop_assert_eq!(total as usize, w.len());
        let charge: f64 = f.iter().map(|(_, s)| s.charge).sum();
        prop_assert_eq!(charge, q.as_slice().iter().sum::<f64>());
    }

    #[test]
    fn energy_splits_into_interaction_and_self_terms((q, w) in instance(120)) {
        let h = occupation(&q, &w).unwrap().energy();
        let hh = interaction_energy(&q, &w).unwrap();
        prop_assert_eq!(h, 2.0 * hh + q.sum_sq());
    }

    #[test]
    fn subadditive((q, w) in instance(150), cut in 0.0f64..1.0) {
        prop_assume!(w.len() >= 2);
        let n1 = 1 + ((w.len() - 1) as f64 * cut) as usize;
        let n1 = n1.min(w.len() - 1);
        let (l, r) = subadditivity_sides(&q, &w, n1).unwrap();
        prop_assert!(l <= r);
    }

    #[test]
    fn energy_bounded_by_local_time((q, w) in instance(150)) {
        let f = occupation(&q, &w).unwrap();
        prop_assert!(f.energy() <= f.max_local_time() as f64 * q.sum_sq());
    }

    #[test]
    fn energy_bounded_by_distance_to_optimality((q, w) in instance(150)) {
        let f = occupation(&q, &w).unwrap();
        let s = parity_sign_sums(&q);
        let p = argmax_points(&f, w.d());
        let dn = distance_to_optimality(&s, &p);
        prop_assert!(dn >= 0.0);
        prop_assert!(f.energy() <= s.square_sum() - dn);
    }

    #[test]
    fn argmax_matches_linear_scan((q, w) in instance(80)) {
        let f = occupation(&q, &w).unwrap();
        let p = argmax_points(&f, w.d());
        for e in Sign::BOTH {
            for par in Parity::BOTH {
                let best = w
                    .positions()
                    .iter()
                    .filter(|x| x.parity() == par)
                    .map(|x| e.apply(f.charge_at(x)))
                    .fold(f64::NEG_INFINITY, f64::max);
                let x = p.get(e, par);
                prop_assert_eq!(x.parity(), par);
                prop_assert!(e.apply(p.charge(e, par)) >= 0.0);
                if best >= 0.0 {
                    prop_assert_eq!(e.apply(f.charge_at(&x)), best);
                }
            }
        }
    }

    #[test]
    fn gap_bound_below_distance((q, w) in instance(120)) {
        prop_assume!(w.d() >= 2);
        let f = occupation(&q, &w).unwrap();
        let p = argmax_points(&f, w.d());
        if let Ok(g) = lambda_gap_bound(&q, &p) {
            let dn = distance_to_optimality(&parity_sign_sums(&q), &p);
            prop_assert!(g.bound <= dn + 1e-9 * dn.abs().max(1.0));
        }
    }

    #[test]
    fn optimal_trajectory_attains_the_formula(
        q in prop::collection::vec(-3i32..=3, 1..60), d in 2usize..=4
    ) {
        let q = ChargeVector::new(q.into_iter().map(f64::from).collect());
        let w = optimal_trajectory(&q, d).unwrap();
        let f = occupation(&q, &w).unwrap();
        let s = parity_sign_sums(&q);
        prop_assert_eq!(f.energy(), s.square_sum());
        prop_assert_eq!(distance_to_optimality(&s, &argmax_points(&f, d)), 0.0);
    }

    /// Folded walks whose four charge classes are nearly equal: C_α forces S_α.
    #[test]
    fn c_implies_s_on_balanced_folds(k in 10usize..60, flips in prop::collection::vec(any::<bool>(), 0..6)) {
        let mut q: Vec<f64> = (0..4 * k).map(|i| if (i / 2) % 2 == 0 { 1.0 } else { -1.0 }).collect();
        for (j, f) in flips.iter().enumerate() {
            if *f {
                q[7 * j + 1] = -q[7 * j + 1];
            }
        }
        let q = ChargeVector::new(q);
        let w = optimal_trajectory(&q, 2).unwrap();
        let ev = detect_events(&q, &w, 0.5).unwrap();
        prop_assert!(ev.c_alpha);
        prop_assert!(ev.s_alpha);
        prop_assert_eq!(ev.r_alpha, 0);
    }
}

#[test]
fn c_without_s_for_unbalanced_charges() {
    let q = ChargeVector::new(vec![-1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, -1.0]);
    let w = optimal_trajectory(&q, 2).unwrap();
    let ev = detect_events(&q, &w, 0.5).unwrap();
    assert!(ev.c_alpha && !ev.s_alpha);
    assert_eq!(w.positions()[0], Site::ORIGIN);
}
