use ndarray::{Array1, Array2};
use proptest::prelude::*;
use sugar_core::genlearn::{entropic_ot, half_sq_cost, sinkhorn_divergence, FeatureMap, PseudoSampleBlock};
use sugar_core::structural::{ancestor_sets, threshold_graph, topological_order};
use sugar_core::testkit::{
    bh_adjust, combine_pvalues, estimate_measures, per_observation_products, select_b, split_subjects,
    transform_bank, MeasureTable,
};

fn cloud(max_rows: usize, cols: usize) -> impl Strategy<Value = Array2<f64>> {
    (1..=max_rows).prop_flat_map(move |rows| {
        prop::collection::vec(-3.0f64..3.0, rows * cols)
            .prop_map(move |v| Array2::from_shape_vec((rows, cols), v).unwrap())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sinkhorn_divergence_is_symmetric_and_nonnegative(a in cloud(12, 2), b in cloud(12, 2), eps in 0.05f64..1.0) {
        let ab = sinkhorn_divergence(a.view(), b.view(), FeatureMap::Identity, eps, 200).unwrap();
        let ba = sinkhorn_divergence(b.view(), a.view(), FeatureMap::Identity, eps, 200).unwrap();
        prop_assert!((ab - ba).abs() <= 1e-8 * (1.0 + ab.abs()));
        prop_assert!(ab >= -1e-8);
    }

    #[test]
    fn entropic_ot_stays_finite_at_extreme_scales(a in cloud(10, 1), b in cloud(10, 1), scale in 1.0f64..300.0, eps in 1e-4f64..1e-2) {
        let cost = half_sq_cost((&a * scale).view(), (&b * scale).view());
        let (value, grad) = entropic_ot(cost.view(), eps, 50, true).unwrap();
        prop_assert!(value.is_finite());
        prop_assert!(grad.unwrap().iter().all(|g| g.is_finite()));
    }

    #[test]
    fn transforms_are_bounded_by_one(b in 1usize..50, seed in any::<u64>(), x in -1e3f64..1e3) {
        let bank = transform_bank(2 * b, seed).unwrap();
        for i in 0..bank.len() {
            prop_assert!(bank.eval(i, x).abs() <= 1.0);
        }
    }

    #[test]
    fn products_are_bounded_by_twice_the_residual(
        n in 1usize..20, m in 1usize..8, seed in any::<u64>(),
        values in prop::collection::vec(-5.0f64..5.0, 20 * 9),
    ) {
        let residual = Array1::from_iter(values[..n].iter().copied());
        let xk = Array1::from_iter(values[20..20 + n].iter().copied());
        let pseudo = PseudoSampleBlock::new(Array2::from_shape_vec((n, m), values[40..40 + n * m].to_vec()).unwrap()).unwrap();
        let bank = transform_bank(10, seed).unwrap();
        let table = per_observation_products(residual.view(), xk.view(), &pseudo, &bank).unwrap();
        let bound = 2.0 * residual.iter().fold(0.0f64, |a, r| a.max(r.abs()));
        prop_assert!(table.iter().all(|v| v.abs() <= bound + 1e-12));
    }

    #[test]
    fn measures_match_a_direct_mean(rows in 1usize..30, cols in 1usize..6, values in prop::collection::vec(-10.0f64..10.0, 180)) {
        let m = Array2::from_shape_vec((rows, cols), values[..rows * cols].to_vec()).unwrap();
        let table = MeasureTable::new(m.clone(), vec![rows], true, 0).unwrap();
        let means = estimate_measures(&table).unwrap();
        for c in 0..cols {
            let mut s = 0.0;
            for r in 0..rows {
                s += m[[r, c]];
            }
            prop_assert!((means[c] - s / rows as f64).abs() < 1e-9);
        }
    }

    #[test]
    fn select_b_matches_a_linear_scan(stats in prop::collection::vec(-5i32..5, 1..40)) {
        let t: Vec<f64> = stats.iter().map(|&v| v as f64 * 0.5).collect();
        let mut best = 0;
        for (b, v) in t.iter().enumerate() {
            if v.abs() > t[best].abs() {
                best = b;
            }
        }
        prop_assert_eq!(select_b(&t).unwrap(), best);
    }

    #[test]
    fn split_is_a_balanced_partition(n in 2usize..200, seed in any::<u64>()) {
        let plan = split_subjects(n, seed).unwrap();
        prop_assert_eq!(plan.halves[0].len(), n.div_ceil(2));
        prop_assert_eq!(plan.halves[1].len(), n / 2);
        let mut all: Vec<usize> = plan.halves.concat();
        all.sort_unstable();
        prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
        prop_assert_eq!(plan, split_subjects(n, seed).unwrap());
    }

    #[test]
    fn thresholded_permuted_triangular_weights_are_acyclic(
        d in 2usize..9,
        values in prop::collection::vec(0.0f64..1.0, 64),
        perm in Just((0..8usize).collect::<Vec<_>>()).prop_shuffle(),
        tau in 0.05f64..0.9,
    ) {
        let order: Vec<usize> = perm.into_iter().filter(|&p| p < d).collect();
        let mut w = Array2::zeros((d, d));
        for a in 0..d {
            for b in a + 1..d {
                w[[order[a], order[b]]] = values[a * 8 + b];
            }
        }
        let adj = threshold_graph(&w, tau);
        prop_assert!(topological_order(&adj).is_some());
        let anc = ancestor_sets(&adj).unwrap();
        for j in 0..d {
            prop_assert!(!anc[j].contains(&j));
            for &a in &anc[j] {
                for &b in &anc[a] {
                    prop_assert!(anc[j].contains(&b));
                }
            }
        }
    }

    #[test]
    fn bh_rejections_are_monotone_and_a_smallest_p_prefix(p in prop::collection::vec(0.0f64..1.0, 1..40), q in 0.01f64..0.5) {
        let r = bh_adjust(&p, q).unwrap();
        let r2 = bh_adjust(&p, (2.0 * q).min(0.99)).unwrap();
        for i in 0..p.len() {
            prop_assert!(!r[i] || r2[i]);
            for k in 0..p.len() {
                if r[i] && p[k] <= p[i] {
                    prop_assert!(r[k]);
                }
            }
        }
        let count = r.iter().filter(|&&x| x).count();
        if count > 0 {
            let largest = p.iter().zip(&r).filter(|(_, &x)| x).map(|(v, _)| *v).fold(0.0, f64::max);
            prop_assert!(largest <= q * count as f64 / p.len() as f64 + 1e-15);
        }
    }

    #[test]
    fn combined_p_is_symmetric_monotone_and_a_probability(p1 in 0.0f64..=1.0, p2 in 0.0f64..=1.0, bump in 0.0f64..0.5) {
        let c = combine_pvalues(p1, p2).unwrap();
        prop_assert_eq!(c, combine_pvalues(p2, p1).unwrap());
        prop_assert!((0.0..=1.0).contains(&c));
        prop_assert!(c >= p1.min(p2));
        prop_assert!(combine_pvalues((p1 + bump).min(1.0), p2).unwrap() >= c);
    }
}
