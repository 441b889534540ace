use ndarray::{Array2, Axis};
use rand_distr::{Distribution, StandardNormal};
use sugar_core::nn::{Activation, Mlp};
use sugar_core::seed;
use sugar_core::simgen::sample_dag;
use sugar_core::structural::{
    acyclicity, ancestor_sets, fit_dag, threshold_graph, topological_order, weight_matrix, FitStatus,
};
use sugar_core::{SemKind, StructuralConfig};

fn linear_pair(n: usize, seed_value: u64) -> Array2<f64> {
    let mut rng = seed::rng(seed_value);
    let mut x = Array2::zeros((n, 2));
    for mut row in x.axis_iter_mut(Axis(0)) {
        let x1: f64 = StandardNormal.sample(&mut rng);
        let e: f64 = StandardNormal.sample(&mut rng);
        row[0] = x1;
        row[1] = 0.8 * x1 + e;
    }
    x
}

#[test]
fn recovers_a_linear_pair_in_19_of_20_runs() {
    let cfg = StructuralConfig::default();
    let mut correct = 0;
    for r in 0..20 {
        let est = fit_dag(linear_pair(2000, 100 + r).view(), &cfg, 0, 500 + r).unwrap();
        if est.adjacency[[0, 1]] && !est.adjacency[[1, 0]] {
            correct += 1;
        }
        if est.status == FitStatus::Converged {
            assert!(est.final_h <= cfg.h_tol, "converged with h = {}", est.final_h);
        }
        assert!(topological_order(&est.adjacency).is_some());
    }
    assert!(correct >= 19, "correct direction in {correct} of 20 runs");
}

#[test]
fn independent_noise_gives_the_empty_graph_in_18_of_20_runs() {
    let cfg = StructuralConfig::default();
    let mut empty = 0;
    for r in 0..20u64 {
        let mut rng = seed::rng(7000 + r);
        let x = Array2::from_shape_simple_fn((2000, 3), || StandardNormal.sample(&mut rng));
        let est = fit_dag(x.view(), &cfg, 0, 800 + r).unwrap();
        if est.edge_count() == 0 {
            empty += 1;
        }
    }
    assert!(empty >= 18, "empty graph in {empty} of 20 runs");
}

#[test]
fn weight_matrix_is_the_column_norm_of_first_layers() {
    let d = 4;
    let models: Vec<Mlp> = (0..d).map(|j| Mlp::init(&[d, 6, 1], Activation::Relu, 40 + j as u64).unwrap()).collect();
    let w = weight_matrix(&models).unwrap();
    for j in 0..d {
        let first = &models[j].weights()[0];
        for k in 0..d {
            let mut sq = 0.0;
            for i in 0..first.nrows() {
                sq += first[[i, k]] * first[[i, k]];
            }
            assert!((w[[k, j]] - sq.sqrt()).abs() < 1e-12);
        }
    }
}

fn closure_by_matrix_powers(adj: &Array2<bool>) -> Array2<bool> {
    let d = adj.nrows();
    let mut reach = adj.clone();
    let mut power = adj.clone();
    for _ in 1..d {
        let mut next = Array2::from_elem((d, d), false);
        for a in 0..d {
            for b in 0..d {
                next[[a, b]] = (0..d).any(|c| power[[a, c]] && adj[[c, b]]);
            }
        }
        power = next;
        reach.zip_mut_with(&power, |r, &p| *r |= p);
    }
    reach
}

#[test]
fn ancestor_sets_match_the_transitive_closure() {
    for s in 0..20u64 {
        let truth = sample_dag(8, 0.3, SemKind::Nonlinear, 300 + s).unwrap();
        let rows = truth.adjacency();
        let adj = Array2::from_shape_fn((8, 8), |(k, j)| rows[j][k]);
        let sets = ancestor_sets(&adj).unwrap();
        let reach = closure_by_matrix_powers(&adj);
        for j in 0..8 {
            let expected: Vec<usize> = (0..8).filter(|&k| reach[[k, j]]).collect();
            assert_eq!(sets[j], expected, "node {j}");
            assert_eq!(sets[j], truth.ancestors()[j]);
        }
    }
}

#[test]
fn thresholded_weights_of_an_acyclic_matrix_are_acyclic() {
    let mut rng = seed::rng(12);
    for _ in 0..50 {
        let d = 6;
        let mut w = Array2::zeros((d, d));
        for k in 0..d {
            for j in k + 1..d {
                w[[k, j]] = <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng).abs();
            }
        }
        let (h, _) = acyclicity(&w).unwrap();
        assert!(h.abs() < 1e-10);
        assert!(topological_order(&threshold_graph(&w, 0.3)).is_some());
    }
}
