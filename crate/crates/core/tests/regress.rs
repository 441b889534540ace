use ndarray::{array, Array2, Axis};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use sugar_core::regress::fit_conditional_mean;
use sugar_core::seed;
use sugar_core::RegressConfig;

/// Columns `(x1, noise, x3)` with `x3 = sin(x1) + 0.5 x2 + ε`, `ε ~ N(0, 0.1²)`.
fn sine_data(n: usize, seed_value: u64) -> Array2<f64> {
    let mut rng = seed::rng(seed_value);
    let eps = Normal::new(0.0, 0.1).unwrap();
    let mut x = Array2::<f64>::zeros((n, 3));
    for mut row in x.axis_iter_mut(Axis(0)) {
        row[0] = rng.random_range(-3.0..3.0);
        row[1] = rng.random_range(-1.0..1.0);
        row[2] = row[0].sin() + 0.5 * row[1] + eps.sample(&mut rng);
    }
    x
}

fn grid() -> Array2<f64> {
    let mut g = Array2::zeros((41 * 5, 3));
    for (r, mut row) in g.axis_iter_mut(Axis(0)).enumerate() {
        row[0] = -2.5 + 5.0 * (r / 5) as f64 / 40.0;
        row[1] = -0.8 + 0.4 * (r % 5) as f64;
    }
    g
}

fn truth(row: ndarray::ArrayView1<f64>) -> f64 {
    row[0].sin() + 0.5 * row[1]
}

#[test]
fn recovers_a_sine_mean_with_small_grid_error() {
    let data = sine_data(4000, 1);
    let model = fit_conditional_mean(data.view(), 2, &[0, 1], &RegressConfig::default(), 0, 9).unwrap();
    let g = grid();
    let pred = model.predict_rows(g.view()).unwrap();
    let mse = g.axis_iter(Axis(0)).zip(&pred).map(|(row, p)| (p - truth(row)).powi(2)).sum::<f64>() / g.nrows() as f64;
    assert!(mse < 0.02, "grid MSE {mse}");
}

#[test]
fn loss_trace_is_finite_and_improves() {
    let data = sine_data(1000, 2);
    let cfg = RegressConfig {
        epochs: 40,
        ..RegressConfig::default()
    };
    let model = fit_conditional_mean(data.view(), 2, &[0, 1], &cfg, 0, 3).unwrap();
    let trace = &model.training_loss_trace;
    assert_eq!(trace.len(), 40);
    assert!(trace.iter().all(|v| v.is_finite()));
    let best_late = trace[20..].iter().cloned().fold(f64::INFINITY, f64::min);
    assert!(best_late < 0.5 * trace[0], "first {} best late {best_late}", trace[0]);
}

#[test]
fn predictions_follow_the_feature_index_map() {
    let data = sine_data(1000, 4);
    let cfg = RegressConfig {
        epochs: 20,
        ..RegressConfig::default()
    };
    let model = fit_conditional_mean(data.view(), 2, &[1, 0], &cfg, 0, 5).unwrap();
    assert_eq!(model.feature_index_map, vec![1, 0]);
    let rows = array![[0.3, -0.7, 9.0], [-1.2, 0.4, -9.0]];
    let batch = model.predict_rows(rows.view()).unwrap();
    for (r, row) in rows.axis_iter(Axis(0)).enumerate() {
        let single = model.predict(&[row[1], row[0]]).unwrap();
        assert!((single - batch[r]).abs() < 1e-12);
    }
}

#[test]
fn member_order_does_not_change_the_fitted_function() {
    let data = sine_data(4000, 6);
    let cfg = RegressConfig::default();
    let a = fit_conditional_mean(data.view(), 2, &[0, 1], &cfg, 0, 7).unwrap();
    let b = fit_conditional_mean(data.view(), 2, &[1, 0], &cfg, 0, 8).unwrap();
    let g = grid();
    let pa = a.predict_rows(g.view()).unwrap();
    let pb = b.predict_rows(g.view()).unwrap();
    let gap = pa.iter().zip(&pb).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / g.nrows() as f64;
    assert!(gap < 0.02, "mean squared gap {gap}");
}

#[test]
fn empty_member_set_gives_the_sample_mean() {
    let data = sine_data(500, 10);
    let model = fit_conditional_mean(data.view(), 2, &[], &RegressConfig::default(), 1, 0).unwrap();
    let mean = data.column(2).mean().unwrap();
    let p = model.predict_rows(grid().view()).unwrap();
    assert!(p.iter().all(|&v| (v - mean).abs() < 1e-12));
    assert_eq!(model.half_id, 1);
}
