use ndarray::Array2;

use crate::error::{Error, Result};

fn one_norm(a: &Array2<f64>) -> f64 {
    a.columns()
        .into_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Matrix exponential by scaling and squaring with a Taylor core.
///
/// The matrix is scaled so its 1-norm is at most 1/2; the series is then
/// summed until the next term is negligible relative to the partial sum.
pub fn expm(a: &Array2<f64>) -> Array2<f64> {
    let n = a.nrows();
    let norm = one_norm(a);
    let squarings = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as i32
    } else {
        0
    };
    let scaled = a / 2f64.powi(squarings);
    let mut result = Array2::<f64>::eye(n);
    let mut term = Array2::<f64>::eye(n);
    for k in 1..=40 {
        term = term.dot(&scaled) / k as f64;
        result += &term;
        if one_norm(&term) <= 1e-18 * one_norm(&result) {
            break;
        }
    }
    for _ in 0..squarings {
        result = result.dot(&result);
    }
    result
}

/// Acyclicity penalty `h(W) = tr(exp(W∘W)) − d` and its gradient
/// `2 exp(W∘W)^T ∘ W`.
pub fn acyclicity(w: &Array2<f64>) -> Result<(f64, Array2<f64>)> {
    if w.nrows() != w.ncols() {
        return Err(Error::contract(format!(
            "acyclicity needs a square matrix, got {}x{}",
            w.nrows(),
            w.ncols()
        )));
    }
    if w.iter().any(|v| !v.is_finite()) {
        return Err(Error::contract("acyclicity of a non-finite matrix"));
    }
    let (h, e) = acyclicity_of_squares(&w.mapv(|v| v * v));
    let grad = 2.0 * &e.t() * w;
    Ok((h, grad))
}

/// `h` evaluated on an already-squared matrix `S = W∘W`; also returns
/// `exp(S)` so callers can form gradients in their own parameterization.
pub(crate) fn acyclicity_of_squares(s: &Array2<f64>) -> (f64, Array2<f64>) {
    let e = expm(s);
    let h = e.diag().sum() - s.nrows() as f64;
    (h, e)
}
