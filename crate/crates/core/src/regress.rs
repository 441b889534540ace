//! Conditional-mean regression `E(X_j | X_M)` by MLP least squares.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{Activation, Adam, AdamConfig, Mlp};
use crate::seed::{self, Stream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RegressConfig {
    pub hidden: Vec<usize>,
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    pub activation: Activation,
}

impl Default for RegressConfig {
    fn default() -> Self {
        RegressConfig {
            hidden: vec![32, 32],
            epochs: 200,
            batch_size: 64,
            adam: AdamConfig::default(),
            activation: Activation::Relu,
        }
    }
}

impl RegressConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden.iter().any(|&h| h == 0) {
            return Err(Error::config("regression hidden widths must be positive"));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::config("regression epochs and batch size must be positive"));
        }
        self.adam.validate()
    }
}

/// Per-column affine map to zero mean and unit variance. Constant columns
/// keep scale 1.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub mean: Array1<f64>,
    pub scale: Array1<f64>,
}

impl Standardizer {
    pub fn fit(x: ArrayView2<f64>) -> Self {
        let n = x.nrows().max(1) as f64;
        let mean = x.sum_axis(Axis(0)) / n;
        let scale = Array1::from_iter(x.columns().into_iter().zip(mean.iter()).map(|(c, &m)| {
            let sd = (c.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n).sqrt();
            if sd > 1e-12 {
                sd
            } else {
                1.0
            }
        }));
        Standardizer { mean, scale }
    }

    pub fn identity(dim: usize) -> Self {
        Standardizer {
            mean: Array1::zeros(dim),
            scale: Array1::ones(dim),
        }
    }

    pub fn apply(&self, x: ArrayView2<f64>) -> Array2<f64> {
        (&x - &self.mean) / &self.scale
    }

    pub fn apply_row(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.mean.iter().zip(self.scale.iter()))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
enum MeanFunction {
    Constant(f64),
    Network {
        mlp: Mlp,
        inputs: Standardizer,
        target_mean: f64,
        target_scale: f64,
    },
}

/// Fitted `ĝ(x) = Ê(X_target | X_features = x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalMeanModel {
    function: MeanFunction,
    /// Conditioning-variable indices, in input order.
    pub feature_index_map: Vec<usize>,
    pub target: usize,
    pub half_id: usize,
    /// Mean squared error per epoch on the standardized target.
    pub training_loss_trace: Vec<f64>,
}

impl ConditionalMeanModel {
    /// `ĝ` for an empty conditioning set: the sample mean of the target.
    pub fn constant(target: usize, value: f64, half_id: usize) -> Self {
        ConditionalMeanModel {
            function: MeanFunction::Constant(value),
            feature_index_map: Vec::new(),
            target,
            half_id,
            training_loss_trace: Vec::new(),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.feature_index_map.len()
    }

    pub fn network(&self) -> Option<&Mlp> {
        match &self.function {
            MeanFunction::Network { mlp, .. } => Some(mlp),
            MeanFunction::Constant(_) => None,
        }
    }

    /// Prediction from the conditioning values, ordered as `feature_index_map`.
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.input_dim() {
            return Err(Error::contract(format!(
                "regression expects {} inputs, got {}",
                self.input_dim(),
                x.len()
            )));
        }
        match &self.function {
            MeanFunction::Constant(c) => Ok(*c),
            MeanFunction::Network {
                mlp,
                inputs,
                target_mean,
                target_scale,
            } => {
                let z = mlp.forward(&inputs.apply_row(x))?[0];
                Ok(target_mean + target_scale * z)
            }
        }
    }

    /// Predictions for full observation rows (all `d` variables).
    pub fn predict_rows(&self, rows: ArrayView2<f64>) -> Result<Array1<f64>> {
        if let Some(&bad) = self.feature_index_map.iter().find(|&&c| c >= rows.ncols()) {
            return Err(Error::contract(format!(
                "feature {bad} out of range for rows with {} columns",
                rows.ncols()
            )));
        }
        match &self.function {
            MeanFunction::Constant(c) => Ok(Array1::from_elem(rows.nrows(), *c)),
            MeanFunction::Network {
                mlp,
                inputs,
                target_mean,
                target_scale,
            } => {
                let x = rows.select(Axis(1), &self.feature_index_map);
                let out = mlp.forward_batch(inputs.apply(x.view()).view())?;
                Ok(out.column(0).mapv(|z| target_mean + target_scale * z))
            }
        }
    }
}

/// Fits `E(X_target | X_members)` on the rows of one half. Inputs and target
/// are standardized internally; an empty member set yields the sample mean.
pub fn fit_conditional_mean(
    rows: ArrayView2<f64>,
    target: usize,
    members: &[usize],
    config: &RegressConfig,
    half_id: usize,
    seed: u64,
) -> Result<ConditionalMeanModel> {
    config.validate()?;
    let (n, d) = rows.dim();
    if n == 0 {
        return Err(Error::contract("regression on an empty data half"));
    }
    if target >= d || members.iter().any(|&m| m >= d) {
        return Err(Error::contract(format!("variable index out of range for {d} columns")));
    }
    if members.contains(&target) {
        return Err(Error::contract("target appears among its own regressors"));
    }
    let y = rows.column(target);
    if members.is_empty() {
        return Ok(ConditionalMeanModel::constant(target, y.sum() / n as f64, half_id));
    }

    let x_raw = rows.select(Axis(1), members);
    let inputs = Standardizer::fit(x_raw.view());
    let x = inputs.apply(x_raw.view());
    let y_scaler = Standardizer::fit(y.insert_axis(Axis(1)));
    let (target_mean, target_scale) = (y_scaler.mean[0], y_scaler.scale[0]);
    let y = y.mapv(|v| (v - target_mean) / target_scale);

    let mut dims = vec![members.len()];
    dims.extend(&config.hidden);
    dims.push(1);
    let mut mlp = Mlp::init(&dims, config.activation, seed::derive(seed, Stream::Init, &[]))?;
    let mut adam = Adam::for_mlp(&mlp, config.adam);
    let mut rng = seed::rng(seed::derive(seed, Stream::Shuffle, &[]));
    let mut order: Vec<usize> = (0..n).collect();
    let mut trace = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(config.batch_size) {
            let xb = x.select(Axis(0), batch);
            let yb = y.select(Axis(0), batch);
            let t = mlp.forward_trace(xb.view())?;
            let resid = &t.output().column(0) - &yb;
            total += resid.iter().map(|r| r * r).sum::<f64>();
            let upstream = (resid * (2.0 / batch.len() as f64)).insert_axis(Axis(1));
            let (grads, _) = mlp.backward(&t, upstream.view())?;
            adam.step(&mut mlp, &grads)
                .map_err(|_| Error::divergence("conditional-mean regression", Some(epoch)))?;
        }
        let loss = total / n as f64;
        if !loss.is_finite() || !mlp.is_finite() {
            return Err(Error::divergence("conditional-mean regression", Some(epoch)));
        }
        trace.push(loss);
    }
    Ok(ConditionalMeanModel {
        function: MeanFunction::Network {
            mlp,
            inputs,
            target_mean,
            target_scale,
        },
        feature_index_map: members.to_vec(),
        target,
        half_id,
        training_loss_trace: trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand_distr::{Distribution, Normal};

    fn quick() -> RegressConfig {
        RegressConfig {
            epochs: 40,
            ..RegressConfig::default()
        }
    }

    #[test]
    fn empty_members_give_sample_mean() {
        let rows = ndarray::array![[1.0, 2.0], [3.0, 6.0]];
        let m = fit_conditional_mean(rows.view(), 1, &[], &quick(), 1, 0).unwrap();
        assert_eq!(m.predict(&[]).unwrap(), 4.0);
        assert!(m.network().is_none());
        assert_eq!(m.predict_rows(rows.view()).unwrap().to_vec(), vec![4.0, 4.0]);
    }

    #[test]
    fn constant_target_is_recovered() {
        let mut rng = seed::rng(1);
        let rows = Array2::from_shape_fn((500, 2), |(_, c)| if c == 1 { 3.5 } else { rng.random_range(-1.0..1.0) });
        let m = fit_conditional_mean(rows.view(), 1, &[0], &quick(), 1, 2).unwrap();
        for x in [-1.0, -0.3, 0.0, 0.8, 1.0] {
            assert!((m.predict(&[x]).unwrap() - 3.5).abs() < 1e-2);
        }
    }

    #[test]
    fn linear_truth_is_recovered() {
        let mut rng = seed::rng(3);
        let mut rows = Array2::zeros((4000, 2));
        for mut r in rows.rows_mut() {
            let x: f64 = rng.random_range(-1.0..1.0);
            r[0] = x;
            r[1] = 2.0 * x;
        }
        let m = fit_conditional_mean(rows.view(), 1, &[0], &quick(), 1, 4).unwrap();
        let pred = m.predict_rows(rows.view()).unwrap();
        let mse = pred.iter().zip(rows.column(1)).map(|(p, y)| (p - y).powi(2)).sum::<f64>() / 4000.0;
        assert!(mse < 0.01, "mse {mse}");
    }

    #[test]
    fn input_length_is_checked() {
        let rows = Array2::from_shape_fn((20, 3), |(i, j)| (i * 3 + j) as f64);
        let m = fit_conditional_mean(rows.view(), 2, &[0, 1], &quick(), 1, 0).unwrap();
        assert!(matches!(m.predict(&[1.0]), Err(Error::Contract(_))));
        assert!(fit_conditional_mean(rows.view(), 2, &[2], &quick(), 1, 0).is_err());
    }

    #[test]
    fn training_is_deterministic() {
        let normal = Normal::new(0.0, 1.0).unwrap();
        let mut rng = seed::rng(5);
        let rows = Array2::from_shape_fn((200, 2), |_| normal.sample(&mut rng));
        let a = fit_conditional_mean(rows.view(), 1, &[0], &quick(), 1, 9).unwrap();
        let b = fit_conditional_mean(rows.view(), 1, &[0], &quick(), 1, 9).unwrap();
        assert_eq!(a, b);
        assert!(a.training_loss_trace.iter().all(|v| v.is_finite()));
    }
}
