use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use rand_distr::Uniform;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

/// Hidden-layer nonlinearity. The output layer is always affine.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Relu,
    Sigmoid,
}

impl Activation {
    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Sigmoid => 1.0 / (1.0 + (-z).exp()),
        }
    }

    /// Derivative expressed through the post-activation value.
    #[inline]
    fn derivative_from_output(self, a: f64) -> f64 {
        match self {
            Activation::Relu => {
                if a > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => a * (1.0 - a),
        }
    }
}

/// Parameters of a dense feed-forward network
/// `A_L σ(… σ(A_1 u + b_1) …) + b_L`.
///
/// Weight matrices are stored `(out_dim, in_dim)` in standard layout.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    weights: Vec<Array2<f64>>,
    biases: Vec<Array1<f64>>,
    activation: Activation,
}

/// Gradients with the same shapes as an [`Mlp`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
}

/// Post-activation values recorded by [`Mlp::forward_trace`].
///
/// `layers[0]` is the input batch and `layers[L]` the network output.
#[derive(Debug, Clone)]
pub struct Trace {
    pub layers: Vec<Array2<f64>>,
}

impl Trace {
    pub fn output(&self) -> &Array2<f64> {
        self.layers.last().expect("trace always holds the input")
    }
}

fn validate_dims(layer_dims: &[usize]) -> Result<()> {
    if layer_dims.len() < 2 {
        return Err(Error::config(format!(
            "an MLP needs at least an input and an output dimension, got {layer_dims:?}"
        )));
    }
    if let Some(pos) = layer_dims.iter().position(|&m| m == 0) {
        return Err(Error::config(format!(
            "layer dimension {pos} is zero in {layer_dims:?}"
        )));
    }
    Ok(())
}

impl Mlp {
    /// He-uniform weights (bound `sqrt(6 / fan_in)`) and zero biases.
    pub fn init(layer_dims: &[usize], activation: Activation, seed: u64) -> Result<Self> {
        validate_dims(layer_dims)?;
        let mut rng = seed::rng(seed);
        let mut weights = Vec::with_capacity(layer_dims.len() - 1);
        let mut biases = Vec::with_capacity(layer_dims.len() - 1);
        for pair in layer_dims.windows(2) {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let bound = (6.0 / fan_in as f64).sqrt();
            let dist = Uniform::new_inclusive(-bound, bound).expect("finite bound");
            let w = Array2::from_shape_fn((fan_out, fan_in), |_| rng.sample(dist));
            weights.push(w);
            biases.push(Array1::zeros(fan_out));
        }
        Ok(Mlp {
            weights,
            biases,
            activation,
        })
    }

    /// Builds a network from explicit parameters, checking the shape chain.
    pub fn from_parts(
        weights: Vec<Array2<f64>>,
        biases: Vec<Array1<f64>>,
        activation: Activation,
    ) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::contract("an MLP needs at least one layer"));
        }
        if weights.len() != biases.len() {
            return Err(Error::contract(format!(
                "{} weight matrices but {} bias vectors",
                weights.len(),
                biases.len()
            )));
        }
        for (l, (w, b)) in weights.iter().zip(&biases).enumerate() {
            if w.nrows() == 0 || w.ncols() == 0 {
                return Err(Error::contract(format!("layer {} has an empty weight matrix", l + 1)));
            }
            if w.nrows() != b.len() {
                return Err(Error::contract(format!(
                    "layer {}: weight has {} rows but bias has length {}",
                    l + 1,
                    w.nrows(),
                    b.len()
                )));
            }
            if l > 0 && w.ncols() != weights[l - 1].nrows() {
                return Err(Error::contract(format!(
                    "layer {}: expects {} inputs but layer {} produces {}",
                    l + 1,
                    w.ncols(),
                    l,
                    weights[l - 1].nrows()
                )));
            }
            if !w.iter().chain(b.iter()).all(|v| v.is_finite()) {
                return Err(Error::contract(format!("layer {} has non-finite parameters", l + 1)));
            }
        }
        let weights = weights
            .into_iter()
            .map(|w| w.as_standard_layout().into_owned())
            .collect();
        Ok(Mlp {
            weights,
            biases,
            activation,
        })
    }

    pub fn layer_dims(&self) -> Vec<usize> {
        let mut dims = vec![self.weights[0].ncols()];
        dims.extend(self.weights.iter().map(|w| w.nrows()));
        dims
    }

    pub fn input_dim(&self) -> usize {
        self.weights[0].ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.weights.last().map(|w| w.nrows()).unwrap_or(0)
    }

    /// Number of affine layers `L`.
    pub fn depth(&self) -> usize {
        self.weights.len()
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn weights(&self) -> &[Array2<f64>] {
        &self.weights
    }

    pub fn biases(&self) -> &[Array1<f64>] {
        &self.biases
    }

    pub fn param_count(&self) -> usize {
        self.weights
            .iter()
            .zip(&self.biases)
            .map(|(w, b)| w.len() + b.len())
            .sum()
    }

    pub fn is_finite(&self) -> bool {
        self.weights
            .iter()
            .zip(&self.biases)
            .all(|(w, b)| w.iter().chain(b.iter()).all(|v| v.is_finite()))
    }

    /// Mutable views over every parameter buffer in canonical order
    /// (`A_1, b_1, A_2, b_2, …`).
    pub fn buffers_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = Vec::with_capacity(2 * self.weights.len());
        for (w, b) in self.weights.iter_mut().zip(self.biases.iter_mut()) {
            out.push(w.as_slice_mut().expect("standard layout"));
            out.push(b.as_slice_mut().expect("contiguous"));
        }
        out
    }

    /// Single-sample forward pass.
    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        if input.len() != self.input_dim() {
            return Err(Error::contract(format!(
                "layer 1 expects input of length {}, got {}",
                self.input_dim(),
                input.len()
            )));
        }
        let mut current = input.to_vec();
        let last = self.weights.len() - 1;
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let mut next = b.to_vec();
            for (r, out) in next.iter_mut().enumerate() {
                let row = w.row(r);
                *out += row.iter().zip(&current).map(|(a, x)| a * x).sum::<f64>();
            }
            if l < last {
                for v in &mut next {
                    *v = self.activation.apply(*v);
                }
            }
            current = next;
        }
        Ok(current)
    }

    /// Batched forward pass over rows of `x`.
    pub fn forward_batch(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check_batch(x)?;
        let mut current = x.to_owned();
        let last = self.weights.len() - 1;
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            current = self.affine(current.view(), w, b);
            if l < last {
                current.mapv_inplace(|z| self.activation.apply(z));
            }
        }
        Ok(current)
    }

    /// Forward pass that keeps every layer's post-activation output.
    pub fn forward_trace(&self, x: ArrayView2<f64>) -> Result<Trace> {
        self.check_batch(x)?;
        let mut layers = Vec::with_capacity(self.weights.len() + 1);
        layers.push(x.to_owned());
        let last = self.weights.len() - 1;
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let mut z = self.affine(layers[l].view(), w, b);
            if l < last {
                z.mapv_inplace(|v| self.activation.apply(v));
            }
            layers.push(z);
        }
        Ok(Trace { layers })
    }

    /// Reverse-mode pass: given `dLoss/dOutput` per sample, returns parameter
    /// gradients summed over the batch and per-sample input gradients.
    pub fn backward(&self, trace: &Trace, upstream: ArrayView2<f64>) -> Result<(Gradients, Array2<f64>)> {
        let out = trace.output();
        if trace.layers.len() != self.weights.len() + 1 {
            return Err(Error::contract(format!(
                "trace holds {} layers, network has {}",
                trace.layers.len() - 1,
                self.weights.len()
            )));
        }
        if upstream.dim() != out.dim() {
            return Err(Error::contract(format!(
                "layer {}: upstream gradient has shape {:?}, output has shape {:?}",
                self.weights.len(),
                upstream.dim(),
                out.dim()
            )));
        }
        let depth = self.weights.len();
        let mut gw = Vec::with_capacity(depth);
        let mut gb = Vec::with_capacity(depth);
        let mut delta = upstream.as_standard_layout().into_owned();
        for l in (0..depth).rev() {
            let input = &trace.layers[l];
            gw.push(delta.t().dot(input).as_standard_layout().into_owned());
            gb.push(delta.sum_axis(Axis(0)));
            let mut back = delta.dot(&self.weights[l]);
            if l > 0 {
                let act = self.activation;
                back.zip_mut_with(input, |g, &a| *g *= act.derivative_from_output(a));
            }
            delta = back;
        }
        gw.reverse();
        gb.reverse();
        Ok((
            Gradients {
                weights: gw,
                biases: gb,
            },
            delta,
        ))
    }

    /// Convenience wrapper: forward then backward on the same batch.
    pub fn backward_batch(
        &self,
        x: ArrayView2<f64>,
        upstream: ArrayView2<f64>,
    ) -> Result<(Gradients, Array2<f64>)> {
        if x.nrows() == 0 {
            return Err(Error::contract("backward on an empty batch"));
        }
        let trace = self.forward_trace(x)?;
        self.backward(&trace, upstream)
    }

    fn check_batch(&self, x: ArrayView2<f64>) -> Result<()> {
        if x.ncols() != self.input_dim() {
            return Err(Error::contract(format!(
                "layer 1 expects {} input columns, got {}",
                self.input_dim(),
                x.ncols()
            )));
        }
        Ok(())
    }

    fn affine(&self, x: ArrayView2<f64>, w: &Array2<f64>, b: &Array1<f64>) -> Array2<f64> {
        let mut z = x.dot(&w.t());
        z += b;
        z
    }
}

impl Gradients {
    pub fn zeros_like(mlp: &Mlp) -> Self {
        Gradients {
            weights: mlp.weights.iter().map(|w| Array2::zeros(w.raw_dim())).collect(),
            biases: mlp.biases.iter().map(|b| Array1::zeros(b.len())).collect(),
        }
    }

    pub fn buffers(&self) -> Vec<&[f64]> {
        let mut out = Vec::with_capacity(2 * self.weights.len());
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.push(w.as_slice().expect("standard layout"));
            out.push(b.as_slice().expect("contiguous"));
        }
        out
    }

    pub fn scale(&mut self, factor: f64) {
        for w in &mut self.weights {
            *w *= factor;
        }
        for b in &mut self.biases {
            *b *= factor;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.weights
            .iter()
            .zip(&self.biases)
            .all(|(w, b)| w.iter().chain(b.iter()).all(|v| v.is_finite()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    fn relu_pair() -> Mlp {
        Mlp::from_parts(
            vec![array![[1.0], [-1.0]], array![[1.0, 1.0]]],
            vec![array![0.0, 0.0], array![0.0]],
            Activation::Relu,
        )
        .unwrap()
    }

    #[test]
    fn single_affine_layer_is_a_projection() {
        let net = Mlp::from_parts(vec![array![[1.0, 0.0]]], vec![array![0.0]], Activation::Relu).unwrap();
        assert_eq!(net.forward(&[1.5, -2.0]).unwrap(), vec![1.5]);
    }

    #[test]
    fn relu_hand_evaluation() {
        assert_eq!(relu_pair().forward(&[3.0]).unwrap(), vec![3.0]);
        assert_eq!(relu_pair().forward(&[-2.0]).unwrap(), vec![2.0]);
    }

    /// Straight-line re-evaluation of the nested composition, independent of
    /// the matrix code path.
    fn reference_forward(net: &Mlp, input: &[f64]) -> Vec<f64> {
        let mut h: Vec<f64> = input.to_vec();
        for l in 0..net.depth() {
            let w = &net.weights()[l];
            let b = &net.biases()[l];
            let mut next = vec![0.0; w.nrows()];
            for r in 0..w.nrows() {
                let mut acc = b[r];
                for c in 0..w.ncols() {
                    acc += w[[r, c]] * h[c];
                }
                next[r] = if l + 1 < net.depth() { acc.max(0.0) } else { acc };
            }
            h = next;
        }
        h
    }

    #[test]
    fn random_network_matches_reference_recursion() {
        let net = Mlp::init(&[3, 4, 1], Activation::Relu, 11).unwrap();
        let input = [0.3, -1.2, 2.5];
        let expected = reference_forward(&net, &input);
        let single = net.forward(&input).unwrap();
        let batch = net
            .forward_batch(ndarray::Array2::from_shape_vec((1, 3), input.to_vec()).unwrap().view())
            .unwrap();
        assert_abs_diff_eq!(single[0], expected[0], epsilon = 1e-12);
        assert_abs_diff_eq!(batch[[0, 0]], expected[0], epsilon = 1e-12);
    }

    #[test]
    fn init_is_deterministic_and_bounded() {
        let a = Mlp::init(&[2, 3, 1], Activation::Relu, 5).unwrap();
        let b = Mlp::init(&[2, 3, 1], Activation::Relu, 5).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.weights()[0].dim(), (3, 2));
        assert_eq!(a.weights()[1].dim(), (1, 3));
        for w in a.weights() {
            let bound = (6.0 / w.ncols() as f64).sqrt();
            assert!(w.iter().all(|v| v.abs() <= bound));
        }
        assert!(a.biases().iter().all(|b| b.iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn init_rejects_zero_dimension() {
        assert!(matches!(Mlp::init(&[2, 0, 1], Activation::Relu, 0), Err(Error::Config(_))));
        assert!(matches!(Mlp::init(&[2], Activation::Relu, 0), Err(Error::Config(_))));
    }

    #[test]
    fn forward_rejects_wrong_input_length() {
        let err = relu_pair().forward(&[1.0, 2.0]).unwrap_err();
        assert!(err.to_string().contains("layer 1"));
    }

    #[test]
    fn from_parts_names_the_broken_layer() {
        let err = Mlp::from_parts(
            vec![array![[1.0], [2.0]], array![[1.0, 1.0, 1.0]]],
            vec![array![0.0, 0.0], array![0.0]],
            Activation::Relu,
        )
        .unwrap_err();
        assert!(err.to_string().contains("layer 2"), "{err}");
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let net = Mlp::init(&[3, 5, 2], Activation::Sigmoid, 1).unwrap();
        let x = Array2::from_shape_fn((4, 3), |(i, j)| (i as f64) - (j as f64) * 0.5);
        let (g, gx) = net.backward_batch(x.view(), Array2::zeros((4, 2)).view()).unwrap();
        assert!(g.weights.iter().all(|w| w.iter().all(|&v| v == 0.0)));
        assert!(g.biases.iter().all(|b| b.iter().all(|&v| v == 0.0)));
        assert!(gx.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn linear_layer_squared_loss_closed_form() {
        let net = Mlp::from_parts(vec![array![[0.5, -1.0]]], vec![array![0.25]], Activation::Relu).unwrap();
        let x = array![[2.0, 1.0]];
        let y = 0.7;
        let pred = net.forward_batch(x.view()).unwrap()[[0, 0]];
        let upstream = array![[2.0 * (pred - y)]];
        let (g, _) = net.backward_batch(x.view(), upstream.view()).unwrap();
        let resid = 0.5 * 2.0 - 1.0 + 0.25 - y;
        assert_abs_diff_eq!(g.weights[0][[0, 0]], 2.0 * resid * 2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(g.weights[0][[0, 1]], 2.0 * resid * 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(g.biases[0][0], 2.0 * resid, epsilon = 1e-14);
    }

    #[test]
    fn backward_rejects_shape_mismatch() {
        let net = relu_pair();
        let x = array![[1.0], [2.0]];
        assert!(net.backward_batch(x.view(), Array2::zeros((2, 2)).view()).is_err());
        assert!(net
            .backward_batch(Array2::zeros((0, 1)).view(), Array2::zeros((0, 1)).view())
            .is_err());
    }
}
