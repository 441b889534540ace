//! DAG structure learning with per-node MLPs under a smooth acyclicity
//! constraint, solved by an augmented Lagrangian with Adam inner solves.
//!
//! Node `j` is modeled by an MLP `R^d -> R` whose first-layer column `j` is
//! fixed at zero. The weighted graph `W[k][j]` is the Euclidean norm of column
//! `k` of node `j`'s first layer. The first layer is split into non-negative
//! parts `A = A⁺ − A⁻` so the L1 penalty is linear and projected Adam steps
//! can set unused inputs exactly to zero.

mod acyclicity;
mod graph;

use std::io::Write;

use ndarray::{s, Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

pub use acyclicity::{acyclicity, expm};
pub use graph::{ancestor_sets, find_cycle, threshold_graph, topological_order};

use crate::error::{Error, Result};
use crate::nn::{Activation, Adam, AdamConfig, Mlp};

/// How each variable is rescaled before structure learning.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preprocess {
    /// Subtract the per-variable mean.
    Center,
    /// Center and scale each variable to unit variance.
    Standardize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StructuralConfig {
    /// L1 weight on first-layer weights.
    pub lambda: f64,
    /// Ridge weight `ridge/2 * ‖·‖²` on all network weights (not biases);
    /// without it the second layer can absorb scale and shrink `W` freely.
    pub ridge: f64,
    /// Hidden width of each node MLP.
    pub hidden: usize,
    /// Edge threshold on `W`.
    pub threshold: f64,
    pub h_tol: f64,
    pub rho_init: f64,
    pub rho_mult: f64,
    pub rho_max: f64,
    /// Escalate `rho` unless `h` shrinks below this fraction of its last value.
    pub shrink: f64,
    pub max_outer: usize,
    pub inner_max_iters: usize,
    /// Relative objective improvement per check window below which an inner
    /// solve stops early.
    pub inner_tol: f64,
    pub inner_check_every: usize,
    pub adam: AdamConfig,
    /// Normalize Adam steps per parameter block rather than per coordinate.
    pub block_scaled: bool,
    /// Learning rate at the end of an inner solve as a fraction of `adam.lr`
    /// (geometric decay).
    pub lr_final_fraction: f64,
    /// Radius of the Euclidean ball each node's output weights are projected
    /// onto, so the first layer carries the scale of the fit.
    pub output_norm: f64,
    /// Scale applied to the He-uniform first-layer initialization.
    pub init_scale: f64,
    pub preprocess: Preprocess,
}

impl Default for StructuralConfig {
    fn default() -> Self {
        StructuralConfig {
            lambda: 0.025,
            ridge: 0.01,
            hidden: 10,
            threshold: 0.3,
            h_tol: 1e-8,
            rho_init: 1.0,
            rho_mult: 10.0,
            rho_max: 1e16,
            shrink: 0.25,
            max_outer: 100,
            inner_max_iters: 800,
            inner_tol: 1e-4,
            inner_check_every: 50,
            adam: AdamConfig::with_lr(1e-2),
            block_scaled: true,
            lr_final_fraction: 0.05,
            init_scale: 0.1,
            output_norm: 1.0,
            preprocess: Preprocess::Center,
        }
    }
}

impl StructuralConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0) {
            return Err(Error::config(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        if !(self.ridge >= 0.0) {
            return Err(Error::config(format!("ridge must be >= 0, got {}", self.ridge)));
        }
        if self.hidden == 0 {
            return Err(Error::config("structural hidden width must be positive"));
        }
        if !(self.threshold > 0.0) {
            return Err(Error::config("edge threshold must be positive"));
        }
        if !(self.rho_init > 0.0 && self.rho_mult > 1.0 && self.rho_max >= self.rho_init) {
            return Err(Error::config("augmented Lagrangian schedule is inconsistent"));
        }
        if !(self.shrink > 0.0 && self.shrink < 1.0) {
            return Err(Error::config("shrink factor must lie in (0, 1)"));
        }
        if !(self.lr_final_fraction > 0.0 && self.lr_final_fraction <= 1.0) {
            return Err(Error::config("lr_final_fraction must lie in (0, 1]"));
        }
        if !(self.output_norm > 0.0) {
            return Err(Error::config("output_norm must be positive"));
        }
        if !(self.init_scale > 0.0) {
            return Err(Error::config("init_scale must be positive"));
        }
        if self.inner_max_iters == 0 || self.inner_check_every == 0 || self.max_outer == 0 {
            return Err(Error::config("iteration budgets must be positive"));
        }
        self.adam.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitStatus {
    Converged,
    /// The penalty reached `rho_max` (or the outer budget ran out) before
    /// `h <= h_tol`; the thresholded graph is still acyclic.
    ToleranceNotReached,
    /// Built from a caller-supplied adjacency.
    Supplied,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DagEstimate {
    /// One MLP per node (input dimension `d`); empty for supplied graphs.
    pub node_models: Vec<Mlp>,
    pub weight_matrix: Array2<f64>,
    /// `adjacency[[k, j]]`: edge `k -> j`.
    pub adjacency: Array2<bool>,
    pub ancestor_sets: Vec<Vec<usize>>,
    pub half_id: usize,
    pub status: FitStatus,
    pub final_h: f64,
    pub outer_iterations: usize,
    pub final_rho: f64,
}

impl DagEstimate {
    /// Wraps an externally supplied acyclic adjacency.
    pub fn from_adjacency(adjacency: Array2<bool>, half_id: usize) -> Result<Self> {
        let ancestor_sets = ancestor_sets(&adjacency)?;
        let weight_matrix = adjacency.mapv(|e| if e { 1.0 } else { 0.0 });
        Ok(DagEstimate {
            node_models: Vec::new(),
            weight_matrix,
            adjacency,
            ancestor_sets,
            half_id,
            status: FitStatus::Supplied,
            final_h: 0.0,
            outer_iterations: 0,
            final_rho: 0.0,
        })
    }

    pub fn n_vars(&self) -> usize {
        self.adjacency.nrows()
    }

    pub fn is_ancestor(&self, k: usize, j: usize) -> bool {
        self.ancestor_sets[j].binary_search(&k).is_ok()
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().filter(|&&e| e).count()
    }

    pub fn write_weight_csv<W: Write>(&self, out: W) -> Result<()> {
        write_matrix_csv(&self.weight_matrix.view(), out)
    }

    pub fn write_adjacency_csv<W: Write>(&self, out: W) -> Result<()> {
        let m = self.adjacency.mapv(|e| if e { 1.0 } else { 0.0 });
        write_matrix_csv(&m.view(), out)
    }
}

fn write_matrix_csv<W: Write>(m: &ArrayView2<f64>, mut out: W) -> Result<()> {
    for row in m.rows() {
        let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        writeln!(out, "{}", line.join(","))?;
    }
    Ok(())
}

/// Conditioning information for testing whether `k` is a parent of `j`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConditioningSet {
    pub target: usize,
    pub candidate: usize,
    /// Estimated ancestors of `target` without `candidate`, sorted.
    pub members: Vec<usize>,
    pub k_is_ancestor: bool,
}

pub fn conditioning_set(j: usize, k: usize, estimate: &DagEstimate) -> Result<ConditioningSet> {
    conditioning_set_from(j, k, &estimate.ancestor_sets)
}

pub fn conditioning_set_from(j: usize, k: usize, ancestors: &[Vec<usize>]) -> Result<ConditioningSet> {
    let d = ancestors.len();
    if j >= d || k >= d {
        return Err(Error::contract(format!("node index out of range: j={j}, k={k}, d={d}")));
    }
    if j == k {
        return Err(Error::contract(format!("target and candidate coincide ({j})")));
    }
    let anc = &ancestors[j];
    Ok(ConditioningSet {
        target: j,
        candidate: k,
        members: anc.iter().copied().filter(|&m| m != k).collect(),
        k_is_ancestor: anc.contains(&k),
    })
}

/// `W[k][j] = ‖column k of node j's first layer‖₂`.
pub fn weight_matrix(node_models: &[Mlp]) -> Result<Array2<f64>> {
    let d = node_models.len();
    let mut w = Array2::zeros((d, d));
    for (j, model) in node_models.iter().enumerate() {
        let first = &model.weights()[0];
        if first.ncols() != d {
            return Err(Error::contract(format!(
                "node {j} takes {} inputs, expected {d}",
                first.ncols()
            )));
        }
        for k in 0..d {
            w[[k, j]] = first.column(k).iter().map(|v| v * v).sum::<f64>().sqrt();
        }
    }
    Ok(w)
}

/// Stacked parameters of all node networks, first layers as `pos − neg`.
/// Rows `j*m..(j+1)*m` of the first layer belong to node `j`; `out` is the
/// block-diagonal `(d*m) x d` second layer.
#[derive(Clone)]
struct Stacked {
    d: usize,
    m: usize,
    pos: Array2<f64>,
    neg: Array2<f64>,
    b1: Array1<f64>,
    out: Array2<f64>,
    b2: Array1<f64>,
}

struct Evaluation {
    objective: f64,
    grads: [Array2<f64>; 2],
    gb1: Array1<f64>,
    gout: Array2<f64>,
    gb2: Array1<f64>,
}

impl Stacked {
    fn init(d: usize, m: usize, first_scale: f64, seed: u64) -> Result<Self> {
        let mut pos = Array2::zeros((d * m, d));
        let mut neg = Array2::zeros((d * m, d));
        let mut out = Array2::zeros((d * m, d));
        for j in 0..d {
            let net = Mlp::init(&[d, m, 1], Activation::Relu, crate::seed::derive(seed, crate::seed::Stream::Init, &[j as u64]))?;
            let a = &net.weights()[0];
            for h in 0..m {
                for k in 0..d {
                    let v = first_scale * a[[h, k]];
                    pos[[j * m + h, k]] = v.max(0.0);
                    neg[[j * m + h, k]] = (-v).max(0.0);
                }
                out[[j * m + h, j]] = net.weights()[1][[0, h]];
            }
        }
        let mut stacked = Stacked {
            d,
            m,
            pos,
            neg,
            b1: Array1::zeros(d * m),
            out,
            b2: Array1::zeros(d),
        };
        stacked.project(f64::INFINITY);
        Ok(stacked)
    }

    fn first_layer(&self) -> Array2<f64> {
        &self.pos - &self.neg
    }

    fn squared_norms(&self, a: &Array2<f64>) -> Array2<f64> {
        let (d, m) = (self.d, self.m);
        let mut s = Array2::zeros((d, d));
        for ((r, k), v) in a.indexed_iter() {
            s[[k, r / m]] += v * v;
        }
        debug_assert_eq!(s.nrows(), d);
        s
    }

    fn h(&self) -> f64 {
        let s = self.squared_norms(&self.first_layer());
        acyclicity::acyclicity_of_squares(&s).0
    }

    fn evaluate(&self, x: ArrayView2<f64>, lambda: f64, ridge: f64, alpha: f64, rho: f64) -> Evaluation {
        let (d, m) = (self.d, self.m);
        let n = x.nrows() as f64;
        let a = self.first_layer();
        let mut hidden = x.dot(&a.t());
        hidden += &self.b1;
        hidden.mapv_inplace(|z| z.max(0.0));
        let mut pred = hidden.dot(&self.out);
        pred += &self.b2;

        let resid = pred - x;
        let sq_loss = resid.iter().map(|r| r * r).sum::<f64>() / n;
        let dpred = resid * (2.0 / n);

        let gb2 = dpred.sum_axis(Axis(0));
        let mut gout = hidden.t().dot(&dpred);
        let mut dhidden = dpred.dot(&self.out.t());
        ndarray::Zip::from(&mut dhidden).and(&hidden).for_each(|g, &hv| {
            if hv <= 0.0 {
                *g = 0.0;
            }
        });
        let gb1 = dhidden.sum_axis(Axis(0));
        let mut ga = dhidden.t().dot(&x);

        let sq = self.squared_norms(&a);
        let (h, expo) = acyclicity::acyclicity_of_squares(&sq);
        let coef = alpha + rho * h;
        for ((r, k), g) in ga.indexed_iter_mut() {
            let j = r / m;
            *g = if k == j {
                0.0
            } else {
                *g + (coef * 2.0 * expo[[j, k]] + ridge) * a[[r, k]]
            };
        }
        for ((r, j), g) in gout.indexed_iter_mut() {
            *g = if r / m == j { *g + ridge * self.out[[r, j]] } else { 0.0 };
        }
        debug_assert_eq!(gout.ncols(), d);
        let l1 = self.pos.sum() + self.neg.sum();
        let l2 = a.iter().chain(self.out.iter()).map(|v| v * v).sum::<f64>();
        let objective = sq_loss + lambda * l1 + 0.5 * ridge * l2 + alpha * h + 0.5 * rho * h * h;
        let gpos = ga.mapv(|g| g + lambda);
        let gneg = ga.mapv(|g| -g + lambda);
        Evaluation {
            objective,
            grads: [gpos, gneg],
            gb1,
            gout,
            gb2,
        }
    }

    fn project(&mut self, output_norm: f64) {
        let m = self.m;
        for j in 0..self.d {
            let mut block = self.out.slice_mut(s![j * m..(j + 1) * m, j]);
            let norm = block.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > output_norm {
                block *= output_norm / norm;
            }
        }
        for ((r, k), v) in self.pos.indexed_iter_mut() {
            *v = if k == r / m { 0.0 } else { v.max(0.0) };
        }
        for ((r, k), v) in self.neg.indexed_iter_mut() {
            *v = if k == r / m { 0.0 } else { v.max(0.0) };
        }
    }

    fn node_models(&self) -> Result<Vec<Mlp>> {
        let (d, m) = (self.d, self.m);
        let a = self.first_layer();
        (0..d)
            .map(|j| {
                let w1 = a.slice(s![j * m..(j + 1) * m, ..]).to_owned();
                let b1 = self.b1.slice(s![j * m..(j + 1) * m]).to_owned();
                let w2 = self.out.slice(s![j * m..(j + 1) * m, j]).to_owned().insert_axis(Axis(0));
                let b2 = Array1::from_elem(1, self.b2[j]);
                Mlp::from_parts(vec![w1, w2], vec![b1, b2], Activation::Relu)
            })
            .collect()
    }
}

fn preprocess(data: ArrayView2<f64>, mode: Preprocess) -> Array2<f64> {
    let mut x = data.to_owned();
    let n = x.nrows() as f64;
    for mut col in x.columns_mut() {
        let mean = col.sum() / n;
        col -= mean;
        if mode == Preprocess::Standardize {
            let sd = (col.iter().map(|v| v * v).sum::<f64>() / n).sqrt();
            if sd > 0.0 {
                col /= sd;
            }
        }
    }
    x
}

/// Runs Adam on the augmented Lagrangian subproblem from the current point
/// and leaves `params` at the best iterate seen.
fn solve_subproblem(
    params: &mut Stacked,
    adam: &mut Adam,
    x: ArrayView2<f64>,
    cfg: &StructuralConfig,
    alpha: f64,
    rho: f64,
    outer: usize,
) -> Result<f64> {
    let mut window_start = f64::INFINITY;
    let mut best = (f64::INFINITY, params.clone());
    let decay = cfg.lr_final_fraction.powf(1.0 / cfg.inner_max_iters as f64);
    for it in 0..=cfg.inner_max_iters {
        adam.set_lr(cfg.adam.lr * decay.powi(it as i32));
        let ev = params.evaluate(x, cfg.lambda, cfg.ridge, alpha, rho);
        if !ev.objective.is_finite() {
            return Err(Error::divergence("structure learning", Some(outer)));
        }
        if ev.objective < best.0 {
            best = (ev.objective, params.clone());
        }
        if it == cfg.inner_max_iters {
            break;
        }
        if it % cfg.inner_check_every == 0 {
            if window_start.is_finite()
                && (window_start - best.0) <= cfg.inner_tol * window_start.abs().max(1e-12)
            {
                break;
            }
            window_start = best.0;
        }
        let grads = [
            ev.grads[0].as_slice().expect("standard layout"),
            ev.grads[1].as_slice().expect("standard layout"),
            ev.gb1.as_slice().expect("contiguous"),
            ev.gout.as_slice().expect("standard layout"),
            ev.gb2.as_slice().expect("contiguous"),
        ];
        let mut bufs = [
            params.pos.as_slice_mut().expect("standard layout"),
            params.neg.as_slice_mut().expect("standard layout"),
            params.b1.as_slice_mut().expect("contiguous"),
            params.out.as_slice_mut().expect("standard layout"),
            params.b2.as_slice_mut().expect("contiguous"),
        ];
        adam.step_buffers(&mut bufs, &grads)
            .map_err(|_| Error::divergence("structure learning", Some(outer)))?;
        params.project(cfg.output_norm);
    }
    *params = best.1;
    Ok(best.0)
}

fn new_adam(params: &Stacked, cfg: &StructuralConfig) -> Adam {
    let sizes = vec![
        params.pos.len(),
        params.neg.len(),
        params.b1.len(),
        params.out.len(),
        params.b2.len(),
    ];
    let a = Adam::new(cfg.adam, sizes);
    if cfg.block_scaled {
        a.block_scaled()
    } else {
        a
    }
}

/// Learns a DAG from the rows of one data half.
pub fn fit_dag(data: ArrayView2<f64>, config: &StructuralConfig, half_id: usize, seed: u64) -> Result<DagEstimate> {
    config.validate()?;
    let (n, d) = data.dim();
    if n == 0 || d == 0 {
        return Err(Error::contract("structure learning on an empty data half"));
    }
    let x = preprocess(data, config.preprocess);
    let mut params = Stacked::init(d, config.hidden, config.init_scale, seed)?;
    params.project(config.output_norm);

    let mut adam = new_adam(&params, config);
    let mut alpha = 0.0;
    let mut rho = config.rho_init;
    let mut h = f64::INFINITY;
    let mut outer_done = 0;
    for outer in 0..config.max_outer {
        outer_done = outer + 1;
        let mut h_new;
        loop {
            solve_subproblem(&mut params, &mut adam, x.view(), config, alpha, rho, outer)?;
            h_new = params.h();
            if !h_new.is_finite() {
                return Err(Error::divergence("structure learning (acyclicity)", Some(outer)));
            }
            if h_new > config.shrink * h && h_new > config.h_tol && rho < config.rho_max {
                rho = (rho * config.rho_mult).min(config.rho_max);
            } else {
                break;
            }
        }
        h = h_new;
        alpha += rho * h;
        if h <= config.h_tol || rho >= config.rho_max {
            break;
        }
    }
    log::debug!("structure half {half_id}: h={h:e} rho={rho:e} outer={outer_done}");

    let status = if h <= config.h_tol {
        FitStatus::Converged
    } else {
        log::warn!("structure half {half_id}: acyclicity tolerance not reached (h={h:e})");
        FitStatus::ToleranceNotReached
    };
    let node_models = params.node_models()?;
    let w = weight_matrix(&node_models)?;
    let adjacency = threshold_graph(&w, config.threshold);
    let ancestor_sets = ancestor_sets(&adjacency)?;
    Ok(DagEstimate {
        node_models,
        weight_matrix: w,
        adjacency,
        ancestor_sets,
        half_id,
        status,
        final_h: h,
        outer_iterations: outer_done,
        final_rho: rho,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn weight_matrix_is_column_norm() {
        let zero = Mlp::from_parts(
            vec![Array2::zeros((2, 2)), Array2::ones((1, 2))],
            vec![Array1::zeros(2), Array1::zeros(1)],
            Activation::Relu,
        )
        .unwrap();
        let mut target = zero.clone();
        target = Mlp::from_parts(
            vec![array![[3.0, 0.0], [4.0, 0.0]], target.weights()[1].clone()],
            target.biases().to_vec(),
            Activation::Relu,
        )
        .unwrap();
        let w = weight_matrix(&[zero.clone(), zero.clone()]).unwrap();
        assert!(w.iter().all(|&v| v == 0.0));
        let w = weight_matrix(&[zero, target]).unwrap();
        assert_eq!(w[[0, 1]], 5.0);
        assert_eq!(w[[1, 1]], 0.0);
    }

    #[test]
    fn weight_matrix_rejects_wrong_input_dim() {
        let net = Mlp::init(&[3, 2, 1], Activation::Relu, 0).unwrap();
        assert!(weight_matrix(&[net.clone(), net]).is_err());
    }

    fn chain_estimate() -> DagEstimate {
        let mut adj = Array2::from_elem((3, 3), false);
        adj[[0, 1]] = true;
        adj[[1, 2]] = true;
        DagEstimate::from_adjacency(adj, 1).unwrap()
    }

    #[test]
    fn conditioning_on_chain() {
        let est = chain_estimate();
        let c = conditioning_set(2, 0, &est).unwrap();
        assert!(c.k_is_ancestor);
        assert_eq!(c.members, vec![1]);
        let rev = conditioning_set(0, 2, &est).unwrap();
        assert!(!rev.k_is_ancestor);
        assert!(rev.members.is_empty());
    }

    #[test]
    fn conditioning_on_vstructure_excludes_target_and_candidate() {
        let mut adj = Array2::from_elem((3, 3), false);
        adj[[0, 2]] = true;
        adj[[1, 2]] = true;
        let est = DagEstimate::from_adjacency(adj, 1).unwrap();
        let c = conditioning_set(2, 0, &est).unwrap();
        assert_eq!(c.members, vec![1]);
        assert!(!c.members.contains(&2) && !c.members.contains(&0));
    }

    #[test]
    fn conditioning_rejects_bad_indices() {
        let est = chain_estimate();
        assert!(conditioning_set(3, 0, &est).is_err());
        assert!(conditioning_set(1, 1, &est).is_err());
    }

    #[test]
    fn stacked_gradient_matches_finite_differences() {
        let d = 3;
        let x = Array2::from_shape_fn((20, d), |(i, j)| ((i * 7 + j * 3) % 11) as f64 / 5.0 - 1.0);
        let mut p = Stacked::init(d, 4, 1.0, 17).unwrap();
        p.b1.mapv_inplace(|_| 0.05);
        let (lambda, ridge, alpha, rho) = (0.01, 0.02, 0.3, 2.0);
        let ev = p.evaluate(x.view(), lambda, ridge, alpha, rho);
        let step = 1e-6;
        let mut checked = 0;
        for r in 0..d * 4 {
            for k in 0..d {
                if k == r / 4 || p.pos[[r, k]] <= 1e-3 {
                    continue;
                }
                let base = p.pos[[r, k]];
                p.pos[[r, k]] = base + step;
                let up = p.evaluate(x.view(), lambda, ridge, alpha, rho).objective;
                p.pos[[r, k]] = base - step;
                let down = p.evaluate(x.view(), lambda, ridge, alpha, rho).objective;
                p.pos[[r, k]] = base;
                let fd = (up - down) / (2.0 * step);
                let an = ev.grads[0][[r, k]];
                assert!((fd - an).abs() <= 1e-5 * (1.0 + an.abs()), "({r},{k}) fd {fd} an {an}");
                checked += 1;
            }
        }
        assert!(checked > 3);
        for j in 0..d {
            let base = p.b2[j];
            p.b2[j] = base + step;
            let up = p.evaluate(x.view(), lambda, ridge, alpha, rho).objective;
            p.b2[j] = base - step;
            let down = p.evaluate(x.view(), lambda, ridge, alpha, rho).objective;
            p.b2[j] = base;
            assert!(((up - down) / (2.0 * step) - ev.gb2[j]).abs() < 1e-6);
        }
    }

    #[test]
    fn stacked_models_match_node_mlps() {
        let d = 3;
        let p = Stacked::init(d, 5, 1.0, 3).unwrap();
        let x = array![[0.5, -1.0, 2.0]];
        let a = p.first_layer();
        let mut hidden = x.dot(&a.t());
        hidden += &p.b1;
        hidden.mapv_inplace(|v| v.max(0.0));
        let stacked: Vec<f64> = (0..d)
            .map(|j| (0..5).map(|h| hidden[[0, j * 5 + h]] * p.out[[j * 5 + h, j]]).sum::<f64>() + p.b2[j])
            .collect();
        let models = p.node_models().unwrap();
        for j in 0..d {
            let out = models[j].forward(&[0.5, -1.0, 2.0]).unwrap()[0];
            assert!((out - stacked[j]).abs() < 1e-12);
            assert!(models[j].weights()[0].column(j).iter().all(|&v| v == 0.0));
        }
    }
}
