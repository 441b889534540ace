//! Conditional generator trained by min-max Sinkhorn divergence.
//!
//! The cost is `c(x, y) = ½‖φ(x) − φ(y)‖²` with `φ(v) = v ⊕ tanh(critic(v))`
//! (or `φ = id`). Entropic OT values use uniform weights and are computed by
//! log-domain Sinkhorn with simultaneous averaged potential updates
//! `f ← ½(f + T_b(g))`, `g ← ½(g + T_a(f))`, which keeps the divergence
//! exactly symmetric in its arguments. Gradients are exact for the unrolled
//! iterations.

use ndarray::{concatenate, s, Array1, Array2, ArrayView2, Axis};
use rand::seq::index;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{Activation, Adam, AdamConfig, Gradients, Mlp, Trace};
use crate::regress::Standardizer;
use crate::seed::{self, Stream};

const UNDERFLOW: f64 = 1e-280;

/// Feature map used inside the transport cost.
#[derive(Debug, Clone, Copy)]
pub enum FeatureMap<'a> {
    Identity,
    /// `φ(v) = v ⊕ tanh(critic(v))`.
    Critic(&'a Mlp),
}

/// Entropic OT value between uniform weights on the rows and the columns of
/// `cost`, and optionally its gradient with respect to `cost`.
pub fn entropic_ot(cost: ArrayView2<f64>, eps: f64, iters: usize, with_grad: bool) -> Result<(f64, Option<Array2<f64>>)> {
    let (n, m) = cost.dim();
    if n == 0 || m == 0 {
        return Err(Error::contract("Sinkhorn on an empty batch"));
    }
    if !(eps > 0.0) {
        return Err(Error::contract(format!("Sinkhorn regularization must be positive, got {eps}")));
    }
    if iters == 0 {
        return Err(Error::contract("Sinkhorn needs at least one iteration"));
    }
    if cost.iter().any(|v| !v.is_finite()) {
        return Err(Error::contract("non-finite transport cost"));
    }
    match scaled_sinkhorn(cost, eps, iters, with_grad) {
        Some(out) => Ok(out),
        None => Ok(log_sinkhorn(cost, eps, iters, with_grad)),
    }
}

struct ScaledStep {
    w: f64,
    alpha: Array1<f64>,
    beta: Array1<f64>,
    gamma: Array1<f64>,
    delta: Array1<f64>,
}

/// Kernel-scaling form on `K̃ = exp(−(C − r ⊕ s)/ε)`. Returns `None` when a
/// scaling sum underflows so the caller can fall back to exact log-sum-exp.
fn scaled_sinkhorn(cost: ArrayView2<f64>, eps: f64, iters: usize, with_grad: bool) -> Option<(f64, Option<Array2<f64>>)> {
    let (n, m) = cost.dim();
    let r = cost.map_axis(Axis(1), |row| row.fold(f64::INFINITY, |a, &b| a.min(b)));
    let mut shifted = &cost - &r.view().insert_axis(Axis(1));
    let sc = shifted.map_axis(Axis(0), |col| col.fold(f64::INFINITY, |a, &b| a.min(b)));
    shifted -= &sc;
    let kt = shifted.mapv(|v| (-v / eps).exp());
    let (la, lb) = (1.0 / n as f64, 1.0 / m as f64);

    let mut f = Array1::<f64>::zeros(n);
    let mut g = Array1::<f64>::zeros(m);
    let mut steps = Vec::with_capacity(if with_grad { iters } else { 0 });
    for step in 0..iters {
        let w = if step == 0 { 1.0 } else { 0.5 };
        let u = (&g - &sc) / eps;
        let mu = u.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        let beta = u.mapv(|x| lb * (x - mu).exp());
        let gamma = kt.dot(&beta);
        let v = (&f - &r) / eps;
        let mv = v.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        let alpha = v.mapv(|x| la * (x - mv).exp());
        let delta = kt.t().dot(&alpha);
        let bad = |x: &f64| !(*x > UNDERFLOW) || !x.is_finite();
        if gamma.iter().any(bad) || delta.iter().any(bad) {
            return None;
        }
        let tb = Array1::from_iter((0..n).map(|i| r[i] - eps * (mu + gamma[i].ln())));
        let ta = Array1::from_iter((0..m).map(|j| sc[j] - eps * (mv + delta[j].ln())));
        f = &f * (1.0 - w) + &tb * w;
        g = &g * (1.0 - w) + &ta * w;
        if with_grad {
            steps.push(ScaledStep {
                w,
                alpha,
                beta,
                gamma,
                delta,
            });
        }
    }
    let value = la * f.sum() + lb * g.sum();
    if !value.is_finite() {
        return None;
    }
    if !with_grad {
        return Some((value, None));
    }

    let mut fb = Array1::from_elem(n, la);
    let mut gb = Array1::from_elem(m, lb);
    let k2 = 2 * steps.len();
    let mut left = Array2::<f64>::zeros((n, k2));
    let mut right = Array2::<f64>::zeros((m, k2));
    for (idx, st) in steps.iter().enumerate().rev() {
        let p = &fb / &st.gamma;
        let q = &gb / &st.delta;
        left.column_mut(2 * idx).assign(&(&p * st.w));
        right.column_mut(2 * idx).assign(&st.beta);
        left.column_mut(2 * idx + 1).assign(&st.alpha);
        right.column_mut(2 * idx + 1).assign(&(&q * st.w));
        let next_f = &fb * (1.0 - st.w) - &(&st.alpha * &kt.dot(&q)) * st.w;
        let next_g = &gb * (1.0 - st.w) - &(&st.beta * &kt.t().dot(&p)) * st.w;
        fb = next_f;
        gb = next_g;
    }
    let grad = kt * left.dot(&right.t());
    Some((value, Some(grad)))
}

fn lse_rows(z: &Array2<f64>) -> Array1<f64> {
    z.map_axis(Axis(1), |row| {
        let mx = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        mx + row.iter().map(|v| (v - mx).exp()).sum::<f64>().ln()
    })
}

/// Softmax weights `P_ij ∝ b_j exp((g_j − C_ij)/ε)` over `j` and
/// `Q_ij ∝ a_i exp((f_i − C_ij)/ε)` over `i`, with the soft-min values.
fn log_operators(
    cost: ArrayView2<f64>,
    f: &Array1<f64>,
    g: &Array1<f64>,
    eps: f64,
) -> (Array2<f64>, Array1<f64>, Array2<f64>, Array1<f64>) {
    let (n, m) = cost.dim();
    let (lna, lnb) = (-(n as f64).ln(), -(m as f64).ln());
    let zp = (&g.view().insert_axis(Axis(0)) - &cost) / eps + lnb;
    let lp = lse_rows(&zp);
    let p = (&zp - &lp.view().insert_axis(Axis(1))).mapv(f64::exp);
    let zq = ((&f.view().insert_axis(Axis(1)) - &cost) / eps + lna).reversed_axes();
    let lq = lse_rows(&zq.to_owned());
    let q = (&zq - &lq.view().insert_axis(Axis(1))).mapv(f64::exp).reversed_axes();
    (p, lp * -eps, q, lq * -eps)
}

fn log_sinkhorn(cost: ArrayView2<f64>, eps: f64, iters: usize, with_grad: bool) -> (f64, Option<Array2<f64>>) {
    let (n, m) = cost.dim();
    let (la, lb) = (1.0 / n as f64, 1.0 / m as f64);
    let mut f = Array1::<f64>::zeros(n);
    let mut g = Array1::<f64>::zeros(m);
    let mut history = Vec::with_capacity(iters);
    for step in 0..iters {
        let w = if step == 0 { 1.0 } else { 0.5 };
        let (_, tb, _, ta) = log_operators(cost, &f, &g, eps);
        if with_grad {
            history.push((w, f.clone(), g.clone()));
        }
        f = &f * (1.0 - w) + &tb * w;
        g = &g * (1.0 - w) + &ta * w;
    }
    let value = la * f.sum() + lb * g.sum();
    if !with_grad {
        return (value, None);
    }
    let mut fb = Array1::from_elem(n, la);
    let mut gb = Array1::from_elem(m, lb);
    let mut grad = Array2::<f64>::zeros((n, m));
    for (w, f_k, g_k) in history.into_iter().rev() {
        let (p, _, q, _) = log_operators(cost, &f_k, &g_k, eps);
        grad += &(&p * &fb.view().insert_axis(Axis(1)) * w);
        grad += &(&q * &gb.view().insert_axis(Axis(0)) * w);
        let next_f = &fb * (1.0 - w) - &q.dot(&gb) * w;
        let next_g = &gb * (1.0 - w) - &p.t().dot(&fb) * w;
        fb = next_f;
        gb = next_g;
    }
    (value, Some(grad))
}

/// `C_ij = ½‖x_i − y_j‖²`.
pub fn half_sq_cost(x: ArrayView2<f64>, y: ArrayView2<f64>) -> Array2<f64> {
    let xn = x.map_axis(Axis(1), |r| r.dot(&r));
    let yn = y.map_axis(Axis(1), |r| r.dot(&r));
    let mut c = x.dot(&y.t()) * -1.0;
    c += &(xn * 0.5).insert_axis(Axis(1));
    c += &(yn * 0.5).insert_axis(Axis(0));
    c.mapv_inplace(|v| v.max(0.0));
    c
}

/// Pulls a cost gradient back to the two point sets of `half_sq_cost`.
fn cost_grad_to_points(cbar: &Array2<f64>, x: ArrayView2<f64>, y: ArrayView2<f64>) -> (Array2<f64>, Array2<f64>) {
    let rows = cbar.sum_axis(Axis(1));
    let cols = cbar.sum_axis(Axis(0));
    let gx = &x * &rows.view().insert_axis(Axis(1)) - cbar.dot(&y);
    let gy = &y * &cols.view().insert_axis(Axis(1)) - cbar.t().dot(&x);
    (gx, gy)
}

struct Features {
    values: Array2<f64>,
    trace: Option<Trace>,
}

fn features(map: FeatureMap<'_>, v: ArrayView2<f64>) -> Result<Features> {
    match map {
        FeatureMap::Identity => Ok(Features {
            values: v.to_owned(),
            trace: None,
        }),
        FeatureMap::Critic(critic) => {
            let trace = critic.forward_trace(v)?;
            let squashed = trace.output().mapv(f64::tanh);
            Ok(Features {
                values: concatenate![Axis(1), v, squashed],
                trace: Some(trace),
            })
        }
    }
}

/// Pulls feature gradients back through `φ`, returning input gradients and
/// accumulating critic parameter gradients.
fn features_backward(
    map: FeatureMap<'_>,
    feats: &Features,
    gfeat: &Array2<f64>,
    critic_acc: &mut Option<Gradients>,
) -> Result<Array2<f64>> {
    match map {
        FeatureMap::Identity => Ok(gfeat.clone()),
        FeatureMap::Critic(critic) => {
            let p = feats.values.ncols() - critic.output_dim();
            let trace = feats.trace.as_ref().expect("critic features keep a trace");
            let mut gin = gfeat.slice(s![.., ..p]).to_owned();
            let tanh_part = feats.values.slice(s![.., p..]);
            let upstream = &gfeat.slice(s![.., p..]) * &tanh_part.mapv(|t| 1.0 - t * t);
            let (pg, ig) = critic.backward(trace, upstream.view())?;
            gin += &ig;
            match critic_acc {
                Some(acc) => {
                    for (a, b) in acc.weights.iter_mut().zip(&pg.weights) {
                        *a += b;
                    }
                    for (a, b) in acc.biases.iter_mut().zip(&pg.biases) {
                        *a += b;
                    }
                }
                None => *critic_acc = Some(pg),
            }
            Ok(gin)
        }
    }
}

/// Value and gradients of the debiased divergence.
#[derive(Debug, Clone)]
pub struct DivergenceGrad {
    pub value: f64,
    pub grad_a: Array2<f64>,
    pub grad_b: Array2<f64>,
    /// Gradient with respect to the critic parameters (critic maps only).
    pub critic: Option<Gradients>,
}

fn check_batches(a: ArrayView2<f64>, b: ArrayView2<f64>, eps: f64) -> Result<()> {
    if a.nrows() == 0 || b.nrows() == 0 {
        return Err(Error::contract("Sinkhorn divergence of an empty batch"));
    }
    if a.ncols() != b.ncols() {
        return Err(Error::contract(format!(
            "batches have {} and {} columns",
            a.ncols(),
            b.ncols()
        )));
    }
    if !(eps > 0.0) {
        return Err(Error::contract(format!("Sinkhorn regularization must be positive, got {eps}")));
    }
    Ok(())
}

/// `D̃ = 2 OT(a, b) − OT(a, a) − OT(b, b)`.
pub fn sinkhorn_divergence(a: ArrayView2<f64>, b: ArrayView2<f64>, map: FeatureMap<'_>, eps: f64, iters: usize) -> Result<f64> {
    check_batches(a, b, eps)?;
    let fa = features(map, a)?.values;
    let fb = features(map, b)?.values;
    let ab = entropic_ot(half_sq_cost(fa.view(), fb.view()).view(), eps, iters, false)?.0;
    let aa = entropic_ot(half_sq_cost(fa.view(), fa.view()).view(), eps, iters, false)?.0;
    let bb = entropic_ot(half_sq_cost(fb.view(), fb.view()).view(), eps, iters, false)?.0;
    Ok(2.0 * ab - aa - bb)
}

pub fn sinkhorn_divergence_grad(
    a: ArrayView2<f64>,
    b: ArrayView2<f64>,
    map: FeatureMap<'_>,
    eps: f64,
    iters: usize,
) -> Result<DivergenceGrad> {
    check_batches(a, b, eps)?;
    let fa = features(map, a)?;
    let fb = features(map, b)?;
    let (xa, xb) = (fa.values.view(), fb.values.view());

    let (ab, cab) = entropic_ot(half_sq_cost(xa, xb).view(), eps, iters, true)?;
    let (aa, caa) = entropic_ot(half_sq_cost(xa, xa).view(), eps, iters, true)?;
    let (bb, cbb) = entropic_ot(half_sq_cost(xb, xb).view(), eps, iters, true)?;
    let value = 2.0 * ab - aa - bb;
    if !value.is_finite() {
        return Err(Error::divergence("Sinkhorn divergence", None));
    }
    let (cab, caa, cbb) = (cab.expect("grad"), caa.expect("grad"), cbb.expect("grad"));
    let (ga1, gb1) = cost_grad_to_points(&cab, xa, xb);
    let (ga2, ga3) = cost_grad_to_points(&caa, xa, xa);
    let (gb2, gb3) = cost_grad_to_points(&cbb, xb, xb);
    let gfa = ga1 * 2.0 - ga2 - ga3;
    let gfb = gb1 * 2.0 - gb2 - gb3;

    let mut critic = None;
    let grad_a = features_backward(map, &fa, &gfa, &mut critic)?;
    let grad_b = features_backward(map, &fb, &gfb, &mut critic)?;
    Ok(DivergenceGrad {
        value,
        grad_a,
        grad_b,
        critic,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GanConfig {
    pub z_dim: usize,
    pub generator_hidden: Vec<usize>,
    pub critic_hidden: Vec<usize>,
    pub critic_features: usize,
    /// Entropic regularization on standardized data.
    pub sinkhorn_eps: f64,
    pub sinkhorn_iters: usize,
    pub batch_size: usize,
    pub rounds: usize,
    pub critic_steps: usize,
    pub generator_steps: usize,
    pub generator_adam: AdamConfig,
    pub critic_adam: AdamConfig,
    /// Learning rates at the last round as a fraction of their initial
    /// values (geometric decay).
    pub lr_final_fraction: f64,
}

impl Default for GanConfig {
    fn default() -> Self {
        GanConfig {
            z_dim: 5,
            generator_hidden: vec![32, 32],
            critic_hidden: vec![16],
            critic_features: 8,
            sinkhorn_eps: 0.05,
            sinkhorn_iters: 50,
            batch_size: 256,
            rounds: 300,
            critic_steps: 1,
            generator_steps: 1,
            generator_adam: AdamConfig::with_lr(5e-3),
            critic_adam: AdamConfig::with_lr(5e-3),
            lr_final_fraction: 0.1,
        }
    }
}

impl GanConfig {
    pub fn validate(&self) -> Result<()> {
        if self.z_dim == 0 || self.critic_features == 0 {
            return Err(Error::config("noise and critic feature dimensions must be positive"));
        }
        if self.generator_hidden.iter().chain(&self.critic_hidden).any(|&h| h == 0) {
            return Err(Error::config("GAN hidden widths must be positive"));
        }
        if !(self.sinkhorn_eps > 0.0) || self.sinkhorn_iters == 0 {
            return Err(Error::config("Sinkhorn regularization and iterations must be positive"));
        }
        if self.batch_size == 0 || self.rounds == 0 || self.generator_steps == 0 {
            return Err(Error::config("GAN batch size, rounds and generator steps must be positive"));
        }
        if !(self.lr_final_fraction > 0.0 && self.lr_final_fraction <= 1.0) {
            return Err(Error::config("GAN lr_final_fraction must lie in (0, 1]"));
        }
        self.generator_adam.validate()?;
        self.critic_adam.validate()
    }
}

/// `M` pseudo samples per observation, indexed `(observation, m)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PseudoSampleBlock {
    pub values: Array2<f64>,
}

impl PseudoSampleBlock {
    pub fn new(values: Array2<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::contract("pseudo samples must be finite"));
        }
        Ok(PseudoSampleBlock { values })
    }

    pub fn n_obs(&self) -> usize {
        self.values.nrows()
    }

    pub fn m(&self) -> usize {
        self.values.ncols()
    }
}

/// Trained generator `G(x_members, z) ≈ X_target | X_members`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalGenerator {
    pub generator: Mlp,
    pub critic: Mlp,
    pub z_dim: usize,
    pub sinkhorn_eps: f64,
    pub sinkhorn_iters: usize,
    pub feature_index_map: Vec<usize>,
    pub target: usize,
    pub half_id: usize,
    /// Standardization of `(x_target, x_members)`.
    pub scaler: Standardizer,
    /// Divergence seen by each generator step.
    pub divergence_trace: Vec<f64>,
}

fn standard_normals(rng: &mut impl rand::Rng, rows: usize, cols: usize) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || StandardNormal.sample(rng))
}

impl ConditionalGenerator {
    fn conditioning(&self, rows: ArrayView2<f64>) -> Result<Array2<f64>> {
        if let Some(&bad) = self.feature_index_map.iter().find(|&&c| c >= rows.ncols()) {
            return Err(Error::contract(format!(
                "conditioning variable {bad} out of range for rows with {} columns",
                rows.ncols()
            )));
        }
        let x = rows.select(Axis(1), &self.feature_index_map);
        let mean = self.scaler.mean.slice(s![1..]);
        let scale = self.scaler.scale.slice(s![1..]);
        Ok((&x - &mean) / &scale)
    }

    /// Standardized generator output for standardized conditioning rows.
    fn generate_standardized(&self, cond: ArrayView2<f64>, z: ArrayView2<f64>) -> Result<Array2<f64>> {
        let input = concatenate![Axis(1), cond, z];
        self.generator.forward_batch(input.view())
    }

    /// Draws `m` pseudo samples for each row; column `c` uses noise seeded by
    /// `(seed, c)`, so the first columns agree across different `m`.
    pub fn generate(&self, rows: ArrayView2<f64>, m: usize, seed: u64) -> Result<PseudoSampleBlock> {
        if m == 0 {
            return Err(Error::contract("at least one pseudo sample per observation"));
        }
        let cond = self.conditioning(rows)?;
        let n = rows.nrows();
        let mut out = Array2::zeros((n, m));
        let (mu, sd) = (self.scaler.mean[0], self.scaler.scale[0]);
        for c in 0..m {
            let mut rng = seed::rng(seed::derive(seed, Stream::Noise, &[c as u64]));
            let z = standard_normals(&mut rng, n, self.z_dim);
            let g = self.generate_standardized(cond.view(), z.view())?;
            out.column_mut(c).assign(&g.column(0).mapv(|v| mu + sd * v));
        }
        PseudoSampleBlock::new(out)
    }
}

fn mlp_dims(input: usize, hidden: &[usize], output: usize) -> Vec<usize> {
    let mut dims = vec![input];
    dims.extend(hidden);
    dims.push(output);
    dims
}

/// Trains `G` on one half by alternating critic ascent and generator descent
/// on the Sinkhorn divergence between real `(x_k, x_M)` and generated
/// `(G(x_M, z), x_M)` batches.
pub fn fit_generator(
    rows: ArrayView2<f64>,
    target: usize,
    members: &[usize],
    config: &GanConfig,
    half_id: usize,
    seed: u64,
) -> Result<ConditionalGenerator> {
    config.validate()?;
    let (n, d) = rows.dim();
    if n == 0 {
        return Err(Error::contract("generator training on an empty data half"));
    }
    if target >= d || members.iter().any(|&m| m >= d) || members.contains(&target) {
        return Err(Error::contract("invalid target or conditioning indices"));
    }
    let mut cols = vec![target];
    cols.extend(members);
    let raw = rows.select(Axis(1), &cols);
    let scaler = Standardizer::fit(raw.view());
    let joint = scaler.apply(raw.view());
    let p = members.len();

    let generator = Mlp::init(
        &mlp_dims(p + config.z_dim, &config.generator_hidden, 1),
        Activation::Relu,
        seed::derive(seed, Stream::Init, &[0]),
    )?;
    let critic = Mlp::init(
        &mlp_dims(p + 1, &config.critic_hidden, config.critic_features),
        Activation::Relu,
        seed::derive(seed, Stream::Init, &[1]),
    )?;
    let mut model = ConditionalGenerator {
        generator,
        critic,
        z_dim: config.z_dim,
        sinkhorn_eps: config.sinkhorn_eps,
        sinkhorn_iters: config.sinkhorn_iters,
        feature_index_map: members.to_vec(),
        target,
        half_id,
        scaler,
        divergence_trace: Vec::with_capacity(config.rounds * config.generator_steps),
    };
    let mut gen_opt = Adam::for_mlp(&model.generator, config.generator_adam);
    let mut critic_opt = Adam::for_mlp(&model.critic, config.critic_adam);
    let mut rng = seed::rng(seed::derive(seed, Stream::Shuffle, &[]));
    let batch = config.batch_size.min(n);

    let draw = |rng: &mut rand_chacha::ChaCha8Rng, model: &ConditionalGenerator| -> Result<(Array2<f64>, Array2<f64>, Array2<f64>)> {
        let idx = index::sample(rng, n, batch).into_vec();
        let real = joint.select(Axis(0), &idx);
        let cond = real.slice(s![.., 1..]).to_owned();
        let z = standard_normals(rng, batch, model.z_dim);
        let input = concatenate![Axis(1), cond, z];
        let fake_k = model.generator.forward_batch(input.view())?;
        let fake = concatenate![Axis(1), fake_k, cond];
        Ok((real, fake, input))
    };

    let decay_span = config.rounds.saturating_sub(1).max(1) as f64;
    for round in 0..config.rounds {
        let decay = config.lr_final_fraction.powf(round as f64 / decay_span);
        gen_opt.set_lr(config.generator_adam.lr * decay);
        critic_opt.set_lr(config.critic_adam.lr * decay);
        for _ in 0..config.critic_steps {
            let (real, fake, _) = draw(&mut rng, &model)?;
            let dg = sinkhorn_divergence_grad(
                real.view(),
                fake.view(),
                FeatureMap::Critic(&model.critic),
                config.sinkhorn_eps,
                config.sinkhorn_iters,
            )
            .map_err(|_| Error::divergence("Sinkhorn critic step", Some(round)))?;
            let mut grads = dg.critic.expect("critic gradient");
            grads.scale(-1.0);
            critic_opt
                .step(&mut model.critic, &grads)
                .map_err(|_| Error::divergence("Sinkhorn critic step", Some(round)))?;
        }
        for _ in 0..config.generator_steps {
            let (real, fake, input) = draw(&mut rng, &model)?;
            let dg = sinkhorn_divergence_grad(
                real.view(),
                fake.view(),
                FeatureMap::Critic(&model.critic),
                config.sinkhorn_eps,
                config.sinkhorn_iters,
            )
            .map_err(|_| Error::divergence("Sinkhorn generator step", Some(round)))?;
            model.divergence_trace.push(dg.value);
            let upstream = dg.grad_b.slice(s![.., 0..1]).to_owned();
            let (grads, _) = model.generator.backward_batch(input.view(), upstream.view())?;
            gen_opt
                .step(&mut model.generator, &grads)
                .map_err(|_| Error::divergence("Sinkhorn generator step", Some(round)))?;
        }
    }
    if !model.generator.is_finite() || !model.critic.is_finite() {
        return Err(Error::divergence("Sinkhorn GAN training", Some(config.rounds)));
    }
    Ok(model)
}
