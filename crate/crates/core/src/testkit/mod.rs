//! The test engine: splitting, cross-fitted measures, statistic selection,
//! p-value combination, path/union tests, BH sweeps and the double-regression
//! baseline.
//!
//! Learners are injected through [`Learners`], so oracle regression functions
//! and conditional samplers can replace the trained networks.

mod stats;

pub use stats::{
    batched_se, bh_adjust, centered_transforms, combine_pvalues, estimate_measures, half_pvalue,
    per_observation_products, products, select_b, split_subjects, standardized_stats, transform_bank,
    MeasureTable, SplitPlan, TransformBank,
};

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, HalfData};
use crate::error::{Error, Result};
use crate::genlearn::{fit_generator, ConditionalGenerator, GanConfig, PseudoSampleBlock};
use crate::regress::{fit_conditional_mean, ConditionalMeanModel, RegressConfig};
use crate::seed::{self, Stream};
use crate::structural::{conditioning_set, fit_dag, DagEstimate, StructuralConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TestConfig {
    /// Number of transforms `B` (even).
    pub transforms: usize,
    /// Pseudo samples `M` per observation.
    pub pseudo_samples: usize,
    /// Batch length `K`; series shorter than `K` use one batch per subject.
    pub batch_len: usize,
    pub alpha: f64,
    pub structural: StructuralConfig,
    pub regress: RegressConfig,
    pub gan: GanConfig,
}

impl Default for TestConfig {
    fn default() -> Self {
        TestConfig {
            transforms: 2000,
            pseudo_samples: 100,
            batch_len: 20,
            alpha: 0.05,
            structural: StructuralConfig::default(),
            regress: RegressConfig::default(),
            gan: GanConfig::default(),
        }
    }
}

impl TestConfig {
    pub fn validate(&self) -> Result<()> {
        if self.transforms < 2 || self.transforms % 2 != 0 {
            return Err(Error::config(format!(
                "transform count B must be even and at least 2, got {}",
                self.transforms
            )));
        }
        if self.pseudo_samples == 0 || self.batch_len == 0 {
            return Err(Error::config("pseudo-sample count M and batch length K must be positive"));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::config(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        self.structural.validate()?;
        self.regress.validate()?;
        self.gan.validate()
    }
}

/// `x ↦ Ê(X_target | X_members = x)` evaluated on full observation rows.
pub trait ConditionalMean: Send + Sync {
    fn predict_rows(&self, rows: ArrayView2<f64>) -> Result<Array1<f64>>;
}

/// Draws `m` samples of `X_target | X_members` per full observation row.
/// Column `c` must depend only on `(seed, c)` and the rows.
pub trait ConditionalSampler: Send + Sync {
    fn sample(&self, rows: ArrayView2<f64>, m: usize, seed: u64) -> Result<PseudoSampleBlock>;
}

impl ConditionalMean for ConditionalMeanModel {
    fn predict_rows(&self, rows: ArrayView2<f64>) -> Result<Array1<f64>> {
        ConditionalMeanModel::predict_rows(self, rows)
    }
}

impl ConditionalSampler for ConditionalGenerator {
    fn sample(&self, rows: ArrayView2<f64>, m: usize, seed: u64) -> Result<PseudoSampleBlock> {
        self.generate(rows, m, seed)
    }
}

/// Mean function given by a closure on full rows.
pub struct FnMean<F>(pub F);

impl<F: Fn(ArrayView1<f64>) -> f64 + Send + Sync> ConditionalMean for FnMean<F> {
    fn predict_rows(&self, rows: ArrayView2<f64>) -> Result<Array1<f64>> {
        Ok(Array1::from_iter(rows.rows().into_iter().map(|r| (self.0)(r))))
    }
}

/// Sampler given by a closure drawing one value for a full row.
pub struct FnSampler<F>(pub F);

impl<F: Fn(ArrayView1<f64>, &mut ChaCha8Rng) -> f64 + Send + Sync> ConditionalSampler for FnSampler<F> {
    fn sample(&self, rows: ArrayView2<f64>, m: usize, seed: u64) -> Result<PseudoSampleBlock> {
        if m == 0 {
            return Err(Error::contract("at least one pseudo sample per observation"));
        }
        let mut out = Array2::zeros((rows.nrows(), m));
        for c in 0..m {
            let mut rng = seed::rng(seed::derive(seed, Stream::Noise, &[c as u64]));
            for (o, row) in rows.rows().into_iter().enumerate() {
                out[[o, c]] = (self.0)(row, &mut rng);
            }
        }
        PseudoSampleBlock::new(out)
    }
}

/// Source of the structural, regression and sampling learners for one half.
pub trait Learners: Sync {
    fn structure(&self, half: &HalfData, half_id: usize, seed: u64) -> Result<DagEstimate>;
    fn mean(&self, half: &HalfData, target: usize, members: &[usize], half_id: usize, seed: u64)
        -> Result<Box<dyn ConditionalMean>>;
    fn sampler(&self, half: &HalfData, target: usize, members: &[usize], half_id: usize, seed: u64)
        -> Result<Box<dyn ConditionalSampler>>;
}

/// The trained pipeline: MLP DAG learner, MLP regression and Sinkhorn GAN.
#[derive(Debug, Clone, PartialEq)]
pub struct LearnedPipeline {
    pub structural: StructuralConfig,
    pub regress: RegressConfig,
    pub gan: GanConfig,
}

impl LearnedPipeline {
    pub fn from_config(config: &TestConfig) -> Self {
        LearnedPipeline {
            structural: config.structural.clone(),
            regress: config.regress.clone(),
            gan: config.gan.clone(),
        }
    }
}

impl Learners for LearnedPipeline {
    fn structure(&self, half: &HalfData, half_id: usize, seed: u64) -> Result<DagEstimate> {
        fit_dag(half.view(), &self.structural, half_id, seed)
    }

    fn mean(&self, half: &HalfData, target: usize, members: &[usize], half_id: usize, seed: u64)
        -> Result<Box<dyn ConditionalMean>> {
        Ok(Box::new(fit_conditional_mean(half.view(), target, members, &self.regress, half_id, seed)?))
    }

    fn sampler(&self, half: &HalfData, target: usize, members: &[usize], half_id: usize, seed: u64)
        -> Result<Box<dyn ConditionalSampler>> {
        Ok(Box::new(fit_generator(half.view(), target, members, &self.gan, half_id, seed)?))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Sugar,
    Drt,
}

/// Outcome for one edge within one half. Variable indices are 1-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeHalf {
    pub members: Vec<usize>,
    /// `k` is not an estimated ancestor of `j`, so the half reports p = 1.
    pub short_circuit: bool,
    /// Training failure that forced p = 1 for this half.
    pub failure: Option<String>,
    pub t_cf: Vec<f64>,
    pub t_ncf: Vec<f64>,
    pub sigma_cf: Vec<f64>,
    pub sigma_ncf: Vec<f64>,
}

/// Selected `(edge, b)` pair, both 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Selection {
    pub edge: usize,
    pub b: usize,
}

/// Learners trained on `half`, CF measures evaluated on the other half.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HalfReport {
    /// 1-based training half.
    pub half: usize,
    pub n_train: usize,
    pub n_eval: usize,
    pub batch_len: usize,
    pub edges: Vec<EdgeHalf>,
    pub selected: Option<Selection>,
    pub statistic: Option<f64>,
    pub p_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub method: Method,
    /// Tested `(j, k)` pairs for `H0: k is not a parent of j`, 1-based.
    pub edges: Vec<(usize, usize)>,
    pub halves: Vec<HalfReport>,
    pub p_value: f64,
    pub alpha: f64,
    pub rejected: bool,
    pub seed: u64,
    /// 1-based subjects of each half.
    pub split: [Vec<usize>; 2],
}

impl TestReport {
    pub fn half_pvalues(&self) -> Vec<f64> {
        self.halves.iter().map(|h| h.p_value).collect()
    }

    /// The selected cross-fitted statistic of half `s` (0-based).
    pub fn statistic(&self, s: usize) -> Option<f64> {
        self.halves.get(s).and_then(|h| h.statistic)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathReport {
    /// 1-based node sequence.
    pub nodes: Vec<usize>,
    pub edges: Vec<TestReport>,
    pub p_value: f64,
    pub alpha: f64,
    pub rejected: bool,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub j: usize,
    pub k: usize,
    pub p_value: f64,
    pub rejected: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub q: f64,
    pub seed: u64,
    /// Sorted by `(j, k)`, 1-based.
    pub rows: Vec<SweepRow>,
}

impl SweepReport {
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["j", "k", "p", "rejected"]).map_err(csv_err)?;
        for r in &self.rows {
            w.write_record([r.j.to_string(), r.k.to_string(), r.p_value.to_string(), r.rejected.to_string()])
                .map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

struct HalfContext {
    data: HalfData,
    dag: std::result::Result<DagEstimate, String>,
}

/// Split, per-half structures and transform bank shared by every edge tested
/// in one invocation.
pub struct Engine<'a, L: Learners> {
    dataset: &'a Dataset,
    config: &'a TestConfig,
    learners: &'a L,
    seed: u64,
    split: SplitPlan,
    halves: Vec<HalfContext>,
    bank: TransformBank,
    batch_len: usize,
}

fn is_training_failure(e: &Error) -> bool {
    matches!(e, Error::Divergence { .. })
}

fn one_based(v: &[usize]) -> Vec<usize> {
    v.iter().map(|i| i + 1).collect()
}

struct EdgeOutcome {
    half: EdgeHalf,
    ok: bool,
}

impl<'a, L: Learners> Engine<'a, L> {
    /// Splits the subjects, fits (or adopts) one structure per half and draws
    /// the transform bank.
    pub fn new(
        dataset: &'a Dataset,
        config: &'a TestConfig,
        learners: &'a L,
        seed: u64,
        structures: Option<[DagEstimate; 2]>,
    ) -> Result<Self> {
        config.validate()?;
        let split = split_subjects(dataset.n_subjects(), seed::derive(seed, Stream::Split, &[]))?;
        let mut supplied = structures.map(|[a, b]| [Some(a), Some(b)]);
        let mut halves = Vec::with_capacity(2);
        for s in 0..2 {
            let data = dataset.subject_rows(split.half(s))?;
            let dag = match supplied.as_mut().and_then(|arr| arr[s].take()) {
                Some(est) => {
                    if est.n_vars() != dataset.n_vars() {
                        return Err(Error::contract("supplied structure has the wrong number of variables"));
                    }
                    Ok(est)
                }
                None => match learners.structure(&data, s, seed::derive(seed, Stream::Structure, &[s as u64])) {
                    Ok(est) => Ok(est),
                    Err(e) if is_training_failure(&e) => Err(e.to_string()),
                    Err(e) => return Err(e),
                },
            };
            halves.push(HalfContext { data, dag });
        }
        let bank = transform_bank(config.transforms, seed::derive(seed, Stream::Bank, &[]))?;
        let batch_len = config.batch_len.min(dataset.n_times());
        Ok(Engine {
            dataset,
            config,
            learners,
            seed,
            split,
            halves,
            bank,
            batch_len,
        })
    }

    pub fn split(&self) -> &SplitPlan {
        &self.split
    }

    pub fn structure(&self, s: usize) -> Option<&DagEstimate> {
        self.halves.get(s).and_then(|h| h.dag.as_ref().ok())
    }

    pub fn bank(&self) -> &TransformBank {
        &self.bank
    }

    fn check_edge(&self, j: usize, k: usize) -> Result<()> {
        let d = self.dataset.n_vars();
        if j >= d || k >= d {
            return Err(Error::contract(format!("edge ({}, {}) out of range for {d} variables", j + 1, k + 1)));
        }
        if j == k {
            return Err(Error::contract(format!("edge ({}, {}) has j = k", j + 1, k + 1)));
        }
        Ok(())
    }

    /// Standardized statistics of one table.
    fn table_stats(&self, values: Array2<f64>, data: &HalfData, cf: bool, eval_half: usize) -> Result<(Vec<f64>, Vec<f64>)> {
        let table = MeasureTable::new(values, data.segments.clone(), cf, eval_half)?;
        let means = estimate_measures(&table)?;
        let sds = batched_se(&table, self.batch_len)?;
        let t = standardized_stats(&means, &sds, table.n_obs())?;
        Ok((t.to_vec(), sds.to_vec()))
    }

    fn edge_half(&self, method: Method, j: usize, k: usize, s: usize) -> Result<EdgeOutcome> {
        let ctx = &self.halves[s];
        let empty = |members: Vec<usize>, short: bool, failure: Option<String>| EdgeOutcome {
            half: EdgeHalf {
                members,
                short_circuit: short,
                failure,
                t_cf: Vec::new(),
                t_ncf: Vec::new(),
                sigma_cf: Vec::new(),
                sigma_ncf: Vec::new(),
            },
            ok: false,
        };
        let dag = match &ctx.dag {
            Ok(d) => d,
            Err(msg) => return Ok(empty(Vec::new(), false, Some(msg.clone()))),
        };
        let cond = conditioning_set(j, k, dag)?;
        let members = cond.members.clone();
        if !cond.k_is_ancestor {
            return Ok(empty(one_based(&members), true, None));
        }
        let train = &ctx.data;
        let eval = &self.halves[1 - s].data;
        let path = [j as u64, k as u64, s as u64];
        let fitted = (|| -> Result<_> {
            let mean = self.learners.mean(train, j, &members, s, seed::derive(self.seed, Stream::Mean, &path))?;
            let transform: Transform = match method {
                Method::Sugar => Transform::Sampler(self.learners.sampler(
                    train,
                    k,
                    &members,
                    s,
                    seed::derive(self.seed, Stream::Sampler, &path),
                )?),
                Method::Drt => Transform::Mean(self.learners.mean(
                    train,
                    k,
                    &members,
                    s,
                    seed::derive(self.seed, Stream::SecondMean, &path),
                )?),
            };
            Ok((mean, transform))
        })();
        let (mean, transform) = match fitted {
            Ok(v) => v,
            Err(e) if is_training_failure(&e) => return Ok(empty(one_based(&members), false, Some(e.to_string()))),
            Err(e) => return Err(e),
        };

        let mut results = Vec::with_capacity(2);
        for (table, data, cf, eval_half) in [(0u64, eval, true, 1 - s), (1u64, train, false, s)] {
            let rows = data.view();
            let residual = &rows.column(j) - &mean.predict_rows(rows)?;
            let centered = match &transform {
                Transform::Sampler(sampler) => {
                    let pseudo = sampler.sample(
                        rows,
                        self.config.pseudo_samples,
                        seed::derive(self.seed, Stream::Pseudo, &[j as u64, k as u64, s as u64, table]),
                    )?;
                    centered_transforms(rows.column(k), &pseudo, &self.bank)?
                }
                Transform::Mean(second) => {
                    let fitted = second.predict_rows(rows)?;
                    (&rows.column(k) - &fitted).insert_axis(ndarray::Axis(1)).to_owned()
                }
            };
            results.push(self.table_stats(products(residual.view(), &centered)?, data, cf, eval_half)?);
        }
        let (ncf, cf) = (results.pop().expect("two tables"), results.pop().expect("two tables"));
        Ok(EdgeOutcome {
            half: EdgeHalf {
                members: one_based(&members),
                short_circuit: false,
                failure: None,
                t_cf: cf.0,
                t_ncf: ncf.0,
                sigma_cf: cf.1,
                sigma_ncf: ncf.1,
            },
            ok: true,
        })
    }

    fn half_report(&self, method: Method, edges: &[(usize, usize)], s: usize) -> Result<HalfReport> {
        let outcomes: Vec<EdgeOutcome> = edges
            .iter()
            .map(|&(j, k)| self.edge_half(method, j, k, s))
            .collect::<Result<_>>()?;
        let mut best: Option<(Selection, f64, f64)> = None;
        for (l, o) in outcomes.iter().enumerate().filter(|(_, o)| o.ok) {
            let b = select_b(&o.half.t_ncf)?;
            let score = o.half.t_ncf[b].abs();
            if best.map_or(true, |(_, sc, _)| score > sc) {
                best = Some((Selection { edge: l + 1, b: b + 1 }, score, o.half.t_cf[b]));
            }
        }
        let (selected, statistic, p_value) = match best {
            Some((sel, _, stat)) => (Some(sel), Some(stat), half_pvalue(stat)?),
            None => (None, None, 1.0),
        };
        Ok(HalfReport {
            half: s + 1,
            n_train: self.halves[s].data.n_obs(),
            n_eval: self.halves[1 - s].data.n_obs(),
            batch_len: self.batch_len,
            edges: outcomes.into_iter().map(|o| o.half).collect(),
            selected,
            statistic,
            p_value,
        })
    }

    fn report(&self, method: Method, edges: &[(usize, usize)]) -> Result<TestReport> {
        if edges.is_empty() {
            return Err(Error::contract("no edges to test"));
        }
        for &(j, k) in edges {
            self.check_edge(j, k)?;
        }
        let halves = vec![self.half_report(method, edges, 0)?, self.half_report(method, edges, 1)?];
        let p_value = combine_pvalues(halves[0].p_value, halves[1].p_value)?;
        Ok(TestReport {
            method,
            edges: edges.iter().map(|&(j, k)| (j + 1, k + 1)).collect(),
            halves,
            p_value,
            alpha: self.config.alpha,
            rejected: p_value <= self.config.alpha,
            seed: self.seed,
            split: [one_based(self.split.half(0)), one_based(self.split.half(1))],
        })
    }

    /// Tests `H0: k is not a parent of j` (0-based indices).
    pub fn test_edge(&self, j: usize, k: usize) -> Result<TestReport> {
        self.report(Method::Sugar, &[(j, k)])
    }

    /// Double-regression baseline with `h(x_k) = x_k`.
    pub fn drt_edge(&self, j: usize, k: usize) -> Result<TestReport> {
        self.report(Method::Drt, &[(j, k)])
    }

    /// Joint test of a set of edges, maximizing over `(b, l)`.
    pub fn test_union(&self, edges: &[(usize, usize)]) -> Result<TestReport> {
        self.report(Method::Sugar, edges)
    }

    /// Path `n_0 → n_1 → …`; each step tests `j = n_{i+1}, k = n_i`.
    pub fn test_path(&self, nodes: &[usize]) -> Result<PathReport> {
        if nodes.len() < 2 {
            return Err(Error::contract("a path needs at least two nodes"));
        }
        let mut seen = nodes.to_vec();
        seen.sort_unstable();
        if seen.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::contract("path nodes must be distinct"));
        }
        let edges: Vec<TestReport> = nodes
            .windows(2)
            .map(|w| self.test_edge(w[1], w[0]))
            .collect::<Result<_>>()?;
        let p_value = edges.iter().map(|r| r.p_value).fold(0.0, f64::max);
        Ok(PathReport {
            nodes: one_based(nodes),
            edges,
            p_value,
            alpha: self.config.alpha,
            rejected: p_value <= self.config.alpha,
            seed: self.seed,
        })
    }

    /// Ordered pairs `(j, k)` with `k` an estimated ancestor of `j` in either half.
    pub fn candidate_pairs(&self) -> Vec<(usize, usize)> {
        let d = self.dataset.n_vars();
        let mut pairs = Vec::new();
        for j in 0..d {
            for k in 0..d {
                if j != k && (0..2).any(|s| self.structure(s).is_some_and(|e| e.is_ancestor(k, j))) {
                    pairs.push((j, k));
                }
            }
        }
        pairs
    }

    /// Tests every candidate pair and applies Benjamini-Hochberg at level `q`.
    pub fn fdr_sweep(&self, q: f64) -> Result<SweepReport> {
        let pairs = self.candidate_pairs();
        let pvalues: Vec<f64> = pairs
            .par_iter()
            .map(|&(j, k)| self.test_edge(j, k).map(|r| r.p_value))
            .collect::<Result<_>>()?;
        let rejected = bh_adjust(&pvalues, q)?;
        let rows = pairs
            .iter()
            .zip(pvalues.iter().zip(rejected))
            .map(|(&(j, k), (&p, r))| SweepRow {
                j: j + 1,
                k: k + 1,
                p_value: p,
                rejected: r,
            })
            .collect();
        Ok(SweepReport { q, seed: self.seed, rows })
    }
}

enum Transform {
    Sampler(Box<dyn ConditionalSampler>),
    Mean(Box<dyn ConditionalMean>),
}

/// Runs the full procedure for one edge (0-based `j`, `k`).
pub fn test_edge<L: Learners>(
    dataset: &Dataset,
    j: usize,
    k: usize,
    config: &TestConfig,
    learners: &L,
    seed: u64,
    structures: Option<[DagEstimate; 2]>,
) -> Result<TestReport> {
    Engine::new(dataset, config, learners, seed, structures)?.test_edge(j, k)
}

pub fn drt_edge<L: Learners>(
    dataset: &Dataset,
    j: usize,
    k: usize,
    config: &TestConfig,
    learners: &L,
    seed: u64,
    structures: Option<[DagEstimate; 2]>,
) -> Result<TestReport> {
    Engine::new(dataset, config, learners, seed, structures)?.drt_edge(j, k)
}

pub fn test_path<L: Learners>(dataset: &Dataset, nodes: &[usize], config: &TestConfig, learners: &L, seed: u64) -> Result<PathReport> {
    Engine::new(dataset, config, learners, seed, None)?.test_path(nodes)
}

pub fn test_union<L: Learners>(
    dataset: &Dataset,
    edges: &[(usize, usize)],
    config: &TestConfig,
    learners: &L,
    seed: u64,
) -> Result<TestReport> {
    Engine::new(dataset, config, learners, seed, None)?.test_union(edges)
}

pub fn fdr_sweep<L: Learners>(dataset: &Dataset, q: f64, config: &TestConfig, learners: &L, seed: u64) -> Result<SweepReport> {
    Engine::new(dataset, config, learners, seed, None)?.fdr_sweep(q)
}
