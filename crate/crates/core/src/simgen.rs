//! Ground-truth DAGs and structural equation simulators.
//!
//! Graphs are strictly lower triangular in variable index, so index order is a
//! topological order. Errors follow stationary AR(φ) processes per
//! `(subject, variable)`.

use ndarray::Array3;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::seed::{self, Stream};

/// Default AR coefficient of the error processes.
pub const AR_COEFFICIENT: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SemKind {
    Nonlinear,
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Trig {
    Sin,
    Cos,
}

impl Trig {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Trig::Sin => x.sin(),
            Trig::Cos => x.cos(),
        }
    }
}

/// `coef * f1(X_k1) * f2(X_k2)` with `k1 <= k2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairTerm {
    pub k1: usize,
    pub k2: usize,
    pub coef: f64,
    pub f1: Trig,
    pub f2: Trig,
}

/// `coef * f(X_k)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingleTerm {
    pub k: usize,
    pub coef: f64,
    pub f: Trig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct NodeEquation {
    pub pairs: Vec<PairTerm>,
    pub singles: Vec<SingleTerm>,
    /// `(parent, coefficient)` for the linear model.
    pub linear: Vec<(usize, f64)>,
}

impl NodeEquation {
    /// Structural mean of the node given the values of all variables at one
    /// time point.
    pub fn mean(&self, kind: SemKind, x: &[f64]) -> f64 {
        match kind {
            SemKind::Linear => self.linear.iter().map(|&(k, c)| c * x[k]).sum(),
            SemKind::Nonlinear => {
                let pairs: f64 = self
                    .pairs
                    .iter()
                    .map(|p| p.coef * p.f1.apply(x[p.k1]) * p.f2.apply(x[p.k2]))
                    .sum();
                let singles: f64 = self.singles.iter().map(|s| s.coef * s.f.apply(x[s.k])).sum();
                pairs + singles
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthDag {
    pub d: usize,
    pub zeta: f64,
    pub kind: SemKind,
    pub seed: u64,
    /// Sorted parent lists; every parent index is smaller than its child.
    pub parents: Vec<Vec<usize>>,
    pub equations: Vec<NodeEquation>,
}

fn signed_uniform<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    let mag = rng.random_range(lo..=hi);
    if rng.random_bool(0.5) {
        mag
    } else {
        -mag
    }
}

fn trig<R: Rng>(rng: &mut R) -> Trig {
    if rng.random_bool(0.5) {
        Trig::Sin
    } else {
        Trig::Cos
    }
}

/// Samples a random lower-triangular DAG with edge probability `zeta`.
pub fn sample_dag(d: usize, zeta: f64, kind: SemKind, seed: u64) -> Result<GroundTruthDag> {
    sample_dag_with(d, zeta, kind, 0.0, seed)
}

/// [`sample_dag`] with a fraction of structural coefficients zeroed at random
/// afterwards. Zeroed coefficients keep their edge in `parents`.
pub fn sample_dag_with(
    d: usize,
    zeta: f64,
    kind: SemKind,
    zero_fraction: f64,
    seed: u64,
) -> Result<GroundTruthDag> {
    if d == 0 {
        return Err(Error::config("a DAG needs at least one node"));
    }
    if !(0.0..=1.0).contains(&zeta) {
        return Err(Error::config(format!("edge probability {zeta} outside [0, 1]")));
    }
    if !(0.0..=1.0).contains(&zero_fraction) {
        return Err(Error::config(format!("zeroing fraction {zero_fraction} outside [0, 1]")));
    }
    let mut rng = seed::rng(seed);
    let mut parents = vec![Vec::new(); d];
    for (j, pa) in parents.iter_mut().enumerate() {
        for k in 0..j {
            if rng.random_bool(zeta) {
                pa.push(k);
            }
        }
    }
    let mut equations = Vec::with_capacity(d);
    for pa in &parents {
        let mut eq = NodeEquation::default();
        match kind {
            SemKind::Nonlinear => {
                for (a, &k1) in pa.iter().enumerate() {
                    for &k2 in &pa[a..] {
                        eq.pairs.push(PairTerm {
                            k1,
                            k2,
                            coef: signed_uniform(&mut rng, 0.5, 1.5),
                            f1: trig(&mut rng),
                            f2: trig(&mut rng),
                        });
                    }
                }
                for &k in pa {
                    eq.singles.push(SingleTerm {
                        k,
                        coef: signed_uniform(&mut rng, 0.5, 1.5),
                        f: trig(&mut rng),
                    });
                }
            }
            SemKind::Linear => {
                for &k in pa {
                    eq.linear.push((k, signed_uniform(&mut rng, 0.3, 0.5)));
                }
            }
        }
        equations.push(eq);
    }
    if zero_fraction > 0.0 {
        for eq in &mut equations {
            for p in &mut eq.pairs {
                if rng.random_bool(zero_fraction) {
                    p.coef = 0.0;
                }
            }
            for s in &mut eq.singles {
                if rng.random_bool(zero_fraction) {
                    s.coef = 0.0;
                }
            }
            for l in &mut eq.linear {
                if rng.random_bool(zero_fraction) {
                    l.1 = 0.0;
                }
            }
        }
    }
    Ok(GroundTruthDag {
        d,
        zeta,
        kind,
        seed,
        parents,
        equations,
    })
}

impl GroundTruthDag {
    /// Linear model from explicit `(parent, child, coefficient)` edges.
    pub fn linear(d: usize, edges: &[(usize, usize, f64)]) -> Result<Self> {
        let mut parents = vec![Vec::new(); d];
        let mut equations = vec![NodeEquation::default(); d];
        for &(k, j, c) in edges {
            if k >= j || j >= d {
                return Err(Error::contract(format!(
                    "edge {k}->{j} must point from a lower to a higher index below {d}"
                )));
            }
            parents[j].push(k);
            equations[j].linear.push((k, c));
        }
        for pa in &mut parents {
            pa.sort_unstable();
            pa.dedup();
        }
        Ok(GroundTruthDag {
            d,
            zeta: 0.0,
            kind: SemKind::Linear,
            seed: 0,
            parents,
            equations,
        })
    }

    /// `adjacency[j][k] == true` iff `k` is a parent of `j` (strictly lower
    /// triangular).
    pub fn adjacency(&self) -> Vec<Vec<bool>> {
        let mut adj = vec![vec![false; self.d]; self.d];
        for (j, pa) in self.parents.iter().enumerate() {
            for &k in pa {
                adj[j][k] = true;
            }
        }
        adj
    }

    pub fn edge_count(&self) -> usize {
        self.parents.iter().map(Vec::len).sum()
    }

    pub fn is_parent(&self, k: usize, j: usize) -> bool {
        self.parents[j].binary_search(&k).is_ok()
    }

    /// Ancestor sets of the true graph.
    pub fn ancestors(&self) -> Vec<Vec<usize>> {
        let mut anc: Vec<Vec<bool>> = vec![vec![false; self.d]; self.d];
        for j in 0..self.d {
            for &k in &self.parents[j] {
                anc[j][k] = true;
                let upstream = anc[k].clone();
                for (a, &flag) in upstream.iter().enumerate() {
                    if flag {
                        anc[j][a] = true;
                    }
                }
            }
        }
        anc.into_iter()
            .map(|row| row.iter().enumerate().filter(|(_, &f)| f).map(|(a, _)| a).collect())
            .collect()
    }
}

/// Stationary AR(φ) series with standard normal innovations.
pub fn ar_noise(t: usize, phi: f64, seed: u64) -> Result<Vec<f64>> {
    check_phi(phi)?;
    let mut rng = seed::rng(seed);
    Ok(ar_series(&mut rng, t, phi))
}

fn check_phi(phi: f64) -> Result<()> {
    if phi.is_finite() && phi.abs() < 1.0 {
        Ok(())
    } else {
        Err(Error::config(format!("AR coefficient {phi} must satisfy |phi| < 1")))
    }
}

fn ar_series<R: Rng>(rng: &mut R, t: usize, phi: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(t);
    let sd0 = (1.0 / (1.0 - phi * phi)).sqrt();
    let mut prev: f64 = 0.0;
    for step in 0..t {
        let w: f64 = StandardNormal.sample(rng);
        prev = if step == 0 { sd0 * w } else { phi * prev + w };
        out.push(prev);
    }
    out
}

/// Independent AR(φ) error series for every `(subject, variable)`.
pub fn draw_errors(n: usize, t: usize, d: usize, phi: f64, seed: u64) -> Result<Array3<f64>> {
    check_phi(phi)?;
    let mut errors = Array3::zeros((n, t, d));
    for i in 0..n {
        for j in 0..d {
            let mut rng = seed::rng(seed::derive(seed, Stream::Noise, &[i as u64, j as u64]));
            for (step, v) in ar_series(&mut rng, t, phi).into_iter().enumerate() {
                errors[[i, step, j]] = v;
            }
        }
    }
    Ok(errors)
}

/// Evaluates the structural equations in index order on the given errors.
pub fn simulate_with_errors(truth: &GroundTruthDag, errors: &Array3<f64>) -> Result<Dataset> {
    let (n, t, d) = errors.dim();
    if d != truth.d {
        return Err(Error::contract(format!(
            "errors have {d} variables, graph has {}",
            truth.d
        )));
    }
    let mut values = Array3::zeros((n, t, d));
    let mut row = vec![0.0; d];
    for i in 0..n {
        for step in 0..t {
            for j in 0..d {
                row[j] = truth.equations[j].mean(truth.kind, &row) + errors[[i, step, j]];
            }
            for j in 0..d {
                values[[i, step, j]] = row[j];
            }
        }
    }
    let kind = match truth.kind {
        SemKind::Nonlinear => "nonlinear",
        SemKind::Linear => "linear",
    };
    Dataset::new(values, format!("simulated {kind} SEM (d={d}, N={n}, T={t})"))
}

fn simulate_kind(truth: &GroundTruthDag, kind: SemKind, n: usize, t: usize, phi: f64, seed: u64) -> Result<Dataset> {
    if truth.kind != kind {
        return Err(Error::contract(format!(
            "graph was sampled for the {:?} model, requested {:?}",
            truth.kind, kind
        )));
    }
    let errors = draw_errors(n, t, truth.d, phi, seed)?;
    simulate_with_errors(truth, &errors)
}

/// Sum of trigonometric pair and single-parent terms plus AR(0.5) errors.
pub fn simulate_nonlinear(truth: &GroundTruthDag, n: usize, t: usize, seed: u64) -> Result<Dataset> {
    simulate_kind(truth, SemKind::Nonlinear, n, t, AR_COEFFICIENT, seed)
}

pub fn simulate_linear(truth: &GroundTruthDag, n: usize, t: usize, seed: u64) -> Result<Dataset> {
    simulate_kind(truth, SemKind::Linear, n, t, AR_COEFFICIENT, seed)
}

/// Either model with an explicit AR coefficient (`0` gives i.i.d. errors).
pub fn simulate(truth: &GroundTruthDag, n: usize, t: usize, phi: f64, seed: u64) -> Result<Dataset> {
    simulate_kind(truth, truth.kind, n, t, phi, seed)
}

/// `X1 = e1, X2 = e2, X3 = X1^2 + X2 + e3` with i.i.d. standard normal errors.
pub fn vstructure_example(n: usize, t: usize, seed: u64) -> Result<Dataset> {
    vstructure_example_ar(n, t, 0.0, seed)
}

pub fn vstructure_example_ar(n: usize, t: usize, phi: f64, seed: u64) -> Result<Dataset> {
    let errors = draw_errors(n, t, 3, phi, seed)?;
    let mut values = errors.clone();
    for i in 0..n {
        for step in 0..t {
            let x1 = values[[i, step, 0]];
            values[[i, step, 2]] += x1 * x1 + values[[i, step, 1]];
        }
    }
    Dataset::new(values, format!("v-structure example (N={n}, T={t})"))
}
