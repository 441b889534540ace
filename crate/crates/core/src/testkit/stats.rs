use ndarray::{Array1, Array2, ArrayView1, Axis};
use rand::seq::SliceRandom;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::genlearn::PseudoSampleBlock;
use crate::seed;

/// Random partition of subjects into two halves of sizes `⌈N/2⌉`, `⌊N/2⌋`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitPlan {
    /// Sorted subject indices of each half.
    pub halves: [Vec<usize>; 2],
    pub seed: u64,
}

impl SplitPlan {
    pub fn half(&self, s: usize) -> &[usize] {
        &self.halves[s]
    }

    /// The half complementary to `s`.
    pub fn other(&self, s: usize) -> &[usize] {
        &self.halves[1 - s]
    }
}

pub fn split_subjects(n: usize, seed: u64) -> Result<SplitPlan> {
    if n < 2 {
        return Err(Error::config(format!("splitting needs at least 2 subjects, got {n}")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seed::rng(seed));
    let mut first = order[..n.div_ceil(2)].to_vec();
    let mut second = order[n.div_ceil(2)..].to_vec();
    first.sort_unstable();
    second.sort_unstable();
    Ok(SplitPlan {
        halves: [first, second],
        seed,
    })
}

/// `h_b(x) = cos(ω_b x)` for `b < B/2` and `sin(ω_{b−B/2} x)` otherwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransformBank {
    pub frequencies: Vec<f64>,
}

pub fn transform_bank(b: usize, seed: u64) -> Result<TransformBank> {
    if b < 2 || b % 2 != 0 {
        return Err(Error::config(format!("transform count B must be even and at least 2, got {b}")));
    }
    let mut rng = seed::rng(seed);
    let frequencies = (0..b / 2).map(|_| StandardNormal.sample(&mut rng)).collect();
    Ok(TransformBank { frequencies })
}

impl TransformBank {
    pub fn from_frequencies(frequencies: Vec<f64>) -> Result<Self> {
        if frequencies.is_empty() || frequencies.iter().any(|w| !w.is_finite()) {
            return Err(Error::config("transform frequencies must be finite and nonempty"));
        }
        Ok(TransformBank { frequencies })
    }

    pub fn len(&self) -> usize {
        2 * self.frequencies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frequencies.is_empty()
    }

    pub fn eval(&self, b: usize, x: f64) -> f64 {
        let half = self.frequencies.len();
        if b < half {
            (self.frequencies[b] * x).cos()
        } else {
            (self.frequencies[b - half] * x).sin()
        }
    }

    /// All `B` transforms at `x`, cos block then sin block.
    fn eval_into(&self, x: f64, out: &mut [f64], weight: f64) {
        let half = self.frequencies.len();
        for (f, &w) in self.frequencies.iter().enumerate() {
            let (s, c) = (w * x).sin_cos();
            out[f] += weight * c;
            out[half + f] += weight * s;
        }
    }
}

/// Per-observation products `I[o, b]` on one evaluation half.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasureTable {
    pub values: Array2<f64>,
    /// Consecutive row counts per subject.
    pub segments: Vec<usize>,
    pub cross_fitted: bool,
    /// 0-based half whose observations were evaluated.
    pub eval_half: usize,
}

impl MeasureTable {
    pub fn new(values: Array2<f64>, segments: Vec<usize>, cross_fitted: bool, eval_half: usize) -> Result<Self> {
        if segments.iter().sum::<usize>() != values.nrows() {
            return Err(Error::contract("table segments do not cover its rows"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::contract("measure table has non-finite entries"));
        }
        Ok(MeasureTable {
            values,
            segments,
            cross_fitted,
            eval_half,
        })
    }

    pub fn n_obs(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_transforms(&self) -> usize {
        self.values.ncols()
    }
}

/// `H[o, b] = h_b(x_o) − M⁻¹ Σ_m h_b(x̃_{o,m})`.
pub fn centered_transforms(xk: ArrayView1<f64>, pseudo: &PseudoSampleBlock, bank: &TransformBank) -> Result<Array2<f64>> {
    if pseudo.n_obs() != xk.len() {
        return Err(Error::contract(format!(
            "pseudo block has {} rows for {} observations",
            pseudo.n_obs(),
            xk.len()
        )));
    }
    let big_b = bank.len();
    let inv_m = 1.0 / pseudo.m() as f64;
    let mut out = Array2::<f64>::zeros((xk.len(), big_b));
    out.as_slice_mut()
        .expect("standard layout")
        .par_chunks_mut(big_b)
        .enumerate()
        .for_each(|(o, row)| {
            bank.eval_into(xk[o], row, 1.0);
            for &x in pseudo.values.row(o) {
                bank.eval_into(x, row, -inv_m);
            }
        });
    Ok(out)
}

/// `I[o, b] = residual_o · H[o, b]`.
pub fn products(residual: ArrayView1<f64>, centered: &Array2<f64>) -> Result<Array2<f64>> {
    if residual.len() != centered.nrows() {
        return Err(Error::contract(format!(
            "{} residuals for {} transform rows",
            residual.len(),
            centered.nrows()
        )));
    }
    Ok(centered * &residual.insert_axis(Axis(1)))
}

/// `I[o, b] = (x_j − ĝ) · (h_b(x_k) − M⁻¹ Σ_m h_b(x̃_m))` for one evaluation half.
pub fn per_observation_products(
    residual: ArrayView1<f64>,
    xk: ArrayView1<f64>,
    pseudo: &PseudoSampleBlock,
    bank: &TransformBank,
) -> Result<Array2<f64>> {
    products(residual, &centered_transforms(xk, pseudo, bank)?)
}

/// Column means `Î_b`.
pub fn estimate_measures(table: &MeasureTable) -> Result<Array1<f64>> {
    table
        .values
        .mean_axis(Axis(0))
        .ok_or_else(|| Error::contract("measures of an empty table"))
}

/// Batch-means standard errors with batches of length `k` inside each
/// subject; a trailing partial batch is dropped and normalization uses the
/// number of observations covered by full batches.
pub fn batched_se(table: &MeasureTable, k: usize) -> Result<Array1<f64>> {
    if k == 0 {
        return Err(Error::config("batch length K must be positive"));
    }
    if table.segments.iter().all(|&t| t < k) {
        return Err(Error::config(format!("batch length K={k} exceeds every subject's series length")));
    }
    let means = estimate_measures(table)?;
    let mut acc = Array1::<f64>::zeros(table.n_transforms());
    let mut covered = 0usize;
    let mut start = 0;
    for &len in &table.segments {
        for batch in 0..len / k {
            let lo = start + batch * k;
            let block = table.values.slice(ndarray::s![lo..lo + k, ..]);
            let sums = block.sum_axis(Axis(0)) - &means * k as f64;
            acc += &sums.mapv(|v| v * v);
            covered += k;
        }
        start += len;
    }
    Ok((acc / covered as f64).mapv(f64::sqrt))
}

/// `T̂_b = √n · Î_b / σ̂_b`, with `0/0 = 0`.
pub fn standardized_stats(means: &Array1<f64>, sds: &Array1<f64>, n_eval: usize) -> Result<Array1<f64>> {
    if means.len() != sds.len() {
        return Err(Error::contract("measure and standard-error lengths differ"));
    }
    let root_n = (n_eval as f64).sqrt();
    means
        .iter()
        .zip(sds)
        .enumerate()
        .map(|(b, (&m, &s))| {
            if s < 0.0 || !s.is_finite() {
                Err(Error::contract(format!("invalid standard error {s} for transform {b}")))
            } else if s == 0.0 && m == 0.0 {
                Ok(0.0)
            } else if s == 0.0 {
                Err(Error::DegenerateVariance { index: b, mean: m })
            } else {
                Ok(root_n * m / s)
            }
        })
        .collect()
}

/// Index maximizing `|T̂|`, smallest index on ties.
pub fn select_b(stats: &[f64]) -> Result<usize> {
    if stats.is_empty() {
        return Err(Error::contract("no statistics to select from"));
    }
    let mut best = 0;
    for (b, t) in stats.iter().enumerate() {
        if t.abs() > stats[best].abs() {
            best = b;
        }
    }
    Ok(best)
}

/// `2 (1 − Φ(|T|))`.
pub fn half_pvalue(t: f64) -> Result<f64> {
    if t.is_nan() {
        return Err(Error::contract("p-value of a NaN statistic"));
    }
    Ok(erfc(t.abs() / std::f64::consts::SQRT_2).clamp(0.0, 1.0))
}

fn check_p(p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::contract(format!("p-value {p} outside [0, 1]")))
    }
}

/// Bonferroni combination `min(1, 2 min(p1, p2))`.
pub fn combine_pvalues(p1: f64, p2: f64) -> Result<f64> {
    check_p(p1)?;
    check_p(p2)?;
    Ok((2.0 * p1.min(p2)).min(1.0))
}

/// Benjamini-Hochberg step-up at level `q`; returns the rejection mask.
pub fn bh_adjust(pvalues: &[f64], q: f64) -> Result<Vec<bool>> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::config(format!("FDR level must lie in (0, 1), got {q}")));
    }
    for &p in pvalues {
        check_p(p)?;
    }
    let m = pvalues.len();
    let mut sorted = pvalues.to_vec();
    sorted.sort_by(f64::total_cmp);
    let cutoff = (1..=m)
        .rev()
        .find(|&r| sorted[r - 1] <= r as f64 * q / m as f64)
        .map(|r| sorted[r - 1]);
    Ok(match cutoff {
        Some(c) => pvalues.iter().map(|&p| p <= c).collect(),
        None => vec![false; m],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn split_sizes_and_determinism() {
        let p = split_subjects(28, 3).unwrap();
        assert_eq!((p.halves[0].len(), p.halves[1].len()), (14, 14));
        let odd = split_subjects(5, 3).unwrap();
        assert_eq!((odd.halves[0].len(), odd.halves[1].len()), (3, 2));
        assert_eq!(split_subjects(28, 3).unwrap(), p);
        let mut all: Vec<usize> = p.halves.concat();
        all.sort_unstable();
        assert_eq!(all, (0..28).collect::<Vec<_>>());
        assert!(split_subjects(1, 0).is_err());
    }

    #[test]
    fn bank_convention() {
        let bank = TransformBank::from_frequencies(vec![0.0, 2.0]).unwrap();
        assert_eq!(bank.len(), 4);
        assert_eq!(bank.eval(0, 5.0), 1.0);
        assert_eq!(bank.eval(1, 0.5), 1f64.cos());
        assert_eq!(bank.eval(3, 0.5), 1f64.sin());
        assert!(transform_bank(3, 0).is_err());
        assert_eq!(transform_bank(2000, 1).unwrap().frequencies.len(), 1000);
    }

    #[test]
    fn zero_frequency_gives_zero_products() {
        let bank = TransformBank::from_frequencies(vec![0.0]).unwrap();
        let pseudo = PseudoSampleBlock::new(array![[0.3, -1.0], [2.0, 4.0]]).unwrap();
        let i = per_observation_products(array![1.5, -2.0].view(), array![0.1, 0.9].view(), &pseudo, &bank).unwrap();
        assert!(i.column(0).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn hand_computed_products() {
        let bank = TransformBank::from_frequencies(vec![1.0]).unwrap();
        let pseudo = PseudoSampleBlock::new(array![[0.0, 1.0], [2.0, -1.0]]).unwrap();
        let r = array![2.0, -1.0];
        let x = array![0.5, 1.5];
        let i = per_observation_products(r.view(), x.view(), &pseudo, &bank).unwrap();
        let c = |v: f64| v.cos();
        let e00 = 2.0 * (c(0.5) - 0.5 * (c(0.0) + c(1.0)));
        let e10 = -1.0 * (c(1.5) - 0.5 * (c(2.0) + c(-1.0)));
        assert!((i[[0, 0]] - e00).abs() < 1e-15);
        assert!((i[[1, 0]] - e10).abs() < 1e-15);
    }

    #[test]
    fn batched_se_reductions() {
        let constant = MeasureTable::new(Array2::from_elem((40, 2), 0.7), vec![20, 20], true, 1).unwrap();
        let sd = batched_se(&constant, 5).unwrap();
        assert!(sd.iter().all(|&s| s < 1e-12));
        let vals = array![[1.0], [2.0], [4.0], [-1.0]];
        let t = MeasureTable::new(vals, vec![4], true, 1).unwrap();
        let pop = ((0.25 + 0.25 + 6.25 + 6.25) / 4.0f64).sqrt();
        assert!((batched_se(&t, 1).unwrap()[0] - pop).abs() < 1e-12);
        assert!(batched_se(&t, 5).is_err());
    }

    #[test]
    fn standardized_edge_cases() {
        let t = standardized_stats(&array![0.0, 0.5], &array![0.0, 1.0], 4).unwrap();
        assert_eq!(t.to_vec(), vec![0.0, 1.0]);
        assert!(matches!(
            standardized_stats(&array![0.1], &array![0.0], 4),
            Err(Error::DegenerateVariance { index: 0, .. })
        ));
    }

    #[test]
    fn selection_and_pvalues() {
        assert_eq!(select_b(&[1.0, -3.0, 2.0]).unwrap(), 1);
        assert_eq!(select_b(&[2.0, -2.0, 2.0]).unwrap(), 0);
        assert_eq!(half_pvalue(0.0).unwrap(), 1.0);
        assert!((half_pvalue(1.959964).unwrap() - 0.05).abs() < 1e-6);
        assert_eq!(half_pvalue(1e6).unwrap(), 0.0);
        assert!((combine_pvalues(0.03, 0.5).unwrap() - 0.06).abs() < 1e-15);
        assert_eq!(combine_pvalues(1.0, 1.0).unwrap(), 1.0);
        assert_eq!(combine_pvalues(0.6, 0.7).unwrap(), 1.0);
        assert!(combine_pvalues(1.2, 0.1).is_err());
    }

    #[test]
    fn bh_hand_cases() {
        assert_eq!(bh_adjust(&[0.01, 0.02, 0.04, 0.2], 0.05).unwrap(), vec![true, true, false, false]);
        assert_eq!(bh_adjust(&[1.0; 3], 0.05).unwrap(), vec![false; 3]);
        assert_eq!(bh_adjust(&[0.0; 3], 0.05).unwrap(), vec![true; 3]);
        assert!(bh_adjust(&[0.5], 1.0).is_err());
        assert!(bh_adjust(&[-0.1], 0.1).is_err());
    }
}
