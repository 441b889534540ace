//! Monte Carlo size/power runs over replicated simulated datasets.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use anyhow::bail;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sugar_core::seed::{self, Stream};
use sugar_core::testkit::{Engine, LearnedPipeline, Learners, Method};

use crate::commands::{build_truth, data_seed, output_path, simulate_dataset, truth_seed, with_workers, Envelope, Truth};
use crate::config::RunConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRow {
    pub method: Method,
    pub j: usize,
    pub k: usize,
    pub alpha: f64,
    pub replications: usize,
    pub rejections: usize,
    pub rate: f64,
    /// Binomial standard error `sqrt(rate (1 − rate) / R)`.
    pub se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub rows: Vec<ExperimentRow>,
    /// `pvalues[r][e]` for replication `r` and method-edge pair `e`, ordered
    /// like `methods × edges`.
    pub pvalues: Vec<Vec<f64>>,
    /// 1-based true `(parent, child)` edges.
    pub truth_edges: Vec<(usize, usize)>,
}

/// Seed of the test procedure in replication `r`.
pub fn replication_seed(cfg: &RunConfig, r: usize) -> u64 {
    seed::derive(cfg.seed, Stream::Replication, &[r as u64])
}

/// Runs the configured experiment with learners built per replication.
pub fn run_experiment_with<L, F>(cfg: &RunConfig, make_learners: F) -> anyhow::Result<ExperimentReport>
where
    L: Learners,
    F: Fn(&Truth, &sugar_core::Dataset) -> L + Sync,
{
    cfg.validate()?;
    let sim = &cfg.simulation;
    if sim.replications == 0 {
        bail!("experiment needs at least one replication");
    }
    if sim.edges.is_empty() || sim.methods.is_empty() {
        bail!("experiment needs at least one edge and one method");
    }
    let truth = build_truth(sim, truth_seed(cfg))?;
    let d = truth.n_vars();
    let mut edges = Vec::with_capacity(sim.edges.len());
    for &(j, k) in &sim.edges {
        if j == 0 || k == 0 || j > d || k > d || j == k {
            bail!("experiment edge ({j}, {k}) invalid for {d} variables");
        }
        edges.push((j - 1, k - 1));
    }
    let pvalues: Vec<Vec<f64>> = with_workers(cfg, || {
        (0..sim.replications)
            .into_par_iter()
            .map(|r| -> anyhow::Result<Vec<f64>> {
                let data = simulate_dataset(sim, &truth, data_seed(cfg, r))?;
                let learners = make_learners(&truth, &data);
                let engine = Engine::new(&data, &cfg.test, &learners, replication_seed(cfg, r), None)?;
                let mut out = Vec::with_capacity(sim.methods.len() * edges.len());
                for &method in &sim.methods {
                    for &(j, k) in &edges {
                        let report = match method {
                            Method::Sugar => engine.test_edge(j, k)?,
                            Method::Drt => engine.drt_edge(j, k)?,
                        };
                        out.push(report.p_value);
                    }
                }
                log::info!("replication {r} done");
                Ok(out)
            })
            .collect::<anyhow::Result<Vec<_>>>()
    })??;

    let reps = sim.replications;
    let mut rows = Vec::new();
    for (mi, &method) in sim.methods.iter().enumerate() {
        for (ei, &(j, k)) in sim.edges.iter().enumerate() {
            let col = mi * edges.len() + ei;
            for &alpha in &sim.alphas {
                let rejections = pvalues.iter().filter(|p| p[col] <= alpha).count();
                let rate = rejections as f64 / reps as f64;
                rows.push(ExperimentRow {
                    method,
                    j,
                    k,
                    alpha,
                    replications: reps,
                    rejections,
                    rate,
                    se: (rate * (1.0 - rate) / reps as f64).sqrt(),
                });
            }
        }
    }
    Ok(ExperimentReport {
        rows,
        pvalues,
        truth_edges: truth.edges().into_iter().map(|(k, j)| (k + 1, j + 1)).collect(),
    })
}

pub fn run_experiment(cfg: &RunConfig) -> anyhow::Result<ExperimentReport> {
    let learners = LearnedPipeline::from_config(&cfg.test);
    run_experiment_with(cfg, |_, _| learners.clone())
}

/// Writes `experiment.json` and the summary table `experiment.csv`.
pub fn cmd_experiment(cfg: &RunConfig) -> anyhow::Result<(PathBuf, Envelope<ExperimentReport>)> {
    let report = run_experiment(cfg)?;
    let csv_path = output_path(cfg, "experiment.csv")?;
    let mut out = BufWriter::new(File::create(&csv_path)?);
    writeln!(out, "method,j,k,alpha,replications,rejections,rate,se")?;
    for r in &report.rows {
        let method = match r.method {
            Method::Sugar => "sugar",
            Method::Drt => "drt",
        };
        writeln!(
            out,
            "{method},{},{},{},{},{},{},{}",
            r.j, r.k, r.alpha, r.replications, r.rejections, r.rate, r.se
        )?;
    }
    out.flush()?;
    let env = Envelope {
        command: "experiment".to_string(),
        config: cfg.clone(),
        report,
    };
    let path = output_path(cfg, "experiment.json")?;
    crate::commands::write_json(&path, &env)?;
    Ok((path, env))
}
