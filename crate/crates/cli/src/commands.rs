//! Subcommand implementations. Each writes its outputs under the configured
//! output directory and returns the in-memory result.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};
use sugar_core::data::{read_binary, read_csv, write_csv};
use sugar_core::seed::{self, Stream};
use sugar_core::simgen::{sample_dag_with, simulate, vstructure_example_ar};
use sugar_core::testkit::{Engine, LearnedPipeline, PathReport, SweepReport, TestReport};
use sugar_core::{Dataset, GroundTruthDag, SemKind};

use crate::config::{Model, RunConfig, SimulationConfig};

/// A report together with the resolved config that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope<T> {
    pub command: String,
    pub config: RunConfig,
    pub report: T,
}

/// Ground truth of a simulation design.
#[derive(Debug, Clone, PartialEq)]
pub enum Truth {
    Graph(GroundTruthDag),
    Vstructure,
}

impl Truth {
    pub fn n_vars(&self) -> usize {
        match self {
            Truth::Graph(g) => g.d,
            Truth::Vstructure => 3,
        }
    }

    /// `(parent, child)` pairs, 0-based, sorted by child then parent.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        match self {
            Truth::Graph(g) => g
                .parents
                .iter()
                .enumerate()
                .flat_map(|(j, pa)| pa.iter().map(move |&k| (k, j)))
                .collect(),
            Truth::Vstructure => vec![(0, 2), (1, 2)],
        }
    }
}

pub fn build_truth(sim: &SimulationConfig, seed: u64) -> anyhow::Result<Truth> {
    let kind = match sim.model {
        Model::Vstructure => return Ok(Truth::Vstructure),
        Model::Nonlinear => SemKind::Nonlinear,
        Model::Linear => SemKind::Linear,
    };
    Ok(Truth::Graph(sample_dag_with(sim.d, sim.zeta, kind, sim.zero_fraction, seed)?))
}

pub fn simulate_dataset(sim: &SimulationConfig, truth: &Truth, seed: u64) -> anyhow::Result<Dataset> {
    Ok(match truth {
        Truth::Graph(g) => simulate(g, sim.n_subjects, sim.n_times, sim.phi, seed)?,
        Truth::Vstructure => vstructure_example_ar(sim.n_subjects, sim.n_times, sim.phi, seed)?,
    })
}

pub fn truth_seed(cfg: &RunConfig) -> u64 {
    seed::derive(cfg.seed, Stream::Truth, &[])
}

pub fn data_seed(cfg: &RunConfig, replication: usize) -> u64 {
    seed::derive(cfg.seed, Stream::Data, &[replication as u64])
}

pub fn output_path(cfg: &RunConfig, name: &str) -> anyhow::Result<PathBuf> {
    let dir = &cfg.execution.output_dir;
    fs::create_dir_all(dir).with_context(|| format!("creating output directory {}", dir.display()))?;
    Ok(dir.join(name))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let mut out = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
    serde_json::to_writer_pretty(&mut out, value)?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}

/// Runs `f` on a thread pool sized by the execution config.
pub fn with_workers<T: Send>(cfg: &RunConfig, f: impl FnOnce() -> T + Send) -> anyhow::Result<T> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(cfg.execution.workers).build()?;
    Ok(pool.install(f))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulateOutput {
    pub data: PathBuf,
    pub truth: PathBuf,
    pub dataset: Dataset,
    pub truth_edges: Vec<(usize, usize)>,
}

/// Writes `data.csv` (long format) and `truth.csv` (1-based parent, child).
pub fn cmd_simulate(cfg: &RunConfig) -> anyhow::Result<SimulateOutput> {
    cfg.validate()?;
    let truth = build_truth(&cfg.simulation, truth_seed(cfg))?;
    let dataset = simulate_dataset(&cfg.simulation, &truth, data_seed(cfg, 0))?;
    let data = output_path(cfg, "data.csv")?;
    let mut out = BufWriter::new(File::create(&data)?);
    write_csv(&dataset, &mut out)?;
    out.flush()?;
    let truth_path = output_path(cfg, "truth.csv")?;
    let mut t = BufWriter::new(File::create(&truth_path)?);
    writeln!(t, "parent,child")?;
    let truth_edges = truth.edges();
    for &(k, j) in &truth_edges {
        writeln!(t, "{},{}", k + 1, j + 1)?;
    }
    t.flush()?;
    Ok(SimulateOutput {
        data,
        truth: truth_path,
        dataset,
        truth_edges,
    })
}

/// Reads a long-format CSV, or a binary dump when the extension is `.bin`.
pub fn load_dataset(path: &Path) -> anyhow::Result<Dataset> {
    let file = File::open(path).with_context(|| format!("opening data {}", path.display()))?;
    let name = path.display().to_string();
    let data = if path.extension().is_some_and(|e| e == "bin") {
        read_binary(BufReader::new(file), &name)?
    } else {
        read_csv(BufReader::new(file), &name)?
    };
    Ok(data)
}

fn query_data(cfg: &RunConfig) -> anyhow::Result<Dataset> {
    match &cfg.query.data {
        Some(p) => load_dataset(p),
        None => bail!("no data file given (use --data or [query] data)"),
    }
}

fn zero_based(i: usize, d: usize, what: &str) -> anyhow::Result<usize> {
    if i == 0 || i > d {
        bail!("{what} {i} out of range 1..={d}");
    }
    Ok(i - 1)
}

fn query_edge(cfg: &RunConfig, d: usize) -> anyhow::Result<(usize, usize)> {
    match (cfg.query.j, cfg.query.k) {
        (Some(j), Some(k)) => Ok((zero_based(j, d, "j")?, zero_based(k, d, "k")?)),
        _ => bail!("edge commands need both j and k"),
    }
}

fn finish<T: Serialize + Clone>(cfg: &RunConfig, command: &str, report: T) -> anyhow::Result<(PathBuf, Envelope<T>)> {
    let env = Envelope {
        command: command.to_string(),
        config: cfg.clone(),
        report,
    };
    let path = output_path(cfg, &format!("{command}.json"))?;
    write_json(&path, &env)?;
    Ok((path, env))
}

pub fn cmd_test_edge(cfg: &RunConfig) -> anyhow::Result<(PathBuf, Envelope<TestReport>)> {
    cfg.validate()?;
    let data = query_data(cfg)?;
    let (j, k) = query_edge(cfg, data.n_vars())?;
    let learners = LearnedPipeline::from_config(&cfg.test);
    let report = with_workers(cfg, || Engine::new(&data, &cfg.test, &learners, cfg.seed, None)?.test_edge(j, k))??;
    finish(cfg, "test-edge", report)
}

pub fn cmd_drt_edge(cfg: &RunConfig) -> anyhow::Result<(PathBuf, Envelope<TestReport>)> {
    cfg.validate()?;
    let data = query_data(cfg)?;
    let (j, k) = query_edge(cfg, data.n_vars())?;
    let learners = LearnedPipeline::from_config(&cfg.test);
    let report = with_workers(cfg, || Engine::new(&data, &cfg.test, &learners, cfg.seed, None)?.drt_edge(j, k))??;
    finish(cfg, "drt-edge", report)
}

pub fn cmd_test_path(cfg: &RunConfig) -> anyhow::Result<(PathBuf, Envelope<PathReport>)> {
    cfg.validate()?;
    let data = query_data(cfg)?;
    let nodes = cfg
        .query
        .nodes
        .iter()
        .map(|&n| zero_based(n, data.n_vars(), "node"))
        .collect::<anyhow::Result<Vec<_>>>()?;
    let learners = LearnedPipeline::from_config(&cfg.test);
    let report = with_workers(cfg, || Engine::new(&data, &cfg.test, &learners, cfg.seed, None)?.test_path(&nodes))??;
    finish(cfg, "test-path", report)
}

pub fn cmd_test_union(cfg: &RunConfig) -> anyhow::Result<(PathBuf, Envelope<TestReport>)> {
    cfg.validate()?;
    let data = query_data(cfg)?;
    let d = data.n_vars();
    let edges = cfg
        .query
        .edges
        .iter()
        .map(|&(j, k)| Ok((zero_based(j, d, "j")?, zero_based(k, d, "k")?)))
        .collect::<anyhow::Result<Vec<_>>>()?;
    let learners = LearnedPipeline::from_config(&cfg.test);
    let report = with_workers(cfg, || Engine::new(&data, &cfg.test, &learners, cfg.seed, None)?.test_union(&edges))??;
    finish(cfg, "test-union", report)
}

/// Writes `fdr-sweep.json` and the edge table `fdr-sweep.csv`.
pub fn cmd_fdr_sweep(cfg: &RunConfig) -> anyhow::Result<(PathBuf, Envelope<SweepReport>)> {
    cfg.validate()?;
    let data = query_data(cfg)?;
    let learners = LearnedPipeline::from_config(&cfg.test);
    let report =
        with_workers(cfg, || Engine::new(&data, &cfg.test, &learners, cfg.seed, None)?.fdr_sweep(cfg.query.q))??;
    let csv_path = output_path(cfg, "fdr-sweep.csv")?;
    let mut out = BufWriter::new(File::create(&csv_path)?);
    report.write_csv(&mut out)?;
    out.flush()?;
    finish(cfg, "fdr-sweep", report)
}
