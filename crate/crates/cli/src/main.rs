use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use sugar_cli::commands::{
    cmd_drt_edge, cmd_fdr_sweep, cmd_simulate, cmd_test_edge, cmd_test_path, cmd_test_union,
};
use sugar_cli::experiment::cmd_experiment;
use sugar_cli::{Model, RunConfig};

#[derive(Parser)]
#[command(name = "sugar", version, about = "Tests for directed edges in nonlinear DAGs")]
struct Cli {
    /// TOML config, or a JSON report whose embedded config is re-run.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Default)]
struct DataArg {
    /// Long-format CSV (subject,time,variable,value) or `.bin` dump.
    #[arg(long)]
    data: Option<PathBuf>,
}

#[derive(Args)]
struct EdgeArgs {
    #[command(flatten)]
    data: DataArg,
    /// Child variable (1-based).
    #[arg(long)]
    j: Option<usize>,
    /// Candidate parent (1-based).
    #[arg(long)]
    k: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a dataset and its ground truth.
    Simulate {
        #[arg(long, value_enum)]
        model: Option<ModelArg>,
        #[arg(long)]
        d: Option<usize>,
        #[arg(long)]
        zeta: Option<f64>,
        #[arg(long = "N")]
        n: Option<usize>,
        #[arg(long = "T")]
        t: Option<usize>,
        #[arg(long)]
        phi: Option<f64>,
    },
    /// Test H0: k is not a parent of j.
    TestEdge(EdgeArgs),
    /// Double-regression baseline for one edge.
    DrtEdge(EdgeArgs),
    /// Test a directed path, e.g. `--nodes 1,2,3`.
    TestPath {
        #[command(flatten)]
        data: DataArg,
        #[arg(long, value_delimiter = ',')]
        nodes: Vec<usize>,
    },
    /// Test a union of edges, e.g. `--edges 3:1,4:2` for (j, k) pairs.
    TestUnion {
        #[command(flatten)]
        data: DataArg,
        #[arg(long, value_delimiter = ',', value_parser = parse_pair)]
        edges: Vec<(usize, usize)>,
    },
    /// Test all candidate pairs and control FDR by Benjamini-Hochberg.
    FdrSweep {
        #[command(flatten)]
        data: DataArg,
        #[arg(long)]
        q: Option<f64>,
    },
    /// Size/power experiment over simulated replications.
    Experiment {
        #[arg(long)]
        replications: Option<usize>,
    },
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum ModelArg {
    Nonlinear,
    Linear,
    Vstructure,
}

fn parse_pair(s: &str) -> Result<(usize, usize), String> {
    let (j, k) = s.split_once(':').ok_or_else(|| format!("expected j:k, got {s}"))?;
    Ok((j.trim().parse().map_err(|e| format!("{e}"))?, k.trim().parse().map_err(|e| format!("{e}"))?))
}

fn resolve(cli: &Cli) -> anyhow::Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(d) = &cli.output_dir {
        cfg.execution.output_dir = d.clone();
    }
    if let Some(w) = cli.workers {
        cfg.execution.workers = w;
    }
    let set_data = |cfg: &mut RunConfig, d: &DataArg| {
        if let Some(p) = &d.data {
            cfg.query.data = Some(p.clone());
        }
    };
    match &cli.command {
        Command::Simulate { model, d, zeta, n, t, phi } => {
            let sim = &mut cfg.simulation;
            if let Some(m) = model {
                sim.model = match m {
                    ModelArg::Nonlinear => Model::Nonlinear,
                    ModelArg::Linear => Model::Linear,
                    ModelArg::Vstructure => Model::Vstructure,
                };
            }
            sim.d = d.unwrap_or(sim.d);
            sim.zeta = zeta.unwrap_or(sim.zeta);
            sim.n_subjects = n.unwrap_or(sim.n_subjects);
            sim.n_times = t.unwrap_or(sim.n_times);
            sim.phi = phi.unwrap_or(sim.phi);
        }
        Command::TestEdge(e) | Command::DrtEdge(e) => {
            set_data(&mut cfg, &e.data);
            cfg.query.j = e.j.or(cfg.query.j);
            cfg.query.k = e.k.or(cfg.query.k);
        }
        Command::TestPath { data, nodes } => {
            set_data(&mut cfg, data);
            if !nodes.is_empty() {
                cfg.query.nodes = nodes.clone();
            }
        }
        Command::TestUnion { data, edges } => {
            set_data(&mut cfg, data);
            if !edges.is_empty() {
                cfg.query.edges = edges.clone();
            }
        }
        Command::FdrSweep { data, q } => {
            set_data(&mut cfg, data);
            cfg.query.q = q.unwrap_or(cfg.query.q);
        }
        Command::Experiment { replications } => {
            cfg.simulation.replications = replications.unwrap_or(cfg.simulation.replications);
        }
    }
    cfg.apply_env();
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: &Cli, cfg: &RunConfig) -> anyhow::Result<()> {
    match &cli.command {
        Command::Simulate { .. } => {
            let out = cmd_simulate(cfg)?;
            println!("wrote {} and {} ({} true edges)", out.data.display(), out.truth.display(), out.truth_edges.len());
        }
        Command::TestEdge(_) | Command::DrtEdge(_) => {
            let (path, env) = if matches!(cli.command, Command::TestEdge(_)) {
                cmd_test_edge(cfg)?
            } else {
                cmd_drt_edge(cfg)?
            };
            let r = &env.report;
            println!("edge ({}, {}): p = {} [halves {:?}] -> {}", r.edges[0].0, r.edges[0].1, r.p_value, r.half_pvalues(), path.display());
        }
        Command::TestPath { .. } => {
            let (path, env) = cmd_test_path(cfg)?;
            println!("path {:?}: p = {} -> {}", env.report.nodes, env.report.p_value, path.display());
        }
        Command::TestUnion { .. } => {
            let (path, env) = cmd_test_union(cfg)?;
            println!("union of {} edges: p = {} -> {}", env.report.edges.len(), env.report.p_value, path.display());
        }
        Command::FdrSweep { .. } => {
            let (path, env) = cmd_fdr_sweep(cfg)?;
            let rejected = env.report.rows.iter().filter(|r| r.rejected).count();
            println!("{} pairs tested, {rejected} rejected at q = {} -> {}", env.report.rows.len(), env.report.q, path.display());
        }
        Command::Experiment { .. } => {
            let (path, env) = cmd_experiment(cfg)?;
            for r in &env.report.rows {
                println!("{:?} ({}, {}) alpha {}: rate {:.3} (se {:.3})", r.method, r.j, r.k, r.alpha, r.rate, r.se);
            }
            println!("-> {}", path.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let cfg = match resolve(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(2);
        }
    };
    match run(&cli, &cfg) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
