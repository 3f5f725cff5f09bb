//! `dirgraph-opt`: run and analyse distributed optimization over directed graphs.
//!
//! Exit codes: 0 when every requested run completed, 3 when at least one run
//! diverged (outputs are still written), 1 on any other error, 2 on usage errors.

mod commands;
mod config;
mod io;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use dirgraph_opt::algorithms::{Algorithm, StepSize};

use commands::Status;
use config::{parse_algorithms, parse_list, ExperimentConfig, GraphSource, ObjectiveSpec, Sweep};

#[derive(Parser)]
#[command(name = "dirgraph-opt", version, about = "Distributed optimization over directed graphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Inspect or generate graphs.
    #[command(subcommand)]
    Graph(GraphCmd),
    /// Generate or solve logistic-regression datasets.
    #[command(subcommand)]
    Data(DataCmd),
    /// One algorithm on one instance, emitting the trace CSV.
    Run(RunArgs),
    /// Convergence constants, step-size bound and rho(G) table for a graph.
    Analyze(AnalyzeArgs),
    /// Every configured algorithm on a shared instance.
    Compare(StudyArgs),
    /// Step-size study: rho(G) and the residual after the horizon per step.
    Sweep(StudyArgs),
    /// Decay rates over nested graph chains.
    Sparsity(StudyArgs),
}

#[derive(Subcommand)]
enum GraphCmd {
    /// Node and edge counts; fails unless strongly connected.
    Check { graph: GraphSource },
    /// Perron vector and the norm constants of the uniform weights.
    Spectrum {
        graph: GraphSource,
        #[arg(long)]
        slack: Option<f64>,
    },
    /// Random strongly-connected digraph as an edge list.
    Gen {
        #[arg(long)]
        nodes: usize,
        #[arg(long, default_value_t = 0)]
        extra: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum DataCmd {
    /// Synthetic dataset as `agent,label,f1..fp` CSV.
    Gen {
        #[arg(long, default_value_t = 10)]
        agents: usize,
        #[arg(long, default_value_t = 10)]
        samples: usize,
        #[arg(long, default_value_t = 3)]
        features: usize,
        #[arg(long, default_value_t = 1.0)]
        beta: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Centralized optimum of a dataset.
    Solve {
        data: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        beta: f64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ObjectiveKind {
    Logistic,
    Quadratic,
}

/// Instance selection shared by the run-style commands.
#[derive(Args)]
struct InstanceArgs {
    /// fig1 | cycle:N | complete:N | random:N:EXTRA:SEED | edge-list file
    #[arg(long)]
    graph: Option<GraphSource>,
    #[arg(long, value_enum)]
    objective: Option<ObjectiveKind>,
    /// Seed for generated objectives.
    #[arg(long)]
    seed: Option<u64>,
    /// Dataset CSV instead of generated data.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    iters: Option<usize>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    instance: InstanceArgs,
    #[arg(long, default_value = "addopt")]
    alg: Algorithm,
    #[arg(long, default_value_t = 0.1)]
    alpha: f64,
    /// Use alpha/sqrt(k) instead of a constant step.
    #[arg(long)]
    diminishing: bool,
    /// Trace CSV path; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[arg(long, default_value = "fig1")]
    graph: GraphSource,
    #[arg(long)]
    l: f64,
    #[arg(long)]
    s: f64,
    /// Expected node count, checked against the graph.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, conflicts_with = "sweep")]
    alpha: Option<f64>,
    /// lo:hi:points
    #[arg(long)]
    sweep: Option<Sweep>,
    #[arg(long)]
    slack: Option<f64>,
}

#[derive(Args)]
struct StudyArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    instance: InstanceArgs,
    /// Comma-separated: addopt, dextra, gp.
    #[arg(long)]
    alg: Option<String>,
    #[arg(long)]
    alpha: Option<f64>,
    /// Scale of the gradient-push schedule scale/sqrt(k).
    #[arg(long)]
    diminishing: Option<f64>,
    /// lo:hi:points
    #[arg(long)]
    sweep: Option<Sweep>,
    #[arg(long)]
    horizon: Option<usize>,
    /// Comma-separated edge counts of the generated chain.
    #[arg(long)]
    edges: Option<String>,
    #[arg(long)]
    seeds: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn apply_instance(cfg: &mut ExperimentConfig, a: &InstanceArgs) {
    if let Some(g) = &a.graph {
        cfg.graph = g.clone();
    }
    if let Some(kind) = a.objective {
        let same = matches!(
            (kind, &cfg.objective),
            (ObjectiveKind::Logistic, ObjectiveSpec::Logistic { .. })
                | (ObjectiveKind::Quadratic, ObjectiveSpec::Quadratic { .. })
        );
        if !same {
            cfg.objective = match kind {
                ObjectiveKind::Logistic => ObjectiveSpec::default(),
                ObjectiveKind::Quadratic => ObjectiveSpec::Quadratic { seed: 1, dim: 3 },
            };
        }
    }
    match &mut cfg.objective {
        ObjectiveSpec::Logistic { seed, beta, data, .. } => {
            if let Some(s) = a.seed {
                *seed = s;
            }
            if let Some(b) = a.beta {
                *beta = b;
            }
            if let Some(d) = &a.data {
                *data = Some(d.clone());
            }
        }
        ObjectiveSpec::Quadratic { seed, .. } => {
            if let Some(s) = a.seed {
                *seed = s;
            }
        }
    }
    if let Some(i) = a.iters {
        cfg.iters = i;
    }
}

fn study_config(a: &StudyArgs) -> Result<ExperimentConfig> {
    let mut cfg = match &a.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    apply_instance(&mut cfg, &a.instance);
    if let Some(list) = &a.alg {
        cfg.algorithms = parse_algorithms(list)?;
    }
    if let Some(v) = a.alpha {
        cfg.alpha = v;
    }
    if let Some(v) = a.diminishing {
        cfg.diminishing = Some(v);
    }
    if let Some(v) = a.sweep {
        cfg.sweep = Some(v);
    }
    if let Some(v) = a.horizon {
        cfg.horizon = v;
    }
    if let Some(v) = &a.edges {
        cfg.sparsity.edges = parse_list(v).context("--edges")?;
    }
    if let Some(v) = a.seeds {
        cfg.sparsity.seeds = v;
    }
    if let Some(v) = &a.out {
        cfg.out = v.clone();
    }
    Ok(cfg)
}

fn configure_threads() -> Result<()> {
    if let Ok(v) = std::env::var("DIRGRAPH_OPT_THREADS") {
        let threads: usize = v.trim().parse().context("DIRGRAPH_OPT_THREADS must be a count")?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .context("configuring the thread pool")?;
    }
    Ok(())
}

fn dispatch(cli: Cli) -> Result<Status> {
    configure_threads()?;
    match cli.command {
        Command::Graph(GraphCmd::Check { graph }) => commands::graph_check(&graph),
        Command::Graph(GraphCmd::Spectrum { graph, slack }) => commands::graph_spectrum(&graph, slack),
        Command::Graph(GraphCmd::Gen { nodes, extra, seed, out }) => {
            commands::graph_gen(nodes, extra, seed, out.as_deref())
        }
        Command::Data(DataCmd::Gen { agents, samples, features, beta, seed, out }) => {
            commands::data_gen(agents, samples, features, beta, seed, out.as_deref())
        }
        Command::Data(DataCmd::Solve { data, beta }) => commands::data_solve(&data, beta),
        Command::Run(a) => {
            let mut cfg = ExperimentConfig::default();
            apply_instance(&mut cfg, &a.instance);
            cfg.validate()?;
            let step = if a.diminishing {
                StepSize::InvSqrt(a.alpha)
            } else {
                StepSize::Constant(a.alpha)
            };
            commands::run_single(&cfg, a.alg, step, a.out.as_deref())
        }
        Command::Analyze(a) => {
            let alphas = match (a.alpha, a.sweep) {
                (Some(x), _) => vec![x],
                (None, Some(s)) => s.grid(),
                (None, None) => Vec::new(),
            };
            commands::cmd_analyze(&a.graph, a.l, a.s, a.n, &alphas, a.slack)
        }
        Command::Compare(a) => commands::cmd_compare(&study_config(&a)?),
        Command::Sweep(a) => commands::cmd_sweep(&study_config(&a)?),
        Command::Sparsity(a) => commands::cmd_sparsity(&study_config(&a)?),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(Status::Completed) => ExitCode::SUCCESS,
        Ok(Status::Diverged) => ExitCode::from(3),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
