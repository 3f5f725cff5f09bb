//! Subcommand implementations. Each returns whether every requested run
//! finished without diverging.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::{ensure, Context, Result};

use dirgraph_opt::algorithms::{run, Algorithm, Problem, RunConfig, StepSize};
use dirgraph_opt::analysis::{alpha_upper_bound, rho_g, NetworkAnalysis};
use dirgraph_opt::digraph::{uniform_weights, Digraph, SpectralData};
use dirgraph_opt::experiments::{compare, sparsity_study, stepsize_study, RunSummary};
use dirgraph_opt::objectives::{
    centralized_solve, generate_dataset, logistic_objectives, quadratic_objectives, random_quadratics,
    LogisticData, Objectives,
};
use dirgraph_opt::Error;

use crate::config::{ExperimentConfig, GraphSource, ObjectiveSpec};
use crate::io::{dataset_csv, load_graph, num, read_dataset, trace_csv, write_file};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Completed,
    Diverged,
}

impl Status {
    fn from_flag(diverged: bool) -> Self {
        if diverged {
            Status::Diverged
        } else {
            Status::Completed
        }
    }
}

/// Writes to `out` when given, stdout otherwise.
fn emit(out: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match out {
        Some(path) => write_file(path, bytes),
        None => {
            use std::io::Write;
            std::io::stdout().write_all(bytes)?;
            Ok(())
        }
    }
}

pub fn graph_check(src: &GraphSource) -> Result<Status> {
    let g = load_graph(src)?;
    println!("nodes {}", g.node_count());
    println!("edges {}", g.edge_count());
    let connected = g.is_strongly_connected();
    println!("strongly connected {}", if connected { "yes" } else { "no" });
    ensure!(connected, "graph is not strongly connected");
    Ok(Status::Completed)
}

pub fn graph_spectrum(src: &GraphSource, slack: Option<f64>) -> Result<Status> {
    let g = load_graph(src)?;
    let w = uniform_weights(&g)?;
    let sd = match slack {
        Some(s) => SpectralData::compute(&w, s)?,
        None => SpectralData::with_default_slack(&w)?,
    };
    let an = NetworkAnalysis::from_constants(&w, 1.0, 1.0, slack)?;
    let pi: Vec<String> = sd.pi().iter().map(|p| p.to_string()).collect();
    println!("pi {}", pi.join(","));
    println!("tau {}", sd.tau);
    println!("eps {}", sd.eps);
    println!("rho {}", sd.norm.rho);
    println!("sigma {}", sd.sigma());
    println!("c {}", sd.norm.c());
    println!("d {}", sd.norm.d());
    println!("y {}", an.push_sum.y);
    println!("y_minus {}", an.push_sum.y_minus);
    Ok(Status::Completed)
}

pub fn graph_gen(n: usize, extra: usize, seed: u64, out: Option<&Path>) -> Result<Status> {
    let g = Digraph::random_strongly_connected(n, extra, seed)?;
    emit(out, g.to_text().as_bytes())?;
    Ok(Status::Completed)
}

pub fn data_gen(n: usize, m: usize, p: usize, beta: f64, seed: u64, out: Option<&Path>) -> Result<Status> {
    let data = generate_dataset(n, m, p, beta, seed)?;
    emit(out, &dataset_csv(&data)?)?;
    Ok(Status::Completed)
}

pub fn data_solve(path: &Path, beta: f64) -> Result<Status> {
    let data = read_dataset(path, beta)?;
    let opt = centralized_solve(&logistic_objectives(&data)?)?;
    let z: Vec<String> = opt.z_star.iter().map(|v| v.to_string()).collect();
    println!("z_star {}", z.join(","));
    println!("f_star {}", opt.f_star);
    println!("gradient_norm {}", opt.residual_norm);
    println!("iterations {}", opt.iterations);
    ensure!(opt.converged, "centralized solve hit its iteration cap");
    Ok(Status::Completed)
}

pub fn build_objectives(spec: &ObjectiveSpec, n: usize) -> Result<Objectives> {
    Ok(match spec {
        ObjectiveSpec::Logistic { data: Some(path), beta, .. } => {
            let data: LogisticData = read_dataset(path, *beta)?;
            ensure!(
                data.agents() == n,
                "dataset has {} agents but the graph has {n} nodes",
                data.agents()
            );
            logistic_objectives(&data)?
        }
        ObjectiveSpec::Logistic { seed, samples, features, beta, data: None } => {
            logistic_objectives(&generate_dataset(n, *samples, *features, *beta, *seed)?)?
        }
        ObjectiveSpec::Quadratic { seed, dim } => quadratic_objectives(&random_quadratics(n, *dim, *seed)?),
    })
}

fn build_problem(cfg: &ExperimentConfig) -> Result<Problem> {
    let g = load_graph(&cfg.graph)?;
    let objs = build_objectives(&cfg.objective, g.node_count())?;
    Ok(Problem::new(uniform_weights(&g)?, objs)?)
}

pub fn run_single(cfg: &ExperimentConfig, alg: Algorithm, step: StepSize, out: Option<&Path>) -> Result<Status> {
    let p = build_problem(cfg)?;
    match run(&p, &RunConfig::new(alg, step, cfg.iters)) {
        Ok(trace) => {
            emit(out, &trace_csv(&trace)?)?;
            if out.is_some() {
                println!(
                    "{} iterations {} final residual {}",
                    alg.name(),
                    trace.iterations(),
                    trace.final_residual()
                );
            }
            Ok(Status::Completed)
        }
        Err(Error::Divergence { iteration }) => {
            eprintln!("{} diverged at iteration {iteration}", alg.name());
            Ok(Status::Diverged)
        }
        Err(e) => Err(e.into()),
    }
}

fn step_label(step: StepSize) -> String {
    match step {
        StepSize::Constant(a) => format!("constant:{a}"),
        StepSize::InvSqrt(s) => format!("invsqrt:{s}"),
    }
}

fn opt_num(v: Option<f64>) -> String {
    v.map_or_else(String::new, num)
}

pub fn summary_csv(rows: &[RunSummary]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["algorithm", "step", "iterations", "final_residual", "slope", "r_squared", "diverged"])?;
    for s in rows {
        w.write_record([
            s.algorithm.name().to_string(),
            step_label(s.step),
            s.iterations.to_string(),
            num(s.final_residual),
            opt_num(s.fit.map(|f| f.slope)),
            opt_num(s.fit.map(|f| f.r_squared)),
            s.diverged().to_string(),
        ])?;
    }
    Ok(w.into_inner()?)
}

pub fn cmd_compare(cfg: &ExperimentConfig) -> Result<Status> {
    cfg.validate()?;
    let p = build_problem(cfg)?;
    let runs: Vec<RunConfig> = cfg
        .algorithms
        .iter()
        .map(|&a| RunConfig::new(a, cfg.step_for(a), cfg.iters))
        .collect();
    let outcomes = compare(&p, &runs)?;
    for o in &outcomes {
        if let Some(t) = &o.trace {
            let path = cfg.out.join(format!("trace_{}.csv", o.summary.algorithm.name()));
            write_file(&path, &trace_csv(t)?)?;
        }
    }
    let summaries: Vec<RunSummary> = outcomes.into_iter().map(|o| o.summary).collect();
    write_file(&cfg.out.join("summary.csv"), &summary_csv(&summaries)?)?;
    let mut text = String::new();
    for s in &summaries {
        let rate = s.fit.map_or("-".to_string(), |f| format!("{:.5}", f.slope));
        writeln!(
            text,
            "{:<7} {:<16} residual {:.3e} slope {rate}{}",
            s.algorithm.name(),
            step_label(s.step),
            s.final_residual,
            if s.diverged() { " DIVERGED" } else { "" }
        )?;
    }
    print!("{text}");
    Ok(Status::from_flag(summaries.iter().any(RunSummary::diverged)))
}

pub fn cmd_sweep(cfg: &ExperimentConfig) -> Result<Status> {
    cfg.validate()?;
    let sweep = cfg.sweep.context("the step-size study needs a sweep (lo:hi:points)")?;
    let g = load_graph(&cfg.graph)?;
    let w = uniform_weights(&g)?;
    let objs = build_objectives(&cfg.objective, g.node_count())?;
    let an = NetworkAnalysis::new(&w, &objs, None)?;
    let p = Problem::new(w, objs)?;
    let rows = stepsize_study(&p, &an.profile, &sweep.grid(), cfg.horizon)?;
    let mut out = csv::Writer::from_writer(Vec::new());
    out.write_record(["alpha", "rho_g", "residual", "converged", "diverged"])?;
    for r in &rows {
        out.write_record([
            num(r.alpha),
            num(r.rho_g),
            num(r.residual),
            r.converged().to_string(),
            r.diverged.to_string(),
        ])?;
    }
    let path = cfg.out.join("sweep.csv");
    write_file(&path, &out.into_inner()?)?;
    println!("alpha_bar {}", alpha_upper_bound(&an.profile).value);
    println!("wrote {} rows to {}", rows.len(), path.display());
    Ok(Status::from_flag(rows.iter().any(|r| r.diverged)))
}

pub fn cmd_sparsity(cfg: &ExperimentConfig) -> Result<Status> {
    cfg.validate()?;
    let spec = &cfg.sparsity;
    let mut out = csv::Writer::from_writer(Vec::new());
    out.write_record(["seed", "graph", "edges", "slope", "r_squared", "final_residual"])?;
    let chains: Vec<(String, Vec<Digraph>, ObjectiveSpec)> = if spec.graphs.is_empty() {
        (1..=spec.seeds)
            .map(|s| {
                let chain = Digraph::nested_chain(spec.nodes, &spec.edges, s)?;
                Ok((s.to_string(), chain, reseeded(&cfg.objective, s - 1)))
            })
            .collect::<Result<_>>()?
    } else {
        let chain = spec.graphs.iter().map(load_graph).collect::<Result<Vec<_>>>()?;
        vec![("file".to_string(), chain, cfg.objective.clone())]
    };
    let mut sums = Vec::new();
    for (label, chain, objective) in &chains {
        let n = chain[0].node_count();
        let rows = match sparsity_study(chain, || build_objectives(objective, n).map_err(to_core), cfg.alpha, cfg.iters, spec.strict) {
            Ok(rows) => rows,
            Err(Error::Divergence { iteration }) => {
                eprintln!("chain {label}: a run diverged at iteration {iteration}");
                return Ok(Status::Diverged);
            }
            Err(e) => return Err(e.into()),
        };
        sums.resize(rows.len(), (0, 0.0));
        for r in &rows {
            out.write_record([
                label.clone(),
                r.graph.to_string(),
                r.edges.to_string(),
                num(r.slope),
                num(r.r_squared),
                num(r.final_residual),
            ])?;
            sums[r.graph] = (r.edges, sums[r.graph].1 + r.slope / chains.len() as f64);
        }
    }
    for (i, (edges, slope)) in sums.iter().enumerate() {
        out.write_record(["mean".to_string(), i.to_string(), edges.to_string(), num(*slope), String::new(), String::new()])?;
        println!("graph {i} edges {edges} mean slope {slope:.6}");
    }
    write_file(&cfg.out.join("sparsity.csv"), &out.into_inner()?)?;
    Ok(Status::Completed)
}

fn reseeded(spec: &ObjectiveSpec, offset: u64) -> ObjectiveSpec {
    let mut spec = spec.clone();
    match &mut spec {
        ObjectiveSpec::Logistic { seed, data: None, .. } | ObjectiveSpec::Quadratic { seed, .. } => {
            *seed += offset;
        }
        ObjectiveSpec::Logistic { .. } => {}
    }
    spec
}

fn to_core(e: anyhow::Error) -> Error {
    match e.downcast::<Error>() {
        Ok(core) => core,
        Err(other) => Error::InvalidParameter(format!("{other:#}")),
    }
}

pub fn cmd_analyze(
    src: &GraphSource,
    l: f64,
    s: f64,
    n: Option<usize>,
    alphas: &[f64],
    slack: Option<f64>,
) -> Result<Status> {
    let g = load_graph(src)?;
    if let Some(n) = n {
        ensure!(n == g.node_count(), "--n {n} does not match the graph's {} nodes", g.node_count());
    }
    let an = NetworkAnalysis::from_constants(&uniform_weights(&g)?, l, s, slack)?;
    an.profile.validate()?;
    let bound = alpha_upper_bound(&an.profile);
    let mut out = csv::Writer::from_writer(Vec::new());
    if alphas.is_empty() {
        let p = &an.profile;
        out.write_record(["key", "value"])?;
        for (k, v) in [
            ("sigma", p.sigma),
            ("tau", p.tau),
            ("eps", p.eps),
            ("l", p.l),
            ("s", p.s),
            ("n", p.n as f64),
            ("y", p.y),
            ("y_minus", p.y_minus),
            ("c", p.c),
            ("d", p.d),
            ("alpha_root", bound.root),
            ("alpha_cap", bound.cap),
            ("alpha_bar", bound.value),
        ] {
            out.write_record([k.to_string(), num(v)])?;
        }
    } else {
        out.write_record(["alpha", "rho_g", "alpha_bar"])?;
        for &a in alphas {
            out.write_record([num(a), num(rho_g(&an.profile, a)), num(bound.value)])?;
        }
    }
    emit(None, &out.into_inner()?)?;
    Ok(Status::Completed)
}
