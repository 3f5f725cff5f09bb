//! The comparison, step-size and sparsity studies as pure functions over a
//! shared problem instance. Independent runs execute on the rayon pool.

use rayon::prelude::*;

use crate::algorithms::{run, Algorithm, Problem, RunConfig, StepSize, Trace};
use crate::analysis::{rho_g, ConvergenceProfile};
use crate::digraph::{uniform_weights, Digraph};
use crate::error::{Error, Result};
use crate::objectives::Objectives;
use crate::stats::LogLinearFit;

/// Residual band used when fitting a linear rate.
pub const FIT_WINDOW: (f64, f64) = (1e-12, 1e-1);

/// Summary of one run; `fit` is `None` when too few residuals fall in
/// [`FIT_WINDOW`] or the run diverged.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub algorithm: Algorithm,
    pub step: StepSize,
    pub iterations: usize,
    pub final_residual: f64,
    pub fit: Option<LogLinearFit>,
    /// Round at which the divergence guard tripped.
    pub diverged_at: Option<usize>,
}

impl RunSummary {
    pub fn diverged(&self) -> bool {
        self.diverged_at.is_some()
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub summary: RunSummary,
    /// Absent when the run diverged.
    pub trace: Option<Trace>,
}

/// Runs one configuration, turning a tripped divergence guard into a
/// summary rather than an error.
pub fn run_summarized(p: &Problem, cfg: &RunConfig) -> Result<RunOutcome> {
    match run(p, cfg) {
        Ok(trace) => Ok(RunOutcome {
            summary: RunSummary {
                algorithm: cfg.algorithm,
                step: cfg.step,
                iterations: trace.iterations(),
                final_residual: trace.final_residual(),
                fit: trace.fit_rate(FIT_WINDOW.0, FIT_WINDOW.1),
                diverged_at: None,
            },
            trace: Some(trace),
        }),
        Err(Error::Divergence { iteration }) => Ok(RunOutcome {
            summary: RunSummary {
                algorithm: cfg.algorithm,
                step: cfg.step,
                iterations: iteration,
                final_residual: f64::INFINITY,
                fit: None,
                diverged_at: Some(iteration),
            },
            trace: None,
        }),
        Err(e) => Err(e),
    }
}

/// Runs every configuration on the same instance; output order follows `runs`.
pub fn compare(p: &Problem, runs: &[RunConfig]) -> Result<Vec<RunOutcome>> {
    runs.par_iter().map(|cfg| run_summarized(p, cfg)).collect()
}

/// One row of the step-size study.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRow {
    pub alpha: f64,
    pub rho_g: f64,
    /// Residual after the study horizon; infinite when the guard tripped.
    pub residual: f64,
    /// Residual ended above its starting value, or the guard tripped.
    pub diverged: bool,
}

impl StepRow {
    pub fn converged(&self) -> bool {
        !self.diverged
    }
}

/// ADD-OPT at each constant step for `horizon` rounds, paired with
/// `rho(G_alpha)`. Rows come back sorted by `alpha`.
pub fn stepsize_study(
    p: &Problem,
    profile: &ConvergenceProfile,
    alphas: &[f64],
    horizon: usize,
) -> Result<Vec<StepRow>> {
    if alphas.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let mut grid = alphas.to_vec();
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    grid.par_iter()
        .map(|&alpha| {
            let cfg = RunConfig::new(Algorithm::AddOpt, StepSize::Constant(alpha), horizon);
            let out = run_summarized(p, &cfg)?;
            let residual = out.summary.final_residual;
            Ok(StepRow {
                alpha,
                rho_g: rho_g(profile, alpha),
                residual,
                diverged: out.summary.diverged() || residual.is_nan() || residual > 1.0,
            })
        })
        .collect()
}

/// Index of the smallest value, ignoring NaN; ties go to the earlier entry.
pub fn argmin(values: &[f64]) -> Option<usize> {
    values
        .iter()
        .enumerate()
        .filter(|(_, v)| !v.is_nan())
        .fold(None, |best: Option<(usize, f64)>, (i, &v)| match best {
            Some((_, b)) if b <= v => best,
            _ => Some((i, v)),
        })
        .map(|(i, _)| i)
}

/// Fitted residual decay on one graph of a sparsity chain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SparsityRow {
    pub graph: usize,
    pub edges: usize,
    pub slope: f64,
    pub r_squared: f64,
    pub final_residual: f64,
}

/// Whether each graph is a subgraph of the next.
pub fn is_nested(graphs: &[Digraph]) -> bool {
    graphs.windows(2).all(|w| w[0].is_subgraph_of(&w[1]))
}

/// ADD-OPT with constant step `alpha` on each graph, fitting the residual
/// decay over [`FIT_WINDOW`]. `make_objectives` is called once per graph so
/// every run sees an identical instance. With `strict`, a chain that is not
/// nested is rejected.
pub fn sparsity_study<F>(
    graphs: &[Digraph],
    make_objectives: F,
    alpha: f64,
    iters: usize,
    strict: bool,
) -> Result<Vec<SparsityRow>>
where
    F: Fn() -> Result<Objectives> + Sync,
{
    if graphs.len() < 2 {
        return Err(Error::InvalidParameter("sparsity study needs at least two graphs".into()));
    }
    if strict && !is_nested(graphs) {
        return Err(Error::InvalidParameter("graphs do not form a nested chain".into()));
    }
    graphs
        .par_iter()
        .enumerate()
        .map(|(i, g)| {
            let p = Problem::new(uniform_weights(g)?, make_objectives()?)?;
            let cfg = RunConfig::new(Algorithm::AddOpt, StepSize::Constant(alpha), iters);
            let trace = run(&p, &cfg)?;
            let fit = trace
                .fit_rate(FIT_WINDOW.0, FIT_WINDOW.1)
                .ok_or(Error::NoConvergence {
                    what: "residual decay into the fit window",
                    iters,
                })?;
            Ok(SparsityRow {
                graph: i,
                edges: g.edge_count(),
                slope: fit.slope,
                r_squared: fit.r_squared,
                final_residual: trace.final_residual(),
            })
        })
        .collect()
}

/// Whether slopes get no slower as edges are added, up to a relative `tol`:
/// `slope[i+1] <= slope[i] + tol |slope[i]|`.
pub fn slopes_monotone(slopes: &[f64], tol: f64) -> bool {
    slopes.windows(2).all(|w| w[1] <= w[0] + tol * w[0].abs())
}
