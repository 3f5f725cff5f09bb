//! Synchronous-round simulation of ADD-OPT, DEXTRA and gradient-push.
//!
//! Agent states are stacked row-wise: an `n x p` matrix holds one
//! `p`-vector per agent, so mixing with `A ⊗ I_p` is a left multiplication by
//! the `n x n` weight matrix.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};

use crate::digraph::{perron_limit, WeightMatrix};
use crate::error::{Error, Result};
use crate::objectives::{centralized_solve, Objective, Objectives};
use crate::stats::{fit_log_linear, LogLinearFit};

/// Iterates whose magnitude exceeds this are treated as diverged.
pub const DIVERGENCE_GUARD: f64 = 1e150;

/// `row i = grad f_i(z_i)`.
pub fn stacked_gradients(objs: &[Box<dyn Objective>], z: &DMatrix<f64>) -> DMatrix<f64> {
    let mut g = DMatrix::zeros(z.nrows(), z.ncols());
    for (i, f) in objs.iter().enumerate() {
        let zi: DVector<f64> = z.row(i).transpose();
        g.set_row(i, &f.grad(&zi).transpose());
    }
    g
}

/// `z_i = x_i / y_i`.
fn debias(x: &DMatrix<f64>, y: &DVector<f64>) -> DMatrix<f64> {
    let mut z = x.clone();
    for (mut row, yi) in z.row_iter_mut().zip(y.iter()) {
        row /= *yi;
    }
    z
}

fn check_finite(x: &DMatrix<f64>, iteration: usize) -> Result<()> {
    if x.iter().all(|v| v.is_finite() && v.abs() <= DIVERGENCE_GUARD) {
        Ok(())
    } else {
        Err(Error::Divergence { iteration })
    }
}

fn check_shapes(objs: &[Box<dyn Objective>], z0: &DMatrix<f64>) -> Result<()> {
    if objs.len() != z0.nrows() {
        return Err(Error::DimensionMismatch {
            expected: objs.len(),
            found: z0.nrows(),
        });
    }
    if let Some(f) = objs.iter().find(|f| f.dim() != z0.ncols()) {
        return Err(Error::DimensionMismatch {
            expected: z0.ncols(),
            found: f.dim(),
        });
    }
    Ok(())
}

fn check_mixing(a: &WeightMatrix, x: &DMatrix<f64>) -> Result<()> {
    if a.size() != x.nrows() {
        return Err(Error::DimensionMismatch {
            expected: x.nrows(),
            found: a.size(),
        });
    }
    Ok(())
}

/// ADD-OPT state after `k` rounds.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentSwarm {
    pub x: DMatrix<f64>,
    /// Push-sum weights, strictly positive, summing to `n`.
    pub y: DVector<f64>,
    pub z: DMatrix<f64>,
    /// Gradient trackers.
    pub w: DMatrix<f64>,
    /// `grad f_i(z_i)` at the current `z`.
    pub grad: DMatrix<f64>,
    pub k: usize,
}

/// `x_0 = z_0`, `y_0 = 1`, `w_0 = grad f(z_0)`.
pub fn addopt_init(objs: &[Box<dyn Objective>], z0: &DMatrix<f64>) -> Result<AgentSwarm> {
    check_shapes(objs, z0)?;
    let grad = stacked_gradients(objs, z0);
    Ok(AgentSwarm {
        x: z0.clone(),
        y: DVector::from_element(z0.nrows(), 1.0),
        z: z0.clone(),
        w: grad.clone(),
        grad,
        k: 0,
    })
}

/// One synchronous ADD-OPT round; every right-hand side uses pre-step values.
pub fn addopt_step(
    s: &AgentSwarm,
    a: &WeightMatrix,
    alpha: f64,
    objs: &[Box<dyn Objective>],
) -> Result<AgentSwarm> {
    check_mixing(a, &s.x)?;
    let a = a.matrix();
    let x = a * &s.x - &s.w * alpha;
    check_finite(&x, s.k + 1)?;
    let y = a * &s.y;
    let z = debias(&x, &y);
    let grad = stacked_gradients(objs, &z);
    let w = a * &s.w + &grad - &s.grad;
    check_finite(&w, s.k + 1)?;
    Ok(AgentSwarm {
        x,
        y,
        z,
        w,
        grad,
        k: s.k + 1,
    })
}

/// DEXTRA state; it needs the previous iterate and gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct DextraSwarm {
    pub x: DMatrix<f64>,
    pub x_prev: Option<DMatrix<f64>>,
    pub y: DVector<f64>,
    pub z: DMatrix<f64>,
    pub grad: DMatrix<f64>,
    pub grad_prev: Option<DMatrix<f64>>,
    pub k: usize,
}

pub fn dextra_init(objs: &[Box<dyn Objective>], z0: &DMatrix<f64>) -> Result<DextraSwarm> {
    check_shapes(objs, z0)?;
    Ok(DextraSwarm {
        x: z0.clone(),
        x_prev: None,
        y: DVector::from_element(z0.nrows(), 1.0),
        z: z0.clone(),
        grad: stacked_gradients(objs, z0),
        grad_prev: None,
        k: 0,
    })
}

/// `x_{k+1} = (I + A) x_k - Ã x_{k-1} - alpha (grad_k - grad_{k-1})` with
/// `Ã = theta I + (1 - theta) A`. The first round has no history and takes
/// `x_1 = A x_0 - alpha grad_0`.
pub fn dextra_step(
    s: &DextraSwarm,
    a: &WeightMatrix,
    theta: f64,
    alpha: f64,
    objs: &[Box<dyn Objective>],
) -> Result<DextraSwarm> {
    if !(theta > 0.0 && theta <= 0.5) {
        return Err(Error::InvalidParameter(format!("theta must lie in (0, 1/2], got {theta}")));
    }
    check_mixing(a, &s.x)?;
    let am = a.matrix();
    let x = match (&s.x_prev, &s.grad_prev) {
        (Some(x_prev), Some(grad_prev)) => {
            &s.x + am * &s.x - a.relaxed(theta) * x_prev - (&s.grad - grad_prev) * alpha
        }
        _ => am * &s.x - &s.grad * alpha,
    };
    check_finite(&x, s.k + 1)?;
    let y = am * &s.y;
    let z = debias(&x, &y);
    let grad = stacked_gradients(objs, &z);
    Ok(DextraSwarm {
        x_prev: Some(s.x.clone()),
        grad_prev: Some(s.grad.clone()),
        x,
        y,
        z,
        grad,
        k: s.k + 1,
    })
}

/// Gradient-push state.
#[derive(Debug, Clone, PartialEq)]
pub struct PushSwarm {
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
    pub z: DMatrix<f64>,
    pub k: usize,
}

pub fn gradient_push_init(objs: &[Box<dyn Objective>], z0: &DMatrix<f64>) -> Result<PushSwarm> {
    check_shapes(objs, z0)?;
    Ok(PushSwarm {
        x: z0.clone(),
        y: DVector::from_element(z0.nrows(), 1.0),
        z: z0.clone(),
        k: 0,
    })
}

/// Subgradient-push: mix `x` and `y`, de-bias, then step along the local
/// gradient at the de-biased estimate.
pub fn gradient_push_step(
    s: &PushSwarm,
    a: &WeightMatrix,
    alpha: f64,
    objs: &[Box<dyn Objective>],
) -> Result<PushSwarm> {
    check_mixing(a, &s.x)?;
    let am = a.matrix();
    let mixed = am * &s.x;
    let y = am * &s.y;
    let z = debias(&mixed, &y);
    let x = mixed - stacked_gradients(objs, &z) * alpha;
    check_finite(&x, s.k + 1)?;
    Ok(PushSwarm { x, y, z, k: s.k + 1 })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Algorithm {
    AddOpt,
    Dextra { theta: f64 },
    GradientPush,
}

impl Algorithm {
    pub const DEFAULT_THETA: f64 = 0.5;

    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::AddOpt => "addopt",
            Algorithm::Dextra { .. } => "dextra",
            Algorithm::GradientPush => "gp",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "addopt" | "add-opt" => Ok(Algorithm::AddOpt),
            "dextra" => Ok(Algorithm::Dextra {
                theta: Self::DEFAULT_THETA,
            }),
            "gp" | "gradient-push" | "gradient_push" => Ok(Algorithm::GradientPush),
            other => Err(Error::InvalidParameter(format!("unknown algorithm `{other}`"))),
        }
    }
}

/// Step-size schedule. `at(k)` is the step used in the round producing iterate `k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepSize {
    Constant(f64),
    /// `scale / sqrt(k)`.
    InvSqrt(f64),
}

impl StepSize {
    pub fn at(&self, k: usize) -> f64 {
        match *self {
            StepSize::Constant(a) => a,
            StepSize::InvSqrt(scale) => scale / (k.max(1) as f64).sqrt(),
        }
    }

    fn validate(&self) -> Result<()> {
        let v = match *self {
            StepSize::Constant(a) | StepSize::InvSqrt(a) => a,
        };
        if v.is_finite() && v >= 0.0 {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("step size must be finite and >= 0, got {v}")))
        }
    }
}

/// A weighted network together with its objectives and reference optimum.
#[derive(Debug)]
pub struct Problem {
    pub weights: WeightMatrix,
    pub objectives: Objectives,
    pub z_star: DVector<f64>,
    /// Diagonal of `Y_inf`, i.e. `n pi`.
    pub y_limit: DVector<f64>,
}

impl Problem {
    /// Computes the reference optimum with the centralized solver.
    pub fn new(weights: WeightMatrix, objectives: Objectives) -> Result<Self> {
        let opt = centralized_solve(&objectives)?;
        Self::with_optimum(weights, objectives, opt.z_star)
    }

    pub fn with_optimum(weights: WeightMatrix, objectives: Objectives, z_star: DVector<f64>) -> Result<Self> {
        if weights.size() != objectives.len() {
            return Err(Error::DimensionMismatch {
                expected: weights.size(),
                found: objectives.len(),
            });
        }
        if let Some(f) = objectives.iter().find(|f| f.dim() != z_star.len()) {
            return Err(Error::DimensionMismatch {
                expected: z_star.len(),
                found: f.dim(),
            });
        }
        let y_limit = perron_limit(&weights)?.y_limit();
        Ok(Self {
            weights,
            objectives,
            z_star,
            y_limit,
        })
    }

    pub fn agents(&self) -> usize {
        self.objectives.len()
    }

    pub fn dim(&self) -> usize {
        self.z_star.len()
    }

    /// `1_n ⊗ z*` as an `n x p` block.
    pub fn stacked_optimum(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.agents(), self.dim(), |_, j| self.z_star[j])
    }

    /// `Y_inf v̄` for the agent-average `mean` of some stacked quantity.
    pub fn limit_profile(&self, mean: &DVector<f64>) -> DMatrix<f64> {
        &self.y_limit * mean.transpose()
    }
}

/// Agent-average of a stacked block, as a `p`-vector.
pub fn agent_mean(x: &DMatrix<f64>) -> DVector<f64> {
    x.row_mean().transpose()
}

/// Per-iteration metrics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRecord {
    pub k: usize,
    /// `||z_k - z*|| / ||z_0 - z*||`.
    pub residual: f64,
    /// `||x_k - Y_inf x̄_k||_2`.
    pub consensus_err: f64,
    /// `||w_k - Y_inf g_k||_2`; NaN for methods without trackers.
    pub tracking_err: f64,
    /// `||x̄_k - z*||_2` with both sides stacked over agents.
    pub gap: f64,
}

/// Raw state retained for trajectory-level checks.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
    pub z: DMatrix<f64>,
    pub w: Option<DMatrix<f64>>,
    pub grad: Option<DMatrix<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub algorithm: Algorithm,
    pub records: Vec<TraceRecord>,
    pub states: Option<Vec<Snapshot>>,
}

impl Trace {
    pub fn residuals(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.residual).collect()
    }

    pub fn final_residual(&self) -> f64 {
        self.records.last().map_or(f64::NAN, |r| r.residual)
    }

    pub fn iterations(&self) -> usize {
        self.records.len().saturating_sub(1)
    }

    /// Log-linear fit of the residual restricted to `[lo, hi]`.
    pub fn fit_rate(&self, lo: f64, hi: f64) -> Option<LogLinearFit> {
        fit_log_linear(&self.residuals(), lo, hi)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub algorithm: Algorithm,
    pub step: StepSize,
    pub max_iters: usize,
    /// Stop once the residual is `<= stop_tol`; `0` disables early stopping.
    pub stop_tol: f64,
    /// Initial estimates; zeros when absent.
    pub z0: Option<DMatrix<f64>>,
    pub keep_states: bool,
}

impl RunConfig {
    pub fn new(algorithm: Algorithm, step: StepSize, max_iters: usize) -> Self {
        Self {
            algorithm,
            step,
            max_iters,
            stop_tol: 0.0,
            z0: None,
            keep_states: false,
        }
    }
}

enum EngineState {
    AddOpt(AgentSwarm),
    Dextra(DextraSwarm, f64),
    Push(PushSwarm),
}

type StateParts<'a> = (&'a DMatrix<f64>, &'a DMatrix<f64>, Option<(&'a DMatrix<f64>, &'a DMatrix<f64>)>);

impl EngineState {
    fn snapshot(&self) -> Snapshot {
        match self {
            EngineState::AddOpt(s) => Snapshot {
                x: s.x.clone(),
                y: s.y.clone(),
                z: s.z.clone(),
                w: Some(s.w.clone()),
                grad: Some(s.grad.clone()),
            },
            EngineState::Dextra(s, _) => Snapshot {
                x: s.x.clone(),
                y: s.y.clone(),
                z: s.z.clone(),
                w: None,
                grad: Some(s.grad.clone()),
            },
            EngineState::Push(s) => Snapshot {
                x: s.x.clone(),
                y: s.y.clone(),
                z: s.z.clone(),
                w: None,
                grad: None,
            },
        }
    }

    fn parts(&self) -> StateParts<'_> {
        match self {
            EngineState::AddOpt(s) => (&s.x, &s.z, Some((&s.w, &s.grad))),
            EngineState::Dextra(s, _) => (&s.x, &s.z, None),
            EngineState::Push(s) => (&s.x, &s.z, None),
        }
    }

    fn advance(&self, p: &Problem, alpha: f64) -> Result<Self> {
        let (a, objs) = (&p.weights, &p.objectives);
        Ok(match self {
            EngineState::AddOpt(s) => EngineState::AddOpt(addopt_step(s, a, alpha, objs)?),
            EngineState::Dextra(s, theta) => {
                EngineState::Dextra(dextra_step(s, a, *theta, alpha, objs)?, *theta)
            }
            EngineState::Push(s) => EngineState::Push(gradient_push_step(s, a, alpha, objs)?),
        })
    }
}

fn record(p: &Problem, state: &EngineState, k: usize, z_ref: f64, opt: &DMatrix<f64>) -> TraceRecord {
    let (x, z, tracker) = state.parts();
    let x_mean = agent_mean(x);
    let consensus_err = (x - p.limit_profile(&x_mean)).norm();
    let tracking_err = tracker.map_or(f64::NAN, |(w, grad)| {
        (w - p.limit_profile(&agent_mean(grad))).norm()
    });
    let gap = (x_mean - &p.z_star).norm() * (p.agents() as f64).sqrt();
    let dist = (z - opt).norm();
    let residual = if z_ref > 0.0 { dist / z_ref } else { dist };
    TraceRecord {
        k,
        residual,
        consensus_err,
        tracking_err,
        gap,
    }
}

/// Runs `cfg.algorithm` for up to `cfg.max_iters` rounds. The trace always
/// holds the initial record plus one per completed round. Divergence is
/// reported as [`Error::Divergence`] with the offending round.
pub fn run(p: &Problem, cfg: &RunConfig) -> Result<Trace> {
    cfg.step.validate()?;
    if cfg.stop_tol.is_nan() || cfg.stop_tol < 0.0 {
        return Err(Error::InvalidParameter("stop_tol must be >= 0".into()));
    }
    let z0 = cfg
        .z0
        .clone()
        .unwrap_or_else(|| DMatrix::zeros(p.agents(), p.dim()));
    let objs = &p.objectives;
    let mut state = match cfg.algorithm {
        Algorithm::AddOpt => EngineState::AddOpt(addopt_init(objs, &z0)?),
        Algorithm::Dextra { theta } => {
            if !(theta > 0.0 && theta <= 0.5) {
                return Err(Error::InvalidParameter(format!("theta must lie in (0, 1/2], got {theta}")));
            }
            EngineState::Dextra(dextra_init(objs, &z0)?, theta)
        }
        Algorithm::GradientPush => EngineState::Push(gradient_push_init(objs, &z0)?),
    };
    let opt = p.stacked_optimum();
    let z_ref = (&z0 - &opt).norm();
    let mut records = Vec::with_capacity(cfg.max_iters + 1);
    let mut states = cfg.keep_states.then(Vec::new);
    let mut push = |state: &EngineState, k: usize, records: &mut Vec<TraceRecord>| {
        let r = record(p, state, k, z_ref, &opt);
        records.push(r);
        if let Some(v) = states.as_mut() {
            v.push(state.snapshot());
        }
        r.residual
    };
    let mut residual = push(&state, 0, &mut records);
    for k in 1..=cfg.max_iters {
        if cfg.stop_tol > 0.0 && residual <= cfg.stop_tol {
            break;
        }
        state = state.advance(p, cfg.step.at(k))?;
        residual = push(&state, k, &mut records);
    }
    Ok(Trace {
        algorithm: cfg.algorithm,
        records,
        states,
    })
}
