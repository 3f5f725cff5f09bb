//! Convergence machinery for ADD-OPT: the scalar constants of a
//! graph/objective pair, the 3x3 comparison matrices `G_alpha` and `H_k`,
//! the spectral radius `rho(G_alpha)`, the closed-form step-size bound, and a
//! trajectory-level check of `t_k <= G t_{k-1} + H_{k-1} s_{k-1}`.

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};

use crate::algorithms::{agent_mean, Snapshot};
use crate::digraph::{ContractionNorm, PerronLimit, SpectralData, WeightMatrix};
use crate::error::{Error, Result};
use crate::objectives::{network_constants, Objective};
use crate::stats::fit_log_linear;

/// Scalar constants entering `G_alpha` and `H_k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceProfile {
    /// `||A - A_inf||` under the contraction norm.
    pub sigma: f64,
    /// `||A - I||_2`.
    pub tau: f64,
    /// `||I - A_inf||_2`.
    pub eps: f64,
    /// Per-agent gradient Lipschitz constant.
    pub l: f64,
    /// Strong-convexity constant entering `eta`.
    pub s: f64,
    pub n: usize,
    /// `sup_k ||Y_k||_2`.
    pub y: f64,
    /// `sup_k ||Y_k^{-1}||_2`.
    pub y_minus: f64,
    /// `||v||_2 <= c ||v||`.
    pub c: f64,
    /// `||v|| <= d ||v||_2`.
    pub d: f64,
}

impl ConvergenceProfile {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("tau", self.tau),
            ("eps", self.eps),
            ("l", self.l),
            ("s", self.s),
            ("y", self.y),
            ("y_minus", self.y_minus),
            ("c", self.c),
            ("d", self.d),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.sigma >= 0.0 && self.sigma < 1.0) {
            return Err(Error::InvalidParameter(format!("sigma must lie in [0, 1), got {}", self.sigma)));
        }
        if self.s > self.l {
            return Err(Error::InvalidParameter("s must not exceed l".into()));
        }
        if self.n == 0 {
            return Err(Error::InvalidParameter("n must be positive".into()));
        }
        Ok(())
    }

    /// `c d eps l y_-`, the factor shared by most entries of `G`.
    fn coupling(&self) -> f64 {
        self.c * self.d * self.eps * self.l * self.y_minus
    }

    fn ns(&self) -> f64 {
        self.n as f64 * self.s
    }
}

/// `eta = max(|1 - n alpha l|, |1 - n alpha s|)`.
pub fn eta(alpha: f64, n: usize, l: f64, s: f64) -> f64 {
    let n = n as f64;
    (1.0 - n * alpha * l).abs().max((1.0 - n * alpha * s).abs())
}

/// `G_alpha`, entry by entry:
///
/// ```text
/// [ sigma                          0                  alpha                 ]
/// [ alpha c l y_-                  eta                0                     ]
/// [ c d eps l y_- (tau + a l y y_-) alpha d eps l^2 y y_-  sigma + a c d eps l y_- ]
/// ```
pub fn build_g(p: &ConvergenceProfile, alpha: f64) -> Matrix3<f64> {
    let k = p.coupling();
    Matrix3::new(
        p.sigma,
        0.0,
        alpha,
        alpha * p.c * p.l * p.y_minus,
        eta(alpha, p.n, p.l, p.s),
        0.0,
        k * (p.tau + alpha * p.l * p.y * p.y_minus),
        alpha * p.d * p.eps * p.l * p.l * p.y * p.y_minus,
        p.sigma + alpha * k,
    )
}

/// Geometric envelope `||Y_k - Y_inf||_2 <= T gamma1^k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct YEnvelope {
    pub gamma1: f64,
    pub t_const: f64,
}

impl YEnvelope {
    pub fn bound(&self, k: usize) -> f64 {
        self.t_const * self.gamma1.powi(k as i32)
    }
}

/// `H_k`: only the first column is nonzero,
/// `[0, alpha l y_- T g^{k-1}, (alpha l y + 2) d eps l y_-^2 T g^{k-1}]`.
pub fn build_h(p: &ConvergenceProfile, alpha: f64, env: &YEnvelope, k: usize) -> Matrix3<f64> {
    let decay = env.t_const * env.gamma1.powi(k as i32 - 1);
    let mut h = Matrix3::zeros();
    h[(1, 0)] = alpha * p.l * p.y_minus * decay;
    h[(2, 0)] = (alpha * p.l * p.y + 2.0) * p.d * p.eps * p.l * p.y_minus.powi(2) * decay;
    h
}

/// Largest eigenvalue modulus of a 3x3 matrix.
pub fn spectral_radius3(m: &Matrix3<f64>) -> f64 {
    m.complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

pub fn rho_g(p: &ConvergenceProfile, alpha: f64) -> f64 {
    spectral_radius3(&build_g(p, alpha))
}

/// `det(q I - G_alpha)` in the expanded form valid while `eta = 1 - n alpha s`:
///
/// `((q-σ)^2 - αK(q-σ))(q-1+nαs) - α^3 c d ε l^3 y y_-^2 - α(q-1+nαs)(Kτ + α K l y y_-)`
/// with `K = c d ε l y_-`.
pub fn characteristic(p: &ConvergenceProfile, alpha: f64, q: f64) -> f64 {
    let k = p.coupling();
    let qs = q - p.sigma;
    let qe = q - 1.0 + alpha * p.ns();
    (qs * qs - alpha * k * qs) * qe
        - alpha.powi(3) * p.c * p.d * p.eps * p.l.powi(3) * p.y * p.y_minus.powi(2)
        - alpha * qe * (k * p.tau + alpha * k * p.l * p.y * p.y_minus)
}

/// The step-size bound and the two quantities it is the minimum of.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlphaBound {
    /// Positive root of `det(I - G_alpha) = 0`.
    pub root: f64,
    /// `1/(n l)`.
    pub cap: f64,
    /// `min(root, cap)`.
    pub value: f64,
}

impl AlphaBound {
    pub fn cap_active(&self) -> bool {
        self.cap < self.root
    }
}

pub fn alpha_upper_bound(p: &ConvergenceProfile) -> AlphaBound {
    let ns = p.ns();
    let one_minus_sigma = 1.0 - p.sigma;
    let delta = ns * p.coupling() * (one_minus_sigma + p.tau);
    let quad = p.c * p.d * p.eps * p.l * p.l * p.y * p.y_minus * p.y_minus * (p.l + ns);
    let disc = delta * delta + 4.0 * ns * one_minus_sigma * one_minus_sigma * quad;
    // (sqrt(disc) - delta) / (2 quad), rewritten to avoid cancellation
    let root = 2.0 * ns * one_minus_sigma * one_minus_sigma / (disc.sqrt() + delta);
    let cap = 1.0 / (p.n as f64 * p.l);
    AlphaBound {
        root,
        cap,
        value: root.min(cap),
    }
}

/// Grid point minimizing `rho(G_alpha)`; ties go to the smaller step.
pub fn optimal_alpha(p: &ConvergenceProfile, grid: &[f64]) -> Result<(f64, f64)> {
    let mut best: Option<(f64, f64)> = None;
    for &alpha in grid {
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(Error::InvalidParameter(format!("grid step {alpha} is not positive")));
        }
        let rho = rho_g(p, alpha);
        best = match best {
            Some((a, r)) if r < rho || (r == rho && a <= alpha) => Some((a, r)),
            _ => Some((alpha, rho)),
        };
    }
    best.ok_or(Error::EmptyGrid)
}

/// Running suprema of `||Y_k||_2` and `||Y_k^{-1}||_2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PushSumBounds {
    pub y: f64,
    pub y_minus: f64,
    /// Rounds taken until `y_k` was within `1e-12` of its limit.
    pub settled_after: usize,
}

const PUSH_SUM_CAP: usize = 1_000_000;

/// Iterates `y_{k+1} = A y_k` from ones until it is within `1e-12` of
/// `n pi`, tracking the maxima of `max_i y_i` and `max_i 1/y_i`, then folds
/// in the limit values.
pub fn push_sum_bounds(w: &WeightMatrix, limit: &PerronLimit) -> Result<PushSumBounds> {
    let y_inf = limit.y_limit();
    let mut y = DVector::from_element(w.size(), 1.0);
    let mut sup = y_inf.max().max(1.0);
    let mut sup_inv = (1.0 / y_inf.min()).max(1.0);
    for k in 0..=PUSH_SUM_CAP {
        sup = sup.max(y.max());
        sup_inv = sup_inv.max(1.0 / y.min());
        if (&y - &y_inf).amax() < 1e-12 {
            return Ok(PushSumBounds {
                y: sup,
                y_minus: sup_inv,
                settled_after: k,
            });
        }
        y = w.matrix() * y;
    }
    Err(Error::NoConvergence {
        what: "push-sum weights",
        iters: PUSH_SUM_CAP,
    })
}

/// `||Y_k - Y_inf||_2 = max_i |y_k,i - n pi_i|` for `k = 0..=horizon`.
pub fn y_deviation(w: &WeightMatrix, limit: &PerronLimit, horizon: usize) -> Vec<f64> {
    let y_inf = limit.y_limit();
    let mut y = DVector::from_element(w.size(), 1.0);
    let mut out = Vec::with_capacity(horizon + 1);
    for _ in 0..=horizon {
        out.push((&y - &y_inf).amax());
        y = w.matrix() * y;
    }
    out
}

/// Deviations at or below this are treated as roundoff.
pub const Y_FLOOR: f64 = 1e-13;

/// Least-squares fit of `ln ||Y_k - Y_inf||` over the samples above
/// [`Y_FLOOR`], then `T` inflated so `T gamma1^k` dominates every such sample.
/// A sequence with nothing above the floor gets `T = 0`.
pub fn fit_y_envelope(deviation: &[f64]) -> YEnvelope {
    let gamma1 = fit_log_linear(deviation, Y_FLOOR, f64::INFINITY)
        .map_or(0.5, |f| f.rate().clamp(1e-6, 1.0 - 1e-12));
    let t_const = deviation
        .iter()
        .enumerate()
        .filter(|(_, e)| **e > Y_FLOOR)
        .map(|(k, e)| e / gamma1.powi(k as i32))
        .fold(0.0, f64::max);
    YEnvelope { gamma1, t_const }
}

/// Spectral data plus the scalar profile of one weighted network and objective set.
#[derive(Debug, Clone)]
pub struct NetworkAnalysis {
    pub spectral: SpectralData,
    pub push_sum: PushSumBounds,
    pub profile: ConvergenceProfile,
}

impl NetworkAnalysis {
    /// Builds the profile from `A` and explicit `l`, `s`.
    pub fn from_constants(w: &WeightMatrix, l: f64, s: f64, slack: Option<f64>) -> Result<Self> {
        let spectral = match slack {
            Some(slack) => SpectralData::compute(w, slack)?,
            None => SpectralData::with_default_slack(w)?,
        };
        let push_sum = push_sum_bounds(w, &spectral.limit)?;
        let profile = ConvergenceProfile {
            sigma: spectral.sigma(),
            tau: spectral.tau,
            eps: spectral.eps,
            l,
            s,
            n: w.size(),
            y: push_sum.y,
            y_minus: push_sum.y_minus,
            c: spectral.norm.c(),
            d: spectral.norm.d(),
        };
        Ok(Self {
            spectral,
            push_sum,
            profile,
        })
    }

    /// Uses `l = max_i l_i` and `s = min_i s_i / n`. The averaged iterate
    /// moves by `alpha/n` times the gradient of the sum, so `eta` written with
    /// `n alpha s` only bounds that step when `s` carries the `1/n`.
    pub fn new(w: &WeightMatrix, objs: &[Box<dyn Objective>], slack: Option<f64>) -> Result<Self> {
        let (l, s) = network_constants(objs);
        Self::from_constants(w, l, s / objs.len() as f64, slack)
    }

    pub fn norm(&self) -> &ContractionNorm {
        &self.spectral.norm
    }

    pub fn y_limit(&self) -> DVector<f64> {
        self.spectral.limit.y_limit()
    }

    /// `t_k = [||x_k - Y_inf x̄_k||, ||x̄_k - z*||_2, ||w_k - Y_inf g_k||]`.
    /// Requires a snapshot that carries trackers and gradients.
    pub fn t_vector(&self, state: &Snapshot, z_star: &DVector<f64>) -> Result<Vector3<f64>> {
        t_vector(state, self.norm(), &self.y_limit(), z_star)
    }

    /// Checks the linear relation along a retained ADD-OPT trajectory. The
    /// envelope is fitted to `||Y_k - Y_inf||` over the trajectory length.
    pub fn verify_key_relation(
        &self,
        states: &[Snapshot],
        alpha: f64,
        z_star: &DVector<f64>,
    ) -> Result<KeyRelationReport> {
        let horizon = states.len().max(2);
        let env = fit_y_envelope(&y_deviation_from_states(states, &self.y_limit(), horizon));
        verify_key_relation(states, &self.profile, self.norm(), &self.y_limit(), z_star, alpha, &env)
    }
}

fn y_deviation_from_states(states: &[Snapshot], y_inf: &DVector<f64>, horizon: usize) -> Vec<f64> {
    states
        .iter()
        .take(horizon)
        .map(|s| (&s.y - y_inf).amax())
        .collect()
}

pub fn t_vector(
    state: &Snapshot,
    norm: &ContractionNorm,
    y_limit: &DVector<f64>,
    z_star: &DVector<f64>,
) -> Result<Vector3<f64>> {
    let (w, grad) = match (&state.w, &state.grad) {
        (Some(w), Some(g)) => (w, g),
        _ => {
            return Err(Error::InvalidParameter(
                "t_k needs gradient trackers; only ADD-OPT snapshots carry them".into(),
            ))
        }
    };
    let n = state.x.nrows();
    let x_mean = agent_mean(&state.x);
    let consensus: DMatrix<f64> = &state.x - y_limit * x_mean.transpose();
    let tracking: DMatrix<f64> = w - y_limit * agent_mean(grad).transpose();
    Ok(Vector3::new(
        norm.block_norm(&consensus),
        (x_mean - z_star).norm() * (n as f64).sqrt(),
        norm.block_norm(&tracking),
    ))
}

/// Outcome of checking `t_k <= G t_{k-1} + H s_{k-1}` componentwise.
#[derive(Debug, Clone, PartialEq)]
pub struct KeyRelationReport {
    pub steps_checked: usize,
    pub violations: usize,
    /// Violations per component of `t_k`.
    pub violations_by_component: [usize; 3],
    /// Smallest `(rhs - lhs) / max(rhs, lhs)` over checks whose left side is
    /// above the roundoff allowance; negative means a violation.
    pub worst_margin: f64,
    pub worst_step: usize,
    pub envelope: YEnvelope,
}

/// Relative slack allowed for roundoff before a comparison counts as violated.
pub const KEY_RELATION_RTOL: f64 = 1e-12;

/// Absolute roundoff allowance, relative to the size of the iterates
/// (`d (||x_k||_2 + ||w_k||_2)`). Once every component has decayed to the
/// roundoff floor the inequality carries no information.
pub const KEY_RELATION_ATOL: f64 = 1e-12;

/// Checks the relation at every `k >= 1` of a retained trajectory. The
/// decaying term uses `T gamma1^{k-1} ||x_{k-1}||_2`, the coefficient the
/// per-step bounds produce for `t_k`.
pub fn verify_key_relation(
    states: &[Snapshot],
    profile: &ConvergenceProfile,
    norm: &ContractionNorm,
    y_limit: &DVector<f64>,
    z_star: &DVector<f64>,
    alpha: f64,
    env: &YEnvelope,
) -> Result<KeyRelationReport> {
    let g = build_g(profile, alpha);
    let mut report = KeyRelationReport {
        steps_checked: 0,
        violations: 0,
        violations_by_component: [0; 3],
        worst_margin: f64::INFINITY,
        worst_step: 0,
        envelope: *env,
    };
    let mut prev = match states.first() {
        Some(s) => t_vector(s, norm, y_limit, z_star)?,
        None => return Ok(report),
    };
    for k in 1..states.len() {
        let cur = t_vector(&states[k], norm, y_limit, z_star)?;
        let s_prev = Vector3::new(states[k - 1].x.norm(), 0.0, 0.0);
        let rhs = g * prev + build_h(profile, alpha, env, k) * s_prev;
        let w_norm = states[k].w.as_ref().map_or(0.0, |w| w.norm());
        let atol = KEY_RELATION_ATOL * norm.d() * (states[k].x.norm() + w_norm);
        for i in 0..3 {
            if cur[i] <= atol {
                continue;
            }
            let scale = rhs[i].abs().max(cur[i]);
            let margin = (rhs[i] - cur[i]) / scale;
            if margin < report.worst_margin {
                report.worst_margin = margin;
                report.worst_step = k;
            }
            if margin < -KEY_RELATION_RTOL {
                report.violations += 1;
                report.violations_by_component[i] += 1;
            }
        }
        report.steps_checked += 1;
        prev = cur;
    }
    Ok(report)
}
