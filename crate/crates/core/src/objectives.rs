//! Per-agent objectives satisfying the smoothness and strong-convexity
//! assumptions, synthetic logistic-regression data, and a centralized
//! gradient-descent solver for the ground-truth optimum.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// A local objective `f_i : R^p -> R` with `l`-Lipschitz gradient and
/// strong-convexity constant `s`.
pub trait Objective: fmt::Debug + Send + Sync {
    fn dim(&self) -> usize;
    fn eval(&self, z: &DVector<f64>) -> f64;
    fn grad(&self, z: &DVector<f64>) -> DVector<f64>;
    fn lipschitz(&self) -> f64;
    fn strong_convexity(&self) -> f64;
}

pub type Objectives = Vec<Box<dyn Objective>>;

/// `f(z) = 1/2 (z - b)^T diag(q) (z - b)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Quadratic {
    pub center: DVector<f64>,
    pub curvature: DVector<f64>,
}

impl Quadratic {
    pub fn new(center: DVector<f64>, curvature: DVector<f64>) -> Result<Self> {
        if center.len() != curvature.len() {
            return Err(Error::DimensionMismatch {
                expected: center.len(),
                found: curvature.len(),
            });
        }
        if center.is_empty() {
            return Err(Error::InvalidParameter("quadratic needs p >= 1".into()));
        }
        if curvature.iter().any(|q| !q.is_finite() || *q <= 0.0) {
            return Err(Error::InvalidParameter("curvature entries must be positive".into()));
        }
        Ok(Self { center, curvature })
    }

    /// `1/2 ||z - b||^2`.
    pub fn isotropic(center: DVector<f64>) -> Self {
        let p = center.len();
        Self::new(center, DVector::from_element(p, 1.0)).expect("unit curvature is valid")
    }
}

impl Objective for Quadratic {
    fn dim(&self) -> usize {
        self.center.len()
    }

    fn eval(&self, z: &DVector<f64>) -> f64 {
        let d = z - &self.center;
        0.5 * d.component_mul(&d).dot(&self.curvature)
    }

    fn grad(&self, z: &DVector<f64>) -> DVector<f64> {
        (z - &self.center).component_mul(&self.curvature)
    }

    fn lipschitz(&self) -> f64 {
        self.curvature.max()
    }

    fn strong_convexity(&self) -> f64 {
        self.curvature.min()
    }
}

/// Closed-form minimizer of a sum of diagonal quadratics: the
/// curvature-weighted mean of the centers.
pub fn quadratic_optimum(parts: &[Quadratic]) -> Result<DVector<f64>> {
    let first = parts.first().ok_or(Error::InvalidParameter("no objectives".into()))?;
    let p = first.dim();
    let mut num = DVector::zeros(p);
    let mut den = DVector::zeros(p);
    for q in parts {
        if q.dim() != p {
            return Err(Error::DimensionMismatch {
                expected: p,
                found: q.dim(),
            });
        }
        num += q.center.component_mul(&q.curvature);
        den += &q.curvature;
    }
    Ok(num.component_div(&den))
}

/// Training examples held by each agent, plus the ridge weight `beta`.
#[derive(Debug, Clone, PartialEq)]
pub struct LogisticData {
    /// `features[i]` is `m_i x p`, one example per row.
    pub features: Vec<DMatrix<f64>>,
    /// `labels[i][j]` is `+1.0` or `-1.0`.
    pub labels: Vec<Vec<f64>>,
    pub beta: f64,
}

impl LogisticData {
    pub fn agents(&self) -> usize {
        self.features.len()
    }

    pub fn dim(&self) -> usize {
        self.features.first().map_or(0, DMatrix::ncols)
    }

    pub fn validate(&self) -> Result<()> {
        if self.features.is_empty() {
            return Err(Error::InvalidParameter("dataset has no agents".into()));
        }
        if self.beta.is_nan() || self.beta <= 0.0 {
            return Err(Error::InvalidParameter("beta must be positive".into()));
        }
        if self.labels.len() != self.features.len() {
            return Err(Error::DimensionMismatch {
                expected: self.features.len(),
                found: self.labels.len(),
            });
        }
        let p = self.dim();
        for (c, b) in self.features.iter().zip(&self.labels) {
            if c.nrows() == 0 {
                return Err(Error::InvalidParameter("every agent needs m_i >= 1".into()));
            }
            if c.ncols() != p {
                return Err(Error::DimensionMismatch {
                    expected: p,
                    found: c.ncols(),
                });
            }
            if b.len() != c.nrows() {
                return Err(Error::DimensionMismatch {
                    expected: c.nrows(),
                    found: b.len(),
                });
            }
            if b.iter().any(|&v| v != 1.0 && v != -1.0) {
                return Err(Error::InvalidParameter("labels must be +1 or -1".into()));
            }
        }
        Ok(())
    }
}

/// Synthetic data: standard-normal features, labels from a planted
/// standard-normal hyperplane through the origin, each label flipped with
/// probability 0.1. Deterministic in `seed`.
pub fn generate_dataset(n: usize, m: usize, p: usize, beta: f64, seed: u64) -> Result<LogisticData> {
    if n == 0 || m == 0 || p == 0 {
        return Err(Error::InvalidParameter("n, m and p must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let planted = DVector::<f64>::from_fn(p, |_, _| rng.sample(StandardNormal));
    let mut features = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let c = DMatrix::<f64>::from_fn(m, p, |_, _| rng.sample(StandardNormal));
        let b = (0..m)
            .map(|j| {
                let clean = if c.row(j).transpose().dot(&planted) >= 0.0 { 1.0 } else { -1.0 };
                if rng.random::<f64>() < 0.1 {
                    -clean
                } else {
                    clean
                }
            })
            .collect();
        features.push(c);
        labels.push(b);
    }
    let data = LogisticData { features, labels, beta };
    data.validate()?;
    Ok(data)
}

/// `n` isotropic quadratics with standard-normal centres in `R^p`.
pub fn random_quadratics(n: usize, p: usize, seed: u64) -> Result<Vec<Quadratic>> {
    if n == 0 || p == 0 {
        return Err(Error::InvalidParameter("n and p must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..n)
        .map(|_| Quadratic::isotropic(DVector::from_fn(p, |_, _| rng.sample(StandardNormal))))
        .collect())
}

/// Agent `i`'s share of ridge-regularized logistic regression:
/// `beta/(2n) ||z||^2 + sum_j ln(1 + exp(-b_j c_j^T z))`.
#[derive(Debug, Clone, PartialEq)]
pub struct Logistic {
    features: DMatrix<f64>,
    labels: DVector<f64>,
    ridge: f64,
    lipschitz: f64,
}

impl Logistic {
    pub fn new(features: DMatrix<f64>, labels: Vec<f64>, beta: f64, n: usize) -> Result<Self> {
        if n == 0 || beta.is_nan() || beta <= 0.0 {
            return Err(Error::InvalidParameter("need n >= 1 and beta > 0".into()));
        }
        if labels.len() != features.nrows() {
            return Err(Error::DimensionMismatch {
                expected: features.nrows(),
                found: labels.len(),
            });
        }
        let ridge = beta / n as f64;
        // sigma' <= 1/4, so the Hessian is bounded by ridge + sum_j ||c_j||^2 / 4
        let lipschitz = ridge + 0.25 * features.row_iter().map(|r| r.norm_squared()).sum::<f64>();
        Ok(Self {
            features,
            labels: DVector::from_vec(labels),
            ridge,
            lipschitz,
        })
    }

    fn margins(&self, z: &DVector<f64>) -> DVector<f64> {
        (&self.features * z).component_mul(&self.labels)
    }
}

/// `ln(1 + e^t)` without overflow.
fn softplus(t: f64) -> f64 {
    t.max(0.0) + (-t.abs()).exp().ln_1p()
}

/// `1 / (1 + e^{-t})` without overflow.
fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

impl Objective for Logistic {
    fn dim(&self) -> usize {
        self.features.ncols()
    }

    fn eval(&self, z: &DVector<f64>) -> f64 {
        0.5 * self.ridge * z.norm_squared() + self.margins(z).iter().map(|&u| softplus(-u)).sum::<f64>()
    }

    fn grad(&self, z: &DVector<f64>) -> DVector<f64> {
        // d/dz ln(1 + e^{-u}) = -sigmoid(-u) * b c
        let weights = self
            .margins(z)
            .zip_map(&self.labels, |u, b| -b * sigmoid(-u));
        z * self.ridge + self.features.tr_mul(&weights)
    }

    fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    fn strong_convexity(&self) -> f64 {
        self.ridge
    }
}

/// One [`Logistic`] objective per agent.
pub fn logistic_objectives(data: &LogisticData) -> Result<Objectives> {
    data.validate()?;
    let n = data.agents();
    data.features
        .iter()
        .zip(&data.labels)
        .map(|(c, b)| Ok(Box::new(Logistic::new(c.clone(), b.clone(), data.beta, n)?) as Box<dyn Objective>))
        .collect()
}

pub fn quadratic_objectives(parts: &[Quadratic]) -> Objectives {
    parts
        .iter()
        .cloned()
        .map(|q| Box::new(q) as Box<dyn Objective>)
        .collect()
}

/// Network-wide constants consumed by the analysis: `l = max_i l_i`,
/// `s = min_i s_i`.
pub fn network_constants(objs: &[Box<dyn Objective>]) -> (f64, f64) {
    let l = objs.iter().map(|o| o.lipschitz()).fold(0.0, f64::max);
    let s = objs.iter().map(|o| o.strong_convexity()).fold(f64::INFINITY, f64::min);
    (l, s)
}

pub fn total_value(objs: &[Box<dyn Objective>], z: &DVector<f64>) -> f64 {
    objs.iter().map(|o| o.eval(z)).sum()
}

pub fn total_gradient(objs: &[Box<dyn Objective>], z: &DVector<f64>) -> DVector<f64> {
    let mut g = DVector::zeros(z.len());
    for o in objs {
        g += o.grad(z);
    }
    g
}

/// Result of the centralized solve.
#[derive(Debug, Clone, PartialEq)]
pub struct Optimum {
    pub z_star: DVector<f64>,
    pub f_star: f64,
    /// `||grad F(z*)||_2`.
    pub residual_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

const SOLVE_CAP: usize = 2_000_000;

/// Gradient descent on `F = sum_i f_i` with step `1/(n l)` from the origin,
/// stopping once `||grad F|| <= 1e-12 max(1, ||z||)`. When the iteration cap
/// is hit the best iterate seen is returned with `converged = false`.
pub fn centralized_solve(objs: &[Box<dyn Objective>]) -> Result<Optimum> {
    centralized_solve_from(objs, None, SOLVE_CAP)
}

pub fn centralized_solve_from(
    objs: &[Box<dyn Objective>],
    start: Option<DVector<f64>>,
    max_iters: usize,
) -> Result<Optimum> {
    let first = objs.first().ok_or(Error::InvalidParameter("no objectives".into()))?;
    let p = first.dim();
    if let Some(bad) = objs.iter().find(|o| o.dim() != p) {
        return Err(Error::DimensionMismatch {
            expected: p,
            found: bad.dim(),
        });
    }
    let (l, _) = network_constants(objs);
    let step = 1.0 / (objs.len() as f64 * l);
    let mut z = start.unwrap_or_else(|| DVector::zeros(p));
    if z.len() != p {
        return Err(Error::DimensionMismatch { expected: p, found: z.len() });
    }
    let mut best = (f64::INFINITY, z.clone());
    for it in 0..=max_iters {
        let g = total_gradient(objs, &z);
        let gn = g.norm();
        if gn < best.0 {
            best = (gn, z.clone());
        }
        if gn <= 1e-12 * z.norm().max(1.0) {
            return Ok(Optimum {
                f_star: total_value(objs, &z),
                z_star: z,
                residual_norm: gn,
                iterations: it,
                converged: true,
            });
        }
        if it < max_iters {
            z -= g * step;
        }
    }
    let (gn, z) = best;
    Ok(Optimum {
        f_star: total_value(objs, &z),
        z_star: z,
        residual_norm: gn,
        iterations: max_iters,
        converged: false,
    })
}
