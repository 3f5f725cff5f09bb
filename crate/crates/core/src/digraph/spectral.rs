use nalgebra::{DMatrix, DVector, Schur};
use num_complex::Complex64;

use super::weights::WeightMatrix;
use crate::error::{Error, Result};

const POWER_ITERS: usize = 100_000;
const POWER_TOL: f64 = 1e-15;
const DENSE_FALLBACK_MAX_N: usize = 200;

/// Perron vector of a column-stochastic matrix and the limit `A^k -> pi 1^T`.
#[derive(Debug, Clone, PartialEq)]
pub struct PerronLimit {
    /// Strictly positive, sums to 1, `A pi = pi`.
    pub pi: DVector<f64>,
    /// `pi 1^T`.
    pub a_inf: DMatrix<f64>,
}

impl PerronLimit {
    /// Diagonal of `Y_inf`: the limit of the push-sum weights started from all ones.
    pub fn y_limit(&self) -> DVector<f64> {
        &self.pi * self.pi.len() as f64
    }
}

/// Power iteration from the uniform vector, falling back to a dense
/// null-space solve of `A - I` when it stalls.
pub fn perron_limit(w: &WeightMatrix) -> Result<PerronLimit> {
    perron_limit_with_cap(w, POWER_ITERS)
}

pub fn perron_limit_with_cap(w: &WeightMatrix, max_iters: usize) -> Result<PerronLimit> {
    let a = w.matrix();
    let n = w.size();
    let pi = match power_iteration(a, max_iters) {
        Some(pi) => pi,
        None if n <= DENSE_FALLBACK_MAX_N => dense_null_vector(a).ok_or(Error::NoConvergence {
            what: "Perron eigensolver",
            iters: max_iters,
        })?,
        None => {
            return Err(Error::NoConvergence {
                what: "Perron power iteration",
                iters: max_iters,
            })
        }
    };
    let a_inf = &pi * DVector::from_element(n, 1.0).transpose();
    Ok(PerronLimit { pi, a_inf })
}

fn power_iteration(a: &DMatrix<f64>, max_iters: usize) -> Option<DVector<f64>> {
    let n = a.nrows();
    let mut v = DVector::from_element(n, 1.0 / n as f64);
    for _ in 0..max_iters {
        let mut next = a * &v;
        let sum = next.sum();
        next /= sum;
        let delta = (&next - &v).amax();
        v = next;
        if delta <= POWER_TOL {
            return Some(v);
        }
    }
    None
}

fn dense_null_vector(a: &DMatrix<f64>) -> Option<DVector<f64>> {
    let n = a.nrows();
    let m = a - DMatrix::identity(n, n);
    let svd = m.svd(false, true);
    let v_t = svd.v_t?;
    let (idx, _) = svd
        .singular_values
        .iter()
        .enumerate()
        .min_by(|x, y| x.1.total_cmp(y.1))?;
    let mut pi: DVector<f64> = v_t.row(idx).transpose();
    let sum = pi.sum();
    if sum == 0.0 {
        return None;
    }
    pi /= sum;
    pi.iter().all(|v| *v > 0.0).then_some(pi)
}

/// `tau = ||A - I||_2`, `eps = ||I - A_inf||_2`.
pub fn tau_eps(w: &WeightMatrix, limit: &PerronLimit) -> (f64, f64) {
    let n = w.size();
    let id = DMatrix::<f64>::identity(n, n);
    (spectral_norm(&(w.matrix() - &id)), spectral_norm(&(id - &limit.a_inf)))
}

pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.singular_values().max()
}

fn complex_spectral_norm(m: &DMatrix<Complex64>) -> f64 {
    m.singular_values().max()
}

/// Spectral radius of a real square matrix.
pub fn spectral_radius(m: &DMatrix<f64>) -> f64 {
    m.complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

/// Vector norm `||v||_S = ||S^{-1} v||_2` and its induced matrix norm
/// `||M||_S = ||S^{-1} M S||_2`, built so that `||A - A_inf||_S` sits within a
/// chosen slack of `rho(A - A_inf)`.
#[derive(Debug, Clone)]
pub struct ContractionNorm {
    transform: DMatrix<Complex64>,
    inverse: DMatrix<Complex64>,
    /// `||A - A_inf||_S`.
    pub sigma: f64,
    /// `rho(A - A_inf)`.
    pub rho: f64,
    /// Geometric scaling ratio used; 1 when no rescaling was needed.
    pub scale: f64,
}

impl ContractionNorm {
    pub fn transform(&self) -> &DMatrix<Complex64> {
        &self.transform
    }

    pub fn inverse(&self) -> &DMatrix<Complex64> {
        &self.inverse
    }

    /// `||v||_S`.
    pub fn vector_norm(&self, v: &DVector<f64>) -> f64 {
        let vc = v.map(|x| Complex64::new(x, 0.0));
        (&self.inverse * vc).norm()
    }

    /// Norm of a stacked `n x p` block (one row per agent) under `S ⊗ I_p`:
    /// the Frobenius norm of `S^{-1} X`.
    pub fn block_norm(&self, x: &DMatrix<f64>) -> f64 {
        let xc = x.map(|v| Complex64::new(v, 0.0));
        (&self.inverse * xc).norm()
    }

    /// `||M||_S`.
    pub fn operator_norm(&self, m: &DMatrix<f64>) -> f64 {
        let mc = m.map(|v| Complex64::new(v, 0.0));
        complex_spectral_norm(&(&self.inverse * mc * &self.transform))
    }

    /// `c` with `||v||_2 <= c ||v||_S`, namely `||S||_2`.
    pub fn c(&self) -> f64 {
        complex_spectral_norm(&self.transform)
    }

    /// `d` with `||v||_S <= d ||v||_2`, namely `||S^{-1}||_2`.
    pub fn d(&self) -> f64 {
        complex_spectral_norm(&self.inverse)
    }
}

/// Builds the contraction norm for `A - A_inf`.
///
/// If the plain 2-norm is already within `slack` of the spectral radius the
/// transform is the identity. Otherwise `A - A_inf = Q T Q*` (complex Schur)
/// and `S = Q diag(1, t, t^2, ...)`; shrinking `t` damps the strictly upper
/// part of `T` until `||S^{-1}(A - A_inf)S||_2 <= rho + slack`. The largest
/// such `t` is located by a geometric scan followed by bisection, keeping the
/// condition number of `S` as small as the target allows.
pub fn contraction_norm(w: &WeightMatrix, limit: &PerronLimit, slack: f64) -> Result<ContractionNorm> {
    if slack.is_nan() || slack <= 0.0 {
        return Err(Error::InvalidParameter(format!("slack must be positive, got {slack}")));
    }
    let n = w.size();
    let m = w.matrix() - &limit.a_inf;
    let mc = m.map(|v| Complex64::new(v, 0.0));
    let schur = Schur::try_new(mc.clone(), 1e-15, 10_000).ok_or(Error::NoConvergence {
        what: "complex Schur decomposition",
        iters: 10_000,
    })?;
    let (q, t) = schur.unpack();
    let rho = (0..n).map(|i| t[(i, i)].norm()).fold(0.0, f64::max);
    if rho + slack >= 1.0 {
        return Err(Error::InvalidParameter(format!(
            "rho(A - A_inf) + slack = {} is not below 1",
            rho + slack
        )));
    }
    let target = rho + slack;

    let plain = spectral_norm(&m);
    if plain <= target {
        let id = DMatrix::<Complex64>::identity(n, n);
        return Ok(ContractionNorm {
            transform: id.clone(),
            inverse: id,
            sigma: plain,
            rho,
            scale: 1.0,
        });
    }

    let q_adj = q.adjoint();
    let build = |ratio: f64| -> Option<(DMatrix<Complex64>, DMatrix<Complex64>, f64)> {
        let mut s = q.clone();
        let mut s_inv = q_adj.clone();
        for k in 0..n {
            let f = ratio.powi(k as i32);
            if !(f.is_finite() && f > 0.0 && (1.0 / f).is_finite() && 1.0 / f <= 1e150) {
                return None;
            }
            s.column_mut(k).scale_mut(f);
            s_inv.row_mut(k).scale_mut(1.0 / f);
        }
        let sigma = complex_spectral_norm(&(&s_inv * &mc * &s));
        Some((s, s_inv, sigma))
    };

    let mut hi = 1.0;
    let mut lo = None;
    let mut ratio = 0.5_f64;
    while lo.is_none() {
        match build(ratio) {
            Some((_, _, sigma)) if sigma <= target => lo = Some(ratio),
            Some(_) => {
                hi = ratio;
                ratio *= 0.5;
            }
            None => return Err(Error::NormConstruction { slack }),
        }
    }
    let mut lo = lo.unwrap();
    for _ in 0..40 {
        let mid = 0.5 * (lo + hi);
        match build(mid) {
            Some((_, _, sigma)) if sigma <= target => lo = mid,
            _ => hi = mid,
        }
    }
    let (transform, inverse, sigma) = build(lo).ok_or(Error::NormConstruction { slack })?;
    Ok(ContractionNorm {
        transform,
        inverse,
        sigma,
        rho,
        scale: lo,
    })
}

/// Everything the analysis needs from the weight matrix.
#[derive(Debug, Clone)]
pub struct SpectralData {
    pub limit: PerronLimit,
    pub tau: f64,
    pub eps: f64,
    pub norm: ContractionNorm,
}

impl SpectralData {
    pub fn compute(w: &WeightMatrix, slack: f64) -> Result<Self> {
        let limit = perron_limit(w)?;
        let (tau, eps) = tau_eps(w, &limit);
        let norm = contraction_norm(w, &limit, slack)?;
        Ok(Self { limit, tau, eps, norm })
    }

    /// Slack of `min(0.05, (1 - rho)/2)`, keeping `sigma` strictly below 1.
    pub fn with_default_slack(w: &WeightMatrix) -> Result<Self> {
        let limit = perron_limit(w)?;
        let rho = spectral_radius(&(w.matrix() - &limit.a_inf));
        let slack = (0.5 * (1.0 - rho)).min(0.05);
        Self::compute(w, slack)
    }

    pub fn sigma(&self) -> f64 {
        self.norm.sigma
    }

    pub fn pi(&self) -> &DVector<f64> {
        &self.limit.pi
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::digraph::{uniform_weights, Digraph};
    use approx::assert_abs_diff_eq;

    fn three_node() -> WeightMatrix {
        // columns (.5,.5,0), (0,.5,.5), (.5,0,.5)
        WeightMatrix::from_matrix(DMatrix::from_column_slice(
            3,
            3,
            &[0.5, 0.5, 0.0, 0.0, 0.5, 0.5, 0.5, 0.0, 0.5],
        ))
        .unwrap()
    }

    #[test]
    fn ring_has_uniform_perron_vector() {
        let w = uniform_weights(&Digraph::cycle(7).unwrap()).unwrap();
        let lim = perron_limit(&w).unwrap();
        for v in lim.pi.iter() {
            assert_abs_diff_eq!(*v, 1.0 / 7.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn trivial_matrix() {
        let w = WeightMatrix::from_matrix(DMatrix::from_element(1, 1, 1.0)).unwrap();
        let lim = perron_limit(&w).unwrap();
        assert_eq!(lim.pi.as_slice(), &[1.0]);
        let (tau, eps) = tau_eps(&w, &lim);
        assert_eq!((tau, eps), (0.0, 0.0));
    }

    #[test]
    fn perron_matches_matrix_power() {
        let w = three_node();
        let lim = perron_limit(&w).unwrap();
        let mut p = DMatrix::<f64>::identity(3, 3);
        for _ in 0..200 {
            p = w.matrix() * p;
        }
        // every column of A^200 approaches pi
        for j in 0..3 {
            for i in 0..3 {
                assert_abs_diff_eq!(p[(i, j)], lim.pi[i], epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn dense_fallback_agrees_with_power_iteration() {
        let w = uniform_weights(&Digraph::fig1()).unwrap();
        let power = perron_limit(&w).unwrap();
        let dense = perron_limit_with_cap(&w, 0).unwrap();
        assert_abs_diff_eq!(power.pi, dense.pi, epsilon = 1e-12);
    }

    #[test]
    fn perron_invariants_on_fig1() {
        let w = uniform_weights(&Digraph::fig1()).unwrap();
        let lim = perron_limit(&w).unwrap();
        let a = w.matrix();
        assert!((a * &lim.pi - &lim.pi).amax() <= 1e-10);
        assert_abs_diff_eq!(lim.pi.sum(), 1.0, epsilon = 1e-12);
        assert!(lim.pi.iter().all(|v| *v > 0.0));
        assert!((a * &lim.a_inf - &lim.a_inf).amax() <= 1e-10);
        assert!((&lim.a_inf * &lim.a_inf - &lim.a_inf).amax() <= 1e-10);
    }

    #[test]
    fn symmetric_case_uses_identity() {
        // complete graph with self loops: symmetric and doubly stochastic
        let w = uniform_weights(&Digraph::new(3, [(0, 1), (1, 0), (1, 2), (2, 1)]).unwrap()).unwrap();
        let lim = perron_limit(&w).unwrap();
        let norm = contraction_norm(&w, &lim, 0.01).unwrap();
        assert_eq!(norm.scale, 1.0);
        assert_abs_diff_eq!(norm.c(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(norm.d(), 1.0, epsilon = 1e-12);
        let m = w.matrix() - &lim.a_inf;
        assert_abs_diff_eq!(norm.sigma, spectral_norm(&m), epsilon = 1e-12);
        assert_abs_diff_eq!(norm.sigma, spectral_radius(&m), epsilon = 1e-10);
    }

    #[test]
    fn nonsymmetric_norm_hits_target() {
        let w = uniform_weights(&Digraph::fig1()).unwrap();
        let lim = perron_limit(&w).unwrap();
        let norm = contraction_norm(&w, &lim, 0.01).unwrap();
        let m = w.matrix() - &lim.a_inf;
        assert!(norm.sigma <= spectral_radius(&m) + 0.01 + 1e-12);
        assert!(norm.sigma < 1.0);
        assert_abs_diff_eq!(norm.operator_norm(&m), norm.sigma, epsilon = 1e-12);
        assert_abs_diff_eq!(norm.rho, spectral_radius(&m), epsilon = 1e-9);
        // ||v||_2 <= c ||v||_S and ||v||_S <= d ||v||_2
        let v = DVector::from_fn(10, |i, _| (i as f64).sin() + 0.3);
        assert!(v.norm() <= norm.c() * norm.vector_norm(&v) * (1.0 + 1e-12));
        assert!(norm.vector_norm(&v) <= norm.d() * v.norm() * (1.0 + 1e-12));
    }

    #[test]
    fn rejects_bad_slack() {
        let w = uniform_weights(&Digraph::fig1()).unwrap();
        let lim = perron_limit(&w).unwrap();
        assert!(contraction_norm(&w, &lim, 0.0).is_err());
        assert!(contraction_norm(&w, &lim, 5.0).is_err());
    }
}
