use nalgebra::DMatrix;

use super::graph::Digraph;
use crate::error::{Error, Result};

/// Column-stochastic mixing matrix. Entry `(i, j)` is the weight agent `j`
/// attaches to what it sends to agent `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix {
    a: DMatrix<f64>,
}

impl WeightMatrix {
    /// Validates an explicit matrix: square, nonnegative, positive diagonal,
    /// every column summing to 1 within `1e-12`.
    pub fn from_matrix(a: DMatrix<f64>) -> Result<Self> {
        if !a.is_square() || a.nrows() == 0 {
            return Err(Error::InvalidParameter("weight matrix must be square and nonempty".into()));
        }
        if a.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidParameter("weights must be finite and nonnegative".into()));
        }
        if (0..a.nrows()).any(|i| a[(i, i)] <= 0.0) {
            return Err(Error::InvalidParameter("diagonal weights must be positive".into()));
        }
        for (j, col) in a.column_iter().enumerate() {
            let sum: f64 = col.iter().sum();
            if (sum - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidParameter(format!("column {j} sums to {sum}")));
            }
        }
        Ok(Self { a })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn size(&self) -> usize {
        self.a.nrows()
    }

    /// `(1-theta) A + theta I`, the relaxed matrix DEXTRA mixes its previous iterate with.
    pub fn relaxed(&self, theta: f64) -> DMatrix<f64> {
        let n = self.size();
        &self.a * (1.0 - theta) + DMatrix::identity(n, n) * theta
    }

    /// Largest deviation of a column sum from 1.
    pub fn column_sum_error(&self) -> f64 {
        self.a
            .column_iter()
            .map(|c| (c.sum() - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

/// Each agent splits its outgoing mass evenly over its out-neighborhood
/// (itself included): `a_ij = 1/|N_out(j)|` for `i` in `N_out(j)`.
pub fn uniform_weights(g: &Digraph) -> Result<WeightMatrix> {
    if !g.is_strongly_connected() {
        return Err(Error::NotStronglyConnected);
    }
    let n = g.node_count();
    let mut a = DMatrix::zeros(n, n);
    for j in 0..n {
        let share = 1.0 / g.out_degree(j) as f64;
        for i in g.out_neighbors(j) {
            a[(i, j)] = share;
        }
    }
    Ok(WeightMatrix { a })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ring_weights_are_halves() {
        let g = Digraph::cycle(3).unwrap();
        let w = uniform_weights(&g).unwrap();
        for v in w.matrix().iter().filter(|v| **v > 0.0) {
            assert_eq!(*v, 0.5);
        }
        assert_eq!(w.matrix().iter().filter(|v| **v > 0.0).count(), 6);
    }

    #[test]
    fn single_node_is_identity() {
        let w = uniform_weights(&Digraph::new(1, []).unwrap()).unwrap();
        assert_eq!(w.matrix(), &DMatrix::from_element(1, 1, 1.0));
    }

    #[test]
    fn out_degree_four_gives_quarters() {
        let g = Digraph::new(5, [(0, 1), (0, 2), (0, 3), (1, 0), (2, 0), (3, 0), (4, 0), (0, 4)])
            .unwrap();
        let w = uniform_weights(&g).unwrap();
        let col: Vec<f64> = w.matrix().column(0).iter().copied().collect();
        assert_eq!(col, vec![0.2; 5]);
        let g = Digraph::new(5, [(0, 1), (0, 2), (0, 3), (1, 0), (2, 0), (3, 0), (4, 0), (1, 4)])
            .unwrap();
        let w = uniform_weights(&g).unwrap();
        let col: Vec<f64> = w.matrix().column(0).iter().copied().collect();
        assert_eq!(col, vec![0.25, 0.25, 0.25, 0.25, 0.0]);
    }

    #[test]
    fn rejects_disconnected() {
        let g = Digraph::new(2, [(0, 1)]).unwrap();
        assert_eq!(uniform_weights(&g).unwrap_err(), Error::NotStronglyConnected);
    }

    #[test]
    fn zero_pattern_matches_graph() {
        let g = Digraph::fig1();
        let w = uniform_weights(&g).unwrap();
        for i in 0..g.node_count() {
            for j in 0..g.node_count() {
                assert_eq!(w.matrix()[(i, j)] > 0.0, g.has_edge(j, i));
            }
        }
        assert!(w.column_sum_error() <= 1e-12);
    }

    #[test]
    fn from_matrix_validates() {
        assert!(WeightMatrix::from_matrix(DMatrix::from_row_slice(2, 2, &[0.5, 0.5, 0.5, 0.5])).is_ok());
        assert!(WeightMatrix::from_matrix(DMatrix::from_row_slice(2, 2, &[0.5, 0.5, 0.4, 0.5])).is_err());
        assert!(WeightMatrix::from_matrix(DMatrix::from_row_slice(2, 2, &[0.0, 0.5, 1.0, 0.5])).is_err());
    }
}
