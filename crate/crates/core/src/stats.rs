//! Least-squares fits of log-decay curves.

/// `log(value) ≈ intercept + slope * k` over the points used.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogLinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub points: usize,
}

impl LogLinearFit {
    /// Per-iteration contraction factor `exp(slope)`.
    pub fn rate(&self) -> f64 {
        self.slope.exp()
    }
}

/// Fits `ln(values[k])` against `k` using only entries inside `[lo, hi]`.
/// Returns `None` with fewer than two usable points.
pub fn fit_log_linear(values: &[f64], lo: f64, hi: f64) -> Option<LogLinearFit> {
    let pts: Vec<(f64, f64)> = values
        .iter()
        .enumerate()
        .filter(|(_, v)| v.is_finite() && **v > 0.0 && **v >= lo && **v <= hi)
        .map(|(k, v)| (k as f64, v.ln()))
        .collect();
    fit_line(&pts)
}

/// Ordinary least squares on `(x, y)` pairs.
pub fn fit_line(pts: &[(f64, f64)]) -> Option<LogLinearFit> {
    let m = pts.len();
    if m < 2 {
        return None;
    }
    let mf = m as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / mf;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / mf;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Some(LogLinearFit {
        slope,
        intercept,
        r_squared,
        points: m,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_geometric_sequence() {
        let v: Vec<f64> = (0..50).map(|k| 3.0 * 0.8f64.powi(k)).collect();
        let fit = fit_log_linear(&v, 0.0, f64::INFINITY).unwrap();
        assert!((fit.rate() - 0.8).abs() < 1e-12);
        assert!((fit.intercept - 3f64.ln()).abs() < 1e-10);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn window_filters_points() {
        let v: Vec<f64> = (0..50).map(|k| 0.5f64.powi(k)).collect();
        let fit = fit_log_linear(&v, 1e-6, 1e-1).unwrap();
        // 2^-4 .. 2^-19
        assert_eq!(fit.points, 16);
        assert!(fit_log_linear(&v, 2.0, 3.0).is_none());
    }
}
