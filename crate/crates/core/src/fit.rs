//! Least-squares slope fits for measured convergence orders.

/// Straight-line fit `y = intercept + slope * x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square deviation of the points from the line.
    pub residual: f64,
}

pub fn least_squares_slope(points: &[(f64, f64)]) -> LineFit {
    let n = points.len() as f64;
    if points.len() < 2 {
        return LineFit {
            slope: f64::NAN,
            intercept: f64::NAN,
            residual: f64::NAN,
        };
    }
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = (points
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    LineFit {
        slope,
        intercept,
        residual,
    }
}

/// Order of `values ~ C * scales^order`, fitted on the last `last` entries in log-log.
pub fn loglog_slope(scales: &[f64], values: &[f64], last: usize) -> LineFit {
    let pts: Vec<(f64, f64)> = scales
        .iter()
        .zip(values)
        .filter(|(s, v)| **s > 0.0 && **v > 0.0 && v.is_finite())
        .map(|(s, v)| (s.ln(), v.ln()))
        .collect();
    let start = pts.len().saturating_sub(last);
    least_squares_slope(&pts[start..])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_power_law() {
        let h = [0.4, 0.3, 0.2, 0.15, 0.1];
        let v: Vec<f64> = h.iter().map(|x: &f64| 3.0 * x.powf(1.5)).collect();
        let fit = loglog_slope(&h, &v, 4);
        assert!((fit.slope - 1.5).abs() < 1e-12);
        assert!(fit.residual < 1e-12);
    }

    #[test]
    fn too_few_points() {
        assert!(least_squares_slope(&[(1.0, 1.0)]).slope.is_nan());
    }
}
