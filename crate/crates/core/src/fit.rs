//! Ordinary least-squares lines and log-log power-law fits.

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square of the residuals `y_i - (slope x_i + intercept)`.
    pub residual_rms: f64,
}

impl LineFit {
    pub fn predict(&self, x: f64) -> f64 {
        self.slope * x + self.intercept
    }
}

/// Least-squares line through `(x_i, y_i)`. Needs two distinct abscissae.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Option<LineFit> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss: f64 = x.iter().zip(y).map(|(a, b)| (b - slope * a - intercept).powi(2)).sum();
    Some(LineFit {
        slope,
        intercept,
        residual_rms: (ss / n).sqrt(),
    })
}

/// Fit `log value` against `log(1/eps)`; non-positive values are skipped.
/// The slope is the growth exponent: `value ~ eps^(-slope)`.
pub fn growth_fit(eps: &[f64], values: &[f64]) -> Option<LineFit> {
    let (x, y): (Vec<f64>, Vec<f64>) = eps
        .iter()
        .zip(values)
        .filter(|(_, v)| **v > 0.0 && v.is_finite())
        .map(|(e, v)| ((1.0 / e).ln(), v.ln()))
        .unzip();
    linear_fit(&x, &y)
}

/// Fit `log value` against `log eps`; the slope is the decay exponent,
/// `value ~ eps^slope`.
pub fn rate_fit(eps: &[f64], values: &[f64]) -> Option<LineFit> {
    growth_fit(eps, values).map(|f| LineFit { slope: -f.slope, ..f })
}

/// Observed convergence orders `log(e_i / e_{i+1}) / log(h_i / h_{i+1})`.
pub fn observed_orders(h: &[f64], err: &[f64]) -> Vec<f64> {
    h.windows(2)
        .zip(err.windows(2))
        .map(|(h, e)| (e[0] / e[1]).ln() / (h[0] / h[1]).ln())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y = [1.0, 3.0, 5.0, 7.0];
        let f = linear_fit(&x, &y).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-14);
        assert!((f.intercept - 1.0).abs() < 1e-14);
        assert!(f.residual_rms < 1e-14);
    }

    #[test]
    fn degenerate_inputs() {
        assert!(linear_fit(&[1.0], &[1.0]).is_none());
        assert!(linear_fit(&[1.0, 1.0], &[1.0, 2.0]).is_none());
    }

    #[test]
    fn power_laws() {
        let eps: Vec<f64> = (2..10).map(|j| 2f64.powi(-j)).collect();
        let v: Vec<f64> = eps.iter().map(|e| 3.0 * e.powf(-1.5)).collect();
        assert!((growth_fit(&eps, &v).unwrap().slope - 1.5).abs() < 1e-12);
        let w: Vec<f64> = eps.iter().map(|e| e * e).collect();
        assert!((rate_fit(&eps, &w).unwrap().slope - 2.0).abs() < 1e-12);
    }

    #[test]
    fn orders() {
        let h = [0.4, 0.2, 0.1];
        let e = [0.16, 0.04, 0.01];
        for o in observed_orders(&h, &e) {
            assert!((o - 2.0).abs() < 1e-12);
        }
    }
}
