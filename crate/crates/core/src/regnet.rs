//! Nets indexed by a finite ε-grid and their empirical asymptotic classification.
//!
//! Verdicts are statements about the tested ε-range only: a fitted power law
//! on finitely many points certifies nothing about the limit ε → 0.

use std::fmt;

use crate::error::{Error, Result};
use crate::fit::{growth_fit, linear_fit};
use crate::grid::{norm_hk, norm_l2, norm_linf, GridFunction};

/// Residual threshold (natural-log units) for accepting a power law.
pub const RESIDUAL_THRESHOLD: f64 = 0.1;

/// Strictly decreasing ε values in (0, 1], at least six of them.
#[derive(Clone, Debug, PartialEq)]
pub struct EpsGrid(Vec<f64>);

impl EpsGrid {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 6 {
            return Err(Error::EpsGrid(format!("{} values, need at least 6", values.len())));
        }
        if let Some(e) = values.iter().find(|e| !(**e > 0.0 && **e <= 1.0)) {
            return Err(Error::EpsGrid(format!("value {e} not in (0, 1]")));
        }
        if let Some(i) = values.windows(2).position(|w| w[1] >= w[0]) {
            return Err(Error::EpsGrid(format!(
                "not strictly decreasing at position {}: {} then {}",
                i + 1,
                values[i],
                values[i + 1]
            )));
        }
        Ok(Self(values))
    }

    /// `eps_j = 2^{-j}` for `j = first..=last`.
    pub fn dyadic(first: i32, last: i32) -> Result<Self> {
        Self::new((first..=last).map(|j| 2f64.powi(-j)).collect())
    }

    /// The default grid `2^{-2}, .., 2^{-9}`.
    pub fn default_dyadic() -> Self {
        Self::dyadic(2, 9).expect("static grid")
    }

    /// `count` geometrically spaced values from `start` down to `end`.
    pub fn geometric(start: f64, end: f64, count: usize) -> Result<Self> {
        if count < 2 || !(end > 0.0) {
            return Err(Error::EpsGrid(format!("geometric({start}, {end}, {count})")));
        }
        let r = (end / start).powf(1.0 / (count - 1) as f64);
        Self::new((0..count).map(|k| start * r.powi(k as i32)).collect())
    }

    /// The dyadic grid shifted off the powers of two, `3 * 2^{-j-2}`.
    pub fn shifted(first: i32, last: i32) -> Result<Self> {
        Self::new((first..=last).map(|j| 3.0 * 2f64.powi(-j - 2)).collect())
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn smallest(&self) -> f64 {
        *self.0.last().expect("non-empty")
    }
}

/// A family of items, one per ε.
#[derive(Clone, Debug, PartialEq)]
pub struct EpsNet<T> {
    eps: EpsGrid,
    items: Vec<T>,
    label: String,
}

impl<T> EpsNet<T> {
    fn check_len(eps: &EpsGrid, items: &[T]) -> Result<()> {
        if items.len() != eps.len() {
            return Err(Error::InvalidArgument(format!(
                "{} items for {} eps values",
                items.len(),
                eps.len()
            )));
        }
        Ok(())
    }

    pub fn eps(&self) -> &EpsGrid {
        &self.eps
    }

    pub fn items(&self) -> &[T] {
        &self.items
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, &T)> {
        self.eps.values().iter().copied().zip(&self.items)
    }

    pub fn map<U>(&self, f: impl Fn(f64, &T) -> U) -> EpsNet<U> {
        EpsNet {
            eps: self.eps.clone(),
            items: self.iter().map(|(e, t)| f(e, t)).collect(),
            label: self.label.clone(),
        }
    }
}

impl EpsNet<f64> {
    pub fn scalars(eps: EpsGrid, items: Vec<f64>, label: impl Into<String>) -> Result<Self> {
        Self::check_len(&eps, &items)?;
        Ok(Self {
            eps,
            items,
            label: label.into(),
        })
    }
}

impl EpsNet<GridFunction> {
    /// Grid-valued net; every item must live on the same grid.
    pub fn fields(eps: EpsGrid, items: Vec<GridFunction>, label: impl Into<String>) -> Result<Self> {
        Self::check_len(&eps, &items)?;
        if items.windows(2).any(|w| w[0].grid() != w[1].grid()) {
            return Err(Error::GridMismatch);
        }
        Ok(Self {
            eps,
            items,
            label: label.into(),
        })
    }

    pub fn seminorms(&self, seminorm: Seminorm) -> Result<EpsNet<f64>> {
        let items = self
            .items
            .iter()
            .map(|u| seminorm.eval(u))
            .collect::<Result<Vec<_>>>()?;
        EpsNet::scalars(self.eps.clone(), items, format!("{}:{}", self.label, seminorm))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Seminorm {
    L2,
    Hk(usize),
    Linf,
}

impl Seminorm {
    pub fn eval(&self, u: &GridFunction) -> Result<f64> {
        match *self {
            Self::L2 => Ok(norm_l2(u)),
            Self::Hk(k) => norm_hk(u, k),
            Self::Linf => Ok(norm_linf(u)),
        }
    }
}

impl fmt::Display for Seminorm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::L2 => write!(f, "l2"),
            Self::Hk(k) => write!(f, "h{k}"),
            Self::Linf => write!(f, "linf"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    /// Growth bounded by `eps^{-N}` on the tested range.
    Moderate(i32),
    /// Decay at least like `eps^q` on the tested range.
    NegligibleUpTo(u32),
    Inconclusive,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Moderate(n) => write!(f, "moderate({n})"),
            Self::NegligibleUpTo(q) => write!(f, "negligible_up_to({q})"),
            Self::Inconclusive => write!(f, "inconclusive"),
        }
    }
}

/// Least-squares fit of `log ||u_eps||` against `log(1/eps)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AsymptoticFit {
    pub slope: f64,
    pub intercept: f64,
    pub residual_rms: f64,
    /// Number of ε values that entered the fit (zeros are excluded).
    pub points: usize,
    pub verdict: Verdict,
}

impl AsymptoticFit {
    fn inconclusive(points: usize) -> Self {
        Self {
            slope: f64::NAN,
            intercept: f64::NAN,
            residual_rms: f64::NAN,
            points,
            verdict: Verdict::Inconclusive,
        }
    }

    /// True for both moderate and negligible verdicts.
    pub fn is_moderate(&self) -> bool {
        !matches!(self.verdict, Verdict::Inconclusive)
    }
}

fn raw_fit(eps: &[f64], values: &[f64]) -> std::result::Result<(crate::fit::LineFit, usize), usize> {
    let points = values.iter().filter(|v| **v > 0.0 && v.is_finite()).count();
    if points < 4 {
        return Err(points);
    }
    growth_fit(eps, values).map(|f| (f, points)).ok_or(points)
}

/// Moderateness verdict from scalar seminorm values. The order is the
/// smallest integer `N` with `slope <= N + 0.1`.
pub fn classify_moderate_values(eps: &[f64], values: &[f64], residual_threshold: f64) -> AsymptoticFit {
    match raw_fit(eps, values) {
        Err(points) => AsymptoticFit::inconclusive(points),
        Ok((f, points)) => AsymptoticFit {
            slope: f.slope,
            intercept: f.intercept,
            residual_rms: f.residual_rms,
            points,
            verdict: if f.residual_rms < residual_threshold {
                Verdict::Moderate((f.slope - 0.1).ceil() as i32)
            } else {
                Verdict::Inconclusive
            },
        },
    }
}

/// Negligibility verdict up to order `q_max`; a good power-law fit that
/// decays too slowly falls back to a moderate verdict.
pub fn classify_negligible_values(eps: &[f64], values: &[f64], q_max: u32, residual_threshold: f64) -> AsymptoticFit {
    let mut fit = classify_moderate_values(eps, values, residual_threshold);
    if fit.is_moderate() && fit.slope <= -(q_max as f64) + 0.1 {
        fit.verdict = Verdict::NegligibleUpTo(q_max);
    }
    fit
}

pub fn classify_moderate(net: &EpsNet<GridFunction>, seminorm: Seminorm) -> Result<AsymptoticFit> {
    let s = net.seminorms(seminorm)?;
    Ok(classify_moderate_values(s.eps.values(), &s.items, RESIDUAL_THRESHOLD))
}

pub fn classify_negligible(net: &EpsNet<GridFunction>, seminorm: Seminorm, q_max: u32) -> Result<AsymptoticFit> {
    if q_max < 1 {
        return Err(Error::InvalidArgument("q_max must be at least 1".into()));
    }
    let s = net.seminorms(seminorm)?;
    Ok(classify_negligible_values(
        s.eps.values(),
        &s.items,
        q_max,
        RESIDUAL_THRESHOLD,
    ))
}

/// Result of testing `values <= A + B log(1/eps)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LogTypeCheck {
    pub passed: bool,
    pub a: f64,
    pub b: f64,
    /// Residual rms of the log model divided by the rms of its fitted values.
    pub relative_residual: f64,
    /// Exponent `p` of the competing power law `C eps^{-p}`, if fittable.
    pub power_exponent: Option<f64>,
    pub power_relative_residual: Option<f64>,
}

fn rms(v: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x * x, n + 1));
    if n == 0 {
        0.0
    } else {
        (s / n as f64).sqrt()
    }
}

/// Log-type test on nonnegative scalars (typically `sup |d_t c_eps|`).
///
/// Passes when the affine-in-`log(1/eps)` model has relative residual below
/// 0.2, unless a growing power law (`p > 0.05`) explains the data with less
/// than half that relative residual.
pub fn check_log_type(eps: &[f64], values: &[f64]) -> Result<LogTypeCheck> {
    if eps.len() != values.len() || eps.len() < 3 {
        return Err(Error::InvalidArgument(
            "log-type check needs >= 3 matching samples".into(),
        ));
    }
    if let Some(v) = values.iter().find(|v| !(**v >= 0.0 && v.is_finite())) {
        return Err(Error::InvalidArgument(format!(
            "log-type sample {v} is not a finite nonnegative value"
        )));
    }
    let x: Vec<f64> = eps.iter().map(|e| (1.0 / e).ln()).collect();
    let f = linear_fit(&x, values).ok_or_else(|| Error::InvalidArgument("degenerate eps samples".into()))?;
    let scale = rms(x.iter().map(|&xi| f.predict(xi)));
    let relative_residual = if scale == 0.0 { 0.0 } else { f.residual_rms / scale };

    let (power_exponent, power_relative_residual) = match growth_fit(eps, values) {
        Some(p) if values.iter().all(|v| *v > 0.0) => {
            let res = rms(x
                .iter()
                .zip(values)
                .map(|(&xi, &v)| v - (p.intercept + p.slope * xi).exp()));
            let pscale = rms(x.iter().map(|&xi| (p.intercept + p.slope * xi).exp()));
            (Some(p.slope), Some(res / pscale))
        }
        _ => (None, None),
    };
    let power_wins = matches!(
        (power_exponent, power_relative_residual),
        (Some(p), Some(r)) if p > 0.05 && r < 0.5 * relative_residual
    );
    Ok(LogTypeCheck {
        passed: relative_residual < 0.2 && !power_wins,
        a: f.intercept,
        b: f.slope,
        relative_residual,
        power_exponent,
        power_relative_residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{SpatialGrid, C64};

    fn grid() -> SpatialGrid {
        SpatialGrid::new(1, 2.0, 64).unwrap()
    }

    fn bumpish() -> GridFunction {
        GridFunction::from_real_fn(grid(), |p| (-p[0] * p[0] * 4.0).exp()).unwrap()
    }

    #[test]
    fn eps_grid_invariants() {
        assert!(EpsGrid::new(vec![0.5, 0.4, 0.3, 0.2, 0.1]).is_err());
        assert!(EpsGrid::new(vec![0.5, 0.4, 0.3, 0.3, 0.2, 0.1]).is_err());
        assert!(EpsGrid::new(vec![1.5, 0.4, 0.3, 0.25, 0.2, 0.1]).is_err());
        assert!(EpsGrid::new(vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6]).is_err());
        assert_eq!(EpsGrid::default_dyadic().len(), 8);
        let s = EpsGrid::shifted(2, 9).unwrap();
        assert_eq!(s.values()[0], 0.1875);
        let g = EpsGrid::geometric(0.5, 0.177, 6).unwrap();
        assert!((g.smallest() - 0.177).abs() < 1e-12);
    }

    #[test]
    fn fields_must_share_grid() {
        let eps = EpsGrid::default_dyadic();
        let mut items = vec![bumpish(); 8];
        items[3] = GridFunction::zeros(SpatialGrid::new(1, 2.0, 128).unwrap());
        assert!(EpsNet::fields(eps.clone(), items, "x").is_err());
        assert!(EpsNet::fields(eps, vec![bumpish(); 7], "x").is_err());
    }

    #[test]
    fn constant_net_has_zero_slope() {
        let eps = EpsGrid::default_dyadic();
        let net = EpsNet::fields(eps, vec![bumpish(); 8], "const").unwrap();
        let f = classify_moderate(&net, Seminorm::L2).unwrap();
        assert!(f.slope.abs() < 1e-12);
        assert_eq!(f.verdict, Verdict::Moderate(0));
    }

    #[test]
    fn power_nets() {
        let eps = EpsGrid::default_dyadic();
        let g = bumpish();
        let scaled = |p: i32| {
            let items = eps.values().iter().map(|e| g.scale(C64::new(e.powi(p), 0.0))).collect();
            EpsNet::fields(eps.clone(), items, "pow").unwrap()
        };
        let f = classify_negligible(&scaled(5), Seminorm::Hk(1), 4).unwrap();
        assert_eq!(f.verdict, Verdict::NegligibleUpTo(4));
        let f = classify_negligible(&scaled(1), Seminorm::Linf, 4).unwrap();
        assert!((f.slope + 1.0).abs() < 1e-12);
        assert_eq!(f.verdict, Verdict::Moderate(-1));
        let f = classify_moderate(&scaled(-3), Seminorm::L2).unwrap();
        assert_eq!(f.verdict, Verdict::Moderate(3));
    }

    #[test]
    fn zeros_are_excluded() {
        let eps = EpsGrid::default_dyadic();
        let v = [0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 2.0, 3.0];
        let f = classify_moderate_values(eps.values(), &v, RESIDUAL_THRESHOLD);
        assert_eq!(f.points, 3);
        assert_eq!(f.verdict, Verdict::Inconclusive);
    }

    #[test]
    fn log_type_examples() {
        let eps = EpsGrid::default_dyadic();
        let e = eps.values();
        let zeros = vec![0.0; 8];
        let c = check_log_type(e, &zeros).unwrap();
        assert!(c.passed);
        assert_eq!(c.b, 0.0);
        let log: Vec<f64> = e.iter().map(|x| (1.0 / x).ln()).collect();
        let c = check_log_type(e, &log).unwrap();
        assert!(c.passed);
        assert!((c.b - 1.0).abs() < 1e-12);
        let pow: Vec<f64> = e.iter().map(|x| x.powf(-0.5)).collect();
        let c = check_log_type(e, &pow).unwrap();
        assert!(!c.passed, "{c:?}");
    }
}
