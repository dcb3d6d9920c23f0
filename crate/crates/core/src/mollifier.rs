//! Radial mollifiers `rho` and their scalings `rho_eps(x) = eps^{-n} rho(x / eps)`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::grid::{norm, GridFunction, Point, SpatialGrid, C64};
use crate::quad::integrate_half_line;
use crate::spectral;

/// Radial profile `r -> p(r)`, evaluated before normalization.
pub type RadialProfile = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum MollifierFamily {
    /// `(1 + |x|^2)^{-m/2}`.
    CauchyPower {
        m: u32,
    },
    Custom {
        name: String,
        profile: RadialProfile,
    },
}

impl fmt::Debug for MollifierFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::CauchyPower { m } => write!(f, "CauchyPower {{ m: {m} }}"),
            Self::Custom { name, .. } => write!(f, "Custom {{ name: {name:?} }}"),
        }
    }
}

/// A normalized radial mollifier `rho = c * p(|x|)` on R^n with a power tail
/// `rho(x) >= tail_constant * |x|^{-tail_exponent}` for `|x| >= 1`.
#[derive(Clone, Debug)]
pub struct MollifierSpec {
    family: MollifierFamily,
    dim: usize,
    normalization: f64,
    tail_exponent: f64,
    tail_constant: f64,
}

/// Outcome of the quadrature and tail checks in [`MollifierSpec::validate`].
#[derive(Clone, Debug, PartialEq)]
pub struct MollifierValidation {
    pub mass: f64,
    pub tail_radii: Vec<f64>,
    /// Profile non-increasing along the sampled radii.
    pub monotone: bool,
}

/// Mass of the radial function `f(|x|)` over R^n.
fn radial_mass(dim: usize, f: impl Fn(f64) -> f64) -> f64 {
    match dim {
        1 => 2.0 * integrate_half_line(f, 400),
        _ => 2.0 * PI * integrate_half_line(|r| r * f(r), 400),
    }
}

fn check_dim(dim: usize) -> Result<()> {
    if (1..=2).contains(&dim) {
        Ok(())
    } else {
        Err(Error::Mollifier(format!("dimension {dim} not in {{1, 2}}")))
    }
}

impl MollifierSpec {
    /// `c (1 + |x|^2)^{-m/2}` with the closed-form normalization
    /// `c = Gamma(m/2) / (pi^{n/2} Gamma((m - n)/2))`; requires `m > n`.
    pub fn cauchy_power(dim: usize, m: u32) -> Result<Self> {
        check_dim(dim)?;
        if (m as usize) <= dim {
            return Err(Error::Mollifier(format!("exponent m = {m} must exceed n = {dim}")));
        }
        let mf = m as f64;
        let n = dim as f64;
        let normalization = gamma(mf / 2.0) / (PI.powf(n / 2.0) * gamma((mf - n) / 2.0));
        // (r^2 / (1 + r^2))^{m/2} is increasing, so its minimum on r >= 1 is 2^{-m/2}
        let tail_constant = normalization * 2f64.powf(-mf / 2.0);
        let spec = Self {
            family: MollifierFamily::CauchyPower { m },
            dim,
            normalization,
            tail_exponent: mf,
            tail_constant,
        };
        spec.validate(1024.0)?;
        Ok(spec)
    }

    /// The profile `c (1 + |x|^2)^{-(n+1)/2}`.
    pub fn standard(dim: usize) -> Result<Self> {
        Self::cauchy_power(dim, dim as u32 + 1)
    }

    /// The profile used for square-root data: exponent `m = 2n + 4`, so that
    /// `sqrt(rho)` is integrable with a fast tail.
    pub fn sqrt_friendly(dim: usize) -> Result<Self> {
        Self::cauchy_power(dim, 2 * dim as u32 + 4)
    }

    /// Custom strictly positive radial profile, normalized by quadrature.
    pub fn custom(
        name: impl Into<String>,
        dim: usize,
        profile: RadialProfile,
        tail_exponent: f64,
        tail_constant: f64,
    ) -> Result<Self> {
        check_dim(dim)?;
        if !(tail_exponent > dim as f64) {
            return Err(Error::Mollifier(format!(
                "tail exponent {tail_exponent} must exceed n = {dim}"
            )));
        }
        if !(tail_constant > 0.0) {
            return Err(Error::Mollifier("tail constant must be positive".into()));
        }
        let raw = radial_mass(dim, |r| profile(r));
        if !(raw.is_finite() && raw > 0.0) {
            return Err(Error::Mollifier(format!("profile mass {raw} not finite and positive")));
        }
        let spec = Self {
            family: MollifierFamily::Custom {
                name: name.into(),
                profile,
            },
            dim,
            normalization: 1.0 / raw,
            tail_exponent,
            tail_constant,
        };
        spec.validate(1024.0)?;
        Ok(spec)
    }

    pub fn family(&self) -> &MollifierFamily {
        &self.family
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn normalization(&self) -> f64 {
        self.normalization
    }

    /// `m_0` in the tail bound.
    pub fn tail_exponent(&self) -> f64 {
        self.tail_exponent
    }

    pub fn tail_constant(&self) -> f64 {
        self.tail_constant
    }

    pub fn name(&self) -> String {
        match &self.family {
            MollifierFamily::CauchyPower { m } => format!("cauchy_power(m={m},n={})", self.dim),
            MollifierFamily::Custom { name, .. } => name.clone(),
        }
    }

    /// `rho` as a function of the radius.
    pub fn radial(&self, r: f64) -> f64 {
        let p = match &self.family {
            MollifierFamily::CauchyPower { m } => (1.0 + r * r).powf(-(*m as f64) / 2.0),
            MollifierFamily::Custom { profile, .. } => profile(r),
        };
        self.normalization * p
    }

    pub fn rho(&self, x: Point) -> f64 {
        self.radial(norm(x))
    }

    /// `eps^{-n} rho(x / eps)`.
    pub fn rho_eps(&self, eps: f64, x: Point) -> f64 {
        eps.powi(-(self.dim as i32)) * self.radial(norm(x) / eps)
    }

    /// Mass by quadrature, strict positivity, and the tail bound sampled at
    /// radii `1, 2, 4, ..` up to `max_radius`.
    pub fn validate(&self, max_radius: f64) -> Result<MollifierValidation> {
        let mass = radial_mass(self.dim, |r| self.radial(r));
        if (mass - 1.0).abs() > 1e-6 {
            return Err(Error::Mollifier(format!(
                "mass {mass} differs from 1 by more than 1e-6"
            )));
        }
        let mut tail_radii = Vec::new();
        let mut r = 1.0;
        while r <= max_radius {
            let v = self.radial(r);
            let bound = self.tail_constant * r.powf(-self.tail_exponent);
            if !(v >= bound) {
                return Err(Error::Mollifier(format!(
                    "tail bound fails at r = {r}: rho = {v:e} < {bound:e}"
                )));
            }
            tail_radii.push(r);
            r *= 2.0;
        }
        let samples: Vec<f64> = (0..=64)
            .map(|k| k as f64 / 8.0)
            .chain(tail_radii.iter().copied())
            .collect();
        if let Some(&r) = samples.iter().find(|&&r| !(self.radial(r) > 0.0)) {
            return Err(Error::Mollifier(format!("profile not positive at r = {r}")));
        }
        let monotone = samples
            .windows(2)
            .filter(|w| w[1] > w[0])
            .all(|w| self.radial(w[1]) <= self.radial(w[0]));
        Ok(MollifierValidation {
            mass,
            tail_radii,
            monotone,
        })
    }

    /// `||sqrt(rho)||_{L^1}`; `None` when the tail makes it infinite.
    pub fn sqrt_l1(&self) -> Option<f64> {
        if let MollifierFamily::CauchyPower { m } = self.family {
            if (m as usize) <= 2 * self.dim {
                return None;
            }
        }
        let v = radial_mass(self.dim, |r| self.radial(r).sqrt());
        v.is_finite().then_some(v)
    }

    /// `||sqrt(rho_eps)||_{L^1} = eps^{n/2} ||sqrt(rho)||_{L^1}`.
    pub fn sqrt_l1_eps(&self, eps: f64) -> Option<f64> {
        self.sqrt_l1().map(|v| v * eps.powf(self.dim as f64 / 2.0))
    }
}

/// Resolution rule shared by every ε-dependent sampler: `dx <= eps / per_eps`.
pub(crate) fn check_resolution(eps: f64, grid: &SpatialGrid, per_eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(Error::InvalidArgument(format!("eps = {eps} not in (0, 1]")));
    }
    if grid.spacing() > eps / per_eps {
        return Err(Error::Resolution {
            eps,
            spacing: grid.spacing(),
            per_eps,
            min_points: grid.min_points_for(eps / per_eps),
        });
    }
    Ok(())
}

/// `rho_eps` sampled on a grid together with its discrete mass.
#[derive(Clone, Debug)]
pub struct ScaledMollifier {
    pub field: GridFunction,
    pub mass: f64,
}

/// Samples `rho_eps` on the grid; requires `dx <= eps / 8`.
pub fn scaled_mollifier(spec: &MollifierSpec, eps: f64, grid: SpatialGrid) -> Result<ScaledMollifier> {
    if spec.dim() != grid.dim() {
        return Err(Error::InvalidArgument(format!(
            "mollifier dimension {} differs from grid dimension {}",
            spec.dim(),
            grid.dim()
        )));
    }
    check_resolution(eps, &grid, 8.0)?;
    let field = GridFunction::from_real_fn(grid, |p| spec.rho_eps(eps, p))?;
    let mass = field.integral().re;
    Ok(ScaledMollifier { field, mass })
}

/// `(f * rho_eps)` at the nodes of `grid`, computed by periodic FFT
/// convolution on an auxiliary grid refined by a power of two until
/// `dx <= eps / 8`, then restricted back.
pub fn mollify_function(
    f: &dyn Fn(Point) -> C64,
    spec: &MollifierSpec,
    eps: f64,
    grid: SpatialGrid,
) -> Result<GridFunction> {
    if spec.dim() != grid.dim() {
        return Err(Error::InvalidArgument("mollifier and grid dimensions differ".into()));
    }
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(Error::InvalidArgument(format!("eps = {eps} not in (0, 1]")));
    }
    let mut factor = 1;
    while grid.spacing() / factor as f64 > eps / 8.0 {
        factor *= 2;
    }
    let fine = grid.refined(factor)?;
    let samples: Vec<C64> = fine.points_iter().map(f).collect();
    let kernel: Vec<C64> = (0..fine.len())
        .map(|k| C64::new(spec.rho_eps(eps, spectral::displacement(&fine, k)), 0.0))
        .collect();
    let conv = spectral::convolve(&fine, &samples, &kernel);
    GridFunction::new(fine, conv)?.restrict(factor)
}
