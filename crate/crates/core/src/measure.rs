//! Probability measures, their mollifications `h_eps = mu * rho_eps`, positive
//! square roots, cutoff representatives, and the associated checks.

use statrs::function::erf::erf;

use crate::error::{Error, Result};
use crate::fit::rate_fit;
use crate::grid::{derivative, norm, norm_l2, pair, GridFunction, Point, SpatialGrid, C64};
use crate::mollifier::{check_resolution, MollifierSpec};
use crate::quad::{integrate, integrate_2d};
use crate::regnet::EpsNet;
use crate::spectral;
use crate::testfn::{TestFunction, TestFunctionSpec};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Atom {
    pub location: Point,
    pub weight: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Density {
    /// Normalized indicator of the box `[lo, hi]` (a rectangle when n = 2).
    UniformBox { lo: Point, hi: Point },
    /// Isotropic normal density.
    Gaussian { mean: Point, sigma: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DensityPart {
    pub density: Density,
    pub weight: f64,
}

/// Finite mixture of point masses and piecewise-smooth densities with total mass 1.
#[derive(Clone, Debug, PartialEq)]
pub struct Measure {
    dim: usize,
    atoms: Vec<Atom>,
    densities: Vec<DensityPart>,
}

fn std_normal_cdf(x: f64) -> f64 {
    0.5 * (1.0 + erf(x / std::f64::consts::SQRT_2))
}

fn interval_overlap(a: f64, b: f64, lo: f64, hi: f64) -> f64 {
    (b.min(hi) - a.max(lo)).max(0.0)
}

impl Density {
    fn validate(&self, dim: usize) -> Result<()> {
        match *self {
            Density::UniformBox { lo, hi } => {
                if (0..dim).any(|a| !(hi[a] > lo[a])) {
                    return Err(Error::Measure(format!("empty box {lo:?}..{hi:?}")));
                }
            }
            Density::Gaussian { sigma, .. } => {
                if !(sigma > 0.0) {
                    return Err(Error::Measure(format!("sigma {sigma} must be positive")));
                }
            }
        }
        Ok(())
    }

    /// Probability of the axis-aligned cell centered at `x` with side `h`,
    /// divided by the cell volume.
    fn cell_average(&self, dim: usize, x: Point, h: f64) -> f64 {
        let mut v = 1.0;
        for a in 0..dim {
            let (l, r) = (x[a] - 0.5 * h, x[a] + 0.5 * h);
            v *= match *self {
                Density::UniformBox { lo, hi } => interval_overlap(l, r, lo[a], hi[a]) / (hi[a] - lo[a]),
                Density::Gaussian { mean, sigma } => {
                    std_normal_cdf((r - mean[a]) / sigma) - std_normal_cdf((l - mean[a]) / sigma)
                }
            } / h;
        }
        v
    }

    fn pdf(&self, dim: usize, x: Point) -> f64 {
        match *self {
            Density::UniformBox { lo, hi } => {
                let mut v = 1.0;
                for a in 0..dim {
                    if x[a] < lo[a] || x[a] > hi[a] {
                        return 0.0;
                    }
                    v /= hi[a] - lo[a];
                }
                v
            }
            Density::Gaussian { mean, sigma } => {
                let d2: f64 = (0..dim).map(|a| (x[a] - mean[a]).powi(2)).sum();
                (-d2 / (2.0 * sigma * sigma)).exp()
                    / (2.0 * std::f64::consts::PI * sigma * sigma).powf(dim as f64 / 2.0)
            }
        }
    }

    /// Integration window per axis that carries the whole mass up to ~1e-30.
    fn window(&self, axis: usize) -> (f64, f64) {
        match *self {
            Density::UniformBox { lo, hi } => (lo[axis], hi[axis]),
            Density::Gaussian { mean, sigma } => (mean[axis] - 12.0 * sigma, mean[axis] + 12.0 * sigma),
        }
    }

    /// Mass of the centered ball of radius `r`.
    fn ball_mass(&self, dim: usize, r: f64) -> f64 {
        if dim == 1 {
            return match *self {
                Density::UniformBox { lo, hi } => interval_overlap(-r, r, lo[0], hi[0]) / (hi[0] - lo[0]),
                Density::Gaussian { mean, sigma } => {
                    std_normal_cdf((r - mean[0]) / sigma) - std_normal_cdf((-r - mean[0]) / sigma)
                }
            };
        }
        // integrate the exact chord mass along axis 1 over axis 0
        let (a, b) = self.window(0);
        let (a, b) = (a.max(-r), b.min(r));
        if b <= a {
            return 0.0;
        }
        integrate(
            |x| {
                let y = (r * r - x * x).max(0.0).sqrt();
                match *self {
                    Density::UniformBox { lo, hi } => {
                        interval_overlap(-y, y, lo[1], hi[1]) / ((hi[0] - lo[0]) * (hi[1] - lo[1]))
                    }
                    Density::Gaussian { mean, sigma } => {
                        let px = (-(x - mean[0]).powi(2) / (2.0 * sigma * sigma)).exp()
                            / (sigma * (2.0 * std::f64::consts::PI).sqrt());
                        px * (std_normal_cdf((y - mean[1]) / sigma) - std_normal_cdf((-y - mean[1]) / sigma))
                    }
                }
            },
            a,
            b,
            400,
        )
    }

    fn expect(&self, dim: usize, psi: &TestFunctionSpec) -> f64 {
        // restrict to the overlap of the density window and the test support
        let c = psi.center();
        let r = psi.radius();
        let lim = |axis: usize| {
            let (a, b) = self.window(axis);
            (a.max(c[axis] - r), b.min(c[axis] + r))
        };
        let (a0, b0) = lim(0);
        if b0 <= a0 {
            return 0.0;
        }
        if dim == 1 {
            integrate(|x| self.pdf(1, [x, 0.0]) * psi.eval([x, 0.0]), a0, b0, 400)
        } else {
            let (a1, b1) = lim(1);
            if b1 <= a1 {
                return 0.0;
            }
            integrate_2d(|x, y| self.pdf(2, [x, y]) * psi.eval([x, y]), (a0, b0), (a1, b1), 120)
        }
    }

    fn extent(&self) -> f64 {
        match *self {
            Density::UniformBox { lo, hi } => norm([lo[0].abs().max(hi[0].abs()), lo[1].abs().max(hi[1].abs())]),
            Density::Gaussian { mean, sigma } => norm(mean) + 12.0 * sigma,
        }
    }
}

impl Measure {
    pub fn new(dim: usize, atoms: Vec<Atom>, densities: Vec<DensityPart>) -> Result<Self> {
        if !(1..=2).contains(&dim) {
            return Err(Error::Measure(format!("dimension {dim} not in {{1, 2}}")));
        }
        let weights = atoms.iter().map(|a| a.weight).chain(densities.iter().map(|d| d.weight));
        let mut total = 0.0;
        for w in weights {
            if !(w > 0.0 && w.is_finite()) {
                return Err(Error::Measure(format!("weight {w} must be positive")));
            }
            total += w;
        }
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Measure(format!("total mass {total} is not 1")));
        }
        for a in &atoms {
            if !(a.location[0].is_finite() && a.location[1].is_finite()) || (dim == 1 && a.location[1] != 0.0) {
                return Err(Error::Measure(format!("bad atom location {:?}", a.location)));
            }
        }
        for d in &densities {
            d.density.validate(dim)?;
        }
        Ok(Self { dim, atoms, densities })
    }

    pub fn dirac(dim: usize, at: Point) -> Result<Self> {
        Self::new(
            dim,
            vec![Atom {
                location: at,
                weight: 1.0,
            }],
            vec![],
        )
    }

    /// `(delta_a + delta_b) / 2` on the line.
    pub fn two_atom(a: f64, b: f64) -> Result<Self> {
        Self::new(
            1,
            vec![
                Atom {
                    location: [a, 0.0],
                    weight: 0.5,
                },
                Atom {
                    location: [b, 0.0],
                    weight: 0.5,
                },
            ],
            vec![],
        )
    }

    pub fn uniform_interval(lo: f64, hi: f64) -> Result<Self> {
        Self::new(
            1,
            vec![],
            vec![DensityPart {
                density: Density::UniformBox {
                    lo: [lo, 0.0],
                    hi: [hi, 0.0],
                },
                weight: 1.0,
            }],
        )
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn densities(&self) -> &[DensityPart] {
        &self.densities
    }

    pub fn total(&self) -> f64 {
        self.atoms.iter().map(|a| a.weight).sum::<f64>() + self.densities.iter().map(|d| d.weight).sum::<f64>()
    }

    /// `mu(psi) = sum w psi(a) + int psi d(density part)`.
    pub fn expect(&self, psi: &TestFunctionSpec) -> f64 {
        let atoms: f64 = self.atoms.iter().map(|a| a.weight * psi.eval(a.location)).sum();
        let dens: f64 = self
            .densities
            .iter()
            .map(|d| d.weight * d.density.expect(self.dim, psi))
            .sum();
        atoms + dens
    }

    /// `mu(B_r(0))`.
    pub fn ball_mass(&self, r: f64) -> f64 {
        let atoms: f64 = self
            .atoms
            .iter()
            .filter(|a| norm(a.location) <= r)
            .map(|a| a.weight)
            .sum();
        let dens: f64 = self
            .densities
            .iter()
            .map(|d| d.weight * d.density.ball_mass(self.dim, r))
            .sum();
        atoms + dens
    }

    /// Radius of the smallest centered ball `A` with `mu(A) >= 1/2`.
    pub fn half_mass_radius(&self) -> f64 {
        let mut hi = self
            .atoms
            .iter()
            .map(|a| norm(a.location))
            .chain(self.densities.iter().map(|d| d.density.extent()))
            .fold(0.0, f64::max);
        if self.ball_mass(0.0) >= 0.5 {
            return 0.0;
        }
        let mut lo = 0.0;
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if self.ball_mass(mid) >= 0.5 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        // snap to an atom radius when the jump sits there
        self.atoms
            .iter()
            .map(|a| norm(a.location))
            .filter(|&r| r <= hi && r >= lo - 1e-12 * (1.0 + hi) && self.ball_mass(r) >= 0.5)
            .fold(hi, f64::min)
    }

    fn check_inside(&self, grid: &SpatialGrid) -> Result<()> {
        let l = grid.half_width();
        for a in &self.atoms {
            if a.location[..self.dim].iter().any(|x| x.abs() >= l) {
                return Err(Error::Measure(format!(
                    "atom {:?} outside the box of half-width {l}",
                    a.location
                )));
            }
        }
        Ok(())
    }
}

/// `h_eps = mu * rho_eps` on the grid: atoms by direct summation, densities by
/// FFT convolution of their cell averages. Every node must be positive.
pub fn mollify_measure(mu: &Measure, spec: &MollifierSpec, eps: f64, grid: SpatialGrid) -> Result<GridFunction> {
    if mu.dim() != grid.dim() || spec.dim() != grid.dim() {
        return Err(Error::InvalidArgument(
            "measure, mollifier and grid dimensions differ".into(),
        ));
    }
    check_resolution(eps, &grid, 8.0)?;
    mu.check_inside(&grid)?;
    let mut values: Vec<C64> = grid
        .points_iter()
        .map(|x| {
            let s: f64 = mu
                .atoms
                .iter()
                .map(|a| a.weight * spec.rho_eps(eps, [x[0] - a.location[0], x[1] - a.location[1]]))
                .sum();
            C64::new(s, 0.0)
        })
        .collect();
    if !mu.densities.is_empty() {
        let h = grid.spacing();
        let dens: Vec<C64> = grid
            .points_iter()
            .map(|x| {
                let v: f64 = mu
                    .densities
                    .iter()
                    .map(|d| d.weight * d.density.cell_average(grid.dim(), x, h))
                    .sum();
                C64::new(v, 0.0)
            })
            .collect();
        let kernel: Vec<C64> = (0..grid.len())
            .map(|k| C64::new(spec.rho_eps(eps, spectral::displacement(&grid, k)), 0.0))
            .collect();
        let conv = spectral::convolve(&grid, &dens, &kernel);
        for (v, c) in values.iter_mut().zip(conv) {
            v.re += c.re;
        }
    }
    if let Some((index, v)) = values.iter().enumerate().find(|(_, v)| !(v.re > 0.0)) {
        return Err(Error::Positivity { index, value: v.re });
    }
    GridFunction::new(grid, values)
}

/// Pointwise positive square root of a strictly positive real field.
pub fn sqrt_root(h: &GridFunction) -> Result<GridFunction> {
    if let Some((index, v)) = h
        .values()
        .iter()
        .enumerate()
        .find(|(_, v)| !(v.re > 0.0 && v.im == 0.0))
    {
        return Err(Error::Positivity { index, value: v.re });
    }
    h.map(|v| C64::new(v.re.sqrt(), 0.0))
}

#[derive(Clone, Debug, PartialEq)]
pub struct LowerBoundReport {
    pub eps: f64,
    pub k_radius: f64,
    /// Radius of the centered ball `A` with `mu(A) >= 1/2`.
    pub a_radius: f64,
    pub a_mass: f64,
    /// `r(K) = max |x - y|` over `x in K`, `y in A`.
    pub r_k: f64,
    pub measured_inf: f64,
    /// `C eps^{m0 - n} / (2 r^{m0})`, with `C` the stored tail constant.
    pub nominal_bound: f64,
    /// `mu(A) rho_eps(r(K))`.
    pub sharp_bound: f64,
    /// `eps < 1/r(K)` and `eps <= r(K)`; the bounds are only claimed when true.
    pub precondition_ok: bool,
    pub nominal_holds: bool,
    pub sharp_holds: bool,
}

/// Infimum of `h` over the centered ball of radius `k_radius` against the
/// tail-based lower bounds.
pub fn lower_bound_check(
    h: &GridFunction,
    mu: &Measure,
    spec: &MollifierSpec,
    eps: f64,
    k_radius: f64,
) -> Result<LowerBoundReport> {
    let grid = h.grid();
    let measured_inf = h
        .values()
        .iter()
        .enumerate()
        .filter(|(k, _)| norm(grid.point(*k)) <= k_radius)
        .map(|(_, v)| v.re)
        .fold(f64::INFINITY, f64::min);
    if !measured_inf.is_finite() {
        return Err(Error::InvalidArgument(format!("no grid node inside |x| <= {k_radius}")));
    }
    let a_radius = mu.half_mass_radius();
    let a_mass = mu.ball_mass(a_radius);
    let r_k = k_radius + a_radius;
    let n = spec.dim() as f64;
    let m0 = spec.tail_exponent();
    let nominal_bound = spec.tail_constant() * eps.powf(m0 - n) / (2.0 * r_k.powf(m0));
    let sharp_bound = a_mass * spec.rho_eps(eps, [r_k, 0.0]);
    let precondition_ok = eps < 1.0 / r_k && eps <= r_k;
    Ok(LowerBoundReport {
        eps,
        k_radius,
        a_radius,
        a_mass,
        r_k,
        measured_inf,
        nominal_bound,
        sharp_bound,
        precondition_ok,
        nominal_holds: measured_inf >= nominal_bound,
        sharp_holds: measured_inf >= sharp_bound * (1.0 - 1e-12),
    })
}

/// Smooth radial cutoffs `chi_j(x) = chi0(2^{-j} x)` with `chi0 = 1` on the
/// unit ball and `0` outside radius 2.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct CutoffFamily;

fn smooth_step_kernel(s: f64) -> f64 {
    if s <= 0.0 {
        0.0
    } else {
        (-1.0 / s).exp()
    }
}

impl CutoffFamily {
    /// Radial profile of `chi0`.
    pub fn chi0(&self, r: f64) -> f64 {
        if r <= 1.0 {
            1.0
        } else if r >= 2.0 {
            0.0
        } else {
            let a = smooth_step_kernel(2.0 - r);
            a / (a + smooth_step_kernel(r - 1.0))
        }
    }

    /// The unique integer with `2^{-j-1} < eps <= 2^{-j}`.
    pub fn index(&self, eps: f64) -> Result<i32> {
        if !(eps > 0.0 && eps <= 1.0) {
            return Err(Error::InvalidArgument(format!("eps = {eps} not in (0, 1]")));
        }
        let mut j = (-eps.log2()).floor() as i32;
        while eps > 2f64.powi(-j) {
            j -= 1;
        }
        while eps <= 2f64.powi(-j - 1) {
            j += 1;
        }
        Ok(j)
    }

    pub fn chi(&self, j: i32, x: Point) -> f64 {
        self.chi0(norm(x) * 2f64.powi(-j))
    }

    /// `||d^gamma chi_j||_{L^2} / ||d^gamma chi_0||_{L^2}` divided by the
    /// predicted `2^{(n/2 - |gamma|) j}`, for every multi-index `|gamma| <= 2`.
    /// Each function is sampled on the box `[-4 * 2^j, 4 * 2^j)^n` with `points` per axis.
    pub fn scaling_ratios(&self, dim: usize, j: i32, points: usize) -> Result<Vec<([usize; 2], f64)>> {
        let g0 = SpatialGrid::new(dim, 4.0, points)?;
        let gj = SpatialGrid::new(dim, 4.0 * 2f64.powi(j), points)?;
        let c0 = GridFunction::from_real_fn(g0, |p| self.chi(0, p))?;
        let cj = GridFunction::from_real_fn(gj, |p| self.chi(j, p))?;
        let gammas: Vec<[usize; 2]> = if dim == 1 {
            vec![[0, 0], [1, 0], [2, 0]]
        } else {
            vec![[0, 0], [1, 0], [0, 1], [2, 0], [1, 1], [0, 2]]
        };
        let apply = |u: &GridFunction, g: [usize; 2]| -> Result<GridFunction> {
            let mut v = u.clone();
            for (axis, &order) in g.iter().enumerate().take(dim) {
                if order > 0 {
                    v = derivative(&v, axis, order)?;
                }
            }
            Ok(v)
        };
        gammas
            .into_iter()
            .map(|g| {
                let order = (g[0] + g[1]) as f64;
                let predicted = 2f64.powf((dim as f64 / 2.0 - order) * j as f64);
                let r = norm_l2(&apply(&cj, g)?) / norm_l2(&apply(&c0, g)?);
                Ok((g, r / predicted))
            })
            .collect()
    }
}

#[derive(Clone, Debug)]
pub struct CutoffSqrt {
    pub field: GridFunction,
    pub j: i32,
}

/// `g_eps = chi_{j(eps)} sqrt(mu * rho_eps)`; the box must contain the support
/// of the cutoff, `|x| <= 2^{j+1}`.
pub fn cutoff_sqrt(
    mu: &Measure,
    spec: &MollifierSpec,
    chi: &CutoffFamily,
    eps: f64,
    grid: SpatialGrid,
) -> Result<CutoffSqrt> {
    let j = chi.index(eps)?;
    let required = 2f64.powi(j + 1);
    if grid.half_width() < required {
        return Err(Error::BoxTooSmall {
            half_width: grid.half_width(),
            required,
        });
    }
    let phi = sqrt_root(&mollify_measure(mu, spec, eps, grid)?)?;
    let values = phi
        .values()
        .iter()
        .enumerate()
        .map(|(k, v)| v * chi.chi(j, grid.point(k)))
        .collect();
    Ok(CutoffSqrt {
        field: GridFunction::new(grid, values)?,
        j,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct AssociationRow {
    pub test: String,
    pub target: f64,
    pub gaps: Vec<f64>,
    /// Decay exponent of the gaps against eps.
    pub slope: f64,
    pub monotone: bool,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AssociationReport {
    pub eps: Vec<f64>,
    pub tolerance: f64,
    pub rows: Vec<AssociationRow>,
}

impl AssociationReport {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.passed)
    }
}

/// Non-increasing up to a relative slack.
pub(crate) fn decreasing_with_slack(v: &[f64], slack: f64) -> bool {
    v.windows(2).all(|w| w[1] <= (1.0 + slack) * w[0])
}

/// Gaps `|<u_eps, psi> - mu(psi)|` for a net of squared roots; each test must
/// pass the monotone (10% slack) decrease and end below `tolerance`.
pub fn association_check(
    net: &EpsNet<GridFunction>,
    mu: &Measure,
    tests: &[TestFunction],
    tolerance: f64,
) -> Result<AssociationReport> {
    let eps = net.eps().values().to_vec();
    let rows = tests
        .iter()
        .map(|psi| {
            let spec = psi
                .spec()
                .ok_or_else(|| Error::InvalidArgument("association needs closed-form test functions".into()))?;
            let target = mu.expect(spec);
            let gaps = net
                .items()
                .iter()
                .map(|u| Ok((pair(u, psi)? - target).norm()))
                .collect::<Result<Vec<f64>>>()?;
            let slope = rate_fit(&eps, &gaps).map_or(f64::NAN, |f| f.slope);
            let monotone = decreasing_with_slack(&gaps, 0.1);
            let last = *gaps.last().expect("non-empty net");
            Ok(AssociationRow {
                test: psi.name(),
                target,
                passed: monotone && last < tolerance,
                gaps,
                slope,
                monotone,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(AssociationReport { eps, tolerance, rows })
}

#[derive(Clone, Debug, PartialEq)]
pub struct VanishingRow {
    pub test: String,
    pub pairings: Vec<f64>,
    pub slope: f64,
    pub passed: bool,
}

/// Decay of `|<phi_eps, psi>|` for square-root nets; the expected exponent
/// is `n/2`, accepted within 0.1. Takes `(eps, phi_eps)` pairs so each ε may
/// use its own grid; test functions are resampled per grid.
pub fn vanishing_sqrt_check(
    eps: &[f64],
    fields: &[GridFunction],
    tests: &[TestFunctionSpec],
) -> Result<Vec<VanishingRow>> {
    let dim = fields.first().map_or(1, |f| f.grid().dim()) as f64;
    tests
        .iter()
        .map(|spec| {
            let pairings = fields
                .iter()
                .map(|u| {
                    let psi = TestFunction::new(spec.clone(), *u.grid())?;
                    Ok(pair(u, &psi)?.norm())
                })
                .collect::<Result<Vec<f64>>>()?;
            let slope = rate_fit(eps, &pairings).map_or(f64::NAN, |f| f.slope);
            Ok(VanishingRow {
                test: spec.to_string(),
                passed: (slope - dim / 2.0).abs() <= 0.1,
                pairings,
                slope,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn dirac_gives_rho_eps() {
        let spec = MollifierSpec::standard(1).unwrap();
        let g = SpatialGrid::new(1, 2.0, 512).unwrap();
        let h = mollify_measure(&Measure::dirac(1, [0.0, 0.0]).unwrap(), &spec, 0.1, g).unwrap();
        for (k, v) in h.values().iter().enumerate() {
            assert_eq!(v.re, spec.rho_eps(0.1, g.point(k)));
        }
    }

    #[test]
    fn two_atoms_at_origin() {
        let spec = MollifierSpec::standard(1).unwrap();
        let g = SpatialGrid::new(1, 4.0, 128).unwrap();
        let h = mollify_measure(&Measure::two_atom(-1.0, 1.0).unwrap(), &spec, 0.5, g).unwrap();
        // node 64 is x = 0
        assert!((h.values()[64].re - 2.0 / (5.0 * PI)).abs() < 1e-15);
    }

    #[test]
    fn uniform_density_mass_and_positivity() {
        let spec = MollifierSpec::standard(1).unwrap();
        let g = SpatialGrid::new(1, 64.0, 8192).unwrap();
        let h = mollify_measure(&Measure::uniform_interval(-1.0, 1.0).unwrap(), &spec, 0.125, g).unwrap();
        assert!(h.values().iter().all(|v| v.re > 0.0));
        // the periodic kernel keeps the full mass of the cell averages
        assert!((h.integral().re - 1.0).abs() < 1e-2);
        // oracle: (atan((1-x)/eps) + atan((1+x)/eps)) / (2 pi) at x = 0
        let exact = (8f64).atan() / PI;
        assert!((h.values()[4096].re - exact).abs() < 2e-3);
    }

    #[test]
    fn sqrt_root_examples() {
        let g = SpatialGrid::new(1, 1.0, 8).unwrap();
        let four = GridFunction::constant(g, C64::new(4.0, 0.0));
        assert!(sqrt_root(&four).unwrap().values().iter().all(|v| v.re == 2.0));
        let mut bad = vec![C64::new(1.0, 0.0); 8];
        bad[2] = C64::new(0.0, 0.0);
        assert!(sqrt_root(&GridFunction::new(g, bad).unwrap()).is_err());
        let spec = MollifierSpec::standard(1).unwrap();
        let g = SpatialGrid::new(1, 2.0, 128).unwrap();
        let h = mollify_measure(&Measure::dirac(1, [0.0, 0.0]).unwrap(), &spec, 0.25, g).unwrap();
        let phi = sqrt_root(&h).unwrap();
        assert!((phi.values()[64].re - (4.0 / PI).sqrt()).abs() < 1e-14);
    }

    #[test]
    fn half_mass_radius_choices() {
        assert_eq!(Measure::dirac(1, [0.0, 0.0]).unwrap().half_mass_radius(), 0.0);
        assert_eq!(Measure::two_atom(-1.0, 1.0).unwrap().half_mass_radius(), 1.0);
        let u = Measure::uniform_interval(-1.0, 1.0).unwrap();
        assert!((u.half_mass_radius() - 0.5).abs() < 1e-12);
        let g2 = Measure::new(
            2,
            vec![],
            vec![DensityPart {
                density: Density::Gaussian {
                    mean: [0.0, 0.0],
                    sigma: 1.0,
                },
                weight: 1.0,
            }],
        )
        .unwrap();
        // 1 - exp(-r^2/2) = 1/2
        assert!((g2.half_mass_radius() - (2.0 * 2f64.ln()).sqrt()).abs() < 1e-6);
    }

    #[test]
    fn expectation_quadrature() {
        let psi = TestFunctionSpec::bump(0.0, 1.0);
        let d = Measure::dirac(1, [0.0, 0.0]).unwrap();
        assert_eq!(d.expect(&psi), 1.0);
        let odd = TestFunctionSpec::LinearBump {
            center: [0.0, 0.0],
            radius: 1.5,
            axis: 0,
        };
        assert!(Measure::two_atom(-1.0, 1.0).unwrap().expect(&odd).abs() < 1e-15);
        let u = Measure::uniform_interval(-1.0, 1.0).unwrap();
        let fine = integrate(|x| psi.eval([x, 0.0]), -1.0, 1.0, 4000) / 2.0;
        assert!((u.expect(&psi) - fine).abs() < 1e-12);
    }

    #[test]
    fn cutoff_index_rule() {
        let c = CutoffFamily;
        assert_eq!(c.index(0.3).unwrap(), 1);
        assert_eq!(c.index(1.0).unwrap(), 0);
        assert_eq!(c.index(0.5).unwrap(), 1);
        assert_eq!(c.index(0.25).unwrap(), 2);
        assert_eq!(c.index(2f64.powi(-9)).unwrap(), 9);
        assert!(c.index(0.0).is_err());
        assert_eq!(c.chi0(1.0), 1.0);
        assert_eq!(c.chi0(2.0), 0.0);
        assert!((c.chi0(1.5) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn cutoff_requires_box() {
        let spec = MollifierSpec::standard(1).unwrap();
        let mu = Measure::dirac(1, [0.0, 0.0]).unwrap();
        let g = SpatialGrid::new(1, 2.0, 1024).unwrap();
        match cutoff_sqrt(&mu, &spec, &CutoffFamily, 0.3, g) {
            Err(Error::BoxTooSmall { required, .. }) => assert_eq!(required, 4.0),
            other => panic!("{other:?}"),
        }
        let g = SpatialGrid::new(1, 4.0, 1024).unwrap();
        let c = cutoff_sqrt(&mu, &spec, &CutoffFamily, 0.3, g).unwrap();
        assert_eq!(c.j, 1);
    }

    #[test]
    fn cutoff_scaling_identity() {
        for dim in 1..=2 {
            let pts = if dim == 1 { 1024 } else { 128 };
            for (g, r) in CutoffFamily.scaling_ratios(dim, 3, pts).unwrap() {
                assert!((r - 1.0).abs() < 0.01, "dim {dim} gamma {g:?} ratio {r}");
            }
        }
    }
}
