//! ε-dependent real coefficient fields `base + amp * s_eps(x) * (1 + a sin(Omega_eps t))`.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::grid::{Point, SpatialGrid};
use crate::regnet::{check_log_type, LogTypeCheck};

/// Spatial shape `s_eps`, bounded by 1 in absolute value.
#[derive(Clone, Debug, PartialEq)]
pub enum Profile {
    Flat,
    /// Heaviside step at `center` along axis 0, regularized by the standard
    /// Cauchy mollifier: `1/2 + atan((x - center) / eps) / pi`.
    Jump {
        center: f64,
    },
    /// `exp(-|x - center|^2 / (2 width^2))`, independent of eps.
    Smooth {
        center: Point,
        width: f64,
    },
    /// `cos(k x_0)`, independent of eps.
    Wave {
        wavenumber: f64,
    },
    /// Piecewise constant on cells of side `cell` with i.i.d. values in
    /// `[0, 1)` drawn from `seed`, independent of eps.
    Random {
        seed: u64,
        cell: f64,
    },
}

fn cell_value(seed: u64, i0: i64, i1: i64) -> f64 {
    let key = seed ^ (i0 as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ (i1 as u64).wrapping_mul(0xC2B2_AE3D_27D4_EB4F);
    ChaCha8Rng::seed_from_u64(key).gen::<f64>()
}

impl Profile {
    pub fn eval(&self, eps: f64, x: Point) -> f64 {
        match *self {
            Profile::Flat => 1.0,
            Profile::Jump { center } => 0.5 + ((x[0] - center) / eps).atan() / PI,
            Profile::Smooth { center, width } => {
                let d2 = (x[0] - center[0]).powi(2) + (x[1] - center[1]).powi(2);
                (-d2 / (2.0 * width * width)).exp()
            }
            Profile::Wave { wavenumber } => (wavenumber * x[0]).cos(),
            Profile::Random { seed, cell } => {
                cell_value(seed, (x[0] / cell).floor() as i64, (x[1] / cell).floor() as i64)
            }
        }
    }
}

/// Growth law of the modulation frequency `Omega_eps`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum FrequencyLaw {
    Constant(f64),
    /// `omega * log(1/eps)`: log-type time derivatives.
    Log(f64),
    /// `omega * eps^{-p}`: power-law time derivatives.
    Power {
        omega: f64,
        p: f64,
    },
}

impl FrequencyLaw {
    pub fn at(&self, eps: f64) -> f64 {
        match *self {
            FrequencyLaw::Constant(w) => w,
            FrequencyLaw::Log(w) => w * (1.0 / eps).ln(),
            FrequencyLaw::Power { omega, p } => omega * eps.powf(-p),
        }
    }
}

/// `base + amp * s_eps(x) * (1 + modulation * sin(Omega_eps t))`.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldSpec {
    pub base: f64,
    pub amp: f64,
    pub profile: Profile,
    pub modulation: f64,
    pub frequency: FrequencyLaw,
}

impl FieldSpec {
    pub fn constant(value: f64) -> Self {
        Self {
            base: value,
            amp: 0.0,
            profile: Profile::Flat,
            modulation: 0.0,
            frequency: FrequencyLaw::Constant(0.0),
        }
    }

    pub fn stationary(base: f64, amp: f64, profile: Profile) -> Self {
        Self {
            base,
            amp,
            profile,
            modulation: 0.0,
            frequency: FrequencyLaw::Constant(0.0),
        }
    }

    /// Time factor `1 + a sin(Omega t)`.
    pub fn time_factor(&self, eps: f64, t: f64) -> f64 {
        1.0 + self.modulation * (self.frequency.at(eps) * t).sin()
    }

    pub fn time_factor_derivative(&self, eps: f64, t: f64) -> f64 {
        let w = self.frequency.at(eps);
        self.modulation * w * (w * t).cos()
    }

    pub fn eval(&self, eps: f64, x: Point, t: f64) -> f64 {
        self.base + self.amp * self.profile.eval(eps, x) * self.time_factor(eps, t)
    }

    pub fn is_stationary(&self) -> bool {
        self.modulation == 0.0 || self.amp == 0.0
    }

    /// Samples of `s_eps` at the grid nodes.
    pub fn sample_profile(&self, eps: f64, grid: &SpatialGrid) -> Vec<f64> {
        grid.points_iter().map(|p| self.profile.eval(eps, p)).collect()
    }

    /// `sup_{x,t} |d_t c_eps| = |amp| * sup |s_eps| * |a| * Omega_eps` over the grid.
    pub fn dt_sup(&self, eps: f64, profile: &[f64]) -> f64 {
        let smax = profile.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        (self.amp * self.modulation * self.frequency.at(eps)).abs() * smax
    }

    /// Smallest value over the grid and over all `t`: the time factor ranges
    /// over `[1 - |a|, 1 + |a|]` and the field is affine in it.
    pub fn min_over(&self, profile: &[f64]) -> (usize, f64) {
        let lo = 1.0 - self.modulation.abs();
        let hi = 1.0 + self.modulation.abs();
        profile
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let a = self.base + self.amp * s * lo;
                let b = self.base + self.amp * s * hi;
                (i, a.min(b))
            })
            .fold((0, f64::INFINITY), |m, x| if x.1 < m.1 { x } else { m })
    }

    pub fn sup_abs(&self, profile: &[f64]) -> f64 {
        let lo = 1.0 - self.modulation.abs();
        let hi = 1.0 + self.modulation.abs();
        profile
            .iter()
            .map(|s| {
                (self.base + self.amp * s * lo)
                    .abs()
                    .max((self.base + self.amp * s * hi).abs())
            })
            .fold(0.0, f64::max)
    }
}

/// Coefficients `c_k` (one per axis), potential `V` and the lower bound `c0`.
#[derive(Clone, Debug, PartialEq)]
pub struct CoefficientNet {
    pub c: Vec<FieldSpec>,
    pub v: FieldSpec,
    pub c0: f64,
}

/// Coefficient and potential profiles sampled on one grid at one ε.
#[derive(Clone, Debug)]
pub struct SampledCoefficients {
    pub eps: f64,
    pub c_profiles: Vec<Vec<f64>>,
    pub v_profile: Vec<f64>,
}

impl CoefficientNet {
    /// Laplacian with unit coefficients and no potential.
    pub fn free(dim: usize) -> Self {
        Self {
            c: vec![FieldSpec::constant(1.0); dim],
            v: FieldSpec::constant(0.0),
            c0: 1.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.c.len()
    }

    pub fn validate(&self, grid: &SpatialGrid) -> Result<()> {
        if self.c.len() != grid.dim() {
            return Err(Error::InvalidArgument(format!(
                "{} coefficients for dimension {}",
                self.c.len(),
                grid.dim()
            )));
        }
        if !(self.c0 > 0.0) {
            return Err(Error::InvalidArgument(format!("c0 = {} must be positive", self.c0)));
        }
        Ok(())
    }

    /// Samples the profiles and checks `c_k >= c0` at every node for all `t`.
    pub fn sample(&self, eps: f64, grid: &SpatialGrid) -> Result<SampledCoefficients> {
        self.validate(grid)?;
        let c_profiles: Vec<Vec<f64>> = self.c.iter().map(|f| f.sample_profile(eps, grid)).collect();
        for (k, (f, prof)) in self.c.iter().zip(&c_profiles).enumerate() {
            let (index, value) = f.min_over(prof);
            if value < self.c0 {
                return Err(Error::CoefficientBelowBound {
                    component: k,
                    index,
                    value,
                    c0: self.c0,
                    t: f64::NAN,
                });
            }
        }
        Ok(SampledCoefficients {
            eps,
            c_profiles,
            v_profile: self.v.sample_profile(eps, grid),
        })
    }

    /// `max_k sup |d_t c_k|` and `sup |d_t V|` at one ε.
    pub fn dt_sups(&self, s: &SampledCoefficients) -> (f64, f64) {
        let c = self
            .c
            .iter()
            .zip(&s.c_profiles)
            .map(|(f, p)| f.dt_sup(s.eps, p))
            .fold(0.0, f64::max);
        (c, self.v.dt_sup(s.eps, &s.v_profile))
    }

    /// Log-type test of `max_k sup |d_t c_k| + sup |d_t V|` across an ε-grid.
    pub fn check_log_type(&self, eps: &[f64], grid_for: impl Fn(f64) -> SpatialGrid) -> Result<LogTypeCheck> {
        let values = eps
            .iter()
            .map(|&e| {
                let s = self.sample(e, &grid_for(e))?;
                let (c, v) = self.dt_sups(&s);
                Ok(c.max(v))
            })
            .collect::<Result<Vec<f64>>>()?;
        check_log_type(eps, &values)
    }
}

impl SampledCoefficients {
    pub fn c_at(&self, net: &CoefficientNet, axis: usize, t: f64) -> Vec<f64> {
        let f = &net.c[axis];
        let tau = f.time_factor(self.eps, t);
        self.c_profiles[axis].iter().map(|s| f.base + f.amp * s * tau).collect()
    }

    pub fn v_at(&self, net: &CoefficientNet, t: f64) -> Vec<f64> {
        let f = &net.v;
        let tau = f.time_factor(self.eps, t);
        self.v_profile.iter().map(|s| f.base + f.amp * s * tau).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jump_is_mollified_heaviside() {
        let p = Profile::Jump { center: 0.0 };
        assert_eq!(p.eval(0.1, [0.0, 0.0]), 0.5);
        assert!(p.eval(0.01, [1.0, 0.0]) > 0.99);
        assert!(p.eval(0.01, [-1.0, 0.0]) < 0.01);
    }

    #[test]
    fn random_profile_is_deterministic_and_bounded() {
        let p = Profile::Random { seed: 7, cell: 0.1 };
        let a = p.eval(1.0, [0.33, 0.0]);
        assert_eq!(a, p.eval(0.5, [0.31, 0.0]));
        assert!((0.0..1.0).contains(&a));
        assert_ne!(a, p.eval(1.0, [0.43, 0.0]));
    }

    #[test]
    fn positivity_violation_reported() {
        let g = SpatialGrid::new(1, 1.0, 64).unwrap();
        let net = CoefficientNet {
            c: vec![FieldSpec {
                base: 1.0,
                amp: -0.8,
                profile: Profile::Flat,
                modulation: 0.5,
                frequency: FrequencyLaw::Constant(1.0),
            }],
            v: FieldSpec::constant(0.0),
            c0: 0.5,
        };
        // minimum 1 - 0.8 * 1.5 = -0.2
        match net.sample(0.1, &g) {
            Err(Error::CoefficientBelowBound { value, .. }) => assert!((value + 0.2).abs() < 1e-14),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn log_law_passes_power_law_fails() {
        let g = SpatialGrid::new(1, 2.0, 8192).unwrap();
        let eps: Vec<f64> = (2..10).map(|j| 2f64.powi(-j)).collect();
        let field = |frequency| FieldSpec {
            base: 2.0,
            amp: 0.5,
            profile: Profile::Jump { center: 0.0 },
            modulation: 0.5,
            frequency,
        };
        let log = CoefficientNet {
            c: vec![field(FrequencyLaw::Log(1.0))],
            v: FieldSpec::constant(0.0),
            c0: 1.0,
        };
        assert!(log.check_log_type(&eps, |_| g).unwrap().passed);
        let pow = CoefficientNet {
            c: vec![field(FrequencyLaw::Power { omega: 1.0, p: 0.5 })],
            ..log.clone()
        };
        assert!(!pow.check_log_type(&eps, |_| g).unwrap().passed);
        let still = CoefficientNet {
            c: vec![FieldSpec::stationary(2.0, 0.5, Profile::Jump { center: 0.0 })],
            ..log
        };
        let r = still.check_log_type(&eps, |_| g).unwrap();
        assert!(r.passed);
        assert_eq!(r.b, 0.0);
    }
}
