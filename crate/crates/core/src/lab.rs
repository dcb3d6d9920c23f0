//! ε-sweeps on solution nets: coherence with the unregularized solution and
//! association of pairings with a limit.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fit::rate_fit;
use crate::grid::{GridFunction, SpatialGrid, C64};
use crate::measure::decreasing_with_slack;
use crate::mollifier::MollifierSpec;
use crate::regnet::EpsGrid;
use crate::solver::{
    solve, CauchyProblem, CoefficientNet, Forcing, GridPolicy, InitialData, SolveResult, SpaceFn, Temporal, TimePolicy,
};
use crate::spectral;
use crate::testfn::TestFunctionSpec;

fn h1(u: &GridFunction) -> f64 {
    spectral::sobolev_norms(u, 1)[1]
}

/// Smooth ε-independent problem whose data are embedded by mollification.
#[derive(Clone)]
pub struct CoherenceSetup {
    pub coeffs: CoefficientNet,
    pub data_name: String,
    pub g0: SpaceFn,
    pub forcing: Option<(SpaceFn, Temporal)>,
    pub mollifier: MollifierSpec,
    pub eps: EpsGrid,
    pub t_final: f64,
    /// Resolution of the reference and of every ε-solve.
    pub grid: SpatialGrid,
    pub steps: usize,
    /// Number of equally spaced comparison times in `(0, T]`.
    pub samples: usize,
    pub tolerance: f64,
    pub kappa: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CoherenceRow {
    pub eps: f64,
    /// `sup_t ||u_eps(t) - w(t)||_{H^1}` over the comparison times.
    pub difference: f64,
    /// `(t, ||u_eps(t) - w(t)||_{H^1})`.
    pub history: Vec<(f64, f64)>,
    /// `||g_eps - g0||_{H^1}` plus the forcing difference in `L^2(0,T; H^1)`.
    pub data_difference: f64,
    /// `difference / (sqrt(C2 e^{C1}) data_difference)`.
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CoherenceReport {
    /// `sup_t` H1 gap between the reference and its 2x refinement.
    pub reference_gap: f64,
    pub rows: Vec<CoherenceRow>,
    /// Decay exponent of the differences in ε.
    pub slope: f64,
    pub monotone: bool,
    pub final_difference: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl CoherenceSetup {
    fn problem(&self, data: InitialData, forcing: Forcing, grid: SpatialGrid, steps: usize) -> CauchyProblem {
        let times = (1..=self.samples)
            .map(|k| self.t_final * k as f64 / self.samples as f64)
            .collect();
        CauchyProblem::new(
            self.coeffs.clone(),
            data,
            self.t_final,
            GridPolicy::Fixed(grid),
            TimePolicy::Steps(steps),
        )
        .with_forcing(forcing)
        .with_snapshots(times)
    }

    fn raw_forcing(&self) -> Forcing {
        match &self.forcing {
            None => Forcing::None,
            Some((f, time)) => Forcing::Separable {
                space: InitialData::Analytic {
                    name: "f0".into(),
                    f: f.clone(),
                },
                time: *time,
            },
        }
    }

    fn mollified_forcing(&self) -> Forcing {
        match &self.forcing {
            None => Forcing::None,
            Some((f, time)) => Forcing::Separable {
                space: InitialData::MollifiedAnalytic {
                    name: "f0".into(),
                    f: f.clone(),
                    mollifier: self.mollifier.clone(),
                },
                time: *time,
            },
        }
    }

    fn raw_data(&self) -> InitialData {
        InitialData::Analytic {
            name: self.data_name.clone(),
            f: self.g0.clone(),
        }
    }

    fn validate(&self) -> Result<()> {
        if self
            .coeffs
            .c
            .iter()
            .any(|c| !matches!(c.frequency, crate::solver::FrequencyLaw::Constant(_)))
            || !matches!(self.coeffs.v.frequency, crate::solver::FrequencyLaw::Constant(_))
            || self.coeffs.c.iter().chain([&self.coeffs.v]).any(|c| {
                matches!(
                    c.profile,
                    crate::solver::Profile::Jump { .. } | crate::solver::Profile::Random { .. }
                )
            })
        {
            return Err(Error::InvalidArgument(
                "coherence needs smooth coefficients independent of eps".into(),
            ));
        }
        if self.samples == 0 || !(self.tolerance > 0.0) {
            return Err(Error::InvalidArgument("samples and tolerance must be positive".into()));
        }
        Ok(())
    }
}

fn sup_gap(a: &SolveResult, b: &SolveResult, restrict: usize) -> Result<Vec<(f64, f64)>> {
    a.snapshots
        .iter()
        .zip(&b.snapshots)
        .map(|(x, y)| {
            let y = if restrict > 1 {
                y.field.restrict(restrict)?
            } else {
                y.field.clone()
            };
            Ok((x.t, h1(&x.field.sub(&y)?)))
        })
        .collect()
}

/// Solves the unregularized problem (checked against its 2x refinement) and
/// every mollified ε-problem at the same resolution, then compares them in H1.
pub fn coherence_experiment(setup: &CoherenceSetup) -> Result<CoherenceReport> {
    setup.validate()?;
    let reference = solve(
        &setup.problem(setup.raw_data(), setup.raw_forcing(), setup.grid, setup.steps),
        1.0,
    )?;
    let fine = solve(
        &setup.problem(
            setup.raw_data(),
            setup.raw_forcing(),
            setup.grid.refined(2)?,
            2 * setup.steps,
        ),
        1.0,
    )?;
    let reference_gap = sup_gap(&reference, &fine, 2)?
        .into_iter()
        .map(|(_, g)| g)
        .fold(0.0, f64::max);
    let limit = setup.tolerance / 10.0;
    if !(reference_gap < limit) {
        return Err(Error::Reference {
            gap: reference_gap,
            limit,
        });
    }
    drop(fine);

    let s = setup.coeffs.sample(1.0, &setup.grid)?;
    let (dc, dv) = setup.coeffs.dt_sups(&s);
    let c1 = setup.kappa * setup.t_final / setup.coeffs.c0 * (dc + dv);
    let c2 = setup.kappa * setup.t_final * (setup.coeffs.c0 + setup.coeffs.v.sup_abs(&s.v_profile));
    let amplification = (c2 * c1.exp()).sqrt();
    let g0 = setup.raw_data().realize(1.0, setup.grid)?;
    let f0 = match setup.raw_forcing() {
        Forcing::Separable { space, time } => Some((space.realize(1.0, setup.grid)?, time)),
        Forcing::None => None,
    };

    let rows = setup
        .eps
        .values()
        .par_iter()
        .map(|&eps| {
            let data = InitialData::MollifiedAnalytic {
                name: setup.data_name.clone(),
                f: setup.g0.clone(),
                mollifier: setup.mollifier.clone(),
            };
            let problem = setup.problem(data, setup.mollified_forcing(), setup.grid, setup.steps);
            let r = solve(&problem, eps)?;
            let history = sup_gap(&r, &reference, 1)?;
            let difference = history.iter().map(|h| h.1).fold(0.0, f64::max);
            let mut data_difference = h1(&r.initial.sub(&g0)?);
            if let (Some((f0, time)), Forcing::Separable { space, .. }) = (&f0, &problem.forcing) {
                let fe = space.realize(eps, setup.grid)?;
                let scale = crate::quad::integrate(|t| time.value(t).powi(2), 0.0, setup.t_final, 64).sqrt();
                data_difference += h1(&fe.sub(f0)?) * scale;
            }
            let denom = amplification * data_difference;
            Ok(CoherenceRow {
                eps,
                difference,
                history,
                data_difference,
                ratio: if denom > 0.0 { difference / denom } else { 0.0 },
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let eps: Vec<f64> = rows.iter().map(|r| r.eps).collect();
    let diffs: Vec<f64> = rows.iter().map(|r| r.difference).collect();
    let slope = rate_fit(&eps, &diffs).map_or(f64::NAN, |f| f.slope);
    let monotone = decreasing_with_slack(&diffs, 0.0);
    let final_difference = *diffs.last().expect("eps grid is non-empty");
    Ok(CoherenceReport {
        reference_gap,
        slope,
        monotone,
        final_difference,
        tolerance: setup.tolerance,
        passed: monotone && final_difference < setup.tolerance,
        rows,
    })
}

/// What is paired with the test function.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Observable {
    Field,
    Density,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PairingSeries {
    pub test: String,
    pub t: f64,
    pub values: Vec<C64>,
    /// Geometric mean of `|d_j| / |d_{j+1}|` over successive differences.
    pub contraction: f64,
    pub associated: bool,
    /// Geometric-tail extrapolation, present when `associated`.
    pub limit: Option<C64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolutionAssociation {
    pub eps: Vec<f64>,
    pub observable: Observable,
    pub series: Vec<PairingSeries>,
}

/// Successive differences must shrink by this factor on average.
pub const CONTRACTION: f64 = 1.5;

fn pair_spec(u: &GridFunction, psi: &TestFunctionSpec, observable: Observable) -> C64 {
    let grid = u.grid();
    grid.points_iter()
        .zip(u.values())
        .map(|(p, v)| {
            let w = psi.eval(p);
            match observable {
                Observable::Field => v * w,
                Observable::Density => C64::new(v.norm_sqr() * w, 0.0),
            }
        })
        .sum::<C64>()
        * grid.cell_volume()
}

/// Cauchy test and extrapolated limit of a pairing sequence ordered by decreasing ε.
pub fn extrapolate(values: &[C64]) -> (f64, Option<C64>) {
    let d: Vec<C64> = values.windows(2).map(|w| w[1] - w[0]).collect();
    if d.len() < 2 {
        return (f64::NAN, None);
    }
    if d.iter().all(|x| x.norm() == 0.0) {
        return (f64::INFINITY, values.last().copied());
    }
    let logs: Vec<f64> = d.windows(2).map(|w| (w[0].norm() / w[1].norm()).ln()).collect();
    let contraction = (logs.iter().sum::<f64>() / logs.len() as f64).exp();
    if !(contraction >= CONTRACTION) {
        return (contraction, None);
    }
    let last = *values.last().expect("checked length");
    (contraction, Some(last + d[d.len() - 1] / (contraction - 1.0)))
}

/// Pairings `<u_eps(t), psi>` (or of `|u_eps(t)|^2`) across the ε-grid at the
/// problem's snapshot times, with a Cauchy test per test function and time.
pub fn association_of_solution(
    problem: &CauchyProblem,
    tests: &[TestFunctionSpec],
    eps: &EpsGrid,
    observable: Observable,
) -> Result<SolutionAssociation> {
    if problem.snapshot_times.is_empty() {
        return Err(Error::InvalidArgument("association needs snapshot times".into()));
    }
    let per_eps = eps
        .values()
        .par_iter()
        .map(|&e| {
            let r = solve(problem, e)?;
            Ok(r.snapshots
                .iter()
                .map(|s| {
                    (
                        s.t,
                        tests
                            .iter()
                            .map(|psi| pair_spec(&s.field, psi, observable))
                            .collect::<Vec<_>>(),
                    )
                })
                .collect::<Vec<_>>())
        })
        .collect::<Result<Vec<_>>>()?;
    let mut series = Vec::new();
    for (k, psi) in tests.iter().enumerate() {
        for (s, t) in per_eps[0].iter().map(|x| x.0).enumerate() {
            let values: Vec<C64> = per_eps.iter().map(|row| row[s].1[k]).collect();
            let (contraction, limit) = extrapolate(&values);
            series.push(PairingSeries {
                test: psi.to_string(),
                t,
                values,
                contraction,
                associated: limit.is_some(),
                limit,
            });
        }
    }
    Ok(SolutionAssociation {
        eps: eps.values().to_vec(),
        observable,
        series,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Arc;

    #[test]
    fn extrapolates_geometric_sequence() {
        let v: Vec<C64> = (0..6).map(|j| C64::new(1.0 + 0.5f64.powi(j), 0.0)).collect();
        let (c, lim) = extrapolate(&v);
        assert!((c - 2.0).abs() < 1e-12);
        assert!((lim.unwrap().re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn oscillating_sequence_is_not_associated() {
        let v: Vec<C64> = (0..6)
            .map(|j| C64::new(if j % 2 == 0 { 1.0 } else { -1.0 }, 0.0))
            .collect();
        let (c, lim) = extrapolate(&v);
        assert!((c - 1.0).abs() < 1e-12);
        assert!(lim.is_none());
    }

    #[test]
    fn zero_data_zero_differences() {
        let setup = CoherenceSetup {
            coeffs: CoefficientNet::free(1),
            data_name: "zero".into(),
            g0: Arc::new(|_| C64::new(0.0, 0.0)),
            forcing: None,
            mollifier: MollifierSpec::cauchy_power(1, 4).unwrap(),
            eps: EpsGrid::dyadic(2, 7).unwrap(),
            t_final: 0.1,
            grid: SpatialGrid::new(1, 4.0, 64).unwrap(),
            steps: 4,
            samples: 2,
            tolerance: 1e-3,
            kappa: 1.0,
        };
        let r = coherence_experiment(&setup).unwrap();
        assert_eq!(r.reference_gap, 0.0);
        assert!(r.rows.iter().all(|row| row.difference == 0.0));
        assert!(r.passed);
    }

    #[test]
    fn rough_coefficients_rejected() {
        let mut coeffs = CoefficientNet::free(1);
        coeffs.c[0].profile = crate::solver::Profile::Jump { center: 0.0 };
        coeffs.c[0].amp = 1.0;
        let setup = CoherenceSetup {
            coeffs,
            data_name: "g".into(),
            g0: Arc::new(|_| C64::new(0.0, 0.0)),
            forcing: None,
            mollifier: MollifierSpec::cauchy_power(1, 4).unwrap(),
            eps: EpsGrid::dyadic(2, 7).unwrap(),
            t_final: 0.1,
            grid: SpatialGrid::new(1, 4.0, 64).unwrap(),
            steps: 4,
            samples: 2,
            tolerance: 1e-3,
            kappa: 1.0,
        };
        assert!(coherence_experiment(&setup).is_err());
    }
}
