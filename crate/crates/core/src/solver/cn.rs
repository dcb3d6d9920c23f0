//! Crank–Nicolson time stepping for `d_t u = i (A + V) u + f`, one ε at a time.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::{GridFunction, Point, SpatialGrid, C64};
use crate::measure::{mollify_measure, sqrt_root, Measure};
use crate::mollifier::{mollify_function, MollifierSpec};
use crate::spectral;

use super::coefficients::{CoefficientNet, SampledCoefficients};
use super::linsolve::{bicgstab, CnSystem, CyclicTridiagonal, FourierMean, Preconditioner};
use super::operator::Operator;

pub type SpaceFn = Arc<dyn Fn(Point) -> C64 + Send + Sync>;

/// Initial data (or the spatial factor of a forcing) as an ε-indexed net.
#[derive(Clone)]
pub enum InitialData {
    Zero,
    /// ε-independent closed form.
    Analytic {
        name: String,
        f: SpaceFn,
    },
    /// `mu * rho_eps`; `mu = delta` gives Dirac data.
    Mollified {
        measure: Measure,
        mollifier: MollifierSpec,
    },
    /// `sqrt(mu * rho_eps)`.
    SqrtMollified {
        measure: Measure,
        mollifier: MollifierSpec,
    },
    /// `g0 * rho_eps` for a closed-form `g0`.
    MollifiedAnalytic {
        name: String,
        f: SpaceFn,
        mollifier: MollifierSpec,
    },
    /// `base + eps^q w`.
    Perturbed {
        base: Box<InitialData>,
        q: f64,
        w: SpaceFn,
    },
}

impl fmt::Debug for InitialData {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.describe())
    }
}

impl InitialData {
    pub fn analytic(name: impl Into<String>, f: impl Fn(Point) -> C64 + Send + Sync + 'static) -> Self {
        Self::Analytic {
            name: name.into(),
            f: Arc::new(f),
        }
    }

    pub fn describe(&self) -> String {
        match self {
            Self::Zero => "zero".into(),
            Self::Analytic { name, .. } => name.clone(),
            Self::Mollified { mollifier, .. } => format!("mu*rho_eps[{}]", mollifier.name()),
            Self::SqrtMollified { mollifier, .. } => format!("sqrt(mu*rho_eps)[{}]", mollifier.name()),
            Self::MollifiedAnalytic { name, mollifier, .. } => format!("{name}*rho_eps[{}]", mollifier.name()),
            Self::Perturbed { base, q, .. } => format!("{} + eps^{q} w", base.describe()),
        }
    }

    pub fn realize(&self, eps: f64, grid: SpatialGrid) -> Result<GridFunction> {
        match self {
            Self::Zero => Ok(GridFunction::zeros(grid)),
            Self::Analytic { f, .. } => GridFunction::from_fn(grid, |p| f(p)),
            Self::Mollified { measure, mollifier } => mollify_measure(measure, mollifier, eps, grid),
            Self::SqrtMollified { measure, mollifier } => sqrt_root(&mollify_measure(measure, mollifier, eps, grid)?),
            Self::MollifiedAnalytic { f, mollifier, .. } => mollify_function(&|p| f(p), mollifier, eps, grid),
            Self::Perturbed { base, q, w } => {
                let b = base.realize(eps, grid)?;
                let s = eps.powf(*q);
                let values = b
                    .values()
                    .iter()
                    .zip(grid.points_iter())
                    .map(|(v, p)| v + s * w(p))
                    .collect();
                GridFunction::new(grid, values)
            }
        }
    }
}

/// Time factor of a separable forcing.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Temporal {
    Constant,
    Sin { omega: f64 },
    Cos { omega: f64 },
    Linear,
}

impl Temporal {
    pub fn value(&self, t: f64) -> f64 {
        match *self {
            Temporal::Constant => 1.0,
            Temporal::Sin { omega } => (omega * t).sin(),
            Temporal::Cos { omega } => (omega * t).cos(),
            Temporal::Linear => t,
        }
    }

    pub fn derivative(&self, t: f64) -> f64 {
        match *self {
            Temporal::Constant => 0.0,
            Temporal::Sin { omega } => omega * (omega * t).cos(),
            Temporal::Cos { omega } => -omega * (omega * t).sin(),
            Temporal::Linear => 1.0,
        }
    }
}

/// `f_eps(x, t) = space_eps(x) * time(t)`.
#[derive(Clone, Debug)]
pub enum Forcing {
    None,
    Separable { space: InitialData, time: Temporal },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum GridPolicy {
    Fixed(SpatialGrid),
    /// Smallest power-of-two grid on `[-L, L)^n` with `dx <= eps / per_eps`.
    PerEps {
        dim: usize,
        half_width: f64,
        per_eps: f64,
    },
}

impl GridPolicy {
    pub fn grid_for(&self, eps: f64) -> Result<SpatialGrid> {
        match *self {
            GridPolicy::Fixed(g) => Ok(g),
            GridPolicy::PerEps {
                dim,
                half_width,
                per_eps,
            } => SpatialGrid::with_max_spacing(dim, half_width, eps / per_eps),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TimePolicy {
    Steps(usize),
    /// Smallest step count with `dt <= ratio * dx`.
    MaxDt {
        ratio: f64,
    },
}

impl TimePolicy {
    pub fn steps_for(&self, t_final: f64, grid: &SpatialGrid) -> usize {
        match *self {
            TimePolicy::Steps(n) => n.max(1),
            TimePolicy::MaxDt { ratio } => ((t_final / (ratio * grid.spacing())).ceil() as usize).max(1),
        }
    }
}

/// `d_t u - i sum_k d_k(c_k d_k u) - i V u = f`, `u(0) = g`, on `[0, T]`.
#[derive(Clone, Debug)]
pub struct CauchyProblem {
    pub coeffs: CoefficientNet,
    pub data: InitialData,
    pub forcing: Forcing,
    pub t_final: f64,
    pub grid: GridPolicy,
    pub time: TimePolicy,
    /// Times at which full snapshots are kept (rounded to the nearest step).
    pub snapshot_times: Vec<f64>,
    /// Relative residual target of the linear solves.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl CauchyProblem {
    pub fn new(coeffs: CoefficientNet, data: InitialData, t_final: f64, grid: GridPolicy, time: TimePolicy) -> Self {
        Self {
            coeffs,
            data,
            forcing: Forcing::None,
            t_final,
            grid,
            time,
            snapshot_times: Vec::new(),
            tolerance: 1e-12,
            max_iterations: 500,
        }
    }

    pub fn with_forcing(mut self, forcing: Forcing) -> Self {
        self.forcing = forcing;
        self
    }

    pub fn with_snapshots(mut self, times: Vec<f64>) -> Self {
        self.snapshot_times = times;
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.t_final > 0.0 && self.t_final.is_finite()) {
            return Err(Error::InvalidArgument(format!("T = {} must be positive", self.t_final)));
        }
        if let Some(t) = self
            .snapshot_times
            .iter()
            .find(|t| !(**t >= 0.0 && **t <= self.t_final))
        {
            return Err(Error::InvalidArgument(format!("snapshot time {t} outside [0, T]")));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NormRow {
    pub t: f64,
    pub l2: f64,
    pub h1: f64,
    pub h2: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SolverStats {
    pub total_iterations: usize,
    pub max_iterations: usize,
    pub max_residual: f64,
}

#[derive(Clone, Debug)]
pub struct Snapshot {
    pub t: f64,
    pub field: GridFunction,
}

#[derive(Clone, Debug)]
pub struct SolveResult {
    pub eps: f64,
    pub grid: SpatialGrid,
    pub dt: f64,
    pub steps: usize,
    pub initial: GridFunction,
    pub final_state: GridFunction,
    pub snapshots: Vec<Snapshot>,
    pub norm_history: Vec<NormRow>,
    pub stats: SolverStats,
}

impl SolveResult {
    pub fn sup_h1(&self) -> f64 {
        self.norm_history.iter().map(|r| r.h1).fold(0.0, f64::max)
    }

    /// Largest relative change of the L2 norm over a single step.
    pub fn max_step_drift(&self) -> f64 {
        self.norm_history
            .windows(2)
            .map(|w| (w[1].l2 - w[0].l2).abs() / w[0].l2.max(f64::MIN_POSITIVE))
            .fold(0.0, f64::max)
    }
}

enum Precond {
    Tridiagonal(CyclicTridiagonal),
    Fourier(FourierMean),
}

impl Precond {
    fn build(op: &Operator, alpha: f64) -> Self {
        if op.grid().dim() == 1 {
            Precond::Tridiagonal(CyclicTridiagonal::for_cn(op, alpha))
        } else {
            Precond::Fourier(FourierMean::for_cn(op, alpha))
        }
    }

    fn as_dyn(&self) -> &dyn Preconditioner {
        match self {
            Precond::Tridiagonal(p) => p,
            Precond::Fourier(p) => p,
        }
    }
}

/// Advances one ε-problem step by step; the workspace belongs to this stepper.
pub struct Stepper<'a> {
    problem: &'a CauchyProblem,
    eps: f64,
    grid: SpatialGrid,
    dt: f64,
    steps: usize,
    step: usize,
    sampled: SampledCoefficients,
    stationary: Option<(Operator, Precond)>,
    forcing: Option<(Vec<C64>, Temporal)>,
    u: Vec<C64>,
    rhs: Vec<C64>,
    hu: Vec<C64>,
    next: Vec<C64>,
    stats: SolverStats,
}

impl<'a> Stepper<'a> {
    pub fn new(problem: &'a CauchyProblem, eps: f64) -> Result<Self> {
        let grid = problem.grid.grid_for(eps)?;
        let u0 = problem.data.realize(eps, grid)?;
        Self::with_initial(problem, eps, u0)
    }

    /// Uses `u0` in place of the problem's data net.
    pub fn with_initial(problem: &'a CauchyProblem, eps: f64, u0: GridFunction) -> Result<Self> {
        problem.validate()?;
        let grid = problem.grid.grid_for(eps)?;
        if *u0.grid() != grid {
            return Err(Error::GridMismatch);
        }
        let sampled = problem.coeffs.sample(eps, &grid)?;
        let steps = problem.time.steps_for(problem.t_final, &grid);
        let dt = problem.t_final / steps as f64;
        let stationary = if problem.coeffs.c.iter().all(|f| f.is_stationary()) && problem.coeffs.v.is_stationary() {
            let op = Operator::from_sampled(grid, &problem.coeffs, &sampled, 0.0)?;
            let pre = Precond::build(&op, 0.5 * dt);
            Some((op, pre))
        } else {
            None
        };
        let forcing = match &problem.forcing {
            Forcing::None => None,
            Forcing::Separable { space, time } => Some((space.realize(eps, grid)?.into_values(), *time)),
        };
        let n = grid.len();
        Ok(Self {
            problem,
            eps,
            grid,
            dt,
            steps,
            step: 0,
            sampled,
            stationary,
            forcing,
            u: u0.into_values(),
            rhs: vec![C64::new(0.0, 0.0); n],
            hu: vec![C64::new(0.0, 0.0); n],
            next: vec![C64::new(0.0, 0.0); n],
            stats: SolverStats::default(),
        })
    }

    pub fn grid(&self) -> SpatialGrid {
        self.grid
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn done(&self) -> bool {
        self.step >= self.steps
    }

    pub fn time(&self) -> f64 {
        self.step as f64 * self.dt
    }

    pub fn state(&self) -> &[C64] {
        &self.u
    }

    pub fn current(&self) -> GridFunction {
        GridFunction::from_raw(self.grid, self.u.clone())
    }

    pub fn stats(&self) -> SolverStats {
        self.stats
    }

    /// One Crank–Nicolson step with coefficients and forcing at `t + dt/2`.
    pub fn advance(&mut self) -> Result<()> {
        let t_mid = (self.step as f64 + 0.5) * self.dt;
        let alpha = 0.5 * self.dt;
        let owned;
        let (op, pre) = match &self.stationary {
            Some((op, pre)) => (op, pre),
            None => {
                let op = Operator::from_sampled(self.grid, &self.problem.coeffs, &self.sampled, t_mid)?;
                let pre = Precond::build(&op, alpha);
                owned = (op, pre);
                (&owned.0, &owned.1)
            }
        };
        op.apply_into(&self.u, &mut self.hu);
        let ia = C64::new(0.0, alpha);
        for i in 0..self.u.len() {
            self.rhs[i] = self.u[i] + ia * self.hu[i];
        }
        if let Some((f, time)) = &self.forcing {
            let s = self.dt * time.value(t_mid);
            for (r, fi) in self.rhs.iter_mut().zip(f) {
                *r += s * fi;
            }
        }
        let system = CnSystem { op, alpha };
        let info = bicgstab(
            &system,
            pre.as_dyn(),
            &self.rhs,
            &mut self.next,
            self.problem.tolerance,
            self.problem.max_iterations,
        );
        self.stats.total_iterations += info.iterations;
        self.stats.max_iterations = self.stats.max_iterations.max(info.iterations);
        self.stats.max_residual = self.stats.max_residual.max(info.relative_residual);
        if !info.converged {
            return Err(Error::LinearSolve {
                step: self.step,
                iterations: info.iterations,
                residual: info.relative_residual,
            });
        }
        std::mem::swap(&mut self.u, &mut self.next);
        self.step += 1;
        Ok(())
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }
}

pub(crate) fn norm_row(t: f64, u: &GridFunction) -> NormRow {
    let h = spectral::sobolev_norms(u, 2);
    NormRow {
        t,
        l2: crate::grid::norm_l2(u),
        h1: h[1],
        h2: h[2],
    }
}

fn run(mut stepper: Stepper<'_>, problem: &CauchyProblem) -> Result<SolveResult> {
    let snap_steps: Vec<usize> = problem
        .snapshot_times
        .iter()
        .map(|t| (t / stepper.dt).round() as usize)
        .collect();
    let initial = stepper.current();
    let mut history = vec![norm_row(0.0, &initial)];
    let mut snapshots = Vec::new();
    let take = |step: usize, t: f64, u: &GridFunction, snaps: &mut Vec<Snapshot>| {
        for _ in snap_steps.iter().filter(|s| **s == step) {
            snaps.push(Snapshot { t, field: u.clone() });
        }
    };
    take(0, 0.0, &initial, &mut snapshots);
    while !stepper.done() {
        stepper.advance()?;
        let u = stepper.current();
        history.push(norm_row(stepper.time(), &u));
        take(stepper.step, stepper.time(), &u, &mut snapshots);
    }
    Ok(SolveResult {
        eps: stepper.eps,
        grid: stepper.grid,
        dt: stepper.dt,
        steps: stepper.steps,
        final_state: stepper.current(),
        initial,
        snapshots,
        norm_history: history,
        stats: stepper.stats,
    })
}

/// Solves the ε-problem on `[0, T]`, recording norms after every step.
pub fn solve(problem: &CauchyProblem, eps: f64) -> Result<SolveResult> {
    run(Stepper::new(problem, eps)?, problem)
}

/// As [`solve`] but starting from explicit data on the problem's grid.
pub fn solve_from(problem: &CauchyProblem, eps: f64, u0: GridFunction) -> Result<SolveResult> {
    run(Stepper::with_initial(problem, eps, u0)?, problem)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::coefficients::{FieldSpec, FrequencyLaw, Profile};
    use std::f64::consts::PI;

    fn grid1(m: usize) -> SpatialGrid {
        SpatialGrid::new(1, 1.0, m).unwrap()
    }

    #[test]
    fn plane_wave_matches_cn_amplification() {
        let g = grid1(64);
        let k = 3.0 * PI;
        let data = InitialData::analytic("plane", move |p| C64::new(0.0, k * p[0]).exp());
        let p = CauchyProblem::new(
            CoefficientNet::free(1),
            data,
            0.5,
            GridPolicy::Fixed(g),
            TimePolicy::Steps(50),
        );
        let r = solve(&p, 1.0).unwrap();
        let dx = g.spacing();
        let lam = -4.0 / (dx * dx) * (0.5 * k * dx).sin().powi(2);
        let a = 0.5 * r.dt * lam;
        let amp = C64::new(1.0, a) / C64::new(1.0, -a);
        let factor = amp.powu(50);
        for (v, x) in r.final_state.values().iter().zip(g.points_iter()) {
            let expect = factor * C64::new(0.0, k * x[0]).exp();
            assert!((v - expect).norm() < 1e-10);
            assert!((v.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_potential_rotates_constants() {
        let g = grid1(32);
        let net = CoefficientNet {
            c: vec![FieldSpec::stationary(2.0, 1.0, Profile::Jump { center: 0.0 })],
            v: FieldSpec::constant(1.5),
            c0: 1.0,
        };
        let data = InitialData::analytic("one", |_| C64::new(1.0, 0.0));
        let p = CauchyProblem::new(net, data, 1.0, GridPolicy::Fixed(g), TimePolicy::Steps(100));
        let r = solve(&p, 0.1).unwrap();
        // CN phase for a scalar eigenvalue v: ((1 + i v dt/2) / (1 - i v dt/2))^N
        let a = 0.5 * 0.01 * 1.5;
        let expect = (C64::new(1.0, a) / C64::new(1.0, -a)).powu(100);
        for v in r.final_state.values() {
            assert!((v - expect).norm() < 1e-12);
        }
        assert!((expect - C64::new(0.0, 1.5).exp()).norm() < 1e-4);
    }

    #[test]
    fn unitary_with_time_dependent_rough_coefficients() {
        let g = grid1(128);
        let net = CoefficientNet {
            c: vec![FieldSpec {
                base: 1.0,
                amp: 2.0,
                profile: Profile::Random { seed: 5, cell: 0.05 },
                modulation: 0.3,
                frequency: FrequencyLaw::Log(3.0),
            }],
            v: FieldSpec::stationary(0.0, -4.0, Profile::Random { seed: 6, cell: 0.1 }),
            c0: 0.3,
        };
        let data = InitialData::analytic("gauss", |p| C64::new((-20.0 * p[0] * p[0]).exp(), 0.0));
        let p = CauchyProblem::new(net, data, 0.2, GridPolicy::Fixed(g), TimePolicy::Steps(100));
        let r = solve(&p, 0.05).unwrap();
        assert!(r.max_step_drift() < 1e-10, "{}", r.max_step_drift());
        assert_eq!(r.norm_history.len(), 101);
    }

    #[test]
    fn two_dimensional_solve_is_unitary() {
        let g = SpatialGrid::new(2, 1.0, 32).unwrap();
        let net = CoefficientNet {
            c: vec![
                FieldSpec::stationary(1.0, 0.5, Profile::Jump { center: 0.1 }),
                FieldSpec::stationary(
                    1.5,
                    0.5,
                    Profile::Smooth {
                        center: [0.0, 0.0],
                        width: 0.3,
                    },
                ),
            ],
            v: FieldSpec::constant(0.0),
            c0: 1.0,
        };
        let data = InitialData::analytic("g2", |p| C64::new((-10.0 * (p[0] * p[0] + p[1] * p[1])).exp(), 0.0));
        let p = CauchyProblem::new(net, data, 0.05, GridPolicy::Fixed(g), TimePolicy::Steps(20));
        let r = solve(&p, 0.1).unwrap();
        assert!(r.max_step_drift() < 1e-10);
    }

    #[test]
    fn zero_data_stays_zero() {
        let g = grid1(32);
        let p = CauchyProblem::new(
            CoefficientNet::free(1),
            InitialData::Zero,
            1.0,
            GridPolicy::Fixed(g),
            TimePolicy::Steps(10),
        );
        let r = solve(&p, 0.5).unwrap();
        assert!(r.final_state.values().iter().all(|v| v.norm() == 0.0));
        assert_eq!(r.sup_h1(), 0.0);
    }

    #[test]
    fn snapshots_at_requested_times() {
        let g = grid1(32);
        let data = InitialData::analytic("g", |p| C64::new((-p[0] * p[0] * 10.0).exp(), 0.0));
        let p = CauchyProblem::new(
            CoefficientNet::free(1),
            data,
            1.0,
            GridPolicy::Fixed(g),
            TimePolicy::Steps(10),
        )
        .with_snapshots(vec![0.0, 0.5, 1.0]);
        let r = solve(&p, 0.5).unwrap();
        let times: Vec<f64> = r.snapshots.iter().map(|s| s.t).collect();
        assert_eq!(times.len(), 3);
        assert!((times[1] - 0.5).abs() < 1e-12);
        assert!(CauchyProblem {
            snapshot_times: vec![2.0],
            ..p
        }
        .validate()
        .is_err());
    }

    #[test]
    fn per_eps_grid_policy() {
        let pol = GridPolicy::PerEps {
            dim: 1,
            half_width: 2.0,
            per_eps: 8.0,
        };
        let g = pol.grid_for(2f64.powi(-9)).unwrap();
        assert_eq!(g.points(), 16384);
        assert_eq!(TimePolicy::MaxDt { ratio: 1.0 }.steps_for(0.25, &g), 1024);
    }
}
