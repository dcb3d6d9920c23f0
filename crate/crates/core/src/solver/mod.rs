//! Variable-coefficient Schrödinger solver for a single ε at a time.

pub mod audit;
pub mod cn;
pub mod coefficients;
pub mod linsolve;
pub mod operator;

pub use audit::{
    energy_audit, energy_sweep, uniqueness_probe, EnergyReport, EnergyRow, ProbeReport, ProbeRow, PROBE_SLACK,
};
pub use cn::{
    solve, solve_from, CauchyProblem, Forcing, GridPolicy, InitialData, NormRow, SolveResult, SolverStats, SpaceFn,
    Stepper, Temporal, TimePolicy,
};
pub use coefficients::{CoefficientNet, FieldSpec, FrequencyLaw, Profile, SampledCoefficients};
pub use operator::{build_operator, coercivity_check, discrete_h1_sq, CoercivityReport, Operator};
