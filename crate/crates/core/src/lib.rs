//! Numerical toolkit for ε-regularized generalized functions: regularization
//! nets and their asymptotic classification, square roots of probability
//! measures, and Schrödinger-type Cauchy problems with regularized
//! coefficients solved per ε.

pub mod error;
pub mod fit;
pub mod free;
pub mod grid;
pub mod io;
pub mod lab;
pub mod measure;
pub mod mollifier;
pub mod quad;
pub mod regnet;
pub mod solver;
pub mod spectral;
pub mod testfn;

pub use error::{Error, Result};
pub use grid::{derivative, norm_hk, norm_l2, norm_linf, pair, GridFunction, Point, SpatialGrid, C64};
pub use measure::Measure;
pub use mollifier::{scaled_mollifier, MollifierSpec};
pub use regnet::{AsymptoticFit, EpsGrid, EpsNet, Seminorm, Verdict};
pub use solver::{solve, CauchyProblem, CoefficientNet, FieldSpec, GridPolicy, InitialData, SolveResult, TimePolicy};
pub use testfn::{TestFunction, TestFunctionSpec};

/// Crate version, recorded in experiment manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
