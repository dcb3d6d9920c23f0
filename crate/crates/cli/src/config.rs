//! Experiment configuration files (TOML) and their validation.
//!
//! Every semantic error is reported with the 1-based line of the offending
//! value, matching the line numbers of TOML syntax errors.

use std::fmt;
use std::ops::Range;
use std::sync::Arc;

use colombeau_core::solver::{Forcing, FrequencyLaw, Profile};
use colombeau_core::{
    CauchyProblem, CoefficientNet, EpsGrid, FieldSpec, GridPolicy, InitialData, Measure, MollifierSpec, SpatialGrid,
    TestFunctionSpec, TimePolicy, C64,
};
use serde::Deserialize;
use toml::Spanned;

/// A validation failure anchored at a line of the config file.
#[derive(Debug, Clone, PartialEq)]
pub struct SchemaError {
    pub line: usize,
    pub message: String,
}

impl fmt::Display for SchemaError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

impl std::error::Error for SchemaError {}

fn line_at(src: &str, offset: usize) -> usize {
    src[..offset.min(src.len())].matches('\n').count() + 1
}

/// Resolves spans to line numbers against the original text.
struct Anchor<'a>(&'a str);

impl Anchor<'_> {
    fn err(&self, span: Range<usize>, message: impl Into<String>) -> SchemaError {
        SchemaError {
            line: line_at(self.0, span.start),
            message: message.into(),
        }
    }

    fn wrap<T, E: fmt::Display>(&self, span: Range<usize>, r: Result<T, E>) -> Result<T, SchemaError> {
        r.map_err(|e| self.err(span, e.to_string()))
    }
}

#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    SqrtMeasure,
    SchrodingerSweep,
    FreeExample,
    Coherence,
    Association,
    Selftest,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Self::SqrtMeasure => "sqrt_measure",
            Self::SchrodingerSweep => "schrodinger_sweep",
            Self::FreeExample => "free_example",
            Self::Coherence => "coherence",
            Self::Association => "association",
            Self::Selftest => "selftest",
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    experiment: Spanned<Experiment>,
    seed: Option<u64>,
    eps: Option<Spanned<RawEps>>,
    problem: Option<Spanned<RawProblem>>,
    sqrt_measure: Option<Spanned<RawSqrtMeasure>>,
    schrodinger_sweep: Option<Spanned<RawSweep>>,
    free_example: Option<Spanned<RawFree>>,
    coherence: Option<Spanned<RawCoherence>>,
    association: Option<Spanned<RawAssociation>>,
    selftest: Option<Spanned<RawSelftest>>,
}

/// Exactly one of the three forms.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEps {
    /// `[first, last]`: `2^-first, .., 2^-last`.
    dyadic: Option<Spanned<[i32; 2]>>,
    values: Option<Spanned<Vec<f64>>>,
    geometric: Option<Spanned<RawGeometric>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGeometric {
    start: f64,
    end: f64,
    count: usize,
}

#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
enum MollifierKind {
    Standard,
    SqrtFriendly,
}

#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
enum TestKind {
    Bump,
    LinearBump,
    OscillatoryBump,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTest {
    kind: TestKind,
    center: Vec<f64>,
    radius: f64,
    frequency: Option<f64>,
    #[serde(default)]
    axis: usize,
}

#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
enum MeasureKind {
    Dirac,
    TwoAtom,
    Uniform,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMeasure {
    kind: MeasureKind,
    /// Dirac location (1 or 2 coordinates) or the two atoms.
    #[serde(default)]
    points: Vec<f64>,
    /// Support `[lo, hi]` of the uniform measure.
    interval: Option<[f64; 2]>,
}

#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
enum ProfileKind {
    Flat,
    Jump,
    Smooth,
    Wave,
    Random,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProfile {
    kind: ProfileKind,
    center: Option<Vec<f64>>,
    width: Option<f64>,
    wavenumber: Option<f64>,
    cell: Option<f64>,
    /// Defaults to the run seed plus the field index.
    seed: Option<u64>,
}

#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
enum LawKind {
    Constant,
    Log,
    Power,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFrequency {
    law: LawKind,
    omega: f64,
    p: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawField {
    base: f64,
    #[serde(default)]
    amp: f64,
    profile: Option<Spanned<RawProfile>>,
    #[serde(default)]
    modulation: f64,
    frequency: Option<Spanned<RawFrequency>>,
}

#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
enum DataKind {
    Dirac,
    SqrtDirac,
    Gaussian,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawData {
    kind: DataKind,
    mollifier: Option<MollifierKind>,
    /// Gaussian `exp(-|x|^2 / width^2 + i k x_0)`.
    width: Option<f64>,
    #[serde(default)]
    wavenumber: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProblem {
    dim: usize,
    t_final: f64,
    half_width: f64,
    /// Fixed grid size; mutually exclusive with `per_eps`.
    points: Option<usize>,
    /// Power-of-two grid with `dx <= eps / per_eps`.
    per_eps: Option<f64>,
    steps: Option<usize>,
    /// `dt <= dt_ratio * dx`.
    dt_ratio: Option<f64>,
    #[serde(default)]
    snapshot_times: Vec<f64>,
    c0: f64,
    c: Vec<Spanned<RawField>>,
    v: Spanned<RawField>,
    data: Spanned<RawData>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSqrtMeasure {
    dim: usize,
    mollifier: MollifierKind,
    measure: Spanned<RawMeasure>,
    half_width: f64,
    points: usize,
    k_radius: f64,
    tolerance: f64,
    tests: Vec<Spanned<RawTest>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSweep {
    #[serde(default = "default_residual")]
    residual_threshold: f64,
    /// Order of the uniqueness probe perturbation; no probe when absent.
    probe_q: Option<f64>,
    /// ε values of the probe; defaults to the sweep grid. The perturbation
    /// `eps^q` must stay well above the linear-solve tolerance.
    probe_eps: Option<Spanned<Vec<f64>>>,
    #[serde(default = "default_drift")]
    drift_limit: f64,
    #[serde(default = "default_true")]
    write_snapshots: bool,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFree {
    dim: usize,
    #[serde(default = "default_sqrt_friendly")]
    mollifier: MollifierKind,
    times: Vec<f64>,
    tests: Vec<Spanned<RawTest>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCoherence {
    /// Data `g0 = exp(-x^2 / width^2)`.
    width: f64,
    /// Cauchy power of the data mollifier.
    mollifier_power: u32,
    t_final: f64,
    half_width: f64,
    points: usize,
    steps: usize,
    samples: usize,
    tolerance: f64,
    #[serde(default = "default_min_slope")]
    min_slope: f64,
    #[serde(default = "default_kappa")]
    kappa: f64,
    c0: f64,
    c: Spanned<RawField>,
    v: Spanned<RawField>,
}

#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum ObservableKind {
    Field,
    Density,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAssociation {
    observable: ObservableKind,
    tests: Vec<Spanned<RawTest>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSelftest {}

fn default_residual() -> f64 {
    0.1
}
fn default_drift() -> f64 {
    1e-10
}
fn default_true() -> bool {
    true
}
fn default_sqrt_friendly() -> MollifierKind {
    MollifierKind::SqrtFriendly
}
fn default_min_slope() -> f64 {
    0.9
}
fn default_kappa() -> f64 {
    1.0
}

/// Validated, ready-to-run configuration.
#[derive(Clone, Debug)]
pub struct Config {
    pub experiment: Experiment,
    pub seed: Option<u64>,
    pub spec: ExperimentSpec,
}

#[derive(Clone, Debug)]
pub enum ExperimentSpec {
    SqrtMeasure(SqrtMeasureSpec),
    SchrodingerSweep(SweepSpec),
    FreeExample(FreeSpec),
    Coherence(CoherenceSpec),
    Association(AssociationSpec),
    Selftest,
}

#[derive(Clone, Debug)]
pub struct SqrtMeasureSpec {
    pub eps: EpsGrid,
    pub mollifier: MollifierSpec,
    pub measure: Measure,
    pub grid: SpatialGrid,
    pub k_radius: f64,
    pub tolerance: f64,
    pub tests: Vec<TestFunctionSpec>,
}

#[derive(Clone, Debug)]
pub struct SweepSpec {
    pub eps: EpsGrid,
    /// Built once the seed is known.
    pub problem: ProblemSpec,
    pub residual_threshold: f64,
    pub probe_q: Option<f64>,
    pub probe_eps: EpsGrid,
    pub drift_limit: f64,
    pub write_snapshots: bool,
}

#[derive(Clone, Debug)]
pub struct FreeSpec {
    pub eps: EpsGrid,
    pub mollifier: MollifierSpec,
    pub times: Vec<f64>,
    pub tests: Vec<TestFunctionSpec>,
}

#[derive(Clone, Debug)]
pub struct CoherenceSpec {
    pub eps: EpsGrid,
    pub width: f64,
    pub mollifier: MollifierSpec,
    pub t_final: f64,
    pub grid: SpatialGrid,
    pub steps: usize,
    pub samples: usize,
    pub tolerance: f64,
    pub min_slope: f64,
    pub kappa: f64,
    pub coeffs: CoefficientsSpec,
}

#[derive(Clone, Debug)]
pub struct AssociationSpec {
    pub eps: EpsGrid,
    pub problem: ProblemSpec,
    pub observable: ObservableKind,
    pub tests: Vec<TestFunctionSpec>,
}

/// Coefficient fields whose random profiles still need a seed.
#[derive(Clone, Debug)]
pub struct CoefficientsSpec {
    pub c0: f64,
    pub c: Vec<FieldSpec>,
    pub v: FieldSpec,
    /// Field index (c first, v last) of every unseeded random profile.
    pub unseeded: Vec<usize>,
}

impl CoefficientsSpec {
    pub fn build(&self, seed: u64) -> CoefficientNet {
        let mut fields: Vec<FieldSpec> = self.c.iter().cloned().chain([self.v.clone()]).collect();
        for &k in &self.unseeded {
            if let Profile::Random { seed: s, .. } = &mut fields[k].profile {
                *s = seed.wrapping_add(k as u64);
            }
        }
        let v = fields.pop().expect("v is always present");
        CoefficientNet {
            c: fields,
            v,
            c0: self.c0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ProblemSpec {
    pub coeffs: CoefficientsSpec,
    pub data: InitialData,
    pub t_final: f64,
    pub grid: GridPolicy,
    pub time: TimePolicy,
    pub snapshot_times: Vec<f64>,
}

impl ProblemSpec {
    pub fn build(&self, seed: u64) -> CauchyProblem {
        CauchyProblem::new(
            self.coeffs.build(seed),
            self.data.clone(),
            self.t_final,
            self.grid,
            self.time,
        )
        .with_forcing(Forcing::None)
        .with_snapshots(self.snapshot_times.clone())
    }
}

pub fn parse(src: &str) -> Result<Config, SchemaError> {
    let raw: RawConfig = toml::from_str(src).map_err(|e| SchemaError {
        line: e.span().map_or(1, |s| line_at(src, s.start)),
        message: e.message().trim().to_string(),
    })?;
    let a = Anchor(src);
    let experiment = *raw.experiment.get_ref();
    let top = raw.experiment.span();

    let sections: [(Experiment, Option<Range<usize>>); 6] = [
        (Experiment::SqrtMeasure, raw.sqrt_measure.as_ref().map(|s| s.span())),
        (
            Experiment::SchrodingerSweep,
            raw.schrodinger_sweep.as_ref().map(|s| s.span()),
        ),
        (Experiment::FreeExample, raw.free_example.as_ref().map(|s| s.span())),
        (Experiment::Coherence, raw.coherence.as_ref().map(|s| s.span())),
        (Experiment::Association, raw.association.as_ref().map(|s| s.span())),
        (Experiment::Selftest, raw.selftest.as_ref().map(|s| s.span())),
    ];
    for (e, span) in &sections {
        if let Some(span) = span {
            if *e != experiment {
                return Err(a.err(
                    span.clone(),
                    format!(
                        "section [{}] does not belong to experiment `{}`",
                        e.name(),
                        experiment.name()
                    ),
                ));
            }
        }
    }
    let needs_problem = matches!(experiment, Experiment::SchrodingerSweep | Experiment::Association);
    if let (false, Some(p)) = (needs_problem, &raw.problem) {
        return Err(a.err(
            p.span(),
            format!("[problem] is not used by experiment `{}`", experiment.name()),
        ));
    }
    let needs_eps = experiment != Experiment::Selftest;
    let eps = match (&raw.eps, needs_eps) {
        (Some(e), true) => Some(eps_grid(&a, e)?),
        (None, true) => return Err(a.err(top, "missing [eps] table")),
        (Some(e), false) => return Err(a.err(e.span(), "selftest takes no [eps] table")),
        (None, false) => None,
    };
    let missing = |name: &str| a.err(top.clone(), format!("missing [{name}] table"));

    let spec = match experiment {
        Experiment::SqrtMeasure => {
            let s = raw.sqrt_measure.as_ref().ok_or_else(|| missing("sqrt_measure"))?;
            ExperimentSpec::SqrtMeasure(sqrt_measure(&a, s, eps.expect("checked"))?)
        }
        Experiment::SchrodingerSweep => {
            let s = raw
                .schrodinger_sweep
                .as_ref()
                .ok_or_else(|| missing("schrodinger_sweep"))?;
            let p = raw.problem.as_ref().ok_or_else(|| missing("problem"))?;
            let r = s.get_ref();
            if !(r.residual_threshold > 0.0) || !(r.drift_limit > 0.0) {
                return Err(a.err(s.span(), "residual_threshold and drift_limit must be positive"));
            }
            if let Some(q) = r.probe_q {
                if !(q >= 0.0 && q.is_finite()) {
                    return Err(a.err(s.span(), format!("probe_q = {q} must be finite and >= 0")));
                }
            }
            let eps = eps.expect("checked");
            let probe_eps = match &r.probe_eps {
                Some(v) => a.wrap(v.span(), EpsGrid::new(v.get_ref().clone()))?,
                None => eps.clone(),
            };
            ExperimentSpec::SchrodingerSweep(SweepSpec {
                eps,
                probe_eps,
                problem: problem(&a, p)?,
                residual_threshold: r.residual_threshold,
                probe_q: r.probe_q,
                drift_limit: r.drift_limit,
                write_snapshots: r.write_snapshots,
            })
        }
        Experiment::FreeExample => {
            let s = raw.free_example.as_ref().ok_or_else(|| missing("free_example"))?;
            ExperimentSpec::FreeExample(free(&a, s, eps.expect("checked"))?)
        }
        Experiment::Coherence => {
            let s = raw.coherence.as_ref().ok_or_else(|| missing("coherence"))?;
            ExperimentSpec::Coherence(coherence(&a, s, eps.expect("checked"))?)
        }
        Experiment::Association => {
            let s = raw.association.as_ref().ok_or_else(|| missing("association"))?;
            let p = raw.problem.as_ref().ok_or_else(|| missing("problem"))?;
            let problem = problem(&a, p)?;
            if problem.snapshot_times.is_empty() {
                return Err(a.err(p.span(), "association needs snapshot_times"));
            }
            let dim = match problem.grid {
                GridPolicy::Fixed(g) => g.dim(),
                GridPolicy::PerEps { dim, .. } => dim,
            };
            ExperimentSpec::Association(AssociationSpec {
                eps: eps.expect("checked"),
                tests: tests(&a, &s.get_ref().tests, dim)?,
                observable: s.get_ref().observable,
                problem,
            })
        }
        Experiment::Selftest => ExperimentSpec::Selftest,
    };
    Ok(Config {
        experiment,
        seed: raw.seed,
        spec,
    })
}

fn eps_grid(a: &Anchor<'_>, e: &Spanned<RawEps>) -> Result<EpsGrid, SchemaError> {
    let r = e.get_ref();
    match (&r.dyadic, &r.values, &r.geometric) {
        (Some(d), None, None) => {
            let [first, last] = *d.get_ref();
            a.wrap(d.span(), EpsGrid::dyadic(first, last))
        }
        (None, Some(v), None) => a.wrap(v.span(), EpsGrid::new(v.get_ref().clone())),
        (None, None, Some(g)) => {
            let g_ref = g.get_ref();
            a.wrap(g.span(), EpsGrid::geometric(g_ref.start, g_ref.end, g_ref.count))
        }
        _ => Err(a.err(e.span(), "[eps] needs exactly one of `dyadic`, `values`, `geometric`")),
    }
}

fn mollifier(
    a: &Anchor<'_>,
    span: Range<usize>,
    kind: MollifierKind,
    dim: usize,
) -> Result<MollifierSpec, SchemaError> {
    a.wrap(
        span,
        match kind {
            MollifierKind::Standard => MollifierSpec::standard(dim),
            MollifierKind::SqrtFriendly => MollifierSpec::sqrt_friendly(dim),
        },
    )
}

fn check_dim(a: &Anchor<'_>, span: Range<usize>, dim: usize) -> Result<(), SchemaError> {
    if dim == 1 || dim == 2 {
        Ok(())
    } else {
        Err(a.err(span, format!("dim = {dim}; only 1 and 2 are supported")))
    }
}

fn point(a: &Anchor<'_>, span: Range<usize>, v: &[f64], dim: usize, what: &str) -> Result<[f64; 2], SchemaError> {
    if v.len() != dim {
        return Err(a.err(span, format!("{what} has {} coordinates, expected {dim}", v.len())));
    }
    Ok([v[0], v.get(1).copied().unwrap_or(0.0)])
}

fn tests(a: &Anchor<'_>, raw: &[Spanned<RawTest>], dim: usize) -> Result<Vec<TestFunctionSpec>, SchemaError> {
    if raw.is_empty() {
        return Err(SchemaError {
            line: 1,
            message: "at least one test function is required".into(),
        });
    }
    raw.iter()
        .map(|t| {
            let span = t.span();
            let r = t.get_ref();
            let center = point(a, span.clone(), &r.center, dim, "test center")?;
            if !(r.radius > 0.0) {
                return Err(a.err(span, format!("test radius {} must be positive", r.radius)));
            }
            if r.axis >= dim {
                return Err(a.err(span, format!("axis {} out of range for dim {dim}", r.axis)));
            }
            Ok(match r.kind {
                TestKind::Bump => TestFunctionSpec::Bump {
                    center,
                    radius: r.radius,
                },
                TestKind::LinearBump => TestFunctionSpec::LinearBump {
                    center,
                    radius: r.radius,
                    axis: r.axis,
                },
                TestKind::OscillatoryBump => TestFunctionSpec::OscillatoryBump {
                    center,
                    radius: r.radius,
                    frequency: r
                        .frequency
                        .ok_or_else(|| a.err(span.clone(), "oscillatory_bump needs `frequency`"))?,
                    axis: r.axis,
                },
            })
        })
        .collect()
}

fn sqrt_measure(a: &Anchor<'_>, s: &Spanned<RawSqrtMeasure>, eps: EpsGrid) -> Result<SqrtMeasureSpec, SchemaError> {
    let span = s.span();
    let r = s.get_ref();
    check_dim(a, span.clone(), r.dim)?;
    let m = r.measure.get_ref();
    let mspan = r.measure.span();
    let measure = match m.kind {
        MeasureKind::Dirac => Measure::dirac(r.dim, point(a, mspan.clone(), &m.points, r.dim, "dirac location")?),
        MeasureKind::TwoAtom => {
            if r.dim != 1 || m.points.len() != 2 {
                return Err(a.err(mspan, "two_atom needs dim = 1 and `points = [a, b]`"));
            }
            Measure::two_atom(m.points[0], m.points[1])
        }
        MeasureKind::Uniform => {
            let [lo, hi] = m
                .interval
                .filter(|_| r.dim == 1)
                .ok_or_else(|| a.err(mspan.clone(), "uniform needs dim = 1 and `interval = [lo, hi]`"))?;
            Measure::uniform_interval(lo, hi)
        }
    };
    let measure = a.wrap(mspan, measure)?;
    if !(r.k_radius > 0.0) || !(r.tolerance > 0.0) {
        return Err(a.err(span.clone(), "k_radius and tolerance must be positive"));
    }
    Ok(SqrtMeasureSpec {
        eps,
        mollifier: mollifier(a, span.clone(), r.mollifier, r.dim)?,
        measure,
        grid: a.wrap(span, SpatialGrid::new(r.dim, r.half_width, r.points))?,
        k_radius: r.k_radius,
        tolerance: r.tolerance,
        tests: tests(a, &r.tests, r.dim)?,
    })
}

fn free(a: &Anchor<'_>, s: &Spanned<RawFree>, eps: EpsGrid) -> Result<FreeSpec, SchemaError> {
    let span = s.span();
    let r = s.get_ref();
    check_dim(a, span.clone(), r.dim)?;
    if r.times.is_empty() || r.times.iter().any(|t| !t.is_finite()) {
        return Err(a.err(span.clone(), "times must be a non-empty list of finite values"));
    }
    Ok(FreeSpec {
        eps,
        mollifier: mollifier(a, span, r.mollifier, r.dim)?,
        times: r.times.clone(),
        tests: tests(a, &r.tests, r.dim)?,
    })
}

fn field(
    a: &Anchor<'_>,
    f: &Spanned<RawField>,
    dim: usize,
    unseeded: &mut Vec<usize>,
    index: usize,
) -> Result<FieldSpec, SchemaError> {
    let span = f.span();
    let r = f.get_ref();
    let profile = match &r.profile {
        None => Profile::Flat,
        Some(p) => {
            let ps = p.span();
            let p = p.get_ref();
            let need = |v: Option<f64>, name: &str| {
                v.ok_or_else(|| {
                    a.err(
                        ps.clone(),
                        format!("profile `{:?}` needs `{name}`", p.kind).to_lowercase(),
                    )
                })
            };
            match p.kind {
                ProfileKind::Flat => Profile::Flat,
                ProfileKind::Jump => Profile::Jump {
                    center: p.center.as_ref().and_then(|c| c.first().copied()).unwrap_or(0.0),
                },
                ProfileKind::Smooth => Profile::Smooth {
                    center: point(
                        a,
                        ps.clone(),
                        p.center.as_deref().unwrap_or(&[0.0, 0.0][..dim]),
                        dim,
                        "profile center",
                    )?,
                    width: need(p.width, "width")?,
                },
                ProfileKind::Wave => Profile::Wave {
                    wavenumber: need(p.wavenumber, "wavenumber")?,
                },
                ProfileKind::Random => {
                    let cell = need(p.cell, "cell")?;
                    if !(cell > 0.0) {
                        return Err(a.err(ps, "random profile cell must be positive"));
                    }
                    if p.seed.is_none() {
                        unseeded.push(index);
                    }
                    Profile::Random {
                        seed: p.seed.unwrap_or(0),
                        cell,
                    }
                }
            }
        }
    };
    let frequency = match &r.frequency {
        None => FrequencyLaw::Constant(0.0),
        Some(fr) => {
            let f = fr.get_ref();
            match f.law {
                LawKind::Constant => FrequencyLaw::Constant(f.omega),
                LawKind::Log => FrequencyLaw::Log(f.omega),
                LawKind::Power => FrequencyLaw::Power {
                    omega: f.omega,
                    p: f.p.ok_or_else(|| a.err(fr.span(), "power law needs `p`"))?,
                },
            }
        }
    };
    if !(r.modulation.abs() < 1.0) {
        return Err(a.err(span, format!("modulation {} must lie in (-1, 1)", r.modulation)));
    }
    Ok(FieldSpec {
        base: r.base,
        amp: r.amp,
        profile,
        modulation: r.modulation,
        frequency,
    })
}

fn coefficients(
    a: &Anchor<'_>,
    c0: f64,
    c: &[&Spanned<RawField>],
    v: &Spanned<RawField>,
    dim: usize,
    span: Range<usize>,
) -> Result<CoefficientsSpec, SchemaError> {
    if c.len() != dim {
        return Err(a.err(
            span,
            format!("{} diffusion fields given, dim = {dim} needs {dim}", c.len()),
        ));
    }
    if !(c0 > 0.0) {
        return Err(a.err(span, format!("c0 = {c0} must be positive")));
    }
    let mut unseeded = Vec::new();
    let c = c
        .iter()
        .enumerate()
        .map(|(k, f)| field(a, f, dim, &mut unseeded, k))
        .collect::<Result<Vec<_>, _>>()?;
    let v = field(a, v, dim, &mut unseeded, dim)?;
    Ok(CoefficientsSpec { c0, c, v, unseeded })
}

fn problem(a: &Anchor<'_>, p: &Spanned<RawProblem>) -> Result<ProblemSpec, SchemaError> {
    let span = p.span();
    let r = p.get_ref();
    check_dim(a, span.clone(), r.dim)?;
    if !(r.t_final > 0.0 && r.t_final.is_finite()) {
        return Err(a.err(span, format!("t_final = {} must be positive", r.t_final)));
    }
    let grid = match (r.points, r.per_eps) {
        (Some(m), None) => GridPolicy::Fixed(a.wrap(span.clone(), SpatialGrid::new(r.dim, r.half_width, m))?),
        (None, Some(k)) if k > 0.0 && r.half_width > 0.0 => GridPolicy::PerEps {
            dim: r.dim,
            half_width: r.half_width,
            per_eps: k,
        },
        _ => return Err(a.err(span, "[problem] needs exactly one of `points` or a positive `per_eps`")),
    };
    let time = match (r.steps, r.dt_ratio) {
        (Some(n), None) if n > 0 => TimePolicy::Steps(n),
        (None, Some(q)) if q > 0.0 => TimePolicy::MaxDt { ratio: q },
        _ => return Err(a.err(span, "[problem] needs exactly one of a positive `steps` or `dt_ratio`")),
    };
    if let Some(t) = r.snapshot_times.iter().find(|t| !(**t >= 0.0 && **t <= r.t_final)) {
        return Err(a.err(span, format!("snapshot time {t} outside [0, t_final]")));
    }
    let ds = r.data.span();
    let d = r.data.get_ref();
    let data = match d.kind {
        DataKind::Dirac | DataKind::SqrtDirac => {
            let moll = mollifier(a, ds.clone(), d.mollifier.unwrap_or(MollifierKind::Standard), r.dim)?;
            let measure = a.wrap(ds.clone(), Measure::dirac(r.dim, [0.0, 0.0]))?;
            if d.kind == DataKind::Dirac {
                InitialData::Mollified {
                    measure,
                    mollifier: moll,
                }
            } else {
                InitialData::SqrtMollified {
                    measure,
                    mollifier: moll,
                }
            }
        }
        DataKind::Gaussian => {
            let w = d
                .width
                .ok_or_else(|| a.err(ds.clone(), "gaussian data needs `width`"))?;
            if !(w > 0.0) {
                return Err(a.err(ds, "gaussian width must be positive"));
            }
            let k = d.wavenumber;
            InitialData::Analytic {
                name: format!("gaussian(w={w},k={k})"),
                f: Arc::new(move |p| {
                    let r2 = p[0] * p[0] + p[1] * p[1];
                    C64::new(0.0, k * p[0]).exp() * (-r2 / (w * w)).exp()
                }),
            }
        }
    };
    let c: Vec<&Spanned<RawField>> = r.c.iter().collect();
    Ok(ProblemSpec {
        coeffs: coefficients(a, r.c0, &c, &r.v, r.dim, span)?,
        data,
        t_final: r.t_final,
        grid,
        time,
        snapshot_times: r.snapshot_times.clone(),
    })
}

fn coherence(a: &Anchor<'_>, s: &Spanned<RawCoherence>, eps: EpsGrid) -> Result<CoherenceSpec, SchemaError> {
    let span = s.span();
    let r = s.get_ref();
    if !(r.width > 0.0 && r.t_final > 0.0 && r.tolerance > 0.0 && r.kappa > 0.0) {
        return Err(a.err(span, "width, t_final, tolerance and kappa must be positive"));
    }
    if r.steps == 0 || r.samples == 0 {
        return Err(a.err(span, "steps and samples must be positive"));
    }
    let coeffs = coefficients(a, r.c0, &[&r.c], &r.v, 1, span.clone())?;
    if !coeffs.unseeded.is_empty() {
        return Err(a.err(span, "coherence needs smooth, eps-independent coefficients"));
    }
    Ok(CoherenceSpec {
        eps,
        width: r.width,
        mollifier: a.wrap(span.clone(), MollifierSpec::cauchy_power(1, r.mollifier_power))?,
        t_final: r.t_final,
        grid: a.wrap(span, SpatialGrid::new(1, r.half_width, r.points))?,
        steps: r.steps,
        samples: r.samples,
        tolerance: r.tolerance,
        min_slope: r.min_slope,
        kappa: r.kappa,
        coeffs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const FREE: &str = r#"
experiment = "free_example"

[eps]
dyadic = [2, 7]

[free_example]
dim = 1
times = [0.5]
tests = [{ kind = "bump", center = [0.0], radius = 1.0 }]
"#;

    #[test]
    fn parses_free_example() {
        let c = parse(FREE).unwrap();
        assert_eq!(c.experiment, Experiment::FreeExample);
        match c.spec {
            ExperimentSpec::FreeExample(f) => assert_eq!(f.eps.len(), 6),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn increasing_eps_is_anchored() {
        let src = FREE.replace("dyadic = [2, 7]", "values = [0.1, 0.05, 0.2, 0.01, 0.005, 0.001]");
        let e = parse(&src).unwrap_err();
        assert_eq!(e.line, 5, "{e}");
    }

    #[test]
    fn unknown_key_is_anchored() {
        let src = FREE.replace("dim = 1", "dim = 1\nspeed = 3");
        let e = parse(&src).unwrap_err();
        assert_eq!(e.line, 9, "{e}");
        assert!(e.message.contains("speed"), "{e}");
    }

    #[test]
    fn foreign_section_rejected() {
        let src = format!("{FREE}\n[coherence]\nwidth = 1.0\n");
        assert!(parse(&src).is_err());
    }

    #[test]
    fn random_profiles_take_the_run_seed() {
        let spec = CoefficientsSpec {
            c0: 1.0,
            c: vec![FieldSpec::stationary(1.0, 1.0, Profile::Random { seed: 0, cell: 0.1 })],
            v: FieldSpec::constant(0.0),
            unseeded: vec![0],
        };
        let net = spec.build(41);
        assert_eq!(net.c[0].profile, Profile::Random { seed: 41, cell: 0.1 });
    }
}
