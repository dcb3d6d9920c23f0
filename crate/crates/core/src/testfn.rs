//! Real test functions with compact support strictly inside the box.

use std::fmt;

use crate::error::{Error, Result};
use crate::grid::{norm, Point, SpatialGrid};

/// Symbolic descriptor of a test function; `eval` is the closed form.
#[derive(Clone, Debug, PartialEq)]
pub enum TestFunctionSpec {
    /// `exp(1 - 1/(1 - s^2))` with `s = |x - center| / radius`, so the peak is 1.
    Bump { center: Point, radius: f64 },
    /// `x_axis * bump`.
    LinearBump { center: Point, radius: f64, axis: usize },
    /// `cos(frequency * x_axis) * bump`.
    OscillatoryBump {
        center: Point,
        radius: f64,
        frequency: f64,
        axis: usize,
    },
}

pub(crate) fn bump_profile(s: f64) -> f64 {
    if s >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - s * s)).exp()
    }
}

impl TestFunctionSpec {
    pub fn bump(center: f64, radius: f64) -> Self {
        Self::Bump {
            center: [center, 0.0],
            radius,
        }
    }

    pub fn center(&self) -> Point {
        match *self {
            Self::Bump { center, .. } | Self::LinearBump { center, .. } | Self::OscillatoryBump { center, .. } => {
                center
            }
        }
    }

    pub fn radius(&self) -> f64 {
        match *self {
            Self::Bump { radius, .. } | Self::LinearBump { radius, .. } | Self::OscillatoryBump { radius, .. } => {
                radius
            }
        }
    }

    pub fn eval(&self, p: Point) -> f64 {
        let c = self.center();
        let s = norm([p[0] - c[0], p[1] - c[1]]) / self.radius();
        let b = bump_profile(s);
        match *self {
            Self::Bump { .. } => b,
            Self::LinearBump { axis, .. } => p[axis] * b,
            Self::OscillatoryBump { frequency, axis, .. } => (frequency * p[axis]).cos() * b,
        }
    }
}

impl fmt::Display for TestFunctionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Bump { center, radius } => {
                write!(f, "bump(c=[{},{}],r={})", center[0], center[1], radius)
            }
            Self::LinearBump { center, radius, axis } => write!(
                f,
                "linear_bump(c=[{},{}],r={},axis={})",
                center[0], center[1], radius, axis
            ),
            Self::OscillatoryBump {
                center,
                radius,
                frequency,
                axis,
            } => write!(
                f,
                "osc_bump(c=[{},{}],r={},k={},axis={})",
                center[0], center[1], radius, frequency, axis
            ),
        }
    }
}

/// Samples of a [`TestFunctionSpec`] on a grid.
#[derive(Clone, Debug)]
pub struct TestFunction {
    grid: SpatialGrid,
    values: Vec<f64>,
    spec: Option<TestFunctionSpec>,
}

impl TestFunction {
    pub fn new(spec: TestFunctionSpec, grid: SpatialGrid) -> Result<Self> {
        if !(spec.radius() > 0.0) {
            return Err(Error::InvalidArgument(format!("test radius {}", spec.radius())));
        }
        if let TestFunctionSpec::LinearBump { axis, .. } | TestFunctionSpec::OscillatoryBump { axis, .. } = spec {
            if axis >= grid.dim() {
                return Err(Error::InvalidArgument(format!("axis {axis} out of range")));
            }
        }
        let values = grid.points_iter().map(|p| spec.eval(p)).collect();
        Self::build(grid, values, Some(spec))
    }

    /// Wraps raw samples; they must be finite and vanish on the outermost layer.
    pub fn from_values(grid: SpatialGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::ShapeMismatch {
                expected: grid.len(),
                got: values.len(),
            });
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Self::build(grid, values, None)
    }

    fn build(grid: SpatialGrid, values: Vec<f64>, spec: Option<TestFunctionSpec>) -> Result<Self> {
        if let Some(k) = (0..grid.len()).find(|&k| grid.on_boundary_layer(k) && values[k] != 0.0) {
            return Err(Error::InvalidArgument(format!(
                "test function does not vanish on the boundary layer (node {k})"
            )));
        }
        Ok(Self { grid, values, spec })
    }

    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn spec(&self) -> Option<&TestFunctionSpec> {
        self.spec.as_ref()
    }

    pub fn name(&self) -> String {
        self.spec
            .as_ref()
            .map_or_else(|| "custom".to_string(), |s| s.to_string())
    }

    /// Same descriptor resampled on another grid.
    pub fn resample(&self, grid: SpatialGrid) -> Result<Self> {
        match &self.spec {
            Some(s) => Self::new(s.clone(), grid),
            None => Err(Error::InvalidArgument(
                "custom test function cannot be resampled".into(),
            )),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bump_peak_and_support() {
        let s = TestFunctionSpec::bump(0.5, 0.25);
        assert_eq!(s.eval([0.5, 0.0]), 1.0);
        assert_eq!(s.eval([0.75, 0.0]), 0.0);
        assert_eq!(s.eval([0.2, 0.0]), 0.0);
        assert!(s.eval([0.6, 0.0]) > 0.0);
    }

    #[test]
    fn rejects_support_touching_boundary() {
        let g = SpatialGrid::new(1, 1.0, 64).unwrap();
        assert!(TestFunction::new(TestFunctionSpec::bump(0.0, 0.5), g).is_ok());
        assert!(TestFunction::new(TestFunctionSpec::bump(0.0, 1.5), g).is_err());
        let mut v = vec![0.0; 64];
        v[0] = 1.0;
        assert!(TestFunction::from_values(g, v).is_err());
    }

    #[test]
    fn rejects_axis_out_of_range() {
        let g = SpatialGrid::new(1, 2.0, 64).unwrap();
        let s = TestFunctionSpec::LinearBump {
            center: [0.0, 0.0],
            radius: 1.0,
            axis: 1,
        };
        assert!(TestFunction::new(s, g).is_err());
    }
}
