//! Scalar data functions (targets `y_d`, sources `f`, study inputs).
//!
//! The named variants keep CLI runs reproducible and let the quadrature layer
//! pick the right integration strategy (indicators get exact sub-area
//! accounting instead of point evaluation). `Custom` accepts an arbitrary
//! callable for library and test use.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

/// Planar region used by indicator functions.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Region {
    Disk { cx: f64, cy: f64, r: f64 },
    /// Half plane `x < c`.
    HalfPlaneX { c: f64 },
}

impl Region {
    pub fn contains(&self, x: f64, y: f64) -> bool {
        match *self {
            Region::Disk { cx, cy, r } => (x - cx).powi(2) + (y - cy).powi(2) <= r * r,
            Region::HalfPlaneX { c } => x < c,
        }
    }
}

/// A scalar function of position, evaluable on the closed domain.
#[derive(Clone)]
pub enum FuncSpec {
    Zero,
    Constant(f64),
    /// `amp * sin(pi x) * sin(pi y)`
    SineProduct { amp: f64 },
    /// `amp * exp(-decay ((x-cx)^2 + (y-cy)^2))`
    Gaussian { amp: f64, decay: f64, cx: f64, cy: f64 },
    /// Characteristic function of a region.
    Indicator(Region),
    Custom(Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>),
}

impl FuncSpec {
    /// The target `10 e^{-5(x^2+y^2)}` used by the shipped example problem.
    pub fn example_target() -> FuncSpec {
        FuncSpec::Gaussian {
            amp: 10.0,
            decay: 5.0,
            cx: 0.0,
            cy: 0.0,
        }
    }

    pub fn custom(f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> FuncSpec {
        FuncSpec::Custom(Arc::new(f))
    }

    /// Data pre-projected onto the P1 space: evaluates the interpolant by
    /// point location instead of sampling the original callable.
    pub fn from_p1(field: &crate::fem::P1Field) -> FuncSpec {
        let field = field.clone();
        FuncSpec::Custom(Arc::new(move |x, y| field.eval_at(x, y)))
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        match self {
            FuncSpec::Zero => 0.0,
            FuncSpec::Constant(c) => *c,
            FuncSpec::SineProduct { amp } => amp * (PI * x).sin() * (PI * y).sin(),
            FuncSpec::Gaussian { amp, decay, cx, cy } => {
                amp * (-decay * ((x - cx).powi(2) + (y - cy).powi(2))).exp()
            }
            FuncSpec::Indicator(region) => {
                if region.contains(x, y) {
                    1.0
                } else {
                    0.0
                }
            }
            FuncSpec::Custom(f) => f(x, y),
        }
    }

    /// Region of an indicator function, when this is one.
    pub fn indicator_region(&self) -> Option<Region> {
        match self {
            FuncSpec::Indicator(region) => Some(*region),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, FuncSpec::Zero) || matches!(self, FuncSpec::Constant(c) if *c == 0.0)
    }
}

impl fmt::Debug for FuncSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FuncSpec::Zero => write!(f, "Zero"),
            FuncSpec::Constant(c) => write!(f, "Constant({c})"),
            FuncSpec::SineProduct { amp } => write!(f, "SineProduct {{ amp: {amp} }}"),
            FuncSpec::Gaussian { amp, decay, cx, cy } => {
                write!(f, "Gaussian {{ amp: {amp}, decay: {decay}, cx: {cx}, cy: {cy} }}")
            }
            FuncSpec::Indicator(region) => write!(f, "Indicator({region:?})"),
            FuncSpec::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}
