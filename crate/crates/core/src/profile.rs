//! Space–time coefficient functions.

use alloc::sync::Arc;
use core::fmt;

#[allow(unused_imports)] // float methods come from libm without std
use num_traits::Float;

/// User-supplied `φ(t, x)`.
pub type CoefficientFn = Arc<dyn Fn(f64, &[f64]) -> f64 + Send + Sync>;

/// A real coefficient `φ(t, x)`.
#[derive(Clone, Default)]
pub enum ScalarField {
    #[default]
    Zero,
    Constant(f64),
    /// `offset + amplitude · sin(wavenumber · x[axis] + phase)`, time independent.
    Wave {
        offset: f64,
        amplitude: f64,
        wavenumber: f64,
        axis: usize,
        phase: f64,
    },
    Custom {
        f: CoefficientFn,
        time_dependent: bool,
    },
}

impl ScalarField {
    pub fn custom<F>(time_dependent: bool, f: F) -> Self
    where
        F: Fn(f64, &[f64]) -> f64 + Send + Sync + 'static,
    {
        ScalarField::Custom { f: Arc::new(f), time_dependent }
    }

    pub fn sin(amplitude: f64, wavenumber: f64, axis: usize) -> Self {
        ScalarField::Wave { offset: 0.0, amplitude, wavenumber, axis, phase: 0.0 }
    }

    pub fn eval(&self, t: f64, x: &[f64]) -> f64 {
        match self {
            ScalarField::Zero => 0.0,
            ScalarField::Constant(c) => *c,
            ScalarField::Wave { offset, amplitude, wavenumber, axis, phase } => {
                offset + amplitude * (wavenumber * x[*axis] + phase).sin()
            }
            ScalarField::Custom { f, .. } => f(t, x),
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            ScalarField::Zero => true,
            ScalarField::Constant(c) => *c == 0.0,
            ScalarField::Wave { offset, amplitude, .. } => *offset == 0.0 && *amplitude == 0.0,
            ScalarField::Custom { .. } => false,
        }
    }

    pub fn is_time_dependent(&self) -> bool {
        matches!(self, ScalarField::Custom { time_dependent: true, .. })
    }

    /// `Some(c)` when the field is the same constant everywhere.
    pub fn as_constant(&self) -> Option<f64> {
        match self {
            ScalarField::Zero => Some(0.0),
            ScalarField::Constant(c) => Some(*c),
            ScalarField::Wave { offset, amplitude, .. } if *amplitude == 0.0 => Some(*offset),
            _ => None,
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        match self {
            ScalarField::Zero => ScalarField::Zero,
            ScalarField::Constant(c) => ScalarField::Constant(c * factor),
            ScalarField::Wave { offset, amplitude, wavenumber, axis, phase } => ScalarField::Wave {
                offset: offset * factor,
                amplitude: amplitude * factor,
                wavenumber: *wavenumber,
                axis: *axis,
                phase: *phase,
            },
            ScalarField::Custom { f, time_dependent } => {
                let f = f.clone();
                ScalarField::Custom {
                    f: Arc::new(move |t, x| factor * f(t, x)),
                    time_dependent: *time_dependent,
                }
            }
        }
    }
}


impl From<f64> for ScalarField {
    fn from(c: f64) -> Self {
        if c == 0.0 {
            ScalarField::Zero
        } else {
            ScalarField::Constant(c)
        }
    }
}

impl fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScalarField::Zero => f.write_str("Zero"),
            ScalarField::Constant(c) => f.debug_tuple("Constant").field(c).finish(),
            ScalarField::Wave { offset, amplitude, wavenumber, axis, phase } => f
                .debug_struct("Wave")
                .field("offset", offset)
                .field("amplitude", amplitude)
                .field("wavenumber", wavenumber)
                .field("axis", axis)
                .field("phase", phase)
                .finish(),
            ScalarField::Custom { time_dependent, .. } => f
                .debug_struct("Custom")
                .field("time_dependent", time_dependent)
                .finish_non_exhaustive(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn evaluation() {
        assert_eq!(ScalarField::Zero.eval(0.0, &[1.0]), 0.0);
        assert_eq!(ScalarField::from(2.5).eval(3.0, &[1.0]), 2.5);
        let w = ScalarField::sin(2.0, 1.0, 1);
        assert!((w.eval(0.0, &[0.0, core::f64::consts::FRAC_PI_2]) - 2.0).abs() < 1e-15);
        let c = ScalarField::custom(true, |t, x| t * x[0]);
        assert_eq!(c.eval(2.0, &[3.0]), 6.0);
        assert!(c.is_time_dependent());
        assert_eq!(c.scaled(0.5).eval(2.0, &[3.0]), 3.0);
        assert!(ScalarField::from(0.0).is_zero());
    }
}
