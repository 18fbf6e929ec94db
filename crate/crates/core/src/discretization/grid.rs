use alloc::format;
use alloc::vec::Vec;

#[allow(unused_imports)] // float methods come from libm without std
use num_traits::Float;

use crate::profile::ScalarField;
use crate::{Error, Result};

/// Default cap on the number of grid points.
pub const DEFAULT_POINT_CAP: usize = 1 << 20;

/// Uniform periodic grid in one or two dimensions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpatialGrid {
    dim: usize,
    lengths: [f64; 2],
    points: [usize; 2],
}

impl SpatialGrid {
    pub fn new_1d(length: f64, points: usize) -> Result<Self> {
        Self::new(1, [length, length], [points, 1])
    }

    pub fn new_2d(lengths: [f64; 2], points: [usize; 2]) -> Result<Self> {
        Self::new(2, lengths, points)
    }

    fn new(dim: usize, lengths: [f64; 2], points: [usize; 2]) -> Result<Self> {
        for a in 0..dim {
            if points[a] < 4 {
                return Err(Error::InvalidParameter(format!(
                    "axis {a} needs at least 4 points, got {}",
                    points[a]
                )));
            }
            if !(lengths[a].is_finite() && lengths[a] > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "axis {a} length must be positive, got {}",
                    lengths[a]
                )));
            }
        }
        let total = points[..dim].iter().try_fold(1usize, |acc, p| acc.checked_mul(*p));
        match total {
            Some(t) if t <= DEFAULT_POINT_CAP => Ok(Self { dim, lengths, points }),
            _ => Err(Error::InvalidParameter(format!(
                "grid exceeds the cap of {DEFAULT_POINT_CAP} points"
            ))),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn points(&self, axis: usize) -> usize {
        self.points[axis]
    }

    pub fn length(&self, axis: usize) -> f64 {
        self.lengths[axis]
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        self.lengths[axis] / self.points[axis] as f64
    }

    /// Total number of grid points `n^d`.
    pub fn len(&self) -> usize {
        self.points[..self.dim].iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `Π Δx_a`, the quadrature weight of one grid point.
    pub fn cell_volume(&self) -> f64 {
        (0..self.dim).map(|a| self.spacing(a)).product()
    }

    /// Linear index of the (possibly out of range) multi-position, wrapped
    /// periodically. Axis 0 varies fastest.
    pub fn wrap(&self, pos: [isize; 2]) -> usize {
        let i0 = pos[0].rem_euclid(self.points[0] as isize) as usize;
        if self.dim == 1 {
            return i0;
        }
        let i1 = pos[1].rem_euclid(self.points[1] as isize) as usize;
        i0 + self.points[0] * i1
    }

    pub fn position(&self, index: usize) -> [isize; 2] {
        if self.dim == 1 {
            [index as isize, 0]
        } else {
            [(index % self.points[0]) as isize, (index / self.points[0]) as isize]
        }
    }

    pub fn coords(&self, index: usize) -> [f64; 2] {
        let p = self.position(index);
        [p[0] as f64 * self.spacing(0), if self.dim == 2 { p[1] as f64 * self.spacing(1) } else { 0.0 }]
    }

    /// Coordinates of the point `index` shifted by `offset` grid spacings.
    pub fn shifted_coords(&self, index: usize, offset: [f64; 2]) -> [f64; 2] {
        let c = self.coords(index);
        [c[0] + offset[0] * self.spacing(0), c[1] + offset[1] * self.spacing(1)]
    }

    pub fn sample(&self, field: &ScalarField, t: f64) -> FieldVector {
        FieldVector::new(
            (0..self.len())
                .map(|i| {
                    let x = self.coords(i);
                    field.eval(t, &x[..self.dim])
                })
                .collect(),
        )
    }

    pub fn sample_fn<F: Fn(&[f64]) -> f64>(&self, f: F) -> FieldVector {
        FieldVector::new((0..self.len()).map(|i| f(&self.coords(i)[..self.dim])).collect())
    }

    /// Δx-weighted inner product.
    pub fn inner(&self, a: &FieldVector, b: &FieldVector) -> f64 {
        self.cell_volume() * a.values.iter().zip(&b.values).map(|(x, y)| x * y).sum::<f64>()
    }

    /// Discrete `L₂` norm.
    pub fn l2_norm(&self, a: &FieldVector) -> f64 {
        self.l2_norm_squared(a).sqrt()
    }

    pub fn l2_norm_squared(&self, a: &FieldVector) -> f64 {
        self.inner(a, a)
    }

    /// Discrete `H¹` norm with forward differences.
    pub fn h1_norm(&self, a: &FieldVector) -> f64 {
        let mut acc = self.l2_norm_squared(a);
        for axis in 0..self.dim {
            let h = self.spacing(axis);
            let mut s = 0.0;
            for i in 0..self.len() {
                let mut p = self.position(i);
                p[axis] += 1;
                let d = (a.values[self.wrap(p)] - a.values[i]) / h;
                s += d * d;
            }
            acc += self.cell_volume() * s;
        }
        acc.sqrt()
    }

    /// `Σ u Δx^d`.
    pub fn integral(&self, a: &FieldVector) -> f64 {
        self.cell_volume() * a.values.iter().sum::<f64>()
    }

    pub fn check(&self, a: &FieldVector) -> Result<()> {
        if a.len() != self.len() {
            return Err(Error::DimensionMismatch(format!(
                "field of length {} on a grid of {} points",
                a.len(),
                self.len()
            )));
        }
        if a.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("field has non-finite entries".into()));
        }
        Ok(())
    }
}

/// Grid function values, indexed like [`SpatialGrid`] points.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FieldVector {
    pub values: Vec<f64>,
}

impl FieldVector {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn zeros(n: usize) -> Self {
        Self { values: alloc::vec![0.0; n] }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn axpy(&mut self, a: f64, x: &FieldVector) {
        self.values.iter_mut().zip(&x.values).for_each(|(y, x)| *y += a * x);
    }

    pub fn scale(&mut self, a: f64) {
        self.values.iter_mut().for_each(|v| *v *= a);
    }

    pub fn sub(&self, other: &FieldVector) -> FieldVector {
        FieldVector::new(self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect())
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

impl From<Vec<f64>> for FieldVector {
    fn from(values: Vec<f64>) -> Self {
        Self { values }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::PI;

    #[test]
    fn grid_geometry() {
        let g = SpatialGrid::new_1d(2.0 * PI, 128).unwrap();
        assert_eq!(g.len(), 128);
        assert!((g.spacing(0) - 2.0 * PI / 128.0).abs() < 1e-15);
        assert_eq!(g.wrap([-1, 0]), 127);
        assert_eq!(g.wrap([128, 0]), 0);
        let g2 = SpatialGrid::new_2d([1.0, 2.0], [4, 8]).unwrap();
        assert_eq!(g2.len(), 32);
        assert_eq!(g2.wrap([5, -1]), 1 + 4 * 7);
        assert_eq!(g2.coords(5), [0.25, 0.25]);
        assert!(SpatialGrid::new_1d(1.0, 3).is_err());
        assert!(SpatialGrid::new_1d(0.0, 8).is_err());
    }

    #[test]
    fn discrete_norms() {
        let g = SpatialGrid::new_1d(2.0 * PI, 64).unwrap();
        let u = g.sample_fn(|x| x[0].sin());
        assert!((g.l2_norm_squared(&u) - PI).abs() < 1e-12);
        assert!(g.integral(&u).abs() < 1e-12);
        // ‖sin‖²_{H¹} ≈ 2π up to the forward-difference factor
        assert!((g.h1_norm(&u).powi(2) - 2.0 * PI).abs() < 1e-2);
        assert!(g.check(&FieldVector::zeros(3)).is_err());
    }
}
