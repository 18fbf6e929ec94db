use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use super::grid::{FieldVector, SpatialGrid};
use super::spec::{Form, OperatorSpec};
use crate::profile::ScalarField;
use crate::sparse::CsrMatrix;
use crate::{Error, Result};

/// A finite-difference operator frozen at time `time`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteOperator {
    pub matrix: CsrMatrix,
    /// `None` for first-order operators.
    pub form: Option<Form>,
    pub time: f64,
}

impl DiscreteOperator {
    pub fn apply(&self, u: &FieldVector) -> FieldVector {
        FieldVector::new(self.matrix.mul_vec(&u.values))
    }
}

fn eval_checked(field: &ScalarField, name: &str, t: f64, x: &[f64]) -> Result<f64> {
    let v = field.eval(t, x);
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFiniteCoefficient { name: String::from(name), t })
    }
}

fn unit(axis: usize) -> [isize; 2] {
    let mut e = [0isize; 2];
    e[axis] = 1;
    e
}

fn offset(p: [isize; 2], a: [isize; 2], s: isize) -> [isize; 2] {
    [p[0] + s * a[0], p[1] + s * a[1]]
}

/// `A(t)`: second-order central differences with periodic wrap, plus drift
/// and potential. The divergence form differences fluxes on staggered
/// midpoints for `i = j` and centred products for `i ≠ j`.
pub fn assemble_a(spec: &OperatorSpec, grid: &SpatialGrid, t: f64, form: Form) -> Result<DiscreteOperator> {
    spec.validate()?;
    check_dims(spec, grid)?;
    let d = spec.dim;
    let n = grid.len();
    let mut trip: Vec<(usize, usize, f64)> = Vec::with_capacity(n * (1 + 4 * d * d));
    for r in 0..n {
        let p = grid.position(r);
        let x = grid.coords(r);
        let x = &x[..d];
        for i in 0..d {
            let ei = unit(i);
            let hi = grid.spacing(i);
            for j in 0..d {
                let coeff = spec.a(i, j);
                if coeff.is_zero() {
                    continue;
                }
                let name = format!("a[{}][{}]", i + 1, j + 1);
                let hj = grid.spacing(j);
                let ej = unit(j);
                match (form, i == j) {
                    (Form::Nondivergence, true) => {
                        let a = eval_checked(coeff, &name, t, x)?;
                        let s = a / (hi * hi);
                        trip.push((r, grid.wrap(offset(p, ei, 1)), s));
                        trip.push((r, grid.wrap(offset(p, ei, -1)), s));
                        trip.push((r, r, -2.0 * s));
                    }
                    (Form::Nondivergence, false) => {
                        let a = eval_checked(coeff, &name, t, x)?;
                        let s = a / (4.0 * hi * hj);
                        let pp = offset(offset(p, ei, 1), ej, 1);
                        let pm = offset(offset(p, ei, 1), ej, -1);
                        let mp = offset(offset(p, ei, -1), ej, 1);
                        let mm = offset(offset(p, ei, -1), ej, -1);
                        trip.push((r, grid.wrap(pp), s));
                        trip.push((r, grid.wrap(pm), -s));
                        trip.push((r, grid.wrap(mp), -s));
                        trip.push((r, grid.wrap(mm), s));
                    }
                    (Form::Divergence, true) => {
                        let mut half = [0.0; 2];
                        half[i] = 0.5;
                        let xp = grid.shifted_coords(r, half);
                        half[i] = -0.5;
                        let xm = grid.shifted_coords(r, half);
                        let ap = eval_checked(coeff, &name, t, &xp[..d])? / (hi * hi);
                        let am = eval_checked(coeff, &name, t, &xm[..d])? / (hi * hi);
                        trip.push((r, grid.wrap(offset(p, ei, 1)), ap));
                        trip.push((r, grid.wrap(offset(p, ei, -1)), am));
                        trip.push((r, r, -(ap + am)));
                    }
                    (Form::Divergence, false) => {
                        // D_i(a_ij D_j u) ≈ [a_ij D_j u](x+e_i) − [a_ij D_j u](x−e_i), centred
                        for side in [1isize, -1] {
                            let q = offset(p, ei, side);
                            let mut shift = [0.0; 2];
                            shift[i] = side as f64;
                            let xq = grid.shifted_coords(r, shift);
                            let a = eval_checked(coeff, &name, t, &xq[..d])?;
                            let s = side as f64 * a / (4.0 * hi * hj);
                            trip.push((r, grid.wrap(offset(q, ej, 1)), s));
                            trip.push((r, grid.wrap(offset(q, ej, -1)), -s));
                        }
                    }
                }
            }
            let b = &spec.drift[i];
            if !b.is_zero() {
                let v = eval_checked(b, &format!("b[{}]", i + 1), t, x)? / (2.0 * hi);
                trip.push((r, grid.wrap(offset(p, ei, 1)), v));
                trip.push((r, grid.wrap(offset(p, ei, -1)), -v));
            }
        }
        if !spec.potential.is_zero() {
            trip.push((r, r, eval_checked(&spec.potential, "c", t, x)?));
        }
        trip.push((r, r, 0.0));
    }
    Ok(DiscreteOperator { matrix: CsrMatrix::from_triplets(n, trip), form: Some(form), time: t })
}

/// `M_k(t) = σ_ik D_i + ν_k` with central first differences; `channel` is 1-based.
pub fn assemble_m(spec: &OperatorSpec, grid: &SpatialGrid, channel: usize, t: f64) -> Result<DiscreteOperator> {
    spec.validate()?;
    check_dims(spec, grid)?;
    if channel == 0 || channel > spec.channels() {
        return Err(Error::ChannelOutOfRange { channel, max: spec.channels() });
    }
    let noise = &spec.noise[channel - 1];
    let d = spec.dim;
    let n = grid.len();
    let mut trip = Vec::with_capacity(n * (1 + 2 * d));
    for r in 0..n {
        let p = grid.position(r);
        let x = grid.coords(r);
        let x = &x[..d];
        for (i, sigma) in noise.advection.iter().enumerate() {
            if sigma.is_zero() {
                continue;
            }
            let v = eval_checked(sigma, &format!("sigma[{}][{channel}]", i + 1), t, x)? / (2.0 * grid.spacing(i));
            let ei = unit(i);
            trip.push((r, grid.wrap(offset(p, ei, 1)), v));
            trip.push((r, grid.wrap(offset(p, ei, -1)), -v));
        }
        if !noise.potential.is_zero() {
            trip.push((r, r, eval_checked(&noise.potential, &format!("nu[{channel}]"), t, x)?));
        }
        trip.push((r, r, 0.0));
    }
    Ok(DiscreteOperator { matrix: CsrMatrix::from_triplets(n, trip), form: None, time: t })
}

fn check_dims(spec: &OperatorSpec, grid: &SpatialGrid) -> Result<()> {
    if spec.dim != grid.dim() {
        return Err(Error::DimensionMismatch(format!(
            "operator of dimension {} on a {}-d grid",
            spec.dim,
            grid.dim()
        )));
    }
    Ok(())
}

/// Samples a coefficient field on the grid, failing on non-finite values.
pub fn sample_checked(grid: &SpatialGrid, field: &ScalarField, name: &str, t: f64) -> Result<FieldVector> {
    let v = grid.sample(field, t);
    if v.values.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFiniteCoefficient { name: String::from(name), t });
    }
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::PI;
    #[allow(unused_imports)] // float methods come from libm without std
    use num_traits::Float;

    fn rel_l2(grid: &SpatialGrid, a: &FieldVector, b: &FieldVector) -> f64 {
        grid.l2_norm(&a.sub(b)) / grid.l2_norm(b)
    }

    #[test]
    fn laplacian_of_constant_vanishes() {
        let g = SpatialGrid::new_1d(2.0 * PI, 32).unwrap();
        let spec = OperatorSpec::heat_advection(1.0, 0.0);
        let a = assemble_a(&spec, &g, 0.0, Form::Nondivergence).unwrap();
        let u = FieldVector::new(alloc::vec![3.0; 32]);
        assert!(a.apply(&u).max_abs() < 1e-12);
    }

    #[test]
    fn heat_stencil_is_second_order() {
        // A sin(κx) = −a²κ² sin(κx) + O(Δx²)
        let (a2, kappa) = (0.7, 2.0);
        let spec = OperatorSpec::heat_advection(a2, 0.0);
        let mut errs = Vec::new();
        for n in [32, 64, 128] {
            let g = SpatialGrid::new_1d(2.0 * PI, n).unwrap();
            let u = g.sample_fn(|x| (kappa * x[0]).sin());
            let exact = g.sample_fn(|x| -a2 * kappa * kappa * (kappa * x[0]).sin());
            let a = assemble_a(&spec, &g, 0.0, Form::Nondivergence).unwrap();
            errs.push(rel_l2(&g, &a.apply(&u), &exact));
        }
        for w in errs.windows(2) {
            assert!((w[0] / w[1]).log2() > 1.9, "{errs:?}");
        }
    }

    #[test]
    fn forms_agree_for_constant_coefficients() {
        let g = SpatialGrid::new_2d([2.0 * PI, 2.0 * PI], [16, 12]).unwrap();
        let mut spec = OperatorSpec::zero(2, 0).unwrap();
        spec.diffusion = alloc::vec![
            ScalarField::from(1.0),
            ScalarField::from(0.3),
            ScalarField::from(0.3),
            ScalarField::from(0.5)
        ];
        spec.drift = alloc::vec![ScalarField::from(0.2), ScalarField::from(-0.1)];
        spec.potential = ScalarField::from(-0.4);
        let a = assemble_a(&spec, &g, 0.0, Form::Divergence).unwrap();
        let b = assemble_a(&spec, &g, 0.0, Form::Nondivergence).unwrap();
        let u = g.sample_fn(|x| (x[0] + 2.0 * x[1]).sin() + (x[1]).cos());
        let (ua, ub) = (a.apply(&u), b.apply(&u));
        assert!(rel_l2(&g, &ua, &ub) < 1e-12);
    }

    #[test]
    fn divergence_form_has_zero_column_sums() {
        let g = SpatialGrid::new_2d([1.0, 1.0], [8, 8]).unwrap();
        let mut spec = OperatorSpec::zero(2, 0).unwrap();
        let var = ScalarField::Wave { offset: 1.0, amplitude: 0.4, wavenumber: 2.0 * PI, axis: 0, phase: 0.3 };
        let cross = ScalarField::Wave { offset: 0.1, amplitude: 0.05, wavenumber: 2.0 * PI, axis: 1, phase: 0.0 };
        spec.diffusion = alloc::vec![var.clone(), cross.clone(), cross, var];
        let a = assemble_a(&spec, &g, 0.0, Form::Divergence).unwrap();
        let ones = alloc::vec![1.0; g.len()];
        let mut colsum = alloc::vec![0.0; g.len()];
        a.matrix.apply_transpose(&ones, &mut colsum);
        assert!(colsum.iter().all(|v| v.abs() < 1e-10));
    }

    #[test]
    fn noise_operator_examples() {
        let g = SpatialGrid::new_1d(2.0 * PI, 64).unwrap();
        let mut spec = OperatorSpec::heat_advection(1.0, 0.0);
        spec.noise[0].potential = ScalarField::from(1.0);
        let m = assemble_m(&spec, &g, 1, 0.0).unwrap();
        let u = g.sample_fn(|x| x[0].cos() + 2.0);
        assert_eq!(m.apply(&u), u);
        assert!(matches!(assemble_m(&spec, &g, 2, 0.0), Err(Error::ChannelOutOfRange { .. })));

        let kappa = 3.0;
        let mut errs = Vec::new();
        for n in [64, 128] {
            let g = SpatialGrid::new_1d(2.0 * PI, n).unwrap();
            let spec = OperatorSpec::heat_advection(1.0, 1.0);
            let m = assemble_m(&spec, &g, 1, 0.0).unwrap();
            let u = g.sample_fn(|x| (kappa * x[0]).sin());
            let exact = g.sample_fn(|x| kappa * (kappa * x[0]).cos());
            errs.push(rel_l2(&g, &m.apply(&u), &exact));
        }
        assert!((errs[0] / errs[1]).log2() > 1.9);
    }

    #[test]
    fn shear_annihilates_fields_constant_along_it() {
        let g = SpatialGrid::new_2d([2.0 * PI, 2.0 * PI], [16, 16]).unwrap();
        let spec = OperatorSpec::passive_scalar(
            2,
            0.5,
            alloc::vec![alloc::vec![ScalarField::Zero, ScalarField::sin(1.0, 1.0, 0)]],
        )
        .unwrap();
        let m = assemble_m(&spec, &g, 1, 0.0).unwrap();
        let u = g.sample_fn(|x| (x[0]).cos() + 0.5 * (2.0 * x[0]).sin());
        assert!(m.apply(&u).max_abs() < 1e-12);
    }

    #[test]
    fn divergence_free_noise_is_nearly_antisymmetric() {
        let g = SpatialGrid::new_2d([2.0 * PI, 2.0 * PI], [64, 64]).unwrap();
        let spec = OperatorSpec::passive_scalar(
            2,
            0.5,
            alloc::vec![alloc::vec![ScalarField::Zero, ScalarField::sin(1.0, 1.0, 0)]],
        )
        .unwrap();
        let m = assemble_m(&spec, &g, 1, 0.0).unwrap();
        let u = g.sample_fn(|x| (x[0] + x[1]).sin() + (2.0 * x[1]).cos() * x[0].cos());
        let mu = m.apply(&u);
        assert!(g.inner(&mu, &u).abs() <= 1e-3 * g.l2_norm_squared(&u));
    }

    #[test]
    fn non_finite_coefficients_are_rejected() {
        let g = SpatialGrid::new_1d(1.0, 8).unwrap();
        let mut spec = OperatorSpec::heat_advection(1.0, 0.0);
        spec.potential = ScalarField::custom(false, |_, _| f64::NAN);
        assert!(matches!(
            assemble_a(&spec, &g, 0.0, Form::Divergence),
            Err(Error::NonFiniteCoefficient { .. })
        ));
    }
}
