use alloc::boxed::Box;
use alloc::format;
use alloc::vec::Vec;

use super::grid::{FieldVector, SpatialGrid};
use super::operator::assemble_a;
use super::spec::{Form, OperatorSpec};
use crate::sparse::{CsrMatrix, LinearSolver};
use crate::{Error, Result};

/// Crank–Nicolson.
pub const DEFAULT_THETA: f64 = 0.5;

/// A time-dependent linear operator `A(t)` on grid functions.
pub trait OperatorFamily: Sync {
    fn size(&self) -> usize;
    fn at(&self, t: f64) -> Result<CsrMatrix>;
    fn is_constant(&self) -> bool;
}

/// `A(t)` assembled from an [`OperatorSpec`].
#[derive(Debug, Clone, Copy)]
pub struct SpecOperator<'a> {
    pub spec: &'a OperatorSpec,
    pub grid: &'a SpatialGrid,
    pub form: Form,
}

impl<'a> SpecOperator<'a> {
    pub fn new(spec: &'a OperatorSpec, grid: &'a SpatialGrid) -> Self {
        Self { spec, grid, form: spec.form }
    }
}

impl OperatorFamily for SpecOperator<'_> {
    fn size(&self) -> usize {
        self.grid.len()
    }

    fn at(&self, t: f64) -> Result<CsrMatrix> {
        Ok(assemble_a(self.spec, self.grid, t, self.form)?.matrix)
    }

    fn is_constant(&self) -> bool {
        !self.spec.is_time_dependent()
    }
}

/// A fixed matrix viewed as a constant family.
impl OperatorFamily for CsrMatrix {
    fn size(&self) -> usize {
        self.dim()
    }

    fn at(&self, _t: f64) -> Result<CsrMatrix> {
        Ok(self.clone())
    }

    fn is_constant(&self) -> bool {
        true
    }
}

/// One-step θ-scheme for `du/dt = A(t) u + s(t)`:
///
/// ```text
/// (I − θ dt A(t+dt)) u⁺ = (I + (1−θ) dt A(t)) u + dt [θ s(t+dt) + (1−θ) s(t)]
/// ```
///
/// Constant families are factorised once; the stepper is then `Sync` and
/// can be shared between threads.
pub struct ThetaStepper<'a, F: OperatorFamily + ?Sized> {
    family: &'a F,
    theta: f64,
    dt: f64,
    constant: Option<(CsrMatrix, LinearSolver)>,
}

impl<'a, F: OperatorFamily + ?Sized> ThetaStepper<'a, F> {
    pub fn new(family: &'a F, dt: f64, theta: f64) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::InvalidParameter(format!("time step must be positive, got {dt}")));
        }
        if !(0.0..=1.0).contains(&theta) {
            return Err(Error::InvalidParameter(format!("θ must lie in [0, 1], got {theta}")));
        }
        let constant = if family.is_constant() {
            let a = family.at(0.0)?;
            let lhs = a.shifted_identity(-theta * dt);
            Some((a, LinearSolver::new(lhs)))
        } else {
            None
        };
        Ok(Self { family, theta, dt, constant })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    /// Operators for the step `t → t + dt`. For constant families this only
    /// borrows the cached factorisation.
    pub fn prepare(&self, t: f64) -> Result<PreparedStep<'_>> {
        match &self.constant {
            Some((a, s)) => Ok(PreparedStep { theta: self.theta, dt: self.dt, ops: Ops::Borrowed(a, s) }),
            None => {
                let a_now = self.family.at(t)?;
                let a_next = self.family.at(t + self.dt)?;
                let solver = LinearSolver::new(a_next.shifted_identity(-self.theta * self.dt));
                Ok(PreparedStep { theta: self.theta, dt: self.dt, ops: Ops::Owned(Box::new((a_now, solver))) })
            }
        }
    }

    /// Advances `u` from `t` to `t + dt`. `source` is the already averaged
    /// `θ s(t+dt) + (1−θ) s(t)`.
    pub fn step_in_place(&self, u: &mut [f64], t: f64, source: Option<&[f64]>) -> Result<()> {
        self.prepare(t)?.advance(u, source)
    }
}

enum Ops<'a> {
    Borrowed(&'a CsrMatrix, &'a LinearSolver),
    // Boxed so the borrowed variant stays pointer-sized.
    Owned(Box<(CsrMatrix, LinearSolver)>),
}

/// The assembled operators of a single θ-step, shareable across threads.
pub struct PreparedStep<'a> {
    theta: f64,
    dt: f64,
    ops: Ops<'a>,
}

impl PreparedStep<'_> {
    /// Advances `u` by one step; `source` as in [`ThetaStepper::step_in_place`].
    pub fn advance(&self, u: &mut [f64], source: Option<&[f64]>) -> Result<()> {
        let (a_now, solver) = match &self.ops {
            Ops::Borrowed(a, s) => (*a, *s),
            Ops::Owned(b) => (&b.0, &b.1),
        };
        let mut rhs = u.to_vec();
        if self.theta < 1.0 {
            a_now.apply_add((1.0 - self.theta) * self.dt, u, &mut rhs);
        }
        if let Some(s) = source {
            rhs.iter_mut().zip(s).for_each(|(r, s)| *r += self.dt * s);
        }
        solver.solve_in_place(&mut rhs)?;
        u.copy_from_slice(&rhs);
        Ok(())
    }
}

/// One θ-step of `du/dt = A u + s(t)`; `source(t)` returns `None` for a zero source.
pub fn step<F, S>(family: &F, source: S, u: &FieldVector, t: f64, dt: f64, theta: f64) -> Result<FieldVector>
where
    F: OperatorFamily + ?Sized,
    S: Fn(f64) -> Result<Option<FieldVector>>,
{
    let stepper = ThetaStepper::new(family, dt, theta)?;
    let mut out = u.values.clone();
    let combined = combine_sources(source(t)?, source(t + dt)?, theta);
    stepper.step_in_place(&mut out, t, combined.as_deref())?;
    Ok(FieldVector::new(out))
}

/// Runs `steps` θ-steps from `(t0, u0)` and returns every node, `u0` included.
pub fn march<F, S>(family: &F, source: S, u0: &FieldVector, t0: f64, dt: f64, steps: usize, theta: f64) -> Result<Vec<FieldVector>>
where
    F: OperatorFamily + ?Sized,
    S: Fn(f64) -> Result<Option<FieldVector>>,
{
    let stepper = ThetaStepper::new(family, dt, theta)?;
    let mut out = Vec::with_capacity(steps + 1);
    out.push(u0.clone());
    let mut u = u0.values.clone();
    let mut s_now = source(t0)?;
    for j in 0..steps {
        let t = t0 + j as f64 * dt;
        let s_next = source(t + dt)?;
        let combined = combine_sources(s_now.take(), s_next.clone(), theta);
        stepper.step_in_place(&mut u, t, combined.as_deref())?;
        if u.iter().any(|v| !v.is_finite()) {
            return Err(Error::BlowUp { index: "deterministic".into(), t: t + dt });
        }
        out.push(FieldVector::new(u.clone()));
        s_now = s_next;
    }
    Ok(out)
}

fn combine_sources(now: Option<FieldVector>, next: Option<FieldVector>, theta: f64) -> Option<Vec<f64>> {
    match (now, next) {
        (None, None) => None,
        (a, b) => {
            let n = a.as_ref().or(b.as_ref()).map(FieldVector::len).unwrap_or(0);
            let mut out = alloc::vec![0.0; n];
            if let Some(a) = a {
                out.iter_mut().zip(&a.values).for_each(|(o, v)| *o += (1.0 - theta) * v);
            }
            if let Some(b) = b {
                out.iter_mut().zip(&b.values).for_each(|(o, v)| *o += theta * v);
            }
            Some(out)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::ScalarField;
    use core::f64::consts::PI;
    #[allow(unused_imports)] // float methods come from libm without std
    use num_traits::Float;

    fn no_source(_: f64) -> Result<Option<FieldVector>> {
        Ok(None)
    }

    #[test]
    fn zero_operator_leaves_field_unchanged() {
        let g = SpatialGrid::new_1d(1.0, 8).unwrap();
        let spec = OperatorSpec::zero(1, 0).unwrap();
        let fam = SpecOperator::new(&spec, &g);
        let u = g.sample_fn(|x| x[0] * x[0]);
        assert_eq!(step(&fam, no_source, &u, 0.0, 0.1, 0.5).unwrap(), u);
        assert!(step(&fam, no_source, &u, 0.0, 0.0, 0.5).is_err());
        assert!(step(&fam, no_source, &u, 0.0, 0.1, 1.5).is_err());
    }

    /// Relative L₂ error of the heat mode `e^{−a²κ²t} sin(κx)` after time `t`.
    fn heat_error(n: usize, steps: usize) -> f64 {
        let (a2, kappa, t_end) = (1.0, 2.0, 0.25);
        let g = SpatialGrid::new_1d(2.0 * PI, n).unwrap();
        let spec = OperatorSpec::heat_advection(a2, 0.0);
        let fam = SpecOperator::new(&spec, &g);
        let u0 = g.sample_fn(|x| (kappa * x[0]).sin());
        let traj = march(&fam, no_source, &u0, 0.0, t_end / steps as f64, steps, 0.5).unwrap();
        let exact = g.sample_fn(|x| (-a2 * kappa * kappa * t_end).exp() * (kappa * x[0]).sin());
        g.l2_norm(&traj[steps].sub(&exact)) / g.l2_norm(&exact)
    }

    #[test]
    fn heat_mode_converges_at_second_order() {
        // Δx and dt refined together
        let errs: Vec<f64> = [(32, 16), (64, 32), (128, 64)].iter().map(|&(n, m)| heat_error(n, m)).collect();
        for w in errs.windows(2) {
            let rate = (w[0] / w[1]).log2();
            assert!(rate >= 1.9, "rates from {errs:?}");
        }
        assert!(errs[2] < 1e-3);
    }

    #[test]
    fn advection_is_a_shift() {
        // du/dt = b u_x  ⇒  u(t,x) = u0(x + bt)
        let b = 0.8;
        let t_end = 0.5;
        let mut errs = Vec::new();
        for (n, m) in [(64, 64), (128, 128)] {
            let g = SpatialGrid::new_1d(2.0 * PI, n).unwrap();
            let mut spec = OperatorSpec::zero(1, 0).unwrap();
            spec.drift[0] = ScalarField::from(b);
            let fam = SpecOperator::new(&spec, &g);
            let u0 = g.sample_fn(|x| x[0].sin());
            let traj = march(&fam, no_source, &u0, 0.0, t_end / m as f64, m, 0.5).unwrap();
            let exact = g.sample_fn(|x| (x[0] + b * t_end).sin());
            errs.push(g.l2_norm(&traj[m].sub(&exact)) / g.l2_norm(&exact));
        }
        assert!((errs[0] / errs[1]).log2() > 1.9, "{errs:?}");
    }

    #[test]
    fn divergence_form_conserves_mass() {
        let g = SpatialGrid::new_2d([1.0, 1.0], [16, 16]).unwrap();
        let mut spec = OperatorSpec::zero(2, 0).unwrap();
        let var = ScalarField::Wave { offset: 1.0, amplitude: 0.5, wavenumber: 2.0 * PI, axis: 1, phase: 0.0 };
        spec.diffusion = alloc::vec![var.clone(), ScalarField::from(0.1), ScalarField::from(0.1), var];
        let fam = SpecOperator::new(&spec, &g);
        let u0 = g.sample_fn(|x| 1.0 + (2.0 * PI * x[0]).sin() * (2.0 * PI * x[1]).cos() + x[0]);
        let mass0 = g.integral(&u0);
        let traj = march(&fam, no_source, &u0, 0.0, 1e-3, 10, 0.5).unwrap();
        for w in traj.windows(2) {
            assert!((g.integral(&w[1]) - g.integral(&w[0])).abs() < 1e-10);
        }
        assert!((g.integral(&traj[10]) - mass0).abs() < 1e-9);
    }

    #[test]
    fn source_is_trapezoid_weighted() {
        // du/dt = s(t) = t with A = 0: exact for linear sources
        let g = SpatialGrid::new_1d(1.0, 4).unwrap();
        let a = CsrMatrix::zeros(4);
        let src = |t: f64| Ok(Some(FieldVector::new(alloc::vec![t; 4])));
        let traj = march(&a, src, &FieldVector::zeros(4), 0.0, 0.1, 10, 0.5).unwrap();
        assert!((traj[10].values[0] - 0.5).abs() < 1e-14);
        let _ = g;
    }
}
