//! Functionals of a chaos solution: moments, weighted norms, pathwise
//! evaluation, the duality pairing and the deterministic `u_h` equation.

use alloc::format;
use alloc::vec::Vec;

#[allow(unused_imports)] // float methods come from libm without std
use num_traits::Float;

use crate::basis::{h_coefficients, h_power, xi_alpha, GaussianSample, HCoefficients, TemporalBasis, TestFunctionH};
use crate::discretization::{
    assemble_a, assemble_m, march, sample_checked, FieldVector, OperatorFamily, OperatorSpec, SpatialGrid,
};
use crate::multiindex::{MultiIndex, WeightSequence};
use crate::propagator::{ChaosSolution, TimeGrid};
use crate::sparse::CsrMatrix;
use crate::{Error, Result};

/// Simpson intervals used for the projections `h_ik`.
pub const DEFAULT_H_INTERVALS: usize = 2048;

/// Below this a negative variance is treated as rounding and clipped.
pub const VARIANCE_TOLERANCE: f64 = 1e-10;

fn node_of(sol: &ChaosSolution, t: f64) -> Result<usize> {
    sol.time_grid().node(t)
}

/// `E u(t) = u_(0)(t)`.
pub fn mean_field(sol: &ChaosSolution, t: f64) -> Result<FieldVector> {
    Ok(FieldVector::new(sol.field(0, node_of(sol, t)?)?.to_vec()))
}

/// `E u²(t) = Σ_α u_α²(t)` over the truncation (meaningful for an unweighted solve).
pub fn second_moment_field(sol: &ChaosSolution, t: f64) -> Result<FieldVector> {
    let node = node_of(sol, t)?;
    let mut acc = alloc::vec![0.0; sol.grid().len()];
    for p in 0..sol.indices().len() {
        for (a, v) in acc.iter_mut().zip(sol.field(p, node)?) {
            *a += v * v;
        }
    }
    Ok(FieldVector::new(acc))
}

#[derive(Debug, Clone, PartialEq)]
pub struct MomentReport {
    pub t: f64,
    pub mean: FieldVector,
    pub second_moment: FieldVector,
    pub variance: FieldVector,
    /// Points where a negative variance above `−VARIANCE_TOLERANCE` was set to 0.
    pub clipped: usize,
    /// Most negative variance seen before clipping.
    pub min_variance: f64,
    pub order: u32,
    pub index_count: usize,
}

pub fn moment_report(sol: &ChaosSolution, t: f64) -> Result<MomentReport> {
    let mean = mean_field(sol, t)?;
    let second_moment = second_moment_field(sol, t)?;
    let mut clipped = 0;
    let mut min_variance = f64::INFINITY;
    let variance = second_moment
        .values
        .iter()
        .zip(&mean.values)
        .map(|(s, m)| {
            let v = s - m * m;
            min_variance = min_variance.min(v);
            if v < 0.0 {
                clipped += 1;
                0.0
            } else {
                v
            }
        })
        .collect::<Vec<_>>();
    if min_variance < -VARIANCE_TOLERANCE * second_moment.max_abs().max(1.0) {
        return Err(Error::InvalidParameter(format!("variance {min_variance:e} is negative beyond rounding")));
    }
    Ok(MomentReport {
        t,
        mean,
        second_moment,
        variance: FieldVector::new(variance),
        clipped,
        min_variance,
        order: sol.order(),
        index_count: sol.indices().len(),
    })
}

/// `(Σ_α q^{2α} ‖u_α(t)‖²)^{1/2}`; available at every time node.
pub fn weighted_norm(sol: &ChaosSolution, q: &WeightSequence, t: f64) -> Result<f64> {
    let node = node_of(sol, t)?;
    let mut acc = 0.0;
    for (p, alpha) in sol.indices().indices().iter().enumerate() {
        let w = q.weight(alpha)?;
        acc += w * w * sol.norm_squared(p, node);
    }
    Ok(acc.sqrt())
}

/// `Σ_α u_α(t) ξ_α(sample)`.
pub fn evaluate_sample(sol: &ChaosSolution, sample: &GaussianSample, t: f64) -> Result<FieldVector> {
    evaluate_sample_up_to(sol, sample, t, sol.order())
}

/// [`evaluate_sample`] over `|α| ≤ max_order`. Lower orders do not depend on
/// the truncation order, so this equals the evaluation of a lower-order solve.
pub fn evaluate_sample_up_to(sol: &ChaosSolution, sample: &GaussianSample, t: f64, max_order: u32) -> Result<FieldVector> {
    let node = node_of(sol, t)?;
    let count = prefix_len(sol, max_order);
    let xi = sol.indices().indices()[..count].iter().map(|a| xi_alpha(a, sample)).collect::<Result<Vec<_>>>()?;
    let fields = (0..count).map(|p| sol.field(p, node)).collect::<Result<Vec<_>>>()?;
    duality_pair(&fields, &xi)
}

fn prefix_len(sol: &ChaosSolution, max_order: u32) -> usize {
    sol.indices().order_range(max_order.min(sol.order())).end
}

/// `Σ_α u_α v_α` for a field-valued family `u` and a scalar family `v`.
pub fn duality_pair(u: &[&[f64]], v: &[f64]) -> Result<FieldVector> {
    if u.len() != v.len() {
        return Err(Error::DimensionMismatch(format!("{} fields paired with {} scalars", u.len(), v.len())));
    }
    let n = u.first().map_or(0, |f| f.len());
    let mut acc = alloc::vec![0.0; n];
    for (f, &w) in u.iter().zip(v) {
        if f.len() != n {
            return Err(Error::DimensionMismatch("coefficient fields differ in length".into()));
        }
        if w != 0.0 {
            acc.iter_mut().zip(f.iter()).for_each(|(a, x)| *a += w * x);
        }
    }
    Ok(FieldVector::new(acc))
}

/// `Σ_α u_α v_α` for scalar families.
pub fn duality_pair_scalar(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::DimensionMismatch(format!("families of length {} and {}", u.len(), v.len())));
    }
    Ok(u.iter().zip(v).map(|(a, b)| a * b).sum())
}

/// The Wick-exponential family `h^α/√α!`.
pub fn wick_family(hc: &HCoefficients, indices: &[MultiIndex]) -> Result<Vec<f64>> {
    indices.iter().map(|a| Ok(h_power(hc, a)? / a.factorial_f64().sqrt())).collect()
}

/// `u_h(t) = Σ_α (h^α/√α!) u_α(t)`.
pub fn pair_with_test(sol: &ChaosSolution, h: &TestFunctionH, t: f64) -> Result<FieldVector> {
    let hc = h_coefficients(h, sol.basis(), DEFAULT_H_INTERVALS)?;
    pair_with_coefficients(sol, &hc, t)
}

/// [`pair_with_test`] with precomputed projections.
pub fn pair_with_coefficients(sol: &ChaosSolution, hc: &HCoefficients, t: f64) -> Result<FieldVector> {
    pair_with_coefficients_up_to(sol, hc, t, sol.order())
}

/// [`pair_with_coefficients`] over `|α| ≤ max_order`.
pub fn pair_with_coefficients_up_to(sol: &ChaosSolution, hc: &HCoefficients, t: f64, max_order: u32) -> Result<FieldVector> {
    let node = node_of(sol, t)?;
    let count = prefix_len(sol, max_order);
    let v = wick_family(hc, &sol.indices().indices()[..count])?;
    let fields = (0..count).map(|p| sol.field(p, node)).collect::<Result<Vec<_>>>()?;
    duality_pair(&fields, &v)
}

/// `A(t) + Σ_k h_k(t) M_k(t)`.
pub struct ShiftedOperator<'a> {
    spec: &'a OperatorSpec,
    grid: &'a SpatialGrid,
    h: &'a TestFunctionH,
    basis: &'a dyn TemporalBasis,
    frozen: Option<(CsrMatrix, Vec<CsrMatrix>)>,
}

impl<'a> ShiftedOperator<'a> {
    pub fn new(spec: &'a OperatorSpec, grid: &'a SpatialGrid, h: &'a TestFunctionH, basis: &'a dyn TemporalBasis) -> Result<Self> {
        if h.channels() > spec.channels() {
            return Err(Error::DimensionMismatch(format!(
                "h has {} channels, the spec {}",
                h.channels(),
                spec.channels()
            )));
        }
        let frozen = if spec.is_time_dependent() {
            None
        } else {
            let a = assemble_a(spec, grid, 0.0, spec.form)?.matrix;
            let m = (1..=h.channels()).map(|k| Ok(assemble_m(spec, grid, k, 0.0)?.matrix)).collect::<Result<_>>()?;
            Some((a, m))
        };
        Ok(Self { spec, grid, h, basis, frozen })
    }
}

impl OperatorFamily for ShiftedOperator<'_> {
    fn size(&self) -> usize {
        self.grid.len()
    }

    fn at(&self, t: f64) -> Result<CsrMatrix> {
        let (mut out, ms) = match &self.frozen {
            Some((a, m)) => (a.clone(), m.clone()),
            None => (
                assemble_a(self.spec, self.grid, t, self.spec.form)?.matrix,
                (1..=self.h.channels())
                    .map(|k| Ok(assemble_m(self.spec, self.grid, k, t)?.matrix))
                    .collect::<Result<Vec<_>>>()?,
            ),
        };
        for (k, m) in ms.iter().enumerate() {
            let hk = self.h.eval(self.basis, k + 1, t);
            if hk != 0.0 {
                out = CsrMatrix::combine(1.0, &out, hk, m);
            }
        }
        Ok(out)
    }

    fn is_constant(&self) -> bool {
        self.h.components().iter().all(|c| c.is_zero()) && self.frozen.is_some()
    }
}

/// θ-scheme solution of `du_h/dt = (A + h_k M_k) u_h + f + h_k g_k` at every node.
pub fn solve_uh_direct(
    spec: &OperatorSpec,
    h: &TestFunctionH,
    basis: &dyn TemporalBasis,
    grid: &SpatialGrid,
    time: &TimeGrid,
    u0: &FieldVector,
    theta: f64,
) -> Result<Vec<FieldVector>> {
    let family = ShiftedOperator::new(spec, grid, h, basis)?;
    let source = |t: f64| -> Result<Option<FieldVector>> {
        let mut acc: Option<FieldVector> = None;
        let mut add = |w: f64, v: FieldVector| match &mut acc {
            Some(a) => a.axpy(w, &v),
            None => {
                let mut v = v;
                v.scale(w);
                acc = Some(v);
            }
        };
        if !spec.forcing.is_zero() {
            add(1.0, sample_checked(grid, &spec.forcing, "f", t)?);
        }
        for k in 1..=h.channels() {
            let g = &spec.noise[k - 1].forcing;
            let hk = h.eval(basis, k, t);
            if !g.is_zero() && hk != 0.0 {
                add(hk, sample_checked(grid, g, "g", t)?);
            }
        }
        Ok(acc)
    };
    march(&family, source, u0, 0.0, time.dt(), time.steps(), theta)
}

/// Per-node discrepancy between the pairing and the direct `u_h` solve.
#[derive(Debug, Clone, PartialEq)]
pub struct UhComparison {
    pub times: Vec<f64>,
    /// `‖pair − direct‖`.
    pub l2_error: Vec<f64>,
    /// `‖pair − direct‖ / ‖direct‖`.
    pub relative_error: Vec<f64>,
    pub max_error: Vec<f64>,
}

impl UhComparison {
    pub fn max_relative(&self) -> f64 {
        self.relative_error.iter().fold(0.0, |m, v| m.max(*v))
    }
}

/// Compares [`pair_with_test`] and [`solve_uh_direct`] at every stored node.
pub fn compare_uh(sol: &ChaosSolution, h: &TestFunctionH) -> Result<UhComparison> {
    let p = sol.problem();
    let direct = solve_uh_direct(&p.spec, h, sol.basis(), &p.grid, &p.time, &p.u0, sol.theta())?;
    compare_uh_with(sol, h, &direct, sol.order())
}

/// [`compare_uh`] against a precomputed direct trajectory, pairing over `|α| ≤ max_order`.
pub fn compare_uh_with(sol: &ChaosSolution, h: &TestFunctionH, direct: &[FieldVector], max_order: u32) -> Result<UhComparison> {
    let p = sol.problem();
    if direct.len() != p.time.steps() + 1 {
        return Err(Error::DimensionMismatch("direct trajectory does not cover the time grid".into()));
    }
    let hc = h_coefficients(h, sol.basis(), DEFAULT_H_INTERVALS)?;
    let mut out = UhComparison { times: Vec::new(), l2_error: Vec::new(), relative_error: Vec::new(), max_error: Vec::new() };
    for &node in sol.stored_nodes() {
        let t = p.time.time(node);
        let paired = pair_with_coefficients_up_to(sol, &hc, t, max_order)?;
        let diff = paired.sub(&direct[node]);
        let err = p.grid.l2_norm(&diff);
        let norm = p.grid.l2_norm(&direct[node]);
        out.times.push(t);
        out.l2_error.push(err);
        out.relative_error.push(if norm > 0.0 { err / norm } else { err });
        out.max_error.push(diff.max_abs());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::{CosineBasis, TimeProfile};
    use crate::discretization::{SpecOperator, DEFAULT_THETA};
    use crate::multiindex::MultiIndexSet;
    use crate::propagator::{solve, ChaosProblem, SolveOptions};
    use crate::Sequential;
    use alloc::sync::Arc;
    use core::f64::consts::PI;

    fn solved(a2: f64, sigma: f64, order: u32) -> ChaosSolution {
        let grid = SpatialGrid::new_1d(2.0 * PI, 32).unwrap();
        let u0 = grid.sample_fn(|x| x[0].sin());
        let p = ChaosProblem {
            spec: OperatorSpec::heat_advection(a2, sigma),
            indices: MultiIndexSet::enumerate(4, 1, order).unwrap(),
            basis: Arc::new(CosineBasis::new(0.5, 4).unwrap()),
            time: TimeGrid::new(0.5, 32).unwrap(),
            grid,
            u0,
        };
        solve(&p, &SolveOptions::default(), &Sequential).unwrap()
    }

    #[test]
    fn deterministic_moments() {
        let sol = solved(1.0, 0.0, 2);
        let r = moment_report(&sol, 0.5).unwrap();
        for (s, m) in r.second_moment.values.iter().zip(&r.mean.values) {
            assert!((s - m * m).abs() < 1e-15);
        }
        assert!(r.variance.max_abs() < 1e-15);
        let q = WeightSequence::ones(1);
        let norm = weighted_norm(&sol, &q, 0.5).unwrap();
        assert!((norm - sol.grid().l2_norm(&r.mean)).abs() < 1e-14);
    }

    #[test]
    fn mean_does_not_depend_on_noise() {
        let a = mean_field(&solved(1.0, 0.0, 2), 0.5).unwrap();
        let b = mean_field(&solved(1.0, 1.2, 2), 0.5).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn pairing_with_zero_h_is_the_mean() {
        let sol = solved(1.0, 1.0, 3);
        let p = pair_with_test(&sol, &TestFunctionH::zero(1), 0.25).unwrap();
        assert_eq!(p, mean_field(&sol, 0.25).unwrap());
        let indicator: Vec<f64> = (0..sol.indices().len()).map(|p| if p == 0 { 1.0 } else { 0.0 }).collect();
        let fields: Vec<&[f64]> = (0..sol.indices().len()).map(|p| sol.field(p, 8).unwrap()).collect();
        assert_eq!(duality_pair(&fields, &indicator).unwrap(), mean_field(&sol, 0.125).unwrap());
    }

    #[test]
    fn pairing_is_bilinear() {
        let u = [1.0, -2.0, 0.5];
        let v = [0.3, 0.1, 4.0];
        let w = [2.0, 1.0, -1.0];
        let lhs = duality_pair_scalar(&u, &[v[0] * 2.0 - w[0], v[1] * 2.0 - w[1], v[2] * 2.0 - w[2]]).unwrap();
        let rhs = 2.0 * duality_pair_scalar(&u, &v).unwrap() - duality_pair_scalar(&u, &w).unwrap();
        assert!((lhs - rhs).abs() < 1e-12);
        assert!(duality_pair_scalar(&u, &v[..2]).is_err());
    }

    #[test]
    fn wick_family_pairing_equals_evaluate_with_shifted_coefficients() {
        let sol = solved(1.0, 1.0, 3);
        let h = TestFunctionH::new(alloc::vec![TimeProfile::Mode { mode: 2, amplitude: 0.3 }]);
        let hc = h_coefficients(&h, sol.basis(), DEFAULT_H_INTERVALS).unwrap();
        let v = wick_family(&hc, sol.indices().indices()).unwrap();
        let fields: Vec<&[f64]> = (0..v.len()).map(|p| sol.field(p, 32).unwrap()).collect();
        let a = duality_pair(&fields, &v).unwrap();
        let b = pair_with_test(&sol, &h, 0.5).unwrap();
        assert!(a.sub(&b).max_abs() <= 1e-12);
    }

    #[test]
    fn only_mean_gives_constant_samples() {
        let sol = solved(1.0, 0.0, 2);
        for i in 0..5 {
            let s = GaussianSample::draw(4, 1, 7, i);
            assert_eq!(evaluate_sample(&sol, &s, 0.5).unwrap(), mean_field(&sol, 0.5).unwrap());
        }
        let small = GaussianSample::draw(2, 1, 7, 0);
        assert!(evaluate_sample(&sol, &small, 0.5).is_err());
    }

    #[test]
    fn uh_with_zero_h_is_the_deterministic_solve() {
        let sol = solved(1.0, 1.0, 2);
        let p = sol.problem();
        let direct = solve_uh_direct(&p.spec, &TestFunctionH::zero(1), sol.basis(), &p.grid, &p.time, &p.u0, DEFAULT_THETA).unwrap();
        let fam = SpecOperator::new(&p.spec, &p.grid);
        let det = march(&fam, |_| Ok(None), &p.u0, 0.0, p.time.dt(), p.time.steps(), DEFAULT_THETA).unwrap();
        assert_eq!(direct, det);
    }

    #[test]
    fn uh_ignores_h_without_noise_operators() {
        let sol = solved(1.0, 0.0, 2);
        let p = sol.problem();
        let h = TestFunctionH::new(alloc::vec![TimeProfile::Constant(0.7)]);
        let a = solve_uh_direct(&p.spec, &h, sol.basis(), &p.grid, &p.time, &p.u0, DEFAULT_THETA).unwrap();
        let b = solve_uh_direct(&p.spec, &TestFunctionH::zero(1), sol.basis(), &p.grid, &p.time, &p.u0, DEFAULT_THETA).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!(x.sub(y).max_abs() < 1e-14);
        }
    }

    #[test]
    fn restricted_pairing_equals_lower_order_solve() {
        let h = TestFunctionH::new(alloc::vec![TimeProfile::Mode { mode: 1, amplitude: 0.4 }]);
        let high = solved(1.0, 1.0, 4);
        let low = solved(1.0, 1.0, 2);
        let hc = h_coefficients(&h, high.basis(), DEFAULT_H_INTERVALS).unwrap();
        let a = pair_with_coefficients_up_to(&high, &hc, 0.5, 2).unwrap();
        let b = pair_with_coefficients(&low, &hc, 0.5).unwrap();
        assert_eq!(a, b);
        let s = GaussianSample::draw(4, 1, 3, 0);
        assert_eq!(evaluate_sample_up_to(&high, &s, 0.5, 2).unwrap(), evaluate_sample(&low, &s, 0.5).unwrap());
    }

    #[test]
    fn pairing_converges_to_direct_uh() {
        let h = TestFunctionH::new(alloc::vec![TimeProfile::Mode { mode: 2, amplitude: 0.3 }]);
        let errs: Vec<f64> = (1..=4).map(|n| compare_uh(&solved(1.0, 1.0, n), &h).unwrap().max_relative()).collect();
        assert!(errs.windows(2).all(|w| w[1] < w[0]), "{errs:?}");
        assert!(errs[3] < 1e-3, "{errs:?}");
    }
}
