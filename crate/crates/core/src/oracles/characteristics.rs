use alloc::format;
use alloc::vec::Vec;

#[allow(unused_imports)] // float methods come from libm without std
use num_traits::Float;

use super::paths::PathBundle;
use super::stats::{median, EstimatorResult};
use crate::basis::GaussianSample;
use crate::chaos_field::evaluate_sample;
use crate::discretization::{FieldVector, Form, OperatorSpec};
use crate::multiindex::WeightSequence;
use crate::profile::ScalarField;
use crate::propagator::ChaosSolution;
use crate::{Error, Executor, Result};

/// Residual diffusion entries below this count as zero.
const RESIDUAL_EPS: f64 = 1e-12;

/// Rule for the `ds` integral of the forcing along a characteristic. The
/// `dw` integrals always use the right endpoint (backward Itô).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BackwardQuadrature {
    RightPoint,
    Trapezoid,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CharacteristicOptions {
    /// Wrap positions into `[0, L_i)` before evaluating coefficients.
    pub period: Option<[f64; 2]>,
    /// Required when `f` or `g` is nonzero.
    pub quadrature: Option<BackwardQuadrature>,
}

/// End state of a backward characteristic started at `(t, x)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CharacteristicPoint {
    /// `X_{t,x}(0)`.
    pub position: [f64; 2],
    /// `γ(t, 0, x)`.
    pub gamma: f64,
    /// `∫ f γ ds + Σ_k ∫ q_k g_k γ dw_k`.
    pub forcing: f64,
    /// Whether a nonzero residual diffusion `σ̃` was met along the way.
    pub residual_active: bool,
}

/// `σ̃` with `σ̃σ̃ᵀ = 2a − Σ_k q_k² σ_k σ_kᵀ` by eigen-factorisation, as a
/// row-major `d × d` matrix whose columns drive the `w̃` channels.
pub fn residual_factor(spec: &OperatorSpec, q: &WeightSequence, t: f64, x: &[f64]) -> Result<[f64; 4]> {
    let d = spec.dim;
    let s = crate::discretization::symbol_matrix(spec, q, t, x)?;
    let tol = 1e-10 * s.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    if d == 1 {
        if s[0] < -tol {
            return Err(Error::Unsupported(format!("residual diffusion {} is negative", s[0])));
        }
        return Ok([s[0].max(0.0).sqrt(), 0.0, 0.0, 0.0]);
    }
    let (a, b, c) = (s[0], 0.5 * (s[1] + s[2]), s[3]);
    let mean = 0.5 * (a + c);
    let rad = (0.25 * (a - c) * (a - c) + b * b).sqrt();
    let (l1, l2) = (mean + rad, mean - rad);
    if l2 < -tol {
        return Err(Error::Unsupported(format!("residual diffusion has eigenvalue {l2}")));
    }
    // Unit eigenvector for l1; the second is its rotation.
    let (vx, vy) = if b.abs() > 0.0 {
        let (vx, vy) = (l1 - c, b);
        let n = (vx * vx + vy * vy).sqrt();
        (vx / n, vy / n)
    } else if a >= c {
        (1.0, 0.0)
    } else {
        (0.0, 1.0)
    };
    let (r1, r2) = (l1.max(0.0).sqrt(), l2.max(0.0).sqrt());
    Ok([vx * r1, -vy * r2, vy * r1, vx * r2])
}

fn wrap(x: [f64; 2], period: Option<[f64; 2]>, d: usize) -> [f64; 2] {
    match period {
        None => x,
        Some(p) => {
            let mut y = x;
            for i in 0..d {
                y[i] = num_traits::Euclid::rem_euclid(&x[i], &p[i]);
            }
            y
        }
    }
}

/// Euler–Maruyama for the backward equation
///
/// ```text
/// X(s) = x + ∫_s^t B dτ + Σ_k ∫_s^t q_k σ_k ←dw_k + ∫_s^t σ̃ ←dw̃,   B = b − Σ_k q_k² σ_k ν_k,
/// ```
///
/// run forward over the reversed increments of `paths`, together with
/// `log γ = ∫ c dτ + Σ_k ∫ q_k ν_k ←dw_k − ½ Σ_k ∫ q_k² ν_k² dτ`.
/// `t` must be a node of the bundle's grid.
pub fn simulate_characteristics(
    spec: &OperatorSpec,
    q: &WeightSequence,
    x: &[f64],
    t: f64,
    paths: &PathBundle,
    options: &CharacteristicOptions,
) -> Result<CharacteristicPoint> {
    let d = spec.dim;
    if x.len() < d {
        return Err(Error::DimensionMismatch(format!("{}-D point for a {d}-D equation", x.len())));
    }
    if spec.form == Form::Divergence && spec.diffusion.iter().any(|a| a.as_constant().is_none()) {
        return Err(Error::Unsupported("characteristics need the nondivergence form for variable a_ij".into()));
    }
    let has_forcing = !spec.forcing.is_zero() || spec.has_noise_forcing();
    if has_forcing && options.quadrature.is_none() {
        return Err(Error::Unsupported("nonzero f or g needs a backward quadrature rule".into()));
    }
    let steps = paths.time().node(t)?;
    let dt = paths.time().dt();
    let channels = spec.channels();
    let qs: Vec<f64> = (1..=channels).map(|k| q.q(k)).collect::<Result<_>>()?;

    let mut pos = [0.0; 2];
    pos[..d].copy_from_slice(&x[..d]);
    let mut log_gamma = 0.0;
    let mut forcing = 0.0;
    let mut residual_active = false;

    // Integrand of the ds forcing term at (τ, X(τ)) with the current γ.
    let f_at = |tau: f64, p: &[f64], lg: f64| spec.forcing.eval(tau, p) * lg.exp();

    for j in (0..steps).rev() {
        let tau = paths.time().time(j + 1);
        let here = wrap(pos, options.period, d);
        let p = &here[..d];
        let gamma = log_gamma.exp();
        if has_forcing {
            if options.quadrature == Some(BackwardQuadrature::RightPoint) {
                forcing += f_at(tau, p, log_gamma) * dt;
            }
            for (k, ch) in spec.noise.iter().enumerate() {
                if !ch.forcing.is_zero() {
                    forcing += qs[k] * ch.forcing.eval(tau, p) * gamma * paths.dw(j, k + 1);
                }
            }
        }
        let mut step = [0.0; 2];
        for (i, s) in step.iter_mut().enumerate().take(d) {
            *s = spec.drift[i].eval(tau, p) * dt;
        }
        log_gamma += spec.potential.eval(tau, p) * dt;
        for (k, ch) in spec.noise.iter().enumerate() {
            let dw = paths.dw(j, k + 1);
            let nu = ch.potential.eval(tau, p);
            for (i, s) in step.iter_mut().enumerate().take(d) {
                let sig = ch.advection[i].eval(tau, p);
                *s += qs[k] * sig * dw - qs[k] * qs[k] * sig * nu * dt;
            }
            log_gamma += qs[k] * nu * dw - 0.5 * qs[k] * qs[k] * nu * nu * dt;
        }
        let tilde = residual_factor(spec, q, tau, p)?;
        if tilde.iter().any(|v| v.abs() > RESIDUAL_EPS) {
            residual_active = true;
            if paths.residual_channels() < d {
                return Err(Error::InvalidParameter("σ̃ ≠ 0 needs residual increments for every axis".into()));
            }
            for (i, s) in step.iter_mut().enumerate().take(d) {
                for m in 0..d {
                    *s += tilde[i * d + m] * paths.dw_residual(j, m + 1);
                }
            }
        }
        for i in 0..d {
            pos[i] += step[i];
        }
        if options.quadrature == Some(BackwardQuadrature::Trapezoid) && !spec.forcing.is_zero() {
            let there = wrap(pos, options.period, d);
            let left = f_at(paths.time().time(j), &there[..d], log_gamma);
            forcing += 0.5 * (f_at(tau, p, gamma.ln()) + left) * dt;
        }
        if !(pos.iter().all(|v| v.is_finite()) && log_gamma.is_finite()) {
            return Err(Error::BlowUp { index: "characteristic".into(), t: tau });
        }
    }
    Ok(CharacteristicPoint { position: pos, gamma: log_gamma.exp(), forcing, residual_active })
}

/// The representation functional
/// `∫ f γ ds + Σ_k ∫ q_k g_k γ ←dw_k + u₀(X(0)) γ(t, 0, x)` conditioned on the
/// outer path. Without residual diffusion the value is exact and
/// `n_inner` is ignored; otherwise `n_inner ≥ 2` inner `w̃` paths are averaged.
#[allow(clippy::too_many_arguments)]
pub fn feynman_kac_estimate(
    spec: &OperatorSpec,
    q: &WeightSequence,
    u0: &ScalarField,
    x: &[f64],
    t: f64,
    outer: &PathBundle,
    n_inner: usize,
    seed: u64,
    options: &CharacteristicOptions,
) -> Result<EstimatorResult> {
    let d = spec.dim;
    let value = |c: &CharacteristicPoint| {
        let p = wrap(c.position, options.period, d);
        c.forcing + u0.eval(0.0, &p[..d]) * c.gamma
    };
    let mut probe = outer.clone().with_residual(d, alloc::vec![0.0; outer.time().steps() * d])?;
    let first = simulate_characteristics(spec, q, x, t, &probe, options)?;
    if !first.residual_active {
        return Ok(EstimatorResult::exact(alloc::vec![value(&first)], seed));
    }
    if n_inner < 2 {
        return Err(Error::InvalidParameter("residual diffusion needs at least 2 inner paths".into()));
    }
    let mut samples = Vec::with_capacity(n_inner);
    for i in 0..n_inner {
        let inner = PathBundle::draw(*outer.time(), 0, d, seed, i as u64);
        probe = outer.clone().with_residual(d, inner.residual_increments().to_vec())?;
        samples.push(alloc::vec![value(&simulate_characteristics(spec, q, x, t, &probe, options)?)]);
    }
    EstimatorResult::from_samples(&samples, seed)
}

/// Per-sample discrepancy between the chaos evaluation and the pathwise
/// characteristics value.
#[derive(Debug, Clone, PartialEq)]
pub struct KvReport {
    pub t: f64,
    /// `‖evaluate_sample − u₀(X(0))‖ / ‖u₀(X(0))‖` per sample.
    pub discrepancies: Vec<f64>,
    pub mean: f64,
    pub median: f64,
    pub max: f64,
}

fn check_kv_class(sol: &ChaosSolution) -> Result<()> {
    let spec = sol.spec();
    let grid = sol.grid();
    let d = spec.dim;
    let zero_terms = spec.potential.is_zero()
        && spec.forcing.is_zero()
        && spec.noise.iter().all(|c| c.potential.is_zero() && c.forcing.is_zero());
    if !zero_terms {
        return Err(Error::Unsupported("the Krylov–Veretennikov check needs c = ν = f = g = 0".into()));
    }
    let times = crate::discretization::time_samples(sol.time_grid().horizon(), 3);
    for &t in &times {
        for r in 0..grid.len() {
            let x = grid.coords(r);
            let x = &x[..d];
            for i in 0..d {
                for j in 0..d {
                    let a = spec.a(i, j).eval(t, x);
                    let half: f64 = spec
                        .noise
                        .iter()
                        .map(|c| c.advection[i].eval(t, x) * c.advection[j].eval(t, x))
                        .sum::<f64>()
                        * 0.5;
                    if (a - half).abs() > 1e-10 * a.abs().max(1.0) {
                        return Err(Error::Unsupported(format!(
                            "a_{}{} = {a} differs from ½Σσσ = {half} at x = {x:?}",
                            i + 1,
                            j + 1
                        )));
                    }
                }
            }
        }
    }
    Ok(())
}

/// Compares `evaluate_sample` with `u₀(X_{t,x}(0))` on the path rebuilt from
/// the same sample, for equations with `a = ½σσᵀ` and `c = ν = f = g = 0`.
pub fn kv_pathwise_check<E: Executor>(
    sol: &ChaosSolution,
    u0: &ScalarField,
    samples: &[GaussianSample],
    t: f64,
    executor: &E,
) -> Result<KvReport> {
    check_kv_class(sol)?;
    let spec = sol.spec();
    let grid = sol.grid();
    let d = spec.dim;
    let q = WeightSequence::ones(spec.channels());
    let options = CharacteristicOptions {
        period: Some([grid.length(0), if d == 2 { grid.length(1) } else { 1.0 }]),
        quadrature: None,
    };
    let results = executor.map(samples.len(), |s| -> Result<f64> {
        let sample = &samples[s];
        let chaos = evaluate_sample(sol, sample, t)?;
        let path = PathBundle::from_sample(sample, sol.basis(), *sol.time_grid());
        let mut exact = Vec::with_capacity(grid.len());
        for r in 0..grid.len() {
            let c = simulate_characteristics(spec, &q, &grid.coords(r)[..d], t, &path, &options)?;
            let p = wrap(c.position, options.period, d);
            exact.push(u0.eval(0.0, &p[..d]));
        }
        let exact = FieldVector::new(exact);
        let norm = grid.l2_norm(&exact);
        let err = grid.l2_norm(&chaos.sub(&exact));
        Ok(if norm > 0.0 { err / norm } else { err })
    });
    let discrepancies = results.into_iter().collect::<Result<Vec<_>>>()?;
    let n = discrepancies.len().max(1) as f64;
    Ok(KvReport {
        t,
        mean: discrepancies.iter().sum::<f64>() / n,
        median: median(&discrepancies),
        max: discrepancies.iter().fold(0.0, |m, v| m.max(*v)),
        discrepancies,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::CosineBasis;
    use crate::multiindex::MultiIndexSet;
    use crate::oracles::ks_test_normal;
    use crate::propagator::{solve, ChaosProblem, SolveOptions, TimeGrid};
    use crate::discretization::SpatialGrid;
    use crate::Sequential;
    use alloc::sync::Arc;
    use core::f64::consts::PI;

    fn tg() -> TimeGrid {
        TimeGrid::new(0.1, 50).unwrap()
    }

    #[test]
    fn no_motion_without_coefficients() {
        let spec = OperatorSpec::zero(2, 1).unwrap();
        let p = PathBundle::draw(tg(), 1, 2, 3, 0);
        let c = simulate_characteristics(&spec, &WeightSequence::ones(1), &[0.3, 0.4], 0.1, &p, &Default::default()).unwrap();
        assert_eq!(c.position, [0.3, 0.4]);
        assert_eq!(c.gamma, 1.0);
        assert!(!c.residual_active);
    }

    #[test]
    fn law_of_the_endpoint() {
        // 1D, σ = 1, q = 1: X(0) = x + w(t) ~ N(x, t)
        let spec = OperatorSpec::krylov_veretennikov(1, alloc::vec![alloc::vec![ScalarField::from(1.0)]]).unwrap();
        let q = WeightSequence::ones(1);
        let xs: Vec<f64> = (0..10_000)
            .map(|i| {
                let p = PathBundle::draw(tg(), 1, 0, 42, i);
                simulate_characteristics(&spec, &q, &[0.7], 0.1, &p, &Default::default()).unwrap().position[0]
            })
            .collect();
        let ks = ks_test_normal(&xs, 0.7, 0.1f64.sqrt()).unwrap();
        assert!(ks.pass, "{ks:?}");
    }

    #[test]
    fn gamma_matches_closed_form() {
        // constant c, ν: log γ = c t + q ν w(t) − ½ q² ν² t
        let mut spec = OperatorSpec::zero(1, 1).unwrap();
        spec.potential = ScalarField::from(0.4);
        spec.noise[0].potential = ScalarField::from(0.5);
        spec.diffusion[0] = ScalarField::from(1.0);
        let q = WeightSequence::uniform(1, 0.8).unwrap();
        let p = PathBundle::draw(tg(), 1, 1, 7, 0);
        let c = simulate_characteristics(&spec, &q, &[0.0], 0.1, &p, &Default::default()).unwrap();
        let w = p.value(50, 1);
        let expected = (0.4 * 0.1 + 0.8 * 0.5 * w - 0.5 * 0.64 * 0.25 * 0.1f64).exp();
        assert!((c.gamma - expected).abs() < 1e-13);
        // drift B = −q²σν = 0 here, residual 2a = 2 > 0
        assert!(c.residual_active);
    }

    #[test]
    fn residual_factor_reproduces_the_matrix() {
        let mut spec = OperatorSpec::zero(2, 1).unwrap();
        spec.diffusion = alloc::vec![1.0.into(), 0.3.into(), 0.3.into(), 0.8.into()];
        spec.noise[0].advection = alloc::vec![0.5.into(), 0.2.into()];
        let q = WeightSequence::ones(1);
        let s = crate::discretization::symbol_matrix(&spec, &q, 0.0, &[0.0, 0.0]).unwrap();
        let f = residual_factor(&spec, &q, 0.0, &[0.0, 0.0]).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                let v: f64 = (0..2).map(|m| f[i * 2 + m] * f[j * 2 + m]).sum();
                assert!((v - s[i * 2 + j]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn forcing_requires_a_quadrature_rule() {
        let mut spec = OperatorSpec::zero(1, 1).unwrap();
        spec.forcing = ScalarField::from(2.0);
        let p = PathBundle::draw(tg(), 1, 0, 1, 0);
        let q = WeightSequence::ones(1);
        assert!(matches!(
            simulate_characteristics(&spec, &q, &[0.0], 0.1, &p, &Default::default()),
            Err(Error::Unsupported(_))
        ));
        for rule in [BackwardQuadrature::RightPoint, BackwardQuadrature::Trapezoid] {
            let opts = CharacteristicOptions { quadrature: Some(rule), ..Default::default() };
            let c = simulate_characteristics(&spec, &q, &[0.0], 0.1, &p, &opts).unwrap();
            assert!((c.forcing - 0.2).abs() < 1e-13);
        }
    }

    #[test]
    fn deterministic_equation_gives_exact_estimate() {
        // a = 0, b = 1: u(t,x) = u₀(x + t)
        let mut spec = OperatorSpec::zero(1, 1).unwrap();
        spec.form = Form::Nondivergence;
        spec.drift = alloc::vec![ScalarField::from(1.0)];
        let p = PathBundle::draw(tg(), 1, 0, 1, 0);
        let u0 = ScalarField::sin(1.0, 1.0, 0);
        let r = feynman_kac_estimate(&spec, &WeightSequence::ones(1), &u0, &[0.3], 0.1, &p, 10, 5, &Default::default()).unwrap();
        assert!((r.estimate[0] - (0.4f64).sin()).abs() < 1e-13);
        assert_eq!(r.standard_error[0], 0.0);
    }

    #[test]
    fn passive_scalar_is_outer_path_measurable() {
        let spec = OperatorSpec::passive_scalar(1, 0.5, alloc::vec![alloc::vec![ScalarField::from(1.0)]]).unwrap();
        let q = WeightSequence::ones(1);
        let u0 = ScalarField::sin(1.0, 1.0, 0);
        let p = PathBundle::draw(tg(), 1, 0, 9, 4);
        let a = feynman_kac_estimate(&spec, &q, &u0, &[1.1], 0.1, &p, 4, 1, &Default::default()).unwrap();
        let b = feynman_kac_estimate(&spec, &q, &u0, &[1.1], 0.1, &p, 4, 2, &Default::default()).unwrap();
        assert_eq!(a, EstimatorResult { seed: 1, ..b.clone() });
        // θ(t, x) = θ₀(x − w(t))
        assert!((a.estimate[0] - (1.1 - p.value(50, 1)).sin()).abs() < 1e-12);
    }

    #[test]
    fn nested_estimate_with_residual_diffusion() {
        // du = u_xx dt with q σ = 0: E over w̃ of u₀(x + √2 w̃(t)) = e^{−t} sin x
        let spec = OperatorSpec::heat_advection(1.0, 0.0);
        let mut spec = spec;
        spec.form = Form::Nondivergence;
        let p = PathBundle::draw(tg(), 1, 0, 1, 0);
        let u0 = ScalarField::sin(1.0, 1.0, 0);
        let r = feynman_kac_estimate(&spec, &WeightSequence::ones(1), &u0, &[1.0], 0.1, &p, 4000, 3, &Default::default()).unwrap();
        let exact = (-0.1f64).exp() * 1.0f64.sin();
        assert!((r.estimate[0] - exact).abs() < 4.0 * r.standard_error[0], "{r:?} vs {exact}");
        assert!(feynman_kac_estimate(&spec, &WeightSequence::ones(1), &u0, &[1.0], 0.1, &p, 1, 3, &Default::default()).is_err());
    }

    #[test]
    fn kv_check_without_noise_is_exact_and_rejects_other_classes() {
        let grid = SpatialGrid::new_1d(2.0 * PI, 32).unwrap();
        let u0f = ScalarField::sin(1.0, 1.0, 0);
        let spec = OperatorSpec::krylov_veretennikov(1, alloc::vec![alloc::vec![ScalarField::Zero]]).unwrap();
        let p = ChaosProblem {
            u0: grid.sample(&u0f, 0.0),
            spec,
            indices: MultiIndexSet::enumerate(2, 1, 2).unwrap(),
            basis: Arc::new(CosineBasis::new(0.1, 2).unwrap()),
            time: TimeGrid::new(0.1, 10).unwrap(),
            grid,
        };
        let sol = solve(&p, &SolveOptions::default(), &Sequential).unwrap();
        let samples: Vec<_> = (0..3).map(|i| GaussianSample::draw(2, 1, 1, i)).collect();
        let r = kv_pathwise_check(&sol, &u0f, &samples, 0.1, &Sequential).unwrap();
        assert!(r.max < 1e-14, "{r:?}");
        let mut p2 = p.clone();
        p2.spec = OperatorSpec::heat_advection(1.0, 1.0);
        let sol2 = solve(&p2, &SolveOptions::default(), &Sequential).unwrap();
        assert!(matches!(kv_pathwise_check(&sol2, &u0f, &samples, 0.1, &Sequential), Err(Error::Unsupported(_))));
    }
}
