use alloc::format;
use alloc::vec::Vec;

#[allow(unused_imports)] // float methods come from libm without std
use num_traits::Float;

use super::paths::PathBundle;
use super::stats::EstimatorResult;
use crate::discretization::{
    assemble_m, parabolicity_classify, sample_checked, time_samples, FieldVector, OperatorSpec, Parabolicity,
    SpatialGrid, SpecOperator, ThetaStepper, DEFAULT_SYMBOL_TOLERANCE, DEFAULT_THETA, DEFAULT_TIME_SAMPLES,
};
use crate::multiindex::WeightSequence;
use crate::propagator::TimeGrid;
use crate::sparse::CsrMatrix;
use crate::{Error, Executor, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McOptions {
    pub theta: f64,
    /// Run even when the unweighted equation is not parabolic.
    pub force: bool,
}

impl Default for McOptions {
    fn default() -> Self {
        Self { theta: DEFAULT_THETA, force: false }
    }
}

/// Monte Carlo mean and second moment fields at the final time.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentEstimate {
    pub t: f64,
    pub mean: EstimatorResult,
    pub second_moment: EstimatorResult,
}

/// Direct simulation of `du = (Au + f)dt + (M_k u + g_k)dw_k`, implicit in
/// `A` and explicit in the Itô increment:
///
/// ```text
/// (I − θdt A) u⁺ = (I + (1−θ)dt A) u + dt f̄ + Σ_k (M_k u + g_k) Δw_k
/// ```
///
/// Path `p` uses the increments of [`PathBundle::draw`] for stream `p` of `seed`.
#[allow(clippy::too_many_arguments)]
pub fn mc_spde<E: Executor>(
    spec: &OperatorSpec,
    grid: &SpatialGrid,
    time: &TimeGrid,
    u0: &FieldVector,
    paths: usize,
    seed: u64,
    options: &McOptions,
    executor: &E,
) -> Result<MomentEstimate> {
    spec.validate()?;
    grid.check(u0)?;
    if paths < 2 {
        return Err(Error::InvalidParameter(format!("at least 2 paths are needed, got {paths}")));
    }
    if !options.force {
        let class = parabolicity_classify(
            spec,
            &WeightSequence::ones(spec.channels()),
            grid,
            &time_samples(time.horizon(), DEFAULT_TIME_SAMPLES),
            DEFAULT_SYMBOL_TOLERANCE,
        )?;
        if let Parabolicity::None { margin, .. } = class {
            return Err(Error::Unsupported(format!(
                "the unweighted equation is not parabolic (margin {margin}); Monte Carlo moments blow up"
            )));
        }
    }
    let channels = spec.channels();
    let steps = time.steps();
    let dt = time.dt();
    let theta = options.theta;
    let family = SpecOperator::new(spec, grid);
    let stepper = ThetaStepper::new(&family, dt, theta)?;
    let constant = !spec.is_time_dependent();
    let prepared = if constant {
        alloc::vec![stepper.prepare(0.0)?]
    } else {
        (0..steps).map(|j| stepper.prepare(time.time(j))).collect::<Result<Vec<_>>>()?
    };
    let node_count = if constant { 1 } else { steps };
    let m_ops: Vec<Vec<CsrMatrix>> = (0..node_count)
        .map(|j| (1..=channels).map(|k| Ok(assemble_m(spec, grid, k, time.time(j))?.matrix)).collect())
        .collect::<Result<_>>()?;
    let optional = |field: &crate::profile::ScalarField, name: &str, t: f64| -> Result<Option<Vec<f64>>> {
        if field.is_zero() {
            Ok(None)
        } else {
            Ok(Some(sample_checked(grid, field, name, t)?.values))
        }
    };
    let g: Vec<Vec<Option<Vec<f64>>>> = (0..steps)
        .map(|j| spec.noise.iter().map(|c| optional(&c.forcing, "g", time.time(j))).collect())
        .collect::<Result<_>>()?;
    let f_bar: Vec<Option<Vec<f64>>> = (0..steps)
        .map(|j| {
            let a = optional(&spec.forcing, "f", time.time(j))?;
            let b = optional(&spec.forcing, "f", time.time(j + 1))?;
            Ok(match (a, b) {
                (Some(a), Some(b)) => Some(a.iter().zip(&b).map(|(x, y)| (1.0 - theta) * x + theta * y).collect()),
                _ => None,
            })
        })
        .collect::<Result<_>>()?;
    let n = grid.len();

    let finals = executor.map(paths, |p| -> Result<Vec<f64>> {
        let bundle = PathBundle::draw(*time, channels, 0, seed, p as u64);
        let mut u = u0.values.clone();
        let mut src = alloc::vec![0.0; n];
        let mut mu = alloc::vec![0.0; n];
        for j in 0..steps {
            let slot = if constant { 0 } else { j };
            src.iter_mut().for_each(|s| *s = 0.0);
            if let Some(f) = &f_bar[j] {
                src.copy_from_slice(f);
            }
            // The stepper adds dt·source, so the noise enters as Δw/dt.
            for k in 0..channels {
                let w = bundle.dw(j, k + 1) / dt;
                m_ops[slot][k].apply(&u, &mut mu);
                src.iter_mut().zip(&mu).for_each(|(s, m)| *s += w * m);
                if let Some(gk) = &g[j][k] {
                    src.iter_mut().zip(gk).for_each(|(s, g)| *s += w * g);
                }
            }
            prepared[slot].advance(&mut u, Some(&src))?;
            if u.iter().any(|v| !v.is_finite()) {
                return Err(Error::BlowUp { index: format!("path {p}"), t: time.time(j + 1) });
            }
        }
        Ok(u)
    });
    let finals = finals.into_iter().collect::<Result<Vec<_>>>()?;
    let squares: Vec<Vec<f64>> = finals.iter().map(|u| u.iter().map(|v| v * v).collect()).collect();
    Ok(MomentEstimate {
        t: time.horizon(),
        mean: EstimatorResult::from_samples(&finals, seed)?,
        second_moment: EstimatorResult::from_samples(&squares, seed)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracles::exact_fourier_mode;
    use crate::Sequential;
    use core::f64::consts::PI;

    #[test]
    fn noise_free_paths_coincide() {
        let grid = SpatialGrid::new_1d(2.0 * PI, 16).unwrap();
        let u0 = grid.sample_fn(|x| x[0].sin());
        let tg = TimeGrid::new(0.5, 16).unwrap();
        let spec = OperatorSpec::heat_advection(1.0, 0.0);
        let r = mc_spde(&spec, &grid, &tg, &u0, 8, 1, &McOptions::default(), &Sequential).unwrap();
        assert!(r.mean.standard_error.iter().all(|s| *s == 0.0));
    }

    #[test]
    fn refuses_supercritical_unless_forced() {
        let grid = SpatialGrid::new_1d(2.0 * PI, 16).unwrap();
        let u0 = grid.sample_fn(|x| x[0].sin());
        let tg = TimeGrid::new(0.1, 8).unwrap();
        let spec = OperatorSpec::heat_advection(1.0, 2.0);
        assert!(matches!(
            mc_spde(&spec, &grid, &tg, &u0, 4, 1, &McOptions::default(), &Sequential),
            Err(Error::Unsupported(_))
        ));
        let forced = McOptions { force: true, ..McOptions::default() };
        assert!(mc_spde(&spec, &grid, &tg, &u0, 4, 1, &forced, &Sequential).is_ok());
    }

    #[test]
    fn fourier_mode_moments() {
        let grid = SpatialGrid::new_1d(2.0 * PI, 32).unwrap();
        let u0 = grid.sample_fn(|x| x[0].sin());
        let tg = TimeGrid::new(0.5, 64).unwrap();
        let spec = OperatorSpec::heat_advection(1.0, 1.0);
        let r = mc_spde(&spec, &grid, &tg, &u0, 2000, 42, &McOptions::default(), &Sequential).unwrap();
        let exact = exact_fourier_mode(1.0, 1.0, 1.0, 0.5, 2.0 * PI);
        // ∫ E u² with a pooled standard error
        let integral = grid.integral(&FieldVector::new(r.second_moment.estimate.clone()));
        let se = grid.cell_volume() * r.second_moment.standard_error.iter().sum::<f64>();
        assert!((integral - exact.second_moment_integral).abs() < 3.0 * se + 0.01, "{integral} vs {}", exact.second_moment_integral);
        let probe = 8; // x = π/2
        let m = exact.mean_amplitude * grid.coords(probe)[0].sin();
        assert!((r.mean.estimate[probe] - m).abs() < 4.0 * r.mean.standard_error[probe]);
    }
}
