use alloc::format;
use alloc::vec::Vec;

#[allow(unused_imports)] // float methods come from libm without std
use num_traits::Float;

use super::grid::SpatialGrid;
use super::operator::{assemble_a, assemble_m};
use super::spec::OperatorSpec;
use crate::multiindex::WeightSequence;
use crate::sparse::largest_symmetric_eigenvalue;
use crate::{Error, Result};

/// Margin within which the minimum symbol eigenvalue counts as zero.
pub const DEFAULT_SYMBOL_TOLERANCE: f64 = 1e-10;
/// Default number of time samples for the symbol check.
pub const DEFAULT_TIME_SAMPLES: usize = 5;

/// Outcome of the pointwise symbol check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Parabolicity {
    /// Minimum eigenvalue `ε̂ > tol`.
    Strong { margin: f64 },
    /// Minimum eigenvalue within `[−tol, tol]`.
    Weak { margin: f64 },
    /// Negative minimum eigenvalue at `(t, x)`.
    None { margin: f64, t: f64, x: [f64; 2] },
}

impl Parabolicity {
    pub fn margin(&self) -> f64 {
        match *self {
            Parabolicity::Strong { margin } | Parabolicity::Weak { margin } | Parabolicity::None { margin, .. } => margin,
        }
    }

    pub fn is_strong(&self) -> bool {
        matches!(self, Parabolicity::Strong { .. })
    }

    pub fn label(&self) -> &'static str {
        match self {
            Parabolicity::Strong { .. } => "strong",
            Parabolicity::Weak { .. } => "weak",
            Parabolicity::None { .. } => "none",
        }
    }
}

/// `t_0 = 0, …, t_{m−1} = T` equally spaced (a single sample at 0 when `m = 1`).
pub fn time_samples(horizon: f64, count: usize) -> Vec<f64> {
    match count {
        0 | 1 => alloc::vec![0.0],
        m => (0..m).map(|j| horizon * j as f64 / (m - 1) as f64).collect(),
    }
}

fn min_eigenvalue_sym(s: &[f64], d: usize) -> f64 {
    if d == 1 {
        s[0]
    } else {
        let (a, b, c) = (s[0], 0.5 * (s[1] + s[2]), s[3]);
        let mean = 0.5 * (a + c);
        let rad = (0.25 * (a - c) * (a - c) + b * b).sqrt();
        mean - rad
    }
}

/// Symbol matrix `S_ij = 2a_ij − Σ_k q_k² σ_ik σ_jk` at `(t, x)`, row-major.
pub fn symbol_matrix(spec: &OperatorSpec, q: &WeightSequence, t: f64, x: &[f64]) -> Result<Vec<f64>> {
    let d = spec.dim;
    let mut s = alloc::vec![0.0; d * d];
    for i in 0..d {
        for j in 0..d {
            s[i * d + j] = 2.0 * spec.a(i, j).eval(t, x);
        }
    }
    for (k, ch) in spec.noise.iter().enumerate() {
        let qk = q.q(k + 1)?;
        let sig: Vec<f64> = ch.advection.iter().map(|f| f.eval(t, x)).collect();
        for i in 0..d {
            for j in 0..d {
                s[i * d + j] -= qk * qk * sig[i] * sig[j];
            }
        }
    }
    if s.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteCoefficient { name: "symbol".into(), t });
    }
    Ok(s)
}

/// Minimum eigenvalue of the symbol over every grid point and the given
/// times, classified against `tol`. This is a sampled necessary condition,
/// not a proof of parabolicity.
pub fn parabolicity_classify(
    spec: &OperatorSpec,
    q: &WeightSequence,
    grid: &SpatialGrid,
    times: &[f64],
    tol: f64,
) -> Result<Parabolicity> {
    let d = spec.dim;
    let mut worst = f64::INFINITY;
    let mut at = (0.0, [0.0; 2]);
    for &t in times {
        for r in 0..grid.len() {
            let x = grid.coords(r);
            let s = symbol_matrix(spec, q, t, &x[..d])?;
            let m = min_eigenvalue_sym(&s, d);
            if m < worst {
                worst = m;
                at = (t, x);
            }
        }
    }
    Ok(if worst > tol {
        Parabolicity::Strong { margin: worst }
    } else if worst >= -tol {
        Parabolicity::Weak { margin: worst }
    } else {
        Parabolicity::None { margin: worst, t: at.0, x: at.1 }
    })
}

/// A suggested weight sequence with the margin it guarantees.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightSuggestion {
    pub weights: WeightSequence,
    pub classification: Parabolicity,
    /// Lower bound on the symbol margin implied by the construction.
    pub guaranteed_margin: f64,
}

/// Weights that restore strong parabolicity.
///
/// `factor ∈ (0, 1)` scales the admissible weights. With `ν` the viscosity
/// (or the smallest eigenvalue of `a_ij` over the samples), the uniform
/// choice is `q = factor·(2ν/(C_σ d))^{1/2}` with
/// `C_σ = max |Σ_k σ_ik σ_jk|`; when the per-channel bounds
/// `C_k = max_i sup |σ_ik|` differ the choice is
/// `q_k = (δν)^{1/2}/(d 2^k C_k)` with `δ = 2·factor²`.
pub fn suggest_weights(
    spec: &OperatorSpec,
    factor: f64,
    grid: &SpatialGrid,
    times: &[f64],
) -> Result<WeightSuggestion> {
    if !(factor > 0.0 && factor < 1.0) {
        return Err(Error::InvalidParameter(format!("weight factor must lie in (0, 1), got {factor}")));
    }
    let d = spec.dim;
    let channels = spec.channels();
    if channels == 0 {
        return Err(Error::InvalidParameter("no noise channels".into()));
    }
    let mut nu = f64::INFINITY;
    let mut c_sigma: f64 = 0.0;
    let mut c_k = alloc::vec![0.0f64; channels];
    for &t in times {
        for r in 0..grid.len() {
            let x = grid.coords(r);
            let x = &x[..d];
            let mut a = alloc::vec![0.0; d * d];
            for i in 0..d {
                for j in 0..d {
                    a[i * d + j] = spec.a(i, j).eval(t, x);
                }
            }
            nu = nu.min(min_eigenvalue_sym(&a, d));
            let sig: Vec<Vec<f64>> = spec
                .noise
                .iter()
                .map(|c| c.advection.iter().map(|f| f.eval(t, x)).collect())
                .collect();
            for i in 0..d {
                for j in 0..d {
                    let s: f64 = sig.iter().map(|s| s[i] * s[j]).sum();
                    c_sigma = c_sigma.max(s.abs());
                }
            }
            for (k, s) in sig.iter().enumerate() {
                c_k[k] = s.iter().fold(c_k[k], |m, v| m.max(v.abs()));
            }
        }
    }
    if let Some(v) = spec.viscosity {
        nu = nu.min(v);
    }
    if !(nu.is_finite() && nu > 0.0) {
        return Err(Error::Degenerate(format!("diffusion is not uniformly elliptic (ν = {nu})")));
    }
    let dim = d as f64;
    let c_max = c_k.iter().fold(0.0f64, |m, v| m.max(*v));
    let uniform = c_k.iter().all(|c| (c - c_max).abs() <= 1e-12 * c_max.max(1.0));
    let (q, guaranteed) = if c_sigma == 0.0 {
        (alloc::vec![1.0; channels], 2.0 * nu)
    } else if uniform {
        let q = factor * (2.0 * nu / (c_sigma * dim)).sqrt();
        (alloc::vec![q; channels], 2.0 * nu * (1.0 - factor * factor))
    } else {
        let delta = 2.0 * factor * factor;
        let q: Vec<f64> = c_k
            .iter()
            .enumerate()
            .map(|(k, &c)| {
                if c == 0.0 {
                    1.0
                } else {
                    (delta * nu).sqrt() / (dim * 2f64.powi(k as i32 + 1) * c)
                }
            })
            .collect();
        (q, 2.0 * nu - delta * nu / (3.0 * dim))
    };
    let weights = WeightSequence::new(q)?;
    let classification = parabolicity_classify(spec, &weights, grid, times, DEFAULT_SYMBOL_TOLERANCE)?;
    if !classification.is_strong() {
        return Err(Error::Degenerate(format!(
            "suggested weights leave margin {}",
            classification.margin()
        )));
    }
    Ok(WeightSuggestion { weights, classification, guaranteed_margin: guaranteed })
}

/// Smallest `C₂` with `2⟨A v, v⟩ + Σ_k q_k² ‖M_k v‖² ≤ C₂ ‖v‖²` for the
/// discrete operators, maximised over the given times (Lanczos estimate of
/// the top eigenvalue of `A + Aᵀ + Σ q_k² M_kᵀ M_k`).
pub fn energy_constant(spec: &OperatorSpec, q: &WeightSequence, grid: &SpatialGrid, times: &[f64]) -> Result<f64> {
    let n = grid.len();
    let mut best = f64::NEG_INFINITY;
    for &t in times {
        let a = assemble_a(spec, grid, t, spec.form)?.matrix;
        let ms = (1..=spec.channels())
            .map(|k| Ok((q.q(k)?, assemble_m(spec, grid, k, t)?.matrix)))
            .collect::<Result<Vec<_>>>()?;
        let mut tmp = alloc::vec![0.0; n];
        let mut tmp2 = alloc::vec![0.0; n];
        let lambda = largest_symmetric_eigenvalue(n, 300, |x, y| {
            a.apply(x, y);
            a.apply_transpose(x, &mut tmp);
            y.iter_mut().zip(&tmp).for_each(|(yi, ti)| *yi += ti);
            for (qk, m) in &ms {
                m.apply(x, &mut tmp);
                m.apply_transpose(&tmp, &mut tmp2);
                y.iter_mut().zip(&tmp2).for_each(|(yi, ti)| *yi += qk * qk * ti);
            }
        })?;
        best = best.max(lambda);
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::ScalarField;
    use core::f64::consts::PI;

    fn grid() -> SpatialGrid {
        SpatialGrid::new_1d(2.0 * PI, 16).unwrap()
    }

    fn classify(a2: f64, sigma: f64, q: f64) -> Parabolicity {
        let spec = OperatorSpec::heat_advection(a2, sigma);
        let q = WeightSequence::uniform(1, q).unwrap();
        parabolicity_classify(&spec, &q, &grid(), &time_samples(1.0, 5), DEFAULT_SYMBOL_TOLERANCE).unwrap()
    }

    #[test]
    fn classification_examples() {
        assert_eq!(classify(1.0, 1.0, 1.0), Parabolicity::Strong { margin: 1.0 });
        assert!(matches!(classify(1.0, 2f64.sqrt(), 1.0), Parabolicity::Weak { .. }));
        assert!(matches!(classify(1.0, 2.0, 1.0), Parabolicity::None { margin, .. } if margin == -2.0));
        assert_eq!(classify(1.0, 2.0, 0.5), Parabolicity::Strong { margin: 1.0 });
    }

    #[test]
    fn classification_is_resolution_independent() {
        let spec = OperatorSpec::passive_scalar(
            2,
            0.4,
            alloc::vec![alloc::vec![ScalarField::Zero, ScalarField::sin(1.0, 1.0, 0)]],
        )
        .unwrap();
        let q = WeightSequence::ones(1);
        let times = time_samples(1.0, 5);
        let coarse = SpatialGrid::new_2d([2.0 * PI, 2.0 * PI], [16, 16]).unwrap();
        let fine = SpatialGrid::new_2d([2.0 * PI, 2.0 * PI], [64, 64]).unwrap();
        let a = parabolicity_classify(&spec, &q, &coarse, &times, 1e-10).unwrap();
        let b = parabolicity_classify(&spec, &q, &fine, &times, 1e-10).unwrap();
        assert_eq!(a.label(), b.label());
        assert_eq!(a.label(), "none");
        let q = WeightSequence::uniform(1, 0.5).unwrap();
        let a = parabolicity_classify(&spec, &q, &coarse, &times, 1e-10).unwrap();
        let b = parabolicity_classify(&spec, &q, &fine, &times, 1e-10).unwrap();
        assert_eq!((a.label(), b.label()), ("strong", "strong"));
    }

    #[test]
    fn uniform_weight_suggestion() {
        // ν = ½, C_σ = 1, d = 1, factor 0.9 → q = 0.9
        let spec = OperatorSpec::passive_scalar(1, 0.5, alloc::vec![alloc::vec![ScalarField::from(1.0)]]).unwrap();
        let s = suggest_weights(&spec, 0.9, &grid(), &[0.0]).unwrap();
        assert!((s.weights.as_slice()[0] - 0.9).abs() < 1e-15);
        assert!(s.classification.is_strong());
        assert!(s.classification.margin() >= s.guaranteed_margin - 1e-12);
    }

    #[test]
    fn per_channel_weight_suggestion() {
        let spec = OperatorSpec::passive_scalar(
            1,
            0.5,
            alloc::vec![alloc::vec![ScalarField::from(3.0)], alloc::vec![ScalarField::sin(1.0, 1.0, 0)]],
        )
        .unwrap();
        let s = suggest_weights(&spec, 0.5, &grid(), &[0.0]).unwrap();
        // q_k = (δν)^{1/2} / (d 2^k C_k), δ = 0.5
        let q = s.weights.as_slice();
        assert!((q[0] - 0.5 / (2.0 * 3.0)).abs() < 1e-12);
        assert!(s.classification.is_strong());
        assert!(s.classification.margin() >= s.guaranteed_margin - 1e-12);
    }

    #[test]
    fn supercritical_suggestion_restores_strong_parabolicity() {
        let spec = OperatorSpec::heat_advection(1.0, 2.0);
        let s = suggest_weights(&spec, 0.5, &grid(), &[0.0]).unwrap();
        let c = parabolicity_classify(&spec, &s.weights, &grid(), &[0.0], 1e-10).unwrap();
        assert!(c.is_strong());
    }

    #[test]
    fn inviscid_equation_is_degenerate() {
        let spec = OperatorSpec::passive_scalar(1, 0.0, alloc::vec![alloc::vec![ScalarField::from(1.0)]]).unwrap();
        assert!(matches!(suggest_weights(&spec, 0.5, &grid(), &[0.0]), Err(Error::Degenerate(_))));
    }

    #[test]
    fn energy_constant_of_weakly_parabolic_transport_is_zero() {
        let g = SpatialGrid::new_1d(2.0 * PI, 64).unwrap();
        let spec = OperatorSpec::heat_advection(0.5, 1.0);
        let c2 = energy_constant(&spec, &WeightSequence::ones(1), &g, &[0.0]).unwrap();
        assert!(c2.abs() < 1e-9, "{c2}");
        let spec = OperatorSpec::heat_advection(1.0, 2.0);
        let c2 = energy_constant(&spec, &WeightSequence::ones(1), &g, &[0.0]).unwrap();
        assert!(c2 > 1.0, "{c2}");
        let c2 = energy_constant(&spec, &WeightSequence::uniform(1, 0.5).unwrap(), &g, &[0.0]).unwrap();
        assert!(c2.abs() < 1e-9, "{c2}");
        // potential shifts the constant by 2c
        let mut spec = OperatorSpec::heat_advection(1.0, 0.0);
        spec.potential = ScalarField::from(0.3);
        let c2 = energy_constant(&spec, &WeightSequence::ones(1), &g, &[0.0]).unwrap();
        assert!((c2 - 0.6).abs() < 1e-9, "{c2}");
    }
}
