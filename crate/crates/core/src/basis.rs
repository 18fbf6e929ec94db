//! Hermite polynomials, the temporal basis `m_i`, the Cameron–Martin
//! functions `ξ_α` and Wick exponentials.

use alloc::format;
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::f64::consts::PI;
use core::fmt;

#[allow(unused_imports)] // float methods come from libm without std
use num_traits::Float;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::multiindex::MultiIndex;
use crate::quadrature::simpson;
use crate::{Error, Result};

/// Probabilists' Hermite polynomial `H_n(t)` via
/// `H_{n+1} = t·H_n − n·H_{n−1}`.
pub fn hermite(n: u32, t: f64) -> f64 {
    let (mut prev, mut cur) = (1.0, t);
    if n == 0 {
        return prev;
    }
    for m in 1..n {
        let next = t * cur - f64::from(m) * prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// A bounded orthonormal system `{m_i}` on `[0, T]`.
///
/// Indices are 1-based. `eval` and `antiderivative` are called in inner
/// loops and do not range-check; use [`temporal_basis_eval`] for a checked
/// evaluation.
pub trait TemporalBasis: Send + Sync {
    fn horizon(&self) -> f64;
    fn modes(&self) -> usize;
    fn eval(&self, mode: usize, t: f64) -> f64;
    /// `∫_0^t m_i(s) ds`.
    fn antiderivative(&self, mode: usize, t: f64) -> f64;
}

/// `m_1 = 1/√T`, `m_i = √(2/T)·cos(π(i−1)t/T)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CosineBasis {
    horizon: f64,
    modes: usize,
}

impl CosineBasis {
    pub fn new(horizon: f64, modes: usize) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) || modes == 0 {
            return Err(Error::InvalidParameter(format!(
                "cosine basis needs T > 0 and I ≥ 1, got T={horizon}, I={modes}"
            )));
        }
        Ok(Self { horizon, modes })
    }
}

impl TemporalBasis for CosineBasis {
    fn horizon(&self) -> f64 {
        self.horizon
    }

    fn modes(&self) -> usize {
        self.modes
    }

    fn eval(&self, mode: usize, t: f64) -> f64 {
        let big_t = self.horizon;
        if mode == 1 {
            1.0 / big_t.sqrt()
        } else {
            (2.0 / big_t).sqrt() * (PI * (mode - 1) as f64 * t / big_t).cos()
        }
    }

    fn antiderivative(&self, mode: usize, t: f64) -> f64 {
        let big_t = self.horizon;
        if mode == 1 {
            t / big_t.sqrt()
        } else {
            let w = PI * (mode - 1) as f64 / big_t;
            (2.0 / big_t).sqrt() * (w * t).sin() / w
        }
    }
}

/// Range-checked `m_i(t)`.
pub fn temporal_basis_eval(basis: &dyn TemporalBasis, mode: usize, t: f64) -> Result<f64> {
    if mode == 0 || mode > basis.modes() {
        return Err(Error::ModeOutOfRange { mode, max: basis.modes() });
    }
    if !(0.0..=basis.horizon()).contains(&t) {
        return Err(Error::TimeOutOfRange { t, horizon: basis.horizon() });
    }
    Ok(basis.eval(mode, t))
}

/// Where a sample came from: base seed and the stream index mixed into it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SampleSeed {
    pub seed: u64,
    pub index: u64,
}

/// A realisation of the `I × K` array `ξ_ik`, stored row-major by mode.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianSample {
    modes: usize,
    channels: usize,
    xi: Vec<f64>,
    seed: Option<SampleSeed>,
}

/// Counter-based generator for stream `index` of `seed`.
pub fn stream_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

impl GaussianSample {
    pub fn new(modes: usize, channels: usize, xi: Vec<f64>) -> Result<Self> {
        if xi.len() != modes * channels {
            return Err(Error::DimensionMismatch(format!(
                "{} values for a {modes}×{channels} sample",
                xi.len()
            )));
        }
        if xi.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("non-finite sample entry".into()));
        }
        Ok(Self { modes, channels, xi, seed: None })
    }

    /// Draws independent standard normals from stream `index` of `seed`.
    pub fn draw(modes: usize, channels: usize, seed: u64, index: u64) -> Self {
        let mut rng = stream_rng(seed, index);
        let xi = (0..modes * channels)
            .map(|_| StandardNormal.sample(&mut rng))
            .collect();
        Self { modes, channels, xi, seed: Some(SampleSeed { seed, index }) }
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn seed(&self) -> Option<SampleSeed> {
        self.seed
    }

    /// `ξ_ik`, 1-based.
    pub fn xi(&self, mode: usize, channel: usize) -> f64 {
        self.xi[(mode - 1) * self.channels + channel - 1]
    }

    pub fn values(&self) -> &[f64] {
        &self.xi
    }

    fn covers(&self, alpha: &MultiIndex) -> Result<()> {
        if alpha.max_mode() as usize > self.modes || alpha.max_channel() as usize > self.channels {
            return Err(Error::DimensionMismatch(format!(
                "multi-index {alpha} outside a {}×{} sample",
                self.modes, self.channels
            )));
        }
        Ok(())
    }
}

/// `ξ_α = (1/√α!) Π H_{α_i^k}(ξ_ik)`.
pub fn xi_alpha(alpha: &MultiIndex, sample: &GaussianSample) -> Result<f64> {
    sample.covers(alpha)?;
    let product: f64 = alpha
        .entries()
        .iter()
        .map(|e| hermite(e.count, sample.xi(e.mode as usize, e.channel as usize)))
        .product();
    Ok(product / alpha.factorial_f64().sqrt())
}

/// Truncated reconstruction `w_k(t) = Σ_i ξ_ik ∫_0^t m_i`.
pub fn gaussian_to_path(sample: &GaussianSample, basis: &dyn TemporalBasis, channel: usize, t: f64) -> f64 {
    let modes = sample.modes.min(basis.modes());
    (1..=modes)
        .map(|i| sample.xi(i, channel) * basis.antiderivative(i, t))
        .sum()
}

/// A real function of time.
#[derive(Clone)]
pub enum TimeProfile {
    Zero,
    Constant(f64),
    /// `amplitude · m_mode(t)` for the basis the profile is evaluated against.
    Mode { mode: usize, amplitude: f64 },
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl TimeProfile {
    pub fn eval(&self, basis: &dyn TemporalBasis, t: f64) -> f64 {
        match self {
            TimeProfile::Zero => 0.0,
            TimeProfile::Constant(c) => *c,
            TimeProfile::Mode { mode, amplitude } => amplitude * basis.eval(*mode, t),
            TimeProfile::Custom(f) => f(t),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, TimeProfile::Zero)
            || matches!(self, TimeProfile::Constant(c) if *c == 0.0)
            || matches!(self, TimeProfile::Mode { amplitude, .. } if *amplitude == 0.0)
    }
}

impl fmt::Debug for TimeProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TimeProfile::Zero => f.write_str("Zero"),
            TimeProfile::Constant(c) => f.debug_tuple("Constant").field(c).finish(),
            TimeProfile::Mode { mode, amplitude } => f
                .debug_struct("Mode")
                .field("mode", mode)
                .field("amplitude", amplitude)
                .finish(),
            TimeProfile::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

/// Test function `h = (h_1, …, h_K)`.
#[derive(Debug, Clone)]
pub struct TestFunctionH {
    components: Vec<TimeProfile>,
}

impl TestFunctionH {
    pub fn new(components: Vec<TimeProfile>) -> Self {
        Self { components }
    }

    pub fn zero(channels: usize) -> Self {
        Self { components: alloc::vec![TimeProfile::Zero; channels] }
    }

    pub fn channels(&self) -> usize {
        self.components.len()
    }

    pub fn components(&self) -> &[TimeProfile] {
        &self.components
    }

    /// `h_k(t)` for 1-based `k`.
    pub fn eval(&self, basis: &dyn TemporalBasis, channel: usize, t: f64) -> f64 {
        self.components[channel - 1].eval(basis, t)
    }

    /// `Σ_k ∫_0^T h_k²`.
    pub fn norm_squared(&self, basis: &dyn TemporalBasis, intervals: usize) -> Result<f64> {
        let mut acc = 0.0;
        for c in &self.components {
            acc += simpson(|t| c.eval(basis, t).powi(2), 0.0, basis.horizon(), intervals)?;
        }
        Ok(acc)
    }
}

/// Projections `h_ik = ∫_0^T h_k m_i`, `I × K`, row-major by mode.
#[derive(Debug, Clone, PartialEq)]
pub struct HCoefficients {
    modes: usize,
    channels: usize,
    values: Vec<f64>,
}

impl HCoefficients {
    pub fn from_values(modes: usize, channels: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != modes * channels {
            return Err(Error::DimensionMismatch(format!(
                "{} values for a {modes}×{channels} coefficient array",
                values.len()
            )));
        }
        Ok(Self { modes, channels, values })
    }

    pub fn get(&self, mode: usize, channel: usize) -> f64 {
        self.values[(mode - 1) * self.channels + channel - 1]
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Simpson projections of `h` onto every basis mode.
pub fn h_coefficients(h: &TestFunctionH, basis: &dyn TemporalBasis, intervals: usize) -> Result<HCoefficients> {
    let modes = basis.modes();
    let channels = h.channels();
    let mut values = Vec::with_capacity(modes * channels);
    for i in 1..=modes {
        for k in 1..=channels {
            let comp = &h.components[k - 1];
            let v = if comp.is_zero() {
                0.0
            } else {
                simpson(|t| comp.eval(basis, t) * basis.eval(i, t), 0.0, basis.horizon(), intervals)?
            };
            values.push(v);
        }
    }
    Ok(HCoefficients { modes, channels, values })
}

/// `h^α = Π h_ik^{α_i^k}`.
pub fn h_power(hc: &HCoefficients, alpha: &MultiIndex) -> Result<f64> {
    if alpha.max_mode() as usize > hc.modes || alpha.max_channel() as usize > hc.channels {
        return Err(Error::DimensionMismatch(format!(
            "multi-index {alpha} outside a {}×{} coefficient array",
            hc.modes, hc.channels
        )));
    }
    Ok(alpha
        .entries()
        .iter()
        .map(|e| hc.get(e.mode as usize, e.channel as usize).powi(e.count as i32))
        .product())
}

/// `E(t, h) = exp(Σ_k ∫_0^t h_k dw_k − ½ ∫_0^t h_k²)` with `dw_k` taken from
/// the truncated path reconstruction, both integrals by Simpson.
pub fn wick_exponential(
    h: &TestFunctionH,
    sample: &GaussianSample,
    basis: &dyn TemporalBasis,
    t: f64,
    intervals: usize,
) -> Result<f64> {
    if h.channels() > sample.channels() {
        return Err(Error::DimensionMismatch(format!(
            "h has {} channels, sample has {}",
            h.channels(),
            sample.channels()
        )));
    }
    if !(0.0..=basis.horizon()).contains(&t) {
        return Err(Error::TimeOutOfRange { t, horizon: basis.horizon() });
    }
    if t == 0.0 {
        return Ok(1.0);
    }
    let modes = sample.modes().min(basis.modes());
    let mut exponent = 0.0;
    for (k, comp) in h.components().iter().enumerate() {
        if comp.is_zero() {
            continue;
        }
        let channel = k + 1;
        let stochastic = simpson(
            |s| {
                let dw: f64 = (1..=modes).map(|i| sample.xi(i, channel) * basis.eval(i, s)).sum();
                comp.eval(basis, s) * dw
            },
            0.0,
            t,
            intervals,
        )?;
        let energy = simpson(|s| comp.eval(basis, s).powi(2), 0.0, t, intervals)?;
        exponent += stochastic - 0.5 * energy;
    }
    Ok(exponent.exp())
}

/// Truncated generating series `Σ_{|α| ≤ N} (h^α/√α!) ξ_α` over the given indices.
pub fn wick_series(hc: &HCoefficients, sample: &GaussianSample, indices: &[MultiIndex]) -> Result<f64> {
    let mut acc = 0.0;
    for alpha in indices {
        acc += h_power(hc, alpha)? / alpha.factorial_f64().sqrt() * xi_alpha(alpha, sample)?;
    }
    Ok(acc)
}
