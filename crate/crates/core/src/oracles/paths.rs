use alloc::format;
use alloc::vec::Vec;

#[allow(unused_imports)] // float methods come from libm without std
use num_traits::Float;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::basis::{gaussian_to_path, stream_rng, GaussianSample, TemporalBasis};
use crate::propagator::TimeGrid;
use crate::{Error, Result};

/// Brownian increments on a time grid: `w_k` and optionally independent `w̃_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct PathBundle {
    time: TimeGrid,
    channels: usize,
    /// `[step·channels + k]`.
    increments: Vec<f64>,
    residual_channels: usize,
    residual: Vec<f64>,
    seed: Option<(u64, u64)>,
}

impl PathBundle {
    /// Independent `N(0, dt)` increments from stream `index` of `seed`; the
    /// `w` increments are drawn before the `w̃` ones, step by step.
    pub fn draw(time: TimeGrid, channels: usize, residual_channels: usize, seed: u64, index: u64) -> Self {
        let mut rng = stream_rng(seed, index);
        let sd = time.dt().sqrt();
        let steps = time.steps();
        let mut increments = Vec::with_capacity(steps * channels);
        let mut residual = Vec::with_capacity(steps * residual_channels);
        for _ in 0..steps {
            for _ in 0..channels {
                increments.push(sd * rng.sample::<f64, _>(StandardNormal));
            }
            for _ in 0..residual_channels {
                residual.push(sd * rng.sample::<f64, _>(StandardNormal));
            }
        }
        Self { time, channels, increments, residual_channels, residual, seed: Some((seed, index)) }
    }

    /// Increments of the truncated reconstruction `w_k(t) = Σ_i ξ_ik ∫₀ᵗ m_i`.
    pub fn from_sample(sample: &GaussianSample, basis: &dyn TemporalBasis, time: TimeGrid) -> Self {
        let channels = sample.channels();
        let mut increments = Vec::with_capacity(time.steps() * channels);
        let mut prev: Vec<f64> = (1..=channels).map(|k| gaussian_to_path(sample, basis, k, 0.0)).collect();
        for j in 1..=time.steps() {
            let t = time.time(j);
            for (k, p) in prev.iter_mut().enumerate() {
                let w = gaussian_to_path(sample, basis, k + 1, t);
                increments.push(w - *p);
                *p = w;
            }
        }
        let seed = sample.seed().map(|s| (s.seed, s.index));
        Self { time, channels, increments, residual_channels: 0, residual: Vec::new(), seed }
    }

    /// Explicit increments, `[step·channels + k]`.
    pub fn from_increments(time: TimeGrid, channels: usize, increments: Vec<f64>) -> Result<Self> {
        if increments.len() != time.steps() * channels {
            return Err(Error::DimensionMismatch(format!(
                "{} increments for {} steps × {channels} channels",
                increments.len(),
                time.steps()
            )));
        }
        Ok(Self { time, channels, increments, residual_channels: 0, residual: Vec::new(), seed: None })
    }

    /// Replaces the `w̃` increments.
    pub fn with_residual(mut self, channels: usize, increments: Vec<f64>) -> Result<Self> {
        if increments.len() != self.time.steps() * channels {
            return Err(Error::DimensionMismatch("residual increments do not match the grid".into()));
        }
        self.residual_channels = channels;
        self.residual = increments;
        Ok(self)
    }

    pub fn time(&self) -> &TimeGrid {
        &self.time
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn residual_channels(&self) -> usize {
        self.residual_channels
    }

    pub fn seed(&self) -> Option<(u64, u64)> {
        self.seed
    }

    /// Raw `w̃` increments, `[step·channels + k]`.
    pub fn residual_increments(&self) -> &[f64] {
        &self.residual
    }

    /// `Δw_k` over `[t_step, t_step+1]`, 1-based channel; 0 beyond the bundle.
    pub fn dw(&self, step: usize, channel: usize) -> f64 {
        if channel == 0 || channel > self.channels {
            0.0
        } else {
            self.increments[step * self.channels + channel - 1]
        }
    }

    /// `Δw̃_k`, 1-based channel.
    pub fn dw_residual(&self, step: usize, channel: usize) -> f64 {
        if channel == 0 || channel > self.residual_channels {
            0.0
        } else {
            self.residual[step * self.residual_channels + channel - 1]
        }
    }

    /// `w_k(t_j)`.
    pub fn value(&self, node: usize, channel: usize) -> f64 {
        (0..node).map(|j| self.dw(j, channel)).sum()
    }
}
