use alloc::format;
use alloc::vec::Vec;

use crate::multiindex::WeightSequence;
use crate::profile::ScalarField;
use crate::{Error, Result};

/// Whether the second-order part is `a_ij D_i D_j` or `D_i(a_ij D_j ·)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Form {
    Divergence,
    Nondivergence,
}

/// Coefficients of one noise channel: `M_k = σ_ik D_i + ν_k`, forcing `g_k`.
#[derive(Debug, Clone, Default)]
pub struct NoiseChannel {
    /// `σ_ik`, one entry per spatial axis.
    pub advection: Vec<ScalarField>,
    pub potential: ScalarField,
    pub forcing: ScalarField,
}

impl NoiseChannel {
    pub fn zero(dim: usize) -> Self {
        Self { advection: alloc::vec![ScalarField::Zero; dim], ..Default::default() }
    }

    pub fn advection(sigma: Vec<ScalarField>) -> Self {
        Self { advection: sigma, ..Default::default() }
    }
}

/// Coefficients of
///
/// ```text
/// du = (a_ij D_i D_j u + b_i D_i u + c u + f) dt + (σ_ik D_i u + ν_k u + g_k) dw_k
/// ```
///
/// (or the divergence form `D_i(a_ij D_j u)` of the leading term).
#[derive(Debug, Clone)]
pub struct OperatorSpec {
    pub dim: usize,
    /// `a_ij`, row-major `d × d`, symmetric.
    pub diffusion: Vec<ScalarField>,
    pub drift: Vec<ScalarField>,
    pub potential: ScalarField,
    pub forcing: ScalarField,
    pub noise: Vec<NoiseChannel>,
    pub form: Form,
    /// Set when `a_ij = ν δ_ij` (the passive-scalar form).
    pub viscosity: Option<f64>,
}

impl OperatorSpec {
    /// All coefficients zero, `K` channels.
    pub fn zero(dim: usize, channels: usize) -> Result<Self> {
        if !(1..=2).contains(&dim) {
            return Err(Error::InvalidParameter(format!("dimension must be 1 or 2, got {dim}")));
        }
        Ok(Self {
            dim,
            diffusion: alloc::vec![ScalarField::Zero; dim * dim],
            drift: alloc::vec![ScalarField::Zero; dim],
            potential: ScalarField::Zero,
            forcing: ScalarField::Zero,
            noise: (0..channels).map(|_| NoiseChannel::zero(dim)).collect(),
            form: Form::Divergence,
            viscosity: None,
        })
    }

    /// `du = a² u_xx dt + σ u_x dw` in one dimension.
    pub fn heat_advection(diffusivity: f64, sigma: f64) -> Self {
        let mut s = Self::zero(1, 1).expect("valid dimension");
        s.diffusion[0] = ScalarField::from(diffusivity);
        s.noise[0].advection[0] = ScalarField::from(sigma);
        s
    }

    /// `dθ = ν Δθ dt − σ_k·∇θ dw_k` with divergence-free `σ_k` (one vector
    /// field per channel).
    pub fn passive_scalar(dim: usize, viscosity: f64, sigma: Vec<Vec<ScalarField>>) -> Result<Self> {
        let mut s = Self::zero(dim, sigma.len())?;
        for i in 0..dim {
            s.diffusion[i * dim + i] = ScalarField::from(viscosity);
        }
        for (channel, field) in s.noise.iter_mut().zip(sigma) {
            if field.len() != dim {
                return Err(Error::DimensionMismatch(format!(
                    "σ_k has {} components in dimension {dim}",
                    field.len()
                )));
            }
            channel.advection = field.iter().map(|f| f.scaled(-1.0)).collect();
        }
        s.viscosity = Some(viscosity);
        Ok(s)
    }

    /// `du = a_ij D_i D_j u dt + σ_ik D_i u dw_k` with `a = ½ σσᵀ`.
    pub fn krylov_veretennikov(dim: usize, sigma: Vec<Vec<ScalarField>>) -> Result<Self> {
        let mut s = Self::zero(dim, sigma.len())?;
        s.form = Form::Nondivergence;
        for i in 0..dim {
            for j in 0..dim {
                let pairs: Vec<(ScalarField, ScalarField)> =
                    sigma.iter().map(|c| (c[i].clone(), c[j].clone())).collect();
                let constant: Option<f64> = pairs
                    .iter()
                    .map(|(a, b)| Some(a.as_constant()? * b.as_constant()?))
                    .sum();
                s.diffusion[i * dim + j] = match constant {
                    Some(c) => ScalarField::from(0.5 * c),
                    None => {
                        let dependent = pairs.iter().any(|(a, b)| a.is_time_dependent() || b.is_time_dependent());
                        ScalarField::custom(dependent, move |t, x| {
                            0.5 * pairs.iter().map(|(a, b)| a.eval(t, x) * b.eval(t, x)).sum::<f64>()
                        })
                    }
                };
            }
        }
        for (channel, field) in s.noise.iter_mut().zip(sigma) {
            if field.len() != dim {
                return Err(Error::DimensionMismatch(format!(
                    "σ_k has {} components in dimension {dim}",
                    field.len()
                )));
            }
            channel.advection = field;
        }
        Ok(s)
    }

    pub fn channels(&self) -> usize {
        self.noise.len()
    }

    pub fn a(&self, i: usize, j: usize) -> &ScalarField {
        &self.diffusion[i * self.dim + j]
    }

    pub fn is_time_dependent(&self) -> bool {
        self.diffusion.iter().chain(&self.drift).any(ScalarField::is_time_dependent)
            || self.potential.is_time_dependent()
            || self.noise.iter().any(|c| {
                c.advection.iter().any(ScalarField::is_time_dependent) || c.potential.is_time_dependent()
            })
    }

    /// `true` when every `M_k` vanishes identically.
    pub fn is_noise_free_operator(&self) -> bool {
        self.noise
            .iter()
            .all(|c| c.advection.iter().all(ScalarField::is_zero) && c.potential.is_zero())
    }

    pub fn has_noise_forcing(&self) -> bool {
        self.noise.iter().any(|c| !c.forcing.is_zero())
    }

    /// The same equation driven by `q_k dw_k`: `M̄_k = q_k M_k`, `ḡ_k = q_k g_k`.
    pub fn with_weights(&self, q: &WeightSequence) -> Result<Self> {
        if q.len() < self.channels() {
            return Err(Error::DimensionMismatch(format!(
                "{} weights for {} channels",
                q.len(),
                self.channels()
            )));
        }
        let mut s = self.clone();
        for (k, c) in s.noise.iter_mut().enumerate() {
            let qk = q.as_slice()[k];
            c.advection = c.advection.iter().map(|f| f.scaled(qk)).collect();
            c.potential = c.potential.scaled(qk);
            c.forcing = c.forcing.scaled(qk);
        }
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.dim;
        if self.diffusion.len() != d * d || self.drift.len() != d {
            return Err(Error::DimensionMismatch("coefficient arrays do not match the dimension".into()));
        }
        if let Some(bad) = self.noise.iter().position(|c| c.advection.len() != d) {
            return Err(Error::DimensionMismatch(format!("channel {} has the wrong σ length", bad + 1)));
        }
        if let Some(nu) = self.viscosity {
            if !(nu.is_finite() && nu >= 0.0) {
                return Err(Error::InvalidParameter(format!("viscosity must be ≥ 0, got {nu}")));
            }
        }
        Ok(())
    }
}
