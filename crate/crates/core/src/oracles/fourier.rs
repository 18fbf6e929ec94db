#[allow(unused_imports)] // float methods come from libm without std
use num_traits::Float;

/// Closed-form moments of `du = a² u_xx dt + σ u_x dw`, `u₀ = sin(κx)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FourierMode {
    /// `E û(t)/û₀ = e^{−a²κ²t}`.
    pub mean_amplitude: f64,
    /// `∫₀ᴸ E u²(t,x) dx = (L/2) e^{(σ²−2a²)κ²t}`.
    pub second_moment_integral: f64,
    /// `(σ² − 2a²)κ²`.
    pub growth_rate: f64,
}

/// The Fourier mode is a complex geometric Brownian motion with drift
/// `−a²κ²` and volatility `iκσ`, whence both moments.
pub fn exact_fourier_mode(a: f64, sigma: f64, kappa: f64, t: f64, length: f64) -> FourierMode {
    let growth_rate = (sigma * sigma - 2.0 * a * a) * kappa * kappa;
    FourierMode {
        mean_amplitude: (-a * a * kappa * kappa * t).exp(),
        second_moment_integral: 0.5 * length * (growth_rate * t).exp(),
        growth_rate,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::PI;

    #[test]
    fn examples() {
        let crit = exact_fourier_mode(1.0, 2f64.sqrt(), 1.0, 0.7, 2.0 * PI);
        assert!((crit.second_moment_integral - PI).abs() < 1e-14);
        assert!((exact_fourier_mode(1.0, 2.0, 1.0, 0.0, 1.0).growth_rate - 2.0).abs() < 1e-15);
        let heat = exact_fourier_mode(1.0, 0.0, 1.0, 0.3, 2.0 * PI);
        assert!((heat.second_moment_integral - PI * (-0.6f64).exp()).abs() < 1e-14);
        assert!((heat.mean_amplitude - (-0.3f64).exp()).abs() < 1e-15);
    }
}
