//! Scenario configuration.
//!
//! A config is a TOML document with a top-level `scenario` key and one table
//! per concern (`equation`, `truncation`, `grid`, `time`, `weights`,
//! `oracle`, `output`). Unknown keys are rejected. [`parse_config`] applies
//! the defaults and validates; the result serializes back to TOML that
//! reparses to the same value.

use std::f64::consts::{FRAC_PI_2, PI};
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use wce_core::profile::ScalarField;

/// A validation failure tied to the offending key.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{path}: {message}")]
pub struct ConfigError {
    /// Dotted key path, e.g. `equation.viscosity`.
    pub path: String,
    pub message: String,
}

impl ConfigError {
    fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self { path: path.into(), message: message.into() }
    }
}

type Check = Result<(), ConfigError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioKind {
    HeatAdvection,
    PassiveScalar,
    KvCheck,
    Custom,
}

impl ScenarioKind {
    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::HeatAdvection => "heat-advection",
            ScenarioKind::PassiveScalar => "passive-scalar",
            ScenarioKind::KvCheck => "kv-check",
            ScenarioKind::Custom => "custom",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WaveKind {
    Sin,
    Cos,
}

/// `offset + amplitude · sin(wavenumber · x[axis])` or the cosine analogue.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Wave {
    pub kind: WaveKind,
    #[serde(default = "one")]
    pub amplitude: f64,
    #[serde(default = "one")]
    pub wavenumber: f64,
    /// Spatial axis, 0 for x and 1 for y.
    #[serde(default)]
    pub axis: usize,
    #[serde(default)]
    pub offset: f64,
}

/// A coefficient: a number or a named profile table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Profile {
    Constant(f64),
    Wave(Wave),
}

impl Default for Profile {
    fn default() -> Self {
        Profile::Constant(0.0)
    }
}

impl Profile {
    pub fn sin(wavenumber: f64) -> Self {
        Profile::Wave(Wave { kind: WaveKind::Sin, amplitude: 1.0, wavenumber, axis: 0, offset: 0.0 })
    }

    pub fn to_field(&self) -> ScalarField {
        match *self {
            Profile::Constant(0.0) => ScalarField::Zero,
            Profile::Constant(c) => ScalarField::Constant(c),
            Profile::Wave(ref w) => ScalarField::Wave {
                offset: w.offset,
                amplitude: w.amplitude,
                wavenumber: w.wavenumber,
                axis: w.axis,
                phase: match w.kind {
                    WaveKind::Sin => 0.0,
                    WaveKind::Cos => FRAC_PI_2,
                },
            },
        }
    }

    pub fn as_constant(&self) -> Option<f64> {
        match *self {
            Profile::Constant(c) => Some(c),
            // A flat wave is the constant sin(0) = 0 or cos(0) = 1 times the amplitude.
            Profile::Wave(ref w) if w.amplitude == 0.0 || w.wavenumber == 0.0 => {
                Some(w.offset + if w.kind == WaveKind::Cos { w.amplitude } else { 0.0 })
            }
            Profile::Wave(_) => None,
        }
    }

    fn is_zero(&self) -> bool {
        self.as_constant() == Some(0.0)
    }

    fn depends_on(&self, axis: usize) -> bool {
        matches!(self, Profile::Wave(w) if w.axis == axis && self.as_constant().is_none())
    }

    fn check(&self, path: &str, dim: usize) -> Check {
        match self {
            Profile::Constant(c) if !c.is_finite() => Err(ConfigError::new(path, "must be finite")),
            Profile::Wave(w) => {
                if ![w.amplitude, w.wavenumber, w.offset].iter().all(|v| v.is_finite()) {
                    return Err(ConfigError::new(path, "profile parameters must be finite"));
                }
                if w.axis >= dim {
                    return Err(ConfigError::new(format!("{path}.axis"), format!("axis {} on a {dim}-D grid", w.axis)));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FormName {
    Divergence,
    Nondivergence,
}

/// One noise channel: `M_k u = σ_ik D_i u + ν_k u`, forcing `g_k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    /// One profile per spatial axis.
    pub sigma: Vec<Profile>,
    #[serde(default, skip_serializing_if = "Profile::is_zero")]
    pub potential: Profile,
    #[serde(default, skip_serializing_if = "Profile::is_zero")]
    pub forcing: Profile,
}

/// Equation coefficients. Which keys apply depends on the scenario; keys a
/// scenario does not use are rejected rather than ignored.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EquationConfig {
    /// `a²` of heat-advection; `a_ij = diffusivity·δ_ij` for custom without `diffusion`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diffusivity: Option<f64>,
    /// `ν` of passive-scalar.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub viscosity: Option<f64>,
    /// Full `a_ij`, row-major, `dim²` entries.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diffusion: Option<Vec<Profile>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub drift: Option<Vec<Profile>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub potential: Option<Profile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub forcing: Option<Profile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub form: Option<FormName>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<Vec<NoiseConfig>>,
    /// `u₀`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<Profile>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TruncationConfig {
    /// `I`, temporal modes.
    pub modes: u32,
    /// `K`, noise channels kept in the expansion.
    pub channels: u32,
    /// `N`, maximal order `|α|`.
    pub order: u32,
}

impl Default for TruncationConfig {
    fn default() -> Self {
        Self { modes: 8, channels: 1, order: 4 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub dim: usize,
    /// Period `L` of every axis.
    pub length: f64,
    /// Points `n` per axis.
    pub points: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { dim: 1, length: 2.0 * PI, points: 128 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TimeConfig {
    /// `T`.
    pub horizon: f64,
    /// `M`.
    pub steps: usize,
    pub theta: f64,
}

impl Default for TimeConfig {
    fn default() -> Self {
        Self { horizon: 0.5, steps: 256, theta: 0.5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum WeightsConfig {
    Uniform {
        #[serde(default = "one")]
        value: f64,
    },
    Explicit {
        q: Vec<f64>,
    },
    Suggest {
        epsilon: f64,
    },
}

impl Default for WeightsConfig {
    fn default() -> Self {
        WeightsConfig::Uniform { value: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Comparison {
    /// Closed-form Fourier-mode mean and second moment (heat-advection).
    Fourier,
    /// Chaos moments against direct Monte Carlo of the SPDE.
    MonteCarlo,
    /// Chaos pairing against the deterministic `u_h` equation.
    Uh,
    /// Pathwise evaluation against stochastic characteristics.
    Pathwise,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleConfig {
    /// Comparisons to run; scenario default when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub compare: Option<Vec<Comparison>>,
    /// Monte Carlo paths.
    pub paths: usize,
    pub seed: u64,
    /// Equally spaced grid points used for the Monte Carlo comparison.
    pub probes: usize,
    /// Gaussian samples for pathwise comparisons and the `sample` command.
    pub samples: usize,
    /// Mode `i` of the test function `h_1 = amplitude·m_i` for the `u_h` comparison.
    pub uh_mode: usize,
    pub uh_amplitude: f64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self { compare: None, paths: 10_000, seed: 42, probes: 16, samples: 100, uh_mode: 2, uh_amplitude: 0.3 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StorageKind {
    All,
    Every,
    Final,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    /// Which time levels keep coefficient fields.
    pub storage: StorageKind,
    /// Node stride for `storage = "every"`.
    pub stride: usize,
    /// Write one CSV per multi-index.
    pub coefficients: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: PathBuf::from("wce-out"), storage: StorageKind::All, stride: 1, coefficients: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: ScenarioKind,
    #[serde(default)]
    pub equation: EquationConfig,
    #[serde(default)]
    pub truncation: TruncationConfig,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub time: TimeConfig,
    #[serde(default)]
    pub weights: WeightsConfig,
    #[serde(default)]
    pub oracle: OracleConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

fn one() -> f64 {
    1.0
}

/// Command-line overrides of config keys.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub order: Option<u32>,
    pub paths: Option<usize>,
    pub out: Option<PathBuf>,
}

/// Parses, fills defaults and validates.
pub fn parse_config(text: &str) -> Result<ScenarioConfig, ConfigError> {
    let mut cfg: ScenarioConfig = toml::from_str(text).map_err(|e| {
        let at = match e.span() {
            Some(span) => {
                let before = &text[..span.start.min(text.len())];
                let line = before.matches('\n').count() + 1;
                let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
                format!("line {line}, column {column}")
            }
            None => "<document>".to_owned(),
        };
        ConfigError::new(at, e.message())
    })?;
    cfg.resolve();
    cfg.validate()?;
    Ok(cfg)
}

impl ScenarioConfig {
    /// Defaults for `kind`, as if the config named only the scenario.
    pub fn defaults(kind: ScenarioKind) -> Self {
        let mut cfg = Self {
            scenario: kind,
            equation: EquationConfig::default(),
            truncation: TruncationConfig::default(),
            grid: GridConfig::default(),
            time: TimeConfig::default(),
            weights: WeightsConfig::default(),
            oracle: OracleConfig::default(),
            output: OutputConfig::default(),
        };
        cfg.resolve();
        cfg
    }

    /// Canonical TOML; [`parse_config`] of it returns `self`.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// SHA-256 of the canonical TOML, hex encoded.
    pub fn digest(&self) -> String {
        Sha256::digest(self.to_toml().as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn apply(&mut self, o: &Overrides) -> Result<(), ConfigError> {
        if let Some(s) = o.seed {
            self.oracle.seed = s;
        }
        if let Some(n) = o.order {
            self.truncation.order = n;
        }
        if let Some(p) = o.paths {
            self.oracle.paths = p;
        }
        if let Some(d) = &o.out {
            self.output.dir = d.clone();
        }
        self.validate()
    }

    pub fn comparisons(&self) -> Vec<Comparison> {
        self.oracle.compare.clone().unwrap_or_default()
    }

    /// Fills scenario-dependent defaults. Idempotent.
    fn resolve(&mut self) {
        let dim = self.grid.dim;
        let eq = &mut self.equation;
        if eq.noise.is_none() {
            let mut sigma = vec![Profile::Constant(0.0); dim.max(1)];
            sigma[0] = Profile::Constant(1.0);
            eq.noise = Some(vec![NoiseConfig { sigma, potential: Profile::default(), forcing: Profile::default() }]);
        }
        if eq.initial.is_none() {
            eq.initial = Some(Profile::sin(1.0));
        }
        match self.scenario {
            ScenarioKind::HeatAdvection => {
                eq.diffusivity.get_or_insert(1.0);
            }
            ScenarioKind::PassiveScalar => {
                eq.viscosity.get_or_insert(0.5);
            }
            ScenarioKind::KvCheck => {}
            ScenarioKind::Custom => {
                if eq.diffusion.is_none() {
                    eq.diffusivity.get_or_insert(1.0);
                }
                eq.form.get_or_insert(FormName::Divergence);
            }
        }
        if self.oracle.compare.is_none() {
            self.oracle.compare = Some(match self.scenario {
                ScenarioKind::HeatAdvection => vec![Comparison::Fourier, Comparison::MonteCarlo, Comparison::Uh],
                ScenarioKind::PassiveScalar | ScenarioKind::KvCheck => vec![Comparison::Pathwise],
                ScenarioKind::Custom => vec![Comparison::Uh],
            });
        }
    }

    pub fn validate(&self) -> Check {
        self.validate_counts()?;
        self.validate_equation()?;
        self.validate_scenario()?;
        self.validate_weights()?;
        self.validate_oracle()
    }

    fn noise(&self) -> &[NoiseConfig] {
        self.equation.noise.as_deref().unwrap_or(&[])
    }

    fn validate_counts(&self) -> Check {
        let positive = |path: &str, v: u64| {
            if v == 0 {
                Err(ConfigError::new(path, "must be positive"))
            } else {
                Ok(())
            }
        };
        positive("truncation.modes", self.truncation.modes.into())?;
        positive("truncation.channels", self.truncation.channels.into())?;
        positive("truncation.order", self.truncation.order.into())?;
        if !(1..=2).contains(&self.grid.dim) {
            return Err(ConfigError::new("grid.dim", "must be 1 or 2"));
        }
        if !(self.grid.length.is_finite() && self.grid.length > 0.0) {
            return Err(ConfigError::new("grid.length", "must be positive and finite"));
        }
        if self.grid.points < 3 {
            return Err(ConfigError::new("grid.points", "needs at least 3 points per axis"));
        }
        if !(self.time.horizon.is_finite() && self.time.horizon > 0.0) {
            return Err(ConfigError::new("time.horizon", "must be positive and finite"));
        }
        positive("time.steps", self.time.steps as u64)?;
        if !(0.0..=1.0).contains(&self.time.theta) {
            return Err(ConfigError::new("time.theta", "must lie in [0, 1]"));
        }
        positive("output.stride", self.output.stride as u64)?;
        Ok(())
    }

    fn validate_equation(&self) -> Check {
        let d = self.grid.dim;
        let eq = &self.equation;
        let noise = self.noise();
        if noise.is_empty() {
            return Err(ConfigError::new("equation.noise", "needs at least one channel"));
        }
        for (k, ch) in noise.iter().enumerate() {
            let base = format!("equation.noise[{k}]");
            if ch.sigma.len() != d {
                return Err(ConfigError::new(format!("{base}.sigma"), format!("needs {d} entries, got {}", ch.sigma.len())));
            }
            for (i, s) in ch.sigma.iter().enumerate() {
                s.check(&format!("{base}.sigma[{i}]"), d)?;
            }
            ch.potential.check(&format!("{base}.potential"), d)?;
            ch.forcing.check(&format!("{base}.forcing"), d)?;
        }
        if self.truncation.channels as usize > noise.len() {
            return Err(ConfigError::new(
                "truncation.channels",
                format!("{} exceeds the {} configured noise channels", self.truncation.channels, noise.len()),
            ));
        }
        if let Some(v) = eq.diffusivity {
            if !(v.is_finite() && v > 0.0) {
                return Err(ConfigError::new("equation.diffusivity", "must be positive and finite"));
            }
        }
        if let Some(v) = eq.viscosity {
            if !(v.is_finite() && v >= 0.0) {
                return Err(ConfigError::new("equation.viscosity", format!("must be nonnegative and finite, got {v}")));
            }
        }
        if let Some(a) = &eq.diffusion {
            if a.len() != d * d {
                return Err(ConfigError::new("equation.diffusion", format!("needs {} entries, got {}", d * d, a.len())));
            }
            for (i, p) in a.iter().enumerate() {
                p.check(&format!("equation.diffusion[{i}]"), d)?;
            }
        }
        if let Some(b) = &eq.drift {
            if b.len() != d {
                return Err(ConfigError::new("equation.drift", format!("needs {d} entries, got {}", b.len())));
            }
            for (i, p) in b.iter().enumerate() {
                p.check(&format!("equation.drift[{i}]"), d)?;
            }
        }
        for (name, p) in [("potential", &eq.potential), ("forcing", &eq.forcing), ("initial", &eq.initial)] {
            if let Some(p) = p {
                p.check(&format!("equation.{name}"), d)?;
            }
        }
        Ok(())
    }

    fn validate_scenario(&self) -> Check {
        let eq = &self.equation;
        let name = self.scenario.name();
        let unused = |key: &str, present: bool| {
            if present {
                Err(ConfigError::new(format!("equation.{key}"), format!("not used by the {name} scenario")))
            } else {
                Ok(())
            }
        };
        let noise_free_terms = || -> Check {
            for (k, ch) in self.noise().iter().enumerate() {
                unused(&format!("noise[{k}].potential"), !ch.potential.is_zero())?;
                unused(&format!("noise[{k}].forcing"), !ch.forcing.is_zero())?;
            }
            Ok(())
        };
        match self.scenario {
            ScenarioKind::HeatAdvection => {
                if self.grid.dim != 1 {
                    return Err(ConfigError::new("grid.dim", "heat-advection is one-dimensional"));
                }
                unused("viscosity", eq.viscosity.is_some())?;
                unused("diffusion", eq.diffusion.is_some())?;
                unused("drift", eq.drift.is_some())?;
                unused("potential", eq.potential.is_some())?;
                unused("forcing", eq.forcing.is_some())?;
                unused("form", eq.form.is_some())?;
                if self.noise().len() != 1 {
                    return Err(ConfigError::new("equation.noise", "heat-advection has exactly one channel"));
                }
                if self.noise()[0].sigma[0].as_constant().is_none() {
                    return Err(ConfigError::new("equation.noise[0].sigma[0]", "heat-advection needs a constant σ"));
                }
                noise_free_terms()
            }
            ScenarioKind::PassiveScalar => {
                unused("diffusivity", eq.diffusivity.is_some())?;
                unused("diffusion", eq.diffusion.is_some())?;
                unused("drift", eq.drift.is_some())?;
                unused("potential", eq.potential.is_some())?;
                unused("forcing", eq.forcing.is_some())?;
                unused("form", eq.form.is_some())?;
                noise_free_terms()?;
                // Each σ_ik independent of x_i is sufficient for Σ_i ∂_i σ_ik = 0
                // with the single-axis profiles the schema can express.
                for (k, ch) in self.noise().iter().enumerate() {
                    for (i, s) in ch.sigma.iter().enumerate() {
                        if s.depends_on(i) {
                            return Err(ConfigError::new(
                                format!("equation.noise[{k}].sigma[{i}]"),
                                "passive-scalar needs a divergence-free σ; this component varies along its own axis",
                            ));
                        }
                    }
                }
                Ok(())
            }
            ScenarioKind::KvCheck => {
                unused("diffusivity", eq.diffusivity.is_some())?;
                unused("viscosity", eq.viscosity.is_some())?;
                unused("drift", eq.drift.is_some())?;
                unused("potential", eq.potential.is_some())?;
                unused("forcing", eq.forcing.is_some())?;
                unused("form", eq.form.is_some())?;
                noise_free_terms()?;
                if let Some(a) = &eq.diffusion {
                    self.check_half_sigma_sigma(a)?;
                }
                Ok(())
            }
            ScenarioKind::Custom => {
                unused("viscosity", eq.viscosity.is_some())?;
                if eq.diffusion.is_some() && eq.diffusivity.is_some() {
                    return Err(ConfigError::new("equation.diffusivity", "give either diffusivity or diffusion"));
                }
                Ok(())
            }
        }
    }

    /// kv-check derives `a = ½σσᵀ`; an explicit `diffusion` must agree with it.
    fn check_half_sigma_sigma(&self, a: &[Profile]) -> Check {
        let d = self.grid.dim;
        let noise = self.noise();
        let sigma: Option<Vec<Vec<f64>>> =
            noise.iter().map(|ch| ch.sigma.iter().map(Profile::as_constant).collect()).collect();
        let Some(sigma) = sigma else {
            return Err(ConfigError::new(
                "equation.diffusion",
                "kv-check derives a = ½σσᵀ; omit diffusion when σ varies in space",
            ));
        };
        for i in 0..d {
            for j in 0..d {
                let want: f64 = 0.5 * sigma.iter().map(|s| s[i] * s[j]).sum::<f64>();
                match a[i * d + j].as_constant() {
                    Some(v) if (v - want).abs() <= 1e-12 * want.abs().max(1.0) => {}
                    _ => {
                        return Err(ConfigError::new(
                            format!("equation.diffusion[{}]", i * d + j),
                            format!("kv-check requires a = ½σσᵀ, which gives {want} here"),
                        ))
                    }
                }
            }
        }
        Ok(())
    }

    fn validate_weights(&self) -> Check {
        match &self.weights {
            WeightsConfig::Uniform { value } => {
                if !(value.is_finite() && *value > 0.0) {
                    return Err(ConfigError::new("weights.value", "must be positive and finite"));
                }
            }
            WeightsConfig::Explicit { q } => {
                if q.len() != self.noise().len() {
                    return Err(ConfigError::new(
                        "weights.q",
                        format!("needs one weight per noise channel ({}), got {}", self.noise().len(), q.len()),
                    ));
                }
                if let Some(i) = q.iter().position(|v| !(v.is_finite() && *v > 0.0)) {
                    return Err(ConfigError::new(format!("weights.q[{i}]"), "must be positive and finite"));
                }
            }
            WeightsConfig::Suggest { epsilon } => {
                if !(*epsilon > 0.0 && *epsilon < 1.0) {
                    return Err(ConfigError::new("weights.epsilon", "must lie in (0, 1)"));
                }
            }
        }
        Ok(())
    }

    fn validate_oracle(&self) -> Check {
        let o = &self.oracle;
        if o.paths < 2 {
            return Err(ConfigError::new("oracle.paths", "needs at least 2 paths"));
        }
        if o.probes == 0 || o.probes > self.grid.points {
            return Err(ConfigError::new("oracle.probes", format!("must lie in 1..={}", self.grid.points)));
        }
        // TOML integers are signed 64-bit.
        if o.seed > i64::MAX as u64 {
            return Err(ConfigError::new("oracle.seed", format!("must not exceed {}", i64::MAX)));
        }
        if o.samples == 0 {
            return Err(ConfigError::new("oracle.samples", "must be positive"));
        }
        if o.uh_mode == 0 || o.uh_mode > self.truncation.modes as usize {
            return Err(ConfigError::new("oracle.uh_mode", format!("must lie in 1..={}", self.truncation.modes)));
        }
        if !o.uh_amplitude.is_finite() {
            return Err(ConfigError::new("oracle.uh_amplitude", "must be finite"));
        }
        for (i, c) in self.comparisons().iter().enumerate() {
            let ok = match c {
                Comparison::Fourier => self.scenario == ScenarioKind::HeatAdvection,
                Comparison::Pathwise => matches!(self.scenario, ScenarioKind::PassiveScalar | ScenarioKind::KvCheck),
                Comparison::MonteCarlo | Comparison::Uh => true,
            };
            if !ok {
                return Err(ConfigError::new(
                    format!("oracle.compare[{i}]"),
                    format!("{c:?} is not available for the {} scenario", self.scenario.name()),
                ));
            }
        }
        Ok(())
    }
}
