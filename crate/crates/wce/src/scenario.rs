//! Scenario pipeline: classify → weights → solve → diagnostics → oracles,
//! with every artifact written under the output directory.

use std::path::Path;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use serde::Serialize;
use wce_core::basis::{CosineBasis, GaussianSample, TemporalBasis, TestFunctionH, TimeProfile};
use wce_core::chaos_field::{compare_uh, evaluate_sample, moment_report, MomentReport};
use wce_core::discretization::{
    energy_constant, parabolicity_classify, sample_checked, suggest_weights, time_samples, FieldVector, Form,
    NoiseChannel, OperatorSpec, Parabolicity, SpatialGrid, DEFAULT_SYMBOL_TOLERANCE, DEFAULT_TIME_SAMPLES,
};
use wce_core::multiindex::{MultiIndexSet, WeightSequence};
use wce_core::oracles::{exact_fourier_mode, kv_pathwise_check, mc_spde, McOptions};
use wce_core::profile::ScalarField;
use wce_core::propagator::{
    check_energy_estimate, energy_curves, solve, truncation_diagnostics, ChaosProblem, ChaosSolution,
    EnergyInputs, SolveOptions, Storage, TimeGrid, DEFAULT_MEMORY_BUDGET,
};
use wce_core::{Error as CoreError, Executor};

use crate::config::{
    Comparison, FormName, Profile, ScenarioConfig, ScenarioKind, StorageKind, WaveKind, WeightsConfig,
};
use crate::io::{write_json, write_text, Cell, Table};

/// Max-over-time relative L₂ error of the `u_h` pairing.
pub const UH_TOLERANCE: f64 = 1e-3;
/// Relative L₂ error of the mean against the closed-form Fourier mode.
pub const FOURIER_MEAN_TOLERANCE: f64 = 1e-2;
/// Relative error of `∫ E u²(T)` against the closed-form Fourier mode.
pub const FOURIER_SECOND_MOMENT_TOLERANCE: f64 = 0.05;
/// Standard errors allowed between chaos moments and Monte Carlo.
pub const MC_Z_LIMIT: f64 = 3.0;
/// Median relative L₂ error of pathwise evaluations.
pub const PATHWISE_TOLERANCE: f64 = 0.05;
/// Relative energy loss allowed for a weakly parabolic passive scalar.
pub const ENERGY_DEFICIT_TOLERANCE: f64 = 0.01;

/// Version tag of the manifest and report layouts.
pub const SCHEMA: &str = "wce/1";

/// A config turned into solver objects.
pub struct Scenario {
    pub config: ScenarioConfig,
    pub spec: OperatorSpec,
    pub grid: SpatialGrid,
    pub time: TimeGrid,
    pub basis: Arc<CosineBasis>,
    pub initial: ScalarField,
    pub u0: FieldVector,
}

fn fields(p: &[Profile]) -> Vec<ScalarField> {
    p.iter().map(Profile::to_field).collect()
}

fn build_spec(cfg: &ScenarioConfig) -> Result<OperatorSpec> {
    let eq = &cfg.equation;
    let d = cfg.grid.dim;
    let noise = eq.noise.as_deref().unwrap_or(&[]);
    let sigma: Vec<Vec<ScalarField>> = noise.iter().map(|c| fields(&c.sigma)).collect();
    let spec = match cfg.scenario {
        ScenarioKind::HeatAdvection => {
            let s = noise[0].sigma[0].as_constant().context("heat-advection needs a constant σ")?;
            OperatorSpec::heat_advection(eq.diffusivity.unwrap_or(1.0), s)
        }
        ScenarioKind::PassiveScalar => OperatorSpec::passive_scalar(d, eq.viscosity.unwrap_or(0.5), sigma)?,
        ScenarioKind::KvCheck => OperatorSpec::krylov_veretennikov(d, sigma)?,
        ScenarioKind::Custom => {
            let mut s = OperatorSpec::zero(d, noise.len())?;
            match (&eq.diffusion, eq.diffusivity) {
                (Some(a), _) => s.diffusion = fields(a),
                (None, v) => {
                    for i in 0..d {
                        s.diffusion[i * d + i] = ScalarField::from(v.unwrap_or(1.0));
                    }
                }
            }
            if let Some(b) = &eq.drift {
                s.drift = fields(b);
            }
            s.potential = eq.potential.as_ref().map_or(ScalarField::Zero, Profile::to_field);
            s.forcing = eq.forcing.as_ref().map_or(ScalarField::Zero, Profile::to_field);
            s.noise = noise
                .iter()
                .map(|c| NoiseChannel {
                    advection: fields(&c.sigma),
                    potential: c.potential.to_field(),
                    forcing: c.forcing.to_field(),
                })
                .collect();
            s.form = match eq.form {
                Some(FormName::Nondivergence) => Form::Nondivergence,
                _ => Form::Divergence,
            };
            s
        }
    };
    spec.validate()?;
    Ok(spec)
}

impl Scenario {
    pub fn build(cfg: &ScenarioConfig) -> Result<Self> {
        cfg.validate()?;
        let g = &cfg.grid;
        let grid = if g.dim == 1 {
            SpatialGrid::new_1d(g.length, g.points)?
        } else {
            SpatialGrid::new_2d([g.length; 2], [g.points; 2])?
        };
        let time = TimeGrid::new(cfg.time.horizon, cfg.time.steps)?;
        let basis = Arc::new(CosineBasis::new(cfg.time.horizon, cfg.truncation.modes as usize)?);
        let spec = build_spec(cfg)?;
        let initial = cfg.equation.initial.as_ref().map_or(ScalarField::sin(1.0, 1.0, 0), Profile::to_field);
        let u0 = sample_checked(&grid, &initial, "u0", 0.0)?;
        Ok(Self { config: cfg.clone(), spec, grid, time, basis, initial, u0 })
    }

    pub fn problem(&self, order: u32) -> Result<ChaosProblem> {
        let t = &self.config.truncation;
        Ok(ChaosProblem {
            spec: self.spec.clone(),
            grid: self.grid,
            time: self.time,
            basis: self.basis.clone() as Arc<dyn TemporalBasis>,
            indices: MultiIndexSet::enumerate(t.modes, t.channels, order)?,
            u0: self.u0.clone(),
        })
    }

    pub fn storage(&self) -> Storage {
        match self.config.output.storage {
            StorageKind::All => Storage::All,
            StorageKind::Every => Storage::Every(self.config.output.stride),
            StorageKind::Final => Storage::Final,
        }
    }

    pub fn solve_with<E: Executor>(&self, order: u32, storage: Storage, executor: &E) -> Result<ChaosSolution> {
        let options = SolveOptions { theta: self.config.time.theta, storage, memory_budget: DEFAULT_MEMORY_BUDGET };
        Ok(solve(&self.problem(order)?, &options, executor)?)
    }

    pub fn solve<E: Executor>(&self, executor: &E) -> Result<ChaosSolution> {
        self.solve_with(self.config.truncation.order, self.storage(), executor)
    }

    /// `h_1 = amplitude·m_mode`, zero on the other channels.
    pub fn test_function(&self) -> TestFunctionH {
        let o = &self.config.oracle;
        let mut c = vec![TimeProfile::Zero; self.config.truncation.channels as usize];
        c[0] = TimeProfile::Mode { mode: o.uh_mode, amplitude: o.uh_amplitude };
        TestFunctionH::new(c)
    }

    /// `oracle.probes` equally spaced grid indices.
    pub fn probes(&self) -> Vec<usize> {
        let n = self.grid.len();
        let p = self.config.oracle.probes.min(n);
        (0..p).map(|j| j * n / p).collect()
    }

    pub fn samples(&self, count: usize) -> Vec<GaussianSample> {
        let t = &self.config.truncation;
        (0..count as u64)
            .map(|s| GaussianSample::draw(t.modes as usize, t.channels as usize, self.config.oracle.seed, s))
            .collect()
    }

    pub fn classify(&self) -> Result<Classification> {
        let times = time_samples(self.time.horizon(), DEFAULT_TIME_SAMPLES);
        let k = self.spec.channels();
        let unweighted = parabolicity_classify(&self.spec, &WeightSequence::ones(k), &self.grid, &times, DEFAULT_SYMBOL_TOLERANCE)?;
        let (source, weights, guaranteed_margin) = match &self.config.weights {
            WeightsConfig::Uniform { value } => ("uniform", WeightSequence::uniform(k, *value)?, None),
            WeightsConfig::Explicit { q } => ("explicit", WeightSequence::new(q.clone())?, None),
            WeightsConfig::Suggest { epsilon } => {
                let s = suggest_weights(&self.spec, *epsilon, &self.grid, &times)?;
                ("suggest", s.weights, Some(s.guaranteed_margin))
            }
        };
        let weighted = parabolicity_classify(&self.spec, &weights, &self.grid, &times, DEFAULT_SYMBOL_TOLERANCE)?;
        let c2 = energy_constant(&self.spec, &weights, &self.grid, &times)?;
        Ok(Classification {
            unweighted: unweighted.into(),
            weights_source: source.into(),
            weights: weights.as_slice().to_vec(),
            weighted: weighted.into(),
            guaranteed_margin,
            energy_constant: c2,
            sequence: weights,
            square_integrable: !matches!(unweighted, Parabolicity::None { .. }),
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ParabolicityInfo {
    pub label: String,
    /// Smallest eigenvalue of the sampled symbol.
    pub margin: f64,
    /// Where a negative margin was found.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub worst_t: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub worst_x: Option<[f64; 2]>,
}

impl From<Parabolicity> for ParabolicityInfo {
    fn from(p: Parabolicity) -> Self {
        let (worst_t, worst_x) = match p {
            Parabolicity::None { t, x, .. } => (Some(t), Some(x)),
            _ => (None, None),
        };
        Self { label: p.label().into(), margin: p.margin(), worst_t, worst_x }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Classification {
    /// With `Q = 1`.
    pub unweighted: ParabolicityInfo,
    pub weights_source: String,
    pub weights: Vec<f64>,
    /// With the configured or suggested `Q`.
    pub weighted: ParabolicityInfo,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub guaranteed_margin: Option<f64>,
    /// `C₂` for the chosen `Q`.
    pub energy_constant: f64,
    #[serde(skip)]
    pub sequence: WeightSequence,
    #[serde(skip)]
    pub square_integrable: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    Skipped,
}

/// One thresholded comparison.
#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub status: Status,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub measured: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    pub detail: String,
}

impl CheckResult {
    /// Passes when `measured ≤ threshold`.
    fn at_most(name: &str, measured: f64, threshold: f64, detail: impl Into<String>) -> Self {
        let status = if measured <= threshold { Status::Pass } else { Status::Fail };
        Self { name: name.into(), status, measured: Some(measured), threshold: Some(threshold), detail: detail.into() }
    }

    fn skipped(name: &str, why: impl Into<String>) -> Self {
        Self { name: name.into(), status: Status::Skipped, measured: None, threshold: None, detail: why.into() }
    }
}

/// Everything `solve` reports besides the data files.
#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub schema: &'static str,
    pub scenario: String,
    pub config_digest: String,
    pub classification: Classification,
    pub checks: Vec<CheckResult>,
    pub warnings: Vec<String>,
    pub exit_code: i32,
}

impl RunReport {
    pub fn failed(&self) -> bool {
        self.checks.iter().any(|c| c.status == Status::Fail)
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    schema: &'static str,
    command: &'a str,
    scenario: &'a str,
    config_digest: String,
    seed: u64,
    truncation: TruncationInfo,
    grid: GridInfo,
    time: TimeInfo,
    stored_nodes: usize,
    classification: &'a Classification,
    files: &'a [String],
}

#[derive(Serialize)]
struct TruncationInfo {
    modes: u32,
    channels: u32,
    order: u32,
    indices: usize,
}

#[derive(Serialize)]
struct GridInfo {
    dim: usize,
    length: f64,
    points: usize,
    spacing: f64,
}

#[derive(Serialize)]
struct TimeInfo {
    horizon: f64,
    steps: usize,
    dt: f64,
    theta: f64,
}

/// Collects output files and their relative names in creation order.
struct Outputs<'a> {
    dir: &'a Path,
    files: Vec<String>,
}

impl<'a> Outputs<'a> {
    fn new(dir: &'a Path) -> Result<Self> {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Self { dir, files: Vec::new() })
    }

    fn table(&mut self, name: &str, t: &Table) -> Result<()> {
        t.write(&self.dir.join(name))?;
        self.files.push(name.into());
        Ok(())
    }

    fn json<T: Serialize>(&mut self, name: &str, v: &T) -> Result<()> {
        write_json(&self.dir.join(name), v)?;
        self.files.push(name.into());
        Ok(())
    }

    fn text(&mut self, name: &str, text: &str) -> Result<()> {
        write_text(&self.dir.join(name), text)?;
        self.files.push(name.into());
        Ok(())
    }
}

fn coord_header(dim: usize) -> Vec<&'static str> {
    if dim == 1 {
        vec!["x"]
    } else {
        vec!["x", "y"]
    }
}

fn coord_cells(grid: &SpatialGrid, r: usize) -> Vec<Cell> {
    let c = grid.coords(r);
    c[..grid.dim()].iter().map(|&v| Cell::Num(v)).collect()
}

fn field_table(grid: &SpatialGrid, columns: &[(&str, &[f64])]) -> Table {
    let mut header = coord_header(grid.dim());
    header.extend(columns.iter().map(|c| c.0));
    let mut t = Table::new(header);
    for r in 0..grid.len() {
        let mut row = coord_cells(grid, r);
        row.extend(columns.iter().map(|c| Cell::Num(c.1[r])));
        t.push(row);
    }
    t
}

fn write_manifest(
    out: &mut Outputs<'_>,
    command: &str,
    sc: &Scenario,
    sol: &ChaosSolution,
    classification: &Classification,
) -> Result<()> {
    let cfg = &sc.config;
    let mut files = out.files.clone();
    files.push("manifest.json".into());
    let manifest = Manifest {
        schema: SCHEMA,
        command,
        scenario: cfg.scenario.name(),
        config_digest: cfg.digest(),
        seed: cfg.oracle.seed,
        truncation: TruncationInfo {
            modes: cfg.truncation.modes,
            channels: cfg.truncation.channels,
            order: sol.order(),
            indices: sol.indices().len(),
        },
        grid: GridInfo { dim: sc.grid.dim(), length: cfg.grid.length, points: cfg.grid.points, spacing: sc.grid.spacing(0) },
        time: TimeInfo { horizon: sc.time.horizon(), steps: sc.time.steps(), dt: sc.time.dt(), theta: sol.theta() },
        stored_nodes: sol.stored_nodes().len(),
        classification,
        files: &files,
    };
    out.json("manifest.json", &manifest)
}

fn write_solution_files(out: &mut Outputs<'_>, sc: &Scenario, sol: &ChaosSolution) -> Result<()> {
    let last = sc.time.steps();
    if sc.config.output.coefficients {
        for (p, alpha) in sol.indices().indices().iter().enumerate() {
            let field = sol.field(p, last)?;
            out.table(&format!("coefficients/{}.csv", alpha.file_stem()), &field_table(&sc.grid, &[("value", field)]))?;
        }
    }
    let stems: Vec<String> = sol.indices().indices().iter().map(|a| a.file_stem()).collect();
    let mut header = vec!["node".to_owned(), "t".to_owned()];
    header.extend(stems);
    let mut norms = Table::new(header);
    for j in 0..=last {
        let mut row = vec![Cell::from(j), Cell::Num(sc.time.time(j))];
        row.extend((0..sol.indices().len()).map(|p| Cell::Num(sol.norm_squared(p, j))));
        norms.push(row);
    }
    out.table("coefficient_norms.csv", &norms)
}

fn write_moments(out: &mut Outputs<'_>, sc: &Scenario, m: &MomentReport) -> Result<()> {
    let t = field_table(
        &sc.grid,
        &[("mean", &m.mean.values), ("second_moment", &m.second_moment.values), ("variance", &m.variance.values)],
    );
    out.table("moments.csv", &t)
}

/// Runs the configured scenario and writes its report bundle.
pub fn run_scenario<E: Executor>(cfg: &ScenarioConfig, executor: &E) -> Result<RunReport> {
    let sc = Scenario::build(cfg)?;
    let mut out = Outputs::new(&cfg.output.dir)?;
    out.text("config.toml", &cfg.to_toml())?;

    let classification = sc.classify()?;
    let q = classification.sequence.clone();
    let sol = sc.solve(executor)?;
    let horizon = sc.time.horizon();
    let mut checks = Vec::new();
    let mut warnings = Vec::new();

    if !classification.square_integrable {
        warnings.push(format!(
            "unweighted equation is not parabolic (margin {:e}); moments are not defined",
            classification.unweighted.margin
        ));
    }
    let truncation = truncation_diagnostics(&sol, &q)?;
    warnings.extend(truncation.warnings.iter().cloned());
    if truncation.non_decaying {
        warnings.push("weighted order energies F_n(T) do not decay; the truncated series is unreliable".into());
    }

    let energy = check_energy_estimate(&sol, &q, classification.energy_constant, &EnergyInputs::default())?;
    let worst = energy.lhs.iter().zip(&energy.rhs).map(|(l, r)| l / r).fold(0.0f64, f64::max);
    checks.push(CheckResult {
        name: "energy-bound".into(),
        status: if energy.pass { Status::Pass } else { Status::Fail },
        measured: Some(worst),
        threshold: Some(1.0),
        detail: format!("max over nodes of Σ F_n(t) / bound with C₂ = {:e}", classification.energy_constant),
    });

    write_solution_files(&mut out, &sc, &sol)?;
    let moments = moment_report(&sol, horizon)?;
    write_moments(&mut out, &sc, &moments)?;

    let curves = energy_curves(&sol, &q)?;
    let mut header = vec!["node".to_owned(), "t".to_owned()];
    header.extend((0..curves.len()).map(|n| format!("F_{n}")));
    header.extend(["total".into(), "bound".into()]);
    let mut et = Table::new(header);
    for j in 0..=sc.time.steps() {
        let mut row = vec![Cell::from(j), Cell::Num(sc.time.time(j))];
        row.extend(curves.iter().map(|c| Cell::Num(c[j])));
        row.extend([Cell::Num(energy.lhs[j]), Cell::Num(energy.rhs[j])]);
        et.push(row);
    }
    out.table("energy.csv", &et)?;

    for comparison in cfg.comparisons() {
        match comparison {
            Comparison::Fourier => checks.extend(fourier_checks(&sc, &moments, classification.square_integrable)),
            Comparison::Uh => {
                let cmp = compare_uh(&sol, &sc.test_function())?;
                let mut t = Table::new(["t", "l2_error", "relative_error", "max_error"]);
                for j in 0..cmp.times.len() {
                    t.push(vec![
                        Cell::Num(cmp.times[j]),
                        Cell::Num(cmp.l2_error[j]),
                        Cell::Num(cmp.relative_error[j]),
                        Cell::Num(cmp.max_error[j]),
                    ]);
                }
                out.table("uh.csv", &t)?;
                checks.push(CheckResult::at_most(
                    "uh-equivalence",
                    cmp.max_relative(),
                    UH_TOLERANCE,
                    format!("max over {} stored nodes of the relative L2 error", cmp.times.len()),
                ));
            }
            Comparison::MonteCarlo => {
                if !classification.square_integrable {
                    checks.push(CheckResult::skipped("monte-carlo", "no square-integrable solution to sample"));
                    continue;
                }
                checks.push(monte_carlo_check(&sc, &moments, executor, &mut out)?);
            }
            Comparison::Pathwise => checks.extend(pathwise_checks(&sc, &sol, executor, &mut out)?),
        }
    }

    let failed = checks.iter().any(|c| c.status == Status::Fail);
    let report = RunReport {
        schema: SCHEMA,
        scenario: cfg.scenario.name().into(),
        config_digest: cfg.digest(),
        classification: classification.clone(),
        checks,
        warnings,
        exit_code: if failed { 2 } else { 0 },
    };
    out.json("report.json", &report)?;
    write_manifest(&mut out, "solve", &sc, &sol, &classification)?;
    Ok(report)
}

/// `amplitude, κ` when `u₀ = amplitude·sin(κx)`.
fn pure_sine(p: Option<&Profile>) -> Option<(f64, f64)> {
    match p? {
        Profile::Wave(w) if w.kind == WaveKind::Sin && w.axis == 0 && w.offset == 0.0 => Some((w.amplitude, w.wavenumber)),
        _ => None,
    }
}

fn fourier_checks(sc: &Scenario, m: &MomentReport, square_integrable: bool) -> Vec<CheckResult> {
    let cfg = &sc.config;
    let Some((amp, kappa)) = pure_sine(cfg.equation.initial.as_ref()) else {
        return vec![CheckResult::skipped("fourier", "initial condition is not a single sine mode")];
    };
    let periods = kappa * cfg.grid.length / (2.0 * std::f64::consts::PI);
    if (periods - periods.round()).abs() > 1e-9 {
        return vec![CheckResult::skipped("fourier", "sine mode is not periodic on the grid")];
    }
    let a = cfg.equation.diffusivity.unwrap_or(1.0).sqrt();
    let sigma = cfg.equation.noise.as_ref().and_then(|n| n[0].sigma[0].as_constant()).unwrap_or(0.0);
    let t = sc.time.horizon();
    let exact = exact_fourier_mode(a, sigma, kappa, t, cfg.grid.length);
    let mean_exact = sc.grid.sample_fn(|x| amp * exact.mean_amplitude * (kappa * x[0]).sin());
    let err = sc.grid.l2_norm(&m.mean.sub(&mean_exact)) / sc.grid.l2_norm(&mean_exact);
    let mut out = vec![CheckResult::at_most(
        "fourier-mean",
        err,
        FOURIER_MEAN_TOLERANCE,
        "relative L2 error of E u(T) against e^{-a²κ²T} u₀",
    )];
    if square_integrable {
        let want = amp * amp * exact.second_moment_integral;
        let got = sc.grid.integral(&m.second_moment);
        out.push(CheckResult::at_most(
            "fourier-second-moment",
            (got - want).abs() / want,
            FOURIER_SECOND_MOMENT_TOLERANCE,
            format!("∫E u²(T) = {got:e} against (L/2)e^{{(σ²−2a²)κ²T}} = {want:e}"),
        ));
    } else {
        out.push(CheckResult::skipped("fourier-second-moment", "E u² is infinite for this equation"));
    }
    out
}

fn monte_carlo_check<E: Executor>(sc: &Scenario, m: &MomentReport, executor: &E, out: &mut Outputs<'_>) -> Result<CheckResult> {
    let cfg = &sc.config;
    let mc = mc_spde(
        &sc.spec,
        &sc.grid,
        &sc.time,
        &sc.u0,
        cfg.oracle.paths,
        cfg.oracle.seed,
        &McOptions { theta: cfg.time.theta, force: false },
        executor,
    )?;
    let zm = mc.mean.z_scores(&m.mean.values);
    let zs = mc.second_moment.z_scores(&m.second_moment.values);
    let mut header = vec!["probe"];
    header.extend(coord_header(sc.grid.dim()));
    header.extend([
        "chaos_mean",
        "mc_mean",
        "mean_se",
        "mean_z",
        "chaos_second_moment",
        "mc_second_moment",
        "second_moment_se",
        "second_moment_z",
    ]);
    let mut t = Table::new(header);
    let mut worst = 0.0f64;
    for (p, &r) in sc.probes().iter().enumerate() {
        worst = worst.max(zm[r]).max(zs[r]);
        let mut row = vec![Cell::from(p)];
        row.extend(coord_cells(&sc.grid, r));
        row.extend(
            [
                m.mean.values[r],
                mc.mean.estimate[r],
                mc.mean.standard_error[r],
                zm[r],
                m.second_moment.values[r],
                mc.second_moment.estimate[r],
                mc.second_moment.standard_error[r],
                zs[r],
            ]
            .map(Cell::Num),
        );
        t.push(row);
    }
    out.table("monte_carlo.csv", &t)?;
    Ok(CheckResult::at_most(
        "monte-carlo",
        worst,
        MC_Z_LIMIT,
        format!("largest |z| of mean and second moment over {} probes, {} paths", sc.probes().len(), cfg.oracle.paths),
    ))
}

fn pathwise_checks<E: Executor>(
    sc: &Scenario,
    sol: &ChaosSolution,
    executor: &E,
    out: &mut Outputs<'_>,
) -> Result<Vec<CheckResult>> {
    let mut checks = Vec::new();
    let t = sc.time.horizon();
    let samples = sc.samples(sc.config.oracle.samples);
    match kv_pathwise_check(sol, &sc.initial, &samples, t, executor) {
        Ok(report) => {
            let mut table = Table::new(["sample", "relative_error"]);
            for (s, e) in report.discrepancies.iter().enumerate() {
                table.push(vec![Cell::from(s), Cell::Num(*e)]);
            }
            out.table("pathwise.csv", &table)?;
            checks.push(CheckResult::at_most(
                "pathwise",
                report.median,
                PATHWISE_TOLERANCE,
                format!("median relative L2 error over {} samples against the characteristics", samples.len()),
            ));
        }
        Err(CoreError::Unsupported(why)) => checks.push(CheckResult::skipped("pathwise", why)),
        Err(e) => return Err(e.into()),
    }
    if sc.config.scenario == ScenarioKind::PassiveScalar {
        let ones = WeightSequence::ones(sc.spec.channels());
        let curves = energy_curves(sol, &ones)?;
        let initial = sc.grid.l2_norm_squared(&sc.u0);
        let totals: Vec<f64> = (0..=sc.time.steps()).map(|j| curves.iter().map(|c| c[j]).sum()).collect();
        let peak = totals.iter().fold(0.0f64, |m, v| m.max(*v)) / initial;
        checks.push(CheckResult::at_most(
            "energy-not-increasing",
            peak,
            1.0 + 1e-12,
            "max over nodes of Σ F_n(t) / ‖θ₀‖²",
        ));
        let times = time_samples(sc.time.horizon(), DEFAULT_TIME_SAMPLES);
        let class = parabolicity_classify(&sc.spec, &ones, &sc.grid, &times, DEFAULT_SYMBOL_TOLERANCE)?;
        if matches!(class, Parabolicity::Weak { .. }) {
            let deficit = 1.0 - totals[sc.time.steps()] / initial;
            checks.push(CheckResult::at_most(
                "energy-deficit",
                deficit,
                ENERGY_DEFICIT_TOLERANCE,
                "1 − Σ F_n(T)/‖θ₀‖² for the energy-conserving equation",
            ));
        } else {
            checks.push(CheckResult::skipped("energy-deficit", "the equation dissipates energy"));
        }
    }
    Ok(checks)
}

/// Parabolicity, weights and `C₂` without solving.
pub fn classify_scenario(cfg: &ScenarioConfig) -> Result<Classification> {
    Scenario::build(cfg)?.classify()
}

/// Evaluates the chaos solution on `count` seeded Gaussian samples at `T`.
pub fn run_samples<E: Executor>(cfg: &ScenarioConfig, count: usize, executor: &E) -> Result<()> {
    if count == 0 {
        bail!("sample count must be positive");
    }
    let sc = Scenario::build(cfg)?;
    let classification = sc.classify()?;
    let sol = sc.solve_with(cfg.truncation.order, Storage::Final, executor)?;
    let mut out = Outputs::new(&cfg.output.dir)?;
    out.text("config.toml", &cfg.to_toml())?;
    let samples = sc.samples(count);
    let t = sc.time.horizon();
    let fieldsets = executor.map(samples.len(), |s| evaluate_sample(&sol, &samples[s], t));
    let mut xi = Table::new(["sample", "mode", "channel", "xi"]);
    for (s, sample) in samples.iter().enumerate() {
        for k in 1..=sample.channels() {
            for i in 1..=sample.modes() {
                xi.push(vec![Cell::from(s), Cell::from(i), Cell::from(k), Cell::Num(sample.xi(i, k))]);
            }
        }
    }
    out.table("samples/xi.csv", &xi)?;
    for (s, f) in fieldsets.into_iter().enumerate() {
        let f = f?;
        out.table(&format!("samples/sample_{s:05}.csv"), &field_table(&sc.grid, &[("u", &f.values)]))?;
    }
    write_manifest(&mut out, "sample", &sc, &sol, &classification)
}
