//! The propagator: the lower-triangular deterministic system satisfied by
//! the chaos coefficients,
//!
//! ```text
//! du_α/dt = A u_α + f·1{|α|=0}
//!         + Σ_{i,k} √α_i^k m_i(t) (M_k u_{α−(i,k)} + g_k·1{|α|=1}),
//! ```
//!
//! with `u_α(0) = u₀·1{|α|=0}`.
//!
//! All coefficients are marched together, time-outer: within a step the
//! orders are processed in sequence (order `n` needs order `n−1` at both
//! ends of the step) and the coefficients of one order are advanced as an
//! independent batch on the supplied [`Executor`]. Only two time levels are
//! kept in working memory; the solution stores the levels selected by the
//! [`Storage`] policy together with `‖u_α(t)‖²` at every node.

use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;

#[allow(unused_imports)] // float methods come from libm without std
use num_traits::Float;

use crate::basis::TemporalBasis;
use crate::discretization::{
    assemble_m, sample_checked, FieldVector, OperatorSpec, SpatialGrid, SpecOperator, ThetaStepper, DEFAULT_THETA,
};
use crate::multiindex::{MultiIndex, MultiIndexSet, WeightSequence};
use crate::sparse::CsrMatrix;
use crate::{Error, Executor, Result};

/// Default cap on stored coefficient data (512 MiB).
pub const DEFAULT_MEMORY_BUDGET: u128 = 512 << 20;

/// Uniform time grid `t_j = jT/M`, `j = 0..=M`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    horizon: f64,
    steps: usize,
}

impl TimeGrid {
    pub fn new(horizon: f64, steps: usize) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::InvalidParameter(format!("time horizon must be positive, got {horizon}")));
        }
        if steps == 0 {
            return Err(Error::InvalidParameter("time step count must be at least 1".into()));
        }
        Ok(Self { horizon, steps })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    pub fn time(&self, node: usize) -> f64 {
        if node == self.steps {
            self.horizon
        } else {
            self.horizon * node as f64 / self.steps as f64
        }
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.steps).map(|j| self.time(j)).collect()
    }

    /// The node at `t`, allowing a relative slack of `1e-9` steps.
    pub fn node(&self, t: f64) -> Result<usize> {
        let x = t / self.dt();
        let j = x.round();
        if !(j >= 0.0 && j <= self.steps as f64 && (x - j).abs() <= 1e-9 * self.steps as f64) {
            return Err(Error::TimeOutOfRange { t, horizon: self.horizon });
        }
        Ok(j as usize)
    }
}

/// Which time levels keep their coefficient fields.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Storage {
    /// Every node.
    All,
    /// Nodes `0, k, 2k, …` and the final node.
    Every(usize),
    /// Initial and final nodes.
    Final,
}

impl Storage {
    fn keeps(&self, node: usize, steps: usize) -> bool {
        match *self {
            Storage::All => true,
            Storage::Every(k) => node.is_multiple_of(k.max(1)) || node == steps,
            Storage::Final => node == 0 || node == steps,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    pub theta: f64,
    pub storage: Storage,
    /// Upper bound on stored coefficient bytes.
    pub memory_budget: u128,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { theta: DEFAULT_THETA, storage: Storage::All, memory_budget: DEFAULT_MEMORY_BUDGET }
    }
}

/// Everything that defines a chaos solve.
#[derive(Clone)]
pub struct ChaosProblem {
    pub spec: OperatorSpec,
    pub grid: SpatialGrid,
    pub time: TimeGrid,
    pub basis: Arc<dyn TemporalBasis>,
    pub indices: MultiIndexSet,
    pub u0: FieldVector,
}

impl core::fmt::Debug for ChaosProblem {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("ChaosProblem")
            .field("spec", &self.spec)
            .field("grid", &self.grid)
            .field("time", &self.time)
            .field("modes", &self.basis.modes())
            .field("indices", &self.indices.len())
            .finish_non_exhaustive()
    }
}

/// One read performed when forming the source of `u_α`: the coefficient
/// `√α_i^k`, the temporal mode `i`, the channel `k` and the lower index.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dependency {
    pub coefficient: f64,
    pub mode: u32,
    pub channel: u32,
    /// Position of `α − (i,k)` in the index set.
    pub source: usize,
}

/// Truncated chaos coefficients `u_α(t_j)` on a grid.
#[derive(Clone)]
pub struct ChaosSolution {
    problem: ChaosProblem,
    theta: f64,
    stored_nodes: Vec<usize>,
    /// `fields[s][p·n + r]`: stored level `s`, index position `p`, grid point `r`.
    fields: Vec<Vec<f64>>,
    /// `norms[j][p] = ‖u_α(t_j)‖²` for every node.
    norms: Vec<Vec<f64>>,
    dependencies: Vec<Vec<Dependency>>,
}

impl core::fmt::Debug for ChaosSolution {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("ChaosSolution")
            .field("problem", &self.problem)
            .field("theta", &self.theta)
            .field("stored_nodes", &self.stored_nodes.len())
            .finish_non_exhaustive()
    }
}

impl ChaosSolution {
    pub fn problem(&self) -> &ChaosProblem {
        &self.problem
    }

    pub fn indices(&self) -> &MultiIndexSet {
        &self.problem.indices
    }

    pub fn grid(&self) -> &SpatialGrid {
        &self.problem.grid
    }

    pub fn time_grid(&self) -> &TimeGrid {
        &self.problem.time
    }

    pub fn spec(&self) -> &OperatorSpec {
        &self.problem.spec
    }

    pub fn basis(&self) -> &dyn TemporalBasis {
        &*self.problem.basis
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn order(&self) -> u32 {
        self.problem.indices.truncation().order
    }

    /// Nodes whose fields are stored, ascending.
    pub fn stored_nodes(&self) -> &[usize] {
        &self.stored_nodes
    }

    pub fn is_stored(&self, node: usize) -> bool {
        self.stored_nodes.binary_search(&node).is_ok()
    }

    /// `u_α` at node `node` by index position.
    pub fn field(&self, position: usize, node: usize) -> Result<&[f64]> {
        let slot = self.stored_nodes.binary_search(&node).map_err(|_| {
            Error::TimeOutOfRange { t: self.problem.time.time(node.min(self.problem.time.steps())), horizon: self.problem.time.horizon() }
        })?;
        let n = self.problem.grid.len();
        if position >= self.problem.indices.len() {
            return Err(Error::DimensionMismatch(format!("index position {position} out of range")));
        }
        Ok(&self.fields[slot][position * n..(position + 1) * n])
    }

    /// `u_α(t)` for a stored grid time.
    pub fn coefficient(&self, alpha: &MultiIndex, t: f64) -> Result<FieldVector> {
        let p = self
            .problem
            .indices
            .position(alpha)
            .ok_or_else(|| Error::InvalidParameter(format!("index {alpha} is not in the truncation")))?;
        Ok(FieldVector::new(self.field(p, self.problem.time.node(t)?)?.to_vec()))
    }

    /// `‖u_α(t_j)‖²` by index position; available at every node.
    pub fn norm_squared(&self, position: usize, node: usize) -> f64 {
        self.norms[node][position]
    }

    /// The reads performed for each coefficient, by index position.
    pub fn dependencies(&self) -> &[Vec<Dependency>] {
        &self.dependencies
    }

    /// Checks that every recorded read of `u_α` targets an index of order
    /// `|α| − 1`; returns the offending index on failure.
    pub fn audit_lower_triangular(&self) -> core::result::Result<(), String> {
        let set = &self.problem.indices;
        for (p, deps) in self.dependencies.iter().enumerate() {
            let alpha = set.get(p);
            for d in deps {
                let beta = set.get(d.source);
                if beta.order() + 1 != alpha.order() || beta.increment(d.mode, d.channel) != *alpha {
                    return Err(format!("{alpha} reads {beta}"));
                }
            }
            if alpha.order() > 0 && deps.len() != alpha.entries().len() {
                return Err(format!("{alpha} has {} reads for {} entries", deps.len(), alpha.entries().len()));
            }
        }
        Ok(())
    }
}

fn dependency_table(indices: &MultiIndexSet) -> Result<Vec<Vec<Dependency>>> {
    indices
        .indices()
        .iter()
        .map(|alpha| {
            alpha
                .entries()
                .iter()
                .map(|e| {
                    let beta = alpha.decrement(e.mode, e.channel);
                    let source = indices.position(&beta).ok_or_else(|| {
                        Error::InvalidParameter(format!("index set is not closed under decrement: {beta} missing"))
                    })?;
                    Ok(Dependency {
                        coefficient: (e.count as f64).sqrt(),
                        mode: e.mode,
                        channel: e.channel,
                        source,
                    })
                })
                .collect()
        })
        .collect()
}

/// Per-level data shared by the sources of one step.
struct Level {
    /// `M_k u_β` for every `β` of order below the truncation, `[k][p·n + r]`.
    mu: Vec<Vec<f64>>,
    /// `g_k(t)`, `None` when zero.
    g: Vec<Option<Vec<f64>>>,
    /// `f(t)`, `None` when zero.
    f: Option<Vec<f64>>,
    /// `m_i(t)`, 1-based with a dummy at 0.
    m: Vec<f64>,
}

struct Operators {
    m: Vec<CsrMatrix>,
}

fn assemble_ms(spec: &OperatorSpec, grid: &SpatialGrid, t: f64) -> Result<Operators> {
    let m = (1..=spec.channels()).map(|k| Ok(assemble_m(spec, grid, k, t)?.matrix)).collect::<Result<_>>()?;
    Ok(Operators { m })
}

fn sample_optional(grid: &SpatialGrid, field: &crate::profile::ScalarField, name: &str, t: f64) -> Result<Option<Vec<f64>>> {
    if field.is_zero() {
        Ok(None)
    } else {
        Ok(Some(sample_checked(grid, field, name, t)?.values))
    }
}

/// Solves the propagator.
pub fn solve<E: Executor>(problem: &ChaosProblem, options: &SolveOptions, executor: &E) -> Result<ChaosSolution> {
    let ChaosProblem { spec, grid, time, basis, indices, u0 } = problem;
    spec.validate()?;
    grid.check(u0)?;
    if spec.dim != grid.dim() {
        return Err(Error::DimensionMismatch(format!("spec is {}-D but the grid is {}-D", spec.dim, grid.dim())));
    }
    let trunc = indices.truncation();
    if trunc.channels as usize > spec.channels() {
        return Err(Error::DimensionMismatch(format!(
            "truncation uses {} channels but the spec has {}",
            trunc.channels,
            spec.channels()
        )));
    }
    if trunc.modes as usize > basis.modes() {
        return Err(Error::DimensionMismatch(format!(
            "truncation uses {} modes but the basis has {}",
            trunc.modes,
            basis.modes()
        )));
    }
    if (basis.horizon() - time.horizon()).abs() > 1e-12 * time.horizon() {
        return Err(Error::InvalidParameter("basis and time grid horizons differ".into()));
    }
    if let Storage::Every(0) = options.storage {
        return Err(Error::InvalidParameter("storage stride must be positive".into()));
    }

    let n = grid.len();
    let count = indices.len();
    let steps = time.steps();
    let dt = time.dt();
    let theta = options.theta;
    let stored_count = (0..=steps).filter(|&j| options.storage.keeps(j, steps)).count();
    let bytes = stored_count as u128 * count as u128 * n as u128 * 8;
    if bytes > options.memory_budget {
        return Err(Error::MemoryBudget { bytes, budget: options.memory_budget });
    }

    let dependencies = dependency_table(indices)?;
    let order = trunc.order;
    let ranges: Vec<_> = (0..=order).map(|k| indices.order_range(k)).collect();
    // Coefficients that feed a higher order.
    let feeders = if order == 0 { 0 } else { ranges[order as usize - 1].end };
    let channels = trunc.channels as usize;
    let modes = trunc.modes as usize;

    let family = SpecOperator::new(spec, grid);
    let stepper = ThetaStepper::new(&family, dt, theta)?;
    let constant_m = !spec.is_time_dependent();
    let mut ops_now = assemble_ms(spec, grid, 0.0)?;

    let level_at = |t: f64, ops: &Operators, u: &[f64]| -> Result<Level> {
        let mu = (0..channels)
            .map(|k| {
                let blocks = executor.map(feeders, |p| {
                    let mut y = alloc::vec![0.0; n];
                    ops.m[k].apply(&u[p * n..(p + 1) * n], &mut y);
                    y
                });
                blocks.concat()
            })
            .collect();
        let g = (0..channels)
            .map(|k| sample_optional(grid, &spec.noise[k].forcing, "g", t))
            .collect::<Result<_>>()?;
        let f = sample_optional(grid, &spec.forcing, "f", t)?;
        let mut m = alloc::vec![0.0; modes + 1];
        for (i, mi) in m.iter_mut().enumerate().skip(1) {
            *mi = basis.eval(i, t);
        }
        Ok(Level { mu, g, f, m })
    };

    let mut u_now = alloc::vec![0.0; count * n];
    if count > 0 {
        u_now[..n].copy_from_slice(&u0.values);
    }
    let mut level_now = level_at(0.0, &ops_now, &u_now)?;

    let norm_of = |u: &[f64]| -> Vec<f64> {
        executor.map(count, |p| {
            let v = &u[p * n..(p + 1) * n];
            v.iter().map(|x| x * x).sum::<f64>() * grid.cell_volume()
        })
    };

    let mut stored_nodes = Vec::with_capacity(stored_count);
    let mut fields = Vec::with_capacity(stored_count);
    let mut norms = Vec::with_capacity(steps + 1);
    stored_nodes.push(0);
    fields.push(u_now.clone());
    norms.push(norm_of(&u_now));

    for j in 0..steps {
        let t = time.time(j);
        let t_next = time.time(j + 1);
        let prepared = stepper.prepare(t)?;
        let ops_next = if constant_m { None } else { Some(assemble_ms(spec, grid, t_next)?) };
        let ops_next_ref = ops_next.as_ref().unwrap_or(&ops_now);
        let mut u_next = alloc::vec![0.0; count * n];
        let mut mu_next: Vec<Vec<f64>> = (0..channels).map(|_| alloc::vec![0.0; feeders * n]).collect();
        let g_next: Vec<Option<Vec<f64>>> = (0..channels)
            .map(|k| sample_optional(grid, &spec.noise[k].forcing, "g", t_next))
            .collect::<Result<_>>()?;
        let f_next = sample_optional(grid, &spec.forcing, "f", t_next)?;
        let mut m_next = alloc::vec![0.0; modes + 1];
        for (i, mi) in m_next.iter_mut().enumerate().skip(1) {
            *mi = basis.eval(i, t_next);
        }

        for (ord, range) in ranges.iter().enumerate() {
            let level_next = (&mu_next, &g_next, &f_next, &m_next);
            let results = executor.map(range.len(), |offset| -> Result<Vec<f64>> {
                let p = range.start + offset;
                let mut u = u_now[p * n..(p + 1) * n].to_vec();
                let mut src = alloc::vec![0.0; n];
                let mut any = false;
                let mut add = |w: f64, v: &[f64]| {
                    src.iter_mut().zip(v).for_each(|(s, x)| *s += w * x);
                    any = true;
                };
                if ord == 0 {
                    if let Some(f) = &level_now.f {
                        add(1.0 - theta, f);
                    }
                    if let Some(f) = level_next.2 {
                        add(theta, f);
                    }
                }
                for d in &dependencies[p] {
                    let (i, k, q) = (d.mode as usize, d.channel as usize - 1, d.source);
                    let w_now = (1.0 - theta) * d.coefficient * level_now.m[i];
                    let w_next = theta * d.coefficient * level_next.3[i];
                    add(w_now, &level_now.mu[k][q * n..(q + 1) * n]);
                    add(w_next, &level_next.0[k][q * n..(q + 1) * n]);
                    if ord == 1 {
                        if let Some(g) = &level_now.g[k] {
                            add(w_now, g);
                        }
                        if let Some(g) = &level_next.1[k] {
                            add(w_next, g);
                        }
                    }
                }
                prepared.advance(&mut u, if any { Some(&src) } else { None })?;
                Ok(u)
            });
            for (offset, r) in results.into_iter().enumerate() {
                let p = range.start + offset;
                let u = r?;
                if u.iter().any(|v| !v.is_finite()) {
                    return Err(Error::BlowUp { index: format!("{}", indices.get(p)), t: t_next });
                }
                u_next[p * n..(p + 1) * n].copy_from_slice(&u);
            }
            if (ord as u32) < order {
                for (m, mu_k) in ops_next_ref.m.iter().zip(mu_next.iter_mut()) {
                    let u_ref = &u_next;
                    let blocks = executor.map(range.len(), |offset| {
                        let p = range.start + offset;
                        let mut y = alloc::vec![0.0; n];
                        m.apply(&u_ref[p * n..(p + 1) * n], &mut y);
                        y
                    });
                    for (offset, y) in blocks.into_iter().enumerate() {
                        let p = range.start + offset;
                        mu_k[p * n..(p + 1) * n].copy_from_slice(&y);
                    }
                }
            }
        }

        norms.push(norm_of(&u_next));
        if options.storage.keeps(j + 1, steps) {
            stored_nodes.push(j + 1);
            fields.push(u_next.clone());
        }
        level_now = Level { mu: mu_next, g: g_next, f: f_next, m: m_next };
        u_now = u_next;
        if let Some(ops) = ops_next {
            ops_now = ops;
        }
    }

    Ok(ChaosSolution { problem: problem.clone(), theta, stored_nodes, fields, norms, dependencies })
}

/// `F_n(t) = Σ_{|α|=n} q^{2α} ‖u_α(t)‖²`.
pub fn energy_by_order(sol: &ChaosSolution, q: &WeightSequence, n: u32, t: f64) -> Result<f64> {
    let node = sol.time_grid().node(t)?;
    energy_at_node(sol, q, n, node)
}

fn energy_at_node(sol: &ChaosSolution, q: &WeightSequence, n: u32, node: usize) -> Result<f64> {
    let set = sol.indices();
    if n > sol.order() {
        return Ok(0.0);
    }
    let mut acc = 0.0;
    for p in set.order_range(n) {
        let w = q.weight(set.get(p))?;
        acc += w * w * sol.norm_squared(p, node);
    }
    Ok(acc)
}

/// `F_n(t_j)` for every order `n` (outer) and node `j` (inner).
pub fn energy_curves(sol: &ChaosSolution, q: &WeightSequence) -> Result<Vec<Vec<f64>>> {
    (0..=sol.order())
        .map(|n| (0..=sol.time_grid().steps()).map(|j| energy_at_node(sol, q, n, j)).collect())
        .collect()
}

/// Free terms entering the general energy bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyInputs {
    /// The constant multiplying `∫‖f‖²`; the bound uses `‖f‖_H ≥ ‖f‖_{V′}`.
    pub c_f: f64,
}

impl Default for EnergyInputs {
    fn default() -> Self {
        Self { c_f: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnergyReport {
    pub times: Vec<f64>,
    /// `Σ_n F_n(t)`.
    pub lhs: Vec<f64>,
    pub rhs: Vec<f64>,
    /// `rhs − lhs`.
    pub margin: Vec<f64>,
    pub homogeneous: bool,
    pub pass: bool,
}

/// Compares `Σ_n F_n(t)` against `e^{C₂t}‖u₀‖²` (no free terms) or
/// `3e^{C₂t}(‖u₀‖² + C_f∫‖f‖² + Σ_k q_k²∫‖g_k‖²)` at every node.
pub fn check_energy_estimate(sol: &ChaosSolution, q: &WeightSequence, c2: f64, inputs: &EnergyInputs) -> Result<EnergyReport> {
    let tg = sol.time_grid();
    let grid = sol.grid();
    let spec = sol.spec();
    let homogeneous = spec.forcing.is_zero() && !spec.has_noise_forcing();
    let u0 = grid.l2_norm_squared(&FieldVector::new(sol.field(0, 0)?.to_vec()));
    let times = tg.times();
    let curves = energy_curves(sol, q)?;
    let lhs: Vec<f64> = (0..times.len()).map(|j| curves.iter().map(|c| c[j]).sum()).collect();
    let mut rhs = Vec::with_capacity(times.len());
    let mut integral = 0.0;
    let forcing_sq = |t: f64| -> Result<f64> {
        let mut s = 0.0;
        if !spec.forcing.is_zero() {
            s += inputs.c_f * grid.l2_norm_squared(&sample_checked(grid, &spec.forcing, "f", t)?);
        }
        for (k, c) in spec.noise.iter().enumerate() {
            if !c.forcing.is_zero() {
                let qk = q.q(k + 1)?;
                s += qk * qk * grid.l2_norm_squared(&sample_checked(grid, &c.forcing, "g", t)?);
            }
        }
        Ok(s)
    };
    let mut prev = if homogeneous { 0.0 } else { forcing_sq(0.0)? };
    for (j, &t) in times.iter().enumerate() {
        if homogeneous {
            rhs.push((c2 * t).exp() * u0);
        } else {
            if j > 0 {
                let next = forcing_sq(t)?;
                integral += 0.5 * (prev + next) * (t - times[j - 1]);
                prev = next;
            }
            rhs.push(3.0 * (c2 * t).exp() * (u0 + integral));
        }
    }
    let margin: Vec<f64> = rhs.iter().zip(&lhs).map(|(r, l)| r - l).collect();
    // Allow rounding in the accumulated norms.
    let pass = margin.iter().zip(&rhs).all(|(m, r)| *m >= -1e-12 * r.abs().max(1.0));
    Ok(EnergyReport { times, lhs, rhs, margin, homogeneous, pass })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TruncationReport {
    /// `F_n(T)`, `n = 0..=N`.
    pub energies: Vec<f64>,
    /// Least-squares geometric ratio of `F_n(T)` over `n ≥ 1`; `None` when
    /// fewer than two orders carry energy.
    pub decay_ratio: Option<f64>,
    /// `F_N r/(1−r)` relative to `Σ F_n`; infinite when `r ≥ 1`.
    pub tail_mass: f64,
    /// `F_{n+1}(T) ≥ F_n(T)` for some `n` with non-negligible energy.
    pub non_decaying: bool,
    pub warnings: Vec<String>,
}

/// Estimates the neglected tail of the chaos series from the decay of `F_n(T)`.
pub fn truncation_diagnostics(sol: &ChaosSolution, q: &WeightSequence) -> Result<TruncationReport> {
    let last = sol.time_grid().steps();
    let energies: Vec<f64> = (0..=sol.order()).map(|n| energy_at_node(sol, q, n, last)).collect::<Result<_>>()?;
    let total: f64 = energies.iter().sum();
    let tiny = 1e-14 * energies.iter().fold(0.0f64, |m, v| m.max(*v));
    let mut warnings = Vec::new();
    if energies.len() < 3 {
        warnings.push(format!("only {} orders computed; tail estimate is unreliable", energies.len()));
    }
    let non_decaying = energies.windows(2).enumerate().any(|(n, w)| {
        let up = w[1] > tiny && w[1] >= w[0];
        if up {
            warnings.push(format!("F_{}(T) = {:e} ≥ F_{}(T) = {:e}", n + 1, w[1], n, w[0]));
        }
        up
    });
    let pts: Vec<(f64, f64)> = energies
        .iter()
        .enumerate()
        .skip(1)
        .filter(|(_, e)| **e > tiny)
        .map(|(n, e)| (n as f64, e.ln()))
        .collect();
    let decay_ratio = if pts.len() >= 2 {
        let m = pts.len() as f64;
        let (sx, sy) = pts.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
        let (mx, my) = (sx / m, sy / m);
        let (num, den) = pts.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + (x - mx) * (y - my), b + (x - mx) * (x - mx)));
        Some((num / den).exp())
    } else {
        None
    };
    let last_e = *energies.last().unwrap_or(&0.0);
    let tail_mass = if total == 0.0 || last_e <= tiny {
        0.0
    } else {
        match decay_ratio {
            Some(r) if r < 1.0 => last_e * r / (1.0 - r) / total,
            Some(_) => f64::INFINITY,
            None => last_e / total,
        }
    };
    if non_decaying {
        warnings.push("chaos energies do not decay: under-resolved truncation or no square-integrable solution".into());
    }
    Ok(TruncationReport { energies, decay_ratio, tail_mass, non_decaying, warnings })
}
