//! Heat-advection chaos coefficients against their closed form.
//!
//! For `du = a² u_xx dt + σ u_x dw` with `u(0) = sin x` the solution is
//! `e^{(σ²/2 − a²)t} sin(x + σ w_t)`. With the cosine basis `w_T = √T ξ_1`,
//! so only powers of the first mode appear and
//! `u_(n·e_1)(T) = e^{−a²T} Im(e^{ix} (iσ√T)^n) / √n!`.

use std::f64::consts::PI;
use std::sync::Arc;
use std::thread;

use wce_core::basis::{CosineBasis, TemporalBasis};
use wce_core::discretization::{FieldVector, OperatorSpec, SpatialGrid};
use wce_core::multiindex::{binomial, MultiIndex, MultiIndexSet};
use wce_core::propagator::{solve, ChaosProblem, ChaosSolution, SolveOptions, Storage, TimeGrid};
use wce_core::{Executor, Sequential};

const A2: f64 = 1.0;
const SIGMA: f64 = 0.8;
const T: f64 = 0.5;

fn problem(points: usize, steps: usize, modes: u32, order: u32) -> ChaosProblem {
    let grid = SpatialGrid::new_1d(2.0 * PI, points).unwrap();
    let u0 = grid.sample_fn(|x| x[0].sin());
    ChaosProblem {
        spec: OperatorSpec::heat_advection(A2, SIGMA),
        grid,
        time: TimeGrid::new(T, steps).unwrap(),
        basis: Arc::new(CosineBasis::new(T, modes as usize).unwrap()) as Arc<dyn TemporalBasis>,
        indices: MultiIndexSet::enumerate(modes, 1, order).unwrap(),
        u0,
    }
}

/// Closed-form coefficient of `ξ_1^n` (normalized Hermite) at time `T`.
fn exact(grid: &SpatialGrid, n: u32) -> FieldVector {
    let s = SIGMA * T.sqrt();
    let factorial: f64 = (1..=n).map(f64::from).product();
    let scale = (-A2 * T).exp() * s.powi(n as i32) / factorial.sqrt();
    // Im(e^{ix} iⁿ) cycles through sin, cos, −sin, −cos.
    grid.sample_fn(|x| {
        let v = match n % 4 {
            0 => x[0].sin(),
            1 => x[0].cos(),
            2 => -x[0].sin(),
            _ => -x[0].cos(),
        };
        scale * v
    })
}

/// Spawns one scoped thread per chunk; results stay in index order.
struct Chunked(usize);

impl Executor for Chunked {
    fn map<R, F>(&self, count: usize, f: F) -> Vec<R>
    where
        R: Send,
        F: Fn(usize) -> R + Sync + Send,
    {
        let chunk = count.div_ceil(self.0).max(1);
        let f = &f;
        thread::scope(|scope| {
            let handles: Vec<_> = (0..count)
                .step_by(chunk)
                .map(|start| scope.spawn(move || (start..(start + chunk).min(count)).map(f).collect::<Vec<_>>()))
                .collect();
            handles.into_iter().flat_map(|h| h.join().unwrap()).collect()
        })
    }
}

fn final_fields(sol: &ChaosSolution) -> Vec<Vec<f64>> {
    let last = sol.time_grid().steps();
    (0..sol.indices().len()).map(|p| sol.field(p, last).unwrap().to_vec()).collect()
}

#[test]
fn coefficients_match_the_closed_form() {
    let p = problem(256, 400, 4, 3);
    let sol = solve(&p, &SolveOptions::default(), &Sequential).unwrap();
    let grid = sol.grid();
    let unit = grid.l2_norm(&grid.sample_fn(|x| x[0].sin()));
    for alpha in sol.indices().indices() {
        let got = sol.coefficient(alpha, T).unwrap();
        let first_mode_only = alpha.entries().iter().all(|e| e.mode == 1);
        let want = if first_mode_only { exact(grid, alpha.order()) } else { FieldVector::zeros(grid.len()) };
        let err = grid.l2_norm(&got.sub(&want)) / unit;
        assert!(err < 1e-3, "{alpha}: relative error {err:.3e}");
    }
}

#[test]
fn error_shrinks_under_refinement() {
    let alpha = MultiIndex::from_triples(&[(1, 1, 2)]).unwrap();
    let err = |points, steps| {
        let sol = solve(&problem(points, steps, 2, 2), &SolveOptions::default(), &Sequential).unwrap();
        let grid = sol.grid();
        grid.l2_norm(&sol.coefficient(&alpha, T).unwrap().sub(&exact(grid, 2)))
    };
    let (coarse, fine) = (err(32, 50), err(64, 100));
    // Second order in space and time.
    assert!(fine < coarse / 3.0, "coarse {coarse:.3e}, fine {fine:.3e}");
}

#[test]
fn index_count_is_binomial() {
    for (modes, channels, order) in [(1, 1, 0), (3, 2, 2), (4, 3, 3), (8, 1, 4), (2, 5, 5)] {
        let set = MultiIndexSet::enumerate(modes, channels, order).unwrap();
        // Monomials of degree ≤ N in KI variables.
        let vars = u64::from(modes * channels);
        let top = vars + u64::from(order);
        let want = (1..=u64::from(order)).fold(1u64, |acc, i| acc * (top + 1 - i) / i);
        assert_eq!(set.len() as u64, want);
        assert_eq!(binomial(top, u64::from(order)), Some(set.len() as u128));
    }
}

#[test]
fn thread_layout_does_not_change_a_bit() {
    let p = problem(64, 40, 3, 3);
    let reference = final_fields(&solve(&p, &SolveOptions::default(), &Sequential).unwrap());
    for threads in [2, 3, 7] {
        let sol = solve(&p, &SolveOptions::default(), &Chunked(threads)).unwrap();
        assert!(final_fields(&sol) == reference, "{threads} threads");
    }
}

#[test]
fn storage_policy_only_affects_what_is_kept() {
    let p = problem(64, 40, 3, 2);
    let all = solve(&p, &SolveOptions::default(), &Sequential).unwrap();
    let fin = solve(&p, &SolveOptions { storage: Storage::Final, ..SolveOptions::default() }, &Sequential).unwrap();
    let every = solve(&p, &SolveOptions { storage: Storage::Every(7), ..SolveOptions::default() }, &Sequential).unwrap();
    assert_eq!(final_fields(&all), final_fields(&fin));
    assert_eq!(final_fields(&all), final_fields(&every));
    assert_eq!(fin.stored_nodes(), &[0, 40]);
    assert_eq!(every.stored_nodes(), &[0, 7, 14, 21, 28, 35, 40]);
    assert!(fin.field(0, 20).is_err());
    // Norms are tracked at every node regardless.
    for node in 0..=40 {
        assert_eq!(all.norm_squared(3, node), fin.norm_squared(3, node));
    }
}

#[test]
fn too_small_a_memory_budget_is_refused() {
    let p = problem(64, 40, 3, 2);
    let opts = SolveOptions { memory_budget: 1024, ..SolveOptions::default() };
    assert!(solve(&p, &opts, &Sequential).is_err());
    let fin = SolveOptions { memory_budget: 64 * 8 * 10 * 2, storage: Storage::Final, ..SolveOptions::default() };
    assert!(solve(&p, &fin, &Sequential).is_ok());
}
