//! Compressed sparse row matrices and the linear solvers used by the
//! time stepper.

use alloc::vec::Vec;

#[allow(unused_imports)] // float methods come from libm without std
use num_traits::Float;

use crate::{Error, Result};

/// Residual target of the iterative solver, relative to `‖b‖`.
pub const SOLVE_TOLERANCE: f64 = 1e-12;
/// Largest accepted relative residual before a solve is reported as failed.
pub const SOLVE_FAILURE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl CsrMatrix {
    /// Square matrix from `(row, col, value)` triplets; duplicates are summed
    /// and exact zeros are kept so the stencil pattern stays visible.
    pub fn from_triplets(n: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        triplets.sort_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = alloc::vec![0usize; n + 1];
        let mut cols = Vec::with_capacity(triplets.len());
        let mut vals: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            if last == Some((r, c)) {
                *vals.last_mut().expect("previous entry") += v;
                continue;
            }
            cols.push(c);
            vals.push(v);
            row_ptr[r + 1] += 1;
            last = Some((r, c));
        }
        for r in 0..n {
            row_ptr[r + 1] += row_ptr[r];
        }
        Self { n, row_ptr, cols, vals }
    }

    pub fn zeros(n: usize) -> Self {
        Self { n, row_ptr: alloc::vec![0; n + 1], cols: Vec::new(), vals: Vec::new() }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_triplets(n, (0..n).map(|i| (i, i, 1.0)).collect())
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.cols[span.clone()].iter().copied().zip(self.vals[span].iter().copied())
    }

    /// `y = A x`.
    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        for (r, yr) in y.iter_mut().enumerate().take(self.n) {
            let mut acc = 0.0;
            for p in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.vals[p] * x[self.cols[p]];
            }
            *yr = acc;
        }
    }

    /// `y += s · A x`.
    pub fn apply_add(&self, s: f64, x: &[f64], y: &mut [f64]) {
        for (r, yr) in y.iter_mut().enumerate().take(self.n) {
            let mut acc = 0.0;
            for p in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.vals[p] * x[self.cols[p]];
            }
            *yr += s * acc;
        }
    }

    /// `y = Aᵀ x`.
    pub fn apply_transpose(&self, x: &[f64], y: &mut [f64]) {
        y.iter_mut().for_each(|v| *v = 0.0);
        for (r, &xr) in x.iter().enumerate().take(self.n) {
            for p in self.row_ptr[r]..self.row_ptr[r + 1] {
                y[self.cols[p]] += self.vals[p] * xr;
            }
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = alloc::vec![0.0; self.n];
        self.apply(x, &mut y);
        y
    }

    /// `α·A + β·B`.
    pub fn combine(alpha: f64, a: &CsrMatrix, beta: f64, b: &CsrMatrix) -> CsrMatrix {
        debug_assert_eq!(a.n, b.n);
        let mut t = Vec::with_capacity(a.nnz() + b.nnz());
        for r in 0..a.n {
            t.extend(a.row(r).map(|(c, v)| (r, c, alpha * v)));
            t.extend(b.row(r).map(|(c, v)| (r, c, beta * v)));
        }
        CsrMatrix::from_triplets(a.n, t)
    }

    /// `I + s·A`.
    pub fn shifted_identity(&self, s: f64) -> CsrMatrix {
        CsrMatrix::combine(1.0, &CsrMatrix::identity(self.n), s, self)
    }

    pub fn scaled(&self, s: f64) -> CsrMatrix {
        let mut out = self.clone();
        out.vals.iter_mut().for_each(|v| *v *= s);
        out
    }

    pub fn is_finite(&self) -> bool {
        self.vals.iter().all(|v| v.is_finite())
    }

    /// Entry `(r, c)`, zero when not stored.
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.row(r).filter(|(cc, _)| *cc == c).map(|(_, v)| v).sum()
    }

    /// Bands `(sub, diag, super)` when every row only touches `r−1, r, r+1`
    /// modulo `n` (a periodic tridiagonal matrix).
    fn periodic_bands(&self) -> Option<(Vec<f64>, Vec<f64>, Vec<f64>)> {
        let n = self.n;
        if n < 3 {
            return None;
        }
        let (mut sub, mut diag, mut sup) = (alloc::vec![0.0; n], alloc::vec![0.0; n], alloc::vec![0.0; n]);
        for r in 0..n {
            for (c, v) in self.row(r) {
                if c == r {
                    diag[r] += v;
                } else if c == (r + n - 1) % n {
                    sub[r] += v;
                } else if c == (r + 1) % n {
                    sup[r] += v;
                } else {
                    return None;
                }
            }
        }
        Some((sub, diag, sup))
    }
}

/// Factorised periodic tridiagonal system, solved by the Thomas algorithm
/// with a Sherman–Morrison correction for the corner entries.
#[derive(Debug, Clone)]
struct CyclicTridiagonal {
    sub: Vec<f64>,
    cprime: Vec<f64>,
    denom: Vec<f64>,
    z: Vec<f64>,
    beta_over_gamma: f64,
    correction_denom: f64,
}

impl CyclicTridiagonal {
    fn factor(sub: &[f64], diag: &[f64], sup: &[f64]) -> Option<Self> {
        let n = diag.len();
        // corners: A[0][n-1] = sub[0], A[n-1][0] = sup[n-1]
        let alpha = sup[n - 1];
        let beta = sub[0];
        let gamma = -diag[0];
        if gamma == 0.0 {
            return None;
        }
        let mut d = diag.to_vec();
        d[0] -= gamma;
        d[n - 1] -= alpha * beta / gamma;
        let mut cprime = alloc::vec![0.0; n];
        let mut denom = alloc::vec![0.0; n];
        denom[0] = d[0];
        for i in 0..n {
            if i > 0 {
                denom[i] = d[i] - sub[i] * cprime[i - 1];
            }
            if denom[i] == 0.0 || !denom[i].is_finite() {
                return None;
            }
            if i + 1 < n {
                cprime[i] = sup[i] / denom[i];
            }
        }
        let mut me = Self {
            sub: sub.to_vec(),
            cprime,
            denom,
            z: Vec::new(),
            beta_over_gamma: beta / gamma,
            correction_denom: 0.0,
        };
        let mut u = alloc::vec![0.0; n];
        u[0] = gamma;
        u[n - 1] = alpha;
        me.thomas(&mut u);
        me.correction_denom = 1.0 + u[0] + me.beta_over_gamma * u[n - 1];
        if me.correction_denom == 0.0 {
            return None;
        }
        me.z = u;
        Some(me)
    }

    fn thomas(&self, x: &mut [f64]) {
        let n = x.len();
        x[0] /= self.denom[0];
        for i in 1..n {
            x[i] = (x[i] - self.sub[i] * x[i - 1]) / self.denom[i];
        }
        for i in (0..n - 1).rev() {
            x[i] -= self.cprime[i] * x[i + 1];
        }
    }

    fn solve(&self, x: &mut [f64]) {
        let n = x.len();
        self.thomas(x);
        let factor = (x[0] + self.beta_over_gamma * x[n - 1]) / self.correction_denom;
        for (xi, zi) in x.iter_mut().zip(&self.z) {
            *xi -= factor * zi;
        }
    }
}

/// A prepared solver for `L x = b` with fixed `L`.
#[derive(Debug, Clone)]
pub struct LinearSolver {
    matrix: CsrMatrix,
    direct: Option<CyclicTridiagonal>,
    inv_diag: Vec<f64>,
}

impl LinearSolver {
    pub fn new(matrix: CsrMatrix) -> Self {
        let direct = matrix
            .periodic_bands()
            .and_then(|(sub, diag, sup)| CyclicTridiagonal::factor(&sub, &diag, &sup));
        let inv_diag = (0..matrix.dim())
            .map(|r| {
                let d = matrix.get(r, r);
                if d != 0.0 { 1.0 / d } else { 1.0 }
            })
            .collect();
        Self { matrix, direct, inv_diag }
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    pub fn is_direct(&self) -> bool {
        self.direct.is_some()
    }

    /// Solves in place: `x` holds `b` on entry and the solution on exit.
    pub fn solve_in_place(&self, x: &mut [f64]) -> Result<()> {
        if let Some(direct) = &self.direct {
            let rhs_norm = norm(x);
            let rhs = x.to_vec();
            direct.solve(x);
            // the factorisation is pivot-free; confirm it against the residual
            let mut r = self.matrix.mul_vec(x);
            r.iter_mut().zip(&rhs).for_each(|(ri, bi)| *ri = bi - *ri);
            if norm(&r) <= SOLVE_FAILURE * rhs_norm.max(f64::MIN_POSITIVE) || rhs_norm == 0.0 {
                return Ok(());
            }
            x.copy_from_slice(&rhs);
        }
        bicgstab(&self.matrix, &self.inv_diag, x)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Jacobi-preconditioned BiCGSTAB. `x` holds `b` on entry and is also used
/// as the initial guess.
fn bicgstab(a: &CsrMatrix, inv_diag: &[f64], x: &mut [f64]) -> Result<()> {
    let n = x.len();
    let b = x.to_vec();
    let b_norm = norm(&b);
    if b_norm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(());
    }
    let mut r = a.mul_vec(x);
    r.iter_mut().zip(&b).for_each(|(ri, bi)| *ri = bi - *ri);
    let r_hat = r.clone();
    let (mut rho, mut alpha, mut omega) = (1.0, 1.0, 1.0);
    let mut v = alloc::vec![0.0; n];
    let mut p = alloc::vec![0.0; n];
    let mut y = alloc::vec![0.0; n];
    let mut z = alloc::vec![0.0; n];
    let mut s = alloc::vec![0.0; n];
    let mut t = alloc::vec![0.0; n];
    let max_iter = 20 * n + 100;
    let mut res = norm(&r) / b_norm;
    for it in 0..max_iter {
        if res <= SOLVE_TOLERANCE {
            return Ok(());
        }
        let rho_new = dot(&r_hat, &r);
        if rho_new == 0.0 || omega == 0.0 {
            return Err(Error::SolveNotConverged { residual: res, iterations: it });
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
            y[i] = inv_diag[i] * p[i];
        }
        a.apply(&y, &mut v);
        alpha = rho / dot(&r_hat, &v);
        for i in 0..n {
            s[i] = r[i] - alpha * v[i];
        }
        if norm(&s) / b_norm <= SOLVE_TOLERANCE {
            for i in 0..n {
                x[i] += alpha * y[i];
            }
            return Ok(());
        }
        for i in 0..n {
            z[i] = inv_diag[i] * s[i];
        }
        a.apply(&z, &mut t);
        let tt = dot(&t, &t);
        omega = if tt > 0.0 { dot(&t, &s) / tt } else { 0.0 };
        for i in 0..n {
            x[i] += alpha * y[i] + omega * z[i];
            r[i] = s[i] - omega * t[i];
        }
        res = norm(&r) / b_norm;
    }
    if res <= SOLVE_FAILURE {
        Ok(())
    } else {
        Err(Error::SolveNotConverged { residual: res, iterations: max_iter })
    }
}

/// Largest eigenvalue of a symmetric operator of size `n`, by Lanczos with
/// full reorthogonalisation (at most `max_steps` steps) followed by Sturm
/// bisection on the tridiagonal projection.
pub fn largest_symmetric_eigenvalue<F>(n: usize, max_steps: usize, mut apply: F) -> Result<f64>
where
    F: FnMut(&[f64], &mut [f64]),
{
    if n == 0 {
        return Err(Error::InvalidParameter("empty operator".into()));
    }
    let steps = max_steps.clamp(1, n);
    // deterministic start vector with components on every mode
    let mut q: Vec<f64> = (0..n)
        .map(|i| {
            let h = (i as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
            0.5 + ((h >> 11) as f64) / ((1u64 << 53) as f64)
        })
        .collect();
    let qn = norm(&q);
    q.iter_mut().for_each(|v| *v /= qn);
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(steps);
    let mut alphas = Vec::with_capacity(steps);
    let mut betas: Vec<f64> = Vec::with_capacity(steps);
    let mut w = alloc::vec![0.0; n];
    for j in 0..steps {
        apply(&q, &mut w);
        let a = dot(&w, &q);
        alphas.push(a);
        for v in basis.iter() {
            let c = dot(&w, v);
            w.iter_mut().zip(v).for_each(|(wi, vi)| *wi -= c * vi);
        }
        let c = dot(&w, &q);
        w.iter_mut().zip(&q).for_each(|(wi, qi)| *wi -= c * qi);
        basis.push(q.clone());
        let b = norm(&w);
        if j + 1 == steps || b <= 1e-12 * alphas.iter().fold(1.0f64, |m, v| m.max(v.abs())) {
            break;
        }
        betas.push(b);
        q = w.iter().map(|v| v / b).collect();
    }
    if alphas.iter().any(|v| !v.is_finite()) || betas.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("non-finite Lanczos coefficients".into()));
    }
    Ok(tridiagonal_max_eigenvalue(&alphas, &betas))
}

/// Largest eigenvalue of the symmetric tridiagonal matrix `(diag, off)`.
fn tridiagonal_max_eigenvalue(diag: &[f64], off: &[f64]) -> f64 {
    let m = diag.len();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..m {
        let r = off.get(i).map_or(0.0, |v| v.abs()) + if i > 0 { off[i - 1].abs() } else { 0.0 };
        lo = lo.min(diag[i] - r);
        hi = hi.max(diag[i] + r);
    }
    // number of eigenvalues strictly below x
    let below = |x: f64| {
        let mut count = 0;
        let mut d = 1.0;
        for i in 0..m {
            let b2 = if i > 0 { off[i - 1] * off[i - 1] } else { 0.0 };
            d = diag[i] - x - if i > 0 { b2 / d } else { 0.0 };
            if d == 0.0 {
                d = -1e-300;
            }
            if d < 0.0 {
                count += 1;
            }
        }
        count
    };
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if below(mid) >= m {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

#[cfg(test)]
mod tests {
    use super::*;

    fn periodic_laplacian(n: usize, s: f64) -> CsrMatrix {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, -2.0 * s));
            t.push((i, (i + 1) % n, s));
            t.push((i, (i + n - 1) % n, s));
        }
        CsrMatrix::from_triplets(n, t)
    }

    #[test]
    fn triplets_sum_duplicates() {
        let m = CsrMatrix::from_triplets(2, alloc::vec![(0, 0, 1.0), (0, 0, 2.0), (1, 0, -1.0)]);
        assert_eq!(m.get(0, 0), 3.0);
        assert_eq!(m.mul_vec(&[1.0, 5.0]), alloc::vec![3.0, -1.0]);
        let mut y = alloc::vec![0.0; 2];
        m.apply_transpose(&[1.0, 1.0], &mut y);
        assert_eq!(y, alloc::vec![2.0, 0.0]);
    }

    #[test]
    fn cyclic_direct_solver_inverts() {
        let n = 16;
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 3.0 + 0.1 * i as f64));
            t.push((i, (i + 1) % n, -1.0 + 0.05 * i as f64));
            t.push((i, (i + n - 1) % n, -0.7));
        }
        let a = CsrMatrix::from_triplets(n, t);
        let solver = LinearSolver::new(a.clone());
        assert!(solver.is_direct());
        let x_true: Vec<f64> = (0..n).map(|i| (i as f64 * 0.3).sin()).collect();
        let mut x = a.mul_vec(&x_true);
        solver.solve_in_place(&mut x).unwrap();
        for (u, v) in x.iter().zip(&x_true) {
            assert!((u - v).abs() < 1e-12);
        }
    }

    #[test]
    fn bicgstab_solves_nonsymmetric_systems() {
        let n = 40;
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 4.0));
            t.push((i, (i + 1) % n, -1.3));
            t.push((i, (i + 7) % n, 0.6));
            t.push((i, (i + n - 3) % n, -0.9));
        }
        let a = CsrMatrix::from_triplets(n, t);
        let solver = LinearSolver::new(a.clone());
        assert!(!solver.is_direct());
        let x_true: Vec<f64> = (0..n).map(|i| 1.0 + (i as f64).cos()).collect();
        let mut x = a.mul_vec(&x_true);
        solver.solve_in_place(&mut x).unwrap();
        for (u, v) in x.iter().zip(&x_true) {
            assert!((u - v).abs() < 1e-9);
        }
    }

    #[test]
    fn lanczos_finds_largest_eigenvalue() {
        let n = 32;
        let lap = periodic_laplacian(n, 1.0);
        let shifted = CsrMatrix::combine(1.0, &lap, 0.5, &CsrMatrix::identity(n));
        // eigenvalues 0.5 − 4 sin²(πj/n); the largest is 0.5
        let l = largest_symmetric_eigenvalue(n, n, |x, y| shifted.apply(x, y)).unwrap();
        assert!((l - 0.5).abs() < 1e-9, "{l}");
        let neg = lap.scaled(-1.0);
        let l = largest_symmetric_eigenvalue(n, n, |x, y| neg.apply(x, y)).unwrap();
        assert!((l - 4.0).abs() < 1e-9, "{l}");
    }
}
