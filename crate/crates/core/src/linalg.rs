//! Preconditioned conjugate gradient with deterministic reductions, and an
//! aggregation multigrid preconditioner for graph-Laplacian-like matrices.

use rayon::prelude::*;

use crate::error::{Error, Result};

const CHUNK: usize = 4096;

/// Dot product summed chunk by chunk in a fixed order, so the result does
/// not depend on the thread count.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    let partial: Vec<f64> =
        a.par_chunks(CHUNK).zip(b.par_chunks(CHUNK)).map(|(x, y)| x.iter().zip(y).map(|(p, q)| p * q).sum()).collect();
    partial.iter().sum()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    y.par_iter_mut().zip(x.par_iter()).for_each(|(yi, xi)| *yi += alpha * xi);
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgReport {
    pub iterations: usize,
    /// Final preconditioner-free residual norm relative to `|b|`.
    pub residual: f64,
}

/// Jacobi-preconditioned CG; see [`pcg_with`].
pub fn pcg(
    solver: &'static str,
    apply: impl Fn(&[f64], &mut [f64]),
    b: &[f64],
    x: &mut [f64],
    diag: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<CgReport> {
    let inv: Vec<f64> = diag.iter().map(|&d| if d > 0.0 { 1.0 / d } else { 1.0 }).collect();
    let jacobi = |r: &[f64], z: &mut [f64]| {
        z.par_iter_mut().zip(r.par_iter().zip(inv.par_iter())).for_each(|(zi, (ri, di))| *zi = ri * di)
    };
    pcg_with(solver, apply, b, x, jacobi, tol, max_iter)
}

/// Solves `A x = b` for symmetric positive (semi-)definite `A` with a
/// symmetric positive preconditioner, starting from the contents of `x`.
/// Stops when `|r| <= tol |b|`.
pub fn pcg_with(
    solver: &'static str,
    apply: impl Fn(&[f64], &mut [f64]),
    b: &[f64],
    x: &mut [f64],
    precond: impl Fn(&[f64], &mut [f64]),
    tol: f64,
    max_iter: usize,
) -> Result<CgReport> {
    let n = b.len();
    let bnorm = dot(b, b).sqrt();
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(CgReport { iterations: 0, residual: 0.0 });
    }
    let mut ax = vec![0.0; n];
    apply(x, &mut ax);
    let mut r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
    let mut rnorm = dot(&r, &r).sqrt();
    if rnorm <= tol * bnorm {
        return Ok(CgReport { iterations: 0, residual: rnorm / bnorm });
    }
    let mut z = vec![0.0; n];
    precond(&r, &mut z);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    for it in 1..=max_iter {
        apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::SolverDiverged { solver, iterations: it, residual: rnorm / bnorm });
        }
        let alpha = rz / pap;
        axpy(alpha, &p, x);
        axpy(-alpha, &ap, &mut r);
        rnorm = dot(&r, &r).sqrt();
        if rnorm <= tol * bnorm {
            return Ok(CgReport { iterations: it, residual: rnorm / bnorm });
        }
        precond(&r, &mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        p.par_iter_mut().zip(z.par_iter()).for_each(|(pi, zi)| *pi = zi + beta * *pi);
    }
    Err(Error::SolverDiverged { solver, iterations: max_iter, residual: rnorm / bnorm })
}

/// Square sparse matrix in compressed-row form.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    pub start: Vec<usize>,
    pub cols: Vec<usize>,
    pub vals: Vec<f64>,
}

impl CsrMatrix {
    pub fn len(&self) -> usize {
        self.start.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        (self.start[i]..self.start[i + 1]).map(move |k| (self.cols[k], self.vals[k]))
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.row(i).filter(|(j, _)| *j == i).map(|(_, a)| a).sum()).collect()
    }

    pub fn mul(&self, x: &[f64], y: &mut [f64]) {
        y.par_iter_mut().enumerate().for_each(|(i, yi)| *yi = self.row(i).map(|(j, a)| a * x[j]).sum());
    }
}

const COARSEST: usize = 64;
const MAX_LEVELS: usize = 25;
const STRENGTH: f64 = 0.08;
const OVERCORRECTION: f64 = 1.8;

#[derive(Debug, Clone)]
struct Level {
    a: CsrMatrix,
    diag: Vec<f64>,
    /// Coarse aggregate of every row.
    agg: Vec<usize>,
}

/// Unsmoothed-aggregation V-cycle with symmetric Gauss–Seidel smoothing,
/// usable as a CG preconditioner for symmetric M-matrices (semidefinite
/// ones included).
#[derive(Debug, Clone)]
pub struct Amg {
    levels: Vec<Level>,
    coarse: Coarse,
}

/// Coarsest-level solver. Strongly diagonally dominant systems (acoustic
/// gas cells) may stop coarsening early; a dense factorization of such a
/// level would be needlessly expensive, and a few Gauss–Seidel sweeps
/// already solve it well.
#[derive(Debug, Clone)]
enum Coarse {
    Direct(DenseLdl),
    Relax { a: CsrMatrix, diag: Vec<f64> },
}

const DENSE_LIMIT: usize = 4 * COARSEST;
const COARSE_SWEEPS: usize = 2;

impl Coarse {
    fn len(&self) -> usize {
        match self {
            Coarse::Direct(ldl) => ldl.n,
            Coarse::Relax { a, .. } => a.len(),
        }
    }

    fn solve(&self, b: &[f64], x: &mut [f64]) {
        match self {
            Coarse::Direct(ldl) => ldl.solve(b, x),
            Coarse::Relax { a, diag } => {
                x.iter_mut().for_each(|v| *v = 0.0);
                for _ in 0..COARSE_SWEEPS {
                    gauss_seidel(a, diag, b, x, true);
                    gauss_seidel(a, diag, b, x, false);
                }
            }
        }
    }
}

impl Amg {
    pub fn new(a: CsrMatrix) -> Self {
        let mut levels = Vec::new();
        let mut a = a;
        while a.len() > COARSEST && levels.len() < MAX_LEVELS {
            let agg = aggregate(&a);
            let nc = agg.iter().copied().max().map_or(0, |m| m + 1);
            if nc * 10 > a.len() * 9 {
                break;
            }
            let coarse = galerkin(&a, &agg, nc);
            levels.push(Level { diag: a.diagonal(), a, agg });
            a = coarse;
        }
        let coarse = if a.len() <= DENSE_LIMIT {
            Coarse::Direct(DenseLdl::new(&a))
        } else {
            Coarse::Relax { diag: a.diagonal(), a }
        };
        Self { levels, coarse }
    }

    pub fn levels(&self) -> usize {
        self.levels.len() + 1
    }

    pub fn apply(&self, r: &[f64], z: &mut [f64]) {
        self.cycle(0, r, z);
    }

    fn cycle(&self, k: usize, r: &[f64], z: &mut [f64]) {
        let Some(level) = self.levels.get(k) else {
            self.coarse.solve(r, z);
            return;
        };
        let n = r.len();
        z.iter_mut().for_each(|v| *v = 0.0);
        gauss_seidel(&level.a, &level.diag, r, z, true);
        let mut res = vec![0.0; n];
        level.a.mul(z, &mut res);
        let nc = self.levels.get(k + 1).map_or(self.coarse.len(), |l| l.a.len());
        let mut rc = vec![0.0; nc];
        for i in 0..n {
            rc[level.agg[i]] += r[i] - res[i];
        }
        let mut zc = vec![0.0; nc];
        self.cycle(k + 1, &rc, &mut zc);
        // Piecewise-constant prolongation underestimates smooth errors;
        // over-correcting recovers most of the smoothed-aggregation rate.
        for i in 0..n {
            z[i] += OVERCORRECTION * zc[level.agg[i]];
        }
        gauss_seidel(&level.a, &level.diag, r, z, false);
    }
}

fn gauss_seidel(a: &CsrMatrix, diag: &[f64], b: &[f64], x: &mut [f64], forward: bool) {
    let n = a.len();
    let mut sweep = |i: usize| {
        if diag[i] <= 0.0 {
            return;
        }
        let mut s = b[i];
        for (j, v) in a.row(i) {
            if j != i {
                s -= v * x[j];
            }
        }
        x[i] = s / diag[i];
    };
    if forward {
        (0..n).for_each(&mut sweep);
    } else {
        (0..n).rev().for_each(&mut sweep);
    }
}

/// Greedy aggregation over strong couplings `-a_ij >= θ sqrt(a_ii a_jj)`.
fn aggregate(a: &CsrMatrix) -> Vec<usize> {
    let n = a.len();
    let diag = a.diagonal();
    let strong = |i: usize, j: usize, v: f64| j != i && -v >= STRENGTH * (diag[i] * diag[j]).abs().sqrt();
    const NONE: usize = usize::MAX;
    let mut agg = vec![NONE; n];
    let mut nc = 0;
    // Roots whose strong neighborhood is still free.
    for i in 0..n {
        if agg[i] != NONE {
            continue;
        }
        if a.row(i).filter(|&(j, v)| strong(i, j, v)).any(|(j, _)| agg[j] != NONE) {
            continue;
        }
        agg[i] = nc;
        for (j, v) in a.row(i) {
            if strong(i, j, v) {
                agg[j] = nc;
            }
        }
        nc += 1;
    }
    // Attach leftovers to the strongest aggregated neighbor.
    let snapshot = agg.clone();
    for i in 0..n {
        if agg[i] != NONE {
            continue;
        }
        let best = a
            .row(i)
            .filter(|&(j, v)| strong(i, j, v) && snapshot[j] != NONE)
            .min_by(|x, y| x.1.total_cmp(&y.1))
            .map(|(j, _)| snapshot[j]);
        if let Some(b) = best {
            agg[i] = b;
        }
    }
    // Whatever remains forms new aggregates with its free neighbors.
    for i in 0..n {
        if agg[i] != NONE {
            continue;
        }
        agg[i] = nc;
        for (j, v) in a.row(i) {
            if strong(i, j, v) && agg[j] == NONE {
                agg[j] = nc;
            }
        }
        nc += 1;
    }
    agg
}

/// `Pᵀ A P` for the piecewise-constant prolongation of `agg`.
fn galerkin(a: &CsrMatrix, agg: &[usize], nc: usize) -> CsrMatrix {
    let mut members = vec![Vec::new(); nc];
    for (i, &g) in agg.iter().enumerate() {
        members[g].push(i);
    }
    let mut marker = vec![usize::MAX; nc];
    let mut pos = vec![0; nc];
    let mut start = Vec::with_capacity(nc + 1);
    let mut cols = Vec::new();
    let mut vals = Vec::new();
    start.push(0);
    for (row, m) in members.iter().enumerate() {
        for &i in m {
            for (j, v) in a.row(i) {
                let c = agg[j];
                if marker[c] != row {
                    marker[c] = row;
                    pos[c] = cols.len();
                    cols.push(c);
                    vals.push(v);
                } else {
                    vals[pos[c]] += v;
                }
            }
        }
        start.push(cols.len());
    }
    CsrMatrix { start, cols, vals }
}

/// Dense LDLᵀ of the coarsest level. Pivots below a relative threshold are
/// treated as null directions and their solution component set to zero.
#[derive(Debug, Clone)]
struct DenseLdl {
    n: usize,
    l: Vec<f64>,
    d: Vec<f64>,
}

impl DenseLdl {
    fn new(a: &CsrMatrix) -> Self {
        let n = a.len();
        let mut m = vec![0.0; n * n];
        for i in 0..n {
            for (j, v) in a.row(i) {
                m[i * n + j] += v;
            }
        }
        let scale = (0..n).map(|i| m[i * n + i].abs()).fold(0.0, f64::max);
        let mut l = vec![0.0; n * n];
        let mut d = vec![0.0; n];
        for j in 0..n {
            let mut dj = m[j * n + j];
            for k in 0..j {
                dj -= l[j * n + k] * l[j * n + k] * d[k];
            }
            d[j] = if dj > 1e-12 * scale { dj } else { 0.0 };
            l[j * n + j] = 1.0;
            for i in j + 1..n {
                let mut s = m[i * n + j];
                for k in 0..j {
                    s -= l[i * n + k] * l[j * n + k] * d[k];
                }
                l[i * n + j] = if d[j] > 0.0 { s / d[j] } else { 0.0 };
            }
        }
        Self { n, l, d }
    }

    fn solve(&self, b: &[f64], x: &mut [f64]) {
        let n = self.n;
        let mut y = b.to_vec();
        for i in 0..n {
            for k in 0..i {
                y[i] -= self.l[i * n + k] * y[k];
            }
        }
        for i in 0..n {
            y[i] = if self.d[i] > 0.0 { y[i] / self.d[i] } else { 0.0 };
        }
        for i in (0..n).rev() {
            for k in i + 1..n {
                y[i] -= self.l[k * n + i] * y[k];
            }
        }
        x.copy_from_slice(&y);
    }
}

/// Anderson mixing for a fixed point `x = g(x)`: each update combines the
/// last few iterates to minimize the linearized residual. On a linear map it
/// matches restarted GMRES, so it also converges where plain iteration
/// oscillates with growing amplitude.
#[derive(Debug, Clone)]
pub struct Anderson {
    depth: usize,
    last: Option<(Vec<f64>, Vec<f64>)>,
    df: Vec<Vec<f64>>,
    dg: Vec<Vec<f64>>,
}

impl Anderson {
    pub fn new(depth: usize) -> Self {
        Self { depth, last: None, df: Vec::new(), dg: Vec::new() }
    }

    /// Next iterate from the current one `x` and its image `g = g(x)`.
    pub fn next(&mut self, x: &[f64], g: Vec<f64>) -> Vec<f64> {
        let f: Vec<f64> = g.iter().zip(x).map(|(a, b)| a - b).collect();
        if let Some((f0, g0)) = self.last.take() {
            self.df.push(f.iter().zip(&f0).map(|(a, b)| a - b).collect());
            self.dg.push(g.iter().zip(&g0).map(|(a, b)| a - b).collect());
            if self.df.len() > self.depth {
                self.df.remove(0);
                self.dg.remove(0);
            }
        }
        let mut out = g.clone();
        let m = self.df.len();
        if m > 0 {
            let gram = nalgebra::DMatrix::from_fn(m, m, |a, b| dot(&self.df[a], &self.df[b]));
            let rhs = nalgebra::DVector::from_fn(m, |a, _| dot(&self.df[a], &f));
            let trace = gram.trace();
            let reg = gram + nalgebra::DMatrix::identity(m, m) * (1e-12 * trace);
            match reg.cholesky() {
                Some(ch) => {
                    let gamma = ch.solve(&rhs);
                    for (k, dg) in self.dg.iter().enumerate() {
                        axpy(-gamma[k], dg, &mut out);
                    }
                }
                None => {
                    self.df.clear();
                    self.dg.clear();
                }
            }
        }
        self.last = Some((f, g));
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplace_1d(x: &[f64], y: &mut [f64]) {
        let n = x.len();
        for i in 0..n {
            let left = if i > 0 { x[i - 1] } else { 0.0 };
            let right = if i + 1 < n { x[i + 1] } else { 0.0 };
            y[i] = 2.0 * x[i] - left - right;
        }
    }

    #[test]
    fn solves_dirichlet_laplacian() {
        let n = 50;
        let b = vec![1.0; n];
        let mut x = vec![0.0; n];
        let rep = pcg("test", laplace_1d, &b, &mut x, &vec![2.0; n], 1e-12, 200).unwrap();
        assert!(rep.iterations <= n);
        // Exact solution of -u'' = 1 with u_0 = u_{n+1} = 0 on the grid.
        for (i, xi) in x.iter().enumerate() {
            let k = (i + 1) as f64;
            assert!((xi - 0.5 * k * (n as f64 + 1.0 - k)).abs() < 1e-8);
        }
    }

    #[test]
    fn reports_divergence() {
        let n = 50;
        let b = vec![1.0; n];
        let mut x = vec![0.0; n];
        let err = pcg("test", laplace_1d, &b, &mut x, &vec![2.0; n], 1e-12, 3).unwrap_err();
        assert!(matches!(err, Error::SolverDiverged { iterations: 3, .. }));
    }

    #[test]
    fn dot_is_deterministic_across_chunking() {
        let a: Vec<f64> = (0..10_000).map(|i| (i as f64 * 0.37).sin()).collect();
        let s1 = dot(&a, &a);
        let s2 = dot(&a, &a);
        assert_eq!(s1.to_bits(), s2.to_bits());
    }

    /// 5-point Laplacian on an n×n grid with per-cell coefficients `k`;
    /// `dirichlet` adds a unit wall coupling on the left column.
    fn grid(n: usize, k: impl Fn(usize, usize) -> f64, dirichlet: bool) -> CsrMatrix {
        let id = |i: usize, j: usize| i * n + j;
        let (mut start, mut cols, mut vals) = (vec![0], Vec::new(), Vec::new());
        for i in 0..n {
            for j in 0..n {
                let mut d = if dirichlet && j == 0 { 1.0 } else { 0.0 };
                let mut nb = Vec::new();
                if i > 0 { nb.push((i - 1, j)); }
                if i + 1 < n { nb.push((i + 1, j)); }
                if j > 0 { nb.push((i, j - 1)); }
                if j + 1 < n { nb.push((i, j + 1)); }
                for &(a, b) in &nb {
                    let c = 2.0 / (1.0 / k(i, j) + 1.0 / k(a, b));
                    cols.push(id(a, b));
                    vals.push(-c);
                    d += c;
                }
                cols.push(id(i, j));
                vals.push(d);
                start.push(cols.len());
            }
        }
        CsrMatrix { start, cols, vals }
    }

    fn amg_iterations(a: &CsrMatrix, b: &[f64]) -> usize {
        assert!(Amg::new(a.clone()).levels() > 1);
        amg_iterations_any(a, b)
    }

    fn amg_iterations_any(a: &CsrMatrix, b: &[f64]) -> usize {
        let amg = Amg::new(a.clone());
        let mut x = vec![0.0; a.len()];
        let rep = pcg_with("amg", |v, y| a.mul(v, y), b, &mut x, |r, z| amg.apply(r, z), 1e-10, 200).unwrap();
        let mut ax = vec![0.0; a.len()];
        a.mul(&x, &mut ax);
        let res: f64 = ax.iter().zip(b).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
        assert!(res <= 1e-9 * dot(b, b).sqrt(), "residual {res}");
        rep.iterations
    }

    #[test]
    fn amg_iterations_barely_grow_with_size() {
        let mut its = Vec::new();
        for n in [16, 32, 64] {
            let a = grid(n, |_, _| 1.0, true);
            let b: Vec<f64> = (0..n * n).map(|i| (i as f64 * 0.7).sin()).collect();
            its.push(amg_iterations(&a, &b));
        }
        assert!(its[2] <= 2 * its[0] + 5, "{its:?}");
        assert!(its[2] < 60, "{its:?}");
    }

    #[test]
    fn amg_handles_large_coefficient_jumps() {
        // An inclusion 1000 times stiffer, as for a heavy droplet in gas.
        let n = 48;
        let k = |i: usize, j: usize| {
            let (x, y) = (i as f64 - 24.0, j as f64 - 24.0);
            if x * x + y * y < 100.0 { 1.0 } else { 1000.0 }
        };
        let a = grid(n, k, true);
        let b: Vec<f64> = (0..n * n).map(|i| (i as f64 * 1.3).cos()).collect();
        assert!(amg_iterations(&a, &b) < 60);
    }

    #[test]
    fn amg_preconditions_singular_neumann_systems() {
        let n = 32;
        let a = grid(n, |i, _| if i < 16 { 1.0 } else { 800.0 }, false);
        let mut b: Vec<f64> = (0..n * n).map(|i| (i as f64 * 0.3).sin()).collect();
        let mean = b.iter().sum::<f64>() / b.len() as f64;
        b.iter_mut().for_each(|v| *v -= mean);
        assert!(amg_iterations(&a, &b) < 60);
    }

    #[test]
    fn amg_is_symmetric() {
        // CG needs a symmetric preconditioner: (M⁻¹u, v) = (u, M⁻¹v).
        let a = grid(20, |i, j| 1.0 + ((i * 7 + j) % 5) as f64, true);
        let amg = Amg::new(a.clone());
        let u: Vec<f64> = (0..400).map(|i| (i as f64).sin()).collect();
        let v: Vec<f64> = (0..400).map(|i| (i as f64 * 0.1).cos()).collect();
        let (mut mu, mut mv) = (vec![0.0; 400], vec![0.0; 400]);
        amg.apply(&u, &mut mu);
        amg.apply(&v, &mut mv);
        assert!((dot(&mu, &v) - dot(&u, &mv)).abs() < 1e-10 * dot(&mu, &v).abs());
    }

    #[test]
    fn anderson_converges_where_plain_iteration_diverges() {
        // x = b + M x with eigenvalues of M in [-1.8, 0.5].
        let n = 40;
        let lam: Vec<f64> = (0..n).map(|i| -1.8 + 2.3 * i as f64 / (n - 1) as f64).collect();
        let b: Vec<f64> = (0..n).map(|i| 1.0 + (i % 3) as f64).collect();
        let exact: Vec<f64> = (0..n).map(|i| b[i] / (1.0 - lam[i])).collect();
        let map = |x: &[f64]| -> Vec<f64> { (0..n).map(|i| b[i] + lam[i] * x[i]).collect() };
        let mut x = vec![0.0; n];
        let mut acc = Anderson::new(8);
        for _ in 0..60 {
            let g = map(&x);
            x = acc.next(&x, g);
        }
        let err = x.iter().zip(&exact).map(|(a, e)| (a - e).abs()).fold(0.0, f64::max);
        assert!(err < 1e-8, "{err}");
    }

    #[test]
    fn tiny_systems_are_solved_directly() {
        let a = grid(4, |_, _| 1.0, true);
        let amg = Amg::new(a.clone());
        assert_eq!(amg.levels(), 1);
        let b = vec![1.0; 16];
        let mut x = vec![0.0; 16];
        amg.apply(&b, &mut x);
        let mut ax = vec![0.0; 16];
        a.mul(&x, &mut ax);
        assert!(ax.iter().all(|v| (v - 1.0).abs() < 1e-12));
    }

    #[test]
    fn diagonally_dominant_systems_skip_the_dense_solve() {
        // Weak couplings: nothing aggregates, so the first level is relaxed.
        let mut a = grid(40, |_, _| 1e-3, true);
        for i in 0..a.len() {
            let k = a.start[i + 1] - 1;
            a.vals[k] += 1.0;
        }
        let amg = Amg::new(a.clone());
        assert_eq!(amg.levels(), 1);
        assert!(matches!(amg.coarse, Coarse::Relax { .. }));
        let b: Vec<f64> = (0..1600).map(|i| (i as f64).sin()).collect();
        assert!(amg_iterations_any(&a, &b) <= 5);
    }
}
