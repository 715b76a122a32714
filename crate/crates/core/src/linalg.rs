//! Dense complex linear algebra helpers on top of faer.

use faer::Mat;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMat = Mat<Complex64>;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Square matrix from row-major entries.
pub fn cmat(n: usize, rows: &[Complex64]) -> CMat {
    assert_eq!(rows.len(), n * n, "cmat needs n*n entries");
    Mat::from_fn(n, n, |i, j| rows[i * n + j])
}

pub fn identity(n: usize) -> CMat {
    Mat::from_fn(n, n, |i, j| if i == j { Complex64::new(1.0, 0.0) } else { ZERO })
}

pub fn entries(m: &CMat) -> impl Iterator<Item = Complex64> + '_ {
    (0..m.ncols()).flat_map(move |j| (0..m.nrows()).map(move |i| m[(i, j)]))
}

pub fn max_abs(m: &CMat) -> f64 {
    let mut r: f64 = 0.0;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            r = r.max(m[(i, j)].norm());
        }
    }
    r
}

pub fn max_abs_diff(a: &CMat, b: &CMat) -> f64 {
    assert_eq!((a.nrows(), a.ncols()), (b.nrows(), b.ncols()));
    let mut r: f64 = 0.0;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            r = r.max((a[(i, j)] - b[(i, j)]).norm());
        }
    }
    r
}

pub fn conj(m: &CMat) -> CMat {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)].conj())
}

pub fn transpose(m: &CMat) -> CMat {
    Mat::from_fn(m.ncols(), m.nrows(), |i, j| m[(j, i)])
}

pub fn adjoint(m: &CMat) -> CMat {
    Mat::from_fn(m.ncols(), m.nrows(), |i, j| m[(j, i)].conj())
}

pub fn scale(m: &CMat, z: Complex64) -> CMat {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)] * z)
}

pub fn matmul(a: &CMat, b: &CMat) -> CMat {
    a * b
}

/// Eigenvalues of a small matrix. 1×1 and 2×2 are done in closed form.
pub fn small_eigenvalues(a: &CMat) -> Result<Vec<Complex64>> {
    match a.nrows() {
        0 => Ok(vec![]),
        1 => Ok(vec![a[(0, 0)]]),
        2 => {
            let m = (a[(0, 0)] + a[(1, 1)]) * 0.5;
            let h = (a[(0, 0)] - a[(1, 1)]) * 0.5;
            let r = (h * h + a[(0, 1)] * a[(1, 0)]).sqrt();
            Ok(vec![m - r, m + r])
        }
        _ => a
            .eigenvalues()
            .map_err(|e| Error::Solver(format!("{e:?}"))),
    }
}

pub fn det(a: &CMat) -> Complex64 {
    match a.nrows() {
        0 => Complex64::new(1.0, 0.0),
        1 => a[(0, 0)],
        2 => a[(0, 0)] * a[(1, 1)] - a[(0, 1)] * a[(1, 0)],
        _ => a.determinant(),
    }
}

/// `tr(A⁻¹ B)` for small square matrices.
pub fn trace_solve(a: &CMat, b: &CMat) -> Complex64 {
    match a.nrows() {
        1 => b[(0, 0)] / a[(0, 0)],
        2 => {
            let d = det(a);
            // adj(A) B traced
            let t = a[(1, 1)] * b[(0, 0)] - a[(0, 1)] * b[(1, 0)] - a[(1, 0)] * b[(0, 1)]
                + a[(0, 0)] * b[(1, 1)];
            t / d
        }
        _ => {
            use faer::linalg::solvers::Solve;
            let x = a.partial_piv_lu().solve(b);
            (0..x.nrows()).map(|i| x[(i, i)]).sum()
        }
    }
}

/// Eigendecomposition with eigenvector columns of unit norm.
#[derive(Clone, Debug)]
pub struct Eig {
    pub values: Vec<Complex64>,
    pub vectors: Option<CMat>,
}

/// Diagonal balancing of a matrix given by its nonzero entries.
///
/// Returns `d` such that `D⁻¹ A D` has comparable row and column norms.
/// Real factors; the back-transform divides them out again.
pub fn balance_entries(n: usize, entries: &[(usize, usize, Complex64)]) -> Vec<f64> {
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for &(i, j, z) in entries {
        if i != j {
            let a = z.norm();
            if a > 0.0 {
                rows[i].push((j, a));
                cols[j].push((i, a));
            }
        }
    }
    // Osborne iteration on 2-norms with real factors
    let mut d = vec![1.0f64; n];
    for _sweep in 0..20000 {
        let mut worst: f64 = 0.0;
        for i in 0..n {
            // entry (i,j) of the scaled matrix is a_ij d_j / d_i
            let mut r = 0.0;
            for &(j, a) in &rows[i] {
                r += (a * d[j]).powi(2);
            }
            let mut c = 0.0;
            for &(k, a) in &cols[i] {
                c += (a / d[k]).powi(2);
            }
            if c == 0.0 || r == 0.0 {
                continue;
            }
            // new row norm^2 = r / (d_i f)^2, column norm^2 = c (d_i f)^2
            let f = (r.sqrt() / c.sqrt()).sqrt() / d[i];
            let f = f.clamp(1e-8, 1e8);
            worst = worst.max(f.ln().abs());
            d[i] *= f;
        }
        if worst < 1e-3 {
            break;
        }
    }
    d
}

fn dense_entries(a: &CMat) -> Vec<(usize, usize, Complex64)> {
    let mut e = Vec::new();
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            let z = a[(i, j)];
            if z != ZERO {
                e.push((i, j, z));
            }
        }
    }
    e
}

/// Eigenvalues (and optionally eigenvectors) of a general complex matrix.
pub fn eig(a: &CMat, vectors: bool) -> Result<Eig> {
    let n = a.nrows();
    eig_entries(n, &dense_entries(a), vectors)
}

/// As [`eig`], for a matrix given by its nonzero entries.
pub fn eig_entries(n: usize, entries: &[(usize, usize, Complex64)], vectors: bool) -> Result<Eig> {
    if n == 0 {
        return Ok(Eig { values: vec![], vectors: vectors.then(|| Mat::zeros(0, 0)) });
    }
    // faer's values-only routine breaks exact spectral pairings on strongly
    // non-normal matrices (1e-2 against 1e-11), so always decompose fully.
    let d = balance_entries(n, entries);
    let solver = |e: faer::linalg::evd::EvdError| Error::Solver(format!("{e:?}"));
    // A real matrix goes through the real Schur form, which keeps conjugate pairs exact.
    let (values, u) = if entries.iter().all(|&(_, _, z)| z.im == 0.0) {
        let mut b = Mat::<f64>::zeros(n, n);
        for &(i, j, z) in entries {
            b[(i, j)] += z.re * (d[j] / d[i]);
        }
        let e = b.eigen().map_err(solver)?;
        (e.S().column_vector().iter().copied().collect::<Vec<_>>(), e.U().to_owned())
    } else {
        let mut b = Mat::<Complex64>::zeros(n, n);
        for &(i, j, z) in entries {
            b[(i, j)] += z * (d[j] / d[i]);
        }
        let e = b.eigen().map_err(solver)?;
        (e.S().column_vector().iter().copied().collect::<Vec<_>>(), e.U().to_owned())
    };
    if !vectors {
        return Ok(Eig { values, vectors: None });
    }
    let mut v = Mat::<Complex64>::zeros(n, n);
    for c in 0..n {
        let mut norm2 = 0.0;
        for r in 0..n {
            let z = u[(r, c)] * d[r];
            v[(r, c)] = z;
            norm2 += z.norm_sqr();
        }
        let inv = 1.0 / norm2.sqrt();
        if !inv.is_finite() {
            return Err(Error::Solver(format!("eigenvector {c} vanished after back-scaling")));
        }
        for r in 0..n {
            v[(r, c)] *= inv;
        }
    }
    Ok(Eig { values, vectors: Some(v) })
}

/// Orthonormal basis of `{x : M x ≈ 0}` from singular values below `tol · max(1, σ_max)`.
pub fn null_space(m: &CMat, tol: f64) -> Result<CMat> {
    let cols = m.ncols();
    let svd = m.svd().map_err(|e| Error::Solver(format!("{e:?}")))?;
    let s: Vec<f64> = svd.S().column_vector().iter().map(|z| z.re).collect();
    let smax = s.first().copied().unwrap_or(0.0).max(1.0);
    let rank = s.iter().filter(|&&x| x > tol * smax).count();
    let v = svd.V();
    Ok(Mat::from_fn(cols, cols - rank, |i, j| v[(i, rank + j)]))
}

/// Unitary polar factor of a square matrix and its singular-value ratio σ_min/σ_max.
pub fn polar_unitary(x: &CMat) -> Result<(CMat, f64)> {
    let svd = x.svd().map_err(|e| Error::Solver(format!("{e:?}")))?;
    let s: Vec<f64> = svd.S().column_vector().iter().map(|z| z.re).collect();
    let ratio = match (s.last(), s.first()) {
        (Some(&lo), Some(&hi)) if hi > 0.0 => lo / hi,
        _ => 0.0,
    };
    let u = svd.U() * svd.V().adjoint();
    Ok((u, ratio))
}

/// Minimum-cost assignment for an `n×m` cost matrix with `n ≤ m`.
/// Returns, for each row, the assigned column.
pub fn assignment(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    if n == 0 {
        return vec![];
    }
    let m = cost[0].len();
    assert!(n <= m, "assignment needs rows <= cols");
    // Shortest augmenting path with potentials, 1-based.
    let inf = f64::INFINITY;
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    let mut p = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=m {
                if !used[j] {
                    let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut ans = vec![0usize; n];
    for j in 1..=m {
        if p[j] != 0 {
            ans[p[j] - 1] = j - 1;
        }
    }
    ans
}

/// Bottleneck distance between two equal-size multisets of complex numbers,
/// under the matching that minimizes the summed squared distance.
pub fn multiset_distance(a: &[Complex64], b: &[Complex64]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    let cost: Vec<Vec<f64>> = a
        .iter()
        .map(|x| b.iter().map(|y| (x - y).norm_sqr()).collect())
        .collect();
    let asg = assignment(&cost);
    asg.iter()
        .enumerate()
        .map(|(i, &j)| (a[i] - b[j]).norm())
        .fold(0.0, f64::max)
}

/// Largest distance from any point of `a` to its nearest point in `b`, and vice versa.
/// Cheap stand-in for [`multiset_distance`] on large spectra.
pub fn hausdorff_distance(a: &[Complex64], b: &[Complex64]) -> f64 {
    let one = |p: &[Complex64], q: &[Complex64]| {
        p.iter()
            .map(|x| q.iter().map(|y| (x - y).norm()).fold(f64::INFINITY, f64::min))
            .fold(0.0, f64::max)
    };
    one(a, b).max(one(b, a))
}
