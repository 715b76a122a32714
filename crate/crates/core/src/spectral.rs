//! PBC/OBC spectra, density profiles and decay-factor fits.

use faer::Mat;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lattice_model::{bloch_hamiltonian, obc_entries, Lattice, TightBindingModel};
use crate::linalg::{self, CMat};

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Boundary {
    Pbc { grid: Vec<usize> },
    Obc { sizes: Vec<usize> },
}

#[derive(Clone, Debug)]
pub struct SpectralResult {
    pub boundary: Boundary,
    pub orbitals: usize,
    pub eigenvalues: Vec<Complex64>,
    /// Unit-norm columns aligned with `eigenvalues` (OBC only).
    pub eigenvectors: Option<CMat>,
    /// Momentum of each eigenvalue (PBC only).
    pub momenta: Vec<Vec<f64>>,
}

impl SpectralResult {
    pub fn sizes(&self) -> Option<&[usize]> {
        match &self.boundary {
            Boundary::Obc { sizes } => Some(sizes),
            Boundary::Pbc { .. } => None,
        }
    }

    pub fn spectral_radius(&self) -> f64 {
        self.eigenvalues.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn diameter(&self) -> f64 {
        diameter(&self.eigenvalues)
    }

    pub fn nearest(&self, e: Complex64) -> Option<(usize, f64)> {
        nearest(&self.eigenvalues, e)
    }
}

pub fn nearest(values: &[Complex64], e: Complex64) -> Option<(usize, f64)> {
    values
        .iter()
        .enumerate()
        .map(|(i, z)| (i, (z - e).norm()))
        .min_by(|a, b| a.1.total_cmp(&b.1))
}

/// Largest pairwise distance, via the convex hull.
pub fn diameter(values: &[Complex64]) -> f64 {
    let h = convex_hull(values);
    let mut d: f64 = 0.0;
    for i in 0..h.len() {
        for j in i + 1..h.len() {
            d = d.max((values[h[i]] - values[h[j]]).norm());
        }
    }
    d
}

/// Indices of the convex-hull vertices (monotone chain, counterclockwise).
pub fn convex_hull(values: &[Complex64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| {
        values[a]
            .re
            .total_cmp(&values[b].re)
            .then(values[a].im.total_cmp(&values[b].im))
    });
    idx.dedup_by(|a, b| values[*a] == values[*b]);
    if idx.len() < 3 {
        return idx;
    }
    let cross = |o: Complex64, a: Complex64, b: Complex64| (a - o).re * (b - o).im - (a - o).im * (b - o).re;
    let mut hull: Vec<usize> = Vec::with_capacity(2 * idx.len());
    for &i in &idx {
        while hull.len() >= 2 && cross(values[hull[hull.len() - 2]], values[hull[hull.len() - 1]], values[i]) <= 0.0 {
            hull.pop();
        }
        hull.push(i);
    }
    let lower = hull.len() + 1;
    for &i in idx.iter().rev().skip(1) {
        while hull.len() >= lower && cross(values[hull[hull.len() - 2]], values[hull[hull.len() - 1]], values[i]) <= 0.0 {
            hull.pop();
        }
        hull.push(i);
    }
    hull.pop();
    hull
}

/// Eigenvalues sorted by (re, im).
pub fn sorted_small_eigenvalues(h: &CMat) -> Result<Vec<Complex64>> {
    let mut v = linalg::small_eigenvalues(h)?;
    sort_complex(&mut v);
    Ok(v)
}

pub fn sort_complex(v: &mut [Complex64]) {
    v.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
}

fn grid_points(grid: &[usize]) -> Vec<Vec<f64>> {
    let total: usize = grid.iter().product();
    let lat = Lattice::new(grid.to_vec());
    (0..total)
        .map(|i| {
            lat.coords(i)
                .iter()
                .zip(grid)
                .map(|(&n, &g)| 2.0 * std::f64::consts::PI * n as f64 / g as f64)
                .collect()
        })
        .collect()
}

/// Eigenvalues of `H(k)` on the grid `k_m = 2π n_m / N_m`.
pub fn pbc_spectrum(model: &TightBindingModel, grid: &[usize]) -> Result<SpectralResult> {
    if grid.len() != model.dimension() {
        return Err(Error::DimensionMismatch(format!(
            "grid has {} axes, model dimension is {}",
            grid.len(),
            model.dimension()
        )));
    }
    if grid.iter().any(|&g| g == 0) {
        return Err(Error::Precondition("grid counts must be at least 1".into()));
    }
    let ks = grid_points(grid);
    let per_k: Vec<Vec<Complex64>> = ks
        .par_iter()
        .map(|k| {
            let h = bloch_hamiltonian(model, k)?;
            linalg::small_eigenvalues(&h).map_err(|e| Error::Solver(format!("{e} at k = {k:?}")))
        })
        .collect::<Result<_>>()?;
    let mut eigenvalues = Vec::new();
    let mut momenta = Vec::new();
    for (k, vals) in ks.into_iter().zip(per_k) {
        for v in vals {
            eigenvalues.push(v);
            momenta.push(k.clone());
        }
    }
    Ok(SpectralResult {
        boundary: Boundary::Pbc { grid: grid.to_vec() },
        orbitals: model.orbitals(),
        eigenvalues,
        eigenvectors: None,
        momenta,
    })
}

fn obc(model: &TightBindingModel, sizes: &[usize], vectors: bool) -> Result<SpectralResult> {
    let (n, entries) = obc_entries(model, sizes)?;
    let e = linalg::eig_entries(n, &entries, vectors)?;
    Ok(SpectralResult {
        boundary: Boundary::Obc { sizes: sizes.to_vec() },
        orbitals: model.orbitals(),
        eigenvalues: e.values,
        eigenvectors: e.vectors,
        momenta: vec![],
    })
}

/// Full OBC eigendecomposition.
pub fn obc_spectrum(model: &TightBindingModel, sizes: &[usize]) -> Result<SpectralResult> {
    obc(model, sizes, true)
}

/// OBC eigenvalues without eigenvectors.
pub fn obc_eigenvalues(model: &TightBindingModel, sizes: &[usize]) -> Result<SpectralResult> {
    obc(model, sizes, false)
}

/// Which eigenvector to take a profile of.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Selector {
    Index(usize),
    Nearest(Complex64),
    /// The eigenvalue within `tol` of `energy`; ambiguous if several distinct ones qualify.
    Within { energy: Complex64, tol: f64 },
}

impl SpectralResult {
    pub fn select(&self, which: Selector) -> Result<usize> {
        match which {
            Selector::Index(i) => {
                if i < self.eigenvalues.len() {
                    Ok(i)
                } else {
                    Err(Error::IndexOutOfRange(i))
                }
            }
            Selector::Nearest(e) => self.nearest(e).map(|(i, _)| i).ok_or(Error::IndexOutOfRange(0)),
            Selector::Within { energy, tol } => {
                let hits: Vec<usize> = (0..self.eigenvalues.len())
                    .filter(|&i| (self.eigenvalues[i] - energy).norm() <= tol)
                    .collect();
                let Some(best) = hits
                    .iter()
                    .copied()
                    .min_by(|&a, &b| (self.eigenvalues[a] - energy).norm().total_cmp(&(self.eigenvalues[b] - energy).norm()))
                else {
                    return Err(Error::AmbiguousSelector { energy, tol, count: 0 });
                };
                let dtol = degeneracy_tol(self);
                let distinct = hits
                    .iter()
                    .any(|&i| (self.eigenvalues[i] - self.eigenvalues[best]).norm() > dtol);
                if distinct {
                    return Err(Error::AmbiguousSelector { energy, tol, count: hits.len() });
                }
                Ok(best)
            }
        }
    }

    pub fn vector(&self, index: usize) -> Result<Vec<Complex64>> {
        let v = self.eigenvectors.as_ref().ok_or(Error::MissingEigenvectors)?;
        if index >= v.ncols() {
            return Err(Error::IndexOutOfRange(index));
        }
        Ok((0..v.nrows()).map(|r| v[(r, index)]).collect())
    }
}

/// Grouping tolerance for degenerate eigenvalues: 1e-6 · spectral radius.
pub fn degeneracy_tol(result: &SpectralResult) -> f64 {
    1e-6 * result.spectral_radius().max(1e-300)
}

/// Probability per lattice site, row-major over the lattice.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DensityProfile {
    pub sizes: Vec<usize>,
    pub values: Vec<f64>,
}

impl DensityProfile {
    pub fn from_vector(sizes: &[usize], orbitals: usize, psi: &[Complex64]) -> Result<Self> {
        let sites: usize = sizes.iter().product();
        if psi.len() != sites * orbitals {
            return Err(Error::DimensionMismatch(format!(
                "vector has {} entries, lattice needs {}",
                psi.len(),
                sites * orbitals
            )));
        }
        let mut values: Vec<f64> = psi
            .chunks(orbitals)
            .map(|c| c.iter().map(|z| z.norm_sqr()).sum())
            .collect();
        let total: f64 = values.iter().sum();
        if !(total > 0.0) {
            return Err(Error::DegenerateFit("zero vector".into()));
        }
        for v in &mut values {
            *v /= total;
        }
        Ok(DensityProfile { sizes: sizes.to_vec(), values })
    }

    /// Marginal distribution along one axis.
    pub fn marginal(&self, axis: usize) -> Vec<f64> {
        let lat = Lattice::new(self.sizes.clone());
        let mut out = vec![0.0; self.sizes[axis]];
        for (i, &p) in self.values.iter().enumerate() {
            out[lat.coords(i)[axis]] += p;
        }
        out
    }

    /// The same profile mirrored along one axis.
    pub fn reversed(&self, axis: usize) -> DensityProfile {
        let lat = Lattice::new(self.sizes.clone());
        let mut values = vec![0.0; self.values.len()];
        for (i, &p) in self.values.iter().enumerate() {
            let mut c = lat.coords(i);
            c[axis] = self.sizes[axis] - 1 - c[axis];
            values[lat.index(&c)] = p;
        }
        DensityProfile { sizes: self.sizes.clone(), values }
    }
}

pub fn density_profile(result: &SpectralResult, which: Selector) -> Result<DensityProfile> {
    let sizes = result
        .sizes()
        .ok_or_else(|| Error::Precondition("density profiles need an OBC result".into()))?;
    let i = result.select(which)?;
    DensityProfile::from_vector(sizes, result.orbitals, &result.vector(i)?)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum LocalizationClass {
    Extended,
    /// Corner or edge mode; sign of μ per axis (0 where not localized).
    Directional { signs: Vec<i8> },
    Bidirectional { axes: Vec<usize> },
    DegenerateSubspace { dim: usize },
    Unknown,
}

impl LocalizationClass {
    pub fn label(&self) -> String {
        match self {
            LocalizationClass::Extended => "extended".into(),
            LocalizationClass::Directional { signs } => format!(
                "directional({})",
                signs.iter().map(|s| match s { 1 => "+", -1 => "-", _ => "0" }).collect::<Vec<_>>().join(",")
            ),
            LocalizationClass::Bidirectional { axes } => {
                format!("bidirectional({})", axes.iter().map(|a| a.to_string()).collect::<Vec<_>>().join(","))
            }
            LocalizationClass::DegenerateSubspace { dim } => format!("degenerate({dim})"),
            LocalizationClass::Unknown => "unknown".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LocalizationReport {
    pub mu_fit: Vec<f64>,
    pub mu_stderr: Vec<f64>,
    pub class: LocalizationClass,
    /// Mass in the first and last 10% of sites, per axis.
    pub boundary_mass: Vec<(f64, f64)>,
    /// Slopes of ln p over the left and right halves, per axis.
    pub half_slopes: Vec<(f64, f64)>,
}

/// Classifier thresholds; slopes are of ln p per site.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LocalizationThresholds {
    pub mu_tol: f64,
    pub extended_mass: f64,
    pub bidirectional_slope: f64,
    pub bidirectional_mass: f64,
}

impl Default for LocalizationThresholds {
    fn default() -> Self {
        LocalizationThresholds {
            mu_tol: 0.02,
            extended_mass: 0.25,
            bidirectional_slope: 0.05,
            bidirectional_mass: 0.15,
        }
    }
}

/// Least-squares slope and its standard error of `y` against `x`.
fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let b = sxy / sxx;
    let a = my - b * mx;
    let rss: f64 = xs.iter().zip(ys).map(|(x, y)| (y - a - b * x).powi(2)).sum();
    let se = if xs.len() > 2 { (rss / (n - 2.0) / sxx).sqrt() } else { 0.0 };
    (b, se)
}

fn log_slope(p: &[f64], lo: usize, hi: usize) -> Result<(f64, f64)> {
    let xs: Vec<f64> = (lo..=hi).map(|x| x as f64).collect();
    let mut ys = Vec::with_capacity(xs.len());
    for &v in &p[lo..=hi] {
        if !(v > 0.0) {
            return Err(Error::DegenerateFit("marginal vanishes inside the fit window".into()));
        }
        ys.push(v.ln());
    }
    Ok(linear_fit(&xs, &ys))
}

/// Fit per-axis decay factors (density ∝ e^{2μx}) and classify the profile.
pub fn fit_decay_factor(profile: &DensityProfile, thresholds: &LocalizationThresholds) -> Result<LocalizationReport> {
    let d = profile.sizes.len();
    let mut mu_fit = Vec::with_capacity(d);
    let mut mu_stderr = Vec::with_capacity(d);
    let mut boundary_mass = Vec::with_capacity(d);
    let mut half_slopes = Vec::with_capacity(d);
    for axis in 0..d {
        let l = profile.sizes[axis];
        if l < 8 {
            return Err(Error::DegenerateFit(format!("axis {axis} has only {l} sites")));
        }
        let p = profile.marginal(axis);
        // window symmetric under x → L−1−x
        let lo = (0.2 * (l - 1) as f64).ceil() as usize;
        let hi = l - 1 - lo;
        let (slope, se) = log_slope(&p, lo, hi)?;
        mu_fit.push(slope / 2.0);
        mu_stderr.push(se / 2.0);
        let nb = ((0.1 * l as f64).round() as usize).max(1);
        let first: f64 = p[..nb].iter().sum();
        let last: f64 = p[l - nb..].iter().sum();
        boundary_mass.push((first, last));
        let half = l / 2;
        let (left, _) = log_slope(&p, nb, half - 1)?;
        let (right, _) = log_slope(&p, l - half, l - 1 - nb)?;
        half_slopes.push((left, right));
    }
    let t = thresholds;
    let bidir: Vec<usize> = (0..d)
        .filter(|&m| {
            half_slopes[m].0 <= -t.bidirectional_slope
                && half_slopes[m].1 >= t.bidirectional_slope
                && boundary_mass[m].0 > t.bidirectional_mass
                && boundary_mass[m].1 > t.bidirectional_mass
        })
        .collect();
    let class = if !bidir.is_empty() {
        LocalizationClass::Bidirectional { axes: bidir }
    } else if mu_fit.iter().all(|m| m.abs() < t.mu_tol)
        && boundary_mass.iter().all(|&(a, b)| a < t.extended_mass && b < t.extended_mass)
    {
        LocalizationClass::Extended
    } else {
        let signs: Vec<i8> = (0..d)
            .map(|m| {
                if mu_fit[m].abs() >= t.mu_tol {
                    mu_fit[m].signum() as i8
                } else {
                    let (a, b) = boundary_mass[m];
                    if a.max(b) >= t.extended_mass && (a - b).abs() > 0.5 * a.max(b) {
                        (b - a).signum() as i8
                    } else {
                        0
                    }
                }
            })
            .collect();
        if signs.iter().all(|&s| s == 0) {
            LocalizationClass::Unknown
        } else {
            LocalizationClass::Directional { signs }
        }
    };
    Ok(LocalizationReport { mu_fit, mu_stderr, class, boundary_mass, half_slopes })
}

/// Localization of every eigenvector of an OBC result.
pub fn localize_all(result: &SpectralResult, thresholds: &LocalizationThresholds) -> Result<Vec<Result<LocalizationReport>>> {
    let sizes = result
        .sizes()
        .ok_or_else(|| Error::Precondition("localization needs an OBC result".into()))?
        .to_vec();
    let v = result.eigenvectors.as_ref().ok_or(Error::MissingEigenvectors)?;
    Ok((0..v.ncols())
        .into_par_iter()
        .map(|c| {
            let psi: Vec<Complex64> = (0..v.nrows()).map(|r| v[(r, c)]).collect();
            let p = DensityProfile::from_vector(&sizes, result.orbitals, &psi)?;
            fit_decay_factor(&p, thresholds)
        })
        .collect())
}

/// Indices of eigenvalues within `tol` of `energy`.
pub fn indices_within(result: &SpectralResult, energy: Complex64, tol: f64) -> Vec<usize> {
    (0..result.eigenvalues.len())
        .filter(|&i| (result.eigenvalues[i] - energy).norm() <= tol)
        .collect()
}

/// Split a degenerate eigenspace by diagonalizing the position operator
/// restricted to it, and localize each resulting basis vector.
pub fn degenerate_group_localize(
    result: &SpectralResult,
    energy: Complex64,
    tol: f64,
    thresholds: &LocalizationThresholds,
) -> Result<Vec<LocalizationReport>> {
    let sizes = result
        .sizes()
        .ok_or_else(|| Error::Precondition("degenerate localization needs an OBC result".into()))?
        .to_vec();
    let idx = indices_within(result, energy, tol);
    if idx.len() < 2 {
        return Err(Error::NotDegenerate { energy, tol });
    }
    let v = result.eigenvectors.as_ref().ok_or(Error::MissingEigenvectors)?;
    let n = v.nrows();
    let basis = Mat::from_fn(n, idx.len(), |r, c| v[(r, idx[c])]);
    let q = orthonormal_columns(&basis);
    let g = q.ncols();
    let lat = Lattice::new(sizes.clone());
    let s = result.orbitals;
    let mut best: Option<(f64, CMat)> = None;
    for axis in 0..sizes.len() {
        let xpos: Vec<f64> = (0..n).map(|r| lat.coords(r / s)[axis] as f64).collect();
        let x = Mat::from_fn(g, g, |a, b| {
            (0..n).map(|r| q[(r, a)].conj() * xpos[r] * q[(r, b)]).sum::<Complex64>()
        });
        let herm = Mat::from_fn(g, g, |a, b| (x[(a, b)] + x[(b, a)].conj()) * 0.5);
        let e = herm
            .self_adjoint_eigen(faer::Side::Lower)
            .map_err(|e| Error::Solver(format!("{e:?}")))?;
        let vals: Vec<f64> = e.S().column_vector().iter().map(|z| z.re).collect();
        let spread = vals.iter().cloned().fold(f64::MIN, f64::max) - vals.iter().cloned().fold(f64::MAX, f64::min);
        if best.as_ref().map_or(true, |(sp, _)| spread > *sp) {
            best = Some((spread, &q * e.U()));
        }
    }
    let (_, vecs) = best.expect("at least one axis");
    (0..g)
        .map(|c| {
            let psi: Vec<Complex64> = (0..n).map(|r| vecs[(r, c)]).collect();
            let p = DensityProfile::from_vector(&sizes, s, &psi)?;
            fit_decay_factor(&p, thresholds)
        })
        .collect()
}

/// Orthonormal basis for the column span (modified Gram-Schmidt, twice).
pub fn orthonormal_columns(a: &CMat) -> CMat {
    let n = a.nrows();
    let mut cols: Vec<Vec<Complex64>> = Vec::new();
    for c in 0..a.ncols() {
        let mut v: Vec<Complex64> = (0..n).map(|r| a[(r, c)]).collect();
        let norm0: f64 = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        for _ in 0..2 {
            for q in &cols {
                let proj: Complex64 = q.iter().zip(&v).map(|(x, y)| x.conj() * y).sum();
                for (vi, qi) in v.iter_mut().zip(q) {
                    *vi -= proj * qi;
                }
            }
        }
        let norm: f64 = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm > 1e-8 * norm0 {
            cols.push(v.into_iter().map(|z| z / norm).collect());
        }
    }
    Mat::from_fn(n, cols.len(), |r, c| cols[c][r])
}

/// Group eigenvalue indices into clusters closer than `tol` (single linkage).
pub fn degenerate_groups(values: &[Complex64], tol: f64) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].re.total_cmp(&values[b].re));
    let mut parent: Vec<usize> = (0..values.len()).collect();
    fn find(p: &mut Vec<usize>, i: usize) -> usize {
        let mut r = i;
        while p[r] != r {
            r = p[r];
        }
        let mut j = i;
        while p[j] != r {
            let next = p[j];
            p[j] = r;
            j = next;
        }
        r
    }
    for (a_pos, &a) in order.iter().enumerate() {
        for &b in &order[a_pos + 1..] {
            if values[b].re - values[a].re > tol {
                break;
            }
            if (values[a] - values[b]).norm() <= tol {
                let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
                if ra != rb {
                    parent[ra.max(rb)] = ra.min(rb);
                }
            }
        }
    }
    let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for i in 0..values.len() {
        let r = find(&mut parent, i);
        groups.entry(r).or_default().push(i);
    }
    groups.into_values().collect()
}

/// Eigenvalues within `frac · diameter` of a convex-hull vertex.
pub fn near_extremal(values: &[Complex64], frac: f64) -> Vec<bool> {
    // Extremal points are the levels with extreme real or imaginary part.
    // Hull vertices would not do: on a convex spectrum every level is one.
    if values.is_empty() {
        return vec![];
    }
    let bounds = |f: fn(&Complex64) -> f64| {
        values.iter().map(f).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(x), hi.max(x)))
    };
    let (re, im) = (bounds(|z| z.re), bounds(|z| z.im));
    let ext: Vec<Complex64> = values
        .iter()
        .filter(|z| z.re == re.0 || z.re == re.1 || z.im == im.0 || z.im == im.1)
        .copied()
        .collect();
    let tol = frac * diameter(values);
    values.iter().map(|z| ext.iter().any(|h| (h - z).norm() <= tol)).collect()
}
