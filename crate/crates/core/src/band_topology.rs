//! PBC band loops along one momentum axis, per-band windings and the
//! TRS-dagger invariant ν.
//!
//! Band identity is decided on the slightly shifted contour `μ − κ e_axis`,
//! where exceptional points on the real contour are split, and the loop
//! samples are then taken on the unshifted contour in that branch order.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::amoeba::{winding_number, Winding, ILL_TOL};
use crate::error::{Error, Result};
use crate::lattice_model::{generalized_bloch, ComplexMomentum, Lattice, TightBindingModel};
use crate::linalg;
use crate::symmetry::{find_intertwiner, SymmetryKind};

pub const MIN_TRACK_GRID: usize = 256;
pub const CONTOUR_SHIFT: f64 = 1e-3;
pub const PAIR_TOL: f64 = 1e-6;
const MAX_DEPTH: usize = 24;
const PERTURB_ANGLES: [f64; 4] = [0.7, 2.3, 3.9, 5.5];

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BandLoop {
    /// `c·N + 1` samples; the last repeats the first.
    pub samples: Vec<Complex64>,
    pub multiplicity: usize,
    pub axis: usize,
    pub transverse: Vec<f64>,
    /// Band indices at `k = 0`, in the order the loop visits them.
    pub bands: Vec<usize>,
}

impl BandLoop {
    /// Samples per `2π` cycle.
    pub fn grid(&self) -> usize {
        (self.samples.len() - 1) / self.multiplicity
    }

    fn open(&self) -> &[Complex64] {
        &self.samples[..self.samples.len() - 1]
    }

    pub fn diameter(&self) -> f64 {
        crate::spectral::diameter(self.open())
    }
}

struct Tracker<'a> {
    model: &'a TightBindingModel,
    axis: usize,
    transverse: &'a [f64],
    mu: Vec<f64>,
}

impl Tracker<'_> {
    fn eigs(&self, kx: f64) -> Result<Vec<Complex64>> {
        let mut k = Vec::with_capacity(self.mu.len());
        let mut t = self.transverse.iter();
        for m in 0..self.mu.len() {
            k.push(if m == self.axis { kx } else { *t.next().unwrap() });
        }
        let h = generalized_bloch(self.model, &ComplexMomentum::new(self.mu.clone(), k)?)?;
        linalg::small_eigenvalues(&h)
    }
}

/// `new` reordered to follow `old` by minimal total squared distance.
fn align(old: &[Complex64], new: &[Complex64]) -> Vec<Complex64> {
    let cost: Vec<Vec<f64>> = old.iter().map(|a| new.iter().map(|b| (a - b).norm_sqr()).collect()).collect();
    linalg::assignment(&cost).into_iter().map(|j| new[j]).collect()
}

fn resolved(v0: &[Complex64], v1: &[Complex64], deg: f64) -> bool {
    let s = v0.len();
    let motion: Vec<f64> = (0..s).map(|a| (v1[a] - v0[a]).norm()).collect();
    for a in 0..s {
        for b in a + 1..s {
            let g0 = (v0[a] - v0[b]).norm();
            let g1 = (v1[a] - v1[b]).norm();
            if g0 < deg && g1 < deg {
                continue;
            }
            if g0.min(g1) <= 10.0 * motion[a].max(motion[b]) {
                return false;
            }
        }
    }
    true
}

fn advance(tr: &Tracker, k0: f64, v0: &[Complex64], k1: f64, deg: f64, depth: usize) -> Result<Vec<Complex64>> {
    let v1 = align(v0, &tr.eigs(k1)?);
    if resolved(v0, &v1, deg) {
        return Ok(v1);
    }
    if depth >= MAX_DEPTH {
        return Err(Error::BranchAmbiguity { k: k0 });
    }
    let km = 0.5 * (k0 + k1);
    let vm = advance(tr, k0, v0, km, deg, depth + 1)?;
    advance(tr, km, &vm, k1, deg, depth + 1)
}

fn track_once(
    model: &TightBindingModel,
    axis: usize,
    transverse: &[f64],
    mu: &[f64],
    n: usize,
    kappa: f64,
) -> Result<Vec<BandLoop>> {
    let mut shifted = mu.to_vec();
    shifted[axis] -= kappa;
    let guide = Tracker { model, axis, transverse, mu: shifted };
    let plain = Tracker { model, axis, transverse, mu: mu.to_vec() };
    let h = 2.0 * PI / n as f64;
    let first = guide.eigs(0.0)?;
    let scale = 1.0 + first.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let deg = 1e-9 * scale;
    let mut guided = vec![first];
    for i in 0..n {
        let next = advance(&guide, i as f64 * h, &guided[i], (i + 1) as f64 * h, deg, 0)?;
        guided.push(next);
    }
    let s = model.orbitals();
    // unshifted samples in guided branch order
    let bands: Vec<Vec<Complex64>> = (0..n)
        .into_par_iter()
        .map(|i| Ok(align(&guided[i], &plain.eigs(i as f64 * h)?)))
        .collect::<Result<_>>()?;
    // band a ends the cycle where band next[a] started
    let next = {
        let cost: Vec<Vec<f64>> = guided[n]
            .iter()
            .map(|a| guided[0].iter().map(|b| (a - b).norm_sqr()).collect())
            .collect();
        linalg::assignment(&cost)
    };
    let mut seen = vec![false; s];
    let mut loops = Vec::new();
    for start in 0..s {
        if seen[start] {
            continue;
        }
        let mut order = Vec::new();
        let mut a = start;
        while !seen[a] {
            seen[a] = true;
            order.push(a);
            a = next[a];
        }
        let mut samples = Vec::with_capacity(order.len() * n + 1);
        for &b in &order {
            samples.extend(bands.iter().map(|v| v[b]));
        }
        samples.push(samples[0]);
        loops.push(BandLoop {
            samples,
            multiplicity: order.len(),
            axis,
            transverse: transverse.to_vec(),
            bands: order,
        });
    }
    Ok(loops)
}

/// Band loops of `H(e^{μ+ik})` as `k_axis` runs once around, glued into closed loops.
pub fn track_bands(
    model: &TightBindingModel,
    axis: usize,
    transverse: &[f64],
    mu: &[f64],
    grid: usize,
) -> Result<Vec<BandLoop>> {
    let d = model.dimension();
    if axis >= d {
        return Err(Error::Precondition(format!("axis {axis} out of range for dimension {d}")));
    }
    if transverse.len() + 1 != d || mu.len() != d {
        return Err(Error::DimensionMismatch(format!(
            "expected {} transverse momenta and {d} decay factors",
            d - 1
        )));
    }
    if grid < MIN_TRACK_GRID {
        return Err(Error::Precondition(format!("band tracking grid must be at least {MIN_TRACK_GRID}")));
    }
    match track_once(model, axis, transverse, mu, grid, CONTOUR_SHIFT) {
        Err(Error::BranchAmbiguity { .. }) => track_once(model, axis, transverse, mu, 4 * grid, 4.0 * CONTOUR_SHIFT),
        r => r,
    }
}

fn polygon_winding(pts: &[Complex64], e: Complex64) -> f64 {
    let n = pts.len();
    let mut total = 0.0;
    for i in 0..n {
        total += ((pts[(i + 1) % n] - e) / (pts[i] - e)).arg();
    }
    total / (2.0 * PI)
}

/// Winding of a band loop around `E`.
pub fn band_winding(lp: &BandLoop, energy: Complex64) -> Result<Winding> {
    let pts = lp.open();
    let scale = 1.0 + lp.diameter();
    if pts.iter().any(|z| (z - energy).norm() < ILL_TOL * scale) {
        return Ok(Winding::IllDefined);
    }
    // Probe around E so that a loop retracing itself through E gives a stable answer.
    let eps = 1e-7 * scale;
    let mut value = None;
    for th in PERTURB_ANGLES {
        let raw = polygon_winding(pts, energy + Complex64::from_polar(eps, th));
        let w = raw.round();
        if (raw - w).abs() > 0.05 {
            return Err(Error::NonIntegerPhase { raw, grid: lp.grid() });
        }
        match value {
            None => value = Some(w as i64),
            Some(v) if v != w as i64 => return Ok(Winding::IllDefined),
            _ => {}
        }
    }
    Ok(Winding::Value(value.unwrap()))
}

/// Median of `|q(k) − p(−k)|` over the best cyclic alignment.
pub fn pairing_cost(p: &BandLoop, q: &BandLoop) -> f64 {
    if p.multiplicity != q.multiplicity || p.samples.len() != q.samples.len() {
        return f64::INFINITY;
    }
    let n = p.grid();
    let total = p.samples.len() - 1;
    let (ps, qs) = (p.open(), q.open());
    (0..p.multiplicity)
        .map(|shift| {
            let mut d: Vec<f64> = (0..total)
                .map(|i| (qs[i] - ps[(total - i + shift * n) % total]).norm())
                .collect();
            d.sort_by(f64::total_cmp);
            d[d.len() / 2]
        })
        .fold(f64::INFINITY, f64::min)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Pairing {
    /// `(p, q)`: loop `p` of the slice and its image `q` in the mirrored slice.
    pub pairs: Vec<(usize, usize)>,
    pub costs: Vec<f64>,
}

impl Pairing {
    /// Loops that are their own image (same slice only).
    pub fn self_paired(&self) -> Vec<usize> {
        self.pairs.iter().filter(|(p, q)| p == q).map(|(p, _)| *p).collect()
    }
}

/// Pairs each loop of `loops` with the loop of `images` (the slice at `−k⊥`,
/// or `loops` itself in 1D) that traces its `k ↦ −k` image.
pub fn pair_bands_trs_dagger(loops: &[BandLoop], images: &[BandLoop]) -> Result<Pairing> {
    if loops.len() != images.len() {
        return Err(Error::PairingFailure(format!(
            "{} loops against {} image loops",
            loops.len(),
            images.len()
        )));
    }
    if loops.is_empty() {
        return Ok(Pairing { pairs: vec![], costs: vec![] });
    }
    let cost: Vec<Vec<f64>> = loops
        .iter()
        .map(|p| images.iter().map(|q| pairing_cost(p, q)).collect())
        .collect();
    let finite: Vec<Vec<f64>> = cost.iter().map(|r| r.iter().map(|&c| c.min(1e300)).collect()).collect();
    let assign = linalg::assignment(&finite);
    let diam = loops.iter().chain(images).map(|l| l.diameter()).fold(0.0, f64::max);
    let tol = PAIR_TOL * diam.max(1.0);
    let mut pairs = Vec::new();
    let mut costs = Vec::new();
    for (p, &q) in assign.iter().enumerate() {
        if !(cost[p][q] <= tol) {
            return Err(Error::PairingFailure(format!(
                "loop {p} has no image within {tol:.3e} (best {:.3e})",
                cost[p][q]
            )));
        }
        pairs.push((p, q));
        costs.push(cost[p][q]);
    }
    Ok(Pairing { pairs, costs })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NuReport {
    pub energy: Complex64,
    pub axis: usize,
    pub transverse: Vec<f64>,
    /// Absent when some band winding is ill defined at `E`. In `d > 1` this is
    /// the invariant of the TRS-dagger closed pair of slices `{k⊥, −k⊥}`.
    pub nu: Option<f64>,
    pub per_pair_windings: Vec<(Winding, Winding)>,
    pub pairing: Vec<(usize, usize)>,
    pub multiplicities: Vec<usize>,
}

impl NuReport {
    /// Whether `w^(q) = −w^(p)` holds for every pair with both windings defined.
    pub fn antisymmetric(&self) -> bool {
        self.per_pair_windings.iter().all(|(a, b)| match (a.value(), b.value()) {
            (Some(x), Some(y)) => x == -y,
            _ => true,
        })
    }
}

fn require_trs_dagger(model: &TightBindingModel) -> Result<()> {
    find_intertwiner(SymmetryKind::TrsDagger, model, 1e-8)
        .map(|_| ())
        .map_err(|_| Error::Precondition(format!("model '{}' has no TRS-dagger symmetry", model.name())))
}

fn wrap(k: f64) -> f64 {
    let w = (k + PI).rem_euclid(2.0 * PI) - PI;
    if w >= PI {
        w - 2.0 * PI
    } else {
        w
    }
}

fn mirrored(transverse: &[f64]) -> Vec<f64> {
    transverse.iter().map(|&k| -k).collect()
}

fn same_momenta(a: &[f64], b: &[f64]) -> bool {
    a.iter().zip(b).all(|(x, y)| (wrap(x - y)).abs() < 1e-12)
}

fn nu_unchecked(model: &TightBindingModel, energy: Complex64, axis: usize, transverse: &[f64], grid: usize) -> Result<NuReport> {
    let mu = vec![0.0; model.dimension()];
    let loops = track_bands(model, axis, transverse, &mu, grid)?;
    let mirror = mirrored(transverse);
    let self_mirror = same_momenta(transverse, &mirror);
    let images = if self_mirror {
        loops.clone()
    } else {
        track_bands(model, axis, &mirror, &mu, grid)?
    };
    let pairing = pair_bands_trs_dagger(&loops, &images)?;
    let wl: Vec<Winding> = loops.iter().map(|l| band_winding(l, energy)).collect::<Result<_>>()?;
    let wi: Vec<Winding> = images.iter().map(|l| band_winding(l, energy)).collect::<Result<_>>()?;
    let per_pair: Vec<(Winding, Winding)> = pairing.pairs.iter().map(|&(p, q)| (wl[p], wi[q])).collect();
    let sum: Option<i64> = per_pair
        .iter()
        .map(|(a, b)| Some((a.value()? - b.value()?).abs()))
        .sum();
    // On a self-mirrored slice each pair is seen from both members.
    let norm = if self_mirror { 4.0 } else { 2.0 };
    Ok(NuReport {
        energy,
        axis,
        transverse: transverse.to_vec(),
        nu: sum.map(|q| q as f64 / norm),
        per_pair_windings: per_pair,
        pairing: pairing.pairs,
        multiplicities: loops.iter().map(|l| l.multiplicity).collect(),
    })
}

/// TRS-dagger winding number `ν_axis(E)` at the given transverse momenta.
pub fn nu_invariant(model: &TightBindingModel, energy: Complex64, axis: usize, transverse: &[f64], grid: usize) -> Result<NuReport> {
    require_trs_dagger(model)?;
    nu_unchecked(model, energy, axis, transverse, grid)
}

/// `k = −π + 2π i / points` on every transverse axis.
pub fn transverse_grid(dimension: usize, points: usize) -> Vec<Vec<f64>> {
    let dims = vec![points.max(1); dimension.saturating_sub(1)];
    let lat = Lattice::new(dims.clone());
    (0..lat.sites())
        .map(|i| {
            lat.coords(i)
                .iter()
                .zip(&dims)
                .map(|(&c, &g)| -PI + 2.0 * PI * c as f64 / g as f64)
                .collect()
        })
        .collect()
}

/// `ν_axis(E, k⊥)` over a transverse grid with `points` per axis.
pub fn nu_table(model: &TightBindingModel, energy: Complex64, axis: usize, points: usize, grid: usize) -> Result<Vec<NuReport>> {
    require_trs_dagger(model)?;
    transverse_grid(model.dimension(), points)
        .par_iter()
        .map(|t| nu_unchecked(model, energy, axis, t, grid))
        .collect()
}

/// Checks that the PBC winding along `axis` vanishes (or is ill defined) for a
/// TRS-dagger model. In `d > 1` single slices need not vanish; slices at `±k⊥`
/// must cancel and their total must be zero.
pub fn pbc_winding_vanishes_trs_dagger(
    model: &TightBindingModel,
    energy: Complex64,
    axis: usize,
    points: usize,
    grid: usize,
) -> Result<bool> {
    require_trs_dagger(model)?;
    let mu = vec![0.0; model.dimension()];
    let ks = transverse_grid(model.dimension(), points);
    let ws: Vec<Winding> = ks
        .par_iter()
        .map(|t| winding_number(model, energy, &mu, axis, t, grid).map(|r| r.value))
        .collect::<Result<_>>()?;
    if ws.iter().any(|w| !w.is_defined()) {
        return Ok(true);
    }
    let total: i64 = ws.iter().filter_map(|w| w.value()).sum();
    if total != 0 {
        return Ok(false);
    }
    for (i, t) in ks.iter().enumerate() {
        let m = mirrored(t);
        if let Some(j) = ks.iter().position(|u| same_momenta(u, &m)) {
            if ws[i].value().unwrap() != -ws[j].value().unwrap() {
                return Ok(false);
            }
        }
    }
    Ok(true)
}
