//! Winding numbers of `det[E − H(e^{μ+ik})]`, the Ronkin function and its
//! minimization.

use std::f64::consts::PI;

use faer::Mat;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::lattice_model::{Lattice, TightBindingModel};
use crate::linalg::{self, CMat};

/// A loop is ill defined when `min|det| < ILL_TOL · median|det|`.
pub const ILL_TOL: f64 = 1e-6;
/// Ronkin nodes with `|det|` below this are dropped from the average.
pub const SINGULAR_ABS: f64 = 1e-14;
pub const MIN_GRID: usize = 64;
pub const MAX_GRID: usize = 16384;
pub const MU_MAX: f64 = 5.0;
const STEP_DEPTH: u32 = 40;
const STALL_WINDOW: usize = 25;
const STALL_MOVE: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Winding {
    Value(i64),
    IllDefined,
}

impl Winding {
    pub fn value(self) -> Option<i64> {
        match self {
            Winding::Value(w) => Some(w),
            Winding::IllDefined => None,
        }
    }

    pub fn is_defined(self) -> bool {
        matches!(self, Winding::Value(_))
    }
}

impl Serialize for Winding {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Winding::Value(w) => s.serialize_i64(*w),
            Winding::IllDefined => s.serialize_str("ill_defined"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct WindingReport {
    pub value: Winding,
    pub min_abs_det: f64,
    #[serde(skip)]
    pub median_abs_det: f64,
    /// Accumulated phase over 2π, before rounding.
    #[serde(skip)]
    pub raw: f64,
    #[serde(rename = "grid")]
    pub k_points: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RonkinEvaluation {
    pub value: f64,
    pub energy: Complex64,
    pub mu: Vec<f64>,
    pub grid: Vec<usize>,
    pub gradient: Option<Vec<f64>>,
    pub excluded: usize,
}

fn e_minus_h(model: &TightBindingModel, energy: Complex64, mu: &[f64], k: &[f64]) -> Result<(CMat, Vec<CMat>)> {
    let (h, dh) = model.bloch_with_mu_derivatives(mu, k)?;
    let s = model.orbitals();
    let a = Mat::from_fn(s, s, |i, j| if i == j { energy - h[(i, j)] } else { -h[(i, j)] });
    Ok((a, dh))
}

/// `det[E − H(e^{μ+ik})]`.
pub fn eval_det(model: &TightBindingModel, energy: Complex64, mu: &[f64], k: &[f64]) -> Result<Complex64> {
    let (a, _) = e_minus_h(model, energy, mu, k)?;
    Ok(linalg::det(&a))
}

fn check_mu(model: &TightBindingModel, mu: &[f64]) -> Result<()> {
    if mu.len() != model.dimension() {
        return Err(Error::DimensionMismatch(format!(
            "mu has {} components, model dimension is {}",
            mu.len(),
            model.dimension()
        )));
    }
    if mu.iter().any(|x| !x.is_finite()) {
        return Err(Error::Precondition("mu must be finite".into()));
    }
    Ok(())
}

struct LoopDet<'a> {
    model: &'a TightBindingModel,
    energy: Complex64,
    mu: &'a [f64],
    axis: usize,
    transverse: &'a [f64],
}

impl LoopDet<'_> {
    fn at(&self, kx: f64) -> Complex64 {
        let mut k = Vec::with_capacity(self.mu.len());
        let mut t = self.transverse.iter();
        for m in 0..self.mu.len() {
            k.push(if m == self.axis { kx } else { *t.next().unwrap() });
        }
        eval_det(self.model, self.energy, self.mu, &k).unwrap_or(Complex64::new(f64::NAN, f64::NAN))
    }

    /// Phase change of the determinant from `a` to `b`, bisecting wherever a
    /// single step turns by π/2 or more.
    fn phase_step(&self, a: f64, b: f64, za: Complex64, zb: Complex64, depth: u32) -> Option<f64> {
        let s = (zb / za).arg();
        if s.abs() < 0.5 * PI {
            return Some(s);
        }
        if depth == 0 {
            return None;
        }
        let m = 0.5 * (a + b);
        let zm = self.at(m);
        if !(zm.norm() > 0.0) {
            return None;
        }
        Some(self.phase_step(a, m, za, zm, depth - 1)? + self.phase_step(m, b, zm, zb, depth - 1)?)
    }

    /// Golden-section search for the smallest `|det|` on `[a, b]`.
    fn refine_min(&self, mut a: f64, mut b: f64) -> f64 {
        let g = 0.5 * (5f64.sqrt() - 1.0);
        let mut c = b - g * (b - a);
        let mut d = a + g * (b - a);
        let mut fc = self.at(c).norm();
        let mut fd = self.at(d).norm();
        for _ in 0..80 {
            if fc < fd {
                b = d;
                d = c;
                fd = fc;
                c = b - g * (b - a);
                fc = self.at(c).norm();
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + g * (b - a);
                fd = self.at(d).norm();
            }
        }
        fc.min(fd)
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Winding of `det[E − H(e^{μ+ik})]` as `k_axis` runs over `[0, 2π)` with the
/// other momenta fixed to `transverse`.
pub fn winding_number(
    model: &TightBindingModel,
    energy: Complex64,
    mu: &[f64],
    axis: usize,
    transverse: &[f64],
    grid: usize,
) -> Result<WindingReport> {
    check_mu(model, mu)?;
    let d = model.dimension();
    if axis >= d {
        return Err(Error::Precondition(format!("axis {axis} out of range for dimension {d}")));
    }
    if transverse.len() + 1 != d {
        return Err(Error::DimensionMismatch(format!(
            "transverse has {} components, expected {}",
            transverse.len(),
            d - 1
        )));
    }
    if grid < MIN_GRID {
        return Err(Error::Precondition(format!("winding grid must be at least {MIN_GRID}")));
    }
    if !energy.re.is_finite() || !energy.im.is_finite() {
        return Err(Error::Precondition("energy must be finite".into()));
    }
    let f = LoopDet { model, energy, mu, axis, transverse };
    let mut n = grid;
    loop {
        let h = 2.0 * PI / n as f64;
        let dets: Vec<Complex64> = (0..n).map(|i| f.at(i as f64 * h)).collect();
        let abs: Vec<f64> = dets.iter().map(|z| z.norm()).collect();
        let med = median(abs.clone());
        let (imin, smin) = abs
            .iter()
            .copied()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        let mut min_abs = smin;
        if med > 0.0 && smin >= ILL_TOL * med {
            let c = imin as f64 * h;
            min_abs = min_abs.min(f.refine_min(c - h, c + h));
        }
        let mut total = Some(0.0);
        for i in 0..n {
            let a = i as f64 * h;
            total = total.and_then(|t| Some(t + f.phase_step(a, a + h, dets[i], dets[(i + 1) % n], STEP_DEPTH)?));
        }
        let raw = total.unwrap_or(f64::NAN) / (2.0 * PI);
        if !(med > 0.0) || min_abs < ILL_TOL * med || (total.is_some() && !raw.is_finite()) {
            return Ok(WindingReport {
                value: Winding::IllDefined,
                min_abs_det: min_abs,
                median_abs_det: med,
                raw,
                k_points: n,
            });
        }
        let rounded = raw.round();
        let resolved = raw.is_finite() && (raw - rounded).abs() <= 0.05;
        if resolved {
            return Ok(WindingReport {
                value: Winding::Value(rounded as i64),
                min_abs_det: min_abs,
                median_abs_det: med,
                raw,
                k_points: n,
            });
        }
        if n >= MAX_GRID {
            return Err(Error::NonIntegerPhase { raw, grid: n });
        }
        n *= 2;
    }
}

/// Windings along `axis` at `count` evenly spaced values of each transverse momentum.
pub fn winding_slices(
    model: &TightBindingModel,
    energy: Complex64,
    mu: &[f64],
    axis: usize,
    count: usize,
    grid: usize,
) -> Result<Vec<(Vec<f64>, WindingReport)>> {
    let d = model.dimension();
    let tgrid = vec![count.max(1); d.saturating_sub(1)];
    let lat = Lattice::new(tgrid.clone());
    (0..lat.sites())
        .into_par_iter()
        .map(|i| {
            let t: Vec<f64> = lat
                .coords(i)
                .iter()
                .zip(&tgrid)
                .map(|(&c, &g)| 2.0 * PI * c as f64 / g as f64)
                .collect();
            let w = winding_number(model, energy, mu, axis, &t, grid)?;
            Ok((t, w))
        })
        .collect()
}

fn check_grid(model: &TightBindingModel, grid: &[usize]) -> Result<()> {
    if grid.len() != model.dimension() {
        return Err(Error::DimensionMismatch(format!(
            "grid has {} axes, model dimension is {}",
            grid.len(),
            model.dimension()
        )));
    }
    if grid.iter().any(|&g| g < MIN_GRID) {
        return Err(Error::Precondition(format!("Ronkin grid must be at least {MIN_GRID} per axis")));
    }
    Ok(())
}

fn ronkin(model: &TightBindingModel, energy: Complex64, mu: &[f64], grid: &[usize], gradient: bool) -> Result<RonkinEvaluation> {
    check_mu(model, mu)?;
    check_grid(model, grid)?;
    let d = model.dimension();
    let lat = Lattice::new(grid.to_vec());
    let total = lat.sites();
    // (sum ln|det|, gradient sums, kept, excluded)
    let (sum, gsum, kept, excluded) = (0..total)
        .into_par_iter()
        .map(|i| -> Result<(f64, Vec<f64>, usize, usize)> {
            let k: Vec<f64> = lat
                .coords(i)
                .iter()
                .zip(grid)
                .map(|(&c, &g)| 2.0 * PI * c as f64 / g as f64)
                .collect();
            let (a, dh) = e_minus_h(model, energy, mu, &k)?;
            let det = linalg::det(&a);
            let ad = det.norm();
            if !(ad >= SINGULAR_ABS) {
                return Ok((0.0, vec![0.0; d], 0, 1));
            }
            let g = if gradient {
                // ∂ ln|det(E − H)| / ∂μ = Re tr[(E − H)⁻¹ (−∂H)]
                dh.iter().map(|b| -linalg::trace_solve(&a, b).re).collect()
            } else {
                vec![0.0; d]
            };
            Ok((ad.ln(), g, 1, 0))
        })
        .try_reduce(
            || (0.0, vec![0.0; d], 0, 0),
            |a, b| Ok((a.0 + b.0, a.1.iter().zip(&b.1).map(|(x, y)| x + y).collect(), a.2 + b.2, a.3 + b.3)),
        )?;
    if excluded * 100 > total {
        return Err(Error::TooSingular { excluded, total });
    }
    let kf = kept as f64;
    Ok(RonkinEvaluation {
        value: sum / kf,
        energy,
        mu: mu.to_vec(),
        grid: grid.to_vec(),
        gradient: gradient.then(|| gsum.iter().map(|g| g / kf).collect()),
        excluded,
    })
}

/// Torus average of `ln|det[E − H(e^{μ+ik})]|`.
pub fn ronkin_value(model: &TightBindingModel, energy: Complex64, mu: &[f64], grid: &[usize]) -> Result<RonkinEvaluation> {
    ronkin(model, energy, mu, grid, false)
}

/// Value and gradient in one pass.
pub fn ronkin_evaluate(model: &TightBindingModel, energy: Complex64, mu: &[f64], grid: &[usize]) -> Result<RonkinEvaluation> {
    ronkin(model, energy, mu, grid, true)
}

/// `∂R/∂μ`, which is the transverse average of the raw winding along each axis.
pub fn ronkin_gradient(model: &TightBindingModel, energy: Complex64, mu: &[f64], grid: &[usize]) -> Result<Vec<f64>> {
    Ok(ronkin(model, energy, mu, grid, true)?.gradient.unwrap())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AmoebaVerdict {
    /// μ* sits in a hole of the amoeba: every winding is defined and zero.
    Interior,
    BoundaryOfAmoeba,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RonkinMinimum {
    pub mu_star: Vec<f64>,
    pub verdict: AmoebaVerdict,
    pub value: f64,
    pub gradient: Vec<f64>,
    pub iterations: usize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MinimizeOptions {
    pub gtol: f64,
    pub max_iterations: usize,
    pub initial_step: f64,
    pub shrink: f64,
    pub mu_max: f64,
    /// Transverse samples per axis for the hole test.
    pub slices: usize,
}

impl Default for MinimizeOptions {
    fn default() -> Self {
        MinimizeOptions { gtol: 1e-4, max_iterations: 500, initial_step: 0.5, shrink: 0.5, mu_max: MU_MAX, slices: 8 }
    }
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |a, x| a.max(x.abs()))
}

/// Is `μ` inside a hole, i.e. every sampled winding defined and zero?
pub fn in_hole(model: &TightBindingModel, energy: Complex64, mu: &[f64], grid: &[usize], slices: usize) -> Result<bool> {
    for axis in 0..model.dimension() {
        let n = grid[axis].max(MIN_GRID);
        for (_, w) in winding_slices(model, energy, mu, axis, slices, n)? {
            if w.value != Winding::Value(0) {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Backtracking gradient descent on `μ ↦ R(E, H, μ)`.
pub fn ronkin_minimize(
    model: &TightBindingModel,
    energy: Complex64,
    mu_init: &[f64],
    grid: &[usize],
    gtol: f64,
) -> Result<RonkinMinimum> {
    ronkin_minimize_with(model, energy, mu_init, grid, &MinimizeOptions { gtol, ..Default::default() })
}

pub fn ronkin_minimize_with(
    model: &TightBindingModel,
    energy: Complex64,
    mu_init: &[f64],
    grid: &[usize],
    opts: &MinimizeOptions,
) -> Result<RonkinMinimum> {
    if !(opts.gtol > 0.0) {
        return Err(Error::Precondition("gtol must be positive".into()));
    }
    check_mu(model, mu_init)?;
    let clamp = |v: f64| v.clamp(-opts.mu_max, opts.mu_max);
    let mut mu: Vec<f64> = mu_init.iter().map(|&v| clamp(v)).collect();
    let mut cur = ronkin_evaluate(model, energy, &mu, grid)?;
    let mut history: Vec<Vec<f64>> = vec![mu.clone()];
    for iteration in 0..opts.max_iterations {
        let g = cur.gradient.clone().unwrap();
        let finish = |cur: &RonkinEvaluation, mu: &[f64]| -> Result<RonkinMinimum> {
            let hole = in_hole(model, energy, mu, grid, opts.slices)?;
            Ok(RonkinMinimum {
                mu_star: mu.to_vec(),
                verdict: if hole { AmoebaVerdict::Interior } else { AmoebaVerdict::BoundaryOfAmoeba },
                value: cur.value,
                gradient: cur.gradient.clone().unwrap(),
                iterations: iteration,
            })
        };
        if inf_norm(&g) <= opts.gtol {
            return finish(&cur, &mu);
        }
        let pinned = mu
            .iter()
            .zip(&g)
            .any(|(&m, &gm)| m.abs() >= opts.mu_max && m.signum() * gm < 0.0);
        if pinned {
            return Err(Error::MaxIterations { best: mu, iterations: iteration });
        }
        let g2: f64 = g.iter().map(|x| x * x).sum();
        let mut step = opts.initial_step;
        let mut accepted = None;
        while step > 1e-13 {
            let trial: Vec<f64> = mu.iter().zip(&g).map(|(m, gm)| clamp(m - step * gm)).collect();
            if trial != mu {
                if let Ok(r) = ronkin_value(model, energy, &trial, grid) {
                    if r.value <= cur.value - 1e-4 * step * g2 {
                        accepted = Some(trial);
                        break;
                    }
                }
            }
            step *= opts.shrink;
        }
        match accepted {
            Some(next) => {
                mu = next;
                cur = ronkin_evaluate(model, energy, &mu, grid)?;
                // Near the amoeba the quadrature is rough and can pull the iterate
                // into a node where det vanishes; stop once μ stops moving.
                history.push(mu.clone());
                if history.len() > STALL_WINDOW {
                    let old = &history[history.len() - 1 - STALL_WINDOW];
                    let moved = old.iter().zip(&mu).fold(0.0f64, |a, (x, y)| a.max((x - y).abs()));
                    if moved < STALL_MOVE {
                        return finish(&cur, &mu);
                    }
                }
            }
            // no descent possible along −∇R: a kink of R, which sits on the amoeba
            None => return finish(&cur, &mu),
        }
    }
    Err(Error::MaxIterations { best: mu, iterations: opts.max_iterations })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "result", rename_all = "snake_case")]
pub enum ObcMembership {
    InObcSpectrum,
    NotInObcSpectrum { mu_star: Vec<f64> },
}

/// Amoeba criterion for `E` belonging to the OBC spectrum in the thermodynamic limit.
pub fn amoeba_obc_test(model: &TightBindingModel, energy: Complex64, grid: &[usize], gtol: f64) -> Result<ObcMembership> {
    let start = vec![0.0; model.dimension()];
    let m = ronkin_minimize(model, energy, &start, grid, gtol)?;
    Ok(match m.verdict {
        AmoebaVerdict::BoundaryOfAmoeba => ObcMembership::InObcSpectrum,
        AmoebaVerdict::Interior => ObcMembership::NotInObcSpectrum { mu_star: m.mu_star },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice_model::HoppingTerm;
    use crate::model_zoo::{build_with, list};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn hn(tp: f64, tm: f64) -> TightBindingModel {
        build_with("hatano_nelson", &[("t_plus", tp), ("t_minus", tm)]).unwrap().model
    }

    fn scalar(terms: &[(i32, Complex64)]) -> TightBindingModel {
        let t = terms
            .iter()
            .map(|&(j, z)| HoppingTerm::new(vec![j], linalg::cmat(1, &[z])))
            .collect();
        TightBindingModel::new("scalar", 1, 1, t).unwrap()
    }

    // Hatano–Nelson: det = −(t₊β² − Eβ + t₋)/β, so w = #{roots with |β| < e^μ} − 1.
    fn hn_oracle(tp: f64, tm: f64, e: Complex64, mu: f64) -> Option<i64> {
        let disc = (e * e - 4.0 * tp * tm).sqrt();
        let r = [(e + disc) / (2.0 * tp), (e - disc) / (2.0 * tp)];
        let rad = mu.exp();
        if r.iter().any(|z| (z.norm() - rad).abs() < 1e-3 * rad) {
            return None;
        }
        Some(r.iter().filter(|z| z.norm() < rad).count() as i64 - 1)
    }

    #[test]
    fn hatano_nelson_windings() {
        let m = hn(1.0, 2.0);
        assert_eq!(winding_number(&m, c(0.0, 0.0), &[0.0], 0, &[], 256).unwrap().value, Winding::Value(-1));
        let w = winding_number(&m, c(0.0, 0.0), &[0.5 * 2f64.ln()], 0, &[], 256).unwrap();
        assert_eq!(w.value, Winding::IllDefined);
        assert!(winding_number(&m, c(0.0, 0.0), &[0.0], 0, &[], 32).is_err());
    }

    #[test]
    fn energies_grazing_the_loop_still_resolve() {
        // the loop 3cos k − i sin k passes E = 3 at k = 0
        let m = hn(1.0, 2.0);
        for d in [1e-3, 1e-4, 1e-5] {
            for e in [c(3.0 - d, 0.0), c(3.0 + d, 0.0), c(-3.0 + d, 0.0), c(0.0, 1.0 - d)] {
                let disc = (e * e - 8.0).sqrt();
                let inside = [(e + disc) / 2.0, (e - disc) / 2.0].iter().filter(|z| z.norm() < 1.0).count() as i64;
                let w = winding_number(&m, e, &[0.0], 0, &[], 64).unwrap();
                assert_eq!(w.value, Winding::Value(inside - 1), "E={e}");
            }
        }
    }

    #[test]
    fn far_energy_winds_zero() {
        for e in list() {
            let b = build_with(e.id, &[]).unwrap();
            let mu = vec![0.3; b.model.dimension()];
            let bound: f64 = b
                .model
                .hoppings()
                .map(|(v, t)| {
                    let ph: f64 = v.iter().zip(&mu).map(|(&j, &m)| j as f64 * m).sum::<f64>().abs().exp();
                    // Frobenius bounds the spectral norm
                    linalg::entries(t).map(|z| z.norm_sqr()).sum::<f64>().sqrt() * ph
                })
                .sum();
            let energy = c(bound + 1.0, 0.5);
            let tr = vec![0.4; b.model.dimension() - 1];
            for axis in 0..b.model.dimension() {
                let w = winding_number(&b.model, energy, &mu, axis, &tr, 64).unwrap();
                assert_eq!(w.value, Winding::Value(0), "{}", e.id);
            }
        }
    }

    #[test]
    fn winding_json_schema() {
        let w = WindingReport { value: Winding::IllDefined, min_abs_det: 0.0, median_abs_det: 1.0, raw: 0.0, k_points: 64 };
        assert_eq!(serde_json::to_string(&w).unwrap(), r#"{"value":"ill_defined","min_abs_det":0.0,"grid":64}"#);
        let w = WindingReport { value: Winding::Value(-2), ..w };
        assert_eq!(serde_json::to_string(&w).unwrap(), r#"{"value":-2,"min_abs_det":0.0,"grid":64}"#);
    }

    #[test]
    fn ronkin_constant_and_jensen() {
        let a = c(0.3, -0.7);
        let m = scalar(&[(0, a)]);
        let e = c(1.1, 0.2);
        for mu in [-1.0, 0.0, 2.0] {
            let r = ronkin_value(&m, e, &[mu], &[64]).unwrap();
            assert!((r.value - (e - a).norm().ln()).abs() < 1e-12);
        }
        let t = c(0.8, 0.6);
        let m = scalar(&[(1, t)]);
        for (e, mu) in [(c(1.5, 0.0), 0.0), (c(0.2, 0.1), 0.3), (c(1.0, 1.0), -0.5)] {
            let r = ronkin_value(&m, e, &[mu], &[512]).unwrap();
            let want = e.norm().ln().max(t.norm().ln() + mu);
            assert!((r.value - want).abs() < 2e-3, "{} {}", r.value, want);
        }
    }

    #[test]
    fn ronkin_minimum_below_origin() {
        let m = hn(1.0, 2.0);
        let r0 = ronkin_value(&m, c(0.0, 0.0), &[0.0], &[256]).unwrap().value;
        let r1 = ronkin_value(&m, c(0.0, 0.0), &[0.5 * 2f64.ln()], &[256]).unwrap().value;
        assert!(r1 < r0);
    }

    #[test]
    fn gradient_is_winding() {
        let m = hn(1.0, 2.0);
        let g = ronkin_gradient(&m, c(0.0, 0.0), &[0.0], &[256]).unwrap();
        assert!((g[0] + 1.0).abs() < 1e-6);
        let g = ronkin_gradient(&m, c(9.0, 1.0), &[0.1], &[64]).unwrap();
        assert!(g[0].abs() < 1e-9);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for e in list() {
            let b = build_with(e.id, &[]).unwrap();
            let d = b.model.dimension();
            let grid = vec![64; d];
            let mut done = 0;
            while done < 3 {
                let mu: Vec<f64> = (0..d).map(|_| rng.gen_range(-0.8..0.8)).collect();
                let energy = c(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0));
                let Ok(g) = ronkin_gradient(&b.model, energy, &mu, &grid) else { continue };
                let eps = 1e-4;
                for j in 0..d {
                    let mut p = mu.clone();
                    p[j] += eps;
                    let mut q = mu.clone();
                    q[j] -= eps;
                    let fd = (ronkin_value(&b.model, energy, &p, &grid).unwrap().value
                        - ronkin_value(&b.model, energy, &q, &grid).unwrap().value)
                        / (2.0 * eps);
                    assert!((fd - g[j]).abs() < 1e-3, "{}: fd {fd} vs {} at {mu:?}", e.id, g[j]);
                }
                done += 1;
            }
        }
    }

    #[test]
    fn minimizer_on_hatano_nelson() {
        let m = hn(1.0, 2.0);
        let r = ronkin_minimize(&m, c(1.0, 0.0), &[0.0], &[256], 1e-4).unwrap();
        assert!((r.mu_star[0] - 0.5 * 2f64.ln()).abs() < 1e-2, "{:?}", r);
        assert_eq!(r.verdict, AmoebaVerdict::BoundaryOfAmoeba);
        let r = ronkin_minimize(&hn(1.3, 1.3), c(0.7, 0.0), &[0.4], &[256], 1e-4).unwrap();
        assert!(r.mu_star[0].abs() < 1e-2);
        assert_eq!(amoeba_obc_test(&m, c(0.0, 0.0), &[256], 1e-4).unwrap(), ObcMembership::InObcSpectrum);
        assert!(matches!(
            amoeba_obc_test(&m, c(5.0, 0.0), &[256], 1e-4).unwrap(),
            ObcMembership::NotInObcSpectrum { .. }
        ));
    }

    #[test]
    fn eq16_decay_sign_pattern() {
        // the skin mode at −1.5 − 0.195i sits at the (max, max) corner
        let m = build_with("eq16", &[]).unwrap().model;
        let r = ronkin_minimize(&m, c(-1.5, -0.195), &[0.0, 0.0], &[64, 64], 1e-4).unwrap();
        assert!(r.mu_star.iter().all(|&x| x > 0.0), "{r:?}");
    }

    #[test]
    fn trs_dagger_gradient_vanishes() {
        let m = build_with("eq18", &[("gamma", 0.1)]).unwrap().model;
        let g = ronkin_gradient(&m, c(1.87, 0.64), &[0.0], &[256]).unwrap();
        assert!(g[0].abs() < 1e-3);
    }

    #[test]
    fn master_identity_on_zoo() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for e in list() {
            let b = build_with(e.id, &[]).unwrap();
            let d = b.model.dimension();
            for op in &b.symmetries {
                let p = op.prediction();
                let sigma = op.kind.orientation_sign();
                let mut checked = 0;
                for _ in 0..12 {
                    let energy = c(rng.gen_range(-4.0..4.0), rng.gen_range(-4.0..4.0));
                    let mu: Vec<f64> = (0..d).map(|_| rng.gen_range(-0.5..0.5)).collect();
                    let tr: Vec<f64> = (0..d - 1).map(|_| rng.gen_range(0.0..2.0 * PI)).collect();
                    let mu2: Vec<f64> = mu.iter().map(|m| m * p.mu_sign as f64).collect();
                    let tr2: Vec<f64> = if op.kind.flips_momentum() { tr.iter().map(|t| -t).collect() } else { tr.clone() };
                    for axis in 0..d {
                        let a = winding_number(&b.model, energy, &mu, axis, &tr, 128).unwrap();
                        let z = winding_number(&b.model, p.energy_map.apply(energy), &mu2, axis, &tr2, 128).unwrap();
                        if let (Some(x), Some(y)) = (a.value.value(), z.value.value()) {
                            assert_eq!(x, sigma * y, "{} {}", e.id, op.kind);
                            checked += 1;
                        }
                    }
                }
                assert!(checked > 0);
            }
        }
    }

    fn random_two_band(rng: &mut impl Rng) -> TightBindingModel {
        let terms = (-1..=1)
            .map(|j| {
                let m = Mat::from_fn(2, 2, |_, _| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
                HoppingTerm::new(vec![j], m)
            })
            .collect();
        TightBindingModel::new("r", 1, 2, terms).unwrap()
    }

    fn map_terms(m: &TightBindingModel, f: impl Fn(&[i32], &CMat) -> (Vec<i32>, CMat)) -> TightBindingModel {
        let t = m.hoppings().map(|(v, t)| { let (v, t) = f(v, t); HoppingTerm::new(v, t) }).collect();
        TightBindingModel::new("mapped", m.dimension(), m.orbitals(), t).unwrap()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn hatano_nelson_matches_root_count(tp in 0.2..3.0f64, tm in 0.2..3.0f64, er in -3.0..3.0f64, ei in -2.0..2.0f64, mu in -1.0..1.0f64) {
            let e = c(er, ei);
            if let Some(want) = hn_oracle(tp, tm, e, mu) {
                let w = winding_number(&hn(tp, tm), e, &[mu], 0, &[], 64).unwrap();
                prop_assert_eq!(w.value, Winding::Value(want));
            }
        }

        #[test]
        fn winding_algebra(seed in 0u64..1000) {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let m = random_two_band(&mut rng);
            let e = c(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
            let w = |m: &TightBindingModel, e: Complex64| winding_number(m, e, &[0.0], 0, &[], 128).unwrap().value.value();
            let Some(base) = w(&m, e) else { return Ok(()) };
            // k ↦ −k
            let rev = map_terms(&m, |v, t| (vec![-v[0]], t.clone()));
            prop_assert_eq!(w(&rev, e), Some(-base));
            // transpose
            let tr = map_terms(&m, |v, t| (v.to_vec(), linalg::transpose(t)));
            prop_assert_eq!(w(&tr, e), Some(base));
            // −H about −E
            let neg = map_terms(&m, |v, t| (v.to_vec(), linalg::scale(t, c(-1.0, 0.0))));
            prop_assert_eq!(w(&neg, -e), Some(base));
            // H(k)* about E*
            let cj = map_terms(&m, |v, t| (vec![-v[0]], linalg::conj(t)));
            prop_assert_eq!(w(&cj, e.conj()), Some(-base));
            // unitary frame
            let x = Mat::from_fn(2, 2, |_, _| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
            let (u, _) = linalg::polar_unitary(&x).unwrap();
            let ud = linalg::adjoint(&u);
            let rot = map_terms(&m, |v, t| (v.to_vec(), &u * t * &ud));
            prop_assert_eq!(w(&rot, e), Some(base));
        }

        #[test]
        fn ronkin_is_convex(seed in 0u64..1000) {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let m = random_two_band(&mut rng);
            let e = c(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
            let a = rng.gen_range(-1.5..1.5);
            let b = rng.gen_range(-1.5..1.5);
            let r = |mu: f64| ronkin_value(&m, e, &[mu], &[256]).unwrap().value;
            for t in [0.25, 0.5, 0.75] {
                prop_assert!(r(t * a + (1.0 - t) * b) <= t * r(a) + (1.0 - t) * r(b) + 2e-3);
            }
        }
    }
}
