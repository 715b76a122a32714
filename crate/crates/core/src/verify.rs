//! Skin-partner checks against exact OBC diagonalizations and the
//! classifier-versus-ν scan for TRS-dagger models.

use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use serde::Serialize;

use crate::band_topology::{nu_table, NuReport};
use crate::error::{Error, Result};
use crate::lattice_model::TightBindingModel;
use crate::spectral::{
    degeneracy_tol, degenerate_group_localize, degenerate_groups, localize_all, near_extremal, obc_spectrum,
    LocalizationClass, LocalizationReport, LocalizationThresholds, SpectralResult,
};
use crate::symmetry::{check_symmetry, find_intertwiner, SymmetryKind, SymmetryOperator};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    SameBoundary,
    OppositeBoundary,
    Mismatch,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PartnerCheckResult {
    pub energy: Complex64,
    pub partner_energy: Complex64,
    pub index: usize,
    pub partner_index: usize,
    pub report: LocalizationReport,
    pub partner_report: LocalizationReport,
    pub verdict: Verdict,
    pub expected: Verdict,
    /// Some compared axis has `|μ|` below twice the localization threshold.
    pub weak: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CheckOptions {
    pub n_samples: usize,
    /// Partner search radius, relative to `max(1, spectral radius)`.
    pub match_tol: f64,
    /// Samples within this fraction of the diameter of an extremal level are skipped.
    pub extremal_frac: f64,
    pub thresholds: LocalizationThresholds,
    /// Random sampling instead of even strides.
    pub seed: Option<u64>,
}

impl Default for CheckOptions {
    fn default() -> Self {
        CheckOptions {
            n_samples: 40,
            match_tol: 1e-6,
            extremal_frac: 0.02,
            thresholds: LocalizationThresholds::default(),
            seed: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Table1Summary {
    pub kind: SymmetryKind,
    pub expected: Verdict,
    pub results: Vec<PartnerCheckResult>,
    pub agreement: f64,
    /// Mismatches that are not flagged weak.
    pub strong_mismatches: usize,
}

pub fn expected_verdict(kind: SymmetryKind) -> Verdict {
    if crate::symmetry::partner_prediction(kind).mu_sign > 0 {
        Verdict::SameBoundary
    } else {
        Verdict::OppositeBoundary
    }
}

/// Compare decay-factor signs on the axes where either state is localized.
pub fn compare_reports(a: &LocalizationReport, b: &LocalizationReport, mu_tol: f64) -> (Verdict, bool) {
    let mut same = 0;
    let mut flip = 0;
    let mut weak = false;
    for (x, y) in a.mu_fit.iter().zip(&b.mu_fit) {
        if x.abs().max(y.abs()) < mu_tol {
            continue;
        }
        if x.abs().min(y.abs()) < 2.0 * mu_tol {
            weak = true;
        }
        if x * y > 0.0 {
            same += 1;
        } else {
            flip += 1;
        }
    }
    let verdict = match (same, flip) {
        (s, 0) if s > 0 => Verdict::SameBoundary,
        (0, f) if f > 0 => Verdict::OppositeBoundary,
        _ => Verdict::Mismatch,
    };
    (verdict, weak)
}

fn is_localized(r: &LocalizationReport) -> bool {
    !matches!(r.class, LocalizationClass::Extended | LocalizationClass::Unknown)
}

fn stored(reports: &[Result<LocalizationReport>], i: usize) -> Result<LocalizationReport> {
    match &reports[i] {
        Ok(r) => Ok(r.clone()),
        Err(e) => Err(Error::DegenerateFit(format!("state {i}: {e}"))),
    }
}

/// Partner of eigenvalue `index` under `op`, checked against the diagonalization.
pub fn check_partner(
    result: &SpectralResult,
    reports: &[Result<LocalizationReport>],
    op: &SymmetryOperator,
    index: usize,
    opts: &CheckOptions,
) -> Result<PartnerCheckResult> {
    let e = result.eigenvalues[index];
    let pred = op.prediction();
    let target = pred.energy_map.apply(e);
    let tol = opts.match_tol * result.spectral_radius().max(1.0);
    let (j, dist) = result
        .eigenvalues
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != index)
        .map(|(j, z)| (j, (z - target).norm()))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .ok_or(Error::PartnerNotFound { energy: e, partner: target, tol })?;
    if dist > tol {
        return Err(Error::PartnerNotFound { energy: e, partner: target, tol });
    }
    let report = stored(reports, index)?;
    let partner_report = stored(reports, j)?;
    let (verdict, weak) = compare_reports(&report, &partner_report, opts.thresholds.mu_tol);
    Ok(PartnerCheckResult {
        energy: e,
        partner_energy: result.eigenvalues[j],
        index,
        partner_index: j,
        report,
        partner_report,
        verdict,
        expected: expected_verdict(op.kind),
        weak,
    })
}

/// Localize every eigenvector once; reuse across symmetries.
pub fn localize(result: &SpectralResult, opts: &CheckOptions) -> Result<Vec<Result<LocalizationReport>>> {
    localize_all(result, &opts.thresholds)
}

/// Indices eligible for partner checks: localized, away from the hull, not their own partner.
pub fn sample_indices(
    result: &SpectralResult,
    reports: &[Result<LocalizationReport>],
    op: &SymmetryOperator,
    opts: &CheckOptions,
) -> Vec<usize> {
    let edge = near_extremal(&result.eigenvalues, opts.extremal_frac);
    let map = op.prediction().energy_map;
    let self_tol = 10.0 * opts.match_tol * result.spectral_radius().max(1.0);
    let candidates: Vec<usize> = (0..result.eigenvalues.len())
        .filter(|&i| !edge[i])
        .filter(|&i| matches!(&reports[i], Ok(r) if is_localized(r)))
        .filter(|&i| (map.apply(result.eigenvalues[i]) - result.eigenvalues[i]).norm() > self_tol)
        .collect();
    let n = opts.n_samples.min(candidates.len());
    match opts.seed {
        Some(seed) => {
            let mut c = candidates;
            c.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            c.truncate(n);
            c
        }
        None => (0..n).map(|i| candidates[i * candidates.len() / n]).collect(),
    }
}

/// Skin-partner check on a precomputed OBC diagonalization.
pub fn table1_check_result(
    model: &TightBindingModel,
    result: &SpectralResult,
    reports: &[Result<LocalizationReport>],
    op: &SymmetryOperator,
    opts: &CheckOptions,
) -> Result<Table1Summary> {
    let chk = check_symmetry(op, model, 1e-8)?;
    if !chk.holds {
        return Err(Error::Precondition(format!(
            "model '{}' fails {} (residual {:.3e})",
            model.name(),
            op.kind,
            chk.max_residual
        )));
    }
    let idx = sample_indices(result, reports, op, opts);
    let results: Vec<PartnerCheckResult> = idx
        .iter()
        .map(|&i| check_partner(result, reports, op, i, opts))
        .collect::<Result<_>>()?;
    let expected = expected_verdict(op.kind);
    let good = results.iter().filter(|r| r.verdict == r.expected).count();
    let strong_mismatches = results.iter().filter(|r| r.verdict != r.expected && !r.weak).count();
    Ok(Table1Summary {
        kind: op.kind,
        expected,
        agreement: if results.is_empty() { 0.0 } else { good as f64 / results.len() as f64 },
        results,
        strong_mismatches,
    })
}

/// Diagonalize under OBC and run the skin-partner check for one symmetry.
pub fn table1_check(model: &TightBindingModel, op: &SymmetryOperator, sizes: &[usize], n_samples: usize) -> Result<Table1Summary> {
    let opts = CheckOptions { n_samples, ..Default::default() };
    let result = obc_spectrum(model, sizes)?;
    let reports = localize(&result, &opts)?;
    table1_check_result(model, &result, &reports, op, &opts)
}

/// Partner check for the eigenvalue nearest a quoted energy.
pub fn check_quoted(
    result: &SpectralResult,
    reports: &[Result<LocalizationReport>],
    op: &SymmetryOperator,
    energy: Complex64,
    quote_tol: f64,
    opts: &CheckOptions,
) -> Result<PartnerCheckResult> {
    let (i, d) = result.nearest(energy).ok_or(Error::IndexOutOfRange(0))?;
    if d > quote_tol {
        return Err(Error::PartnerNotFound { energy, partner: result.eigenvalues[i], tol: quote_tol });
    }
    check_partner(result, reports, op, i, opts)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScanSample {
    pub energy: Complex64,
    pub class: String,
    pub bidirectional: bool,
    /// ν per axis over the transverse grid.
    pub nu: Vec<Vec<Option<f64>>>,
    /// `None` when ν is undefined somewhere or the class is neither extended nor bidirectional.
    pub agrees: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BidirectionalSummary {
    /// Class label of every OBC eigenvalue.
    pub classes: Vec<(Complex64, String)>,
    pub samples: Vec<ScanSample>,
    pub agreement: f64,
    pub disagreements: Vec<Complex64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScanOptions {
    pub nu_samples: usize,
    pub transverse_points: usize,
    pub grid: usize,
    pub extremal_frac: f64,
    pub thresholds: LocalizationThresholds,
}

impl Default for ScanOptions {
    fn default() -> Self {
        ScanOptions {
            nu_samples: 16,
            transverse_points: 16,
            grid: 256,
            // decay rates vanish toward the arc ends, below any fixed slope threshold
            extremal_frac: 0.1,
            thresholds: LocalizationThresholds::default(),
        }
    }
}

/// Per-eigenvalue class; degenerate groups are split by position first and
/// count as bidirectional when their members go to opposite ends.
pub fn classify_states(result: &SpectralResult, opts: &ScanOptions) -> Result<Vec<LocalizationClass>> {
    let reports = localize_all(result, &opts.thresholds)?;
    let mut classes: Vec<LocalizationClass> = reports
        .into_iter()
        .map(|r| r.map(|r| r.class).unwrap_or(LocalizationClass::Unknown))
        .collect();
    let tol = degeneracy_tol(result);
    for g in degenerate_groups(&result.eigenvalues, tol) {
        if g.len() < 2 {
            continue;
        }
        let e = result.eigenvalues[g[0]];
        let split = degenerate_group_localize(result, e, tol, &opts.thresholds)?;
        let d = split[0].mu_fit.len();
        let axes: Vec<usize> = (0..d)
            .filter(|&m| {
                let signs: Vec<f64> = split
                    .iter()
                    .map(|r| r.mu_fit[m])
                    .filter(|x| x.abs() >= opts.thresholds.mu_tol)
                    .collect();
                signs.iter().any(|&x| x > 0.0) && signs.iter().any(|&x| x < 0.0)
            })
            .collect();
        let class = if axes.is_empty() {
            LocalizationClass::DegenerateSubspace { dim: g.len() }
        } else {
            LocalizationClass::Bidirectional { axes }
        };
        for &i in &g {
            classes[i] = class.clone();
        }
    }
    Ok(classes)
}

/// Classifier-versus-invariant comparison for a TRS-dagger model.
pub fn bidirectional_scan(model: &TightBindingModel, sizes: &[usize], opts: &ScanOptions) -> Result<BidirectionalSummary> {
    let result = obc_spectrum(model, sizes)?;
    bidirectional_scan_result(model, &result, opts)
}

pub fn bidirectional_scan_result(model: &TightBindingModel, result: &SpectralResult, opts: &ScanOptions) -> Result<BidirectionalSummary> {
    find_intertwiner(SymmetryKind::TrsDagger, model, 1e-8)
        .map_err(|_| Error::Precondition(format!("model '{}' has no TRS-dagger symmetry", model.name())))?;
    let classes = classify_states(result, opts)?;
    let edge = near_extremal(&result.eigenvalues, opts.extremal_frac);
    let candidates: Vec<usize> = (0..classes.len())
        .filter(|&i| !edge[i])
        .filter(|&i| matches!(classes[i], LocalizationClass::Extended | LocalizationClass::Bidirectional { .. }))
        .collect();
    let n = opts.nu_samples.min(candidates.len());
    let picked: Vec<usize> = (0..n).map(|i| candidates[i * candidates.len() / n]).collect();
    let mut samples = Vec::new();
    for &i in &picked {
        let e = result.eigenvalues[i];
        let mut nu = Vec::new();
        for axis in 0..model.dimension() {
            let table: Vec<NuReport> = match nu_table(model, e, axis, opts.transverse_points, opts.grid) {
                Ok(t) => t,
                Err(Error::PairingFailure(_)) | Err(Error::BranchAmbiguity { .. }) => vec![],
                Err(err) => return Err(err),
            };
            nu.push(table.iter().map(|r| r.nu).collect::<Vec<_>>());
        }
        let bidirectional = matches!(classes[i], LocalizationClass::Bidirectional { .. });
        let defined = nu.iter().all(|t| !t.is_empty() && t.iter().all(|v| v.is_some()));
        let nonzero = nu.iter().flatten().any(|v| v.is_some_and(|x| x != 0.0));
        let agrees = defined.then_some(nonzero == bidirectional);
        samples.push(ScanSample { energy: e, class: classes[i].label(), bidirectional, nu, agrees });
    }
    let judged: Vec<&ScanSample> = samples.iter().filter(|s| s.agrees.is_some()).collect();
    let good = judged.iter().filter(|s| s.agrees == Some(true)).count();
    Ok(BidirectionalSummary {
        classes: result.eigenvalues.iter().zip(&classes).map(|(e, c)| (*e, c.label())).collect(),
        agreement: if judged.is_empty() { 0.0 } else { good as f64 / judged.len() as f64 },
        disagreements: judged.iter().filter(|s| s.agrees == Some(false)).map(|s| s.energy).collect(),
        samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model_zoo::build_with;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn report(mu: &[f64]) -> LocalizationReport {
        LocalizationReport {
            mu_fit: mu.to_vec(),
            mu_stderr: vec![0.0; mu.len()],
            class: LocalizationClass::Unknown,
            boundary_mass: vec![(0.0, 0.0); mu.len()],
            half_slopes: vec![(0.0, 0.0); mu.len()],
        }
    }

    #[test]
    fn sign_comparison() {
        let t = 0.02;
        assert_eq!(compare_reports(&report(&[0.3, -0.2]), &report(&[0.25, -0.1]), t).0, Verdict::SameBoundary);
        assert_eq!(compare_reports(&report(&[0.3, -0.2]), &report(&[-0.25, 0.1]), t).0, Verdict::OppositeBoundary);
        assert_eq!(compare_reports(&report(&[0.3, -0.2]), &report(&[0.25, 0.1]), t).0, Verdict::Mismatch);
        // axes where neither state is localized are ignored
        assert_eq!(compare_reports(&report(&[0.3, 0.001]), &report(&[0.2, -0.001]), t).0, Verdict::SameBoundary);
        assert!(compare_reports(&report(&[0.3]), &report(&[0.03]), t).1);
    }

    #[test]
    fn expected_from_prediction() {
        assert_eq!(expected_verdict(SymmetryKind::Trs), Verdict::SameBoundary);
        assert_eq!(expected_verdict(SymmetryKind::Phs), Verdict::OppositeBoundary);
        assert_eq!(expected_verdict(SymmetryKind::PseudoHermitian), Verdict::OppositeBoundary);
        assert_eq!(expected_verdict(SymmetryKind::Sls), Verdict::SameBoundary);
    }

    #[test]
    fn corner_modes_share_trs_partner_corner() {
        // eq16 at a small size: TRS partners sit at the same corner
        let b = build_with("eq16", &[]).unwrap();
        let opts = CheckOptions { n_samples: 20, ..Default::default() };
        let result = obc_spectrum(&b.model, &[14, 14]).unwrap();
        let reports = localize(&result, &opts).unwrap();
        let s = table1_check_result(&b.model, &result, &reports, &b.symmetries[0], &opts).unwrap();
        assert!(!s.results.is_empty());
        assert!(s.agreement >= 0.9, "{}", s.agreement);
        for r in &s.results {
            assert!((r.partner_energy - r.energy.conj()).norm() < 1e-5);
        }
    }

    #[test]
    fn missing_partner_is_reported() {
        // real Hatano–Nelson levels are their own TRS image; with themselves
        // excluded no other level matches
        let b = build_with("hatano_nelson", &[]).unwrap();
        let result = obc_spectrum(&b.model, &[20]).unwrap();
        let reports = localize(&result, &CheckOptions::default()).unwrap();
        let r = check_partner(&result, &reports, &b.symmetries[0], 3, &CheckOptions::default());
        assert!(matches!(r, Err(Error::PartnerNotFound { .. })));
    }

    #[test]
    fn chain_scan_agrees() {
        let m = build_with("eq18", &[("gamma", 0.1)]).unwrap().model;
        let s = bidirectional_scan(&m, &[40], &ScanOptions::default()).unwrap();
        assert!(s.agreement >= 0.95, "{:?}", s.disagreements);
        let (i, _) = s
            .classes
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 .0 - c(1.87, 0.64)).norm().total_cmp(&(b.1 .0 - c(1.87, 0.64)).norm()))
            .unwrap();
        assert!(s.classes[i].1.starts_with("bidirectional"), "{}", s.classes[i].1);
    }

    #[test]
    fn degenerate_chain_splits_to_opposite_ends() {
        let m = build_with("eq18", &[]).unwrap().model;
        let result = obc_spectrum(&m, &[40]).unwrap();
        let classes = classify_states(&result, &ScanOptions::default()).unwrap();
        let (i, _) = result.nearest(c(2.53, 0.0)).unwrap();
        assert!(matches!(classes[i], LocalizationClass::Bidirectional { .. }), "{:?}", classes[i]);
    }
}
