//! The seven internal symmetries of non-Hermitian Bloch Hamiltonians.

use std::fmt;
use std::str::FromStr;

use faer::Mat;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice_model::{HoppingTerm, TightBindingModel};
use crate::linalg::{self, CMat};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SymmetryKind {
    Trs,
    Phs,
    Cs,
    TrsDagger,
    PhsDagger,
    Sls,
    PseudoHermitian,
}

impl SymmetryKind {
    pub const ALL: [SymmetryKind; 7] = [
        SymmetryKind::Trs,
        SymmetryKind::Phs,
        SymmetryKind::Cs,
        SymmetryKind::TrsDagger,
        SymmetryKind::PhsDagger,
        SymmetryKind::Sls,
        SymmetryKind::PseudoHermitian,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SymmetryKind::Trs => "trs",
            SymmetryKind::Phs => "phs",
            SymmetryKind::Cs => "cs",
            SymmetryKind::TrsDagger => "trs_dagger",
            SymmetryKind::PhsDagger => "phs_dagger",
            SymmetryKind::Sls => "sls",
            SymmetryKind::PseudoHermitian => "pseudo_hermitian",
        }
    }

    /// Whether `R̂` in `Ô = U R̂` carries complex conjugation.
    pub fn is_antiunitary(self) -> bool {
        matches!(
            self,
            SymmetryKind::Trs | SymmetryKind::TrsDagger | SymmetryKind::Cs | SymmetryKind::Sls
        )
    }

    /// Whether the Bloch-level relation connects `k` to `−k` (otherwise `k` to itself).
    pub fn flips_momentum(self) -> bool {
        matches!(
            self,
            SymmetryKind::Trs | SymmetryKind::Phs | SymmetryKind::TrsDagger | SymmetryKind::PhsDagger
        )
    }

    /// Sign relating the winding at `(E, μ)` to the winding at the partner point.
    pub fn orientation_sign(self) -> i64 {
        match self {
            SymmetryKind::Phs | SymmetryKind::Cs | SymmetryKind::TrsDagger | SymmetryKind::PseudoHermitian => -1,
            _ => 1,
        }
    }
}

impl fmt::Display for SymmetryKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SymmetryKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SymmetryKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::Parse(format!("unknown symmetry kind '{s}'")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnergyMap {
    /// E
    Identity,
    /// −E
    Negate,
    /// E*
    Conjugate,
    /// −E*
    NegConjugate,
}

impl EnergyMap {
    pub fn apply(self, e: Complex64) -> Complex64 {
        match self {
            EnergyMap::Identity => e,
            EnergyMap::Negate => -e,
            EnergyMap::Conjugate => e.conj(),
            EnergyMap::NegConjugate => -e.conj(),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            EnergyMap::Identity => "E",
            EnergyMap::Negate => "-E",
            EnergyMap::Conjugate => "E*",
            EnergyMap::NegConjugate => "-E*",
        }
    }
}

/// Energy and decay factor of the partner skin mode.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartnerPrediction {
    pub energy_map: EnergyMap,
    pub mu_sign: i8,
}

pub fn partner_prediction(kind: SymmetryKind) -> PartnerPrediction {
    let (energy_map, mu_sign) = match kind {
        SymmetryKind::Trs => (EnergyMap::Conjugate, 1),
        SymmetryKind::Phs => (EnergyMap::Negate, -1),
        SymmetryKind::Cs => (EnergyMap::NegConjugate, -1),
        SymmetryKind::TrsDagger => (EnergyMap::Identity, -1),
        SymmetryKind::PhsDagger => (EnergyMap::NegConjugate, 1),
        SymmetryKind::Sls => (EnergyMap::Negate, 1),
        SymmetryKind::PseudoHermitian => (EnergyMap::Conjugate, -1),
    };
    PartnerPrediction { energy_map, mu_sign }
}

#[derive(Clone, Debug)]
pub struct SymmetryOperator {
    pub kind: SymmetryKind,
    u: CMat,
}

impl SymmetryOperator {
    pub fn new(kind: SymmetryKind, u: CMat) -> Result<Self> {
        if u.nrows() != u.ncols() || u.nrows() == 0 {
            return Err(Error::DimensionMismatch("U must be square and nonempty".into()));
        }
        let uu = &u * linalg::adjoint(&u);
        let dev = linalg::max_abs_diff(&uu, &linalg::identity(u.nrows()));
        if dev > 1e-10 {
            return Err(Error::InvariantViolation(format!(
                "U is not unitary: |UU† - I|max = {dev:.3e}"
            )));
        }
        Ok(SymmetryOperator { kind, u })
    }

    pub fn u(&self) -> &CMat {
        &self.u
    }

    pub fn prediction(&self) -> PartnerPrediction {
        partner_prediction(self.kind)
    }
}

fn negate(v: &[i32]) -> Vec<i32> {
    v.iter().map(|x| -x).collect()
}

fn hop_or_zero(model: &TightBindingModel, v: &[i32]) -> CMat {
    model
        .hopping(v)
        .cloned()
        .unwrap_or_else(|| Mat::zeros(model.orbitals(), model.orbitals()))
}

/// Right-hand side that `U t_j U⁻¹` must equal for the given kind.
pub fn target_hopping(kind: SymmetryKind, model: &TightBindingModel, j: &[i32]) -> CMat {
    let t = hop_or_zero(model, j);
    let tm = hop_or_zero(model, &negate(j));
    let minus = Complex64::new(-1.0, 0.0);
    match kind {
        SymmetryKind::Trs => linalg::conj(&t),
        SymmetryKind::Phs => linalg::scale(&linalg::transpose(&tm), minus),
        SymmetryKind::Cs => linalg::scale(&linalg::adjoint(&tm), minus),
        SymmetryKind::TrsDagger => linalg::transpose(&tm),
        SymmetryKind::PhsDagger => linalg::scale(&linalg::conj(&t), minus),
        SymmetryKind::Sls => linalg::scale(&t, minus),
        SymmetryKind::PseudoHermitian => linalg::adjoint(&tm),
    }
}

/// Hopping vectors that enter the check: the model's keys and their negatives.
fn relevant_vectors(model: &TightBindingModel) -> Vec<Vec<i32>> {
    let mut keys: Vec<Vec<i32>> = model.hoppings().map(|(v, _)| v.clone()).collect();
    let extra: Vec<Vec<i32>> = keys.iter().map(|v| negate(v)).collect();
    keys.extend(extra);
    keys.sort();
    keys.dedup();
    keys
}

/// The model with hoppings `j ↦ U t_j U⁻¹`.
pub fn transform_hopping(op: &SymmetryOperator, model: &TightBindingModel) -> Result<TightBindingModel> {
    check_size(op, model)?;
    let u = &op.u;
    let ui = linalg::adjoint(u);
    let terms = model
        .hoppings()
        .map(|(v, t)| HoppingTerm::new(v.clone(), u * t * &ui))
        .collect();
    TightBindingModel::new(
        format!("{}_{}", model.name(), op.kind),
        model.dimension(),
        model.orbitals(),
        terms,
    )
}

fn check_size(op: &SymmetryOperator, model: &TightBindingModel) -> Result<()> {
    if op.u.nrows() != model.orbitals() {
        return Err(Error::DimensionMismatch(format!(
            "U is {}x{}, model has {} orbitals",
            op.u.nrows(),
            op.u.ncols(),
            model.orbitals()
        )));
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SymmetryCheck {
    pub holds: bool,
    pub max_residual: f64,
}

pub fn symmetry_residual(op: &SymmetryOperator, model: &TightBindingModel) -> Result<f64> {
    check_size(op, model)?;
    let u = &op.u;
    let ui = linalg::adjoint(u);
    let mut worst: f64 = 0.0;
    for j in relevant_vectors(model) {
        let lhs = u * hop_or_zero(model, &j) * &ui;
        let rhs = target_hopping(op.kind, model, &j);
        worst = worst.max(linalg::max_abs_diff(&lhs, &rhs));
    }
    Ok(worst)
}

pub fn check_symmetry(op: &SymmetryOperator, model: &TightBindingModel, tol: f64) -> Result<SymmetryCheck> {
    if !(tol > 0.0) {
        return Err(Error::Precondition("tol must be positive".into()));
    }
    let r = symmetry_residual(op, model)?;
    Ok(SymmetryCheck { holds: r <= tol, max_residual: r })
}

/// Rotate the global phase so the first nonzero entry (row-major) is real positive.
fn normalize_phase(u: &CMat) -> CMat {
    let s = u.nrows();
    for i in 0..s {
        for j in 0..s {
            let z = u[(i, j)];
            if z.norm() > 1e-8 {
                let ph = z.conj() / z.norm();
                return linalg::scale(u, ph);
            }
        }
    }
    u.clone()
}

fn signed_permutations(s: usize) -> Vec<CMat> {
    let mut perms = Vec::new();
    let mut p: Vec<usize> = (0..s).collect();
    heap_permutations(&mut p, s, &mut perms);
    let mut out = Vec::new();
    for perm in perms {
        for mask in 0..(1u32 << s) {
            out.push(Mat::from_fn(s, s, |i, j| {
                if perm[i] == j {
                    Complex64::new(if mask >> i & 1 == 1 { -1.0 } else { 1.0 }, 0.0)
                } else {
                    Complex64::new(0.0, 0.0)
                }
            }));
        }
    }
    out
}

fn heap_permutations(p: &mut Vec<usize>, k: usize, out: &mut Vec<Vec<usize>>) {
    if k <= 1 {
        out.push(p.clone());
        return;
    }
    for i in 0..k {
        heap_permutations(p, k - 1, out);
        if k % 2 == 0 {
            p.swap(i, k - 1);
        } else {
            p.swap(0, k - 1);
        }
    }
}

/// Search for a unitary `U` realising `kind` on `model`.
///
/// Solves `U t_j = target_j U` for all `j` as a linear system in `vec(U)`,
/// then polar-decomposes candidates from its solution space. Simple signed
/// permutations are tried first so textbook operators come out when allowed.
pub fn find_intertwiner(kind: SymmetryKind, model: &TightBindingModel, tol: f64) -> Result<SymmetryOperator> {
    if !(tol > 0.0) {
        return Err(Error::Precondition("tol must be positive".into()));
    }
    let s = model.orbitals();
    let n = s * s;
    let vecs = relevant_vectors(model);
    // vec(U t) = (tᵀ ⊗ I) vec(U), vec(T U) = (I ⊗ T) vec(U), column-major vec.
    let mut rows = Mat::<Complex64>::zeros(vecs.len() * n, n);
    for (b, j) in vecs.iter().enumerate() {
        let t = hop_or_zero(model, j);
        let target = target_hopping(kind, model, j);
        for a in 0..s {
            for c in 0..s {
                for p in 0..s {
                    for q in 0..s {
                        // row index (a, c) ↔ a + s c ; col index (p, q) ↔ p + s q
                        let mut z = Complex64::new(0.0, 0.0);
                        if a == p {
                            z += t[(q, c)];
                        }
                        if c == q {
                            z -= target[(a, p)];
                        }
                        rows[(b * n + a + s * c, p + s * q)] += z;
                    }
                }
            }
        }
    }
    let basis = linalg::null_space(&rows, tol)?;
    let dim = basis.ncols();
    if dim == 0 {
        return Err(Error::NoIntertwiner(kind));
    }
    let unvec = |x: &[Complex64]| Mat::from_fn(s, s, |i, j| x[i + s * j]);
    let project = |m: &CMat| -> Vec<Complex64> {
        let x: Vec<Complex64> = (0..n).map(|idx| m[(idx % s, idx / s)]).collect();
        let mut out = vec![Complex64::new(0.0, 0.0); n];
        for c in 0..dim {
            let coef: Complex64 = (0..n).map(|r| basis[(r, c)].conj() * x[r]).sum();
            for r in 0..n {
                out[r] += coef * basis[(r, c)];
            }
        }
        out
    };

    let mut candidates: Vec<Vec<Complex64>> = Vec::new();
    if s <= 4 {
        for p in signed_permutations(s) {
            candidates.push(project(&p));
            let ip = linalg::scale(&p, Complex64::new(0.0, 1.0));
            candidates.push(project(&ip));
        }
    }
    for c in 0..dim {
        candidates.push((0..n).map(|r| basis[(r, c)]).collect());
    }
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x5eed);
    for _ in 0..16 {
        let mut x = vec![Complex64::new(0.0, 0.0); n];
        for c in 0..dim {
            let w = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            for r in 0..n {
                x[r] += w * basis[(r, c)];
            }
        }
        candidates.push(x);
    }

    for cand in candidates {
        let norm: f64 = cand.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm < 1e-8 {
            continue;
        }
        let x = unvec(&cand);
        let (u, ratio) = linalg::polar_unitary(&x)?;
        if ratio < 1e-6 {
            continue;
        }
        let u = normalize_phase(&u);
        let op = SymmetryOperator { kind, u };
        if symmetry_residual(&op, model)? <= 10.0 * tol {
            return Ok(op);
        }
    }
    Err(Error::NoIntertwiner(kind))
}
