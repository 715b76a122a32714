//! Tight-binding models `H(k) = Σ_j t_j e^{i k·j}` and their real-space forms.

use std::collections::BTreeMap;

use faer::Mat;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::CMat;

/// One hopping term: unit-cell displacement `vector` and its s×s matrix.
#[derive(Clone, Debug)]
pub struct HoppingTerm {
    pub vector: Vec<i32>,
    pub matrix: CMat,
}

impl HoppingTerm {
    pub fn new(vector: Vec<i32>, matrix: CMat) -> Self {
        HoppingTerm { vector, matrix }
    }
}

#[derive(Clone, Debug)]
pub struct TightBindingModel {
    name: String,
    dimension: usize,
    orbitals: usize,
    hoppings: BTreeMap<Vec<i32>, CMat>,
}

/// Complexified momentum `μ + ik`, one component per axis.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexMomentum {
    pub mu: Vec<f64>,
    pub k: Vec<f64>,
}

impl ComplexMomentum {
    pub fn new(mu: Vec<f64>, k: Vec<f64>) -> Result<Self> {
        if mu.len() != k.len() {
            return Err(Error::DimensionMismatch(format!(
                "mu has {} components, k has {}",
                mu.len(),
                k.len()
            )));
        }
        Ok(ComplexMomentum { mu, k })
    }

    pub fn real(k: Vec<f64>) -> Self {
        ComplexMomentum { mu: vec![0.0; k.len()], k }
    }
}

impl TightBindingModel {
    pub fn new(
        name: impl Into<String>,
        dimension: usize,
        orbitals: usize,
        terms: Vec<HoppingTerm>,
    ) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::InvariantViolation("dimension must be positive".into()));
        }
        if orbitals == 0 {
            return Err(Error::InvariantViolation("orbital count must be positive".into()));
        }
        let mut hoppings = BTreeMap::new();
        for term in terms {
            if term.vector.len() != dimension {
                return Err(Error::DimensionMismatch(format!(
                    "hopping vector {:?} has length {}, model dimension is {}",
                    term.vector,
                    term.vector.len(),
                    dimension
                )));
            }
            if term.matrix.nrows() != orbitals || term.matrix.ncols() != orbitals {
                return Err(Error::DimensionMismatch(format!(
                    "hopping {:?} is {}x{}, expected {}x{}",
                    term.vector,
                    term.matrix.nrows(),
                    term.matrix.ncols(),
                    orbitals,
                    orbitals
                )));
            }
            if crate::linalg::entries(&term.matrix).any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return Err(Error::InvariantViolation(format!(
                    "hopping {:?} has non-finite entries",
                    term.vector
                )));
            }
            if hoppings.contains_key(&term.vector) {
                return Err(Error::InvariantViolation(format!(
                    "duplicate vector {:?}",
                    term.vector
                )));
            }
            hoppings.insert(term.vector, term.matrix);
        }
        let nonzero = hoppings
            .values()
            .any(|m| crate::linalg::entries(m).any(|z| z.norm() > 0.0));
        if !nonzero {
            return Err(Error::InvariantViolation(
                "model needs at least one nonzero hopping matrix".into(),
            ));
        }
        Ok(TightBindingModel { name: name.into(), dimension, orbitals, hoppings })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn orbitals(&self) -> usize {
        self.orbitals
    }

    pub fn hoppings(&self) -> impl Iterator<Item = (&Vec<i32>, &CMat)> {
        self.hoppings.iter()
    }

    pub fn hopping(&self, vector: &[i32]) -> Option<&CMat> {
        self.hoppings.get(vector)
    }

    pub fn terms(&self) -> Vec<HoppingTerm> {
        self.hoppings
            .iter()
            .map(|(v, m)| HoppingTerm::new(v.clone(), m.clone()))
            .collect()
    }

    /// The model with `t_j → t_{−j}†`, whose Bloch matrix is `H(k)†`.
    pub fn adjoint(&self) -> TightBindingModel {
        let hoppings = self
            .hoppings
            .iter()
            .map(|(v, m)| (v.iter().map(|x| -x).collect(), m.adjoint().to_owned()))
            .collect();
        TightBindingModel {
            name: format!("{}_adjoint", self.name),
            dimension: self.dimension,
            orbitals: self.orbitals,
            hoppings,
        }
    }

    /// Largest |j_m| over all hoppings, per axis.
    pub fn reach(&self) -> Vec<u32> {
        let mut r = vec![0u32; self.dimension];
        for v in self.hoppings.keys() {
            for (m, &x) in v.iter().enumerate() {
                r[m] = r[m].max(x.unsigned_abs());
            }
        }
        r
    }

    fn check_len(&self, what: &str, len: usize) -> Result<()> {
        if len != self.dimension {
            return Err(Error::DimensionMismatch(format!(
                "{what} has {len} components, model dimension is {}",
                self.dimension
            )));
        }
        Ok(())
    }

    /// `H(e^{μ+ik})` together with `∂H/∂μ_m` for every axis.
    pub fn bloch_with_mu_derivatives(&self, mu: &[f64], k: &[f64]) -> Result<(CMat, Vec<CMat>)> {
        self.check_len("mu", mu.len())?;
        self.check_len("k", k.len())?;
        let s = self.orbitals;
        let mut h = Mat::<Complex64>::zeros(s, s);
        let mut dh = vec![Mat::<Complex64>::zeros(s, s); self.dimension];
        for (v, t) in &self.hoppings {
            let phase = phase_factor(v, mu, k);
            for i in 0..s {
                for j in 0..s {
                    let z = t[(i, j)] * phase;
                    h[(i, j)] += z;
                    for (m, &vm) in v.iter().enumerate() {
                        if vm != 0 {
                            dh[m][(i, j)] += z * vm as f64;
                        }
                    }
                }
            }
        }
        Ok((h, dh))
    }
}

/// `e^{j·(μ+ik)}`.
pub(crate) fn phase_factor(v: &[i32], mu: &[f64], k: &[f64]) -> Complex64 {
    let mut re = 0.0;
    let mut im = 0.0;
    for (m, &vm) in v.iter().enumerate() {
        let j = vm as f64;
        re += j * mu[m];
        im += j * k[m];
    }
    Complex64::from_polar(re.exp(), im)
}

fn sum_terms(model: &TightBindingModel, mu: &[f64], k: &[f64]) -> CMat {
    let s = model.orbitals;
    let mut h = Mat::<Complex64>::zeros(s, s);
    for (v, t) in &model.hoppings {
        let phase = phase_factor(v, mu, k);
        for i in 0..s {
            for j in 0..s {
                h[(i, j)] += t[(i, j)] * phase;
            }
        }
    }
    h
}

/// `H(k) = Σ_j t_j e^{i k·j}`.
pub fn bloch_hamiltonian(model: &TightBindingModel, k: &[f64]) -> Result<CMat> {
    model.check_len("k", k.len())?;
    if k.iter().any(|x| !x.is_finite()) {
        return Err(Error::DimensionMismatch("k has non-finite components".into()));
    }
    let mu = vec![0.0; k.len()];
    Ok(sum_terms(model, &mu, k))
}

/// `H(e^{μ+ik}) = Σ_j t_j e^{j·(μ+ik)}`.
pub fn generalized_bloch(model: &TightBindingModel, z: &ComplexMomentum) -> Result<CMat> {
    model.check_len("mu", z.mu.len())?;
    model.check_len("k", z.k.len())?;
    Ok(sum_terms(model, &z.mu, &z.k))
}

/// Finite open lattice with row-major site order (last axis fastest).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Lattice {
    pub sizes: Vec<usize>,
}

impl Lattice {
    pub fn new(sizes: Vec<usize>) -> Self {
        Lattice { sizes }
    }

    pub fn sites(&self) -> usize {
        self.sizes.iter().product()
    }

    pub fn index(&self, coords: &[usize]) -> usize {
        coords
            .iter()
            .zip(&self.sizes)
            .fold(0, |acc, (&x, &l)| acc * l + x)
    }

    pub fn coords(&self, mut index: usize) -> Vec<usize> {
        let mut c = vec![0; self.sizes.len()];
        for m in (0..self.sizes.len()).rev() {
            c[m] = index % self.sizes[m];
            index /= self.sizes[m];
        }
        c
    }
}

/// Nonzero entries of the OBC matrix as `(row, col, value)`.
///
/// Block `(x', x)` holds `t_{x−x'}`, so that a plane wave `β^x` reproduces the
/// Bloch matrix: `Σ_x H_{x',x} β^{x} = H(β) β^{x'}`.
pub fn obc_entries(
    model: &TightBindingModel,
    sizes: &[usize],
) -> Result<(usize, Vec<(usize, usize, Complex64)>)> {
    model.check_len("sizes", sizes.len())?;
    if sizes.iter().any(|&l| l == 0) {
        return Err(Error::DimensionMismatch("lattice sizes must be positive".into()));
    }
    for v in model.hoppings.keys() {
        if v.iter().zip(sizes).any(|(&j, &l)| j.unsigned_abs() as usize >= l) {
            return Err(Error::LatticeTooSmall { hop: v.clone(), sizes: sizes.to_vec() });
        }
    }
    let lattice = Lattice::new(sizes.to_vec());
    let s = model.orbitals;
    let n = lattice.sites() * s;
    let mut entries = Vec::new();
    let mut target = vec![0usize; sizes.len()];
    for row_site in 0..lattice.sites() {
        let xp = lattice.coords(row_site);
        'hop: for (v, t) in &model.hoppings {
            for m in 0..sizes.len() {
                let x = xp[m] as i64 + v[m] as i64;
                if x < 0 || x >= sizes[m] as i64 {
                    continue 'hop;
                }
                target[m] = x as usize;
            }
            let col_site = lattice.index(&target);
            for a in 0..s {
                for b in 0..s {
                    let z = t[(a, b)];
                    if z != Complex64::new(0.0, 0.0) {
                        entries.push((row_site * s + a, col_site * s + b, z));
                    }
                }
            }
        }
    }
    Ok((n, entries))
}

/// Dense real-space Hamiltonian with open boundaries.
pub fn obc_hamiltonian(model: &TightBindingModel, sizes: &[usize]) -> Result<CMat> {
    let (n, entries) = obc_entries(model, sizes)?;
    let mut h = Mat::<Complex64>::zeros(n, n);
    for (i, j, z) in entries {
        h[(i, j)] += z;
    }
    Ok(h)
}
