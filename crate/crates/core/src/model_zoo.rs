//! Named example models with their reference parameters and energies.

use std::collections::BTreeMap;

use faer::Mat;
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lattice_model::{HoppingTerm, TightBindingModel};
use crate::linalg::CMat;
use crate::symmetry::{SymmetryKind, SymmetryOperator};

/// A figure-quoted OBC eigenvalue at given parameter overrides and lattice size.
#[derive(Clone, Debug, Serialize)]
pub struct ReferenceValue {
    pub quantity: &'static str,
    pub overrides: Vec<(&'static str, f64)>,
    pub sizes: Vec<usize>,
    pub value: Complex64,
    pub provenance: &'static str,
}

#[derive(Clone, Debug, Serialize)]
pub struct ZooEntry {
    pub id: &'static str,
    pub description: &'static str,
    pub dimension: usize,
    pub parameters: Vec<(&'static str, f64)>,
    pub symmetries: Vec<SymmetryKind>,
    pub references: Vec<ReferenceValue>,
}

/// A constructed zoo model with its declared symmetry operators.
#[derive(Clone, Debug)]
pub struct BuiltModel {
    pub id: &'static str,
    pub model: TightBindingModel,
    pub params: BTreeMap<String, f64>,
    pub symmetries: Vec<SymmetryOperator>,
}

pub const MATCH_TOL: f64 = 0.02;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn m2(a: Complex64, b: Complex64, cc: Complex64, d: Complex64) -> CMat {
    Mat::from_fn(2, 2, |i, j| [[a, b], [cc, d]][i][j])
}

fn diag(a: f64, b: f64) -> CMat {
    m2(c(a, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(b, 0.0))
}

fn pauli_x() -> CMat {
    m2(c(0., 0.), c(1., 0.), c(1., 0.), c(0., 0.))
}

fn pauli_z() -> CMat {
    diag(1.0, -1.0)
}

fn i_sigma_y() -> CMat {
    m2(c(0., 0.), c(1., 0.), c(-1., 0.), c(0., 0.))
}

fn r(x: f64) -> Complex64 {
    c(x, 0.0)
}

const Z: Complex64 = Complex64::new(0.0, 0.0);

fn reference(overrides: &[(&'static str, f64)], sizes: &[usize], re: f64, im: f64) -> ReferenceValue {
    ReferenceValue {
        quantity: "obc_eigenvalue",
        overrides: overrides.to_vec(),
        sizes: sizes.to_vec(),
        value: c(re, im),
        provenance: "figure",
    }
}

pub fn list() -> Vec<ZooEntry> {
    use SymmetryKind::*;
    let l2 = [40, 40];
    let l1 = [40];
    vec![
        ZooEntry {
            id: "hatano_nelson",
            description: "single-band chain with asymmetric hopping t_plus e^{ik} + t_minus e^{-ik}",
            dimension: 1,
            parameters: vec![("t_plus", 1.0), ("t_minus", 2.0)],
            symmetries: vec![Trs],
            references: vec![],
        },
        ZooEntry {
            id: "eq16",
            description: "two-band square-lattice model with TRS (U = 1)",
            dimension: 2,
            parameters: vec![("t1", 2.0), ("tm1", 1.0), ("w1", 1.5), ("wm1", 3.3), ("p1", 1.8), ("pm1", 2.6), ("c", 0.5)],
            symmetries: vec![Trs],
            references: vec![reference(&[], &l2, -1.5, -0.195), reference(&[], &l2, -1.5, 0.195)],
        },
        ZooEntry {
            id: "eq18",
            description: "two coupled Hatano-Nelson chains of opposite chirality, TRS-dagger (U = sigma_x)",
            dimension: 1,
            parameters: vec![("t_plus", 1.0), ("t_minus", 2.0), ("gamma", 0.0)],
            symmetries: vec![TrsDagger],
            references: vec![reference(&[], &l1, 2.53, 0.0), reference(&[("gamma", 0.1)], &l1, 1.87, 0.64)],
        },
        ZooEntry {
            id: "s37",
            description: "two-band model with PHS (U = i sigma_y)",
            dimension: 2,
            parameters: vec![("m", 1.5), ("gamma", 1.0), ("tx", 3.0), ("ty", 2.5), ("t", 1.0), ("t_tilde", 2.0)],
            symmetries: vec![Phs],
            references: vec![reference(&[], &l2, 2.24, 5.05), reference(&[], &l2, -2.24, -5.05)],
        },
        ZooEntry {
            id: "s39",
            description: "the PHS model at gamma = 0, with CS (U = i sigma_y)",
            dimension: 2,
            parameters: vec![("m", 1.5), ("tx", 3.0), ("ty", 2.5), ("t", 1.0), ("t_tilde", 2.0)],
            symmetries: vec![Cs],
            references: vec![reference(&[], &l2, 4.36, 3.21), reference(&[], &l2, -4.36, 3.21)],
        },
        ZooEntry {
            id: "s41",
            description: "two-band model with PHS-dagger (U = sigma_z)",
            dimension: 2,
            parameters: vec![("t0_tilde", -1.0), ("t0", 3.0), ("tx", 2.0), ("ty", 2.3), ("gamma", 2.0)],
            symmetries: vec![PhsDagger],
            references: vec![reference(&[], &l2, 1.37, -3.33), reference(&[], &l2, -1.37, -3.33)],
        },
        ZooEntry {
            id: "s43",
            description: "two-band model with SLS (U = sigma_z)",
            dimension: 2,
            parameters: vec![
                ("t0", 3.0),
                ("m", 1.5),
                ("gamma1", 1.0),
                ("gamma2", -2.0),
                ("t1", 2.0),
                ("tm1", 3.0),
                ("w1", 2.3),
                ("wm1", 4.0),
            ],
            symmetries: vec![Sls],
            references: vec![reference(&[], &l2, -4.87, 0.70), reference(&[], &l2, 4.87, -0.70)],
        },
        ZooEntry {
            id: "s45",
            description: "two-band model with pseudo-Hermiticity (U = sigma_x)",
            dimension: 2,
            parameters: vec![("t0", 3.0), ("gamma", 2.0), ("m1", 1.5), ("m2", -3.0), ("t1", 2.0), ("tm1", 3.0), ("w", 2.3)],
            symmetries: vec![PseudoHermitian],
            references: vec![reference(&[], &l2, 3.19, 0.80), reference(&[], &l2, 3.19, -0.80)],
        },
        ZooEntry {
            id: "s47",
            description: "two-dimensional TRS-dagger model (U = sigma_x) with bidirectional skin modes",
            dimension: 2,
            parameters: vec![("t1", 1.0), ("tm1", 3.0), ("w1", 1.0), ("wm1", 2.0), ("gamma", 0.0)],
            symmetries: vec![TrsDagger],
            references: vec![
                reference(&[], &l2, 2.29, 0.0),
                reference(&[("gamma", 0.1)], &l2, 2.35, 1.68),
                reference(&[("gamma", 2.0)], &l2, 2.65, 1.0),
                reference(&[("gamma", 2.0)], &l2, -8.09, 0.0),
            ],
        },
    ]
}

pub fn entry(id: &str) -> Result<ZooEntry> {
    list()
        .into_iter()
        .find(|e| e.id == id)
        .ok_or_else(|| Error::UnknownModel(id.to_string()))
}

fn terms(list: Vec<(Vec<i32>, CMat)>) -> Vec<HoppingTerm> {
    list.into_iter()
        .filter(|(_, m)| crate::linalg::entries(m).any(|z| z.norm() > 0.0))
        .map(|(v, m)| HoppingTerm::new(v, m))
        .collect()
}

/// Build a zoo model, overriding any subset of its declared parameters.
pub fn build(id: &str, overrides: &BTreeMap<String, f64>) -> Result<BuiltModel> {
    let e = entry(id)?;
    let mut p: BTreeMap<String, f64> = e.parameters.iter().map(|(k, v)| (k.to_string(), *v)).collect();
    for (k, v) in overrides {
        if !p.contains_key(k) {
            return Err(Error::UnknownParameter { id: id.to_string(), name: k.clone() });
        }
        if !v.is_finite() {
            return Err(Error::InvariantViolation(format!("parameter {k} must be finite")));
        }
        p.insert(k.clone(), *v);
    }
    let g = |k: &str| p[k];
    let (dim, hops, u): (usize, Vec<(Vec<i32>, CMat)>, Vec<CMat>) = match e.id {
        "hatano_nelson" => {
            let hops = vec![
                (vec![1], Mat::from_fn(1, 1, |_, _| r(g("t_plus")))),
                (vec![-1], Mat::from_fn(1, 1, |_, _| r(g("t_minus")))),
            ];
            let model = TightBindingModel::new(id, 1, 1, terms(hops))?;
            let op = SymmetryOperator::new(SymmetryKind::Trs, Mat::from_fn(1, 1, |_, _| r(1.0)))?;
            return Ok(BuiltModel { id: e.id, model, params: p, symmetries: vec![op] });
        }
        "eq16" => (
            2,
            vec![
                (vec![1, 0], diag(g("t1"), g("w1"))),
                (vec![-1, 0], diag(g("tm1"), g("wm1"))),
                (vec![0, 0], m2(Z, r(g("c")), r(g("c")), Z)),
                (vec![0, -1], m2(Z, r(g("pm1")), Z, Z)),
                (vec![0, 1], m2(Z, Z, r(g("p1")), Z)),
            ],
            vec![crate::linalg::identity(2)],
        ),
        "eq18" => (
            1,
            vec![
                (vec![1], diag(g("t_plus"), g("t_minus"))),
                (vec![-1], diag(g("t_minus"), g("t_plus"))),
                (vec![0], m2(Z, r(g("gamma")), r(g("gamma")), Z)),
            ],
            vec![pauli_x()],
        ),
        // The lower diagonal entry hops backwards: −m − iγ − t_x e^{−ik_x} − t_y e^{−ik_y}.
        // With both entries hopping forwards the OBC matrix is defective and the
        // stated U does not realise PHS.
        "s37" | "s39" => {
            let gamma = if e.id == "s37" { g("gamma") } else { 0.0 };
            let (m, tx, ty) = (g("m"), g("tx"), g("ty"));
            (
                2,
                vec![
                    (vec![0, 0], m2(c(m, gamma), r(g("t")), r(g("t_tilde")), c(-m, -gamma))),
                    (vec![1, 0], diag(tx, 0.0)),
                    (vec![-1, 0], diag(0.0, -tx)),
                    (vec![0, 1], diag(ty, 0.0)),
                    (vec![0, -1], diag(0.0, -ty)),
                ],
                vec![i_sigma_y()],
            )
        }
        // Lower off-diagonal entry hops forwards: t̃₀ + t_x e^{ik_x} + t_y e^{ik_y}.
        "s41" => {
            let (tx, ty, gamma) = (g("tx"), g("ty"), g("gamma"));
            (
                2,
                vec![
                    (vec![0, 0], m2(c(0.0, gamma), r(g("t0")), r(g("t0_tilde")), c(0.0, -2.0 * gamma))),
                    (vec![-1, 0], m2(Z, r(tx), Z, Z)),
                    (vec![0, -1], m2(Z, r(ty), Z, Z)),
                    (vec![1, 0], m2(Z, Z, r(tx), Z)),
                    (vec![0, 1], m2(Z, Z, r(ty), Z)),
                ],
                vec![pauli_z()],
            )
        }
        "s43" => {
            let (t0, m) = (g("t0"), g("m"));
            (
                2,
                vec![
                    (vec![0, 0], m2(Z, c(t0 + m, g("gamma1")), c(t0 - m, g("gamma2")), Z)),
                    (vec![-1, 0], m2(Z, r(g("tm1")), Z, Z)),
                    (vec![0, -1], m2(Z, r(g("wm1")), Z, Z)),
                    (vec![1, 0], m2(Z, Z, r(g("t1")), Z)),
                    (vec![0, 1], m2(Z, Z, r(g("w1")), Z)),
                ],
                vec![pauli_z()],
            )
        }
        "s45" => {
            let (t0, gamma, w) = (g("t0"), g("gamma"), g("w"));
            (
                2,
                vec![
                    (vec![0, 0], m2(c(t0, gamma), r(g("m1")), r(g("m2")), c(t0, -gamma))),
                    (vec![-1, 0], diag(g("tm1"), g("t1"))),
                    (vec![1, 0], diag(g("t1"), g("tm1"))),
                    (vec![0, -1], m2(Z, r(w), r(w), Z)),
                    (vec![0, 1], m2(Z, r(w), r(w), Z)),
                ],
                vec![pauli_x()],
            )
        }
        "s47" => (
            2,
            vec![
                (vec![1, 0], diag(g("t1"), g("tm1"))),
                (vec![-1, 0], diag(g("tm1"), g("t1"))),
                (vec![0, 1], diag(g("w1"), g("wm1"))),
                (vec![0, -1], diag(g("wm1"), g("w1"))),
                (vec![0, 0], m2(Z, r(g("gamma")), r(g("gamma")), Z)),
            ],
            vec![pauli_x()],
        ),
        other => return Err(Error::UnknownModel(other.to_string())),
    };
    let model = TightBindingModel::new(id, dim, 2, terms(hops))?;
    let symmetries = e
        .symmetries
        .iter()
        .zip(u)
        .map(|(&k, u)| SymmetryOperator::new(k, u))
        .collect::<Result<Vec<_>>>()?;
    Ok(BuiltModel { id: e.id, model, params: p, symmetries })
}

/// Shorthand for `build` with `(name, value)` overrides.
pub fn build_with(id: &str, overrides: &[(&str, f64)]) -> Result<BuiltModel> {
    let p = overrides.iter().map(|(k, v)| (k.to_string(), *v)).collect();
    build(id, &p)
}

/// Closed-form bands of the two-dimensional TRS-dagger model, principal square root.
pub fn analytic_bands_s47(kx: f64, ky: f64, params: &BTreeMap<String, f64>) -> [Complex64; 2] {
    let e = entry("s47").expect("s47 is registered");
    let g = |k: &str| {
        params
            .get(k)
            .copied()
            .unwrap_or_else(|| e.parameters.iter().find(|(n, _)| *n == k).map(|(_, v)| *v).unwrap())
    };
    let (t1, tm1, w1, wm1, gamma) = (g("t1"), g("tm1"), g("w1"), g("wm1"), g("gamma"));
    let base = (t1 + tm1) * kx.cos() + (w1 + wm1) * ky.cos();
    let s = (t1 - tm1) * kx.sin() + (w1 - wm1) * ky.sin();
    let root = c(gamma * gamma - s * s, 0.0).sqrt();
    [c(base, 0.0) + root, c(base, 0.0) - root]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice_model::bloch_hamiltonian;
    use crate::linalg::{max_abs_diff, multiset_distance, small_eigenvalues};
    use crate::symmetry::check_symmetry;
    use proptest::prelude::*;

    #[test]
    fn eq16_at_origin() {
        let b = build_with("eq16", &[]).unwrap();
        let h = bloch_hamiltonian(&b.model, &[0.0, 0.0]).unwrap();
        let want = m2(r(3.0), r(3.1), r(2.3), r(4.8));
        assert!(max_abs_diff(&h, &want) < 1e-14);
    }

    #[test]
    fn declared_symmetries_hold() {
        for e in list() {
            let b = build(e.id, &BTreeMap::new()).unwrap();
            assert_eq!(b.symmetries.len(), e.symmetries.len());
            for op in &b.symmetries {
                let chk = check_symmetry(op, &b.model, 1e-10).unwrap();
                assert!(chk.holds, "{} {} residual {}", e.id, op.kind, chk.max_residual);
            }
        }
        let b = build_with("eq16", &[("c", 0.0)]).unwrap();
        assert_eq!(check_symmetry(&b.symmetries[0], &b.model, 1e-10).unwrap().max_residual, 0.0);
    }

    #[test]
    fn printed_forward_hopping_forms_lack_their_symmetry() {
        // Both diagonal entries hopping forwards, as in the printed Bloch form.
        let hops = vec![
            HoppingTerm::new(vec![0, 0], m2(c(1.5, 1.0), r(1.0), r(2.0), c(-1.5, -1.0))),
            HoppingTerm::new(vec![1, 0], diag(3.0, -3.0)),
            HoppingTerm::new(vec![0, 1], diag(2.5, -2.5)),
        ];
        let m = TightBindingModel::new("printed", 2, 2, hops).unwrap();
        let op = SymmetryOperator::new(SymmetryKind::Phs, i_sigma_y()).unwrap();
        assert!(!check_symmetry(&op, &m, 1e-10).unwrap().holds);
    }

    #[test]
    fn unknown_ids_and_params() {
        assert!(matches!(build_with("nope", &[]), Err(Error::UnknownModel(_))));
        assert!(matches!(build_with("eq18", &[("zeta", 1.0)]), Err(Error::UnknownParameter { .. })));
    }

    #[test]
    fn s47_bands_at_origin() {
        let mut p = BTreeMap::new();
        p.insert("gamma".to_string(), 2.0);
        let b = analytic_bands_s47(0.0, 0.0, &p);
        assert!((b[0] - r(9.0)).norm() < 1e-14 && (b[1] - r(5.0)).norm() < 1e-14);
        let b0 = analytic_bands_s47(0.0, 0.0, &BTreeMap::new());
        assert_eq!(b0[0], b0[1]);
        assert_eq!(b0[0], r(7.0));
    }

    #[test]
    fn s47_bands_match_solver_on_grid() {
        for gamma in [0.0, 0.1, 2.0] {
            let mut p = BTreeMap::new();
            p.insert("gamma".to_string(), gamma);
            let b = build("s47", &p).unwrap();
            let mut worst: f64 = 0.0;
            for i in 0..32 {
                for j in 0..32 {
                    let k = [2.0 * std::f64::consts::PI * i as f64 / 32.0, 2.0 * std::f64::consts::PI * j as f64 / 32.0];
                    let h = bloch_hamiltonian(&b.model, &k).unwrap();
                    let ev = small_eigenvalues(&h).unwrap();
                    let an = analytic_bands_s47(k[0], k[1], &p);
                    worst = worst.max(band_distance(&ev, &an));
                }
            }
            assert!(worst <= 1e-10, "gamma {gamma}: {worst}");
        }
    }

    // At an exceptional point the roots move like sqrt of the rounding error,
    // so coalesced pairs are compared through their symmetric functions.
    fn band_distance(a: &[Complex64], b: &[Complex64]) -> f64 {
        if (a[0] - a[1]).norm() > 1e-4 && (b[0] - b[1]).norm() > 1e-4 {
            multiset_distance(a, b)
        } else {
            ((a[0] + a[1]) - (b[0] + b[1])).norm().max((a[0] * a[1] - b[0] * b[1]).norm())
        }
    }

    proptest! {
        #[test]
        fn symmetries_hold_under_overrides(seed in 0u64..200) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            for e in list() {
                let p: BTreeMap<String, f64> = e.parameters.iter().map(|(k, _)| (k.to_string(), rng.gen_range(-3.0..3.0))).collect();
                let b = build(e.id, &p).unwrap();
                for op in &b.symmetries {
                    prop_assert!(check_symmetry(op, &b.model, 1e-10).unwrap().holds);
                }
            }
        }

        #[test]
        fn s47_bands_random_k(kx in 0.0..6.3f64, ky in 0.0..6.3f64, gamma in 0.0..3.0f64) {
            let mut p = BTreeMap::new();
            p.insert("gamma".to_string(), gamma);
            let b = build("s47", &p).unwrap();
            let ev = small_eigenvalues(&bloch_hamiltonian(&b.model, &[kx, ky]).unwrap()).unwrap();
            prop_assert!(band_distance(&ev, &analytic_bands_s47(kx, ky, &p)) <= 1e-10);
        }
    }
}
