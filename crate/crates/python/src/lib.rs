//! Python bindings. Reports come back as plain dicts and lists; energies as
//! Python complex numbers (inside report dicts they are `[re, im]` pairs).

use std::collections::BTreeMap;

use nhse_core::band_topology::{self, MIN_TRACK_GRID};
use nhse_core::spectral::{self, Selector};
use nhse_core::symmetry::find_intertwiner;
use nhse_core::{amoeba, io, model_zoo, verify, Complex64, Error, SymmetryKind, TightBindingModel};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use serde::Serialize;

fn err(e: Error) -> PyErr {
    PyValueError::new_err(format!("{}: {e}", e.code()))
}

fn to_py<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    py.import("json")?.call_method1("loads", (io::to_json(value),))
}

fn zeros_or(v: Option<Vec<f64>>, n: usize) -> Vec<f64> {
    v.unwrap_or_else(|| vec![0.0; n])
}

/// A validated tight-binding model.
#[pyclass(name = "Model", module = "nhse", frozen)]
struct PyModel {
    inner: TightBindingModel,
}

#[pymethods]
impl PyModel {
    /// Build a zoo model, optionally overriding parameters.
    #[staticmethod]
    #[pyo3(signature = (id, params=None))]
    fn zoo(id: &str, params: Option<BTreeMap<String, f64>>) -> PyResult<Self> {
        let b = model_zoo::build(id, &params.unwrap_or_default()).map_err(err)?;
        Ok(PyModel { inner: b.model })
    }

    /// Parse a model file's JSON text. Declared symmetries that fail are ignored here.
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(PyModel { inner: io::parse_model_str(text).map_err(err)?.model })
    }

    fn to_json(&self) -> String {
        io::model_to_json(&self.inner, &[])
    }

    #[getter]
    fn name(&self) -> String {
        self.inner.name().to_string()
    }

    #[getter]
    fn dimension(&self) -> usize {
        self.inner.dimension()
    }

    #[getter]
    fn orbitals(&self) -> usize {
        self.inner.orbitals()
    }

    fn __repr__(&self) -> String {
        format!("Model('{}', d={}, s={})", self.inner.name(), self.inner.dimension(), self.inner.orbitals())
    }
}

/// Zoo entries with parameters and quoted reference values.
#[pyfunction]
fn zoo_list(py: Python<'_>) -> PyResult<Bound<'_, PyAny>> {
    to_py(py, &model_zoo::list())
}

/// OBC eigenvalues sorted by real, then imaginary part.
#[pyfunction]
fn obc_spectrum(model: &PyModel, sizes: Vec<usize>) -> PyResult<Vec<Complex64>> {
    let mut v = spectral::obc_eigenvalues(&model.inner, &sizes).map_err(err)?.eigenvalues;
    spectral::sort_complex(&mut v);
    Ok(v)
}

/// Bloch eigenvalues on the grid `k = 2πn/N`, in grid order.
#[pyfunction]
fn pbc_spectrum(model: &PyModel, grid: Vec<usize>) -> PyResult<Vec<Complex64>> {
    Ok(spectral::pbc_spectrum(&model.inner, &grid).map_err(err)?.eigenvalues)
}

/// Localization report of the OBC eigenstate nearest `energy`.
#[pyfunction]
fn localize<'py>(py: Python<'py>, model: &PyModel, sizes: Vec<usize>, energy: Complex64) -> PyResult<Bound<'py, PyAny>> {
    let r = spectral::obc_spectrum(&model.inner, &sizes).map_err(err)?;
    let p = spectral::density_profile(&r, Selector::Nearest(energy)).map_err(err)?;
    let rep = spectral::fit_decay_factor(&p, &Default::default()).map_err(err)?;
    let out = to_py(py, &rep)?;
    out.set_item("energy", r.eigenvalues[r.select(Selector::Nearest(energy)).map_err(err)?])?;
    out.set_item("profile", p.values)?;
    Ok(out)
}

/// `{"value": int | "ill_defined", "min_abs_det": float, "grid": int}`.
#[pyfunction]
#[pyo3(signature = (model, energy, axis=0, mu=None, transverse=None, kpoints=amoeba::MIN_GRID))]
fn winding_number<'py>(
    py: Python<'py>,
    model: &PyModel,
    energy: Complex64,
    axis: usize,
    mu: Option<Vec<f64>>,
    transverse: Option<Vec<f64>>,
    kpoints: usize,
) -> PyResult<Bound<'py, PyAny>> {
    let d = model.inner.dimension();
    let mu = zeros_or(mu, d);
    let t = zeros_or(transverse, d.saturating_sub(1));
    to_py(py, &amoeba::winding_number(&model.inner, energy, &mu, axis, &t, kpoints).map_err(err)?)
}

/// Ronkin value and gradient at `mu`.
#[pyfunction]
#[pyo3(signature = (model, energy, mu=None, grid=128))]
fn ronkin<'py>(py: Python<'py>, model: &PyModel, energy: Complex64, mu: Option<Vec<f64>>, grid: usize) -> PyResult<Bound<'py, PyAny>> {
    let d = model.inner.dimension();
    to_py(py, &amoeba::ronkin_evaluate(&model.inner, energy, &zeros_or(mu, d), &vec![grid; d]).map_err(err)?)
}

#[pyfunction]
#[pyo3(signature = (model, energy, mu=None, grid=128, gtol=1e-4))]
fn ronkin_minimize<'py>(
    py: Python<'py>,
    model: &PyModel,
    energy: Complex64,
    mu: Option<Vec<f64>>,
    grid: usize,
    gtol: f64,
) -> PyResult<Bound<'py, PyAny>> {
    let d = model.inner.dimension();
    to_py(py, &amoeba::ronkin_minimize(&model.inner, energy, &zeros_or(mu, d), &vec![grid; d], gtol).map_err(err)?)
}

/// `[(k_transverse, nu or None), ...]` over the transverse grid.
#[pyfunction]
#[pyo3(signature = (model, energy, axis=0, points=16, kpoints=MIN_TRACK_GRID))]
fn nu_table(model: &PyModel, energy: Complex64, axis: usize, points: usize, kpoints: usize) -> PyResult<Vec<(Vec<f64>, Option<f64>)>> {
    let t = band_topology::nu_table(&model.inner, energy, axis, points, kpoints).map_err(err)?;
    Ok(t.into_iter().map(|r| (r.transverse, r.nu)).collect())
}

/// Skin-mode partner check over sampled bulk states.
#[pyfunction]
#[pyo3(signature = (model, symmetry, sizes, n_samples=40))]
fn table1_check<'py>(py: Python<'py>, model: &PyModel, symmetry: &str, sizes: Vec<usize>, n_samples: usize) -> PyResult<Bound<'py, PyAny>> {
    let kind: SymmetryKind = symmetry.parse().map_err(err)?;
    let op = find_intertwiner(kind, &model.inner, 1e-8).map_err(err)?;
    to_py(py, &verify::table1_check(&model.inner, &op, &sizes, n_samples).map_err(err)?)
}

/// Parse `a`, `a+bi`, `a-bi` or `bi`.
#[pyfunction]
fn parse_complex(s: &str) -> PyResult<Complex64> {
    io::parse_complex(s).map_err(err)
}

#[pymodule]
fn nhse(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyModel>()?;
    m.add_function(wrap_pyfunction!(zoo_list, m)?)?;
    m.add_function(wrap_pyfunction!(obc_spectrum, m)?)?;
    m.add_function(wrap_pyfunction!(pbc_spectrum, m)?)?;
    m.add_function(wrap_pyfunction!(localize, m)?)?;
    m.add_function(wrap_pyfunction!(winding_number, m)?)?;
    m.add_function(wrap_pyfunction!(ronkin, m)?)?;
    m.add_function(wrap_pyfunction!(ronkin_minimize, m)?)?;
    m.add_function(wrap_pyfunction!(nu_table, m)?)?;
    m.add_function(wrap_pyfunction!(table1_check, m)?)?;
    m.add_function(wrap_pyfunction!(parse_complex, m)?)?;
    Ok(())
}
