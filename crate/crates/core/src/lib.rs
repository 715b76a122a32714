//! Non-Hermitian skin effect toolkit: tight-binding models, OBC spectra and
//! skin-mode localization, amoeba/Ronkin winding numbers, internal-symmetry
//! partner predictions and TRS-dagger band invariants.

pub mod amoeba;
pub mod band_topology;
pub mod error;
pub mod io;
pub mod lattice_model;
pub mod linalg;
pub mod model_zoo;
pub mod spectral;
pub mod symmetry;
pub mod verify;

pub use error::{Error, Result};
pub use lattice_model::{bloch_hamiltonian, generalized_bloch, obc_hamiltonian, ComplexMomentum, HoppingTerm, TightBindingModel};
pub use num_complex::Complex64;
pub use symmetry::{SymmetryKind, SymmetryOperator};
