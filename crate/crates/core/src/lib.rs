//! Torsion forms of flat cochain complexes over flat tori, and the spectral
//! invariant of the deformed signature operator whose adiabatic limit they
//! describe.

pub mod adiabatic;
pub mod charforms;
pub mod cplx;
pub mod error;
pub mod exterior;
pub mod flat;
pub mod quad;
pub mod superconn;
pub mod supermatrix;
pub mod torsion;
pub mod trigpoly;

pub use error::{Error, Result};
pub use exterior::{phi_normalize, wedge_sign, Form, FormContext, Phi};
pub use faer::c64;
pub use supermatrix::{GradedSpace, SuperElement};
pub use flat::{FlatComplexSpec, PointData, ValidationReport};
pub use trigpoly::TrigPolyField;
