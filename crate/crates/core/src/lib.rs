//! Numerical model of an x-ray Hong-Ou-Mandel experiment: a Bragg-assisted
//! down-conversion source, Pt/C multilayer mirrors and beam splitter, and the
//! coincidence rate versus inter-photon delay.

pub mod constants;
pub mod elements;
pub mod error;
pub mod hom;
pub mod materials;
pub mod multilayer;
pub mod quadrature;
pub mod spdc;

pub use error::{Error, Result};
