use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("line {line}: energy {energy_ev} eV does not increase on the previous row")]
    NonMonotone { line: usize, energy_ev: f64 },

    #[error("scattering table contains no data rows")]
    EmptyTable,

    #[error("unknown element symbol `{0}`")]
    UnknownElement(String),

    #[error("{element}: {energy_kev} keV is outside the tabulated range {min_kev}..{max_kev} keV")]
    OutOfRange {
        element: String,
        energy_kev: f64,
        min_kev: f64,
        max_kev: f64,
    },

    #[error("{element}: {energy_kev} keV falls next to a flagged (f1 = -9999) row")]
    TableGap { element: String, energy_kev: f64 },

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("no Bragg solution: |G| = {g:.6e} m^-1 exceeds 2 k_p = {two_k:.6e} m^-1")]
    NoBraggSolution { g: f64, two_k: f64 },

    #[error("evanescent geometry: no real phase-matching solution at {energy_kev} keV")]
    NoPhaseMatch { energy_kev: f64 },

    #[error("no real refraction-corrected Bragg angle for order {order}")]
    NoBraggAngle { order: u32 },

    #[error("no reflectivity peak found in the scanned range")]
    PeakNotFound,

    #[error("accepted energy window is empty")]
    EmptyWindow,

    #[error("no dip: visibility {visibility:.3e} is below the 0.01 threshold")]
    NoDip { visibility: f64 },

    #[error("grazing angle {angle_rad:.6e} rad is not positive")]
    NonPositiveAngle { angle_rad: f64 },

    #[error("grid not converged: {0}")]
    NonConvergent(String),
}
