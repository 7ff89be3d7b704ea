//! Physical constants. Public boundaries take energies in keV; everything
//! below them is SI.

/// Planck constant times speed of light, keV·nm.
pub const HC_KEV_NM: f64 = 1.239_841_93;
/// Classical electron radius, m.
pub const R_E: f64 = 2.817_940_326_2e-15;
/// Avogadro constant, 1/mol.
pub const N_A: f64 = 6.022_140_76e23;
/// Speed of light, m/s.
pub const C_LIGHT: f64 = 299_792_458.0;
/// Reduced Planck constant, eV·s.
pub const HBAR_EV_S: f64 = 6.582_119_569e-16;

/// Vacuum wavelength in m.
#[inline]
pub fn wavelength_m(energy_kev: f64) -> f64 {
    HC_KEV_NM / energy_kev * 1e-9
}

/// Vacuum wavenumber in 1/m.
#[inline]
pub fn wavenumber(energy_kev: f64) -> f64 {
    std::f64::consts::TAU / wavelength_m(energy_kev)
}

/// Angular frequency in rad/s.
#[inline]
pub fn angular_frequency(energy_kev: f64) -> f64 {
    energy_kev * 1e3 / HBAR_EV_S
}

/// Photon energy in keV for an angular frequency in rad/s.
#[inline]
pub fn energy_kev(omega: f64) -> f64 {
    omega * HBAR_EV_S * 1e-3
}
