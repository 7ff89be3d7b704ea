//! Bragg-assisted parametric down-conversion source.
//!
//! Coordinates are taken about K = k_p + G, the phase-matching symmetry axis.
//! The pump is a plane wave, so the idler transverse momentum is −q_s and
//!
//!   Δk_z = |K| − √(k_s² − q²) − √(k_i² − q²),   k_i = k(E_p − E_s),
//!
//! with vacuum wave numbers throughout.

use std::f64::consts::TAU;

use num_complex::Complex64;

use crate::constants::{angular_frequency, wavenumber, HBAR_EV_S};
use crate::error::{Error, Result};
use crate::quadrature::{self, GridSpec};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PumpConfig {
    pub energy_kev: f64,
    /// Deviation of the pump from the Bragg angle, rad; positive opens the
    /// emission cone.
    pub deviation_rad: f64,
    pub rate_per_s: f64,
    pub area_m2: f64,
}

impl PumpConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.energy_kev > 0.0) {
            return Err(Error::Invalid("pump energy must be positive".into()));
        }
        if !(self.rate_per_s >= 0.0) {
            return Err(Error::Invalid("pump rate must be non-negative".into()));
        }
        if !(self.area_m2 > 0.0) {
            return Err(Error::Invalid("pump area must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrystalConfig {
    pub material: String,
    pub thickness_m: f64,
    pub hkl: [i32; 3],
    pub lattice_m: f64,
    pub kappa_per_m: Complex64,
}

impl CrystalConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.thickness_m > 0.0) {
            return Err(Error::Invalid("crystal thickness must be positive".into()));
        }
        if self.hkl == [0, 0, 0] {
            return Err(Error::Invalid("Miller indices must not all be zero".into()));
        }
        if !(self.lattice_m > 0.0) {
            return Err(Error::Invalid("lattice constant must be positive".into()));
        }
        if !(self.kappa_per_m.norm() > 0.0) {
            return Err(Error::Invalid("coupling kappa must be non-zero".into()));
        }
        Ok(())
    }
}

/// Signal-photon mode; the idler is (−k_x, −k_y, E_p − E).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignalMode {
    pub kx: f64,
    pub ky: f64,
    pub energy_kev: f64,
}

impl SignalMode {
    pub fn new(kx: f64, ky: f64, energy_kev: f64, pump: &PumpConfig) -> Result<Self> {
        if !(energy_kev > 0.0 && energy_kev < pump.energy_kev) {
            return Err(Error::Invalid(format!(
                "signal energy {energy_kev} keV must lie strictly between 0 and {} keV",
                pump.energy_kev
            )));
        }
        Ok(Self { kx, ky, energy_kev })
    }

    pub fn idler_energy_kev(&self, pump: &PumpConfig) -> f64 {
        pump.energy_kev - self.energy_kev
    }

    pub fn omega(&self) -> f64 {
        angular_frequency(self.energy_kev)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseMatchState {
    pub delta_kz: f64,
    /// Signal angle to the axis, rad (positive: +x side).
    pub theta_s: f64,
    /// Idler angle to the axis, rad (negative: −x side).
    pub theta_i: f64,
    pub theta_bragg: f64,
}

/// |G| = 2π √(h² + k² + l²) / a.
pub fn reciprocal_lattice_vector(crystal: &CrystalConfig) -> f64 {
    let [h, k, l] = crystal.hkl.map(|v| v as f64);
    TAU * (h * h + k * k + l * l).sqrt() / crystal.lattice_m
}

/// sin θ_B = |G| / 2k_p.
pub fn pump_bragg_angle(pump: &PumpConfig, crystal: &CrystalConfig) -> Result<f64> {
    let g = reciprocal_lattice_vector(crystal);
    let two_k = 2.0 * wavenumber(pump.energy_kev);
    if g > two_k {
        return Err(Error::NoBraggSolution { g, two_k });
    }
    Ok((g / two_k).asin())
}

/// Point on the surface Δk_z = target at fixed signal energy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RidgePoint {
    pub k1: f64,
    pub k2: f64,
    /// Longitudinal signal / idler wave numbers.
    pub s1: f64,
    pub s2: f64,
    /// q² = k_x² + k_y².
    pub q2: f64,
}

impl RidgePoint {
    /// ∂Δk_z/∂k_x at this point for a given k_x.
    pub fn slope(&self, kx: f64) -> f64 {
        kx * (1.0 / self.s1 + 1.0 / self.s2)
    }
}

/// Pump and crystal with the axis wave number resolved.
#[derive(Debug, Clone)]
pub struct Source {
    pub pump: PumpConfig,
    pub crystal: CrystalConfig,
    k_axis: f64,
    theta_bragg: f64,
}

impl Source {
    pub fn new(pump: PumpConfig, crystal: CrystalConfig) -> Result<Self> {
        pump.validate()?;
        crystal.validate()?;
        let theta_bragg = pump_bragg_angle(&pump, &crystal)?;
        let kp = wavenumber(pump.energy_kev);
        let g = reciprocal_lattice_vector(&crystal);
        let th = theta_bragg + pump.deviation_rad;
        let k_axis = (kp * kp + g * g - 2.0 * kp * g * th.sin()).sqrt();
        Ok(Self { pump, crystal, k_axis, theta_bragg })
    }

    /// |K| in 1/m.
    pub fn k_axis(&self) -> f64 {
        self.k_axis
    }

    pub fn theta_bragg(&self) -> f64 {
        self.theta_bragg
    }

    pub fn pump_energy(&self) -> f64 {
        self.pump.energy_kev
    }

    pub fn pump_omega(&self) -> f64 {
        angular_frequency(self.pump.energy_kev)
    }

    /// Δk_z for a signal mode. Evanescent components contribute k_z = 0.
    pub fn delta_kz(&self, mode: &SignalMode) -> f64 {
        let k1 = wavenumber(mode.energy_kev);
        let k2 = wavenumber(self.pump.energy_kev - mode.energy_kev);
        let q2 = mode.kx * mode.kx + mode.ky * mode.ky;
        let s1 = (k1 * k1 - q2).max(0.0).sqrt();
        let s2 = (k2 * k2 - q2).max(0.0).sqrt();
        // k − √(k² − q²) = q²/(k + √(k² − q²)) keeps the small difference exact;
        // min() picks k itself when the component is clamped evanescent
        (self.k_axis - k1 - k2) + (k1 - s1).min(q2 / (k1 + s1)) + (k2 - s2).min(q2 / (k2 + s2))
    }

    /// Solves Δk_z = `target` at `energy_kev` in closed form; `None` when the
    /// surface has no propagating point there.
    pub fn ridge(&self, energy_kev: f64, target: f64) -> Option<RidgePoint> {
        let k1 = wavenumber(energy_kev);
        let k2 = wavenumber(self.pump.energy_kev - energy_kev);
        let kk = self.k_axis - target;
        if !(kk > 0.0) {
            return None;
        }
        let s1 = 0.5 * (kk + (k1 - k2) * (k1 + k2) / kk);
        let s2 = kk - s1;
        if !(s1 > 0.0 && s2 > 0.0 && s1 <= k1 && s2 <= k2) {
            return None;
        }
        let q2 = (k1 - s1) * (k1 + s1);
        Some(RidgePoint { k1, k2, s1, s2, q2 })
    }

    /// In-plane phase matching by bisection on the signal angle.
    pub fn phase_match(&self, energy_kev: f64) -> Result<PhaseMatchState> {
        let ep = self.pump.energy_kev;
        if !(energy_kev > 0.0 && energy_kev < ep) {
            return Err(Error::Invalid(format!("signal energy {energy_kev} keV outside (0, {ep})")));
        }
        let k1 = wavenumber(energy_kev);
        let k2 = wavenumber(ep - energy_kev);
        let f = |th: f64| {
            let kx = k1 * th.sin();
            self.delta_kz(&SignalMode { kx, ky: 0.0, energy_kev })
        };
        let mut lo = 0.0;
        let mut hi = (k1.min(k2) / k1).asin();
        let (flo, fhi) = (f(lo), f(hi));
        if flo > 0.0 || fhi < 0.0 {
            return Err(Error::NoPhaseMatch { energy_kev });
        }
        while hi - lo > 1e-13 {
            let mid = 0.5 * (lo + hi);
            if f(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let theta_s = 0.5 * (lo + hi);
        let kx = k1 * theta_s.sin();
        let theta_i = -(kx / k2).asin();
        Ok(PhaseMatchState {
            delta_kz: f(theta_s),
            theta_s,
            theta_i,
            theta_bragg: self.theta_bragg,
        })
    }

    /// φ̃ = (2π)³ κ L e^{iΔk_z L/2} sinc(Δk_z L/2).
    pub fn biphoton_amplitude(&self, mode: &SignalMode) -> Complex64 {
        self.amplitude_at(self.delta_kz(mode))
    }

    pub fn amplitude_at(&self, delta_kz: f64) -> Complex64 {
        let x = 0.5 * delta_kz * self.crystal.thickness_m;
        let env = TAU.powi(3) * self.crystal.thickness_m * sinc(x);
        self.crystal.kappa_per_m * Complex64::from_polar(env, x)
    }

    /// pairs/s per unit ∫ d²q dω sinc²: R |κ|² L² / (2π)³ after the pump area
    /// cancels between the flux-normalised κ² and the S/(2π)⁹ factor.
    pub fn rate_prefactor(&self) -> f64 {
        let s = self.pump.area_m2;
        let l = self.crystal.thickness_m;
        let coupling = self.crystal.kappa_per_m.norm_sqr() * self.pump.rate_per_s / s;
        coupling * TAU.powi(6) * l * l * s / TAU.powi(9)
    }

    /// Degenerate in-plane emission angle, the signal arm's design direction.
    pub fn degenerate_angle(&self) -> Result<f64> {
        Ok(self.phase_match(0.5 * self.pump.energy_kev)?.theta_s)
    }

    pub fn acceptance(&self, aperture: Aperture) -> Result<Acceptance> {
        Acceptance::new(self, aperture)
    }
}

/// sin(x)/x with sinc(0) = 1.
pub fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

/// Which arms carry the square pupil.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Pupil {
    /// Only the signal-arm photon is restricted: the singles view of the source.
    #[default]
    SignalArm,
    /// Both detector arms are restricted, so the accepted domain is closed
    /// under photon exchange.
    BothArms,
}

/// Square pupil about the design direction θ₀.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aperture {
    pub half_angle_rad: f64,
    pub pupil: Pupil,
}

impl Aperture {
    /// The configured size is a full width; half of it applies on each side
    /// in-plane and out-of-plane.
    pub fn from_full_width_deg(deg: f64) -> Self {
        Self { half_angle_rad: 0.5 * deg.to_radians(), pupil: Pupil::SignalArm }
    }

    pub fn with_pupil(self, pupil: Pupil) -> Self {
        Self { pupil, ..self }
    }
}

/// Energy/angle bounds of the accepted phase space.
#[derive(Debug, Clone)]
pub struct Acceptance {
    pub theta0: f64,
    pub half: f64,
    pub pump_kev: f64,
    /// In-plane window: ridge angle at k_y = 0 equals θ₀ ± half.
    pub window_kev: (f64, f64),
    /// Lowest energy reached with k_y ≠ 0 (corner of the pupil).
    pub support_lo_kev: f64,
    /// Energy where the out-of-plane limit stops binding on the upper band edge.
    pub kink_kev: Option<f64>,
    pub pupil: Pupil,
    source: Source,
}

impl Acceptance {
    fn new(source: &Source, aperture: Aperture) -> Result<Self> {
        let half = aperture.half_angle_rad;
        if !(half > 0.0) {
            return Err(Error::EmptyWindow);
        }
        let theta0 = source.degenerate_angle()?;
        let ep = source.pump.energy_kev;
        let t_hi = (theta0 + half).tan();
        let t_lo = (theta0 - half).tan();
        let ta = half.tan();
        // tan of the ridge angle at k_y = 0; decreasing in energy
        let slope = |e: f64| source.ridge(e, 0.0).map(|r| r.q2.sqrt() / r.s1);
        let find = |target: f64| -> Result<f64> {
            bisect(1e-3 * ep, ep * (1.0 - 1e-3), |e| slope(e).map(|s| s - target))
                .ok_or(Error::EmptyWindow)
        };
        let lo = find(t_hi)?;
        let hi = if t_lo > 0.0 { find(t_lo)? } else { ep * (1.0 - 1e-3) };
        let support_lo = find((t_hi * t_hi + ta * ta).sqrt())?;
        let kink = {
            let target = (t_lo * t_lo + ta * ta).sqrt();
            find(target).ok().filter(|&e| e > lo && e < hi)
        };
        Ok(Self {
            theta0,
            half,
            pump_kev: ep,
            window_kev: (lo, hi),
            support_lo_kev: support_lo,
            kink_kev: kink,
            pupil: aperture.pupil,
            source: source.clone(),
        })
    }

    pub fn source(&self) -> &Source {
        &self.source
    }

    /// Accepted |k_y| band at the ridge centre for a signal-arm photon of
    /// this energy, or `None` when nothing is accepted.
    pub fn ky_band(&self, energy_kev: f64) -> Option<(f64, f64)> {
        let r = self.source.ridge(energy_kev, 0.0)?;
        let kz2 = r.s1 * r.s1;
        let lo = r.q2 - kz2 * (self.theta0 + self.half).tan().powi(2);
        let hi = r.q2 - kz2 * (self.theta0 - self.half).tan().powi(2);
        if hi <= 0.0 {
            return None;
        }
        let a = lo.max(0.0).sqrt();
        let b = hi.sqrt().min(r.s1 * self.half.tan());
        (b > a).then_some((a, b))
    }

    /// Band where both the photon at E and its partner at E_p − E, sent through
    /// the signal arm, are accepted.
    pub fn symmetric_band(&self, energy_kev: f64) -> Option<(f64, f64)> {
        let (a1, b1) = self.ky_band(energy_kev)?;
        let (a2, b2) = self.ky_band(self.pump_kev - energy_kev)?;
        let (a, b) = (a1.max(a2), b1.min(b2));
        (b > a).then_some((a, b))
    }

    /// |k_y| band integrated at this energy under the configured pupil.
    pub fn accepted_band(&self, energy_kev: f64) -> Option<(f64, f64)> {
        match self.pupil {
            Pupil::SignalArm => self.ky_band(energy_kev),
            Pupil::BothArms => self.symmetric_band(energy_kev),
        }
    }

    /// Energy range holding every accepted node.
    pub fn support_kev(&self) -> (f64, f64) {
        let (lo, hi) = (self.support_lo_kev, self.window_kev.1);
        match self.pupil {
            Pupil::SignalArm => (lo, hi),
            Pupil::BothArms => (lo.max(self.pump_kev - hi), hi.min(self.pump_kev - lo)),
        }
    }

    /// In-plane accepted window; symmetric about E_p/2 when both arms are
    /// restricted.
    pub fn accepted_window(&self) -> (f64, f64) {
        let (lo, hi) = self.window_kev;
        match self.pupil {
            Pupil::SignalArm => (lo, hi),
            Pupil::BothArms => (lo.max(self.pump_kev - hi), hi.min(self.pump_kev - lo)),
        }
    }

    /// Energy breakpoints of the band functions, mirrored images included.
    pub fn breakpoints(&self) -> Vec<f64> {
        let ep = self.pump_kev;
        let mut v = vec![self.window_kev.0, 0.5 * ep];
        v.extend(self.kink_kev);
        let own = v.clone();
        v.extend(own.iter().map(|e| ep - e));
        v.push(ep - self.window_kev.1);
        v.push(ep - self.support_lo_kev);
        v
    }

    /// Signal in-plane angle at the ridge centre, k_y = 0.
    pub fn ridge_angle(&self, energy_kev: f64) -> Option<f64> {
        self.source.ridge(energy_kev, 0.0).map(|r| r.q2.sqrt().atan2(r.s1))
    }
}

/// Root of a monotone `f` on [a, b] by bisection.
fn bisect(a: f64, b: f64, f: impl Fn(f64) -> Option<f64>) -> Option<f64> {
    let (mut lo, mut hi) = (a, b);
    let (flo, fhi) = (f(lo)?, f(hi)?);
    if flo.signum() == fhi.signum() {
        return None;
    }
    let rising = fhi > flo;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid)?;
        if (fm < 0.0) == rising {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-13 * b {
            break;
        }
    }
    Some(0.5 * (lo + hi))
}

#[derive(Debug, Clone)]
pub struct Spectrum {
    pub energies_kev: Vec<f64>,
    /// pairs/s/keV.
    pub density_per_kev: Vec<f64>,
    /// Density scaled to unit maximum.
    pub normalized: Vec<f64>,
    /// pairs/s over the full accepted phase space.
    pub total_rate: f64,
    pub window_kev: (f64, f64),
    pub bandwidth_kev: f64,
    pub warnings: Vec<String>,
}

/// Rate density per unit ω at one energy (identity devices).
pub fn rate_density(acc: &Acceptance, energy_kev: f64, grid: GridSpec) -> f64 {
    let nodes = quadrature::transverse_nodes(acc, energy_kev, grid.n_kx, grid.n_ky);
    acc.source().rate_prefactor() * nodes.iter().map(|n| n.weight).sum::<f64>()
}

pub fn nlc_spectrum(
    source: &Source,
    aperture: Aperture,
    energies_kev: &[f64],
    grid: GridSpec,
) -> Result<Spectrum> {
    let ep = source.pump.energy_kev;
    if energies_kev.len() < 3 || energies_kev.iter().any(|&e| !(e > 0.0 && e < ep)) {
        return Err(Error::Invalid(format!("energy grid needs >= 3 points inside (0, {ep}) keV")));
    }
    if energies_kev.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Invalid("energy grid must increase".into()));
    }
    let acc = source.acceptance(aperture)?;
    let per_kev = 1e3 / HBAR_EV_S;
    let density: Vec<f64> = energies_kev
        .iter()
        .map(|&e| rate_density(&acc, e, grid) * per_kev)
        .collect();
    let peak = density.iter().cloned().fold(0.0, f64::max);
    if !(peak > 0.0) {
        return Err(Error::EmptyWindow);
    }
    let normalized: Vec<f64> = density.iter().map(|d| d / peak).collect();
    let qg = quadrature::build_grid(&acc, grid, &[])?;
    let total_rate = source.rate_prefactor() * qg.nodes.iter().map(|n| n.weight).sum::<f64>();

    let mut warnings = Vec::new();
    let bandwidth = half_max_width(energies_kev, &density);
    // refinement check: the same width on a doubled grid and with a doubled
    // transverse rule must agree
    let fine: Vec<f64> = refine_axis(energies_kev);
    let fine_density: Vec<f64> = fine
        .iter()
        .map(|&e| rate_density(&acc, e, grid.doubled()) * per_kev)
        .collect();
    let fine_bw = half_max_width(&fine, &fine_density);
    match (bandwidth, fine_bw) {
        (Some(a), Some(b)) if ((a - b) / b).abs() > 0.01 => warnings.push(format!(
            "energy grid too coarse: bandwidth {a:.4} keV vs {b:.4} keV on a refined grid"
        )),
        (None, _) => warnings.push("spectrum half-maximum not bracketed by the energy grid".into()),
        _ => {}
    }
    let fine_total = source.rate_prefactor()
        * quadrature::build_grid(&acc, grid.doubled(), &[])?
            .nodes
            .iter()
            .map(|n| n.weight)
            .sum::<f64>();
    if ((fine_total - total_rate) / fine_total).abs() > 1e-3 {
        warnings.push(format!(
            "quadrature unresolved: total rate {total_rate:.6e} vs {fine_total:.6e} on a doubled grid"
        ));
    }
    Ok(Spectrum {
        energies_kev: energies_kev.to_vec(),
        density_per_kev: density,
        normalized,
        total_rate,
        window_kev: acc.accepted_window(),
        bandwidth_kev: bandwidth.unwrap_or(f64::NAN),
        warnings,
    })
}

fn refine_axis(x: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(2 * x.len());
    for w in x.windows(2) {
        out.push(w[0]);
        out.push(0.5 * (w[0] + w[1]));
    }
    out.push(x[x.len() - 1]);
    out
}

/// Distance between the outermost half-maximum crossings, linearly interpolated.
pub fn half_max_width(x: &[f64], y: &[f64]) -> Option<f64> {
    let peak = y.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let h = 0.5 * peak;
    let first = y.iter().position(|&v| v >= h)?;
    let last = y.iter().rposition(|&v| v >= h)?;
    if first == 0 || last == y.len() - 1 {
        return None;
    }
    let xl = x[first - 1] + (h - y[first - 1]) * (x[first] - x[first - 1]) / (y[first] - y[first - 1]);
    let xr = x[last] + (y[last] - h) * (x[last + 1] - x[last]) / (y[last] - y[last + 1]);
    Some(xr - xl)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    pub(crate) fn reference_source() -> Source {
        let pump = PumpConfig {
            energy_kev: 21.0,
            deviation_rad: 8e-3f64.to_radians(),
            rate_per_s: 1e13,
            area_m2: 0.4e-6,
        };
        let crystal = CrystalConfig {
            material: "diamond".into(),
            thickness_m: 0.8e-3,
            hkl: [6, 6, 0],
            lattice_m: 3.5668e-10,
            kappa_per_m: Complex64::new(1e-19, 0.0),
        };
        Source::new(pump, crystal).unwrap()
    }

    #[test]
    fn unit_reciprocal_vector() {
        let c = CrystalConfig {
            material: "x".into(),
            thickness_m: 1.0,
            hkl: [1, 0, 0],
            lattice_m: TAU,
            kappa_per_m: Complex64::new(1.0, 0.0),
        };
        assert_relative_eq!(reciprocal_lattice_vector(&c), 1.0, max_relative = 1e-15);
    }

    #[test]
    fn permuted_planes_equal() {
        let mut c = reference_source().crystal;
        let g1 = reciprocal_lattice_vector(&c);
        c.hkl = [0, 6, 6];
        assert_eq!(g1, reciprocal_lattice_vector(&c));
        assert_relative_eq!(g1, TAU * 72f64.sqrt() / 3.5668e-10, max_relative = 1e-15);
    }

    #[test]
    fn backscattering_limit() {
        let mut s = reference_source();
        let g = reciprocal_lattice_vector(&s.crystal);
        s.pump.energy_kev = crate::constants::HC_KEV_NM * 1e-9 * (0.5 * g) / TAU;
        let th = pump_bragg_angle(&s.pump, &s.crystal).unwrap();
        assert_relative_eq!(th, PI / 2.0, epsilon = 1e-6);
        s.pump.energy_kev *= 0.99;
        assert!(matches!(pump_bragg_angle(&s.pump, &s.crystal), Err(Error::NoBraggSolution { .. })));
    }

    #[test]
    fn doubling_energy_halves_sine() {
        let s = reference_source();
        let a = pump_bragg_angle(&s.pump, &s.crystal).unwrap().sin();
        let mut p = s.pump;
        p.energy_kev *= 2.0;
        let b = pump_bragg_angle(&p, &s.crystal).unwrap().sin();
        assert_relative_eq!(b, 0.5 * a, max_relative = 1e-14);
    }

    #[test]
    fn sinc_values() {
        let s = reference_source();
        let l = s.crystal.thickness_m;
        let peak = TAU.powi(3) * 1e-19 * l;
        assert_relative_eq!(s.amplitude_at(0.0).norm(), peak, max_relative = 1e-15);
        assert!(s.amplitude_at(2.0 * PI / l).norm() < 1e-16 * peak);
        assert_relative_eq!(
            s.amplitude_at(PI / l).norm_sqr(),
            (2.0 / PI).powi(2) * peak * peak,
            max_relative = 1e-13
        );
    }

    #[test]
    fn ridge_solves_mismatch() {
        let s = reference_source();
        for (e, d) in [(9.0, 0.0), (10.5, 3e3), (12.0, -5e3)] {
            let r = s.ridge(e, d).unwrap();
            let m = SignalMode { kx: r.q2.sqrt(), ky: 0.0, energy_kev: e };
            assert!((s.delta_kz(&m) - d).abs() < 1e-3, "{e}: {}", s.delta_kz(&m));
        }
    }

    #[test]
    fn out_of_plane_mirror() {
        let s = reference_source();
        let m = SignalMode { kx: 8.7e8, ky: 1.2e8, energy_kev: 10.1 };
        let n = SignalMode { ky: -1.2e8, ..m };
        assert_eq!(s.delta_kz(&m), s.delta_kz(&n));
    }

    #[test]
    fn swap_symmetry() {
        let s = reference_source();
        let a = s.phase_match(9.3).unwrap();
        let b = s.phase_match(21.0 - 9.3).unwrap();
        assert!((a.theta_s + b.theta_i).abs() < 1e-9);
        assert!((a.theta_i + b.theta_s).abs() < 1e-9);
    }

    #[test]
    fn signal_energy_must_leave_positive_idler() {
        let s = reference_source();
        assert!(SignalMode::new(0.0, 0.0, 21.0, &s.pump).is_err());
        assert!(s.phase_match(0.0).is_err());
    }

    #[test]
    fn half_max_width_of_box() {
        let x: Vec<f64> = (0..11).map(|i| i as f64).collect();
        let y = [0., 0., 1., 1., 1., 1., 1., 1., 1., 0., 0.];
        assert_relative_eq!(half_max_width(&x, &y).unwrap(), 7.0);
    }
}
