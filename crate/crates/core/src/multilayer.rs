//! Stratified-media optics for Pt/C-type multilayers.
//!
//! Field amplitudes in layer j are (A⁺, A⁻) at the layer's entrance plane and
//! the chain is [A⁺₀, A⁻₀]ᵀ = M [A⁺ₙ, A⁻ₙ]ᵀ. Each interface contributes
//! ½[[1+p, 1−p], [1−p, 1+p]] with p = q_{j+1}/q_j, where q = k_z (s) or
//! k_z/n² (p), and each finite layer diag(e^{−i k_z d}, e^{i k_z d}).
//!
//! Transmission is flux-normalised. When the exit medium equals the ambient
//! (a free-standing device) t and r_b are referred to the entrance plane, so a
//! vacuum slab of any thickness is exactly the identity.

use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::constants::{wavelength_m, wavenumber};
use crate::error::{Error, Result};
use crate::materials::Material;

const ONE: Complex64 = Complex64 { re: 1.0, im: 0.0 };
const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Polarization {
    S,
    /// Electric field in the plane of incidence; r is the magnetic-field ratio,
    /// which coincides with the s value at grazing incidence.
    #[default]
    P,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stratum {
    pub index: Complex64,
    pub thickness: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StackResponse {
    pub r_front: Complex64,
    pub r_back: Complex64,
    pub t_front: Complex64,
    pub t_back: Complex64,
    /// Factor turning |t|² into a transmitted flux; 1 for a transparent exit.
    pub exit_flux: f64,
    pub polarization: Polarization,
    pub grazing_rad: f64,
    pub energy_kev: f64,
}

impl StackResponse {
    pub fn reflectivity_front(&self) -> f64 {
        self.r_front.norm_sqr()
    }

    pub fn reflectivity_back(&self) -> f64 {
        self.r_back.norm_sqr()
    }

    /// Transmitted flux fraction for front illumination.
    pub fn transmissivity(&self) -> f64 {
        self.t_front.norm_sqr() * self.exit_flux
    }
}

/// Longitudinal wave number with the decaying branch (Im ≥ 0).
fn kz(k0: f64, n: Complex64, cos2: Complex64) -> Complex64 {
    let v = (n * n - cos2).sqrt() * k0;
    if v.im < 0.0 || (v.im == 0.0 && v.re < 0.0) {
        -v
    } else {
        v
    }
}

fn admittance(kz: Complex64, n: Complex64, pol: Polarization) -> Complex64 {
    match pol {
        Polarization::S => kz,
        Polarization::P => kz / (n * n),
    }
}

type M2 = [[Complex64; 2]; 2];

fn mul(a: &M2, b: &M2) -> M2 {
    [
        [
            a[0][0] * b[0][0] + a[0][1] * b[1][0],
            a[0][0] * b[0][1] + a[0][1] * b[1][1],
        ],
        [
            a[1][0] * b[0][0] + a[1][1] * b[1][0],
            a[1][0] * b[0][1] + a[1][1] * b[1][1],
        ],
    ]
}

/// Response of `ambient | strata… | exit` at a grazing angle.
pub fn strata_response(
    ambient: Complex64,
    strata: &[Stratum],
    exit: Complex64,
    grazing_rad: f64,
    energy_kev: f64,
    pol: Polarization,
) -> StackResponse {
    let k0 = wavenumber(energy_kev);
    // cos θ is measured in the ambient; Snell invariant is n₀ cos θ₀
    let c = ambient * grazing_rad.cos();
    let cos2 = c * c;
    let kz0 = kz(k0, ambient, cos2);
    let q0 = admittance(kz0, ambient, pol);

    // m is kept O(1); its true value is m·e^{log_scale}
    let mut m: M2 = [[ONE, ZERO], [ZERO, ONE]];
    let mut log_scale = 0.0;
    let mut q_prev = q0;
    let mut depth = 0.0;
    for s in strata {
        let kzj = kz(k0, s.index, cos2);
        let qj = admittance(kzj, s.index, pol);
        let p = qj / q_prev;
        let iface = [[(ONE + p) * 0.5, (ONE - p) * 0.5], [(ONE - p) * 0.5, (ONE + p) * 0.5]];
        // e^{∓i k_z d} with the growth e^{Im(k_z) d} factored out
        let a = kzj.im * s.thickness;
        let phase = Complex64::from_polar(1.0, -kzj.re * s.thickness);
        let prop = [[phase, ZERO], [ZERO, phase.conj() * (-2.0 * a).exp()]];
        m = mul(&mul(&m, &iface), &prop);
        log_scale += a;
        let big = m.iter().flatten().map(|z| z.norm()).fold(0.0, f64::max);
        if big > 1e100 {
            m.iter_mut().flatten().for_each(|z| *z /= big);
            log_scale += big.ln();
        }
        q_prev = qj;
        depth += s.thickness;
    }
    let kz_exit = kz(k0, exit, cos2);
    let q_exit = admittance(kz_exit, exit, pol);
    let p = q_exit / q_prev;
    let iface = [[(ONE + p) * 0.5, (ONE - p) * 0.5], [(ONE - p) * 0.5, (ONE + p) * 0.5]];
    m = mul(&m, &iface);

    let r_front = m[1][0] / m[0][0];
    let mut r_back = -m[0][1] / m[0][0];
    // det M = q_exit/q₀ exactly, so t_b = t_f; the symmetric √ is what makes
    // the normalised amplitudes reciprocal
    let flux = (q_exit / q0).sqrt();
    let mut t_front = flux / m[0][0] * (-log_scale).exp();
    if exit == ambient && depth > 0.0 {
        let shift = (-Complex64::i() * kz0 * depth).exp();
        t_front *= shift;
        r_back *= shift * shift;
    }
    let t_back = t_front;
    // |t|² overstates the transmitted flux when the exit wave is evanescent
    // or damped; Re q / |q| restores the Poynting ratio
    let exit_flux = (q_exit.re / q_exit.norm()) * (q0.norm() / q0.re);
    StackResponse {
        r_front,
        r_back,
        t_front,
        t_back,
        exit_flux,
        polarization: pol,
        grazing_rad,
        energy_kev,
    }
}

/// Single-interface amplitude, `(q₁ − q₂)/(q₁ + q₂)` with the admittances above.
/// At normal incidence the s value is (n₁ − n₂)/(n₁ + n₂).
pub fn fresnel_interface_r(n1: Complex64, n2: Complex64, grazing_rad: f64, pol: Polarization) -> Complex64 {
    let cos2 = (n1 * grazing_rad.cos()).powi(2);
    let q1 = admittance(kz(1.0, n1, cos2), n1, pol);
    let q2 = admittance(kz(1.0, n2, cos2), n2, pol);
    (q1 - q2) / (q1 + q2)
}

/// Weak-contrast interface amplitude |n₁² − n₂²| / (4 sin²θ), i.e. the Fresnel
/// amplitude with refraction in the layers neglected.
pub fn kinematic_interface_r(n1: Complex64, n2: Complex64, grazing_rad: f64) -> f64 {
    (n1 * n1 - n2 * n2).norm() / (4.0 * grazing_rad.sin().powi(2))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Substrate {
    SemiInfinite,
    Finite(f64),
}

/// Periodic absorber/spacer stack. Γ is the absorber fraction d_a/d.
#[derive(Debug, Clone)]
pub struct LayerStack {
    pub absorber: Arc<Material>,
    pub spacer: Arc<Material>,
    pub n_bilayers: usize,
    pub period_m: f64,
    pub gamma: f64,
    pub substrate: Arc<Material>,
    pub substrate_kind: Substrate,
    pub order: u32,
    /// Absorber faces the vacuum side when true.
    pub absorber_on_top: bool,
}

impl LayerStack {
    pub fn new(
        absorber: Arc<Material>,
        spacer: Arc<Material>,
        n_bilayers: usize,
        period_m: f64,
        gamma: f64,
        substrate: Arc<Material>,
        substrate_kind: Substrate,
    ) -> Result<Self> {
        if !(period_m > 0.0) {
            return Err(Error::Invalid(format!("bilayer period must be positive, got {period_m}")));
        }
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(Error::Invalid(format!("gamma must lie in (0, 1), got {gamma}")));
        }
        if let Substrate::Finite(t) = substrate_kind {
            if !(t >= 0.0) {
                return Err(Error::Invalid(format!("substrate thickness must be >= 0, got {t}")));
            }
        }
        Ok(Self {
            absorber,
            spacer,
            n_bilayers,
            period_m,
            gamma,
            substrate,
            substrate_kind,
            order: 1,
            absorber_on_top: true,
        })
    }

    /// Zero bilayers on a zero-thickness vacuum substrate: r = 0, t = 1.
    pub fn empty() -> Self {
        let vac = Arc::new(Material::vacuum());
        Self {
            absorber: vac.clone(),
            spacer: vac.clone(),
            n_bilayers: 0,
            period_m: 1e-9,
            gamma: 0.5,
            substrate: vac,
            substrate_kind: Substrate::Finite(0.0),
            order: 1,
            absorber_on_top: true,
        }
    }

    pub fn absorber_thickness(&self) -> f64 {
        self.gamma * self.period_m
    }

    pub fn spacer_thickness(&self) -> f64 {
        (1.0 - self.gamma) * self.period_m
    }

    /// N·d plus the substrate when finite.
    pub fn total_thickness(&self) -> f64 {
        let ml = self.n_bilayers as f64 * self.period_m;
        match self.substrate_kind {
            Substrate::Finite(t) => ml + t,
            Substrate::SemiInfinite => ml,
        }
    }

    /// Strata from the entrance side and the exit-medium index.
    pub fn strata(&self, energy_kev: f64) -> Result<(Vec<Stratum>, Complex64)> {
        let na = self.absorber.refractive_index(energy_kev)?.index();
        let ns = self.spacer.refractive_index(energy_kev)?.index();
        let (top, bottom) = if self.absorber_on_top {
            ((na, self.absorber_thickness()), (ns, self.spacer_thickness()))
        } else {
            ((ns, self.spacer_thickness()), (na, self.absorber_thickness()))
        };
        let mut v = Vec::with_capacity(2 * self.n_bilayers + 1);
        for _ in 0..self.n_bilayers {
            v.push(Stratum { index: top.0, thickness: top.1 });
            v.push(Stratum { index: bottom.0, thickness: bottom.1 });
        }
        let nsub = self.substrate.refractive_index(energy_kev)?.index();
        let exit = match self.substrate_kind {
            Substrate::SemiInfinite => nsub,
            Substrate::Finite(t) => {
                if t > 0.0 {
                    v.push(Stratum { index: nsub, thickness: t });
                }
                ONE
            }
        };
        Ok((v, exit))
    }

    /// Γ-weighted mean decrement of the bilayer.
    pub fn mean_delta(&self, energy_kev: f64) -> Result<f64> {
        let da = self.absorber.refractive_index(energy_kev)?.delta;
        let ds = self.spacer.refractive_index(energy_kev)?.delta;
        Ok(self.gamma * da + (1.0 - self.gamma) * ds)
    }
}

pub fn stack_response(
    stack: &LayerStack,
    grazing_rad: f64,
    energy_kev: f64,
    pol: Polarization,
) -> Result<StackResponse> {
    if !(grazing_rad > 0.0 && grazing_rad < std::f64::consts::FRAC_PI_2) {
        return Err(Error::NonPositiveAngle { angle_rad: grazing_rad });
    }
    let (strata, exit) = stack.strata(energy_kev)?;
    Ok(strata_response(ONE, &strata, exit, grazing_rad, energy_kev, pol))
}

/// Peak grazing angle from Bragg's law with the refraction correction:
/// sin²θ = (nλ/2d)² + 2δ̄ − δ̄².
pub fn bragg_corrected_angle(stack: &LayerStack, energy_kev: f64) -> Result<f64> {
    let dbar = stack.mean_delta(energy_kev)?;
    let s = stack.order as f64 * wavelength_m(energy_kev) / (2.0 * stack.period_m);
    let sin2 = s * s + 2.0 * dbar - dbar * dbar;
    if !(sin2 > 0.0 && sin2 <= 1.0) {
        return Err(Error::NoBraggAngle { order: stack.order });
    }
    Ok(sin2.sqrt().asin())
}

/// R = tanh²[2 N r sin(π n Γ)].
pub fn tanh_reflectivity_estimate(stack: &LayerStack, r: f64) -> f64 {
    let x = 2.0 * stack.n_bilayers as f64 * r.abs()
        * (std::f64::consts::PI * stack.order as f64 * stack.gamma).sin();
    x.tanh().powi(2)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Sweep {
    /// Grazing angles in rad at a fixed energy.
    Angle { from: f64, to: f64, points: usize, energy_kev: f64 },
    /// Energies in keV at a fixed grazing angle in rad.
    Energy { from: f64, to: f64, points: usize, grazing_rad: f64 },
}

impl Sweep {
    pub fn abscissae(&self) -> Vec<f64> {
        let (a, b, n) = match *self {
            Sweep::Angle { from, to, points, .. } | Sweep::Energy { from, to, points, .. } => (from, to, points),
        };
        if n == 1 {
            return vec![a];
        }
        (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeakMetrics {
    pub location: f64,
    pub height: f64,
    pub fwhm: f64,
}

#[derive(Debug, Clone)]
pub struct ResponseScan {
    pub sweep: Sweep,
    pub abscissa: Vec<f64>,
    pub responses: Vec<StackResponse>,
    pub peak: PeakMetrics,
}

/// Evaluates the sweep without peak extraction.
pub fn scan_curve(stack: &LayerStack, sweep: &Sweep, pol: Polarization) -> Result<Vec<StackResponse>> {
    let xs = sweep.abscissae();
    if xs.len() < 3 || xs.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Invalid("sweep needs >= 3 increasing points".into()));
    }
    xs.par_iter()
        .map(|&x| match *sweep {
            Sweep::Angle { energy_kev, .. } => stack_response(stack, x, energy_kev, pol),
            Sweep::Energy { grazing_rad, .. } => stack_response(stack, grazing_rad, x, pol),
        })
        .collect()
}

pub fn response_scan(stack: &LayerStack, sweep: &Sweep, pol: Polarization) -> Result<ResponseScan> {
    let responses = scan_curve(stack, sweep, pol)?;
    let abscissa = sweep.abscissae();
    let refl: Vec<f64> = responses.iter().map(|r| r.reflectivity_front()).collect();
    let peak = first_bragg_peak(&abscissa, &refl)?;
    Ok(ResponseScan { sweep: *sweep, abscissa, responses, peak })
}

/// Highest interior maximum after any leading total-reflection decay, with the
/// FWHM from linearly interpolated half-maximum crossings.
pub fn first_bragg_peak(x: &[f64], y: &[f64]) -> Result<PeakMetrics> {
    let n = y.len();
    if n < 3 {
        return Err(Error::PeakNotFound);
    }
    let mut start = 0;
    while start + 1 < n && y[start + 1] < y[start] {
        start += 1;
    }
    let (i, &h) = y[start..]
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, v)| (i + start, v))
        .ok_or(Error::PeakNotFound)?;
    if i == 0 || i == n - 1 || !(h > 1e-6) {
        return Err(Error::PeakNotFound);
    }
    let half = 0.5 * h;
    let mut l = i;
    while l > 0 && y[l] > half {
        l -= 1;
    }
    let mut r = i;
    while r < n - 1 && y[r] > half {
        r += 1;
    }
    if y[l] > half || y[r] > half {
        return Err(Error::PeakNotFound);
    }
    let xl = x[l] + (half - y[l]) * (x[l + 1] - x[l]) / (y[l + 1] - y[l]);
    let xr = x[r - 1] + (half - y[r - 1]) * (x[r] - x[r - 1]) / (y[r] - y[r - 1]);
    // refine the apex with a parabola through the three samples
    let (y0, y1, y2) = (y[i - 1], y[i], y[i + 1]);
    let den = y0 - 2.0 * y1 + y2;
    let off = if den != 0.0 { 0.5 * (y0 - y2) / den } else { 0.0 };
    let dx = x[i + 1] - x[i];
    Ok(PeakMetrics { location: x[i] + off * dx, height: h, fwhm: xr - xl })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn pt_c_stack(n: usize, substrate: Substrate) -> LayerStack {
        let pt = Arc::new(Material::default_set("Pt").unwrap());
        let cc = Arc::new(Material::default_set("C").unwrap());
        let si = Arc::new(Material::default_set("Si").unwrap());
        LayerStack::new(pt, cc, n, 3.7e-9, 0.5, si, substrate).unwrap()
    }

    #[test]
    fn no_contrast_no_reflection() {
        let n = c(1.0 - 3e-5, 2e-6);
        assert_eq!(fresnel_interface_r(n, n, 0.01, Polarization::S), ZERO);
        assert_eq!(fresnel_interface_r(n, n, 0.01, Polarization::P), ZERO);
    }

    #[test]
    fn normal_incidence_limit() {
        let (n1, n2) = (c(1.0, 0.0), c(1.5, 0.0));
        let r = fresnel_interface_r(n1, n2, std::f64::consts::FRAC_PI_2, Polarization::S);
        assert_relative_eq!(r.re, -0.2, epsilon = 1e-12);
        let rp = fresnel_interface_r(n1, n2, std::f64::consts::FRAC_PI_2, Polarization::P);
        assert_relative_eq!(rp.re, 0.2, epsilon = 1e-12);
    }

    #[test]
    fn empty_stack_is_identity() {
        let r = stack_response(&LayerStack::empty(), 0.017, 10.5, Polarization::S).unwrap();
        assert_eq!(r.r_front, ZERO);
        assert_eq!(r.r_back, ZERO);
        assert_eq!(r.t_front, ONE);
        assert_eq!(r.t_back, ONE);
    }

    #[test]
    fn vacuum_slab_is_identity() {
        let s = [Stratum { index: ONE, thickness: 15e-6 }];
        let r = strata_response(ONE, &s, ONE, 0.017, 10.5, Polarization::P);
        assert!(r.r_front.norm() < 1e-15 && r.r_back.norm() < 1e-15);
        assert!((r.t_front - ONE).norm() < 1e-12);
    }

    #[test]
    fn single_interface_matches_fresnel() {
        let n1 = c(1.0, 0.0);
        let n2 = c(1.0 - 3e-5, 2e-6);
        let th = 0.004;
        let r = strata_response(n1, &[], n2, th, 10.5, Polarization::S);
        assert_relative_eq!((r.r_front - fresnel_interface_r(n1, n2, th, Polarization::S)).norm(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn bragg_uncorrected_limit() {
        let vac = Arc::new(Material::vacuum());
        let s = LayerStack::new(vac.clone(), vac.clone(), 20, 3.7e-9, 0.5, vac, Substrate::SemiInfinite).unwrap();
        let th = bragg_corrected_angle(&s, 10.5).unwrap();
        let expect = (wavelength_m(10.5) / (2.0 * 3.7e-9)).asin();
        assert_relative_eq!(th, expect, max_relative = 1e-14);
        assert_relative_eq!(th.to_degrees(), 0.9144, epsilon = 5e-4);
    }

    #[test]
    fn bragg_correction_steepens() {
        let s = pt_c_stack(20, Substrate::SemiInfinite);
        let corr = bragg_corrected_angle(&s, 10.5).unwrap();
        let plain = (wavelength_m(10.5) / (2.0 * 3.7e-9)).asin();
        assert!(corr > plain);
        assert!((corr.to_degrees() - 0.976).abs() < 0.005, "{}", corr.to_degrees());
    }

    #[test]
    fn bragg_no_solution() {
        let vac = Arc::new(Material::vacuum());
        let s = LayerStack::new(vac.clone(), vac.clone(), 1, 0.05e-9, 0.5, vac, Substrate::SemiInfinite).unwrap();
        assert!(matches!(bragg_corrected_angle(&s, 10.5), Err(Error::NoBraggAngle { .. })));
    }

    #[test]
    fn estimator_limits() {
        let mut s = pt_c_stack(0, Substrate::SemiInfinite);
        assert_eq!(tanh_reflectivity_estimate(&s, 0.05), 0.0);
        s.n_bilayers = 10_000;
        let r = tanh_reflectivity_estimate(&s, 0.05);
        assert!(r <= 1.0 && r > 0.999);
    }

    #[test]
    fn gamma_range_enforced() {
        let vac = Arc::new(Material::vacuum());
        for g in [0.0, 1.0, 1.3, -0.2] {
            assert!(LayerStack::new(vac.clone(), vac.clone(), 1, 1e-9, g, vac.clone(), Substrate::SemiInfinite).is_err());
        }
    }

    #[test]
    fn empty_stack_scan_has_no_peak() {
        let sweep = Sweep::Angle { from: 0.01, to: 0.03, points: 51, energy_kev: 10.5 };
        let curve = scan_curve(&LayerStack::empty(), &sweep, Polarization::S).unwrap();
        assert!(curve.iter().all(|r| r.reflectivity_front() == 0.0));
        assert_eq!(
            response_scan(&LayerStack::empty(), &sweep, Polarization::S).unwrap_err(),
            Error::PeakNotFound
        );
    }

    #[test]
    fn peak_of_triangle() {
        let x: Vec<f64> = (0..11).map(|i| i as f64).collect();
        let y: Vec<f64> = x.iter().map(|&v| (5.0 - (v - 5.0f64).abs()).max(0.0)).collect();
        let p = first_bragg_peak(&x, &y).unwrap();
        assert_relative_eq!(p.location, 5.0);
        assert_relative_eq!(p.height, 5.0);
        assert_relative_eq!(p.fwhm, 5.0);
    }

    #[test]
    fn plateau_is_skipped() {
        let x: Vec<f64> = (0..9).map(|i| i as f64).collect();
        let y = [1.0, 0.9, 0.5, 0.1, 0.3, 0.6, 0.3, 0.1, 0.05];
        let p = first_bragg_peak(&x, &y).unwrap();
        assert_relative_eq!(p.location, 5.0);
    }
}
