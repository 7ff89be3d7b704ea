//! Coincidence rate behind the beam splitter as a function of the idler delay.
//!
//! Beam-splitter transfer: out₁ = A·in₁ + B·in₂, out₂ = C·in₁ + D·in₂, with
//! in₁ the idler arm on the vacuum (multilayer) face and in₂ the signal arm on
//! the substrate face. Hence A = t(idler), D = t(signal), B = r_back(signal),
//! C = r_front(idler).
//!
//! For a node with the photon at ω (angle a₁) and its partner at ω' = ω_p − ω
//! (angle a₂), "direct" puts ω in the signal arm and "exchanged" puts ω' there:
//!
//!   baseline  = |M_s(a₁,ω) M_i(a₂,ω')|² (|A(ω')D(ω)|² + |B(ω)C(ω')|²)
//!   interf.   = ½ X (P₁ + P₂),  X = M_s(a₂,ω') M_s*(a₁,ω) M_i(a₁,ω) M_i*(a₂,ω')
//!   P₁ = A(ω)B*(ω)C*(ω')D(ω'),  P₂ = A*(ω')B(ω')C(ω)D*(ω)
//!
//! and R_C(T) = Σ baseline + 2 Re(interf · e^{i(ω_p − 2ω)T}).

use std::collections::BTreeMap;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::constants::{angular_frequency, C_LIGHT, HBAR_EV_S};
use crate::error::{Error, Result};
use crate::multilayer::{response_scan, stack_response, bragg_corrected_angle, LayerStack, Polarization, Sweep};
use crate::quadrature::{build_grid, GridSpec, ModeNode, QuadratureGrid};
use crate::spdc::{Aperture, Source};

/// Threshold below which a curve is reported as having no dip.
pub const MIN_VISIBILITY: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Arm {
    Signal,
    Idler,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeviceSlot {
    MirrorS,
    MirrorI,
    /// Vacuum-face port, fed by the idler arm.
    SplitterPort1,
    /// Substrate-face port, fed by the signal arm.
    SplitterPort2,
}

impl DeviceSlot {
    /// Side of the axis the feeding arm leaves on.
    fn side(self) -> f64 {
        match self {
            DeviceSlot::MirrorS | DeviceSlot::SplitterPort2 => 1.0,
            DeviceSlot::MirrorI | DeviceSlot::SplitterPort1 => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BenchGeometry {
    pub mirror_s_rad: f64,
    pub mirror_i_rad: f64,
    pub splitter_rad: f64,
    /// Design emission angle |θ₀| of both arms.
    pub theta0: f64,
    pub phase_shifter: Arm,
    pub aperture: Aperture,
    pub polarization: Polarization,
}

impl BenchGeometry {
    pub fn nominal(&self, slot: DeviceSlot) -> f64 {
        match slot {
            DeviceSlot::MirrorS => self.mirror_s_rad,
            DeviceSlot::MirrorI => self.mirror_i_rad,
            DeviceSlot::SplitterPort1 | DeviceSlot::SplitterPort2 => self.splitter_rad,
        }
    }

    /// θ_Ms + θ_Mi − θ₀ − θ_BS; zero when a planar layout with overlapping
    /// outputs realises these nominal angles.
    pub fn closure_rad(&self) -> f64 {
        self.mirror_s_rad + self.mirror_i_rad - self.theta0 - self.splitter_rad
    }
}

/// Grazing angle at `slot` for a photon leaving the crystal at signed in-plane
/// angle `alpha`. The layout is mirror-symmetric about the axis, so an outward
/// deviation raises the grazing angle on every device of that arm; k_y does
/// not enter.
pub fn device_incidence(alpha: f64, geometry: &BenchGeometry, slot: DeviceSlot) -> Result<f64> {
    let g = geometry.nominal(slot) + (slot.side() * alpha - geometry.theta0);
    if !(g > 0.0) {
        return Err(Error::NonPositiveAngle { angle_rad: g });
    }
    Ok(g)
}

/// (r_front, r_back, t) of one optic.
pub type Fields = (Complex64, Complex64, Complex64);

#[derive(Debug, Clone)]
pub enum Optic {
    Stack(LayerStack),
    /// Angle- and energy-independent amplitudes.
    Ideal { r_front: Complex64, r_back: Complex64, t: Complex64 },
}

impl Optic {
    pub fn perfect_mirror() -> Self {
        Optic::Ideal { r_front: Complex64::new(1.0, 0.0), r_back: Complex64::new(1.0, 0.0), t: Complex64::new(0.0, 0.0) }
    }

    pub fn transparent() -> Self {
        Optic::Ideal { r_front: Complex64::new(0.0, 0.0), r_back: Complex64::new(0.0, 0.0), t: Complex64::new(1.0, 0.0) }
    }

    /// Lossless 50:50 splitter with r = i/√2 on both faces.
    pub fn balanced_splitter() -> Self {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        Optic::Ideal { r_front: Complex64::new(0.0, h), r_back: Complex64::new(0.0, h), t: Complex64::new(h, 0.0) }
    }

    pub fn fields(&self, grazing: f64, energy_kev: f64, pol: Polarization) -> Result<Fields> {
        match self {
            Optic::Stack(s) => {
                let r = stack_response(s, grazing, energy_kev, pol)?;
                Ok((r.r_front, r.r_back, r.t_front))
            }
            Optic::Ideal { r_front, r_back, t } => Ok((*r_front, *r_back, *t)),
        }
    }

    fn edges_kev(&self, lo: f64, hi: f64) -> Vec<f64> {
        match self {
            Optic::Stack(s) => {
                let mut v = s.absorber.edges_kev(lo, hi);
                v.extend(s.spacer.edges_kev(lo, hi));
                v.extend(s.substrate.edges_kev(lo, hi));
                v
            }
            Optic::Ideal { .. } => Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SplitterModel {
    #[default]
    AsBuilt,
    /// Both reflections replaced by i√(|r_f||r_b|)·t/|t|: equal phases on the
    /// two faces while keeping the lossless phase relation to t.
    Symmetrized,
}

#[derive(Debug, Clone)]
pub struct Devices {
    pub mirror_s: Optic,
    pub mirror_i: Optic,
    pub splitter: Optic,
    pub splitter_model: SplitterModel,
}

impl Devices {
    /// A = D = 1, B = C = 0, M = 1.
    pub fn identity() -> Self {
        Self {
            mirror_s: Optic::perfect_mirror(),
            mirror_i: Optic::perfect_mirror(),
            splitter: Optic::transparent(),
            splitter_model: SplitterModel::AsBuilt,
        }
    }

    pub fn edges_kev(&self, lo: f64, hi: f64) -> Vec<f64> {
        let mut v = self.mirror_s.edges_kev(lo, hi);
        v.extend(self.mirror_i.edges_kev(lo, hi));
        v.extend(self.splitter.edges_kev(lo, hi));
        v.sort_by(f64::total_cmp);
        v.dedup();
        v
    }

    fn splitter_fields(&self, grazing: f64, e: f64, pol: Polarization) -> Result<Fields> {
        let (rf, rb, t) = self.splitter.fields(grazing, e, pol)?;
        Ok(match self.splitter_model {
            SplitterModel::AsBuilt => (rf, rb, t),
            SplitterModel::Symmetrized => {
                let mag = (rf.norm() * rb.norm()).sqrt();
                let unit = if t.norm() > 0.0 { t / t.norm() } else { rf / rf.norm() };
                let r = Complex64::i() * mag * unit;
                (r, r, t)
            }
        })
    }
}

/// Nominal device angles at the reflectivity peaks at the degenerate energy.
pub fn geometry_at_peaks(
    source: &Source,
    aperture: Aperture,
    mirror_s: &LayerStack,
    mirror_i: &LayerStack,
    splitter: &LayerStack,
    pol: Polarization,
) -> Result<BenchGeometry> {
    let e = 0.5 * source.pump_energy();
    let peak = |s: &LayerStack| -> Result<f64> {
        let c = bragg_corrected_angle(s, e)?;
        let w = 0.15f64.to_radians();
        let sweep = Sweep::Angle { from: c - w, to: c + w, points: 3001, energy_kev: e };
        Ok(response_scan(s, &sweep, pol)?.peak.location)
    };
    Ok(BenchGeometry {
        mirror_s_rad: peak(mirror_s)?,
        mirror_i_rad: peak(mirror_i)?,
        splitter_rad: peak(splitter)?,
        theta0: source.degenerate_angle()?,
        phase_shifter: Arm::Idler,
        aperture,
        polarization: pol,
    })
}

/// Nominal device angles from the refraction-corrected Bragg law.
pub fn geometry_at_bragg(
    source: &Source,
    aperture: Aperture,
    mirror_s: &LayerStack,
    mirror_i: &LayerStack,
    splitter: &LayerStack,
    pol: Polarization,
) -> Result<BenchGeometry> {
    let e = 0.5 * source.pump_energy();
    Ok(BenchGeometry {
        mirror_s_rad: bragg_corrected_angle(mirror_s, e)?,
        mirror_i_rad: bragg_corrected_angle(mirror_i, e)?,
        splitter_rad: bragg_corrected_angle(splitter, e)?,
        theta0: source.degenerate_angle()?,
        phase_shifter: Arm::Idler,
        aperture,
        polarization: pol,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeCoefficient {
    pub node: ModeNode,
    /// pairs/s, T-independent.
    pub baseline: f64,
    /// pairs/s; multiplies e^{iΩT} (zero outside the exchange-symmetric domain).
    pub interference: Complex64,
    /// Ω = ω_p − 2ω, rad/s.
    pub frequency: f64,
}

#[derive(Debug, Clone)]
pub struct NodeCoefficients {
    pub nodes: Vec<NodeCoefficient>,
    /// Pair rate of the bare source over the same nodes, pairs/s.
    pub nlc_rate: f64,
    pub grid: GridSpec,
}

impl NodeCoefficients {
    pub fn baseline(&self) -> f64 {
        self.nodes.iter().map(|n| n.baseline).sum()
    }

    /// Interference coefficients summed per distinct ω, in node order.
    pub fn oscillators(&self) -> Vec<(f64, Complex64)> {
        let mut map: BTreeMap<u64, (f64, Complex64)> = BTreeMap::new();
        for n in &self.nodes {
            if n.interference == Complex64::new(0.0, 0.0) {
                continue;
            }
            let e = map.entry(n.node.energy_kev.to_bits()).or_insert((n.frequency, Complex64::new(0.0, 0.0)));
            e.1 += n.interference;
        }
        map.into_values().collect()
    }
}

/// Evaluates every factor once per node.
pub fn node_coefficients(
    grid: &QuadratureGrid,
    source: &Source,
    geometry: &BenchGeometry,
    devices: &Devices,
) -> Result<NodeCoefficients> {
    let pref = source.rate_prefactor();
    let ep = source.pump_energy();
    let wp = source.pump_omega();
    let pol = geometry.polarization;
    let nodes: Vec<NodeCoefficient> = grid
        .nodes
        .par_iter()
        .map(|n| -> Result<NodeCoefficient> {
            let (e1, e2) = (n.energy_kev, ep - n.energy_kev);
            let (a1, a2) = (n.alpha_signal(), n.alpha_partner());
            let inc = |alpha: f64, slot| device_incidence(alpha, geometry, slot);
            let ms_d = devices.mirror_s.fields(inc(a1, DeviceSlot::MirrorS)?, e1, pol)?.0;
            let mi_d = devices.mirror_i.fields(inc(-a2, DeviceSlot::MirrorI)?, e2, pol)?.0;
            // signal-arm photon at (ω, a₁) on port 2; idler-arm photon at (ω', a₂) on port 1
            let (_, b1, d1) = devices.splitter_fields(inc(a1, DeviceSlot::SplitterPort2)?, e1, pol)?;
            let (c2, _, a2t) = devices.splitter_fields(inc(-a2, DeviceSlot::SplitterPort1)?, e2, pol)?;
            let m2 = (ms_d * mi_d).norm_sqr();
            let baseline = pref * n.weight * m2 * ((a2t * d1).norm_sqr() + (b1 * c2).norm_sqr());

            let mut interference = Complex64::new(0.0, 0.0);
            if n.symmetric {
                let ms_x = devices.mirror_s.fields(inc(a2, DeviceSlot::MirrorS)?, e2, pol)?.0;
                let mi_x = devices.mirror_i.fields(inc(-a1, DeviceSlot::MirrorI)?, e1, pol)?.0;
                // both ports see the same grazing angle for a given (photon, angle)
                let (rf1, rb1, t1) = devices.splitter_fields(inc(-a1, DeviceSlot::SplitterPort1)?, e1, pol)?;
                let (rf2, rb2, t2) = devices.splitter_fields(inc(a2, DeviceSlot::SplitterPort2)?, e2, pol)?;
                let x = ms_x * ms_d.conj() * mi_x * mi_d.conj();
                let p1 = t1 * rb1.conj() * rf2.conj() * t2;
                let p2 = t2.conj() * rb2 * rf1 * t1.conj();
                interference = 0.5 * pref * n.weight * x * (p1 + p2);
            }
            Ok(NodeCoefficient {
                node: *n,
                baseline,
                interference,
                frequency: wp - 2.0 * angular_frequency(e1),
            })
        })
        .collect::<Result<_>>()?;
    Ok(NodeCoefficients {
        nodes,
        nlc_rate: pref * grid.total_weight(),
        grid: grid.spec,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateSample {
    pub rate: f64,
    /// Σ 2 Im(…), which cancels between exchange-paired nodes.
    pub imaginary: f64,
}

pub fn coincidence_rate(coeffs: &NodeCoefficients, delay_s: f64) -> RateSample {
    rate_from(coeffs.baseline(), &coeffs.oscillators(), delay_s)
}

fn rate_from(baseline: f64, osc: &[(f64, Complex64)], t: f64) -> RateSample {
    let mut acc = Complex64::new(0.0, 0.0);
    for &(f, c) in osc {
        acc += c * Complex64::from_polar(1.0, f * t);
    }
    RateSample { rate: baseline + 2.0 * acc.re, imaginary: 2.0 * acc.im }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DelayRange {
    pub from_s: f64,
    pub to_s: f64,
    pub points: usize,
}

impl DelayRange {
    pub fn samples(&self) -> Vec<f64> {
        let n = self.points.max(2);
        (0..n).map(|i| self.from_s + (self.to_s - self.from_s) * i as f64 / (n - 1) as f64).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DipMetrics {
    pub fwhm_s: f64,
    pub visibility: f64,
    pub shift_s: f64,
    pub path_difference_m: f64,
    /// ħ / FWHM.
    pub bandwidth_kev: f64,
    /// 4 ħ ln2 / FWHM, the Gaussian transform-pair reading of the same width.
    pub bandwidth_gaussian_kev: f64,
}

/// Bandwidth convention attached to every reported dip.
pub const BANDWIDTH_CONVENTION: &str = "hbar/FWHM";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Convergence {
    pub grid: GridSpec,
    pub fwhm_rel: f64,
    pub visibility_rel: f64,
}

#[derive(Debug, Clone)]
pub struct HomCurve {
    pub delays_s: Vec<f64>,
    pub rate: Vec<f64>,
    pub normalized: Vec<f64>,
    pub baseline: f64,
    pub nlc_rate: f64,
    /// Largest |Im R_C| / baseline over the sweep.
    pub imaginary_rel: f64,
    pub metrics: Option<DipMetrics>,
    pub grid: GridSpec,
    pub notices: Vec<String>,
    pub convergence: Option<Convergence>,
}

pub fn dip_metrics(curve: &HomCurve) -> Result<DipMetrics> {
    metrics_of(&curve.delays_s, &curve.rate, curve.baseline)
}

fn metrics_of(t: &[f64], r: &[f64], baseline: f64) -> Result<DipMetrics> {
    let n = r.len();
    let (i, &rmin) = r
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .ok_or(Error::NoDip { visibility: 0.0 })?;
    let visibility = if baseline > 0.0 { (baseline - rmin) / baseline } else { 0.0 };
    if !(visibility >= MIN_VISIBILITY) {
        return Err(Error::NoDip { visibility });
    }
    let depth: Vec<f64> = r.iter().map(|v| baseline - v).collect();
    let h = 0.5 * depth[i];
    let mut l = i;
    while l > 0 && depth[l] > h {
        l -= 1;
    }
    let mut u = i;
    while u < n - 1 && depth[u] > h {
        u += 1;
    }
    if depth[l] > h || depth[u] > h {
        return Err(Error::Invalid("dip half-depth not bracketed by the delay range".into()));
    }
    let tl = t[l] + (h - depth[l]) * (t[l + 1] - t[l]) / (depth[l + 1] - depth[l]);
    let tr = t[u - 1] + (h - depth[u - 1]) * (t[u] - t[u - 1]) / (depth[u] - depth[u - 1]);
    let fwhm = tr - tl;
    let shift = if i > 0 && i < n - 1 {
        let (y0, y1, y2) = (r[i - 1], r[i], r[i + 1]);
        let den = y0 - 2.0 * y1 + y2;
        let off = if den > 0.0 { 0.5 * (y0 - y2) / den } else { 0.0 };
        t[i] + off * (t[i + 1] - t[i])
    } else {
        t[i]
    };
    Ok(DipMetrics {
        fwhm_s: fwhm,
        visibility,
        shift_s: shift,
        path_difference_m: C_LIGHT * fwhm,
        bandwidth_kev: HBAR_EV_S * 1e-3 / fwhm,
        bandwidth_gaussian_kev: 4.0 * std::f64::consts::LN_2 * HBAR_EV_S * 1e-3 / fwhm,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct HomOptions {
    /// Also evaluate on the doubled grid and fail when the dip moves.
    pub refine: bool,
}

/// Sweep limits relative to the previous grid: FWHM 1 %, visibility 0.5 %.
const FWHM_TOL: f64 = 0.01;
const VISIBILITY_TOL: f64 = 0.005;
const MAX_WIDENINGS: usize = 6;

pub fn hom_curve(
    source: &Source,
    geometry: &BenchGeometry,
    devices: &Devices,
    delays: DelayRange,
    grid: GridSpec,
    options: HomOptions,
) -> Result<HomCurve> {
    let mut curve = sweep_once(source, geometry, devices, delays, grid)?;
    if options.refine {
        let fine = sweep_once(source, geometry, devices, delays, grid.doubled())?;
        let (a, b) = match (curve.metrics, fine.metrics) {
            (Some(a), Some(b)) => (a, b),
            _ => return Err(Error::NonConvergent("dip not resolved on both grids".into())),
        };
        let conv = Convergence {
            grid: grid.doubled(),
            fwhm_rel: ((a.fwhm_s - b.fwhm_s) / b.fwhm_s).abs(),
            visibility_rel: ((a.visibility - b.visibility) / b.visibility).abs(),
        };
        curve.convergence = Some(conv);
        if conv.fwhm_rel > FWHM_TOL || conv.visibility_rel > VISIBILITY_TOL {
            return Err(Error::NonConvergent(format!(
                "FWHM changed by {:.3}% and visibility by {:.3}% on the {} grid",
                100.0 * conv.fwhm_rel,
                100.0 * conv.visibility_rel,
                conv.grid
            )));
        }
    }
    Ok(curve)
}

/// Coefficients for a bench; exposed so callers can sweep T themselves.
pub fn bench_coefficients(
    source: &Source,
    geometry: &BenchGeometry,
    devices: &Devices,
    grid: GridSpec,
) -> Result<NodeCoefficients> {
    let acc = source.acceptance(geometry.aperture)?;
    let (lo, hi) = acc.support_kev();
    let ep = source.pump_energy();
    let mut edges = devices.edges_kev(lo, hi);
    edges.extend(devices.edges_kev(ep - hi, ep - lo));
    let qg = build_grid(&acc, grid, &edges)?;
    node_coefficients(&qg, source, geometry, devices)
}

fn sweep_once(
    source: &Source,
    geometry: &BenchGeometry,
    devices: &Devices,
    delays: DelayRange,
    grid: GridSpec,
) -> Result<HomCurve> {
    let coeffs = bench_coefficients(source, geometry, devices, grid)?;
    let baseline = coeffs.baseline();
    if !(baseline > 0.0) {
        return Err(Error::EmptyWindow);
    }
    let osc = coeffs.oscillators();
    let mut range = delays;
    let mut notices = Vec::new();
    let mut widenings = 0;
    loop {
        let ts = range.samples();
        let samples: Vec<RateSample> = ts.par_iter().map(|&t| rate_from(baseline, &osc, t)).collect();
        let rate: Vec<f64> = samples.iter().map(|s| s.rate).collect();
        let imin = rate
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
            .unwrap_or(0);
        let at_edge = imin == 0 || imin == rate.len() - 1;
        let dip = (baseline - rate[imin]) / baseline >= MIN_VISIBILITY;
        if at_edge && dip && widenings < MAX_WIDENINGS {
            let c = 0.5 * (range.from_s + range.to_s);
            let h = range.to_s - range.from_s;
            range = DelayRange { from_s: c - h, to_s: c + h, ..range };
            widenings += 1;
            continue;
        }
        if widenings > 0 {
            notices.push(format!(
                "delay range auto-widened {widenings}x to [{:.4}, {:.4}] as: minimum sat at a range edge",
                range.from_s * 1e18,
                range.to_s * 1e18
            ));
        }
        let imaginary_rel = samples.iter().map(|s| s.imaginary.abs()).fold(0.0, f64::max) / baseline;
        let normalized = rate.iter().map(|r| r / coeffs.nlc_rate).collect();
        let metrics = metrics_of(&ts, &rate, baseline).ok();
        return Ok(HomCurve {
            delays_s: ts,
            rate,
            normalized,
            baseline,
            nlc_rate: coeffs.nlc_rate,
            imaginary_rel,
            metrics,
            grid,
            notices,
            convergence: None,
        });
    }
}
