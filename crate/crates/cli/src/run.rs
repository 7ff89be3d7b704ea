//! The spectrum, scan and dip pipelines.

use std::path::{Path, PathBuf};

use serde::Serialize;
use xhom::hom::{hom_curve, DelayRange, HomOptions, BANDWIDTH_CONVENTION};
use xhom::multilayer::{bragg_corrected_angle, kinematic_interface_r, response_scan, tanh_reflectivity_estimate, Sweep};
use xhom::spdc::nlc_spectrum;

use crate::config::{PupilName, SplitterModelName};
use crate::output::{num, summary_toml, write_file, Csv, VERSION};
use crate::setup::{DeviceName, Setup};
use crate::RunError;

/// What a pipeline wrote and what it wants to tell the user.
#[derive(Debug, Default)]
pub struct Report {
    pub files: Vec<PathBuf>,
    pub lines: Vec<String>,
    pub notices: Vec<String>,
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
}

fn pupil_name(p: PupilName) -> &'static str {
    match p {
        PupilName::SignalArm => "signal_arm",
        PupilName::BothArms => "both_arms",
    }
}

#[derive(Debug, Serialize)]
pub struct SpectrumSummary {
    pub version: String,
    pub config_sha256: String,
    pub grid: String,
    pub pupil: String,
    pub degenerate_angle_deg: f64,
    #[serde(rename = "window_lo_keV")]
    pub window_lo_kev: f64,
    #[serde(rename = "window_hi_keV")]
    pub window_hi_kev: f64,
    #[serde(rename = "bandwidth_keV")]
    pub bandwidth_kev: f64,
    pub total_rate_per_s: f64,
    pub warnings: Vec<String>,
}

pub fn spectrum(setup: &Setup, out: &Path) -> Result<(SpectrumSummary, Report), RunError> {
    let c = &setup.config.spectrum;
    let energies = linspace(c.from_kev, c.to_kev, c.points as usize);
    let sp = nlc_spectrum(&setup.source, setup.aperture(c.pupil), &energies, setup.grid)?;
    let digest = setup.digest();
    let mut csv = Csv::new("spectrum", &digest, &setup.grid.to_string(), &["energy_keV", "rate_per_keV_s", "normalized"]);
    for i in 0..energies.len() {
        csv.row(&[energies[i], sp.density_per_kev[i], sp.normalized[i]]);
    }
    let summary = SpectrumSummary {
        version: VERSION.into(),
        config_sha256: digest,
        grid: setup.grid.to_string(),
        pupil: pupil_name(c.pupil).into(),
        degenerate_angle_deg: setup.source.degenerate_angle()?.to_degrees(),
        window_lo_kev: sp.window_kev.0,
        window_hi_kev: sp.window_kev.1,
        bandwidth_kev: sp.bandwidth_kev,
        total_rate_per_s: sp.total_rate,
        warnings: sp.warnings.clone(),
    };
    let mut report = Report { notices: sp.warnings, ..Report::default() };
    report.files.push(write_file(out, "spectrum.csv", &csv.into_string())?);
    report.files.push(write_file(out, "spectrum_summary.toml", &summary_toml(&summary))?);
    report.lines.push(format!(
        "window {}..{} keV, bandwidth {} keV, total rate {} pairs/s",
        num(summary.window_lo_kev),
        num(summary.window_hi_kev),
        num(summary.bandwidth_kev),
        num(summary.total_rate_per_s)
    ));
    Ok((summary, report))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    /// Grazing angle in degrees at the degenerate energy.
    Angle,
    /// Photon energy in keV at the device's nominal angle.
    Energy,
}

#[derive(Debug, Clone, Copy)]
pub struct ScanRequest {
    pub device: DeviceName,
    pub axis: Axis,
    pub from: Option<f64>,
    pub to: Option<f64>,
    pub points: Option<usize>,
}

#[derive(Debug, Serialize)]
pub struct ScanSummary {
    pub version: String,
    pub config_sha256: String,
    pub device: String,
    pub axis: String,
    /// Fixed energy (angle axis) or fixed angle in degrees (energy axis).
    pub fixed: f64,
    pub peak: f64,
    pub peak_reflectivity: f64,
    pub fwhm: f64,
    pub transmissivity_at_peak: f64,
    pub bragg_corrected_deg: f64,
    /// Closed-form tanh estimate at the corrected Bragg angle.
    pub estimator_reflectivity: f64,
}

pub fn scan(setup: &Setup, req: ScanRequest, out: &Path) -> Result<(ScanSummary, Report), RunError> {
    let stack = setup.stack(req.device);
    let c = &setup.config.scan;
    let e0 = 0.5 * setup.source.pump_energy();
    let bragg = bragg_corrected_angle(stack, e0)?;
    let points = req.points.unwrap_or(c.points as usize);
    let (sweep, fixed, unit) = match req.axis {
        Axis::Angle => {
            let from = req.from.unwrap_or(bragg.to_degrees() - c.angle_half_width_deg);
            let to = req.to.unwrap_or(bragg.to_degrees() + c.angle_half_width_deg);
            (Sweep::Angle { from: from.to_radians(), to: to.to_radians(), points, energy_kev: e0 }, e0, "deg")
        }
        Axis::Energy => {
            let g = setup.geometry(setup.config.dip.pupil)?;
            let nominal = match req.device {
                DeviceName::MirrorS => g.mirror_s_rad,
                DeviceName::MirrorI => g.mirror_i_rad,
                DeviceName::BeamSplitter => g.splitter_rad,
            };
            let from = req.from.unwrap_or(c.energy_from_kev);
            let to = req.to.unwrap_or(c.energy_to_kev);
            (Sweep::Energy { from, to, points, grazing_rad: nominal }, nominal.to_degrees(), "keV")
        }
    };
    if points < 3 || !(sweep.abscissae().windows(2).all(|w| w[1] > w[0])) {
        return Err(RunError::Usage(format!("scan needs >= 3 increasing points, got {points}")));
    }
    let scan = response_scan(stack, &sweep, setup.polarization)?;
    let to_unit = |x: f64| if req.axis == Axis::Angle { x.to_degrees() } else { x };
    let digest = setup.digest();
    let x_col = if req.axis == Axis::Angle { "angle_deg" } else { "energy_keV" };
    let mut csv = Csv::new(&format!("scan {} {}", req.device.key(), unit), &digest, "-", &[x_col, "R_front", "R_back", "T", "phase_r_front_rad"]);
    for (x, r) in scan.abscissa.iter().zip(&scan.responses) {
        csv.row(&[to_unit(*x), r.reflectivity_front(), r.reflectivity_back(), r.transmissivity(), r.r_front.arg()]);
    }
    let nearest = scan
        .abscissa
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1 - scan.peak.location).abs().total_cmp(&(b.1 - scan.peak.location).abs()))
        .map(|(i, _)| i)
        .unwrap_or(0);
    let t_peak = scan.responses[nearest].transmissivity();
    let na = stack.absorber.refractive_index(e0)?.index();
    let ns = stack.spacer.refractive_index(e0)?.index();
    let summary = ScanSummary {
        version: VERSION.into(),
        config_sha256: digest,
        device: req.device.key().into(),
        axis: if req.axis == Axis::Angle { "angle".into() } else { "energy".into() },
        fixed,
        peak: to_unit(scan.peak.location),
        peak_reflectivity: scan.peak.height,
        fwhm: to_unit(scan.peak.fwhm),
        transmissivity_at_peak: t_peak,
        bragg_corrected_deg: bragg.to_degrees(),
        estimator_reflectivity: tanh_reflectivity_estimate(stack, kinematic_interface_r(na, ns, bragg)),
    };
    let base = format!("scan_{}_{}", req.device.key(), summary.axis);
    let mut report = Report::default();
    report.files.push(write_file(out, &format!("{base}.csv"), &csv.into_string())?);
    report.files.push(write_file(out, &format!("{base}_summary.toml"), &summary_toml(&summary))?);
    report.lines.push(format!(
        "{}: peak R {} at {} {unit}, FWHM {} {unit}",
        req.device.key(),
        num(summary.peak_reflectivity),
        num(summary.peak),
        num(summary.fwhm)
    ));
    Ok((summary, report))
}

#[derive(Debug, Clone, Copy, Default)]
pub struct DipRequest {
    pub from_as: Option<f64>,
    pub to_as: Option<f64>,
    pub points: Option<usize>,
    pub refine: bool,
}

#[derive(Debug, Serialize)]
pub struct DipSummary {
    pub version: String,
    pub config_sha256: String,
    pub grid: String,
    pub pupil: String,
    pub splitter_model: String,
    #[serde(rename = "FWHM_as")]
    pub fwhm_as: f64,
    pub visibility: f64,
    pub shift_as: f64,
    #[serde(rename = "path_diff_A")]
    pub path_diff_a: f64,
    #[serde(rename = "bandwidth_keV")]
    pub bandwidth_kev: f64,
    pub bandwidth_convention: String,
    #[serde(rename = "bandwidth_gaussian_keV")]
    pub bandwidth_gaussian_kev: f64,
    pub baseline_per_s: f64,
    pub nlc_rate_per_s: f64,
    pub imaginary_rel: f64,
    pub delay_from_as: f64,
    pub delay_to_as: f64,
    pub mirror_s_deg: f64,
    pub mirror_i_deg: f64,
    pub beam_splitter_deg: f64,
    pub closure_deg: f64,
    pub refined: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub convergence_grid: Option<String>,
    /// Largest relative change of FWHM or visibility on the doubled grid.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub convergence_delta: Option<f64>,
    pub notices: Vec<String>,
}

pub fn dip(setup: &Setup, req: DipRequest, out: &Path) -> Result<(DipSummary, Report), RunError> {
    let c = &setup.config.dip;
    let delays = DelayRange {
        from_s: req.from_as.unwrap_or(c.from_as) * 1e-18,
        to_s: req.to_as.unwrap_or(c.to_as) * 1e-18,
        points: req.points.unwrap_or(c.points as usize),
    };
    if delays.points < 3 || !(delays.from_s < delays.to_s) {
        return Err(RunError::Usage("delay range needs from < to and >= 3 points".into()));
    }
    let geo = setup.geometry(c.pupil)?;
    let curve = hom_curve(&setup.source, &geo, &setup.devices(), delays, setup.grid, HomOptions { refine: req.refine })?;
    let digest = setup.digest();
    let mut csv = Csv::new("dip", &digest, &setup.grid.to_string(), &["delay_as", "rate_per_s", "normalized"]);
    for i in 0..curve.delays_s.len() {
        csv.row(&[curve.delays_s[i] * 1e18, curve.rate[i], curve.normalized[i]]);
    }
    let Some(m) = curve.metrics else {
        write_file(out, "dip.csv", &csv.into_string())?;
        return Err(xhom::hom::dip_metrics(&curve).unwrap_err().into());
    };
    let conv = curve.convergence;
    let summary = DipSummary {
        version: VERSION.into(),
        config_sha256: digest,
        grid: setup.grid.to_string(),
        pupil: pupil_name(c.pupil).into(),
        splitter_model: match c.splitter_model {
            SplitterModelName::AsBuilt => "as_built".into(),
            SplitterModelName::Symmetrized => "symmetrized".into(),
        },
        fwhm_as: m.fwhm_s * 1e18,
        visibility: m.visibility,
        shift_as: m.shift_s * 1e18,
        path_diff_a: m.path_difference_m * 1e10,
        bandwidth_kev: m.bandwidth_kev,
        bandwidth_convention: BANDWIDTH_CONVENTION.into(),
        bandwidth_gaussian_kev: m.bandwidth_gaussian_kev,
        baseline_per_s: curve.baseline,
        nlc_rate_per_s: curve.nlc_rate,
        imaginary_rel: curve.imaginary_rel,
        delay_from_as: curve.delays_s[0] * 1e18,
        delay_to_as: curve.delays_s[curve.delays_s.len() - 1] * 1e18,
        mirror_s_deg: geo.mirror_s_rad.to_degrees(),
        mirror_i_deg: geo.mirror_i_rad.to_degrees(),
        beam_splitter_deg: geo.splitter_rad.to_degrees(),
        closure_deg: geo.closure_rad().to_degrees(),
        refined: conv.is_some(),
        convergence_grid: conv.map(|v| v.grid.to_string()),
        convergence_delta: conv.map(|v| v.fwhm_rel.max(v.visibility_rel)),
        notices: curve.notices.clone(),
    };
    for (k, v) in [
        ("FWHM_as", num(summary.fwhm_as)),
        ("visibility", num(summary.visibility)),
        ("shift_as", num(summary.shift_as)),
        ("path_diff_A", num(summary.path_diff_a)),
        ("bandwidth_keV", num(summary.bandwidth_kev)),
        ("bandwidth_convention", summary.bandwidth_convention.clone()),
    ] {
        csv.footer(k, v);
    }
    let mut report = Report { notices: curve.notices, ..Report::default() };
    report.files.push(write_file(out, "dip.csv", &csv.into_string())?);
    report.files.push(write_file(out, "dip_summary.toml", &summary_toml(&summary))?);
    report.lines.push(format!(
        "FWHM {} as ({} A), visibility {}, shift {} as, bandwidth {} keV",
        num(summary.fwhm_as),
        num(summary.path_diff_a),
        num(summary.visibility),
        num(summary.shift_as),
        num(summary.bandwidth_kev)
    ));
    if let Some(d) = summary.convergence_delta {
        report.lines.push(format!("convergence_delta {} on {}", num(d), summary.convergence_grid.as_deref().unwrap_or("")));
    }
    Ok((summary, report))
}
