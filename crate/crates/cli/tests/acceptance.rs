//! One PASS/FAIL line per acceptance criterion, computed from the golden
//! config. Criteria listed in `KNOWN_FAILURES` are reported but do not fail
//! the run; any other failure exits nonzero.

use std::path::Path;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use num_complex::Complex64;
use xhom::constants::wavenumber;
use xhom::hom::{bench_coefficients, hom_curve, DelayRange, Devices, HomCurve, HomOptions, Optic, SplitterModel};
use xhom::multilayer::*;
use xhom::quadrature::GridSpec;
use xhom::spdc::nlc_spectrum;
use xhom_cli::config::PupilName;
use xhom_cli::load_setup;
use xhom_cli::setup::Setup;

/// Criteria the model misses; see the README for the numbers.
const KNOWN_FAILURES: &[&str] = &["C1", "C5a", "C6a", "C6b", "C7b", "E1"];

struct Ledger {
    unexpected: usize,
    known: usize,
    passed: usize,
}

impl Ledger {
    fn report(&mut self, id: &str, ok: bool, detail: String) {
        let known = KNOWN_FAILURES.contains(&id);
        match (ok, known) {
            (true, false) => {
                self.passed += 1;
                println!("PASS {id:<4} {detail}");
            }
            (true, true) => {
                self.passed += 1;
                println!("PASS {id:<4} {detail} [listed as a known failure]");
            }
            (false, true) => {
                self.known += 1;
                println!("FAIL {id:<4} {detail} [known]");
            }
            (false, false) => {
                self.unexpected += 1;
                println!("FAIL {id:<4} {detail}");
            }
        }
    }
}

fn within(x: f64, target: f64, rel: f64) -> bool {
    (x / target - 1.0).abs() <= rel
}

fn setup() -> Setup {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/golden.toml");
    load_setup(&root, None).expect("golden config resolves")
}

fn peak(stack: &LayerStack, sweep: Sweep) -> PeakMetrics {
    response_scan(stack, &sweep, Polarization::P).unwrap().peak
}

fn curve(s: &Setup, devices: &Devices, grid: GridSpec) -> HomCurve {
    let geo = s.geometry(PupilName::BothArms).unwrap();
    let delays = DelayRange { from_s: -3e-18, to_s: 3e-18, points: 400 };
    hom_curve(&s.source, &geo, devices, delays, grid, HomOptions::default()).unwrap()
}

fn kz(k0: f64, n: Complex64, cos2: Complex64) -> Complex64 {
    let v = (n * n - cos2).sqrt() * k0;
    if v.im < 0.0 { -v } else { v }
}

/// s-polarised reflectance from the cos/sin characteristic matrix.
fn abeles_r_s(layers: &[(Complex64, f64)], exit: Complex64, grazing: f64, e_kev: f64) -> Complex64 {
    let k0 = wavenumber(e_kev);
    let cos2 = Complex64::new(grazing.cos().powi(2), 0.0);
    let (y0, ys) = (kz(k0, Complex64::new(1.0, 0.0), cos2), kz(k0, exit, cos2));
    let i = Complex64::i();
    let one = Complex64::new(1.0, 0.0);
    let mut m = [[one, 0.0 * one], [0.0 * one, one]];
    for &(n, d) in layers {
        let y = kz(k0, n, cos2);
        let b = y * d;
        let l = [[b.cos(), -i * b.sin() / y], [-i * y * b.sin(), b.cos()]];
        m = [
            [m[0][0] * l[0][0] + m[0][1] * l[1][0], m[0][0] * l[0][1] + m[0][1] * l[1][1]],
            [m[1][0] * l[0][0] + m[1][1] * l[1][0], m[1][0] * l[0][1] + m[1][1] * l[1][1]],
        ];
    }
    let num = y0 * m[0][0] + y0 * ys * m[0][1] - m[1][0] - ys * m[1][1];
    let den = y0 * m[0][0] + y0 * ys * m[0][1] + m[1][0] + ys * m[1][1];
    num / den
}

fn main() -> ExitCode {
    let mut l = Ledger { unexpected: 0, known: 0, passed: 0 };
    let s = setup();
    let e0 = 0.5 * s.source.pump_energy();
    let deg = f64::to_degrees;

    // C1
    let th0 = deg(s.source.degenerate_angle().unwrap());
    l.report("C1", (th0 - 0.976).abs() <= 0.005, format!("degenerate emission angle {th0:.4} deg (target 0.976 +/- 0.005)"));

    // C2, C3
    let energies: Vec<f64> = (0..=220).map(|i| 8.0 + 5.5 * i as f64 / 220.0).collect();
    let sp = nlc_spectrum(&s.source, s.aperture(PupilName::SignalArm), &energies, s.grid).unwrap();
    let (lo, hi) = sp.window_kev;
    l.report(
        "C2",
        (lo - 8.54).abs() <= 0.05 && (hi - 12.89).abs() <= 0.05 && within(sp.bandwidth_kev, 4.35, 0.05),
        format!("window {lo:.3}-{hi:.3} keV (8.54-12.89 +/- 0.05), bandwidth {:.3} keV (4.35 +/- 5%)", sp.bandwidth_kev),
    );
    l.report("C3", (0.05..=0.45).contains(&sp.total_rate), format!("pair rate {:.4} /s (0.05-0.45)", sp.total_rate));

    // C4
    let estimate = |st: &LayerStack| {
        let th = bragg_corrected_angle(st, e0).unwrap();
        let na = st.absorber.refractive_index(e0).unwrap().index();
        let ns = st.spacer.refractive_index(e0).unwrap().index();
        tanh_reflectivity_estimate(st, kinematic_interface_r(na, ns, th))
    };
    let (r20, r10) = (estimate(&s.mirror_s), estimate(&s.beam_splitter));
    l.report("C4", r20 >= 0.88 && (r10 - 0.5).abs() <= 0.05, format!("estimator N=20 {r20:.4} (>= 0.88), N=10 {r10:.4} (0.50 +/- 0.05)"));

    // C5
    let angle_sweep = |st: &LayerStack| {
        let c = bragg_corrected_angle(st, e0).unwrap();
        let w = 0.15f64.to_radians();
        Sweep::Angle { from: c - w, to: c + w, points: 3001, energy_kev: e0 }
    };
    let m_ang = peak(&s.mirror_s, angle_sweep(&s.mirror_s));
    let b_ang = peak(&s.beam_splitter, angle_sweep(&s.beam_splitter));
    let m_en = peak(&s.mirror_s, Sweep::Energy { from: 9.0, to: 12.0, points: 3001, grazing_rad: m_ang.location });
    let b_en = peak(&s.beam_splitter, Sweep::Energy { from: 9.0, to: 12.0, points: 3001, grazing_rad: b_ang.location });
    let md = deg(m_ang.location);
    l.report("C5a", (md - 0.976).abs() <= 0.01, format!("mirror angular peak {md:.4} deg (0.976 +/- 0.01)"));
    let mw = deg(m_ang.fwhm);
    l.report("C5b", within(mw, 0.07, 0.15), format!("mirror angular FWHM {mw:.4} deg (0.07 +/- 15%)"));
    let bw = deg(b_ang.fwhm);
    l.report("C5c", within(bw, 0.095, 0.15), format!("splitter angular FWHM {bw:.4} deg (0.095 +/- 15%)"));
    l.report("C5d", within(m_en.fwhm, 0.758, 0.15), format!("mirror energy FWHM {:.4} keV (0.758 +/- 15%)", m_en.fwhm));
    l.report("C5e", within(b_en.fwhm, 1.04, 0.15), format!("splitter energy FWHM {:.4} keV (1.04 +/- 15%)", b_en.fwhm));

    // C6, C7
    let start = Instant::now();
    let built = curve(&s, &s.devices(), s.grid);
    let elapsed = start.elapsed().as_secs_f64();
    let m = built.metrics.expect("as-built dip resolved");
    let fw = m.fwhm_s * 1e18;
    l.report("C6a", within(fw, 0.6, 0.2), format!("dip FWHM {fw:.4} as (0.6 +/- 20%)"));
    l.report("C6b", m.visibility >= 0.95, format!("dip visibility {:.4} (>= 0.95)", m.visibility));
    let sym = curve(&s, &Devices { splitter_model: SplitterModel::Symmetrized, ..s.devices() }, s.grid);
    let sym_shift = sym.metrics.expect("symmetrized dip resolved").shift_s * 1e18;
    let shift = m.shift_s * 1e18;
    l.report(
        "C6c",
        shift.abs() > 0.01 && sym_shift.abs() < 1e-4,
        format!("dip shift {shift:.4} as as built, {sym_shift:.1e} as symmetrized"),
    );
    l.report("C6d", elapsed <= 300.0, format!("400-point sweep on the {} grid in {elapsed:.1} s (<= 300)", s.grid));
    l.report("C7a", within(m.bandwidth_kev, 1.097, 0.2), format!("dip bandwidth {:.4} keV, hbar/FWHM (1.097 +/- 20%)", m.bandwidth_kev));
    l.report("C7b", m.bandwidth_kev > b_en.fwhm, format!("dip bandwidth {:.4} keV wider than splitter energy FWHM {:.4} keV", m.bandwidth_kev, b_en.fwhm));

    // C8
    let lossless = LayerStack {
        absorber: Arc::new(s.mirror_s.absorber.without_absorption()),
        spacer: Arc::new(s.mirror_s.spacer.without_absorption()),
        substrate: Arc::new(s.mirror_s.substrate.without_absorption()),
        ..s.mirror_s.clone()
    };
    let mut unitarity: f64 = 0.0;
    let mut passive = true;
    for i in 0..=40 {
        let th = (0.3 + 1.2 * i as f64 / 40.0).to_radians();
        for pol in [Polarization::S, Polarization::P] {
            let r = stack_response(&lossless, th, e0, pol).unwrap();
            unitarity = unitarity.max((r.reflectivity_front() + r.transmissivity() - 1.0).abs());
            for st in [&s.mirror_s, &s.beam_splitter] {
                let r = stack_response(st, th, e0, pol).unwrap();
                passive &= r.reflectivity_front() + r.transmissivity() <= 1.0 + 1e-12;
            }
        }
    }
    l.report("C8a", unitarity < 1e-10 && passive, format!("lossless |r|^2+|t|^2-1 max {unitarity:.1e}; absorbing stacks passive: {passive}"));

    let (strata, exit) = s.beam_splitter.strata(e0).unwrap();
    let reversed: Vec<Stratum> = strata.iter().rev().cloned().collect();
    let mut recip: f64 = 0.0;
    for i in 0..=20 {
        let th = (0.5 + 0.05 * i as f64).to_radians();
        let a = strata_response(Complex64::new(1.0, 0.0), &strata, exit, th, e0, Polarization::S);
        let b = strata_response(exit, &reversed, Complex64::new(1.0, 0.0), th, e0, Polarization::S);
        recip = recip.max((a.t_front - b.t_front).norm() / a.t_front.norm());
    }
    l.report("C8b", recip < 1e-10, format!("splitter transmission reciprocity, max relative gap {recip:.1e}"));

    let min_rate = built.rate.iter().cloned().fold(f64::MAX, f64::min);
    l.report(
        "C8c",
        built.imaginary_rel < 1e-8 && min_rate >= 0.0,
        format!("coincidence rate imaginary part {:.1e} of baseline, minimum {min_rate:.3e} /s", built.imaginary_rel),
    );

    let fine = curve(&s, &s.devices(), s.grid.doubled()).metrics.expect("fine dip resolved");
    let drift = (fine.fwhm_s / m.fwhm_s - 1.0).abs();
    l.report("C8d", drift < 0.01, format!("FWHM drift {:.3}% from {} to {}", 100.0 * drift, s.grid, s.grid.doubled()));

    let geo = s.geometry(PupilName::BothArms).unwrap();
    let id = bench_coefficients(&s.source, &geo, &Devices::identity(), s.grid).unwrap();
    let nlc = nlc_spectrum(&s.source, s.aperture(PupilName::BothArms), &energies, s.grid).unwrap().total_rate;
    let gap = (id.baseline() / nlc - 1.0).abs();
    l.report("C8e", gap < 1e-10 && id.oscillators().is_empty(), format!("identity devices reproduce the source rate, relative gap {gap:.1e}"));

    let mut slice_gap: f64 = 0.0;
    for st in [&s.mirror_s, &s.beam_splitter] {
        let (strata, exit) = st.strata(e0).unwrap();
        let layers: Vec<(Complex64, f64)> = strata.iter().map(|x| (x.index, x.thickness)).collect();
        for i in 0..=10 {
            let th = (0.8 + 0.03 * i as f64).to_radians();
            let a = stack_response(st, th, e0, Polarization::S).unwrap().r_front;
            slice_gap = slice_gap.max((a - abeles_r_s(&layers, exit, th, e0)).norm());
        }
    }
    l.report("C8f", slice_gap < 1e-8, format!("characteristic-matrix oracle, max |r| gap {slice_gap:.1e}"));

    let n = Complex64::new(1.0 - 4.43e-6, 0.0);
    let d = 2.0e-6;
    let k0 = wavenumber(e0);
    let mut airy_gap: f64 = 0.0;
    for dg in [0.3, 0.5, 0.976, 2.0] {
        let th: f64 = f64::to_radians(dg);
        let r = strata_response(Complex64::new(1.0, 0.0), &[Stratum { index: n, thickness: d }], Complex64::new(1.0, 0.0), th, e0, Polarization::S);
        let kz0 = k0 * th.sin();
        let kz1 = (k0 * k0 * (n.re * n.re - th.cos().powi(2))).sqrt();
        let rho = ((kz0 - kz1) / (kz0 + kz1)).powi(2);
        let f = 4.0 * rho / (1.0 - rho).powi(2);
        let s2 = (kz1 * d).sin().powi(2);
        airy_gap = airy_gap.max((r.reflectivity_front() - f * s2 / (1.0 + f * s2)).abs());
    }
    l.report("C8g", airy_gap < 1e-8, format!("Airy slab oracle, max R gap {airy_gap:.1e}"));

    let mut sp_abs: f64 = 0.0;
    let mut sp_rel: f64 = 0.0;
    for st in [&s.mirror_s, &s.beam_splitter] {
        for i in 1..=120 {
            let th = (0.01 * i as f64).to_radians();
            let rs = stack_response(st, th, e0, Polarization::S).unwrap().reflectivity_front();
            let rp = stack_response(st, th, e0, Polarization::P).unwrap().reflectivity_front();
            sp_abs = sp_abs.max((rs - rp).abs());
            sp_rel = sp_rel.max((rs - rp).abs() / rs);
        }
    }
    l.report(
        "C8h",
        sp_abs < 1e-3,
        format!("s/p degeneracy to 1.2 deg: max |Rs-Rp| {sp_abs:.1e} (< 1e-3); relative {:.3}%", 100.0 * sp_rel),
    );

    // diagnostics behind the known failures
    let est = r20;
    let exact = m_ang.height;
    l.report("E1", (est - exact).abs() <= 0.1, format!("estimator vs exact mirror peak: {est:.3} vs {exact:.3} (within 0.10)"));
    let clear = LayerStack { substrate: Arc::new(s.beam_splitter.substrate.without_absorption()), ..s.beam_splitter.clone() };
    let clear_dev = Devices { splitter: Optic::Stack(clear), ..s.devices() };
    let cm = curve(&s, &clear_dev, s.grid).metrics.expect("lossless-substrate dip resolved");
    l.report(
        "E2",
        cm.visibility >= 0.9,
        format!("absorption-free substrate: visibility {:.4}, FWHM {:.4} as", cm.visibility, cm.fwhm_s * 1e18),
    );

    println!("{} passed, {} known failures, {} unexpected failures", l.passed, l.known, l.unexpected);
    if l.unexpected == 0 { ExitCode::SUCCESS } else { ExitCode::FAILURE }
}
