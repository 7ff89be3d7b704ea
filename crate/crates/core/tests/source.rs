use std::f64::consts::{PI, TAU};

use approx::assert_relative_eq;
use num_complex::Complex64;
use proptest::prelude::*;
use xhom::constants::wavenumber;
use xhom::quadrature::GridSpec;
use xhom::spdc::*;

fn pump() -> PumpConfig {
    PumpConfig { energy_kev: 21.0, deviation_rad: 8e-3f64.to_radians(), rate_per_s: 1e13, area_m2: 0.4e-6 }
}

fn crystal() -> CrystalConfig {
    CrystalConfig {
        material: "diamond".into(),
        thickness_m: 0.8e-3,
        hkl: [6, 6, 0],
        lattice_m: 3.5668e-10,
        kappa_per_m: Complex64::new(1e-19, 0.0),
    }
}

fn source() -> Source {
    Source::new(pump(), crystal()).unwrap()
}

/// Crystal-frame axis vector K = k_p + G with the planes along x and the pump
/// at `tilt` to them.
fn axis_vector(tilt: f64) -> (f64, f64) {
    let kp = wavenumber(21.0);
    let g = TAU * 72f64.sqrt() / 3.5668e-10;
    (kp * tilt.cos(), -kp * tilt.sin() + g)
}

/// Minimises `f` over a box by repeated 101×101 grid zooms.
fn zoom_search(mut lo: (f64, f64), mut hi: (f64, f64), f: impl Fn(f64, f64) -> f64) -> (f64, f64) {
    let mut best = (0.5 * (lo.0 + hi.0), 0.5 * (lo.1 + hi.1));
    for _ in 0..20 {
        let mut fbest = f64::INFINITY;
        for i in 0..=100 {
            for j in 0..=100 {
                let x = lo.0 + (hi.0 - lo.0) * i as f64 / 100.0;
                let y = lo.1 + (hi.1 - lo.1) * j as f64 / 100.0;
                let v = f(x, y);
                if v < fbest {
                    fbest = v;
                    best = (x, y);
                }
            }
        }
        let (wx, wy) = ((hi.0 - lo.0) / 10.0, (hi.1 - lo.1) / 10.0);
        lo = (best.0 - wx, best.1 - wy);
        hi = (best.0 + wx, best.1 + wy);
    }
    best
}

#[test]
fn diamond_660_reciprocal_vector() {
    let g = reciprocal_lattice_vector(&crystal());
    assert_relative_eq!(g, TAU * 72f64.sqrt() / 3.5668e-10, max_relative = 1e-15);
}

#[test]
fn bragg_angle_matches_elastic_scattering_scan() {
    // elastic Bragg reflection: |k_p + G| = k_p
    let kp = wavenumber(21.0);
    let mismatch = |t: f64| {
        let (x, z) = axis_vector(t);
        ((x * x + z * z).sqrt() - kp).abs()
    };
    let (t, _) = zoom_search((0.0, 0.0), (PI / 2.0, 0.0), |t, _| mismatch(t));
    let exact = pump_bragg_angle(&pump(), &crystal()).unwrap();
    assert!((t - exact).abs() < 1e-10, "{t} vs {exact}");
}

#[test]
fn nine_kev_angles_match_vector_brute_force() {
    let s = source();
    let e = 9.0;
    let (k1, k2) = (wavenumber(e), wavenumber(21.0 - e));
    let (kx, kz) = axis_vector(s.theta_bragg() + 8e-3f64.to_radians());
    let kk = (kx * kx + kz * kz).sqrt();
    // full in-plane vector mismatch in the frame where K is the axis
    let f = |ts: f64, ti: f64| {
        let dx = k1 * ts.sin() + k2 * ti.sin();
        let dz = kk - k1 * ts.cos() - k2 * ti.cos();
        dx * dx + dz * dz
    };
    let d = f64::to_radians;
    let (ts, ti) = zoom_search((d(0.2), d(-2.5)), (d(2.5), d(-0.2)), f);
    let pm = s.phase_match(e).unwrap();
    assert!((pm.theta_s - ts).abs() < 1e-9, "{} vs {ts}", pm.theta_s);
    assert!((pm.theta_i - ti).abs() < 1e-9, "{} vs {ti}", pm.theta_i);
    assert!(pm.theta_s > 0.0 && pm.theta_i < 0.0);
}

#[test]
fn one_millidegree_offset_follows_the_taylor_expansion() {
    let s = source();
    let e = 10.5;
    let (k1, k2) = (wavenumber(e), wavenumber(21.0 - e));
    let kk = s.k_axis();
    let th = s.phase_match(e).unwrap().theta_s;
    // closed-form mismatch along the in-plane ridge
    let g = |t: f64| {
        let q = k1 * t.sin();
        kk - (k1 * k1 - q * q).sqrt() - (k2 * k2 - q * q).sqrt()
    };
    let h = 1e-3f64.to_radians();
    let step = 1e-7;
    let d1 = (g(th + step) - g(th - step)) / (2.0 * step);
    let d2 = (g(th + step) - 2.0 * g(th) + g(th - step)) / (step * step);
    let taylor = d1 * h + 0.5 * d2 * h * h;
    let mode = SignalMode::new(k1 * (th + h).sin(), 0.0, e, &s.pump).unwrap();
    let got = s.delta_kz(&mode);
    assert!(got.abs() > 1e3);
    assert_relative_eq!(got, taylor, max_relative = 1e-4);
}

#[test]
fn phase_match_roots_are_tight_across_the_spectrum() {
    let s = source();
    for i in 0..=50 {
        let e = 8.0 + 5.0 * i as f64 / 50.0;
        let pm = s.phase_match(e).unwrap();
        let k1 = wavenumber(e);
        // 1e-9 rad of angle error expressed as a mismatch
        let slope = k1 * pm.theta_s.sin() * (1.0 + k1 / wavenumber(21.0 - e));
        assert!(pm.delta_kz.abs() < 1e-9 * slope, "{e}: {}", pm.delta_kz);
    }
}

#[test]
fn emission_angle_is_monotone_in_energy_over_the_window() {
    let acc = source().acceptance(Aperture::from_full_width_deg(0.4)).unwrap();
    let (lo, hi) = acc.window_kev;
    let angles: Vec<f64> = (0..=200)
        .map(|i| acc.ridge_angle(lo + (hi - lo) * i as f64 / 200.0).unwrap())
        .collect();
    assert!(angles.windows(2).all(|w| w[1] < w[0]));
}

#[test]
fn amplitude_scales_with_coupling_and_length() {
    let s = source();
    let peak = s.amplitude_at(0.0).norm();
    assert_relative_eq!(peak, TAU.powi(3) * 1e-19 * 0.8e-3, max_relative = 1e-14);
    let l = s.crystal.thickness_m;
    assert!(s.amplitude_at(2.0 * PI / l).norm() < 1e-15 * peak);
    assert_relative_eq!(s.amplitude_at(PI / l).norm_sqr(), (2.0 / PI).powi(2) * peak * peak, max_relative = 1e-12);
    let long = Source::new(pump(), CrystalConfig { thickness_m: 2.0 * l, ..crystal() }).unwrap();
    assert_relative_eq!(long.amplitude_at(0.0).norm_sqr(), 4.0 * peak * peak, max_relative = 1e-14);
}

#[test]
fn total_rate_is_linear_in_pump_rate_and_coupling_squared() {
    let ap = Aperture::from_full_width_deg(0.4);
    let energies: Vec<f64> = (0..=60).map(|i| 8.0 + 5.5 * i as f64 / 60.0).collect();
    let grid = GridSpec { n_omega: 48, n_kx: 24, n_ky: 12 };
    let base = nlc_spectrum(&source(), ap, &energies, grid).unwrap().total_rate;
    let brighter = Source::new(PumpConfig { rate_per_s: 3e13, ..pump() }, crystal()).unwrap();
    let stronger = Source::new(pump(), CrystalConfig { kappa_per_m: Complex64::new(0.0, 2e-19), ..crystal() }).unwrap();
    assert_relative_eq!(nlc_spectrum(&brighter, ap, &energies, grid).unwrap().total_rate, 3.0 * base, max_relative = 1e-12);
    assert_relative_eq!(nlc_spectrum(&stronger, ap, &energies, grid).unwrap().total_rate, 4.0 * base, max_relative = 1e-12);
}

#[test]
fn zero_aperture_has_no_window() {
    assert!(matches!(source().acceptance(Aperture::from_full_width_deg(0.0)), Err(xhom::Error::EmptyWindow)));
}

#[test]
fn spectrum_is_resolved_on_the_default_grid() {
    let energies: Vec<f64> = (0..=220).map(|i| 8.0 + 5.5 * i as f64 / 220.0).collect();
    let sp = nlc_spectrum(&source(), Aperture::from_full_width_deg(0.4), &energies, GridSpec::default()).unwrap();
    assert!(sp.warnings.is_empty(), "{:?}", sp.warnings);
    assert!(sp.bandwidth_kev < sp.window_kev.1 - sp.window_kev.0 + 0.1);
    assert!(sp.normalized.iter().all(|v| (0.0..=1.0).contains(v)));
}

proptest! {
    #[test]
    fn mismatch_is_even_in_ky(e in 8.0f64..13.0, kx in -5e8f64..5e8, ky in 0.0f64..5e8) {
        let s = source();
        let a = s.delta_kz(&SignalMode::new(kx, ky, e, &s.pump).unwrap());
        let b = s.delta_kz(&SignalMode::new(kx, -ky, e, &s.pump).unwrap());
        prop_assert_eq!(a, b);
    }

    #[test]
    fn relabelling_swaps_the_angles(e in 8.0f64..13.0) {
        let s = source();
        let a = s.phase_match(e).unwrap();
        let b = s.phase_match(21.0 - e).unwrap();
        prop_assert!((a.theta_s + b.theta_i).abs() < 1e-10);
        prop_assert!((a.theta_i + b.theta_s).abs() < 1e-10);
    }
}
