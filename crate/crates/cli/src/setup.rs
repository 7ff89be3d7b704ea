//! Semantic validation and construction of engine objects from a `RunConfig`.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use num_complex::Complex64;
use sha2::{Digest, Sha256};
use xhom::hom::{geometry_at_bragg, geometry_at_peaks, Arm, BenchGeometry, Devices, Optic, SplitterModel};
use xhom::materials::{parse_formula, Material, ScatteringTable};
use xhom::multilayer::{LayerStack, Polarization, Substrate};
use xhom::quadrature::GridSpec;
use xhom::spdc::{Aperture, CrystalConfig, PumpConfig, Pupil, Source};

use crate::config::*;

/// Directory of `<symbol>.nff` tables that replaces the shipped ones.
pub const TABLE_DIR_ENV: &str = "XHOM_TABLE_DIR";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    /// Dotted config key, e.g. `mirror_s.gamma`.
    pub key: String,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.key, self.message)
    }
}

#[derive(Default)]
struct Diagnostics(Vec<Diagnostic>);

impl Diagnostics {
    fn push(&mut self, key: impl Into<String>, message: impl Into<String>) {
        self.0.push(Diagnostic { key: key.into(), message: message.into() });
    }

    fn check(&mut self, ok: bool, key: &str, message: impl FnOnce() -> String) {
        if !ok {
            self.push(key, message());
        }
    }

    fn positive(&mut self, key: &str, v: f64) {
        self.check(v > 0.0 && v.is_finite(), key, || format!("{v} must be positive"));
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeviceName {
    MirrorS,
    MirrorI,
    BeamSplitter,
}

impl DeviceName {
    pub fn key(self) -> &'static str {
        match self {
            DeviceName::MirrorS => "mirror_s",
            DeviceName::MirrorI => "mirror_i",
            DeviceName::BeamSplitter => "beam_splitter",
        }
    }
}

/// A validated configuration with every engine object built.
#[derive(Debug, Clone)]
pub struct Setup {
    pub config: RunConfig,
    pub source: Source,
    pub mirror_s: LayerStack,
    pub mirror_i: LayerStack,
    pub beam_splitter: LayerStack,
    pub polarization: Polarization,
    pub grid: GridSpec,
    pub table_dir: Option<PathBuf>,
}

impl Setup {
    /// Runs every check and reports all violations together.
    pub fn resolve(config: RunConfig, table_dir: Option<&Path>) -> Result<Self, Vec<Diagnostic>> {
        let mut d = Diagnostics::default();
        check_ranges(&config, &mut d);
        let grid = match config.quadrature.grid.parse::<GridSpec>() {
            Ok(g) => Some(g),
            Err(e) => {
                d.push("quadrature.grid", e.to_string());
                None
            }
        };
        let materials = resolve_materials(&config, table_dir, &mut d);
        check_references(&config, &mut d);
        if !d.0.is_empty() {
            return Err(d.0);
        }
        let stack = |key: &str, s: &StackSection| {
            let substrate = match s.substrate_um {
                Some(um) => Substrate::Finite(um * 1e-6),
                None => Substrate::SemiInfinite,
            };
            LayerStack::new(
                materials[&s.absorber].clone(),
                materials[&s.spacer].clone(),
                s.bilayers as usize,
                s.period_nm * 1e-9,
                s.gamma,
                materials[&s.substrate].clone(),
                substrate,
            )
            .map(|mut st| {
                st.order = s.order as u32;
                st
            })
            .map_err(|e| Diagnostic { key: key.into(), message: e.to_string() })
        };
        let stacks = [
            stack("mirror_s", &config.mirror_s),
            stack("mirror_i", &config.mirror_i),
            stack("beam_splitter", &config.beam_splitter),
        ];
        let source = build_source(&config).map_err(|e| Diagnostic { key: "crystal".into(), message: e.to_string() });
        let mut errs: Vec<Diagnostic> = stacks.iter().filter_map(|s| s.as_ref().err().cloned()).collect();
        if let Err(e) = &source {
            errs.push(e.clone());
        }
        if !errs.is_empty() {
            return Err(errs);
        }
        let [ms, mi, bs] = stacks.map(|s| s.unwrap());
        Ok(Self {
            polarization: match config.detector.polarization {
                PolarizationName::S => Polarization::S,
                PolarizationName::P => Polarization::P,
            },
            grid: grid.unwrap(),
            source: source.unwrap(),
            mirror_s: ms,
            mirror_i: mi,
            beam_splitter: bs,
            table_dir: table_dir.map(Path::to_path_buf),
            config,
        })
    }

    pub fn stack(&self, device: DeviceName) -> &LayerStack {
        match device {
            DeviceName::MirrorS => &self.mirror_s,
            DeviceName::MirrorI => &self.mirror_i,
            DeviceName::BeamSplitter => &self.beam_splitter,
        }
    }

    pub fn aperture(&self, pupil: PupilName) -> Aperture {
        Aperture::from_full_width_deg(self.config.detector.aperture_deg).with_pupil(match pupil {
            PupilName::SignalArm => Pupil::SignalArm,
            PupilName::BothArms => Pupil::BothArms,
        })
    }

    /// Nominal angles from the configured alignment, then per-device overrides.
    pub fn geometry(&self, pupil: PupilName) -> xhom::Result<BenchGeometry> {
        let align = match self.config.geometry.alignment {
            Alignment::Peak => geometry_at_peaks,
            Alignment::Bragg => geometry_at_bragg,
        };
        let mut g = align(&self.source, self.aperture(pupil), &self.mirror_s, &self.mirror_i, &self.beam_splitter, self.polarization)?;
        let c = &self.config;
        if let Some(a) = c.mirror_s.angle_deg {
            g.mirror_s_rad = a.to_radians();
        }
        if let Some(a) = c.mirror_i.angle_deg {
            g.mirror_i_rad = a.to_radians();
        }
        if let Some(a) = c.beam_splitter.angle_deg {
            g.splitter_rad = a.to_radians();
        }
        g.phase_shifter = match c.geometry.phase_shifter {
            ArmName::Signal => Arm::Signal,
            ArmName::Idler => Arm::Idler,
        };
        Ok(g)
    }

    pub fn devices(&self) -> Devices {
        Devices {
            mirror_s: Optic::Stack(self.mirror_s.clone()),
            mirror_i: Optic::Stack(self.mirror_i.clone()),
            splitter: Optic::Stack(self.beam_splitter.clone()),
            splitter_model: match self.config.dip.splitter_model {
                SplitterModelName::AsBuilt => SplitterModel::AsBuilt,
                SplitterModelName::Symmetrized => SplitterModel::Symmetrized,
            },
        }
    }

    /// SHA-256 of the normalized config with the output section cleared, so
    /// results do not depend on where they are written.
    pub fn digest(&self) -> String {
        let mut c = self.config.clone();
        c.output = OutputSection { dir: String::new() };
        hex::encode(Sha256::digest(c.normalized().as_bytes()))
    }
}

fn build_source(c: &RunConfig) -> xhom::Result<Source> {
    let pump = PumpConfig {
        energy_kev: c.pump.energy_kev,
        deviation_rad: c.pump.deviation_deg.to_radians(),
        rate_per_s: c.pump.rate_per_s,
        area_m2: c.pump.area_mm2 * 1e-6,
    };
    let crystal = CrystalConfig {
        material: c.crystal.material.clone(),
        thickness_m: c.crystal.thickness_mm * 1e-3,
        hkl: c.crystal.hkl,
        lattice_m: c.crystal.lattice_angstrom * 1e-10,
        kappa_per_m: Complex64::from_polar(c.crystal.kappa_per_m, c.crystal.kappa_phase_deg.to_radians()),
    };
    let s = Source::new(pump, crystal)?;
    s.degenerate_angle()?;
    Ok(s)
}

fn check_ranges(c: &RunConfig, d: &mut Diagnostics) {
    d.positive("pump.energy_kev", c.pump.energy_kev);
    d.check(c.pump.deviation_deg.is_finite(), "pump.deviation_deg", || "must be finite".into());
    d.check(c.pump.rate_per_s >= 0.0 && c.pump.rate_per_s.is_finite(), "pump.rate_per_s", || {
        format!("{} must be non-negative", c.pump.rate_per_s)
    });
    d.positive("pump.area_mm2", c.pump.area_mm2);
    d.positive("crystal.thickness_mm", c.crystal.thickness_mm);
    d.positive("crystal.lattice_angstrom", c.crystal.lattice_angstrom);
    d.check(c.crystal.hkl != [0, 0, 0], "crystal.hkl", || "Miller indices must not all be zero".into());
    d.check(c.crystal.kappa_per_m != 0.0 && c.crystal.kappa_per_m.is_finite(), "crystal.kappa_per_m", || {
        format!("{} must be finite and non-zero", c.crystal.kappa_per_m)
    });
    d.check(c.crystal.kappa_phase_deg.is_finite(), "crystal.kappa_phase_deg", || "must be finite".into());
    let ap = c.detector.aperture_deg;
    d.check((0.0..=10.0).contains(&ap), "detector.aperture_deg", || format!("{ap} is outside [0, 10]"));
    for (key, s) in [("mirror_s", &c.mirror_s), ("mirror_i", &c.mirror_i), ("beam_splitter", &c.beam_splitter)] {
        d.check(s.bilayers >= 1, &format!("{key}.bilayers"), || format!("{} must be at least 1", s.bilayers));
        d.positive(&format!("{key}.period_nm"), s.period_nm);
        d.check(s.gamma > 0.0 && s.gamma < 1.0, &format!("{key}.gamma"), || format!("{} is outside (0, 1)", s.gamma));
        d.check(s.order >= 1, &format!("{key}.order"), || format!("{} must be at least 1", s.order));
        if let Some(t) = s.substrate_um {
            d.check(t >= 0.0 && t.is_finite(), &format!("{key}.substrate_um"), || format!("{t} must be non-negative"));
        }
        if let Some(a) = s.angle_deg {
            d.check(a > 0.0 && a < 90.0, &format!("{key}.angle_deg"), || format!("{a} is outside (0, 90)"));
        }
    }
    let sp = &c.spectrum;
    d.check(sp.from_kev > 0.0 && sp.from_kev < sp.to_kev, "spectrum.from_kev", || {
        format!("need 0 < from_kev < to_kev, got {} and {}", sp.from_kev, sp.to_kev)
    });
    d.check(sp.to_kev < c.pump.energy_kev, "spectrum.to_kev", || {
        format!("{} must lie below the pump energy {}", sp.to_kev, c.pump.energy_kev)
    });
    d.check(sp.points >= 3, "spectrum.points", || format!("{} must be at least 3", sp.points));
    let sc = &c.scan;
    d.check(sc.points >= 3, "scan.points", || format!("{} must be at least 3", sc.points));
    d.positive("scan.angle_half_width_deg", sc.angle_half_width_deg);
    d.check(sc.energy_from_kev > 0.0 && sc.energy_from_kev < sc.energy_to_kev, "scan.energy_from_kev", || {
        format!("need 0 < energy_from_kev < energy_to_kev, got {} and {}", sc.energy_from_kev, sc.energy_to_kev)
    });
    let dp = &c.dip;
    d.check(dp.from_as < dp.to_as, "dip.from_as", || format!("{} must be below to_as = {}", dp.from_as, dp.to_as));
    d.check(dp.points >= 3, "dip.points", || format!("{} must be at least 3", dp.points));
}

/// Energies every material table must cover for this run.
fn required_band(c: &RunConfig) -> (f64, f64) {
    let lo = 8f64.min(c.spectrum.from_kev).min(c.scan.energy_from_kev);
    let hi = c.pump.energy_kev.max(c.spectrum.to_kev).max(c.scan.energy_to_kev);
    (lo, hi)
}

fn load_table(symbol: &str, dir: Option<&Path>) -> Result<ScatteringTable, String> {
    match dir {
        Some(dir) => {
            let path = dir.join(format!("{}.nff", symbol.to_lowercase()));
            ScatteringTable::from_path(symbol, &path).map_err(|e| e.to_string())
        }
        None => ScatteringTable::builtin(symbol).ok_or_else(|| format!("no shipped table for {symbol}; set {TABLE_DIR_ENV}")),
    }
}

fn resolve_materials(c: &RunConfig, dir: Option<&Path>, d: &mut Diagnostics) -> BTreeMap<String, Arc<Material>> {
    let mut tables: BTreeMap<String, Arc<ScatteringTable>> = BTreeMap::new();
    let mut out = BTreeMap::new();
    let (lo, hi) = required_band(c);
    for (name, m) in &c.materials {
        let key = format!("materials.{name}");
        let elements = match parse_formula(&m.formula) {
            Ok(v) => v,
            Err(e) => {
                d.push(format!("{key}.formula"), e.to_string());
                continue;
            }
        };
        let mut comps = Vec::new();
        for (sym, count) in elements {
            let table = match tables.get(&sym) {
                Some(t) => t.clone(),
                None => match load_table(&sym, dir) {
                    Ok(t) => {
                        let t = Arc::new(t);
                        tables.insert(sym.clone(), t.clone());
                        t
                    }
                    Err(e) => {
                        d.push(format!("{key}.formula"), e);
                        continue;
                    }
                },
            };
            if !table.covers(lo, hi) {
                let (a, b) = table.coverage_kev();
                d.push(
                    format!("{key}.formula"),
                    format!("{name} ({sym}) table covers {a:.4}..{b:.4} keV but the run needs {lo} to {hi} keV"),
                );
            }
            comps.push((table, count));
        }
        if !(m.density_g_cm3 > 0.0 && m.density_g_cm3.is_finite()) {
            d.push(format!("{key}.density_g_cm3"), format!("{} must be positive", m.density_g_cm3));
            continue;
        }
        match Material::new(name, m.density_g_cm3, comps) {
            Ok(mat) => {
                out.insert(name.clone(), Arc::new(mat));
            }
            Err(e) => d.push(key, e.to_string()),
        }
    }
    out
}

fn check_references(c: &RunConfig, d: &mut Diagnostics) {
    let declared = || c.materials.keys().cloned().collect::<Vec<_>>().join(", ");
    let mut refer = |key: String, name: &str| {
        if !c.materials.contains_key(name) {
            d.push(key, format!("unknown material `{name}` (declared: {})", declared()));
        }
    };
    refer("crystal.material".into(), &c.crystal.material);
    for (dev, s) in [("mirror_s", &c.mirror_s), ("mirror_i", &c.mirror_i), ("beam_splitter", &c.beam_splitter)] {
        refer(format!("{dev}.absorber"), &s.absorber);
        refer(format!("{dev}.spacer"), &s.spacer);
        refer(format!("{dev}.substrate"), &s.substrate);
    }
}
