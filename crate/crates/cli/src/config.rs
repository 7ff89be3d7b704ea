//! Run configuration: a sectioned TOML file deserialized into plain structs.
//! Syntax and type errors stop parsing; semantic checks live in `setup`.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub pump: PumpSection,
    pub crystal: CrystalSection,
    pub detector: DetectorSection,
    pub materials: BTreeMap<String, MaterialSection>,
    pub mirror_s: StackSection,
    pub mirror_i: StackSection,
    pub beam_splitter: StackSection,
    #[serde(default)]
    pub geometry: GeometrySection,
    #[serde(default)]
    pub quadrature: QuadratureSection,
    #[serde(default)]
    pub spectrum: SpectrumSection,
    #[serde(default)]
    pub scan: ScanSection,
    #[serde(default)]
    pub dip: DipSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PumpSection {
    pub energy_kev: f64,
    /// Offset from the Bragg angle; positive opens the emission cone.
    pub deviation_deg: f64,
    pub rate_per_s: f64,
    pub area_mm2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrystalSection {
    /// Key into `[materials]`.
    pub material: String,
    pub thickness_mm: f64,
    pub hkl: [i32; 3],
    pub lattice_angstrom: f64,
    pub kappa_per_m: f64,
    #[serde(default)]
    pub kappa_phase_deg: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolarizationName {
    S,
    #[default]
    P,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorSection {
    /// Full acceptance angle.
    pub aperture_deg: f64,
    #[serde(default)]
    pub polarization: PolarizationName,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialSection {
    /// `"Pt"` or `"Si:1,C:1"`.
    pub formula: String,
    pub density_g_cm3: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StackSection {
    pub absorber: String,
    pub spacer: String,
    pub substrate: String,
    pub bilayers: i64,
    pub period_nm: f64,
    pub gamma: f64,
    #[serde(default = "one")]
    pub order: i64,
    /// Absent means a semi-infinite substrate.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub substrate_um: Option<f64>,
    /// Overrides the aligned nominal grazing angle.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub angle_deg: Option<f64>,
}

fn one() -> i64 {
    1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Alignment {
    /// Each device at its exact reflectivity peak at the degenerate energy.
    #[default]
    Peak,
    /// Each device at its refraction-corrected Bragg angle.
    Bragg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArmName {
    Signal,
    #[default]
    Idler,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeometrySection {
    pub alignment: Alignment,
    pub phase_shifter: ArmName,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuadratureSection {
    /// `<omega>x<kx>x<ky>`.
    pub grid: String,
}

impl Default for QuadratureSection {
    fn default() -> Self {
        Self { grid: "96x48x24".into() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PupilName {
    SignalArm,
    BothArms,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitterModelName {
    #[default]
    AsBuilt,
    Symmetrized,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpectrumSection {
    pub from_kev: f64,
    pub to_kev: f64,
    pub points: i64,
    pub pupil: PupilName,
}

impl Default for SpectrumSection {
    fn default() -> Self {
        Self { from_kev: 8.0, to_kev: 13.5, points: 221, pupil: PupilName::SignalArm }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScanSection {
    pub points: i64,
    /// Angle sweeps span the refraction-corrected Bragg angle ± this.
    pub angle_half_width_deg: f64,
    pub energy_from_kev: f64,
    pub energy_to_kev: f64,
}

impl Default for ScanSection {
    fn default() -> Self {
        Self { points: 1201, angle_half_width_deg: 0.15, energy_from_kev: 9.0, energy_to_kev: 12.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DipSection {
    pub from_as: f64,
    pub to_as: f64,
    pub points: i64,
    pub pupil: PupilName,
    pub splitter_model: SplitterModelName,
}

impl Default for DipSection {
    fn default() -> Self {
        Self { from_as: -3.0, to_as: 3.0, points: 400, pupil: PupilName::BothArms, splitter_model: SplitterModelName::AsBuilt }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: String,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: "out".into() }
    }
}

/// Failure to turn bytes into a `RunConfig`.
#[derive(Debug, Clone, PartialEq)]
pub enum LoadError {
    Io(String),
    Syntax { line: usize, column: usize, message: String },
}

impl fmt::Display for LoadError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LoadError::Io(m) => f.write_str(m),
            LoadError::Syntax { line, column, message } => write!(f, "line {line}, column {column}: {message}"),
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, LoadError> {
        toml::from_str(text).map_err(|e| {
            let offset = e.span().map(|s| s.start).unwrap_or(0).min(text.len());
            let before = &text[..offset];
            let line = before.matches('\n').count() + 1;
            let column = before.len() - before.rfind('\n').map(|i| i + 1).unwrap_or(0) + 1;
            LoadError::Syntax { line, column, message: e.message().trim().to_string() }
        })
    }

    pub fn load(path: &Path) -> Result<Self, LoadError> {
        let text = std::fs::read_to_string(path).map_err(|e| LoadError::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Canonical TOML with every default filled in.
    pub fn normalized(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}
