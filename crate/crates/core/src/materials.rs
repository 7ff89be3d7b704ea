//! Henke scattering-factor tables and the optical constants derived from them.
//!
//! δ = (r_e λ² / 2π) Σ n_j f1_j and β likewise with f2, where n_j is the atom
//! number density of element j. Interpolation is log-log between rows.

use std::io::Read;
use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;

use crate::constants::{wavelength_m, N_A, R_E};
use crate::elements;
use crate::error::{Error, Result};

/// f1 value the table format uses to mark rows without a usable f1.
pub const F1_SENTINEL: f64 = -9999.0;

/// Rows closer than this (eV) are read as the two sides of an absorption edge.
const EDGE_SPACING_EV: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TableRow {
    pub energy_ev: f64,
    pub f1: f64,
    pub f2: f64,
    /// False for sentinel rows; those are kept so line numbers stay meaningful.
    pub usable: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScatteringTable {
    symbol: String,
    rows: Vec<TableRow>,
}

impl ScatteringTable {
    /// Parse the `.nff` layout: one header line, then `E_eV f1 f2` rows.
    pub fn parse(symbol: &str, text: &str) -> Result<Self> {
        let mut rows: Vec<TableRow> = Vec::new();
        for (idx, raw) in text.lines().enumerate().skip(1) {
            let line = idx + 1;
            let body = raw.trim();
            if body.is_empty() {
                continue;
            }
            let fields: Vec<&str> = body.split_whitespace().collect();
            if fields.len() != 3 {
                return Err(Error::Parse {
                    line,
                    message: format!("expected 3 columns, found {}", fields.len()),
                });
            }
            let mut vals = [0.0f64; 3];
            for (v, f) in vals.iter_mut().zip(&fields) {
                *v = f.parse::<f64>().map_err(|_| Error::Parse {
                    line,
                    message: format!("`{f}` is not a number"),
                })?;
                if !v.is_finite() {
                    return Err(Error::Parse {
                        line,
                        message: format!("`{f}` is not finite"),
                    });
                }
            }
            let [energy_ev, f1, f2] = vals;
            if energy_ev <= 0.0 {
                return Err(Error::Parse {
                    line,
                    message: "energy must be positive".into(),
                });
            }
            let usable = f1 != F1_SENTINEL && f2 != F1_SENTINEL;
            if usable && f2 < 0.0 {
                return Err(Error::Parse {
                    line,
                    message: format!("negative f2 ({f2})"),
                });
            }
            if let Some(prev) = rows.last() {
                if energy_ev <= prev.energy_ev {
                    return Err(Error::NonMonotone { line, energy_ev });
                }
            }
            rows.push(TableRow {
                energy_ev,
                f1,
                f2,
                usable,
            });
        }
        if rows.is_empty() {
            return Err(Error::EmptyTable);
        }
        Ok(Self {
            symbol: symbol.to_string(),
            rows,
        })
    }

    pub fn from_reader<R: Read>(symbol: &str, mut reader: R) -> Result<Self> {
        let mut bytes = Vec::new();
        reader
            .read_to_end(&mut bytes)
            .map_err(|e| Error::Invalid(format!("reading table for {symbol}: {e}")))?;
        let text = String::from_utf8(bytes).map_err(|e| Error::Parse {
            line: 0,
            message: format!("not UTF-8 text: {e}"),
        })?;
        Self::parse(symbol, &text)
    }

    pub fn from_path(symbol: &str, path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)
            .map_err(|e| Error::Invalid(format!("{}: {e}", path.display())))?;
        Self::from_reader(symbol, file)
    }

    /// Tables shipped with the crate (Pt, C, Si).
    pub fn builtin(symbol: &str) -> Option<Self> {
        let text = match elements::canonical_symbol(symbol)? {
            "Pt" => include_str!("../data/henke/pt.nff"),
            "C" => include_str!("../data/henke/c.nff"),
            "Si" => include_str!("../data/henke/si.nff"),
            _ => return None,
        };
        Some(Self::parse(symbol, text).expect("shipped table parses"))
    }

    pub fn symbol(&self) -> &str {
        &self.symbol
    }

    pub fn rows(&self) -> &[TableRow] {
        &self.rows
    }

    /// Span (keV) of the usable rows.
    pub fn coverage_kev(&self) -> (f64, f64) {
        let mut it = self.rows.iter().filter(|r| r.usable);
        let lo = it.next().map_or(f64::NAN, |r| r.energy_ev);
        let hi = self
            .rows
            .iter()
            .rev()
            .find(|r| r.usable)
            .map_or(f64::NAN, |r| r.energy_ev);
        (lo * 1e-3, hi * 1e-3)
    }

    /// True when every energy in `[lo, hi]` keV is interpolable.
    pub fn covers(&self, lo_kev: f64, hi_kev: f64) -> bool {
        let (a, b) = self.coverage_kev();
        if !(a <= lo_kev && hi_kev <= b) {
            return false;
        }
        // any sentinel row inside the span breaks coverage
        !self
            .rows
            .iter()
            .any(|r| !r.usable && r.energy_ev * 1e-3 >= lo_kev && r.energy_ev * 1e-3 <= hi_kev)
    }

    /// (f1, f2) at `energy_kev`; exact at tabulated rows.
    pub fn factors(&self, energy_kev: f64) -> Result<(f64, f64)> {
        let e = energy_kev * 1e3;
        let first = self.rows[0].energy_ev;
        let last = self.rows[self.rows.len() - 1].energy_ev;
        if !(e >= first && e <= last) {
            return Err(Error::OutOfRange {
                element: self.symbol.clone(),
                energy_kev,
                min_kev: first * 1e-3,
                max_kev: last * 1e-3,
            });
        }
        let gap = || Error::TableGap {
            element: self.symbol.clone(),
            energy_kev,
        };
        let i = self.rows.partition_point(|r| r.energy_ev < e);
        let hi = &self.rows[i];
        // keV→eV round trips land within an ulp or two of the tabulated energy
        let snap = |r: &TableRow| (r.energy_ev - e).abs() <= 1e-12 * e;
        for r in [Some(hi), i.checked_sub(1).map(|j| &self.rows[j])].into_iter().flatten() {
            if snap(r) {
                return if r.usable { Ok((r.f1, r.f2)) } else { Err(gap()) };
            }
        }
        let lo = &self.rows[i - 1];
        if !(lo.usable && hi.usable) {
            return Err(gap());
        }
        let t = (e / lo.energy_ev).ln() / (hi.energy_ev / lo.energy_ev).ln();
        Ok((interp(lo.f1, hi.f1, t), interp(lo.f2, hi.f2, t)))
    }

    /// Absorption-edge energies (keV) inside `[lo, hi]`, taken at the midpoint
    /// of each closely spaced row pair.
    pub fn edges_kev(&self, lo_kev: f64, hi_kev: f64) -> Vec<f64> {
        self.rows
            .windows(2)
            .filter(|w| w[1].energy_ev - w[0].energy_ev < EDGE_SPACING_EV)
            .map(|w| 0.5 * (w[0].energy_ev + w[1].energy_ev) * 1e-3)
            .filter(|&e| e >= lo_kev && e <= hi_kev)
            .collect()
    }
}

/// Log-log where both ordinates are positive, linear in ln E otherwise
/// (f1 goes negative in the soft range of some tables).
fn interp(a: f64, b: f64, t: f64) -> f64 {
    if a > 0.0 && b > 0.0 {
        (a.ln() * (1.0 - t) + b.ln() * t).exp()
    } else {
        a * (1.0 - t) + b * t
    }
}

/// Parse `"Si:1, O:2"` into (symbol, count) pairs.
pub fn parse_formula(formula: &str) -> Result<Vec<(String, f64)>> {
    let mut out = Vec::new();
    for part in formula.split([',', ' ']).filter(|p| !p.is_empty()) {
        let (sym, count) = match part.split_once(':') {
            Some((s, c)) => {
                let n = c
                    .trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Invalid(format!("bad count in formula term `{part}`")))?;
                (s.trim(), n)
            }
            None => (part.trim(), 1.0),
        };
        let canon = elements::canonical_symbol(sym)
            .ok_or_else(|| Error::UnknownElement(sym.to_string()))?;
        if !(count > 0.0 && count.is_finite()) {
            return Err(Error::Invalid(format!(
                "count for {canon} must be positive, got {count}"
            )));
        }
        out.push((canon.to_string(), count));
    }
    if out.is_empty() {
        return Err(Error::Invalid("empty formula".into()));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OpticalConstants {
    pub energy_kev: f64,
    pub delta: f64,
    pub beta: f64,
}

impl OpticalConstants {
    /// n = 1 − δ + iβ.
    pub fn index(&self) -> Complex64 {
        Complex64::new(1.0 - self.delta, self.beta)
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Component {
    count: f64,
    mass: f64,
    table: Arc<ScatteringTable>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Material {
    name: String,
    density_g_cm3: f64,
    components: Vec<Component>,
    absorbing: bool,
}

impl Material {
    /// A material from (table, count) pairs; the table symbol names the element.
    pub fn new(
        name: &str,
        density_g_cm3: f64,
        composition: Vec<(Arc<ScatteringTable>, f64)>,
    ) -> Result<Self> {
        if !(density_g_cm3 > 0.0 && density_g_cm3.is_finite()) {
            return Err(Error::Invalid(format!(
                "{name}: density must be positive, got {density_g_cm3}"
            )));
        }
        if composition.is_empty() {
            return Err(Error::Invalid(format!("{name}: no elements")));
        }
        let mut components = Vec::with_capacity(composition.len());
        for (table, count) in composition {
            if !(count > 0.0 && count.is_finite()) {
                return Err(Error::Invalid(format!(
                    "{name}: count for {} must be positive",
                    table.symbol()
                )));
            }
            let mass = elements::atomic_mass(table.symbol())
                .ok_or_else(|| Error::UnknownElement(table.symbol().to_string()))?;
            components.push(Component { count, mass, table });
        }
        Ok(Self {
            name: name.to_string(),
            density_g_cm3,
            components,
            absorbing: true,
        })
    }

    /// Single-element material backed by a shipped table.
    pub fn builtin_element(name: &str, symbol: &str, density_g_cm3: f64) -> Result<Self> {
        let table = ScatteringTable::builtin(symbol)
            .ok_or_else(|| Error::Invalid(format!("no shipped table for `{symbol}`")))?;
        Self::new(name, density_g_cm3, vec![(Arc::new(table), 1.0)])
    }

    /// Pt 21.45, C (amorphous) 2.26, Si 2.33, diamond 3.515 g/cm³.
    pub fn default_set(name: &str) -> Option<Self> {
        let (sym, rho) = match name {
            "Pt" => ("Pt", 21.45),
            "C" => ("C", 2.26),
            "Si" => ("Si", 2.33),
            "diamond" => ("C", 3.515),
            _ => return None,
        };
        Self::builtin_element(name, sym, rho).ok()
    }

    /// Empty medium: δ = β = 0 everywhere.
    pub fn vacuum() -> Self {
        Self {
            name: "vacuum".into(),
            density_g_cm3: 0.0,
            components: Vec::new(),
            absorbing: false,
        }
    }

    /// Same δ with β forced to zero.
    pub fn without_absorption(&self) -> Self {
        Self {
            absorbing: false,
            ..self.clone()
        }
    }

    pub fn with_density(&self, density_g_cm3: f64) -> Result<Self> {
        if !(density_g_cm3 > 0.0) {
            return Err(Error::Invalid(format!(
                "{}: density must be positive",
                self.name
            )));
        }
        Ok(Self {
            density_g_cm3,
            ..self.clone()
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn density(&self) -> f64 {
        self.density_g_cm3
    }

    pub fn is_vacuum(&self) -> bool {
        self.components.is_empty()
    }

    pub fn elements(&self) -> impl Iterator<Item = (&str, f64)> {
        self.components.iter().map(|c| (c.table.symbol(), c.count))
    }

    pub fn refractive_index(&self, energy_kev: f64) -> Result<OpticalConstants> {
        if !(energy_kev > 0.0) {
            return Err(Error::Invalid(format!(
                "photon energy must be positive, got {energy_kev}"
            )));
        }
        if self.components.is_empty() {
            return Ok(OpticalConstants {
                energy_kev,
                delta: 0.0,
                beta: 0.0,
            });
        }
        let formula_mass: f64 = self.components.iter().map(|c| c.count * c.mass).sum();
        // formula units per m³
        let n_formula = self.density_g_cm3 / formula_mass * N_A * 1e6;
        let lambda = wavelength_m(energy_kev);
        let pref = R_E * lambda * lambda / std::f64::consts::TAU * n_formula;
        let (mut s1, mut s2) = (0.0, 0.0);
        for c in &self.components {
            let (f1, f2) = c.table.factors(energy_kev)?;
            s1 += c.count * f1;
            s2 += c.count * f2;
        }
        Ok(OpticalConstants {
            energy_kev,
            delta: pref * s1,
            beta: if self.absorbing { pref * s2 } else { 0.0 },
        })
    }

    /// Intensity 1/e depth λ/(4πβ) in m; `f64::INFINITY` when β = 0.
    pub fn attenuation_length(&self, energy_kev: f64) -> Result<f64> {
        let oc = self.refractive_index(energy_kev)?;
        if oc.beta <= 0.0 {
            return Ok(f64::INFINITY);
        }
        Ok(wavelength_m(energy_kev) / (4.0 * std::f64::consts::PI * oc.beta))
    }

    /// Union of the constituents' edge energies inside `[lo, hi]` keV.
    pub fn edges_kev(&self, lo_kev: f64, hi_kev: f64) -> Vec<f64> {
        let mut v: Vec<f64> = self
            .components
            .iter()
            .flat_map(|c| c.table.edges_kev(lo_kev, hi_kev))
            .collect();
        v.sort_by(f64::total_cmp);
        v.dedup();
        v
    }

    /// Elements whose table does not cover `[lo, hi]` keV.
    pub fn uncovered(&self, lo_kev: f64, hi_kev: f64) -> Vec<String> {
        self.components
            .iter()
            .filter(|c| !c.table.covers(lo_kev, hi_kev))
            .map(|c| c.table.symbol().to_string())
            .collect()
    }
}
