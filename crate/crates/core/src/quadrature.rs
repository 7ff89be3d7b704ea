//! Discretisation of ∫ d²q dω over the accepted phase space.
//!
//! The sinc² ridge is far narrower than the pupil, so k_x is replaced by the
//! ridge coordinate u = Δk_z L/2. Gauss–Legendre covers u ∈ [−4π, 4π] and one
//! extra node at u = 0 carries the analytic remainder π − ∫ sinc² of the
//! outer lobes, making the rule exact for integrands constant across the ridge.
//! k_y and ω use panelled Gauss–Legendre with breaks at every kink of the
//! acceptance bands and at absorption edges.
//!
//! Inside the exchange-symmetric sub-domain the node set is invariant under
//! (ω, k_y) → (ω_p − ω, −k_y) with identical weights.

use std::f64::consts::PI;
use std::fmt;
use std::num::NonZeroUsize;
use std::str::FromStr;

use gauss_quad::legendre::GaussLegendre;
use rayon::prelude::*;

use crate::constants::HBAR_EV_S;
use crate::error::{Error, Result};
use crate::spdc::{sinc, Acceptance};

const U_MAX: f64 = 4.0 * PI;
const MIN_PANEL_NODES: usize = 4;
const BREAK_TOL_KEV: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridSpec {
    pub n_omega: usize,
    pub n_kx: usize,
    pub n_ky: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { n_omega: 96, n_kx: 48, n_ky: 24 }
    }
}

impl GridSpec {
    pub fn doubled(self) -> Self {
        Self {
            n_omega: 2 * self.n_omega,
            n_kx: 2 * self.n_kx,
            n_ky: 2 * self.n_ky,
        }
    }
}

impl fmt::Display for GridSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}x{}", self.n_omega, self.n_kx, self.n_ky)
    }
}

impl FromStr for GridSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.trim().split(['x', 'X']).collect();
        let bad = || Error::Invalid(format!("grid `{s}` is not of the form <omega>x<kx>x<ky>"));
        if parts.len() != 3 {
            return Err(bad());
        }
        let n: Vec<usize> = parts
            .iter()
            .map(|p| p.trim().parse::<usize>().map_err(|_| bad()))
            .collect::<Result<_>>()?;
        if n.iter().any(|&v| v < 2) {
            return Err(Error::Invalid(format!("grid `{s}`: every dimension needs >= 2 nodes")));
        }
        Ok(Self { n_omega: n[0], n_kx: n[1], n_ky: n[2] })
    }
}

/// Gauss–Legendre rule on [−1, 1], ascending and exactly antisymmetric.
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    let rule = GaussLegendre::new(NonZeroUsize::new(n.max(1)).unwrap());
    let mut v: Vec<(f64, f64)> = rule.as_node_weight_pairs().to_vec();
    v.sort_by(|a, b| a.0.total_cmp(&b.0));
    let m = v.len();
    for i in 0..m / 2 {
        let x = 0.5 * (v[m - 1 - i].0 - v[i].0);
        let w = 0.5 * (v[m - 1 - i].1 + v[i].1);
        v[i] = (-x, w);
        v[m - 1 - i] = (x, w);
    }
    if m % 2 == 1 {
        v[m / 2].0 = 0.0;
    }
    v
}

fn mapped(rule: &[(f64, f64)], a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
    let h = 0.5 * (b - a);
    let c = 0.5 * (a + b);
    rule.iter().map(move |&(x, w)| (c + h * x, h * w))
}

/// One quadrature node in signal-mode coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeNode {
    pub energy_kev: f64,
    pub kx: f64,
    pub ky: f64,
    /// Longitudinal wave numbers of the photon at E and its partner at E_p − E.
    pub s1: f64,
    pub s2: f64,
    /// Measure ∫ d k_x d k_y (dω) sinc²(Δk_z L/2) carried by this node.
    pub weight: f64,
    /// Node belongs to the exchange-symmetric sub-domain.
    pub symmetric: bool,
}

impl ModeNode {
    /// In-plane angle of the photon at E (signal side).
    pub fn alpha_signal(&self) -> f64 {
        self.kx.atan2(self.s1)
    }

    /// In-plane angle magnitude of the partner photon at E_p − E.
    pub fn alpha_partner(&self) -> f64 {
        self.kx.atan2(self.s2)
    }
}

struct RidgeRule {
    nodes: Vec<(f64, f64)>,
}

impl RidgeRule {
    fn new(n: usize) -> Self {
        let gl: Vec<(f64, f64)> = mapped(&gauss_legendre(n), -U_MAX, U_MAX).collect();
        let inner: f64 = gl.iter().map(|&(u, w)| w * sinc(u).powi(2)).sum();
        let mut nodes: Vec<(f64, f64)> = gl.into_iter().map(|(u, w)| (u, w * sinc(u).powi(2))).collect();
        // outer lobes folded onto the ridge centre
        nodes.push((0.0, PI - inner));
        Self { nodes }
    }
}

/// Transverse nodes at one energy; weights are per unit ω.
pub fn transverse_nodes(acc: &Acceptance, energy_kev: f64, n_kx: usize, n_ky: usize) -> Vec<ModeNode> {
    transverse_with(acc, energy_kev, &RidgeRule::new(n_kx), &gauss_legendre((n_ky / 2).max(1)))
}

fn transverse_with(acc: &Acceptance, energy_kev: f64, ridge: &RidgeRule, ky_rule: &[(f64, f64)]) -> Vec<ModeNode> {
    let Some((a, b)) = acc.accepted_band(energy_kev) else {
        return Vec::new();
    };
    let mut panels: Vec<(f64, f64, bool)> = Vec::with_capacity(3);
    match acc.symmetric_band(energy_kev) {
        Some((va, vb)) => {
            let tol = 1e-12 * b;
            if va - a > tol {
                panels.push((a, va, false));
            }
            panels.push((va, vb, true));
            if b - vb > tol {
                panels.push((vb, b, false));
            }
        }
        None => panels.push((a, b, false)),
    }
    let source = acc.source();
    let l = source.crystal.thickness_m;
    let mut out = Vec::with_capacity(2 * panels.len() * ky_rule.len() * ridge.nodes.len());
    for &(p0, p1, symmetric) in &panels {
        for (ky_abs, wy) in mapped(ky_rule, p0, p1) {
            for sign in [-1.0, 1.0] {
                let ky = sign * ky_abs;
                for &(u, wu) in &ridge.nodes {
                    let Some(r) = source.ridge(energy_kev, 2.0 * u / l) else {
                        continue;
                    };
                    let kx2 = r.q2 - ky * ky;
                    if !(kx2 > 0.0) {
                        continue;
                    }
                    let kx = kx2.sqrt();
                    let jac = (2.0 / l) / r.slope(kx);
                    out.push(ModeNode {
                        energy_kev,
                        kx,
                        ky,
                        s1: r.s1,
                        s2: r.s2,
                        weight: wy * wu * jac,
                        symmetric,
                    });
                }
            }
        }
    }
    out
}

#[derive(Debug, Clone)]
pub struct QuadratureGrid {
    pub spec: GridSpec,
    pub nodes: Vec<ModeNode>,
    /// (energy keV, weight in rad/s) of each ω node.
    pub omega_nodes: Vec<(f64, f64)>,
    pub support_kev: (f64, f64),
    pub refinement: u32,
}

impl QuadratureGrid {
    pub fn total_weight(&self) -> f64 {
        self.nodes.iter().map(|n| n.weight).sum()
    }
}

/// Full 3-D grid over the accepted support. `extra_breaks_kev` are device
/// absorption edges; their mirror images are added automatically.
pub fn build_grid(acc: &Acceptance, spec: GridSpec, extra_breaks_kev: &[f64]) -> Result<QuadratureGrid> {
    let ep = acc.pump_kev;
    let (lo, hi) = acc.support_kev();
    if !(hi > lo) {
        return Err(Error::EmptyWindow);
    }
    let mut breaks: Vec<f64> = acc.breakpoints();
    breaks.extend(extra_breaks_kev.iter().flat_map(|&e| [e, ep - e]));
    breaks.retain(|&e| e > lo + BREAK_TOL_KEV && e < hi - BREAK_TOL_KEV);
    breaks.push(lo);
    breaks.push(hi);
    breaks.sort_by(f64::total_cmp);
    breaks.dedup_by(|a, b| (*a - *b).abs() < BREAK_TOL_KEV);

    let panels: Vec<(f64, f64)> = breaks.windows(2).map(|w| (w[0], w[1])).collect();
    let total = hi - lo;
    let mut counts: Vec<usize> = panels
        .iter()
        .map(|&(a, b)| ((spec.n_omega as f64 * (b - a) / total).round() as usize).max(MIN_PANEL_NODES))
        .collect();
    let partner: Vec<Option<usize>> = panels
        .iter()
        .map(|&(a, b)| {
            panels
                .iter()
                .position(|&(c, d)| (c - (ep - b)).abs() < 1e-7 && (d - (ep - a)).abs() < 1e-7)
        })
        .collect();
    for i in 0..panels.len() {
        if let Some(j) = partner[i] {
            let m = counts[i].max(counts[j]);
            counts[i] = m;
            counts[j] = m;
        }
    }

    let mut omega_nodes: Vec<(f64, f64)> = Vec::new();
    let mut panel_nodes: Vec<Vec<(f64, f64)>> = Vec::with_capacity(panels.len());
    for (i, &(a, b)) in panels.iter().enumerate() {
        let nodes: Vec<(f64, f64)> = match partner[i] {
            // upper half of a mirrored pair reuses the lower half exactly
            Some(j) if j < i => panel_nodes[j].iter().rev().map(|&(e, w)| (ep - e, w)).collect(),
            _ => mapped(&gauss_legendre(counts[i]), a, b).collect(),
        };
        panel_nodes.push(nodes);
    }
    for p in &panel_nodes {
        omega_nodes.extend(p.iter().map(|&(e, w)| (e, w * 1e3 / HBAR_EV_S)));
    }

    let ridge = RidgeRule::new(spec.n_kx);
    let ky_rule = gauss_legendre((spec.n_ky / 2).max(1));
    let per_omega: Vec<Vec<ModeNode>> = omega_nodes
        .par_iter()
        .map(|&(e, w)| {
            let mut v = transverse_with(acc, e, &ridge, &ky_rule);
            for n in &mut v {
                n.weight *= w;
            }
            v
        })
        .collect();
    let nodes: Vec<ModeNode> = per_omega.into_iter().flatten().collect();
    if nodes.is_empty() {
        return Err(Error::EmptyWindow);
    }
    Ok(QuadratureGrid {
        spec,
        nodes,
        omega_nodes,
        support_kev: (lo, hi),
        refinement: 0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn grid_spec_round_trip() {
        let g: GridSpec = "96x48x24".parse().unwrap();
        assert_eq!(g, GridSpec::default());
        assert_eq!(g.to_string(), "96x48x24");
        assert_eq!(g.doubled().to_string(), "192x96x48");
        assert!("96x48".parse::<GridSpec>().is_err());
        assert!("96x1x24".parse::<GridSpec>().is_err());
    }

    #[test]
    fn legendre_rule_is_symmetric_and_exact() {
        for n in [1, 2, 5, 24, 48] {
            let r = gauss_legendre(n);
            for i in 0..n {
                assert_eq!(r[i].0, -r[n - 1 - i].0);
                assert_eq!(r[i].1, r[n - 1 - i].1);
            }
            let s: f64 = r.iter().map(|&(x, w)| w * x.powi(2 * n as i32 - 2)).sum();
            assert_relative_eq!(s, 2.0 / (2 * n - 1) as f64, max_relative = 1e-12);
        }
    }

    #[test]
    fn ridge_rule_integrates_sinc_squared_exactly() {
        let r = RidgeRule::new(48);
        let s: f64 = r.nodes.iter().map(|n| n.1).sum();
        assert_relative_eq!(s, PI, max_relative = 1e-15);
        // the folded tail is a small positive remainder
        let tail = r.nodes.last().unwrap().1;
        assert!(tail > 0.0 && tail < 0.1);
    }
}
