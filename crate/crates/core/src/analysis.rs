//! Negativity metrics and the checks behind the statement that a pure state
//! on the cylinder has a non-negative Wigner function exactly when it is an
//! OAM eigenstate.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::AngleGrid;
use crate::phase_space::{default_pad, marginal_oam, wigner_from_angle, wigner_from_oam, WignerGrid};
use crate::states::{displace, random_pure_state, to_density, OamWindow, PureState};

/// Default threshold separating genuine negativity from roundoff.
pub const DEFAULT_TOLERANCE: f64 = 1e-8;
/// Fidelity an eigenstate classification requires.
pub const EIGENSTATE_FIDELITY: f64 = 1.0 - 1e-10;
/// Threshold for the flatness and autocorrelation checks.
pub const CHECK_TOLERANCE: f64 = 1e-10;
/// Wigner values below this magnitude count as outside a row's support.
pub const SUPPORT_TOLERANCE: f64 = 1e-10;
/// Largest disagreement tolerated between the two forward paths.
pub const PATH_AGREEMENT: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    OamEigenstate,
    NegativeWitnessed,
    Inconclusive,
}

impl Classification {
    pub fn as_str(self) -> &'static str {
        match self {
            Classification::OamEigenstate => "oam_eigenstate",
            Classification::NegativeWitnessed => "negative_witnessed",
            Classification::Inconclusive => "inconclusive",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    pub l: i64,
    pub phi: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NearestEigenstate {
    pub l0: i64,
    pub fidelity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NegativityReport {
    pub min_value: f64,
    pub argmin: PhasePoint,
    /// `Σ_ℓ ∫ max(0, −W) dφ`.
    pub negative_volume: f64,
    pub is_nonnegative: bool,
    pub classification: Classification,
    pub nearest_eigenstate: NearestEigenstate,
    pub tolerance: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

/// Grid resolution for the certifier; `None` picks the defaults for the
/// state's window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Controls {
    pub n_phi: Option<usize>,
    pub pad: Option<usize>,
    pub tolerance: f64,
}

impl Default for Controls {
    fn default() -> Self {
        Self {
            n_phi: None,
            pad: None,
            tolerance: DEFAULT_TOLERANCE,
        }
    }
}

impl Controls {
    pub fn resolve(&self, window: OamWindow) -> Result<(AngleGrid, usize)> {
        let grid = match self.n_phi {
            Some(n) => AngleGrid::new(n)?,
            None => AngleGrid::for_span(window.span()),
        };
        Ok((grid, self.pad.unwrap_or_else(|| default_pad(window))))
    }
}

struct Scan {
    min_value: f64,
    argmin: PhasePoint,
    negative_volume: f64,
}

fn scan(w: &WignerGrid) -> Scan {
    let mut out = Scan {
        min_value: f64::INFINITY,
        argmin: PhasePoint { l: w.l_lo(), phi: -PI },
        negative_volume: 0.0,
    };
    for (l, _, phi, v) in w.points() {
        if v < out.min_value {
            out.min_value = v;
            out.argmin = PhasePoint { l, phi };
        }
        if v < 0.0 {
            out.negative_volume -= v;
        }
    }
    out.negative_volume *= w.grid().spacing();
    out
}

/// Exhaustive scan of a stored grid. The nearest eigenstate is read off the
/// OAM marginal.
pub fn negativity(w: &WignerGrid, tolerance: f64) -> NegativityReport {
    let s = scan(w);
    let (l0, fidelity) = marginal_oam(w)
        .into_iter()
        .fold((w.l_lo(), f64::NEG_INFINITY), |best, (l, p)| if p > best.1 { (l, p) } else { best });
    let is_nonnegative = s.min_value >= -tolerance;
    let classification = if !is_nonnegative {
        Classification::NegativeWitnessed
    } else if fidelity >= EIGENSTATE_FIDELITY && single_row_support(w) == Some(l0) {
        Classification::OamEigenstate
    } else {
        Classification::Inconclusive
    };
    NegativityReport {
        min_value: s.min_value,
        argmin: s.argmin,
        negative_volume: s.negative_volume,
        is_nonnegative,
        classification,
        nearest_eigenstate: NearestEigenstate { l0, fidelity },
        tolerance,
        seed: None,
    }
}

/// The single row carrying the whole grid, if every angle column is
/// supported on one ℓ and that ℓ is the same for every angle.
pub fn single_row_support(w: &WignerGrid) -> Option<i64> {
    let n = w.grid().n_phi();
    let mut common = None;
    for j in 0..n {
        let mut found = None;
        for l in w.l_lo()..=w.l_hi() {
            if w.value(l, j).unwrap().abs() > SUPPORT_TOLERANCE {
                if found.is_some() {
                    return None;
                }
                found = Some(l);
            }
        }
        match (found, common) {
            (None, _) => return None,
            (Some(l), None) => common = Some(l),
            (Some(l), Some(c)) if l != c => return None,
            _ => {}
        }
    }
    common
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Flatness {
    pub flat: bool,
    /// `(φ, a)` maximizing the violation, when not flat.
    pub witness: Option<(f64, f64)>,
    pub max_violation: f64,
}

/// Largest `|ψ(φ−a/2)|·|ψ(φ+a/2)| − |ψ(φ)|²` over grid angles and grid
/// separations. A non-negative Wigner function forces this to vanish.
pub fn flatness_check(state: &PureState, grid: AngleGrid) -> Flatness {
    let n = grid.n_phi();
    let h = grid.spacing();
    let mut best = (f64::NEG_INFINITY, (0.0, 0.0));
    for j in 0..n {
        let phi = grid.node(j);
        let centre = state.wavefunction_at(phi).norm_sqr();
        for k in 0..n {
            let a = k as f64 * h;
            let side = state.wavefunction_at(phi - a / 2.0).norm() * state.wavefunction_at(phi + a / 2.0).norm();
            let v = side - centre;
            if v > best.0 {
                best = (v, (phi, a));
            }
        }
    }
    let flat = best.0 <= CHECK_TOLERANCE;
    Flatness {
        flat,
        witness: (!flat).then_some(best.1),
        max_violation: best.0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Autocorrelation {
    pub ok: bool,
    pub max_abs: f64,
}

/// `max_{1≤|j|≤j_max} |Σ_k f(k) f*(k+j)|`; vanishes when `f` is the Fourier
/// series of a function of constant modulus.
pub fn autocorrelation_check(f: &[Complex64], j_max: usize) -> Result<Autocorrelation> {
    if j_max == 0 {
        return Err(Error::invalid("autocorrelation needs j_max >= 1"));
    }
    let mut worst = 0.0_f64;
    for j in 1..=j_max.min(f.len().saturating_sub(1)) {
        let acc: Complex64 = f.iter().zip(&f[j..]).map(|(a, b)| a * b.conj()).sum();
        // negative shifts give the conjugate
        worst = worst.max(acc.norm());
    }
    Ok(Autocorrelation {
        ok: worst <= CHECK_TOLERANCE,
        max_abs: worst,
    })
}

/// End-to-end classification of a pure state.
///
/// Both forward paths are computed and must agree. The minimum is taken on
/// the matrix-element path, whose structural zeros are exact. A non-negative
/// result must then survive the flatness check, single-row support with a
/// constant ℓ₀ across angles, and the eigenstate fidelity test before it is
/// reported as an eigenstate.
pub fn hudson_certify(state: &PureState, controls: &Controls) -> Result<NegativityReport> {
    let (grid, pad) = controls.resolve(state.window())?;
    let w = wigner_from_oam(&to_density(state), pad, grid)?;
    let w_angle = wigner_from_angle(state, pad, grid)?;
    let paths_agree = w.max_abs_difference(&w_angle)? <= PATH_AGREEMENT;

    let s = scan(&w);
    let (l0, fidelity) = state.nearest_eigenstate();
    let is_nonnegative = s.min_value >= -controls.tolerance;
    let classification = if !is_nonnegative {
        Classification::NegativeWitnessed
    } else if paths_agree
        && fidelity >= EIGENSTATE_FIDELITY
        && flatness_check(state, grid).flat
        && single_row_support(&w) == Some(l0)
    {
        Classification::OamEigenstate
    } else {
        Classification::Inconclusive
    };
    Ok(NegativityReport {
        min_value: s.min_value,
        argmin: s.argmin,
        negative_volume: s.negative_volume,
        is_nonnegative,
        classification,
        nearest_eigenstate: NearestEigenstate { l0, fidelity },
        tolerance: controls.tolerance,
        seed: None,
    })
}

/// `max |W_displaced(ℓ, φ) − W(ℓ−ℓd, φ−φd)|` over the common rows.
pub fn covariance_residual(state: &PureState, l_d: i64, phi_d: f64, grid: AngleGrid, pad: usize) -> Result<f64> {
    let steps = grid
        .steps_of(phi_d)
        .ok_or_else(|| Error::invalid(format!("displacement angle {phi_d} is not a grid node")))?;
    let moved = displace(state, l_d, phi_d);
    let base = wigner_from_oam(&to_density(state), pad, grid)?;
    let shifted = wigner_from_oam(&to_density(&moved), pad, grid)?;
    let mut worst = 0.0_f64;
    for (l, j, _, v) in shifted.points() {
        if let Some(src) = base.value(l - l_d, grid.wrap_index(j, -steps)) {
            worst = worst.max((v - src).abs());
        }
    }
    Ok(worst)
}

/// Certifies `samples` random states with seeds `seed, seed+1, …`, in seed
/// order.
pub fn hudson_sweep(window: OamWindow, samples: usize, seed: u64, controls: &Controls) -> Result<Vec<NegativityReport>> {
    (0..samples as u64)
        .into_par_iter()
        .map(|i| {
            let s = seed.wrapping_add(i);
            let mut report = hudson_certify(&random_pure_state(window, s), controls)?;
            report.seed = Some(s);
            Ok(report)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::states::{apply_phase_function, coherent_state, oam_eigenstate, von_mises_state};

    fn w(a: i64, b: i64) -> OamWindow {
        OamWindow::new(a, b).unwrap()
    }

    #[test]
    fn eigenstate_report() {
        let e = oam_eigenstate(3, w(-4, 4)).unwrap();
        let r = hudson_certify(&e, &Controls::default()).unwrap();
        assert_eq!(r.classification, Classification::OamEigenstate);
        assert_eq!(r.min_value, 0.0);
        assert_eq!(r.negative_volume, 0.0);
        assert_eq!(r.nearest_eigenstate.l0, 3);
        assert_eq!(r.nearest_eigenstate.fidelity, 1.0);
        let g = wigner_from_oam(&to_density(&e), 4, AngleGrid::for_span(8)).unwrap();
        let plain = negativity(&g, DEFAULT_TOLERANCE);
        assert_eq!(plain.classification, Classification::OamEigenstate);
        assert_eq!(g.value(3, 0).unwrap(), 1.0 / (2.0 * PI));
    }

    #[test]
    fn displaced_delta_is_eigenstate() {
        let e = displace(&oam_eigenstate(0, w(-4, 4)).unwrap(), 2, 1.0);
        let r = hudson_certify(&e, &Controls::default()).unwrap();
        assert_eq!(r.classification, Classification::OamEigenstate);
        assert_eq!(r.nearest_eigenstate.l0, 2);
    }

    #[test]
    fn coherent_and_von_mises_states_are_negative() {
        let c = coherent_state(0, 0.0, 1.0, w(-10, 10)).unwrap();
        let v = von_mises_state(2.0, w(-16, 16)).unwrap();
        for s in [c, v] {
            let r = hudson_certify(&s, &Controls::default()).unwrap();
            assert_eq!(r.classification, Classification::NegativeWitnessed);
            assert!(r.min_value < -1e-6);
            assert!(r.negative_volume > 0.0);
        }
        let zero = von_mises_state(0.0, w(-4, 4)).unwrap();
        let r = hudson_certify(&zero, &Controls::default()).unwrap();
        assert_eq!(r.classification, Classification::OamEigenstate);
    }

    #[test]
    fn flatness() {
        let g = AngleGrid::new(32).unwrap();
        let e = oam_eigenstate(1, w(-3, 3)).unwrap();
        let f = flatness_check(&e, g);
        assert!(f.flat && f.max_violation <= 1e-14 && f.witness.is_none());
        let phased = apply_phase_function(&e, |l| 0.3 * (l * l) as f64);
        assert!(flatness_check(&phased, g).flat);
        let c = coherent_state(0, 0.0, 1.0, w(-10, 10)).unwrap();
        let f = flatness_check(&c, AngleGrid::for_span(20));
        assert!(!f.flat);
        let (phi, _) = f.witness.unwrap();
        assert!((phi.abs() - PI).abs() < 0.2, "{phi}");
    }

    #[test]
    fn autocorrelation() {
        let mut delta = vec![Complex64::new(0.0, 0.0); 9];
        delta[4] = Complex64::new(1.0, 0.0);
        let r = autocorrelation_check(&delta, 8).unwrap();
        assert!(r.ok && r.max_abs == 0.0);
        let c = coherent_state(0, 0.0, 1.0, w(-10, 10)).unwrap();
        assert!(!autocorrelation_check(c.coefficients(), 12).unwrap().ok);
        assert!(autocorrelation_check(c.coefficients(), 0).is_err());
    }

    #[test]
    fn covariance_identity_is_exact() {
        let psi = random_pure_state(w(-2, 2), 4);
        let g = AngleGrid::for_span(4);
        assert_eq!(covariance_residual(&psi, 0, 0.0, g, 8).unwrap(), 0.0);
        assert!(covariance_residual(&psi, 1, 2.0 * g.spacing(), g, 8).unwrap() <= 1e-12);
        assert!(covariance_residual(&psi, 1, 0.123, g, 8).is_err());
    }

    #[test]
    fn sweep_is_ordered_by_seed() {
        let reports = hudson_sweep(w(-2, 2), 6, 40, &Controls::default()).unwrap();
        let seeds: Vec<_> = reports.iter().map(|r| r.seed.unwrap()).collect();
        assert_eq!(seeds, (40..46).collect::<Vec<_>>());
        assert!(reports.iter().all(|r| r.classification == Classification::NegativeWitnessed));
    }

    #[test]
    fn report_json_shape() {
        let e = oam_eigenstate(0, w(-1, 1)).unwrap();
        let mut r = hudson_certify(&e, &Controls::default()).unwrap();
        let v = serde_json::to_value(&r).unwrap();
        assert_eq!(v["classification"], "oam_eigenstate");
        assert!(v.get("seed").is_none());
        assert_eq!(v["nearest_eigenstate"]["l0"], 0);
        r.seed = Some(3);
        let back: NegativityReport = serde_json::from_str(&serde_json::to_string(&r).unwrap()).unwrap();
        assert_eq!(back, r);
    }
}
