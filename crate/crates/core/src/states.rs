//! Truncated OAM states, density matrices, and the E(2) group actions on them.
//!
//! Convention: the angle wavefunction of coefficients `c_ℓ` is
//! `ψ(φ) = (1/√2π) Σ_ℓ c_ℓ e^{iℓφ}`.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::numerics::{fourier_coefficient, theta3, AngleGrid, PeriodicSamples};

/// Tolerance on `Σ|c_ℓ|² = 1` for a [`PureState`].
pub const NORM_TOLERANCE: f64 = 1e-12;
/// Largest probability mass a constructor may drop outside its window.
pub const TAIL_MASS_LIMIT: f64 = 1e-12;
/// Eigenvalues of a density matrix may dip this far below zero.
pub const PSD_TOLERANCE: f64 = 1e-10;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Contiguous OAM truncation window `[l_min, l_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct OamWindow {
    l_min: i64,
    l_max: i64,
}

impl OamWindow {
    pub fn new(l_min: i64, l_max: i64) -> Result<Self> {
        if l_min > l_max {
            return Err(Error::invalid(format!(
                "window lower bound {l_min} exceeds upper bound {l_max}"
            )));
        }
        Ok(Self { l_min, l_max })
    }

    /// Symmetric window `[−half_width, half_width]`.
    pub fn symmetric(half_width: u32) -> Self {
        let h = half_width as i64;
        Self { l_min: -h, l_max: h }
    }

    pub fn l_min(&self) -> i64 {
        self.l_min
    }

    pub fn l_max(&self) -> i64 {
        self.l_max
    }

    pub fn size(&self) -> usize {
        (self.l_max - self.l_min + 1) as usize
    }

    /// `l_max − l_min`, the largest OAM difference inside the window.
    pub fn span(&self) -> usize {
        (self.l_max - self.l_min) as usize
    }

    pub fn contains(&self, l: i64) -> bool {
        (self.l_min..=self.l_max).contains(&l)
    }

    pub fn contains_window(&self, other: &OamWindow) -> bool {
        self.l_min <= other.l_min && other.l_max <= self.l_max
    }

    pub fn index_of(&self, l: i64) -> Option<usize> {
        self.contains(l).then(|| (l - self.l_min) as usize)
    }

    pub fn iter(&self) -> impl Iterator<Item = i64> {
        self.l_min..=self.l_max
    }

    pub fn shifted(&self, by: i64) -> Self {
        Self {
            l_min: self.l_min + by,
            l_max: self.l_max + by,
        }
    }

    pub fn union(&self, other: &OamWindow) -> Self {
        Self {
            l_min: self.l_min.min(other.l_min),
            l_max: self.l_max.max(other.l_max),
        }
    }
}

impl std::fmt::Display for OamWindow {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}:{}", self.l_min, self.l_max)
    }
}

/// Unit-norm vector of OAM amplitudes on a window.
#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    window: OamWindow,
    coefficients: Vec<Complex64>,
}

impl PureState {
    pub fn new(window: OamWindow, coefficients: Vec<Complex64>) -> Result<Self> {
        if coefficients.len() != window.size() {
            return Err(Error::invalid(format!(
                "window {window} holds {} amplitudes, got {}",
                window.size(),
                coefficients.len()
            )));
        }
        let norm: f64 = coefficients.iter().map(|c| c.norm_sqr()).sum();
        if (norm - 1.0).abs() > NORM_TOLERANCE {
            return Err(Error::invalid(format!(
                "state norm is {norm}, expected 1 within {NORM_TOLERANCE:e}"
            )));
        }
        Ok(Self {
            window,
            coefficients,
        })
    }

    /// Rescales `coefficients` to unit norm.
    pub fn normalized(window: OamWindow, mut coefficients: Vec<Complex64>) -> Result<Self> {
        let norm = coefficients.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::invalid("cannot normalize a zero or non-finite vector"));
        }
        coefficients.iter_mut().for_each(|c| *c /= norm);
        Self::new(window, coefficients)
    }

    pub fn window(&self) -> OamWindow {
        self.window
    }

    pub fn coefficients(&self) -> &[Complex64] {
        &self.coefficients
    }

    /// Amplitude `c_ℓ`, zero outside the window.
    pub fn coefficient(&self, l: i64) -> Complex64 {
        self.window
            .index_of(l)
            .map_or(ZERO, |i| self.coefficients[i])
    }

    pub fn norm_sqr(&self) -> f64 {
        self.coefficients.iter().map(|c| c.norm_sqr()).sum()
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &PureState) -> Complex64 {
        self.window
            .iter()
            .map(|l| self.coefficient(l).conj() * other.coefficient(l))
            .sum()
    }

    /// The eigenstate `|ℓ₀⟩` with the largest overlap, and that overlap `|c_ℓ₀|²`.
    pub fn nearest_eigenstate(&self) -> (i64, f64) {
        let mut best = (self.window.l_min, -1.0);
        for (l, c) in self.window.iter().zip(&self.coefficients) {
            if c.norm_sqr() > best.1 {
                best = (l, c.norm_sqr());
            }
        }
        best
    }

    /// `ψ(φ) = (1/√2π) Σ c_ℓ e^{iℓφ}` at any angle.
    pub fn wavefunction_at(&self, phi: f64) -> Complex64 {
        let sum: Complex64 = self
            .window
            .iter()
            .zip(&self.coefficients)
            .map(|(l, c)| c * Complex64::cis(l as f64 * phi))
            .sum();
        sum / (2.0 * PI).sqrt()
    }

    /// The same state on a larger window.
    pub fn embed(&self, window: OamWindow) -> Result<Self> {
        if !window.contains_window(&self.window) {
            return Err(Error::invalid(format!(
                "window {window} does not contain {}",
                self.window
            )));
        }
        let coefficients = window.iter().map(|l| self.coefficient(l)).collect();
        Ok(Self {
            window,
            coefficients,
        })
    }
}

/// Hermitian, unit-trace, positive semidefinite operator on a window.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    window: OamWindow,
    elements: DMatrix<Complex64>,
}

impl DensityMatrix {
    pub fn new(window: OamWindow, elements: DMatrix<Complex64>) -> Result<Self> {
        let n = window.size();
        if elements.nrows() != n || elements.ncols() != n {
            return Err(Error::invalid(format!(
                "density on window {window} must be {n}x{n}, got {}x{}",
                elements.nrows(),
                elements.ncols()
            )));
        }
        let herm_err = hermitian_defect(&elements);
        if herm_err > NORM_TOLERANCE {
            return Err(Error::invalid(format!(
                "density is not Hermitian (defect {herm_err:e})"
            )));
        }
        let trace = elements.trace();
        if (trace.re - 1.0).abs() > NORM_TOLERANCE || trace.im.abs() > NORM_TOLERANCE {
            return Err(Error::invalid(format!("density trace is {trace}, expected 1")));
        }
        let rho = Self { window, elements };
        let min_eig = rho.eigenvalues().into_iter().fold(f64::INFINITY, f64::min);
        if min_eig < -PSD_TOLERANCE {
            return Err(Error::invalid(format!(
                "density has negative eigenvalue {min_eig:e}"
            )));
        }
        Ok(rho)
    }

    pub(crate) fn from_parts_unchecked(window: OamWindow, elements: DMatrix<Complex64>) -> Self {
        Self { window, elements }
    }

    pub fn window(&self) -> OamWindow {
        self.window
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.elements
    }

    /// `⟨m|ϱ|n⟩`, zero outside the window.
    pub fn element(&self, m: i64, n: i64) -> Complex64 {
        match (self.window.index_of(m), self.window.index_of(n)) {
            (Some(i), Some(j)) => self.elements[(i, j)],
            _ => ZERO,
        }
    }

    pub fn trace(&self) -> f64 {
        self.elements.trace().re
    }

    pub fn purity(&self) -> f64 {
        self.elements.iter().map(|z| z.norm_sqr()).sum()
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut eig: Vec<f64> = self
            .elements
            .clone()
            .symmetric_eigenvalues()
            .iter()
            .copied()
            .collect();
        eig.sort_by(f64::total_cmp);
        eig
    }

    /// `⟨ψ|ϱ|ψ⟩`.
    pub fn fidelity_with(&self, state: &PureState) -> f64 {
        let window = self.window.union(&state.window);
        let mut acc = ZERO;
        for m in window.iter() {
            let cm = state.coefficient(m).conj();
            if cm == ZERO {
                continue;
            }
            for n in window.iter() {
                acc += cm * self.element(m, n) * state.coefficient(n);
            }
        }
        acc.re
    }

    /// The same operator on a larger window.
    pub fn embed(&self, window: OamWindow) -> Result<Self> {
        if !window.contains_window(&self.window) {
            return Err(Error::invalid(format!(
                "window {window} does not contain {}",
                self.window
            )));
        }
        Ok(Self {
            window,
            elements: embed_matrix(&self.elements, self.window, window),
        })
    }
}

pub(crate) fn hermitian_defect(m: &DMatrix<Complex64>) -> f64 {
    let mut worst = 0.0_f64;
    for i in 0..m.nrows() {
        for j in 0..=i {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

pub(crate) fn embed_matrix(
    m: &DMatrix<Complex64>,
    from: OamWindow,
    to: OamWindow,
) -> DMatrix<Complex64> {
    let offset = (from.l_min - to.l_min) as usize;
    let mut out = DMatrix::zeros(to.size(), to.size());
    out.view_mut((offset, offset), (from.size(), from.size()))
        .copy_from(m);
    out
}

/// `|ℓ₀⟩` on `window`.
pub fn oam_eigenstate(l0: i64, window: OamWindow) -> Result<PureState> {
    let idx = window
        .index_of(l0)
        .ok_or_else(|| Error::invalid(format!("eigenstate {l0} lies outside window {window}")))?;
    let mut coefficients = vec![ZERO; window.size()];
    coefficients[idx] = ONE;
    PureState::new(window, coefficients)
}

/// Gaussian-on-the-lattice coherent state
/// `c_ℓ ∝ exp(−(ℓ−ℓ₀)²/(2σ²)) e^{−iℓφ₀}`, whose angle density peaks at `φ₀`.
pub fn coherent_state(l0: i64, phi0: f64, sigma: f64, window: OamWindow) -> Result<PureState> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::invalid(format!("coherent width must be positive, got {sigma}")));
    }
    let offset = |d: i64| (-(d as f64).powi(2) / (sigma * sigma)).exp();
    let total = 1.0 + 2.0 * mass_beyond(0, offset);
    let tail = outside_mass(window, l0, |l| offset(l - l0)) / total;
    if tail >= TAIL_MASS_LIMIT {
        let mut h = 0;
        while 2.0 * mass_beyond(h, offset) / total >= TAIL_MASS_LIMIT {
            h += 1;
        }
        return Err(Error::Truncation {
            reason: format!(
                "coherent state (l0={l0}, sigma={sigma}) leaves mass {tail:e} outside {window}"
            ),
            required_min: l0 - h,
            required_max: l0 + h,
        });
    }
    let coefficients = window
        .iter()
        .map(|l| {
            let amp = (-((l - l0) as f64).powi(2) / (2.0 * sigma * sigma)).exp();
            Complex64::from_polar(amp, -(l as f64) * phi0)
        })
        .collect();
    PureState::normalized(window, coefficients)
}

/// `Σ_{d > h} weight(d)` for a weight decaying in `d`.
fn mass_beyond(h: i64, weight: impl Fn(i64) -> f64) -> f64 {
    let mut sum = 0.0;
    let mut d = h + 1;
    loop {
        let w = weight(d);
        sum += w;
        if w < 1e-300 || w < sum * 1e-18 {
            return sum;
        }
        d += 1;
    }
}

/// Unnormalized mass `Σ_{ℓ ∉ window} weight(ℓ)` of a weight peaked at `center`.
fn outside_mass(window: OamWindow, center: i64, weight: impl Fn(i64) -> f64) -> f64 {
    let mut sum = 0.0;
    // Everything between the centre and the window, then the outer tails.
    let (near_lo, near_hi) = (center.min(window.l_min), center.max(window.l_max));
    for l in near_lo..window.l_min {
        sum += weight(l);
    }
    for l in (window.l_max + 1)..=near_hi {
        sum += weight(l);
    }
    sum + mass_beyond(near_hi - center, |d| weight(center + d))
        + mass_beyond(center - near_lo, |d| weight(center - d))
}

/// `c_ℓ` of the literal theta-function expression, for comparison with
/// [`coherent_state`]:
/// `ψ(φ) = e^{iℓ₀(φ−φ₀)} ϑ₃((φ−φ₀)/2 | e^{−1/(2σ²)}) / √(2π ϑ₃(0 | e^{−1/σ²}))`.
///
/// For `σ = 1` the normalization is `ϑ₃(0|1/e)`, matching the Gaussian
/// coefficients; the argument nome is `e^{−1/2}`.
pub fn coherent_theta_wavefunction(l0: i64, phi0: f64, sigma: f64, phi: f64) -> Result<Complex64> {
    let arg_nome = (-1.0 / (2.0 * sigma * sigma)).exp();
    let norm_nome = (-1.0 / (sigma * sigma)).exp();
    theta_wavefunction(l0, phi0, arg_nome, norm_nome, phi)
}

/// Theta-function wavefunction with independent argument and normalization
/// nomes. The published pair `(e^{−2}, e^{−1})` does not give a unit-norm
/// state under the `ϑ₃(z|q) = Σ q^{n²} e^{2inz}` convention.
pub fn theta_wavefunction(
    l0: i64,
    phi0: f64,
    arg_nome: f64,
    norm_nome: f64,
    phi: f64,
) -> Result<Complex64> {
    let profile = theta3(0.5 * (phi - phi0), arg_nome)?;
    let norm = (2.0 * PI * theta3(0.0, norm_nome)?).sqrt();
    Ok(Complex64::cis(l0 as f64 * (phi - phi0)) * profile / norm)
}

/// State whose angle wavefunction is `exp(κ cos φ)/√(2π I₀(2κ))`; its angle
/// density is the von Mises distribution with concentration `2κ`.
///
/// Coefficients come from projecting the sampled wavefunction onto the OAM
/// harmonics.
pub fn von_mises_state(kappa: f64, window: OamWindow) -> Result<PureState> {
    if !(kappa >= 0.0) || !kappa.is_finite() {
        return Err(Error::invalid(format!("kappa must be >= 0, got {kappa}")));
    }
    if kappa == 0.0 {
        return oam_eigenstate(0, window).map_err(|_| Error::Truncation {
            reason: format!("von Mises state (kappa=0) is |0>, outside {window}"),
            required_min: 0,
            required_max: 0,
        });
    }
    // Grow a symmetric support until the discarded mass is negligible.
    let mut half = (window.l_min.abs().max(window.l_max.abs())).max(8);
    let (support, coeffs) = loop {
        let support = OamWindow::symmetric(half as u32);
        let coeffs = von_mises_projection(kappa, support);
        let edge = coeffs[0].norm_sqr() + coeffs[coeffs.len() - 1].norm_sqr();
        if edge < 1e-26 || half > 4096 {
            break (support, coeffs);
        }
        half *= 2;
    };
    let coefficient = |l: i64| support.index_of(l).map_or(ZERO, |i| coeffs[i]);
    let missing: f64 = support
        .iter()
        .filter(|l| !window.contains(*l))
        .map(|l| coefficient(l).norm_sqr())
        .sum();
    if missing >= TAIL_MASS_LIMIT {
        let mut h = 0_i64;
        while support
            .iter()
            .filter(|l| l.abs() > h)
            .map(|l| coefficient(l).norm_sqr())
            .sum::<f64>()
            >= TAIL_MASS_LIMIT
        {
            h += 1;
        }
        return Err(Error::Truncation {
            reason: format!("von Mises state (kappa={kappa}) leaves mass {missing:e} outside {window}"),
            required_min: -h,
            required_max: h,
        });
    }
    PureState::normalized(window, window.iter().map(coefficient).collect())
}

fn von_mises_projection(kappa: f64, support: OamWindow) -> Vec<Complex64> {
    let half = support.l_max;
    let grid = AngleGrid::new((4 * (half as usize + 1)).max(64)).expect("even grid");
    let scale = 1.0 / (2.0 * PI * crate::numerics::bessel_i0(2.0 * kappa).expect("kappa >= 0")).sqrt();
    let samples = PeriodicSamples::from_fn(grid, |phi| Complex64::new(scale * (kappa * phi.cos()).exp(), 0.0));
    // c_ℓ = (1/√2π) ∫ ψ(φ) e^{−iℓφ} dφ = √2π (𝓕ψ)(−ℓ)
    support
        .iter()
        .map(|l| (2.0 * PI).sqrt() * fourier_coefficient(&samples, -l))
        .collect()
}

/// Independent standard complex Gaussian amplitudes from ChaCha20 seeded with
/// `seed`, normalized.
pub fn random_pure_state(window: OamWindow, seed: u64) -> PureState {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let coefficients = window
        .iter()
        .map(|_| {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            Complex64::new(re, im)
        })
        .collect();
    PureState::normalized(window, coefficients).expect("gaussian vector is non-zero")
}

/// `Ê|ψ⟩` with `Ê|ℓ⟩ = |ℓ−1⟩`; the window moves down by one.
pub fn lower_charge(state: &PureState) -> PureState {
    PureState {
        window: state.window.shifted(-1),
        coefficients: state.coefficients.clone(),
    }
}

/// `D(ℓd, φd)|ψ⟩` with `D(ℓd, φd)|m⟩ = e^{−iℓdφd/2} e^{−iφd m} |m+ℓd⟩`.
pub fn displace(state: &PureState, l_d: i64, phi_d: f64) -> PureState {
    let global = -(l_d as f64) * phi_d / 2.0;
    let coefficients = state
        .window
        .iter()
        .zip(&state.coefficients)
        .map(|(m, c)| c * Complex64::cis(global - phi_d * m as f64))
        .collect();
    PureState {
        window: state.window.shifted(l_d),
        coefficients,
    }
}

/// `e^{i f(L̂)}|ψ⟩`.
pub fn apply_phase_function(state: &PureState, f: impl Fn(i64) -> f64) -> PureState {
    let coefficients = state
        .window
        .iter()
        .zip(&state.coefficients)
        .map(|(l, c)| c * Complex64::cis(f(l)))
        .collect();
    PureState {
        window: state.window,
        coefficients,
    }
}

/// `|ψ⟩⟨ψ|`.
pub fn to_density(state: &PureState) -> DensityMatrix {
    let n = state.window.size();
    let c = &state.coefficients;
    let elements = DMatrix::from_fn(n, n, |i, j| c[i] * c[j].conj());
    DensityMatrix::from_parts_unchecked(state.window, elements)
}

/// `Σ_k w_k |ψ_k⟩⟨ψ_k|` on the union of the component windows.
pub fn mix(components: &[(f64, PureState)]) -> Result<DensityMatrix> {
    let first = components
        .first()
        .ok_or_else(|| Error::invalid("mixture needs at least one component"))?;
    if components.iter().any(|(w, _)| !(*w >= 0.0)) {
        return Err(Error::invalid("mixture weights must be non-negative"));
    }
    let total: f64 = components.iter().map(|(w, _)| w).sum();
    if (total - 1.0).abs() > NORM_TOLERANCE {
        return Err(Error::invalid(format!("mixture weights sum to {total}, expected 1")));
    }
    let window = components
        .iter()
        .fold(first.1.window, |acc, (_, s)| acc.union(&s.window));
    let n = window.size();
    let mut elements = DMatrix::zeros(n, n);
    for (w, state) in components {
        let embedded = state.embed(window)?;
        let c = &embedded.coefficients;
        for i in 0..n {
            for j in 0..n {
                elements[(i, j)] += c[i] * c[j].conj() * *w;
            }
        }
    }
    DensityMatrix::new(window, elements)
}

/// Samples of `ψ(φ)` on `grid`; the grid must resolve twice the window size.
pub fn angle_wavefunction(state: &PureState, grid: AngleGrid) -> Result<PeriodicSamples> {
    if grid.n_phi() <= 2 * state.window.size() {
        return Err(Error::invalid(format!(
            "angle grid of {} nodes aliases window {} (need more than {})",
            grid.n_phi(),
            state.window,
            2 * state.window.size()
        )));
    }
    Ok(PeriodicSamples::from_fn(grid, |phi| state.wavefunction_at(phi)))
}
