//! The Wigner map on the discrete cylinder, its inverse, marginals, the
//! trace overlap, and the star product.
//!
//! With `ψ(φ) = (1/√2π) Σ c_ℓ e^{iℓφ}` the Wigner function is
//!
//! ```text
//! W(ℓ, φ) = (1/2π) ∫_{−π}^{π} ψ(φ + φ'/2) ψ*(φ − φ'/2) e^{−iℓφ'} dφ'
//!         = (1/2π) Σ_{m,n} ⟨m|ϱ|n⟩ e^{i(m−n)φ} sinc(π(m+n−2ℓ)/2).
//! ```
//!
//! Elements with `m + n` even feed only the row `ℓ = (m+n)/2`; elements with
//! `m + n` odd feed every row with weights decaying like `1/ℓ`, which is why
//! grids carry `pad` extra rows on each side of the source window.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::numerics::{
    gauss_legendre, half_sinc, half_sinc_sum_above, half_sinc_sum_below, AngleGrid,
    PeriodicSamples,
};
use crate::states::{hermitian_defect, DensityMatrix, OamWindow, PureState, PSD_TOLERANCE};

/// Largest imaginary part tolerated before a Wigner value is declared real.
pub const REALNESS_TOLERANCE: f64 = 1e-11;
/// Residual above which a reconstruction is flagged.
pub const RESIDUAL_WARNING: f64 = 1e-6;
/// Imaginary residue tolerated in the direct star product, whose truncated
/// sums are only accurate to roughly `1/pad²`.
pub const DIRECT_STAR_IMAG_TOLERANCE: f64 = 1e-4;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Exact sums of `W(ℓ, φ_j)` over the rows beyond the stored range.
#[derive(Debug, Clone, PartialEq)]
pub struct Overflow {
    pub above: Vec<f64>,
    pub below: Vec<f64>,
}

/// Real Wigner values on `[l_lo, l_hi] × grid`, stored row-major in `ℓ`.
#[derive(Debug, Clone, PartialEq)]
pub struct WignerGrid {
    source: OamWindow,
    pad: usize,
    grid: AngleGrid,
    values: Vec<f64>,
    overflow: Option<Overflow>,
}

impl WignerGrid {
    /// Rows run over `source` widened by `pad` on both sides.
    pub fn new(source: OamWindow, pad: usize, grid: AngleGrid, values: Vec<f64>) -> Result<Self> {
        let rows = source.size() + 2 * pad;
        if values.len() != rows * grid.n_phi() {
            return Err(Error::invalid(format!(
                "grid of {rows} rows x {} angles needs {} values, got {}",
                grid.n_phi(),
                rows * grid.n_phi(),
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("Wigner values must be finite"));
        }
        Ok(Self {
            source,
            pad,
            grid,
            values,
            overflow: None,
        })
    }

    pub fn source(&self) -> OamWindow {
        self.source
    }

    pub fn pad(&self) -> usize {
        self.pad
    }

    pub fn grid(&self) -> AngleGrid {
        self.grid
    }

    pub fn l_lo(&self) -> i64 {
        self.source.l_min() - self.pad as i64
    }

    pub fn l_hi(&self) -> i64 {
        self.source.l_max() + self.pad as i64
    }

    /// Stored rows as an OAM window.
    pub fn rows(&self) -> OamWindow {
        OamWindow::new(self.l_lo(), self.l_hi()).expect("ordered rows")
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn overflow(&self) -> Option<&Overflow> {
        self.overflow.as_ref()
    }

    /// Drops the overflow sums, leaving only what a grid file can carry.
    pub fn without_overflow(mut self) -> Self {
        self.overflow = None;
        self
    }

    pub fn row(&self, l: i64) -> Option<&[f64]> {
        let n = self.grid.n_phi();
        self.rows()
            .index_of(l)
            .map(|i| &self.values[i * n..(i + 1) * n])
    }

    pub fn value(&self, l: i64, j: usize) -> Option<f64> {
        self.row(l).and_then(|r| r.get(j).copied())
    }

    /// `(ℓ, j, φ_j, W)` in file order.
    pub fn points(&self) -> impl Iterator<Item = (i64, usize, f64, f64)> + '_ {
        let n = self.grid.n_phi();
        self.values.iter().enumerate().map(move |(k, &v)| {
            let (i, j) = (k / n, k % n);
            (self.l_lo() + i as i64, j, self.grid.node(j), v)
        })
    }

    /// Largest pointwise difference to another grid over the common rows.
    pub fn max_abs_difference(&self, other: &WignerGrid) -> Result<f64> {
        check_same_angles(self, other)?;
        let lo = self.l_lo().max(other.l_lo());
        let hi = self.l_hi().min(other.l_hi());
        let mut worst = 0.0_f64;
        for l in lo..=hi {
            let (a, b) = (self.row(l).unwrap(), other.row(l).unwrap());
            for (x, y) in a.iter().zip(b) {
                worst = worst.max((x - y).abs());
            }
        }
        Ok(worst)
    }

    fn from_complex(
        source: OamWindow,
        pad: usize,
        grid: AngleGrid,
        values: Vec<Complex64>,
        overflow: Option<(Vec<Complex64>, Vec<Complex64>)>,
        imag_tolerance: f64,
    ) -> Result<Self> {
        let n = grid.n_phi();
        let l_lo = source.l_min() - pad as i64;
        let mut worst = (0.0_f64, String::new());
        for (k, v) in values.iter().enumerate() {
            if v.im.abs() > worst.0 {
                worst = (
                    v.im.abs(),
                    format!("l={} phi_index={}", l_lo + (k / n) as i64, k % n),
                );
            }
        }
        if worst.0 > imag_tolerance {
            return Err(Error::NotReal {
                max_imag: worst.0,
                location: worst.1,
            });
        }
        let mut out = Self::new(source, pad, grid, values.iter().map(|v| v.re).collect())?;
        out.overflow = overflow.map(|(above, below)| Overflow {
            above: above.iter().map(|v| v.re).collect(),
            below: below.iter().map(|v| v.re).collect(),
        });
        Ok(out)
    }
}

fn check_same_angles(a: &WignerGrid, b: &WignerGrid) -> Result<()> {
    if a.grid != b.grid {
        return Err(Error::invalid(format!(
            "grids disagree on angle resolution ({} vs {})",
            a.grid.n_phi(),
            b.grid.n_phi()
        )));
    }
    Ok(())
}

/// `⟨m|ŵ(ℓ,φ)|n⟩ = e^{i(n−m)φ} sinc(π(m+n−2ℓ)/2) / 2π`.
pub fn kernel_element(m: i64, n: i64, l: i64, phi: f64) -> Complex64 {
    let weight = half_sinc(m + n - 2 * l) / (2.0 * PI);
    if weight == 0.0 {
        return ZERO;
    }
    Complex64::cis((n - m) as f64 * phi) * weight
}

/// Matrix of the Wigner kernel `ŵ(ℓ, φ)` on a window.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelMatrix {
    pub l: i64,
    pub phi: f64,
    pub window: OamWindow,
    pub elements: DMatrix<Complex64>,
}

impl KernelMatrix {
    pub fn hermitian_defect(&self) -> f64 {
        hermitian_defect(&self.elements)
    }

    /// `Tr[ϱ ŵ]` for a density on any window.
    pub fn expectation(&self, rho: &DensityMatrix) -> Complex64 {
        let mut acc = ZERO;
        for (i, m) in self.window.iter().enumerate() {
            for (j, n) in self.window.iter().enumerate() {
                acc += rho.element(m, n) * self.elements[(j, i)];
            }
        }
        acc
    }
}

pub fn kernel_matrix(l: i64, phi: f64, window: OamWindow) -> KernelMatrix {
    let n = window.size();
    let lm = window.l_min();
    let elements = DMatrix::from_fn(n, n, |i, j| kernel_element(lm + i as i64, lm + j as i64, l, phi));
    KernelMatrix {
        l,
        phi,
        window,
        elements,
    }
}

/// Default ℓ padding for a window: `8·span`.
pub fn default_pad(window: OamWindow) -> usize {
    8 * window.span()
}

fn check_band_limit(window: OamWindow, grid: AngleGrid) -> Result<()> {
    if grid.n_phi() <= 2 * window.span() + 2 {
        return Err(Error::BandLimit(format!(
            "{} angles cannot resolve window {window} (need more than {})",
            grid.n_phi(),
            2 * window.span() + 2
        )));
    }
    Ok(())
}

type ComplexRows = (Vec<Complex64>, (Vec<Complex64>, Vec<Complex64>));

/// Wigner values of an arbitrary operator (not necessarily Hermitian), plus
/// the exact overflow sums beyond the stored rows.
fn operator_wigner_values(
    window: OamWindow,
    op: &DMatrix<Complex64>,
    pad: usize,
    grid: AngleGrid,
) -> ComplexRows {
    let n_phi = grid.n_phi();
    let size = window.size();
    let lm = window.l_min();
    let l_lo = lm - pad as i64;
    let l_hi = window.l_max() + pad as i64;
    let rows = (l_hi - l_lo + 1) as usize;
    // q = m + n runs over [2 l_min, 2 l_max]
    let q_lo = 2 * lm;
    let n_q = 2 * size - 1;
    let weights: Vec<Vec<f64>> = (l_lo..=l_hi)
        .map(|l| (0..n_q).map(|k| half_sinc(q_lo + k as i64 - 2 * l)).collect())
        .collect();
    let above_w: Vec<f64> = (0..n_q).map(|k| half_sinc_sum_above(q_lo + k as i64, l_hi)).collect();
    let below_w: Vec<f64> = (0..n_q).map(|k| half_sinc_sum_below(q_lo + k as i64, l_lo)).collect();

    let mut values = vec![ZERO; rows * n_phi];
    let mut above = vec![ZERO; n_phi];
    let mut below = vec![ZERO; n_phi];
    let mut by_q = vec![ZERO; n_q];
    for j in 0..n_phi {
        let phi = grid.node(j);
        by_q.iter_mut().for_each(|b| *b = ZERO);
        for a in 0..size {
            for b in 0..size {
                let z = op[(a, b)];
                if z == ZERO {
                    continue;
                }
                by_q[a + b] += z * Complex64::cis((a as f64 - b as f64) * phi);
            }
        }
        for (i, w) in weights.iter().enumerate() {
            let mut acc = ZERO;
            for (bq, wq) in by_q.iter().zip(w) {
                if *wq != 0.0 {
                    acc += bq * *wq;
                }
            }
            values[i * n_phi + j] = acc / (2.0 * PI);
        }
        above[j] = by_q.iter().zip(&above_w).map(|(b, w)| b * *w).sum::<Complex64>() / (2.0 * PI);
        below[j] = by_q.iter().zip(&below_w).map(|(b, w)| b * *w).sum::<Complex64>() / (2.0 * PI);
    }
    (values, (above, below))
}

/// Wigner function from OAM matrix elements (closed-form kernel).
pub fn wigner_from_oam(rho: &DensityMatrix, pad: usize, grid: AngleGrid) -> Result<WignerGrid> {
    check_band_limit(rho.window(), grid)?;
    let (values, overflow) = operator_wigner_values(rho.window(), rho.matrix(), pad, grid);
    WignerGrid::from_complex(rho.window(), pad, grid, values, Some(overflow), REALNESS_TOLERANCE)
}

/// Wigner function of a pure state from the angle-representation integral.
///
/// For each `φ` the integrand `f(t) = ψ(φ+t/2) ψ*(φ−t/2)` is split into its
/// 2π-periodic and 2π-antiperiodic parts using the exact half-angle values of
/// `ψ`. Both parts are band-limited, so their harmonic content is recovered
/// exactly by a discrete Fourier transform; the periodic part integrates
/// against `e^{−iℓt}` to a single harmonic and the antiperiodic part, built
/// from half-integer frequencies, integrates in closed form.
pub fn wigner_from_angle(state: &PureState, pad: usize, grid: AngleGrid) -> Result<WignerGrid> {
    let window = state.window();
    check_band_limit(window, grid)?;
    let n_phi = grid.n_phi();
    let (lm, lx) = (window.l_min(), window.l_max());
    let l_lo = lm - pad as i64;
    let l_hi = lx + pad as i64;
    let rows = (l_hi - l_lo + 1) as usize;
    // Harmonics of both parts lie in [l_min, l_max]; any node count above
    // the span separates them.
    let n_t = 2 * (window.span() + 1);
    let t_nodes: Vec<f64> = (0..n_t)
        .map(|k| -PI + 2.0 * PI * k as f64 / n_t as f64)
        .collect();
    let harmonics: Vec<i64> = (lm..=lx).collect();
    // e^{−iht_k} for each harmonic
    let dft: Vec<Vec<Complex64>> = harmonics
        .iter()
        .map(|&h| t_nodes.iter().map(|&t| Complex64::cis(-(h as f64) * t)).collect())
        .collect();

    let mut values = vec![ZERO; rows * n_phi];
    let mut above = vec![ZERO; n_phi];
    let mut below = vec![ZERO; n_phi];
    let mut periodic = vec![ZERO; n_t];
    let mut antiperiodic = vec![ZERO; n_t];
    for j in 0..n_phi {
        let phi = grid.node(j);
        for (k, &t) in t_nodes.iter().enumerate() {
            let f = state.wavefunction_at(phi + t / 2.0) * state.wavefunction_at(phi - t / 2.0).conj();
            let g = state.wavefunction_at(phi + t / 2.0 + PI)
                * state.wavefunction_at(phi - t / 2.0 - PI).conj();
            periodic[k] = (f + g) * 0.5;
            antiperiodic[k] = (f - g) * 0.5 * Complex64::cis(-t / 2.0);
        }
        let coeff = |samples: &[Complex64], row: &[Complex64]| -> Complex64 {
            samples.iter().zip(row).map(|(s, e)| s * e).sum::<Complex64>() / n_t as f64
        };
        let p_h: Vec<Complex64> = dft.iter().map(|row| coeff(&periodic, row)).collect();
        // antiperiodic harmonics h + 1/2 with h in [l_min, l_max − 1]
        let a_h: Vec<Complex64> = dft.iter().map(|row| coeff(&antiperiodic, row)).collect();
        for i in 0..rows {
            let l = l_lo + i as i64;
            let mut acc = if window.contains(l) {
                p_h[(l - lm) as usize]
            } else {
                ZERO
            };
            for (h, a) in harmonics.iter().zip(&a_h) {
                let w = half_sinc(2 * h + 1 - 2 * l);
                acc += a * w;
            }
            values[i * n_phi + j] = acc;
        }
        above[j] = harmonics
            .iter()
            .zip(&a_h)
            .map(|(h, a)| a * half_sinc_sum_above(2 * h + 1, l_hi))
            .sum();
        below[j] = harmonics
            .iter()
            .zip(&a_h)
            .map(|(h, a)| a * half_sinc_sum_below(2 * h + 1, l_lo))
            .sum();
    }
    WignerGrid::from_complex(window, pad, grid, values, Some((above, below)), REALNESS_TOLERANCE)
}

/// `Σ_ℓ W(ℓ, φ_j)`, including the overflow sums when the grid carries them.
pub fn marginal_angle(w: &WignerGrid) -> PeriodicSamples {
    let n = w.grid.n_phi();
    let mut sums = vec![0.0; n];
    for row in w.values.chunks(n) {
        for (s, v) in sums.iter_mut().zip(row) {
            *s += v;
        }
    }
    if let Some(over) = &w.overflow {
        for j in 0..n {
            sums[j] += over.above[j] + over.below[j];
        }
    }
    PeriodicSamples::from_real(w.grid, &sums).expect("one sum per node")
}

/// `∫ W(ℓ, φ) dφ` for every stored row.
pub fn marginal_oam(w: &WignerGrid) -> Vec<(i64, f64)> {
    let n = w.grid.n_phi();
    let dphi = w.grid.spacing();
    w.values
        .chunks(n)
        .enumerate()
        .map(|(i, row)| (w.l_lo() + i as i64, row.iter().sum::<f64>() * dphi))
        .collect()
}

/// `Σ_ℓ ∫ W dφ` over the stored rows.
pub fn normalization(w: &WignerGrid) -> f64 {
    marginal_oam(w).iter().map(|(_, p)| p).sum()
}

/// `2π Σ_ℓ ∫ W_ϱ W_σ dφ` over the common rows, which approaches `Tr(ϱσ)`.
pub fn overlap(a: &WignerGrid, b: &WignerGrid) -> Result<f64> {
    check_same_angles(a, b)?;
    let lo = a.l_lo().max(b.l_lo());
    let hi = a.l_hi().min(b.l_hi());
    let mut acc = 0.0;
    for l in lo..=hi {
        let (ra, rb) = (a.row(l).unwrap(), b.row(l).unwrap());
        acc += ra.iter().zip(rb).map(|(x, y)| x * y).sum::<f64>();
    }
    Ok(2.0 * PI * acc * a.grid.spacing())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReconstructionMethod {
    /// Least-squares inverse of the forward map restricted to the stored grid.
    LeastSquares,
    /// `ϱ = 2π Σ_ℓ ∫ ŵ(ℓ,φ) W(ℓ,φ) dφ` over the stored rows.
    KernelSum,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReconstructionStatus {
    Ok,
    /// The forward map of the result misses the input by more than
    /// [`RESIDUAL_WARNING`].
    HighResidual,
}

#[derive(Debug, Clone)]
pub struct Reconstruction {
    pub density: DensityMatrix,
    /// `max |map(ϱ) − W|` over the stored grid.
    pub residual: f64,
    pub status: ReconstructionStatus,
}

/// Least-squares reconstruction of the density operator behind `w`.
pub fn reconstruct_density(w: &WignerGrid, target: OamWindow) -> Result<Reconstruction> {
    reconstruct_density_with(w, target, ReconstructionMethod::LeastSquares)
}

pub fn reconstruct_density_with(
    w: &WignerGrid,
    target: OamWindow,
    method: ReconstructionMethod,
) -> Result<Reconstruction> {
    let (op, residual) = reconstruct_operator(w, target, method)?;
    let density = DensityMatrix::from_parts_unchecked(target, op);
    let min_eig = density.eigenvalues().first().copied().unwrap_or(0.0);
    if min_eig < -PSD_TOLERANCE && method == ReconstructionMethod::LeastSquares {
        return Err(Error::invalid(format!(
            "reconstructed operator is not positive semidefinite (eigenvalue {min_eig:e})"
        )));
    }
    let status = if residual > RESIDUAL_WARNING {
        ReconstructionStatus::HighResidual
    } else {
        ReconstructionStatus::Ok
    };
    Ok(Reconstruction {
        density,
        residual,
        status,
    })
}

/// Hermitized, trace-normalized operator and its residual.
fn reconstruct_operator(
    w: &WignerGrid,
    target: OamWindow,
    method: ReconstructionMethod,
) -> Result<(DMatrix<Complex64>, f64)> {
    let mut op = match method {
        ReconstructionMethod::LeastSquares => least_squares_operator(w, target)?,
        ReconstructionMethod::KernelSum => kernel_sum_operator(w, target),
    };
    let herm = (&op + op.adjoint()) * Complex64::new(0.5, 0.0);
    op = herm;
    let trace = op.trace().re;
    if trace.abs() < 1e-300 {
        return Err(Error::invalid("reconstructed operator has zero trace"));
    }
    op /= Complex64::new(trace, 0.0);
    let (mapped, _) = operator_wigner_values(target, &op, 0, w.grid);
    let residual = forward_residual(w, target, &op, &mapped);
    Ok((op, residual))
}

fn forward_residual(
    w: &WignerGrid,
    target: OamWindow,
    op: &DMatrix<Complex64>,
    _scratch: &[Complex64],
) -> f64 {
    // Evaluate the forward map on the rows of `w` directly.
    let pad_lo = target.l_min() - w.l_lo();
    let pad_hi = w.l_hi() - target.l_max();
    let n = w.grid.n_phi();
    let extra = pad_lo.max(pad_hi).max(0) as usize;
    let (values, _) = operator_wigner_values(target, op, extra, w.grid);
    let l0 = target.l_min() - extra as i64;
    let mut worst = 0.0_f64;
    for l in w.l_lo()..=w.l_hi() {
        let i = (l - l0) as usize;
        let stored = w.row(l).unwrap();
        for j in 0..n {
            worst = worst.max((values[i * n + j].re - stored[j]).abs());
        }
    }
    worst
}

fn least_squares_operator(w: &WignerGrid, target: OamWindow) -> Result<DMatrix<Complex64>> {
    let grid = w.grid;
    let n_phi = grid.n_phi();
    let size = target.size();
    let lm = target.l_min();
    let rows = w.rows();

    let mut deficient = Vec::new();
    let max_h = target.span() as i64;
    for h in 1..=max_h {
        if 2 * h >= n_phi as i64 {
            for m in target.iter().filter(|m| target.contains(m - h)) {
                deficient.push(format!("rho[{m},{}] (harmonic {h} aliased)", m - h));
            }
        }
    }
    for m in target.iter() {
        for n in target.iter() {
            let q = m + n;
            if q % 2 == 0 && !rows.contains(q / 2) && m <= n {
                deficient.push(format!("rho[{m},{n}] (row {} not stored)", q / 2));
            }
        }
    }
    if !deficient.is_empty() {
        return Err(Error::RankDeficient {
            directions: deficient,
        });
    }

    // Harmonic h of each stored row: Ŵ_h(ℓ) = (1/2π) Σ_{m−n=h} ϱ_mn s(m+n−2ℓ).
    let row_list: Vec<i64> = rows.iter().collect();
    let spectra: Vec<Vec<Complex64>> = row_list
        .iter()
        .map(|&l| {
            let row = w.row(l).unwrap();
            (-max_h..=max_h)
                .map(|h| {
                    let sum: Complex64 = row
                        .iter()
                        .enumerate()
                        .map(|(j, v)| Complex64::cis(-(h as f64) * grid.node(j)) * *v)
                        .sum();
                    sum / n_phi as f64
                })
                .collect()
        })
        .collect();

    let mut op = DMatrix::zeros(size, size);
    for h in -max_h..=max_h {
        let ms: Vec<i64> = target.iter().filter(|m| target.contains(m - h)).collect();
        let hidx = (h + max_h) as usize;
        let design = DMatrix::from_fn(row_list.len(), ms.len(), |r, c| {
            half_sinc(2 * ms[c] - h - 2 * row_list[r]) / (2.0 * PI)
        });
        let rhs_re = DVector::from_fn(row_list.len(), |r, _| spectra[r][hidx].re);
        let rhs_im = DVector::from_fn(row_list.len(), |r, _| spectra[r][hidx].im);
        let svd = design.clone().svd(false, true);
        let smax = svd.singular_values.max();
        let mut bad = Vec::new();
        for (k, s) in svd.singular_values.iter().enumerate() {
            if *s <= 1e-12 * smax.max(1e-300) {
                let v = svd.v_t.as_ref().unwrap().row(k).transpose();
                let (imax, _) = v
                    .iter()
                    .enumerate()
                    .fold((0, 0.0), |acc, (i, x)| if x.abs() > acc.1 { (i, x.abs()) } else { acc });
                bad.push(format!("rho[{},{}]", ms[imax], ms[imax] - h));
            }
        }
        if !bad.is_empty() {
            return Err(Error::RankDeficient { directions: bad });
        }
        let qr = design.qr();
        let (q, r) = (qr.q(), qr.r());
        let solve = |rhs: &DVector<f64>| {
            r.solve_upper_triangular(&(q.transpose() * rhs))
                .ok_or_else(|| Error::invalid("singular least-squares block"))
        };
        let (x_re, x_im) = (solve(&rhs_re)?, solve(&rhs_im)?);
        for (c, m) in ms.iter().enumerate() {
            let (i, j) = ((m - lm) as usize, (m - h - lm) as usize);
            op[(i, j)] = Complex64::new(x_re[c], x_im[c]);
        }
    }
    Ok(op)
}

fn kernel_sum_operator(w: &WignerGrid, target: OamWindow) -> DMatrix<Complex64> {
    let size = target.size();
    let lm = target.l_min();
    let dphi = w.grid.spacing();
    DMatrix::from_fn(size, size, |i, j| {
        let (m, n) = (lm + i as i64, lm + j as i64);
        let mut acc = ZERO;
        for l in w.l_lo()..=w.l_hi() {
            if half_sinc(m + n - 2 * l) == 0.0 {
                continue;
            }
            for (jj, v) in w.row(l).unwrap().iter().enumerate() {
                acc += kernel_element(m, n, l, w.grid.node(jj)) * *v;
            }
        }
        acc * (2.0 * PI * dphi)
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StarMethod {
    /// Reconstruct both operators, multiply, and map forward.
    Operator,
    /// Twisted convolution of the two grids evaluated by quadrature.
    Direct,
}

/// Wigner function of the operator product `ϱσ`.
///
/// The result lives on the union of the source windows, padded by the
/// smaller of the two pads. Only Hermitian products have a real Wigner
/// function; others are rejected.
pub fn star_product(a: &WignerGrid, b: &WignerGrid, method: StarMethod) -> Result<WignerGrid> {
    check_same_angles(a, b)?;
    let window = a.source.union(&b.source);
    let pad = a.pad.min(b.pad);
    check_band_limit(window, a.grid)?;
    match method {
        StarMethod::Operator => {
            let (ra, _) = reconstruct_operator(a, a.source, ReconstructionMethod::LeastSquares)?;
            let (rb, _) = reconstruct_operator(b, b.source, ReconstructionMethod::LeastSquares)?;
            let ra = crate::states::embed_matrix(&ra, a.source, window);
            let rb = crate::states::embed_matrix(&rb, b.source, window);
            let product = ra * rb;
            let (values, overflow) = operator_wigner_values(window, &product, pad, a.grid);
            WignerGrid::from_complex(window, pad, a.grid, values, Some(overflow), REALNESS_TOLERANCE)
        }
        StarMethod::Direct => {
            if a.pad == 0 || b.pad == 0 {
                return Err(Error::invalid(
                    "direct star product needs padded grids (pad >= 1)",
                ));
            }
            let values = direct_star(a, b, window, pad);
            WignerGrid::from_complex(window, pad, a.grid, values, None, DIRECT_STAR_IMAG_TOLERANCE)
        }
    }
}

/// Band-limited rows of a grid with their angular Fourier coefficients, and
/// the unfolded function `E(d, c) = Σ_ℓ W(ℓ, c) e^{iℓd}`.
struct Unfolded {
    l_lo: i64,
    l_hi: i64,
    /// `coeffs[i][k]` multiplies `e^{i(k − kmax)c}` in row `l_lo + i`.
    coeffs: Vec<Vec<Complex64>>,
    kmax: i64,
}

impl Unfolded {
    fn new(w: &WignerGrid) -> Self {
        let n = w.grid.n_phi();
        let kmax = (n / 2 - 1) as i64;
        let coeffs = w
            .values
            .chunks(n)
            .map(|row| {
                (-kmax..=kmax)
                    .map(|k| {
                        let s: Complex64 = row
                            .iter()
                            .enumerate()
                            .map(|(j, v)| Complex64::cis(-(k as f64) * w.grid.node(j)) * *v)
                            .sum();
                        s / n as f64
                    })
                    .collect()
            })
            .collect();
        Self {
            l_lo: w.l_lo(),
            l_hi: w.l_hi(),
            coeffs,
            kmax,
        }
    }

    /// Interpolated row values `W(ℓ, c)` for every stored ℓ.
    fn rows_at(&self, c: f64, out: &mut [f64]) {
        let step = Complex64::cis(c);
        let start = Complex64::cis(-(self.kmax as f64) * c);
        for (row, slot) in self.coeffs.iter().zip(out.iter_mut()) {
            let mut e = start;
            let mut acc = 0.0;
            for a in row {
                acc += (a * e).re;
                e *= step;
            }
            *slot = acc;
        }
    }

    /// `E(d, c)` with the argument pair folded so that `d ∈ (−π, π]`, and a
    /// closed-form estimate of the rows beyond the stored range.
    fn eval(&self, d: f64, c: f64, scratch: &mut [f64]) -> Complex64 {
        let turns = (d / (2.0 * PI)).round();
        let d = d - 2.0 * PI * turns;
        let c = c + PI * turns;
        self.rows_at(c, scratch);
        let step = Complex64::cis(d);
        let mut e = Complex64::cis(self.l_lo as f64 * d);
        let mut acc = ZERO;
        for v in scratch.iter() {
            acc += e * *v;
            e *= step;
        }
        acc + self.tail(d, scratch)
    }

    /// Beyond the source window the rows behave like `(−1)^ℓ α(c)/(ℓ − m₀)`
    /// to leading order; `α` is read off the two outermost rows and the
    /// remaining sum `Σ_{|ℓ−m₀|>R} (−1)^ℓ e^{iℓd}/(ℓ−m₀)` is a sawtooth tail.
    fn tail(&self, d: f64, rows: &[f64]) -> Complex64 {
        let m0 = 0.5 * (self.l_lo + self.l_hi) as f64;
        let radius = 0.5 * (self.l_hi - self.l_lo) as f64;
        let sign = |l: i64| if l.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
        let top = rows[rows.len() - 1];
        let bottom = rows[0];
        let alpha = 0.5
            * (sign(self.l_hi) * top * (self.l_hi as f64 - m0)
                + sign(self.l_lo) * bottom * (self.l_lo as f64 - m0));
        if alpha == 0.0 {
            return ZERO;
        }
        let s = d + PI;
        // Σ_{n>R} sin(ns)/n over integer or half-integer n, for s ∈ (0, 2π).
        let integer_radius = (self.l_hi - self.l_lo) % 2 == 0;
        let (full, first) = if integer_radius {
            (0.5 * (PI - s), 1.0)
        } else {
            (0.5 * PI, 0.5)
        };
        let mut partial = 0.0;
        let mut nn = first;
        while nn <= radius + 1e-9 {
            partial += (nn * s).sin() / nn;
            nn += 1.0;
        }
        Complex64::cis(m0 * s) * Complex64::new(0.0, 2.0 * alpha * (full - partial))
    }
}

/// `W_{ϱσ}(ℓ,φ) = (1/2π) ∫∫ e^{−iℓθ} E_ϱ(θ/2 − u, φ + θ/4 + u/2)
/// E_σ(u + θ/2, φ − θ/4 + u/2) du dθ` over `θ, u ∈ (−π, π)`.
///
/// In the shift variables `ψ₁ = u + θ/2`, `ψ₂ = u − θ/2` this is the twisted
/// convolution `Σ_{ℓ₁,ℓ₂} ∫∫ W_ϱ(ℓ+ℓ₁, φ+ψ₁/2) W_σ(ℓ+ℓ₂, φ+ψ₂/2)
/// e^{i(ℓ₂ψ₁−ℓ₁ψ₂)} / 2π`, taken over the parallelogram `|ψ₁−ψ₂| < π`,
/// `|ψ₁+ψ₂| < 2π`, with half-angle shifts folded back into `(−π, π]`.
fn direct_star(a: &WignerGrid, b: &WignerGrid, window: OamWindow, pad: usize) -> Vec<Complex64> {
    let ua = Unfolded::new(a);
    let ub = Unfolded::new(b);
    let l_lo = window.l_min() - pad as i64;
    let l_hi = window.l_max() + pad as i64;
    let reach = [a.l_lo(), a.l_hi(), b.l_lo(), b.l_hi(), l_lo, l_hi]
        .iter()
        .map(|l| l.unsigned_abs())
        .max()
        .unwrap() as f64
        + a.grid.n_phi() as f64 / 4.0;
    let rule = |a0: f64, b0: f64| {
        let n = (0.6 * reach * (b0 - a0)).ceil() as usize + 16;
        gauss_legendre(n, a0, b0)
    };
    let theta_nodes: Vec<(f64, f64)> = rule(-PI, 0.0).into_iter().chain(rule(0.0, PI)).collect();
    let grid = a.grid;
    let n_phi = grid.n_phi();
    let rows_out = (l_hi - l_lo + 1) as usize;

    let columns: Vec<Vec<Complex64>> = (0..n_phi)
        .into_par_iter()
        .map(|j| {
            let phi = grid.node(j);
            let mut scratch_a = vec![0.0; ua.coeffs.len()];
            let mut scratch_b = vec![0.0; ub.coeffs.len()];
            let mut column = vec![ZERO; rows_out];
            for &(theta, wt) in &theta_nodes {
                // Fold points of the two half-angle arguments split the u range.
                let mut cuts = vec![-PI, PI];
                for cut in [theta / 2.0 - PI, theta / 2.0 + PI, PI - theta / 2.0, -PI - theta / 2.0] {
                    if cut > -PI && cut < PI {
                        cuts.push(cut);
                    }
                }
                cuts.sort_by(f64::total_cmp);
                let mut inner = ZERO;
                for pair in cuts.windows(2) {
                    if pair[1] - pair[0] < 1e-14 {
                        continue;
                    }
                    for (u, wu) in rule(pair[0], pair[1]) {
                        let ea = ua.eval(theta / 2.0 - u, phi + theta / 4.0 + u / 2.0, &mut scratch_a);
                        let eb = ub.eval(u + theta / 2.0, phi - theta / 4.0 + u / 2.0, &mut scratch_b);
                        inner += ea * eb * wu;
                    }
                }
                let step = Complex64::cis(-theta);
                let mut e = Complex64::cis(-(l_lo as f64) * theta);
                for slot in column.iter_mut() {
                    *slot += e * inner * wt;
                    e *= step;
                }
            }
            column.iter_mut().for_each(|v| *v /= 2.0 * PI);
            column
        })
        .collect();

    let mut values = vec![ZERO; rows_out * n_phi];
    for (j, column) in columns.iter().enumerate() {
        for (i, v) in column.iter().enumerate() {
            values[i * n_phi + j] = *v;
        }
    }
    values
}
