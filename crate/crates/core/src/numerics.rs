//! Circle-Fourier primitives, rectangle-rule quadrature, trigonometric
//! interpolation and the handful of special functions the toolkit needs.
//!
//! All angles live on the uniform grid `φ_j = −π + 2πj/n` and every integral
//! over the circle is the rectangle rule on that grid, which is exact for
//! trigonometric polynomials of degree below `n`.

use std::f64::consts::PI;

use num_complex::Complex64;
use statrs::function::gamma::digamma;

use crate::error::{Error, Result};

/// Series truncation threshold used by [`theta3`] and [`bessel_i0`].
pub const SERIES_TOLERANCE: f64 = 1e-16;

/// Uniform grid of `n_phi` nodes on `[−π, π)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct AngleGrid {
    n_phi: usize,
}

impl AngleGrid {
    pub fn new(n_phi: usize) -> Result<Self> {
        if n_phi < 4 || n_phi % 2 != 0 {
            return Err(Error::invalid(format!(
                "angle grid needs an even node count >= 4, got {n_phi}"
            )));
        }
        Ok(Self { n_phi })
    }

    /// Default resolution for a window of the given span: `4·span + 4`.
    pub fn for_span(span: usize) -> Self {
        Self {
            n_phi: 4 * span + 4,
        }
    }

    pub fn n_phi(&self) -> usize {
        self.n_phi
    }

    pub fn spacing(&self) -> f64 {
        2.0 * PI / self.n_phi as f64
    }

    pub fn node(&self, j: usize) -> f64 {
        -PI + self.spacing() * j as f64
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_phi).map(move |j| self.node(j))
    }

    /// Number of grid steps represented by the angle `delta`, if `delta` is a
    /// whole multiple of the spacing (to within `1e-9` steps).
    pub fn steps_of(&self, delta: f64) -> Option<i64> {
        let steps = delta / self.spacing();
        let rounded = steps.round();
        ((steps - rounded).abs() < 1e-9).then_some(rounded as i64)
    }

    /// Node index reached from `j` after `steps` grid steps, wrapping around.
    pub fn wrap_index(&self, j: usize, steps: i64) -> usize {
        (j as i64 + steps).rem_euclid(self.n_phi as i64) as usize
    }
}

/// Complex samples of a 2π-periodic function on an [`AngleGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicSamples {
    grid: AngleGrid,
    values: Vec<Complex64>,
}

impl PeriodicSamples {
    pub fn new(grid: AngleGrid, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.n_phi() {
            return Err(Error::invalid(format!(
                "expected {} samples, got {}",
                grid.n_phi(),
                values.len()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: AngleGrid, f: impl Fn(f64) -> Complex64) -> Self {
        let values = grid.nodes().map(f).collect();
        Self { grid, values }
    }

    pub fn from_real(grid: AngleGrid, values: &[f64]) -> Result<Self> {
        Self::new(grid, values.iter().map(|&v| Complex64::new(v, 0.0)).collect())
    }

    pub fn grid(&self) -> AngleGrid {
        self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn map(&self, f: impl Fn(Complex64) -> Complex64) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().copied().map(f).collect(),
        }
    }
}

/// Rectangle-rule approximation of `∫_{2π} g(φ) dφ`.
pub fn circle_quadrature(samples: &PeriodicSamples) -> Complex64 {
    let sum: Complex64 = samples.values.iter().sum();
    sum * samples.grid.spacing()
}

/// `(𝓕g)(k) = (1/2π) ∫ g(φ) e^{ikφ} dφ`, evaluated with the rectangle rule.
///
/// Alias-free only for `|k| < n_phi/2`; the caller is responsible for that.
pub fn fourier_coefficient(samples: &PeriodicSamples, k: i64) -> Complex64 {
    let grid = samples.grid;
    let sum: Complex64 = samples
        .values
        .iter()
        .enumerate()
        .map(|(j, v)| v * Complex64::cis(k as f64 * grid.node(j)))
        .sum();
    sum / grid.n_phi() as f64
}

/// Evaluates the trigonometric interpolant of `samples` at an arbitrary angle.
///
/// Harmonics `|k| < n/2` are used directly; the Nyquist harmonic enters as a
/// cosine so that the interpolant reproduces every sample at the nodes.
pub fn trig_interpolate(samples: &PeriodicSamples, phi: f64) -> Complex64 {
    let n = samples.grid.n_phi() as i64;
    let half = n / 2;
    let mut acc = Complex64::new(0.0, 0.0);
    for k in (1 - half)..half {
        acc += fourier_coefficient(samples, k) * Complex64::cis(-(k as f64) * phi);
    }
    acc + fourier_coefficient(samples, half) * (half as f64 * phi).cos()
}

/// Third Jacobi theta function in the nome convention
/// `ϑ₃(z|q) = Σ_{n∈ℤ} q^{n²} e^{2inz}`.
pub fn theta3(z: f64, q: f64) -> Result<f64> {
    theta3_with_tolerance(z, q, SERIES_TOLERANCE)
}

pub fn theta3_with_tolerance(z: f64, q: f64, tol: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&q) {
        return Err(Error::invalid(format!("theta3 nome must lie in [0, 1), got {q}")));
    }
    let mut sum = 1.0;
    let mut n = 1.0_f64;
    loop {
        let weight = q.powf(n * n);
        if weight < tol {
            break;
        }
        sum += 2.0 * weight * (2.0 * n * z).cos();
        n += 1.0;
    }
    Ok(sum)
}

/// Modified Bessel function `I₀(x)` from its power series.
pub fn bessel_i0(x: f64) -> Result<f64> {
    bessel_i0_with_tolerance(x, SERIES_TOLERANCE)
}

pub fn bessel_i0_with_tolerance(x: f64, tol: f64) -> Result<f64> {
    if !(x >= 0.0) {
        return Err(Error::invalid(format!("bessel_i0 needs x >= 0, got {x}")));
    }
    let y = 0.25 * x * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut m = 0.0;
    loop {
        m += 1.0;
        term *= y / (m * m);
        sum += term;
        if term < tol * sum {
            break;
        }
    }
    Ok(sum)
}

/// `β(x) = Σ_{n≥0} (−1)ⁿ/(x+n)` for `x > 0`.
pub fn alternating_tail(x: f64) -> f64 {
    0.5 * (digamma(0.5 * (x + 1.0)) - digamma(0.5 * x))
}

/// `sin(πq/2)/(πq/2)`: 1 at zero, exactly zero for even `q ≠ 0`, and
/// `(−1)^t·2/(π|q|)` for odd `|q| = 2t+1`.
///
/// These are the weights with which the matrix element `⟨m|ϱ|n⟩` enters the
/// Wigner row `ℓ`, with `q = m + n − 2ℓ`.
pub fn half_sinc(q: i64) -> f64 {
    if q == 0 {
        1.0
    } else if q % 2 == 0 {
        0.0
    } else {
        let t = (q.abs() - 1) / 2;
        let sign = if t % 2 == 0 { 1.0 } else { -1.0 };
        sign * 2.0 / (PI * q.abs() as f64)
    }
}

/// `Σ_{ℓ > hi} half_sinc(q − 2ℓ)`, in closed form.
pub fn half_sinc_sum_above(q: i64, hi: i64) -> f64 {
    if q % 2 == 0 {
        return if q / 2 > hi { 1.0 } else { 0.0 };
    }
    // |q − 2ℓ| = 2t + 1 with t = ℓ − (q+1)/2
    let t0 = hi + 1 - (q + 1) / 2;
    odd_sinc_tail(t0)
}

/// `Σ_{ℓ < lo} half_sinc(q − 2ℓ)`, in closed form.
pub fn half_sinc_sum_below(q: i64, lo: i64) -> f64 {
    if q % 2 == 0 {
        return if q / 2 < lo { 1.0 } else { 0.0 };
    }
    // |q − 2ℓ| = 2t + 1 with t = (q−1)/2 − ℓ
    let t0 = (q + 1) / 2 - lo;
    odd_sinc_tail(t0)
}

/// `Σ_{t ≥ t0} (−1)^t / (π (t + 1/2))`, extended to negative `t0` by
/// explicit summation of the leading terms (whose `|q|` index is `−2t − 1`).
fn odd_sinc_tail(t0: i64) -> f64 {
    if t0 >= 0 {
        let sign = if t0 % 2 == 0 { 1.0 } else { -1.0 };
        return sign * alternating_tail(t0 as f64 + 0.5) / PI;
    }
    let head: f64 = (t0..0)
        .map(|t| {
            let sign = if t.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
            sign / (PI * (t as f64 + 0.5))
        })
        .sum();
    head + alternating_tail(0.5) / PI
}

/// Gauss–Legendre nodes and weights on `[a, b]`.
pub fn gauss_legendre(n: usize, a: f64, b: f64) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n);
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    for i in 0..n {
        // Newton iteration from the Chebyshev-like initial guess.
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut deriv = 0.0;
        for _ in 0..100 {
            let (p, dp) = legendre_with_derivative(n, x);
            deriv = dp;
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre_with_derivative(n, x);
        if dp != 0.0 {
            deriv = dp;
        }
        let w = 2.0 / ((1.0 - x * x) * deriv * deriv);
        out.push((mid - half * x, half * w));
    }
    out
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let n = n as f64;
    (p1, n * (x * p1 - p0) / (x * x - 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize) -> AngleGrid {
        AngleGrid::new(n).unwrap()
    }

    #[test]
    fn grid_rejects_odd_and_small() {
        assert!(AngleGrid::new(3).is_err());
        assert!(AngleGrid::new(2).is_err());
        assert!(AngleGrid::new(7).is_err());
        let g = grid(8);
        assert_eq!(g.node(0), -PI);
        assert!((g.spacing() - PI / 4.0).abs() < 1e-16);
    }

    #[test]
    fn quadrature_examples() {
        let g = grid(8);
        let one = PeriodicSamples::from_fn(g, |_| Complex64::new(1.0, 0.0));
        assert!((circle_quadrature(&one) - 2.0 * PI).norm() < 1e-14);
        let harmonic = PeriodicSamples::from_fn(g, Complex64::cis);
        assert!(circle_quadrature(&harmonic).norm() < 1e-14);
        let cos2 = PeriodicSamples::from_fn(g, |p| Complex64::new(p.cos().powi(2), 0.0));
        assert!((circle_quadrature(&cos2) - PI).norm() < 1e-14);
    }

    #[test]
    fn quadrature_exact_for_all_harmonics_below_n() {
        let g = grid(16);
        for k in -15_i64..=15 {
            let s = PeriodicSamples::from_fn(g, |p| Complex64::cis(k as f64 * p));
            let expect = if k == 0 { 2.0 * PI } else { 0.0 };
            assert!((circle_quadrature(&s) - expect).norm() < 1e-14, "k={k}");
        }
    }

    #[test]
    fn fourier_picks_single_harmonic() {
        let g = grid(16);
        let s = PeriodicSamples::from_fn(g, |p| Complex64::cis(-3.0 * p));
        for k in -7..8 {
            let c = fourier_coefficient(&s, k);
            let expect = if k == 3 { 1.0 } else { 0.0 };
            assert!((c - expect).norm() < 1e-14, "k={k}: {c}");
        }
        let one = PeriodicSamples::from_fn(g, |_| Complex64::new(1.0, 0.0));
        assert!((fourier_coefficient(&one, 0) - 1.0).norm() < 1e-15);
    }

    #[test]
    fn fourier_of_exp_cos_matches_refined_quadrature() {
        let f = |p: f64| Complex64::new(p.cos().exp(), 0.0);
        let coarse = fourier_coefficient(&PeriodicSamples::from_fn(grid(32), f), 1);
        let fine = fourier_coefficient(&PeriodicSamples::from_fn(grid(1024), f), 1);
        assert!((coarse - fine).norm() < 1e-12);
        // I₁(1) = 0.565159103992485...
        assert!((fine.re - 0.565_159_103_992_485).abs() < 1e-14);
    }

    #[test]
    fn interpolation_hits_nodes_and_harmonics() {
        let g = grid(16);
        let s = PeriodicSamples::from_fn(g, |p| {
            Complex64::new((3.0 * p).sin() + p.cos().exp(), (5.0 * p).cos())
        });
        for (j, v) in s.values().iter().enumerate() {
            assert!((trig_interpolate(&s, g.node(j)) - v).norm() < 1e-13);
        }
        let h = PeriodicSamples::from_fn(g, |p| Complex64::cis(2.0 * p));
        assert!((trig_interpolate(&h, 0.3) - Complex64::cis(0.6)).norm() < 1e-13);
        let unit = PeriodicSamples::from_fn(g, |p| Complex64::cis(0.7 - 4.0 * p));
        for phi in [0.123, 1.9, -2.71] {
            assert!((trig_interpolate(&unit, phi).norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn theta3_values() {
        assert_eq!(theta3(0.7, 0.0).unwrap(), 1.0);
        let q: f64 = 0.1;
        let oracle = 1.0 + 2.0 * q + 2.0 * q.powi(4) + 2.0 * q.powi(9) + 2.0 * q.powi(16);
        assert!((theta3(0.0, q).unwrap() - oracle).abs() < 1e-15);
        assert!((theta3(0.0, q).unwrap() - 1.200_200_002).abs() < 1e-9);
        let alt = 1.0 - 2.0 * q + 2.0 * q.powi(4) - 2.0 * q.powi(9) + 2.0 * q.powi(16);
        assert!((theta3(PI / 2.0, q).unwrap() - alt).abs() < 1e-15);
        assert!((theta3(PI / 2.0, q).unwrap() - 0.800_199_998).abs() < 1e-9);
        assert!(theta3(0.0, 1.0).is_err());
        assert!(theta3(0.0, -0.1).is_err());
    }

    #[test]
    fn bessel_values() {
        assert_eq!(bessel_i0(0.0).unwrap(), 1.0);
        let mut oracle = 0.0;
        let mut fact = 1.0;
        for m in 0..20 {
            if m > 0 {
                fact *= m as f64;
            }
            oracle += 1.0 / (fact * fact);
        }
        assert!((bessel_i0(2.0).unwrap() - oracle).abs() < 1e-14);
        assert!((bessel_i0(2.0).unwrap() - 2.279_585_302_336_067).abs() < 1e-14);
        assert!(bessel_i0(-1.0).is_err());
    }

    #[test]
    fn bessel_parseval_against_projected_coefficients() {
        // exp(cos φ) = Σ I_ℓ(1) e^{iℓφ}, so Σ I_ℓ(1)² = I₀(2).
        let s = PeriodicSamples::from_fn(grid(128), |p| Complex64::new(p.cos().exp(), 0.0));
        let total: f64 = (-30..=30).map(|k| fourier_coefficient(&s, k).norm_sqr()).sum();
        assert!((total - bessel_i0(2.0).unwrap()).abs() < 1e-10);
    }

    #[test]
    fn special_functions_are_monotone() {
        let mut prev = 0.0;
        for i in 0..10 {
            let v = theta3(0.0, i as f64 / 10.0).unwrap();
            assert!(v >= prev);
            prev = v;
        }
        let mut prev = 0.0;
        for i in 0..=16 {
            let v = bessel_i0(i as f64 * 0.5).unwrap();
            assert!(v >= prev);
            prev = v;
        }
    }

    #[test]
    fn alternating_tail_matches_brute_force() {
        // β(1/2) = π/2
        assert!((alternating_tail(0.5) - PI / 2.0).abs() < 1e-14);
        for x in [0.5, 1.5, 7.5, 40.5] {
            // average of two consecutive partial sums converges as O(N⁻²)
            let n = 2_000_000;
            let mut partial = 0.0;
            let mut last = 0.0;
            for k in 0..n {
                let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                last = sign / (x + k as f64);
                partial += last;
            }
            let estimate = partial - 0.5 * last;
            assert!((alternating_tail(x) - estimate).abs() < 1e-11, "x={x}");
        }
    }

    #[test]
    fn half_sinc_tails_sum_to_one() {
        for q in -9_i64..=9 {
            for lo in [-12_i64, -5, -1] {
                let hi = 6;
                let stored: f64 = (lo..=hi).map(|l| half_sinc(q - 2 * l)).sum();
                let total = stored + half_sinc_sum_above(q, hi) + half_sinc_sum_below(q, lo);
                assert!((total - 1.0).abs() < 1e-14, "q={q} lo={lo}: {total}");
            }
        }
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let rule = gauss_legendre(12, -1.0, 2.0);
        let integral: f64 = rule.iter().map(|(x, w)| w * x.powi(9)).sum();
        let exact = (2.0_f64.powi(10) - 1.0) / 10.0;
        assert!((integral - exact).abs() < 1e-11);
    }
}
