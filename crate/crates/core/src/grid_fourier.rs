//! Uniform grids on a periodic truncation of hZ and the discrete Fourier
//! transform
//!
//! ```text
//! û(ξ_k) = h Σ_j e^{-i j h ξ_k} u_j,      u_j = (1/L) Σ_k e^{i j h ξ_k} û(ξ_k)
//! ```
//!
//! with ξ_k = 2πk/L. Both samples and coefficients are stored in natural FFT
//! order: index `i < N/2` carries the signed index `i`, index `i ≥ N/2`
//! carries `i - N`. Grid point `i` therefore sits at x = signed(i)·h and the
//! frequency set is [-π/h, π/h).

use std::cell::RefCell;
use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan(n: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if inverse {
            p.plan_fft_inverse(n)
        } else {
            p.plan_fft_forward(n)
        }
    })
}

/// Grid step `h` and point count `N` (a power of two), periodic length `L = N h`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    h: f64,
    n: usize,
}

impl GridSpec {
    pub fn new(h: f64, n: usize) -> Result<Self> {
        if !(h.is_finite() && h > 0.0) {
            return Err(Error::InvalidGrid(format!("step must be positive, got {h}")));
        }
        if n < 2 || !n.is_power_of_two() {
            return Err(Error::InvalidGrid(format!(
                "point count must be a power of two >= 2, got {n}"
            )));
        }
        Ok(Self { h, n })
    }

    /// Grid with step `h` whose length is at least `min_length`.
    pub fn with_min_length(h: f64, min_length: f64) -> Result<Self> {
        let n = ((min_length / h).ceil() as usize).max(2).next_power_of_two();
        Self::new(h, n)
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn length(&self) -> f64 {
        self.n as f64 * self.h
    }

    /// Band limit π/h.
    pub fn band(&self) -> f64 {
        PI / self.h
    }

    /// Signed index of storage slot `i`.
    pub fn signed_index(&self, i: usize) -> i64 {
        if i < self.n / 2 {
            i as i64
        } else {
            i as i64 - self.n as i64
        }
    }

    /// Storage slot of signed index `j` (taken modulo N).
    pub fn slot(&self, j: i64) -> usize {
        j.rem_euclid(self.n as i64) as usize
    }

    pub fn position(&self, i: usize) -> f64 {
        self.signed_index(i) as f64 * self.h
    }

    pub fn frequency(&self, k: usize) -> f64 {
        2.0 * PI * self.signed_index(k) as f64 / self.length()
    }

    pub fn positions(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.position(i)).collect()
    }

    pub fn frequencies(&self) -> Vec<f64> {
        (0..self.n).map(|k| self.frequency(k)).collect()
    }

    /// Same length, step divided by `factor`.
    pub fn refined(&self, factor: usize) -> Result<Self> {
        Self::new(self.h / factor as f64, self.n * factor)
    }

    /// Same step, length multiplied by `factor`.
    pub fn extended(&self, factor: usize) -> Result<Self> {
        Self::new(self.h, self.n * factor)
    }
}

/// Grid function: N complex samples in natural order.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldState {
    pub grid: GridSpec,
    pub values: Vec<Complex64>,
}

/// Fourier coefficients of a grid function in natural order.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumState {
    pub grid: GridSpec,
    pub coeffs: Vec<Complex64>,
}

impl FieldState {
    pub fn new(grid: GridSpec, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.n() {
            return Err(Error::GridMismatch(format!(
                "{} samples for a grid of {} points",
                values.len(),
                grid.n()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: GridSpec) -> Self {
        Self {
            grid,
            values: vec![Complex64::new(0.0, 0.0); grid.n()],
        }
    }

    pub fn from_fn(grid: GridSpec, f: impl Fn(f64) -> Complex64) -> Self {
        let values = (0..grid.n()).map(|i| f(grid.position(i))).collect();
        Self { grid, values }
    }

    /// Discrete l²(hZ) norm (h Σ |u_j|²)^{1/2}.
    pub fn norm_l2(&self) -> f64 {
        (self.grid.h() * self.values.iter().map(|v| v.norm_sqr()).sum::<f64>()).sqrt()
    }

    pub fn norm_sup(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Shift samples by `k` grid points: v_j = u_{j-k}.
    pub fn shifted(&self, k: i64) -> Self {
        let n = self.grid.n();
        let mut values = vec![Complex64::new(0.0, 0.0); n];
        for (i, v) in self.values.iter().enumerate() {
            values[self.grid.slot(i as i64 + k)] = *v;
        }
        Self {
            grid: self.grid,
            values,
        }
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        check_same_grid(&self.grid, &other.grid)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a - b)
            .collect();
        Ok(Self {
            grid: self.grid,
            values,
        })
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|v| v * c).collect(),
        }
    }
}

pub(crate) fn check_same_grid(a: &GridSpec, b: &GridSpec) -> Result<()> {
    if a != b {
        return Err(Error::GridMismatch(format!(
            "(h={}, N={}) vs (h={}, N={})",
            a.h(),
            a.n(),
            b.h(),
            b.n()
        )));
    }
    Ok(())
}

/// In place: samples -> coefficients.
pub(crate) fn dft_in_place(grid: &GridSpec, buf: &mut [Complex64]) {
    plan(grid.n(), false).process(buf);
    let h = grid.h();
    buf.iter_mut().for_each(|c| *c *= h);
}

/// In place: coefficients -> samples.
pub(crate) fn idft_in_place(grid: &GridSpec, buf: &mut [Complex64]) {
    plan(grid.n(), true).process(buf);
    let s = 1.0 / grid.length();
    buf.iter_mut().for_each(|c| *c *= s);
}

pub fn forward_dft(u: &FieldState) -> SpectrumState {
    let mut coeffs = u.values.clone();
    dft_in_place(&u.grid, &mut coeffs);
    SpectrumState {
        grid: u.grid,
        coeffs,
    }
}

pub fn inverse_dft(c: &SpectrumState) -> FieldState {
    let mut values = c.coeffs.clone();
    idft_in_place(&c.grid, &mut values);
    FieldState {
        grid: c.grid,
        values,
    }
}

/// Spectral-side l² norm ((1/L) Σ |c_k|²)^{1/2}, the discrete form of
/// ((1/2π) ∫ |û|² dξ)^{1/2}.
pub fn spectral_norm_l2(c: &SpectrumState) -> f64 {
    (c.coeffs.iter().map(|v| v.norm_sqr()).sum::<f64>() / c.grid.length()).sqrt()
}

/// Returns (‖u‖_{l²(hZ)}, the same norm computed on the Fourier side).
pub fn parseval_check(u: &FieldState) -> (f64, f64) {
    (u.norm_l2(), spectral_norm_l2(&forward_dft(u)))
}

/// Apply a real or complex Fourier multiplier `m(ξ)` to a grid function.
pub fn apply_multiplier(u: &FieldState, m: impl Fn(f64) -> Complex64) -> FieldState {
    let mut buf = u.values.clone();
    dft_in_place(&u.grid, &mut buf);
    for (k, c) in buf.iter_mut().enumerate() {
        *c *= m(u.grid.frequency(k));
    }
    idft_in_place(&u.grid, &mut buf);
    FieldState {
        grid: u.grid,
        values: buf,
    }
}

/// Band-limited (trigonometric) interpolant sampled on a grid refined by
/// `factor`. The Nyquist coefficient stays at -π/h.
pub fn refine_bandlimited(u: &FieldState, factor: usize) -> Result<FieldState> {
    let fine = u.grid.refined(factor)?;
    let c = forward_dft(u);
    let mut coeffs = vec![Complex64::new(0.0, 0.0); fine.n()];
    for (k, v) in c.coeffs.iter().enumerate() {
        coeffs[fine.slot(u.grid.signed_index(k))] = *v;
    }
    Ok(inverse_dft(&SpectrumState { grid: fine, coeffs }))
}

/// Spectral truncation of `u` onto a grid with the same length and a coarser
/// step: keeps the coarse band, drops the rest.
pub fn restrict_spectral(u: &FieldState, coarse: &GridSpec) -> Result<FieldState> {
    let ratio = coarse.h() / u.grid.h();
    let factor = ratio.round() as usize;
    if factor == 0
        || (ratio - factor as f64).abs() > 1e-9 * ratio
        || u.grid.n() != coarse.n() * factor
    {
        return Err(Error::GridMismatch(format!(
            "cannot restrict (h={}, N={}) to (h={}, N={})",
            u.grid.h(),
            u.grid.n(),
            coarse.h(),
            coarse.n()
        )));
    }
    let c = forward_dft(u);
    let half = coarse.n() as i64 / 2;
    let coeffs = (0..coarse.n())
        .map(|k| {
            let j = coarse.signed_index(k);
            debug_assert!((-half..half).contains(&j));
            c.coeffs[u.grid.slot(j)]
        })
        .collect();
    Ok(inverse_dft(&SpectrumState {
        grid: *coarse,
        coeffs,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn grid_rejects_non_power_of_two() {
        assert!(GridSpec::new(0.1, 1000).is_err());
        assert!(GridSpec::new(-0.1, 1024).is_err());
        assert!(GridSpec::new(0.1, 1024).is_ok());
    }

    #[test]
    fn frequency_set_covers_minus_band_but_not_plus_band() {
        let g = GridSpec::new(0.5, 16).unwrap();
        let f = g.frequencies();
        let min = f.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = f.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert!((min + g.band()).abs() < 1e-12);
        assert!(max < g.band());
    }

    #[test]
    fn zero_field_has_zero_spectrum() {
        let g = GridSpec::new(0.1, 64).unwrap();
        let s = forward_dft(&FieldState::zeros(g));
        assert!(s.coeffs.iter().all(|v| v.norm() == 0.0));
        assert_eq!(parseval_check(&FieldState::zeros(g)), (0.0, 0.0));
    }

    #[test]
    fn scaled_delta_has_unit_spectrum() {
        let g = GridSpec::new(0.1, 64).unwrap();
        let mut u = FieldState::zeros(g);
        u.values[0] = c(1.0 / g.h());
        let s = forward_dft(&u);
        assert!(s.coeffs.iter().all(|v| (v - c(1.0)).norm() < 1e-14));
        let back = inverse_dft(&SpectrumState {
            grid: g,
            coeffs: vec![c(1.0); 64],
        });
        assert!((back.values[0] - c(1.0 / g.h())).norm() < 1e-12);
        assert!(back.values[1..].iter().all(|v| v.norm() < 1e-12));
        let (a, b) = parseval_check(&u);
        assert!((a - b).abs() < 1e-12 * a);
    }

    #[test]
    fn gaussian_spectrum_matches_closed_form() {
        let g = GridSpec::new(0.1, 1024).unwrap();
        let u = FieldState::from_fn(g, |x| c((-x * x).exp()));
        let s = forward_dft(&u);
        for (k, v) in s.coeffs.iter().enumerate() {
            let xi = g.frequency(k);
            if xi.abs() <= 10.0 {
                let exact = PI.sqrt() * (-xi * xi / 4.0).exp();
                assert!((v - c(exact)).norm() < 1e-8, "xi={xi}");
            }
        }
        let (a, b) = parseval_check(&u);
        assert!((a - b).abs() < 1e-10 * a);
    }

    #[test]
    fn shift_multiplies_spectrum_by_phase() {
        let g = GridSpec::new(0.3, 32).unwrap();
        let u = FieldState::from_fn(g, |x| Complex64::new((-x * x).exp(), x.sin()));
        let a = forward_dft(&u);
        let b = forward_dft(&u.shifted(1));
        for k in 0..g.n() {
            let phase = Complex64::from_polar(1.0, -g.frequency(k) * g.h());
            assert!((b.coeffs[k] - a.coeffs[k] * phase).norm() < 1e-12);
        }
    }

    #[test]
    fn restriction_keeps_coarse_band() {
        let fine = GridSpec::new(0.05, 256).unwrap();
        let coarse = GridSpec::new(0.2, 64).unwrap();
        let u = FieldState::from_fn(fine, |x| c((-x * x).exp()));
        let r = restrict_spectral(&u, &coarse).unwrap();
        let direct = FieldState::from_fn(coarse, |x| c((-x * x).exp()));
        let err = r.sub(&direct).unwrap().norm_l2();
        assert!(err < 1e-10, "{err}");
        assert!(restrict_spectral(&u, &GridSpec::new(0.2, 32).unwrap()).is_err());
    }

    #[test]
    fn refinement_interpolates_band_limited_data() {
        let g = GridSpec::new(0.25, 64).unwrap();
        let u = FieldState::from_fn(g, |x| c((-x * x / 4.0).exp()));
        let f = refine_bandlimited(&u, 4).unwrap();
        for i in 0..g.n() {
            assert!((f.values[4 * i] - u.values[i]).norm() < 1e-12);
        }
    }
}
