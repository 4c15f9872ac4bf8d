//! Continuous data and the operators that move it onto grids: Fourier
//! truncation T_h, pointwise sampling E_h, the two-grid interpolator Π with
//! its adjoint, and Littlewood–Paley blocks P_j.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid_fourier::{
    apply_multiplier, check_same_grid, dft_in_place, idft_in_place, inverse_dft, FieldState,
    GridSpec, SpectrumState,
};

/// Initial datum given through its Fourier transform
/// φ̂(ξ) = ∫ e^{-ixξ} φ(x) dx, scaled by `amplitude`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SpectralProfile {
    /// φ(x) = e^{-x²/σ²}
    Gaussian { sigma: f64, amplitude: f64 },
    /// φ(x) = e^{-x²/σ²} e^{i ξ0 x}
    Packet { xi0: f64, sigma: f64, amplitude: f64 },
    /// φ̂(ξ) = (1+ξ²)^{-(s+1/2+ε)/2}, in H^{s'} exactly for s' < s+ε
    Rough { s: f64, eps: f64, amplitude: f64 },
    /// φ̂(ξ) = exp(1 − 1/(1 − (ξ/band)²)) on |ξ| < band, zero outside
    Bump { band: f64, amplitude: f64 },
}

impl SpectralProfile {
    pub fn fourier(&self, xi: f64) -> Complex64 {
        match *self {
            SpectralProfile::Gaussian { sigma, amplitude } => {
                let v = sigma * PI.sqrt() * (-0.25 * sigma * sigma * xi * xi).exp();
                Complex64::new(amplitude * v, 0.0)
            }
            SpectralProfile::Packet {
                xi0,
                sigma,
                amplitude,
            } => {
                let d = xi - xi0;
                let v = sigma * PI.sqrt() * (-0.25 * sigma * sigma * d * d).exp();
                Complex64::new(amplitude * v, 0.0)
            }
            SpectralProfile::Rough { s, eps, amplitude } => {
                let a = s + 0.5 + eps;
                Complex64::new(amplitude * (1.0 + xi * xi).powf(-0.5 * a), 0.0)
            }
            SpectralProfile::Bump { band, amplitude } => {
                let r = xi / band;
                if r.abs() < 1.0 {
                    Complex64::new(amplitude * (1.0 - 1.0 / (1.0 - r * r)).exp(), 0.0)
                } else {
                    Complex64::new(0.0, 0.0)
                }
            }
        }
    }

    /// Closed-form φ(x), when one is implemented.
    pub fn space(&self, x: f64) -> Option<Complex64> {
        match *self {
            SpectralProfile::Gaussian { sigma, amplitude } => {
                Some(Complex64::new(amplitude * (-(x * x) / (sigma * sigma)).exp(), 0.0))
            }
            SpectralProfile::Packet {
                xi0,
                sigma,
                amplitude,
            } => Some(
                Complex64::from_polar(1.0, xi0 * x) * amplitude * (-(x * x) / (sigma * sigma)).exp(),
            ),
            SpectralProfile::Rough { .. } | SpectralProfile::Bump { .. } => None,
        }
    }

    /// Exponent d with |φ̂(ξ)| ~ |ξ|^{-d} at infinity; infinite for rapid decay.
    pub fn decay_exponent(&self) -> f64 {
        match *self {
            SpectralProfile::Rough { s, eps, .. } => s + 0.5 + eps,
            _ => f64::INFINITY,
        }
    }

    /// Regularity the profile is declared with.
    pub fn declared_regularity(&self) -> f64 {
        match *self {
            SpectralProfile::Rough { s, .. } => s,
            _ => f64::INFINITY,
        }
    }

    pub fn scaled(&self, c: f64) -> Self {
        let mut out = *self;
        match &mut out {
            SpectralProfile::Gaussian { amplitude, .. }
            | SpectralProfile::Packet { amplitude, .. }
            | SpectralProfile::Rough { amplitude, .. }
            | SpectralProfile::Bump { amplitude, .. } => *amplitude *= c,
        }
        out
    }

    /// Σ_{l≠0} φ̂(ξ + 2πl/h): the spectral content aliased into the band by sampling.
    fn aliased_remainder(&self, xi: f64, h: f64) -> Result<Complex64> {
        let period = 2.0 * PI / h;
        match *self {
            SpectralProfile::Rough { s, eps, amplitude } => {
                Ok(Complex64::new(amplitude * rough_alias_sum(s + 0.5 + eps, xi, period), 0.0))
            }
            _ => {
                let mut acc = Complex64::new(0.0, 0.0);
                for l in 1..=64 {
                    let l = l as f64;
                    acc += self.fourier(xi + l * period) + self.fourier(xi - l * period);
                }
                Ok(acc)
            }
        }
    }
}

/// Σ_{l≠0} (1 + (ξ + lP)²)^{-a/2}: explicit terms for |l| ≤ M, Euler–Maclaurin
/// tail beyond, with the tail integral from the large-y expansion of
/// (1+y²)^{-a/2}.
fn rough_alias_sum(a: f64, xi: f64, period: f64) -> f64 {
    const M: i64 = 32;
    let f = |y: f64| (1.0 + y * y).powf(-0.5 * a);
    let df = |y: f64| -a * y * (1.0 + y * y).powf(-0.5 * a - 1.0);
    let mut sum = 0.0;
    for l in 1..=M {
        let l = l as f64;
        sum += f(xi + l * period) + f(xi - l * period);
    }
    // third derivative from the leading power, -a(a+1)(a+2) y^{-a-3}
    let d3f = |y: f64| -a * (a + 1.0) * (a + 2.0) * y.powf(-a - 3.0);
    // Σ_{l>M} g(l) ≈ ∫_M^∞ g − g(M)/2 − g'(M)/12 + g'''(M)/720 with g(l) = f(|ξ ± lP|)
    let tail = |y: f64| {
        let mut integral = 0.0;
        let mut coef = 1.0;
        for n in 0..8 {
            let p = a + 2.0 * n as f64 - 1.0;
            integral += coef * y.powf(-p) / p;
            coef *= (-0.5 * a - n as f64) / (n as f64 + 1.0);
        }
        integral / period - 0.5 * f(y) - period * df(y) / 12.0 + period.powi(3) * d3f(y) / 720.0
    };
    let m = M as f64;
    sum + tail(m * period + xi) + tail(m * period - xi)
}

/// T_h φ: φ̂ sampled on the grid frequencies, inverse DFT.
pub fn project_th(phi: &SpectralProfile, g: &GridSpec) -> Result<FieldState> {
    let coeffs: Vec<Complex64> = (0..g.n()).map(|k| phi.fourier(g.frequency(k))).collect();
    if coeffs.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
        return Err(Error::Divergent("profile is not finite on the grid frequencies".into()));
    }
    Ok(inverse_dft(&SpectrumState { grid: *g, coeffs }))
}

/// E_h φ = φ(jh). Uses the closed form when available, otherwise the
/// aliasing sum φ(jh) = (1/2π) ∫_{|ξ|<π/h} e^{ijhξ} Σ_l φ̂(ξ + 2πl/h) dξ.
pub fn sample_eh(phi: &SpectralProfile, g: &GridSpec) -> Result<FieldState> {
    if phi.space(0.0).is_some() {
        return Ok(FieldState::from_fn(*g, |x| phi.space(x).expect("closed form")));
    }
    let s = phi.declared_regularity();
    if s <= 0.5 {
        return Err(Error::Undefined(format!(
            "pointwise values need s > 1/2, profile declares s = {s}"
        )));
    }
    let mut coeffs = Vec::with_capacity(g.n());
    for k in 0..g.n() {
        let xi = g.frequency(k);
        coeffs.push(phi.fourier(xi) + phi.aliased_remainder(xi, g.h())?);
    }
    Ok(inverse_dft(&SpectrumState { grid: *g, coeffs }))
}

/// Coarse grid of step 4h and fine grid of step h over the same length.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoGridPair {
    pub coarse: GridSpec,
    pub fine: GridSpec,
}

impl TwoGridPair {
    pub fn from_fine(fine: GridSpec) -> Result<Self> {
        if fine.n() < 8 {
            return Err(Error::InvalidGrid("fine grid needs at least 8 points".into()));
        }
        let coarse = GridSpec::new(4.0 * fine.h(), fine.n() / 4)?;
        Ok(Self { coarse, fine })
    }

    pub fn new(coarse: GridSpec, fine: GridSpec) -> Result<Self> {
        if fine.h() * 4.0 != coarse.h() || fine.n() != 4 * coarse.n() {
            return Err(Error::GridMismatch(format!(
                "coarse (h={}, N={}) is not the 4h partner of fine (h={}, N={})",
                coarse.h(),
                coarse.n(),
                fine.h(),
                fine.n()
            )));
        }
        Ok(Self { coarse, fine })
    }
}

/// m(θ) = ((e^{4iθ} − 1) / (4(e^{iθ} − 1)))², with m(0) = 1.
pub fn twogrid_multiplier(theta: f64) -> Complex64 {
    let one = Complex64::new(1.0, 0.0);
    let den = Complex64::from_polar(1.0, theta) - one;
    if den.norm() < 1e-12 {
        return one;
    }
    let q = (Complex64::from_polar(1.0, 4.0 * theta) - one) / (den * 4.0);
    q * q
}

/// Weight of coarse node k at fine offset d = j − (4k − 3): (4 − |d|)/4 on |d| < 4.
fn hat(d: i64) -> f64 {
    let d = d.unsigned_abs() as f64;
    if d < 4.0 {
        (4.0 - d) / 4.0
    } else {
        0.0
    }
}

/// Π: piecewise-linear interpolation of coarse samples, coarse node k placed
/// at fine index 4k − 3. This placement gives the Fourier form
/// (Πψ)^(ξ) = m(hξ) ψ̂(ξ) with ψ̂ extended periodically.
pub fn twogrid_interpolate(psi: &FieldState, pair: &TwoGridPair) -> Result<FieldState> {
    check_same_grid(&psi.grid, &pair.coarse)?;
    let fine = pair.fine;
    let mut out = FieldState::zeros(fine);
    for (kc, v) in psi.values.iter().enumerate() {
        let anchor = 4 * pair.coarse.signed_index(kc) - 3;
        for d in -3..=3 {
            out.values[fine.slot(anchor + d)] += v * hat(d);
        }
    }
    Ok(out)
}

/// Same operator built on the Fourier side; used as a cross-check of the
/// physical construction.
pub fn twogrid_interpolate_spectral(psi: &FieldState, pair: &TwoGridPair) -> Result<FieldState> {
    check_same_grid(&psi.grid, &pair.coarse)?;
    let mut coarse = psi.values.clone();
    dft_in_place(&pair.coarse, &mut coarse);
    let fine = pair.fine;
    let nc = pair.coarse.n();
    let mut buf: Vec<Complex64> = (0..fine.n())
        .map(|k| coarse[k % nc] * twogrid_multiplier(fine.h() * fine.frequency(k)))
        .collect();
    idft_in_place(&fine, &mut buf);
    FieldState::new(fine, buf)
}

/// Π*: adjoint of Π for (u, v)_h = Re h Σ u v̄ and the 4h analogue.
pub fn twogrid_adjoint(u: &FieldState, pair: &TwoGridPair) -> Result<FieldState> {
    check_same_grid(&u.grid, &pair.fine)?;
    let fine = pair.fine;
    let mut out = FieldState::zeros(pair.coarse);
    for (kc, slot) in out.values.iter_mut().enumerate() {
        let anchor = 4 * pair.coarse.signed_index(kc) - 3;
        let mut acc = Complex64::new(0.0, 0.0);
        for d in -3..=3 {
            acc += u.values[fine.slot(anchor + d)] * hat(d);
        }
        *slot = acc * 0.25;
    }
    Ok(out)
}

/// Orthogonal projection onto the range of Π, Π(Π*Π)^{-1}Π*. Diagonal on the
/// coarse Fourier side: Π*Π multiplies coarse mode κ by Σ_{k≡κ} |m(hξ_k)|²/4.
pub fn twogrid_range_projection(u: &FieldState, pair: &TwoGridPair) -> Result<FieldState> {
    check_same_grid(&u.grid, &pair.fine)?;
    let fine = pair.fine;
    let nc = pair.coarse.n();
    let mut buf = u.values.clone();
    dft_in_place(&fine, &mut buf);
    let m: Vec<Complex64> = (0..fine.n())
        .map(|k| twogrid_multiplier(fine.h() * fine.frequency(k)))
        .collect();
    let mut num = vec![Complex64::new(0.0, 0.0); nc];
    let mut den = vec![0.0; nc];
    for k in 0..fine.n() {
        num[k % nc] += m[k].conj() * buf[k];
        den[k % nc] += m[k].norm_sqr();
    }
    for k in 0..fine.n() {
        buf[k] = m[k] * num[k % nc] / den[k % nc];
    }
    idft_in_place(&fine, &mut buf);
    FieldState::new(fine, buf)
}

/// C^∞ step: 1 on |ξ| ≤ 1, 0 on |ξ| ≥ 2, built from e^{-1/x}.
pub fn eta0(xi: f64) -> f64 {
    let a = xi.abs();
    if a <= 1.0 {
        return 1.0;
    }
    if a >= 2.0 {
        return 0.0;
    }
    let psi = |x: f64| if x > 0.0 { (-1.0 / x).exp() } else { 0.0 };
    let up = psi(2.0 - a);
    up / (up + psi(a - 1.0))
}

/// Multiplier of P_j: η_0 for j = 0, η_0(ξ/2^j) − η_0(ξ/2^{j−1}) otherwise.
pub fn eta(j: u32, xi: f64) -> f64 {
    if j == 0 {
        eta0(xi)
    } else {
        let s = 2f64.powi(j as i32);
        eta0(xi / s) - eta0(2.0 * xi / s)
    }
}

/// Highest nonzero block on a grid: ⌈log₂(π/h)⌉ + 1. The blocks are only
/// evaluated on the grid frequencies, i.e. clipped at the band edge.
pub fn lp_max_level(g: &GridSpec) -> u32 {
    (PI / g.h()).log2().ceil().max(0.0) as u32 + 1
}

pub fn littlewood_paley(u: &FieldState, j: u32) -> FieldState {
    if j > lp_max_level(&u.grid) {
        return FieldState::zeros(u.grid);
    }
    apply_multiplier(u, |xi| Complex64::new(eta(j, xi), 0.0))
}

impl fmt::Display for SpectralProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            SpectralProfile::Gaussian { sigma, .. } => write!(f, "gaussian:{sigma}"),
            SpectralProfile::Packet { xi0, sigma, .. } => write!(f, "packet:{xi0},{sigma}"),
            SpectralProfile::Rough { s, eps, .. } => write!(f, "rough:{s},{eps}"),
            SpectralProfile::Bump { band, .. } => write!(f, "bump:{band}"),
        }
    }
}

impl FromStr for SpectralProfile {
    type Err = Error;

    /// "gaussian:σ", "rough:s,ε", "packet:ξ0,σ", "bump:band".
    fn from_str(text: &str) -> Result<Self> {
        let bad = |msg: &str| Error::InvalidParameter(format!("profile '{text}': {msg}"));
        let (name, args) = text
            .split_once(':')
            .ok_or_else(|| bad("expected name:parameters"))?;
        let nums: Vec<f64> = args
            .split(',')
            .map(|a| a.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| bad("parameters must be numbers"))?;
        let positive = |v: f64, what: &str| {
            if v > 0.0 && v.is_finite() {
                Ok(v)
            } else {
                Err(bad(&format!("{what} must be positive")))
            }
        };
        match (name.trim(), nums.as_slice()) {
            ("gaussian", [sigma]) => Ok(SpectralProfile::Gaussian {
                sigma: positive(*sigma, "width")?,
                amplitude: 1.0,
            }),
            ("packet", [xi0, sigma]) => Ok(SpectralProfile::Packet {
                xi0: *xi0,
                sigma: positive(*sigma, "width")?,
                amplitude: 1.0,
            }),
            ("rough", [s, eps]) => {
                if !(*s >= 0.0) {
                    return Err(bad("s must be non-negative"));
                }
                Ok(SpectralProfile::Rough {
                    s: *s,
                    eps: positive(*eps, "margin")?,
                    amplitude: 1.0,
                })
            }
            ("bump", [band]) => Ok(SpectralProfile::Bump {
                band: positive(*band, "band")?,
                amplitude: 1.0,
            }),
            _ => Err(bad("unknown profile or wrong number of parameters")),
        }
    }
}
