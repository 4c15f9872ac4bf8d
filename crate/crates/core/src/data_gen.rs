//! Deterministic initial data: Gaussians, the rough profile
//! φ̂(ξ) = (1+ξ²)^{-(s+1/2+ε)/2} and unit-norm wave packets.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid_fourier::{FieldState, GridSpec};
use crate::projectors::SpectralProfile;

/// In H^{s'} exactly for s' < s + ε.
pub fn make_rough_profile(s: f64, eps: f64) -> Result<SpectralProfile> {
    if !(s >= 0.0) || !(eps > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "rough profile needs s ≥ 0 and ε > 0, got s = {s}, ε = {eps}"
        )));
    }
    Ok(SpectralProfile::Rough {
        s,
        eps,
        amplitude: 1.0,
    })
}

/// φ(x) = e^{-x²/σ²}.
pub fn make_gaussian(sigma: f64) -> Result<SpectralProfile> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidParameter(format!("width must be positive, got {sigma}")));
    }
    Ok(SpectralProfile::Gaussian {
        sigma,
        amplitude: 1.0,
    })
}

/// Samples of e^{-x²/σ²} e^{iξ0 x}, scaled to unit l² norm.
pub fn make_packet(xi0: f64, sigma: f64, g: &GridSpec) -> Result<FieldState> {
    if xi0.abs() > g.band() {
        return Err(Error::OutOfBand {
            xi: xi0,
            band: g.band(),
        });
    }
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidParameter(format!("width must be positive, got {sigma}")));
    }
    let u = FieldState::from_fn(*g, |x| {
        Complex64::from_polar((-(x * x) / (sigma * sigma)).exp(), xi0 * x)
    });
    let n = u.norm_l2();
    if n == 0.0 {
        return Err(Error::InvalidParameter("packet underflows on this grid".into()));
    }
    Ok(u.scaled(1.0 / n))
}
