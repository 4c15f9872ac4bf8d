//! Discrete l^r(hZ) norms, time-composite L^q(0,T; l^r) norms, the discrete
//! Besov norm B^s_{p,2}(hZ) and Sobolev norms of continuous profiles.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use num_rational::Ratio;

use crate::error::{Error, Result};
use crate::grid_fourier::FieldState;
use crate::projectors::{littlewood_paley, lp_max_level, SpectralProfile};
use crate::quad;

/// Lebesgue exponent, finite rational or infinite.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Exponent {
    Finite(Ratio<i64>),
    Infinite,
}

impl Exponent {
    pub fn int(v: i64) -> Self {
        Exponent::Finite(Ratio::from_integer(v))
    }

    pub fn ratio(num: i64, den: i64) -> Self {
        Exponent::Finite(Ratio::new(num, den))
    }

    /// Nearest rational with a denominator up to 10⁶; infinities map to ∞.
    pub fn from_f64(v: f64) -> Result<Self> {
        if v == f64::INFINITY {
            return Ok(Exponent::Infinite);
        }
        if !(v >= 1.0 && v.is_finite()) {
            return Err(Error::InvalidExponent(v));
        }
        let den = 1_000_000i64;
        Ok(Exponent::Finite(Ratio::new((v * den as f64).round() as i64, den)))
    }

    pub fn value(&self) -> f64 {
        match self {
            Exponent::Finite(r) => *r.numer() as f64 / *r.denom() as f64,
            Exponent::Infinite => f64::INFINITY,
        }
    }

    fn reciprocal(&self) -> Ratio<i64> {
        match self {
            Exponent::Finite(r) => r.recip(),
            Exponent::Infinite => Ratio::from_integer(0),
        }
    }
}

impl fmt::Display for Exponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Exponent::Finite(r) if r.is_integer() => write!(f, "{}", r.numer()),
            Exponent::Finite(r) => write!(f, "{}/{}", r.numer(), r.denom()),
            Exponent::Infinite => write!(f, "inf"),
        }
    }
}

/// 1/q = 1/4 − 1/(2r), checked in exact rational arithmetic.
pub fn is_admissible(q: Exponent, r: Exponent) -> bool {
    let lhs = q.reciprocal();
    let rhs = Ratio::new(1, 4) - r.reciprocal() / 2;
    r.value() >= 2.0 && lhs == rhs
}

/// The pair (q0, p+2) with q0 = 4(p+2)/p used for the NSE with |u|^p u.
pub fn nse_pair(p: f64) -> Result<(Exponent, Exponent)> {
    if !(p > 0.0 && p < 4.0) {
        return Err(Error::InvalidParameter(format!("nonlinearity power {p}")));
    }
    let pr = match Exponent::from_f64(p + 2.0)? {
        Exponent::Finite(r) => r - 2,
        Exponent::Infinite => unreachable!(),
    };
    let r = pr + 2;
    let q = r * 4 / pr;
    Ok((Exponent::Finite(q), Exponent::Finite(r)))
}

pub fn norm_lr(u: &FieldState, r: f64) -> Result<f64> {
    if !(r >= 1.0) {
        return Err(Error::InvalidExponent(r));
    }
    if r == f64::INFINITY {
        return Ok(u.norm_sup());
    }
    if r == 2.0 {
        return Ok(u.norm_l2());
    }
    let s: f64 = u.values.iter().map(|v| v.norm().powf(r)).sum();
    Ok((u.grid.h() * s).powf(1.0 / r))
}

/// Samples of a grid evolution at increasing times.
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceTimeTrace {
    pub times: Vec<f64>,
    pub states: Vec<FieldState>,
}

impl SpaceTimeTrace {
    pub fn new(times: Vec<f64>, states: Vec<FieldState>) -> Result<Self> {
        if times.len() != states.len() {
            return Err(Error::InvalidParameter(format!(
                "{} times for {} states",
                times.len(),
                states.len()
            )));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidParameter("times must increase strictly".into()));
        }
        if let Some(first) = states.first() {
            if states.iter().any(|s| s.grid != first.grid) {
                return Err(Error::GridMismatch("trace states live on different grids".into()));
            }
        }
        Ok(Self { times, states })
    }

    /// t ↦ ‖u(t)‖_{l^r}.
    pub fn profile(&self, r: f64) -> Result<Vec<f64>> {
        self.states.iter().map(|s| norm_lr(s, r)).collect()
    }
}

/// ‖f‖_{L^q} of sampled values by the composite trapezoid rule; max for q = ∞.
pub fn time_norm(times: &[f64], values: &[f64], q: f64) -> Result<f64> {
    if !(q >= 1.0) {
        return Err(Error::InvalidExponent(q));
    }
    if times.len() != values.len() {
        return Err(Error::InvalidParameter("times and values differ in length".into()));
    }
    if q == f64::INFINITY {
        return Ok(values.iter().cloned().fold(0.0, f64::max));
    }
    if times.len() < 2 {
        return Err(Error::TooFewSamples);
    }
    let mut acc = 0.0;
    for i in 1..times.len() {
        let dt = times[i] - times[i - 1];
        acc += 0.5 * dt * (values[i].powf(q) + values[i - 1].powf(q));
    }
    Ok(acc.powf(1.0 / q))
}

pub fn norm_spacetime(tr: &SpaceTimeTrace, q: f64, r: f64) -> Result<f64> {
    time_norm(&tr.times, &tr.profile(r)?, q)
}

/// ‖P_0 u‖_{l^p} + (Σ_{j≥1} 4^{js} ‖P_j u‖²_{l^p})^{1/2}, j up to the band level.
pub fn norm_besov_discrete(u: &FieldState, s: f64, p: f64) -> Result<f64> {
    if !(p > 1.0 && p.is_finite()) {
        return Err(Error::InvalidExponent(p));
    }
    let low = norm_lr(&littlewood_paley(u, 0), p)?;
    let mut high = 0.0;
    for j in 1..=lp_max_level(&u.grid) {
        let b = norm_lr(&littlewood_paley(u, j), p)?;
        high += 4f64.powf(j as f64 * s) * b * b;
    }
    Ok(low + high.sqrt())
}

/// ((1/2π) ∫ (1+ξ²)^s |φ̂|² dξ)^{1/2}.
pub fn norm_profile_sobolev(phi: &SpectralProfile, s: f64) -> Result<f64> {
    let d = phi.decay_exponent();
    if d.is_finite() && 2.0 * s - 2.0 * d >= -1.0 {
        return Err(Error::Divergent(format!(
            "profile decays like |ξ|^-{d}, not in H^{s}"
        )));
    }
    let weight = |xi: f64| (1.0 + xi * xi).powf(s);
    let pos = quad::integrate_half_line(|xi| weight(xi) * phi.fourier(xi).norm_sqr(), 1e-12)?;
    let neg = quad::integrate_half_line(|xi| weight(xi) * phi.fourier(-xi).norm_sqr(), 1e-12)?;
    Ok(((pos + neg) / (2.0 * PI)).sqrt())
}

/// Norm selectors accepted in experiment configs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NormSelector {
    LinfL2,
    L6L6,
    /// (4(p+2)/p, p+2), resolved once p is known
    Lq0Lp2,
}

impl NormSelector {
    pub fn exponents(&self, p: f64) -> Result<(Exponent, Exponent)> {
        match self {
            NormSelector::LinfL2 => Ok((Exponent::Infinite, Exponent::int(2))),
            NormSelector::L6L6 => Ok((Exponent::int(6), Exponent::int(6))),
            NormSelector::Lq0Lp2 => nse_pair(p),
        }
    }
}

impl fmt::Display for NormSelector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NormSelector::LinfL2 => "Linf-l2",
            NormSelector::L6L6 => "L6-l6",
            NormSelector::Lq0Lp2 => "Lq0-lp2",
        })
    }
}

impl FromStr for NormSelector {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "Linf-l2" => Ok(NormSelector::LinfL2),
            "L6-l6" => Ok(NormSelector::L6L6),
            "Lq0-lp2" => Ok(NormSelector::Lq0Lp2),
            other => Err(Error::InvalidParameter(format!("unknown norm selector '{other}'"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid_fourier::{parseval_check, GridSpec};
    use crate::projectors::project_th;
    use num_complex::Complex64;

    fn grid() -> GridSpec {
        GridSpec::new(0.1, 128).unwrap()
    }

    #[test]
    fn delta_and_constant() {
        let g = grid();
        let mut d = FieldState::zeros(g);
        d.values[0] = Complex64::new(1.0 / g.h(), 0.0);
        assert!((norm_lr(&d, 1.0).unwrap() - 1.0).abs() < 1e-14);
        // sup ≤ h^{-1/2} l², with equality on the delta
        let ratio = norm_lr(&d, f64::INFINITY).unwrap() / (g.h().powf(-0.5) * d.norm_l2());
        assert!((ratio - 1.0).abs() < 1e-14);
        let c = FieldState::from_fn(g, |_| Complex64::new(0.0, -3.0));
        let expect = 3.0 * g.length().sqrt();
        assert!((norm_lr(&c, 2.0).unwrap() - expect).abs() < 1e-12);
        assert!((norm_lr(&c, 3.0).unwrap() - 3.0 * g.length().powf(1.0 / 3.0)).abs() < 1e-12);
        assert!(norm_lr(&c, 0.5).is_err());
    }

    #[test]
    fn l2_matches_parseval() {
        let g = grid();
        let u = FieldState::from_fn(g, |x| Complex64::new((-x * x).exp(), x.sin() * 0.1));
        let (a, b) = parseval_check(&u);
        assert!((norm_lr(&u, 2.0).unwrap() - b).abs() < 1e-12 * a);
    }

    #[test]
    fn admissible_pairs() {
        assert!(is_admissible(Exponent::Infinite, Exponent::int(2)));
        assert!(is_admissible(Exponent::int(6), Exponent::int(6)));
        assert!(is_admissible(Exponent::int(8), Exponent::int(4)));
        assert!(!is_admissible(Exponent::int(4), Exponent::int(4)));
        assert!(!is_admissible(Exponent::int(2), Exponent::Infinite));
        let (q, r) = nse_pair(2.0).unwrap();
        assert_eq!((q, r), (Exponent::int(8), Exponent::int(4)));
        let (q, r) = nse_pair(1.5).unwrap();
        assert!(is_admissible(q, r));
        assert_eq!(r, Exponent::ratio(7, 2));
        assert!(nse_pair(4.0).is_err());
    }

    #[test]
    fn constant_trace_time_norm() {
        let g = grid();
        let u = FieldState::from_fn(g, |x| Complex64::new((-x * x).exp(), 0.0));
        let times: Vec<f64> = (0..11).map(|i| i as f64 / 10.0).collect();
        let tr = SpaceTimeTrace::new(times, vec![u.clone(); 11]).unwrap();
        let v = norm_spacetime(&tr, 2.0, 4.0).unwrap();
        assert!((v - norm_lr(&u, 4.0).unwrap()).abs() < 1e-13);
        let single = SpaceTimeTrace::new(vec![0.0], vec![u]).unwrap();
        assert_eq!(norm_spacetime(&single, 2.0, 2.0), Err(Error::TooFewSamples));
        assert!(norm_spacetime(&single, f64::INFINITY, 2.0).is_ok());
    }

    #[test]
    fn besov_low_frequency_and_shell() {
        let g = GridSpec::new(0.05, 4096).unwrap();
        let low = project_th(
            &SpectralProfile::Bump {
                band: 1.0,
                amplitude: 1.0,
            },
            &g,
        )
        .unwrap();
        let b = norm_besov_discrete(&low, 1.0, 2.0).unwrap();
        assert!((b - low.norm_l2()).abs() < 1e-12 * b);
        // a narrow packet at ξ = 8, where η_3 = 1 and its neighbours vanish
        let shell = project_th(
            &SpectralProfile::Packet {
                xi0: 8.0,
                sigma: 16.0,
                amplitude: 1.0,
            },
            &g,
        )
        .unwrap();
        let b1 = norm_besov_discrete(&shell, 0.5, 2.0).unwrap();
        let b2 = norm_besov_discrete(&shell, 1.0, 2.0).unwrap();
        let expect = 2f64.powf(3.0 * 0.5);
        assert!((b2 / b1 - expect).abs() < 1e-3 * expect, "{}", b2 / b1);
    }

    #[test]
    fn gaussian_sobolev_norm() {
        let phi = SpectralProfile::Gaussian {
            sigma: 1.0,
            amplitude: 1.0,
        };
        let v = norm_profile_sobolev(&phi, 0.0).unwrap();
        assert!((v - (PI / 2.0).powf(0.25)).abs() < 1e-10);
        let w = norm_profile_sobolev(&phi.scaled(2.0), 0.0).unwrap();
        assert!((w - 2.0 * v).abs() < 1e-10);
        assert!(norm_profile_sobolev(&phi, 4.0).unwrap().is_finite());
    }

    #[test]
    fn rough_profile_membership() {
        let phi = SpectralProfile::Rough {
            s: 0.25,
            eps: 0.05,
            amplitude: 1.0,
        };
        assert!(norm_profile_sobolev(&phi, 0.25).unwrap().is_finite());
        assert!(norm_profile_sobolev(&phi, 0.27).unwrap().is_finite());
        assert!(matches!(norm_profile_sobolev(&phi, 0.31), Err(Error::Divergent(_))));
        assert!(matches!(norm_profile_sobolev(&phi, 0.30), Err(Error::Divergent(_))));
    }

    #[test]
    fn rough_profile_closed_form_norm() {
        // (1/2π) ∫ (1+ξ²)^{-b} dξ = Γ(b−1/2) / (2√π Γ(b)), here b = 1.3
        let phi = SpectralProfile::Rough {
            s: 0.75,
            eps: 0.05,
            amplitude: 1.0,
        };
        let v = norm_profile_sobolev(&phi, 0.0).unwrap();
        let exact = (1.164_229_713_725_303 / (2.0 * PI.sqrt() * 0.897_470_696_306_277)).sqrt();
        assert!((v - exact).abs() < 1e-8 * exact, "{v} vs {exact}");
    }

    #[test]
    fn selector_strings() {
        for s in ["Linf-l2", "L6-l6", "Lq0-lp2"] {
            assert_eq!(s.parse::<NormSelector>().unwrap().to_string(), s);
        }
        assert!("L2-l2".parse::<NormSelector>().is_err());
    }
}
