//! Scheme symbols a_h(ξ), their consistency bounds and the rate function
//! ε(s, h) = Σ_k μ(k,h)^{min(s/k, 1)}.
//!
//! The propagator multiplies Fourier coefficients by e^{i t a_h(ξ)}, so a
//! dissipative symbol has Im a_h ≥ 0.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// α(h) schedule of the viscous scheme, a(h) = h^{2 - 1/α(h)}.
pub type AlphaSchedule = fn(f64) -> f64;

pub fn default_alpha(h: f64) -> f64 {
    0.5 + 1.0 / h.ln().abs()
}

#[derive(Debug, Clone, Copy)]
pub enum SchemeKind {
    Exact,
    Conservative3pt,
    FourierFiltered { gamma: f64 },
    Viscous { alpha: AlphaSchedule },
    HigherViscous { m: u32 },
    /// Δ_h on the fine grid of a two-grid pair; the filtering lives in the data.
    TwoGridCarrier,
}

impl PartialEq for SchemeKind {
    fn eq(&self, other: &Self) -> bool {
        use SchemeKind::*;
        match (self, other) {
            (Exact, Exact) | (Conservative3pt, Conservative3pt) | (TwoGridCarrier, TwoGridCarrier) => true,
            (FourierFiltered { gamma: a }, FourierFiltered { gamma: b }) => a == b,
            (Viscous { alpha: a }, Viscous { alpha: b }) => std::ptr::fn_addr_eq(*a, *b),
            (HigherViscous { m: a }, HigherViscous { m: b }) => a == b,
            _ => false,
        }
    }
}

impl SchemeKind {
    pub fn viscous() -> Self {
        SchemeKind::Viscous {
            alpha: default_alpha,
        }
    }

    pub fn is_conservative(&self) -> bool {
        matches!(
            self,
            SchemeKind::Exact
                | SchemeKind::Conservative3pt
                | SchemeKind::FourierFiltered { .. }
                | SchemeKind::TwoGridCarrier
        )
    }
}

impl fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SchemeKind::Exact => write!(f, "exact"),
            SchemeKind::Conservative3pt => write!(f, "fd3"),
            SchemeKind::FourierFiltered { gamma } => write!(f, "filtered:{gamma}"),
            SchemeKind::Viscous { .. } => write!(f, "viscous"),
            SchemeKind::HigherViscous { m } => write!(f, "hyperviscous:{m}"),
            SchemeKind::TwoGridCarrier => write!(f, "twogrid"),
        }
    }
}

impl FromStr for SchemeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = |msg: String| Error::InvalidParameter(format!("scheme '{s}': {msg}"));
        let (name, arg) = match s.split_once(':') {
            Some((n, a)) => (n.trim(), Some(a.trim())),
            None => (s.trim(), None),
        };
        let kind = match (name, arg) {
            ("exact", None) => SchemeKind::Exact,
            ("fd3", None) => SchemeKind::Conservative3pt,
            ("filtered", None) => SchemeKind::FourierFiltered { gamma: 0.25 },
            ("filtered", Some(a)) => {
                let gamma: f64 = a.parse().map_err(|_| bad("gamma is not a number".into()))?;
                if !(gamma > 0.0 && gamma < 0.5) {
                    return Err(bad("gamma must lie in (0, 1/2)".into()));
                }
                SchemeKind::FourierFiltered { gamma }
            }
            ("viscous", None) => SchemeKind::viscous(),
            ("hyperviscous", Some(a)) => {
                let m: u32 = a.parse().map_err(|_| bad("m is not an integer".into()))?;
                if m < 2 {
                    return Err(bad("m must be at least 2".into()));
                }
                SchemeKind::HigherViscous { m }
            }
            ("twogrid", None) => SchemeKind::TwoGridCarrier,
            _ => return Err(bad("unknown scheme".into())),
        };
        Ok(kind)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchemeSymbol {
    pub kind: SchemeKind,
    pub h: f64,
}

/// (4/h²) sin²(ξh/2), the symbol of -Δ_h.
pub fn fd3_magnitude(xi: f64, h: f64) -> f64 {
    let s = (0.5 * xi * h).sin();
    4.0 * s * s / (h * h)
}

/// Viscosity coefficient a(h) = h^{2 - 1/α(h)}.
pub fn viscous_coefficient(alpha: AlphaSchedule, h: f64) -> f64 {
    h.powf(2.0 - 1.0 / alpha(h))
}

impl SchemeSymbol {
    pub fn new(kind: SchemeKind, h: f64) -> Result<Self> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::InvalidParameter(format!("grid step {h}")));
        }
        if let SchemeKind::FourierFiltered { gamma } = kind {
            if !(gamma > 0.0 && gamma < 0.5) {
                return Err(Error::InvalidParameter(format!("filter ratio {gamma}")));
            }
        }
        if let SchemeKind::HigherViscous { m } = kind {
            if m < 2 {
                return Err(Error::InvalidParameter(format!("viscosity order {m}")));
            }
        }
        Ok(Self { kind, h })
    }

    /// Symbol without the band check; callers guarantee |ξ| ≤ π/h.
    pub(crate) fn value(&self, xi: f64) -> Complex64 {
        let h = self.h;
        match self.kind {
            SchemeKind::Exact => Complex64::new(-xi * xi, 0.0),
            SchemeKind::Conservative3pt | SchemeKind::TwoGridCarrier => {
                Complex64::new(-fd3_magnitude(xi, h), 0.0)
            }
            SchemeKind::FourierFiltered { gamma } => {
                if xi.abs() <= gamma * PI / h {
                    Complex64::new(-fd3_magnitude(xi, h), 0.0)
                } else {
                    Complex64::new(0.0, 0.0)
                }
            }
            SchemeKind::Viscous { alpha } => {
                let s2 = fd3_magnitude(xi, h);
                Complex64::new(-s2, viscous_coefficient(alpha, h) * s2)
            }
            SchemeKind::HigherViscous { m } => {
                let s2 = fd3_magnitude(xi, h);
                let damp = h.powi(2 * (m as i32 - 1)) * s2.powi(m as i32);
                Complex64::new(-s2, damp)
            }
        }
    }

    /// a_h(ξ) for |ξ| ≤ π/h.
    pub fn eval(&self, xi: f64) -> Result<Complex64> {
        let band = PI / self.h;
        if !(xi.abs() <= band * (1.0 + 1e-12)) {
            return Err(Error::OutOfBand { xi, band });
        }
        Ok(self.value(xi))
    }
}

/// |a_h(ξ) + ξ²| ≤ Σ μ_k |ξ|^k on the band.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolBound {
    pub terms: Vec<(u32, f64)>,
}

impl SymbolBound {
    pub fn eval(&self, xi: f64) -> f64 {
        self.terms
            .iter()
            .map(|&(k, mu)| mu * xi.abs().powi(k as i32))
            .sum()
    }

    /// Terms with equal exponents combined.
    pub fn merged(&self) -> SymbolBound {
        let mut out: Vec<(u32, f64)> = Vec::new();
        for &(k, mu) in &self.terms {
            match out.iter_mut().find(|t| t.0 == k) {
                Some(t) => t.1 += mu,
                None => out.push((k, mu)),
            }
        }
        out.sort_by_key(|t| t.0);
        SymbolBound { terms: out }
    }
}

/// sup_ξ |a_h(ξ) + ξ²| / (h² ξ⁴) for the filtered symbol. The ratio is
/// invariant under ξ ↦ ξ/h, so it is measured once at h = 1.
pub fn filtered_constant(gamma: f64) -> f64 {
    let sym = SchemeSymbol {
        kind: SchemeKind::FourierFiltered { gamma },
        h: 1.0,
    };
    let ratio = |xi: f64| (sym.value(xi) + xi * xi).norm() / xi.powi(4);
    // the supremum is approached from just outside the cut-off
    let edge = ratio(gamma * PI * (1.0 + 1e-12));
    let n = 200_000;
    (1..=n)
        .map(|i| ratio(PI * i as f64 / n as f64))
        .fold(edge, f64::max)
        * (1.0 + 1e-9)
}

pub fn declared_bound(s: &SchemeSymbol) -> Result<SymbolBound> {
    let h = s.h;
    let terms = match s.kind {
        SchemeKind::Exact | SchemeKind::TwoGridCarrier => {
            return Err(Error::NoBound(s.kind.to_string()))
        }
        SchemeKind::Conservative3pt => vec![(4, h * h)],
        SchemeKind::HigherViscous { m } => {
            vec![(4, h * h), (2 * m, h.powi(2 * (m as i32 - 1)))]
        }
        SchemeKind::FourierFiltered { gamma } => vec![(4, filtered_constant(gamma) * h * h)],
        SchemeKind::Viscous { alpha } => vec![(4, h * h), (2, viscous_coefficient(alpha, h))],
    };
    Ok(SymbolBound { terms })
}

/// Max over `samples` equispaced ξ ∈ (0, π/h] of |a_h(ξ)+ξ²| / bound(ξ).
/// Symbols are even in ξ, so the positive half suffices.
pub fn verify_bound(s: &SchemeSymbol, samples: usize) -> Result<f64> {
    if samples < 1000 {
        return Err(Error::InvalidParameter(format!(
            "at least 1000 samples required, got {samples}"
        )));
    }
    if s.kind == SchemeKind::Exact {
        return Ok(0.0);
    }
    let bound = declared_bound(s)?;
    let band = PI / s.h;
    Ok((1..=samples)
        .map(|i| {
            let xi = band * i as f64 / samples as f64;
            (s.value(xi) + xi * xi).norm() / bound.eval(xi)
        })
        .fold(0.0, f64::max))
}

pub fn epsilon_rate(b: &SymbolBound, s: f64) -> Result<f64> {
    if !(s >= 0.0) {
        return Err(Error::InvalidParameter(format!("regularity {s}")));
    }
    Ok(b
        .terms
        .iter()
        .map(|&(k, mu)| mu.powf((s / k as f64).min(1.0)))
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sym(kind: SchemeKind, h: f64) -> SchemeSymbol {
        SchemeSymbol::new(kind, h).unwrap()
    }

    #[test]
    fn fd3_values() {
        let s = sym(SchemeKind::Conservative3pt, 1.0);
        assert_eq!(s.eval(0.0).unwrap(), Complex64::new(0.0, 0.0));
        assert!((s.eval(PI).unwrap() - Complex64::new(-4.0, 0.0)).norm() < 1e-14);
        assert!(s.eval(3.2).is_err());
    }

    #[test]
    fn hyperviscous_at_band_edge() {
        // -(4/h²) + i h² (4/h²)² at h = 0.5
        let s = sym(SchemeKind::HigherViscous { m: 2 }, 0.5);
        let v = s.eval(PI / 0.5).unwrap();
        assert!((v - Complex64::new(-16.0, 64.0)).norm() < 1e-12, "{v}");
    }

    #[test]
    fn bounds_of_catalog() {
        let h = 0.1;
        let b = declared_bound(&sym(SchemeKind::Conservative3pt, h)).unwrap();
        assert_eq!(b.terms, vec![(4, h * h)]);
        let b = declared_bound(&sym(SchemeKind::HigherViscous { m: 2 }, h)).unwrap();
        let merged = b.merged();
        assert_eq!(merged.terms.len(), 1);
        assert_eq!(merged.terms[0].0, 4);
        assert!((merged.terms[0].1 - 2.0 * h * h).abs() < 1e-15);
        assert!(declared_bound(&sym(SchemeKind::Exact, h)).is_err());
        assert!(declared_bound(&sym(SchemeKind::TwoGridCarrier, h)).is_err());
    }

    #[test]
    fn verify_bound_examples() {
        let r = verify_bound(&sym(SchemeKind::Conservative3pt, 0.1), 10_000).unwrap();
        assert!(r <= 1.0, "{r}");
        assert_eq!(verify_bound(&sym(SchemeKind::Exact, 0.1), 1000).unwrap(), 0.0);
        let r = verify_bound(&sym(SchemeKind::HigherViscous { m: 3 }, 0.05), 10_000).unwrap();
        assert!(r <= 1.0, "{r}");
        let r = verify_bound(&sym(SchemeKind::viscous(), 0.05), 10_000).unwrap();
        assert!(r <= 1.0, "{r}");
        let r = verify_bound(&sym(SchemeKind::FourierFiltered { gamma: 0.25 }, 0.05), 10_000)
            .unwrap();
        assert!(r <= 1.0, "{r}");
        assert!(verify_bound(&sym(SchemeKind::Conservative3pt, 0.1), 999).is_err());
    }

    #[test]
    fn filtered_constant_is_edge_value() {
        // Outside the band the error is ξ², largest relative to h²ξ⁴ at the edge.
        let c = filtered_constant(0.25);
        let edge = 1.0 / (0.25 * PI).powi(2);
        assert!((c - edge).abs() < 1e-6 * edge, "{c} vs {edge}");
    }

    #[test]
    fn epsilon_examples() {
        let h = 0.1;
        let b = declared_bound(&sym(SchemeKind::Conservative3pt, h)).unwrap();
        assert!((epsilon_rate(&b, 2.0).unwrap() - h).abs() < 1e-15);
        assert_eq!(epsilon_rate(&b, 0.0).unwrap(), 1.0);
        let b = declared_bound(&sym(SchemeKind::HigherViscous { m: 2 }, h)).unwrap();
        assert_eq!(epsilon_rate(&b, 0.0).unwrap(), 2.0);
        let e = epsilon_rate(&b, 1.0).unwrap();
        assert!((e - 2.0 * h.powf(0.5)).abs() < 1e-14);
    }

    #[test]
    fn epsilon_constant_beyond_largest_exponent() {
        let b = declared_bound(&sym(SchemeKind::HigherViscous { m: 3 }, 0.05)).unwrap();
        let a = epsilon_rate(&b, 6.0).unwrap();
        let c = epsilon_rate(&b, 9.0).unwrap();
        assert_eq!(a, c);
    }

    #[test]
    fn second_order_consistency_at_unit_frequency() {
        let hs = [0.1, 0.05, 0.025];
        let errs: Vec<f64> = hs
            .iter()
            .map(|&h| (sym(SchemeKind::Conservative3pt, h).eval(1.0).unwrap() + 1.0).norm())
            .collect();
        for w in errs.windows(2) {
            let slope = (w[0] / w[1]).log2();
            assert!((slope - 2.0).abs() < 0.05, "{slope}");
        }
    }

    #[test]
    fn scheme_strings_round_trip() {
        for s in ["exact", "fd3", "filtered:0.25", "viscous", "hyperviscous:3", "twogrid"] {
            let k: SchemeKind = s.parse().unwrap();
            assert_eq!(k.to_string(), s);
        }
        assert!("filtered:0.6".parse::<SchemeKind>().is_err());
        assert!("hyperviscous:1".parse::<SchemeKind>().is_err());
        assert!("spectral".parse::<SchemeKind>().is_err());
    }
}
