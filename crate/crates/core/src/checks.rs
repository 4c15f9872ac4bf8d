//! The invariant suite behind `verify`: fast checks with pinned tolerances,
//! each reported as one pass/fail outcome.

use std::time::Instant;

use num_complex::Complex64;
use serde::Serialize;

use crate::data_gen::{make_gaussian, make_rough_profile};
use crate::error::Result;
use crate::experiments::{
    fit_loglog, nonlinear_commutator, projector_gap, strichartz_sweep, PacketPolicy,
};
use crate::grid_fourier::{forward_dft, inverse_dft, parseval_check, FieldState, GridSpec};
use crate::jfunctional::{brute_force_min, log_rate_study, min_j, solve_ch, JProblem, SpectralMeasure};
use crate::norms::Exponent;
use crate::projectors::{
    littlewood_paley, lp_max_level, project_th, twogrid_adjoint, twogrid_interpolate, TwoGridPair,
};
use crate::propagators::{semigroup_difference_check, LinearPropagator};
use crate::symbols::{verify_bound, SchemeKind, SchemeSymbol};

pub const SYMBOL_RATIO_MAX: f64 = 1.0 + 1e-9;
pub const SYMBOL_SAMPLES: usize = 10_000;
pub const CONSERVATION_TOL: f64 = 1e-12;
/// Round-off allowance, relative to ‖φ‖, on a single dissipative step.
pub const MONOTONE_SLACK: f64 = 1e-15;
pub const SEMIGROUP_TOL: f64 = 1e-8;
pub const SEMIGROUP_NODES: usize = 64;
pub const STRICHARTZ_GROWTH_MIN: f64 = 1.3;
pub const STRICHARTZ_BAND_MAX: f64 = 1.25;
pub const CH_RESIDUAL_TOL: f64 = 1e-10;
pub const BRUTE_FORCE_TOL: f64 = 1e-6;
pub const BRUTE_FORCE_DX: f64 = 1e-3;
pub const LOG_BAND_MAX: f64 = 5.0;
pub const PROJECTOR_SLOPE_TOL: f64 = 0.2;
pub const ROUNDOFF_TOL: f64 = 1e-12;

/// Regularity margin of the rough profiles used throughout the suite.
pub const ROUGH_EPS: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Outcome {
    pub id: String,
    pub name: String,
    pub pass: bool,
    pub detail: String,
    pub seconds: f64,
}

impl std::fmt::Display for Outcome {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{} [{}] {}: {} ({:.2} s)",
            if self.pass { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.detail,
            self.seconds
        )
    }
}

fn timed(id: &str, name: &str, f: impl FnOnce() -> Result<(bool, String)>) -> Outcome {
    let start = Instant::now();
    let (pass, detail) = f().unwrap_or_else(|e| (false, format!("error: {e}")));
    Outcome {
        id: id.into(),
        name: name.into(),
        pass,
        detail,
        seconds: start.elapsed().as_secs_f64(),
    }
}

/// Deterministic, non-symmetric test field.
fn test_field(g: GridSpec) -> FieldState {
    FieldState::from_fn(g, |x| {
        let e = (-0.05 * x * x).exp();
        Complex64::new(e * (1.3 * x).cos() + 0.2 * (0.7 * x).sin(), e * (0.4 * x - 0.3).sin())
    })
}

pub fn symbol_bounds() -> Outcome {
    timed("1", "symbol error bounds", || {
        let mut worst = 0.0f64;
        for kind in [
            SchemeKind::Conservative3pt,
            SchemeKind::HigherViscous { m: 2 },
            SchemeKind::HigherViscous { m: 3 },
        ] {
            for h in [0.2, 0.1, 0.05] {
                worst = worst.max(verify_bound(&SchemeSymbol::new(kind, h)?, SYMBOL_SAMPLES)?);
            }
        }
        Ok((worst <= SYMBOL_RATIO_MAX, format!("max ratio {worst:.12}")))
    })
}

pub fn conservation() -> Outcome {
    timed("2", "l² conservation and dissipation", || {
        let h = 0.1;
        let g = GridSpec::new(h, 1024)?;
        let phi = project_th(&make_rough_profile(0.4, ROUGH_EPS)?, &g)?;
        let n0 = phi.norm_l2();
        let (steps, dt) = (1000, 1e-3);
        let mut drift = 0.0f64;
        let mut monotone = true;
        for kind in [
            SchemeKind::Exact,
            SchemeKind::Conservative3pt,
            SchemeKind::FourierFiltered { gamma: 0.25 },
            SchemeKind::viscous(),
            SchemeKind::HigherViscous { m: 2 },
            SchemeKind::HigherViscous { m: 3 },
        ] {
            let prop = LinearPropagator::new(SchemeSymbol::new(kind, h)?, g)?;
            let mut u = phi.clone();
            let mut prev = n0;
            for _ in 0..steps {
                u = prop.evolve(&u, dt)?;
                let n = u.norm_l2();
                if kind.is_conservative() {
                    drift = drift.max((n - prev).abs() / n0);
                } else if n > prev + MONOTONE_SLACK * n0 {
                    monotone = false;
                }
                prev = n;
            }
        }
        Ok((
            drift < CONSERVATION_TOL && monotone,
            format!("max per-step drift {drift:.2e}, dissipative norms monotone: {monotone}"),
        ))
    })
}

pub fn semigroup_identity() -> Outcome {
    timed("3", "semigroup difference identity", || {
        let h = 0.2;
        let g = GridSpec::new(h, 256)?;
        let phi = project_th(&make_gaussian(1.0)?, &g)?;
        let exact = SchemeSymbol::new(SchemeKind::Exact, h)?;
        let mut worst = 0.0f64;
        for kind in [SchemeKind::Conservative3pt, SchemeKind::HigherViscous { m: 2 }] {
            let a = SchemeSymbol::new(kind, h)?;
            worst = worst.max(semigroup_difference_check(&a, &exact, &phi, 1.0, SEMIGROUP_NODES)?);
        }
        Ok((worst < SEMIGROUP_TOL, format!("max residual {worst:.2e}")))
    })
}

pub const STRICHARTZ_H: [f64; 3] = [0.1, 0.05, 0.025];

/// Packet sweep in L⁶l⁶: the 3-point scheme loses, the others stay in a band.
pub fn strichartz_dichotomy() -> Vec<Outcome> {
    let policy = PacketPolicy::default();
    let six = Exponent::int(6);
    let fd3 = timed("6a", "3-point scheme Strichartz ratio grows", || {
        let t = strichartz_sweep(SchemeKind::Conservative3pt, &policy, &STRICHARTZ_H, six, six)?;
        let ratios: Vec<String> = t.rows.iter().map(|r| format!("{:.4}", r.ratio)).collect();
        Ok((
            t.strictly_increasing() && t.growth() >= STRICHARTZ_GROWTH_MIN,
            format!("ratios [{}], growth {:.3}", ratios.join(", "), t.growth()),
        ))
    });
    let mut out = vec![fd3];
    for kind in [
        SchemeKind::FourierFiltered { gamma: 0.25 },
        SchemeKind::viscous(),
        SchemeKind::TwoGridCarrier,
    ] {
        out.push(timed("6b", &format!("{kind} Strichartz ratio stays in band"), || {
            let t = strichartz_sweep(kind, &policy, &STRICHARTZ_H, six, six)?;
            Ok((t.band() <= STRICHARTZ_BAND_MAX, format!("max/min {:.4}", t.band())))
        }));
    }
    out
}

pub fn log_rate_hs() -> Vec<f64> {
    (8..=20).map(|k| 2f64.powi(-k)).collect()
}

pub fn jfunctional() -> Vec<Outcome> {
    let phi = make_rough_profile(0.25, ROUGH_EPS);
    let residual = timed("9a", "fixed-point residual", || {
        let phi = phi.clone()?;
        let mut worst = 0.0f64;
        for h in log_rate_hs() {
            worst = worst.max(solve_ch(&JProblem::for_profile(phi, h)?)?.residual);
        }
        Ok((worst < CH_RESIDUAL_TOL, format!("max residual {worst:.2e}")))
    });
    let brute = timed("9b", "brute-force minimum on truncated spectra", || {
        let phi = phi.clone()?;
        let mut worst = 0.0f64;
        for h in [1e-2, 1e-3, 1e-4] {
            let prob = JProblem::new(SpectralMeasure::truncated(&phi, 64, 40.0), h, 0.25)?;
            let m = min_j(&prob)?;
            let (b, _) = brute_force_min(&prob, 2.0 * h.ln().abs(), BRUTE_FORCE_DX)?;
            worst = worst.max((b - m.value).abs());
        }
        Ok((worst < BRUTE_FORCE_TOL, format!("max |brute − min J| {worst:.2e}")))
    });
    let band = timed("9c", "min J·|log h|^{1/3} band", || {
        let r = log_rate_study(0.25, ROUGH_EPS, &log_rate_hs())?;
        Ok((
            r.band_ratio < LOG_BAND_MAX,
            format!("max/min {:.3}, fitted exponent {:.3}", r.band_ratio, r.alpha),
        ))
    });
    vec![residual, brute, band]
}

pub const PROJECTOR_H: [f64; 4] = [0.2, 0.1, 0.05, 0.025];
pub const PROJECTOR_LENGTH: f64 = 51.2;
pub const COMMUTATOR_REFINE: usize = 32;

pub fn projector_rates() -> Vec<Outcome> {
    let mut out = Vec::new();
    for s in [0.6, 0.8] {
        out.push(timed("10a", &format!("T_h − E_h rate at s = {s}"), || {
            let phi = make_rough_profile(s, ROUGH_EPS)?;
            let e = projector_gap(&phi, &PROJECTOR_H, PROJECTOR_LENGTH)?;
            let (slope, _) = fit_loglog(&PROJECTOR_H, &e)?;
            Ok(((slope - s).abs() <= PROJECTOR_SLOPE_TOL, format!("slope {slope:.3}, target {s}")))
        }));
    }
    for s in [0.6, 0.8] {
        out.push(timed("10b", &format!("nonlinear commutator rate at s = {s}"), || {
            let phi = make_rough_profile(s, ROUGH_EPS)?;
            let e = nonlinear_commutator(&phi, 2.0, &PROJECTOR_H, PROJECTOR_LENGTH, COMMUTATOR_REFINE)?;
            let (slope, _) = fit_loglog(&PROJECTOR_H, &e)?;
            let target = s.min(1.0);
            Ok((
                (slope - target).abs() <= PROJECTOR_SLOPE_TOL,
                format!("slope {slope:.3}, target {target}"),
            ))
        }));
    }
    out
}

pub fn fourier_invariants() -> Vec<Outcome> {
    let g = GridSpec::new(0.1, 512);
    let round_trip = timed("inv", "DFT round trip", || {
        let u = test_field(g.clone()?);
        let back = inverse_dft(&forward_dft(&u));
        let err = back.sub(&u)?.norm_l2() / u.norm_l2();
        Ok((err < ROUNDOFF_TOL, format!("relative error {err:.2e}")))
    });
    let parseval = timed("inv", "Parseval", || {
        let (a, b) = parseval_check(&test_field(g.clone()?));
        let err = (a - b).abs() / a;
        Ok((err < ROUNDOFF_TOL, format!("relative gap {err:.2e}")))
    });
    let adjoint = timed("inv", "two-grid adjoint", || {
        let pair = TwoGridPair::from_fine(g.clone()?)?;
        let u = test_field(pair.fine);
        let psi = FieldState::from_fn(pair.coarse, |x| Complex64::new((0.3 * x).cos(), (-0.02 * x * x).exp()));
        let inner = |a: &FieldState, b: &FieldState| -> Complex64 {
            a.values.iter().zip(&b.values).map(|(x, y)| x * y.conj()).sum::<Complex64>() * a.grid.h()
        };
        let lhs = inner(&twogrid_interpolate(&psi, &pair)?, &u);
        let rhs = inner(&psi, &twogrid_adjoint(&u, &pair)?);
        let err = (lhs - rhs).norm() / lhs.norm();
        Ok((err < ROUNDOFF_TOL, format!("relative gap {err:.2e}")))
    });
    let partition = timed("inv", "Littlewood–Paley partition", || {
        let u = test_field(g.clone()?);
        let mut sum = FieldState::zeros(u.grid);
        for j in 0..=lp_max_level(&u.grid) {
            let p = littlewood_paley(&u, j);
            for (s, v) in sum.values.iter_mut().zip(&p.values) {
                *s += v;
            }
        }
        let err = sum.sub(&u)?.norm_l2() / u.norm_l2();
        Ok((err < ROUNDOFF_TOL, format!("relative error {err:.2e}")))
    });
    vec![round_trip, parseval, adjoint, partition]
}

/// Everything `verify` runs, in report order.
pub fn verify_suite() -> Vec<Outcome> {
    let mut out = fourier_invariants();
    out.push(symbol_bounds());
    out.push(conservation());
    out.push(semigroup_identity());
    out.extend(strichartz_dichotomy());
    out.extend(jfunctional());
    out.extend(projector_rates());
    out
}
