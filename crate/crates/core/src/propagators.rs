//! Linear semigroups e^{itA_h} as Fourier multipliers, Strang splitting for
//! i u_t + A_h u = |u|^p u, and the two-grid variant with restarts.

use gauss_quad::legendre::GaussLegendre;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid_fourier::{dft_in_place, idft_in_place, FieldState, GridSpec};
use crate::norms::SpaceTimeTrace;
use crate::projectors::{twogrid_adjoint, twogrid_interpolate, twogrid_range_projection, TwoGridPair};
use crate::symbols::SchemeSymbol;

/// Blow-up guard: abort once the sup norm exceeds this multiple of its initial value.
pub const BLOWUP_FACTOR: f64 = 1e6;

fn check_step(symbol: &SchemeSymbol, grid: &GridSpec) -> Result<()> {
    if (symbol.h - grid.h()).abs() > 1e-12 * grid.h() {
        return Err(Error::GridMismatch(format!(
            "symbol built for h = {}, grid has h = {}",
            symbol.h,
            grid.h()
        )));
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct LinearPropagator {
    pub symbol: SchemeSymbol,
    pub grid: GridSpec,
    values: Vec<Complex64>,
}

impl LinearPropagator {
    pub fn new(symbol: SchemeSymbol, grid: GridSpec) -> Result<Self> {
        check_step(&symbol, &grid)?;
        let values = (0..grid.n()).map(|k| symbol.value(grid.frequency(k))).collect();
        Ok(Self {
            symbol,
            grid,
            values,
        })
    }

    /// a_h on the grid frequencies, natural order.
    pub fn symbol_values(&self) -> &[Complex64] {
        &self.values
    }

    /// e^{i t a_h(ξ_k)}.
    pub fn multiplier(&self, t: f64) -> Vec<Complex64> {
        self.values
            .iter()
            .map(|a| (Complex64::i() * t * a).exp())
            .collect()
    }

    pub fn evolve(&self, u0: &FieldState, t: f64) -> Result<FieldState> {
        if u0.grid != self.grid {
            return Err(Error::GridMismatch("state and propagator grids differ".into()));
        }
        let mut buf = u0.values.clone();
        dft_in_place(&self.grid, &mut buf);
        for (c, m) in buf.iter_mut().zip(self.multiplier(t)) {
            *c *= m;
        }
        idft_in_place(&self.grid, &mut buf);
        FieldState::new(self.grid, buf)
    }

    /// States at the given times, one transform pair per sample.
    pub fn trace(&self, u0: &FieldState, times: &[f64]) -> Result<SpaceTimeTrace> {
        if u0.grid != self.grid {
            return Err(Error::GridMismatch("state and propagator grids differ".into()));
        }
        let mut spectrum = u0.values.clone();
        dft_in_place(&self.grid, &mut spectrum);
        let states = times
            .iter()
            .map(|&t| {
                let mut buf: Vec<Complex64> = spectrum
                    .iter()
                    .zip(&self.values)
                    .map(|(c, a)| c * (Complex64::i() * t * a).exp())
                    .collect();
                idft_in_place(&self.grid, &mut buf);
                FieldState {
                    grid: self.grid,
                    values: buf,
                }
            })
            .collect();
        SpaceTimeTrace::new(times.to_vec(), states)
    }
}

pub fn evolve_linear(p: &LinearPropagator, u0: &FieldState, t: f64) -> Result<FieldState> {
    p.evolve(u0, t)
}

/// ‖(S_A(t) − S_B(t))φ − ∫_0^t S_B(t−s) S_A(s) i(A − B) φ ds‖_{l²} with the
/// s-integral done by Gauss–Legendre with `quad_nodes` nodes. Both operators
/// are Fourier multipliers, so the check runs mode by mode.
pub fn semigroup_difference_check(
    a: &SchemeSymbol,
    b: &SchemeSymbol,
    phi: &FieldState,
    t: f64,
    quad_nodes: usize,
) -> Result<f64> {
    let g = phi.grid;
    let pa = LinearPropagator::new(*a, g)?;
    let pb = LinearPropagator::new(*b, g)?;
    let n = std::num::NonZeroUsize::new(quad_nodes)
        .ok_or_else(|| Error::InvalidParameter("at least one quadrature node".into()))?;
    let rule = GaussLegendre::new(n);
    let mut spectrum = phi.values.clone();
    dft_in_place(&g, &mut spectrum);
    let i = Complex64::i();
    let mut sq = 0.0;
    for (k, c) in spectrum.iter().enumerate() {
        let (av, bv) = (pa.values[k], pb.values[k]);
        let lhs = ((i * t * av).exp() - (i * t * bv).exp()) * c;
        let integrand = |s: f64| (i * (t - s) * bv).exp() * (i * s * av).exp();
        let re = rule.integrate(0.0, t, |s| integrand(s).re);
        let im = rule.integrate(0.0, t, |s| integrand(s).im);
        let rhs = Complex64::new(re, im) * i * (av - bv) * c;
        sq += (lhs - rhs).norm_sqr();
    }
    Ok((sq / g.length()).sqrt())
}

/// i u_t + A_h u = κ |u|^p u on [0, T].
#[derive(Debug, Clone)]
pub struct NseProblem {
    pub p: f64,
    pub symbol: SchemeSymbol,
    pub t_final: f64,
    pub dt: f64,
    pub phi: FieldState,
    /// Record a state every this many steps (the final state is always kept).
    pub record_every: usize,
    /// κ; zero turns the problem linear.
    pub coupling: f64,
}

impl NseProblem {
    pub fn new(p: f64, symbol: SchemeSymbol, t_final: f64, dt: f64, phi: FieldState) -> Result<Self> {
        let prob = Self {
            p,
            symbol,
            t_final,
            dt,
            phi,
            record_every: 1,
            coupling: 1.0,
        };
        prob.validate()?;
        Ok(prob)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p > 0.0 && self.p < 4.0) {
            return Err(Error::InvalidParameter(format!(
                "nonlinearity power must lie in (0, 4), got {}",
                self.p
            )));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) || !(self.t_final >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "time step {} and horizon {}",
                self.dt, self.t_final
            )));
        }
        if self.record_every == 0 {
            return Err(Error::InvalidParameter("record_every must be positive".into()));
        }
        check_step(&self.symbol, &self.phi.grid)
    }

    /// Step count and the actual step T / n.
    pub fn steps(&self) -> (usize, f64) {
        let n = (self.t_final / self.dt - 1e-9).ceil().max(1.0) as usize;
        (n, self.t_final / n as f64)
    }

    pub fn with_dt(&self, dt: f64) -> Self {
        Self { dt, ..self.clone() }
    }
}

/// Exact flow of i u_t = κ|u|^p u over τ: u e^{-iκ|u|^p τ}.
fn nonlinear_phase(u: &mut [Complex64], p: f64, coupling: f64, tau: f64) {
    if coupling == 0.0 {
        return;
    }
    for v in u.iter_mut() {
        let phase = -coupling * v.norm().powf(p) * tau;
        *v *= Complex64::from_polar(1.0, phase);
    }
}

fn linear_step(grid: &GridSpec, u: &mut [Complex64], mult: &[Complex64]) {
    dft_in_place(grid, u);
    for (c, m) in u.iter_mut().zip(mult) {
        *c *= m;
    }
    idft_in_place(grid, u);
}

struct Guard {
    limit: f64,
    initial: f64,
}

impl Guard {
    fn new(u: &FieldState) -> Self {
        let initial = u.norm_sup();
        Self {
            limit: BLOWUP_FACTOR * initial,
            initial,
        }
    }

    fn check(&self, u: &[Complex64], t: f64) -> Result<()> {
        let mut sup: f64 = 0.0;
        for v in u {
            if !(v.re.is_finite() && v.im.is_finite()) {
                return Err(Error::NonFinite { t });
            }
            sup = sup.max(v.norm());
        }
        if self.initial > 0.0 && sup > self.limit {
            return Err(Error::BlowUp {
                t,
                factor: sup / self.initial,
            });
        }
        Ok(())
    }
}

/// Strang splitting, calling `observe` at t = 0, at every `record_every`-th
/// step and at T.
pub fn evolve_nse_observed(
    prob: &NseProblem,
    mut observe: impl FnMut(f64, &FieldState),
) -> Result<()> {
    prob.validate()?;
    let grid = prob.phi.grid;
    let prop = LinearPropagator::new(prob.symbol, grid)?;
    let (n, dt) = prob.steps();
    let mult = prop.multiplier(dt);
    let guard = Guard::new(&prob.phi);
    let mut u = prob.phi.clone();
    observe(0.0, &u);
    if prob.t_final == 0.0 {
        return Ok(());
    }
    for step in 1..=n {
        nonlinear_phase(&mut u.values, prob.p, prob.coupling, 0.5 * dt);
        linear_step(&grid, &mut u.values, &mult);
        nonlinear_phase(&mut u.values, prob.p, prob.coupling, 0.5 * dt);
        let t = step as f64 * dt;
        guard.check(&u.values, t)?;
        if step % prob.record_every == 0 || step == n {
            observe(t, &u);
        }
    }
    Ok(())
}

pub fn evolve_nse(prob: &NseProblem) -> Result<SpaceTimeTrace> {
    let mut times = Vec::new();
    let mut states = Vec::new();
    evolve_nse_observed(prob, |t, u| {
        if times.last() != Some(&t) {
            times.push(t);
            states.push(u.clone());
        }
    })?;
    SpaceTimeTrace::new(times, states)
}

/// Relative change of the final l² norm when dt is halved.
pub fn dt_self_check(prob: &NseProblem) -> Result<f64> {
    let last = |p: &NseProblem| -> Result<f64> {
        let mut norm = 0.0;
        evolve_nse_observed(p, |_, u| norm = u.norm_l2())?;
        Ok(norm)
    };
    let a = last(prob)?;
    let b = last(&prob.with_dt(0.5 * prob.dt))?;
    Ok(if b == 0.0 { (a - b).abs() } else { (a - b).abs() / b })
}

/// Restart interval T0 = c_p ‖φ‖^{-4p/(4-p)}.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RestartSchedule {
    pub t0: f64,
    pub c_p: f64,
}

impl RestartSchedule {
    pub fn new(c_p: f64, phi_l2: f64, p: f64) -> Result<Self> {
        if !(p > 0.0 && p < 4.0) || !(c_p > 0.0) {
            return Err(Error::InvalidParameter(format!("c_p = {c_p}, p = {p}")));
        }
        let t0 = if phi_l2 == 0.0 {
            f64::INFINITY
        } else {
            c_p * phi_l2.powf(-4.0 * p / (4.0 - p))
        };
        Ok(Self { t0, c_p })
    }

    pub fn never() -> Self {
        Self {
            t0: f64::INFINITY,
            c_p: f64::INFINITY,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TwoGridRun {
    pub trace: SpaceTimeTrace,
    /// (time, ‖u‖_{l²}) right after each restart, starting with t = 0.
    pub window_norms: Vec<(f64, f64)>,
}

/// Right-hand side -iκ Π f(Π* u).
fn twogrid_rhs(u: &FieldState, pair: &TwoGridPair, p: f64, coupling: f64) -> Result<FieldState> {
    let mut c = twogrid_adjoint(u, pair)?;
    for v in c.values.iter_mut() {
        *v *= Complex64::new(0.0, -coupling) * v.norm().powf(p);
    }
    twogrid_interpolate(&c, pair)
}

/// One RK4 step of u' = -iκ Π f(Π* u).
fn twogrid_nonlinear(u: &mut FieldState, pair: &TwoGridPair, p: f64, coupling: f64, tau: f64) -> Result<()> {
    if coupling == 0.0 {
        return Ok(());
    }
    let axpy = |base: &FieldState, k: &FieldState, a: f64| FieldState {
        grid: base.grid,
        values: base
            .values
            .iter()
            .zip(&k.values)
            .map(|(x, y)| x + y * a)
            .collect(),
    };
    let k1 = twogrid_rhs(u, pair, p, coupling)?;
    let k2 = twogrid_rhs(&axpy(u, &k1, 0.5 * tau), pair, p, coupling)?;
    let k3 = twogrid_rhs(&axpy(u, &k2, 0.5 * tau), pair, p, coupling)?;
    let k4 = twogrid_rhs(&axpy(u, &k3, tau), pair, p, coupling)?;
    for i in 0..u.values.len() {
        u.values[i] +=
            (k1.values[i] + (k2.values[i] + k3.values[i]) * 2.0 + k4.values[i]) * (tau / 6.0);
    }
    Ok(())
}

/// i u_t + Δ_h u = Π f(Π* u) by Strang splitting on the fine grid; at every
/// multiple of T0 the state is projected back onto the range of Π.
/// `prob.phi` is the fine-grid datum, normally Π T_{4h} φ.
pub fn evolve_nse_twogrid(
    prob: &NseProblem,
    pair: &TwoGridPair,
    sched: &RestartSchedule,
) -> Result<TwoGridRun> {
    prob.validate()?;
    if prob.phi.grid != pair.fine {
        return Err(Error::GridMismatch("datum is not on the fine grid of the pair".into()));
    }
    let grid = pair.fine;
    let prop = LinearPropagator::new(prob.symbol, grid)?;
    let (n, dt) = prob.steps();
    let mult = prop.multiplier(dt);
    let guard = Guard::new(&prob.phi);
    let mut u = prob.phi.clone();
    let mut times = vec![0.0];
    let mut states = vec![u.clone()];
    let mut window_norms = vec![(0.0, u.norm_l2())];
    let mut next_restart = sched.t0;
    if prob.t_final > 0.0 {
        for step in 1..=n {
            twogrid_nonlinear(&mut u, pair, prob.p, prob.coupling, 0.5 * dt)?;
            linear_step(&grid, &mut u.values, &mult);
            twogrid_nonlinear(&mut u, pair, prob.p, prob.coupling, 0.5 * dt)?;
            let t = step as f64 * dt;
            guard.check(&u.values, t)?;
            if t >= next_restart - 0.5 * dt {
                u = twogrid_range_projection(&u, pair)?;
                window_norms.push((t, u.norm_l2()));
                next_restart += sched.t0;
            }
            if step % prob.record_every == 0 || step == n {
                times.push(t);
                states.push(u.clone());
            }
        }
    }
    Ok(TwoGridRun {
        trace: SpaceTimeTrace::new(times, states)?,
        window_norms,
    })
}
