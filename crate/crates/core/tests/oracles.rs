//! Cross-checks of the integrators against independent formulations.

use disperse_lab::data_gen::make_gaussian;
use disperse_lab::experiments::{fit_loglog, NseStudy};
use disperse_lab::grid_fourier::{forward_dft, inverse_dft, FieldState, GridSpec, SpectrumState};
use disperse_lab::norms::NormSelector;
use disperse_lab::projectors::{littlewood_paley, lp_max_level, project_th, twogrid_range_projection, TwoGridPair};
use disperse_lab::propagators::{
    evolve_nse, evolve_nse_twogrid, LinearPropagator, NseProblem, RestartSchedule,
};
use disperse_lab::symbols::{SchemeKind, SchemeSymbol};
use num_complex::Complex64;

fn final_state(prob: &NseProblem) -> FieldState {
    evolve_nse(prob).unwrap().states.pop().unwrap()
}

/// Picard iteration on u(t) = S(t)φ − iκ ∫_0^t S(t−s) |u|^p u(s) ds, done
/// mode by mode with cumulative trapezoid quadrature on `m` intervals.
fn picard(symbol: SchemeSymbol, phi: &FieldState, p: f64, t: f64, m: usize) -> FieldState {
    let g = phi.grid;
    let a = LinearPropagator::new(symbol, g).unwrap().symbol_values().to_vec();
    let dt = t / m as f64;
    let phi_hat = forward_dft(phi).coeffs;
    let mut u: Vec<FieldState> = vec![phi.clone(); m + 1];
    for _ in 0..100 {
        let mut acc = vec![Complex64::new(0.0, 0.0); g.n()];
        let mut prev: Option<Vec<Complex64>> = None;
        let mut next = Vec::with_capacity(m + 1);
        let mut change = 0.0f64;
        for k in 0..=m {
            let s = k as f64 * dt;
            let f = FieldState {
                grid: g,
                values: u[k].values.iter().map(|v| v * v.norm().powf(p)).collect(),
            };
            // e^{-isa} F̂(s)
            let cur: Vec<Complex64> = forward_dft(&f)
                .coeffs
                .iter()
                .zip(&a)
                .map(|(c, av)| c * (Complex64::new(0.0, -s) * av).exp())
                .collect();
            if let Some(pr) = &prev {
                for i in 0..g.n() {
                    acc[i] += (pr[i] + cur[i]) * (0.5 * dt);
                }
            }
            prev = Some(cur);
            let coeffs: Vec<Complex64> = (0..g.n())
                .map(|i| (Complex64::new(0.0, s) * a[i]).exp() * (phi_hat[i] - Complex64::i() * acc[i]))
                .collect();
            let v = inverse_dft(&SpectrumState { grid: g, coeffs });
            change = change.max(v.sub(&u[k]).unwrap().norm_l2());
            next.push(v);
        }
        u = next;
        if change < 1e-13 {
            break;
        }
    }
    u.pop().unwrap()
}

#[test]
fn splitting_agrees_with_duhamel_fixed_point() {
    let h = 0.5;
    let g = GridSpec::new(h, 16).unwrap();
    let phi = project_th(&make_gaussian(1.5).unwrap(), &g).unwrap();
    for kind in [SchemeKind::Conservative3pt, SchemeKind::HigherViscous { m: 2 }] {
        let symbol = SchemeSymbol::new(kind, h).unwrap();
        let oracle = picard(symbol, &phi, 2.0, 0.5, 4000);
        let split = final_state(&NseProblem::new(2.0, symbol, 0.5, 1e-4, phi.clone()).unwrap());
        let rel = split.sub(&oracle).unwrap().norm_l2() / oracle.norm_l2();
        assert!(rel < 1e-5, "{kind}: {rel:e}");
    }
}

#[test]
fn strang_splitting_is_second_order() {
    let h = 0.1;
    let g = GridSpec::new(h, 4096).unwrap();
    let phi = project_th(&make_gaussian(1.0).unwrap().scaled(1.5), &g).unwrap();
    let symbol = SchemeSymbol::new(SchemeKind::Exact, h).unwrap();
    let base = NseProblem::new(2.0, symbol, 1.0, 0.04, phi).unwrap();
    let reference = final_state(&base.with_dt(0.04 / 64.0));
    let dts = [0.04, 0.02, 0.01, 0.005];
    let errs: Vec<f64> = dts
        .iter()
        .map(|&dt| final_state(&base.with_dt(dt)).sub(&reference).unwrap().norm_l2())
        .collect();
    let (slope, _) = fit_loglog(&dts, &errs).unwrap();
    assert!((slope - 2.0).abs() <= 0.2, "order {slope}, errors {errs:?}");
}

#[test]
fn zero_coupling_is_the_linear_flow() {
    let h = 0.1;
    let g = GridSpec::new(h, 512).unwrap();
    let phi = project_th(&make_gaussian(1.0).unwrap(), &g).unwrap();
    let symbol = SchemeSymbol::new(SchemeKind::Conservative3pt, h).unwrap();
    let mut prob = NseProblem::new(2.0, symbol, 1.0, 1e-2, phi.clone()).unwrap();
    prob.coupling = 0.0;
    let lin = LinearPropagator::new(symbol, g).unwrap().evolve(&phi, 1.0).unwrap();
    assert!(final_state(&prob).sub(&lin).unwrap().norm_l2() < 1e-12);
}

#[test]
fn propagator_commutes_with_littlewood_paley_blocks() {
    let h = 0.05;
    let g = GridSpec::new(h, 1024).unwrap();
    let phi = project_th(&make_gaussian(0.5).unwrap(), &g).unwrap();
    for kind in [SchemeKind::Conservative3pt, SchemeKind::HigherViscous { m: 2 }] {
        let prop = LinearPropagator::new(SchemeSymbol::new(kind, h).unwrap(), g).unwrap();
        for j in 0..=lp_max_level(&g) {
            let a = prop.evolve(&littlewood_paley(&phi, j), 0.7).unwrap();
            let b = littlewood_paley(&prop.evolve(&phi, 0.7).unwrap(), j);
            assert!(a.sub(&b).unwrap().norm_l2() < 1e-12, "{kind} j={j}");
        }
    }
}

fn twogrid_problem(h: f64) -> (NseProblem, TwoGridPair) {
    let g = GridSpec::new(h, (51.2 / h).round() as usize).unwrap();
    let pair = TwoGridPair::from_fine(g).unwrap();
    let phi = twogrid_range_projection(&project_th(&make_gaussian(2.0).unwrap(), &g).unwrap(), &pair).unwrap();
    let mut prob = NseProblem::new(2.0, SchemeSymbol::new(SchemeKind::TwoGridCarrier, h).unwrap(), 1.0, 1e-3, phi).unwrap();
    prob.record_every = 10;
    (prob, pair)
}

#[test]
fn two_grid_mass_never_increases_across_windows() {
    let (prob, pair) = twogrid_problem(0.1);
    let sched = RestartSchedule { t0: 0.2, c_p: 1.0 };
    let run = evolve_nse_twogrid(&prob, &pair, &sched).unwrap();
    assert_eq!(run.window_norms.len(), 6, "{:?}", run.window_norms);
    let n0 = run.window_norms[0].1;
    for w in run.window_norms.windows(2) {
        assert!(w[1].1 <= w[0].1 + 1e-12 * n0, "{:?}", run.window_norms);
    }
}

// The restart gap is the 4h interpolation error, about (4h)²|u''|/8, so the
// comparison runs at h = 0.025 (gap 6e-4; 1e-2 at h = 0.1).
#[test]
fn restarts_barely_perturb_smooth_data() {
    let (prob, pair) = twogrid_problem(0.025);
    let windowed = evolve_nse_twogrid(&prob, &pair, &RestartSchedule { t0: 0.2, c_p: 1.0 }).unwrap();
    let free = evolve_nse_twogrid(&prob, &pair, &RestartSchedule::never()).unwrap();
    assert_eq!(free.window_norms.len(), 1);
    let gap = windowed
        .trace
        .states
        .iter()
        .zip(&free.trace.states)
        .map(|(a, b)| a.sub(b).unwrap().norm_l2())
        .fold(0.0, f64::max);
    assert!(gap < 1e-3, "{gap:e}");
}

#[test]
fn doubling_the_horizon_grows_the_error_by_at_most_four_and_a_half() {
    let err = |t_final: f64| {
        NseStudy {
            kind: SchemeKind::Conservative3pt,
            profile: make_gaussian(1.0).unwrap(),
            p: 2.0,
            t_final,
            dt: 1e-3,
            length: 51.2,
            h_list: vec![0.1],
            record_every: 10,
            norms: vec![NormSelector::LinfL2],
            ref_factor: 4,
            ref_kind: SchemeKind::Exact,
            compare: None,
        }
        .errors()
        .unwrap()[0][0]
    };
    let (e1, e2) = (err(1.0), err(2.0));
    assert!(e2 > e1 && e2 <= 4.5 * e1, "{e1:e} {e2:e}");
}
