use std::f64::consts::PI;

use hybridq::integrate::EvolveOptions;
use hybridq::model::{Schedule, Segment, SystemModel};
use hybridq::protocols::*;
use hybridq::qspace::{FactorLabel, Ket, SpaceLayout, C64};
use hybridq::Error;
use proptest::prelude::*;

fn quadratic(delta0: f64, delta1: f64, t: f64) -> Schedule {
    Schedule::QuadraticPulse { delta0, delta1, duration: t }
}

/// Composite Simpson rule on a uniform grid, independent of the adaptive
/// quadrature under test.
fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for k in 1..n {
        s += f(a + k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

fn phase_oracle(delta0: f64, delta1: f64, t: f64, n: f64, g: f64) -> f64 {
    let f = |s: f64| {
        let x = 2.0 * s / t - 1.0;
        let d = -delta0 * x * x - delta1;
        // (δ + √(δ² + 4ng²))/2 in the cancellation-free form for δ < 0
        2.0 * n * g * g / ((d * d + 4.0 * n * g * g).sqrt() - d)
    };
    -simpson(f, 0.0, t, 200_000)
}

#[test]
fn phase_closed_forms() {
    // constant detuning
    for (d, n) in [(-3.0, 1u32), (2.0, 2), (0.0, 1)] {
        let exact = -5.0 * (d + (d * d + 4.0 * n as f64).sqrt()) / 2.0;
        let p = phase_functional(&Schedule::Constant(d), n, 1.0, 5.0).unwrap();
        assert!((p - exact).abs() < 1e-10, "{p} vs {exact}");
    }
    // no coupling: the dressed shift vanishes for red detuning
    assert_eq!(phase_functional(&quadratic(30.0, 0.44, 44.79), 1, 0.0, 44.79).unwrap(), 0.0);
    // zero photons
    assert_eq!(phase_functional(&quadratic(30.0, 0.44, 44.79), 0, 1.0, 44.79).unwrap(), 0.0);
}

#[test]
fn quadrature_matches_simpson_oracle() {
    for n in [1u32, 2] {
        let p = phase_functional(&quadratic(30.0, 0.44, 44.79), n, 1.0, 44.79).unwrap();
        let o = phase_oracle(30.0, 0.44, 44.79, n as f64, 1.0);
        assert!((p - o).abs() < 1e-9, "n={n}: {p} vs {o}");
    }
}

#[test]
fn trajectory_is_cumulative_and_additive() {
    let s = quadratic(30.0, 0.44, 44.79);
    let times: Vec<f64> = (0..=10).map(|k| 4.479 * k as f64).collect();
    let tr = phase_trajectory(&s, 2, 1.0, &times).unwrap();
    assert_eq!(tr[0], 0.0);
    let whole = phase_functional(&s, 2, 1.0, 44.79).unwrap();
    assert!((tr[10] - whole).abs() < 1e-9);
    let split = phase_between(&s, 2, 1.0, 0.0, 13.0).unwrap() + phase_between(&s, 2, 1.0, 13.0, 44.79).unwrap();
    assert!((split - whole).abs() < 1e-9);
    assert!(tr.windows(2).all(|w| w[1] < w[0]));
    assert!(phase_trajectory(&s, 2, 1.0, &[3.0, 1.0]).is_err());
    assert!(matches!(phase_functional(&s, 1, 1.0, 50.0), Err(Error::OutOfRange { .. })));
}

#[test]
fn figure_pulse_phases_pinned() {
    let p1 = phase_functional(&quadratic(30.0, 0.44, 44.79), 1, 1.0, 44.79).unwrap();
    let p2 = phase_functional(&quadratic(30.0, 0.44, 44.79), 2, 1.0, 44.79).unwrap();
    assert!((p1 - -10.898906019981).abs() < 1e-8, "{p1:.12}");
    assert!((p2 - -18.716841490321).abs() < 1e-8, "{p2:.12}");
    let w2 = p2.rem_euclid(2.0 * PI);
    let w1 = p1.rem_euclid(2.0 * PI);
    assert!(w2.min(2.0 * PI - w2) < 0.2);
    assert!((w1 - PI / 2.0).abs() < 0.25);
}

#[test]
fn calibration_round_trip_near_figure_values() {
    let c = calibrate_pulse(30.0, 1.0, -3).unwrap();
    assert_eq!(c.branch_2, -3);
    assert!(c.residuals[0].abs() < PHASE_TOL && c.residuals[1].abs() < PHASE_TOL, "{:?}", c.residuals);
    // fresh quadrature of the returned pulse
    let p1 = phase_functional(&c.pulse.schedule(), 1, 1.0, c.pulse.duration).unwrap();
    let p2 = phase_functional(&c.pulse.schedule(), 2, 1.0, c.pulse.duration).unwrap();
    assert!((p1 - (PI / 2.0 + 2.0 * PI * c.branch_1 as f64)).abs() < 1e-8);
    assert!((p2 + 6.0 * PI).abs() < 1e-8);
    assert!((c.pulse.delta1 - 0.44).abs() / 0.44 < 0.1, "{:?}", c.pulse);
    assert!((c.pulse.duration - 44.79).abs() / 44.79 < 0.02, "{:?}", c.pulse);
}

#[test]
fn calibration_rejects_bad_input() {
    assert!(matches!(calibrate_pulse(0.5, 1.0, -3), Err(Error::InvalidParameter { .. })));
    assert!(matches!(calibrate_pulse(30.0, 0.0, -3), Err(Error::InvalidParameter { .. })));
    // φ2 = 0 on branch 0 has no negative solution
    assert!(matches!(calibrate_pulse(30.0, 1.0, 0), Err(Error::Calibration { .. })));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn more_photons_more_phase(d0 in 1.5f64..60.0, d1 in 0.01f64..5.0, t in 1.0f64..100.0) {
        let s = quadratic(d0, d1, t);
        let p1 = phase_functional(&s, 1, 1.0, t).unwrap();
        let p2 = phase_functional(&s, 2, 1.0, t).unwrap();
        prop_assert!(p1 < 0.0 && p2 < p1);
        let r = p2 / p1;
        prop_assert!(r > 2f64.sqrt() && r < 2.0);
    }

    #[test]
    fn calibration_round_trips(d0 in 10.0f64..50.0, t1 in -3.0f64..3.0, t2 in -3.0f64..3.0) {
        let c = calibrate_pulse_to(d0, 1.0, t1, t2, &BranchSearch::around(-3, 3)).unwrap();
        let p1 = c.pulse.phase(1).unwrap();
        let p2 = c.pulse.phase(2).unwrap();
        prop_assert!(wrap_phase(p1 - t1).abs() < 1e-8);
        prop_assert!(wrap_phase(p2 - t2).abs() < 1e-8);
    }
}

fn cavity_ensemble(dc: usize, de: usize) -> SpaceLayout {
    SpaceLayout::new(vec![(FactorLabel::Cavity, dc), (FactorLabel::Ensemble1, de)]).unwrap()
}

/// Linear sweep through ±200 g with the coupling ramped on and off as
/// `g sin²(πt/T)`; the smooth envelope removes the interference term a sudden
/// switch-on would add, leaving an O((πg/D)²) deviation from the LZ formula.
fn landau_zener_run(x: f64) -> (f64, f64) {
    let g = 1.0;
    let d = 200.0 * g;
    let rate = 2.0 * PI * g * g / x;
    let t = 2.0 * d / rate;
    let l = cavity_ensemble(2, 2);
    let sweep = SweepSpec { shape: SweepShape::Linear, delta_start: d, delta_end: -d, duration: t, target: SweepTarget::Ensemble(1) };
    let m = SystemModel::new(l.clone()).with_ensemble(1, Schedule::SineSquared { peak: g, duration: t }, Schedule::Constant(0.0));
    let rho = Ket::basis(&l, &[(FactorLabel::Cavity, 1)]).unwrap().to_density();
    let r = swap_protocol(&m, &sweep, &rho, &EvolveOptions::default()).unwrap();
    assert!((r.predicted_leakage - (-x).exp()).abs() < 1e-12);
    (r.transfer_probability, 1.0 - (-x).exp())
}

#[test]
fn landau_zener_oracle() {
    for k in 0..10 {
        let x = (0.05f64.ln() + (100f64).ln() * k as f64 / 9.0).exp();
        let (p, exact) = landau_zener_run(x);
        assert!((p - exact).abs() < 1e-3, "2πg²/r = {x}: {p} vs {exact}");
    }
}

fn swap_setup() -> (SystemModel, SweepSpec) {
    let l = SpaceLayout::standard(3, 3).unwrap();
    let g_m = 0.2;
    let sweep = SweepSpec::default_for(g_m, SweepTarget::Ensemble(1)).unwrap();
    let m = SystemModel::new(l)
        .with_g_c(1.0)
        .with_cpb_detuning(Schedule::Constant(-30.0))
        .with_ensemble(1, Schedule::SineSquared { peak: g_m, duration: sweep.duration }, Schedule::Constant(0.0));
    (m, sweep)
}

#[test]
fn swap_moves_cavity_states_into_the_ensemble() {
    let (m, sweep) = swap_setup();
    let l = m.layout.clone();
    let opts = EvolveOptions::default();

    let vac = Ket::vacuum(&l).to_density();
    let r = swap_protocol(&m, &sweep, &vac, &opts).unwrap();
    assert!((r.fidelity - 1.0).abs() < 1e-10);

    let h = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    let psi = Ket::vacuum(&l).plus(&Ket::basis(&l, &[(FactorLabel::Cavity, 1)]).unwrap()).scaled(h);
    let r = swap_protocol(&m, &sweep, &psi.to_density(), &opts).unwrap();
    assert!(r.phase_corrected_fidelity > 0.99, "{}", r.phase_corrected_fidelity);
    // the bare photon overlaps the charge-qubit-like dressed state by
    // (gc/δc)², which stays behind
    let dressed = 1.0 / 900.0;
    assert!(r.transfer_probability > 1.0 - dressed - 2e-4, "{}", r.transfer_probability);
    assert!(r.trace_drift < 1e-8);
    assert!(r.warnings.is_empty());

    // two photons land in the ensemble's second level
    let two = Ket::basis(&l, &[(FactorLabel::Cavity, 2)]).unwrap().to_density();
    let r = swap_protocol(&m, &sweep, &two, &opts).unwrap();
    assert!(r.fidelity > 0.99, "{}", r.fidelity);
}

#[test]
fn partial_sweep_stops_at_requested_fraction() {
    let g = 0.2;
    let l = cavity_ensemble(2, 2);
    let rho = Ket::basis(&l, &[(FactorLabel::Cavity, 1)]).unwrap().to_density();
    for f in [0.6, 0.75, 0.9] {
        let sweep = SweepSpec::partial_for(g, SweepTarget::Ensemble(1), f).unwrap();
        assert!(sweep.delta_end < 0.0);
        assert!(predicted_lz_leakage(&sweep, g) <= DEFAULT_LEAKAGE * 1.0001);
        // coupling must stay on at the stop, so ramp it up and hold it
        let rise = 0.1 * sweep.duration;
        let env = Schedule::Piecewise(vec![
            Segment::new(0.0, rise, Schedule::TanhRamp { from: 0.0, to: g, duration: rise, steepness: 2.0 }),
            Segment::new(rise, sweep.duration, Schedule::Constant(g)),
        ]);
        let m = SystemModel::new(l.clone()).with_ensemble(1, env, Schedule::Constant(0.0));
        let r = swap_protocol(&m, &sweep, &rho, &EvolveOptions::default()).unwrap();
        assert!((r.transfer_probability - f).abs() < 5e-3, "{f}: {}", r.transfer_probability);
    }
    assert_eq!(SweepSpec::partial_for(g, SweepTarget::Both, 1.0).unwrap(), SweepSpec::default_for(g, SweepTarget::Both).unwrap());
    assert!(SweepSpec::partial_for(g, SweepTarget::Both, 0.5).is_err());
}

#[test]
fn swap_preconditions() {
    let (m, sweep) = swap_setup();
    let vac = Ket::vacuum(&m.layout).to_density();
    let opts = EvolveOptions::default();
    let resonant = m.clone().with_cpb_detuning(Schedule::Constant(0.0));
    assert!(matches!(swap_protocol(&resonant, &sweep, &vac, &opts), Err(Error::Precondition(_))));
    let both = SweepSpec { target: SweepTarget::Both, ..sweep };
    assert!(matches!(swap_protocol(&m, &both, &vac, &opts), Err(Error::Precondition(_))));
    let fast = SweepSpec { duration: 5.0, ..sweep };
    let mf = m.clone().with_ensemble(1, Schedule::SineSquared { peak: 0.2, duration: 5.0 }, Schedule::Constant(0.0));
    let r = swap_protocol(&mf, &fast, &vac, &opts).unwrap();
    assert_eq!(r.warnings.len(), 1);
    let same_side = SweepSpec { delta_end: 1.0, ..sweep };
    assert!(swap_protocol(&m, &same_side, &vac, &opts).is_err());
}

fn gate_base(kappa: f64) -> SystemModel {
    let l = SpaceLayout::standard(4, 3).unwrap();
    SystemModel::new(l)
        .with_g_c(1.0)
        .with_kappa(kappa)
        .with_ensemble(1, Schedule::Constant(0.2), Schedule::Constant(0.0))
        .with_ensemble(2, Schedule::Constant(0.2), Schedule::Constant(0.0))
}

#[test]
fn calibrated_gate_reproduces_truth_table() {
    let base = gate_base(0.0);
    let opts = EvolveOptions::default();
    let cal = calibrate_gate(&base, 30.0, None, -3, &opts).unwrap();
    assert!((cal.realized_phases[0] - PI / 2.0).abs() < 1e-6);
    assert!(cal.realized_phases[1].abs() < 1e-6);
    let r = two_qubit_gate(&base, &cal.sequence, &opts).unwrap();
    for o in &r.outputs {
        assert!(o.fidelity >= 0.995, "{} {}", o.label, o.fidelity);
    }
    assert!(r.average_fidelity >= 0.99);
    assert!(r.basis_fidelity >= 0.99);
    assert!(r.double_occupation < 1e-3);
    assert!(r.conservation.max_norm_drift < 1e-8);
    assert!(r.conservation.max_excitation_drift < 1e-7);
    assert!(r.phases.antisymmetric_1.abs() < 1e-6);
    assert!(r.unitarity_deviation.unwrap() < 1e-2);
    // the pulse phases carry the sweep offsets
    assert!((wrap_phase(cal.sweep_phases[1] - r.phases.phi_2)).abs() < 0.05);
    assert_eq!(r.phase_trajectory.len(), 101);
    assert!((r.phase_trajectory.last().unwrap().2 - r.phases.phi_2).abs() < 1e-8);
}

#[test]
fn gate_preconditions() {
    let base = gate_base(0.0);
    let seq = GateSequence {
        pulse: QuadraticPulse::new(30.0, 0.44, 44.79, 1.0).unwrap(),
        sweep: SweepSpec::default_for(0.2, SweepTarget::Both).unwrap(),
    };
    let small = SystemModel { layout: SpaceLayout::standard(2, 3).unwrap(), ..base.clone() };
    assert!(matches!(two_qubit_gate(&small, &seq, &EvolveOptions::default()), Err(Error::Precondition(_))));
    let det = base.clone().with_ensemble(2, Schedule::Constant(0.2), Schedule::Constant(0.1));
    assert!(matches!(two_qubit_gate(&det, &seq, &EvolveOptions::default()), Err(Error::Precondition(_))));
    let gc = base.clone().with_g_c(2.0);
    assert!(matches!(two_qubit_gate(&gc, &seq, &EvolveOptions::default()), Err(Error::Precondition(_))));
    let one = SweepSpec { target: SweepTarget::Ensemble(1), ..seq.sweep };
    assert!(matches!(
        two_qubit_gate(&base, &GateSequence { sweep: one, ..seq }, &EvolveOptions::default()),
        Err(Error::Precondition(_))
    ));
}

#[test]
fn uncalibrated_pulse_leaks_into_double_occupation() {
    // the raw figure pulse ignores the sweep offsets, so |11⟩ is no longer
    // returned intact
    let base = gate_base(0.0);
    let seq = GateSequence {
        pulse: QuadraticPulse::new(30.0, 0.44, 44.79, 1.0).unwrap(),
        sweep: SweepSpec::default_for(0.2, SweepTarget::Both).unwrap(),
    };
    let r = two_qubit_gate(&base, &seq, &EvolveOptions::default()).unwrap();
    assert!(r.double_occupation > 1e-3, "{}", r.double_occupation);
    assert!(r.average_fidelity < 0.99);
}

#[test]
fn cavity_truncation_is_detected() {
    // the top cavity level is treated as the truncation edge; with three
    // levels the two-photon stage of |11⟩ sits right on it
    let base = SystemModel { layout: SpaceLayout::standard(3, 3).unwrap(), ..gate_base(0.0) };
    let opts = EvolveOptions::default();
    let cal = calibrate_gate(&gate_base(0.0), 30.0, None, -3, &opts).unwrap();
    match two_qubit_gate(&base, &cal.sequence, &opts) {
        Err(Error::Truncation { factor, population }) => {
            assert_eq!(factor, FactorLabel::Cavity);
            assert!(population > 1e-4);
        }
        other => panic!("{:?}", other.map(|r| r.average_fidelity)),
    }
}

#[test]
fn lossy_gate_uses_density_runs() {
    let base = gate_base(0.0);
    let opts = EvolveOptions::default();
    let cal = calibrate_gate(&base, 30.0, None, -3, &opts).unwrap();
    let lossy = gate_base(1e-3);
    let r = two_qubit_gate(&lossy, &cal.sequence, &opts).unwrap();
    assert!(r.conservation.max_trace_drift < 1e-8);
    assert!(r.unitarity_deviation.is_none());
    assert!(r.average_fidelity < 0.9999 && r.average_fidelity > 0.9);
}
