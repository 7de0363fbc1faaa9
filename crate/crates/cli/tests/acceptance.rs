//! Acceptance run: one line per criterion, nonzero exit if any fails.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::path::{Path, PathBuf};
use std::process::Command as Proc;
use std::time::Instant;

use hybridq::estimate::constants::{AMU, BOHR, C, DEBYE, K_B};
use hybridq::estimate::{self, Amplitudes, CavitySpec, EnsembleSpec};
use hybridq::fit::linear_fit;
use hybridq::integrate::EvolveOptions;
use hybridq::model::{Schedule, SystemModel};
use hybridq::protocols::{
    calibrate_gate, dephasing_scan, phase_functional, swap_protocol, target_unitary, two_qubit_gate, wrap_phase,
    GateCalibration, GateReport, SweepShape, SweepSpec, SweepTarget,
};
use hybridq::qspace::{FactorLabel, Ket, SpaceLayout, C64};
use hybridq_cli::commands::load_molecule;
use hybridq_cli::parse_scenario;

const TWO_PI: f64 = 2.0 * PI;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(checks: &[(bool, String)]) -> Outcome {
    let failed: Vec<&str> = checks.iter().filter(|c| !c.0).map(|c| c.1.as_str()).collect();
    let detail = if failed.is_empty() {
        checks.iter().map(|c| c.1.as_str()).collect::<Vec<_>>().join("; ")
    } else {
        format!("FAILED: {}", failed.join("; "))
    };
    Outcome { pass: failed.is_empty(), detail }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn gate_base(gamma_phi: f64) -> SystemModel {
    SystemModel::new(SpaceLayout::standard(4, 3).unwrap())
        .with_g_c(1.0)
        .with_dephasing(gamma_phi)
        .with_ensemble(1, Schedule::Constant(0.2), Schedule::Constant(0.0))
        .with_ensemble(2, Schedule::Constant(0.2), Schedule::Constant(0.0))
}

fn phase_conditions() -> Outcome {
    let t0 = Instant::now();
    let pulse = Schedule::QuadraticPulse { delta0: 30.0, delta1: 0.44, duration: 44.79 };
    let p1 = phase_functional(&pulse, 1, 1.0, 44.79).unwrap();
    let p2 = phase_functional(&pulse, 2, 1.0, 44.79).unwrap();
    let secs = t0.elapsed().as_secs_f64();
    let w1 = p1.rem_euclid(TWO_PI);
    let w2 = wrap_phase(p2);
    outcome(&[
        ((w2).abs() < 0.2, format!("|φ2 mod 2π| = {:.4}", w2.abs())),
        ((w1 - PI / 2.0).abs() < 0.25, format!("|φ1 mod 2π − π/2| = {:.4}", (w1 - PI / 2.0).abs())),
        ((p1 + 10.898906019981).abs() < 1e-8 && (p2 + 18.716841490321).abs() < 1e-8, format!("pinned φ1 = {p1:.9}, φ2 = {p2:.9}")),
        (secs < 1.0, format!("{secs:.3} s")),
    ])
}

/// Images of the basis states as the paper's truth table states them.
fn truth_table() -> [[C64; 4]; 4] {
    let z = C64::new(0.0, 0.0);
    let e = C64::from_polar(FRAC_1_SQRT_2, PI / 4.0);
    let i = C64::new(0.0, 1.0);
    // index 2a + b for |ab⟩; |10⟩ → e^{iπ/4}(|10⟩ + i|01⟩)/√2 and so on
    [
        [C64::new(1.0, 0.0), z, z, z],
        [z, e, i * e, z],
        [z, i * e, e, z],
        [z, z, z, C64::new(1.0, 0.0)],
    ]
}

fn gate_map(cal: &GateCalibration, r: &GateReport, secs: f64) -> Outcome {
    let table = truth_table();
    let u = target_unitary();
    let mut target_ok = true;
    for (col, image) in table.iter().enumerate() {
        for (row, want) in image.iter().enumerate() {
            target_ok &= (u[(row, col)] - want).norm() < 1e-12;
        }
    }
    let mut checks = vec![(target_ok, "target matches truth table".to_string())];
    for o in &r.outputs {
        // ⟨ψ|ρ|ψ⟩ of the reduced output against the tabulated image
        let image = &table[usize::from_str_radix(o.label, 2).unwrap()];
        let mut f = C64::new(0.0, 0.0);
        for a in 0..4 {
            for b in 0..4 {
                f += image[a].conj() * o.state[(a, b)] * image[b];
            }
        }
        checks.push((f.re >= 0.995, format!("F|{}⟩ = {:.6}", o.label, f.re)));
    }
    checks.push((r.average_fidelity >= 0.99, format!("F_G = {:.6}", r.average_fidelity)));
    checks.push((secs < 60.0, format!("{secs:.1} s (δ1 = {:.4}, T = {:.2})", cal.pulse.pulse.delta1, cal.pulse.pulse.duration)));
    outcome(&checks)
}

fn decoherence_scaling(points: &[(f64, f64)]) -> Outcome {
    let xs: Vec<f64> = points.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1).collect();
    let fit = linear_fit(&xs, &ys).unwrap();
    let curve = points.iter().map(|(x, y)| format!("{x:.0e}:{y:.2e}")).collect::<Vec<_>>().join(" ");
    outcome(&[
        (fit.correlation > 0.99, format!("r = {:.6}, slope = {:.3}", fit.correlation, fit.slope)),
        (fit.slope > 0.0, format!("1 − F = {curve}")),
    ])
}

fn leakage(cal: &GateCalibration, r: &GateReport) -> Outcome {
    let phi2 = wrap_phase(cal.realized_phases[1]);
    outcome(&[
        (phi2.abs() < 1e-3, format!("realized φ2 mod 2π = {phi2:.2e}")),
        (r.double_occupation < 1e-3, format!("P(|20⟩ + |02⟩) = {:.2e}", r.double_occupation)),
    ])
}

fn cavity_ensemble() -> SpaceLayout {
    SpaceLayout::new(vec![(FactorLabel::Cavity, 2), (FactorLabel::Ensemble1, 2)]).unwrap()
}

/// Transfer probability and trace drift of a linear sweep through ±200 g with
/// a sin² coupling envelope, at adiabaticity 2πg²/rate = x.
fn landau_zener(x: f64) -> (f64, f64) {
    let g = 1.0;
    let d = 200.0 * g;
    let rate = TWO_PI * g * g / x;
    let t = 2.0 * d / rate;
    let l = cavity_ensemble();
    let sweep = SweepSpec { shape: SweepShape::Linear, delta_start: d, delta_end: -d, duration: t, target: SweepTarget::Ensemble(1) };
    let m = SystemModel::new(l.clone()).with_ensemble(1, Schedule::SineSquared { peak: g, duration: t }, Schedule::Constant(0.0));
    let rho = Ket::basis(&l, &[(FactorLabel::Cavity, 1)]).unwrap().to_density();
    let r = swap_protocol(&m, &sweep, &rho, &EvolveOptions::default()).unwrap();
    (r.transfer_probability, r.trace_drift)
}

fn landau_zener_oracle(runs: &[(f64, f64, f64)]) -> Outcome {
    let worst = runs.iter().map(|&(x, p, _)| (p - (1.0 - (-x).exp())).abs()).fold(0.0, f64::max);
    outcome(&[
        (runs.len() == 10, format!("{} rates, 2πg²/rate ∈ [{:.2}, {:.0}]", runs.len(), runs[0].0, runs[9].0)),
        (worst < 1e-3, format!("max |P − (1 − e^(−2πg²/rate))| = {worst:.2e}")),
    ])
}

fn conservation(unitary: &GateReport, lindblad: &[f64]) -> Outcome {
    let c = &unitary.conservation;
    let trace = lindblad.iter().cloned().fold(0.0, f64::max);
    outcome(&[
        (c.max_excitation_drift < 1e-7, format!("excitation drift {:.1e}", c.max_excitation_drift)),
        (c.max_norm_drift < 1e-8, format!("norm drift {:.1e}", c.max_norm_drift)),
        (trace < 1e-8, format!("trace drift {trace:.1e} over {} master-equation runs", lindblad.len())),
    ])
}

fn estimators() -> Outcome {
    let t0 = Instant::now();
    let mut checks = Vec::new();
    let cavity = |d_um: f64| CavitySpec { frequency_2pi_ghz: 20.0, electrode_distance_um: d_um, length_cm: 1.5, kappa_2pi_mhz: 0.01 };
    let g = estimate::vacuum_rabi(5.0 * DEBYE, &cavity(10.0)).unwrap();
    checks.push(((5e3..=15e3).contains(&(g / TWO_PI)), format!("g/2π = {:.2} kHz", g / TWO_PI / 1e3)));

    // N = n d² λ/10 at n = 1e12 cm⁻³; d chosen to span N = 1e4…1e6
    let lambda = C / 20e9;
    let mut gm = Vec::new();
    for n in [1e4f64, 1e5, 1e6] {
        let d = (10.0 * n / (1e18 * lambda)).sqrt();
        let count = estimate::molecule_count(1e18, d, lambda).unwrap();
        let g = estimate::vacuum_rabi(5.0 * DEBYE, &cavity(d * 1e6)).unwrap();
        // Ω = 2Δ and Ω = Δ
        for ratio in [2.0, 1.0] {
            gm.push(estimate::raman_couplings(g, ratio, 0.0, 0.0, 1.0, count).unwrap().g_m / TWO_PI / 1e6);
        }
    }
    let (lo, hi) = gm.iter().fold((f64::MAX, 0.0f64), |(a, b), &x| (a.min(x), b.max(x)));
    checks.push((lo >= 1.0 && hi <= 10.0, format!("g_m/2π ∈ [{lo:.2}, {hi:.2}] MHz")));

    let sc = parse_scenario("[estimate]\nmolecule = cacl\n").unwrap();
    let cacl = load_molecule(&sc, None).unwrap();
    let (_, r_star) = estimate::c6_and_range(&cacl).unwrap();
    checks.push((rel(r_star, 780.0) < 0.2, format!("R*(CaCl) = {r_star:.0} a_B")));

    let col = estimate::collision_rate_swave(780.0 * BOHR, 1e18, 1e-6, cacl.mass(), None).unwrap();
    checks.push((rel(col.rate, TWO_PI * 150.0) < 0.5, format!("γ_col = 2π × {:.0} Hz", col.rate / TWO_PI)));
    let uni = estimate::collision_rate_unitarity(1e18, 1e-3, cacl.mass(), r_star * BOHR).unwrap();
    let ratio = uni.rate / (TWO_PI * 700.0);
    checks.push(((0.5..=2.0).contains(&ratio), format!("unitarity rate = 2π × {:.0} Hz", uni.rate / TWO_PI)));

    let caf = load_molecule(&parse_scenario("[estimate]\nmolecule = caf\n").unwrap(), None).unwrap();
    let ens = EnsembleSpec { density_cm3: 1e12, temperature_k: 1e-3, molecule_count: 1e6, trap_2pi_khz: 50.0, trap_mismatch: 0.1, alpha: 1.0 };
    let b = estimate::gate_error_budget(&ens, TWO_PI * 10e6, TWO_PI * 10e3, 10e-6, caf.mass()).unwrap();
    checks.push((b.epsilon < 0.02, format!("ε = {:.4}", b.epsilon)));
    let secs = t0.elapsed().as_secs_f64();
    checks.push((secs < 1.0, format!("{secs:.3} s")));
    outcome(&checks)
}

fn montecarlo() -> Outcome {
    let da = 100.0 * BOHR;
    let m = 75.0 * AMU;
    let (n, t) = (1e18, 1e-6);
    let f = move |_: f64, _: f64| C64::new(da, 0.0);
    let zero = |_: f64, _: f64| C64::new(0.0, 0.0);
    let amp = Amplitudes { elastic_00: &f, elastic_01: &zero, inelastic_00: &zero, inelastic_01: &zero, inelastic_release: 0.0 };
    let mc = estimate::gamma10_montecarlo(&amp, n, t, m, 100_000, 2024).unwrap();
    let vbar = (16.0 * K_B * t / (PI * m)).sqrt();
    let exact = 8.0 * PI * da * da * n * vbar;
    let z = (mc.rate - exact).abs() / mc.std_error;

    let counts = [10_000usize, 100_000, 1_000_000, 10_000_000];
    let xs: Vec<f64> = counts.iter().map(|&c| (c as f64).ln()).collect();
    let ys: Vec<f64> = counts.iter().map(|&c| estimate::gamma10_montecarlo(&amp, n, t, m, c, 99).unwrap().std_error.ln()).collect();
    let slope = linear_fit(&xs, &ys).unwrap().slope;
    outcome(&[
        (z < 3.0, format!("|MC − 8πΔa²nv̄| = {z:.2} σ")),
        ((slope + 0.5).abs() < 0.1, format!("log SE vs log samples slope {slope:.3}")),
    ])
}

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(name)
}

fn run_cli(cmd: &str, scn: &Path, out: &Path) -> bool {
    Proc::new(env!("CARGO_BIN_EXE_hybridq"))
        .arg(cmd)
        .arg(scn)
        .arg("--out")
        .arg(out)
        .args(["--seed", "5"])
        .output()
        .map(|o| o.status.success())
        .unwrap_or(false)
}

fn determinism() -> Outcome {
    let dir = std::env::temp_dir().join(format!("hybridq-acceptance-{}", std::process::id()));
    let mut checks = Vec::new();
    for (cmd, scn) in [("simulate", "vacuum_rabi.scn"), ("calibrate", "calibrate.scn"), ("estimate", "estimate_caf.scn"), ("gate", "gate.scn")] {
        let (a, b) = (dir.join(format!("{cmd}-a")), dir.join(format!("{cmd}-b")));
        let ok = run_cli(cmd, &scenario(scn), &a) && run_cli(cmd, &scenario(scn), &b);
        let mut files: Vec<_> = std::fs::read_dir(&a).map(|d| d.filter_map(|e| e.ok()).map(|e| e.file_name()).collect()).unwrap_or_default();
        files.sort();
        let same = ok
            && !files.is_empty()
            && files.iter().all(|f| std::fs::read(a.join(f)).ok() == std::fs::read(b.join(f)).ok() && b.join(f).exists());
        checks.push((same, format!("{cmd}: {} files identical", files.len())));
    }
    let _ = std::fs::remove_dir_all(&dir);
    outcome(&checks)
}

fn main() {
    let started = Instant::now();
    let mut results: Vec<(u8, &str, Outcome)> = Vec::new();
    results.push((1, "phase conditions", phase_conditions()));

    let opts = EvolveOptions::default();
    let base = gate_base(0.0);
    let t0 = Instant::now();
    let cal = calibrate_gate(&base, 30.0, None, -3, &opts).expect("gate calibration");
    let report = two_qubit_gate(&base, &cal.sequence, &opts).expect("gate run");
    let gate_secs = t0.elapsed().as_secs_f64();
    results.push((2, "gate map", gate_map(&cal, &report, gate_secs)));

    let rates: Vec<f64> = (0..5).map(|k| 10f64.powf(-4.0 + 0.5 * k as f64)).collect();
    let (points, _) = dephasing_scan(&base, &cal.sequence, &rates, &opts).expect("dephasing scan");
    let curve: Vec<(f64, f64)> = points.iter().map(|p| (p.gamma_phi, p.infidelity)).collect();
    results.push((3, "decoherence scaling", decoherence_scaling(&curve)));
    results.push((4, "leakage suppression", leakage(&cal, &report)));

    let lz: Vec<(f64, f64, f64)> = (0..10)
        .map(|k| {
            let x = (0.05f64.ln() + 100f64.ln() * k as f64 / 9.0).exp();
            let (p, drift) = landau_zener(x);
            (x, p, drift)
        })
        .collect();
    let mut lindblad: Vec<f64> = points.iter().map(|p| p.trace_drift).collect();
    lindblad.extend(lz.iter().map(|r| r.2));
    results.push((5, "conservation", conservation(&report, &lindblad)));
    results.push((6, "Landau-Zener oracle", landau_zener_oracle(&lz)));
    results.push((7, "estimators", estimators()));
    results.push((8, "Monte Carlo oracle", montecarlo()));
    results.push((9, "determinism", determinism()));

    results.sort_by_key(|r| r.0);
    let mut failed = 0;
    for (id, name, o) in &results {
        println!("criterion {id} {:<22} {}  {}", name, if o.pass { "PASS" } else { "FAIL" }, o.detail);
        failed += usize::from(!o.pass);
    }
    println!("{} of {} criteria pass ({:.0} s)", results.len() - failed, results.len(), started.elapsed().as_secs_f64());
    if failed > 0 {
        std::process::exit(1);
    }
}
