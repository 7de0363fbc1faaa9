//! Command dispatch onto the simulation, protocol and estimator layers.
//!
//! Simulations run in microseconds with frequencies in rad/µs; scenario
//! values arrive in SI and are rescaled here.

use std::f64::consts::PI;
use std::path::Path;

use hybridq::estimate::{self, constants::BOHR, Amplitudes, CavitySpec, EnsembleSpec, EstimateReport, MoleculeSpec, Scale};
use hybridq::integrate::{evolve_density, evolve_ket, EvolveOptions, Method};
use hybridq::model::{Schedule, SystemModel};
use hybridq::protocols::{
    calibrate_gate, calibrate_pulse_to, dephasing_scan, two_qubit_gate, BranchSearch, GateReport, GateSequence,
    wrap_phase, QuadraticPulse, SweepShape, SweepSpec, SweepTarget,
};
use hybridq::qspace::{embed, number_operator, two_level_ops, FactorLabel, Ket, SpaceLayout};
use num_complex::Complex64;

use crate::scenario::{parse_scenario, Command, Scenario};
use crate::table::{Cell, ResultTable};
use crate::CliError;

pub struct Output {
    pub tables: Vec<ResultTable>,
    pub warnings: Vec<String>,
}

const TWO_PI: f64 = 2.0 * PI;
const CAF: &str = include_str!("../data/caf.mol");
const CACL: &str = include_str!("../data/cacl.mol");

/// rad/s → rad/µs.
fn freq(sc: &Scenario, section: &str, stem: &str) -> Option<f64> {
    sc.float(section, stem).map(|v| v / 1e6)
}

/// s → µs.
fn time(sc: &Scenario, section: &str, stem: &str) -> Option<f64> {
    sc.float(section, stem).map(|v| v * 1e6)
}

/// rad/µs → 2π×MHz.
fn mhz(w: f64) -> f64 {
    w / TWO_PI
}

fn precondition(msg: impl Into<String>) -> CliError {
    CliError::Model(hybridq::Error::Precondition(msg.into()))
}

fn level(sc: &Scenario, section: &str, stem: &str, default: usize) -> Result<usize, CliError> {
    match sc.int(section, stem) {
        None => Ok(default),
        Some(v) => usize::try_from(v).map_err(|_| precondition(format!("[{section}] {stem} must be non-negative"))),
    }
}

fn layout(sc: &Scenario) -> Result<SpaceLayout, CliError> {
    let c = level(sc, "system", "cavity_levels", 4)?;
    let e = level(sc, "system", "ensemble_levels", 3)?;
    Ok(SpaceLayout::standard(c, e)?)
}

/// Model with constant drives taken from the scenario.
fn base_model(sc: &Scenario) -> Result<SystemModel, CliError> {
    let mut m = SystemModel::new(layout(sc)?)
        .with_g_c(freq(sc, "cpb", "g_c").unwrap_or(0.0))
        .with_cpb_detuning(Schedule::Constant(freq(sc, "cpb", "detuning").unwrap_or(0.0)))
        .with_kappa(freq(sc, "cavity", "kappa").unwrap_or(0.0))
        .with_dephasing(freq(sc, "cpb", "gamma_phi").unwrap_or(0.0))
        .with_relaxation(freq(sc, "cpb", "gamma_1").unwrap_or(0.0));
    for i in 1..=2 {
        let s = format!("ensemble.{i}");
        m = m.with_ensemble(
            i,
            Schedule::Constant(freq(sc, &s, "g_m").unwrap_or(0.0)),
            Schedule::Constant(freq(sc, &s, "detuning").unwrap_or(0.0)),
        );
    }
    Ok(m)
}

fn options(sc: &Scenario) -> Result<EvolveOptions, CliError> {
    let mut o = match sc.text("simulation", "method").unwrap_or("rk45") {
        "rk45" => EvolveOptions::default(),
        "rk4" => {
            let step = time(sc, "simulation", "rk4_step").ok_or_else(|| precondition("method = rk4 needs rk4_step_<unit>"))?;
            EvolveOptions::rk4(step)
        }
        other => return Err(precondition(format!("unknown method `{other}` (rk45 or rk4)"))),
    };
    if o.method == Method::Rk45Adaptive {
        let rel = sc.float("simulation", "rel_tol").unwrap_or(o.rel_tol);
        let abs = sc.float("simulation", "abs_tol").unwrap_or(o.abs_tol);
        o = o.with_tolerances(rel, abs);
    }
    Ok(o)
}

pub fn run(cmd: Command, sc: &Scenario, dir: Option<&Path>) -> Result<Output, CliError> {
    match cmd {
        Command::Simulate => simulate(sc),
        Command::Gate => gate(sc),
        Command::Calibrate => calibrate(sc),
        Command::Estimate => estimate(sc, dir),
        Command::Sweep => sweep(sc),
    }
}

fn simulate(sc: &Scenario) -> Result<Output, CliError> {
    let mut model = base_model(sc)?;
    let duration = if sc.text("simulation", "cpb_schedule") == Some("quadratic") {
        let p = pulse_from(sc, model.g_c)?;
        model = model.with_cpb_detuning(p.schedule());
        p.duration
    } else {
        match sc.text("simulation", "cpb_schedule") {
            None | Some("constant") => {}
            Some(other) => return Err(precondition(format!("unknown cpb_schedule `{other}` (constant or quadratic)"))),
        }
        time(sc, "simulation", "duration").expect("checked")
    };
    let l = model.layout.clone();
    let cpb = match sc.text("simulation", "initial_cpb").unwrap_or("g") {
        "g" => 0,
        "e" => 1,
        other => return Err(precondition(format!("initial_cpb must be g or e, got `{other}`"))),
    };
    let psi = Ket::basis(
        &l,
        &[
            (FactorLabel::Cavity, level(sc, "simulation", "initial_cavity", 0)?),
            (FactorLabel::Ensemble1, level(sc, "simulation", "initial_ensemble_1", 0)?),
            (FactorLabel::Ensemble2, level(sc, "simulation", "initial_ensemble_2", 0)?),
            (FactorLabel::Cpb, cpb),
        ],
    )?;
    let samples = level(sc, "simulation", "samples", 200)?.max(1);
    let times: Vec<f64> = (0..=samples).map(|k| duration * k as f64 / samples as f64).collect();
    let mut opts = options(sc)?.with_samples(times);
    let names = [("n_cavity", FactorLabel::Cavity), ("n_ensemble_1", FactorLabel::Ensemble1), ("n_ensemble_2", FactorLabel::Ensemble2)];
    for (n, f) in names {
        opts = opts.with_observable(n, embed(&number_operator(l.dim_of(f)?)?, f, &l)?);
    }
    opts = opts.with_observable("p_excited", embed(&two_level_ops().1, FactorLabel::Cpb, &l)?);

    let dissipative = model.kappa > 0.0 || model.gamma_phi > 0.0 || model.gamma_1 > 0.0;
    let (times, series, stats, drift) = if dissipative {
        let tl = evolve_density(&model, &psi.to_density(), duration, &opts)?;
        let drift = (tl.final_state.trace().re - 1.0).abs();
        (tl.times, tl.series, tl.stats, drift)
    } else {
        let tl = evolve_ket(&model, &psi, duration, &opts)?;
        let drift = (tl.final_state.norm() - 1.0).abs();
        (tl.times, tl.series, tl.stats, drift)
    };
    let mut timeline =
        ResultTable::new("timeline", &[("t", "us"), ("n_cavity", "1"), ("n_ensemble_1", "1"), ("n_ensemble_2", "1"), ("p_excited", "1")]);
    for (k, &t) in times.iter().enumerate() {
        let mut row = vec![Cell::from(t)];
        row.extend(series.iter().map(|(_, v)| Cell::from(v[k])));
        timeline.push(row);
    }
    let summary = ResultTable::single(
        "summary",
        vec![
            ("duration".into(), "us".into(), duration.into()),
            ("dissipative".into(), "label".into(), if dissipative { "yes" } else { "no" }.into()),
            (if dissipative { "trace_drift" } else { "norm_drift" }.into(), "1".into(), drift.into()),
            ("accepted_steps".into(), "1".into(), stats.accepted.into()),
            ("rejected_steps".into(), "1".into(), stats.rejected.into()),
            ("evaluations".into(), "1".into(), stats.evaluations.into()),
        ],
    );
    Ok(Output { tables: vec![summary, timeline], warnings: vec![] })
}

fn pulse_from(sc: &Scenario, g_c: f64) -> Result<QuadraticPulse, CliError> {
    let d0 = freq(sc, "pulses", "delta0").ok_or_else(|| precondition("[pulses] needs delta0_<unit>"))?;
    let d1 = freq(sc, "pulses", "delta1").ok_or_else(|| precondition("[pulses] needs delta1_<unit>"))?;
    let t = time(sc, "pulses", "duration").ok_or_else(|| precondition("[pulses] needs duration_<unit>"))?;
    Ok(QuadraticPulse::new(d0, d1, t, g_c)?)
}

fn sweep_from(sc: &Scenario, g_m: f64) -> Result<SweepSpec, CliError> {
    let mut s = SweepSpec::default_for(g_m, SweepTarget::Both)?;
    if let Some(d) = freq(sc, "pulses", "sweep_range") {
        s.delta_start = d;
        s.delta_end = -d;
    }
    if let Some(t) = time(sc, "pulses", "sweep_duration") {
        s.duration = t;
    }
    let steep = sc.float("pulses", "sweep_steepness").unwrap_or(1.0);
    s.shape = match sc.text("pulses", "sweep_shape").unwrap_or("tanh") {
        "tanh" => SweepShape::Tanh { steepness: steep },
        "linear" => SweepShape::Linear,
        other => return Err(precondition(format!("unknown sweep_shape `{other}` (tanh or linear)"))),
    };
    s.validate()?;
    Ok(s)
}

struct Prepared {
    base: SystemModel,
    seq: GateSequence,
    opts: EvolveOptions,
    /// Calibration rows when the pulse was calibrated.
    calibration: Option<ResultTable>,
}

fn prepare_gate(sc: &Scenario) -> Result<Prepared, CliError> {
    let base = base_model(sc)?;
    let opts = options(sc)?;
    let g_m = freq(sc, "ensemble.1", "g_m").expect("checked");
    let sweep = sweep_from(sc, g_m)?;
    if sc.bool("pulses", "calibrate").unwrap_or(true) {
        let delta0 = freq(sc, "pulses", "delta0").expect("checked");
        let branch = sc.int("pulses", "branch").unwrap_or(-3);
        let cal = calibrate_gate(&base, delta0, Some(sweep), branch, &opts)?;
        let table = calibration_table(&cal.pulse, Some(&cal));
        Ok(Prepared { base, seq: cal.sequence, opts, calibration: Some(table) })
    } else {
        let pulse = pulse_from(sc, base.g_c)?;
        Ok(Prepared { base, seq: GateSequence { pulse, sweep }, opts, calibration: None })
    }
}

fn calibration_table(p: &hybridq::protocols::PulseCalibration, gate: Option<&hybridq::protocols::GateCalibration>) -> ResultTable {
    let mut e: Vec<(String, String, Cell)> = vec![
        ("delta0".into(), "2pi_MHz".into(), mhz(p.pulse.delta0).into()),
        ("delta1".into(), "2pi_MHz".into(), mhz(p.pulse.delta1).into()),
        ("duration".into(), "us".into(), p.pulse.duration.into()),
        ("delta1_over_g_c".into(), "1".into(), (p.pulse.delta1 / p.pulse.g_c).into()),
        ("duration_times_g_c".into(), "1".into(), (p.pulse.duration * p.pulse.g_c).into()),
        ("branch_1".into(), "1".into(), p.branch_1.into()),
        ("branch_2".into(), "1".into(), p.branch_2.into()),
        ("phi_1".into(), "rad".into(), p.phi_1.into()),
        ("phi_2".into(), "rad".into(), p.phi_2.into()),
        ("residual_1".into(), "rad".into(), p.residuals[0].into()),
        ("residual_2".into(), "rad".into(), p.residuals[1].into()),
    ];
    if let Some(g) = gate {
        e.extend([
            ("sweep_duration".into(), "us".into(), g.sequence.sweep.duration.into()),
            ("sweep_phase_1".into(), "rad".into(), g.sweep_phases[0].into()),
            ("sweep_phase_2".into(), "rad".into(), g.sweep_phases[1].into()),
            ("realized_phase_1".into(), "rad".into(), g.realized_phases[0].into()),
            ("realized_phase_2".into(), "rad".into(), g.realized_phases[1].into()),
            ("iterations".into(), "1".into(), g.iterations.into()),
            ("refinements".into(), "1".into(), g.refinements.into()),
        ]);
    }
    ResultTable::single("calibration", e)
}

fn gate_tables(r: &GateReport) -> Vec<ResultTable> {
    let p = &r.sequence.pulse;
    let summary = ResultTable::single(
        "summary",
        vec![
            ("delta0".into(), "2pi_MHz".into(), mhz(p.delta0).into()),
            ("delta1".into(), "2pi_MHz".into(), mhz(p.delta1).into()),
            ("duration".into(), "us".into(), p.duration.into()),
            ("sweep_duration".into(), "us".into(), r.sequence.sweep.duration.into()),
            ("phi_1".into(), "rad".into(), r.phases.phi_1.into()),
            ("phi_2".into(), "rad".into(), r.phases.phi_2.into()),
            ("phi_1_mod_2pi".into(), "rad".into(), wrap_phase(r.phases.phi_1).into()),
            ("phi_2_mod_2pi".into(), "rad".into(), wrap_phase(r.phases.phi_2).into()),
            ("symmetric_phase_1".into(), "rad".into(), r.phases.symmetric_1.into()),
            ("symmetric_phase_2".into(), "rad".into(), r.phases.symmetric_2.into()),
            ("antisymmetric_phase_1".into(), "rad".into(), r.phases.antisymmetric_1.into()),
            ("F_G".into(), "1".into(), r.average_fidelity.into()),
            ("F_basis".into(), "1".into(), r.basis_fidelity.into()),
            ("double_occupation".into(), "1".into(), r.double_occupation.into()),
            ("trace_deviation".into(), "1".into(), r.trace_deviation.into()),
            ("unitarity_deviation".into(), "1".into(), r.unitarity_deviation.map_or(Cell::Empty, Cell::from)),
            ("max_top_cavity_population".into(), "1".into(), r.max_top_cavity_population.into()),
            ("max_norm_drift".into(), "1".into(), r.conservation.max_norm_drift.into()),
            ("max_excitation_drift".into(), "1".into(), r.conservation.max_excitation_drift.into()),
            ("max_trace_drift".into(), "1".into(), r.conservation.max_trace_drift.into()),
            ("predicted_leakage".into(), "1".into(), r.predicted_leakage.into()),
        ],
    );
    let mut basis = ResultTable::new("basis", &[("input", "label"), ("fidelity", "1"), ("leakage", "1")]);
    for o in &r.outputs {
        basis.push(vec![o.label.into(), o.fidelity.into(), o.leakage.into()]);
    }
    let mut phases = ResultTable::new("phases", &[("t", "us"), ("phi_1", "rad"), ("phi_2", "rad")]);
    for &(t, a, b) in &r.phase_trajectory {
        phases.push(vec![t.into(), a.into(), b.into()]);
    }
    vec![summary, basis, phases]
}

fn gate(sc: &Scenario) -> Result<Output, CliError> {
    let prep = prepare_gate(sc)?;
    let r = two_qubit_gate(&prep.base, &prep.seq, &prep.opts)?;
    let calibrated = prep.calibration.is_some();
    let mut tables = Vec::new();
    tables.extend(prep.calibration);
    tables.extend(gate_tables(&r));
    let mut warnings = r.warnings;
    // a pulse given alongside calibration is run as-is too, for comparison
    let given = sc.float("pulses", "delta1").is_some() && sc.float("pulses", "duration").is_some();
    if calibrated && given {
        let seq = GateSequence { pulse: pulse_from(sc, prep.base.g_c)?, sweep: prep.seq.sweep };
        let raw = two_qubit_gate(&prep.base, &seq, &prep.opts)?;
        tables.push(ResultTable::single(
            "raw_pulse",
            vec![
                ("delta1".into(), "2pi_MHz".into(), mhz(seq.pulse.delta1).into()),
                ("duration".into(), "us".into(), seq.pulse.duration.into()),
                ("phi_1_mod_2pi".into(), "rad".into(), wrap_phase(raw.phases.phi_1).into()),
                ("phi_2_mod_2pi".into(), "rad".into(), wrap_phase(raw.phases.phi_2).into()),
                ("F_G".into(), "1".into(), raw.average_fidelity.into()),
                ("F_basis".into(), "1".into(), raw.basis_fidelity.into()),
                ("double_occupation".into(), "1".into(), raw.double_occupation.into()),
            ],
        ));
        warnings.extend(raw.warnings);
    }
    Ok(Output { tables, warnings })
}

fn calibrate(sc: &Scenario) -> Result<Output, CliError> {
    let both = freq(sc, "ensemble.1", "g_m").is_some() && freq(sc, "ensemble.2", "g_m").is_some();
    if both {
        let prep = prepare_gate(sc)?;
        let table = prep.calibration.ok_or_else(|| precondition("calibrate = false leaves nothing to calibrate"))?;
        return Ok(Output { tables: vec![table], warnings: vec![] });
    }
    let g_c = freq(sc, "cpb", "g_c").expect("checked");
    let delta0 = freq(sc, "pulses", "delta0").expect("checked");
    let branch = sc.int("pulses", "branch").unwrap_or(-3);
    let cal = calibrate_pulse_to(delta0, g_c, PI / 2.0, 0.0, &BranchSearch::around(branch, 3))?;
    Ok(Output { tables: vec![calibration_table(&cal, None)], warnings: vec![] })
}

fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n).map(|k| (lo.ln() + (hi / lo).ln() * k as f64 / (n - 1) as f64).exp()).collect()
}

fn sweep(sc: &Scenario) -> Result<Output, CliError> {
    let lo = sc.float("simulation", "dephasing_min").expect("checked");
    let hi = sc.float("simulation", "dephasing_max").expect("checked");
    let n = level(sc, "simulation", "dephasing_points", 0)?;
    if !(lo > 0.0 && hi >= lo && n >= 1) {
        return Err(precondition("need 0 < dephasing_min ≤ dephasing_max and dephasing_points ≥ 1"));
    }
    let prep = prepare_gate(sc)?;
    let g_c = prep.base.g_c;
    let ratios = log_grid(lo, hi, n);
    let rates: Vec<f64> = ratios.iter().map(|r| r * g_c).collect();
    let (points, fit) = dephasing_scan(&prep.base, &prep.seq, &rates, &prep.opts)?;
    let mut t = ResultTable::new(
        "sweep",
        &[("inverse_T2_over_g_c", "1"), ("gamma_phi", "2pi_MHz"), ("T2", "us"), ("infidelity", "1"), ("F_G", "1"), ("trace_deviation", "1"), ("trace_drift", "1")],
    );
    for (r, p) in ratios.iter().zip(&points) {
        t.push(vec![
            (*r).into(),
            mhz(p.gamma_phi).into(),
            (1.0 / p.gamma_phi).into(),
            p.infidelity.into(),
            (1.0 - p.infidelity).into(),
            p.trace_deviation.into(),
            p.trace_drift.into(),
        ]);
    }
    let mut tables = Vec::new();
    tables.extend(prep.calibration);
    tables.push(t);
    if let Some(f) = fit {
        // slope against 1/(g_c T2)
        tables.push(ResultTable::single(
            "fit",
            vec![
                ("slope".into(), "1".into(), (f.slope * g_c).into()),
                ("intercept".into(), "1".into(), f.intercept.into()),
                ("correlation".into(), "1".into(), f.correlation.into()),
            ],
        ));
    }
    Ok(Output { tables, warnings: vec![] })
}

fn molecule_from(sc: &Scenario) -> Result<MoleculeSpec, CliError> {
    let name = sc.text("molecule", "name").unwrap_or("molecule").to_string();
    let need = |stem: &str| sc.float("molecule", stem).ok_or_else(|| precondition(format!("[molecule] needs `{stem}`")));
    Ok(MoleculeSpec {
        name,
        dipole_debye: need("dipole")? / estimate::constants::DEBYE,
        rotational_2pi_ghz: need("rotational")? / TWO_PI / 1e9,
        spin_rotation_2pi_mhz: sc.float("molecule", "spin_rotation").unwrap_or(0.0) / TWO_PI / 1e6,
        hyperfine_2pi_mhz: sc.float("molecule", "hyperfine").unwrap_or(0.0) / TWO_PI / 1e6,
        mass_amu: need("mass")? / estimate::constants::AMU,
        nuclear_spin: sc.float("molecule", "nuclear_spin").unwrap_or(0.0),
    })
}

/// Built-in fixtures by name, else a fixture file relative to the scenario.
pub fn load_molecule(sc: &Scenario, dir: Option<&Path>) -> Result<MoleculeSpec, CliError> {
    let Some(name) = sc.text("estimate", "molecule") else {
        return molecule_from(sc);
    };
    let text = match name.to_ascii_lowercase().as_str() {
        "caf" => CAF.to_string(),
        "cacl" => CACL.to_string(),
        _ => {
            let path = dir.map_or_else(|| Path::new(name).to_path_buf(), |d| d.join(name));
            std::fs::read_to_string(&path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?
        }
    };
    let fixture = parse_scenario(&text).map_err(CliError::Parse)?;
    molecule_from(&fixture)
}

fn estimate(sc: &Scenario, dir: Option<&Path>) -> Result<Output, CliError> {
    let mol = load_molecule(sc, dir)?;
    mol.validate()?;
    let cavity = CavitySpec {
        frequency_2pi_ghz: sc.float("cavity", "frequency").expect("checked") / TWO_PI / 1e9,
        electrode_distance_um: sc.float("cavity", "electrode_distance").expect("checked") * 1e6,
        length_cm: sc.float("cavity", "length").expect("checked") * 1e2,
        kappa_2pi_mhz: sc.float("cavity", "kappa").expect("checked") / TWO_PI / 1e6,
    };
    let density = sc.float("estimate", "density").expect("checked");
    let temperature = sc.float("estimate", "temperature").expect("checked");
    let mut rep = EstimateReport::default();
    rep.input("dipole", mol.dipole_debye, "Debye");
    rep.input("rotational", mol.rotational_2pi_ghz, "2pi_GHz");
    rep.input("mass", mol.mass_amu, "amu");
    rep.input("cavity_frequency", cavity.frequency_2pi_ghz, "2pi_GHz");
    rep.input("electrode_distance", cavity.electrode_distance_um, "um");
    rep.input("cavity_length", cavity.length_cm, "cm");
    rep.input("kappa", cavity.kappa_2pi_mhz, "2pi_MHz");
    rep.input("density", density * 1e-6, "per_cm3");
    rep.input("temperature", temperature, "K");

    let e_c = estimate::field_per_photon(&cavity)?;
    rep.result("E_c", e_c, "V/m", "sqrt(hbar w_c / (2 pi eps0 d^2 L))");
    let g = estimate::vacuum_rabi(mol.dipole(), &cavity)?;
    rep.rate("g", g, Scale::KHz, "mu E_c / hbar");
    let n = match sc.float("estimate", "molecule_count") {
        Some(n) => n,
        None => estimate::molecule_count(density, cavity.electrode_distance(), cavity.length())?,
    };
    rep.result("N", n, "1", "n d^2 lambda_c / 10");
    let ratio = sc.float("estimate", "raman_ratio").unwrap_or(1.0);
    let raman = estimate::raman_couplings(g, ratio, 0.0, 0.0, 1.0, n)?;
    if raman.outside_dispersive_limit {
        rep.flags.push(format!("raman_ratio = {ratio}: Raman detuning not large against the drive"));
    }
    rep.rate("g_eff", raman.g_eff, Scale::KHz, "g Omega / (2 Delta)");
    rep.rate("g_m", raman.g_m, Scale::MHz, "sqrt(N) g_eff");

    let (c6, r_bohr) = estimate::c6_and_range(&mol)?;
    let r_star = r_bohr * BOHR;
    rep.result("C6", c6, "J m^6", "(mu^2 / 4 pi eps0)^2 / 6B");
    rep.result("R_star", r_bohr, "bohr", "(m C6 / hbar^2)^(1/4)");
    let t_star = estimate::swave_threshold(mol.mass(), r_star);
    rep.result("T_star", t_star, "K", "p-wave barrier / k_B");
    rep.result("v_rel", estimate::mean_relative_speed(temperature, mol.mass()), "m/s", "sqrt(16 k_B T / pi m)");

    let a = sc.float("estimate", "scattering_length").unwrap_or(r_star);
    let sw = estimate::collision_rate_swave(a, density, temperature, mol.mass(), Some(r_star))?;
    if sw.above_threshold {
        rep.flags.push(format!("T = {temperature} K exceeds T_* = {t_star:.3e} K: s-wave rate is outside its validity range"));
    }
    rep.rate("gamma_col", sw.rate, Scale::Hz, "8 pi a^2 n v_rel");
    let un = estimate::collision_rate_unitarity(density, temperature, mol.mass(), r_star)?;
    rep.rate("gamma_col_unitarity", un.rate, Scale::Hz, "(4 pi / k^2) sum_l (2l+1) n v_rel");
    rep.result("l_max", un.l_max as f64, "1", "largest l with barrier below k_B T");
    let a00 = sc.float("estimate", "a00").unwrap_or(a);
    let a01 = sc.float("estimate", "a01").unwrap_or(0.0);
    let deph = estimate::dephasing_rate_swave(a00, a01, density, temperature, mol.mass(), Some(r_star))?;
    rep.rate("gamma_10", deph.rate, Scale::Hz, "8 pi (a00 - a01)^2 n v_rel");
    if let Some(samples) = sc.int("estimate", "mc_samples").filter(|&s| s > 0) {
        let seed = sc.int("system", "seed").expect("checked") as u64;
        let e00 = move |_: f64, _: f64| Complex64::new(a00, 0.0);
        let e01 = move |_: f64, _: f64| Complex64::new(a01, 0.0);
        let zero = |_: f64, _: f64| Complex64::new(0.0, 0.0);
        let amp = Amplitudes { elastic_00: &e00, elastic_01: &e01, inelastic_00: &zero, inelastic_01: &zero, inelastic_release: 0.0 };
        let mc = estimate::gamma10_montecarlo(&amp, density, temperature, mol.mass(), samples as usize, seed)?;
        rep.rate("gamma_10_mc", mc.rate, Scale::Hz, "thermal Monte Carlo over the collision shell");
        rep.rate("gamma_10_mc_stderr", mc.std_error, Scale::Hz, "standard error of the mean");
    }

    let ens = EnsembleSpec {
        density_cm3: density * 1e-6,
        temperature_k: temperature,
        molecule_count: n,
        trap_2pi_khz: sc.float("estimate", "trap_frequency").expect("checked") / TWO_PI / 1e3,
        trap_mismatch: sc.float("estimate", "trap_mismatch").expect("checked"),
        alpha: sc.float("estimate", "alpha").expect("checked"),
    };
    // The budget is written in the bare collective coupling g√N.
    let g_sqrt_n = sc.float("estimate", "collective_coupling").unwrap_or(g * n.sqrt());
    rep.rate("g_sqrt_N", g_sqrt_n, Scale::MHz, "g sqrt(N), or the scenario override");
    let b = estimate::gate_error_budget(&ens, g_sqrt_n, cavity.kappa(), cavity.electrode_distance(), mol.mass())?;
    rep.rate("delta_star", b.delta_star, Scale::MHz, "cbrt(3 g^2 N (k_B T dw^2)^2 / (kappa w_t^4 hbar^2))");
    rep.result("epsilon_motional", b.motional, "1", "alpha^2 k_B T / (m w_t^2 d^2)");
    rep.result("epsilon_inhomogeneous", b.inhomogeneous, "1", "(k_B T dw^2 kappa / (hbar g^2 N w_t^2))^(2/3)");
    rep.result("epsilon", b.epsilon, "1", "sum of both terms");

    let to_table = |name: &str, entries: &[estimate::Entry]| {
        ResultTable::single(name, entries.iter().map(|e| (e.name.clone(), e.unit.to_string(), Cell::from(e.value))).collect())
    };
    let mut formulas = ResultTable::new("formulas", &[("quantity", "label"), ("unit", "label"), ("formula", "label")]);
    for e in &rep.results {
        formulas.push(vec![e.name.as_str().into(), e.unit.into(), e.formula.into()]);
    }
    let mut levels = ResultTable::new("levels", &[("N", "1"), ("twice_J", "1"), ("twice_F", "1"), ("energy", "2pi_GHz")]);
    for lv in estimate::rotational_spectrum(&mol, 2)? {
        levels.push(vec![
            (lv.n as i64).into(),
            (lv.twice_j as i64).into(),
            lv.twice_f.map_or(Cell::Empty, |f| (f as i64).into()),
            (lv.energy / TWO_PI / 1e9).into(),
        ]);
    }
    Ok(Output {
        tables: vec![to_table("inputs", &rep.inputs), to_table("estimate", &rep.results), formulas, levels],
        warnings: rep.flags,
    })
}
