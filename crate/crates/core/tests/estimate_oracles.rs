use std::f64::consts::PI;

use hybridq::estimate::constants::*;
use hybridq::estimate::*;
use hybridq::Error;
use num_complex::Complex64;
use proptest::prelude::*;

const TWO_PI: f64 = 2.0 * PI;

fn cavity(ghz: f64, d_um: f64) -> CavitySpec {
    CavitySpec { frequency_2pi_ghz: ghz, electrode_distance_um: d_um, length_cm: 1.5, kappa_2pi_mhz: 0.01 }
}

fn cacl() -> MoleculeSpec {
    MoleculeSpec {
        name: "CaCl".into(),
        dipole_debye: 4.265,
        rotational_2pi_ghz: 4.5676,
        spin_rotation_2pi_mhz: 41.7,
        hyperfine_2pi_mhz: 19.0,
        mass_amu: 74.93,
        nuclear_spin: 1.5,
    }
}

fn caf() -> MoleculeSpec {
    MoleculeSpec {
        name: "CaF".into(),
        dipole_debye: 3.07,
        rotational_2pi_ghz: 10.267,
        spin_rotation_2pi_mhz: 39.66,
        hyperfine_2pi_mhz: 109.2,
        mass_amu: 59.08,
        nuclear_spin: 0.5,
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

#[test]
fn field_per_photon_against_si_evaluation() {
    // ħω = 1.054571817e-34 · 2π·2e10 J; 2πε0 d²L with d = 1e-5 m, L = 0.015 m
    let hw = 1.054571817e-34 * 2.0 * PI * 2e10;
    let denom = 2.0 * PI * 8.854187817e-12 * 1e-10 * 0.015;
    let oracle = (hw / denom).sqrt();
    let e = field_per_photon(&cavity(20.0, 10.0)).unwrap();
    assert!(rel(e, oracle) < 1e-9, "{e} vs {oracle}");
    assert!((e - 0.4).abs() < 0.01);
    let half = field_per_photon(&cavity(20.0, 5.0)).unwrap();
    assert!(rel(half, 2.0 * e) < 1e-14);
    let quad = field_per_photon(&cavity(80.0, 10.0)).unwrap();
    assert!(rel(quad, 2.0 * e) < 1e-14);
}

#[test]
fn vacuum_rabi_in_quoted_window() {
    let c = cavity(20.0, 10.0);
    let g = vacuum_rabi(5.0 * DEBYE, &c).unwrap() / TWO_PI;
    assert!((5e3..=15e3).contains(&g), "g/2π = {g}");
    let g2 = vacuum_rabi(10.0 * DEBYE, &c).unwrap() / TWO_PI;
    assert!(rel(g2, 2.0 * g) < 1e-14);
    assert_eq!(vacuum_rabi(0.0, &c).unwrap(), 0.0);
}

#[test]
fn raman_chain() {
    let g = TWO_PI * 10e3;
    let r = raman_couplings(g, 1.0, 1.0, 1.0, 1.0, 1e6).unwrap();
    assert!(r.outside_dispersive_limit);
    assert_eq!(r.g_eff, g / 2.0);
    assert!(rel(r.g_m / TWO_PI, 5e6) < 1e-12);
    let r4 = raman_couplings(g, 1.0, 1.0, 1.0, 1.0, 4e6).unwrap();
    assert!(rel(r4.g_m, 2.0 * r.g_m) < 1e-14);
    let far = raman_couplings(g, 1.0, 2.0, 3.0, 100.0, 1e6).unwrap();
    assert!(!far.outside_dispersive_limit);
    assert_eq!(far.omega_eff, 6.0 / 200.0);
    assert!(matches!(raman_couplings(g, 1.0, 1.0, 1.0, 0.0, 1e6), Err(Error::InvalidParameter { .. })));
}

#[test]
fn molecule_count_unit_conversion() {
    // 1e12 cm⁻³ · (1e-3 cm)² · 1.5 cm / 10, all in CGS
    let oracle = 1e12 * 1e-6 * 1.5 / 10.0;
    let n = molecule_count(1e18, 1e-5, 0.015).unwrap();
    assert!(rel(n, oracle) < 1e-12);
    assert!((1e4..=1e6).contains(&n));
    assert_eq!(molecule_count(0.0, 1e-5, 0.015).unwrap(), 0.0);
    assert!(rel(molecule_count(1e18, 2e-5, 0.015).unwrap(), 4.0 * n) < 1e-14);
}

#[test]
fn rotational_spectrum_spacings() {
    let mut m = caf();
    m.rotational_2pi_ghz = 10.0;
    let levels = rotational_spectrum(&m, 2).unwrap();
    let e = |n: u32, twice_j: u32, twice_f: Option<u32>| {
        levels.iter().find(|l| l.n == n && l.twice_j == twice_j && l.twice_f == twice_f).unwrap().energy
    };
    // centroid of the N = 1 doublet is the rigid-rotor value
    let n1 = (2.0 * e(1, 1, None) + 4.0 * e(1, 3, None)) / 6.0;
    let n0 = (e(0, 1, Some(0)) + 3.0 * e(0, 1, Some(2))) / 4.0;
    assert!(rel(n1 - n0, TWO_PI * 20e9) < 1e-12);
    assert!(rel(e(1, 3, None) - e(1, 1, None), 1.5 * m.spin_rotation()) < 1e-9);
    assert!(rel(e(0, 1, Some(2)) - e(0, 1, Some(0)), m.hyperfine()) < 1e-9);
    // I = 3/2: F = 2 and F = 1, split by 2b
    let cl = rotational_spectrum(&cacl(), 1).unwrap();
    let f: Vec<_> = cl.iter().filter(|l| l.n == 0).collect();
    assert_eq!(f.len(), 2);
    assert!(rel(f[1].energy - f[0].energy, 2.0 * cacl().hyperfine()) < 1e-9);
    assert!(rotational_spectrum(&m, 0).is_err());
}

#[test]
fn van_der_waals_range() {
    let (c6, r) = c6_and_range(&cacl()).unwrap();
    assert!(rel(r, 780.0) < 0.2, "R* = {r}");
    let mut m = cacl();
    m.dipole_debye *= 2.0;
    let (c6b, rb) = c6_and_range(&m).unwrap();
    assert!(rel(c6b, 16.0 * c6) < 1e-12 && rel(rb, 2.0 * r) < 1e-12);
    let mut m = cacl();
    m.rotational_2pi_ghz *= 4.0;
    assert!(rel(c6_and_range(&m).unwrap().0, c6 / 4.0) < 1e-12);
}

#[test]
fn swave_rates() {
    let a = 780.0 * BOHR;
    let m = 75.0 * AMU;
    let r = collision_rate_swave(a, 1e18, 1e-6, m, None).unwrap();
    assert!(rel(r.rate / TWO_PI, 150.0) < 0.5, "{}", r.rate / TWO_PI);
    assert!(rel(collision_rate_swave(2.0 * a, 1e18, 1e-6, m, None).unwrap().rate, 4.0 * r.rate) < 1e-14);
    assert!(rel(collision_rate_swave(a, 2e18, 1e-6, m, None).unwrap().rate, 2.0 * r.rate) < 1e-14);
    // threshold flag
    let rs = 780.0 * BOHR;
    assert!(!collision_rate_swave(a, 1e18, 1e-6, m, Some(rs)).unwrap().above_threshold);
    assert!(collision_rate_swave(a, 1e18, 1e-3, m, Some(rs)).unwrap().above_threshold);

    assert_eq!(dephasing_rate_swave(a, a, 1e18, 1e-6, m, None).unwrap().rate, 0.0);
    let d = dephasing_rate_swave(3.0 * a, 2.0 * a, 1e18, 1e-6, m, None).unwrap();
    assert!(rel(d.rate, r.rate) < 1e-12);
    let d = dephasing_rate_swave(1.3 * a, 0.6 * a, 1e18, 1e-6, m, None).unwrap();
    assert!(d.rate <= r.rate);
}

#[test]
fn unitarity_rate() {
    let mol = cacl();
    let (_, r_bohr) = c6_and_range(&mol).unwrap();
    let rs = r_bohr * BOHR;
    let u = collision_rate_unitarity(1e18, 1e-3, mol.mass(), rs).unwrap();
    let hz = u.rate / TWO_PI;
    assert!(hz > 350.0 && hz < 1400.0, "{hz} Hz, l_max {}", u.l_max);
    assert!(rel(collision_rate_unitarity(3e18, 1e-3, mol.mass(), rs).unwrap().rate, 3.0 * u.rate) < 1e-14);

    // below the p-wave barrier only the s-wave unitarity term remains
    let t = 0.5 * swave_threshold(mol.mass(), rs);
    let low = collision_rate_unitarity(1e18, t, mol.mass(), rs).unwrap();
    assert_eq!(low.l_max, 0);
    assert!(low.below_threshold);
    let v = mean_relative_speed(t, mol.mass());
    let k = 0.5 * mol.mass() * v / HBAR;
    assert!(rel(low.rate, 4.0 * PI / (k * k) * 1e18 * v) < 1e-12);
    // the rate is continuous in T as l_max steps
    let t1 = swave_threshold(mol.mass(), rs);
    let below = collision_rate_unitarity(1e18, t1 * (1.0 - 1e-9), mol.mass(), rs).unwrap();
    assert_eq!(below.l_max, 0);
    let above = collision_rate_unitarity(1e18, t1 * (1.0 + 1e-9), mol.mass(), rs).unwrap();
    assert_eq!(above.l_max, 1);
}

#[test]
fn error_budget_at_trap_requirement() {
    let ens = EnsembleSpec {
        density_cm3: 1e12,
        temperature_k: 1e-3,
        molecule_count: 1e6,
        trap_2pi_khz: 50.0,
        trap_mismatch: 0.1,
        alpha: 1.0,
    };
    let b = gate_error_budget(&ens, TWO_PI * 10e6, TWO_PI * 10e3, 1e-5, caf().mass()).unwrap();
    assert!(b.epsilon < 0.02, "{b:?}");
    assert_eq!(b.epsilon, b.motional + b.inhomogeneous);
    let zero = EnsembleSpec { alpha: 0.0, trap_mismatch: 0.0, ..ens };
    let z = gate_error_budget(&zero, TWO_PI * 10e6, TWO_PI * 10e3, 1e-5, caf().mass()).unwrap();
    assert_eq!(z.epsilon, 0.0);
    let k8 = gate_error_budget(&ens, TWO_PI * 10e6, 8.0 * TWO_PI * 10e3, 1e-5, caf().mass()).unwrap();
    assert!(rel(k8.inhomogeneous, 4.0 * b.inhomogeneous) < 1e-12);
    assert_eq!(k8.motional, b.motional);
}

#[test]
fn gaussian_units_agree() {
    const HBAR_CGS: f64 = 1.054571817e-27;
    const KB_CGS: f64 = 1.380649e-16;
    const AMU_G: f64 = 1.66053906660e-24;

    // field per photon: √(2ħω/d²L) statV/cm, 1 statV/cm = 29979.2458 V/m
    let w = TWO_PI * 2e10;
    let e_cgs = (2.0 * HBAR_CGS * w / (1e-3 * 1e-3 * 1.5)).sqrt();
    let e = field_per_photon(&cavity(20.0, 10.0)).unwrap();
    assert!(rel(e_cgs * 29979.2458, e) < 1e-10);

    // C6 = μ⁴/6B in erg·cm⁶ with μ in statC·cm; 1 erg·cm⁶ = 1e-19 J·m⁶
    let mol = cacl();
    let mu = mol.dipole_debye * 1e-18;
    let c6_cgs = mu.powi(4) / (6.0 * HBAR_CGS * mol.rotational());
    let (c6, r_bohr) = c6_and_range(&mol).unwrap();
    assert!(rel(c6_cgs * 1e-19, c6) < 1e-10);
    let r_cm = (mol.mass_amu * AMU_G * c6_cgs / (HBAR_CGS * HBAR_CGS)).powf(0.25);
    assert!(rel(r_cm / 5.29177210903e-9, r_bohr) < 1e-10);

    // s-wave rate: 8πa²nv̄ with cm, g, cm⁻³
    let a_cm = 780.0 * 5.29177210903e-9;
    let v_cgs = (16.0 * KB_CGS * 1e-6 / (PI * 75.0 * AMU_G)).sqrt();
    let rate_cgs = 8.0 * PI * a_cm * a_cm * 1e12 * v_cgs;
    let r = collision_rate_swave(780.0 * BOHR, 1e18, 1e-6, 75.0 * AMU, None).unwrap();
    assert!(rel(rate_cgs, r.rate) < 1e-10);
}

fn constant(a: f64) -> impl Fn(f64, f64) -> Complex64 + Sync {
    move |_, _| Complex64::new(a, 0.0)
}

#[test]
fn montecarlo_constant_amplitude_oracle() {
    let da = 100.0 * BOHR;
    let (e00, e01, zero) = (constant(da), constant(0.0), constant(0.0));
    let amp = Amplitudes { elastic_00: &e00, elastic_01: &e01, inelastic_00: &zero, inelastic_01: &zero, inelastic_release: 0.0 };
    let m = 75.0 * AMU;
    let mc = gamma10_montecarlo(&amp, 1e18, 1e-6, m, 100_000, 7).unwrap();
    let exact = dephasing_rate_swave(da, 0.0, 1e18, 1e-6, m, None).unwrap().rate;
    assert!((mc.rate - exact).abs() < 3.0 * mc.std_error, "{} ± {} vs {exact}", mc.rate, mc.std_error);

    let again = gamma10_montecarlo(&amp, 1e18, 1e-6, m, 100_000, 7).unwrap();
    assert_eq!(mc, again);
    let dbl = gamma10_montecarlo(&amp, 2e18, 1e-6, m, 100_000, 7).unwrap();
    assert_eq!(dbl.rate, 2.0 * mc.rate);

    let none = Amplitudes { elastic_00: &zero, elastic_01: &zero, inelastic_00: &zero, inelastic_01: &zero, inelastic_release: 1e-30 };
    assert_eq!(gamma10_montecarlo(&none, 1e18, 1e-6, m, 20_000, 1).unwrap().rate, 0.0);
}

#[test]
fn montecarlo_rejects_bad_input() {
    let m = 75.0 * AMU;
    let zero = constant(0.0);
    let nan = |k: f64, _: f64| Complex64::new(if k > 0.0 { f64::NAN } else { 0.0 }, 0.0);
    let amp = Amplitudes { elastic_00: &nan, elastic_01: &zero, inelastic_00: &zero, inelastic_01: &zero, inelastic_release: 0.0 };
    match gamma10_montecarlo(&amp, 1e18, 1e-6, m, 20_000, 3) {
        Err(Error::Sampling(msg)) => assert!(msg.contains("cosθ")),
        other => panic!("{other:?}"),
    }
    let ok = Amplitudes { elastic_00: &zero, elastic_01: &zero, inelastic_00: &zero, inelastic_01: &zero, inelastic_release: 0.0 };
    assert!(gamma10_montecarlo(&ok, 1e18, 1e-6, m, 999, 3).is_err());
}

#[test]
fn montecarlo_inelastic_channel_uses_outgoing_momentum() {
    // with a large release every sample has k' ≈ √(mΔE)/ħ, independent of k
    let m = 75.0 * AMU;
    let release = 1e-26;
    let a = 10.0 * BOHR;
    let (f, zero) = (constant(a), constant(0.0));
    let amp = Amplitudes { elastic_00: &zero, elastic_01: &zero, inelastic_00: &f, inelastic_01: &zero, inelastic_release: release };
    let mc = gamma10_montecarlo(&amp, 1e18, 1e-9, m, 20_000, 5).unwrap();
    let k_out = (m * release).sqrt() / HBAR;
    let exact = 4.0 * PI * HBAR * 1e18 / m * k_out * 4.0 * a * a;
    assert!(rel(mc.rate, exact) < 1e-3, "{} vs {exact}", mc.rate);
}

#[test]
fn montecarlo_error_scaling() {
    let da = 100.0 * BOHR;
    let (e00, zero) = (constant(da), constant(0.0));
    let amp = Amplitudes { elastic_00: &e00, elastic_01: &zero, inelastic_00: &zero, inelastic_01: &zero, inelastic_release: 0.0 };
    let counts = [10_000usize, 100_000, 1_000_000, 10_000_000];
    let xs: Vec<f64> = counts.iter().map(|&n| (n as f64).ln()).collect();
    let ys: Vec<f64> = counts
        .iter()
        .map(|&n| gamma10_montecarlo(&amp, 1e18, 1e-6, 75.0 * AMU, n, 11).unwrap().std_error.ln())
        .collect();
    let fit = hybridq::fit::linear_fit(&xs, &ys).unwrap();
    assert!((fit.slope + 0.5).abs() < 0.1, "slope {}", fit.slope);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn power_laws(d in 1.0f64..100.0, ghz in 1.0f64..50.0, mu in 0.5f64..10.0, b in 1.0f64..30.0, k in 1.0f64..5.0) {
        let c = cavity(ghz, d);
        let e = field_per_photon(&c).unwrap();
        prop_assert!(rel(field_per_photon(&cavity(ghz, d * k)).unwrap(), e / k) < 1e-12);
        prop_assert!(rel(field_per_photon(&cavity(ghz * k, d)).unwrap(), e * k.sqrt()) < 1e-12);

        let mol = MoleculeSpec { dipole_debye: mu, rotational_2pi_ghz: b, ..caf() };
        let (c6, _) = c6_and_range(&mol).unwrap();
        let scaled = MoleculeSpec { dipole_debye: mu * k, rotational_2pi_ghz: b * k, ..caf() };
        prop_assert!(rel(c6_and_range(&scaled).unwrap().0, c6 * k.powi(3)) < 1e-12);

        let g = raman_couplings(1.0, 1.0, 1.0, 1.0, 10.0, 1e4).unwrap().g_m;
        prop_assert!(rel(raman_couplings(1.0, 1.0, 1.0, 1.0, 10.0, 1e4 * k).unwrap().g_m, g * k.sqrt()) < 1e-12);
    }

    #[test]
    fn swave_scales_with_length_squared(a in 1.0f64..2000.0, k in 0.1f64..10.0) {
        let r = collision_rate_swave(a * BOHR, 1e18, 1e-6, 75.0 * AMU, None).unwrap().rate;
        let s = collision_rate_swave(k * a * BOHR, 1e18, 1e-6, 75.0 * AMU, None).unwrap().rate;
        prop_assert!(rel(s, k * k * r) < 1e-12);
    }

    #[test]
    fn budget_kappa_two_thirds(k in 0.1f64..100.0) {
        let ens = EnsembleSpec { density_cm3: 1e12, temperature_k: 1e-3, molecule_count: 1e6, trap_2pi_khz: 50.0, trap_mismatch: 0.1, alpha: 0.5 };
        let a = gate_error_budget(&ens, 1e8, 1e4, 1e-5, 1e-25).unwrap();
        let b = gate_error_budget(&ens, 1e8, 1e4 * k, 1e-5, 1e-25).unwrap();
        prop_assert!(rel(b.inhomogeneous, a.inhomogeneous * k.powf(2.0 / 3.0)) < 1e-12);
        // Δ* ∝ κ^(-1/3)
        prop_assert!(rel(b.delta_star, a.delta_star / k.cbrt()) < 1e-12);
    }
}
