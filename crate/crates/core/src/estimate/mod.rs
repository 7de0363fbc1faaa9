//! Closed-form order-of-magnitude estimators for the molecular ensembles, the
//! cavity coupling chain and the collisional decoherence budget.
//!
//! Every function works in SI internally: angular frequencies in rad/s,
//! lengths in m, masses in kg, densities in m⁻³. The spec structs carry the
//! customary lab units and convert on access.

mod collisions;
mod coupling;
mod montecarlo;
mod spectrum;

pub use collisions::{
    barrier_height, collision_rate_swave, collision_rate_unitarity, dephasing_rate_swave, mean_relative_speed,
    swave_threshold, SwaveRate, UnitarityRate,
};
pub use coupling::{
    field_per_photon, gate_error_budget, molecule_count, raman_couplings, vacuum_rabi, ErrorBudget, RamanCouplings,
};
pub use montecarlo::{gamma10_montecarlo, Amplitudes, MonteCarloRate, MIN_SAMPLES};
pub use spectrum::{c6_and_range, rotational_spectrum, RotationalLevel};

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// CODATA 2018 values, except `EPS0`, which keeps the exact pre-2019 value
/// `1/(4π×10⁻⁷ c²)` so that SI and Gaussian evaluations agree to rounding.
pub mod constants {
    pub const HBAR: f64 = 1.054_571_817e-34;
    pub const C: f64 = 299_792_458.0;
    pub const EPS0: f64 = 1.0 / (4.0e-7 * std::f64::consts::PI * C * C);
    pub const K_B: f64 = 1.380_649e-23;
    pub const AMU: f64 = 1.660_539_066_60e-27;
    /// 10⁻²¹/c C·m.
    pub const DEBYE: f64 = 3.335_640_951_981_52e-30;
    pub const BOHR: f64 = 5.291_772_109_03e-11;
}

use constants::*;

const TWO_PI: f64 = 2.0 * PI;

fn positive(name: &'static str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::param(name, format!("must be positive and finite, got {v}")))
    }
}

fn non_negative(name: &'static str, v: f64) -> Result<()> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::param(name, format!("must be non-negative and finite, got {v}")))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MoleculeSpec {
    pub name: String,
    pub dipole_debye: f64,
    pub rotational_2pi_ghz: f64,
    pub spin_rotation_2pi_mhz: f64,
    pub hyperfine_2pi_mhz: f64,
    pub mass_amu: f64,
    pub nuclear_spin: f64,
}

impl MoleculeSpec {
    pub fn validate(&self) -> Result<()> {
        positive("dipole_debye", self.dipole_debye)?;
        positive("rotational_2pi_ghz", self.rotational_2pi_ghz)?;
        positive("mass_amu", self.mass_amu)?;
        non_negative("spin_rotation_2pi_mhz", self.spin_rotation_2pi_mhz)?;
        non_negative("hyperfine_2pi_mhz", self.hyperfine_2pi_mhz)?;
        let twice = 2.0 * self.nuclear_spin;
        if !(twice >= 0.0 && twice.fract() == 0.0) {
            return Err(Error::param("nuclear_spin", "must be a non-negative multiple of 1/2"));
        }
        Ok(())
    }
    pub fn dipole(&self) -> f64 {
        self.dipole_debye * DEBYE
    }
    /// Rotational constant as an angular frequency.
    pub fn rotational(&self) -> f64 {
        TWO_PI * 1e9 * self.rotational_2pi_ghz
    }
    pub fn spin_rotation(&self) -> f64 {
        TWO_PI * 1e6 * self.spin_rotation_2pi_mhz
    }
    pub fn hyperfine(&self) -> f64 {
        TWO_PI * 1e6 * self.hyperfine_2pi_mhz
    }
    pub fn mass(&self) -> f64 {
        self.mass_amu * AMU
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CavitySpec {
    pub frequency_2pi_ghz: f64,
    pub electrode_distance_um: f64,
    pub length_cm: f64,
    pub kappa_2pi_mhz: f64,
}

impl CavitySpec {
    pub fn validate(&self) -> Result<()> {
        positive("frequency_2pi_ghz", self.frequency_2pi_ghz)?;
        positive("electrode_distance_um", self.electrode_distance_um)?;
        positive("length_cm", self.length_cm)?;
        positive("kappa_2pi_mhz", self.kappa_2pi_mhz)
    }
    pub fn frequency(&self) -> f64 {
        TWO_PI * 1e9 * self.frequency_2pi_ghz
    }
    pub fn electrode_distance(&self) -> f64 {
        1e-6 * self.electrode_distance_um
    }
    pub fn length(&self) -> f64 {
        1e-2 * self.length_cm
    }
    pub fn kappa(&self) -> f64 {
        TWO_PI * 1e6 * self.kappa_2pi_mhz
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnsembleSpec {
    pub density_cm3: f64,
    pub temperature_k: f64,
    pub molecule_count: f64,
    pub trap_2pi_khz: f64,
    /// `δω²/ωt²`.
    pub trap_mismatch: f64,
    /// Linear coupling-gradient constant in `g(x) ≈ g(1 − αx/d)`.
    pub alpha: f64,
}

impl EnsembleSpec {
    pub fn validate(&self) -> Result<()> {
        positive("density_cm3", self.density_cm3)?;
        positive("temperature_k", self.temperature_k)?;
        positive("molecule_count", self.molecule_count)?;
        positive("trap_2pi_khz", self.trap_2pi_khz)?;
        non_negative("trap_mismatch", self.trap_mismatch)?;
        non_negative("alpha", self.alpha)
    }
    pub fn density(&self) -> f64 {
        1e6 * self.density_cm3
    }
    pub fn trap_frequency(&self) -> f64 {
        TWO_PI * 1e3 * self.trap_2pi_khz
    }
}

/// A named scalar with its unit tag and the formula that produced it.
#[derive(Clone, Debug, PartialEq)]
pub struct Entry {
    pub name: String,
    pub value: f64,
    pub unit: &'static str,
    pub formula: &'static str,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct EstimateReport {
    pub inputs: Vec<Entry>,
    pub results: Vec<Entry>,
    pub flags: Vec<String>,
}

impl EstimateReport {
    pub fn input(&mut self, name: &str, value: f64, unit: &'static str) {
        self.inputs.push(Entry { name: name.into(), value, unit, formula: "input" });
    }
    pub fn result(&mut self, name: &str, value: f64, unit: &'static str, formula: &'static str) {
        self.results.push(Entry { name: name.into(), value, unit, formula });
    }
    /// Records an angular frequency as `value/2π` with unit `2pi_<unit>`.
    pub fn rate(&mut self, name: &str, omega: f64, scale: Scale, formula: &'static str) {
        let (div, unit) = match scale {
            Scale::Hz => (1.0, "2pi_Hz"),
            Scale::KHz => (1e3, "2pi_kHz"),
            Scale::MHz => (1e6, "2pi_MHz"),
        };
        self.result(name, omega / TWO_PI / div, unit, formula);
    }
    pub fn get(&self, name: &str) -> Option<&Entry> {
        self.results.iter().find(|e| e.name == name)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scale {
    Hz,
    KHz,
    MHz,
}
