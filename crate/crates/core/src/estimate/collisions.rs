use std::f64::consts::PI;

use super::constants::*;
use super::positive;
use crate::error::Result;

/// Mean relative speed `√(16kBT/πm)` of two molecules of mass `m`.
pub fn mean_relative_speed(temperature: f64, mass: f64) -> f64 {
    (16.0 * K_B * temperature / (PI * mass)).sqrt()
}

/// Height of the centrifugal barrier on `−C6/r⁶ + ħ²l(l+1)/mr²`,
/// `(2/3√3)(l(l+1))^(3/2) ħ²/mR*²`. `r_star` in m.
pub fn barrier_height(l: u32, mass: f64, r_star: f64) -> f64 {
    let ll = (l * (l + 1)) as f64;
    2.0 / (3.0 * 3f64.sqrt()) * ll.powf(1.5) * HBAR * HBAR / (mass * r_star * r_star)
}

/// Temperature of the p-wave barrier, above which s-wave scattering no longer
/// dominates.
pub fn swave_threshold(mass: f64, r_star: f64) -> f64 {
    barrier_height(1, mass, r_star) / K_B
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SwaveRate {
    pub rate: f64,
    /// Set when `T` exceeds the threshold from [`swave_threshold`] (only
    /// evaluated when `R*` is supplied).
    pub above_threshold: bool,
}

fn swave(a: f64, density: f64, temperature: f64, mass: f64, r_star: Option<f64>) -> Result<SwaveRate> {
    positive("density", density)?;
    positive("temperature", temperature)?;
    positive("mass", mass)?;
    let rate = 8.0 * PI * a * a * density * mean_relative_speed(temperature, mass);
    let above_threshold = r_star.is_some_and(|r| temperature > swave_threshold(mass, r));
    Ok(SwaveRate { rate, above_threshold })
}

/// `8π ā² n v̄` (rad/s); SI inputs.
pub fn collision_rate_swave(a: f64, density: f64, temperature: f64, mass: f64, r_star: Option<f64>) -> Result<SwaveRate> {
    swave(a, density, temperature, mass, r_star)
}

/// `8π (a00 − a01)² n v̄`: dephasing of a superposition whose components
/// scatter with different lengths.
pub fn dephasing_rate_swave(
    a00: f64,
    a01: f64,
    density: f64,
    temperature: f64,
    mass: f64,
    r_star: Option<f64>,
) -> Result<SwaveRate> {
    swave(a00 - a01, density, temperature, mass, r_star)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UnitarityRate {
    pub rate: f64,
    pub l_max: u32,
    /// Thermal relative wavenumber `(m/2)v̄/ħ` (1/m).
    pub k: f64,
    /// Set when `T` is below the p-wave barrier, where only the s-wave term remains.
    pub below_threshold: bool,
}

/// Collision rate with every open partial wave at its unitarity bound,
/// `σ = (4π/k²) Σ_{l ≤ lmax} (2l+1)`, `lmax` the last barrier below `kBT`.
pub fn collision_rate_unitarity(density: f64, temperature: f64, mass: f64, r_star: f64) -> Result<UnitarityRate> {
    positive("density", density)?;
    positive("temperature", temperature)?;
    positive("mass", mass)?;
    positive("r_star", r_star)?;
    let kt = K_B * temperature;
    let mut l_max = 0;
    while barrier_height(l_max + 1, mass, r_star) < kt {
        l_max += 1;
    }
    let v = mean_relative_speed(temperature, mass);
    let k = 0.5 * mass * v / HBAR;
    let sigma = 4.0 * PI / (k * k) * ((l_max + 1) as f64).powi(2);
    Ok(UnitarityRate { rate: sigma * density * v, l_max, k, below_threshold: l_max == 0 })
}
