use crate::error::{Error, Result};

use super::constants::*;
use super::{positive, CavitySpec, EnsembleSpec};

/// Vacuum field per photon `√(ħωc / 2πε0 d² L)` in V/m.
pub fn field_per_photon(cavity: &CavitySpec) -> Result<f64> {
    cavity.validate()?;
    let d = cavity.electrode_distance();
    Ok((HBAR * cavity.frequency() / (2.0 * std::f64::consts::PI * EPS0 * d * d * cavity.length())).sqrt())
}

/// Single-molecule vacuum Rabi frequency `μEc/ħ` (rad/s) for a dipole in C·m.
pub fn vacuum_rabi(dipole: f64, cavity: &CavitySpec) -> Result<f64> {
    if !(dipole >= 0.0 && dipole.is_finite()) {
        return Err(Error::param("dipole", "must be non-negative"));
    }
    Ok(dipole * field_per_photon(cavity)? / HBAR)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RamanCouplings {
    /// Two-photon Rabi frequency `Ω1Ω2/2Δ` between the ensemble qubit levels.
    pub omega_eff: f64,
    /// Cavity-assisted single-molecule coupling `gΩ/2Δ`.
    pub g_eff: f64,
    /// Collective coupling `√N g_eff`.
    pub g_m: f64,
    /// Set when `|Δ|` is not well above the drive strengths, where adiabatic
    /// elimination of the intermediate level is unreliable.
    pub outside_dispersive_limit: bool,
}

/// Margin `|Δ| / max(Ω, Ω1, Ω2)` below which the dispersive flag is raised.
const DISPERSIVE_MARGIN: f64 = 3.0;

pub fn raman_couplings(g: f64, omega: f64, omega_1: f64, omega_2: f64, delta: f64, n: f64) -> Result<RamanCouplings> {
    if delta == 0.0 || !delta.is_finite() {
        return Err(Error::param("delta", "Raman detuning must be nonzero and finite"));
    }
    if !(n >= 0.0 && n.is_finite()) {
        return Err(Error::param("n", "molecule count must be non-negative"));
    }
    let g_eff = g * omega / (2.0 * delta);
    let drive = omega.abs().max(omega_1.abs()).max(omega_2.abs());
    Ok(RamanCouplings {
        omega_eff: omega_1 * omega_2 / (2.0 * delta),
        g_eff,
        g_m: n.sqrt() * g_eff,
        outside_dispersive_limit: delta.abs() < DISPERSIVE_MARGIN * drive,
    })
}

/// Molecules in a trap volume `d × d × λc/10`; density in m⁻³, lengths in m.
pub fn molecule_count(density: f64, d: f64, lambda_c: f64) -> Result<f64> {
    for (name, v) in [("density", density), ("d", d), ("lambda_c", lambda_c)] {
        if !(v >= 0.0 && v.is_finite()) {
            return Err(Error::param(name, "must be non-negative"));
        }
    }
    Ok(density * d * d * lambda_c / 10.0)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ErrorBudget {
    /// Crossover detuning `Δ*` (rad/s).
    pub delta_star: f64,
    /// Coupling-gradient term `α² kBT / mωt²d²`.
    pub motional: f64,
    /// Trap-mismatch term `(kBT δω² κ / ħ g²N ωt²)^(2/3)`.
    pub inhomogeneous: f64,
    pub epsilon: f64,
}

/// Gate error from thermal motion in a trap whose frequency differs between
/// the qubit states. `g_sqrt_n` and `kappa` in rad/s, `d` in m, `mass` in kg.
pub fn gate_error_budget(ens: &EnsembleSpec, g_sqrt_n: f64, kappa: f64, d: f64, mass: f64) -> Result<ErrorBudget> {
    ens.validate()?;
    positive("g_sqrt_n", g_sqrt_n)?;
    positive("kappa", kappa)?;
    positive("d", d)?;
    positive("mass", mass)?;
    let kt = K_B * ens.temperature_k;
    let wt2 = ens.trap_frequency().powi(2);
    let dw2 = ens.trap_mismatch * wt2;
    let g2n = g_sqrt_n * g_sqrt_n;
    let delta_star = (3.0 * g2n * (kt * dw2).powi(2) / (kappa * wt2 * wt2 * HBAR * HBAR)).cbrt();
    let motional = ens.alpha.powi(2) * kt / (mass * wt2 * d * d);
    let inhomogeneous = (kt * dw2 * kappa / (HBAR * g2n * wt2)).powf(2.0 / 3.0);
    Ok(ErrorBudget { delta_star, motional, inhomogeneous, epsilon: motional + inhomogeneous })
}
