//! Adiabatic dynamical phases of the charge qubit dressed by n cavity photons.
//!
//! For a qubit in |g⟩ following the lower dressed state of
//! `-δc|e⟩⟨e| + gc(|e⟩⟨g|c + h.c.)` in the n-photon manifold,
//! `φn = -∫ (δc + √(δc² + 4n gc²))/2 dt`.
//! With the Hamiltonian written this way the state acquires `exp(-iφn)`.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::model::Schedule;
use crate::quad;

/// Absolute quadrature tolerance for phases, in radians.
pub const PHASE_TOL: f64 = 1e-9;

/// `(δ + √(δ² + x))/2` without cancellation for large negative `δ`.
pub(crate) fn dressed_shift(delta: f64, x: f64) -> f64 {
    let r = (delta * delta + x).sqrt();
    if delta < 0.0 {
        0.5 * x / (r - delta)
    } else {
        0.5 * (delta + r)
    }
}

fn check(schedule: &Schedule, g_c: f64, a: f64, b: f64) -> Result<()> {
    if !g_c.is_finite() {
        return Err(Error::param("g_c", "must be finite"));
    }
    schedule.validate()?;
    schedule.value_checked(a)?;
    schedule.value_checked(b)?;
    Ok(())
}

/// `φn` accumulated between `a` and `b` (negative if `b < a`).
pub fn phase_between(delta_c: &Schedule, n: u32, g_c: f64, a: f64, b: f64) -> Result<f64> {
    check(delta_c, g_c, a, b)?;
    let x = 4.0 * n as f64 * g_c * g_c;
    let (v, _) = quad::integrate(|t| dressed_shift(delta_c.value(t), x), a, b, &delta_c.breakpoints(), PHASE_TOL)?;
    Ok(-v)
}

/// `φn` over `[0, duration]`.
pub fn phase_functional(delta_c: &Schedule, n: u32, g_c: f64, duration: f64) -> Result<f64> {
    phase_between(delta_c, n, g_c, 0.0, duration)
}

/// Cumulative `φn(t)` at each of the sorted `times`, starting from 0.
pub fn phase_trajectory(delta_c: &Schedule, n: u32, g_c: f64, times: &[f64]) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(times.len());
    let mut acc = 0.0;
    let mut prev = 0.0;
    for &t in times {
        if t < prev {
            return Err(Error::param("times", "must be sorted and non-negative"));
        }
        acc += phase_between(delta_c, n, g_c, prev, t)?;
        out.push(acc);
        prev = t;
    }
    Ok(out)
}

/// Maps an angle to (-π, π].
pub fn wrap_phase(x: f64) -> f64 {
    let y = x.rem_euclid(2.0 * PI);
    if y > PI {
        y - 2.0 * PI
    } else {
        y
    }
}
