//! Quadratic charge-qubit detuning pulse and its phase calibration.
//!
//! For `δc(t) = -δ0(2t/T-1)² - δ1` the substitution `u = t/T` gives
//! `φn(δ1, T) = T·hn(δ1)`, so the ratio `φ2/φ1 = h2/h1` depends on `δ1` alone
//! and ranges over `(r(0), 2)` with `r(0) > √2`. Calibration solves the ratio
//! for `δ1` by bisection, sets `T = φ1/h1`, and then polishes both unknowns
//! with Newton steps on the full quadrature map.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::model::Schedule;
use crate::quad;

use super::phase::{dressed_shift, phase_functional, wrap_phase, PHASE_TOL};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadraticPulse {
    pub delta0: f64,
    pub delta1: f64,
    pub duration: f64,
    pub g_c: f64,
}

impl QuadraticPulse {
    pub fn new(delta0: f64, delta1: f64, duration: f64, g_c: f64) -> Result<Self> {
        let p = QuadraticPulse { delta0, delta1, duration, g_c };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("delta0", self.delta0), ("delta1", self.delta1), ("duration", self.duration), ("g_c", self.g_c)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::param(name, format!("must be positive, got {v}")));
            }
        }
        Ok(())
    }

    pub fn schedule(&self) -> Schedule {
        Schedule::QuadraticPulse { delta0: self.delta0, delta1: self.delta1, duration: self.duration }
    }

    /// Detuning at both ends of the pulse.
    pub fn edge_detuning(&self) -> f64 {
        -(self.delta0 + self.delta1)
    }

    /// `φn` by direct quadrature over the pulse.
    pub fn phase(&self, n: u32) -> Result<f64> {
        phase_functional(&self.schedule(), n, self.g_c, self.duration)
    }
}

/// Result of a phase calibration. The realized phases are
/// `φ1 = target1 + 2π·branch_1` and `φ2 = target2 + 2π·branch_2` with the
/// targets wrapped to (-π, π].
#[derive(Clone, Debug, PartialEq)]
pub struct PulseCalibration {
    pub pulse: QuadraticPulse,
    pub branch_1: i64,
    pub branch_2: i64,
    pub phi_1: f64,
    pub phi_2: f64,
    /// Wrapped differences between realized and target phases.
    pub residuals: [f64; 2],
}

/// Unit-duration phase `hn(δ1)`.
fn unit_phase(delta0: f64, delta1: f64, g_c: f64, n: u32) -> Result<f64> {
    let x = 4.0 * n as f64 * g_c * g_c;
    let f = |u: f64| {
        let s = 2.0 * u - 1.0;
        dressed_shift(-delta0 * s * s - delta1, x)
    };
    // the integrand is symmetric about u = 1/2
    let (v, _) = quad::integrate(f, 0.0, 0.5, &[], 1e-3 * PHASE_TOL)?;
    Ok(-2.0 * v)
}

fn ratio(delta0: f64, delta1: f64, g_c: f64) -> Result<f64> {
    Ok(unit_phase(delta0, delta1, g_c, 2)? / unit_phase(delta0, delta1, g_c, 1)?)
}

/// Phase targets and branches tried when calibrating.
#[derive(Clone, Debug)]
pub struct BranchSearch {
    /// Branches of φ2 tried in order.
    pub branches_2: Vec<i64>,
    /// φ1 branches 0, -1, ... down to this bound are tried for each φ2 branch.
    pub min_branch_1: i64,
}

impl BranchSearch {
    pub fn exact(n: i64) -> Self {
        BranchSearch { branches_2: vec![n], min_branch_1: -64 }
    }

    /// `n`, then its neighbours in order of distance (lower side first).
    pub fn around(n: i64, width: i64) -> Self {
        let mut b = vec![n];
        for k in 1..=width {
            b.push(n - k);
            b.push(n + k);
        }
        BranchSearch { branches_2: b.into_iter().filter(|&x| x < 0).collect(), min_branch_1: -64 }
    }
}

/// Solves `φ1 ≡ π/2` and `φ2 = 2πn`.
pub fn calibrate_pulse(delta0: f64, g_c: f64, n: i64) -> Result<PulseCalibration> {
    calibrate_pulse_to(delta0, g_c, PI / 2.0, 0.0, &BranchSearch::exact(n))
}

/// Solves `φ1 ≡ target1` and `φ2 ≡ target2` (mod 2π) on the first feasible
/// branch pair of `search`.
pub fn calibrate_pulse_to(delta0: f64, g_c: f64, target1: f64, target2: f64, search: &BranchSearch) -> Result<PulseCalibration> {
    if !(g_c > 0.0 && g_c.is_finite()) {
        return Err(Error::param("g_c", "must be positive"));
    }
    if !(delta0 / g_c > 1.0 && delta0.is_finite()) {
        return Err(Error::param("delta0", "δ0/gc must exceed 1"));
    }
    let t1 = wrap_phase(target1);
    let t2 = wrap_phase(target2);
    let lo = 1e-9 * g_c;
    let hi = 1e4 * delta0.max(g_c);
    let r_lo = ratio(delta0, lo, g_c)?;
    let r_hi = ratio(delta0, hi, g_c)?;
    for &n in &search.branches_2 {
        let p2 = t2 + 2.0 * PI * n as f64;
        if p2 >= 0.0 {
            continue;
        }
        let mut k = 0;
        while k >= search.min_branch_1 {
            let p1 = t1 + 2.0 * PI * k as f64;
            k -= 1;
            if p1 >= 0.0 {
                continue;
            }
            let r = p2 / p1;
            if !(r > r_lo && r < r_hi) {
                continue;
            }
            let delta1 = bisect(|d| Ok(ratio(delta0, d, g_c)? - r), lo, hi)?;
            let duration = p1 / unit_phase(delta0, delta1, g_c, 1)?;
            let pulse = polish(QuadraticPulse { delta0, delta1, duration, g_c }, p1, p2)?;
            let phi_1 = pulse.phase(1)?;
            let phi_2 = pulse.phase(2)?;
            return Ok(PulseCalibration {
                pulse,
                branch_1: k + 1,
                branch_2: n,
                phi_1,
                phi_2,
                residuals: [wrap_phase(phi_1 - t1), wrap_phase(phi_2 - t2)],
            });
        }
    }
    Err(Error::Calibration {
        reason: format!(
            "no branch pair reaches targets ({t1:.4}, {t2:.4}) with δ1 > 0; φ2/φ1 must lie in ({r_lo:.4}, {r_hi:.4})"
        ),
        residual_map: residual_map(delta0, g_c, t1, t2),
    })
}

fn bisect(f: impl Fn(f64) -> Result<f64>, mut a: f64, mut b: f64) -> Result<f64> {
    let mut fa = f(a)?;
    // the ratio is smooth and monotone in δ1; a log-space bisection covers the
    // many decades of the bracket
    for _ in 0..200 {
        let m = (a * b).sqrt();
        let fm = f(m)?;
        if fm == 0.0 {
            return Ok(m);
        }
        if (fm < 0.0) == (fa < 0.0) {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
        if (b - a) <= 1e-15 * b {
            break;
        }
    }
    Ok((a * b).sqrt())
}

/// Newton iteration on (δ1, T) → (φ1, φ2) using direct quadrature.
fn polish(mut p: QuadraticPulse, p1: f64, p2: f64) -> Result<QuadraticPulse> {
    for _ in 0..8 {
        let f1 = p.phase(1)? - p1;
        let f2 = p.phase(2)? - p2;
        if f1.abs().max(f2.abs()) < PHASE_TOL {
            break;
        }
        let hd = 1e-6 * p.delta1.max(1e-3 * p.g_c);
        let ht = 1e-6 * p.duration;
        let pd = QuadraticPulse { delta1: p.delta1 + hd, ..p };
        let pt = QuadraticPulse { duration: p.duration + ht, ..p };
        let j11 = (pd.phase(1)? - p1 - f1) / hd;
        let j21 = (pd.phase(2)? - p2 - f2) / hd;
        let j12 = (pt.phase(1)? - p1 - f1) / ht;
        let j22 = (pt.phase(2)? - p2 - f2) / ht;
        let det = j11 * j22 - j12 * j21;
        if det == 0.0 || !det.is_finite() {
            break;
        }
        p.delta1 -= (j22 * f1 - j12 * f2) / det;
        p.duration -= (-j21 * f1 + j11 * f2) / det;
        p.validate()?;
    }
    Ok(p)
}

/// Wrapped residuals on a coarse grid, δ1 ∈ [0.25, 2]·gc and T ∈ [12.5, 100]/gc.
fn residual_map(delta0: f64, g_c: f64, t1: f64, t2: f64) -> Vec<[f64; 4]> {
    let mut out = Vec::new();
    for i in 1..=8 {
        let delta1 = 0.25 * i as f64 * g_c;
        for j in 1..=8 {
            let duration = 12.5 * j as f64 / g_c;
            let p = QuadraticPulse { delta0, delta1, duration, g_c };
            if let (Ok(a), Ok(b)) = (p.phase(1), p.phase(2)) {
                out.push([delta1, duration, wrap_phase(a - t1), wrap_phase(b - t2)]);
            }
        }
    }
    out
}
