//! Adiabatic Raman-detuning sweeps and the cavity–ensemble state swap.

use std::f64::consts::PI;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::fidelity::uhlmann_fidelity;
use crate::integrate::{evolve_density, EvolveOptions};
use crate::model::{Schedule, SystemModel};
use crate::qspace::{DensityMatrix, FactorLabel, C64};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SweepShape {
    Linear,
    Tanh { steepness: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepTarget {
    Ensemble(usize),
    Both,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepSpec {
    pub shape: SweepShape,
    pub delta_start: f64,
    pub delta_end: f64,
    pub duration: f64,
    pub target: SweepTarget,
}

/// Half-range of the default sweep in units of the ensemble coupling.
pub const DEFAULT_RANGE: f64 = 20.0;
/// Leakage bound the default sweep duration is chosen to meet.
pub const DEFAULT_LEAKAGE: f64 = 1e-4;
/// Tanh steepness of partial sweeps; the end slope is `1 - tanh²(3) ≈ 1%` of the peak.
const PARTIAL_STEEPNESS: f64 = 3.0;
/// Bound on `|dθ/dt| / Ω` along a partial sweep.
const PARTIAL_ADIABATICITY: f64 = 2e-3;

impl SweepSpec {
    /// Tanh sweep from `+20 gm` to `-20 gm` (steepness 1), long enough that the
    /// predicted leakage at the crossing is below 1e-4. With both ensembles
    /// driven the bright mode couples with `√2 gm`.
    pub fn default_for(g_m: f64, target: SweepTarget) -> Result<Self> {
        if !(g_m > 0.0 && g_m.is_finite()) {
            return Err(Error::param("g_m", "sweep coupling must be positive"));
        }
        let g_eff = effective_coupling(g_m, target);
        let d = DEFAULT_RANGE * g_m;
        let s: f64 = 1.0;
        // crossing rate 2Ds/(T tanh s) must not exceed 2πG²/ln(1/leak)
        let duration = 1.05 * 2.0 * d * s * (1.0 / DEFAULT_LEAKAGE).ln() / (2.0 * PI * g_eff * g_eff * s.tanh());
        Ok(SweepSpec { shape: SweepShape::Tanh { steepness: s }, delta_start: d, delta_end: -d, duration, target })
    }

    /// Sweep that stops where the adiabatic single-excitation state holds
    /// `fraction` of its population on the ensemble. The dressed state has
    /// mixing angle `tan 2θ = 2G/δ`, so the stop is `δ = 2G cot 2θ` with
    /// `sin²θ = fraction`. Fractions at or below 1/2 would never reach
    /// resonance and are rejected; 1 is the default full sweep.
    pub fn partial_for(g_m: f64, target: SweepTarget, fraction: f64) -> Result<Self> {
        let full = Self::default_for(g_m, target)?;
        if !(fraction > 0.5 && fraction <= 1.0) {
            return Err(Error::param("transfer fraction", "must lie in (1/2, 1]"));
        }
        if fraction == 1.0 {
            return Ok(full);
        }
        let g_eff = effective_coupling(g_m, target);
        let theta = fraction.sqrt().asin();
        let stop = (2.0 * g_eff / (2.0 * theta).tan()).max(full.delta_end);
        // the stop sits near resonance, so the ramp must come to rest there
        // or the dressed state lags behind it
        let mut s = SweepSpec { delta_end: stop, shape: SweepShape::Tanh { steepness: PARTIAL_STEEPNESS }, ..full };
        // the adiabaticity parameter scales as 1/T
        s.duration = 1.0;
        s.duration = (s.max_adiabaticity(g_eff) / PARTIAL_ADIABATICITY).max(full.duration);
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta_start * self.delta_end < 0.0) {
            return Err(Error::param("sweep", "start and end detunings must lie on opposite sides of resonance"));
        }
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return Err(Error::param("sweep duration", "must be positive"));
        }
        if let SweepShape::Tanh { steepness } = self.shape {
            if !(steepness > 0.0 && steepness.is_finite()) {
                return Err(Error::param("steepness", "must be positive"));
            }
        }
        if let SweepTarget::Ensemble(i) = self.target {
            if i != 1 && i != 2 {
                return Err(Error::param("sweep target", "ensemble index must be 1 or 2"));
            }
        }
        Ok(())
    }

    pub fn schedule(&self) -> Schedule {
        match self.shape {
            SweepShape::Linear => Schedule::Linear { from: self.delta_start, to: self.delta_end, duration: self.duration },
            SweepShape::Tanh { steepness } => Schedule::TanhRamp {
                from: self.delta_start,
                to: self.delta_end,
                duration: self.duration,
                steepness,
            },
        }
    }

    /// Time at which the detuning crosses zero.
    pub fn crossing_time(&self) -> f64 {
        let (a, b, t) = (self.delta_start, self.delta_end, self.duration);
        match self.shape {
            SweepShape::Linear => t * a / (a - b),
            SweepShape::Tanh { steepness: s } => {
                let mid = 0.5 * (a + b);
                let half = 0.5 * (b - a);
                let x = (-mid * s.tanh() / half).atanh() / s;
                0.5 * t * (x + 1.0)
            }
        }
    }

    /// Largest `|dθ/dt| / Ω = G|dδ/dt| / (δ² + 4G²)^{3/2}` along the sweep,
    /// θ being the single-excitation mixing angle and Ω the dressed splitting.
    pub fn max_adiabaticity(&self, g_eff: f64) -> f64 {
        let sched = self.schedule();
        let n = 4000;
        let h = self.duration / n as f64;
        (0..=n)
            .map(|k| {
                let t = k as f64 * h;
                let (lo, hi) = ((t - 0.5 * h).max(0.0), (t + 0.5 * h).min(self.duration));
                let rate = (sched.value(hi) - sched.value(lo)) / (hi - lo);
                let d = sched.value(t);
                g_eff * rate.abs() / (d * d + 4.0 * g_eff * g_eff).powf(1.5)
            })
            .fold(0.0, f64::max)
    }

    /// `|dδ/dt|` at the zero crossing.
    pub fn crossing_rate(&self) -> f64 {
        let (a, b, t) = (self.delta_start, self.delta_end, self.duration);
        match self.shape {
            SweepShape::Linear => ((b - a) / t).abs(),
            SweepShape::Tanh { steepness: s } => {
                let x = 2.0 * self.crossing_time() / t - 1.0;
                let th = (s * x).tanh();
                (0.5 * (b - a) * s * (1.0 - th * th) / s.tanh() * 2.0 / t).abs()
            }
        }
    }
}

/// Coupling of the swept mode: `gm` for one ensemble, `√2 gm` for the
/// symmetric mode of two.
pub fn effective_coupling(g_m: f64, target: SweepTarget) -> f64 {
    match target {
        SweepTarget::Both => 2f64.sqrt() * g_m,
        SweepTarget::Ensemble(_) => g_m,
    }
}

/// Landau–Zener diabatic probability `exp(-2πG²/r)` with `r` the crossing rate.
pub fn predicted_lz_leakage(sweep: &SweepSpec, g_eff: f64) -> f64 {
    (-2.0 * PI * g_eff * g_eff / sweep.crossing_rate()).exp()
}

#[derive(Clone, Debug)]
pub struct SwapResult {
    pub output: DensityMatrix,
    /// Reduced state of the target ensemble after the sweep.
    pub ensemble_state: DMatrix<C64>,
    /// Cavity state before the sweep, placed on the ensemble levels.
    pub ideal_state: DMatrix<C64>,
    /// Mean ensemble excitation after the sweep over mean photon number before.
    pub transfer_probability: f64,
    /// Fidelity against the level-by-level swap.
    pub fidelity: f64,
    /// Fidelity after removing the best number-dependent phase `exp(-iθn)`.
    pub phase_corrected_fidelity: f64,
    pub phase_per_quantum: f64,
    pub predicted_leakage: f64,
    pub trace_drift: f64,
    pub warnings: Vec<String>,
}

/// Runs `sweep` on one ensemble's Raman detuning, all else taken from
/// `model`, and compares the ensemble's final state with the cavity's
/// initial one.
pub fn swap_protocol(model: &SystemModel, sweep: &SweepSpec, input: &DensityMatrix, opts: &EvolveOptions) -> Result<SwapResult> {
    sweep.validate()?;
    let SweepTarget::Ensemble(idx) = sweep.target else {
        return Err(Error::Precondition("the swap acts on a single ensemble".into()));
    };
    let label = FactorLabel::ensemble(idx).expect("validated index");
    let layout = &model.layout;
    if !layout.contains(FactorLabel::Cavity) || !layout.contains(label) {
        return Err(Error::Precondition(format!("layout needs the cavity and {label}")));
    }
    let mut m = model.clone();
    m.ensembles[idx - 1].detuning = sweep.schedule();
    m.validate()?;
    if let Some(d) = m.duration() {
        if (d - sweep.duration).abs() > 1e-9 * d.max(1.0) {
            return Err(Error::param("sweep", "model schedules and sweep disagree on duration"));
        }
    }
    let mut warnings = Vec::new();
    if layout.contains(FactorLabel::Cpb) && m.g_c != 0.0 {
        // idle charge qubit: far detuned throughout
        for k in 0..=200 {
            let t = sweep.duration * k as f64 / 200.0;
            if m.cpb_detuning.value(t).abs() < 10.0 * m.g_c.abs() {
                return Err(Error::Precondition(format!(
                    "charge qubit is not far detuned at t = {t}: |δc| < 10 gc"
                )));
            }
        }
    }
    let g_cross = m.ensembles[idx - 1].coupling.value(sweep.crossing_time()).abs();
    let predicted_leakage = predicted_lz_leakage(sweep, g_cross);
    if predicted_leakage > 1e-3 {
        warnings.push(format!("non-adiabatic sweep: predicted Landau–Zener leakage {predicted_leakage:.2e}"));
    }

    let cap = (0..layout.total_dim())
        .filter(|&i| input.population(i) > 1e-14)
        .map(|i| layout.excitations(i))
        .max()
        .unwrap_or(0);
    let rho_c = input.partial_trace(&[FactorLabel::Cavity])?;
    let dm = layout.dim_of(label)?;
    let dc = rho_c.nrows();
    let mut ideal = DMatrix::zeros(dm, dm);
    for i in 0..dc {
        for j in 0..dc {
            if i >= dm || j >= dm {
                if rho_c[(i, j)].norm() > 1e-12 {
                    return Err(Error::Precondition(format!("cavity level {} does not fit in {label}", i.max(j))));
                }
                continue;
            }
            ideal[(i, j)] = rho_c[(i, j)];
        }
    }
    let n_in: f64 = (0..dc).map(|k| k as f64 * rho_c[(k, k)].re).sum();

    let opts = EvolveOptions { excitation_cap: Some(opts.excitation_cap.unwrap_or(cap).max(cap)), ..opts.clone() };
    let tl = evolve_density(&m, input, sweep.duration, &opts)?;
    let output = tl.final_state;
    let trace_drift = (output.trace().re - input.trace().re).abs();
    let rho_m = output.partial_trace(&[label])?;
    let n_out: f64 = (0..dm).map(|k| k as f64 * rho_m[(k, k)].re).sum();
    let transfer_probability = if n_in > 0.0 { n_out / n_in } else { 1.0 };
    let fidelity = uhlmann_fidelity(&rho_m, &ideal)?;
    let rotated = |theta: f64| -> Result<f64> {
        let r = DMatrix::from_diagonal(&nalgebra::DVector::from_fn(dm, |k, _| C64::from_polar(1.0, -theta * k as f64)));
        uhlmann_fidelity(&rho_m, &(&r * &ideal * r.adjoint()))
    };
    let (phase_per_quantum, phase_corrected_fidelity) = maximize_periodic(rotated)?;
    Ok(SwapResult {
        output,
        ensemble_state: rho_m,
        ideal_state: ideal,
        transfer_probability,
        fidelity,
        phase_corrected_fidelity: phase_corrected_fidelity.max(fidelity),
        phase_per_quantum,
        predicted_leakage,
        trace_drift,
        warnings,
    })
}

/// Maximum of a 2π-periodic function: coarse scan, then golden-section refinement.
fn maximize_periodic(f: impl Fn(f64) -> Result<f64>) -> Result<(f64, f64)> {
    let n = 72;
    let mut best = (0.0, f(0.0)?);
    for k in 1..n {
        let x = -PI + 2.0 * PI * k as f64 / n as f64;
        let v = f(x)?;
        if v > best.1 {
            best = (x, v);
        }
    }
    let step = 2.0 * PI / n as f64;
    let (mut a, mut b) = (best.0 - step, best.0 + step);
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - phi * (b - a);
    let mut d = a + phi * (b - a);
    let (mut fc, mut fd) = (f(c)?, f(d)?);
    for _ in 0..60 {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - phi * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + phi * (b - a);
            fd = f(d)?;
        }
    }
    let x = 0.5 * (a + b);
    let v = f(x)?;
    Ok(if v >= best.1 { (super::phase::wrap_phase(x), v) } else { best })
}
