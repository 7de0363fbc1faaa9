//! Control sequences: dynamical phases, pulse calibration, adiabatic swaps
//! and the two-ensemble gate.

mod calibrate;
mod gate;
mod phase;
mod sweep;

pub use calibrate::{calibrate_pulse, calibrate_pulse_to, BranchSearch, PulseCalibration, QuadraticPulse};
pub use gate::{
    calibrate_gate, dephasing_scan, mode_phases, sweep_phases, target_unitary, two_qubit_gate, BasisOutput, Conservation,
    DephasingPoint, GateCalibration, GateReport, GateSequence, RealizedPhases, BASIS_LABELS,
};
pub use phase::{phase_between, phase_functional, phase_trajectory, wrap_phase, PHASE_TOL};
pub use sweep::{
    effective_coupling, predicted_lz_leakage, swap_protocol, SwapResult, SweepShape, SweepSpec, SweepTarget,
    DEFAULT_LEAKAGE, DEFAULT_RANGE,
};
