use crate::error::{Error, Result};

use super::constants::*;
use super::MoleculeSpec;

/// A level of a ²Σ₁/₂ rotor. Half-integer quantum numbers are stored doubled.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RotationalLevel {
    pub n: u32,
    pub twice_j: u32,
    /// Resolved only in the rotational ground state.
    pub twice_f: Option<u32>,
    /// Energy over ħ (rad/s).
    pub energy: f64,
}

/// Rigid rotor plus spin-rotation coupling for `N ≤ n_max`; the `N = 0`
/// doublet is further split by the Fermi-contact interaction `b I·S` into
/// `F = I ± 1/2`.
pub fn rotational_spectrum(mol: &MoleculeSpec, n_max: u32) -> Result<Vec<RotationalLevel>> {
    mol.validate()?;
    if n_max < 1 {
        return Err(Error::param("n_max", "must be at least 1"));
    }
    let b = mol.rotational();
    let g = mol.spin_rotation();
    let mut out = Vec::new();
    for n in 0..=n_max {
        let nf = n as f64;
        let rot = b * nf * (nf + 1.0);
        let js: &[u32] = if n == 0 { &[1] } else { &[2 * n - 1, 2 * n + 1] };
        for &twice_j in js {
            let j = twice_j as f64 / 2.0;
            let e = rot + 0.5 * g * (j * (j + 1.0) - nf * (nf + 1.0) - 0.75);
            if n == 0 && mol.nuclear_spin > 0.0 {
                let i = mol.nuclear_spin;
                let two_i = (2.0 * i) as u32;
                let fs = if two_i >= 1 { vec![two_i - 1, two_i + 1] } else { vec![1] };
                for twice_f in fs {
                    let f = twice_f as f64 / 2.0;
                    let hf = 0.5 * mol.hyperfine() * (f * (f + 1.0) - i * (i + 1.0) - 0.75);
                    out.push(RotationalLevel { n, twice_j, twice_f: Some(twice_f), energy: e + hf });
                }
            } else {
                out.push(RotationalLevel { n, twice_j, twice_f: None, energy: e });
            }
        }
    }
    Ok(out)
}

/// Van der Waals coefficient `C6 = (μ²/4πε0)²/6B` (J·m⁶) from second-order
/// dipole coupling in the rotational ground state, and the length
/// `R* = (mC6/ħ²)^(1/4)` in Bohr radii with `m` the full molecular mass.
pub fn c6_and_range(mol: &MoleculeSpec) -> Result<(f64, f64)> {
    mol.validate()?;
    let mu = mol.dipole();
    let b = HBAR * mol.rotational();
    let c6 = (mu * mu / (4.0 * std::f64::consts::PI * EPS0)).powi(2) / (6.0 * b);
    let r = (mol.mass() * c6 / (HBAR * HBAR)).powf(0.25);
    Ok((c6, r / BOHR))
}
