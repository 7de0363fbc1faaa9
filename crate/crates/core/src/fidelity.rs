//! State fidelities, the dephasing-memory fidelity, and average gate fidelity
//! of a channel reconstructed on a small qudit subspace.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::qspace::{DensityMatrix, Ket, C64};

type Mat = DMatrix<C64>;

/// `⟨ψ|ρ|ψ⟩`, clamped to [0, 1] against round-off.
pub fn state_fidelity(rho: &DensityMatrix, psi: &Ket) -> Result<f64> {
    if rho.layout() != psi.layout() {
        return Err(Error::Precondition("state and reference ket have different layouts".into()));
    }
    Ok(pure_overlap(rho.matrix(), psi.amplitudes()))
}

/// `⟨ψ|ρ|ψ⟩` on bare matrices.
pub fn pure_overlap(rho: &Mat, psi: &DVector<C64>) -> f64 {
    (psi.adjoint() * rho * psi)[(0, 0)].re.clamp(0.0, 1.0)
}

/// Eigenvalues of a positive semidefinite matrix with round-off noise
/// (anything below 1e-13 of the largest) set to zero.
fn psd_eigen(m: &Mat) -> nalgebra::SymmetricEigen<C64, nalgebra::Dyn> {
    let mut eig = nalgebra::SymmetricEigen::new(crate::qspace::hermitian_part(m));
    let top = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
    eig.eigenvalues.iter_mut().for_each(|l| {
        if *l < 1e-13 * top {
            *l = 0.0
        }
    });
    eig
}

fn psd_sqrt(m: &Mat) -> Mat {
    let eig = psd_eigen(m);
    let d = DVector::from_iterator(eig.eigenvalues.len(), eig.eigenvalues.iter().map(|&l| C64::new(l.sqrt(), 0.0)));
    &eig.eigenvectors * Mat::from_diagonal(&d) * eig.eigenvectors.adjoint()
}

/// Uhlmann fidelity `(Tr√(√σ ρ √σ))²` between two density matrices.
pub fn uhlmann_fidelity(rho: &Mat, sigma: &Mat) -> Result<f64> {
    if rho.shape() != sigma.shape() {
        return Err(Error::DimensionMismatch { expected: sigma.nrows(), found: rho.nrows() });
    }
    let s = psd_sqrt(sigma);
    let root_sum: f64 = psd_eigen(&(&s * rho * &s)).eigenvalues.iter().map(|l| l.sqrt()).sum();
    Ok(root_sum.powi(2).clamp(0.0, 1.0))
}

/// Worst-case fidelity of a stored qubit after pure dephasing at rate
/// `gamma_10` for a time `tau`; the coherence decays as `exp(-γτ/2)`.
pub fn memory_fidelity(gamma_10: f64, tau: f64) -> Result<f64> {
    if !(gamma_10 >= 0.0 && tau >= 0.0) {
        return Err(Error::param("memory_fidelity", "rate and time must be non-negative"));
    }
    Ok(0.5 * (1.0 + (-0.5 * gamma_10 * tau).exp()))
}

/// A linear map on d×d matrices, stored by its action on the matrix units
/// `|i⟩⟨j|` (index `i·d + j`).
#[derive(Clone, Debug)]
pub struct ChannelEstimate {
    d: usize,
    images: Vec<Mat>,
}

impl ChannelEstimate {
    pub fn from_unit_images(d: usize, images: Vec<Mat>) -> Result<Self> {
        if images.len() != d * d {
            return Err(Error::Precondition(format!(
                "channel needs {} basis images, got {}",
                d * d,
                images.len()
            )));
        }
        if images.iter().any(|m| m.shape() != (d, d)) {
            return Err(Error::DimensionMismatch { expected: d, found: images[0].nrows() });
        }
        Ok(ChannelEstimate { d, images })
    }

    /// Samples a known linear map on every matrix unit.
    pub fn from_map(d: usize, map: impl Fn(&Mat) -> Mat) -> Result<Self> {
        let images = (0..d * d)
            .map(|k| {
                let mut e = Mat::zeros(d, d);
                e[(k / d, k % d)] = C64::new(1.0, 0.0);
                map(&e)
            })
            .collect();
        Self::from_unit_images(d, images)
    }

    /// Conjugation by `m` (not necessarily unitary).
    pub fn from_operator(m: &Mat) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::Precondition("channel operator must be square".into()));
        }
        Self::from_map(m.nrows(), |e| m * e * m.adjoint())
    }

    /// The d² pure input states that fix a Hermiticity-preserving map: each
    /// `|i⟩`, then `(|i⟩+|j⟩)/√2` and `(|i⟩+i|j⟩)/√2` for every pair i<j.
    pub fn probe_states(d: usize) -> Vec<DVector<C64>> {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let mut out: Vec<DVector<C64>> = (0..d)
            .map(|i| {
                let mut v = DVector::zeros(d);
                v[i] = C64::new(1.0, 0.0);
                v
            })
            .collect();
        for i in 0..d {
            for j in i + 1..d {
                for phase in [C64::new(1.0, 0.0), C64::new(0.0, 1.0)] {
                    let mut v = DVector::zeros(d);
                    v[i] = C64::new(h, 0.0);
                    v[j] = phase * h;
                    out.push(v);
                }
            }
        }
        out
    }

    /// Rebuilds the map from its outputs on [`ChannelEstimate::probe_states`]
    /// (same order). With `P` and `Q` the images of the two superpositions of
    /// a pair, `E(|i⟩⟨j|) = P + iQ − (1+i)/2·(E(|i⟩⟨i|) + E(|j⟩⟨j|))` and
    /// `E(|j⟩⟨i|) = E(|i⟩⟨j|)†`.
    pub fn from_probe_outputs(d: usize, outputs: &[Mat]) -> Result<Self> {
        if outputs.len() != d * d {
            return Err(Error::Precondition(format!("expected {} probe outputs, got {}", d * d, outputs.len())));
        }
        let mut images = vec![Mat::zeros(d, d); d * d];
        for i in 0..d {
            images[i * d + i] = outputs[i].clone();
        }
        let mut k = d;
        let c = C64::new(0.5, 0.5);
        for i in 0..d {
            for j in i + 1..d {
                let p = &outputs[k];
                let q = &outputs[k + 1];
                k += 2;
                let eij = p + q * C64::new(0.0, 1.0) - (&images[i * d + i] + &images[j * d + j]) * c;
                images[j * d + i] = eij.adjoint();
                images[i * d + j] = eij;
            }
        }
        Self::from_unit_images(d, images)
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn apply(&self, rho: &Mat) -> Mat {
        let d = self.d;
        let mut out = Mat::zeros(d, d);
        for i in 0..d {
            for j in 0..d {
                let c = rho[(i, j)];
                if c != C64::new(0.0, 0.0) {
                    out += &self.images[i * d + j] * c;
                }
            }
        }
        out
    }

    /// Frobenius distance of `T_ij = Tr E(|i⟩⟨j|)` from the identity; zero
    /// for a trace-preserving map, roughly the leaked population otherwise.
    pub fn trace_deviation(&self) -> f64 {
        let d = self.d;
        let mut s = 0.0;
        for i in 0..d {
            for j in 0..d {
                let t = self.images[i * d + j].trace();
                let target = if i == j { 1.0 } else { 0.0 };
                s += (t - C64::new(target, 0.0)).norm_sqr();
            }
        }
        s.sqrt()
    }
}

/// Tensor products of {I, X, Y, Z} on `q` qubits (unnormalised, `Tr P†P = 2^q`).
pub fn pauli_basis(q: usize) -> Vec<Mat> {
    let o = C64::new(0.0, 0.0);
    let l = C64::new(1.0, 0.0);
    let i = C64::new(0.0, 1.0);
    let single = [
        Mat::from_row_slice(2, 2, &[l, o, o, l]),
        Mat::from_row_slice(2, 2, &[o, l, l, o]),
        Mat::from_row_slice(2, 2, &[o, -i, i, o]),
        Mat::from_row_slice(2, 2, &[l, o, o, -l]),
    ];
    let mut basis = vec![Mat::from_element(1, 1, l)];
    for _ in 0..q {
        basis = basis.iter().flat_map(|b| single.iter().map(move |s| b.kronecker(s))).collect();
    }
    basis
}

/// Haar-averaged gate fidelity of `channel` against `u_target`,
/// `F̄ = (Σ_k Tr[U P_k† U† E(P_k)] / d + d) / (d(d+1))` over the Pauli basis.
/// Trace-preservation is not assumed; see [`ChannelEstimate::trace_deviation`].
pub fn average_gate_fidelity(channel: &ChannelEstimate, u_target: &Mat) -> Result<f64> {
    let d = channel.dim();
    if u_target.shape() != (d, d) {
        return Err(Error::DimensionMismatch { expected: d, found: u_target.nrows() });
    }
    if !d.is_power_of_two() {
        return Err(Error::Precondition(format!("Pauli basis needs a power-of-two dimension, got {d}")));
    }
    let q = d.trailing_zeros() as usize;
    let ud = u_target.adjoint();
    let sum: C64 = pauli_basis(q)
        .iter()
        .map(|p| (u_target * p.adjoint() * &ud * channel.apply(p)).trace())
        .sum();
    let df = d as f64;
    Ok(((sum.re / df + df) / (df * (df + 1.0))).clamp(0.0, 1.0))
}

/// Mean fidelity over the computational basis inputs only.
pub fn basis_average_fidelity(channel: &ChannelEstimate, u_target: &Mat) -> Result<f64> {
    let d = channel.dim();
    if u_target.shape() != (d, d) {
        return Err(Error::DimensionMismatch { expected: d, found: u_target.nrows() });
    }
    let mut total = 0.0;
    for i in 0..d {
        let target = u_target.column(i).into_owned();
        total += pure_overlap(&channel.images[i * d + i], &target);
    }
    Ok(total / d as f64)
}
