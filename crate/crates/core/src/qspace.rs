//! Operators and states on the composite space of truncated bosonic modes
//! (cavity, two collective ensemble modes) and the two-level charge qubit.
//!
//! Basis conventions used everywhere in the crate:
//!
//! * factors appear in the fixed order `(cavity, ensemble1, ensemble2, cpb)`;
//!   a layout may omit factors but never reorder them;
//! * composite indices are row-major over the factor levels, so the last
//!   factor varies fastest (the usual Kronecker-product convention);
//! * boson factors use Fock levels `0..dim`;
//! * the charge qubit uses the basis `(|g>, |e>)`, i.e. level 0 is `|g>`.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

pub(crate) const ZERO: C64 = C64::new(0.0, 0.0);
pub(crate) const ONE: C64 = C64::new(1.0, 0.0);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FactorLabel {
    Cavity,
    Ensemble1,
    Ensemble2,
    Cpb,
}

impl FactorLabel {
    pub const ALL: [FactorLabel; 4] = [
        FactorLabel::Cavity,
        FactorLabel::Ensemble1,
        FactorLabel::Ensemble2,
        FactorLabel::Cpb,
    ];

    /// Ensemble factor by 1-based index.
    pub fn ensemble(index: usize) -> Option<Self> {
        match index {
            1 => Some(FactorLabel::Ensemble1),
            2 => Some(FactorLabel::Ensemble2),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            FactorLabel::Cavity => "cavity",
            FactorLabel::Ensemble1 => "ensemble1",
            FactorLabel::Ensemble2 => "ensemble2",
            FactorLabel::Cpb => "cpb",
        }
    }
}

impl fmt::Display for FactorLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Ordered list of labelled tensor factors.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SpaceLayout {
    factors: Vec<(FactorLabel, usize)>,
    total_dim: usize,
}

impl SpaceLayout {
    pub fn new(factors: Vec<(FactorLabel, usize)>) -> Result<Self> {
        if factors.is_empty() {
            return Err(Error::InvalidLayout("no factors".into()));
        }
        for w in factors.windows(2) {
            if w[0].0 >= w[1].0 {
                return Err(Error::InvalidLayout(format!(
                    "factors must follow (cavity, ensemble1, ensemble2, cpb) order without repeats; got {} before {}",
                    w[0].0, w[1].0
                )));
            }
        }
        for &(label, dim) in &factors {
            if dim < 2 {
                return Err(Error::InvalidDimension { dim });
            }
            if label == FactorLabel::Cpb && dim != 2 {
                return Err(Error::InvalidLayout(format!("cpb dimension must be 2, got {dim}")));
            }
        }
        let total_dim = factors.iter().map(|&(_, d)| d).product();
        Ok(SpaceLayout { factors, total_dim })
    }

    /// Full four-factor layout.
    pub fn standard(cavity_dim: usize, ensemble_dim: usize) -> Result<Self> {
        Self::new(vec![
            (FactorLabel::Cavity, cavity_dim),
            (FactorLabel::Ensemble1, ensemble_dim),
            (FactorLabel::Ensemble2, ensemble_dim),
            (FactorLabel::Cpb, 2),
        ])
    }

    pub fn factors(&self) -> &[(FactorLabel, usize)] {
        &self.factors
    }

    pub fn total_dim(&self) -> usize {
        self.total_dim
    }

    pub fn position(&self, label: FactorLabel) -> Option<usize> {
        self.factors.iter().position(|&(l, _)| l == label)
    }

    pub fn contains(&self, label: FactorLabel) -> bool {
        self.position(label).is_some()
    }

    pub fn dim_of(&self, label: FactorLabel) -> Result<usize> {
        self.position(label)
            .map(|p| self.factors[p].1)
            .ok_or(Error::UnknownFactor(label))
    }

    /// Composite index of a product basis state given per-factor levels.
    pub fn index(&self, levels: &[usize]) -> Result<usize> {
        if levels.len() != self.factors.len() {
            return Err(Error::DimensionMismatch { expected: self.factors.len(), found: levels.len() });
        }
        let mut idx = 0;
        for (&lvl, &(_, dim)) in levels.iter().zip(&self.factors) {
            if lvl >= dim {
                return Err(Error::DimensionMismatch { expected: dim, found: lvl });
            }
            idx = idx * dim + lvl;
        }
        Ok(idx)
    }

    /// Index of the product state with the listed factors set and all others at level 0.
    pub fn index_of(&self, levels: &[(FactorLabel, usize)]) -> Result<usize> {
        let mut full = vec![0; self.factors.len()];
        for &(label, lvl) in levels {
            let p = self.position(label).ok_or(Error::UnknownFactor(label))?;
            full[p] = lvl;
        }
        self.index(&full)
    }

    pub fn levels(&self, mut index: usize) -> Vec<usize> {
        let mut out = vec![0; self.factors.len()];
        for (slot, &(_, dim)) in out.iter_mut().zip(&self.factors).rev() {
            *slot = index % dim;
            index /= dim;
        }
        out
    }

    /// Number of excitations (photons + ensemble quanta + cpb excitation) in a basis state.
    pub fn excitations(&self, index: usize) -> usize {
        self.levels(index).iter().sum()
    }
}

/// Operator on a single factor, not yet tied to a layout.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalOp {
    matrix: DMatrix<C64>,
}

impl LocalOp {
    pub fn from_matrix(matrix: DMatrix<C64>) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::DimensionMismatch { expected: matrix.nrows(), found: matrix.ncols() });
        }
        Ok(LocalOp { matrix })
    }

    pub fn identity(dim: usize) -> Self {
        LocalOp { matrix: DMatrix::identity(dim, dim) }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn adjoint(&self) -> Self {
        LocalOp { matrix: self.matrix.adjoint() }
    }

    pub fn mul(&self, other: &LocalOp) -> Self {
        LocalOp { matrix: &self.matrix * &other.matrix }
    }
}

/// Truncated lowering operator with `<k-1|a|k> = sqrt(k)`.
pub fn boson_annihilator(dim: usize) -> Result<LocalOp> {
    if dim < 2 {
        return Err(Error::InvalidDimension { dim });
    }
    let mut m = DMatrix::zeros(dim, dim);
    for k in 1..dim {
        m[(k - 1, k)] = C64::new((k as f64).sqrt(), 0.0);
    }
    Ok(LocalOp { matrix: m })
}

pub fn number_operator(dim: usize) -> Result<LocalOp> {
    let a = boson_annihilator(dim)?;
    Ok(a.adjoint().mul(&a))
}

/// Charge-qubit operators `(|g><e|, |e><e|)` in the `(|g>, |e>)` basis.
pub fn two_level_ops() -> (LocalOp, LocalOp) {
    let mut lower = DMatrix::zeros(2, 2);
    lower[(0, 1)] = ONE;
    let mut excited = DMatrix::zeros(2, 2);
    excited[(1, 1)] = ONE;
    (LocalOp { matrix: lower }, LocalOp { matrix: excited })
}

/// Dense operator on a composite layout.
#[derive(Clone, Debug, PartialEq)]
pub struct Operator {
    layout: SpaceLayout,
    matrix: DMatrix<C64>,
}

impl Operator {
    pub fn from_matrix(layout: SpaceLayout, matrix: DMatrix<C64>) -> Result<Self> {
        let n = layout.total_dim();
        if matrix.nrows() != n || matrix.ncols() != n {
            return Err(Error::DimensionMismatch { expected: n, found: matrix.nrows().max(matrix.ncols()) });
        }
        Ok(Operator { layout, matrix })
    }

    pub fn zeros(layout: &SpaceLayout) -> Self {
        let n = layout.total_dim();
        Operator { layout: layout.clone(), matrix: DMatrix::zeros(n, n) }
    }

    pub fn identity(layout: &SpaceLayout) -> Self {
        let n = layout.total_dim();
        Operator { layout: layout.clone(), matrix: DMatrix::identity(n, n) }
    }

    pub fn layout(&self) -> &SpaceLayout {
        &self.layout
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.matrix
    }

    pub fn adjoint(&self) -> Self {
        Operator { layout: self.layout.clone(), matrix: self.matrix.adjoint() }
    }

    pub fn scaled(&self, factor: C64) -> Self {
        Operator { layout: self.layout.clone(), matrix: &self.matrix * factor }
    }

    pub fn plus(&self, other: &Operator) -> Self {
        debug_assert_eq!(self.layout, other.layout);
        Operator { layout: self.layout.clone(), matrix: &self.matrix + &other.matrix }
    }

    pub fn times(&self, other: &Operator) -> Self {
        debug_assert_eq!(self.layout, other.layout);
        Operator { layout: self.layout.clone(), matrix: &self.matrix * &other.matrix }
    }

    pub fn commutator(&self, other: &Operator) -> Self {
        debug_assert_eq!(self.layout, other.layout);
        let m = &self.matrix * &other.matrix - &other.matrix * &self.matrix;
        Operator { layout: self.layout.clone(), matrix: m }
    }

    pub fn frobenius_norm(&self) -> f64 {
        frobenius(&self.matrix)
    }

    /// Largest singular value.
    pub fn operator_norm(&self) -> f64 {
        self.matrix
            .clone()
            .singular_values()
            .iter()
            .cloned()
            .fold(0.0, f64::max)
    }

    /// Hermiticity to relative tolerance `rel_tol` (Frobenius norm).
    pub fn is_hermitian(&self, rel_tol: f64) -> bool {
        let diff = frobenius(&(&self.matrix - self.matrix.adjoint()));
        diff <= rel_tol * self.frobenius_norm().max(f64::MIN_POSITIVE)
    }

    pub fn apply(&self, ket: &Ket) -> Ket {
        Ket { layout: ket.layout.clone(), amplitudes: &self.matrix * &ket.amplitudes }
    }

    /// `<psi|O|psi>` (real part; exact for Hermitian `O`).
    pub fn expectation(&self, ket: &Ket) -> f64 {
        ket.amplitudes.dotc(&(&self.matrix * &ket.amplitudes)).re
    }

    /// `Tr(O rho)` (real part).
    pub fn expectation_density(&self, rho: &DensityMatrix) -> f64 {
        trace_product(&self.matrix, &rho.matrix).re
    }
}

pub(crate) fn frobenius(m: &DMatrix<C64>) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// `Tr(A B)` without forming the product.
pub(crate) fn trace_product(a: &DMatrix<C64>, b: &DMatrix<C64>) -> C64 {
    let n = a.nrows();
    let mut acc = ZERO;
    for i in 0..n {
        for k in 0..n {
            acc += a[(i, k)] * b[(k, i)];
        }
    }
    acc
}

/// Embed a single-factor operator: `1 ⊗ … ⊗ op ⊗ … ⊗ 1` in layout order.
pub fn embed(op: &LocalOp, label: FactorLabel, layout: &SpaceLayout) -> Result<Operator> {
    let pos = layout.position(label).ok_or(Error::UnknownFactor(label))?;
    let dim = layout.factors()[pos].1;
    if op.dim() != dim {
        return Err(Error::DimensionMismatch { expected: dim, found: op.dim() });
    }
    let left: usize = layout.factors()[..pos].iter().map(|&(_, d)| d).product();
    let right: usize = layout.factors()[pos + 1..].iter().map(|&(_, d)| d).product();
    let m = DMatrix::<C64>::identity(left, left)
        .kronecker(&op.matrix)
        .kronecker(&DMatrix::<C64>::identity(right, right));
    Ok(Operator { layout: layout.clone(), matrix: m })
}

/// `Σ_i m_i†m_i + c†c + |e><e|`; requires all four factors.
pub fn total_excitation(layout: &SpaceLayout) -> Result<Operator> {
    for label in FactorLabel::ALL {
        if !layout.contains(label) {
            return Err(Error::UnknownFactor(label));
        }
    }
    excitation_number(layout)
}

/// Excitation-number operator over whichever factors the layout has.
pub fn excitation_number(layout: &SpaceLayout) -> Result<Operator> {
    let n = layout.total_dim();
    let diag = DVector::from_iterator(n, (0..n).map(|i| C64::new(layout.excitations(i) as f64, 0.0)));
    Operator::from_matrix(layout.clone(), DMatrix::from_diagonal(&diag))
}

#[derive(Clone, Debug, PartialEq)]
pub struct Ket {
    layout: SpaceLayout,
    amplitudes: DVector<C64>,
}

impl Ket {
    pub fn from_amplitudes(layout: SpaceLayout, amplitudes: DVector<C64>) -> Result<Self> {
        if amplitudes.len() != layout.total_dim() {
            return Err(Error::DimensionMismatch { expected: layout.total_dim(), found: amplitudes.len() });
        }
        Ok(Ket { layout, amplitudes })
    }

    /// Product basis state; unlisted factors are in their ground level.
    pub fn basis(layout: &SpaceLayout, levels: &[(FactorLabel, usize)]) -> Result<Self> {
        let idx = layout.index_of(levels)?;
        let mut amps = DVector::zeros(layout.total_dim());
        amps[idx] = ONE;
        Ok(Ket { layout: layout.clone(), amplitudes: amps })
    }

    pub fn vacuum(layout: &SpaceLayout) -> Self {
        let mut amps = DVector::zeros(layout.total_dim());
        amps[0] = ONE;
        Ket { layout: layout.clone(), amplitudes: amps }
    }

    pub fn layout(&self) -> &SpaceLayout {
        &self.layout
    }

    pub fn amplitudes(&self) -> &DVector<C64> {
        &self.amplitudes
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.norm()
    }

    pub fn normalized(mut self) -> Result<Self> {
        let n = self.norm();
        if n == 0.0 || !n.is_finite() {
            return Err(Error::InvalidState("cannot normalize a zero or non-finite ket".into()));
        }
        self.amplitudes /= C64::new(n, 0.0);
        Ok(self)
    }

    pub fn check_normalized(&self, tol: f64) -> Result<()> {
        let n = self.norm();
        if (n - 1.0).abs() > tol {
            return Err(Error::InvalidState(format!("ket norm {n} deviates from 1")));
        }
        Ok(())
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &Ket) -> C64 {
        self.amplitudes.dotc(&other.amplitudes)
    }

    pub fn plus(&self, other: &Ket) -> Ket {
        Ket { layout: self.layout.clone(), amplitudes: &self.amplitudes + &other.amplitudes }
    }

    pub fn scaled(&self, factor: C64) -> Ket {
        Ket { layout: self.layout.clone(), amplitudes: &self.amplitudes * factor }
    }

    pub fn to_density(&self) -> DensityMatrix {
        DensityMatrix {
            layout: self.layout.clone(),
            matrix: &self.amplitudes * self.amplitudes.adjoint(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    layout: SpaceLayout,
    matrix: DMatrix<C64>,
}

impl DensityMatrix {
    /// Wraps a matrix without checking physicality; see [`DensityMatrix::validate`].
    pub fn from_matrix(layout: SpaceLayout, matrix: DMatrix<C64>) -> Result<Self> {
        let n = layout.total_dim();
        if matrix.nrows() != n || matrix.ncols() != n {
            return Err(Error::DimensionMismatch { expected: n, found: matrix.nrows() });
        }
        Ok(DensityMatrix { layout, matrix })
    }

    pub fn layout(&self) -> &SpaceLayout {
        &self.layout
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn trace(&self) -> C64 {
        self.matrix.trace()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        hermitian_part(&self.matrix)
            .symmetric_eigenvalues()
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min)
    }

    /// Hermitian, unit trace (1e-10) and eigenvalues above -1e-9.
    pub fn validate(&self) -> Result<()> {
        let herm = frobenius(&(&self.matrix - self.matrix.adjoint()));
        if herm > 1e-10 * frobenius(&self.matrix).max(1.0) {
            return Err(Error::InvalidState(format!("density matrix not Hermitian (deviation {herm:.3e})")));
        }
        let tr = self.trace();
        if (tr.re - 1.0).abs() > 1e-10 || tr.im.abs() > 1e-10 {
            return Err(Error::InvalidState(format!("density matrix trace {tr} is not 1")));
        }
        let min_eig = self.min_eigenvalue();
        if min_eig < -1e-9 {
            return Err(Error::InvalidState(format!("density matrix has eigenvalue {min_eig:.3e}")));
        }
        Ok(())
    }

    /// Population of a single basis state.
    pub fn population(&self, index: usize) -> f64 {
        self.matrix[(index, index)].re
    }

    /// Reduced matrix on the `keep` factors (kept in layout order).
    pub fn partial_trace(&self, keep: &[FactorLabel]) -> Result<DMatrix<C64>> {
        partial_trace(&self.layout, &self.matrix, keep)
    }

    /// Half the trace norm of the difference.
    pub fn trace_distance(&self, other: &DensityMatrix) -> f64 {
        let diff = hermitian_part(&(&self.matrix - &other.matrix));
        0.5 * diff.symmetric_eigenvalues().iter().map(|x| x.abs()).sum::<f64>()
    }
}

pub(crate) fn hermitian_part(m: &DMatrix<C64>) -> DMatrix<C64> {
    (m + m.adjoint()) * C64::new(0.5, 0.0)
}

pub(crate) fn partial_trace(
    layout: &SpaceLayout,
    matrix: &DMatrix<C64>,
    keep: &[FactorLabel],
) -> Result<DMatrix<C64>> {
    for &label in keep {
        if !layout.contains(label) {
            return Err(Error::UnknownFactor(label));
        }
    }
    let kept: Vec<usize> = layout
        .factors()
        .iter()
        .enumerate()
        .filter(|(_, (l, _))| keep.contains(l))
        .map(|(p, _)| p)
        .collect();
    let kept_dims: Vec<usize> = kept.iter().map(|&p| layout.factors()[p].1).collect();
    let out_dim: usize = kept_dims.iter().product();
    let n = layout.total_dim();
    let levels: Vec<Vec<usize>> = (0..n).map(|i| layout.levels(i)).collect();
    let reduced_index = |lv: &[usize]| kept.iter().zip(&kept_dims).fold(0, |acc, (&p, &d)| acc * d + lv[p]);
    let same_traced = |a: &[usize], b: &[usize]| {
        a.iter().zip(b).enumerate().all(|(p, (x, y))| kept.contains(&p) || x == y)
    };
    let mut out = DMatrix::zeros(out_dim, out_dim);
    for i in 0..n {
        for j in 0..n {
            if same_traced(&levels[i], &levels[j]) {
                out[(reduced_index(&levels[i]), reduced_index(&levels[j]))] += matrix[(i, j)];
            }
        }
    }
    Ok(out)
}

/// Basis states with at most `cap` excitations. Every Hamiltonian built by
/// the model conserves the excitation number and the collapse operators never
/// raise it, so this subspace is invariant under the full dynamics.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExcitationSubspace {
    full_dim: usize,
    indices: Vec<usize>,
}

impl ExcitationSubspace {
    pub fn new(layout: &SpaceLayout, cap: usize) -> Self {
        let indices = (0..layout.total_dim()).filter(|&i| layout.excitations(i) <= cap).collect();
        ExcitationSubspace { full_dim: layout.total_dim(), indices }
    }

    pub fn dim(&self) -> usize {
        self.indices.len()
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn restrict_matrix(&self, m: &DMatrix<C64>) -> DMatrix<C64> {
        let k = self.indices.len();
        DMatrix::from_fn(k, k, |i, j| m[(self.indices[i], self.indices[j])])
    }

    pub fn restrict_vector(&self, v: &DVector<C64>) -> DVector<C64> {
        DVector::from_iterator(self.indices.len(), self.indices.iter().map(|&i| v[i]))
    }

    pub fn embed_matrix(&self, m: &DMatrix<C64>) -> DMatrix<C64> {
        let mut out = DMatrix::zeros(self.full_dim, self.full_dim);
        for (a, &i) in self.indices.iter().enumerate() {
            for (b, &j) in self.indices.iter().enumerate() {
                out[(i, j)] = m[(a, b)];
            }
        }
        out
    }

    pub fn embed_vector(&self, v: &DVector<C64>) -> DVector<C64> {
        let mut out = DVector::zeros(self.full_dim);
        for (a, &i) in self.indices.iter().enumerate() {
            out[i] = v[a];
        }
        out
    }

    /// Weight of `m` outside the subspace block (Frobenius).
    pub fn outside_weight(&self, m: &DMatrix<C64>) -> f64 {
        let inside: f64 = self
            .indices
            .iter()
            .flat_map(|&i| self.indices.iter().map(move |&j| (i, j)))
            .map(|(i, j)| m[(i, j)].norm_sqr())
            .sum();
        (m.iter().map(|z| z.norm_sqr()).sum::<f64>() - inside).max(0.0).sqrt()
    }
}
