//! Exact complex linear algebra over the small labeled mode space.
//!
//! Everything here works on dense vectors and matrices indexed by a [`Basis`]
//! of optical mode labels. The spaces involved are tiny (three beams plus an
//! optional vacuum slot), so operators are stored row-major in a flat `Vec`.

use std::fmt;

use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

/// Absolute tolerance used by every check in this crate unless a caller
/// passes its own.
pub const DEFAULT_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HilbertError {
    #[error("basis mismatch: {left} vs {right}")]
    BasisMismatch { left: Basis, right: Basis },
    #[error("duplicate mode label `{0}` in basis")]
    DuplicateLabel(ModeLabel),
    #[error("mode `{0}` is not part of the basis")]
    MissingMode(ModeLabel),
    #[error("expected {expected} amplitudes, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("degenerate input: {0}")]
    Degenerate(&'static str),
    #[error("operator is not Hermitian (max residual {residual:e})")]
    NotHermitian { residual: f64 },
    #[error("expectation has imaginary residue {0:e}")]
    ImaginaryResidue(f64),
}

pub type Result<T> = std::result::Result<T, HilbertError>;

/// Optical mode labels. `Vac` is only used as a bookkeeping slot by the
/// weak-source field state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeLabel {
    Vac,
    A,
    B,
    H,
}

impl ModeLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            ModeLabel::Vac => "vac",
            ModeLabel::A => "a",
            ModeLabel::B => "b",
            ModeLabel::H => "h",
        }
    }

    pub fn is_beam(self) -> bool {
        self != ModeLabel::Vac
    }
}

impl fmt::Display for ModeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Ordered list of distinct mode labels. The kets of a basis are
/// orthonormal by construction.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Basis(Vec<ModeLabel>);

impl Basis {
    pub fn new(labels: impl IntoIterator<Item = ModeLabel>) -> Result<Self> {
        let labels: Vec<ModeLabel> = labels.into_iter().collect();
        for (i, l) in labels.iter().enumerate() {
            if labels[..i].contains(l) {
                return Err(HilbertError::DuplicateLabel(*l));
            }
        }
        Ok(Basis(labels))
    }

    /// `{a, b, h}`: the three interferometer beams.
    pub fn beams() -> Self {
        Basis(vec![ModeLabel::A, ModeLabel::B, ModeLabel::H])
    }

    /// `{vac, a, b, h}`: beams plus the vacuum slot of the weak-source state.
    pub fn with_vacuum() -> Self {
        Basis(vec![
            ModeLabel::Vac,
            ModeLabel::A,
            ModeLabel::B,
            ModeLabel::H,
        ])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn labels(&self) -> &[ModeLabel] {
        &self.0
    }

    pub fn index_of(&self, label: ModeLabel) -> Option<usize> {
        self.0.iter().position(|&l| l == label)
    }

    pub fn require(&self, label: ModeLabel) -> Result<usize> {
        self.index_of(label).ok_or(HilbertError::MissingMode(label))
    }

    fn check_same(&self, other: &Basis) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(HilbertError::BasisMismatch {
                left: self.clone(),
                right: other.clone(),
            })
        }
    }
}

impl fmt::Display for Basis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, l) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{l}")?;
        }
        write!(f, "}}")
    }
}

/// Complex amplitudes over a labeled basis.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    basis: Basis,
    amps: Vec<Complex64>,
}

impl StateVector {
    pub fn new(basis: Basis, amps: Vec<Complex64>) -> Result<Self> {
        if amps.len() != basis.dim() {
            return Err(HilbertError::DimensionMismatch {
                expected: basis.dim(),
                got: amps.len(),
            });
        }
        Ok(StateVector { basis, amps })
    }

    pub fn zeros(basis: Basis) -> Self {
        let amps = vec![Complex64::new(0.0, 0.0); basis.dim()];
        StateVector { basis, amps }
    }

    /// Builds a state from `(label, amplitude)` pairs; unmentioned modes are zero.
    pub fn from_pairs(basis: Basis, pairs: &[(ModeLabel, Complex64)]) -> Result<Self> {
        let mut s = StateVector::zeros(basis);
        for &(label, amp) in pairs {
            let i = s.basis.require(label)?;
            s.amps[i] += amp;
        }
        Ok(s)
    }

    /// The basis ket `|label⟩`.
    pub fn ket(basis: Basis, label: ModeLabel) -> Result<Self> {
        StateVector::from_pairs(basis, &[(label, Complex64::new(1.0, 0.0))])
    }

    pub fn basis(&self) -> &Basis {
        &self.basis
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    /// Amplitude on `label`, zero when the label is outside the basis.
    pub fn amplitude(&self, label: ModeLabel) -> Complex64 {
        self.basis
            .index_of(label)
            .map(|i| self.amps[i])
            .unwrap_or_default()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn is_normalized(&self, tol: f64) -> bool {
        (self.norm_sqr() - 1.0).abs() <= tol
    }

    pub fn normalized(&self) -> Result<Self> {
        let n = self.norm_sqr().sqrt();
        if n == 0.0 {
            return Err(HilbertError::Degenerate("cannot normalize the zero vector"));
        }
        Ok(self.scaled(Complex64::new(1.0 / n, 0.0)))
    }

    pub fn scaled(&self, c: Complex64) -> Self {
        StateVector {
            basis: self.basis.clone(),
            amps: self.amps.iter().map(|a| a * c).collect(),
        }
    }

    pub fn add(&self, other: &StateVector) -> Result<Self> {
        self.basis.check_same(&other.basis)?;
        Ok(StateVector {
            basis: self.basis.clone(),
            amps: self
                .amps
                .iter()
                .zip(&other.amps)
                .map(|(x, y)| x + y)
                .collect(),
        })
    }
}

/// `⟨u|v⟩ = Σ conj(u_X) v_X`.
pub fn inner_product(u: &StateVector, v: &StateVector) -> Result<Complex64> {
    u.basis.check_same(&v.basis)?;
    Ok(u.amps.iter().zip(&v.amps).map(|(x, y)| x.conj() * y).sum())
}

/// Dense complex operator on a mode basis, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearOperator {
    basis: Basis,
    data: Vec<Complex64>,
}

impl LinearOperator {
    pub fn zeros(basis: Basis) -> Self {
        let n = basis.dim();
        LinearOperator {
            basis,
            data: vec![Complex64::new(0.0, 0.0); n * n],
        }
    }

    pub fn identity(basis: Basis) -> Self {
        LinearOperator::from_fn(basis, |i, j| {
            if i == j {
                Complex64::new(1.0, 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
    }

    pub fn from_fn(basis: Basis, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let n = basis.dim();
        let mut data = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                data.push(f(i, j));
            }
        }
        LinearOperator { basis, data }
    }

    pub fn basis(&self) -> &Basis {
        &self.basis
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.data[i * self.dim() + j]
    }

    /// Matrix element `⟨row|op|col⟩`.
    pub fn element(&self, row: ModeLabel, col: ModeLabel) -> Result<Complex64> {
        Ok(self.get(self.basis.require(row)?, self.basis.require(col)?))
    }

    pub fn add(&self, other: &LinearOperator) -> Result<Self> {
        self.basis.check_same(&other.basis)?;
        Ok(LinearOperator {
            basis: self.basis.clone(),
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(x, y)| x + y)
                .collect(),
        })
    }

    pub fn sub(&self, other: &LinearOperator) -> Result<Self> {
        self.basis.check_same(&other.basis)?;
        Ok(LinearOperator {
            basis: self.basis.clone(),
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(x, y)| x - y)
                .collect(),
        })
    }

    pub fn scale(&self, c: Complex64) -> Self {
        LinearOperator {
            basis: self.basis.clone(),
            data: self.data.iter().map(|x| x * c).collect(),
        }
    }

    pub fn matmul(&self, other: &LinearOperator) -> Result<Self> {
        self.basis.check_same(&other.basis)?;
        let n = self.dim();
        Ok(LinearOperator::from_fn(self.basis.clone(), |i, j| {
            (0..n).map(|k| self.get(i, k) * other.get(k, j)).sum()
        }))
    }

    pub fn adjoint(&self) -> Self {
        LinearOperator::from_fn(self.basis.clone(), |i, j| self.get(j, i).conj())
    }

    pub fn apply(&self, s: &StateVector) -> Result<StateVector> {
        self.basis.check_same(&s.basis)?;
        let n = self.dim();
        let amps = (0..n)
            .map(|i| (0..n).map(|j| self.get(i, j) * s.amps[j]).sum())
            .collect();
        StateVector::new(self.basis.clone(), amps)
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.dim()).map(|i| self.get(i, i)).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Largest entrywise modulus of `op − op†`.
    pub fn hermitian_residual(&self) -> f64 {
        let n = self.dim();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                worst = worst.max((self.get(i, j) - self.get(j, i).conj()).norm());
            }
        }
        worst
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermitian_residual() <= tol
    }

    /// Strict projector: `P² = P`.
    pub fn is_projector(&self, tol: f64) -> bool {
        self.matmul(self)
            .and_then(|sq| sq.sub(self))
            .map(|d| max_abs(&d) <= tol)
            .unwrap_or(false)
    }

    /// Unnormalized ray weight operator `|v⟩⟨v|`: `P² = (tr P)·P`.
    pub fn is_ray_weight(&self, tol: f64) -> bool {
        let tr = self.trace();
        self.matmul(self)
            .and_then(|sq| sq.sub(&self.scale(tr)))
            .map(|d| max_abs(&d) <= tol)
            .unwrap_or(false)
    }

    /// Copy of the operator restricted to the given labels (rows and columns).
    pub fn restrict(&self, labels: &[ModeLabel]) -> Result<Self> {
        let idx = labels
            .iter()
            .map(|&l| self.basis.require(l))
            .collect::<Result<Vec<_>>>()?;
        let basis = Basis::new(labels.iter().copied())?;
        Ok(LinearOperator::from_fn(basis, |i, j| {
            self.get(idx[i], idx[j])
        }))
    }
}

fn max_abs(op: &LinearOperator) -> f64 {
    op.data.iter().map(|x| x.norm()).fold(0.0, f64::max)
}

/// `|v⟩⟨v|`, or `|v⟩⟨v| / ⟨v|v⟩` when `normalize` is set.
///
/// The unnormalized form is the ray weight convention used for the
/// interfering detector: with unit-modulus coefficients on two modes it has
/// trace 2 and satisfies `P² = 2P` rather than idempotence.
pub fn ray_projector(v: &StateVector, normalize: bool) -> Result<LinearOperator> {
    let norm = v.norm_sqr();
    if norm == 0.0 {
        return Err(HilbertError::Degenerate("ray projector of the zero vector"));
    }
    let op = LinearOperator::from_fn(v.basis.clone(), |i, j| v.amps[i] * v.amps[j].conj());
    Ok(if normalize {
        op.scale(Complex64::new(1.0 / norm, 0.0))
    } else {
        op
    })
}

/// `|label⟩⟨label|` on `basis`.
pub fn mode_projector(basis: &Basis, label: ModeLabel) -> Result<LinearOperator> {
    ray_projector(&StateVector::ket(basis.clone(), label)?, false)
}

pub fn expectation(op: &LinearOperator, s: &StateVector) -> Result<f64> {
    expectation_tol(op, s, DEFAULT_TOL)
}

/// `⟨s|op|s⟩` for Hermitian `op`. The imaginary part must vanish to `tol`
/// and is then dropped.
pub fn expectation_tol(op: &LinearOperator, s: &StateVector, tol: f64) -> Result<f64> {
    let residual = op.hermitian_residual();
    if residual > tol {
        return Err(HilbertError::NotHermitian { residual });
    }
    let value = inner_product(s, &op.apply(s)?)?;
    let scale = s.norm_sqr().max(1.0);
    if value.im.abs() > tol * scale {
        return Err(HilbertError::ImaginaryResidue(value.im));
    }
    Ok(value.re)
}

/// Frobenius norm of `Σ projs − I`, restricted to the beam modes
/// (everything except the vacuum slot). Zero means the set resolves the
/// identity on the beams.
pub fn completeness_deviation(projs: &[LinearOperator]) -> Result<f64> {
    let first = projs
        .first()
        .ok_or(HilbertError::Degenerate("empty operator set"))?;
    let mut sum = LinearOperator::zeros(first.basis.clone());
    for p in projs {
        sum = sum.add(p)?;
    }
    let beams: Vec<ModeLabel> = first
        .basis
        .labels()
        .iter()
        .copied()
        .filter(|l| l.is_beam())
        .collect();
    let restricted = sum.restrict(&beams)?;
    let id = LinearOperator::identity(restricted.basis.clone());
    Ok(restricted.sub(&id)?.frobenius_norm())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_1_SQRT_2, PI};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn psi() -> StateVector {
        StateVector::new(
            Basis::beams(),
            vec![c(0.5, 0.0), c(0.5, 0.0), c(FRAC_1_SQRT_2, 0.0)],
        )
        .unwrap()
    }

    fn pk(phi: f64) -> LinearOperator {
        let v = StateVector::from_pairs(
            Basis::beams(),
            &[
                (ModeLabel::A, Complex64::from_polar(1.0, phi)),
                (ModeLabel::B, c(1.0, 0.0)),
            ],
        )
        .unwrap();
        ray_projector(&v, false).unwrap()
    }

    #[test]
    fn inner_products() {
        let b = Basis::beams();
        let a = StateVector::ket(b.clone(), ModeLabel::A).unwrap();
        let bb = StateVector::ket(b.clone(), ModeLabel::B).unwrap();
        let h = StateVector::ket(b, ModeLabel::H).unwrap();
        assert_eq!(inner_product(&a, &bb).unwrap(), c(0.0, 0.0));
        assert!((inner_product(&psi(), &psi()).unwrap() - c(1.0, 0.0)).norm() < 1e-15);
        assert!((inner_product(&h, &psi()).unwrap() - c(FRAC_1_SQRT_2, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn inner_product_basis_mismatch() {
        let u = StateVector::ket(Basis::beams(), ModeLabel::A).unwrap();
        let v = StateVector::ket(Basis::with_vacuum(), ModeLabel::A).unwrap();
        assert!(matches!(
            inner_product(&u, &v),
            Err(HilbertError::BasisMismatch { .. })
        ));
    }

    #[test]
    fn duplicate_labels_rejected() {
        assert_eq!(
            Basis::new([ModeLabel::A, ModeLabel::A]),
            Err(HilbertError::DuplicateLabel(ModeLabel::A))
        );
    }

    #[test]
    fn ray_projector_conventions() {
        let pl = mode_projector(&Basis::beams(), ModeLabel::A).unwrap();
        assert_eq!(pl.trace(), c(1.0, 0.0));
        assert!(pl.is_projector(DEFAULT_TOL));

        let p = pk(0.7);
        assert!((p.trace() - c(2.0, 0.0)).norm() < 1e-15);
        assert!(p.is_ray_weight(DEFAULT_TOL));
        assert!(!p.is_projector(DEFAULT_TOL));
        assert!(p.is_hermitian(DEFAULT_TOL));

        let h = StateVector::ket(Basis::beams(), ModeLabel::H).unwrap();
        assert_eq!(
            ray_projector(&h, true).unwrap(),
            ray_projector(&h, false).unwrap()
        );
    }

    #[test]
    fn zero_vector_is_degenerate() {
        let z = StateVector::zeros(Basis::beams());
        assert!(matches!(
            ray_projector(&z, false),
            Err(HilbertError::Degenerate(_))
        ));
        assert!(z.normalized().is_err());
    }

    #[test]
    fn expectations_on_reference_state() {
        let b = Basis::beams();
        let pl = mode_projector(&b, ModeLabel::A).unwrap();
        assert!((expectation(&pl, &psi()).unwrap() - 0.25).abs() < 1e-15);
        assert!((expectation(&pk(0.0), &psi()).unwrap() - 1.0).abs() < 1e-15);
        assert!(expectation(&pk(PI), &psi()).unwrap().abs() < 1e-15);
    }

    #[test]
    fn expectation_rejects_non_hermitian() {
        let op = LinearOperator::from_fn(Basis::beams(), |i, j| {
            if i == 0 && j == 1 {
                c(1.0, 0.0)
            } else {
                c(0.0, 0.0)
            }
        });
        assert!(matches!(
            expectation(&op, &psi()),
            Err(HilbertError::NotHermitian { .. })
        ));
    }

    #[test]
    fn completeness_examples() {
        let b = Basis::beams();
        let pl = mode_projector(&b, ModeLabel::A).unwrap();
        let pm = mode_projector(&b, ModeLabel::B).unwrap();
        let pp = mode_projector(&b, ModeLabel::H).unwrap();
        assert!(completeness_deviation(&[pl.clone(), pm.clone(), pp.clone()]).unwrap() < 1e-12);
        assert!(completeness_deviation(&[pk(0.0), pp.clone()]).unwrap() > 0.4);
        let sum = pl.add(&pm).unwrap();
        assert!(completeness_deviation(&[sum, pp]).unwrap() < 1e-12);
        assert!(completeness_deviation(&[]).is_err());
    }

    #[test]
    fn completeness_ignores_vacuum_slot() {
        let b = Basis::with_vacuum();
        let ps: Vec<_> = [ModeLabel::A, ModeLabel::B, ModeLabel::H]
            .iter()
            .map(|&l| mode_projector(&b, l).unwrap())
            .collect();
        assert!(completeness_deviation(&ps).unwrap() < 1e-12);
    }
}
