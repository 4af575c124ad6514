//! Finite-dimensional complex Hilbert spaces over labeled orthonormal bases.
//!
//! Everything here is dense and immutable. A [`Basis`] is identified by its
//! label list (labels and order), so two independently built bases with the
//! same labels are interchangeable.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use thiserror::Error;

/// Complex amplitude type used throughout the crate.
pub type C64 = Complex64;

/// Default absolute tolerance for comparisons.
pub const DEFAULT_TOL: f64 = 1e-10;

/// Norms below this are treated as the zero vector.
pub const ZERO_NORM: f64 = 1e-12;

/// Separator used for composite labels of product bases.
pub const TENSOR_SEP: char = '⊗';

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HilbertError {
    #[error("basis mismatch: expected [{expected}], found [{found}]")]
    BasisMismatch { expected: String, found: String },

    #[error("vector norm is zero (below {ZERO_NORM:e})")]
    ZeroVector,

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("expected {expected} entries, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("basis must have at least one label")]
    EmptyBasis,

    #[error("basis labels must be non-empty")]
    EmptyLabel,

    #[error("duplicate basis label `{0}`")]
    DuplicateLabel(String),

    #[error("label `{0}` is not in the basis")]
    UnknownLabel(String),

    #[error("operator is not square (domain [{domain}], codomain [{codomain}])")]
    NotSquare { domain: String, codomain: String },
}

pub type HilbertResult<T> = Result<T, HilbertError>;

/// An ordered list of distinct labels naming an orthonormal basis.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Basis(Arc<[String]>);

impl Basis {
    pub fn new<I, S>(labels: I) -> HilbertResult<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        if labels.is_empty() {
            return Err(HilbertError::EmptyBasis);
        }
        for (k, label) in labels.iter().enumerate() {
            if label.is_empty() {
                return Err(HilbertError::EmptyLabel);
            }
            if labels[..k].contains(label) {
                return Err(HilbertError::DuplicateLabel(label.clone()));
            }
        }
        Ok(Self(labels.into()))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.0
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.0.iter().position(|l| l == label)
    }

    /// Product basis with labels `x⊗y`, row-major in `(self, other)`.
    pub fn product(&self, other: &Basis) -> Basis {
        let labels: Vec<String> = self
            .0
            .iter()
            .flat_map(|a| other.0.iter().map(move |b| format!("{a}{TENSOR_SEP}{b}")))
            .collect();
        // Unchecked: composite labels can collide when the factors already
        // contain the separator, but indexing stays positional.
        Basis(labels.into())
    }

    fn describe(&self) -> String {
        self.0.join(",")
    }

    fn ensure_same(&self, other: &Basis) -> HilbertResult<()> {
        if self == other {
            Ok(())
        } else {
            Err(HilbertError::BasisMismatch {
                expected: self.describe(),
                found: other.describe(),
            })
        }
    }
}

impl fmt::Debug for Basis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Basis[{}]", self.describe())
    }
}

impl fmt::Display for Basis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{{}}}", self.describe())
    }
}

fn all_finite(values: &[C64]) -> bool {
    values.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

/// A ket over a labeled basis. Normalization is never assumed.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    basis: Basis,
    amps: Vec<C64>,
}

impl StateVector {
    pub fn new(basis: Basis, amps: Vec<C64>) -> HilbertResult<Self> {
        if amps.len() != basis.dim() {
            return Err(HilbertError::DimensionMismatch {
                expected: basis.dim(),
                found: amps.len(),
            });
        }
        if !all_finite(&amps) {
            return Err(HilbertError::NonFinite("state amplitudes"));
        }
        Ok(Self { basis, amps })
    }

    pub fn zero(basis: Basis) -> Self {
        let amps = vec![C64::new(0.0, 0.0); basis.dim()];
        Self { basis, amps }
    }

    /// The basis ket `|label⟩`.
    pub fn basis_ket(basis: &Basis, label: &str) -> HilbertResult<Self> {
        let k = basis
            .index_of(label)
            .ok_or_else(|| HilbertError::UnknownLabel(label.to_owned()))?;
        let mut s = Self::zero(basis.clone());
        s.amps[k] = C64::new(1.0, 0.0);
        Ok(s)
    }

    /// Superposition `Σ c |label⟩`; repeated labels accumulate.
    pub fn from_terms(basis: &Basis, terms: &[(&str, C64)]) -> HilbertResult<Self> {
        let mut s = Self::zero(basis.clone());
        for &(label, c) in terms {
            let k = basis
                .index_of(label)
                .ok_or_else(|| HilbertError::UnknownLabel(label.to_owned()))?;
            s.amps[k] += c;
        }
        if !all_finite(&s.amps) {
            return Err(HilbertError::NonFinite("state amplitudes"));
        }
        Ok(s)
    }

    pub fn basis(&self) -> &Basis {
        &self.basis
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn amplitude(&self, label: &str) -> Option<C64> {
        self.basis.index_of(label).map(|k| self.amps[k])
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn normalize(&self) -> HilbertResult<Self> {
        let n = self.norm();
        if !(n >= ZERO_NORM) {
            return Err(HilbertError::ZeroVector);
        }
        Ok(self.scale(C64::new(1.0 / n, 0.0)))
    }

    pub fn scale(&self, c: C64) -> Self {
        Self {
            basis: self.basis.clone(),
            amps: self.amps.iter().map(|a| a * c).collect(),
        }
    }

    pub fn add(&self, other: &StateVector) -> HilbertResult<Self> {
        self.basis.ensure_same(&other.basis)?;
        Ok(Self {
            basis: self.basis.clone(),
            amps: self
                .amps
                .iter()
                .zip(&other.amps)
                .map(|(a, b)| a + b)
                .collect(),
        })
    }

    /// Copy with the amplitude on `label` set to zero.
    pub fn without(&self, label: &str) -> HilbertResult<Self> {
        let k = self
            .basis
            .index_of(label)
            .ok_or_else(|| HilbertError::UnknownLabel(label.to_owned()))?;
        let mut s = self.clone();
        s.amps[k] = C64::new(0.0, 0.0);
        Ok(s)
    }

    /// Max-entry distance, or `None` when the bases differ.
    pub fn max_abs_diff(&self, other: &StateVector) -> Option<f64> {
        (self.basis == other.basis).then(|| {
            self.amps
                .iter()
                .zip(&other.amps)
                .map(|(a, b)| (a - b).norm())
                .fold(0.0, f64::max)
        })
    }
}

/// A dense linear map between two labeled bases.
///
/// Observables and projectors have `domain == codomain`; a beam splitter
/// maps an arm basis onto a port basis. Entries are row-major with rows
/// indexed by the codomain and columns by the domain.
#[derive(Clone, Debug, PartialEq)]
pub struct OperatorMatrix {
    domain: Basis,
    codomain: Basis,
    entries: Vec<C64>,
}

impl OperatorMatrix {
    pub fn new(domain: Basis, codomain: Basis, entries: Vec<C64>) -> HilbertResult<Self> {
        let expected = domain.dim() * codomain.dim();
        if entries.len() != expected {
            return Err(HilbertError::DimensionMismatch {
                expected,
                found: entries.len(),
            });
        }
        if !all_finite(&entries) {
            return Err(HilbertError::NonFinite("operator entries"));
        }
        Ok(Self {
            domain,
            codomain,
            entries,
        })
    }

    /// Square operator on `basis` from row-major entries.
    pub fn square(basis: Basis, entries: Vec<C64>) -> HilbertResult<Self> {
        Self::new(basis.clone(), basis, entries)
    }

    pub fn from_fn(domain: Basis, codomain: Basis, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let (rows, cols) = (codomain.dim(), domain.dim());
        let entries = (0..rows)
            .flat_map(|r| (0..cols).map(move |c| (r, c)))
            .map(|(r, c)| f(r, c))
            .collect();
        Self {
            domain,
            codomain,
            entries,
        }
    }

    pub fn identity(basis: &Basis) -> Self {
        Self::from_fn(basis.clone(), basis.clone(), |r, c| {
            C64::new(if r == c { 1.0 } else { 0.0 }, 0.0)
        })
    }

    pub fn zeros(domain: Basis, codomain: Basis) -> Self {
        Self::from_fn(domain, codomain, |_, _| C64::new(0.0, 0.0))
    }

    pub fn diagonal(basis: &Basis, diag: &[f64]) -> HilbertResult<Self> {
        if diag.len() != basis.dim() {
            return Err(HilbertError::DimensionMismatch {
                expected: basis.dim(),
                found: diag.len(),
            });
        }
        Ok(Self::from_fn(basis.clone(), basis.clone(), |r, c| {
            C64::new(if r == c { diag[r] } else { 0.0 }, 0.0)
        }))
    }

    /// Image of `|label⟩` under this map, i.e. the column for `label`.
    pub fn column(&self, label: &str) -> HilbertResult<StateVector> {
        let c = self
            .domain
            .index_of(label)
            .ok_or_else(|| HilbertError::UnknownLabel(label.to_owned()))?;
        let cols = self.cols();
        let amps = (0..self.rows())
            .map(|r| self.entries[r * cols + c])
            .collect();
        StateVector::new(self.codomain.clone(), amps)
    }

    pub fn domain(&self) -> &Basis {
        &self.domain
    }

    pub fn codomain(&self) -> &Basis {
        &self.codomain
    }

    /// The basis of a square operator.
    pub fn basis(&self) -> HilbertResult<&Basis> {
        if self.is_square() {
            Ok(&self.domain)
        } else {
            Err(HilbertError::NotSquare {
                domain: self.domain.describe(),
                codomain: self.codomain.describe(),
            })
        }
    }

    pub fn is_square(&self) -> bool {
        self.domain == self.codomain
    }

    pub fn rows(&self) -> usize {
        self.codomain.dim()
    }

    pub fn cols(&self) -> usize {
        self.domain.dim()
    }

    pub fn entries(&self) -> &[C64] {
        &self.entries
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.entries[row * self.cols() + col]
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.codomain.clone(), self.domain.clone(), |r, c| {
            self.get(c, r).conj()
        })
    }

    /// `self ∘ rhs`: apply `rhs` first.
    pub fn compose(&self, rhs: &OperatorMatrix) -> HilbertResult<Self> {
        self.domain.ensure_same(&rhs.codomain)?;
        let inner = self.cols();
        Ok(Self::from_fn(
            rhs.domain.clone(),
            self.codomain.clone(),
            |r, c| (0..inner).map(|k| self.get(r, k) * rhs.get(k, c)).sum(),
        ))
    }

    pub fn add(&self, rhs: &OperatorMatrix) -> HilbertResult<Self> {
        self.zip_with(rhs, |a, b| a + b)
    }

    pub fn sub(&self, rhs: &OperatorMatrix) -> HilbertResult<Self> {
        self.zip_with(rhs, |a, b| a - b)
    }

    fn zip_with(&self, rhs: &OperatorMatrix, f: impl Fn(C64, C64) -> C64) -> HilbertResult<Self> {
        self.domain.ensure_same(&rhs.domain)?;
        self.codomain.ensure_same(&rhs.codomain)?;
        Ok(Self {
            domain: self.domain.clone(),
            codomain: self.codomain.clone(),
            entries: self
                .entries
                .iter()
                .zip(&rhs.entries)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn scale(&self, c: C64) -> Self {
        Self {
            domain: self.domain.clone(),
            codomain: self.codomain.clone(),
            entries: self.entries.iter().map(|a| a * c).collect(),
        }
    }

    pub fn trace(&self) -> C64 {
        (0..self.rows().min(self.cols()))
            .map(|k| self.get(k, k))
            .sum()
    }

    /// Max-entry distance, or `None` when shapes or bases differ.
    pub fn max_abs_diff(&self, other: &OperatorMatrix) -> Option<f64> {
        (self.domain == other.domain && self.codomain == other.codomain).then(|| {
            self.entries
                .iter()
                .zip(&other.entries)
                .map(|(a, b)| (a - b).norm())
                .fold(0.0, f64::max)
        })
    }

    /// Largest `|Oᵢⱼ − conj(Oⱼᵢ)|`; infinite for non-square operators.
    pub fn hermitian_deviation(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let n = self.rows();
        let mut dev = 0.0_f64;
        for r in 0..n {
            for c in r..n {
                dev = dev.max((self.get(r, c) - self.get(c, r).conj()).norm());
            }
        }
        dev
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermitian_deviation() <= tol
    }
}

/// `⟨bra|ket⟩`, conjugate-linear in `bra`.
pub fn inner(bra: &StateVector, ket: &StateVector) -> HilbertResult<C64> {
    bra.basis.ensure_same(&ket.basis)?;
    Ok(bra
        .amps
        .iter()
        .zip(&ket.amps)
        .map(|(b, k)| b.conj() * k)
        .sum())
}

pub fn tensor(a: &StateVector, b: &StateVector) -> StateVector {
    let amps = a
        .amps
        .iter()
        .flat_map(|x| b.amps.iter().map(move |y| x * y))
        .collect();
    StateVector {
        basis: a.basis.product(&b.basis),
        amps,
    }
}

/// Kronecker product, with labels matching [`tensor`].
pub fn tensor_op(a: &OperatorMatrix, b: &OperatorMatrix) -> OperatorMatrix {
    let (br, bc) = (b.rows(), b.cols());
    OperatorMatrix::from_fn(
        a.domain.product(&b.domain),
        a.codomain.product(&b.codomain),
        |r, c| a.get(r / br, c / bc) * b.get(r % br, c % bc),
    )
}

pub fn apply(op: &OperatorMatrix, s: &StateVector) -> HilbertResult<StateVector> {
    op.domain.ensure_same(&s.basis)?;
    let cols = op.cols();
    let amps = op
        .entries
        .chunks_exact(cols)
        .map(|row| row.iter().zip(&s.amps).map(|(m, a)| m * a).sum())
        .collect();
    Ok(StateVector {
        basis: op.codomain.clone(),
        amps,
    })
}

/// `|s⟩⟨s| / ⟨s|s⟩`.
pub fn projector_onto(s: &StateVector) -> HilbertResult<OperatorMatrix> {
    let n2 = s.norm_sqr();
    if !(n2.sqrt() >= ZERO_NORM) {
        return Err(HilbertError::ZeroVector);
    }
    Ok(OperatorMatrix::from_fn(
        s.basis.clone(),
        s.basis.clone(),
        |r, c| s.amps[r] * s.amps[c].conj() / n2,
    ))
}

/// True iff `U†U` is within `tol` of the identity, entrywise, and `U` maps
/// between spaces of equal dimension.
pub fn is_unitary(op: &OperatorMatrix, tol: f64) -> bool {
    unitarity_deviation(op) <= tol
}

/// Max-entry deviation of `U†U` from the identity; infinite if `U` is not
/// dimensionally square.
pub fn unitarity_deviation(op: &OperatorMatrix) -> f64 {
    if op.rows() != op.cols() {
        return f64::INFINITY;
    }
    let n = op.cols();
    let mut dev = 0.0_f64;
    for i in 0..n {
        for j in 0..n {
            let g: C64 = (0..n).map(|k| op.get(k, i).conj() * op.get(k, j)).sum();
            let target = if i == j { 1.0 } else { 0.0 };
            dev = dev.max((g - target).norm());
        }
    }
    dev
}
