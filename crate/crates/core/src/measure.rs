//! Measurement rules for pre- and post-selected systems.
//!
//! Given a pre-selected `|in⟩`, a post-selected `|f⟩` and the unitary `U`
//! that carries the system from the intermediate time to the post-selection,
//! this module computes
//!
//! * weak values `⟨f|U·O|in⟩ / ⟨f|U|in⟩`,
//! * Born-rule probabilities and mean values for a single state,
//! * ABL conditional probabilities `|⟨f|U·Pᵢ|in⟩|² / Σⱼ |⟨f|U·Pⱼ|in⟩|²`,
//! * the conversions between a projector's weak value and its ABL
//!   probability.

use std::fmt;

use thiserror::Error;

use crate::eigen;
use crate::hilbert::{
    self, apply, inner, unitarity_deviation, Basis, HilbertError, OperatorMatrix, StateVector, C64,
    DEFAULT_TOL,
};

/// Threshold on `|⟨f|U|in⟩|` (unit-normalized states) below which the
/// post-selection is treated as orthogonal to the evolved pre-selection.
pub const POST_SELECTION_EPS: f64 = 1e-12;

/// Eigenvalues closer than this are merged into one eigenspace.
pub const EIGEN_MERGE_GAP: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MeasureError {
    #[error(transparent)]
    Hilbert(#[from] HilbertError),

    #[error("post-selected state is orthogonal to the evolved pre-selected state (|<f|U|in>| = {overlap:e}); weak value undefined")]
    PostSelectionOrthogonal { overlap: f64 },

    #[error("no intermediate outcome connects the pre- and post-selected states")]
    NoConsistentHistory,

    #[error("operator is not Hermitian (max deviation {deviation:e})")]
    NotHermitian { deviation: f64 },

    #[error("evolution is not unitary (max deviation {deviation:e})")]
    NotUnitary { deviation: f64 },

    #[error("both weak-value magnitudes vanish")]
    DegenerateInput,

    #[error("probability {0} is outside [0, 1]")]
    ProbabilityOutOfRange(f64),

    #[error("invalid spectral data: {0}")]
    InvalidSpectrum(String),
}

impl MeasureError {
    /// Stable machine-readable code, used for error markers in reports.
    pub fn code(&self) -> &'static str {
        match self {
            Self::Hilbert(HilbertError::ZeroVector) => "zero_vector",
            Self::Hilbert(HilbertError::BasisMismatch { .. }) => "basis_mismatch",
            Self::Hilbert(_) => "hilbert",
            Self::PostSelectionOrthogonal { .. } => "post_selection_orthogonal",
            Self::NoConsistentHistory => "no_consistent_history",
            Self::NotHermitian { .. } => "not_hermitian",
            Self::NotUnitary { .. } => "not_unitary",
            Self::DegenerateInput => "degenerate_input",
            Self::ProbabilityOutOfRange(_) => "probability_out_of_range",
            Self::InvalidSpectrum(_) => "invalid_spectrum",
        }
    }
}

pub type MeasureResult<T> = Result<T, MeasureError>;

/// Eigenvalue/projector pairs of a Hermitian observable.
///
/// Construction checks that the projectors are Hermitian, idempotent,
/// mutually orthogonal and complete, and that eigenvalues are distinct.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralData {
    basis: Basis,
    pairs: Vec<(f64, OperatorMatrix)>,
}

impl SpectralData {
    pub fn new(pairs: Vec<(f64, OperatorMatrix)>) -> MeasureResult<Self> {
        let invalid = |m: String| Err(MeasureError::InvalidSpectrum(m));
        let Some((_, first)) = pairs.first() else {
            return invalid("no eigenspaces".into());
        };
        let basis = first.basis()?.clone();
        let tol = DEFAULT_TOL;
        let mut total = OperatorMatrix::zeros(basis.clone(), basis.clone());

        for (i, (value, p)) in pairs.iter().enumerate() {
            if !value.is_finite() {
                return invalid(format!("eigenvalue #{i} is not finite"));
            }
            if p.domain() != &basis || p.codomain() != &basis {
                return Err(HilbertError::BasisMismatch {
                    expected: basis.labels().join(","),
                    found: p.codomain().labels().join(","),
                }
                .into());
            }
            if !p.is_hermitian(tol) {
                return invalid(format!("projector for {value} is not Hermitian"));
            }
            if p.compose(p)?.max_abs_diff(p).unwrap_or(f64::INFINITY) > tol {
                return invalid(format!("projector for {value} is not idempotent"));
            }
            for (other_value, q) in &pairs[..i] {
                if other_value == value {
                    return invalid(format!("eigenvalue {value} repeated"));
                }
                let zero = OperatorMatrix::zeros(basis.clone(), basis.clone());
                if p.compose(q)?.max_abs_diff(&zero).unwrap_or(f64::INFINITY) > tol {
                    return invalid(format!("projectors for {other_value} and {value} overlap"));
                }
            }
            total = total.add(p)?;
        }
        if total
            .max_abs_diff(&OperatorMatrix::identity(&basis))
            .unwrap_or(f64::INFINITY)
            > tol
        {
            return invalid("projectors do not sum to the identity".into());
        }
        Ok(Self { basis, pairs })
    }

    /// Two-outcome data `{1: P, 0: I − P}` for a projector `P`. A zero-rank
    /// side (P = 0 or P = I) is dropped.
    pub fn for_projector(p: &OperatorMatrix) -> MeasureResult<Self> {
        let basis = p.basis()?.clone();
        let complement = OperatorMatrix::identity(&basis).sub(p)?;
        let pairs = [(1.0, p.clone()), (0.0, complement)]
            .into_iter()
            .filter(|(_, q)| q.trace().re > 0.5)
            .collect();
        Self::new(pairs)
    }

    /// The single-outcome data `{1: I}`.
    pub fn trivial(basis: &Basis) -> Self {
        Self {
            basis: basis.clone(),
            pairs: vec![(1.0, OperatorMatrix::identity(basis))],
        }
    }

    pub fn basis(&self) -> &Basis {
        &self.basis
    }

    pub fn pairs(&self) -> &[(f64, OperatorMatrix)] {
        &self.pairs
    }

    pub fn eigenvalues(&self) -> impl Iterator<Item = f64> + '_ {
        self.pairs.iter().map(|(v, _)| *v)
    }

    /// `Σ oₖ Pₖ`.
    pub fn reconstruct(&self) -> OperatorMatrix {
        self.pairs.iter().fold(
            OperatorMatrix::zeros(self.basis.clone(), self.basis.clone()),
            |acc, (v, p)| acc.add(&p.scale(C64::new(*v, 0.0))).expect("same basis"),
        )
    }
}

/// A pre-selected state, a post-selected state and the evolution between the
/// intermediate time and the post-selection.
///
/// Both states are stored unit-normalized. The evolution maps the pre-state's
/// basis onto the post-state's basis; with the default identity evolution
/// both share one basis.
#[derive(Clone, Debug, PartialEq)]
pub struct PrePost {
    pre: StateVector,
    post: StateVector,
    evolution: OperatorMatrix,
}

impl PrePost {
    pub fn new(pre: &StateVector, post: &StateVector) -> MeasureResult<Self> {
        let evolution = OperatorMatrix::identity(pre.basis());
        Self::with_evolution(pre, post, evolution)
    }

    pub fn with_evolution(
        pre: &StateVector,
        post: &StateVector,
        evolution: OperatorMatrix,
    ) -> MeasureResult<Self> {
        if evolution.domain() != pre.basis() {
            return Err(HilbertError::BasisMismatch {
                expected: evolution.domain().labels().join(","),
                found: pre.basis().labels().join(","),
            }
            .into());
        }
        if evolution.codomain() != post.basis() {
            return Err(HilbertError::BasisMismatch {
                expected: evolution.codomain().labels().join(","),
                found: post.basis().labels().join(","),
            }
            .into());
        }
        let deviation = unitarity_deviation(&evolution);
        if !(deviation <= DEFAULT_TOL) {
            return Err(MeasureError::NotUnitary { deviation });
        }
        Ok(Self {
            pre: pre.normalize()?,
            post: post.normalize()?,
            evolution,
        })
    }

    pub fn pre(&self) -> &StateVector {
        &self.pre
    }

    pub fn post(&self) -> &StateVector {
        &self.post
    }

    pub fn evolution(&self) -> &OperatorMatrix {
        &self.evolution
    }

    /// Basis of the intermediate time, where observables act.
    pub fn basis(&self) -> &Basis {
        self.pre.basis()
    }

    /// `⟨f|U·O|in⟩` for an operator on the intermediate basis.
    pub fn transition(&self, op: &OperatorMatrix) -> MeasureResult<C64> {
        let acted = apply(op, &self.pre)?;
        if acted.basis() != self.pre.basis() {
            return Err(HilbertError::BasisMismatch {
                expected: self.pre.basis().labels().join(","),
                found: acted.basis().labels().join(","),
            }
            .into());
        }
        Ok(inner(&self.post, &apply(&self.evolution, &acted)?)?)
    }

    /// `⟨f|U|in⟩`.
    pub fn overlap(&self) -> C64 {
        let evolved = apply(&self.evolution, &self.pre).expect("checked at construction");
        inner(&self.post, &evolved).expect("checked at construction")
    }

    /// `U|in⟩`, the pre-selected state carried to the post-selection time.
    pub fn evolved_pre(&self) -> StateVector {
        apply(&self.evolution, &self.pre).expect("checked at construction")
    }
}

/// Outcome distribution over eigenvalues, in spectral-data order.
#[derive(Clone, Debug, PartialEq)]
pub struct ABLDistribution {
    entries: Vec<(f64, f64)>,
}

impl ABLDistribution {
    pub fn entries(&self) -> &[(f64, f64)] {
        &self.entries
    }

    /// Probability of the outcome `eigenvalue`, zero if it is not listed.
    pub fn probability_of(&self, eigenvalue: f64) -> f64 {
        self.entries
            .iter()
            .find(|(v, _)| (v - eigenvalue).abs() <= EIGEN_MERGE_GAP)
            .map_or(0.0, |(_, p)| *p)
    }

    pub fn total(&self) -> f64 {
        self.entries.iter().map(|(_, p)| p).sum()
    }

    fn from_weights(spec: &SpectralData, weights: Vec<f64>) -> Self {
        let total: f64 = weights.iter().sum();
        Self {
            entries: spec
                .eigenvalues()
                .zip(weights)
                .map(|(v, w)| (v, w / total))
                .collect(),
        }
    }
}

impl fmt::Display for ABLDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (k, (v, p)) in self.entries.iter().enumerate() {
            if k > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{v}: {p}")?;
        }
        f.write_str("}")
    }
}

/// Weak value `⟨f|U·O|in⟩ / ⟨f|U|in⟩`.
pub fn weak_value(op: &OperatorMatrix, pp: &PrePost) -> MeasureResult<C64> {
    let overlap = pp.overlap();
    if overlap.norm() < POST_SELECTION_EPS {
        return Err(MeasureError::PostSelectionOrthogonal {
            overlap: overlap.norm(),
        });
    }
    Ok(pp.transition(op)? / overlap)
}

/// Born-rule probabilities `⟨s|Pₖ|s⟩ / ⟨s|s⟩`.
pub fn born_probabilities(spec: &SpectralData, s: &StateVector) -> MeasureResult<ABLDistribution> {
    let s = s.normalize()?;
    let weights = spec
        .pairs
        .iter()
        .map(|(_, p)| Ok(inner(&s, &apply(p, &s)?)?.re.max(0.0)))
        .collect::<MeasureResult<Vec<_>>>()?;
    Ok(ABLDistribution::from_weights(spec, weights))
}

/// `⟨s|O|s⟩ / ⟨s|s⟩` for Hermitian `O`.
pub fn mean_value(op: &OperatorMatrix, s: &StateVector) -> MeasureResult<f64> {
    let deviation = op.hermitian_deviation();
    if !(deviation <= DEFAULT_TOL) {
        return Err(MeasureError::NotHermitian { deviation });
    }
    let s = s.normalize()?;
    Ok(inner(&s, &apply(op, &s)?)?.re)
}

/// ABL conditional probabilities in projector form, which also covers
/// degenerate eigenvalues.
pub fn abl_probability(spec: &SpectralData, pp: &PrePost) -> MeasureResult<ABLDistribution> {
    let weights = spec
        .pairs
        .iter()
        .map(|(_, p)| pp.transition(p).map(|z| z.norm_sqr()))
        .collect::<MeasureResult<Vec<_>>>()?;
    let total: f64 = weights.iter().sum();
    if !(total >= POST_SELECTION_EPS * POST_SELECTION_EPS) {
        return Err(MeasureError::NoConsistentHistory);
    }
    Ok(ABLDistribution::from_weights(spec, weights))
}

/// ABL probability of finding a projector at 1, written through its weak
/// value and the weak value of its complement.
pub fn abl_from_weak(weak: C64, complement_weak: C64) -> MeasureResult<f64> {
    let (a, b) = (weak.norm_sqr(), complement_weak.norm_sqr());
    if weak.norm() < POST_SELECTION_EPS && complement_weak.norm() < POST_SELECTION_EPS {
        return Err(MeasureError::DegenerateInput);
    }
    Ok(a / (a + b))
}

/// The two real weak values consistent with an ABL probability `p`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WeakRoots {
    /// `√p / (√p + √(1−p))`
    pub plus: f64,
    /// `√p / (√p − √(1−p))`; `None` at `p = 1/2` where it diverges.
    pub minus: Option<f64>,
}

impl WeakRoots {
    pub fn contains(&self, w: f64, tol: f64) -> bool {
        (self.plus - w).abs() <= tol || self.minus.is_some_and(|m| (m - w).abs() <= tol)
    }
}

/// Inverts [`abl_from_weak`] under the assumption that the weak value is
/// real. Both branches of the sign ambiguity are returned.
pub fn weak_from_abl(p: f64) -> MeasureResult<WeakRoots> {
    if !(-1e-12..=1.0 + 1e-12).contains(&p) {
        return Err(MeasureError::ProbabilityOutOfRange(p));
    }
    let p = p.clamp(0.0, 1.0);
    let (sp, sq) = (p.sqrt(), (1.0 - p).sqrt());
    let plus = sp / (sp + sq);
    let denom = sp - sq;
    let minus = if denom.abs() < 1e-12 {
        None
    } else {
        Some(sp / denom)
    };
    Ok(WeakRoots { plus, minus })
}

/// Spectral decomposition of a Hermitian operator by cyclic Jacobi
/// rotations. Eigenvalues closer than [`EIGEN_MERGE_GAP`] share a projector.
pub fn eigendecompose_hermitian(op: &OperatorMatrix) -> MeasureResult<SpectralData> {
    let basis = op.basis()?.clone();
    let deviation = op.hermitian_deviation();
    if !(deviation <= DEFAULT_TOL) {
        return Err(MeasureError::NotHermitian { deviation });
    }
    let pairs = eigen::hermitian_spectrum(op, &basis, EIGEN_MERGE_GAP);
    Ok(SpectralData { basis, pairs })
}

/// Projector onto a basis label, `|label⟩⟨label|`.
pub fn number_operator(basis: &Basis, label: &str) -> MeasureResult<OperatorMatrix> {
    Ok(hilbert::projector_onto(&StateVector::basis_ket(
        basis, label,
    )?)?)
}
