//! Von Neumann pointer model of a weak measurement with post-selection.
//!
//! The pointer starts in a real Gaussian of width `sigma` centred at zero.
//! An impulsive coupling displaces it by `g·oₖ` on the eigenspace `Pₖ`, so
//! after post-selecting `|f⟩` the (unnormalized) pointer wavefunction is
//!
//! ```text
//! φ(x) = Σₖ cₖ G(x − g·oₖ),   cₖ = ⟨f|U·Pₖ|in⟩
//! ```
//!
//! Everything is evaluated from closed-form Gaussian overlaps, no grid:
//! `⟨G_a|G_b⟩ = exp(−(a−b)²/(8σ²))`, `⟨G_a|x|G_b⟩ = m·⟨G_a|G_b⟩` and
//! `⟨G_a|x²|G_b⟩ = (m² + σ²)·⟨G_a|G_b⟩` with `m = (a+b)/2`.

use thiserror::Error;

use crate::hilbert::{HilbertError, C64};
use crate::measure::{MeasureError, PrePost, SpectralData, POST_SELECTION_EPS};
use crate::par;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MeterError {
    #[error(transparent)]
    Measure(#[from] MeasureError),

    #[error("invalid pointer model: {0}")]
    InvalidModel(&'static str),

    #[error("pointer shift ratio is undefined without coupling (g = 0)")]
    Uncoupled,
}

impl From<HilbertError> for MeterError {
    fn from(e: HilbertError) -> Self {
        Self::Measure(e.into())
    }
}

pub type MeterResult<T> = Result<T, MeterError>;

/// Coupling strength `g` (pointer units per eigenvalue unit) and Gaussian
/// width `sigma` of the pointer.
///
/// `g = 0` is accepted and models the uncoupled meter.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PointerModel {
    g: f64,
    sigma: f64,
}

impl PointerModel {
    pub fn new(g: f64, sigma: f64) -> MeterResult<Self> {
        if !(g.is_finite() && g >= 0.0) {
            return Err(MeterError::InvalidModel(
                "g must be finite and non-negative",
            ));
        }
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(MeterError::InvalidModel(
                "sigma must be finite and positive",
            ));
        }
        Ok(Self { g, sigma })
    }

    /// Model with `sigma = 1` and the given coupling-to-width ratio.
    pub fn with_ratio(ratio: f64) -> MeterResult<Self> {
        Self::new(ratio, 1.0)
    }

    pub fn g(&self) -> f64 {
        self.g
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// `⟨G_a|G_b⟩` for pointer Gaussians centred at `a` and `b`.
    fn overlap(&self, a: f64, b: f64) -> f64 {
        let d = a - b;
        (-(d * d) / (8.0 * self.sigma * self.sigma)).exp()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MeterComponent {
    pub eigenvalue: f64,
    /// Pointer displacement `g·eigenvalue`.
    pub center: f64,
    /// `⟨f|U·Pₖ|in⟩`
    pub amplitude: C64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MeterOutcome {
    pub post_selection_probability: f64,
    pub pointer_mean: f64,
    pub pointer_variance: f64,
    pub components: Vec<MeterComponent>,
    /// Overlap matrix of the displaced Gaussians, row-major.
    overlaps: Vec<f64>,
}

impl MeterOutcome {
    /// `|cₖ|² / Σⱼ|cⱼ|²`, which is the ABL distribution for any model.
    pub fn component_weights(&self) -> Vec<f64> {
        let total: f64 = self.components.iter().map(|c| c.amplitude.norm_sqr()).sum();
        self.components
            .iter()
            .map(|c| c.amplitude.norm_sqr() / total)
            .collect()
    }

    /// Share of the post-selected pointer norm attributed to each peak,
    /// `Re(conj(cₖ)·Σₗ cₗ⟨Gₖ|Gₗ⟩) / ∫|φ|²`. The cross terms vanish once the
    /// peaks separate, leaving the ABL distribution; in the weak regime they
    /// dominate and the shares can leave `[0, 1]`.
    pub fn peak_weights(&self) -> Vec<f64> {
        let n = self.components.len();
        (0..n)
            .map(|k| {
                let row: C64 = (0..n)
                    .map(|l| self.components[l].amplitude * self.overlaps[k * n + l])
                    .sum();
                (self.components[k].amplitude.conj() * row).re / self.post_selection_probability
            })
            .collect()
    }
}

/// Post-selected pointer statistics for measuring `spec` between the pre-
/// and post-selection of `pp`.
pub fn simulate_pointer(
    spec: &SpectralData,
    pp: &PrePost,
    model: &PointerModel,
) -> MeterResult<MeterOutcome> {
    if spec.basis() != pp.basis() {
        return Err(HilbertError::BasisMismatch {
            expected: pp.basis().labels().join(","),
            found: spec.basis().labels().join(","),
        }
        .into());
    }
    let components = spec
        .pairs()
        .iter()
        .map(|(value, p)| {
            Ok(MeterComponent {
                eigenvalue: *value,
                center: model.g * value,
                amplitude: pp.transition(p)?,
            })
        })
        .collect::<MeterResult<Vec<_>>>()?;

    let n = components.len();
    let mut overlaps = vec![0.0; n * n];
    let (mut norm, mut first, mut second) = (0.0, 0.0, 0.0);
    for (k, ck) in components.iter().enumerate() {
        for (l, cl) in components.iter().enumerate() {
            let s = model.overlap(ck.center, cl.center);
            overlaps[k * n + l] = s;
            let m = 0.5 * (ck.center + cl.center);
            let w = (ck.amplitude.conj() * cl.amplitude).re * s;
            norm += w;
            first += w * m;
            second += w * (m * m + model.sigma * model.sigma);
        }
    }
    if !(norm >= POST_SELECTION_EPS * POST_SELECTION_EPS) {
        return Err(MeasureError::NoConsistentHistory.into());
    }
    let mean = first / norm;
    Ok(MeterOutcome {
        post_selection_probability: norm,
        pointer_mean: mean,
        pointer_variance: (second / norm - mean * mean).max(0.0),
        components,
        overlaps,
    })
}

/// Pointer mean in units of `g`; tends to Re(weak value) as `g/σ → 0`.
pub fn weak_shift_ratio(
    spec: &SpectralData,
    pp: &PrePost,
    model: &PointerModel,
) -> MeterResult<f64> {
    if model.g == 0.0 {
        return Err(MeterError::Uncoupled);
    }
    Ok(simulate_pointer(spec, pp, model)?.pointer_mean / model.g)
}

/// Runs [`simulate_pointer`] over several models, results in input order.
pub fn scan(
    spec: &SpectralData,
    pp: &PrePost,
    models: &[PointerModel],
) -> Vec<MeterResult<MeterOutcome>> {
    par::map_ordered(models, |m| simulate_pointer(spec, pp, m))
}
