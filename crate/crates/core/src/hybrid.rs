//! The hybrid update: a `K+1`-dimensional CVB0 responsibility vector is replaced
//! either by its renormalized first `K` coordinates or by a one-hot vector on a
//! fresh component, chosen by a single categorical draw.
//!
//! With `ξ₁ = Σ_{k≤K} φ_k` and `ξ₂ = φ_{K+1}`, the new-component event is
//! Bernoulli(`φ_{K+1}`), and the realized `K+1` vector has expectation `φ`.

use rand::Rng;

use crate::numeric::normalize_log_in_place;

/// A probability vector over `K` instantiated components plus one trailing
/// slot for a not-yet-instantiated component.
#[derive(Debug, Clone, PartialEq)]
pub struct ResponsibilityVector {
    values: Vec<f64>,
}

impl ResponsibilityVector {
    /// Normalizes log weights (last entry is the new-component slot).
    ///
    /// # Panics
    /// If `log_weights` is empty or every weight is `-inf`.
    pub fn from_log_weights(mut log_weights: Vec<f64>) -> Self {
        assert!(!log_weights.is_empty(), "responsibility vector needs a new-component slot");
        let z = normalize_log_in_place(&mut log_weights);
        assert!(z.is_finite(), "all responsibilities vanished");
        ResponsibilityVector { values: log_weights }
    }

    /// Wraps an already normalized vector.
    pub fn from_probs(values: Vec<f64>) -> Self {
        debug_assert!(!values.is_empty());
        debug_assert!((values.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        ResponsibilityVector { values }
    }

    /// Number of instantiated components `K`.
    pub fn k(&self) -> usize {
        self.values.len() - 1
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn existing(&self) -> &[f64] {
        &self.values[..self.k()]
    }

    pub fn new_slot(&self) -> f64 {
        self.values[self.k()]
    }

    /// `(ξ₁, ξ₂)`: mass on instantiated components and on the new slot.
    pub fn xi(&self) -> (f64, f64) {
        (self.existing().iter().sum(), self.new_slot())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum HybridUpdate {
    /// Renormalized `K`-vector over instantiated components.
    Truncated(Vec<f64>),
    /// One-hot on component `K+1`.
    NewComponent,
}

impl HybridUpdate {
    pub fn is_new(&self) -> bool {
        matches!(self, HybridUpdate::NewComponent)
    }

    /// The realized `K+1` vector (`ζ_c`) for a given `K`.
    pub fn realized(&self, k: usize) -> Vec<f64> {
        match self {
            HybridUpdate::Truncated(v) => {
                let mut out = v.clone();
                out.push(0.0);
                out
            }
            HybridUpdate::NewComponent => {
                let mut out = vec![0.0; k + 1];
                out[k] = 1.0;
                out
            }
        }
    }
}

/// Samples the hybrid update from `phi`, consuming exactly one uniform draw.
pub fn hybrid_update<R: Rng + ?Sized>(phi: &ResponsibilityVector, rng: &mut R) -> HybridUpdate {
    let u: f64 = rng.random();
    hybrid_update_with_uniform(phi, u)
}

/// The hybrid update for a given uniform `u` in `[0, 1)`.
pub fn hybrid_update_with_uniform(phi: &ResponsibilityVector, u: f64) -> HybridUpdate {
    let (xi1, xi2) = phi.xi();
    if xi1 <= 0.0 {
        return HybridUpdate::NewComponent;
    }
    if xi2 > 0.0 && u < xi2 {
        return HybridUpdate::NewComponent;
    }
    HybridUpdate::Truncated(phi.existing().iter().map(|p| p / xi1).collect())
}
