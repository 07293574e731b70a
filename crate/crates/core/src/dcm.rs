//! Dirichlet-multinomial (Polya) data model with fractional sufficient statistics.

use std::collections::BTreeMap;

use crate::corpus::Document;
use crate::numeric::ln_rising;
use crate::{Error, Result};

/// Removal may undershoot zero by rounding; anything below this is a bookkeeping bug.
pub const REMOVE_TOLERANCE: f64 = 1e-6;

/// Symmetric Dirichlet prior over the vocabulary simplex.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DcmHyper {
    pub beta: f64,
    pub vocab_size: usize,
}

impl DcmHyper {
    pub fn new(beta: f64, vocab_size: usize) -> Result<Self> {
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::arg(format!("beta must be positive, got {beta}")));
        }
        if vocab_size == 0 {
            return Err(Error::arg("vocabulary size must be at least 1"));
        }
        Ok(DcmHyper { beta, vocab_size })
    }

    /// Total prior mass `V * beta`.
    pub fn prior_mass(&self) -> f64 {
        self.vocab_size as f64 * self.beta
    }
}

/// Expected (possibly fractional) token counts for one component.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ComponentStats {
    n_kw: BTreeMap<u32, f64>,
    n_k: f64,
}

impl ComponentStats {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn total(&self) -> f64 {
        self.n_k
    }

    pub fn word(&self, w: u32) -> f64 {
        self.n_kw.get(&w).copied().unwrap_or(0.0)
    }

    /// Nonzero `(word, expected count)` pairs in ascending word order.
    pub fn words(&self) -> impl Iterator<Item = (u32, f64)> + '_ {
        self.n_kw.iter().map(|(&w, &c)| (w, c))
    }

    /// Rebuilds from explicit counts. `n_k` is recomputed as their sum.
    pub fn from_words(words: impl IntoIterator<Item = (u32, f64)>) -> Self {
        let mut s = ComponentStats::new();
        for (w, c) in words {
            if c > 0.0 {
                *s.n_kw.entry(w).or_insert(0.0) += c;
            }
        }
        s.recompute_total();
        s
    }

    pub fn add_doc(&mut self, doc: &Document, weight: f64) {
        if weight == 0.0 {
            return;
        }
        for &(w, c) in doc.entries() {
            *self.n_kw.entry(w).or_insert(0.0) += weight * c as f64;
        }
        self.n_k += weight * doc.length() as f64;
    }

    /// Subtracts mass previously added with [`add_doc`](Self::add_doc).
    ///
    /// Rounding residue below zero is clamped; a deficit beyond
    /// [`REMOVE_TOLERANCE`] is reported as an accounting error.
    pub fn remove_doc(&mut self, doc: &Document, weight: f64) -> Result<()> {
        if weight == 0.0 {
            return Ok(());
        }
        for &(w, c) in doc.entries() {
            let slot = self.n_kw.entry(w).or_insert(0.0);
            *slot -= weight * c as f64;
            if *slot < -REMOVE_TOLERANCE {
                return Err(Error::Accounting(format!(
                    "word {w} count fell to {} after removing document {}",
                    *slot, doc.id
                )));
            }
            if *slot <= 0.0 {
                self.n_kw.remove(&w);
            }
        }
        self.n_k -= weight * doc.length() as f64;
        if self.n_k < -REMOVE_TOLERANCE {
            return Err(Error::Accounting(format!(
                "component total fell to {} after removing document {}",
                self.n_k, doc.id
            )));
        }
        if self.n_k < 0.0 || self.n_kw.is_empty() {
            self.n_k = 0.0;
        }
        Ok(())
    }

    /// Resets `n_k` to the exact sum of the word counts.
    pub fn recompute_total(&mut self) {
        self.n_k = self.n_kw.values().sum();
    }

    /// Smoothed single-token predictive `(n_kw + beta) / (n_k + V beta)`.
    pub fn word_prob(&self, w: u32, hyper: &DcmHyper) -> f64 {
        (self.word(w) + hyper.beta) / (self.n_k + hyper.prior_mass())
    }
}

/// Log Dirichlet-compound-multinomial predictive of `doc` given `stats`:
///
/// `ln Γ(n_k + Vβ) − ln Γ(n_k + L + Vβ) + Σ_w [ln Γ(n_kw + x_w + β) − ln Γ(n_kw + β)]`.
pub fn log_predictive_doc(doc: &Document, stats: &ComponentStats, hyper: &DcmHyper) -> f64 {
    debug_assert!(stats.n_k.is_finite() && stats.n_k >= 0.0);
    let words: f64 = doc
        .entries()
        .iter()
        .map(|&(w, c)| ln_rising(stats.word(w) + hyper.beta, c as u64))
        .sum();
    words - ln_rising(stats.n_k + hyper.prior_mass(), doc.length())
}

/// Prior predictive `p(x | β)` for a not-yet-instantiated component.
pub fn log_predictive_empty(doc: &Document, hyper: &DcmHyper) -> f64 {
    log_predictive_doc(doc, &ComponentStats::default(), hyper)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn hyper(beta: f64, v: usize) -> DcmHyper {
        DcmHyper::new(beta, v).unwrap()
    }

    /// Sequential urn: each token's probability given everything drawn before it.
    fn polya_urn(doc: &Document, stats: &ComponentStats, h: &DcmHyper) -> f64 {
        let mut drawn: BTreeMap<u32, f64> = BTreeMap::new();
        let mut total = 0.0;
        let mut logp = 0.0;
        for w in doc.tokens() {
            let seen = drawn.get(&w).copied().unwrap_or(0.0);
            logp += ((stats.word(w) + seen + h.beta) / (stats.total() + total + h.prior_mass())).ln();
            *drawn.entry(w).or_insert(0.0) += 1.0;
            total += 1.0;
        }
        logp
    }

    #[test]
    fn two_tokens_empty_stats() {
        let d = Document::from_counts(0, [(0, 1), (1, 1)]);
        let got = log_predictive_doc(&d, &ComponentStats::new(), &hyper(0.5, 2));
        assert!((got - (0.125f64).ln()).abs() < 1e-15);
    }

    #[test]
    fn single_token_prior_is_uniform() {
        for v in [1usize, 7, 10, 1000] {
            let d = Document::from_counts(0, [(0, 1)]);
            let got = log_predictive_empty(&d, &hyper(0.37, v));
            assert!((got - (1.0 / v as f64).ln()).abs() < 1e-14);
        }
    }

    #[test]
    fn repeated_token_prior() {
        let d = Document::from_counts(0, [(0, 2)]);
        let got = log_predictive_empty(&d, &hyper(0.5, 2));
        assert!((got - 0.375f64.ln()).abs() < 1e-15);
        assert_eq!(got, log_predictive_doc(&d, &ComponentStats::default(), &hyper(0.5, 2)));
    }

    #[test]
    fn add_then_remove_restores() {
        let d = Document::from_counts(3, [(0, 2), (3, 1)]);
        let mut s = ComponentStats::from_words([(0, 1.25), (7, 0.5)]);
        let before = s.clone();
        s.add_doc(&d, 0.37);
        s.remove_doc(&d, 0.37).unwrap();
        assert!((s.total() - before.total()).abs() < 1e-12);
        for w in [0, 3, 7] {
            assert!((s.word(w) - before.word(w)).abs() < 1e-12);
        }
    }

    #[test]
    fn add_grows_total_by_weighted_length() {
        let d = Document::from_counts(0, [(0, 2), (3, 1)]);
        let mut s = ComponentStats::new();
        s.add_doc(&d, 0.5);
        assert_eq!(s.total(), 1.5);
        assert_eq!(s.word(0), 1.0);
        assert_eq!(s.word(3), 0.5);
    }

    #[test]
    fn over_removal_is_an_accounting_error() {
        let d = Document::from_counts(0, [(0, 2)]);
        let mut s = ComponentStats::new();
        s.add_doc(&d, 0.25);
        assert!(matches!(s.remove_doc(&d, 0.5), Err(Error::Accounting(_))));
    }

    #[test]
    fn fractional_stats_match_urn() {
        let h = hyper(0.1, 6);
        let s = ComponentStats::from_words([(0, 2.75), (1, 0.125), (4, 11.5)]);
        let d = Document::from_counts(0, [(0, 3), (2, 1), (4, 12)]);
        let got = log_predictive_doc(&d, &s, &h);
        let want = polya_urn(&d, &s, &h);
        assert!(((got - want) / want).abs() < 1e-12, "{got} vs {want}");
    }

    proptest! {
        #[test]
        fn matches_urn_on_integer_counts(
            v in 1usize..8,
            beta in 0.01f64..3.0,
            stats in proptest::collection::vec(0u32..20, 8),
            doc in proptest::collection::vec(0u32..15, 8),
        ) {
            let h = hyper(beta, v);
            let s = ComponentStats::from_words(stats.iter().take(v).enumerate().map(|(w, &c)| (w as u32, c as f64)));
            let d = Document::from_counts(0, doc.iter().take(v).enumerate().map(|(w, &c)| (w as u32, c)));
            prop_assume!(d.length() > 0);
            let got = log_predictive_doc(&d, &s, &h);
            let want = polya_urn(&d, &s, &h);
            if want == 0.0 {
                prop_assert!(got.abs() < 1e-12);
            } else {
                prop_assert!(((got - want) / want).abs() < 1e-10);
            }
        }

        #[test]
        fn single_token_predictive_normalizes(
            v in 1usize..30,
            beta in 0.001f64..2.0,
            stats in proptest::collection::vec(0.0f64..50.0, 30),
        ) {
            let h = hyper(beta, v);
            let s = ComponentStats::from_words(stats.iter().take(v).enumerate().map(|(w, &c)| (w as u32, c)));
            let total: f64 = (0..v as u32)
                .map(|w| log_predictive_doc(&Document::from_counts(0, [(w, 1)]), &s, &h).exp())
                .sum();
            prop_assert!((total - 1.0).abs() < 1e-10);
        }

        #[test]
        fn adding_word_mass_raises_its_predictive(
            base in 0.0f64..20.0, extra in 0.001f64..5.0, len in 1u32..6,
        ) {
            let h = hyper(0.1, 5);
            let d = Document::from_counts(0, [(2, len)]);
            let s = ComponentStats::from_words([(2, base), (0, 3.0)]);
            let mut more = s.clone();
            more.add_doc(&Document::from_counts(1, [(2, 1)]), extra);
            prop_assert!(log_predictive_doc(&d, &more, &h) > log_predictive_doc(&d, &s, &h));
        }
    }
}
