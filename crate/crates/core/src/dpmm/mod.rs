//! Single-membership Dirichlet-process mixture of Dirichlet-multinomial documents.
//!
//! Three engines share one state type:
//!
//! - HCVB0: zero-order collapsed variational updates with the hybrid new-component draw.
//! - CGS: collapsed Gibbs sampling (hard assignments, the degenerate case of the same state).
//! - TCVB0: CVB0 at a fixed truncation `T`, no new-component slot.
//!
//! Component statistics are tracked twice: a document-level mass `Σ_j γ_jk`
//! that drives the Chinese-restaurant prior ratio, and token-level expected
//! counts ([`ComponentStats`]) that drive the Dirichlet-multinomial predictive.

mod engine;
mod synth;

pub use engine::{cgs_sweep, hcvb0_sweep, tcvb0_sweep, SweepReport};
pub use synth::{generate_synthetic, sample_dirichlet, sample_mixture, SyntheticMixture};

use rand::Rng;

use crate::corpus::{Corpus, Document};
use crate::dcm::{log_predictive_doc, log_predictive_empty, ComponentStats, DcmHyper};
use crate::hybrid::{HybridUpdate, ResponsibilityVector};
use crate::{Error, Result};

pub const DEFAULT_ALPHA: f64 = 1.0;
pub const DEFAULT_BETA: f64 = 0.1;
/// Components whose document mass falls below this are removed once per sweep.
pub const DEFAULT_PRUNE_THRESHOLD: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DpmmHyper {
    pub alpha: f64,
    pub dcm: DcmHyper,
}

impl DpmmHyper {
    pub fn new(alpha: f64, beta: f64, vocab_size: usize) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::arg(format!("alpha must be positive, got {alpha}")));
        }
        Ok(DpmmHyper {
            alpha,
            dcm: DcmHyper::new(beta, vocab_size)?,
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Component {
    /// Expected number of documents explained, `Σ_j γ_jk`.
    pub doc_mass: f64,
    pub stats: ComponentStats,
}

/// Instantiated components and hyperparameters: everything evaluation needs.
#[derive(Debug, Clone, PartialEq)]
pub struct DpmmModel {
    pub hyper: DpmmHyper,
    pub components: Vec<Component>,
}

/// A sparse responsibility row: `(component index, weight)` with positive weights.
pub type GammaRow = Vec<(usize, f64)>;

/// Inference state over a training corpus.
///
/// A row of `gamma` is empty while its document is detached (its contribution
/// removed from the statistics); every attached row sums to one.
#[derive(Debug, Clone)]
pub struct DpmmState {
    corpus: Corpus,
    components: Vec<Component>,
    gamma: Vec<GammaRow>,
    assignments: Option<Vec<Option<usize>>>,
}

impl DpmmState {
    /// Empty model (`K = 0`) with every document detached. The first update
    /// of each document is forced to create or join a component.
    pub fn empty(corpus: Corpus) -> Self {
        let n = corpus.len();
        DpmmState {
            corpus,
            components: Vec::new(),
            gamma: vec![Vec::new(); n],
            assignments: None,
        }
    }

    /// Empty model in hard-assignment mode, for collapsed Gibbs sampling.
    pub fn empty_hard(corpus: Corpus) -> Self {
        let n = corpus.len();
        let mut s = Self::empty(corpus);
        s.assignments = Some(vec![None; n]);
        s
    }

    /// `truncation` components with responsibilities drawn from a flat
    /// Dirichlet around the uniform vector.
    pub fn truncated<R: Rng + ?Sized>(corpus: Corpus, truncation: usize, rng: &mut R) -> Result<Self> {
        if truncation == 0 {
            return Err(Error::arg("truncation must be at least 1"));
        }
        let mut s = Self::empty(corpus);
        s.components = vec![Component::default(); truncation];
        let ones = vec![1.0; truncation];
        for i in 0..s.gamma.len() {
            let row = sample_dirichlet(&ones, rng);
            s.gamma[i] = row.into_iter().enumerate().filter(|&(_, g)| g > 0.0).collect();
        }
        s.recompute_from_gamma();
        Ok(s)
    }

    /// Builds a state from explicit rows (hard or soft). Rows must index
    /// components below `k` and sum to one; statistics are computed from them.
    pub fn from_gamma(corpus: Corpus, k: usize, gamma: Vec<GammaRow>) -> Result<Self> {
        if gamma.len() != corpus.len() {
            return Err(Error::arg("one responsibility row per document required"));
        }
        for (i, row) in gamma.iter().enumerate() {
            let sum: f64 = row.iter().map(|&(_, g)| g).sum();
            if row.iter().any(|&(c, g)| c >= k || g < 0.0) || (!row.is_empty() && (sum - 1.0).abs() > 1e-9) {
                return Err(Error::arg(format!("invalid responsibility row for document {i}")));
            }
        }
        let mut s = Self::empty(corpus);
        s.components = vec![Component::default(); k];
        s.gamma = gamma;
        s.recompute_from_gamma();
        Ok(s)
    }

    pub fn corpus(&self) -> &Corpus {
        &self.corpus
    }

    pub fn k(&self) -> usize {
        self.components.len()
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }

    pub fn gamma(&self) -> &[GammaRow] {
        &self.gamma
    }

    pub fn assignments(&self) -> Option<&[Option<usize>]> {
        self.assignments.as_deref()
    }

    pub fn is_hard(&self) -> bool {
        self.assignments.is_some()
    }

    pub fn total_doc_mass(&self) -> f64 {
        self.components.iter().map(|c| c.doc_mass).sum()
    }

    pub fn total_token_mass(&self) -> f64 {
        self.components.iter().map(|c| c.stats.total()).sum()
    }

    pub fn model(&self, hyper: &DpmmHyper) -> DpmmModel {
        DpmmModel {
            hyper: *hyper,
            components: self.components.clone(),
        }
    }

    /// Hard label per document: the argmax of its responsibility row.
    pub fn labels(&self) -> Vec<Option<usize>> {
        self.gamma
            .iter()
            .map(|row| {
                row.iter()
                    .copied()
                    .fold(None, |best: Option<(usize, f64)>, (k, g)| match best {
                        Some((_, bg)) if bg >= g => best,
                        _ => Some((k, g)),
                    })
                    .map(|(k, _)| k)
            })
            .collect()
    }

    /// Removes document `i`'s contribution and clears its row.
    pub fn detach(&mut self, i: usize) -> Result<()> {
        let row = std::mem::take(&mut self.gamma[i]);
        let doc = &self.corpus.docs[i];
        for (k, g) in row {
            let comp = &mut self.components[k];
            comp.stats.remove_doc(doc, g)?;
            comp.doc_mass -= g;
            if comp.doc_mass < -crate::dcm::REMOVE_TOLERANCE {
                return Err(Error::Accounting(format!(
                    "component {k} document mass fell to {}",
                    comp.doc_mass
                )));
            }
            comp.doc_mass = comp.doc_mass.max(0.0);
        }
        if let Some(a) = self.assignments.as_mut() {
            a[i] = None;
        }
        Ok(())
    }

    /// Zero-order collapsed responsibilities of detached document `i` over the
    /// `K` components plus the new-component slot.
    pub fn cvb0_responsibilities(&self, i: usize, hyper: &DpmmHyper) -> ResponsibilityVector {
        debug_assert!(self.gamma[i].is_empty(), "document {i} must be detached");
        ResponsibilityVector::from_log_weights(self.log_weights(&self.corpus.docs[i], hyper, true))
    }

    /// Unnormalized log weights `ln n_k + ln p(x | x_k)` (the shared `1/(n + α)`
    /// factor cancels), optionally followed by `ln α + ln p(x | β)`.
    pub(crate) fn log_weights(&self, doc: &Document, hyper: &DpmmHyper, new_slot: bool) -> Vec<f64> {
        let mut w: Vec<f64> = self
            .components
            .iter()
            .map(|c| {
                if c.doc_mass > 0.0 {
                    c.doc_mass.ln() + log_predictive_doc(doc, &c.stats, &hyper.dcm)
                } else {
                    f64::NEG_INFINITY
                }
            })
            .collect();
        if new_slot {
            w.push(hyper.alpha.ln() + log_predictive_empty(doc, &hyper.dcm));
        }
        w
    }

    /// Attaches detached document `i` according to `update`.
    pub fn apply_update(&mut self, i: usize, update: &HybridUpdate) {
        match update {
            HybridUpdate::Truncated(v) => {
                debug_assert_eq!(v.len(), self.k());
                let row: GammaRow = v.iter().copied().enumerate().filter(|&(_, g)| g > 0.0).collect();
                self.attach(i, row);
            }
            HybridUpdate::NewComponent => {
                self.components.push(Component::default());
                let k = self.components.len() - 1;
                self.attach(i, vec![(k, 1.0)]);
            }
        }
    }

    fn attach(&mut self, i: usize, row: GammaRow) {
        debug_assert!(self.gamma[i].is_empty());
        let doc = &self.corpus.docs[i];
        for &(k, g) in &row {
            let comp = &mut self.components[k];
            comp.stats.add_doc(doc, g);
            comp.doc_mass += g;
        }
        if let Some(a) = self.assignments.as_mut() {
            a[i] = row.first().map(|&(k, _)| k);
        }
        self.gamma[i] = row;
    }

    /// Hard-assigns detached document `i` to component `k` (`k == K` creates one).
    pub fn assign(&mut self, i: usize, k: usize) {
        if k == self.k() {
            self.apply_update(i, &HybridUpdate::NewComponent);
        } else {
            self.attach(i, vec![(k, 1.0)]);
        }
    }

    /// Rebuilds every component's statistics from the responsibility rows.
    pub fn recompute_from_gamma(&mut self) {
        for c in &mut self.components {
            *c = Component::default();
        }
        for (doc, row) in self.corpus.docs.iter().zip(&self.gamma) {
            for &(k, g) in row {
                self.components[k].stats.add_doc(doc, g);
                self.components[k].doc_mass += g;
            }
        }
        for c in &mut self.components {
            c.stats.recompute_total();
        }
    }

    /// Deletes components whose document mass is below `threshold`, renormalizes
    /// the affected rows over the survivors and relabels. A populated model is
    /// never emptied: the largest component survives regardless.
    pub fn prune_components(&mut self, threshold: f64) -> usize {
        let k = self.k();
        if k == 0 {
            return 0;
        }
        let mut keep: Vec<bool> = self.components.iter().map(|c| c.doc_mass >= threshold).collect();
        let attached = self.gamma.iter().any(|r| !r.is_empty());
        if attached && !keep.iter().any(|&x| x) {
            let largest = (0..k)
                .max_by(|&a, &b| self.components[a].doc_mass.total_cmp(&self.components[b].doc_mass))
                .unwrap_or(0);
            keep[largest] = true;
        }
        let pruned = keep.iter().filter(|&&x| !x).count();
        if pruned == 0 {
            return 0;
        }

        let mut relabel = vec![None; k];
        let mut next = 0;
        for (old, &kept) in keep.iter().enumerate() {
            if kept {
                relabel[old] = Some(next);
                next += 1;
            }
        }
        let largest_survivor = (0..k)
            .filter(|&c| keep[c])
            .max_by(|&a, &b| self.components[a].doc_mass.total_cmp(&self.components[b].doc_mass))
            .and_then(|c| relabel[c]);

        for row in &mut self.gamma {
            if row.is_empty() {
                continue;
            }
            let touched = row.iter().any(|&(c, _)| relabel[c].is_none());
            let mut new_row: GammaRow = row.iter().filter_map(|&(c, g)| relabel[c].map(|n| (n, g))).collect();
            if touched {
                let sum: f64 = new_row.iter().map(|&(_, g)| g).sum();
                if sum > 0.0 {
                    new_row.iter_mut().for_each(|(_, g)| *g /= sum);
                } else if let Some(l) = largest_survivor {
                    new_row = vec![(l, 1.0)];
                }
            }
            *row = new_row;
        }
        if let Some(a) = self.assignments.as_mut() {
            for (slot, row) in a.iter_mut().zip(&self.gamma) {
                *slot = row.first().map(|&(c, _)| c);
            }
        }
        let mut idx = 0;
        self.components.retain(|_| {
            let kept = keep[idx];
            idx += 1;
            kept
        });
        self.recompute_from_gamma();
        pruned
    }
}
