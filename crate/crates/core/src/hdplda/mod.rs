//! Mixed-membership HDP-LDA with stochastic collapsed variational inference.
//!
//! Global statistics (topic-word expected counts and per-topic document usage)
//! are updated by a decaying convex combination with minibatch estimates
//! rescaled to the corpus size. The truncation-free engine (HCSVB0) applies
//! the hybrid update per token, instantiating topics on demand; the finite
//! baselines keep `K` fixed:
//!
//! - SCVB0: symmetric document prior `a / K` per topic.
//! - PCSVB0: the HCSVB0 stick-breaking prior truncated at `K` topics.

mod step;
mod synth;

pub use step::{infer_document, minibatch_step, DocInference, StepReport};
pub use synth::generate_lda;

use rand::Rng;
use rand_distr::{Distribution, Gamma};

use crate::hybrid::ResponsibilityVector;
use crate::numeric::normalize_in_place;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StochasticMode {
    /// Truncation-free hybrid updates (HCSVB0).
    Hybrid,
    /// Fixed `K`, symmetric document prior (SCVB0).
    Scvb0,
    /// Fixed `K`, stick-breaking document prior without the remainder slot (PCSVB0).
    Pcsvb0,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HdpHyper {
    /// Document-level concentration.
    pub a: f64,
    /// Top-level stick concentration.
    pub alpha0: f64,
    /// Topic-word smoothing.
    pub beta: f64,
    pub tau0: f64,
    pub kappa: f64,
    pub batch_size: usize,
    /// Local passes over a document's tokens; only the last may create topics.
    pub local_passes: usize,
    /// Topics whose usage falls below this are pruned after each hybrid step.
    pub prune_threshold: f64,
}

impl Default for HdpHyper {
    fn default() -> Self {
        HdpHyper {
            a: 1.0,
            alpha0: 1.0,
            beta: 0.01,
            tau0: 64.0,
            kappa: 0.6,
            batch_size: 60,
            local_passes: 5,
            prune_threshold: 1e-2,
        }
    }
}

impl HdpHyper {
    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64, name: &str| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::arg(format!("{name} must be positive, got {v}")))
            }
        };
        positive(self.a, "a")?;
        positive(self.alpha0, "alpha0")?;
        positive(self.beta, "beta")?;
        if !(self.tau0 >= 0.0 && self.tau0.is_finite()) {
            return Err(Error::arg(format!("tau0 must be nonnegative, got {}", self.tau0)));
        }
        if !(self.kappa > 0.5 && self.kappa <= 1.0) {
            return Err(Error::arg(format!("kappa must lie in (0.5, 1], got {}", self.kappa)));
        }
        if self.batch_size == 0 {
            return Err(Error::arg("batch size must be at least 1"));
        }
        if self.local_passes == 0 {
            return Err(Error::arg("at least one local pass is required"));
        }
        Ok(())
    }
}

/// Robbins-Monro step size `ρ_t = (τ0 + t)^(-κ)`, capped at 1.
pub fn step_size(t: u64, hyper: &HdpHyper) -> f64 {
    (hyper.tau0 + t as f64).powf(-hyper.kappa).min(1.0)
}

/// Global HDP-LDA statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct HdpState {
    pub(crate) vocab_size: usize,
    /// Number of training documents the minibatch statistics are scaled to.
    pub(crate) corpus_docs: usize,
    pub(crate) n_kw: Vec<Vec<f64>>,
    pub(crate) n_k: Vec<f64>,
    pub(crate) usage: Vec<f64>,
    pub(crate) pi: Vec<f64>,
    pub(crate) pi_rest: f64,
    pub(crate) t: u64,
}

impl HdpState {
    /// `K = 0`, all stick mass on the remainder.
    pub fn empty(vocab_size: usize, corpus_docs: usize) -> Self {
        HdpState {
            vocab_size,
            corpus_docs,
            n_kw: Vec::new(),
            n_k: Vec::new(),
            usage: Vec::new(),
            pi: Vec::new(),
            pi_rest: 1.0,
            t: 0,
        }
    }

    /// `k` topics with topic-word counts drawn around one (`Gamma(100, 0.01)`).
    /// SCVB0 uses a symmetric prior; PCSVB0 starts from the stick weights of zero usage.
    pub fn finite<R: Rng + ?Sized>(
        vocab_size: usize,
        corpus_docs: usize,
        k: usize,
        mode: StochasticMode,
        hyper: &HdpHyper,
        rng: &mut R,
    ) -> Result<Self> {
        if k == 0 {
            return Err(Error::arg("finite models need at least one topic"));
        }
        if mode == StochasticMode::Hybrid {
            return Err(Error::arg("the hybrid engine starts from an empty model"));
        }
        let gamma = Gamma::new(100.0, 0.01).expect("valid gamma parameters");
        let n_kw: Vec<Vec<f64>> = (0..k)
            .map(|_| (0..vocab_size).map(|_| gamma.sample(rng)).collect())
            .collect();
        let n_k = n_kw.iter().map(|row| row.iter().sum()).collect();
        let mut s = HdpState {
            vocab_size,
            corpus_docs,
            n_kw,
            n_k,
            usage: vec![0.0; k],
            pi: vec![1.0 / k as f64; k],
            pi_rest: 0.0,
            t: 0,
        };
        if mode == StochasticMode::Pcsvb0 {
            update_stick_weights(&mut s, hyper);
        }
        Ok(s)
    }

    /// Assembles a state from explicit statistics (snapshots, tests).
    pub fn from_parts(
        vocab_size: usize,
        corpus_docs: usize,
        n_kw: Vec<Vec<f64>>,
        usage: Vec<f64>,
        pi: Vec<f64>,
        pi_rest: f64,
        t: u64,
    ) -> Result<Self> {
        let k = n_kw.len();
        if usage.len() != k || pi.len() != k || n_kw.iter().any(|r| r.len() != vocab_size) {
            return Err(Error::arg("inconsistent topic dimensions"));
        }
        let n_k = n_kw.iter().map(|row| row.iter().sum()).collect();
        Ok(HdpState {
            vocab_size,
            corpus_docs,
            n_kw,
            n_k,
            usage,
            pi,
            pi_rest,
            t,
        })
    }

    pub fn k(&self) -> usize {
        self.n_kw.len()
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn corpus_docs(&self) -> usize {
        self.corpus_docs
    }

    pub fn topic_word(&self) -> &[Vec<f64>] {
        &self.n_kw
    }

    pub fn topic_totals(&self) -> &[f64] {
        &self.n_k
    }

    pub fn usage(&self) -> &[f64] {
        &self.usage
    }

    pub fn pi(&self) -> &[f64] {
        &self.pi
    }

    pub fn pi_rest(&self) -> f64 {
        self.pi_rest
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    /// `|Σ π + π_rest − 1|`.
    pub fn stick_residual(&self) -> f64 {
        (self.pi.iter().sum::<f64>() + self.pi_rest - 1.0).abs()
    }

    /// Smoothed topic-word probability `(N_kw + β) / (N_k + Vβ)`.
    pub fn word_prob(&self, k: usize, w: u32, beta: f64) -> f64 {
        (self.n_kw[k][w as usize] + beta) / (self.n_k[k] + self.vocab_size as f64 * beta)
    }

    pub(crate) fn recompute_totals(&mut self) {
        self.n_k = self.n_kw.iter().map(|row| row.iter().sum()).collect();
    }

    /// Appends a topic holding `mass` of word `w` and breaks a stick for it off
    /// the remainder at the zero-usage stick mean `1 / (1 + α0)`.
    pub(crate) fn birth(&mut self, w: u32, mass: f64, alpha0: f64) -> usize {
        let mut row = vec![0.0; self.vocab_size];
        row[w as usize] = mass;
        self.n_kw.push(row);
        self.n_k.push(mass);
        self.usage.push(mass);
        let v = 1.0 / (1.0 + alpha0);
        self.pi.push(self.pi_rest * v);
        self.pi_rest *= 1.0 - v;
        self.n_kw.len() - 1
    }

    /// Reorders topics so that topic `j` becomes the old topic `order[j]`.
    fn permute(&mut self, order: &[usize]) {
        let take = |v: &Vec<f64>| order.iter().map(|&i| v[i]).collect::<Vec<_>>();
        self.n_k = take(&self.n_k);
        self.usage = take(&self.usage);
        self.pi = take(&self.pi);
        let mut rows = std::mem::take(&mut self.n_kw);
        self.n_kw = order.iter().map(|&i| std::mem::take(&mut rows[i])).collect();
    }
}

/// Zero-order collapsed token responsibilities with a DP document prior:
/// `(n_dk + a π_k)(N_kw + β)/(N_k + Vβ)` for each topic and, when `new_slot`
/// is set, `a π_rest / V` for an uninstantiated topic.
///
/// `doc_counts` must exclude the token's own contribution. Entries beyond its
/// length count as zero.
pub fn token_responsibilities(
    w: u32,
    doc_counts: &[f64],
    state: &HdpState,
    hyper: &HdpHyper,
    new_slot: bool,
) -> ResponsibilityVector {
    let k = state.k();
    let mut values = Vec::with_capacity(k + 1);
    for topic in 0..k {
        let n_dk = doc_counts.get(topic).copied().unwrap_or(0.0);
        values.push((n_dk + hyper.a * state.pi[topic]) * state.word_prob(topic, w, hyper.beta));
    }
    values.push(if new_slot {
        hyper.a * state.pi_rest / state.vocab_size as f64
    } else {
        0.0
    });
    let total = normalize_in_place(&mut values);
    assert!(total > 0.0 && total.is_finite(), "token responsibilities vanished");
    ResponsibilityVector::from_probs(values)
}

/// Size-biased stick weights from topic usage.
///
/// Topics are first sorted by descending usage. Each stick takes the
/// posterior-mean fraction of a `Beta(1 + m_k, α0 + Σ_{l>k} m_l)`,
/// `v_k = (1 + m_k) / (1 + α0 + Σ_{l≥k} m_l)`, and
/// `π_k = v_k Π_{l<k} (1 − v_l)`, `π_rest = Π_{l≤K} (1 − v_l)`.
///
/// Returns the normalization residual `|Σ π + π_rest − 1|`.
pub fn update_stick_weights(state: &mut HdpState, hyper: &HdpHyper) -> f64 {
    let k = state.k();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&i, &j| state.usage[j].total_cmp(&state.usage[i]).then(i.cmp(&j)));
    if order.iter().enumerate().any(|(pos, &i)| pos != i) {
        state.permute(&order);
    }
    let mut tail: f64 = state.usage.iter().map(|m| m.max(0.0)).sum();
    let mut rest = 1.0;
    for topic in 0..k {
        let m = state.usage[topic].max(0.0);
        let v = (1.0 + m) / (1.0 + hyper.alpha0 + tail);
        state.pi[topic] = rest * v;
        rest *= 1.0 - v;
        tail = (tail - m).max(0.0);
    }
    state.pi_rest = rest;
    state.stick_residual()
}

/// Removes topics with usage below `threshold`, keeping the most used one if
/// all would go. Returns the number removed.
pub fn prune_topics(state: &mut HdpState, threshold: f64) -> usize {
    let k = state.k();
    if k == 0 {
        return 0;
    }
    let mut keep: Vec<bool> = state.usage.iter().map(|&m| m >= threshold).collect();
    if !keep.iter().any(|&x| x) {
        let best = (0..k).max_by(|&i, &j| state.usage[i].total_cmp(&state.usage[j])).unwrap_or(0);
        keep[best] = true;
    }
    let order: Vec<usize> = (0..k).filter(|&i| keep[i]).collect();
    let pruned = k - order.len();
    if pruned > 0 {
        let freed: f64 = (0..k).filter(|&i| !keep[i]).map(|i| state.pi[i]).sum();
        state.permute(&order);
        state.pi_rest += freed;
    }
    pruned
}
