use std::time::{Duration, Instant};

use rand::Rng;

use super::{prune_topics, step_size, token_responsibilities, update_stick_weights, HdpHyper, HdpState, StochasticMode};
use crate::corpus::Document;
use crate::hybrid::{hybrid_update, HybridUpdate};
use crate::{Error, Result};

/// Final local responsibilities of one document.
#[derive(Debug, Clone, PartialEq)]
pub struct DocInference {
    pub doc_id: usize,
    /// Token word ids, in the order they were visited.
    pub tokens: Vec<u32>,
    /// Per-token topic responsibilities; entries beyond a row's length are zero.
    pub gamma: Vec<Vec<f64>>,
    pub doc_counts: Vec<f64>,
    pub births: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct StepReport {
    pub k_before: usize,
    pub k_after: usize,
    pub births: usize,
    pub pruned: usize,
    pub rho: f64,
    /// Largest `|Σ π + π_rest − 1|` seen after any stick change in this step.
    pub max_stick_residual: f64,
    pub elapsed: Duration,
    pub local: Vec<DocInference>,
}

fn add_into(counts: &mut Vec<f64>, gamma: &[f64], sign: f64) {
    if counts.len() < gamma.len() {
        counts.resize(gamma.len(), 0.0);
    }
    for (c, g) in counts.iter_mut().zip(gamma) {
        *c += sign * g;
    }
}

/// Local collapsed inference for one document against the global statistics.
///
/// Runs `hyper.local_passes` passes over the tokens. In hybrid mode each token
/// update is hybridized; a new-topic draw creates a topic only on the final
/// pass (and only when `birth_mass` is given) and otherwise falls back to the
/// truncated vector.
pub fn infer_document<R: Rng + ?Sized>(
    doc: &Document,
    state: &mut HdpState,
    hyper: &HdpHyper,
    mode: StochasticMode,
    birth_mass: Option<f64>,
    rng: &mut R,
) -> DocInference {
    let tokens: Vec<u32> = doc.tokens().collect();
    let mut gamma: Vec<Vec<f64>> = vec![Vec::new(); tokens.len()];
    let mut doc_counts = vec![0.0; state.k()];
    let mut births = 0;
    let hybrid = mode == StochasticMode::Hybrid;

    for pass in 0..hyper.local_passes {
        let last = pass + 1 == hyper.local_passes;
        for (t, &w) in tokens.iter().enumerate() {
            let old = std::mem::take(&mut gamma[t]);
            add_into(&mut doc_counts, &old, -1.0);
            let phi = token_responsibilities(w, &doc_counts, state, hyper, hybrid);
            let new = if !hybrid {
                phi.existing().to_vec()
            } else {
                match hybrid_update(&phi, rng) {
                    HybridUpdate::Truncated(v) => v,
                    HybridUpdate::NewComponent => match birth_mass {
                        Some(mass) if last => {
                            let k = state.birth(w, mass, hyper.alpha0);
                            births += 1;
                            let mut v = vec![0.0; k + 1];
                            v[k] = 1.0;
                            v
                        }
                        _ => {
                            let (xi1, _) = phi.xi();
                            if xi1 > 0.0 {
                                phi.existing().iter().map(|p| p / xi1).collect()
                            } else {
                                Vec::new()
                            }
                        }
                    },
                }
            };
            add_into(&mut doc_counts, &new, 1.0);
            gamma[t] = new;
        }
    }
    for c in &mut doc_counts {
        *c = c.max(0.0);
    }
    DocInference {
        doc_id: doc.id,
        tokens,
        gamma,
        doc_counts,
        births,
    }
}

/// One stochastic step on a minibatch.
///
/// Every document is inferred locally against the current global statistics;
/// the batch's expected topic-word counts `Ŝ` and document usage
/// `u_dk = 1 − Π_t (1 − γ_tk)` are then blended in as
/// `N ← (1 − ρ_t) N + ρ_t (D / |B|) Ŝ`. Topics created during the step start
/// from zero, so they hold exactly `ρ_t (D / |B|) Ŝ`.
pub fn minibatch_step<R: Rng + ?Sized>(
    state: &mut HdpState,
    batch: &[Document],
    hyper: &HdpHyper,
    mode: StochasticMode,
    rng: &mut R,
) -> Result<StepReport> {
    if batch.is_empty() {
        return Err(Error::arg("minibatch is empty"));
    }
    let start = Instant::now();
    let rho = step_size(state.t, hyper);
    let scale = state.corpus_docs as f64 / batch.len() as f64;
    let k_start = state.k();
    let mut report = StepReport {
        k_before: k_start,
        rho,
        ..Default::default()
    };

    let birth_mass = (mode == StochasticMode::Hybrid).then_some(rho * scale);
    let mut local = Vec::with_capacity(batch.len());
    for doc in batch {
        let inference = infer_document(doc, state, hyper, mode, birth_mass, rng);
        if inference.births > 0 {
            report.max_stick_residual = report.max_stick_residual.max(state.stick_residual());
        }
        local.push(inference);
    }

    let k = state.k();
    let v = state.vocab_size;
    let mut batch_kw = vec![vec![0.0; v]; k];
    let mut batch_usage = vec![0.0; k];
    for inf in &local {
        let mut log_unused = vec![0.0; k];
        for (&w, g) in inf.tokens.iter().zip(&inf.gamma) {
            for (topic, &p) in g.iter().enumerate() {
                batch_kw[topic][w as usize] += p;
                log_unused[topic] += (-p).ln_1p();
            }
        }
        for (u, l) in batch_usage.iter_mut().zip(log_unused) {
            *u += -l.exp_m1();
        }
        report.births += inf.births;
    }

    for topic in 0..k {
        let keep = if topic < k_start { 1.0 - rho } else { 0.0 };
        for (n, s) in state.n_kw[topic].iter_mut().zip(&batch_kw[topic]) {
            *n = keep * *n + rho * scale * s;
        }
        state.usage[topic] = keep * state.usage[topic] + rho * scale * batch_usage[topic];
    }
    state.recompute_totals();

    match mode {
        StochasticMode::Hybrid => {
            report.pruned = prune_topics(state, hyper.prune_threshold);
            report.max_stick_residual = report.max_stick_residual.max(state.stick_residual());
            let r = update_stick_weights(state, hyper);
            report.max_stick_residual = report.max_stick_residual.max(r);
        }
        StochasticMode::Pcsvb0 => {
            let r = update_stick_weights(state, hyper);
            report.max_stick_residual = report.max_stick_residual.max(r);
        }
        StochasticMode::Scvb0 => {}
    }

    state.t += 1;
    report.k_after = state.k();
    report.elapsed = start.elapsed();
    report.local = local;
    Ok(report)
}
