//! Held-out evaluation by fold-in: each test document is split into an
//! estimation part (70% of its tokens by default) used to infer its latent
//! variables with the model frozen, and a scored part whose per-token
//! predictive log-likelihood gives the perplexity.

use std::io::{BufRead, Write};

use crate::corpus::{split_document, Corpus, Document};
use crate::dcm::{log_predictive_doc, log_predictive_empty};
use crate::dpmm::DpmmModel;
use crate::hdplda::{HdpHyper, HdpState};
use crate::numeric::{normalize_in_place, normalize_log_in_place};
use crate::{Error, Result};

pub const DEFAULT_ESTIMATION_FRACTION: f64 = 0.7;
pub const FOLD_IN_TOLERANCE: f64 = 1e-6;
pub const FOLD_IN_MAX_PASSES: usize = 100;

/// Test documents split into `(estimation, scored)` parts.
#[derive(Debug, Clone, PartialEq)]
pub struct HeldOut {
    pub pairs: Vec<(Document, Document)>,
    /// Documents too short to split.
    pub skipped: usize,
}

fn doc_seed(seed: u64, doc_id: usize) -> u64 {
    seed ^ (doc_id as u64).wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Splits every test document; documents shorter than two tokens are skipped
/// and counted.
pub fn split_heldout(test: &Corpus, estimation_fraction: f64, seed: u64) -> Result<HeldOut> {
    let mut pairs = Vec::with_capacity(test.len());
    let mut skipped = 0;
    for doc in &test.docs {
        match split_document(doc, estimation_fraction, doc_seed(seed, doc.id)) {
            Ok(pair) => pairs.push(pair),
            Err(Error::Split { .. }) => skipped += 1,
            Err(e) => return Err(e),
        }
    }
    Ok(HeldOut { pairs, skipped })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Perplexity {
    pub perplexity: f64,
    pub log_likelihood: f64,
    pub tokens: u64,
    pub docs: usize,
    pub skipped: usize,
}

fn finish(log_likelihood: f64, tokens: u64, docs: usize, skipped: usize) -> Result<Perplexity> {
    if tokens == 0 {
        return Err(Error::Evaluation("no held-out tokens to score".into()));
    }
    Ok(Perplexity {
        perplexity: (-log_likelihood / tokens as f64).exp(),
        log_likelihood,
        tokens,
        docs,
        skipped,
    })
}

fn score_doc(scored: &Document, predictive: impl Fn(u32) -> f64) -> f64 {
    scored
        .entries()
        .iter()
        .map(|&(w, c)| c as f64 * predictive(w).ln())
        .sum()
}

/// Single-membership held-out perplexity, including the prior-predictive slot
/// for an uninstantiated component in the indicator posterior.
pub fn heldout_single_membership(model: &DpmmModel, heldout: &HeldOut) -> Result<Perplexity> {
    heldout_single_membership_with(model, heldout, true)
}

/// As [`heldout_single_membership`], with the new-component slot optional.
///
/// The indicator posterior is `q(k) ∝ m_k p(x^a | k)` (and `α p(x^a | β)` for
/// the new slot); each scored token gets `Σ_k q(k) (n_kw + β)/(n_k + Vβ)`,
/// with `1/V` under the new slot.
pub fn heldout_single_membership_with(model: &DpmmModel, heldout: &HeldOut, prior_slot: bool) -> Result<Perplexity> {
    if model.components.is_empty() {
        return Err(Error::Evaluation("model has no components".into()));
    }
    let dcm = &model.hyper.dcm;
    let v = dcm.vocab_size as f64;
    let mut ll = 0.0;
    let mut tokens = 0;
    for (est, scored) in &heldout.pairs {
        let mut q: Vec<f64> = model
            .components
            .iter()
            .map(|c| {
                if c.doc_mass > 0.0 {
                    c.doc_mass.ln() + log_predictive_doc(est, &c.stats, dcm)
                } else {
                    f64::NEG_INFINITY
                }
            })
            .collect();
        if prior_slot {
            q.push(model.hyper.alpha.ln() + log_predictive_empty(est, dcm));
        }
        let z = normalize_log_in_place(&mut q);
        if !z.is_finite() {
            return Err(Error::Evaluation(format!("document {} has no admissible component", est.id)));
        }
        ll += score_doc(scored, |w| {
            let existing: f64 = model
                .components
                .iter()
                .zip(&q)
                .map(|(c, &qk)| qk * c.stats.word_prob(w, dcm))
                .sum();
            existing + if prior_slot { q[q.len() - 1] / v } else { 0.0 }
        });
        tokens += scored.length();
    }
    finish(ll, tokens, heldout.pairs.len(), heldout.skipped)
}

/// Frozen-topic fold-in: zero-order collapsed updates of the estimation part's
/// topic counts, one word type at a time, until the counts move by less than
/// [`FOLD_IN_TOLERANCE`] or [`FOLD_IN_MAX_PASSES`] passes have run. Returns
/// the normalized proportions `θ̂_k ∝ n_dk + a π_k`.
pub fn fold_in(est: &Document, state: &HdpState, hyper: &HdpHyper) -> Vec<f64> {
    fold_in_with(est, state, hyper, FOLD_IN_TOLERANCE, FOLD_IN_MAX_PASSES)
}

/// [`fold_in`] with an explicit stopping rule.
pub fn fold_in_with(est: &Document, state: &HdpState, hyper: &HdpHyper, tolerance: f64, max_passes: usize) -> Vec<f64> {
    let k = state.k();
    let prior: Vec<f64> = state.pi().iter().map(|&p| hyper.a * p).collect();
    let word_probs: Vec<Vec<f64>> = est
        .entries()
        .iter()
        .map(|&(w, _)| (0..k).map(|t| state.word_prob(t, w, hyper.beta)).collect())
        .collect();

    let mut gamma: Vec<Vec<f64>> = word_probs
        .iter()
        .map(|pw| {
            let mut g: Vec<f64> = pw.iter().zip(&prior).map(|(p, a)| p * a).collect();
            if normalize_in_place(&mut g) <= 0.0 {
                g = vec![1.0 / k as f64; k];
            }
            g
        })
        .collect();
    let mut counts = vec![0.0; k];
    for (&(_, c), g) in est.entries().iter().zip(&gamma) {
        for (n, p) in counts.iter_mut().zip(g) {
            *n += c as f64 * p;
        }
    }

    for _ in 0..max_passes {
        let mut moved: f64 = 0.0;
        for ((&(_, c), g), pw) in est.entries().iter().zip(gamma.iter_mut()).zip(&word_probs) {
            let c = c as f64;
            let mut new: Vec<f64> = (0..k)
                .map(|t| ((counts[t] - g[t]).max(0.0) + prior[t]) * pw[t])
                .collect();
            if normalize_in_place(&mut new) <= 0.0 {
                continue;
            }
            for t in 0..k {
                let delta = c * (new[t] - g[t]);
                counts[t] += delta;
                moved = moved.max(delta.abs());
            }
            *g = new;
        }
        if moved < tolerance {
            break;
        }
    }

    let mut theta: Vec<f64> = counts.iter().zip(&prior).map(|(n, a)| n.max(0.0) + a).collect();
    normalize_in_place(&mut theta);
    theta
}

/// Mixed-membership held-out perplexity with topics frozen during fold-in.
pub fn heldout_mixed_membership(state: &HdpState, hyper: &HdpHyper, heldout: &HeldOut) -> Result<Perplexity> {
    heldout_mixed_membership_with(state, hyper, heldout, FOLD_IN_TOLERANCE, FOLD_IN_MAX_PASSES)
}

/// [`heldout_mixed_membership`] with an explicit fold-in stopping rule.
pub fn heldout_mixed_membership_with(
    state: &HdpState,
    hyper: &HdpHyper,
    heldout: &HeldOut,
    tolerance: f64,
    max_passes: usize,
) -> Result<Perplexity> {
    if state.k() == 0 {
        return Err(Error::Evaluation("model has no topics".into()));
    }
    let mut ll = 0.0;
    let mut tokens = 0;
    for (est, scored) in &heldout.pairs {
        let theta = fold_in_with(est, state, hyper, tolerance, max_passes);
        ll += score_doc(scored, |w| {
            theta
                .iter()
                .enumerate()
                .map(|(t, th)| th * state.word_prob(t, w, hyper.beta))
                .sum()
        });
        tokens += scored.length();
    }
    finish(ll, tokens, heldout.pairs.len(), heldout.skipped)
}

/// One evaluation point of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRecord {
    pub run_id: String,
    pub algorithm: String,
    pub iteration: u64,
    pub docs_processed: u64,
    pub wall_clock_s: f64,
    pub k: usize,
    pub heldout_perplexity: f64,
    pub seed: u64,
}

pub const METRICS_HEADER: &str = "run_id,algorithm,iteration,docs_processed,wall_clock_s,K,heldout_perplexity,seed";

/// Streams metrics rows as CSV, header first.
pub struct MetricsWriter<W: Write> {
    out: W,
}

impl<W: Write> MetricsWriter<W> {
    pub fn new(mut out: W) -> Result<Self> {
        writeln!(out, "{METRICS_HEADER}")?;
        Ok(MetricsWriter { out })
    }

    pub fn write(&mut self, r: &MetricsRecord) -> Result<()> {
        if r.run_id.contains([',', '\n']) || r.algorithm.contains([',', '\n']) {
            return Err(Error::arg("metrics identifiers may not contain commas or newlines"));
        }
        // `{}` on f64 is the shortest representation that round-trips.
        writeln!(
            self.out,
            "{},{},{},{},{},{},{},{}",
            r.run_id, r.algorithm, r.iteration, r.docs_processed, r.wall_clock_s, r.k, r.heldout_perplexity, r.seed
        )?;
        self.out.flush()?;
        Ok(())
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

pub fn emit_metrics<'a, W: Write>(records: impl IntoIterator<Item = &'a MetricsRecord>, out: W) -> Result<W> {
    let mut w = MetricsWriter::new(out)?;
    for r in records {
        w.write(r)?;
    }
    Ok(w.into_inner())
}

pub fn parse_metrics<R: BufRead>(input: R) -> Result<Vec<MetricsRecord>> {
    let mut lines = input.lines();
    match lines.next() {
        Some(Ok(h)) if h == METRICS_HEADER => {}
        _ => return Err(Error::parse(1, "missing metrics header")),
    }
    let mut out = Vec::new();
    for (i, line) in lines.enumerate() {
        let lineno = i + 2;
        let line = line?;
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 8 {
            return Err(Error::parse(lineno, format!("expected 8 fields, found {}", f.len())));
        }
        let num = |s: &str| s.parse::<u64>().map_err(|_| Error::parse(lineno, format!("bad integer {s:?}")));
        let real = |s: &str| s.parse::<f64>().map_err(|_| Error::parse(lineno, format!("bad number {s:?}")));
        out.push(MetricsRecord {
            run_id: f[0].to_string(),
            algorithm: f[1].to_string(),
            iteration: num(f[2])?,
            docs_processed: num(f[3])?,
            wall_clock_s: real(f[4])?,
            k: num(f[5])? as usize,
            heldout_perplexity: real(f[6])?,
            seed: num(f[7])?,
        });
    }
    Ok(out)
}
