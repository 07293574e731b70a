#![allow(dead_code)]

use std::collections::{BTreeMap, HashMap};

use hybrid_dp::cli::RunConfig;
use hybrid_dp::corpus::{Corpus, Document};
use hybrid_dp::dpmm::{DpmmState, GammaRow};

/// Document predictive as a sequential urn, multiplied out in linear space:
/// every token is drawn given the component counts plus the tokens before it.
pub fn urn_predictive(doc: &Document, counts: &BTreeMap<u32, f64>, beta: f64, v: usize) -> f64 {
    let mut drawn: HashMap<u32, f64> = HashMap::new();
    let total: f64 = counts.values().sum();
    let mut p = 1.0;
    for (t, w) in doc.tokens().enumerate() {
        let seen = drawn.entry(w).or_insert(0.0);
        let n_w = counts.get(&w).copied().unwrap_or(0.0);
        p *= (n_w + *seen + beta) / (total + t as f64 + v as f64 * beta);
        *seen += 1.0;
    }
    p
}

/// Responsibilities of document `i` written out directly from the rows of
/// every other document: `m_k / (m + α) · p(x_i | k)` and
/// `α / (m + α) · p(x_i | β)`, normalized in linear space.
pub fn brute_force_responsibilities(
    corpus: &Corpus,
    gamma: &[GammaRow],
    k: usize,
    i: usize,
    alpha: f64,
    beta: f64,
) -> Vec<f64> {
    let v = corpus.vocab_size;
    let mut mass = vec![0.0; k];
    let mut counts = vec![BTreeMap::<u32, f64>::new(); k];
    for (j, (doc, row)) in corpus.docs.iter().zip(gamma).enumerate() {
        if j == i {
            continue;
        }
        for &(c, g) in row {
            mass[c] += g;
            for &(w, x) in doc.entries() {
                *counts[c].entry(w).or_insert(0.0) += g * x as f64;
            }
        }
    }
    let total: f64 = mass.iter().sum();
    let doc = &corpus.docs[i];
    let mut out: Vec<f64> = (0..k)
        .map(|c| mass[c] / (total + alpha) * urn_predictive(doc, &counts[c], beta, v))
        .collect();
    out.push(alpha / (total + alpha) * urn_predictive(doc, &BTreeMap::new(), beta, v));
    let z: f64 = out.iter().sum();
    out.iter().map(|x| x / z).collect()
}

pub fn max_rel_err(got: &[f64], want: &[f64]) -> f64 {
    assert_eq!(got.len(), want.len());
    got.iter()
        .zip(want)
        .map(|(g, w)| {
            if *w == 0.0 {
                g.abs()
            } else {
                ((g - w) / w).abs()
            }
        })
        .fold(0.0, f64::max)
}

/// Share of documents whose cluster's majority true label matches their own.
pub fn majority_accuracy(clusters: &[Option<usize>], truth: &[usize]) -> f64 {
    let mut table: HashMap<(Option<usize>, usize), usize> = HashMap::new();
    for (c, t) in clusters.iter().zip(truth) {
        *table.entry((*c, *t)).or_default() += 1;
    }
    let mut best: HashMap<Option<usize>, usize> = HashMap::new();
    for ((c, _), n) in table {
        let b = best.entry(c).or_default();
        *b = (*b).max(n);
    }
    best.values().sum::<usize>() as f64 / truth.len() as f64
}

/// Statistics rebuilt from the responsibility rows alone:
/// per component `(doc mass, word counts)`.
pub fn stats_from_gamma(state: &DpmmState) -> Vec<(f64, BTreeMap<u32, f64>)> {
    let mut out = vec![(0.0, BTreeMap::new()); state.k()];
    for (doc, row) in state.corpus().docs.iter().zip(state.gamma()) {
        for &(c, g) in row {
            out[c].0 += g;
            for &(w, x) in doc.entries() {
                *out[c].1.entry(w).or_insert(0.0) += g * x as f64;
            }
        }
    }
    out
}

/// Largest absolute gap between the state's statistics and a rebuild from its rows.
pub fn recompute_gap(state: &DpmmState) -> f64 {
    let rebuilt = stats_from_gamma(state);
    let mut gap: f64 = 0.0;
    for (c, (mass, words)) in state.components().iter().zip(&rebuilt) {
        gap = gap.max((c.doc_mass - mass).abs());
        gap = gap.max((c.stats.total() - words.values().sum::<f64>()).abs());
        for w in 0..state.corpus().vocab_size as u32 {
            gap = gap.max((c.stats.word(w) - words.get(&w).copied().unwrap_or(0.0)).abs());
        }
    }
    gap
}

pub fn config(pairs: &[(&str, &str)]) -> RunConfig {
    let flags: BTreeMap<String, String> = pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
    RunConfig::resolve(&flags, &BTreeMap::new()).expect("valid test configuration")
}
