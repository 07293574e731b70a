use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rand_distr::Gamma;

use crate::corpus::{Corpus, Document};
use crate::numeric::normalize_log_in_place;
use crate::{seeded_rng, Error, Result};

/// Draws from a Dirichlet with the given concentrations.
///
/// Gamma variates are formed in log space (`ln G(a) = ln G(a + 1) + ln U / a`)
/// so that very small concentrations do not underflow to an all-zero vector.
pub fn sample_dirichlet<R: Rng + ?Sized>(concentration: &[f64], rng: &mut R) -> Vec<f64> {
    let mut logs: Vec<f64> = concentration
        .iter()
        .map(|&a| {
            let g: f64 = Gamma::new(a + 1.0, 1.0).expect("positive concentration").sample(rng);
            let u: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
            g.ln() + u.ln() / a
        })
        .collect();
    normalize_log_in_place(&mut logs);
    logs
}

/// A sampled finite mixture and the corpus drawn from it.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticMixture {
    pub corpus: Corpus,
    /// True component of each document.
    pub labels: Vec<usize>,
    /// Mixture weights `θ`.
    pub weights: Vec<f64>,
    /// Word distribution of each component.
    pub components: Vec<Vec<f64>>,
}

/// Samples a corpus from the finite mixture
/// `θ ~ Dir(α/K)`, `φ_k ~ Dir(β)`, `z_i ~ Cat(θ)`, `x_i ~ Mult(L, φ_{z_i})`.
pub fn sample_mixture(
    k_true: usize,
    n_docs: usize,
    vocab_size: usize,
    doc_length: usize,
    alpha: f64,
    beta_true: f64,
    seed: u64,
) -> Result<SyntheticMixture> {
    if k_true == 0 || n_docs == 0 || vocab_size == 0 || doc_length == 0 || !(alpha > 0.0) || !(beta_true > 0.0) {
        return Err(Error::arg("synthetic corpus parameters must all be positive"));
    }
    let mut rng = seeded_rng(seed);
    let weights = sample_dirichlet(&vec![alpha / k_true as f64; k_true], &mut rng);
    let components: Vec<Vec<f64>> = (0..k_true)
        .map(|_| sample_dirichlet(&vec![beta_true; vocab_size], &mut rng))
        .collect();
    let words: Vec<WeightedIndex<f64>> = components
        .iter()
        .map(|phi| WeightedIndex::new(phi).expect("a Dirichlet draw has positive mass"))
        .collect();
    let pick = WeightedIndex::new(&weights).expect("a Dirichlet draw has positive mass");

    let mut labels = Vec::with_capacity(n_docs);
    let mut docs = Vec::with_capacity(n_docs);
    for i in 0..n_docs {
        let z = pick.sample(&mut rng);
        let tokens: Vec<u32> = (0..doc_length).map(|_| words[z].sample(&mut rng) as u32).collect();
        docs.push(Document::from_tokens(i, tokens));
        labels.push(z);
    }
    Ok(SyntheticMixture {
        corpus: Corpus::new(vocab_size, docs)?,
        labels,
        weights,
        components,
    })
}

/// [`sample_mixture`] reduced to the corpus and the true labels.
pub fn generate_synthetic(
    k_true: usize,
    n_docs: usize,
    vocab_size: usize,
    doc_length: usize,
    alpha: f64,
    beta_true: f64,
    seed: u64,
) -> Result<(Corpus, Vec<usize>)> {
    let m = sample_mixture(k_true, n_docs, vocab_size, doc_length, alpha, beta_true, seed)?;
    Ok((m.corpus, m.labels))
}
