use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;

use crate::corpus::{Corpus, Document};
use crate::dpmm::sample_dirichlet;
use crate::{seeded_rng, Error, Result};

/// Samples an LDA corpus: topics `φ_k ~ Dir(β)`, per-document proportions
/// `θ_d ~ Dir(α)`, and `doc_length` tokens each drawn from `φ_{z}`, `z ~ θ_d`.
///
/// Returns the corpus and the topic-word distributions.
pub fn generate_lda(
    topics: usize,
    n_docs: usize,
    vocab_size: usize,
    doc_length: usize,
    alpha: f64,
    beta_true: f64,
    seed: u64,
) -> Result<(Corpus, Vec<Vec<f64>>)> {
    if topics == 0 || n_docs == 0 || vocab_size == 0 || doc_length == 0 || !(alpha > 0.0) || !(beta_true > 0.0) {
        return Err(Error::arg("LDA corpus parameters must all be positive"));
    }
    let mut rng = seeded_rng(seed);
    let phi: Vec<Vec<f64>> = (0..topics)
        .map(|_| sample_dirichlet(&vec![beta_true; vocab_size], &mut rng))
        .collect();
    let words: Vec<WeightedIndex<f64>> = phi
        .iter()
        .map(|p| WeightedIndex::new(p).expect("a Dirichlet draw has positive mass"))
        .collect();
    let mut docs = Vec::with_capacity(n_docs);
    for i in 0..n_docs {
        let theta = sample_dirichlet(&vec![alpha; topics], &mut rng);
        let pick = WeightedIndex::new(&theta).expect("a Dirichlet draw has positive mass");
        let tokens: Vec<u32> = (0..doc_length)
            .map(|_| words[pick.sample(&mut rng)].sample(&mut rng) as u32)
            .collect();
        docs.push(Document::from_tokens(i, tokens));
    }
    Ok((Corpus::new(vocab_size, docs)?, phi))
}
