mod common;

use std::collections::BTreeMap;

use rand::Rng;

use common::{brute_force_responsibilities, majority_accuracy, max_rel_err, recompute_gap, urn_predictive};
use hybrid_dp::corpus::{Corpus, Document};
use hybrid_dp::dcm::{log_predictive_doc, ComponentStats};
use hybrid_dp::dpmm::{
    cgs_sweep, hcvb0_sweep, sample_mixture, tcvb0_sweep, Component, DpmmHyper, DpmmModel, DpmmState, GammaRow,
};
use hybrid_dp::eval::{heldout_single_membership, HeldOut};
use hybrid_dp::hybrid::hybrid_update;
use hybrid_dp::{seeded_rng, EngineRng};

fn random_small_state(rng: &mut EngineRng) -> (Corpus, usize, Vec<GammaRow>) {
    let v = rng.random_range(1..=4usize);
    let n = rng.random_range(1..=6usize);
    let k = rng.random_range(1..=3usize);
    let docs: Vec<Document> = (0..n)
        .map(|i| {
            let mut counts: Vec<(u32, u32)> = (0..v as u32).map(|w| (w, rng.random_range(0..4))).collect();
            if counts.iter().all(|&(_, c)| c == 0) {
                counts[0].1 = 1;
            }
            Document::from_counts(i, counts)
        })
        .collect();
    let rows = (0..n)
        .map(|_| {
            let raw: Vec<f64> = (0..k)
                .map(|_| if rng.random_bool(0.25) { 0.0 } else { rng.random::<f64>() + 1e-3 })
                .collect();
            let sum: f64 = raw.iter().sum();
            if sum == 0.0 {
                vec![(rng.random_range(0..k), 1.0)]
            } else {
                raw.iter()
                    .enumerate()
                    .filter(|(_, &g)| g > 0.0)
                    .map(|(c, g)| (c, g / sum))
                    .collect()
            }
        })
        .collect();
    (Corpus::new(v, docs).unwrap(), k, rows)
}

#[test]
fn responsibilities_match_linear_space_transcription() {
    let mut rng = seeded_rng(2024);
    for _ in 0..200 {
        let (corpus, k, rows) = random_small_state(&mut rng);
        let alpha = rng.random_range(0.05..3.0);
        let beta = rng.random_range(0.05..2.0);
        let hyper = DpmmHyper::new(alpha, beta, corpus.vocab_size).unwrap();
        let i = rng.random_range(0..corpus.len());
        let want = brute_force_responsibilities(&corpus, &rows, k, i, alpha, beta);
        let mut state = DpmmState::from_gamma(corpus, k, rows).unwrap();
        state.detach(i).unwrap();
        let got = state.cvb0_responsibilities(i, &hyper);
        let err = max_rel_err(got.values(), &want);
        assert!(err < 1e-10, "rel err {err}");
    }
}

#[test]
fn fractional_statistics_match_urn_after_sweeps() {
    let corpus = Corpus::new(
        5,
        vec![
            Document::from_counts(0, [(0, 4), (1, 1)]),
            Document::from_counts(1, [(0, 3), (2, 2)]),
            Document::from_counts(2, [(3, 5), (4, 1)]),
            Document::from_counts(3, [(3, 2), (4, 3), (1, 1)]),
            Document::from_counts(4, [(2, 6)]),
        ],
    )
    .unwrap();
    let hyper = DpmmHyper::new(1.0, 0.3, 5).unwrap();
    let mut rng = seeded_rng(5);
    let mut state = DpmmState::truncated(corpus.clone(), 3, &mut rng).unwrap();
    for _ in 0..4 {
        tcvb0_sweep(&mut state, &hyper, &mut rng).unwrap();
    }
    let mut fractional = 0;
    for c in state.components() {
        let counts: BTreeMap<u32, f64> = c.stats.words().collect();
        fractional += counts.values().filter(|x| x.fract() != 0.0).count();
        for doc in &corpus.docs {
            let got = log_predictive_doc(doc, &c.stats, &hyper.dcm);
            let want = urn_predictive(doc, &counts, hyper.dcm.beta, 5).ln();
            assert!(((got - want) / want).abs() < 1e-10, "{got} vs {want}");
        }
    }
    assert!(fractional > 0);
}

/// One sweep spelled out step by step so that nothing recomputes the
/// statistics behind the test's back.
fn manual_sweep(state: &mut DpmmState, hyper: &DpmmHyper, rng: &mut EngineRng, dominant: &mut [Vec<bool>]) {
    let mut order: Vec<usize> = (0..state.corpus().len()).collect();
    rand::seq::SliceRandom::shuffle(order.as_mut_slice(), rng);
    for i in order {
        state.detach(i).unwrap();
        let phi = state.cvb0_responsibilities(i, hyper);
        let (xi1, xi2) = phi.xi();
        dominant[i].push(xi1 > xi2);
        let update = hybrid_update(&phi, rng);
        state.apply_update(i, &update);
    }
}

#[test]
fn incremental_statistics_match_recomputation() {
    let m = sample_mixture(4, 120, 30, 20, 8.0, 0.05, 9).unwrap();
    let hyper = DpmmHyper::new(1.0, 0.1, 30).unwrap();
    let mut rng = seeded_rng(1);
    let mut state = DpmmState::empty(m.corpus);
    let mut dominant = vec![Vec::new(); 120];
    for _ in 0..5 {
        manual_sweep(&mut state, &hyper, &mut rng, &mut dominant);
        assert!(recompute_gap(&state) < 1e-9, "gap {}", recompute_gap(&state));
        state.prune_components(1e-3);
        assert!(recompute_gap(&state) < 1e-9);
        for row in state.gamma() {
            assert!((row.iter().map(|&(_, g)| g).sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}

#[test]
fn converged_runs_mostly_keep_the_truncated_vector() {
    let m = sample_mixture(5, 300, 50, 50, 10.0, 0.01, 4).unwrap();
    let hyper = DpmmHyper::new(1.0, 0.1, 50).unwrap();
    let mut rng = seeded_rng(8);
    let mut state = DpmmState::empty(m.corpus);
    let mut dominant = vec![Vec::new(); 300];
    for _ in 0..30 {
        manual_sweep(&mut state, &hyper, &mut rng, &mut dominant);
        state.prune_components(1e-3);
        state.recompute_from_gamma();
    }
    for (i, d) in dominant.iter().enumerate() {
        let late = &d[10..];
        let share = late.iter().filter(|&&x| x).count() as f64 / late.len() as f64;
        assert!(share >= 0.95, "document {i}: {share}");
    }
}

fn partition_posterior(a: &Document, b: &Document, alpha: f64, beta: f64, v: usize) -> f64 {
    let empty = BTreeMap::new();
    let joined = Document::from_tokens(99, a.tokens().chain(b.tokens()));
    let together = urn_predictive(&joined, &empty, beta, v) / (alpha + 1.0);
    let apart = urn_predictive(a, &empty, beta, v) * urn_predictive(b, &empty, beta, v) * alpha / (alpha + 1.0);
    apart / (apart + together)
}

fn cgs_k_frequency(corpus: Corpus, alpha: f64, beta: f64, sweeps: usize, seed: u64) -> (f64, usize) {
    let hyper = DpmmHyper::new(alpha, beta, corpus.vocab_size).unwrap();
    let mut state = DpmmState::empty_hard(corpus);
    let mut rng = seeded_rng(seed);
    let mut counts = [0usize; 3];
    for _ in 0..sweeps {
        cgs_sweep(&mut state, &hyper, 0.5, &mut rng).unwrap();
        counts[state.k()] += 1;
    }
    let modal = if counts[2] > counts[1] { 2 } else { 1 };
    (counts[2] as f64 / sweeps as f64, modal)
}

#[test]
fn two_document_partition_posterior() {
    let a = Document::from_counts(0, [(0, 10)]);
    let b = Document::from_counts(1, [(1, 10)]);
    let want = partition_posterior(&a, &b, 0.5, 0.1, 2);
    let (freq, modal) = cgs_k_frequency(Corpus::new(2, vec![a, b]).unwrap(), 0.5, 0.1, 500, 3);
    assert!(want > 0.99);
    assert_eq!(modal, 2);
    assert!((freq - want).abs() < 0.02);

    // A weakly separated pair, where both partitions carry real mass.
    let a = Document::from_counts(0, [(0, 2), (1, 1)]);
    let b = Document::from_counts(1, [(1, 1), (2, 1)]);
    let want = partition_posterior(&a, &b, 1.0, 1.0, 3);
    let (freq, _) = cgs_k_frequency(Corpus::new(3, vec![a, b]).unwrap(), 1.0, 1.0, 20_000, 4);
    assert!(want > 0.2 && want < 0.8);
    assert!((freq - want).abs() < 0.02, "{freq} vs {want}");
}

#[test]
fn same_seed_same_trajectory() {
    let run = || {
        let m = sample_mixture(3, 80, 20, 15, 5.0, 0.1, 2).unwrap();
        let hyper = DpmmHyper::new(1.0, 0.1, 20).unwrap();
        let mut state = DpmmState::empty(m.corpus);
        let mut rng = seeded_rng(17);
        let ks: Vec<usize> = (0..10)
            .map(|_| hcvb0_sweep(&mut state, &hyper, 1e-3, &mut rng).unwrap().k_after)
            .collect();
        let bits: Vec<Vec<(usize, u64)>> = state
            .gamma()
            .iter()
            .map(|r| r.iter().map(|&(c, g)| (c, g.to_bits())).collect())
            .collect();
        (ks, bits)
    };
    assert_eq!(run(), run());
}

#[test]
fn truncated_baseline_matches_truncation_free_on_easy_data() {
    let m = sample_mixture(5, 400, 50, 40, 10.0, 0.05, 21).unwrap();
    let (train, test) = hybrid_dp::corpus::split_train_test(&m.corpus, 0.2, 1).unwrap();
    let heldout = hybrid_dp::eval::split_heldout(&test, 0.7, 2).unwrap();
    let hyper = DpmmHyper::new(1.0, 0.1, 50).unwrap();
    let mut rng = seeded_rng(3);

    let mut hybrid = DpmmState::empty(train.clone());
    let mut finite = DpmmState::truncated(train, 10, &mut rng).unwrap();
    for _ in 0..50 {
        hcvb0_sweep(&mut hybrid, &hyper, 1e-3, &mut rng).unwrap();
        tcvb0_sweep(&mut finite, &hyper, &mut rng).unwrap();
    }
    let ph = heldout_single_membership(&hybrid.model(&hyper), &heldout).unwrap().perplexity;
    let pf = heldout_single_membership(&finite.model(&hyper), &heldout).unwrap().perplexity;
    assert!((pf / ph - 1.0).abs() < 0.05, "{pf} vs {ph}");
    assert_eq!(finite.k(), 10);
}

#[test]
fn synthetic_labels_follow_the_mixture_weights() {
    let m = sample_mixture(5, 500, 50, 50, 10.0, 0.01, 42).unwrap();
    let mut counts = [0.0f64; 5];
    for &z in &m.labels {
        counts[z] += 1.0;
    }
    let chi2: f64 = counts
        .iter()
        .zip(&m.weights)
        .map(|(c, w)| (c - 500.0 * w).powi(2) / (500.0 * w))
        .sum();
    // 99.9% quantile of chi-square with 4 degrees of freedom.
    assert!(chi2 < 18.47, "chi2 {chi2}");
    assert!(m.corpus.docs.iter().all(|d| d.length() == 50));

    // HCVB0 recovers the labels on this corpus.
    let hyper = DpmmHyper::new(1.0, 0.1, 50).unwrap();
    let mut state = DpmmState::empty(m.corpus);
    let mut rng = seeded_rng(0);
    for _ in 0..20 {
        hcvb0_sweep(&mut state, &hyper, 1e-3, &mut rng).unwrap();
    }
    assert!(majority_accuracy(&state.labels(), &m.labels) >= 0.9);
}

#[test]
fn two_component_heldout_matches_hand_computation() {
    let hyper = DpmmHyper::new(0.7, 0.5, 3).unwrap();
    let comps = [
        (3.0, [(0u32, 5.0), (1, 1.0)]),
        (2.0, [(1, 2.0), (2, 4.0)]),
    ];
    let model = DpmmModel {
        hyper,
        components: comps
            .iter()
            .map(|(m, w)| Component {
                doc_mass: *m,
                stats: ComponentStats::from_words(w.iter().copied()),
            })
            .collect(),
    };
    let est = Document::from_counts(0, [(0, 2), (2, 1)]);
    let scored = Document::from_counts(0, [(0, 1), (1, 1)]);

    let mut q: Vec<f64> = comps
        .iter()
        .map(|(m, w)| m * urn_predictive(&est, &w.iter().copied().collect(), 0.5, 3))
        .collect();
    q.push(0.7 * urn_predictive(&est, &BTreeMap::new(), 0.5, 3));
    let z: f64 = q.iter().sum();
    let token = |w: u32| {
        let existing: f64 = comps
            .iter()
            .zip(&q)
            .map(|((_, words), qk)| {
                let n: f64 = words.iter().map(|x| x.1).sum();
                let nw = words.iter().find(|x| x.0 == w).map_or(0.0, |x| x.1);
                qk / z * (nw + 0.5) / (n + 1.5)
            })
            .sum();
        existing + q[2] / z / 3.0
    };
    let want = (-(token(0).ln() + token(1).ln()) / 2.0).exp();

    let heldout = HeldOut {
        pairs: vec![(est, scored)],
        skipped: 0,
    };
    let got = heldout_single_membership(&model, &heldout).unwrap();
    assert!(((got.perplexity - want) / want).abs() < 1e-10);
    assert_eq!(got.tokens, 2);
}
