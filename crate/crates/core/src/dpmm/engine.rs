use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::Rng;

use super::{DpmmHyper, DpmmState};
use crate::hybrid::{hybrid_update, HybridUpdate, ResponsibilityVector};
use crate::numeric::categorical_from_uniform;
use crate::Result;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SweepReport {
    pub k_before: usize,
    pub k_after: usize,
    pub new_components: usize,
    pub pruned: usize,
    /// Update steps where the instantiated components outweigh the new slot (`ξ₁ > ξ₂`).
    pub dominant_steps: usize,
    pub steps: usize,
    pub elapsed: Duration,
}

fn sweep_order<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    order
}

fn track(report: &mut SweepReport, phi: &ResponsibilityVector) {
    let (xi1, xi2) = phi.xi();
    report.steps += 1;
    if xi1 > xi2 {
        report.dominant_steps += 1;
    }
}

/// One hybrid collapsed variational sweep over every document in a seeded
/// random order, followed by pruning and a from-scratch statistics refresh.
pub fn hcvb0_sweep<R: Rng + ?Sized>(
    state: &mut DpmmState,
    hyper: &DpmmHyper,
    prune_threshold: f64,
    rng: &mut R,
) -> Result<SweepReport> {
    let start = Instant::now();
    let mut report = SweepReport {
        k_before: state.k(),
        ..Default::default()
    };
    for i in sweep_order(state.corpus.len(), rng) {
        state.detach(i)?;
        let phi = state.cvb0_responsibilities(i, hyper);
        track(&mut report, &phi);
        let update = hybrid_update(&phi, rng);
        if update.is_new() {
            report.new_components += 1;
        }
        state.apply_update(i, &update);
    }
    report.pruned = state.prune_components(prune_threshold);
    state.recompute_from_gamma();
    report.k_after = state.k();
    report.elapsed = start.elapsed();
    Ok(report)
}

/// One collapsed Gibbs sweep. The conditional is the same `K+1` vector as
/// CVB0, which is exact when all counts are integers.
pub fn cgs_sweep<R: Rng + ?Sized>(
    state: &mut DpmmState,
    hyper: &DpmmHyper,
    prune_threshold: f64,
    rng: &mut R,
) -> Result<SweepReport> {
    assert!(state.is_hard(), "collapsed Gibbs needs a hard-assignment state");
    let start = Instant::now();
    let mut report = SweepReport {
        k_before: state.k(),
        ..Default::default()
    };
    for i in sweep_order(state.corpus.len(), rng) {
        state.detach(i)?;
        let phi = state.cvb0_responsibilities(i, hyper);
        track(&mut report, &phi);
        let z = categorical_from_uniform(phi.values(), rng.random());
        if z == state.k() {
            report.new_components += 1;
        }
        state.assign(i, z);
    }
    report.pruned = state.prune_components(prune_threshold);
    state.recompute_from_gamma();
    report.k_after = state.k();
    report.elapsed = start.elapsed();
    Ok(report)
}

/// One CVB0 sweep at the state's fixed truncation: no new-component slot and
/// no pruning, rows keep the full normalized `T`-vector.
pub fn tcvb0_sweep<R: Rng + ?Sized>(state: &mut DpmmState, hyper: &DpmmHyper, rng: &mut R) -> Result<SweepReport> {
    let start = Instant::now();
    let t = state.k();
    let mut report = SweepReport {
        k_before: t,
        k_after: t,
        ..Default::default()
    };
    for i in sweep_order(state.corpus.len(), rng) {
        state.detach(i)?;
        let weights = state.log_weights(&state.corpus.docs[i], hyper, false);
        let mut probs = weights;
        crate::numeric::normalize_log_in_place(&mut probs);
        report.steps += 1;
        state.apply_update(i, &HybridUpdate::Truncated(probs));
    }
    state.recompute_from_gamma();
    report.elapsed = start.elapsed();
    Ok(report)
}
