//! Monte Carlo checks of the hybrid update's distributional guarantees:
//! the realized `K+1` vector has mean `φ`, and the new-component event has the
//! law of a Gibbs draw of the new slot, Bernoulli(`φ_{K+1}`).

use rand::Rng;

use crate::hybrid::{hybrid_update, ResponsibilityVector};
use crate::{seeded_rng, EngineRng};

#[derive(Debug, Clone, PartialEq)]
pub struct PropertyResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

/// A random `K+1` probability vector with `K` in `1..=max_k`. Roughly one in
/// eight vectors puts all mass on existing components or all on the new slot.
pub fn random_phi(rng: &mut EngineRng, max_k: usize) -> ResponsibilityVector {
    let k = rng.random_range(1..=max_k);
    let mut v: Vec<f64> = (0..=k).map(|_| rng.random::<f64>().powi(2)).collect();
    match rng.random_range(0..16) {
        0 => v[k] = 0.0,
        1 => v[..k].iter_mut().for_each(|x| *x = 0.0),
        _ => {}
    }
    if v.iter().sum::<f64>() == 0.0 {
        v[k] = 1.0;
    }
    let total: f64 = v.iter().sum();
    ResponsibilityVector::from_probs(v.into_iter().map(|x| x / total).collect())
}

fn within(mean: f64, target: f64, sd: f64, draws: usize) -> bool {
    if sd == 0.0 {
        (mean - target).abs() <= 1e-12
    } else {
        (mean - target).abs() <= 3.0 * sd / (draws as f64).sqrt()
    }
}

/// Largest `|mean − φ_k| / SE` over coordinates (0 where the variance vanishes).
fn expectation_check(phi: &ResponsibilityVector, draws: usize, rng: &mut EngineRng) -> (bool, f64) {
    let k = phi.k();
    let mut sums = vec![0.0; k + 1];
    for _ in 0..draws {
        for (s, x) in sums.iter_mut().zip(hybrid_update(phi, rng).realized(k)) {
            *s += x;
        }
    }
    let (xi1, xi2) = phi.xi();
    let mut ok = true;
    let mut worst: f64 = 0.0;
    for (c, s) in sums.iter().enumerate() {
        let p = phi.values()[c];
        let sd = if c < k {
            if xi1 > 0.0 {
                p / xi1 * (xi1 * xi2).sqrt()
            } else {
                0.0
            }
        } else {
            (xi1 * xi2).sqrt()
        };
        let mean = s / draws as f64;
        ok &= within(mean, p, sd, draws);
        if sd > 0.0 {
            worst = worst.max((mean - p).abs() / (sd / (draws as f64).sqrt()));
        }
    }
    (ok, worst)
}

pub fn expectation_preservation(vectors: usize, draws: usize, seed: u64) -> PropertyResult {
    let mut rng = seeded_rng(seed);
    let mut failures = 0;
    let mut worst: f64 = 0.0;
    for _ in 0..vectors {
        let phi = random_phi(&mut rng, 20);
        let (ok, z) = expectation_check(&phi, draws, &mut rng);
        failures += usize::from(!ok);
        worst = worst.max(z);
    }
    PropertyResult {
        name: "expectation preservation".into(),
        passed: failures == 0,
        detail: format!("{vectors} vectors x {draws} draws, {failures} outside 3 SE, worst |z| = {worst:.3}"),
    }
}

pub fn new_component_law(vectors: usize, draws: usize, seed: u64) -> PropertyResult {
    let mut rng = seeded_rng(seed);
    let mut failures = 0;
    let mut identity_failures = 0;
    for _ in 0..vectors {
        let phi = random_phi(&mut rng, 20);
        let (xi1, xi2) = phi.xi();
        if xi2 != phi.new_slot() {
            identity_failures += 1;
        }
        let births = (0..draws).filter(|_| hybrid_update(&phi, &mut rng).is_new()).count();
        let freq = births as f64 / draws as f64;
        if !within(freq, xi2, (xi1 * xi2).sqrt(), draws) {
            failures += 1;
        }
    }
    PropertyResult {
        name: "new-component law".into(),
        passed: failures == 0 && identity_failures == 0,
        detail: format!("{vectors} vectors x {draws} draws, {failures} outside 3 SE, {identity_failures} identity failures"),
    }
}

/// Both checks with the default sizes (50 and 20 vectors, 10^5 draws each).
pub fn run_all(seed: u64) -> Vec<PropertyResult> {
    vec![
        expectation_preservation(50, 100_000, seed),
        new_component_law(20, 100_000, seed.wrapping_add(1)),
    ]
}
