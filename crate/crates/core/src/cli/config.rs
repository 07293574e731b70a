use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::hdplda::HdpHyper;
use crate::{dpmm, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Algorithm {
    Hcvb0,
    Cgs,
    Tcvb0,
    Hcsvb0,
    Scvb0,
    Pcsvb0,
}

impl Algorithm {
    pub const ALL: [Algorithm; 6] = [
        Algorithm::Hcvb0,
        Algorithm::Cgs,
        Algorithm::Tcvb0,
        Algorithm::Hcsvb0,
        Algorithm::Scvb0,
        Algorithm::Pcsvb0,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Hcvb0 => "hcvb0",
            Algorithm::Cgs => "cgs",
            Algorithm::Tcvb0 => "tcvb0",
            Algorithm::Hcsvb0 => "hcsvb0",
            Algorithm::Scvb0 => "scvb0",
            Algorithm::Pcsvb0 => "pcsvb0",
        }
    }

    /// Fixed-truncation algorithms take `T`; the others grow `K` themselves.
    pub fn is_finite(self) -> bool {
        matches!(self, Algorithm::Tcvb0 | Algorithm::Scvb0 | Algorithm::Pcsvb0)
    }

    pub fn is_stochastic(self) -> bool {
        matches!(self, Algorithm::Hcsvb0 | Algorithm::Scvb0 | Algorithm::Pcsvb0)
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s.to_ascii_lowercase())
            .ok_or_else(|| Error::arg(format!("unknown algorithm {s:?}")))
    }
}

/// Every setting of a training run, with defaults applied.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub algorithm: Algorithm,
    pub corpus: PathBuf,
    pub vocab: Option<PathBuf>,
    /// Train on a seeded uniform subset of this many documents.
    pub subsample: Option<usize>,
    pub test_fraction: f64,
    pub estimation_fraction: f64,
    pub alpha: f64,
    pub beta: f64,
    pub a: f64,
    pub alpha0: f64,
    pub tau0: f64,
    pub kappa: f64,
    pub batch_size: usize,
    pub local_passes: usize,
    pub prune_threshold: f64,
    pub seed: u64,
    /// Batch sweeps (single-membership algorithms).
    pub sweeps: u64,
    /// Minibatch steps (stochastic algorithms).
    pub steps: u64,
    pub truncation: Option<usize>,
    pub eval_every: u64,
    /// Record wall-clock seconds in the metrics; when off the column is 0 and
    /// the CSV is byte-reproducible.
    pub timing: bool,
}

/// Keys accepted on the command line (as `--key`) and in config files (as `key=value`).
pub const KEYS: &[&str] = &[
    "algo",
    "corpus",
    "vocab",
    "subsample",
    "test-fraction",
    "estimation-fraction",
    "alpha",
    "beta",
    "a",
    "alpha0",
    "tau0",
    "kappa",
    "batch-size",
    "local-passes",
    "prune-threshold",
    "seed",
    "sweeps",
    "steps",
    "T",
    "eval-every",
    "timing",
];

/// Parses `key=value` lines; blank lines and `#` comments are ignored.
pub fn parse_config_file(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::parse(i + 1, "expected key=value"))?;
        let k = k.trim();
        let k = if k == "truncation" { "T" } else { k };
        if !KEYS.contains(&k) {
            return Err(Error::parse(i + 1, format!("unknown key {k:?}")));
        }
        out.insert(k.to_string(), v.trim().to_string());
    }
    Ok(out)
}

fn get<T: FromStr>(map: &BTreeMap<String, String>, key: &str) -> Result<Option<T>> {
    map.get(key)
        .map(|v| v.parse::<T>().map_err(|_| Error::arg(format!("invalid value {v:?} for {key}"))))
        .transpose()
}

impl RunConfig {
    /// Resolves settings with precedence `flags > file > defaults` and validates them.
    pub fn resolve(flags: &BTreeMap<String, String>, file: &BTreeMap<String, String>) -> Result<Self> {
        let mut map = file.clone();
        map.extend(flags.iter().map(|(k, v)| (k.clone(), v.clone())));
        for k in map.keys() {
            if !KEYS.contains(&k.as_str()) {
                return Err(Error::arg(format!("unknown setting {k:?}")));
            }
        }

        let algorithm: Algorithm = get(&map, "algo")?.ok_or_else(|| Error::arg("--algo is required"))?;
        let corpus: PathBuf = get(&map, "corpus")?.ok_or_else(|| Error::arg("--corpus is required"))?;
        let hdp = HdpHyper::default();
        let stochastic = algorithm.is_stochastic();
        let truncation: Option<usize> = get(&map, "T")?;
        let truncation = match (algorithm.is_finite(), truncation) {
            (true, Some(0)) => return Err(Error::arg("T must be at least 1")),
            (true, t) => Some(t.unwrap_or(40)),
            (false, Some(_)) => return Err(Error::arg(format!("{algorithm} is truncation-free and takes no T"))),
            (false, None) => None,
        };

        let cfg = RunConfig {
            algorithm,
            corpus,
            vocab: get(&map, "vocab")?,
            subsample: get(&map, "subsample")?,
            test_fraction: get(&map, "test-fraction")?.unwrap_or(0.2),
            estimation_fraction: get(&map, "estimation-fraction")?.unwrap_or(0.7),
            alpha: get(&map, "alpha")?.unwrap_or(dpmm::DEFAULT_ALPHA),
            beta: get(&map, "beta")?.unwrap_or(if stochastic { hdp.beta } else { dpmm::DEFAULT_BETA }),
            a: get(&map, "a")?.unwrap_or(hdp.a),
            alpha0: get(&map, "alpha0")?.unwrap_or(hdp.alpha0),
            tau0: get(&map, "tau0")?.unwrap_or(hdp.tau0),
            kappa: get(&map, "kappa")?.unwrap_or(hdp.kappa),
            batch_size: get(&map, "batch-size")?.unwrap_or(hdp.batch_size),
            local_passes: get(&map, "local-passes")?.unwrap_or(hdp.local_passes),
            prune_threshold: get(&map, "prune-threshold")?.unwrap_or(if stochastic {
                hdp.prune_threshold
            } else {
                dpmm::DEFAULT_PRUNE_THRESHOLD
            }),
            seed: get(&map, "seed")?.unwrap_or(0),
            sweeps: get(&map, "sweeps")?.unwrap_or(100),
            steps: get(&map, "steps")?.unwrap_or(1000),
            truncation,
            eval_every: get(&map, "eval-every")?.unwrap_or(if stochastic { 25 } else { 1 }),
            timing: get(&map, "timing")?.unwrap_or(true),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("test-fraction", self.test_fraction), ("estimation-fraction", self.estimation_fraction)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::arg(format!("{name} must lie in (0, 1), got {v}")));
            }
        }
        if !(self.alpha > 0.0) || !(self.beta > 0.0) {
            return Err(Error::arg("alpha and beta must be positive"));
        }
        if self.eval_every == 0 {
            return Err(Error::arg("eval-every must be at least 1"));
        }
        if self.subsample == Some(0) {
            return Err(Error::arg("subsample must be at least 1"));
        }
        if self.algorithm.is_stochastic() {
            self.hdp_hyper().validate()?;
        }
        if self.algorithm.is_finite() && self.truncation.unwrap_or(0) == 0 {
            return Err(Error::arg("finite algorithms need T >= 1"));
        }
        Ok(())
    }

    pub fn hdp_hyper(&self) -> HdpHyper {
        HdpHyper {
            a: self.a,
            alpha0: self.alpha0,
            beta: self.beta,
            tau0: self.tau0,
            kappa: self.kappa,
            batch_size: self.batch_size,
            local_passes: self.local_passes,
            prune_threshold: self.prune_threshold,
        }
    }

    /// Canonical `key=value` lines of the resolved configuration.
    pub fn canonical(&self) -> String {
        let opt = |v: Option<String>| v.unwrap_or_else(|| "-".into());
        let lines = [
            ("algo", self.algorithm.to_string()),
            ("corpus", self.corpus.display().to_string()),
            ("vocab", opt(self.vocab.as_ref().map(|p| p.display().to_string()))),
            ("subsample", opt(self.subsample.map(|n| n.to_string()))),
            ("test-fraction", format!("{:e}", self.test_fraction)),
            ("estimation-fraction", format!("{:e}", self.estimation_fraction)),
            ("alpha", format!("{:e}", self.alpha)),
            ("beta", format!("{:e}", self.beta)),
            ("a", format!("{:e}", self.a)),
            ("alpha0", format!("{:e}", self.alpha0)),
            ("tau0", format!("{:e}", self.tau0)),
            ("kappa", format!("{:e}", self.kappa)),
            ("batch-size", self.batch_size.to_string()),
            ("local-passes", self.local_passes.to_string()),
            ("prune-threshold", format!("{:e}", self.prune_threshold)),
            ("seed", self.seed.to_string()),
            ("sweeps", self.sweeps.to_string()),
            ("steps", self.steps.to_string()),
            ("T", opt(self.truncation.map(|t| t.to_string()))),
            ("eval-every", self.eval_every.to_string()),
            ("timing", self.timing.to_string()),
        ];
        lines.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }

    /// First 16 hex digits of the SHA-256 of the canonical configuration.
    pub fn run_id(&self) -> String {
        let digest = Sha256::digest(self.canonical().as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn map(pairs: &[(&str, &str)]) -> BTreeMap<String, String> {
        pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
    }

    #[test]
    fn flags_override_file_override_defaults() {
        let file = parse_config_file("# comment\nalgo=hcvb0\nbeta = 0.5\nseed=3\n\n").unwrap();
        let flags = map(&[("corpus", "x.txt"), ("seed", "9")]);
        let c = RunConfig::resolve(&flags, &file).unwrap();
        assert_eq!(c.algorithm, Algorithm::Hcvb0);
        assert_eq!(c.beta, 0.5);
        assert_eq!(c.seed, 9);
        assert_eq!(c.alpha, 1.0);
        assert_eq!(c.eval_every, 1);
    }

    #[test]
    fn truncation_rules() {
        let base = [("corpus", "c")];
        let with = |extra: &[(&str, &str)]| {
            let mut m = map(&base);
            m.extend(map(extra));
            RunConfig::resolve(&m, &BTreeMap::new())
        };
        assert!(with(&[("algo", "hcvb0"), ("T", "40")]).is_err());
        assert!(with(&[("algo", "tcvb0"), ("T", "0")]).is_err());
        assert_eq!(with(&[("algo", "pcsvb0"), ("T", "300")]).unwrap().truncation, Some(300));
        assert_eq!(with(&[("algo", "scvb0")]).unwrap().truncation, Some(40));
        let c = with(&[("algo", "hcsvb0")]).unwrap();
        assert_eq!((c.beta, c.eval_every, c.batch_size), (0.01, 25, 60));
    }

    #[test]
    fn run_id_depends_on_settings() {
        let m = map(&[("algo", "cgs"), ("corpus", "c")]);
        let a = RunConfig::resolve(&m, &BTreeMap::new()).unwrap();
        let b = RunConfig::resolve(&m, &BTreeMap::new()).unwrap();
        assert_eq!(a.run_id(), b.run_id());
        assert_eq!(a.run_id().len(), 16);
        let mut m2 = m.clone();
        m2.insert("seed".into(), "1".into());
        assert_ne!(RunConfig::resolve(&m2, &BTreeMap::new()).unwrap().run_id(), a.run_id());
    }

    #[test]
    fn bad_values_are_rejected() {
        assert!(parse_config_file("nonsense").is_err());
        assert!(parse_config_file("colour=blue").is_err());
        let m = map(&[("algo", "hcsvb0"), ("corpus", "c"), ("kappa", "0.4")]);
        assert!(RunConfig::resolve(&m, &BTreeMap::new()).is_err());
        let m = map(&[("algo", "sampler"), ("corpus", "c")]);
        assert!(RunConfig::resolve(&m, &BTreeMap::new()).is_err());
    }
}
