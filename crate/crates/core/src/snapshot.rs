//! Versioned, line-oriented model dump.
//!
//! ```text
//! hybrid-dp-snapshot 1
//! model dpmm
//! alpha <real>
//! beta <real>
//! vocab_size <V>
//! components <K>
//! component <doc_mass> <nnz>        (K times, each followed by nnz lines)
//! <word_id> <expected_count>
//! ```
//!
//! The HDP-LDA variant replaces the header block with
//!
//! ```text
//! model hdplda
//! a <real>
//! alpha0 <real>
//! beta <real>
//! tau0 <real>
//! kappa <real>
//! batch_size <int>
//! local_passes <int>
//! prune_threshold <real>
//! vocab_size <V>
//! corpus_docs <D>
//! steps <t>
//! pi_rest <real>
//! topics <K>
//! topic <usage> <pi> <nnz>          (K times, each followed by nnz lines)
//! <word_id> <expected_count>
//! ```
//!
//! Word ids are 0-based, only nonzero counts are listed in ascending word
//! order, and reals use the shortest exponent form that parses back exactly.
//! Responsibilities are not stored; totals are recomputed on load.

use std::io::{BufRead, Write};

use crate::dcm::ComponentStats;
use crate::dpmm::{Component, DpmmHyper, DpmmModel};
use crate::hdplda::{HdpHyper, HdpState};
use crate::{Error, Result};

pub const MAGIC: &str = "hybrid-dp-snapshot";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub enum Snapshot {
    Dpmm(DpmmModel),
    Hdp { state: HdpState, hyper: HdpHyper },
}

fn words_block<W: Write>(out: &mut W, words: impl Iterator<Item = (u32, f64)>) -> Result<()> {
    for (w, c) in words {
        writeln!(out, "{w} {c:e}")?;
    }
    Ok(())
}

pub fn write_snapshot<W: Write>(snapshot: &Snapshot, mut out: W) -> Result<()> {
    writeln!(out, "{MAGIC} {VERSION}")?;
    match snapshot {
        Snapshot::Dpmm(m) => {
            writeln!(out, "model dpmm")?;
            writeln!(out, "alpha {:e}", m.hyper.alpha)?;
            writeln!(out, "beta {:e}", m.hyper.dcm.beta)?;
            writeln!(out, "vocab_size {}", m.hyper.dcm.vocab_size)?;
            writeln!(out, "components {}", m.components.len())?;
            for c in &m.components {
                writeln!(out, "component {:e} {}", c.doc_mass, c.stats.words().count())?;
                words_block(&mut out, c.stats.words())?;
            }
        }
        Snapshot::Hdp { state, hyper } => {
            writeln!(out, "model hdplda")?;
            writeln!(out, "a {:e}", hyper.a)?;
            writeln!(out, "alpha0 {:e}", hyper.alpha0)?;
            writeln!(out, "beta {:e}", hyper.beta)?;
            writeln!(out, "tau0 {:e}", hyper.tau0)?;
            writeln!(out, "kappa {:e}", hyper.kappa)?;
            writeln!(out, "batch_size {}", hyper.batch_size)?;
            writeln!(out, "local_passes {}", hyper.local_passes)?;
            writeln!(out, "prune_threshold {:e}", hyper.prune_threshold)?;
            writeln!(out, "vocab_size {}", state.vocab_size())?;
            writeln!(out, "corpus_docs {}", state.corpus_docs())?;
            writeln!(out, "steps {}", state.steps())?;
            writeln!(out, "pi_rest {:e}", state.pi_rest())?;
            writeln!(out, "topics {}", state.k())?;
            for k in 0..state.k() {
                let row = &state.topic_word()[k];
                let nz = || row.iter().enumerate().filter(|(_, &c)| c != 0.0).map(|(w, &c)| (w as u32, c));
                writeln!(out, "topic {:e} {:e} {}", state.usage()[k], state.pi()[k], nz().count())?;
                words_block(&mut out, nz())?;
            }
        }
    }
    Ok(())
}

struct Lines<R: BufRead> {
    inner: std::io::Lines<R>,
    lineno: usize,
}

impl<R: BufRead> Lines<R> {
    fn next_line(&mut self) -> Result<String> {
        self.lineno += 1;
        match self.inner.next() {
            Some(line) => Ok(line?),
            None => Err(Error::parse(self.lineno, "unexpected end of snapshot")),
        }
    }

    fn err(&self, msg: impl Into<String>) -> Error {
        Error::parse(self.lineno, msg)
    }

    /// Reads `key v1 v2 ...` and returns the values.
    fn keyed(&mut self, key: &str, n: usize) -> Result<Vec<String>> {
        let line = self.next_line()?;
        let mut f = line.split(' ');
        if f.next() != Some(key) {
            return Err(self.err(format!("expected `{key}`")));
        }
        let vals: Vec<String> = f.map(str::to_string).collect();
        if vals.len() != n {
            return Err(self.err(format!("`{key}` takes {n} values")));
        }
        Ok(vals)
    }

    fn value<T: std::str::FromStr>(&mut self, key: &str) -> Result<T> {
        let v = self.keyed(key, 1)?;
        self.parse(&v[0])
    }

    fn parse<T: std::str::FromStr>(&self, s: &str) -> Result<T> {
        s.parse().map_err(|_| self.err(format!("cannot parse {s:?}")))
    }

    fn words(&mut self, nnz: usize, vocab_size: usize) -> Result<Vec<(u32, f64)>> {
        (0..nnz)
            .map(|_| {
                let line = self.next_line()?;
                let (w, c) = line.split_once(' ').ok_or_else(|| self.err("expected `word count`"))?;
                let w: u32 = self.parse(w)?;
                let c: f64 = self.parse(c)?;
                if w as usize >= vocab_size || !(c >= 0.0 && c.is_finite()) {
                    return Err(self.err("word entry out of range"));
                }
                Ok((w, c))
            })
            .collect()
    }
}

pub fn read_snapshot<R: BufRead>(input: R) -> Result<Snapshot> {
    let mut lines = Lines {
        inner: input.lines(),
        lineno: 0,
    };
    let header = lines.next_line()?;
    match header.split_once(' ') {
        Some((MAGIC, v)) if v == VERSION.to_string() => {}
        Some((MAGIC, v)) => return Err(Error::Snapshot(format!("unsupported snapshot version {v}"))),
        _ => return Err(Error::Snapshot("not a model snapshot".into())),
    }
    let kind: String = lines.value("model")?;
    match kind.as_str() {
        "dpmm" => {
            let alpha: f64 = lines.value("alpha")?;
            let beta: f64 = lines.value("beta")?;
            let v: usize = lines.value("vocab_size")?;
            let hyper = DpmmHyper::new(alpha, beta, v)?;
            let k: usize = lines.value("components")?;
            let mut components = Vec::with_capacity(k);
            for _ in 0..k {
                let f = lines.keyed("component", 2)?;
                let doc_mass: f64 = lines.parse(&f[0])?;
                let nnz: usize = lines.parse(&f[1])?;
                let words = lines.words(nnz, v)?;
                components.push(Component {
                    doc_mass,
                    stats: ComponentStats::from_words(words),
                });
            }
            Ok(Snapshot::Dpmm(DpmmModel { hyper, components }))
        }
        "hdplda" => {
            let hyper = HdpHyper {
                a: lines.value("a")?,
                alpha0: lines.value("alpha0")?,
                beta: lines.value("beta")?,
                tau0: lines.value("tau0")?,
                kappa: lines.value("kappa")?,
                batch_size: lines.value("batch_size")?,
                local_passes: lines.value("local_passes")?,
                prune_threshold: lines.value("prune_threshold")?,
            };
            hyper.validate()?;
            let v: usize = lines.value("vocab_size")?;
            let d: usize = lines.value("corpus_docs")?;
            let t: u64 = lines.value("steps")?;
            let pi_rest: f64 = lines.value("pi_rest")?;
            let k: usize = lines.value("topics")?;
            let (mut rows, mut usage, mut pi) = (Vec::with_capacity(k), Vec::with_capacity(k), Vec::with_capacity(k));
            for _ in 0..k {
                let f = lines.keyed("topic", 3)?;
                usage.push(lines.parse(&f[0])?);
                pi.push(lines.parse(&f[1])?);
                let nnz: usize = lines.parse(&f[2])?;
                let mut row = vec![0.0; v];
                for (w, c) in lines.words(nnz, v)? {
                    row[w as usize] = c;
                }
                rows.push(row);
            }
            let state = HdpState::from_parts(v, d, rows, usage, pi, pi_rest, t)?;
            Ok(Snapshot::Hdp { state, hyper })
        }
        other => Err(Error::Snapshot(format!("unknown model kind {other:?}"))),
    }
}
