//! Sparse bag-of-words documents and the UCI bag-of-words file format.
//!
//! Word ids are 0-based in memory and 1-based on disk.

use std::io::{BufRead, Write};

use rand::seq::SliceRandom;

use crate::{seeded_rng, Error, Result};

/// A document as sparse `(word_id, count)` pairs, ascending by word id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    pub id: usize,
    entries: Vec<(u32, u32)>,
    length: u64,
}

impl Document {
    /// Builds a document from arbitrary `(word, count)` pairs. Repeated words are
    /// merged and zero counts dropped.
    pub fn from_counts(id: usize, counts: impl IntoIterator<Item = (u32, u32)>) -> Self {
        let mut entries: Vec<(u32, u32)> = counts.into_iter().filter(|&(_, c)| c > 0).collect();
        entries.sort_unstable_by_key(|&(w, _)| w);
        entries.dedup_by(|next, kept| {
            if next.0 == kept.0 {
                kept.1 += next.1;
                true
            } else {
                false
            }
        });
        let length = entries.iter().map(|&(_, c)| c as u64).sum();
        Document {
            id,
            entries,
            length,
        }
    }

    /// Builds a document from a list of token word ids.
    pub fn from_tokens(id: usize, tokens: impl IntoIterator<Item = u32>) -> Self {
        Self::from_counts(id, tokens.into_iter().map(|w| (w, 1)))
    }

    pub fn entries(&self) -> &[(u32, u32)] {
        &self.entries
    }

    pub fn length(&self) -> u64 {
        self.length
    }

    pub fn is_empty(&self) -> bool {
        self.length == 0
    }

    pub fn count(&self, word: u32) -> u32 {
        self.entries
            .binary_search_by_key(&word, |&(w, _)| w)
            .map(|i| self.entries[i].1)
            .unwrap_or(0)
    }

    /// Token instances in ascending word order (the multiset expansion).
    pub fn tokens(&self) -> impl Iterator<Item = u32> + '_ {
        self.entries
            .iter()
            .flat_map(|&(w, c)| std::iter::repeat_n(w, c as usize))
    }

    pub fn max_word(&self) -> Option<u32> {
        self.entries.last().map(|&(w, _)| w)
    }
}

/// A collection of documents over a shared vocabulary of size `vocab_size`.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub vocab_size: usize,
    pub docs: Vec<Document>,
    pub vocab: Option<Vec<String>>,
}

impl Corpus {
    /// Checks the document invariants against `vocab_size`.
    pub fn new(vocab_size: usize, docs: Vec<Document>) -> Result<Self> {
        if vocab_size == 0 {
            return Err(Error::arg("vocabulary size must be at least 1"));
        }
        for d in &docs {
            if let Some(w) = d.max_word() {
                if w as usize >= vocab_size {
                    return Err(Error::arg(format!(
                        "document {} uses word {} outside vocabulary of size {}",
                        d.id, w, vocab_size
                    )));
                }
            }
        }
        Ok(Corpus {
            vocab_size,
            docs,
            vocab: None,
        })
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    pub fn total_tokens(&self) -> u64 {
        self.docs.iter().map(Document::length).sum()
    }

    pub fn nnz(&self) -> usize {
        self.docs.iter().map(|d| d.entries.len()).sum()
    }

    /// A uniformly drawn subset of `n` documents, kept in original order.
    pub fn subsample(&self, n: usize, seed: u64) -> Corpus {
        if n >= self.docs.len() {
            return self.clone();
        }
        let mut idx: Vec<usize> = (0..self.docs.len()).collect();
        idx.shuffle(&mut seeded_rng(seed));
        idx.truncate(n);
        idx.sort_unstable();
        Corpus {
            vocab_size: self.vocab_size,
            docs: idx.into_iter().map(|i| self.docs[i].clone()).collect(),
            vocab: self.vocab.clone(),
        }
    }
}

/// Non-fatal findings while reading a UCI file.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ParseWarnings {
    pub dropped_empty_docs: usize,
    /// `(declared, found)` when the NNZ header disagrees with the body.
    pub nnz_mismatch: Option<(usize, usize)>,
    pub merged_duplicate_entries: usize,
}

fn header_value(line: Option<std::io::Result<String>>, lineno: usize, name: &str) -> Result<usize> {
    let line = line.ok_or_else(|| Error::parse(lineno, format!("missing {name} header")))??;
    line.trim()
        .parse::<usize>()
        .map_err(|_| Error::parse(lineno, format!("malformed {name} header {:?}", line.trim())))
}

/// Reads a UCI bag-of-words `docword` stream and an optional vocabulary stream.
///
/// Documents are re-indexed 0-based in file order; documents without any
/// entries are dropped and counted in the returned warnings.
pub fn parse_uci_bagofwords<R: BufRead, S: BufRead>(
    docword: R,
    vocab: Option<S>,
) -> Result<(Corpus, ParseWarnings)> {
    let mut lines = docword.lines();
    let n_docs = header_value(lines.next(), 1, "D")?;
    let n_words = header_value(lines.next(), 2, "W")?;
    let nnz = header_value(lines.next(), 3, "NNZ")?;
    if n_words == 0 {
        return Err(Error::parse(2, "W must be at least 1"));
    }

    let mut raw: Vec<Vec<(u32, u32)>> = vec![Vec::new(); n_docs];
    let mut found = 0usize;
    for (i, line) in lines.enumerate() {
        let lineno = i + 4;
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let mut fields = trimmed.split_ascii_whitespace();
        let mut field = |name: &str| -> Result<i64> {
            let f = fields
                .next()
                .ok_or_else(|| Error::parse(lineno, format!("missing {name}")))?;
            f.parse::<i64>()
                .map_err(|_| Error::parse(lineno, format!("malformed {name} {f:?}")))
        };
        let doc = field("docID")?;
        let word = field("wordID")?;
        let count = field("count")?;
        if fields.next().is_some() {
            return Err(Error::parse(lineno, "expected exactly three fields"));
        }
        if doc < 1 || doc as usize > n_docs {
            return Err(Error::parse(lineno, format!("docID {doc} outside 1..={n_docs}")));
        }
        if word < 1 || word as usize > n_words {
            return Err(Error::parse(lineno, format!("wordID {word} outside 1..={n_words}")));
        }
        if count <= 0 {
            return Err(Error::parse(lineno, format!("count {count} must be positive")));
        }
        let count = u32::try_from(count).map_err(|_| Error::parse(lineno, "count overflows u32"))?;
        raw[doc as usize - 1].push((word as u32 - 1, count));
        found += 1;
    }

    let mut warnings = ParseWarnings::default();
    if found != nnz {
        log::warn!("NNZ header declares {nnz} entries but {found} were read");
        warnings.nnz_mismatch = Some((nnz, found));
    }

    let mut docs = Vec::with_capacity(n_docs);
    for entries in raw {
        if entries.is_empty() {
            warnings.dropped_empty_docs += 1;
            continue;
        }
        let n_raw = entries.len();
        let doc = Document::from_counts(docs.len(), entries);
        warnings.merged_duplicate_entries += n_raw - doc.entries.len();
        docs.push(doc);
    }
    if warnings.dropped_empty_docs > 0 {
        log::warn!("dropped {} empty documents", warnings.dropped_empty_docs);
    }

    let mut corpus = Corpus::new(n_words, docs)?;
    if let Some(vocab) = vocab {
        let terms: Vec<String> = vocab
            .lines()
            .collect::<std::io::Result<Vec<_>>>()?
            .into_iter()
            .map(|t| t.trim_end_matches('\r').to_string())
            .collect();
        let mut terms = terms;
        while terms.len() > n_words && terms.last().is_some_and(|t| t.is_empty()) {
            terms.pop();
        }
        if terms.len() != n_words {
            return Err(Error::parse(
                terms.len().min(n_words) + 1,
                format!("vocabulary has {} terms, header declares W={n_words}", terms.len()),
            ));
        }
        corpus.vocab = Some(terms);
    }
    Ok((corpus, warnings))
}

/// Writes `corpus` in UCI bag-of-words form: `D`, `W`, `NNZ`, then one
/// `docID wordID count` line per entry, 1-based, LF line endings.
pub fn write_uci<W: Write>(corpus: &Corpus, mut out: W) -> Result<()> {
    writeln!(out, "{}", corpus.docs.len())?;
    writeln!(out, "{}", corpus.vocab_size)?;
    writeln!(out, "{}", corpus.nnz())?;
    for (d, doc) in corpus.docs.iter().enumerate() {
        for &(w, c) in doc.entries() {
            writeln!(out, "{} {} {}", d + 1, w + 1, c)?;
        }
    }
    Ok(())
}

/// One term per line; line `i + 1` names word id `i`.
pub fn write_vocab<W: Write>(terms: &[String], mut out: W) -> Result<()> {
    for t in terms {
        writeln!(out, "{t}")?;
    }
    Ok(())
}

fn check_fraction(fraction: f64, name: &str) -> Result<()> {
    if fraction > 0.0 && fraction < 1.0 {
        Ok(())
    } else {
        Err(Error::arg(format!("{name} must lie in (0, 1), got {fraction}")))
    }
}

/// Partitions documents into `(train, test)` by a seeded uniform shuffle.
///
/// The test half holds `round(N * test_fraction)` documents. Both halves keep
/// the original document order and ids.
pub fn split_train_test(corpus: &Corpus, test_fraction: f64, seed: u64) -> Result<(Corpus, Corpus)> {
    check_fraction(test_fraction, "test fraction")?;
    if corpus.is_empty() {
        return Err(Error::arg("cannot split an empty corpus"));
    }
    let n = corpus.docs.len();
    let n_test = (n as f64 * test_fraction).round() as usize;
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut seeded_rng(seed));
    let mut is_test = vec![false; n];
    for &i in &idx[..n_test] {
        is_test[i] = true;
    }
    let (mut train, mut test) = (Vec::with_capacity(n - n_test), Vec::with_capacity(n_test));
    for (doc, held_out) in corpus.docs.iter().zip(is_test) {
        if held_out {
            test.push(doc.clone());
        } else {
            train.push(doc.clone());
        }
    }
    let half = |docs| Corpus {
        vocab_size: corpus.vocab_size,
        docs,
        vocab: corpus.vocab.clone(),
    };
    Ok((half(train), half(test)))
}

/// Splits a document's token instances into an estimation part of
/// `round(length * estimation_fraction)` tokens and the remainder.
pub fn split_document(doc: &Document, estimation_fraction: f64, seed: u64) -> Result<(Document, Document)> {
    check_fraction(estimation_fraction, "estimation fraction")?;
    if doc.length < 2 {
        return Err(Error::Split {
            doc: doc.id,
            length: doc.length,
        });
    }
    let mut tokens: Vec<u32> = doc.tokens().collect();
    tokens.shuffle(&mut seeded_rng(seed));
    let n_a = (doc.length as f64 * estimation_fraction).round() as usize;
    let (a, b) = tokens.split_at(n_a);
    Ok((
        Document::from_tokens(doc.id, a.iter().copied()),
        Document::from_tokens(doc.id, b.iter().copied()),
    ))
}
