//! Word-boundary discovery and lexicon harvesting.
//!
//! Decoded sentence-level phoneme streams carry no word boundaries. Each
//! word gets a left-to-right HMM with one state per grapheme, self-loops,
//! and skip connections (a grapheme may emit several phonemes or none);
//! word HMMs concatenate into one sentence HMM. Emission distributions
//! are *tied across every state sharing a grapheme*: a single learnable
//! row per grapheme, starting uniform. Baum-Welch re-estimates the tied
//! rows and the global transition triple, Viterbi finds the most likely
//! state path, and the per-word phoneme spans of that path become
//! pronunciation observations. A `(word, pronunciation)` pair enters the
//! learned lexicon once its modal pronunciation has been seen at least
//! `k` times.

mod em;
mod lattice;
mod viterbi;

pub use em::{em_train, EmTrainReport};
pub use viterbi::{viterbi_align, Alignment, WordSpan};

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::Path;

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::lexicon::{Lexicon, LexiconEntry, Pronunciation, Provenance};
use crate::phonelm::PhoneLm;
use crate::symbol::{Symbol, SymbolTable};

/// Emission probability floor; rows are renormalized against it so no
/// phoneme is ever locked out.
pub const EMISSION_FLOOR: f64 = 1e-6;

/// Globally tied transition parameters and word-entry distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    pub a_loop: f64,
    pub a_adv: f64,
    pub a_skip: f64,
    /// Probability of entering a word at its first grapheme state.
    pub enter_first: f64,
    /// Probability of entering at the second state (skipping the first
    /// grapheme; for one-grapheme words this skips the whole word).
    pub enter_second: f64,
}

impl Default for Topology {
    fn default() -> Self {
        Topology {
            a_loop: 0.10,
            a_adv: 0.80,
            a_skip: 0.10,
            enter_first: 0.9,
            enter_second: 0.1,
        }
    }
}

impl Topology {
    pub fn validate(&self) -> Result<()> {
        let parts = [
            self.a_loop,
            self.a_adv,
            self.a_skip,
            self.enter_first,
            self.enter_second,
        ];
        if parts.iter().any(|&p| p < 0.0) {
            return Err(Error::InvalidArgument("negative topology probability".into()));
        }
        if (self.a_loop + self.a_adv + self.a_skip - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(
                "a_loop + a_adv + a_skip must sum to 1".into(),
            ));
        }
        if (self.enter_first + self.enter_second - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(
                "enter_first + enter_second must sum to 1".into(),
            ));
        }
        Ok(())
    }
}

/// Tied categorical emission distributions: one row per grapheme, shared
/// by every HMM state for that grapheme in every word and sentence.
#[derive(Debug, Clone, PartialEq)]
pub struct EmissionTable {
    graphemes: Vec<Symbol>,
    grapheme_index: HashMap<Symbol, usize>,
    phonemes: Vec<Symbol>,
    phoneme_index: HashMap<Symbol, usize>,
    rows: Vec<Vec<f64>>,
}

impl EmissionTable {
    pub fn graphemes(&self) -> &[Symbol] {
        &self.graphemes
    }

    pub fn phonemes(&self) -> &[Symbol] {
        &self.phonemes
    }

    pub fn grapheme_row(&self, g: Symbol) -> Option<usize> {
        self.grapheme_index.get(&g).copied()
    }

    pub fn phoneme_column(&self, p: Symbol) -> Option<usize> {
        self.phoneme_index.get(&p).copied()
    }

    /// The shared distribution for a grapheme, indexed like `phonemes()`.
    pub fn row(&self, g: Symbol) -> Option<&[f64]> {
        self.grapheme_row(g).map(|r| self.rows[r].as_slice())
    }

    pub(crate) fn row_by_index(&self, r: usize) -> &[f64] {
        &self.rows[r]
    }

    pub(crate) fn set_rows(&mut self, rows: Vec<Vec<f64>>) {
        self.rows = rows;
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    /// Serialize as sorted TSV (`grapheme<TAB>phoneme<TAB>prob`).
    pub fn format(&self, table: &SymbolTable) -> String {
        let mut out = String::new();
        out.push_str("#emissions v1\n");
        for (r, &g) in self.graphemes.iter().enumerate() {
            for (c, &p) in self.phonemes.iter().enumerate() {
                out.push_str(&format!(
                    "{}\t{}\t{}\n",
                    table.text(g),
                    table.text(p),
                    self.rows[r][c]
                ));
            }
        }
        out
    }
}

impl EmissionTable {
    /// Build a table with explicit rows (indexed like the sorted
    /// grapheme/phoneme inventories of [`init_emissions`]). Rows must be
    /// distributions.
    pub fn from_rows(
        table: &SymbolTable,
        graphemes: &[Symbol],
        phonemes: &[Symbol],
        rows: Vec<Vec<f64>>,
    ) -> Result<EmissionTable> {
        let mut out = init_emissions(table, graphemes, phonemes)?;
        if rows.len() != out.n_rows() {
            return Err(Error::InvalidArgument(format!(
                "expected {} emission rows, got {}",
                out.n_rows(),
                rows.len()
            )));
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != out.phonemes.len() {
                return Err(Error::InvalidArgument(format!("row {i} has wrong width")));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > 1e-9 || row.iter().any(|&p| p < 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "row {i} is not a distribution (sum {sum})"
                )));
            }
        }
        out.rows = rows;
        Ok(out)
    }
}

/// Uniform-initialized tied emissions over the given inventories.
pub fn init_emissions(
    table: &SymbolTable,
    graphemes: &[Symbol],
    phonemes: &[Symbol],
) -> Result<EmissionTable> {
    if graphemes.is_empty() {
        return Err(Error::EmptyInput("empty grapheme inventory"));
    }
    if phonemes.is_empty() {
        return Err(Error::EmptyInput("empty phoneme inventory"));
    }
    let mut graphemes = graphemes.to_vec();
    graphemes.sort_by(|a, b| table.text(*a).cmp(table.text(*b)));
    graphemes.dedup();
    let mut phonemes = phonemes.to_vec();
    phonemes.sort_by(|a, b| table.text(*a).cmp(table.text(*b)));
    phonemes.dedup();
    let uniform = vec![1.0 / phonemes.len() as f64; phonemes.len()];
    let rows = vec![uniform; graphemes.len()];
    Ok(EmissionTable {
        grapheme_index: graphemes.iter().enumerate().map(|(i, &g)| (g, i)).collect(),
        phoneme_index: phonemes.iter().enumerate().map(|(i, &p)| (p, i)).collect(),
        graphemes,
        phonemes,
        rows,
    })
}

/// Observed pronunciations per word with occurrence counts.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct HarvestCounts {
    counts: BTreeMap<String, HashMap<Pronunciation, u64>>,
    /// Aligned word occurrences whose span was empty (all states skipped).
    pub empty_spans: u64,
}

impl HarvestCounts {
    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.counts.keys().map(|s| s.as_str())
    }

    pub fn word_count(&self) -> usize {
        self.counts.len()
    }

    pub fn get(&self, word: &str) -> Option<&HashMap<Pronunciation, u64>> {
        self.counts.get(word)
    }

    pub fn add(&mut self, word: &str, pron: Pronunciation) {
        *self
            .counts
            .entry(word.to_string())
            .or_default()
            .entry(pron)
            .or_insert(0) += 1;
    }
}

/// Collect per-word pronunciations from aligned sentences. `alignments`
/// must be parallel to `corpus.sentences`; sentences with `None` (e.g.
/// unalignable ones that were skipped) contribute nothing.
pub fn harvest(corpus: &Corpus, alignments: &[Option<Alignment>]) -> HarvestCounts {
    assert_eq!(corpus.sentences.len(), alignments.len());
    let mut out = HarvestCounts::default();
    for (sentence, alignment) in corpus.sentences.iter().zip(alignments) {
        let Some(alignment) = alignment else {
            continue;
        };
        let phones = sentence.phones.as_ref().expect("aligned sentences have phones");
        for span in &alignment.spans {
            if span.start == span.end {
                out.empty_spans += 1;
                continue;
            }
            let word = sentence.words[span.word_index].surface();
            out.add(word, Pronunciation(phones.0[span.start..span.end].to_vec()));
        }
    }
    out
}

/// Keep each word's modal pronunciation if it was observed at least `k`
/// times. Count ties prefer the higher phone-LM score when an LM is
/// given, then the lexicographically smaller pronunciation.
pub fn accept_threshold(
    table: &SymbolTable,
    counts: &HarvestCounts,
    k: u64,
    lm: Option<&PhoneLm>,
) -> Result<Lexicon> {
    if k < 1 {
        return Err(Error::InvalidArgument("threshold k must be >= 1".into()));
    }
    let mut lex = Lexicon::new();
    for (word, prons) in &counts.counts {
        let mut candidates: Vec<(&Pronunciation, u64, f64, String)> = prons
            .iter()
            .map(|(p, &c)| {
                let score = lm.map(|lm| lm.logprob(table, p)).unwrap_or(0.0);
                (p, c, score, p.display(table))
            })
            .collect();
        candidates.sort_by(|a, b| {
            b.1.cmp(&a.1)
                .then_with(|| b.2.partial_cmp(&a.2).unwrap())
                .then_with(|| a.3.cmp(&b.3))
        });
        let (pron, count, _, _) = candidates.swap_remove(0);
        if count >= k {
            lex.insert(
                table,
                word,
                LexiconEntry {
                    pron: pron.clone(),
                    provenance: Provenance::Learned,
                    count,
                },
            )?;
        }
    }
    Ok(lex)
}

/// Union of learned and seed lexicons; on a word conflict the seed entry
/// wins and the learned one is dropped.
pub fn pool_with_seed(table: &SymbolTable, learned: &Lexicon, seed: &Lexicon) -> Lexicon {
    let mut out = seed.clone();
    for word in learned.words() {
        if !seed.contains(word) {
            for entry in learned.get(word).unwrap() {
                out.insert(table, word, entry.clone())
                    .expect("words disjoint from seed");
            }
        }
    }
    out
}

/// Write harvest counts as sorted `word<TAB>pron<TAB>count` TSV.
pub fn write_harvest(
    counts: &HarvestCounts,
    table: &SymbolTable,
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    out.push_str(&format!("#harvest v1 empty_spans={}\n", counts.empty_spans));
    for (word, prons) in &counts.counts {
        let mut lines: Vec<(String, u64)> = prons
            .iter()
            .map(|(p, &c)| (p.display(table), c))
            .collect();
        lines.sort();
        for (pron, c) in lines {
            out.push_str(&format!("{word}\t{pron}\t{c}\n"));
        }
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn read_harvest(table: &mut SymbolTable, path: impl AsRef<Path>) -> Result<HarvestCounts> {
    let path = path.as_ref();
    let data = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = HarvestCounts::default();
    for (lineno, line) in data.lines().enumerate() {
        let lineno = lineno + 1;
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix("#harvest v1 empty_spans=") {
            out.empty_spans = rest
                .parse()
                .map_err(|_| Error::parse(path, lineno, "bad empty_spans"))?;
            continue;
        }
        if line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        let [word, pron, count] = fields.as_slice() else {
            return Err(Error::parse(path, lineno, "expected word<TAB>pron<TAB>count"));
        };
        let pron = Pronunciation::parse(table, pron)
            .map_err(|e| Error::parse(path, lineno, e.to_string()))?;
        let count: u64 = count
            .parse()
            .map_err(|_| Error::parse(path, lineno, "bad count"))?;
        *out
            .counts
            .entry(word.to_string())
            .or_default()
            .entry(pron)
            .or_insert(0) += count;
    }
    Ok(out)
}

#[cfg(test)]
mod tests;
