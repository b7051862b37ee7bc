//! Simulated phone recognizer: a seeded noisy channel over gold phoneme
//! sequences, with candidate selection by phone-LM score standing in for
//! LM-constrained decoding.
//!
//! Corruption draws follow a fixed order so outputs are reproducible from
//! the rng stream alone: for every gap (including both ends) one insertion
//! decision, and for every gold position one delete/substitute/keep
//! decision. Sentences decode on independent rng streams keyed by
//! `(seed, sentence index)`, so corpus decoding is order-independent and
//! safely parallel.

use rayon::prelude::*;

use crate::corpus::{Corpus, Sentence};
use crate::error::{Error, Result};
use crate::lexicon::Pronunciation;
use crate::phonelm::PhoneLm;
use crate::rng::SplitRng;
use crate::symbol::{Symbol, SymbolTable};

/// Per-symbol error channel.
#[derive(Debug, Clone)]
pub struct NoiseModel {
    pub p_sub: f64,
    pub p_ins: f64,
    pub p_del: f64,
    pub seed: u64,
    inventory: Vec<Symbol>,
    /// Optional substitution rows, indexed like `inventory`; `None` means
    /// uniform over the other phonemes.
    confusion: Option<Vec<Vec<f64>>>,
}

impl NoiseModel {
    /// `inventory` is the phoneme set insertions and substitutions draw
    /// from; it is sorted by symbol text internally so channel behavior
    /// does not depend on interning order.
    pub fn new(
        table: &SymbolTable,
        p_sub: f64,
        p_ins: f64,
        p_del: f64,
        seed: u64,
        inventory: Vec<Symbol>,
    ) -> Result<NoiseModel> {
        for (name, p) in [("p_sub", p_sub), ("p_ins", p_ins), ("p_del", p_del)] {
            if !(0.0..1.0).contains(&p) {
                return Err(Error::InvalidArgument(format!("{name}={p} outside [0,1)")));
            }
        }
        if p_sub + p_del >= 1.0 {
            return Err(Error::InvalidArgument(format!(
                "p_sub + p_del = {} must be < 1",
                p_sub + p_del
            )));
        }
        if inventory.is_empty() {
            return Err(Error::EmptyInput("noise model phoneme inventory"));
        }
        let mut inventory = inventory;
        inventory.sort_by(|a, b| table.text(*a).cmp(table.text(*b)));
        inventory.dedup();
        Ok(NoiseModel {
            p_sub,
            p_ins,
            p_del,
            seed,
            inventory,
            confusion: None,
        })
    }

    /// Install an explicit confusion matrix; `rows[i][j]` is the
    /// probability of substituting `inventory[i]` with `inventory[j]`.
    pub fn with_confusion(mut self, rows: Vec<Vec<f64>>) -> Result<NoiseModel> {
        if rows.len() != self.inventory.len() {
            return Err(Error::InvalidArgument(
                "confusion matrix must have one row per inventory phoneme".into(),
            ));
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != self.inventory.len() {
                return Err(Error::InvalidArgument(format!(
                    "confusion row {i} has wrong width"
                )));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidArgument(format!(
                    "confusion row {i} sums to {sum}, expected 1"
                )));
            }
        }
        self.confusion = Some(rows);
        Ok(self)
    }

    pub fn inventory(&self) -> &[Symbol] {
        &self.inventory
    }

    fn position(&self, sym: Symbol) -> Option<usize> {
        self.inventory.iter().position(|&s| s == sym)
    }

    fn draw_substitute(&self, gold: Symbol, rng: &mut SplitRng) -> Symbol {
        match (&self.confusion, self.position(gold)) {
            (Some(rows), Some(i)) => {
                let u = rng.next_f64();
                let mut acc = 0.0;
                for (j, &p) in rows[i].iter().enumerate() {
                    acc += p;
                    if u < acc {
                        return self.inventory[j];
                    }
                }
                *self.inventory.last().unwrap()
            }
            (None, Some(i)) if self.inventory.len() > 1 => {
                // uniform over the other phonemes
                let j = rng.index(self.inventory.len() - 1);
                self.inventory[if j >= i { j + 1 } else { j }]
            }
            _ => self.inventory[rng.index(self.inventory.len())],
        }
    }

    /// Pass one phoneme sequence through the channel.
    pub fn corrupt(&self, gold: &[Symbol], rng: &mut SplitRng) -> Pronunciation {
        let mut out = Vec::with_capacity(gold.len() + 2);
        for &g in gold {
            if rng.next_f64() < self.p_ins {
                out.push(self.inventory[rng.index(self.inventory.len())]);
            }
            let u = rng.next_f64();
            if u < self.p_del {
                // deleted
            } else if u < self.p_del + self.p_sub {
                out.push(self.draw_substitute(g, rng));
            } else {
                out.push(g);
            }
        }
        if rng.next_f64() < self.p_ins {
            out.push(self.inventory[rng.index(self.inventory.len())]);
        }
        Pronunciation(out)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct DecodeConfig {
    /// Corruption candidates per sentence; the LM picks among them.
    pub n_candidates: usize,
}

impl Default for DecodeConfig {
    fn default() -> Self {
        DecodeConfig { n_candidates: 4 }
    }
}

/// Decode one sentence: draw `n_candidates` corruptions and keep the one
/// the phone LM scores highest (first drawn wins ties).
pub fn decode_sentence(
    nm: &NoiseModel,
    cfg: &DecodeConfig,
    lm: &PhoneLm,
    table: &SymbolTable,
    gold: &[Symbol],
    rng: &mut SplitRng,
) -> Pronunciation {
    assert!(cfg.n_candidates >= 1);
    let mut best = nm.corrupt(gold, rng);
    if cfg.n_candidates == 1 {
        return best;
    }
    let mut best_score = lm.logprob(table, &best);
    for _ in 1..cfg.n_candidates {
        let cand = nm.corrupt(gold, rng);
        let score = lm.logprob(table, &cand);
        if score > best_score {
            best = cand;
            best_score = score;
        }
    }
    best
}

/// Decode a whole corpus; every sentence must carry gold phones. Output
/// sentences keep their words and order, with phones replaced by the
/// decoded sequences.
pub fn decode_corpus(
    nm: &NoiseModel,
    cfg: &DecodeConfig,
    lm: &PhoneLm,
    table: &SymbolTable,
    corpus: &Corpus,
) -> Result<Corpus> {
    for (i, s) in corpus.sentences.iter().enumerate() {
        if s.phones.is_none() {
            return Err(Error::MissingPhones { index: i });
        }
    }
    let sentences: Vec<Sentence> = corpus
        .sentences
        .par_iter()
        .enumerate()
        .map(|(i, s)| {
            let mut rng = SplitRng::for_stream(nm.seed, i as u64);
            let gold = s.phones.as_ref().unwrap();
            let decoded = decode_sentence(nm, cfg, lm, table, gold, &mut rng);
            Sentence {
                words: s.words.clone(),
                phones: Some(decoded),
            }
        })
        .collect();
    Ok(Corpus {
        language_tag: corpus.language_tag.clone(),
        sentences,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::edit_distance;

    fn inventory(table: &mut SymbolTable, texts: &[&str]) -> Vec<Symbol> {
        texts.iter().map(|t| table.intern(t).unwrap()).collect()
    }

    #[test]
    fn zero_rates_are_identity() {
        let mut table = SymbolTable::new();
        let inv = inventory(&mut table, &["A", "B", "C"]);
        let nm = NoiseModel::new(&table, 0.0, 0.0, 0.0, 1, inv.clone()).unwrap();
        let mut rng = SplitRng::new(9);
        let gold = vec![inv[0], inv[1], inv[2], inv[1]];
        assert_eq!(nm.corrupt(&gold, &mut rng).0, gold);
    }

    #[test]
    fn full_deletion_empties_output() {
        let mut table = SymbolTable::new();
        let inv = inventory(&mut table, &["A", "B"]);
        // p_del close to 1 (exactly 1 is outside the contract)
        let nm = NoiseModel::new(&table, 0.0, 0.0, 0.999999999, 1, inv.clone()).unwrap();
        let mut rng = SplitRng::new(3);
        let gold = vec![inv[0], inv[1], inv[0]];
        assert!(nm.corrupt(&gold, &mut rng).is_empty());
    }

    #[test]
    fn substitution_fraction_matches_rate() {
        let mut table = SymbolTable::new();
        let inv = inventory(&mut table, &["A", "B", "C", "D"]);
        let nm = NoiseModel::new(&table, 0.1, 0.0, 0.0, 42, inv.clone()).unwrap();
        let gold = vec![inv[0]; 10_000];
        let mut rng = SplitRng::for_stream(42, 0);
        let out = nm.corrupt(&gold, &mut rng);
        assert_eq!(out.len(), gold.len());
        let subs = out.iter().filter(|&&s| s != inv[0]).count();
        let frac = subs as f64 / gold.len() as f64;
        assert!((frac - 0.1).abs() < 0.01, "substitution fraction {frac}");
    }

    #[test]
    fn rate_validation() {
        let mut table = SymbolTable::new();
        let inv = inventory(&mut table, &["A"]);
        assert!(NoiseModel::new(&table, 0.6, 0.0, 0.5, 1, inv.clone()).is_err());
        assert!(NoiseModel::new(&table, 1.0, 0.0, 0.0, 1, inv.clone()).is_err());
        assert!(NoiseModel::new(&table, 0.1, 0.0, 0.0, 1, vec![]).is_err());
    }

    #[test]
    fn confusion_rows_must_normalize() {
        let mut table = SymbolTable::new();
        let inv = inventory(&mut table, &["A", "B"]);
        let nm = NoiseModel::new(&table, 0.5, 0.0, 0.0, 1, inv).unwrap();
        assert!(nm
            .clone()
            .with_confusion(vec![vec![0.5, 0.5], vec![0.9, 0.2]])
            .is_err());
        assert!(nm
            .with_confusion(vec![vec![0.0, 1.0], vec![1.0, 0.0]])
            .is_ok());
    }

    #[test]
    fn confusion_matrix_steers_substitutions() {
        let mut table = SymbolTable::new();
        let inv = inventory(&mut table, &["A", "B", "C"]);
        // substitutions of A always become C, never B
        let nm = NoiseModel::new(&table, 0.9, 0.0, 0.0, 2, inv.clone())
            .unwrap()
            .with_confusion(vec![
                vec![0.0, 0.0, 1.0],
                vec![1.0, 0.0, 0.0],
                vec![0.0, 1.0, 0.0],
            ])
            .unwrap();
        let gold = vec![inv[0]; 2000];
        let mut rng = SplitRng::for_stream(2, 0);
        let out = nm.corrupt(&gold, &mut rng);
        assert!(out.iter().all(|&s| s == inv[0] || s == inv[2]));
        let subs = out.iter().filter(|&&s| s == inv[2]).count();
        assert!(subs > 1500, "expected ~90% substitutions, got {subs}");
    }

    #[test]
    fn single_candidate_equals_pure_channel() {
        let mut table = SymbolTable::new();
        let inv = inventory(&mut table, &["A", "B"]);
        let nm = NoiseModel::new(&table, 0.3, 0.1, 0.1, 5, inv.clone()).unwrap();
        let gold = vec![inv[0], inv[1], inv[0]];
        let seqs = vec![Pronunciation(gold.clone())];
        let lm = PhoneLm::train(&table, &seqs, 2).unwrap();
        let cfg = DecodeConfig { n_candidates: 1 };
        let mut r1 = SplitRng::for_stream(5, 0);
        let mut r2 = SplitRng::for_stream(5, 0);
        let via_decode = decode_sentence(&nm, &cfg, &lm, &table, &gold, &mut r1);
        let via_corrupt = nm.corrupt(&gold, &mut r2);
        assert_eq!(via_decode, via_corrupt);
    }

    #[test]
    fn lm_selection_improves_over_pure_channel() {
        // In-domain LM, high noise: picking the best of 16 candidates must
        // strictly beat the raw channel on average edit distance to gold.
        let mut table = SymbolTable::new();
        let inv = inventory(&mut table, &["A", "B", "C", "D", "E"]);
        let sentences: Vec<Pronunciation> = (0..200)
            .map(|i| {
                let mut rng = SplitRng::for_stream(777, i);
                let len = rng.range(6, 14);
                // gold distribution: short repeating motifs
                Pronunciation(
                    (0..len)
                        .map(|k| inv[[0, 1, 2][k % 3]])
                        .chain(std::iter::once(inv[rng.index(3)]))
                        .collect(),
                )
            })
            .collect();
        let lm = PhoneLm::train(&table, &sentences, 3).unwrap();
        let nm = NoiseModel::new(&table, 0.25, 0.05, 0.05, 11, inv.clone()).unwrap();
        let mut dist_single = 0usize;
        let mut dist_selected = 0usize;
        for (i, gold) in sentences.iter().enumerate() {
            let mut r1 = SplitRng::for_stream(11, i as u64);
            let one = decode_sentence(&nm, &DecodeConfig { n_candidates: 1 }, &lm, &table, gold, &mut r1);
            let mut r16 = SplitRng::for_stream(11, i as u64);
            let sel = decode_sentence(&nm, &DecodeConfig { n_candidates: 16 }, &lm, &table, gold, &mut r16);
            dist_single += edit_distance(&one, gold);
            dist_selected += edit_distance(&sel, gold);
        }
        assert!(
            dist_selected < dist_single,
            "selected {dist_selected} vs single {dist_single}"
        );
    }

    #[test]
    fn corpus_decode_is_deterministic_and_shape_preserving() {
        use crate::lexicon::Word;
        let mut table = SymbolTable::new();
        let inv = inventory(&mut table, &["A", "B"]);
        let mut corpus = Corpus::new("xx");
        for i in 0..20 {
            let w = Word::from_surface(&mut table, if i % 2 == 0 { "ab" } else { "ba" }).unwrap();
            corpus.sentences.push(Sentence {
                words: vec![w],
                phones: Some(Pronunciation(vec![inv[i % 2], inv[(i + 1) % 2]])),
            });
        }
        let seqs: Vec<Pronunciation> = corpus
            .sentences
            .iter()
            .map(|s| s.phones.clone().unwrap())
            .collect();
        let lm = PhoneLm::train(&table, &seqs, 2).unwrap();
        let nm = NoiseModel::new(&table, 0.2, 0.05, 0.05, 33, inv).unwrap();
        let cfg = DecodeConfig::default();
        let d1 = decode_corpus(&nm, &cfg, &lm, &table, &corpus).unwrap();
        let d2 = decode_corpus(&nm, &cfg, &lm, &table, &corpus).unwrap();
        assert_eq!(d1, d2);
        assert_eq!(d1.len(), corpus.len());
        // zero noise passes gold through untouched
        let nm0 = NoiseModel::new(&table, 0.0, 0.0, 0.0, 33, nm.inventory().to_vec()).unwrap();
        let d0 = decode_corpus(&nm0, &cfg, &lm, &table, &corpus).unwrap();
        assert_eq!(d0, corpus);
    }

    #[test]
    fn missing_phones_is_error() {
        use crate::lexicon::Word;
        let mut table = SymbolTable::new();
        let inv = inventory(&mut table, &["A"]);
        let w = Word::from_surface(&mut table, "a").unwrap();
        let corpus = Corpus {
            language_tag: "xx".into(),
            sentences: vec![Sentence {
                words: vec![w],
                phones: None,
            }],
        };
        let seqs = vec![Pronunciation(vec![inv[0]])];
        let lm = PhoneLm::train(&table, &seqs, 2).unwrap();
        let nm = NoiseModel::new(&table, 0.0, 0.0, 0.0, 1, inv).unwrap();
        assert!(decode_corpus(&nm, &DecodeConfig::default(), &lm, &table, &corpus).is_err());
    }
}
