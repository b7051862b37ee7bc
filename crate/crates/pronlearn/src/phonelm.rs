//! Phone-level n-gram language model.
//!
//! Trained on sentence-level phoneme sequences, the model constrains
//! simulated decoding toward phonotactically plausible outputs. Sentence
//! boundaries carry probability mass: every scored sequence ends in an
//! end-of-sentence event, so perplexities are well-defined and comparable.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::lexicon::Pronunciation;
use crate::ngram::{HistCell, WittenBellModel, BOS, UNK};
use crate::symbol::{Symbol, SymbolTable};

#[derive(Debug, Clone, PartialEq)]
pub struct PhoneLm {
    vocab: Vec<String>,
    index: HashMap<String, u32>,
    model: WittenBellModel,
}

impl PhoneLm {
    /// Train a Witten-Bell n-gram of the given order on phoneme sequences.
    pub fn train(
        table: &SymbolTable,
        sequences: &[Pronunciation],
        order: usize,
    ) -> Result<PhoneLm> {
        if sequences.is_empty() {
            return Err(Error::EmptyInput("no sequences for LM training"));
        }
        if !(1..=7).contains(&order) {
            return Err(Error::InvalidArgument(format!(
                "LM order {order} outside [1, 7]"
            )));
        }
        let mut vocab: Vec<String> = sequences
            .iter()
            .flat_map(|s| s.iter().map(|&p| table.text(p).to_string()))
            .collect();
        vocab.sort();
        vocab.dedup();
        let index: HashMap<String, u32> = vocab
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
        let eos = vocab.len() as u32;
        let mut model = WittenBellModel::new(order, vocab.len() + 1);
        let mut events = Vec::new();
        for seq in sequences {
            events.clear();
            events.extend(seq.iter().map(|&p| index[table.text(p)]));
            events.push(eos);
            model.add_sequence(&events, 1.0);
        }
        Ok(PhoneLm {
            vocab,
            index,
            model,
        })
    }

    pub fn order(&self) -> usize {
        self.model.order()
    }

    pub fn vocab(&self) -> &[String] {
        &self.vocab
    }

    fn eos(&self) -> u32 {
        self.vocab.len() as u32
    }

    fn dense(&self, table: &SymbolTable, sym: Symbol) -> u32 {
        self.index.get(table.text(sym)).copied().unwrap_or(UNK)
    }

    /// Log probability of a phoneme sequence, including the end event.
    /// Phonemes unseen at training time take the unk path, so the value is
    /// always finite.
    pub fn logprob(&self, table: &SymbolTable, seq: &[Symbol]) -> f64 {
        let mut events: Vec<u32> = seq.iter().map(|&p| self.dense(table, p)).collect();
        events.push(self.eos());
        self.logprob_events(&events)
    }

    fn logprob_events(&self, events: &[u32]) -> f64 {
        let ctx = self.model.order() - 1;
        let mut hist: Vec<u32> = Vec::with_capacity(ctx);
        let mut total = 0.0;
        for i in 0..events.len() {
            hist.clear();
            for k in 0..ctx {
                let idx = i as isize - ctx as isize + k as isize;
                hist.push(if idx < 0 { BOS } else { events[idx as usize] });
            }
            total += self.model.prob(&hist, events[i]).ln();
        }
        total
    }

    /// `exp(-avg token log prob)` over the sequences; tokens include the
    /// end-of-sentence events.
    pub fn perplexity(&self, table: &SymbolTable, sequences: &[Pronunciation]) -> Result<f64> {
        if sequences.is_empty() {
            return Err(Error::EmptyInput("no sequences for perplexity"));
        }
        let mut logprob = 0.0;
        let mut tokens = 0usize;
        for seq in sequences {
            logprob += self.logprob(table, seq);
            tokens += seq.len() + 1;
        }
        Ok((-logprob / tokens as f64).exp())
    }

    /// Conditional probability of one phoneme (or the end event when
    /// `next` is `None`) given a phoneme history.
    pub fn prob(&self, table: &SymbolTable, history: &[Symbol], next: Option<Symbol>) -> f64 {
        let ctx = self.model.order() - 1;
        let mut hist: Vec<u32> = Vec::with_capacity(ctx);
        for k in 0..ctx {
            let idx = history.len() as isize - ctx as isize + k as isize;
            hist.push(if idx < 0 {
                BOS
            } else {
                self.dense(table, history[idx as usize])
            });
        }
        let tok = match next {
            Some(p) => self.dense(table, p),
            None => self.eos(),
        };
        self.model.prob(&hist, tok)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.format()).map_err(|e| Error::io(path, e))
    }

    pub fn format(&self) -> String {
        let mut out = String::new();
        out.push_str("#phonelm v1\n");
        out.push_str(&format!("order\t{}\n", self.model.order()));
        out.push_str(&format!("vocab\t{}\n", self.vocab.len()));
        for t in &self.vocab {
            out.push_str(t);
            out.push('\n');
        }
        for (m, hist, cell) in self.model.iter_cells() {
            out.push_str(&format!(
                "ngram\t{m}\t{}\t{}",
                format_ids(hist),
                cell.total
            ));
            let mut conts: Vec<(&u32, &f64)> = cell.conts.iter().collect();
            conts.sort_by_key(|(id, _)| **id);
            for (id, c) in conts {
                out.push_str(&format!(" {id}:{c}"));
            }
            out.push('\n');
        }
        out
    }

    pub fn load(path: impl AsRef<Path>) -> Result<PhoneLm> {
        let path = path.as_ref();
        let data = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut lines = data.lines().enumerate();
        match lines.next() {
            Some((_, "#phonelm v1")) => {}
            _ => return Err(Error::parse(path, 1, "expected #phonelm v1 header")),
        }
        let order = parse_kv(path, lines.next(), "order")?
            .parse::<usize>()
            .map_err(|_| Error::parse(path, 2, "bad order"))?;
        let n_vocab = parse_kv(path, lines.next(), "vocab")?
            .parse::<usize>()
            .map_err(|_| Error::parse(path, 3, "bad vocab count"))?;
        let mut vocab = Vec::with_capacity(n_vocab);
        for _ in 0..n_vocab {
            match lines.next() {
                Some((_, t)) => vocab.push(t.to_string()),
                None => return Err(Error::parse(path, 0, "truncated vocab section")),
            }
        }
        let index: HashMap<String, u32> = vocab
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
        let mut model = WittenBellModel::new(order, n_vocab + 1);
        for (lineno, line) in lines {
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 4 || fields[0] != "ngram" {
                return Err(Error::parse(path, lineno + 1, "bad ngram line"));
            }
            let level: usize = fields[1]
                .parse()
                .map_err(|_| Error::parse(path, lineno + 1, "bad level"))?;
            let hist = parse_ids(fields[2])
                .ok_or_else(|| Error::parse(path, lineno + 1, "bad history ids"))?;
            let total: f64 = fields[3]
                .split(' ')
                .next()
                .unwrap_or("")
                .parse()
                .map_err(|_| Error::parse(path, lineno + 1, "bad total"))?;
            // conts live after the total, separated by the same TAB split
            let mut cell = HistCell {
                total,
                conts: HashMap::new(),
            };
            let rest = fields[3].split(' ').skip(1);
            for part in rest {
                let (id, c) = part
                    .split_once(':')
                    .ok_or_else(|| Error::parse(path, lineno + 1, "bad cont"))?;
                let id: u32 = id
                    .parse()
                    .map_err(|_| Error::parse(path, lineno + 1, "bad cont id"))?;
                let c: f64 = c
                    .parse()
                    .map_err(|_| Error::parse(path, lineno + 1, "bad cont count"))?;
                cell.conts.insert(id, c);
            }
            model.insert_cell(level, hist, cell);
        }
        Ok(PhoneLm {
            vocab,
            index,
            model,
        })
    }
}

fn format_ids(ids: &[u32]) -> String {
    if ids.is_empty() {
        return "-".to_string();
    }
    ids.iter()
        .map(|&id| {
            if id == BOS {
                "~".to_string()
            } else {
                id.to_string()
            }
        })
        .collect::<Vec<_>>()
        .join(" ")
}

fn parse_ids(s: &str) -> Option<Vec<u32>> {
    if s == "-" {
        return Some(Vec::new());
    }
    s.split(' ')
        .map(|t| {
            if t == "~" {
                Some(BOS)
            } else {
                t.parse::<u32>().ok()
            }
        })
        .collect()
}

fn parse_kv(
    path: &Path,
    line: Option<(usize, &str)>,
    key: &str,
) -> Result<String> {
    match line {
        Some((_, l)) => match l.split_once('\t') {
            Some((k, v)) if k == key => Ok(v.to_string()),
            _ => Err(Error::parse(path, 0, format!("expected {key} line"))),
        },
        None => Err(Error::parse(path, 0, format!("missing {key} line"))),
    }
}

// The serializer writes `ngram<TAB>level<TAB>hist<TAB>total cont cont ...`;
// total and conts share the final TAB field, space-separated.

#[cfg(test)]
mod tests {
    use super::*;

    fn prons(table: &mut SymbolTable, specs: &[&str]) -> Vec<Pronunciation> {
        specs
            .iter()
            .map(|s| Pronunciation::parse(table, s).unwrap())
            .collect()
    }

    #[test]
    fn single_sequence_bigram_matches_hand_computation() {
        let mut table = SymbolTable::new();
        let seqs = prons(&mut table, &["A B"]);
        let lm = PhoneLm::train(&table, &seqs, 2).unwrap();
        // vocab sorted: A=0, B=1, eos=2; unigram total 3, T=3, base 1/4
        let p_uni_b = (1.0 + 3.0 * 0.25) / 6.0;
        let p_b_given_a = (1.0 + p_uni_b) / 2.0;
        let a = table.get("A").unwrap();
        let b = table.get("B").unwrap();
        assert!((lm.prob(&table, &[a], Some(b)) - p_b_given_a).abs() < 1e-12);
        // full sequence score = P(A|bos) * P(B|A) * P(eos|B)
        let p_uni_a = p_uni_b;
        let p_uni_eos = p_uni_b;
        let p_a_given_bos = (1.0 + p_uni_a) / 2.0;
        let p_eos_given_b = (1.0 + p_uni_eos) / 2.0;
        let expect = p_a_given_bos.ln() + p_b_given_a.ln() + p_eos_given_b.ln();
        let got = lm.logprob(&table, &[a, b]);
        assert!((got - expect).abs() < 1e-12, "{got} vs {expect}");
    }

    #[test]
    fn two_continuations_tie_before_smoothing_mass() {
        let mut table = SymbolTable::new();
        let seqs = prons(&mut table, &["A B", "A C"]);
        let lm = PhoneLm::train(&table, &seqs, 2).unwrap();
        let a = table.get("A").unwrap();
        let b = table.get("B").unwrap();
        let c = table.get("C").unwrap();
        let pb = lm.prob(&table, &[a], Some(b));
        let pc = lm.prob(&table, &[a], Some(c));
        assert!((pb - pc).abs() < 1e-12);
    }

    #[test]
    fn unigram_relative_frequencies_with_unk_mass() {
        let mut table = SymbolTable::new();
        let seqs = prons(&mut table, &["A A B"]);
        let lm = PhoneLm::train(&table, &seqs, 1).unwrap();
        // events A A B eos: counts {A:2, B:1, eos:1}, total 4, T=3, base 1/4
        let a = table.get("A").unwrap();
        let b = table.get("B").unwrap();
        let expect_a = (2.0 + 3.0 * 0.25) / (4.0 + 3.0);
        let expect_b = (1.0 + 3.0 * 0.25) / (4.0 + 3.0);
        assert!((lm.prob(&table, &[], Some(a)) - expect_a).abs() < 1e-12);
        assert!((lm.prob(&table, &[], Some(b)) - expect_b).abs() < 1e-12);
    }

    #[test]
    fn empty_sequence_scores_end_given_begin() {
        let mut table = SymbolTable::new();
        let seqs = prons(&mut table, &["A B"]);
        let lm = PhoneLm::train(&table, &seqs, 2).unwrap();
        let got = lm.logprob(&table, &[]);
        let expect = lm.prob(&table, &[], None).ln();
        // histories of length 1 starting from nothing are [bos]
        assert!((got - expect).abs() < 1e-12);
        assert!(got.is_finite() && got < 0.0);
    }

    #[test]
    fn unseen_phoneme_is_finite_and_cheaper_sequences_win() {
        let mut table = SymbolTable::new();
        let seqs = prons(&mut table, &["A B A B", "B A"]);
        let lm = PhoneLm::train(&table, &seqs, 3).unwrap();
        let a = table.get("A").unwrap();
        let b = table.get("B").unwrap();
        let z = table.intern("Z").unwrap();
        let seen = lm.logprob(&table, &[a, b]);
        let unseen = lm.logprob(&table, &[a, z]);
        assert!(unseen.is_finite());
        assert!(unseen < seen);
    }

    #[test]
    fn perplexity_bounds_and_averaging() {
        let mut table = SymbolTable::new();
        let seqs = prons(&mut table, &["A B A"]);
        let lm = PhoneLm::train(&table, &seqs, 2).unwrap();
        let ppl1 = lm.perplexity(&table, &seqs).unwrap();
        assert!(ppl1 >= 1.0);
        let doubled = prons(&mut table, &["A B A", "A B A"]);
        let ppl2 = lm.perplexity(&table, &doubled).unwrap();
        assert!((ppl1 - ppl2).abs() < 1e-12);
    }

    #[test]
    fn uniform_unigram_perplexity_near_vocab_size() {
        // A corpus with every symbol occurring equally often gives a
        // unigram perplexity close to the vocabulary size (slack for the
        // smoothing and end-of-sentence mass).
        let mut table = SymbolTable::new();
        let seqs = prons(&mut table, &["A B C D E F G H"]);
        let lm = PhoneLm::train(&table, &seqs, 1).unwrap();
        let events = prons(&mut table, &["C D A B"]);
        let ppl = lm.perplexity(&table, &events).unwrap();
        let v = 8.0;
        assert!(ppl > v * 0.8 && ppl < v * 1.6, "ppl {ppl}");
    }

    #[test]
    fn training_is_shuffle_invariant() {
        let mut table = SymbolTable::new();
        let seqs = prons(&mut table, &["A B C", "B C", "A A B", "C"]);
        let lm = PhoneLm::train(&table, &seqs, 3).unwrap();
        let mut reversed = seqs.clone();
        reversed.reverse();
        let lm_rev = PhoneLm::train(&table, &reversed, 3).unwrap();
        let probe = prons(&mut table, &["A B C B"]);
        assert_eq!(
            lm.logprob(&table, &probe[0]).to_bits(),
            lm_rev.logprob(&table, &probe[0]).to_bits()
        );
        assert_eq!(lm.format(), lm_rev.format());
    }

    #[test]
    fn save_load_round_trips_exactly() {
        let mut table = SymbolTable::new();
        let seqs = prons(&mut table, &["A B B", "B C", "A"]);
        let lm = PhoneLm::train(&table, &seqs, 5).unwrap();
        let dir = std::env::temp_dir().join("pronlearn_phonelm");
        fs::create_dir_all(&dir).unwrap();
        let path = dir.join("m.lm");
        lm.save(&path).unwrap();
        let back = PhoneLm::load(&path).unwrap();
        assert_eq!(back.format(), lm.format());
        let a = table.get("A").unwrap();
        let b = table.get("B").unwrap();
        assert_eq!(
            lm.logprob(&table, &[a, b]).to_bits(),
            back.logprob(&table, &[a, b]).to_bits()
        );
    }

    #[test]
    fn order_or_input_validation() {
        let mut table = SymbolTable::new();
        let seqs = prons(&mut table, &["A"]);
        assert!(PhoneLm::train(&table, &[], 2).is_err());
        assert!(PhoneLm::train(&table, &seqs, 0).is_err());
        assert!(PhoneLm::train(&table, &seqs, 8).is_err());
    }
}
