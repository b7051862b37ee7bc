//! Phone/word error rates and dictionary comparison.
//!
//! PER is corpus-level: total edit distance over total reference phoneme
//! count. WER is the fraction of evaluated words with any phone error.
//! Edit costs are uniform (1, 1, 1).

use crate::error::{Error, Result};
use crate::lexicon::Lexicon;
use crate::symbol::Symbol;

/// Levenshtein distance between two phoneme sequences.
pub fn edit_distance(a: &[Symbol], b: &[Symbol]) -> usize {
    if a.is_empty() {
        return b.len();
    }
    if b.is_empty() {
        return a.len();
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut curr = vec![0usize; b.len() + 1];
    for (i, &ca) in a.iter().enumerate() {
        curr[0] = i + 1;
        for (j, &cb) in b.iter().enumerate() {
            let cost = usize::from(ca != cb);
            curr[j + 1] = (prev[j] + cost).min(prev[j + 1] + 1).min(curr[j] + 1);
        }
        std::mem::swap(&mut prev, &mut curr);
    }
    prev[b.len()]
}

/// How to treat reference words absent from the hypothesis lexicon.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MissingPolicy {
    /// Ignore them (default); the skipped count is reported.
    Skip,
    /// Count every reference phoneme of the missing word as deleted.
    AllDeleted,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub per: f64,
    pub wer: f64,
    pub word_count: usize,
    pub total_ref_phones: usize,
    pub total_edits: usize,
    pub skipped_words: usize,
}

impl EvalReport {
    pub fn to_tsv(&self) -> String {
        format!(
            "per\t{:.6}\nwer\t{:.6}\nnum_words\t{}\ntotal_ref_phones\t{}\ntotal_edits\t{}\nskipped_words\t{}\n",
            self.per, self.wer, self.word_count, self.total_ref_phones, self.total_edits, self.skipped_words
        )
    }
}

/// Score a hypothesis lexicon against a single-pronunciation reference.
///
/// Hypothesis words with several pronunciations contribute their first
/// (canonical) one. Reference words must have exactly one.
pub fn evaluate_lexicon(
    hyp: &Lexicon,
    reference: &Lexicon,
    policy: MissingPolicy,
) -> Result<EvalReport> {
    let mut total_edits = 0usize;
    let mut total_ref_phones = 0usize;
    let mut word_count = 0usize;
    let mut word_errors = 0usize;
    let mut skipped = 0usize;
    for word in reference.words() {
        let entries = reference.get(word).unwrap();
        if entries.len() != 1 {
            return Err(Error::MultiplePronunciations(word.to_string()));
        }
        let ref_pron = &entries[0].pron;
        match hyp.first_pron(word) {
            Some(hyp_pron) => {
                let d = edit_distance(hyp_pron, ref_pron);
                total_edits += d;
                total_ref_phones += ref_pron.len();
                word_count += 1;
                if d > 0 {
                    word_errors += 1;
                }
            }
            None => match policy {
                MissingPolicy::Skip => skipped += 1,
                MissingPolicy::AllDeleted => {
                    total_edits += ref_pron.len();
                    total_ref_phones += ref_pron.len();
                    word_count += 1;
                    word_errors += 1;
                }
            },
        }
    }
    let per = if total_ref_phones == 0 {
        0.0
    } else {
        total_edits as f64 / total_ref_phones as f64
    };
    let wer = if word_count == 0 {
        0.0
    } else {
        word_errors as f64 / word_count as f64
    };
    Ok(EvalReport {
        per,
        wer,
        word_count,
        total_ref_phones,
        total_edits,
        skipped_words: skipped,
    })
}

/// Per-word verdicts of dictionary `a` against dictionary `b`, both scored
/// against a trusted reference.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompareReport {
    pub num_words: usize,
    pub better: usize,
    pub worse: usize,
    pub same: usize,
}

impl CompareReport {
    pub fn better_pct(&self) -> f64 {
        100.0 * self.better as f64 / self.num_words as f64
    }

    pub fn worse_pct(&self) -> f64 {
        100.0 * self.worse as f64 / self.num_words as f64
    }

    pub fn same_pct(&self) -> f64 {
        100.0 * self.same as f64 / self.num_words as f64
    }

    pub fn to_tsv(&self) -> String {
        format!(
            "num_words\t{}\nbetter\t{}\nworse\t{}\nsame\t{}\n",
            self.num_words, self.better, self.worse, self.same
        )
    }
}

/// Compare two dictionaries word by word against a reference. Only words
/// present in all three are compared; `a` is "better" on a word when its
/// pronunciation is closer to the reference than `b`'s.
pub fn compare_dictionaries(a: &Lexicon, b: &Lexicon, reference: &Lexicon) -> Result<CompareReport> {
    let mut num_words = 0usize;
    let mut better = 0usize;
    let mut worse = 0usize;
    let mut same = 0usize;
    for word in reference.words() {
        let (Some(pa), Some(pb)) = (a.first_pron(word), b.first_pron(word)) else {
            continue;
        };
        let entries = reference.get(word).unwrap();
        if entries.len() != 1 {
            return Err(Error::MultiplePronunciations(word.to_string()));
        }
        let r = &entries[0].pron;
        let da = edit_distance(pa, r);
        let db = edit_distance(pb, r);
        num_words += 1;
        match da.cmp(&db) {
            std::cmp::Ordering::Less => better += 1,
            std::cmp::Ordering::Greater => worse += 1,
            std::cmp::Ordering::Equal => same += 1,
        }
    }
    if num_words == 0 {
        return Err(Error::EmptyIntersection);
    }
    Ok(CompareReport {
        num_words,
        better,
        worse,
        same,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lexicon::{LexiconEntry, Pronunciation, Provenance};
    use crate::symbol::SymbolTable;

    /// Independent oracle: plain recursion on sequence heads.
    fn edit_distance_recursive(a: &[Symbol], b: &[Symbol]) -> usize {
        if a.is_empty() {
            return b.len();
        }
        if b.is_empty() {
            return a.len();
        }
        let sub = edit_distance_recursive(&a[1..], &b[1..]) + usize::from(a[0] != b[0]);
        let del = edit_distance_recursive(&a[1..], b) + 1;
        let ins = edit_distance_recursive(a, &b[1..]) + 1;
        sub.min(del).min(ins)
    }

    fn syms(table: &mut SymbolTable, s: &str) -> Vec<Symbol> {
        s.split_whitespace()
            .map(|t| table.intern(t).unwrap())
            .collect()
    }

    fn lex(table: &mut SymbolTable, entries: &[(&str, &str)]) -> Lexicon {
        let mut l = Lexicon::new();
        for (w, p) in entries {
            let pron = Pronunciation::parse(table, p).unwrap();
            l.insert(
                table,
                w,
                LexiconEntry {
                    pron,
                    provenance: Provenance::Seed,
                    count: 0,
                },
            )
            .unwrap();
        }
        l
    }

    #[test]
    fn edit_distance_examples() {
        let mut t = SymbolTable::new();
        let kat = syms(&mut t, "k a t");
        let kad = syms(&mut t, "k a d");
        assert_eq!(edit_distance(&kat, &kat), 0);
        assert_eq!(edit_distance(&kat, &kad), 1);
        let test = syms(&mut t, "t e s t");
        let tests = syms(&mut t, "t E s t s");
        // frozen from the recursive oracle
        assert_eq!(edit_distance_recursive(&test, &tests), 2);
        assert_eq!(edit_distance(&test, &tests), 2);
    }

    #[test]
    fn edit_distance_matches_oracle_exhaustively() {
        let mut t = SymbolTable::new();
        let alphabet = syms(&mut t, "x y z");
        let mut seqs: Vec<Vec<Symbol>> = vec![vec![]];
        for len in 1..=4usize {
            let mut level = Vec::new();
            let mut stack = vec![Vec::new()];
            while let Some(cur) = stack.pop() {
                if cur.len() == len {
                    level.push(cur);
                    continue;
                }
                for &s in &alphabet {
                    let mut nxt = cur.clone();
                    nxt.push(s);
                    stack.push(nxt);
                }
            }
            seqs.extend(level);
        }
        for a in &seqs {
            for b in &seqs {
                assert_eq!(edit_distance(a, b), edit_distance_recursive(a, b));
            }
        }
    }

    #[test]
    fn evaluate_identical_lexicons() {
        let mut t = SymbolTable::new();
        let l = lex(&mut t, &[("cat", "k a t"), ("dog", "d o g")]);
        let r = evaluate_lexicon(&l, &l, MissingPolicy::Skip).unwrap();
        assert_eq!(r.per, 0.0);
        assert_eq!(r.wer, 0.0);
        assert_eq!(r.word_count, 2);
    }

    #[test]
    fn single_substitution_arithmetic() {
        let mut t = SymbolTable::new();
        let hyp = lex(&mut t, &[("cat", "k a d")]);
        let reference = lex(&mut t, &[("cat", "k a t")]);
        let r = evaluate_lexicon(&hyp, &reference, MissingPolicy::Skip).unwrap();
        assert!((r.per - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(r.wer, 1.0);
    }

    #[test]
    fn skip_policy_ignores_missing_words() {
        let mut t = SymbolTable::new();
        let hyp = lex(&mut t, &[("cat", "k a t")]);
        let reference = lex(&mut t, &[("cat", "k a t"), ("dog", "d o g")]);
        let r = evaluate_lexicon(&hyp, &reference, MissingPolicy::Skip).unwrap();
        assert_eq!(r.per, 0.0);
        assert_eq!(r.word_count, 1);
        assert_eq!(r.skipped_words, 1);
        let r2 = evaluate_lexicon(&hyp, &reference, MissingPolicy::AllDeleted).unwrap();
        assert_eq!(r2.word_count, 2);
        assert_eq!(r2.total_edits, 3);
    }

    #[test]
    fn duplication_leaves_rates_unchanged() {
        // corpus-level PER: cloning every word under a fresh name doubles
        // numerator and denominator together
        let mut t = SymbolTable::new();
        let hyp = lex(
            &mut t,
            &[("a", "A"), ("b", "B C"), ("a2", "A"), ("b2", "B C")],
        );
        let reference = lex(
            &mut t,
            &[("a", "A"), ("b", "B B"), ("a2", "A"), ("b2", "B B")],
        );
        let half_hyp = lex(&mut t, &[("a", "A"), ("b", "B C")]);
        let half_ref = lex(&mut t, &[("a", "A"), ("b", "B B")]);
        let doubled = evaluate_lexicon(&hyp, &reference, MissingPolicy::Skip).unwrap();
        let single = evaluate_lexicon(&half_hyp, &half_ref, MissingPolicy::Skip).unwrap();
        assert_eq!(doubled.per, single.per);
        assert_eq!(doubled.wer, single.wer);
        assert_eq!(doubled.total_edits, 2 * single.total_edits);
        assert_eq!(doubled.total_ref_phones, 2 * single.total_ref_phones);
    }

    #[test]
    fn multiple_ref_prons_rejected() {
        let mut t = SymbolTable::new();
        let hyp = lex(&mut t, &[("a", "A")]);
        let mut reference = lex(&mut t, &[("a", "A")]);
        let p2 = Pronunciation::parse(&mut t, "B").unwrap();
        reference
            .insert(
                &t,
                "a",
                LexiconEntry {
                    pron: p2,
                    provenance: Provenance::Seed,
                    count: 0,
                },
            )
            .unwrap();
        assert!(evaluate_lexicon(&hyp, &reference, MissingPolicy::Skip).is_err());
    }

    #[test]
    fn compare_self_is_all_same() {
        let mut t = SymbolTable::new();
        let a = lex(&mut t, &[("x", "A"), ("y", "B")]);
        let reference = lex(&mut t, &[("x", "A A"), ("y", "B")]);
        let r = compare_dictionaries(&a, &a, &reference).unwrap();
        assert_eq!(r.same, r.num_words);
        assert_eq!(r.better + r.worse + r.same, r.num_words);
    }

    #[test]
    fn compare_single_word_better() {
        let mut t = SymbolTable::new();
        let a = lex(&mut t, &[("x", "A B")]);
        let b = lex(&mut t, &[("x", "A C C")]);
        let reference = lex(&mut t, &[("x", "A B")]);
        let r = compare_dictionaries(&a, &b, &reference).unwrap();
        assert_eq!(r.better, 1);
        assert_eq!(r.worse, 0);
        assert_eq!(r.num_words, 1);
    }

    #[test]
    fn report_accounting_identity_large_counts() {
        // schema fixture with realistic magnitudes
        let r = CompareReport {
            num_words: 26557,
            better: 4360,
            worse: 2431,
            same: 19766,
        };
        assert_eq!(r.better + r.worse + r.same, r.num_words);
        assert!((r.better_pct() - 16.42).abs() < 0.01);
        assert!((r.worse_pct() - 9.15).abs() < 0.01);
        assert!((r.same_pct() - 74.43).abs() < 0.01);
        assert!((r.better_pct() + r.worse_pct() + r.same_pct() - 100.0).abs() < 0.01);
    }

    #[test]
    fn empty_intersection_is_error() {
        let mut t = SymbolTable::new();
        let a = lex(&mut t, &[("x", "A")]);
        let b = lex(&mut t, &[("y", "B")]);
        let reference = lex(&mut t, &[("x", "A"), ("y", "B")]);
        assert!(compare_dictionaries(&a, &b, &reference).is_err());
    }
}
