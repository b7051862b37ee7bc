//! Synthetic language generator.
//!
//! Builds a gold lexicon and corpus with controllable grapheme-phoneme
//! regularity: each grapheme maps to one phoneme, a few digraphs map to
//! 1-2 phonemes (leftmost-longest application), a configurable fraction
//! of the vocabulary is irregular, and corpus word frequencies follow a
//! Zipf law so acceptance thresholds have something to bite on.
//! Everything is deterministic under the generator seed, and the rule file
//! lets tests re-derive the regular part of the lexicon exactly.
//!
//! The rule map representation supports 0-2 phoneme chunks, but the
//! generator emits no silent single graphemes and no one-to-two
//! expansions: those structures cannot be recovered exactly from clean
//! phoneme streams by tied-emission alignment (a single shared row has
//! to split its mass to emit two different phonemes through a self-loop,
//! and silent letters train their row purely on neighbors' phones), and
//! the zero-noise sanity contract of the pipeline depends on exact
//! recovery. Digraphs cover the interesting non-1:1 structure: a
//! one-phoneme digraph exercises skip connections, a two-phoneme digraph
//! aligns state-per-phone.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::path::Path;

use crate::corpus::{Corpus, Sentence};
use crate::error::{Error, Result};
use crate::lexicon::{Lexicon, LexiconEntry, Pronunciation, Provenance, Word};
use crate::rng::SplitRng;
use crate::symbol::SymbolTable;

const GRAPHEME_POOL: &str = "abcdefghijklmnopqrstuvwxyz0123456789\u{3b1}\u{3b2}\u{3b3}\u{3b4}\u{3b5}\u{3b6}\u{3b7}\u{3b8}\u{3b9}\u{3ba}\u{3bb}\u{3bc}\u{3bd}\u{3be}\u{3bf}\u{3c0}\u{3c1}\u{3c3}\u{3c4}\u{3c5}";

const WORD_LEN_MIN: usize = 2;
const WORD_LEN_MAX: usize = 8;
const DIGRAPH_TWO_PHONE_RATE: f64 = 0.3;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub n_graphemes: usize,
    pub n_phonemes: usize,
    pub n_digraph_rules: usize,
    pub irregularity_rate: f64,
    pub vocab_size: usize,
    pub zipf_exponent: f64,
    pub sentence_len: (usize, usize),
    pub n_sentences: usize,
    pub language_tag: String,
    pub seed: u64,
}

impl SynthSpec {
    /// Defaults with the scale parameters filled in.
    pub fn new(vocab_size: usize, n_sentences: usize, seed: u64) -> Self {
        SynthSpec {
            n_graphemes: 20,
            n_phonemes: 24,
            n_digraph_rules: 5,
            irregularity_rate: 0.05,
            vocab_size,
            zipf_exponent: 1.1,
            sentence_len: (3, 8),
            n_sentences,
            language_tag: "syn".to_string(),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let pool_len = GRAPHEME_POOL.chars().count();
        if self.n_graphemes < 1 || self.n_graphemes > pool_len {
            return Err(Error::InfeasibleSpec(format!(
                "n_graphemes must be in [1, {pool_len}]"
            )));
        }
        if self.n_phonemes < 1 || self.n_phonemes > 99 {
            return Err(Error::InfeasibleSpec("n_phonemes must be in [1, 99]".into()));
        }
        if self.n_digraph_rules > self.n_graphemes * self.n_graphemes {
            return Err(Error::InfeasibleSpec(
                "more digraph rules than grapheme pairs".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.irregularity_rate) {
            return Err(Error::InfeasibleSpec("irregularity_rate outside [0, 1)".into()));
        }
        if self.vocab_size < 1 || self.n_sentences < 1 {
            return Err(Error::InfeasibleSpec(
                "vocab_size and n_sentences must be >= 1".into(),
            ));
        }
        if self.sentence_len.0 < 1 || self.sentence_len.0 > self.sentence_len.1 {
            return Err(Error::InfeasibleSpec("bad sentence length range".into()));
        }
        Ok(())
    }
}

/// Grapheme-to-phoneme rewrite rules: single graphemes plus digraphs,
/// applied leftmost-longest.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RuleSet {
    pub singles: BTreeMap<String, Vec<String>>,
    pub digraphs: BTreeMap<String, Vec<String>>,
}

impl RuleSet {
    /// Apply the rules to a surface form. `None` if a grapheme has no
    /// rule.
    pub fn derive(&self, surface: &str) -> Option<Vec<String>> {
        let chars: Vec<char> = surface.chars().collect();
        let mut out = Vec::new();
        let mut i = 0;
        while i < chars.len() {
            if i + 1 < chars.len() {
                let digraph: String = chars[i..i + 2].iter().collect();
                if let Some(ps) = self.digraphs.get(&digraph) {
                    out.extend(ps.iter().cloned());
                    i += 2;
                    continue;
                }
            }
            let single = chars[i].to_string();
            out.extend(self.singles.get(&single)?.iter().cloned());
            i += 1;
        }
        Some(out)
    }
}

#[derive(Debug, Clone)]
pub struct SynthLanguage {
    pub spec: SynthSpec,
    pub rules: RuleSet,
    /// Vocabulary in Zipf rank order (index 0 = most probable).
    pub vocabulary: Vec<String>,
    pub gold_lexicon: Lexicon,
    pub corpus: Corpus,
    pub irregular_words: BTreeSet<String>,
}

pub fn generate_language(table: &mut SymbolTable, spec: &SynthSpec) -> Result<SynthLanguage> {
    spec.validate()?;
    let graphemes: Vec<String> = GRAPHEME_POOL
        .chars()
        .take(spec.n_graphemes)
        .map(|c| c.to_string())
        .collect();
    let phonemes: Vec<String> = (1..=spec.n_phonemes).map(|i| format!("P{i:02}")).collect();

    // rules: one phoneme per single grapheme
    let mut rng = SplitRng::for_stream(spec.seed, 0);
    let mut rules = RuleSet::default();
    for g in &graphemes {
        let chunk = vec![phonemes[rng.index(phonemes.len())].clone()];
        rules.singles.insert(g.clone(), chunk);
    }
    let mut digraph_keys = BTreeSet::new();
    let mut guard = 0;
    while digraph_keys.len() < spec.n_digraph_rules {
        let key = format!(
            "{}{}",
            graphemes[rng.index(graphemes.len())],
            graphemes[rng.index(graphemes.len())]
        );
        digraph_keys.insert(key);
        guard += 1;
        if guard > spec.n_digraph_rules * 1000 + 1000 {
            return Err(Error::InfeasibleSpec("cannot sample distinct digraphs".into()));
        }
    }
    for key in digraph_keys {
        let len = if rng.next_f64() < DIGRAPH_TWO_PHONE_RATE { 2 } else { 1 };
        let chunk: Vec<String> = (0..len)
            .map(|_| phonemes[rng.index(phonemes.len())].clone())
            .collect();
        rules.digraphs.insert(key, chunk);
    }

    // vocabulary: distinct random grapheme strings with non-empty derived
    // pronunciations
    let mut rng = SplitRng::for_stream(spec.seed, 1);
    let mut vocabulary = Vec::with_capacity(spec.vocab_size);
    let mut seen = BTreeSet::new();
    let mut attempts = 0usize;
    while vocabulary.len() < spec.vocab_size {
        attempts += 1;
        if attempts > spec.vocab_size * 1000 + 10_000 {
            return Err(Error::InfeasibleSpec(
                "cannot sample enough pronounceable words".into(),
            ));
        }
        let len = rng.range(WORD_LEN_MIN, WORD_LEN_MAX);
        let word: String = (0..len)
            .map(|_| graphemes[rng.index(graphemes.len())].as_str())
            .collect();
        if seen.contains(&word) {
            continue;
        }
        let derived = rules.derive(&word).expect("all graphemes have rules");
        if derived.is_empty() {
            continue;
        }
        seen.insert(word.clone());
        vocabulary.push(word);
    }

    // irregular fraction: seeded random legal pronunciation of similar
    // length
    let mut rng = SplitRng::for_stream(spec.seed, 2);
    let mut gold_lexicon = Lexicon::new();
    let mut irregular_words = BTreeSet::new();
    let mut prons: HashMap<String, Pronunciation> = HashMap::new();
    for word in &vocabulary {
        let derived = rules.derive(word).unwrap();
        let g_len = word.chars().count();
        let texts: Vec<String> = if rng.next_f64() < spec.irregularity_rate {
            irregular_words.insert(word.clone());
            // similar length, capped at one phoneme per grapheme so the
            // word stays inside the aligner's exact-recovery regime
            let jitter = rng.range(0, 2) as isize - 1;
            let len = (derived.len() as isize + jitter).clamp(1, g_len as isize) as usize;
            (0..len)
                .map(|_| phonemes[rng.index(phonemes.len())].clone())
                .collect()
        } else {
            derived
        };
        let pron = Pronunciation::parse(table, &texts.join(" "))?;
        prons.insert(word.clone(), pron.clone());
        gold_lexicon.insert(
            table,
            word,
            LexiconEntry {
                pron,
                provenance: Provenance::Seed,
                count: 0,
            },
        )?;
    }

    // corpus: Zipf-distributed words, gold phones by concatenation
    let mut rng = SplitRng::for_stream(spec.seed, 3);
    let mut cumulative = Vec::with_capacity(spec.vocab_size);
    let mut acc = 0.0;
    for rank in 1..=spec.vocab_size {
        acc += (rank as f64).powf(-spec.zipf_exponent);
        cumulative.push(acc);
    }
    let total = acc;
    let mut corpus = Corpus::new(spec.language_tag.clone());
    for _ in 0..spec.n_sentences {
        let n_words = rng.range(spec.sentence_len.0, spec.sentence_len.1);
        let mut words = Vec::with_capacity(n_words);
        let mut phones = Vec::new();
        for _ in 0..n_words {
            let u = rng.next_f64() * total;
            let idx = cumulative.partition_point(|&c| c <= u).min(spec.vocab_size - 1);
            let surface = &vocabulary[idx];
            phones.extend(prons[surface].iter().copied());
            words.push(Word::from_surface(table, surface)?);
        }
        corpus.sentences.push(Sentence {
            words,
            phones: Some(Pronunciation(phones)),
        });
    }

    Ok(SynthLanguage {
        spec: spec.clone(),
        rules,
        vocabulary,
        gold_lexicon,
        corpus,
        irregular_words,
    })
}

/// Corpus token frequency per vocabulary word.
pub fn word_frequencies(corpus: &Corpus) -> HashMap<String, u64> {
    let mut freq = HashMap::new();
    for s in &corpus.sentences {
        for w in &s.words {
            *freq.entry(w.surface().to_string()).or_insert(0) += 1;
        }
    }
    freq
}

/// Nested seed lexicons by corpus frequency (ties break lexicographically)
/// plus the held-out test lexicon: gold entries for every word outside
/// the largest seed.
pub fn split_seed(
    gold: &Lexicon,
    corpus: &Corpus,
    sizes: &[usize],
) -> Result<(Vec<Lexicon>, Lexicon)> {
    if sizes.is_empty() {
        return Err(Error::EmptyInput("no seed sizes"));
    }
    for pair in sizes.windows(2) {
        if pair[0] >= pair[1] {
            return Err(Error::InvalidArgument(
                "seed sizes must be strictly increasing".into(),
            ));
        }
    }
    let n_words = gold.word_count();
    let &largest = sizes.last().unwrap();
    if largest > n_words {
        return Err(Error::InvalidArgument(format!(
            "seed size {largest} exceeds vocabulary ({n_words} words)"
        )));
    }
    if largest == n_words {
        return Err(Error::InvalidArgument(
            "largest seed covers the whole vocabulary; the test set would be empty".into(),
        ));
    }
    let freq = word_frequencies(corpus);
    let mut order: Vec<(&str, u64)> = gold
        .words()
        .map(|w| (w, freq.get(w).copied().unwrap_or(0)))
        .collect();
    order.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    let ranked: Vec<&str> = order.into_iter().map(|(w, _)| w).collect();
    let seeds = sizes
        .iter()
        .map(|&n| gold.restrict(ranked[..n].iter().copied()))
        .collect();
    let test = gold.restrict(ranked[largest..].iter().copied());
    Ok((seeds, test))
}

pub fn write_rules(rules: &RuleSet, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::from("#rules v1\n");
    for (g, ps) in rules.singles.iter().chain(rules.digraphs.iter()) {
        out.push_str(&format!("{g}\t{}\n", ps.join(" ")));
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn read_rules(path: impl AsRef<Path>) -> Result<RuleSet> {
    let path = path.as_ref();
    let data = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = data.lines().enumerate();
    match lines.next() {
        Some((_, "#rules v1")) => {}
        _ => return Err(Error::parse(path, 1, "expected #rules v1 header")),
    }
    let mut rules = RuleSet::default();
    for (n, line) in lines {
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (g, ps) = line
            .split_once('\t')
            .ok_or_else(|| Error::parse(path, n + 1, "expected chunk<TAB>phonemes"))?;
        let chunk: Vec<String> = if ps.is_empty() {
            Vec::new()
        } else {
            ps.split(' ').map(str::to_string).collect()
        };
        match g.chars().count() {
            1 => rules.singles.insert(g.to_string(), chunk),
            2 => rules.digraphs.insert(g.to_string(), chunk),
            _ => return Err(Error::parse(path, n + 1, "rule chunks are 1-2 graphemes")),
        };
    }
    Ok(rules)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::format_corpus;
    use crate::lexicon::format_lexicon;

    fn small_spec(seed: u64) -> SynthSpec {
        let mut spec = SynthSpec::new(120, 300, seed);
        spec.sentence_len = (2, 5);
        spec
    }

    #[test]
    fn generation_is_deterministic() {
        let spec = small_spec(7);
        let mut t1 = SymbolTable::new();
        let l1 = generate_language(&mut t1, &spec).unwrap();
        let mut t2 = SymbolTable::new();
        let l2 = generate_language(&mut t2, &spec).unwrap();
        assert_eq!(
            format_lexicon(&l1.gold_lexicon, &t1).unwrap(),
            format_lexicon(&l2.gold_lexicon, &t2).unwrap()
        );
        assert_eq!(format_corpus(&l1.corpus, &t1), format_corpus(&l2.corpus, &t2));
        assert_eq!(l1.rules, l2.rules);
    }

    #[test]
    fn zero_irregularity_is_fully_rule_derived() {
        let mut spec = small_spec(11);
        spec.irregularity_rate = 0.0;
        let mut table = SymbolTable::new();
        let lang = generate_language(&mut table, &spec).unwrap();
        assert!(lang.irregular_words.is_empty());
        for (word, entry) in lang.gold_lexicon.iter() {
            let derived = lang.rules.derive(word).unwrap();
            assert_eq!(entry.pron.display(&table), derived.join(" "), "word {word}");
        }
    }

    #[test]
    fn irregular_fraction_is_binomial() {
        let spec = SynthSpec::new(2000, 1, 42);
        let mut table = SymbolTable::new();
        let lang = generate_language(&mut table, &spec).unwrap();
        let n = lang.irregular_words.len();
        assert!((80..=120).contains(&n), "irregular count {n}");
        for w in lang.irregular_words.iter().take(5) {
            assert!(lang.gold_lexicon.contains(w));
        }
    }

    #[test]
    fn sentence_phones_concatenate_gold_pronunciations() {
        let spec = small_spec(3);
        let mut table = SymbolTable::new();
        let lang = generate_language(&mut table, &spec).unwrap();
        for s in &lang.corpus.sentences {
            let mut expect = Vec::new();
            for w in &s.words {
                expect.extend(
                    lang.gold_lexicon
                        .first_pron(w.surface())
                        .unwrap()
                        .iter()
                        .copied(),
                );
            }
            assert_eq!(s.phones.as_ref().unwrap().0, expect);
        }
    }

    #[test]
    fn seed_splits_nest_and_respect_frequency() {
        let spec = small_spec(9);
        let mut table = SymbolTable::new();
        let lang = generate_language(&mut table, &spec).unwrap();
        let (seeds, test) = split_seed(&lang.gold_lexicon, &lang.corpus, &[20, 50]).unwrap();
        assert_eq!(seeds[0].word_count(), 20);
        assert_eq!(seeds[1].word_count(), 50);
        for w in seeds[0].words() {
            assert!(seeds[1].contains(w), "nesting violated at {w}");
            assert!(!test.contains(w));
        }
        assert_eq!(test.word_count(), lang.gold_lexicon.word_count() - 50);
        // most frequent corpus word lands in the smallest seed
        let freq = word_frequencies(&lang.corpus);
        let top = freq
            .iter()
            .max_by_key(|(w, c)| (*c, std::cmp::Reverse(w.as_str())))
            .unwrap();
        assert!(seeds[0].contains(top.0));
    }

    #[test]
    fn split_rejects_full_vocabulary() {
        let spec = small_spec(5);
        let mut table = SymbolTable::new();
        let lang = generate_language(&mut table, &spec).unwrap();
        let n = lang.gold_lexicon.word_count();
        assert!(split_seed(&lang.gold_lexicon, &lang.corpus, &[n]).is_err());
        assert!(split_seed(&lang.gold_lexicon, &lang.corpus, &[n + 1]).is_err());
        assert!(split_seed(&lang.gold_lexicon, &lang.corpus, &[30, 30]).is_err());
    }

    #[test]
    fn rules_file_round_trips() {
        let spec = small_spec(13);
        let mut table = SymbolTable::new();
        let lang = generate_language(&mut table, &spec).unwrap();
        let dir = std::env::temp_dir().join("pronlearn_rules");
        fs::create_dir_all(&dir).unwrap();
        let path = dir.join("r.rules");
        write_rules(&lang.rules, &path).unwrap();
        let back = read_rules(&path).unwrap();
        assert_eq!(back, lang.rules);
    }

    #[test]
    fn infeasible_specs_are_rejected() {
        let mut spec = small_spec(1);
        spec.n_digraph_rules = 20 * 20 + 1;
        assert!(generate_language(&mut SymbolTable::new(), &spec).is_err());
        let mut spec = small_spec(1);
        spec.irregularity_rate = 1.0;
        assert!(generate_language(&mut SymbolTable::new(), &spec).is_err());
        let mut spec = small_spec(1);
        spec.sentence_len = (5, 2);
        assert!(generate_language(&mut SymbolTable::new(), &spec).is_err());
    }
}
