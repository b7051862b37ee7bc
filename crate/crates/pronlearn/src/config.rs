//! Pipeline configuration file.
//!
//! Sectioned key/value text. `#` starts a comment, blank lines are
//! ignored, keys are `name = value` inside a `[section]`:
//!
//! ```text
//! [paths]
//! seed_lexicon = seeds/size500.lex   # inputs
//! corpus = corpus.txt                # the "train set"
//! decode_corpus =                    # optional distinct "decode set"
//! gold_lexicon = gold.lex
//! run_dir = runs/std
//! test_lexicon =                     # optional; default: gold minus seed
//!
//! [g2p]
//! order = 3
//! lambda = 5
//! beam = 8
//! em_iters = 10
//!
//! [lm]
//! order = 5
//!
//! [noise]
//! p_sub = 0.08
//! p_ins = 0.02
//! p_del = 0.02
//! n_candidates = 4
//!
//! [topology]
//! a_loop = 0.1
//! a_adv = 0.8
//! a_skip = 0.1
//! enter_first = 0.9
//! enter_second = 0.1
//! em_iters = 30
//! tol = 1e-4
//!
//! [learn]
//! k = 1,2,4,6,8
//!
//! [run]
//! seed = 1
//! iterations = 1
//! seed_sizes =                       # sweep sizes, e.g. 50,500,2000
//!
//! [multilingual]                     # optional pooling data
//! exclude_target_vocab = true
//! lexicon.yy = other/yy.lex          # one per extra language tag
//!
//! [synth]                            # used by the synth-gen command
//! n_graphemes = 20
//! n_phonemes = 24
//! n_digraph_rules = 5
//! irregularity_rate = 0.05
//! vocab_size = 2000
//! zipf_exponent = 1.1
//! sentence_len_min = 3
//! sentence_len_max = 8
//! n_sentences = 20000
//! language_tag = syn
//! ```
//!
//! The config hash covers every semantic field (with defaults resolved)
//! except `run_dir`, so formatting, comments, and key order never
//! invalidate a run directory, while any meaningful change does. Input
//! file contents are hashed separately for staleness checks.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::synthlang::SynthSpec;

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    // [paths]
    pub seed_lexicon: PathBuf,
    pub corpus: PathBuf,
    /// Distinct decode-set corpus; decoding and lexicon learning run on
    /// it while vocabulary annotation and LM transcripts come from
    /// `corpus`. Defaults to `corpus` itself.
    pub decode_corpus: Option<PathBuf>,
    pub gold_lexicon: PathBuf,
    pub run_dir: PathBuf,
    pub test_lexicon: Option<PathBuf>,
    // [g2p]
    pub g2p_order: usize,
    pub lambda: f64,
    pub beam: usize,
    pub g2p_em_iters: usize,
    pub exclude_target_vocab: bool,
    // [lm]
    pub lm_order: usize,
    // [noise]
    pub p_sub: f64,
    pub p_ins: f64,
    pub p_del: f64,
    pub n_candidates: usize,
    // [topology]
    pub a_loop: f64,
    pub a_adv: f64,
    pub a_skip: f64,
    pub enter_first: f64,
    pub enter_second: f64,
    pub hmm_em_iters: usize,
    pub hmm_tol: f64,
    // [learn]
    pub k_list: Vec<u64>,
    // [run]
    pub seed: u64,
    pub iterations: usize,
    pub seed_sizes: Vec<usize>,
    // [multilingual]
    pub multilingual: Vec<(String, PathBuf)>,
    // [synth]
    pub synth: SynthSpec,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            seed_lexicon: PathBuf::new(),
            corpus: PathBuf::new(),
            decode_corpus: None,
            gold_lexicon: PathBuf::new(),
            run_dir: PathBuf::new(),
            test_lexicon: None,
            g2p_order: 3,
            lambda: 5.0,
            beam: 8,
            g2p_em_iters: 10,
            exclude_target_vocab: true,
            lm_order: 5,
            p_sub: 0.08,
            p_ins: 0.02,
            p_del: 0.02,
            n_candidates: 4,
            a_loop: 0.10,
            a_adv: 0.80,
            a_skip: 0.10,
            enter_first: 0.9,
            enter_second: 0.1,
            hmm_em_iters: 30,
            hmm_tol: 1e-4,
            k_list: vec![1, 2, 4, 6, 8],
            seed: 1,
            iterations: 1,
            seed_sizes: Vec::new(),
            multilingual: Vec::new(),
            synth: SynthSpec::new(2000, 20_000, 1),
        }
    }
}

fn parse_list<T: std::str::FromStr>(value: &str) -> Option<Vec<T>> {
    if value.trim().is_empty() {
        return Some(Vec::new());
    }
    value
        .split(',')
        .map(|t| t.trim().parse::<T>().ok())
        .collect()
}

impl PipelineConfig {
    pub fn parse_file(path: impl AsRef<Path>) -> Result<PipelineConfig> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_str(&text, path)
    }

    pub fn parse_str(text: &str, path: &Path) -> Result<PipelineConfig> {
        let mut cfg = PipelineConfig::default();
        let mut section = String::new();
        for (lineno, raw) in text.lines().enumerate() {
            let lineno = lineno + 1;
            let line = match raw.find('#') {
                Some(i) => &raw[..i],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let name = name
                    .strip_suffix(']')
                    .ok_or_else(|| Error::parse(path, lineno, "unterminated section header"))?;
                section = name.trim().to_string();
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(path, lineno, "expected key = value"))?;
            let key = key.trim();
            let value = value.trim();
            cfg.apply(&section, key, value)
                .map_err(|msg| Error::parse(path, lineno, msg))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn apply(&mut self, section: &str, key: &str, value: &str) -> std::result::Result<(), String> {
        fn num<T: std::str::FromStr>(value: &str, what: &str) -> std::result::Result<T, String> {
            value.parse::<T>().map_err(|_| format!("bad {what}: {value:?}"))
        }
        match (section, key) {
            ("paths", "seed_lexicon") => self.seed_lexicon = PathBuf::from(value),
            ("paths", "corpus") => self.corpus = PathBuf::from(value),
            ("paths", "decode_corpus") => {
                self.decode_corpus = if value.is_empty() {
                    None
                } else {
                    Some(PathBuf::from(value))
                }
            }
            ("paths", "gold_lexicon") => self.gold_lexicon = PathBuf::from(value),
            ("paths", "run_dir") => self.run_dir = PathBuf::from(value),
            ("paths", "test_lexicon") => {
                self.test_lexicon = if value.is_empty() {
                    None
                } else {
                    Some(PathBuf::from(value))
                }
            }
            ("g2p", "order") => self.g2p_order = num(value, "order")?,
            ("g2p", "lambda") => self.lambda = num(value, "lambda")?,
            ("g2p", "beam") => self.beam = num(value, "beam")?,
            ("g2p", "em_iters") => self.g2p_em_iters = num(value, "em_iters")?,
            ("g2p", "exclude_target_vocab") => {
                self.exclude_target_vocab = num(value, "exclude_target_vocab")?
            }
            ("lm", "order") => self.lm_order = num(value, "order")?,
            ("noise", "p_sub") => self.p_sub = num(value, "p_sub")?,
            ("noise", "p_ins") => self.p_ins = num(value, "p_ins")?,
            ("noise", "p_del") => self.p_del = num(value, "p_del")?,
            ("noise", "n_candidates") => self.n_candidates = num(value, "n_candidates")?,
            ("topology", "a_loop") => self.a_loop = num(value, "a_loop")?,
            ("topology", "a_adv") => self.a_adv = num(value, "a_adv")?,
            ("topology", "a_skip") => self.a_skip = num(value, "a_skip")?,
            ("topology", "enter_first") => self.enter_first = num(value, "enter_first")?,
            ("topology", "enter_second") => self.enter_second = num(value, "enter_second")?,
            ("topology", "em_iters") => self.hmm_em_iters = num(value, "em_iters")?,
            ("topology", "tol") => self.hmm_tol = num(value, "tol")?,
            ("learn", "k") => {
                self.k_list = parse_list(value).ok_or_else(|| format!("bad k list: {value:?}"))?
            }
            ("run", "seed") => self.seed = num(value, "seed")?,
            ("run", "iterations") => self.iterations = num(value, "iterations")?,
            ("run", "seed_sizes") => {
                self.seed_sizes =
                    parse_list(value).ok_or_else(|| format!("bad seed_sizes: {value:?}"))?
            }
            ("multilingual", "exclude_target_vocab") => {
                self.exclude_target_vocab = num(value, "exclude_target_vocab")?
            }
            ("multilingual", k) if k.starts_with("lexicon.") => {
                let tag = &k["lexicon.".len()..];
                if tag.is_empty() {
                    return Err("empty language tag in multilingual lexicon key".into());
                }
                self.multilingual.push((tag.to_string(), PathBuf::from(value)));
            }
            ("synth", "n_graphemes") => self.synth.n_graphemes = num(value, "n_graphemes")?,
            ("synth", "n_phonemes") => self.synth.n_phonemes = num(value, "n_phonemes")?,
            ("synth", "n_digraph_rules") => {
                self.synth.n_digraph_rules = num(value, "n_digraph_rules")?
            }
            ("synth", "irregularity_rate") => {
                self.synth.irregularity_rate = num(value, "irregularity_rate")?
            }
            ("synth", "vocab_size") => self.synth.vocab_size = num(value, "vocab_size")?,
            ("synth", "zipf_exponent") => self.synth.zipf_exponent = num(value, "zipf_exponent")?,
            ("synth", "sentence_len_min") => {
                self.synth.sentence_len.0 = num(value, "sentence_len_min")?
            }
            ("synth", "sentence_len_max") => {
                self.synth.sentence_len.1 = num(value, "sentence_len_max")?
            }
            ("synth", "n_sentences") => self.synth.n_sentences = num(value, "n_sentences")?,
            ("synth", "language_tag") => self.synth.language_tag = value.to_string(),
            (s, k) => return Err(format!("unknown config key [{s}] {k}")),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.k_list.is_empty() {
            return Err(Error::InvalidArgument("k list must be non-empty".into()));
        }
        for pair in self.k_list.windows(2) {
            if pair[0] >= pair[1] {
                return Err(Error::InvalidArgument(
                    "k values must be strictly increasing".into(),
                ));
            }
        }
        if self.k_list[0] < 1 {
            return Err(Error::InvalidArgument("k values must be >= 1".into()));
        }
        if self.iterations < 1 {
            return Err(Error::InvalidArgument("iterations must be >= 1".into()));
        }
        if self.beam < 1 || self.n_candidates < 1 {
            return Err(Error::InvalidArgument(
                "beam and n_candidates must be >= 1".into(),
            ));
        }
        if self.lambda < 1.0 {
            return Err(Error::InvalidArgument("lambda must be >= 1".into()));
        }
        for pair in self.seed_sizes.windows(2) {
            if pair[0] >= pair[1] {
                return Err(Error::InvalidArgument(
                    "seed_sizes must be strictly increasing".into(),
                ));
            }
        }
        Ok(())
    }

    /// Canonical dump of all semantic fields, defaults resolved. The
    /// output run directory is deliberately excluded.
    pub fn canonical(&self) -> String {
        let mut fields: BTreeMap<&str, String> = BTreeMap::new();
        fields.insert("paths.seed_lexicon", self.seed_lexicon.display().to_string());
        fields.insert("paths.corpus", self.corpus.display().to_string());
        fields.insert(
            "paths.decode_corpus",
            self.decode_corpus
                .as_ref()
                .map(|p| p.display().to_string())
                .unwrap_or_default(),
        );
        fields.insert("paths.gold_lexicon", self.gold_lexicon.display().to_string());
        fields.insert(
            "paths.test_lexicon",
            self.test_lexicon
                .as_ref()
                .map(|p| p.display().to_string())
                .unwrap_or_default(),
        );
        fields.insert("g2p.order", self.g2p_order.to_string());
        fields.insert("g2p.lambda", self.lambda.to_string());
        fields.insert("g2p.beam", self.beam.to_string());
        fields.insert("g2p.em_iters", self.g2p_em_iters.to_string());
        fields.insert(
            "g2p.exclude_target_vocab",
            self.exclude_target_vocab.to_string(),
        );
        fields.insert("lm.order", self.lm_order.to_string());
        fields.insert("noise.p_sub", self.p_sub.to_string());
        fields.insert("noise.p_ins", self.p_ins.to_string());
        fields.insert("noise.p_del", self.p_del.to_string());
        fields.insert("noise.n_candidates", self.n_candidates.to_string());
        fields.insert("topology.a_loop", self.a_loop.to_string());
        fields.insert("topology.a_adv", self.a_adv.to_string());
        fields.insert("topology.a_skip", self.a_skip.to_string());
        fields.insert("topology.enter_first", self.enter_first.to_string());
        fields.insert("topology.enter_second", self.enter_second.to_string());
        fields.insert("topology.em_iters", self.hmm_em_iters.to_string());
        fields.insert("topology.tol", self.hmm_tol.to_string());
        fields.insert(
            "learn.k",
            self.k_list
                .iter()
                .map(|k| k.to_string())
                .collect::<Vec<_>>()
                .join(","),
        );
        fields.insert("run.seed", self.seed.to_string());
        fields.insert("run.iterations", self.iterations.to_string());
        fields.insert(
            "run.seed_sizes",
            self.seed_sizes
                .iter()
                .map(|s| s.to_string())
                .collect::<Vec<_>>()
                .join(","),
        );
        let mut multi: Vec<String> = self
            .multilingual
            .iter()
            .map(|(tag, p)| format!("{tag}={}", p.display()))
            .collect();
        multi.sort();
        fields.insert("multilingual.lexicons", multi.join(";"));
        fields.insert("synth.n_graphemes", self.synth.n_graphemes.to_string());
        fields.insert("synth.n_phonemes", self.synth.n_phonemes.to_string());
        fields.insert(
            "synth.n_digraph_rules",
            self.synth.n_digraph_rules.to_string(),
        );
        fields.insert(
            "synth.irregularity_rate",
            self.synth.irregularity_rate.to_string(),
        );
        fields.insert("synth.vocab_size", self.synth.vocab_size.to_string());
        fields.insert("synth.zipf_exponent", self.synth.zipf_exponent.to_string());
        fields.insert(
            "synth.sentence_len",
            format!("{},{}", self.synth.sentence_len.0, self.synth.sentence_len.1),
        );
        fields.insert("synth.n_sentences", self.synth.n_sentences.to_string());
        fields.insert("synth.language_tag", self.synth.language_tag.clone());
        let mut out = String::new();
        for (k, v) in fields {
            out.push_str(k);
            out.push('=');
            out.push_str(&v);
            out.push('\n');
        }
        out
    }

    /// FNV-1a hash of the canonical form, as fixed-width hex.
    pub fn config_hash(&self) -> String {
        format!("{:016x}", fnv64(self.canonical().as_bytes()))
    }

    /// Hash of the input file contents (seed, corpus, gold, optional test
    /// and multilingual lexicons), for staleness checks.
    pub fn input_hash(&self) -> Result<String> {
        let mut h = FNV_OFFSET;
        let mut paths: Vec<&Path> = vec![&self.seed_lexicon, &self.corpus, &self.gold_lexicon];
        if let Some(d) = &self.decode_corpus {
            paths.push(d);
        }
        if let Some(t) = &self.test_lexicon {
            paths.push(t);
        }
        for (_, p) in &self.multilingual {
            paths.push(p);
        }
        for p in paths {
            let data = fs::read(p).map_err(|e| Error::io(p, e))?;
            h = fnv64_update(h, &data);
            h = fnv64_update(h, b"\0");
        }
        Ok(format!("{h:016x}"))
    }
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv64_update(mut hash: u64, bytes: &[u8]) -> u64 {
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(FNV_PRIME);
    }
    hash
}

pub fn fnv64(bytes: &[u8]) -> u64 {
    fnv64_update(FNV_OFFSET, bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = "\
# a comment
[paths]
seed_lexicon = seed.lex
corpus = c.txt
gold_lexicon = gold.lex
run_dir = runs/a

[learn]
k = 1,2,4

[run]
seed = 9
";

    #[test]
    fn parses_with_defaults() {
        let cfg = PipelineConfig::parse_str(SAMPLE, Path::new("test.cfg")).unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.k_list, vec![1, 2, 4]);
        assert_eq!(cfg.lm_order, 5);
        assert_eq!(cfg.g2p_order, 3);
        assert_eq!(cfg.p_sub, 0.08);
    }

    #[test]
    fn hash_ignores_formatting_but_not_values() {
        let a = PipelineConfig::parse_str(SAMPLE, Path::new("a.cfg")).unwrap();
        let shuffled = "\
[run]
seed = 9
[learn]
k = 1,2,4
[paths]
gold_lexicon = gold.lex   # trailing comment
corpus = c.txt
run_dir = runs/WHATEVER
seed_lexicon = seed.lex
";
        let b = PipelineConfig::parse_str(shuffled, Path::new("b.cfg")).unwrap();
        assert_eq!(a.config_hash(), b.config_hash());
        let changed = SAMPLE.replace("seed = 9", "seed = 10");
        let c = PipelineConfig::parse_str(&changed, Path::new("c.cfg")).unwrap();
        assert_ne!(a.config_hash(), c.config_hash());
    }

    #[test]
    fn run_dir_is_not_semantic() {
        let a = PipelineConfig::parse_str(SAMPLE, Path::new("a.cfg")).unwrap();
        let moved = SAMPLE.replace("runs/a", "runs/b");
        let b = PipelineConfig::parse_str(&moved, Path::new("b.cfg")).unwrap();
        assert_eq!(a.config_hash(), b.config_hash());
    }

    #[test]
    fn rejects_unknown_keys_and_bad_lists() {
        assert!(PipelineConfig::parse_str("[paths]\nbogus = 1\n", Path::new("x")).is_err());
        assert!(PipelineConfig::parse_str("[learn]\nk = 4,2\n", Path::new("x")).is_err());
        assert!(PipelineConfig::parse_str("[learn]\nk = 0\n", Path::new("x")).is_err());
        assert!(PipelineConfig::parse_str("[run]\niterations = 0\n", Path::new("x")).is_err());
    }

    #[test]
    fn multilingual_keys_parse() {
        let text = "\
[multilingual]
exclude_target_vocab = false
lexicon.yy = yy.lex
lexicon.zz = zz.lex
";
        let cfg = PipelineConfig::parse_str(text, Path::new("m.cfg")).unwrap();
        assert!(!cfg.exclude_target_vocab);
        assert_eq!(cfg.multilingual.len(), 2);
        assert_eq!(cfg.multilingual[0].0, "yy");
    }
}
