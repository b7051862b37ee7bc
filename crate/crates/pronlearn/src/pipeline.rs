//! End-to-end pipeline orchestration with resumable on-disk stages.
//!
//! A run executes: train a baseline G2P on the seed lexicon -> annotate
//! the corpus vocabulary -> train a phone LM on the generated transcripts
//! -> decode the corpus through the noisy channel -> discover word
//! boundaries and harvest pronunciations -> threshold at each `k` -> pool
//! with the seed -> retrain -> evaluate baseline and retrained models on
//! held-out words.
//!
//! Every stage persists its artifact under the run directory. A run
//! directory is keyed by the config hash plus the input-content hash;
//! rerunning with an unchanged key reuses artifacts instead of
//! recomputing, and an intact completed run reproduces its manifest
//! byte-identically. Wall-clock timings go to `run.log`, which is the one
//! file excluded from determinism guarantees.

use std::cell::RefCell;
use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;

use crate::config::PipelineConfig;
use crate::corpus::{read_corpus, write_corpus, Corpus, Sentence};
use crate::error::{Error, Result};
use crate::eval::{compare_dictionaries, evaluate_lexicon, MissingPolicy};
use crate::g2p::{
    apply_g2p, entries_from_lexicon, exclude_words, fine_tune, train_g2p, G2pModel, TaggedEntry,
    TrainConfig,
};
use crate::lexicon::{read_lexicon, write_lexicon, Lexicon, Pronunciation};
use crate::lexlearn::{
    accept_threshold, em_train, harvest, init_emissions, pool_with_seed, read_harvest,
    viterbi_align, write_harvest, Alignment, Topology,
};
use crate::phonelm::PhoneLm;
use crate::recognizer::{decode_corpus, DecodeConfig, NoiseModel};
use crate::symbol::{Symbol, SymbolTable};
use crate::synthlang::split_seed;

/// Deterministic record of a run: stage artifacts and metrics. Artifact
/// paths are relative to the run directory.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunManifest {
    pub config_hash: String,
    pub input_hash: String,
    pub artifacts: Vec<(String, String)>,
    /// `(scope, name, value)` rows, e.g. `("k=1", "retrained_test_per", ...)`.
    pub metrics: Vec<(String, String, String)>,
}

impl RunManifest {
    pub fn metric(&self, scope: &str, name: &str) -> Option<&str> {
        self.metrics
            .iter()
            .find(|(s, n, _)| s == scope && n == name)
            .map(|(_, _, v)| v.as_str())
    }

    pub fn metric_f64(&self, scope: &str, name: &str) -> Option<f64> {
        self.metric(scope, name)?.parse().ok()
    }

    fn push(&mut self, scope: &str, name: &str, value: impl std::fmt::Display) {
        self.metrics
            .push((scope.to_string(), name.to_string(), value.to_string()));
    }

    pub fn format(&self) -> String {
        let mut out = String::from("#manifest v1\n");
        out.push_str(&format!("hash\tconfig\t{}\n", self.config_hash));
        out.push_str(&format!("hash\tinputs\t{}\n", self.input_hash));
        for (stage, path) in &self.artifacts {
            out.push_str(&format!("artifact\t{stage}\t{path}\n"));
        }
        for (scope, name, value) in &self.metrics {
            out.push_str(&format!("metric\t{scope}\t{name}\t{value}\n"));
        }
        out
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.format()).map_err(|e| Error::io(path, e))
    }

    pub fn parse(path: impl AsRef<Path>) -> Result<RunManifest> {
        let path = path.as_ref();
        let data = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut manifest = RunManifest::default();
        let mut lines = data.lines().enumerate();
        match lines.next() {
            Some((_, "#manifest v1")) => {}
            _ => return Err(Error::parse(path, 1, "expected #manifest v1 header")),
        }
        for (n, line) in lines {
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            match fields.as_slice() {
                ["hash", "config", v] => manifest.config_hash = v.to_string(),
                ["hash", "inputs", v] => manifest.input_hash = v.to_string(),
                ["artifact", stage, p] => manifest
                    .artifacts
                    .push((stage.to_string(), p.to_string())),
                ["metric", scope, name, value] => manifest.metrics.push((
                    scope.to_string(),
                    name.to_string(),
                    value.to_string(),
                )),
                _ => return Err(Error::parse(path, n + 1, "bad manifest line")),
            }
        }
        Ok(manifest)
    }
}

fn ratio(x: f64) -> String {
    format!("{x:.6}")
}

/// Stage driver: persists artifacts under a directory and reuses them
/// when the run key is unchanged.
struct StageRunner {
    dir: PathBuf,
    reuse: bool,
    artifacts: RefCell<Vec<(String, String)>>,
    log: RefCell<Vec<String>>,
}

impl StageRunner {
    fn new(dir: PathBuf, reuse: bool) -> Result<StageRunner> {
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        Ok(StageRunner {
            dir,
            reuse,
            artifacts: RefCell::new(Vec::new()),
            log: RefCell::new(Vec::new()),
        })
    }

    fn path(&self, rel: &str) -> PathBuf {
        self.dir.join(rel)
    }

    fn stage<T>(
        &self,
        name: &str,
        rel: &str,
        read: impl FnOnce(&Path) -> Result<T>,
        compute: impl FnOnce() -> Result<T>,
        write: impl FnOnce(&T, &Path) -> Result<()>,
    ) -> Result<T> {
        let path = self.path(rel);
        self.artifacts
            .borrow_mut()
            .push((name.to_string(), rel.to_string()));
        let start = Instant::now();
        if self.reuse && path.exists() {
            if let Ok(value) = read(&path) {
                self.log.borrow_mut().push(format!(
                    "stage {name} reused {rel} ({:.3}s)",
                    start.elapsed().as_secs_f64()
                ));
                return Ok(value);
            }
        }
        let value = compute().map_err(|e| e.in_stage(name))?;
        write(&value, &path).map_err(|e| e.in_stage(name))?;
        self.log.borrow_mut().push(format!(
            "stage {name} computed {rel} ({:.3}s)",
            start.elapsed().as_secs_f64()
        ));
        Ok(value)
    }

    fn note(&self, line: impl Into<String>) {
        self.log.borrow_mut().push(line.into());
    }

    fn flush_log(&self) {
        let path = self.dir.join("run.log");
        let _ = fs::write(&path, self.log.borrow().join("\n") + "\n");
    }

    fn take_artifacts(&self) -> Vec<(String, String)> {
        self.artifacts.borrow_mut().drain(..).collect()
    }
}

struct Inputs {
    table: SymbolTable,
    seed: Lexicon,
    corpus: Corpus,
    /// Distinct decode set, when configured; `None` means decode the
    /// train corpus itself.
    decode: Option<Corpus>,
    gold: Lexicon,
    test: Lexicon,
    multilingual: Vec<TaggedEntry>,
}

fn load_inputs(cfg: &PipelineConfig) -> Result<Inputs> {
    let mut table = SymbolTable::new();
    let seed = read_lexicon(&mut table, &cfg.seed_lexicon)?;
    let corpus = read_corpus(&mut table, &cfg.corpus)?;
    for (i, s) in corpus.sentences.iter().enumerate() {
        if s.phones.is_none() {
            return Err(Error::MissingPhones { index: i });
        }
    }
    let decode = match &cfg.decode_corpus {
        None => None,
        Some(path) => {
            let c = read_corpus(&mut table, path)?;
            for (i, s) in c.sentences.iter().enumerate() {
                if s.phones.is_none() {
                    return Err(Error::MissingPhones { index: i });
                }
            }
            Some(c)
        }
    };
    let gold = read_lexicon(&mut table, &cfg.gold_lexicon)?;
    let test = match &cfg.test_lexicon {
        Some(path) => read_lexicon(&mut table, path)?,
        None => {
            let held_out: Vec<&str> =
                gold.words().filter(|w| !seed.contains(w)).collect();
            gold.restrict(held_out)
        }
    };
    let mut multilingual = Vec::new();
    let target_vocab: BTreeSet<String> = corpus
        .vocabulary()
        .iter()
        .map(|w| w.surface().to_string())
        .collect();
    for (tag, path) in &cfg.multilingual {
        let lex = read_lexicon(&mut table, path)?;
        let mut entries = entries_from_lexicon(&mut table, &lex, tag)?;
        if cfg.exclude_target_vocab {
            entries = exclude_words(entries, &target_vocab);
        }
        multilingual.extend(entries);
    }
    Ok(Inputs {
        table,
        seed,
        corpus,
        decode,
        gold,
        test,
        multilingual,
    })
}

fn train_target_g2p(
    table: &SymbolTable,
    cfg: &PipelineConfig,
    multilingual: &[TaggedEntry],
    target: &[TaggedEntry],
) -> Result<G2pModel> {
    let tc = TrainConfig {
        order: cfg.g2p_order,
        em_iters: cfg.g2p_em_iters,
        em_tol: 1e-4,
        seed: cfg.seed,
    };
    if multilingual.is_empty() {
        train_g2p(table, target, &tc)
    } else {
        fine_tune(table, multilingual, target, cfg.lambda, &tc)
    }
}

/// Entries a graphone model can align; harvested pronunciations can be
/// too long for a word when boundaries went wrong.
fn partition_alignable(entries: Vec<TaggedEntry>) -> (Vec<TaggedEntry>, usize) {
    let mut keep = Vec::with_capacity(entries.len());
    let mut dropped = 0usize;
    for e in entries {
        if e.pron.len() <= 2 * e.word.len() && !e.pron.is_empty() {
            keep.push(e);
        } else {
            dropped += 1;
        }
    }
    (keep, dropped)
}

fn transcripts_from(corpus: &Corpus, lexicon: &Lexicon) -> (Corpus, usize) {
    let mut out = Corpus::new(corpus.language_tag.clone());
    let mut skipped = 0usize;
    for s in &corpus.sentences {
        let mut phones = Vec::new();
        let mut ok = true;
        for w in &s.words {
            match lexicon.first_pron(w.surface()) {
                Some(p) => phones.extend(p.iter().copied()),
                None => {
                    ok = false;
                    break;
                }
            }
        }
        if ok {
            out.sentences.push(Sentence {
                words: s.words.clone(),
                phones: Some(Pronunciation(phones)),
            });
        } else {
            skipped += 1;
        }
    }
    (out, skipped)
}

fn phoneme_inventory(
    table: &SymbolTable,
    lexicons: &[&Lexicon],
    corpora: &[&Corpus],
) -> Vec<Symbol> {
    let mut set = BTreeSet::new();
    for lex in lexicons {
        for (_, e) in lex.iter() {
            set.extend(e.pron.iter().copied());
        }
    }
    for corpus in corpora {
        for s in &corpus.sentences {
            if let Some(p) = &s.phones {
                set.extend(p.iter().copied());
            }
        }
    }
    let mut v: Vec<Symbol> = set.into_iter().collect();
    v.sort_by(|a, b| table.text(*a).cmp(table.text(*b)));
    v
}

fn grapheme_inventory(table: &SymbolTable, corpus: &Corpus) -> Vec<Symbol> {
    let mut set = BTreeSet::new();
    for s in &corpus.sentences {
        for w in &s.words {
            set.extend(w.graphemes().iter().copied());
        }
    }
    let mut v: Vec<Symbol> = set.into_iter().collect();
    v.sort_by(|a, b| table.text(*a).cmp(table.text(*b)));
    v
}

/// Predict pronunciations for a word list, silently skipping words the
/// model cannot handle (the caller evaluates coverage).
fn predict_lexicon(
    model: &G2pModel,
    table: &mut SymbolTable,
    tag: &str,
    words: &[&str],
    beam: usize,
) -> Result<Lexicon> {
    let mut word_objs = Vec::with_capacity(words.len());
    for w in words {
        word_objs.push(crate::lexicon::Word::from_surface(table, w)?);
    }
    let refs: Vec<&crate::lexicon::Word> = word_objs.iter().collect();
    let (lex, _skipped) = apply_g2p(model, table, tag, &refs, beam);
    Ok(lex)
}

struct CycleOutputs {
    generated: Lexicon,
    per_k: Vec<(u64, Lexicon, G2pModel)>,
    metrics: Vec<(String, String, String)>,
}

/// One annotate -> decode -> learn -> retrain cycle, with per-stage
/// persistence under `runner`.
#[allow(clippy::too_many_arguments)]
fn core_cycle(
    runner: &StageRunner,
    table: &mut SymbolTable,
    cfg: &PipelineConfig,
    annotate_model: &G2pModel,
    corpus: &Corpus,
    decode_set: Option<&Corpus>,
    pool_seed: &Lexicon,
    ks: &[u64],
    multilingual: &[TaggedEntry],
) -> Result<CycleOutputs> {
    let tag = corpus.language_tag.clone();
    let decode_set = decode_set.unwrap_or(corpus);
    let mut metrics: Vec<(String, String, String)> = Vec::new();

    // annotate the vocabulary of both sets with the current G2P
    let vocab_words: Vec<String> = {
        let mut words: Vec<String> = corpus
            .vocabulary()
            .iter()
            .chain(decode_set.vocabulary().iter())
            .map(|w| w.surface().to_string())
            .collect();
        words.sort();
        words.dedup();
        words
    };
    let generated = {
        let vocab_refs: Vec<&str> = vocab_words.iter().map(|s| s.as_str()).collect();
        let table_ref = RefCell::new(&mut *table);
        runner.stage(
            "g2p_generated",
            "02_generated.lex",
            |p| {
                let mut t = table_ref.borrow_mut();
                read_lexicon(&mut t, p)
            },
            || {
                let mut t = table_ref.borrow_mut();
                predict_lexicon(annotate_model, &mut t, &tag, &vocab_refs, cfg.beam)
            },
            |lex, p| {
                let t = table_ref.borrow();
                write_lexicon(lex, &t, p)
            },
        )?
    };
    metrics.push((
        "corpus".into(),
        "vocab_words".into(),
        vocab_words.len().to_string(),
    ));
    metrics.push((
        "corpus".into(),
        "generated_words".into(),
        generated.word_count().to_string(),
    ));

    // phone-level transcripts from the generated dictionary
    let (transcripts, transcript_skipped) = {
        let table_ref = RefCell::new(&mut *table);
        runner.stage(
            "transcripts",
            "03_transcripts.corpus",
            |p| {
                let mut t = table_ref.borrow_mut();
                let c = read_corpus(&mut t, p)?;
                Ok((c, usize::MAX))
            },
            || Ok(transcripts_from(corpus, &generated)),
            |(c, _), p| {
                let t = table_ref.borrow();
                write_corpus(c, &t, p)
            },
        )?
    };
    let transcript_skipped = if transcript_skipped == usize::MAX {
        corpus.len() - transcripts.len()
    } else {
        transcript_skipped
    };
    metrics.push((
        "corpus".into(),
        "transcript_sentences".into(),
        transcripts.len().to_string(),
    ));
    metrics.push((
        "corpus".into(),
        "transcript_skipped".into(),
        transcript_skipped.to_string(),
    ));
    if transcripts.is_empty() {
        return Err(Error::EmptyInput(
            "no sentence is fully covered by the generated lexicon",
        ).in_stage("transcripts"));
    }

    // phone LM on the generated transcripts
    let lm = {
        let sequences: Vec<Pronunciation> = transcripts
            .sentences
            .iter()
            .map(|s| s.phones.clone().unwrap())
            .collect();
        let table_ref = &*table;
        runner.stage(
            "phone_lm",
            "04_phone.lm",
            |p| PhoneLm::load(p),
            || PhoneLm::train(table_ref, &sequences, cfg.lm_order),
            |lm, p| lm.save(p),
        )?
    };

    // decode the decode set through the noisy channel, LM-guided
    let decoded = {
        let inventory = phoneme_inventory(table, &[pool_seed, &generated], &[corpus, decode_set]);
        let nm = NoiseModel::new(table, cfg.p_sub, cfg.p_ins, cfg.p_del, cfg.seed, inventory)?;
        let dc = DecodeConfig {
            n_candidates: cfg.n_candidates,
        };
        let table_ref = RefCell::new(&mut *table);
        runner.stage(
            "decode",
            "05_decoded.corpus",
            |p| {
                let mut t = table_ref.borrow_mut();
                read_corpus(&mut t, p)
            },
            || {
                let t = table_ref.borrow();
                decode_corpus(&nm, &dc, &lm, &t, decode_set)
            },
            |c, p| {
                let t = table_ref.borrow();
                write_corpus(c, &t, p)
            },
        )?
    };

    // boundary discovery and harvesting
    let harvest_counts = {
        let table_ref = RefCell::new(&mut *table);
        runner.stage(
            "lexlearn",
            "06_harvest.tsv",
            |p| {
                let mut t = table_ref.borrow_mut();
                read_harvest(&mut t, p)
            },
            || {
                let t_guard = table_ref.borrow();
                let t: &SymbolTable = &t_guard;
                let graphemes = grapheme_inventory(t, &decoded);
                let phonemes =
                    phoneme_inventory(t, &[pool_seed, &generated], &[corpus, decode_set, &decoded]);
                let emissions = init_emissions(t, &graphemes, &phonemes)?;
                let (emissions, topo, report) = em_train(
                    t,
                    &decoded,
                    emissions,
                    Topology {
                        a_loop: cfg.a_loop,
                        a_adv: cfg.a_adv,
                        a_skip: cfg.a_skip,
                        enter_first: cfg.enter_first,
                        enter_second: cfg.enter_second,
                    },
                    cfg.hmm_em_iters,
                    cfg.hmm_tol,
                )?;
                runner.note(format!(
                    "lexlearn: {} EM iterations, {} skipped sentences",
                    report.iterations,
                    report.skipped_sentences.len()
                ));
                let alignments: Vec<Option<Alignment>> = decoded
                    .sentences
                    .par_iter()
                    .map(|s| {
                        viterbi_align(
                            t,
                            &s.words,
                            s.phones.as_ref().unwrap(),
                            &emissions,
                            &topo,
                        )
                        .ok()
                    })
                    .collect();
                let aligned = alignments.iter().filter(|a| a.is_some()).count();
                runner.note(format!(
                    "lexlearn: {aligned}/{} sentences aligned",
                    decoded.len()
                ));
                Ok(harvest(&decoded, &alignments))
            },
            |h, p| {
                let t = table_ref.borrow();
                write_harvest(h, &t, p)
            },
        )?
    };
    metrics.push((
        "lexlearn".into(),
        "harvested_words".into(),
        harvest_counts.word_count().to_string(),
    ));
    metrics.push((
        "lexlearn".into(),
        "empty_spans".into(),
        harvest_counts.empty_spans.to_string(),
    ));

    // threshold, pool, retrain per k
    let mut per_k = Vec::new();
    for &k in ks {
        let learned = {
            let table_ref = RefCell::new(&mut *table);
            runner.stage(
                &format!("learned_k{k}"),
                &format!("07_learned_k{k}.lex"),
                |p| {
                    let mut t = table_ref.borrow_mut();
                    read_lexicon(&mut t, p)
                },
                || {
                    let t = table_ref.borrow();
                    accept_threshold(&t, &harvest_counts, k, Some(&lm))
                },
                |lex, p| {
                    let t = table_ref.borrow();
                    write_lexicon(lex, &t, p)
                },
            )?
        };
        let pooled = {
            let table_ref = RefCell::new(&mut *table);
            runner.stage(
                &format!("pooled_k{k}"),
                &format!("08_pooled_k{k}.lex"),
                |p| {
                    let mut t = table_ref.borrow_mut();
                    read_lexicon(&mut t, p)
                },
                || {
                    let t = table_ref.borrow();
                    Ok(pool_with_seed(&t, &learned, pool_seed))
                },
                |lex, p| {
                    let t = table_ref.borrow();
                    write_lexicon(lex, &t, p)
                },
            )?
        };
        let (retrained, dropped) = {
            let entries = entries_from_lexicon(table, &pooled, &tag)?;
            let (alignable, dropped) = partition_alignable(entries);
            let table_ref = &*table;
            let model = runner.stage(
                &format!("retrained_k{k}"),
                &format!("09_retrained_k{k}.model"),
                |p| G2pModel::load(p),
                || train_target_g2p(table_ref, cfg, multilingual, &alignable),
                |m, p| m.save(p),
            )?;
            (model, dropped)
        };
        metrics.push((
            format!("k={k}"),
            "learned_words".into(),
            learned.word_count().to_string(),
        ));
        metrics.push((format!("k={k}"), "retrain_dropped".into(), dropped.to_string()));
        per_k.push((k, learned, retrained));
    }

    Ok(CycleOutputs {
        generated,
        per_k,
        metrics,
    })
}

/// Evaluate a set of G2P models on the same test lexicon over the words
/// every model covers, so error rates are comparable.
fn eval_models_on_common(
    table: &mut SymbolTable,
    runner: &StageRunner,
    names_and_models: &[(String, &G2pModel)],
    tag: &str,
    test: &Lexicon,
    beam: usize,
) -> Result<Vec<(String, f64, f64)>> {
    let test_words: Vec<&str> = test.words().collect();
    let mut hyps: Vec<(String, Lexicon)> = Vec::new();
    for (name, model) in names_and_models {
        let rel = format!("10_test_pred_{name}.lex");
        let stage_name = format!("test_pred_{name}");
        let lex = {
            let table_ref = RefCell::new(&mut *table);
            runner.stage(
                &stage_name,
                &rel,
                |p| {
                    let mut t = table_ref.borrow_mut();
                    read_lexicon(&mut t, p)
                },
                || {
                    let mut t = table_ref.borrow_mut();
                    predict_lexicon(model, &mut t, tag, &test_words, beam)
                },
                |lex, p| {
                    let t = table_ref.borrow();
                    write_lexicon(lex, &t, p)
                },
            )?
        };
        hyps.push((name.clone(), lex));
    }
    let mut common: Vec<&str> = test_words.clone();
    for (_, hyp) in &hyps {
        common.retain(|w| hyp.contains(w));
    }
    let common_test = test.restrict(common.iter().copied());
    let mut out = Vec::new();
    for (name, hyp) in &hyps {
        let report = evaluate_lexicon(hyp, &common_test, MissingPolicy::Skip)?;
        out.push((name.clone(), report.per, report.wer));
    }
    runner.note(format!(
        "eval: {} common test words of {}",
        common_test.word_count(),
        test.word_count()
    ));
    Ok(out)
}

/// Prepare a run directory: key it by config + input hashes, decide
/// whether artifacts may be reused, and short-circuit on a completed run.
fn open_run_dir(cfg: &PipelineConfig) -> Result<(StageRunner, String, String, Option<RunManifest>)> {
    cfg.validate()?;
    let config_hash = cfg.config_hash();
    let input_hash = cfg.input_hash()?;
    let key = format!("{config_hash}:{input_hash}");
    fs::create_dir_all(&cfg.run_dir).map_err(|e| Error::io(&cfg.run_dir, e))?;
    let hash_path = cfg.run_dir.join("run.hash");
    let reuse = fs::read_to_string(&hash_path)
        .map(|s| s.trim() == key)
        .unwrap_or(false);
    let manifest_path = cfg.run_dir.join("manifest.tsv");
    if reuse && manifest_path.exists() {
        let manifest = RunManifest::parse(&manifest_path)?;
        return Ok((
            StageRunner::new(cfg.run_dir.clone(), true)?,
            config_hash,
            input_hash,
            Some(manifest),
        ));
    }
    fs::write(&hash_path, &key).map_err(|e| Error::io(&hash_path, e))?;
    Ok((
        StageRunner::new(cfg.run_dir.clone(), reuse)?,
        config_hash,
        input_hash,
        None,
    ))
}

fn persist_failure(dir: &Path, manifest: &RunManifest, stage_err: &Error) {
    let mut partial = manifest.clone();
    partial.push("error", "stage", stage_err);
    let _ = partial.write(dir.join("manifest.partial.tsv"));
}

/// The single-pass pipeline.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<RunManifest> {
    let (runner, config_hash, input_hash, done) = open_run_dir(cfg)?;
    if let Some(manifest) = done {
        return Ok(manifest);
    }
    let mut manifest = RunManifest {
        config_hash,
        input_hash,
        ..RunManifest::default()
    };
    match run_pipeline_inner(cfg, &runner, &mut manifest) {
        Ok(()) => {
            manifest.artifacts = runner.take_artifacts();
            manifest.write(runner.path("manifest.tsv"))?;
            runner.flush_log();
            Ok(manifest)
        }
        Err(e) => {
            manifest.artifacts = runner.take_artifacts();
            persist_failure(&runner.dir, &manifest, &e);
            runner.flush_log();
            Err(e)
        }
    }
}

fn run_pipeline_inner(
    cfg: &PipelineConfig,
    runner: &StageRunner,
    manifest: &mut RunManifest,
) -> Result<()> {
    let mut inputs = load_inputs(cfg)?;
    let tag = inputs.corpus.language_tag.clone();
    manifest.push("corpus", "sentences", inputs.corpus.len());
    manifest.push("eval", "test_words", inputs.test.word_count());

    // persist the derived test lexicon for inspection and reuse
    {
        let table_ref = &inputs.table;
        let test_ref = &inputs.test;
        runner.stage(
            "test_lexicon",
            "00_test.lex",
            |p| {
                let mut scratch = SymbolTable::new();
                read_lexicon(&mut scratch, p).map(|_| ())
            },
            || Ok(()),
            |_, p| write_lexicon(test_ref, table_ref, p),
        )?;
    }

    let seed_entries = entries_from_lexicon(&mut inputs.table, &inputs.seed, &tag)?;
    let baseline = {
        let table_ref = &inputs.table;
        let multi = &inputs.multilingual;
        runner.stage(
            "g2p_baseline",
            "01_g2p_baseline.model",
            |p| G2pModel::load(p),
            || train_target_g2p(table_ref, cfg, multi, &seed_entries),
            |m, p| m.save(p),
        )?
    };

    let cycle = core_cycle(
        runner,
        &mut inputs.table,
        cfg,
        &baseline,
        &inputs.corpus,
        inputs.decode.as_ref(),
        &inputs.seed,
        &cfg.k_list,
        &inputs.multilingual,
    )?;
    for m in &cycle.metrics {
        manifest.metrics.push(m.clone());
    }

    // learned-dictionary quality (and the equivalent G2P dictionary on the
    // same words) against gold
    for (k, learned, _) in &cycle.per_k {
        let scope = format!("k={k}");
        let report = evaluate_lexicon(learned, &inputs.gold, MissingPolicy::Skip)?;
        manifest.push(&scope, "learned_per", ratio(report.per));
        manifest.push(&scope, "learned_wer", ratio(report.wer));
        let equivalent = cycle.generated.restrict(learned.words());
        if !equivalent.is_empty() {
            let eq_report = evaluate_lexicon(&equivalent, &inputs.gold, MissingPolicy::Skip)?;
            manifest.push(&scope, "g2p_equiv_per", ratio(eq_report.per));
            manifest.push(&scope, "g2p_equiv_wer", ratio(eq_report.wer));
            match compare_dictionaries(learned, &cycle.generated, &inputs.gold) {
                Ok(cmp) => {
                    manifest.push(&scope, "compare_num_words", cmp.num_words);
                    manifest.push(&scope, "better", cmp.better);
                    manifest.push(&scope, "worse", cmp.worse);
                    manifest.push(&scope, "same", cmp.same);
                }
                Err(Error::EmptyIntersection) => {}
                Err(e) => return Err(e),
            }
        }
    }

    // baseline vs retrained on held-out words, common coverage
    let mut models: Vec<(String, &G2pModel)> = vec![("baseline".to_string(), &baseline)];
    for (k, _, retrained) in &cycle.per_k {
        models.push((format!("k{k}"), retrained));
    }
    let evals = eval_models_on_common(
        &mut inputs.table,
        runner,
        &models,
        &tag,
        &inputs.test,
        cfg.beam,
    )?;
    let baseline_per = evals[0].1;
    manifest.push("baseline", "test_per", ratio(evals[0].1));
    manifest.push("baseline", "test_wer", ratio(evals[0].2));
    for ((k, _, _), (_, per, wer)) in cycle.per_k.iter().zip(evals.iter().skip(1)) {
        let scope = format!("k={k}");
        manifest.push(&scope, "retrained_test_per", ratio(*per));
        manifest.push(&scope, "retrained_test_wer", ratio(*wer));
        let rel = if baseline_per > 0.0 {
            (baseline_per - per) / baseline_per
        } else {
            0.0
        };
        manifest.push(&scope, "rel_reduction", ratio(rel));
    }
    Ok(())
}

/// Deterministic validation carve-out: every `stride`-th word of the
/// sorted seed, 10% but at least 10 words (capped so training keeps at
/// least one word).
pub fn split_validation(seed: &Lexicon) -> (Lexicon, Lexicon) {
    let words: Vec<&str> = seed.words().collect();
    let n = words.len();
    let want = n.div_ceil(10).max(10).min(n.saturating_sub(1)).max(1);
    let mut val_words = Vec::with_capacity(want);
    for i in 0..want {
        val_words.push(words[i * n / want]);
    }
    val_words.dedup();
    let val_set: BTreeSet<&str> = val_words.iter().copied().collect();
    let train_words: Vec<&str> = words.iter().copied().filter(|w| !val_set.contains(w)).collect();
    (seed.restrict(train_words), seed.restrict(val_words))
}

/// Iterative self-training: each iteration re-annotates the corpus with
/// the best G2P so far (selected by validation PER), rebuilds the LM,
/// decoding, and lexicon learning from scratch at `k = 1`, retrains, and
/// records test error rates.
pub fn run_iterations(cfg: &PipelineConfig) -> Result<RunManifest> {
    if cfg.iterations == 1 {
        return run_pipeline(cfg);
    }
    let (runner, config_hash, input_hash, done) = open_run_dir(cfg)?;
    if let Some(manifest) = done {
        return Ok(manifest);
    }
    let mut manifest = RunManifest {
        config_hash,
        input_hash,
        ..RunManifest::default()
    };
    match run_iterations_inner(cfg, &runner, &mut manifest) {
        Ok(mut artifacts) => {
            let mut all = runner.take_artifacts();
            all.append(&mut artifacts);
            manifest.artifacts = all;
            manifest.write(runner.path("manifest.tsv"))?;
            runner.flush_log();
            Ok(manifest)
        }
        Err(e) => {
            manifest.artifacts = runner.take_artifacts();
            persist_failure(&runner.dir, &manifest, &e);
            runner.flush_log();
            Err(e)
        }
    }
}

fn run_iterations_inner(
    cfg: &PipelineConfig,
    runner: &StageRunner,
    manifest: &mut RunManifest,
) -> Result<Vec<(String, String)>> {
    let mut inputs = load_inputs(cfg)?;
    let tag = inputs.corpus.language_tag.clone();
    let (train_seed, validation) = split_validation(&inputs.seed);
    manifest.push("corpus", "sentences", inputs.corpus.len());
    manifest.push("eval", "test_words", inputs.test.word_count());
    manifest.push("eval", "validation_words", validation.word_count());

    {
        let table_ref = &inputs.table;
        let (tr, va) = (&train_seed, &validation);
        runner.stage(
            "train_seed",
            "00_train_seed.lex",
            |p| {
                let mut scratch = SymbolTable::new();
                read_lexicon(&mut scratch, p).map(|_| ())
            },
            || Ok(()),
            |_, p| write_lexicon(tr, table_ref, p),
        )?;
        runner.stage(
            "validation",
            "00_validation.lex",
            |p| {
                let mut scratch = SymbolTable::new();
                read_lexicon(&mut scratch, p).map(|_| ())
            },
            || Ok(()),
            |_, p| write_lexicon(va, table_ref, p),
        )?;
    }

    let seed_entries = entries_from_lexicon(&mut inputs.table, &train_seed, &tag)?;
    let baseline = {
        let table_ref = &inputs.table;
        let multi = &inputs.multilingual;
        runner.stage(
            "g2p_baseline",
            "01_g2p_baseline.model",
            |p| G2pModel::load(p),
            || train_target_g2p(table_ref, cfg, multi, &seed_entries),
            |m, p| m.save(p),
        )?
    };

    let val_words: Vec<&str> = validation.words().collect();
    let val_per = |table: &mut SymbolTable, model: &G2pModel| -> Result<f64> {
        let hyp = predict_lexicon(model, table, &tag, &val_words, cfg.beam)?;
        let covered = validation.restrict(hyp.words());
        if covered.is_empty() {
            return Ok(1.0);
        }
        Ok(evaluate_lexicon(&hyp, &covered, MissingPolicy::Skip)?.per)
    };

    let mut best = baseline;
    let mut best_val = val_per(&mut inputs.table, &best)?;
    manifest.push("baseline", "val_per", ratio(best_val));

    let mut extra_artifacts = Vec::new();
    let mut iteration_models: Vec<(String, G2pModel)> = Vec::new();
    for iter in 1..=cfg.iterations {
        let sub = StageRunner::new(runner.path(&format!("iter{iter}")), runner.reuse)?;
        let cycle = core_cycle(
            &sub,
            &mut inputs.table,
            cfg,
            &best,
            &inputs.corpus,
            inputs.decode.as_ref(),
            &train_seed,
            &[1],
            &inputs.multilingual,
        )?;
        let scope = format!("iter={iter}");
        for (s, n, v) in &cycle.metrics {
            manifest
                .metrics
                .push((format!("{scope}/{s}"), n.clone(), v.clone()));
        }
        let (_, learned, candidate) = cycle.per_k.into_iter().next().expect("one k");
        manifest.push(&scope, "learned_words", learned.word_count());
        let cand_val = val_per(&mut inputs.table, &candidate)?;
        manifest.push(&scope, "val_per", ratio(cand_val));
        let adopted = cand_val < best_val;
        manifest.push(&scope, "adopted", u8::from(adopted));
        iteration_models.push((format!("iter{iter}"), candidate.clone()));
        if adopted {
            best = candidate;
            best_val = cand_val;
        }
        for (stage, rel) in sub.take_artifacts() {
            extra_artifacts.push((format!("iter{iter}/{stage}"), format!("iter{iter}/{rel}")));
        }
        sub.flush_log();
    }

    // test-set evaluation over a word set every model covers
    let baseline_model = G2pModel::load(runner.path("01_g2p_baseline.model"))?;
    let mut models: Vec<(String, &G2pModel)> = vec![("baseline".to_string(), &baseline_model)];
    for (name, model) in &iteration_models {
        models.push((name.clone(), model));
    }
    let evals = eval_models_on_common(
        &mut inputs.table,
        runner,
        &models,
        &tag,
        &inputs.test,
        cfg.beam,
    )?;
    manifest.push("baseline", "test_per", ratio(evals[0].1));
    manifest.push("baseline", "test_wer", ratio(evals[0].2));
    let mut previous = evals[0].1;
    for (i, (_, per, wer)) in evals.iter().enumerate().skip(1) {
        let scope = format!("iter={i}");
        manifest.push(&scope, "test_per", ratio(*per));
        manifest.push(&scope, "test_wer", ratio(*wer));
        let rel = if previous > 0.0 {
            (previous - per) / previous
        } else {
            0.0
        };
        manifest.push(&scope, "rel_reduction", ratio(rel));
        previous = *per;
    }
    Ok(extra_artifacts)
}

/// One full pipeline per seed size, nested seeds, shared held-out test
/// set (the complement of the largest seed).
pub fn run_seed_sweep(cfg: &PipelineConfig) -> Result<RunManifest> {
    if cfg.seed_sizes.is_empty() {
        return Err(Error::InvalidArgument(
            "run.seed_sizes must be set for a seed sweep".into(),
        ));
    }
    let (runner, config_hash, input_hash, done) = open_run_dir(cfg)?;
    if let Some(manifest) = done {
        return Ok(manifest);
    }
    let mut manifest = RunManifest {
        config_hash,
        input_hash,
        ..RunManifest::default()
    };
    match run_seed_sweep_inner(cfg, &runner, &mut manifest) {
        Ok(mut artifacts) => {
            let mut all = runner.take_artifacts();
            all.append(&mut artifacts);
            manifest.artifacts = all;
            manifest.write(runner.path("manifest.tsv"))?;
            runner.flush_log();
            Ok(manifest)
        }
        Err(e) => {
            manifest.artifacts = runner.take_artifacts();
            persist_failure(&runner.dir, &manifest, &e);
            runner.flush_log();
            Err(e)
        }
    }
}

fn run_seed_sweep_inner(
    cfg: &PipelineConfig,
    runner: &StageRunner,
    manifest: &mut RunManifest,
) -> Result<Vec<(String, String)>> {
    let mut table = SymbolTable::new();
    let gold = read_lexicon(&mut table, &cfg.gold_lexicon)?;
    let corpus = read_corpus(&mut table, &cfg.corpus)?;
    let (seeds, test) = split_seed(&gold, &corpus, &cfg.seed_sizes)?;
    let test_path = runner.path("sweep_test.lex");
    write_lexicon(&test, &table, &test_path)?;
    runner
        .artifacts
        .borrow_mut()
        .push(("sweep_test".to_string(), "sweep_test.lex".to_string()));
    manifest.push("eval", "test_words", test.word_count());

    let mut extra_artifacts = Vec::new();
    let k0 = cfg.k_list[0];
    for (size, seed_lex) in cfg.seed_sizes.iter().zip(&seeds) {
        let rel = format!("sweep_seed_{size}.lex");
        let seed_path = runner.path(&rel);
        write_lexicon(seed_lex, &table, &seed_path)?;
        runner
            .artifacts
            .borrow_mut()
            .push((format!("sweep_seed_{size}"), rel));
        let mut sub_cfg = cfg.clone();
        sub_cfg.seed_lexicon = seed_path;
        sub_cfg.test_lexicon = Some(test_path.clone());
        sub_cfg.run_dir = runner.path(&format!("size{size}"));
        sub_cfg.seed_sizes = Vec::new();
        sub_cfg.iterations = 1;
        let sub_manifest = run_pipeline(&sub_cfg).map_err(|e| e.in_stage(&format!("size{size}")))?;
        let scope = format!("size={size}");
        let baseline_per = sub_manifest
            .metric_f64("baseline", "test_per")
            .unwrap_or(f64::NAN);
        let retrained_per = sub_manifest
            .metric_f64(&format!("k={k0}"), "retrained_test_per")
            .unwrap_or(f64::NAN);
        manifest.push(&scope, "baseline_per", ratio(baseline_per));
        manifest.push(&scope, "retrained_per", ratio(retrained_per));
        manifest.push(&scope, "improvement", ratio(baseline_per - retrained_per));
        extra_artifacts.push((
            format!("size{size}_manifest"),
            format!("size{size}/manifest.tsv"),
        ));
    }
    Ok(extra_artifacts)
}

/// Aligned human-readable table of the per-k dictionary metrics.
pub fn render_k_table(manifest: &RunManifest) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{:>4} {:>12} {:>12} {:>10} {:>8} {:>8} {:>8}\n",
        "k", "PER Learned", "PER G2P", "Num Words", "Better", "Worse", "Same"
    ));
    let mut ks: Vec<u64> = manifest
        .metrics
        .iter()
        .filter_map(|(s, _, _)| s.strip_prefix("k=").and_then(|k| k.parse().ok()))
        .collect();
    ks.sort_unstable();
    ks.dedup();
    for k in ks {
        let scope = format!("k={k}");
        let pct = |name: &str| {
            manifest
                .metric_f64(&scope, name)
                .map(|v| format!("{:.2}%", v * 100.0))
                .unwrap_or_else(|| "-".to_string())
        };
        let count = |name: &str| {
            manifest
                .metric(&scope, name)
                .unwrap_or("-")
                .to_string()
        };
        out.push_str(&format!(
            "{:>4} {:>12} {:>12} {:>10} {:>8} {:>8} {:>8}\n",
            k,
            pct("learned_per"),
            pct("g2p_equiv_per"),
            count("learned_words"),
            count("better"),
            count("worse"),
            count("same"),
        ));
    }
    out
}

/// Aligned human-readable table of baseline and retrained test error
/// rates per k.
pub fn render_retrain_table(manifest: &RunManifest) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{:<10} {:>4} {:>8} {:>8} {:>16}\n",
        "System", "k", "PER", "WER", "Rel. Reduction"
    ));
    let pct = |scope: &str, name: &str| {
        manifest
            .metric_f64(scope, name)
            .map(|v| format!("{:.2}%", v * 100.0))
            .unwrap_or_else(|| "-".to_string())
    };
    out.push_str(&format!(
        "{:<10} {:>4} {:>8} {:>8} {:>16}\n",
        "Baseline",
        "-",
        pct("baseline", "test_per"),
        pct("baseline", "test_wer"),
        "-"
    ));
    let mut ks: Vec<u64> = manifest
        .metrics
        .iter()
        .filter_map(|(s, _, _)| s.strip_prefix("k=").and_then(|k| k.parse().ok()))
        .collect();
    ks.sort_unstable();
    ks.dedup();
    for k in ks {
        let scope = format!("k={k}");
        if manifest.metric(&scope, "retrained_test_per").is_none() {
            continue;
        }
        let rel = manifest
            .metric_f64(&scope, "rel_reduction")
            .map(|v| format!("{:.2}%", -v * 100.0))
            .unwrap_or_else(|| "-".to_string());
        out.push_str(&format!(
            "{:<10} {:>4} {:>8} {:>8} {:>16}\n",
            "Learned",
            k,
            pct(&scope, "retrained_test_per"),
            pct(&scope, "retrained_test_wer"),
            rel,
        ));
    }
    out
}

/// Aligned per-iteration test PER table.
pub fn render_iteration_table(manifest: &RunManifest) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{:<10} {:>8} {:>8} {:>12} {:>8}\n",
        "System", "PER", "WER", "Rel. Red.", "Adopted"
    ));
    let pct = |scope: &str, name: &str| {
        manifest
            .metric_f64(scope, name)
            .map(|v| format!("{:.2}%", v * 100.0))
            .unwrap_or_else(|| "-".to_string())
    };
    out.push_str(&format!(
        "{:<10} {:>8} {:>8} {:>12} {:>8}\n",
        "Baseline",
        pct("baseline", "test_per"),
        pct("baseline", "test_wer"),
        "-",
        "-"
    ));
    for i in 1.. {
        let scope = format!("iter={i}");
        if manifest.metric(&scope, "test_per").is_none() {
            break;
        }
        let rel = manifest
            .metric_f64(&scope, "rel_reduction")
            .map(|v| format!("{:.2}%", -v * 100.0))
            .unwrap_or_else(|| "-".to_string());
        out.push_str(&format!(
            "{:<10} {:>8} {:>8} {:>12} {:>8}\n",
            format!("Iter {i}"),
            pct(&scope, "test_per"),
            pct(&scope, "test_wer"),
            rel,
            manifest.metric(&scope, "adopted").unwrap_or("-"),
        ));
    }
    out
}

/// Aligned per-seed-size improvement table.
pub fn render_sweep_table(manifest: &RunManifest) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{:>10} {:>14} {:>14} {:>14}\n",
        "Seed Size", "Baseline PER", "Learned PER", "Improvement"
    ));
    let mut sizes: Vec<usize> = manifest
        .metrics
        .iter()
        .filter_map(|(s, _, _)| s.strip_prefix("size=").and_then(|v| v.parse().ok()))
        .collect();
    sizes.sort_unstable();
    sizes.dedup();
    for size in sizes {
        let scope = format!("size={size}");
        let pct = |name: &str| {
            manifest
                .metric_f64(&scope, name)
                .map(|v| format!("{:.2}%", v * 100.0))
                .unwrap_or_else(|| "-".to_string())
        };
        out.push_str(&format!(
            "{:>10} {:>14} {:>14} {:>14}\n",
            size,
            pct("baseline_per"),
            pct("retrained_per"),
            pct("improvement"),
        ));
    }
    out
}
