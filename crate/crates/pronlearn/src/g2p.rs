//! Joint-sequence grapheme-to-phoneme model.
//!
//! A word and its pronunciation are decomposed into *graphones*: paired
//! chunks of 1-2 graphemes and 0-2 phonemes. Training runs EM over all
//! legal chunkings of each entry to estimate chunk probabilities, takes the
//! Viterbi chunking of every entry, and builds a Witten-Bell smoothed
//! n-gram over the resulting graphone sequences. Prediction is a beam
//! search over segmentations of the input word scored by that n-gram.
//!
//! Words carry a language tag, realized as a pseudo-graphone emitted
//! before the word's chunks, so one model can pool data from several
//! languages. "Fine-tuning" on a target language is count weighting:
//! target entries enter training with weight `lambda`.
//!
//! Legal chunk shapes are `(|graphemes|, |phonemes|)` in
//! {(1,0), (1,1), (1,2), (2,1)}: silent letters, one-to-one links,
//! one-to-two expansions, and digraphs. An entry is alignable iff
//! `|phonemes| <= 2 * |graphemes|`.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::lexicon::{Lexicon, LexiconEntry, Pronunciation, Provenance, Word};
use crate::ngram::{HistCell, WittenBellModel, BOS};
use crate::symbol::SymbolTable;

const CHUNK_SHAPES: [(usize, usize); 4] = [(1, 0), (1, 1), (1, 2), (2, 1)];

/// Relative starting mass of a chunk by shape: 1-1 links first, digraphs
/// and expansions next, silent letters last.
pub fn init_weight(g: &Graphone) -> f64 {
    match &g.input {
        GraphoneInput::Tag(_) => 0.0,
        GraphoneInput::Chunk(texts) => match (texts.len(), g.output.len()) {
            (1, 1) => 1.0,
            (1, 0) => 0.25,
            _ => 0.5,
        },
    }
}

/// One training example: a tagged word/pronunciation pair with a count
/// weight.
#[derive(Debug, Clone)]
pub struct TaggedEntry {
    pub tag: String,
    pub word: Word,
    pub pron: Pronunciation,
    pub weight: f64,
}

impl TaggedEntry {
    pub fn new(tag: impl Into<String>, word: Word, pron: Pronunciation) -> Self {
        TaggedEntry {
            tag: tag.into(),
            word,
            pron,
            weight: 1.0,
        }
    }
}

/// Build tagged entries (weight 1) from every `(word, pronunciation)` pair
/// in a lexicon.
pub fn entries_from_lexicon(
    table: &mut SymbolTable,
    lex: &Lexicon,
    tag: &str,
) -> Result<Vec<TaggedEntry>> {
    let mut out = Vec::with_capacity(lex.word_count());
    let words: Vec<(String, Pronunciation)> = lex
        .iter()
        .map(|(w, e)| (w.to_string(), e.pron.clone()))
        .collect();
    for (surface, pron) in words {
        let word = Word::from_surface(table, &surface)?;
        out.push(TaggedEntry::new(tag, word, pron));
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct TrainConfig {
    /// Graphone n-gram order, in `[1, 5]`.
    pub order: usize,
    /// EM iteration cap for chunk alignment.
    pub em_iters: usize,
    /// Stop when the log-likelihood gain drops below `em_tol * n_entries`.
    pub em_tol: f64,
    /// Recorded in the model; training itself is deterministic.
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            order: 3,
            em_iters: 10,
            em_tol: 1e-4,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum GraphoneInput {
    /// Language-tag pseudo-grapheme; always maps to the empty phoneme
    /// chunk.
    Tag(String),
    /// 1-2 grapheme texts.
    Chunk(Vec<String>),
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Graphone {
    pub input: GraphoneInput,
    pub output: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct G2pModel {
    order: usize,
    graphones: Vec<Graphone>,
    /// EM chunk probabilities aligned with `graphones`; tag graphones hold
    /// 0 (they take no part in alignment).
    chunk_probs: Vec<f64>,
    ngram: WittenBellModel,
    tags: BTreeMap<String, u32>,
    grapheme_set: BTreeSet<String>,
    /// Chunk g-texts -> graphone ids with nonzero n-gram evidence, the
    /// proposal set for prediction.
    proposals: HashMap<Vec<String>, Vec<u32>>,
    languages: Vec<String>,
    lambda: Option<f64>,
    seed: u64,
    /// Alignment-EM log-likelihood per iteration (training diagnostic,
    /// not serialized).
    em_trace: Vec<f64>,
}

/// A per-entry alignment lattice: cells `(i, j)` index grapheme/phoneme
/// prefixes, arcs are legal chunks on some full path.
struct EntryLattice {
    cells: usize,
    arcs: Vec<(u32, u32, u32)>, // (from cell, to cell, graphone id)
    tag_id: u32,
    weight: f64,
}

fn reachable(g: usize, p: usize) -> (Vec<bool>, Vec<bool>) {
    let width = p + 1;
    let cells = (g + 1) * width;
    let mut fwd = vec![false; cells];
    let mut bwd = vec![false; cells];
    fwd[0] = true;
    for i in 0..=g {
        for j in 0..=p {
            if !fwd[i * width + j] {
                continue;
            }
            for (dg, dp) in CHUNK_SHAPES {
                if i + dg <= g && j + dp <= p {
                    fwd[(i + dg) * width + (j + dp)] = true;
                }
            }
        }
    }
    bwd[cells - 1] = true;
    for i in (0..=g).rev() {
        for j in (0..=p).rev() {
            if !bwd[i * width + j] {
                continue;
            }
            for (dg, dp) in CHUNK_SHAPES {
                if i >= dg && j >= dp {
                    bwd[(i - dg) * width + (j - dp)] = true;
                }
            }
        }
    }
    (fwd, bwd)
}

struct PreparedEntry {
    tag: String,
    graphemes: Vec<String>,
    phonemes: Vec<String>,
    weight: f64,
}

fn prepare(table: &SymbolTable, data: &[TaggedEntry]) -> Result<Vec<PreparedEntry>> {
    let mut unalignable = Vec::new();
    let mut out = Vec::with_capacity(data.len());
    for e in data {
        if e.pron.is_empty() {
            return Err(Error::InvalidArgument(format!(
                "entry {:?} has an empty pronunciation",
                e.word.surface()
            )));
        }
        if e.weight <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "entry {:?} has non-positive weight",
                e.word.surface()
            )));
        }
        if e.pron.len() > 2 * e.word.len() {
            unalignable.push(e.word.surface().to_string());
            continue;
        }
        out.push(PreparedEntry {
            tag: e.tag.clone(),
            graphemes: e.word.graphemes().iter().map(|&s| table.text(s).to_string()).collect(),
            phonemes: e.pron.iter().map(|&s| table.text(s).to_string()).collect(),
            weight: e.weight,
        });
    }
    if !unalignable.is_empty() {
        return Err(Error::UnalignableEntries(unalignable));
    }
    Ok(out)
}

/// Train a graphone model. Deterministic given the data order and config.
pub fn train_g2p(table: &SymbolTable, data: &[TaggedEntry], cfg: &TrainConfig) -> Result<G2pModel> {
    if data.is_empty() {
        return Err(Error::EmptyInput("no G2P training entries"));
    }
    if !(1..=5).contains(&cfg.order) {
        return Err(Error::InvalidArgument(format!(
            "graphone n-gram order {} outside [1, 5]",
            cfg.order
        )));
    }
    let entries = prepare(table, data)?;

    // Collect the chunk inventory: every (g, p) chunk on a complete path
    // of some entry. BTreeSet order doubles as the canonical id order.
    let mut chunk_set: BTreeSet<(Vec<String>, Vec<String>)> = BTreeSet::new();
    let mut tag_set: BTreeSet<String> = BTreeSet::new();
    for e in &entries {
        tag_set.insert(e.tag.clone());
        let (g, p) = (e.graphemes.len(), e.phonemes.len());
        let width = p + 1;
        let (fwd, bwd) = reachable(g, p);
        for i in 0..=g {
            for j in 0..=p {
                if !fwd[i * width + j] {
                    continue;
                }
                for (dg, dp) in CHUNK_SHAPES {
                    if i + dg <= g && j + dp <= p && bwd[(i + dg) * width + (j + dp)] {
                        chunk_set.insert((
                            e.graphemes[i..i + dg].to_vec(),
                            e.phonemes[j..j + dp].to_vec(),
                        ));
                    }
                }
            }
        }
    }
    let mut graphones: Vec<Graphone> = tag_set
        .iter()
        .map(|t| Graphone {
            input: GraphoneInput::Tag(t.clone()),
            output: Vec::new(),
        })
        .collect();
    graphones.extend(chunk_set.iter().map(|(g, p)| Graphone {
        input: GraphoneInput::Chunk(g.clone()),
        output: p.clone(),
    }));
    let n_tags = tag_set.len();
    let chunk_id: HashMap<(Vec<String>, Vec<String>), u32> = chunk_set
        .iter()
        .enumerate()
        .map(|(i, c)| (c.clone(), (n_tags + i) as u32))
        .collect();
    let tag_id: BTreeMap<String, u32> = tag_set
        .iter()
        .enumerate()
        .map(|(i, t)| (t.clone(), i as u32))
        .collect();

    // Per-entry lattices with graphone ids.
    let lattices: Vec<EntryLattice> = entries
        .iter()
        .map(|e| {
            let (g, p) = (e.graphemes.len(), e.phonemes.len());
            let width = p + 1;
            let (fwd, bwd) = reachable(g, p);
            let mut arcs = Vec::new();
            for i in 0..=g {
                for j in 0..=p {
                    if !fwd[i * width + j] {
                        continue;
                    }
                    for (dg, dp) in CHUNK_SHAPES {
                        if i + dg <= g && j + dp <= p && bwd[(i + dg) * width + (j + dp)] {
                            let key = (
                                e.graphemes[i..i + dg].to_vec(),
                                e.phonemes[j..j + dp].to_vec(),
                            );
                            arcs.push((
                                (i * width + j) as u32,
                                ((i + dg) * width + (j + dp)) as u32,
                                chunk_id[&key],
                            ));
                        }
                    }
                }
            }
            arcs.sort();
            EntryLattice {
                cells: (g + 1) * width,
                arcs,
                tag_id: tag_id[&e.tag],
                weight: e.weight,
            }
        })
        .collect();

    // EM over chunk probabilities. Initialization is length-balanced
    // rather than flat: one-to-one chunks start ahead of expansions and
    // silences, which steers EM away from the degenerate all-silent
    // optima that flat starts admit on symmetric data.
    let n_graphones = graphones.len();
    let mut q = vec![0.0; n_graphones];
    let mut init_total = 0.0;
    for (v, g) in q.iter_mut().zip(&graphones).skip(n_tags) {
        *v = init_weight(g);
        init_total += *v;
    }
    for v in q.iter_mut().skip(n_tags) {
        *v /= init_total;
    }
    let mut prev_ll = f64::NEG_INFINITY;
    let mut em_trace = Vec::new();
    for _ in 0..cfg.em_iters {
        let mut counts = vec![0.0; n_graphones];
        let mut loglik = 0.0;
        for lat in &lattices {
            let mut alpha = vec![0.0; lat.cells];
            alpha[0] = 1.0;
            for &(from, to, c) in &lat.arcs {
                alpha[to as usize] += alpha[from as usize] * q[c as usize];
            }
            let pe = alpha[lat.cells - 1];
            debug_assert!(pe > 0.0);
            let mut beta = vec![0.0; lat.cells];
            beta[lat.cells - 1] = 1.0;
            for &(from, to, c) in lat.arcs.iter().rev() {
                beta[from as usize] += q[c as usize] * beta[to as usize];
            }
            loglik += lat.weight * pe.ln();
            for &(from, to, c) in &lat.arcs {
                counts[c as usize] +=
                    lat.weight * alpha[from as usize] * q[c as usize] * beta[to as usize] / pe;
            }
        }
        let total: f64 = counts.iter().skip(n_tags).sum();
        if total > 0.0 {
            for (v, &c) in q.iter_mut().zip(counts.iter()).skip(n_tags) {
                *v = c / total;
            }
        }
        em_trace.push(loglik);
        let delta = loglik - prev_ll;
        prev_ll = loglik;
        if delta.abs() < cfg.em_tol * entries.len() as f64 {
            break;
        }
    }

    // Viterbi chunking of each entry under the final chunk probabilities,
    // then the graphone n-gram from those sequences.
    let ln_q: Vec<f64> = q.iter().map(|&v| v.ln()).collect();
    let eos = n_graphones as u32;
    let mut ngram = WittenBellModel::new(cfg.order, n_graphones + 1);
    for lat in &lattices {
        let mut best = vec![f64::NEG_INFINITY; lat.cells];
        let mut back: Vec<Option<(u32, u32)>> = vec![None; lat.cells];
        best[0] = 0.0;
        for &(from, to, c) in &lat.arcs {
            if best[from as usize] == f64::NEG_INFINITY {
                continue;
            }
            let cand = best[from as usize] + ln_q[c as usize];
            let t = to as usize;
            let replace = cand > best[t]
                || (cand == best[t] && back[t].is_some_and(|(_, pc)| c < pc));
            if replace {
                best[t] = cand;
                back[t] = Some((from, c));
            }
        }
        let mut tokens = vec![lat.tag_id];
        let mut rev = Vec::new();
        let mut cell = lat.cells - 1;
        while cell != 0 {
            let (from, c) = back[cell].expect("complete path exists");
            rev.push(c);
            cell = from as usize;
        }
        rev.reverse();
        tokens.extend(rev);
        tokens.push(eos);
        ngram.add_sequence(&tokens, lat.weight);
    }

    let mut model = G2pModel {
        order: cfg.order,
        graphones,
        chunk_probs: q,
        ngram,
        tags: tag_id,
        grapheme_set: BTreeSet::new(),
        proposals: HashMap::new(),
        languages: tag_set.into_iter().collect(),
        lambda: None,
        seed: cfg.seed,
        em_trace,
    };
    model.rebuild_indexes();
    Ok(model)
}

/// Weighted retraining: pooled data plus target entries scaled by
/// `lambda`. With `lambda = 1` this is plain pooling.
pub fn fine_tune(
    table: &SymbolTable,
    model_data: &[TaggedEntry],
    target: &[TaggedEntry],
    lambda: f64,
    cfg: &TrainConfig,
) -> Result<G2pModel> {
    if target.is_empty() {
        return Err(Error::EmptyInput("no target entries for fine-tuning"));
    }
    if lambda < 1.0 {
        return Err(Error::InvalidArgument(format!("lambda {lambda} must be >= 1")));
    }
    let mut data = model_data.to_vec();
    data.extend(target.iter().map(|e| {
        let mut e = e.clone();
        e.weight *= lambda;
        e
    }));
    let mut model = train_g2p(table, &data, cfg)?;
    model.lambda = Some(lambda);
    Ok(model)
}

/// A word set to skip during multilingual pooling, mirroring the idea
/// that the pooled model should know nothing about target-language words.
pub fn exclude_words(entries: Vec<TaggedEntry>, exclude: &BTreeSet<String>) -> Vec<TaggedEntry> {
    entries
        .into_iter()
        .filter(|e| !exclude.contains(e.word.surface()))
        .collect()
}

impl G2pModel {
    fn rebuild_indexes(&mut self) {
        self.grapheme_set.clear();
        self.proposals.clear();
        // active = nonzero unigram evidence in the n-gram
        let mut active = vec![false; self.graphones.len()];
        for (m, hist, cell) in self.ngram.iter_cells() {
            if m == 0 && hist.is_empty() {
                for &tok in cell.conts.keys() {
                    if (tok as usize) < self.graphones.len() {
                        active[tok as usize] = true;
                    }
                }
            }
        }
        for (id, g) in self.graphones.iter().enumerate() {
            if let GraphoneInput::Chunk(texts) = &g.input {
                for t in texts {
                    self.grapheme_set.insert(t.clone());
                }
                if active[id] {
                    self.proposals
                        .entry(texts.clone())
                        .or_default()
                        .push(id as u32);
                }
            }
        }
        for ids in self.proposals.values_mut() {
            ids.sort();
        }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn graphones(&self) -> &[Graphone] {
        &self.graphones
    }

    pub fn chunk_probs(&self) -> &[f64] {
        &self.chunk_probs
    }

    /// Log-likelihood after each alignment-EM iteration.
    pub fn em_loglik_trace(&self) -> &[f64] {
        &self.em_trace
    }

    pub fn languages(&self) -> &[String] {
        &self.languages
    }

    pub fn grapheme_set(&self) -> &BTreeSet<String> {
        &self.grapheme_set
    }

    /// Proposal graphone ids for a chunk of grapheme texts.
    pub fn candidates(&self, chunk: &[&str]) -> &[u32] {
        let key: Vec<String> = chunk.iter().map(|s| s.to_string()).collect();
        self.proposals.get(&key).map(|v| v.as_slice()).unwrap_or(&[])
    }

    fn shift(&self, hist: &[u32], tok: u32) -> Vec<u32> {
        if hist.is_empty() {
            return Vec::new();
        }
        let mut next = hist[1..].to_vec();
        next.push(tok);
        next
    }

    fn initial_state(&self, tag: &str) -> Result<(Vec<u32>, f64)> {
        let &tag_tok = self
            .tags
            .get(tag)
            .ok_or_else(|| Error::UnknownTag(tag.to_string()))?;
        let ctx = self.order - 1;
        let hist = vec![BOS; ctx];
        let score = self.ngram.prob(&hist, tag_tok).ln();
        Ok((self.shift(&hist, tag_tok), score))
    }

    /// Log probability of a full graphone sequence for a tagged word,
    /// including the tag event and the end event.
    pub fn sequence_logprob(&self, tag: &str, tokens: &[u32]) -> Result<f64> {
        let (mut hist, mut score) = self.initial_state(tag)?;
        for &tok in tokens {
            score += self.ngram.prob(&hist, tok).ln();
            hist = self.shift(&hist, tok);
        }
        score += self.ngram.prob(&hist, self.eos()).ln();
        Ok(score)
    }

    fn eos(&self) -> u32 {
        self.graphones.len() as u32
    }

    /// Best-scoring graphone segmentation of a tagged word, as ids.
    pub fn predict_tokens(&self, tag: &str, graphemes: &[&str], beam: usize) -> Result<Vec<u32>> {
        if beam < 1 {
            return Err(Error::InvalidArgument("beam must be >= 1".into()));
        }
        for g in graphemes {
            if !self.grapheme_set.contains(*g) {
                return Err(Error::OovGrapheme {
                    grapheme: g.to_string(),
                    word: graphemes.concat(),
                });
            }
        }
        #[derive(Clone)]
        struct Item {
            hist: Vec<u32>,
            score: f64,
            seq: Vec<u32>,
        }
        let (hist0, score0) = self.initial_state(tag)?;
        let g_len = graphemes.len();
        let mut frontier: Vec<Vec<Item>> = vec![Vec::new(); g_len + 1];
        frontier[0].push(Item {
            hist: hist0,
            score: score0,
            seq: Vec::new(),
        });
        let prune = |items: &mut Vec<Item>| {
            // best item per history; ties prefer the lexicographically
            // smaller graphone sequence
            let mut best: HashMap<Vec<u32>, usize> = HashMap::new();
            let mut keep: Vec<Item> = Vec::with_capacity(items.len());
            for item in items.drain(..) {
                match best.get(&item.hist) {
                    Some(&idx) => {
                        let cur = &keep[idx];
                        if item.score > cur.score
                            || (item.score == cur.score && item.seq < cur.seq)
                        {
                            keep[idx] = item;
                        }
                    }
                    None => {
                        best.insert(item.hist.clone(), keep.len());
                        keep.push(item);
                    }
                }
            }
            keep.sort_by(|a, b| {
                b.score
                    .partial_cmp(&a.score)
                    .unwrap()
                    .then_with(|| a.seq.cmp(&b.seq))
            });
            keep.truncate(beam);
            *items = keep;
        };
        for pos in 0..g_len {
            let mut items = std::mem::take(&mut frontier[pos]);
            if items.is_empty() {
                continue;
            }
            prune(&mut items);
            for item in &items {
                for len in 1..=2usize {
                    if pos + len > g_len {
                        break;
                    }
                    let key: Vec<String> =
                        graphemes[pos..pos + len].iter().map(|s| s.to_string()).collect();
                    let Some(cands) = self.proposals.get(&key) else {
                        continue;
                    };
                    for &gid in cands {
                        frontier[pos + len].push(Item {
                            hist: self.shift(&item.hist, gid),
                            score: item.score + self.ngram.prob(&item.hist, gid).ln(),
                            seq: {
                                let mut s = item.seq.clone();
                                s.push(gid);
                                s
                            },
                        });
                    }
                }
            }
        }
        let mut finals = std::mem::take(&mut frontier[g_len]);
        if finals.is_empty() {
            return Err(Error::InvalidArgument(format!(
                "word {:?} has no graphone segmentation under the model inventory",
                graphemes.concat()
            )));
        }
        prune(&mut finals);
        let eos = self.eos();
        let best = finals
            .into_iter()
            .map(|mut item| {
                item.score += self.ngram.prob(&item.hist, eos).ln();
                item
            })
            .max_by(|a, b| {
                a.score
                    .partial_cmp(&b.score)
                    .unwrap()
                    .then_with(|| b.seq.cmp(&a.seq))
            })
            .unwrap();
        Ok(best.seq)
    }

    /// Phoneme texts of the best segmentation.
    pub fn predict_texts(&self, tag: &str, graphemes: &[&str], beam: usize) -> Result<Vec<String>> {
        let tokens = self.predict_tokens(tag, graphemes, beam)?;
        let mut out = Vec::new();
        for tok in tokens {
            out.extend(self.graphones[tok as usize].output.iter().cloned());
        }
        Ok(out)
    }

    /// Predict a pronunciation for a word.
    pub fn predict(
        &self,
        table: &mut SymbolTable,
        tag: &str,
        word: &Word,
        beam: usize,
    ) -> Result<Pronunciation> {
        let graphemes: Vec<&str> = word.graphemes().iter().map(|&g| table.text(g)).collect();
        let owned: Vec<String> = graphemes.iter().map(|s| s.to_string()).collect();
        let texts = self.predict_texts(tag, &owned.iter().map(|s| s.as_str()).collect::<Vec<_>>(), beam)?;
        let mut syms = Vec::with_capacity(texts.len());
        for t in &texts {
            syms.push(table.intern(t)?);
        }
        Ok(Pronunciation(syms))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.format()).map_err(|e| Error::io(path, e))
    }

    pub fn format(&self) -> String {
        let mut out = String::new();
        out.push_str("#g2pmodel v1\n");
        out.push_str(&format!("order\t{}\n", self.order));
        out.push_str(&format!("seed\t{}\n", self.seed));
        match self.lambda {
            Some(l) => out.push_str(&format!("lambda\t{l}\n")),
            None => out.push_str("lambda\t-\n"),
        }
        out.push_str(&format!("languages\t{}\n", self.languages.join(" ")));
        out.push_str(&format!("graphones\t{}\n", self.graphones.len()));
        for g in &self.graphones {
            match &g.input {
                GraphoneInput::Tag(t) => out.push_str(&format!("t\t{t}\n")),
                GraphoneInput::Chunk(texts) => out.push_str(&format!(
                    "g\t{}\t{}\n",
                    texts.join(" "),
                    g.output.join(" ")
                )),
            }
        }
        for (id, p) in self.chunk_probs.iter().enumerate() {
            out.push_str(&format!("c\t{id}\t{p}\n"));
        }
        for (m, hist, cell) in self.ngram.iter_cells() {
            out.push_str(&format!("ngram\t{m}\t{}\t{}", format_ids(hist), cell.total));
            let mut conts: Vec<(&u32, &f64)> = cell.conts.iter().collect();
            conts.sort_by_key(|(id, _)| **id);
            for (id, c) in conts {
                out.push_str(&format!(" {id}:{c}"));
            }
            out.push('\n');
        }
        out
    }

    pub fn load(path: impl AsRef<Path>) -> Result<G2pModel> {
        let path = path.as_ref();
        let data = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut lines = data.lines().enumerate().peekable();
        let bad = |n: usize, msg: &str| Error::parse(path, n + 1, msg);
        match lines.next() {
            Some((_, "#g2pmodel v1")) => {}
            _ => return Err(Error::parse(path, 1, "expected #g2pmodel v1 header")),
        }
        let mut order = None;
        let mut seed = None;
        let mut lambda = None;
        let mut languages = Vec::new();
        let mut n_graphones = None;
        for _ in 0..5 {
            let Some((n, line)) = lines.next() else {
                return Err(Error::parse(path, 0, "truncated header"));
            };
            let (k, v) = line
                .split_once('\t')
                .ok_or_else(|| bad(n, "bad header line"))?;
            match k {
                "order" => order = Some(v.parse::<usize>().map_err(|_| bad(n, "bad order"))?),
                "seed" => seed = Some(v.parse::<u64>().map_err(|_| bad(n, "bad seed"))?),
                "lambda" => {
                    lambda = if v == "-" {
                        None
                    } else {
                        Some(v.parse::<f64>().map_err(|_| bad(n, "bad lambda"))?)
                    }
                }
                "languages" => languages = v.split(' ').map(str::to_string).collect(),
                "graphones" => {
                    n_graphones = Some(v.parse::<usize>().map_err(|_| bad(n, "bad count"))?)
                }
                _ => return Err(bad(n, "unknown header key")),
            }
        }
        let order = order.ok_or_else(|| Error::parse(path, 0, "missing order"))?;
        let n_graphones = n_graphones.ok_or_else(|| Error::parse(path, 0, "missing graphones"))?;
        let mut graphones = Vec::with_capacity(n_graphones);
        let mut tags = BTreeMap::new();
        for _ in 0..n_graphones {
            let Some((n, line)) = lines.next() else {
                return Err(Error::parse(path, 0, "truncated graphone section"));
            };
            let fields: Vec<&str> = line.split('\t').collect();
            match fields.as_slice() {
                ["t", tag] => {
                    tags.insert(tag.to_string(), graphones.len() as u32);
                    graphones.push(Graphone {
                        input: GraphoneInput::Tag(tag.to_string()),
                        output: Vec::new(),
                    });
                }
                ["g", g, p] => {
                    let g_texts: Vec<String> = g.split(' ').map(str::to_string).collect();
                    let p_texts: Vec<String> = if p.is_empty() {
                        Vec::new()
                    } else {
                        p.split(' ').map(str::to_string).collect()
                    };
                    graphones.push(Graphone {
                        input: GraphoneInput::Chunk(g_texts),
                        output: p_texts,
                    });
                }
                _ => return Err(bad(n, "bad graphone line")),
            }
        }
        let mut chunk_probs = vec![0.0; n_graphones];
        let mut ngram = WittenBellModel::new(order, n_graphones + 1);
        for (n, line) in lines {
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            match fields.as_slice() {
                ["c", id, p] => {
                    let id: usize = id.parse().map_err(|_| bad(n, "bad chunk id"))?;
                    chunk_probs[id] = p.parse().map_err(|_| bad(n, "bad chunk prob"))?;
                }
                ["ngram", level, hist, payload] => {
                    let level: usize = level.parse().map_err(|_| bad(n, "bad level"))?;
                    let hist = parse_ids(hist).ok_or_else(|| bad(n, "bad history"))?;
                    let mut parts = payload.split(' ');
                    let total: f64 = parts
                        .next()
                        .unwrap_or("")
                        .parse()
                        .map_err(|_| bad(n, "bad total"))?;
                    let mut cell = HistCell {
                        total,
                        conts: HashMap::new(),
                    };
                    for part in parts {
                        let (id, c) = part.split_once(':').ok_or_else(|| bad(n, "bad cont"))?;
                        cell.conts.insert(
                            id.parse().map_err(|_| bad(n, "bad cont id"))?,
                            c.parse().map_err(|_| bad(n, "bad cont count"))?,
                        );
                    }
                    ngram.insert_cell(level, hist, cell);
                }
                _ => return Err(bad(n, "unexpected line")),
            }
        }
        let mut model = G2pModel {
            order,
            graphones,
            chunk_probs,
            ngram,
            tags,
            grapheme_set: BTreeSet::new(),
            proposals: HashMap::new(),
            languages,
            lambda,
            seed: seed.unwrap_or(0),
            em_trace: Vec::new(),
        };
        model.rebuild_indexes();
        Ok(model)
    }

    #[cfg(test)]
    pub(crate) fn ngram(&self) -> &WittenBellModel {
        &self.ngram
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
        .map(|t| if t == "~" { Some(BOS) } else { t.parse().ok() })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SkippedWord {
    pub word: String,
    pub reason: String,
}

/// Predict pronunciations for a vocabulary. Words the model cannot handle
/// (unknown graphemes, no segmentation, empty output) are collected into
/// the skipped report instead of failing the call.
pub fn apply_g2p(
    model: &G2pModel,
    table: &mut SymbolTable,
    tag: &str,
    vocabulary: &[&Word],
    beam: usize,
) -> (Lexicon, Vec<SkippedWord>) {
    let inputs: Vec<(String, Vec<String>)> = vocabulary
        .iter()
        .map(|w| {
            (
                w.surface().to_string(),
                w.graphemes().iter().map(|&g| table.text(g).to_string()).collect(),
            )
        })
        .collect();
    let predictions: Vec<(String, Result<Vec<String>>)> = inputs
        .par_iter()
        .map(|(surface, graphemes)| {
            let refs: Vec<&str> = graphemes.iter().map(|s| s.as_str()).collect();
            (surface.clone(), model.predict_texts(tag, &refs, beam))
        })
        .collect();
    let mut lex = Lexicon::new();
    let mut skipped = Vec::new();
    for (surface, result) in predictions {
        match result {
            Ok(texts) if texts.is_empty() => skipped.push(SkippedWord {
                word: surface,
                reason: "empty pronunciation".to_string(),
            }),
            Ok(texts) => {
                if lex.contains(&surface) {
                    continue;
                }
                let mut syms = Vec::with_capacity(texts.len());
                for t in &texts {
                    syms.push(table.intern(t).expect("model texts are valid symbols"));
                }
                lex.insert(
                    table,
                    &surface,
                    LexiconEntry {
                        pron: Pronunciation(syms),
                        provenance: Provenance::G2p,
                        count: 0,
                    },
                )
                .expect("no duplicates by construction");
            }
            Err(e) => skipped.push(SkippedWord {
                word: surface,
                reason: e.to_string(),
            }),
        }
    }
    (lex, skipped)
}
