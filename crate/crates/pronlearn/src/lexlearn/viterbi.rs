//! Most-likely-path alignment and span extraction.

use crate::error::{Error, Result};
use crate::lexicon::Word;
use crate::symbol::{Symbol, SymbolTable};

use super::lattice::{compile, kind_priority};
use super::{EmissionTable, Topology};

/// The phoneme range `[start, end)` a word received. Empty ranges mean
/// every state of the word was skipped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WordSpan {
    pub word_index: usize,
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Alignment {
    /// One span per word, in order; concatenated spans cover the phoneme
    /// sequence exactly.
    pub spans: Vec<WordSpan>,
    /// Log probability of the best state path.
    pub score: f64,
    /// Occupied state index per phoneme position.
    pub states: Vec<u32>,
}

/// Align a sentence's phoneme sequence to its words, returning per-word
/// spans. Score ties prefer advance over self-loop over skip transitions,
/// then lower state indices.
pub fn viterbi_align(
    table: &SymbolTable,
    words: &[Word],
    phones: &[Symbol],
    emissions: &EmissionTable,
    topo: &Topology,
) -> Result<Alignment> {
    if words.is_empty() {
        return Err(Error::EmptyInput("sentence with no words"));
    }
    let mut rows = Vec::with_capacity(words.len());
    for word in words {
        let mut word_rows = Vec::with_capacity(word.len());
        for &g in word.graphemes() {
            let r = emissions.grapheme_row(g).ok_or_else(|| {
                Error::InvalidArgument(format!(
                    "grapheme {:?} not in the emission table",
                    table.text(g)
                ))
            })?;
            word_rows.push(r as u32);
        }
        rows.push(word_rows);
    }
    let mut obs = Vec::with_capacity(phones.len());
    for &p in phones {
        let c = emissions.phoneme_column(p).ok_or_else(|| {
            Error::InvalidArgument(format!(
                "phoneme {:?} not in the emission table",
                table.text(p)
            ))
        })?;
        obs.push(c as u32);
    }
    let lat = compile(&rows, topo);
    let t_len = obs.len();
    if t_len == 0 {
        if lat.init_end > 0.0 {
            let spans = (0..words.len())
                .map(|w| WordSpan {
                    word_index: w,
                    start: 0,
                    end: 0,
                })
                .collect();
            return Ok(Alignment {
                spans,
                score: lat.init_end.ln(),
                states: Vec::new(),
            });
        }
        return Err(Error::NoPath);
    }
    let s = lat.n_states;
    let emis_ln = |j: usize, o: u32| {
        emissions.row_by_index(lat.row_of[j] as usize)[o as usize].ln()
    };

    let mut delta = vec![f64::NEG_INFINITY; t_len * s];
    let mut back = vec![u32::MAX; t_len * s];
    for &(j, p) in &lat.init {
        delta[j as usize] = p.ln() + emis_ln(j as usize, obs[0]);
    }
    // per-step tie-break bookkeeping: kind priority of the chosen edge
    let mut chosen_prio = vec![0u8; s];
    for t in 1..t_len {
        let (prev_part, cur_part) = delta.split_at_mut(t * s);
        let prev = &prev_part[(t - 1) * s..];
        let cur = &mut cur_part[..s];
        let back_cur = &mut back[t * s..(t + 1) * s];
        chosen_prio.iter_mut().for_each(|p| *p = 0);
        for e in &lat.merged {
            let src = e.src as usize;
            if prev[src] == f64::NEG_INFINITY {
                continue;
            }
            let cand = prev[src] + e.prob.ln();
            let tgt = e.tgt as usize;
            let prio = kind_priority(e.kind);
            let take = cand > cur[tgt]
                || (cand == cur[tgt]
                    && (prio > chosen_prio[tgt]
                        || (prio == chosen_prio[tgt] && (e.src) < back_cur[tgt])));
            if take {
                cur[tgt] = cand;
                back_cur[tgt] = e.src;
                chosen_prio[tgt] = prio;
            }
        }
        for (j, v) in cur.iter_mut().enumerate() {
            if *v != f64::NEG_INFINITY {
                *v += emis_ln(j, obs[t]);
            }
        }
    }
    let last = &delta[(t_len - 1) * s..];
    let mut best_state = usize::MAX;
    let mut best_score = f64::NEG_INFINITY;
    for (j, &score) in last.iter().enumerate() {
        let end = lat.end_total(j);
        if end <= 0.0 || score == f64::NEG_INFINITY {
            continue;
        }
        let cand = score + end.ln();
        if cand > best_score || (cand == best_score && j < best_state) {
            best_score = cand;
            best_state = j;
        }
    }
    if best_state == usize::MAX {
        return Err(Error::NoPath);
    }
    let mut states = vec![0u32; t_len];
    states[t_len - 1] = best_state as u32;
    for t in (1..t_len).rev() {
        states[t - 1] = back[t * s + states[t] as usize];
    }
    // spans per word from the (non-decreasing) word indices of the path
    let mut spans = Vec::with_capacity(words.len());
    let mut t = 0usize;
    for w in 0..words.len() {
        let start = t;
        while t < t_len && lat.word_of[states[t] as usize] as usize == w {
            t += 1;
        }
        spans.push(WordSpan {
            word_index: w,
            start,
            end: t,
        });
    }
    debug_assert_eq!(t, t_len, "path must consume all phonemes");
    Ok(Alignment {
        spans,
        score: best_score,
        states,
    })
}
