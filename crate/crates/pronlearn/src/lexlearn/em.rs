//! Tied Baum-Welch over sentence lattices.
//!
//! The E-step runs scaled forward-backward per sentence; expected emission
//! counts accumulate into the shared per-grapheme rows (tying) and
//! expected transition counts into the single global (loop, advance,
//! skip) triple. The M-step renormalizes against the emission floor:
//! `p = (1 - n*floor) * count/total + floor`, which keeps every entry at
//! or above the floor while preserving row sums of one. Rows with no
//! evidence are left unchanged. Sentences whose phoneme sequence admits
//! no path (too few phonemes for the topology) are skipped and reported.
//!
//! Sentences are processed in fixed-size chunks in parallel; chunk
//! results merge in index order, so counts are bit-identical regardless
//! of thread count.

use rayon::prelude::*;

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::symbol::SymbolTable;

use super::lattice::{compile, Lattice};
use super::{EmissionTable, Topology, EMISSION_FLOOR};

const CHUNK: usize = 256;

#[derive(Debug, Clone, PartialEq)]
pub struct EmTrainReport {
    pub iterations: usize,
    pub loglik_trace: Vec<f64>,
    pub skipped_sentences: Vec<usize>,
}

/// One sentence prepared for training: per-word emission-row sequences
/// plus the observed phoneme column indices.
pub(super) struct SentenceShape {
    pub rows: Vec<Vec<u32>>,
    pub obs: Vec<u32>,
}

pub(super) fn prepare_sentences(
    table: &SymbolTable,
    corpus: &Corpus,
    emissions: &EmissionTable,
) -> Result<Vec<SentenceShape>> {
    let mut shapes = Vec::with_capacity(corpus.sentences.len());
    for (index, sentence) in corpus.sentences.iter().enumerate() {
        let Some(phones) = &sentence.phones else {
            return Err(Error::MissingPhones { index });
        };
        let mut rows = Vec::with_capacity(sentence.words.len());
        for word in &sentence.words {
            let mut word_rows = Vec::with_capacity(word.len());
            for &g in word.graphemes() {
                let r = emissions.grapheme_row(g).ok_or_else(|| {
                    Error::InvalidArgument(format!(
                        "sentence {index}: grapheme {:?} not in the emission table",
                        table.text(g)
                    ))
                })?;
                word_rows.push(r as u32);
            }
            rows.push(word_rows);
        }
        let mut obs = Vec::with_capacity(phones.len());
        for &p in phones.iter() {
            let c = emissions.phoneme_column(p).ok_or_else(|| {
                Error::InvalidArgument(format!(
                    "sentence {index}: phoneme {:?} not in the emission table",
                    table.text(p)
                ))
            })?;
            obs.push(c as u32);
        }
        shapes.push(SentenceShape { rows, obs });
    }
    Ok(shapes)
}

struct ChunkAcc {
    emis: Vec<f64>, // n_rows x n_phonemes, row-major
    trans: [f64; 3],
    loglik: f64,
    skipped: Vec<usize>,
}

/// Forward-backward for one sentence. Returns the sentence log-likelihood
/// and adds expected counts, or `None` when no path explains the phones.
fn estep_sentence(
    lat: &Lattice,
    emissions: &EmissionTable,
    obs: &[u32],
    emis_counts: &mut [f64],
    trans_counts: &mut [f64; 3],
    n_phonemes: usize,
) -> Option<f64> {
    let t_len = obs.len();
    if t_len == 0 {
        return if lat.init_end > 0.0 {
            Some(lat.init_end.ln())
        } else {
            None
        };
    }
    let s = lat.n_states;
    let emis = |j: usize, o: u32| emissions.row_by_index(lat.row_of[j] as usize)[o as usize];

    let mut alpha = vec![0.0; t_len * s];
    let mut scales = vec![0.0; t_len];
    for &(j, p) in &lat.init {
        alpha[j as usize] = p * emis(j as usize, obs[0]);
    }
    let c0: f64 = alpha[..s].iter().sum();
    if c0 <= 0.0 {
        return None;
    }
    scales[0] = c0;
    for v in &mut alpha[..s] {
        *v /= c0;
    }
    for t in 1..t_len {
        let (prev_part, cur_part) = alpha.split_at_mut(t * s);
        let prev = &prev_part[(t - 1) * s..];
        let cur = &mut cur_part[..s];
        for e in &lat.edges {
            cur[e.tgt as usize] += prev[e.src as usize] * e.prob;
        }
        for (j, v) in cur.iter_mut().enumerate() {
            *v *= emis(j, obs[t]);
        }
        let ct: f64 = cur.iter().sum();
        if ct <= 0.0 {
            return None;
        }
        scales[t] = ct;
        for v in cur.iter_mut() {
            *v /= ct;
        }
    }
    let alpha_last = &alpha[(t_len - 1) * s..];
    let p_end: f64 = (0..s).map(|j| alpha_last[j] * lat.end_total(j)).sum();
    if p_end <= 0.0 {
        return None;
    }
    let loglik: f64 = scales.iter().map(|c| c.ln()).sum::<f64>() + p_end.ln();

    // end-of-sentence transition counts and final-time emission counts
    let mut beta_next = vec![0.0; s];
    for j in 0..s {
        beta_next[j] = lat.end_total(j);
        for (dst, &mass) in trans_counts.iter_mut().zip(&lat.end_kind[j]) {
            *dst += alpha_last[j] * mass / p_end;
        }
        let gamma = alpha_last[j] * beta_next[j] / p_end;
        emis_counts[lat.row_of[j] as usize * n_phonemes + obs[t_len - 1] as usize] += gamma;
    }
    let mut beta_t = vec![0.0; s];
    for t in (0..t_len - 1).rev() {
        let alpha_t = &alpha[t * s..(t + 1) * s];
        let c_next = scales[t + 1];
        beta_t.iter_mut().for_each(|v| *v = 0.0);
        for e in &lat.edges {
            let contrib = e.prob * emis(e.tgt as usize, obs[t + 1]) * beta_next[e.tgt as usize];
            beta_t[e.src as usize] += contrib;
            trans_counts[e.kind as usize] +=
                alpha_t[e.src as usize] * contrib / (c_next * p_end);
        }
        for v in beta_t.iter_mut() {
            *v /= c_next;
        }
        for j in 0..s {
            let gamma = alpha_t[j] * beta_t[j] / p_end;
            emis_counts[lat.row_of[j] as usize * n_phonemes + obs[t] as usize] += gamma;
        }
        std::mem::swap(&mut beta_next, &mut beta_t);
    }
    Some(loglik)
}

/// Train tied emissions and the global transition triple on a decoded
/// corpus. Stops after `max_iters` iterations or when the total
/// log-likelihood gain drops below `tol * n_sentences`.
pub fn em_train(
    table: &SymbolTable,
    corpus: &Corpus,
    emissions: EmissionTable,
    topo: Topology,
    max_iters: usize,
    tol: f64,
) -> Result<(EmissionTable, Topology, EmTrainReport)> {
    topo.validate()?;
    let shapes = prepare_sentences(table, corpus, &emissions)?;
    let mut emissions = emissions;
    let mut topo = topo;
    let n_phonemes = emissions.phonemes().len();
    let n_rows = emissions.n_rows();
    let mut report = EmTrainReport {
        iterations: 0,
        loglik_trace: Vec::new(),
        skipped_sentences: Vec::new(),
    };
    let mut prev_ll = f64::NEG_INFINITY;
    for _ in 0..max_iters {
        let chunks: Vec<(usize, &[SentenceShape])> = shapes
            .chunks(CHUNK)
            .enumerate()
            .map(|(i, c)| (i * CHUNK, c))
            .collect();
        let accs: Vec<ChunkAcc> = chunks
            .par_iter()
            .map(|(base, chunk)| {
                let mut acc = ChunkAcc {
                    emis: vec![0.0; n_rows * n_phonemes],
                    trans: [0.0; 3],
                    loglik: 0.0,
                    skipped: Vec::new(),
                };
                for (offset, shape) in chunk.iter().enumerate() {
                    let lat = compile(&shape.rows, &topo);
                    match estep_sentence(
                        &lat,
                        &emissions,
                        &shape.obs,
                        &mut acc.emis,
                        &mut acc.trans,
                        n_phonemes,
                    ) {
                        Some(ll) => acc.loglik += ll,
                        None => acc.skipped.push(base + offset),
                    }
                }
                acc
            })
            .collect();
        let mut emis_counts = vec![0.0; n_rows * n_phonemes];
        let mut trans_counts = [0.0; 3];
        let mut loglik = 0.0;
        let mut skipped = Vec::new();
        for acc in accs {
            for (dst, src) in emis_counts.iter_mut().zip(&acc.emis) {
                *dst += src;
            }
            for (dst, &src_count) in trans_counts.iter_mut().zip(&acc.trans) {
                *dst += src_count;
            }
            loglik += acc.loglik;
            skipped.extend(acc.skipped);
        }
        // M-step: floor-mixed renormalization
        let mut rows = Vec::with_capacity(n_rows);
        for r in 0..n_rows {
            let counts = &emis_counts[r * n_phonemes..(r + 1) * n_phonemes];
            let total: f64 = counts.iter().sum();
            if total > 0.0 {
                let keep = 1.0 - n_phonemes as f64 * EMISSION_FLOOR;
                rows.push(
                    counts
                        .iter()
                        .map(|&c| keep * c / total + EMISSION_FLOOR)
                        .collect(),
                );
            } else {
                rows.push(emissions.row_by_index(r).to_vec());
            }
        }
        emissions.set_rows(rows);
        let trans_total: f64 = trans_counts.iter().sum();
        if trans_total > 0.0 {
            let keep = 1.0 - 3.0 * EMISSION_FLOOR;
            topo.a_loop = keep * trans_counts[0] / trans_total + EMISSION_FLOOR;
            topo.a_adv = keep * trans_counts[1] / trans_total + EMISSION_FLOOR;
            topo.a_skip = keep * trans_counts[2] / trans_total + EMISSION_FLOOR;
        }
        report.iterations += 1;
        report.loglik_trace.push(loglik);
        report.skipped_sentences = skipped;
        let delta = loglik - prev_ll;
        prev_ll = loglik;
        if delta.abs() < tol * corpus.sentences.len() as f64 {
            break;
        }
    }
    report.skipped_sentences.sort_unstable();
    Ok((emissions, topo, report))
}
