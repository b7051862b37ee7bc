//! Sentence HMM compilation.
//!
//! The sentence model concatenates word HMMs: one state per grapheme,
//! transitions `a_loop` (stay), `a_adv` (next state), `a_skip` (jump two
//! states). Moves that land on or past a word's end resolve through the
//! word boundary: the word's exit mass feeds the next word's entry
//! distribution (`enter_first` on its first state, `enter_second` on its
//! second). For a one-grapheme word, entering "at the second state" skips
//! the word entirely and chains into the following entry, which is how a
//! word can end up with an empty phoneme span. A skip taken from the last
//! state clamps to the word exit.
//!
//! Compilation flattens those boundary chains into *effective edges*
//! between concrete states (plus end-of-sentence mass per state). Each
//! effective edge remembers which base transition produced it so
//! Baum-Welch can attribute expected counts to the tied
//! (loop, advance, skip) triple; the fixed entry-chain factors are folded
//! into the edge probability.

use super::Topology;

pub const KIND_LOOP: u8 = 0;
pub const KIND_ADV: u8 = 1;
pub const KIND_SKIP: u8 = 2;

/// Tie-break priority: advance > self-loop > skip.
pub fn kind_priority(kind: u8) -> u8 {
    match kind {
        KIND_ADV => 2,
        KIND_LOOP => 1,
        _ => 0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub src: u32,
    pub tgt: u32,
    pub prob: f64,
    pub kind: u8,
}

/// A compiled sentence lattice under one topology setting.
#[derive(Debug, Clone)]
pub struct Lattice {
    pub n_states: usize,
    /// Emission row index per state.
    pub row_of: Vec<u32>,
    /// Word index per state.
    pub word_of: Vec<u32>,
    /// Initial occupation probabilities (entry chain of word 0).
    pub init: Vec<(u32, f64)>,
    /// Probability that every word is skipped (legal only for an empty
    /// phoneme sequence).
    pub init_end: f64,
    /// Effective edges, possibly several between the same state pair with
    /// different base kinds.
    pub edges: Vec<Edge>,
    /// Per state: end-of-sentence mass split by base kind.
    pub end_kind: Vec<[f64; 3]>,
    /// Merged parallel edges for Viterbi: probability summed, kind is the
    /// highest-priority constituent.
    pub merged: Vec<Edge>,
}

impl Lattice {
    pub fn end_total(&self, state: usize) -> f64 {
        let k = &self.end_kind[state];
        k[0] + k[1] + k[2]
    }
}

/// Compile the sentence lattice for words given as per-word emission row
/// sequences (`rows[w][i]` = emission row of grapheme `i` of word `w`).
pub fn compile(rows: &[Vec<u32>], topo: &Topology) -> Lattice {
    let n_words = rows.len();
    let mut word_start = Vec::with_capacity(n_words);
    let mut row_of = Vec::new();
    let mut word_of = Vec::new();
    for (w, word_rows) in rows.iter().enumerate() {
        word_start.push(row_of.len() as u32);
        for &r in word_rows {
            row_of.push(r);
            word_of.push(w as u32);
        }
    }
    let n_states = row_of.len();

    // entry[w] = (occupations, end mass) of the entry junction of word w;
    // entry[n_words] is the sentence end. Built right to left because
    // one-grapheme words chain forward.
    let mut entry: Vec<(Vec<(u32, f64)>, f64)> = vec![(Vec::new(), 0.0); n_words + 1];
    entry[n_words] = (Vec::new(), 1.0);
    for w in (0..n_words).rev() {
        let len = rows[w].len();
        let start = word_start[w];
        let mut occ = vec![(start, topo.enter_first)];
        let mut end = 0.0;
        if len >= 2 {
            occ.push((start + 1, topo.enter_second));
        } else {
            let (sub, sub_end) = entry[w + 1].clone();
            for (s, p) in sub {
                occ.push((s, topo.enter_second * p));
            }
            end += topo.enter_second * sub_end;
        }
        entry[w] = (occ, end);
    }

    let mut edges = Vec::with_capacity(n_states * 4);
    let mut end_kind = vec![[0.0; 3]; n_states];
    for w in 0..n_words {
        let len = rows[w].len();
        let start = word_start[w] as usize;
        let (exit_occ, exit_end) = &entry[w + 1];
        for i in 0..len {
            let j = (start + i) as u32;
            edges.push(Edge {
                src: j,
                tgt: j,
                prob: topo.a_loop,
                kind: KIND_LOOP,
            });
            // advance
            if i + 1 < len {
                edges.push(Edge {
                    src: j,
                    tgt: j + 1,
                    prob: topo.a_adv,
                    kind: KIND_ADV,
                });
            } else {
                for &(s, p) in exit_occ {
                    edges.push(Edge {
                        src: j,
                        tgt: s,
                        prob: topo.a_adv * p,
                        kind: KIND_ADV,
                    });
                }
                end_kind[j as usize][KIND_ADV as usize] += topo.a_adv * exit_end;
            }
            // skip; lands at i+2, overshoot clamps to the word exit
            if i + 2 < len {
                edges.push(Edge {
                    src: j,
                    tgt: j + 2,
                    prob: topo.a_skip,
                    kind: KIND_SKIP,
                });
            } else {
                for &(s, p) in exit_occ {
                    edges.push(Edge {
                        src: j,
                        tgt: s,
                        prob: topo.a_skip * p,
                        kind: KIND_SKIP,
                    });
                }
                end_kind[j as usize][KIND_SKIP as usize] += topo.a_skip * exit_end;
            }
        }
    }

    // merge parallel edges for Viterbi
    let mut merged: Vec<Edge> = Vec::with_capacity(edges.len());
    let mut sorted = edges.clone();
    sorted.sort_by_key(|a| (a.src, a.tgt));
    for e in sorted {
        match merged.last_mut() {
            Some(last) if last.src == e.src && last.tgt == e.tgt => {
                last.prob += e.prob;
                if kind_priority(e.kind) > kind_priority(last.kind) {
                    last.kind = e.kind;
                }
            }
            _ => merged.push(e),
        }
    }

    let (init, init_end) = entry[0].clone();
    Lattice {
        n_states,
        row_of,
        word_of,
        init,
        init_end,
        edges,
        end_kind,
        merged,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn topo() -> Topology {
        Topology::default()
    }

    #[test]
    fn outgoing_mass_sums_to_one() {
        // several word shapes, including skippable one-grapheme words
        for rows in [
            vec![vec![0u32, 1, 2]],
            vec![vec![0], vec![1, 2]],
            vec![vec![0], vec![1], vec![2]],
            vec![vec![0, 1], vec![2], vec![3, 4, 5]],
        ] {
            let lat = compile(&rows, &topo());
            for j in 0..lat.n_states {
                let mut mass = lat.end_total(j);
                for e in &lat.edges {
                    if e.src as usize == j {
                        mass += e.prob;
                    }
                }
                assert!((mass - 1.0).abs() < 1e-12, "state {j} mass {mass}");
            }
            let init_mass: f64 =
                lat.init.iter().map(|(_, p)| p).sum::<f64>() + lat.init_end;
            assert!((init_mass - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn one_grapheme_chain_can_skip_to_end() {
        // two one-grapheme words: entry can chain through both
        let lat = compile(&[vec![0], vec![1]], &topo());
        let t = topo();
        assert!((lat.init_end - t.enter_second * t.enter_second).abs() < 1e-12);
        // entering word 1 directly costs enter_second * enter_first
        let w1 = lat
            .init
            .iter()
            .find(|(s, _)| *s == 1)
            .map(|(_, p)| *p)
            .unwrap();
        assert!((w1 - t.enter_second * t.enter_first).abs() < 1e-12);
    }

    #[test]
    fn multi_grapheme_words_cannot_be_skipped() {
        let lat = compile(&[vec![0, 1], vec![2, 3]], &topo());
        assert_eq!(lat.init_end, 0.0);
        // last state of word 0 exits into states 2 (enter first) and 3
        let exits: Vec<(u32, u8)> = lat
            .edges
            .iter()
            .filter(|e| e.src == 1 && e.tgt >= 2)
            .map(|e| (e.tgt, e.kind))
            .collect();
        assert!(exits.contains(&(2, KIND_ADV)));
        assert!(exits.contains(&(3, KIND_ADV)));
        assert!(exits.contains(&(2, KIND_SKIP)));
    }

    #[test]
    fn merged_edges_sum_parallel_probability() {
        let t = topo();
        // single two-grapheme word: from the last state both adv and skip
        // clamp to the sentence end, no merged state edges there; from
        // state 0 of word "ab" into state 1 only adv applies... use a
        // boundary case: word pair where adv and skip both reach the next
        // word's first state.
        let lat = compile(&[vec![0, 1], vec![2]], &topo());
        let m: Vec<&Edge> = lat
            .merged
            .iter()
            .filter(|e| e.src == 1 && e.tgt == 2)
            .collect();
        assert_eq!(m.len(), 1);
        let expect = (t.a_adv + t.a_skip) * t.enter_first;
        assert!((m[0].prob - expect).abs() < 1e-12);
        assert_eq!(m[0].kind, KIND_ADV); // highest priority constituent
    }
}
