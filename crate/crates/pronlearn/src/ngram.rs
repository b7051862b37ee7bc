//! Witten-Bell smoothed n-gram counts over dense token ids.
//!
//! This is the probability core behind both the phone-level language model
//! and the graphone sequence model. Tokens are dense ids `0..vocab_size`
//! assigned by the caller (the caller reserves one of them for the
//! end-of-sequence event). Histories are padded on the left with [`BOS`];
//! tokens unseen at training time are scored through [`UNK`].
//!
//! For a history `h` with total continuation count `c(h)` and `T(h)`
//! distinct continuation types, the conditional probability of token `w`
//! is estimated recursively:
//!
//! ```text
//! P(w | h) = (c(h, w) + T(h) * P(w | h')) / (c(h) + T(h))
//! ```
//!
//! where `h'` drops the oldest history token, bottoming out in a uniform
//! distribution over the `vocab_size + 1` outcomes (all real tokens plus
//! unk). Unseen histories back off transparently. Witten-Bell needs no
//! tuned discounts, which keeps it stable on the very small corpora this
//! crate targets.

use std::collections::HashMap;

/// History padding token; never predicted.
pub const BOS: u32 = u32::MAX;
/// Unknown-token event.
pub const UNK: u32 = u32::MAX - 1;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct HistCell {
    pub total: f64,
    pub conts: HashMap<u32, f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WittenBellModel {
    order: usize,
    vocab_size: usize,
    /// `levels[m]` holds cells for histories of length `m`, `m < order`.
    levels: Vec<HashMap<Vec<u32>, HistCell>>,
}

impl WittenBellModel {
    pub fn new(order: usize, vocab_size: usize) -> Self {
        assert!(order >= 1);
        WittenBellModel {
            order,
            vocab_size,
            levels: vec![HashMap::new(); order],
        }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    /// Accumulate weighted counts for one event sequence. `events` are the
    /// predicted tokens in order (callers append their end-of-sequence id).
    pub fn add_sequence(&mut self, events: &[u32], weight: f64) {
        for i in 0..events.len() {
            let w = events[i];
            debug_assert!((w as usize) < self.vocab_size);
            for m in 0..self.order {
                let mut hist = Vec::with_capacity(m);
                for k in 0..m {
                    // position i - m + k, BOS-padded
                    let idx = i as isize - m as isize + k as isize;
                    hist.push(if idx < 0 { BOS } else { events[idx as usize] });
                }
                let cell = self.levels[m].entry(hist).or_default();
                cell.total += weight;
                *cell.conts.entry(w).or_insert(0.0) += weight;
            }
        }
    }

    fn base(&self) -> f64 {
        1.0 / (self.vocab_size as f64 + 1.0)
    }

    /// Conditional probability of `tok` (a real id or [`UNK`]) given a
    /// history of at most `order - 1` tokens.
    pub fn prob(&self, hist: &[u32], tok: u32) -> f64 {
        debug_assert!(hist.len() < self.order);
        let lower = if hist.is_empty() {
            self.base()
        } else {
            self.prob(&hist[1..], tok)
        };
        match self.levels[hist.len()].get(hist) {
            None => lower,
            Some(cell) => {
                let types = cell.conts.len() as f64;
                let count = cell.conts.get(&tok).copied().unwrap_or(0.0);
                (count + types * lower) / (cell.total + types)
            }
        }
    }

    /// Total log probability of an event sequence, histories BOS-padded.
    pub fn logprob_seq(&self, events: &[u32]) -> f64 {
        let ctx = self.order - 1;
        let mut hist: Vec<u32> = Vec::with_capacity(ctx);
        let mut total = 0.0;
        for i in 0..events.len() {
            hist.clear();
            for k in 0..ctx {
                let idx = i as isize - ctx as isize + k as isize;
                hist.push(if idx < 0 { BOS } else { events[idx as usize] });
            }
            total += self.prob(&hist, events[i]).ln();
        }
        total
    }

    /// Cells in deterministic order (level, then history ids; continuation sorting is the serializer's job).
    pub fn iter_cells(&self) -> impl Iterator<Item = (usize, &Vec<u32>, &HistCell)> {
        self.levels.iter().enumerate().flat_map(|(m, map)| {
            let mut keys: Vec<&Vec<u32>> = map.keys().collect();
            keys.sort();
            keys.into_iter().map(move |k| (m, k, &map[k]))
        })
    }

    /// Rebuild a model from serialized cells.
    pub fn insert_cell(&mut self, level: usize, hist: Vec<u32>, cell: HistCell) {
        self.levels[level].insert(hist, cell);
    }

    /// All known histories at a given level (for normalization checks).
    pub fn histories(&self, level: usize) -> impl Iterator<Item = &Vec<u32>> {
        self.levels[level].keys()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Witten-Bell by hand on the single sequence [A B]:
    /// ids A=0, B=1, EOS=2, vocab_size=3, base = 1/4.
    #[test]
    fn hand_computed_bigram() {
        let mut m = WittenBellModel::new(2, 3);
        m.add_sequence(&[0, 1, 2], 1.0);
        // unigram level: counts {0:1, 1:1, 2:1}, total 3, T=3
        let p_uni_b = (1.0 + 3.0 * 0.25) / (3.0 + 3.0);
        assert!((m.prob(&[], 1) - p_uni_b).abs() < 1e-12);
        // P(B|A) = (1 + 1 * P_uni(B)) / (1 + 1)
        let p_b_given_a = (1.0 + p_uni_b) / 2.0;
        assert!((m.prob(&[0], 1) - p_b_given_a).abs() < 1e-12);
        // B is the unique observed continuation of A, so it dominates.
        for tok in [0u32, 2, UNK] {
            assert!(m.prob(&[0], 1) > m.prob(&[0], tok));
        }
    }

    #[test]
    fn equal_continuations_get_equal_probability() {
        // {[A B], [A C]}: P(B|A) == P(C|A).
        let mut m = WittenBellModel::new(2, 4); // A=0,B=1,C=2,EOS=3
        m.add_sequence(&[0, 1, 3], 1.0);
        m.add_sequence(&[0, 2, 3], 1.0);
        let pb = m.prob(&[0], 1);
        let pc = m.prob(&[0], 2);
        assert!((pb - pc).abs() < 1e-12);
        // by hand: unigram counts {0:2,1:1,2:1,3:2} total 6, T=4, base=1/5
        let p_uni_b = (1.0 + 4.0 * 0.2) / (6.0 + 4.0);
        let expect = (1.0 + 2.0 * p_uni_b) / (2.0 + 2.0);
        assert!((pb - expect).abs() < 1e-12);
    }

    #[test]
    fn conditionals_sum_to_one() {
        let mut m = WittenBellModel::new(3, 5);
        m.add_sequence(&[0, 1, 2, 3, 4], 1.0);
        m.add_sequence(&[1, 1, 0, 4], 2.5);
        m.add_sequence(&[2, 0, 4], 1.0);
        let mut hists: Vec<Vec<u32>> = vec![vec![], vec![BOS], vec![0], vec![9]];
        for h in m.histories(1) {
            hists.push(h.clone());
        }
        for h in m.histories(2) {
            hists.push(h.clone());
        }
        for h in &hists {
            let mut sum = m.prob(h, UNK);
            for tok in 0..5u32 {
                sum += m.prob(h, tok);
            }
            assert!((sum - 1.0).abs() < 1e-9, "history {h:?} sums to {sum}");
        }
    }

    #[test]
    fn unseen_history_backs_off() {
        let mut m = WittenBellModel::new(3, 3);
        m.add_sequence(&[0, 1, 2], 1.0);
        assert_eq!(m.prob(&[2, 2], 1), m.prob(&[2], 1));
    }
}
