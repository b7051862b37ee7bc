use super::*;
use crate::corpus::{Corpus, Sentence};
use crate::lexicon::Word;
use crate::rng::SplitRng;

fn syms(table: &mut SymbolTable, texts: &[&str]) -> Vec<Symbol> {
    texts.iter().map(|t| table.intern(t).unwrap()).collect()
}

fn sentence(table: &mut SymbolTable, words: &[&str], phones: &[&str]) -> Sentence {
    Sentence {
        words: words
            .iter()
            .map(|w| Word::from_surface(table, w).unwrap())
            .collect(),
        phones: Some(Pronunciation(syms(table, phones))),
    }
}

fn corpus_of(table: &mut SymbolTable, data: &[(&[&str], &[&str])]) -> Corpus {
    Corpus {
        language_tag: "xx".into(),
        sentences: data
            .iter()
            .map(|(w, p)| sentence(table, w, p))
            .collect(),
    }
}

#[test]
fn init_is_uniform() {
    let mut table = SymbolTable::new();
    let gs = syms(&mut table, &["a", "b"]);
    let ps = syms(&mut table, &["A", "B", "C", "D"]);
    let em = init_emissions(&table, &gs, &ps).unwrap();
    for &g in &gs {
        for &p in em.row(g).unwrap() {
            assert_eq!(p, 0.25);
        }
    }
    assert_eq!(em.row(gs[0]).unwrap(), em.row(gs[1]).unwrap());
    // single-phoneme inventory degenerates to 1.0
    let one = init_emissions(&table, &gs, &ps[..1]).unwrap();
    assert_eq!(one.row(gs[0]).unwrap(), &[1.0]);
    assert!(init_emissions(&table, &[], &ps).is_err());
    assert!(init_emissions(&table, &gs, &[]).is_err());
}

#[test]
fn single_path_posterior_closed_form() {
    let mut table = SymbolTable::new();
    let gs = syms(&mut table, &["a"]);
    let ps = syms(&mut table, &["A", "B", "C", "D"]);
    let em = init_emissions(&table, &gs, &ps).unwrap();
    let corpus = corpus_of(&mut table, &[(&["a"], &["A"])]);
    let (em, _, report) =
        em_train(&table, &corpus, em, Topology::default(), 1, 0.0).unwrap();
    assert_eq!(report.iterations, 1);
    let row = em.row(gs[0]).unwrap();
    let col = em.phoneme_column(table.get("A").unwrap()).unwrap();
    let expect = (1.0 - 4.0 * EMISSION_FLOOR) + EMISSION_FLOOR; // = 1 - (|P|-1) * floor
    assert!((row[col] - expect).abs() < 1e-15, "{} vs {expect}", row[col]);
    for (c, &p) in row.iter().enumerate() {
        if c != col {
            assert!((p - EMISSION_FLOOR).abs() < 1e-15);
        }
    }
}

#[test]
fn em_fixed_point_on_separable_corpus() {
    let mut table = SymbolTable::new();
    let gs = syms(&mut table, &["a", "b"]);
    let ps = syms(&mut table, &["A", "B"]);
    let em = init_emissions(&table, &gs, &ps).unwrap();
    let corpus = corpus_of(
        &mut table,
        &[
            (&["ab"], &["A", "B"]),
            (&["ba"], &["B", "A"]),
            (&["ab"], &["A", "B"]),
            (&["ba"], &["B", "A"]),
        ],
    );
    let (em, _, report) =
        em_train(&table, &corpus, em, Topology::default(), 30, 1e-6).unwrap();
    assert!(report.skipped_sentences.is_empty());
    let a = table.get("a").unwrap();
    let b = table.get("b").unwrap();
    let col_a = em.phoneme_column(table.get("A").unwrap()).unwrap();
    let col_b = em.phoneme_column(table.get("B").unwrap()).unwrap();
    assert!(em.row(a).unwrap()[col_a] > 0.9, "{:?}", em.row(a));
    assert!(em.row(b).unwrap()[col_b] > 0.9, "{:?}", em.row(b));
    for &g in &gs {
        let sum: f64 = em.row(g).unwrap().iter().sum();
        assert!((sum - 1.0).abs() < 1e-9);
        assert!(em.row(g).unwrap().iter().all(|&p| p >= EMISSION_FLOOR));
    }
}

#[test]
fn zero_iterations_change_nothing() {
    let mut table = SymbolTable::new();
    let gs = syms(&mut table, &["a", "b"]);
    let ps = syms(&mut table, &["A", "B"]);
    let em = init_emissions(&table, &gs, &ps).unwrap();
    let corpus = corpus_of(&mut table, &[(&["ab"], &["A", "B"])]);
    let topo = Topology::default();
    let (em2, topo2, report) = em_train(&table, &corpus, em.clone(), topo.clone(), 0, 1e-4).unwrap();
    assert_eq!(em2, em);
    assert_eq!(topo2, topo);
    assert!(report.loglik_trace.is_empty());
}

/// Sample an observable phoneme sequence by walking the generative
/// process, so the sentence is alignable by construction.
fn sample_phones(
    table: &SymbolTable,
    words: &[Word],
    em: &EmissionTable,
    topo: &Topology,
    rng: &mut SplitRng,
) -> Vec<Symbol> {
    let mut out = Vec::new();
    let mut w = 0usize;
    let mut pos = 0usize;
    let mut entering = true;
    loop {
        if entering {
            // entry junction of word w
            if w == words.len() {
                break;
            }
            if rng.next_f64() < topo.enter_first {
                pos = 0;
                entering = false;
            } else if words[w].len() >= 2 {
                pos = 1;
                entering = false;
            } else {
                w += 1; // skip one-grapheme word
                continue;
            }
        }
        // occupy state (w, pos): emit one phoneme from the tied row
        let g = words[w].graphemes()[pos];
        let row = em.row(g).unwrap();
        let mut u = rng.next_f64();
        let mut choice = row.len() - 1;
        for (c, &p) in row.iter().enumerate() {
            if u < p {
                choice = c;
                break;
            }
            u -= p;
        }
        out.push(em.phonemes()[choice]);
        let _ = table;
        // move
        let u = rng.next_f64();
        let len = words[w].len();
        if u < topo.a_loop {
            // stay
        } else if u < topo.a_loop + topo.a_adv {
            if pos + 1 < len {
                pos += 1;
            } else {
                w += 1;
                entering = true;
            }
        } else if pos + 2 < len {
            pos += 2;
        } else {
            w += 1;
            entering = true;
        }
    }
    out
}

fn random_emissions(
    table: &SymbolTable,
    gs: &[Symbol],
    ps: &[Symbol],
    rng: &mut SplitRng,
) -> EmissionTable {
    let mut em = init_emissions(table, gs, ps).unwrap();
    let rows: Vec<Vec<f64>> = (0..em.n_rows())
        .map(|_| {
            let mut row: Vec<f64> = (0..ps.len()).map(|_| rng.next_f64() + 0.05).collect();
            let sum: f64 = row.iter().sum();
            row.iter_mut().for_each(|v| *v /= sum);
            row
        })
        .collect();
    em.set_rows(rows);
    em
}

#[test]
fn loglik_is_monotone_on_random_corpora() {
    let mut table = SymbolTable::new();
    let gs = syms(&mut table, &["a", "b", "c", "d"]);
    let ps = syms(&mut table, &["A", "B", "C", "D", "E"]);
    let vocab = ["a", "ab", "bc", "cda", "dd", "b"];
    for trial in 0..10u64 {
        let mut rng = SplitRng::for_stream(99, trial);
        let gen_em = random_emissions(&table, &gs, &ps, &mut rng);
        let topo = Topology::default();
        let mut corpus = Corpus::new("xx");
        for _ in 0..12 {
            let n_words = rng.range(1, 3);
            let words: Vec<Word> = (0..n_words)
                .map(|_| {
                    Word::from_surface(&mut table, vocab[rng.index(vocab.len())]).unwrap()
                })
                .collect();
            let phones = sample_phones(&table, &words, &gen_em, &topo, &mut rng);
            corpus.sentences.push(Sentence {
                words,
                phones: Some(Pronunciation(phones)),
            });
        }
        let em0 = init_emissions(&table, &gs, &ps).unwrap();
        let (_, _, report) = em_train(&table, &corpus, em0, topo, 8, 0.0).unwrap();
        for pair in report.loglik_trace.windows(2) {
            assert!(
                pair[1] >= pair[0] - 1e-8,
                "trial {trial}: loglik decreased {} -> {}",
                pair[0],
                pair[1]
            );
        }
    }
}

fn sharp_emissions(table: &mut SymbolTable, pairs: &[(&str, &str)], ps: &[&str]) -> EmissionTable {
    let gs: Vec<Symbol> = pairs.iter().map(|(g, _)| table.intern(g).unwrap()).collect();
    let psyms = syms(table, ps);
    let mut em = init_emissions(table, &gs, &psyms).unwrap();
    let n = psyms.len() as f64;
    let rows: Vec<Vec<f64>> = (0..em.n_rows())
        .map(|r| {
            let g = em.graphemes()[r];
            let target = pairs
                .iter()
                .find(|(gt, _)| table.get(gt).unwrap() == g)
                .map(|(_, p)| table.get(p).unwrap())
                .unwrap();
            let col = em.phoneme_column(target).unwrap();
            (0..ps.len())
                .map(|c| if c == col { 0.98 } else { 0.02 / (n - 1.0) })
                .collect()
        })
        .collect();
    em.set_rows(rows);
    em
}

#[test]
fn viterbi_three_state_hand_case() {
    let mut table = SymbolTable::new();
    let em = sharp_emissions(&mut table, &[("a", "A"), ("b", "B"), ("c", "C")], &["A", "B", "C"]);
    let words = vec![
        Word::from_surface(&mut table, "ab").unwrap(),
        Word::from_surface(&mut table, "c").unwrap(),
    ];
    let phones = syms(&mut table, &["A", "B", "C"]);
    let alignment =
        viterbi_align(&table, &words, &phones, &em, &Topology::default()).unwrap();
    assert_eq!(
        alignment.spans,
        vec![
            WordSpan { word_index: 0, start: 0, end: 2 },
            WordSpan { word_index: 1, start: 2, end: 3 },
        ]
    );
    assert_eq!(alignment.states, vec![0, 1, 2]);
}

#[test]
fn viterbi_single_word_single_phone() {
    let mut table = SymbolTable::new();
    let em = sharp_emissions(&mut table, &[("a", "A")], &["A", "B"]);
    let words = vec![Word::from_surface(&mut table, "a").unwrap()];
    let phones = syms(&mut table, &["A"]);
    let alignment =
        viterbi_align(&table, &words, &phones, &em, &Topology::default()).unwrap();
    assert_eq!(alignment.spans, vec![WordSpan { word_index: 0, start: 0, end: 1 }]);
}

#[test]
fn viterbi_one_phone_two_path_tie() {
    // word "ab" with one phone admits exactly two paths: emit from state
    // 0 (enter 0.9, exit by skip 0.1) or from state 1 (enter 0.1, exit
    // 0.9). Under a uniform emission table their true scores coincide;
    // the word's span is [A] either way and the returned path is
    // deterministic.
    let mut table = SymbolTable::new();
    let gs = syms(&mut table, &["a", "b"]);
    let ps = syms(&mut table, &["A", "B", "C", "D"]);
    let em = init_emissions(&table, &gs, &ps).unwrap();
    let words = vec![Word::from_surface(&mut table, "ab").unwrap()];
    let phones = syms(&mut table, &["A"]);
    let topo = Topology::default();
    let path0 = 0.9f64 * 0.25 * 0.1; // enter first, emit, skip out
    let path1 = 0.1f64 * 0.25 * 0.9; // enter second, emit, advance out
    assert!((path0 - path1).abs() < 1e-15);
    let alignment = viterbi_align(&table, &words, &phones, &em, &topo).unwrap();
    assert_eq!(alignment.spans, vec![WordSpan { word_index: 0, start: 0, end: 1 }]);
    assert!((alignment.score - path0.ln()).abs() < 1e-12);
    let again = viterbi_align(&table, &words, &phones, &em, &topo).unwrap();
    assert_eq!(alignment, again);
}

#[test]
fn spans_cover_phones_exactly() {
    let mut table = SymbolTable::new();
    let gs = syms(&mut table, &["a", "b", "c"]);
    let ps = syms(&mut table, &["A", "B", "C"]);
    let topo = Topology::default();
    for trial in 0..20u64 {
        let mut rng = SplitRng::for_stream(5, trial);
        let em = random_emissions(&table, &gs, &ps, &mut rng);
        let vocab = ["a", "ab", "abc", "cb", "c"];
        let words: Vec<Word> = (0..rng.range(1, 4))
            .map(|_| Word::from_surface(&mut table, vocab[rng.index(vocab.len())]).unwrap())
            .collect();
        let phones = sample_phones(&table, &words, &em, &topo, &mut rng);
        let alignment = viterbi_align(&table, &words, &phones, &em, &topo).unwrap();
        let mut expect_start = 0;
        for (w, span) in alignment.spans.iter().enumerate() {
            assert_eq!(span.word_index, w);
            assert_eq!(span.start, expect_start, "spans must be contiguous");
            assert!(span.end >= span.start);
            expect_start = span.end;
        }
        assert_eq!(expect_start, phones.len());
    }
}

#[test]
fn too_few_phones_is_no_path() {
    let mut table = SymbolTable::new();
    let gs = syms(&mut table, &["a", "b", "c", "d"]);
    let ps = syms(&mut table, &["A"]);
    let em = init_emissions(&table, &gs, &ps).unwrap();
    let words = vec![Word::from_surface(&mut table, "abcd").unwrap()];
    let phones = syms(&mut table, &["A"]);
    assert!(matches!(
        viterbi_align(&table, &words, &phones, &em, &Topology::default()),
        Err(Error::NoPath)
    ));
    // and em_train skips such a sentence instead of failing
    let corpus = Corpus {
        language_tag: "xx".into(),
        sentences: vec![
            sentence(&mut table, &["abcd"], &["A"]),
            sentence(&mut table, &["a"], &["A"]),
        ],
    };
    let em0 = init_emissions(&table, &gs, &ps).unwrap();
    let (_, _, report) = em_train(&table, &corpus, em0, Topology::default(), 2, 0.0).unwrap();
    assert_eq!(report.skipped_sentences, vec![0]);
}

#[test]
fn em_rejects_unknown_graphemes_and_missing_phones() {
    let mut table = SymbolTable::new();
    let gs = syms(&mut table, &["a"]);
    let ps = syms(&mut table, &["A"]);
    let em = init_emissions(&table, &gs, &ps).unwrap();
    let bad = corpus_of(&mut table, &[(&["az"], &["A"])]);
    assert!(em_train(&table, &bad, em.clone(), Topology::default(), 1, 0.0).is_err());
    let mut no_phones = corpus_of(&mut table, &[(&["a"], &["A"])]);
    no_phones.sentences[0].phones = None;
    assert!(em_train(&table, &no_phones, em, Topology::default(), 1, 0.0).is_err());
}

#[test]
fn em_is_deterministic() {
    let mut table = SymbolTable::new();
    let gs = syms(&mut table, &["a", "b"]);
    let ps = syms(&mut table, &["A", "B"]);
    let corpus = corpus_of(
        &mut table,
        &[
            (&["ab", "ba"], &["A", "B", "B", "A"]),
            (&["ab"], &["A", "B"]),
            (&["ba", "ab", "ab"], &["B", "A", "A", "B", "A", "B"]),
        ],
    );
    let run = |table: &SymbolTable| {
        let em = init_emissions(table, &gs, &ps).unwrap();
        let (em, topo, _) =
            em_train(table, &corpus, em, Topology::default(), 10, 0.0).unwrap();
        (em.format(table), format!("{topo:?}"))
    };
    assert_eq!(run(&table), run(&table));
}

#[test]
fn harvest_counts_and_empty_spans() {
    let mut table = SymbolTable::new();
    let corpus = corpus_of(
        &mut table,
        &[
            (&["ab"], &["A", "B"]),
            (&["ab"], &["A", "B"]),
            (&["ab"], &["A", "A"]),
            (&["a"], &[]),
        ],
    );
    let span = |w, s, e| WordSpan { word_index: w, start: s, end: e };
    let alignments = vec![
        Some(Alignment { spans: vec![span(0, 0, 2)], score: 0.0, states: vec![0, 1] }),
        Some(Alignment { spans: vec![span(0, 0, 2)], score: 0.0, states: vec![0, 1] }),
        Some(Alignment { spans: vec![span(0, 0, 2)], score: 0.0, states: vec![0, 1] }),
        Some(Alignment { spans: vec![span(0, 0, 0)], score: 0.0, states: vec![] }),
    ];
    let counts = harvest(&corpus, &alignments);
    assert_eq!(counts.word_count(), 1);
    assert_eq!(counts.empty_spans, 1);
    let prons = counts.get("ab").unwrap();
    assert_eq!(prons.len(), 2);
    let ab = Pronunciation(syms(&mut table, &["A", "B"]));
    assert_eq!(prons[&ab], 2);
}

#[test]
fn threshold_modal_rule_and_bounds() {
    let mut table = SymbolTable::new();
    let p1 = Pronunciation(syms(&mut table, &["A", "B"]));
    let p2 = Pronunciation(syms(&mut table, &["A", "A"]));
    let mut counts = HarvestCounts::default();
    for _ in 0..3 {
        counts.add("w", p1.clone());
    }
    counts.add("w", p2.clone());
    let lex = accept_threshold(&table, &counts, 2, None).unwrap();
    let entry = &lex.get("w").unwrap()[0];
    assert_eq!(entry.pron, p1);
    assert_eq!(entry.count, 3);
    assert_eq!(entry.provenance, Provenance::Learned);
    assert!(accept_threshold(&table, &counts, 4, None).unwrap().is_empty());
    let k1 = accept_threshold(&table, &counts, 1, None).unwrap();
    assert_eq!(k1.word_count(), 1);
    assert!(accept_threshold(&table, &counts, 0, None).is_err());
}

#[test]
fn threshold_is_monotone_in_k() {
    let mut table = SymbolTable::new();
    let mut counts = HarvestCounts::default();
    let mut rng = SplitRng::new(4);
    let phones = ["A", "B", "C"];
    for w in 0..30 {
        let word = format!("w{w}");
        for _ in 0..rng.range(1, 9) {
            let pron = Pronunciation(syms(
                &mut table,
                &[phones[rng.index(3)], phones[rng.index(3)]],
            ));
            counts.add(&word, pron);
        }
    }
    let mut prev: Option<Vec<String>> = None;
    for k in 1..=9u64 {
        let lex = accept_threshold(&table, &counts, k, None).unwrap();
        let words: Vec<String> = lex.words().map(str::to_string).collect();
        if let Some(prev) = &prev {
            assert!(words.iter().all(|w| prev.contains(w)), "k={k} not nested");
        }
        prev = Some(words);
    }
}

#[test]
fn pooling_prefers_seed() {
    let mut table = SymbolTable::new();
    let mk = |table: &mut SymbolTable, entries: &[(&str, &str, Provenance)]| {
        let mut l = Lexicon::new();
        for (w, p, prov) in entries {
            let pron = Pronunciation::parse(table, p).unwrap();
            l.insert(
                table,
                w,
                LexiconEntry { pron, provenance: *prov, count: 0 },
            )
            .unwrap();
        }
        l
    };
    let seed = mk(&mut table, &[("cat", "K A T", Provenance::Seed)]);
    let learned = mk(
        &mut table,
        &[
            ("cat", "K A A", Provenance::Learned),
            ("dog", "D O G", Provenance::Learned),
        ],
    );
    let pooled = pool_with_seed(&table, &learned, &seed);
    assert_eq!(pooled.word_count(), 2);
    assert_eq!(
        pooled.first_pron("cat").unwrap().display(&table),
        "K A T"
    );
    assert_eq!(pooled.get("cat").unwrap().len(), 1);
    // empty learned -> seed unchanged
    let pooled2 = pool_with_seed(&table, &Lexicon::new(), &seed);
    assert_eq!(pooled2, seed);
}

#[test]
fn harvest_file_round_trips() {
    let mut table = SymbolTable::new();
    let mut counts = HarvestCounts::default();
    counts.add("b", Pronunciation(syms(&mut table, &["B"])));
    counts.add("a", Pronunciation(syms(&mut table, &["A", "B"])));
    counts.add("a", Pronunciation(syms(&mut table, &["A", "B"])));
    counts.add("a", Pronunciation(syms(&mut table, &["A"])));
    counts.empty_spans = 3;
    let dir = std::env::temp_dir().join("pronlearn_harvest");
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("h.tsv");
    write_harvest(&counts, &table, &path).unwrap();
    let back = read_harvest(&mut table, &path).unwrap();
    assert_eq!(back, counts);
}

#[test]
fn tying_is_structural() {
    // one row per grapheme regardless of how many words/states use it
    let mut table = SymbolTable::new();
    let gs = syms(&mut table, &["a", "b"]);
    let ps = syms(&mut table, &["A", "B"]);
    let em0 = init_emissions(&table, &gs, &ps).unwrap();
    let corpus = corpus_of(
        &mut table,
        &[
            (&["ab", "ba", "aa"], &["A", "B", "B", "A", "A", "A"]),
            (&["ba"], &["B", "A"]),
        ],
    );
    let (em, _, _) = em_train(&table, &corpus, em0, Topology::default(), 5, 0.0).unwrap();
    assert_eq!(em.n_rows(), 2);
    // every occurrence of "a" reads the same shared row
    let a = table.get("a").unwrap();
    let row_ptr = em.row(a).unwrap().as_ptr();
    assert_eq!(em.row(a).unwrap().as_ptr(), row_ptr);
}
