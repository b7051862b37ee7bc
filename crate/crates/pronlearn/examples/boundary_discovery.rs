//! Word-boundary discovery: train tied-emission HMMs with Baum-Welch on
//! sentence-level phoneme streams, then Viterbi-align them into per-word
//! spans.
//!
//! ```bash
//! cargo run --example boundary_discovery
//! ```

use pronlearn::corpus::{Corpus, Sentence};
use pronlearn::lexicon::{Pronunciation, Word};
use pronlearn::lexlearn::{em_train, init_emissions, viterbi_align, Topology};
use pronlearn::symbol::SymbolTable;

fn main() -> pronlearn::Result<()> {
    let mut table = SymbolTable::new();
    // ground truth (never shown to the learner): a->A, b->B, c->C, d->D
    let sentences = [
        (vec!["ab", "cd"], "A B C D"),
        (vec!["cd", "ab"], "C D A B"),
        (vec!["abc", "d"], "A B C D"),
        (vec!["ad", "bc", "ad"], "A D B C A D"),
        (vec!["b", "acd"], "B A C D"),
        (vec!["dc", "ba"], "D C B A"),
        (vec!["ab", "ab", "cd"], "A B A B C D"),
        (vec!["cab", "d"], "C A B D"),
    ];
    let mut corpus = Corpus::new("toy");
    for (words, phones) in &sentences {
        corpus.sentences.push(Sentence {
            words: words
                .iter()
                .map(|w| Word::from_surface(&mut table, w))
                .collect::<Result<_, _>>()?,
            phones: Some(Pronunciation::parse(&mut table, phones)?),
        });
    }

    let graphemes: Vec<_> = ["a", "b", "c", "d"]
        .iter()
        .map(|t| table.intern(t))
        .collect::<Result<_, _>>()?;
    let phonemes: Vec<_> = ["A", "B", "C", "D"]
        .iter()
        .map(|t| table.intern(t))
        .collect::<Result<_, _>>()?;
    let emissions = init_emissions(&table, &graphemes, &phonemes)?;
    println!("emissions start uniform; Baum-Welch sharpens the tied rows:");
    let (emissions, topo, report) =
        em_train(&table, &corpus, emissions, Topology::default(), 20, 1e-6)?;
    println!(
        "  {} iterations, log-likelihood {:.3} -> {:.3}",
        report.iterations,
        report.loglik_trace.first().unwrap(),
        report.loglik_trace.last().unwrap()
    );
    for &g in &graphemes {
        let row = emissions.row(g).unwrap();
        let best = row
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.partial_cmp(y.1).unwrap())
            .unwrap();
        println!(
            "  E[{}] peaks at {} with {:.3}",
            table.text(g),
            table.text(emissions.phonemes()[best.0]),
            best.1
        );
    }

    println!("\nViterbi spans:");
    for sentence in &corpus.sentences {
        let phones = sentence.phones.as_ref().unwrap();
        let alignment = viterbi_align(&table, &sentence.words, phones, &emissions, &topo)?;
        let mut parts = Vec::new();
        for span in &alignment.spans {
            let segment: Vec<&str> = phones.0[span.start..span.end]
                .iter()
                .map(|&p| table.text(p))
                .collect();
            parts.push(format!(
                "{}=[{}]",
                sentence.words[span.word_index].surface(),
                segment.join(" ")
            ));
        }
        println!("  {}", parts.join("  "));
    }
    Ok(())
}
