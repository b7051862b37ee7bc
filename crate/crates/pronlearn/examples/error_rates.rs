//! Score dictionaries: phone/word error rates and the per-word
//! better/worse/same comparison of two dictionaries against a reference.
//!
//! ```bash
//! cargo run --example error_rates
//! ```

use pronlearn::eval::{compare_dictionaries, evaluate_lexicon, MissingPolicy};
use pronlearn::lexicon::{Lexicon, LexiconEntry, Pronunciation, Provenance};
use pronlearn::symbol::SymbolTable;

fn lexicon(table: &mut SymbolTable, entries: &[(&str, &str)]) -> pronlearn::Result<Lexicon> {
    let mut lex = Lexicon::new();
    for (word, pron) in entries {
        let pron = Pronunciation::parse(table, pron)?;
        lex.insert(
            table,
            word,
            LexiconEntry {
                pron,
                provenance: Provenance::G2p,
                count: 0,
            },
        )?;
    }
    Ok(lex)
}

fn main() -> pronlearn::Result<()> {
    let mut table = SymbolTable::new();
    let gold = lexicon(
        &mut table,
        &[
            ("kato", "k a t o"),
            ("sira", "s i r a"),
            ("nuq", "n u k"),
            ("pola", "p o l a"),
        ],
    )?;
    let system_a = lexicon(
        &mut table,
        &[
            ("kato", "k a t o"),
            ("sira", "s i r a"),
            ("nuq", "n u k i"), // one insertion
            ("pola", "p o l a"),
        ],
    )?;
    let system_b = lexicon(
        &mut table,
        &[
            ("kato", "k a d o"),  // one substitution
            ("sira", "s r a"),    // one deletion
            ("nuq", "n u k"),
            ("pola", "p o l a"),
        ],
    )?;

    for (name, hyp) in [("system A", &system_a), ("system B", &system_b)] {
        let report = evaluate_lexicon(hyp, &gold, MissingPolicy::Skip)?;
        println!(
            "{name}: PER {:.2}% WER {:.2}% ({} edits over {} reference phones)",
            report.per * 100.0,
            report.wer * 100.0,
            report.total_edits,
            report.total_ref_phones
        );
    }

    let cmp = compare_dictionaries(&system_a, &system_b, &gold)?;
    println!(
        "\nA vs B on {} shared words: better {} ({:.1}%), worse {} ({:.1}%), same {} ({:.1}%)",
        cmp.num_words,
        cmp.better,
        cmp.better_pct(),
        cmp.worse,
        cmp.worse_pct(),
        cmp.same,
        cmp.same_pct()
    );
    assert_eq!(cmp.better + cmp.worse + cmp.same, cmp.num_words);
    Ok(())
}
