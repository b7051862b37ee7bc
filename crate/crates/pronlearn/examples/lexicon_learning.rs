//! Harvest pronunciations from aligned sentences and apply acceptance
//! thresholds: higher k keeps fewer, more reliable entries.
//!
//! ```bash
//! cargo run --example lexicon_learning
//! ```

use pronlearn::lexicon::Pronunciation;
use pronlearn::lexlearn::{accept_threshold, HarvestCounts};
use pronlearn::symbol::SymbolTable;

fn main() -> pronlearn::Result<()> {
    let mut table = SymbolTable::new();
    // simulated harvest: "kato" decodes consistently, "sira" mostly
    // consistently, "nuq" only once and noisily
    let mut counts = HarvestCounts::default();
    let mut add = |table: &mut SymbolTable, word: &str, pron: &str, times: usize| {
        for _ in 0..times {
            counts.add(word, Pronunciation::parse(table, pron).unwrap());
        }
    };
    add(&mut table, "kato", "k a t o", 9);
    add(&mut table, "kato", "k a d o", 1);
    add(&mut table, "sira", "s i r a", 4);
    add(&mut table, "sira", "s i a", 2);
    add(&mut table, "nuq", "n u k i", 1);

    println!("harvest:");
    for word in counts.words() {
        for (pron, c) in counts.get(word).unwrap() {
            println!("  {word:6} [{}] x{c}", pron.display(&table));
        }
    }

    for k in [1u64, 2, 4, 6, 10] {
        let lex = accept_threshold(&table, &counts, k, None)?;
        let entries: Vec<String> = lex
            .iter()
            .map(|(w, e)| format!("{w}=[{}] (count {})", e.pron.display(&table), e.count))
            .collect();
        println!("k={k:<2} -> {} words: {}", lex.word_count(), entries.join(", "));
    }
    println!("\neach word keeps only its modal pronunciation; raising k trades");
    println!("coverage for confidence");
    Ok(())
}
