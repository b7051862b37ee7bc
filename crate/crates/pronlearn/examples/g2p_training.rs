//! Train a graphone G2P on a tiny lexicon and predict pronunciations.
//!
//! ```bash
//! cargo run --example g2p_training
//! ```

use pronlearn::g2p::{train_g2p, TaggedEntry, TrainConfig};
use pronlearn::lexicon::{Pronunciation, Word};
use pronlearn::symbol::SymbolTable;

fn main() -> pronlearn::Result<()> {
    let mut table = SymbolTable::new();
    // a miniature English-like lexicon: "ck" behaves like a digraph,
    // "x" expands to two phonemes, final "e" is silent
    let data = [
        ("back", "b a k"),
        ("rack", "r a k"),
        ("rock", "r o k"),
        ("sock", "s o k"),
        ("sax", "s a k s"),
        ("box", "b o k s"),
        ("robe", "r o b"),
        ("bone", "b o n"),
        ("nose", "n o s"),
        ("san", "s a n"),
        ("nab", "n a b"),
        ("bar", "b a r"),
    ];
    let mut entries = Vec::new();
    for (word, pron) in data {
        entries.push(TaggedEntry::new(
            "en",
            Word::from_surface(&mut table, word)?,
            Pronunciation::parse(&mut table, pron)?,
        ));
    }
    let model = train_g2p(&table, &entries, &TrainConfig::default())?;
    println!(
        "trained a joint-sequence model with {} graphones over {} graphemes",
        model.graphones().len(),
        model.grapheme_set().len()
    );

    println!("\npredictions for unseen words:");
    for word in ["rax", "bock", "snob", "care"] {
        let w = Word::from_surface(&mut table, word)?;
        match model.predict(&mut table, "en", &w, 8) {
            Ok(pron) => println!("  {word:8} -> {}", pron.display(&table)),
            Err(e) => println!("  {word:8} -> ({e})"),
        }
    }

    // words seen in training reproduce their pronunciations
    println!("\ntraining words round-trip:");
    for (word, want) in data.iter().take(4) {
        let w = Word::from_surface(&mut table, word)?;
        let got = model.predict(&mut table, "en", &w, 8)?;
        println!("  {word:8} -> {} (expected {want})", got.display(&table));
    }
    Ok(())
}
