//! Pool multilingual pronunciation data and fine-tune toward a target
//! language with count weighting.
//!
//! ```bash
//! cargo run --example multilingual_fine_tune
//! ```

use pronlearn::g2p::{fine_tune, train_g2p, TaggedEntry, TrainConfig};
use pronlearn::lexicon::{Pronunciation, Word};
use pronlearn::symbol::SymbolTable;

fn entries(
    table: &mut SymbolTable,
    tag: &str,
    data: &[(&str, &str)],
) -> pronlearn::Result<Vec<TaggedEntry>> {
    data.iter()
        .map(|(w, p)| {
            Ok(TaggedEntry::new(
                tag,
                Word::from_surface(table, w)?,
                Pronunciation::parse(table, p)?,
            ))
        })
        .collect()
}

fn main() -> pronlearn::Result<()> {
    let mut table = SymbolTable::new();
    // a well-resourced donor language with regular spelling
    let donor = entries(
        &mut table,
        "aa",
        &[
            ("mala", "m a l a"),
            ("lama", "l a m a"),
            ("sol", "s o l"),
            ("los", "l o s"),
            ("masa", "m a s a"),
            ("sal", "s a l"),
            ("oso", "o s o"),
            ("mas", "m a s"),
        ],
    )?;
    // a small target language that disagrees on the letter "s"
    let target = entries(
        &mut table,
        "bb",
        &[
            ("sol", "Z o l"),
            ("sal", "Z a l"),
            ("mas", "m a Z"),
            ("lomo", "l o m o"),
            ("asa", "a Z a"),
            ("malo", "m a l o"),
        ],
    )?;

    let cfg = TrainConfig::default();
    let pooled = fine_tune(&table, &donor, &target, 1.0, &cfg)?;
    let tuned = fine_tune(&table, &donor, &target, 10.0, &cfg)?;
    let target_only = train_g2p(&table, &target, &cfg)?;

    println!("word 'sala' under tag bb, three training regimes:");
    for (name, model) in [
        ("pooled (lambda=1)", &pooled),
        ("fine-tuned (lambda=10)", &tuned),
        ("target only", &target_only),
    ] {
        match model.predict_texts("bb", &["s", "a", "l", "a"], 8) {
            Ok(pron) => println!("  {name:22} -> {}", pron.join(" ")),
            Err(e) => println!("  {name:22} -> ({e})"),
        }
    }
    println!("\nthe donor language keeps its own 's':");
    let pron = tuned.predict_texts("aa", &["s", "a", "l", "a"], 8)?;
    println!("  fine-tuned, tag aa     -> {}", pron.join(" "));
    Ok(())
}
