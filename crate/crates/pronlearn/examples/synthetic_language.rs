//! Generate a synthetic language and look inside: rules, gold lexicon,
//! Zipf-shaped corpus frequencies, nested seed splits.
//!
//! ```bash
//! cargo run --example synthetic_language
//! ```

use pronlearn::symbol::SymbolTable;
use pronlearn::synthlang::{generate_language, split_seed, word_frequencies, SynthSpec};

fn main() -> pronlearn::Result<()> {
    let mut spec = SynthSpec::new(400, 3000, 5);
    spec.irregularity_rate = 0.08;
    let mut table = SymbolTable::new();
    let lang = generate_language(&mut table, &spec)?;

    println!("rules (single graphemes, then digraphs):");
    for (g, ps) in lang.rules.singles.iter().take(6) {
        println!("  {g} -> {}", ps.join(" "));
    }
    for (g, ps) in &lang.rules.digraphs {
        println!("  {g} -> {}  (digraph)", ps.join(" "));
    }

    println!("\nsample lexicon entries:");
    for (word, entry) in lang.gold_lexicon.iter().take(6) {
        let regular = lang.rules.derive(word).map(|d| d.join(" "));
        let mark = match regular {
            Some(d) if d == entry.pron.display(&table) => "regular",
            _ => "irregular",
        };
        println!("  {word:10} [{}] ({mark})", entry.pron.display(&table));
    }
    println!(
        "\n{} of {} words are irregular",
        lang.irregular_words.len(),
        lang.gold_lexicon.word_count()
    );

    let freq = word_frequencies(&lang.corpus);
    let mut by_freq: Vec<(&String, &u64)> = freq.iter().collect();
    by_freq.sort_by(|a, b| b.1.cmp(a.1).then_with(|| a.0.cmp(b.0)));
    println!("\nmost frequent corpus words (Zipf exponent {}):", spec.zipf_exponent);
    for (w, c) in by_freq.iter().take(5) {
        println!("  {w:10} x{c}");
    }

    let (seeds, test) = split_seed(&lang.gold_lexicon, &lang.corpus, &[25, 100])?;
    println!(
        "\nseed splits: {} nested in {} words by corpus frequency; {} held-out test words",
        seeds[0].word_count(),
        seeds[1].word_count(),
        test.word_count()
    );
    Ok(())
}
