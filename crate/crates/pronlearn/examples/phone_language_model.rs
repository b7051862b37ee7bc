//! Train a phone-level n-gram LM and inspect probabilities and
//! perplexity.
//!
//! ```bash
//! cargo run --example phone_language_model
//! ```

use pronlearn::lexicon::Pronunciation;
use pronlearn::phonelm::PhoneLm;
use pronlearn::symbol::SymbolTable;

fn main() -> pronlearn::Result<()> {
    let mut table = SymbolTable::new();
    let sentences = [
        "k a t s a t",
        "k a t s i t s",
        "s a t k a t",
        "s i t s a t",
        "k i t k a t",
    ];
    let seqs: Vec<Pronunciation> = sentences
        .iter()
        .map(|s| Pronunciation::parse(&mut table, s))
        .collect::<Result<_, _>>()?;
    let lm = PhoneLm::train(&table, &seqs, 3)?;
    println!(
        "order-{} Witten-Bell LM over {} phonemes",
        lm.order(),
        lm.vocab().len()
    );

    let k = table.get("k").unwrap();
    let a = table.get("a").unwrap();
    let t = table.get("t").unwrap();
    let s = table.get("s").unwrap();
    println!("\nconditionals after history [k a]:");
    for (label, next) in [("t", t), ("s", s), ("k", k)] {
        println!("  P({label} | k a) = {:.4}", lm.prob(&table, &[k, a], Some(next)));
    }

    println!("\nsequence scores (log probability):");
    for text in ["k a t", "t t t t", "k a q"] {
        let seq = Pronunciation::parse(&mut table, text)?;
        println!("  [{text}] -> {:.3}", lm.logprob(&table, &seq));
    }

    let ppl = lm.perplexity(&table, &seqs)?;
    println!("\ntraining perplexity: {ppl:.2}");
    Ok(())
}
