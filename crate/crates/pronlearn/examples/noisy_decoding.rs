//! Simulated phone recognition: corrupt gold phoneme sequences through a
//! seeded noisy channel and let the phone LM pick among candidates,
//! measuring how much LM-guided selection recovers.
//!
//! ```bash
//! cargo run --example noisy_decoding
//! ```

use pronlearn::eval::edit_distance;
use pronlearn::lexicon::Pronunciation;
use pronlearn::phonelm::PhoneLm;
use pronlearn::recognizer::{decode_sentence, DecodeConfig, NoiseModel};
use pronlearn::rng::SplitRng;
use pronlearn::symbol::SymbolTable;

fn main() -> pronlearn::Result<()> {
    let mut table = SymbolTable::new();
    // gold sentences drawn from a small repetitive phonotactics
    let mut gold = Vec::new();
    for i in 0..300u64 {
        let mut rng = SplitRng::for_stream(7, i);
        let len = rng.range(8, 16);
        let motif = ["p", "a", "t", "o", "k", "a"];
        let seq: Vec<&str> = (0..len).map(|j| motif[(j + i as usize) % motif.len()]).collect();
        gold.push(Pronunciation::parse(&mut table, &seq.join(" "))?);
    }
    let lm = PhoneLm::train(&table, &gold, 4)?;
    let inventory: Vec<_> = lm
        .vocab()
        .iter()
        .map(|t| table.intern(t))
        .collect::<Result<_, _>>()?;
    let nm = NoiseModel::new(&table, 0.20, 0.05, 0.05, 99, inventory)?;

    println!("channel: 20% substitutions, 5% insertions, 5% deletions");
    println!("{:>12} {:>12} {:>10}", "candidates", "mean edits", "PER");
    for n_candidates in [1usize, 2, 4, 8, 16] {
        let cfg = DecodeConfig { n_candidates };
        let mut edits = 0usize;
        let mut phones = 0usize;
        for (i, g) in gold.iter().enumerate() {
            let mut rng = SplitRng::for_stream(99, i as u64);
            let decoded = decode_sentence(&nm, &cfg, &lm, &table, g, &mut rng);
            edits += edit_distance(&decoded, g);
            phones += g.len();
        }
        println!(
            "{:>12} {:>12.2} {:>9.2}%",
            n_candidates,
            edits as f64 / gold.len() as f64,
            100.0 * edits as f64 / phones as f64
        );
    }
    println!("\nmore candidates -> the LM steers output back toward plausible strings");
    Ok(())
}
