//! The whole loop on a generated language: seed G2P -> transcripts ->
//! phone LM -> noisy decode -> boundary discovery -> learned lexicon ->
//! retrained G2P, with Table-style summaries.
//!
//! ```bash
//! cargo run --example full_pipeline
//! ```

use std::fs;

use pronlearn::config::PipelineConfig;
use pronlearn::corpus::write_corpus;
use pronlearn::lexicon::write_lexicon;
use pronlearn::pipeline::{render_k_table, render_retrain_table, run_pipeline};
use pronlearn::symbol::SymbolTable;
use pronlearn::synthlang::{generate_language, split_seed, SynthSpec};

fn main() -> pronlearn::Result<()> {
    let dir = std::env::temp_dir().join("pronlearn_example_pipeline");
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();

    // a small language: 500 words, 4000 sentences, 5% irregular
    let spec = SynthSpec::new(500, 4000, 7);
    let mut table = SymbolTable::new();
    let lang = generate_language(&mut table, &spec)?;
    let (seeds, _) = split_seed(&lang.gold_lexicon, &lang.corpus, &[150])?;
    write_lexicon(&seeds[0], &table, dir.join("seed.lex"))?;
    write_corpus(&lang.corpus, &table, dir.join("corpus.txt"))?;
    write_lexicon(&lang.gold_lexicon, &table, dir.join("gold.lex"))?;
    println!(
        "language: {} words ({} irregular), corpus {} sentences, seed 150",
        lang.gold_lexicon.word_count(),
        lang.irregular_words.len(),
        lang.corpus.len()
    );

    let mut cfg = PipelineConfig {
        seed_lexicon: dir.join("seed.lex"),
        corpus: dir.join("corpus.txt"),
        gold_lexicon: dir.join("gold.lex"),
        run_dir: dir.join("run"),
        ..PipelineConfig::default()
    };
    cfg.seed = 7;
    cfg.k_list = vec![1, 2, 4];
    let manifest = run_pipeline(&cfg)?;

    println!("\nlearned dictionaries vs the baseline G2P's output:");
    print!("{}", render_k_table(&manifest));
    println!("\nretrained G2P on held-out words:");
    print!("{}", render_retrain_table(&manifest));
    println!("artifacts under {}", cfg.run_dir.display());
    Ok(())
}
