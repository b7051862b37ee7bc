//! Command-line front end: one subcommand per pipeline stage plus the
//! end-to-end drivers. Exit codes: 0 success, 1 usage error, 2 stage
//! failure.

use std::collections::BTreeMap;
use std::env;
use std::path::PathBuf;
use std::process::ExitCode;

use pronlearn::config::PipelineConfig;
use pronlearn::corpus::{read_corpus, write_corpus};
use pronlearn::error::Error;
use pronlearn::eval::{compare_dictionaries, evaluate_lexicon, MissingPolicy};
use pronlearn::g2p::{
    apply_g2p, entries_from_lexicon, exclude_words, fine_tune, train_g2p, G2pModel, TrainConfig,
};
use pronlearn::lexicon::{read_lexicon, write_lexicon, Lexicon, Pronunciation};
use pronlearn::lexlearn::{
    accept_threshold, em_train, harvest, init_emissions, viterbi_align, write_harvest, Topology,
};
use pronlearn::phonelm::PhoneLm;
use pronlearn::pipeline::{
    render_iteration_table, render_k_table, render_retrain_table, render_sweep_table,
    run_iterations, run_pipeline, run_seed_sweep,
};
use pronlearn::recognizer::{decode_corpus, DecodeConfig, NoiseModel};
use pronlearn::symbol::SymbolTable;
use pronlearn::synthlang::{generate_language, split_seed, write_rules};

const USAGE: &str = "\
pronlearn: pronunciation lexicon learning from phone-level transcripts

USAGE: pronlearn <command> [options]

COMMANDS
  synth-gen      --config F --out-dir D
                 generate a synthetic language: gold lexicon, corpus,
                 rules, and (with run.seed_sizes) nested seed splits
  train-g2p      --config F --data seed.lex --out model [--tag T]
                 train a graphone G2P on a lexicon
  apply-g2p      --config F --model M --corpus C --out gen.lex [--tag T]
                 predict pronunciations for a corpus vocabulary
  train-lm       --config F --corpus C --out phone.lm
                 train the phone n-gram LM on sentence phones
  decode         --config F --corpus C --lm L --out decoded.corpus
                 noisy-channel decode constrained by the phone LM
  learn-lexicon  --config F --corpus decoded --out learned.lex
                 [--k N] [--lm L] [--harvest-out F] [--emissions-out F]
                 boundary discovery, harvesting, and thresholding
  eval           --hyp A --ref GOLD [--policy skip|all-deleted] [--tsv]
                 phone/word error rates of a lexicon vs a reference
  compare        --a A --b B --ref GOLD [--tsv]
                 per-word better/worse/same of two lexicons vs a reference
  pipeline       --config F     full single-pass run into paths.run_dir
  iterate        --config F     self-training over run.iterations passes
  sweep-seeds    --config F     one pipeline per run.seed_sizes entry

Exit codes: 0 success, 1 usage error, 2 stage failure.
";

enum CliError {
    Usage(String),
    Stage(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Stage(e)
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

struct Flags(BTreeMap<String, String>);

/// `--name value` pairs plus valueless boolean switches.
impl Flags {
    fn parse(args: &[String], valued: &[&str], boolean: &[&str]) -> CliResult<Flags> {
        let mut map = BTreeMap::new();
        let mut i = 0;
        while i < args.len() {
            let flag = args[i]
                .strip_prefix("--")
                .ok_or_else(|| CliError::Usage(format!("unexpected argument {:?}", args[i])))?;
            if boolean.contains(&flag) {
                map.insert(flag.to_string(), String::from("true"));
                i += 1;
                continue;
            }
            if !valued.contains(&flag) {
                return Err(CliError::Usage(format!("unknown flag --{flag}")));
            }
            let value = args
                .get(i + 1)
                .ok_or_else(|| CliError::Usage(format!("--{flag} needs a value")))?;
            map.insert(flag.to_string(), value.clone());
            i += 2;
        }
        Ok(Flags(map))
    }

    fn require(&self, name: &str) -> CliResult<&str> {
        self.0
            .get(name)
            .map(|s| s.as_str())
            .ok_or_else(|| CliError::Usage(format!("missing required flag --{name}")))
    }

    fn get(&self, name: &str) -> Option<&str> {
        self.0.get(name).map(|s| s.as_str())
    }

    fn is_set(&self, name: &str) -> bool {
        self.0.contains_key(name)
    }
}

fn load_config(flags: &Flags) -> CliResult<PipelineConfig> {
    let path = flags.require("config")?;
    PipelineConfig::parse_file(path).map_err(|e| CliError::Usage(e.to_string()))
}

fn multilingual_entries(
    cfg: &PipelineConfig,
    table: &mut SymbolTable,
    target_vocab: &std::collections::BTreeSet<String>,
) -> CliResult<Vec<pronlearn::g2p::TaggedEntry>> {
    let mut out = Vec::new();
    for (tag, path) in &cfg.multilingual {
        let lex = read_lexicon(table, path)?;
        let mut entries = entries_from_lexicon(table, &lex, tag)?;
        if cfg.exclude_target_vocab {
            entries = exclude_words(entries, target_vocab);
        }
        out.extend(entries);
    }
    Ok(out)
}

fn cmd_synth_gen(flags: &Flags) -> CliResult<()> {
    let cfg = load_config(flags)?;
    let out_dir = PathBuf::from(flags.require("out-dir")?);
    std::fs::create_dir_all(&out_dir).map_err(|e| Error::io(&out_dir, e))?;
    let mut spec = cfg.synth.clone();
    spec.seed = cfg.seed;
    let mut table = SymbolTable::new();
    let lang = generate_language(&mut table, &spec)?;
    write_lexicon(&lang.gold_lexicon, &table, out_dir.join("gold.lex"))?;
    write_corpus(&lang.corpus, &table, out_dir.join("corpus.txt"))?;
    write_rules(&lang.rules, out_dir.join("rules.tsv"))?;
    println!(
        "generated {} words, {} sentences, {} irregular words",
        lang.gold_lexicon.word_count(),
        lang.corpus.len(),
        lang.irregular_words.len()
    );
    if !cfg.seed_sizes.is_empty() {
        let (seeds, test) = split_seed(&lang.gold_lexicon, &lang.corpus, &cfg.seed_sizes)?;
        let seed_dir = out_dir.join("seeds");
        std::fs::create_dir_all(&seed_dir).map_err(|e| Error::io(&seed_dir, e))?;
        for (size, seed) in cfg.seed_sizes.iter().zip(&seeds) {
            write_lexicon(seed, &table, seed_dir.join(format!("size{size}.lex")))?;
        }
        write_lexicon(&test, &table, out_dir.join("test.lex"))?;
        println!(
            "seed splits {:?} plus {}-word test set",
            cfg.seed_sizes,
            test.word_count()
        );
    }
    Ok(())
}

fn cmd_train_g2p(flags: &Flags) -> CliResult<()> {
    let cfg = load_config(flags)?;
    let mut table = SymbolTable::new();
    let data = read_lexicon(&mut table, flags.require("data")?)?;
    let tag = flags
        .get("tag")
        .unwrap_or(&cfg.synth.language_tag)
        .to_string();
    let entries = entries_from_lexicon(&mut table, &data, &tag)?;
    let target_vocab = entries
        .iter()
        .map(|e| e.word.surface().to_string())
        .collect();
    let multi = multilingual_entries(&cfg, &mut table, &target_vocab)?;
    let tc = TrainConfig {
        order: cfg.g2p_order,
        em_iters: cfg.g2p_em_iters,
        em_tol: 1e-4,
        seed: cfg.seed,
    };
    let model = if multi.is_empty() {
        train_g2p(&table, &entries, &tc)?
    } else {
        fine_tune(&table, &multi, &entries, cfg.lambda, &tc)?
    };
    let out = flags.require("out")?;
    model.save(out)?;
    println!(
        "trained on {} entries ({} graphones); wrote {out}",
        entries.len(),
        model.graphones().len()
    );
    Ok(())
}

fn cmd_apply_g2p(flags: &Flags) -> CliResult<()> {
    let cfg = load_config(flags)?;
    let mut table = SymbolTable::new();
    let model = G2pModel::load(flags.require("model")?)?;
    let corpus = read_corpus(&mut table, flags.require("corpus")?)?;
    let tag = flags.get("tag").unwrap_or(&corpus.language_tag).to_string();
    let vocab = corpus.vocabulary();
    let (lex, skipped) = apply_g2p(&model, &mut table, &tag, &vocab, cfg.beam);
    let out = flags.require("out")?;
    write_lexicon(&lex, &table, out)?;
    println!(
        "{} words predicted, {} skipped; wrote {out}",
        lex.word_count(),
        skipped.len()
    );
    for s in skipped.iter().take(10) {
        eprintln!("skipped {}: {}", s.word, s.reason);
    }
    Ok(())
}

fn cmd_train_lm(flags: &Flags) -> CliResult<()> {
    let cfg = load_config(flags)?;
    let mut table = SymbolTable::new();
    let corpus = read_corpus(&mut table, flags.require("corpus")?)?;
    let sequences: Vec<Pronunciation> = corpus
        .sentences
        .iter()
        .filter_map(|s| s.phones.clone())
        .collect();
    let lm = PhoneLm::train(&table, &sequences, cfg.lm_order)?;
    let ppl = lm.perplexity(&table, &sequences)?;
    let out = flags.require("out")?;
    lm.save(out)?;
    println!(
        "order-{} LM over {} phonemes, train perplexity {ppl:.2}; wrote {out}",
        lm.order(),
        lm.vocab().len()
    );
    Ok(())
}

fn cmd_decode(flags: &Flags) -> CliResult<()> {
    let cfg = load_config(flags)?;
    let mut table = SymbolTable::new();
    let corpus = read_corpus(&mut table, flags.require("corpus")?)?;
    let lm = PhoneLm::load(flags.require("lm")?)?;
    let inventory: Vec<_> = {
        let mut set = std::collections::BTreeSet::new();
        for s in &corpus.sentences {
            if let Some(p) = &s.phones {
                set.extend(p.iter().copied());
            }
        }
        set.into_iter().collect()
    };
    let nm = NoiseModel::new(&table, cfg.p_sub, cfg.p_ins, cfg.p_del, cfg.seed, inventory)?;
    let dc = DecodeConfig {
        n_candidates: cfg.n_candidates,
    };
    let decoded = decode_corpus(&nm, &dc, &lm, &table, &corpus)?;
    let out = flags.require("out")?;
    write_corpus(&decoded, &table, out)?;
    println!("decoded {} sentences; wrote {out}", decoded.len());
    Ok(())
}

fn cmd_learn_lexicon(flags: &Flags) -> CliResult<()> {
    let cfg = load_config(flags)?;
    let mut table = SymbolTable::new();
    let corpus = read_corpus(&mut table, flags.require("corpus")?)?;
    let lm = match flags.get("lm") {
        Some(path) => Some(PhoneLm::load(path)?),
        None => None,
    };
    let k: u64 = flags
        .get("k")
        .map(|v| {
            v.parse()
                .map_err(|_| CliError::Usage(format!("bad --k {v:?}")))
        })
        .transpose()?
        .unwrap_or(1);
    let mut graphemes = std::collections::BTreeSet::new();
    let mut phonemes = std::collections::BTreeSet::new();
    for s in &corpus.sentences {
        for w in &s.words {
            graphemes.extend(w.graphemes().iter().copied());
        }
        if let Some(p) = &s.phones {
            phonemes.extend(p.iter().copied());
        }
    }
    let graphemes: Vec<_> = graphemes.into_iter().collect();
    let phonemes: Vec<_> = phonemes.into_iter().collect();
    let emissions = init_emissions(&table, &graphemes, &phonemes)?;
    let topo = Topology {
        a_loop: cfg.a_loop,
        a_adv: cfg.a_adv,
        a_skip: cfg.a_skip,
        enter_first: cfg.enter_first,
        enter_second: cfg.enter_second,
    };
    let (emissions, topo, report) =
        em_train(&table, &corpus, emissions, topo, cfg.hmm_em_iters, cfg.hmm_tol)?;
    println!(
        "EM: {} iterations, final log-likelihood {:.2}, {} skipped sentences",
        report.iterations,
        report.loglik_trace.last().copied().unwrap_or(f64::NAN),
        report.skipped_sentences.len()
    );
    if let Some(path) = flags.get("emissions-out") {
        std::fs::write(path, emissions.format(&table)).map_err(|e| Error::io(path, e))?;
    }
    let alignments: Vec<_> = corpus
        .sentences
        .iter()
        .map(|s| {
            viterbi_align(&table, &s.words, s.phones.as_ref().unwrap(), &emissions, &topo).ok()
        })
        .collect();
    let counts = harvest(&corpus, &alignments);
    if let Some(path) = flags.get("harvest-out") {
        write_harvest(&counts, &table, path)?;
    }
    let learned = accept_threshold(&table, &counts, k, lm.as_ref())?;
    let out = flags.require("out")?;
    write_lexicon(&learned, &table, out)?;
    println!(
        "harvested {} words ({} empty spans); {} words pass k={k}; wrote {out}",
        counts.word_count(),
        counts.empty_spans,
        learned.word_count()
    );
    Ok(())
}

fn read_pair(flags: &Flags, a: &str, b: &str) -> CliResult<(SymbolTable, Lexicon, Lexicon)> {
    let mut table = SymbolTable::new();
    let first = read_lexicon(&mut table, flags.require(a)?)?;
    let second = read_lexicon(&mut table, flags.require(b)?)?;
    Ok((table, first, second))
}

fn cmd_eval(flags: &Flags) -> CliResult<()> {
    let (_table, hyp, reference) = read_pair(flags, "hyp", "ref")?;
    let policy = match flags.get("policy").unwrap_or("skip") {
        "skip" => MissingPolicy::Skip,
        "all-deleted" => MissingPolicy::AllDeleted,
        other => return Err(CliError::Usage(format!("bad --policy {other:?}"))),
    };
    let report = evaluate_lexicon(&hyp, &reference, policy)?;
    if flags.is_set("tsv") {
        print!("{}", report.to_tsv());
    } else {
        println!(
            "PER {:.2}%  WER {:.2}%  ({} words, {} ref phones, {} edits, {} skipped)",
            report.per * 100.0,
            report.wer * 100.0,
            report.word_count,
            report.total_ref_phones,
            report.total_edits,
            report.skipped_words
        );
    }
    Ok(())
}

fn cmd_compare(flags: &Flags) -> CliResult<()> {
    let mut table = SymbolTable::new();
    let a = read_lexicon(&mut table, flags.require("a")?)?;
    let b = read_lexicon(&mut table, flags.require("b")?)?;
    let reference = read_lexicon(&mut table, flags.require("ref")?)?;
    let report = compare_dictionaries(&a, &b, &reference)?;
    if flags.is_set("tsv") {
        print!("{}", report.to_tsv());
    } else {
        println!(
            "{} words: better {} ({:.2}%), worse {} ({:.2}%), same {} ({:.2}%)",
            report.num_words,
            report.better,
            report.better_pct(),
            report.worse,
            report.worse_pct(),
            report.same,
            report.same_pct()
        );
    }
    Ok(())
}

fn cmd_pipeline(flags: &Flags) -> CliResult<()> {
    let cfg = load_config(flags)?;
    let manifest = run_pipeline(&cfg)?;
    println!("run dir: {}", cfg.run_dir.display());
    println!();
    print!("{}", render_k_table(&manifest));
    println!();
    print!("{}", render_retrain_table(&manifest));
    Ok(())
}

fn cmd_iterate(flags: &Flags) -> CliResult<()> {
    let cfg = load_config(flags)?;
    let manifest = run_iterations(&cfg)?;
    println!("run dir: {}", cfg.run_dir.display());
    println!();
    if cfg.iterations == 1 {
        print!("{}", render_retrain_table(&manifest));
    } else {
        print!("{}", render_iteration_table(&manifest));
    }
    Ok(())
}

fn cmd_sweep(flags: &Flags) -> CliResult<()> {
    let cfg = load_config(flags)?;
    let manifest = run_seed_sweep(&cfg)?;
    println!("run dir: {}", cfg.run_dir.display());
    println!();
    print!("{}", render_sweep_table(&manifest));
    Ok(())
}

fn dispatch(args: &[String]) -> CliResult<()> {
    let Some(command) = args.first() else {
        return Err(CliError::Usage("missing command".into()));
    };
    let rest = &args[1..];
    match command.as_str() {
        "synth-gen" => cmd_synth_gen(&Flags::parse(rest, &["config", "out-dir"], &[])?),
        "train-g2p" => cmd_train_g2p(&Flags::parse(rest, &["config", "data", "out", "tag"], &[])?),
        "apply-g2p" => cmd_apply_g2p(&Flags::parse(
            rest,
            &["config", "model", "corpus", "out", "tag"],
            &[],
        )?),
        "train-lm" => cmd_train_lm(&Flags::parse(rest, &["config", "corpus", "out"], &[])?),
        "decode" => cmd_decode(&Flags::parse(rest, &["config", "corpus", "lm", "out"], &[])?),
        "learn-lexicon" => cmd_learn_lexicon(&Flags::parse(
            rest,
            &["config", "corpus", "out", "k", "lm", "harvest-out", "emissions-out"],
            &[],
        )?),
        "eval" => cmd_eval(&Flags::parse(rest, &["hyp", "ref", "policy"], &["tsv"])?),
        "compare" => cmd_compare(&Flags::parse(rest, &["a", "b", "ref"], &["tsv"])?),
        "pipeline" => cmd_pipeline(&Flags::parse(rest, &["config"], &[])?),
        "iterate" => cmd_iterate(&Flags::parse(rest, &["config"], &[])?),
        "sweep-seeds" => cmd_sweep(&Flags::parse(rest, &["config"], &[])?),
        "-h" | "--help" | "help" => {
            print!("{USAGE}");
            Ok(())
        }
        other => Err(CliError::Usage(format!("unknown command {other:?}"))),
    }
}

fn main() -> ExitCode {
    let args: Vec<String> = env::args().skip(1).collect();
    match dispatch(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("usage error: {msg}\n");
            eprint!("{USAGE}");
            ExitCode::from(1)
        }
        Err(CliError::Stage(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
