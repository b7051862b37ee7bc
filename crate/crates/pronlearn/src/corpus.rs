//! Sentence corpora and their on-disk format.
//!
//! A corpus file starts with a `#lang=<tag>` header. Each following
//! non-comment line is one sentence: space-separated words, optionally
//! followed by a TAB and the sentence-level phoneme sequence:
//!
//! ```text
//! #lang=xx
//! ab ba<TAB>A B B A
//! ab ba
//! ```
//!
//! A trailing TAB with nothing after it means "phones present but empty",
//! which is distinct from a line with no TAB (no phoneme annotation).

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::lexicon::{Pronunciation, Word};
use crate::symbol::SymbolTable;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sentence {
    pub words: Vec<Word>,
    pub phones: Option<Pronunciation>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Corpus {
    pub language_tag: String,
    pub sentences: Vec<Sentence>,
}

impl Corpus {
    pub fn new(language_tag: impl Into<String>) -> Self {
        Corpus {
            language_tag: language_tag.into(),
            sentences: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    /// Distinct word surfaces, sorted.
    pub fn vocabulary(&self) -> Vec<&Word> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for s in &self.sentences {
            for w in &s.words {
                if seen.insert(w.surface()) {
                    out.push(w);
                }
            }
        }
        out.sort_by(|a, b| a.surface().cmp(b.surface()));
        out
    }
}

pub fn read_corpus(table: &mut SymbolTable, path: impl AsRef<Path>) -> Result<Corpus> {
    let path = path.as_ref();
    let data = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = data.lines().enumerate();
    let tag = loop {
        match lines.next() {
            Some((_, "")) => continue,
            Some((_, line)) if line.starts_with("#lang=") => {
                let tag = &line["#lang=".len()..];
                if tag.is_empty() || tag.chars().any(char::is_whitespace) {
                    return Err(Error::parse(path, 1, format!("bad language tag {tag:?}")));
                }
                break tag.to_string();
            }
            Some((n, line)) => {
                return Err(Error::parse(
                    path,
                    n + 1,
                    format!("expected #lang=<tag> header, found {line:?}"),
                ))
            }
            None => return Err(Error::parse(path, 1, "missing #lang=<tag> header")),
        }
    };
    let mut corpus = Corpus::new(tag);
    for (lineno, line) in lines {
        let lineno = lineno + 1;
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (word_part, phone_part) = match line.split_once('\t') {
            Some((w, p)) => (w, Some(p)),
            None => (line, None),
        };
        let mut words = Vec::new();
        for tok in word_part.split(' ') {
            if tok.is_empty() {
                return Err(Error::parse(path, lineno, "empty word field"));
            }
            words.push(
                Word::from_surface(table, tok)
                    .map_err(|e| Error::parse(path, lineno, e.to_string()))?,
            );
        }
        if words.is_empty() {
            return Err(Error::parse(path, lineno, "empty sentence"));
        }
        let phones = match phone_part {
            None => None,
            Some(p) => Some(
                Pronunciation::parse(table, p)
                    .map_err(|e| Error::parse(path, lineno, e.to_string()))?,
            ),
        };
        corpus.sentences.push(Sentence { words, phones });
    }
    Ok(corpus)
}

pub fn format_corpus(corpus: &Corpus, table: &SymbolTable) -> String {
    let mut out = String::new();
    out.push_str("#lang=");
    out.push_str(&corpus.language_tag);
    out.push('\n');
    for s in &corpus.sentences {
        let words: Vec<&str> = s.words.iter().map(|w| w.surface()).collect();
        out.push_str(&words.join(" "));
        if let Some(p) = &s.phones {
            out.push('\t');
            out.push_str(&p.display(table));
        }
        out.push('\n');
    }
    out
}

pub fn write_corpus(corpus: &Corpus, table: &SymbolTable, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, format_corpus(corpus, table)).map_err(|e| Error::io(path, e))
}
