//! Words, pronunciations, and the pronunciation lexicon with its on-disk
//! format.
//!
//! Lexicon files are UTF-8 TSV, one entry per line:
//!
//! ```text
//! word<TAB>phoneme phoneme ...[<TAB>provenance[:count]]
//! ```
//!
//! Lines starting with `#` are comments. The third field records where an
//! entry came from (`seed`, `g2p`, `learned`) plus an optional observation
//! count; a missing field means `seed`. Serialization is canonical: entries
//! sorted by word then pronunciation in byte order, so two lexicons with
//! equal entry sets produce identical bytes.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::symbol::{Symbol, SymbolTable};

/// A written word: its surface form plus one grapheme symbol per Unicode
/// scalar.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Word {
    surface: String,
    graphemes: Vec<Symbol>,
}

impl Word {
    pub fn from_surface(table: &mut SymbolTable, surface: &str) -> Result<Self> {
        if surface.is_empty() {
            return Err(Error::InvalidSymbol(surface.to_string()));
        }
        let mut graphemes = Vec::with_capacity(surface.chars().count());
        for ch in surface.chars() {
            graphemes.push(table.intern(&ch.to_string())?);
        }
        Ok(Word {
            surface: surface.to_string(),
            graphemes,
        })
    }

    pub fn surface(&self) -> &str {
        &self.surface
    }

    pub fn graphemes(&self) -> &[Symbol] {
        &self.graphemes
    }

    pub fn len(&self) -> usize {
        self.graphemes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.graphemes.is_empty()
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.surface)
    }
}

/// A phoneme sequence. Empty pronunciations may exist transiently (an
/// alignment can assign a word no phonemes) but are never serialized into a
/// lexicon.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Pronunciation(pub Vec<Symbol>);

impl Pronunciation {
    pub fn parse(table: &mut SymbolTable, text: &str) -> Result<Self> {
        let mut syms = Vec::new();
        for tok in text.split_whitespace() {
            syms.push(table.intern(tok)?);
        }
        Ok(Pronunciation(syms))
    }

    pub fn display(&self, table: &SymbolTable) -> String {
        table.join(&self.0)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Symbol> {
        self.0.iter()
    }
}

impl std::ops::Deref for Pronunciation {
    type Target = [Symbol];
    fn deref(&self) -> &[Symbol] {
        &self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Provenance {
    Seed,
    G2p,
    Learned,
}

impl Provenance {
    fn as_str(self) -> &'static str {
        match self {
            Provenance::Seed => "seed",
            Provenance::G2p => "g2p",
            Provenance::Learned => "learned",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "seed" => Some(Provenance::Seed),
            "g2p" => Some(Provenance::G2p),
            "learned" => Some(Provenance::Learned),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LexiconEntry {
    pub pron: Pronunciation,
    pub provenance: Provenance,
    pub count: u64,
}

/// Word -> pronunciation(s) map with provenance.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Lexicon {
    entries: BTreeMap<String, Vec<LexiconEntry>>,
}

impl Lexicon {
    pub fn new() -> Self {
        Self::default()
    }

    /// Insert an entry, keeping per-word entries sorted by pronunciation
    /// text. Duplicate `(word, pronunciation)` pairs are rejected.
    pub fn insert(
        &mut self,
        table: &SymbolTable,
        word: &str,
        entry: LexiconEntry,
    ) -> Result<()> {
        let prons = self.entries.entry(word.to_string()).or_default();
        let text = entry.pron.display(table);
        match prons.binary_search_by(|e| e.pron.display(table).cmp(&text)) {
            Ok(_) => Err(Error::InvalidArgument(format!(
                "duplicate pronunciation {text:?} for word {word:?}"
            ))),
            Err(pos) => {
                prons.insert(pos, entry);
                Ok(())
            }
        }
    }

    pub fn get(&self, word: &str) -> Option<&[LexiconEntry]> {
        self.entries.get(word).map(|v| v.as_slice())
    }

    /// First (canonical) pronunciation of a word, if any.
    pub fn first_pron(&self, word: &str) -> Option<&Pronunciation> {
        self.entries.get(word).and_then(|v| v.first()).map(|e| &e.pron)
    }

    pub fn contains(&self, word: &str) -> bool {
        self.entries.contains_key(word)
    }

    pub fn remove(&mut self, word: &str) -> Option<Vec<LexiconEntry>> {
        self.entries.remove(word)
    }

    /// Number of distinct words.
    pub fn word_count(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(|s| s.as_str())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &LexiconEntry)> {
        self.entries
            .iter()
            .flat_map(|(w, es)| es.iter().map(move |e| (w.as_str(), e)))
    }

    /// Sub-lexicon containing only the listed words.
    pub fn restrict<'a>(&self, words: impl IntoIterator<Item = &'a str>) -> Lexicon {
        let mut out = Lexicon::new();
        for w in words {
            if let Some(es) = self.entries.get(w) {
                out.entries.insert(w.to_string(), es.clone());
            }
        }
        out
    }
}

/// Read a lexicon file. See the module docs for the grammar.
pub fn read_lexicon(table: &mut SymbolTable, path: impl AsRef<Path>) -> Result<Lexicon> {
    let path = path.as_ref();
    let data = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lex = Lexicon::new();
    for (lineno, line) in data.lines().enumerate() {
        let lineno = lineno + 1;
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut fields = line.split('\t');
        let word = fields.next().unwrap_or("");
        let pron_text = fields
            .next()
            .ok_or_else(|| Error::parse(path, lineno, "missing TAB between word and pronunciation"))?;
        if word.is_empty() || word.chars().any(char::is_whitespace) {
            return Err(Error::parse(path, lineno, format!("bad word field {word:?}")));
        }
        let pron = Pronunciation::parse(table, pron_text)
            .map_err(|e| Error::parse(path, lineno, e.to_string()))?;
        if pron.is_empty() {
            return Err(Error::parse(path, lineno, "empty pronunciation"));
        }
        let (provenance, count) = match fields.next() {
            None => (Provenance::Seed, 0),
            Some(tag) => {
                let (name, count) = match tag.split_once(':') {
                    Some((n, c)) => {
                        let count = c.parse::<u64>().map_err(|_| {
                            Error::parse(path, lineno, format!("bad count {c:?}"))
                        })?;
                        (n, count)
                    }
                    None => (tag, 0),
                };
                let p = Provenance::parse(name).ok_or_else(|| {
                    Error::parse(path, lineno, format!("unknown provenance {name:?}"))
                })?;
                (p, count)
            }
        };
        if fields.next().is_some() {
            return Err(Error::parse(path, lineno, "too many TAB fields"));
        }
        lex.insert(
            table,
            word,
            LexiconEntry {
                pron,
                provenance,
                count,
            },
        )
        .map_err(|e| Error::parse(path, lineno, e.to_string()))?;
    }
    Ok(lex)
}

/// Canonical serialized form of a lexicon.
pub fn format_lexicon(lex: &Lexicon, table: &SymbolTable) -> Result<String> {
    let mut out = String::new();
    for (word, entry) in lex.iter() {
        if entry.pron.is_empty() {
            return Err(Error::InvalidArgument(format!(
                "word {word:?} has an empty pronunciation; refusing to serialize"
            )));
        }
        out.push_str(word);
        out.push('\t');
        out.push_str(&entry.pron.display(table));
        match (entry.provenance, entry.count) {
            (Provenance::Seed, 0) => {}
            (p, 0) => {
                out.push('\t');
                out.push_str(p.as_str());
            }
            (p, c) => {
                out.push('\t');
                out.push_str(p.as_str());
                out.push(':');
                out.push_str(&c.to_string());
            }
        }
        out.push('\n');
    }
    Ok(out)
}

/// Write a lexicon in canonical byte-deterministic form.
pub fn write_lexicon(lex: &Lexicon, table: &SymbolTable, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let text = format_lexicon(lex, table)?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}
