//! Interned symbols for graphemes and phonemes.
//!
//! All sequence algorithms in this crate work over [`Symbol`] ids rather
//! than strings. Interning is bijective within one [`SymbolTable`]: the
//! same text always yields the same id, and distinct texts get distinct
//! ids. Symbol texts must be non-empty and free of whitespace so that the
//! space/TAB-delimited file formats stay unambiguous.

use std::collections::HashMap;

use crate::error::{Error, Result};

/// An interned grapheme or phoneme label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Symbol(u32);

impl Symbol {
    pub fn id(self) -> u32 {
        self.0
    }
}

/// Bijective text <-> id map.
#[derive(Debug, Default, Clone)]
pub struct SymbolTable {
    texts: Vec<String>,
    ids: HashMap<String, Symbol>,
}

impl SymbolTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// Intern `text`, returning its stable id.
    pub fn intern(&mut self, text: &str) -> Result<Symbol> {
        if text.is_empty() || text.chars().any(char::is_whitespace) {
            return Err(Error::InvalidSymbol(text.to_string()));
        }
        if let Some(&sym) = self.ids.get(text) {
            return Ok(sym);
        }
        let sym = Symbol(self.texts.len() as u32);
        self.texts.push(text.to_string());
        self.ids.insert(text.to_string(), sym);
        Ok(sym)
    }

    pub fn get(&self, text: &str) -> Option<Symbol> {
        self.ids.get(text).copied()
    }

    pub fn text(&self, sym: Symbol) -> &str {
        &self.texts[sym.0 as usize]
    }

    pub fn len(&self) -> usize {
        self.texts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.texts.is_empty()
    }

    /// Render a symbol sequence as space-separated text.
    pub fn join(&self, syms: &[Symbol]) -> String {
        syms.iter()
            .map(|&s| self.text(s))
            .collect::<Vec<_>>()
            .join(" ")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interning_is_stable_and_bijective() {
        let mut t = SymbolTable::new();
        let a1 = t.intern("a").unwrap();
        let b = t.intern("b").unwrap();
        let a2 = t.intern("a").unwrap();
        assert_eq!(a1, a2);
        assert_ne!(a1, b);
        assert_eq!(t.text(a1), "a");
        assert_eq!(t.text(b), "b");
        assert_eq!(t.len(), 2);
    }

    #[test]
    fn rejects_empty_and_whitespace() {
        let mut t = SymbolTable::new();
        assert!(t.intern("").is_err());
        assert!(t.intern("a b").is_err());
        assert!(t.intern("a\tb").is_err());
        assert!(t.intern("a\n").is_err());
    }
}
