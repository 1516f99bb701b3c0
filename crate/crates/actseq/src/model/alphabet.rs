//! The enlarged alphabet: corpus tokens plus the reserved bracket, sentinel,
//! unknown and padding symbols at fixed indices.

use std::collections::HashMap;

use crate::codec::{
    FeedSymbol, END_SENTINEL_SYMBOL, LEFT_BRACKET_SYMBOL, PADDING_SYMBOL, RIGHT_BRACKET_SYMBOL,
    UNKNOWN_SYMBOL,
};
use crate::document::Document;

pub const PAD_ID: usize = 0;
pub const UNK_ID: usize = 1;
pub const EOS_ID: usize = 2;
pub const LEFT_ID: usize = 3;
pub const RIGHT_ID: usize = 4;
pub const RESERVED: usize = 5;

const RESERVED_SYMBOLS: [&str; RESERVED] = [
    PADDING_SYMBOL,
    UNKNOWN_SYMBOL,
    END_SENTINEL_SYMBOL,
    LEFT_BRACKET_SYMBOL,
    RIGHT_BRACKET_SYMBOL,
];

/// Token-to-index mapping. Reserved symbols occupy indices `0..RESERVED`;
/// corpus tokens follow in sorted order, so the same corpus always produces
/// the same alphabet. Out-of-vocabulary tokens map to the unknown index, as
/// does any corpus token spelled exactly like a reserved symbol.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Alphabet {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
    corpus: Vec<String>,
}

impl Alphabet {
    /// Builds the alphabet from a corpus of documents.
    pub fn build<'a>(docs: impl IntoIterator<Item = &'a Document>) -> Self {
        let mut unique: std::collections::BTreeSet<String> = std::collections::BTreeSet::new();
        for d in docs {
            for t in &d.tokens {
                if !RESERVED_SYMBOLS.contains(&t.as_str()) {
                    unique.insert(t.clone());
                }
            }
        }
        Self::from_corpus_tokens(unique.into_iter().collect())
    }

    /// Rebuilds an alphabet from its stored corpus-token list.
    pub fn from_corpus_tokens(corpus: Vec<String>) -> Self {
        let mut tokens: Vec<String> = RESERVED_SYMBOLS.iter().map(|s| s.to_string()).collect();
        tokens.extend(corpus.iter().cloned());
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            index.entry(t.clone()).or_insert(i);
        }
        Alphabet {
            tokens,
            index,
            corpus,
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    /// The reserved symbols are always present.
    pub fn is_empty(&self) -> bool {
        false
    }

    /// The non-reserved portion, as stored in checkpoints.
    pub fn corpus_tokens(&self) -> &[String] {
        &self.corpus
    }

    /// Index of a surface token; unknown for out-of-vocabulary.
    pub fn lookup(&self, token: &str) -> usize {
        match self.index.get(token) {
            Some(&i) if i >= RESERVED => i,
            _ => UNK_ID,
        }
    }

    pub fn token(&self, id: usize) -> &str {
        &self.tokens[id]
    }

    /// Index of the symbol a decision feeds into the decoder.
    pub fn feed_id(&self, feed: FeedSymbol, doc: &Document) -> usize {
        match feed {
            FeedSymbol::Token(i) => self.lookup(&doc.tokens[i]),
            FeedSymbol::LeftBracket => LEFT_ID,
            FeedSymbol::RightBracket => RIGHT_ID,
            FeedSymbol::EndSentinel => EOS_ID,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reserved_symbols_have_fixed_indices() {
        let a = Alphabet::from_corpus_tokens(vec![]);
        assert_eq!(a.len(), RESERVED);
        assert_eq!(a.token(PAD_ID), PADDING_SYMBOL);
        assert_eq!(a.token(EOS_ID), END_SENTINEL_SYMBOL);
        assert_eq!(a.token(LEFT_ID), LEFT_BRACKET_SYMBOL);
        assert_eq!(a.token(RIGHT_ID), RIGHT_BRACKET_SYMBOL);
    }

    #[test]
    fn corpus_tokens_sorted_and_looked_up() {
        let d = Document::single_sentence("d", vec!["b".into(), "a".into(), "b".into()]);
        let a = Alphabet::build([&d]);
        assert_eq!(a.len(), RESERVED + 2);
        assert_eq!(a.lookup("a"), RESERVED);
        assert_eq!(a.lookup("b"), RESERVED + 1);
        assert_eq!(a.lookup("zzz"), UNK_ID);
    }

    #[test]
    fn reserved_collisions_map_to_unknown() {
        let d = Document::single_sentence("d", vec![LEFT_BRACKET_SYMBOL.into(), "x".into()]);
        let a = Alphabet::build([&d]);
        // The document token spelled like the left bracket is not added and
        // encodes as unknown, keeping bracket feed symbols unambiguous.
        assert_eq!(a.lookup(LEFT_BRACKET_SYMBOL), UNK_ID);
        assert_eq!(a.feed_id(FeedSymbol::LeftBracket, &d), LEFT_ID);
        assert_eq!(a.feed_id(FeedSymbol::Token(0), &d), UNK_ID);
        assert_eq!(a.feed_id(FeedSymbol::Token(1), &d), a.lookup("x"));
    }
}
