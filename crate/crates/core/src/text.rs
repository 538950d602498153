//! Shallow text processing shared by the index, the topic model and the
//! embedding lookups.

use rust_stemmers::{Algorithm, Stemmer};

/// Lowercases and splits on every non-alphanumeric character.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Natural-language description of an entity: its (wikified) identifier,
/// with `_` and punctuation acting as word separators.
pub fn entity_description(entity_id: &str) -> Vec<String> {
    tokenize(entity_id)
}

/// Optional term normalization applied on top of [`tokenize`].
pub struct TermNormalizer {
    stemmer: Option<Stemmer>,
}

impl TermNormalizer {
    pub fn new(stem: bool) -> Self {
        Self {
            stemmer: stem.then(|| Stemmer::create(Algorithm::English)),
        }
    }

    pub fn normalize(&self, token: &str) -> String {
        match &self.stemmer {
            Some(s) => s.stem(token).into_owned(),
            None => token.to_string(),
        }
    }
}
