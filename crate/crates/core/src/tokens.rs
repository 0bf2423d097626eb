//! Deterministic rule tokenizer used for every prompt and completion measurement.
//!
//! A token is either a maximal run of Unicode letters, digits and `_`
//! (lowercased), or a single non-whitespace character that is none of those.
//! The rule depends only on code points, so counts are identical on every
//! platform and locale.

use std::fmt;
use std::ops::Add;

use serde::{Deserialize, Serialize};

/// Number of tokens produced by [`tokenize`]. Never an estimate.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TokenCount(pub u64);

impl TokenCount {
    pub fn value(self) -> u64 {
        self.0
    }
}

impl Add for TokenCount {
    type Output = TokenCount;

    fn add(self, rhs: TokenCount) -> TokenCount {
        TokenCount(self.0 + rhs.0)
    }
}

impl fmt::Display for TokenCount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

#[inline]
fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

// Classification runs on the lowercased stream: lowercasing can emit
// combining marks (`İ` -> `i\u{307}`), and tokens must re-tokenize to themselves.
fn lowered(text: &str) -> impl Iterator<Item = char> + '_ {
    text.chars().flat_map(char::to_lowercase)
}

/// Split `text` into tokens, preserving order.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut word = String::new();
    for c in lowered(text) {
        if is_word_char(c) {
            word.push(c);
            continue;
        }
        if !word.is_empty() {
            tokens.push(std::mem::take(&mut word));
        }
        if !c.is_whitespace() {
            tokens.push(c.to_string());
        }
    }
    if !word.is_empty() {
        tokens.push(word);
    }
    tokens
}

/// Count tokens without materializing them.
pub fn count_tokens(text: &str) -> TokenCount {
    let mut count = 0u64;
    let mut in_word = false;
    for c in lowered(text) {
        if is_word_char(c) {
            if !in_word {
                count += 1;
                in_word = true;
            }
        } else {
            in_word = false;
            if !c.is_whitespace() {
                count += 1;
            }
        }
    }
    TokenCount(count)
}
