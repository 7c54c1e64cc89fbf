//! Character folding and token rules shared by the matcher, the term store
//! and the stopword list.

use alloc::string::String;

/// Case-folds a single character, keeping it unchanged when its lowercase
/// form spans more than one character. The result always has the same
/// character count as the input, so byte spans over the original text can
/// be recovered from character positions.
#[inline]
pub fn fold_char(c: char) -> char {
    if c.is_ascii() {
        return c.to_ascii_lowercase();
    }
    let mut lower = c.to_lowercase();
    match (lower.next(), lower.next()) {
        (Some(l), None) => l,
        _ => c,
    }
}

pub fn fold(s: &str) -> String {
    s.chars().map(fold_char).collect()
}

/// Characters that belong to a token. Hyphens are token-internal so
/// "x-ray" stays one token.
#[inline]
pub fn is_token_char(c: char) -> bool {
    c.is_alphanumeric() || c == '-'
}

/// Trims and collapses runs of whitespace to single spaces.
pub fn collapse_whitespace(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for word in s.split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(word);
    }
    out
}

/// Key used for synonym and stopword lookup.
pub fn lookup_key(s: &str) -> String {
    fold(&collapse_whitespace(s))
}

/// True when `[start, end)` does not split a token of `text`: the span may
/// not begin or end between two token characters.
pub fn is_token_aligned(text: &str, start: usize, end: usize) -> bool {
    if start >= end || end > text.len() {
        return false;
    }
    let inner = &text[start..end];
    let first = inner.chars().next();
    let last = inner.chars().next_back();
    let before = text[..start].chars().next_back();
    let after = text[end..].chars().next();
    let splits = |outside: Option<char>, edge: Option<char>| match (outside, edge) {
        (Some(o), Some(e)) => is_token_char(o) && is_token_char(e),
        _ => false,
    };
    !splits(before, first) && !splits(after, last)
}
