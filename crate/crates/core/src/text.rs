//! String normalization shared by question matching and predicate validation.

use alloc::string::String;
use alloc::vec::Vec;

use unicode_normalization::UnicodeNormalization;

pub fn nfc(s: &str) -> String {
    s.nfc().collect()
}

/// NFC, outer trim, internal whitespace collapsed to single spaces, lowercase.
pub fn normalize_question(s: &str) -> String {
    let composed = nfc(s);
    let collapsed = composed.split_whitespace().collect::<Vec<_>>().join(" ");
    collapsed.to_lowercase()
}

/// Detokenization rule used for stored surface text: single-space join.
pub fn join_tokens<S: AsRef<str>>(tokens: &[S]) -> String {
    let mut out = String::new();
    for (i, t) in tokens.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        out.push_str(t.as_ref());
    }
    out
}
