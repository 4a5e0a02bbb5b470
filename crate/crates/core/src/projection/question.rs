use alloc::string::String;

use super::LanguageProfile;
use crate::text::nfc;

fn is_edge_punct(c: char) -> bool {
    c.is_ascii_punctuation()
        || matches!(c, '¿' | '¡' | '«' | '»' | '“' | '”' | '„' | '‘' | '’' | '…' | '؟' | '،')
}

/// True iff some whitespace-delimited token of the question (edge punctuation
/// stripped, NFC) equals the predicate surface.
///
/// With `allow_affixed`, a token may also be one of the profile's clitic
/// prefixes followed by the predicate. A token may also differ from the
/// predicate by one of the profile's agreement suffixes (in either direction).
pub fn validate_constrained_question(
    question: &str,
    predicate_surface: &str,
    profile: &LanguageProfile,
    allow_affixed: bool,
) -> bool {
    let predicate = nfc(predicate_surface.trim());
    if predicate.is_empty() {
        return false;
    }
    let question = nfc(question);
    question
        .split_whitespace()
        .map(|t| t.trim_matches(is_edge_punct))
        .filter(|t| !t.is_empty())
        .any(|token| {
            token_matches(token, &predicate, profile)
                || (allow_affixed
                    && profile.clitic_prefixes.iter().any(|p| {
                        let p = nfc(p);
                        !p.is_empty()
                            && token
                                .strip_prefix(p.as_str())
                                .is_some_and(|rest| token_matches(rest, &predicate, profile))
                    }))
        })
}

fn token_matches(token: &str, predicate: &str, profile: &LanguageProfile) -> bool {
    if token == predicate {
        return true;
    }
    profile.agreement_suffixes.iter().any(|suffix| {
        let suffix: String = nfc(suffix);
        !suffix.is_empty()
            && (token.strip_suffix(suffix.as_str()) == Some(predicate)
                || predicate.strip_suffix(suffix.as_str()) == Some(token))
    })
}
