//! Mapping English predicates onto target tokens and gating them by POS.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::corpus::{Sentence, Upos};
use crate::providers::{classify_nominalization, AlignmentMap, NominalizationClassifier, NominalizationPrompt};

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum PredicateDrop {
    #[error("english predicate has no aligned target token")]
    Unaligned,
    #[error("no aligned target token is a VERB or NOUN")]
    Filtered,
}

/// Leftmost aligned target token tagged VERB or NOUN.
pub fn align_predicate(
    english_index: usize,
    alignment: &AlignmentMap,
    sentence: &Sentence,
) -> Result<usize, PredicateDrop> {
    let aligned: Vec<usize> = alignment.targets_of(english_index).filter(|&t| t < sentence.len()).collect();
    if aligned.is_empty() {
        return Err(PredicateDrop::Unaligned);
    }
    let qualifying: Vec<usize> = aligned
        .into_iter()
        .filter(|&t| matches!(sentence.tokens[t].upos, Upos::VERB | Upos::NOUN))
        .collect();
    match qualifying.as_slice() {
        [] => Err(PredicateDrop::Filtered),
        [only] => Ok(*only),
        [first, ..] => {
            log::info!(
                "sentence {}: english predicate {english_index} aligns to {} qualifying tokens {:?}; keeping {first}",
                sentence.id,
                qualifying.len(),
                qualifying
            );
            Ok(*first)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GateDecision {
    KeepVerbal,
    KeepNominal,
    Drop,
}

/// VERB is kept; NOUN is kept only when the classifier calls it an eventive
/// nominalization (looked up by lemma when present, else surface).
pub fn gate_predicate(
    target_index: usize,
    sentence: &Sentence,
    classifier: &dyn NominalizationClassifier,
    prompt: &NominalizationPrompt,
) -> GateDecision {
    let Some(token) = sentence.token(target_index) else {
        return GateDecision::Drop;
    };
    match token.upos {
        Upos::VERB => GateDecision::KeepVerbal,
        Upos::NOUN => {
            let word = token.lemma.as_deref().unwrap_or(&token.surface);
            if classify_nominalization(classifier, word, &sentence.language, prompt) {
                GateDecision::KeepNominal
            } else {
                GateDecision::Drop
            }
        }
        _ => GateDecision::Drop,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::providers::{PromptTemplate, ProviderError};
    use alloc::string::{String, ToString};

    struct Table(&'static [(&'static str, &'static str)]);

    impl NominalizationClassifier for Table {
        fn complete(&self, noun: &str, _l: &str, _p: &NominalizationPrompt) -> Result<String, ProviderError> {
            self.0
                .iter()
                .find(|(n, _)| *n == noun)
                .map(|(_, c)| c.to_string())
                .ok_or_else(|| ProviderError::FixtureMiss { route: "/nomclass".into(), key: noun.into() })
        }
    }

    fn prompt() -> NominalizationPrompt {
        NominalizationPrompt {
            template: PromptTemplate::default(),
            positive_label: "nom d'action".into(),
            negative_label: "nom commun".into(),
        }
    }

    const FRENCH: Table = Table(&[
        ("libération", "nom d'action"),
        ("comité", "nom commun"),
        ("invitation", "nom d'action"),
        ("assiette", "nom commun"),
    ]);

    #[test]
    fn leftmost_qualifying() {
        use Upos::*;
        let s = Sentence::from_tagged("s", "fr", [
            ("a", PRON), ("b", DET), ("c", DET), ("d", DET), ("e", DET), ("f", ADJ), ("g", DET), ("h", VERB),
        ]);
        let align = AlignmentMap::from_pairs([(2, 5), (2, 7)]);
        assert_eq!(align_predicate(2, &align, &s), Ok(7));
        assert_eq!(align_predicate(0, &align, &s), Err(PredicateDrop::Unaligned));
        let only_adj = AlignmentMap::from_pairs([(1, 5)]);
        assert_eq!(align_predicate(1, &only_adj, &s), Err(PredicateDrop::Filtered));
    }

    /// Enumerate every subset of aligned targets over a small tagged sentence
    /// and check the leftmost-qualifying rule.
    #[test]
    fn leftmost_rule_by_enumeration() {
        use Upos::*;
        let tags = [ADJ, VERB, NOUN, AUX, PRON, NOUN];
        let s = Sentence::from_tagged("s", "xx", tags.iter().map(|&u| ("w", u)));
        for mask in 0u32..(1 << tags.len()) {
            let targets: Vec<usize> = (0..tags.len()).filter(|i| mask & (1 << i) != 0).collect();
            let align = AlignmentMap::from_pairs(targets.iter().map(|&t| (0, t)));
            let expected = if targets.is_empty() {
                Err(PredicateDrop::Unaligned)
            } else {
                targets
                    .iter()
                    .copied()
                    .find(|&t| matches!(tags[t], VERB | NOUN))
                    .ok_or(PredicateDrop::Filtered)
            };
            assert_eq!(align_predicate(0, &align, &s), expected, "mask {mask:b}");
        }
    }

    #[test]
    fn gating() {
        use Upos::*;
        let s = Sentence::from_tagged("s", "fr", [
            ("vote", VERB), ("libération", NOUN), ("comité", NOUN), ("rapide", ADJ), ("table", NOUN),
        ]);
        let p = prompt();
        assert_eq!(gate_predicate(0, &s, &FRENCH, &p), GateDecision::KeepVerbal);
        assert_eq!(gate_predicate(1, &s, &FRENCH, &p), GateDecision::KeepNominal);
        assert_eq!(gate_predicate(2, &s, &FRENCH, &p), GateDecision::Drop);
        assert_eq!(gate_predicate(3, &s, &FRENCH, &p), GateDecision::Drop);
        // fixture miss -> conservative drop
        assert_eq!(gate_predicate(4, &s, &FRENCH, &p), GateDecision::Drop);
        assert_eq!(gate_predicate(9, &s, &FRENCH, &p), GateDecision::Drop);
    }
}
