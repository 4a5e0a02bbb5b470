//! CoNLL-U ingestion and candidate predicate enumeration.
//!
//! Only ID, FORM, LEMMA and UPOS are kept. Multiword range rows (`3-4`) and
//! empty nodes (`5.1`) are skipped; their component rows carry the tokens.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

/// Universal POS tag set. `_` in the UPOS column parses as [`Upos::Unspecified`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Upos {
    ADJ,
    ADP,
    ADV,
    AUX,
    CCONJ,
    DET,
    INTJ,
    NOUN,
    NUM,
    PART,
    PRON,
    PROPN,
    PUNCT,
    SCONJ,
    SYM,
    VERB,
    X,
    #[serde(rename = "_")]
    Unspecified,
}

impl Upos {
    pub fn as_str(&self) -> &'static str {
        use Upos::*;
        match self {
            ADJ => "ADJ",
            ADP => "ADP",
            ADV => "ADV",
            AUX => "AUX",
            CCONJ => "CCONJ",
            DET => "DET",
            INTJ => "INTJ",
            NOUN => "NOUN",
            NUM => "NUM",
            PART => "PART",
            PRON => "PRON",
            PROPN => "PROPN",
            PUNCT => "PUNCT",
            SCONJ => "SCONJ",
            SYM => "SYM",
            VERB => "VERB",
            X => "X",
            Unspecified => "_",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown UPOS tag {0:?}")]
pub struct UnknownUpos(pub String);

impl FromStr for Upos {
    type Err = UnknownUpos;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        use Upos::*;
        Ok(match s {
            "ADJ" => ADJ,
            "ADP" => ADP,
            "ADV" => ADV,
            "AUX" => AUX,
            "CCONJ" => CCONJ,
            "DET" => DET,
            "INTJ" => INTJ,
            "NOUN" => NOUN,
            "NUM" => NUM,
            "PART" => PART,
            "PRON" => PRON,
            "PROPN" => PROPN,
            "PUNCT" => PUNCT,
            "SCONJ" => SCONJ,
            "SYM" => SYM,
            "VERB" => VERB,
            "X" => X,
            "_" => Unspecified,
            other => return Err(UnknownUpos(other.to_string())),
        })
    }
}

impl fmt::Display for Upos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub index: usize,
    pub surface: String,
    pub upos: Upos,
    pub lemma: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sentence {
    pub id: String,
    pub language: String,
    pub tokens: Vec<Token>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SentenceError {
    #[error("sentence {0} has no tokens")]
    Empty(String),
    #[error("sentence {id}: token at position {position} has index {index}")]
    NonContiguous { id: String, position: usize, index: usize },
    #[error("sentence {id}: token {index} has an empty surface")]
    EmptySurface { id: String, index: usize },
}

impl Sentence {
    /// Builds a sentence from `(surface, upos)` pairs, assigning indices.
    pub fn from_tagged<S: Into<String>>(
        id: impl Into<String>,
        language: impl Into<String>,
        tagged: impl IntoIterator<Item = (S, Upos)>,
    ) -> Self {
        let tokens = tagged
            .into_iter()
            .enumerate()
            .map(|(index, (surface, upos))| Token { index, surface: surface.into(), upos, lemma: None })
            .collect();
        Sentence { id: id.into(), language: language.into(), tokens }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn surfaces(&self) -> Vec<&str> {
        self.tokens.iter().map(|t| t.surface.as_str()).collect()
    }

    pub fn text(&self) -> String {
        crate::text::join_tokens(&self.surfaces())
    }

    pub fn token(&self, index: usize) -> Option<&Token> {
        self.tokens.get(index)
    }

    pub fn validate(&self) -> Result<(), SentenceError> {
        if self.tokens.is_empty() {
            return Err(SentenceError::Empty(self.id.clone()));
        }
        for (position, t) in self.tokens.iter().enumerate() {
            if t.index != position {
                return Err(SentenceError::NonContiguous { id: self.id.clone(), position, index: t.index });
            }
            if t.surface.is_empty() {
                return Err(SentenceError::EmptySurface { id: self.id.clone(), index: t.index });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PredicateKind {
    Verbal,
    Nominal,
}

impl PredicateKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            PredicateKind::Verbal => "verbal",
            PredicateKind::Nominal => "nominal",
        }
    }
}

impl fmt::Display for PredicateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PredicateKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "verbal" => Ok(PredicateKind::Verbal),
            "nominal" => Ok(PredicateKind::Nominal),
            other => Err(format!("unknown predicate kind {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredicateInstance {
    pub sentence_id: String,
    pub token_index: usize,
    pub kind: PredicateKind,
    pub lemma: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PredicatePolicy {
    /// Treat AUX tokens as verbal candidates.
    pub include_aux: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ConlluError {
    #[error("line {line}: expected 10 tab-separated columns, found {found}")]
    ColumnCount { line: usize, found: usize },
    #[error("line {line}: bad token id {id:?}")]
    BadId { line: usize, id: String },
    #[error("line {line}: token id {id} out of sequence (expected {expected})")]
    OutOfSequence { line: usize, id: usize, expected: usize },
    #[error("line {line}: {source}")]
    Upos { line: usize, source: UnknownUpos },
    #[error("line {line}: empty FORM")]
    EmptyForm { line: usize },
}

/// Parses a CoNLL-U document into sentences tagged with `language`.
///
/// Sentences without a `# sent_id` comment get `s<ordinal>` (1-based) and a
/// warning is logged.
pub fn parse_conllu(document: &str, language: &str) -> Result<Vec<Sentence>, ConlluError> {
    let mut sentences = Vec::new();
    let mut block = Block::default();

    for (lineno, raw) in document.lines().enumerate() {
        let line_no = lineno + 1;
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() {
            block.flush(&mut sentences, language);
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            if let Some((key, value)) = comment.split_once('=') {
                if key.trim() == "sent_id" {
                    block.id = Some(value.trim().to_string());
                }
            }
            continue;
        }

        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 10 {
            return Err(ConlluError::ColumnCount { line: line_no, found: cols.len() });
        }
        let id = cols[0];
        if id.contains('-') || id.contains('.') {
            continue;
        }
        let id_num: usize = id
            .parse()
            .map_err(|_| ConlluError::BadId { line: line_no, id: id.to_string() })?;
        let expected = block.tokens.len() + 1;
        if id_num != expected {
            return Err(ConlluError::OutOfSequence { line: line_no, id: id_num, expected });
        }
        if cols[1].is_empty() {
            return Err(ConlluError::EmptyForm { line: line_no });
        }
        let upos = cols[3].parse().map_err(|source| ConlluError::Upos { line: line_no, source })?;
        let lemma = match cols[2] {
            "_" if cols[1] != "_" => None,
            "" => None,
            l => Some(l.to_string()),
        };
        block.tokens.push(Token { index: id_num - 1, surface: cols[1].to_string(), upos, lemma });
    }
    block.flush(&mut sentences, language);
    Ok(sentences)
}

#[derive(Default)]
struct Block {
    id: Option<String>,
    tokens: Vec<Token>,
    ordinal: usize,
}

impl Block {
    fn flush(&mut self, out: &mut Vec<Sentence>, language: &str) {
        if self.tokens.is_empty() {
            self.id = None;
            return;
        }
        self.ordinal += 1;
        let id = match self.id.take() {
            Some(id) => id,
            None => {
                let id = format!("s{}", self.ordinal);
                log::warn!("sentence without sent_id; using {id}");
                id
            }
        };
        out.push(Sentence {
            id,
            language: language.to_string(),
            tokens: core::mem::take(&mut self.tokens),
        });
    }
}

/// Renders sentences back to CoNLL-U. Columns that are not retained are `_`.
pub fn write_conllu(sentences: &[Sentence]) -> String {
    let mut out = String::new();
    for s in sentences {
        out.push_str("# sent_id = ");
        out.push_str(&s.id);
        out.push('\n');
        for t in &s.tokens {
            let lemma = t.lemma.as_deref().unwrap_or("_");
            out.push_str(&format!("{}\t{}\t{}\t{}\t_\t_\t_\t_\t_\t_\n", t.index + 1, t.surface, lemma, t.upos));
        }
        out.push('\n');
    }
    out
}

/// Every VERB (and AUX when enabled) as verbal and every NOUN as a nominal
/// candidate, in token order.
pub fn candidate_predicates(sentence: &Sentence, policy: PredicatePolicy) -> Vec<PredicateInstance> {
    sentence
        .tokens
        .iter()
        .filter_map(|t| {
            let kind = match t.upos {
                Upos::VERB => PredicateKind::Verbal,
                Upos::AUX if policy.include_aux => PredicateKind::Verbal,
                Upos::NOUN => PredicateKind::Nominal,
                _ => return None,
            };
            Some(PredicateInstance {
                sentence_id: sentence.id.clone(),
                token_index: t.index,
                kind,
                lemma: t.lemma.clone(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    const ENGLISH_ROW: &str = "# sent_id = abst-en\n\
1\tFinally\tfinally\tADV\t_\t_\t4\tadvmod\t_\tSpaceAfter=No\n\
2\t,\t,\tPUNCT\t_\t_\t4\tpunct\t_\t_\n\
3\tI\tI\tPRON\t_\t_\t4\tnsubj\t_\t_\n\
4\tabstained\tabstain\tVERB\t_\t_\t0\troot\t_\t_\n\
5\tfrom\tfrom\tSCONJ\t_\t_\t6\tmark\t_\t_\n\
6\tvoting\tvote\tVERB\t_\t_\t4\tadvcl\t_\t_\n\
\n";

    #[test]
    fn field_mapping() {
        let s = parse_conllu(ENGLISH_ROW, "en").unwrap();
        assert_eq!(s.len(), 1);
        let t = &s[0].tokens[3];
        assert_eq!(
            t,
            &Token { index: 3, surface: "abstained".into(), upos: Upos::VERB, lemma: Some("abstain".into()) }
        );
        assert_eq!(s[0].id, "abst-en");
        assert_eq!(s[0].language, "en");
    }

    #[test]
    fn multiword_and_empty_nodes_skipped() {
        let doc = "1\tIl\til\tPRON\t_\t_\t_\t_\t_\t_\n\
2\tparle\tparler\tVERB\t_\t_\t_\t_\t_\t_\n\
3-4\tdu\t_\t_\t_\t_\t_\t_\t_\t_\n\
3\tde\tde\tADP\t_\t_\t_\t_\t_\t_\n\
4\tle\tle\tDET\t_\t_\t_\t_\t_\t_\n\
4.1\tvide\t_\tX\t_\t_\t_\t_\t_\t_\n\
5\tvote\tvote\tNOUN\t_\t_\t_\t_\t_\t_\n";
        let s = parse_conllu(doc, "fr").unwrap();
        let surfaces = s[0].surfaces();
        assert_eq!(surfaces, vec!["Il", "parle", "de", "le", "vote"]);
        assert_eq!(s[0].id, "s1");
        assert!(s[0].validate().is_ok());
    }

    #[test]
    fn column_count_error_names_line() {
        let doc = "# sent_id = a\n1\tx\tx\tX\t_\t_\t_\t_\t_\t_\n2\ty\tY\n";
        assert_eq!(parse_conllu(doc, "en"), Err(ConlluError::ColumnCount { line: 3, found: 3 }));
    }

    #[test]
    fn unknown_upos_rejected() {
        let doc = "1\tx\tx\tVRB\t_\t_\t_\t_\t_\t_\n";
        assert!(matches!(parse_conllu(doc, "en"), Err(ConlluError::Upos { line: 1, .. })));
    }

    #[test]
    fn synthesized_ids_are_ordinal() {
        let doc = "1\ta\ta\tX\t_\t_\t_\t_\t_\t_\n\n# sent_id = named\n1\tb\tb\tX\t_\t_\t_\t_\t_\t_\n\n1\tc\tc\tX\t_\t_\t_\t_\t_\t_\n";
        let ids: Vec<_> = parse_conllu(doc, "en").unwrap().into_iter().map(|s| s.id).collect();
        assert_eq!(ids, vec!["s1", "named", "s3"]);
    }

    #[test]
    fn candidates_by_pos() {
        use Upos::*;
        let s = Sentence::from_tagged("x", "en", [("I", PRON), ("saw", VERB), ("the", DET), ("show", NOUN)]);
        let c = candidate_predicates(&s, PredicatePolicy::default());
        assert_eq!(c.len(), 2);
        assert_eq!((c[0].token_index, c[0].kind), (1, PredicateKind::Verbal));
        assert_eq!((c[1].token_index, c[1].kind), (3, PredicateKind::Nominal));

        let punct = Sentence::from_tagged("p", "en", [(".", PUNCT), ("!", PUNCT)]);
        assert!(candidate_predicates(&punct, PredicatePolicy::default()).is_empty());
    }

    #[test]
    fn aux_switch() {
        use Upos::*;
        let s = Sentence::from_tagged("x", "fr", [("Je", PRON), ("suis", AUX), ("partie", VERB)]);
        assert_eq!(candidate_predicates(&s, PredicatePolicy::default()).len(), 1);
        assert_eq!(candidate_predicates(&s, PredicatePolicy { include_aux: true }).len(), 2);
    }

    fn arb_upos() -> impl Strategy<Value = Upos> {
        use Upos::*;
        prop::sample::select(vec![
            ADJ, ADP, ADV, AUX, CCONJ, DET, INTJ, NOUN, NUM, PART, PRON, PROPN, PUNCT, SCONJ, SYM, VERB, X,
        ])
    }

    fn arb_sentence() -> impl Strategy<Value = Sentence> {
        (
            "[a-z0-9]{1,6}",
            prop::collection::vec(("[\\p{L}\\p{N}'.,]{1,8}", arb_upos(), prop::option::of("[a-z]{1,5}")), 1..15),
        )
            .prop_map(|(id, toks)| Sentence {
                id,
                language: "xx".into(),
                tokens: toks
                    .into_iter()
                    .enumerate()
                    .map(|(index, (surface, upos, lemma))| Token { index, surface, upos, lemma })
                    .collect(),
            })
    }

    proptest! {
        #[test]
        fn conllu_round_trip(sentences in prop::collection::vec(arb_sentence(), 1..5)) {
            let text = write_conllu(&sentences);
            let back = parse_conllu(&text, "xx").unwrap();
            prop_assert_eq!(back, sentences);
        }

        #[test]
        fn candidates_strictly_increasing(s in arb_sentence(), aux in any::<bool>()) {
            let c = candidate_predicates(&s, PredicatePolicy { include_aux: aux });
            prop_assert!(c.windows(2).all(|w| w[0].token_index < w[1].token_index));
            prop_assert!(c.iter().all(|p| p.token_index < s.len()));
        }
    }
}
