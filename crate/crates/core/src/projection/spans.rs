//! Answer-span projection and post-processing.

use alloc::vec::Vec;

use super::{Heuristic, LanguageProfile};
use crate::corpus::Sentence;
use crate::providers::AlignmentMap;
use crate::span::TokenSpan;

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum SpanDrop {
    #[error("no target token aligned to the answer")]
    Unaligned,
    #[error("nothing left after splitting on the predicate / sentence-internal period")]
    Degenerate,
}

/// Minimal contiguous target span covering every token aligned to the
/// English span. Reports [`Heuristic::GapFill`] when the aligned tokens are
/// not contiguous.
pub fn project_answer_span(
    english_span: TokenSpan,
    alignment: &AlignmentMap,
    target_len: usize,
) -> Result<(TokenSpan, Option<Heuristic>), SpanDrop> {
    let mut targets: Vec<usize> = english_span
        .range()
        .flat_map(|e| alignment.targets_of(e))
        .filter(|&t| t < target_len)
        .collect();
    targets.sort_unstable();
    targets.dedup();
    let (Some(&lo), Some(&hi)) = (targets.first(), targets.last()) else {
        return Err(SpanDrop::Unaligned);
    };
    let span = TokenSpan { start: lo, end: hi + 1 };
    let gap = targets.len() < span.len();
    Ok((span, gap.then_some(Heuristic::GapFill)))
}

/// Drops trailing function words while more than one token remains.
pub fn trim_function_words(
    span: TokenSpan,
    sentence: &Sentence,
    profile: &LanguageProfile,
) -> (TokenSpan, Option<Heuristic>) {
    if !profile.function_word_trim {
        return (span, None);
    }
    let mut out = span;
    while out.len() > 1 {
        let last = &sentence.tokens[out.end - 1].surface;
        if profile.function_words.iter().any(|w| w == last) {
            out.end -= 1;
        } else {
            break;
        }
    }
    let changed = out != span;
    (out, changed.then_some(Heuristic::Trim))
}

fn is_period(surface: &str) -> bool {
    matches!(surface, "." | "。" | "۔" | "।")
}

/// Splits the span at the predicate token and at sentence-internal periods,
/// keeping the longest piece (earliest on ties).
///
/// A period is sentence-internal when it is not the last token of the
/// sentence.
pub fn sanitize_span(
    span: TokenSpan,
    sentence: &Sentence,
    predicate_index: usize,
) -> Result<(TokenSpan, Option<Heuristic>), SpanDrop> {
    let last = sentence.len().saturating_sub(1);
    let offending = |i: usize| i == predicate_index || (i != last && is_period(&sentence.tokens[i].surface));
    if !span.range().any(offending) {
        return Ok((span, None));
    }
    let mut best: Option<TokenSpan> = None;
    let mut seg_start = span.start;
    for i in span.start..=span.end {
        if i == span.end || offending(i) {
            if i > seg_start {
                let seg = TokenSpan { start: seg_start, end: i };
                if best.is_none_or(|b| seg.len() > b.len()) {
                    best = Some(seg);
                }
            }
            seg_start = i + 1;
        }
    }
    match best {
        Some(s) => Ok((s, Some(Heuristic::Split))),
        None => Err(SpanDrop::Degenerate),
    }
}
