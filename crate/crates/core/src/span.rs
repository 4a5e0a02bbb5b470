use core::fmt;
use core::ops::Range;

use serde::{Deserialize, Serialize};

/// Half-open token range `[start, end)` over a sentence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TokenSpan {
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("invalid span [{start},{end}) over {len} tokens")]
pub struct SpanError {
    pub start: usize,
    pub end: usize,
    pub len: usize,
}

impl TokenSpan {
    /// Builds a span checked against a sentence of `sentence_len` tokens.
    pub fn new(start: usize, end: usize, sentence_len: usize) -> Result<Self, SpanError> {
        let span = TokenSpan { start, end };
        span.validate(sentence_len)?;
        Ok(span)
    }

    /// Builds a span without a sentence bound. Panics when `start >= end`.
    pub fn unchecked(start: usize, end: usize) -> Self {
        assert!(start < end, "empty span [{start},{end})");
        TokenSpan { start, end }
    }

    pub fn single(index: usize) -> Self {
        TokenSpan { start: index, end: index + 1 }
    }

    pub fn validate(&self, sentence_len: usize) -> Result<(), SpanError> {
        if self.start < self.end && self.end <= sentence_len {
            Ok(())
        } else {
            Err(SpanError { start: self.start, end: self.end, len: sentence_len })
        }
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }

    pub fn contains(&self, index: usize) -> bool {
        self.start <= index && index < self.end
    }

    pub fn range(&self) -> Range<usize> {
        self.start..self.end
    }

    pub fn intersection_len(&self, other: &TokenSpan) -> usize {
        let lo = self.start.max(other.start);
        let hi = self.end.min(other.end);
        hi.saturating_sub(lo)
    }

    pub fn union_len(&self, other: &TokenSpan) -> usize {
        self.len() + other.len() - self.intersection_len(other)
    }
}

impl fmt::Display for TokenSpan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{},{})", self.start, self.end)
    }
}

/// Token-level intersection over union of two spans over the same sentence.
pub fn token_iou(a: &TokenSpan, b: &TokenSpan) -> f64 {
    let union = a.union_len(b);
    if union == 0 {
        return 0.0;
    }
    a.intersection_len(b) as f64 / union as f64
}
