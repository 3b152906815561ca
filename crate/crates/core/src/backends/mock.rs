use std::sync::atomic::{AtomicUsize, Ordering};

use super::{Answerer, BackendError, Summarizer};
use crate::extraction::ConversationTurn;

/// Answers with the context it was given, verbatim. Metrics computed on its
/// answers therefore measure what each condition's context preserved.
#[derive(Debug, Clone, Copy, Default)]
pub struct EchoAnswerer;

impl Answerer for EchoAnswerer {
    fn answer(&self, context: &str, _question: &str) -> Result<String, BackendError> {
        Ok(context.to_owned())
    }
}

/// Wraps another answerer and counts calls.
pub struct CountingAnswerer<A> {
    inner: A,
    calls: AtomicUsize,
}

impl<A: Answerer> CountingAnswerer<A> {
    pub fn new(inner: A) -> Self {
        Self {
            inner,
            calls: AtomicUsize::new(0),
        }
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

impl<A: Answerer> Answerer for CountingAnswerer<A> {
    fn answer(&self, context: &str, question: &str) -> Result<String, BackendError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.inner.answer(context, question)
    }
}

/// Lossy summary: the first sentence of each side of each turn.
#[derive(Debug, Clone, Copy, Default)]
pub struct FirstSentenceSummarizer;

pub(crate) fn first_sentence(text: &str) -> &str {
    let text = text.trim();
    let mut chars = text.char_indices().peekable();
    while let Some((i, c)) = chars.next() {
        let at_break = chars.peek().map_or(true, |(_, n)| n.is_whitespace());
        if c == '\n' || (matches!(c, '.' | '!' | '?') && at_break) {
            let end = if c == '\n' { i } else { i + c.len_utf8() };
            return text[..end].trim();
        }
    }
    text
}

impl Summarizer for FirstSentenceSummarizer {
    fn summarize(&self, turns: &[ConversationTurn]) -> Result<String, BackendError> {
        let mut out = String::new();
        for t in turns {
            let parts: Vec<&str> = [first_sentence(&t.user), first_sentence(&t.assistant)]
                .into_iter()
                .filter(|s| !s.is_empty())
                .collect();
            out.push_str(&format!("Turn {}: {}\n", t.index, parts.join(" ")));
        }
        Ok(out)
    }
}
