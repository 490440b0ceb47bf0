//! Deterministic in-process stand-ins for the four models. They exist to
//! drive the pipeline's control flow, not to approximate model quality.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use super::{Clients, Embedder, Generator, QuestionAnswerer, SpanExtractor};
use crate::error::Result;

pub const STUB_DIM: usize = 16;

const STOPWORDS: &[&str] = &[
    "a", "an", "the", "and", "or", "but", "of", "to", "in", "on", "at", "by", "for", "with", "from", "as", "is", "was",
    "were", "are", "be", "been", "he", "she", "it", "they", "we", "you", "i", "his", "her", "its", "their", "our",
    "this", "that", "these", "those", "there", "then", "than", "not", "no", "so", "very", "too", "also", "had", "has",
    "have", "did", "do", "does", "will", "would", "could", "should", "can", "him", "them", "me", "us", "my", "your",
    "when", "where", "what", "who", "how", "why", "which", "after", "before", "into", "out", "up", "down", "over",
    "all", "some", "one", "again",
];

fn is_stopword(token: &str) -> bool {
    STOPWORDS.contains(&token.to_lowercase().as_str())
}

/// Whitespace tokens with surrounding punctuation removed.
fn tokens(text: &str) -> impl Iterator<Item = &str> {
    text.split_whitespace().map(|w| w.trim_matches(|c: char| !c.is_alphanumeric())).filter(|w| !w.is_empty())
}

/// Bag-of-words hash embedding: each lowercase token maps to a seeded
/// pseudo-random vector, the sum is normalised to unit length.
#[derive(Debug, Clone)]
pub struct StubEmbedder {
    seed: u64,
}

impl StubEmbedder {
    pub fn new(seed: u64) -> Self {
        StubEmbedder { seed }
    }

    fn token_vector(&self, token: &str) -> [f64; STUB_DIM] {
        let mut hasher = Sha256::new();
        hasher.update(self.seed.to_le_bytes());
        hasher.update(token.as_bytes());
        let mut rng = ChaCha8Rng::from_seed(hasher.finalize().into());
        std::array::from_fn(|_| rng.gen_range(-1.0..1.0))
    }

    pub fn embed(&self, text: &str) -> Vec<f64> {
        let mut acc = [0.0; STUB_DIM];
        let lowered = text.to_lowercase();
        let mut any = false;
        for tok in tokens(&lowered) {
            any = true;
            for (a, v) in acc.iter_mut().zip(self.token_vector(tok)) {
                *a += v;
            }
        }
        let mut norm = acc.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !any || norm == 0.0 {
            acc = self.token_vector(text);
            norm = acc.iter().map(|v| v * v).sum::<f64>().sqrt();
        }
        acc.iter().map(|v| v / norm).collect()
    }
}

impl Embedder for StubEmbedder {
    fn embed_batch(&self, texts: &[String]) -> Result<Vec<Vec<f64>>> {
        Ok(texts.iter().map(|t| self.embed(t)).collect())
    }
}

/// Echoes `Q: <first 8 words of the prompt>?`.
#[derive(Debug, Clone, Default)]
pub struct StubGenerator;

impl Generator for StubGenerator {
    fn generate(&self, prompt: &str) -> Result<String> {
        let head: Vec<&str> = prompt.split_whitespace().take(8).collect();
        Ok(format!("Q: {}?", head.join(" ")))
    }
}

/// Answers with the first context word equal (ignoring case) to the
/// question's last word, else the first context word.
#[derive(Debug, Clone, Default)]
pub struct StubQa;

impl QuestionAnswerer for StubQa {
    fn answer(&self, question: &str, context: &str) -> Result<String> {
        let first = tokens(context).next().unwrap_or("");
        let Some(last) = tokens(question).last() else {
            return Ok(first.to_owned());
        };
        let last = last.to_lowercase();
        let hit = tokens(context).find(|w| w.to_lowercase() == last);
        Ok(hit.unwrap_or(first).to_owned())
    }
}

/// Capitalised non-stopword tokens in sentence order, then the last
/// noun-like token (alphabetic, at least three letters, not a stopword).
#[derive(Debug, Clone, Default)]
pub struct StubExtractor;

impl SpanExtractor for StubExtractor {
    fn extract_spans(&self, sentence: &str) -> Result<Vec<String>> {
        let mut spans: Vec<String> = Vec::new();
        let mut push = |s: &str| {
            if !spans.iter().any(|x| x == s) {
                spans.push(s.to_owned());
            }
        };
        for tok in tokens(sentence) {
            if tok.chars().next().is_some_and(char::is_uppercase) && !is_stopword(tok) {
                push(tok);
            }
        }
        let noun_like = tokens(sentence)
            .filter(|t| t.chars().count() >= 3 && t.chars().all(char::is_alphabetic) && !is_stopword(t))
            .last();
        if let Some(tok) = noun_like {
            push(tok);
        }
        Ok(spans)
    }
}

/// All four stubs; `seed` only affects the embedder.
pub fn make_stub_suite(seed: u64) -> Clients {
    Clients {
        embedder: Arc::new(StubEmbedder::new(seed)),
        generator: Arc::new(StubGenerator),
        qa: Arc::new(StubQa),
        extractor: Arc::new(StubExtractor),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn embedder_deterministic_and_unit_norm() {
        let e = StubEmbedder::new(7);
        assert_eq!(e.embed("hello"), e.embed("hello"));
        for text in ["hello", "Mary met John.", "?!", "a b c d e f g"] {
            let v = e.embed(text);
            assert_eq!(v.len(), STUB_DIM);
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!((norm - 1.0).abs() < 1e-9, "{text}");
        }
        assert_ne!(StubEmbedder::new(8).embed("hello"), e.embed("hello"));
    }

    #[test]
    fn embedder_ignores_case_and_punctuation() {
        let e = StubEmbedder::new(7);
        assert_eq!(e.embed("Mary"), e.embed("mary!"));
        assert_eq!(e.embed("Who? Mary"), e.embed("who mary"));
    }

    #[test]
    fn generator_echoes_eight_words() {
        let g = StubGenerator;
        assert_eq!(
            g.generate("one two three four five six seven eight nine").unwrap(),
            "Q: one two three four five six seven eight?"
        );
        assert_eq!(g.generate("short prompt").unwrap(), "Q: short prompt?");
    }

    #[test]
    fn qa_finds_last_word() {
        let qa = StubQa;
        assert_eq!(qa.answer("Q: where is rome?", "He lived in Rome. Later Paris.").unwrap(), "Rome");
        assert_eq!(qa.answer("Q: what about zebras?", "He lived in Rome.").unwrap(), "He");
        assert_eq!(qa.answer("?", "He lived.").unwrap(), "He");
    }

    #[test]
    fn extractor_examples() {
        let x = StubExtractor;
        assert_eq!(x.extract_spans("Mary met John.").unwrap(), vec!["Mary", "John"]);
        assert_eq!(x.extract_spans("The dog chased a red ball.").unwrap(), vec!["ball"]);
        assert!(x.extract_spans("it was so.").unwrap().is_empty());
    }
}
