//! Contexts, conversations and rationales, plus CoQA ingestion.
//!
//! All offsets in this module are byte offsets into `ContextDoc::raw_text`.
//! CoQA stores character offsets; [`parse_coqa`] converts them on the way in
//! and [`to_coqa_json`] converts them back.

use std::collections::BTreeMap;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Words that end in '.' but do not end a sentence.
pub const ABBREVIATIONS: &[&str] = &["Mr.", "Mrs.", "Ms.", "Dr.", "St.", "vs.", "e.g.", "i.e.", "U.S."];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sentence {
    pub index: usize,
    pub text: String,
    pub char_start: usize,
    pub char_end: usize,
}

impl Sentence {
    pub fn span(&self) -> Range<usize> {
        self.char_start..self.char_end
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContextDoc {
    raw_text: String,
    sentences: Vec<Sentence>,
}

impl ContextDoc {
    pub fn new(raw_text: impl Into<String>) -> Result<Self> {
        let raw_text = raw_text.into();
        let sentences = split_sentences(&raw_text)?;
        Ok(ContextDoc { raw_text, sentences })
    }

    pub fn raw_text(&self) -> &str {
        &self.raw_text
    }

    pub fn sentences(&self) -> &[Sentence] {
        &self.sentences
    }

    pub fn sentence(&self, index: usize) -> Result<&Sentence> {
        self.sentences.get(index).ok_or_else(|| Error::index(index, format!("context has {} sentences", self.m())))
    }

    /// Number of sentences.
    pub fn m(&self) -> usize {
        self.sentences.len()
    }

    pub fn sentence_texts(&self) -> Vec<String> {
        self.sentences.iter().map(|s| s.text.clone()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QATurn {
    pub turn_id: usize,
    pub question: String,
    pub answer: String,
    pub rationale_text: String,
    pub rationale_span: Option<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Conversation {
    pub id: String,
    pub context: ContextDoc,
    pub turns: Vec<QATurn>,
}

impl Conversation {
    pub fn new(id: impl Into<String>, context: ContextDoc, turns: Vec<QATurn>) -> Result<Self> {
        let id = id.into();
        for (i, turn) in turns.iter().enumerate() {
            if turn.turn_id != i + 1 {
                return Err(Error::Schema {
                    conversation: id,
                    message: format!(
                        "turn ids must be consecutive from 1, found {} at position {}",
                        turn.turn_id,
                        i + 1
                    ),
                });
            }
            if let Some((start, end)) = turn.rationale_span {
                if start > end || end > context.raw_text.len() {
                    return Err(Error::Schema {
                        conversation: id,
                        message: format!("turn {} rationale span ({start}, {end}) outside context", turn.turn_id),
                    });
                }
            }
        }
        Ok(Conversation { id, context, turns })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TaskMode {
    AnswerAware,
    AnswerUnaware,
}

/// Target answer and rationale for an answer-aware turn.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Target {
    pub answer: String,
    pub rationale_text: String,
    pub rationale_span: (usize, usize),
}

/// The inputs for generating question `n`: the context, turns `1..n-1`,
/// and (answer-aware only) the target answer with its rationale.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TurnTask {
    pub conversation_id: String,
    pub context: ContextDoc,
    pub history: Vec<QATurn>,
    pub target: Option<Target>,
    pub n: usize,
}

impl TurnTask {
    pub fn answer_aware(
        conversation_id: impl Into<String>,
        context: ContextDoc,
        history: Vec<QATurn>,
        target: Target,
    ) -> Self {
        let n = history.len() + 1;
        TurnTask { conversation_id: conversation_id.into(), context, history, target: Some(target), n }
    }

    pub fn answer_unaware(conversation_id: impl Into<String>, context: ContextDoc, history: Vec<QATurn>) -> Self {
        let n = history.len() + 1;
        TurnTask { conversation_id: conversation_id.into(), context, history, target: None, n }
    }

    /// Builds the answer-aware task for turn `n` of a reference conversation.
    pub fn from_conversation(conv: &Conversation, n: usize) -> Result<Self> {
        if n == 0 || n > conv.turns.len() {
            return Err(Error::index(n, format!("conversation {} has {} turns", conv.id, conv.turns.len())));
        }
        let turn = &conv.turns[n - 1];
        let span = turn.rationale_span.ok_or(Error::MissingRationale { turn: n })?;
        let history = history_prefix(conv, n)?.to_vec();
        Ok(Self::answer_aware(
            conv.id.clone(),
            conv.context.clone(),
            history,
            Target { answer: turn.answer.clone(), rationale_text: turn.rationale_text.clone(), rationale_span: span },
        ))
    }

    pub fn mode(&self) -> TaskMode {
        if self.target.is_some() {
            TaskMode::AnswerAware
        } else {
            TaskMode::AnswerUnaware
        }
    }
}

fn is_terminator(c: char) -> bool {
    matches!(c, '.' | '!' | '?')
}

fn is_closer(c: char) -> bool {
    matches!(c, '"' | '\'' | ')' | ']' | '\u{201d}' | '\u{2019}')
}

/// Splits `raw_text` into sentences at '.', '!' or '?' followed by
/// whitespace. Closing quotes/brackets directly after the terminator stay in
/// the sentence. Words in [`ABBREVIATIONS`] never end a sentence.
pub fn split_sentences(raw_text: &str) -> Result<Vec<Sentence>> {
    if raw_text.trim().is_empty() {
        return Err(Error::EmptyContext);
    }
    let chars: Vec<(usize, char)> = raw_text.char_indices().collect();
    let mut boundaries = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let (_, c) = chars[i];
        if !is_terminator(c) {
            i += 1;
            continue;
        }
        let mut j = i + 1;
        while j < chars.len() && is_terminator(chars[j].1) {
            j += 1;
        }
        while j < chars.len() && is_closer(chars[j].1) {
            j += 1;
        }
        if j < chars.len() && chars[j].1.is_whitespace() {
            let end = chars[j].0;
            if !ends_with_abbreviation(&raw_text[..end]) {
                boundaries.push(end);
            }
        }
        i = j;
    }
    boundaries.push(raw_text.len());

    let mut sentences = Vec::new();
    let mut start = 0;
    for end in boundaries {
        let piece = &raw_text[start..end];
        let lead = piece.len() - piece.trim_start().len();
        let trimmed = piece.trim();
        if !trimmed.is_empty() {
            let s = start + lead;
            sentences.push(Sentence {
                index: sentences.len(),
                text: trimmed.to_owned(),
                char_start: s,
                char_end: s + trimmed.len(),
            });
        }
        start = end;
    }
    Ok(sentences)
}

fn ends_with_abbreviation(prefix: &str) -> bool {
    let word = prefix.rsplit(char::is_whitespace).next().unwrap_or("");
    let word = word.trim_start_matches(['(', '"', '\'', '\u{201c}']);
    ABBREVIATIONS.contains(&word)
}

/// Index of the sentence with the largest overlap with `span`; ties go to the
/// earlier sentence.
pub fn locate_rationale(context: &ContextDoc, span: (usize, usize)) -> Result<usize> {
    let (start, end) = span;
    if start >= end {
        return Err(Error::InvalidParams(format!("rationale span ({start}, {end}) is empty")));
    }
    if end > context.raw_text.len() {
        return Err(Error::index(end, format!("context is {} bytes long", context.raw_text.len())));
    }
    let mut best: Option<(usize, usize)> = None;
    for sentence in &context.sentences {
        let lo = start.max(sentence.char_start);
        let hi = end.min(sentence.char_end);
        let overlap = hi.saturating_sub(lo);
        if overlap > 0 && best.is_none_or(|(_, b)| overlap > b) {
            best = Some((sentence.index, overlap));
        }
    }
    best.map(|(i, _)| i).ok_or(Error::Locate { start, end })
}

/// Turns `1..n-1` of the conversation.
pub fn history_prefix(conv: &Conversation, n: usize) -> Result<&[QATurn]> {
    if n == 0 || n > conv.turns.len() + 1 {
        return Err(Error::index(n, format!("conversation {} has {} turns", conv.id, conv.turns.len())));
    }
    Ok(&conv.turns[..n - 1])
}

#[derive(Debug, Serialize, Deserialize)]
struct CoqaFile {
    #[serde(default)]
    version: Option<serde_json::Value>,
    data: Vec<CoqaRecord>,
}

#[derive(Debug, Serialize, Deserialize)]
struct CoqaRecord {
    id: String,
    story: String,
    questions: Vec<CoqaQuestion>,
    answers: Vec<CoqaAnswer>,
}

#[derive(Debug, Serialize, Deserialize)]
struct CoqaQuestion {
    input_text: String,
    turn_id: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct CoqaAnswer {
    input_text: String,
    #[serde(default)]
    span_text: String,
    span_start: i64,
    span_end: i64,
    turn_id: usize,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum CoqaDocument {
    File(CoqaFile),
    Records(Vec<CoqaRecord>),
}

/// Parses a CoQA JSON document (`{"data": [...]}` or a bare array of records).
pub fn parse_coqa(document: &str) -> Result<Vec<Conversation>> {
    let doc: serde_json::Value = serde_json::from_str(document).map_err(|e| Error::Parse(e.to_string()))?;
    let doc: CoqaDocument = serde_json::from_value(doc).map_err(|e| Error::Parse(e.to_string()))?;
    let records = match doc {
        CoqaDocument::File(f) => f.data,
        CoqaDocument::Records(r) => r,
    };
    records.into_iter().map(record_to_conversation).collect()
}

fn record_to_conversation(record: CoqaRecord) -> Result<Conversation> {
    let schema = |message: String| Error::Schema { conversation: record.id.clone(), message };
    let context = ContextDoc::new(record.story.clone()).map_err(|e| schema(e.to_string()))?;
    let offsets = CharOffsets::new(&record.story);

    let mut answers: BTreeMap<usize, &CoqaAnswer> = BTreeMap::new();
    for a in &record.answers {
        if answers.insert(a.turn_id, a).is_some() {
            return Err(schema(format!("duplicate answer for turn {}", a.turn_id)));
        }
    }
    let mut questions: Vec<&CoqaQuestion> = record.questions.iter().collect();
    questions.sort_by_key(|q| q.turn_id);
    if questions.len() != answers.len() {
        return Err(schema(format!("{} questions but {} answers", questions.len(), answers.len())));
    }

    let mut turns = Vec::with_capacity(questions.len());
    for q in questions {
        let a = answers.get(&q.turn_id).ok_or_else(|| schema(format!("question turn {} has no answer", q.turn_id)))?;
        let rationale_span = if a.span_start < 0 || a.span_end < 0 || a.span_start >= a.span_end {
            None
        } else {
            let start = offsets
                .byte(a.span_start as usize)
                .ok_or_else(|| schema(format!("turn {} span out of range", q.turn_id)))?;
            let end = offsets
                .byte(a.span_end as usize)
                .ok_or_else(|| schema(format!("turn {} span out of range", q.turn_id)))?;
            Some((start, end))
        };
        turns.push(QATurn {
            turn_id: q.turn_id,
            question: q.input_text.clone(),
            answer: a.input_text.clone(),
            rationale_text: a.span_text.clone(),
            rationale_span,
        });
    }
    Conversation::new(record.id.clone(), context, turns)
}

/// Character index to byte offset table; index `len` maps to the end.
struct CharOffsets(Vec<usize>);

impl CharOffsets {
    fn new(text: &str) -> Self {
        let mut v: Vec<usize> = text.char_indices().map(|(b, _)| b).collect();
        v.push(text.len());
        CharOffsets(v)
    }

    fn byte(&self, char_index: usize) -> Option<usize> {
        self.0.get(char_index).copied()
    }

    fn char_index(&self, byte: usize) -> usize {
        self.0.partition_point(|&b| b < byte)
    }
}

/// Serializes conversations to the CoQA layout accepted by [`parse_coqa`].
/// Turns without a rationale span are written with CoQA's `-1` marker.
pub fn to_coqa_json(conversations: &[Conversation]) -> serde_json::Value {
    let data = conversations
        .iter()
        .map(|conv| {
            let offsets = CharOffsets::new(conv.context.raw_text());
            CoqaRecord {
                id: conv.id.clone(),
                story: conv.context.raw_text().to_owned(),
                questions: conv
                    .turns
                    .iter()
                    .map(|t| CoqaQuestion { input_text: t.question.clone(), turn_id: t.turn_id })
                    .collect(),
                answers: conv
                    .turns
                    .iter()
                    .map(|t| {
                        let (start, end) = match t.rationale_span {
                            Some((s, e)) => (offsets.char_index(s) as i64, offsets.char_index(e) as i64),
                            None => (-1, -1),
                        };
                        CoqaAnswer {
                            input_text: t.answer.clone(),
                            span_text: t.rationale_text.clone(),
                            span_start: start,
                            span_end: end,
                            turn_id: t.turn_id,
                        }
                    })
                    .collect(),
            }
        })
        .collect();
    serde_json::to_value(CoqaFile { version: Some("1.0".into()), data }).expect("CoQA records serialize")
}
