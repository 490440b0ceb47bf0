//! Answer-aware generation and the answer-unaware conversation loop.
//!
//! The unaware loop walks the context front to back: the earliest sentence
//! not yet used as a rationale becomes the next rationale, the span
//! extractor proposes answers inside it, each candidate goes through
//! selection and generation, and the first question the QA model answers
//! with the same (normalised) answer is kept. A rationale is retired after
//! it yields a question or after all its candidates are rejected.

use std::collections::BTreeSet;

use serde::Serialize;

use crate::corpus::{locate_rationale, ContextDoc, Conversation, QATurn, Target, TurnTask};
use crate::error::{Error, Result};
use crate::prompting::{assemble_prompt, PromptSpec};
use crate::relevance::{build_relevance_matrix, turn_text, RelevanceMatrix};
use crate::selector::{select, Selection, SelectionParams};
use crate::services::Clients;

/// SQuAD-style answer normalisation: lowercase, drop punctuation and the
/// articles a/an/the, collapse whitespace.
pub fn normalize_answer(text: &str) -> String {
    let lowered = text.to_lowercase();
    let no_punct: String =
        lowered.chars().map(|c| if c.is_ascii_punctuation() || c.is_ascii_control() { ' ' } else { c }).collect();
    no_punct.split_whitespace().filter(|w| !matches!(*w, "a" | "an" | "the")).collect::<Vec<_>>().join(" ")
}

/// Embeds the context sentences and history turns in one batch and builds
/// the relevance matrix.
pub fn relevance_for(context: &ContextDoc, history: &[QATurn], clients: &Clients) -> Result<RelevanceMatrix> {
    let mut texts = context.sentence_texts();
    texts.extend(history.iter().map(|t| turn_text(&t.question, &t.answer)));
    let mut embs = clients.embed_batch(&texts)?;
    let turns = embs.split_off(context.m());
    build_relevance_matrix(&embs, &turns)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PreparedPrompt {
    pub prompt: String,
    pub rationale_sentence: usize,
    pub selection: Selection,
}

/// Everything up to the generator call: locate `c_s`, score, select and
/// lay out the model input.
pub fn prepare_prompt(task: &TurnTask, params: &SelectionParams, clients: &Clients) -> Result<PreparedPrompt> {
    let target =
        task.target.as_ref().ok_or_else(|| Error::InvalidParams("answer-aware task needs a target answer".into()))?;
    let c_s = locate_rationale(&task.context, target.rationale_span)?;
    let t = relevance_for(&task.context, &task.history, clients)?;
    let selection = select(&t, c_s, params)?;
    let sentences = task.context.sentences();
    let spec = PromptSpec {
        answer: target.answer.clone(),
        rationale: target.rationale_text.clone(),
        window: sentences[selection.window()].iter().map(|s| s.text.clone()).collect(),
        history: task.history[selection.history(task.history.len())]
            .iter()
            .map(|t| (t.question.clone(), t.answer.clone()))
            .collect(),
    };
    Ok(PreparedPrompt { prompt: assemble_prompt(&spec)?, rationale_sentence: c_s, selection })
}

/// Generates the question for an answer-aware task.
pub fn answer_aware_generate(task: &TurnTask, params: &SelectionParams, clients: &Clients) -> Result<String> {
    let run = || -> Result<String> {
        let prepared = prepare_prompt(task, params, clients)?;
        clients.generate(&prepared.prompt)
    };
    run().map_err(|e| e.at_turn(&task.conversation_id, task.n))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConversationState {
    pub conversation_id: String,
    pub context: ContextDoc,
    pub generated_turns: Vec<QATurn>,
    pub used_rationale_sentences: BTreeSet<usize>,
    pub used_answers: BTreeSet<String>,
}

impl ConversationState {
    pub fn new(conversation_id: impl Into<String>, context: ContextDoc) -> Self {
        ConversationState {
            conversation_id: conversation_id.into(),
            context,
            generated_turns: Vec::new(),
            used_rationale_sentences: BTreeSet::new(),
            used_answers: BTreeSet::new(),
        }
    }

    pub fn into_conversation(self) -> Result<Conversation> {
        Conversation::new(self.conversation_id, self.context, self.generated_turns)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CandidateAnswers {
    pub rationale_index: usize,
    pub spans: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    Accept,
    Reject { reason: RejectReason },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RejectReason {
    AnswerMismatch { predicted: String },
}

/// Which unaware-loop steps run; disabling either gives the ablations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipelineOptions {
    pub params: SelectionParams,
    /// When false the whole rationale sentence is the answer.
    pub use_extractor: bool,
    /// When false every generated question is accepted.
    pub use_filter: bool,
}

impl PipelineOptions {
    pub fn new(params: SelectionParams) -> Self {
        PipelineOptions { params, use_extractor: true, use_filter: true }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeneratedTurn {
    pub question: String,
    pub answer: String,
    pub rationale_index: usize,
}

pub fn select_next_rationale(state: &ConversationState) -> Result<usize> {
    (0..state.context.m()).find(|i| !state.used_rationale_sentences.contains(i)).ok_or(Error::Exhausted)
}

/// Extractor spans for the rationale sentence, minus answers already used.
pub fn extract_candidate_answers(
    state: &ConversationState,
    rationale_index: usize,
    clients: &Clients,
) -> Result<CandidateAnswers> {
    let sentence = state.context.sentence(rationale_index)?;
    let raw = clients.extract_spans(&sentence.text)?;
    Ok(CandidateAnswers { rationale_index, spans: fresh_answers(state, raw) })
}

fn fresh_answers(state: &ConversationState, raw: Vec<String>) -> Vec<String> {
    let mut seen = BTreeSet::new();
    raw.into_iter()
        .filter(|s| {
            let norm = normalize_answer(s);
            !norm.is_empty() && !state.used_answers.contains(&norm) && seen.insert(norm)
        })
        .collect()
}

/// Accepts `question` iff the QA model's answer matches `answer` after
/// normalisation.
pub fn filter_question(question: &str, answer: &str, context_text: &str, clients: &Clients) -> Result<Verdict> {
    if question.trim().is_empty() || answer.trim().is_empty() {
        return Err(Error::EmptyInput("question or answer"));
    }
    let predicted = clients.answer(question, context_text)?;
    if normalize_answer(&predicted) == normalize_answer(answer) {
        Ok(Verdict::Accept)
    } else {
        Ok(Verdict::Reject { reason: RejectReason::AnswerMismatch { predicted } })
    }
}

/// One pass over the next unused rationale. Returns `None` when none of its
/// candidates survives; the rationale is retired either way.
pub fn answer_unaware_step(
    state: &mut ConversationState,
    opts: &PipelineOptions,
    clients: &Clients,
) -> Result<Option<GeneratedTurn>> {
    let idx = select_next_rationale(state)?;
    let sentence = state.context.sentence(idx)?.clone();
    let candidates = if opts.use_extractor {
        extract_candidate_answers(state, idx, clients)?.spans
    } else {
        fresh_answers(state, vec![sentence.text.clone()])
    };

    for candidate in candidates {
        let task = TurnTask::answer_aware(
            state.conversation_id.clone(),
            state.context.clone(),
            state.generated_turns.clone(),
            Target {
                answer: candidate.clone(),
                rationale_text: sentence.text.clone(),
                rationale_span: (sentence.char_start, sentence.char_end),
            },
        );
        let question = answer_aware_generate(&task, &opts.params, clients)?;
        let verdict = if opts.use_filter {
            filter_question(&question, &candidate, state.context.raw_text(), clients)
                .map_err(|e| e.at_turn(&state.conversation_id, task.n))?
        } else {
            Verdict::Accept
        };
        if verdict == Verdict::Accept {
            state.generated_turns.push(QATurn {
                turn_id: task.n,
                question: question.clone(),
                answer: candidate.clone(),
                rationale_text: sentence.text.clone(),
                rationale_span: Some((sentence.char_start, sentence.char_end)),
            });
            state.used_rationale_sentences.insert(idx);
            state.used_answers.insert(normalize_answer(&candidate));
            return Ok(Some(GeneratedTurn { question, answer: candidate, rationale_index: idx }));
        }
    }
    state.used_rationale_sentences.insert(idx);
    Ok(None)
}

/// Runs the unaware loop until `max_turns` questions are accepted or the
/// context runs out of rationales.
pub fn run_conversation(
    conversation_id: &str,
    context: ContextDoc,
    max_turns: usize,
    opts: &PipelineOptions,
    clients: &Clients,
) -> Result<Vec<QATurn>> {
    if max_turns == 0 {
        return Err(Error::InvalidParams("max_turns must be at least 1".into()));
    }
    let mut state = ConversationState::new(conversation_id, context);
    while state.generated_turns.len() < max_turns {
        match answer_unaware_step(&mut state, opts, clients) {
            Ok(_) => {}
            Err(Error::Exhausted) => break,
            Err(e) => return Err(e),
        }
    }
    Ok(state.generated_turns)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::services::make_stub_suite;

    #[test]
    fn normalization() {
        assert_eq!(normalize_answer("The Cat"), "cat");
        assert_eq!(normalize_answer("  cat "), "cat");
        assert_eq!(normalize_answer("an apple, a pear!"), "apple pear");
        assert_eq!(normalize_answer("Théâtre"), "théâtre");
        assert_eq!(normalize_answer("the"), "");
    }

    fn state(text: &str) -> ConversationState {
        ConversationState::new("c", ContextDoc::new(text).unwrap())
    }

    #[test]
    fn next_rationale() {
        let mut s = state("A. B. C. D. E.");
        assert_eq!(select_next_rationale(&s).unwrap(), 0);
        s.used_rationale_sentences.extend([0, 1]);
        assert_eq!(select_next_rationale(&s).unwrap(), 2);
        s.used_rationale_sentences.extend(0..5);
        assert!(matches!(select_next_rationale(&s), Err(Error::Exhausted)));
    }

    #[test]
    fn candidates_drop_used_answers() {
        let clients = make_stub_suite(7);
        let mut s = state("Mary met John.");
        let all = extract_candidate_answers(&s, 0, &clients).unwrap();
        assert_eq!(all.spans, vec!["Mary", "John"]);
        s.used_answers.insert("mary".into());
        assert_eq!(extract_candidate_answers(&s, 0, &clients).unwrap().spans, vec!["John"]);
        let s = state("it was so.");
        assert!(extract_candidate_answers(&s, 0, &clients).unwrap().spans.is_empty());
    }

    struct Says(&'static str);
    impl crate::services::QuestionAnswerer for Says {
        fn answer(&self, _: &str, _: &str) -> Result<String> {
            Ok(self.0.to_owned())
        }
    }

    #[test]
    fn filter_uses_normalized_match() {
        let mut clients = make_stub_suite(7);
        clients.qa = std::sync::Arc::new(Says("The Cat"));
        assert_eq!(filter_question("Q?", "cat", "ctx", &clients).unwrap(), Verdict::Accept);
        clients.qa = std::sync::Arc::new(Says("cat "));
        assert_eq!(filter_question("Q?", "cat", "ctx", &clients).unwrap(), Verdict::Accept);
        clients.qa = std::sync::Arc::new(Says("dog"));
        assert_eq!(
            filter_question("Q?", "cat", "ctx", &clients).unwrap(),
            Verdict::Reject { reason: RejectReason::AnswerMismatch { predicted: "dog".into() } }
        );
    }

    #[test]
    fn step_with_only_used_answers_retires_rationale() {
        let clients = make_stub_suite(7);
        let mut s = state("Mary met John. Then it rained.");
        s.used_answers.extend(["mary".to_string(), "john".to_string()]);
        let opts = PipelineOptions::new(SelectionParams::cohs(1.0).unwrap());
        assert_eq!(answer_unaware_step(&mut s, &opts, &clients).unwrap(), None);
        assert!(s.used_rationale_sentences.contains(&0));
        assert!(s.generated_turns.is_empty());
    }

    #[test]
    fn step_errors_when_exhausted() {
        let clients = make_stub_suite(7);
        let mut s = state("Mary met John.");
        s.used_rationale_sentences.insert(0);
        let opts = PipelineOptions::new(SelectionParams::cohs(1.0).unwrap());
        assert!(matches!(answer_unaware_step(&mut s, &opts, &clients), Err(Error::Exhausted)));
    }

    #[test]
    fn empty_extraction_gives_empty_conversation() {
        let clients = make_stub_suite(7);
        let opts = PipelineOptions::new(SelectionParams::cohs(1.0).unwrap());
        let turns = run_conversation("c", ContextDoc::new("it was so.").unwrap(), 5, &opts, &clients).unwrap();
        assert!(turns.is_empty());
        assert!(run_conversation("c", ContextDoc::new("x.").unwrap(), 0, &opts, &clients).is_err());
    }
}
