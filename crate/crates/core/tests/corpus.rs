mod common;

use cohs_cqg::corpus::{history_prefix, locate_rationale, parse_coqa, to_coqa_json, TurnTask};

#[test]
fn fixture_parses_with_expected_shape() {
    let corpus = common::fixture_corpus();
    let counts: Vec<usize> = corpus.iter().map(|c| c.turns.len()).collect();
    assert_eq!(counts, [5, 5]);
    assert!(corpus.iter().all(|c| c.context.m() >= 8));
}

#[test]
fn every_rationale_span_locates() {
    let mut located = 0;
    for conv in common::fixture_corpus() {
        for turn in &conv.turns {
            let Some(span) = turn.rationale_span else { continue };
            let idx = locate_rationale(&conv.context, span).unwrap();
            let sentence = conv.context.sentence(idx).unwrap();
            assert!(sentence.char_start < span.1 && span.0 < sentence.char_end, "{}:{}", conv.id, turn.turn_id);
            located += 1;
        }
    }
    assert_eq!(located, 9);
}

#[test]
fn unknown_answer_has_no_span_and_cannot_be_a_target() {
    let corpus = common::fixture_corpus();
    let conv = &corpus[1];
    assert_eq!(conv.turns[3].rationale_span, None);
    assert!(TurnTask::from_conversation(conv, 4).is_err());
    assert_eq!(history_prefix(conv, 4).unwrap().len(), 3);
}

#[test]
fn multibyte_offsets_survive_a_round_trip() {
    let corpus = common::fixture_corpus();
    let rosa = &corpus[1].turns[1];
    let (s, e) = rosa.rationale_span.unwrap();
    assert_eq!(&corpus[1].context.raw_text()[s..e], "Rosa Díaz");

    let again = parse_coqa(&to_coqa_json(&corpus).to_string()).unwrap();
    assert_eq!(again, corpus);
}
