//! Acceptance gate. Runs every primary criterion, prints one PASS/FAIL line
//! each and exits non-zero if any fails.

mod common;

use std::collections::HashSet;
use std::process::{Command, ExitCode};
use std::sync::Arc;
use std::time::{Duration, Instant};

use cohs_cqg::corpus::{locate_rationale, parse_coqa, Conversation, TurnTask};
use cohs_cqg::metrics::{corpus_bleu, rouge_l, tokenize};
use cohs_cqg::pipeline::{filter_question, normalize_answer, prepare_prompt, relevance_for, Verdict};
use cohs_cqg::relevance::RelevanceMatrix;
use cohs_cqg::selector::{
    cohs_select, dyn_cs_select, dyn_hs_select, oracle_select, select, static_five_window, Selection, SelectionMode,
    SelectionParams, EPS,
};
use cohs_cqg::services::{make_stub_suite, Clients, Embedder, StubEmbedder};
use cohs_cqg::{Error, Result};

const INSTANCES: usize = 1000;
const SEED: u64 = 20_231_211;

type Check<'a> = Box<dyn Fn() -> Outcome + 'a>;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn naive_block(t: &RelevanceMatrix, s: &Selection) -> f64 {
    let h = t.cols();
    let mut total = 0.0;
    for i in s.window() {
        for j in h - s.k..h {
            total += t.get(i, j);
        }
    }
    total
}

fn oracle_equivalence(instances: &[common::Instance]) -> Outcome {
    let started = Instant::now();
    let mut mismatches = 0;
    let mut compared = 0;
    for inst in instances {
        for p in common::THRESHOLDS {
            let params = SelectionParams::cohs(p).unwrap();
            let fast =
                if inst.t.cols() > 0 { cohs_select(&inst.t, inst.c_s, p) } else { select(&inst.t, inst.c_s, &params) };
            compared += 1;
            if fast.ok() != oracle_select(&inst.t, inst.c_s, &params).ok() {
                mismatches += 1;
            }
        }
    }
    let elapsed = started.elapsed();
    outcome(
        mismatches == 0 && elapsed < Duration::from_secs(10),
        format!("{compared} selections, {mismatches} mismatches, {:.2}s", elapsed.as_secs_f64()),
    )
}

fn constraint_suite(instances: &[common::Instance]) -> Outcome {
    let mut checked = 0;
    let mut violations = Vec::new();
    let mut empty_history = 0;
    for (n, inst) in instances.iter().enumerate() {
        let (m, h) = (inst.t.rows(), inst.t.cols());
        if h == 0 {
            if !matches!(cohs_select(&inst.t, inst.c_s, 1.0), Err(Error::EmptyHistory)) {
                violations.push(format!("#{n}: empty history accepted"));
            }
            empty_history += 1;
            continue;
        }
        for p in common::THRESHOLDS {
            let s = cohs_select(&inst.t, inst.c_s, p).unwrap();
            if s.fallback {
                continue;
            }
            checked += 1;
            let contiguous = s.u >= 1 && s.window().end <= m;
            let has_rationale = s.window().contains(&inst.c_s);
            let has_last_turn = s.k >= 1 && s.k <= h && s.history(h).contains(&(h - 1));
            let sum = naive_block(&inst.t, &s);
            let reaches = sum >= p - EPS && (sum - s.achieved_sum).abs() <= 1e-12;
            if !(contiguous && has_rationale && has_last_turn && reaches) {
                violations.push(format!("#{n} p={p}: {s:?}"));
            }
        }
    }
    outcome(
        violations.is_empty(),
        format!(
            "{checked} non-fallback selections, {} violations, {empty_history} empty-history instances rejected{}",
            violations.len(),
            violations.first().map(|v| format!("; first: {v}")).unwrap_or_default()
        ),
    )
}

fn monotonicity(instances: &[common::Instance]) -> Outcome {
    let ps: Vec<f64> = common::THRESHOLDS.into_iter().chain([f64::INFINITY]).collect();
    let mut violations = 0;
    for inst in instances {
        let costs: Vec<usize> =
            ps.iter().map(|&p| select(&inst.t, inst.c_s, &SelectionParams::cohs(p).unwrap()).unwrap().cost()).collect();
        if costs.windows(2).any(|w| w[0] > w[1]) {
            violations += 1;
        }
    }
    outcome(
        violations == 0,
        format!("{} instances x {} thresholds, {violations} violations", instances.len(), ps.len()),
    )
}

fn edge_rows(instances: &[common::Instance]) -> Outcome {
    let mut bad = 0;
    let mut checked = 0;
    for inst in instances {
        let (m, h) = (inst.t.rows(), inst.t.cols());
        let hs = dyn_hs_select(&inst.t, 0.0).unwrap();
        checked += 1;
        if (hs.window_start, hs.u, hs.k) != (0, m, 0) {
            bad += 1;
        }
        if h == 0 {
            continue;
        }
        for k_fixed in [1, 3] {
            let cs = dyn_cs_select(&inst.t, inst.c_s, 0.0, k_fixed).unwrap();
            checked += 1;
            if (cs.window_start, cs.u, cs.k, cs.fallback) != (inst.c_s, 1, k_fixed.min(h), false) {
                bad += 1;
            }
        }
    }
    outcome(bad == 0, format!("{checked} edge selections, {bad} wrong"))
}

/// Five sentences around `s` (1-based), written out case by case.
fn static_expected(m: usize, s: usize) -> Vec<usize> {
    if m <= 5 {
        (1..=m).collect()
    } else if 3 <= s && s <= m - 2 {
        vec![s - 2, s - 1, s, s + 1, s + 2]
    } else if s <= 2 {
        vec![1, 2, 3, 4, 5]
    } else {
        vec![m - 4, m - 3, m - 2, m - 1, m]
    }
}

fn static_rule() -> Outcome {
    let mut wrong = Vec::new();
    let mut total = 0;
    for m in 5..=12 {
        for s in 1..=m {
            total += 1;
            let got: Vec<usize> = static_five_window(m, s).unwrap().map(|i| i + 1).collect();
            if got != static_expected(m, s) {
                wrong.push(format!("m={m} s={s}: {got:?}"));
            }
        }
    }
    outcome(
        wrong.is_empty(),
        format!(
            "{total} (m, s) pairs, {} wrong{}",
            wrong.len(),
            wrong.iter().map(|w| format!("; {w}")).collect::<String>()
        ),
    )
}

fn metrics_goldens() -> Outcome {
    let rouge = rouge_l(&tokenize("the cat"), &tokenize("the cat sat")).unwrap();
    let refs = vec![tokenize("where did the white kitten live ?"), tokenize("who did she live with in the barn ?")];
    let identical = corpus_bleu(&refs, &refs, 4).unwrap();
    let bp = corpus_bleu(&[tokenize("a b c d")], &[tokenize("a b c")], 4).unwrap();
    // exp(1 - 4/3)
    let bp_hand = 0.716_531_310_573_789_3;
    let pass = rouge == 0.8
        && identical.bleu.iter().all(|&b| b == 1.0)
        && (bp.brevity_penalty - bp_hand).abs() < 1e-9
        && (bp.b(1) - bp_hand).abs() < 1e-9;
    outcome(
        pass,
        format!("ROUGE-L {rouge}, identical BLEU {:?}, BP {} (hand {bp_hand})", identical.bleu, bp.brevity_penalty),
    )
}

fn prompt_goldens(corpus: &[Conversation]) -> Outcome {
    let golden = std::fs::read_to_string(common::golden("prompts_stub7_p1.txt")).unwrap();
    let clients = make_stub_suite(7);
    let params = SelectionParams::cohs(1.0).unwrap();
    let mut lines = Vec::new();
    let mut layout_ok = true;
    for conv in corpus {
        for turn in &conv.turns {
            let Ok(task) = TurnTask::from_conversation(conv, turn.turn_id) else { continue };
            let prompt = prepare_prompt(&task, &params, &clients).unwrap().prompt;
            let head = format!("Answer: {}, {} Context: ", turn.answer, turn.rationale_text);
            layout_ok &= prompt.starts_with(&head) && prompt.contains(" [SEP] ") == (turn.turn_id > 1);
            lines.push(format!("{}:{}\t{prompt}\n", conv.id, turn.turn_id));
        }
    }
    let identical = lines.concat() == golden;
    outcome(identical && layout_ok, format!("{} prompts, byte-identical {identical}, layout {layout_ok}", lines.len()))
}

fn pipeline_determinism() -> Outcome {
    let context = common::fixture("context.txt");
    let run = || {
        let out = Command::new(env!("CARGO_BIN_EXE_cohs"))
            .args(["pipeline", "--context"])
            .arg(&context)
            .args(["--id", "village", "--p", "1"])
            .args(["--embedder", "stub:7", "--generator", "stub:7", "--qa", "stub:7", "--extractor", "stub:7"])
            .output()
            .unwrap();
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        out.stdout
    };
    let runs = [run(), run(), run()];
    let identical = runs.iter().all(|r| *r == runs[0]);
    let conv = &parse_coqa(std::str::from_utf8(&runs[0]).unwrap()).unwrap()[0];
    let answers: HashSet<String> = conv.turns.iter().map(|t| normalize_answer(&t.answer)).collect();
    let distinct = answers.len() == conv.turns.len();
    let clients = make_stub_suite(7);
    let refiltered = conv.turns.iter().all(|t| {
        filter_question(&t.question, &t.answer, conv.context.raw_text(), &clients).unwrap() == Verdict::Accept
    });
    outcome(
        identical && distinct && refiltered && !conv.turns.is_empty(),
        format!(
            "3 runs identical {identical}, {} turns, distinct answers {distinct}, filter re-check {refiltered}",
            conv.turns.len()
        ),
    )
}

struct ScaledEmbedder {
    inner: StubEmbedder,
    factor: f64,
}

impl Embedder for ScaledEmbedder {
    fn embed_batch(&self, texts: &[String]) -> Result<Vec<Vec<f64>>> {
        Ok(texts.iter().map(|t| self.inner.embed(t).into_iter().map(|v| v * self.factor).collect()).collect())
    }
}

fn fixture_selections(corpus: &[Conversation], clients: &Clients, params: &SelectionParams) -> Vec<Selection> {
    let mut out = Vec::new();
    for conv in corpus {
        let full = relevance_for(&conv.context, &conv.turns, clients).unwrap();
        for (i, turn) in conv.turns.iter().enumerate() {
            let Some(span) = turn.rationale_span else { continue };
            let c_s = locate_rationale(&conv.context, span).unwrap();
            out.push(select(&full.leading_columns(i).unwrap(), c_s, params).unwrap());
        }
    }
    out
}

fn scale_invariance(corpus: &[Conversation]) -> Outcome {
    let plain = make_stub_suite(7);
    let scaled =
        make_stub_suite(7).with_embedder(Arc::new(ScaledEmbedder { inner: StubEmbedder::new(7), factor: 3.5 }));
    let mut total = 0;
    let mut differing = 0;
    let mut bitwise = true;
    for mode in [SelectionMode::Cohs, SelectionMode::DynCs, SelectionMode::DynHs, SelectionMode::Static] {
        for p in common::THRESHOLDS.into_iter().chain([f64::INFINITY]) {
            let params = SelectionParams::new(p, mode, 3).unwrap();
            let a = fixture_selections(corpus, &plain, &params);
            let b = fixture_selections(corpus, &scaled, &params);
            for (x, y) in a.iter().zip(&b) {
                total += 1;
                bitwise &= x == y;
                let same = (x.window_start, x.u, x.k, x.fallback) == (y.window_start, y.u, y.k, y.fallback)
                    && (x.achieved_sum - y.achieved_sum).abs() <= 1e-9;
                if !same {
                    differing += 1;
                }
            }
        }
    }
    outcome(differing == 0, format!("{total} fixture selections, {differing} differ, bitwise-identical sums {bitwise}"))
}

fn main() -> ExitCode {
    let instances = common::instances(SEED, INSTANCES);
    let corpus = common::fixture_corpus();
    let criteria: Vec<(&str, Check)> = vec![
        ("selector oracle equivalence", Box::new(|| oracle_equivalence(&instances))),
        ("constraint suite", Box::new(|| constraint_suite(&instances))),
        ("monotonicity in p", Box::new(|| monotonicity(&instances))),
        ("dyn-CS / dyn-HS p=0 edge rows", Box::new(|| edge_rows(&instances))),
        ("static five-sentence rule", Box::new(static_rule)),
        ("metric goldens", Box::new(metrics_goldens)),
        ("prompt goldens", Box::new(|| prompt_goldens(&corpus))),
        ("pipeline determinism", Box::new(pipeline_determinism)),
        ("scale invariance x3.5", Box::new(|| scale_invariance(&corpus))),
    ];
    let mut failed = 0;
    for (name, check) in &criteria {
        let result = check();
        println!("{} {name}: {}", if result.pass { "PASS" } else { "FAIL" }, result.detail);
        failed += usize::from(!result.pass);
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
