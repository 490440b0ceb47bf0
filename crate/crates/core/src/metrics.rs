//! Corpus BLEU, ROUGE-L and selection statistics.
//!
//! BLEU follows the usual corpus definition (clipped n-gram counts summed
//! over the corpus, uniform weights, brevity penalty over total lengths)
//! without smoothing, so an order with no matches zeroes every BLEU-n that
//! includes it.

use std::collections::HashMap;

use serde::Serialize;

use crate::corpus::{locate_rationale, Conversation};
use crate::error::{Error, Result};
use crate::pipeline::relevance_for;
use crate::selector::{select, SelectionMode, SelectionParams};
use crate::services::Clients;

/// Lowercase whitespace tokenisation.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace().map(str::to_lowercase).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BleuReport {
    /// `bleu[n - 1]` is BLEU-n.
    pub bleu: Vec<f64>,
    /// Modified n-gram precision per order.
    pub precisions: Vec<f64>,
    pub brevity_penalty: f64,
    pub hypothesis_length: usize,
    pub reference_length: usize,
}

impl BleuReport {
    pub fn b(&self, n: usize) -> f64 {
        self.bleu[n - 1]
    }
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *counts.entry(w).or_insert(0) += 1;
        }
    }
    counts
}

pub fn corpus_bleu(references: &[Vec<String>], hypotheses: &[Vec<String>], max_n: usize) -> Result<BleuReport> {
    if references.is_empty() || hypotheses.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    if references.len() != hypotheses.len() {
        return Err(Error::InvalidParams(format!(
            "{} references for {} hypotheses",
            references.len(),
            hypotheses.len()
        )));
    }
    if max_n == 0 {
        return Err(Error::InvalidParams("max_n must be at least 1".into()));
    }
    let mut matched = vec![0usize; max_n];
    let mut total = vec![0usize; max_n];
    let (mut hyp_len, mut ref_len) = (0, 0);
    for (r, h) in references.iter().zip(hypotheses) {
        hyp_len += h.len();
        ref_len += r.len();
        for n in 1..=max_n {
            let ref_counts = ngram_counts(r, n);
            for (gram, count) in ngram_counts(h, n) {
                matched[n - 1] += count.min(ref_counts.get(gram).copied().unwrap_or(0));
                total[n - 1] += count;
            }
        }
    }
    let precisions: Vec<f64> = matched.iter().zip(&total).map(|(&m, &t)| m as f64 / t.max(1) as f64).collect();
    let brevity_penalty = if hyp_len == 0 {
        0.0
    } else if hyp_len < ref_len {
        (1.0 - ref_len as f64 / hyp_len as f64).exp()
    } else {
        1.0
    };
    let mut bleu = Vec::with_capacity(max_n);
    let mut log_sum = 0.0;
    let mut zero = false;
    for (i, &p) in precisions.iter().enumerate() {
        if p == 0.0 {
            zero = true;
        } else {
            log_sum += p.ln();
        }
        bleu.push(if zero { 0.0 } else { brevity_penalty * (log_sum / (i + 1) as f64).exp() });
    }
    Ok(BleuReport { bleu, precisions, brevity_penalty, hypothesis_length: hyp_len, reference_length: ref_len })
}

fn lcs_len(a: &[String], b: &[String]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y { prev[j] + 1 } else { prev[j + 1].max(cur[j]) };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// ROUGE-L F1 from the longest common subsequence.
pub fn rouge_l(reference: &[String], hypothesis: &[String]) -> Result<f64> {
    if reference.is_empty() || hypothesis.is_empty() {
        return Err(Error::EmptyInput("rouge-l tokens"));
    }
    let l = lcs_len(reference, hypothesis) as f64;
    if l == 0.0 {
        return Ok(0.0);
    }
    let p = l / hypothesis.len() as f64;
    let r = l / reference.len() as f64;
    Ok(2.0 * p * r / (p + r))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    #[serde(flatten)]
    pub bleu: BleuReport,
    /// Mean per-segment ROUGE-L F1.
    pub rouge_l: f64,
    pub segments: usize,
}

/// BLEU-1..4 and mean ROUGE-L over line-aligned reference/hypothesis texts.
pub fn evaluate(references: &[String], hypotheses: &[String]) -> Result<EvalReport> {
    let refs: Vec<Vec<String>> = references.iter().map(|s| tokenize(s)).collect();
    let hyps: Vec<Vec<String>> = hypotheses.iter().map(|s| tokenize(s)).collect();
    let bleu = corpus_bleu(&refs, &hyps, 4)?;
    let mut total = 0.0;
    for (r, h) in refs.iter().zip(&hyps) {
        total += rouge_l(r, h).or_else(|e| match e {
            Error::EmptyInput(_) if r.is_empty() && h.is_empty() => Ok(1.0),
            Error::EmptyInput(_) => Ok(0.0),
            other => Err(other),
        })?;
    }
    Ok(EvalReport { bleu, rouge_l: total / refs.len() as f64, segments: refs.len() })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelectionStats {
    pub p: f64,
    pub mode: SelectionMode,
    pub avg_sentences: f64,
    pub avg_turns: f64,
    pub samples: usize,
    pub fallbacks: usize,
}

/// Runs the selector on every turn that has history and a locatable
/// rationale, and averages the selected sizes.
pub fn selection_stats(corpus: &[Conversation], params: &SelectionParams, clients: &Clients) -> Result<SelectionStats> {
    selection_stats_multi(corpus, std::slice::from_ref(params), clients)?.pop().ok_or(Error::EmptyCorpus)
}

/// Same as [`selection_stats`] for several parameter sets, embedding each
/// conversation only once.
pub fn selection_stats_multi(
    corpus: &[Conversation],
    params: &[SelectionParams],
    clients: &Clients,
) -> Result<Vec<SelectionStats>> {
    for p in params {
        p.validate()?;
    }
    let mut sums = vec![(0usize, 0usize, 0usize); params.len()];
    let mut samples = 0;
    for conv in corpus {
        let full = relevance_for(&conv.context, &conv.turns, clients).map_err(|e| e.at_turn(&conv.id, 0))?;
        for (i, turn) in conv.turns.iter().enumerate().skip(1) {
            let Some(span) = turn.rationale_span else { continue };
            let Ok(c_s) = locate_rationale(&conv.context, span) else { continue };
            let t = full.leading_columns(i)?;
            samples += 1;
            for (acc, p) in sums.iter_mut().zip(params) {
                let s = select(&t, c_s, p).map_err(|e| e.at_turn(&conv.id, turn.turn_id))?;
                acc.0 += s.u;
                acc.1 += s.k;
                acc.2 += usize::from(s.fallback);
            }
        }
    }
    if samples == 0 {
        return Err(Error::EmptyCorpus);
    }
    Ok(params
        .iter()
        .zip(sums)
        .map(|(p, (u, k, f))| SelectionStats {
            p: p.p,
            mode: p.mode,
            avg_sentences: u as f64 / samples as f64,
            avg_turns: k as f64 / samples as f64,
            samples,
            fallbacks: f,
        })
        .collect())
}
