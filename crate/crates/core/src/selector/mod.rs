//! Top-p joint selection of a context window and a history suffix.
//!
//! Given the relevance matrix `T` (sentences × history turns), the selectors
//! look for the contiguous sentence window `[start, start + u)` that contains
//! the rationale sentence `c_s`, together with the last `k` history turns,
//! such that the summed relevance over that block reaches the threshold `p`
//! while `u + k` is as small as possible.
//!
//! Among pairs with the same `u + k` the one with the larger block sum wins,
//! then the smaller `k`, then the smaller `start`. If no pair reaches `p` the
//! selection falls back to the full context and full history.
//!
//! Two one-sided variants freeze one dimension: [`dyn_cs_select`] fixes the
//! history to the last `k_fixed` turns and [`dyn_hs_select`] fixes the
//! context to all sentences. [`static_five_window`] is the fixed five-sentence
//! heuristic used when there is no history.

mod oracle;
mod prefix;

use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use oracle::oracle_select;
pub use prefix::PrefixSumTable;

use crate::error::{Error, Result};
use crate::relevance::RelevanceMatrix;

/// Slack on threshold comparisons: a block is feasible when `sum >= p - EPS`.
pub const EPS: f64 = 1e-9;

/// History length used by the context-only variant unless overridden.
pub const DEFAULT_K_FIXED: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionMode {
    /// Joint context and history selection.
    Cohs,
    /// Context only; history fixed to the last `k_fixed` turns.
    DynCs,
    /// History only; full context.
    DynHs,
    /// Five sentences around the rationale, full history.
    Static,
}

impl fmt::Display for SelectionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SelectionMode::Cohs => "cohs",
            SelectionMode::DynCs => "dyn_cs",
            SelectionMode::DynHs => "dyn_hs",
            SelectionMode::Static => "static",
        })
    }
}

impl FromStr for SelectionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cohs" => Ok(SelectionMode::Cohs),
            "dyn_cs" | "dyn-cs" => Ok(SelectionMode::DynCs),
            "dyn_hs" | "dyn-hs" => Ok(SelectionMode::DynHs),
            "static" => Ok(SelectionMode::Static),
            other => Err(Error::InvalidParams(format!("unknown selection mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectionParams {
    /// Threshold; `f64::INFINITY` forces the full selection.
    pub p: f64,
    pub mode: SelectionMode,
    pub k_fixed: usize,
}

impl SelectionParams {
    pub fn new(p: f64, mode: SelectionMode, k_fixed: usize) -> Result<Self> {
        let params = SelectionParams { p, mode, k_fixed };
        params.validate()?;
        Ok(params)
    }

    pub fn cohs(p: f64) -> Result<Self> {
        Self::new(p, SelectionMode::Cohs, DEFAULT_K_FIXED)
    }

    pub fn validate(&self) -> Result<()> {
        check_threshold(self.p)?;
        if self.mode == SelectionMode::DynCs && self.k_fixed == 0 {
            return Err(Error::InvalidParams("k_fixed must be at least 1".into()));
        }
        Ok(())
    }
}

/// Parses a threshold, accepting `inf` for the full-selection sentinel.
pub fn parse_threshold(s: &str) -> Result<f64> {
    let p = match s.trim() {
        "inf" | "Inf" | "INF" | "∞" => f64::INFINITY,
        other => other.parse::<f64>().map_err(|_| Error::InvalidParams(format!("bad threshold {other:?}")))?,
    };
    check_threshold(p)?;
    Ok(p)
}

fn check_threshold(p: f64) -> Result<()> {
    if p.is_nan() || p < 0.0 {
        return Err(Error::InvalidParams(format!("threshold must be >= 0 or inf, got {p}")));
    }
    Ok(())
}

/// A chosen sentence window and history suffix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    /// First selected sentence (0-based).
    pub window_start: usize,
    /// Number of selected sentences.
    pub u: usize,
    /// Number of trailing history turns.
    pub k: usize,
    pub achieved_sum: f64,
    pub fallback: bool,
}

impl Selection {
    pub fn window(&self) -> Range<usize> {
        self.window_start..self.window_start + self.u
    }

    /// Selected history columns given the full history length `h`.
    pub fn history(&self, h: usize) -> Range<usize> {
        h - self.k..h
    }

    pub fn cost(&self) -> usize {
        self.u + self.k
    }
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    start: usize,
    u: usize,
    k: usize,
    sum: f64,
}

impl Candidate {
    /// Objective order: smaller `u + k`, larger sum, smaller `k`, smaller start.
    fn beats(&self, other: &Candidate) -> bool {
        let (a, b) = (self.u + self.k, other.u + other.k);
        if a != b {
            return a < b;
        }
        if self.sum != other.sum {
            return self.sum > other.sum;
        }
        (self.k, self.start) < (other.k, other.start)
    }

    fn into_selection(self) -> Selection {
        Selection { window_start: self.start, u: self.u, k: self.k, achieved_sum: self.sum, fallback: false }
    }
}

fn check_anchor(t: &RelevanceMatrix, c_s: usize) -> Result<()> {
    if c_s >= t.rows() {
        return Err(Error::index(c_s, format!("rationale sentence outside 0..{}", t.rows())));
    }
    Ok(())
}

/// Searches windows containing `c_s` and suffix lengths in `ks` for the best
/// feasible block. Prefix sums screen candidates; the reported sum of every
/// contender is the row-major block sum, so ties and threshold decisions do
/// not depend on prefix-sum rounding.
fn search(t: &RelevanceMatrix, c_s: usize, ks: Range<usize>, p: f64) -> Option<Candidate> {
    let (m, h) = (t.rows(), t.cols());
    let threshold = p - EPS;
    let table = PrefixSumTable::new(t);
    let mut best: Option<Candidate> = None;
    for start in 0..=c_s {
        for end in c_s + 1..=m {
            let u = end - start;
            for k in ks.clone() {
                if best.is_some_and(|b| u + k > b.u + b.k) {
                    continue;
                }
                if table.rect(start, end, h - k, h) < threshold - EPS {
                    continue;
                }
                let sum = t.block_sum(start..end, h - k..h);
                if sum < threshold {
                    continue;
                }
                let cand = Candidate { start, u, k, sum };
                if best.is_none_or(|b| cand.beats(&b)) {
                    best = Some(cand);
                }
            }
        }
    }
    best
}

fn full_fallback(t: &RelevanceMatrix, k: usize) -> Selection {
    let h = t.cols();
    Selection { window_start: 0, u: t.rows(), k, achieved_sum: t.block_sum(0..t.rows(), h - k..h), fallback: true }
}

/// Joint selection: smallest `u + k` with block sum at least `p`.
pub fn cohs_select(t: &RelevanceMatrix, c_s: usize, p: f64) -> Result<Selection> {
    check_threshold(p)?;
    check_anchor(t, c_s)?;
    if t.cols() == 0 {
        return Err(Error::EmptyHistory);
    }
    Ok(match search(t, c_s, 1..t.cols() + 1, p) {
        Some(c) => c.into_selection(),
        None => full_fallback(t, t.cols()),
    })
}

/// Context-only selection against the last `min(k_fixed, h)` turns. At
/// `p = 0` the window is exactly the rationale sentence.
pub fn dyn_cs_select(t: &RelevanceMatrix, c_s: usize, p: f64, k_fixed: usize) -> Result<Selection> {
    check_threshold(p)?;
    check_anchor(t, c_s)?;
    if k_fixed == 0 {
        return Err(Error::InvalidParams("k_fixed must be at least 1".into()));
    }
    let h = t.cols();
    if h == 0 {
        return Err(Error::EmptyHistory);
    }
    let k = k_fixed.min(h);
    if p == 0.0 {
        return Ok(Selection {
            window_start: c_s,
            u: 1,
            k,
            achieved_sum: t.block_sum(c_s..c_s + 1, h - k..h),
            fallback: false,
        });
    }
    Ok(match search(t, c_s, k..k + 1, p) {
        Some(c) => c.into_selection(),
        None => full_fallback(t, k),
    })
}

/// History-only selection over the full context. `p = 0` selects no history.
pub fn dyn_hs_select(t: &RelevanceMatrix, p: f64) -> Result<Selection> {
    check_threshold(p)?;
    let (m, h) = (t.rows(), t.cols());
    let none = Selection { window_start: 0, u: m, k: 0, achieved_sum: 0.0, fallback: false };
    if p == 0.0 {
        return Ok(none);
    }
    if h == 0 {
        return Ok(Selection { fallback: 0.0 < p - EPS, ..none });
    }
    let table = PrefixSumTable::new(t);
    for k in 1..=h {
        if table.rect(0, m, h - k, h) < p - 2.0 * EPS {
            continue;
        }
        let sum = t.block_sum(0..m, h - k..h);
        if sum >= p - EPS {
            return Ok(Selection { window_start: 0, u: m, k, achieved_sum: sum, fallback: false });
        }
    }
    Ok(full_fallback(t, h))
}

/// Five sentences around the 1-based rationale sentence `s`, as a 0-based
/// range. Contexts of five or fewer sentences are returned whole.
pub fn static_five_window(m: usize, s: usize) -> Result<Range<usize>> {
    if s == 0 || s > m {
        return Err(Error::index(s, format!("rationale sentence outside 1..={m}")));
    }
    let (first, last) = if m <= 5 {
        (1, m)
    } else if 3 <= s && s + 2 <= m {
        (s - 2, s + 2)
    } else if s <= 2 {
        (1, 5)
    } else {
        (m - 4, m)
    };
    Ok(first - 1..last)
}

fn static_selection(t: &RelevanceMatrix, c_s: usize) -> Result<Selection> {
    check_anchor(t, c_s)?;
    let w = static_five_window(t.rows(), c_s + 1)?;
    let h = t.cols();
    Ok(Selection { window_start: w.start, u: w.len(), k: h, achieved_sum: t.block_sum(w, 0..h), fallback: false })
}

/// Runs the selector named by `params.mode`.
///
/// With no history, `cohs` and `dyn_cs` use the static five-sentence window
/// (or the full context when `p` is infinite).
pub fn select(t: &RelevanceMatrix, c_s: usize, params: &SelectionParams) -> Result<Selection> {
    params.validate()?;
    check_anchor(t, c_s)?;
    match params.mode {
        SelectionMode::Static => static_selection(t, c_s),
        SelectionMode::DynHs => dyn_hs_select(t, params.p),
        SelectionMode::Cohs | SelectionMode::DynCs if t.cols() == 0 => {
            if params.p.is_infinite() {
                Ok(full_fallback(t, 0))
            } else {
                static_selection(t, c_s)
            }
        }
        SelectionMode::Cohs => cohs_select(t, c_s, params.p),
        SelectionMode::DynCs => dyn_cs_select(t, c_s, params.p, params.k_fixed),
    }
}
