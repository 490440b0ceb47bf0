//! Exhaustive reference selector. Enumerates every admissible window/suffix
//! pair, sums each block with a plain double loop and sorts the feasible ones.
//! Slow, obvious, and kept free of the fast path's prefix sums and pruning.

use std::cmp::Ordering;

use super::{Selection, SelectionMode, SelectionParams, EPS};
use crate::error::{Error, Result};
use crate::relevance::RelevanceMatrix;

struct Pair {
    start: usize,
    u: usize,
    k: usize,
    sum: f64,
}

fn naive_sum(t: &RelevanceMatrix, rows: (usize, usize), cols: (usize, usize)) -> f64 {
    let mut total = 0.0;
    for i in rows.0..rows.1 {
        for j in cols.0..cols.1 {
            total += t.get(i, j);
        }
    }
    total
}

fn order(a: &Pair, b: &Pair) -> Ordering {
    (a.u + a.k)
        .cmp(&(b.u + b.k))
        .then_with(|| b.sum.partial_cmp(&a.sum).expect("finite sums"))
        .then_with(|| a.k.cmp(&b.k))
        .then_with(|| a.start.cmp(&b.start))
}

fn best_of(mut pairs: Vec<Pair>, fallback: impl FnOnce() -> Selection) -> Selection {
    pairs.sort_by(order);
    match pairs.into_iter().next() {
        Some(p) => Selection { window_start: p.start, u: p.u, k: p.k, achieved_sum: p.sum, fallback: false },
        None => fallback(),
    }
}

fn windows_with(m: usize, c_s: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for start in 0..m {
        for end in start + 1..=m {
            if start <= c_s && c_s < end {
                out.push((start, end));
            }
        }
    }
    out
}

/// Brute-force counterpart of [`super::select`] for the given mode. Expected
/// to agree with the fast selectors field for field.
pub fn oracle_select(t: &RelevanceMatrix, c_s: usize, params: &SelectionParams) -> Result<Selection> {
    params.validate()?;
    let (m, h, p) = (t.rows(), t.cols(), params.p);
    if c_s >= m {
        return Err(Error::index(c_s, "rationale sentence"));
    }
    let full = |k: usize| Selection {
        window_start: 0,
        u: m,
        k,
        achieved_sum: naive_sum(t, (0, m), (h - k, h)),
        fallback: true,
    };

    match params.mode {
        SelectionMode::Static => Ok(static_by_centering(t, c_s)),
        SelectionMode::Cohs | SelectionMode::DynCs if h == 0 => {
            if p.is_infinite() {
                Ok(full(0))
            } else {
                Ok(static_by_centering(t, c_s))
            }
        }
        SelectionMode::Cohs => {
            let mut pairs = Vec::new();
            for (start, end) in windows_with(m, c_s) {
                for k in 1..=h {
                    let sum = naive_sum(t, (start, end), (h - k, h));
                    if sum >= p - EPS {
                        pairs.push(Pair { start, u: end - start, k, sum });
                    }
                }
            }
            Ok(best_of(pairs, || full(h)))
        }
        SelectionMode::DynCs => {
            let k = params.k_fixed.min(h);
            let mut pairs = Vec::new();
            for (start, end) in windows_with(m, c_s) {
                let sum = naive_sum(t, (start, end), (h - k, h));
                if p == 0.0 {
                    if end - start == 1 {
                        pairs.push(Pair { start, u: 1, k, sum });
                    }
                } else if sum >= p - EPS {
                    pairs.push(Pair { start, u: end - start, k, sum });
                }
            }
            Ok(best_of(pairs, || full(k)))
        }
        SelectionMode::DynHs => {
            if p == 0.0 {
                return Ok(Selection { window_start: 0, u: m, k: 0, achieved_sum: 0.0, fallback: false });
            }
            let mut pairs = Vec::new();
            for k in 1..=h {
                let sum = naive_sum(t, (0, m), (h - k, h));
                if sum >= p - EPS {
                    pairs.push(Pair { start: 0, u: m, k, sum });
                }
            }
            Ok(best_of(pairs, || Selection { fallback: h > 0 || 0.0 < p - EPS, ..full(h) }))
        }
    }
}

/// The length-5 window containing `c_s` whose centre is closest to `c_s`.
fn static_by_centering(t: &RelevanceMatrix, c_s: usize) -> Selection {
    let (m, h) = (t.rows(), t.cols());
    let len = m.min(5);
    let start = (0..=m - len)
        .filter(|&s| s <= c_s && c_s < s + len)
        .min_by_key(|&s| ((s + len / 2) as isize - c_s as isize).abs())
        .expect("some window contains c_s");
    Selection {
        window_start: start,
        u: len,
        k: h,
        achieved_sum: naive_sum(t, (start, start + len), (0, h)),
        fallback: false,
    }
}
