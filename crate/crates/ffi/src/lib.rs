//! C ABI over the selection library.
//!
//! Conventions: every fallible call returns a [`CohsStatus`] and writes its
//! result through an out-pointer. On failure a message is available from
//! [`cohs_last_error_message`] on the same thread. Handles returned through
//! out-pointers are owned by the caller and released with the matching
//! `*_free` function. Strings are NUL-terminated UTF-8.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use cohs_cqg::corpus::{split_sentences, Sentence};
use cohs_cqg::metrics::{rouge_l, tokenize};
use cohs_cqg::pipeline::normalize_answer;
use cohs_cqg::prompting::{assemble_prompt, PromptSpec};
use cohs_cqg::relevance::{build_relevance_matrix, Embedding, RelevanceMatrix};
use cohs_cqg::selector::{select, static_five_window, Selection, SelectionMode, SelectionParams};
use cohs_cqg::Error;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CohsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    OutOfRange = 3,
    EmptyHistory = 4,
    InvalidUtf8 = 5,
    Internal = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CohsMode {
    Cohs = 0,
    DynCs = 1,
    DynHs = 2,
    Static = 3,
}

impl From<CohsMode> for SelectionMode {
    fn from(mode: CohsMode) -> Self {
        match mode {
            CohsMode::Cohs => SelectionMode::Cohs,
            CohsMode::DynCs => SelectionMode::DynCs,
            CohsMode::DynHs => SelectionMode::DynHs,
            CohsMode::Static => SelectionMode::Static,
        }
    }
}

/// Selected window `[window_start, window_start + u)` and the last `k` turns.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CohsSelection {
    pub window_start: usize,
    pub u: usize,
    pub k: usize,
    pub achieved_sum: f64,
    pub fallback: bool,
}

impl From<Selection> for CohsSelection {
    fn from(s: Selection) -> Self {
        CohsSelection {
            window_start: s.window_start,
            u: s.u,
            k: s.k,
            achieved_sum: s.achieved_sum,
            fallback: s.fallback,
        }
    }
}

/// Opaque relevance matrix (sentences x history turns).
pub struct CohsMatrix {
    inner: RelevanceMatrix,
}

/// Opaque list of sentence spans.
pub struct CohsSentences {
    inner: Vec<Sentence>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(CohsStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match e.root() {
            Error::EmptyHistory => CohsStatus::EmptyHistory,
            Error::Index { .. } => CohsStatus::OutOfRange,
            Error::InvalidParams(_)
            | Error::Dim { .. }
            | Error::ZeroVector
            | Error::NonFinite
            | Error::EmptyContext
            | Error::EmptyWindow
            | Error::EmptyInput(_)
            | Error::Format(_) => CohsStatus::InvalidArgument,
            _ => CohsStatus::Internal,
        };
        Failure(status, e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(CohsStatus::NullPointer, format!("{what} is null"))
}

fn set_last_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

/// Runs `body`, converting errors and panics into a status code.
fn guard(body: impl FnOnce() -> Result<(), Failure>) -> CohsStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|slot| *slot.borrow_mut() = None);
            CohsStatus::Ok
        }
        Ok(Err(Failure(status, message))) => {
            set_last_error(message);
            status
        }
        Err(panic) => {
            let message = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(format!("panic: {message}"));
            CohsStatus::Panic
        }
    }
}

unsafe fn out_ref<'a, T>(ptr: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    ptr.as_mut().ok_or_else(|| null(what))
}

unsafe fn str_arg<'a>(ptr: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if ptr.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(ptr).to_str().map_err(|e| Failure(CohsStatus::InvalidUtf8, format!("{what}: {e}")))
}

unsafe fn f64_slice<'a>(ptr: *const f64, len: usize, what: &str) -> Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if ptr.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(ptr, len))
}

unsafe fn str_array(ptr: *const *const c_char, len: usize, what: &str) -> Result<Vec<String>, Failure> {
    if len == 0 {
        return Ok(Vec::new());
    }
    if ptr.is_null() {
        return Err(null(what));
    }
    std::slice::from_raw_parts(ptr, len).iter().map(|&p| str_arg(p, what).map(str::to_owned)).collect()
}

fn into_c_string(s: String) -> Result<*mut c_char, Failure> {
    CString::new(s)
        .map(CString::into_raw)
        .map_err(|_| Failure(CohsStatus::InvalidArgument, "result contains a NUL byte".into()))
}

fn checked_len(a: usize, b: usize) -> Result<usize, Failure> {
    a.checked_mul(b).ok_or_else(|| Failure(CohsStatus::InvalidArgument, "size overflow".into()))
}

/// Message of the last failed call on this thread, or NULL. The pointer stays
/// valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn cohs_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

const VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), "\0");

#[no_mangle]
pub extern "C" fn cohs_version() -> *const c_char {
    VERSION.as_ptr().cast()
}

/// Wraps a row-major `rows x cols` array of cosine values.
///
/// # Safety
/// `data` must point to `rows * cols` doubles (may be NULL when that is 0);
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cohs_matrix_new(
    rows: usize,
    cols: usize,
    data: *const f64,
    out: *mut *mut CohsMatrix,
) -> CohsStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let values = f64_slice(data, checked_len(rows, cols)?, "data")?.to_vec();
        let inner = RelevanceMatrix::from_vec(rows, cols, values)?;
        *out = Box::into_raw(Box::new(CohsMatrix { inner }));
        Ok(())
    })
}

/// Builds the sentence x turn cosine matrix from row-major embeddings of
/// width `dim`: `m` sentence vectors and `h` turn vectors (oldest first).
///
/// # Safety
/// `sentences` must hold `m * dim` doubles, `turns` `h * dim` doubles (NULL
/// allowed when empty); `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cohs_build_relevance_matrix(
    sentences: *const f64,
    m: usize,
    turns: *const f64,
    h: usize,
    dim: usize,
    out: *mut *mut CohsMatrix,
) -> CohsStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        if dim == 0 {
            return Err(Failure(CohsStatus::InvalidArgument, "dim must be positive".into()));
        }
        let to_embeddings = |flat: &[f64]| -> Result<Vec<Embedding>, Failure> {
            flat.chunks(dim).map(|c| Embedding::new(c.to_vec()).map_err(Failure::from)).collect()
        };
        let s = to_embeddings(f64_slice(sentences, checked_len(m, dim)?, "sentences")?)?;
        let t = to_embeddings(f64_slice(turns, checked_len(h, dim)?, "turns")?)?;
        let inner = build_relevance_matrix(&s, &t)?;
        *out = Box::into_raw(Box::new(CohsMatrix { inner }));
        Ok(())
    })
}

/// # Safety
/// `matrix` must be NULL or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cohs_matrix_free(matrix: *mut CohsMatrix) {
    if !matrix.is_null() {
        drop(Box::from_raw(matrix));
    }
}

/// # Safety
/// `matrix` must be a live handle or NULL (returns 0).
#[no_mangle]
pub unsafe extern "C" fn cohs_matrix_rows(matrix: *const CohsMatrix) -> usize {
    matrix.as_ref().map_or(0, |m| m.inner.rows())
}

/// # Safety
/// `matrix` must be a live handle or NULL (returns 0).
#[no_mangle]
pub unsafe extern "C" fn cohs_matrix_cols(matrix: *const CohsMatrix) -> usize {
    matrix.as_ref().map_or(0, |m| m.inner.cols())
}

/// # Safety
/// `matrix` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cohs_matrix_get(
    matrix: *const CohsMatrix,
    row: usize,
    col: usize,
    out: *mut f64,
) -> CohsStatus {
    guard(|| {
        let m = &matrix.as_ref().ok_or_else(|| null("matrix"))?.inner;
        let out = out_ref(out, "out")?;
        if row >= m.rows() || col >= m.cols() {
            return Err(Failure(
                CohsStatus::OutOfRange,
                format!("cell ({row}, {col}) outside {}x{}", m.rows(), m.cols()),
            ));
        }
        *out = m.get(row, col);
        Ok(())
    })
}

/// Selects a window containing sentence `c_s` (0-based) and a history
/// suffix. `p` may be `INFINITY` for the full selection; `k_fixed` is only
/// read in `DynCs` mode.
///
/// # Safety
/// `matrix` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cohs_select(
    matrix: *const CohsMatrix,
    c_s: usize,
    p: f64,
    mode: CohsMode,
    k_fixed: usize,
    out: *mut CohsSelection,
) -> CohsStatus {
    guard(|| {
        let t = &matrix.as_ref().ok_or_else(|| null("matrix"))?.inner;
        let out = out_ref(out, "out")?;
        let params = SelectionParams::new(p, mode.into(), k_fixed)?;
        *out = select(t, c_s, &params)?.into();
        Ok(())
    })
}

/// Five-sentence window for a 1-based rationale index `s`, written as a
/// 0-based start and a length.
///
/// # Safety
/// `start` and `len` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cohs_static_five_window(m: usize, s: usize, start: *mut usize, len: *mut usize) -> CohsStatus {
    guard(|| {
        let (start, len) = (out_ref(start, "start")?, out_ref(len, "len")?);
        let w = static_five_window(m, s)?;
        *start = w.start;
        *len = w.len();
        Ok(())
    })
}

/// # Safety
/// `text` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cohs_split_sentences(text: *const c_char, out: *mut *mut CohsSentences) -> CohsStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let inner = split_sentences(str_arg(text, "text")?)?;
        *out = Box::into_raw(Box::new(CohsSentences { inner }));
        Ok(())
    })
}

/// # Safety
/// `sentences` must be a live handle or NULL (returns 0).
#[no_mangle]
pub unsafe extern "C" fn cohs_sentences_len(sentences: *const CohsSentences) -> usize {
    sentences.as_ref().map_or(0, |s| s.inner.len())
}

/// Byte span `[start, end)` of sentence `index` in the original text.
///
/// # Safety
/// `sentences` must be a live handle; `start` and `end` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cohs_sentences_span(
    sentences: *const CohsSentences,
    index: usize,
    start: *mut usize,
    end: *mut usize,
) -> CohsStatus {
    guard(|| {
        let list = &sentences.as_ref().ok_or_else(|| null("sentences"))?.inner;
        let (start, end) = (out_ref(start, "start")?, out_ref(end, "end")?);
        let s = list
            .get(index)
            .ok_or_else(|| Failure(CohsStatus::OutOfRange, format!("sentence {index} of {}", list.len())))?;
        *start = s.char_start;
        *end = s.char_end;
        Ok(())
    })
}

/// # Safety
/// `sentences` must be NULL or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cohs_sentences_free(sentences: *mut CohsSentences) {
    if !sentences.is_null() {
        drop(Box::from_raw(sentences));
    }
}

/// Builds the generator input. `window` holds `window_len` sentences;
/// `questions`/`answers` hold `history_len` turns, oldest first. The result
/// must be released with [`cohs_string_free`].
///
/// # Safety
/// All string pointers must be NUL-terminated; arrays must hold the stated
/// number of elements; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cohs_assemble_prompt(
    answer: *const c_char,
    rationale: *const c_char,
    window: *const *const c_char,
    window_len: usize,
    questions: *const *const c_char,
    answers: *const *const c_char,
    history_len: usize,
    out: *mut *mut c_char,
) -> CohsStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let spec = PromptSpec {
            answer: str_arg(answer, "answer")?.to_owned(),
            rationale: str_arg(rationale, "rationale")?.to_owned(),
            window: str_array(window, window_len, "window")?,
            history: str_array(questions, history_len, "questions")?
                .into_iter()
                .zip(str_array(answers, history_len, "answers")?)
                .collect(),
        };
        *out = into_c_string(assemble_prompt(&spec)?)?;
        Ok(())
    })
}

/// Lowercases, strips punctuation and articles, collapses whitespace. The
/// result must be released with [`cohs_string_free`].
///
/// # Safety
/// `text` must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cohs_normalize_answer(text: *const c_char, out: *mut *mut c_char) -> CohsStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = into_c_string(normalize_answer(str_arg(text, "text")?))?;
        Ok(())
    })
}

/// # Safety
/// `s` must be NULL or a string returned by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cohs_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// ROUGE-L F-measure over lowercase whitespace tokens.
///
/// # Safety
/// Both strings must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cohs_rouge_l(
    reference: *const c_char,
    hypothesis: *const c_char,
    out: *mut f64,
) -> CohsStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let r = tokenize(str_arg(reference, "reference")?);
        let h = tokenize(str_arg(hypothesis, "hypothesis")?);
        *out = rouge_l(&r, &h)?;
        Ok(())
    })
}
