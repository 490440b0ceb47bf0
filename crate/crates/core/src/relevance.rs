//! Embeddings, cosine relevance and the sentence × history-turn matrix.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Slack allowed on the `[-1, 1]` bound of stored relevance values.
pub const BOUND_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct Embedding(Vec<f64>);

impl Embedding {
    pub fn new(vector: Vec<f64>) -> Result<Self> {
        if vector.is_empty() {
            return Err(Error::Dim { expected: 1, found: 0 });
        }
        if vector.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Embedding(vector))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Embedding::new(self.0.iter().map(|v| v * factor).collect())
    }
}

/// Cosine similarity, clamped to `[-1, 1]`.
pub fn cosine(a: &Embedding, b: &Embedding) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::Dim { expected: a.dim(), found: b.dim() });
    }
    let (mut dot, mut na, mut nb) = (0.0, 0.0, 0.0);
    for (x, y) in a.0.iter().zip(&b.0) {
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return Err(Error::ZeroVector);
    }
    Ok((dot / (na.sqrt() * nb.sqrt())).clamp(-1.0, 1.0))
}

/// Text embedded for a history turn: question and answer joined by a space.
pub fn turn_text(question: &str, answer: &str) -> String {
    match (question.is_empty(), answer.is_empty()) {
        (_, true) => question.to_owned(),
        (true, false) => answer.to_owned(),
        _ => format!("{question} {answer}"),
    }
}

/// Row-major `rows × cols` matrix; rows are context sentences, columns are
/// history turns oldest first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MatrixFile", into = "MatrixFile")]
pub struct RelevanceMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct MatrixFile {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl TryFrom<MatrixFile> for RelevanceMatrix {
    type Error = Error;

    fn try_from(f: MatrixFile) -> Result<Self> {
        RelevanceMatrix::from_vec(f.rows, f.cols, f.data)
    }
}

impl From<RelevanceMatrix> for MatrixFile {
    fn from(m: RelevanceMatrix) -> Self {
        MatrixFile { rows: m.rows, cols: m.cols, data: m.data }
    }
}

impl RelevanceMatrix {
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 {
            return Err(Error::Format("matrix needs at least one row".into()));
        }
        if rows.checked_mul(cols) != Some(data.len()) {
            return Err(Error::Format(format!("{rows}x{cols} matrix with {} values", data.len())));
        }
        if let Some(v) = data.iter().find(|v| !v.is_finite() || v.abs() > 1.0 + BOUND_EPS) {
            return Err(Error::Format(format!("value {v} outside [-1, 1]")));
        }
        Ok(RelevanceMatrix { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::Format("ragged rows".into()));
        }
        Self::from_vec(rows.len(), cols, rows.concat())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        assert!(row < self.rows && col < self.cols, "({row}, {col}) outside {}x{}", self.rows, self.cols);
        self.data[row * self.cols + col]
    }

    /// The first `cols` columns, i.e. the matrix for an earlier turn of the
    /// same conversation.
    pub fn leading_columns(&self, cols: usize) -> Result<Self> {
        if cols > self.cols {
            return Err(Error::index(cols, format!("matrix has {} columns", self.cols)));
        }
        let data =
            (0..self.rows).flat_map(|r| self.data[r * self.cols..r * self.cols + cols].iter().copied()).collect();
        Ok(RelevanceMatrix { rows: self.rows, cols, data })
    }

    /// Sum over `rows × cols`, accumulated row by row, left to right.
    pub fn block_sum(&self, rows: std::ops::Range<usize>, cols: std::ops::Range<usize>) -> f64 {
        let mut acc = 0.0;
        for r in rows {
            for c in cols.clone() {
                acc += self.data[r * self.cols + c];
            }
        }
        acc
    }

    pub fn total(&self) -> f64 {
        self.block_sum(0..self.rows, 0..self.cols)
    }

    pub fn store(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let json = serde_json::to_string(self).map_err(|e| Error::Format(e.to_string()))?;
        fs::write(path, json).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Format(e.to_string()))
    }
}

/// `T[i][j] = cosine(sentence_i, turn_j)`.
pub fn build_relevance_matrix(sentence_embs: &[Embedding], turn_embs: &[Embedding]) -> Result<RelevanceMatrix> {
    if sentence_embs.is_empty() {
        return Err(Error::EmptyInput("sentence embeddings"));
    }
    let mut data = Vec::with_capacity(sentence_embs.len() * turn_embs.len());
    for (i, a) in sentence_embs.iter().enumerate() {
        for (j, b) in turn_embs.iter().enumerate() {
            let v = cosine(a, b).map_err(|e| Error::Cell { row: i, col: j, source: Box::new(e) })?;
            data.push(v);
        }
    }
    RelevanceMatrix::from_vec(sentence_embs.len(), turn_embs.len(), data)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingRecord {
    pub id: String,
    pub vector: Vec<f64>,
}

/// Reads a JSON-lines embedding file; blank lines are skipped.
pub fn read_embeddings(path: impl AsRef<Path>) -> Result<Vec<EmbeddingRecord>> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: EmbeddingRecord =
            serde_json::from_str(&line).map_err(|e| Error::Format(format!("line {}: {e}", lineno + 1)))?;
        Embedding::new(rec.vector.clone()).map_err(|e| Error::Format(format!("line {}: {e}", lineno + 1)))?;
        out.push(rec);
    }
    Ok(out)
}

pub fn write_embeddings(path: impl AsRef<Path>, records: &[EmbeddingRecord]) -> Result<()> {
    let path = path.as_ref();
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    for rec in records {
        let line = serde_json::to_string(rec).map_err(|e| Error::Format(e.to_string()))?;
        writeln!(file, "{line}").map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn emb(v: &[f64]) -> Embedding {
        Embedding::new(v.to_vec()).unwrap()
    }

    #[test]
    fn cosine_examples() {
        assert_eq!(cosine(&emb(&[1.0, 0.0]), &emb(&[1.0, 0.0])).unwrap(), 1.0);
        assert_eq!(cosine(&emb(&[1.0, 0.0]), &emb(&[0.0, 1.0])).unwrap(), 0.0);
        let c = cosine(&emb(&[1.0, 1.0]), &emb(&[1.0, 0.0])).unwrap();
        assert!((c - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
    }

    #[test]
    fn cosine_errors() {
        assert!(matches!(cosine(&emb(&[1.0]), &emb(&[1.0, 0.0])), Err(Error::Dim { .. })));
        assert!(matches!(cosine(&emb(&[0.0, 0.0]), &emb(&[1.0, 0.0])), Err(Error::ZeroVector)));
        assert!(Embedding::new(vec![]).is_err());
        assert!(matches!(Embedding::new(vec![f64::NAN]), Err(Error::NonFinite)));
    }

    #[test]
    fn turn_text_examples() {
        assert_eq!(turn_text("Who?", "Mary"), "Who? Mary");
        assert_eq!(turn_text("Who?", ""), "Who?");
        assert_eq!(turn_text("A", "B"), "A B");
    }

    #[test]
    fn identity_pattern() {
        let axes = [emb(&[1.0, 0.0]), emb(&[0.0, 1.0])];
        let t = build_relevance_matrix(&axes, &axes).unwrap();
        assert_eq!(t.data(), &[1.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn empty_history_gives_m_by_zero() {
        let s = [emb(&[1.0]), emb(&[2.0]), emb(&[-1.0])];
        let t = build_relevance_matrix(&s, &[]).unwrap();
        assert_eq!((t.rows(), t.cols()), (3, 0));
    }

    #[test]
    fn cell_errors_carry_coordinates() {
        let s = [emb(&[1.0, 0.0]), emb(&[0.0, 0.0])];
        let h = [emb(&[1.0, 1.0])];
        match build_relevance_matrix(&s, &h) {
            Err(Error::Cell { row: 1, col: 0, source }) => assert!(matches!(*source, Error::ZeroVector)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn random_matrix_matches_scalar_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut draw = |n: usize| -> Vec<Vec<f64>> {
            (0..n).map(|_| (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect()
        };
        let s = draw(4);
        let h = draw(3);
        let t = build_relevance_matrix(
            &s.iter().map(|v| emb(v)).collect::<Vec<_>>(),
            &h.iter().map(|v| emb(v)).collect::<Vec<_>>(),
        )
        .unwrap();
        for (i, a) in s.iter().enumerate() {
            for (j, b) in h.iter().enumerate() {
                let mut dot = 0.0;
                let mut na = 0.0;
                let mut nb = 0.0;
                for d in 0..6 {
                    dot += a[d] * b[d];
                    na += a[d] * a[d];
                    nb += b[d] * b[d];
                }
                let expected = dot / (na.sqrt() * nb.sqrt());
                assert!((t.get(i, j) - expected).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn store_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let data: Vec<f64> = (0..20).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let t = RelevanceMatrix::from_vec(5, 4, data).unwrap();
        let path = dir.path().join("t.json");
        t.store(&path).unwrap();
        let back = RelevanceMatrix::load(&path).unwrap();
        assert_eq!((back.rows(), back.cols()), (5, 4));
        for (a, b) in t.data().iter().zip(back.data()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }

        let empty = RelevanceMatrix::from_vec(3, 0, vec![]).unwrap();
        empty.store(&path).unwrap();
        assert_eq!(RelevanceMatrix::load(&path).unwrap(), empty);
    }

    #[test]
    fn truncated_matrix_file_is_format_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.json");
        let t = RelevanceMatrix::from_vec(2, 2, vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        t.store(&path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        fs::write(&path, &text[..text.len() / 2]).unwrap();
        assert!(matches!(RelevanceMatrix::load(&path), Err(Error::Format(_))));
        fs::write(&path, r#"{"rows":2,"cols":2,"data":[0.1]}"#).unwrap();
        assert!(matches!(RelevanceMatrix::load(&path), Err(Error::Format(_))));
        assert!(matches!(RelevanceMatrix::load(dir.path().join("missing")), Err(Error::Io { .. })));
    }

    #[test]
    fn embedding_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("e.jsonl");
        let recs = vec![
            EmbeddingRecord { id: "a".into(), vector: vec![0.1, -0.2] },
            EmbeddingRecord { id: "b".into(), vector: vec![1.0, 3.0] },
        ];
        write_embeddings(&path, &recs).unwrap();
        assert_eq!(read_embeddings(&path).unwrap(), recs);
        fs::write(&path, "{\"id\":\"a\",\"vector\":[]}\n").unwrap();
        assert!(matches!(read_embeddings(&path), Err(Error::Format(_))));
    }

    fn vec_strategy() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-100.0f64..100.0, 4).prop_filter("non-zero", |v| v.iter().any(|x| x.abs() > 1e-3))
    }

    proptest! {
        #[test]
        fn cosine_symmetric_bounded_scale_invariant(a in vec_strategy(), b in vec_strategy(), s in 0.01f64..1000.0) {
            let (a, b) = (emb(&a), emb(&b));
            let ab = cosine(&a, &b).unwrap();
            prop_assert_eq!(ab, cosine(&b, &a).unwrap());
            prop_assert!(ab.abs() <= 1.0 + BOUND_EPS);
            let scaled = cosine(&a.scaled(s).unwrap(), &b).unwrap();
            prop_assert!((scaled - ab).abs() < 1e-12);
        }
    }
}
