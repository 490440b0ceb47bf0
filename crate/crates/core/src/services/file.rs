use std::collections::HashMap;
use std::path::Path;

use super::Embedder;
use crate::error::{Error, Result};
use crate::relevance::read_embeddings;

/// Precomputed embeddings from a JSON-lines file whose `id` is the embedded
/// text itself.
pub struct FileEmbedder {
    vectors: HashMap<String, Vec<f64>>,
}

impl FileEmbedder {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let vectors = read_embeddings(path)?.into_iter().map(|r| (r.id, r.vector)).collect();
        Ok(FileEmbedder { vectors })
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }
}

impl Embedder for FileEmbedder {
    fn embed_batch(&self, texts: &[String]) -> Result<Vec<Vec<f64>>> {
        texts
            .iter()
            .map(|t| {
                self.vectors.get(t).cloned().ok_or_else(|| Error::Protocol {
                    service: "embed",
                    reason: format!("no stored embedding for {t:?}"),
                })
            })
            .collect()
    }
}
