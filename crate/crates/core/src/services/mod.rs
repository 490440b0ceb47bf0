//! Contracts for the four external models and the clients that reach them.
//!
//! Every backend (HTTP, stub, embedding file) implements the raw traits;
//! [`Clients`] wraps them and enforces the response invariants, so a broken
//! backend surfaces as [`Error::Protocol`] no matter how it is hosted.
//!
//! Wire protocol: JSON over HTTP `POST` to `/embed`, `/generate`, `/qa` and
//! `/extract`, with the request/response records defined here.

mod file;
mod http;
mod server;
mod stub;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use file::FileEmbedder;
pub use http::HttpService;
pub use server::ServiceHost;
pub use stub::{make_stub_suite, StubEmbedder, StubExtractor, StubGenerator, StubQa, STUB_DIM};

use crate::error::{Error, Result};
use crate::relevance::Embedding;

pub const EMBED_ROUTE: &str = "/embed";
pub const GENERATE_ROUTE: &str = "/generate";
pub const QA_ROUTE: &str = "/qa";
pub const EXTRACT_ROUTE: &str = "/extract";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedRequest {
    pub texts: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedResponse {
    pub embeddings: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerateRequest {
    pub prompt: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerateResponse {
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QARequest {
    pub question: String,
    pub context: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QAResponse {
    pub answer: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractRequest {
    pub sentence: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractResponse {
    pub spans: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ServiceEndpoint {
    pub base_url: String,
    #[serde(default = "ServiceEndpoint::default_timeout_ms")]
    pub timeout_ms: u64,
    #[serde(default = "ServiceEndpoint::default_retries")]
    pub retries: u32,
}

impl ServiceEndpoint {
    pub fn new(base_url: impl Into<String>, timeout_ms: u64, retries: u32) -> Result<Self> {
        let ep = ServiceEndpoint { base_url: base_url.into(), timeout_ms, retries };
        ep.validate()?;
        Ok(ep)
    }

    pub fn validate(&self) -> Result<()> {
        if self.timeout_ms == 0 {
            return Err(Error::InvalidParams("timeout_ms must be positive".into()));
        }
        if !(self.base_url.starts_with("http://") || self.base_url.starts_with("https://")) {
            return Err(Error::InvalidParams(format!("endpoint {:?} is not an http(s) URL", self.base_url)));
        }
        Ok(())
    }

    fn default_timeout_ms() -> u64 {
        30_000
    }

    fn default_retries() -> u32 {
        2
    }
}

pub trait Embedder: Send + Sync {
    fn embed_batch(&self, texts: &[String]) -> Result<Vec<Vec<f64>>>;
}

pub trait Generator: Send + Sync {
    fn generate(&self, prompt: &str) -> Result<String>;
}

pub trait QuestionAnswerer: Send + Sync {
    fn answer(&self, question: &str, context: &str) -> Result<String>;
}

pub trait SpanExtractor: Send + Sync {
    fn extract_spans(&self, sentence: &str) -> Result<Vec<String>>;
}

/// The model backends a pipeline run talks to.
#[derive(Clone)]
pub struct Clients {
    pub embedder: Arc<dyn Embedder>,
    pub generator: Arc<dyn Generator>,
    pub qa: Arc<dyn QuestionAnswerer>,
    pub extractor: Arc<dyn SpanExtractor>,
}

impl Clients {
    /// One HTTP endpoint hosting all four routes.
    pub fn http(endpoint: ServiceEndpoint) -> Result<Self> {
        let svc = Arc::new(HttpService::new(endpoint)?);
        Ok(Clients { embedder: svc.clone(), generator: svc.clone(), qa: svc.clone(), extractor: svc })
    }

    pub fn with_embedder(mut self, embedder: Arc<dyn Embedder>) -> Self {
        self.embedder = embedder;
        self
    }

    pub fn embed_batch(&self, texts: &[String]) -> Result<Vec<Embedding>> {
        if texts.is_empty() {
            return Ok(Vec::new());
        }
        let raw = self.embedder.embed_batch(texts)?;
        check_embeddings(texts.len(), raw)
    }

    pub fn generate(&self, prompt: &str) -> Result<String> {
        if prompt.is_empty() {
            return Err(Error::EmptyInput("prompt"));
        }
        let text = self.generator.generate(prompt)?;
        if text.trim().is_empty() {
            return Err(protocol("generate", "empty generation"));
        }
        Ok(text)
    }

    pub fn answer(&self, question: &str, context: &str) -> Result<String> {
        if question.is_empty() || context.is_empty() {
            return Err(Error::EmptyInput("question or context"));
        }
        self.qa.answer(question, context)
    }

    pub fn extract_spans(&self, sentence: &str) -> Result<Vec<String>> {
        if sentence.is_empty() {
            return Err(Error::EmptyInput("sentence"));
        }
        let spans = self.extractor.extract_spans(sentence)?;
        if let Some(bad) = spans.iter().find(|s| s.is_empty() || !sentence.contains(s.as_str())) {
            return Err(protocol("extract", format!("span {bad:?} is not a substring of the sentence")));
        }
        Ok(spans)
    }
}

fn protocol(service: &'static str, reason: impl Into<String>) -> Error {
    Error::Protocol { service, reason: reason.into() }
}

pub(crate) fn check_embeddings(expected: usize, raw: Vec<Vec<f64>>) -> Result<Vec<Embedding>> {
    if raw.len() != expected {
        return Err(protocol("embed", format!("{} embeddings for {expected} texts", raw.len())));
    }
    let dim = raw.first().map_or(0, Vec::len);
    raw.into_iter()
        .map(|v| {
            if v.len() != dim {
                return Err(protocol("embed", format!("mixed dimensions {dim} and {}", v.len())));
            }
            Embedding::new(v).map_err(|e| protocol("embed", e.to_string()))
        })
        .collect()
}
