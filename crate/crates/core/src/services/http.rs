use std::thread;
use std::time::Duration;

use serde::de::DeserializeOwned;
use serde::Serialize;

use super::{
    EmbedRequest, EmbedResponse, Embedder, ExtractRequest, ExtractResponse, GenerateRequest, GenerateResponse,
    Generator, QARequest, QAResponse, QuestionAnswerer, ServiceEndpoint, SpanExtractor, EMBED_ROUTE, EXTRACT_ROUTE,
    GENERATE_ROUTE, QA_ROUTE,
};
use crate::error::{Error, Result};

const BACKOFF_BASE_MS: u64 = 50;

/// JSON-over-HTTP client for a model server. `ureq::Agent` pools
/// connections internally and is safe to share across threads.
pub struct HttpService {
    endpoint: ServiceEndpoint,
    agent: ureq::Agent,
}

impl HttpService {
    pub fn new(endpoint: ServiceEndpoint) -> Result<Self> {
        endpoint.validate()?;
        let agent = ureq::AgentBuilder::new().timeout(Duration::from_millis(endpoint.timeout_ms)).build();
        Ok(HttpService { endpoint, agent })
    }

    pub fn endpoint(&self) -> &ServiceEndpoint {
        &self.endpoint
    }

    fn post<Req: Serialize, Resp: DeserializeOwned>(
        &self,
        service: &'static str,
        route: &str,
        req: &Req,
    ) -> Result<Resp> {
        let url = format!("{}{}", self.endpoint.base_url.trim_end_matches('/'), route);
        let mut last_failure = String::new();
        for attempt in 0..=self.endpoint.retries {
            if attempt > 0 {
                thread::sleep(Duration::from_millis(BACKOFF_BASE_MS << (attempt - 1).min(10)));
            }
            match self.agent.post(&url).send_json(req) {
                Ok(resp) => {
                    return resp
                        .into_json::<Resp>()
                        .map_err(|e| Error::Protocol { service, reason: format!("bad response body: {e}") });
                }
                Err(ureq::Error::Status(code, resp)) if code >= 500 => {
                    last_failure = format!("HTTP {code}: {}", resp.into_string().unwrap_or_default());
                }
                Err(ureq::Error::Status(code, resp)) => {
                    return Err(Error::Protocol {
                        service,
                        reason: format!("HTTP {code}: {}", resp.into_string().unwrap_or_default()),
                    });
                }
                Err(ureq::Error::Transport(t)) => last_failure = t.to_string(),
            }
        }
        Err(Error::ServiceUnavailable {
            service,
            reason: format!("{url} after {} attempt(s): {last_failure}", self.endpoint.retries + 1),
        })
    }
}

impl Embedder for HttpService {
    fn embed_batch(&self, texts: &[String]) -> Result<Vec<Vec<f64>>> {
        let resp: EmbedResponse = self.post("embed", EMBED_ROUTE, &EmbedRequest { texts: texts.to_vec() })?;
        Ok(resp.embeddings)
    }
}

impl Generator for HttpService {
    fn generate(&self, prompt: &str) -> Result<String> {
        let resp: GenerateResponse =
            self.post("generate", GENERATE_ROUTE, &GenerateRequest { prompt: prompt.to_owned() })?;
        Ok(resp.text)
    }
}

impl QuestionAnswerer for HttpService {
    fn answer(&self, question: &str, context: &str) -> Result<String> {
        let req = QARequest { question: question.to_owned(), context: context.to_owned() };
        let resp: QAResponse = self.post("qa", QA_ROUTE, &req)?;
        Ok(resp.answer)
    }
}

impl SpanExtractor for HttpService {
    fn extract_spans(&self, sentence: &str) -> Result<Vec<String>> {
        let resp: ExtractResponse =
            self.post("extract", EXTRACT_ROUTE, &ExtractRequest { sentence: sentence.to_owned() })?;
        Ok(resp.spans)
    }
}
