//! Run configuration: an optional JSON file overlaid by command-line flags.

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::selector::{parse_threshold, SelectionMode, SelectionParams, DEFAULT_K_FIXED};
use crate::services::{make_stub_suite, Clients, FileEmbedder, HttpService, ServiceEndpoint, StubEmbedder};

pub const DEFAULT_TIMEOUT_MS: u64 = 30_000;
pub const DEFAULT_RETRIES: u32 = 2;

/// Where a model lives: `stub:<seed>`, `file:<path>` (embedder only) or an
/// http(s) base URL.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Backend {
    Stub(u64),
    File(PathBuf),
    Http(ServiceEndpoint),
}

impl Backend {
    pub fn parse(spec: &str, timeout_ms: u64, retries: u32) -> Result<Self> {
        if let Some(seed) = spec.strip_prefix("stub:") {
            let seed = seed.parse().map_err(|_| Error::InvalidParams(format!("bad stub seed in {spec:?}")))?;
            Ok(Backend::Stub(seed))
        } else if let Some(path) = spec.strip_prefix("file:") {
            Ok(Backend::File(PathBuf::from(path)))
        } else {
            Ok(Backend::Http(ServiceEndpoint::new(spec, timeout_ms, retries)?))
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum BackendEntry {
    Spec(String),
    Endpoint(ServiceEndpoint),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum ThresholdEntry {
    Number(f64),
    Text(String),
}

/// Contents of a `--config` file. Every field is optional.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub embedder: Option<BackendEntry>,
    pub generator: Option<BackendEntry>,
    pub qa: Option<BackendEntry>,
    pub extractor: Option<BackendEntry>,
    pub timeout_ms: Option<u64>,
    pub retries: Option<u32>,
    pub p: Option<ThresholdEntry>,
    pub mode: Option<String>,
    pub k_fixed: Option<usize>,
    pub dataset: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub max_turns: Option<usize>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::InvalidParams(format!("config {}: {e}", path.display())))
    }

    pub fn threshold(&self) -> Result<Option<f64>> {
        match &self.p {
            None => Ok(None),
            Some(ThresholdEntry::Number(p)) => parse_threshold(&p.to_string()).map(Some),
            Some(ThresholdEntry::Text(s)) => parse_threshold(s).map(Some),
        }
    }

    fn backend(&self, entry: Option<&BackendEntry>, flag: Option<&str>) -> Result<Option<Backend>> {
        let timeout = self.timeout_ms.unwrap_or(DEFAULT_TIMEOUT_MS);
        let retries = self.retries.unwrap_or(DEFAULT_RETRIES);
        match (flag, entry) {
            (Some(spec), _) => Backend::parse(spec, timeout, retries).map(Some),
            (None, Some(BackendEntry::Spec(spec))) => Backend::parse(spec, timeout, retries).map(Some),
            (None, Some(BackendEntry::Endpoint(ep))) => {
                ep.validate()?;
                Ok(Some(Backend::Http(ep.clone())))
            }
            (None, None) => Ok(None),
        }
    }

    pub fn selection_params(
        &self,
        p: Option<f64>,
        mode: Option<&str>,
        k_fixed: Option<usize>,
    ) -> Result<SelectionParams> {
        let p = match p {
            Some(p) => p,
            None => self.threshold()?.ok_or_else(|| Error::InvalidParams("missing threshold --p".into()))?,
        };
        let mode = match mode.or(self.mode.as_deref()) {
            Some(m) => SelectionMode::from_str(m)?,
            None => SelectionMode::Cohs,
        };
        SelectionParams::new(p, mode, k_fixed.or(self.k_fixed).unwrap_or(DEFAULT_K_FIXED))
    }
}

/// Backend flags as given on the command line.
#[derive(Debug, Clone, Default)]
pub struct BackendFlags {
    pub embedder: Option<String>,
    pub generator: Option<String>,
    pub qa: Option<String>,
    pub extractor: Option<String>,
}

pub struct Resolved {
    pub embedder: Option<Backend>,
    pub generator: Option<Backend>,
    pub qa: Option<Backend>,
    pub extractor: Option<Backend>,
}

impl Resolved {
    pub fn new(config: &RunConfig, flags: &BackendFlags) -> Result<Self> {
        Ok(Resolved {
            embedder: config.backend(config.embedder.as_ref(), flags.embedder.as_deref())?,
            generator: config.backend(config.generator.as_ref(), flags.generator.as_deref())?,
            qa: config.backend(config.qa.as_ref(), flags.qa.as_deref())?,
            extractor: config.backend(config.extractor.as_ref(), flags.extractor.as_deref())?,
        })
    }

    /// Builds clients; `need_all` requires all four roles to be configured,
    /// otherwise only the embedder is required and the rest default to stubs.
    pub fn clients(&self, need_all: bool) -> Result<Clients> {
        let missing = |role: &str| Error::InvalidParams(format!("no --{role} backend configured"));
        let embedder = self.embedder.as_ref().ok_or_else(|| missing("embedder"))?;
        let mut clients = make_stub_suite(0);
        clients.embedder = match embedder {
            Backend::Stub(seed) => Arc::new(StubEmbedder::new(*seed)),
            Backend::File(path) => Arc::new(FileEmbedder::load(path)?),
            Backend::Http(ep) => Arc::new(HttpService::new(ep.clone())?),
        };
        let roles = [("generator", &self.generator), ("qa", &self.qa), ("extractor", &self.extractor)];
        for (role, backend) in roles {
            let backend = match backend {
                Some(b) => b,
                None if need_all => return Err(missing(role)),
                None => continue,
            };
            let stub = match backend {
                Backend::Stub(seed) => make_stub_suite(*seed),
                Backend::File(_) => {
                    return Err(Error::InvalidParams(format!("file: backends only serve embeddings, not {role}")))
                }
                Backend::Http(ep) => Clients::http(ep.clone())?,
            };
            match role {
                "generator" => clients.generator = stub.generator,
                "qa" => clients.qa = stub.qa,
                _ => clients.extractor = stub.extractor,
            }
        }
        Ok(clients)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn backend_specs() {
        assert_eq!(Backend::parse("stub:7", 1, 0).unwrap(), Backend::Stub(7));
        assert_eq!(Backend::parse("file:/tmp/e.jsonl", 1, 0).unwrap(), Backend::File("/tmp/e.jsonl".into()));
        assert!(matches!(Backend::parse("http://127.0.0.1:1", 1, 0).unwrap(), Backend::Http(_)));
        assert!(Backend::parse("stub:x", 1, 0).is_err());
        assert!(Backend::parse("ftp://x", 1, 0).is_err());
    }

    #[test]
    fn flags_win_over_config() {
        let cfg: RunConfig = serde_json::from_str(r#"{"p": "inf", "mode": "dyn_hs", "embedder": "stub:1"}"#).unwrap();
        let params = cfg.selection_params(Some(2.0), None, None).unwrap();
        assert_eq!((params.p, params.mode), (2.0, SelectionMode::DynHs));
        assert_eq!(cfg.selection_params(None, Some("cohs"), None).unwrap().p, f64::INFINITY);
        let flags = BackendFlags { embedder: Some("stub:9".into()), ..Default::default() };
        assert_eq!(Resolved::new(&cfg, &flags).unwrap().embedder, Some(Backend::Stub(9)));
        assert_eq!(Resolved::new(&cfg, &BackendFlags::default()).unwrap().embedder, Some(Backend::Stub(1)));
    }

    #[test]
    fn endpoint_objects_in_config() {
        let cfg: RunConfig =
            serde_json::from_str(r#"{"qa": {"base_url": "http://localhost:9", "timeout_ms": 5, "retries": 0}}"#)
                .unwrap();
        let r = Resolved::new(&cfg, &BackendFlags::default()).unwrap();
        assert_eq!(r.qa, Some(Backend::Http(ServiceEndpoint::new("http://localhost:9", 5, 0).unwrap())));
        assert!(serde_json::from_str::<RunConfig>(r#"{"bogus": 1}"#).is_err());
    }
}
