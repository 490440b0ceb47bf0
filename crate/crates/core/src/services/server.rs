//! Serves any [`Clients`] suite over the wire protocol. Used to host the
//! stubs for other-language clients and to test [`super::HttpService`].

use std::net::SocketAddr;
use std::sync::Arc;
use std::thread::{self, JoinHandle};

use serde::de::DeserializeOwned;
use serde::Serialize;
use tiny_http::{Header, Method, Request, Response, Server};

use super::{
    Clients, EmbedRequest, EmbedResponse, ExtractRequest, ExtractResponse, GenerateRequest, GenerateResponse,
    QARequest, QAResponse, EMBED_ROUTE, EXTRACT_ROUTE, GENERATE_ROUTE, QA_ROUTE,
};
use crate::error::{Error, Result};

const WORKERS: usize = 4;

pub struct ServiceHost {
    server: Arc<Server>,
    addr: SocketAddr,
    workers: Vec<JoinHandle<()>>,
}

impl ServiceHost {
    /// Binds `addr` (use port 0 for an ephemeral port) and starts serving.
    pub fn start(addr: &str, clients: Clients) -> Result<Self> {
        let server =
            Server::http(addr).map_err(|e| Error::ServiceUnavailable { service: "host", reason: e.to_string() })?;
        let addr = server
            .server_addr()
            .to_ip()
            .ok_or_else(|| Error::ServiceUnavailable { service: "host", reason: "not an IP listener".into() })?;
        let server = Arc::new(server);
        let workers = (0..WORKERS)
            .map(|_| {
                let server = Arc::clone(&server);
                let clients = clients.clone();
                thread::spawn(move || {
                    while let Ok(req) = server.recv() {
                        handle(req, &clients);
                    }
                })
            })
            .collect();
        Ok(ServiceHost { server, addr, workers })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }

    /// Blocks until the workers exit (they only do on shutdown).
    pub fn join(mut self) {
        for w in self.workers.drain(..) {
            let _ = w.join();
        }
    }
}

impl Drop for ServiceHost {
    fn drop(&mut self) {
        for _ in 0..self.workers.len() {
            self.server.unblock();
        }
        for w in self.workers.drain(..) {
            let _ = w.join();
        }
    }
}

fn handle(mut req: Request, clients: &Clients) {
    let mut body = String::new();
    let (status, payload) = if *req.method() != Method::Post {
        (405, error_body("only POST is supported"))
    } else if let Err(e) = req.as_reader().read_to_string(&mut body) {
        (400, error_body(&e.to_string()))
    } else {
        match req.url() {
            EMBED_ROUTE => dispatch(&body, |r: EmbedRequest| {
                Ok(EmbedResponse {
                    embeddings: clients.embed_batch(&r.texts)?.into_iter().map(|e| e.into_vec()).collect(),
                })
            }),
            GENERATE_ROUTE => {
                dispatch(&body, |r: GenerateRequest| Ok(GenerateResponse { text: clients.generate(&r.prompt)? }))
            }
            QA_ROUTE => {
                dispatch(&body, |r: QARequest| Ok(QAResponse { answer: clients.answer(&r.question, &r.context)? }))
            }
            EXTRACT_ROUTE => {
                dispatch(&body, |r: ExtractRequest| Ok(ExtractResponse { spans: clients.extract_spans(&r.sentence)? }))
            }
            other => (404, error_body(&format!("no route {other}"))),
        }
    };
    let header = Header::from_bytes("Content-Type", "application/json").expect("static header");
    let _ = req.respond(Response::from_string(payload).with_status_code(status).with_header(header));
}

fn dispatch<Req: DeserializeOwned, Resp: Serialize>(body: &str, f: impl FnOnce(Req) -> Result<Resp>) -> (u16, String) {
    let req: Req = match serde_json::from_str(body) {
        Ok(r) => r,
        Err(e) => return (400, error_body(&e.to_string())),
    };
    match f(req) {
        Ok(resp) => (200, serde_json::to_string(&resp).expect("response serializes")),
        Err(e @ (Error::EmptyInput(_) | Error::InvalidParams(_))) => (400, error_body(&e.to_string())),
        Err(e) => (500, error_body(&e.to_string())),
    }
}

fn error_body(msg: &str) -> String {
    serde_json::json!({ "error": msg }).to_string()
}
