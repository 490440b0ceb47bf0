//! Relevance-driven shortening of context and conversation history for
//! conversational question generation, with the surrounding answer-aware and
//! answer-unaware generation pipeline. Neural models sit behind the
//! [`services`] wire protocol; deterministic stubs let everything run
//! offline.

pub mod cli;
pub mod corpus;
pub mod error;
pub mod metrics;
pub mod pipeline;
pub mod prompting;
pub mod relevance;
pub mod selector;
pub mod services;

pub use error::{Error, Result};
