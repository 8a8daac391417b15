//! Biomedical question answering over a Datalog rule layer.
//!
//! A query written in a small controlled English ([`cnl`]) is compiled to a
//! single rule ([`compiler`]), combined with the relevant slice of the rule
//! layer ([`rule_layer`]), evaluated bottom-up over source-tagged facts
//! ([`kb`], [`engine`]), and each answer can be justified by a minimal
//! proof tree verbalised with its sources ([`explain`]). [`service`] ties
//! the stages together.

pub mod cnl;
pub mod compiler;
pub mod engine;
pub mod explain;
pub mod kb;
pub mod lexicon;
pub mod program;
pub mod rule_layer;
pub mod service;

pub use engine::{evaluate, DerivedStore};
pub use kb::FactStore;
pub use lexicon::{Lexicon, LexiconError};
pub use rule_layer::RuleLayer;
pub use service::Service;
