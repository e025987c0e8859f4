//! Extraction and analysis of person networks from recognized-text
//! correspondence archives.
//!
//! The pipeline runs page ingestion ([`corpus`]), person-name recognition
//! ([`ner`]), record linkage ([`linkage`]), knowledge-base linking
//! ([`kblink`]), co-occurrence network construction ([`network`]), graph
//! statistics ([`analysis`]) and evaluation against a curated network
//! ([`evaluation`]). [`pipeline`] wires the stages together.

pub mod analysis;
pub mod corpus;
pub mod evaluation;
pub mod kblink;
pub mod linkage;
pub mod ner;
pub mod network;
pub mod par;
pub mod pipeline;
