//! Object and scene embeddings learned from segmentation-annotated images.
//!
//! The pipeline reads annotated scene corpora ([`corpus`]), builds an
//! object-by-scene occurrence matrix ([`cooccur`]) and factorizes it
//! ([`lsa`]), or trains asymmetric Skipgram/CBOW models on scene and object
//! vocabularies ([`w2v`]). Object embeddings from local spatial context use
//! per-image adjacency graphs parsed from label maps ([`spatial`]).
//! [`eval`] holds the geometry and statistics used to inspect the results.

pub mod cooccur;
pub mod corpus;
pub mod embedding;
pub mod error;
pub mod eval;
pub mod fmt;
pub mod lsa;
pub mod spatial;
pub mod w2v;

pub use error::{Error, Result};
