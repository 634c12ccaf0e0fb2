//! Part-of-speech tagging with hierarchical bidirectional LSTMs.
//!
//! The crate contains a small reverse-mode autodiff engine ([`autodiff`]),
//! recurrent cells ([`recurrent`]), token representations built from words,
//! characters and bytes ([`repr`]), the bi-LSTM tagger with its optional
//! log-frequency auxiliary head ([`tagger`]), a trigram HMM baseline
//! ([`tnt`]), corpus handling ([`corpus`]) and the evaluation and experiment
//! harness ([`harness`]).

pub mod autodiff;
pub mod container;
pub mod corpus;
pub mod error;
pub mod harness;
pub mod recurrent;
pub mod repr;
pub mod synthetic;
pub mod tagger;
pub mod tnt;

pub use error::{Error, Result};
