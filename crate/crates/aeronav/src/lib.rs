//! Desk-scale aerial dialog navigation: a drone agent that follows natural
//! language instructions over a synthetic top-down world, built on a small
//! reverse-mode autodiff tape.
//!
//! The crate is organized bottom-up:
//!
//! - [`geo`]: view-area geometry, exact rectangle IoU, navigation metrics
//! - [`autodiff`]: tape-based reverse-mode differentiation over `f64` arrays
//! - [`nn`]: linear layers, attention, and transformer blocks on the tape
//! - [`encoders`]: tokenizer, text encoder, direction and observation encoders
//! - [`model`]: the graph-biased cross-modal transformer and its output heads
//! - [`loss`]: navigation, grounding, and human-attention losses
//! - [`world`]: seeded synthetic world, episode, and instruction generation
//! - [`config`]: typed run configuration with desk and paper profiles
//! - [`checkpoint`]: bit-exact binary parameter snapshots
//! - [`dataio`]: JSONL episode/world/metric serialization and vocab files
//! - [`trainer`]: teacher/student forcing rollouts, AdamW, the training loop
//! - [`cli`]: the `aeronav` command-line interface

pub mod autodiff;
pub mod cli;
pub mod config;
pub mod encoders;
pub mod error;
pub mod geo;
pub mod nn;

pub use error::{Error, Result};
